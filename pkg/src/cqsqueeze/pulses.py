"""Exact cubic-quintic solitons, their bistable width/amplitude family, and Gaussian pulses.

Widths returned by :func:`width_amplitude_residual`, :func:`solve_bistable_amplitudes`,
:func:`min_width` and :func:`family_curve` follow the closed-form width relation
``cosh(tau*sqrt(chi A^2 + gamma A^4)/2) = (3 chi + 4 gamma A^2)/(chi + 2 gamma A^2)``.
That ``tau`` is four times the half-width at half maximum of ``|U|^2``, i.e. twice
the intensity FWHM measured by :func:`fwhm_from_profile`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from cqsqueeze.grid import ComplexField, TimeGrid


class DomainError(ValueError):
    """Parameters outside the region where a soliton or width root exists."""


@dataclass(frozen=True)
class CqParams:
    """Cubic (``chi``, normalized to +-1) and quintic (``gamma``) coefficients."""

    chi: float = 1.0
    gamma: float = 0.0

    def __post_init__(self):
        if self.chi not in (1, -1):
            raise ValueError(f"chi must be +1 or -1, got {self.chi}")
        object.__setattr__(self, "chi", float(self.chi))
        object.__setattr__(self, "gamma", float(self.gamma))


@dataclass(frozen=True)
class SolitonSpec:
    params: CqParams
    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise DomainError(f"propagation constant must be positive, got {self.beta}")
        if 1.0 + 4.0 * self.params.gamma * self.beta <= 0:
            raise DomainError("soliton requires 1 + 4*gamma*beta > 0")
        if self.peak_power <= 0:
            raise DomainError("soliton has nonpositive peak power")

    @classmethod
    def from_amplitude(cls, params: CqParams, amplitude: float) -> "SolitonSpec":
        return cls(params, beta_from_amplitude(params, amplitude))

    @property
    def peak_power(self) -> float:
        return peak_power(self)

    @property
    def amplitude(self) -> float:
        return float(np.sqrt(self.peak_power))

    @property
    def tau(self) -> float:
        """Width from the closed-form width relation (twice the intensity FWHM)."""
        return _tau_of_amplitude(self.params, self.amplitude)

    @property
    def soliton_period(self) -> float:
        """Distance unit ``pi / (2 beta)`` used for plot axes."""
        return soliton_period(self.beta)


@dataclass(frozen=True)
class GaussianSpec:
    """Gaussian ansatz ``A exp(-t^2/(2 alpha^2) + i a t^2)``."""

    amplitude: float
    alpha: float
    chirp: float = 0.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"Gaussian width must be positive, got {self.alpha}")

    @classmethod
    def from_energy(cls, energy: float, alpha: float, chirp: float = 0.0) -> "GaussianSpec":
        """Amplitude from ``E0 = alpha * A^2``."""
        if energy < 0:
            raise ValueError("energy must be nonnegative")
        return cls(float(np.sqrt(energy / alpha)), alpha, chirp)

    @property
    def energy(self) -> float:
        return self.alpha * abs(self.amplitude) ** 2

    @property
    def equivalent_beta(self) -> float:
        """``beta`` of the cubic soliton ``sqrt(beta) sech(sqrt(beta) t)`` with the same intensity FWHM."""
        sech_fwhm_unit = 2.0 * np.arccosh(np.sqrt(2.0))
        gauss_fwhm = 2.0 * self.alpha * np.sqrt(np.log(2.0))
        return float((sech_fwhm_unit / gauss_fwhm) ** 2)

    @property
    def soliton_period(self) -> float:
        return soliton_period(self.equivalent_beta)


def soliton_period(beta: float) -> float:
    return float(np.pi / (2.0 * beta))


def peak_power(spec: SolitonSpec) -> float:
    """``A^2 = 2 beta / (sqrt(1 + 4 gamma beta) + chi)``."""
    chi, gamma = spec.params.chi, spec.params.gamma
    disc = 1.0 + 4.0 * gamma * spec.beta
    if disc <= 0:
        raise DomainError("soliton requires 1 + 4*gamma*beta > 0")
    denom = np.sqrt(disc) + chi
    if denom <= 0:
        raise DomainError("no soliton: sqrt(1 + 4 gamma beta) + chi <= 0")
    return float(2.0 * spec.beta / denom)


def beta_from_amplitude(params: CqParams, amplitude: float) -> float:
    """Propagation constant of the soliton with peak amplitude ``amplitude``.

    Writing ``s = sqrt(1 + 4 gamma beta)``, the peak-power relation becomes a quadratic
    in ``s`` whose admissible root is ``s = chi + 2 gamma A^2``; hence
    ``beta = chi A^2 + gamma A^4``, valid when ``s > 0`` and ``beta > 0``.
    """
    if not amplitude > 0:
        raise DomainError(f"amplitude must be positive, got {amplitude}")
    chi, gamma = params.chi, params.gamma
    p = amplitude**2
    s = chi + 2.0 * gamma * p
    beta = chi * p + gamma * p * p
    if s <= 0 or beta <= 0:
        raise DomainError(
            f"no soliton with amplitude {amplitude} for chi={chi}, gamma={gamma}"
        )
    residual = 2.0 * beta / (np.sqrt(1.0 + 4.0 * gamma * beta) + chi) - p
    if abs(residual) > 1e-12 * max(1.0, p):
        raise DomainError(f"peak-power inversion lost accuracy (residual {residual:.3e})")
    return float(beta)


def soliton_profile(spec: SolitonSpec, grid: TimeGrid) -> ComplexField:
    """Soliton envelope at ``z = 0``: ``sqrt(2 beta / (s cosh(2 sqrt(beta) t) + chi))``."""
    chi, gamma, beta = spec.params.chi, spec.params.gamma, spec.beta
    s = np.sqrt(1.0 + 4.0 * gamma * beta)
    denom = s * np.cosh(2.0 * np.sqrt(beta) * grid.t) + chi
    if np.any(denom <= 0):
        raise DomainError("soliton denominator is nonpositive on the grid")
    return ComplexField(grid, np.sqrt(2.0 * beta / denom))


def _admissible(params: CqParams, amplitude) -> np.ndarray:
    p = np.asarray(amplitude, dtype=float) ** 2
    chi, gamma = params.chi, params.gamma
    return (chi + 2.0 * gamma * p > 0) & (chi * p + gamma * p * p > 0) & (p > 0)


def width_amplitude_residual(params: CqParams, amplitude: float, tau: float) -> float:
    """``cosh(tau sqrt(chi A^2 + gamma A^4)/2) - (3 chi + 4 gamma A^2)/(chi + 2 gamma A^2)``."""
    chi, gamma = params.chi, params.gamma
    p = amplitude**2
    k2 = chi * p + gamma * p * p
    if k2 <= 0:
        raise DomainError("chi A^2 + gamma A^4 must be positive")
    denom = chi + 2.0 * gamma * p
    if denom == 0:
        raise DomainError("chi + 2 gamma A^2 vanishes")
    return float(np.cosh(0.5 * tau * np.sqrt(k2)) - (3.0 * chi + 4.0 * gamma * p) / denom)


def _tau_of_amplitude(params: CqParams, amplitude):
    """Width solving the width relation exactly; NaN where the amplitude is inadmissible."""
    a = np.asarray(amplitude, dtype=float)
    chi, gamma = params.chi, params.gamma
    p = a**2
    ok = _admissible(params, a)
    with np.errstate(invalid="ignore", divide="ignore"):
        rhs = (3.0 * chi + 4.0 * gamma * p) / (chi + 2.0 * gamma * p)
        ok &= rhs >= 1.0
        tau = 2.0 * np.arccosh(np.where(ok, rhs, 1.0)) / np.sqrt(np.where(ok, chi * p + gamma * p * p, 1.0))
    tau = np.where(ok, tau, np.nan)
    return float(tau) if tau.ndim == 0 else tau


def _amplitude_window(params: CqParams, a_max: float) -> tuple[float, float]:
    chi, gamma = params.chi, params.gamma
    lo, hi = 1e-6, a_max
    if gamma < 0:
        if chi < 0:
            return (np.nan, np.nan)
        hi = min(hi, np.sqrt(-chi / (2.0 * gamma)) * (1.0 - 1e-9))
    elif chi < 0:
        if gamma == 0:
            return (np.nan, np.nan)
        lo = np.sqrt(-chi / gamma) * (1.0 + 1e-9)
    return lo, hi


def solve_bistable_amplitudes(
    params: CqParams, tau: float, *, n_scan: int = 4000, a_max: float = 100.0
) -> list[float]:
    """All amplitudes whose soliton has width ``tau``, ascending.

    A log-spaced scan over the admissible window brackets sign changes of the width
    residual; each bracket is refined by Brent's method.
    """
    lo, hi = _amplitude_window(params, a_max)
    if not np.isfinite(lo) or lo >= hi:
        return []
    grid = np.geomspace(lo, hi, n_scan)
    g = _log_residual(params, grid, tau)
    roots = []
    for i in np.flatnonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0):
        root = optimize.brentq(
            lambda a: _log_residual(params, a, tau), grid[i], grid[i + 1], xtol=1e-15, rtol=1e-15
        )
        roots.append(float(root))
    return [r for r in roots if abs(width_amplitude_residual(params, r, tau)) < 1e-10 * max(1.0, _rhs(params, r))]


def _rhs(params: CqParams, a: float) -> float:
    p = a * a
    return (3.0 * params.chi + 4.0 * params.gamma * p) / (params.chi + 2.0 * params.gamma * p)


def _log_residual(params: CqParams, a, tau):
    # tau(A) - tau has the same roots as the width residual and stays O(1) near the window edges
    return _tau_of_amplitude(params, a) - tau


def min_width(params: CqParams) -> tuple[float, float]:
    """Turning point ``(tau_min, A_at_min)`` of the bistable branch (``chi = +1``, ``gamma < 0``)."""
    if params.chi != 1 or params.gamma >= 0:
        raise DomainError("a width minimum exists only for chi = +1 and gamma < 0")
    lo, hi = _amplitude_window(params, np.inf)
    scan = np.geomspace(lo, hi, 4000)
    taus = _tau_of_amplitude(params, scan)
    i = int(np.nanargmin(taus))
    bracket = (scan[max(i - 1, 0)], scan[i], scan[min(i + 1, scan.size - 1)])
    res = optimize.minimize_scalar(
        lambda a: _tau_of_amplitude(params, a), bracket=bracket, method="brent", tol=1e-12
    )
    return float(res.fun), float(res.x)


def family_curve(params: CqParams, amplitudes) -> np.ndarray:
    """Rows ``(A, tau)`` of the width/amplitude curve; inadmissible amplitudes are dropped."""
    a = np.asarray(amplitudes, dtype=float)
    tau = np.atleast_1d(_tau_of_amplitude(params, a))
    keep = np.isfinite(tau)
    return np.column_stack([a[keep], tau[keep]])


def gaussian_pulse(spec: GaussianSpec, grid: TimeGrid) -> ComplexField:
    t = grid.t
    return ComplexField(
        grid, spec.amplitude * np.exp(-(t**2) / (2.0 * spec.alpha**2) + 1j * spec.chirp * t**2)
    )


def fwhm_from_profile(f: ComplexField) -> float:
    """Full width at half maximum of ``|f|^2`` with linear interpolation between samples."""
    p = f.abs2
    t = f.grid.t
    i0 = int(np.argmax(p))
    half = 0.5 * p[i0]
    right = i0
    while right + 1 < p.size and p[right + 1] > half:
        right += 1
    left = i0
    while left > 0 and p[left - 1] > half:
        left -= 1
    if right + 1 >= p.size or left == 0:
        raise ValueError("profile does not fall below half maximum inside the window")
    tr = t[right] + (p[right] - half) / (p[right] - p[right + 1]) * (t[right + 1] - t[right])
    tl = t[left] - (p[left] - half) / (p[left] - p[left - 1]) * (t[left] - t[left - 1])
    return float(tr - tl)
