"""Numerical self-checks shared by ``cqsqueeze validate`` and the test suite."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from cqsqueeze.fluctuations import back_propagate_batch, forward_propagate_batch
from cqsqueeze.grid import ComplexField, TimeGrid
from cqsqueeze.propagator import StepConfig, Trajectory, propagate
from cqsqueeze.pulses import CqParams
from cqsqueeze.squeezing import coherent_variance, minimize_form, ratio_at


REFERENCE_MEMORY_CAP = 256 * 1024**2


def smooth_random_fields(grid: TimeGrid, count: int, rng, *, width: float = 4.0, band: float = 6.0) -> np.ndarray:
    """Unit-norm random fields, band-limited to ``|omega| <~ band`` and localized to ``|t| <~ 3 width``."""
    spec = rng.normal(size=(count, grid.n)) + 1j * rng.normal(size=(count, grid.n))
    spec *= np.exp(-((grid.omega / band) ** 2))
    vals = np.fft.ifft(spec, axis=-1) * np.exp(-((grid.t / width) ** 2))
    vals /= np.sqrt(np.sum(np.abs(vals) ** 2, axis=-1, keepdims=True) * grid.dt)
    return vals


def _pair(f: np.ndarray, u: np.ndarray, dt: float) -> np.ndarray:
    return np.real(np.sum(np.conj(f) * u, axis=-1)) * dt


def _norms(x: np.ndarray, dt: float) -> np.ndarray:
    return np.sqrt(np.sum(np.abs(x) ** 2, axis=-1) * dt)


def pairing_defects(traj: Trajectory, u0: np.ndarray, f_L: np.ndarray) -> np.ndarray:
    """``|<f_0|u(0)> - <f_L|u(L)>| / (||f_L|| ||u_0||)`` with both sides from ``traj``."""
    dt = traj.grid.dt
    uL = forward_propagate_batch(u0, traj)
    f0 = back_propagate_batch(f_L, traj)
    return np.abs(_pair(f0, u0, dt) - _pair(f_L, uL, dt)) / (_norms(f_L, dt) * _norms(u0, dt))


def continuum_pairing_defects(
    initial: ComplexField,
    params: CqParams,
    L: float,
    dz: float,
    u0: np.ndarray,
    f_L: np.ndarray,
    *,
    reference_factor: int = 16,
    reference: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Pairing defect of the back-propagated projection against a refined forward solution.

    The discrete adjoint is the exact transpose of the discrete forward map, so its
    own pairing defect is at rounding level.  This measures what remains: how far
    ``<f_0|u_0>`` at step ``dz`` is from ``<f_L|u(L)>`` with ``u(L)`` integrated at
    ``dz / reference_factor``.  Returns ``(defects, reference_uL)``.
    """
    dt = initial.grid.dt
    if reference is None:
        ref_traj = propagate(initial, params, L, StepConfig(dz=dz / reference_factor, memory_cap=REFERENCE_MEMORY_CAP))
        reference = forward_propagate_batch(u0, ref_traj)
    traj = propagate(initial, params, L, StepConfig(dz=dz))
    f0 = back_propagate_batch(f_L, traj)
    defects = np.abs(_pair(f0, u0, dt) - _pair(f_L, reference, dt)) / (_norms(f_L, dt) * _norms(u0, dt))
    return defects, reference


def brute_force_coherent_variance(f: np.ndarray, dt: float, alpha: np.ndarray | None = None) -> float:
    """Variance of ``<f|u>`` with ``u(t_j) = a_j / sqrt(dt)`` over explicit mode moments.

    ``X = sum_j (c_j a_j + conj(c_j) a_j^dag)`` with ``c_j = conj(f_j) sqrt(dt) / 2``.  For a
    coherent state with amplitudes ``alpha`` the moments are ``<a_j a_k^dag> = alpha_j
    conj(alpha_k) + delta_jk`` and the normally ordered ones factorize.
    """
    f = np.asarray(f, dtype=complex)
    n = f.size
    if alpha is None:
        alpha = np.zeros(n, dtype=complex)
    c = np.conj(f) * math.sqrt(dt) / 2
    second = 0.0 + 0.0j
    for j in range(n):
        for k in range(n):
            aj, ak = alpha[j], alpha[k]
            delta = 1.0 if j == k else 0.0
            a_a = aj * ak
            a_ad = aj * np.conj(ak) + delta
            ad_a = np.conj(aj) * ak
            ad_ad = np.conj(aj) * np.conj(ak)
            second += (
                c[j] * c[k] * a_a
                + c[j] * np.conj(c[k]) * a_ad
                + np.conj(c[j]) * c[k] * ad_a
                + np.conj(c[j]) * np.conj(c[k]) * ad_ad
            )
    mean = sum(c[j] * alpha[j] + np.conj(c[j]) * np.conj(alpha[j]) for j in range(n))
    return float((second - mean * mean).real)


def grid_minimize_form(a, b, c, n_grid=10_000):
    """Minimize R(theta) by grid search over [0, pi), then polish within the bracketing cells.

    The raw grid alone is only accurate to (R_max - R_min) * sin^2(pi / (2 n_grid)).
    """
    theta = np.linspace(0.0, np.pi, n_grid, endpoint=False)
    k = int(np.argmin(ratio_at(theta, a, b, c)))
    h = np.pi / n_grid
    res = minimize_scalar(lambda x: float(ratio_at(x, a, b, c)), bounds=(theta[k] - h, theta[k] + h),
                          method="bounded", options={"xatol": 1e-12})
    return float(min(res.fun, ratio_at(theta[k], a, b, c))), float(res.x % np.pi)


@dataclass
class Check:
    name: str
    measured: float
    tolerance: float
    passed: bool
    detail: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "measured": float(self.measured),
            "tolerance": float(self.tolerance),
            **self.detail,
        }


def run_suite(
    initial: ComplexField,
    params: CqParams,
    L: float,
    cfg: StepConfig = StepConfig(),
    *,
    n_pairs: int = 20,
    seed: int = 0,
    pairing_tolerance: float = 1e-6,
    continuum_tolerance: float = 1e-3,
) -> list[Check]:
    """Invariant checks on one background pulse.

    Pairing conservation (discrete and against a refined reference), second-order
    convergence of both, conserved quantities, the coherent-variance oracle and the
    closed-form phase optimum.
    """
    rng = np.random.default_rng(seed)
    grid = initial.grid
    checks: list[Check] = []

    traj = propagate(initial, params, L, cfg)
    checks.append(Check("photon_number_drift", traj.photon_drift(), 1e-10, traj.photon_drift() < 1e-10))
    checks.append(Check("hamiltonian_drift", traj.hamiltonian_drift(), 1e-8, traj.hamiltonian_drift() < 1e-8))

    u0 = smooth_random_fields(grid, n_pairs, rng)
    fL = smooth_random_fields(grid, n_pairs, rng)
    if L > 0:
        d = pairing_defects(traj, u0, fL)
        checks.append(Check("pairing_defect_discrete", float(d.max()), pairing_tolerance, d.max() < pairing_tolerance))
        cont, ref = continuum_pairing_defects(initial, params, L, cfg.dz, u0, fL)
        checks.append(Check("pairing_defect_continuum", float(cont.max()), continuum_tolerance,
                            cont.max() < continuum_tolerance))
        half, _ = continuum_pairing_defects(initial, params, L, cfg.dz / 2, u0, fL, reference=ref)
        ratio = float(np.median(cont / half))
        checks.append(Check("pairing_defect_halving_ratio", ratio, 0.8, abs(ratio - 4.0) <= 0.8,
                            {"expected": 4.0}))
        ref_cl = propagate(initial, params, L, StepConfig(dz=cfg.dz / 16, checkpoint_stride=10**9)).final.values
        e1 = np.max(np.abs(propagate(initial, params, L, StepConfig(dz=cfg.dz, checkpoint_stride=10**9)).final.values - ref_cl))
        e2 = np.max(np.abs(propagate(initial, params, L, StepConfig(dz=cfg.dz / 2, checkpoint_stride=10**9)).final.values - ref_cl))
        order = float(e1 / e2) if e2 > 0 else float("inf")
        ok = abs(order - 4.0) <= 0.8 or max(e1, e2) < 1e-12
        checks.append(Check("classical_convergence_ratio", order, 0.8, ok, {"expected": 4.0, "error_dz": float(e1)}))
    else:
        checks.append(Check("pairing_defect_discrete", 0.0, pairing_tolerance, True, {"trivial": True}))

    small = TimeGrid(16, 4.0)
    f = smooth_random_fields(small, 1, rng, width=1.0, band=3.0)[0]
    amps = rng.normal(size=16) + 1j * rng.normal(size=16)
    brute = brute_force_coherent_variance(f, small.dt, amps)
    rule = coherent_variance(ComplexField(small, f))
    checks.append(Check("coherent_variance_oracle", abs(brute - rule), 1e-12, abs(brute - rule) < 1e-12))

    a, b = rng.uniform(0.05, 3.0, size=2)
    c = rng.uniform(-1, 1) * math.sqrt(a * b)
    r_opt, th = minimize_form(a, b, c)
    gap = grid_minimize_form(a, b, c)[0] - r_opt
    checks.append(Check("theta_minimum_vs_grid", abs(gap), 1e-8, -1e-12 <= gap < 1e-8))
    return checks
