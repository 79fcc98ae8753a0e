"""Homodyne projections, coherent-state variances and optimal squeezing ratios.

For a coherent input the variance of the homodyne observable ``<f|u>`` is
``||f||^2 / 4``, so the squeezing ratio of a local oscillator ``f_L`` is
``||f_0||^2 / ||f_L||^2`` where ``f_0`` is ``f_L`` back-propagated to the input.
Back-propagation is real-linear and ``f_L(theta) = cos(theta) f_L(0) + sin(theta) f_L(pi/2)``,
so two back-propagations give ``R(theta)`` for every phase as a quadratic form.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from cqsqueeze.grid import ComplexField, inner_product_real, l2_norm_sq
from cqsqueeze.fluctuations import back_propagate_batch
from cqsqueeze.propagator import StepConfig, Trajectory, propagate
from cqsqueeze.pulses import CqParams, soliton_period as _period

CROSSCHECK_TOLERANCE = 1e-8


def local_oscillator(U_L: ComplexField, theta: float) -> ComplexField:
    """Unit-norm copy of ``U_L`` rotated by the phase ``theta``."""
    norm_sq = l2_norm_sq(U_L)
    if norm_sq <= 0:
        raise ValueError("local oscillator needs a nonzero signal pulse")
    return U_L * (np.exp(1j * theta) / math.sqrt(norm_sq))


def coherent_variance(f: ComplexField) -> float:
    """Variance of ``<f|u>`` for a coherent (vacuum-noise) input: ``||f||^2 / 4``."""
    return 0.25 * l2_norm_sq(f)


def quadratic_form(f0_q1: ComplexField, f0_q2: ComplexField, reference_norm_sq: float = 1.0):
    """Coefficients ``(a, b, c)`` of ``R(theta) = a cos^2 + b sin^2 + 2 c sin cos``."""
    a = l2_norm_sq(f0_q1) / reference_norm_sq
    b = l2_norm_sq(f0_q2) / reference_norm_sq
    c = inner_product_real(f0_q1, f0_q2) / reference_norm_sq
    return a, b, c


def ratio_at(theta, a, b, c):
    cs, sn = np.cos(theta), np.sin(theta)
    return a * cs * cs + b * sn * sn + 2.0 * c * sn * cs


def minimize_form(a: float, b: float, c: float) -> tuple[float, float]:
    """Closed-form minimum of the quadratic form and its phase in ``[0, pi)``."""
    half_diff = 0.5 * (a - b)
    radius = math.hypot(half_diff, c)
    r_opt = 0.5 * (a + b) - radius
    if radius == 0.0:
        return r_opt, 0.0
    # R = (a+b)/2 + half_diff cos(2 theta) + c sin(2 theta), minimal opposite to (half_diff, c)
    theta = 0.5 * math.atan2(-c, -half_diff)
    theta %= math.pi
    if math.isclose(theta, math.pi, rel_tol=0.0, abs_tol=1e-15):
        theta = 0.0
    return r_opt, theta


def optimal_squeezing(
    f0_q1: ComplexField, f0_q2: ComplexField, reference_norm_sq: float = 1.0
) -> tuple[float, float]:
    """``(R_opt, theta_opt)`` from the back-propagated in-phase and quadrature projections.

    ``reference_norm_sq`` is ``||f_L||^2`` (one for a normalized local oscillator).
    """
    return minimize_form(*quadratic_form(f0_q1, f0_q2, reference_norm_sq))


def to_db(ratio):
    return 10.0 * np.log10(ratio)


@dataclass
class SqueezingCurve:
    z: np.ndarray
    R_opt: np.ndarray
    theta_opt: np.ndarray
    form: np.ndarray  # rows (a, b, c)
    soliton_period: float
    crosscheck_error: float = 0.0

    @property
    def z_periods(self) -> np.ndarray:
        return self.z / self.soliton_period

    @property
    def R_opt_dB(self) -> np.ndarray:
        return to_db(self.R_opt)

    def ratio(self, theta) -> np.ndarray:
        a, b, c = self.form.T
        return ratio_at(theta, a, b, c)

    def interpolate(self, z) -> np.ndarray:
        return np.interp(z, self.z, self.R_opt)

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["z", "z_in_soliton_periods", "R_opt", "R_opt_dB", "theta_opt"])
            for row in zip(self.z, self.z_periods, self.R_opt, self.R_opt_dB, self.theta_opt):
                w.writerow([repr(float(v)) for v in row])
        return path


@dataclass
class ThetaScan:
    theta: np.ndarray
    R: np.ndarray
    length: float
    form: tuple[float, float, float]

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theta", "R"])
            for row in zip(self.theta, self.R):
                w.writerow([repr(float(v)) for v in row])
        return path


def _sample_steps(traj: Trajectory, n_samples: int) -> np.ndarray:
    wanted = np.linspace(0, traj.n_steps, max(n_samples, 1))
    # snap to the nearest stored checkpoint
    near = np.abs(traj.steps[None, :] - wanted[:, None]).argmin(axis=1)
    return np.unique(near)


def curve_from_trajectory(
    traj: Trajectory,
    n_samples: int = 21,
    *,
    soliton_period: float | None = None,
    conjugate_coupling: bool = True,
    seed: int = 0,
) -> SqueezingCurve:
    """Optimal squeezing ratio at ``n_samples`` checkpoints of ``traj`` (one backward sweep)."""
    ckpt = _sample_steps(traj, n_samples)
    rng = np.random.default_rng(seed)
    check_theta = float(rng.uniform(0.0, 2.0 * np.pi))
    rows, starts, norms = [], [], []
    for i in ckpt:
        U = traj.fields[i]
        norm_sq = float(np.sum(np.abs(U) ** 2) * traj.grid.dt)
        if norm_sq <= 0:
            raise ValueError("background vanished; no local oscillator can be formed")
        f = U / math.sqrt(norm_sq)
        rows += [f, 1j * f]
        starts += [traj.steps[i]] * 2
        norms.append(float(np.sum(np.abs(f) ** 2) * traj.grid.dt))
    f_last = rows[-2]
    rows.append(np.exp(1j * check_theta) * f_last)
    starts.append(traj.steps[ckpt[-1]])
    f0 = back_propagate_batch(np.array(rows), traj, starts, conjugate_coupling=conjugate_coupling)

    grid = traj.grid
    form, r_opt, th_opt = [], [], []
    for j, norm_sq in enumerate(norms):
        q1 = ComplexField(grid, f0[2 * j])
        q2 = ComplexField(grid, f0[2 * j + 1])
        a, b, c = quadratic_form(q1, q2, norm_sq)
        r, th = minimize_form(a, b, c)
        if traj.steps[ckpt[j]] == 0:
            r = 1.0  # identity back-propagation
        form.append((a, b, c))
        r_opt.append(r)
        th_opt.append(th)
    form = np.array(form)
    direct = l2_norm_sq(ComplexField(grid, f0[-1])) / norms[-1]
    via_form = float(ratio_at(check_theta, *form[-1]))
    err = abs(direct - via_form) / max(abs(direct), 1e-300)
    if err > CROSSCHECK_TOLERANCE:
        raise RuntimeError(f"quadrature decomposition disagrees with direct back-propagation ({err:.2e})")
    if soliton_period is None:
        soliton_period = _period(1.0)
    return SqueezingCurve(
        z=traj.z[ckpt], R_opt=np.array(r_opt), theta_opt=np.array(th_opt), form=form,
        soliton_period=soliton_period, crosscheck_error=err,
    )


def squeezing_curve(
    initial: ComplexField,
    params: CqParams,
    L: float,
    n_samples: int = 21,
    cfg: StepConfig = StepConfig(),
    *,
    soliton_period: float | None = None,
    conjugate_coupling: bool = True,
    seed: int = 0,
) -> SqueezingCurve:
    """Optimal squeezing ratio versus distance for the pulse ``initial``.

    ``soliton_period`` only scales the ``z_in_soliton_periods`` column; it defaults to
    the period ``pi/2`` of the ``beta = 1`` soliton.
    """
    traj = propagate(initial, params, L, cfg)
    return curve_from_trajectory(
        traj, n_samples, soliton_period=soliton_period, conjugate_coupling=conjugate_coupling, seed=seed
    )


def form_at_end(traj: Trajectory, *, conjugate_coupling: bool = True) -> tuple[float, float, float]:
    U = ComplexField(traj.grid, traj.fields[-1])
    f = local_oscillator(U, 0.0)
    f0 = back_propagate_batch(np.array([f.values, 1j * f.values]), traj, conjugate_coupling=conjugate_coupling)
    return quadratic_form(ComplexField(traj.grid, f0[0]), ComplexField(traj.grid, f0[1]), l2_norm_sq(f))


def theta_scan(
    initial: ComplexField,
    params: CqParams,
    L: float,
    theta_grid=None,
    cfg: StepConfig = StepConfig(),
    *,
    conjugate_coupling: bool = True,
) -> ThetaScan:
    """Squeezing ratio against local-oscillator phase at distance ``L``."""
    if theta_grid is None:
        theta_grid = np.linspace(0.0, 2.0 * np.pi, 360, endpoint=False)
    theta_grid = np.asarray(theta_grid, dtype=float)
    traj = propagate(initial, params, L, cfg)
    a, b, c = form_at_end(traj, conjugate_coupling=conjugate_coupling)
    return ThetaScan(theta_grid, ratio_at(theta_grid, a, b, c), traj.length, (a, b, c))
