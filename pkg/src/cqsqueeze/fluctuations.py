"""Linearized fluctuations and their adjoint along a classical background.

Forward (perturbation) equation::

    u_z = i u_tt + i a(t) u + i k(t) conj(u)

Adjoint (projection) equation, integrated from ``z = L`` down to ``z = 0``::

    v_z = i v_tt + i a(t) v - i k(t) conj(v)

with ``a = 4 chi |U0|^2 + 9 gamma |U0|^4`` and ``k = 2 chi U0^2 + 6 gamma |U0|^2 U0^2``.
The real pairing ``Re sum(conj(v) u) dt`` is invariant under the pair of flows.

Each step is Strang-split: an exact spectral half step, the exact pointwise
exponential of the 2x2 real-linear generator acting on ``(u, conj(u))`` with the
background averaged over the step, and another half step.  The adjoint step uses
the same background and is the exact transpose of the forward step under the
real pairing, so discrete pairing defects are at rounding level.
"""

from __future__ import annotations

import numpy as np
from scipy import fft as sfft

from cqsqueeze.grid import ComplexField, GridMismatchError
from cqsqueeze.pulses import CqParams
from cqsqueeze.propagator import Trajectory

BACKGROUND_TOLERANCE = 1e-7
_SERIES_CUTOFF = 1e-3


class BackgroundMismatchError(RuntimeError):
    """Re-integrated background drifted away from the stored checkpoints."""


def local_coefficients(U0: np.ndarray, params: CqParams, conjugate_coupling: bool = True):
    """Return ``(a, k)``: the real self-coupling and complex conjugate coupling."""
    p = U0.real**2 + U0.imag**2
    a = 4.0 * params.chi * p + 9.0 * params.gamma * p * p
    if not conjugate_coupling:
        return a, np.zeros_like(U0)
    k = (2.0 * params.chi + 6.0 * params.gamma * p) * U0 * U0
    return a, k


def _exp_factors(a: np.ndarray, k: np.ndarray, dz: float):
    """``exp(dz*G) = c*I + s*G`` for ``G = i[[a, k], [-conj(k), -a]]`` where ``G^2 = -(a^2-|k|^2) I``.

    Returns ``(c, s)`` with ``s`` already multiplied by ``dz``.
    """
    x = (a * a - (k.real**2 + k.imag**2)) * dz * dz
    c = np.empty_like(x)
    s = np.empty_like(x)
    small = np.abs(x) < _SERIES_CUTOFF
    pos = (x > 0) & ~small
    neg = (x < 0) & ~small
    r = np.sqrt(x[pos])
    c[pos] = np.cos(r)
    s[pos] = np.sin(r) / r
    r = np.sqrt(-x[neg])
    c[neg] = np.cosh(r)
    s[neg] = np.sinh(r) / r
    xs = x[small]
    c[small] = 1 - xs / 2 * (1 - xs / 12 * (1 - xs / 30 * (1 - xs / 56 * (1 - xs / 90))))
    s[small] = 1 - xs / 6 * (1 - xs / 20 * (1 - xs / 42 * (1 - xs / 72 * (1 - xs / 110))))
    return c, s * dz


def _forward_local(u, a, k, c, s):
    return c * u + s * 1j * (a * u + k * np.conj(u))


def _adjoint_local(v, a, k, c, s):
    # exp(-dz*G_adj) with G_adj = i[[a, -k], [conj(k), -a]]
    return c * v - s * 1j * (a * v - k * np.conj(v))


def _check_grid(f: ComplexField, traj: Trajectory):
    if f.grid != traj.grid or f.domain != "time":
        raise GridMismatchError("field grid does not match the trajectory grid")


def linearized_step(
    u: ComplexField, U0_local: ComplexField, params: CqParams, dz: float, *, conjugate_coupling: bool = True
) -> ComplexField:
    """One forward step of the linearized equation with midpoint background ``U0_local``."""
    if u.grid != U0_local.grid:
        raise GridMismatchError("perturbation and background grids differ")
    half = np.exp(-0.5j * u.grid.omega**2 * dz)
    a, k = local_coefficients(U0_local.values, params, conjugate_coupling)
    c, s = _exp_factors(a, k, dz)
    x = sfft.ifft(half * sfft.fft(u.values))
    x = _forward_local(x, a, k, c, s)
    return ComplexField(u.grid, sfft.ifft(half * sfft.fft(x)))


def adjoint_backstep(
    uA: ComplexField, U0_local: ComplexField, params: CqParams, dz: float, *, conjugate_coupling: bool = True
) -> ComplexField:
    """One backward step (``z + dz -> z``) of the adjoint equation."""
    if uA.grid != U0_local.grid:
        raise GridMismatchError("projection and background grids differ")
    half = np.exp(0.5j * uA.grid.omega**2 * dz)
    a, k = local_coefficients(U0_local.values, params, conjugate_coupling)
    c, s = _exp_factors(a, k, dz)
    x = sfft.ifft(half * sfft.fft(uA.values))
    x = _adjoint_local(x, a, k, c, s)
    return ComplexField(uA.grid, sfft.ifft(half * sfft.fft(x)))


def background_pairs(traj: Trajectory, reverse: bool = False):
    """Yield ``(k, U0[k], U0[k+1])`` for every step, ascending or descending in ``k``.

    With a checkpoint stride of one the stored fields are read directly.  Otherwise
    the classical equation is re-integrated in the direction of travel and checked
    against each stored checkpoint it reaches.
    """
    n = traj.n_steps
    if traj.stride == 1 and len(traj.steps) == n + 1:
        order = range(n - 1, -1, -1) if reverse else range(n)
        for k in order:
            yield k, traj.fields[k], traj.fields[k + 1]
        return
    index = {int(s): i for i, s in enumerate(traj.steps)}

    def validated(step_no, u):
        i = index.get(step_no)
        if i is None:
            return u
        dev = np.max(np.abs(u - traj.fields[i]))
        if dev > BACKGROUND_TOLERANCE:
            raise BackgroundMismatchError(
                f"re-integrated background deviates by {dev:.3e} at z = {step_no * traj.dz:.6g}"
            )
        return traj.fields[i]

    if reverse:
        stepper = traj.stepper(-1)
        u = traj.fields[-1]
        for k in range(n - 1, -1, -1):
            prev = validated(k, stepper(u))
            yield k, prev, u
            u = prev
    else:
        stepper = traj.stepper(+1)
        u = traj.fields[0]
        for k in range(n):
            nxt = validated(k + 1, stepper(u))
            yield k, u, nxt
            u = nxt


def _sweep(traj: Trajectory, batch: np.ndarray, inject: dict, reverse: bool, conjugate_coupling: bool):
    """Run a batch of linear states across the whole trajectory.

    ``inject`` maps a step boundary to ``(rows, values)`` written into the batch when
    the sweep reaches that boundary; rows start from zero until injected.
    Adjacent dispersive half steps are fused.
    """
    sign = 1.0 if reverse else -1.0
    dz = traj.dz
    omega2 = traj.grid.omega**2
    half = np.exp(sign * 0.5j * omega2 * dz)
    full = half * half
    local = _adjoint_local if reverse else _forward_local
    x = np.array(batch, dtype=complex, copy=True)
    pending = False

    def flush(x):
        return sfft.ifft(half * sfft.fft(x, axis=-1), axis=-1)

    for k, U_a, U_b in background_pairs(traj, reverse=reverse):
        boundary = k + 1 if reverse else k
        if boundary in inject:
            if pending:
                x = flush(x)
                pending = False
            rows, vals = inject[boundary]
            x[rows] = vals
        x = sfft.ifft((full if pending else half) * sfft.fft(x, axis=-1), axis=-1)
        a, kap = local_coefficients(0.5 * (U_a + U_b), traj.params, conjugate_coupling)
        c, s = _exp_factors(a, kap, dz)
        x = local(x, a, kap, c, s)
        pending = True
    if pending:
        x = flush(x)
    end = 0 if reverse else traj.n_steps
    if end in inject:
        rows, vals = inject[end]
        x[rows] = vals
    return x


def back_propagate_batch(
    f_values: np.ndarray, traj: Trajectory, start_steps=None, *, conjugate_coupling: bool = True
) -> np.ndarray:
    """Back-propagate rows of ``f_values`` (shape ``(B, n)``) to ``z = 0``.

    Row ``b`` starts at step boundary ``start_steps[b]`` (default: the end of the
    trajectory), so projections for several output distances share one sweep.
    """
    f_values = np.atleast_2d(np.asarray(f_values, dtype=complex))
    B = f_values.shape[0]
    if f_values.shape[1] != traj.grid.n:
        raise GridMismatchError("projection length does not match the trajectory grid")
    if start_steps is None:
        start_steps = np.full(B, traj.n_steps)
    start_steps = np.asarray(start_steps, dtype=int)
    if np.any(start_steps < 0) or np.any(start_steps > traj.n_steps):
        raise ValueError("start step outside the trajectory")
    inject = {}
    for s in np.unique(start_steps):
        rows = np.flatnonzero(start_steps == s)
        inject[int(s)] = (rows, f_values[rows])
    return _sweep(traj, np.zeros_like(f_values), inject, True, conjugate_coupling)


def forward_propagate_batch(
    u_values: np.ndarray, traj: Trajectory, *, conjugate_coupling: bool = True
) -> np.ndarray:
    """Propagate rows of ``u_values`` from ``z = 0`` to ``z = L``."""
    u_values = np.atleast_2d(np.asarray(u_values, dtype=complex))
    if u_values.shape[1] != traj.grid.n:
        raise GridMismatchError("perturbation length does not match the trajectory grid")
    return _sweep(traj, u_values, {}, False, conjugate_coupling)


def back_propagate(f_L: ComplexField, traj: Trajectory, *, conjugate_coupling: bool = True) -> ComplexField:
    """Projection function at ``z = 0`` whose pairing with ``u(0)`` equals ``<f_L|u(L)>``."""
    _check_grid(f_L, traj)
    out = back_propagate_batch(f_L.values[None, :], traj, conjugate_coupling=conjugate_coupling)
    return ComplexField(traj.grid, out[0])


def forward_propagate_perturbation(
    u0: ComplexField, traj: Trajectory, *, conjugate_coupling: bool = True
) -> ComplexField:
    """Linearized perturbation at ``z = L`` for initial perturbation ``u0``."""
    _check_grid(u0, traj)
    out = forward_propagate_batch(u0.values[None, :], traj, conjugate_coupling=conjugate_coupling)
    return ComplexField(traj.grid, out[0])


def symplectic_pairing(f: ComplexField, g: ComplexField) -> float:
    """``Im sum(conj(f) g) dt``, conserved by both linear flows."""
    if f.grid != g.grid:
        raise GridMismatchError("fields live on different grids")
    return float(np.imag(np.vdot(f.values, g.values)) * f.grid.dt)
