"""Split-step spectral integration of the classical cubic-quintic NLSE.

The equation integrated is ``i U_z + U_tt + 2 chi |U|^2 U + 3 gamma |U|^4 U = 0``.
The dispersive substep is exact in the spectral domain and the nonlinear substep is
an exact pointwise phase rotation, so both conserve ``sum |U|^2`` and a step with
``-dz`` inverts a step with ``+dz`` up to rounding.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import fft as sfft

from cqsqueeze.grid import ComplexField, TimeGrid
from cqsqueeze.pulses import CqParams

log = logging.getLogger(__name__)

MEMORY_CAP_BYTES = 2 * 1024**3


class DivergenceError(RuntimeError):
    """The classical field blew up (collapse or an unstable step)."""

    def __init__(self, z: float, message: str = ""):
        self.z = z
        super().__init__(message or f"integration diverged at z = {z:.6g}")


@dataclass(frozen=True)
class StepConfig:
    """Integrator settings.

    ``checkpoint_stride=None`` stores every step unless that would exceed
    ``memory_cap`` bytes, in which case the stride is enlarged to fit.
    Integration aborts once ``max|U|`` exceeds ``divergence_factor`` times the
    initial peak.
    """

    dz: float = 1e-3
    scheme: str = "strang"
    checkpoint_stride: int | None = None
    memory_cap: int = MEMORY_CAP_BYTES
    divergence_factor: float = 1e3

    def __post_init__(self):
        if not self.dz > 0:
            raise ValueError(f"dz must be positive, got {self.dz}")
        if self.scheme not in ("strang", "lie"):
            raise ValueError(f"unknown splitting scheme {self.scheme!r}")
        if self.checkpoint_stride is not None and self.checkpoint_stride < 1:
            raise ValueError("checkpoint_stride must be >= 1")


def nonlinear_rate(u: np.ndarray, params: CqParams) -> np.ndarray:
    p = u.real**2 + u.imag**2
    return 2.0 * params.chi * p + 3.0 * params.gamma * p * p


def _dispersion(grid: TimeGrid, dz: float) -> np.ndarray:
    return np.exp(-1j * grid.omega**2 * dz)


def _step_array(u, params, dz, half, full, scheme):
    if scheme == "strang":
        u = sfft.ifft(half * sfft.fft(u))
        u = u * np.exp(1j * nonlinear_rate(u, params) * dz)
        return sfft.ifft(half * sfft.fft(u))
    u = sfft.ifft(full * sfft.fft(u))
    return u * np.exp(1j * nonlinear_rate(u, params) * dz)


class _Stepper:
    """Precomputed dispersion factors for repeated steps of one signed size."""

    def __init__(self, grid: TimeGrid, params: CqParams, dz: float, scheme: str = "strang"):
        self.params = params
        self.dz = dz
        self.scheme = scheme
        self.half = _dispersion(grid, 0.5 * dz)
        self.full = _dispersion(grid, dz)

    def __call__(self, u: np.ndarray) -> np.ndarray:
        if self.scheme == "lie" and self.dz < 0:
            # exact inverse of the forward Lie step (N after D)
            u = u * np.exp(1j * nonlinear_rate(u, self.params) * self.dz)
            return sfft.ifft(self.full * sfft.fft(u))
        return _step_array(u, self.params, self.dz, self.half, self.full, self.scheme)


def step(field: ComplexField, params: CqParams, cfg: StepConfig) -> ComplexField:
    """Advance ``field`` by one step of size ``cfg.dz``."""
    with np.errstate(over="ignore", invalid="ignore"):
        u = _Stepper(field.grid, params, cfg.dz, cfg.scheme)(field.values)
    if not np.all(np.isfinite(u)):
        raise DivergenceError(cfg.dz)
    return ComplexField(field.grid, u)


def photon_number(field: ComplexField) -> float:
    return float(np.sum(field.abs2) * field.grid.dt)


def _hamiltonian_rows(fields: np.ndarray, grid: TimeGrid, params: CqParams) -> np.ndarray:
    ut = sfft.ifft(1j * grid.omega * sfft.fft(fields, axis=-1), axis=-1)
    p = np.abs(fields) ** 2
    dens = np.abs(ut) ** 2 - params.chi * p**2 - params.gamma * p**3
    return np.sum(dens, axis=-1) * grid.dt


def hamiltonian(field: ComplexField, params: CqParams) -> float:
    """``sum(|U_t|^2 - chi |U|^4 - gamma |U|^6) dt`` with a spectral time derivative."""
    return float(_hamiltonian_rows(field.values, field.grid, params))


@dataclass(eq=False)
class Trajectory:
    """Checkpointed classical background ``U0(z, t)`` on ``[0, L]``.

    ``fields[i]`` is the field after ``steps[i]`` steps of size ``dz``, at
    ``z[i] = steps[i] * dz``.  ``direction`` records how it was produced.
    """

    params: CqParams
    grid: TimeGrid
    dz: float
    n_steps: int
    stride: int
    scheme: str
    steps: np.ndarray
    fields: np.ndarray
    photon: np.ndarray = field(repr=False)
    energy: np.ndarray = field(repr=False)
    direction: str = "forward"

    @property
    def z(self) -> np.ndarray:
        return self.steps * self.dz

    @property
    def length(self) -> float:
        return self.n_steps * self.dz

    def field_at(self, i: int) -> ComplexField:
        return ComplexField(self.grid, self.fields[i])

    @property
    def initial(self) -> ComplexField:
        return self.field_at(0)

    @property
    def final(self) -> ComplexField:
        return self.field_at(-1)

    def photon_drift(self) -> float:
        return float(np.max(np.abs(self.photon - self.photon[0])) / self.photon[0]) if self.photon[0] else 0.0

    def hamiltonian_drift(self) -> float:
        scale = abs(self.energy[0]) or 1.0
        return float(np.max(np.abs(self.energy - self.energy[0])) / scale)

    def stepper(self, sign: int = 1) -> _Stepper:
        return _Stepper(self.grid, self.params, sign * self.dz, self.scheme)

    def manifest(self) -> dict:
        return {
            "params": asdict(self.params),
            "grid": {"n": self.grid.n, "t_span": self.grid.t_span},
            "dz": self.dz,
            "n_steps": self.n_steps,
            "length": self.length,
            "scheme": self.scheme,
            "checkpoint_stride": self.stride,
            "direction": self.direction,
            "photon_number_drift": self.photon_drift(),
            "hamiltonian_drift": self.hamiltonian_drift(),
            "checkpoints": [
                {"index": i, "z": float(z), "photon_number": float(n), "hamiltonian": float(h)}
                for i, (z, n, h) in enumerate(zip(self.z, self.photon, self.energy))
            ],
        }

    def export(self, outdir, every: int = 1) -> Path:
        """Write ``checkpoint_XXXXX.csv`` files (every ``every``-th plus the last) and ``trajectory.json``."""
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        idx = list(range(0, len(self.steps), every))
        if idx[-1] != len(self.steps) - 1:
            idx.append(len(self.steps) - 1)
        man = self.manifest()
        man["files"] = []
        for i in idx:
            name = f"checkpoint_{i:05d}.csv"
            self.field_at(i).to_csv(outdir / name)
            man["files"].append({"index": i, "z": float(self.z[i]), "file": name})
        path = outdir / "trajectory.json"
        path.write_text(json.dumps(man, indent=2))
        return path


def _resolve_steps(L: float, dz: float) -> tuple[int, float]:
    if L < 0:
        raise ValueError(f"propagation length must be nonnegative, got {L}")
    if L == 0:
        return 0, dz
    n = max(1, math.ceil(L / dz - 1e-9))
    return n, L / n


def _resolve_stride(cfg: StepConfig, n_steps: int, grid: TimeGrid) -> int:
    if cfg.checkpoint_stride is not None:
        return cfg.checkpoint_stride
    bytes_needed = (n_steps + 1) * grid.n * 16
    return max(1, math.ceil(bytes_needed / cfg.memory_cap))


def _integrate(initial: ComplexField, params: CqParams, L: float, cfg: StepConfig, sign: int) -> Trajectory:
    grid = initial.grid
    n_steps, dz = _resolve_steps(L, cfg.dz)
    stride = _resolve_stride(cfg, n_steps, grid)
    kept = sorted(set(range(0, n_steps + 1, stride)) | {n_steps})
    stepper = _Stepper(grid, params, sign * dz, cfg.scheme)

    fields = np.empty((len(kept), grid.n), dtype=complex)
    fields[0] = initial.values
    u = initial.values.copy()
    limit = cfg.divergence_factor * max(np.max(np.abs(u)), 1e-300)
    slot = 1
    for k in range(1, n_steps + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            u = stepper(u)
        peak = np.max(np.abs(u))
        if not np.isfinite(peak) or peak > limit:
            z_fail = k * dz if sign > 0 else L - k * dz
            raise DivergenceError(z_fail)
        if slot < len(kept) and kept[slot] == k:
            fields[slot] = u
            slot += 1

    photon = np.sum(np.abs(fields) ** 2, axis=-1) * grid.dt
    energy = _hamiltonian_rows(fields, grid, params)
    steps = np.asarray(kept, dtype=np.int64)
    direction = "forward"
    if sign < 0:
        # store in ascending z: checkpoint j of the backward run sits at z = L - kept[j]*dz
        steps = n_steps - steps[::-1]
        fields, photon, energy = fields[::-1].copy(), photon[::-1].copy(), energy[::-1].copy()
        direction = "backward"
    log.debug("integrated %d steps (dz=%.3g, stride=%d)", n_steps, dz, stride)
    return Trajectory(params, grid, dz, n_steps, stride, cfg.scheme, steps, fields, photon, energy, direction)


def propagate(initial: ComplexField, params: CqParams, L: float, cfg: StepConfig = StepConfig()) -> Trajectory:
    """Integrate from ``z = 0`` to ``z = L``; the step is shrunk so that ``L`` is hit exactly."""
    return _integrate(initial, params, L, cfg, +1)


def propagate_backward(final: ComplexField, params: CqParams, L: float, cfg: StepConfig = StepConfig()) -> Trajectory:
    """Integrate from ``z = L`` back to ``z = 0``; ``trajectory.initial`` is the recovered input."""
    return _integrate(final, params, L, cfg, -1)
