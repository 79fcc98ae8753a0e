"""Periodic time grid, complex envelope fields and the quadratic forms on them."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import fft as sfft


class GridMismatchError(ValueError):
    """Raised when two fields that must share a grid do not."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform periodic grid ``t_j = -t_span/2 + j*dt`` with matching angular frequencies.

    Args:
        n: number of samples, a power of two no smaller than 8.
        t_span: total window length.
    """

    n: int = 1024
    t_span: float = 40.0

    def __post_init__(self):
        n = int(self.n)
        if n < 8 or n & (n - 1):
            raise ValueError(f"grid size must be a power of two >= 8, got {self.n}")
        if not np.isfinite(self.t_span) or self.t_span <= 0:
            raise ValueError(f"t_span must be positive, got {self.t_span}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "t_span", float(self.t_span))

    @property
    def dt(self) -> float:
        return self.t_span / self.n

    @cached_property
    def t(self) -> np.ndarray:
        return -0.5 * self.t_span + self.dt * np.arange(self.n)

    @cached_property
    def omega(self) -> np.ndarray:
        """Angular frequencies in FFT (wraparound) order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dt)

    def zeros(self) -> "ComplexField":
        return ComplexField(self, np.zeros(self.n, dtype=complex))

    def field(self, values) -> "ComplexField":
        return ComplexField(self, np.asarray(values, dtype=complex))


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Complex samples on a :class:`TimeGrid`.

    ``domain`` is ``"time"`` for envelopes and ``"frequency"`` for the output of
    :func:`to_spectrum` (then ``values[k]`` sits at ``grid.omega[k]``).
    """

    grid: TimeGrid
    values: np.ndarray
    domain: str = field(default="time")

    def __post_init__(self):
        values = np.array(self.values, dtype=complex)
        if values.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} samples, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite samples")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def abs2(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def _check(self, other: "ComplexField") -> None:
        if not isinstance(other, ComplexField):
            raise TypeError(f"expected ComplexField, got {type(other).__name__}")
        if other.grid != self.grid or other.domain != self.domain:
            raise GridMismatchError("fields live on different grids")

    def __add__(self, other: "ComplexField") -> "ComplexField":
        self._check(other)
        return ComplexField(self.grid, self.values + other.values, self.domain)

    def __sub__(self, other: "ComplexField") -> "ComplexField":
        self._check(other)
        return ComplexField(self.grid, self.values - other.values, self.domain)

    def __mul__(self, scalar) -> "ComplexField":
        return ComplexField(self.grid, self.values * complex(scalar), self.domain)

    __rmul__ = __mul__

    def __neg__(self) -> "ComplexField":
        return ComplexField(self.grid, -self.values, self.domain)

    def conj(self) -> "ComplexField":
        return ComplexField(self.grid, np.conj(self.values), self.domain)

    def max_abs_diff(self, other: "ComplexField") -> float:
        self._check(other)
        return float(np.max(np.abs(self.values - other.values)))

    def to_csv(self, path) -> Path:
        """Write columns ``t, re, im, abs2`` (``omega`` replaces ``t`` for spectra)."""
        path = Path(path)
        axis = self.grid.t if self.domain == "time" else self.grid.omega
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t" if self.domain == "time" else "omega", "re", "im", "abs2"])
            for x, v in zip(axis, self.values):
                writer.writerow([repr(float(x)), repr(float(v.real)), repr(float(v.imag)), repr(float(v.real**2 + v.imag**2))])
        return path


def _same_grid(f: ComplexField, g: ComplexField) -> None:
    if f.grid != g.grid or f.domain != g.domain:
        raise GridMismatchError("fields live on different grids")


def inner_product_real(f: ComplexField, g: ComplexField) -> float:
    """Real pairing ``Re sum(conj(f) * g) * dt``."""
    _same_grid(f, g)
    return float(np.real(np.vdot(f.values, g.values)) * f.grid.dt)


def l2_norm_sq(f: ComplexField) -> float:
    return float(np.sum(f.values.real**2 + f.values.imag**2) * f.grid.dt)


def to_spectrum(f: ComplexField) -> ComplexField:
    """Forward transform approximating ``int f(t) exp(-i omega t) dt`` (up to a phase)."""
    if f.domain != "time":
        raise ValueError("field is already spectral")
    return ComplexField(f.grid, sfft.fft(f.values) * f.grid.dt, "frequency")


def from_spectrum(spec: ComplexField) -> ComplexField:
    if spec.domain != "frequency":
        raise ValueError("field is not spectral")
    return ComplexField(spec.grid, sfft.ifft(spec.values) / spec.grid.dt, "time")


def spectral_norm_sq(spec: ComplexField) -> float:
    """``sum |F_k|^2 d_omega / (2 pi)``; equals :func:`l2_norm_sq` of the time field."""
    if spec.domain != "frequency":
        raise ValueError("field is not spectral")
    return float(np.sum(np.abs(spec.values) ** 2) / spec.grid.t_span)


def second_derivative(f: ComplexField) -> ComplexField:
    """Spectral ``d^2 f / dt^2`` (multiply by ``-omega^2``)."""
    return ComplexField(f.grid, sfft.ifft(-(f.grid.omega**2) * sfft.fft(f.values)))
