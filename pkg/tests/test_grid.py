import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cqsqueeze.grid import (
    ComplexField,
    GridMismatchError,
    TimeGrid,
    from_spectrum,
    inner_product_real,
    l2_norm_sq,
    second_derivative,
    spectral_norm_sq,
    to_spectrum,
)


def random_field(rng, grid):
    return ComplexField(grid, rng.normal(size=grid.n) + 1j * rng.normal(size=grid.n))


class TestTimeGrid:
    def test_layout(self):
        g = TimeGrid(16, 10.0)
        assert g.dt * g.n == pytest.approx(10.0, rel=1e-15)
        assert g.t[0] == -5.0
        assert g.t[-1] == pytest.approx(5.0 - g.dt)
        k = np.fft.fftfreq(16, d=1.0 / 16)
        np.testing.assert_allclose(g.omega, 2 * np.pi * k / 10.0)
        assert g.omega.min() == pytest.approx(-2 * np.pi * 8 / 10.0)

    @pytest.mark.parametrize("n", [4, 12, 100, 0])
    def test_rejects_bad_size(self, n):
        with pytest.raises(ValueError):
            TimeGrid(n, 10.0)

    def test_rejects_bad_span(self):
        with pytest.raises(ValueError):
            TimeGrid(16, -1.0)


class TestComplexField:
    def test_length_checked(self):
        with pytest.raises(ValueError):
            ComplexField(TimeGrid(8, 1.0), np.zeros(7))

    def test_nonfinite_rejected(self):
        vals = np.zeros(8, dtype=complex)
        vals[3] = np.nan
        with pytest.raises(ValueError):
            ComplexField(TimeGrid(8, 1.0), vals)

    def test_values_are_read_only(self):
        f = TimeGrid(8, 1.0).zeros()
        with pytest.raises(ValueError):
            f.values[0] = 1.0

    def test_csv_dump(self, tmp_path):
        g = TimeGrid(8, 4.0)
        f = ComplexField(g, np.arange(8) * (1 + 2j))
        path = f.to_csv(tmp_path / "f.csv")
        rows = path.read_text().splitlines()
        assert rows[0] == "t,re,im,abs2"
        t, re, im, a2 = map(float, rows[2].split(","))
        assert (t, re, im, a2) == (-1.5, 1.0, 2.0, 5.0)


class TestInnerProduct:
    def test_normalized_self_pairing(self, rng):
        g = TimeGrid(64, 8.0)
        f = random_field(rng, g)
        f = f * (1 / np.sqrt(l2_norm_sq(f)))
        assert inner_product_real(f, f) == pytest.approx(1.0, abs=1e-14)

    def test_quadrature_is_orthogonal(self, rng):
        g = TimeGrid(64, 8.0)
        f = random_field(rng, g)
        assert inner_product_real(f, 1j * f) == pytest.approx(0.0, abs=1e-13)

    def test_matches_naive_loop(self, rng):
        g = TimeGrid(64, 8.0)
        f, h = random_field(rng, g), random_field(rng, g)
        acc = 0.0
        for fj, hj in zip(f.values.tolist(), h.values.tolist()):
            acc += 0.5 * (fj.conjugate() * hj + fj * hj.conjugate()).real * g.dt
        assert inner_product_real(f, h) == pytest.approx(acc, rel=1e-13, abs=1e-13)

    def test_grid_mismatch(self):
        with pytest.raises(GridMismatchError):
            inner_product_real(TimeGrid(8, 1.0).zeros(), TimeGrid(16, 1.0).zeros())

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), a=st.floats(-5, 5), b=st.floats(-5, 5))
    def test_symmetric_bilinear(self, seed, a, b):
        rng = np.random.default_rng(seed)
        g = TimeGrid(32, 6.0)
        f, h, k = (random_field(rng, g) for _ in range(3))
        assert inner_product_real(f, h) == pytest.approx(inner_product_real(h, f), rel=1e-12)
        lhs = inner_product_real(a * f + b * h, k)
        rhs = a * inner_product_real(f, k) + b * inner_product_real(h, k)
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)
        assert inner_product_real(f, f) == pytest.approx(l2_norm_sq(f), rel=1e-13)


class TestNorm:
    def test_zero(self):
        assert l2_norm_sq(TimeGrid(8, 1.0).zeros()) == 0.0

    def test_constant(self):
        g = TimeGrid(32, 10.0)
        assert l2_norm_sq(g.field(np.ones(32))) == pytest.approx(10.0, rel=1e-15)

    def test_sech(self, grid):
        assert l2_norm_sq(grid.field(1 / np.cosh(grid.t))) == pytest.approx(2.0, abs=1e-8)


class TestSpectrum:
    def test_constant_goes_to_dc(self):
        g = TimeGrid(32, 10.0)
        spec = to_spectrum(g.field(np.ones(32)))
        assert abs(spec.values[0]) == pytest.approx(10.0)
        assert np.max(np.abs(spec.values[1:])) < 1e-13

    def test_plane_wave_single_bin(self):
        g = TimeGrid(64, 10.0)
        w1 = g.omega[5]
        spec = to_spectrum(g.field(np.exp(1j * w1 * g.t)))
        mags = np.abs(spec.values)
        assert np.argmax(mags) == 5
        assert np.sum(mags > 1e-10) == 1

    def test_round_trip(self, rng, grid):
        f = random_field(rng, grid)
        back = from_spectrum(to_spectrum(f))
        assert np.max(np.abs(back.values - f.values)) < 1e-12 * np.max(np.abs(f.values))

    def test_parseval(self, rng, grid):
        f = random_field(rng, grid)
        assert spectral_norm_sq(to_spectrum(f)) == pytest.approx(l2_norm_sq(f), rel=1e-12)

    def test_second_derivative_of_plane_wave(self):
        g = TimeGrid(64, 10.0)
        w0 = g.omega[3]
        f = g.field(np.exp(1j * w0 * g.t))
        np.testing.assert_allclose(second_derivative(f).values, -(w0**2) * f.values, atol=1e-11)

    def test_domain_guards(self):
        f = TimeGrid(8, 1.0).zeros()
        with pytest.raises(ValueError):
            from_spectrum(f)
        with pytest.raises(ValueError):
            to_spectrum(to_spectrum(f))
