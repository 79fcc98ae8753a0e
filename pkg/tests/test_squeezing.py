import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import factorial

from cqsqueeze.fluctuations import back_propagate_batch
from cqsqueeze.grid import ComplexField, TimeGrid, l2_norm_sq
from cqsqueeze.propagator import StepConfig, propagate
from cqsqueeze.pulses import CqParams, GaussianSpec, SolitonSpec, gaussian_pulse, soliton_profile
from cqsqueeze.squeezing import (
    coherent_variance,
    curve_from_trajectory,
    form_at_end,
    local_oscillator,
    minimize_form,
    optimal_squeezing,
    ratio_at,
    squeezing_curve,
    theta_scan,
)
from cqsqueeze.validation import brute_force_coherent_variance, grid_minimize_form

from conftest import smooth_random

NLSE = CqParams(1, 0.0)


@pytest.fixture(scope="module")
def nlse_traj(grid):
    u = soliton_profile(SolitonSpec(NLSE, 1.0), grid)
    return propagate(u, NLSE, np.pi / 2, StepConfig(dz=1e-3))


@pytest.fixture(scope="module")
def defocusing_traj(grid):
    p = CqParams(1, -0.1)
    u = soliton_profile(SolitonSpec.from_amplitude(p, 1.0), grid)
    return propagate(u, p, 2.0, StepConfig(dz=1e-3))


class TestLocalOscillator:
    def test_unit_norm_copy(self, grid, rng):
        u = ComplexField(grid, 3 * smooth_random(rng, grid)[0])
        f = local_oscillator(u, 0.0)
        assert l2_norm_sq(f) == pytest.approx(1.0, abs=1e-14)
        np.testing.assert_allclose(f.values, u.values / 3, atol=1e-14)

    def test_pi_negates(self, grid, rng):
        u = ComplexField(grid, smooth_random(rng, grid)[0])
        np.testing.assert_allclose(local_oscillator(u, np.pi).values, -local_oscillator(u, 0).values, atol=1e-15)

    def test_sech_quadrature(self, grid):
        u = grid.field(1 / np.cosh(grid.t))
        np.testing.assert_allclose(local_oscillator(u, np.pi / 2).values, 1j / np.cosh(grid.t) / np.sqrt(2), atol=1e-9)

    def test_zero_pulse(self, grid):
        with pytest.raises(ValueError):
            local_oscillator(grid.zeros(), 0.0)


def fock_two_mode_variance(f, dt, alpha, cutoff=40):
    """Exact variance on a truncated two-mode Fock space."""
    a = np.diag(np.sqrt(np.arange(1, cutoff)), 1)
    eye = np.eye(cutoff)
    modes = [np.kron(a, eye), np.kron(eye, a)]

    def coherent(x):
        n = np.arange(cutoff)
        return np.exp(-abs(x) ** 2 / 2) * x**n / np.sqrt(factorial(n))

    psi = np.kron(coherent(alpha[0]), coherent(alpha[1]))
    X = sum(0.5 * np.sqrt(dt) * (np.conj(fj) * m + fj * m.conj().T) for fj, m in zip(f, modes))
    mean = np.vdot(psi, X @ psi)
    second = np.vdot(psi, X @ X @ psi)
    return float((second - mean**2).real)


class TestCoherentVariance:
    def test_unit_norm(self, grid, rng):
        f = ComplexField(grid, smooth_random(rng, grid)[0])
        assert coherent_variance(f) == pytest.approx(0.25, abs=1e-15)

    def test_zero_and_scaling(self, grid, rng):
        assert coherent_variance(grid.zeros()) == 0.0
        f = ComplexField(grid, smooth_random(rng, grid)[0])
        assert coherent_variance(2 * f) == pytest.approx(4 * coherent_variance(f), rel=1e-15)

    @pytest.mark.parametrize("n", [8, 16, 32, 64])
    def test_mode_expansion_oracle(self, n, rng):
        g = TimeGrid(n, 6.0)
        f = rng.normal(size=n) + 1j * rng.normal(size=n)
        f /= np.sqrt(np.sum(np.abs(f) ** 2) * g.dt)
        for alpha in (None, rng.normal(size=n) + 1j * rng.normal(size=n)):
            brute = brute_force_coherent_variance(f, g.dt, alpha)
            assert brute == pytest.approx(0.25, abs=1e-12)
            assert brute == pytest.approx(coherent_variance(ComplexField(g, f)), abs=1e-12)

    def test_truncated_fock_space(self, rng):
        dt = 0.3
        f = rng.normal(size=2) + 1j * rng.normal(size=2)
        alpha = 0.6 * (rng.normal(size=2) + 1j * rng.normal(size=2))
        exact = fock_two_mode_variance(f, dt, alpha)
        assert exact == pytest.approx(0.25 * np.sum(np.abs(f) ** 2) * dt, rel=1e-10)


class TestQuadraticForm:
    def test_identity_propagation(self, grid):
        f = local_oscillator(soliton_profile(SolitonSpec(NLSE, 1.0), grid), 0.0)
        r, th = optimal_squeezing(f, 1j * f)
        assert r == pytest.approx(1.0, abs=1e-15)
        assert th == 0.0

    @settings(max_examples=200, deadline=None)
    @given(a=st.floats(0.01, 10), b=st.floats(0.01, 10), rho=st.floats(-0.999, 0.999))
    def test_closed_form_vs_grid(self, a, b, rho):
        c = rho * math.sqrt(a * b)
        r_opt, th = minimize_form(a, b, c)
        r_grid, th_grid = grid_minimize_form(a, b, c)
        assert 0.0 <= th < np.pi
        assert abs(r_grid - r_opt) < 1e-8
        assert ratio_at(th, a, b, c) == pytest.approx(r_opt, rel=1e-10, abs=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(a=st.floats(0.01, 10), b=st.floats(0.01, 10), rho=st.floats(-0.999, 0.999))
    def test_raw_grid_within_discretization_bound(self, a, b, rho):
        c = rho * math.sqrt(a * b)
        r_opt, _ = minimize_form(a, b, c)
        r_max = 0.5 * (a + b) + math.hypot(0.5 * (a - b), c)
        r_grid = ratio_at(np.linspace(0.0, np.pi, 10_000, endpoint=False), a, b, c).min()
        assert -1e-12 <= r_grid - r_opt <= (r_max - r_opt) * math.sin(np.pi / 20_000) ** 2 + 1e-12

    def test_grid_oracle_on_squeezed_form(self, nlse_traj):
        form = form_at_end(nlse_traj)
        assert grid_minimize_form(*form)[0] == pytest.approx(minimize_form(*form)[0], abs=1e-8)

    def test_phase_convention(self):
        # minimum along theta = pi/2 when the quadrature is squeezed
        r, th = minimize_form(2.0, 0.5, 0.0)
        assert (r, th) == (0.5, pytest.approx(np.pi / 2))
        r, th = minimize_form(0.5, 2.0, 0.0)
        assert (r, th) == (0.5, 0.0)

    def test_squeezing_at_one_period(self, nlse_traj):
        a, b, c = form_at_end(nlse_traj)
        r, _ = minimize_form(a, b, c)
        assert r < 1.0

    def test_uncertainty_product(self, nlse_traj, defocusing_traj):
        for traj in (nlse_traj, defocusing_traj):
            a, b, c = form_at_end(traj)
            r_min = minimize_form(a, b, c)[0]
            r_max = 0.5 * (a + b) + math.hypot(0.5 * (a - b), c)
            assert r_min * r_max == pytest.approx(a * b - c * c, rel=1e-12)
            assert r_min * r_max >= 1.0 - 1e-9


class TestDirectBackPropagation:
    @pytest.mark.parametrize("fixture", ["nlse_traj", "defocusing_traj"])
    def test_random_phases(self, request, fixture, rng):
        traj = request.getfixturevalue(fixture)
        U = traj.final
        a, b, c = form_at_end(traj)
        thetas = rng.uniform(0, 2 * np.pi, size=5)
        rows = np.array([local_oscillator(U, th).values for th in thetas])
        f0 = back_propagate_batch(rows, traj)
        direct = np.sum(np.abs(f0) ** 2, axis=1) * traj.grid.dt
        np.testing.assert_allclose(ratio_at(thetas, a, b, c), direct, rtol=1e-8)

    def test_no_conjugate_coupling_no_squeezing(self, defocusing_traj):
        a, b, c = form_at_end(defocusing_traj, conjugate_coupling=False)
        theta = np.linspace(0, 2 * np.pi, 50)
        np.testing.assert_allclose(ratio_at(theta, a, b, c), 1.0, atol=1e-9)


class TestCurves:
    def test_curve_basics(self, nlse_traj, tmp_path):
        curve = curve_from_trajectory(nlse_traj, 9)
        assert curve.R_opt[0] == 1.0
        assert curve.z[0] == 0 and curve.z[-1] == pytest.approx(np.pi / 2)
        assert curve.crosscheck_error < 1e-8
        assert np.all(curve.R_opt > 0)
        assert np.all((curve.theta_opt >= 0) & (curve.theta_opt < np.pi))
        np.testing.assert_allclose(curve.z_periods, curve.z / (np.pi / 2))
        path = curve.to_csv(tmp_path / "c.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "z,z_in_soliton_periods,R_opt,R_opt_dB,theta_opt"
        assert len(lines) == 10
        assert float(lines[1].split(",")[3]) == 0.0

    @pytest.mark.parametrize("gamma", [0.0, 0.1, 0.2])
    def test_monotone_over_first_period(self, grid, gamma):
        p = CqParams(1, gamma)
        spec = SolitonSpec.from_amplitude(p, 1.0)
        curve = squeezing_curve(soliton_profile(spec, grid), p, spec.soliton_period, 17, soliton_period=spec.soliton_period)
        assert np.all(np.diff(curve.R_opt) < 0)
        assert curve.z_periods[-1] == pytest.approx(1.0)

    def test_continuity(self, grid):
        p = CqParams(1, -0.1)
        curve = squeezing_curve(soliton_profile(SolitonSpec.from_amplitude(p, 1.0), grid), p, 2.0, 81)
        assert np.max(np.abs(np.diff(curve.R_opt_dB))) < 1.0

    def test_strided_trajectory_samples_checkpoints(self, grid):
        u = gaussian_pulse(GaussianSpec(1.0, 1.25), grid)
        p = CqParams(1, 0.1)
        sparse = propagate(u, p, 0.5, StepConfig(dz=1e-3, checkpoint_stride=25))
        full = propagate(u, p, 0.5, StepConfig(dz=1e-3, checkpoint_stride=1))
        c1 = curve_from_trajectory(sparse, 5)
        c2 = curve_from_trajectory(full, 5)
        np.testing.assert_allclose(c1.z, c2.z)
        np.testing.assert_allclose(c1.R_opt, c2.R_opt, rtol=1e-9)


class TestThetaScan:
    def test_periodic_and_minimum(self, grid):
        p = CqParams(1, -0.1)
        u = soliton_profile(SolitonSpec.from_amplitude(p, 1.0), grid)
        traj = propagate(u, p, 2.0, StepConfig(dz=1e-3))
        r_opt, th = minimize_form(*form_at_end(traj))
        thetas = np.concatenate([np.linspace(0, 2 * np.pi, 720, endpoint=False), [th, th + np.pi]])
        scan = theta_scan(u, p, 2.0, thetas)
        shifted = theta_scan(u, p, 2.0, thetas + np.pi)
        np.testing.assert_allclose(scan.R, shifted.R, rtol=0, atol=1e-10)
        assert scan.R.min() == pytest.approx(r_opt, abs=1e-10)
        # one minimum and one maximum per period
        r = scan.R[:720]
        d = np.sign(np.diff(np.concatenate([r, r[:1]])))
        assert np.sum(d != np.roll(d, 1)) == 4

    def test_csv(self, grid, tmp_path):
        u = soliton_profile(SolitonSpec(NLSE, 1.0), grid)
        scan = theta_scan(u, NLSE, 0.2, np.linspace(0, np.pi, 5))
        text = scan.to_csv(tmp_path / "s.csv").read_text().splitlines()
        assert text[0] == "theta,R" and len(text) == 6
