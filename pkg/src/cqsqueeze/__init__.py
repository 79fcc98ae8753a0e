"""Quantum squeezing of pulses in the cubic-quintic nonlinear Schroedinger equation.

The package is organised bottom-up:

* :mod:`cqsqueeze.grid` -- periodic time grid, complex fields, inner products, FFT.
* :mod:`cqsqueeze.pulses` -- exact solitons, the width/amplitude relation, Gaussians.
* :mod:`cqsqueeze.propagator` -- split-step integration of the classical equation.
* :mod:`cqsqueeze.fluctuations` -- linearized and adjoint fluctuation propagation.
* :mod:`cqsqueeze.squeezing` -- homodyne projections and optimal squeezing ratios.
* :mod:`cqsqueeze.validation` -- the invariant suite behind ``cqsqueeze validate``.
* :mod:`cqsqueeze.config` -- experiment configuration files.
* :mod:`cqsqueeze.cli` -- the ``cqsqueeze`` experiment runner.
"""

from cqsqueeze.grid import (
    ComplexField,
    GridMismatchError,
    TimeGrid,
    from_spectrum,
    inner_product_real,
    l2_norm_sq,
    spectral_norm_sq,
    to_spectrum,
)
from cqsqueeze.pulses import (
    CqParams,
    DomainError,
    GaussianSpec,
    SolitonSpec,
    beta_from_amplitude,
    family_curve,
    fwhm_from_profile,
    gaussian_pulse,
    min_width,
    peak_power,
    soliton_profile,
    solve_bistable_amplitudes,
    width_amplitude_residual,
)
from cqsqueeze.propagator import (
    DivergenceError,
    StepConfig,
    Trajectory,
    hamiltonian,
    photon_number,
    propagate,
    propagate_backward,
    step,
)
from cqsqueeze.fluctuations import (
    adjoint_backstep,
    back_propagate,
    forward_propagate_perturbation,
    linearized_step,
)
from cqsqueeze.squeezing import (
    SqueezingCurve,
    ThetaScan,
    coherent_variance,
    local_oscillator,
    optimal_squeezing,
    squeezing_curve,
    theta_scan,
)
from cqsqueeze.validation import Check, run_suite

__version__ = "0.1.0"
