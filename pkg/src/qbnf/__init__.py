"""Quantum Birkhoff normal forms, Bargmann-Fock matrices and cluster spectra."""
from .algebra import (
    GaussianRational,
    Monomial,
    WeylSeries,
    change_chart,
    commutative_product,
    harmonic_oscillator,
    heat_transform,
    ihbar_bracket,
    moyal_bracket,
    moyal_product,
    poisson_bracket,
    weight,
)
from .birkhoff import (
    NormalFormResult,
    action_polynomial,
    birkhoff_normal_form,
    classical_normal_form,
    conjugation_residual,
    evaluate_action_polynomial,
    exp_ad,
    leading_resonant_terms,
    solve_homological,
)
from .fock import (
    FockBasis,
    HermitianMatrix,
    WickOperator,
    direct_spectrum,
    enumerate_basis,
    hermitian_eigenvalues,
    matrix_of_wick,
    weyl_to_wick,
    wick_to_weyl,
)
from .resonance import ZetaStratum, analyze, band_exponent, complete_resonance, resonance_order, zeta_strata

__version__ = "0.1.0"
