"""Numerical laboratory for mock Fourier series on self-affine measures."""

__version__ = "0.1.0"

from .affine_ifs import (
    AffineIFS,
    DigitStream,
    DigitWord,
    QuadratureRule,
    build_quadrature,
    doubling_scan,
    encode,
    fixed_anchor,
    integrate,
    make_ifs,
    validate_expansive,
)
from .divergence_lab import classify, delta_birkhoff, delta_quadrature, growth_rate, tail_distribution
from .hadamard_spectrum import (
    HadamardTriple,
    check_unitary,
    make_triple,
    mu_hat,
    orthonormality_defect,
    quarter_cantor,
    spectrum_level,
)
from .mock_fourier import (
    dirichlet_direct,
    dirichlet_orbit_log,
    dirichlet_product,
    kernel_defect,
    mock_coefficient,
    partial_sum,
)

__all__ = [
    "AffineIFS",
    "DigitStream",
    "DigitWord",
    "HadamardTriple",
    "QuadratureRule",
    "build_quadrature",
    "check_unitary",
    "classify",
    "delta_birkhoff",
    "delta_quadrature",
    "dirichlet_direct",
    "dirichlet_orbit_log",
    "dirichlet_product",
    "doubling_scan",
    "encode",
    "fixed_anchor",
    "growth_rate",
    "integrate",
    "kernel_defect",
    "make_ifs",
    "make_triple",
    "mock_coefficient",
    "mu_hat",
    "orthonormality_defect",
    "partial_sum",
    "quarter_cantor",
    "spectrum_level",
    "tail_distribution",
    "validate_expansive",
]
