"""Finite-temperature reduced density matrix functional tools.

Exact diagonalization of second-quantized Hamiltonians in occupation-number
bases, grand-canonical Gibbs states, the universal 1RDM functional and
its inversion, ensemble representability, and Bogoliubov transformations.
"""

from ._backend import BACKEND
from .bogoliubov import BogoliubovSolution, QuadraticSpec, diagonalize
from .ensemble import (DensityMatrixOperator, GibbsState, OneRDM, ThermalModel, TruncationError,
                       converge_truncation, gibbs, thermal_state)
from .fock import FockBasis, OneBodyBasis, Statistics, enumerate_basis
from .functional import (InversionError, InversionResult, gamma_from_v, hxc_decompose,
                         universal_functional, v_from_gamma)
from .hamiltonian import (HamiltonianSpec, Potential, ValidationReport, build_operator, validate_potential,
                          validate_spec)
from .representability import ColemanEnsemble, classify, coleman_fractional, coleman_integer, realize

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BogoliubovSolution", "ColemanEnsemble", "DensityMatrixOperator", "FockBasis",
    "GibbsState", "HamiltonianSpec", "InversionError", "InversionResult", "OneBodyBasis", "OneRDM",
    "Potential", "QuadraticSpec", "Statistics", "ThermalModel", "TruncationError", "ValidationReport",
    "build_operator", "classify", "coleman_fractional", "coleman_integer", "converge_truncation",
    "diagonalize", "enumerate_basis", "gamma_from_v", "gibbs", "hxc_decompose", "realize",
    "thermal_state", "universal_functional", "v_from_gamma", "validate_potential", "validate_spec",
]
