"""Multicritical phases of a biased multi-qubit/boson model at finite frequency ratio."""

__version__ = "0.1.0"

from .model import HilbertSpace, ModelError, ModelOperators, ModelParams, build_hamiltonian  # noqa: E402
from .phase import CriticalPoint, locate_multicritical, minimize  # noqa: E402
from .scaling import predicted_exponents  # noqa: E402
from .spectrum import exact_spectrum, mf_gap  # noqa: E402

__all__ = [
    "HilbertSpace", "ModelError", "ModelOperators", "ModelParams", "build_hamiltonian",
    "CriticalPoint", "locate_multicritical", "minimize", "predicted_exponents",
    "exact_spectrum", "mf_gap", "__version__",
]
