"""Decision engine and certificate toolkit for quantum broadcasting tests."""
from .config import TOL, SolverConfig, Tolerances
from .matcore import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "SolverConfig", "TOL", "Tolerances", "__version__"]
