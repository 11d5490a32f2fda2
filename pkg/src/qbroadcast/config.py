"""Numerical tolerances and solver settings.

Every threshold used across the package lives here so that a single
record documents the numerical contract.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

from .errors import DomainError


@dataclass(frozen=True)
class Tolerances:
    herm: float = 1e-12          # Hermiticity check at construction
    psd: float = 1e-10           # min eigenvalue of states / effects / Choi
    trace: float = 1e-10         # unit trace of states, effect sum
    tp: float = 1e-8             # trace preservation of Choi matrices
    equiv: float = 1e-9          # factorization-coordinate distance
    rank: float = 1e-9           # relative singular-value cutoff for spans
    commute: float = 1e-10       # Frobenius norm of commutators
    pass_dev: float = 1e-8       # max statistic deviation in verify_pass
    eig_offdiag: float = 1e-12   # Jacobi convergence, relative to ||h||_F
    eig_sweeps: int = 100


TOL = Tolerances()


@dataclass(frozen=True)
class SolverConfig:
    """Settings for :func:`qbroadcast.feasengine.dykstra_solve`."""

    tol_feasible: float = 1e-7
    tol_infeasible_floor: float = 1e-3
    max_iterations: int = 20000
    stall_window: int = 500
    stall_rel_decrease: float = 1e-4
    # keep iterating below tol_feasible until the gap reaches this fraction
    polish: float = 1e-3
    row_cutoff: float = 1e-10
    dedup_cos: float = 1e-12
    rng_seed: int = 0
    restarts: int = 0
    # on Inconclusive, refine a low-rank factorization of the cone iterate
    face_reduction: bool = True

    def __post_init__(self):
        if not self.tol_feasible < self.tol_infeasible_floor:
            raise DomainError(
                f"tol_feasible ({self.tol_feasible}) must be below "
                f"tol_infeasible_floor ({self.tol_infeasible_floor})"
            )
        if self.max_iterations < 1 or self.stall_window < 1:
            raise DomainError("max_iterations and stall_window must be positive")

    def updated(self, **overrides) -> "SolverConfig":
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise DomainError(f"unknown solver settings: {sorted(unknown)}")
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_dict(self) -> dict:
        return asdict(self)
