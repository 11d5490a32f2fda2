"""Factorization maps: what a collection of measurements (or a channel) can see.

Two states are equivalent for a collection of POVMs when every effect has
the same expectation on both. The quotient is represented linearly: an
orthonormal basis ``{b_k}`` of the real span of all effects, with the
coordinate map ``F(rho) = (tr(rho b_k))_k``. Each POVM then factors as
``A = A' o F`` with ``A'`` a real matrix acting on coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import matcore as mc
from . import qobjects as qo
from .config import TOL
from .errors import DomainError, ShapeError


@dataclass(frozen=True)
class FactorizationMap:
    """Orthonormal basis of an operator span and its coordinate map.

    When the identity lies in the span, ``basis[0]`` is ``I / sqrt(dim)``
    and the remaining elements are traceless.
    """

    dim: int
    basis: tuple

    @property
    def rank(self) -> int:
        return len(self.basis)

    @property
    def contains_identity(self) -> bool:
        if not self.basis:
            return False
        return abs(np.trace(self.basis[0]).real - np.sqrt(self.dim)) < 1e-9

    def coordinates(self, rho) -> np.ndarray:
        rho = np.asarray(rho)
        if rho.shape != (self.dim, self.dim):
            raise ShapeError(f"operator of shape {rho.shape} for a dim-{self.dim} map")
        return np.array([np.trace(rho @ b).real for b in self.basis])

    __call__ = coordinates

    def state_coordinates(self, rho) -> np.ndarray:
        """Coordinates along the traceless directions, scaled by ``sqrt(dim)``.

        For a qubit this is the Bloch vector expressed in an orthonormal
        frame of the measured directions.
        """
        c = self.coordinates(rho)
        return np.sqrt(self.dim) * (c[1:] if self.contains_identity else c)

    def contains(self, op, tol: float = 1e-10) -> bool:
        return self.residual(op) <= tol

    def residual(self, op) -> float:
        op = np.asarray(op)
        rec = sum((np.trace(op @ b).real * b for b in self.basis), np.zeros_like(op))
        return mc.frob(op - rec)

    def induced(self, povm: qo.Povm) -> np.ndarray:
        """Matrix ``A'`` with ``A(rho) = A' @ F(rho)`` for effects in the span."""
        return np.array([[np.trace(e @ b).real for b in self.basis] for e in povm.effects])


def _factorization(ops, dim: int) -> FactorizationMap:
    ops = [np.asarray(o, dtype=np.complex128) for o in ops]
    basis = mc.span_basis(ops, dim, TOL.rank)
    if not basis:
        return FactorizationMap(dim, ())
    eye = np.eye(dim) / np.sqrt(dim)
    span = FactorizationMap(dim, tuple(basis))
    if span.residual(eye) > 1e-9:
        return span
    # put the normalized identity first and the traceless remainder after it
    rest = [b - np.trace(b).real / dim * np.eye(dim) for b in basis]
    tail = mc.span_basis(rest, dim, TOL.rank)
    return FactorizationMap(dim, tuple([eye.astype(np.complex128)] + tail[: len(basis) - 1]))


def factorization_of_povms(meas) -> FactorizationMap:
    meas = list(meas)
    if not meas:
        raise DomainError("need at least one POVM")
    dim = meas[0].dim
    if any(m.dim != dim for m in meas):
        raise ShapeError("POVMs must share one dimension")
    return _factorization([e for m in meas for e in m.effects], dim)


def states_equivalent(f: FactorizationMap, rho, sigma, tol: float = TOL.equiv) -> bool:
    return float(np.linalg.norm(f(rho) - f(sigma))) <= tol


def is_info_complete(meas) -> bool:
    f = factorization_of_povms(meas)
    return f.rank == f.dim ** 2


def noisy_family(meas, s: float, coins=None) -> list[qo.Povm]:
    """Mix each POVM with a coin toss: ``(1 - s) A_i + s c_i I``.

    ``coins`` holds one probability vector per POVM; uniform by default.
    """
    if not 0.0 < s <= 1.0:
        raise DomainError(f"noise weight must lie in (0, 1], got {s}")
    meas = list(meas)
    if coins is None:
        coins = [np.full(len(m), 1.0 / len(m)) for m in meas]
    if len(coins) != len(meas):
        raise ShapeError("one coin distribution per POVM")
    out = []
    for m, c in zip(meas, coins):
        c = np.asarray(c, dtype=float)
        if c.shape != (len(m),):
            raise ShapeError(f"coin of length {c.size} for a {len(m)}-outcome POVM")
        if np.any(c < 0) or abs(c.sum() - 1) > 1e-12:
            raise DomainError("coin must be a probability vector")
        eye = np.eye(m.dim)
        out.append(qo.Povm([(1 - s) * e + ci * s * eye for e, ci in zip(m.effects, c)]))
    return out


def channel_factorization(phi: qo.ChoiChannel) -> FactorizationMap:
    """Span of the adjoint range ``{phi^*(E)}``; ``F(rho) = F(sigma)`` iff ``phi(rho) = phi(sigma)``."""
    ops = [qo.adjoint_apply(phi, h) for h in mc.hermitian_basis(phi.dim_out)]
    return _factorization(ops, phi.dim_in)


def passes_factorized(lam: qo.ChoiChannel, s: qo.Scenario, tol: float = TOL.equiv) -> bool:
    """Broadcasting test phrased through equivalence classes.

    ``Tr_2 lam(rho)`` must be equivalent to ``rho`` for the first collection
    and ``Tr_1 lam(rho)`` for the second, for every test state.
    """
    d = s.dim
    lam = qo.ChoiChannel(lam.choi, d, d * d, (d, d))
    fa, fb = factorization_of_povms(s.meas_a), factorization_of_povms(s.meas_b)
    m1, m2 = qo.marginal_channel(lam, "first"), qo.marginal_channel(lam, "second")
    return all(states_equivalent(fa, m1(r), r, tol) and states_equivalent(fb, m2(r), r, tol)
               for r in s.states)
