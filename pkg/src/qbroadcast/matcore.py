"""Dense complex linear algebra on Hermitian matrices.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``. The
eigensolver is a cyclic Jacobi iteration, served by the compiled kernel
when it is importable and by the pure-Python twin otherwise. Large
matrices can be routed to LAPACK (``method="lapack"``), which is the
performance path for Choi matrices beyond a few dozen rows.

Conventions
-----------
* Tensor products put the first factor on the slow index.
* :func:`vectorize` maps an ``n x n`` Hermitian matrix to ``n**2`` real
  coordinates: the diagonal, then ``sqrt(2) * (Re, Im)`` of each upper
  triangle entry in lexicographic ``(i, j)`` order. With this weighting the
  Frobenius inner product ``tr(A B)`` equals the Euclidean dot product of
  the coordinate vectors.
"""
from __future__ import annotations

import os
from functools import lru_cache

import numpy as np

from .config import TOL
from .errors import NumericalError, ShapeError

if os.environ.get("QBROADCAST_PURE_PYTHON"):
    from . import _fallback as _core

    BACKEND = "python"
else:
    try:
        from . import _kernels as _core

        BACKEND = "compiled"
    except ImportError:  # extension not built
        from . import _fallback as _core

        BACKEND = "python"

# Jacobi beyond this size loses to LAPACK by an order of magnitude.
JACOBI_MAX_DIM = 24

SQRT2 = np.sqrt(2.0)


def kernels(backend: str | None = None):
    """Return the kernel module for ``backend`` ("compiled" or "python")."""
    if backend is None:
        return _core
    if backend == "python":
        from . import _fallback

        return _fallback
    if backend == "compiled":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {backend!r}")


def as_hermitian(m, tol: float = TOL.herm) -> np.ndarray:
    """Validate Hermiticity within ``tol`` (relative to scale) and symmetrize."""
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {a.shape}")
    dev = np.abs(a - a.conj().T).max() if a.size else 0.0
    if dev > tol * max(1.0, np.abs(a).max()):
        raise ShapeError(f"matrix is not Hermitian (max |A - A^H| = {dev:.3e})")
    return (a + a.conj().T) / 2


def herm_eig(h, method: str = "auto", backend: str | None = None):
    """Eigendecomposition of a Hermitian matrix.

    Parameters
    ----------
    h : array_like
        Hermitian matrix.
    method : {"auto", "jacobi", "lapack"}
        ``"auto"`` uses Jacobi up to ``JACOBI_MAX_DIM`` rows and LAPACK above.
    backend : {"compiled", "python"}, optional
        Force a Jacobi kernel; defaults to the one selected at import.

    Returns
    -------
    eigenvalues : ndarray
        Real, ascending.
    eigenvectors : ndarray
        Orthonormal columns, ``h = V diag(w) V^H``.
    """
    a = np.asarray(h, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {a.shape}")
    if method == "auto":
        method = "jacobi" if a.shape[0] <= JACOBI_MAX_DIM else "lapack"
    if method == "lapack":
        try:
            return np.linalg.eigh((a + a.conj().T) / 2)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(str(exc)) from exc
    if method != "jacobi":
        raise ValueError(f"unknown method {method!r}")
    w, v, sweeps = kernels(backend).jacobi_eigh(a, TOL.eig_offdiag, TOL.eig_sweeps)
    if sweeps < 0:
        raise NumericalError(f"Jacobi did not converge in {TOL.eig_sweeps} sweeps")
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def psd_project(h, method: str = "auto") -> np.ndarray:
    """Frobenius-nearest positive semidefinite matrix (clip the spectrum at 0)."""
    w, v = herm_eig(h, method=method)
    return (v * np.maximum(w, 0.0)) @ v.conj().T


def min_eig(h) -> float:
    return float(herm_eig(h)[0][0])


def kron(a, b) -> np.ndarray:
    return np.kron(np.asarray(a), np.asarray(b))


def partial_trace(m, dims, keep: str = "first") -> np.ndarray:
    """Reduced matrix of a bipartite operator.

    ``keep="first"`` traces out the second factor and vice versa.
    """
    a = np.asarray(m)
    d1, d2 = dims
    if a.shape != (d1 * d2, d1 * d2):
        raise ShapeError(f"matrix of shape {a.shape} does not match dims {dims}")
    t = a.reshape(d1, d2, d1, d2)
    if keep == "first":
        return np.einsum("ajbj->ab", t)
    if keep == "second":
        return np.einsum("iaib->ab", t)
    raise ValueError(f"keep must be 'first' or 'second', got {keep!r}")


@lru_cache(maxsize=None)
def _vec_index(n: int):
    iu, ju = np.triu_indices(n, k=1)
    return np.arange(n), iu, ju


def vectorize(h) -> np.ndarray:
    """Real coordinates of a Hermitian matrix (see module notes)."""
    a = np.asarray(h)
    n = a.shape[0]
    d, iu, ju = _vec_index(n)
    off = a[iu, ju]
    out = np.empty(n * n)
    out[:n] = a[d, d].real
    out[n::2] = SQRT2 * off.real
    out[n + 1 :: 2] = SQRT2 * off.imag
    return out


def devectorize(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (n * n,):
        raise ShapeError(f"expected {n * n} coordinates, got {x.shape}")
    d, iu, ju = _vec_index(n)
    a = np.zeros((n, n), dtype=np.complex128)
    a[d, d] = x[:n]
    off = (x[n::2] + 1j * x[n + 1 :: 2]) / SQRT2
    a[iu, ju] = off
    a[ju, iu] = off.conj()
    return a


@lru_cache(maxsize=None)
def _herm_basis(n: int):
    eye = np.eye(n * n)
    return tuple(devectorize(eye[k], n) for k in range(n * n))


def hermitian_basis(n: int) -> list[np.ndarray]:
    """Frobenius-orthonormal basis of ``n x n`` Hermitian matrices."""
    return [b.copy() for b in _herm_basis(n)]


def span_basis(mats, n: int, rel_cutoff: float = TOL.rank) -> list[np.ndarray]:
    """Orthonormal Hermitian basis of the real span of ``mats``."""
    mats = list(mats)
    if not mats:
        return []
    rows = np.array([vectorize(m) for m in mats])
    u, s, vt = np.linalg.svd(rows, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return []
    k = int(np.sum(s > rel_cutoff * s[0]))
    return [devectorize(vt[i], n) for i in range(k)]


def commutator(a, b) -> np.ndarray:
    return a @ b - b @ a


def frob(a) -> float:
    return float(np.linalg.norm(a))


def op_norm(a) -> float:
    return float(np.linalg.norm(a, 2))


def ket(i: int, n: int) -> np.ndarray:
    v = np.zeros(n, dtype=np.complex128)
    v[i] = 1.0
    return v


def proj(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.complex128).reshape(-1)
    return np.outer(v, v.conj())


PAULI_I = np.eye(2, dtype=np.complex128)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)


def bloch_operator(r) -> np.ndarray:
    """``r . sigma`` for a real 3-vector ``r``."""
    rx, ry, rz = r
    return rx * PAULI_X + ry * PAULI_Y + rz * PAULI_Z


def random_unitary(n: int, rng) -> np.ndarray:
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_hermitian(n: int, rng) -> np.ndarray:
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (z + z.conj().T) / 2


def random_density(n: int, rng, rank: int | None = None) -> np.ndarray:
    k = n if rank is None else rank
    z = rng.normal(size=(n, k)) + 1j * rng.normal(size=(n, k))
    rho = z @ z.conj().T
    return rho / np.trace(rho).real


def random_pure(n: int, rng) -> np.ndarray:
    return random_density(n, rng, rank=1)
