import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from qbroadcast import matcore as mc
from qbroadcast.errors import ShapeError

BACKENDS = ["python"]
try:
    from qbroadcast import _kernels  # noqa: F401

    BACKENDS.append("compiled")
except ImportError:
    pass


def _rand_herm(n, seed):
    return mc.random_hermitian(n, np.random.default_rng(seed))


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 16])
def test_jacobi_matches_lapack(backend, n):
    h = _rand_herm(n, n)
    w, v = mc.herm_eig(h, method="jacobi", backend=backend)
    assert np.allclose(w, np.linalg.eigvalsh(h), atol=1e-12)
    assert np.allclose(v.conj().T @ v, np.eye(n), atol=1e-12)
    assert np.allclose((v * w) @ v.conj().T, h, atol=1e-12)


@pytest.mark.parametrize("backend", BACKENDS)
def test_jacobi_degenerate_spectrum(backend):
    u = mc.random_unitary(4, np.random.default_rng(1))
    h = u @ np.diag([1.0, 1.0, 1.0, -2.0]) @ u.conj().T
    w, _ = mc.herm_eig(h, method="jacobi", backend=backend)
    assert np.allclose(w, [-2, 1, 1, 1], atol=1e-12)


def test_auto_routes_large_matrices_to_lapack():
    h = _rand_herm(mc.JACOBI_MAX_DIM + 6, 3)
    w, _ = mc.herm_eig(h)
    assert np.allclose(w, np.linalg.eigvalsh(h), atol=1e-10)


def test_backend_reported():
    assert mc.BACKEND in ("compiled", "python")
    with pytest.raises(ValueError):
        mc.kernels("fortran")


def test_psd_project_is_nearest():
    h = np.diag([2.0, -1.0, 0.5])
    assert np.allclose(mc.psd_project(h), np.diag([2.0, 0.0, 0.5]))


def test_as_hermitian_rejects_non_hermitian():
    with pytest.raises(ShapeError):
        mc.as_hermitian(np.array([[0, 1], [0, 0]]))
    with pytest.raises(ShapeError):
        mc.as_hermitian(np.zeros((2, 3)))


def test_partial_trace_of_product():
    rng = np.random.default_rng(0)
    a, b = mc.random_density(2, rng), mc.random_density(3, rng)
    ab = mc.kron(a, b)
    assert np.allclose(mc.partial_trace(ab, (2, 3), keep="first"), a)
    assert np.allclose(mc.partial_trace(ab, (2, 3), keep="second"), b)


@settings(max_examples=40, deadline=None)
@given(n=hst.integers(1, 6), seed=hst.integers(0, 10_000))
def test_vectorize_is_an_isometry(n, seed):
    a, b = _rand_herm(n, seed), _rand_herm(n, seed + 1)
    x, y = mc.vectorize(a), mc.vectorize(b)
    assert x.shape == (n * n,)
    assert np.isclose(x @ y, np.trace(a @ b).real, atol=1e-10)
    assert np.allclose(mc.devectorize(x, n), a, atol=1e-12)


def test_hermitian_basis_is_orthonormal():
    basis = mc.hermitian_basis(3)
    gram = np.array([[np.trace(p @ q).real for q in basis] for p in basis])
    assert np.allclose(gram, np.eye(9))


def test_span_basis_rank():
    z = np.diag([1.0, -1.0])
    ops = [np.eye(2), z, np.eye(2) + 2 * z]
    assert len(mc.span_basis(ops, 2)) == 2


def test_bloch_operator_and_norms():
    x = mc.bloch_operator([1, 0, 0])
    assert np.allclose(x, [[0, 1], [1, 0]])
    assert np.isclose(mc.op_norm(x), 1.0)
    assert np.isclose(mc.frob(x), np.sqrt(2))
    assert np.isclose(mc.frob(mc.commutator(x, mc.bloch_operator([0, 0, 1]))), 2 * np.sqrt(2))


@settings(max_examples=25, deadline=None)
@given(n=hst.integers(1, 4), seed=hst.integers(0, 10_000))
def test_random_density_is_a_state(n, seed):
    rho = mc.random_density(n, np.random.default_rng(seed))
    assert np.isclose(np.trace(rho).real, 1)
    assert mc.min_eig(rho) >= -1e-12
