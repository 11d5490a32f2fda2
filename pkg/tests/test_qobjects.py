import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from qbroadcast import matcore as mc
from qbroadcast import qobjects as qo
from qbroadcast.errors import DomainError, ShapeError


def _rand_channel(d_in, d_out, rng, kraus=3):
    ks = [rng.normal(size=(d_out, d_in)) + 1j * rng.normal(size=(d_out, d_in)) for _ in range(kraus)]
    s = sum(k.conj().T @ k for k in ks)
    w, v = np.linalg.eigh(s)
    inv_sqrt = (v / np.sqrt(w)) @ v.conj().T
    ks = [k @ inv_sqrt for k in ks]
    return qo.from_function(lambda x: sum(k @ x @ k.conj().T for k in ks), d_in, d_out), ks


def test_identity_channel_acts_trivially():
    rho = mc.random_density(3, np.random.default_rng(0))
    assert np.allclose(qo.identity_channel(3)(rho), rho)


def test_choi_matches_kraus_oracle():
    rng = np.random.default_rng(1)
    phi, ks = _rand_channel(2, 3, rng)
    rho = mc.random_density(2, rng)
    assert np.allclose(phi(rho), sum(k @ rho @ k.conj().T for k in ks))
    assert qo.validate(phi).ok
    assert qo.tp_margin(phi) < 1e-12


def test_adjoint_is_dual():
    rng = np.random.default_rng(2)
    phi, _ = _rand_channel(3, 2, rng)
    rho, e = mc.random_density(3, rng), mc.random_hermitian(2, rng)
    assert np.isclose(np.trace(e @ phi(rho)), np.trace(qo.adjoint_apply(phi, e) @ rho))


def test_compose_and_superop_round_trip():
    rng = np.random.default_rng(3)
    a, _ = _rand_channel(2, 3, rng)
    b, _ = _rand_channel(3, 2, rng)
    rho = mc.random_density(2, rng)
    assert np.allclose(qo.compose(b, a)(rho), b(a(rho)))
    back = qo.from_superop(qo.superop(a), 2, 3)
    assert np.allclose(back.choi, a.choi)
    with pytest.raises(ShapeError):
        qo.compose(a, a)


def test_dephasing_formula():
    rho = np.array([[0.7, 0.2], [0.2, 0.3]])
    out = qo.dephasing_channel(1 / 3)(rho)
    assert np.allclose(out, rho / 3 + (2 / 3) * np.eye(2) / 2)
    with pytest.raises(DomainError):
        qo.dephasing_channel(1.5)


def test_marginals_of_product_channel():
    rng = np.random.default_rng(4)
    a, b = mc.random_density(2, rng), mc.random_density(2, rng)
    lam = qo.from_function(lambda x: np.trace(x) * np.kron(a, b), 2, 4, (2, 2))
    rho = mc.random_density(2, rng)
    assert np.allclose(qo.marginal_channel(lam, "first")(rho), a)
    assert np.allclose(qo.marginal_channel(lam, "second")(rho), b)
    sw = qo.swap_channel_output(lam)
    assert np.allclose(sw(rho), np.kron(b, a))


def test_swap_symmetrize_is_swap_invariant():
    rng = np.random.default_rng(5)
    lam, _ = _rand_channel(2, 4, rng)
    sym = qo.swap_symmetrize(lam)
    assert np.allclose(qo.swap_channel_output(sym).choi, sym.choi)


def test_tensor_channels():
    u = mc.random_unitary(2, np.random.default_rng(6))
    c = qo.tensor_channels(qo.unitary_channel(u), qo.identity_channel(3))
    rho = mc.random_density(6, np.random.default_rng(7))
    uu = np.kron(u, np.eye(3))
    assert np.allclose(c(rho), uu @ rho @ uu.conj().T)


def test_spanning_states_span():
    for d in (2, 3):
        assert len(mc.span_basis(qo.spanning_states(d), d)) == d * d


def test_validation_reports_violations():
    bad_state = np.diag([1.2, -0.2])
    rep = qo.validate(bad_state, "rho")
    assert not rep.ok
    assert any("min eigenvalue" in v.message for v in rep.violations)
    bad_povm = qo.Povm([np.diag([1.0, 0.0]), np.diag([0.0, 0.5])])
    assert not qo.validate(bad_povm).ok
    not_tp = qo.ChoiChannel(2 * qo.identity_channel(2).choi, 2, 2)
    assert not qo.validate(not_tp).ok


def test_shape_errors():
    with pytest.raises(ShapeError):
        qo.ChoiChannel(np.eye(5), 2, 2)
    with pytest.raises(ShapeError):
        qo.Povm([np.eye(2), np.eye(3)])
    with pytest.raises(ShapeError):
        qo.Scenario(2, [np.eye(3) / 3], [qo.coin_povm(2, [1.0])], [qo.coin_povm(2, [1.0])])
    with pytest.raises(ShapeError):
        qo.identity_channel(2)(np.eye(3))


def test_restrict_and_compress():
    v = np.eye(3)[:, :2]
    c = qo.compress_output(qo.restrict_input(qo.identity_channel(3), v), v)
    x = mc.random_density(2, np.random.default_rng(8))
    assert np.allclose(c(x), x)


@settings(max_examples=20, deadline=None)
@given(seed=hst.integers(0, 10_000), d=hst.integers(2, 3))
def test_random_channels_are_cptp(seed, d):
    phi, _ = _rand_channel(d, d, np.random.default_rng(seed))
    assert mc.min_eig(phi.choi) > -1e-10
    assert qo.tp_margin(phi) < 1e-10
    rho = mc.random_density(d, np.random.default_rng(seed + 1))
    assert np.isclose(np.trace(phi(rho)).real, 1)
