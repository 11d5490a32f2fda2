import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from generators import random_channel, random_povm, random_test_and_channel
from qbroadcast import corpus as cp
from qbroadcast import factorize as fz
from qbroadcast import feasengine as fe
from qbroadcast import matcore as mc
from qbroadcast import qobjects as qo
from qbroadcast.errors import DomainError, ShapeError

X, Y, Z = mc.PAULI_X, mc.PAULI_Y, mc.PAULI_Z


def _sharp(p):
    return qo.Povm([(np.eye(2) + p) / 2, (np.eye(2) - p) / 2])


def _bloch(r):
    return (np.eye(2) + mc.bloch_operator(r)) / 2


@pytest.mark.parametrize("paulis,rank", [([X], 2), ([X, Y], 3), ([X, Y, Z], 4)])
def test_pauli_ranks(paulis, rank):
    f = fz.factorization_of_povms([_sharp(p) for p in paulis])
    assert f.rank == rank
    assert f.contains_identity
    assert fz.is_info_complete([_sharp(p) for p in paulis]) == (rank == 4)


def test_x_measurement_sees_the_x_coordinate():
    f = fz.factorization_of_povms([_sharp(X)])
    r = np.array([0.3, -0.5, 0.6])
    (coord,) = f.state_coordinates(_bloch(r))
    assert np.isclose(abs(coord), 0.3)
    # states differing only in y, z are equivalent
    assert fz.states_equivalent(f, _bloch(r), _bloch([0.3, 0.1, -0.2]))
    assert not fz.states_equivalent(f, _bloch(r), _bloch([-0.3, -0.5, 0.6]))


def test_xy_measurements_see_the_disk():
    f = fz.factorization_of_povms([_sharp(X), _sharp(Y)])
    r = np.array([0.3, -0.4, 0.5])
    c = f.state_coordinates(_bloch(r))
    assert np.isclose(np.linalg.norm(c), 0.5)


def test_induced_matrix_reproduces_statistics():
    rng = np.random.default_rng(0)
    povms = [random_povm(3, rng), random_povm(3, rng, outcomes=2)]
    f = fz.factorization_of_povms(povms)
    rho = mc.random_density(3, rng)
    for m in povms:
        assert np.allclose(f.induced(m) @ f(rho), m.probabilities(rho))


def test_empty_or_mixed_dims_rejected():
    with pytest.raises(DomainError):
        fz.factorization_of_povms([])
    with pytest.raises(ShapeError):
        fz.factorization_of_povms([qo.coin_povm(2, [1.0]), qo.coin_povm(3, [1.0])])


def test_trivial_povm_has_rank_one():
    f = fz.factorization_of_povms([qo.coin_povm(3, [0.2, 0.8])])
    assert f.rank == 1
    assert fz.states_equivalent(f, np.eye(3) / 3, np.diag([1.0, 0, 0]))


def test_noisy_family_keeps_the_span():
    ms = [_sharp(X), _sharp(Z)]
    noisy = fz.noisy_family(ms, 0.3)
    assert np.allclose(noisy[0].effects[0], 0.7 * ms[0].effects[0] + 0.15 * np.eye(2))
    assert fz.factorization_of_povms(noisy).rank == fz.factorization_of_povms(ms).rank
    full = fz.noisy_family(ms, 1.0)
    assert fz.factorization_of_povms(full).rank == 1
    with pytest.raises(DomainError):
        fz.noisy_family(ms, 0.0)
    with pytest.raises(DomainError):
        fz.noisy_family(ms, 1.2)
    with pytest.raises(ShapeError):
        fz.noisy_family(ms, 0.3, coins=[[1.0, 0.0]])


def test_channel_factorization_separates_outputs():
    f = fz.channel_factorization(qo.dephasing_channel(0.0))
    assert f.rank == 1
    assert fz.channel_factorization(qo.basis_dephasing(3)).rank == 3
    assert fz.channel_factorization(qo.identity_channel(2)).rank == 4


def test_antidiscrimination_n4_info_complete():
    s = cp.antidiscrimination_scenario(4).scenario
    assert fz.is_info_complete(s.meas_a)


@settings(max_examples=30, deadline=None)
@given(seed=hst.integers(0, 100_000), k=hst.integers(0, 11))
def test_pass_predicates_agree(seed, k):
    s, lam = random_test_and_channel(k, np.random.default_rng(seed))
    assert fe.verify_pass(lam, s, tol=1e-8).passes == fz.passes_factorized(lam, s, tol=1e-8)


@settings(max_examples=20, deadline=None)
@given(seed=hst.integers(0, 100_000))
def test_equivalence_is_invariant_under_the_channel_factorization(seed):
    rng = np.random.default_rng(seed)
    phi = random_channel(2, 2, rng, kraus=1)
    f = fz.channel_factorization(phi)
    rho, sigma = mc.random_density(2, rng), mc.random_density(2, rng)
    same_output = mc.frob(phi(rho) - phi(sigma)) < 1e-9
    assert fz.states_equivalent(f, rho, sigma) == same_output
