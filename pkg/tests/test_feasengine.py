import numpy as np
import pytest

from qbroadcast import corpus as cp
from qbroadcast import feasengine as fe
from qbroadcast import matcore as mc
from qbroadcast import qobjects as qo
from qbroadcast.config import SolverConfig
from qbroadcast.errors import DomainError, ShapeError

from test_matcore import BACKENDS

FEAS, INFEAS = fe.Status.FEASIBLE, fe.Status.INFEASIBLE


def _single_block_system(n=2):
    return fe.AffineConstraintSystem((fe.Block("psd", n),))


@pytest.mark.parametrize("backend", BACKENDS)
def test_unit_trace_psd_is_feasible(backend):
    sys = _single_block_system(3)
    sys.add_trace_row({0: np.eye(3)}, 1.0, "trace")
    v = fe.dykstra_solve(sys, backend=backend)
    assert v.status is FEAS
    x = v.blocks[0]
    assert mc.min_eig(x) > -1e-7
    assert np.isclose(np.trace(x).real, 1, atol=1e-7)


@pytest.mark.parametrize("backend", BACKENDS)
def test_negative_trace_is_infeasible(backend):
    sys = _single_block_system(2)
    sys.add_trace_row({0: np.eye(2)}, -1.0, "trace")
    v = fe.dykstra_solve(sys, backend=backend)
    assert v.status is INFEAS
    # distance between the cone and the plane tr X = -1 is 1/sqrt(2)
    assert v.residual > 1e-3


def test_backends_agree_on_a_scenario():
    if len(BACKENDS) < 2:
        pytest.skip("compiled kernel not built")
    s = cp.antidiscrimination_scenario(3).scenario
    a = fe.decide_broadcast(s, backend="python")
    b = fe.decide_broadcast(s, backend="compiled")
    assert a.status == b.status
    assert np.isclose(a.residual, b.residual, rtol=1e-6)
    assert a.iterations == b.iterations


def test_inconsistent_linear_system():
    sys = _single_block_system(2)
    sys.add_trace_row({0: np.eye(2)}, 1.0, "a")
    sys.add_trace_row({0: np.eye(2)}, 2.0, "b")
    v = fe.dykstra_solve(sys)
    assert v.status is INFEAS
    assert v.iterations == 0
    assert "inconsistent" in v.note


def test_nonnegative_block():
    sys = fe.AffineConstraintSystem((fe.Block("nonneg", 3),))
    sys.add(np.array([1.0, 1.0, 1.0]), 1.0)
    sys.add(np.array([1.0, -1.0, 0.0]), 0.5)
    v = fe.dykstra_solve(sys)
    assert v.status is FEAS
    assert np.min(v.blocks[0]) > -1e-7


def test_row_shape_checked():
    sys = _single_block_system(2)
    with pytest.raises(ShapeError):
        sys.add(np.zeros(3), 0.0)
    with pytest.raises(ShapeError):
        fe.dykstra_solve(sys, cone_blocks=[fe.Block("psd", 3)])


def test_deduplicated_drops_parallel_rows():
    sys = _single_block_system(2)
    sys.add_trace_row({0: np.eye(2)}, 1.0)
    sys.add_trace_row({0: 2 * np.eye(2)}, 2.0)
    assert len(sys.deduplicated()) == 1
    sys.add_trace_row({0: np.eye(2)}, 3.0)
    assert len(sys.deduplicated()) == 2


def test_config_validation():
    with pytest.raises(DomainError):
        SolverConfig(tol_feasible=1e-2, tol_infeasible_floor=1e-3)
    with pytest.raises(DomainError):
        SolverConfig().updated(bogus=1)
    assert SolverConfig().updated(max_iterations=None).max_iterations == 20000


@pytest.mark.parametrize("n,status", [(2, FEAS), (3, INFEAS), (4, INFEAS)])
def test_antidiscrimination_verdicts(n, status):
    v = fe.decide_broadcast(cp.antidiscrimination_scenario(n).scenario)
    assert v.status is status
    if status is FEAS:
        assert v.residual < 1e-7
        assert fe.verify_pass(v.channel, cp.antidiscrimination_scenario(n).scenario, 1e-6).passes
    else:
        assert v.residual > 1e-3


def test_antidiscrimination_statistics():
    states, povm = cp.antidiscrimination_states(3)
    p = np.array([povm.probabilities(r) for r in states])
    assert np.allclose(p, (1 - np.eye(3)) / 2, atol=1e-12)


def test_feasible_witness_is_a_channel():
    s = cp.antidiscrimination_scenario(2).scenario
    v = fe.decide_broadcast(s)
    assert v.channel.dim_out == 4
    assert qo.tp_margin(v.channel) < 1e-6
    assert mc.min_eig(v.channel.choi) > -1e-6


def test_compatibility_dichotomy():
    assert fe.decide_compatibility(qo.identity_channel(2), qo.identity_channel(2)).status is INFEAS
    d13 = qo.dephasing_channel(1 / 3)
    v = fe.decide_compatibility(d13, d13)
    assert v.status is FEAS
    j = qo.ChoiChannel(v.blocks[0], 2, 4, (2, 2))
    rho = mc.random_density(2, np.random.default_rng(0))
    assert np.allclose(qo.marginal_channel(j, "first")(rho), d13(rho), atol=1e-6)
    assert np.allclose(qo.marginal_channel(j, "second")(rho), d13(rho), atol=1e-6)


def test_broadcastability_stricter_than_compatibility():
    d = qo.dephasing_channel(0.5)
    assert fe.decide_compatibility(d, d).status is FEAS
    assert fe.decide_channel_broadcast(None, d, d).status is INFEAS


@pytest.mark.parametrize("mu,status", [(0.66, FEAS), (0.68, INFEAS)])
def test_self_compatibility_threshold(mu, status):
    # the optimal symmetric qubit cloner shrinks by exactly 2/3
    d = qo.dephasing_channel(mu)
    assert fe.decide_compatibility(d, d).status is status


def test_depolarizing_pair_is_broadcastable():
    d = qo.depolarizing_channel(2)
    assert fe.decide_channel_broadcast(None, d, d).status is FEAS


def test_surrogate_system():
    states = [np.diag([0.3, 0.7]), np.diag([0.9, 0.1])]
    x = qo.Povm([(np.eye(2) + mc.PAULI_X) / 2, (np.eye(2) - mc.PAULI_X) / 2])
    assert fe.decide_surrogate(states, x).status is FEAS
    # spanning states force the surrogate to equal A, which does not commute with them
    assert fe.decide_surrogate(qo.spanning_states(2), x).status is INFEAS


def test_verify_pass_reports_worst_case():
    s = cp.antidiscrimination_scenario(3).scenario
    lam = qo.from_function(lambda r: np.kron(r, np.eye(2) / 2), 2, 4, (2, 2))
    rep = fe.verify_pass(lam, s)
    assert rep.max_dev_a < 1e-12
    assert np.isclose(rep.max_dev_b, 1 / 3)
    assert rep.worst[0] == "B"
    assert not rep.passes
    with pytest.raises(ShapeError):
        fe.verify_pass(qo.identity_channel(2), s)


def test_infeasible_history_plateaus():
    v = fe.decide_broadcast(cp.antidiscrimination_scenario(4).scenario)
    h = v.history
    assert v.iterations <= 20000
    # the projected gap never increases once the iteration has settled
    assert np.all(np.diff(h[10:]) <= 1e-12 * h[10:-1] + 1e-15)


def test_low_rank_refinement_on_degenerate_feasible_set():
    rng = np.random.default_rng(3)
    u = mc.random_unitary(2, rng)
    a = qo.projective_povm(u)
    s = qo.Scenario(2, [mc.random_pure(2, rng) for _ in range(3)], [a], [a])
    v = fe.decide_broadcast(s)
    assert v.status is FEAS
    assert fe.verify_pass(v.channel, s, tol=1e-6).passes
