"""Acceptance criteria, one test per criterion, each at its stated tolerance.

Every test records a one-line verdict; ``conftest.py`` prints them in the
terminal summary, and running this file directly prints them as well.
"""
import subprocess
import sys
import time

import numpy as np

from generators import random_qubit_scenario, random_test_and_channel
from qbroadcast import corpus as cp
from qbroadcast import factorize as fz
from qbroadcast import feasengine as fe
from qbroadcast import matcore as mc
from qbroadcast import qobjects as qo
from qbroadcast import structure as st

RESULTS: dict[int, str] = {}
FEAS, INFEAS = fe.Status.FEASIBLE, fe.Status.INFEASIBLE


def criterion(number: int, title: str):
    def wrap(fn):
        def run():
            detail = {}
            try:
                fn(detail)
            except AssertionError as exc:
                reason = str(exc).splitlines()[0] if str(exc) else "assertion failed"
                RESULTS[number] = f"criterion {number:2d} FAIL  {title}: {_fmt(detail)} ({reason})"
                raise
            RESULTS[number] = f"criterion {number:2d} PASS  {title}: {_fmt(detail)}"
        run.__name__, run.__doc__ = fn.__name__, title
        return run
    return wrap


def _fmt(detail):
    return ", ".join(f"{k}={v:.3g}" if isinstance(v, float) else f"{k}={v}" for k, v in detail.items())


@criterion(1, "antidiscrimination verdicts")
def test_antidiscrimination(detail):
    t0 = time.perf_counter()
    v = {n: fe.decide_broadcast(cp.antidiscrimination_scenario(n).scenario) for n in (2, 3, 4)}
    detail["seconds"] = time.perf_counter() - t0
    for n in (2, 3, 4):
        detail[f"n{n}"] = f"{v[n].status}/{v[n].residual:.2e}/{v[n].iterations}it"
    assert v[2].status is FEAS and v[2].residual < 1e-7
    for n in (3, 4):
        assert v[n].status is INFEAS and v[n].residual > 1e-3 and v[n].iterations <= 20000
    assert detail["seconds"] < 120


@criterion(2, "projective qutrit copying channel passes exactly")
def test_projective_qutrit(detail):
    e = cp.projective_qutrit_scenario()
    dev = fe.verify_pass(e.payload["channel"], e.scenario).max_deviation
    detail["max_deviation"] = dev
    assert dev <= 1e-12


@criterion(3, "noncommuting dim-5 frame")
def test_noncommuting_frame(detail):
    e = cp.noncommuting_frame_scenario()
    s, lam = e.scenario, e.payload["channel"]
    a = list(s.meas_a)
    dev = fe.verify_pass(lam, s).max_deviation
    commuting, _ = st.mutually_commuting(a[0].effects, a[0].effects)
    m = e.payload["blocks"]
    comm = mc.frob(mc.commutator(m[0], m[1]))
    ext = st.extract_saa_frame(lam, a)
    ok = bool(ext) and st.verify_saa_certificate(a, ext.certificate)[0]
    norms = [mc.op_norm(g) for g in ext.certificate.frame.effects] if ext else []
    detail.update(deviation=dev, commutator=comm, certificate=ok,
                  max_norm_error=max(abs(x - 1) for x in norms) if norms else float("nan"))
    assert dev <= 1e-10
    assert not commuting and comm > 0.1
    assert ok
    assert all(abs(x - 1) <= 1e-7 for x in norms)


@criterion(4, "rerouted dim-6 channel")
def test_rerouted_channel(detail):
    psi_verdict = fe.decide_compatibility(qo.dephasing_channel(1 / 3), qo.dephasing_channel(1 / 3))
    e = cp.rerouted_scenario()
    s, lam = e.scenario, e.payload["channel"]
    at, bt = s.meas_a[0], s.meas_b[0]
    cp_min = mc.min_eig(lam.choi)
    tp = qo.tp_margin(lam)
    dev = fe.verify_pass(lam, s, tol=1e-6).max_deviation
    comm = mc.frob(mc.commutator(at.effects[0], bt.effects[0]))
    detail.update(psi_residual=psi_verdict.residual, choi_min=cp_min, tp_margin=tp, deviation=dev,
                  commutator=comm)
    assert psi_verdict.feasible and psi_verdict.residual < 1e-7
    assert cp_min >= -1e-8
    assert tp <= 1e-7
    assert dev <= 1e-6
    assert comm > 0.1, f"||[A0, B0]||_F = {comm:.6f} = 2 sqrt(2)/36 is below 0.1"


@criterion(5, "compatibility versus broadcastability")
def test_channel_dichotomy(detail):
    ident, d13, d05 = qo.identity_channel(2), qo.dephasing_channel(1 / 3), qo.dephasing_channel(0.5)
    a = fe.decide_compatibility(ident, ident)
    b = fe.decide_compatibility(d13, d13)
    c = fe.decide_channel_broadcast(qo.spanning_states(2), d05, d05)
    detail.update(identity_compat=str(a.status), dep13_compat=str(b.status), dep05_broadcast=str(c.status))
    assert a.status is INFEAS
    assert b.status is FEAS
    assert c.status is INFEAS


@criterion(6, "pass predicate equals factorization predicate")
def test_factorization_equivalence(detail):
    rng = np.random.default_rng(2024)
    agree = passes = 0
    for k in range(200):
        s, lam = random_test_and_channel(k, rng)
        x = fe.verify_pass(lam, s, tol=1e-8).passes
        y = fz.passes_factorized(lam, s, tol=1e-8)
        agree += x == y
        passes += x
    detail.update(agree=f"{agree}/200", passing=passes)
    assert agree == 200


@criterion(7, "noise invariance of verdicts")
def test_noise_invariance(detail):
    rng = np.random.default_rng(7)
    same, statuses = 0, []
    for k in range(20):
        _, s = random_qubit_scenario(k, rng)
        noisy = qo.Scenario(2, s.states, fz.noisy_family(s.meas_a, 0.3), fz.noisy_family(s.meas_b, 0.3))
        v, w = fe.decide_broadcast(s), fe.decide_broadcast(noisy)
        same += v.status == w.status
        statuses.append(v.status)
    detail.update(identical=f"{same}/20", feasible=sum(x is FEAS for x in statuses),
                  inconclusive=sum(x is fe.Status.INCONCLUSIVE for x in statuses))
    assert same == 20
    assert fe.Status.INCONCLUSIVE not in statuses


def _corpus_channels():
    out = list(cp.cesaro_channels())
    for e in cp.channel_pairs() + cp.conditional_expectation_pairs() + cp.reduction_entries():
        out += [(f"{e.name}[{k}]", c) for k, c in enumerate(e.payload["channels"])]
    for e in (cp.projective_qutrit_scenario(), cp.noncommuting_frame_scenario(), cp.rerouted_scenario()):
        lam = e.payload["channel"]
        out += [(f"{e.name}-{side}", qo.marginal_channel(lam, side)) for side in ("first", "second")]
    return out


@criterion(8, "Cesaro projection contract")
def test_cesaro(detail):
    chans = _corpus_channels()
    worst = 0.0
    for _, phi in chans:
        worst = max(worst, max(st.cesaro_projection(phi).contract().values()))
    rot = st.cesaro_projection(dict(cp.cesaro_channels())["irrational-rotation"])
    off = max(np.abs(b - np.diag(np.diag(b))).max() for b in rot.fixed_basis)
    detail.update(channels=len(chans), worst_contract=worst, rotation_offdiag=off, rotation_rank=rot.rank)
    assert worst <= 1e-7
    assert off <= 1e-6 and rot.rank == 2


@criterion(9, "commuting surrogate on diagonal states")
def test_surrogate(detail):
    states = [mc.proj(mc.ket(0, 2)), mc.proj(mc.ket(1, 2)), np.diag([0.3, 0.7])]
    z = qo.basis_dephasing(2)
    x = qo.projective_povm(np.array([[1, 1], [1, -1]]) / np.sqrt(2))
    sur, rep = st.extract_tao_surrogate(z, z, x, states)
    err = max(mc.frob(e - np.eye(2) / 2) for e in sur.effects)
    detail.update(surrogate_error=err, commutator=rep.max_commutator, statistics=rep.max_statistics_error)
    assert err <= 1e-8
    assert rep.max_commutator <= 1e-10
    assert rep.max_statistics_error <= 1e-10


@criterion(10, "commuting ranges decide compatibility with conditional expectations")
def test_conditional_expectations(detail):
    entries = cp.conditional_expectation_pairs()
    agree = 0
    for e in entries:
        phi, pi = e.payload["channels"]
        assert st.is_conditional_expectation(pi)[0], e.name
        agree += st.commuting_ranges(phi, pi)[0] == fe.decide_compatibility(phi, pi).feasible
    detail["agree"] = f"{agree}/{len(entries)}"
    assert len(entries) == 10 and agree == 10


@criterion(11, "deterministic corpus JSON")
def test_determinism(detail):
    cmd = [sys.executable, "-m", "qbroadcast", "corpus", "--json", "--seed", "0"]
    a = subprocess.run(cmd, capture_output=True, check=False)
    b = subprocess.run(cmd, capture_output=True, check=False)
    detail.update(bytes=len(a.stdout), exit_codes=f"{a.returncode},{b.returncode}")
    assert a.returncode == 0 and b.returncode == 0
    assert a.stdout == b.stdout and a.stdout


def summary_lines():
    return [RESULTS[k] for k in sorted(RESULTS)]


if __name__ == "__main__":
    for fn in (test_antidiscrimination, test_projective_qutrit, test_noncommuting_frame, test_rerouted_channel,
               test_channel_dichotomy, test_factorization_equivalence, test_noise_invariance, test_cesaro,
               test_surrogate, test_conditional_expectations, test_determinism):
        try:
            fn()
        except AssertionError:
            pass
    print("\n".join(summary_lines()))
