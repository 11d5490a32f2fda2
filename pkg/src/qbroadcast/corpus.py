"""Worked examples with their expected verdicts and certificate facts.

Each :class:`CorpusEntry` knows how to run itself and returns an
:class:`EntryResult` with the verdict obtained, the residual and the
certificate facts checked along the way. Entries are independent and can
be run in any order or in parallel.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from . import factorize as fz
from . import feasengine as fe
from . import matcore as mc
from . import qobjects as qo
from . import structure as st
from .config import SolverConfig
from .errors import ConvergenceError, DomainError

HADAMARD = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)


@dataclass
class EntryResult:
    name: str
    expected: str
    got: str
    residual: float
    ok: bool
    facts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "entry": self.name,
            "expected": self.expected,
            "got": self.got,
            "residual": float(f"{self.residual:.6e}"),
            "ok": self.ok,
            "facts": self.facts,
        }


@dataclass
class CorpusEntry:
    """A named example: what it contains, what it should give, and how to check it.

    ``kind`` is one of ``broadcast``, ``compat``, ``channel-broadcast``,
    ``surrogate``, ``witness``, ``factorization``, ``cesaro``,
    ``condexp`` and ``reduction``.
    """

    name: str
    kind: str
    payload: dict
    expected: str
    provenance: str
    facts: dict = field(default_factory=dict)

    def run(self, cfg: SolverConfig | None = None) -> EntryResult:
        return _RUNNERS[self.kind](self, cfg or SolverConfig())

    @property
    def scenario(self) -> qo.Scenario | None:
        return self.payload.get("scenario")


# --- scenario constructors -------------------------------------------------


def _bloch_state(r) -> np.ndarray:
    return (np.eye(2) + mc.bloch_operator(r)) / 2


def _pauli_povm(p) -> qo.Povm:
    return qo.Povm([(np.eye(2) + p) / 2, (np.eye(2) - p) / 2])


def qubit_bloch_scenarios() -> list[CorpusEntry]:
    """Scenarios measuring X, then X and Y, then all three Pauli observables."""
    families = [("x", [mc.PAULI_X]), ("xy", [mc.PAULI_X, mc.PAULI_Y]),
                ("xyz", [mc.PAULI_X, mc.PAULI_Y, mc.PAULI_Z])]
    out = []
    for tag, paulis in families:
        meas = [_pauli_povm(p) for p in paulis]
        s = qo.Scenario(2, qo.spanning_states(2), meas, meas, f"bloch-{tag}")
        rank = len(paulis) + 1
        out.append(CorpusEntry(
            f"bloch-{tag}", "factorization", {"scenario": s}, f"rank={rank}",
            "qubit Pauli measurements and their factorization maps",
            {"rank": rank, "info_complete": rank == 4},
        ))
    return out


def antidiscrimination_vectors(n: int) -> list[np.ndarray]:
    if n == 2:
        return [np.array([0.0, 0.0, 1.0]), np.array([0.0, 0.0, -1.0])]
    if n == 3:
        return [np.array([np.cos(t), np.sin(t), 0.0]) for t in 2 * np.pi * np.arange(3) / 3]
    if n == 4:
        return [np.array(v) / np.sqrt(3) for v in [(1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)]]
    raise DomainError(f"uniform antidiscrimination is built for n in {{2, 3, 4}}, got {n}")


def antidiscrimination_states(n: int, u=None):
    """States and the single POVM with ``tr(rho_x A_y) = (1 - delta_xy) / (n - 1)``."""
    vs = antidiscrimination_vectors(n)
    u = np.eye(2) if u is None else np.asarray(u)
    states = [u @ _bloch_state(v) @ u.conj().T for v in vs]
    if n == 2:
        effects = [states[1], states[0]]
    else:
        effects = [u @ ((np.eye(2) - mc.bloch_operator(v)) / n) @ u.conj().T for v in vs]
    return states, qo.Povm(effects)


def antidiscrimination_scenario(n: int) -> CorpusEntry:
    states, povm = antidiscrimination_states(n)
    s = qo.Scenario(2, states, [povm], [povm], f"antidiscrimination-n{n}")
    expected = "Feasible" if n == 2 else "NumericallyInfeasible"
    return CorpusEntry(f"antidiscrimination-n{n}", "broadcast", {"scenario": s}, expected,
                       f"uniform antidiscrimination with {n} qubit states",
                       {"states_classical": n == 2, "info_complete": n == 4})


def projective_qutrit_scenario() -> CorpusEntry:
    """Computational-basis qutrit measurement on all states, with its copying channel."""
    a = qo.projective_povm(np.eye(3))
    lam = qo.measure_prepare_channel(a, [np.kron(e, e) for e in a.effects], (3, 3))
    s = qo.Scenario(3, qo.spanning_states(3), [a], [a], "projective-qutrit")
    return CorpusEntry("projective-qutrit", "witness", {"scenario": s, "channel": lam}, "Feasible",
                       "copying channel for a projective qutrit measurement",
                       {"commuting_a": True, "frame": True})


def trine_effects(seed: int = 0) -> list[np.ndarray]:
    """Qubit trine POVM ``(I + v_i . sigma) / 3``, rotated about z for nonzero seeds."""
    phase = 0.0 if seed == 0 else np.random.default_rng(seed).uniform(0, 2 * np.pi)
    vs = [np.array([np.cos(t + phase), np.sin(t + phase), 0.0]) for t in 2 * np.pi * np.arange(3) / 3]
    return [(np.eye(2) + mc.bloch_operator(v)) / 3 for v in vs]


def noncommuting_frame_scenario(seed: int = 0) -> CorpusEntry:
    """Dim-5 POVM ``A_i = |i><i| + M_i`` with ``M`` a trine on the last two levels.

    The effects do not commute, yet ``rho -> sum_i tr(rho A_i) |ii><ii|``
    passes the test with all states.
    """
    m = trine_effects(seed)
    effects = []
    for i in range(3):
        e = np.zeros((5, 5), dtype=np.complex128)
        e[i, i] = 1.0
        e[3:, 3:] = m[i]
        effects.append(e)
    a = qo.Povm(effects)
    preps = [np.kron(mc.proj(mc.ket(i, 5)), mc.proj(mc.ket(i, 5))) for i in range(3)]
    lam = qo.measure_prepare_channel(a, preps, (5, 5))
    s = qo.Scenario(5, qo.spanning_states(5), [a], [a], "noncommuting-frame-dim5")
    return CorpusEntry("noncommuting-frame-dim5", "witness",
                       {"scenario": s, "channel": lam, "blocks": m}, "Feasible",
                       "norm-one frame plus noncommuting trine block",
                       {"commuting_a": False, "frame": True})


# --- rerouted dim-6 construction -------------------------------------------


def embed(x, dim: int = 6, offset: int = 4) -> np.ndarray:
    """Place a 2x2 operator on levels ``offset, offset + 1`` of a ``dim``-level system."""
    out = np.zeros((dim, dim), dtype=np.complex128)
    out[offset:offset + 2, offset:offset + 2] = x
    return out


def reroute(y) -> np.ndarray:
    """``X1 (x) X2 -> X1 (x) I/2 (x) I/2 (x) X2`` on the 4-level factor, extended linearly.

    Input index ``(a, b)``; output copies ``(a, c)`` and ``(d, b)``.
    """
    t = np.asarray(y).reshape(2, 2, 2, 2)
    half = np.eye(2) / 2
    return np.einsum("abpq,cr,ds->acdbprsq", t, half, half).reshape(16, 16)


def _lift_pair(big16) -> np.ndarray:
    """Embed an operator on (4-level) (x) (4-level) into (6-level) (x) (6-level)."""
    t = np.asarray(big16).reshape(4, 4, 4, 4)
    out = np.zeros((6, 6, 6, 6), dtype=np.complex128)
    out[:4, :4, :4, :4] = t
    return out.reshape(36, 36)


@lru_cache(maxsize=None)
def self_compatibility_witness(mu: float = 1 / 3, tol: float = 1e-12) -> qo.ChoiChannel:
    """Joint channel ``Psi`` whose two marginals both equal ``Delta_mu``.

    Obtained from the feasibility engine and tightened until its Choi
    matrix is PSD to rounding.
    """
    d = qo.dephasing_channel(mu)
    cfg = SolverConfig(tol_feasible=tol * 1e3, polish=1e-3)
    v = fe.decide_compatibility(d, d, cfg=cfg)
    if not v.feasible:
        raise ConvergenceError(f"self-compatibility solve failed at mu={mu} ({v.status}, {v.residual:.2e})")
    return qo.ChoiChannel(v.blocks[0], 2, 4, (2, 2))


def rerouted_channel(psi: qo.ChoiChannel) -> qo.ChoiChannel:
    """The dim-6 broadcasting channel built from ``psi`` and :func:`reroute`."""

    def lam(x):
        core = reroute(x[:4, :4]) + reroute(qo.apply_channel(psi, x[4:, 4:]))
        return _lift_pair(core)

    return qo.from_function(lam, 6, 36, (6, 6))


def rerouted_povms(mu: float = 1 / 3):
    z = [mc.proj(mc.ket(0, 2)), mc.proj(mc.ket(1, 2))]
    x = [mc.proj(HADAMARD[:, 0]), mc.proj(HADAMARD[:, 1])]
    dep = qo.dephasing_channel(mu)
    at = [_pad4(np.kron(a, np.eye(2))) + embed(dep(a)) for a in z]
    bt = [_pad4(np.kron(np.eye(2), b)) + embed(dep(b)) for b in x]
    return qo.Povm(at), qo.Povm(bt)


def _pad4(x) -> np.ndarray:
    out = np.zeros((6, 6), dtype=np.complex128)
    out[:4, :4] = x
    return out


def rerouted_scenario() -> CorpusEntry:
    """Dim-6 noncommuting pair broadcast by rerouting through a self-compatible channel."""
    at, bt = rerouted_povms()
    psi = self_compatibility_witness()
    lam = rerouted_channel(psi)
    s = qo.Scenario(6, qo.spanning_states(6), [at], [bt], "rerouted-dim6")
    return CorpusEntry("rerouted-dim6", "witness", {"scenario": s, "channel": lam, "psi": psi},
                       "Feasible", "rerouting through a self-compatible depolarizing pair",
                       {"commuting_ab": False})


# --- channel entries -------------------------------------------------------


def channel_pairs() -> list[CorpusEntry]:
    d13, d05 = qo.dephasing_channel(1 / 3), qo.dephasing_channel(0.5)
    ident, dep = qo.identity_channel(2), qo.depolarizing_channel(2)
    zdeph = qo.basis_dephasing(2)
    xdeph = qo.basis_dephasing(2, HADAMARD)
    span = qo.spanning_states(2)
    return [
        CorpusEntry("compat-identity", "compat", {"channels": (ident, ident)}, "NumericallyInfeasible",
                    "a universal copier would exist"),
        CorpusEntry("compat-depolarizing-1/3", "compat", {"channels": (d13, d13)}, "Feasible",
                    "self-compatible depolarizing channel"),
        CorpusEntry("compat-depolarizing-1/2", "compat", {"channels": (d05, d05)}, "Feasible",
                    "below the optimal symmetric cloning bound"),
        CorpusEntry("compat-completely-depolarizing", "compat", {"channels": (dep, dep)}, "Feasible",
                    "constant channels are compatible with everything"),
        CorpusEntry("broadcast-depolarizing-1/3", "channel-broadcast", {"states": span, "channels": (d13, d13)},
                    "NumericallyInfeasible", "invertible channels are not broadcastable"),
        CorpusEntry("broadcast-depolarizing-1/2", "channel-broadcast", {"states": span, "channels": (d05, d05)},
                    "NumericallyInfeasible", "invertible channels are not broadcastable"),
        CorpusEntry("broadcast-identity", "channel-broadcast", {"states": span, "channels": (ident, ident)},
                    "NumericallyInfeasible", "no-broadcasting for all states"),
        CorpusEntry("broadcast-completely-depolarizing", "channel-broadcast",
                    {"states": span, "channels": (dep, dep)}, "Feasible", "constant channels see nothing"),
        CorpusEntry("compat-idempotent-z-z", "compat", {"channels": (zdeph, zdeph)}, "Feasible",
                    "idempotent pair: compatibility equals broadcastability"),
        CorpusEntry("broadcast-idempotent-z-z", "channel-broadcast",
                    {"states": span, "channels": (zdeph, zdeph)}, "Feasible",
                    "idempotent pair: compatibility equals broadcastability"),
        CorpusEntry("compat-idempotent-z-x", "compat", {"channels": (zdeph, xdeph)}, "NumericallyInfeasible",
                    "idempotent pair: compatibility equals broadcastability"),
        CorpusEntry("broadcast-idempotent-z-x", "channel-broadcast",
                    {"states": span, "channels": (zdeph, xdeph)}, "NumericallyInfeasible",
                    "idempotent pair: compatibility equals broadcastability"),
    ]


def _pinching(projs) -> qo.ChoiChannel:
    d = projs[0].shape[0]
    return qo.from_function(lambda x: sum(p @ x @ p for p in projs), d, d)


def conditional_expectation_pairs() -> list[CorpusEntry]:
    """Ten ``(Phi, Pi)`` pairs with ``Pi^*`` a conditional expectation."""
    rng = np.random.default_rng(11)
    z2, x2 = qo.basis_dephasing(2), qo.basis_dephasing(2, HADAMARD)
    z3 = qo.basis_dephasing(3)
    f3 = np.array([[np.exp(2j * np.pi * j * k / 3) for k in range(3)] for j in range(3)]) / np.sqrt(3)
    p = np.diag([1.0, 1.0, 0.0]).astype(np.complex128)
    q = np.eye(3) - p
    pinch = _pinching([p, q])
    mp2 = qo.measure_prepare_channel(qo.projective_povm(np.eye(2)),
                                     [mc.random_density(2, rng), mc.random_density(2, rng)])
    mp3 = qo.measure_prepare_channel(qo.Povm([p, q]), [mc.random_density(3, rng), mc.random_density(3, rng)])
    pairs = [
        ("z-z", z2, z2, "Feasible"),
        ("x-z", x2, z2, "NumericallyInfeasible"),
        ("depolarizing-1/2-z", qo.dephasing_channel(0.5), z2, "NumericallyInfeasible"),
        ("constant-identity", qo.constant_channel(mc.random_density(2, rng), 2), qo.identity_channel(2), "Feasible"),
        ("z-identity", z2, qo.identity_channel(2), "NumericallyInfeasible"),
        ("measure-prepare-z", mp2, z2, "Feasible"),
        ("z3-z3", z3, z3, "Feasible"),
        ("z3-pinching", z3, pinch, "NumericallyInfeasible"),
        ("block-measure-prepare-pinching", mp3, pinch, "Feasible"),
        ("fourier-z3", qo.basis_dephasing(3, f3), z3, "NumericallyInfeasible"),
    ]
    return [CorpusEntry(f"condexp-{n}", "condexp", {"channels": (phi, pi)}, exp,
                        "compatibility with a conditional expectation", {"commuting_ranges": exp == "Feasible"})
            for n, phi, pi, exp in pairs]


def cesaro_channels() -> list[tuple[str, qo.ChoiChannel]]:
    theta = np.sqrt(2) * np.pi / 3
    amp = 0.3
    k0 = np.array([[1, 0], [0, np.sqrt(1 - amp)]])
    k1 = np.array([[0, np.sqrt(amp)], [0, 0]])
    damping = qo.from_function(lambda x: k0 @ x @ k0.conj().T + k1 @ x @ k1.conj().T, 2, 2)
    qutrit = projective_qutrit_scenario().payload["channel"]
    frame5 = noncommuting_frame_scenario().payload["channel"]
    return [
        ("irrational-rotation", qo.unitary_channel(np.diag([1.0, np.exp(1j * theta)]))),
        ("bit-flip-unitary", qo.unitary_channel(mc.PAULI_X)),
        ("depolarizing-1/2", qo.dephasing_channel(0.5)),
        ("amplitude-damping", damping),
        ("z-dephasing", qo.basis_dephasing(2)),
        ("projective-qutrit-marginal", qo.marginal_channel(qutrit, "second")),
        ("noncommuting-frame-dim5-marginal", qo.marginal_channel(frame5, "second")),
        ("identity-qutrit", qo.identity_channel(3)),
    ]


def cesaro_entries() -> list[CorpusEntry]:
    return [CorpusEntry(f"cesaro-{n}", "cesaro", {"channel": c}, "idempotent",
                        "Cesaro fixed-point projection") for n, c in cesaro_channels()]


def surrogate_entries() -> list[CorpusEntry]:
    x = qo.projective_povm(HADAMARD)
    diag = [mc.proj(mc.ket(0, 2)), mc.proj(mc.ket(1, 2)), np.diag([0.3, 0.7]).astype(complex)]
    return [
        CorpusEntry("surrogate-diagonal-x", "surrogate", {"states": diag, "povm": x}, "Feasible",
                    "diagonal test states, X measurement", {"surrogate": "I/2"}),
        CorpusEntry("surrogate-spanning-x", "surrogate", {"states": qo.spanning_states(2), "povm": x},
                    "NumericallyInfeasible", "all states force the surrogate to be X itself"),
        CorpusEntry("surrogate-maximally-mixed", "surrogate", {"states": [np.eye(2) / 2], "povm": x},
                    "Feasible", "the maximally mixed state commutes with everything"),
    ]


def commuting_entries() -> list[CorpusEntry]:
    """Scenarios made classical either by commuting measurements or commuting states/measurements."""
    rng = np.random.default_rng(5)
    u = mc.random_unitary(3, rng)
    a = qo.projective_povm(u)
    b = qo.Povm([u @ np.diag(w) @ u.conj().T for w in ([0.5, 0.2, 0.0], [0.5, 0.8, 1.0])])
    s_ab = qo.Scenario(3, [mc.random_pure(3, rng) for _ in range(3)], [a], [b], "commuting-ab-qutrit")
    v = mc.random_unitary(2, rng)
    states_t = [v @ np.diag(p) @ v.conj().T for p in ([0.9, 0.1], [0.25, 0.75])]
    a2 = qo.projective_povm(v)
    s_at = qo.Scenario(2, states_t, [a2], [qo.projective_povm(mc.random_unitary(2, rng))], "commuting-at-qubit")
    return [
        CorpusEntry("commuting-ab-qutrit", "broadcast", {"scenario": s_ab}, "Feasible",
                    "mutually commuting measurement collections", {"commuting_ab": True}),
        CorpusEntry("commuting-at-qubit", "broadcast", {"scenario": s_at}, "Feasible",
                    "first collection commutes with the test states", {"commuting_at": True}),
    ]


def reduction_entries() -> list[CorpusEntry]:
    """Channel broadcastability against the measurement test pushed through the adjoints."""
    span = qo.spanning_states(2)
    pairs = [("depolarizing-1/3", qo.dephasing_channel(1 / 3), "NumericallyInfeasible"),
             ("completely-depolarizing", qo.depolarizing_channel(2), "Feasible"),
             ("z-dephasing", qo.basis_dephasing(2), "Feasible")]
    return [CorpusEntry(f"reduction-{n}", "reduction", {"states": span, "channels": (c, c)}, exp,
                        "channel test equals measurement test through the adjoints") for n, c, exp in pairs]


def pushed_scenario(states, phi1: qo.ChoiChannel, phi2: qo.ChoiChannel) -> qo.Scenario:
    """``(T, {A o phi1}, {B o phi2})`` with ``A``, ``B`` informationally complete."""

    def info_complete(d):
        out = []
        for k, s in enumerate(qo.spanning_states(d)):
            # two-outcome measurements {s, I - s} span every Hermitian operator
            out.append(qo.Povm([s, np.eye(d) - s]))
        return out

    pa = [qo.Povm([qo.adjoint_apply(phi1, e) for e in m.effects]) for m in info_complete(phi1.dim_out)]
    pb = [qo.Povm([qo.adjoint_apply(phi2, e) for e in m.effects]) for m in info_complete(phi2.dim_out)]
    return qo.Scenario(phi1.dim_in, states, pa, pb, "pushed")


def all_entries() -> list[CorpusEntry]:
    entries = (qubit_bloch_scenarios()
               + [antidiscrimination_scenario(n) for n in (2, 3, 4)]
               + [projective_qutrit_scenario(), noncommuting_frame_scenario(), rerouted_scenario()]
               + channel_pairs() + conditional_expectation_pairs() + cesaro_entries()
               + surrogate_entries() + commuting_entries() + reduction_entries())
    return sorted(entries, key=lambda e: e.name)


def select(filter_text: str | None = None) -> list[CorpusEntry]:
    entries = all_entries()
    if filter_text:
        entries = [e for e in entries if filter_text in e.name]
    return entries


# --- runners ---------------------------------------------------------------


def _verdict_result(entry, verdict, facts=None) -> EntryResult:
    got = str(verdict.status)
    return EntryResult(entry.name, entry.expected, got, verdict.residual,
                       got == entry.expected and all((facts or {}).get("_checks", [True])),
                       {k: v for k, v in (facts or {}).items() if not k.startswith("_")})


def _run_broadcast(entry, cfg):
    s = entry.scenario
    v = fe.decide_broadcast(s, cfg=cfg)
    facts, checks = {}, []
    comm_ab = st.mutually_commuting(st.effects(s.meas_a), st.effects(s.meas_b))[0]
    comm_at = st.mutually_commuting(st.effects(s.meas_a), s.states)[0]
    facts["commuting_ab"], facts["commuting_at"] = comm_ab, comm_at
    facts["states_classical"] = st.states_classical(s.states)
    facts["info_complete"] = fz.is_info_complete(s.meas_a)
    for key in ("commuting_ab", "commuting_at", "states_classical", "info_complete"):
        if key in entry.facts:
            checks.append(facts[key] == entry.facts[key])
    if v.feasible:
        rep = fe.verify_pass(v.channel, s, tol=1e-6)
        facts["witness_deviation"] = float(f"{rep.max_deviation:.3e}")
        checks.append(rep.passes)
    facts["_checks"] = checks
    return _verdict_result(entry, v, facts)


def _run_compat(entry, cfg):
    phi1, phi2 = entry.payload["channels"]
    return _verdict_result(entry, fe.decide_compatibility(phi1, phi2, cfg=cfg))


def _run_channel_broadcast(entry, cfg):
    phi1, phi2 = entry.payload["channels"]
    return _verdict_result(entry, fe.decide_channel_broadcast(entry.payload["states"], phi1, phi2, cfg=cfg))


def _run_surrogate(entry, cfg):
    v = fe.decide_surrogate(entry.payload["states"], entry.payload["povm"], cfg=cfg)
    return _verdict_result(entry, v)


def _run_witness(entry, cfg):
    s, lam = entry.scenario, entry.payload["channel"]
    rep = fe.verify_pass(lam, s)
    cp = mc.min_eig(lam.choi)
    tp = qo.tp_margin(lam)
    ok_channel = cp >= -1e-8 and tp <= 1e-7
    got = "Feasible" if rep.passes and ok_channel else "NotPassing"
    facts = {"max_deviation": float(f"{rep.max_deviation:.3e}"),
             "choi_min_eigenvalue": float(f"{cp:.3e}"), "tp_margin": float(f"{tp:.3e}")}
    checks = []
    if "commuting_a" in entry.facts:
        facts["commuting_a"] = st.mutually_commuting(st.effects(s.meas_a), st.effects(s.meas_a))[0]
        checks.append(facts["commuting_a"] == entry.facts["commuting_a"])
    if "commuting_ab" in entry.facts:
        facts["commuting_ab"] = st.mutually_commuting(st.effects(s.meas_a), st.effects(s.meas_b))[0]
        checks.append(facts["commuting_ab"] == entry.facts["commuting_ab"])
    if "frame" in entry.facts:
        ext = st.extract_saa_frame(lam, list(s.meas_a), cfg=cfg)
        found = bool(ext) and st.verify_saa_certificate(list(s.meas_a), ext.certificate)[0]
        facts["frame"] = found
        checks.append(found == entry.facts["frame"])
    return EntryResult(entry.name, entry.expected, got, rep.max_deviation,
                       got == entry.expected and all(checks), facts)


def _run_factorization(entry, cfg):
    s = entry.scenario
    f = fz.factorization_of_povms(s.meas_a)
    ic = fz.is_info_complete(s.meas_a)
    got = f"rank={f.rank}"
    ok = got == entry.expected and ic == entry.facts["info_complete"]
    return EntryResult(entry.name, entry.expected, got, 0.0, ok, {"rank": f.rank, "info_complete": ic})


def _run_cesaro(entry, cfg):
    phi = entry.payload["channel"]
    fpp = st.cesaro_projection(phi)
    c = fpp.contract()
    worst = max(c.values())
    got = "idempotent" if worst <= 1e-7 else "not-idempotent"
    norm = st.adjoint_norm_estimate(phi)
    facts = {"rank": fpp.rank, "adjoint_norm_ok": norm <= 1 + 1e-9}
    return EntryResult(entry.name, entry.expected, got, worst,
                       got == entry.expected and facts["adjoint_norm_ok"], facts)


def _run_condexp(entry, cfg):
    phi, pi = entry.payload["channels"]
    comm, worst = st.commuting_ranges(phi, pi)
    ce = st.is_conditional_expectation(pi)[0]
    v = fe.decide_compatibility(phi, pi, cfg=cfg)
    facts = {"commuting_ranges": comm, "conditional_expectation": ce,
             "_checks": [ce, comm == entry.facts["commuting_ranges"], comm == v.feasible]}
    return _verdict_result(entry, v, facts)


def _run_reduction(entry, cfg):
    phi1, phi2 = entry.payload["channels"]
    states = entry.payload["states"]
    v_ch = fe.decide_channel_broadcast(states, phi1, phi2, cfg=cfg)
    v_ms = fe.decide_broadcast(pushed_scenario(states, phi1, phi2), cfg=cfg)
    facts = {"measurement_verdict": str(v_ms.status), "_checks": [v_ms.status == v_ch.status]}
    return _verdict_result(entry, v_ch, facts)


_RUNNERS: dict[str, Callable] = {
    "broadcast": _run_broadcast,
    "compat": _run_compat,
    "channel-broadcast": _run_channel_broadcast,
    "surrogate": _run_surrogate,
    "witness": _run_witness,
    "factorization": _run_factorization,
    "cesaro": _run_cesaro,
    "condexp": _run_condexp,
    "reduction": _run_reduction,
}


def run_entry(entry: CorpusEntry, cfg: SolverConfig | None = None) -> EntryResult:
    return entry.run(cfg)


def _run_named(args):
    name, cfg = args
    entry = next(e for e in all_entries() if e.name == name)
    return entry.run(cfg)


def run_corpus(entries=None, cfg: SolverConfig | None = None, parallel: int = 1) -> list[EntryResult]:
    """Run entries (all by default); results come back sorted by name."""
    entries = all_entries() if entries is None else list(entries)
    if parallel > 1 and len(entries) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(_run_named, [(e.name, cfg) for e in entries]))
    else:
        results = [e.run(cfg) for e in entries]
    return sorted(results, key=lambda r: r.name)
