"""Structural checks and certificates.

* commutativity tests between operator families,
* the Cesaro fixed-point projection of a channel and its contract,
* conditional-expectation and commuting-range tests,
* extraction and verification of a distinguishable-frame certificate from a
  channel that passes ``(all states, A, A)``,
* the commuting surrogate POVM obtained from the marginals of a
  broadcasting channel.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from . import feasengine as fe
from . import matcore as mc
from . import qobjects as qo
from .config import TOL, SolverConfig
from .errors import ConvergenceError, PreconditionError, ShapeError


# --- commutativity ---------------------------------------------------------


def mutually_commuting(lhs, rhs, tol: float = TOL.commute):
    """``(all commute, max ||[X, Y]||_F)`` over pairs ``X in lhs``, ``Y in rhs``."""
    lhs = [np.asarray(x) for x in lhs]
    rhs = [np.asarray(y) for y in rhs]
    worst = 0.0
    for x in lhs:
        for y in rhs:
            if x.shape != y.shape:
                raise ShapeError(f"shapes {x.shape} and {y.shape} differ")
            worst = max(worst, mc.frob(mc.commutator(x, y)))
    return worst <= tol, worst


def effects(povms) -> list[np.ndarray]:
    return [e for m in povms for e in m.effects]


def states_classical(states) -> bool:
    """Pairwise commuting states lie in a simplex of distinguishable states."""
    states = list(states)
    return mutually_commuting(states, states)[0]


# --- fixed-point projection ------------------------------------------------


@dataclass(frozen=True)
class FixedPointProjection:
    channel: qo.ChoiChannel
    source: qo.ChoiChannel
    iterations_used: int
    convergence_gap: float
    cesaro_gap: float
    adjoint_basis: tuple = field(repr=False)
    fixed_basis: tuple = field(repr=False)

    @property
    def rank(self) -> int:
        return len(self.adjoint_basis)

    def contract(self) -> dict:
        """Frobenius errors of ``Pi^2 = Pi``, ``Pi Phi = Pi``, ``Phi Pi = Pi`` and of TP."""
        p, s = qo.superop(self.channel), qo.superop(self.source)
        return {
            "idempotent": float(np.linalg.norm(p @ p - p)),
            "left": float(np.linalg.norm(p @ s - p)),
            "right": float(np.linalg.norm(s @ p - p)),
            "tp": qo.tp_margin(self.channel),
        }


def cesaro_projection(phi: qo.ChoiChannel, tol: float = 1e-8, max_n: int = 2 ** 16,
                      polish: bool = True) -> FixedPointProjection:
    """Idempotent limit of the running averages ``(1/n) sum_k phi^k``.

    Averages are doubled, ``Pi_2n = (Pi_n + phi^n Pi_n) / 2``, until two
    consecutive ones differ by at most ``tol``. Rotating components decay
    only like ``1/n``, so the average is then polished to the nearest
    idempotent by the iteration ``Pi <- 3 Pi^2 - 2 Pi^3``; the result must
    still satisfy ``phi Pi = Pi`` within ``100 tol``.
    """
    if phi.dim_in != phi.dim_out:
        raise ShapeError("the fixed-point projection needs a square channel")
    s = qo.superop(phi)
    pi, power, n = s.copy(), s.copy(), 1
    gap = np.inf
    while n < max_n:
        nxt = 0.5 * (pi + power @ pi)
        gap = float(np.linalg.norm(nxt - pi))
        pi, power, n = nxt, power @ power, 2 * n
        if gap <= tol:
            break
    cesaro_gap = gap
    if polish:
        for _ in range(100):
            sq = pi @ pi
            err = float(np.linalg.norm(sq - pi))
            if err <= 1e-14 * max(1.0, np.linalg.norm(pi)):
                break
            pi = 3 * sq - 2 * sq @ pi
    idem = float(np.linalg.norm(pi @ pi - pi))
    drift = max(float(np.linalg.norm(s @ pi - pi)), float(np.linalg.norm(pi @ s - pi)))
    if max(idem, drift) > 100 * tol:
        raise ConvergenceError(
            f"Cesaro averages did not settle: idempotency error {idem:.2e}, "
            f"invariance error {drift:.2e} after n = {n}"
        )
    d = phi.dim_in
    proj = qo.from_superop(pi, d, d)
    adj = mc.span_basis([qo.adjoint_apply(proj, h) for h in mc.hermitian_basis(d)], d)
    fix = mc.span_basis([qo.apply_channel(proj, h) for h in mc.hermitian_basis(d)], d)
    return FixedPointProjection(proj, phi, n, idem, cesaro_gap, tuple(adj), tuple(fix))


def adjoint_norm_estimate(phi: qo.ChoiChannel, samples: int = 200, seed: int = 0) -> float:
    """Lower estimate of ``sup ||phi^*(X)||`` over Hermitian ``-I <= X <= I``."""
    rng = np.random.default_rng(seed)
    best = mc.op_norm(qo.adjoint_apply(phi, np.eye(phi.dim_out)))
    for _ in range(samples):
        x = mc.random_hermitian(phi.dim_out, rng)
        x /= mc.op_norm(x)
        best = max(best, mc.op_norm(qo.adjoint_apply(phi, x)))
    return float(best)


def _require_idempotent(pi: qo.ChoiChannel, tol: float = 1e-6):
    if pi.dim_in != pi.dim_out:
        raise ShapeError("expected a square channel")
    s = qo.superop(pi)
    err = float(np.linalg.norm(s @ s - s))
    if err > tol:
        raise PreconditionError(f"channel is not idempotent (||Pi^2 - Pi|| = {err:.2e})")


def _adjoint_range(c: qo.ChoiChannel) -> list[np.ndarray]:
    return mc.span_basis([qo.adjoint_apply(c, h) for h in mc.hermitian_basis(c.dim_out)], c.dim_in)


def is_conditional_expectation(pi: qo.ChoiChannel, samples: int = 5, seed: int = 0,
                               tol: float = 1e-6):
    """Check that ``Pi^*`` is multiplicative on its range and has the bimodule property."""
    _require_idempotent(pi)
    d = pi.dim_in
    adj = lambda x: qo.adjoint_apply(pi, x)  # noqa: E731
    basis = _adjoint_range(pi)
    worst = 0.0
    for x in basis:
        for y in basis:
            xy = x @ y
            worst = max(worst, mc.frob(adj(xy) - xy))
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        x, y, z = (mc.random_hermitian(d, rng) for _ in range(3))
        px, py = adj(x), adj(y)
        worst = max(worst, mc.frob(adj(px @ z @ py) - px @ adj(z) @ py))
    return worst <= tol, float(worst)


def commuting_ranges(phi: qo.ChoiChannel, pi: qo.ChoiChannel, tol: float = 1e-8):
    """Whether ``phi^*`` and ``pi^*`` have commuting ranges, with the max commutator."""
    if phi.dim_in != pi.dim_in:
        raise ShapeError("adjoint ranges live on different spaces")
    ok, worst = mutually_commuting(_adjoint_range(phi), _adjoint_range(pi), tol)
    return ok, worst


# --- distinguishable frame certificate -------------------------------------


@dataclass
class SaaCertificate:
    """A frame POVM ``G`` and post-processings ``p[i, lambda]`` (one per POVM).

    ``post_processing[k][lam, i]`` is the probability of outcome ``i`` of
    POVM ``k`` given frame outcome ``lam``.
    """

    frame: qo.Povm
    post_processing: list
    vertices: list = field(default_factory=list)


@dataclass
class SaaExtraction:
    certificate: SaaCertificate | None
    step: str = ""
    message: str = ""

    def __bool__(self):
        return self.certificate is not None


def _affine_chart(points, tol=1e-9):
    """Centre and orthonormal rows spanning the affine hull of ``points``."""
    c0 = points.mean(axis=0)
    u, s, vt = np.linalg.svd(points - c0, full_matrices=False)
    r = int(np.sum(s > tol * max(1.0, s[0] if s.size else 0.0))) if s.size else 0
    return c0, vt[:r]


def _greedy_simplex(pts, k):
    """Pick ``k`` rows of ``pts`` spanning a simplex of large volume."""
    chosen = [int(np.argmax(np.linalg.norm(pts - pts.mean(axis=0), axis=1)))]
    while len(chosen) < k:
        base = pts[chosen[0]]
        dirs = (pts[chosen[1:]] - base).T if len(chosen) > 1 else np.zeros((pts.shape[1], 0))
        rel = pts - base
        if dirs.shape[1]:
            q, _ = np.linalg.qr(dirs)
            rel = rel - (rel @ q) @ q.T
        chosen.append(int(np.argmax(np.linalg.norm(rel, axis=1))))
    return chosen


def _hull_vertices(pts, merge: float = 1e-6):
    r = pts.shape[1]
    if r == 0:
        idx = [0]
    elif r == 1:
        idx = [int(np.argmin(pts[:, 0])), int(np.argmax(pts[:, 0]))]
    else:
        idx = list(ConvexHull(pts).vertices)
    out = []
    for i in idx:
        if all(np.linalg.norm(pts[i] - pts[j]) > merge for j in out):
            out.append(i)
    return out


def extract_saa_frame(lam: qo.ChoiChannel, meas, n_sample: int = 2000, seed: int = 0,
                      cfg: SolverConfig | None = None, max_rounds: int = 25) -> SaaExtraction:
    """Recover a frame POVM of norm-one effects from a channel passing ``(S, A, A)``.

    The fixed states of the symmetrized marginal are sampled, the vertices
    of their convex hull are refined until the barycentric functionals are
    positive on every state, and the dual frame is read off from the
    adjoint fixed-point space. Any failed tolerance returns no certificate.
    """
    meas = list(meas)
    d = lam.dim_in
    try:
        sym = qo.swap_symmetrize(lam)
        phi = qo.marginal_channel(sym, "second")
        fpp = cesaro_projection(phi)
    except (ShapeError, ConvergenceError) as exc:
        return SaaExtraction(None, "fixed-point projection", str(exc))
    pi = fpp.channel
    fix = list(fpp.fixed_basis)
    k = len(fix)

    def coords(rho):
        out = pi(rho)
        return np.array([np.trace(out @ b).real for b in fix])

    rng = np.random.default_rng(seed)
    inputs = [mc.random_pure(d, rng) for _ in range(n_sample)] + qo.spanning_states(d)
    cloud = np.array([coords(r) for r in inputs])
    c0, chart = _affine_chart(cloud)
    if chart.shape[0] != k - 1:
        return SaaExtraction(None, "sampling",
                             f"fixed states span affine dimension {chart.shape[0]}, expected {k - 1}")
    if k - 1 > 5:
        return SaaExtraction(None, "sampling", f"affine dimension {k - 1} exceeds 5")
    pts = (cloud - c0) @ chart.T
    try:
        cand = pts[_hull_vertices(pts)]
    except QhullError as exc:
        return SaaExtraction(None, "convex hull", str(exc))

    eye_vec = np.array([np.trace(b).real for b in fix])
    for _ in range(max_rounds):
        if len(cand) < k:
            return SaaExtraction(None, "convex hull", f"{len(cand)} vertices for {k} needed")
        verts = cand[_greedy_simplex(cand, k)]
        # barycentric functionals f(a) = alpha . a + beta on the chart
        m = np.hstack([verts, np.ones((k, 1))])
        try:
            coef = np.linalg.solve(m, np.eye(k))  # column lam: (alpha, beta)
        except np.linalg.LinAlgError:
            return SaaExtraction(None, "convex hull", "degenerate vertex set")
        func_ops, worst, extra = [], 0.0, []
        for j in range(k):
            alpha, beta = coef[:-1, j], coef[-1, j]
            g = chart.T @ alpha
            h = beta - g @ c0
            # on unit-trace fixed states tr(sigma F) = g . c(sigma) + h
            f_op = sum((gi * b for gi, b in zip(g, fix)), np.zeros((d, d), complex)) + h * np.eye(d)
            func_ops.append(f_op)
            w, v = mc.herm_eig(qo.adjoint_apply(pi, f_op))
            if w[0] < -1e-9:
                extra.append(v[:, 0])
            if w[-1] > 1 + 1e-9:
                extra.append(v[:, -1])
            worst = max(worst, -w[0], w[-1] - 1)
        if not extra:
            break
        new = np.array([(coords(mc.proj(x)) - c0) @ chart.T for x in extra])
        cand = np.vstack([cand, new])
        cand = cand[_hull_vertices(cand)] if len(cand) > k else cand
    else:
        return SaaExtraction(None, "vertex refinement",
                             f"fixed states are not a simplex (excess {worst:.2e})")

    frame_ops, vertex_states = [], []
    for f_op in func_ops:
        g_op = qo.adjoint_apply(pi, f_op)
        w, v = mc.herm_eig(g_op)
        vertex_states.append(pi(mc.proj(v[:, -1])))
        frame_ops.append(g_op)
    # the dual frame in range(Pi^*) with tr(rho_mu G_lam) = delta
    adj = list(fpp.adjoint_basis)
    gram = np.array([[np.trace(r @ x).real for x in adj] for r in vertex_states])
    sol, *_ = np.linalg.lstsq(gram, np.eye(k), rcond=None)
    frame_ops = [sum((c * x for c, x in zip(sol[:, j], adj)), np.zeros((d, d), complex)) for j in range(k)]
    if np.max(np.abs(gram @ sol - np.eye(k))) > 1e-7:
        return SaaExtraction(None, "distinguishability", "vertex states admit no dual frame")
    frame_ops = [(g + g.conj().T) / 2 for g in frame_ops]
    lo = min(mc.min_eig(g) for g in frame_ops)
    if lo < -1e-7 or mc.frob(sum(frame_ops) - np.eye(d)) > 1e-7:
        return SaaExtraction(None, "distinguishability",
                             f"dual frame is not a POVM (min eigenvalue {lo:.2e})")

    # order the frame to follow the outcomes of the first POVM where possible
    if meas:
        key = [int(np.argmax(meas[0].probabilities(r))) for r in vertex_states]
        order = sorted(range(k), key=lambda j: (key[j], j))
        frame_ops = [frame_ops[j] for j in order]
        vertex_states = [vertex_states[j] for j in order]
    frame = qo.Povm(frame_ops)

    posts = []
    for q, povm in enumerate(meas):
        p = solve_post_processing(frame, povm, cfg)
        if p is None:
            return SaaExtraction(None, "post-processing", f"POVM {q} is not a post-processing of the frame")
        posts.append(p)
    return SaaExtraction(SaaCertificate(frame, posts, vertex_states))


def solve_post_processing(frame: qo.Povm, povm: qo.Povm, cfg: SolverConfig | None = None,
                          tol: float = 1e-7):
    """Stochastic ``p[lam, i]`` with ``A_i = sum_lam p[lam, i] G_lam``, or None."""
    nl, ni = len(frame), len(povm)
    sys = fe.AffineConstraintSystem((fe.Block("nonneg", nl * ni, 1.0 / ni),),
                                    meta={"kind": "post-processing"})
    for lam in range(nl):
        row = np.zeros(nl * ni)
        row[lam * ni:(lam + 1) * ni] = 1.0
        sys.add(row, 1.0, f"row sum {lam}")
    for i, a in enumerate(povm.effects):
        for q, h in enumerate(mc.hermitian_basis(frame.dim)):
            row = np.zeros(nl * ni)
            for lam, g in enumerate(frame.effects):
                row[lam * ni + i] = np.trace(g @ h).real
            sys.add(row, np.trace(a @ h).real, f"effect {i} coord {q}")
    verdict = fe.dykstra_solve(sys, cfg=cfg)
    if not verdict.feasible:
        return None
    p = np.clip(verdict.witness.reshape(nl, ni), 0.0, None)
    p /= p.sum(axis=1, keepdims=True)
    rec = [sum(p[lam, i] * g for lam, g in enumerate(frame.effects)) for i in range(ni)]
    if max(mc.frob(r - a) for r, a in zip(rec, povm.effects)) > tol:
        return None
    return p


@dataclass
class SaaReport:
    norm_violations: list
    max_reconstruction_error: float
    pass_deviation: float
    frame_is_povm: bool

    @property
    def ok(self) -> bool:
        return (not self.norm_violations and self.frame_is_povm
                and self.max_reconstruction_error <= 1e-7 and self.pass_deviation <= TOL.pass_dev)


def frame_channel(frame: qo.Povm) -> qo.ChoiChannel:
    """``rho -> sum_lam tr(rho G_lam) |v_lam v_lam><v_lam v_lam|`` with ``v_lam`` a top eigenvector."""
    d = frame.dim
    preps = []
    for g in frame.effects:
        w, v = mc.herm_eig(g)
        x = mc.proj(v[:, -1])
        preps.append(np.kron(x, x))
    return qo.measure_prepare_channel(frame, preps, (d, d))


def verify_saa_certificate(meas, cert: SaaCertificate, tol: float = 1e-7):
    """Check norms in {0, 1}, the post-processings, and that the frame channel passes."""
    meas = list(meas)
    d = cert.frame.dim
    norms = [mc.op_norm(g) for g in cert.frame.effects]
    bad = [(j, n) for j, n in enumerate(norms) if not (n <= tol or abs(n - 1) <= tol)]
    povm_ok = (mc.frob(sum(cert.frame.effects) - np.eye(d)) <= tol
               and min(mc.min_eig(g) for g in cert.frame.effects) >= -tol)
    rec_err = 0.0
    for povm, p in zip(meas, cert.post_processing):
        p = np.asarray(p)
        if p.shape != (len(cert.frame), len(povm)) or np.any(p < -tol) \
                or np.max(np.abs(p.sum(axis=1) - 1)) > tol:
            rec_err = np.inf
            continue
        for i, a in enumerate(povm.effects):
            rec = sum(p[lam, i] * g for lam, g in enumerate(cert.frame.effects))
            rec_err = max(rec_err, mc.frob(rec - a))
    if len(cert.post_processing) != len(meas):
        rec_err = np.inf
    dev = np.inf
    if meas and not bad and povm_ok:
        s = qo.Scenario(d, qo.spanning_states(d), meas, meas)
        dev = fe.verify_pass(frame_channel(cert.frame), s).max_deviation
    rep = SaaReport(bad, float(rec_err), float(dev), bool(povm_ok))
    return rep.ok, rep


# --- commuting surrogate ---------------------------------------------------


@dataclass
class SurrogateReport:
    povm_error: float
    max_commutator: float
    max_statistics_error: float
    support_rank: int

    @property
    def ok(self) -> bool:
        return max(self.povm_error, self.max_commutator, self.max_statistics_error) <= 1e-7


def support_isometry(sigma, rel_tol: float = 1e-10) -> np.ndarray:
    w, v = mc.herm_eig(sigma)
    keep = w > rel_tol * max(w[-1], 1e-300)
    return v[:, keep]


def extract_tao_surrogate(phi1: qo.ChoiChannel, phi2: qo.ChoiChannel, a: qo.Povm, states):
    """Surrogate effects ``Pi_2^*(Phi_1^*(A_i))`` on the support of the test states.

    ``phi1`` and ``phi2`` are the two marginals of a channel passing the test
    with an informationally complete second collection, so ``phi2`` fixes
    every test state. Outside the support the original effects are kept,
    compressed to the orthogonal complement.
    """
    states = [np.asarray(s) for s in states]
    d = a.dim
    sigma = sum(states) / len(states)
    v = support_isometry(sigma)
    kdim = v.shape[1]
    p_perp = np.eye(d) - v @ v.conj().T
    phi2_r = qo.compress_output(qo.restrict_input(phi2, v), v)
    leak = qo.tp_margin(phi2_r)
    if leak > 1e-7:
        raise PreconditionError(f"second channel leaks out of the support (TP margin {leak:.2e})")
    fpp = cesaro_projection(phi2_r)
    fixed = fpp.channel(np.eye(kdim) / kdim)
    lo = mc.min_eig(fixed)
    if lo <= 1e-9:
        raise PreconditionError(f"no full-rank fixed state on the support (min eigenvalue {lo:.2e})")
    phi1_r = qo.restrict_input(phi1, v)
    out = []
    for e in a.effects:
        x = qo.adjoint_apply(fpp.channel, qo.adjoint_apply(phi1_r, e))
        out.append(v @ x @ v.conj().T + p_perp @ e @ p_perp)
    out = [(x + x.conj().T) / 2 for x in out]
    surrogate = qo.Povm(out)
    povm_err = max(mc.frob(sum(out) - np.eye(d)), max(0.0, -min(mc.min_eig(x) for x in out)))
    comm = mutually_commuting(out, states)[1]
    stats = max(float(np.max(np.abs(surrogate.probabilities(r) - a.probabilities(r)))) for r in states)
    return surrogate, SurrogateReport(povm_err, comm, stats, kdim)


def surrogate_from_broadcast(lam: qo.ChoiChannel, a: qo.Povm, states):
    """Apply :func:`extract_tao_surrogate` to the marginals of ``lam``."""
    d = lam.dim_in
    lam = qo.ChoiChannel(lam.choi, d, d * d, (d, d))
    return extract_tao_surrogate(qo.marginal_channel(lam, "first"),
                                 qo.marginal_channel(lam, "second"), a, states)
