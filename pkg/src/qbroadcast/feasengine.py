"""Feasibility of affine constraints over PSD blocks, by Dykstra's algorithm.

Every existence question handled by the package (is there a broadcasting
channel, a joint channel, a commuting surrogate POVM, a post-processing)
is an intersection of a product of cones with an affine subspace of
real-vectorized Hermitian blocks. :func:`dykstra_solve` alternates between
the two sets and reports

* ``Feasible`` when the final gap is below ``tol_feasible``; the witness is
  the affine iterate, so it meets every linear constraint to rounding,
* ``NumericallyInfeasible`` when the gap plateaus above
  ``tol_infeasible_floor``. This is numerical evidence, not a proof.
* ``Inconclusive`` otherwise.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from . import matcore as mc
from . import qobjects as qo
from .config import TOL, SolverConfig
from .errors import NumericalError, ShapeError


class Status(str, enum.Enum):
    FEASIBLE = "Feasible"
    INFEASIBLE = "NumericallyInfeasible"
    INCONCLUSIVE = "Inconclusive"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class Block:
    """One cone factor: a ``size x size`` PSD block or a nonnegative orthant."""

    kind: str
    size: int
    init: float = 1.0

    @property
    def ncoords(self) -> int:
        return self.size * self.size if self.kind == "psd" else self.size


@dataclass
class AffineConstraintSystem:
    blocks: tuple
    rows: list = field(default_factory=list)
    rhs: list = field(default_factory=list)
    descriptions: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def ambient_dim(self) -> int:
        return sum(b.ncoords for b in self.blocks)

    @property
    def offsets(self) -> list[int]:
        out, acc = [], 0
        for b in self.blocks:
            out.append(acc)
            acc += b.ncoords
        return out

    def __len__(self):
        return len(self.rows)

    def add(self, coeff, rhs: float, description: str = ""):
        coeff = np.asarray(coeff, dtype=float)
        if coeff.shape != (self.ambient_dim,):
            raise ShapeError(f"row of length {coeff.size}, expected {self.ambient_dim}")
        self.rows.append(coeff)
        self.rhs.append(float(rhs))
        self.descriptions.append(description)

    def add_trace_row(self, mats: dict, rhs: float, description: str = ""):
        """Add ``sum_b tr(X_b M_b) = rhs`` for Hermitian ``M_b`` keyed by block index."""
        coeff = np.zeros(self.ambient_dim)
        for b, m in mats.items():
            off = self.offsets[b]
            blk = self.blocks[b]
            if blk.kind == "psd":
                coeff[off:off + blk.ncoords] = mc.vectorize(m)
            else:
                coeff[off:off + blk.ncoords] = np.asarray(m, dtype=float)
        self.add(coeff, rhs, description)

    def matrix(self):
        if not self.rows:
            return np.zeros((0, self.ambient_dim)), np.zeros(0)
        return np.array(self.rows), np.array(self.rhs)

    def deduplicated(self, cos_tol: float = 1e-12) -> "AffineConstraintSystem":
        """Merge rows pointing in the same direction (cosine > 1 - cos_tol) with equal targets.

        Parallel rows with different normalized targets are kept so that the
        inconsistency stays visible to :func:`affine_factor`.
        """
        a, b = self.matrix()
        norms = np.linalg.norm(a, axis=1)
        out = AffineConstraintSystem(self.blocks, meta=dict(self.meta))
        kept: list[np.ndarray] = []
        targets: list[float] = []
        for k in range(len(a)):
            if norms[k] == 0.0:
                if abs(b[k]) > 0.0:
                    out.add(a[k], b[k], self.descriptions[k])
                continue
            u, t = a[k] / norms[k], b[k] / norms[k]
            if kept:
                cos = np.array(kept) @ u
                same = (cos > 1 - cos_tol) & (np.abs(np.array(targets) - t) <= 1e-12 * (1 + abs(t)))
                if np.any(same):
                    continue
            kept.append(u)
            targets.append(t)
            out.add(a[k], b[k], self.descriptions[k])
        return out

    def residuals(self, x) -> np.ndarray:
        a, b = self.matrix()
        return a @ np.asarray(x) - b

    def split(self, x) -> list:
        """Block matrices (or orthant vectors) from stacked coordinates."""
        out = []
        for blk, off in zip(self.blocks, self.offsets):
            seg = np.asarray(x)[off:off + blk.ncoords]
            out.append(mc.devectorize(seg, blk.size) if blk.kind == "psd" else seg.copy())
        return out

    def stack(self, parts) -> np.ndarray:
        return np.concatenate([
            mc.vectorize(p) if blk.kind == "psd" else np.asarray(p, dtype=float)
            for blk, p in zip(self.blocks, parts)
        ])


@dataclass
class FeasibilityVerdict:
    status: Status
    residual: float
    iterations: int
    witness: np.ndarray | None = None
    blocks: list | None = None
    channel: qo.ChoiChannel | None = None
    history: np.ndarray | None = None
    max_violation: float = 0.0
    min_eigenvalue: float = 0.0
    note: str = ""

    @property
    def feasible(self) -> bool:
        return self.status is Status.FEASIBLE


# --- builders --------------------------------------------------------------


def _tp_rows(sys, d_in, d_out, block=0):
    eye = np.eye(d_out)
    for k, h in enumerate(mc.hermitian_basis(d_in)):
        sys.add_trace_row({block: np.kron(h, eye)}, np.trace(h).real, f"TP[{k}]")


def _input_basis(states, d):
    if states is None:
        return mc.hermitian_basis(d)
    return mc.span_basis([np.asarray(s) for s in states], d)


def build_broadcast_constraints(s: qo.Scenario) -> AffineConstraintSystem:
    """Linear conditions on the Choi matrix of ``Lambda : d -> d (x) d``.

    One row per (test state, effect) on each side, plus trace preservation.
    """
    d = s.dim
    sys = AffineConstraintSystem(
        (Block("psd", d ** 3, 1.0 / d ** 2),),
        meta={"kind": "broadcast", "dim_in": d, "dim_out": d * d, "out_dims": (d, d)},
    )
    _tp_rows(sys, d, d * d)
    eye = np.eye(d)
    for x, rho in enumerate(s.states):
        for a, povm in enumerate(s.meas_a):
            for i, e in enumerate(povm.effects):
                sys.add_trace_row({0: np.kron(rho.T, np.kron(e, eye))},
                                  np.trace(e @ rho).real, f"A[{a}][{i}] on state {x}")
        for b, povm in enumerate(s.meas_b):
            for j, e in enumerate(povm.effects):
                sys.add_trace_row({0: np.kron(rho.T, np.kron(eye, e))},
                                  np.trace(e @ rho).real, f"B[{b}][{j}] on state {x}")
    return sys


def build_compatibility_constraints(phi1: qo.ChoiChannel, phi2: qo.ChoiChannel,
                                    states=None) -> AffineConstraintSystem:
    if phi1.dim_in != phi2.dim_in:
        raise ShapeError("compatibility needs channels with a common input")
    d, o1, o2 = phi1.dim_in, phi1.dim_out, phi2.dim_out
    sys = AffineConstraintSystem(
        (Block("psd", d * o1 * o2, 1.0 / (o1 * o2)),),
        meta={"kind": "compat", "dim_in": d, "dim_out": o1 * o2, "out_dims": (o1, o2)},
    )
    _tp_rows(sys, d, o1 * o2)
    for r, rho in enumerate(_input_basis(states, d)):
        out1, out2 = phi1(rho), phi2(rho)
        for k, h in enumerate(mc.hermitian_basis(o1)):
            sys.add_trace_row({0: np.kron(rho.T, np.kron(h, np.eye(o2)))},
                              np.trace(h @ out1).real, f"marginal 1, input {r}, coord {k}")
        for k, h in enumerate(mc.hermitian_basis(o2)):
            sys.add_trace_row({0: np.kron(rho.T, np.kron(np.eye(o1), h))},
                              np.trace(h @ out2).real, f"marginal 2, input {r}, coord {k}")
    return sys


def build_channel_broadcast_constraints(states, phi1: qo.ChoiChannel,
                                        phi2: qo.ChoiChannel) -> AffineConstraintSystem:
    """``phi_1(Tr_2 Lambda(rho)) = phi_1(rho)`` and the mirror condition on span(states)."""
    d = phi1.dim_in
    if phi2.dim_in != d:
        raise ShapeError("both channels must act on the broadcast system")
    sys = AffineConstraintSystem(
        (Block("psd", d ** 3, 1.0 / d ** 2),),
        meta={"kind": "channel-broadcast", "dim_in": d, "dim_out": d * d, "out_dims": (d, d)},
    )
    _tp_rows(sys, d, d * d)
    eye = np.eye(d)
    for r, rho in enumerate(_input_basis(states, d)):
        for side, phi in ((1, phi1), (2, phi2)):
            for k, h in enumerate(mc.hermitian_basis(phi.dim_out)):
                e = qo.adjoint_apply(phi, h)
                m = np.kron(e, eye) if side == 1 else np.kron(eye, e)
                sys.add_trace_row({0: np.kron(rho.T, m)}, np.trace(e @ rho).real,
                                  f"channel {side}, input {r}, coord {k}")
    return sys


def build_commuting_surrogate_constraints(states, a: qo.Povm) -> AffineConstraintSystem:
    """Effects agreeing with ``a`` on span(states) and commuting with it."""
    d, k = a.dim, len(a)
    sys = AffineConstraintSystem(
        tuple(Block("psd", d, 1.0 / k) for _ in range(k)),
        meta={"kind": "surrogate", "dim": d},
    )
    for q, h in enumerate(mc.hermitian_basis(d)):
        sys.add_trace_row({i: h for i in range(k)}, np.trace(h).real, f"normalization[{q}]")
    basis = _input_basis(states, d)
    for r, rho in enumerate(basis):
        for i, e in enumerate(a.effects):
            sys.add_trace_row({i: rho}, np.trace(e @ rho).real, f"statistics effect {i}, input {r}")
    for r, rho in enumerate(basis):
        for q, h in enumerate(mc.hermitian_basis(d)):
            m = 1j * mc.commutator(rho, h)
            if mc.frob(m) < 1e-14:
                continue
            for i in range(k):
                sys.add_trace_row({i: m}, 0.0, f"commutator effect {i}, input {r}, coord {q}")
    return sys


# --- solver ----------------------------------------------------------------


def _kernel_blocks(blocks):
    kinds = np.array([0 if b.kind == "psd" else 1 for b in blocks], dtype=np.intp)
    sizes = np.array([b.size for b in blocks], dtype=np.intp)
    offs, acc = [], 0
    for b in blocks:
        offs.append(acc)
        acc += b.ncoords
    return kinds, sizes, np.array(offs, dtype=np.intp)


def _initial_point(blocks):
    parts = []
    for b in blocks:
        if b.kind == "psd":
            parts.append(mc.vectorize(np.eye(b.size) * b.init))
        else:
            parts.append(np.full(b.size, b.init))
    return np.concatenate(parts)


def affine_factor(sys: AffineConstraintSystem, cutoff: float):
    """Orthonormal row basis ``Vt`` and target ``c`` with ``{x: Vt x = c}``.

    Also returns the norm of the part of the right-hand side that no point
    can satisfy (nonzero means the linear system is inconsistent).
    """
    a, b = sys.matrix()
    if a.shape[0] == 0:
        return np.zeros((0, sys.ambient_dim)), np.zeros(0), 0.0
    scale = np.linalg.norm(a, axis=1)
    scale[scale == 0] = 1.0
    a, b = a / scale[:, None], b / scale
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    r = int(np.sum(s > cutoff * s[0])) if s.size and s[0] > 0 else 0
    u, s, vt = u[:, :r], s[:r], vt[:r]
    c = (u.T @ b) / s
    inconsistency = float(np.linalg.norm(b - u @ (u.T @ b)))
    return vt, c, inconsistency


def dykstra_solve(sys: AffineConstraintSystem, cone_blocks=None,
                  cfg: SolverConfig | None = None, backend: str | None = None,
                  x0=None) -> FeasibilityVerdict:
    """Decide feasibility of ``sys`` intersected with the product cone."""
    cfg = cfg or SolverConfig()
    blocks = tuple(cone_blocks) if cone_blocks is not None else sys.blocks
    if sum(b.ncoords for b in blocks) != sys.ambient_dim:
        raise ShapeError("cone blocks do not cover the ambient space")
    sys = sys.deduplicated(cfg.dedup_cos)
    vt, c, inconsistency = affine_factor(sys, cfg.row_cutoff)
    if inconsistency > 1e-9 * (1.0 + np.linalg.norm(c)):
        status = Status.INFEASIBLE if inconsistency >= cfg.tol_infeasible_floor else Status.INCONCLUSIVE
        return FeasibilityVerdict(status, inconsistency, 0,
                                  note="linear constraints are inconsistent")
    kinds, sizes, offs = _kernel_blocks(blocks)
    kern = mc.kernels(backend)
    start = _initial_point(blocks) if x0 is None else np.asarray(x0, dtype=float)
    rng = np.random.default_rng(cfg.rng_seed)
    attempts = 1 + max(0, cfg.restarts)
    for attempt in range(attempts):
        x, y, hist, iters, code = kern.dykstra_run(
            start, vt, c, kinds, sizes, offs, cfg.max_iterations,
            cfg.tol_feasible * cfg.polish, cfg.tol_feasible, cfg.tol_infeasible_floor,
            cfg.stall_window, cfg.stall_rel_decrease, TOL.eig_offdiag, TOL.eig_sweeps,
            mc.JACOBI_MAX_DIM,
        )
        if code < 0:
            raise NumericalError("eigensolver failed inside the Dykstra loop")
        verdict = _classify(sys, blocks, cfg, x, hist, iters)
        if verdict.status is not Status.INCONCLUSIVE:
            return verdict
        if cfg.face_reduction:
            reduced = _face_solve(sys, blocks, y, cfg, vt, c)
            if reduced is not None:
                reduced.iterations += verdict.iterations
                return reduced
        if attempt == attempts - 1:
            return verdict
        # perturbed restart
        start = _initial_point(blocks) + 1e-2 * rng.normal(size=sys.ambient_dim)
        start = kern.cone_project(start, kinds, sizes, offs, TOL.eig_offdiag,
                                  TOL.eig_sweeps, mc.JACOBI_MAX_DIM)
    return verdict


def _face_solve(sys, blocks, y, cfg, vt, c, thresholds=(1e-2, 1e-3, 1e-4, 1e-5)):
    """Low-rank refinement of a stalled cone iterate.

    When the feasible set only touches the boundary of the cone, Dykstra
    converges sublinearly. Each PSD block is written as ``R R^H`` with ``R``
    seeded from the leading eigenpairs of the cone iterate (nonnegative
    blocks as ``q**2``), and the distance to the affine subspace is driven to
    zero by Levenberg-Marquardt. The result is in the cone by construction;
    it is accepted only if it meets the affine constraints within the
    feasibility tolerance. Returns None otherwise.
    """
    parts = sys.split(y)
    target = cfg.tol_feasible * cfg.polish
    tried = set()
    for thr in thresholds:
        seeds, ranks = [], []
        for blk, part in zip(blocks, parts):
            if blk.kind == "psd":
                w, v = mc.herm_eig(part)
                keep = w > thr * max(w[-1], 1e-300)
                r = v[:, keep] * np.sqrt(w[keep])
                seeds.append(np.concatenate([r.real.ravel(), r.imag.ravel()]))
                ranks.append(int(keep.sum()))
            else:
                q = np.sqrt(np.clip(part, 0.0, None))
                seeds.append(q)
                ranks.append(blk.size)
        if tuple(ranks) in tried:
            continue
        tried.add(tuple(ranks))
        theta0 = np.concatenate(seeds)

        def unpack(theta, ranks=ranks):
            out, pos = [], 0
            for blk, k in zip(blocks, ranks):
                if blk.kind == "psd":
                    n = blk.size * k
                    re = theta[pos:pos + n].reshape(blk.size, k)
                    im = theta[pos + n:pos + 2 * n].reshape(blk.size, k)
                    r = re + 1j * im
                    out.append(r @ r.conj().T)
                    pos += 2 * n
                else:
                    out.append(theta[pos:pos + blk.size] ** 2)
                    pos += blk.size
            return out

        def resid(theta):
            return vt @ sys.stack(unpack(theta)) - c

        method = "lm" if vt.shape[0] >= theta0.size else "trf"
        sol = least_squares(resid, theta0, method=method, xtol=1e-15, ftol=1e-15, gtol=1e-15,
                            max_nfev=200 * (theta0.size + 1))
        gap = float(np.linalg.norm(sol.fun))
        if gap > target:
            continue
        x = sys.stack(unpack(sol.x))
        verdict = _classify(sys, blocks, cfg, x, np.array([gap]), int(sol.nfev))
        verdict.note = f"low-rank refinement, ranks {list(ranks)}"
        if verdict.status is not Status.FEASIBLE or verdict.max_violation > 10 * cfg.tol_feasible:
            continue
        return verdict
    return None


def _stalled(hist, cfg) -> bool:
    w = cfg.stall_window
    if len(hist) <= w:
        return False
    prev, last = hist[-1 - w], hist[-1]
    return prev - last < cfg.stall_rel_decrease * prev


def _classify(sys, blocks, cfg, x, hist, iters) -> FeasibilityVerdict:
    residual = float(hist[-1]) if len(hist) else 0.0
    if residual <= cfg.tol_feasible:
        status = Status.FEASIBLE
    elif residual >= cfg.tol_infeasible_floor and _stalled(hist, cfg):
        status = Status.INFEASIBLE
    else:
        status = Status.INCONCLUSIVE
    parts = sys.split(x)
    mins = [mc.min_eig(p) if b.kind == "psd" else float(np.min(p)) for b, p in zip(blocks, parts)]
    verdict = FeasibilityVerdict(
        status, residual, int(iters), witness=x, blocks=parts, history=np.asarray(hist),
        max_violation=float(np.max(np.abs(sys.residuals(x)))) if len(sys) else 0.0,
        min_eigenvalue=float(min(mins)) if mins else 0.0,
    )
    if status is Status.FEASIBLE:
        _attach_channel(sys, verdict)
    return verdict


def _attach_channel(sys, verdict):
    meta = sys.meta
    if "dim_in" in meta:
        verdict.channel = qo.ChoiChannel(verdict.blocks[0], meta["dim_in"], meta["dim_out"],
                                         meta.get("out_dims"))


# --- direct checks ---------------------------------------------------------


@dataclass
class PassReport:
    max_dev_a: float
    max_dev_b: float
    worst: tuple
    tol: float

    @property
    def max_deviation(self) -> float:
        return max(self.max_dev_a, self.max_dev_b)

    @property
    def passes(self) -> bool:
        return self.max_deviation <= self.tol


def verify_pass(lam: qo.ChoiChannel, s: qo.Scenario, tol: float = TOL.pass_dev) -> PassReport:
    """Evaluate both sides of the broadcasting conditions for a given channel."""
    d = s.dim
    if lam.dim_in != d or lam.dim_out != d * d:
        raise ShapeError(f"channel {lam.dim_in} -> {lam.dim_out} cannot broadcast dim {d}")
    lam = qo.ChoiChannel(lam.choi, d, d * d, (d, d))
    m1, m2 = qo.marginal_channel(lam, "first"), qo.marginal_channel(lam, "second")
    dev_a = dev_b = 0.0
    worst = ("", -1, -1, -1, 0.0)
    for x, rho in enumerate(s.states):
        r1, r2 = m1(rho), m2(rho)
        for a, povm in enumerate(s.meas_a):
            diff = povm.probabilities(r1) - povm.probabilities(rho)
            i = int(np.argmax(np.abs(diff)))
            if abs(diff[i]) > dev_a:
                dev_a = abs(diff[i])
                if dev_a >= abs(worst[4]):
                    worst = ("A", x, a, i, float(diff[i]))
        for b, povm in enumerate(s.meas_b):
            diff = povm.probabilities(r2) - povm.probabilities(rho)
            j = int(np.argmax(np.abs(diff)))
            if abs(diff[j]) > dev_b:
                dev_b = abs(diff[j])
                if dev_b >= abs(worst[4]):
                    worst = ("B", x, b, j, float(diff[j]))
    return PassReport(float(dev_a), float(dev_b), worst, tol)


def decide_broadcast(s: qo.Scenario, cfg: SolverConfig | None = None, **kw) -> FeasibilityVerdict:
    return dykstra_solve(build_broadcast_constraints(s), cfg=cfg, **kw)


def decide_compatibility(phi1, phi2, states=None, cfg=None, **kw) -> FeasibilityVerdict:
    return dykstra_solve(build_compatibility_constraints(phi1, phi2, states), cfg=cfg, **kw)


def decide_channel_broadcast(states, phi1, phi2, cfg=None, **kw) -> FeasibilityVerdict:
    return dykstra_solve(build_channel_broadcast_constraints(states, phi1, phi2), cfg=cfg, **kw)


def decide_surrogate(states, a: qo.Povm, cfg=None, **kw) -> FeasibilityVerdict:
    return dykstra_solve(build_commuting_surrogate_constraints(states, a), cfg=cfg, **kw)
