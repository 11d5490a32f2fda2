"""States, POVMs and channels in Choi form.

Choi convention: ``J = sum_ij |i><j| (x) Phi(|i><j|)`` with the input factor
on the slow index, so ``J.reshape(d_in, d_out, d_in, d_out)[i, a, j, b]`` is
``Phi(|i><j|)[a, b]`` and ``Phi(rho) = Tr_in[(rho^T (x) I) J]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import matcore as mc
from .config import TOL
from .errors import DomainError, ShapeError


@dataclass(frozen=True)
class Povm:
    effects: tuple

    def __post_init__(self):
        effs = tuple(np.asarray(e, dtype=np.complex128) for e in self.effects)
        if not effs:
            raise ShapeError("a POVM needs at least one effect")
        n = effs[0].shape[0]
        for e in effs:
            if e.shape != (n, n):
                raise ShapeError("effects must share one square shape")
        object.__setattr__(self, "effects", effs)

    @property
    def dim(self) -> int:
        return self.effects[0].shape[0]

    def __len__(self):
        return len(self.effects)

    def __iter__(self):
        return iter(self.effects)

    def probabilities(self, rho) -> np.ndarray:
        return np.array([np.trace(e @ rho).real for e in self.effects])


@dataclass(frozen=True)
class ChoiChannel:
    """A linear map ``B(C^dim_in) -> B(C^dim_out)`` stored by its Choi matrix.

    ``out_dims`` optionally records a bipartition of the output space, which
    marginal and swap operations rely on.
    """

    choi: np.ndarray
    dim_in: int
    dim_out: int
    out_dims: tuple | None = None

    def __post_init__(self):
        j = np.asarray(self.choi, dtype=np.complex128)
        n = self.dim_in * self.dim_out
        if j.shape != (n, n):
            raise ShapeError(
                f"Choi matrix of shape {j.shape} does not fit "
                f"{self.dim_in} -> {self.dim_out}"
            )
        if self.out_dims is not None:
            if int(np.prod(self.out_dims)) != self.dim_out:
                raise ShapeError(f"out_dims {self.out_dims} do not multiply to {self.dim_out}")
            object.__setattr__(self, "out_dims", tuple(int(k) for k in self.out_dims))
        object.__setattr__(self, "choi", (j + j.conj().T) / 2)

    @property
    def tensor(self) -> np.ndarray:
        return self.choi.reshape(self.dim_in, self.dim_out, self.dim_in, self.dim_out)

    def __call__(self, rho):
        return apply_channel(self, rho)


@dataclass(frozen=True)
class Scenario:
    """A broadcasting test: test states and the two collections of test POVMs."""

    dim: int
    states: tuple
    meas_a: tuple
    meas_b: tuple
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(np.asarray(s, dtype=np.complex128) for s in self.states))
        object.__setattr__(self, "meas_a", tuple(m if isinstance(m, Povm) else Povm(m) for m in self.meas_a))
        object.__setattr__(self, "meas_b", tuple(m if isinstance(m, Povm) else Povm(m) for m in self.meas_b))
        if not self.states or not self.meas_a or not self.meas_b:
            raise ShapeError("a scenario needs test states and both measurement collections")
        for s in self.states:
            if s.shape != (self.dim, self.dim):
                raise ShapeError(f"test state of shape {s.shape} in a dim-{self.dim} scenario")
        for m in self.meas_a + self.meas_b:
            if m.dim != self.dim:
                raise ShapeError(f"POVM of dim {m.dim} in a dim-{self.dim} scenario")


# --- channel action --------------------------------------------------------


def apply_channel(c: ChoiChannel, rho) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.shape != (c.dim_in, c.dim_in):
        raise ShapeError(f"input of shape {rho.shape} for a channel on dim {c.dim_in}")
    return np.einsum("ij,iajb->ab", rho, c.tensor)


def adjoint_apply(c: ChoiChannel, e) -> np.ndarray:
    """Heisenberg picture: the ``X`` with ``tr(X rho) = tr(e Phi(rho))``."""
    e = np.asarray(e)
    if e.shape != (c.dim_out, c.dim_out):
        raise ShapeError(f"effect of shape {e.shape} for a channel into dim {c.dim_out}")
    return np.einsum("iajb,ba->ji", c.tensor, e)


def superop(c: ChoiChannel) -> np.ndarray:
    """Matrix of the channel on row-major vectorized operators."""
    t = c.tensor
    return t.transpose(1, 3, 0, 2).reshape(c.dim_out**2, c.dim_in**2)


def from_superop(s, dim_in: int, dim_out: int, out_dims=None) -> ChoiChannel:
    t = np.asarray(s).reshape(dim_out, dim_out, dim_in, dim_in).transpose(2, 0, 3, 1)
    return ChoiChannel(t.reshape(dim_in * dim_out, dim_in * dim_out), dim_in, dim_out, out_dims)


def from_function(f, dim_in: int, dim_out: int, out_dims=None) -> ChoiChannel:
    """Choi matrix of the linear map ``f`` evaluated on matrix units."""
    t = np.zeros((dim_in, dim_out, dim_in, dim_out), dtype=np.complex128)
    for i in range(dim_in):
        for j in range(dim_in):
            unit = np.zeros((dim_in, dim_in), dtype=np.complex128)
            unit[i, j] = 1.0
            t[i, :, j, :] = f(unit)
    return ChoiChannel(t.reshape(dim_in * dim_out, dim_in * dim_out), dim_in, dim_out, out_dims)


def compose(outer: ChoiChannel, inner: ChoiChannel) -> ChoiChannel:
    """``outer o inner``."""
    if outer.dim_in != inner.dim_out:
        raise ShapeError("composition dimension mismatch")
    return from_superop(superop(outer) @ superop(inner), inner.dim_in, outer.dim_out, outer.out_dims)


def tensor_channels(c1: ChoiChannel, c2: ChoiChannel) -> ChoiChannel:
    """``c1 (x) c2`` acting on a bipartite input."""
    t = np.einsum("iajb,kcld->ikacjlbd", c1.tensor, c2.tensor)
    din, dout = c1.dim_in * c2.dim_in, c1.dim_out * c2.dim_out
    return ChoiChannel(t.reshape(din * dout, din * dout), din, dout, (c1.dim_out, c2.dim_out))


# --- constructors ----------------------------------------------------------


def identity_channel(d: int) -> ChoiChannel:
    omega = np.eye(d).reshape(-1)
    return ChoiChannel(np.outer(omega, omega).astype(np.complex128), d, d)


def depolarizing_channel(d: int) -> ChoiChannel:
    """Completely depolarizing channel ``rho -> tr(rho) I/d``."""
    return ChoiChannel(np.eye(d * d, dtype=np.complex128) / d, d, d)


def dephasing_channel(mu: float, dim: int = 2) -> ChoiChannel:
    """``rho -> mu rho + (1 - mu) tr(rho) I/dim`` for ``mu`` in [0, 1]."""
    if not 0.0 <= mu <= 1.0:
        raise DomainError(f"mu must lie in [0, 1], got {mu}")
    return ChoiChannel(mu * identity_channel(dim).choi + (1 - mu) * depolarizing_channel(dim).choi, dim, dim)


def unitary_channel(u) -> ChoiChannel:
    u = np.asarray(u, dtype=np.complex128)
    d = u.shape[0]
    v = (np.kron(np.eye(d), u) @ np.eye(d).reshape(-1))
    return ChoiChannel(np.outer(v, v.conj()), d, d)


def basis_dephasing(d: int, u=None) -> ChoiChannel:
    """Measure in the columns of ``u`` (default computational) and re-prepare."""
    u = np.eye(d, dtype=np.complex128) if u is None else np.asarray(u, dtype=np.complex128)
    projs = [mc.proj(u[:, k]) for k in range(d)]
    return measure_prepare_channel(Povm(projs), projs)


def constant_channel(sigma, dim_in: int) -> ChoiChannel:
    sigma = np.asarray(sigma, dtype=np.complex128)
    return ChoiChannel(np.kron(np.eye(dim_in), sigma), dim_in, sigma.shape[0])


def measure_prepare_channel(g: Povm, prep, out_dims=None) -> ChoiChannel:
    """``rho -> sum_l tr(rho G_l) prep_l``."""
    prep = [np.asarray(p, dtype=np.complex128) for p in prep]
    if len(prep) != len(g):
        raise ShapeError(f"{len(g)} effects but {len(prep)} preparations")
    d_out = prep[0].shape[0]
    if any(p.shape != (d_out, d_out) for p in prep):
        raise ShapeError("preparations must share one shape")
    j = sum(np.kron(e.T, p) for e, p in zip(g.effects, prep))
    return ChoiChannel(j, g.dim, d_out, out_dims)


def swap_operator(d1: int, d2: int) -> np.ndarray:
    s = np.zeros((d1 * d2, d1 * d2))
    for i in range(d1):
        for j in range(d2):
            s[j * d1 + i, i * d2 + j] = 1.0
    return s


def swap_channel_output(c: ChoiChannel) -> ChoiChannel:
    """``swap o c`` for a channel into a bipartite space."""
    d1, d2 = _bipartition(c)
    s = np.kron(np.eye(c.dim_in), swap_operator(d1, d2))
    return ChoiChannel(s @ c.choi @ s.T, c.dim_in, c.dim_out, (d2, d1))


def swap_symmetrize(lam: ChoiChannel) -> ChoiChannel:
    """``(lam + swap o lam) / 2`` for ``lam : d -> d (x) d``."""
    d = lam.dim_in
    if lam.dim_out != d * d:
        raise ShapeError(f"output dim {lam.dim_out} is not {d}^2")
    lam = ChoiChannel(lam.choi, d, d * d, (d, d))
    sw = swap_channel_output(lam)
    return ChoiChannel((lam.choi + sw.choi) / 2, d, d * d, (d, d))


def _bipartition(c: ChoiChannel):
    if c.out_dims is not None and len(c.out_dims) == 2:
        return c.out_dims
    r = int(round(np.sqrt(c.dim_out)))
    if r * r != c.dim_out:
        raise ShapeError(f"cannot split output dim {c.dim_out} into two equal factors")
    return r, r


def marginal_channel(c: ChoiChannel, keep: str = "first") -> ChoiChannel:
    """``rho -> Tr_2 c(rho)`` (keep="first") or ``Tr_1 c(rho)`` (keep="second")."""
    d1, d2 = _bipartition(c)
    t = c.choi.reshape(c.dim_in, d1, d2, c.dim_in, d1, d2)
    if keep == "first":
        m = np.einsum("iabjcb->iajc", t)
        dout = d1
    elif keep == "second":
        m = np.einsum("iabjad->ibjd", t)
        dout = d2
    else:
        raise ValueError(f"keep must be 'first' or 'second', got {keep!r}")
    return ChoiChannel(m.reshape(c.dim_in * dout, c.dim_in * dout), c.dim_in, dout)


def restrict_input(c: ChoiChannel, v) -> ChoiChannel:
    """``X -> c(V X V^H)`` for an isometry ``V`` (columns span the subspace)."""
    v = np.asarray(v, dtype=np.complex128)
    k = v.shape[1]
    t = np.einsum("ki,kalb,lj->iajb", v, c.tensor, v.conj())
    return ChoiChannel(t.reshape(k * c.dim_out, k * c.dim_out), k, c.dim_out, c.out_dims)


def compress_output(c: ChoiChannel, v) -> ChoiChannel:
    """``X -> V^H c(X) V``."""
    v = np.asarray(v, dtype=np.complex128)
    k = v.shape[1]
    t = np.einsum("iajb,ak,bl->ikjl", c.tensor, v.conj(), v)
    return ChoiChannel(t.reshape(c.dim_in * k, c.dim_in * k), c.dim_in, k)


def spanning_states(d: int) -> list[np.ndarray]:
    """``d**2`` pure states whose span is every ``d x d`` matrix."""
    out = [mc.proj(mc.ket(i, d)) for i in range(d)]
    for i in range(d):
        for j in range(i + 1, d):
            out.append(mc.proj((mc.ket(i, d) + mc.ket(j, d)) / np.sqrt(2)))
            out.append(mc.proj((mc.ket(i, d) + 1j * mc.ket(j, d)) / np.sqrt(2)))
    return out


def projective_povm(u) -> Povm:
    u = np.asarray(u, dtype=np.complex128)
    return Povm([mc.proj(u[:, k]) for k in range(u.shape[1])])


def coin_povm(d: int, probs) -> Povm:
    return Povm([p * np.eye(d) for p in probs])


# --- validation ------------------------------------------------------------


@dataclass
class Violation:
    what: str
    margin: float
    message: str

    def to_dict(self):
        return {"what": self.what, "margin": self.margin, "message": self.message}


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, what, margin, message):
        self.violations.append(Violation(what, float(margin), message))

    def extend(self, other: "ValidationReport", prefix: str = ""):
        for v in other.violations:
            self.violations.append(Violation(prefix + v.what, v.margin, v.message))


def _check_state(rho, name, rep):
    try:
        rho = mc.as_hermitian(rho)
    except ShapeError as exc:
        rep.add(name, float("inf"), str(exc))
        return
    lo = mc.min_eig(rho)
    if lo < -TOL.psd:
        rep.add(name, lo, f"not PSD (min eigenvalue {lo:.3e})")
    tr = np.trace(rho).real
    if abs(tr - 1) > TOL.trace:
        rep.add(name, abs(tr - 1), f"trace {tr:.12g} differs from 1")


def _check_povm(m: Povm, name, rep):
    for k, e in enumerate(m.effects):
        try:
            e = mc.as_hermitian(e)
        except ShapeError as exc:
            rep.add(f"{name}[{k}]", float("inf"), str(exc))
            continue
        lo = mc.min_eig(e)
        if lo < -TOL.psd:
            rep.add(f"{name}[{k}]", lo, f"effect not PSD (min eigenvalue {lo:.3e})")
    dev = mc.frob(sum(m.effects) - np.eye(m.dim))
    if dev > TOL.trace:
        rep.add(name, dev, f"effects sum to identity only within {dev:.3e}")


def tp_margin(c: ChoiChannel) -> float:
    return mc.frob(np.einsum("iaja->ij", c.tensor) - np.eye(c.dim_in))


def _check_channel(c: ChoiChannel, name, rep):
    lo = mc.min_eig(c.choi)
    if lo < -TOL.psd:
        rep.add(name, lo, f"Choi matrix not PSD (min eigenvalue {lo:.3e})")
    tp = tp_margin(c)
    if tp > TOL.tp:
        rep.add(name, tp, f"not trace preserving: ||Tr_out J - I||_F = {tp:.3e}")


def validate(obj, name: str = "") -> ValidationReport:
    """List every violated invariant of a state, POVM, channel or scenario."""
    rep = ValidationReport()
    if isinstance(obj, Scenario):
        for k, s in enumerate(obj.states):
            _check_state(s, f"states[{k}]", rep)
        for k, m in enumerate(obj.meas_a):
            _check_povm(m, f"measurements_a[{k}]", rep)
        for k, m in enumerate(obj.meas_b):
            _check_povm(m, f"measurements_b[{k}]", rep)
    elif isinstance(obj, Povm):
        _check_povm(obj, name or "povm", rep)
    elif isinstance(obj, ChoiChannel):
        _check_channel(obj, name or "channel", rep)
    else:
        _check_state(obj, name or "state", rep)
    return rep
