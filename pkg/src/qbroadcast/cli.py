"""Command-line front end.

Subcommands::

    qbroadcast validate FILE
    qbroadcast decide FILE --mode broadcast|compat|channel-broadcast|surrogate [--json]
    qbroadcast analyze FILE [--json]
    qbroadcast corpus [--filter TEXT] [--parallel N] [--json] [--export DIR]

Exit codes: 0 success / Feasible, 1 invalid objects or corpus mismatch,
2 parse or usage error, 3 NumericallyInfeasible, 4 Inconclusive.

Solver settings are layered: defaults, then the JSON file named by
``--config`` or ``$QBROADCAST_CONFIG``, then the scenario file's
``solver`` block, then the command-line flags.
"""
from __future__ import annotations

import argparse
import json
import os
import re
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import corpus as cp
from . import factorize as fz
from . import feasengine as fe
from . import matcore as mc
from . import qobjects as qo
from . import structure as st
from .config import SolverConfig
from .errors import QBroadcastError

SCHEMA_VERSION = "1"
CONFIG_ENV = "QBROADCAST_CONFIG"
TOP_KEYS = {"schema_version", "dim", "label", "states", "measurements_a", "measurements_b",
            "channels", "solver"}
CHANNEL_KEYS = {"dim_in", "dim_out", "out_dims", "choi"}

EXIT_OK, EXIT_INVALID, EXIT_PARSE, EXIT_INFEASIBLE, EXIT_INCONCLUSIVE = 0, 1, 2, 3, 4
STATUS_EXIT = {fe.Status.FEASIBLE: EXIT_OK, fe.Status.INFEASIBLE: EXIT_INFEASIBLE,
               fe.Status.INCONCLUSIVE: EXIT_INCONCLUSIVE}


class ParseError(QBroadcastError):
    """Malformed scenario file; ``offset`` is a byte offset into the file."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"byte {offset}: {message}")
        self.offset = offset


# --- located JSON ----------------------------------------------------------


@dataclass
class Node:
    value: object
    offset: int

    def plain(self):
        if isinstance(self.value, list):
            return [n.plain() for n in self.value]
        if isinstance(self.value, dict):
            return {k: n.plain() for k, n in self.value.items()}
        return self.value


_NUMBER = re.compile(r"-?(?:0|[1-9]\d*)(?:\.\d+)?(?:[eE][+-]?\d+)?")
_WS = re.compile(r"[ \t\n\r]*")


class _Parser:
    """Strict JSON reader that remembers where every value starts."""

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def byte_offset(self, pos: int) -> int:
        return len(self.text[:pos].encode("utf-8"))

    def fail(self, msg: str, pos: int | None = None):
        raise ParseError(msg, self.byte_offset(self.pos if pos is None else pos))

    def ws(self):
        self.pos = _WS.match(self.text, self.pos).end()

    def parse(self) -> Node:
        self.ws()
        node = self.value()
        self.ws()
        if self.pos != len(self.text):
            self.fail("trailing data after document")
        return node

    def value(self) -> Node:
        start = self.pos
        if start >= len(self.text):
            self.fail("unexpected end of input")
        ch = self.text[start]
        if ch == "{":
            return self.obj()
        if ch == "[":
            return self.arr()
        if ch == '"':
            return Node(self.string(), start)
        for lit, val in (("true", True), ("false", False), ("null", None)):
            if self.text.startswith(lit, start):
                self.pos += len(lit)
                return Node(val, start)
        m = _NUMBER.match(self.text, start)
        if not m or m.end() == start:
            self.fail(f"unexpected character {ch!r} (NaN and Infinity are not allowed)")
        self.pos = m.end()
        tok = m.group()
        num = float(tok) if any(c in tok for c in ".eE") else int(tok)
        if isinstance(num, float) and not np.isfinite(num):
            self.fail("number out of range", start)
        return Node(num, start)

    def string(self) -> str:
        try:
            s, end = json.decoder.scanstring(self.text, self.pos + 1)
        except json.JSONDecodeError as exc:
            self.fail(exc.msg, exc.pos)
        self.pos = end
        return s

    def obj(self) -> Node:
        start = self.pos
        self.pos += 1
        out: dict = {}
        self.ws()
        if self.text.startswith("}", self.pos):
            self.pos += 1
            return Node(out, start)
        while True:
            self.ws()
            if not self.text.startswith('"', self.pos):
                self.fail("expected a string key")
            kpos = self.pos
            key = self.string()
            if key in out:
                self.fail(f"duplicate key {key!r}", kpos)
            self.ws()
            if not self.text.startswith(":", self.pos):
                self.fail("expected ':'")
            self.pos += 1
            self.ws()
            out[key] = self.value()
            self.ws()
            if self.text.startswith(",", self.pos):
                self.pos += 1
                continue
            if self.text.startswith("}", self.pos):
                self.pos += 1
                return Node(out, start)
            self.fail("expected ',' or '}'")

    def arr(self) -> Node:
        start = self.pos
        self.pos += 1
        out = []
        self.ws()
        if self.text.startswith("]", self.pos):
            self.pos += 1
            return Node(out, start)
        while True:
            self.ws()
            out.append(self.value())
            self.ws()
            if self.text.startswith(",", self.pos):
                self.pos += 1
                continue
            if self.text.startswith("]", self.pos):
                self.pos += 1
                return Node(out, start)
            self.fail("expected ',' or ']'")


def parse_located(text: str) -> Node:
    return _Parser(text).parse()


# --- scenario documents ----------------------------------------------------


@dataclass
class ScenarioFile:
    dim: int
    states: list
    measurements_a: list
    measurements_b: list
    channels: dict
    solver: dict
    label: str = ""

    def scenario(self) -> qo.Scenario:
        return qo.Scenario(self.dim, self.states, self.measurements_a, self.measurements_b, self.label)


def _need(node: Node, kind, what: str, p: _Parser):
    if not isinstance(node.value, kind) or isinstance(node.value, bool) and kind is not bool:
        raise ParseError(f"{what} must be {kind.__name__ if kind is not list else 'a list'}",
                         p.byte_offset(node.offset))
    return node.value


def _matrix(node: Node, n: int | None, what: str, p: _Parser) -> np.ndarray:
    rows = _need(node, list, what, p)
    size = len(rows)
    if n is not None and size != n:
        raise ParseError(f"{what} has {size} rows, expected {n}", p.byte_offset(node.offset))
    out = np.zeros((size, size), dtype=np.complex128)
    for i, row in enumerate(rows):
        entries = _need(row, list, f"{what} row {i}", p)
        if len(entries) != size:
            raise ParseError(f"{what} row {i} has {len(entries)} entries, expected {size}",
                             p.byte_offset(row.offset))
        for j, z in enumerate(entries):
            pair = z.value
            if (not isinstance(pair, list) or len(pair) != 2
                    or not all(isinstance(c.value, (int, float)) and not isinstance(c.value, bool) for c in pair)):
                raise ParseError(f"{what}[{i}][{j}] must be a [re, im] pair of numbers",
                                 p.byte_offset(z.offset))
            out[i, j] = complex(pair[0].value, pair[1].value)
    return out


def _mat_doc(m) -> list:
    m = np.asarray(m)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def load_document(text: str) -> ScenarioFile:
    p = _Parser(text)
    root = p.parse()
    top = _need(root, dict, "document", p)
    for key, node in top.items():
        if key not in TOP_KEYS:
            raise ParseError(f"unknown field {key!r}", p.byte_offset(node.offset))
    if "schema_version" not in top:
        raise ParseError("missing schema_version", 0)
    ver = top["schema_version"]
    if ver.value != SCHEMA_VERSION:
        raise ParseError(f"unsupported schema_version {ver.value!r}", p.byte_offset(ver.offset))
    if "dim" not in top:
        raise ParseError("missing dim", 0)
    dim = _need(top["dim"], int, "dim", p)
    if dim < 1:
        raise ParseError("dim must be positive", p.byte_offset(top["dim"].offset))
    label = _need(top["label"], str, "label", p) if "label" in top else ""

    def mats(key):
        if key not in top:
            return []
        return [_matrix(n, dim, f"{key}[{k}]", p) for k, n in enumerate(_need(top[key], list, key, p))]

    def povms(key):
        if key not in top:
            return []
        out = []
        for k, n in enumerate(_need(top[key], list, key, p)):
            effs = [_matrix(e, dim, f"{key}[{k}][{i}]", p) for i, e in enumerate(_need(n, list, f"{key}[{k}]", p))]
            if not effs:
                raise ParseError(f"{key}[{k}] has no effects", p.byte_offset(n.offset))
            out.append(qo.Povm(effs))
        return out

    channels = {}
    if "channels" in top:
        for name, node in _need(top["channels"], dict, "channels", p).items():
            fields_ = _need(node, dict, f"channel {name}", p)
            for key, sub in fields_.items():
                if key not in CHANNEL_KEYS:
                    raise ParseError(f"unknown field {key!r} in channel {name}", p.byte_offset(sub.offset))
            for key in ("dim_in", "dim_out", "choi"):
                if key not in fields_:
                    raise ParseError(f"channel {name} lacks {key}", p.byte_offset(node.offset))
            din = _need(fields_["dim_in"], int, "dim_in", p)
            dout = _need(fields_["dim_out"], int, "dim_out", p)
            choi = _matrix(fields_["choi"], din * dout, f"channel {name} choi", p)
            out_dims = None
            if "out_dims" in fields_:
                out_dims = tuple(_need(x, int, "out_dims entry", p) for x in _need(fields_["out_dims"], list, "out_dims", p))
            try:
                channels[name] = qo.ChoiChannel(choi, din, dout, out_dims)
            except QBroadcastError as exc:
                raise ParseError(str(exc), p.byte_offset(node.offset)) from exc
    solver = {}
    if "solver" in top:
        solver = top["solver"].plain()
        if not isinstance(solver, dict):
            raise ParseError("solver must be an object", p.byte_offset(top["solver"].offset))
        try:
            SolverConfig().updated(**solver)
        except (QBroadcastError, TypeError) as exc:
            raise ParseError(str(exc), p.byte_offset(top["solver"].offset)) from exc
    return ScenarioFile(dim, mats("states"), povms("measurements_a"), povms("measurements_b"),
                        channels, solver, label)


def dump_document(dim: int, states=(), meas_a=(), meas_b=(), channels=None, solver=None,
                  label: str = "") -> dict:
    doc = {"schema_version": SCHEMA_VERSION, "dim": int(dim)}
    if label:
        doc["label"] = label
    if len(states):
        doc["states"] = [_mat_doc(s) for s in states]
    if len(meas_a):
        doc["measurements_a"] = [[_mat_doc(e) for e in m.effects] for m in meas_a]
    if len(meas_b):
        doc["measurements_b"] = [[_mat_doc(e) for e in m.effects] for m in meas_b]
    if channels:
        doc["channels"] = {
            name: {"dim_in": c.dim_in, "dim_out": c.dim_out, "choi": _mat_doc(c.choi),
                   **({"out_dims": list(c.out_dims)} if c.out_dims else {})}
            for name, c in channels.items()
        }
    if solver:
        doc["solver"] = dict(solver)
    return doc


def scenario_document(s: qo.Scenario, channels=None) -> dict:
    return dump_document(s.dim, s.states, s.meas_a, s.meas_b, channels, label=s.label)


def entry_document(entry: cp.CorpusEntry) -> dict | None:
    """Scenario-file form of a corpus entry, when it has one."""
    pl = entry.payload
    if "scenario" in pl:
        return scenario_document(pl["scenario"])
    if "channels" in pl:
        phi1, phi2 = pl["channels"]
        return dump_document(phi1.dim_in, pl.get("states", ()), channels={"phi1": phi1, "phi2": phi2},
                             label=entry.name)
    if "povm" in pl:
        return dump_document(pl["povm"].dim, pl["states"], [pl["povm"]], label=entry.name)
    return None


# --- reports ---------------------------------------------------------------


def _num(x: float) -> float:
    return float(f"{float(x):.6e}")


def witness_digest(blocks) -> dict:
    j = blocks[0]
    return {"frobenius_norm": _num(mc.frob(j)), "min_eigenvalue": _num(mc.min_eig(j))}


def verdict_report(mode: str, verdict: fe.FeasibilityVerdict, system: fe.AffineConstraintSystem | None,
                   annotations: dict) -> dict:
    rep = {"mode": mode, "status": str(verdict.status), "residual": _num(verdict.residual),
           "iterations": int(verdict.iterations)}
    if verdict.note:
        rep["note"] = verdict.note
    if verdict.feasible and verdict.blocks:
        dig = witness_digest(verdict.blocks)
        if verdict.channel is not None:
            dig["tp_margin"] = _num(qo.tp_margin(verdict.channel))
        rep["witness"] = dig
    if verdict.feasible and system is not None and verdict.witness is not None and len(system):
        res = np.abs(system.residuals(verdict.witness))
        k = int(np.argmax(res))
        rep["max_constraint_deviation"] = {"value": _num(res[k]), "constraint": system.descriptions[k]}
    rep["annotations"] = annotations
    return rep


def _annotations(doc: ScenarioFile) -> dict:
    out = {}
    if doc.measurements_a:
        fa = fz.factorization_of_povms(doc.measurements_a)
        out["rank_A"] = fa.rank
        out["info_complete_A"] = fa.rank == doc.dim ** 2
        out["commuting_A"] = st.mutually_commuting(st.effects(doc.measurements_a), st.effects(doc.measurements_a))[0]
    if doc.measurements_b:
        fb = fz.factorization_of_povms(doc.measurements_b)
        out["rank_B"] = fb.rank
        out["info_complete_B"] = fb.rank == doc.dim ** 2
        out["commuting_B"] = st.mutually_commuting(st.effects(doc.measurements_b), st.effects(doc.measurements_b))[0]
    if doc.measurements_a and doc.measurements_b:
        out["commuting_AB"] = st.mutually_commuting(st.effects(doc.measurements_a), st.effects(doc.measurements_b))[0]
    if doc.states:
        out["states_classical"] = st.states_classical(doc.states)
        if doc.measurements_a:
            out["commuting_AT"] = st.mutually_commuting(st.effects(doc.measurements_a), doc.states)[0]
    return out


def analysis_report(doc: ScenarioFile) -> dict:
    rep = _annotations(doc)
    if doc.measurements_a and doc.measurements_b:
        rep["commutator_AB"] = [[_num(st.mutually_commuting(a.effects, b.effects)[1]) for b in doc.measurements_b]
                                for a in doc.measurements_a]
    if doc.channels:
        rep["channels"] = {name: {"factorization_rank": fz.channel_factorization(c).rank}
                           for name, c in sorted(doc.channels.items())}
    return rep


# --- commands --------------------------------------------------------------


def _read(path: str) -> ScenarioFile:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}", 0) from exc
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError("file is not UTF-8", exc.start) from exc
    return load_document(text)


def _solver_config(args, doc: ScenarioFile | None = None) -> SolverConfig:
    cfg = SolverConfig()
    path = getattr(args, "config", None) or os.environ.get(CONFIG_ENV)
    if path:
        try:
            overrides = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"cannot load solver config {path}: {exc}", 0) from exc
        cfg = cfg.updated(**overrides)
    if doc is not None and doc.solver:
        cfg = cfg.updated(**doc.solver)
    return cfg.updated(tol_feasible=args.tol_feasible, tol_infeasible_floor=args.tol_infeasible,
                       max_iterations=args.max_iter, rng_seed=args.seed)


def _emit(obj, as_json: bool, out):
    if as_json:
        out.write(json.dumps(obj, sort_keys=True) + "\n")
    else:
        for k, v in obj.items():
            out.write(f"{k}: {json.dumps(v, sort_keys=True) if isinstance(v, (dict, list)) else v}\n")


def cmd_validate(args, out) -> int:
    doc = _read(args.file)
    rep = qo.ValidationReport()
    if True:
        for k, s in enumerate(doc.states):
            rep.extend(qo.validate(s, f"states[{k}]"))
        for key, ms in (("measurements_a", doc.measurements_a), ("measurements_b", doc.measurements_b)):
            for k, m in enumerate(ms):
                rep.extend(qo.validate(m, f"{key}[{k}]"))
    for name, c in sorted(doc.channels.items()):
        rep.extend(qo.validate(c, f"channels.{name}"))
    body = {"valid": rep.ok, "violations": [v.to_dict() for v in rep.violations]}
    _emit(body, args.json, out)
    return EXIT_OK if rep.ok else EXIT_INVALID


def _mode_error(msg):
    raise ParseError(f"file does not fit the mode: {msg}", 0)


def _same_collections(ma, mb) -> bool:
    return len(ma) == len(mb) and all(
        len(a) == len(b) and all(np.allclose(x, y, atol=1e-12) for x, y in zip(a.effects, b.effects))
        for a, b in zip(ma, mb))


def cmd_decide(args, out) -> int:
    doc = _read(args.file)
    cfg = _solver_config(args, doc)
    mode = args.mode
    system = None
    if mode == "broadcast":
        if not (doc.states and doc.measurements_a and doc.measurements_b):
            _mode_error("broadcast needs states, measurements_a and measurements_b")
        system = fe.build_broadcast_constraints(doc.scenario())
        verdict = fe.dykstra_solve(system, cfg=cfg)
    elif mode in ("compat", "channel-broadcast"):
        if not {"phi1", "phi2"} <= set(doc.channels):
            _mode_error(f"{mode} needs channels phi1 and phi2")
        phi1, phi2 = doc.channels["phi1"], doc.channels["phi2"]
        if mode == "compat":
            system = fe.build_compatibility_constraints(phi1, phi2, doc.states or None)
        else:
            if not doc.states:
                _mode_error("channel-broadcast needs states")
            system = fe.build_channel_broadcast_constraints(doc.states, phi1, phi2)
        verdict = fe.dykstra_solve(system, cfg=cfg)
    elif mode == "surrogate":
        if not (doc.states and doc.measurements_a):
            _mode_error("surrogate needs states and measurements_a")
        verdicts = []
        for m in doc.measurements_a:
            system = fe.build_commuting_surrogate_constraints(doc.states, m)
            verdicts.append(fe.dykstra_solve(system, cfg=cfg))
        order = {fe.Status.INFEASIBLE: 0, fe.Status.INCONCLUSIVE: 1, fe.Status.FEASIBLE: 2}
        verdict = min(verdicts, key=lambda v: order[v.status])
        if len(verdicts) > 1:
            system = None
    else:  # argparse restricts choices
        _mode_error(mode)
    notes = _annotations(doc)
    if mode == "broadcast" and verdict.feasible and verdict.channel is not None \
            and _same_collections(doc.measurements_a, doc.measurements_b):
        ext = st.extract_saa_frame(verdict.channel, doc.measurements_a, seed=cfg.rng_seed, cfg=cfg)
        notes["saa_certificate"] = bool(ext) and st.verify_saa_certificate(doc.measurements_a, ext.certificate)[0]
    body = verdict_report(mode, verdict, system, notes)
    _emit(body, args.json, out)
    return STATUS_EXIT[verdict.status]


def cmd_analyze(args, out) -> int:
    doc = _read(args.file)
    _emit(analysis_report(doc), args.json, out)
    return EXIT_OK


def cmd_corpus(args, out) -> int:
    cfg = _solver_config(args)
    entries = cp.select(args.filter)
    if args.export:
        dest = Path(args.export)
        dest.mkdir(parents=True, exist_ok=True)
        for e in entries:
            doc = entry_document(e)
            if doc is not None:
                name = e.name.replace("/", "_")
                (dest / f"{name}.json").write_text(json.dumps(doc) + "\n")
    if args.parallel > 1:
        import time

        t0 = time.perf_counter()
        results = cp.run_corpus(entries, cfg, parallel=args.parallel)
        times = {r.name: None for r in results}
        total = time.perf_counter() - t0
    else:
        import time

        results, times = [], {}
        t0 = time.perf_counter()
        for e in entries:
            t = time.perf_counter()
            results.append(e.run(cfg))
            times[e.name] = time.perf_counter() - t
        results.sort(key=lambda r: r.name)
        total = time.perf_counter() - t0
    failures = [r for r in results if not r.ok]
    if args.json:
        for r in results:
            out.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")
    else:
        out.write(f"{'entry':42s} {'expected':22s} {'got':22s} {'residual':>10s} {'wall [s]':>9s}\n")
        for r in results:
            wall = f"{times[r.name]:.3f}" if times.get(r.name) is not None else "-"
            mark = "" if r.ok else "  MISMATCH"
            out.write(f"{r.name:42s} {r.expected:22s} {r.got:22s} {r.residual:10.2e} {wall:>9s}{mark}\n")
        out.write(f"{len(results) - len(failures)}/{len(results)} entries reproduced in {total:.2f} s\n")
    if failures:
        sys.stderr.write("mismatches: " + ", ".join(r.name for r in failures) + "\n")
        return EXIT_INVALID
    return EXIT_OK


# --- entry point -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qbroadcast", description=__doc__.split("\n")[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="emit machine-readable JSON")
    common.add_argument("--config", help=f"solver settings file (default ${CONFIG_ENV})")
    common.add_argument("--tol-feasible", type=float, default=None)
    common.add_argument("--tol-infeasible", type=float, default=None)
    common.add_argument("--max-iter", type=int, default=None)
    common.add_argument("--seed", type=int, default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="check every object in a scenario file")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("decide", parents=[common], help="run a feasibility decision")
    p.add_argument("file")
    p.add_argument("--mode", choices=["broadcast", "compat", "channel-broadcast", "surrogate"],
                   default="broadcast")
    p.set_defaults(func=cmd_decide)

    p = sub.add_parser("analyze", parents=[common], help="structural facts without solving")
    p.add_argument("file")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("corpus", parents=[common], help="run the regression corpus")
    p.add_argument("--filter", default=None, help="substring of entry names")
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--export", default=None, help="write scenario files for the selected entries")
    p.set_defaults(func=cmd_corpus)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    try:
        return args.func(args, out)
    except ParseError as exc:
        sys.stderr.write(f"parse error: {exc}\n")
        return EXIT_PARSE
    except QBroadcastError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_PARSE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
