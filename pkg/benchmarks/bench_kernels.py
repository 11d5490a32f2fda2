"""Compare the compiled kernels with their pure-Python twins.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat N] [--json]

Reports the best-of-N wall time of the Jacobi eigensolver at several sizes
and of complete Dykstra solves on corpus problems, for each backend.
"""
from __future__ import annotations

import argparse
import json
import sys
import timeit

import numpy as np

from qbroadcast import corpus as cp
from qbroadcast import feasengine as fe
from qbroadcast import matcore as mc
from qbroadcast import qobjects as qo


def available_backends() -> list[str]:
    out = ["python"]
    try:
        from qbroadcast import _kernels  # noqa: F401

        out.insert(0, "compiled")
    except ImportError:
        pass
    return out


def cases():
    rng = np.random.default_rng(0)
    for n in (4, 8, 16, 24):
        h = mc.random_hermitian(n, rng)
        yield f"jacobi n={n}", lambda b, h=h: mc.herm_eig(h, method="jacobi", backend=b)
    n3 = cp.antidiscrimination_scenario(3).scenario
    yield "dykstra antidiscrimination n=3", lambda b: fe.decide_broadcast(n3, backend=b)
    d13 = qo.dephasing_channel(1 / 3)
    yield "dykstra self-compatibility 1/3", lambda b: fe.decide_compatibility(d13, d13, backend=b)
    q = cp.commuting_entries()[0].scenario
    yield "dykstra commuting qutrit", lambda b: fe.decide_broadcast(q, backend=b)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args(argv)
    backends = available_backends()
    rows = []
    for name, fn in cases():
        times = {b: min(timeit.repeat(lambda: fn(b), number=1, repeat=args.repeat)) for b in backends}
        rows.append({"case": name, **{f"{b}_s": t for b, t in times.items()}})
    if args.json:
        json.dump(rows, sys.stdout, indent=1)
        sys.stdout.write("\n")
        return 0
    head = f"{'case':34s}" + "".join(f"{b + ' [s]':>14s}" for b in backends)
    if len(backends) == 2:
        head += f"{'speedup':>10s}"
    print(head)
    for r in rows:
        line = f"{r['case']:34s}" + "".join(f"{r[b + '_s']:14.4f}" for b in backends)
        if len(backends) == 2:
            line += f"{r['python_s'] / r['compiled_s']:10.1f}"
        print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
