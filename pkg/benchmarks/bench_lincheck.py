"""Compiled vs pure-Python linearizability kernel on fuzzed histories.

    python3 benchmarks/bench_lincheck.py [--runs 200] [--ops 6] [--n 4]
"""

from __future__ import annotations

import argparse
import random
import time

from blunt.core import Engine, SeededTape, System, project_history
from blunt.adversary.policies import RandomPolicy
from blunt.lincheck import KERNEL, check_linearizable, random_program
from blunt.objects import make_impl, spec_for


def histories(kind: str, runs: int, ops: int, n: int, seed: int):
    impl = make_impl(kind)
    spec = spec_for(impl.bind("X", 0, n, 0))
    out = []
    for i in range(runs):
        rng = random.Random(f"bench:{seed}:{kind}:{i}")
        program = random_program(rng, kind, n, ops)
        eng = Engine(System(program, impl, n=n), SeededTape(i), budget=100_000)
        e = eng.run(RandomPolicy(i, deliver_weight=3.0))
        out.append(project_history(e))
    return spec, out


def timed(spec, hs, kernel: str):
    t = time.perf_counter()
    verdicts = [check_linearizable(h, spec, kernel)[0] for h in hs]
    return time.perf_counter() - t, verdicts


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--runs", type=int, default=200)
    ap.add_argument("--ops", type=int, default=6)
    ap.add_argument("--n", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if KERNEL != "compiled":
        print("compiled kernel not built; run `pip install -e . --no-build-isolation` first")
    print(f"{'object':10} {'histories':>9} {'ops/hist':>8} {'python s':>9} {'compiled s':>10} {'speedup':>7}")
    for kind in ("abd", "va", "snapshot", "il"):
        spec, hs = histories(kind, args.runs, args.ops, args.n, args.seed)
        tp, vp = timed(spec, hs, "python")
        tc, vc = timed(spec, hs, "compiled")
        assert vp == vc, "kernels disagree"
        mean_ops = sum(len(h) for h in hs) / (2 * len(hs))
        print(f"{kind:10} {len(hs):9d} {mean_ops:8.1f} {tp:9.3f} {tc:10.3f} {tp / tc:7.2f}")


if __name__ == "__main__":
    main()
