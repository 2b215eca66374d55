"""Command-line front end: ``blunt run|search|check|report``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import subprocess
import sys
import time
from collections import Counter
from dataclasses import asdict, dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional

from . import __version__
from .adversary import (
    POLICIES,
    DomainError,
    RandomPolicy,
    Replay,
    WrongConfiguration,
    expectimax,
    monte_carlo,
    theorem_bound,
)
from .adversary.exact import exact_policy_value
from .core import Directive, Execution, dump_line, project_history
from .lincheck import (
    ExecutionTree,
    MalformedHistory,
    TreeTooLarge,
    check_linearizable,
    check_strong_linearizable,
    check_tail_strong,
    enumerate_tree,
    writers_reader_program,
)
from .objects import KINDS, NonPositiveK, RegisterSpec, SnapshotSpec, make_impl
from .progdsl import Program, ProgramSyntaxError, describe_outcome, max_random_steps, parse_program, weakener, weakener_bad
from .values import BOT, from_json

ADVERSARIES = ("crafted", "search", "random", "sequential", "round-robin", "operation-order", "file")
REPORT_KEYS = ("config", "result", "bound", "atomic_baseline", "version")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    program: str = "weakener"
    object: str = "atomic"
    k: int = 1
    n: Optional[int] = None
    adversary: str = "random"
    trials: int = 1000
    seed: int = 0
    step_budget: int = 100_000
    search_budget: int = 10**7
    policy_file: Optional[str] = None
    p_lin: str = "1"
    output: Optional[str] = None
    csv: Optional[str] = None
    trace_dir: Optional[str] = None

    def validate(self) -> None:
        if self.object not in KINDS:
            raise ConfigError(f"unknown object kind {self.object!r}; expected one of {', '.join(KINDS)}")
        if self.adversary not in ADVERSARIES:
            raise ConfigError(f"unknown adversary {self.adversary!r}; expected one of {', '.join(ADVERSARIES)}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.object == "atomic" and self.k != 1:
            raise ConfigError("atomic registers have no preamble to iterate; use k = 1")
        if self.adversary != "search" and self.trials < 1:
            raise ConfigError("Monte Carlo runs need --trials >= 1")
        if self.trials < 0:
            raise ConfigError("--trials must be >= 0")
        if self.adversary == "file" and not self.policy_file:
            raise ConfigError("--adversary file needs --policy-file")
        if self.n is not None and self.n < 1:
            raise ConfigError("--n must be >= 1")


def load_program(name: str) -> Program:
    if name == "weakener":
        return weakener()
    path = Path(name)
    if not path.exists():
        raise ConfigError(f"no built-in program or file named {name!r}")
    try:
        return parse_program(path.read_text(encoding="utf-8"))
    except ProgramSyntaxError as exc:
        raise ConfigError(f"{name}: {exc}") from None


def bindings_for(cfg: ExperimentConfig):
    if cfg.object == "abd-k":
        return make_impl("abd-k", k=cfg.k)
    return make_impl(cfg.object, k=cfg.k, iterate=cfg.k > 1)


def iterations(cfg: ExperimentConfig) -> int:
    return cfg.k if (cfg.object == "abd-k" or cfg.k > 1) else 1


def _frac(x: Fraction) -> dict:
    return {"fraction": f"{x.numerator}/{x.denominator}", "float": float(x)}


def _commit() -> str:
    try:
        out = subprocess.run(["git", "rev-parse", "--short", "HEAD"], capture_output=True, text=True,
                             cwd=Path(__file__).resolve().parent, timeout=5)
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def load_policy_file(path: str) -> Replay:
    try:
        items = json.loads(Path(path).read_text(encoding="utf-8"))
        return Replay([Directive(int(d[0]), None if d[1] is None else int(d[1])) for d in items])
    except (OSError, ValueError, TypeError, IndexError) as exc:
        raise ConfigError(f"{path}: cannot read directives ({exc})") from None


def make_policy(cfg: ExperimentConfig):
    if cfg.adversary == "file":
        return load_policy_file(cfg.policy_file)
    if cfg.adversary == "random":
        return RandomPolicy(cfg.seed)
    return POLICIES[cfg.adversary]()


def shipped_policies(include_crafted: bool = True) -> dict:
    out = {name: factory() for name, factory in POLICIES.items()}
    if not include_crafted:
        out.pop("crafted", None)
    return out


def _mc_section(res, tallies: bool = True) -> dict:
    d = res.decomposition()
    out = {
        "trials": res.trials,
        "bad": res.bad_count,
        "estimate": res.estimate,
        "ci_half_width": res.half_width,
        "ci": [res.ci_low, res.ci_high],
        "confidence": 0.99,
        "event_x": {"frequency": _frac(d.x), "bad_given_x": _frac(d.bad_given_x),
                    "bad_given_not_x": _frac(d.bad_given_not_x), "identity_holds": d.holds},
    }
    if tallies:
        c = Counter(describe_outcome(t.outcome) + " | " + ",".join(t.terminal) for t in res.records)
        out["branches"] = dict(sorted(c.items()))
    return out


def cmd_run(cfg: ExperimentConfig) -> dict:
    cfg.validate()
    t0 = time.time()
    program = load_program(cfg.program)
    bad = weakener_bad() if program.name == "weakener" else None
    binds = bindings_for(cfg)
    k = iterations(cfg)
    n = cfg.n or program.n
    result: dict = {"mode": "search" if cfg.adversary == "search" else "monte-carlo"}
    records = []

    if cfg.adversary == "search":
        if bad is None:
            raise ConfigError("search needs a program with a bad-outcome predicate (the weakener)")
        sr = expectimax(program, binds, bad, budget=cfg.search_budget, n=cfg.n)
        result.update({"value": _frac(sr.value), "exhausted": sr.exhausted, "nodes": sr.stats.nodes,
                       "memo_hits": sr.stats.memo_hits})
        if not sr.exhausted:
            # certified lower bound: best exactly evaluated policy or the partial search
            lower, best = sr.value, "search (partial)"
            for name, pol in shipped_policies().items():
                try:
                    pv = exact_policy_value(program, binds, pol, bad, n=cfg.n, budget=cfg.step_budget)
                except WrongConfiguration:
                    continue
                if pv.value > lower:
                    lower, best = pv.value, name
            result["certified_lower_bound"] = {**_frac(lower), "policy": best}
            result["value"] = _frac(lower)
        if cfg.trials > 0:
            mc = monte_carlo(program, binds, sr.policy, cfg.trials, cfg.seed, bad, n=cfg.n, budget=cfg.step_budget)
            result["monte_carlo"] = _mc_section(mc)
            records = mc.records
            if not sr.exhausted:
                envelope = {}
                for name, pol in shipped_policies().items():
                    try:
                        m = monte_carlo(program, binds, pol, cfg.trials, cfg.seed, bad, n=cfg.n, budget=cfg.step_budget)
                    except WrongConfiguration:
                        continue
                    envelope[name] = {"estimate": m.estimate, "ci_high": m.ci_high}
                envelope["search (partial)"] = {"estimate": mc.estimate, "ci_high": mc.ci_high}
                result["sampled_envelope"] = envelope
    else:
        policy = make_policy(cfg)
        try:
            mc = monte_carlo(program, binds, policy, cfg.trials, cfg.seed, bad, n=cfg.n, budget=cfg.step_budget)
        except WrongConfiguration as exc:
            raise ConfigError(str(exc)) from None
        result.update(_mc_section(mc))
        records = mc.records

    atomic = None
    if bad is not None:
        atomic = expectimax(program, make_impl("atomic"), bad, n=cfg.n).value
    try:
        p_lin = Fraction(cfg.p_lin)
        bound = theorem_bound(atomic, p_lin, n, max(1, max_random_steps(program)), k) if atomic is not None else None
    except (DomainError, ValueError) as exc:
        raise ConfigError(f"bound: {exc}") from None

    report = {
        "config": asdict(cfg),
        "result": result,
        "bound": None if bound is None else {**_frac(bound), "p_atomic": str(atomic), "p_lin": str(p_lin),
                                             "n": n, "r": max_random_steps(program), "k": k},
        "atomic_baseline": None if atomic is None else _frac(atomic),
        "wall_time_s": round(time.time() - t0, 3),
        "version": __version__,
        "commit": _commit(),
    }
    if cfg.csv and records:
        write_trials_csv(cfg.csv, records)
    if cfg.trace_dir and cfg.adversary != "search":
        write_traces(cfg, program, binds, policy_factory=lambda: make_policy(cfg))
    return report


def write_trials_csv(path: str, records) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["trial", "seed", "bad", "event_x", "randoms", "outcome", "terminal"])
        for t in records:
            w.writerow([t.index, t.seed, int(t.bad), int(t.x), " ".join(map(str, t.randoms)),
                        describe_outcome(t.outcome), ",".join(t.terminal)])


def write_traces(cfg: ExperimentConfig, program, binds, policy_factory) -> None:
    """One JSON-lines execution per trial, replayed from the trial seeds."""
    from .adversary.montecarlo import trial_seed
    from .core import Engine, SeededTape, System

    out = Path(cfg.trace_dir)
    out.mkdir(parents=True, exist_ok=True)
    system = System(program, binds, n=cfg.n)
    base = policy_factory()
    for i in range(cfg.trials):
        eng = Engine(system, SeededTape(trial_seed(cfg.seed, i)), cfg.step_budget)
        e = eng.run(base.fresh(trial_seed(cfg.seed, i, "policy")))
        (out / f"trial-{i:06d}.jsonl").write_text(e.to_jsonl(), encoding="utf-8")


# -- check -----------------------------------------------------------------------


def parse_pm(text: Optional[str], impl=None) -> Optional[dict]:
    if text is None:
        return None if impl is None else impl.preamble_mapping()
    methods = ("read", "write", "scan", "update")
    if text == "pi0":
        return {m: "call" for m in methods}
    if text == "full":
        return {m: "return" for m in methods}
    out = {}
    for part in text.split(","):
        if "=" not in part:
            raise ConfigError(f"bad preamble mapping entry {part!r}; expected method=control-point")
        m, label = part.split("=", 1)
        out[m.strip()] = label.strip()
    return out


def make_spec(name: str, initial, n: int):
    if name == "register":
        return RegisterSpec(initial)
    if name == "snapshot":
        return SnapshotSpec(n, initial)
    raise ConfigError(f"unknown spec {name!r}; expected register or snapshot")


def read_execution(path: str) -> Execution:
    try:
        return Execution.from_jsonl(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def parse_initial(text: str) -> dict:
    """``--initial``: one JSON value for every object, or a JSON object
    mapping object names to initial values (null is bottom)."""
    try:
        raw = json.loads(text)
    except ValueError as exc:
        raise ConfigError(f"--initial is not JSON: {exc}") from None
    if isinstance(raw, dict):
        return {name: from_json(v) for name, v in raw.items()}
    return {None: from_json(raw)}


def initial_for(initials: dict, obj: str):
    if obj in initials:
        return initials[obj]
    if None in initials:
        return initials[None]
    raise ConfigError(f"no initial value given for object {obj!r}")


def cmd_check(args) -> list[dict]:
    initials = parse_initial(args.initial)
    verdicts = []
    if args.mode == "lin":
        if not args.input:
            raise ConfigError("lin mode needs --input files")
        for path in args.input:
            e = read_execution(path)
            h = project_history(e)
            for obj in h.objects():
                spec = make_spec(args.spec, initial_for(initials, obj), args.n)
                try:
                    ok, lin = check_linearizable(h.for_object(obj), spec)
                except MalformedHistory as exc:
                    verdicts.append({"input-id": f"{path}#{obj}", "mode": "lin", "verdict": "malformed",
                                     "witness": str(exc)})
                    continue
                verdicts.append({"input-id": f"{path}#{obj}", "mode": "lin", "verdict": "pass" if ok else "fail",
                                 "witness": lin.to_json() if ok else None})
        return verdicts
    if args.enumerate:
        impl = make_impl(args.enumerate, k=args.k) if args.enumerate == "abd-k" else make_impl(args.enumerate)
        tree = enumerate_tree(writers_reader_program(args.reads), impl, args.depth, n=args.n,
                              max_nodes=args.max_nodes)
        tid = f"enumerated:{impl.label}:n={args.n}:depth={args.depth}"
        trees = [(tid, tree, make_spec(args.spec, initial_for(initials, "R"), args.n), parse_pm(args.pm, impl))]
    elif args.input:
        runs = [read_execution(p).steps for p in args.input]
        names = sorted({s.payload["obj"] for steps in runs for s in steps if s.kind == "call"})
        pm = parse_pm(args.pm)
        trees = [(f"tree:{','.join(args.input)}#{name}", ExecutionTree.from_executions(runs, name),
                  make_spec(args.spec, initial_for(initials, name), args.n), pm) for name in names]
    else:
        raise ConfigError(f"{args.mode} mode needs --input files or --enumerate KIND")
    for tid, tree, spec, pm in trees:
        if args.mode == "strong":
            v = check_strong_linearizable(tree, spec)
        else:
            if pm is None:
                raise ConfigError("tail mode needs --pm when checking recorded executions")
            v = check_tail_strong(tree, spec, pm)
        verdicts.append({"input-id": tid, "mode": args.mode, "verdict": "pass" if v.ok else "fail",
                         "nodes": len(tree), "truncated": tree.truncated, "witness": v.witness})
    return verdicts


# -- report ------------------------------------------------------------------------


def load_report(path: str) -> dict:
    try:
        rep = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    missing = [key for key in REPORT_KEYS if key not in rep] if isinstance(rep, dict) else list(REPORT_KEYS)
    if missing:
        raise ConfigError(f"{path}: not a run report (missing {', '.join(missing)})")
    return rep


def report_rows(reports: list[dict]) -> list[dict]:
    rows = []
    for rep in reports:
        cfg, res = rep["config"], rep["result"]
        if res.get("mode") == "search":
            value, half = res["value"]["float"], 0.0
        else:
            value, half = res["estimate"], res["ci_half_width"]
        bound = rep["bound"]["float"] if rep["bound"] else None
        atomic = rep["atomic_baseline"]["float"] if rep["atomic_baseline"] else None
        rows.append({"object": cfg["object"], "k": cfg["k"], "n": cfg["n"], "adversary": cfg["adversary"],
                     "value": value, "ci_half_width": half, "bound": bound, "atomic_baseline": atomic})
    rows.sort(key=lambda r: (r["object"], r["k"], r["adversary"]))
    return rows


def format_table(rows: list[dict]) -> str:
    cols = ["object", "k", "n", "adversary", "value", "ci_half_width", "bound", "atomic_baseline"]
    fmt = lambda v: "-" if v is None else (f"{v:.6f}" if isinstance(v, float) else str(v))
    cells = [[fmt(r[c]) for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    last = None
    for r, row in zip(rows, cells):
        if last is not None and r["object"] != last:
            lines.append("")
        last = r["object"]
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    return "\n".join(lines)


def rows_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]) if rows else ["object"])
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


# -- entry point ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="blunt", description="Strong-adversary experiments on randomized programs.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="verb", required=True)
    for verb in ("run", "search"):
        r = sub.add_parser(verb, help="Monte Carlo or exact search" if verb == "run" else "run with --adversary search")
        r.add_argument("--program", default="weakener", help="built-in name or program file")
        r.add_argument("--object", default="atomic", choices=KINDS)
        r.add_argument("--k", type=int, default=1)
        r.add_argument("--n", type=int, default=None)
        r.add_argument("--adversary", default="search" if verb == "search" else "random", choices=ADVERSARIES)
        r.add_argument("--policy-file", default=None, help="JSON list of [proc, msg-id-or-null] directives")
        r.add_argument("--trials", type=int, default=0 if verb == "search" else 1000)
        r.add_argument("--seed", type=int, default=0, help="master seed (BLUNT_SEED overrides)")
        r.add_argument("--step-budget", type=int, default=100_000)
        r.add_argument("--search-budget", type=int, default=10**7)
        r.add_argument("--p-lin", default="1", help="bad probability with the original objects, for the bound")
        r.add_argument("--output", default=None, help="JSON report path (default: stdout)")
        r.add_argument("--csv", default=None, help="per-trial CSV path")
        r.add_argument("--trace-dir", default=None, help="write each trial's execution as JSON lines")
    c = sub.add_parser("check", help="linearizability checks")
    c.add_argument("--mode", choices=("lin", "strong", "tail"), required=True)
    c.add_argument("--input", nargs="*", default=[], help="JSON-lines execution files")
    c.add_argument("--enumerate", choices=("abd", "abd-k"), default=None, help="enumerate a writers/reader tree")
    c.add_argument("--k", type=int, default=2)
    c.add_argument("--depth", type=int, default=20)
    c.add_argument("--reads", type=int, default=1)
    c.add_argument("--max-nodes", type=int, default=2_000_000)
    c.add_argument("--spec", default="register", choices=("register", "snapshot"))
    c.add_argument("--initial", default="null",
                   help='initial value as JSON, or {"R": null, "C": -1} per object (null is bottom)')
    c.add_argument("--n", type=int, default=3)
    c.add_argument("--pm", default=None, help="method=control-point,... or pi0 or full")
    c.add_argument("--output", default=None)
    rep = sub.add_parser("report", help="compare run reports")
    rep.add_argument("reports", nargs="+")
    rep.add_argument("--csv", default=None)
    return p


def master_seed(flag: int) -> int:
    """BLUNT_SEED, when set, overrides --seed."""
    env = os.environ.get("BLUNT_SEED")
    if not env:
        return flag
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"BLUNT_SEED must be an integer, got {env!r}") from None


def _emit(text: str, path: Optional[str]) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.verb in ("run", "search"):
            seed = master_seed(args.seed)
            cfg = ExperimentConfig(args.program, args.object, args.k, args.n, args.adversary, args.trials, seed,
                                   args.step_budget, args.search_budget, args.policy_file, args.p_lin,
                                   args.output, args.csv, args.trace_dir)
            report = cmd_run(cfg)
            _emit(json.dumps(report, indent=2, sort_keys=True, ensure_ascii=False) + "\n", args.output)
            return 0
        if args.verb == "check":
            verdicts = cmd_check(args)
            _emit("".join(dump_line(v) + "\n" for v in verdicts), args.output)
            return 0 if all(v["verdict"] == "pass" for v in verdicts) else 1
        rows = report_rows([load_report(p) for p in args.reports])
        sys.stdout.write(format_table(rows) + "\n")
        if args.csv:
            Path(args.csv).write_text(rows_csv(rows), encoding="utf-8")
        return 0
    except (ConfigError, NonPositiveK, TreeTooLarge) as exc:
        print(f"blunt: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
