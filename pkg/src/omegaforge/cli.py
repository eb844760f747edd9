"""Command-line driver.

Exit codes: 0 success, 2 input or schema error, 3 precondition or domain
error, 4 invariant violation detected during the run.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from fractions import Fraction
from typing import Optional, Sequence

import jsonschema

from .artifacts import (
    MLTEST_SCHEMA,
    InputError,
    load_artifact,
    load_json,
    make_artifact,
    validate_run_config,
)
from .bits import BudgetExceededError, strings_up_to
from .constructions import ConstructionError
from .machines import (
    InvariantViolation,
    MachineError,
    check_infsd_machine,
    check_monotone_machine,
    check_oracle_machine,
    infty_eval,
)
from .measure import (
    ScheduleError,
    TagError,
    rows_to_csv,
    trace,
    trace_violations,
)
from .mltest import MLPreconditionError, ml_test_build, ml_test_verify
from .stagewise import StagewiseError

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_PRECONDITION = 3
EXIT_INVARIANT = 4

CONFIG_ENV = "OMEGA_FORGE_CONFIG"
DEFAULT_CONFIG = "omegaforge.json"

CONCORDANCE = [
    ("Kraft-Chaitin allocation of a request sequence",
     "build: set kind kraft-chaitin"),
    ("Hat-trick canonical approximation of a Sigma02 set",
     "build: set kind hat-trick"),
    ("Sigma02 set -> oracle machine total exactly off the set",
     "build tot-from-sigma2; trace --tag TOT"),
    ("Sigma02 set -> monotone machine with infinite output exactly off the set",
     "build monotone-from-tot; trace --tag INF-output"),
    ("Prescribed totality probability",
     "build prescribed-tot; trace --tag TOT"),
    ("Prescribed totality probability for a universal machine (splicing)",
     "build prescribed-universal-tot; trace --tag TOT"),
    ("Sigma03 region -> cofinite domain via movable markers",
     "build cof-from-sigma3; trace --tag COF-domain"),
    ("Prescribed cofiniteness probability",
     "build prescribed-cof; trace --tag COF-domain"),
    ("Prescribed computability probability",
     "build prescribed-com; trace --tag COM-domain"),
    ("Totality and cofinite output as a Pi02 / Sigma02 intersection",
     "trace --tag TOT and --tag ONES-TAIL; Frechet bounds in the library"),
    ("Infinitary machine from a Sigma02 set, domain equal to its open set",
     "build infsd-from-sigma2; trace --tag DOM-infsd"),
    ("Prescribed domain probability for an infinitary machine",
     "build prescribed-domain-infsd; trace --tag DOM-infsd"),
    ("Martin-Lof test covering the measure of a subset of a prefix-free set",
     "mltest INPUT.json"),
    ("Measures of the outcome classes as limits of certified bounds",
     "trace --schedule L:s:n,..."),
    ("Machine model invariants (prefix consistency, monotonicity, conditions a-c)",
     "verify-machine MACHINE.json"),
]


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".omegaforge-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(text: str, out: Optional[str]) -> None:
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def resolve_config(flag: Optional[str]) -> str:
    if flag:
        return flag
    env = os.environ.get(CONFIG_ENV)
    if env:
        return env
    if os.path.exists(DEFAULT_CONFIG):
        return DEFAULT_CONFIG
    raise CliError(EXIT_INPUT, f"no config: pass --config, set {CONFIG_ENV}, or create ./{DEFAULT_CONFIG}")


def parse_schedule(text: str) -> list[tuple[int, int, int]]:
    points = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(":")
        if len(parts) != 3:
            raise CliError(EXIT_INPUT, f"schedule entries are depth:stage:n_max, got {chunk!r}")
        try:
            points.append(tuple(int(p) for p in parts))
        except ValueError:
            raise CliError(EXIT_INPUT, f"schedule entries must be integers: {chunk!r}") from None
    if not points:
        raise CliError(EXIT_INPUT, "empty schedule")
    return points


def cmd_build(args) -> int:
    path = resolve_config(args.config)
    cfg = load_json(path)
    validate_run_config(cfg)
    _, text = make_artifact(cfg)
    emit(text, args.out or cfg.get("output"))
    return EXIT_OK


def cmd_trace(args) -> int:
    machine, _ = load_artifact(args.machine)
    if args.schedule:
        schedule = parse_schedule(args.schedule)
    else:
        schedule = [(args.depth, args.stage, args.nmax)]
    rows = trace(machine, args.tag, schedule, certify=False if args.heuristic else None, jobs=args.jobs)
    emit(rows_to_csv(rows), args.out)
    problems = trace_violations(rows)
    if problems:
        for p in problems:
            print(p, file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_mltest(args) -> int:
    doc = load_json(args.input)
    try:
        jsonschema.validate(doc, MLTEST_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise InputError(f"{args.input}: {exc.message}") from None
    levels = args.levels if args.levels is not None else doc.get("levels", 10)
    test = ml_test_build(
        [_token(s) for s in doc["S"]],
        [_token(t) for t in doc["V"]],
        levels=levels,
        epsilons={int(k): Fraction(v) for k, v in doc.get("margins", {}).items()},
        delta_overrides={int(k): Fraction(v) for k, v in doc.get("delta_overrides", {}).items()},
        check_preconditions=doc.get("check_preconditions", True),
    )
    horizon = args.horizon if args.horizon is not None else doc.get("horizon")
    report = ml_test_verify(test, horizon)
    lines = report.lines()
    lines.append("PASS" if report.ok else "FAIL at n=" + ",".join(str(r.n) for r in report.failures()))
    emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK if report.ok else EXIT_INVARIANT


def _token(s: str) -> str:
    return "" if s == "ε" else s


def cmd_verify(args) -> int:
    machine, doc = load_artifact(args.machine)
    if machine.model == "oracle":
        problems = check_oracle_machine(machine, args.depth, args.nmax, args.stage)
    elif machine.model == "monotone":
        problems = check_monotone_machine(machine, args.depth, args.stage)
    else:
        problems = check_infsd_machine(machine, args.depth, args.nmax)
        try:
            for sigma in strings_up_to(args.depth):
                infty_eval(machine, sigma, args.nmax, check=True)
        except InvariantViolation as exc:
            problems.append(str(exc))
    if problems:
        for p in problems[:50]:
            print(p)
        print(f"FAIL: {len(problems)} violation(s)")
        return EXIT_INVARIANT
    print(f"OK: {doc['machine']['construction']} ({machine.model}) depth={args.depth} "
          f"stage={args.stage} n_max={args.nmax}")
    return EXIT_OK


def cmd_concordance(args) -> int:
    width = max(len(r) for r, _ in CONCORDANCE)
    lines = [f"{'result'.ljust(width)}  command", f"{'-' * width}  {'-' * 7}"]
    lines += [f"{r.ljust(width)}  {c}" for r, c in CONCORDANCE]
    emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="omegaforge", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build a machine artifact from a run config")
    p.add_argument("--config", help=f"run config (default: ${CONFIG_ENV}, then ./{DEFAULT_CONFIG})")
    p.add_argument("--out", help="artifact path (default: config 'output', else stdout)")
    p.set_defaults(func=cmd_build)

    def grid(p, depth=4, stage=20, nmax=4):
        p.add_argument("--depth", type=int, default=depth)
        p.add_argument("--stage", type=int, default=stage)
        p.add_argument("--nmax", type=int, default=nmax)

    p = sub.add_parser("trace", help="certified measure bounds as CSV")
    p.add_argument("machine")
    p.add_argument("--tag", required=True)
    p.add_argument("--schedule", help="comma-separated depth:stage:n_max points")
    grid(p)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--heuristic", action="store_true", help="observe instead of using certificates")
    p.add_argument("--out")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("mltest", help="build and verify a Martin-Lof test")
    p.add_argument("input", help="JSON document with S, V and optional margins")
    p.add_argument("--levels", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_mltest)

    p = sub.add_parser("verify-machine", help="check the machine-model invariants on a finite grid")
    p.add_argument("machine")
    grid(p, depth=5, stage=12, nmax=8)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("concordance", help="list results and the commands that exercise them")
    p.add_argument("--out")
    p.set_defaults(func=cmd_concordance)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be positive")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (InputError, StagewiseError, json.JSONDecodeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConstructionError, BudgetExceededError, MachineError, MLPreconditionError,
            TagError, ScheduleError) as exc:
        print(f"precondition error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
