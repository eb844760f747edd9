"""Outcome classes, certified measure bounds at finite truncations, traces and
the totality / ones-tail decomposition.

A bound at (depth L, stage s, horizon n_max) classifies each of the 2^L
strings of length L.  A string is *in* when every real extending it belongs to
the class, *out* when none does, and *unknown* otherwise.  The lower bound is
the measure of the in-strings and the upper bound is one minus the measure of
the out-strings.

Machines that issue certificates (see :mod:`omegaforge.machines`) give
certified bounds: they are safe for the true measure of the class.  For other
machines the classification comes from observing the machine at the
truncation and both sides are flagged heuristic.
"""
from __future__ import annotations

import csv
import enum
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

from .bits import ONE, ZERO, Dyadic, strings_of_length
from .machines import (
    Alive,
    InfSDMachine,
    MonotoneMachine,
    StagedOracleMachine,
    infty_eval,
    monotone_output,
    run_oracle,
)


class ClassTag(str, enum.Enum):
    TOT = "TOT"
    INF_DOMAIN = "INF-domain"
    FIN_OUTPUT = "FIN-output"
    INF_OUTPUT = "INF-output"
    COF_DOMAIN = "COF-domain"
    COM_DOMAIN = "COM-domain"
    DOM_INFSD = "DOM-infsd"
    FIN_INFSD = "FIN-infsd"
    INF_INFSD = "INF-infsd"
    COF_OUTPUT = "COF-output"
    # the Sigma^0_2 half of the COF-output decomposition
    ONES_TAIL = "ONES-TAIL"


@dataclass(frozen=True)
class TagInfo:
    model: str
    complexity: str
    description: str
    observed: str
    certification: str


# Static table: which machine model a tag applies to, the arithmetical form of
# the class, how the finite observation is made, and when sides are certified.
TAG_TABLE: dict[ClassTag, TagInfo] = {
    ClassTag.TOT: TagInfo(
        "oracle", "Pi02", "M(X) is total",
        "M(X|L, n) defined for every n <= n_max",
        "out: a prefix permanently in the Sigma02 set; in: stabilized approximation with identity use",
    ),
    ClassTag.INF_DOMAIN: TagInfo(
        "oracle", "Pi02", "M(X) has infinite domain",
        "some n in the upper half of [0, n_max] is defined",
        "as TOT for constructions where the two classes coincide",
    ),
    ClassTag.COF_DOMAIN: TagInfo(
        "oracle", "Sigma03", "M(X) has cofinite domain",
        "every n in the upper half of [0, n_max] is defined",
        "marker constructions: from the declared family region",
    ),
    ClassTag.COM_DOMAIN: TagInfo(
        "oracle", "Sigma03", "M(X) has computable domain",
        "the upper half of [0, n_max] is all defined or all undefined",
        "marker constructions driven by the halting stand-in; empty and constant machines",
    ),
    ClassTag.COF_OUTPUT: TagInfo(
        "oracle", "Pi02 and Sigma02", "M(X) is total and the characteristic function of a cofinite set",
        "TOT observed and ONES-TAIL observed",
        "machines certifying both halves",
    ),
    ClassTag.ONES_TAIL: TagInfo(
        "oracle", "Sigma02", "from some point on M(X, n) is undefined or 1",
        "every defined value in the upper half of [0, n_max] equals 1",
        "constant and empty machines",
    ),
    ClassTag.FIN_OUTPUT: TagInfo(
        "monotone", "Sigma02", "N(X) is finite",
        "|N(X|L)| < n_max",
        "derived machines: complement of the base machine's TOT certificate",
    ),
    ClassTag.INF_OUTPUT: TagInfo(
        "monotone", "Pi02", "N(X) is infinite",
        "|N(X|L)| >= n_max",
        "derived machines: the base machine's TOT certificate",
    ),
    ClassTag.DOM_INFSD: TagInfo(
        "infsd", "Sigma02", "some prefix of X converges under M^inf",
        "some prefix of X|L alive at section n_max",
        "in: prefix permanently in the approximation; out: stabilized approximation",
    ),
    ClassTag.FIN_INFSD: TagInfo(
        "infsd", "Sigma02", "M^inf(X) converges with finite output",
        "alive at n_max with output shorter than n_max",
        "machines that never print: same as DOM-infsd",
    ),
    ClassTag.INF_INFSD: TagInfo(
        "infsd", "Pi02", "M^inf(X) converges with infinite output",
        "alive at n_max with output of length >= n_max",
        "machines that never print: always out",
    ),
}


class TagError(ValueError):
    pass


class ScheduleError(ValueError):
    pass


def model_of(machine) -> str:
    if isinstance(machine, StagedOracleMachine):
        return "oracle"
    if isinstance(machine, MonotoneMachine):
        return "monotone"
    if isinstance(machine, InfSDMachine):
        return "infsd"
    raise TagError(f"not a machine: {machine!r}")


def parse_tag(tag) -> ClassTag:
    try:
        return ClassTag(tag)
    except ValueError:
        raise TagError(f"unknown class tag {tag!r}") from None


def applicable(machine, tag) -> bool:
    return TAG_TABLE[parse_tag(tag)].model == model_of(machine)


@dataclass(frozen=True)
class MeasureBound:
    lower: Dyadic
    upper: Dyadic
    depth: int
    stage: int
    n_max: int
    lower_certified: bool
    upper_certified: bool

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError(f"lower bound {self.lower} above upper bound {self.upper}")

    @property
    def exact(self) -> bool:
        return self.lower == self.upper

    def row(self) -> list:
        return [
            self.depth, self.stage, self.n_max,
            self.lower.numerator, self.lower.exponent,
            self.upper.numerator, self.upper.exponent,
            int(self.lower_certified), int(self.upper_certified),
        ]


CSV_HEADER = [
    "depth", "stage", "n_max", "lower_num", "lower_exp",
    "upper_num", "upper_exp", "lower_certified", "upper_certified",
]


def _upper_half(n_max: int) -> range:
    return range(n_max // 2 + 1, n_max + 1) if n_max > 0 else range(0, 1)


def observe(machine, tag: ClassTag, tau: str, stage: int, n_max: int) -> bool:
    """Finite-truncation membership of the cone of tau (heuristic)."""
    if tag in (ClassTag.TOT, ClassTag.INF_DOMAIN, ClassTag.COF_DOMAIN, ClassTag.COM_DOMAIN,
               ClassTag.ONES_TAIL, ClassTag.COF_OUTPUT):
        if tag == ClassTag.TOT:
            return all(run_oracle(machine, tau, n, stage) is not None for n in range(n_max + 1))
        window = [run_oracle(machine, tau, n, stage) for n in _upper_half(n_max)]
        if tag == ClassTag.INF_DOMAIN:
            return any(v is not None for v in window)
        if tag == ClassTag.COF_DOMAIN:
            return all(v is not None for v in window)
        if tag == ClassTag.COM_DOMAIN:
            return all(v is not None for v in window) or all(v is None for v in window)
        ones = all(v is None or v == 1 for v in window)
        if tag == ClassTag.ONES_TAIL:
            return ones
        return ones and observe(machine, ClassTag.TOT, tau, stage, n_max)
    if tag in (ClassTag.FIN_OUTPUT, ClassTag.INF_OUTPUT):
        long_enough = len(monotone_output(machine, tau, stage)) >= n_max
        return long_enough if tag == ClassTag.INF_OUTPUT else not long_enough
    # infinitary machines: look for an alive prefix
    for k in range(len(tau) + 1):
        res = infty_eval(machine, tau[:k], n_max, check=False)
        if isinstance(res, Alive):
            if tag == ClassTag.DOM_INFSD:
                return True
            if tag == ClassTag.FIN_INFSD:
                return len(res.output) < n_max
            return len(res.output) >= n_max
    return False


def classify(machine, tag: ClassTag, tau: str, stage: int, n_max: int, certify: bool) -> Optional[bool]:
    if certify:
        return machine.certificate(tag.value, tau, stage, n_max)
    return observe(machine, tag, tau, stage, n_max)


def class_bounds(machine, tag, depth: int, stage: int, n_max: int, certify: Optional[bool] = None,
                 jobs: int = 1) -> MeasureBound:
    tag = parse_tag(tag)
    if not applicable(machine, tag):
        raise TagError(f"tag {tag.value} does not apply to a {model_of(machine)} machine")
    if certify is None:
        certify = machine.certifies(tag.value)
    elif certify and not machine.certifies(tag.value):
        raise TagError(f"this machine issues no certificates for {tag.value}")
    strings = list(strings_of_length(depth))

    def one(tau):
        return classify(machine, tag, tau, stage, n_max, certify)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            verdicts = list(pool.map(one, strings))
    else:
        verdicts = [one(tau) for tau in strings]
    # every string has the same length, so the sums are plain counts
    n_in = sum(1 for v in verdicts if v is True)
    n_out = sum(1 for v in verdicts if v is False)
    lower = Dyadic(n_in, depth)
    upper = ONE - Dyadic(n_out, depth)
    return MeasureBound(lower, upper, depth, stage, n_max, certify, certify)


def check_schedule(schedule: Sequence[Sequence[int]]) -> list[tuple[int, int, int]]:
    out = []
    for point in schedule:
        if len(point) != 3 or any(not isinstance(x, int) or x < 0 for x in point):
            raise ScheduleError(f"schedule points are (depth, stage, n_max) naturals: {point!r}")
        out.append(tuple(point))
    for a, b in zip(out, out[1:]):
        if any(y < x for x, y in zip(a, b)):
            raise ScheduleError(f"schedule is not monotone: {a} then {b}")
    return out


def trace(machine, tag, schedule: Sequence[Sequence[int]], certify: Optional[bool] = None,
          jobs: int = 1) -> list[MeasureBound]:
    points = check_schedule(schedule)
    return [class_bounds(machine, tag, L, s, n, certify=certify, jobs=jobs) for L, s, n in points]


def trace_violations(rows: Sequence[MeasureBound]) -> list[str]:
    """Certified lower bounds must not decrease and certified upper bounds
    must not increase along a trace."""
    problems = []
    for i, (a, b) in enumerate(zip(rows, rows[1:]), start=1):
        if a.lower_certified and b.lower_certified and b.lower < a.lower:
            problems.append(f"row {i}: certified lower bound fell from {a.lower} to {b.lower}")
        if a.upper_certified and b.upper_certified and b.upper > a.upper:
            problems.append(f"row {i}: certified upper bound rose from {a.upper} to {b.upper}")
    return problems


def rows_to_csv(rows: Sequence[MeasureBound]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in rows:
        writer.writerow(r.row())
    return buf.getvalue()


@dataclass(frozen=True)
class Decomposition:
    totality: MeasureBound
    ones_tail: MeasureBound
    intersection: MeasureBound


def frechet(pi: MeasureBound, sigma: MeasureBound) -> MeasureBound:
    lower = max(ZERO, pi.lower + sigma.lower - 1)
    upper = min(pi.upper, sigma.upper)
    return MeasureBound(
        lower, upper, pi.depth, pi.stage, pi.n_max,
        pi.lower_certified and sigma.lower_certified,
        pi.upper_certified and sigma.upper_certified,
    )


def cof_total_decomposition(machine, depth: int, stage: int, n_max: int, jobs: int = 1) -> Decomposition:
    if model_of(machine) != "oracle":
        raise TagError("the decomposition applies to oracle machines")
    pi = class_bounds(machine, ClassTag.TOT, depth, stage, n_max, jobs=jobs)
    sigma = class_bounds(machine, ClassTag.ONES_TAIL, depth, stage, n_max, jobs=jobs)
    return Decomposition(pi, sigma, frechet(pi, sigma))
