"""Martin-Löf test covering the measure of an enumerated subset of a
prefix-free set, with exact rational verification.

Given a finite prefix-free enumeration S and an enumeration V = (tau_0,
tau_1, ...) of a subset of S, level n of the test is the union over s of the
open intervals J(n, s) = (mu(V_s), mu(V_s) + delta_n), where V_s holds the
first s strings of V.  The width is delta_n = 2^(-n-1) * eps_n / (1 + eps_n),
with eps_n strictly below 2^-|rho| for every rho in a finite part D_n of S
whose tail measure is below 2^(-n-1).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .bits import check_bits, check_prefix_free, fmt_bits


class MLPreconditionError(ValueError):
    pass


def delta(n: int, eps: Fraction) -> Fraction:
    eps = Fraction(eps)
    return Fraction(1, 2 ** (n + 1)) * eps / (1 + eps)


def _mu(strings: Sequence[str]) -> Fraction:
    return sum((Fraction(1, 2 ** len(s)) for s in strings), Fraction(0))


def choose_d(S: Sequence[str], n: int) -> list[str]:
    """Shortest initial segment D of the enumeration with mu(S) - mu(D) < 2^(-n-1)."""
    total = _mu(S)
    bound = Fraction(1, 2 ** (n + 1))
    acc = Fraction(0)
    for i in range(len(S) + 1):
        if total - acc < bound:
            return list(S[:i])
        acc += Fraction(1, 2 ** len(S[i]))
    return list(S)  # pragma: no cover - the loop always returns


def default_epsilon(d: Sequence[str]) -> Fraction:
    if not d:
        return Fraction(1, 2)
    return Fraction(1, 2 ** (max(len(r) for r in d) + 1))


@dataclass
class Level:
    n: int
    d: list[str]
    epsilon: Fraction
    delta: Fraction

    @property
    def d_count(self) -> int:
        return len(self.d)


@dataclass
class MLTest:
    S: list[str]
    V: list[str]
    levels: dict[int, Level] = field(default_factory=dict)

    def left_endpoints(self) -> list[Fraction]:
        out = [Fraction(0)]
        acc = Fraction(0)
        for t in self.V:
            acc += Fraction(1, 2 ** len(t))
            out.append(acc)
        return out

    def intervals(self, n: int, horizon: Optional[int] = None) -> list[tuple[Fraction, Fraction]]:
        lefts = self.left_endpoints()
        if horizon is not None:
            lefts = lefts[: horizon + 1]
        d = self.levels[n].delta
        return [(a, a + d) for a in lefts]

    def contains(self, n: int, x: Fraction, horizon: Optional[int] = None) -> bool:
        return any(a < x < b for a, b in self.intervals(n, horizon))

    def measure_of_v(self) -> Fraction:
        return _mu(self.V)


def ml_test_build(S: Sequence[str], V: Sequence[str], levels: Sequence[int] | int = 10,
                  epsilons: Optional[Mapping[int, Fraction]] = None,
                  delta_overrides: Optional[Mapping[int, Fraction]] = None,
                  check_preconditions: bool = True) -> MLTest:
    S = [check_bits(s) for s in S]
    V = [check_bits(t) for t in V]
    if isinstance(levels, int):
        levels = range(1, levels + 1)
    if check_prefix_free(S) is not None or len(set(S)) != len(S):
        raise MLPreconditionError("S must be a repetition-free prefix-free enumeration")
    members = set(S)
    for t in V:
        if t not in members:
            raise MLPreconditionError(f"{fmt_bits(t)} is enumerated into V but is not in S")
    if len(set(V)) != len(V):
        raise MLPreconditionError("V enumerates a string twice")
    epsilons = {int(k): Fraction(v) for k, v in (epsilons or {}).items()}
    overrides = {int(k): Fraction(v) for k, v in (delta_overrides or {}).items()}
    test = MLTest(S, V)
    for n in levels:
        d = choose_d(S, n)
        eps = epsilons.get(n, default_epsilon(d))
        if check_preconditions:
            if eps <= 0:
                raise MLPreconditionError(f"level {n}: eps must be positive")
            for rho in d:
                if not eps < Fraction(1, 2 ** len(rho)):
                    raise MLPreconditionError(
                        f"level {n}: eps = {eps} is not below 2^-{len(rho)} for {fmt_bits(rho)} in D_{n}"
                    )
            if len(d) > 1 / eps:
                raise MLPreconditionError(f"level {n}: |D_n| = {len(d)} exceeds 1/eps = {1 / eps}")
        width = overrides.get(n, delta(n, eps))
        test.levels[n] = Level(n, d, eps, width)
    return test


def union_measure(intervals: Sequence[tuple[Fraction, Fraction]]) -> Fraction:
    """Exact Lebesgue measure of a finite union of open intervals."""
    total = Fraction(0)
    cur_a = cur_b = None
    for a, b in sorted(intervals):
        if b <= a:
            continue
        if cur_b is None or a > cur_b:
            if cur_b is not None:
                total += cur_b - cur_a
            cur_a, cur_b = a, b
        elif b > cur_b:
            cur_b = b
    if cur_b is not None:
        total += cur_b - cur_a
    return total


def inclusion_exclusion_measure(intervals: Sequence[tuple[Fraction, Fraction]]) -> Fraction:
    """Same measure via inclusion-exclusion, pruning empty intersections."""
    items = [iv for iv in intervals if iv[1] > iv[0]]

    def rec(start: int, lo: Fraction, hi: Fraction, sign: int) -> Fraction:
        total = Fraction(0)
        for i in range(start, len(items)):
            a, b = items[i]
            nlo, nhi = max(lo, a), min(hi, b)
            if nhi <= nlo:
                continue
            total += sign * (nhi - nlo) + rec(i + 1, nlo, nhi, -sign)
        return total

    if not items:
        return Fraction(0)
    lo = min(a for a, _ in items)
    hi = max(b for _, b in items)
    return rec(0, lo, hi, 1)


@dataclass
class LevelReport:
    n: int
    measure: Fraction
    bound: Fraction
    delta: Fraction
    epsilon: Fraction
    d_count: int

    @property
    def ok(self) -> bool:
        return self.measure <= self.bound

    @property
    def slack(self) -> Fraction:
        return self.bound - self.measure


@dataclass
class MLReport:
    levels: list[LevelReport]
    horizon: int

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.levels)

    def failures(self) -> list[LevelReport]:
        return [r for r in self.levels if not r.ok]

    def lines(self) -> list[str]:
        out = []
        for r in self.levels:
            if r.ok:
                out.append(f"n={r.n} pass measure={r.measure} bound={r.bound} slack={r.slack}")
            else:
                out.append(f"n={r.n} FAIL measure={r.measure} bound={r.bound} excess={-r.slack}")
        return out


def ml_test_verify(test: MLTest, horizon: Optional[int] = None) -> MLReport:
    if horizon is None:
        horizon = len(test.V)
    reports = []
    for n in sorted(test.levels):
        lvl = test.levels[n]
        m = union_measure(test.intervals(n, horizon))
        reports.append(LevelReport(n, m, Fraction(1, 2 ** n), lvl.delta, lvl.epsilon, lvl.d_count))
    return MLReport(reports, horizon)
