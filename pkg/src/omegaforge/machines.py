"""The three machine models as stage-indexed partial maps, bounded evaluation,
family-relative universal machines and splicing.

Every machine is an immutable value whose ``eval`` is a deterministic total
function of its arguments, returning ``None`` for "undefined so far".

Machines may also expose certificates: ``certificate(tag, tau, stage, n_max)``
returns ``True`` when every real extending ``tau`` provably belongs to the
class named by ``tag``, ``False`` when none does, and ``None`` when the
machine cannot tell yet.  Certificates are only issued from information that
cannot change at later stages.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

from .bits import (
    check_bits,
    check_prefix_free,
    compatible,
    fmt_bits,
    has_prefix_in,
    strings_of_length,
    strings_up_to,
)

IDENTITY = "identity"
RECORDED = "recorded"


class MachineError(ValueError):
    pass


class InvariantViolation(RuntimeError):
    """A machine broke one of the contracts of its model."""

    def __init__(self, message: str, witness: tuple = ()):
        super().__init__(message)
        self.witness = witness


class MonotonicityError(InvariantViolation):
    def __init__(self, shorter: str, longer: str):
        super().__init__(
            f"monotonicity violated: outputs on {fmt_bits(shorter)} and {fmt_bits(longer)} are incomparable",
            (shorter, longer),
        )


class SpliceConflict(MachineError):
    def __init__(self, sigma: str, n: int, stage: int):
        super().__init__(
            f"splice precondition fails: N({fmt_bits(sigma)}, {n}) is defined at stage {stage} "
            f"on a string compatible with the splice prefix"
        )
        self.witness = (sigma, n, stage)


def combine_children(tau: str, depth_limit: int, leaf: Callable[[str], Optional[bool]]) -> Optional[bool]:
    """Decide a cone by splitting it: all children in -> in, all out -> out.

    ``leaf`` returns a verdict or the sentinel ``...`` meaning "split further".
    Splitting stops at ``depth_limit``.
    """
    verdict = leaf(tau)
    if verdict is not ...:
        return verdict
    if len(tau) >= depth_limit:
        return None
    left = combine_children(tau + "0", depth_limit, leaf)
    if left is None:
        return None
    right = combine_children(tau + "1", depth_limit, leaf)
    return left if left == right else None


# ---------------------------------------------------------------- oracle machines


class StagedOracleMachine:
    model = "oracle"
    use_policy = IDENTITY

    def eval(self, sigma: str, n: int, stage: int) -> Optional[int]:
        raise NotImplementedError

    def certifies(self, tag: str) -> bool:
        return False

    def certificate(self, tag: str, tau: str, stage: int, n_max: int) -> Optional[bool]:
        return None


class EmptyOracleMachine(StagedOracleMachine):
    """Defined nowhere.  ``frozen_from`` is the stage from which this fact is
    declared final; before it no certificates are issued."""

    def __init__(self, frozen_from: int = 0):
        self.frozen_from = frozen_from

    def eval(self, sigma, n, stage):
        return None

    def certifies(self, tag):
        return tag in ("TOT", "INF-domain", "COF-domain", "COM-domain", "ONES-TAIL", "COF-output")

    def certificate(self, tag, tau, stage, n_max):
        if stage < self.frozen_from:
            return None
        # the empty function: finite, coinfinite, computable, vacuously ones-tailed
        return tag in ("COM-domain", "ONES-TAIL")


class ConstantOnRegion(StagedOracleMachine):
    """M(sigma, n) = value for every n once sigma has a prefix in ``region``,
    from stage ``from_stage`` on; undefined elsewhere."""

    def __init__(self, region: Iterable[str], value: int = 0, from_stage: int = 0):
        self.region = frozenset(check_bits(r) for r in region)
        self.value = int(value)
        self.from_stage = from_stage

    def eval(self, sigma, n, stage):
        if stage >= self.from_stage and has_prefix_in(sigma, self.region):
            return self.value
        return None

    def certifies(self, tag):
        return tag in ("TOT", "INF-domain", "COF-domain", "COM-domain", "ONES-TAIL", "COF-output")

    def _inside(self, tau: str) -> Optional[bool]:
        if has_prefix_in(tau, self.region):
            return True
        if not any(r.startswith(tau) for r in self.region):
            return False
        return None

    def certificate(self, tag, tau, stage, n_max):
        inside = self._inside(tau)
        if inside is None:
            return None
        if tag in ("TOT", "INF-domain", "COF-domain"):
            return inside
        if tag == "COM-domain":
            return True
        if tag == "ONES-TAIL":
            return (not inside) or self.value == 1
        if tag == "COF-output":
            return inside and self.value == 1
        return None


class TableOracleMachine(StagedOracleMachine):
    """Finite table of entries ``(sigma, n, value, stage)``.  Identity-style
    prefix inheritance: an entry for sigma also answers every extension."""

    def __init__(self, entries: Iterable[Sequence]):
        table: dict[tuple[str, int], tuple[int, int]] = {}
        for sigma, n, value, stage in entries:
            key = (check_bits(sigma), int(n))
            if key in table and table[key][0] != int(value):
                raise MachineError(f"conflicting table entries for {key}")
            prev = table.get(key)
            table[key] = (int(value), int(stage) if prev is None else min(prev[1], int(stage)))
        for (sigma, n), (value, _) in table.items():
            for k in range(len(sigma)):
                other = table.get((sigma[:k], n))
                if other is not None and other[0] != value:
                    raise MachineError(f"table is not prefix-consistent at {fmt_bits(sigma)}, n={n}")
        self.table = table

    def eval(self, sigma, n, stage):
        for k in range(len(sigma) + 1):
            hit = self.table.get((sigma[:k], n))
            if hit is not None and hit[1] <= stage:
                return hit[0]
        return None


class FunctionOracleMachine(StagedOracleMachine):
    def __init__(self, fn: Callable[[str, int, int], Optional[int]], use_policy: str = RECORDED):
        self._fn = fn
        self.use_policy = use_policy

    def eval(self, sigma, n, stage):
        return self._fn(sigma, n, stage)


def run_oracle(machine: StagedOracleMachine, x: str, n: int, stage: int) -> Optional[int]:
    """M(X, n) at ``stage`` using only the bits of the finite prefix ``x``."""
    for k in range(len(x) + 1):
        v = machine.eval(x[:k], n, stage)
        if v is not None:
            return v
    return None


# ---------------------------------------------------------------- monotone machines


class MonotoneMachine:
    model = "monotone"

    def eval(self, sigma: str, stage: int) -> Optional[str]:
        raise NotImplementedError

    def certifies(self, tag: str) -> bool:
        return False

    def certificate(self, tag: str, tau: str, stage: int, n_max: int) -> Optional[bool]:
        return None


class TableMonotoneMachine(MonotoneMachine):
    def __init__(self, table: dict[str, str], from_stage: int = 0):
        self.table = {check_bits(k): check_bits(v) for k, v in table.items()}
        self.from_stage = from_stage

    def eval(self, sigma, stage):
        if stage < self.from_stage:
            return None
        return self.table.get(sigma)


def monotone_output(machine: MonotoneMachine, x: str, stage: int) -> str:
    best = ""
    best_at = None
    for k in range(len(x) + 1):
        out = machine.eval(x[:k], stage)
        if out is None:
            continue
        if best_at is not None and not out.startswith(best):
            raise MonotonicityError(best_at, x[:k])
        best, best_at = out, x[:k]
    return best


# ---------------------------------------------------------------- infinitary machines


class InfSDMachine:
    """Sections M(sigma, n); definedness is decidable."""

    model = "infsd"

    def eval(self, sigma: str, n: int) -> Optional[str]:
        raise NotImplementedError

    def certifies(self, tag: str) -> bool:
        return False

    def certificate(self, tag: str, tau: str, stage: int, n_max: int) -> Optional[bool]:
        return None


class ConstantInfSD(InfSDMachine):
    """M(sigma, n) = output for all sigma, n (or nowhere when output is None)."""

    def __init__(self, output: Optional[str] = ""):
        self.output = output

    def eval(self, sigma, n):
        return self.output


@dataclass(frozen=True)
class Refuted:
    n: int


@dataclass(frozen=True)
class Alive:
    output: str


def infty_eval(machine: InfSDMachine, sigma: str, n_max: int, check: bool = True) -> Refuted | Alive:
    """Scan the sections M(sigma, 0..n_max).  With ``check`` the scan also
    verifies conditions (a) and (b) against the prefixes of sigma."""
    prev = None
    for n in range(n_max + 1):
        out = machine.eval(sigma, n)
        if out is None:
            if check:
                for m in range(n + 1, n_max + 1):
                    if machine.eval(sigma, m) is not None:
                        raise InvariantViolation(
                            f"condition (a) fails: M({fmt_bits(sigma)}, {m}) defined but M({fmt_bits(sigma)}, {n}) is not",
                            (sigma, n, m),
                        )
            return Refuted(n)
        if check:
            if prev is not None and not out.startswith(prev):
                raise InvariantViolation(
                    f"condition (a) fails: outputs of M({fmt_bits(sigma)}, .) not increasing at {n}",
                    (sigma, n),
                )
            for k in range(len(sigma)):
                above = machine.eval(sigma[:k], n)
                if above is not None and above != out:
                    raise InvariantViolation(
                        f"condition (b) fails: M({fmt_bits(sigma[:k])}, {n}) and M({fmt_bits(sigma)}, {n}) differ",
                        (sigma[:k], sigma, n),
                    )
        prev = out
    return Alive(prev if prev is not None else "")


def mstar_front(machine: InfSDMachine, max_len: int, n_max: int) -> frozenset[str]:
    """Minimal strings of length <= max_len that are alive at ``n_max``."""
    front = []
    frontier = [""]
    while frontier:
        nxt = []
        for sigma in frontier:
            if isinstance(infty_eval(machine, sigma, n_max, check=False), Alive):
                front.append(sigma)
            elif len(sigma) < max_len:
                nxt.extend((sigma + "0", sigma + "1"))
        frontier = nxt
    return frozenset(front)


# ---------------------------------------------------------------- coding, universality, splicing


class UnaryCoding:
    """code(e) = 0^e 1."""

    def code(self, e: int) -> str:
        return "0" * e + "1"

    def decode(self, sigma: str, family_size: int) -> Optional[tuple[int, str]]:
        e = len(sigma) - len(sigma.lstrip("0"))
        if e < len(sigma) and e < family_size:
            return e, sigma[e + 1:]
        return None

    def dead_prefix(self, tau: str, family_size: int) -> bool:
        """True when no code of an index below ``family_size`` is compatible with tau."""
        return all(not compatible(tau, self.code(e)) for e in range(family_size))


class ExplicitCoding:
    def __init__(self, codes: Sequence[str]):
        codes = [check_bits(c) for c in codes]
        if len(set(codes)) != len(codes) or check_prefix_free(codes) is not None:
            raise MachineError("coding range must be prefix-free")
        self.codes = list(codes)

    def code(self, e: int) -> str:
        return self.codes[e]

    def decode(self, sigma: str, family_size: int) -> Optional[tuple[int, str]]:
        for e, c in enumerate(self.codes[:family_size]):
            if sigma.startswith(c):
                return e, sigma[len(c):]
        return None

    def dead_prefix(self, tau: str, family_size: int) -> bool:
        return all(not compatible(tau, c) for c in self.codes[:family_size])


class UniversalMachine(StagedOracleMachine):
    """U(code(e) * X, n) = M_e(X, n) for each member of the supplied family."""

    def __init__(self, family: Sequence[StagedOracleMachine], coding=None):
        self.family = list(family)
        self.coding = coding if coding is not None else UnaryCoding()
        if isinstance(self.coding, ExplicitCoding) and len(self.coding.codes) < len(self.family):
            raise MachineError("coding has fewer codes than the family has members")
        self.use_policy = IDENTITY if all(m.use_policy == IDENTITY for m in self.family) else RECORDED

    def eval(self, sigma, n, stage):
        hit = self.coding.decode(sigma, len(self.family))
        if hit is None:
            return None
        e, rest = hit
        return self.family[e].eval(rest, n, stage)

    def certifies(self, tag):
        return all(m.certifies(tag) for m in self.family)

    def certificate(self, tag, tau, stage, n_max):
        size = len(self.family)
        empty = EmptyOracleMachine()

        def leaf(t):
            hit = self.coding.decode(t, size)
            if hit is not None:
                e, rest = hit
                return self.family[e].certificate(tag, rest, stage, n_max)
            if self.coding.dead_prefix(t, size):
                return empty.certificate(tag, t, stage, n_max)
            return ...

        bound = max((len(self.coding.code(e)) for e in range(size)), default=0)
        return combine_children(tau, bound, leaf)


def universal_from_family(family: Sequence[StagedOracleMachine], coding=None) -> UniversalMachine:
    return UniversalMachine(family, coding)


@dataclass(frozen=True)
class Horizons:
    depth: int = 6
    n_max: int = 6
    stage: int = 12


class SplicedMachine(StagedOracleMachine):
    """M(rho * tau, n) = V(tau, n); M(sigma, n) = N(sigma, n) for sigma
    incompatible with rho; undefined on proper prefixes of rho."""

    def __init__(self, v: StagedOracleMachine, n: StagedOracleMachine, rho: str):
        self.v = v
        self.n = n
        self.rho = check_bits(rho)
        self.use_policy = IDENTITY if v.use_policy == n.use_policy == IDENTITY else RECORDED

    def eval(self, sigma, n, stage):
        if sigma.startswith(self.rho):
            return self.v.eval(sigma[len(self.rho):], n, stage)
        if self.rho.startswith(sigma):
            return None
        return self.n.eval(sigma, n, stage)

    def certifies(self, tag):
        return self.v.certifies(tag) and self.n.certifies(tag)

    def certificate(self, tag, tau, stage, n_max):
        def leaf(t):
            if t.startswith(self.rho):
                return self.v.certificate(tag, t[len(self.rho):], stage, n_max)
            if not self.rho.startswith(t):
                return self.n.certificate(tag, t, stage, n_max)
            return ...

        return combine_children(tau, len(self.rho), leaf)


def find_splice_conflict(n_machine: StagedOracleMachine, rho: str, horizons: Horizons):
    """A defined N(sigma, n) with sigma compatible with rho, or None."""
    candidates = [rho[:k] for k in range(len(rho) + 1)]
    extra = max(0, horizons.depth - len(rho))
    for k in range(1, extra + 1):
        candidates.extend(rho + t for t in strings_of_length(k))
    for sigma in candidates:
        for n in range(horizons.n_max + 1):
            if n_machine.eval(sigma, n, horizons.stage) is not None:
                return sigma, n, horizons.stage
    return None


def splice(v: StagedOracleMachine, n: StagedOracleMachine, rho: str,
           horizons: Optional[Horizons] = None) -> SplicedMachine:
    conflict = find_splice_conflict(n, rho, horizons or Horizons())
    if conflict is not None:
        raise SpliceConflict(*conflict)
    return SplicedMachine(v, n, rho)


# ---------------------------------------------------------------- invariant checks


def check_oracle_machine(machine: StagedOracleMachine, depth: int, n_max: int, stage: int) -> list[str]:
    """Prefix-consistency and stage-monotonicity on the full finite grid."""
    problems = []
    strings = list(strings_up_to(depth))
    for n in range(n_max + 1):
        prev_row = {}
        for s in range(stage + 1):
            row = {sigma: machine.eval(sigma, n, s) for sigma in strings}
            for sigma, v in prev_row.items():
                if v is not None and row[sigma] != v:
                    problems.append(f"stage monotonicity: M({fmt_bits(sigma)}, {n}) changed at stage {s}")
            for sigma, v in row.items():
                if v is None or not sigma:
                    continue
                parent = row[sigma[:-1]]
                if parent is not None and parent != v:
                    problems.append(f"prefix consistency: M({fmt_bits(sigma)}, {n}) differs from its parent at stage {s}")
            if machine.use_policy == IDENTITY:
                for sigma, v in row.items():
                    if v is not None and len(sigma) < depth:
                        for b in "01":
                            if row[sigma + b] is None:
                                problems.append(
                                    f"prefix consistency: M({fmt_bits(sigma)}, {n}) defined but not on its extension at stage {s}"
                                )
            prev_row = row
    return problems


def check_monotone_machine(machine: MonotoneMachine, depth: int, stage: int) -> list[str]:
    problems = []
    strings = list(strings_up_to(depth))
    prev = {}
    for s in range(stage + 1):
        row = {sigma: machine.eval(sigma, s) for sigma in strings}
        for sigma, v in prev.items():
            if v is not None and row[sigma] != v:
                problems.append(f"stage monotonicity: N({fmt_bits(sigma)}) changed at stage {s}")
        for sigma, v in row.items():
            if v is None:
                continue
            for k in range(len(sigma)):
                u = row[sigma[:k]]
                if u is not None and not v.startswith(u):
                    problems.append(f"monotonicity: N({fmt_bits(sigma[:k])}) vs N({fmt_bits(sigma)}) at stage {s}")
        prev = row
    return problems


def check_infsd_machine(machine: InfSDMachine, depth: int, n_max: int) -> list[str]:
    """Conditions (a) and (b) on the grid, plus the alive-extension consequence."""
    problems = []
    table = {}
    for sigma in strings_up_to(depth):
        table[sigma] = [machine.eval(sigma, n) for n in range(n_max + 1)]
    for sigma, row in table.items():
        # consecutive sections suffice: definedness and prefix order are transitive
        for m in range(1, n_max + 1):
            if row[m] is not None and (row[m - 1] is None or not row[m].startswith(row[m - 1])):
                problems.append(f"condition (a): M({fmt_bits(sigma)}, {m - 1}) vs M({fmt_bits(sigma)}, {m})")
        if sigma:
            parent = table[sigma[:-1]]
            for n in range(n_max + 1):
                if parent[n] is not None and row[n] != parent[n]:
                    problems.append(f"condition (b): M({fmt_bits(sigma[:-1])}, {n}) not inherited by {fmt_bits(sigma)}")
    return problems
