"""Stage-indexed approximations of oracles and of sets of strings.

An oracle approximation maps a stage to a finite set of naturals.  A stagewise
set maps a stage to a finite set of strings.  Stage -1 is the empty set for
both, so "what changed at stage s" always makes sense.

Use convention: an enumeration with use ``u`` depends on the oracle segment
``A|u = {m in A : m < u}``.  Use 0 therefore means the oracle is ignored.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

from .bits import KraftChaitin, check_bits, strings_up_to

CE_MONOTONE = "ce-monotone"
KNOWN_LIMIT = "known-limit-toy"

SIGMA1 = "sigma1-monotone"
CANONICAL = "canonical-sigma2"
TOY = "toy-known-limit"


class StagewiseError(ValueError):
    pass


def restrict(a: Iterable[int], u: int) -> frozenset[int]:
    return frozenset(m for m in a if m < u)


# ---------------------------------------------------------------- oracles


class OracleApprox:
    kind: str = CE_MONOTONE
    known_limit: Optional[frozenset[int]] = None
    stabilization: Optional[int] = None

    def enumerate(self, stage: int) -> frozenset[int]:
        raise NotImplementedError

    def entered(self, stage: int) -> frozenset[int]:
        """Elements present at ``stage`` but not at ``stage - 1``."""
        return self.enumerate(stage) - self.enumerate(stage - 1)


class ScriptedOracle(OracleApprox):
    """Oracle given by a finite list of events.

    Each event is ``(element, start)`` or ``(element, start, end)``; the element
    is present at stages ``start <= s < end``.  Without any removals and without
    a declared limit the oracle is c.e.-monotone with an unknown limit; a
    declared ``limit`` makes it a known-limit toy whose limit is checked
    against the script.
    """

    def __init__(self, events: Sequence[Sequence[int]], limit: Optional[Iterable[int]] = None):
        parsed = []
        for ev in events:
            if len(ev) not in (2, 3):
                raise StagewiseError(f"oracle event must be [element, start] or [element, start, end]: {ev!r}")
            elem, start = int(ev[0]), int(ev[1])
            end = int(ev[2]) if len(ev) == 3 and ev[2] is not None else None
            if elem < 0 or start < 0 or (end is not None and end <= start):
                raise StagewiseError(f"bad oracle event {ev!r}")
            parsed.append((elem, start, end))
        self.events = tuple(parsed)
        stages = [st for _, st, _ in parsed] + [e for _, _, e in parsed if e is not None]
        self.stabilization = max(stages, default=0)
        script_limit = frozenset(e for e, _, end in parsed if end is None)
        has_removals = any(end is not None for _, _, end in parsed)
        if limit is not None:
            limit = frozenset(int(x) for x in limit)
            if limit != script_limit:
                raise StagewiseError(
                    f"declared limit {sorted(limit)} disagrees with the script's eventual set {sorted(script_limit)}"
                )
            self.kind = KNOWN_LIMIT
            self.known_limit = limit
        elif has_removals:
            # a finite script with removals is still a toy; its limit is what remains
            self.kind = KNOWN_LIMIT
            self.known_limit = script_limit
        else:
            self.kind = CE_MONOTONE
            self.known_limit = None

    def enumerate(self, stage: int) -> frozenset[int]:
        return frozenset(e for e, st, end in self.events if st <= stage and (end is None or stage < end))


class EmptyOracle(ScriptedOracle):
    def __init__(self):
        super().__init__([], limit=[])


# Micro-interpreter used as a stand-in for the halting problem.  Program e is
# the base-6 digit string of e (least significant digit first); each digit is
# one instruction acting on two counters A, B and a program counter.
_HALT, _INC_A, _INC_B, _DEC_A, _JZ_B, _JNZ_A = range(6)


def _program(e: int) -> list[int]:
    code = []
    while True:
        code.append(e % 6)
        e //= 6
        if e == 0:
            return code


def halts_within(e: int, steps: int) -> bool:
    """Run program ``e`` for at most ``steps`` steps.  Falling off the end of
    the program or executing the halt instruction counts as halting."""
    code = _program(e)
    a = b = pc = 0
    for _ in range(steps):
        if pc >= len(code):
            return True
        op = code[pc]
        if op == _HALT:
            return True
        if op == _INC_A:
            a += 1
            pc += 1
        elif op == _INC_B:
            b += 1
            pc += 1
        elif op == _DEC_A:
            a = max(0, a - 1)
            pc += 1
        elif op == _JZ_B:
            # jump back to the start while B is zero
            pc = 0 if b == 0 else pc + 1
        else:
            # loop to the start while A is non-zero, decrementing it
            if a:
                a -= 1
                pc = 0
            else:
                pc += 1
    return pc >= len(code)


class HaltingOracle(OracleApprox):
    """E(s) = {e < s : program e halts within s steps}.  c.e.-monotone, and its
    limit is deliberately not exposed."""

    kind = CE_MONOTONE
    known_limit = None

    def __init__(self):
        self._cache: dict[int, frozenset[int]] = {}
        self._lock = threading.Lock()

    def enumerate(self, stage: int) -> frozenset[int]:
        if stage <= 0:
            return frozenset()
        with self._lock:
            hit = self._cache.get(stage)
        if hit is not None:
            return hit
        result = frozenset(e for e in range(stage) if halts_within(e, stage))
        with self._lock:
            self._cache[stage] = result
        return result


def oracle_limit_stage(oracle: OracleApprox) -> Optional[int]:
    """Stage from which the oracle is known to equal its limit, if known."""
    if oracle.known_limit is None:
        return None
    return oracle.stabilization


def true_stages(oracle: OracleApprox, horizon: int) -> list[int]:
    """Stages ``s <= horizon`` at which some element ``n`` enters with the
    oracle already agreeing with its limit below ``n``."""
    if oracle.known_limit is None:
        raise StagewiseError("true stages need an oracle with a known limit")
    limit = oracle.known_limit
    out = []
    for s in range(horizon + 1):
        current = oracle.enumerate(s)
        for n in current - oracle.enumerate(s - 1):
            if restrict(current, n) == restrict(limit, n):
                out.append(s)
                break
    return out


# ---------------------------------------------------------------- c.e. operators


@dataclass(frozen=True)
class Axiom:
    string: str
    stage: int
    use: int
    segment: frozenset[int] = frozenset()

    def applies(self, oracle_set: frozenset[int], stage: int) -> bool:
        return self.stage <= stage and restrict(oracle_set, self.use) == self.segment


class CeOperator:
    """Scripted c.e. operator: a finite list of axioms.  An axiom enumerates
    its string from its stage on, for any oracle whose segment below the use
    equals the axiom's recorded segment."""

    def __init__(self, axioms: Iterable[Axiom | Sequence]):
        parsed = []
        for ax in axioms:
            if not isinstance(ax, Axiom):
                string, stage, use = ax[0], int(ax[1]), int(ax[2])
                segment = frozenset(int(m) for m in (ax[3] if len(ax) > 3 else ()))
                ax = Axiom(check_bits(string), stage, use, segment)
            if any(m >= ax.use for m in ax.segment):
                raise StagewiseError(f"axiom segment {sorted(ax.segment)} reaches past its use {ax.use}")
            parsed.append(ax)
        self.axioms = tuple(parsed)

    def enumerate(self, oracle_set: Iterable[int], stage: int) -> dict[str, int]:
        """Strings enumerated by stage ``stage`` with the least recorded use."""
        a = frozenset(oracle_set)
        out: dict[str, int] = {}
        for ax in self.axioms:
            if ax.applies(a, stage):
                prev = out.get(ax.string)
                out[ax.string] = ax.use if prev is None else min(prev, ax.use)
        return out

    def limit(self, oracle_set: Iterable[int]) -> frozenset[str]:
        a = frozenset(oracle_set)
        return frozenset(ax.string for ax in self.axioms if restrict(a, ax.use) == ax.segment)

    @property
    def last_stage(self) -> int:
        return max((ax.stage for ax in self.axioms), default=0)


# ---------------------------------------------------------------- stagewise sets


class StagewiseSet:
    """A computable stage-indexed family of finite string sets.

    ``limit`` is the eventual set when known.  ``settled_from`` is a stage
    from which ``at(s)`` is constant and equal to the limit (``None`` when
    unknown).  ``permanent_at(s)`` lists members known to stay in the set at
    every stage ``>= s``.
    """

    semantics: str = CANONICAL
    limit: Optional[frozenset[str]] = None
    settled_from: Optional[int] = None

    def at(self, stage: int) -> frozenset[str]:
        raise NotImplementedError

    def permanent_at(self, stage: int) -> frozenset[str]:
        if self.settled_from is not None and stage >= self.settled_from:
            return self.at(stage)
        return frozenset()

    def settled_by(self, stage: int) -> bool:
        return self.settled_from is not None and stage >= self.settled_from


class ScriptedSet(StagewiseSet):
    """Events ``(string, start)`` or ``(string, start, end)``; the string is a
    member at stages ``start <= s < end``.  The limit is the set of strings
    with an open-ended event."""

    def __init__(self, events: Iterable[Sequence], semantics: str = TOY):
        parsed = []
        for ev in events:
            if len(ev) not in (2, 3):
                raise StagewiseError(f"set event must be [string, start] or [string, start, end]: {ev!r}")
            s = check_bits(ev[0])
            start = int(ev[1])
            end = int(ev[2]) if len(ev) == 3 and ev[2] is not None else None
            if start < 0 or (end is not None and end <= start):
                raise StagewiseError(f"bad set event {ev!r}")
            parsed.append((s, start, end))
        if semantics == SIGMA1 and any(end is not None for _, _, end in parsed):
            raise StagewiseError("a sigma1-monotone set cannot remove strings")
        self.events = tuple(parsed)
        self.semantics = semantics
        self.limit = frozenset(s for s, _, end in parsed if end is None)
        marks = [st for _, st, _ in parsed] + [e for _, _, e in parsed if e is not None]
        self.settled_from = max(marks, default=0)

    def at(self, stage: int) -> frozenset[str]:
        return frozenset(s for s, st, end in self.events if st <= stage and (end is None or stage < end))

    def permanent_at(self, stage: int) -> frozenset[str]:
        # an open-ended event is permanent once it has started, provided no
        # other event for the same string could be the one that is live
        return frozenset(s for s, st, end in self.events if end is None and st <= stage)

    def max_length(self) -> int:
        return max((len(s) for s, _, _ in self.events), default=0)


def stable_set(strings: Iterable[str], from_stage: int = 0) -> ScriptedSet:
    return ScriptedSet([(s, from_stage) for s in strings])


class AllocationSet(StagewiseSet):
    """Grow-only set fed by Kraft-Chaitin requests ``(length, stage)``.

    The requests are answered in the order given; each allocated string is a
    member from its request stage on.  Because members never leave, the family
    is simultaneously Sigma^0_1-monotone and a canonical approximation of its
    union.
    """

    semantics = CANONICAL

    def __init__(self, requests: Iterable[Sequence[int]], allocator: Optional[KraftChaitin] = None,
                 reserved: Iterable[str] = ()):
        self.allocator = allocator if allocator is not None else KraftChaitin()
        entries = []
        last = -1
        for req in requests:
            length, stage = int(req[0]), int(req[1])
            if stage < last:
                raise StagewiseError("allocation requests must be given in stage order")
            last = stage
            entries.append((self.allocator.request(length), stage))
        self.entries = tuple(entries)
        self.reserved = frozenset(reserved)
        self.limit = frozenset(s for s, _ in entries) | self.reserved
        self.settled_from = max((st for _, st in entries), default=0)

    def at(self, stage: int) -> frozenset[str]:
        if stage < 0:
            return frozenset()
        return frozenset(s for s, st in self.entries if st <= stage) | self.reserved

    def permanent_at(self, stage: int) -> frozenset[str]:
        return self.at(stage)


class HatTrickSet(StagewiseSet):
    """V_s = the hat-trick restriction of W^{E(s)}_s."""

    semantics = CANONICAL

    def __init__(self, operator: CeOperator, oracle: OracleApprox):
        self.operator = operator
        self.oracle = oracle
        limit_stage = oracle_limit_stage(oracle)
        if limit_stage is not None:
            self.limit = operator.limit(oracle.known_limit)
            # after both scripts are exhausted the oracle no longer changes,
            # so nothing is suppressed and the applicable axioms are fixed
            self.settled_from = max(limit_stage, operator.last_stage) + 1
        else:
            self.limit = None
            self.settled_from = None
        self._cache: dict[int, frozenset[str]] = {}
        self._lock = threading.Lock()

    def at(self, stage: int) -> frozenset[str]:
        if stage < 0:
            return frozenset()
        with self._lock:
            hit = self._cache.get(stage)
        if hit is not None:
            return hit
        now = self.oracle.enumerate(stage)
        before = self.oracle.enumerate(stage - 1)
        members = set()
        for ax in self.operator.axioms:
            if ax.applies(now, stage) and restrict(now, ax.use) == restrict(before, ax.use):
                members.add(ax.string)
        result = frozenset(members)
        with self._lock:
            self._cache[stage] = result
        return result


class FunctionSet(StagewiseSet):
    """Wrap a plain function of the stage."""

    def __init__(self, fn: Callable[[int], Iterable[str]], semantics: str = CANONICAL,
                 limit: Optional[Iterable[str]] = None, settled_from: Optional[int] = None):
        self._fn = fn
        self.semantics = semantics
        self.limit = frozenset(limit) if limit is not None else None
        self.settled_from = settled_from

    def at(self, stage: int) -> frozenset[str]:
        if stage < 0:
            return frozenset()
        return frozenset(self._fn(stage))


def hat_trick(operator: CeOperator, oracle: OracleApprox) -> HatTrickSet:
    return HatTrickSet(operator, oracle)


def upward_closure_at(v: StagewiseSet, stage: int, max_len: int) -> frozenset[str]:
    members = v.at(stage)
    if members and max(len(m) for m in members) > max_len:
        raise StagewiseError("max_len is shorter than a member of the set")
    out = set()
    for m in members:
        for tail in strings_up_to(max_len - len(m)):
            out.add(m + tail)
    return frozenset(out)


def check_monotone(v: StagewiseSet, horizon: int) -> Optional[int]:
    """First stage ``s < horizon`` with ``at(s)`` not contained in ``at(s+1)``."""
    prev = v.at(0)
    for s in range(horizon):
        nxt = v.at(s + 1)
        if not prev <= nxt:
            return s
        prev = nxt
    return None
