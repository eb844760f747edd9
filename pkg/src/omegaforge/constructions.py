"""Machine builders.

* ``tot_machine_from_sigma2`` / ``monotone_from_tot``: totality of M(X) (and
  infinitude of N(X)) exactly when X avoids a Sigma^0_2 set of strings.
* ``prescribed_tot_machine`` / ``prescribed_universal_tot``: totality
  probability equal to a prescribed right-c.e. style target.
* ``cof_machine_from_sigma3``: movable-marker construction, cofinite domain
  exactly on a Sigma^0_3 region, with settled markers encoding oracle entries.
* ``prescribed_cof_machine`` / ``prescribed_com_machine``.
* ``infsd_from_sigma2`` / ``prescribed_domain_infsd``: infinitary
  self-delimiting machines whose domain is a prescribed open set.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Optional, Sequence

from .bits import (
    Dyadic,
    KraftChaitin,
    binary_digits,
    check_bits,
    compatible,
    fmt_bits,
    has_prefix_in,
)
from .machines import (
    IDENTITY,
    InfSDMachine,
    MachineError,
    MonotoneMachine,
    SplicedMachine,
    StagedOracleMachine,
    combine_children,
    splice,
)
from .stagewise import (
    CANONICAL,
    SIGMA1,
    TOY,
    AllocationSet,
    HaltingOracle,
    OracleApprox,
    StagewiseSet,
)

ASCENDING = "ascending"
DESCENDING = "descending"
C_SCAN_BOUND = 32


class ConstructionError(ValueError):
    """A builder's precondition does not hold."""


class HeadroomError(ConstructionError):
    pass


class FamilyContractError(ConstructionError):
    pass


def _require_canonical(v: StagewiseSet) -> None:
    if v.semantics not in (CANONICAL, SIGMA1, TOY):
        raise ConstructionError(f"expected a canonical Sigma^0_2 approximation, got semantics {v.semantics!r}")


def _first_divergence(sigma: str, rho: str) -> str:
    """The shortest prefix of sigma that is incompatible with rho."""
    for k in range(min(len(sigma), len(rho))):
        if sigma[k] != rho[k]:
            return sigma[: k + 1]
    raise ValueError("strings are compatible")


# ---------------------------------------------------------------- totality


class TotMachine(StagedOracleMachine):
    """At stage s+1 define M(sigma, |sigma|) = 0 for every sigma with
    |sigma| <= s that has no prefix in V_{s+1}.

    With ``rho`` set the machine is undefined on every string compatible with
    rho.  To keep totality intact for reals that leave rho at some bit, the
    values M(tau, i) for i below the length of the divergence point d are
    defined on every tau extending d, at the stage where M(d, |d|) is defined.
    """

    use_policy = IDENTITY

    def __init__(self, v: StagewiseSet, rho: Optional[str] = None):
        _require_canonical(v)
        self.v = v
        self.rho = check_bits(rho) if rho is not None else None
        self._memo: dict[str, tuple[Optional[int], int]] = {}
        self._lock = threading.Lock()

    def defined_stage(self, sigma: str, stage: int) -> Optional[int]:
        """Stage at which M(sigma, |sigma|) was defined, if by ``stage``."""
        with self._lock:
            found, scanned = self._memo.get(sigma, (None, len(sigma)))
        if found is not None:
            return found if found <= stage else None
        t = scanned + 1
        while t <= stage:
            members = self.v.at(t)
            if not any(sigma[:k] in members for k in range(len(sigma) + 1)):
                found = t
                break
            t += 1
        with self._lock:
            self._memo[sigma] = (found, t - 1 if found is None else found)
        return found

    def eval(self, sigma, n, stage):
        if self.rho is not None:
            if compatible(sigma, self.rho):
                return None
            div = _first_divergence(sigma, self.rho)
            if n < len(div):
                return 0 if self.defined_stage(div, stage) is not None else None
        if len(sigma) < n:
            return None
        return 0 if self.defined_stage(sigma[:n], stage) is not None else None

    def certifies(self, tag):
        return tag in ("TOT", "INF-domain")

    def _leaf(self, tau: str, stage: int):
        if has_prefix_in(tau, self.v.permanent_at(stage)):
            return False
        if self.v.settled_by(stage):
            if not any(compatible(tau, g) for g in self.v.at(stage)):
                return True
        return None

    def certificate(self, tag, tau, stage, n_max):
        if tag not in ("TOT", "INF-domain"):
            return None
        rho = self.rho
        if rho is None:
            return self._leaf(tau, stage)

        def leaf(t):
            if t.startswith(rho):
                return False
            if rho.startswith(t):
                return ...
            return self._leaf(t, stage)

        return combine_children(tau, len(rho), leaf)


def tot_machine_from_sigma2(v: StagewiseSet) -> TotMachine:
    return TotMachine(v)


class MonotoneFromTot(MonotoneMachine):
    """N(sigma) = 0^|sigma| once M(sigma, i) is defined for every i < |sigma|."""

    def __init__(self, base: StagedOracleMachine):
        if base.use_policy != IDENTITY:
            raise ConstructionError("the monotone derivation needs an identity-use oracle machine")
        self.base = base

    def eval(self, sigma, stage):
        for i in range(len(sigma)):
            if self.base.eval(sigma, i, stage) is None:
                return None
        return "0" * len(sigma)

    def certifies(self, tag):
        return tag in ("INF-output", "FIN-output") and self.base.certifies("TOT")

    def certificate(self, tag, tau, stage, n_max):
        verdict = self.base.certificate("TOT", tau, stage, n_max)
        if verdict is None or tag not in ("INF-output", "FIN-output"):
            return None
        return verdict if tag == "INF-output" else not verdict


def monotone_from_tot(base: StagedOracleMachine) -> MonotoneFromTot:
    return MonotoneFromTot(base)


# ---------------------------------------------------------------- prescribed targets


@dataclass
class PrescribedTarget:
    """A stage-indexed approximation ``values`` to a target real, monotone in
    ``direction``; ``c`` fixes the reserved interval 2^-c.  Non-dyadic values
    are truncated to ``precision`` binary places when turned into requests."""

    values: list[Fraction]
    direction: str
    c: int
    precision: int = 64

    def __post_init__(self):
        self.values = [Fraction(v) for v in self.values]
        if not self.values:
            raise ConstructionError("target needs at least one approximation value")
        if self.direction not in (ASCENDING, DESCENDING):
            raise ConstructionError(f"unknown direction {self.direction!r}")
        if not isinstance(self.c, int) or self.c < 1:
            raise ConstructionError("c must be a positive integer")
        for a, b in zip(self.values, self.values[1:]):
            if (self.direction == ASCENDING and b < a) or (self.direction == DESCENDING and b > a):
                raise ConstructionError(f"approximation is not {self.direction}: {a} then {b}")
        for v in self.values:
            if v < 0 or v >= 1:
                raise ConstructionError(f"target value {v} outside [0, 1)")

    @property
    def headroom(self) -> Fraction:
        return Fraction(1, 2 ** self.c)

    @property
    def final(self) -> Fraction:
        return self.values[-1]


def _truncate(q: Fraction, precision: int) -> Fraction:
    return Fraction((q.numerator << precision) // q.denominator, 1 << precision)


def requests_for(goals: Sequence[Fraction], precision: int) -> list[tuple[int, int]]:
    """Kraft-Chaitin requests (length, stage) whose running sum tracks an
    ascending sequence of goals, truncated to ``precision`` places."""
    out = []
    prev = Fraction(0)
    for stage, g in enumerate(goals):
        g = _truncate(g, precision)
        if g < prev:
            raise ConstructionError("goal sequence must be ascending")
        for b in binary_digits(g - prev):
            out.append((b, stage))
        prev = g
    return out


@dataclass
class Allocation:
    rho: str
    entries: tuple[tuple[str, int], ...]

    def to_json(self) -> dict:
        return {"rho": fmt_bits(self.rho), "strings": [[fmt_bits(s), st] for s, st in self.entries]}


def _allocate(c: int, goals: Sequence[Fraction], precision: int,
              keep_rho: bool = False) -> tuple[str, AllocationSet]:
    kc = KraftChaitin()
    rho = kc.request(c)
    s = AllocationSet(requests_for(goals, precision), allocator=kc, reserved=[rho] if keep_rho else ())
    return rho, s


def prescribed_tot_machine(target: PrescribedTarget) -> tuple[TotMachine, str]:
    if target.direction != DESCENDING:
        raise ConstructionError("the totality builder needs a descending target")
    for v in target.values:
        if v + target.headroom >= 1:
            raise HeadroomError(f"alpha + 2^-c = {v + target.headroom} is not below 1")
    complement = [1 - v - target.headroom for v in target.values]
    # rho sits in the approximation from stage 0 on, so nothing extending it
    # is ever defined
    rho, alloc = _allocate(target.c, complement, target.precision, keep_rho=True)
    machine = TotMachine(alloc, rho=rho)
    machine.allocation = Allocation(rho, alloc.entries)
    return machine, rho


@dataclass
class UniversalTotBuild:
    machine: SplicedMachine
    rho: str
    c: int
    beta: list[Fraction]
    inner: TotMachine


def admissible_c(alpha: Sequence[Fraction], gamma: Sequence[Fraction], c: int) -> Optional[list[Fraction]]:
    h = Fraction(1, 2 ** c)
    beta = [a - h * g for a, g in zip(alpha, gamma)]
    if any(b < 0 or b + h >= 1 for b in beta):
        return None
    if any(y > x for x, y in zip(beta, beta[1:])):
        return None
    return beta


def prescribed_universal_tot(target: PrescribedTarget, v: StagedOracleMachine,
                             gamma: Sequence[Fraction], c: Optional[int] = None) -> UniversalTotBuild:
    alpha = list(target.values)
    gamma = [Fraction(g) for g in gamma] or [Fraction(0)]
    if len(gamma) < len(alpha):
        gamma = gamma + [gamma[-1]] * (len(alpha) - len(gamma))
    elif len(alpha) < len(gamma):
        alpha = alpha + [alpha[-1]] * (len(gamma) - len(alpha))
    candidates = [c] if c is not None else range(1, C_SCAN_BOUND + 1)
    for cc in candidates:
        beta = admissible_c(alpha, gamma, cc)
        if beta is None:
            continue
        inner, rho = prescribed_tot_machine(PrescribedTarget(beta, DESCENDING, cc, target.precision))
        return UniversalTotBuild(SplicedMachine(v, inner, rho), rho, cc, beta, inner)
    if c is not None:
        raise ConstructionError(f"c = {c} is not admissible for this target")
    raise ConstructionError(f"no admissible c in [1, {C_SCAN_BOUND}]")


# ---------------------------------------------------------------- column pairing


class ColumnPairing:
    """Bijection (sigma, k) -> N.  Pairs are ordered by |sigma| + k, then by
    sigma in lexicographic order (a prefix before its extensions)."""

    @staticmethod
    def _offset(d: int) -> int:
        # number of pairs on diagonals 0..d-1
        return (1 << (d + 1)) - 2 - d

    def pair(self, sigma: str, k: int) -> int:
        d = len(sigma) + k
        rank = len(sigma)
        for i, b in enumerate(sigma, start=1):
            if b == "1":
                rank += (1 << (d - i + 1)) - 1
        return self._offset(d) + rank

    def unpair(self, n: int) -> tuple[str, int]:
        if n < 0:
            raise ValueError("negative code")
        d = 0
        while self._offset(d + 1) <= n:
            d += 1
        rank = n - self._offset(d)
        sigma = ""
        while rank:
            rank -= 1
            left = (1 << (d - len(sigma))) - 1
            if rank < left:
                sigma += "0"
            else:
                rank -= left
                sigma += "1"
        return sigma, d - len(sigma)


# ---------------------------------------------------------------- stage families


class StageFamily:
    """Cells (t, sigma) with element counts growing over stages.

    ``region(tau, stage)`` reports whether reals extending tau have all large
    enough cells (t, X|t) growing forever: True, False or None (unknown).
    """

    def count(self, t: int, sigma: str, stage: int) -> int:
        raise NotImplementedError

    def grew(self, t: int, sigma: str, stage: int) -> bool:
        return stage > 0 and self.count(t, sigma, stage) > self.count(t, sigma, stage - 1)

    def region(self, tau: str, stage: int) -> Optional[bool]:
        return None


class MonotoneStageFamily(StageFamily):
    """Scripted family.  ``infinite`` rules ``(prefix, min_t, from_stage)``
    make cell (t, sigma) grow at every stage >= from_stage when sigma extends
    prefix and t >= min_t.  ``bursts`` ``(t, sigma, stage)`` add one element
    to a single cell."""

    def __init__(self, infinite: Iterable[Sequence] = (), bursts: Iterable[Sequence] = ()):
        self.infinite = tuple((check_bits(p), int(t), int(s)) for p, t, s in infinite)
        self.bursts = tuple((int(t), check_bits(sig), int(s)) for t, sig, s in bursts)
        for p, t, s in self.infinite:
            if t < 0 or s < 0:
                raise FamilyContractError(f"bad rule {p!r}, {t}, {s}")
        for t, sig, s in self.bursts:
            if t < 0 or s < 0:
                raise FamilyContractError(f"bad burst {t}, {sig!r}, {s}")

    def count(self, t, sigma, stage):
        total = 0
        for p, min_t, start in self.infinite:
            if t >= min_t and sigma.startswith(p) and stage >= start:
                total += stage - start + 1
        for bt, bs, st in self.bursts:
            if bt == t and bs == sigma and st <= stage:
                total += 1
        return total

    def region(self, tau, stage):
        prefixes = [p for p, _, _ in self.infinite]
        if has_prefix_in(tau, prefixes):
            return True
        if not any(p.startswith(tau) for p in prefixes):
            return False
        return None


class FunctionFamily(StageFamily):
    def __init__(self, count_fn: Callable[[int, str, int], int],
                 region_fn: Optional[Callable[[str, int], Optional[bool]]] = None):
        self._count = count_fn
        self._region = region_fn

    def count(self, t, sigma, stage):
        return self._count(t, sigma, stage)

    def region(self, tau, stage):
        return self._region(tau, stage) if self._region else None


class AllocationFamily(StageFamily):
    """Cell (t, sigma) grows at every stage from the stage at which some
    prefix of sigma was allocated.  Its region is the upward closure of the
    allocated set."""

    def __init__(self, alloc: AllocationSet):
        self.alloc = alloc
        self._first = {}
        for s, st in alloc.entries:
            self._first[s] = min(st, self._first.get(s, st))

    def _start(self, sigma: str) -> Optional[int]:
        hits = [self._first[sigma[:k]] for k in range(len(sigma) + 1) if sigma[:k] in self._first]
        return min(hits) if hits else None

    def count(self, t, sigma, stage):
        start = self._start(sigma)
        if start is None or stage < start:
            return 0
        return stage - start + 1

    def region(self, tau, stage):
        if has_prefix_in(tau, self.alloc.at(stage)):
            return True
        if self.alloc.settled_by(stage) and not any(compatible(tau, g) for g in self.alloc.at(stage)):
            return False
        return None


def check_family(family: StageFamily, depth: int, horizon: int) -> None:
    from .bits import strings_up_to

    for sigma in strings_up_to(depth):
        for t in range(depth + 1):
            prev = family.count(t, sigma, 0)
            for s in range(1, horizon + 1):
                cur = family.count(t, sigma, s)
                if cur < prev:
                    raise FamilyContractError(
                        f"count of cell ({t}, {fmt_bits(sigma)}) decreased at stage {s}"
                    )
                prev = cur


# ---------------------------------------------------------------- marker construction


class MarkerMachine(StagedOracleMachine):
    """Movable-marker machine.

    Column sigma holds the codes <sigma, k>.  At stage s the marker of sigma
    sits at column index m(sigma)[s]; it starts at 0 and jumps to s when the
    cell (|sigma|, sigma) grows or when |sigma| enters the oracle at stage s.
    For sigma of length <= s, M(sigma, <sigma, k>) = <sigma, k> for every
    k <= s other than the marker.  Codes from columns incompatible with the
    oracle string are always defined (once in the window), so the only holes
    in M(X) are markers along X.
    """

    use_policy = IDENTITY

    def __init__(self, family: StageFamily, oracle: OracleApprox, rho: Optional[str] = None,
                 pairing: Optional[ColumnPairing] = None, com_certified: bool = False):
        self.family = family
        self.oracle = oracle
        self.rho = check_bits(rho) if rho is not None else None
        self.pairing = pairing or ColumnPairing()
        self.com_certified = com_certified
        self._markers: dict[str, list[int]] = {}
        self._lock = threading.Lock()

    def marker_index(self, sigma: str, stage: int) -> int:
        with self._lock:
            hist = self._markers.setdefault(sigma, [0])
            u = len(hist)
            while u <= stage:
                moved = self.family.grew(len(sigma), sigma, u) or len(sigma) in self.oracle.entered(u)
                hist.append(u if moved else hist[-1])
                u += 1
            return hist[stage]

    def marker_history(self, sigma: str, stage: int) -> list[int]:
        self.marker_index(sigma, stage)
        with self._lock:
            return list(self._markers[sigma][: stage + 1])

    def hole_position(self, sigma: str, stage: int) -> int:
        return self.pairing.pair(sigma, self.marker_index(sigma, stage))

    def eval(self, sigma, n, stage):
        if self.rho is not None and compatible(sigma, self.rho):
            return None
        col, k = self.pairing.unpair(n)
        if len(col) > stage or k > stage:
            return None
        if not compatible(col, sigma):
            return n
        if len(sigma) < len(col):
            return None
        return None if k == self.marker_index(col, stage) else n

    def certifies(self, tag):
        return tag == "COF-domain" or (tag == "COM-domain" and self.com_certified)

    def certificate(self, tag, tau, stage, n_max):
        if not self.certifies(tag):
            return None
        rho = self.rho

        def leaf(t):
            if rho is not None:
                if t.startswith(rho):
                    # the empty function: coinfinite but computable domain
                    return tag == "COM-domain"
                if rho.startswith(t):
                    return ...
            return self.family.region(t, stage)

        return combine_children(tau, len(rho) if rho else 0, leaf)


def cof_machine_from_sigma3(family: StageFamily, oracle: OracleApprox, rho: Optional[str] = None,
                            pairing: Optional[ColumnPairing] = None, check_depth: int = 4,
                            check_horizon: int = 24) -> MarkerMachine:
    check_family(family, check_depth, check_horizon)
    com = isinstance(oracle, HaltingOracle)
    return MarkerMachine(family, oracle, rho=rho, pairing=pairing, com_certified=com)


def _ascending_headroom(target: PrescribedTarget) -> None:
    if target.direction != ASCENDING:
        raise ConstructionError("this builder needs an ascending target")


def prescribed_cof_machine(target: PrescribedTarget, oracle: Optional[OracleApprox] = None
                           ) -> tuple[MarkerMachine, str]:
    _ascending_headroom(target)
    for v in target.values:
        if v + target.headroom >= 1:
            raise HeadroomError(f"alpha + 2^-c = {v + target.headroom} is not below 1")
    rho, alloc = _allocate(target.c, target.values, target.precision)
    oracle = oracle if oracle is not None else HaltingOracle()
    machine = cof_machine_from_sigma3(AllocationFamily(alloc), oracle, rho=rho)
    machine.allocation = Allocation(rho, alloc.entries)
    return machine, rho


def prescribed_com_machine(target: PrescribedTarget, oracle: Optional[OracleApprox] = None
                           ) -> tuple[MarkerMachine, str]:
    _ascending_headroom(target)
    for v in target.values:
        if v < target.headroom:
            raise HeadroomError(f"alpha = {v} is below 2^-c = {target.headroom}")
    goals = [v - target.headroom for v in target.values]
    rho, alloc = _allocate(target.c, goals, target.precision)
    oracle = oracle if oracle is not None else HaltingOracle()
    machine = cof_machine_from_sigma3(AllocationFamily(alloc), oracle, rho=rho)
    machine.allocation = Allocation(rho, alloc.entries)
    return machine, rho


# ---------------------------------------------------------------- infinitary machines


class InfSDFromSigma2(InfSDMachine):
    """M(sigma, 0) is the empty string for every sigma.  For n >= 1,
    M(sigma, n) is defined (with empty output) iff every stage t with
    |sigma| <= t <= n sees a prefix of sigma in V_t.  The machine never
    prints anything."""

    def __init__(self, v: StagewiseSet, rho: Optional[str] = None):
        _require_canonical(v)
        self.v = v
        self.rho = check_bits(rho) if rho is not None else None
        self._gap: dict[str, tuple[Optional[int], int]] = {}
        self._lock = threading.Lock()

    def first_gap(self, sigma: str, horizon: int) -> Optional[int]:
        """Least t in [|sigma|, horizon] with no prefix of sigma in V_t."""
        with self._lock:
            gap, scanned = self._gap.get(sigma, (None, len(sigma) - 1))
        if gap is not None:
            return gap if gap <= horizon else None
        t = scanned + 1
        while t <= horizon:
            members = self.v.at(t)
            if not any(sigma[:k] in members for k in range(len(sigma) + 1)):
                gap = t
                break
            t += 1
        with self._lock:
            self._gap[sigma] = (gap, t - 1 if gap is None else gap)
        return gap

    def eval(self, sigma, n):
        if n == 0 or n < len(sigma):
            return ""
        return "" if self.first_gap(sigma, n) is None else None

    def certifies(self, tag):
        return tag in ("DOM-infsd", "FIN-infsd", "INF-infsd")

    def certificate(self, tag, tau, stage, n_max):
        if tag == "INF-infsd":
            return False
        if tag not in ("DOM-infsd", "FIN-infsd"):
            return None
        if has_prefix_in(tau, self.v.permanent_at(stage)):
            return True
        if self.v.settled_by(stage) and not any(compatible(tau, g) for g in self.v.at(stage)):
            return False
        return None


def infsd_from_sigma2(v: StagewiseSet) -> InfSDFromSigma2:
    return InfSDFromSigma2(v)


def prescribed_domain_infsd(target: PrescribedTarget) -> tuple[InfSDFromSigma2, str]:
    _ascending_headroom(target)
    for v in target.values:
        if target.headroom >= 1 - v:
            raise HeadroomError(f"2^-c = {target.headroom} is not below 1 - alpha = {1 - v}")
    rho, alloc = _allocate(target.c, target.values, target.precision)
    machine = InfSDFromSigma2(alloc, rho=rho)
    machine.allocation = Allocation(rho, alloc.entries)
    return machine, rho
