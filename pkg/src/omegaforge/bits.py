"""Finite binary strings, exact dyadic rationals, prefix-free sets and the
Kraft-Chaitin allocator.

Strings are plain ``str`` objects over the alphabet ``'0'``/``'1'``.  Python's
own string ordering is lexicographic with ties broken by length (a proper
prefix sorts first), which is the total order used throughout the package.
"""
from __future__ import annotations

import bisect
import itertools
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Iterator, Optional, Sequence

EMPTY_TOKEN = "ε"


class NotPrefixFreeError(ValueError):
    def __init__(self, shorter: str, longer: str):
        super().__init__(
            f"not prefix-free: {fmt_bits(shorter)} is a proper prefix of {fmt_bits(longer)}"
        )
        self.witness = (shorter, longer)


class BudgetExceededError(ValueError):
    """A Kraft-Chaitin request would push the running Kraft sum above 1."""

    def __init__(self, index: int, length: int, used: "Dyadic"):
        super().__init__(
            f"request {index} (length {length}) exceeds the Kraft budget: "
            f"{used} already allocated"
        )
        self.index = index
        self.length = length


def check_bits(s: str) -> str:
    if not isinstance(s, str) or s.strip("01"):
        raise ValueError(f"not a binary string: {s!r}")
    return s


def parse_bits(token: str) -> str:
    if token == EMPTY_TOKEN:
        return ""
    return check_bits(token)


def fmt_bits(s: str) -> str:
    return s if s else EMPTY_TOKEN


def is_prefix(a: str, b: str) -> bool:
    """True iff ``a`` is a (not necessarily proper) prefix of ``b``."""
    return b.startswith(a)


def compatible(a: str, b: str) -> bool:
    return a.startswith(b) or b.startswith(a)


def strings_of_length(n: int) -> Iterator[str]:
    if n == 0:
        yield ""
        return
    for t in itertools.product("01", repeat=n):
        yield "".join(t)


def strings_up_to(n: int) -> Iterator[str]:
    """All strings of length <= n, shortest first."""
    for k in range(n + 1):
        yield from strings_of_length(k)


def has_prefix_in(s: str, generators: Iterable[str]) -> bool:
    return any(s.startswith(g) for g in generators)


def minimal_elements(strings: Iterable[str]) -> frozenset[str]:
    """The prefix-minimal members; their cones cover the same open set."""
    out: list[str] = []
    for s in sorted(set(strings)):
        if not out or not s.startswith(out[-1]):
            out.append(s)
    return frozenset(out)


class Dyadic:
    """Exact rational with a power-of-two denominator.

    Stored as ``numerator / 2**exponent`` in canonical form: the numerator is
    odd unless the exponent is zero.
    """

    __slots__ = ("numerator", "exponent")

    def __init__(self, numerator: int = 0, exponent: int = 0):
        if exponent < 0:
            numerator <<= -exponent
            exponent = 0
        if numerator == 0:
            exponent = 0
        else:
            tz = (numerator & -numerator).bit_length() - 1
            shift = min(tz, exponent)
            numerator >>= shift
            exponent -= shift
        object.__setattr__(self, "numerator", numerator)
        object.__setattr__(self, "exponent", exponent)

    def __setattr__(self, name, value):
        raise AttributeError("Dyadic is immutable")

    @classmethod
    def half_pow(cls, k: int) -> "Dyadic":
        """2**-k."""
        return cls(1, k)

    @classmethod
    def from_rational(cls, q) -> "Dyadic":
        if isinstance(q, Dyadic):
            return q
        q = Fraction(q)
        den = q.denominator
        if den & (den - 1):
            raise ValueError(f"{q} is not dyadic")
        return cls(q.numerator, den.bit_length() - 1)

    def to_fraction(self) -> Fraction:
        return Fraction(self.numerator, 1 << self.exponent)

    @staticmethod
    def _coerce(other) -> Optional["Dyadic"]:
        if isinstance(other, Dyadic):
            return other
        if isinstance(other, int):
            return Dyadic(other, 0)
        if isinstance(other, Rational):
            try:
                return Dyadic.from_rational(other)
            except ValueError:
                return None
        return None

    def _align(self, other: "Dyadic") -> tuple[int, int, int]:
        e = max(self.exponent, other.exponent)
        return self.numerator << (e - self.exponent), other.numerator << (e - other.exponent), e

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        a, b, e = self._align(o)
        return Dyadic(a + b, e)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        a, b, e = self._align(o)
        return Dyadic(a - b, e)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o - self

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return Dyadic(self.numerator * o.numerator, self.exponent + o.exponent)

    __rmul__ = __mul__

    def __neg__(self):
        return Dyadic(-self.numerator, self.exponent)

    def __abs__(self):
        return Dyadic(abs(self.numerator), self.exponent)

    def _cmp_key(self, other):
        if isinstance(other, (Dyadic, int)):
            o = self._coerce(other)
            a, b, _ = self._align(o)
            return a, b
        if isinstance(other, Rational):
            return self.to_fraction(), Fraction(other)
        return None

    def __eq__(self, other):
        k = self._cmp_key(other)
        return NotImplemented if k is None else k[0] == k[1]

    def __lt__(self, other):
        k = self._cmp_key(other)
        return NotImplemented if k is None else k[0] < k[1]

    def __le__(self, other):
        k = self._cmp_key(other)
        return NotImplemented if k is None else k[0] <= k[1]

    def __gt__(self, other):
        k = self._cmp_key(other)
        return NotImplemented if k is None else k[0] > k[1]

    def __ge__(self, other):
        k = self._cmp_key(other)
        return NotImplemented if k is None else k[0] >= k[1]

    def __hash__(self):
        return hash(self.to_fraction())

    def __float__(self):
        return self.numerator / (1 << self.exponent)

    def __repr__(self):
        return f"Dyadic({self.numerator}, {self.exponent})"

    def __str__(self):
        if self.exponent == 0:
            return str(self.numerator)
        return f"{self.numerator}/{1 << self.exponent}"


ZERO = Dyadic(0)
ONE = Dyadic(1)


def check_prefix_free(strings: Iterable[str]) -> Optional[tuple[str, str]]:
    """Return ``None`` if prefix-free, else a pair (shorter, longer) with the
    first a proper prefix of the second."""
    ordered = sorted(set(strings))
    # in sorted order any extension of s comes right after s
    for a, b in zip(ordered, ordered[1:]):
        if b.startswith(a):
            return a, b
    return None


def measure_of(strings: Iterable[str]) -> Dyadic:
    """Measure of the open set generated by a prefix-free set of strings."""
    members = set(strings)
    witness = check_prefix_free(members)
    if witness is not None:
        raise NotPrefixFreeError(*witness)
    total = ZERO
    for s in members:
        total = total + Dyadic.half_pow(len(s))
    return total


def cone_measure(strings: Iterable[str]) -> Dyadic:
    """Measure of the union of cones, for an arbitrary (not necessarily
    prefix-free) set of strings."""
    return measure_of(minimal_elements(strings))


class KraftChaitin:
    """Online Kraft-Chaitin allocator.

    The free part of Cantor space is kept as a left-to-right list of disjoint
    basic intervals (strings).  Each request takes the leftmost free interval
    that is at least as large as the request and carves the request out of its
    left end; the remainder goes back into the free list.
    """

    def __init__(self):
        self._free: list[str] = [""]
        self.used = ZERO
        self.allocated: list[str] = []

    def request(self, length: int) -> str:
        index = len(self.allocated)
        if not isinstance(length, int) or length < 1:
            raise ValueError(f"request {index}: length must be a positive integer, got {length!r}")
        if self.used + Dyadic.half_pow(length) > ONE:
            raise BudgetExceededError(index, length, self.used)
        for i, block in enumerate(self._free):
            if len(block) <= length:
                break
        else:  # pragma: no cover - leftmost fit never fragments below budget
            raise RuntimeError(f"request {index}: no free interval of length <= {length}")
        del self._free[i]
        word = block + "0" * (length - len(block))
        for k in range(length - len(block)):
            bisect.insort(self._free, block + "0" * k + "1")
        self.used = self.used + Dyadic.half_pow(length)
        self.allocated.append(word)
        return word

    def free_blocks(self) -> tuple[str, ...]:
        return tuple(self._free)


def kraft_chaitin(lengths: Sequence[int]) -> list[str]:
    alloc = KraftChaitin()
    return [alloc.request(c) for c in lengths]


def binary_digits(q, max_exponent: Optional[int] = None) -> list[int]:
    """Exponents ``c`` with ``sum(2**-c) == q`` for a dyadic ``q`` in [0, 1].

    With ``max_exponent`` set, a non-dyadic ``q`` is truncated to that many
    binary places instead of raising.
    """
    q = Fraction(q)
    if q < 0 or q > 1:
        raise ValueError(f"{q} outside [0, 1]")
    if q == 1:
        return [1, 1]
    if max_exponent is not None:
        q = Fraction((q.numerator << max_exponent) // q.denominator, 1 << max_exponent)
    d = Dyadic.from_rational(q)
    return [d.exponent - i for i in range(d.exponent) if (d.numerator >> i) & 1][::-1]
