"""Exact arithmetic: reduced rationals, rational angles, Niven classification, p-adics.

Everything here is integer/rational arithmetic. No floats enter any result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

# Python's Fraction is already an arbitrary-precision, always-reduced rational
# with a positive denominator, which is exactly the contract needed here.
Rational = Fraction

INFINITY = math.inf


def as_rational(value: Union[int, str, Fraction]) -> Fraction:
    """Coerce ints, Fractions and "num/den" strings to a reduced Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return parse_rational(value)
    raise TypeError(f"cannot build an exact rational from {type(value).__name__}")


def format_rational(r: Fraction) -> str:
    """Serialize as "num/den" text; integers keep an explicit "/1"."""
    r = Fraction(r)
    return f"{r.numerator}/{r.denominator}"


def parse_rational(text: str) -> Fraction:
    text = text.strip()
    if "/" in text:
        num, den = text.split("/", 1)
        den_i = int(den)
        if den_i == 0:
            raise ValueError(f"zero denominator in {text!r}")
        return Fraction(int(num), den_i)
    if any(c in text for c in ".eE"):
        raise ValueError(f"{text!r} is not an exact rational; write it as num/den")
    return Fraction(int(text))


@dataclass(frozen=True, order=True)
class RationalAngle:
    """An angle stored as an exact fraction of a full turn, reduced into [0, 1)."""

    turns: Fraction

    def __post_init__(self) -> None:
        t = as_rational(self.turns)
        object.__setattr__(self, "turns", t - math.floor(t))

    @classmethod
    def from_degrees(cls, degrees: Union[int, Fraction]) -> RationalAngle:
        return cls(Fraction(degrees) / 360)

    @classmethod
    def parse(cls, text: str) -> RationalAngle:
        text = text.strip()
        if text.endswith("turns"):
            text = text[: -len("turns")]
        return cls(parse_rational(text))

    def __add__(self, other: RationalAngle) -> RationalAngle:
        return RationalAngle(self.turns + other.turns)

    def __neg__(self) -> RationalAngle:
        return RationalAngle(-self.turns)

    def __mul__(self, k: int) -> RationalAngle:
        if not isinstance(k, int):
            return NotImplemented
        return RationalAngle(self.turns * k)

    __rmul__ = __mul__

    @property
    def degrees(self) -> Fraction:
        return self.turns * 360

    def __str__(self) -> str:
        return f"{self.turns.numerator}/{self.turns.denominator} turns"


@dataclass(frozen=True)
class RationalValue:
    value: Fraction


class Irrational:
    """Marker for a cosine that is provably irrational."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "IRRATIONAL"


IRRATIONAL = Irrational()
CosClass = Union[RationalValue, Irrational]

# cos(2*pi*nu) for the only reduced nu in [0, 1) where it is rational.
_NIVEN_TABLE = {
    Fraction(0): Fraction(1),
    Fraction(1, 2): Fraction(-1),
    Fraction(1, 4): Fraction(0),
    Fraction(3, 4): Fraction(0),
    Fraction(1, 6): Fraction(1, 2),
    Fraction(5, 6): Fraction(1, 2),
    Fraction(1, 3): Fraction(-1, 2),
    Fraction(2, 3): Fraction(-1, 2),
}


def niven_classify(angle: RationalAngle) -> CosClass:
    """Classify cos(2*pi*turns) as an exact rational or as irrational.

    By Niven's theorem cos is rational at a rational multiple of a full turn
    only at the eight table entries, so a lookup is total and exact.

    >>> niven_classify(RationalAngle(Fraction(1, 6)))
    RationalValue(value=Fraction(1, 2))
    >>> niven_classify(RationalAngle(Fraction(1, 8)))
    IRRATIONAL
    """
    v = _NIVEN_TABLE.get(angle.turns)
    return IRRATIONAL if v is None else RationalValue(v)


def is_exceptional(angle: RationalAngle) -> bool:
    """True when cos(2*angle) is rational, i.e. the angle is a multiple of 30 or 45 degrees."""
    return isinstance(niven_classify(angle * 2), RationalValue)


# -- primes and p-adics -------------------------------------------------------

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)


def is_prime(n: int) -> bool:
    """Deterministic primality test (Miller-Rabin, exact for n < 3.3e24)."""
    if n < 2:
        return False
    for q in _MR_BASES:
        if n % q == 0:
            return n == q
    if n < 41 * 41:
        return True
    if n >= 3_317_044_064_679_887_385_961_981:
        raise ValueError("primality test is only certified below 3.3e24")
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


@dataclass(frozen=True)
class PrimeModulus:
    p: int

    def __post_init__(self) -> None:
        if not isinstance(self.p, int) or isinstance(self.p, bool):
            raise TypeError("p must be an integer")
        if self.p < 3 or not is_prime(self.p):
            raise ValueError(f"p must be prime and >= 3, got {self.p}")

    def __int__(self) -> int:
        return self.p


def _as_p(p: Union[int, PrimeModulus]) -> int:
    # p-adic helpers accept any prime, including 2
    if isinstance(p, PrimeModulus):
        return p.p
    if not isinstance(p, int) or not is_prime(p):
        raise ValueError(f"p must be prime, got {p}")
    return p


def padic_valuation(n: int, p: Union[int, PrimeModulus]) -> Union[int, float]:
    """Largest k with p**k dividing n; ``INFINITY`` for n == 0."""
    q = _as_p(p)
    if n == 0:
        return INFINITY
    n = abs(n)
    k = 0
    while n % q == 0:
        n //= q
        k += 1
    return k


def padic_distance(a: int, b: int, p: Union[int, PrimeModulus]) -> Fraction:
    q = _as_p(p)
    v = padic_valuation(a - b, q)
    if v == INFINITY:
        return Fraction(0)
    return Fraction(1, q**v)


def padic_norm(r: Fraction, p: Union[int, PrimeModulus]) -> Fraction:
    """|r|_p for a rational r, via the valuations of numerator and denominator."""
    q = _as_p(p)
    r = Fraction(r)
    if r == 0:
        return Fraction(0)
    v = padic_valuation(r.numerator, q) - padic_valuation(r.denominator, q)
    return Fraction(q) ** (-v)


# -- rational approximation ---------------------------------------------------

def continued_fraction(x: Fraction, max_terms: int | None = None) -> list[int]:
    """Partial quotients of a rational, finite by construction."""
    terms = []
    num, den = x.numerator, x.denominator
    while den and (max_terms is None or len(terms) < max_terms):
        a, r = divmod(num, den)
        terms.append(a)
        num, den = den, r
    return terms


def convergents(x: Fraction, max_den: int):
    """Yield convergents h/k of x in order while k <= max_den."""
    h0, h1 = 0, 1
    k0, k1 = 1, 0
    num, den = x.numerator, x.denominator
    while den:
        a, r = divmod(num, den)
        h0, h1 = h1, a * h1 + h0
        k0, k1 = k1, a * k1 + k0
        if k1 > max_den:
            return
        yield Fraction(h1, k1)
        num, den = den, r


def small_rational_near(x: Fraction, max_den: int, tol: Fraction) -> Fraction | None:
    """Return a rational with denominator <= max_den within tol of x, if one exists.

    Only convergents need checking whenever tol < 1/(2*max_den**2) (Legendre),
    which holds for every tolerance this package uses.
    """
    if tol * 2 * max_den * max_den >= 1:
        raise ValueError("tolerance too coarse for the convergent criterion")
    xn, xd = x.numerator, x.denominator
    tn, td = tol.numerator, tol.denominator
    h0, h1, k0, k1 = 0, 1, 1, 0
    num, den = xn, xd
    while den:
        a, r = divmod(num, den)
        h0, h1 = h1, a * h1 + h0
        k0, k1 = k1, a * k1 + k0
        if k1 > max_den:
            return None
        # |x - h/k| <= tol, cleared of denominators
        if abs(xn * k1 - h1 * xd) * td <= tn * xd * k1:
            return Fraction(h1, k1)
        num, den = den, r
    return None
