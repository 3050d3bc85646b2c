"""Discretised-Hilbert-space qubits as finite +/-1 bit strings.

A single qubit with prime p is a bit string of length 2p. The count of +1
entries is m1 (so cos^2(theta/2) = m1/2p) and the phase index n1 (phi/2pi =
n1/4p) acts by cyclic rotation of the string.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Union

import mpmath
import numpy as np

from .exactmath import PrimeModulus

STATS_DIGITS = 200


def _prime(p: Union[int, PrimeModulus]) -> PrimeModulus:
    return p if isinstance(p, PrimeModulus) else PrimeModulus(p)


def canonical_bits(length: int, plus: int) -> np.ndarray:
    bits = -np.ones(length, dtype=np.int8)
    bits[:plus] = 1
    return bits


@dataclass(frozen=True)
class QubitState:
    p: int
    m1: int
    n1: int

    def __post_init__(self) -> None:
        p = _prime(self.p).p
        object.__setattr__(self, "p", p)
        if not 0 <= self.m1 <= 2 * p:
            raise ValueError(f"m1 must lie in [0, {2 * p}], got {self.m1}")
        if not 0 <= self.n1 < 4 * p:
            raise ValueError(f"n1 must lie in [0, {4 * p}), got {self.n1}")

    @cached_property
    def bits(self) -> np.ndarray:
        b = np.roll(canonical_bits(2 * self.p, self.m1), self.n1 % (2 * self.p))
        b.setflags(write=False)
        return b

    @property
    def cos_theta(self) -> Fraction:
        return Fraction(self.m1, self.p) - 1

    @property
    def phase_turns(self) -> Fraction:
        return Fraction(self.n1, 4 * self.p)

    def to_json_obj(self) -> dict:
        return {"p": self.p, "m1": self.m1, "n1": self.n1}


def make_qubit(p: Union[int, PrimeModulus], m1: int, n1: int) -> QubitState:
    return QubitState(_prime(p).p, m1, n1)


def born_frequency(q: QubitState) -> Fraction:
    return Fraction(q.m1, 2 * q.p)


def phase_permute(q: QubitState, k: int) -> QubitState:
    """Rotate the bit string by k and advance the phase index by k.

    The bit string has period 2p while n1 has period 4p, so k = 2p returns
    the same bit string with phi advanced by pi.
    """
    return QubitState(q.p, q.m1, (q.n1 + k) % (4 * q.p))


def bits_to_csv(*rows: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for r in rows:
        w.writerow(int(v) for v in r)
    return buf.getvalue()


# -- uncertainty ---------------------------------------------------------------

def grid_mean_toward_zero(target: float, p: int) -> int:
    """Number of +1 entries in a length-2p string whose mean is ``target``
    rounded onto the grid k/p - 1, toward zero."""
    t = (target + 1.0) * p
    # snap float noise at exact grid points before truncating
    r = round(t)
    if abs(t - r) < 1e-9:
        return int(r)
    return math.floor(t) if target >= 0 else math.ceil(t)


@dataclass(frozen=True)
class SpinStats:
    """Spin-1/2 statistics of a bit-string state in units hbar = 1.

    ``mean_z`` is the +/-1 bit-string mean cos(theta); spin expectations are half
    of the bit-string values.
    """

    mean_z: Fraction
    mean_x: Fraction
    mean_y: Fraction
    std_x: mpmath.mpf
    std_y: mpmath.mpf
    product_lhs: mpmath.mpf
    bound_rhs: Fraction

    @property
    def holds(self) -> bool:
        # squared and cleared of the common 1/16: exact rational comparison
        return (1 - self.mean_x**2) * (1 - self.mean_y**2) >= self.mean_z**2


def _bit_string_std(mean: Fraction, dps: int) -> mpmath.mpf:
    # a +/-1 string has variance 1 - mean^2; spin units halve the deviation
    v = 1 - mean * mean
    with mpmath.workdps(dps):
        return mpmath.sqrt(mpmath.mpf(v.numerator) / v.denominator) / 2


def xy_ensembles(q: QubitState) -> tuple[np.ndarray, np.ndarray]:
    """The x and y measurement bit strings for a state.

    Their means are sin(theta)cos(phi) and sin(theta)sin(phi) truncated toward
    zero onto the k/p - 1 grid; truncation keeps the uncertainty bound exact.
    """
    p = q.p
    c = float(q.cos_theta)
    s = math.sqrt(max(0.0, 1.0 - c * c))
    phi = 2.0 * math.pi * q.n1 / (4 * p)
    kx = grid_mean_toward_zero(s * math.cos(phi), p)
    ky = grid_mean_toward_zero(s * math.sin(phi), p)
    return canonical_bits(2 * p, kx), canonical_bits(2 * p, ky)


def uncertainty_stats(q: QubitState, digits: int = STATS_DIGITS) -> SpinStats:
    bx, by = xy_ensembles(q)
    n = 2 * q.p
    mean_x = Fraction(int(bx.sum(dtype=np.int64)), n)
    mean_y = Fraction(int(by.sum(dtype=np.int64)), n)
    mean_z = Fraction(int(q.bits.sum(dtype=np.int64)), n)
    dps = digits + 10
    sx = _bit_string_std(mean_x, dps)
    sy = _bit_string_std(mean_y, dps)
    with mpmath.workdps(dps):
        lhs = sx * sy
    # (hbar/2)|<S_z>| with <S_z> = mean_z/2
    bound = abs(mean_z) / 4
    return SpinStats(mean_z, mean_x, mean_y, sx, sy, lhs, bound)


# -- singlet pairs ---------------------------------------------------------------

@dataclass(frozen=True)
class SingletEnsemble:
    p: int
    m: int

    @property
    def cos_theta(self) -> Fraction:
        return Fraction(self.m, self.p) - 1

    @property
    def correlated_split(self) -> tuple[int, int]:
        """How many of the 2p - m aligned positions sit in Alice's +1 and -1 blocks."""
        same = 2 * self.p - self.m
        return (same + 1) // 2, same // 2

    @cached_property
    def alice_bits(self) -> np.ndarray:
        b = canonical_bits(2 * self.p, self.p)
        b.setflags(write=False)
        return b

    @cached_property
    def bob_bits(self) -> np.ndarray:
        p = self.p
        k_plus, k_minus = self.correlated_split
        b = -np.asarray(self.alice_bits).copy()
        b[:k_plus] = 1
        b[p:p + k_minus] = -1
        b.setflags(write=False)
        return b

    def correlation(self) -> Fraction:
        prod = self.alice_bits.astype(np.int64) * self.bob_bits
        return Fraction(int(prod.sum()), 2 * self.p)

    def outcome(self, index: int) -> tuple[int, int]:
        return int(self.alice_bits[index]), int(self.bob_bits[index])


def bob_bit(p: int, m: int, index: int) -> int:
    """Bob's entry of singlet_ensemble(p, m) at ``index`` without building arrays."""
    same = 2 * p - m
    k_plus, k_minus = (same + 1) // 2, same // 2
    if index < p:
        return 1 if index < k_plus else -1
    return -1 if index - p < k_minus else 1


def singlet_ensemble(p: Union[int, PrimeModulus], m: int) -> SingletEnsemble:
    p = _prime(p).p
    if not 0 <= m <= 2 * p:
        raise ValueError(f"m must lie in [0, {2 * p}], got {m}")
    return SingletEnsemble(p, m)
