"""Spherical cosine rule in exact form, and the two irrationality certifiers.

``impossible_triangle`` certifies that the third side of a spherical triangle
with two rational cosines and a rational, non-exceptional vertex angle has an
irrational cosine. ``chsh_certify`` runs the four-point version of the same
argument on a CHSH quadrilateral X0, X1 (Alice) and Y0, Y1 (Bob).

Vertex angles of the quadrilateral::

    alpha  at X0, between great circles X0Y0 and X0Y1
    beta   at X1, between X1Y0 and X1Y1
    gamma  at Y0, between Y0X0 and Y0X1
    delta  at Y1, between Y1X1 and Y1X0
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from typing import Optional

import mpmath
import numpy as np

from .exactmath import (
    RationalAngle,
    RationalValue,
    is_exceptional,
    niven_classify,
    small_rational_near,
)

DIGITS = 200
_GUARD = 15
EVIDENCE_MAX_DEN = 10**6
EVIDENCE_TOL = Fraction(1, 10**150)


class Tag(str, enum.Enum):
    FORCED_IRRATIONAL = "ForcedIrrational"
    EXCEPTIONAL = "ExceptionalVertexAngle"
    DEGENERATE = "Degenerate"
    RATIONAL = "RationalValue"
    NO_VERDICT = "NoVerdict"


@dataclass(frozen=True)
class Verdict:
    tag: Tag
    witness: Optional[Fraction] = None
    numeric_value: Optional[mpmath.mpf] = None
    trace: tuple[str, ...] = ()

    def to_record(self, edge: str) -> dict:
        rec = {"edge": edge, "tag": self.tag.value}
        if self.witness is not None:
            rec["witness"] = f"{self.witness.numerator}/{self.witness.denominator}"
        rec["numeric_value"] = (
            None if self.numeric_value is None else mpmath.nstr(self.numeric_value, 30)
        )
        if self.trace:
            rec["trace"] = list(self.trace)
        return rec


# -- high precision helpers ---------------------------------------------------

def mpf_to_fraction(x: mpmath.mpf) -> Fraction:
    man, exp = x.man_exp
    man = int(man)
    if exp >= 0:
        return Fraction(man << exp)
    return Fraction(man, 1 << -exp)


def _mpq(r: Fraction) -> mpmath.mpf:
    return mpmath.mpf(r.numerator) / r.denominator


@lru_cache(maxsize=65536)
def _sin_from_cos(c: Fraction, dps: int) -> mpmath.mpf:
    with mpmath.workdps(dps):
        return mpmath.sqrt(_mpq(1 - c * c))


@lru_cache(maxsize=65536)
def _cos_turns(turns: Fraction, dps: int) -> mpmath.mpf:
    with mpmath.workdps(dps):
        return mpmath.cospi(mpmath.mpf(2 * turns.numerator) / turns.denominator)


def rational_evidence(x: mpmath.mpf) -> Optional[Fraction]:
    """A rational with denominator <= 1e6 within 1e-150 of x, or None.

    None is the numeric evidence of irrationality used throughout.
    """
    return small_rational_near(mpf_to_fraction(x), EVIDENCE_MAX_DEN, EVIDENCE_TOL)


def _rational_sqrt(r: Fraction) -> Optional[Fraction]:
    if r < 0:
        return None
    a, b = math.isqrt(r.numerator), math.isqrt(r.denominator)
    if a * a == r.numerator and b * b == r.denominator:
        return Fraction(a, b)
    return None


def _check_cos(c: Fraction, name: str) -> Fraction:
    c = Fraction(c)
    if abs(c) > 1:
        raise ValueError(f"{name} = {c} lies outside [-1, 1]")
    return c


def gram_feasible(c_ab: float, c_bc: float, c_ca: float, tol: float = 1e-12) -> bool:
    """Whether three unit vectors with these pairwise cosines can exist."""
    g = np.array([[1.0, c_ab, c_ca], [c_ab, 1.0, c_bc], [c_ca, c_bc, 1.0]])
    return bool(np.linalg.eigvalsh(g).min() >= -tol)


# -- triangle ----------------------------------------------------------------

@dataclass(frozen=True)
class TriangleSpec:
    cos_xy: Fraction
    cos_yz: Fraction
    vertex_angle: RationalAngle

    def __post_init__(self) -> None:
        object.__setattr__(self, "cos_xy", _check_cos(self.cos_xy, "cos_xy"))
        object.__setattr__(self, "cos_yz", _check_cos(self.cos_yz, "cos_yz"))


@dataclass(frozen=True)
class ExactCosExpression:
    """cos XZ = rational_part + sqrt(radicand_product) * cos(angle_factor)."""

    rational_part: Fraction
    radicand_product: Fraction
    angle_factor: RationalAngle
    high_precision_value: mpmath.mpf
    exact_value: Optional[Fraction] = None


def cos_rule_eval(spec: TriangleSpec, digits: int = DIGITS) -> ExactCosExpression:
    rational_part = spec.cos_xy * spec.cos_yz
    radicand = (1 - spec.cos_xy**2) * (1 - spec.cos_yz**2)
    dps = digits + _GUARD
    with mpmath.workdps(dps):
        value = (
            _mpq(rational_part)
            + _sin_from_cos(spec.cos_xy, dps) * _sin_from_cos(spec.cos_yz, dps)
            * _cos_turns(spec.vertex_angle.turns, dps)
        )
    exact = None
    cos_cls = niven_classify(spec.vertex_angle)
    root = _rational_sqrt(radicand)
    if radicand == 0:
        exact = rational_part
    elif isinstance(cos_cls, RationalValue):
        if cos_cls.value == 0:
            exact = rational_part
        elif root is not None:
            exact = rational_part + root * cos_cls.value
    return ExactCosExpression(rational_part, radicand, spec.vertex_angle, value, exact)


def impossible_triangle(spec: TriangleSpec) -> Verdict:
    """Certify that cos XZ is irrational, or say why the argument does not apply."""
    radicand = (1 - spec.cos_xy**2) * (1 - spec.cos_yz**2)
    if radicand == 0:
        return Verdict(Tag.DEGENERATE, trace=("a leg has |cos| = 1, the triangle collapses",))
    twice = spec.vertex_angle * 2
    cls2 = niven_classify(twice)
    if isinstance(cls2, RationalValue):
        expr = cos_rule_eval(spec)
        return Verdict(
            Tag.EXCEPTIONAL,
            witness=expr.exact_value,
            numeric_value=expr.high_precision_value,
            trace=(f"cos(2*phi_Y) = {cls2.value} is rational; the contradiction step fails",),
        )
    expr = cos_rule_eval(spec)
    trace = (
        "assume cos XZ rational",
        "cosine rule: sin XY sin YZ cos phi_Y = cos XZ - cos XY cos YZ is rational",
        f"square: ({radicand}) cos^2 phi_Y is rational, so cos^2 phi_Y is rational",
        "cos 2phi_Y = 2cos^2 phi_Y - 1 is rational",
        f"Niven: 2phi_Y = {twice} has irrational cosine; contradiction",
    )
    return Verdict(Tag.FORCED_IRRATIONAL, numeric_value=expr.high_precision_value, trace=trace)


# -- CHSH quadrilateral -------------------------------------------------------

EDGES = ("X0Y0", "X1Y0", "X0Y1", "X1Y1")


@dataclass(frozen=True)
class QuadSpec:
    cos_x0y0: Fraction
    cos_x1y0: Optional[Fraction] = None
    cos_x0y1: Optional[Fraction] = None
    cos_x1y1: Optional[Fraction] = None
    cos_x0x1: Optional[Fraction] = None
    cos_y0y1: Optional[Fraction] = None
    alpha: Optional[RationalAngle] = None
    beta: Optional[RationalAngle] = None
    gamma: Optional[RationalAngle] = None
    delta: Optional[RationalAngle] = None

    def __post_init__(self) -> None:
        for name in ("cos_x0y0", "cos_x1y0", "cos_x0y1", "cos_x1y1", "cos_x0x1", "cos_y0y1"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, _check_cos(v, name))

    def edge_cos(self, edge: str) -> Optional[Fraction]:
        return getattr(self, "cos_" + edge.lower())

    def swap_sides(self) -> QuadSpec:
        """Relabel Alice <-> Bob (X_i <-> Y_i)."""
        return QuadSpec(
            cos_x0y0=self.cos_x0y0, cos_x1y0=self.cos_x0y1, cos_x0y1=self.cos_x1y0,
            cos_x1y1=self.cos_x1y1, cos_x0x1=self.cos_y0y1, cos_y0y1=self.cos_x0x1,
            alpha=self.gamma, beta=self.delta, gamma=self.alpha, delta=self.beta,
        )

    def flip_x(self) -> QuadSpec:
        """Relabel X0 <-> X1."""
        return replace(
            self, cos_x0y0=self.cos_x1y0, cos_x1y0=self.cos_x0y0,
            cos_x0y1=self.cos_x1y1, cos_x1y1=self.cos_x0y1,
            alpha=self.beta, beta=self.alpha,
        )

    def flip_y(self) -> QuadSpec:
        """Relabel Y0 <-> Y1."""
        return replace(
            self, cos_x0y0=self.cos_x0y1, cos_x0y1=self.cos_x0y0,
            cos_x1y0=self.cos_x1y1, cos_x1y1=self.cos_x1y0,
            gamma=self.delta, delta=self.gamma,
        )


def _edge_after_flip(edge: str, fx: bool, fy: bool) -> str:
    xi, yi = int(edge[1]), int(edge[3])
    return f"X{xi ^ fx}Y{yi ^ fy}"


@dataclass(frozen=True)
class Certificate:
    realized_edge: str
    verdicts: dict = field(default_factory=dict)

    def __getitem__(self, edge: str) -> Verdict:
        return self.verdicts[edge]

    def to_json_obj(self) -> dict:
        return {
            "realized_edge": self.realized_edge,
            "edges": [self.verdicts[e].to_record(e) for e in EDGES],
        }


def _subtraction_evidence(
    c00: Fraction, c_a: Optional[Fraction], c_b: Optional[Fraction], c_c: Optional[Fraction],
    ang1: RationalAngle, ang2: RationalAngle, labels: tuple[str, str], dps: int,
) -> Verdict:
    """Evidence for one forced edge by the subtraction argument.

    With all four side cosines declared, the two cosine-rule expressions for the
    shared diagonal force A = s00*s_a*cos(ang1) - s_c*s_b*cos(ang2) to equal the
    rational c_c*c_b - c00*c_a. The numeric A is checked against that value and
    for any nearby small rational. Without declared values the check falls back
    to linear independence of 1, cos 2ang1, cos 2ang2 over small integers.
    """
    n1, n2 = labels
    head = (
        f"cosine rule on two triangles sharing a diagonal, angles {n1}={ang1}, {n2}={ang2}",
        f"Niven: cos 2{n1} and cos 2{n2} are irrational",
    )
    if c_a is not None and c_b is not None and c_c is not None:
        with mpmath.workdps(dps):
            a_val = (
                _sin_from_cos(c00, dps) * _sin_from_cos(c_a, dps) * _cos_turns(ang1.turns, dps)
                - _sin_from_cos(c_c, dps) * _sin_from_cos(c_b, dps) * _cos_turns(ang2.turns, dps)
            )
            required = c_c * c_b - c00 * c_a
            gap = abs(a_val - _mpq(required))
        if mpf_to_fraction(gap) <= EVIDENCE_TOL:
            return Verdict(Tag.NO_VERDICT, numeric_value=a_val,
                           trace=head + ("A matches the rational the cosine rules require; inconclusive",))
        near = rational_evidence(a_val)
        if near is not None:
            return Verdict(Tag.NO_VERDICT, numeric_value=a_val,
                           trace=head + (f"A lies within 1e-150 of {near}; inconclusive",))
        return Verdict(
            Tag.FORCED_IRRATIONAL, numeric_value=a_val,
            trace=head + (
                f"subtraction: A must equal {required}",
                "200-digit A differs and has no rational approximant (den <= 1e6, tol 1e-150)",
                "so the assumed rational side cosines cannot coexist",
            ),
        )
    with mpmath.workdps(dps):
        v1 = _cos_turns((ang1 * 2).turns, dps)
        v2 = _cos_turns((ang2 * 2).turns, dps)
        rel = mpmath.pslq([mpmath.mpf(1), v1, v2], maxcoeff=EVIDENCE_MAX_DEN, maxsteps=20000,
                          tol=mpmath.mpf(10) ** (-150))
    if rel is not None:
        return Verdict(Tag.NO_VERDICT,
                       trace=head + (f"integer relation {rel} among 1, cos 2{n1}, cos 2{n2}; not independent",))
    return Verdict(
        Tag.FORCED_IRRATIONAL,
        trace=head + (
            f"no integer relation (|coeff| <= 1e6) among 1, cos 2{n1}, cos 2{n2}",
            "A1^2 and A2^2 are independently irrational, so A = A1 - A2 is generically irrational",
        ),
    )


def chsh_certify(quad: QuadSpec, realized_edge: str = "X0Y0", digits: int = DIGITS) -> Certificate:
    """Verdicts for the three counterfactual edges of a CHSH quadrilateral.

    Single-flip edges get ForcedIrrational when the argument goes through; the
    double-flip edge is never forced.
    """
    if realized_edge not in EDGES:
        raise ValueError(f"unknown edge {realized_edge!r}")
    fx, fy = realized_edge[1] == "1", realized_edge[3] == "1"
    q = quad
    if fx:
        q = q.flip_x()
    if fy:
        q = q.flip_y()
    canon = _certify_canonical(q, digits + _GUARD)
    return Certificate(
        realized_edge,
        {_edge_after_flip(e, fx, fy): v for e, v in canon.items()},
    )


def _certify_canonical(q: QuadSpec, dps: int) -> dict:
    c00 = q.cos_x0y0
    out = {"X0Y0": Verdict(Tag.RATIONAL, witness=c00, trace=("realized exact setting pair",))}
    cf = ("X1Y0", "X0Y1", "X1Y1")

    declared = [c for c in (q.cos_x0y0, q.cos_x1y0, q.cos_x0y1, q.cos_x1y1) if c is not None]
    if any(abs(c) == 1 for c in declared) or q.cos_x0x1 == 1 or q.cos_y0y1 == 1:
        for e in cf:
            out[e] = Verdict(Tag.DEGENERATE, trace=("coincident or antipodal settings collapse the quadrilateral",))
        return out

    for a, b, diag in (
        (q.cos_x0y0, q.cos_x1y0, q.cos_x0x1), (q.cos_x0y1, q.cos_x1y1, q.cos_x0x1),
        (q.cos_x0y0, q.cos_x0y1, q.cos_y0y1), (q.cos_x1y0, q.cos_x1y1, q.cos_y0y1),
    ):
        if a is not None and b is not None and diag is not None:
            if not gram_feasible(float(a), float(b), float(diag)):
                raise ValueError("declared cosines are not realizable on the sphere")

    angles = {"alpha": q.alpha, "beta": q.beta, "gamma": q.gamma, "delta": q.delta}
    bad = [n for n, a in angles.items() if a is not None and is_exceptional(a)]
    if bad:
        for e in cf:
            out[e] = Verdict(Tag.EXCEPTIONAL, trace=(f"{', '.join(bad)} is a multiple of 30 or 45 degrees",))
        return out

    if q.gamma is None or q.delta is None:
        out["X1Y0"] = Verdict(Tag.NO_VERDICT, trace=("gamma/delta undeclared",))
    else:
        out["X1Y0"] = _subtraction_evidence(
            c00, q.cos_x1y0, q.cos_x0y1, q.cos_x1y1, q.gamma, q.delta, ("gamma", "delta"), dps)
    if q.alpha is None or q.beta is None:
        out["X0Y1"] = Verdict(Tag.NO_VERDICT, trace=("alpha/beta undeclared",))
    else:
        out["X0Y1"] = _subtraction_evidence(
            c00, q.cos_x0y1, q.cos_x1y0, q.cos_x1y1, q.alpha, q.beta, ("alpha", "beta"), dps)
    out["X1Y1"] = Verdict(Tag.NO_VERDICT, trace=("no constraint links the double flip to the realized pair",))
    return out
