"""Exact arithmetic in the biquadratic extension Q(sqrt(2), sqrt(3)).

Squared norms of dilated lattice frequencies live in this field: the
cubic generators give plain rationals, the oblique generators introduce
sqrt(2) (and sqrt(3) in a coordinate, which squares away).  Resonance
verdicts reduce to zero tests and sign tests of field elements, so both
are implemented exactly; no floating point is involved anywhere here.
"""

from __future__ import annotations

from fractions import Fraction
from math import sqrt

_SQRT2 = sqrt(2.0)
_SQRT3 = sqrt(3.0)
_SQRT6 = sqrt(6.0)


def _sign_quad2(a: Fraction, b: Fraction) -> int:
    """Exact sign of a + b*sqrt(2)."""
    if b == 0:
        return (a > 0) - (a < 0)
    if a == 0:
        return (b > 0) - (b < 0)
    sa = 1 if a > 0 else -1
    sb = 1 if b > 0 else -1
    if sa == sb:
        return sa
    # Mixed signs: |a| vs |b|sqrt(2) decided by comparing squares.
    d = a * a - 2 * b * b
    return sa * ((d > 0) - (d < 0))


class QuadExt:
    """Element a + b*sqrt(2) + c*sqrt(3) + d*sqrt(6), components Fraction.

    Supports ring arithmetic, exact equality, exact sign, and float
    conversion.  Mixed arithmetic with int/Fraction coerces the scalar
    into the rational component.
    """

    __slots__ = ("a", "b", "c", "d")

    def __init__(self, a=0, b=0, c=0, d=0):
        self.a = Fraction(a)
        self.b = Fraction(b)
        self.c = Fraction(c)
        self.d = Fraction(d)

    @classmethod
    def coerce(cls, x) -> "QuadExt":
        if isinstance(x, QuadExt):
            return x
        if isinstance(x, (int, Fraction)):
            return cls(x)
        raise TypeError(f"cannot coerce {type(x).__name__} into QuadExt")

    # -- ring operations ------------------------------------------------

    def __add__(self, other):
        o = QuadExt.coerce(other)
        return QuadExt(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)

    __radd__ = __add__

    def __sub__(self, other):
        o = QuadExt.coerce(other)
        return QuadExt(self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d)

    def __rsub__(self, other):
        return QuadExt.coerce(other) - self

    def __neg__(self):
        return QuadExt(-self.a, -self.b, -self.c, -self.d)

    def __mul__(self, other):
        o = QuadExt.coerce(other)
        a1, b1, c1, d1 = self.a, self.b, self.c, self.d
        a2, b2, c2, d2 = o.a, o.b, o.c, o.d
        return QuadExt(
            a1 * a2 + 2 * b1 * b2 + 3 * c1 * c2 + 6 * d1 * d2,
            a1 * b2 + b1 * a2 + 3 * (c1 * d2 + d1 * c2),
            a1 * c2 + c1 * a2 + 2 * (b1 * d2 + d1 * b2),
            a1 * d2 + d1 * a2 + b1 * c2 + c1 * b2,
        )

    __rmul__ = __mul__

    # -- predicates -----------------------------------------------------

    def __eq__(self, other):
        try:
            o = QuadExt.coerce(other)
        except TypeError:
            return NotImplemented
        return (self.a, self.b, self.c, self.d) == (o.a, o.b, o.c, o.d)

    def __hash__(self):
        return hash((self.a, self.b, self.c, self.d))

    def __bool__(self):
        return bool(self.a or self.b or self.c or self.d)

    @property
    def is_rational(self) -> bool:
        return not (self.b or self.c or self.d)

    def as_fraction(self) -> Fraction:
        if not self.is_rational:
            raise ValueError(f"{self!r} has irrational part")
        return self.a

    def sign(self) -> int:
        """Exact sign in {-1, 0, +1}; never consults floating point.

        Writing x = u + v*sqrt(3) with u, v in Q(sqrt(2)), the sign of a
        mixed-sign combination reduces to the sign of u^2 - 3 v^2, which
        recurses into the quadratic subfield.
        """
        su = _sign_quad2(self.a, self.b)
        sv = _sign_quad2(self.c, self.d)
        if sv == 0:
            return su
        if su == 0:
            return sv
        if su == sv:
            return su
        # u^2 - 3 v^2 in Q(sqrt(2))
        ua = self.a * self.a + 2 * self.b * self.b
        ub = 2 * self.a * self.b
        va = self.c * self.c + 2 * self.d * self.d
        vb = 2 * self.c * self.d
        return su * _sign_quad2(ua - 3 * va, ub - 3 * vb)

    def __float__(self):
        return (
            float(self.a)
            + float(self.b) * _SQRT2
            + float(self.c) * _SQRT3
            + float(self.d) * _SQRT6
        )

    def __repr__(self):
        return f"QuadExt({self.a}, {self.b}, {self.c}, {self.d})"


def sqrt_ratio_sum_is_zero(terms) -> bool:
    """Exactly decide whether sum_i s_i * sqrt(h_i / f_i) vanishes.

    ``terms`` is an iterable of (s, h, f) with s in {-1, +1} and h >= 0,
    f > 0 exact scalars (QuadExt, Fraction or int).  Terms with h == 0
    contribute nothing and are dropped.  At most three terms are
    supported, which covers every signed combination of three mode
    frequencies.  The three-term case is resolved by isolating the
    lone-signed square root and squaring twice, with the sign condition
    kept explicit so no spurious roots are introduced.
    """
    active = []
    for s, h, f in terms:
        h = QuadExt.coerce(h)
        f = QuadExt.coerce(f)
        if not h:
            continue
        active.append((s, h, f))
    if not active:
        return True
    if len(active) == 1:
        return False
    if len(active) == 2:
        (s1, h1, f1), (s2, h2, f2) = active
        return s1 * s2 < 0 and h1 * f2 == h2 * f1
    if len(active) != 3:
        raise ValueError("at most three signed square roots supported")
    (s0, h0, f0), (s1, h1, f1), (s2, h2, f2) = active
    if s0 == s1 == s2:
        return False
    # sqrt(hl/fl) = sqrt(ha/fa) + sqrt(hb/fb), lone term on the left
    if s1 == s2:
        (hl, fl), (ha, fa), (hb, fb) = (h0, f0), (h1, f1), (h2, f2)
    elif s0 == s2:
        (hl, fl), (ha, fa), (hb, fb) = (h1, f1), (h0, f0), (h2, f2)
    else:
        (hl, fl), (ha, fa), (hb, fb) = (h2, f2), (h0, f0), (h1, f1)
    t = hl * fa * fb - ha * fl * fb - hb * fl * fa
    if t.sign() < 0:
        return False
    return t * t == 4 * ha * hb * fl * fl * fa * fb
