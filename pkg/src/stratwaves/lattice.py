"""Truncated sum-closed frequency lattices and their anisotropic dilations.

Members are indexed by integer generator coordinates ``(n1, n2, n3)`` in
the max-norm ball of radius ``M`` with the zero mode removed.  Three
generator families are supported: the periodic cubic lattice and two
oblique ("almost periodic") families whose frequencies involve sqrt(2)
and sqrt(3).  All squared norms are carried exactly (see `exact`); the
irrational geometry lives in the generator map, never in floats.

Truncation is a plain Galerkin projection: sums leaving the ball are
dropped by the triad enumeration, so closure under addition holds only
up to the cutoff, while closure under negation is exact.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from fractions import Fraction
from math import lcm, sqrt

import numpy as np

from .exact import QuadExt

_SQRT2 = sqrt(2.0)
_SQRT3 = sqrt(3.0)


class LatticeKind(enum.Enum):
    """Generator family of a frequency set."""

    CUBIC = "cubic"
    OBLIQUE_A = "oblique-a"
    OBLIQUE_B = "oblique-b"

    @classmethod
    def parse(cls, text: str) -> "LatticeKind":
        text = text.strip().lower().replace("_", "-")
        for kind in cls:
            if kind.value == text:
                return kind
        raise ValueError(f"unknown lattice kind {text!r}")


def _parse_rational(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return Fraction(int(value[0]), int(value[1]))
    raise TypeError(f"cannot interpret {value!r} as an exact rational")


@dataclass(frozen=True)
class DilationFactors:
    """Squared anisotropic dilation factors, stored as exact rationals."""

    g1sq: Fraction
    g2sq: Fraction

    def __post_init__(self):
        object.__setattr__(self, "g1sq", _parse_rational(self.g1sq))
        object.__setattr__(self, "g2sq", _parse_rational(self.g2sq))
        if self.g1sq <= 0 or self.g2sq <= 0:
            raise ValueError("dilation squares must be strictly positive")

    @classmethod
    def identity(cls) -> "DilationFactors":
        return cls(Fraction(1), Fraction(1))

    @property
    def g1(self) -> float:
        return sqrt(float(self.g1sq))

    @property
    def g2(self) -> float:
        return sqrt(float(self.g2sq))

    @property
    def is_identity(self) -> bool:
        return self.g1sq == 1 and self.g2sq == 1


@dataclass(frozen=True)
class ModeGeometrySquares:
    """Exact squared horizontal and full norms of one dilated frequency."""

    hsq: QuadExt
    fsq: QuadExt

    @property
    def horizontal_zero(self) -> bool:
        return not self.hsq

    def omega(self) -> float:
        """Frequency |n|_h / |n|, via one float square root of hsq/fsq."""
        if not self.hsq:
            return 0.0
        return sqrt(float(self.hsq) / float(self.fsq))


def _generator_square_parts(kind: LatticeKind, coords: np.ndarray):
    """Exact squares of the three frequency components, pre-dilation.

    Returns (f1sq, f2sq_rat, f2sq_irr, f3sq) integer arrays where the
    second component squared is f2sq_rat + f2sq_irr * sqrt(2).
    """
    m1 = coords[:, 0].astype(object)
    m2 = coords[:, 1].astype(object)
    m3 = coords[:, 2].astype(object)
    if kind is LatticeKind.CUBIC:
        return m1 * m1, m2 * m2, m1 * 0, m3 * m3
    if kind is LatticeKind.OBLIQUE_A:
        return m1 * m1, 2 * m2 * m2, m1 * 0, m3 * m3
    if kind is LatticeKind.OBLIQUE_B:
        f1 = m1 + m2
        return f1 * f1, 2 * m2 * m2 + m3 * m3, 2 * m2 * m3, 3 * m3 * m3
    raise ValueError(kind)


def _float_coords(kind: LatticeKind, coords: np.ndarray, dilation: DilationFactors):
    m = coords.astype(float)
    if kind is LatticeKind.CUBIC:
        f = m.copy()
    elif kind is LatticeKind.OBLIQUE_A:
        f = np.column_stack([m[:, 0], _SQRT2 * m[:, 1], m[:, 2]])
    elif kind is LatticeKind.OBLIQUE_B:
        f = np.column_stack(
            [m[:, 0] + m[:, 1], _SQRT2 * m[:, 1] + m[:, 2], _SQRT3 * m[:, 2]]
        )
    else:
        raise ValueError(kind)
    f[:, 0] *= dilation.g1
    f[:, 1] *= dilation.g2
    return f


class FrequencySet:
    """Truncated frequency lattice with dilation metadata.

    Members are ordered lexicographically in generator coordinates for
    reproducibility; the count is (2M+1)^3 - 1.  The set is immutable
    after construction and safe to share between concurrent readers.
    """

    def __init__(self, kind: LatticeKind, M: int, dilation: DilationFactors):
        if M < 1:
            raise ValueError("truncation radius M must be >= 1")
        self.kind = kind
        self.M = int(M)
        self.dilation = dilation

        side = 2 * self.M + 1
        grid = np.indices((side, side, side)).reshape(3, -1).T - self.M
        nonzero = np.any(grid != 0, axis=1)
        self.coords = np.ascontiguousarray(grid[nonzero], dtype=np.int64)
        self.size = self.coords.shape[0]

        # dense position -> ordinal lookup (-1 for the removed zero mode)
        self._ordinal_grid = np.full(side**3, -1, dtype=np.int64)
        self._ordinal_grid[nonzero] = np.arange(self.size)

        self.neg_ordinal = self.ordinals_of(-self.coords)

        f1sq, f2rat, f2irr, f3sq = _generator_square_parts(kind, self.coords)
        g1, g2 = dilation.g1sq, dilation.g2sq
        scale = lcm(g1.denominator, g2.denominator)
        c1 = g1.numerator * (scale // g1.denominator)
        c2 = g2.numerator * (scale // g2.denominator)
        # scaled squared norms: integer components of scale * hsq, scale * fsq
        self._scale = scale
        self._hsq_rat = c1 * f1sq + c2 * f2rat
        self._hsq_irr = c2 * f2irr
        self._fsq_rat = self._hsq_rat + scale * f3sq
        self._fsq_irr = self._hsq_irr

        self.dilated_coords = _float_coords(kind, self.coords, dilation)
        self.hsq_float = (
            self._hsq_rat.astype(float) + self._hsq_irr.astype(float) * _SQRT2
        ) / scale
        self.fsq_float = (
            self._fsq_rat.astype(float) + self._fsq_irr.astype(float) * _SQRT2
        ) / scale
        self.horizontal_zero = (self._hsq_rat == 0) & (self._hsq_irr == 0)

    # -- membership -----------------------------------------------------

    def __len__(self):
        return self.size

    def __contains__(self, n) -> bool:
        return self.ordinal(n) >= 0

    def ordinal(self, n) -> int:
        """Dense ordinal of a member, or -1 if outside the set."""
        n1, n2, n3 = int(n[0]), int(n[1]), int(n[2])
        M, side = self.M, 2 * self.M + 1
        if max(abs(n1), abs(n2), abs(n3)) > M:
            return -1
        pos = ((n1 + M) * side + (n2 + M)) * side + (n3 + M)
        return int(self._ordinal_grid[pos])

    def index_of(self, n) -> int:
        """Like `ordinal` but raises KeyError for non-members."""
        o = self.ordinal(n)
        if o < 0:
            raise KeyError(f"{tuple(n)} is not a member")
        return o

    def ordinals_of(self, coords: np.ndarray) -> np.ndarray:
        """Vectorized ordinal lookup; -1 marks non-members."""
        M, side = self.M, 2 * self.M + 1
        inside = np.all(np.abs(coords) <= M, axis=-1)
        shifted = coords + M
        pos = (shifted[..., 0] * side + shifted[..., 1]) * side + shifted[..., 2]
        out = np.full(coords.shape[:-1], -1, dtype=np.int64)
        out[inside] = self._ordinal_grid[pos[inside]]
        return out

    def member(self, ordinal: int):
        return tuple(int(x) for x in self.coords[ordinal])

    # -- geometry ---------------------------------------------------------

    def geometry(self, ordinal: int) -> ModeGeometrySquares:
        """Exact squared norms of the dilated frequency at an ordinal."""
        s = Fraction(1, self._scale)
        hsq = QuadExt(s * int(self._hsq_rat[ordinal]), s * int(self._hsq_irr[ordinal]))
        fsq = QuadExt(s * int(self._fsq_rat[ordinal]), s * int(self._fsq_irr[ordinal]))
        return ModeGeometrySquares(hsq, fsq)

    def scaled_norm_squares(self):
        """Integer components (rational, sqrt2) of scale*hsq and scale*fsq.

        A common positive scale leaves every resonance identity
        unchanged, so downstream zero tests may use these directly.
        """
        return (
            (self._hsq_rat, self._hsq_irr),
            (self._fsq_rat, self._fsq_irr),
            self._scale,
        )

    @property
    def geometry_is_rational(self) -> bool:
        return self.kind in (LatticeKind.CUBIC, LatticeKind.OBLIQUE_A)

    # -- descriptor -------------------------------------------------------

    def to_descriptor(self) -> dict:
        return {
            "kind": self.kind.value,
            "M": self.M,
            "g1sq": [self.dilation.g1sq.numerator, self.dilation.g1sq.denominator],
            "g2sq": [self.dilation.g2sq.numerator, self.dilation.g2sq.denominator],
        }

    def descriptor_json(self) -> str:
        return json.dumps(self.to_descriptor(), sort_keys=True)

    @classmethod
    def from_descriptor(cls, desc: dict) -> "FrequencySet":
        return cls(
            LatticeKind.parse(desc["kind"]),
            int(desc["M"]),
            DilationFactors(_parse_rational(desc["g1sq"]), _parse_rational(desc["g2sq"])),
        )


def build_truncated_set(
    kind: LatticeKind, M: int, dilation: DilationFactors | None = None
) -> FrequencySet:
    """Build the truncated lattice for one generator family.

    The member list is ``{n : max|n_i| <= M} minus {0}`` in lexicographic
    order, closed under negation by construction.
    """
    if dilation is None:
        dilation = DilationFactors.identity()
    return FrequencySet(kind, M, dilation)


def dilated_geometry(
    n, dilation: DilationFactors, kind: LatticeKind = LatticeKind.CUBIC
) -> ModeGeometrySquares:
    """Exact squared norms of a single dilated frequency.

    For the cubic family this is g1sq*n1^2 + g2sq*n2^2 and that plus
    n3^2; the oblique families route through their generator maps.
    """
    coords = np.array([[int(n[0]), int(n[1]), int(n[2])]], dtype=np.int64)
    if not coords.any():
        raise ValueError("zero mode has no geometry")
    f1sq, f2rat, f2irr, f3sq = _generator_square_parts(kind, coords)
    g1, g2 = dilation.g1sq, dilation.g2sq
    hsq = QuadExt(g1 * int(f1sq[0]) + g2 * int(f2rat[0]), g2 * int(f2irr[0]))
    fsq = hsq + QuadExt(int(f3sq[0]))
    return ModeGeometrySquares(hsq, fsq)


def triad_arrays(fset: FrequencySet):
    """Ordinals (n, k, m) of every interaction triple n = k + m.

    Deterministic order: output mode major, then k.  Equivalent to the
    brute-force double loop over members with an in-set test on the sum.
    """
    n_list, k_list, m_list = [], [], []
    K = fset.size
    arange = np.arange(K, dtype=np.int64)
    for n_ord in range(K):
        rest = fset.coords[n_ord][None, :] - fset.coords
        m_ord = fset.ordinals_of(rest)
        ok = m_ord >= 0
        n_list.append(np.full(int(ok.sum()), n_ord, dtype=np.int64))
        k_list.append(arange[ok])
        m_list.append(m_ord[ok])
    return (
        np.concatenate(n_list),
        np.concatenate(k_list),
        np.concatenate(m_list),
    )


def triads(fset: FrequencySet):
    """Yield member triples (n, k, m) with n = k + m, deterministically."""
    n_ord, k_ord, m_ord = triad_arrays(fset)
    for i in range(n_ord.shape[0]):
        yield (
            fset.member(int(n_ord[i])),
            fset.member(int(k_ord[i])),
            fset.member(int(m_ord[i])),
        )
