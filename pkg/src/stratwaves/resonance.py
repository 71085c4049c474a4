"""Exact classification of triad resonances on dilated lattices.

A triad (n, k, m) with n = k + m and branch signs sigma resonates when
the signed frequency combination -s0*w_n + s1*w_k + s2*w_m vanishes.
Each w is sqrt(hsq/fsq) with exact squared norms, so the verdict is a
decidable identity in integer (or Z[sqrt2]) arithmetic: equalities of
two roots cross-multiply, and three-root relations square out with
explicit sign bookkeeping.  Floats never participate in any verdict;
they only provide the shadow values stored alongside.

The module also evaluates the degree-12 resonance discriminant Q whose
zero set marks triads with a fully-signed (all s_i = +-1) resonance,
scans a truncated lattice for admissible dilations, and runs the
dyadic-shell census behind the periodic-case convolution bound.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .exact import QuadExt, sqrt_ratio_sum_is_zero
from .lattice import DilationFactors, FrequencySet, LatticeKind, dilated_geometry

#: All 27 branch-sign triples in lexicographic order.
SIGMA_TRIPLES = tuple(
    (s0, s1, s2) for s0 in (-1, 0, 1) for s1 in (-1, 0, 1) for s2 in (-1, 0, 1)
)

#: int64 is exact for the discriminant algebra while scaled squared
#: norms stay at or below this bound (largest intermediate < 2^62).
_INT64_NORM_BOUND = 768


@dataclass(frozen=True)
class SigmaTriple:
    """Branch signs (s0, s1, s2) of output, first and second argument."""

    s0: int
    s1: int
    s2: int

    def __post_init__(self):
        for s in (self.s0, self.s1, self.s2):
            if s not in (-1, 0, 1):
                raise ValueError("sigma components must lie in {-1, 0, 1}")

    def __iter__(self):
        return iter((self.s0, self.s1, self.s2))


@dataclass(frozen=True)
class ResonanceVerdict:
    """Exact resonance flag with its floating-point shadow."""

    resonant: bool
    omega_value: float


def _check_triad(n, k, m):
    if tuple(n) != (k[0] + m[0], k[1] + m[1], k[2] + m[2]):
        raise ValueError(f"not a triad: {tuple(n)} != {tuple(k)} + {tuple(m)}")
    for v in (n, k, m):
        if tuple(v) == (0, 0, 0):
            raise ValueError("zero mode cannot participate in a triad")


def omega_sigma(
    n, k, m, sigma, dilation: DilationFactors, kind: LatticeKind = LatticeKind.CUBIC
) -> float:
    """Signed combination -s0*w_n + s1*w_k + s2*w_m as a float."""
    _check_triad(n, k, m)
    s0, s1, s2 = tuple(sigma)
    wn = dilated_geometry(n, dilation, kind).omega()
    wk = dilated_geometry(k, dilation, kind).omega()
    wm = dilated_geometry(m, dilation, kind).omega()
    return -s0 * wn + s1 * wk + s2 * wm


def is_resonant_exact(
    n, k, m, sigma, dilation: DilationFactors, kind: LatticeKind = LatticeKind.CUBIC
) -> ResonanceVerdict:
    """Decide w^sigma = 0 by exact arithmetic only.

    Slots with sign 0 drop out; the remaining signed square roots are
    tested for exact cancellation.  The float omega is reported for
    diagnostics but has no influence on the verdict.
    """
    _check_triad(n, k, m)
    s0, s1, s2 = tuple(sigma)
    gn = dilated_geometry(n, dilation, kind)
    gk = dilated_geometry(k, dilation, kind)
    gm = dilated_geometry(m, dilation, kind)
    terms = [
        (s, g.hsq, g.fsq)
        for s, g in ((-s0, gn), (s1, gk), (s2, gm))
        if s != 0
    ]
    resonant = sqrt_ratio_sum_is_zero(terms)
    value = -s0 * gn.omega() + s1 * gk.omega() + s2 * gm.omega()
    return ResonanceVerdict(resonant, 0.0 if resonant else value)


def resonance_discriminant(
    n, k, m, dilation: DilationFactors, kind: LatticeKind = LatticeKind.CUBIC
):
    """Exact discriminant Q of the fully-signed resonances.

    With X = hsq_n fsq_k fsq_m, Y = fsq_n hsq_k fsq_m and
    Z = fsq_n fsq_k hsq_m,

        Q = (X - Y - Z)^2 - 4 Y Z

    equals |n~|^4 |k~|^4 |m~|^4 times the product of the four distinct
    signed frequency combinations, so Q = 0 exactly when some sign
    choice in {-1,+1}^3 resonates.  Returns a Fraction when the lattice
    geometry is rational, a QuadExt otherwise.
    """
    for v in (n, k, m):
        if tuple(v) == (0, 0, 0):
            raise ValueError("zero mode has no discriminant")
    gn = dilated_geometry(n, dilation, kind)
    gk = dilated_geometry(k, dilation, kind)
    gm = dilated_geometry(m, dilation, kind)
    x = gn.hsq * gk.fsq * gm.fsq
    y = gn.fsq * gk.hsq * gm.fsq
    z = gn.fsq * gk.fsq * gm.hsq
    t = x - y - z
    q = t * t - 4 * (y * z)
    return q.as_fraction() if q.is_rational else q


# -- vectorized exact machinery ------------------------------------------
#
# Scaled squared norms are integer pairs (a, b) meaning a + b*sqrt(2);
# the sqrt(3) generator component squares to a rational, so the pair
# closes under the products below.  dtype is int64 when bounds permit,
# Python object integers otherwise.


def _pair_mul(x, y):
    return (x[0] * y[0] + 2 * (x[1] * y[1]), x[0] * y[1] + x[1] * y[0])


def _pair_eq(x, y):
    return (x[0] == y[0]) & (x[1] == y[1])


def _pair_is_zero(x):
    return (x[0] == 0) & (x[1] == 0)


def _int_sign(a):
    return np.where(a > 0, 1, 0) - np.where(a < 0, 1, 0)


def _pair_sign(x):
    """Vectorized exact sign of a + b*sqrt(2)."""
    a, b = x
    sa, sb = _int_sign(a), _int_sign(b)
    mixed = sa * sb < 0
    d = a * a - 2 * (b * b)
    out = np.where(sa == 0, sb, sa)
    same_or_zero = ~mixed
    return np.where(same_or_zero, out, sa * _int_sign(d))


def _norm_pairs(fset: FrequencySet):
    """Per-mode (hsq, fsq) scaled-integer pairs in a safe dtype."""
    (h_rat, h_irr), (f_rat, f_irr), _ = fset.scaled_norm_squares()
    bound = max(
        int(abs(f_rat).max(initial=0)),
        int(abs(f_irr).max(initial=0)),
        int(abs(h_rat).max(initial=0)),
        int(abs(h_irr).max(initial=0)),
    )
    dtype = np.int64 if bound <= _INT64_NORM_BOUND else object
    cast = lambda a: a.astype(dtype)
    return (cast(h_rat), cast(h_irr)), (cast(f_rat), cast(f_irr))


def _sum_relation(hl, fl, ha, fa, hb, fb):
    """Exact w_lone = w_a + w_b on arrays of (hsq, fsq) pairs."""
    fafb = _pair_mul(fa, fb)
    tl = _pair_mul(hl, fafb)
    ta = _pair_mul(ha, _pair_mul(fl, fb))
    tb = _pair_mul(hb, _pair_mul(fl, fa))
    t = (tl[0] - ta[0] - tb[0], tl[1] - ta[1] - tb[1])
    rhs = _pair_mul(_pair_mul(ha, hb), _pair_mul(_pair_mul(fl, fl), fafb))
    rhs = (4 * rhs[0], 4 * rhs[1])
    return (_pair_sign(t) >= 0) & _pair_eq(_pair_mul(t, t), rhs)


def triad_sigma_verdicts(fset: FrequencySet, n_ord, k_ord, m_ord):
    """Exact resonance verdicts for all 27 sign triples of many triads.

    Returns {sigma: bool array} over the triad arrays.  The shared
    relation bits (zero frequencies, pairwise equalities, three-term sum
    identities) are computed once and combined per sign pattern.
    """
    (h_rat, h_irr), (f_rat, f_irr) = _norm_pairs(fset)

    def pairs(ord_arr):
        return (
            (h_rat[ord_arr], h_irr[ord_arr]),
            (f_rat[ord_arr], f_irr[ord_arr]),
        )

    (hn, fn), (hk, fk), (hm, fm) = pairs(n_ord), pairs(k_ord), pairs(m_ord)
    zn, zk, zm = _pair_is_zero(hn), _pair_is_zero(hk), _pair_is_zero(hm)

    def eq_omega(h1, f1, h2, f2):
        return _pair_eq(_pair_mul(h1, f2), _pair_mul(h2, f1))

    eq_nk = eq_omega(hn, fn, hk, fk)
    eq_nm = eq_omega(hn, fn, hm, fm)
    eq_km = eq_omega(hk, fk, hm, fm)
    sum_n = _sum_relation(hn, fn, hk, fk, hm, fm)
    sum_k = _sum_relation(hk, fk, hn, fn, hm, fm)
    sum_m = _sum_relation(hm, fm, hn, fn, hk, fk)

    size = np.shape(zn)
    verdicts = {}
    eq_by_pair = {("n", "k"): eq_nk, ("n", "m"): eq_nm, ("k", "m"): eq_km}
    sum_by_lone = {"n": sum_n, "k": sum_k, "m": sum_m}
    zero_by_slot = {"n": zn, "k": zk, "m": zm}

    for s0, s1, s2 in SIGMA_TRIPLES:
        signs = {"n": -s0, "k": s1, "m": s2}
        active = {
            slot: (np.zeros(size, bool) if signs[slot] == 0 else ~zero_by_slot[slot])
            for slot in ("n", "k", "m")
        }
        nact = active["n"].astype(np.int8) + active["k"] + active["m"]
        res = nact == 0
        for (x, y) in (("n", "k"), ("n", "m"), ("k", "m")):
            if signs[x] * signs[y] >= 0:
                continue
            z = ({"n", "k", "m"} - {x, y}).pop()
            res |= active[x] & active[y] & ~active[z] & eq_by_pair[(x, y)]
        sg = (signs["n"], signs["k"], signs["m"])
        if all(sg) and abs(sum(sg)) == 1:
            lone = ("n", "k", "m")[[abs(s - sum(sg)) for s in sg].index(2)]
            all3 = active["n"] & active["k"] & active["m"]
            res |= all3 & sum_by_lone[lone]
        verdicts[(s0, s1, s2)] = res
    return verdicts


# -- admissibility scan ----------------------------------------------------


@dataclass(frozen=True)
class AdmissibilityEntry:
    """One triad on which the discriminant vanishes."""

    n: tuple
    k: tuple
    m: tuple
    q: Fraction

    @property
    def all_horizontal_nonzero(self) -> bool:
        return all(v[:2] != (0, 0) for v in (self.n, self.k, self.m))


@dataclass
class AdmissibilityReport:
    """Result of a Q = 0 scan over every triad of a truncated lattice.

    ``entries`` lists the vanishing triads among those whose horizontal
    parts are not all zero.  The dilation is certified admissible at
    this truncation when no entry has all three horizontal parts
    nonzero (entries with some horizontal-zero mode resonate for every
    dilation and are excluded from the admissibility requirement).
    """

    descriptor: dict
    triads_scanned: int
    entries: list = field(default_factory=list)

    @property
    def gamma_admissible(self) -> bool:
        return not any(e.all_horizontal_nonzero for e in self.entries)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n1", "n2", "n3", "k1", "k2", "k3", "m1", "m2", "m3", "Q_num", "Q_den"])
            for e in self.entries:
                w.writerow([*e.n, *e.k, *e.m, e.q.numerator, e.q.denominator])


def _discriminant_pairs(hn, fn, hk, fk, hm, fm):
    x = _pair_mul(hn, _pair_mul(fk, fm))
    y = _pair_mul(fn, _pair_mul(hk, fm))
    z = _pair_mul(fn, _pair_mul(fk, hm))
    t = (x[0] - y[0] - z[0], x[1] - y[1] - z[1])
    yz = _pair_mul(y, z)
    q = _pair_mul(t, t)
    return (q[0] - 4 * yz[0], q[1] - 4 * yz[1])


def gamma_scan(fset: FrequencySet) -> AdmissibilityReport:
    """Report every triad with vanishing resonance discriminant.

    Scans all triads whose horizontal parts are not all zero, in exact
    arithmetic; an exhaustive scan is its own oracle.  An empty list of
    entries with all horizontal parts nonzero certifies the dilation
    admissible at this truncation radius.
    """
    from .lattice import triad_arrays

    n_ord, k_ord, m_ord = triad_arrays(fset)
    hz = fset.horizontal_zero
    keep = ~(hz[n_ord] & hz[k_ord] & hz[m_ord])
    n_ord, k_ord, m_ord = n_ord[keep], k_ord[keep], m_ord[keep]

    (h_rat, h_irr), (f_rat, f_irr) = _norm_pairs(fset)
    q = _discriminant_pairs(
        (h_rat[n_ord], h_irr[n_ord]),
        (f_rat[n_ord], f_irr[n_ord]),
        (h_rat[k_ord], h_irr[k_ord]),
        (f_rat[k_ord], f_irr[k_ord]),
        (h_rat[m_ord], h_irr[m_ord]),
        (f_rat[m_ord], f_irr[m_ord]),
    )
    zero = _pair_is_zero(q)
    report = AdmissibilityReport(fset.to_descriptor(), int(n_ord.shape[0]))
    for i in np.flatnonzero(zero):
        report.entries.append(
            AdmissibilityEntry(
                fset.member(int(n_ord[i])),
                fset.member(int(k_ord[i])),
                fset.member(int(m_ord[i])),
                Fraction(0),
            )
        )
    return report


# -- restricted-convolution census -----------------------------------------


@dataclass
class CensusResult:
    """Per-shell census of exactly-resonant wavevectors.

    ``sup_sum`` is the largest over output modes of the shell-restricted
    sum of 1/|k| over exact zeros of the discriminant;
    ``implied_constant`` divides it by 2^i.  ``max_fiber_count`` is the
    largest number of resonant third components over any (k1, k2) fiber
    met in the scan.
    """

    shell_index: int
    sup_sum: float
    implied_constant: float
    max_fiber_count: int
    shell_size: int
    per_mode_sums: np.ndarray


def write_census_csv(results, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "sup_sum", "implied_constant"])
        for r in results:
            w.writerow([r.shell_index, repr(r.sup_sum), repr(r.implied_constant)])


def restricted_convolution_census(
    fset: FrequencySet, shell_index: int, chunk: int = 96
) -> CensusResult:
    """Census of resonant triads k + m + n = 0 with k in a dyadic shell.

    Requires the periodic lattice at identity dilation (the counting
    statement is specific to it).  For every output mode n with
    horizontal part nonzero, sums 1/|k| over shell wavevectors k with
    m = -n - k in the set and discriminant exactly zero, entirely in
    int64 arithmetic (exact at these bounds).
    """
    if fset.kind is not LatticeKind.CUBIC or not fset.dilation.is_identity:
        raise ValueError("census requires the periodic lattice at identity dilation")
    if 3 * fset.M * fset.M > _INT64_NORM_BOUND:
        raise ValueError("truncation too large for exact int64 census")

    lo, hi = 4**shell_index, 4 ** (shell_index + 1)
    ksq = np.sum(fset.coords * fset.coords, axis=1)
    shell = (ksq >= lo) & (ksq <= hi)
    if not shell.any():
        raise ValueError(
            f"shell 2^{shell_index} <= |k| <= 2^{shell_index + 1} is empty within truncation M={fset.M}"
        )
    kc = fset.coords[shell]
    inv_k = 1.0 / np.sqrt(ksq[shell].astype(float))
    hk = (kc[:, 0] * kc[:, 0] + kc[:, 1] * kc[:, 1]).astype(np.int64)
    fk = hk + kc[:, 2] * kc[:, 2]

    # fiber id of each shell wavevector (shared k1, k2)
    side = 2 * fset.M + 1
    fiber = (kc[:, 0] + fset.M) * side + (kc[:, 1] + fset.M)

    out_modes = np.flatnonzero(~fset.horizontal_zero)
    sums = np.zeros(fset.size)
    max_fiber = 0
    M = fset.M
    for start in range(0, out_modes.size, chunk):
        nb = out_modes[start : start + chunk]
        nc = fset.coords[nb]  # (C,3)
        mc = -nc[:, None, :] - kc[None, :, :]  # (C,S,3)
        valid = np.all(np.abs(mc) <= M, axis=2) & np.any(mc != 0, axis=2)
        hn = (nc[:, 0] * nc[:, 0] + nc[:, 1] * nc[:, 1]).astype(np.int64)[:, None]
        fn = hn + (nc[:, 2] * nc[:, 2])[:, None]
        hm = mc[:, :, 0] * mc[:, :, 0] + mc[:, :, 1] * mc[:, :, 1]
        fm = hm + mc[:, :, 2] * mc[:, :, 2]
        x = hn * (fk[None, :] * fm)
        y = fn * (hk[None, :] * fm)
        z = fn * (fk[None, :] * hm)
        t = x - y - z
        q = t * t - 4 * (y * z)
        chi = (q == 0) & valid
        sums[nb] = chi.dot(inv_k)
        rows, cols = np.nonzero(chi)
        if rows.size:
            pair_ids = rows.astype(np.int64) * (side * side) + fiber[cols]
            _, counts = np.unique(pair_ids, return_counts=True)
            max_fiber = max(max_fiber, int(counts.max()))

    sup = float(sums.max())
    return CensusResult(
        shell_index=shell_index,
        sup_sum=sup,
        implied_constant=sup / 2**shell_index,
        max_fiber_count=max_fiber,
        shell_size=int(shell.sum()),
        per_mode_sums=sums,
    )


def resonant_fiber_count(fset: FrequencySet, n, k1: int, k2: int) -> int:
    """Count third components k3 with an exactly resonant (n, k, -n-k).

    The count runs over the whole truncated fiber, not a single shell;
    at most eight can occur when the output mode has nonzero horizontal
    part, since the discriminant is degree eight in k3 with leading
    coefficient |n_h|^4.
    """
    if fset.kind is not LatticeKind.CUBIC or not fset.dilation.is_identity:
        raise ValueError("fiber count requires the periodic lattice at identity dilation")
    M = fset.M
    count = 0
    for k3 in range(-M, M + 1):
        k = (k1, k2, k3)
        m = (-n[0] - k1, -n[1] - k2, -n[2] - k3)
        if k == (0, 0, 0) or m == (0, 0, 0):
            continue
        if max(abs(c) for c in m) > M:
            continue
        q = resonance_discriminant(n, k, m, fset.dilation, fset.kind)
        if q == 0:
            count += 1
    return count
