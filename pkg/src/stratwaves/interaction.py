"""Triad interaction tables and the bilinear forms of the amplitude system.

The convection term couples amplitude triples through coefficients
``-i (q^{s1}_k . m~) (q^{s2}_m . q^{s0*}_n)`` over all triads n = k + m
and branch signs.  Coefficients are time- and stiffness-independent, so
they are precomputed once into a flat table split by the exact
resonance verdict: the resonant partition is summed as-is, the
non-resonant partition carries oscillatory phases exp(i w N t), and the
oscillatory antiderivative additionally divides by (i N w).

Summation order is fixed (output ordinal, then k, then sign triple), so
results are reproducible bit-for-bit.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .basis import FrameSet
from .lattice import FrequencySet, triad_arrays
from .resonance import SIGMA_TRIPLES, SigmaTriple, triad_sigma_verdicts

#: Coefficients with magnitude at or below this are exact zeros
#: contaminated by rounding and are dropped at table build time.
COEFF_CUTOFF = 1e-14

TABLE_VERSION = 1

#: Limit-system channel selection: for the vortex output the vortex
#: self-interaction plus the cancelling wave pair; for wave outputs all
#: channels except the identically-vanishing ones.
LIMIT_CHANNELS = {
    0: ((0, 0), (1, -1), (-1, 1)),
    1: ((1, 1), (1, -1), (-1, 1), (-1, -1), (1, 0), (0, 1)),
    -1: ((1, 1), (1, -1), (-1, 1), (-1, -1), (-1, 0), (0, -1)),
}
CANCELLING_PAIR = ((1, -1), (-1, 1))


class AmplitudeState:
    """Complex amplitudes (c^{-1}, c^0, c^{+1}) on a frequency set.

    ``data`` has shape (3, K) with rows ordered by branch -1, 0, +1 and
    columns aligned with FrequencySet ordinals.  The zero mode is
    structurally absent.  ``t`` tags the time the snapshot belongs to.
    """

    __slots__ = ("fset", "data", "t")

    def __init__(self, fset: FrequencySet, data=None, t: float = 0.0):
        self.fset = fset
        if data is None:
            data = np.zeros((3, fset.size), dtype=complex)
        else:
            data = np.asarray(data, dtype=complex)
            if data.shape != (3, fset.size):
                raise ValueError(f"state shape {data.shape} != (3, {fset.size})")
        self.data = data
        self.t = float(t)

    @classmethod
    def zeros(cls, fset: FrequencySet, t: float = 0.0) -> "AmplitudeState":
        return cls(fset, None, t)

    def branch(self, sigma: int) -> np.ndarray:
        """View of one branch row (sigma in {-1, 0, +1})."""
        return self.data[sigma + 1]

    def copy(self) -> "AmplitudeState":
        return AmplitudeState(self.fset, self.data.copy(), self.t)

    def ell1(self) -> float:
        """Sum of amplitude magnitudes over all modes and branches."""
        return float(np.abs(self.data).sum())

    def energy(self) -> float:
        """Squared l2 norm over all modes and branches."""
        return float((np.abs(self.data) ** 2).sum())


@dataclass(frozen=True)
class TriadEntry:
    """One interaction coefficient, for inspection and tests."""

    n: int
    k: int
    m: int
    sigma: SigmaTriple
    coeff: complex
    omega: float
    resonant: bool


class TriadTable:
    """Precomputed interaction coefficients, split by exact resonance.

    Immutable after build.  Flat gather/scatter indices combine branch
    and mode ordinal (branch-major), so a whole right-hand side is two
    passes of gather - multiply - bincount.
    """

    _FIELDS = ("out", "k", "m", "s0", "s1", "s2", "coeff", "omega")

    def __init__(self, fset, frames, resonant, nonresonant):
        self.fset = fset
        self.frames = frames
        self.res = resonant
        self.non = nonresonant
        K = fset.size
        self._nflat = 3 * K
        for part in (self.res, self.non):
            part["osel"] = (part["s0"].astype(np.int64) + 1) * K + part["out"]
            part["ksel"] = (part["s1"].astype(np.int64) + 1) * K + part["k"]
            part["msel"] = (part["s2"].astype(np.int64) + 1) * K + part["m"]
        self._sigma0_cache = {}
        self._limit_sel = None
        self._direct = None

    # -- metadata ---------------------------------------------------------

    @property
    def key(self) -> str:
        return hashlib.sha256(self.fset.descriptor_json().encode()).hexdigest()

    @property
    def omega_max(self) -> float:
        if self.non["omega"].size == 0:
            return 0.0
        return float(np.abs(self.non["omega"]).max())

    @property
    def omega_min_nonzero(self) -> float:
        if self.non["omega"].size == 0:
            return np.inf
        return float(np.abs(self.non["omega"]).min())

    def counts(self):
        return self.res["coeff"].size, self.non["coeff"].size

    def entries(self, resonant=None):
        """Yield TriadEntry records (optionally one partition only)."""
        parts = []
        if resonant in (None, True):
            parts.append((self.res, True))
        if resonant in (None, False):
            parts.append((self.non, False))
        for part, flag in parts:
            for i in range(part["coeff"].size):
                yield TriadEntry(
                    int(part["out"][i]),
                    int(part["k"][i]),
                    int(part["m"][i]),
                    SigmaTriple(int(part["s0"][i]), int(part["s1"][i]), int(part["s2"][i])),
                    complex(part["coeff"][i]),
                    float(part["omega"][i]),
                    flag,
                )

    # -- cached selections --------------------------------------------------

    def _sigma0_part(self, part_name: str, sigma0: int, allowed=None):
        key = (part_name, sigma0, None if allowed is None else frozenset(allowed))
        cached = self._sigma0_cache.get(key)
        if cached is not None:
            return cached
        part = self.res if part_name == "res" else self.non
        mask = part["s0"] == sigma0
        if allowed is not None:
            chan = np.zeros_like(mask)
            for s1, s2 in allowed:
                chan |= (part["s1"] == s1) & (part["s2"] == s2)
            mask &= chan
        idx = np.flatnonzero(mask)
        sel = {
            "out": part["out"][idx],
            "ksel": part["ksel"][idx],
            "msel": part["msel"][idx],
            "coeff": part["coeff"][idx],
            "omega": part["omega"][idx],
        }
        self._sigma0_cache[key] = sel
        return sel

    def direct(self) -> "DirectConvolution":
        """Lazily built whole-sum evaluator (see DirectConvolution)."""
        if self._direct is None:
            self._direct = DirectConvolution(self.fset, self.frames)
        return self._direct

    def _merged(self, part, idx, cache, key):
        """Entry subset laid out for segment summation, cached."""
        if key in cache:
            return cache[key]
        scatter = _SegmentSum(part["osel"][idx], self._nflat)
        perm = idx[scatter.order]
        sel = {
            "ksel": part["ksel"][perm],
            "msel": part["msel"][perm],
            "coeff": part["coeff"][perm],
            "omega": part["omega"][perm],
            "scatter": scatter,
        }
        cache[key] = sel
        return sel

    def resonant_selection(self):
        """All resonant entries, segment-sum layout."""
        if self._limit_sel is None:
            self._limit_sel = {}
        idx = np.arange(self.res["coeff"].size)
        return self._merged(self.res, idx, self._limit_sel, "res_all")

    def nonresonant_selection(self):
        """All non-resonant entries, segment-sum layout."""
        if self._limit_sel is None:
            self._limit_sel = {}
        idx = np.arange(self.non["coeff"].size)
        return self._merged(self.non, idx, self._limit_sel, "non_all")

    def limit_selection(self, drop_cancelling_pair: bool = False):
        """Resonant entries of the limit system's channel table."""
        if self._limit_sel is None:
            self._limit_sel = {}
        key = ("limit", bool(drop_cancelling_pair))
        if key in self._limit_sel:
            return self._limit_sel[key]
        part = self.res
        mask = np.zeros(part["coeff"].size, dtype=bool)
        for s0, channels in LIMIT_CHANNELS.items():
            for s1, s2 in channels:
                if drop_cancelling_pair and s0 == 0 and (s1, s2) in CANCELLING_PAIR:
                    continue
                mask |= (part["s0"] == s0) & (part["s1"] == s1) & (part["s2"] == s2)
        return self._merged(part, np.flatnonzero(mask), self._limit_sel, key)

    # -- persistence --------------------------------------------------------

    def save(self, path):
        payload = {"version": np.int64(TABLE_VERSION), "key": np.bytes_(self.key.encode())}
        for name, part in (("res", self.res), ("non", self.non)):
            for f in self._FIELDS:
                payload[f"{name}_{f}"] = part[f]
        np.savez(path, **payload)

    @classmethod
    def load(cls, path, fset: FrequencySet, frames: FrameSet) -> "TriadTable":
        with np.load(path) as z:
            if int(z["version"]) != TABLE_VERSION:
                raise ValueError("triad table cache version mismatch")
            key = bytes(z["key"]).decode()
            expect = hashlib.sha256(fset.descriptor_json().encode()).hexdigest()
            if key != expect:
                raise ValueError("triad table cache does not match this lattice")
            parts = {}
            for name in ("res", "non"):
                parts[name] = {f: z[f"{name}_{f}"] for f in cls._FIELDS}
        return cls(fset, frames, parts["res"], parts["non"])


class _SegmentSum:
    """Deterministic scatter-add onto presorted output bins via reduceat."""

    def __init__(self, out_idx: np.ndarray, nbins: int):
        self.order = np.argsort(out_idx, kind="stable")
        srt = out_idx[self.order]
        self.starts = np.flatnonzero(np.diff(srt, prepend=-1))
        self.seg = srt[self.starts]
        self.nbins = nbins

    def sum_sorted(self, vals_sorted: np.ndarray) -> np.ndarray:
        """Sum values already laid out in this scatterer's order."""
        out = np.zeros(self.nbins, dtype=complex)
        if vals_sorted.size:
            out[self.seg] = np.add.reduceat(vals_sorted, self.starts)
        return out


class DirectConvolution:
    """Unsplit convection sum on phase-rotated 4-vectors.

    Summing every resonant and phased non-resonant channel at time Nt is
    identical (to roundoff) to reconstructing the 4-vectors from the
    wave-rotated amplitudes, running the plain projected convolution
    once per triad, and rotating back.  That turns 27 channel passes
    into one triad pass with mode-sized phase arrays, which is what the
    oscillatory integrator uses per stage.
    """

    def __init__(self, fset: FrequencySet, frames: FrameSet):
        n_ord, k_ord, m_ord = triad_arrays(fset)  # already output-major
        self.fset = fset
        self.frames = frames
        self.k = k_ord
        self.m = m_ord
        self.starts = np.flatnonzero(np.diff(n_ord, prepend=-1))
        self.seg = n_ord[self.starts]
        self.mc = [np.ascontiguousarray(fset.dilated_coords[m_ord, j]) for j in range(3)]
        self.coord_cols = [np.ascontiguousarray(fset.dilated_coords[:, j]) for j in range(3)]
        self.inv_fsq = 1.0 / fset.fsq_float

    def _segment(self, vals: np.ndarray) -> np.ndarray:
        out = np.zeros(self.fset.size, dtype=complex)
        out[self.seg] = np.add.reduceat(vals, self.starts)
        return out

    def apply_wave_vars(self, a_data: np.ndarray) -> np.ndarray:
        """Nonlinear term in wave variables: project(-i (v_k . m~) v_m)."""
        fr = self.frames
        v = [
            a_data[0] * fr.qm[:, j] + a_data[1] * fr.q0[:, j] + a_data[2] * fr.qp[:, j]
            for j in range(4)
        ]
        s = -1j * (
            v[0][self.k] * self.mc[0]
            + v[1][self.k] * self.mc[1]
            + v[2][self.k] * self.mc[2]
        )
        W = [self._segment(s * v[j][self.m]) for j in range(4)]
        ndot = (
            self.coord_cols[0] * W[0]
            + self.coord_cols[1] * W[1]
            + self.coord_cols[2] * W[2]
        ) * self.inv_fsq
        for j in range(3):
            W[j] -= self.coord_cols[j] * ndot
        out = np.empty_like(a_data)
        for row, q in ((0, fr.qm), (1, fr.q0), (2, fr.qp)):
            qc = np.conj(q)
            out[row] = W[0] * qc[:, 0] + W[1] * qc[:, 1] + W[2] * qc[:, 2] + W[3] * qc[:, 3]
        return out

    def apply(self, c_data: np.ndarray, Nt: float) -> np.ndarray:
        """Same sum in the slow variables at phase angle Nt."""
        rot = np.exp(1j * Nt * self.frames.omega)
        a = np.empty_like(c_data)
        a[0] = c_data[0] * np.conj(rot)
        a[1] = c_data[1]
        a[2] = c_data[2] * rot
        out = self.apply_wave_vars(a)
        out[0] *= rot
        out[2] *= np.conj(rot)
        return out


def build_triad_table(fset: FrequencySet, frames: FrameSet) -> TriadTable:
    """Compute every interaction coefficient and classify it exactly.

    Entries with |coeff| <= 1e-14 are rounding residue of structural
    zeros (for instance the fully-signed channels on all-horizontal-zero
    triads) and are dropped; admitting them would spoil the cancellation
    identities downstream.  Resonant entries store omega exactly 0.0.
    """
    if frames.fset is not fset:
        raise ValueError("frame set is not aligned with the frequency set")
    n_ord, k_ord, m_ord = triad_arrays(fset)
    verdicts = triad_sigma_verdicts(fset, n_ord, k_ord, m_ord)

    mcoords = fset.dilated_coords[m_ord]
    dot_k = {}
    for s1 in (-1, 0, 1):
        qk = frames.q(s1)[k_ord, :3]
        dot_k[s1] = np.einsum("ij,ij->i", qk, mcoords.astype(complex))
    dot_nm = {}
    for s0 in (-1, 0, 1):
        qn = np.conj(frames.q(s0)[n_ord])
        for s2 in (-1, 0, 1):
            qm = frames.q(s2)[m_ord]
            dot_nm[(s0, s2)] = np.einsum("ij,ij->i", qm, qn)
    om = {s: frames.omega[o] for s, o in (("n", n_ord), ("k", k_ord), ("m", m_ord))}

    chunks = {True: [], False: []}
    for sigma in SIGMA_TRIPLES:
        s0, s1, s2 = sigma
        coeff = -1j * dot_k[s1] * dot_nm[(s0, s2)]
        keep = np.abs(coeff) > COEFF_CUTOFF
        if not keep.any():
            continue
        res = verdicts[sigma][keep]
        omega = -s0 * om["n"][keep] + s1 * om["k"][keep] + s2 * om["m"][keep]
        omega = np.where(res, 0.0, omega)
        block = {
            "out": n_ord[keep].astype(np.int32),
            "k": k_ord[keep].astype(np.int32),
            "m": m_ord[keep].astype(np.int32),
            "s0": np.full(int(keep.sum()), s0, dtype=np.int8),
            "s1": np.full(int(keep.sum()), s1, dtype=np.int8),
            "s2": np.full(int(keep.sum()), s2, dtype=np.int8),
            "coeff": coeff[keep],
            "omega": omega,
        }
        for flag in (True, False):
            mask = res if flag else ~res
            if mask.any():
                chunks[flag].append({f: v[mask] for f, v in block.items()})

    def assemble(blocks):
        if not blocks:
            return {
                "out": np.zeros(0, np.int32),
                "k": np.zeros(0, np.int32),
                "m": np.zeros(0, np.int32),
                "s0": np.zeros(0, np.int8),
                "s1": np.zeros(0, np.int8),
                "s2": np.zeros(0, np.int8),
                "coeff": np.zeros(0, complex),
                "omega": np.zeros(0, float),
            }
        merged = {f: np.concatenate([b[f] for b in blocks]) for f in blocks[0]}
        order = np.lexsort(
            (merged["s2"], merged["s1"], merged["s0"], merged["k"], merged["out"])
        )
        return {f: np.ascontiguousarray(v[order]) for f, v in merged.items()}

    return TriadTable(fset, frames, assemble(chunks[True]), assemble(chunks[False]))


# -- evaluation -------------------------------------------------------------


def _state_flat(state) -> np.ndarray:
    data = state.data if isinstance(state, AmplitudeState) else np.asarray(state)
    return data.reshape(-1)


def _scatter(out_idx, vals, nbins) -> np.ndarray:
    return np.bincount(out_idx, weights=vals.real, minlength=nbins) + 1j * np.bincount(
        out_idx, weights=vals.imag, minlength=nbins
    )


def apply_bbar(table: TriadTable, g, h, sigma0: int, allowed=None) -> np.ndarray:
    """Resonant bilinear form for one output branch.

    ``allowed`` optionally restricts the (s1, s2) argument channels;
    None means all nine.  Returns a per-mode complex vector.
    """
    sel = table._sigma0_part("res", sigma0, allowed)
    gf, hf = _state_flat(g), _state_flat(h)
    vals = sel["coeff"] * gf[sel["ksel"]] * hf[sel["msel"]]
    return _scatter(sel["out"], vals, table.fset.size)


def apply_btilde(table: TriadTable, Nt: float, g, h, sigma0: int, allowed=None) -> np.ndarray:
    """Non-resonant bilinear form with phases exp(i w N t)."""
    sel = table._sigma0_part("non", sigma0, allowed)
    gf, hf = _state_flat(g), _state_flat(h)
    vals = sel["coeff"] * np.exp(1j * Nt * sel["omega"]) * gf[sel["ksel"]] * hf[sel["msel"]]
    return _scatter(sel["out"], vals, table.fset.size)


def apply_bscript(table: TriadTable, Nt: float, g, h, sigma0: int, N: float) -> np.ndarray:
    """Oscillatory antiderivative of the non-resonant form.

    Each entry carries exp(i w N t) / (i N w); the partition guarantees
    w != 0 so the division is always defined.  Its time derivative at
    frozen arguments reproduces `apply_btilde`.
    """
    if N <= 0:
        raise ValueError("antiderivative requires N > 0")
    sel = table._sigma0_part("non", sigma0)
    gf, hf = _state_flat(g), _state_flat(h)
    w = sel["omega"]
    weight = np.exp(1j * Nt * w) / (1j * N * w)
    vals = sel["coeff"] * weight * gf[sel["ksel"]] * hf[sel["msel"]]
    return _scatter(sel["out"], vals, table.fset.size)


def _viscosity_rows(nu: float, kappa: float) -> np.ndarray:
    wave = 0.5 * (nu + kappa)
    return np.array([wave, nu, wave])


def _selection_sum(sel, gf, hf, weight=None) -> np.ndarray:
    vals = sel["coeff"] * gf[sel["ksel"]] * hf[sel["msel"]]
    if weight is not None:
        vals *= weight
    return sel["scatter"].sum_sorted(vals)


def nonlinear_resonant(table: TriadTable, data: np.ndarray) -> np.ndarray:
    """B-bar over all 27 channels, all output branches at once."""
    flat = data.reshape(-1)
    return _selection_sum(table.resonant_selection(), flat, flat).reshape(data.shape)


def nonlinear_full(table: TriadTable, data: np.ndarray, Nt: float = 0.0):
    """B-bar + phased B-tilde over all channels and output branches."""
    out = nonlinear_resonant(table, data)
    flat = data.reshape(-1)
    sel = table.nonresonant_selection()
    phase = np.exp(1j * Nt * sel["omega"])
    out += _selection_sum(sel, flat, flat, phase).reshape(data.shape)
    return out


def nonlinear_limit(table: TriadTable, data: np.ndarray, drop_cancelling_pair=False):
    """Resonant limit-channel sums for all output branches."""
    sel = table.limit_selection(drop_cancelling_pair)
    flat = data.reshape(-1)
    return _selection_sum(sel, flat, flat).reshape(data.shape)


def rhs_full(table: TriadTable, state, t: float, *, nu: float, kappa: float, N: float):
    """Right-hand side of the oscillatory amplitude system.

    Vortex branch dissipates with nu, wave branches with (nu+kappa)/2;
    the nonlinearity is the complete resonant plus phased non-resonant
    convolution.
    """
    data = state.data if isinstance(state, AmplitudeState) else np.asarray(state)
    out = -_viscosity_rows(nu, kappa)[:, None] * table.fset.fsq_float[None, :] * data
    out += nonlinear_full(table, data, Nt=N * t)
    return out


def oscillatory_increment(table: TriadTable, data, N: float, t0: float, t1: float):
    """Exact step integral of the phased non-resonant form at frozen data.

    Equals the oscillatory antiderivative evaluated at N*t1 minus its
    value at N*t0, summed over all output branches; used by the averaged
    stepper for very large N.
    """
    sel = table.nonresonant_selection()
    flat = np.asarray(data.data if isinstance(data, AmplitudeState) else data).reshape(-1)
    w = sel["omega"]
    weight = (np.exp(1j * (N * t1) * w) - np.exp(1j * (N * t0) * w)) / (1j * N * w)
    return _selection_sum(sel, flat, flat, weight).reshape((3, table.fset.size))


def rhs_limit(table: TriadTable, state, *, nu: float, kappa: float, drop_cancelling_pair=False):
    """Right-hand side of the limit system (resonant channels only).

    The vortex equation keeps its self-interaction plus the two
    mutually-cancelling wave channels; evaluating the pair costs little
    and keeps the cancellation continuously exercised.  A flag drops it
    for performance runs.
    """
    data = state.data if isinstance(state, AmplitudeState) else np.asarray(state)
    out = -_viscosity_rows(nu, kappa)[:, None] * table.fset.fsq_float[None, :] * data
    out += nonlinear_limit(table, data, drop_cancelling_pair)
    return out


def rhs_remainder(table: TriadTable, r, c, b, t: float, *, nu: float, kappa: float, N: float):
    """Right-hand side of the remainder system r = c - b.

    Linear dissipation of r plus B-bar(r, c) and B-bar(b, r) over all
    channels plus the phased non-resonant form of c with itself.
    """
    rd = r.data if isinstance(r, AmplitudeState) else np.asarray(r)
    cd = c.data if isinstance(c, AmplitudeState) else np.asarray(c)
    bd = b.data if isinstance(b, AmplitudeState) else np.asarray(b)
    out = -_viscosity_rows(nu, kappa)[:, None] * table.fset.fsq_float[None, :] * rd
    rf, cf, bf = rd.reshape(-1), cd.reshape(-1), bd.reshape(-1)
    res = table.resonant_selection()
    vals = res["coeff"] * (rf[res["ksel"]] * cf[res["msel"]] + bf[res["ksel"]] * rf[res["msel"]])
    out += res["scatter"].sum_sorted(vals).reshape(out.shape)
    non = table.nonresonant_selection()
    phase = np.exp(1j * (N * t) * non["omega"])
    out += _selection_sum(non, cf, cf, phase).reshape(out.shape)
    return out
