"""Craya-Herring wave-vortex frames and the extended Leray projector.

Every nonzero frequency carries an orthonormal basis of C^4 made of two
wave vectors q^{+1}, q^{-1} (eigenvectors of the stratification matrix
S = P J P with eigenvalues +/- i omega), the vortex vector q^0 and the
divergence direction q^div.  Velocity-buoyancy 4-vectors decompose into
three amplitudes along the first three; divergence-free data has no
component along the fourth.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np

from .lattice import (
    DilationFactors,
    FrequencySet,
    LatticeKind,
    _float_coords,
    dilated_geometry,
)

#: Skew coupling between vertical velocity and buoyancy.  The sign is
#: chosen so that S q^{+1} = +i omega q^{+1} (swapping it only relabels
#: the two wave branches).
J_COUPLING = np.array(
    [
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0, 0.0],
    ]
)

_INV_SQRT2 = 1.0 / sqrt(2.0)


class DivergenceError(ValueError):
    """Input spectral vector has a divergence component beyond tolerance."""


@dataclass(frozen=True)
class CrayaHerringFrame:
    """Orthonormal 4-vector frame and frequency of one mode."""

    qp: np.ndarray
    qm: np.ndarray
    q0: np.ndarray
    qdiv: np.ndarray
    omega: float
    horizontal_zero: bool

    def q(self, sigma: int) -> np.ndarray:
        return {1: self.qp, -1: self.qm, 0: self.q0}[sigma]


@dataclass(frozen=True)
class WaveAmplitudes:
    """Amplitudes along q^{-1}, q^0, q^{+1}."""

    am: complex
    a0: complex
    ap: complex


def _frame_vectors(coord, omega, horizontal_zero):
    if horizontal_zero:
        qp = np.array([0.5, 0.5, 0.0, _INV_SQRT2], dtype=complex)
        qm = np.array([-0.5, -0.5, 0.0, _INV_SQRT2], dtype=complex)
        q0 = np.array([-_INV_SQRT2, _INV_SQRT2, 0.0, 0.0], dtype=complex)
        qdiv = np.array([0.0, 0.0, 1.0, 0.0], dtype=complex)
        return qp, qm, q0, qdiv
    n1, n2, n3 = coord
    hsq = n1 * n1 + n2 * n2
    h = sqrt(hsq)
    f = sqrt(hsq + n3 * n3)
    c = 1.0 / (sqrt(2.0) * hsq)
    qp = c * np.array(
        [1j * omega * n1 * n3, 1j * omega * n2 * n3, -1j * hsq * omega, hsq],
        dtype=complex,
    )
    qm = np.conj(qp)
    q0 = np.array([-n2 / h, n1 / h, 0.0, 0.0], dtype=complex)
    qdiv = np.array([n1 / f, n2 / f, n3 / f, 0.0], dtype=complex)
    return qp, qm, q0, qdiv


def frame(
    n, dilation: DilationFactors, kind: LatticeKind = LatticeKind.CUBIC
) -> CrayaHerringFrame:
    """Frame of a single mode, evaluated on the dilated frequency.

    omega comes from the exact squared norms (a single float square
    root); the closed-form vectors are evaluated in floats.
    """
    geom = dilated_geometry(n, dilation, kind)
    coords = np.array([[int(n[0]), int(n[1]), int(n[2])]], dtype=np.int64)
    coord = _float_coords(kind, coords, dilation)[0]
    omega = geom.omega()
    qp, qm, q0, qdiv = _frame_vectors(coord, omega, geom.horizontal_zero)
    return CrayaHerringFrame(qp, qm, q0, qdiv, omega, geom.horizontal_zero)


class FrameSet:
    """Dense frame cache aligned with FrequencySet ordinals.

    Immutable after construction; rows of ``qp``/``qm``/``q0``/``qdiv``
    are the frame vectors, ``omega`` the mode frequencies.
    """

    def __init__(self, fset: FrequencySet):
        self.fset = fset
        K = fset.size
        self.qp = np.empty((K, 4), dtype=complex)
        self.qm = np.empty((K, 4), dtype=complex)
        self.q0 = np.empty((K, 4), dtype=complex)
        self.qdiv = np.empty((K, 4), dtype=complex)
        self.horizontal_zero = fset.horizontal_zero.copy()
        with np.errstate(invalid="ignore", divide="ignore"):
            self.omega = np.sqrt(fset.hsq_float / fset.fsq_float)
        self.omega[self.horizontal_zero] = 0.0

        hz = self.horizontal_zero
        coords = fset.dilated_coords
        n1, n2, n3 = coords[:, 0], coords[:, 1], coords[:, 2]
        hsq = fset.hsq_float
        with np.errstate(invalid="ignore", divide="ignore"):
            h = np.sqrt(hsq)
            f = np.sqrt(fset.fsq_float)
            c = 1.0 / (sqrt(2.0) * hsq)
            self.qp[:, 0] = c * 1j * self.omega * n1 * n3
            self.qp[:, 1] = c * 1j * self.omega * n2 * n3
            self.qp[:, 2] = -1j * self.omega * c * hsq
            self.qp[:, 3] = c * hsq
            self.q0[:, 0] = -n2 / h
            self.q0[:, 1] = n1 / h
            self.q0[:, 2] = 0.0
            self.q0[:, 3] = 0.0
            self.qdiv[:, :3] = coords / f[:, None]
            self.qdiv[:, 3] = 0.0
        np.conj(self.qp, out=self.qm)
        if hz.any():
            qp0, qm0, q00, qd0 = _frame_vectors(None, 0.0, True)
            self.qp[hz] = qp0
            self.qm[hz] = qm0
            self.q0[hz] = q00
            self.qdiv[hz] = qd0

    @classmethod
    def build(cls, fset: FrequencySet) -> "FrameSet":
        return cls(fset)

    def frame(self, ordinal: int) -> CrayaHerringFrame:
        return CrayaHerringFrame(
            self.qp[ordinal],
            self.qm[ordinal],
            self.q0[ordinal],
            self.qdiv[ordinal],
            float(self.omega[ordinal]),
            bool(self.horizontal_zero[ordinal]),
        )

    def q(self, sigma: int) -> np.ndarray:
        return {1: self.qp, -1: self.qm, 0: self.q0}[sigma]


def extended_leray(
    n, dilation: DilationFactors, kind: LatticeKind = LatticeKind.CUBIC
) -> np.ndarray:
    """4x4 projector removing the gradient direction of the dilated mode.

    Identity on the buoyancy component, Leray block on the velocity.
    """
    coords = np.array([[int(n[0]), int(n[1]), int(n[2])]], dtype=np.int64)
    if not coords.any():
        raise ValueError("zero mode has no projector")
    v = _float_coords(kind, coords, dilation)[0]
    P = np.eye(4)
    P[:3, :3] -= np.outer(v, v) / np.dot(v, v)
    return P


def wave_matrix(
    n, dilation: DilationFactors, kind: LatticeKind = LatticeKind.CUBIC
) -> np.ndarray:
    """Stratification matrix S = P J P of one mode.

    Vanishes identically on horizontal-zero modes; otherwise its
    nonzero eigenpairs are (+i omega, q^{+1}) and (-i omega, q^{-1}).
    """
    P = extended_leray(n, dilation, kind)
    return P @ J_COUPLING @ P


def decompose(vhat, fr: CrayaHerringFrame, tol_div: float = 1e-10, mode=None):
    """Project a divergence-free 4-vector onto the three amplitude slots.

    Raises DivergenceError when the component along q^div exceeds
    ``tol_div`` relative to the vector norm; violations indicate bad
    input and are never silently projected away.
    """
    vhat = np.asarray(vhat, dtype=complex)
    scale = float(np.linalg.norm(vhat))
    div = complex(np.dot(vhat, np.conj(fr.qdiv)))
    if scale > 0 and abs(div) > tol_div * scale:
        label = f" at mode {mode}" if mode is not None else ""
        raise DivergenceError(
            f"divergence amplitude {abs(div):.3e} exceeds {tol_div:.1e} x |v|{label}"
        )
    return WaveAmplitudes(
        am=complex(np.dot(vhat, np.conj(fr.qm))),
        a0=complex(np.dot(vhat, np.conj(fr.q0))),
        ap=complex(np.dot(vhat, np.conj(fr.qp))),
    )


def reconstruct(a: WaveAmplitudes, fr: CrayaHerringFrame) -> np.ndarray:
    """Inverse of `decompose` on divergence-free vectors."""
    return a.am * fr.qm + a.a0 * fr.q0 + a.ap * fr.qp


def helmholtz_decompose(
    uhat, n, dilation: DilationFactors, kind: LatticeKind = LatticeKind.CUBIC
):
    """Split a spectral velocity into solenoidal part and gradient potential.

    Returns (w_hat, pi_hat) with u = w + i n~ pi in symbols; w is the
    Leray projection and pi the scalar potential of the gradient part.
    """
    uhat = np.asarray(uhat, dtype=complex)
    coords = np.array([[int(n[0]), int(n[1]), int(n[2])]], dtype=np.int64)
    if not coords.any():
        raise ValueError("zero mode has no Helmholtz decomposition")
    v = _float_coords(kind, coords, dilation)[0]
    nsq = float(np.dot(v, v))
    pi_hat = -1j * complex(np.dot(v, uhat)) / nsq
    w_hat = uhat - 1j * v * pi_hat
    return w_hat, pi_hat
