"""Time integration and physical-space services for the amplitude system.

Four systems share one integrating-factor RK4 stepper: the exact heat
factor exp(-mu |n~|^2 dt) is applied analytically per branch, so only
the bounded nonlinearity is stepped and stiffness from |n~|^2 never
limits dt.  Oscillatory phases live in the interaction coefficients,
not in the state; the oscillatory system additionally requires dt to
resolve the fastest phase, dt <= 0.2 / (N w_max).

The vortex sector of the limit system is tied to a quasi-geostrophic
scalar equation and to a two-component Navier-Stokes system through the
spectral stream-function correspondence implemented here.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field, replace
from math import ceil, sqrt

import numpy as np

from .basis import FrameSet
from .interaction import (
    AmplitudeState,
    TriadTable,
    build_triad_table,
    nonlinear_limit,
    nonlinear_resonant,
    oscillatory_increment,
    _scatter,
)
from .lattice import (
    DilationFactors,
    FrequencySet,
    LatticeKind,
    build_truncated_set,
    triad_arrays,
)


class NumericsError(RuntimeError):
    """Integration produced a non-finite value; carries the time."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class System(enum.Enum):
    FULL = "full"
    LIMIT = "limit"
    QG = "qg"
    NS2D = "ns2d"


@dataclass(frozen=True)
class SimulationConfig:
    """Physical parameters, lattice choice and time grid of one run.

    The stiffness parameter N is always recomputed as calN * sqrt(g);
    it is a property, never a stored field.
    """

    nu: float
    kappa: float
    gravity: float
    calN: float
    T: float
    dt: float
    kind: LatticeKind = LatticeKind.CUBIC
    M: int = 3
    dilation: DilationFactors = field(default_factory=DilationFactors.identity)
    sample_dt: float | None = None
    tol_div: float = 1e-10
    unit_qg_viscosity: bool = False
    drop_cancelling_pair: bool = False

    def __post_init__(self):
        if self.nu <= 0:
            raise ValueError("viscosity nu must be positive")
        if self.kappa < 0:
            raise ValueError("thermal diffusivity kappa must be nonnegative")
        if self.gravity <= 0:
            raise ValueError("gravity must be positive")
        if self.calN <= 0:
            raise ValueError("Brunt-Vaisala frequency must be positive")
        if self.T <= 0 or self.dt <= 0:
            raise ValueError("time horizon and step must be positive")
        if self.M < 1:
            raise ValueError("truncation radius M must be >= 1")
        if self.N <= self.gravity:
            warnings.warn(
                f"stiffness N = {self.N:.3g} does not exceed gravity {self.gravity:.3g}; "
                "the large-stratification regime assumes N > g",
                stacklevel=2,
            )

    @property
    def N(self) -> float:
        return self.calN * sqrt(self.gravity)

    @property
    def qg_viscosity(self) -> float:
        return 1.0 if self.unit_qg_viscosity else self.nu

    def with_stiffness(self, N: float) -> "SimulationConfig":
        """Copy with calN adjusted so that calN * sqrt(g) equals N."""
        if N <= 0:
            raise ValueError("stiffness must be positive")
        return replace(self, calN=N / sqrt(self.gravity))


def build_context(config: SimulationConfig):
    """Frequency set and frame cache for a configuration."""
    fset = build_truncated_set(config.kind, config.M, config.dilation)
    return fset, FrameSet.build(fset)


def oscillation_dt_bound(table: TriadTable, N: float) -> float:
    """Largest step resolving the fastest oscillatory phase, 0.2/(N w_max)."""
    wmax = table.omega_max
    if N * wmax == 0.0:
        return np.inf
    return 0.2 / (abs(N) * wmax)


# -- scalar / planar spectral fields ----------------------------------------


@dataclass
class ScalarField:
    """Spectral scalar on the lattice; horizontal-zero modes carry zero."""

    fset: FrequencySet
    data: np.ndarray
    t: float = 0.0

    def copy(self):
        return ScalarField(self.fset, self.data.copy(), self.t)

    def ell1(self) -> float:
        return float(np.abs(self.data).sum())


@dataclass
class PlanarField:
    """Two-component horizontal spectral field (divergence-free)."""

    fset: FrequencySet
    data: np.ndarray  # (2, K)
    t: float = 0.0

    def copy(self):
        return PlanarField(self.fset, self.data.copy(), self.t)

    def ell1(self) -> float:
        return float(np.abs(self.data).sum())

    def horizontal_divergence(self) -> float:
        c = self.fset.dilated_coords
        return float(np.abs(c[:, 0] * self.data[0] + c[:, 1] * self.data[1]).max())


def _require_hz_free(fset, data, what):
    hz = fset.horizontal_zero
    bad = np.abs(np.atleast_2d(data)[:, hz])
    if bad.size and bad.max() > 0.0:
        raise ValueError(f"{what} carries amplitude on a horizontal-zero mode")


def theta_from_w(w: PlanarField) -> ScalarField:
    """Stream-scalar of a horizontal field: (i n2 w1 - i n1 w2) / |n|_h."""
    _require_hz_free(w.fset, w.data, "planar field")
    c = w.fset.dilated_coords
    with np.errstate(invalid="ignore", divide="ignore"):
        h = np.sqrt(w.fset.hsq_float)
        theta = (1j * c[:, 1] * w.data[0] - 1j * c[:, 0] * w.data[1]) / h
    theta[w.fset.horizontal_zero] = 0.0
    return ScalarField(w.fset, theta, w.t)


def w_from_theta(theta: ScalarField) -> PlanarField:
    """Horizontal divergence-free field with the given stream-scalar."""
    _require_hz_free(theta.fset, theta.data, "scalar field")
    c = theta.fset.dilated_coords
    with np.errstate(invalid="ignore", divide="ignore"):
        h = np.sqrt(theta.fset.hsq_float)
        w1 = -1j * c[:, 1] / h * theta.data
        w2 = 1j * c[:, 0] / h * theta.data
    hz = theta.fset.horizontal_zero
    w1[hz] = 0.0
    w2[hz] = 0.0
    return PlanarField(theta.fset, np.stack([w1, w2]), theta.t)


def vortex_state_from_theta(theta: ScalarField) -> AmplitudeState:
    """Amplitude state whose vortex branch matches a stream-scalar.

    The vortex amplitude of the velocity field carried by theta is
    c^0 = i theta-hat; wave branches are zero.
    """
    state = AmplitudeState.zeros(theta.fset, theta.t)
    state.branch(0)[:] = 1j * theta.data
    return state


def theta_from_vortex_state(state: AmplitudeState) -> ScalarField:
    """Inverse of `vortex_state_from_theta` (theta-hat = -i c^0)."""
    return ScalarField(state.fset, -1j * state.branch(0).copy(), state.t)


# -- small bilinear tables for the scalar systems ---------------------------


class _VortexConvolution:
    """Closed-form vortex-sector kernel, shared by the QG and 2D systems.

    Coefficients cross(k~, m~) |m~|_h / (|k~|_h |n~|_h) over triads with
    all horizontal parts nonzero; outputs on horizontal-zero modes
    vanish identically so those rows are simply absent.
    """

    def __init__(self, fset: FrequencySet):
        n_ord, k_ord, m_ord = triad_arrays(fset)
        hz = fset.horizontal_zero
        keep = ~(hz[n_ord] | hz[k_ord] | hz[m_ord])
        n_ord, k_ord, m_ord = n_ord[keep], k_ord[keep], m_ord[keep]
        c = fset.dilated_coords
        cross = c[k_ord, 0] * c[m_ord, 1] - c[k_ord, 1] * c[m_ord, 0]
        h = np.sqrt(fset.hsq_float)
        self.fset = fset
        self.out = n_ord
        self.k = k_ord
        self.m = m_ord
        self.qg_coeff = cross * h[m_ord] / (h[k_ord] * h[n_ord])
        self.m_h = c[m_ord, :2]
        with np.errstate(invalid="ignore", divide="ignore"):
            self.proj_dir = c[:, :2] / h[:, None]
        self.proj_dir[hz] = 0.0

    def qg_rhs_nonlinear(self, theta: np.ndarray) -> np.ndarray:
        vals = self.qg_coeff * theta[self.k] * theta[self.m]
        return _scatter(self.out, vals, self.fset.size)

    def ns2d_rhs_nonlinear(self, w: np.ndarray) -> np.ndarray:
        adv = 1j * (
            w[0, self.k] * self.m_h[:, 0] + w[1, self.k] * self.m_h[:, 1]
        )
        out = np.stack(
            [
                _scatter(self.out, adv * w[0, self.m], self.fset.size),
                _scatter(self.out, adv * w[1, self.m], self.fset.size),
            ]
        )
        out = -out
        # remove the horizontal gradient part (pressure)
        ndot = self.proj_dir[:, 0] * out[0] + self.proj_dir[:, 1] * out[1]
        out[0] -= self.proj_dir[:, 0] * ndot
        out[1] -= self.proj_dir[:, 1] * ndot
        return out


def _vortex_convolution(fset) -> _VortexConvolution:
    cached = getattr(fset, "_vortex_convolution", None)
    if cached is None:
        cached = _VortexConvolution(fset)
        fset._vortex_convolution = cached
    return cached


# -- trajectories ------------------------------------------------------------


@dataclass
class Trajectory:
    """Sampled run: strictly increasing times, state snapshots, diagnostics."""

    system: System
    times: np.ndarray
    states: list
    diagnostics: dict


def _time_grid(config: SimulationConfig, sample_dt, T=None):
    T = config.T if T is None else T
    if sample_dt is None:
        sample_dt = config.sample_dt
    if sample_dt is None:
        sample_dt = max(T / 100.0, config.dt)
    nsamples = max(1, round(T / sample_dt))
    sample_dt = T / nsamples
    substeps = max(1, ceil(sample_dt / config.dt - 1e-12))
    return nsamples, sample_dt, substeps, sample_dt / substeps


def _lawson_rk4_step(y, t, h, E1, Eh, nl):
    F1 = nl(y, t)
    F2 = nl(Eh * (y + 0.5 * h * F1), t + 0.5 * h)
    F3 = nl(Eh * y + 0.5 * h * F2, t + 0.5 * h)
    F4 = nl(E1 * y + h * (Eh * F3), t + h)
    return E1 * y + (h / 6.0) * (E1 * F1 + 2.0 * Eh * (F2 + F3) + F4)


def _check_finite(y, t):
    if not np.isfinite(y).all():
        raise NumericsError(f"non-finite amplitude at t = {t:.6g}", t=t)


def integrate(
    system: System,
    config: SimulationConfig,
    init,
    *,
    table: TriadTable | None = None,
    frames: FrameSet | None = None,
    N_override: float | None = None,
    averaged: bool = False,
    sample_dt: float | None = None,
    T: float | None = None,
) -> Trajectory:
    """Integrate one system with the integrating-factor RK4 stepper.

    ``init`` is an AmplitudeState for FULL/LIMIT, a ScalarField for QG,
    a PlanarField for NS2D; it is never mutated.  For FULL the step must
    resolve the fastest oscillation unless ``averaged`` replaces the
    non-resonant part by its oscillatory antiderivative over each step
    (first order in 1/N, for very large N only).

    Returns a Trajectory sampled every ``sample_dt``.
    """
    system = System(system)
    fset = init.fset
    nsamples, s_dt, substeps, h = _time_grid(config, sample_dt, T)

    if system in (System.FULL, System.LIMIT):
        if table is None:
            if frames is None:
                frames = FrameSet.build(fset)
            table = build_triad_table(fset, frames)
        frames = table.frames
        N = config.N if N_override is None else float(N_override)
        if system is System.FULL and averaged and N <= 0:
            raise ValueError("the averaged stepper requires N > 0")
        if system is System.FULL and not averaged:
            bound = oscillation_dt_bound(table, N)
            if config.dt > bound * (1 + 1e-9):
                raise ValueError(
                    f"dt = {config.dt:.3g} does not resolve oscillations at N = {N:.3g}; "
                    f"need dt <= {bound:.3g}"
                )
        mu = np.array([(config.nu + config.kappa) / 2, config.nu, (config.nu + config.kappa) / 2])
        lam = mu[:, None] * fset.fsq_float[None, :]
        conv = table.direct() if system is System.FULL else None
    elif system is System.QG:
        _require_hz_free(fset, init.data, "QG initial data")
        sconv = _vortex_convolution(fset)
        lam = config.qg_viscosity * fset.fsq_float
    elif system is System.NS2D:
        _require_hz_free(fset, init.data, "planar initial data")
        sconv = _vortex_convolution(fset)
        lam = config.qg_viscosity * fset.fsq_float[None, :]

    E1 = np.exp(-lam * h)
    Eh = np.exp(-lam * (h / 2.0))

    y = init.data.copy()
    t = 0.0
    times = [0.0]
    snapshots = [_snapshot(system, fset, y, t)]

    if system is System.FULL and not averaged:
        nl = lambda z, tt: conv.apply(z, N * tt)
    elif system is System.FULL:
        nl = lambda z, _t: nonlinear_resonant(table, z)
    elif system is System.LIMIT:
        nl = lambda z, _t: nonlinear_limit(table, z, config.drop_cancelling_pair)
    elif system is System.QG:
        nl = lambda z, _t: sconv.qg_rhs_nonlinear(z)
    else:
        nl = lambda z, _t: sconv.ns2d_rhs_nonlinear(z)

    diag_N = N if system is System.FULL else 0.0 if system is System.LIMIT else None

    for s in range(nsamples):
        for j in range(substeps):
            if system is System.FULL and averaged:
                y_new = _lawson_rk4_step(y, t, h, E1, Eh, nl)
                y_new += Eh * oscillatory_increment(table, y, N, t, t + h)
                y = y_new
            else:
                y = _lawson_rk4_step(y, t, h, E1, Eh, nl)
            t += h
        t = (s + 1) * s_dt  # avoid accumulated roundoff in the clock
        _check_finite(y, t)
        times.append(t)
        snapshots.append(_snapshot(system, fset, y, t))

    diagnostics = _trajectory_diagnostics(system, snapshots, frames if system in (System.FULL, System.LIMIT) else None, diag_N)
    return Trajectory(system, np.array(times), snapshots, diagnostics)


def _snapshot(system, fset, y, t):
    if system in (System.FULL, System.LIMIT):
        return AmplitudeState(fset, y.copy(), t)
    if system is System.QG:
        return ScalarField(fset, y.copy(), t)
    return PlanarField(fset, y.copy(), t)


# -- diagnostics --------------------------------------------------------------


def ell_alpha_p(state, alpha: float, p: float = 2.0) -> float:
    """Weighted norm (sum |n~|^{p a} |c_n|^p)^{1/p} over modes and branches."""
    data = state.data if hasattr(state, "data") else np.asarray(state)
    fset = state.fset
    w = fset.fsq_float ** (alpha / 2.0)
    mags = np.abs(np.atleast_2d(data)) ** p
    return float((w[None, :] * mags).sum() ** (1.0 / p))


def mode_vectors(state: AmplitudeState, frames: FrameSet, N: float = 0.0, t=None):
    """Per-mode 4-vectors v-hat with wave phases reinstated."""
    if t is None:
        t = state.t
    rot = np.exp(1j * (N * t) * frames.omega)
    a_m = state.branch(-1) * np.conj(rot)
    a_0 = state.branch(0)
    a_p = state.branch(1) * rot
    return (
        a_m[:, None] * frames.qm + a_0[:, None] * frames.q0 + a_p[:, None] * frames.qp
    )


def anisotropy_ratio(state: AmplitudeState, frames: FrameSet, N: float = 0.0, t=None) -> float:
    """Vertical over horizontal kinetic energy of the reconstructed field."""
    vhat = mode_vectors(state, frames, N, t)
    vert = float((np.abs(vhat[:, 2]) ** 2).sum())
    horiz = float((np.abs(vhat[:, 0]) ** 2 + np.abs(vhat[:, 1]) ** 2).sum())
    if horiz == 0.0:
        return 0.0 if vert == 0.0 else np.inf
    return vert / horiz


def diagnostics(state, frames: FrameSet | None = None, N: float = 0.0) -> dict:
    """Norm record: l1, l2 energy, weighted l2, anisotropy ratio."""
    data = state.data if hasattr(state, "data") else np.asarray(state)
    rec = {
        "ell1": float(np.abs(data).sum()),
        "energy": float((np.abs(data) ** 2).sum()),
        "ell12": ell_alpha_p(state, 1.0, 2.0),
    }
    if frames is not None and isinstance(state, AmplitudeState):
        rec["anisotropy"] = anisotropy_ratio(state, frames, N)
    else:
        rec["anisotropy"] = np.nan
    return rec


def _trajectory_diagnostics(system, snapshots, frames, N):
    keys = ("ell1", "energy", "ell12", "anisotropy")
    rows = [diagnostics(s, frames, N or 0.0) for s in snapshots]
    return {k: np.array([r[k] for r in rows]) for k in keys}


# -- initial data and physical space -----------------------------------------


def initial_state_from_physical(
    u0hat, rho0hat, config: SimulationConfig, fset: FrequencySet, frames: FrameSet
) -> AmplitudeState:
    """Amplitude state of spectral velocity and buoyancy data.

    Builds the 4-vectors (u, sqrt(g)/calN * rho), applies the extended
    Leray projection and decomposes into the three amplitudes (at t = 0
    the phases are unity so these are the slow variables directly).
    """
    u0hat = np.asarray(u0hat, dtype=complex)
    rho0hat = np.asarray(rho0hat, dtype=complex)
    if u0hat.shape != (fset.size, 3) or rho0hat.shape != (fset.size,):
        raise ValueError("initial spectral data has wrong shape")
    vhat = np.concatenate(
        [u0hat, (sqrt(config.gravity) / config.calN) * rho0hat[:, None]], axis=1
    )
    c = fset.dilated_coords
    ndot = np.einsum("ij,ij->i", c.astype(complex), vhat[:, :3])
    vhat = vhat.copy()
    vhat[:, :3] -= c * (ndot / fset.fsq_float)[:, None]

    div = np.einsum("ij,ij->i", vhat, np.conj(frames.qdiv))
    scale = np.linalg.norm(vhat)
    if scale > 0 and np.abs(div).max() > config.tol_div * scale:
        worst = int(np.abs(div).argmax())
        raise ValueError(
            f"divergence violation after projection at mode {fset.member(worst)}"
        )
    state = AmplitudeState.zeros(fset)
    state.branch(-1)[:] = np.einsum("ij,ij->i", vhat, np.conj(frames.qm))
    state.branch(0)[:] = np.einsum("ij,ij->i", vhat, np.conj(frames.q0))
    state.branch(1)[:] = np.einsum("ij,ij->i", vhat, np.conj(frames.qp))
    return state


def reconstruct_physical(
    state: AmplitudeState,
    frames: FrameSet,
    config: SimulationConfig,
    grid_dims,
    t=None,
    N: float | None = None,
):
    """Evaluate the field on a uniform grid over one generator cell.

    Requires at least 2M+1 points per axis so every represented mode is
    alias-free.  Returns (u, rho) real arrays of shapes (G1,G2,G3,3) and
    (G1,G2,G3); raises NumericsError if the imaginary residue exceeds
    1e-9 relative (the state does not describe a real field).
    """
    fset = state.fset
    dims = tuple(int(d) for d in grid_dims)
    if len(dims) != 3 or min(dims) < 2 * fset.M + 1:
        raise ValueError(f"grid {dims} too coarse for M = {fset.M} (need >= {2 * fset.M + 1})")
    if N is None:
        N = config.N
    vhat = mode_vectors(state, frames, N, t)
    spec = np.zeros(dims + (4,), dtype=complex)
    idx = tuple((fset.coords[:, j] % dims[j]) for j in range(3))
    spec[idx[0], idx[1], idx[2], :] = vhat
    field_c = np.fft.ifftn(spec, axes=(0, 1, 2)) * np.prod(dims)
    scale = np.abs(field_c).max()
    if scale > 0:
        resid = np.abs(field_c.imag).max() / scale
        if resid > 1e-9:
            raise NumericsError(f"imaginary residue {resid:.2e} in physical field")
    u = field_c[..., :3].real
    rho = (config.calN / sqrt(config.gravity)) * field_c[..., 3].real
    return u, rho


# -- twin-run experiments ------------------------------------------------------


def qg_equiv_check(
    config: SimulationConfig,
    theta0: ScalarField,
    *,
    sample_dt: float | None = None,
) -> float:
    """Sup-in-time correspondence error of QG and planar twin runs.

    Integrates the scalar equation from theta0 and the two-component
    system from the matched divergence-free field with identical
    steppers; the two stay in exact correspondence up to integrator
    error.
    """
    traj_qg = integrate(System.QG, config, theta0, sample_dt=sample_dt)
    traj_ns = integrate(System.NS2D, config, w_from_theta(theta0), sample_dt=sample_dt)
    worst = 0.0
    for th, w in zip(traj_qg.states, traj_ns.states):
        diff = th.data - theta_from_w(w).data
        worst = max(worst, float(np.abs(diff).sum()))
    return worst


@dataclass
class ConvergenceResult:
    """Sup-in-time remainder between oscillatory runs and the limit run."""

    N_values: list
    sup_remainders: list
    ratios: list

    def write_csv(self, path):
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["N", "sup_remainder", "ratio_to_previous"])
            for i, (N, r) in enumerate(zip(self.N_values, self.sup_remainders)):
                ratio = "" if i == 0 else repr(self.ratios[i - 1])
                w.writerow([repr(float(N)), repr(r), ratio])


def convergence_study(
    config: SimulationConfig,
    init: AmplitudeState,
    N_list,
    *,
    table: TriadTable,
    T: float | None = None,
    sample_dt: float | None = None,
    averaged_above: float = np.inf,
) -> ConvergenceResult:
    """Integrate the limit system once and the oscillatory system per N.

    All runs share one snapshot grid; each oscillatory run picks the
    largest step resolving its phases (never larger than config.dt).
    Returns the sup-in-time l1 remainder per N and consecutive ratios.
    At N = infinity the remainder is zero by construction (same data),
    so the sequence is expected to decrease; above ``averaged_above``
    the antiderivative stepper replaces phase resolution.
    """
    N_list = list(N_list)
    if any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ValueError("N_list must be strictly increasing")
    limit_traj = integrate(
        System.LIMIT, config, init, table=table, sample_dt=sample_dt, T=T
    )
    sups, ratios = [], []
    for N in N_list:
        averaged = N > averaged_above
        cfg_N = config
        if not averaged:
            bound = oscillation_dt_bound(table, N)
            if config.dt > bound:
                cfg_N = replace(config, dt=bound)
        traj = integrate(
            System.FULL,
            cfg_N,
            init,
            table=table,
            N_override=N,
            averaged=averaged,
            sample_dt=sample_dt,
            T=T,
        )
        worst = 0.0
        for cN, b in zip(traj.states, limit_traj.states):
            worst = max(worst, float(np.abs(cN.data - b.data).sum()))
        sups.append(worst)
    ratios = [b / a if a > 0 else np.nan for a, b in zip(sups, sups[1:])]
    return ConvergenceResult(N_list, sups, ratios)
