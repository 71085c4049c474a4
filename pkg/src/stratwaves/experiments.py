"""Experiment drivers: config parsing, seeded initial data, result emission.

The configuration format is flat ``key = value`` text.  ``[section]``
headers are allowed for organization but carry no namespace; ``#``
starts a comment.  Exact fields (the dilation squares) accept ``p/q``
rationals.  Unknown keys are errors, and every simulation invariant is
enforced at parse time so a run never starts from a half-valid state.

All commands are deterministic functions of (config file, seed): runs
write their artifacts plus a manifest recording the config hash, code
version, seed and every output file name.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .basis import FrameSet
from .dynamics import (
    ScalarField,
    SimulationConfig,
    System,
    anisotropy_ratio,
    build_context,
    convergence_study,
    initial_state_from_physical,
    integrate,
    oscillation_dt_bound,
    qg_equiv_check,
    reconstruct_physical,
)
from .interaction import AmplitudeState, build_triad_table
from .lattice import DilationFactors, FrequencySet, LatticeKind
from .resonance import gamma_scan, restricted_convolution_census, write_census_csv

COMMANDS = (
    "simulate",
    "limit",
    "converge",
    "gamma-check",
    "resonance-census",
    "qg-equiv",
    "pancake",
)


class ConfigError(ValueError):
    """Malformed or invalid configuration text."""


@dataclass
class ExperimentSpec:
    """Which study to run and its non-physical knobs."""

    command: str
    m_init: int = 2
    amplitude: float = 1.0
    init_horizontal_zero: bool = False
    N_list: tuple = (10.0, 100.0, 1000.0)
    shells: tuple = (1, 2, 3)
    grid: tuple = ()
    averaged_above: float = np.inf
    raw: dict = field(default_factory=dict)


def _parse_bool(text, key, line):
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"line {line}: key {key!r} expects a boolean, got {text!r}")


def _parse_float(text, key, line):
    try:
        return float(Fraction(text.strip())) if "/" in text else float(text)
    except ValueError as exc:
        raise ConfigError(f"line {line}: key {key!r} expects a number, got {text!r}") from exc


def _parse_list(text, conv):
    return tuple(conv(x.strip()) for x in text.split(",") if x.strip())


_REQUIRED = ("command", "nu", "kappa", "g", "calN", "T", "dt", "M")

_KNOWN_KEYS = {
    "command",
    "kind",
    "M",
    "g1sq",
    "g2sq",
    "nu",
    "kappa",
    "g",
    "calN",
    "T",
    "dt",
    "sample_dt",
    "tol_div",
    "unit_qg_viscosity",
    "drop_cancelling_pair",
    "m_init",
    "amplitude",
    "init_horizontal_zero",
    "N_list",
    "shells",
    "grid",
    "averaged_above",
}


def read_key_values(text: str) -> dict:
    """Flat key/value map from config text, with line-number errors."""
    values, lines = {}, {}
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            continue  # organizational only
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {rawline!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = value
        lines[key] = lineno
    values["__lines__"] = lines
    return values


def build_from_key_values(values: dict):
    """Validated (SimulationConfig, ExperimentSpec) from a key/value map."""
    lines = values.pop("__lines__", {})

    def where(key):
        return lines.get(key, "?")

    missing = [k for k in _REQUIRED if k not in values]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    command = values["command"].strip()
    if command not in COMMANDS:
        raise ConfigError(
            f"line {where('command')}: unknown command {command!r}; expected one of {', '.join(COMMANDS)}"
        )

    try:
        dilation = DilationFactors(values.get("g1sq", "1"), values.get("g2sq", "1"))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"invalid dilation: {exc}") from exc
    try:
        kind = LatticeKind.parse(values.get("kind", "cubic"))
    except ValueError as exc:
        raise ConfigError(f"line {where('kind')}: {exc}") from exc

    try:
        config = SimulationConfig(
            nu=_parse_float(values["nu"], "nu", where("nu")),
            kappa=_parse_float(values["kappa"], "kappa", where("kappa")),
            gravity=_parse_float(values["g"], "g", where("g")),
            calN=_parse_float(values["calN"], "calN", where("calN")),
            T=_parse_float(values["T"], "T", where("T")),
            dt=_parse_float(values["dt"], "dt", where("dt")),
            kind=kind,
            M=int(values["M"]),
            dilation=dilation,
            sample_dt=(
                _parse_float(values["sample_dt"], "sample_dt", where("sample_dt"))
                if "sample_dt" in values
                else None
            ),
            tol_div=(
                _parse_float(values["tol_div"], "tol_div", where("tol_div"))
                if "tol_div" in values
                else 1e-10
            ),
            unit_qg_viscosity=_parse_bool(
                values.get("unit_qg_viscosity", "false"), "unit_qg_viscosity", where("unit_qg_viscosity")
            ),
            drop_cancelling_pair=_parse_bool(
                values.get("drop_cancelling_pair", "false"), "drop_cancelling_pair", where("drop_cancelling_pair")
            ),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    grid = _parse_list(values["grid"], int) if "grid" in values else ()
    if grid and len(grid) != 3:
        raise ConfigError(f"line {where('grid')}: grid expects three integers")
    spec = ExperimentSpec(
        command=command,
        m_init=int(values.get("m_init", 2)),
        amplitude=_parse_float(values.get("amplitude", "1.0"), "amplitude", where("amplitude")),
        init_horizontal_zero=_parse_bool(
            values.get("init_horizontal_zero", "false"), "init_horizontal_zero", where("init_horizontal_zero")
        ),
        N_list=_parse_list(values.get("N_list", "10,100,1000"), float),
        shells=_parse_list(values.get("shells", "1,2,3"), int),
        grid=grid,
        averaged_above=_parse_float(
            values.get("averaged_above", "inf"), "averaged_above", where("averaged_above")
        ),
        raw={k: v for k, v in values.items()},
    )
    return config, spec


def parse_config(text: str, overrides=()):
    """Parse config text, apply ``key=value`` overrides, validate fully."""
    values = read_key_values(text)
    lines = values.pop("__lines__", {})
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, value = (part.strip() for part in item.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"override: unknown key {key!r}")
        values[key] = value
    values["__lines__"] = lines
    return build_from_key_values(values)


# -- seeded initial data -------------------------------------------------------


def random_initial_state(
    fset: FrequencySet,
    frames: FrameSet,
    config: SimulationConfig,
    seed: int,
    m_init: int = 2,
    amplitude: float = 1.0,
    include_horizontal_zero: bool = False,
) -> AmplitudeState:
    """Seeded random large-data state, scale-controlled in l1.

    Complex Gaussian velocity and buoyancy spectra on the shell
    1 <= |n| <= m_init (generator coordinates), symmetrized for reality,
    Leray-projected, then l1-normalized to ``amplitude``.  Horizontal-zero
    modes stay empty by default: the limit system's vortex-wave
    decoupling presumes no amplitude there, and the wave channels on
    those modes feed interactions the limit equations do not track.
    """
    rng = np.random.default_rng(seed)
    K = fset.size
    u = rng.standard_normal((K, 3)) + 1j * rng.standard_normal((K, 3))
    rho = rng.standard_normal(K) + 1j * rng.standard_normal(K)
    shell = np.sum(fset.coords**2, axis=1) <= m_init * m_init
    if not include_horizontal_zero:
        shell &= ~fset.horizontal_zero
    u[~shell] = 0.0
    rho[~shell] = 0.0
    # reality: coefficients at -n are conjugates of those at n
    pair = fset.neg_ordinal
    upper = np.arange(K) < pair
    u[pair[upper]] = np.conj(u[upper])
    rho[pair[upper]] = np.conj(rho[upper])

    state = initial_state_from_physical(u, rho, config, fset, frames)
    norm = state.ell1()
    if norm == 0.0:
        raise ValueError("random state is empty; enlarge m_init")
    state.data *= amplitude / norm
    return state


def random_theta(
    fset: FrequencySet, seed: int, m_init: int = 2, amplitude: float = 1.0
) -> ScalarField:
    """Seeded random stream-scalar, zero on horizontal-zero modes."""
    rng = np.random.default_rng(seed)
    K = fset.size
    data = rng.standard_normal(K) + 1j * rng.standard_normal(K)
    shell = (np.sum(fset.coords**2, axis=1) <= m_init * m_init) & ~fset.horizontal_zero
    data[~shell] = 0.0
    pair = fset.neg_ordinal
    upper = np.arange(K) < pair
    # real physical scalar: theta-hat at -n conjugate of theta-hat at n
    data[pair[upper]] = np.conj(data[upper])
    norm = np.abs(data).sum()
    if norm == 0.0:
        raise ValueError("random scalar is empty; enlarge m_init")
    return ScalarField(fset, data * (amplitude / norm))


# -- output helpers --------------------------------------------------------------


def _write_csv(path, header, rows, seed):
    with open(path, "w", newline="") as fh:
        fh.write(f"# seed={seed}\n")
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def write_trajectory_csv(path, traj, seed):
    rows = [
        [repr(float(t)), repr(float(l1)), repr(float(en)), repr(float(l12)), repr(float(an))]
        for t, l1, en, l12, an in zip(
            traj.times,
            traj.diagnostics["ell1"],
            traj.diagnostics["energy"],
            traj.diagnostics["ell12"],
            traj.diagnostics["anisotropy"],
        )
    ]
    _write_csv(path, ["t", "l1", "energy", "l12", "anisotropy"], rows, seed)


def state_to_json(state: AmplitudeState) -> dict:
    return {
        "t": state.t,
        "modes": [list(map(int, m)) for m in state.fset.coords],
        "branches": {
            str(s): [[z.real, z.imag] for z in state.branch(s)] for s in (-1, 0, 1)
        },
    }


def state_from_json(fset: FrequencySet, obj: dict) -> AmplitudeState:
    state = AmplitudeState.zeros(fset, float(obj["t"]))
    for s in (-1, 0, 1):
        pairs = obj["branches"][str(s)]
        state.branch(s)[:] = np.array([complex(re, im) for re, im in pairs])
    return state


def write_field_binary(path_base: Path, name: str, array: np.ndarray, cell_note: str):
    """Flat little-endian float64 binary plus a JSON shape sidecar."""
    bin_path = path_base / f"{name}.bin"
    arr = np.ascontiguousarray(array, dtype="<f8")
    bin_path.write_bytes(arr.tobytes())
    sidecar = {
        "dtype": "<f8",
        "order": "C",
        "shape": list(arr.shape),
        "cell": cell_note,
    }
    (path_base / f"{name}.json").write_text(json.dumps(sidecar, indent=1))
    return [bin_path.name, f"{name}.json"]


# -- command dispatch -------------------------------------------------------------


def run(config: SimulationConfig, spec: ExperimentSpec, out_dir, seed: int = 0):
    """Execute one experiment; returns the list of files written.

    Deterministic given (config, seed).  A manifest.json capturing the
    config hash, code version and all artifact names is always written.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    outputs = []

    fset, frames = build_context(config)
    needs_table = spec.command in ("simulate", "limit", "converge", "pancake")
    table = build_triad_table(fset, frames) if needs_table else None

    if spec.command in ("simulate", "limit"):
        init = random_initial_state(
            fset, frames, config, seed, spec.m_init, spec.amplitude, spec.init_horizontal_zero
        )
        system = System.FULL if spec.command == "simulate" else System.LIMIT
        averaged = spec.command == "simulate" and config.N > spec.averaged_above
        traj = integrate(system, config, init, table=table, averaged=averaged)
        write_trajectory_csv(out / "trajectory.csv", traj, seed)
        (out / "final_state.json").write_text(json.dumps(state_to_json(traj.states[-1])))
        outputs += ["trajectory.csv", "final_state.json"]

    elif spec.command == "converge":
        init = random_initial_state(
            fset, frames, config, seed, spec.m_init, spec.amplitude, spec.init_horizontal_zero
        )
        result = convergence_study(
            config,
            init,
            spec.N_list,
            table=table,
            averaged_above=spec.averaged_above,
        )
        rows = []
        for i, (N, r) in enumerate(zip(result.N_values, result.sup_remainders)):
            ratio = "" if i == 0 else repr(result.ratios[i - 1])
            rows.append([repr(float(N)), repr(r), ratio])
        _write_csv(out / "converge.csv", ["N", "sup_remainder", "ratio_to_previous"], rows, seed)
        outputs.append("converge.csv")

    elif spec.command == "gamma-check":
        report = gamma_scan(fset)
        report.write_csv(out / "admissibility.csv")
        outputs.append("admissibility.csv")
        (out / "admissibility.json").write_text(
            json.dumps(
                {
                    "triads_scanned": report.triads_scanned,
                    "vanishing_triads": len(report.entries),
                    "gamma_admissible": report.gamma_admissible,
                    "seed": seed,
                }
            )
        )
        outputs.append("admissibility.json")

    elif spec.command == "resonance-census":
        results = [restricted_convolution_census(fset, i) for i in spec.shells]
        rows = [
            [r.shell_index, repr(r.sup_sum), repr(r.implied_constant)] for r in results
        ]
        _write_csv(out / "census.csv", ["i", "sup_sum", "implied_constant"], rows, seed)
        outputs.append("census.csv")

    elif spec.command == "qg-equiv":
        theta0 = random_theta(fset, seed, spec.m_init, spec.amplitude)
        err = qg_equiv_check(config, theta0)
        (out / "qg_equiv.json").write_text(
            json.dumps({"sup_error": err, "seed": seed, "T": config.T, "dt": config.dt})
        )
        outputs.append("qg_equiv.json")

    elif spec.command == "pancake":
        init = random_initial_state(
            fset, frames, config, seed, spec.m_init, spec.amplitude, spec.init_horizontal_zero
        )
        averaged = config.dt > oscillation_dt_bound(table, config.N)
        traj_N = integrate(System.FULL, config, init, table=table, averaged=averaged)
        traj_0 = integrate(System.FULL, config, init, table=table, N_override=0.0)
        rows = [
            [repr(float(t)), repr(float(a0)), repr(float(aN))]
            for t, a0, aN in zip(
                traj_N.times,
                traj_0.diagnostics["anisotropy"],
                traj_N.diagnostics["anisotropy"],
            )
        ]
        _write_csv(
            out / "anisotropy.csv", ["t", "anisotropy_N0", "anisotropy_N"], rows, seed
        )
        outputs.append("anisotropy.csv")
        dims = spec.grid or (2 * config.M + 1,) * 3
        cell = "uniform grid over one fundamental cell of the generator lattice"
        for tag, traj, N in (("N", traj_N, config.N), ("N0", traj_0, 0.0)):
            u, rho = reconstruct_physical(
                traj.states[-1], frames, config, dims, N=N
            )
            outputs += write_field_binary(out, f"velocity_{tag}", u, cell)
            outputs += write_field_binary(out, f"buoyancy_{tag}", rho, cell)
    else:
        raise ConfigError(f"unknown command {spec.command!r}")

    manifest = {
        "command": spec.command,
        "seed": seed,
        "code_version": __version__,
        "config_hash": hashlib.sha256(
            json.dumps(spec.raw, sort_keys=True).encode()
        ).hexdigest(),
        "lattice": fset.to_descriptor(),
        "outputs": sorted(outputs),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))
    outputs.append("manifest.json")
    return [str(out / name) for name in outputs]
