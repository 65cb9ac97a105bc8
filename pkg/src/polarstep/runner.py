"""Config-driven experiment runner: presets, reference solutions, CSV
output, and parameter sweeps."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy.special import logsumexp

from . import analysis
from .grid import PeriodicGrid
from .hamsys import CubicHamiltonianSystem, from_cubic_tensor
from .integrators import (
    NAMED_TABLEAUS,
    TrajectoryRecord,
    TwoStepTableau,
    canonical_polarized_energy,
    integrate,
)
from .models import CamassaHolmModel, KdVModel


class ConfigError(ValueError):
    """Invalid or unparsable run configuration."""


class ReferenceValidationError(RuntimeError):
    """An analytic reference failed the PDE-residual oracle."""


EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SINGULAR = 3
EXIT_REFERENCE = 4


def _sech(x):
    return 1.0 / np.cosh(x)


def _wrap(x, L):
    """Map coordinates into [-L/2, L/2)."""
    return (np.asarray(x) + L / 2.0) % L - L / 2.0


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Preset:
    equation: str
    K: int
    L: float
    dt: float
    T: float
    a_param: float
    ic: Callable[[np.ndarray, float], np.ndarray]
    wave_speed: Optional[float] = None  # for shape/phase errors
    has_reference: bool = False


def _ic_kdv_1soliton(x, L):
    return 2.0 * _sech(x - L / 2.0) ** 2


def _ic_kdv_2soliton(x, L):
    return 6.0 * _sech(_wrap(x, L)) ** 2


def _peakon(x, center, L):
    return np.cosh(np.abs(x - center) - L / 2.0) / np.cosh(L / 2.0)


def _ic_ch_1peakon(x, L):
    return _peakon(x, L / 2.0, L)


def _ic_ch_2peakon(x, L):
    return _peakon(x, L / 4.0, L) + 1.5 * _peakon(x, 3.0 * L / 4.0, L)


PRESETS = {
    "kdv-1soliton": Preset(
        equation="kdv", K=800, L=40.0, dt=0.0125, T=100.0, a_param=-0.5,
        ic=_ic_kdv_1soliton, wave_speed=4.0, has_reference=True,
    ),
    "kdv-2soliton": Preset(
        equation="kdv", K=800, L=40.0, dt=0.001, T=100.0, a_param=-0.5,
        ic=_ic_kdv_2soliton, has_reference=True,
    ),
    "ch-1peakon": Preset(
        equation="ch", K=1000, L=40.0, dt=0.0002, T=5.0, a_param=0.5,
        ic=_ic_ch_1peakon, wave_speed=1.0, has_reference=True,
    ),
    "ch-2peakon": Preset(
        equation="ch", K=1000, L=40.0, dt=0.0002, T=5.0, a_param=0.5,
        ic=_ic_ch_2peakon,
    ),
}


# ---------------------------------------------------------------------------
# reference solutions
# ---------------------------------------------------------------------------


def _kdv_1soliton_reference(x, t, L):
    return 2.0 * _sech(_wrap(x - 4.0 * t - L / 2.0, L)) ** 2


def _kdv_2soliton_line(x, t):
    """Classical two-soliton of u_t + 6 u u_x + u_xxx = 0 with u(x,0) = 6 sech^2 x,

        u = 12 (3 + 4 cosh(2x - 8t) + cosh(4x - 64t))
              / (3 cosh(x - 28t) + cosh(3x - 36t))^2,

    evaluated in log space to avoid cosh overflow at large |arguments|.
    """
    x = np.asarray(x, dtype=float)
    a = 2.0 * x - 8.0 * t
    b = 4.0 * x - 64.0 * t
    c = x - 28.0 * t
    d = 3.0 * x - 36.0 * t
    zero = np.zeros_like(x)
    # numerator = 3 + 2 e^a + 2 e^-a + 0.5 e^b + 0.5 e^-b
    log_num = logsumexp(
        np.stack([zero, a, -a, b, -b]),
        b=np.array([3.0, 2.0, 2.0, 0.5, 0.5])[:, None],
        axis=0,
    )
    # sqrt(denominator) = 1.5 e^c + 1.5 e^-c + 0.5 e^d + 0.5 e^-d
    log_den_half = logsumexp(
        np.stack([c, -c, d, -d]),
        b=np.array([1.5, 1.5, 0.5, 0.5])[:, None],
        axis=0,
    )
    return 12.0 * np.exp(log_num - 2.0 * log_den_half)


def _kdv_2soliton_reference(x, t, L):
    """Periodized by summing images; both humps travel rightward with
    speeds 16 and 4, so images up to ceil(16 t / L) contribute."""
    x = np.asarray(x, dtype=float)
    m_lo = -1
    m_hi = int(math.ceil(16.0 * t / L)) + 1
    out = np.zeros_like(x)
    for m in range(m_lo, m_hi + 1):
        out += _kdv_2soliton_line(x + m * L, t)
    return out


def reference_solution(preset_name: str, t: float, grid: PeriodicGrid) -> Optional[np.ndarray]:
    """Analytic (or translated-profile) reference state, when one exists."""
    if preset_name not in PRESETS:
        raise ConfigError(f"unknown preset {preset_name!r}")
    p = PRESETS[preset_name]
    x = grid.nodes()
    if preset_name == "kdv-1soliton":
        return _kdv_1soliton_reference(x, t, grid.length)
    if preset_name == "kdv-2soliton":
        return _kdv_2soliton_reference(x, t, grid.length)
    if preset_name == "ch-1peakon":
        # single periodic peakon: initial profile translated at speed 1
        profile = p.ic(x, grid.length)
        return analysis._fractional_shift(profile, t % grid.length, grid.dx)
    return None


def validate_kdv_reference(preset_name: str, t: float = 0.3, tol: float = 1e-3) -> float:
    """PDE-residual oracle: max |u_t + 6 u u_x + u_xxx| on a fine grid.

    Spatial derivatives are spectral, u_t a central difference of the
    analytic formula. Raises ReferenceValidationError above tol.
    """
    p = PRESETS[preset_name]
    N, L = 4096, p.L
    grid = PeriodicGrid(N, L)
    x = grid.nodes()
    if preset_name == "kdv-1soliton":
        u_of_t = lambda s: _kdv_1soliton_reference(x, s, L)
    elif preset_name == "kdv-2soliton":
        u_of_t = lambda s: _kdv_2soliton_reference(x, s, L)
    else:
        raise ConfigError(f"no analytic KdV reference for preset {preset_name!r}")
    h = 1e-5
    u = u_of_t(t)
    u_t = (u_of_t(t + h) - u_of_t(t - h)) / (2.0 * h)
    k = 2.0 * np.pi * np.fft.rfftfreq(N, d=grid.dx)
    uh = np.fft.rfft(u)
    u_x = np.fft.irfft(1j * k * uh, n=N)
    u_xxx = np.fft.irfft(-1j * k**3 * uh, n=N)
    residual = float(np.max(np.abs(u_t + 6.0 * u * u_x + u_xxx)))
    if residual > tol:
        raise ReferenceValidationError(
            f"{preset_name} reference fails the PDE-residual oracle at t={t}: "
            f"max residual {residual:.3e} > {tol:.1e}"
        )
    return residual


def ch_two_peakon_reference(config: "RunConfig") -> TrajectoryRecord:
    """Fine-grid, fine-step midpoint run (dx/2, dt/10); a numerical
    reference, not exact."""
    fine = replace(
        config,
        scheme="mp",
        K=2 * config.K,
        dt=config.dt / 10.0,
        record_stride=max(1, 10 * config.record_stride),
    )
    record, _ = run(fine, write_files=False)
    return record


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

SCHEMES = (
    "mp", "kahan", "kahan2", "pdgm-quadratic", "pdgm-avf", "pdgm-ia", "pdgm-sia",
)


@dataclass
class RunConfig:
    equation: str = "kdv"
    scheme: str = "kahan"
    K: int = 800
    L: float = 40.0
    dt: float = 0.0125
    T: float = 100.0
    a_param: Optional[float] = None
    startup: str = "kahan"
    initial_condition: str = ""
    preset: Optional[str] = None
    output_dir: str = "."
    basename: str = "run"
    record_stride: int = 0  # 0: pick automatically (~200 recorded rows)
    seed: int = 0

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    def validate(self):
        if self.equation not in ("kdv", "ch", "ode-demo"):
            raise ConfigError(f"unknown equation {self.equation!r}")
        if not (self.scheme in SCHEMES or self.scheme.startswith("tableau:")):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.K < 3:
            raise ConfigError(f"K must be >= 3, got {self.K}")
        if self.dt <= 0 or self.T <= 0:
            raise ConfigError("dt and T must be positive")
        n = self.T / self.dt
        if abs(n - round(n)) > 1e-9 * max(1.0, round(n)):
            raise ConfigError(f"T/dt = {n} is not an integer")
        if self.startup not in ("kahan", "midpoint"):
            raise ConfigError(f"unknown startup {self.startup!r}")
        if self.record_stride < 0:
            raise ConfigError("record_stride must be >= 0")
        if self.scheme.startswith("tableau:"):
            parse_tableau(self.scheme)


def parse_tableau(scheme: str) -> TwoStepTableau:
    spec = scheme.split(":", 1)[1]
    if spec in NAMED_TABLEAUS:
        return NAMED_TABLEAUS[spec]
    parts = spec.split(",")
    if len(parts) != 9:
        raise ConfigError(
            f"tableau spec must be one of {sorted(NAMED_TABLEAUS)} or 9 "
            f"comma-separated values, got {spec!r}"
        )
    try:
        vals = [float(p) for p in parts]
    except ValueError as exc:
        raise ConfigError(f"bad tableau value in {spec!r}: {exc}") from None
    return TwoStepTableau(np.array(vals).reshape(3, 3), "custom")


_INT_KEYS = {"K", "record_stride", "seed"}
_FLOAT_KEYS = {"L", "dt", "T", "a_param"}
_STR_KEYS = {
    "equation", "scheme", "startup", "initial_condition", "preset",
    "output_dir", "basename",
}
_ALL_KEYS = _INT_KEYS | _FLOAT_KEYS | _STR_KEYS


def load_config(path: str) -> RunConfig:
    """Parse a flat key = value config file ('#' comments, UTF-8)."""
    pairs = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in _ALL_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            if key in pairs:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            try:
                if key in _INT_KEYS:
                    pairs[key] = int(value)
                elif key in _FLOAT_KEYS:
                    pairs[key] = float(value)
                else:
                    pairs[key] = value
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return make_config(**pairs)


def make_config(**pairs) -> RunConfig:
    """Build a validated RunConfig, expanding a preset first if given."""
    config = RunConfig()
    preset_name = pairs.get("preset")
    if preset_name is not None:
        if preset_name not in PRESETS:
            raise ConfigError(
                f"unknown preset {preset_name!r}; choose from {sorted(PRESETS)}"
            )
        p = PRESETS[preset_name]
        config = replace(
            config,
            preset=preset_name, equation=p.equation, K=p.K, L=p.L, dt=p.dt,
            T=p.T, a_param=p.a_param, initial_condition=preset_name,
        )
    for key, value in pairs.items():
        if key != "preset":
            config = replace(config, **{key: value})
    if config.a_param is None:
        config = replace(config, a_param=0.5 if config.equation == "ch" else -0.5)
    config.validate()
    return config


def initial_state(config: RunConfig, grid: Optional[PeriodicGrid]) -> np.ndarray:
    if config.equation == "ode-demo":
        return np.array([1.0, 1.0])
    ic = config.initial_condition
    x = grid.nodes()
    if ic in PRESETS:
        return PRESETS[ic].ic(x, grid.length)
    if not ic:
        raise ConfigError("initial_condition required when no preset is given")
    # expression in x and L, numpy namespace
    namespace = {"x": x, "L": grid.length, "np": np, "sech": _sech,
                 "cosh": np.cosh, "sin": np.sin, "cos": np.cos, "exp": np.exp,
                 "abs": np.abs, "pi": np.pi}
    try:
        u0 = eval(ic, {"__builtins__": {}}, namespace)
    except Exception as exc:
        raise ConfigError(f"bad initial_condition expression {ic!r}: {exc}") from None
    u0 = np.broadcast_to(np.asarray(u0, dtype=float), x.shape).copy()
    return u0


def _demo_system() -> CubicHamiltonianSystem:
    # planar system with H(x) = x1^2 x2
    T = np.zeros((2, 2, 2))
    for i, j, k in [(0, 0, 1), (0, 1, 0), (1, 0, 0)]:
        T[i, j, k] = 2.0
    return from_cubic_tensor(T, np.array([[0.0, 1.0], [-1.0, 0.0]]))


# ---------------------------------------------------------------------------
# the run itself
# ---------------------------------------------------------------------------


def _fmt(v: float) -> str:
    return repr(float(v))


def _atomic_write(path: str, text: str):
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _setup(config: RunConfig):
    """Build (grid, system, polarized_energy, model) for a config."""
    if config.equation == "ode-demo":
        sys = _demo_system()
        return None, sys, canonical_polarized_energy(sys), None
    grid = PeriodicGrid(config.K, config.L)
    if config.equation == "ch":
        model = CamassaHolmModel(grid, a_param=config.a_param)
    else:
        model = KdVModel(grid, a_param=config.a_param)
    return grid, model.system(), model.polarized_energy(), model


def run(
    config: RunConfig,
    write_files: bool = True,
    make_plots: bool = False,
    x1: Optional[np.ndarray] = None,
) -> tuple[TrajectoryRecord, dict]:
    """Execute one experiment; optionally write states/diagnostics CSVs.

    Blow-up is recorded in the returned TrajectoryRecord, not raised.
    """
    config.validate()
    grid, sys, pe, model = _setup(config)
    x0 = initial_state(config, grid)
    n_steps = config.n_steps
    stride = config.record_stride or max(1, n_steps // 200)

    scheme_map = {"mp": "midpoint", "kahan": "kahan", "kahan2": "kahan2"}
    pdg_kind = None
    tableau = None
    if config.scheme.startswith("pdgm-"):
        scheme = "pdgm"
        pdg_kind = config.scheme.split("-", 1)[1]
    elif config.scheme.startswith("tableau:"):
        scheme = "tableau"
        tableau = parse_tableau(config.scheme)
    else:
        scheme = scheme_map[config.scheme]

    run_sys = sys
    project = None
    if scheme == "kahan2" and not sys.is_homogeneous:
        # two-step closed forms hold for homogeneous H; lift and project
        run_sys = sys.homogenize()
        project = CubicHamiltonianSystem.project
        x0_run = sys.embed(x0)
        x1_run = sys.embed(x1) if x1 is not None else None
    else:
        x0_run, x1_run = x0, x1

    def base(v):
        return project(v) if project is not None else v

    energy = model.energy if model is not None else sys.energy
    h1 = model.h1_invariant if model is not None else (lambda u: float(u @ u) / 2.0)
    pol = pe.value

    point_diags = {
        "H2": lambda v: energy(base(v)),
        "H1": lambda v: h1(base(v)),
    }
    pair_diags = {"H2_polarized": lambda u, v: pol(base(u), base(v))}

    record = integrate(
        scheme,
        run_sys,
        x0_run,
        config.dt,
        n_steps,
        pe=pe if scheme == "pdgm" else None,
        pdg_kind=pdg_kind or "quadratic",
        tableau=tableau,
        startup=config.startup,
        x1=x1_run,
        allow_newton=True,
        record_stride=stride,
        point_diagnostics=point_diags,
        pair_diagnostics=pair_diags,
    )
    if project is not None:
        record.states = project(record.states)

    paths = {}
    if write_files:
        os.makedirs(config.output_dir, exist_ok=True)
        paths["states"] = os.path.join(config.output_dir, f"{config.basename}_states.csv")
        paths["diagnostics"] = os.path.join(
            config.output_dir, f"{config.basename}_diagnostics.csv"
        )
        _atomic_write(paths["states"], _states_csv(record))
        _atomic_write(paths["diagnostics"], _diagnostics_csv(config, grid, record))
        if make_plots:
            paths.update(_write_plots(config, grid, record))
    return record, paths


def _states_csv(record: TrajectoryRecord) -> str:
    K = record.states.shape[1]
    lines = ["t," + ",".join(f"x{i}" for i in range(K))]
    for t, row in zip(record.times, record.states):
        lines.append(_fmt(t) + "," + ",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _error_columns(config, grid, record):
    """shape/phase/global errors at recorded times, nan when no reference."""
    n = len(record.times)
    shape = np.full(n, np.nan)
    phase = np.full(n, np.nan)
    glob = np.full(n, np.nan)
    preset = config.preset or (
        config.initial_condition if config.initial_condition in PRESETS else None
    )
    if preset is None or grid is None:
        return shape, phase, glob
    p = PRESETS[preset]
    if not p.has_reference:
        return shape, phase, glob
    if preset.startswith("kdv"):
        validate_kdv_reference(preset)
    profile = p.ic(grid.nodes(), grid.length) if p.wave_speed is not None else None
    for i, (t, U) in enumerate(zip(record.times, record.states)):
        ref = reference_solution(preset, float(t), grid)
        glob[i] = analysis.global_error(U, ref)
        if profile is not None:
            s, _, ph = analysis.shape_phase_error(U, profile, p.wave_speed, float(t), grid)
            shape[i], phase[i] = s, ph
    return shape, phase, glob


def _diagnostics_csv(config, grid, record: TrajectoryRecord) -> str:
    shape, phase, glob = _error_columns(config, grid, record)
    H2_all = record.diagnostics["H2"]
    H1_all = record.diagnostics["H1"]
    pol_all = record.pair_diagnostics["H2_polarized"]
    H2_0 = H2_all[0]
    lines = ["t,H2,H2_polarized,H1,shape_err,phase_err,global_err,rel_energy_err"]
    for i, t in enumerate(record.times):
        n = int(round((t - record.times[0]) / record.dt))
        H2 = H2_all[n]
        H1 = H1_all[n]
        # the polarised invariant indexed by n refers to the pair (x^n, x^{n+1})
        pol = pol_all[min(n, len(pol_all) - 1)] if len(pol_all) else np.nan
        rel = abs(H2 - H2_0) / (1.0 + abs(H2_0))
        lines.append(
            ",".join(
                _fmt(v) for v in (t, H2, pol, H1, shape[i], phase[i], glob[i], rel)
            )
        )
    return "\n".join(lines) + "\n"


def _write_plots(config, grid, record) -> dict:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    paths = {}
    base = os.path.join(config.output_dir, config.basename)

    fig, ax = plt.subplots(figsize=(7, 4))
    H2 = record.diagnostics["H2"]
    denom = 1.0 + abs(H2[0])
    t_axis = np.concatenate([[record.times[0]], record.diag_times])
    ax.plot(t_axis, np.abs(H2 - H2[0]) / denom, label="|H2 - H2(0)| (rel)")
    pol = record.pair_diagnostics["H2_polarized"]
    if len(pol):
        ax.plot(
            record.diag_times,
            np.abs(pol - pol[0]) / (1.0 + abs(pol[0])),
            label="polarised invariant drift (rel)",
        )
    ax.set_xlabel("t")
    ax.set_yscale("log")
    ax.legend()
    paths["diag_plot"] = base + "_diagnostics.svg"
    fig.savefig(paths["diag_plot"])
    plt.close(fig)

    if grid is not None:
        fig, ax = plt.subplots(figsize=(7, 6))
        x = grid.nodes()
        n_show = min(12, len(record.states))
        idx = np.linspace(0, len(record.states) - 1, n_show).astype(int)
        span = np.ptp(record.states[idx]) or 1.0
        for j, i in enumerate(idx):
            ax.plot(x, record.states[i] + j * 0.8 * span, lw=0.8)
        ax.set_xlabel("x")
        ax.set_yticks([])
        paths["waterfall_plot"] = base + "_waterfall.svg"
        fig.savefig(paths["waterfall_plot"])
        plt.close(fig)
    return paths


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

SWEEP_PARAMS = ("dt", "a_param", "K")


def sweep(base_config: RunConfig, parameter: str, values, out_path: Optional[str] = None):
    """Run the base config once per parameter value; one summary row each.

    Per-row failures are recorded and the sweep continues.
    """
    if parameter not in SWEEP_PARAMS:
        raise ConfigError(f"sweep parameter must be one of {SWEEP_PARAMS}")
    rows = []
    for value in values:
        cfg = replace(base_config, **{parameter: value})
        if parameter == "dt":
            # keep T / dt integral
            n = max(1, round(base_config.T / value))
            cfg = replace(cfg, T=n * value)
        try:
            cfg.validate()
            record, _ = run(cfg, write_files=False)
        except Exception as exc:
            rows.append(
                {"value": value, "completed": False, "blow_up_time": np.nan,
                 "max_invariant_drift": np.nan, "final_global_err": np.nan,
                 "error": f"{type(exc).__name__}: {exc}"}
            )
            continue
        pol = record.pair_diagnostics["H2_polarized"]
        drift = (
            float(np.max(np.abs(pol - pol[0])) / (1.0 + abs(pol[0])))
            if len(pol)
            else np.nan
        )
        grid = PeriodicGrid(cfg.K, cfg.L) if cfg.equation != "ode-demo" else None
        _, _, glob = _error_columns(cfg, grid, record)
        rows.append(
            {"value": value, "completed": not record.blew_up,
             "blow_up_time": record.blow_up_time if record.blew_up else np.nan,
             "max_invariant_drift": drift,
             "final_global_err": glob[-1] if len(glob) else np.nan, "error": ""}
        )
    if out_path is not None:
        lines = [f"{parameter},completed,blow_up_time,max_invariant_drift,final_global_err,error"]
        for r in rows:
            lines.append(
                ",".join(
                    [
                        _fmt(r["value"]) if parameter != "K" else str(r["value"]),
                        str(r["completed"]).lower(),
                        _fmt(r["blow_up_time"]),
                        _fmt(r["max_invariant_drift"]),
                        _fmt(r["final_global_err"]),
                        r["error"].replace(",", ";"),
                    ]
                )
            )
        _atomic_write(out_path, "\n".join(lines) + "\n")
    return rows
