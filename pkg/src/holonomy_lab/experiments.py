"""Reproducible fidelity sweeps written as CSV datasets.

Four experiment kinds are supported, mirroring the standard plots for this
gate family:

    ideal-mean   Bloch-averaged noiseless fidelity versus loop duration
    per-state    fidelity of the named initial states under the fixed rate
                 table, one column per (state, lambda^2)
    noisy-mean   Bloch-averaged fidelity under the fixed rate table, one
                 column per lambda^2
    ohmic-mean   Bloch-averaged fidelity under an Ohmic bath, one column
                 per temperature (single lambda^2)

CSV contract: comma delimiter, LF line endings, first row is the header
`omega_tau` followed by one `F_<label>` column per curve (labels like
`F_mean_l2=0.005` or `F_up_T=5.0`), values printed with 12 significant
digits.  Runs with Fibonacci sampling are deterministic, and rows are
assembled in grid order regardless of worker scheduling, so identical
configurations produce byte-identical files.

Configuration is a flat key=value text file; command-line flags override
individual keys.  Unknown keys and malformed values are reported as
configuration errors naming the offending field.
"""

from __future__ import annotations

import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .bloch import SCHEMES, BlochSampling, bloch_samples
from .errors import ConfigError, IntegrationDivergedError
from .lindblad import (NoiseModel, OhmicBath, evolve_grid, fixed_rates_preset,
                       rates_from_bath)
from .linalg import pure_density
from .propagator import (adiabatic_target, loop_propagator,
                         mean_fidelity_noiseless, revival_times)
from .tripod import not_gate_path

FIGURES = ("ideal-mean", "per-state", "noisy-mean", "ohmic-mean")

#: named initial states for the per-state figure
STATE_LABELS = ("up", "down", "sym")


def named_state(label: str) -> np.ndarray:
    """Density matrix of a named computational state (up, down, sym)."""
    if label == "up":
        return pure_density([1.0, 0.0, 0.0, 0.0])
    if label == "down":
        return pure_density([0.0, 1.0, 0.0, 0.0])
    if label == "sym":
        return pure_density([1.0, 1.0, 0.0, 0.0])
    raise ConfigError(f"unknown state label {label!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    figure: str = "ideal-mean"
    tau_min: float = 1.0
    tau_max: float = 100.0
    tau_points: int = 300
    lambda2: tuple = (0.0,)
    preset: str = "fixed"
    kappa: float = 0.01
    omega_c: float = 100.0
    temperatures: tuple = (0.1, 1.0, 5.0, 10.0)
    sampling: BlochSampling = field(default_factory=BlochSampling)
    steps_per_segment: int = 2000
    out: str = "experiment.csv"
    workers: int = 1

    def __post_init__(self):
        if self.figure not in FIGURES:
            raise ConfigError(f"figure: unknown value {self.figure!r}")
        if self.tau_min <= 0.0:
            raise ConfigError("tau_min: must be positive")
        if self.tau_max <= self.tau_min:
            raise ConfigError("tau_max: must exceed tau_min")
        if self.tau_points < 2:
            raise ConfigError("tau_points: need at least 2 grid points")
        if any(l2 < 0.0 for l2 in self.lambda2):
            raise ConfigError("lambda2: values must be nonnegative")
        if self.preset not in ("fixed", "ohmic"):
            raise ConfigError(f"preset: unknown value {self.preset!r}")
        if self.figure == "ohmic-mean" and len(self.lambda2) != 1:
            raise ConfigError("lambda2: ohmic-mean takes exactly one value")
        if self.steps_per_segment < 100:
            raise ConfigError("steps: steps_per_segment must be >= 100")
        if self.workers < 1:
            raise ConfigError("workers: must be >= 1")

    def grid(self) -> np.ndarray:
        return np.linspace(self.tau_min, self.tau_max, self.tau_points)


_FLOAT_KEYS = {"tau_min", "tau_max", "kappa", "omega_c"}
_INT_KEYS = {"tau_points", "samples", "seed", "steps", "workers"}
_LIST_KEYS = {"lambda2", "temperature"}
_STR_KEYS = {"figure", "preset", "scheme", "out"}
_ALL_KEYS = _FLOAT_KEYS | _INT_KEYS | _LIST_KEYS | _STR_KEYS


def _parse_float_list(field_name: str, raw: str) -> tuple:
    try:
        return tuple(float(tok) for tok in raw.split(",") if tok.strip())
    except ValueError:
        raise ConfigError(f"{field_name}: cannot parse {raw!r} as a float list") from None


def parse_config(text: str, overrides: dict | None = None) -> ExperimentConfig:
    """Build an ExperimentConfig from key=value text plus overrides.

    Recognized keys: figure, tau_min, tau_max, tau_points, lambda2 (comma
    list), preset, kappa, omega_c, temperature (comma list), samples,
    scheme, seed, steps, out, workers.
    """
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key=value, got {stripped!r}")
        key, val = (part.strip() for part in stripped.split("=", 1))
        if key not in _ALL_KEYS:
            raise ConfigError(f"unknown config field: {key}")
        raw[key] = val
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key not in _ALL_KEYS:
            raise ConfigError(f"unknown config field: {key}")
        raw[key] = str(val)

    kwargs = {}
    for key, val in raw.items():
        try:
            if key in _FLOAT_KEYS:
                kwargs[key] = float(val)
            elif key in _INT_KEYS:
                kwargs[key] = int(val)
            elif key in _LIST_KEYS:
                kwargs[key] = _parse_float_list(key, val)
            else:
                kwargs[key] = val
        except ValueError:
            raise ConfigError(f"{key}: cannot parse value {val!r}") from None

    sampling = BlochSampling(
        scheme=kwargs.pop("scheme", "fibonacci"),
        count=kwargs.pop("samples", 200),
        seed=kwargs.pop("seed", 0))
    if sampling.scheme not in SCHEMES:
        raise ConfigError(f"scheme: unknown value {sampling.scheme!r}")
    if "temperature" in kwargs:
        kwargs["temperatures"] = kwargs.pop("temperature")
    if "steps" in kwargs:
        kwargs["steps_per_segment"] = kwargs.pop("steps")
    return ExperimentConfig(sampling=sampling, **kwargs)


def _format_float(x: float) -> str:
    return "%.12g" % x


def _column_labels(cfg: ExperimentConfig) -> list:
    if cfg.figure == "ideal-mean":
        return ["F_mean"]
    if cfg.figure == "per-state":
        return [f"F_{state}_l2={l2}" for state in STATE_LABELS for l2 in cfg.lambda2]
    if cfg.figure == "noisy-mean":
        return [f"F_mean_l2={l2}" for l2 in cfg.lambda2]
    return [f"F_mean_T={t}" for t in cfg.temperatures]


def _build_models(cfg: ExperimentConfig) -> list:
    """Noise models for the figure's columns, rate tables computed once."""
    if cfg.figure == "ideal-mean":
        return []
    if cfg.figure == "ohmic-mean":
        lam = cfg.lambda2[0]
        return [NoiseModel(rates=rates_from_bath(
            OhmicBath(cfg.kappa, cfg.omega_c, t)), lambda2=lam)
            for t in cfg.temperatures]
    if cfg.preset == "ohmic":
        rates = rates_from_bath(OhmicBath(cfg.kappa, cfg.omega_c, cfg.temperatures[0]))
    else:
        rates = fixed_rates_preset()
    return [NoiseModel(rates=rates, lambda2=l2) for l2 in cfg.lambda2]


@dataclass(frozen=True)
class _RowTask:
    """Everything one worker needs to evaluate a single grid row."""
    figure: str
    initials: tuple
    models: tuple
    steps_per_segment: int


def _compute_row(task: _RowTask, omega_tau: float) -> list:
    path = not_gate_path(omega_tau)
    if task.figure == "ideal-mean":
        return [mean_fidelity_noiseless(path, 1.0, list(task.initials))]
    result = evolve_grid(path, 1.0, list(task.initials), list(task.models),
                         task.steps_per_segment)
    target = adiabatic_target(path, 1.0)
    values = []
    if task.figure == "per-state":
        for s in range(len(task.initials)):
            ref = target @ task.initials[s] @ target.conj().T
            for m in range(len(task.models)):
                values.append(float(np.trace(ref @ result.final_lab[s, m]).real))
        return values
    # Bloch-averaged figures: mean over states for each model column
    refs = [target @ r @ target.conj().T for r in task.initials]
    for m in range(len(task.models)):
        col = [float(np.trace(refs[s] @ result.final_lab[s, m]).real)
               for s in range(len(task.initials))]
        values.append(float(np.mean(col)))
    return values


def _row_worker(args):
    idx, omega_tau, task = args
    try:
        return idx, _compute_row(task, omega_tau), None
    except IntegrationDivergedError as exc:
        return idx, None, str(exc)


def _make_task(cfg: ExperimentConfig) -> _RowTask:
    if cfg.figure == "per-state":
        initials = tuple(named_state(s) for s in STATE_LABELS)
    else:
        initials = tuple(bloch_samples(cfg.sampling))
    return _RowTask(figure=cfg.figure, initials=initials,
                    models=tuple(_build_models(cfg)),
                    steps_per_segment=cfg.steps_per_segment)


def run_experiment(cfg: ExperimentConfig) -> str:
    """Run the configured sweep and write its CSV dataset.

    Returns the output path.  Rows whose integration diverges are dropped
    from the dataset and reported on stderr; everything else is written in
    grid order.
    """
    task = _make_task(cfg)
    grid = cfg.grid()
    jobs = [(i, float(x), task) for i, x in enumerate(grid)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_row_worker, jobs))
    else:
        results = [_row_worker(j) for j in jobs]
    results.sort(key=lambda r: r[0])

    labels = _column_labels(cfg)
    lines = ["omega_tau," + ",".join(labels)]
    failures = 0
    for idx, values, err in results:
        if values is None:
            failures += 1
            print(f"holonomy-lab: row omega_tau={grid[idx]:.6g} dropped: {err}",
                  file=sys.stderr)
            continue
        lines.append(",".join([_format_float(grid[idx])]
                              + [_format_float(v) for v in values]))
    with open(cfg.out, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    if failures == len(grid):
        raise IntegrationDivergedError("every grid row failed to integrate")
    return cfg.out


def optimal_time_report(cfg: ExperimentConfig, window: float = 3.0,
                        points: int = 61) -> list:
    """Locate the noisy fidelity peak nearest the first revival time.

    For each noise column of the configured figure, scans the Bloch-mean
    fidelity on a fine grid around the closed-form first revival, refines
    the best point parabolically, and reports the peak position, its offset
    from the closed form, and the fidelity there.  Returns a list of dicts
    (one per column).
    """
    tau_star = float(revival_times(1, 1, 1.0)[0])
    taus = np.linspace(tau_star - window, tau_star + window, points)
    initials = list(bloch_samples(cfg.sampling))
    models = _build_models(cfg)
    if cfg.figure == "ohmic-mean":
        labels = [f"T={t}" for t in cfg.temperatures]
    else:
        labels = [f"l2={l2}" for l2 in cfg.lambda2]
    if not models:
        models = [None]
        labels = ["l2=0"]

    curves = np.zeros((len(models), len(taus)))
    for j, x in enumerate(taus):
        path = not_gate_path(float(x))
        target = adiabatic_target(path, 1.0)
        refs = [target @ r @ target.conj().T for r in initials]
        live = [m for m in models if m is not None and m.lambda2 > 0.0]
        if live:
            result = evolve_grid(path, 1.0, initials, live, cfg.steps_per_segment)
        col = 0
        for i, model in enumerate(models):
            if model is None or model.lambda2 == 0.0:
                curves[i, j] = mean_fidelity_noiseless(path, 1.0, initials)
            else:
                vals = [float(np.trace(refs[s] @ result.final_lab[s, col]).real)
                        for s in range(len(initials))]
                curves[i, j] = np.mean(vals)
                col += 1

    rows = []
    step = taus[1] - taus[0]
    for i, label in enumerate(labels):
        best = int(np.argmax(curves[i]))
        peak_tau, peak_f = float(taus[best]), float(curves[i, best])
        if 0 < best < len(taus) - 1:
            y0, y1, y2 = curves[i, best - 1:best + 2]
            denom = y0 - 2.0 * y1 + y2
            if denom != 0.0:
                peak_tau += float(0.5 * (y0 - y2) / denom) * step
        offset = peak_tau - tau_star
        rows.append({
            "label": label,
            "tau_star_closed_form": tau_star,
            "tau_peak": peak_tau,
            "offset": offset,
            "relative_offset": offset / tau_star,
            "fidelity_at_peak": peak_f,
        })
    return rows


def format_report(rows: list) -> str:
    header = "label,tau_star_closed_form,tau_peak,offset,relative_offset,fidelity_at_peak"
    lines = [header]
    for row in rows:
        lines.append(",".join([row["label"]] + [
            _format_float(row[k]) for k in
            ("tau_star_closed_form", "tau_peak", "offset",
             "relative_offset", "fidelity_at_peak")]))
    return "\n".join(lines) + "\n"
