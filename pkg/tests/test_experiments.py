"""Bloch sampling, experiment configs, CSV harness, optimal-time report."""

import math

import numpy as np
import pytest

from holonomy_lab import (BlochSampling, ConfigError, ExperimentConfig,
                          bloch_samples, max_abs, optimal_time_report,
                          parse_config, revival_times, run_experiment)

FIRST_REVIVAL = float(revival_times(1)[0])


def read_csv(path):
    with open(path, newline="") as fh:
        raw = fh.read()
    assert raw.endswith("\n") and "\r" not in raw
    lines = raw.strip().split("\n")
    header = lines[0].split(",")
    rows = [[float(x) for x in line.split(",")] for line in lines[1:]]
    return header, np.array(rows)


# ---------------------------------------------------------------- sampling

def test_single_fibonacci_sample_sits_on_equator():
    (rho,) = bloch_samples(BlochSampling("fibonacci", 1))
    expected = 0.5 * np.array([[1, 1, 0, 0], [1, 1, 0, 0],
                               [0, 0, 0, 0], [0, 0, 0, 0]], dtype=complex)
    assert max_abs(rho - expected) < 1e-12


def test_fibonacci_is_deterministic_and_valid():
    a = bloch_samples(BlochSampling("fibonacci", 64))
    b = bloch_samples(BlochSampling("fibonacci", 64))
    for x, y in zip(a, b):
        assert max_abs(x - y) == 0.0
        assert abs(np.trace(x @ x).real - 1.0) < 1e-12
        assert max_abs(x[2:, :]) == 0.0


def test_random_sampling_is_roughly_uniform():
    states = bloch_samples(BlochSampling("random-seeded", 2000, seed=5))
    mean_z = np.mean([s[0, 0].real - s[1, 1].real for s in states])
    assert abs(mean_z) < 0.05


def test_sampling_validation():
    with pytest.raises(Exception):
        BlochSampling("hexagonal", 10)
    with pytest.raises(Exception):
        BlochSampling("fibonacci", 0)


# ------------------------------------------------------------------ config

def test_parse_config_roundtrip_and_overrides():
    text = """
    # comment
    figure = noisy-mean
    tau_min = 5
    tau_max = 25
    tau_points = 3
    lambda2 = 0,0.01
    samples = 16
    steps = 150
    out = /tmp/cfg_test.csv
    """
    cfg = parse_config(text)
    assert cfg.figure == "noisy-mean"
    assert cfg.lambda2 == (0.0, 0.01)
    assert cfg.sampling.count == 16
    cfg2 = parse_config(text, {"tau_points": 5, "lambda2": "0.02"})
    assert cfg2.tau_points == 5 and cfg2.lambda2 == (0.02,)


def test_parse_config_errors_name_field():
    with pytest.raises(ConfigError, match="frobnication"):
        parse_config("frobnication = 3\n")
    with pytest.raises(ConfigError, match="tau_points"):
        parse_config("tau_points = many\n")
    with pytest.raises(ConfigError, match="figure"):
        parse_config("figure = mystery-plot\n")
    with pytest.raises(ConfigError, match="lambda2"):
        parse_config("lambda2 = -0.5\n")


# ----------------------------------------------------------------- sweeps

def test_ideal_mean_hits_one_at_revival(tmp_path):
    out = tmp_path / "ideal.csv"
    cfg = ExperimentConfig(figure="ideal-mean",
                           tau_min=FIRST_REVIVAL - 2.0,
                           tau_max=FIRST_REVIVAL + 2.0, tau_points=5,
                           sampling=BlochSampling("fibonacci", 64),
                           out=str(out))
    run_experiment(cfg)
    header, rows = read_csv(out)
    assert header == ["omega_tau", "F_mean"]
    mid = rows[2]
    assert mid[0] == pytest.approx(FIRST_REVIVAL, abs=1e-9)
    assert abs(mid[1] - 1.0) < 1e-9
    assert np.all(rows[:, 1] <= 1.0 + 1e-9) and np.all(rows[:, 1] >= 0.0)


def test_per_state_columns_and_monotonicity_at_revival(tmp_path):
    out = tmp_path / "per_state.csv"
    lambdas = (0.0, 0.005, 0.02)
    cfg = ExperimentConfig(figure="per-state", tau_min=FIRST_REVIVAL - 1.0,
                           tau_max=FIRST_REVIVAL, tau_points=2,
                           lambda2=lambdas, steps_per_segment=300,
                           out=str(out))
    run_experiment(cfg)
    header, rows = read_csv(out)
    expected = ["omega_tau"] + [f"F_{s}_l2={l}" for s in ("up", "down", "sym")
                                for l in lambdas]
    assert header == expected
    revival_row = rows[-1]
    assert revival_row[0] == pytest.approx(FIRST_REVIVAL, abs=1e-9)
    for block in range(3):
        cols = revival_row[1 + 3 * block: 4 + 3 * block]
        assert np.all(np.diff(cols) <= 1e-9)
    assert np.all(rows[:, 1:] <= 1.0 + 1e-9) and np.all(rows[:, 1:] >= 0.0)


def test_csv_determinism_across_runs_and_workers(tmp_path):
    base = dict(figure="noisy-mean", tau_min=12.0, tau_max=20.0, tau_points=3,
                lambda2=(0.0, 0.02), steps_per_segment=150,
                sampling=BlochSampling("fibonacci", 12))
    blobs = []
    for name, workers in (("a", 1), ("b", 1), ("c", 2)):
        out = tmp_path / f"{name}.csv"
        run_experiment(ExperimentConfig(**base, out=str(out), workers=workers))
        blobs.append(out.read_bytes())
    assert blobs[0] == blobs[1] == blobs[2]


def test_ohmic_mean_smoke(tmp_path):
    out = tmp_path / "ohmic.csv"
    cfg = ExperimentConfig(figure="ohmic-mean", tau_min=16.0, tau_max=20.0,
                           tau_points=2, lambda2=(0.01,),
                           temperatures=(1.0, 10.0),
                           sampling=BlochSampling("fibonacci", 8),
                           steps_per_segment=150, out=str(out))
    run_experiment(cfg)
    header, rows = read_csv(out)
    assert header == ["omega_tau", "F_mean_T=1.0", "F_mean_T=10.0"]
    assert np.all(rows[:, 1:] > 0.5) and np.all(rows[:, 1:] <= 1.0 + 1e-9)


def test_ohmic_mean_requires_single_lambda():
    with pytest.raises(ConfigError, match="lambda2"):
        ExperimentConfig(figure="ohmic-mean", lambda2=(0.01, 0.02))


# ----------------------------------------------------------------- report

def test_optimal_report_noiseless_peak_sits_at_revival():
    cfg = ExperimentConfig(figure="noisy-mean", lambda2=(0.0,),
                           sampling=BlochSampling("fibonacci", 16),
                           steps_per_segment=150)
    (row,) = optimal_time_report(cfg, window=2.0, points=21)
    grid_step = 2.0 * 2.0 / 20
    assert abs(row["offset"]) < grid_step
    assert row["fidelity_at_peak"] > 1.0 - 1e-6


def test_optimal_report_peak_shift_is_small_under_noise():
    cfg = ExperimentConfig(figure="noisy-mean", lambda2=(0.01,),
                           sampling=BlochSampling("fibonacci", 16),
                           steps_per_segment=200)
    (row,) = optimal_time_report(cfg, window=2.0, points=21)
    assert abs(row["relative_offset"]) < 0.05
    assert row["fidelity_at_peak"] > 0.85
