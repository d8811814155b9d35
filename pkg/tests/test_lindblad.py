"""Open-system machinery: weights, rates, dissipator, integrator."""

import math

import numpy as np
import pytest

from holonomy_lab import (IntegrationDivergedError, NoiseModel, OhmicBath,
                          PathSegment, PathSpec, RateTable, SpherePoint,
                          ValidationError, dissipator, fixed_rates_preset,
                          hermitize, integrate_master_equation,
                          lindblad_operator, loop_propagator, max_abs,
                          named_state, noise_weight, not_gate_path,
                          pure_density, rates_from_bath, revival_times,
                          thermal_spectral_density, zero_noise)
from holonomy_lab.lindblad import (LEVELS, NOISE_PAIRS, _coefficient_blocks,
                                   _evolve_batch)

FIRST_REVIVAL = float(revival_times(1)[0])


def hold_loop(theta, phi, duration):
    return PathSpec((PathSegment(SpherePoint(theta, phi), 0.0, 0.0, duration),))


# ---------------------------------------------------------------- weights

def test_noise_weight_reference_values():
    pole = SpherePoint(0.0, 0.0)
    assert noise_weight("+", "0", pole) == pytest.approx(0.5)
    assert noise_weight("0", "1", SpherePoint(1.0, 2.0)) == 0.0
    corner = SpherePoint(math.pi / 2, math.pi / 2)
    assert noise_weight("+", "-", corner) == pytest.approx(0.25)


def test_noise_weight_symmetry_and_pairs():
    rng = np.random.default_rng(4)
    for _ in range(20):
        p = SpherePoint(rng.uniform(0, math.pi), rng.uniform(-4, 4))
        for a in LEVELS:
            for b in LEVELS:
                assert noise_weight(a, b, p) == pytest.approx(noise_weight(b, a, p))
                if a in ("0", "1") and b in ("0", "1"):
                    assert noise_weight(a, b, p) == 0.0
    assert len(NOISE_PAIRS) == 12
    with pytest.raises(ValidationError):
        noise_weight("x", "0", SpherePoint(0.0, 0.0))


def test_lindblad_operator_structure():
    proj = lindblad_operator("0", "0")
    assert max_abs(proj @ proj - proj) < 1e-15
    assert max_abs(lindblad_operator("+", "1").conj().T
                   - lindblad_operator("1", "+")) == 0.0
    jump = lindblad_operator("+", "1")
    keep = jump @ jump.conj().T
    expected = np.zeros((4, 4), dtype=complex)
    expected[2, 2] = 1.0
    assert max_abs(keep - expected) == 0.0


# ------------------------------------------------------------------ rates

def test_thermal_density_zero_temperature():
    bath = OhmicBath(0.01, 100.0, 0.0)
    assert thermal_spectral_density(-1.0, bath) == 0.0
    assert thermal_spectral_density(1.0, bath) == pytest.approx(
        0.01 * math.exp(-0.01), rel=1e-12)


def test_thermal_density_reference_value():
    # kappa=0.01, omega_c=100, T=1 at unit frequency:
    # 0.01 * exp(-0.01) * (1/(e-1) + 1)
    bath = OhmicBath(0.01, 100.0, 1.0)
    assert thermal_spectral_density(1.0, bath) == pytest.approx(
        0.0156623578, abs=1e-9)


def test_thermal_density_continuous_at_zero():
    bath = OhmicBath(0.05, 50.0, 2.0)
    limit = bath.kappa * bath.temperature
    assert thermal_spectral_density(1e-9, bath) == pytest.approx(limit, rel=1e-6)
    assert thermal_spectral_density(-1e-9, bath) == pytest.approx(limit, rel=1e-6)
    assert thermal_spectral_density(0.0, bath) == pytest.approx(limit)


def test_rates_from_bath_degenerate_entries():
    bath = OhmicBath(0.01, 100.0, 1.0)
    table = rates_from_bath(bath)
    # analytic: 2 pi kappa T and kappa * omega_c
    assert table.gamma_of("+", "+") == pytest.approx(2 * math.pi * 0.01, abs=1e-10)
    assert table.delta_of("-", "-") == pytest.approx(1.0, rel=1e-4)
    # transition entries evaluate the thermal density at the gap
    assert table.gamma_of("+", "0") == pytest.approx(
        2 * math.pi * thermal_spectral_density(1.0, bath), rel=1e-12)
    assert table.gamma_of("0", "-") == pytest.approx(table.gamma_of("+", "0"))
    assert table.gamma_of("+", "-") == pytest.approx(
        2 * math.pi * thermal_spectral_density(2.0, bath), rel=1e-12)
    assert len(table.gamma) == 16 and len(table.delta) == 16


def test_rates_from_bath_zero_temperature_has_no_absorption():
    table = rates_from_bath(OhmicBath(0.01, 100.0, 0.0))
    assert table.gamma_of("-", "0") == 0.0
    assert table.gamma_of("0", "+") == 0.0
    assert table.gamma_of("+", "+") == 0.0
    assert table.gamma_of("+", "0") > 0.0
    assert table.delta_of("+", "+") == pytest.approx(1.0, rel=1e-4)


def test_fixed_preset_values():
    table = fixed_rates_preset()
    assert table.gamma_of("+", "-") == pytest.approx(1.2)
    assert table.delta_of("+", "-") == pytest.approx(-1.2)
    assert table.delta_of("-", "+") == pytest.approx(0.7)
    assert table.gamma_of("+", "0") == pytest.approx(1.1)
    assert table.delta_of("0", "+") == pytest.approx(0.8)


def test_rate_table_rejects_negative_rates():
    with pytest.raises(ValidationError):
        RateTable(gamma={("+", "0"): -0.1}, delta={("+", "0"): 0.0})
    with pytest.raises(ValidationError):
        NoiseModel(fixed_rates_preset(), -1.0)


# ------------------------------------------------------------- dissipator

def test_dissipator_vanishes_without_noise():
    rho = named_state("sym")
    p = SpherePoint(1.0, 1.0)
    assert max_abs(dissipator(rho, p, zero_noise())) == 0.0
    silent = RateTable(gamma={k: 0.0 for k in NOISE_PAIRS},
                       delta={k: 0.0 for k in NOISE_PAIRS})
    assert max_abs(dissipator(rho, p, NoiseModel(silent, 0.3))) == 0.0


def test_dissipator_hermitian_traceless():
    rng = np.random.default_rng(8)
    model = NoiseModel(fixed_rates_preset(), 0.02)
    mixed = np.eye(4, dtype=complex) / 4.0
    out = dissipator(mixed, SpherePoint(0.9, 2.2), model)
    assert max_abs(out - out.conj().T) < 1e-14
    for _ in range(10):
        amps = rng.normal(size=4) + 1j * rng.normal(size=4)
        rho = pure_density(amps)
        p = SpherePoint(rng.uniform(0, math.pi), rng.uniform(0, 7))
        out = dissipator(rho, p, model)
        assert abs(np.trace(out)) < 1e-12
        assert max_abs(out - out.conj().T) < 1e-13


def test_dissipator_bright_state_at_pole():
    # at phi = 0 only the dark-0 weight survives
    bright = np.zeros((4, 4), dtype=complex)
    bright[2, 2] = 1.0
    model = NoiseModel(fixed_rates_preset(), 1.0)
    out = dissipator(bright, SpherePoint(0.0, 0.0), model)
    assert abs(np.trace(out)) < 1e-14
    # population leaves |+> toward |0> at rate f * Gamma_{+0}
    assert out[2, 2].real == pytest.approx(-0.5 * 1.1, rel=1e-12)
    assert out[0, 0].real == pytest.approx(0.5 * 1.1, rel=1e-12)


def test_vectorized_blocks_agree_with_dissipator():
    # the integrator's elementwise decay + diagonal gain form must equal
    # the direct pair-by-pair dissipator
    rng = np.random.default_rng(12)
    model = NoiseModel(fixed_rates_preset(), 0.04)
    w_blocks, g_blocks = _coefficient_blocks(model)
    from holonomy_lab.lindblad import _angle_coefficients
    for _ in range(5):
        rho = pure_density(rng.normal(size=4) + 1j * rng.normal(size=4))
        p = SpherePoint(rng.uniform(0, math.pi), rng.uniform(0, 7))
        c = _angle_coefficients(p.theta, p.phi)
        w = sum(c[s] * w_blocks[s] for s in range(3))
        g = sum(c[s] * g_blocks[s] for s in range(3))
        fast = (w[:, None] + w.conj()[None, :]) * rho
        fast[np.arange(4), np.arange(4)] += g @ np.diag(rho)
        assert max_abs(fast - dissipator(rho, p, model)) < 1e-14


# ------------------------------------------------------------- integrator

def test_integrator_matches_exact_propagator_without_noise():
    path = not_gate_path(20.0)
    rho0 = named_state("sym")
    traj = integrate_master_equation(path, 1.0, rho0, zero_noise(),
                                     steps_per_segment=400, sample_stride=400)
    u = loop_propagator(path, 1.0).total
    exact = u @ rho0 @ u.conj().T
    assert max_abs(traj.states_lab[-1] - exact) < 1e-6


def test_integrator_preserves_invariants():
    path = not_gate_path(15.0)
    model = NoiseModel(fixed_rates_preset(), 0.03)
    traj = integrate_master_equation(path, 1.0, named_state("up"), model,
                                     steps_per_segment=300, sample_stride=25)
    traces = np.array([np.trace(s).real for s in traj.states_r])
    assert np.max(np.abs(traces - 1.0)) < 1e-8
    for s in traj.states_r:
        assert max_abs(s - s.conj().T) < 1e-8
        assert np.linalg.eigvalsh(s).min() > -1e-6
    assert traj.times[0] == 0.0
    assert traj.times[-1] == pytest.approx(15.0)
    assert np.all(traj.fidelity <= 1.0 + 1e-9)


def test_frozen_hamiltonian_alone_conserves_populations():
    # a hold loop has no frame motion; with zero noise only the frozen
    # Hamiltonian acts and populations in its eigenbasis stay fixed
    path = hold_loop(0.8, 0.5, 5.0)
    rho0 = pure_density([0.6, 0.8, 0.0, 0.0])
    traj = integrate_master_equation(path, 1.0, rho0, zero_noise(),
                                     steps_per_segment=200, sample_stride=20)
    pops = np.array([np.diag(s).real for s in traj.states_r])
    assert max_abs(pops - pops[0]) < 1e-10


def test_integrator_preconditions():
    path = not_gate_path(5.0)
    with pytest.raises(ValidationError):
        integrate_master_equation(path, 1.0, named_state("up"), zero_noise(),
                                  steps_per_segment=50)
    ancilla = pure_density([0.0, 0.0, 1.0, 0.0])
    with pytest.raises(ValidationError):
        integrate_master_equation(path, 1.0, ancilla, zero_noise())


def test_integrator_reports_divergence():
    # absurdly strong rates blow up the fixed-step integration
    table = fixed_rates_preset()
    model = NoiseModel(table, 1e8)
    with pytest.raises(IntegrationDivergedError):
        integrate_master_equation(not_gate_path(10.0), 1.0, named_state("up"),
                                  model, steps_per_segment=100)


def test_raw_rk4_step_is_hermitian_after_guard():
    # one manual RK4 step of the full generator, then the projection guard
    path = not_gate_path(10.0)
    seg = path.segments[0]
    model = NoiseModel(fixed_rates_preset(), 0.02)
    w_blocks, g_blocks = _coefficient_blocks(model)
    rho, _frame, _rec = _evolve_batch(path, 1.0, named_state("up")[None],
                                      w_blocks[None], g_blocks[None],
                                      steps_per_segment=100)
    out = hermitize(rho[0], drift_bound=1e-8)
    assert max_abs(out - out.conj().T) < 1e-12


def test_fidelity_above_point_nine_at_optimum():
    path = not_gate_path(FIRST_REVIVAL)
    model = NoiseModel(fixed_rates_preset(), 0.005)
    for label in ("up", "down", "sym"):
        traj = integrate_master_equation(path, 1.0, named_state(label), model,
                                         steps_per_segment=400,
                                         sample_stride=400)
        assert traj.fidelity[-1] > 0.9
