"""Open-system dynamics in the co-moving frame.

The environment couples to the 0 <-> e transition only.  After moving to
the frame transported along the control loop, the reduced state rho obeys

    d rho / dt = -i [H0, rho] - i [K(t), rho] + lambda^2 * Gamma[rho]

with H0 = diag(0, 0, +omega, -omega) frozen at the loop start, K(t) the
piecewise-constant coupling generator of the current segment, and a
dissipator built from rank-1 jump operators between the loop-start frame
levels (labels "0", "1", "+", "-"):

    Gamma[rho] = sum_{a,b} f_ab(t) ( i Delta_ab [L_ab L_ab^dag, rho]
                 - Gamma_ab/2 ({L_ab L_ab^dag, rho} - 2 L_ab^dag rho L_ab) )

The angular weights f_ab follow from decomposing |e><0| in the
instantaneous frame; that decomposition only produces pairs with at least
one bright index, so the sum runs over those twelve ordered pairs (the
dark-dark weights vanish identically).  Note the weight table fixes the
free index to the bright states by this inference; the rank-1 structure of
the noise admits no other nonzero pairs.

Rates come either from a fixed table or from an Ohmic bath
xi(w) = kappa * w * exp(-w / w_c) at temperature T, via

    Gamma_ab = 2 pi xi_th(eps_a - eps_b),
    Delta_ab = PV integral of xi_th(w) / (w - eps_a + eps_b),

with the degenerate entries temperature-handled analytically:
Gamma_aa = 2 pi kappa T and Delta_aa = integral of xi(w)/w = kappa * w_c.
All energies and temperatures are in units of the gap omega.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate as _si

from .errors import (IntegrationDivergedError, QuadratureConvergenceError,
                     ValidationError)
from .linalg import max_abs, validate_density_matrix
from .propagator import adiabatic_target, frozen_hamiltonian
from .tripod import PathSpec, SpherePoint, connection, pole_relabeling, require_closed

LEVELS = ("0", "1", "+", "-")
LEVEL_INDEX = {name: i for i, name in enumerate(LEVELS)}

#: level energies in units of the gap
LEVEL_ENERGY = {"0": 0.0, "1": 0.0, "+": 1.0, "-": -1.0}

#: ordered index pairs with nonzero angular weight (at least one bright index)
NOISE_PAIRS = tuple(
    (a, b) for a in LEVELS for b in LEVELS if a in ("+", "-") or b in ("+", "-"))


def _weight_masks() -> np.ndarray:
    """0/1 masks selecting the three angular weight families."""
    m = np.zeros((3, 4, 4))
    for bright in (2, 3):
        m[0, 0, bright] = m[0, bright, 0] = 1.0
        m[1, 1, bright] = m[1, bright, 1] = 1.0
    m[2, 2:, 2:] = 1.0
    return m


_MASKS = _weight_masks()


def _angle_coefficients(theta, phi):
    """The three angular weight values (dark-0, dark-1, bright-bright)."""
    sph2 = np.sin(phi) ** 2
    return (np.cos(phi) ** 2 / 2.0,
            sph2 * np.cos(theta) ** 2 / 2.0,
            sph2 * np.sin(theta) ** 2 / 4.0)


def noise_weight(alpha: str, beta: str, p: SpherePoint) -> float:
    """Angular weight f_ab of the jump pair (alpha, beta) at a sphere point.

    Symmetric in its indices; zero whenever both indices are dark.
    """
    for name in (alpha, beta):
        if name not in LEVEL_INDEX:
            raise ValidationError(f"unknown level index {name!r}")
    c0, c1, cpm = _angle_coefficients(p.theta, p.phi)
    bright = {"+", "-"}
    in_bright = (alpha in bright, beta in bright)
    if all(in_bright):
        return float(cpm)
    if not any(in_bright):
        return 0.0
    dark = beta if alpha in bright else alpha
    return float(c0) if dark == "0" else float(c1)


def lindblad_operator(alpha: str, beta: str) -> np.ndarray:
    """Rank-1 jump operator |alpha><beta| in the loop-start frame."""
    for name in (alpha, beta):
        if name not in LEVEL_INDEX:
            raise ValidationError(f"unknown level index {name!r}")
    op = np.zeros((4, 4), dtype=complex)
    op[LEVEL_INDEX[alpha], LEVEL_INDEX[beta]] = 1.0
    return op


@dataclass(frozen=True)
class RateTable:
    """Decay rates and frequency shifts per ordered level pair (gap units).

    Rates must be nonnegative; shifts may have either sign.
    """
    gamma: dict
    delta: dict

    def __post_init__(self):
        for key, val in self.gamma.items():
            if key[0] not in LEVEL_INDEX or key[1] not in LEVEL_INDEX:
                raise ValidationError(f"invalid rate-table key {key!r}")
            if val < 0.0:
                raise ValidationError(f"negative decay rate for pair {key!r}")
        missing = set(self.gamma) - set(self.delta)
        if missing:
            raise ValidationError(f"shift entries missing for pairs {sorted(missing)}")

    def gamma_of(self, alpha: str, beta: str) -> float:
        return self.gamma[(alpha, beta)]

    def delta_of(self, alpha: str, beta: str) -> float:
        return self.delta[(alpha, beta)]


@dataclass(frozen=True)
class OhmicBath:
    """Ohmic environment kappa * w * exp(-w / omega_c) at temperature T.

    kappa is dimensionless, omega_c and temperature are in gap units;
    temperature may be zero.
    """
    kappa: float
    omega_c: float
    temperature: float

    def __post_init__(self):
        if self.kappa <= 0.0 or self.omega_c <= 0.0:
            raise ValidationError("kappa and omega_c must be positive")
        if self.temperature < 0.0:
            raise ValidationError("temperature must be nonnegative")

    def bare_density(self, freq: float) -> float:
        if freq <= 0.0:
            return 0.0
        return self.kappa * freq * math.exp(-freq / self.omega_c)


def thermal_spectral_density(freq: float, bath: OhmicBath) -> float:
    """Finite-temperature spectral density seen by the system.

    Combines stimulated emission at positive frequencies with absorption at
    negative ones; at T = 0 it reduces to the bare density for freq > 0 and
    vanishes for freq < 0.  The freq -> 0 limit is kappa * T.
    """
    t = bath.temperature
    if t == 0.0:
        return bath.bare_density(freq)
    if freq == 0.0:
        return bath.kappa * t
    x = freq / t
    if x > 700.0:
        return bath.bare_density(freq)
    if x < -700.0:
        return 0.0
    return bath.kappa * freq * math.exp(-abs(freq) / bath.omega_c) / (-math.expm1(-x))


def _quad(f, a: float, b: float, breakpoints=None) -> float:
    kwargs = dict(limit=500, epsabs=1e-10, epsrel=1e-9)
    if breakpoints:
        inner = [p for p in breakpoints if a < p < b]
        if inner:
            kwargs["points"] = inner
    val, _err = _si.quad(f, a, b, **kwargs)
    return val


def _principal_value_shift(bath: OhmicBath, nu: float, half_width: float) -> float:
    """PV integral of xi_th(w)/(w - nu) via symmetric excision.

    The excised window [nu - h, nu + h] is handled by the antisymmetrized
    integrand (xi_th(nu+u) - xi_th(nu-u))/u, which is regular at u = 0; the
    split is exact for any h, so agreement under h -> h/2 is a pure
    consistency check on the quadrature.
    """
    upper = 20.0 * bath.omega_c
    lower = 0.0 if bath.temperature == 0.0 else -upper

    def outer(w):
        return thermal_spectral_density(w, bath) / (w - nu)

    def core(u):
        return (thermal_spectral_density(nu + u, bath)
                - thermal_spectral_density(nu - u, bath)) / u

    total = 0.0
    if lower < nu - half_width:
        total += _quad(outer, lower, nu - half_width, breakpoints=[0.0])
    if nu + half_width < upper:
        total += _quad(outer, nu + half_width, upper, breakpoints=[0.0])
    total += _quad(core, 0.0, half_width)
    return total


def rates_from_bath(bath: OhmicBath, rel_tol: float = 1e-6) -> RateTable:
    """Full rate/shift table for all ordered level pairs of the tripod.

    Only five distinct transition frequencies occur: 0, +/-1 and +/-2 gap
    units.  Degenerate pairs use the analytic values (see module docstring);
    the remaining shifts come from principal-value quadrature, validated by
    halving the excision half-width and requiring relative agreement.
    """
    shift_cache = {}
    rate_cache = {}
    for nu in (0.0, 1.0, -1.0, 2.0, -2.0):
        if nu == 0.0:
            rate_cache[nu] = 2.0 * math.pi * bath.kappa * bath.temperature
            shift_cache[nu] = _quad(
                lambda w: bath.kappa * math.exp(-w / bath.omega_c),
                0.0, 20.0 * bath.omega_c)
        else:
            rate_cache[nu] = 2.0 * math.pi * thermal_spectral_density(nu, bath)
            coarse = _principal_value_shift(bath, nu, 0.5)
            fine = _principal_value_shift(bath, nu, 0.25)
            if abs(coarse - fine) > rel_tol * max(1.0, abs(fine)):
                raise QuadratureConvergenceError(
                    f"Lamb-shift quadrature at frequency {nu:+g} disagrees under "
                    f"excision halving: {coarse:.9g} vs {fine:.9g}")
            shift_cache[nu] = fine
    gamma = {}
    delta = {}
    for a in LEVELS:
        for b in LEVELS:
            nu = LEVEL_ENERGY[a] - LEVEL_ENERGY[b]
            gamma[(a, b)] = rate_cache[nu]
            delta[(a, b)] = shift_cache[nu]
    return RateTable(gamma=gamma, delta=delta)


def fixed_rates_preset() -> RateTable:
    """Illustrative fixed table of rates and shifts (gap units)."""
    gamma = {
        ("+", "0"): 1.1, ("+", "1"): 1.1, ("0", "-"): 1.1, ("1", "-"): 1.1,
        ("0", "+"): 0.8, ("-", "0"): 0.8, ("1", "+"): 0.8, ("-", "1"): 0.8,
        ("+", "+"): 1.0, ("-", "-"): 1.0,
        ("+", "-"): 1.2,
        ("-", "+"): 0.7,
    }
    delta = {
        ("+", "0"): -1.1, ("+", "1"): -1.1, ("0", "-"): -1.1, ("1", "-"): -1.1,
        ("0", "+"): 0.8, ("-", "0"): 0.8, ("1", "+"): 0.8, ("-", "1"): 0.8,
        ("+", "+"): 1.0, ("-", "-"): 1.0,
        ("+", "-"): -1.2,
        ("-", "+"): 0.7,
    }
    return RateTable(gamma=gamma, delta=delta)


@dataclass(frozen=True)
class NoiseModel:
    """Rate table plus the dimensionless coupling strength lambda^2."""
    rates: RateTable
    lambda2: float

    def __post_init__(self):
        if self.lambda2 < 0.0:
            raise ValidationError("lambda2 must be nonnegative")


def zero_noise() -> NoiseModel:
    return NoiseModel(rates=fixed_rates_preset(), lambda2=0.0)


def dissipator(rho: np.ndarray, p: SpherePoint, model: NoiseModel) -> np.ndarray:
    """lambda^2 * Gamma[rho] at a sphere point; Hermitian and traceless.

    Direct pair-by-pair evaluation, kept deliberately close to the
    defining expression; the integrator uses an equivalent vectorized form.
    """
    rho = np.asarray(rho, dtype=complex)
    out = np.zeros((4, 4), dtype=complex)
    if model.lambda2 == 0.0:
        return out
    for (a, b) in NOISE_PAIRS:
        weight = noise_weight(a, b, p)
        if weight == 0.0:
            continue
        g = model.rates.gamma_of(a, b)
        d = model.rates.delta_of(a, b)
        jump = lindblad_operator(a, b)
        keep = jump @ jump.conj().T
        term = 1j * d * (keep @ rho - rho @ keep)
        term -= 0.5 * g * (keep @ rho + rho @ keep
                           - 2.0 * jump.conj().T @ rho @ jump)
        out += weight * term
    return model.lambda2 * out


@dataclass(frozen=True)
class Trajectory:
    """Time-resolved integration output for a single initial state.

    states_r holds the co-moving-frame density matrices, states_lab the
    same states rotated back with the accumulated frame transport, and
    fidelity the overlap of each lab-frame state with the adiabatic-limit
    output of the full loop.
    """
    times: np.ndarray
    states_r: np.ndarray
    states_lab: np.ndarray
    fidelity: np.ndarray


def _coefficient_blocks(model: NoiseModel) -> tuple:
    """Per-family decay vectors and gain matrices, scaled by lambda^2.

    For each angular family s:  w_blocks[s][i] = sum_b mask_s[i,b] *
    (i Delta_ib - Gamma_ib / 2) and g_blocks[s][b,a] = mask_s[a,b] *
    Gamma_ab, so that with the angular values c_s(t) the dissipator acts as
    elementwise decay (w_i + conj(w_j)) rho_ij plus a diagonal gain G @
    diag(rho).
    """
    z = np.zeros((4, 4), dtype=complex)
    gm = np.zeros((4, 4))
    for (a, b) in NOISE_PAIRS:
        ia, ib = LEVEL_INDEX[a], LEVEL_INDEX[b]
        g = model.rates.gamma_of(a, b)
        z[ia, ib] = 1j * model.rates.delta_of(a, b) - 0.5 * g
        gm[ia, ib] = g
    lam = model.lambda2
    w_blocks = np.stack([(_MASKS[s] * z).sum(axis=1) for s in range(3)]) * lam
    g_blocks = np.stack([(_MASKS[s] * gm).T for s in range(3)]) * lam
    return w_blocks, g_blocks


def _segment_angle_coeffs(seg, ts: np.ndarray) -> tuple:
    theta = seg.start.theta + seg.theta_rate * ts
    phi = seg.start.phi + seg.phi_rate * ts
    return _angle_coefficients(theta, phi)


def _evolve_batch(path: PathSpec, omega: float, rho0: np.ndarray,
                  w_blocks: np.ndarray, g_blocks: np.ndarray,
                  steps_per_segment: int, record_stride: int = 0,
                  trace_tol: float = 1e-6, herm_bound: float = 1e-8):
    """Fixed-step RK4 integration of a batch of density matrices.

    rho0 is (B, 4, 4); w_blocks (B, 3, 4) and g_blocks (B, 3, 4, 4) are the
    per-row coefficient blocks.  The coupling generator is constant per
    segment while the angular weights are evaluated at every RK4 substep
    time.  Returns (rho_final, frame_final, records); records is a list of
    (time, rho_R copy, frame transport) captured every record_stride steps
    (0 disables recording).
    """
    rho = np.array(rho0, dtype=complex)
    h0 = np.diag(np.array([0.0, 0.0, omega, -omega], dtype=complex))
    accumulated = np.eye(4, dtype=complex)
    records = []
    if record_stride:
        records.append((0.0, rho.copy(), accumulated.copy()))
    w0, w1, w2 = w_blocks[:, 0], w_blocks[:, 1], w_blocks[:, 2]
    g0, g1, g2 = g_blocks[:, 0], g_blocks[:, 1], g_blocks[:, 2]
    diag_idx = np.arange(4)
    t_offset = 0.0
    global_step = 0
    prev_end = None

    for seg in path.segments:
        if prev_end is not None:
            relabel = pole_relabeling(prev_end, seg.start)
            if relabel is not None:
                rho = relabel.conj().T @ rho @ relabel
                accumulated = accumulated @ relabel
        k_gen = connection(seg.start, seg.theta_rate, seg.phi_rate)
        h_eff = h0 + k_gen
        kw, kv = np.linalg.eigh(k_gen)

        def transport(t_local):
            return (kv * np.exp(1j * kw * t_local)) @ kv.conj().T

        n = steps_per_segment
        h = seg.duration / n
        c0s, c1s, c2s = _segment_angle_coeffs(seg, np.arange(2 * n + 1) * (0.5 * h))

        def rhs(r, m):
            out = -1j * (h_eff @ r - r @ h_eff)
            w = c0s[m] * w0 + c1s[m] * w1 + c2s[m] * w2
            out += (w[:, :, None] + w.conj()[:, None, :]) * r
            gmat = c0s[m] * g0 + c1s[m] * g1 + c2s[m] * g2
            gain = np.einsum('bij,bj->bi', gmat, np.einsum('bii->bi', r))
            out[:, diag_idx, diag_idx] += gain
            return out

        for i in range(n):
            m = 2 * i
            k1 = rhs(rho, m)
            k2 = rhs(rho + (0.5 * h) * k1, m + 1)
            k3 = rhs(rho + (0.5 * h) * k2, m + 1)
            k4 = rhs(rho + h * k3, m + 2)
            rho = rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            swapped = rho.conj().transpose(0, 2, 1)
            residue = max_abs(rho - swapped)
            if residue > herm_bound:
                raise IntegrationDivergedError(
                    f"Hermiticity drift {residue:.3e} at t={t_offset + (i + 1) * h:.6g}; "
                    "reduce the integration step")
            rho = 0.5 * (rho + swapped)
            traces = np.einsum('bii->b', rho).real
            drift = float(np.max(np.abs(traces - 1.0)))
            if drift > trace_tol:
                raise IntegrationDivergedError(
                    f"trace drift {drift:.3e} at t={t_offset + (i + 1) * h:.6g}; "
                    "reduce the integration step")
            global_step += 1
            if record_stride and (global_step % record_stride == 0 or i == n - 1):
                t_local = (i + 1) * h
                records.append((t_offset + t_local, rho.copy(),
                                accumulated @ transport(t_local)))
        accumulated = accumulated @ transport(seg.duration)
        t_offset += seg.duration
        prev_end = seg.end
    return rho, accumulated, records


def integrate_master_equation(path: PathSpec, omega: float,
                              initial: np.ndarray, model: NoiseModel,
                              steps_per_segment: int = 2000,
                              sample_stride: int = 1) -> Trajectory:
    """Integrate the co-moving-frame master equation along a closed loop.

    The initial state must be supported on the computational space and
    steps_per_segment must be at least 100 (the default leaves a wide
    accuracy margin against the exact noiseless propagator).  Returns the
    trajectory sampled every sample_stride steps in both frames, together
    with the fidelity of each lab-frame sample against the adiabatic-limit
    output of the loop.
    """
    require_closed(path)
    if steps_per_segment < 100:
        raise ValidationError("steps_per_segment must be >= 100")
    rho = validate_density_matrix(initial)
    if max_abs(rho[2:, :]) > 1e-10 or max_abs(rho[:, 2:]) > 1e-10:
        raise ValidationError("initial state must be supported on the computational space")
    w_blocks, g_blocks = _coefficient_blocks(model)
    _final, _frame, records = _evolve_batch(
        path, omega, rho[None, :, :], w_blocks[None], g_blocks[None],
        steps_per_segment, record_stride=max(1, sample_stride))
    target = adiabatic_target(path, omega)
    sigma_ad = target @ rho @ target.conj().T
    times = np.array([t for t, _r, _f in records])
    states_r = np.array([r[0] for _t, r, _f in records])
    states_lab = np.array([f @ r[0] @ f.conj().T for _t, r, f in records])
    fidelity = np.array([float(np.trace(sigma_ad @ s).real) for s in states_lab])
    return Trajectory(times=times, states_r=states_r,
                      states_lab=states_lab, fidelity=fidelity)


@dataclass(frozen=True)
class GridEvolution:
    """Batched integration result over (initial state) x (noise model).

    final_lab and final_r have shape (n_states, n_models, 4, 4); the
    record arrays (present when record_stride > 0) hold the co-moving
    states at the sampled times for invariant monitoring.
    """
    final_lab: np.ndarray
    final_r: np.ndarray
    record_times: np.ndarray | None
    record_states_r: np.ndarray | None
    record_frames: np.ndarray | None


def evolve_grid(path: PathSpec, omega: float, initials, models,
                steps_per_segment: int, record_stride: int = 0) -> GridEvolution:
    """Integrate every (initial, model) combination in one batched run."""
    require_closed(path)
    if steps_per_segment < 100:
        raise ValidationError("steps_per_segment must be >= 100")
    initials = [validate_density_matrix(r) for r in initials]
    blocks = [_coefficient_blocks(m) for m in models]
    n_s, n_m = len(initials), len(models)
    rho0 = np.array([initials[s] for s in range(n_s) for _ in range(n_m)])
    w_blocks = np.array([blocks[m][0] for _ in range(n_s) for m in range(n_m)])
    g_blocks = np.array([blocks[m][1] for _ in range(n_s) for m in range(n_m)])
    final_r, frame_final, records = _evolve_batch(
        path, omega, rho0, w_blocks, g_blocks, steps_per_segment,
        record_stride=record_stride)
    final_lab = frame_final @ final_r @ frame_final.conj().T
    if records:
        times = np.array([t for t, _r, _f in records])
        states = np.array([r for _t, r, _f in records])
        frames = np.array([f for _t, _r, f in records])
    else:
        times = states = frames = None
    return GridEvolution(
        final_lab=final_lab.reshape(n_s, n_m, 4, 4),
        final_r=final_r.reshape(n_s, n_m, 4, 4),
        record_times=times, record_states_r=states, record_frames=frames)
