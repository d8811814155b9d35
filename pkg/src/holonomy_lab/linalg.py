"""Dense complex linear algebra for the four-level simulations.

Operators and states are plain complex ndarrays (dimension 2 or 4); this
module collects the exact primitives everything else builds on: matrix
exponentials of anti-Hermitian generators, Hermiticity guards, state
construction and the trace fidelity between density matrices.

Working units: the bright-state energy gap is the unit of energy and its
inverse the unit of time, so propagators only ever depend on the
dimensionless product gap * time.

All functions are pure and operate on immutable inputs; results are fresh
arrays, safe to share across threads.
"""

from __future__ import annotations

import numpy as np

from .errors import IntegrationDivergedError, ValidationError

#: default absolute tolerance for operator comparisons
DEFAULT_ATOL = 1e-10


def max_abs(m: np.ndarray) -> float:
    """Largest absolute entry; the norm used for every tolerance check here."""
    m = np.asarray(m)
    return float(np.max(np.abs(m))) if m.size else 0.0


def is_hermitian(m: np.ndarray, atol: float = DEFAULT_ATOL) -> bool:
    m = np.asarray(m)
    return max_abs(m - m.conj().T) <= atol


def is_unitary(u: np.ndarray, atol: float = DEFAULT_ATOL) -> bool:
    u = np.asarray(u)
    return max_abs(u.conj().T @ u - np.eye(u.shape[0])) <= atol


def expm_generator(generator: np.ndarray, t: float,
                   atol: float = DEFAULT_ATOL) -> np.ndarray:
    """exp(generator * t) for an anti-Hermitian generator.

    The caller passes generator = -i * (Hermitian matrix); the result is
    unitary.  Computed through the spectral decomposition of the Hermitian
    matrix i * generator, which is exact at dimension <= 4 and avoids any
    scaling-and-squaring heuristics.
    """
    g = np.asarray(generator, dtype=complex)
    residue = max_abs(g + g.conj().T)
    if residue > atol:
        raise ValidationError(
            f"generator is not anti-Hermitian: residue {residue:.3e} > {atol:.1e}")
    w, v = np.linalg.eigh(1j * g)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def hermitize(m: np.ndarray, drift_bound: float = 1e-8) -> np.ndarray:
    """Project m onto its Hermitian part (m + m^dag)/2.

    Used as a per-step guard inside time integrators.  A residue beyond
    drift_bound means the integration has left its accuracy regime, which
    is reported as an error rather than silently repaired.
    """
    m = np.asarray(m, dtype=complex)
    residue = max_abs(m - m.conj().T)
    if residue > drift_bound:
        raise IntegrationDivergedError(
            f"Hermiticity drift {residue:.3e} exceeds bound {drift_bound:.1e}; "
            "reduce the integration step")
    return 0.5 * (m + m.conj().T)


def state_vector(amplitudes) -> np.ndarray:
    """Normalized complex state vector; rejects (near-)zero input."""
    v = np.asarray(amplitudes, dtype=complex)
    norm = np.linalg.norm(v)
    if norm < 1e-12:
        raise ValidationError("cannot normalize a zero state vector")
    return v / norm


def pure_density(psi) -> np.ndarray:
    """Rank-1 density matrix |psi><psi| from a (normalized) state vector."""
    v = state_vector(psi)
    return np.outer(v, v.conj())


def is_pure(rho: np.ndarray, atol: float = 1e-8) -> bool:
    rho = np.asarray(rho)
    return abs(np.trace(rho @ rho).real - 1.0) <= atol


def validate_density_matrix(rho: np.ndarray, atol: float = 1e-8,
                            eig_floor: float = -1e-6) -> np.ndarray:
    """Check Hermiticity, unit trace and spectrum of a density matrix."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValidationError(f"density matrix must be square, got {rho.shape}")
    if not is_hermitian(rho, atol):
        raise ValidationError("density matrix is not Hermitian within tolerance")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > atol:
        raise ValidationError(f"density matrix trace {tr:.12f} != 1")
    min_eig = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
    if min_eig < eig_floor:
        raise ValidationError(f"density matrix has eigenvalue {min_eig:.3e} < {eig_floor:.1e}")
    return rho


def state_fidelity(sigma_ref: np.ndarray, sigma: np.ndarray,
                   purity_atol: float = 1e-8,
                   imag_atol: float = 1e-10) -> float:
    """Trace fidelity Tr{sigma_ref sigma} against a pure reference state.

    For a pure reference this equals the transition probability into the
    reference state, so it lies in [0, 1] up to rounding.
    """
    a = np.asarray(sigma_ref, dtype=complex)
    b = np.asarray(sigma, dtype=complex)
    purity = np.trace(a @ a).real
    if abs(purity - 1.0) > purity_atol:
        raise ValidationError(
            f"reference state is not pure: Tr(rho^2) = {purity:.10f}")
    val = np.trace(a @ b)
    if abs(val.imag) > imag_atol:
        raise ValidationError(
            f"fidelity trace has imaginary residue {val.imag:.3e}")
    return float(val.real)
