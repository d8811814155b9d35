"""Holonomic NOT-gate dynamics on a four-level tripod system.

Exact piecewise propagators for control loops on the dark-state sphere,
fidelity revivals with their closed-form optimal durations, and an
open-system master equation (fixed rate tables or a thermal Ohmic bath)
integrated in the co-moving frame.  The `holonomy-lab` CLI reproduces the
standard figure datasets as CSV files.
"""

from .bloch import BlochSampling, bloch_samples
from .errors import (ConfigError, IntegrationDivergedError,
                     QuadratureConvergenceError, ValidationError)
from .experiments import (ExperimentConfig, named_state, optimal_time_report,
                          parse_config, run_experiment)
from .lindblad import (GridEvolution, NoiseModel, OhmicBath, RateTable,
                       Trajectory, dissipator, evolve_grid,
                       fixed_rates_preset, integrate_master_equation,
                       lindblad_operator, noise_weight, rates_from_bath,
                       thermal_spectral_density, zero_noise)
from .linalg import (expm_generator, hermitize, is_hermitian, is_pure,
                     is_unitary, max_abs, pure_density, state_fidelity,
                     state_vector, validate_density_matrix)
from .propagator import (LoopPropagator, RevivalReport,
                         adiabatic_segment_propagator, adiabatic_target,
                         fidelity_noiseless, find_fidelity_maxima,
                         find_revivals_numeric, frozen_hamiltonian,
                         loop_propagator, mean_fidelity_noiseless,
                         mismatch_00_closed_form, mismatch_for_path,
                         mismatch_operator, not_loop_closed_form,
                         revival_times, segment_propagator)
from .tripod import (PathSegment, PathSpec, SpherePoint, TripodFrame,
                     adiabatic_connection, adiabatic_holonomy, basis_matrix,
                     connection, format_path, frame, frame_transport,
                     generalized_loop_path, hamiltonian, not_gate_path,
                     parse_path, rabi_amplitudes, reverse_path, solid_angle)

__version__ = "0.1.0"
