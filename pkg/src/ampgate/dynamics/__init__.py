"""Time-domain engines: Bogoliubov coefficients, coherent branches, Fock space."""
from .bogoliubov import integrate_uv, step_size
from .coherent import (GEOMETRIC_PHASE_SIGN, HEATING_PENALTY_CONSTANT, apply_heating_penalty,
                       branch_coefficient, branch_displacement, coherent_fidelity_curve,
                       fidelity_coherent, fidelity_from_branch, geometric_phase,
                       ideal_propagator, trajectory_phase)
from .fock import (FockResult, fock_fidelity, fock_steps_per_loop, generator_bound, propagate_fock,
                   select_truncation, zeeman_bound)
from .noise import (IntegratorOptions, NoiseRealization, ZeemanSchedule, draw_realization,
                    draw_realizations, noiseless, run_seed)

__all__ = [
    "integrate_uv", "step_size", "GEOMETRIC_PHASE_SIGN", "HEATING_PENALTY_CONSTANT",
    "apply_heating_penalty", "branch_coefficient", "branch_displacement",
    "coherent_fidelity_curve", "fidelity_coherent", "fidelity_from_branch",
    "geometric_phase", "ideal_propagator", "trajectory_phase", "FockResult",
    "fock_fidelity", "fock_steps_per_loop", "generator_bound", "propagate_fock",
    "select_truncation", "zeeman_bound", "IntegratorOptions",
    "NoiseRealization", "ZeemanSchedule", "draw_realization", "draw_realizations",
    "noiseless", "run_seed",
]
