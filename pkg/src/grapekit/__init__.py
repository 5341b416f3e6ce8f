"""Gradient-ascent pulse engineering for small coupled spin-1/2 systems."""

from .gates import bb1, bb1_phase, cnot, controlled_phase, hard_pulse, identity, named_gate, rotation
from .hardware import (
    DelayPad,
    QuantizationSpec,
    adjust_target,
    pad_propagators,
    padded_fidelity,
    quantize,
    rounding_impact,
)
from .objective import (
    EnsembleMember,
    EnsembleSpec,
    GateProblem,
    ObjectiveReport,
    PenaltyConfig,
    TargetGate,
    composite_objective,
    fidelity,
    gradient,
    power_penalty,
)
from .optimizer import (
    OptimizationResult,
    OptimizerConfig,
    SeedSpec,
    coarsen,
    coarsening_study,
    conjugate_gradient_ascend,
    optimize_sequence,
    perturb_and_retry,
    seed_sequence,
)
from .propagation import (
    ControlSequence,
    Delay,
    PropagatorCache,
    Pulse,
    build_cache,
    delay_propagator,
    expm_hermitian,
    final_propagator,
    propagator_derivative,
    pulse_propagator,
)
from .spins import (
    ORE,
    PLE,
    Channel,
    Coupling,
    HamiltonianSet,
    SpinSystem,
    apply_error_model,
    build_contaminant_hamiltonians,
    build_hamiltonians,
)

__version__ = "0.1.0"
