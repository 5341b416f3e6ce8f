"""
Coarsening study
================

Optimise a 1024-step selective pulse, then halve the step count twice,
re-optimising after each halving, and watch the fidelity ladder.
"""

import numpy as np

from grapekit import (
    Coupling,
    GateProblem,
    OptimizerConfig,
    SeedSpec,
    SpinSystem,
    coarsening_study,
    optimize_sequence,
    rotation,
    seed_sequence,
)

system = SpinSystem((350.0, -350.0), (Coupling(0, 1, 7.0),))
problem = GateProblem(system, rotation(np.pi / 2, "y", 0, 2))
cfg = OptimizerConfig(fidelity_goal=0.99999)

start = optimize_sequence(problem, seed_sequence(SeedSpec(1024, 2e-6, amplitude_bound_hz=1000.0), 8), cfg)
for rung in coarsening_study(start.sequence, problem, cfg, depth=2):
    dt_us = rung.sequence.durations[0] * 1e6
    print(f"{rung.n_steps:5d} steps of {dt_us:4.0f} us   fidelity {rung.fidelity:.8f}")
