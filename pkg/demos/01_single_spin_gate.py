"""
A 90-degree rotation on one spin
================================

The smallest useful problem: an on-resonance spin, ten piecewise-constant
steps, and a seed drawn from a few random sinusoids.
"""

import numpy as np

from grapekit import GateProblem, OptimizerConfig, SeedSpec, SpinSystem, optimize_sequence, rotation, seed_sequence

system = SpinSystem(offsets_hz=(0.0,))
problem = GateProblem(system, rotation(np.pi / 2, "x"))

# ten 10 us steps, peak field 2.5 kHz
seed = seed_sequence(SeedSpec(n_steps=10, dt=1e-5, amplitude_bound_hz=2500.0), rng=1)
print(f"seed fidelity      {problem.fidelity_of(seed):.6f}")

result = optimize_sequence(problem, seed, OptimizerConfig(fidelity_goal=0.99999))
print(f"optimised fidelity {result.objective:.8f} after {result.iterations} iterations ({result.termination})")

# the amplitudes (Hz) of the final shape
for j, (ux, uy) in enumerate(result.sequence.amplitudes / (2 * np.pi)):
    print(f"  step {j}: ux = {ux:8.1f} Hz   uy = {uy:8.1f} Hz")
