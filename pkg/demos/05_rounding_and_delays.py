"""
Hardware rounding and fixed delays
==================================

Two hardware effects on an optimised pulse: amplitude/phase rounding to
a finite number of levels, and short unavoidable delays before and after
the shape, which can be absorbed by adjusting the target.
"""

import numpy as np

from grapekit import (
    Coupling,
    DelayPad,
    GateProblem,
    OptimizerConfig,
    QuantizationSpec,
    SeedSpec,
    SpinSystem,
    adjust_target,
    optimize_sequence,
    padded_fidelity,
    rotation,
    rounding_impact,
    seed_sequence,
)

system = SpinSystem((350.0, -350.0), (Coupling(0, 1, 7.0),))
target = rotation(np.pi / 2, "y", 0, 2)
cfg = OptimizerConfig(fidelity_goal=0.99999)
seed = seed_sequence(SeedSpec(128, 1e-5, amplitude_bound_hz=1000.0), 1)

problem = GateProblem(system, target)
seq = optimize_sequence(problem, seed, cfg).sequence
peak = np.max(np.hypot(seq.amplitudes[:, 0], seq.amplitudes[:, 1])) / (2 * np.pi)

print("rounding:")
for bits in (2, 4, 6, 8, 10, 12):
    impact = rounding_impact(problem, seq, QuantizationSpec.bits(bits, peak))
    print(f"  {bits:2d} bits  fidelity {impact.quantized:.8f}  loss {impact.delta:.2e}")

pad = DelayPad(10e-6, 10e-6)
adjusted = optimize_sequence(GateProblem(system, adjust_target(target, system, pad)), seed, cfg).sequence
print("with 10 us pads on both sides:")
print(f"  optimised for the bare target     {padded_fidelity(system, seq, target, pad):.6f}")
print(f"  optimised for the adjusted target {padded_fidelity(system, adjusted, target, pad):.6f}")
