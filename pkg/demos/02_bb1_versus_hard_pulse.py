"""
BB1 against a plain hard pulse
==============================

Scale the field strength of a hard 90-degree pulse and of its BB1
counterpart and compare how fast the infidelity grows.
"""

import numpy as np

from grapekit import PLE, GateProblem, SpinSystem, bb1, bb1_phase, hard_pulse, rotation

problem = GateProblem(SpinSystem((0.0,)), rotation(np.pi / 2, "x"))
plain = hard_pulse(np.pi / 2)
composite = bb1(np.pi / 2)
print(f"BB1 correction phase: {np.degrees(bb1_phase(np.pi / 2)):.2f} deg")

print(f"{'scale':>6} {'plain':>12} {'BB1':>12}")
for s in np.linspace(0.5, 1.5, 11):
    print(f"{s:6.2f} {problem.fidelity_of(plain, [PLE(s)]):12.8f} {problem.fidelity_of(composite, [PLE(s)]):12.8f}")

# log-log slope of 1 - fidelity against the relative error
eps = np.geomspace(0.01, 0.1, 10)
for name, seq in [("plain", plain), ("BB1", composite)]:
    infid = [1 - problem.fidelity_of(seq, [PLE(1 + e)]) for e in eps]
    print(f"{name:>5} slope {np.polyfit(np.log(eps), np.log(infid), 1)[0]:.2f}")
