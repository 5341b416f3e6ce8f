"""Implementation non-idealities: finite amplitude/phase resolution and
hardware delays around a sequence."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .objective import GateProblem, TargetGate, fidelity
from .propagation import ControlSequence, expm_hermitian, final_propagator
from .spins import TWO_PI, SpinSystem, build_hamiltonians


@dataclass(frozen=True)
class QuantizationSpec:
    """Amplitude grid of ``amplitude_levels`` points on ``[0, max]`` and a
    phase grid of ``phase_resolution_deg``."""

    amplitude_levels: int
    phase_resolution_deg: float
    max_amplitude_hz: float

    def __post_init__(self):
        if self.amplitude_levels < 2:
            raise ValueError("need at least two amplitude levels")
        if not self.phase_resolution_deg > 0:
            raise ValueError("phase resolution must be positive")
        if not self.max_amplitude_hz > 0:
            raise ValueError("max amplitude must be positive")

    @classmethod
    def bits(cls, n_bits: int, max_amplitude_hz: float):
        """``n_bits`` of resolution for both amplitude and phase."""
        return cls(2**n_bits, 360.0 / 2**n_bits, max_amplitude_hz)

    @property
    def amplitude_step_hz(self) -> float:
        return self.max_amplitude_hz / (self.amplitude_levels - 1)


@dataclass(frozen=True)
class DelayPad:
    pre: float = 0.0
    post: float = 0.0

    def __post_init__(self):
        if self.pre < 0 or self.post < 0:
            raise ValueError("hardware delays must be non-negative")


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def to_amp_phase(ux: np.ndarray, uy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Magnitude and phase in degrees on ``[0, 360)``, counterclockwise from +x."""
    amp = np.hypot(ux, uy)
    phase = np.mod(np.degrees(np.arctan2(uy, ux)), 360.0)
    phase = np.where(phase >= 360.0, 0.0, phase)
    return amp, phase


def quantize(sequence: ControlSequence, spec: QuantizationSpec, tol: float = 1e-9) -> ControlSequence:
    """Round every pulse step to the nearest representable amplitude and phase.

    Values are snapped via integer level indices, so applying this twice
    gives exactly the same sequence.
    """
    amps = sequence.amplitudes.copy()
    max_rad = TWO_PI * spec.max_amplitude_hz
    step_rad = max_rad / (spec.amplitude_levels - 1)
    n_phase = int(np.ceil(360.0 / spec.phase_resolution_deg - 1e-9))
    pulses = ~sequence.is_delay
    for c in range(0, sequence.n_controls, 2):
        ux, uy = amps[pulses, c], amps[pulses, c + 1]
        amp, phase = to_amp_phase(ux, uy)
        if np.any(amp > max_rad * (1 + tol)):
            worst = float(np.max(amp)) / TWO_PI
            raise ValueError(
                f"channel {c // 2} reaches {worst:.6g} Hz, above the {spec.max_amplitude_hz:.6g} Hz limit"
            )
        a_idx = np.minimum(_round_half_away(amp / step_rad), spec.amplitude_levels - 1)
        p_idx = _round_half_away(phase / spec.phase_resolution_deg)
        p_idx = np.where(p_idx >= n_phase, 0, p_idx)
        p_idx = np.where(a_idx == 0, 0, p_idx)
        a = a_idx * step_rad
        p = np.radians(p_idx * spec.phase_resolution_deg)
        amps[pulses, c] = a * np.cos(p)
        amps[pulses, c + 1] = a * np.sin(p)
    out = ControlSequence(sequence.durations.copy(), amps, sequence.is_delay.copy(), dict(sequence.metadata))
    out.metadata["quantized"] = f"{spec.amplitude_levels} levels / {spec.phase_resolution_deg:g} deg"
    return out


@dataclass
class RoundingImpact:
    exact: float
    quantized: float

    @property
    def delta(self) -> float:
        return self.exact - self.quantized


def rounding_impact(problem: GateProblem, sequence: ControlSequence, spec: QuantizationSpec) -> RoundingImpact:
    """Composite objective before and after quantization."""
    exact = problem.evaluate(sequence, with_gradient=False).total
    rounded = problem.evaluate(quantize(sequence, spec), with_gradient=False).total
    return RoundingImpact(exact, rounded)


def pad_propagators(system_or_h0, pad: DelayPad) -> tuple[np.ndarray, np.ndarray]:
    h0 = system_or_h0
    if isinstance(system_or_h0, SpinSystem):
        h0 = build_hamiltonians(system_or_h0).h0
    return expm_hermitian(h0, pad.pre), expm_hermitian(h0, pad.post)


def adjust_target(target: TargetGate, system, pad: DelayPad) -> TargetGate:
    """Target for the sequence such that ``D_post U D_pre`` is the desired gate."""
    d_pre, d_post = pad_propagators(system, pad)
    u = np.conj(d_post.T) @ target.unitary @ np.conj(d_pre.T)
    label = f"{target.label} adjusted for {pad.pre:g}/{pad.post:g} s pads" if target.label else ""
    return TargetGate(u, label)


def padded_fidelity(system: SpinSystem, sequence: ControlSequence, target: TargetGate, pad: DelayPad, errors=()) -> float:
    """Fidelity of the sequence including the surrounding hardware delays."""
    from .spins import apply_error_models

    hams = apply_error_models(build_hamiltonians(system), errors)
    d_pre, d_post = pad_propagators(hams.h0, pad)
    return fidelity(target, d_post @ final_propagator(hams, sequence) @ d_pre)
