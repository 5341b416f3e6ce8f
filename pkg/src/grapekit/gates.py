"""Named target gates and the BB1 composite-pulse reference."""

from __future__ import annotations

import numpy as np

from .objective import TargetGate
from .propagation import ControlSequence, expm_hermitian
from .spins import TWO_PI, spin_operator


def identity(n_spins: int) -> TargetGate:
    return TargetGate(np.eye(2**n_spins), "identity")


def rotation(angle: float, axis="x", spin: int = 0, n_spins: int = 1) -> TargetGate:
    """Rotation by ``angle`` (rad) of one spin about ``x``, ``y``, ``z`` or
    an xy-plane axis given as a phase in radians."""
    if isinstance(axis, str):
        gen = spin_operator(axis, spin, n_spins)
        name = axis
    else:
        gen = np.cos(axis) * spin_operator("x", spin, n_spins) + np.sin(axis) * spin_operator("y", spin, n_spins)
        name = f"phase {np.degrees(axis):g} deg"
    return TargetGate(expm_hermitian(gen, angle), f"{np.degrees(angle):g} deg about {name} on spin {spin}")


def controlled_phase(theta: float, a: int = 0, b: int = 1, n_spins: int = 2) -> TargetGate:
    dim = 2**n_spins
    diag = np.ones(dim, dtype=complex)
    for idx in range(dim):
        bits = format(idx, f"0{n_spins}b")
        if bits[a] == "1" and bits[b] == "1":
            diag[idx] = np.exp(1j * theta)
    return TargetGate(np.diag(diag), f"controlled-phase({theta:g})")


def cnot(control: int = 0, target: int = 1, n_spins: int = 2) -> TargetGate:
    dim = 2**n_spins
    u = np.zeros((dim, dim), dtype=complex)
    for idx in range(dim):
        bits = list(format(idx, f"0{n_spins}b"))
        if bits[control] == "1":
            bits[target] = "1" if bits[target] == "0" else "0"
        u[int("".join(bits), 2), idx] = 1.0
    return TargetGate(u, f"cnot({control}->{target})")


def named_gate(name: str, n_spins: int, **params) -> TargetGate:
    name = name.lower()
    if name == "identity":
        return identity(n_spins)
    if name == "rotation":
        axis = params.get("axis", "x")
        if "phase_deg" in params:
            axis = np.radians(params["phase_deg"])
        return rotation(np.radians(params.get("angle_deg", 90.0)), axis, int(params.get("spin", 0)), n_spins)
    if name in ("cphase", "controlled_phase"):
        return controlled_phase(np.radians(params.get("theta_deg", 180.0)), int(params.get("a", 0)),
                                int(params.get("b", 1)), n_spins)
    if name == "cnot":
        return cnot(int(params.get("control", 0)), int(params.get("target", 1)), n_spins)
    raise ValueError(f"unknown gate {name!r}; choose identity, rotation, cphase or cnot")


def bb1_phase(theta: float) -> float:
    """Phase of the BB1 correction pulses, ``arccos(-theta / 4 pi)``."""
    return float(np.arccos(-theta / (4.0 * np.pi)))


def hard_pulse(theta: float, phase: float = 0.0, amplitude_hz: float = 25_000.0,
               n_channels: int = 1, channel: int = 0) -> ControlSequence:
    return _hard_sequence([(theta, phase)], amplitude_hz, n_channels, channel, "hard pulse")


def bb1(theta: float, phase: float = 0.0, amplitude_hz: float = 25_000.0,
        n_channels: int = 1, channel: int = 0) -> ControlSequence:
    """BB1 composite pulse as constant-amplitude steps in time order.

    The correction block pi(phi) 2pi(3 phi) pi(phi) runs first, followed
    by the nominal ``theta`` rotation; all phases are relative to ``phase``.
    """
    if not 0 < theta <= TWO_PI:
        raise ValueError("BB1 rotation angle must lie in (0, 2 pi]")
    phi = bb1_phase(theta)
    parts = [(np.pi, phase + phi), (TWO_PI, phase + 3 * phi), (np.pi, phase + phi), (theta, phase)]
    return _hard_sequence(parts, amplitude_hz, n_channels, channel, "BB1")


def _hard_sequence(parts, amplitude_hz, n_channels, channel, label) -> ControlSequence:
    omega = TWO_PI * amplitude_hz
    amps = np.zeros((len(parts), 2 * n_channels))
    durations = np.empty(len(parts))
    for i, (angle, ph) in enumerate(parts):
        durations[i] = angle / omega
        amps[i, 2 * channel] = omega * np.cos(ph)
        amps[i, 2 * channel + 1] = omega * np.sin(ph)
    return ControlSequence(durations, amps, None, {"label": label})
