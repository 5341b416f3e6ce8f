"""Spin-1/2 Hamiltonians for small coupled systems.

Frequencies are given in Hz at the interface and converted to rad/s here,
so every matrix returned by this module generates evolution as
``exp(-i t H)`` with ``t`` in seconds.  Spin 0 is the leftmost factor of
every tensor product.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

TWO_PI = 2.0 * np.pi
MAX_SPINS = 6

SX = 0.5 * np.array([[0, 1], [1, 0]], dtype=complex)
SY = 0.5 * np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = 0.5 * np.array([[1, 0], [0, -1]], dtype=complex)
_SINGLE = {"x": SX, "y": SY, "z": SZ}


class SpinSystemError(ValueError):
    """Raised for an inconsistent spin system description."""


@dataclass(frozen=True)
class Coupling:
    a: int
    b: int
    j_hz: float
    mode: str = "weak"


@dataclass(frozen=True)
class Channel:
    """A control channel driving the x and y field on a set of spins."""

    spins: tuple[int, ...]
    max_amplitude_hz: float | None = None


@dataclass(frozen=True)
class SpinSystem:
    """Offsets, scalar couplings, contaminant spins and control channels.

    Offsets are relative to the transmitter frequency (rotating frame).
    Contaminants are isolated spins on other molecules: they see the control
    field of every channel but couple to nothing.
    """

    offsets_hz: tuple[float, ...]
    couplings: tuple[Coupling, ...] = ()
    contaminants_hz: tuple[float, ...] = ()
    channels: tuple[Channel, ...] = ()
    max_spins: int = MAX_SPINS

    def __post_init__(self):
        object.__setattr__(self, "offsets_hz", tuple(float(o) for o in self.offsets_hz))
        object.__setattr__(self, "contaminants_hz", tuple(float(o) for o in self.contaminants_hz))
        object.__setattr__(self, "couplings", tuple(self.couplings))
        channels = tuple(self.channels)
        if not channels:
            channels = (Channel(tuple(range(len(self.offsets_hz)))),)
        channels = tuple(
            Channel(tuple(int(s) for s in ch.spins), ch.max_amplitude_hz) for ch in channels
        )
        object.__setattr__(self, "channels", channels)
        self.validate()

    @property
    def n_spins(self) -> int:
        return len(self.offsets_hz)

    @property
    def dim(self) -> int:
        return 2**self.n_spins

    @property
    def n_controls(self) -> int:
        return 2 * len(self.channels)

    def validate(self) -> None:
        n = self.n_spins
        if n < 1:
            raise SpinSystemError("a spin system needs at least one spin")
        if n > self.max_spins:
            raise SpinSystemError(
                f"{n} spins exceeds the configured maximum of {self.max_spins} "
                f"(dimension {2**n})"
            )
        seen = set()
        for c in self.couplings:
            if c.mode not in ("weak", "strong"):
                raise SpinSystemError(f"invalid coupling mode {c.mode!r}; use 'weak' or 'strong'")
            if not (0 <= c.a < n and 0 <= c.b < n) or c.a == c.b:
                raise SpinSystemError(f"coupling ({c.a}, {c.b}) must name two distinct spins in 0..{n - 1}")
            pair = frozenset((c.a, c.b))
            if pair in seen:
                raise SpinSystemError(f"duplicate coupling between spins {c.a} and {c.b}")
            seen.add(pair)
        for i, ch in enumerate(self.channels):
            if not ch.spins:
                raise SpinSystemError(f"channel {i} addresses no spins")
            for s in ch.spins:
                if not 0 <= s < n:
                    raise SpinSystemError(f"channel {i} addresses unknown spin {s}")


@dataclass(frozen=True)
class HamiltonianSet:
    """Drift Hamiltonian and control Hamiltonians, in rad/s.

    ``controls`` is ordered ``[x_0, y_0, x_1, y_1, ...]`` over channels.
    ``zsum`` is the total z magnetisation operator used for off-resonance
    shifts.
    """

    h0: np.ndarray
    controls: np.ndarray
    zsum: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        h0 = np.array(self.h0, dtype=complex)
        controls = np.array(self.controls, dtype=complex)
        if controls.ndim == 2:
            controls = controls[None]
        zsum = np.zeros_like(h0) if self.zsum is None else np.array(self.zsum, dtype=complex)
        for name, arr in (("h0", h0), ("controls", controls), ("zsum", zsum)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dim(self) -> int:
        return self.h0.shape[0]

    @property
    def n_controls(self) -> int:
        return self.controls.shape[0]


def spin_operator(axis: str, spin: int, n_spins: int) -> np.ndarray:
    """One-half Pauli operator ``I_axis`` on ``spin`` embedded in ``n_spins``."""
    out = np.ones((1, 1), dtype=complex)
    for i in range(n_spins):
        out = np.kron(out, _SINGLE[axis] if i == spin else np.eye(2))
    return out


def _channel_controls(channels: Sequence[Channel], n_spins: int, spin_map=None) -> np.ndarray:
    dim = 2**n_spins
    mats = []
    for ch in channels:
        targets = range(n_spins) if spin_map is None else spin_map(ch)
        hx = np.zeros((dim, dim), dtype=complex)
        hy = np.zeros((dim, dim), dtype=complex)
        for s in targets:
            hx += spin_operator("x", s, n_spins)
            hy += spin_operator("y", s, n_spins)
        mats.extend([hx, hy])
    return np.array(mats)


def build_hamiltonians(system: SpinSystem) -> HamiltonianSet:
    """Drift and control Hamiltonians of the computational spins."""
    system.validate()
    n = system.n_spins
    iz = [spin_operator("z", i, n) for i in range(n)]
    h0 = sum(TWO_PI * off * iz[i] for i, off in enumerate(system.offsets_hz))
    h0 = np.array(h0, dtype=complex)
    for c in system.couplings:
        term = iz[c.a] @ iz[c.b]
        if c.mode == "strong":
            term = term + spin_operator("x", c.a, n) @ spin_operator("x", c.b, n)
            term = term + spin_operator("y", c.a, n) @ spin_operator("y", c.b, n)
        h0 = h0 + TWO_PI * c.j_hz * term
    controls = _channel_controls(system.channels, n, spin_map=lambda ch: ch.spins)
    return HamiltonianSet(h0=h0, controls=controls, zsum=sum(iz))


def build_contaminant_hamiltonians(system: SpinSystem) -> list[HamiltonianSet]:
    """One single-spin Hamiltonian set per contaminant.

    Every channel drives the contaminant, since it has the same nuclear
    species as the computational spins.
    """
    out = []
    for off in system.contaminants_hz:
        out.append(
            HamiltonianSet(
                h0=TWO_PI * off * SZ,
                controls=_channel_controls(system.channels, 1),
                zsum=SZ,
            )
        )
    return out


@dataclass(frozen=True)
class PLE:
    """Pulse length error: every control field scaled by ``scale``."""

    scale: float

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"PLE scale must be positive, got {self.scale}")


@dataclass(frozen=True)
class ORE:
    """Off-resonance error: all spins shifted by ``offset_hz``."""

    offset_hz: float


def apply_error_model(hams: HamiltonianSet, model: PLE | ORE) -> HamiltonianSet:
    if isinstance(model, PLE):
        if model.scale == 1.0:
            return hams
        return replace(hams, controls=hams.controls * model.scale)
    if isinstance(model, ORE):
        if model.offset_hz == 0.0:
            return hams
        return replace(hams, h0=hams.h0 + TWO_PI * model.offset_hz * hams.zsum)
    raise TypeError(f"unknown error model {model!r}")


def apply_error_models(hams: HamiltonianSet, models: Sequence[PLE | ORE]) -> HamiltonianSet:
    for m in models:
        hams = apply_error_model(hams, m)
    return hams
