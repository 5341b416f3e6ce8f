"""Step propagators, their derivatives and the forward/backward caches.

A control sequence is a list of piecewise-constant steps.  Pulse steps
hold one amplitude (rad/s) per control Hamiltonian for a fixed duration;
delay steps hold no amplitudes and their duration is itself a parameter.
Every step propagator is ``exp(-i t G)`` where the generator ``G`` is
``h0 + sum_k u_k H_k`` for pulses and ``h0`` for delays, so all steps
share one batched eigendecomposition.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .spins import HamiltonianSet

HERMITIAN_TOL = 1e-12


class NotHermitianError(ValueError):
    pass


class StaleCacheError(ValueError):
    pass


@dataclass(frozen=True)
class Pulse:
    duration: float
    amplitudes: tuple[float, ...]


@dataclass(frozen=True)
class Delay:
    duration: float


@dataclass
class ControlSequence:
    """Piecewise-constant controls stored column-wise.

    ``amplitudes`` has shape ``(n_steps, n_controls)`` in rad/s; rows of
    delay steps are zero and ignored.
    """

    durations: np.ndarray
    amplitudes: np.ndarray
    is_delay: np.ndarray = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.durations = np.array(self.durations, dtype=float).reshape(-1)
        n = self.durations.size
        amps = np.array(self.amplitudes, dtype=float)
        if amps.ndim == 1:
            amps = amps.reshape(n, -1) if n else amps.reshape(0, 0)
        self.amplitudes = amps
        if self.is_delay is None:
            self.is_delay = np.zeros(n, dtype=bool)
        self.is_delay = np.array(self.is_delay, dtype=bool).reshape(-1)
        if self.amplitudes.shape[0] != n or self.is_delay.size != n:
            raise ValueError("durations, amplitudes and step kinds disagree on the step count")
        if np.any(self.durations < 0):
            raise ValueError("step durations must be non-negative")
        self.amplitudes[self.is_delay] = 0.0

    @classmethod
    def from_steps(cls, steps: Iterable[Pulse | Delay], n_controls: int | None = None, **metadata):
        steps = list(steps)
        if n_controls is None:
            pulses = [s for s in steps if isinstance(s, Pulse)]
            n_controls = len(pulses[0].amplitudes) if pulses else 0
        durations, amps, kinds = [], [], []
        for s in steps:
            durations.append(s.duration)
            if isinstance(s, Pulse):
                if len(s.amplitudes) != n_controls:
                    raise ValueError(
                        f"pulse step has {len(s.amplitudes)} amplitudes, expected {n_controls}"
                    )
                amps.append(s.amplitudes)
                kinds.append(False)
            else:
                amps.append([0.0] * n_controls)
                kinds.append(True)
        return cls(durations, np.array(amps, dtype=float).reshape(len(steps), n_controls), kinds, dict(metadata))

    @classmethod
    def uniform(cls, amplitudes, dt: float, **metadata):
        amplitudes = np.atleast_2d(np.asarray(amplitudes, dtype=float))
        return cls(np.full(amplitudes.shape[0], float(dt)), amplitudes, None, dict(metadata))

    @property
    def n_steps(self) -> int:
        return self.durations.size

    @property
    def n_controls(self) -> int:
        return self.amplitudes.shape[1]

    @property
    def total_duration(self) -> float:
        return float(self.durations.sum())

    @property
    def steps(self) -> list[Pulse | Delay]:
        return [
            Delay(float(t)) if d else Pulse(float(t), tuple(float(u) for u in row))
            for t, row, d in zip(self.durations, self.amplitudes, self.is_delay)
        ]

    @property
    def n_parameters(self) -> int:
        return int(np.count_nonzero(~self.is_delay)) * self.n_controls + int(np.count_nonzero(self.is_delay))

    def parameters(self) -> np.ndarray:
        """Pulse amplitudes and delay durations concatenated in step order."""
        return np.concatenate(
            [[t] if d else row for t, row, d in zip(self.durations, self.amplitudes, self.is_delay)]
        ) if self.n_steps else np.zeros(0)

    def with_parameters(self, x: np.ndarray) -> "ControlSequence":
        x = np.asarray(x, dtype=float)
        if x.size != self.n_parameters:
            raise ValueError(f"expected {self.n_parameters} parameters, got {x.size}")
        durations = self.durations.copy()
        amps = self.amplitudes.copy()
        pos = 0
        k = self.n_controls
        for j, d in enumerate(self.is_delay):
            if d:
                durations[j] = max(x[pos], 0.0)
                pos += 1
            else:
                amps[j] = x[pos : pos + k]
                pos += k
        return ControlSequence(durations, amps, self.is_delay.copy(), dict(self.metadata))

    def parameter_index(self) -> tuple[np.ndarray, np.ndarray]:
        """Indices into the parameter vector of the pulse amplitudes and delays.

        Returns ``(amp_index, delay_index)``: ``amp_index`` has shape
        ``(n_pulse_steps, n_controls)``, ``delay_index`` one entry per delay.
        """
        k = self.n_controls
        width = np.where(self.is_delay, 1, k)
        start = np.concatenate([[0], np.cumsum(width)[:-1]]).astype(int)
        amp_index = start[~self.is_delay, None] + np.arange(k)[None, :]
        return amp_index, start[self.is_delay]

    def fingerprint(self) -> str:
        h = hashlib.sha1()
        for arr in (self.durations, self.amplitudes, self.is_delay):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()

    def scaled(self, c: float) -> "ControlSequence":
        return ControlSequence(self.durations.copy(), self.amplitudes * c, self.is_delay.copy(), dict(self.metadata))

    def __eq__(self, other):
        if not isinstance(other, ControlSequence):
            return NotImplemented
        return (
            np.array_equal(self.durations, other.durations)
            and np.array_equal(self.amplitudes, other.amplitudes)
            and np.array_equal(self.is_delay, other.is_delay)
        )


def check_hermitian(h: np.ndarray, tol: float = HERMITIAN_TOL) -> None:
    dev = float(np.max(np.abs(h - np.conj(np.swapaxes(h, -1, -2))))) if h.size else 0.0
    scale = max(1.0, float(np.max(np.abs(h)))) if h.size else 1.0
    if dev > tol * scale:
        raise NotHermitianError(f"generator is not Hermitian: max |H - H^dagger| = {dev:.3e}")


def _eig(h: np.ndarray):
    w, v = np.linalg.eigh(h)
    return w, v


def _exp_from_eig(w: np.ndarray, v: np.ndarray, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)[..., None]
    phases = np.exp(-1j * t * w)
    return (v * phases[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def expm_hermitian(h: np.ndarray, t) -> np.ndarray:
    """``exp(-i t H)`` for Hermitian ``H`` (or a stack of them).

    ``t`` broadcasts against the leading dimensions of ``h``.
    """
    h = np.asarray(h, dtype=complex)
    check_hermitian(h)
    w, v = _eig(h)
    return _exp_from_eig(w, v, t)


def step_generators(hams: HamiltonianSet, sequence: ControlSequence) -> np.ndarray:
    if sequence.n_controls != hams.n_controls:
        raise ValueError(
            f"sequence carries {sequence.n_controls} amplitudes per step, "
            f"Hamiltonian set has {hams.n_controls} controls"
        )
    gens = np.einsum("jk,kab->jab", sequence.amplitudes, hams.controls)
    return gens + hams.h0


def pulse_propagator(hams: HamiltonianSet, step: Pulse) -> np.ndarray:
    u = np.asarray(step.amplitudes, dtype=float)
    if u.size != hams.n_controls:
        raise ValueError(f"pulse has {u.size} amplitudes, expected {hams.n_controls}")
    return expm_hermitian(hams.h0 + np.tensordot(u, hams.controls, axes=1), step.duration)


def delay_propagator(hams: HamiltonianSet, t: float) -> np.ndarray:
    if t < 0:
        raise ValueError(f"delay duration must be non-negative, got {t}")
    return expm_hermitian(hams.h0, t)


def _divided_differences(w: np.ndarray, t) -> np.ndarray:
    """Divided differences of ``f(x) = exp(-i t x)`` on the eigenvalues.

    ``F[a, b] = (f(w_a) - f(w_b)) / (w_a - w_b)`` with the diagonal
    limit ``f'(w_a)``, written as ``-i t exp(-i t m) sinc(t d / 2)`` to stay
    accurate for nearly degenerate eigenvalues.
    """
    t = np.asarray(t, dtype=float)[..., None, None]
    mean = 0.5 * (w[..., :, None] + w[..., None, :])
    half = 0.5 * (w[..., :, None] - w[..., None, :])
    return -1j * t * np.exp(-1j * t * mean) * np.sinc(t * half / np.pi)


def propagator_derivative(hams: HamiltonianSet, step: Pulse | Delay, k: int = 0, mode: str = "first_order") -> np.ndarray:
    """Derivative of one step propagator with respect to one parameter.

    For a pulse the parameter is amplitude ``k``; ``first_order`` gives
    ``-i dt H_k U`` and ``exact`` the full Frechet derivative of the
    exponential.  For a delay the parameter is the duration and the result
    ``-i h0 U`` is exact in both modes.
    """
    if mode not in ("first_order", "exact"):
        raise ValueError(f"unknown derivative mode {mode!r}")
    if isinstance(step, Delay):
        return -1j * hams.h0 @ delay_propagator(hams, step.duration)
    if not 0 <= k < hams.n_controls:
        raise IndexError(f"control index {k} out of range 0..{hams.n_controls - 1}")
    gen = hams.h0 + np.tensordot(np.asarray(step.amplitudes, float), hams.controls, axes=1)
    check_hermitian(gen)
    w, v = _eig(gen)
    u = _exp_from_eig(w, v, step.duration)
    if mode == "first_order":
        return -1j * step.duration * hams.controls[k] @ u
    vh = np.conj(v.T)
    a = vh @ hams.controls[k] @ v
    return v @ (_divided_differences(w, step.duration) * a) @ vh


@dataclass
class PropagatorCache:
    """Step propagators with forward and backward cumulative products.

    ``forward[j]`` is ``U_j ... U_0`` and ``backward[j]`` is
    ``U_{j+1}^dagger ... U_{n-1}^dagger U_t`` (zero-based), so
    ``tr(backward[j]^dagger forward[j]) = tr(U_t^dagger U_f)`` for every j.
    """

    step_props: np.ndarray
    forward: np.ndarray
    backward: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray
    target: np.ndarray
    fingerprint: str = ""

    @property
    def final(self) -> np.ndarray:
        return self.forward[-1]

    @property
    def n_steps(self) -> int:
        return self.step_props.shape[0]

    def previous(self, j: int) -> np.ndarray:
        """``X_{j-1}``, the identity before the first step."""
        return self.forward[j - 1] if j > 0 else np.eye(self.forward.shape[-1], dtype=complex)

    def check(self, sequence: ControlSequence) -> None:
        if self.fingerprint and self.fingerprint != sequence.fingerprint():
            raise StaleCacheError("propagator cache was built for a different sequence")


def build_cache(hams: HamiltonianSet, sequence: ControlSequence, target) -> PropagatorCache:
    """Evaluate every step propagator and the cumulative products.

    ``target`` may be a matrix or anything with a ``unitary`` attribute.
    """
    if sequence.n_steps == 0:
        raise ValueError("cannot propagate an empty sequence")
    u_t = np.asarray(getattr(target, "unitary", target), dtype=complex)
    if u_t.shape != hams.h0.shape:
        raise ValueError(f"target has shape {u_t.shape}, system dimension is {hams.dim}")
    gens = step_generators(hams, sequence)
    check_hermitian(gens)
    w, v = _eig(gens)
    props = _exp_from_eig(w, v, sequence.durations)
    n = sequence.n_steps
    forward = np.empty_like(props)
    backward = np.empty_like(props)
    acc = props[0]
    forward[0] = acc
    for j in range(1, n):
        acc = props[j] @ acc
        forward[j] = acc
    acc = u_t
    backward[n - 1] = acc
    for j in range(n - 1, 0, -1):
        acc = np.conj(props[j].T) @ acc
        backward[j - 1] = acc
    return PropagatorCache(props, forward, backward, w, v, u_t, sequence.fingerprint())


def final_propagator(hams: HamiltonianSet, sequence: ControlSequence) -> np.ndarray:
    gens = step_generators(hams, sequence)
    check_hermitian(gens)
    props = expm_hermitian(gens, sequence.durations)
    acc = np.eye(hams.dim, dtype=complex)
    for p in props:
        acc = p @ acc
    return acc


def overlap_derivatives(cache: PropagatorCache, hams: HamiltonianSet, sequence: ControlSequence, mode: str = "first_order") -> np.ndarray:
    """Derivatives of ``tr(U_t^dagger U_f)`` with respect to every parameter.

    One pass over the cached products; the result is aligned with
    ``sequence.parameters()``.
    """
    if mode not in ("first_order", "exact"):
        raise ValueError(f"unknown derivative mode {mode!r}")
    cache.check(sequence)
    pulses = ~sequence.is_delay
    delays = sequence.is_delay
    amp_index, delay_index = sequence.parameter_index()
    out = np.zeros(sequence.n_parameters, dtype=complex)
    # tr(P_j^dag dU_j X_{j-1}) = tr(dU_j X_{j-1} P_j^dag)
    if np.any(delays):
        m = cache.forward[delays] @ np.conj(np.swapaxes(cache.backward[delays], -1, -2))
        out[delay_index] = -1j * np.einsum("ab,jba->j", hams.h0, m)
    if not np.any(pulses):
        return out
    if mode == "first_order":
        m = cache.forward[pulses] @ np.conj(np.swapaxes(cache.backward[pulses], -1, -2))
        dt = sequence.durations[pulses]
        out[amp_index] = -1j * dt[:, None] * np.einsum("kab,jba->jk", hams.controls, m)
        return out
    prev = np.concatenate([np.eye(hams.dim, dtype=complex)[None], cache.forward[:-1]])[pulses]
    v = cache.eigvecs[pulses]
    vh = np.conj(np.swapaxes(v, -1, -2))
    # W_j = V^dag X_{j-1} P_j^dag V, A_jk = V^dag H_k V
    w_mat = vh @ prev @ np.conj(np.swapaxes(cache.backward[pulses], -1, -2)) @ v
    a = vh[:, None] @ hams.controls[None] @ v[:, None]
    f = _divided_differences(cache.eigvals[pulses], sequence.durations[pulses])
    out[amp_index] = np.einsum("jkab,jba->jk", a * f[:, None], w_mat)
    return out
