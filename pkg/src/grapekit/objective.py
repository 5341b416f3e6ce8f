"""Gate fidelity, its gradient, and the composite robust objective."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .propagation import ControlSequence, PropagatorCache, build_cache, overlap_derivatives
from .spins import (
    ORE,
    PLE,
    HamiltonianSet,
    SpinSystem,
    apply_error_models,
    build_contaminant_hamiltonians,
    build_hamiltonians,
)

logger = logging.getLogger(__name__)

THREADS_ENV = "GRAPEKIT_THREADS"
DEFAULT_PLE_GRID = (0.7, 0.85, 1.0, 1.12, 1.3)
UNITARY_TOL = 1e-10


@dataclass(frozen=True)
class TargetGate:
    unitary: np.ndarray
    label: str = ""

    def __post_init__(self):
        u = np.array(self.unitary, dtype=complex)
        if u.ndim != 2 or u.shape[0] != u.shape[1]:
            raise ValueError(f"target must be a square matrix, got shape {u.shape}")
        dev = np.max(np.abs(np.conj(u.T) @ u - np.eye(u.shape[0])))
        if dev > UNITARY_TOL:
            raise ValueError(f"target is not unitary (max |U^dagger U - 1| = {dev:.2e})")
        u.setflags(write=False)
        object.__setattr__(self, "unitary", u)

    @property
    def dim(self) -> int:
        return self.unitary.shape[0]


@dataclass(frozen=True)
class EnsembleMember:
    errors: tuple = ()
    weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "errors", tuple(self.errors))
        if self.weight < 0:
            raise ValueError("ensemble weights must be non-negative")


@dataclass(frozen=True)
class EnsembleSpec:
    """Weighted set of error-model instances plus the contaminant share.

    Weights are normalised on construction.
    """

    members: tuple[EnsembleMember, ...] = (EnsembleMember(),)
    contaminant_weight: float = 0.2

    def __post_init__(self):
        members = tuple(self.members) or (EnsembleMember(),)
        total = sum(m.weight for m in members)
        if total <= 0:
            raise ValueError("ensemble weights sum to zero")
        members = tuple(EnsembleMember(m.errors, m.weight / total) for m in members)
        object.__setattr__(self, "members", members)
        if not 0.0 <= self.contaminant_weight <= 1.0:
            raise ValueError("contaminant_weight must lie in [0, 1]")
        if _is_arithmetic_grid(members):
            logger.warning(
                "ensemble error values are evenly spaced; periodic grids can hide "
                "poor performance between the sampled values"
            )

    @property
    def weights(self) -> np.ndarray:
        return np.array([m.weight for m in self.members])

    @classmethod
    def ple_grid(cls, scales: Sequence[float] = DEFAULT_PLE_GRID, contaminant_weight: float = 0.2):
        return cls(tuple(EnsembleMember((PLE(s),), 1.0) for s in scales), contaminant_weight)


def _is_arithmetic_grid(members) -> bool:
    if len(members) < 3:
        return False
    for kind, attr in ((PLE, "scale"), (ORE, "offset_hz")):
        vals = []
        for m in members:
            hits = [getattr(e, attr) for e in m.errors if isinstance(e, kind)]
            if len(hits) != 1:
                break
            vals.append(hits[0])
        else:
            d = np.diff(np.sort(vals))
            if np.all(d > 0) and np.allclose(d, d[0], rtol=1e-9, atol=0):
                return True
    return False


@dataclass(frozen=True)
class PenaltyConfig:
    """Quadratic hinge on per-channel field magnitude above ``u_max_hz``."""

    u_max_hz: float
    lam: float = 10.0

    def __post_init__(self):
        if not self.u_max_hz > 0:
            raise ValueError("u_max_hz must be positive")
        if self.lam < 0:
            raise ValueError("penalty lambda must be non-negative")


@dataclass
class ObjectiveReport:
    total: float
    member_fidelities: np.ndarray
    contaminant_fidelities: np.ndarray
    penalty: float
    gradient: np.ndarray | None = None

    @property
    def gate_fidelity(self) -> float:
        """Unweighted mean over members of the gate fidelity."""
        return float(np.mean(self.member_fidelities))


def _check_unit_interval(phi: float) -> float:
    if not -1e-12 <= phi <= 1 + 1e-12:
        raise FloatingPointError(f"fidelity {phi} outside [0, 1]; propagator lost unitarity")
    return min(max(phi, 0.0), 1.0)


def fidelity(target, final: np.ndarray) -> float:
    """Phase-insensitive overlap ``|tr(U_t^dagger U_f)|^2 / N^2``."""
    u_t = np.asarray(getattr(target, "unitary", target))
    final = np.asarray(final)
    if u_t.shape != final.shape:
        raise ValueError(f"dimension mismatch: target {u_t.shape}, propagator {final.shape}")
    n = u_t.shape[0]
    g = np.vdot(u_t, final)  # tr(U_t^dagger U_f)
    return _check_unit_interval(float(abs(g) ** 2 / n**2))


def gradient(cache: PropagatorCache, hams: HamiltonianSet, sequence: ControlSequence, mode: str = "first_order") -> np.ndarray:
    """Fidelity gradient aligned with ``sequence.parameters()``."""
    n = cache.target.shape[0]
    g = np.vdot(cache.target, cache.final)
    dg = overlap_derivatives(cache, hams, sequence, mode)
    return 2.0 * np.real(np.conj(g) * dg) / n**2


def power_penalty(sequence: ControlSequence, u_max: float, lam: float) -> tuple[float, np.ndarray]:
    """Hinge penalty ``lam * sum max(0, r - u_max)^2`` and its gradient.

    ``r`` is the field magnitude of each (x, y) channel pair in each pulse
    step, in the units of the sequence amplitudes.
    """
    grad = np.zeros(sequence.n_parameters)
    pulses = sequence.amplitudes[~sequence.is_delay]
    if pulses.size == 0 or lam == 0:
        return 0.0, grad
    ux, uy = pulses[:, 0::2], pulses[:, 1::2]
    r = np.hypot(ux, uy)
    excess = np.maximum(r - u_max, 0.0)
    value = float(lam * np.sum(excess**2))
    with np.errstate(invalid="ignore", divide="ignore"):
        coeff = np.where(excess > 0, 2.0 * lam * excess / r, 0.0)
    d_amp = np.empty_like(pulses)
    d_amp[:, 0::2] = coeff * ux
    d_amp[:, 1::2] = coeff * uy
    amp_index, _ = sequence.parameter_index()
    grad[amp_index] = d_amp
    return value, grad


def _thread_count() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


class GateProblem:
    """A gate synthesis problem: system, target, ensemble and penalty.

    Hamiltonians for every ensemble member (and contaminant) are built once
    at construction.  ``evaluate`` returns an :class:`ObjectiveReport`.
    """

    def __init__(self, system: SpinSystem, target: TargetGate, ensemble: EnsembleSpec | None = None,
                 penalty: PenaltyConfig | None = None, mode: str = "first_order"):
        self.system = system
        self.target = target if isinstance(target, TargetGate) else TargetGate(target)
        self.ensemble = ensemble or EnsembleSpec()
        self.penalty = penalty
        self.mode = mode
        base = build_hamiltonians(system)
        if base.dim != self.target.dim:
            raise ValueError(f"target dimension {self.target.dim} does not match system dimension {base.dim}")
        self.base_hams = base
        self.member_hams = [apply_error_models(base, m.errors) for m in self.ensemble.members]
        contaminants = build_contaminant_hamiltonians(system)
        self.contaminant_hams = [
            [apply_error_models(c, m.errors) for c in contaminants] for m in self.ensemble.members
        ]
        self._identity2 = np.eye(2, dtype=complex)

    @property
    def has_contaminants(self) -> bool:
        return bool(self.system.contaminants_hz)

    def _member(self, i: int, sequence: ControlSequence, with_gradient: bool, mode: str):
        hams = self.member_hams[i]
        cache = build_cache(hams, sequence, self.target.unitary)
        phi = fidelity(self.target, cache.final)
        grad = gradient(cache, hams, sequence, mode) if with_gradient else None
        c_phis, c_grads = [], []
        for ch in self.contaminant_hams[i]:
            ccache = build_cache(ch, sequence, self._identity2)
            c_phis.append(fidelity(self._identity2, ccache.final))
            if with_gradient:
                c_grads.append(gradient(ccache, ch, sequence, mode))
        return phi, grad, c_phis, c_grads

    def evaluate(self, sequence: ControlSequence, with_gradient: bool = True, mode: str | None = None) -> ObjectiveReport:
        mode = mode or self.mode
        n_members = len(self.ensemble.members)
        threads = min(_thread_count(), n_members)
        if threads > 1:
            with ThreadPoolExecutor(threads) as pool:
                results = list(pool.map(lambda i: self._member(i, sequence, with_gradient, mode), range(n_members)))
        else:
            results = [self._member(i, sequence, with_gradient, mode) for i in range(n_members)]

        wc = self.ensemble.contaminant_weight if self.has_contaminants else 0.0
        weights = self.ensemble.weights
        total = 0.0
        grad = np.zeros(sequence.n_parameters) if with_gradient else None
        member_phis, contaminant_phis = [], []
        # reduce in member order regardless of completion order
        for w, (phi, g, c_phis, c_grads) in zip(weights, results):
            member_phis.append(phi)
            contaminant_phis.append(c_phis)
            total += (1.0 - wc) * w * phi
            if with_gradient:
                grad += (1.0 - wc) * w * g
            if c_phis:
                share = wc * w / len(c_phis)
                total += share * sum(c_phis)
                if with_gradient:
                    for cg in c_grads:
                        grad += share * cg
        pen = 0.0
        if self.penalty is not None:
            pen, pgrad = penalized_power(sequence, self.penalty)
            total -= pen
            if with_gradient:
                grad -= pgrad
        return ObjectiveReport(total, np.array(member_phis), np.array(contaminant_phis), pen, grad)

    def fidelity_of(self, sequence: ControlSequence, errors=()) -> float:
        """Plain gate fidelity under an arbitrary list of error models."""
        hams = apply_error_models(self.base_hams, errors)
        return fidelity(self.target, build_cache(hams, sequence, self.target.unitary).final)


def penalized_power(sequence: ControlSequence, cfg: PenaltyConfig) -> tuple[float, np.ndarray]:
    """Power penalty measured in units of the amplitude limit."""
    u_max = 2.0 * np.pi * cfg.u_max_hz
    value, grad = power_penalty(sequence.scaled(1.0 / u_max), 1.0, cfg.lam)
    return value, grad / u_max


def composite_objective(system: SpinSystem, sequence: ControlSequence, target, ensemble: EnsembleSpec | None = None,
                        penalty_cfg: PenaltyConfig | None = None, mode: str = "first_order") -> ObjectiveReport:
    return GateProblem(system, target, ensemble, penalty_cfg, mode).evaluate(sequence)
