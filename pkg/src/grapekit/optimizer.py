"""Conjugate-gradient ascent, seeding, restarts and step coarsening.

The ascent routines work on plain parameter vectors and a callback
``fun(x) -> (value, gradient)``; :func:`optimize_sequence` adapts a
:class:`~grapekit.objective.GateProblem` to that interface.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .propagation import ControlSequence
from .spins import TWO_PI

logger = logging.getLogger(__name__)

GOAL_REACHED = "goal_reached"
GRADIENT_FLOOR = "gradient_floor"
ITERATION_CAP = "iteration_cap"
RESTARTS_EXHAUSTED = "restarts_exhausted"


class ObjectiveError(RuntimeError):
    """An objective evaluation failed inside the optimizer."""


@dataclass(frozen=True)
class OptimizerConfig:
    max_iterations: int = 500
    fidelity_goal: float = 0.99999
    gradient_norm_floor: float = 1e-10
    initial_step: float = 0.05
    growth: float = 2.0
    shrink: float = 0.5
    max_probes: int = 30
    armijo: float = 1e-4
    perturbation: float = 0.05
    perturbation_relative: bool = True
    max_restarts: int = 0
    seed: int = 0
    gradient_mode: str = "first_order"
    restart_every: int | None = None

    def __post_init__(self):
        if not 0 < self.fidelity_goal <= 1:
            raise ValueError("fidelity_goal must lie in (0, 1]")
        if self.perturbation < 0:
            raise ValueError("perturbation magnitude must be non-negative")
        if self.gradient_mode not in ("first_order", "exact"):
            raise ValueError(f"unknown gradient mode {self.gradient_mode!r}")
        if not 0 < self.shrink < 1 < self.growth:
            raise ValueError("line search needs 0 < shrink < 1 < growth")


@dataclass
class OptimizationResult:
    x: np.ndarray
    objective: float
    trace: list[float]
    termination: str
    iterations: int = 0
    evaluations: int = 0
    restarts: int = 0
    sequence: ControlSequence | None = None
    report: object = None
    message: str = ""


@dataclass(frozen=True)
class SeedSpec:
    n_steps: int
    dt: float
    n_channels: int = 1
    n_harmonics: int = 4
    amplitude_bound_hz: float = 1000.0


def seed_sequence(spec: SeedSpec, rng: np.random.Generator | int | None = None) -> ControlSequence:
    """Smooth random start: a few sinusoids per control, rescaled.

    Every x and y component is an independent sum of ``n_harmonics``
    harmonics of the sequence length.  The result is scaled so that the
    largest per-channel field magnitude equals the amplitude bound.
    """
    if spec.n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    if not spec.amplitude_bound_hz > 0:
        raise ValueError("amplitude_bound_hz must be positive")
    rng = np.random.default_rng(rng)
    n_controls = 2 * spec.n_channels
    j = np.arange(spec.n_steps)
    amps = np.zeros((spec.n_steps, n_controls))
    for h in range(1, spec.n_harmonics + 1):
        a = rng.uniform(-1.0, 1.0, n_controls)
        phi = rng.uniform(0.0, TWO_PI, n_controls)
        amps += a * np.sin(TWO_PI * h * j[:, None] / spec.n_steps + phi)
    peak = np.max(np.hypot(amps[:, 0::2], amps[:, 1::2])) if amps.size else 0.0
    if peak > 0:
        amps *= TWO_PI * spec.amplitude_bound_hz / peak
    return ControlSequence.uniform(amps, spec.dt, label="seed")


def _call(fun, x, iteration):
    try:
        value, grad = fun(x)
    except Exception as exc:
        raise ObjectiveError(f"objective failed at iteration {iteration}: {exc}") from exc
    return float(value), np.asarray(grad, dtype=float)


def _line_search(fun, x, f0, g0, d, alpha0, cfg, project, iteration):
    """Increase-seeking search along ``d``.

    Probes ``alpha0``, fits a parabola through ``f(0)``, ``f'(0)`` and the
    probe, and tries the vertex; grows the step (by at most ``growth**3`` per
    probe) while the model points further out and shrinks it on failure.  Returns the best accepted
    point or ``None`` if nothing satisfied the sufficient-increase test.
    """
    slope = float(g0 @ d)
    best = None
    evals = 0

    def probe(alpha):
        nonlocal evals, best
        xa = project(x + alpha * d)
        fa, ga = _call(fun, xa, iteration)
        evals += 1
        ok = fa >= f0 + cfg.armijo * alpha * slope and fa > f0
        if ok and (best is None or fa > best[1]):
            best = (xa, fa, ga, alpha)
        return fa

    reach = cfg.growth**3
    alpha = alpha0
    for _ in range(cfg.max_probes):
        fa = probe(alpha)
        curvature = fa - f0 - alpha * slope
        if curvature < 0:
            vertex = -slope * alpha**2 / (2.0 * curvature)
            if vertex > reach * alpha:
                # model maximum lies far out: walk there in bounded steps
                alpha *= reach
                continue
            if vertex > 0 and not np.isclose(vertex, alpha, rtol=1e-12, atol=0):
                probe(vertex)
            if best is not None:
                break
            alpha = max(min(vertex, alpha * cfg.shrink), alpha * cfg.shrink**4) if vertex > 0 else alpha * cfg.shrink
        else:
            # no concave model yet: expand while still improving
            if fa > f0:
                alpha *= cfg.growth
            else:
                alpha *= cfg.shrink
    return best, evals


def conjugate_gradient_ascend(fun: Callable, x0: np.ndarray, cfg: OptimizerConfig = OptimizerConfig(),
                              project: Callable | None = None, callback: Callable | None = None) -> OptimizationResult:
    """Polak-Ribiere conjugate-gradient ascent.

    The direction falls back to the gradient when the conjugate direction
    is not uphill, and every ``restart_every`` iterations (default: the
    dimension).  Accepted iterates never decrease the objective.
    """
    project = project or (lambda v: v)
    x = project(np.array(x0, dtype=float))
    f, g = _call(fun, x, 0)
    trace = [f]
    evals = 1
    n = x.size
    restart_every = cfg.restart_every or max(n, 1)
    if f >= cfg.fidelity_goal:
        return OptimizationResult(x, f, trace, GOAL_REACHED, 0, evals)

    d = g.copy()
    g_prev = None
    alpha_prev, slope_prev = None, None
    termination = ITERATION_CAP
    message = ""
    it = 0
    since_reset = 0
    while it < cfg.max_iterations:
        if np.linalg.norm(g) <= cfg.gradient_norm_floor:
            termination = GRADIENT_FLOOR
            break
        if g_prev is not None:
            beta = max(0.0, float(g @ (g - g_prev)) / float(g_prev @ g_prev))
            d = g + beta * d
            since_reset += 1
            if since_reset >= restart_every or g @ d <= 0:
                d = g.copy()
                since_reset = 0
        slope = float(g @ d)
        if alpha_prev is None:
            alpha0 = cfg.initial_step * max(np.linalg.norm(x), 1.0) / np.linalg.norm(d)
        else:
            alpha0 = alpha_prev * slope_prev / slope
        best, n_evals = _line_search(fun, x, f, g, d, alpha0, cfg, project, it + 1)
        evals += n_evals
        if best is None and since_reset != 0:
            d = g.copy()
            since_reset = 0
            slope = float(g @ d)
            alpha0 = cfg.initial_step * max(np.linalg.norm(x), 1.0) / np.linalg.norm(d)
            best, n_evals = _line_search(fun, x, f, g, d, alpha0, cfg, project, it + 1)
            evals += n_evals
        if best is None:
            termination = GRADIENT_FLOOR
            message = "line search found no increase along the gradient"
            break
        it += 1
        g_prev = g
        x, f, g, alpha_prev = best[0], best[1], best[2], best[3]
        slope_prev = slope
        trace.append(f)
        if callback is not None:
            callback(it, x, f)
        if f >= cfg.fidelity_goal:
            termination = GOAL_REACHED
            break
    return OptimizationResult(x, f, trace, termination, it, evals, message=message)


def perturb_and_retry(result: OptimizationResult, fun: Callable, cfg: OptimizerConfig,
                      rng: np.random.Generator | int | None = None, project: Callable | None = None) -> OptimizationResult:
    """Kick the incumbent optimum in a random direction and re-ascend.

    The better of incumbent and challenger is kept (incumbent on ties),
    until the goal is met or ``cfg.max_restarts`` kicks have been tried.
    """
    rng = np.random.default_rng(rng if rng is not None else cfg.seed)
    best = result
    trace = list(result.trace)
    evals = result.evaluations
    restarts = 0
    while best.termination != GOAL_REACHED and best.objective < cfg.fidelity_goal and restarts < cfg.max_restarts:
        restarts += 1
        direction = rng.standard_normal(best.x.size)
        direction /= np.linalg.norm(direction) or 1.0
        scale = cfg.perturbation * (np.linalg.norm(best.x) if cfg.perturbation_relative else 1.0)
        if cfg.perturbation_relative and np.linalg.norm(best.x) == 0:
            scale = cfg.perturbation
        trial = conjugate_gradient_ascend(fun, best.x + scale * direction, cfg, project)
        evals += trial.evaluations
        trace.extend(trial.trace)
        logger.info("restart %d: %.10f (incumbent %.10f)", restarts, trial.objective, best.objective)
        if trial.objective > best.objective:
            best = trial
    termination = best.termination
    if termination != GOAL_REACHED and restarts and restarts >= cfg.max_restarts:
        termination = RESTARTS_EXHAUSTED
    return replace(best, trace=trace, evaluations=evals, restarts=restarts, termination=termination)


def optimize_sequence(problem, initial: ControlSequence, cfg: OptimizerConfig = OptimizerConfig(),
                      delay_scale: float = 1e-3) -> OptimizationResult:
    """Run CG plus restarts on a gate problem.

    The optimizer sees amplitudes in units of ``1/dt_ref`` (rotation angle
    per reference step) and delays in units of ``delay_scale`` seconds, so
    both kinds of parameter have comparable gradients.
    """
    pulse_dt = initial.durations[~initial.is_delay]
    dt_ref = float(np.mean(pulse_dt)) if pulse_dt.size else 1.0
    scale = np.full(initial.n_parameters, 1.0 / dt_ref)
    _, delay_index = initial.parameter_index()
    scale[delay_index] = delay_scale
    mode = cfg.gradient_mode

    def fun(z):
        seq = initial.with_parameters(z * scale)
        rep = problem.evaluate(seq, mode=mode)
        return rep.total, rep.gradient * scale

    def project(z):
        if delay_index.size:
            z = z.copy()
            z[delay_index] = np.maximum(z[delay_index], 0.0)
        return z

    z0 = initial.parameters() / scale
    result = conjugate_gradient_ascend(fun, z0, cfg, project)
    result = perturb_and_retry(result, fun, cfg, np.random.default_rng(cfg.seed), project)
    seq = initial.with_parameters(result.x * scale)
    seq.metadata.update(initial.metadata)
    seq.metadata["optimizer"] = "polak-ribiere-cg"
    result.sequence = seq
    result.x = seq.parameters()
    result.report = problem.evaluate(seq, with_gradient=False)
    return result


def coarsen(sequence: ControlSequence) -> ControlSequence:
    """Merge neighbouring pairs of steps, averaging their amplitudes."""
    if np.any(sequence.is_delay):
        raise ValueError("coarsen only handles pure pulse sequences")
    if sequence.n_steps % 2:
        raise ValueError(f"coarsen needs an even step count, got {sequence.n_steps}")
    if sequence.n_steps and not np.all(sequence.durations == sequence.durations[0]):
        raise ValueError("coarsen needs a uniform time step")
    amps = 0.5 * (sequence.amplitudes[0::2] + sequence.amplitudes[1::2])
    durations = sequence.durations[0::2] + sequence.durations[1::2]
    return ControlSequence(durations, amps, None, dict(sequence.metadata))


@dataclass
class CoarseningRung:
    n_steps: int
    fidelity: float
    sequence: ControlSequence
    result: OptimizationResult | None = None


def coarsening_study(sequence: ControlSequence, problem, cfg: OptimizerConfig = OptimizerConfig(),
                     depth: int = 2, min_steps: int = 1) -> list[CoarseningRung]:
    """Fidelity ladder from repeatedly halving and re-optimising a sequence.

    The first rung is the input sequence as given.  ``problem`` is either a
    gate problem or a factory taking the coarse sequence and returning one.
    """
    get_problem = problem if callable(problem) and not hasattr(problem, "evaluate") else (lambda s: problem)
    first = get_problem(sequence).evaluate(sequence, with_gradient=False).total
    ladder = [CoarseningRung(sequence.n_steps, first, sequence)]
    current = sequence
    for _ in range(depth):
        if current.n_steps // 2 < min_steps:
            break
        coarse = coarsen(current)
        result = optimize_sequence(get_problem(coarse), coarse, cfg)
        current = result.sequence
        ladder.append(CoarseningRung(current.n_steps, result.objective, current, result))
        logger.info("coarsened to %d steps: %.8f", current.n_steps, result.objective)
    return ladder
