import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grapekit.gates import rotation
from grapekit.hardware import (
    DelayPad,
    QuantizationSpec,
    adjust_target,
    pad_propagators,
    padded_fidelity,
    quantize,
    rounding_impact,
)
from grapekit.objective import GateProblem, TargetGate
from grapekit.optimizer import OptimizerConfig, SeedSpec, optimize_sequence, seed_sequence
from grapekit.propagation import ControlSequence
from grapekit.spins import Coupling, SpinSystem

TWO_PI = 2 * np.pi
SYSTEM = SpinSystem((350.0, -350.0), (Coupling(0, 1, 7.0),))


def random_sequence(seed, n=32, max_hz=1000.0):
    rng = np.random.default_rng(seed)
    r = rng.uniform(0, 1, n) * TWO_PI * max_hz
    p = rng.uniform(0, TWO_PI, n)
    return ControlSequence.uniform(np.column_stack([r * np.cos(p), r * np.sin(p)]), 1e-5)


def test_on_grid_and_zero_steps_unchanged():
    spec = QuantizationSpec(11, 90.0, 1000.0)
    amps = TWO_PI * np.array([[100.0, 0.0], [0.0, 300.0], [0.0, 0.0], [-1000.0, 0.0]])
    seq = ControlSequence.uniform(amps, 1e-5)
    q = quantize(seq, spec)
    np.testing.assert_allclose(q.amplitudes, amps, atol=1e-9)
    assert np.all(q.amplitudes[2] == 0.0)


def test_ten_bit_rounding_bound():
    spec = QuantizationSpec(1024, 1e-9, 1000.0)
    seq = random_sequence(1)
    q = quantize(seq, spec)
    r0 = np.hypot(*seq.amplitudes.T) / TWO_PI
    r1 = np.hypot(*q.amplitudes.T) / TWO_PI
    assert np.max(np.abs(r1 - r0)) <= 1000.0 / (2 * 1023) * (1 + 1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 2048), st.sampled_from([0.1, 1.0, 7.0, 45.0, 90.0, 100.0]))
def test_quantize_is_idempotent(seed, levels, res):
    spec = QuantizationSpec(levels, res, 1000.0)
    once = quantize(random_sequence(seed), spec)
    twice = quantize(once, spec)
    assert np.array_equal(once.amplitudes, twice.amplitudes)


def test_over_limit_rejected():
    seq = ControlSequence.uniform([[TWO_PI * 1200.0, 0.0]], 1e-5)
    with pytest.raises(ValueError, match="limit"):
        quantize(seq, QuantizationSpec(1024, 0.35, 1000.0))


def test_rounding_half_away_from_zero():
    spec = QuantizationSpec(3, 90.0, 2.0)  # levels at 0, 1, 2 Hz
    seq = ControlSequence.uniform([[TWO_PI * 0.5, 0.0], [TWO_PI * 1.5, 0.0]], 1e-5)
    q = quantize(seq, spec)
    np.testing.assert_allclose(q.amplitudes[:, 0] / TWO_PI, [1.0, 2.0])


@pytest.fixture(scope="module")
def optimized_single_spin():
    problem = GateProblem(SpinSystem((0.0,)), rotation(np.pi / 2, "x"))
    res = optimize_sequence(problem, seed_sequence(SeedSpec(20, 5e-6, 1, 3, 2000.0), 1),
                            OptimizerConfig(fidelity_goal=0.999999))
    return problem, res.sequence


def test_rounding_impact(optimized_single_spin):
    problem, seq = optimized_single_spin
    peak = float(np.max(np.hypot(*seq.amplitudes.T))) / TWO_PI
    fine = rounding_impact(problem, seq, QuantizationSpec(2**40, 1e-12, peak * 1.0001))
    assert fine.quantized == pytest.approx(fine.exact, abs=1e-9)
    coarse = rounding_impact(problem, seq, QuantizationSpec(2, 90.0, peak * 1.0001))
    assert coarse.quantized < coarse.exact
    assert coarse.delta == pytest.approx(coarse.exact - coarse.quantized)


def test_adjust_target_identities():
    target = rotation(np.pi / 2, "y", 0, 2)
    same = adjust_target(target, SYSTEM, DelayPad())
    np.testing.assert_allclose(same.unitary, target.unitary, atol=1e-15)
    rng = np.random.default_rng(0)
    for pre, post in rng.uniform(0, 20e-6, (5, 2)):
        pad = DelayPad(pre, post)
        adj = adjust_target(target, SYSTEM, pad)
        d_pre, d_post = pad_propagators(SYSTEM, pad)
        np.testing.assert_allclose(d_post @ adj.unitary @ d_pre, target.unitary, atol=1e-12)
        u = adj.unitary
        assert np.max(np.abs(u.conj().T @ u - np.eye(4))) < 1e-12


def test_adjust_target_composes():
    target = rotation(np.pi / 3, "x", 1, 2)
    twice = adjust_target(adjust_target(target, SYSTEM, DelayPad(3e-6, 5e-6)), SYSTEM, DelayPad(7e-6, 2e-6))
    once = adjust_target(target, SYSTEM, DelayPad(10e-6, 7e-6))
    np.testing.assert_allclose(twice.unitary, once.unitary, atol=1e-12)


def test_negative_pad_rejected():
    with pytest.raises(ValueError):
        DelayPad(-1e-6, 0.0)


def test_padded_fidelity_of_exact_target_sequence():
    # a free-evolution "sequence" equals its own drift: adjusted target is met exactly
    seq = ControlSequence.uniform(np.zeros((4, 2)), 1e-5)
    pad = DelayPad(5e-6, 8e-6)
    from grapekit.propagation import final_propagator
    from grapekit.spins import build_hamiltonians

    u_seq = final_propagator(build_hamiltonians(SYSTEM), seq)
    d_pre, d_post = pad_propagators(SYSTEM, pad)
    target = TargetGate(d_post @ u_seq @ d_pre)
    assert padded_fidelity(SYSTEM, seq, target, pad) == pytest.approx(1.0, abs=1e-14)
