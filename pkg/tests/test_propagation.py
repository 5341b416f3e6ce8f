import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grapekit.objective import TargetGate, fidelity
from grapekit.propagation import (
    ControlSequence,
    Delay,
    NotHermitianError,
    Pulse,
    StaleCacheError,
    build_cache,
    delay_propagator,
    expm_hermitian,
    overlap_derivatives,
    propagator_derivative,
    pulse_propagator,
)
from grapekit.spins import Coupling, SpinSystem, build_hamiltonians

TWO_PI = 2 * np.pi


def taylor_expm(a: np.ndarray, terms: int = 30) -> np.ndarray:
    """exp(a) by scaling and squaring of a truncated Taylor series."""
    norm = np.linalg.norm(a, 1)
    s = max(0, int(np.ceil(np.log2(norm))) + 1) if norm > 0 else 0
    b = a / 2**s
    out = np.eye(a.shape[0], dtype=complex)
    term = np.eye(a.shape[0], dtype=complex)
    for k in range(1, terms):
        term = term @ b / k
        out = out + term
    for _ in range(s):
        out = out @ out
    return out


def random_hermitian(rng, n, scale=1.0):
    m = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (m + m.conj().T) / 2


def random_unitary(rng, n):
    q, r = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


@pytest.fixture
def two_spin():
    return build_hamiltonians(SpinSystem((120.0, -80.0), (Coupling(0, 1, 15.0, "strong"),)))


def test_expm_zero_and_diagonal():
    np.testing.assert_array_equal(expm_hermitian(np.zeros((3, 3)), 2.5), np.eye(3))
    a, b, t = 3.0, -1.5, 0.4
    np.testing.assert_allclose(expm_hermitian(np.diag([a, b]), t), np.diag(np.exp([-1j * a * t, -1j * b * t])), atol=1e-15)


def test_expm_matches_taylor_oracle():
    rng = np.random.default_rng(0)
    h = random_hermitian(rng, 4, scale=2000.0)
    np.testing.assert_allclose(expm_hermitian(h, 1e-3), taylor_expm(-1j * 1e-3 * h), atol=1e-10)


def test_expm_rejects_non_hermitian():
    with pytest.raises(NotHermitianError, match="max"):
        expm_hermitian(np.array([[0, 1], [0, 0]], dtype=complex), 1.0)


def test_time_reversal():
    rng = np.random.default_rng(1)
    h = random_hermitian(rng, 8, 300.0)
    np.testing.assert_allclose(expm_hermitian(h, 0.01) @ expm_hermitian(h, -0.01), np.eye(8), atol=1e-10)


def test_pulse_propagator_ninety_degree_x():
    hams = build_hamiltonians(SpinSystem((0.0,)))
    dt = 1e-5
    u = (np.pi / 2) / dt
    c = s = 1 / np.sqrt(2)
    np.testing.assert_allclose(pulse_propagator(hams, Pulse(dt, (u, 0.0))), [[c, -1j * s], [-1j * s, c]], atol=1e-12)
    np.testing.assert_allclose(pulse_propagator(hams, Pulse(dt, (0.0, 0.0))), np.eye(2), atol=1e-15)


def test_weak_coupling_evolution_is_phase_gate():
    j = 10.0
    hams = build_hamiltonians(SpinSystem((0.0, 0.0), (Coupling(0, 1, j),)))
    u = pulse_propagator(hams, Pulse(1 / (2 * j), (0.0, 0.0)))
    # exp(-i pi 2 IzIz): IzIz = +-1/4 -> phases e^{-i pi/4}, e^{+i pi/4}
    expected = np.diag(np.exp(-1j * np.pi / 4 * np.array([1, -1, -1, 1])))
    np.testing.assert_allclose(u, expected, atol=1e-12)


def test_delay_propagator(two_spin):
    np.testing.assert_allclose(delay_propagator(two_spin, 0.0), np.eye(4), atol=1e-15)
    with pytest.raises(ValueError):
        delay_propagator(two_spin, -1e-3)
    np.testing.assert_allclose(delay_propagator(two_spin, 1e-3), pulse_propagator(two_spin, Pulse(1e-3, (0.0, 0.0))),
                               atol=1e-14)
    hams = build_hamiltonians(SpinSystem((100.0, -40.0), (Coupling(0, 1, 5.0),)))
    d = np.diag(hams.h0).real
    np.testing.assert_allclose(delay_propagator(hams, 1e-3), np.diag(np.exp(-1j * 1e-3 * d)), atol=1e-14)


def test_derivative_of_zero_length_step_vanishes(two_spin):
    for mode in ("first_order", "exact"):
        np.testing.assert_array_equal(propagator_derivative(two_spin, Pulse(0.0, (300.0, 20.0)), 1, mode), 0)


def test_delay_derivative_matches_finite_difference(two_spin):
    t, h = 2e-3, 1e-9
    fd = (delay_propagator(two_spin, t + h) - delay_propagator(two_spin, t - h)) / (2 * h)
    for mode in ("first_order", "exact"):
        d = propagator_derivative(two_spin, Delay(t), mode=mode)
        assert np.linalg.norm(d - fd) / np.linalg.norm(fd) < 1e-5


def test_exact_derivative_single_spin():
    hams = build_hamiltonians(SpinSystem((250.0,)))
    step = Pulse(1e-4, (4000.0, -2500.0))
    for k in range(2):
        h = 1e-2
        plus = list(step.amplitudes); plus[k] += h
        minus = list(step.amplitudes); minus[k] -= h
        fd = (pulse_propagator(hams, Pulse(step.duration, tuple(plus))) -
              pulse_propagator(hams, Pulse(step.duration, tuple(minus)))) / (2 * h)
        d = propagator_derivative(hams, step, k, "exact")
        assert np.linalg.norm(d - fd) / np.linalg.norm(fd) < 1e-7


@pytest.mark.parametrize("h", [1e-1, 1.0, 10.0])
def test_exact_derivative_over_two_decades_of_step(two_spin, h):
    step = Pulse(2e-4, (3000.0, 1200.0))
    fd = (pulse_propagator(two_spin, Pulse(step.duration, (3000.0 + h, 1200.0))) -
          pulse_propagator(two_spin, Pulse(step.duration, (3000.0 - h, 1200.0)))) / (2 * h)
    d = propagator_derivative(two_spin, step, 0, "exact")
    assert np.linalg.norm(d - fd) / np.linalg.norm(fd) < 1e-6


def test_first_order_error_is_second_order_in_dt(two_spin):
    amps = (3000.0, 1200.0)
    dts = np.array([1e-4, 5e-5, 2.5e-5, 1.25e-5])
    errs = [np.linalg.norm(propagator_derivative(two_spin, Pulse(dt, amps), 0, "first_order")
                           - propagator_derivative(two_spin, Pulse(dt, amps), 0, "exact")) for dt in dts]
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.1)


def test_invalid_control_index(two_spin):
    with pytest.raises(IndexError):
        propagator_derivative(two_spin, Pulse(1e-5, (0.0, 0.0)), 2)


def mixed_sequence(rng, n=12, n_controls=2):
    is_delay = np.zeros(n, dtype=bool)
    is_delay[[2, n - 5]] = True
    durations = np.where(is_delay, 3e-4, 2e-5)
    return ControlSequence(durations, rng.uniform(-1, 1, (n, n_controls)) * TWO_PI * 500, is_delay)


def test_cache_single_step(two_spin):
    u_t = random_unitary(np.random.default_rng(2), 4)
    seq = ControlSequence([1e-5], [[1000.0, 0.0]])
    cache = build_cache(two_spin, seq, u_t)
    np.testing.assert_array_equal(cache.forward[0], cache.step_props[0])
    np.testing.assert_array_equal(cache.backward[0], u_t)


def test_cache_products_and_split_invariance(two_spin):
    rng = np.random.default_rng(3)
    seq = mixed_sequence(rng)
    u_t = random_unitary(rng, 4)
    cache = build_cache(two_spin, seq, u_t)
    direct = np.eye(4)
    for step in seq.steps:
        u = delay_propagator(two_spin, step.duration) if isinstance(step, Delay) else pulse_propagator(two_spin, step)
        direct = u @ direct
    np.testing.assert_allclose(cache.final, direct, atol=1e-12)
    overall = np.trace(u_t.conj().T @ cache.final)
    for j in range(seq.n_steps):
        split = np.trace(cache.backward[j].conj().T @ cache.step_props[j] @ cache.previous(j))
        assert abs(split - overall) < 1e-12
    for m in (*cache.step_props, *cache.forward, *cache.backward):
        assert np.max(np.abs(m.conj().T @ m - np.eye(4))) < 1e-10


def test_stale_cache_detected(two_spin):
    rng = np.random.default_rng(4)
    seq = mixed_sequence(rng)
    cache = build_cache(two_spin, seq, np.eye(4))
    other = seq.with_parameters(seq.parameters() * 1.01)
    with pytest.raises(StaleCacheError):
        overlap_derivatives(cache, two_spin, other)


def test_sequence_parameter_round_trip():
    rng = np.random.default_rng(5)
    seq = mixed_sequence(rng)
    x = seq.parameters()
    assert x.size == seq.n_parameters == 10 * 2 + 2
    assert seq.with_parameters(x) == seq
    back = ControlSequence.from_steps(seq.steps, 2)
    assert back == seq
    neg = x.copy()
    _, delay_index = seq.parameter_index()
    neg[delay_index] = -1.0
    assert np.all(seq.with_parameters(neg).durations >= 0)


def test_sequence_validation():
    with pytest.raises(ValueError):
        ControlSequence([-1e-6], [[0.0, 0.0]])
    with pytest.raises(ValueError):
        ControlSequence.from_steps([Pulse(1e-6, (1.0, 2.0)), Pulse(1e-6, (1.0,))])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3))
def test_random_propagators_unitary(seed, n_spins):
    rng = np.random.default_rng(seed)
    system = SpinSystem(tuple(rng.uniform(-500, 500, n_spins)),
                        tuple(Coupling(a, a + 1, rng.uniform(-20, 20), "strong") for a in range(n_spins - 1)))
    hams = build_hamiltonians(system)
    seq = mixed_sequence(rng, n=8)
    cache = build_cache(hams, seq, TargetGate(random_unitary(rng, 2**n_spins)))
    dim = 2**n_spins
    for m in cache.forward:
        assert np.max(np.abs(m.conj().T @ m - np.eye(dim))) < 1e-10
    assert 0.0 <= fidelity(random_unitary(rng, dim), cache.final) <= 1.0
