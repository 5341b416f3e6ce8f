import numpy as np
import pytest

from grapekit.gates import bb1, bb1_phase, cnot, controlled_phase, hard_pulse, identity, named_gate, rotation
from grapekit.objective import GateProblem
from grapekit.spins import PLE, SpinSystem

ON_RESONANCE = SpinSystem((0.0,))


def infidelity_slope(seq, target):
    problem = GateProblem(ON_RESONANCE, target)
    eps = np.geomspace(0.01, 0.1, 9)
    infid = [1 - problem.fidelity_of(seq, [PLE(1 + e)]) for e in eps]
    return np.polyfit(np.log(eps), np.log(infid), 1)[0]


def test_bb1_phase_for_ninety_degrees():
    assert np.degrees(bb1_phase(np.pi / 2)) == pytest.approx(97.1808, abs=1e-4)
    assert np.cos(bb1_phase(np.pi / 2)) == pytest.approx(-1 / 8, abs=1e-15)


def test_bb1_structure():
    seq = bb1(np.pi / 2, amplitude_hz=10_000.0)
    omega = 2 * np.pi * 10_000.0
    np.testing.assert_allclose(seq.durations * omega, [np.pi, 2 * np.pi, np.pi, np.pi / 2], rtol=1e-14)
    phases = np.arctan2(seq.amplitudes[:, 1], seq.amplitudes[:, 0]) % (2 * np.pi)
    phi = bb1_phase(np.pi / 2)
    np.testing.assert_allclose(phases, np.array([phi, 3 * phi, phi, 0.0]) % (2 * np.pi), atol=1e-12)


def test_bb1_exact_without_errors():
    target = rotation(np.pi / 2, "x")
    assert GateProblem(ON_RESONANCE, target).fidelity_of(bb1(np.pi / 2)) == pytest.approx(1.0, abs=1e-10)


def test_bb1_rejects_bad_angle():
    with pytest.raises(ValueError):
        bb1(0.0)
    with pytest.raises(ValueError):
        bb1(7.0)


def test_infidelity_slopes():
    target = rotation(np.pi / 2, "x")
    assert infidelity_slope(hard_pulse(np.pi / 2), target) == pytest.approx(2.0, abs=0.2)
    assert infidelity_slope(bb1(np.pi / 2), target) >= 5.5


def test_hard_pulse_phase_and_channel():
    seq = hard_pulse(np.pi, np.pi / 2, 5000.0, n_channels=2, channel=1)
    assert seq.n_controls == 4
    np.testing.assert_allclose(seq.amplitudes[0], [0, 0, 0, 2 * np.pi * 5000.0], atol=1e-9)
    assert seq.total_duration == pytest.approx(1e-4)


def test_named_gates():
    assert np.array_equal(named_gate("identity", 2).unitary, np.eye(4))
    r = named_gate("rotation", 2, angle_deg=180.0, axis="x", spin=1).unitary
    np.testing.assert_allclose(r, np.kron(np.eye(2), -1j * np.array([[0, 1], [1, 0]])), atol=1e-15)
    np.testing.assert_allclose(named_gate("cphase", 2).unitary, np.diag([1, 1, 1, -1]), atol=1e-15)
    np.testing.assert_array_equal(cnot().unitary.real, [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
    with pytest.raises(ValueError):
        named_gate("toffoli", 3)


def test_rotation_with_phase_axis_matches_named_axis():
    np.testing.assert_allclose(rotation(0.7, np.pi / 2).unitary, rotation(0.7, "y").unitary, atol=1e-15)
    assert identity(1).unitary.shape == (2, 2)
    assert controlled_phase(np.pi / 2).unitary[3, 3] == pytest.approx(1j)
