import numpy as np
import pytest

from grapekit.hardware import QuantizationSpec
from grapekit.io import (
    ConfigError,
    format_amp_phase,
    format_sequence,
    insert_delays,
    load_run_config,
    load_sequence,
    load_system,
    save_sequence,
)
from grapekit.optimizer import SeedSpec, seed_sequence
from grapekit.propagation import ControlSequence, Delay, Pulse

TWO_PI = 2 * np.pi


def test_native_round_trip_is_exact(tmp_path):
    seq = seed_sequence(SeedSpec(40, 7.3e-6, 2, 5, 812.5), 17)
    seq = ControlSequence.from_steps(seq.steps[:20] + [Delay(3.1e-5)] + seq.steps[20:], 4)
    path = save_sequence(seq, tmp_path / "a.csv")
    back = load_sequence(path)
    np.testing.assert_allclose(back.amplitudes, seq.amplitudes, rtol=1e-14, atol=0)
    assert np.array_equal(back.is_delay, seq.is_delay)
    save_sequence(back, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_malformed_sequence_names_line(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("kind,duration_s,ch0_ux_hz,ch0_uy_hz\nP,1e-5,1,2\nX,1e-5,1,2\n")
    with pytest.raises(ConfigError, match="bad.csv:3"):
        load_sequence(p)
    with pytest.raises(FileNotFoundError, match="nowhere.csv"):
        load_sequence(tmp_path / "nowhere.csv")


def amp_phase_rows(text):
    return [list(map(float, line.split(","))) for line in text.strip().splitlines()[1:]]


def test_amp_phase_conventions():
    seq = ControlSequence.uniform(TWO_PI * np.array([[100.0, 0.0], [0.0, -50.0], [0.0, 0.0], [-3.0, 0.0]]), 1e-5)
    rows = amp_phase_rows(format_amp_phase(seq))
    assert rows[0][1:] == pytest.approx([100.0, 0.0])
    assert rows[1][1:] == pytest.approx([50.0, 270.0])
    assert rows[2][1:] == [0.0, 0.0]
    assert rows[3][1:] == pytest.approx([3.0, 180.0])


def test_amp_phase_with_quantization():
    seq = ControlSequence.uniform(TWO_PI * np.array([[0.0, 98.0]]), 1e-5)
    rows = amp_phase_rows(format_amp_phase(seq, QuantizationSpec(11, 45.0, 100.0)))
    assert rows[0][1:] == pytest.approx([100.0, 90.0])


def test_amp_phase_delay_flag():
    seq = ControlSequence.from_steps([Pulse(1e-5, [TWO_PI, 0.0]), Delay(2e-5)], 2)
    with pytest.raises(ValueError, match="delay"):
        format_amp_phase(seq)
    rows = amp_phase_rows(format_amp_phase(seq, delays_as_zero=True))
    assert rows[1] == [2e-5, 0.0, 0.0]


def test_format_is_plain_text():
    text = format_sequence(ControlSequence.uniform([[TWO_PI * 1.5, -TWO_PI * 0.0]], 2e-6))
    assert text == "kind,duration_s,ch0_ux_hz,ch0_uy_hz\nP,2e-06,1.5,0\n"


def write(path, text):
    path.write_text(text)
    return path


def test_system_file(tmp_path):
    p = write(tmp_path / "sys.toml", """
spins = [350.0, -350.0]
couplings = [[0, 1, 7.0, "strong"]]
contaminants = [0.0]
[[channels]]
spins = [0, 1]
max_amplitude_hz = 1000.0
""")
    s = load_system(p)
    assert s.offsets_hz == (350.0, -350.0)
    assert s.couplings[0].mode == "strong"
    assert s.contaminants_hz == (0.0,)
    assert s.channels[0].max_amplitude_hz == 1000.0


def test_system_errors_name_the_field(tmp_path):
    with pytest.raises(ConfigError, match="coupling \\(0, 0\\)"):
        load_system(write(tmp_path / "a.toml", "spins = [0.0, 1.0]\ncouplings = [[0, 0, 7.0]]\n"))
    with pytest.raises(ConfigError, match="spins"):
        load_system(write(tmp_path / "b.toml", "couplings = []\n"))
    with pytest.raises(ConfigError, match="c.toml"):
        load_system(write(tmp_path / "c.toml", "spins = [0.0,\n"))


RUN = """
system = "sys.toml"
output_dir = "results"
contaminant_weight = 0.3
[target]
gate = "rotation"
angle_deg = 90.0
axis = "y"
[seed]
n_steps = 16
dt_s = 1e-5
rng_seed = 4
delays = [{after_step = 7, duration_s = 2e-5}]
[optimizer]
max_iterations = 20
[penalty]
u_max_hz = 900.0
[[ensemble]]
ple = 0.9
[[ensemble]]
ple = 1.1
ore_hz = 5.0
weight = 3.0
[hardware]
amplitude_levels = 1024
phase_resolution_deg = 0.35
max_amplitude_hz = 1000.0
pre_delay_s = 1e-5
"""


def test_run_config(tmp_path):
    write(tmp_path / "sys.toml", "spins = [0.0]\n")
    cfg = load_run_config(write(tmp_path / "run.toml", RUN))
    assert cfg.output_dir == tmp_path / "results"
    assert cfg.rng_seed == 4 and cfg.optimizer.seed == 4
    assert cfg.optimizer.max_iterations == 20
    assert cfg.seed.n_steps == 16
    assert [m.weight for m in cfg.ensemble.members] == pytest.approx([0.25, 0.75])
    assert cfg.ensemble.contaminant_weight == 0.3
    assert cfg.penalty.u_max_hz == 900.0 and cfg.penalty.lam == 10.0
    assert cfg.quantization.amplitude_levels == 1024
    assert cfg.pad.pre == 1e-5 and cfg.pad.post == 0.0
    seq = insert_delays(seed_sequence(cfg.seed, cfg.rng_seed), cfg.delays)
    assert seq.n_steps == 17 and seq.is_delay[8]


def test_run_config_missing_system(tmp_path):
    with pytest.raises(FileNotFoundError, match="sys.toml"):
        load_run_config(write(tmp_path / "run.toml", RUN))


def test_unknown_optimizer_field(tmp_path):
    write(tmp_path / "sys.toml", "spins = [0.0]\n")
    text = RUN.replace("max_iterations = 20", "max_iters = 20")
    with pytest.raises(ConfigError, match="max_iters"):
        load_run_config(write(tmp_path / "run.toml", text))
