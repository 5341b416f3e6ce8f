"""Text file formats: sequences, amplitude/phase export, tables and TOML
configuration."""

from __future__ import annotations

import csv
import io as _io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .gates import named_gate
from .hardware import DelayPad, QuantizationSpec, quantize, to_amp_phase
from .objective import EnsembleMember, EnsembleSpec, PenaltyConfig, TargetGate
from .optimizer import OptimizerConfig, SeedSpec
from .propagation import ControlSequence
from .spins import ORE, PLE, TWO_PI, Channel, Coupling, SpinSystem


class ConfigError(ValueError):
    """Invalid configuration file contents."""


def _fmt(x: float) -> str:
    s = f"{x:.15g}"
    return "0" if s == "-0" else s


# -- sequences -----------------------------------------------------------

def sequence_header(n_channels: int) -> list[str]:
    cols = ["kind", "duration_s"]
    for c in range(n_channels):
        cols += [f"ch{c}_ux_hz", f"ch{c}_uy_hz"]
    return cols


def format_sequence(sequence: ControlSequence) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(sequence_header(sequence.n_controls // 2))
    for t, row, d in zip(sequence.durations, sequence.amplitudes, sequence.is_delay):
        w.writerow(["D" if d else "P", _fmt(t)] + [_fmt(u / TWO_PI) for u in row])
    return buf.getvalue()


def save_sequence(sequence: ControlSequence, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_sequence(sequence))
    return path


def load_sequence(path) -> ControlSequence:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"sequence file not found: {path}")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:2] != ["kind", "duration_s"]:
        raise ConfigError(f"{path}: missing 'kind,duration_s,...' header row")
    n_amp = len(rows[0]) - 2
    durations, amps, kinds = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != n_amp + 2 or row[0] not in ("P", "D"):
            raise ConfigError(f"{path}:{lineno}: malformed step row {row!r}")
        try:
            durations.append(float(row[1]))
            amps.append([float(v) * TWO_PI for v in row[2:]])
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from None
        kinds.append(row[0] == "D")
    return ControlSequence(durations, np.array(amps).reshape(len(durations), n_amp), kinds, {"source": str(path)})


def format_amp_phase(sequence: ControlSequence, quantization: QuantizationSpec | None = None,
                     delays_as_zero: bool = False) -> str:
    """Duration plus amplitude (Hz) and phase (degrees) per channel."""
    if np.any(sequence.is_delay) and not delays_as_zero:
        raise ValueError("sequence contains delay steps; pass delays_as_zero to export them as zero-amplitude rows")
    if quantization is not None:
        sequence = quantize(sequence, quantization)
    n_ch = sequence.n_controls // 2
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["duration_s"] + [f"ch{c}_{q}" for c in range(n_ch) for q in ("amplitude_hz", "phase_deg")])
    amp, phase = [], []
    for c in range(n_ch):
        a, p = to_amp_phase(sequence.amplitudes[:, 2 * c], sequence.amplitudes[:, 2 * c + 1])
        amp.append(a / TWO_PI)
        phase.append(p)
    for j, t in enumerate(sequence.durations):
        row = [_fmt(t)]
        for c in range(n_ch):
            row += [_fmt(amp[c][j]), _fmt(phase[c][j])]
        w.writerow(row)
    return buf.getvalue()


def write_table(path, header: list[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


# -- configuration -------------------------------------------------------

def read_toml(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"configuration file not found: {path}")
    try:
        with path.open("rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _get(section: dict, key: str, where: str, kind=float, default=...):
    if key not in section:
        if default is ...:
            raise ConfigError(f"{where}: missing required field '{key}'")
        return default
    try:
        return kind(section[key])
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: field '{key}' has invalid value {section[key]!r}") from None


def system_from_dict(data: dict, where: str = "system") -> SpinSystem:
    """Build a spin system from the ``spins``/``couplings``/... sections.

    ``spins`` is a list of offsets in Hz (or tables with ``offset_hz``),
    ``couplings`` a list of ``[a, b, j_hz, mode]`` or tables, ``channels``
    a list of tables with ``spins`` and optional ``max_amplitude_hz``.
    """
    if "spins" not in data:
        raise ConfigError(f"{where}: missing 'spins' section")
    offsets = []
    for i, s in enumerate(data["spins"]):
        offsets.append(_get(s, "offset_hz", f"{where}: spins[{i}]") if isinstance(s, dict) else float(s))
    couplings = []
    for i, c in enumerate(data.get("couplings", [])):
        ctx = f"{where}: couplings[{i}]"
        if isinstance(c, dict):
            couplings.append(Coupling(_get(c, "a", ctx, int), _get(c, "b", ctx, int), _get(c, "j_hz", ctx),
                                      _get(c, "mode", ctx, str, "weak")))
        else:
            if len(c) not in (3, 4):
                raise ConfigError(f"{ctx}: expected [a, b, j_hz, mode]")
            couplings.append(Coupling(int(c[0]), int(c[1]), float(c[2]), str(c[3]) if len(c) == 4 else "weak"))
    channels = []
    for i, ch in enumerate(data.get("channels", [])):
        ctx = f"{where}: channels[{i}]"
        if "spins" not in ch:
            raise ConfigError(f"{ctx}: missing 'spins'")
        channels.append(Channel(tuple(int(s) for s in ch["spins"]), _get(ch, "max_amplitude_hz", ctx, float, None)))
    contaminants = [float(c["offset_hz"]) if isinstance(c, dict) else float(c) for c in data.get("contaminants", [])]
    try:
        return SpinSystem(tuple(offsets), tuple(couplings), tuple(contaminants), tuple(channels),
                          int(data.get("max_spins", 6)))
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def load_system(path) -> SpinSystem:
    return system_from_dict(read_toml(path), str(path))


def target_from_dict(data: dict, n_spins: int, base: Path, where: str = "target") -> TargetGate:
    if "matrix_file" in data:
        path = base / data["matrix_file"]
        if not path.exists():
            raise FileNotFoundError(f"{where}: matrix file not found: {path}")
        m = np.load(path) if path.suffix == ".npy" else np.loadtxt(path, dtype=complex, ndmin=2)
        return TargetGate(m, str(path.name))
    if "gate" not in data:
        raise ConfigError(f"{where}: give either 'gate' or 'matrix_file'")
    params = {k: v for k, v in data.items() if k != "gate"}
    try:
        return named_gate(str(data["gate"]), n_spins, **params)
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def ensemble_from_config(data: dict) -> EnsembleSpec:
    members = []
    for i, m in enumerate(data.get("ensemble", [])):
        ctx = f"ensemble[{i}]"
        errors = []
        if "ple" in m:
            errors.append(PLE(_get(m, "ple", ctx)))
        if "ore_hz" in m:
            errors.append(ORE(_get(m, "ore_hz", ctx)))
        members.append(EnsembleMember(tuple(errors), _get(m, "weight", ctx, float, 1.0)))
    try:
        return EnsembleSpec(tuple(members), float(data.get("contaminant_weight", 0.2)))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def optimizer_from_dict(data: dict) -> OptimizerConfig:
    allowed = set(OptimizerConfig.__dataclass_fields__)
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"optimizer: unknown fields {sorted(unknown)}")
    try:
        return OptimizerConfig(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"optimizer: {exc}") from None


@dataclass
class RunConfig:
    system: SpinSystem
    target: TargetGate
    seed: SeedSpec
    rng_seed: int
    optimizer: OptimizerConfig
    ensemble: EnsembleSpec
    penalty: PenaltyConfig | None = None
    quantization: QuantizationSpec | None = None
    pad: DelayPad = field(default_factory=DelayPad)
    output_dir: Path = Path("out")
    delays: list = field(default_factory=list)
    source: Path | None = None


def load_run_config(path) -> RunConfig:
    """Read a run configuration; relative paths resolve against its folder."""
    path = Path(path)
    data = read_toml(path)
    base = path.parent
    if "system" not in data:
        raise ConfigError(f"{path}: missing 'system' (path to the spin system file or inline table)")
    if isinstance(data["system"], dict):
        system = system_from_dict(data["system"], f"{path}: system")
    else:
        system = load_system(base / data["system"])
    target = target_from_dict(data.get("target", {"gate": "identity"}), system.n_spins, base, f"{path}: target")

    s = data.get("seed", {})
    ctx = f"{path}: seed"
    seed = SeedSpec(
        n_steps=_get(s, "n_steps", ctx, int),
        dt=_get(s, "dt_s", ctx),
        n_channels=len(system.channels),
        n_harmonics=_get(s, "n_harmonics", ctx, int, 4),
        amplitude_bound_hz=_get(s, "amplitude_bound_hz", ctx, float, 1000.0),
    )
    rng_seed = _get(s, "rng_seed", ctx, int, 0)
    delays = []
    for i, d in enumerate(s.get("delays", [])):
        delays.append((_get(d, "after_step", f"{ctx}.delays[{i}]", int), _get(d, "duration_s", f"{ctx}.delays[{i}]")))

    opt = optimizer_from_dict(data.get("optimizer", {}))
    if "seed" not in data.get("optimizer", {}):
        opt = OptimizerConfig(**{**opt.__dict__, "seed": rng_seed})
    ensemble = ensemble_from_config(data)

    penalty = None
    if "penalty" in data:
        p = data["penalty"]
        penalty = PenaltyConfig(_get(p, "u_max_hz", f"{path}: penalty"), _get(p, "lambda", f"{path}: penalty", float, 10.0))

    quant, pad = None, DelayPad()
    if "hardware" in data:
        h = data["hardware"]
        ctx = f"{path}: hardware"
        if "amplitude_levels" in h:
            quant = QuantizationSpec(_get(h, "amplitude_levels", ctx, int), _get(h, "phase_resolution_deg", ctx),
                                     _get(h, "max_amplitude_hz", ctx))
        pad = DelayPad(_get(h, "pre_delay_s", ctx, float, 0.0), _get(h, "post_delay_s", ctx, float, 0.0))

    out = Path(data.get("output_dir", "out"))
    return RunConfig(system, target, seed, rng_seed, opt, ensemble, penalty, quant, pad,
                     out if out.is_absolute() else base / out, delays, path)


def insert_delays(sequence: ControlSequence, delays) -> ControlSequence:
    """Insert delay steps after the given (zero-based) pulse steps."""
    if not delays:
        return sequence
    steps = sequence.steps
    from .propagation import Delay

    for after, duration in sorted(delays, reverse=True):
        if not 0 <= after < len(steps):
            raise ConfigError(f"delay position {after} outside the {len(steps)}-step seed")
        steps.insert(after + 1, Delay(duration))
    return ControlSequence.from_steps(steps, sequence.n_controls, **sequence.metadata)
