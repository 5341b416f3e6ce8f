"""Command-line driver.

Exit status: 0 success, 1 usage or configuration error, 2 fidelity goal
not reached, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import gates
from .hardware import QuantizationSpec, adjust_target, padded_fidelity
from .io import (
    ConfigError,
    format_amp_phase,
    format_sequence,
    insert_delays,
    load_run_config,
    load_sequence,
    save_sequence,
    write_table,
)
from .objective import GateProblem
from .optimizer import GOAL_REACHED, ObjectiveError, OptimizerConfig, coarsening_study, optimize_sequence, seed_sequence
from .propagation import NotHermitianError
from .spins import ORE, PLE

logger = logging.getLogger("grapekit")

EXIT_OK, EXIT_USAGE, EXIT_GOAL, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _config(args):
    if not args.config:
        raise UsageError(f"'{args.command}' needs --config")
    cfg = load_run_config(args.config)
    if args.out:
        cfg.output_dir = Path(args.out)
    if args.seed is not None:
        cfg.rng_seed = args.seed
        cfg.optimizer = OptimizerConfig(**{**cfg.optimizer.__dict__, "seed": args.seed})
    return cfg


def _out_dir(args, cfg=None) -> Path:
    out = Path(args.out) if args.out else (cfg.output_dir if cfg is not None else Path("."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _problem(cfg) -> GateProblem:
    # with hardware pads the sequence must realise the adjusted target
    target = adjust_target(cfg.target, cfg.system, cfg.pad) if (cfg.pad.pre or cfg.pad.post) else cfg.target
    return GateProblem(cfg.system, target, cfg.ensemble, cfg.penalty, cfg.optimizer.gradient_mode)


def _member_rows(problem, report):
    rows = []
    for i, (m, phi) in enumerate(zip(problem.ensemble.members, report.member_fidelities)):
        ple = next((e.scale for e in m.errors if isinstance(e, PLE)), 1.0)
        ore = next((e.offset_hz for e in m.errors if isinstance(e, ORE)), 0.0)
        c = report.contaminant_fidelities[i]
        rows.append([i, float(ple), float(ore), float(m.weight), float(phi), float(min(c)) if len(c) else ""])
    return rows


def cmd_optimize(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    problem = _problem(cfg)
    seq = insert_delays(seed_sequence(cfg.seed, cfg.rng_seed), cfg.delays)
    seq.metadata["seed"] = cfg.rng_seed
    result = optimize_sequence(problem, seq, cfg.optimizer)
    save_sequence(result.sequence, out / "sequence.csv")
    write_table(out / "trace.csv", ["iteration", "objective"], [(i, float(v)) for i, v in enumerate(result.trace)])
    write_table(out / "members.csv", ["member", "ple", "ore_hz", "weight", "fidelity", "min_contaminant_fidelity"],
                _member_rows(problem, result.report))
    summary = [
        ("objective", float(result.objective)),
        ("mean_gate_fidelity", result.report.gate_fidelity),
        ("min_member_fidelity", float(np.min(result.report.member_fidelities))),
        ("penalty", float(result.report.penalty)),
        ("iterations", result.iterations),
        ("evaluations", result.evaluations),
        ("restarts", result.restarts),
        ("termination", result.termination),
    ]
    if cfg.pad.pre or cfg.pad.post:
        summary.append(("padded_fidelity", padded_fidelity(cfg.system, result.sequence, cfg.target, cfg.pad)))
    write_table(out / "summary.csv", ["quantity", "value"], summary)
    if not args.quiet:
        print(f"objective {result.objective:.10f} after {result.iterations} iterations "
              f"({result.termination}); sequence written to {out / 'sequence.csv'}")
    return EXIT_OK if result.termination == GOAL_REACHED else EXIT_GOAL


def scan_rows(problem: GateProblem, sequence, kind: str, start: float, stop: float, points: int):
    if points < 2:
        raise UsageError("a scan needs at least two points")
    kind = kind.lower()
    if kind not in ("ple", "ore"):
        raise UsageError(f"unknown scan kind {kind!r}; use ple or ore")
    rows = []
    for v in np.sort(np.linspace(start, stop, points)):
        if kind == "ple":
            errors = [PLE(v)] if v > 0 else None
        else:
            errors = [ORE(v)]
        if errors is None:
            # zero field strength: the sequence degenerates to free evolution
            phi = problem.fidelity_of(sequence.scaled(0.0))
        else:
            phi = problem.fidelity_of(sequence, errors)
        rows.append((kind.upper(), float(v), phi))
    return rows


def cmd_scan(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    problem = _problem(cfg)
    rows = scan_rows(problem, load_sequence(args.sequence), args.kind, args.start, args.stop, args.points)
    path = write_table(out / args.name, ["error_kind", "error_value", "fidelity"], rows)
    if not args.quiet:
        best = max(r[2] for r in rows)
        print(f"{len(rows)} points written to {path} (max fidelity {best:.8f})")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    problem = _problem(cfg)
    seq = load_sequence(args.sequence)
    phi = problem.fidelity_of(seq)
    report = problem.evaluate(seq, with_gradient=False)
    if args.out:
        out = _out_dir(args)
        write_table(out / "evaluate.csv", ["quantity", "value"],
                    [("fidelity", phi), ("objective", float(report.total))])
    if not args.quiet:
        print(f"fidelity {phi:.12f}")
        print(f"objective {report.total:.12f}")
    return EXIT_OK


def cmd_coarsen_study(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    problem = _problem(cfg)
    ladder = coarsening_study(load_sequence(args.sequence), problem, cfg.optimizer, depth=args.depth,
                              min_steps=args.min_steps)
    rows = []
    for rung in ladder:
        name = f"sequence_{rung.n_steps}.csv"
        save_sequence(rung.sequence, out / name)
        rows.append((rung.n_steps, float(rung.fidelity), name))
    write_table(out / "ladder.csv", ["n_steps", "fidelity", "sequence_file"], rows)
    if not args.quiet:
        for n, f, _ in rows:
            print(f"{n:6d} steps  {f:.10f}")
    return EXIT_OK


def cmd_export(args) -> int:
    seq = load_sequence(args.sequence)
    quant = None
    if args.quantize:
        if args.levels:
            if args.max_amplitude_hz is None:
                raise UsageError("--levels needs --max-amplitude-hz")
            quant = QuantizationSpec(args.levels, args.phase_resolution_deg, args.max_amplitude_hz)
        elif args.config:
            quant = load_run_config(args.config).quantization
        if quant is None:
            raise UsageError("--quantize needs --levels/--max-amplitude-hz or a config with a [hardware] section")
    if args.format == "native":
        if quant is not None:
            from .hardware import quantize
            seq = quantize(seq, quant)
        text = format_sequence(seq)
    else:
        text = format_amp_phase(seq, quant, args.delays_as_zero)
    out = _out_dir(args)
    path = out / (args.name or ("export_amp_phase.csv" if args.format == "amp_phase" else "export.csv"))
    path.write_text(text)
    if not args.quiet:
        print(f"wrote {path}")
    return EXIT_OK


def cmd_bb1(args) -> int:
    theta = np.radians(args.angle_deg)
    phase = np.radians(args.phase_deg)
    make = gates.hard_pulse if args.plain else gates.bb1
    seq = make(theta, phase, args.amplitude_hz, args.channels, args.channel)
    out = _out_dir(args)
    path = save_sequence(seq, out / (args.name or ("hard_pulse.csv" if args.plain else "bb1.csv")))
    if not args.quiet:
        if not args.plain:
            print(f"BB1 correction phase {np.degrees(gates.bb1_phase(theta)):.4f} deg")
        print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration (TOML)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="override the random seed")
    common.add_argument("--quiet", action="store_true")

    parser = argparse.ArgumentParser(prog="grapekit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", parents=[common], help="seed and optimise a sequence")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("scan", parents=[common], help="fidelity over a sweep of pulse-length or offset errors")
    p.add_argument("sequence")
    p.add_argument("--kind", default="ple", choices=["ple", "ore"])
    p.add_argument("--from", dest="start", type=float, default=0.0)
    p.add_argument("--to", dest="stop", type=float, default=2.0)
    p.add_argument("--points", type=int, default=50)
    p.add_argument("--name", default="scan.csv")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("evaluate", parents=[common], help="fidelity of a sequence file")
    p.add_argument("sequence")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("coarsen-study", parents=[common], help="halve and re-optimise repeatedly")
    p.add_argument("sequence")
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--min-steps", type=int, default=1)
    p.set_defaults(func=cmd_coarsen_study)

    p = sub.add_parser("export", parents=[common], help="write a sequence as native or amplitude/phase text")
    p.add_argument("sequence")
    p.add_argument("--format", choices=["native", "amp_phase"], default="amp_phase")
    p.add_argument("--quantize", action="store_true")
    p.add_argument("--levels", type=int)
    p.add_argument("--phase-resolution-deg", type=float, default=0.25)
    p.add_argument("--max-amplitude-hz", type=float)
    p.add_argument("--delays-as-zero", action="store_true", help="write delay steps as zero-amplitude rows")
    p.add_argument("--name")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("bb1", parents=[common], help="BB1 (or plain) hard-pulse reference sequence")
    p.add_argument("--angle-deg", type=float, default=90.0)
    p.add_argument("--phase-deg", type=float, default=0.0)
    p.add_argument("--amplitude-hz", type=float, default=25_000.0)
    p.add_argument("--channels", type=int, default=1)
    p.add_argument("--channel", type=int, default=0)
    p.add_argument("--plain", action="store_true", help="emit the uncorrected pulse instead")
    p.add_argument("--name")
    p.set_defaults(func=cmd_bb1)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError, FileNotFoundError) as exc:
        print(f"grapekit {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FloatingPointError, NotHermitianError, ObjectiveError, np.linalg.LinAlgError) as exc:
        print(f"grapekit {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"grapekit {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
