"""Command-line driver: parse -> interpret -> plan -> simulate -> export.

Exit codes: 0 ok, 1 usage, 2 g-code parse, 3 IO, 4 config,
5 kinematics/workspace/roster, 6 stall timeout.
Diagnostics go to stderr, data to stdout, so output can be piped.
"""

from __future__ import annotations

import argparse
import sys

from . import config as cfgmod
from . import coordinator, gcode, sim
from .coordinator import MORPHOLOGIES, REQUIRED_ROBOTS
from .errors import (
    ConfigError,
    GcodeError,
    KinematicsError,
    PlanError,
    SimError,
    StallTimeout,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARSE = 2
EXIT_IO = 3
EXIT_CONFIG = 4
EXIT_KINEMATICS = 5
EXIT_STALL = 6


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _read_text(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        print(f"error: cannot read {path}: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_IO)


def _write_text(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        print(f"error: cannot write {path}: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_IO)


def _load_segments(gcode_path: str, home=(0.0, 0.0, 0.0)):
    text = _read_text(gcode_path)
    try:
        commands = gcode.parse_program(text)
        return gcode.interpret(commands, home=home)
    except GcodeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_PARSE)


def _load_config(config_path: str):
    try:
        return cfgmod.load_config(config_path)
    except ConfigError as exc:
        print(f"error: config {config_path}: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)
    except OSError as exc:
        print(f"error: cannot read {config_path}: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_IO)


def _plan_or_exit(segments, machine):
    try:
        return coordinator.plan_program(segments, machine)
    except (KinematicsError, PlanError) as exc:
        line = getattr(exc, "line_no", None)
        loc = f" (g-code line {line})" if line else ""
        print(f"error: {exc}{loc}", file=sys.stderr)
        raise SystemExit(EXIT_KINEMATICS)


def cmd_parse(args) -> int:
    result = _load_segments(args.gcode)
    for seg in result.segments:
        print(f"{seg.kind} ({seg.start[0]:.3f},{seg.start[1]:.3f},"
              f"{seg.start[2]:.3f})->({seg.end[0]:.3f},{seg.end[1]:.3f},"
              f"{seg.end[2]:.3f}) feed={seg.feed:.3f} "
              f"e={seg.extrusion_delta:.5f} line={seg.source_line}")
    for event in result.events:
        print(f"meta M{event.code} params={event.params} line={event.line_no}",
              file=sys.stderr)
    return EXIT_OK


def cmd_plan(args) -> int:
    machine = _load_config(args.config)
    result = _load_segments(args.gcode, home=machine.home)
    plan = _plan_or_exit(result.segments, machine)
    roster_order = [e.id for e in machine.roster]
    _write_text(args.out, coordinator.serialize_command_stream(plan, roster_order))
    duration = plan.ticks[-1].t if plan.ticks else 0.0
    print(f"ticks={len(plan.ticks)} duration_s={duration:.6f} "
          f"barriers={len(plan.barriers)}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    machine = _load_config(args.config)
    dt_sim = args.dt if args.dt is not None else machine.dt_sim
    if dt_sim <= 0 or dt_sim > machine.dt_plan:
        print(f"error: --dt must be in (0, dt_plan={machine.dt_plan}]",
              file=sys.stderr)
        return EXIT_USAGE
    result = _load_segments(args.gcode, home=machine.home)
    plan = _plan_or_exit(result.segments, machine)
    try:
        trace = sim.run(plan, machine, dt_sim=dt_sim, seed=args.seed)
    except StallTimeout as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STALL
    except (SimError, KinematicsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_KINEMATICS

    for event in sim.overlap_diagnostic(trace, machine):
        print(f"warning: overlap t={event.t:.3f} {event.robot_a}/"
              f"{event.robot_b} d={event.distance:.3f}", file=sys.stderr)

    if args.svg:
        _write_text(args.svg, sim.export_svg(trace))
    if args.csv:
        _write_text(args.csv, sim.export_csv(trace))
    if args.stream:
        roster_order = [e.id for e in machine.roster]
        _write_text(args.stream,
                    coordinator.serialize_command_stream(plan, roster_order))
    if args.report:
        report = sim.measure_fidelity(trace, result.segments)
        print(f"max_deviation_mm={report.max_deviation:.6f}")
        print(f"mean_deviation_mm={report.mean_deviation:.6f}")
        print(f"total_print_length_mm={report.total_print_length:.6f}")
        print(f"total_travel_length_mm={report.total_travel_length:.6f}")
        print(f"simulated_duration_s={report.simulated_duration:.6f}")
        print(f"barrier_wait_total_s={report.barrier_wait_total:.6f}")
        print(f"extruded_length_mm={trace.extruded_length:.6f}")
    return EXIT_OK


def cmd_machines(args) -> int:
    if args.action == "list":
        for morphology in MORPHOLOGIES:
            print(f"{morphology} robots={REQUIRED_ROBOTS[morphology]}")
        return EXIT_OK
    # init
    if args.morphology not in MORPHOLOGIES:
        print(f"error: unknown morphology {args.morphology!r}", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfgmod.write_default_config(args.morphology, args.out)
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_reconfigure(args) -> int:
    config_a = _load_config(args.config_a)
    config_b = _load_config(args.config_b)
    try:
        plan = coordinator.reconfigure(config_a, config_b)
    except (PlanError, KinematicsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_KINEMATICS
    roster_order = [e.id for e in config_b.roster]
    _write_text(args.out, coordinator.serialize_command_stream(plan, roster_order))
    duration = plan.ticks[-1].t if plan.ticks else 0.0
    print(f"ticks={len(plan.ticks)} duration_s={duration:.6f} "
          f"barriers={len(plan.barriers)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="swarmfab",
                     description="Swarm-robot fabrication machine toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="dump interpreted motion segments")
    p.add_argument("gcode")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("plan", help="plan a g-code job into a command stream")
    p.add_argument("gcode")
    p.add_argument("config")
    p.add_argument("out")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="run the full pipeline in simulation")
    p.add_argument("gcode")
    p.add_argument("config")
    p.add_argument("--svg", default=None, help="write tool path SVG here")
    p.add_argument("--csv", default=None, help="write trace CSV here")
    p.add_argument("--stream", default=None, help="write command stream here")
    p.add_argument("--dt", type=float, default=None, help="sim step seconds")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", action="store_true",
                   help="print fidelity summary key=value lines")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("machines", help="list morphologies / write scaffolds")
    msub = p.add_subparsers(dest="action", required=True)
    m = msub.add_parser("list")
    m.set_defaults(func=cmd_machines, action="list")
    m = msub.add_parser("init")
    m.add_argument("morphology")
    m.add_argument("out")
    m.set_defaults(func=cmd_machines, action="init")

    p = sub.add_parser("reconfigure",
                       help="plan a transition between two machine configs")
    p.add_argument("config_a")
    p.add_argument("config_b")
    p.add_argument("out")
    p.set_defaults(func=cmd_reconfigure)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
