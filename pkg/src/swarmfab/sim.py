"""Execute a Plan against the virtual robot dynamics and score fidelity."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kinematics as kin
from .coordinator import MachineConfig, Plan, Setpoint, assign_roles
from .errors import KinematicsFault, StallTimeout
from .gcode import MotionSegment
from .robot import (
    RobotState,
    goto_controller,
    rotate_controller,
    step_dynamics,
)

PROGRESS_EPS = 1e-6  # mm of setpoint-distance improvement that counts as progress


@dataclass(frozen=True)
class TraceSample:
    t: float
    poses: dict[str, tuple[float, float, float]]
    rotations: dict[str, float]
    tool_tip: tuple[float, float, float]  # from morphology FK of the poses
    tool_target: tuple[float, float, float]  # commanded target of the tick
    extruding: bool
    extrusion_total: float


@dataclass
class Trace:
    samples: list[TraceSample] = field(default_factory=list)
    events: list[str] = field(default_factory=list)
    config: MachineConfig | None = None
    barrier_wait_total: float = 0.0
    extruded_length: float = 0.0


@dataclass(frozen=True)
class FidelityReport:
    max_deviation: float
    mean_deviation: float
    per_segment_deviation: list[float]
    total_print_length: float
    total_travel_length: float
    simulated_duration: float
    barrier_wait_total: float


def _initial_states(plan: Plan, config: MachineConfig) -> dict[str, RobotState]:
    roles = assign_roles(config)
    states = {}
    if plan.ticks:
        first = plan.ticks[0]
        for rid, sp in first.setpoints.items():
            states[rid] = RobotState(
                id=rid, pose=(sp.x, sp.y, 0.0), role=roles[rid],
                params=config.robot_params(rid))
    return states


def _setpoint_error(state: RobotState, sp: Setpoint) -> float:
    if sp.kind == "rotate":
        return abs(sp.theta - state.accumulated_rotation)
    return math.hypot(sp.x - state.pose[0], sp.y - state.pose[1])


def _arrived(state: RobotState, sp: Setpoint) -> bool:
    if sp.kind == "rotate":
        return abs(sp.theta - state.accumulated_rotation) < state.params.angular_tol
    return (math.hypot(sp.x - state.pose[0], sp.y - state.pose[1])
            < state.params.arrival_tol)


def _tool_fk(states: dict[str, RobotState], config: MachineConfig,
             roles: dict[str, str], datum: tuple[float, float, float],
             datum_lengths) -> tuple[float, float, float]:
    """Tool tip from the current robot states via the morphology FK."""
    by_role = {role: states[rid] for rid, role in roles.items()
               if role != "idle" and rid in states}
    morph = config.morphology
    if morph in ("bridge_xy", "printer_bridge"):
        b1 = by_role["bridge_left"].pose[:2]
        b2 = by_role["bridge_right"].pose[:2]
        car = by_role["carriage"].pose
        offset = car[0] - config.bridge_geometry.rail1_x
        tool = kin.bridge_fk(b1, b2, offset, config.bridge_geometry,
                             sync_tol=config.sync_tol)
        if morph == "printer_bridge":
            screw = config.lead_screw
            theta = by_role["leadscrew"].accumulated_rotation
            z = datum[2] + screw.direction * theta * screw.pitch / (2 * math.pi)
        else:
            z = config.bridge_geometry.bridge_height
        return (tool[0], tool[1], z)
    if morph == "wire2d_wall":
        geom = config.wire2d_geometry
        l1 = datum_lengths[0] + geom.spool_radius * \
            by_role["extruder_spool_1"].accumulated_rotation
        l2 = datum_lengths[1] + geom.spool_radius * \
            by_role["extruder_spool_2"].accumulated_rotation
        p = kin.wire2d_fk(l1, l2, geom)
        return (p[0], p[1], 0.0)
    if morph == "wire3d_printer":
        geom = config.wire3d_geometry
        lengths = [datum_lengths[i] + geom.spool_radius *
                   by_role[f"extruder_spool_{i + 1}"].accumulated_rotation
                   for i in range(3)]
        return kin.wire3d_fk(*lengths, geom)
    raise KinematicsFault(f"no FK for morphology {morph}")


def _datum_lengths(config: MachineConfig, datum):
    if config.morphology == "wire2d_wall":
        return kin.wire2d_ik((datum[0], datum[1]), config.wire2d_geometry)
    if config.morphology == "wire3d_printer":
        return kin.wire3d_ik(datum, config.wire3d_geometry)
    return ()


def run(plan: Plan, config: MachineConfig, dt_sim: float | None = None,
        seed: int = 0) -> Trace:
    """Simulate plan execution; deterministic for a fixed (plan, config, seed)."""
    if dt_sim is None:
        dt_sim = config.dt_sim
    if dt_sim > config.dt_plan:
        raise ValueError("dt_sim must not exceed dt_plan")

    trace = Trace(config=config)
    roles = assign_roles(config)
    states = _initial_states(plan, config)
    rng = np.random.default_rng(seed) if config.noise_std > 0 else None

    if not plan.ticks:
        return trace

    datum = plan.ticks[0].tool_target
    datum_lengths = _datum_lengths(config, datum)
    order = sorted(states)
    barriers = set(plan.barriers)

    def record(t, tick, extrusion_total):
        try:
            tool = _tool_fk(states, config, roles, datum, datum_lengths)
        except kin.BridgeSkewed as exc:
            raise KinematicsFault(str(exc)) from exc
        trace.samples.append(TraceSample(
            t=round(t, 9),
            poses={rid: states[rid].pose for rid in order},
            rotations={rid: states[rid].accumulated_rotation for rid in order},
            tool_tip=tool, tool_target=tick.tool_target,
            extruding=tick.extruding,
            extrusion_total=extrusion_total))

    t = 0.0
    extrusion_prev = plan.ticks[0].extrusion_total
    record(t, plan.ticks[0], extrusion_prev)

    tick_idx = 0
    tick_entry_time = 0.0
    last_best = None
    stall_clock = 0.0
    while tick_idx < len(plan.ticks):
        tick = plan.ticks[tick_idx]
        is_barrier = tick_idx in barriers
        # pursue the current tick's setpoints
        for rid in order:
            sp = tick.setpoints.get(rid)
            if sp is None:
                continue
            st = states[rid]
            if sp.kind == "rotate":
                wheels = rotate_controller(
                    st, sp.theta - st.accumulated_rotation)
            else:
                wheels = goto_controller(st, (sp.x, sp.y))
            states[rid] = step_dynamics(
                replace(st, wheel_speeds=wheels), dt_sim, rng)
        t += dt_sim
        record(t, tick, extrusion_prev)

        all_arrived = all(_arrived(states[rid], sp)
                          for rid, sp in tick.setpoints.items() if rid in states)

        # stall detection: not arrived and no robot improving toward its setpoint
        best = sum(_setpoint_error(states[rid], sp)
                   for rid, sp in tick.setpoints.items() if rid in states)
        if all_arrived:
            stall_clock = 0.0
        elif last_best is not None and best > last_best - PROGRESS_EPS:
            stall_clock += dt_sim
        else:
            stall_clock = 0.0
        last_best = best
        if stall_clock > config.stall_timeout:
            raise StallTimeout(
                f"no progress for {config.stall_timeout} s at plan tick "
                f"{tick_idx} (t={t:.2f} s, line {tick.source_line})")

        # advance the plan clock
        deadline_met = t - tick_entry_time >= _tick_budget(plan, tick_idx) - 1e-12
        if is_barrier:
            if deadline_met and not all_arrived:
                trace.barrier_wait_total += dt_sim
            advance = deadline_met and all_arrived
        else:
            advance = deadline_met
        if advance:
            if tick.extruding:
                gained = tick.extrusion_total - extrusion_prev
                if gained > 0:
                    trace.extruded_length += gained
            extrusion_prev = tick.extrusion_total
            tick_idx += 1
            tick_entry_time = t
            last_best = None
            stall_clock = 0.0
    return trace


def _tick_budget(plan: Plan, tick_idx: int) -> float:
    """Nominal time allotted to reach tick tick_idx from its predecessor."""
    t_here = plan.ticks[tick_idx].t
    t_prev = plan.ticks[tick_idx - 1].t if tick_idx > 0 else 0.0
    return max(t_here - t_prev, 0.0)


# --- fidelity ---

def _point_segment_distance(p, a, b) -> float:
    ap = np.asarray(p, dtype=float) - np.asarray(a, dtype=float)
    ab = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
    denom = float(ab @ ab)
    if denom == 0.0:
        return float(np.linalg.norm(ap))
    s = min(1.0, max(0.0, float(ap @ ab) / denom))
    return float(np.linalg.norm(ap - s * ab))


def point_polyline_distance(p, segments: list[MotionSegment]) -> float:
    return min(_point_segment_distance(p, seg.start, seg.end)
               for seg in segments)


def measure_fidelity(trace: Trace,
                     segments: list[MotionSegment]) -> FidelityReport:
    """Deviation of extruding samples from the commanded print polyline."""
    if not trace.samples:
        raise ValueError("trace is empty")
    print_segments = [s for s in segments if s.kind == "print"]
    deviations = []
    per_segment = [0.0] * len(print_segments)
    for sample in trace.samples:
        if not sample.extruding or not print_segments:
            continue
        dists = [_point_segment_distance(sample.tool_tip, seg.start, seg.end)
                 for seg in print_segments]
        i = int(np.argmin(dists))
        deviations.append(dists[i])
        per_segment[i] = max(per_segment[i], dists[i])
    max_dev = max(deviations) if deviations else 0.0
    mean_dev = float(np.mean(deviations)) if deviations else 0.0
    return FidelityReport(
        max_deviation=max_dev,
        mean_deviation=mean_dev,
        per_segment_deviation=per_segment,
        total_print_length=sum(s.length for s in print_segments),
        total_travel_length=sum(s.length for s in segments
                                if s.kind == "travel"),
        simulated_duration=trace.samples[-1].t,
        barrier_wait_total=trace.barrier_wait_total,
    )


# --- exports ---

Z_QUANTUM = 1e-6  # mm, layer grouping quantization


def _polylines_from_samples(samples, want_extruding: bool):
    """Maximal runs of consecutive samples sharing the extruding flag.

    Each run carries a layer key taken from the commanded target z, which
    is exact; the FK tool-tip z jitters below the grouping quantum.
    """
    runs = []
    current = []
    key_z = 0.0
    for s in samples:
        if s.extruding == want_extruding:
            if not current:
                key_z = s.tool_target[2]
            current.append(s.tool_tip)
        else:
            if len(current) >= 2:
                runs.append((key_z, current))
            current = []
    if len(current) >= 2:
        runs.append((key_z, current))
    return runs


def _fmt(v: float) -> str:
    return f"{v:.6f}"


def export_svg(source, *, workspace=None, include_travel: bool = True) -> str:
    """Render print (solid) and travel (dashed) polylines grouped by layer z.

    `source` is a Trace or a list of MotionSegments.
    """
    if isinstance(source, Trace):
        print_polys = _polylines_from_samples(source.samples, True)
        travel_polys = _polylines_from_samples(source.samples, False)
        if workspace is None and source.config is not None:
            workspace = (source.config.workspace_min, source.config.workspace_max)
    else:
        print_polys = _merge_chains(
            [(seg.start[2], [seg.start, seg.end]) for seg in source
             if seg.kind == "print"])
        travel_polys = _merge_chains(
            [(seg.start[2], [seg.start, seg.end]) for seg in source
             if seg.kind == "travel"])

    all_points = [p for _, poly in print_polys + travel_polys for p in poly]
    if workspace is not None:
        lo, hi = workspace
        min_x, min_y = lo[0], lo[1]
        max_x, max_y = hi[0], hi[1]
    elif all_points:
        min_x = min(p[0] for p in all_points)
        max_x = max(p[0] for p in all_points)
        min_y = min(p[1] for p in all_points)
        max_y = max(p[1] for p in all_points)
    else:
        min_x = min_y = 0.0
        max_x = max_y = 1.0
    width = max(max_x - min_x, 1e-6)
    height = max(max_y - min_y, 1e-6)

    def layer_key(z):
        return round(z / Z_QUANTUM) * Z_QUANTUM

    layers: dict[float, dict[str, list]] = {}
    for z, poly in print_polys:
        layers.setdefault(layer_key(z), {"print": [], "travel": []})["print"].append(poly)
    if include_travel:
        for z, poly in travel_polys:
            layers.setdefault(layer_key(z), {"print": [], "travel": []})["travel"].append(poly)

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'viewBox="{_fmt(min_x)} {_fmt(min_y)} {_fmt(width)} {_fmt(height)}" '
        f'width="{_fmt(width)}mm" height="{_fmt(height)}mm">',
    ]
    for z in sorted(layers):
        lines.append(f'<g id="layer-z{_fmt(z)}">')
        for poly in layers[z]["travel"]:
            pts = " ".join(f"{_fmt(p[0])},{_fmt(p[1])}" for p in poly)
            lines.append(
                f'<polyline points="{pts}" fill="none" stroke="#999999" '
                f'stroke-width="0.2" stroke-dasharray="2,2"/>')
        for poly in layers[z]["print"]:
            pts = " ".join(f"{_fmt(p[0])},{_fmt(p[1])}" for p in poly)
            lines.append(
                f'<polyline points="{pts}" fill="none" stroke="#000000" '
                f'stroke-width="0.4"/>')
        lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def _merge_chains(polys):
    """Concatenate same-layer polylines whose endpoints coincide."""
    merged = []
    for z, poly in polys:
        if merged and merged[-1][0] == z and merged[-1][1][-1] == poly[0]:
            merged[-1][1].extend(poly[1:])
        else:
            merged.append((z, list(poly)))
    return merged


def export_csv(trace: Trace) -> str:
    """Flat per-robot per-sample table with fixed 6-decimal formatting."""
    lines = ["t,robot_id,x,y,heading,tool_x,tool_y,tool_z,extruding"]
    for s in trace.samples:
        for rid in sorted(s.poses):
            x, y, heading = s.poses[rid]
            lines.append(
                f"{s.t:.6f},{rid},{x:.6f},{y:.6f},{heading:.6f},"
                f"{s.tool_tip[0]:.6f},{s.tool_tip[1]:.6f},"
                f"{s.tool_tip[2]:.6f},{int(s.extruding)}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class OverlapEvent:
    t: float
    robot_a: str
    robot_b: str
    distance: float


def overlap_diagnostic(trace: Trace, config: MachineConfig) -> list[OverlapEvent]:
    """Report samples where two robot body circles intersect (non-fatal)."""
    radii = {e.id: e.params.body_radius for e in config.roster}
    events = []
    for s in trace.samples:
        ids = sorted(s.poses)
        for i, a in enumerate(ids):
            for b in ids[i + 1:]:
                d = math.hypot(s.poses[a][0] - s.poses[b][0],
                               s.poses[a][1] - s.poses[b][1])
                if d < radii.get(a, 16.0) + radii.get(b, 16.0):
                    events.append(OverlapEvent(s.t, a, b, d))
    return events
