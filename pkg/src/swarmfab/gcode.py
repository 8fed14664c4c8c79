"""G-code parsing and interpretation into machine-independent motion segments.

Supported dialect: a minimal Marlin-style subset.  G0/G1 linear moves,
G2/G3 arcs (XY plane, I/J or R form), G20/G21 units, G28 home, G90/G91
positioning mode, G92 datum rebind, M82/M83 extrusion mode.  All other
M codes pass through as metadata events.  Feed words are mm/min in the
source and mm/s internally.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Optional

from .errors import (
    DegenerateArc,
    DuplicateParam,
    GcodeError,
    InconsistentArc,
    MalformedNumber,
    UnknownWord,
    UnsupportedGCode,
)

PARAM_LETTERS = frozenset("XYZEFIJRSP")
COMMAND_LETTERS = frozenset("GM")

SUPPORTED_G = frozenset({0, 1, 2, 3, 20, 21, 28, 90, 91, 92})

DEFAULT_FEED_MM_S = 20.0
INCH_TO_MM = 25.4

_NUMBER_RE = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)")


@dataclass(frozen=True)
class GcodeCommand:
    """One structured G or M word with its parameters."""

    line_no: int
    letter: str  # "G" or "M"
    code: int
    params: dict[str, float] = field(default_factory=dict)
    comment: Optional[str] = None


@dataclass(frozen=True)
class MetadataEvent:
    """Non-motion M code recorded alongside the segment stream."""

    line_no: int
    letter: str
    code: int
    params: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class InterpreterState:
    """Modal state threaded through interpretation.

    `position` and `extrusion_total` are physical; G92 rebinds shift the
    logical datum via `offset` / `e_offset` (logical = physical - offset).
    """

    position: tuple[float, float, float] = (0.0, 0.0, 0.0)
    extrusion_total: float = 0.0
    feed: float = DEFAULT_FEED_MM_S  # mm/s
    positioning_mode: str = "absolute"  # absolute | relative
    extrusion_mode: str = "absolute"
    units: str = "mm"  # mm | inch
    offset: tuple[float, float, float] = (0.0, 0.0, 0.0)
    e_offset: float = 0.0


@dataclass(frozen=True)
class MotionSegment:
    """A straight-line tool move between two cartesian points."""

    start: tuple[float, float, float]
    end: tuple[float, float, float]
    feed: float  # mm/s
    extrusion_delta: float  # mm of filament; <= 0 means travel
    kind: str  # travel | print
    source_line: int

    @property
    def length(self) -> float:
        return math.dist(self.start, self.end)


@dataclass(frozen=True)
class InterpretResult:
    segments: list[MotionSegment]
    events: list[MetadataEvent]
    final_state: InterpreterState


def _strip_comments(text: str) -> tuple[str, Optional[str]]:
    """Remove `;`-to-EOL and `( ... )` comments; return (code, first comment)."""
    comment = None
    out = []
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == ";":
            body = text[i + 1:].strip()
            if comment is None and body:
                comment = body
            break
        if c == "(":
            close = text.find(")", i + 1)
            if close < 0:
                body = text[i + 1:].strip()
                if comment is None and body:
                    comment = body
                break
            body = text[i + 1:close].strip()
            if comment is None and body:
                comment = body
            i = close + 1
            continue
        out.append(c)
        i += 1
    return "".join(out), comment


def parse_line(text: str, line_no: int = 1) -> Optional[GcodeCommand]:
    """Parse one source line; returns None for blank or comment-only lines."""
    if "\n" in text or "\r" in text:
        raise GcodeError("parse_line expects a single line", line_no)
    code_text, comment = _strip_comments(text)
    code_text = code_text.strip()
    if not code_text:
        return None

    letter = None
    code = None
    params: dict[str, float] = {}
    i = 0
    n = len(code_text)
    while i < n:
        c = code_text[i]
        if c.isspace():
            i += 1
            continue
        word_letter = c.upper()
        m = _NUMBER_RE.match(code_text, i + 1)
        if word_letter in COMMAND_LETTERS:
            if letter is not None:
                raise GcodeError("multiple G/M words on one line", line_no)
            if m is None:
                raise MalformedNumber(f"missing number after {word_letter}", line_no)
            value = float(m.group())
            if value < 0 or value != int(value):
                raise MalformedNumber(
                    f"{word_letter} code must be a non-negative integer", line_no
                )
            letter, code = word_letter, int(value)
        elif word_letter in PARAM_LETTERS:
            if m is None:
                raise MalformedNumber(f"missing number after {word_letter}", line_no)
            if word_letter in params:
                raise DuplicateParam(f"duplicate parameter {word_letter}", line_no)
            params[word_letter] = float(m.group())
        else:
            raise UnknownWord(f"unknown word letter {word_letter!r}", line_no)
        i = m.end()

    if letter is None:
        raise UnknownWord("line has parameters but no G/M word", line_no)
    return GcodeCommand(line_no=line_no, letter=letter, code=code,
                        params=params, comment=comment)


def parse_program(text: str) -> list[GcodeCommand]:
    """Parse a whole program; skips blank/comment lines, aborts on first error."""
    commands = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        cmd = parse_line(raw, line_no)
        if cmd is not None:
            commands.append(cmd)
    return commands


_PARAM_ORDER = "XYZEFIJRSP"


def serialize_command(cmd: GcodeCommand) -> str:
    parts = [f"{cmd.letter}{cmd.code}"]
    for letter in _PARAM_ORDER:
        if letter in cmd.params:
            parts.append(f"{letter}{cmd.params[letter]!r}")
    text = " ".join(parts)
    if cmd.comment:
        text += f" ; {cmd.comment}"
    return text


def serialize_program(commands: list[GcodeCommand]) -> str:
    return "\n".join(serialize_command(c) for c in commands) + "\n"


def _scale(state: InterpreterState) -> float:
    return INCH_TO_MM if state.units == "inch" else 1.0


def _resolve_target(state: InterpreterState, params: dict[str, float]) -> tuple[float, float, float]:
    s = _scale(state)
    x, y, z = state.position
    if state.positioning_mode == "absolute":
        if "X" in params:
            x = params["X"] * s + state.offset[0]
        if "Y" in params:
            y = params["Y"] * s + state.offset[1]
        if "Z" in params:
            z = params["Z"] * s + state.offset[2]
    else:
        x += params.get("X", 0.0) * s
        y += params.get("Y", 0.0) * s
        z += params.get("Z", 0.0) * s
    return (x, y, z)


def _extrusion_delta(state: InterpreterState, params: dict[str, float]) -> float:
    if "E" not in params:
        return 0.0
    e = params["E"] * _scale(state)
    if state.extrusion_mode == "absolute":
        return e + state.e_offset - state.extrusion_total
    return e


def _feed_update(state: InterpreterState, params: dict[str, float]) -> InterpreterState:
    if "F" in params:
        f = params["F"] * _scale(state) / 60.0  # mm/min -> mm/s
        if f <= 0:
            raise GcodeError("feed must be positive")
        state = replace(state, feed=f)
    return state


def _segment_count(theta: float, radius: float, chord_tol: float) -> int:
    """Chord count for an arc sweep; each chord must subtend < pi."""
    x = 1.0 - chord_tol / radius
    if x >= 1.0:
        step = 0.0
    else:
        step = math.acos(max(-1.0, x))
    n = 1 if step <= 0 else max(1, math.ceil(theta / step - 1e-12))
    k = theta / math.pi
    if abs(k - round(k)) < 1e-9:
        n_min = int(round(k)) + 1
    else:
        n_min = math.ceil(k)
    return max(n, n_min, 1)


def flatten_arc(cmd: GcodeCommand, state: InterpreterState,
                chord_tol: float) -> list[MotionSegment]:
    """Flatten a G2/G3 arc into chords within chord_tol of the true circle."""
    if chord_tol <= 0:
        raise ValueError("chord_tol must be positive")
    clockwise = cmd.code == 2
    s = _scale(state)
    start = state.position
    end = _resolve_target(state, cmd.params)
    sx, sy = start[0], start[1]
    ex, ey = end[0], end[1]

    if "I" in cmd.params or "J" in cmd.params:
        cx = sx + cmd.params.get("I", 0.0) * s
        cy = sy + cmd.params.get("J", 0.0) * s
        r0 = math.hypot(sx - cx, sy - cy)
        r1 = math.hypot(ex - cx, ey - cy)
        if r0 <= 0:
            raise DegenerateArc("arc radius is zero", cmd.line_no)
        if abs(r0 - r1) > 1e-6 * r0:
            raise InconsistentArc(
                f"start/end radii differ: {r0:.9g} vs {r1:.9g}", cmd.line_no
            )
        radius = 0.5 * (r0 + r1)
    elif "R" in cmd.params:
        r_signed = cmd.params["R"] * s
        radius = abs(r_signed)
        if radius <= 0:
            raise DegenerateArc("arc radius must be positive", cmd.line_no)
        q = math.hypot(ex - sx, ey - sy)
        if q < 1e-12:
            raise DegenerateArc("R-form arc with coincident endpoints", cmd.line_no)
        if radius < q / 2 - 1e-9:
            raise InconsistentArc("radius smaller than half the chord", cmd.line_no)
        h = math.sqrt(max(0.0, radius * radius - (q / 2) ** 2))
        mx, my = (sx + ex) / 2, (sy + ey) / 2
        px, py = -(ey - sy) / q, (ex - sx) / q
        best = None
        for sign in (1.0, -1.0):
            ccx, ccy = mx + sign * h * px, my + sign * h * py
            sweep = _arc_sweep(sx, sy, ex, ey, ccx, ccy, clockwise)
            minor = sweep <= math.pi + 1e-12
            if (r_signed > 0) == minor:
                best = (ccx, ccy)
                break
        if best is None:  # numerical tie: fall back to first candidate
            best = (mx + h * px, my + h * py)
        cx, cy = best
    else:
        raise GcodeError("arc needs I/J or R", cmd.line_no)

    theta = _arc_sweep(sx, sy, ex, ey, cx, cy, clockwise)
    if theta < 1e-12:
        theta = 2 * math.pi  # start == end with I/J: full circle

    n = _segment_count(theta, radius, chord_tol)
    a0 = math.atan2(sy - cy, sx - cx)
    direction = -1.0 if clockwise else 1.0
    e_total = _extrusion_delta(state, cmd.params)
    feed_state = _feed_update(state, cmd.params)
    feed = feed_state.feed
    kind = "print" if e_total > 0 else "travel"

    segments = []
    prev = start
    prev_e = 0.0
    for i in range(1, n + 1):
        if i == n:
            pt = end  # endpoints exact
        else:
            a = a0 + direction * theta * i / n
            pt = (cx + radius * math.cos(a), cy + radius * math.sin(a),
                  start[2] + (end[2] - start[2]) * i / n)
        cum_e = e_total * i / n
        segments.append(MotionSegment(
            start=prev, end=pt, feed=feed,
            extrusion_delta=cum_e - prev_e, kind=kind,
            source_line=cmd.line_no,
        ))
        prev, prev_e = pt, cum_e
    return segments


def _arc_sweep(sx, sy, ex, ey, cx, cy, clockwise: bool) -> float:
    """Swept angle from start to end in the commanded direction, in [0, 2pi)."""
    a0 = math.atan2(sy - cy, sx - cx)
    a1 = math.atan2(ey - cy, ex - cx)
    if clockwise:
        sweep = (a0 - a1) % (2 * math.pi)
    else:
        sweep = (a1 - a0) % (2 * math.pi)
    return sweep


def interpret(commands: list[GcodeCommand],
              initial: Optional[InterpreterState] = None,
              home: tuple[float, float, float] = (0.0, 0.0, 0.0),
              chord_tol: float = 0.05) -> InterpretResult:
    """Execute parsed commands into a chained list of MotionSegments."""
    state = initial if initial is not None else InterpreterState(position=home)
    segments: list[MotionSegment] = []
    events: list[MetadataEvent] = []

    for cmd in commands:
        if cmd.letter == "M":
            if cmd.code == 82:
                state = replace(state, extrusion_mode="absolute")
            elif cmd.code == 83:
                state = replace(state, extrusion_mode="relative")
            else:
                events.append(MetadataEvent(cmd.line_no, "M", cmd.code,
                                            dict(cmd.params)))
            continue

        if cmd.code not in SUPPORTED_G:
            raise UnsupportedGCode(f"G{cmd.code} is not supported", cmd.line_no)

        if cmd.code in (0, 1):
            target = _resolve_target(state, cmd.params)
            delta_e = _extrusion_delta(state, cmd.params)
            state = _feed_update(state, cmd.params)
            moved = target != state.position
            if moved or delta_e != 0.0:
                kind = "print" if delta_e > 0 else "travel"
                segments.append(MotionSegment(
                    start=state.position, end=target, feed=state.feed,
                    extrusion_delta=delta_e, kind=kind,
                    source_line=cmd.line_no,
                ))
            state = replace(state, position=target,
                            extrusion_total=state.extrusion_total + delta_e)
        elif cmd.code in (2, 3):
            arc_segments = flatten_arc(cmd, state, chord_tol)
            delta_e = _extrusion_delta(state, cmd.params)
            state = _feed_update(state, cmd.params)
            segments.extend(arc_segments)
            state = replace(state, position=arc_segments[-1].end,
                            extrusion_total=state.extrusion_total + delta_e)
        elif cmd.code == 20:
            state = replace(state, units="inch")
        elif cmd.code == 21:
            state = replace(state, units="mm")
        elif cmd.code == 28:
            axes = [a for a in "XYZ" if a in cmd.params] or list("XYZ")
            x, y, z = state.position
            if "X" in axes:
                x = home[0]
            if "Y" in axes:
                y = home[1]
            if "Z" in axes:
                z = home[2]
            target = (x, y, z)
            if target != state.position:
                segments.append(MotionSegment(
                    start=state.position, end=target, feed=state.feed,
                    extrusion_delta=0.0, kind="travel",
                    source_line=cmd.line_no,
                ))
            state = replace(state, position=target)
        elif cmd.code == 90:
            state = replace(state, positioning_mode="absolute")
        elif cmd.code == 91:
            state = replace(state, positioning_mode="relative")
        elif cmd.code == 92:
            s = _scale(state)
            ox, oy, oz = state.offset
            e_off = state.e_offset
            if "X" in cmd.params:
                ox = state.position[0] - cmd.params["X"] * s
            if "Y" in cmd.params:
                oy = state.position[1] - cmd.params["Y"] * s
            if "Z" in cmd.params:
                oz = state.position[2] - cmd.params["Z"] * s
            if "E" in cmd.params:
                e_off = state.extrusion_total - cmd.params["E"] * s
            if not cmd.params:  # bare G92: all logical coordinates become 0
                ox, oy, oz = state.position
                e_off = state.extrusion_total
            state = replace(state, offset=(ox, oy, oz), e_offset=e_off)

    return InterpretResult(segments=segments, events=events, final_state=state)
