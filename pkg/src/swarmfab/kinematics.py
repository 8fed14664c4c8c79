"""Closed-form and numerical kinematics for the machine morphologies.

All units are millimetres and radians.  Wires are modeled as massless
straight lines; the bridge is rigid with the carriage as a 1-D offset
along it.  Branch selection is always the gravity side: below the anchor
line (2-wire) or below the anchor plane (3-wire).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    BridgeSkewed,
    IllConditioned,
    NoIntersection,
    OutOfWorkspace,
    Unreachable,
)

INTERSECTION_SLACK = 1e-9  # mm^2 scale slack on circle/sphere discriminants
MIN_ANCHOR_TRIANGLE_AREA = 1.0  # mm^2
DEFAULT_WORKSPACE_MARGIN = 10.0  # mm


@dataclass(frozen=True)
class BridgeGeometry:
    """Two rail robots carrying a rigid bridge along +y, carriage along it."""

    bridge_span: float  # distance between the two bridge robots along x
    carriage_min: float  # carriage travel limits measured from bridge robot 1
    carriage_max: float
    bridge_height: float = 0.0  # tool z offset when no lead screw
    rail1_x: float = 0.0  # fixed x of the bridge-robot-1 rail line

    def __post_init__(self):
        if self.bridge_span <= 0:
            raise ValueError("bridge_span must be positive")
        if not (0 <= self.carriage_min < self.carriage_max <= self.bridge_span):
            raise ValueError("carriage travel must satisfy 0 <= min < max <= span")


@dataclass(frozen=True)
class WireGeometry2D:
    """Two wire anchors on a vertical plane; coordinates are (x, z)."""

    anchors: tuple[tuple[float, float], tuple[float, float]]
    spool_radius: float
    workspace_margin: float = DEFAULT_WORKSPACE_MARGIN

    def __post_init__(self):
        a1, a2 = self.anchors
        if a1 == a2:
            raise ValueError("anchors must be distinct")
        if self.spool_radius <= 0:
            raise ValueError("spool_radius must be positive")


@dataclass(frozen=True)
class WireGeometry3D:
    """Three non-collinear wire anchors in 3-D."""

    anchors: tuple[tuple[float, float, float], ...]
    spool_radius: float
    workspace_margin: float = DEFAULT_WORKSPACE_MARGIN

    def __post_init__(self):
        if len(self.anchors) != 3:
            raise ValueError("exactly three anchors required")
        if self.spool_radius <= 0:
            raise ValueError("spool_radius must be positive")
        a = np.asarray(self.anchors, dtype=float)
        area = 0.5 * np.linalg.norm(np.cross(a[1] - a[0], a[2] - a[0]))
        if area <= MIN_ANCHOR_TRIANGLE_AREA:
            raise ValueError("anchor triangle is degenerate")


@dataclass(frozen=True)
class LeadScrew:
    """Rotation-to-linear conversion for the z axis."""

    pitch: float  # mm per revolution
    direction: int = 1  # +1 or -1
    z_min: float = 0.0
    z_max: float = 200.0

    def __post_init__(self):
        if self.pitch <= 0:
            raise ValueError("pitch must be positive")
        if self.direction not in (1, -1):
            raise ValueError("direction must be +1 or -1")
        if self.z_min >= self.z_max:
            raise ValueError("z_min must be below z_max")


# --- bridge ---

def bridge_ik(tool: tuple[float, float], geom: BridgeGeometry) -> dict:
    """Decompose a tool (x, y) into the two bridge robot positions and
    the carriage offset along the bridge."""
    x, y = tool
    offset = x - geom.rail1_x
    if not (geom.carriage_min <= offset <= geom.carriage_max):
        raise OutOfWorkspace(
            f"carriage offset {offset:.3f} outside "
            f"[{geom.carriage_min}, {geom.carriage_max}]",
            reason="CarriageTravel",
        )
    return {
        "bridge1": (geom.rail1_x, y),
        "bridge2": (geom.rail1_x + geom.bridge_span, y),
        "carriage_offset": offset,
    }


def bridge_fk(bridge1: tuple[float, float], bridge2: tuple[float, float],
              carriage_offset: float, geom: BridgeGeometry,
              sync_tol: float = 1.0) -> tuple[float, float]:
    """Tool position from the two bridge robot positions and carriage offset."""
    skew = abs(bridge1[1] - bridge2[1])
    if skew > sync_tol:
        raise BridgeSkewed(f"bridge skew {skew:.4f} mm exceeds {sync_tol} mm")
    y = 0.5 * (bridge1[1] + bridge2[1])
    return (bridge1[0] + carriage_offset, y)


# --- two-wire wall plotter ---

def wire2d_ik(p: tuple[float, float], geom: WireGeometry2D) -> tuple[float, float]:
    """Wire lengths to reach wall point p = (x, z)."""
    _check_wire2d_reachable(p, geom)
    a1, a2 = geom.anchors
    return (math.dist(p, a1), math.dist(p, a2))


def _check_wire2d_reachable(p, geom: WireGeometry2D):
    a1, a2 = geom.anchors
    m = geom.workspace_margin
    top = min(a1[1], a2[1])
    if not p[1] < top - m:
        raise Unreachable(f"point z={p[1]:.3f} not below anchors by margin {m}")
    lo, hi = min(a1[0], a2[0]), max(a1[0], a2[0])
    if not (lo + m < p[0] < hi - m):
        raise Unreachable(f"point x={p[0]:.3f} outside lateral cone")


def wire2d_fk(L1: float, L2: float, geom: WireGeometry2D) -> tuple[float, float]:
    """Wall point from wire lengths: two-circle intersection, lower branch."""
    if L1 <= 0 or L2 <= 0:
        raise NoIntersection("wire lengths must be positive")
    a1 = np.asarray(geom.anchors[0], dtype=float)
    a2 = np.asarray(geom.anchors[1], dtype=float)
    d = float(np.linalg.norm(a2 - a1))
    if L1 + L2 < d - 1e-9:
        raise NoIntersection("wires too short to meet")
    a = (L1 * L1 - L2 * L2 + d * d) / (2 * d)
    h2 = L1 * L1 - a * a
    if h2 < -INTERSECTION_SLACK * max(1.0, L1 * L1):
        raise NoIntersection("circles do not intersect")
    h = math.sqrt(max(0.0, h2))
    u = (a2 - a1) / d
    # normal pointing to the below-anchor side
    n = np.array([u[1], -u[0]])
    if n[1] > 0:
        n = -n
    if h < 1e-9:
        raise Unreachable("tangent solution lies on the anchor line")
    p = a1 + a * u + h * n
    return (float(p[0]), float(p[1]))


# --- three-wire positioner ---

def _wire3d_frame(geom: WireGeometry3D):
    a = np.asarray(geom.anchors, dtype=float)
    ex = a[1] - a[0]
    d = np.linalg.norm(ex)
    ex = ex / d
    v = a[2] - a[0]
    i = float(ex @ v)
    ey = v - i * ex
    j = np.linalg.norm(ey)
    ey = ey / j
    ez = np.cross(ex, ey)
    return a, ex, ey, ez, d, i, j


def _down_normal(geom: WireGeometry3D) -> np.ndarray:
    a = np.asarray(geom.anchors, dtype=float)
    n = np.cross(a[1] - a[0], a[2] - a[0])
    n = n / np.linalg.norm(n)
    if n[2] > 0:
        n = -n
    return n


def wire3d_ik(p: tuple[float, float, float],
              geom: WireGeometry3D) -> tuple[float, float, float]:
    """Wire lengths to reach 3-D point p below the anchor plane."""
    a = np.asarray(geom.anchors, dtype=float)
    n = _down_normal(geom)
    depth = float(n @ (np.asarray(p, dtype=float) - a[0]))
    if depth <= 0:
        raise Unreachable("point not below the anchor plane")
    pv = np.asarray(p, dtype=float)
    return tuple(float(np.linalg.norm(pv - ai)) for ai in a)


def wire3d_fk(L1: float, L2: float, L3: float,
              geom: WireGeometry3D) -> tuple[float, float, float]:
    """Trilateration of the tool point from three wire lengths.

    Solves in an anchor-aligned frame, picks the root below the anchor
    plane, then applies one Gauss-Newton step on the length residuals to
    absorb frame round-off.
    """
    a, ex, ey, ez, d, i, j = _wire3d_frame(geom)
    area = 0.5 * d * j
    if area < MIN_ANCHOR_TRIANGLE_AREA:
        raise IllConditioned("anchor triangle area below threshold")

    x = (L1 * L1 - L2 * L2 + d * d) / (2 * d)
    y = (L1 * L1 - L3 * L3 + i * i + j * j - 2 * i * x) / (2 * j)
    z2 = L1 * L1 - x * x - y * y
    if z2 < -INTERSECTION_SLACK * max(1.0, L1 * L1):
        raise NoIntersection("spheres do not intersect")
    z = math.sqrt(max(0.0, z2))

    n_down = _down_normal(geom)
    candidates = [a[0] + x * ex + y * ey + s * z * ez for s in (+1.0, -1.0)]
    depths = [float(n_down @ (c - a[0])) for c in candidates]
    p = candidates[0] if depths[0] >= depths[1] else candidates[1]

    # one Gauss-Newton step on r_i = |p - a_i| - L_i
    L = np.array([L1, L2, L3], dtype=float)
    diff = p[None, :] - a
    dist = np.linalg.norm(diff, axis=1)
    if np.all(dist > 1e-12):
        r = dist - L
        J = diff / dist[:, None]
        dp, *_ = np.linalg.lstsq(J, -r, rcond=None)
        p = p + dp
    return (float(p[0]), float(p[1]), float(p[2]))


# --- rotation conversions ---

def spool_delta(delta_length: float, spool_radius: float) -> float:
    """Spool rotation for a wire-length change; positive pays out wire."""
    if spool_radius <= 0:
        raise ValueError("spool_radius must be positive")
    return delta_length / spool_radius


def leadscrew_delta(delta_z: float, screw: LeadScrew) -> float:
    """Screw rotation for a z travel."""
    return screw.direction * 2.0 * math.pi * delta_z / screw.pitch


# --- workspace checks ---

@dataclass(frozen=True)
class WorkspaceCheck:
    ok: bool
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


def box_contains(box_min, box_max, p) -> bool:
    return all(lo <= v <= hi for lo, v, hi in zip(box_min, p, box_max))


def workspace_contains(config, p) -> WorkspaceCheck:
    """Check all morphology preconditions for tool point p = (x, y, z).

    `config` is a coordinator.MachineConfig; accepted duck-typed here to
    avoid a circular import.
    """
    if not all(math.isfinite(v) for v in p):
        return WorkspaceCheck(False, "NonFinite")
    if not box_contains(config.workspace_min, config.workspace_max, p):
        return WorkspaceCheck(False, "OutsideBox")

    morph = config.morphology
    if morph in ("bridge_xy", "printer_bridge"):
        geom = config.bridge_geometry
        offset = p[0] - geom.rail1_x
        if not (geom.carriage_min <= offset <= geom.carriage_max):
            return WorkspaceCheck(False, "CarriageTravel")
        if morph == "bridge_xy":
            if abs(p[2] - geom.bridge_height) > 1e-9:
                return WorkspaceCheck(False, "NonPlanar")
        else:
            screw = config.lead_screw
            if not (screw.z_min <= p[2] <= screw.z_max):
                return WorkspaceCheck(False, "ZTravel")
    elif morph == "wire2d_wall":
        geom = config.wire2d_geometry
        a1, a2 = geom.anchors
        m = geom.workspace_margin
        if not p[1] < min(a1[1], a2[1]) - m:
            return WorkspaceCheck(False, "AboveAnchors")
        lo, hi = min(a1[0], a2[0]), max(a1[0], a2[0])
        if not (lo + m < p[0] < hi - m):
            return WorkspaceCheck(False, "OutsideLateralCone")
        if abs(p[2]) > 1e-9:
            return WorkspaceCheck(False, "NonPlanar")
    elif morph == "wire3d_printer":
        geom = config.wire3d_geometry
        a = np.asarray(geom.anchors, dtype=float)
        n = _down_normal(geom)
        depth = float(n @ (np.asarray(p, dtype=float) - a[0]))
        if depth <= geom.workspace_margin:
            return WorkspaceCheck(False, "AboveAnchors")
    else:
        return WorkspaceCheck(False, f"UnknownMorphology:{morph}")
    return WorkspaceCheck(True)
