"""Motion stack and simulator for fabrication machines built from swarm robots.

Pipeline: g-code text -> motion segments -> per-robot setpoint plan ->
simulated execution -> fidelity report and SVG/CSV exports.
"""

from . import config, coordinator, gcode, kinematics, robot, sim  # noqa: F401

__version__ = "0.1.0"
