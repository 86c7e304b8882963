"""
Planar under-actuated AUV model.

Each vehicle is driven by a surge force ``fx`` and an absolute heading
command. Heading slews toward the command at a constant rate; surge and sway
see linear plus quadratic drag; body velocities are rotated into the world
frame with

    x += (u cos psi + v sin psi) dt
    y += (u sin psi - v cos psi) dt

which fixes the world frame (x north, y east, headings clockwise seen from
above). A constant ambient flow is added to the displacement as pure
advection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .angles import wrap

# identified hydrodynamic coefficients of the reference vehicle
XU = 0.1
XUU = 4.04
YV = 0.1
YVV = 20.0


@dataclass(frozen=True)
class DynamicsParams:
    Xu: float = XU
    Xuu: float = XUU
    Yv: float = YV
    Yvv: float = YVV
    m: float = 6.0  # dry 4 kg plus added-mass allowance
    psi_rate_max: float = math.radians(30.0)
    dt: float = 0.05

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError(f"mass must be positive, got {self.m}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.psi_rate_max > 0:
            raise ValueError(f"psi_rate_max must be positive, got {self.psi_rate_max}")
        for name in ("Xu", "Xuu", "Yv", "Yvv"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class AgentState:
    x: float = 0.0
    y: float = 0.0
    u: float = 0.0
    v: float = 0.0
    psi: float = 0.0
    psi_cmd: float = 0.0
    fx: float = 0.0

    def __post_init__(self):
        vals = (self.x, self.y, self.u, self.v, self.psi, self.psi_cmd, self.fx)
        if not all(math.isfinite(val) for val in vals):
            raise ValueError(f"non-finite agent state {self}")
        object.__setattr__(self, "psi", wrap(self.psi))
        object.__setattr__(self, "psi_cmd", wrap(self.psi_cmd))

    @property
    def r(self) -> float:
        return math.hypot(self.x, self.y)

    @property
    def theta(self) -> float:
        """Bearing of the agent seen from the beacon."""
        return math.atan2(self.y, self.x)

    def world_velocity(self, flow=(0.0, 0.0)) -> tuple[float, float]:
        c, s = math.cos(self.psi), math.sin(self.psi)
        return (self.u * c + self.v * s + flow[0], self.u * s - self.v * c + flow[1])

    def radial_speed(self, flow=(0.0, 0.0)) -> float:
        """d r / d t at this instant (positive when receding)."""
        r = self.r
        if r == 0.0:
            return 0.0
        vx, vy = self.world_velocity(flow)
        return (self.x * vx + self.y * vy) / r


def slew_heading(psi: float, psi_cmd: float, max_step: float) -> float:
    """Rotate ``psi`` toward ``psi_cmd`` along the shorter arc by at most ``max_step``."""
    err = wrap(psi_cmd - psi)
    if abs(err) <= max_step:
        return wrap(psi_cmd)
    return wrap(psi + math.copysign(max_step, err))


def step(state: AgentState, params: DynamicsParams, flow=(0.0, 0.0)) -> AgentState:
    """Advance one agent by ``params.dt``."""
    dt = params.dt
    psi = slew_heading(state.psi, state.psi_cmd, params.psi_rate_max * dt)

    u, v = state.u, state.v
    f_u = state.fx - params.Xuu * u * abs(u) - params.Xu * u
    f_v = -params.Yvv * v * abs(v) - params.Yv * v
    u = u + f_u / params.m * dt
    v = v + f_v / params.m * dt

    c, s = math.cos(psi), math.sin(psi)
    x = state.x + (u * c + v * s) * dt + flow[0] * dt
    y = state.y + (u * s - v * c) * dt + flow[1] * dt
    return replace(state, x=x, y=y, u=u, v=v, psi=psi)


def terminal_surge_speed(params: DynamicsParams, fx: float) -> float:
    """Non-negative root of ``Xuu u^2 + Xu u = fx``."""
    if fx < 0:
        raise ValueError("fx must be non-negative")
    if fx == 0:
        return 0.0
    a, b = params.Xuu, params.Xu
    if a == 0:
        if b == 0:
            return math.inf
        return fx / b
    return (-b + math.sqrt(b * b + 4 * a * fx)) / (2 * a)
