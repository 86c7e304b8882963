"""
Boundary and path geometry in polar form around the beacon.

A shape answers two questions for a bearing ``theta`` (measured from the +x
axis, beacon at the origin):

* ``radius_at`` -- how far the boundary is along that ray, R_d(theta);
* ``desired_heading_at`` -- which heading traverses the boundary there,
  psi_d(theta), for a rotation sign ``D``.

Circles are closed form. Every polygon (square, isotoxal star, or any
origin-star-shaped vertex list) goes through the same ray/edge intersection,
so corner handling lives in one place.

Rotation sign convention: ``D = +1`` gives psi_d = theta + 90 deg on a circle.
In the world frame used by :mod:`auvbound.dynamics` (x north, y east, seen
from above) that is clockwise travel. Polygons with ``D = +1`` are traversed
along their counter-clockwise storage order in (x, y), which is the same sense.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .angles import wrap, wrap_array

CW = 1
CCW = -1

_S_EPS = 1e-12


class ShapeError(ValueError):
    """Raised when a shape definition is geometrically invalid."""


@dataclass(frozen=True)
class ShapeSpec:
    """Immutable boundary description.

    Parameters
    ----------
    kind : {"circle", "polygon"}
    R0 : float
        Circle radius in metres (circles only).
    vertices : tuple of (x, y)
        Polygon vertices in metres, stored counter-clockwise. Clockwise input
        is reversed on construction.
    L : float, optional
        Characteristic length (square side; for the isotoxal star
        ``2 * m_s * tip_radius``).
    m_s : float, optional
        Slope magnitude of the star segments.
    name : str
        Free-form label ("circle", "square", "star", "polygon").
    """

    kind: str
    R0: float = 0.0
    vertices: tuple = ()
    L: float | None = None
    m_s: float | None = None
    name: str = ""
    _a: np.ndarray = field(init=False, repr=False, compare=False)
    _e: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind == "circle":
            if not (self.R0 > 0 and math.isfinite(self.R0)):
                raise ShapeError(f"circle radius must be positive, got {self.R0}")
            object.__setattr__(self, "_a", np.zeros((0, 2)))
            object.__setattr__(self, "_e", np.zeros((0, 2)))
            if not self.name:
                object.__setattr__(self, "name", "circle")
            return
        if self.kind != "polygon":
            raise ShapeError(f"unknown shape kind {self.kind!r}")

        pts = np.asarray(self.vertices, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
            raise ShapeError("polygon needs at least 3 (x, y) vertices")
        if not np.all(np.isfinite(pts)):
            raise ShapeError("polygon vertices must be finite")
        nxt = np.roll(pts, -1, axis=0)
        cross = pts[:, 0] * nxt[:, 1] - pts[:, 1] * nxt[:, 0]
        if np.all(cross < 0):
            pts = pts[::-1].copy()
            nxt = np.roll(pts, -1, axis=0)
            cross = -cross[::-1]
        if not np.all(cross > 0):
            raise ShapeError(
                "polygon is not star-shaped about the origin "
                "(some edge is not seen counter-clockwise from the beacon)"
            )
        # edges must sweep exactly one turn around the origin
        dots = pts[:, 0] * nxt[:, 0] + pts[:, 1] * nxt[:, 1]
        sweep = float(np.sum(np.arctan2(cross, dots)))
        if abs(sweep - 2 * math.pi) > 1e-9:
            raise ShapeError(
                f"polygon winds {sweep / (2 * math.pi):.3f} times around the "
                "origin; it must be star-shaped about the beacon"
            )
        object.__setattr__(self, "vertices", tuple((float(x), float(y)) for x, y in pts))
        object.__setattr__(self, "_a", pts)
        object.__setattr__(self, "_e", nxt - pts)
        if not self.name:
            object.__setattr__(self, "name", "polygon")

    @property
    def is_circle(self) -> bool:
        return self.kind == "circle"

    @property
    def max_radius(self) -> float:
        if self.is_circle:
            return self.R0
        return float(np.max(np.hypot(self._a[:, 0], self._a[:, 1])))

    def to_dict(self) -> dict:
        if self.is_circle:
            return {"shape": "circle", "radius": self.R0}
        if self.name == "square":
            return {"shape": "square", "side": self.L}
        if self.name == "star":
            tip = float(self._a[0, 0])
            inner = float(self._a[1, 0])
            return {"shape": "star", "tip": tip, "inner": inner}
        return {"shape": "polygon", "vertices": [list(v) for v in self.vertices]}


def circle(R0: float) -> ShapeSpec:
    return ShapeSpec(kind="circle", R0=float(R0), name="circle")


def square(L: float) -> ShapeSpec:
    """Axis-aligned square of side ``L`` centred on the beacon."""
    h = float(L) / 2.0
    verts = ((h, -h), (h, h), (-h, h), (-h, -h))
    return ShapeSpec(kind="polygon", vertices=verts, L=float(L), name="square")


def isotoxal_star(tip: float = 30.0, inner: float = 10.0) -> ShapeSpec:
    """Four-pointed star with tips on the axes at ``+-tip`` and concave
    points at ``(+-inner, +-inner)``."""
    a, b = float(tip), float(inner)
    if not 0 < b < a:
        raise ShapeError("star needs 0 < inner < tip")
    verts = (
        (a, 0.0), (b, b), (0.0, a), (-b, b),
        (-a, 0.0), (-b, -b), (0.0, -a), (b, -b),
    )
    m_s = b / (a - b)
    return ShapeSpec(kind="polygon", vertices=verts, L=2 * m_s * a, m_s=m_s, name="star")


def polygon(vertices) -> ShapeSpec:
    return ShapeSpec(kind="polygon", vertices=tuple(map(tuple, vertices)), name="polygon")


def _edge_hits(shape: ShapeSpec, theta):
    """Ray/edge intersection for an array of bearings.

    Returns (distance, edge_index) arrays. A ray through a vertex matches two
    edges at the same distance; the lower storage index wins.
    """
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    dx = np.cos(th)[:, None]
    dy = np.sin(th)[:, None]
    a = shape._a
    e = shape._e
    den = dx * e[:, 1] - dy * e[:, 0]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        t = (a[:, 0] * e[:, 1] - a[:, 1] * e[:, 0]) / den
        s = (a[:, 0] * dy - a[:, 1] * dx) / den
    ok = (den != 0) & (t > 0) & (s >= -_S_EPS) & (s <= 1 + _S_EPS)
    idx = np.argmax(ok, axis=1)  # first matching edge in storage order
    rows = np.arange(len(th))
    if not np.all(ok[rows, idx]):
        raise AssertionError("ray missed a validated star-shaped polygon")
    return t[rows, idx], idx


def radius_at(shape: ShapeSpec, theta):
    """Boundary distance R_d(theta) along the ray at bearing ``theta``.

    Accepts a scalar or an array of bearings and returns the same form.
    """
    if shape.is_circle:
        if np.ndim(theta) == 0:
            return shape.R0
        return np.full(np.shape(theta), shape.R0, dtype=float)
    dist, _ = _edge_hits(shape, theta)
    if np.ndim(theta) == 0:
        return float(dist[0])
    return dist.reshape(np.shape(theta))


def edge_index_at(shape: ShapeSpec, theta) -> int:
    """Index of the polygon edge hit by the ray at ``theta``."""
    if shape.is_circle:
        raise ShapeError("circles have no edges")
    _, idx = _edge_hits(shape, theta)
    return int(idx[0])


def desired_heading_at(shape: ShapeSpec, theta, direction: int = CW):
    """Heading psi_d(theta) that follows the boundary in rotation sense ``direction``.

    Circle: theta + D*90 deg. Polygon: the direction of the edge under the
    ray, reversed for D = -1. Result normalised to (-pi, pi].
    """
    if direction not in (CW, CCW):
        raise ValueError(f"direction must be +1 or -1, got {direction}")
    if shape.is_circle:
        if np.ndim(theta) == 0:
            return wrap(theta + direction * math.pi / 2)
        return wrap_array(np.asarray(theta) + direction * math.pi / 2)
    _, idx = _edge_hits(shape, theta)
    e = shape._e[idx]
    heading = np.arctan2(e[:, 1], e[:, 0])
    if direction == CCW:
        heading = heading + math.pi
    heading = wrap_array(heading)
    if np.ndim(theta) == 0:
        return float(heading[0])
    return heading.reshape(np.shape(theta))


def contains(shape: ShapeSpec, r, theta):
    """True where the polar point (r, theta) lies on or inside the boundary."""
    inside = np.asarray(r) <= radius_at(shape, theta)
    return bool(inside) if inside.ndim == 0 else inside


def from_config(cfg: dict) -> ShapeSpec:
    """Build a shape from a scenario mapping such as ``{"shape": "circle", "radius": 30}``."""
    if "shape" not in cfg:
        raise KeyError("shape")
    kind = cfg["shape"]
    if kind == "circle":
        if "radius" not in cfg:
            raise KeyError("radius")
        return circle(cfg["radius"])
    if kind == "square":
        if "side" not in cfg:
            raise KeyError("side")
        return square(cfg["side"])
    if kind == "star":
        return isotoxal_star(cfg.get("tip", 30.0), cfg.get("inner", 10.0))
    if kind == "polygon":
        if "vertices" not in cfg:
            raise KeyError("vertices")
        return polygon(cfg["vertices"])
    raise ShapeError(f"unknown shape {kind!r}; expected circle, square, star or polygon")
