"""Billiard map on oriented lines, its two coordinate charts, orbit
generation and a flat-wall polygon table.

Indexing used throughout: the line l_n leaves the boundary point x_n with
direction u_n and hits x_{n+1}.  In the chord chart the configuration of
l_n is x_n, in the direction chart it is u_n.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .geometry import (GRAZING_TOL, ConvexBody, Ellipsoid, GeometryError,
                       GrazingError, SupportCurve2D, SurfacePoint)
from .numerics import orthonormal_frame

CORNER_TOL = 1e-6


class CornerError(GeometryError):
    pass


@dataclass(frozen=True, eq=False)
class OrientedLine:
    base: np.ndarray
    dir: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.dir, dtype=float)
        nu = np.linalg.norm(u)
        if not np.isfinite(nu) or nu == 0:
            raise ValueError("direction must be non-zero")
        object.__setattr__(self, "dir", u / nu)
        object.__setattr__(self, "base", np.asarray(self.base, dtype=float))

    def canonical(self) -> "OrientedLine":
        v = self.base - (self.base @ self.dir) * self.dir
        return OrientedLine(v, self.dir)

    def point_at(self, t: float) -> np.ndarray:
        return self.base + t * self.dir

    def distance(self, other: "OrientedLine") -> float:
        a, b = self.canonical(), other.canonical()
        return float(max(np.abs(a.base - b.base).max(), np.abs(a.dir - b.dir).max()))


@dataclass(frozen=True, eq=False)
class LChartPoint:
    x: SurfacePoint
    w: np.ndarray


@dataclass(frozen=True, eq=False)
class SChartPoint:
    u: np.ndarray
    p: np.ndarray


def reflect_direction(u, n) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return u - 2.0 * (u @ n) * n


def impact(body, line: OrientedLine) -> tuple[SurfacePoint, OrientedLine]:
    """Exit point of the line from the body and the reflected line there."""
    ts = body.line_intersections(line.base, line.dir)
    if ts is None:
        raise GrazingError("line misses or touches the body")
    y = body.surface_point(line.point_at(ts[1]))
    c = float(line.dir @ y.n)
    if abs(c) < GRAZING_TOL:
        raise GrazingError("grazing impact")
    return y, OrientedLine(y.x, reflect_direction(line.dir, y.n))


def reflect(body, line: OrientedLine) -> OrientedLine:
    """Billiard map: the outgoing line, based at the impact point."""
    return impact(body, line)[1]


def departure(body, line: OrientedLine) -> SurfacePoint:
    ts = body.line_intersections(line.base, line.dir)
    if ts is None:
        raise GrazingError("line misses or touches the body")
    return body.surface_point(line.point_at(ts[0]))


def to_L_chart(body, line: OrientedLine) -> LChartPoint:
    x = departure(body, line)
    w = x.frame.columns.T @ line.dir
    if np.linalg.norm(w) >= 1.0 - 1e-12:
        raise GrazingError("line is tangent to the body")
    return LChartPoint(x, w)


def from_L_chart(body, pt: LChartPoint) -> OrientedLine:
    w = np.asarray(pt.w, dtype=float)
    nw = float(w @ w)
    if nw >= 1.0:
        raise ValueError("|w| must be < 1")
    return OrientedLine(pt.x.x, pt.x.frame.columns @ w - math.sqrt(1.0 - nw) * pt.x.n)


def to_S_chart(body, line: OrientedLine) -> SChartPoint:
    c = line.canonical()
    F = orthonormal_frame(c.dir).columns
    return SChartPoint(c.dir, -(F.T @ c.base))


def from_S_chart(body, pt: SChartPoint) -> OrientedLine:
    F = orthonormal_frame(pt.u).columns
    return OrientedLine(-(F @ np.asarray(pt.p, dtype=float)), pt.u)


@dataclass(frozen=True, eq=False)
class BounceSequence:
    """points x_0..x_{m+1}, dirs u_0..u_m and lines l_0..l_m."""

    points: tuple
    dirs: tuple
    lines: tuple
    error: str | None = None

    def __len__(self) -> int:
        return len(self.lines)

    @property
    def chord_lengths(self) -> np.ndarray:
        return np.array([np.linalg.norm(self.points[i + 1].x - self.points[i].x)
                         for i in range(len(self.dirs))])

    def reflection_residual(self) -> float:
        res = 0.0
        for i in range(1, len(self.dirs)):
            n = self.points[i].n
            u0, u1 = self.dirs[i - 1], self.dirs[i]
            tang = np.linalg.norm((u0 - (u0 @ n) * n) - (u1 - (u1 @ n) * n))
            res = max(res, tang, abs(u0 @ n + u1 @ n))
        return float(res)

    def reversed(self) -> "BounceSequence":
        pts = tuple(reversed(self.points))
        dirs = tuple(-u for u in reversed(self.dirs))
        lines = tuple(OrientedLine(pts[i].x, dirs[i]) for i in range(len(dirs)))
        return BounceSequence(pts, dirs, lines, self.error)

    def csv_text(self) -> str:
        d = self.points[0].x.size
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["index"] + [f"x{i}" for i in range(d)] + [f"n{i}" for i in range(d)]
                    + [f"u_out{i}" for i in range(d)] + ["chord_length"])
        lengths = self.chord_lengths
        for i, u in enumerate(self.dirs):
            p = self.points[i]
            wr.writerow([i] + [repr(float(v)) for v in p.x] + [repr(float(v)) for v in p.n]
                        + [repr(float(v)) for v in u] + [repr(float(lengths[i]))])
        return buf.getvalue()


def orbit(body, start: OrientedLine, steps: int) -> BounceSequence:
    """Apply the billiard map ``steps`` times starting from ``start``.

    A grazing or corner bounce stops the iteration; the sequence computed
    so far is returned with ``error`` set.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    x = departure(body, start)
    u = start.dir
    points, dirs, lines = [x], [], []
    error = None
    for i in range(steps + 1):
        try:
            y, _ = body.ray_second_intersection(x, u)
        except GeometryError as exc:
            error = f"bounce {i}: {exc}"
            break
        dirs.append(u)
        lines.append(OrientedLine(x.x, u))
        points.append(y)
        if i == steps:
            break
        c = float(u @ y.n)
        if abs(c) < GRAZING_TOL:
            error = f"bounce {i + 1}: grazing"
            break
        x, u = y, reflect_direction(u, y.n)
    if error is not None and len(points) > len(dirs) + 1:
        points = points[:len(dirs) + 1]
    return BounceSequence(tuple(points), tuple(dirs), tuple(lines), error)


class PolygonTable:
    """Convex polygon with flat walls; vertices counterclockwise."""

    def __init__(self, vertices):
        V = np.asarray(vertices, dtype=float)
        if V.ndim != 2 or V.shape[1] != 2 or V.shape[0] < 3:
            raise GeometryError("need at least three planar vertices")
        E = np.roll(V, -1, axis=0) - V
        cross = E[:, 0] * np.roll(E, -1, axis=0)[:, 1] - E[:, 1] * np.roll(E, -1, axis=0)[:, 0]
        if np.any(cross <= 0):
            raise GeometryError("vertices must be strictly convex and counterclockwise")
        self.vertices = V
        self.edges = E
        lens = np.linalg.norm(E, axis=1)
        self.normals = np.stack([E[:, 1], -E[:, 0]], axis=1) / lens[:, None]
        if np.any(np.einsum("ij,ij->i", V, self.normals) <= 0):
            raise GeometryError("origin must lie strictly inside the polygon")
        self.dim = 2
        diffs = V[:, None, :] - V[None, :, :]
        self.diameter = float(np.sqrt((diffs**2).sum(-1)).max())

    def __repr__(self) -> str:
        return f"PolygonTable({self.vertices.tolist()})"

    def to_config(self) -> dict:
        return {"type": "polygon", "vertices": self.vertices.tolist()}

    def _edge_of(self, x) -> int:
        x = np.asarray(x, dtype=float)
        if np.min(np.linalg.norm(self.vertices - x, axis=1)) < CORNER_TOL:
            raise CornerError("point within corner tolerance")
        off = np.einsum("ij,ij->i", x - self.vertices, self.normals)
        i = int(np.argmin(np.abs(off)))
        if abs(off[i]) > 1e-8:
            raise GeometryError("point is not on the boundary")
        return i

    def normal_at(self, x) -> np.ndarray:
        return self.normals[self._edge_of(x)].copy()

    def surface_point(self, x) -> SurfacePoint:
        n = self.normal_at(x)
        return SurfacePoint(np.asarray(x, dtype=float), n, orthonormal_frame(n))

    def shape_operator(self, p: SurfacePoint) -> np.ndarray:
        return np.zeros((1, 1))

    def line_intersections(self, base, direction):
        b = np.asarray(base, dtype=float)
        u = np.asarray(direction, dtype=float)
        t_in, t_out = -np.inf, np.inf
        for v, n in zip(self.vertices, self.normals):
            num = -float((b - v) @ n)
            den = float(u @ n)
            if den == 0.0:
                if num < 0:
                    return None
                continue
            t = num / den
            if den > 0:
                t_out = min(t_out, t)
            else:
                t_in = max(t_in, t)
        if not t_in < t_out:
            return None
        return (t_in, t_out)

    def ray_second_intersection(self, q0, u):
        return ConvexBody.ray_second_intersection(self, q0, u)

    def tangent_chart(self, p: SurfacePoint, c) -> tuple[SurfacePoint, np.ndarray]:
        F = p.frame.columns
        x = p.x + F @ np.asarray(c, dtype=float)
        return SurfacePoint(x, p.n, p.frame), F.copy()


def polygon_table(vertices) -> PolygonTable:
    return PolygonTable(vertices)


def regular_polygon(k: int, radius: float = 1.0, phase: float = 0.0) -> PolygonTable:
    ang = phase + 2.0 * np.pi * np.arange(k) / k
    return PolygonTable(radius * np.stack([np.cos(ang), np.sin(ang)], axis=1))


# --- sampling -------------------------------------------------------------

def sample_boundary_point(body, rng: np.random.Generator) -> SurfacePoint:
    """Boundary point, uniform in the natural parameter of the body."""
    if isinstance(body, Ellipsoid):
        v = rng.normal(size=body.dim)
        v /= np.linalg.norm(v)
        return body.surface_point(body.semi_axes * v)
    if isinstance(body, SupportCurve2D):
        th = rng.uniform(0.0, 2.0 * np.pi)
        return body._at(body.point(th), th)
    if isinstance(body, PolygonTable):
        lens = np.linalg.norm(body.edges, axis=1)
        while True:
            s = rng.uniform(0.0, lens.sum())
            i = int(np.searchsorted(np.cumsum(lens), s, side="right"))
            i = min(i, len(lens) - 1)
            t = (s - (np.cumsum(lens)[i] - lens[i])) / lens[i]
            x = body.vertices[i] + t * body.edges[i]
            if np.min(np.linalg.norm(body.vertices - x, axis=1)) > 10 * CORNER_TOL:
                return body.surface_point(x)
    raise TypeError(f"no sampler for {body!r}")


def sample_line(body, rng: np.random.Generator, delta_min: float = 0.1) -> OrientedLine:
    """Line leaving a random boundary point at an inward angle drawn
    uniformly from (delta_min, pi - delta_min), measured from a random
    tangent direction."""
    x = sample_boundary_point(body, rng)
    F = x.frame.columns
    if F.shape[1] == 1:
        # counterclockwise tangent keeps the planar sampler orientation-fixed
        e = np.array([-x.n[1], x.n[0]])
    else:
        e = F @ rng.normal(size=F.shape[1])
        e /= np.linalg.norm(e)
    delta = rng.uniform(delta_min, np.pi - delta_min)
    return OrientedLine(x.x, math.cos(delta) * e - math.sin(delta) * x.n)
