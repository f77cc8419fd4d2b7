"""Convex bodies centered at the origin: ellipsoids in any dimension and
planar curves given by a Fourier support function.

Each body exposes the Gauss map, its inverse, the shape operator in the
tangent frame of a point, line/ray intersections and a local chart of the
surface whose second derivatives are normal at the base point.  In such a
chart coordinate Hessians coincide with covariant Hessians.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import Frame, orthonormal_frame

GRAZING_TOL = 1e-10
ON_SURFACE_TOL = 1e-8
NEWTON_MAXITER = 50


class GeometryError(ValueError):
    pass


class GrazingError(GeometryError):
    pass


class ConvergenceError(GeometryError):
    pass


@dataclass(frozen=True, eq=False)
class SurfacePoint:
    x: np.ndarray
    n: np.ndarray
    frame: Frame
    param: float | None = None  # normal angle, planar support curves only

    @property
    def tangent(self) -> np.ndarray:
        return self.frame.columns


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


class ConvexBody:
    dim: int
    diameter: float

    def normal_at(self, x) -> np.ndarray:
        raise NotImplementedError

    def surface_point(self, x) -> SurfacePoint:
        raise NotImplementedError

    def inverse_gauss(self, n) -> SurfacePoint:
        raise NotImplementedError

    def shape_operator(self, p: SurfacePoint) -> np.ndarray:
        raise NotImplementedError

    def line_intersections(self, base, direction):
        """Parameters t_in < t_out where base + t*direction crosses the
        boundary, or None when the line misses or touches the body."""
        raise NotImplementedError

    def tangent_chart(self, p: SurfacePoint, c) -> tuple[SurfacePoint, np.ndarray]:
        """Surface point with tangential coordinates c around p, and the
        d x (d-1) Jacobian of the chart there."""
        raise NotImplementedError

    def to_config(self) -> dict:
        raise NotImplementedError

    def support(self, n) -> float:
        return float(self.inverse_gauss(n).x @ np.asarray(n, float))

    def ray_second_intersection(self, q0, u) -> tuple[SurfacePoint, float]:
        """Forward exit point of the ray q0 + t u, t > 0.

        ``q0`` is a point inside the body or a point on the boundary (array
        or SurfacePoint); in the latter case ``u`` must point inward.
        """
        u = _unit(u)
        if isinstance(q0, SurfacePoint):
            c = float(u @ q0.n)
            if abs(c) < GRAZING_TOL:
                raise GrazingError("grazing start direction")
            if c > 0:
                raise GeometryError("direction points out of the body")
            q0 = q0.x
        q0 = np.asarray(q0, dtype=float)
        ts = self.line_intersections(q0, u)
        if ts is None:
            raise GrazingError("ray misses or is tangent to the body")
        t = ts[1]
        if t <= 1e-10 * self.diameter:
            raise GeometryError("no forward intersection (start outside body?)")
        return self.surface_point(q0 + t * u), float(t)


class Ellipsoid(ConvexBody):
    """Surface sum_i x_i^2 / a_i^2 = 1."""

    def __init__(self, semi_axes):
        a = np.asarray(semi_axes, dtype=float)
        if a.ndim != 1 or a.size < 2 or not np.all(np.isfinite(a)) or np.any(a <= 0):
            raise GeometryError("semi-axes must be >= 2 positive numbers")
        self.semi_axes = a
        self.dim = a.size
        self._w = 1.0 / a**2
        self.diameter = 2.0 * float(a.max())

    def __repr__(self) -> str:
        return f"Ellipsoid({self.semi_axes.tolist()})"

    def to_config(self) -> dict:
        return {"type": "ellipsoid", "semi_axes": self.semi_axes.tolist()}

    def level(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(self._w @ (x * x) - 1.0)

    def normal_at(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if abs(self.level(x)) > ON_SURFACE_TOL:
            raise GeometryError("point is not on the surface")
        return _unit(self._w * x)

    def surface_point(self, x) -> SurfacePoint:
        x = np.asarray(x, dtype=float)
        n = self.normal_at(x)
        return SurfacePoint(x, n, orthonormal_frame(n))

    def inverse_gauss(self, n) -> SurfacePoint:
        n = np.asarray(n, dtype=float)
        if abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise GeometryError("normal must be a unit vector")
        a2 = self.semi_axes**2
        x = a2 * n / math.sqrt(float(a2 @ (n * n)))
        return SurfacePoint(x, n.copy(), orthonormal_frame(n))

    def shape_operator(self, p: SurfacePoint) -> np.ndarray:
        g = self._w * p.x
        F = p.frame.columns
        K = (F.T * self._w) @ F / np.linalg.norm(g)
        return 0.5 * (K + K.T)

    def line_intersections(self, base, direction):
        b = np.asarray(base, dtype=float)
        u = np.asarray(direction, dtype=float)
        qa = float(self._w @ (u * u))
        qb = float(self._w @ (b * u))
        qc = self.level(b)
        disc = qb * qb - qa * qc
        if disc <= 0.0:
            return None
        sq = math.sqrt(disc)
        q = -(qb + math.copysign(sq, qb))
        if q == 0.0:
            return None
        r1, r2 = q / qa, qc / q
        return (min(r1, r2), max(r1, r2))

    def tangent_chart(self, p: SurfacePoint, c) -> tuple[SurfacePoint, np.ndarray]:
        F = p.frame.columns
        n = p.n
        y = p.x + F @ np.asarray(c, dtype=float)
        qa = float(self._w @ (n * n))
        qb = float(self._w @ (y * n))
        qc = self.level(y)
        disc = qb * qb - qa * qc
        if disc < 0.0:
            raise GeometryError("chart coordinate outside the chart domain")
        q = -(qb + math.copysign(math.sqrt(disc), qb))
        t = qc / q  # the root closest to zero
        x = y + t * n
        g = self._w * x
        dt = -(g @ F) / (g @ n)
        E = F + np.outer(n, dt)
        return self.surface_point(x), E


class SupportCurve2D(ConvexBody):
    """Planar convex curve with support function
    h(theta) = a0 + sum_k cos_k cos(k theta) + sin_k sin(k theta), k >= 1.

    Points are x(theta) = h n + h' n_perp with n = (cos, sin) and
    n_perp = (-sin, cos); theta is the normal angle and the radius of
    curvature is rho = h + h''.
    """

    GRID = 720
    SCAN = 64

    def __init__(self, a0: float, cos=(), sin=()):
        self.a0 = float(a0)
        self.cos = np.asarray(cos, dtype=float).reshape(-1)
        self.sin = np.asarray(sin, dtype=float).reshape(-1)
        self.dim = 2
        theta = np.linspace(0.0, 2.0 * np.pi, self.GRID, endpoint=False)
        h, _, h2 = self._h(theta)
        if not np.all(np.isfinite(h)) or np.any(h <= 0):
            raise GeometryError("origin must lie strictly inside the curve")
        if np.any(h + h2 <= 0):
            raise GeometryError("radius of curvature h + h'' must be positive")
        self._grid = theta
        self._grid_pts = self.point(theta)
        widths = h + self._h(theta + np.pi)[0]
        self.diameter = float(widths.max())

    def __repr__(self) -> str:
        return f"SupportCurve2D(a0={self.a0}, cos={self.cos.tolist()}, sin={self.sin.tolist()})"

    def to_config(self) -> dict:
        return {"type": "support2d",
                "coeffs": {"a0": self.a0, "cos": self.cos.tolist(), "sin": self.sin.tolist()}}

    def _h_scalar(self, th: float):
        h, h1, h2 = self.a0, 0.0, 0.0
        for k, c in enumerate(self.cos, start=1):
            ck, sk = math.cos(k * th), math.sin(k * th)
            h += c * ck
            h1 -= c * k * sk
            h2 -= c * k * k * ck
        for k, s in enumerate(self.sin, start=1):
            ck, sk = math.cos(k * th), math.sin(k * th)
            h += s * sk
            h1 += s * k * ck
            h2 -= s * k * k * sk
        return h, h1, h2

    def _h(self, theta):
        if isinstance(theta, float):
            return self._h_scalar(theta)
        theta = np.asarray(theta, dtype=float)
        h = np.full_like(theta, self.a0)
        h1 = np.zeros_like(theta)
        h2 = np.zeros_like(theta)
        for k, c in enumerate(self.cos, start=1):
            ck, sk = np.cos(k * theta), np.sin(k * theta)
            h += c * ck
            h1 -= c * k * sk
            h2 -= c * k * k * ck
        for k, s in enumerate(self.sin, start=1):
            ck, sk = np.cos(k * theta), np.sin(k * theta)
            h += s * sk
            h1 += s * k * ck
            h2 -= s * k * k * sk
        return h, h1, h2

    def h(self, theta):
        return self._h(theta)[0]

    def rho(self, theta):
        h, _, h2 = self._h(theta)
        return h + h2

    def point(self, theta):
        if isinstance(theta, float):
            h, h1, _ = self._h_scalar(theta)
            c, s = math.cos(theta), math.sin(theta)
            return np.array([h * c - h1 * s, h * s + h1 * c])
        h, h1, _ = self._h(theta)
        c, s = np.cos(theta), np.sin(theta)
        return np.stack([h * c - h1 * s, h * s + h1 * c], axis=-1)

    def param_of(self, x) -> tuple[float, float]:
        """Normal angle of the boundary point nearest to x, and the distance."""
        x = np.asarray(x, dtype=float)
        i = int(np.argmin(np.sum((self._grid_pts - x) ** 2, axis=1)))
        th = float(self._grid[i])
        for _ in range(NEWTON_MAXITER):
            h, h1, h2 = self._h_scalar(th)
            c, s = math.cos(th), math.sin(th)
            d0, d1 = h * c - h1 * s - x[0], h * s + h1 * c - x[1]
            g = -d0 * s + d1 * c
            dg = (h + h2) - (d0 * c + d1 * s)
            step = g / dg
            th -= step
            if abs(step) < 1e-15:
                break
        th = math.atan2(math.sin(th), math.cos(th))
        return th, float(np.linalg.norm(self.point(th) - x))

    def _at(self, x, th) -> SurfacePoint:
        n = np.array([math.cos(th), math.sin(th)])
        return SurfacePoint(np.asarray(x, dtype=float), n, orthonormal_frame(n), th)

    def normal_at(self, x) -> np.ndarray:
        th, dist = self.param_of(x)
        if dist > ON_SURFACE_TOL:
            raise GeometryError("point is not on the curve")
        return np.array([math.cos(th), math.sin(th)])

    def surface_point(self, x) -> SurfacePoint:
        th, dist = self.param_of(x)
        if dist > ON_SURFACE_TOL:
            raise GeometryError("point is not on the curve")
        return self._at(x, th)

    def inverse_gauss(self, n) -> SurfacePoint:
        n = np.asarray(n, dtype=float)
        if abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise GeometryError("normal must be a unit vector")
        th = math.atan2(n[1], n[0])
        return self._at(self.point(th), th)

    def shape_operator(self, p: SurfacePoint) -> np.ndarray:
        th = p.param if p.param is not None else self.param_of(p.x)[0]
        return np.array([[1.0 / float(self.rho(th))]])

    def _cross(self, theta, base, u):
        if isinstance(theta, float):
            h, h1, _ = self._h_scalar(theta)
            c, s = math.cos(theta), math.sin(theta)
            return (h * c - h1 * s - base[0]) * u[1] - (h * s + h1 * c - base[1]) * u[0]
        d = self.point(theta) - base
        return d[..., 0] * u[1] - d[..., 1] * u[0]

    def _root(self, lo, hi, flo, base, u):
        """Safeguarded Newton for the crossing function on a bracket."""
        th = 0.5 * (lo + hi)
        for _ in range(NEWTON_MAXITER):
            f = float(self._cross(th, base, u))
            if f == 0.0:
                return th
            if (f < 0) == (flo < 0):
                lo, flo = th, f
            else:
                hi = th
            r = float(self.rho(th))
            df = r * (-math.sin(th) * u[1] - math.cos(th) * u[0])
            new = th - f / df if df != 0 else 0.5 * (lo + hi)
            if not (min(lo, hi) < new < max(lo, hi)):
                new = 0.5 * (lo + hi)
            if abs(new - th) < 4e-16 * (1.0 + abs(th)) or abs(hi - lo) < 4e-16 * (1.0 + abs(th)):
                return new
            if abs(f) < 2e-16 * (1.0 + float(np.abs(base).max())):
                return th
            th = new
        raise ConvergenceError("ray intersection Newton did not converge")

    def _crossings(self, base, u):
        for samples in (self.SCAN, 8 * self.SCAN, 64 * self.SCAN):
            th = np.linspace(0.0, 2.0 * np.pi, samples + 1)
            f = self._cross(th, base, u)
            roots = []
            for i in range(samples):
                if f[i] == 0.0:
                    roots.append(float(th[i]))
                elif f[i] * f[i + 1] < 0:
                    roots.append(self._root(float(th[i]), float(th[i + 1]), float(f[i]), base, u))
            if len(roots) >= 2:
                return roots
        return roots

    def line_intersections(self, base, direction):
        b = np.asarray(base, dtype=float)
        u = _unit(direction)
        roots = self._crossings(b, u)
        if len(roots) < 2:
            return None
        ts = sorted(float((self.point(r) - b) @ u) for r in roots)
        return (ts[0], ts[-1])

    def ray_second_intersection(self, q0, u) -> tuple[SurfacePoint, float]:
        u = _unit(u)
        start = q0.x if isinstance(q0, SurfacePoint) else np.asarray(q0, dtype=float)
        if isinstance(q0, SurfacePoint):
            c = float(u @ q0.n)
            if abs(c) < GRAZING_TOL:
                raise GrazingError("grazing start direction")
            if c > 0:
                raise GeometryError("direction points out of the body")
        roots = self._crossings(start, u)
        best = None
        for r in roots:
            t = float((self.point(r) - start) @ u)
            if t > 1e-10 * self.diameter and (best is None or t > best[1]):
                best = (r, t)
        if best is None:
            raise GeometryError("no forward intersection")
        th, t = best
        return self._at(self.point(th), th), t

    def tangent_chart(self, p: SurfacePoint, c) -> tuple[SurfacePoint, np.ndarray]:
        th0 = p.param if p.param is not None else self.param_of(p.x)[0]
        t0 = p.frame.columns[:, 0]
        c = float(np.asarray(c, dtype=float).reshape(-1)[0])
        r0 = float(self.rho(th0))
        th = th0 + c / (r0 * (np.array([-math.sin(th0), math.cos(th0)]) @ t0))
        for _ in range(NEWTON_MAXITER):
            g = float((self.point(th) - p.x) @ t0) - c
            nperp = np.array([-math.sin(th), math.cos(th)])
            dg = float(self.rho(th)) * float(nperp @ t0)
            step = g / dg
            th -= step
            if abs(step) < 1e-16:
                break
        nperp = np.array([-math.sin(th), math.cos(th)])
        E = (nperp / float(nperp @ t0)).reshape(2, 1)
        return self._at(self.point(th), th), E


def body_from_config(cfg: dict) -> ConvexBody:
    kind = cfg.get("type")
    if kind == "ellipsoid":
        return Ellipsoid(cfg["semi_axes"])
    if kind == "support2d":
        co = cfg["coeffs"]
        return SupportCurve2D(co["a0"], co.get("cos", []), co.get("sin", []))
    if kind == "polygon":
        from .billiard import polygon_table
        return polygon_table(cfg["vertices"])
    raise GeometryError(f"unknown body type {kind!r}")
