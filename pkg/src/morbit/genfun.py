"""Generating functions H(q, Q) with p = -dH/dq, P = dH/dQ.

Three instances: the chord length between two boundary points, the
support-based function of two unit directions, and the standard-like map
H = -((q - Q)^2/2 + V(q)).  Each returns a ``Pack`` holding the value, the
two first derivatives (covectors in the point frames) and the covariant
second derivatives as frame matrices.  The mixed block maps T_Q -> T_q and
is stored as frame(q)^T D12 frame(Q).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .billiard import OrientedLine, departure, impact, sample_line
from .geometry import GRAZING_TOL, GeometryError, SurfacePoint
from .numerics import fd_derivative, fd_hessian, orthonormal_frame, safe_inverse


class DomainError(ValueError):
    """Pair of configurations outside the domain of the generating function."""


@dataclass(frozen=True, eq=False)
class Pack:
    value: float
    d1: np.ndarray
    d2: np.ndarray
    d11: np.ndarray
    d22: np.ndarray
    d12: np.ndarray

    @property
    def d21(self) -> np.ndarray:
        return self.d12.T


def chord_pack(body, x2: SurfacePoint, x3: SurfacePoint) -> Pack:
    """Derivatives of L(x2, x3) = |x3 - x2| on the boundary."""
    d = x3.x - x2.x
    ell = float(np.linalg.norm(d))
    if ell <= 1e-12 * body.diameter:
        raise DomainError("coincident boundary points")
    u = d / ell
    c2, c3 = float(u @ x2.n), float(u @ x3.n)
    if abs(c2) < GRAZING_TOL or abs(c3) < GRAZING_TOL:
        raise DomainError("grazing chord")
    F2, F3 = x2.frame.columns, x3.frame.columns
    g, h = F2.T @ u, F3.T @ u
    r = F2.shape[1]
    eye = np.eye(r)
    d11 = (eye - np.outer(g, g)) / ell + c2 * body.shape_operator(x2)
    d22 = (eye - np.outer(h, h)) / ell - c3 * body.shape_operator(x3)
    d12 = -(F2.T @ F3 - np.outer(g, h)) / ell
    return Pack(ell, -g, h, d11, d22, d12)


def direction_pack(body, u1, u2) -> Pack:
    """Derivatives of S(u1, u2) = <G^{-1}(n), u1 - u2>, n = (u1 - u2)/|u1 - u2|."""
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    diff = u1 - u2
    delta = float(np.linalg.norm(diff))
    if delta <= 1e-12:
        raise DomainError("coincident directions")
    y = body.inverse_gauss(diff / delta)
    F1 = orthonormal_frame(u1).columns
    F2 = orthonormal_frame(u2).columns
    Kinv = safe_inverse(body.shape_operator(y), 1e12, "shape operator")
    Fy = y.frame.columns
    P1, P2 = Fy.T @ F1, Fy.T @ F2
    eye = np.eye(F1.shape[1])
    d11 = P1.T @ Kinv @ P1 / delta - float(y.x @ u1) * eye
    d22 = P2.T @ Kinv @ P2 / delta + float(y.x @ u2) * eye
    d12 = -(P1.T @ Kinv @ P2) / delta
    return Pack(float(y.x @ diff), F1.T @ y.x, -(F2.T @ y.x),
                0.5 * (d11 + d11.T), 0.5 * (d22 + d22.T), d12)


@dataclass(frozen=True)
class FourierPotential:
    """V(q) = a0 + sum_k cos_k cos(kq) + sin_k sin(kq)."""

    a0: float = 0.0
    cos: tuple = ()
    sin: tuple = ()

    def derivs(self, q: float) -> tuple[float, float, float]:
        v, v1, v2 = self.a0, 0.0, 0.0
        for k, c in enumerate(self.cos, start=1):
            ck, sk = math.cos(k * q), math.sin(k * q)
            v += c * ck
            v1 -= c * k * sk
            v2 -= c * k * k * ck
        for k, s in enumerate(self.sin, start=1):
            ck, sk = math.cos(k * q), math.sin(k * q)
            v += s * sk
            v1 += s * k * ck
            v2 -= s * k * k * sk
        return v, v1, v2

    def to_config(self) -> dict:
        return {"a0": self.a0, "cos": list(self.cos), "sin": list(self.sin)}


def standard_map_pack(V: FourierPotential, q: float, Q: float) -> Pack:
    v, v1, v2 = V.derivs(float(q))
    m = lambda x: np.array([[float(x)]])
    return Pack(-(0.5 * (q - Q) ** 2 + v),
                np.array([-(q - Q) - v1]), np.array([q - Q]),
                m(-1.0 - v2), m(-1.0), m(1.0))


def standard_map_step(V: FourierPotential, q: float, p: float) -> tuple[float, float]:
    _, v1, _ = V.derivs(q)
    return q - p + v1, p - v1


def standard_map_orbit(V: FourierPotential, q: float, p: float, steps: int) -> list[float]:
    qs = [float(q)]
    for _ in range(steps):
        q, p = standard_map_step(V, q, p)
        qs.append(float(q))
    return qs


class GeneratingFunction:
    chart: str
    rank: int

    def pack(self, q, Q) -> Pack:
        raise NotImplementedError

    def value(self, q, Q) -> float:
        raise NotImplementedError

    def frame(self, q) -> np.ndarray:
        raise NotImplementedError

    def local_point(self, q, c):
        """Configuration with chart coordinates c around q and the chart Jacobian."""
        raise NotImplementedError

    def local_map(self, q, Q, z) -> np.ndarray:
        """The induced map in canonical chart coordinates (c, p) around q and Q."""
        raise NotImplementedError

    def momentum(self, q, Q) -> np.ndarray:
        return -self.pack(q, Q).d1


class ChordGF(GeneratingFunction):
    chart = "L"

    def __init__(self, body):
        self.body = body
        self.rank = body.dim - 1

    def pack(self, q, Q) -> Pack:
        return chord_pack(self.body, q, Q)

    def value(self, q, Q) -> float:
        return float(np.linalg.norm(Q.x - q.x))

    def frame(self, q) -> np.ndarray:
        return q.frame.columns

    def local_point(self, q, c):
        return self.body.tangent_chart(q, c)

    def local_coords(self, q, point) -> np.ndarray:
        return q.frame.columns.T @ (point.x - q.x)

    def config(self, seq) -> list:
        """Base points x_n of the lines l_n (aligned with the direction chart)."""
        return list(seq.points[:len(seq.dirs)])

    def local_map(self, q, Q, z) -> np.ndarray:
        r = self.rank
        z = np.asarray(z, dtype=float)
        X, E = self.local_point(q, z[:r])
        w = E @ np.linalg.solve(E.T @ E, z[r:])
        nw = float(w @ w)
        if nw >= 1.0:
            raise DomainError("momentum outside the unit ball")
        line = OrientedLine(X.x, w - math.sqrt(1.0 - nw) * X.n)
        y, out = impact(self.body, line)
        w_out = out.dir - (out.dir @ y.n) * y.n
        C = self.local_coords(Q, y)
        _, E2 = self.local_point(Q, C)
        return np.concatenate([C, E2.T @ w_out])


def gnomonic_point(u, c) -> tuple[np.ndarray, np.ndarray]:
    F = orthonormal_frame(u).columns
    v = u + F @ np.asarray(c, dtype=float)
    nv = float(np.linalg.norm(v))
    U = v / nv
    E = (F - np.outer(U, U @ F)) / nv
    return U, E


class DirectionGF(GeneratingFunction):
    chart = "S"

    def __init__(self, body):
        if not hasattr(body, "inverse_gauss"):
            raise TypeError("the direction chart needs a body with a Gauss map")
        self.body = body
        self.rank = body.dim - 1

    def pack(self, q, Q) -> Pack:
        return direction_pack(self.body, q, Q)

    def value(self, q, Q) -> float:
        diff = np.asarray(q) - np.asarray(Q)
        y = self.body.inverse_gauss(diff / np.linalg.norm(diff))
        return float(y.x @ diff)

    def frame(self, q) -> np.ndarray:
        return orthonormal_frame(q).columns

    def local_point(self, q, c):
        return gnomonic_point(q, c)

    def local_coords(self, q, U) -> np.ndarray:
        F = orthonormal_frame(q).columns
        return F.T @ U / float(q @ U)

    def config(self, seq) -> list:
        return list(seq.dirs)

    def local_map(self, q, Q, z) -> np.ndarray:
        r = self.rank
        z = np.asarray(z, dtype=float)
        U, E = self.local_point(q, z[:r])
        p_amb = E @ np.linalg.solve(E.T @ E, z[r:])
        _, out = impact(self.body, OrientedLine(-p_amb, U))
        out = out.canonical()
        C = self.local_coords(Q, out.dir)
        _, E2 = self.local_point(Q, C)
        return np.concatenate([C, -(E2.T @ out.base)])


class StandardMapGF(GeneratingFunction):
    chart = "standard"
    rank = 1

    def __init__(self, V: FourierPotential):
        self.V = V

    def pack(self, q, Q) -> Pack:
        return standard_map_pack(self.V, q, Q)

    def value(self, q, Q) -> float:
        return -(0.5 * (q - Q) ** 2 + self.V.derivs(float(q))[0])

    def frame(self, q) -> np.ndarray:
        return np.eye(1)

    def local_point(self, q, c):
        return float(q) + float(np.asarray(c).reshape(-1)[0]), np.eye(1)

    def local_map(self, q, Q, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        Qn, Pn = standard_map_step(self.V, q + z[0], z[1])
        return np.array([Qn - Q, Pn])


# --- validation against finite differences --------------------------------

def _rel(A, B) -> float:
    A = np.atleast_1d(A)
    return float(np.abs(A - B).max() / max(np.abs(A).max(), 1.0))


def validate_derivatives(gf: GeneratingFunction, sampler: Callable, count: int,
                         h: float = 1e-5, h2: float = 1e-2, richardson: int = 2,
                         rng: np.random.Generator | None = None) -> dict:
    """Compare analytic packs with finite differences of the value pulled
    back through the charts of ``gf``.

    The charts have purely normal second derivatives at their base point,
    so coordinate second differences equal covariant ones.  Second
    differences use ``richardson`` extrapolation levels starting from h2.
    Errors are |analytic - fd|_max / max(|analytic|_max, 1).
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    r = gf.rank
    worst = dict.fromkeys(["D1", "D2", "D11", "D22", "D12"], 0.0)
    for _ in range(count):
        q, Q = sampler(rng)
        pk = gf.pack(q, Q)

        def f(z):
            try:
                a = gf.local_point(q, z[:r])[0]
                b = gf.local_point(Q, z[r:])[0]
                return gf.value(a, b)
            except (GeometryError, DomainError) as exc:
                raise DomainError(f"stencil left the domain: {exc}") from exc

        z0 = np.zeros(2 * r)
        grad = fd_derivative(f, z0, h)
        H = fd_hessian(f, z0, h2, richardson)
        errs = {"D1": _rel(pk.d1, grad[:r]), "D2": _rel(pk.d2, grad[r:]),
                "D11": _rel(pk.d11, H[:r, :r]), "D22": _rel(pk.d22, H[r:, r:]),
                "D12": _rel(pk.d12, H[:r, r:])}
        for k, v in errs.items():
            worst[k] = max(worst[k], v)
    return {f"max_rel_err_{k}": v for k, v in worst.items()} | {"count": count}


def pair_sampler(gf: GeneratingFunction, delta_min: float = 0.1) -> Callable:
    """Random consecutive configuration pairs of genuine orbits."""
    if isinstance(gf, ChordGF):
        def draw(rng):
            line = sample_line(gf.body, rng, delta_min)
            x = departure(gf.body, line)
            y, _ = gf.body.ray_second_intersection(x, line.dir)
            return x, y
    elif isinstance(gf, DirectionGF):
        def draw(rng):
            line = sample_line(gf.body, rng, delta_min)
            _, out = impact(gf.body, line)
            return line.dir, out.dir
    elif isinstance(gf, StandardMapGF):
        def draw(rng):
            q = rng.uniform(0.0, 2.0 * np.pi)
            return q, q + rng.uniform(-3.0, 3.0)
    else:
        raise TypeError("no sampler for this generating function")
    return draw


L_pack = chord_pack
S_pack = direction_pack
