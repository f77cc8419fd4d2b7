"""Curvature operators of wave fronts carried by beams of billiard rays:
free flight, reflection at the boundary, a finite-difference ray oracle,
the four fronts attached to a bounce, and the pointwise check that the
spherical-front homotopy between the two chart verticals stays
transversal.

A front is described on the hyperplane dir^perp of its central ray, in the
frame anchored at dir.  Diverging fronts have positive curvature
(a point source at distance s gives B = I/s).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .billiard import OrientedLine, reflect_direction
from .geometry import GeometryError, GrazingError
from .numerics import (TOL_ABS, TOL_REL, classify_definiteness, orthonormal_frame,
                       projection_matrix, reflection_matrix, safe_inverse)
from .symplectic import LagrangianSubspace, homotopy_persistence, index_form

GRAZING = 1e-8
FD_EPS = 1e-5


class FocalPointError(ArithmeticError):
    def __init__(self, msg: str, focal_distances):
        super().__init__(msg)
        self.focal_distances = tuple(float(f) for f in focal_distances)


@dataclass(frozen=True, eq=False)
class FrontCurvature:
    line: OrientedLine
    station: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        if np.abs(B - B.T).max() > 1e-10 * (1.0 + np.abs(B).max()):
            raise ValueError("curvature operator must be symmetric")
        object.__setattr__(self, "B", 0.5 * (B + B.T))
        st = np.asarray(self.station, dtype=float)
        off = st - self.line.base
        if np.linalg.norm(off - (off @ self.line.dir) * self.line.dir) > 1e-12 * (1.0 + np.linalg.norm(st)):
            raise ValueError("station is not on the line")
        object.__setattr__(self, "station", st)


def point_source(line: OrientedLine, distance: float) -> FrontCurvature:
    """Front of rays from line.base, observed ``distance`` further along."""
    d = line.dir.size - 1
    return FrontCurvature(line, line.point_at(distance), np.eye(d) / distance)


def free_flight(front: FrontCurvature, r: float) -> FrontCurvature:
    """B' = B (rB + I)^{-1}."""
    B = front.B
    S = r * B + np.eye(B.shape[0])
    if np.linalg.cond(S) > 1e12:
        lam = np.linalg.eigvalsh(B)
        focal = [-1.0 / x for x in lam if x != 0.0]
        raise FocalPointError(f"focal point at distance {r}", focal)
    Bn = B @ np.linalg.inv(S)
    return FrontCurvature(front.line, front.station + r * front.line.dir, 0.5 * (Bn + Bn.T))


def sinai_chernov_term(body, y, u_out) -> np.ndarray:
    """2<u_out, n> (p^{-1})^T dG p^{-1} on u_out^perp, p = projection n^perp -> u_out^perp."""
    c = float(u_out @ y.n)
    if abs(c) <= GRAZING:
        raise GrazingError("grazing reflection")
    P = projection_matrix(y.frame, orthonormal_frame(u_out))
    Pinv = safe_inverse(P, 1e12, "projection onto the outgoing hyperplane")
    return 2.0 * c * Pinv.T @ body.shape_operator(y) @ Pinv


def reflect_front(body, y, u_in, u_out, B_in) -> FrontCurvature:
    """Outgoing curvature at the reflection point y."""
    u_in, u_out = np.asarray(u_in, dtype=float), np.asarray(u_out, dtype=float)
    if abs(u_out @ y.n) <= GRAZING:
        raise GrazingError("grazing reflection")
    R = reflection_matrix(y.n, orthonormal_frame(u_out), orthonormal_frame(u_in))
    B = R.T @ np.atleast_2d(B_in) @ R + sinai_chernov_term(body, y, u_out)
    return FrontCurvature(OrientedLine(y.x, u_out), y.x, B)


def _reflected_ray(body, start, direction, y):
    """Hit point near y of the ray and its reflected direction."""
    ts = body.line_intersections(start, direction)
    if ts is None:
        raise GrazingError("perturbed ray misses the body")
    t = min(ts, key=abs)
    hit = start + t * direction
    n = body.normal_at(hit)
    return hit, reflect_direction(direction, n)


def fd_front_oracle(body, y, u_in, u_out, B_in, eps: float = FD_EPS,
                    richardson: bool = True) -> np.ndarray:
    """Outgoing curvature from a finite-difference family of reflected rays.

    Rays cross the plane through y orthogonal to u_in at y + s e with
    direction u_in + s B_in e.  Each is reflected at its own hit point; the
    outgoing rays are cut by the plane through y orthogonal to u_out.
    Central differences in s give the Jacobi data (eta, xi) and
    B_out = xi eta^{-1}.  One Richardson step (steps eps and eps/2) removes
    the O(eps^2) term, which is large near grazing incidence.
    """
    u_in, u_out = np.asarray(u_in, dtype=float), np.asarray(u_out, dtype=float)
    if abs(u_out @ y.n) <= GRAZING:
        raise GrazingError("grazing reflection")
    F1 = orthonormal_frame(u_in).columns
    F2 = orthonormal_frame(u_out).columns
    B_in = np.atleast_2d(B_in)
    r = F1.shape[1]

    def outgoing(s, e):
        d = u_in + s * (F1 @ (B_in @ e))
        d = d / np.linalg.norm(d)
        hit, v = _reflected_ray(body, y.x + s * (F1 @ e), d, y)
        lam = -float((hit - y.x) @ u_out) / float(v @ u_out)
        return hit + lam * v, v

    def jacobi_data(h):
        eta, xi = np.empty((r, r)), np.empty((r, r))
        for i in range(r):
            e = np.zeros(r)
            e[i] = 1.0
            p_plus, v_plus = outgoing(h, e)
            p_minus, v_minus = outgoing(-h, e)
            eta[:, i] = F2.T @ (p_plus - p_minus) / (2 * h)
            xi[:, i] = F2.T @ (v_plus - v_minus) / (2 * h)
        return eta, xi

    eta, xi = jacobi_data(eps)
    if richardson:
        eta2, xi2 = jacobi_data(eps / 2)
        eta, xi = (4 * eta2 - eta) / 3, (4 * xi2 - xi) / 3
    B = xi @ np.linalg.inv(eta)
    return 0.5 * (B + B.T)


def l_chart_graph(body, y, u, B) -> np.ndarray:
    """Graph matrix in the chord chart at y of the front B carried by a
    line through y with direction u (incoming or outgoing):
    W = p^T B p - <u, n> dG with p the projection n^perp -> u^perp."""
    P = projection_matrix(y.frame, orthonormal_frame(u))
    return P.T @ np.atleast_2d(B) @ P - float(u @ y.n) * body.shape_operator(y)


FRONT_NAMES = ("alphaS", "betaL", "betaS", "alphaL")


def four_fronts(body, x, y, z, u1, u2, u3) -> dict:
    """The four front curvatures on u2^perp at y for the bounce context
    x -> y -> z (u1 = y - x, u2 = z - y, u3 leaving z, all unit)."""
    u1, u2, u3 = (np.asarray(v, dtype=float) for v in (u1, u2, u3))
    for p, v in ((x, u1), (y, u2), (z, u3)):
        if abs(v @ p.n) <= GRAZING:
            raise GrazingError("grazing bounce in the context")
    r = u2.size - 1
    I = np.eye(r)
    alpha_s = sinai_chernov_term(body, y, u2)
    beta_l = -I / float(np.linalg.norm(z.x - y.x))
    Pz = projection_matrix(z.frame, orthonormal_frame(u2))
    Kz_inv = safe_inverse(body.shape_operator(z), 1e12, "shape operator")
    beta_s_inv = -float(np.linalg.norm(z.x - y.x)) * I + Pz @ Kz_inv @ Pz.T / float(np.linalg.norm(u2 - u3))
    beta_s = safe_inverse(beta_s_inv, 1e12, "beta front")
    alpha_l = I / float(np.linalg.norm(x.x - y.x)) + alpha_s
    sym = lambda A: 0.5 * (A + A.T)
    return {"alphaS": sym(alpha_s), "betaL": sym(beta_l), "betaS": sym(beta_s), "alphaL": sym(alpha_l)}


def s_grid(lo: float = 1e-3, hi: float = 1e3, count: int = 25) -> np.ndarray:
    return np.geomspace(lo, hi, count)


@lru_cache(maxsize=8)
def _default_path(r: int) -> tuple:
    return tuple(spherical_path(r, s_grid()))


def spherical_path(r: int, grid) -> list:
    """V_s = graph(I/s) in front coordinates (q = position, p = direction),
    from the pencil through the bounce point (s -> 0) to the parallel
    beam (s = infinity)."""
    path = [(0.0, LagrangianSubspace.vertical(r))]
    path += [(float(s), LagrangianSubspace.graph(np.eye(r) / s)) for s in grid]
    path.append((np.inf, LagrangianSubspace.horizontal(r)))
    return path


def homotopy_check(fronts: dict, grid=None) -> dict:
    """Sampled check that Q[alpha, beta] keeps its sign on V_s for both
    charts' pairs (alphaL, betaL) and (alphaS, betaS)."""
    r = fronts["alphaS"].shape[0]
    path = _default_path(r) if grid is None else spherical_path(r, grid)
    out = {}
    for chart in ("L", "S"):
        a = LagrangianSubspace.graph(fronts["alpha" + chart])
        b = LagrangianSubspace.graph(fronts["beta" + chart])
        try:
            start = classify_definiteness(index_form(a, b, path[0][1]))
        except ValueError as exc:
            out[chart] = {"persistent": False, "failure": str(exc)}
            continue
        if start.negdef:
            a, b = b, a
        rep = homotopy_persistence(a, b, path)
        out[chart] = {"persistent": rep.persistent, "samples": rep.samples,
                      "failure": rep.failure}
    return out


def _front_entry(B, tol_abs, tol_rel) -> dict:
    v = classify_definiteness(B, tol_abs, tol_rel)
    return {"lambda_max": v.lambda_max, "verdict": v.kind.value, "margin": -v.lambda_max}


def ga_check(body, seq, certified, tol_abs: float = TOL_ABS, tol_rel: float = TOL_REL,
             sampled: bool = True, indices=None) -> list:
    """Per-line GA report.  ``certified`` is the set of line indices n
    (line l_n from x_n to x_{n+1}) covered by an m-orbit certificate; the
    fronts are evaluated at the bounce y = x_n.  Indices without a
    certificate get the fronts reported and the status "no GA claim".
    ``indices`` restricts the report to the given line indices.
    """
    certified = set(certified)
    reports = []
    valid = range(1, len(seq.dirs) - 1)
    for n in (valid if indices is None else sorted(set(indices) & set(valid))):
        x, y, z = seq.points[n - 1], seq.points[n], seq.points[n + 1]
        u1, u2, u3 = seq.dirs[n - 1], seq.dirs[n], seq.dirs[n + 1]
        try:
            fr = four_fronts(body, x, y, z, u1, u2, u3)
        except (GeometryError, np.linalg.LinAlgError) as exc:
            if n in certified:
                warnings.warn(f"bounce {n} skipped: {exc}")
            reports.append({"bounce_index": n, "status": "skipped", "reason": str(exc)})
            continue
        entries = {k: _front_entry(fr[k], tol_abs, tol_rel) for k in FRONT_NAMES}
        rep = {"bounce_index": n, "fronts": entries}
        if n in certified:
            ok = all(e["verdict"] == "NegDef" for e in entries.values())
            if sampled:
                hom = homotopy_check(fr)
                rep["homotopy"] = hom
                ok = ok and all(h["persistent"] for h in hom.values())
            rep["status"] = "pass" if ok else "fail"
        else:
            rep["status"] = "no GA claim"
        reports.append(rep)
    return reports
