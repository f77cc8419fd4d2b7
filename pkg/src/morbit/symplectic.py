"""Linear symplectic algebra at a phase point: the differential of the
twist map from its generating function, Lagrangian subspaces and graphs,
the order relative to the vertical, the index form of a transversal pair
and the invariant-field check for m-orbits.

Vectors are (dq, dp) in the chart frames; omega(v, w) = v^T Omega w with
Omega = [[0, -I], [I, 0]], i.e. omega((q1,p1),(q2,p2)) = <p1,q2> - <q1,p2>.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import subspace_angles

from .numerics import TOL_ABS, TOL_REL, Definiteness, classify_definiteness, safe_inverse

TRANSVERSAL_TOL = 1e-8
ISOTROPY_TOL = 1e-10
INVARIANCE_TOL = 1e-8


class TransversalityError(ValueError):
    pass


@lru_cache(maxsize=16)
def omega_matrix(r: int) -> np.ndarray:
    I, Z = np.eye(r), np.zeros((r, r))
    Om = np.block([[Z, -I], [I, Z]])
    Om.setflags(write=False)
    return Om


def omega(v, w) -> float:
    v, w = np.asarray(v, dtype=float), np.asarray(w, dtype=float)
    r = v.size // 2
    return float(v[r:] @ w[:r] - v[:r] @ w[r:])


@dataclass(frozen=True, eq=False)
class DarbouxSpace:
    """Tangent space at a phase point (q, p) in a chart, rank r."""

    q: object
    p: np.ndarray
    rank: int

    @property
    def Omega(self) -> np.ndarray:
        return omega_matrix(self.rank)


@dataclass(frozen=True, eq=False)
class LagrangianSubspace:
    """Stored with an orthonormal basis (2r x r)."""

    basis: np.ndarray

    def __post_init__(self):
        B = np.asarray(self.basis, dtype=float)
        if B.ndim != 2 or B.shape[0] != 2 * B.shape[1]:
            raise ValueError("basis must be 2r x r")
        Q, R = np.linalg.qr(B)
        if np.abs(np.diag(R)).min() <= 1e-12 * max(np.abs(R).max(), 1.0):
            raise ValueError("basis is rank deficient")
        r = B.shape[1]
        if np.abs(Q.T @ omega_matrix(r) @ Q).max() > ISOTROPY_TOL:
            raise ValueError("subspace is not Lagrangian")
        object.__setattr__(self, "basis", Q)

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    @classmethod
    def graph(cls, W) -> "LagrangianSubspace":
        """{dp = W dq} for symmetric W."""
        W = np.atleast_2d(np.asarray(W, dtype=float))
        return cls(np.vstack([np.eye(W.shape[0]), 0.5 * (W + W.T)]))

    @classmethod
    def vertical(cls, r: int) -> "LagrangianSubspace":
        return cls(np.vstack([np.zeros((r, r)), np.eye(r)]))

    @classmethod
    def horizontal(cls, r: int) -> "LagrangianSubspace":
        return cls(np.vstack([np.eye(r), np.zeros((r, r))]))

    def image(self, T) -> "LagrangianSubspace":
        return LagrangianSubspace(np.asarray(T, dtype=float) @ self.basis)

    def angle_to(self, other: "LagrangianSubspace") -> float:
        """Largest principal angle between the two subspaces."""
        return float(np.max(subspace_angles(self.basis, other.basis)))

    def transversality(self, other: "LagrangianSubspace") -> float:
        """Smallest singular value of [self | other]; zero iff they meet."""
        return float(np.linalg.svd(np.hstack([self.basis, other.basis]), compute_uv=False)[-1])


@dataclass(frozen=True, eq=False)
class LagrangianGraph:
    W: np.ndarray

    def __post_init__(self):
        W = np.atleast_2d(np.asarray(self.W, dtype=float))
        if np.abs(W - W.T).max() > ISOTROPY_TOL * (1.0 + np.abs(W).max()):
            raise ValueError("graph matrix is not symmetric")
        object.__setattr__(self, "W", 0.5 * (W + W.T))

    @property
    def subspace(self) -> LagrangianSubspace:
        return LagrangianSubspace.graph(self.W)


def graph_over_vertical(L: LagrangianSubspace, tol: float = TRANSVERSAL_TOL) -> LagrangianGraph:
    """Symmetric W with L = {dp = W dq}."""
    r = L.rank
    top, bot = L.basis[:r], L.basis[r:]
    if np.linalg.svd(top, compute_uv=False)[-1] < tol:
        raise TransversalityError("subspace is not transversal to the vertical")
    W = np.linalg.solve(top.T, bot.T).T
    return LagrangianGraph(0.5 * (W + W.T))


def dT_from_pack(pk) -> np.ndarray:
    """dT in (dq, dp) coordinates for p = -H_1, P = H_2."""
    b = pk.d12
    binv = safe_inverse(b, 1e12, "H12")
    return np.block([[-binv @ pk.d11, -binv],
                     [b.T - pk.d22 @ binv @ pk.d11, -pk.d22 @ binv]])


def dT_blocks(gf, q, Q) -> np.ndarray:
    return dT_from_pack(gf.pack(q, Q))


def symplectic_defect(T) -> float:
    T = np.asarray(T, dtype=float)
    Om = omega_matrix(T.shape[0] // 2)
    return float(np.linalg.norm(T.T @ Om @ T - Om, 2))


def chart_jacobian_fd(gf, q, Q, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of the map in canonical chart coordinates."""
    from .numerics import fd_derivative
    z0 = np.concatenate([np.zeros(gf.rank), gf.momentum(q, Q)])
    return fd_derivative(lambda z: gf.local_map(q, Q, z), z0, h)


ORDER_VERDICTS = ("less", "greater", "neither", "marginal")


def order_compare(L1, L2, tol_abs: float = TOL_ABS, tol_rel: float = TOL_REL) -> str:
    """Order relative to the vertical: "less" when W2 - W1 is positive definite."""
    W1 = L1.W if isinstance(L1, LagrangianGraph) else graph_over_vertical(L1).W
    W2 = L2.W if isinstance(L2, LagrangianGraph) else graph_over_vertical(L2).W
    v = classify_definiteness(W2 - W1, tol_abs, tol_rel)
    if v.kind is Definiteness.POS_DEF:
        return "less"
    if v.kind is Definiteness.NEG_DEF:
        return "greater"
    if v.kind is Definiteness.MARGINAL:
        return "marginal"
    return "neither"


def _sub(L) -> LagrangianSubspace:
    return L.subspace if isinstance(L, LagrangianGraph) else L


def index_form(alpha, beta, L, tol: float = TRANSVERSAL_TOL) -> np.ndarray:
    """Gram matrix on a basis of L of u -> omega(u1, u2), where u = u1 + u2
    with u1 in alpha and u2 in beta."""
    A, B = _sub(alpha).basis, _sub(beta).basis
    S = np.hstack([A, B])
    if np.linalg.svd(S, compute_uv=False)[-1] < tol:
        raise TransversalityError("alpha and beta are not transversal")
    return _split_form(A, B, S, _sub(L).basis)


def _split_form(A, B, S, C) -> np.ndarray:
    r = A.shape[1]
    coef = np.linalg.solve(S, C)
    U1, U2 = A @ coef[:r], B @ coef[r:]
    G = U1.T @ omega_matrix(r) @ U2
    return 0.5 * (G + G.T)


@dataclass(frozen=True)
class PersistenceReport:
    persistent: bool
    samples: int
    min_lambda: float
    failure: dict | None


def homotopy_persistence(alpha, beta, path, tol: float = TRANSVERSAL_TOL,
                         tol_abs: float = TOL_ABS, tol_rel: float = TOL_REL) -> PersistenceReport:
    """Check Q[alpha, beta] stays positive definite along sampled gamma_t.

    ``path`` is an iterable of (t, subspace).  The first sample that loses
    transversality with alpha or beta, or whose restricted form is not
    positive definite, is reported.
    """
    a, b = _sub(alpha), _sub(beta)
    S = np.hstack([a.basis, b.basis])
    if np.linalg.svd(S, compute_uv=False)[-1] < tol:
        raise TransversalityError("alpha and beta are not transversal")
    lam_min = np.inf
    count = 0
    for t, g in path:
        g = _sub(g)
        count += 1
        for name, other in (("alpha", a), ("beta", b)):
            s = g.transversality(other)
            if s < tol:
                return PersistenceReport(False, count, float(lam_min),
                                         {"t": t, "reason": f"not transversal to {name}", "sigma": s})
        v = classify_definiteness(_split_form(a.basis, b.basis, S, g.basis), tol_abs, tol_rel)
        lam_min = min(lam_min, v.lambda_min)
        if not v.posdef:
            return PersistenceReport(False, count, float(lam_min),
                                     {"t": t, "reason": v.kind.value, "lambda_min": v.lambda_min})
    return PersistenceReport(True, count, float(lam_min), None)


@dataclass(frozen=True, eq=False)
class GeometricReport:
    ok: bool
    transversal: bool
    invariant: bool
    ordered: bool
    max_angle: float
    min_margin_alpha: float
    min_margin_beta: float
    failure: dict | None
    fields: tuple  # graph matrices W_n


def check_morbit_geometric(gf, config, X, M: int, tol_abs: float = TOL_ABS,
                           tol_rel: float = TOL_REL, angle_tol: float = INVARIANCE_TOL) -> GeometricReport:
    """Invariant Lagrangian field L_n = graph(-H11(q_n, q_{n+1}) + X_n).

    ``X`` holds X_n for n = M .. M+len(X)-1 (configuration indices).  Checks
    (i) transversality to the vertical, (ii) dT_n L_n = L_{n+1}, and
    (iii) alpha_n < L_n < beta_n with alpha_n = graph(H22(q_{n-1}, q_n)) and
    beta_n = graph(-H11(q_n, q_{n+1})).
    """
    config = list(config)
    X = [np.atleast_2d(np.asarray(x, dtype=float)) for x in X]
    N = M + len(X) - 1
    if M < 1 or N + 1 >= len(config):
        raise IndexError("field indices need neighbours in the configuration")
    packs = {n: gf.pack(config[n], config[n + 1]) for n in range(M - 1, N + 1)}
    fields = {n: -packs[n].d11 + X[n - M] for n in range(M, N + 1)}
    subs = {n: LagrangianSubspace.graph(W) for n, W in fields.items()}
    failure = None
    transversal = invariant = ordered = True
    r = X[0].shape[0]
    V = LagrangianSubspace.vertical(r)
    for n in range(M, N + 1):
        if subs[n].transversality(V) < TRANSVERSAL_TOL:
            transversal = False
            failure = failure or {"item": "transversality", "n": n}
    max_angle = 0.0
    for n in range(M, N):
        ang = subs[n].image(dT_from_pack(packs[n])).angle_to(subs[n + 1])
        max_angle = max(max_angle, ang)
        if ang >= angle_tol:
            invariant = False
            failure = failure or {"item": "invariance", "n": n, "angle": ang}
    ma, mb = np.inf, np.inf
    for n in range(M, N + 1):
        va = classify_definiteness(fields[n] - packs[n - 1].d22, tol_abs, tol_rel)
        vb = classify_definiteness(-packs[n].d11 - fields[n], tol_abs, tol_rel)
        ma, mb = min(ma, va.lambda_min), min(mb, vb.lambda_min)
        if not (va.posdef and vb.posdef):
            ordered = False
            failure = failure or {"item": "order", "n": n,
                                  "margin_alpha": va.lambda_min, "margin_beta": vb.lambda_min}
    return GeometricReport(transversal and invariant and ordered, transversal, invariant,
                           ordered, max_angle, float(ma), float(mb), failure,
                           tuple(fields[n] for n in range(M, N + 1)))


def alpha_beta(gf, q_prev, q, q_next) -> tuple[LagrangianSubspace, LagrangianSubspace]:
    """alpha = dT(V) at (q_prev, q) and beta = dT^{-1}(V) at (q, q_next)."""
    r = gf.rank
    V = LagrangianSubspace.vertical(r)
    alpha = V.image(dT_blocks(gf, q_prev, q))
    beta = V.image(np.linalg.inv(dT_blocks(gf, q, q_next)))
    return alpha, beta
