"""Second variation of the discrete action along an orbit segment, Jacobi
fields, the Riccati sequence and the two m-orbit classifiers.

A window stores the configuration q_0 .. q_{L+1} of a critical sequence
together with the blocks

    a_n = D11(q_n, q_{n+1}) + D22(q_{n-1}, q_n)    n = 1 .. L
    b_n = D12(q_n, q_{n+1})                        n = 0 .. L

expressed in the per-point frames.  The second variation on [M, N] is the
block tridiagonal matrix with a_n on the diagonal and b_n above it.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .numerics import (TOL_ABS, TOL_REL, Definiteness,
                       classify_definiteness, safe_inverse)

COND_MAX = 1e12


class NonCriticalError(ValueError):
    pass


class NotMorbitError(ValueError):
    pass


class MonotonicityError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class OrbitWindow:
    gf: object
    config: tuple
    a: np.ndarray  # (L+2, r, r); rows 0 and L+1 unused (nan)
    b: np.ndarray  # (L+1, r, r)
    M: int
    N: int

    @property
    def rank(self) -> int:
        return self.a.shape[1]

    @property
    def length(self) -> int:
        return len(self.config) - 2

    def sub(self, M: int, N: int) -> "OrbitWindow":
        if not 1 <= M <= N <= self.length:
            raise IndexError(f"window [{M}, {N}] outside 1..{self.length}")
        return replace(self, M=M, N=N)

    def negated(self) -> "OrbitWindow":
        return replace(self, a=-self.a, b=-self.b)

    def rotated(self, Qs) -> "OrbitWindow":
        """Blocks re-expressed in frames F_n Q_n (Q_n orthogonal)."""
        Qs = np.asarray(Qs, dtype=float)
        a = np.einsum("nji,njk,nkl->nil", Qs, self.a, Qs)
        b = np.einsum("nji,njk,nkl->nil", Qs[:-1], self.b, Qs[1:])
        return replace(self, a=a, b=b)


def assemble_window(gf, config, M: int | None = None, N: int | None = None,
                    crit_tol: float = 1e-8, sym_tol: float = 1e-8) -> OrbitWindow:
    """Blocks of the second variation along a critical configuration."""
    config = tuple(config)
    L = len(config) - 2
    if L < 1:
        raise ValueError("need at least three configuration points")
    packs = [gf.pack(config[i], config[i + 1]) for i in range(L + 1)]
    r = packs[0].d11.shape[0]
    a = np.full((L + 2, r, r), np.nan)
    b = np.empty((L + 1, r, r))
    for n in range(L + 1):
        b[n] = packs[n].d12
    for n in range(1, L + 1):
        grad = packs[n - 1].d2 + packs[n].d1
        scale = 1.0 + np.abs(packs[n].d1).max()
        if np.abs(grad).max() > crit_tol * scale:
            raise NonCriticalError(f"configuration is not critical at index {n}")
        an = packs[n].d11 + packs[n - 1].d22
        if np.abs(an - an.T).max() > sym_tol * (1.0 + np.abs(an).max()):
            raise ValueError(f"asymmetric diagonal block at index {n}")
        a[n] = 0.5 * (an + an.T)
    M = 1 if M is None else M
    N = L if N is None else N
    return OrbitWindow(gf, config, a, b, M, N).sub(M, N)


def second_variation(window: OrbitWindow, M: int | None = None, N: int | None = None) -> np.ndarray:
    M = window.M if M is None else M
    N = window.N if N is None else N
    r = window.rank
    m = N - M + 1
    W = np.zeros((m * r, m * r))
    for i, n in enumerate(range(M, N + 1)):
        W[i * r:(i + 1) * r, i * r:(i + 1) * r] = window.a[n]
        if n < N:
            W[i * r:(i + 1) * r, (i + 1) * r:(i + 2) * r] = window.b[n]
            W[(i + 1) * r:(i + 2) * r, i * r:(i + 1) * r] = window.b[n].T
    return W


def action_sum(gf, config) -> tuple[float, np.ndarray]:
    """Sum of H over consecutive pairs and its gradient at the interior points."""
    config = list(config)
    packs = [gf.pack(config[i], config[i + 1]) for i in range(len(config) - 1)]
    F = float(sum(p.value for p in packs))
    grad = np.array([packs[n - 1].d2 + packs[n].d1 for n in range(1, len(config) - 1)])
    return F, grad


# --- Jacobi fields and the Riccati sequence -------------------------------

@dataclass(frozen=True, eq=False)
class JacobiTrace:
    """Matrix Jacobi field xi_n, n = k-1 .. stop+1, with xi_{k-1}=0, xi_k=I."""

    k: int
    xi: np.ndarray
    residual: float

    def at(self, n: int) -> np.ndarray:
        return self.xi[n - self.k + 1]


def jacobi_propagate(window: OrbitWindow, k: int, stop: int | None = None) -> JacobiTrace:
    stop = window.N if stop is None else stop
    if not 1 <= k <= stop <= window.length:
        raise IndexError("start index outside the window")
    r = window.rank
    a, b = window.a, window.b
    xi = [np.zeros((r, r)), np.eye(r)]
    res = 0.0
    for n in range(k, stop + 1):
        binv = safe_inverse(b[n], COND_MAX, f"b_{n}")
        nxt = -binv @ (b[n - 1].T @ xi[-2] + a[n] @ xi[-1])
        xi.append(nxt)
        lhs = b[n - 1].T @ xi[-3] + a[n] @ xi[-2] + b[n] @ nxt
        scale = (np.abs(a[n]).max() + np.abs(b[n]).max() + np.abs(b[n - 1]).max()) * \
            max(np.abs(xi[-3]).max(), np.abs(xi[-2]).max(), np.abs(nxt).max(), 1.0)
        res = max(res, float(np.abs(lhs).max() / scale))
    return JacobiTrace(k, np.array(xi), res)


@dataclass(frozen=True, eq=False)
class RiccatiTrace:
    k: int
    A: np.ndarray  # A_n for n = k .. k+len-1
    verdicts: tuple
    residual: float
    singular_at: int | None = None
    monotone_ok: bool | None = None

    @property
    def stop(self) -> int:
        return self.k + len(self.A) - 1

    def at(self, n: int) -> np.ndarray:
        return self.A[n - self.k]

    def first_failure(self, target: Definiteness = Definiteness.NEG_DEF):
        """(n, verdict) of the first A_n whose verdict is not ``target``."""
        for i, v in enumerate(self.verdicts):
            if v.kind is not target:
                return self.k + i, v
        return None


def riccati_sequence(window: OrbitWindow, k: int, stop: int | None = None,
                     tol_abs: float = TOL_ABS, tol_rel: float = TOL_REL) -> RiccatiTrace:
    """A_k = a_k, A_{n+1} = a_{n+1} - b_n^T A_n^{-1} b_n while A_n is invertible."""
    stop = window.N if stop is None else stop
    if not 1 <= k <= stop <= window.length:
        raise IndexError("start index outside the window")
    a, b = window.a, window.b
    A = [a[k].copy()]
    res = 0.0
    singular = None
    for n in range(k, stop):
        try:
            inv = safe_inverse(A[-1], COND_MAX, f"A_{n}")
        except np.linalg.LinAlgError:
            singular = n
            break
        nxt = a[n + 1] - b[n].T @ inv @ b[n]
        nxt = 0.5 * (nxt + nxt.T)
        # residual of the recursion, evaluated independently of the update
        back = nxt - a[n + 1] + b[n].T @ np.linalg.solve(A[-1], b[n])
        scale = 1.0 + np.abs(a[n + 1]).max() + np.abs(nxt).max()
        res = max(res, float(np.abs(back).max() / scale))
        A.append(nxt)
    verdicts = tuple(classify_definiteness(X, tol_abs, tol_rel) for X in A)
    return RiccatiTrace(k, np.array(A), verdicts, res, singular)


def _monotone_violation(A_shallow: np.ndarray, A_deep: np.ndarray,
                        tol_abs: float, tol_rel: float) -> float:
    """Largest eigenvalue of A_shallow - A_deep beyond the band (0 if fine)."""
    D = A_shallow - A_deep
    lam = float(np.linalg.eigvalsh(0.5 * (D + D.T))[-1])
    tau = tol_abs + tol_rel * max(np.abs(A_shallow).max(), np.abs(A_deep).max())
    return lam if lam > tau else 0.0


@dataclass(frozen=True, eq=False)
class LimitReport:
    M: int
    N: int
    X: np.ndarray  # X_n, n = M .. N
    depth: int
    converged: bool
    differences: tuple  # operator-norm gap between successive depths
    monotone_ok: bool
    traces: tuple

    def at(self, n: int) -> np.ndarray:
        return self.X[n - self.M]


def limit_X(window: OrbitWindow, depths=(10, 20, 40, 80), tol: float = 1e-9,
            tol_abs: float = TOL_ABS, tol_rel: float = TOL_REL) -> LimitReport:
    """Estimate X_n on [M, N] from Riccati traces started M-K, K in depths.

    Each trace must be negative definite throughout; deeper traces must
    dominate shallower ones.  The deepest trace gives the estimate.
    """
    M, N = window.M, window.N
    depths = sorted(int(K) for K in depths)
    if not depths or depths[0] < 0 or M - depths[-1] < 1:
        raise ValueError("look-back depths do not fit before the window")
    traces = []
    for K in depths:
        tr = riccati_sequence(window, M - K, N, tol_abs, tol_rel)
        if tr.singular_at is not None:
            raise NotMorbitError(f"A_n singular at n={tr.singular_at} (depth {K})")
        bad = tr.first_failure()
        if bad is not None:
            raise NotMorbitError(f"A_{bad[0]} from depth {K} is {bad[1].kind.value}")
        traces.append(tr)
    diffs = []
    for t0, t1 in zip(traces, traces[1:]):
        for n in range(M, N + 1):
            v = _monotone_violation(t0.at(n), t1.at(n), tol_abs, tol_rel)
            if v:
                raise MonotonicityError(f"A_{n} decreased with depth (eigenvalue {v:.3g})")
        diffs.append(max(np.linalg.norm(t1.at(n) - t0.at(n), 2) for n in range(M, N + 1)))
    X = np.array([traces[-1].at(n) for n in range(M, N + 1)])
    converged = bool(diffs) and diffs[-1] < tol
    return LimitReport(M, N, X, depths[-1], converged, tuple(diffs), True, tuple(traces))


def periodic_limit_X(window: OrbitWindow, n: int, period: int, max_doublings: int = 20) -> np.ndarray:
    """Limit X_n for a periodic orbit by repeated squaring of the monodromy.

    The state (xi_{j-1}, xi_j) of a matrix Jacobi field is advanced one
    period by P = Phi_n ... Phi_{n-p+1}.  Starting from (0, I) m periods
    back gives A_n^(n+1-mp); squaring P doubles m.  Scaling by powers of
    two keeps the products exact when the blocks are.  When P is parabolic
    (a double eigenvalue, as on the circle) A^(m) approaches the limit like
    1/m, so successive estimates are combined by one Richardson step.
    Rounding in the Jordan block grows with m, so the Richardson value with
    the smallest change from its predecessor is returned.  For hyperbolic P
    the estimates agree to rounding after a few doublings.
    """
    if not (period <= n <= window.length):
        raise IndexError("index too close to the start of the configuration")
    r = window.rank
    a, b = window.a, window.b
    I, Z = np.eye(r), np.zeros((r, r))
    P = np.eye(2 * r)
    for j in range(n - period + 1, n + 1):
        binv = safe_inverse(b[j], COND_MAX, f"b_{j}")
        Phi = np.block([[Z, I], [-binv @ b[j - 1].T, -binv @ a[j]]])
        P = Phi @ P
    start = np.vstack([Z, I])

    def estimate(P):
        Y = P @ start
        X = -b[n] @ Y[r:] @ np.linalg.inv(Y[:r])
        return 0.5 * (X + X.T)

    X_prev, X = None, estimate(P)
    rich, best, best_gap = [], None, np.inf
    for _ in range(max_doublings):
        P = P @ P
        _, e = np.frexp(np.abs(P).max())
        P = np.ldexp(P, -int(e))
        X_prev, X = X, estimate(P)
        if np.abs(X - X_prev).max() <= 4e-16 * (1.0 + np.abs(X).max()):
            return X
        rich.append(2.0 * X - X_prev)
        if len(rich) > 1:
            gap = np.abs(rich[-1] - rich[-2]).max()
            if gap < best_gap:
                best, best_gap = rich[-1], gap
    if best is None:
        best = rich[-1]
    return 0.5 * (best + best.T)


@dataclass(frozen=True, eq=False)
class JacobiField:
    M: int
    J: np.ndarray  # J_n, n = M .. N+1
    jacobi_residual: float
    x_residual: float

    def at(self, n: int) -> np.ndarray:
        return self.J[n - self.M]


def reconstruct_jacobi(window: OrbitWindow, X, anchor: int | None = None,
                       J_anchor=None) -> JacobiField:
    """J_{n+1} = -b_n^{-1} X_n J_n forward and J_n = -X_n^{-1} b_n J_{n+1}
    backward from the anchor index; X holds X_n for n = M .. N."""
    M, N = window.M, window.N
    X = np.asarray(X, dtype=float)
    if X.shape[0] != N - M + 1:
        raise ValueError("X must cover the window")
    anchor = M if anchor is None else anchor
    r = window.rank
    J = {anchor: np.eye(r) if J_anchor is None else np.asarray(J_anchor, dtype=float)}
    for n in range(anchor, N + 1):
        J[n + 1] = -safe_inverse(window.b[n], COND_MAX, f"b_{n}") @ X[n - M] @ J[n]
    for n in range(anchor - 1, M - 1, -1):
        J[n] = -safe_inverse(X[n - M], COND_MAX, f"X_{n}") @ window.b[n] @ J[n + 1]
    Js = np.array([J[n] for n in range(M, N + 2)])
    a, b = window.a, window.b
    jres = 0.0
    for n in range(M + 1, N + 1):
        lhs = b[n - 1].T @ J[n - 1] + a[n] @ J[n] + b[n] @ J[n + 1]
        scale = (np.abs(a[n]).max() + np.abs(b[n]).max() + np.abs(b[n - 1]).max()) * \
            max(np.abs(J[n - 1]).max(), np.abs(J[n]).max(), np.abs(J[n + 1]).max())
        jres = max(jres, float(np.abs(lhs).max() / scale))
    xres = 0.0
    for n in range(M, N + 1):
        Xr = -b[n] @ J[n + 1] @ np.linalg.inv(J[n])
        xres = max(xres, float(np.abs(Xr - X[n - M]).max() / (1.0 + np.abs(X[n - M]).max())))
    return JacobiField(M, Js, jres, xres)


def mackay_identity_check(window: OrbitWindow, trace: RiccatiTrace, u) -> float:
    """|u^T W u - sum_n (u_n + A_n^{-1} b_n u_{n+1})^T A_n (...) - u_N^T A_N u_N|
    on the window [M, N]; the trace must start at M."""
    M, N = window.M, window.N
    if trace.k != M or trace.stop < N:
        raise ValueError("trace must start at the window start and cover it")
    r = window.rank
    u = np.asarray(u, dtype=float).reshape(N - M + 1, r)
    W = second_variation(window)
    lhs = float(u.reshape(-1) @ W @ u.reshape(-1))
    total = 0.0
    for i, n in enumerate(range(M, N)):
        A = trace.at(n)
        v = u[i] + np.linalg.solve(A, window.b[n] @ u[i + 1])
        total += float(v @ A @ v)
    total += float(u[-1] @ trace.at(N) @ u[-1])
    return abs(lhs - total)


def hereditary_check(window: OrbitWindow, tol_abs: float = TOL_ABS,
                     tol_rel: float = TOL_REL) -> list:
    """Verdicts of every proper contiguous sub-window of [M, N]."""
    out = []
    M, N = window.M, window.N
    for i in range(M, N + 1):
        for j in range(i, N + 1):
            if (i, j) == (M, N):
                continue
            out.append(((i, j), classify_definiteness(second_variation(window, i, j), tol_abs, tol_rel)))
    return out


# --- classification -------------------------------------------------------

SENSES = ("maximizing", "minimizing")


@dataclass(frozen=True)
class WindowRecord:
    M: int
    N: int
    lambda_max: float
    lambda_min: float
    verdict: str

    def to_dict(self) -> dict:
        return {"M": self.M, "N": self.N, "lambda_max": self.lambda_max,
                "lambda_min": self.lambda_min, "verdict": self.verdict}


@dataclass(frozen=True, eq=False)
class MorbitCertificate:
    M: int
    N: int
    X: np.ndarray
    J: np.ndarray
    depth: int
    converged: bool
    periodic: bool
    min_margin: float
    jacobi_residual: float
    x_residual: float
    recursion_residual: float


@dataclass(frozen=True, eq=False)
class Classification:
    verdict: str
    sense: str
    direct: str
    criterion: str
    windows: tuple
    certificate: MorbitCertificate | None
    witness: dict
    M: int
    N: int

    def report(self, orbit_id, chart: str) -> dict:
        cert = None
        if self.certificate is not None:
            c = self.certificate
            cert = {"depth": c.depth, "converged": c.converged, "min_margin": c.min_margin}
        return {"orbit_id": orbit_id, "chart": chart, "sense": self.sense,
                "windows": [w.to_dict() for w in self.windows],
                "certificate": cert, "verdict": self.verdict,
                "direct": self.direct, "criterion": self.criterion,
                "witness": self.witness}


def _judge(kind: Definiteness, target: Definiteness) -> str:
    if kind is target:
        return "accept"
    if kind is Definiteness.MARGINAL:
        return "marginal"
    return "reject"


def classify_window(window: OrbitWindow, window_schedule=(5, 10, 20, 50),
                    depths=(10, 20, 40, 80), tol_abs: float = TOL_ABS,
                    tol_rel: float = TOL_REL, conv_tol: float = 1e-9,
                    sense: str = "maximizing", period: int | None = None) -> Classification:
    """Direct and Riccati-criterion classification of the tail of a window.

    The window of interest is the last N_w interior points (N_w the largest
    schedule entry that fits); the points before it serve as look-back for
    the Riccati traces.  The direct test examines the single block a_M, the schedule
    windows [M, M+s-1] and the extended windows [M-K, N]; the criterion runs the
    traces from M-K, checks monotonicity in K, forms X_n and rebuilds the
    Jacobi field.  Minimizing sense works on the negated blocks.
    """
    if sense not in SENSES:
        raise ValueError(f"sense must be one of {SENSES}")
    sign = 1.0 if sense == "maximizing" else -1.0
    target = Definiteness.NEG_DEF if sign > 0 else Definiteness.POS_DEF
    L = window.length
    sizes = sorted({int(s) for s in window_schedule if int(s) <= L}) or [L]
    nw = sizes[-1]
    look = L - nw
    Ks = sorted({int(K) for K in depths if int(K) <= look})
    if not Ks and look > 0:
        Ks = [look]
    M, N = look + 1, L
    full = window if sign > 0 else window.negated()

    # direct test
    spans = [(M, M)] + [(M, M + s - 1) for s in sizes if s > 1] + [(M - K, N) for K in Ks]
    records, direct, witness = [], "accept", {}
    for i, j in spans:
        v = classify_definiteness(second_variation(window, i, j), tol_abs, tol_rel)
        records.append(WindowRecord(i, j, v.lambda_max, v.lambda_min, v.kind.value))
        judged = _judge(v.kind, target)
        if judged == "reject" and direct != "reject":
            direct = "reject"
            witness = {"window": [i, j], "lambda": v.lambda_max if sign > 0 else v.lambda_min}
        elif judged == "marginal" and direct == "accept":
            direct = "marginal"

    # criterion test
    criterion, cert = "accept", None
    traces = []
    for K in (Ks or [0]):
        tr = riccati_sequence(full, M - K, N, tol_abs, tol_rel)
        traces.append(tr)
        bad = tr.first_failure()
        if bad is not None:
            judged = "marginal" if bad[1].marginal else "reject"
            if judged == "reject":
                criterion = "reject"
                witness.setdefault("riccati", {"k": tr.k, "n": bad[0],
                                               "lambda": sign * bad[1].lambda_max})
            elif criterion == "accept":
                criterion = "marginal"
        elif tr.singular_at is not None and criterion == "accept":
            criterion = "marginal"
    if criterion == "accept":
        sub = full.sub(M, N)
        # monotonicity between successive depths and between k and k-1
        pairs = list(zip(traces, traces[1:]))
        for K, tr in zip(Ks, traces):
            if K + 1 <= look:
                pairs.append((tr, riccati_sequence(full, M - K - 1, N, tol_abs, tol_rel)))
        for t0, t1 in pairs:
            for n in range(M, N + 1):
                v = _monotone_violation(t0.at(n), t1.at(n), tol_abs, tol_rel)
                if v:
                    criterion = "inconsistent"
                    witness["monotonicity"] = {"k": t0.k, "n": n, "eigenvalue": v}
        deep = traces[-1]
        X = np.array([deep.at(n) for n in range(M, N + 1)])
        gaps = [max(np.linalg.norm(t1.at(n) - t0.at(n), 2) for n in range(M, N + 1))
                for t0, t1 in zip(traces, traces[1:])]
        converged = bool(gaps) and gaps[-1] < conv_tol
        periodic = False
        if period is not None and M >= period:
            Xp = np.array([periodic_limit_X(full, n, period) for n in range(M, N + 1)])
            for n in range(M, N + 1):
                if _monotone_violation(deep.at(n), Xp[n - M], tol_abs, tol_rel):
                    criterion = "inconsistent"
                    witness["periodic_limit"] = {"n": n}
            X, converged, periodic = Xp, True, True
        xv = [classify_definiteness(Xn, tol_abs, tol_rel) for Xn in X]
        if any(not v.negdef for v in xv):
            criterion = "marginal" if criterion == "accept" else criterion
        if criterion == "accept":
            jf = reconstruct_jacobi(sub, X)
            cert = MorbitCertificate(
                M, N, sign * X, jf.J, M - deep.k, converged, periodic,
                float(min(-v.lambda_max for v in xv)), jf.jacobi_residual, jf.x_residual,
                max(t.residual for t in traces))

    if "marginal" in (direct, criterion):
        verdict = "marginal"
    elif direct != criterion:
        verdict = "inconsistent"
    else:
        verdict = {"accept": "m-orbit", "reject": "rejected"}.get(direct, "inconsistent")
    if criterion == "inconsistent":
        verdict = "inconsistent"
    return Classification(verdict, sense, direct, criterion, tuple(records), cert,
                          witness, M, N)


def classify_orbit(gf, config, window_schedule=(5, 10, 20, 50), depths=(10, 20, 40, 80),
                   tol_abs: float = TOL_ABS, tol_rel: float = TOL_REL,
                   conv_tol: float = 1e-9, sense: str = "maximizing",
                   period: int | None = None) -> Classification:
    window = assemble_window(gf, config)
    return classify_window(window, window_schedule, depths, tol_abs, tol_rel,
                           conv_tol, sense, period)


def required_length(window_schedule=(5, 10, 20, 50), depths=(10, 20, 40, 80)) -> int:
    """Interior points needed for the largest window with full look-back."""
    return max(window_schedule) + max(depths)
