"""Frames on hyperplanes, projection/reflection matrices, definiteness
verdicts and central finite differences.

Everything here is a pure function of its inputs.  Operators between
hyperplanes a^perp -> b^perp are represented by the matrix
``frame(b).T @ A @ frame(a)`` so that adjoints become transposes.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

TOL_ABS = 1e-9
TOL_REL = 1e-9
UNIT_TOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Frame:
    """Orthonormal basis of ``anchor``^perp, stored as a d x (d-1) matrix."""

    anchor: np.ndarray
    columns: np.ndarray

    @property
    def dim(self) -> int:
        return self.anchor.shape[0]


def orthonormal_frame(a, tol: float = UNIT_TOL) -> Frame:
    """Deterministic frame of a^perp from a Householder reflector.

    The reflector H = I - 2 vv^T/|v|^2 with v = a + sign(a_k) e_k, where k
    indexes the largest |a_k|, sends e_k to -sign(a_k) a.  The remaining
    columns of H, in index order, span a^perp.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 1 or a.size < 2:
        raise ValueError("anchor must be a vector of dimension >= 2")
    if not np.all(np.isfinite(a)) or abs(np.linalg.norm(a) - 1.0) > tol:
        raise ValueError("anchor must be a unit vector")
    d = a.size
    k = int(np.argmax(np.abs(a)))
    s = 1.0 if a[k] >= 0 else -1.0
    v = a.copy()
    v[k] += s
    H = np.eye(d) - (2.0 / (v @ v)) * np.outer(v, v)
    cols = np.delete(H, k, axis=1)
    return Frame(_frozen(a), _frozen(cols))


def projection_matrix(src: Frame, tgt: Frame) -> np.ndarray:
    """Matrix of the orthogonal projection src.anchor^perp -> tgt.anchor^perp."""
    if src.dim != tgt.dim:
        raise ValueError("frames live in different ambient dimensions")
    return tgt.columns.T @ src.columns


def reflection_matrix(n, src: Frame, tgt: Frame, tol: float = 1e-10) -> np.ndarray:
    """Mirror about n^perp restricted to src.anchor^perp -> tgt.anchor^perp.

    ``src`` is anchored at the incoming direction and ``tgt`` at the
    outgoing one; the two must be related by the reflection law.
    """
    n = np.asarray(n, dtype=float)
    if src.dim != tgt.dim or n.size != src.dim:
        raise ValueError("dimension mismatch")
    u_in, u_out = src.anchor, tgt.anchor
    if np.linalg.norm(u_out - (u_in - 2.0 * (u_in @ n) * n)) > tol:
        raise ValueError("directions are not related by reflection in n")
    mirror = np.eye(n.size) - 2.0 * np.outer(n, n)
    return tgt.columns.T @ mirror @ src.columns


class Definiteness(str, enum.Enum):
    NEG_DEF = "NegDef"
    NEG_SEMI_DEF = "NegSemiDef"
    POS_DEF = "PosDef"
    POS_SEMI_DEF = "PosSemiDef"
    INDEFINITE = "Indefinite"
    MARGINAL = "Marginal"


@dataclass(frozen=True)
class DefinitenessVerdict:
    kind: Definiteness
    lambda_min: float
    lambda_max: float
    tol_used: float

    @property
    def negdef(self) -> bool:
        return self.kind is Definiteness.NEG_DEF

    @property
    def posdef(self) -> bool:
        return self.kind is Definiteness.POS_DEF

    @property
    def marginal(self) -> bool:
        return self.kind is Definiteness.MARGINAL


def symmetric_part(M, tol: float = 1e-8) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    scale = np.linalg.norm(M) if M.size else 0.0
    if np.linalg.norm(M - M.T) > tol * (1.0 + scale):
        raise ValueError("matrix is not symmetric within tolerance")
    return 0.5 * (M + M.T)


def classify_definiteness(M, tol_abs: float = TOL_ABS, tol_rel: float = TOL_REL,
                          strict: bool = True) -> DefinitenessVerdict:
    """Three-way definiteness decision with a marginal band.

    tau = tol_abs + tol_rel * ||M||.  An extreme eigenvalue inside
    [-tau, tau] that decides between "definite" and "not definite" gives
    Marginal.  With ``strict=False`` a one-sided band instead reports the
    semi-definite kind (NegSemiDef / PosSemiDef).
    """
    if tol_abs < 0 or tol_rel < 0:
        raise ValueError("tolerances must be non-negative")
    S = symmetric_part(M)
    if S.shape == (1, 1):
        lo = hi = float(S[0, 0])
    else:
        lam = np.linalg.eigvalsh(S)
        lo, hi = float(lam[0]), float(lam[-1])
    tau = tol_abs + tol_rel * max(abs(lo), abs(hi))
    if hi < -tau:
        kind = Definiteness.NEG_DEF
    elif lo > tau:
        kind = Definiteness.POS_DEF
    elif lo < -tau and hi > tau:
        kind = Definiteness.INDEFINITE
    elif lo < -tau:
        kind = Definiteness.MARGINAL if strict else Definiteness.NEG_SEMI_DEF
    elif hi > tau:
        kind = Definiteness.MARGINAL if strict else Definiteness.POS_SEMI_DEF
    else:
        kind = Definiteness.MARGINAL
    return DefinitenessVerdict(kind, lo, hi, tau)


class FDEvaluationError(RuntimeError):
    """The function failed somewhere on the difference stencil."""


def _call(f, x):
    try:
        return np.asarray(f(x), dtype=float)
    except Exception as exc:  # re-raised with stencil context
        raise FDEvaluationError(f"evaluation failed at {x!r}: {exc}") from exc


def _central(f, x, h):
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1)
    cols = []
    for i in range(flat.size):
        e = np.zeros_like(flat)
        e[i] = h
        fp = _call(f, (flat + e).reshape(x.shape))
        fm = _call(f, (flat - e).reshape(x.shape))
        cols.append((fp - fm) / (2.0 * h))
    out = np.stack(cols, axis=-1)
    return out.reshape(out.shape[:-1] + x.shape)


def fd_derivative(f: Callable, x, h: float = 1e-5, richardson: bool = False):
    """Central-difference gradient (scalar f) or Jacobian (vector f).

    The result has shape ``f(x).shape + x.shape``.  One Richardson step
    combines steps h and h/2 to cancel the O(h^2) term.
    """
    if h <= 0:
        raise ValueError("step must be positive")
    scalar_x = np.ndim(x) == 0
    d = _central(f, x, h)
    if richardson:
        d = (4.0 * _central(f, x, h / 2.0) - d) / 3.0
    if scalar_x:
        return d[()] if d.ndim == 0 else d
    return d


def _hessian(f, x, h):
    k = x.size
    f0 = float(_call(f, x))
    H = np.empty((k, k))
    E = np.eye(k) * h
    for i in range(k):
        fp = float(_call(f, x + E[i]))
        fm = float(_call(f, x - E[i]))
        H[i, i] = (fp - 2.0 * f0 + fm) / h**2
        for j in range(i):
            fpp = float(_call(f, x + E[i] + E[j]))
            fpm = float(_call(f, x + E[i] - E[j]))
            fmp = float(_call(f, x - E[i] + E[j]))
            fmm = float(_call(f, x - E[i] - E[j]))
            H[i, j] = H[j, i] = (fpp - fpm - fmp + fmm) / (4.0 * h**2)
    return H


def fd_hessian(f: Callable, x, h: float = 1e-4, richardson: int = 0) -> np.ndarray:
    """Symmetric central-difference Hessian of a scalar function.

    ``richardson`` extrapolation levels halve the step each time and cancel
    the h^2, h^4, ... error terms in turn.
    """
    if h <= 0:
        raise ValueError("step must be positive")
    x = np.asarray(x, dtype=float).reshape(-1)
    table = [_hessian(f, x, h / 2**i) for i in range(richardson + 1)]
    for level in range(1, richardson + 1):
        w = 4.0**level
        table = [(w * table[i + 1] - table[i]) / (w - 1.0) for i in range(len(table) - 1)]
    return table[0]


def safe_inverse(M, cond_max: float = 1e12, what: str = "matrix") -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape == (1, 1):
        v = float(M[0, 0])
        if v == 0.0 or not math.isfinite(v):
            raise np.linalg.LinAlgError(f"{what} is singular")
        return np.array([[1.0 / v]])
    if np.linalg.cond(M) > cond_max:
        raise np.linalg.LinAlgError(f"{what} is singular (condition > {cond_max:g})")
    return np.linalg.inv(M)
