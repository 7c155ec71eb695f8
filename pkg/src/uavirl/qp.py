"""Dense min-norm quadratic program for the weight-recovery step.

The problem solved here is

    minimize   ||w||^2
    subject to w . mu_E >= 1          (expert side)
               w . mu_i <= -1  for i  (every previously learned policy)

i.e. ``G w <= h`` with G stacking -mu_E and the mu_i rows and h = -1.
Writing z_0 = mu_E and z_i = -mu_i, the constraints become z_j . w >= 1
for all j, whose minimum-norm solution is w* = p* / ||p*||^2 where p* is
the point of smallest norm in the convex hull of the z_j. The hull problem
is solved with Wolfe's min-norm-point algorithm, an active-set scheme on
the hull (dual) coefficients: the QP is infeasible exactly when the origin
lies in the hull (p* = 0), and the scaled coefficients are the Lagrange
multipliers of the original constraints.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import QpNonConvergence

_FEASIBILITY_TOL = 1e-9
_MAX_MAJOR_ITERS = 500


class QpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class QpSolution:
    w: np.ndarray
    status: QpStatus
    kkt_residual: float
    lam: np.ndarray  # multipliers, one per constraint row of G


def min_norm_point(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Wolfe's algorithm: the minimum-norm point of conv(points).

    Returns (p, alpha) with p = alpha @ points, alpha a convex combination.
    """
    Z = np.asarray(points, dtype=float)
    if Z.ndim != 2 or len(Z) == 0:
        raise ValueError("points must be a non-empty 2-D array")
    m = len(Z)
    scale = max(1.0, float(np.max(np.sum(Z * Z, axis=1))))
    tol = 1e-12 * scale

    start = int(np.argmin(np.sum(Z * Z, axis=1)))
    corral = [start]
    alpha = np.array([1.0])

    for _ in range(_MAX_MAJOR_ITERS):
        p = alpha @ Z[corral]
        pp = float(p @ p)
        dots = Z @ p
        j = int(np.argmin(dots))
        if dots[j] >= pp - tol:
            break
        if j in corral:
            break  # numerically stalled; p is optimal to working precision
        corral.append(j)
        alpha = np.append(alpha, 0.0)

        # Minor cycle: move to the min-norm point of the affine hull of the
        # corral, dropping points until the affine solution is a convex one.
        while True:
            beta = _affine_min_norm(Z[corral])
            if np.all(beta > -1e-14):
                alpha = np.clip(beta, 0.0, None)
                alpha /= alpha.sum()
                break
            shrink = alpha - beta
            mask = beta <= 1e-14
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(mask & (shrink > 0), alpha / shrink, np.inf)
            theta = float(np.min(ratios))
            if not np.isfinite(theta):
                # Degenerate corral: evict the most negative coefficient.
                drop = int(np.argmin(beta))
                corral.pop(drop)
                alpha = np.delete(alpha, drop)
                alpha /= alpha.sum()
                continue
            alpha = (1.0 - theta) * alpha + theta * beta
            alpha = np.clip(alpha, 0.0, None)
            keep = alpha > 1e-14
            if keep.all():
                keep[int(np.argmin(alpha))] = False
            corral = [c for c, k in zip(corral, keep) if k]
            alpha = alpha[keep]
            alpha /= alpha.sum()
    else:
        raise QpNonConvergence(
            f"min-norm point did not converge in {_MAX_MAJOR_ITERS} iterations"
        )

    full = np.zeros(m)
    full[corral] = alpha
    return alpha @ Z[corral], full


def _affine_min_norm(Zs: np.ndarray) -> np.ndarray:
    """Coefficients (summing to 1) of the min-norm point in the affine hull."""
    k = len(Zs)
    M = Zs @ Zs.T
    system = np.zeros((k + 1, k + 1))
    system[:k, :k] = M
    system[:k, k] = 1.0
    system[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    try:
        sol = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(system, rhs, rcond=None)[0]
    return sol[:k]


def solve_min_norm_qp(G: np.ndarray, h: np.ndarray) -> QpSolution:
    """Solve min ||w||^2 s.t. G w <= h for the margin form h = -1."""
    G = np.asarray(G, dtype=float)
    h = np.asarray(h, dtype=float)
    if G.ndim != 2 or len(G) != len(h):
        raise ValueError("G and h have incompatible shapes")
    if not np.allclose(h, -1.0):
        raise ValueError("this solver handles the fixed-margin form h = -1 only")

    Z = -G
    p, coeffs = min_norm_point(Z)
    norm_p = float(np.linalg.norm(p))
    scale = max(1.0, float(np.max(np.abs(Z))))
    if norm_p <= _FEASIBILITY_TOL * scale:
        return QpSolution(
            w=np.zeros(G.shape[1]),
            status=QpStatus.INFEASIBLE,
            kkt_residual=float("nan"),
            lam=np.zeros(len(G)),
        )

    w = p / (norm_p * norm_p)
    # Stationarity 2w + G^T lam = 0 maps hull coefficients to multipliers.
    lam = 2.0 * coeffs / (norm_p * norm_p)
    residual = kkt_residual(w, lam, G, h)
    return QpSolution(w=w, status=QpStatus.OPTIMAL, kkt_residual=residual, lam=lam)


def kkt_residual(w: np.ndarray, lam: np.ndarray, G: np.ndarray, h: np.ndarray) -> float:
    """Worst violation across the KKT conditions of min ||w||^2, Gw <= h."""
    slack = G @ w - h
    stationarity = float(np.max(np.abs(2.0 * w + G.T @ lam), initial=0.0))
    primal = float(np.max(slack, initial=0.0))
    dual = float(max(0.0, -np.min(lam, initial=0.0)))
    complementarity = float(np.max(np.abs(lam * slack), initial=0.0))
    return max(stationarity, primal, dual, complementarity)
