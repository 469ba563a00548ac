"""Dense strictly convex QP with double-sided linear constraints.

    min 1/2 phi^T G phi + c^T phi   s.t.   b <= A phi <= B

solved by an active-set iteration: with working set W, multipliers come
from (M G^-1 M^T) lam = M (phi + G^-1 c) and the step from
G p = M^T lam - G phi - c, where M stacks the rows of A active in W.
The step is clipped at the first blocking constraint, which then enters
W; at a stationary point the constraint with the most negative
multiplier leaves W (lowest index on ties).  The start is the null
vector, always feasible in the reconstruction use where b <= 0 <= B.

A batched variant runs the same iteration simultaneously over many
problems of identical shape; it powers the per-cell reconstruction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ACTIVITY_TOL = 1e-12
MULTIPLIER_TOL = 1e-12
DIRECTION_TOL = 1e-12
PIVOT_TOL = 1e-12

LOWER, UPPER = -1, 1


class QPError(ValueError):
    pass


@dataclass
class QPProblem:
    G: np.ndarray
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        self.G = np.asarray(self.G, dtype=float)
        self.c = np.asarray(self.c, dtype=float)
        self.A = np.asarray(self.A, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.B = np.asarray(self.B, dtype=float)
        n = len(self.c)
        m = len(self.b)
        if self.G.shape != (n, n) or self.A.shape != (m, n) or self.B.shape != (m,):
            raise QPError("inconsistent QP dimensions")
        if np.any(self.b > self.B):
            raise QPError("lower bound exceeds upper bound")

    def objective(self, phi: np.ndarray) -> float:
        return float(0.5 * phi @ self.G @ phi + self.c @ phi)


@dataclass
class QPSolution:
    phi: np.ndarray
    active_set: list          # (row index, LOWER or UPPER)
    multipliers: np.ndarray   # one per active constraint, >= 0 at optimum
    iterations: int
    status: str               # "optimal" | "fallback"
    regularized: bool = False
    trajectory: list = field(default_factory=list)


def _chol_with_regularization(G: np.ndarray):
    try:
        return np.linalg.cholesky(G), False
    except np.linalg.LinAlgError:
        eps = 1e-10 * np.trace(G) / len(G)
        try:
            return np.linalg.cholesky(G + eps * np.eye(len(G))), True
        except np.linalg.LinAlgError as exc:
            raise QPError("G is not positive definite") from exc


def solve_qp(problem: QPProblem, start: np.ndarray | None = None,
             record_iterates: bool = False,
             max_iterations: int | None = None) -> QPSolution:
    """Active-set solve from a feasible start (defaults to the null vector)."""
    G, c, A, b, B = problem.G, problem.c, problem.A, problem.b, problem.B
    n = len(c)
    m = len(b)
    phi = np.zeros(n) if start is None else np.array(start, dtype=float)
    scale = np.maximum(1.0, np.maximum(np.abs(b), np.abs(B)))
    Aphi = A @ phi
    if np.any(Aphi < b - ACTIVITY_TOL * scale) or np.any(Aphi > B + ACTIVITY_TOL * scale):
        raise QPError("start point is infeasible")

    L, regularized = _chol_with_regularization(G)
    Ginv = np.linalg.inv(L.T) @ np.linalg.inv(L)
    Ginv_c = Ginv @ c
    AGinv = A @ Ginv
    P = AGinv @ A.T

    work: list[tuple[int, int]] = []   # (row, side)
    cap = 10 * (2 * m + 1) if max_iterations is None else max_iterations
    trajectory = [phi.copy()] if record_iterates else []
    mu = np.zeros(0)
    for it in range(1, cap + 1):
        rows = [r for r, _ in work]
        if rows:
            K = P[np.ix_(rows, rows)]
            rhs = Aphi[rows] + AGinv[rows] @ c
            try:
                mu = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                break   # degenerate working set: fall back to the start
            p = AGinv[rows].T @ mu - phi - Ginv_c
        else:
            mu = np.zeros(0)
            p = -phi - Ginv_c
        if np.max(np.abs(p), initial=0.0) <= DIRECTION_TOL * (1.0 + np.max(np.abs(phi), initial=0.0)):
            # lower-active constraints carry +mu, upper-active -mu
            lam = np.array([mu[k] if s == LOWER else -mu[k]
                            for k, (_, s) in enumerate(work)])
            if len(lam) == 0 or lam.min() >= -MULTIPLIER_TOL:
                return QPSolution(phi, list(work), lam, it, "optimal",
                                  regularized, trajectory)
            drop = int(np.argmin(lam))
            work.pop(drop)
            continue
        Ap = A @ p
        active_rows = set(rows)
        alpha = 1.0
        block = None
        for l in range(m):
            if l in active_rows:
                continue
            t = Ap[l]
            if t < -DIRECTION_TOL:
                beta = max(0.0, (b[l] - Aphi[l]) / t)
                side = LOWER
            elif t > DIRECTION_TOL:
                beta = max(0.0, (B[l] - Aphi[l]) / t)
                side = UPPER
            else:
                continue
            if beta < alpha:
                # skip candidates that would make the working set singular
                if rows:
                    v = P[np.ix_(rows, [l])].ravel()
                    pivot = P[l, l] - v @ np.linalg.solve(P[np.ix_(rows, rows)], v)
                    if pivot < PIVOT_TOL * max(P[l, l], 1.0):
                        continue
                alpha = beta
                block = (l, side)
        phi = phi + alpha * p
        Aphi = A @ phi
        if block is not None:
            work.append(block)
        if record_iterates:
            trajectory.append(phi.copy())
    start_phi = np.zeros(n) if start is None else np.array(start, dtype=float)
    return QPSolution(start_phi, [], np.zeros(0), cap, "fallback",
                      regularized, trajectory)


def kkt_residual(problem: QPProblem, solution: QPSolution) -> float:
    """Max of stationarity, primal/dual feasibility and complementarity."""
    G, c, A, b, B = problem.G, problem.c, problem.A, problem.b, problem.B
    phi = solution.phi
    # stationarity: G phi + c == sum lam_l sgn_l a_l, sgn +1 lower / -1 upper
    Mt = np.zeros_like(phi)
    comp = 0.0
    for k, (row, side) in enumerate(solution.active_set):
        sgn = 1.0 if side == LOWER else -1.0
        Mt = Mt + solution.multipliers[k] * sgn * A[row]
        target = b[row] if side == LOWER else B[row]
        comp = max(comp, abs(A[row] @ phi - target))
    stat = float(np.max(np.abs(G @ phi + c - Mt), initial=0.0))
    Aphi = A @ phi
    primal = float(max(np.max(b - Aphi, initial=0.0), np.max(Aphi - B, initial=0.0), 0.0))
    dual = float(max(np.max(-solution.multipliers, initial=0.0), 0.0))
    return max(stat, primal, dual, comp)


# ---------------------------------------------------------------------------
# batched active set


def solve_qp_batch(Ginv: np.ndarray, A: np.ndarray, c: np.ndarray,
                   b: np.ndarray, B: np.ndarray):
    """Batched active-set solve of k problems sharing shape (m rows, n vars).

    Ginv (k,n,n), A (k,m,n), c (k,n), b,B (k,m).  Starts at phi = 0, which
    must be feasible (b <= 0 <= B).  Returns (phi (k,n), fallback (k,) bool,
    iterations (k,)).
    """
    k, m, n = A.shape
    phi = np.zeros((k, n))
    Ginv_c = np.einsum("kij,kj->ki", Ginv, c)
    AGinv = np.einsum("kmi,kij->kmj", A, Ginv)
    P = np.einsum("kmi,kli->kml", AGinv, A)
    AGc = np.einsum("kmi,ki->km", AGinv, c)
    Aphi = np.zeros((k, m))
    act = np.zeros((k, m), dtype=np.int8)      # 0 free, 1 lower, 2 upper
    alive = np.arange(k)
    out_phi = np.zeros((k, n))
    out_iter = np.zeros(k, dtype=np.int64)
    fallback = np.zeros(k, dtype=bool)
    cap = 10 * (2 * m + 1)
    eye = np.eye(m, dtype=bool)

    for it in range(1, cap + 1):
        ka = len(alive)
        if ka == 0:
            break
        active = act > 0
        K = np.where(active[:, :, None] & active[:, None, :], P, 0.0)
        K[:, eye] = np.where(active, K[:, eye], 1.0)
        rhs = np.where(active, Aphi + AGc, 0.0)
        try:
            mu = np.linalg.solve(K, rhs[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            # a degenerate working set slipped through the direction
            # tolerance; nudge the diagonal and keep going
            K[:, eye] += 1e-13
            mu = np.linalg.solve(K, rhs[:, :, None])[:, :, 0]
        mu = np.where(active, mu, 0.0)
        p = np.einsum("kmi,km->ki", AGinv, mu) - phi - Ginv_c
        stationary = np.max(np.abs(p), axis=1) <= DIRECTION_TOL * (
            1.0 + np.max(np.abs(phi), axis=1))

        # stationary problems: check multiplier signs, drop most negative
        lam = np.where(act == 1, mu, np.where(act == 2, -mu, np.inf))
        lam_min = lam.min(axis=1)
        done = stationary & (lam_min >= -MULTIPLIER_TOL)
        if np.any(done):
            idx = alive[done]
            out_phi[idx] = phi[done]
            out_iter[idx] = it
        drop = stationary & ~done
        if np.any(drop):
            rows = np.argmin(lam[drop], axis=1)
            act[np.nonzero(drop)[0], rows] = 0

        # moving problems: step to the nearest blocking constraint
        move = ~stationary
        if np.any(move):
            Ap = np.einsum("kmi,ki->km", A, p)
            inact = ~active
            lo_block = move[:, None] & inact & (Ap < -DIRECTION_TOL)
            hi_block = move[:, None] & inact & (Ap > DIRECTION_TOL)
            beta = np.full((ka, m), np.inf)
            np.divide(b - Aphi, Ap, out=beta, where=lo_block)
            hi_beta = np.full((ka, m), np.inf)
            np.divide(B - Aphi, Ap, out=hi_beta, where=hi_block)
            beta = np.minimum(np.maximum(beta, 0.0), np.maximum(hi_beta, 0.0))
            beta[~(lo_block | hi_block)] = np.inf
            beta_min = beta.min(axis=1)
            alpha = np.minimum(1.0, beta_min)
            step = np.where(move, alpha, 0.0)
            phi = phi + step[:, None] * p
            Aphi = Aphi + step[:, None] * Ap
            blocked = move & (beta_min < 1.0)
            if np.any(blocked):
                rows = np.argmin(beta[blocked], axis=1)
                which = np.nonzero(blocked)[0]
                side = np.where(Ap[which, rows] < 0, 1, 2).astype(np.int8)
                act[which, rows] = side

        # compress to unfinished problems
        if np.any(done):
            keep = ~done
            alive = alive[keep]
            phi, Aphi, act = phi[keep], Aphi[keep], act[keep]
            P, AGinv, AGc = P[keep], AGinv[keep], AGc[keep]
            Ginv_c = Ginv_c[keep]
            A = A[keep]
            b, B = b[keep], B[keep]

    if len(alive):
        fallback[alive] = True
        out_iter[alive] = cap
    return out_phi, fallback, out_iter
