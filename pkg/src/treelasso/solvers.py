"""Penalized least-squares solvers.

Two independent routes to the same estimator:

* :func:`solve_genlasso` -- operator splitting on the auxiliary variable
  z = M b, where M is an arbitrary penalty matrix.  Works for the stacked
  penalty [D; alpha*I] and for D alone.
* :func:`solve_lasso_path` -- cyclic coordinate descent for the plain
  l1 penalty, used on the transformed design X D^(-1) when the penalty is
  D alone, and as the lasso / elastic-net baseline.

Every returned fit carries a subgradient certificate (``kkt_residual``):
the smallest attainable sup-norm of the stationarity system over dual
vectors consistent with the active signs, computed by a small LP.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.linalg import cho_factor, cho_solve, null_space, solve_triangular
from scipy.optimize import linprog

from .errors import (
    DimensionMismatch,
    InfeasibleSystem,
    MaxIterations,
    NegativeAlpha,
    ValidationError,
)

TOL_ABS = 1e-10
TOL_REL = 1e-8
ACTIVE_TOL = 1e-8
CD_TOL = 1e-10
MAX_ADMM_ITER = 50_000
# ill-conditioned active Grams (n < p at small lambda) converge linearly but
# slowly; sweeps are ~3us each, so a generous cap beats a spurious failure
MAX_CD_SWEEPS = 5_000_000


@dataclass
class Fit:
    """A single penalized fit with its optimality certificate."""

    beta: np.ndarray
    lam: float
    objective: float
    kkt_residual: float | None
    iterations: int
    converged: bool


@dataclass
class PathFit:
    """Solutions along a decreasing lambda grid (warm-start chain)."""

    lambdas: np.ndarray
    coefs: np.ndarray  # (len(lambdas), p)
    sweeps: np.ndarray


def soft_threshold(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def stack_penalty(D, alpha):
    """Stack [D; alpha*I]; for alpha == 0 the penalty is D alone."""
    D = np.asarray(D, dtype=float)
    if alpha < 0:
        raise NegativeAlpha(f"alpha must be nonnegative, got {alpha}")
    if alpha == 0:
        return D
    p = D.shape[1]
    return np.vstack([D, alpha * np.eye(p)])


def genlasso_objective(X, y, penalty, lam, beta):
    r = y - X @ beta
    return 0.5 * float(r @ r) + lam * float(np.sum(np.abs(penalty @ beta)))


def kkt_tolerance(X, y):
    """Default certificate bound: 1e-6 * (1 + ||X'y||_inf)."""
    return 1e-6 * (1.0 + float(np.max(np.abs(X.T @ y), initial=0.0)))


def kkt_residual(X, y, penalty, lam, beta, active_tol=ACTIVE_TOL):
    """Distance of a candidate solution from subgradient optimality.

    Minimizes ||X'(y - X beta) - lam * M'u||_inf over dual vectors u with
    ||u||_inf <= 1 and u_i fixed to sign((M beta)_i) on active rows.  Zero
    certifies an exact optimum.  Solved as a linear program.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    M = np.asarray(penalty, dtype=float)
    beta = np.asarray(beta, dtype=float)
    _check_shapes(X, y, M, beta)

    g = X.T @ (y - X @ beta)
    if lam == 0:
        return float(np.max(np.abs(g), initial=0.0))

    Mb = M @ beta
    active = np.abs(Mb) > active_tol
    c_vec = g - lam * (M[active].T @ np.sign(Mb[active]))
    n_free = int(np.sum(~active))
    if n_free == 0:
        return float(np.max(np.abs(c_vec), initial=0.0))

    p = X.shape[1]
    B = lam * M[~active].T  # (p, n_free)
    # variables [u_free; t]: minimize t  s.t.  |c - B u|_k <= t, |u| <= 1
    c_lp = np.zeros(n_free + 1)
    c_lp[-1] = 1.0
    A_ub = np.zeros((2 * p, n_free + 1))
    A_ub[:p, :n_free] = -B
    A_ub[p:, :n_free] = B
    A_ub[:, -1] = -1.0
    b_ub = np.concatenate([-c_vec, c_vec])
    bounds = [(-1.0, 1.0)] * n_free + [(0.0, None)]
    res = linprog(c_lp, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status == 0:
        return max(float(res.fun), 0.0)
    # LP failure is not expected; fall back to a clipped least-squares dual
    u, *_ = np.linalg.lstsq(B, c_vec, rcond=None)
    u = np.clip(u, -1.0, 1.0)
    return float(np.max(np.abs(c_vec - B @ u), initial=0.0))


def lambda_max(X, y, penalty, method="lp"):
    """Smallest lambda at which beta = 0 is optimal.

    Zero is optimal iff X'y lies in lam * M'{||u||_inf <= 1}, so the exact
    threshold is min{||u||_inf : M'u = X'y}.  For a square invertible
    penalty the dual vector is unique; otherwise an LP finds the minimum.
    ``method="lstsq"`` returns the least-squares dual's sup-norm, an upper
    bound verified by a zero solve.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    M = np.asarray(penalty, dtype=float)
    g = X.T @ y
    m, p = M.shape
    if g.shape != (p,):
        raise DimensionMismatch(f"X'y has shape {g.shape}, penalty expects ({p},)")
    if np.max(np.abs(g), initial=0.0) == 0.0:
        return 0.0

    if m == p:
        u = np.linalg.solve(M.T, g)
        return float(np.max(np.abs(u)))

    if method == "lstsq":
        u, *_ = np.linalg.lstsq(M.T, g, rcond=None)
        if np.max(np.abs(M.T @ u - g)) > 1e-8 * (1.0 + np.max(np.abs(g))):
            raise InfeasibleSystem("X'y is not in the row space of the penalty")
        lam0 = float(np.max(np.abs(u)))
        fit = solve_genlasso(X, y, M, lam0, certify=False)
        if np.max(np.abs(fit.beta)) > 1e-6:
            raise InfeasibleSystem("heuristic lambda_max failed verification")
        return lam0

    # variables [u (m); t]: minimize t  s.t.  M'u = X'y, -t <= u_i <= t
    c_lp = np.zeros(m + 1)
    c_lp[-1] = 1.0
    A_eq = np.hstack([M.T, np.zeros((p, 1))])
    A_ub = np.zeros((2 * m, m + 1))
    A_ub[:m, :m] = np.eye(m)
    A_ub[m:, :m] = -np.eye(m)
    A_ub[:, -1] = -1.0
    bounds = [(None, None)] * m + [(0.0, None)]
    res = linprog(
        c_lp, A_ub=A_ub, b_ub=np.zeros(2 * m), A_eq=A_eq, b_eq=g,
        bounds=bounds, method="highs",
    )
    if res.status != 0:
        raise InfeasibleSystem(f"lambda_max LP failed with status {res.status}")
    return float(res.fun)


def solve_genlasso(
    X,
    y,
    penalty,
    lam,
    rho=1.0,
    tol_abs=TOL_ABS,
    tol_rel=TOL_REL,
    max_iter=MAX_ADMM_ITER,
    warm=None,
    certify=True,
    active_tol=ACTIVE_TOL,
):
    """Minimize 0.5 ||y - X b||^2 + lam ||M b||_1 by operator splitting.

    Splits on z = M b: the b-update solves (X'X + rho M'M) b = X'y +
    rho M'(z - u), the z-update soft-thresholds, and the scaled dual u
    accumulates the constraint violation.  The quadratic system is positive
    definite whenever M has full column rank (always true for the stacked
    tree penalty), so no ridge augmentation is needed even when n < p.
    The step size rho is rebalanced by doubling/halving whenever the primal
    and dual residuals diverge by more than 10x; the factorization is
    cached per rho.

    Returns a :class:`Fit`; ``converged`` requires both residual tolerances
    and (when ``certify``) the KKT certificate under the default bound.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    M = np.asarray(penalty, dtype=float)
    beta0 = None if warm is None else warm[0]
    _check_shapes(X, y, M, beta0)
    if lam < 0:
        raise ValidationError(f"lambda must be nonnegative, got {lam}")
    n, p = X.shape
    m = M.shape[0]

    if lam == 0:
        beta, *_ = np.linalg.lstsq(X, y, rcond=None)
        kkt = kkt_residual(X, y, M, 0.0, beta) if certify else None
        return Fit(
            beta=beta,
            lam=0.0,
            objective=genlasso_objective(X, y, M, 0.0, beta),
            kkt_residual=kkt,
            iterations=0,
            converged=kkt is None or kkt <= kkt_tolerance(X, y),
        )

    beta, z, u, it, converged = _admm(
        X, y, M, lam, warm, rho, tol_abs, tol_rel, max_iter
    )
    beta = _polish(X, y, M, lam, beta, z)
    kkt = kkt_residual(X, y, M, lam, beta, active_tol) if certify else None
    if certify and kkt > kkt_tolerance(X, y):
        converged = False
    return Fit(
        beta=beta,
        lam=float(lam),
        objective=genlasso_objective(X, y, M, lam, beta),
        kkt_residual=kkt,
        iterations=it,
        converged=converged,
    )


def _polish(X, y, M, lam, beta, z):
    """Refit on the sign pattern carried by the auxiliary variable.

    The soft-threshold step leaves exact zeros in z, identifying the
    pattern of M beta at the optimum.  Restricting beta to the null space
    of the zeroed rows and solving the resulting smooth problem snaps the
    iterate onto that pattern; the polished point is kept only when it does
    not worsen the objective.
    """
    zero = z == 0.0
    free = ~zero
    p = M.shape[1]
    if zero.any():
        N = null_space(M[zero], rcond=1e-10)
        if N.shape[1] == 0:
            cand = np.zeros(p)
            if _better(X, y, M, lam, cand, beta):
                return cand
            return beta
    else:
        N = np.eye(p)
    rhs = N.T @ (X.T @ y - lam * (M[free].T @ np.sign(z[free])))
    H = N.T @ (X.T @ X) @ N
    w, *_ = np.linalg.lstsq(H, rhs, rcond=None)
    cand = N @ w
    return cand if _better(X, y, M, lam, cand, beta) else beta


def _better(X, y, M, lam, cand, beta):
    return genlasso_objective(X, y, M, lam, cand) <= genlasso_objective(
        X, y, M, lam, beta
    )


def _admm(X, y, M, lam, warm, rho, tol_abs, tol_rel, max_iter):
    n, p = X.shape
    m = M.shape[0]
    G = X.T @ X
    c = X.T @ y
    P = M.T @ M

    if warm is not None:
        beta, z, u = (np.array(v, dtype=float) for v in warm)
    else:
        beta = np.zeros(p)
        z = np.zeros(m)
        u = np.zeros(m)

    factor = cho_factor(G + rho * P)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        beta = cho_solve(factor, c + rho * (M.T @ (z - u)))
        Mb = M @ beta
        z_old = z
        z = soft_threshold(Mb + u, lam / rho)
        u = u + Mb - z

        r_norm = float(np.linalg.norm(Mb - z))
        s_norm = float(rho * np.linalg.norm(M.T @ (z - z_old)))
        eps_pri = np.sqrt(m) * tol_abs + tol_rel * max(
            np.linalg.norm(Mb), np.linalg.norm(z)
        )
        eps_dual = np.sqrt(p) * tol_abs + tol_rel * rho * np.linalg.norm(M.T @ u)
        if r_norm <= eps_pri and s_norm <= eps_dual:
            converged = True
            break

        if r_norm > 10 * s_norm and rho < 1e8:
            rho *= 2.0
            u /= 2.0
            factor = cho_factor(G + rho * P)
        elif s_norm > 10 * r_norm and rho > 1e-8:
            rho /= 2.0
            u *= 2.0
            factor = cho_factor(G + rho * P)
    return beta, z, u, it, converged


def solve_genlasso_path(
    X,
    y,
    penalty,
    lambdas,
    rho=1.0,
    tol_abs=TOL_ABS,
    tol_rel=TOL_REL,
    max_iter=MAX_ADMM_ITER,
):
    """Warm-started operator-splitting solves along a decreasing lambda grid.

    The full (beta, z, u) state is carried from one grid point to the next;
    certification is deferred to whichever grid point is finally selected.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    M = np.asarray(penalty, dtype=float)
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.ndim != 1 or len(lambdas) == 0 or np.any(np.diff(lambdas) >= 0):
        raise ValidationError("lambda grid must be strictly decreasing")
    if np.any(lambdas < 0):
        raise ValidationError("lambda grid must be nonnegative")
    _check_shapes(X, y, M)
    p = M.shape[1]
    coefs = np.empty((len(lambdas), p))
    iters = np.empty(len(lambdas), dtype=int)
    state = None
    for k, lam in enumerate(lambdas):
        if lam == 0:
            fit = solve_genlasso(X, y, M, 0.0, certify=False)
            beta = fit.beta
            coefs[k], iters[k] = beta, fit.iterations
            state = (beta, M @ beta, np.zeros(M.shape[0]))
            continue
        beta, z, u, it, _ = _admm(
            X, y, M, lam, state, rho, tol_abs, tol_rel, max_iter
        )
        state = (beta, z, u)
        coefs[k], iters[k] = _polish(X, y, M, lam, beta, z), it
    return PathFit(lambdas=lambdas.copy(), coefs=coefs, sweeps=iters)


@njit(cache=True)
def _cd_pass(G, c, beta, v, lam1, lam2, active_only):
    """One cyclic sweep; returns the largest coefficient change."""
    p = beta.shape[0]
    dmax = 0.0
    for j in range(p):
        if active_only and beta[j] == 0.0:
            continue
        gjj = G[j, j]
        if gjj <= 0.0:
            continue  # an all-zero column never enters
        bj = beta[j]
        rho = c[j] - v[j] + gjj * bj
        if rho > lam1:
            new = (rho - lam1) / (gjj + lam2)
        elif rho < -lam1:
            new = (rho + lam1) / (gjj + lam2)
        else:
            new = 0.0
        if new != bj:
            d = new - bj
            beta[j] = new
            for k in range(p):
                v[k] += d * G[k, j]
            if abs(d) > dmax:
                dmax = abs(d)
    return dmax


@njit(cache=True)
def _cd_kernel(G, c, beta, lam1, lam2, tol, max_sweeps):
    """Cyclic coordinate descent on 0.5 b'Gb - c'b + lam1||b||_1 + lam2/2||b||^2.

    Full sweeps alternate with sweeps restricted to the current active set;
    convergence requires a full sweep whose largest coefficient change is
    below ``tol``.  Fixed coordinate order keeps the result deterministic.
    Returns the sweep count, or -1 if the cap was reached.
    """
    v = np.dot(G, beta)
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        if _cd_pass(G, c, beta, v, lam1, lam2, False) < tol:
            return sweeps
        while sweeps < max_sweeps:
            sweeps += 1
            if _cd_pass(G, c, beta, v, lam1, lam2, True) < tol:
                break
    return -1


def _cd_sweeps(G, c, beta, lam1, lam2, tol, max_sweeps):
    """Run the descent kernel, mutating ``beta``; raises on sweep exhaustion."""
    sweeps = _cd_kernel(G, c, beta, lam1, lam2, tol, max_sweeps)
    if sweeps < 0:
        raise MaxIterations(
            f"coordinate descent did not converge in {max_sweeps} sweeps"
        )
    return sweeps


def solve_lasso_path(Z, y, lambdas, tol=CD_TOL, max_sweeps=MAX_CD_SWEEPS, beta0=None):
    """Lasso solutions along a decreasing grid by warm-started coordinate descent.

    Minimizes 0.5 ||y - Z g||^2 + lam ||g||_1 at each grid point, sweeping
    coordinates until the largest coefficient change falls below ``tol``.
    """
    Z = np.asarray(Z, dtype=float)
    y = np.asarray(y, dtype=float)
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.ndim != 1 or len(lambdas) == 0:
        raise ValidationError("lambda grid must be a nonempty 1-d sequence")
    if np.any(lambdas <= 0) or np.any(np.diff(lambdas) >= 0):
        raise ValidationError("lambda grid must be strictly decreasing and positive")
    n, p = Z.shape
    G = Z.T @ Z
    c = Z.T @ y
    beta = np.zeros(p) if beta0 is None else np.array(beta0, dtype=float)
    coefs = np.empty((len(lambdas), p))
    sweeps = np.empty(len(lambdas), dtype=int)
    for k, lam in enumerate(lambdas):
        sweeps[k] = _cd_sweeps(G, c, beta, lam, 0.0, tol, max_sweeps)
        coefs[k] = beta
    return PathFit(lambdas=lambdas.copy(), coefs=coefs, sweeps=sweeps)


def elastic_net_kkt_residual(X, y, lam, l1_ratio, beta, active_tol=ACTIVE_TOL):
    """Sup-norm violation of the elastic-net subgradient conditions."""
    g = X.T @ (y - X @ beta) - lam * (1.0 - l1_ratio) * beta
    lam1 = lam * l1_ratio
    active = np.abs(beta) > active_tol
    res_active = np.abs(g[active] - lam1 * np.sign(beta[active]))
    res_inactive = np.maximum(np.abs(g[~active]) - lam1, 0.0)
    return float(
        max(np.max(res_active, initial=0.0), np.max(res_inactive, initial=0.0))
    )


def solve_elastic_net(
    X, y, lam, l1_ratio, tol=CD_TOL, max_sweeps=MAX_CD_SWEEPS, beta0=None
):
    """Minimize 0.5||y - Xb||^2 + lam*(l1_ratio*||b||_1 + (1-l1_ratio)*||b||^2/2).

    ``l1_ratio`` is the l1 fraction: 1 recovers the lasso, 0 pure ridge.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if not 0.0 <= l1_ratio <= 1.0:
        raise ValidationError(f"l1_ratio must be in [0, 1], got {l1_ratio}")
    if lam < 0:
        raise ValidationError(f"lambda must be nonnegative, got {lam}")
    n, p = X.shape
    G = X.T @ X
    c = X.T @ y
    beta = np.zeros(p) if beta0 is None else np.array(beta0, dtype=float)
    if lam == 0:
        beta, *_ = np.linalg.lstsq(X, y, rcond=None)
        sweeps = 0
    else:
        sweeps = _cd_sweeps(G, c, beta, lam * l1_ratio, lam * (1.0 - l1_ratio),
                            tol, max_sweeps)
    r = y - X @ beta
    obj = 0.5 * float(r @ r) + lam * (
        l1_ratio * float(np.sum(np.abs(beta)))
        + 0.5 * (1.0 - l1_ratio) * float(beta @ beta)
    )
    kkt = elastic_net_kkt_residual(X, y, lam, l1_ratio, beta)
    return Fit(
        beta=beta,
        lam=float(lam),
        objective=obj,
        kkt_residual=kkt,
        iterations=sweeps,
        converged=kkt <= kkt_tolerance(X, y),
    )


def transform_design(X, D):
    """Transformed design X D^(-1), exact for triangular influence matrices."""
    if _is_upper_triangular(D):
        return solve_triangular(D.T, X.T, lower=True).T
    return np.linalg.solve(D.T, X.T).T


def backtransform_coefs(D, gammas):
    """Map transformed-scale coefficient rows back through beta = D^(-1) gamma."""
    gammas = np.asarray(gammas, dtype=float)
    if _is_upper_triangular(D):
        return solve_triangular(D, gammas.T, lower=False).T
    return np.linalg.solve(D, gammas.T).T


def _is_upper_triangular(D):
    return np.all(D[np.tril_indices_from(D, k=-1)] == 0.0)


def _check_shapes(X, y, M, beta=None):
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise DimensionMismatch(
            f"X {getattr(X, 'shape', None)} and y {getattr(y, 'shape', None)} disagree"
        )
    if M.ndim != 2 or M.shape[1] != X.shape[1]:
        raise DimensionMismatch(
            f"penalty {M.shape} does not match X with {X.shape[1]} columns"
        )
    if beta is not None and np.asarray(beta).shape != (X.shape[1],):
        raise DimensionMismatch("beta has the wrong length")
