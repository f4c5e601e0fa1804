"""Tuning by the Cp criterion and effect reporting.

The criterion is rss - n*sigma^2 + 2*sigma^2*df, minimized jointly over the
penalty mixing weight alpha and the grid of lambda values.  The degrees of
freedom of a penalized fit is the dimension of the image under X of the
null space of the inactive penalty rows, the unbiased estimate for this
family of estimators.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space

from .errors import (
    DegenerateResidual,
    DimensionMismatch,
    NonpositiveSigma,
    ValidationError,
)
from .solvers import (
    ACTIVE_TOL,
    Fit,
    backtransform_coefs,
    kkt_residual,
    kkt_tolerance,
    lambda_max,
    solve_elastic_net,
    solve_genlasso,
    solve_genlasso_path,
    solve_lasso_path,
    stack_penalty,
    transform_design,
)

DEFAULT_ALPHA_GRID = (0.0, 0.25, 0.5, 1.0, 2.0)
DEFAULT_L1_RATIO_GRID = (0.1, 0.3, 0.5, 0.7, 0.9)
N_LAMBDAS = 100
LAMBDA_MIN_RATIO = 1e-4
SV_RCOND = 1e-10


def degrees_of_freedom(X, penalty, beta, active_tol=ACTIVE_TOL, rcond=SV_RCOND):
    """Degrees of freedom of a penalized fit.

    Rows of the penalty where |(M beta)_i| <= active_tol are inactive; the
    fit's effective dimension is dim(X . null(M_inactive)), computed with a
    rank-revealing SVD (singular values below rcond * s_max count as zero).
    For the identity penalty and full-rank X this is the number of nonzero
    coefficients.
    """
    X = np.asarray(X, dtype=float)
    M = np.asarray(penalty, dtype=float)
    beta = np.asarray(beta, dtype=float)
    p = X.shape[1]
    inactive = np.abs(M @ beta) <= active_tol
    M_in = M[inactive]
    if M_in.shape[0] == 0:
        N = np.eye(p)
    else:
        N = null_space(M_in, rcond=rcond)
        if N.shape[1] == 0:
            return 0
    s = np.linalg.svd(X @ N, compute_uv=False)
    if s.size == 0 or s[0] <= 0.0:
        return 0
    return int(np.sum(s > rcond * s[0]))


def cp_value(rss, n_samples, sigma2, df):
    """rss - n*sigma^2 + 2*sigma^2*df."""
    if sigma2 <= 0:
        raise NonpositiveSigma(f"sigma^2 must be positive, got {sigma2}")
    return float(rss) - n_samples * sigma2 + 2.0 * sigma2 * df


def lambda_grid(lam_max, num=N_LAMBDAS, min_ratio=LAMBDA_MIN_RATIO):
    """Geometric grid from lam_max down to min_ratio * lam_max."""
    if lam_max <= 0:
        raise ValidationError(f"lambda_max must be positive, got {lam_max}")
    return np.geomspace(lam_max, lam_max * min_ratio, num)


def estimate_noise_variance(X, y, D=None, n_folds=10, seed=0):
    """Estimate sigma^2 for the Cp criterion.

    With n > p + 1 the usual unbiased OLS estimate rss/(n - p) is used.
    Otherwise the penalized fit at the lambda minimizing n_folds-fold
    cross-validated prediction error is refit on the full data and
    sigma^2 = rss / (n - df).  A user-supplied sigma^2 should simply be
    passed to :func:`select_model` instead of calling this.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape

    y_scale = float(y @ y)

    if n > p + 1:
        beta, *_ = np.linalg.lstsq(X, y, rcond=None)
        rss = float(np.sum((y - X @ beta) ** 2))
        if rss <= 1e-12 * y_scale:
            warnings.warn(
                "zero residual variance: the response is an exact linear "
                "function of the predictors",
                RuntimeWarning,
            )
        return rss / (n - p)

    if D is None:
        D = np.eye(p)
    Z = transform_design(X, D)
    lam_top = lambda_max(X, y, D)
    if lam_top == 0.0:
        raise DegenerateResidual("X'y is zero; cannot estimate noise variance")
    grid = lambda_grid(lam_top)

    rng = np.random.default_rng(seed)
    fold = rng.permutation(n) % n_folds
    cv_err = np.zeros(len(grid))
    for f in range(n_folds):
        tr, va = fold != f, fold == f
        if not va.any() or not tr.any():
            continue
        path = solve_lasso_path(Z[tr], y[tr], grid)
        pred = Z[va] @ path.coefs.T
        cv_err += np.sum((y[va][:, None] - pred) ** 2, axis=0)
    best = int(np.argmin(cv_err))
    path = solve_lasso_path(Z, y, grid[: best + 1])
    gamma = path.coefs[-1]
    beta = backtransform_coefs(D, gamma[None, :])[0]
    rss = float(np.sum((y - X @ beta) ** 2))
    df = degrees_of_freedom(X, D, beta)
    if rss <= 1e-12 * y_scale:
        raise DegenerateResidual(
            "zero residual with n <= p + 1; noise variance is unidentifiable"
        )
    if n - df <= 0:
        raise DegenerateResidual(f"no residual degrees of freedom (df={df}, n={n})")
    return rss / (n - df)


@dataclass
class TuningResult:
    """Cp table over the (alpha, lambda) grid and the selected fit."""

    best_alpha: float
    best_lambda: float
    best_index: int
    table: np.ndarray  # columns: alpha, lambda, df, rss, cp
    coefs: np.ndarray  # (n_rows, p), fitted beta per table row
    fit: Fit
    gamma: np.ndarray | None
    sigma2: float

    COLUMNS = ("alpha", "lambda", "df", "rss", "cp")

    @property
    def beta(self):
        return self.fit.beta


def _evaluate_path(X, y, penalty, coefs, sigma2, active_tol):
    n = X.shape[0]
    rows = np.empty((coefs.shape[0], 3))
    for k in range(coefs.shape[0]):
        rss = float(np.sum((y - X @ coefs[k]) ** 2))
        df = degrees_of_freedom(X, penalty, coefs[k], active_tol=active_tol)
        rows[k] = (df, rss, cp_value(rss, n, sigma2, df))
    return rows


def _pick_best(table):
    """Smallest cp; exact ties resolved toward larger lambda, then smaller alpha."""
    order = sorted(
        range(table.shape[0]),
        key=lambda k: (table[k, 4], -table[k, 1], table[k, 0]),
    )
    return order[0]


def select_model(
    X,
    y,
    D=None,
    alpha_grid=DEFAULT_ALPHA_GRID,
    sigma2=None,
    n_lambdas=N_LAMBDAS,
    lambda_min_ratio=LAMBDA_MIN_RATIO,
    active_tol=ACTIVE_TOL,
    seed=0,
):
    """Tune (alpha, lambda) by Cp over warm-started solution paths.

    For alpha = 0 the problem is solved on the transformed design X D^(-1)
    by coordinate descent and mapped back; for alpha > 0 the stacked
    penalty [D; alpha*I] is handled by operator splitting.  The selected
    fit is re-certified, and the total effects D beta are attached.

    Parameters
    ----------
    D : (p, p) influence matrix; identity (plain lasso) when omitted.
    alpha_grid : mixing weights to search; use (0.0,) for the pure
        total-effect penalty.
    sigma2 : known noise variance; estimated when omitted.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if D is None:
        D = np.eye(p)
    else:
        D = np.asarray(D, dtype=float)
        if D.shape != (p, p):
            raise DimensionMismatch(f"D must be {p}x{p}, got {D.shape}")
    if len(alpha_grid) == 0:
        raise ValidationError("alpha_grid must be nonempty")
    if sigma2 is None:
        sigma2 = estimate_noise_variance(X, y, D=D, seed=seed)
    if sigma2 <= 0:
        raise NonpositiveSigma(f"sigma^2 must be positive, got {sigma2}")

    blocks = []
    coef_blocks = []
    for alpha in sorted(set(float(a) for a in alpha_grid)):
        penalty = stack_penalty(D, alpha)
        lam_top = lambda_max(X, y, penalty)
        if lam_top == 0.0:
            continue
        grid = lambda_grid(lam_top, num=n_lambdas, min_ratio=lambda_min_ratio)
        if alpha == 0.0:
            Z = transform_design(X, D)
            path = solve_lasso_path(Z, y, grid)
            coefs = backtransform_coefs(D, path.coefs)
        else:
            path = solve_genlasso_path(X, y, penalty, grid)
            coefs = path.coefs
        stats = _evaluate_path(X, y, penalty, coefs, sigma2, active_tol)
        block = np.column_stack(
            [np.full(len(grid), alpha), grid, stats]
        )
        blocks.append(block)
        coef_blocks.append(coefs)

    if not blocks:
        raise DegenerateResidual("X'y is zero for every alpha; nothing to tune")
    table = np.vstack(blocks)
    coefs = np.vstack(coef_blocks)
    best = _pick_best(table)
    best_alpha, best_lambda = float(table[best, 0]), float(table[best, 1])
    penalty = stack_penalty(D, best_alpha)

    if best_alpha == 0.0:
        beta = coefs[best]
        kkt = kkt_residual(X, y, penalty, best_lambda, beta, active_tol)
        r = y - X @ beta
        fit = Fit(
            beta=beta,
            lam=best_lambda,
            objective=0.5 * float(r @ r)
            + best_lambda * float(np.sum(np.abs(penalty @ beta))),
            kkt_residual=kkt,
            iterations=0,
            converged=kkt <= kkt_tolerance(X, y),
        )
    else:
        Mb = penalty @ coefs[best]
        fit = solve_genlasso(
            X, y, penalty, best_lambda,
            warm=(coefs[best], Mb, np.zeros(penalty.shape[0])),
        )

    return TuningResult(
        best_alpha=best_alpha,
        best_lambda=best_lambda,
        best_index=best,
        table=table,
        coefs=coefs,
        fit=fit,
        gamma=D @ fit.beta,
        sigma2=float(sigma2),
    )


def _elastic_net_df(X_active, lam2):
    """trace(X_A (X_A'X_A + lam2 I)^(-1) X_A') via singular values."""
    if X_active.shape[1] == 0:
        return 0.0
    s = np.linalg.svd(X_active, compute_uv=False)
    if lam2 == 0.0:
        cutoff = SV_RCOND * (s[0] if s.size else 0.0)
        return float(np.sum(s > cutoff))
    return float(np.sum(s**2 / (s**2 + lam2)))


def select_elastic_net(
    X,
    y,
    l1_ratio_grid=DEFAULT_L1_RATIO_GRID,
    sigma2=None,
    D=None,
    n_lambdas=N_LAMBDAS,
    lambda_min_ratio=LAMBDA_MIN_RATIO,
    active_tol=ACTIVE_TOL,
    seed=0,
):
    """Tune the elastic net over (l1_ratio, lambda) by Cp.

    The ``alpha`` column of the returned table holds the l1 fraction.  The
    ridge part contributes fractional degrees of freedom through the
    shrunken singular values of the active columns.  ``D`` is only used to
    report total effects alongside the selected coefficients.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if sigma2 is None:
        sigma2 = estimate_noise_variance(X, y, D=D, seed=seed)
    if sigma2 <= 0:
        raise NonpositiveSigma(f"sigma^2 must be positive, got {sigma2}")

    gmax = float(np.max(np.abs(X.T @ y)))
    if gmax == 0.0:
        raise DegenerateResidual("X'y is zero; nothing to tune")

    rows = []
    coef_rows = []
    fits = {}
    for r1 in l1_ratio_grid:
        if not 0.0 < r1 <= 1.0:
            raise ValidationError(f"l1 ratios must be in (0, 1], got {r1}")
        grid = lambda_grid(gmax / r1, num=n_lambdas, min_ratio=lambda_min_ratio)
        beta = np.zeros(p)
        for lam in grid:
            fit = solve_elastic_net(X, y, lam, r1, beta0=beta)
            beta = fit.beta
            active = np.abs(beta) > active_tol
            df = _elastic_net_df(X[:, active], lam * (1.0 - r1))
            rss = float(np.sum((y - X @ beta) ** 2))
            rows.append((r1, lam, df, rss, cp_value(rss, n, sigma2, df)))
            coef_rows.append(beta.copy())
            fits[len(rows) - 1] = fit

    table = np.asarray(rows)
    coefs = np.asarray(coef_rows)
    best = _pick_best(table)
    fit = fits[best]
    return TuningResult(
        best_alpha=float(table[best, 0]),
        best_lambda=float(table[best, 1]),
        best_index=best,
        table=table,
        coefs=coefs,
        fit=fit,
        gamma=None if D is None else np.asarray(D) @ fit.beta,
        sigma2=float(sigma2),
    )


@dataclass(frozen=True)
class EffectRow:
    label: str
    level: int
    beta: float
    gamma: float
    beta_active: bool
    gamma_active: bool


@dataclass(frozen=True)
class EffectReport:
    """Per-node direct and total effects of a fitted model."""

    rows: tuple
    tree: object
    active_tol: float

    @property
    def beta(self):
        return np.array([r.beta for r in self.rows])

    @property
    def gamma(self):
        return np.array([r.gamma for r in self.rows])


def effect_report(tree, fit, active_tol=ACTIVE_TOL):
    """Tabulate direct (beta) and total (gamma = D beta) effects per node."""
    beta = np.asarray(fit.beta if isinstance(fit, Fit) else fit, dtype=float)
    if beta.shape != (tree.p,):
        raise DimensionMismatch(
            f"fit has {beta.shape[0]} coefficients for a {tree.p}-node tree"
        )
    gamma = tree.influence() @ beta
    rows = tuple(
        EffectRow(
            label=tree.labels[j],
            level=tree.levels[j],
            beta=float(beta[j]),
            gamma=float(gamma[j]),
            beta_active=bool(abs(beta[j]) > active_tol),
            gamma_active=bool(abs(gamma[j]) > active_tol),
        )
        for j in range(tree.p)
    )
    return EffectReport(rows=rows, tree=tree, active_tol=active_tol)
