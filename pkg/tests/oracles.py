"""Independent reference implementations used to check the solvers.

Nothing here shares code with the package's solution paths: influence
entries come from explicit path enumeration or Neumann series, and the
penalized least-squares optimum comes from exhaustive enumeration of the
sign patterns of the transformed coefficients.
"""

import numpy as np
from scipy.linalg import null_space

from treelasso import build_tree


def influence_by_path_products(tree):
    """d_ij as the product of edge weights on the unique i -> j path."""
    p = tree.p
    weight_to_parent = {e.child: (e.parent, e.weight) for e in tree.edges}
    D = np.zeros((p, p))
    for j in range(p):
        D[j, j] = 1.0
        node, prod = j, 1.0
        while node in weight_to_parent:
            parent, w = weight_to_parent[node]
            prod *= w
            D[parent, j] = prod
            node = parent
    return D


def influence_by_neumann(A, terms=None):
    """(I - A)^(-1) = sum_k A^k, exact once A is nilpotent."""
    p = A.shape[0]
    terms = p if terms is None else terms
    D = np.eye(p)
    Ak = np.eye(p)
    for _ in range(terms):
        Ak = Ak @ A
        D += Ak
    return D


def random_tree(rng, p, w_low=0.5, w_high=2.0, signed=True):
    """Random single-root tree: node j > 0 attaches to a uniform parent < j."""
    labels = [f"N{j}" for j in range(p)]
    edges = []
    for j in range(1, p):
        parent = int(rng.integers(0, j))
        w = float(rng.uniform(w_low, w_high))
        if signed and rng.random() < 0.5:
            w = -w  # negative influence is legal; only zero is excluded
        edges.append((parent, j, w))
    return build_tree(labels, edges)


def genlasso_objective_oracle(X, y, penalty, lam):
    """Global optimum of 0.5||y - Xb||^2 + lam||Mb||_1 by sign enumeration.

    For every subset Z of penalty rows forced to zero, restrict b to
    null(M_Z) and solve the smooth problem for every sign assignment of
    the remaining rows in one batched least-squares call; the true
    objective evaluated at all candidates attains the optimum at the true
    pattern.  Exponential in the number of penalty rows: keep m <= 10.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    M = np.asarray(penalty, dtype=float)
    m, p = M.shape
    XtX = X.T @ X
    Xty = X.T @ y

    def true_objective(B):
        resid = y[:, None] - X @ B
        return 0.5 * np.sum(resid**2, axis=0) + lam * np.sum(np.abs(M @ B), axis=0)

    best = float(true_objective(np.zeros((p, 1)))[0])
    for mask in range(2**m):
        zero_rows = [i for i in range(m) if (mask >> i) & 1]
        free_rows = [i for i in range(m) if not (mask >> i) & 1]
        if zero_rows:
            N = null_space(M[zero_rows])
            if N.shape[1] == 0:
                continue  # only b = 0 fits this pattern; already covered
        else:
            N = np.eye(p)
        k = len(free_rows)
        if k:
            S = np.array(
                [[1.0 if (s >> i) & 1 else -1.0 for s in range(2**k)] for i in range(k)]
            )
            rhs = N.T @ (Xty[:, None] - lam * (M[free_rows].T @ S))
        else:
            rhs = (N.T @ Xty)[:, None]
        H = N.T @ XtX @ N
        W, *_ = np.linalg.lstsq(H, rhs, rcond=None)
        cand = float(np.min(true_objective(N @ W)))
        if cand < best:
            best = cand
    return best


def lasso_soft_threshold_solution(Z, y, lam):
    """Closed form for an orthonormal design: soft-threshold Z'y at lam."""
    zty = Z.T @ y
    return np.sign(zty) * np.maximum(np.abs(zty) - lam, 0.0)
