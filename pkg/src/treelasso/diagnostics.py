"""Alignment diagnostic for model-selection consistency.

Selection consistency requires the inactive penalty rows to be at most
weakly aligned with the active ones: with S the support of the transformed
true coefficients and sign vector s on S, the quantity

    || M_Sc X' (M_S X')^+ s ||_inf

must stay below 1.  A value of 0 means the inactive directions are
orthogonal to the active ones (automatic for orthonormal designs with the
identity penalty); values >= 1 signal that support recovery may fail.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptySupport, ValidationError

PINV_RCOND = 1e-10


@dataclass(frozen=True)
class IrrepReport:
    """Result of the alignment diagnostic."""

    value: float
    tau_implied: float
    support: tuple
    signs: tuple


def irrepresentability(X, penalty, support, signs, rcond=PINV_RCOND):
    """Evaluate the alignment of inactive penalty rows with the active ones.

    Parameters
    ----------
    X : (n, p) design matrix.
    penalty : (m, p) penalty matrix (influence matrix, stacked form, or
        identity).
    support : indices into the penalty rows where the transformed true
        coefficients are nonzero.
    signs : +-1 entries, one per support index.

    Returns
    -------
    IrrepReport with the sup-norm value and implied margin 1 - value.
    The value is invariant to flipping all signs and to permutations
    within the support or its complement.
    """
    X = np.asarray(X, dtype=float)
    M = np.asarray(penalty, dtype=float)
    support = np.asarray(support, dtype=int)
    signs = np.asarray(signs, dtype=float)
    m = M.shape[0]

    if support.size == 0:
        raise EmptySupport("support must contain at least one penalty row")
    if np.any(support < 0) or np.any(support >= m):
        raise DimensionMismatch(f"support indices must lie in [0, {m})")
    if len(set(support.tolist())) != support.size:
        raise ValidationError("support indices must be distinct")
    if signs.shape != (support.size,) or np.any(np.abs(signs) != 1.0):
        raise ValidationError("signs must be a +-1 vector matching the support")

    mask = np.zeros(m, dtype=bool)
    mask[support] = True
    inactive = M[~mask] @ X.T  # (m - |S|, n)
    if inactive.shape[0] == 0:
        value = 0.0  # max over the empty set
    else:
        active = M[mask] @ X.T  # (|S|, n)
        # rows of M[mask] follow index order, so align signs accordingly
        order = np.argsort(support)
        v = np.linalg.pinv(active, rcond=rcond) @ signs[order]
        value = float(np.max(np.abs(inactive @ v)))
    return IrrepReport(
        value=value,
        tau_implied=1.0 - value,
        support=tuple(int(i) for i in support),
        signs=tuple(float(s) for s in signs),
    )
