"""Dense numerical kernels shared by the batch and online solvers.

Everything here is a pure function on float64 arrays: hard thresholding,
support-restricted least squares, and a brute-force restricted-isometry
oracle that is only meant for small instances.
"""

import math
from itertools import combinations, islice

import numpy as np

__all__ = [
    "hard_threshold",
    "topk_support",
    "restricted_least_squares",
    "rip_constant_bruteforce",
    "matvec",
    "matmat",
    "transpose_matvec",
    "require_finite",
]

# Rank tolerance for the restricted LS solve (relative to largest singular value).
LS_RCOND = 1e-10

# Cap on the number of supports the RIP oracle will enumerate.
RIP_ENUM_BUDGET = 10 ** 6


def require_finite(x, name="array"):
    """Raise FloatingPointError if x contains NaN or Inf.

    Used at state boundaries so a numerical blow-up surfaces as a clear
    error instead of silently propagating through the simulation.
    """
    if not np.all(np.isfinite(x)):
        raise FloatingPointError(f"non-finite values in {name}")
    return x


def topk_support(X, s):
    """Indices of the s largest-magnitude entries along the last axis.

    Works on a vector or a stack of vectors. Ties break toward the lowest
    index (stable sort), so the selection is deterministic and a zero
    vector still yields exactly s indices (the lowest s). Returned
    supports are sorted ascending.
    """
    X = np.asarray(X, dtype=float)
    m = X.shape[-1]
    if not 1 <= s <= m:
        raise ValueError(f"sparsity s={s} outside [1, {m}]")
    # Stable argsort on -|X|: equal magnitudes keep ascending index order.
    order = np.argsort(-np.abs(X), axis=-1, kind="stable")
    return np.sort(order[..., :s], axis=-1)


def hard_threshold(v, s):
    """Keep the s largest-magnitude entries of v, zero the rest.

    Parameters
    ----------
    v : (m,) array_like
    s : int, 1 <= s <= m

    Returns
    -------
    support : (s,) int ndarray, ascending
    out : (m,) ndarray equal to v on the support and 0 elsewhere

    Tie-breaking and the zero-vector case follow topk_support.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"expected a vector, got shape {v.shape}")
    support = topk_support(v, s)
    out = np.zeros_like(v)
    out[support] = v[support]
    return support, out


def restricted_least_squares(A, y, support):
    """Least-squares fit of y restricted to the given coefficient support.

    Returns the m-vector that is zero off `support` and minimizes
    ||y - A h||^2 among vectors supported there. Rank-deficient restricted
    systems return the minimum-norm minimizer (SVD with relative tolerance
    LS_RCOND), which early iterations with degenerate averaged matrices
    can hit.
    """
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    if A.ndim != 2:
        raise ValueError(f"A must be 2-d, got shape {A.shape}")
    l, m = A.shape
    if y.shape != (l,):
        raise ValueError(f"y shape {y.shape} does not match A rows {l}")
    support = np.asarray(support, dtype=int)
    if support.size > m or (support.size and (support.min() < 0 or support.max() >= m)):
        raise ValueError("support indices outside [0, m)")
    coef, *_ = np.linalg.lstsq(A[:, support], y, rcond=LS_RCOND)
    out = np.zeros(m)
    out[support] = coef
    return out


def rip_constant_bruteforce(A, order, _chunk=4096):
    """Exact restricted isometry constant of A at the given order.

    Enumerates every support T with |T| = order and returns
    max_T max_i |lambda_i(A_T^T A_T) - 1|, i.e. the smallest delta with
    (1-delta)||x||^2 <= ||Ax||^2 <= (1+delta)||x||^2 over order-sparse x.

    Only feasible for small instances; refuses to enumerate more than
    RIP_ENUM_BUDGET supports.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError(f"A must be 2-d, got shape {A.shape}")
    m = A.shape[1]
    if not 1 <= order <= m:
        raise ValueError(f"order {order} outside [1, {m}]")
    n_supports = math.comb(m, order)
    if n_supports > RIP_ENUM_BUDGET:
        raise ValueError(
            f"C({m},{order}) = {n_supports} supports exceeds enumeration budget {RIP_ENUM_BUDGET}"
        )
    delta = 0.0
    combo_iter = combinations(range(m), order)
    while True:
        # Batched eigenvalue sweep, _chunk supports at a time.
        T = np.array(list(islice(combo_iter, _chunk)), dtype=int)
        if T.size == 0:
            break
        sub = np.moveaxis(A[:, T], 1, 0)           # (c, l, order)
        gram = np.matmul(sub.transpose(0, 2, 1), sub)
        ev = np.linalg.eigvalsh(gram)
        delta = max(delta, float(np.abs(ev - 1.0).max()))
    return delta


def matvec(A, x):
    """A @ x with explicit dimension checking."""
    A = np.asarray(A, dtype=float)
    x = np.asarray(x, dtype=float)
    if A.ndim != 2 or x.ndim != 1 or A.shape[1] != x.shape[0]:
        raise ValueError(f"cannot multiply {A.shape} by vector {x.shape}")
    return A @ x


def matmat(A, B):
    """A @ B with explicit dimension checking."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[0]:
        raise ValueError(f"cannot multiply {A.shape} by {B.shape}")
    return A @ B


def transpose_matvec(A, x):
    """A.T @ x with explicit dimension checking."""
    A = np.asarray(A, dtype=float)
    x = np.asarray(x, dtype=float)
    if A.ndim != 2 or x.ndim != 1 or A.shape[0] != x.shape[0]:
        raise ValueError(f"cannot multiply {A.shape}.T by vector {x.shape}")
    return A.T @ x
