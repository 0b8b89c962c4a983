"""NumPy implementations of the hot kernels.

These are the reference semantics for the compiled core in ``_core.pyx``;
both backends must agree to floating-point noise. Used automatically when
the extension is unavailable or ``SCREENCLEAN_PURE_PYTHON=1`` is set.
"""

import numpy as np


def hz_pair_stat(tx, ty, beta):
    """Closed-form bivariate dependence statistic for one (tx, ty) sample.

    Computes
        (1/n^2) sum_ij exp(-b^2/2 * d_ij)
        - (2/(n(1+b^2))) sum_i exp(-b^2/(2(1+b^2)) * d_i)
        + 1/(1+2 b^2)
    with d_ij the squared Euclidean distance between pairs (tx_i, ty_i)
    and (tx_j, ty_j), and d_i the squared norm of pair i.
    """
    tx = np.asarray(tx, dtype=np.float64)
    ty = np.asarray(ty, dtype=np.float64)
    if tx.shape != ty.shape or tx.ndim != 1:
        raise ValueError("tx and ty must be 1-d arrays of equal length")
    n = tx.shape[0]
    b2 = beta * beta
    dx = (tx[:, None] - tx[None, :]) ** 2
    dy = (ty[:, None] - ty[None, :]) ** 2
    term1 = np.exp(-0.5 * b2 * (dx + dy)).sum() / (n * n)
    d_i = tx * tx + ty * ty
    term2 = 2.0 / (n * (1.0 + b2)) * np.exp(-0.5 * b2 / (1.0 + b2) * d_i).sum()
    term3 = 1.0 / (1.0 + 2.0 * b2)
    return float(term1 - term2 + term3)


def hz_stats_matrix(tx, ty, beta):
    """Dependence statistic of each column of ``tx`` (n x p) against ``ty``.

    The response part of the pairwise kernel is shared across features, so
    each column costs one n x n exponential and one elementwise product.
    """
    tx = np.ascontiguousarray(tx, dtype=np.float64)
    ty = np.asarray(ty, dtype=np.float64)
    n, p = tx.shape
    if ty.shape != (n,):
        raise ValueError("ty length must match rows of tx")
    b2 = beta * beta
    dy = (ty[:, None] - ty[None, :]) ** 2
    ey = np.exp(-0.5 * b2 * dy)
    ey_single = np.exp(-0.5 * b2 / (1.0 + b2) * ty * ty)
    term3 = 1.0 / (1.0 + 2.0 * b2)
    out = np.empty(p, dtype=np.float64)
    for k in range(p):
        col = tx[:, k]
        ex = np.exp(-0.5 * b2 * (col[:, None] - col[None, :]) ** 2)
        term1 = (ex * ey).sum() / (n * n)
        singles = np.exp(-0.5 * b2 / (1.0 + b2) * col * col) * ey_single
        term2 = 2.0 / (n * (1.0 + b2)) * singles.sum()
        out[k] = term1 - term2 + term3
    return out


def cd_solve(a, b, lam, beta, max_iter, tol):
    """Cyclic coordinate descent for the Lasso, in place.

    Minimizes (1/(2n)) ||b - a @ beta||^2 + lam * ||beta||_1 starting from
    ``beta`` (modified in place). Assumes columns of ``a`` have 1/n-squared
    norm ``col_nrm2`` precomputed by the caller via ``(a * a).mean(axis=0)``;
    here we recompute it for a self-contained fallback. Returns the number
    of full sweeps performed.

    Convergence: stop when the largest single-coordinate update in a sweep
    is below ``tol * max(1, max|beta|)``.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n, m = a.shape
    col_nrm2 = np.einsum("ij,ij->j", a, a) / n
    resid = b - a @ beta
    it = 0
    for it in range(1, max_iter + 1):
        max_delta = 0.0
        for j in range(m):
            if col_nrm2[j] <= 0.0:
                continue
            aj = a[:, j]
            old = beta[j]
            rho = (aj @ resid) / n + col_nrm2[j] * old
            new = np.sign(rho) * max(abs(rho) - lam, 0.0) / col_nrm2[j]
            if new != old:
                resid += aj * (old - new)
                beta[j] = new
                max_delta = max(max_delta, abs(new - old))
        scale = max(1.0, float(np.max(np.abs(beta))) if m else 1.0)
        if max_delta <= tol * scale:
            break
    return it
