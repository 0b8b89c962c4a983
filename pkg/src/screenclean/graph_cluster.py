"""Conditional-dependence clustering of the active set.

Nodewise Lasso regressions estimate the zero pattern of the precision
matrix over the active features; rows of the support seed clusters, which
are merged while any inter-cluster correlation reaches the threshold r, and
each final cluster is represented by its member with the largest screening
statistic.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .data_model import ValidationError, derive_seed

_CD_TOL = 1e-12
_CD_MAX_ITER = 100_000
# coefficients below this are numerical zeros: reductions computed in
# different summation orders (grid lambda_max vs the solver's dot) can
# disagree by an ulp and leave ~1e-17 residue where an exact zero belongs
_ZERO_TOL = 1e-10


@dataclass
class PrecisionSupport:
    """Symmetric boolean support of the estimated precision matrix."""

    support: np.ndarray
    lambda_per_node: np.ndarray


@dataclass
class ClusterSet:
    """Disjoint clusters over the active set with one representative each.

    ``clusters`` holds sorted original feature indices; ``representatives[i]``
    is the member of ``clusters[i]`` attaining the maximal screening
    statistic (ascending-index tie-break).
    """

    clusters: list[list[int]]
    representatives: np.ndarray

    def __len__(self) -> int:
        return len(self.clusters)


def _standardize(a):
    """Center columns and scale to unit 1/n variance; constant columns
    are left centered (all-zero) with scale 1."""
    a = np.asarray(a, dtype=np.float64)
    mean = a.mean(axis=0)
    centered = a - mean
    scale = np.sqrt(np.mean(centered * centered, axis=0))
    safe = np.where(scale > 0, scale, 1.0)
    return centered / safe, mean, safe


def soft_threshold(z, lam):
    return np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)


def lasso_cd(a, b, lam: float, max_iter: int = _CD_MAX_ITER, tol: float = _CD_TOL):
    """Solve min_beta (1/(2n)) ||b - a beta||^2 + lam ||beta||_1.

    Columns of ``a`` are standardized internally (mean 0, unit 1/n
    variance); the returned coefficients refer to the standardized design.
    Cyclic coordinate descent; KKT residuals are within 1e-6 at the
    default tolerance.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValidationError("non-finite input")
    if a.ndim != 2 or b.ndim != 1 or a.shape[0] != b.shape[0]:
        raise ValidationError("a must be n x m and b length n")
    if a.shape[0] < 2:
        raise ValidationError("n must be >= 2")
    if lam < 0:
        raise ValidationError("lambda must be non-negative")
    a_std, _, _ = _standardize(a)
    beta = np.zeros(a.shape[1], dtype=np.float64)
    _kernels.cd_solve(np.asfortranarray(a_std), b, lam, beta, max_iter, tol)
    beta[np.abs(beta) < _ZERO_TOL] = 0.0
    return beta


def _cd_path(a_std, b, grid, max_iter=_CD_MAX_ITER, tol=_CD_TOL):
    """Warm-started coordinate descent down a descending lambda grid."""
    a_std = np.asfortranarray(a_std)
    beta = np.zeros(a_std.shape[1], dtype=np.float64)
    out = np.empty((len(grid), a_std.shape[1]), dtype=np.float64)
    for i, lam in enumerate(grid):
        _kernels.cd_solve(a_std, b, lam, beta, max_iter, tol)
        out[i] = beta
    return out


def lambda_grid(a_std, b_centered, grid_size: int):
    """Log-spaced grid from lambda_max down to 0.001 * lambda_max."""
    n = a_std.shape[0]
    lam_max = float(np.max(np.abs(a_std.T @ b_centered)) / n)
    if lam_max <= 0:
        lam_max = 1e-12
    return np.geomspace(lam_max, 1e-3 * lam_max, grid_size)


def nodewise_support(tx_active, cv_folds: int, grid_size: int = 50, seed: int = 0) -> PrecisionSupport:
    """Estimate the precision-support over the active columns.

    Each column is lasso-regressed on the others, with its penalty chosen by
    cross-validated prediction error over a shared log grid using the
    one-standard-error rule: the largest penalty whose CV error stays within
    one standard error of the minimum. The support is symmetrized by OR
    across the two node regressions and the diagonal forced true.
    """
    x = np.asarray(tx_active, dtype=np.float64)
    n, m = x.shape
    if m < 2:
        raise ValidationError(f"need at least 2 active features (got m={m})")
    if n < cv_folds:
        raise ValidationError(f"n={n} smaller than cv_folds={cv_folds}")

    rng = np.random.default_rng(derive_seed(seed, "nodewise-folds"))
    perm = rng.permutation(n)
    folds = np.array_split(perm, cv_folds)

    support = np.zeros((m, m), dtype=bool)
    lam_hat = np.empty(m, dtype=np.float64)
    cols = np.arange(m)
    for j in range(m):
        others = cols[cols != j]
        design = x[:, others]
        resp = x[:, j]
        d_std_full, _, _ = _standardize(design)
        grid = lambda_grid(d_std_full, resp - resp.mean(), grid_size)

        fold_mse = np.zeros((cv_folds, len(grid)), dtype=np.float64)
        for fi, val_idx in enumerate(folds):
            mask = np.ones(n, dtype=bool)
            mask[val_idx] = False
            d_tr, mu, sc = _standardize(design[mask])
            b_tr = resp[mask]
            b_mean = b_tr.mean()
            # CV fits only rank penalties: a loose tolerance is plenty and
            # much faster on strongly correlated designs
            betas = _cd_path(d_tr, b_tr - b_mean, grid, max_iter=2000, tol=1e-6)
            d_val = (design[val_idx] - mu) / sc
            preds = b_mean + betas @ d_val.T
            fold_mse[fi] = np.mean((preds - resp[val_idx]) ** 2, axis=1)
        cv_mean = fold_mse.mean(axis=0)
        cv_se = fold_mse.std(axis=0, ddof=1) / np.sqrt(cv_folds)
        star = int(np.argmin(cv_mean))
        # descending grid: the first qualifying index is the largest penalty
        best = int(np.flatnonzero(cv_mean <= cv_mean[star] + cv_se[star])[0])
        lam_hat[j] = grid[best]

        beta = np.zeros(m - 1, dtype=np.float64)
        _kernels.cd_solve(
            np.asfortranarray(d_std_full), resp - resp.mean(), grid[best], beta,
            _CD_MAX_ITER, _CD_TOL,
        )
        # thresholded-lasso support: coefficients below the penalty level are
        # noise; keeping them lets weak hub nodes bridge unrelated clusters
        support[j, others] = np.abs(beta) > grid[best]

    support = support | support.T
    np.fill_diagonal(support, True)
    return PrecisionSupport(support=support, lambda_per_node=lam_hat)


def _max_cross_corr(abs_corr, mi, mj):
    """Largest |corr| over distinct feature pairs of two member lists.

    Self-pairs from shared members are excluded: a feature appearing in
    both clusters says nothing about how correlated the clusters are, and
    counting its unit self-correlation would chain every overlapping pair
    of seed neighborhoods into one giant cluster.
    """
    block = abs_corr[np.ix_(mi, mj)]
    shared = np.intersect1d(mi, mj)
    if shared.size:
        block = block.copy()
        block[np.searchsorted(mi, shared), np.searchsorted(mj, shared)] = -np.inf
    return block.max() if block.size else -np.inf


def build_clusters(support: PrecisionSupport, corr, w_stats, r: float, labels=None) -> ClusterSet:
    """Algorithmic cluster formation from the precision support.

    Seed clusters are the support rows; ascending-order sweeps merge any
    pair whose maximal absolute cross correlation (over distinct features)
    reaches ``r`` until a full pass fires no merge; empty clusters are
    dropped, residual shared features go to the surviving cluster of
    smallest seed index, and each cluster is represented by its member of
    maximal ``w_stats``.
    """
    sup = np.asarray(support.support, dtype=bool)
    corr = np.asarray(corr, dtype=np.float64)
    w = np.asarray(w_stats, dtype=np.float64)
    m = sup.shape[0]
    if sup.shape != (m, m) or corr.shape != (m, m) or w.shape != (m,):
        raise ValidationError("dimension mismatch between support, corr, and w_stats")
    if not (0.0 < r <= 1.0):
        raise ValidationError(f"r must lie in (0, 1] (got {r})")
    if labels is None:
        labels = np.arange(m)
    labels = np.asarray(labels)

    members = [np.flatnonzero(sup[i]) for i in range(m)]
    alive = [True] * m
    abs_corr = np.abs(corr)

    merged = True
    while merged:
        merged = False
        for i in range(m):
            if not alive[i]:
                continue
            for j in range(i + 1, m):
                if not alive[j]:
                    continue
                if _max_cross_corr(abs_corr, members[i], members[j]) >= r:
                    members[i] = np.union1d(members[i], members[j])
                    members[j] = members[j][:0]
                    alive[j] = False
                    merged = True

    # resolve residual overlaps: a shared feature stays with the surviving
    # cluster of smallest seed index
    seen = np.full(m, -1, dtype=np.int64)
    final = []
    for i in range(m):
        if not alive[i]:
            continue
        fresh = members[i][seen[members[i]] < 0]
        seen[fresh] = i
        if fresh.size:
            final.append(fresh)

    clusters = []
    reps = []
    for mem in final:
        best = mem[np.lexsort((mem, -w[mem]))[0]]
        clusters.append(sorted(int(labels[v]) for v in mem))
        reps.append(int(labels[best]))
    return ClusterSet(clusters=clusters, representatives=np.asarray(reps, dtype=np.int64))
