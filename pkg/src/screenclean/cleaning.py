"""Bootstrap rank aggregation and FDR-controlled cluster selection.

Null representatives owe any high importance to the quirks of a particular
resample, so their importance ranks fluctuate across bootstrap replicates
while truly relevant ones stay pinned near the top. Bootstrap ranks falling
outside a neighborhood of their average estimate the count of false
discoveries at each cutoff; the largest cutoff whose estimated FDR stays
below q yields the final cluster selection.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data_model import AUTO, RunConfig, ValidationError, derive_seed
from .graph_cluster import ClusterSet
from .lassonet import lasso_path


@dataclass
class BootstrapRanks:
    """Ranks I_j^b of every representative across B bootstrap replicates.

    Row b holds the importance ranks for replicate b (0 = most important);
    ties inflate both ranks. ``avg_ranks`` are the column means.
    """

    ranks: np.ndarray
    avg_ranks: np.ndarray
    b: int


@dataclass
class SelectionResult:
    """FDR-estimate curve over the rank cutoffs and the final selection."""

    curve: list[dict]
    delta_star: float | None
    selected_cluster_ids: list[int]
    kappa_used: float
    q: float


def ranks_from_scores(lambda_hat) -> np.ndarray:
    """I_j = #{j' != j : lambda_hat_j <= lambda_hat_j'}; ties count both ways."""
    lam = np.asarray(lambda_hat, dtype=np.float64)
    if not np.all(np.isfinite(lam)):
        raise ValidationError("non-finite importance scores")
    return (lam[:, None] <= lam[None, :]).sum(axis=1) - 1


def _one_replicate(args):
    x, y, config, rep_seed = args
    rng = np.random.default_rng(derive_seed(rep_seed, "resample"))
    idx = rng.integers(0, x.shape[0], size=x.shape[0])
    scores = lasso_path((x[idx], y[idx]), config, derive_seed(rep_seed, "net"))
    return ranks_from_scores(scores.lambda_hat)


def bootstrap_ranks(data_reps, config: RunConfig, seed: int, n_jobs: int = 1) -> BootstrapRanks:
    """Rank the representatives' path importances over B pairs bootstraps.

    Replicate b resamples n pairs with replacement using the derived seed
    (seed, b) and is independent of execution order, so parallel runs
    reproduce the serial result exactly.
    """
    x, y = data_reps
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[0] < 2:
        raise ValidationError("n must be >= 2")
    if x.shape[1] < 1:
        raise ValidationError("need at least one representative")
    b_total = config.bootstrap_b
    jobs = [(x, y, config, derive_seed(seed, "bootstrap", b)) for b in range(b_total)]
    ranks = np.empty((b_total, x.shape[1]), dtype=np.int64)
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            futures = {b: ex.submit(_one_replicate, job) for b, job in enumerate(jobs)}
            for b, fut in futures.items():
                try:
                    ranks[b] = fut.result()
                except Exception as err:
                    raise RuntimeError(f"bootstrap replicate {b + 1} failed: {err}") from err
    else:
        for b, job in enumerate(jobs):
            try:
                ranks[b] = _one_replicate(job)
            except Exception as err:
                raise RuntimeError(f"bootstrap replicate {b + 1} failed: {err}") from err
    return BootstrapRanks(ranks=ranks, avg_ranks=ranks.mean(axis=0), b=b_total)


def estimate_e0(ranks: BootstrapRanks, delta: float, kappa: float, factor: float = 1.0) -> float:
    """Estimated count of false discoveries at cutoff delta.

    Averages, over replicates, the number of representatives ranked at or
    below delta whose replicate rank falls outside the kappa-neighborhood
    of their averaged rank. ``factor`` scales the 1/B average (default 1).
    """
    if kappa < 0:
        raise ValidationError("kappa must be non-negative")
    below = ranks.ranks <= delta
    outside = np.abs(ranks.ranks - ranks.avg_ranks[None, :]) > kappa
    return factor * float((below & outside).sum()) / ranks.b


def select_clusters(
    ranks: BootstrapRanks, clusters: ClusterSet, q: float, kappa: float,
    e0_factor: float = 1.0,
) -> SelectionResult:
    """Sweep the averaged-rank order statistics as cutoffs and keep the
    largest one whose estimated FDR stays below q.

    The estimated FDR at cutoff delta is e0_hat(delta) / N+(delta), defined
    as 0 when nothing is below the cutoff. Returns delta_star None and an
    empty selection when no cutoff qualifies.
    """
    if not (0.0 < q < 1.0):
        raise ValidationError(f"q must lie in (0, 1) (got {q})")
    if kappa < 0:
        raise ValidationError("kappa must be non-negative")
    avg = ranks.avg_ranks
    curve = []
    delta_star = None
    for delta in np.unique(avg):
        n_plus = int((avg <= delta).sum())
        e0 = estimate_e0(ranks, delta, kappa, e0_factor)
        fdr = e0 / n_plus if n_plus > 0 else 0.0
        curve.append({"delta": float(delta), "n_plus": n_plus,
                      "e0_hat": e0, "fdr_hat": fdr})
        if fdr < q:
            delta_star = float(delta) if delta_star is None else max(delta_star, float(delta))
    if delta_star is None:
        selected = []
    else:
        selected = [int(j) for j in np.flatnonzero(avg <= delta_star)]
    return SelectionResult(
        curve=curve,
        delta_star=delta_star,
        selected_cluster_ids=selected,
        kappa_used=float(kappa),
        q=float(q),
    )


def detect_kappa(avg_ranks) -> float:
    """Neighborhood radius from the gap structure of the averaged ranks.

    Sorts the averaged ranks and finds the largest consecutive gap among
    positions in the first half of the sequence (earliest position wins
    ties); the count of entries before that gap, floored at 1, is kappa.
    """
    avg = np.sort(np.asarray(avg_ranks, dtype=np.float64))
    c = avg.shape[0]
    if c < 2:
        raise ValidationError("need at least 2 averaged ranks")
    gaps = np.diff(avg)
    limit = max(1, c // 2)
    k_star = int(np.argmax(gaps[:limit])) + 1
    return float(max(k_star, 1))
