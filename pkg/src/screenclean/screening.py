"""Per-feature bivariate dependence statistics and active-set selection.

After the Gaussian-marginal transform, (T(y), T(x_k)) is bivariate standard
normal iff y and x_k are independent, so a characteristic-function distance
from N(0, I_2) (the Henze-Zirkler statistic) screens for marginal
dependence. Features are ranked by the statistic and the top k retained.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .data_model import AUTO, ValidationError
from .nonparanormal import TransformedDataset


@dataclass
class ScreeningResult:
    """Per-feature statistics plus the retained active set.

    ``active`` is sorted by statistic descending, ties broken by ascending
    feature index; the ordering is total and deterministic.
    """

    w_stats: np.ndarray
    active: np.ndarray
    bandwidth: float
    requested_size: int
    clamped: bool = False
    warnings: list[str] = field(default_factory=list)


def hz_bandwidth(n: int) -> float:
    """Smoothing parameter beta = (1.25 n)^{1/6} / sqrt(2)."""
    if n < 1:
        raise ValidationError(f"n must be >= 1 (got {n})")
    return (1.25 * n) ** (1.0 / 6.0) / math.sqrt(2.0)


def hz_statistic(tx, ty, beta: float) -> float:
    """Closed-form dependence statistic for one transformed pair sample.

    Nonnegative up to numerical slack; values below 0 are clamped at 0
    (they can only arise from rounding, magnitude < 1e-12).
    """
    tx = np.asarray(tx, dtype=np.float64)
    ty = np.asarray(ty, dtype=np.float64)
    if tx.shape != ty.shape:
        raise ValidationError(f"length mismatch: {tx.shape} vs {ty.shape}")
    if beta <= 0:
        raise ValidationError("beta must be positive")
    value = _kernels.hz_pair_stat(tx, ty, beta)
    if value < 0.0:
        if value < -1e-12:
            raise ValidationError(f"statistic unexpectedly negative: {value}")
        value = 0.0
    return value


def auto_active_size(n: int) -> int:
    """Default active-set size floor(2n / log n); natural log."""
    return int(math.floor(2.0 * n / math.log(n)))


def screen(tds: TransformedDataset, active_size=AUTO) -> ScreeningResult:
    """Rank features by dependence with the response and keep the top k.

    k = ``active_size``, or floor(2n / log n) for "auto"; a request larger
    than p is clamped with a warning recorded on the result.
    """
    n, p = tds.n, tds.p
    beta = hz_bandwidth(n)
    w = np.maximum(_kernels.hz_stats_matrix(tds.tx, tds.ty, beta), 0.0)
    if active_size == AUTO:
        requested = auto_active_size(n)
    else:
        requested = int(active_size)
        if requested < 1:
            raise ValidationError(f"active_size must be >= 1 (got {requested})")
    k = min(requested, p)
    warnings = []
    clamped = requested > p
    if clamped:
        warnings.append(f"active_size {requested} exceeds p={p}; clamped to {p}")
    # descending statistic, ascending index tie-break
    order = np.lexsort((np.arange(p), -w))
    return ScreeningResult(
        w_stats=w,
        active=order[:k].copy(),
        bandwidth=beta,
        requested_size=requested,
        clamped=clamped,
        warnings=warnings,
    )
