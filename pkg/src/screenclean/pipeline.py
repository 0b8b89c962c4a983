"""End-to-end composition of the selection stages and report building."""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .cleaning import BootstrapRanks, SelectionResult, bootstrap_ranks, detect_kappa, select_clusters
from .data_model import AUTO, Dataset, RunConfig, derive_seed, validate
from .graph_cluster import ClusterSet, PrecisionSupport, build_clusters, nodewise_support
from .nonparanormal import npn_transform
from .screening import ScreeningResult, screen


@dataclass
class PipelineResult:
    screening: ScreeningResult
    clusters: ClusterSet
    ranks: BootstrapRanks
    selection: SelectionResult
    kappa_used: float
    config: RunConfig


def select_features(dataset: Dataset, config: RunConfig, n_jobs: int = 1) -> PipelineResult:
    """Transform, screen, cluster, bootstrap-rank, and select clusters."""
    validate(dataset)
    tds = npn_transform(dataset)
    sr = screen(tds, config.active_set_size)
    active = sr.active
    tx_active = tds.tx[:, active]

    if active.shape[0] >= 2:
        ps = nodewise_support(
            tx_active, config.cv_folds, config.nodewise_grid_size,
            seed=derive_seed(config.seed, "nodewise"),
        )
        corr = np.corrcoef(tx_active, rowvar=False)
        corr = np.nan_to_num(corr, nan=0.0)
        np.fill_diagonal(corr, 1.0)
    else:
        ps = PrecisionSupport(support=np.ones((1, 1), dtype=bool), lambda_per_node=np.zeros(1))
        corr = np.ones((1, 1))
    cs = build_clusters(ps, corr, sr.w_stats[active], config.merge_threshold_r, labels=active)

    x_reps = dataset.x[:, cs.representatives]
    br = bootstrap_ranks(
        (x_reps, dataset.y), config, seed=derive_seed(config.seed, "cleaning"), n_jobs=n_jobs,
    )
    if config.kappa == AUTO:
        kappa = detect_kappa(br.avg_ranks) if len(cs) >= 2 else 1.0
    else:
        kappa = float(config.kappa)
    sel = select_clusters(br, cs, config.fdr_level_q, kappa, config.e0_factor)
    return PipelineResult(
        screening=sr, clusters=cs, ranks=br, selection=sel,
        kappa_used=kappa, config=config,
    )


def selected_feature_union(result: PipelineResult) -> list[int]:
    """Sorted union of member indices over the selected clusters (0-based)."""
    out: set[int] = set()
    for cid in result.selection.selected_cluster_ids:
        out.update(result.clusters.clusters[cid])
    return sorted(out)


def build_report(result: PipelineResult, dataset: Dataset) -> dict:
    """JSON-ready selection report; all indices 1-based, cluster ids 1-based."""
    names = dataset.names()
    sr, cs, sel = result.screening, result.clusters, result.selection
    clusters = []
    for i, members in enumerate(cs.clusters):
        rep = int(cs.representatives[i])
        clusters.append({
            "cluster_id": i + 1,
            "members": [j + 1 for j in members],
            "member_names": [names[j] for j in members],
            "representative": rep + 1,
            "representative_name": names[rep],
            "avg_rank": float(result.ranks.avg_ranks[i]),
        })
    return {
        "meta": {
            "n": dataset.n,
            "p": dataset.p,
            "kernel_backend": _kernels.BACKEND,
            "seed": result.config.seed,
        },
        "screening": {
            "bandwidth": sr.bandwidth,
            "requested_size": sr.requested_size,
            "clamped": sr.clamped,
            "warnings": sr.warnings,
            "active_set": [int(j) + 1 for j in sr.active],
        },
        "clusters": clusters,
        "selection": {
            "kappa_used": sel.kappa_used,
            "q": sel.q,
            "delta_star": sel.delta_star,
            "selected_cluster_ids": [c + 1 for c in sel.selected_cluster_ids],
            "selected_features": [j + 1 for j in selected_feature_union(result)],
            "selected_feature_names": [names[j] for j in selected_feature_union(result)],
        },
        "fdr_curve": sel.curve,
    }


def ranks_rows(result: PipelineResult) -> list[tuple[int, int, int]]:
    """(replicate, representative_index, rank) rows, 1-based, for export."""
    rows = []
    for b in range(result.ranks.b):
        for i, rep in enumerate(result.clusters.representatives):
            rows.append((b + 1, int(rep) + 1, int(result.ranks.ranks[b, i])))
    return rows
