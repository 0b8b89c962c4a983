"""Selection metrics, post-selection prediction models, and the
Monte-Carlo experiment driver."""

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from .cleaning import SelectionResult
from .data_model import Dataset, RunConfig, TruthSpec, ValidationError, derive_seed
from .graph_cluster import ClusterSet
from .lassonet import lasso_path, predict as net_predict
from .pipeline import select_features, selected_feature_union
from .simgen import SimDesign, generate

MODELS = ("mlp", "bagged_tree")


def power_fdr(selection: SelectionResult, clusters: ClusterSet, truth: TruthSpec):
    """Cluster-level power and empirical FDR of a selection.

    Power is the fraction of the true support covered by the union of
    selected clusters; a selected cluster containing no support member is a
    false discovery.
    """
    if not truth.s0:
        raise ValidationError("truth must be non-empty")
    selected = [set(clusters.clusters[c]) for c in selection.selected_cluster_ids]
    if not selected:
        return 0.0, 0.0
    union = set().union(*selected)
    power = len(union & truth.s0) / len(truth.s0)
    n_false = sum(1 for members in selected if not (members & truth.s0))
    return power, n_false / len(selected)


# ---------------------------------------------------------------------------
# bagged CART regression trees


def _build_tree(x, y, max_depth, min_leaf):
    """Grow one CART regression tree; nodes stored as flat tuples.

    Leaf: ('leaf', mean). Split: ('split', feature, threshold, left, right).
    Best split maximizes SSE reduction, scanned per feature via prefix sums;
    ties go to the earliest feature / smallest threshold.
    """
    n, m = x.shape

    def grow(idx, depth):
        yv = y[idx]
        node_mean = float(yv.mean())
        if depth >= max_depth or idx.size < 2 * min_leaf or np.ptp(yv) == 0.0:
            return ("leaf", node_mean)
        best = None  # (sse, feature, threshold)
        for j in range(m):
            xv = x[idx, j]
            order = np.argsort(xv, kind="stable")
            xs, ys = xv[order], yv[order]
            csum = np.cumsum(ys)
            csq = np.cumsum(ys * ys)
            total, total_sq = csum[-1], csq[-1]
            counts = np.arange(1, idx.size)
            left_sse = csq[:-1] - csum[:-1] ** 2 / counts
            right_n = idx.size - counts
            right_sum = total - csum[:-1]
            right_sse = (total_sq - csq[:-1]) - right_sum**2 / right_n
            valid = (xs[:-1] != xs[1:]) & (counts >= min_leaf) & (right_n >= min_leaf)
            if not valid.any():
                continue
            sse = np.where(valid, left_sse + right_sse, np.inf)
            k = int(np.argmin(sse))
            if best is None or sse[k] < best[0]:
                best = (float(sse[k]), j, 0.5 * (xs[k] + xs[k + 1]))
        if best is None:
            return ("leaf", node_mean)
        _, j, thr = best
        mask = x[idx, j] <= thr
        return (
            "split", j, thr,
            grow(idx[mask], depth + 1),
            grow(idx[~mask], depth + 1),
        )

    return grow(np.arange(n), 0)


def _tree_predict(tree, x):
    out = np.empty(x.shape[0])
    stack = [(tree, np.arange(x.shape[0]))]
    while stack:
        node, idx = stack.pop()
        if not idx.size:
            continue
        if node[0] == "leaf":
            out[idx] = node[1]
        else:
            _, j, thr, left, right = node
            mask = x[idx, j] <= thr
            stack.append((left, idx[mask]))
            stack.append((right, idx[~mask]))
    return out


def _fit_bagged_trees(x, y, n_trees, max_depth, min_leaf, rng):
    trees = []
    n = x.shape[0]
    for _ in range(n_trees):
        idx = rng.integers(0, n, size=n)
        trees.append(_build_tree(x[idx], y[idx], max_depth, min_leaf))
    return trees


def _bagged_predict(trees, x):
    return np.mean([_tree_predict(t, x) for t in trees], axis=0)


TREE_GRID = ((4, 5), (8, 5), (8, 2), (16, 2))
N_TREES = 100
_TREE_SELECT_TREES = 25


def _bagged_tree_fit_predict(x_tr, y_tr, x_te, seed):
    """Bagged regression trees with (depth, min-leaf) picked on a
    validation slice, then refit on the full training set."""
    rng = np.random.default_rng(derive_seed(seed, "bagged-tree"))
    n = x_tr.shape[0]
    n_val = max(1, n // 8)
    perm = rng.permutation(n)
    val_idx, fit_idx = perm[:n_val], perm[n_val:]
    best = None
    for depth, min_leaf in TREE_GRID:
        sub_rng = np.random.default_rng(derive_seed(seed, "tree-grid", depth, min_leaf))
        trees = _fit_bagged_trees(x_tr[fit_idx], y_tr[fit_idx], _TREE_SELECT_TREES,
                                  depth, min_leaf, sub_rng)
        val_mse = float(np.mean((_bagged_predict(trees, x_tr[val_idx]) - y_tr[val_idx]) ** 2))
        if best is None or val_mse < best[0]:
            best = (val_mse, depth, min_leaf)
    _, depth, min_leaf = best
    final_rng = np.random.default_rng(derive_seed(seed, "tree-final"))
    trees = _fit_bagged_trees(x_tr, y_tr, N_TREES, depth, min_leaf, final_rng)
    return _bagged_predict(trees, x_te)


# ---------------------------------------------------------------------------
# two-hidden-layer MLP with adaptive-moment updates

MLP_HIDDEN = 40
_MLP_EPOCHS = 500
_MLP_PATIENCE = 25
_MLP_BATCH = 32
_MLP_LR = 1e-3


def _mlp_fit_predict(x_tr, y_tr, x_te, seed):
    rng = np.random.default_rng(derive_seed(seed, "mlp"))
    mu, sd = x_tr.mean(axis=0), x_tr.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    x = (x_tr - mu) / sd
    y_mean = float(y_tr.mean())
    y = y_tr - y_mean
    n, m = x.shape
    h = MLP_HIDDEN

    params = {
        "w1": rng.uniform(-1, 1, (m, h)) / np.sqrt(m), "b1": np.zeros(h),
        "w2": rng.uniform(-1, 1, (h, h)) / np.sqrt(h), "b2": np.zeros(h),
        "w3": rng.uniform(-1, 1, h) / np.sqrt(h), "b3": 0.0,
    }
    m1 = {k: np.zeros_like(np.asarray(v, dtype=np.float64)) for k, v in params.items()}
    m2 = {k: np.zeros_like(np.asarray(v, dtype=np.float64)) for k, v in params.items()}
    beta1, beta2, eps = 0.9, 0.999, 1e-8

    def fwd(px, p):
        z1 = px @ p["w1"] + p["b1"]
        a1 = np.maximum(z1, 0.0)
        z2 = a1 @ p["w2"] + p["b2"]
        a2 = np.maximum(z2, 0.0)
        return z1, a1, z2, a2, a2 @ p["w3"] + p["b3"]

    n_val = max(1, n // 8)
    perm = rng.permutation(n)
    val_idx, tr_idx = perm[:n_val], perm[n_val:]
    xt, yt = x[tr_idx], y[tr_idx]
    xv, yv = x[val_idx], y[val_idx]
    batch = min(len(tr_idx), _MLP_BATCH)

    def val_mse(p):
        return float(np.mean((fwd(xv, p)[4] - yv) ** 2))

    best_val = val_mse(params)
    best = {k: (v.copy() if isinstance(v, np.ndarray) else v) for k, v in params.items()}
    stall, step = 0, 0
    for _ in range(_MLP_EPOCHS):
        order = rng.permutation(len(tr_idx))
        for start in range(0, len(tr_idx), batch):
            idx = order[start:start + batch]
            bx, by = xt[idx], yt[idx]
            z1, a1, z2, a2, f = fwd(bx, params)
            g = 2.0 * (f - by) / len(idx)
            grads = {
                "w3": a2.T @ g, "b3": float(g.sum()),
            }
            d2 = np.outer(g, params["w3"]) * (z2 > 0)
            grads["w2"] = a1.T @ d2
            grads["b2"] = d2.sum(axis=0)
            d1 = (d2 @ params["w2"].T) * (z1 > 0)
            grads["w1"] = bx.T @ d1
            grads["b1"] = d1.sum(axis=0)
            step += 1
            for k in params:
                m1[k] = beta1 * m1[k] + (1 - beta1) * np.asarray(grads[k])
                m2[k] = beta2 * m2[k] + (1 - beta2) * np.asarray(grads[k]) ** 2
                mhat = m1[k] / (1 - beta1**step)
                vhat = m2[k] / (1 - beta2**step)
                params[k] = params[k] - _MLP_LR * mhat / (np.sqrt(vhat) + eps)
        v = val_mse(params)
        if not np.isfinite(v):
            break
        if v < best_val:
            best_val = v
            best = {k: (p.copy() if isinstance(p, np.ndarray) else p) for k, p in params.items()}
            stall = 0
        else:
            stall += 1
            if stall >= _MLP_PATIENCE:
                break
    return fwd((x_te - mu) / sd, best)[4] + y_mean


# ---------------------------------------------------------------------------


@dataclass
class PredictionResult:
    predictions: np.ndarray
    test_mse: float
    pred_corr: float
    corr_degenerate: bool = False


def fit_predict(train: Dataset, test: Dataset, features, model: str, seed: int) -> PredictionResult:
    """Refit a prediction model on the given feature subset and score it.

    ``model`` is "mlp" (two hidden ReLU layers, adaptive-moment updates,
    early stopping on a 1/8 validation slice) or "bagged_tree" (averaged
    bootstrap CART trees, depth and min-leaf from a small validation grid).
    A constant test response or constant predictions give pred_corr 0 with
    the degenerate flag set.
    """
    features = sorted(int(j) for j in features)
    if not features:
        raise ValidationError("empty feature set")
    if train.p != test.p:
        raise ValidationError("train and test must share p")
    if any(j < 0 or j >= train.p for j in features):
        raise ValidationError("feature index out of range")
    if test.n < 2:
        raise ValidationError("test n < 2: correlation undefined")
    if model not in MODELS:
        raise ValidationError(f"unknown model {model!r}; choose from {MODELS}")
    x_tr, y_tr = train.x[:, features], train.y
    x_te, y_te = test.x[:, features], test.y
    if model == "mlp":
        preds = _mlp_fit_predict(x_tr, y_tr, x_te, seed)
    else:
        preds = _bagged_tree_fit_predict(x_tr, y_tr, x_te, seed)
    return _score_predictions(preds, y_te)


def _score_predictions(preds, y_te) -> PredictionResult:
    mse = float(np.mean((preds - y_te) ** 2))
    if np.ptp(y_te) == 0.0 or np.ptp(preds) == 0.0:
        return PredictionResult(preds, mse, 0.0, corr_degenerate=True)
    corr = float(np.corrcoef(preds, y_te)[0, 1])
    return PredictionResult(preds, mse, corr, corr_degenerate=False)


@dataclass
class ExperimentSummary:
    """Aggregated Monte-Carlo results plus the per-replication records."""

    summary: dict
    records: list[dict]
    n_replications: int
    n_failed: int
    config_echo: dict


def _split_train_test(dataset: Dataset, seed: int, test_fraction: float = 0.2):
    rng = np.random.default_rng(seed)
    n = dataset.n
    perm = rng.permutation(n)
    n_test = max(1, int(round(test_fraction * n)))
    test_idx, train_idx = perm[:n_test], perm[n_test:]
    mk = lambda idx: Dataset(x=dataset.x[idx], y=dataset.y[idx],
                             feature_names=dataset.feature_names)
    return mk(train_idx), mk(test_idx)


def _run_replication(args):
    design, config, models, baseline, rep = args
    t0 = time.perf_counter()
    rep_seed = derive_seed(config.seed, "replication", rep)
    data, truth = generate(replace(design, seed=derive_seed(rep_seed, "data")))
    train, test = _split_train_test(data, derive_seed(rep_seed, "split"))
    pipe_config = config.with_seed(derive_seed(rep_seed, "pipeline"))
    result = select_features(train, pipe_config)
    power, fdr = power_fdr(result.selection, result.clusters, truth)

    # sure-screening and rank-variability diagnostics
    covered = truth.s0 <= set(int(j) for j in result.screening.active)
    rank_sd = result.ranks.ranks.std(axis=0)
    is_true_rep = np.array([
        bool(set(members) & truth.s0) for members in result.clusters.clusters
    ])
    sd_true = float(rank_sd[is_true_rep].mean()) if is_true_rep.any() else np.nan
    sd_null = float(rank_sd[~is_true_rep].mean()) if (~is_true_rep).any() else np.nan

    record = {
        "replication_id": rep + 1,
        "power": power,
        "fdr": fdr,
        "n_selected_clusters": len(result.selection.selected_cluster_ids),
        "n_selected_features": len(selected_feature_union(result)),
        "screening_covered": bool(covered),
        "rank_sd_true_mean": sd_true,
        "rank_sd_null_mean": sd_null,
    }

    union = selected_feature_union(result)
    for model in models:
        tag = "rt" if model == "bagged_tree" else model
        if union:
            pr = fit_predict(train, test, union, model, derive_seed(rep_seed, "fit", model))
            record[f"mse_{tag}"] = pr.test_mse
            record[f"corr_{tag}"] = pr.pred_corr
        else:
            # nothing selected: fall back to the train-mean predictor
            record[f"mse_{tag}"] = float(np.mean((train.y.mean() - test.y) ** 2))
            record[f"corr_{tag}"] = 0.0

    if baseline:
        scores = lasso_path((train.x, train.y), pipe_config,
                            derive_seed(rep_seed, "baseline"))
        support = (
            scores.best_val_net.theta != 0.0
            if scores.best_val_net is not None
            else np.zeros(train.p, dtype=bool)
        )
        base_sel = [int(j) for j in np.flatnonzero(support)]
        n_base_false = sum(1 for j in base_sel if j not in truth.s0)
        record["baseline_n_selected"] = len(base_sel)
        record["baseline_power"] = len(set(base_sel) & truth.s0) / len(truth.s0)
        record["baseline_fdr"] = n_base_false / len(base_sel) if base_sel else 0.0
        if scores.best_val_net is not None:
            preds = net_predict(scores.best_val_net, test.x)
            record["baseline_mse"] = float(np.mean((preds - test.y) ** 2))
        else:
            record["baseline_mse"] = float(np.mean((train.y.mean() - test.y) ** 2))

    record["runtime_s"] = time.perf_counter() - t0
    return record


def run_experiment(
    design: SimDesign,
    config: RunConfig,
    replications: int,
    models=("mlp", "bagged_tree"),
    baseline: bool = False,
    n_jobs: int = 1,
) -> ExperimentSummary:
    """Monte-Carlo evaluation of the full pipeline on a simulation design.

    Each replication draws a dataset with its derived seed, splits 8:2 into
    train/test, selects clusters on the training part, scores power/FDR
    against the truth, and refits each prediction model on the selected
    feature union. Failed replications are recorded and excluded; more than
    20% failures aborts.
    """
    if replications < 1:
        raise ValidationError("replications must be >= 1")
    for model in models:
        if model not in MODELS:
            raise ValidationError(f"unknown model {model!r}")
    jobs = [(design, config, tuple(models), baseline, r) for r in range(replications)]
    records: list[dict | None] = [None] * replications
    failures: list[tuple[int, str]] = []
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            futs = {r: ex.submit(_run_replication, job) for r, job in enumerate(jobs)}
            for r, fut in futs.items():
                try:
                    records[r] = fut.result()
                except Exception as err:
                    failures.append((r + 1, str(err)))
    else:
        for r, job in enumerate(jobs):
            try:
                records[r] = _run_replication(job)
            except Exception as err:
                failures.append((r + 1, str(err)))
    done = [rec for rec in records if rec is not None]
    if len(failures) > 0.2 * replications:
        raise RuntimeError(
            f"{len(failures)}/{replications} replications failed: {failures[:3]}"
        )

    def agg(key):
        vals = np.asarray([rec[key] for rec in done if key in rec and np.isfinite(rec[key])])
        if vals.size == 0:
            return {"mean": float("nan"), "sd": float("nan")}
        sd = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
        return {"mean": float(vals.mean()), "sd": sd}

    summary = {"power": agg("power"), "fdr": agg("fdr")}
    for model in models:
        tag = "rt" if model == "bagged_tree" else model
        summary[f"test_mse_{tag}"] = agg(f"mse_{tag}")
        summary[f"pred_corr_{tag}"] = agg(f"corr_{tag}")
    if baseline:
        for key in ("baseline_power", "baseline_fdr", "baseline_mse"):
            summary[key] = agg(key)
    return ExperimentSummary(
        summary=summary,
        records=done,
        n_replications=len(done),
        n_failed=len(failures),
        config_echo={"design": asdict(design), "config": asdict(config),
                     "replications": replications, "models": list(models),
                     "baseline": baseline},
    )
