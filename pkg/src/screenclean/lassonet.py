"""Residual feed-forward network with an L1 skip path and hierarchy constraint.

The model f(x) = theta' x + h_W(x) couples a linear skip layer with a
one-hidden-layer ReLU network. Training along an increasing penalty path
applies, after every gradient step, the exact proximal map of
lambda * |theta_j| under the constraint ||W0_j||_inf <= M |theta_j|, so a
feature's nonlinear weights vanish together with its skip weight. The
importance of feature j is the largest penalty at which it survives.
"""

from dataclasses import dataclass, field

import numpy as np

from .data_model import RunConfig, ValidationError, derive_seed

AUTO = "auto"
PATH_SAFETY_FACTOR = 1e6


class TrainingDivergence(RuntimeError):
    """Training loss became non-finite."""


@dataclass
class ResidualNet:
    """Parameters of the skip-plus-hidden model, with the input/response
    scalers used during training.

    ``forward`` computes the core arithmetic theta' x + h_W(x) on its direct
    input; ``predict`` maps original-scale rows through the scalers and adds
    the response mean back.
    """

    theta: np.ndarray
    w0: np.ndarray
    b0: np.ndarray
    w1: np.ndarray
    b1: float
    k: int
    x_mean: np.ndarray | None = None
    x_scale: np.ndarray | None = None
    y_mean: float = 0.0
    y_scale: float = 1.0

    def copy(self) -> "ResidualNet":
        return ResidualNet(
            theta=self.theta.copy(), w0=self.w0.copy(), b0=self.b0.copy(),
            w1=self.w1.copy(), b1=self.b1, k=self.k,
            x_mean=None if self.x_mean is None else self.x_mean.copy(),
            x_scale=None if self.x_scale is None else self.x_scale.copy(),
            y_mean=self.y_mean, y_scale=self.y_scale,
        )


@dataclass
class ImportanceScores:
    """Per-feature importance: the largest visited penalty retaining the
    feature's skip weight, together with the full path record."""

    lambda_hat: np.ndarray
    path_lambdas: np.ndarray
    support_per_lambda: np.ndarray
    theta_per_lambda: np.ndarray | None = None
    val_mse_per_lambda: np.ndarray | None = None
    best_val_net: ResidualNet | None = None
    best_val_lambda: float | None = None
    dense_net: ResidualNet | None = None


def path_dump_rows(scores: ImportanceScores):
    """(lambda, feature_index, theta_value) rows for plotting; 1-based
    feature indices."""
    if scores.theta_per_lambda is None:
        raise ValidationError("path was run without theta recording")
    rows = []
    for i, lam in enumerate(scores.path_lambdas):
        for j in range(scores.theta_per_lambda.shape[1]):
            rows.append((float(lam), j + 1, float(scores.theta_per_lambda[i, j])))
    return rows


def dump_path_csv(scores: ImportanceScores, path) -> None:
    """Write the skip-weight trajectories along the penalty path."""
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["lambda", "feature_index", "theta_value"])
        writer.writerows(path_dump_rows(scores))


def init_net(m: int, k: int, rng: np.random.Generator) -> ResidualNet:
    """Symmetric-uniform init scaled by 1/sqrt(fan_in)."""
    sm = 1.0 / np.sqrt(m)
    sk = 1.0 / np.sqrt(k)
    return ResidualNet(
        theta=rng.uniform(-sm, sm, size=m),
        w0=rng.uniform(-sm, sm, size=(m, k)),
        b0=np.zeros(k),
        w1=rng.uniform(-sk, sk, size=k),
        b1=0.0,
        k=k,
    )


def forward(net: ResidualNet, x) -> float:
    """theta' x + h_W(x) for a single input vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != net.theta.shape:
        raise ValidationError(f"input length {x.shape} does not match {net.theta.shape}")
    hidden = np.maximum(x @ net.w0 + net.b0, 0.0)
    return float(net.theta @ x + hidden @ net.w1 + net.b1)


def forward_batch(net: ResidualNet, x) -> np.ndarray:
    hidden = np.maximum(x @ net.w0 + net.b0, 0.0)
    return x @ net.theta + hidden @ net.w1 + net.b1


def predict(net: ResidualNet, x_raw) -> np.ndarray:
    """Model predictions for original-scale inputs."""
    x = np.asarray(x_raw, dtype=np.float64)
    if net.x_mean is not None:
        x = (x - net.x_mean) / net.x_scale
    return forward_batch(net, x) * net.y_scale + net.y_mean


def loss_and_grads(net: ResidualNet, x, y):
    """Mean squared error and its analytic gradients.

    Returns (loss, g_theta, g_w0, g_b0, g_w1, g_b1).
    """
    n = x.shape[0]
    z = x @ net.w0 + net.b0
    act = np.maximum(z, 0.0)
    f = x @ net.theta + act @ net.w1 + net.b1
    resid = f - y
    loss = float(resid @ resid) / n
    g = 2.0 * resid / n
    g_theta = x.T @ g
    g_b1 = float(g.sum())
    g_w1 = act.T @ g
    dz = np.outer(g, net.w1) * (z > 0.0)
    g_w0 = x.T @ dz
    g_b0 = dz.sum(axis=0)
    return loss, g_theta, g_w0, g_b0, g_w1, g_b1


def hier_prox(theta_j: float, w_j, step_lambda: float, m_const: float):
    """Exact proximal map for one feature; see ``hier_prox_all``."""
    theta = np.asarray([theta_j], dtype=np.float64)
    w = np.asarray(w_j, dtype=np.float64).reshape(1, -1)
    t_new, w_new = hier_prox_all(theta, w, step_lambda, m_const)
    return float(t_new[0]), w_new[0]


def hier_prox_all(theta, w0, step_lambda: float, m_const: float):
    """Exact minimizer of
        0.5 (t - theta_j)^2 + 0.5 ||W - w0_j||^2 + step_lambda |t|
        subject to ||W||_inf <= m_const |t|
    applied to every feature row at once.

    Sorted closed form: with |w0_j| sorted descending and prefix sums c_m,
    each truncation level m yields the candidate
        t_m = soft(|theta_j| + M c_m, lambda) / (1 + m M^2);
    a candidate is feasible when M t_m lies between the (m+1)-th and m-th
    sorted magnitudes, and the feasible candidate of least objective wins.
    The constraint holds exactly on output.
    """
    theta = np.asarray(theta, dtype=np.float64)
    w0 = np.asarray(w0, dtype=np.float64)
    m_feat, k = w0.shape
    mm = float(m_const)
    lam = float(step_lambda)
    b = np.abs(theta)
    sign_t = np.where(theta >= 0.0, 1.0, -1.0)

    u = -np.sort(-np.abs(w0), axis=1)  # descending magnitudes
    csum = np.concatenate([np.zeros((m_feat, 1)), np.cumsum(u, axis=1)], axis=1)
    csum_sq = np.concatenate([np.zeros((m_feat, 1)), np.cumsum(u * u, axis=1)], axis=1)
    levels = np.arange(k + 1)

    cand = np.maximum(b[:, None] + mm * csum - lam, 0.0) / (1.0 + levels * mm * mm)
    upper = np.concatenate([np.full((m_feat, 1), np.inf), u], axis=1)
    lower = np.concatenate([u, np.zeros((m_feat, 1))], axis=1)
    tol = 1e-12 * np.maximum(1.0, u[:, :1])
    feasible = (mm * cand >= lower - tol) & (mm * cand <= upper + tol)

    # objective per candidate via prefix sums; infeasible ones masked out
    obj = (
        0.5 * (cand - b[:, None]) ** 2
        + lam * cand
        + 0.5 * (csum_sq - 2.0 * mm * cand * csum + levels * (mm * cand) ** 2)
    )
    obj = np.where(feasible, obj, np.inf)
    best = np.argmin(obj, axis=1)
    t_star = cand[np.arange(m_feat), best]

    theta_new = sign_t * t_star
    w_new = np.sign(w0) * np.minimum(np.abs(w0), (mm * t_star)[:, None])
    return theta_new, w_new


def _standardize_xy(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    x_mean = x.mean(axis=0)
    x_scale = x.std(axis=0)
    x_scale = np.where(x_scale > 0, x_scale, 1.0)
    y_mean = float(y.mean())
    y_scale = float(y.std())
    if y_scale <= 0:
        y_scale = 1.0
    return (x - x_mean) / x_scale, (y - y_mean) / y_scale, x_mean, x_scale, y_mean, y_scale


def _sgd_epoch(net, x, y, rng, lr, momentum, batch_size, vel, lam=None, m_const=None):
    """One epoch of momentum SGD; proximal map after every step when a
    penalty is given."""
    n = x.shape[0]
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        idx = order[start:start + batch_size]
        _, g_t, g_w0, g_b0, g_w1, g_b1 = loss_and_grads(net, x[idx], y[idx])
        vel["theta"] = momentum * vel["theta"] - lr * g_t
        vel["w0"] = momentum * vel["w0"] - lr * g_w0
        vel["b0"] = momentum * vel["b0"] - lr * g_b0
        vel["w1"] = momentum * vel["w1"] - lr * g_w1
        vel["b1"] = momentum * vel["b1"] - lr * g_b1
        net.theta += vel["theta"]
        net.w0 += vel["w0"]
        net.b0 += vel["b0"]
        net.w1 += vel["w1"]
        net.b1 += vel["b1"]
        if lam is not None:
            net.theta, net.w0 = hier_prox_all(net.theta, net.w0, lr * lam, m_const)


def _zero_velocity(m, k):
    return {
        "theta": np.zeros(m), "w0": np.zeros((m, k)), "b0": np.zeros(k),
        "w1": np.zeros(k), "b1": 0.0,
    }


def _mse(net, x, y) -> float:
    r = forward_batch(net, x) - y
    return float(r @ r) / x.shape[0]


def train_dense(data, config: RunConfig, seed: int) -> ResidualNet:
    """Unpenalized, unconstrained warm start for the path.

    Momentum SGD on the squared-error loss with early stopping on a held-out
    validation slice; the best-validation parameters are restored.
    """
    x_raw, y_raw = data
    x_raw = np.asarray(x_raw, dtype=np.float64)
    y_raw = np.asarray(y_raw, dtype=np.float64)
    n, m = x_raw.shape
    if n < 2:
        raise ValidationError("n must be >= 2")
    x, y, x_mean, x_scale, y_mean, y_scale = _standardize_xy(x_raw, y_raw)

    rng = np.random.default_rng(derive_seed(seed, "dense"))
    net = init_net(m, config.hidden_size, rng)
    net.x_mean, net.x_scale = x_mean, x_scale
    net.y_mean, net.y_scale = y_mean, y_scale

    n_val = min(max(1, int(round(config.validation_fraction * n))), n - 1)
    perm = rng.permutation(n)
    val_idx, tr_idx = perm[:n_val], perm[n_val:]
    x_tr, y_tr = x[tr_idx], y[tr_idx]
    x_val, y_val = x[val_idx], y[val_idx]

    batch = min(len(tr_idx), config.batch_size)
    vel = _zero_velocity(m, config.hidden_size)
    initial_params = net.copy()
    initial_loss = _mse(net, x_tr, y_tr)
    best_val = _mse(net, x_val, y_val)
    best = net.copy()
    stall = 0
    for epoch in range(config.epochs_dense):
        _sgd_epoch(net, x_tr, y_tr, rng, config.learning_rate, config.momentum, batch, vel)
        tr_loss = _mse(net, x_tr, y_tr)
        if not np.isfinite(tr_loss):
            raise TrainingDivergence(
                f"training loss became non-finite at epoch {epoch + 1} "
                f"(lr={config.learning_rate}, batch={batch}, n={n}, m={m})"
            )
        val_loss = _mse(net, x_val, y_val)
        if val_loss < best_val:
            best_val = val_loss
            best = net.copy()
            stall = 0
        else:
            stall += 1
            if stall >= config.patience:
                break
    if _mse(best, x_tr, y_tr) > initial_loss:
        best = initial_params
    best.x_mean, best.x_scale = x_mean, x_scale
    best.y_mean, best.y_scale = y_mean, y_scale
    return best


def dense_gradient_scale(net: ResidualNet, x_std, y_centered) -> float:
    """Largest skip-weight gradient magnitude at the given parameters."""
    _, g_theta, *_ = loss_and_grads(net, x_std, y_centered)
    return float(np.max(np.abs(g_theta)))


def lasso_path(data, config: RunConfig, seed: int) -> ImportanceScores:
    """Dense-to-sparse penalty sweep emitting per-feature importances.

    Starting from the dense warm start, the penalty grows geometrically;
    each step runs ``epochs_path`` proximal-SGD epochs warm-started from the
    previous one and records which skip weights survive. Terminates when the
    support is empty or the penalty exceeds the safety cap.
    """
    x_raw, y_raw = data
    x_raw = np.asarray(x_raw, dtype=np.float64)
    y_raw = np.asarray(y_raw, dtype=np.float64)
    n, m = x_raw.shape

    net = train_dense((x_raw, y_raw), config, seed)
    dense_net = net.copy()
    x, y, *_ = _standardize_xy(x_raw, y_raw)

    if config.lambda_start == AUTO:
        # gradient scale at the dense solution, floored by the zero-model
        # scale: a dense net that interpolates has near-zero gradients, which
        # would collapse the path range and the safety cap with it. The 1e-2
        # multiplier keeps every skip weight alive at the start while leaving
        # the safety cap far above the empirical full-sparsity point.
        lam_dense = dense_gradient_scale(net, x, y)
        null_scale = 2.0 * float(np.max(np.abs(x.T @ y))) / n
        lam_start = 1e-2 * max(lam_dense, null_scale, 1e-8)
    else:
        lam_start = float(config.lambda_start)
    lam_cap = PATH_SAFETY_FACTOR * lam_start

    rng = np.random.default_rng(derive_seed(seed, "path"))
    n_val = min(max(1, int(round(config.validation_fraction * n))), n - 1)
    perm = rng.permutation(n)
    val_idx, tr_idx = perm[:n_val], perm[n_val:]
    x_tr, y_tr = x[tr_idx], y[tr_idx]
    x_val, y_val = x[val_idx], y[val_idx]
    batch = min(len(tr_idx), config.batch_size)
    mm = config.hierarchy_m

    lambdas = []
    supports = []
    thetas = []
    val_mses = []
    best_val = np.inf
    best_net = None
    best_lam = None
    lam = lam_start
    while True:
        vel = _zero_velocity(m, config.hidden_size)
        for _ in range(config.epochs_path):
            _sgd_epoch(
                net, x_tr, y_tr, rng, config.learning_rate, config.momentum,
                batch, vel, lam=lam, m_const=mm,
            )
            if not (np.all(np.isfinite(net.theta)) and np.all(np.isfinite(net.w0))):
                raise TrainingDivergence(
                    f"path training diverged at lambda={lam} "
                    f"(lr={config.learning_rate}, n={n}, m={m})"
                )
            if not np.all(np.abs(net.w0) <= mm * np.abs(net.theta)[:, None]):
                raise AssertionError("hierarchy constraint violated after proximal step")
        loss = _mse(net, x_tr, y_tr)
        if not np.isfinite(loss):
            raise TrainingDivergence(f"path training diverged at lambda={lam}")
        lambdas.append(lam)
        supports.append(net.theta != 0.0)
        thetas.append(net.theta.copy())
        v = _mse(net, x_val, y_val)
        val_mses.append(v)
        if v < best_val:
            best_val = v
            best_net = net.copy()
            best_lam = lam
        if not supports[-1].any():
            break
        lam *= config.path_multiplier
        if lam > lam_cap:
            break

    path_lambdas = np.asarray(lambdas)
    support = np.asarray(supports, dtype=bool)
    lambda_hat = np.zeros(m)
    for j in range(m):
        alive = np.flatnonzero(support[:, j])
        if alive.size:
            lambda_hat[j] = path_lambdas[alive].max()
    if best_net is not None:
        best_net.x_mean, best_net.x_scale = dense_net.x_mean, dense_net.x_scale
        best_net.y_mean, best_net.y_scale = dense_net.y_mean, dense_net.y_scale
    return ImportanceScores(
        lambda_hat=lambda_hat,
        path_lambdas=path_lambdas,
        support_per_lambda=support,
        theta_per_lambda=np.asarray(thetas),
        val_mse_per_lambda=np.asarray(val_mses),
        best_val_net=best_net,
        best_val_lambda=best_lam,
        dense_net=dense_net,
    )
