"""Seeded generators for the simulation designs used by the benchmark.

Features are drawn from a Toeplitz-correlated Gaussian (or elliptical
multivariate-t) and the response from one of five link families; the noise
variance is either given directly or calibrated to a target signal-to-noise
ratio against the empirical signal variance.
"""

from dataclasses import dataclass, field

import numpy as np

from .data_model import Dataset, TruthSpec, ValidationError

LINKS = (
    "single_index_polynomial",
    "single_index_relu",
    "nonlinear_additive",
    "nonlinear_interaction",
    "linear",
)
FEATURE_DISTS = ("gaussian", "student_t")


@dataclass
class SimDesign:
    """One simulation scenario; exactly one of sigma2 / snr must be set.

    ``s0`` holds 0-based indices of the true support. The additive and
    interaction links require |s0| = 5 (their formulas name five terms).
    """

    n: int
    p: int
    rho: float
    link: str
    s0: tuple[int, ...]
    beta0: float = 2.0
    sigma2: float | None = None
    snr: float | None = None
    feature_dist: str = "gaussian"
    t_df: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.n < 2 or self.p < 1:
            raise ValidationError(f"need n >= 2 and p >= 1 (got n={self.n}, p={self.p})")
        if not (0.0 <= self.rho < 1.0):
            raise ValidationError(f"rho must lie in [0, 1) (got {self.rho})")
        if self.link not in LINKS:
            raise ValidationError(f"unknown link {self.link!r}; choose from {LINKS}")
        if self.feature_dist not in FEATURE_DISTS:
            raise ValidationError(f"unknown feature_dist {self.feature_dist!r}")
        self.s0 = tuple(sorted(int(j) for j in self.s0))
        if not self.s0:
            raise ValidationError("s0 must be non-empty")
        if self.s0[0] < 0 or self.s0[-1] >= self.p:
            raise ValidationError(f"s0 indices must lie in [0, {self.p})")
        if (self.sigma2 is None) == (self.snr is None):
            raise ValidationError("exactly one of sigma2 / snr must be set")
        if self.sigma2 is not None and self.sigma2 < 0:
            raise ValidationError("sigma2 must be non-negative")
        if self.snr is not None and self.snr <= 0:
            raise ValidationError("snr must be positive")
        if self.link in ("nonlinear_additive", "nonlinear_interaction") and len(self.s0) != 5:
            raise ValidationError(f"{self.link} requires |s0| = 5 (got {len(self.s0)})")


def toeplitz_cholesky(p: int, rho: float) -> np.ndarray:
    """Lower Cholesky factor of the AR(1) Toeplitz matrix rho^|i-j|.

    The factor is closed-form: column 0 is rho^i, column j > 0 is
    rho^{i-j} sqrt(1 - rho^2) for i >= j.
    """
    if not (0.0 <= rho < 1.0):
        raise ValidationError(f"rho must lie in [0, 1) (got {rho})")
    if p < 1:
        raise ValidationError("p must be >= 1")
    i = np.arange(p)
    low = np.tril(rho ** np.maximum(i[:, None] - i[None, :], 0))
    low[:, 1:] *= np.sqrt(1.0 - rho * rho)
    return low


def _signal(x: np.ndarray, design: SimDesign, rng: np.random.Generator) -> np.ndarray:
    s = np.asarray(design.s0, dtype=np.int64)
    if design.link in ("single_index_polynomial", "single_index_relu"):
        signs = rng.choice([-1.0, 1.0], size=len(s))
        beta_s = rng.normal(signs * design.beta0, np.sqrt(0.1))
        z = x[:, s] @ beta_s
        if design.link == "single_index_polynomial":
            return z**3 / 10.0 + 3.0 * z / 10.0
        return np.maximum(z, 0.0)
    if design.link == "linear":
        beta_s = rng.normal(design.beta0, np.sqrt(0.1), size=len(s))
        return x[:, s] @ beta_s
    a, b, c, d, e = (x[:, j] for j in s)
    if design.link == "nonlinear_additive":
        return 2.0 * a + 2.0 * b**3 + np.exp(c) + 6.0 * np.sin(d) + 2.0 * np.maximum(e**3, 0.0)
    return 2.0 * a + 2.0 * b**3 + np.exp(c) + 6.0 * d * e


def generate(design: SimDesign) -> tuple[Dataset, TruthSpec]:
    """Draw one dataset from the design; fixed seed gives a fixed draw."""
    rng = np.random.default_rng(design.seed)
    chol = toeplitz_cholesky(design.p, design.rho)
    x = rng.standard_normal((design.n, design.p)) @ chol.T
    if design.feature_dist == "student_t":
        chi2 = rng.chisquare(design.t_df, size=design.n)
        x *= np.sqrt(design.t_df / chi2)[:, None]
    g = _signal(x, design, rng)
    if design.snr is not None:
        var_g = float(np.var(g))
        sigma2 = var_g / design.snr
    else:
        sigma2 = float(design.sigma2)
    y = g + rng.normal(0.0, np.sqrt(sigma2), size=design.n)
    return Dataset(x=x, y=y), TruthSpec(design.s0)
