"""Transform tests against independent high-precision oracles."""

import math

import numpy as np
import pytest
from scipy.special import ndtri  # independent quantile oracle
from scipy.stats import spearmanr

from screenclean.data_model import Dataset, ValidationError
from screenclean.nonparanormal import (
    npn_transform,
    std_normal_cdf,
    std_normal_quantile,
    truncated_ecdf,
    truncation_constant,
)


def oracle_phi(x: float) -> float:
    """High-precision standard normal CDF.

    Taylor series for the central range, Lentz continued fraction for the
    erfc tail; both classical, independent of the package implementation.
    """
    z = -x / math.sqrt(2.0)
    if abs(z) < 2.0:
        # erf(z) Taylor series
        total, term = 0.0, z
        k = 0
        while abs(term) > 1e-20 * max(1.0, abs(total)):
            total += term / (2 * k + 1)
            k += 1
            term *= -z * z / k
        erf = 2.0 / math.sqrt(math.pi) * total
        return 0.5 * (1.0 - erf)
    # erfc tail via the classical continued fraction
    #   sqrt(pi) e^{z^2} erfc(z) = 1/(z + (1/2)/(z + 1/(z + (3/2)/(z + ...))))
    # evaluated with modified Lentz; valid for z >= 2
    az = abs(z)
    tiny = 1e-300
    f = tiny
    c = f
    d = 0.0
    for i in range(1, 400):
        a_i = 1.0 if i == 1 else (i - 1) / 2.0
        d = az + a_i * d
        d = tiny if d == 0 else d
        c = az + a_i / c
        c = tiny if c == 0 else c
        d = 1.0 / d
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < 1e-17:
            break
    erfc = math.exp(-az * az) / math.sqrt(math.pi) * f
    if z >= 0:
        return 0.5 * erfc
    return 1.0 - 0.5 * erfc


DELTA_2 = 0.14246062419529723
DELTA_3 = 0.10224981534068091


class TestTruncatedEcdf:
    def test_three_points_clamps_top(self):
        out = truncated_ecdf([1.0, 2.0, 3.0])
        assert out[0] == pytest.approx(1.0 / 3.0, abs=1e-15)
        assert out[1] == pytest.approx(2.0 / 3.0, abs=1e-15)
        assert out[2] == pytest.approx(1.0 - DELTA_3, abs=1e-12)
        assert truncation_constant(3) == pytest.approx(DELTA_3, abs=1e-15)

    def test_all_equal_maps_identically(self):
        out = truncated_ecdf([5.0, 5.0, 5.0, 5.0])
        assert np.all(out == out[0])
        assert 0.0 < out[0] < 1.0

    def test_monotone_input_monotone_output(self):
        v = np.linspace(-4, 7, 25)
        out = truncated_ecdf(v)
        assert np.all(np.diff(out) >= 0)

    def test_output_strictly_inside_unit_interval(self):
        rng = np.random.default_rng(3)
        for n in (2, 5, 40, 500):
            out = truncated_ecdf(rng.normal(size=n))
            assert np.all(out > 0) and np.all(out < 1)

    def test_rejects_short_input(self):
        with pytest.raises(ValidationError):
            truncated_ecdf([1.0])


class TestQuantile:
    def test_roundtrip_against_oracle_cdf(self):
        # |Phi(Phi^-1(p)) - p| <= 1e-10 with Phi the independent oracle
        ps = np.geomspace(1e-8, 0.5, 500)
        ps = np.concatenate([ps, 1.0 - ps, [0.5]])
        xs = std_normal_quantile(ps)
        errs = [abs(oracle_phi(float(x)) - p) for x, p in zip(xs, ps)]
        assert max(errs) <= 1e-10

    def test_matches_independent_quantile(self):
        ps = np.linspace(0.001, 0.999, 997)
        assert np.max(np.abs(std_normal_quantile(ps) - ndtri(ps))) < 1e-12

    def test_median_is_zero(self):
        assert std_normal_quantile(0.5) == pytest.approx(0.0, abs=1e-14)

    def test_rejects_boundary(self):
        with pytest.raises(ValueError):
            std_normal_quantile(0.0)
        with pytest.raises(ValueError):
            std_normal_quantile(1.0)

    def test_cdf_quantile_consistency_internal(self):
        ps = np.linspace(1e-6, 1 - 1e-6, 101)
        assert np.max(np.abs(std_normal_cdf(std_normal_quantile(ps)) - ps)) < 1e-12


class TestNpnTransform:
    def test_two_point_column(self):
        ds = Dataset(x=np.array([[1.0], [2.0]]), y=np.array([0.3, 0.1]))
        tds = npn_transform(ds)
        assert tds.tx[0, 0] == pytest.approx(0.0, abs=1e-14)
        assert tds.tx[1, 0] == pytest.approx(ndtri(1.0 - DELTA_2), abs=1e-10)

    def test_constant_column_stays_constant(self):
        ds = Dataset(x=np.column_stack([np.full(6, 2.5), np.arange(6.0)]),
                     y=np.arange(6.0))
        tds = npn_transform(ds)
        assert np.ptp(tds.tx[:, 0]) == 0.0

    def test_rank_idempotence(self):
        rng = np.random.default_rng(11)
        ds = Dataset(x=rng.normal(size=(40, 3)) ** 3, y=rng.normal(size=40))
        t1 = npn_transform(ds)
        ds2 = Dataset(x=t1.tx, y=t1.ty)
        t2 = npn_transform(ds2)
        for j in range(3):
            assert np.array_equal(np.argsort(t1.tx[:, j]), np.argsort(t2.tx[:, j]))
            assert np.allclose(t1.tx[:, j], t2.tx[:, j], atol=1e-12)

    def test_monotone_with_equality_only_at_clamps_or_ties(self):
        rng = np.random.default_rng(5)
        v = rng.normal(size=60)
        ds = Dataset(x=v[:, None], y=rng.normal(size=60))
        out = npn_transform(ds).tx[:, 0]
        order = np.argsort(v)
        diffs = np.diff(out[order])
        assert np.all(diffs >= 0)

    def test_spearman_preserved(self):
        # exact below the clamp-collision size (n delta_n < 1); for larger n
        # the truncation collapses the extreme ranks so preservation is only
        # near-exact
        rng = np.random.default_rng(19)
        for n, tol in ((30, 1e-12), (120, 5e-3), (500, 5e-3)):
            x = rng.normal(size=(n, 2))
            x[:, 1] = 0.7 * x[:, 0] + 0.3 * x[:, 1]
            ds = Dataset(x=np.exp(x), y=rng.normal(size=n))
            tds = npn_transform(ds)
            before = spearmanr(ds.x[:, 0], ds.x[:, 1]).statistic
            after = spearmanr(tds.tx[:, 0], tds.tx[:, 1]).statistic
            assert before == pytest.approx(after, abs=tol)
