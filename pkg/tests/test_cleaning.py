"""Rank aggregation and selection tests, anchored by a fully hand-enumerated
two-replicate instance."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from screenclean.cleaning import (
    BootstrapRanks,
    bootstrap_ranks,
    detect_kappa,
    estimate_e0,
    ranks_from_scores,
    select_clusters,
)
from screenclean.data_model import RunConfig, ValidationError
from screenclean.graph_cluster import ClusterSet


def make_ranks(rows):
    rows = np.asarray(rows, dtype=np.int64)
    return BootstrapRanks(ranks=rows, avg_ranks=rows.mean(axis=0), b=rows.shape[0])


def singleton_clusters(m):
    return ClusterSet(clusters=[[j] for j in range(m)],
                      representatives=np.arange(m, dtype=np.int64))


class TestRanksFromScores:
    def test_distinct_descending(self):
        assert ranks_from_scores([5.0, 3.0, 1.0]).tolist() == [0, 1, 2]

    def test_tie_inflates_both(self):
        assert ranks_from_scores([1.0, 1.0]).tolist() == [1, 1]

    def test_permutation_for_distinct_scores(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            lam = rng.permutation(10).astype(float)
            ranks = ranks_from_scores(lam)
            assert sorted(ranks.tolist()) == list(range(10))
            # sort-based oracle: rank = position in descending order
            oracle = np.empty(10, dtype=int)
            oracle[np.argsort(-lam, kind="stable")] = np.arange(10)
            assert np.array_equal(ranks, oracle)

    @given(st.lists(st.floats(min_value=-1e6, max_value=1e6), min_size=1, max_size=30))
    @settings(max_examples=200, deadline=None)
    def test_definition_matches_quadratic_enumeration(self, lam):
        lam = np.asarray(lam)
        ranks = ranks_from_scores(lam)
        for j in range(len(lam)):
            expected = sum(1 for jp in range(len(lam)) if jp != j and lam[j] <= lam[jp])
            assert ranks[j] == expected


HAND_CASE = make_ranks([[0, 1, 2], [2, 1, 0]])  # avg ranks (1, 1, 1)


class TestEstimateE0:
    def test_zero_variance_rows(self):
        ranks = make_ranks([[0, 1, 2]] * 4)
        for delta in (0.0, 1.0, 2.0):
            assert estimate_e0(ranks, delta, kappa=0.5) == 0.0

    def test_hand_enumerated_instance(self):
        # R^1 = {ranks <= 1} = two entries, one of which sits 1 away from its
        # average; same for R^2: e0 = (1 + 1)/2 = 1
        assert estimate_e0(HAND_CASE, delta=1.0, kappa=0.5) == pytest.approx(1.0)

    def test_kappa_covers_everything(self):
        ranks = make_ranks([[0, 2, 1], [2, 0, 1]])
        assert estimate_e0(ranks, delta=2.0, kappa=3.0) == 0.0

    def test_monotone_in_kappa(self):
        rng = np.random.default_rng(1)
        rows = np.array([rng.permutation(6) for _ in range(8)])
        ranks = make_ranks(rows)
        values = [estimate_e0(ranks, delta=3.0, kappa=k) for k in (0.0, 0.5, 1.0, 2.0, 5.0)]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_factor_scales(self):
        assert estimate_e0(HAND_CASE, 1.0, 0.5, factor=2.0) == pytest.approx(2.0)

    def test_bounds(self):
        rng = np.random.default_rng(2)
        rows = np.array([rng.permutation(5) for _ in range(9)])
        ranks = make_ranks(rows)
        for delta in range(5):
            e0 = estimate_e0(ranks, float(delta), 0.5)
            assert 0.0 <= e0 <= 5.0


class TestSelectClusters:
    def test_zero_variance_selects_everything(self):
        ranks = make_ranks([[2, 0, 1]] * 5)
        sel = select_clusters(ranks, singleton_clusters(3), q=0.1, kappa=0.5)
        assert sel.delta_star == 2.0
        assert sorted(sel.selected_cluster_ids) == [0, 1, 2]
        assert all(point["fdr_hat"] == 0.0 for point in sel.curve)

    def test_hand_case_q_half(self):
        # FDR(1) = 1/3 < 0.5: delta* = 1, all three clusters selected
        sel = select_clusters(HAND_CASE, singleton_clusters(3), q=0.5, kappa=0.5)
        assert sel.delta_star == 1.0
        assert sorted(sel.selected_cluster_ids) == [0, 1, 2]
        point = sel.curve[0]
        assert point["e0_hat"] == pytest.approx(1.0)
        assert point["fdr_hat"] == pytest.approx(1.0 / 3.0)
        assert point["n_plus"] == 3

    def test_hand_case_q_strict(self):
        # FDR(1) = 1/3 >= 0.2 and no smaller distinct cutoff exists
        sel = select_clusters(HAND_CASE, singleton_clusters(3), q=0.2, kappa=0.5)
        assert sel.delta_star is None
        assert sel.selected_cluster_ids == []

    def test_curve_deltas_are_sorted_distinct_order_stats(self):
        rows = [[0, 3, 1, 2], [1, 3, 0, 2], [0, 2, 1, 3]]
        ranks = make_ranks(rows)
        sel = select_clusters(ranks, singleton_clusters(4), q=0.3, kappa=1.0)
        deltas = [point["delta"] for point in sel.curve]
        assert deltas == sorted(set(np.asarray(rows).mean(axis=0).tolist()))

    def test_fdr_cross_check_and_monotone_nplus(self):
        rng = np.random.default_rng(3)
        rows = np.array([rng.permutation(7) for _ in range(10)])
        ranks = make_ranks(rows)
        sel = select_clusters(ranks, singleton_clusters(7), q=0.25, kappa=1.0)
        nplus = [point["n_plus"] for point in sel.curve]
        assert nplus == sorted(nplus)
        for point in sel.curve:
            expected = estimate_e0(ranks, point["delta"], 1.0)
            assert point["e0_hat"] == pytest.approx(expected)
            if point["n_plus"]:
                assert point["fdr_hat"] == pytest.approx(expected / point["n_plus"])

    def test_selection_monotone_in_q(self):
        rng = np.random.default_rng(4)
        rows = np.array([rng.permutation(8) for _ in range(12)])
        ranks = make_ranks(rows)
        prev: set[int] = set()
        for q in (0.05, 0.1, 0.2, 0.4, 0.8):
            sel = select_clusters(ranks, singleton_clusters(8), q=q, kappa=1.0)
            current = set(sel.selected_cluster_ids)
            assert prev <= current
            prev = current

    def test_invalid_q(self):
        with pytest.raises(ValidationError):
            select_clusters(HAND_CASE, singleton_clusters(3), q=1.2, kappa=0.5)


class TestDetectKappa:
    def test_clear_gap(self):
        assert detect_kappa([0.1, 0.2, 0.3, 10.0, 11.0, 12.0]) == 3.0

    def test_equal_spacing_earliest_position(self):
        assert detect_kappa([1.0, 2.0, 3.0, 4.0, 5.0, 6.0]) == 1.0

    def test_two_entries_floor(self):
        assert detect_kappa([0.0, 5.0]) == 1.0

    def test_gap_restricted_to_first_half(self):
        # the huge gap sits past the midpoint; only first-half gaps count
        avg = [0.0, 3.0, 3.1, 3.2, 3.3, 100.0]
        assert detect_kappa(avg) == 1.0

    def test_rejects_single_entry(self):
        with pytest.raises(ValidationError):
            detect_kappa([1.0])


class TestBootstrapRanks:
    def test_single_replicate_average_is_row(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(40, 3))
        y = x[:, 0] + 0.1 * rng.normal(size=40)
        cfg = RunConfig(bootstrap_b=1, hidden_size=5, epochs_dense=20,
                        epochs_path=3, patience=20, seed=0)
        br = bootstrap_ranks((x, y), cfg, seed=1)
        assert br.ranks.shape == (1, 3)
        assert np.array_equal(br.avg_ranks, br.ranks[0])

    def test_deterministic(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(30, 2))
        y = rng.normal(size=30)
        cfg = RunConfig(bootstrap_b=3, hidden_size=5, epochs_dense=15,
                        epochs_path=3, patience=15, seed=0)
        a = bootstrap_ranks((x, y), cfg, seed=2)
        b = bootstrap_ranks((x, y), cfg, seed=2)
        assert np.array_equal(a.ranks, b.ranks)

    def test_parallel_matches_serial(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(30, 2))
        y = x[:, 1] + rng.normal(size=30)
        cfg = RunConfig(bootstrap_b=4, hidden_size=5, epochs_dense=15,
                        epochs_path=3, patience=15, seed=0)
        serial = bootstrap_ranks((x, y), cfg, seed=3, n_jobs=1)
        parallel = bootstrap_ranks((x, y), cfg, seed=3, n_jobs=2)
        assert np.array_equal(serial.ranks, parallel.ranks)

    def test_planted_feature_attains_minimal_average_rank(self):
        cfg = RunConfig(bootstrap_b=20, hidden_size=10, epochs_dense=60,
                        epochs_path=10, patience=60, learning_rate=2e-3, seed=0)
        wins = 0
        for rep in range(10):
            rng = np.random.default_rng(900 + rep)
            x = rng.normal(size=(300, 10))
            y = 3.0 * x[:, 4] + rng.normal(size=300)
            br = bootstrap_ranks((x, y), cfg, seed=rep, n_jobs=2)
            if np.argmin(br.avg_ranks) == 4 and br.avg_ranks[4] == br.avg_ranks.min():
                wins += 1
        assert wins >= 9
