import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sortnet import metrics as M
from sortnet import oracles

R, NR = 1, 0

ratings = st.lists(st.integers(0, 4), min_size=1, max_size=12)


class TestPrecision:
    def test_hand_counts(self):
        assert M.precision_at([R, NR, R], 2) == 0.5
        assert M.precision_at([R, NR, R], 3) == pytest.approx(2 / 3, abs=0)

    def test_all_relevant(self):
        for n in range(1, 6):
            assert M.precision_at([1] * 5, n) == 1.0

    @pytest.mark.parametrize("n", [0, 4, 1.5])
    def test_out_of_range(self, n):
        with pytest.raises(ValueError):
            M.precision_at([1, 0, 1], n)


class TestAveragePrecision:
    def test_hand_examples(self):
        assert M.average_precision([R, NR, R, NR]) == pytest.approx(5 / 6, abs=1e-15)
        assert M.average_precision([NR, R]) == 0.5
        assert M.average_precision([R, R, NR, NR]) == 1.0

    def test_no_relevant_is_none(self):
        assert M.average_precision([0, 0, 0]) is None

    @given(st.lists(st.integers(0, 1), min_size=1, max_size=10))
    def test_at_most_one_and_one_iff_prefix(self, bits):
        ap = M.average_precision(bits)
        if ap is None:
            assert sum(bits) == 0
            return
        assert ap <= 1.0
        k = sum(bits)
        assert (ap == 1.0) == all(bits[:k])


class TestMAP:
    def test_single_query(self):
        assert M.mean_average_precision([[0, 1]]) == 0.5

    def test_mean(self):
        assert M.mean_average_precision([[1, 0], [0, 1]]) == 0.75

    def test_skips_queries_without_relevant(self):
        assert M.mean_average_precision([[1, 0], [0, 0]]) == 1.0

    def test_no_scorable_query(self):
        with pytest.raises(ValueError):
            M.mean_average_precision([[0, 0], [0]])

    def test_brute_force_agreement(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            lists = [rng.integers(0, 2, size=rng.integers(1, 9)).tolist() for _ in range(rng.integers(1, 5))]
            if not any(any(r) for r in lists):
                continue
            assert M.mean_average_precision(lists) == pytest.approx(
                float(oracles.mean_average_precision(lists)), abs=1e-12)


class TestNDCG:
    def test_hand_example(self):
        assert M.ndcg_at([0, 1], 2) == pytest.approx(0.6309297535714574, abs=1e-15)

    def test_all_zero(self):
        assert M.ndcg_at([0, 0, 0], 2) == 0.0

    def test_negative_rating(self):
        with pytest.raises(ValueError):
            M.ndcg_at([1, -1], 1)

    @given(ratings, st.data())
    def test_ideal_order_scores_one(self, r, data):
        n = data.draw(st.integers(1, len(r)))
        ideal = sorted(r, reverse=True)
        if any(ideal[:n]):
            assert M.ndcg_at(ideal, n) == pytest.approx(1.0, abs=1e-12)

    @given(ratings, st.data())
    def test_unit_interval(self, r, data):
        n = data.draw(st.integers(1, len(r)))
        assert 0.0 <= M.ndcg_at(r, n) <= 1.0 + 1e-12

    @given(ratings, st.data())
    def test_log_base_invariance(self, r, data):
        n = data.draw(st.integers(1, len(r)))
        gains = [2.0 ** v - 1 for v in r]
        ideal = sorted(gains, reverse=True)
        dcg2 = sum(g / math.log2(1 + j) for j, g in enumerate(gains[:n], start=1))
        idcg2 = sum(g / math.log2(1 + j) for j, g in enumerate(ideal[:n], start=1))
        expected = 0.0 if idcg2 == 0 else dcg2 / idcg2
        assert M.ndcg_at(r, n) == pytest.approx(expected, abs=1e-12)

    @given(ratings, st.data())
    def test_depends_only_on_prefix_and_multiset(self, r, data):
        n = data.draw(st.integers(1, len(r)))
        tail = data.draw(st.permutations(r[n:]))
        shuffled = r[:n] + list(tail)
        assert M.ndcg_at(shuffled, n) == M.ndcg_at(r, n)
        assert M.precision_at(shuffled, n) == M.precision_at(r, n)


def test_graded_ndcg_matches_permutation_oracle():
    rng = np.random.default_rng(1)
    for _ in range(300):
        r = rng.integers(0, 4, size=rng.integers(1, 7)).tolist()
        for n in range(1, len(r) + 1):
            assert M.ndcg_at(r, n) == pytest.approx(oracles.ndcg_at(r, n), abs=1e-12)


class TestRankQuality:
    @pytest.mark.parametrize("measure,name,k", [("map", "map", None), ("P@10", "p", 10), ("ndcg@3", "ndcg", 3)])
    def test_parse(self, measure, name, k):
        q = M.RankQuality(measure)
        assert (q.name, q.k) == (name, k)

    @pytest.mark.parametrize("measure", ["", "p@", "p@0", "mrr", "ndcg@x"])
    def test_reject(self, measure):
        with pytest.raises(ValueError):
            M.RankQuality(measure)

    def test_macro_mean(self):
        lists = [[1, 0, 0], [0, 1, 0]]
        assert M.RankQuality("p@1")(lists) == 0.5
        assert M.RankQuality("map")(lists) == 0.75
        # cut-off past the end of a list is clamped to its length
        assert M.RankQuality("p@5")(lists) == pytest.approx(1 / 3)


class TestReport:
    def test_columns_and_aggregate(self, tmp_path):
        rows, agg = M.metric_report({"a": [1, 0] + [0] * 10, "b": [0, 1] + [1] + [0] * 9})
        assert set(agg) == set(M.REPORT_COLUMNS)
        assert len(M.REPORT_COLUMNS) == 21
        assert agg["MAP"] == pytest.approx(np.mean([rows["a"]["MAP"], rows["b"]["MAP"]]))
        M.write_report_csv(rows, agg, tmp_path / "m.csv")
        lines = (tmp_path / "m.csv").read_text().splitlines()
        assert lines[0].split(",") == ["query"] + M.REPORT_COLUMNS
        assert [ln.split(",")[0] for ln in lines[1:]] == ["a", "b", "all"]
        text = M.format_report(agg)
        assert "MAP" in text and "n=10" in text

    def test_perfect_ranking(self):
        r = [1, 1, 1] + [0] * 27
        row = M.query_report(r)
        assert row["MAP"] == 1.0
        for n in range(1, 11):
            assert row[f"P@{n}"] == pytest.approx(min(1.0, 3 / n))
            assert row[f"NDCG@{n}"] == pytest.approx(1.0)


def test_exhaustive_small_binary_lists():
    for length in range(1, 6):
        for bits in itertools.product((0, 1), repeat=length):
            for n in range(1, length + 1):
                assert M.precision_at(bits, n) == float(oracles.precision_at(bits, n))
