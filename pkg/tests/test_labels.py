import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from labeldist.labels import (LabelError, VoteRecord, distributional_label, filter_class_subset,
                              majority_label, majority_winners, smooth_label, tally_matrix,
                              tally_votes, vote_entropy, voter_confusion,
                              voter_confusion_from_counts)

from oracles import entropy


def rec(votes, sid="s1"):
    # votes given 1-based as in the vote files
    return VoteRecord(sid, "g", tuple(v - 1 for v in votes))


class TestTally:
    def test_split_votes(self):
        counts = tally_votes(rec((3, 3, 3, 7, 3, 3, 7, 3, 3, 7)), 10)
        expected = np.zeros(10, dtype=int)
        expected[2], expected[6] = 7, 3
        np.testing.assert_array_equal(counts, expected)

    def test_unanimous(self):
        counts = tally_votes(rec((8,) * 10), 10)
        assert counts[7] == 10 and counts.sum() == 10

    def test_two_votes_seventeen_classes(self):
        counts = tally_votes(rec((1, 2)), 17)
        np.testing.assert_array_equal(counts, [1, 1] + [0] * 15)

    def test_out_of_range_names_sample(self):
        with pytest.raises(LabelError, match="bad-one"):
            tally_votes(VoteRecord("bad-one", "g", (0, 10)), 10)

    def test_matrix_matches_per_record(self):
        rng = np.random.default_rng(0)
        votes = rng.integers(0, 6, size=(50, 10))
        mat = tally_matrix(votes, 6)
        for i, v in enumerate(votes):
            np.testing.assert_array_equal(mat[i], tally_votes(VoteRecord(str(i), "g", tuple(v)), 6))
        assert np.all(mat.sum(axis=1) == 10)


class TestMajority:
    def test_unique_max(self):
        res = majority_label([0, 0, 7, 0, 0, 0, 3, 0, 0, 0])
        assert res.winner == 2 and not res.tied
        assert res.label[2] == 1 and res.label.sum() == 1

    def test_tie_goes_to_lowest_index(self):
        res = majority_label([5, 5] + [0] * 8)
        assert res.winner == 0 and res.tied

    def test_unanimous_last_class(self):
        res = majority_label([0] * 9 + [10])
        assert res.winner == 9
        np.testing.assert_array_equal(res.label, np.eye(10)[9])

    def test_all_zero_rejected(self):
        with pytest.raises(LabelError):
            majority_label(np.zeros(4, dtype=int))

    def test_rowwise_agrees(self):
        rng = np.random.default_rng(1)
        counts = tally_matrix(rng.integers(0, 5, size=(200, 10)), 5)
        winners, tied = majority_winners(counts)
        for c, w, t in zip(counts, winners, tied):
            r = majority_label(c)
            assert (r.winner, r.tied) == (w, t)


class TestDistributional:
    def test_two_classes(self):
        np.testing.assert_allclose(distributional_label([2, 8]), [0.2, 0.8])

    def test_unanimous_is_one_hot(self):
        np.testing.assert_array_equal(distributional_label([10] + [0] * 9), np.eye(10)[0])

    def test_three_classes(self):
        np.testing.assert_allclose(distributional_label([3, 3, 4]), [0.3, 0.3, 0.4])

    def test_zero_total_rejected(self):
        with pytest.raises(LabelError):
            distributional_label([0, 0])

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.integers(0, 10), min_size=2, max_size=17).filter(lambda c: sum(c) > 0))
    def test_sums_to_one_and_mode_matches_majority(self, counts):
        d = distributional_label(counts)
        assert abs(d.sum() - 1.0) <= 1e-12
        res = majority_label(counts)
        if not res.tied:
            assert int(np.argmax(d)) == res.winner


class TestSmoothing:
    def test_one_hot_k10(self):
        out = smooth_label(np.eye(10)[1], 0.1)
        assert out[1] == pytest.approx(0.91, abs=1e-15)
        assert np.allclose(np.delete(out, 1), 0.01, atol=1e-15)

    def test_alpha_zero_identity(self):
        y = np.array([0.2, 0.5, 0.3])
        np.testing.assert_array_equal(smooth_label(y, 0.0), y)

    def test_two_class(self):
        np.testing.assert_allclose(smooth_label([0.3, 0.7], 0.1), [0.32, 0.68], atol=1e-15)

    @pytest.mark.parametrize("alpha", [-0.1, 1.5])
    def test_bad_alpha(self, alpha):
        with pytest.raises(LabelError):
            smooth_label([1.0, 0.0], alpha)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.integers(0, 10), min_size=2, max_size=12).filter(lambda c: sum(c) > 0),
           st.floats(0.0, 0.999))
    def test_simplex_and_argmax_preserved(self, counts, alpha):
        y = distributional_label(counts)
        s = smooth_label(y, alpha)
        assert np.all(s >= 0) and abs(s.sum() - 1) < 1e-12
        if np.sum(y == y.max()) == 1:
            assert np.argmax(s) == np.argmax(y)


class TestEntropy:
    def test_one_hot_zero(self):
        assert vote_entropy(np.eye(5)[2]) == 0.0

    def test_even_split(self):
        assert vote_entropy([0.5, 0.5, 0, 0]) == pytest.approx(math.log(2), abs=1e-15)

    def test_thirty_seventy(self):
        # independent evaluation of -0.3 ln 0.3 - 0.7 ln 0.7
        assert vote_entropy([0.3, 0.7]) == pytest.approx(entropy([0.3, 0.7]), abs=1e-15)
        assert vote_entropy([0.3, 0.7]) == pytest.approx(0.610864, abs=1e-6)

    def test_bounded_for_ten_votes(self):
        rng = np.random.default_rng(2)
        counts = tally_matrix(rng.integers(0, 17, size=(5000, 10)), 17)
        h = vote_entropy(distributional_label(counts))
        assert np.all(h >= 0) and np.all(h <= math.log(10) + 1e-12)
        # all ten votes different attains the bound
        assert vote_entropy(distributional_label([1] * 10 + [0] * 7)) == pytest.approx(math.log(10))


class TestVoterConfusion:
    def test_unanimous(self):
        cm = voter_confusion([rec((2,) * 10)], 10)
        assert cm[1, 1] == 10 and cm.sum() == 10

    def test_split(self):
        cm = voter_confusion([rec((3, 3, 3, 7, 3, 3, 7, 3, 3, 7))], 10)
        assert cm[2, 2] == 7 and cm[2, 6] == 3 and cm.sum() == 10

    def test_row_sums(self):
        cm = voter_confusion([rec((1,) * 8 + (2, 2), "a"), rec((2,) * 6 + (1,) * 4, "b")], 3)
        assert cm[0].sum() == 10 and cm[1].sum() == 10

    def test_empty(self):
        with pytest.raises(LabelError):
            voter_confusion([], 3)

    def test_total_and_matrix_form(self):
        rng = np.random.default_rng(3)
        votes = rng.integers(0, 4, size=(100, 10))
        records = [VoteRecord(str(i), "g", tuple(v)) for i, v in enumerate(votes)]
        cm = voter_confusion(records, 4)
        assert cm.sum() == 10 * 100
        np.testing.assert_array_equal(cm, voter_confusion_from_counts(tally_matrix(votes, 4)))


def test_class_subset_filter():
    counts = np.array([[7, 2, 1], [1, 1, 8], [6, 0, 4]])
    mask, sub = filter_class_subset(counts, [0, 1])
    np.testing.assert_array_equal(mask, [True, False, True])
    np.testing.assert_array_equal(sub, [[7, 2], [6, 0]])
    np.testing.assert_allclose(distributional_label(sub)[1], [1.0, 0.0])
