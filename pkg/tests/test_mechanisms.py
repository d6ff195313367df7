"""Randomized-response mechanisms: examples, closed forms and invariants."""

import numpy as np
import numpy.testing as npt
import pytest

from dpdistill.mechanisms import (
    CandidateSet,
    PrivacyBudget,
    ThresholdRule,
    classic_rr,
    classic_rr_distribution,
    label_stream_rng,
    select_candidates,
    selective_rr,
    selective_rr_distribution,
)

from helpers import random_probs


def onehot(i, k):
    v = np.zeros(k)
    v[i] = 1.0
    return v


class TestClassicRR:
    def test_eps_zero_is_uniform(self):
        table = classic_rr_distribution(3, 10, 0.0)
        npt.assert_array_equal(table, np.full(10, 0.1))

    def test_eps_ln9_k10(self):
        table = classic_rr_distribution(0, 10, np.log(9.0))
        assert table[0] == pytest.approx(0.5, abs=1e-12)
        npt.assert_allclose(table[1:], 1.0 / 18.0, atol=1e-12)

    def test_eps_one_binary(self):
        table = classic_rr_distribution(1, 2, 1.0)
        e = np.e
        assert table[1] == pytest.approx(e / (e + 1.0), abs=1e-12)

    def test_sampling_matches_table(self):
        rng = np.random.default_rng(0)
        draws = np.array([classic_rr(2, 5, 1.0, rng) for _ in range(20000)])
        table = classic_rr_distribution(2, 5, 1.0)
        freq = np.bincount(draws, minlength=5) / len(draws)
        sigma = np.sqrt(table * (1 - table) / len(draws))
        assert np.all(np.abs(freq - table) <= 4 * sigma)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError, match="classes"):
            classic_rr_distribution(0, 1, 1.0)
        with pytest.raises(ValueError, match="range"):
            classic_rr_distribution(5, 5, 1.0)
        with pytest.raises(ValueError, match="epsilon"):
            classic_rr_distribution(0, 5, -1.0)


class TestSelectCandidates:
    def test_threshold_keeps_strict_exceeders(self):
        rule = ThresholdRule(10, threshold=0.05)
        y_s = np.array([0.60, 0.30] + [0.0125] * 8)
        cs = select_candidates(y_s, rule)
        assert cs.indices == (0, 1)
        assert cs.k == 2

    def test_boundary_value_is_excluded(self):
        # Entries exactly at the threshold do not pass (strict inequality).
        rule = ThresholdRule(4, threshold=0.25)
        y_s = np.array([0.25, 0.26, 0.26, 0.23])
        cs = select_candidates(y_s, rule)
        assert cs.indices == (1, 2)

    def test_uniform_passes_default_threshold(self):
        rule = ThresholdRule(10)  # t = 0.05
        cs = select_candidates(np.full(10, 0.1), rule)
        assert cs.indices == tuple(range(10))

    def test_onehot_falls_back_to_top_two_lowest_tie(self):
        rule = ThresholdRule(10)
        cs = select_candidates(onehot(3, 10), rule)
        assert cs.indices == (0, 3)

    def test_deterministic(self):
        rng = np.random.default_rng(1)
        rule = ThresholdRule(8)
        for _ in range(100):
            y_s = random_probs(rng, 8)
            assert select_candidates(y_s, rule) == select_candidates(y_s, rule)

    def test_always_at_least_two(self):
        rng = np.random.default_rng(2)
        rule = ThresholdRule(6)
        for _ in range(300):
            y_s = random_probs(rng, 6)
            # sharpen to provoke the fallback sometimes
            y_s = y_s ** int(rng.integers(1, 12))
            y_s = y_s / y_s.sum()
            assert select_candidates(y_s, rule).k >= 2

    def test_rejects_wrong_length(self):
        with pytest.raises(ValueError, match="length"):
            select_candidates(np.full(4, 0.25), ThresholdRule(5))


class TestSelectiveRR:
    def test_binary_candidate_probabilities(self):
        # I = {0, 1}, teacher class 0 in I, eps = 1.
        y_s = np.array([0.6, 0.4, 0.0, 0.0])
        y_t = np.array([0.7, 0.1, 0.1, 0.1])
        rule = ThresholdRule(4, threshold=0.1)
        table = selective_rr_distribution(y_s, y_t, rule, 1.0)
        e = np.e
        assert table[0] == pytest.approx(e / (e + 1.0), abs=1e-12)
        assert table[1] == pytest.approx(1.0 / (e + 1.0), abs=1e-12)
        npt.assert_array_equal(table[2:], 0.0)

    def test_uniform_branch_when_teacher_outside(self):
        y_s = np.array([0.4, 0.3, 0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])
        y_t = onehot(7, 10)
        rule = ThresholdRule(10, threshold=0.2)
        table = selective_rr_distribution(y_s, y_t, rule, 5.0)
        npt.assert_allclose(table[:3], 1.0 / 3.0, atol=1e-15)
        npt.assert_array_equal(table[3:], 0.0)

    def test_uniform_branch_k4_exact(self):
        y_s = np.array([0.25, 0.25, 0.25, 0.25, 0.0, 0.0])
        y_t = onehot(5, 6)
        rule = ThresholdRule(6, threshold=0.2)
        table = selective_rr_distribution(y_s, y_t, rule, 2.0)
        npt.assert_array_equal(table[:4], 0.25)

    def test_large_eps_returns_teacher_class(self):
        rng = np.random.default_rng(3)
        y_s = np.array([0.5, 0.5, 0.0, 0.0])
        y_t = np.array([0.1, 0.8, 0.05, 0.05])
        rule = ThresholdRule(4, threshold=0.25)
        hits = 0
        for _ in range(10000):
            out = selective_rr(y_s, y_t, rule, 20.0, rng)
            hits += int(np.argmax(out) == 1)
        assert hits / 10000 >= 0.999

    def test_table_sums_to_one_fuzz(self):
        rng = np.random.default_rng(4)
        for _ in range(500):
            k = int(rng.integers(2, 12))
            y_s = random_probs(rng, k)
            y_t = random_probs(rng, k)
            eps = float(rng.uniform(0, 8))
            t = float(rng.uniform(0, 0.5))
            table = selective_rr_distribution(
                y_s, y_t, ThresholdRule(k, threshold=t), eps
            )
            assert abs(table.sum() - 1.0) <= 1e-12

    def test_support_confined_to_candidates(self):
        rng = np.random.default_rng(5)
        for _ in range(300):
            k = int(rng.integers(3, 10))
            y_s = random_probs(rng, k)
            y_t = random_probs(rng, k)
            rule = ThresholdRule(k)
            members = set(select_candidates(y_s, rule).indices)
            out = selective_rr(y_s, y_t, rule, 1.0, rng)
            assert int(np.argmax(out)) in members
            table = selective_rr_distribution(y_s, y_t, rule, 1.0)
            assert set(np.flatnonzero(table)) == members

    def test_eps_zero_collapses_to_uniform_over_candidates(self):
        rng = np.random.default_rng(6)
        for _ in range(200):
            k = int(rng.integers(2, 9))
            y_s = random_probs(rng, k)
            y_t = random_probs(rng, k)
            rule = ThresholdRule(k)
            cs = select_candidates(y_s, rule)
            table = selective_rr_distribution(y_s, y_t, rule, 0.0)
            expected = np.zeros(k)
            expected[list(cs.indices)] = 1.0 / cs.k
            npt.assert_array_equal(table, expected)

    def test_recovers_classic_rr_when_all_classes_pass(self):
        k = 10
        y_s = np.full(k, 1.0 / k)  # every entry above t = 1/(2k)
        rule = ThresholdRule(k)
        for eps in (0.0, 1.0, np.log(9.0)):
            for true in range(k):
                y_t = onehot(true, k)
                selective = selective_rr_distribution(y_s, y_t, rule, eps)
                classic = classic_rr_distribution(true, k, eps)
                npt.assert_allclose(selective, classic, atol=1e-12)

    def test_histogram_matches_distribution(self):
        rng = np.random.default_rng(7)
        y_s = random_probs(rng, 6)
        y_t = random_probs(rng, 6)
        rule = ThresholdRule(6)
        table = selective_rr_distribution(y_s, y_t, rule, 1.5)
        n = 20000
        counts = np.zeros(6)
        for _ in range(n):
            counts[np.argmax(selective_rr(y_s, y_t, rule, 1.5, rng))] += 1
        sigma = np.sqrt(n * table * (1 - table))
        assert np.all(np.abs(counts - n * table) <= 4 * np.maximum(sigma, 1.0))


class TestTypes:
    def test_privacy_budget_requires_positive(self):
        PrivacyBudget(0.5)
        with pytest.raises(ValueError):
            PrivacyBudget(0.0)
        with pytest.raises(ValueError):
            PrivacyBudget(float("inf"))

    def test_candidate_set_validation(self):
        CandidateSet((0, 3), 5)
        with pytest.raises(ValueError, match="at least 2"):
            CandidateSet((1,), 5)
        with pytest.raises(ValueError, match="increasing"):
            CandidateSet((3, 1), 5)
        with pytest.raises(ValueError, match="lie in"):
            CandidateSet((0, 5), 5)

    def test_threshold_rule_default(self):
        assert ThresholdRule(10).value == pytest.approx(0.05)
        assert ThresholdRule(10, threshold=0.2).value == 0.2
        with pytest.raises(ValueError):
            ThresholdRule(1)


class TestLabelStream:
    def test_same_coordinates_same_draw(self):
        y_s = np.array([0.5, 0.3, 0.2])
        y_t = np.array([0.2, 0.5, 0.3])
        rule = ThresholdRule(3)
        a = selective_rr(y_s, y_t, rule, 1.0, label_stream_rng(9, 2, 17))
        b = selective_rr(y_s, y_t, rule, 1.0, label_stream_rng(9, 2, 17))
        npt.assert_array_equal(a, b)

    def test_distinct_coordinates_are_independent_streams(self):
        draws = {
            (stage, idx): label_stream_rng(1, stage, idx).random()
            for stage in range(3)
            for idx in range(100)
        }
        assert len(set(draws.values())) == len(draws)
