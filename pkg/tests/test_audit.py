"""Exact and statistical audits of the privacy bound."""

import time

import numpy as np
import pytest

from dpdistill.audit import RATIO_SLACK, audit_grid, exact_audit, statistical_audit
from dpdistill.mechanisms import (
    ThresholdRule,
    classic_rr,
    classic_rr_distribution,
    selective_rr,
    selective_rr_distribution,
)

from helpers import random_probs


class TestExactAudit:
    def test_eps_zero_ratio_exactly_one(self):
        for k in (2, 5, 10):
            report = exact_audit(k, 10, 0.0)
            assert report.max_ratio == 1.0
            assert report.passed

    def test_eps1_k2_reference(self):
        # Independent brute force: the within-candidate pair dominates with
        # ratio e; the cross-branch ratios are 2e/(e+1) ~= 1.462 and
        # (e+1)/2 ~= 1.859.
        report = exact_audit(2, 10, 1.0)
        assert report.max_ratio == pytest.approx(np.e, rel=1e-12)
        (branches, labels, outcome) = report.attained_at
        assert branches == ("in", "in")
        assert outcome == labels[0]  # attained on the first label's own class

    def test_eps2_k3_reference(self):
        report = exact_audit(3, 10, 2.0)
        e2 = np.exp(2.0)
        assert report.max_ratio == pytest.approx(e2, rel=1e-12)
        # The cross-branch ratios computed independently must be smaller.
        in_over_out = 3.0 * e2 / (e2 + 2.0)
        out_over_in = (e2 + 2.0) / 3.0
        assert in_over_out == pytest.approx(2.3610, abs=1e-4)
        assert out_over_in == pytest.approx(3.1297, abs=1e-4)
        assert max(in_over_out, out_over_in) < report.max_ratio

    def test_matches_independent_brute_force(self):
        # Rebuild the conditional tables directly from the branch formulas
        # and scan all pairs with separate code.
        for eps in (0.25, 1.0, 3.0):
            for k in (2, 4, 7):
                K = 9
                e = np.exp(eps)
                rows = []
                for y in range(K):
                    row = np.zeros(K)
                    if y < k:
                        row[:k] = 1.0 / (e + k - 1.0)
                        row[y] = e / (e + k - 1.0)
                    else:
                        row[:k] = 1.0 / k
                    rows.append(row)
                best = 1.0
                for y in range(K):
                    for yp in range(K):
                        for out in range(k):
                            if rows[yp][out] > 0:
                                best = max(best, rows[y][out] / rows[yp][out])
                report = exact_audit(k, K, eps)
                assert report.max_ratio == pytest.approx(best, rel=1e-12)

    def test_tightness_grid(self):
        for eps in (0.25, 0.5, 1.0, 2.0, 4.0, 8.0):
            bound = np.exp(eps)
            for k in range(2, 21):
                report = exact_audit(k, 20, eps)
                assert report.max_ratio <= bound * (1.0 + RATIO_SLACK)
                assert report.max_ratio >= bound * (1.0 - RATIO_SLACK)
                assert report.passed

    def test_epsilon_effective_is_log_ratio(self):
        report = exact_audit(4, 10, 1.5)
        assert report.epsilon_effective == pytest.approx(
            np.log(report.max_ratio), abs=1e-12
        )

    def test_rejects_small_k(self):
        with pytest.raises(ValueError, match="at least 2"):
            exact_audit(1, 10, 1.0)
        with pytest.raises(ValueError, match="exceeds"):
            exact_audit(11, 10, 1.0)

    def test_grid_runtime_under_a_second(self):
        start = time.perf_counter()
        reports = audit_grid([0.25, 0.5, 1, 2, 4, 8], range(2, 11), 10)
        elapsed = time.perf_counter() - start
        assert len(reports) == 54
        assert elapsed < 1.0

    def test_deterministic(self):
        assert exact_audit(5, 12, 2.0) == exact_audit(5, 12, 2.0)


def _selective_mechanism(y_s, rule, eps):
    def mech(label, rng):
        y_t = np.zeros(rule.num_classes)
        y_t[label] = 1.0
        return int(np.argmax(selective_rr(y_s, y_t, rule, eps, rng)))

    return mech


class TestStatisticalAudit:
    def test_classic_rr_passes_and_matches_closed_form(self):
        eps = np.log(9.0)
        rng = np.random.default_rng(0)
        report = statistical_audit(
            lambda label, r: classic_rr(label, 10, eps, r),
            num_classes=10,
            epsilon=eps,
            trials=10000,
            rng=rng,
        )
        assert report.passed
        # Re-estimate P(true) directly for one label.
        rng = np.random.default_rng(1)
        hits = sum(classic_rr(3, 10, eps, rng) == 3 for _ in range(10000))
        p = classic_rr_distribution(3, 10, eps)[3]
        assert abs(hits / 10000 - p) <= 3 * np.sqrt(p * (1 - p) / 10000)

    def test_selective_rr_passes(self):
        rng = np.random.default_rng(2)
        y_s = random_probs(rng, 6)
        rule = ThresholdRule(6)
        report = statistical_audit(
            _selective_mechanism(y_s, rule, 1.0),
            num_classes=6,
            epsilon=1.0,
            trials=10000,
            rng=rng,
        )
        assert report.passed

    def test_selective_histogram_matches_table_per_cell(self):
        y_s = random_probs(np.random.default_rng(3), 5)
        rng = np.random.default_rng(30)
        rule = ThresholdRule(5)
        eps = 2.0
        n = 10000
        for label in range(5):
            y_t = np.zeros(5)
            y_t[label] = 1.0
            table = selective_rr_distribution(y_s, y_t, rule, eps)
            counts = np.zeros(5)
            for _ in range(n):
                counts[np.argmax(selective_rr(y_s, y_t, rule, eps, rng))] += 1
            sigma = np.sqrt(n * table * (1 - table))
            assert np.all(np.abs(counts - n * table) <= 3 * np.maximum(sigma, 1.0))

    def test_broken_mechanism_fails_any_finite_eps(self):
        # Negative control: a mechanism that leaks its input verbatim.
        for eps in (0.5, 2.0, 8.0):
            report = statistical_audit(
                lambda label, rng: label,
                num_classes=4,
                epsilon=eps,
                trials=10000,
                rng=np.random.default_rng(4),
            )
            assert not report.passed
            assert report.max_ratio == np.inf

    def test_never_contradicts_exact_audit(self):
        # Candidate set fixed by a uniform y_s (all classes pass); exact and
        # statistical audits must agree on the pass verdict.
        rule = ThresholdRule(5)
        y_s = np.full(5, 0.2)
        for eps in (0.5, 1.0, 4.0):
            exact = exact_audit(5, 5, eps)
            stat = statistical_audit(
                _selective_mechanism(y_s, rule, eps),
                num_classes=5,
                epsilon=eps,
                trials=10000,
                rng=np.random.default_rng(5),
            )
            assert exact.passed and stat.passed

    def test_requires_enough_trials(self):
        with pytest.raises(ValueError, match="10,000"):
            statistical_audit(lambda l, r: l, 4, 1.0, trials=100)
