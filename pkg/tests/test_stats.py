import math
import random

import numpy as np
import pytest
from scipy import stats as sps

from convmem.evaluator.stats import (
    bonferroni_alpha,
    bootstrap_ci,
    cohens_dz,
    normal_ci,
    paired_t,
    paired_tests,
    wilcoxon_signed_rank,
)


class TestPairedT:
    def test_identical_samples_degenerate(self):
        x = [1.0, 2.0, 3.0]
        t, p, degen = paired_t(x, list(x))
        assert t == 0.0 and p == 1.0 and degen

    def test_diffs_one_two_three(self):
        # diffs [1,2,3]: mean 2, sd 1, t = 2*sqrt(3), d_z = 2
        x = [2.0, 4.0, 6.0]
        y = [1.0, 2.0, 3.0]
        t, p, _ = paired_t(x, y)
        assert t == pytest.approx(2 * math.sqrt(3), abs=1e-9)
        assert t == pytest.approx(3.4641, abs=1e-4)
        dz, _ = cohens_dz(x, y)
        assert dz == pytest.approx(2.0, abs=1e-12)
        # p cross-checked against the reference implementation
        ref = sps.ttest_rel(x, y)
        assert t == pytest.approx(ref.statistic, abs=1e-9)
        assert p == pytest.approx(ref.pvalue, abs=1e-9)

    def test_random_fixtures_match_scipy(self):
        rng = np.random.default_rng(21)
        for _ in range(100):
            n = int(rng.integers(2, 60))
            x = rng.normal(size=n)
            y = rng.normal(size=n)
            t, p, _ = paired_t(x, y)
            ref = sps.ttest_rel(x, y)
            assert t == pytest.approx(ref.statistic, abs=1e-9)
            assert p == pytest.approx(ref.pvalue, abs=1e-6)

    def test_n_below_two_rejected(self):
        with pytest.raises(ValueError):
            paired_t([1.0], [2.0])


class TestWilcoxon:
    def test_all_zero_diffs_p_one(self):
        assert wilcoxon_signed_rank([1.0, 2.0], [1.0, 2.0]) == 1.0

    def test_exact_branch_matches_scipy(self):
        rng = np.random.default_rng(22)
        for _ in range(100):
            n = int(rng.integers(3, 25))
            x = rng.normal(size=n)
            y = rng.normal(size=n)
            mine = wilcoxon_signed_rank(x, y)
            ref = sps.wilcoxon(x, y, zero_method="wilcox", mode="exact").pvalue
            assert mine == pytest.approx(ref, abs=1e-6)

    def test_approx_branch_matches_scipy(self):
        rng = np.random.default_rng(23)
        for _ in range(50):
            n = int(rng.integers(26, 120))
            x = rng.normal(size=n)
            y = rng.normal(size=n)
            mine = wilcoxon_signed_rank(x, y)
            ref = sps.wilcoxon(x, y, zero_method="wilcox", correction=False,
                               mode="approx").pvalue
            assert mine == pytest.approx(ref, abs=1e-6)

    def test_handles_ties_in_large_samples(self):
        rng = np.random.default_rng(24)
        x = rng.integers(0, 4, size=60).astype(float)
        y = rng.integers(0, 4, size=60).astype(float)
        mine = wilcoxon_signed_rank(x, y)
        ref = sps.wilcoxon(x, y, zero_method="wilcox", correction=False,
                           mode="approx").pvalue
        assert mine == pytest.approx(ref, abs=1e-6)


class TestBootstrap:
    def test_seed_determinism(self):
        d = [0.3, -0.1, 0.4, 0.2, -0.2, 0.5]
        a = bootstrap_ci(d, "mean", 2000, seed=9)
        b = bootstrap_ci(d, "mean", 2000, seed=9)
        assert a == b
        c = bootstrap_ci(d, "mean", 2000, seed=10)
        assert a != c

    def test_ci_brackets_mean_for_clear_effect(self):
        rng = np.random.default_rng(25)
        d = rng.normal(loc=1.0, scale=0.1, size=50)
        lo, hi = bootstrap_ci(d, "mean", 5000, seed=1)
        assert lo < float(d.mean()) < hi
        assert lo > 0.5

    def test_dz_ci(self):
        d = [1.0, 2.0, 3.0]
        lo, hi = bootstrap_ci(d, "dz", 2000, seed=2)
        assert lo <= hi


class TestPairedSuite:
    def test_full_result_fields(self):
        x = [2.0, 2.5, 3.0, 2.2, 2.8]
        y = [1.0, 2.0, 2.0, 2.1, 1.5]
        res = paired_tests(x, y, n_resamples=1000, seed=0)
        assert res.n == 5
        assert res.mean_diff == pytest.approx(np.mean(np.array(x) - np.array(y)))
        assert res.ci_low <= res.mean_diff <= res.ci_high
        assert 0 <= res.p_value_t <= 1 and 0 <= res.p_value_wilcoxon <= 1

    def test_identity_case(self):
        x = [1.0, 2.0, 3.0, 4.0]
        res = paired_tests(x, list(x), n_resamples=100, seed=0)
        assert res.t_stat == 0.0
        assert res.cohens_dz == 0.0
        assert res.p_value_wilcoxon == 1.0
        assert res.degenerate_variance

    def test_bonferroni_threshold(self):
        assert bonferroni_alpha(0.05, 40) == pytest.approx(0.00125)

    def test_normal_ci(self):
        lo, hi = normal_ci([1.0, 2.0, 3.0])
        assert lo < 2.0 < hi
