"""Closed-form layer tests.

Expected values were computed with independent oracles before wiring up
the implementation: a 50-digit mpmath complementary-error-function oracle
for Gaussian tails, bisection on that oracle for the inverse, hand
arithmetic for the window moments, exhaustive enumeration for fusion, and
seeded Monte Carlo integration for the fading averages.
"""

import dataclasses
import math

import numpy as np
import pytest

from coopsense.analytic import (
    AnalyticPoint,
    DetectorParams,
    DualThresholdParams,
    FusionRule,
    FusionSpec,
    NumericalConsistencyError,
    _clamp_probability,
    avg_energy_moments,
    cfar_threshold,
    fuse_probability,
    pd_awgn,
    pd_dual_threshold,
    pd_dual_threshold_rayleigh,
    pd_rayleigh,
    pfa_conventional,
    pfa_dual_threshold,
    q_function,
    q_inverse,
)

# Frozen oracle values (50-digit mpmath, see module docstring).
Q_AT_1_2816 = 0.099991500097675166154
Q_AT_8 = 6.2209605742717841235e-16
QINV_AT_0_1 = 1.281551565544600467
CFAR_0_1_N1000 = 1057.3127283445800787
PD_AWGN_SNR0_1 = 0.80723225883125738821
PFA_DUAL_PIN = 3.4586873172278607014e-7
PD_DUAL_PIN = 0.015433118905719747854
PD_RAYLEIGH_PIN = 0.29927539814738581277

P1000 = DetectorParams(n_samples=1000, sigma2=1.0)


class TestQFunction:
    def test_symmetry_at_zero(self):
        assert q_function(0.0) == 0.5

    def test_far_tail(self):
        assert q_function(8.0) < 1e-14
        assert q_function(8.0) == pytest.approx(Q_AT_8, rel=1e-12)

    def test_oracle_value(self):
        assert q_function(1.2816) == pytest.approx(Q_AT_1_2816, rel=1e-12)

    def test_complement_identity(self):
        for x in np.linspace(-8, 8, 81):
            assert q_function(x) + q_function(-x) == pytest.approx(1.0, abs=1e-12)

    def test_strictly_decreasing(self):
        xs = np.linspace(-8, 8, 201)
        qs = [q_function(x) for x in xs]
        assert all(b < a for a, b in zip(qs, qs[1:]))

    @pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
    def test_non_finite_rejected(self, bad):
        with pytest.raises(ValueError):
            q_function(bad)


class TestQInverse:
    def test_median(self):
        assert q_inverse(0.5) == 0.0

    def test_round_trip_through_q(self):
        for p in np.linspace(0.001, 0.999, 25):
            assert q_function(q_inverse(p)) == pytest.approx(p, abs=1e-10)

    def test_round_trip_from_x(self):
        assert q_inverse(q_function(2.0)) == pytest.approx(2.0, abs=1e-10)

    def test_bisection_oracle(self):
        # Independent route: bisect q_function itself.
        lo, hi = -40.0, 40.0
        for _ in range(200):
            mid = (lo + hi) / 2
            if q_function(mid) > 0.1:
                lo = mid
            else:
                hi = mid
        assert q_inverse(0.1) == pytest.approx((lo + hi) / 2, abs=1e-10)
        assert q_inverse(0.1) == pytest.approx(QINV_AT_0_1, abs=1e-12)

    @pytest.mark.parametrize("bad", [0.0, 1.0, -0.2, 1.7, math.nan])
    def test_domain(self, bad):
        with pytest.raises(ValueError):
            q_inverse(bad)


class TestCfarThreshold:
    def test_median_target_gives_mean_energy(self):
        assert cfar_threshold(0.5, P1000) == 1000.0

    def test_oracle_value(self):
        assert cfar_threshold(0.1, P1000) == pytest.approx(CFAR_0_1_N1000, rel=1e-12)

    @pytest.mark.parametrize("p", [0.01, 0.1, 0.9])
    def test_round_trip(self, p):
        lam = cfar_threshold(p, P1000)
        assert pfa_conventional(lam, P1000) == pytest.approx(p, abs=1e-10)

    def test_round_trip_grid(self):
        for p in np.linspace(0.001, 0.999, 21):
            lam = cfar_threshold(p, P1000)
            assert pfa_conventional(lam, P1000) == pytest.approx(p, abs=1e-10)

    def test_nonpositive_threshold_rejected(self):
        with pytest.raises(ValueError):
            cfar_threshold(0.999, DetectorParams(n_samples=2, sigma2=1.0))

    @pytest.mark.parametrize("bad", [0.0, 1.0, -1.0])
    def test_domain(self, bad):
        with pytest.raises(ValueError):
            cfar_threshold(bad, P1000)


class TestPfaConventional:
    def test_half_at_mean(self):
        for n, s2 in ((10, 1.0), (1000, 2.5), (77, 0.3)):
            params = DetectorParams(n_samples=n, sigma2=s2)
            assert pfa_conventional(n * s2, params) == 0.5

    def test_tail_limit(self):
        assert pfa_conventional(1e9, P1000) == 0.0

    def test_oracle_value(self):
        assert pfa_conventional(CFAR_0_1_N1000, P1000) == pytest.approx(0.1, abs=1e-12)

    def test_strictly_decreasing(self):
        lams = np.linspace(800, 1300, 60)
        vals = [pfa_conventional(lam, P1000) for lam in lams]
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_nonpositive_threshold(self):
        with pytest.raises(ValueError):
            pfa_conventional(0.0, P1000)


class TestPdAwgn:
    def test_zero_snr_collapses_to_pfa(self):
        for lam in (900.0, 1000.0, 1100.0):
            assert pd_awgn(lam, P1000) == pfa_conventional(lam, P1000)

    def test_high_snr_limit(self):
        strong = dataclasses.replace(P1000, snr=1e6)
        assert pd_awgn(CFAR_0_1_N1000, strong) == pytest.approx(1.0, abs=1e-12)

    def test_regression_pin(self):
        params = dataclasses.replace(P1000, snr=0.1)
        val = pd_awgn(CFAR_0_1_N1000, params)
        assert 0.1 < val < 1.0
        assert val == pytest.approx(PD_AWGN_SNR0_1, rel=1e-12)

    def test_nondecreasing_in_snr_above_mean_threshold(self):
        vals = [
            pd_awgn(CFAR_0_1_N1000, dataclasses.replace(P1000, snr=g))
            for g in np.linspace(0.0, 0.5, 30)
        ]
        assert all(b >= a for a, b in zip(vals, vals[1:]))


class TestPdRayleigh:
    def test_degenerate_density(self):
        params = dataclasses.replace(P1000, snr_bar=0.0)
        assert pd_rayleigh(CFAR_0_1_N1000, params) == pfa_conventional(
            CFAR_0_1_N1000, P1000
        )

    def test_bracketed(self):
        params = dataclasses.replace(P1000, snr_bar=0.05)
        out = pd_rayleigh(1100.0, params)
        assert pfa_conventional(1100.0, P1000) <= out <= 1.0

    def test_against_monte_carlo_oracle(self):
        # 1e6-draw Monte Carlo average of pd_awgn over exponential SNR.
        gbar = 10 ** (-1.5)
        params = dataclasses.replace(P1000, snr_bar=gbar)
        rng = np.random.default_rng(20260810)
        gammas = rng.exponential(gbar, size=1_000_000)
        m = 1.0 + gammas
        args = (CFAR_0_1_N1000 - 1000.0 * m) / (math.sqrt(2000.0) * m)
        from scipy.special import erfc

        draws = 0.5 * erfc(args / math.sqrt(2.0))
        mc = draws.mean()
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        quad_val = pd_rayleigh(CFAR_0_1_N1000, params)
        assert abs(quad_val - mc) < 3 * se
        assert quad_val == pytest.approx(PD_RAYLEIGH_PIN, abs=1e-8)

    def test_nondecreasing_in_snr_bar(self):
        vals = [
            pd_rayleigh(1100.0, dataclasses.replace(P1000, snr_bar=g))
            for g in (0.001, 0.01, 0.05, 0.1, 0.3)
        ]
        assert all(b >= a for a, b in zip(vals, vals[1:]))


class TestAvgEnergyMoments:
    def test_all_idle_window(self):
        p = DualThresholdParams(10, 0, 1.0, DetectorParams(50, 2.0, snr=0.7))
        mu, var = avg_energy_moments(p)
        assert mu == pytest.approx(50 * 2.0)
        assert var == pytest.approx(2 * 50 * 4.0 / 10)

    def test_all_busy_window(self):
        p = DualThresholdParams(10, 10, 1.0, DetectorParams(50, 2.0, snr=0.7))
        mu, var = avg_energy_moments(p)
        assert mu == pytest.approx(50 * 2.0 * 1.7)
        assert var == pytest.approx(2 * 50 * 4.0 * 1.7**2 / 10)

    def test_hand_case(self):
        # L=10, M=5, N=10, sigma2=1, snr=1: mean 15, variance 5.
        p = DualThresholdParams(10, 5, 1.0, DetectorParams(10, 1.0, snr=1.0))
        assert avg_energy_moments(p) == (pytest.approx(15.0), pytest.approx(5.0))

    def test_active_count_bounds(self):
        with pytest.raises(ValueError):
            DualThresholdParams(10, 11, 1.0, DetectorParams(10))
        with pytest.raises(ValueError):
            DualThresholdParams(10, -1, 1.0, DetectorParams(10))
        with pytest.raises(ValueError):
            DualThresholdParams(10, 5, 0.9, DetectorParams(10))


class TestPfaDualThreshold:
    def test_unit_rho_reduces_exactly(self):
        p = DualThresholdParams(15, 0, 1.0, P1000)
        for lam in (950.0, 1000.0, CFAR_0_1_N1000):
            assert pfa_dual_threshold(lam, p) == pfa_conventional(lam, P1000)

    def test_vanishing_predictor_weight_leaves_raised_branch(self):
        # Far above the idle window mean the predictor weight is ~0 and the
        # value collapses to the raised-threshold exceedance.
        p = DualThresholdParams(15, 0, 1.2, P1000)
        lam = 1200.0
        val = pfa_dual_threshold(lam, p)
        assert val == pytest.approx(pfa_conventional(1.2 * lam, P1000), rel=1e-6)

    def test_regression_pin(self):
        p = DualThresholdParams(15, 0, 1.2, P1000)
        val = pfa_dual_threshold(CFAR_0_1_N1000, p)
        assert val < 0.1
        assert val == pytest.approx(PFA_DUAL_PIN, rel=1e-10)

    def test_bracketed_by_branches(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            rho = 1.0 + rng.uniform(0.0, 0.5)
            lam = rng.uniform(900.0, 1200.0)
            m = int(rng.integers(0, 16))
            p = DualThresholdParams(15, m, rho, dataclasses.replace(P1000, snr=0.05))
            val = pfa_dual_threshold(lam, p)
            hi = pfa_conventional(lam / rho, P1000)
            lo = pfa_conventional(rho * lam, P1000)
            assert lo - 1e-15 <= val <= hi + 1e-15

    def test_convex_combination_identity(self):
        from coopsense.analytic import _predictor_weight

        rng = np.random.default_rng(11)
        for _ in range(50):
            rho = 1.0 + rng.uniform(0.0, 0.4)
            lam = rng.uniform(900.0, 1200.0)
            m = int(rng.integers(0, 16))
            p = DualThresholdParams(15, m, rho, dataclasses.replace(P1000, snr=0.03))
            w = _predictor_weight(lam, p)
            assert 0.0 <= w <= 1.0
            rebuilt = w * pfa_conventional(lam / rho, P1000) + (1 - w) * pfa_conventional(
                rho * lam, P1000
            )
            assert pfa_dual_threshold(lam, p) == pytest.approx(rebuilt, abs=1e-12)


class TestPdDualThreshold:
    def test_unit_rho_reduces(self):
        base = dataclasses.replace(P1000, snr=0.0316)
        p = DualThresholdParams(15, 15, 1.0, base)
        assert pd_dual_threshold(CFAR_0_1_N1000, p) == pd_awgn(CFAR_0_1_N1000, base)

    def test_strong_predictor_takes_lowered_branch(self):
        # Busy window at high SNR: weight ~1, value ~ lowered-threshold
        # detection probability.
        base = dataclasses.replace(P1000, snr=0.5)
        p = DualThresholdParams(15, 15, 1.2, base)
        val = pd_dual_threshold(CFAR_0_1_N1000, p)
        assert val == pytest.approx(pd_awgn(CFAR_0_1_N1000 / 1.2, base), rel=1e-6)

    def test_regression_pin(self):
        # At very low SNR the busy-window mean sits below the static
        # threshold, the predictor rarely fires, and the dual-threshold
        # value drops below the fixed-threshold one; the pin records the
        # oracle-computed value.
        base = dataclasses.replace(P1000, snr=0.0316)
        p = DualThresholdParams(15, 15, 1.2, base)
        val = pd_dual_threshold(CFAR_0_1_N1000, p)
        assert val == pytest.approx(PD_DUAL_PIN, rel=1e-10)

    def test_branch_sandwich(self):
        base = dataclasses.replace(P1000, snr=0.05)
        for rho in (1.1, 1.3):
            p = DualThresholdParams(15, 15, rho, base)
            val = pd_dual_threshold(CFAR_0_1_N1000, p)
            lo = pd_awgn(rho * CFAR_0_1_N1000, base)
            hi = pd_awgn(CFAR_0_1_N1000 / rho, base)
            assert lo - 1e-15 <= val <= hi + 1e-15


class TestPdDualThresholdRayleigh:
    def test_unit_rho_matches_plain_rayleigh(self):
        base = dataclasses.replace(P1000, snr_bar=0.0316)
        p = DualThresholdParams(15, 15, 1.0, base)
        assert pd_dual_threshold_rayleigh(CFAR_0_1_N1000, p) == pytest.approx(
            pd_rayleigh(CFAR_0_1_N1000, base), abs=1e-8
        )

    def test_degenerate_density(self):
        base = dataclasses.replace(P1000, snr_bar=0.0)
        p = DualThresholdParams(15, 15, 1.2, base)
        expected = pd_dual_threshold(
            CFAR_0_1_N1000, DualThresholdParams(15, 15, 1.2, P1000)
        )
        assert pd_dual_threshold_rayleigh(CFAR_0_1_N1000, p) == expected

    def test_against_monte_carlo_oracle(self):
        gbar = 10 ** (-1.5)
        base = dataclasses.replace(P1000, snr_bar=gbar)
        p = DualThresholdParams(15, 15, 1.2, base)
        rng = np.random.default_rng(1234)
        gammas = rng.exponential(gbar, size=400_000)
        draws = np.array(
            [
                pd_dual_threshold(
                    CFAR_0_1_N1000,
                    DualThresholdParams(
                        15, 15, 1.2, dataclasses.replace(P1000, snr=float(g))
                    ),
                )
                for g in gammas[:40_000]
            ]
        )
        mc = draws.mean()
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        val = pd_dual_threshold_rayleigh(CFAR_0_1_N1000, p)
        assert abs(val - mc) < 3 * se


class TestFuseProbability:
    @staticmethod
    def _enumerate(p, spec):
        """Exhaustive oracle: sum probabilities of qualifying decision vectors."""
        import itertools

        total = 0.0
        for bits in itertools.product((0, 1), repeat=spec.k_crs):
            prob = math.prod(p if b else (1 - p) for b in bits)
            votes = sum(bits)
            if spec.rule is FusionRule.AND:
                ok = votes == spec.k_crs
            elif spec.rule is FusionRule.OR:
                ok = votes >= 1
            else:
                ok = votes >= spec.majority_l
            if ok:
                total += prob
        return total

    def test_single_detector_identity(self):
        for rule in FusionRule:
            spec = FusionSpec(rule, 1, 1 if rule is FusionRule.MAJORITY else None)
            assert fuse_probability(0.37, spec) == pytest.approx(0.37, abs=1e-15)

    def test_or_hand_value(self):
        assert fuse_probability(0.1, FusionSpec(FusionRule.OR, 3)) == pytest.approx(
            0.271, abs=1e-12
        )

    def test_majority_hand_value(self):
        spec = FusionSpec(FusionRule.MAJORITY, 3, 2)
        assert fuse_probability(0.5, spec) == pytest.approx(0.5, abs=1e-12)

    @pytest.mark.parametrize("p", [0.1, 0.5, 0.9])
    @pytest.mark.parametrize("k", range(1, 11))
    def test_enumeration_oracle_all_rules(self, p, k):
        for rule in FusionRule:
            ells = range(1, k + 1) if rule is FusionRule.MAJORITY else [None]
            for ell in ells:
                spec = FusionSpec(rule, k, ell)
                assert fuse_probability(p, spec) == pytest.approx(
                    self._enumerate(p, spec), abs=1e-12
                )

    def test_boundary_identities_exact(self):
        for k in (2, 5, 9):
            for p in (0.1, 0.42, 0.9):
                or_spec = FusionSpec(FusionRule.OR, k)
                and_spec = FusionSpec(FusionRule.AND, k)
                assert fuse_probability(p, FusionSpec(FusionRule.MAJORITY, k, 1)) == (
                    fuse_probability(p, or_spec)
                )
                assert fuse_probability(p, FusionSpec(FusionRule.MAJORITY, k, k)) == (
                    fuse_probability(p, and_spec)
                )

    def test_majority_nonincreasing_in_votes(self):
        k = 7
        vals = [
            fuse_probability(0.3, FusionSpec(FusionRule.MAJORITY, k, ell))
            for ell in range(1, k + 1)
        ]
        assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))

    def test_and_below_or_above(self):
        for k in (2, 3, 8):
            for p in (0.2, 0.5, 0.8):
                assert fuse_probability(p, FusionSpec(FusionRule.AND, k)) < p
                assert fuse_probability(p, FusionSpec(FusionRule.OR, k)) > p

    def test_majority_default_vote_count(self):
        assert FusionSpec(FusionRule.MAJORITY, 7).majority_l == 4
        assert FusionSpec(FusionRule.MAJORITY, 4).majority_l == 2

    def test_invalid_votes(self):
        with pytest.raises(ValueError):
            FusionSpec(FusionRule.MAJORITY, 3, 4)
        with pytest.raises(ValueError):
            FusionSpec(FusionRule.MAJORITY, 3, 0)

    def test_invalid_probability(self):
        with pytest.raises(ValueError):
            fuse_probability(1.2, FusionSpec(FusionRule.OR, 2))


class TestClampGuard:
    def test_rounding_clamped(self):
        assert _clamp_probability(-1e-13, "t") == 0.0
        assert _clamp_probability(1.0 + 1e-13, "t") == 1.0

    def test_large_excursion_raises(self):
        with pytest.raises(NumericalConsistencyError):
            _clamp_probability(-1e-8, "t")
        with pytest.raises(NumericalConsistencyError):
            _clamp_probability(1.0 + 1e-8, "t")


class TestAnalyticPoint:
    def test_valid(self):
        pt = AnalyticPoint(0.1, 0.5, 1000.0)
        assert pt.p_fa == 0.1

    def test_invalid(self):
        with pytest.raises(ValueError):
            AnalyticPoint(-0.1, 0.5, 1000.0)
        with pytest.raises(ValueError):
            AnalyticPoint(0.1, 1.5, 1000.0)
        with pytest.raises(ValueError):
            AnalyticPoint(0.1, 0.5, 0.0)
