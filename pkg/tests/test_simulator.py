import math

import numpy as np
import pytest
from scipy import stats

from cdmaload.load_analysis import db_to_linear
from cdmaload.scalar_channel import mmse, mmse_binary, posterior_probabilities, q_function
from cdmaload.simulator import (
    RateEstimate,
    SimConfig,
    confusion_counts,
    empirical_mmse_scalar,
    generate_frame,
    hypotheses,
    io_detect,
    jo_detect,
    run_monte_carlo,
)

from oracles import brute_force_jo, brute_force_posteriors


def cfg(**kw):
    base = dict(K=3, N=7, gamma=float(db_to_linear(8.0)), alpha=0.5, frames=50, seed=9)
    base.update(kw)
    return SimConfig(**base)


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(K=0), dict(K=13), dict(N=0), dict(alpha=1.5),
                                    dict(gamma=-1.0), dict(frames=0), dict(seed=-1)])
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            cfg(**kw)

    def test_load(self):
        assert cfg(K=8, N=19).beta == pytest.approx(8 / 19)


class TestFrames:
    def test_deterministic(self):
        c = cfg()
        a, b = generate_frame(c, 4), generate_frame(c, 4)
        np.testing.assert_array_equal(a.y, b.y)
        assert not np.array_equal(a.y, generate_frame(c, 5).y)

    def test_inactive_users(self):
        c = cfg(alpha=0.0)
        f = generate_frame(c, 0)
        assert np.all(f.b == 0)
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((c.seed, 0))))
        rng.random((c.N, c.K))
        rng.choice([-1, 0, 1], size=c.K, p=[0.0, 1.0, 0.0])
        np.testing.assert_array_equal(f.y, rng.standard_normal(c.N))

    def test_unit_column_norms(self):
        f = generate_frame(cfg(K=6, N=19), 0)
        np.testing.assert_allclose(np.sum(f.S ** 2, axis=0), 1.0, rtol=0, atol=1e-15)

    def test_symbol_frequencies(self):
        c = cfg(K=10, N=1, alpha=0.3)
        b = np.concatenate([generate_frame(c, i).b for i in range(10 ** 4)])
        counts = [np.sum(b == x) for x in (-1, 0, 1)]
        expected = np.array([0.15, 0.7, 0.15]) * len(b)
        assert stats.chisquare(counts, expected).pvalue > 1e-3


class TestDetectors:
    def test_hypothesis_order(self):
        H = hypotheses(2)
        assert H.shape == (9, 2)
        np.testing.assert_array_equal(H[0], [-1, -1])
        np.testing.assert_array_equal(H[-1], [1, 1])

    def test_io_matches_brute_force(self):
        c = cfg()
        for i in range(20):
            f = generate_frame(c, i)
            post, dec, means = io_detect(f, c)
            ref = brute_force_posteriors(f.S, f.y, c.gamma, c.alpha)
            np.testing.assert_allclose(post, ref, rtol=0, atol=1e-12)
            np.testing.assert_allclose(means, ref[:, 2] - ref[:, 0], atol=1e-12)

    def test_jo_matches_brute_force(self):
        c = cfg()
        for i in range(20):
            f = generate_frame(c, i)
            dec, tie = jo_detect(f, c)
            np.testing.assert_array_equal(dec, brute_force_jo(f.S, f.y, c.gamma, c.alpha))

    @pytest.mark.parametrize("K", [2, 4, 6])
    def test_log_and_linear_accumulation_agree(self, K):
        c = cfg(K=K, N=2 * K + 1, gamma=4.0)
        frames = [generate_frame(c, i) for i in range(10)]
        a = io_detect(frames, c)[0]
        b = io_detect(frames, c, log_domain=False)[0]
        np.testing.assert_allclose(a, b, atol=1e-10)

    def test_single_user_is_scalar_channel(self):
        c = cfg(K=1, N=16, alpha=0.4)
        for i in range(100):
            f = generate_frame(c, i)
            post = io_detect(f, c)[0]
            ref = posterior_probabilities(f.S[:, 0] @ f.y, c.gamma, c.alpha)
            np.testing.assert_allclose(post[0], ref, atol=1e-12)

    def test_noiseless_limit(self):
        c = cfg(K=4, N=9, gamma=1e6)
        for i in range(10):
            f = generate_frame(c, i)
            np.testing.assert_array_equal(io_detect(f, c)[1], f.b)
            np.testing.assert_array_equal(jo_detect(f, c)[0], f.b)

    def test_huge_snr_no_underflow(self):
        c = cfg(K=3, gamma=1e8)
        post = io_detect(generate_frame(c, 0), c)[0]
        assert np.all(np.isfinite(post))


class TestAggregation:
    def test_confusions(self):
        b = np.array([0, 0, 1, -1, 1])
        d = np.array([1, 0, 0, 1, 1])
        assert confusion_counts(b, d) == {"false_alarm": 1, "missed_detection": 1, "flip": 1}

    def test_breakdown_sums_to_errors(self):
        r = run_monte_carlo(cfg(frames=300), predict=False)
        for rate, parts in ((r.ser_io, r.breakdown_io), (r.ser_jo, r.breakdown_jo)):
            assert rate.errors == sum(parts.values())

    def test_reproducible_and_batch_invariant(self):
        a = run_monte_carlo(cfg(frames=300, batch=7), predict=False)
        b = run_monte_carlo(cfg(frames=300, batch=256), predict=False)
        assert a.to_dict()["ser_io"] == b.to_dict()["ser_io"]
        assert a.empirical_mmse == b.empirical_mmse
        assert a.to_json() == run_monte_carlo(cfg(frames=300, batch=7), predict=False).to_json()

    def test_ci_scaling(self):
        # 95% half-width scales as 1/sqrt(trials)
        one = RateEstimate.from_counts(100, 10 ** 4)
        two = RateEstimate.from_counts(200, 2 * 10 ** 4)
        four = RateEstimate.from_counts(400, 4 * 10 ** 4)
        assert two.ci_half_width / one.ci_half_width == pytest.approx(1 / math.sqrt(2), rel=1e-12)
        assert four.ci_half_width / one.ci_half_width == pytest.approx(0.5, rel=0.1)

    def test_ci_scaling_on_runs(self):
        c = cfg(K=4, N=9, gamma=4.0)
        a = run_monte_carlo(SimConfig(**{**c.__dict__, "frames": 500}), predict=False)
        b = run_monte_carlo(SimConfig(**{**c.__dict__, "frames": 2000}), predict=False)
        assert b.ser_io.ci_half_width / a.ser_io.ci_half_width == pytest.approx(0.5, rel=0.1)

    def test_jo_not_better_than_io(self):
        r = run_monte_carlo(cfg(K=5, N=11, gamma=3.0, frames=2000), predict=False)
        assert r.ser_io.rate <= r.ser_jo.rate + 2 * r.ser_jo.ci_half_width

    def test_prediction_row(self):
        r = run_monte_carlo(cfg(frames=20))
        assert set(r.predicted) == {"eta_operational", "pe", "mmse"}


class TestFiniteSize:
    def test_all_active_within_factor_two(self):
        # binary inputs: the decoupled error probability is Q(sqrt(eta gamma))
        c = SimConfig(K=8, N=19, gamma=float(db_to_linear(8.0)), alpha=1.0, frames=20000, seed=17)
        r = run_monte_carlo(c)
        ref = float(q_function(math.sqrt(r.predicted["eta_operational"] * c.gamma)))
        assert 0.5 <= r.ser_io.rate / ref <= 2.0

    def test_empirical_mmse_tracks_prediction(self):
        c = SimConfig(K=6, N=14, gamma=float(db_to_linear(10.0)), alpha=0.5, frames=5000, seed=2)
        r = run_monte_carlo(c)
        assert 0.5 <= r.empirical_mmse / r.predicted["mmse"] <= 2.0


class TestScalarMonteCarlo:
    def test_zero_snr(self):
        est, se = empirical_mmse_scalar(0.0, 0.3, 10 ** 5, seed=1)
        assert abs(est - 0.3) <= 3 * se

    def test_brackets_quadrature(self):
        est, se = empirical_mmse_scalar(10.0, 0.5, 10 ** 6, seed=2)
        assert abs(est - float(mmse(10.0, 0.5))) <= 3 * se

    def test_binary(self):
        est, se = empirical_mmse_scalar(4.0, 1.0, 10 ** 6, seed=3)
        assert abs(est - float(mmse_binary(4.0))) <= 3 * se

    def test_minimum_samples(self):
        with pytest.raises(ValueError):
            empirical_mmse_scalar(1.0, 0.5, 100, seed=0)
