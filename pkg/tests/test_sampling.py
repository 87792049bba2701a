import math

import numpy as np
import pytest
from scipy import stats

from sampledens.errors import InvalidInputError, UnsupportedError
from sampledens.sampling import (
    HighFrequency,
    Jittered,
    Renewal,
    SamplePlan,
    delta_star,
    draw_times,
    minimal_observation_time,
    renewal_density,
)

N = 100_000


class TestDrawTimes:
    def test_high_frequency_grid(self):
        t = draw_times(HighFrequency(0.01), 3, rng_seed=0)
        np.testing.assert_allclose(t, [0, 0.01, 0.02, 0.03], rtol=0, atol=0)

    def test_renewal_mean_increment(self):
        t = draw_times(Renewal(1, 2.0), N, rng_seed=11)
        assert len(t) == N + 1 and t[0] == 0.0
        assert abs(np.diff(t).mean() - 2.0) <= 3 * 2 / math.sqrt(N)

    def test_jittered_moments(self):
        t = draw_times(Jittered(1.0), N, rng_seed=12)
        z = t - np.arange(N + 1) * 1.0
        assert abs(z.mean()) <= 3 / math.sqrt(12 * N)
        assert np.all(np.abs(z) <= 0.5)

    def test_triangular_jitter_support(self):
        t = draw_times(Jittered(2.0, "triangular"), 10_000, rng_seed=1)
        z = t - np.arange(10_001) * 2.0
        assert np.all(np.abs(z) <= 1.0)
        assert abs(z.mean()) < 0.05

    def test_zero_n(self):
        with pytest.raises(InvalidInputError):
            draw_times(Renewal(1, 1.0), 0, 1)

    @pytest.mark.parametrize(
        "scheme", [Renewal(1, 0.5), Renewal(2, 3.0), Jittered(0.7), Jittered(0.2, "triangular"),
                   HighFrequency(1e-3)],
        ids=repr,
    )
    def test_strictly_increasing_1000_seeds(self, scheme):
        for seed in range(1000):
            t = draw_times(scheme, 50, rng_seed=seed)
            assert np.all(np.diff(t) > 0)

    @pytest.mark.parametrize("scheme", [Renewal(2, 1.0), Jittered(1.0)], ids=repr)
    def test_reproducible(self, scheme):
        a = draw_times(scheme, 1000, rng_seed=2**63 + 5)
        b = draw_times(scheme, 1000, rng_seed=2**63 + 5)
        assert a.tobytes() == b.tobytes()
        assert not np.array_equal(a, draw_times(scheme, 1000, rng_seed=6))

    @pytest.mark.parametrize("r, delta", [(1, 2.0), (2, 1.0), (3, 0.5)])
    def test_renewal_gaps_ks(self, r, delta):
        gaps = np.diff(draw_times(Renewal(r, delta), N, rng_seed=100 + r))
        res = stats.kstest(gaps, stats.gamma(a=r, scale=delta / r).cdf)
        assert res.pvalue > 1e-3

    def test_jittered_long_term_rate(self):
        delta = 1.5
        t = draw_times(Jittered(delta), N, rng_seed=21)
        assert abs((t[-1] - t[0]) / N - delta) <= 4 * delta / math.sqrt(N)

    def test_jittered_first_time_may_be_negative(self):
        firsts = [draw_times(Jittered(1.0), 2, rng_seed=s)[0] for s in range(50)]
        assert min(firsts) < 0 < max(firsts)

    def test_invalid_schemes(self):
        with pytest.raises(InvalidInputError):
            Renewal(0, 1.0)
        with pytest.raises(InvalidInputError):
            Renewal(1.5, 1.0)
        with pytest.raises(InvalidInputError):
            Jittered(1.0, "gaussian")
        with pytest.raises(InvalidInputError):
            HighFrequency(0.0)


class TestRenewalDensity:
    def test_poisson(self):
        assert renewal_density(Renewal(1, 2.0), 5.0) == 0.5

    def test_gamma2_limit_and_origin(self):
        scheme = Renewal(2, 1.0)
        assert renewal_density(scheme, 0.0) == 0.0
        assert renewal_density(scheme, 50.0) == pytest.approx(1.0, abs=1e-15)
        vals = [renewal_density(scheme, t) for t in np.linspace(0, 5, 50)]
        assert np.all(np.diff(vals) > 0) and max(vals) < 1.0

    def test_gamma2_matches_simulated_rate(self):
        # renewal density = d/dt E N(t); compare with counts in a window
        scheme = Renewal(2, 1.0)
        hits = 0
        trials = 4000
        a, b = 0.2, 0.4
        for seed in range(trials):
            t = draw_times(scheme, 10, seed)[1:]
            hits += np.count_nonzero((t >= a) & (t < b))
        from scipy import integrate

        expected = integrate.quad(lambda s: renewal_density(scheme, s), a, b)[0]
        assert hits / trials == pytest.approx(expected, abs=4 * math.sqrt(expected / trials))

    def test_higher_shapes_unsupported(self):
        with pytest.raises(UnsupportedError):
            renewal_density(Renewal(3, 1.0), 1.0)


class TestDeltaStar:
    def test_branches(self):
        assert delta_star(SamplePlan(0.5, 1, 0.1, d1=1)) == pytest.approx(0.1)
        assert delta_star(SamplePlan(1, 1, 0.1, d2=1)) == pytest.approx(0.1 * math.log(10))
        assert delta_star(SamplePlan(1, 1, 0.1, d2=1)) == pytest.approx(0.230259, abs=1e-6)
        assert delta_star(SamplePlan(2, 1, 0.1, d3=1)) == pytest.approx(0.316228, abs=1e-6)

    def test_branch_selection_is_exact(self):
        h = 0.1
        assert delta_star(SamplePlan(1 - 1e-15, 1, h)) == pytest.approx(h)
        assert delta_star(SamplePlan(1 + 1e-15, 1, h)) == pytest.approx(h, rel=1e-13)
        assert delta_star(SamplePlan(1.0, 1, h)) == pytest.approx(h * math.log(10))

    def test_log_branch_needs_small_h(self):
        with pytest.raises(InvalidInputError):
            delta_star(SamplePlan(1, 1, 1.0))
        with pytest.raises(InvalidInputError):
            SamplePlan(0.5, 1, -0.1)

    def test_minimal_time(self):
        n = 1000
        assert minimal_observation_time(SamplePlan(0.5, 1, n ** (-1 / 3), n=n)) == pytest.approx(100.0)
        assert minimal_observation_time(SamplePlan(2, 1, 0.01, n=10**6)) == pytest.approx(1e5)
        times = [minimal_observation_time(SamplePlan(1, 1, 0.05, n=k)) for k in (10, 100, 1000)]
        assert times == sorted(times)

    @pytest.mark.parametrize("gamma0", [0.5, 1.0, 2.0])
    def test_increasing_in_h(self, gamma0):
        hs = np.linspace(0.01, 0.9, 40)
        vals = [delta_star(SamplePlan(gamma0, 1, h)) for h in hs]
        if gamma0 == 1.0:
            # h ln(1/h) increases only up to 1/e
            vals = [v for v, h in zip(vals, hs) if h < 1 / math.e]
        assert np.all(np.diff(vals) > 0)
