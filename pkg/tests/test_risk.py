import math

import numpy as np
import pytest
from scipy import integrate, stats

from sampledens.errors import InvalidInputError, NumericalFailureError
from sampledens.estimators import fit_histogram, l2_distance_sq
from sampledens.grid import Partition
from sampledens.processes import OUModel, roughness_grad, roughness_hess
from sampledens.risk import (
    RiskConfig,
    exact_isb,
    expected_histogram,
    mc_mise,
    pointwise_variance_scaled,
)
from sampledens.sampling import HighFrequency, Jittered, Renewal


@pytest.fixture(scope="module")
def ou():
    return OUModel()


class TestExactISB:
    def test_histogram_leading_term(self, ou):
        lead = 0.05**2 / 12 * roughness_grad(ou)
        assert lead == pytest.approx(2.9385e-5, rel=1e-4)
        assert exact_isb("histogram", ou, Partition(1, 0.05)) == pytest.approx(lead, rel=0.05)

    def test_fp_leading_term(self, ou):
        lead = 49 / 2880 * roughness_hess(ou) * 0.3**4
        assert lead == pytest.approx(2.9166e-5, rel=1e-3)
        assert exact_isb("frequency_polygon", ou, Partition(1, 0.3)) == pytest.approx(lead, rel=0.10)

    def test_histogram_halving(self, ou):
        ratio = exact_isb("histogram", ou, Partition(1, 0.05)) / exact_isb("histogram", ou, Partition(1, 0.025))
        assert 3.8 <= ratio <= 4.2

    def test_against_direct_quadrature(self, ou):
        # oracle: per-bin adaptive quadrature with bin probabilities from scipy's normal CDF
        h = 0.4
        total = 0.0
        for j in range(-25, 25):
            a, b = j * h, (j + 1) * h
            height = (stats.norm.cdf(b) - stats.norm.cdf(a)) / h
            total += integrate.quad(lambda x: (height - stats.norm.pdf(x)) ** 2, a, b, epsabs=1e-15)[0]
        assert exact_isb("histogram", ou, Partition(1, h), domain=(-10, 10)) == pytest.approx(total, rel=1e-9)

    def test_fp_against_direct_quadrature(self, ou):
        h = 0.5
        heights = {j: (stats.norm.cdf((j + 1) * h) - stats.norm.cdf(j * h)) / h for j in range(-30, 30)}
        total = 0.0
        for j in range(-25, 25):
            c0, c1 = (j + 0.5) * h, (j + 1.5) * h

            def err(x, j=j, c0=c0, c1=c1):
                lin = (x - c0) / h * heights[j + 1] + (c1 - x) / h * heights[j]
                return (lin - stats.norm.pdf(x)) ** 2

            total += integrate.quad(err, c0, c1, epsabs=1e-15)[0]
        lo, hi = 0.5 * h - 25 * h, 0.5 * h + 25 * h
        got = exact_isb("frequency_polygon", ou, Partition(1, h), domain=(lo, hi))
        assert got == pytest.approx(total, rel=1e-9)

    def test_two_dimensional(self):
        m = OUModel(2)
        h = 0.1
        got = exact_isb("histogram", m, Partition(2, h))
        assert got == pytest.approx(h**2 / 12 * roughness_grad(m), rel=0.05)

    def test_fp_beats_histogram_at_small_h(self, ou):
        for h in (0.1, 0.05, 0.02):
            p = Partition(1, h)
            assert exact_isb("frequency_polygon", ou, p) < exact_isb("histogram", ou, p)

    def test_expected_histogram_mass(self, ou):
        mean = expected_histogram(ou, Partition(1, 0.3, origin=0.1), (-8, 8))
        assert mean.integral() == pytest.approx(1.0, abs=1e-14)

    def test_isb_increasing_in_h(self, ou):
        hs = np.geomspace(0.02, 0.2, 8)
        vals = [exact_isb("histogram", ou, Partition(1, h)) for h in hs]
        assert np.all(np.diff(vals) > 0)


class TestMonteCarloMISE:
    def test_decomposition_identity(self, ou):
        for kind in ("histogram", "frequency_polygon"):
            rep = mc_mise(RiskConfig(ou, Renewal(1, 1.0), kind, 2000, 0.2, 200, 5))
            assert abs(rep.mise - (rep.isb_exact + rep.iv_mc)) <= 3 * rep.mise_stderr
            assert rep.mise + 3 * rep.mise_stderr >= rep.isb_exact
            assert rep.isb_exact >= 0 and rep.iv_mc >= 0

    def test_iid_limit(self, ou):
        n = 10_000
        h = 3.4908 * n ** (-1 / 3)
        rep = mc_mise(RiskConfig(ou, Renewal(1, 50.0), "histogram", n, h, 200, 17))
        assert 0.9 <= n * h * rep.iv_mc <= 1.3

    def test_two_replications(self, ou):
        rep = mc_mise(RiskConfig(ou, Jittered(1.0), "histogram", 50, 0.5, 2, 0))
        assert math.isfinite(rep.mise_stderr) and rep.mise_stderr >= 0
        assert len(rep.l2) == 2 and rep.seeds == [0, 1]
        lines = rep.to_csv().splitlines()
        assert lines[0] == "mise,mise_stderr,isb_exact,iv_mc,replications"
        assert lines[2] == "rep,seed,l2,iv_term" and len(lines) == 5

    def test_invalid_config(self, ou):
        with pytest.raises(InvalidInputError):
            RiskConfig(ou, Renewal(1, 1.0), "histogram", 100, 0.1, 1, 0)
        with pytest.raises(InvalidInputError):
            RiskConfig(ou, Renewal(1, 1.0), "kernel", 100, 0.1, 5, 0)
        with pytest.raises(InvalidInputError):
            RiskConfig(OUModel(2), Renewal(1, 1.0), "frequency_polygon", 100, 0.1, 5, 0)

    def test_seed_determinism_and_thread_independence(self, ou):
        cfg = dict(model=ou, scheme=Renewal(2, 0.5), kind="frequency_polygon", n=500, h=0.3,
                   replications=12, base_seed=2**40 + 3)
        a = mc_mise(RiskConfig(**cfg))
        b = mc_mise(RiskConfig(**cfg))
        c = mc_mise(RiskConfig(**cfg, threads=3))
        assert a.to_csv() == b.to_csv() == c.to_csv()
        assert a.seeds == [(2**40 + 3) ^ r for r in range(12)]

    def test_replication_matches_manual_run(self, ou):
        from sampledens.risk import stream_seed
        from sampledens.sampling import draw_times

        cfg = RiskConfig(ou, Renewal(1, 2.0), "histogram", 300, 0.25, 3, 99)
        rep = mc_mise(cfg)
        seed = 99 ^ 2
        t = draw_times(cfg.scheme, 300, stream_seed(seed, 0))
        x = ou.sample_at(t[1:], stream_seed(seed, 1))
        manual = l2_distance_sq(fit_histogram(cfg.partition, x), ou.pdf, (-8, 8))
        assert rep.l2[2] == pytest.approx(manual, rel=1e-12)

    def test_samples_outside_domain_abort(self, ou):
        cfg = RiskConfig(ou, Renewal(1, 1.0), "histogram", 1000, 0.2, 2, 1, domain=(-0.5, 0.5))
        with pytest.raises(NumericalFailureError, match="replication 0"):
            mc_mise(cfg)

    def test_bias_variance_tradeoff(self, ou):
        n = 2000
        reps = {h: mc_mise(RiskConfig(ou, Renewal(1, 5.0), "histogram", n, h, 100, 3))
                for h in (0.05, 0.5)}
        small, large = reps[0.05], reps[0.5]
        assert large.isb_exact > small.isb_exact
        spread = 3 * math.hypot(np.std(small.iv_terms) / 10, np.std(large.iv_terms) / 10)
        assert small.iv_mc - large.iv_mc > spread

    @pytest.mark.slow
    def test_l2_of_large_iid_histogram_matches_mise(self, ou):
        n, h = 1_000_000, 0.1
        x = np.random.default_rng(2024).standard_normal(n)
        single = l2_distance_sq(fit_histogram(Partition(1, h), x), ou.pdf, (-8, 8))
        rep = mc_mise(RiskConfig(ou, Renewal(1, 100.0), "histogram", n, h, 30, 77))
        spread = np.std(rep.l2, ddof=1)
        assert abs(single - rep.mise) <= 3 * math.hypot(spread, rep.mise_stderr)


class TestPointwise:
    def test_requires_high_frequency(self, ou):
        cfg = RiskConfig(ou, Renewal(1, 1.0), "histogram", 100, 0.1, 5, 0)
        with pytest.raises(InvalidInputError, match="high-frequency"):
            pointwise_variance_scaled(cfg, 0.0)

    def test_beta_must_exceed_dimension(self, ou):
        cfg = RiskConfig(ou, HighFrequency(0.01), "histogram", 100, 0.1, 5, 0)
        with pytest.raises(InvalidInputError):
            pointwise_variance_scaled(cfg, 0.0, beta=1.0)

    def test_far_tail(self, ou):
        n = 2**16
        h = n ** (-1 / 5)
        cfg = RiskConfig(ou, HighFrequency(h * h), "histogram", n, h, 50, 3)
        assert pointwise_variance_scaled(cfg, 10.0, beta=2) < 0.01

    def test_moderate_n_near_limit(self, ou):
        n = 2**16
        h = n ** (-1 / 5)
        limit = math.log(2) / math.pi
        for kind in ("histogram", "frequency_polygon"):
            cfg = RiskConfig(ou, HighFrequency(h * h), kind, n, h, 200, 8)
            assert pointwise_variance_scaled(cfg, 0.0, beta=2) == pytest.approx(limit, rel=0.35)
