import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from pa_linksim.channel import (
    SPEED_OF_LIGHT,
    ConditionalGain,
    MismatchModel,
    SystemConfig,
    build_mismatch,
    conditional_gain,
    conditional_gain_cdf,
    conditional_gain_pdf,
    inflate_sigma,
    make_rng,
    sample_actual_gain,
    sample_known_channel,
    temporal_combine,
)
from pa_linksim.montecarlo import KMH
from pa_linksim.specfun import DomainError

G_HATS = (0.0, 0.5, 1.0, 2.0, 4.0)
SIGMA2S = (0.05, 0.25, 0.5, 1.0)


def pdf_quad(cg, lo, hi):
    # the density is concentrated around sqrt(x) ~ sqrt(g_hat) +- sigma
    centre = cg.g_hat + cg.sigma**2
    pts = [p for p in (0.5 * centre, centre, 2 * centre) if lo < p < hi]
    val, _ = integrate.quad(
        lambda x: conditional_gain_pdf(cg, x), lo, hi, points=pts or None, epsabs=1e-13, epsrel=1e-12, limit=200
    )
    return val


class TestSystemConfig:
    def test_defaults(self):
        cfg = SystemConfig()
        assert cfg.carrier_freq_hz == 2.68e9
        assert cfg.proc_delay_s == 5e-3
        assert cfg.antenna_sep_lambda == pytest.approx(1.5, rel=1e-15)
        assert cfg.wavelength_m == pytest.approx(0.11186285746268657, rel=1e-15)

    def test_matched_velocity(self):
        # d_a / delta for 1.5 wavelengths at 2.68 GHz
        assert SystemConfig().matched_velocity_mps / KMH == pytest.approx(120.81188605970149, rel=1e-14)

    @pytest.mark.parametrize(
        "field, value",
        [("carrier_freq_hz", 0.0), ("proc_delay_s", -1.0), ("velocity_mps", -1.0), ("beta", 1.5), ("snr_db", math.inf)],
    )
    def test_invalid(self, field, value):
        with pytest.raises(ValueError):
            replace(SystemConfig(), **{field: value})


class TestBuildMismatch:
    def test_matched_speed_has_no_mismatch(self):
        cfg = SystemConfig()
        cfg = replace(cfg, velocity_mps=cfg.matched_velocity_mps)
        m = build_mismatch(cfg)
        assert m.effective_distance_m < 1e-15
        assert m.sigma <= 1e-9

    def test_stationary_distance_is_separation(self):
        cfg = replace(SystemConfig(), antenna_sep_m=0.3)
        assert build_mismatch(cfg).effective_distance_m == 0.3

    def test_117_kmh_frozen(self):
        m = build_mismatch(replace(SystemConfig(), velocity_mps=117 * KMH))
        assert m.effective_distance_m == pytest.approx(0.0052942861940298507, rel=1e-12)
        assert m.rho == pytest.approx(0.97801422846713989, abs=1e-14)
        assert m.sigma == pytest.approx(0.20853817136396181, rel=1e-12)

    def test_symmetric_about_matched_speed(self):
        cfg = SystemConfig()
        v0 = cfg.matched_velocity_mps
        lo = build_mismatch(replace(cfg, velocity_mps=v0 - 3.0))
        hi = build_mismatch(replace(cfg, velocity_mps=v0 + 3.0))
        assert lo.sigma == pytest.approx(hi.sigma, rel=1e-12)

    def test_uses_exact_speed_of_light(self):
        assert SPEED_OF_LIGHT == 299_792_458.0


class TestTemporalCombine:
    def _m(self, sigma):
        return MismatchModel(0.1, 0.0, math.sqrt(1 - sigma**2), sigma)

    def test_beta_one(self):
        assert temporal_combine(self._m(0.3), 1.0) == pytest.approx((math.sqrt(0.91), 0.3), abs=1e-15)

    def test_beta_zero(self):
        assert temporal_combine(self._m(0.7), 0.0) == (0.0, 1.0)

    def test_frozen_arithmetic(self):
        ms, se = temporal_combine(self._m(0.5), 0.9)
        assert se == pytest.approx(math.sqrt(0.3925), rel=1e-15)
        assert ms == pytest.approx(0.9 * math.sqrt(0.75), rel=1e-15)

    @given(st.floats(0, 1), st.floats(0, 1))
    def test_unit_total_variance(self, sigma, beta):
        ms, se = temporal_combine(self._m(sigma), beta)
        assert ms * ms + se * se == pytest.approx(1.0, abs=1e-12)

    def test_rejects_bad_beta(self):
        with pytest.raises(ValueError):
            temporal_combine(self._m(0.5), -0.1)

    def test_inflate(self):
        assert inflate_sigma(0.3, 0.16) == pytest.approx(0.5)
        assert inflate_sigma(0.9, 1.0) == 1.0


class TestConditionalGain:
    def test_sigma_zero_rejected(self):
        with pytest.raises(ValueError):
            ConditionalGain(1.0, 0.0)

    def test_sign_of_rho_is_irrelevant(self):
        h = 0.3 - 1.1j
        assert conditional_gain(h, 0.8, 0.6) == conditional_gain(h, -0.8, 0.6)

    def test_s(self):
        assert ConditionalGain(2.0, 0.5).s == pytest.approx(4.0)


class TestPdf:
    def test_rayleigh_case(self):
        x = np.linspace(0, 20, 41)
        np.testing.assert_allclose(conditional_gain_pdf(ConditionalGain(0.0, 1.0), x), np.exp(-x), rtol=1e-14)

    def test_frozen(self):
        # 30-digit value of the noncentral density at g_hat = 1, sigma^2 = 1/4, x = 1
        assert conditional_gain_pdf(ConditionalGain(1.0, 0.5), 1.0) == pytest.approx(0.57372712742740124, rel=1e-12)

    @pytest.mark.parametrize("g_hat", G_HATS)
    @pytest.mark.parametrize("sigma2", SIGMA2S)
    def test_integrates_to_one(self, g_hat, sigma2):
        cg = ConditionalGain(g_hat, math.sqrt(sigma2))
        hi = (math.sqrt(g_hat) + 12 * cg.sigma) ** 2
        assert pdf_quad(cg, 0.0, hi) == pytest.approx(1.0, abs=1e-8)

    def test_no_overflow_far_in_tail(self):
        value = conditional_gain_pdf(ConditionalGain(400.0, 0.05), 400.0)
        assert math.isfinite(value) and value > 0

    def test_negative_rejected(self):
        with pytest.raises(DomainError):
            conditional_gain_pdf(ConditionalGain(1.0, 0.5), -1.0)


class TestCdf:
    def test_zero(self):
        assert conditional_gain_cdf(ConditionalGain(1.3, 0.4), 0.0) == 0.0

    def test_exponential_case(self):
        assert conditional_gain_cdf(ConditionalGain(0.0, 1.0), 1.0) == pytest.approx(1 - math.exp(-1), rel=1e-14)

    def test_frozen_against_quadrature(self):
        assert conditional_gain_cdf(ConditionalGain(1.0, 0.5), 1.5) == pytest.approx(0.68204014811692537, abs=1e-12)

    @pytest.mark.parametrize("g_hat", G_HATS)
    @pytest.mark.parametrize("sigma2", SIGMA2S)
    def test_matches_integrated_pdf(self, g_hat, sigma2):
        cg = ConditionalGain(g_hat, math.sqrt(sigma2))
        xs = np.linspace(0.05, (math.sqrt(g_hat) + 4 * cg.sigma) ** 2, 20)
        cdf = conditional_gain_cdf(cg, xs)
        quad = [pdf_quad(cg, 0.0, x) for x in xs]
        np.testing.assert_allclose(cdf, quad, atol=1e-8)

    def test_monotone_and_tends_to_one(self):
        cg = ConditionalGain(2.0, 0.3)
        c = conditional_gain_cdf(cg, np.linspace(0, 30, 301))
        assert np.all(np.diff(c) >= -1e-15)
        assert c[-1] == pytest.approx(1.0, abs=1e-14)


class TestSamplers:
    def test_pcg64_reference_stream(self):
        # raw 64-bit outputs of numpy's PCG64 for seed 12345
        raw = np.random.PCG64(12345).random_raw(3)
        assert raw.tolist() == [4193609425186963869, 5843160025838961886, 14708796524633321433]
        assert make_rng(12345).bit_generator.random_raw(3).tolist() == raw.tolist()

    def test_seed_range(self):
        with pytest.raises(ValueError):
            make_rng(-1)
        with pytest.raises(ValueError):
            make_rng(1 << 64)

    def test_known_channel_deterministic(self):
        a = sample_known_channel(make_rng(7), 10)
        b = sample_known_channel(make_rng(7), 10)
        np.testing.assert_array_equal(a, b)
        assert sample_known_channel(make_rng(12345)) == complex(-1.006796338500253, 0.893590962321514)

    def test_known_channel_moments(self):
        h = sample_known_channel(make_rng(1), 100_000)
        assert np.mean(np.abs(h) ** 2) == pytest.approx(1.0, abs=0.02)
        assert abs(h.real.mean()) < 0.01 and abs(h.imag.mean()) < 0.01
        assert h.real.var() == pytest.approx(0.5, abs=0.01)

    def test_deterministic_gain_without_uncertainty(self):
        h = 0.6 + 0.8j
        assert sample_actual_gain(h, 0.9, 0.0, make_rng(3)) == pytest.approx(0.81, rel=1e-15)

    def test_rejects_excess_variance(self):
        with pytest.raises(ValueError):
            sample_actual_gain(1.0, 0.9, 0.9, make_rng(3))

    @pytest.mark.parametrize(
        "h_hat, mean_scale, sigma",
        [(0.0, 0.0, 1.0), (1.0, math.sqrt(0.75), 0.5), ((1 + 1j) / math.sqrt(2) * 1.5, 0.95, math.sqrt(1 - 0.95**2))],
    )
    def test_ks_against_cdf(self, h_hat, mean_scale, sigma):
        rng = make_rng(2024)
        g = sample_actual_gain(np.full(100_000, h_hat, dtype=complex), mean_scale, sigma, rng)
        cg = conditional_gain(h_hat, mean_scale, sigma)
        res = stats.kstest(g, lambda x: conditional_gain_cdf(cg, np.maximum(x, 0.0)))
        assert res.pvalue > 0.01

    @settings(max_examples=10, deadline=None, derandomize=True)
    @given(st.floats(0, 3), st.floats(0.05, 1))
    def test_mean_is_gain_plus_variance(self, mag, sigma):
        mean_scale = math.sqrt(1 - sigma**2)
        g = sample_actual_gain(np.full(100_000, mag + 0j), mean_scale, sigma, make_rng(11))
        expected = mean_scale**2 * mag**2 + sigma**2
        assert abs(g.mean() - expected) <= 3.5 * g.std(ddof=1) / math.sqrt(g.size)
