import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from conftest import naive_cfar_mask
from sarclutter import cfar, ingest, models
from sarclutter.cfar import BorderPolicy, CfarConfig, StatsMode
from sarclutter.errors import BorderError, ConfigError, DomainError, UnsupportedModelError
from sarclutter.models import GammaParams, LogNormalParams, RayleighParams, WeibullParams


class TestThresholds:
    def test_weibull_log_collapses(self):
        assert cfar.threshold_weibull(WeibullParams(1, 1), math.exp(-1)) == pytest.approx(1.0, abs=1e-12)

    def test_weibull_values(self):
        assert cfar.threshold_weibull(WeibullParams(1, 1), 1e-6) == pytest.approx(13.815511, abs=1e-6)
        assert cfar.threshold_weibull(WeibullParams(2, 1), 1e-6) == pytest.approx(3.716922, abs=1e-6)

    def test_rayleigh_values(self):
        assert cfar.threshold_rayleigh(RayleighParams(1), math.exp(-0.5)) == pytest.approx(1.0, abs=1e-12)
        assert cfar.threshold_rayleigh(RayleighParams(1), 1e-6) == pytest.approx(5.256521, abs=1e-6)
        assert cfar.threshold_rayleigh(RayleighParams(2), 1e-6) == pytest.approx(10.513043, abs=1e-6)

    @pytest.mark.parametrize("pfa", [0.0, 1.0, -0.1, 2.0])
    def test_bad_pfa(self, pfa):
        with pytest.raises(DomainError):
            cfar.threshold_rayleigh(RayleighParams(1), pfa)
        with pytest.raises(DomainError):
            cfar.threshold_weibull(WeibullParams(1, 1), pfa)

    def test_thresholds_hit_design_pfa(self):
        # oracle: survival function at the threshold equals pfa
        for m in (WeibullParams(1.7, 35), RayleighParams(20)):
            for pfa in (1e-2, 1e-6):
                assert models.sf(m, cfar.adaptive_threshold(m, pfa)) == pytest.approx(pfa, rel=1e-9)

    def test_unsupported(self):
        for m in (GammaParams(2, 3), LogNormalParams(0.3, 1)):
            with pytest.raises(UnsupportedModelError):
                cfar.adaptive_threshold(m, 1e-6)

    def test_matched_parameters(self):
        rng = np.random.default_rng(7)
        for sigma, log_pfa in zip(rng.uniform(0.1, 100, 100), rng.uniform(-14, -0.01, 100)):
            pfa = 10**log_pfa
            w = cfar.threshold_weibull(WeibullParams(2, sigma * math.sqrt(2)), pfa)
            r = cfar.threshold_rayleigh(RayleighParams(sigma), pfa)
            assert abs(w - r) <= 1e-12 * max(1.0, r)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(0.2, 10), st.floats(0.1, 100), st.floats(1e-9, 0.5), st.floats(1.01, 1.9))
    def test_monotonicity(self, alpha, scale, pfa, factor):
        w = WeibullParams(alpha, scale)
        r = RayleighParams(scale)
        assert cfar.threshold_weibull(w, pfa * factor) < cfar.threshold_weibull(w, pfa)
        assert cfar.threshold_rayleigh(r, pfa * factor) < cfar.threshold_rayleigh(r, pfa)
        assert cfar.threshold_weibull(WeibullParams(alpha, scale * factor), pfa) > cfar.threshold_weibull(w, pfa)
        assert cfar.threshold_rayleigh(RayleighParams(scale * factor), pfa) > cfar.threshold_rayleigh(r, pfa)


class TestDesignQ:
    def test_unit(self):
        assert cfar.design_q(2.0, WeibullParams(1, 2)) == pytest.approx(1.0, abs=1e-12)

    def test_rayleigh_composition(self):
        m = RayleighParams(1)
        assert cfar.design_q(cfar.threshold_rayleigh(m, 1e-6), m) == pytest.approx(4.194098, abs=1e-6)

    def test_override(self):
        cfg = CfarConfig(q_override=2.5)
        assert cfar.resolve_q(cfg, 100.0, RayleighParams(1)) == 2.5


class TestConfig:
    def test_defaults(self):
        cfg = CfarConfig()
        assert (cfg.train_per_wing, cfg.guard_per_wing, cfg.pfa) == (15, 5, 1e-6)
        assert cfg.window_size == 41
        assert cfg.ring_size == 1560

    @pytest.mark.parametrize(
        "kwargs",
        [dict(pfa=0), dict(pfa=1), dict(train_per_wing=0), dict(guard_per_wing=-1), dict(q_override=-1.0)],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            CfarConfig(**kwargs)

    def test_window_must_fit(self):
        with pytest.raises(ConfigError):
            cfar.detect(np.ones((30, 60)), RayleighParams(1), CfarConfig())


class TestLocalStats:
    def test_constant(self):
        s = cfar.local_stats(np.full((9, 9), 4.0), 4, 4, CfarConfig(train_per_wing=2, guard_per_wing=1))
        assert s.mu_c == 4.0 and s.sigma_c == 0.0

    def test_ring_of_eight(self):
        img = np.zeros((5, 5))
        ring = [(1, 1), (1, 2), (1, 3), (2, 3), (3, 3), (3, 2), (3, 1), (2, 1)]
        for v, (r, c) in zip([5, 2, 8, 1, 7, 3, 6, 4], ring):
            img[r, c] = v
        img[2, 2] = 1000.0
        s = cfar.local_stats(img, 2, 2, CfarConfig(train_per_wing=1, guard_per_wing=0))
        assert s.mu_c == pytest.approx(4.5, abs=1e-12)
        assert s.sigma_c == pytest.approx(np.std(np.arange(1, 9)), abs=1e-12)

    def test_ring_size_default_geometry(self):
        cfg = CfarConfig()
        h, g = 20, 5
        count = sum(1 for dr in range(-h, h + 1) for dc in range(-h, h + 1) if max(abs(dr), abs(dc)) > g)
        assert count == cfg.ring_size == 1560
        # a cell with a full window sees exactly the ring: mark ring cells by value
        img = np.zeros((61, 61))
        img[10:51, 10:51] = 1.0
        img[25:36, 25:36] = 0.0
        s = cfar.local_stats(img, 30, 30, cfg)
        assert s.mu_c == 1.0 and s.sigma_c == 0.0

    def test_strict_border(self):
        cfg = CfarConfig(train_per_wing=2, guard_per_wing=1, border="strict")
        with pytest.raises(BorderError):
            cfar.local_stats(np.ones((10, 10)), 0, 5, cfg)

    def test_shrink_matches_windowed(self, rng):
        img = rng.random((20, 23))
        cfg = CfarConfig(train_per_wing=3, guard_per_wing=1)
        maps = cfar.windowed_stats(img, cfg)
        for r, c in [(0, 0), (2, 22), (10, 10), (19, 5)]:
            s = cfar.local_stats(img, r, c, cfg)
            assert maps.mu_c[r, c] == pytest.approx(s.mu_c, rel=1e-12)
            assert maps.sigma_c[r, c] == pytest.approx(s.sigma_c, rel=1e-9)


class TestDetect:
    def test_constant_image(self):
        result = cfar.detect(np.full((45, 45), 17.0), RayleighParams(5), CfarConfig())
        assert not result.mask.any()

    def test_injected_target(self):
        sigma = 20.0
        spec = ingest.SceneSpec(101, 101, RayleighParams(sigma), [(50, 50, 12 * sigma)], seed=0)
        image = ingest.synth_scene(spec)
        model = RayleighParams(sigma)
        result = cfar.detect(image, model, CfarConfig())
        assert result.mask[50, 50]
        ref, _ = naive_cfar_mask(image.pixels, result.q, 15, 5)
        np.testing.assert_array_equal(result.mask, ref)
        # false alarms bounded by the operating rate of mu + sigma * Q
        mean = models.model_mean(model)
        std = sigma * math.sqrt(2 - math.pi / 2)
        p_op = models.sf(model, mean + std * result.q)
        false_alarms = int(result.mask.sum()) - 1
        assert false_alarms <= stats.binom.ppf(0.999, image.pixels.size, p_op)

    @pytest.mark.parametrize("border", ["shrink", "skip"])
    def test_matches_reference(self, rng, border):
        for _ in range(3):
            img = rng.gamma(2.0, 3.0, size=(40, 37))
            cfg = CfarConfig(train_per_wing=4, guard_per_wing=2, border=border)
            result = cfar.detect(img, WeibullParams(1.4, 6.0), cfg)
            ref, skipped = naive_cfar_mask(img, result.q, 4, 2, border)
            np.testing.assert_array_equal(result.mask, ref)
            if border == "skip":
                np.testing.assert_array_equal(result.skipped, skipped)

    def test_strict_rejects_border_cells(self, rng):
        with pytest.raises(BorderError):
            cfar.detect(rng.random((30, 30)), RayleighParams(1), CfarConfig(train_per_wing=2, border="strict"))

    def test_mask_is_threshold_comparison(self, rng):
        img = rng.rayleigh(3.0, size=(50, 50))
        for mode in ("windowed", "global", "model-threshold"):
            for border in ("shrink", "skip"):
                r = cfar.detect(img, RayleighParams(3.0), CfarConfig(4, 1, 1e-2, stats_mode=mode, border=border))
                np.testing.assert_array_equal(r.mask, img > r.threshold_map)
                assert r.mask.shape == img.shape

    def test_global_region(self, rng):
        img = rng.rayleigh(3.0, size=(40, 40))
        img[:10, :10] += 50
        cfg = CfarConfig(stats_mode="global", clutter_rect=(10, 10, 40, 40), q_override=3.0)
        r = cfar.detect(img, RayleighParams(3.0), cfg)
        region = img[10:40, 10:40]
        assert r.stats.mu_c == pytest.approx(region.mean(), rel=1e-12)
        assert r.stats.sigma_c == pytest.approx(region.std(), rel=1e-12)
        assert r.q == 3.0
        np.testing.assert_array_equal(r.mask, img > region.mean() + 3.0 * region.std())

    def test_global_rect_out_of_bounds(self):
        cfg = CfarConfig(stats_mode="global", clutter_rect=(0, 0, 50, 10))
        with pytest.raises(DomainError):
            cfar.detect(np.ones((20, 20)), RayleighParams(1), cfg)

    def test_unsupported_model(self):
        with pytest.raises(UnsupportedModelError):
            cfar.detect(np.ones((50, 50)), GammaParams(2, 3), CfarConfig())

    @pytest.mark.parametrize("c", [2.0, 0.25, 3.7])
    def test_scale_equivariance(self, rng, c):
        img = rng.weibull(1.5, size=(48, 48)) * 10
        img[20, 20] = 120
        model = WeibullParams(1.5, 10.0)
        cfg = CfarConfig(train_per_wing=6, guard_per_wing=2, pfa=1e-3)
        base = cfar.detect(img, model, cfg)
        scaled = cfar.detect(img * c, WeibullParams(1.5, 10.0 * c), cfg)
        assert scaled.q == pytest.approx(base.q, rel=1e-12)
        assert scaled.t_a == pytest.approx(c * base.t_a, rel=1e-12)
        np.testing.assert_array_equal(scaled.mask, base.mask)
        for mode in ("global", "model-threshold"):
            cfg_m = CfarConfig(pfa=1e-3, stats_mode=mode)
            np.testing.assert_array_equal(
                cfar.detect(img * c, WeibullParams(1.5, 10.0 * c), cfg_m).mask,
                cfar.detect(img, model, cfg_m).mask,
            )

    def test_deterministic(self, rng):
        img = rng.rayleigh(2.0, size=(45, 45))
        a = cfar.detect(img, RayleighParams(2.0), CfarConfig())
        b = cfar.detect(img.copy(), RayleighParams(2.0), CfarConfig())
        np.testing.assert_array_equal(a.mask, b.mask)
        np.testing.assert_array_equal(a.threshold_map, b.threshold_map)

    def test_model_threshold_false_alarm_rate(self):
        image = models.sample(RayleighParams(20), 10**6, seed=51).reshape(1000, 1000)
        r = cfar.detect(image, RayleighParams(20), CfarConfig(pfa=1e-3, stats_mode=StatsMode.MODEL_THRESHOLD))
        assert 0.5e-3 <= r.mask.mean() <= 2e-3

    def test_sidecar(self, rng):
        img = rng.rayleigh(2.0, size=(45, 45))
        for mode, border in (("windowed", "skip"), ("global", "shrink")):
            r = cfar.detect(img, RayleighParams(2.0), CfarConfig(stats_mode=mode, border=border))
            doc = json.loads(json.dumps(r.to_dict()))
            assert doc["detections"] == int(r.mask.sum())
            assert doc["config"]["stats_mode"] == mode
            assert doc["t_a"] == r.t_a and doc["q"] == r.q
            assert doc["mu_c"] is not None and math.isfinite(doc["mu_c"])
        assert r.border_policy is BorderPolicy.SHRINK
