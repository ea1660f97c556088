from dataclasses import replace
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.base import clone

from soilradar.moisture import (
    LOW_SNR,
    NEGATIVE_DELTA,
    SATURATED,
    CalibrationCurve,
    MeasurementGeometry,
    MoistureEstimator,
    NegativeDelta,
    NoSurfaceEcho,
    delta_tof,
    estimate_vwc,
    expected_bin,
    fit_calibration,
    ka_from_delta_tof,
    surface_distance,
)
from soilradar.radar import PulseShape, RadarConfig, Reflector, synthesize_capture
from soilradar.scenario import Clutter, Scenario, run_scenario, simulate
from soilradar.soil import (
    C,
    POTTING_SOIL,
    SANDY_CLAY_LOAM,
    TOPP_COEFFICIENTS,
    Layer,
    SoilProfile,
    one_way_tof,
    profile_effective_ka,
    topp_vwc,
)
from soilradar.tag import TagConfig

QUIET = RadarConfig(noise_sigma=0.0)
NO_CLUTTER = Clutter(reflector_density=0.0, amplitude_scale=0.0)


def quiet_scenario(theta, **kwargs):
    kwargs.setdefault("clutter", NO_CLUTTER)
    return Scenario(radar=QUIET, profile=SoilProfile.uniform(theta), **kwargs)


class TestGeometry:
    def test_expected_bin(self):
        assert expected_bin(MeasurementGeometry(1.0, 0.30, 0.05)) == pytest.approx(26.0)
        assert expected_bin(MeasurementGeometry(1.0, 0.0, 0.05)) == pytest.approx(20.0)
        assert expected_bin(MeasurementGeometry(1.0, 0.30, 0.10)) == pytest.approx(13.0)

    def test_relative_to_range_start(self):
        assert expected_bin(MeasurementGeometry(1.0, 0.30, 0.05, range_start=0.5)) == pytest.approx(16.0)

    def test_invalid(self):
        with pytest.raises(ValueError):
            MeasurementGeometry(0.0, 0.3, 0.05)
        with pytest.raises(ValueError):
            MeasurementGeometry(0.4, 0.3, 0.05, range_start=0.5)


class TestDeltaTof:
    def test_values(self):
        assert delta_tof(46, 26, 0.05) == pytest.approx(1.0 / C, rel=1e-15)
        assert delta_tof(46, 26, 0.05) == pytest.approx(3.336e-9, rel=1e-4)
        assert delta_tof(26, 26, 0.05) == 0.0
        assert delta_tof(25, 26, 0.05) < 0


class TestKaFromDeltaTof:
    def test_modes(self):
        dtof = 1.0 / C
        assert ka_from_delta_tof(dtof, 0.30) == pytest.approx((1 + 1 / 0.3) ** 2, rel=1e-14)
        assert ka_from_delta_tof(dtof, 0.30) == pytest.approx(18.78, abs=5e-3)
        assert ka_from_delta_tof(dtof, 0.30, mode="paper") == pytest.approx(11.11, abs=5e-3)

    def test_zero_delay(self):
        assert ka_from_delta_tof(0.0, 0.3) == 1.0
        assert ka_from_delta_tof(0.0, 0.3, mode="paper") == 0.0

    def test_negative(self):
        tol = 0.05 / (2 * C)
        assert ka_from_delta_tof(-0.9 * tol, 0.3, tolerance=tol) == 1.0
        with pytest.raises(NegativeDelta):
            ka_from_delta_tof(-1.1 * tol, 0.3, tolerance=tol)

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            ka_from_delta_tof(1e-9, 0.3, mode="approx")

    @given(st.floats(1.0, 81.0), st.floats(0.05, 1.0))
    def test_round_trip(self, ka, d):
        dtof = one_way_tof(d, ka) - one_way_tof(d, 1.0)
        assert ka_from_delta_tof(dtof, d) == pytest.approx(ka, rel=1e-12)

    def test_geometry_sensitivity(self):
        # with b_T tracking d_s, the chain reduces to Ka = ((D - d_a) / d_s)**2
        d_air, d_soil, r = 1.0, 0.30, 0.05
        b_r = (d_air + d_soil * math.sqrt(16.0)) / r

        def ka(d):
            return ka_from_delta_tof(delta_tof(b_r, expected_bin(MeasurementGeometry(d_air, d, r)), r), d)

        h = 1e-6
        numeric = (ka(d_soil + h) - ka(d_soil - h)) / (2 * h)
        analytic = -2 * (b_r * r - d_air) ** 2 / d_soil**3
        assert numeric == pytest.approx(analytic, rel=1e-6)

    def test_paper_mode_converges_with_ka(self):
        ka = np.linspace(9, 25, 161)
        paper = (np.sqrt(ka) - 1) ** 2
        gap = np.abs(topp_vwc(ka) - topp_vwc(paper)) / topp_vwc(ka)
        assert np.all(np.diff(gap) < 0)


class TestCalibration:
    def test_topp_identity(self):
        ka = np.linspace(3, 40, 25)
        curve = fit_calibration(list(zip(ka, topp_vwc(ka))))
        np.testing.assert_allclose(curve.coef_, TOPP_COEFFICIENTS, rtol=1e-9)
        assert curve.fit_rmse_ < 1e-12
        assert curve.n_points_ == 25
        assert curve.ka_range_ == (3.0, 40.0)

    def test_noisy_fit(self):
        ka = np.linspace(3, 40, 30)
        rng = np.random.default_rng(0)
        rmse = [fit_calibration(list(zip(ka, topp_vwc(ka) + rng.normal(0, 0.005, ka.size)))).fit_rmse_
                for _ in range(100)]
        assert np.median(rmse) <= 0.01

    def test_insufficient_points(self):
        with pytest.raises(ValueError, match="insufficient points"):
            fit_calibration([(4, 0.05), (10, 0.2), (20, 0.34)])

    def test_rank_deficient(self):
        with pytest.raises(ValueError, match="rank"):
            fit_calibration([(4, 0.05), (4, 0.06), (10, 0.2), (10, 0.21)])

    def test_prediction_is_clamped(self):
        curve = CalibrationCurve.topp()
        assert curve.theta(1.0) == 0.0
        assert curve.predict([80.0])[0] <= 1.0
        assert curve.is_saturated(41.0) and not curve.is_saturated(39.0)

    def test_dict_round_trip(self):
        ka = np.linspace(3, 30, 10)
        curve = fit_calibration(list(zip(ka, 0.9 * topp_vwc(ka))))
        back = CalibrationCurve.from_dict(curve.to_dict())
        np.testing.assert_array_equal(back.coef_, curve.coef_)
        assert back.ka_range_ == curve.ka_range_
        with pytest.raises(ValueError):
            CalibrationCurve.from_dict({"coefficients": [1, 2, 3]})


class TestSurfaceDistance:
    def setup_method(self):
        self.cfg = RadarConfig(noise_sigma=0.01)
        self.pulse = PulseShape.for_config(self.cfg)

    def test_single_echo(self):
        cap = synthesize_capture(self.cfg, self.pulse, [Reflector(1.0, 0.3)], 2.0, seed=1)
        assert surface_distance(cap) == pytest.approx(1.0, abs=self.cfg.range_res / 10)

    def test_first_echo_wins(self):
        scene = [Reflector(0.5, 0.3), Reflector(1.4, 2.0)]
        cap = synthesize_capture(self.cfg, self.pulse, scene, 2.0, seed=1)
        assert surface_distance(cap) == pytest.approx(0.5, abs=self.cfg.range_res / 10)

    def test_empty_scene(self):
        cap = synthesize_capture(self.cfg, self.pulse, [], 2.0, seed=1)
        with pytest.raises(NoSurfaceEcho, match="no surface echo"):
            surface_distance(cap)

    def test_noiseless_empty_scene(self):
        cap = synthesize_capture(QUIET, PulseShape.for_config(QUIET), [], 1.0)
        with pytest.raises(NoSurfaceEcho):
            surface_distance(cap)


class TestEstimateVwc:
    def test_noiseless_round_trip(self):
        est = run_scenario(quiet_scenario(0.20))
        assert est.theta == pytest.approx(0.20, abs=0.01)
        assert est.flags == frozenset()
        assert est.expected_bin == pytest.approx(1.3 / QUIET.range_res)

    def test_dry_soil(self):
        est = run_scenario(quiet_scenario(0.0))
        assert est.theta == pytest.approx(0.0, abs=0.01)
        assert est.ka == pytest.approx(1.0, abs=0.05)

    def test_tag_absent(self):
        scenario = quiet_scenario(0.2, tag=TagConfig(base_rcs_amplitude=0.0))
        est = run_scenario(replace(scenario, radar=RadarConfig()))
        assert est.flags == frozenset({LOW_SNR})
        assert est.theta is None and est.ka is None
        assert not est.detected
        assert run_scenario(scenario).flags == frozenset({LOW_SNR})

    def test_paper_mode_reads_drier(self):
        scenario = quiet_scenario(0.25)
        exact = run_scenario(scenario)
        paper = run_scenario(scenario, mode="paper")
        assert paper.theta < exact.theta
        assert paper.mode == "paper"

    def test_saturated_flag(self):
        profile = SoilProfile.uniform(0.55, texture=POTTING_SOIL)
        scenario = replace(quiet_scenario(0.2), profile=profile)
        est = run_scenario(scenario)
        assert SATURATED in est.flags
        assert est.ka > 40

    def test_negative_delta_flag(self):
        scenario = quiet_scenario(0.0)
        cap = simulate(scenario)
        geom = MeasurementGeometry.for_radar(QUIET, 1.0 + 0.2 * QUIET.range_res, 0.30)
        est = estimate_vwc(cap, 80.0, geom)
        assert NEGATIVE_DELTA in est.flags
        assert est.ka == 1.0 and est.theta == 0.0
        geom = MeasurementGeometry.for_radar(QUIET, 1.0 + QUIET.range_res, 0.30)
        with pytest.raises(NegativeDelta):
            estimate_vwc(cap, 80.0, geom)

    def test_monotone_in_theta(self):
        thetas = np.arange(0.05, 0.401, 0.05)
        est = [run_scenario(replace(quiet_scenario(t), duration=2.0)).theta for t in thetas]
        assert np.all(np.diff(est) >= 0)

    def test_two_layer_average(self):
        profile = SoilProfile((Layer(0.15, 0.10, SANDY_CLAY_LOAM), Layer(0.35, 0.35, SANDY_CLAY_LOAM)))
        scenario = replace(quiet_scenario(0.2), profile=profile)
        est = run_scenario(scenario)
        target = topp_vwc(profile_effective_ka(profile, 0.30))
        assert est.theta == pytest.approx(target, abs=0.005)
        assert abs(est.theta - 0.10) > 0.05 and abs(est.theta - 0.35) > 0.05

    def test_record(self):
        record = run_scenario(quiet_scenario(0.2)).to_record()
        assert set(record) == {"theta", "ka", "delta_tof_ns", "snr_db", "expected_bin",
                               "measured_bin", "flags", "mode"}
        assert record["flags"] == []


class TestMoistureEstimator:
    def test_params(self):
        est = MoistureEstimator(d_soil=0.4, osc_freq=70.0)
        params = est.get_params()
        assert params["d_soil"] == 0.4 and params["osc_freq"] == 70.0
        assert clone(est).get_params() == params

    def test_predict_with_topp(self):
        caps = [simulate(replace(quiet_scenario(t), duration=2.0)) for t in (0.1, 0.3)]
        pred = MoistureEstimator(d_air=1.0).fit(caps).predict(caps)
        np.testing.assert_allclose(pred, [0.1, 0.3], atol=0.01)

    def test_measured_surface(self):
        cap = simulate(replace(quiet_scenario(0.2, clutter=Clutter()), duration=2.0,
                               radar=RadarConfig()))
        pred = MoistureEstimator().fit([cap]).predict([cap])
        assert pred[0] == pytest.approx(0.2, abs=0.02)

    def test_gravimetric_fit(self):
        thetas = [0.05, 0.12, 0.2, 0.28, 0.36]
        caps = [simulate(replace(quiet_scenario(t), duration=2.0)) for t in thetas]
        est = MoistureEstimator(d_air=1.0).fit(caps, thetas)
        assert est.curve_.n_points_ == 5
        np.testing.assert_allclose(est.predict(caps), thetas, atol=0.01)
        assert est.score(caps, thetas) > 0.98

    def test_undetected_is_nan(self):
        cap = simulate(replace(quiet_scenario(0.2, tag=TagConfig(base_rcs_amplitude=0.0)),
                               radar=RadarConfig(), duration=1.0))
        assert np.isnan(MoistureEstimator(d_air=1.0).fit([cap]).predict([cap])[0])

    def test_fit_length_mismatch(self):
        with pytest.raises(ValueError):
            MoistureEstimator(d_air=1.0).fit([None, None], [0.1])
