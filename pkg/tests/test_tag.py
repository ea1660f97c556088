import pytest
from hypothesis import given
from hypothesis import strategies as st

from soilradar.radar import OnOffSquare, RadarConfig
from soilradar.soil import SoilProfile, SoilTexture, topp_vwc
from soilradar.tag import (
    Battery,
    Component,
    PowerProfile,
    TagConfig,
    battery_life,
    tag_as_reflector,
    wake_link_margin,
)

RADAR = RadarConfig()
LOSSLESS = SoilTexture("custom", theta_sat=0.9, ec_sat=0.0)


class TestTagAsReflector:
    def test_dry_soil(self):
        refl = tag_as_reflector(TagConfig(), SoilProfile.uniform(0.0, 1.0, LOSSLESS), 1.0, RADAR)
        assert refl.distance == pytest.approx(1.30, abs=1e-12)
        assert refl.amplitude == 0.5
        assert refl.modulation == OnOffSquare(80.0, 0.5)

    def test_ka_nine(self):
        profile = SoilProfile.uniform(topp_vwc(9.0), 1.0, LOSSLESS)
        refl = tag_as_reflector(TagConfig(), profile, 1.0, RADAR)
        assert refl.distance == pytest.approx(1.90, rel=1e-9)
        assert refl.amplitude == pytest.approx(0.5)

    def test_active_gain(self):
        profile = SoilProfile.uniform(0.2)
        passive = tag_as_reflector(TagConfig(), profile, 1.0, RADAR)
        active = tag_as_reflector(TagConfig(mode="active"), profile, 1.0, RADAR)
        assert active.amplitude / passive.amplitude == pytest.approx(3.981, abs=1e-3)
        assert active.distance == passive.distance

    def test_depth_beyond_profile(self):
        with pytest.raises(ValueError):
            tag_as_reflector(TagConfig(depth=0.5), SoilProfile.uniform(0.2, 0.4), 1.0, RADAR)

    def test_osc_freq_above_nyquist(self):
        with pytest.raises(ValueError, match="Nyquist"):
            tag_as_reflector(TagConfig(osc_freq=120.0), SoilProfile.uniform(0.2), 1.0, RADAR)

    @pytest.mark.parametrize("kwargs", [
        {"mode": "passive"}, {"depth": 0.0}, {"gain_db": -1.0}, {"duty": 1.0}, {"osc_freq": 0.0},
    ])
    def test_invalid_config(self, kwargs):
        with pytest.raises(ValueError):
            TagConfig(**kwargs)

    @given(st.floats(0.0, 0.38), st.floats(0.005, 0.01))
    def test_distance_increases_with_moisture(self, theta, step):
        profile = SoilProfile.uniform
        near = tag_as_reflector(TagConfig(), profile(theta), 1.0, RADAR).distance
        far = tag_as_reflector(TagConfig(), profile(theta + step), 1.0, RADAR).distance
        assert far > near

    @given(st.floats(0.05, 0.7), st.floats(0.01, 0.2))
    def test_amplitude_falls_with_depth(self, depth, step):
        lossy = SoilProfile.uniform(0.25)
        a = tag_as_reflector(TagConfig(depth=depth), lossy, 1.0, RADAR).amplitude.real
        b = tag_as_reflector(TagConfig(depth=depth + step), lossy, 1.0, RADAR).amplitude.real
        assert b < a
        clear = SoilProfile.uniform(0.25, 1.0, LOSSLESS)
        a = tag_as_reflector(TagConfig(depth=depth), clear, 1.0, RADAR).amplitude.real
        b = tag_as_reflector(TagConfig(depth=depth + step), clear, 1.0, RADAR).amplitude.real
        assert a == b


class TestBattery:
    def test_energy(self):
        assert Battery().energy_mwh == 15000.0

    def test_semi_passive(self):
        profile = PowerProfile.semi_passive()
        assert profile.average_mw == pytest.approx(0.1167)
        assert battery_life(profile) == pytest.approx(15.02, rel=0.05)

    def test_active_always_on(self):
        profile = PowerProfile.active()
        assert profile.average_mw == pytest.approx(354.495, abs=1e-3)
        assert battery_life(profile) * 8760 == pytest.approx(42.3, abs=0.1)

    def test_duty_cycled_draw(self):
        profile = PowerProfile.active_duty_cycled()
        wake = 6 / 1440
        expected = (0.1167 + 87 * 0.01 + 0.003 * 0.99 + 267 * wake
                    + 0.378 * wake + 0.0022 * (1 - wake))
        assert profile.average_mw == pytest.approx(expected, rel=1e-12)

    def test_zero_draw(self):
        with pytest.raises(ValueError):
            battery_life(PowerProfile((Component("off", 0.0),)))

    def test_bad_battery(self):
        with pytest.raises(ValueError):
            Battery(cell_count=0)
        with pytest.raises(ValueError):
            Component("x", 1.0, duty=1.5)

    @given(st.floats(1e-3, 1e3))
    def test_inverse_in_draw(self, mw):
        one = battery_life(PowerProfile((Component("a", mw),)))
        half = battery_life(PowerProfile((Component("a", mw / 2),)))
        assert half == pytest.approx(2 * one, rel=1e-14)


class TestWakeLinkMargin:
    def test_values(self):
        assert wake_link_margin(36, 85, -75) == 26
        assert wake_link_margin(30, 90, -55) == -5

    @given(st.floats(0, 120), st.floats(-100, 0))
    def test_zero_at_threshold(self, loss, sens):
        assert wake_link_margin(loss + sens, loss, sens) == pytest.approx(0.0, abs=1e-12)
