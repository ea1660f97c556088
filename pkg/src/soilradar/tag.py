"""Buried backscatter tags: scene representation and power budgeting."""

from dataclasses import dataclass
import math

from ._validation import (
    check_finite,
    check_fraction,
    check_nonnegative,
    check_positive,
)
from .radar import OnOffSquare, Reflector
from .soil import path_attenuation, profile_effective_ka

HOURS_PER_YEAR = 8760.0


@dataclass(frozen=True)
class TagConfig:
    """An on-off keyed tag buried ``depth`` metres below the surface.

    ``mode`` is ``"semi_passive"`` or ``"active"``; an active tag amplifies
    its reflection by ``gain_db``.
    """

    mode: str = "semi_passive"
    gain_db: float = 12.0
    osc_freq: float = 80.0
    duty: float = 0.5
    depth: float = 0.30
    base_rcs_amplitude: float = 0.5
    phase: float = 0.0

    def __post_init__(self):
        if self.mode not in ("semi_passive", "active"):
            raise ValueError(f"unknown tag mode {self.mode!r}")
        check_nonnegative(self.gain_db, "gain_db")
        check_positive(self.osc_freq, "osc_freq")
        check_fraction(self.duty, "duty")
        check_positive(self.depth, "depth")
        check_nonnegative(self.base_rcs_amplitude, "base_rcs_amplitude")
        check_finite(self.phase, "phase")

    @property
    def linear_gain(self):
        return 10 ** (self.gain_db / 20) if self.mode == "active" else 1.0

    def check_radar(self, radar):
        if not self.osc_freq < radar.frame_rate / 2:
            raise ValueError(
                f"osc_freq {self.osc_freq} Hz must be below Nyquist "
                f"({radar.frame_rate / 2} Hz at {radar.frame_rate} fps)"
            )


def tag_as_reflector(tag, profile, d_air, radar):
    """The tag as the radar sees it through the soil above it."""
    d_air = check_nonnegative(d_air, "d_air")
    tag.check_radar(radar)
    ka_eff = profile_effective_ka(profile, tag.depth)
    alpha_path = path_attenuation(profile, tag.depth, radar.fc)
    amplitude = tag.base_rcs_amplitude * math.exp(-2 * alpha_path) * tag.linear_gain
    return Reflector(
        distance=d_air + tag.depth * math.sqrt(ka_eff),
        amplitude=amplitude,
        modulation=OnOffSquare(tag.osc_freq, tag.duty, tag.phase),
    )


@dataclass(frozen=True)
class Component:
    """A power draw in mW, on for ``duty`` of the time and at ``idle_mw`` otherwise."""

    name: str
    active_mw: float
    idle_mw: float = 0.0
    duty: float = 1.0

    def __post_init__(self):
        check_nonnegative(self.active_mw, "active_mw")
        check_nonnegative(self.idle_mw, "idle_mw")
        check_fraction(self.duty, "duty", open_interval=False)

    @property
    def average_mw(self):
        return self.duty * self.active_mw + (1 - self.duty) * self.idle_mw


# Always-on draws of the prototype parts, mW.
OSCILLATOR_MW = 0.0027
RF_SWITCH_MW = 0.063
POWER_MGMT_MW = 0.051
RF_DETECTOR_MW, RF_DETECTOR_SHUTDOWN_MW = 87.0, 0.003
AMPLIFIER_MW = 267.0
MCU_MW, MCU_SLEEP_MW = 0.378, 0.0022


@dataclass(frozen=True)
class PowerProfile:
    components: tuple

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))

    @property
    def average_mw(self):
        return sum(c.average_mw for c in self.components)

    @classmethod
    def semi_passive(cls):
        return cls((
            Component("oscillator", OSCILLATOR_MW),
            Component("rf_switch", RF_SWITCH_MW),
            Component("power_mgmt", POWER_MGMT_MW),
        ))

    @classmethod
    def active(cls):
        return cls(cls.semi_passive().components + (
            Component("rf_detector", RF_DETECTOR_MW, RF_DETECTOR_SHUTDOWN_MW),
            Component("amplifier", AMPLIFIER_MW),
            Component("mcu", MCU_MW, MCU_SLEEP_MW),
        ))

    @classmethod
    def active_duty_cycled(cls, wake_minutes_per_day=6.0, poll_on_s=0.010, poll_period_s=1.0):
        """Active tag that wakes its amplifier and MCU ``wake_minutes_per_day``.

        The RF detector polls for a wake signal for ``poll_on_s`` every
        ``poll_period_s`` and sits in shutdown otherwise. Oscillator, switch
        and regulator stay on.
        """
        wake = check_nonnegative(wake_minutes_per_day, "wake_minutes_per_day") / 1440.0
        poll = check_nonnegative(poll_on_s, "poll_on_s") / check_positive(poll_period_s, "poll_period_s")
        return cls(cls.semi_passive().components + (
            Component("rf_detector", RF_DETECTOR_MW, RF_DETECTOR_SHUTDOWN_MW, duty=poll),
            Component("amplifier", AMPLIFIER_MW, duty=wake),
            Component("mcu", MCU_MW, MCU_SLEEP_MW, duty=wake),
        ))


@dataclass(frozen=True)
class Battery:
    cell_count: int = 4
    capacity_mah: float = 2500.0
    nominal_v: float = 1.5

    def __post_init__(self):
        if int(self.cell_count) < 1:
            raise ValueError("cell_count must be positive")
        check_positive(self.capacity_mah, "capacity_mah")
        check_positive(self.nominal_v, "nominal_v")

    @property
    def energy_mwh(self):
        return self.cell_count * self.capacity_mah * self.nominal_v


def battery_life(profile, battery=Battery()):
    """Years of operation at the profile's average draw; no derating."""
    draw = profile.average_mw
    if not draw > 0:
        raise ValueError(f"average draw must be positive, got {draw} mW")
    return battery.energy_mwh / draw / HOURS_PER_YEAR


def wake_link_margin(tx_dbm, soil_loss_db, detector_sensitivity_dbm):
    """Received wake power above detector sensitivity, in dB."""
    return float(tx_dbm) - float(soil_loss_db) - float(detector_sensitivity_dbm)
