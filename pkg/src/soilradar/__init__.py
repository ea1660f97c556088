"""Soil moisture from UWB radar captures of buried backscatter tags."""

from .dsp import (
    DetectionResult,
    RangeDopplerImage,
    RangeDopplerTransform,
    detect_tag,
    doppler_bin_for_freq,
    extract_tag_vector,
    range_doppler,
)
from .moisture import (
    CalibrationCurve,
    MeasurementGeometry,
    MoistureEstimate,
    MoistureEstimator,
    delta_tof,
    estimate_vwc,
    expected_bin,
    fit_calibration,
    ka_from_delta_tof,
    surface_distance,
)
from .radar import (
    FrameCapture,
    LinearVelocity,
    OnOffSquare,
    PulseShape,
    RadarConfig,
    Reflector,
    Static,
    bin_of_distance,
    distance_of_bin,
    synthesize_capture,
    synthesize_frame,
)
from .soil import (
    DielectricState,
    Layer,
    SoilProfile,
    SoilTexture,
    apparent_dielectric,
    attenuation_constant,
    one_way_tof,
    profile_effective_ka,
    topp_vwc,
    vwc_to_ka,
    wave_velocity,
)
from .tag import Battery, PowerProfile, TagConfig, battery_life, tag_as_reflector, wake_link_margin

__version__ = "0.1.0"
