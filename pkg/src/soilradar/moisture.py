"""From a radar capture to volumetric water content.

Positions along the range axis are measured in *bin units*: a distance
``d`` sits at ``(d - range_start) / range_res``. Range bin ``n`` spans
``[n, n + 1)`` in these units and is sampled at its centre ``n + 0.5``,
so a detector peak at sample index ``x`` is at position ``x + 0.5``.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, check_X_y, column_or_1d

from ._validation import check_finite, check_nonnegative, check_positive
from .dsp import detect_tag, parabolic_peak, range_doppler
from .soil import C, KA_BRANCH, TOPP_COEFFICIENTS, TOPP_FIT_MAX_KA, cubic_vwc

LOW_SNR = "LowSnr"
NEGATIVE_DELTA = "NegativeDelta"
SATURATED = "Saturated"

KA_MODES = ("exact", "paper")


class NegativeDelta(ValueError):
    """Tag appears closer than the air-equivalent position by more than half a bin."""


class NoSurfaceEcho(ValueError):
    pass


@dataclass(frozen=True)
class MeasurementGeometry:
    d_air: float
    d_soil: float
    range_res: float
    range_start: float = 0.0

    def __post_init__(self):
        check_positive(self.d_air, "d_air")
        check_nonnegative(self.d_soil, "d_soil")
        check_positive(self.range_res, "range_res")
        check_nonnegative(self.range_start, "range_start")
        if self.d_air < self.range_start:
            raise ValueError(f"d_air={self.d_air} m lies before range_start={self.range_start} m")

    @classmethod
    def for_radar(cls, radar, d_air, d_soil):
        return cls(d_air, d_soil, radar.range_res, radar.range_start)


def expected_bin(geom):
    """Bin position of the tag if the soil above it were air."""
    return (geom.d_air + geom.d_soil - geom.range_start) / geom.range_res


def delta_tof(b_r, b_t, range_res):
    """Extra one-way travel time caused by the soil, in seconds."""
    return (float(b_r) - float(b_t)) * float(range_res) / C


def ka_from_delta_tof(dtof, d_soil, mode="exact", tolerance=0.0):
    """Apparent dielectric constant of the soil column from its excess delay.

    ``"exact"`` inverts ``dtof = d*(sqrt(Ka) - 1)/c``; ``"paper"`` is the
    short-hand ``Ka = (c*dtof/d)**2``, which gives 0 for dry soil. Delays
    down to ``-tolerance`` seconds are treated as zero; anything more
    negative raises :class:`NegativeDelta`.
    """
    dtof = check_finite(dtof, "delta_tof")
    d_soil = check_positive(d_soil, "d_soil")
    if mode not in KA_MODES:
        raise ValueError(f"mode must be one of {KA_MODES}, got {mode!r}")
    if dtof < 0:
        if dtof < -abs(tolerance):
            raise NegativeDelta(
                f"delta_tof={dtof * 1e9:.4f} ns is below -{abs(tolerance) * 1e9:.4f} ns; "
                "check d_air / d_soil"
            )
        dtof = 0.0
    ratio = C * dtof / d_soil
    return (1 + ratio) ** 2 if mode == "exact" else ratio**2


class CalibrationCurve(RegressorMixin, BaseEstimator):
    """Least-squares cubic mapping Ka to water content.

    Fitted attributes: ``coef_`` (constant term first), ``fit_rmse_``,
    ``n_points_`` and ``ka_range_`` (the Ka span of the fitting data,
    beyond which estimates are flagged as saturated).
    """

    def fit(self, X, y):
        ka, theta = check_X_y(X, y, ensure_2d=False, ensure_min_samples=1, y_numeric=True)
        ka = column_or_1d(ka)
        if len(ka) < 4:
            raise ValueError(f"insufficient points for a cubic fit: {len(ka)} < 4")
        if np.any(ka < 1):
            raise ValueError("Ka values must be >= 1")
        scale = float(np.max(np.abs(ka)))
        vander = np.vander(ka / scale, 4, increasing=True)
        sol, _, rank, _ = np.linalg.lstsq(vander, theta, rcond=None)
        if rank < 4:
            raise ValueError(f"rank-deficient calibration data (rank {rank}); need 4 distinct Ka values")
        self.coef_ = sol / scale ** np.arange(4)
        resid = np.polynomial.polynomial.polyval(ka, self.coef_) - theta
        self.fit_rmse_ = float(np.sqrt(np.mean(resid**2)))
        self.n_points_ = int(len(ka))
        self.ka_range_ = (float(ka.min()), float(ka.max()))
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        ka = column_or_1d(np.atleast_1d(np.asarray(X, dtype=float)))
        return cubic_vwc(np.maximum(ka, 1.0), self.coef_)

    def theta(self, ka):
        """Scalar prediction, clamped to [0, 1]."""
        return float(self.predict([ka])[0])

    def is_saturated(self, ka):
        check_is_fitted(self, "coef_")
        return ka > self.ka_range_[1]

    @classmethod
    def topp(cls):
        curve = cls()
        curve.coef_ = np.array(TOPP_COEFFICIENTS)
        curve.fit_rmse_ = 0.0
        curve.n_points_ = 0
        curve.ka_range_ = (KA_BRANCH[0], TOPP_FIT_MAX_KA)
        return curve

    def to_dict(self):
        check_is_fitted(self, "coef_")
        return {
            "coefficients": [float(c) for c in self.coef_],
            "fit_rmse": self.fit_rmse_,
            "n_points": self.n_points_,
            "ka_range": list(self.ka_range_),
        }

    @classmethod
    def from_dict(cls, data):
        coeffs = np.asarray(data["coefficients"], dtype=float)
        if coeffs.shape != (4,) or not np.all(np.isfinite(coeffs)):
            raise ValueError("calibration needs 4 finite coefficients")
        curve = cls()
        curve.coef_ = coeffs
        curve.fit_rmse_ = float(data.get("fit_rmse", 0.0))
        curve.n_points_ = int(data.get("n_points", 0))
        curve.ka_range_ = tuple(float(v) for v in data.get("ka_range", (1.0, TOPP_FIT_MAX_KA)))
        return curve


def fit_calibration(pairs):
    """Fit a :class:`CalibrationCurve` to ``(Ka, oven-dry theta)`` pairs."""
    pairs = np.asarray(pairs, dtype=float).reshape(-1, 2) if len(pairs) else np.empty((0, 2))
    if len(pairs) < 4:
        raise ValueError(f"insufficient points for a cubic fit: {len(pairs)} < 4")
    return CalibrationCurve().fit(pairs[:, 0], pairs[:, 1])


@dataclass
class MoistureEstimate:
    delta_tof: float
    ka: float
    theta: float
    snr_db: float
    expected_bin: float
    measured_bin: float
    mode: str = "exact"
    flags: frozenset = field(default_factory=frozenset)

    @property
    def detected(self):
        return LOW_SNR not in self.flags

    def to_record(self):
        def num(x):
            return None if x is None or not math.isfinite(x) else float(x)

        return {
            "theta": num(self.theta),
            "ka": num(self.ka),
            "delta_tof_ns": num(None if self.delta_tof is None else self.delta_tof * 1e9),
            "snr_db": num(self.snr_db),
            "expected_bin": num(self.expected_bin),
            "measured_bin": num(self.measured_bin),
            "flags": sorted(self.flags),
            "mode": self.mode,
        }


def surface_distance(capture, prominence_db=20.0, image=None):
    """Distance of the first static echo standing out of the noise.

    Scans the zero-Doppler column outward from the radar for the first
    local maximum whose power exceeds the noise floor (median power of all
    non-zero Doppler cells) by ``prominence_db``.
    """
    image = range_doppler(capture) if image is None else image
    dc_power = np.abs(image.data[:, 0]) ** 2
    noise = float(np.median(np.abs(image.data[:, 1:]) ** 2)) if image.n_frames > 1 else 0.0
    top = float(dc_power.max())
    if top <= 0:
        raise NoSurfaceEcho("no surface echo: zero-Doppler column is empty")
    # second term guards the noiseless case against pulse tails
    threshold = max(noise * 10 ** (prominence_db / 10), top * 1e-6)
    padded = np.concatenate(([-np.inf], dc_power, [-np.inf]))
    for n, p in enumerate(dc_power):
        if p > threshold and p >= padded[n] and p >= padded[n + 2]:
            with np.errstate(divide="ignore"):
                offset, _ = parabolic_peak(0.5 * np.log(dc_power), n)
            return capture.config.range_start + (n + offset + 0.5) * capture.config.range_res
    raise NoSurfaceEcho(f"no surface echo {prominence_db} dB above the noise floor")


def search_window(geom, n_bins, max_ka=KA_BRANCH[1]):
    """Range-bin indices where a tag can appear for Ka in ``[1, max_ka]``."""
    near = expected_bin(geom) - 0.5
    far = (geom.d_air + geom.d_soil * math.sqrt(max_ka) - geom.range_start) / geom.range_res - 0.5
    return max(0, math.floor(near) - 1), min(n_bins, math.ceil(far) + 2)


def estimate_vwc(capture, osc_freq, geom, curve=None, mode="exact", threshold_db=10.0, image=None):
    """Run the full chain: tag detection, excess delay, Ka and water content.

    ``curve`` is a fitted :class:`CalibrationCurve`; ``None`` means Topp.
    When the tag is not detected the estimate carries the ``LowSnr`` flag
    and ``theta``/``ka`` are ``None``.
    """
    curve = CalibrationCurve.topp() if curve is None else curve
    image = range_doppler(capture) if image is None else image
    b_t = expected_bin(geom)
    try:
        det = detect_tag(image, osc_freq, window=search_window(geom, image.n_bins),
                         threshold_db=threshold_db)
    except ValueError as exc:
        if "all zero" not in str(exc):
            raise
        det = None
    if det is None or not det.detected:
        return MoistureEstimate(
            delta_tof=None, ka=None, theta=None,
            snr_db=-math.inf if det is None else det.snr_db,
            expected_bin=b_t, measured_bin=None if det is None else det.refined_bin + 0.5,
            mode=mode, flags=frozenset({LOW_SNR}),
        )

    b_r = det.refined_bin + 0.5
    dtof = delta_tof(b_r, b_t, geom.range_res)
    ka = ka_from_delta_tof(dtof, geom.d_soil, mode, tolerance=geom.range_res / (2 * C))
    flags = set()
    if dtof < 0:
        flags.add(NEGATIVE_DELTA)
    if curve.is_saturated(ka):
        flags.add(SATURATED)
    return MoistureEstimate(
        delta_tof=dtof, ka=ka, theta=curve.theta(max(ka, 1.0)), snr_db=det.snr_db,
        expected_bin=b_t, measured_bin=b_r, mode=mode, flags=frozenset(flags),
    )


class MoistureEstimator(RegressorMixin, BaseEstimator):
    """Estimate water content from captures of one buried tag.

    ``fit(captures)`` uses Topp (or ``calibration`` if given);
    ``fit(captures, theta_oven)`` performs a gravimetric calibration,
    fitting a cubic from the captures' Ka readings to the oven values.
    ``d_air=None`` measures the radar-to-surface distance from each
    capture.
    """

    def __init__(self, d_soil=0.30, d_air=None, osc_freq=80.0, ka_mode="exact",
                 threshold_db=10.0, calibration=None):
        self.d_soil = d_soil
        self.d_air = d_air
        self.osc_freq = osc_freq
        self.ka_mode = ka_mode
        self.threshold_db = threshold_db
        self.calibration = calibration

    def _geometry(self, capture):
        d_air = surface_distance(capture) if self.d_air is None else self.d_air
        return MeasurementGeometry.for_radar(capture.config, d_air, self.d_soil)

    def _estimate(self, capture, curve):
        return estimate_vwc(capture, self.osc_freq, self._geometry(capture), curve,
                            self.ka_mode, self.threshold_db)

    def fit(self, X, y=None):
        if self.ka_mode not in KA_MODES:
            raise ValueError(f"ka_mode must be one of {KA_MODES}")
        if y is None:
            self.curve_ = self.calibration if self.calibration is not None else CalibrationCurve.topp()
            return self
        y = column_or_1d(np.asarray(y, dtype=float))
        if len(y) != len(X):
            raise ValueError(f"{len(X)} captures but {len(y)} reference values")
        readings = [self._estimate(c, CalibrationCurve.topp()) for c in X]
        keep = [i for i, est in enumerate(readings) if est.detected]
        if len(keep) < 4:
            raise ValueError(f"only {len(keep)} captures with a detected tag; need >= 4")
        ka = np.array([readings[i].ka for i in keep])
        self.curve_ = CalibrationCurve().fit(ka, y[keep])
        return self

    def estimate(self, X):
        check_is_fitted(self, "curve_")
        return [self._estimate(c, self.curve_) for c in X]

    def predict(self, X):
        return np.array([np.nan if e.theta is None else e.theta for e in self.estimate(X)])
