"""UWB impulse radar model: range-bin grid, pulse shape and frame synthesis.

Sample ``n`` of a frame is taken at the round-trip time of the centre of
range bin ``n``, so a reflector sitting exactly on a bin centre is sampled
at the pulse peak. Each frame carries one effective pulse; integration gain
inside a real frame is folded into ``noise_sigma``.
"""

from dataclasses import asdict, dataclass, field
import math

import numpy as np

from ._validation import check_finite, check_fraction, check_nonnegative, check_positive
from .soil import C


class CaptureTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class RadarConfig:
    fc: float = 1.5e9
    bandwidth: float = 3e9
    frame_rate: float = 200.0
    range_start: float = 0.0
    range_end: float = 5.0
    range_res: float = None
    tx_amplitude: float = 1.0
    noise_sigma: float = 0.01
    max_samples: int = 50_000_000

    def __post_init__(self):
        check_positive(self.fc, "fc")
        check_positive(self.bandwidth, "bandwidth")
        check_positive(self.frame_rate, "frame_rate")
        if self.range_res is None:
            object.__setattr__(self, "range_res", C / (2 * self.bandwidth))
        check_positive(self.range_res, "range_res")
        start = check_nonnegative(self.range_start, "range_start")
        end = check_finite(self.range_end, "range_end")
        if end <= start:
            raise ValueError(f"range_end ({end}) must exceed range_start ({start})")
        check_nonnegative(self.tx_amplitude, "tx_amplitude")
        check_nonnegative(self.noise_sigma, "noise_sigma")
        if int(self.max_samples) < 1:
            raise ValueError("max_samples must be positive")

    @property
    def pri(self):
        return 1.0 / self.frame_rate

    @property
    def wavelength(self):
        return C / self.fc

    @property
    def n_bins(self):
        # round first so that e.g. 4.0 / 0.05 does not become 81 bins
        span = round((self.range_end - self.range_start) / self.range_res, 9)
        return max(1, math.ceil(span))

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


def bin_of_distance(config, d):
    """Zero-based index of the range bin containing distance ``d``."""
    d = check_finite(d, "d")
    if not config.range_start <= d < config.range_end:
        raise ValueError(
            f"distance {d} m outside sensing window "
            f"[{config.range_start}, {config.range_end})"
        )
    return int(math.floor(round((d - config.range_start) / config.range_res, 9)))


def distance_of_bin(config, n):
    """Distance at the centre of range bin ``n``."""
    return config.range_start + (n + 0.5) * config.range_res


def sample_times(config):
    """Round-trip delay sampled by each range bin."""
    centres = config.range_start + (np.arange(config.n_bins) + 0.5) * config.range_res
    return 2 * centres / C


@dataclass(frozen=True)
class PulseShape:
    """Complex received pulse ``p(t)`` with unit peak magnitude at ``t = 0``.

    ``model`` is ``"gaussian"`` (Gaussian envelope on a carrier at ``fc``)
    or ``"ideal"`` (band-limited sinc envelope on the same carrier).
    """

    model: str = "gaussian"
    fc: float = 1.5e9
    bandwidth: float = 3e9
    envelope_sigma: float = None

    def __post_init__(self):
        if self.model not in ("gaussian", "ideal"):
            raise ValueError(f"unknown pulse model {self.model!r}")
        check_positive(self.fc, "fc")
        check_positive(self.bandwidth, "bandwidth")
        if self.envelope_sigma is None:
            # -10 dB power bandwidth of the Gaussian envelope equals `bandwidth`
            sigma = math.sqrt(math.log(10)) / (math.pi * self.bandwidth)
            object.__setattr__(self, "envelope_sigma", sigma)
        check_positive(self.envelope_sigma, "envelope_sigma")

    @classmethod
    def for_config(cls, config, model="gaussian"):
        return cls(model=model, fc=config.fc, bandwidth=config.bandwidth)

    def envelope(self, t):
        t = np.asarray(t, dtype=float)
        if self.model == "gaussian":
            return np.exp(-0.5 * (t / self.envelope_sigma) ** 2)
        return np.sinc(self.bandwidth * t)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.envelope(t) * np.exp(2j * np.pi * self.fc * t)


@dataclass(frozen=True)
class Static:
    def gains(self, frames, frame_rate, pri, wavelength, t0=0.0):
        return np.ones(len(frames), dtype=complex)


@dataclass(frozen=True)
class OnOffSquare:
    """Reflection toggled on for a ``duty`` fraction of each period."""

    freq: float
    duty: float = 0.5
    phase: float = 0.0

    def __post_init__(self):
        check_positive(self.freq, "freq")
        check_fraction(self.duty, "duty")
        check_finite(self.phase, "phase")

    def _on(self, cycles):
        # rounding keeps exact edges (e.g. 80 Hz at 200 fps) from flickering
        frac = np.mod(np.round(cycles + self.phase / (2 * np.pi), 9), 1.0)
        return frac < self.duty

    def state(self, t):
        return self._on(self.freq * np.asarray(t, dtype=float)).astype(float)

    def gains(self, frames, frame_rate, pri, wavelength, t0=0.0):
        cycles = self.freq * t0 + self.freq * np.asarray(frames, dtype=float) / frame_rate
        return self._on(cycles).astype(complex)


@dataclass(frozen=True)
class LinearVelocity:
    """Constant radial velocity; only the carrier phase advances per frame."""

    v: float

    def __post_init__(self):
        check_finite(self.v, "v")

    def gains(self, frames, frame_rate, pri, wavelength, t0=0.0):
        frames = np.asarray(frames, dtype=float)
        return np.exp(-2j * np.pi * 2 * self.v * pri * frames / wavelength)


@dataclass(frozen=True)
class Reflector:
    distance: float
    amplitude: complex = 1.0
    modulation: object = field(default_factory=Static)

    def __post_init__(self):
        check_finite(self.distance, "distance")
        amp = complex(self.amplitude)
        if not (math.isfinite(amp.real) and math.isfinite(amp.imag)):
            raise ValueError("reflector amplitude must be finite")
        object.__setattr__(self, "amplitude", amp)

    @property
    def is_static(self):
        return isinstance(self.modulation, Static)


@dataclass
class FrameCapture:
    """``P x N`` complex samples, frame-major, plus provenance metadata."""

    samples: np.ndarray
    config: RadarConfig
    t0: float = 0.0
    seed: int = 0
    annotations: dict = field(default_factory=dict)

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if samples.ndim != 2 or samples.shape[0] < 1:
            raise ValueError(f"samples must be P x N with P >= 1, got {samples.shape}")
        if samples.shape[1] != self.config.n_bins:
            raise ValueError(
                f"capture has {samples.shape[1]} bins, config expects {self.config.n_bins}"
            )
        if not np.all(np.isfinite(samples)):
            raise ValueError("capture contains non-finite samples")
        self.samples = samples

    @property
    def n_frames(self):
        return self.samples.shape[0]

    @property
    def n_bins(self):
        return self.samples.shape[1]

    @property
    def duration(self):
        return self.n_frames / self.config.frame_rate


def _check_scene(config, scene):
    for k, refl in enumerate(scene):
        if not config.range_start <= refl.distance < config.range_end:
            raise ValueError(
                f"reflector {k} at {refl.distance} m is outside the sensing window "
                f"[{config.range_start}, {config.range_end})"
            )


def reflector_row(config, pulse, reflector):
    """Noise-free contribution of one reflector to a frame, before modulation."""
    tau = 2 * reflector.distance / C
    return config.tx_amplitude * reflector.amplitude * pulse(sample_times(config) - tau)


def frame_rng(seed, m):
    """Independent random stream for frame ``m`` of a capture seeded with ``seed``."""
    return np.random.Generator(np.random.Philox(key=int(seed), counter=[0, 0, 0, int(m)]))


def _noise_row(config, rng):
    n = config.n_bins
    z = rng.standard_normal(2 * n)
    return (z[:n] + 1j * z[n:]) * (config.noise_sigma / math.sqrt(2))


def _scene_signal(config, pulse, scene, frames, t0):
    frames = np.asarray(frames)
    out = np.zeros((len(frames), config.n_bins), dtype=complex)
    static = [r for r in scene if r.is_static]
    dynamic = [r for r in scene if not r.is_static]
    if static:
        out += sum(reflector_row(config, pulse, r) for r in static)
    for refl in dynamic:
        g = refl.modulation.gains(frames, config.frame_rate, config.pri, config.wavelength, t0)
        out += np.outer(g, reflector_row(config, pulse, refl))
    return out


def synthesize_frame(config, pulse, scene, m, rng=None, t0=0.0):
    """One frame (``N`` complex samples) of the scene at frame index ``m``.

    ``rng`` is a numpy Generator, or an integer capture seed in which case
    the frame-keyed stream used by :func:`synthesize_capture` is reproduced.
    """
    if m < 0:
        raise ValueError("frame index must be >= 0")
    _check_scene(config, scene)
    row = _scene_signal(config, pulse, scene, [m], t0)[0]
    if config.noise_sigma > 0:
        if rng is None:
            rng = np.random.default_rng()
        elif not isinstance(rng, np.random.Generator):
            rng = frame_rng(rng, m)
        row = row + _noise_row(config, rng)
    return row


def synthesize_capture(config, pulse, scene, duration, seed=0, t0=0.0, annotations=None):
    """Synthesize ``round(duration * frame_rate)`` frames; deterministic in ``seed``."""
    duration = check_positive(duration, "duration")
    n_frames = int(round(duration * config.frame_rate))
    if n_frames < 1:
        raise ValueError(f"duration {duration} s yields no frames at {config.frame_rate} fps")
    if n_frames * config.n_bins > config.max_samples:
        raise CaptureTooLarge(
            f"{n_frames} x {config.n_bins} samples exceeds max_samples={config.max_samples}"
        )
    _check_scene(config, scene)
    samples = _scene_signal(config, pulse, scene, np.arange(n_frames), t0)
    if config.noise_sigma > 0:
        for m in range(n_frames):
            samples[m] += _noise_row(config, frame_rng(seed, m))
    return FrameCapture(
        samples=samples,
        config=config,
        t0=float(t0),
        seed=int(seed),
        annotations=dict(annotations or {}),
    )

