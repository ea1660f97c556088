"""Scenario and sweep files, scene construction and the sweep harness.

Scenario and sweep files are JSON with ``"version": 1``. Unknown fields
are rejected so a misspelt physics parameter fails loudly.
"""

from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import asdict, dataclass, field, replace
import hashlib
import json
import math
from typing import List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .moisture import CalibrationCurve, MeasurementGeometry, estimate_vwc
from .radar import PulseShape, RadarConfig, Reflector, synthesize_capture
from .soil import DEFAULT_TEXTURES, Layer, SoilProfile, SoilTexture
from .tag import TagConfig, tag_as_reflector

SCENARIO_VERSION = 1

SWEEP_VARIABLES = ("theta", "depth", "duration", "center_freq", "osc_freq")

CSV_COLUMNS = (
    "variable", "value", "replicate", "seed", "true_theta", "theta_hat", "error",
    "ka", "snr_db", "detected", "flags", "scenario_digest",
)


class ScenarioError(ValueError):
    """Invalid scenario or sweep; ``str()`` lists one problem per line."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class _Radar(_Strict):
    fc: float = 1.5e9
    bandwidth: float = 3e9
    frame_rate: float = 200.0
    range_start: float = 0.0
    range_end: float = 5.0
    range_res: Optional[float] = None
    tx_amplitude: float = 1.0
    noise_sigma: float = 0.01
    max_samples: int = 50_000_000


class _Texture(_Strict):
    name: str = "custom"
    theta_sat: float
    ec_sat: float
    vwc_map: Union[Literal["topp"], List[float]] = "topp"


class _Layer(_Strict):
    thickness: float
    theta: float
    texture: Union[str, _Texture] = "sandy_clay_loam"


class _Profile(_Strict):
    layers: List[_Layer] = Field(min_length=1)


class _Tag(_Strict):
    mode: Literal["semi_passive", "active"] = "semi_passive"
    gain_db: float = 12.0
    osc_freq: float = 80.0
    duty: float = 0.5
    depth: float = 0.30
    base_rcs_amplitude: float = TagConfig.base_rcs_amplitude
    phase: float = 0.0


class _Clutter(_Strict):
    reflector_density: float = Field(3.0, ge=0)
    amplitude_scale: float = Field(0.1, ge=0)
    log_sigma: float = Field(1.0, ge=0)
    surface_amplitude: float = Field(2.0, ge=0)


class _Scenario(_Strict):
    version: Literal[1]
    radar: _Radar = Field(default_factory=_Radar)
    pulse: Literal["gaussian", "ideal"] = "gaussian"
    tag: _Tag = Field(default_factory=_Tag)
    profile: _Profile
    d_air: float = 1.0
    duration: float = 10.0
    seed: int = Field(0, ge=0, lt=2**64)
    clutter: _Clutter = Field(default_factory=_Clutter)


class _Sweep(_Strict):
    version: Literal[1]
    variable: Literal["theta", "depth", "duration", "center_freq", "osc_freq"]
    values: List[float] = Field(min_length=1)
    replicates: int = Field(1, ge=1)
    base: _Scenario


@dataclass(frozen=True)
class Clutter:
    """Static soil clutter: ``reflector_density`` echoes per range bin below the surface.

    Amplitudes are log-normal around ``amplitude_scale`` with random phase.
    """

    reflector_density: float = 3.0
    amplitude_scale: float = 0.1
    log_sigma: float = 1.0
    surface_amplitude: float = 2.0


@dataclass(frozen=True)
class Scenario:
    radar: RadarConfig = field(default_factory=RadarConfig)
    tag: TagConfig = field(default_factory=TagConfig)
    profile: SoilProfile = field(default_factory=lambda: SoilProfile.uniform(0.2))
    d_air: float = 1.0
    duration: float = 10.0
    seed: int = 0
    clutter: Clutter = field(default_factory=Clutter)
    pulse: str = "gaussian"

    def validate(self):
        problems = []
        try:
            self.tag.check_radar(self.radar)
        except ValueError as exc:
            problems.append(f"tag.osc_freq: {exc}")
        if self.profile.total_thickness < self.tag.depth:
            problems.append(
                f"profile: thickness {self.profile.total_thickness} m does not cover "
                f"tag.depth {self.tag.depth} m"
            )
        if not self.radar.range_start <= self.d_air < self.radar.range_end:
            problems.append("d_air: radar-to-surface distance outside the sensing window")
        if not problems:
            far = tag_as_reflector(self.tag, self.profile, self.d_air, self.radar).distance
            if far >= self.radar.range_end:
                problems.append(
                    f"radar.range_end: tag appears at {far:.3f} m, beyond the sensing window"
                )
        if problems:
            raise ScenarioError("\n".join(problems))
        return self

    def to_dict(self):
        def texture_dict(t):
            d = asdict(t)
            d["name"] = t.name.value
            d["vwc_map"] = "topp" if t.vwc_map == "topp" else list(t.vwc_map)
            return d

        return {
            "version": SCENARIO_VERSION,
            "radar": self.radar.to_dict(),
            "pulse": self.pulse,
            "tag": asdict(self.tag),
            "profile": {"layers": [
                {"thickness": l.thickness, "theta": l.theta, "texture": texture_dict(l.texture)}
                for l in self.profile.layers
            ]},
            "d_air": self.d_air,
            "duration": self.duration,
            "seed": self.seed,
            "clutter": asdict(self.clutter),
        }

    def digest(self):
        """SHA-256 of the canonical scenario, seed excluded."""
        d = self.to_dict()
        d.pop("seed")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    def true_theta(self):
        """Thickness-weighted water content between the surface and the tag."""
        segs = list(self.profile.segments(self.tag.depth))
        return sum(length * layer.theta for length, layer in segs) / self.tag.depth

    def geometry(self):
        return MeasurementGeometry.for_radar(self.radar, self.d_air, self.tag.depth)

    def calibration(self):
        """Water-content map of the top layer's texture."""
        texture = self.profile.layers[0].texture
        if texture.vwc_map == "topp":
            return CalibrationCurve.topp()
        return CalibrationCurve.from_dict({"coefficients": list(texture.vwc_map)})


def _format_validation_error(err):
    lines = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"{loc}: {e['msg']}")
    return "\n".join(lines)


def _texture(spec, where):
    if isinstance(spec, str):
        if spec not in DEFAULT_TEXTURES:
            raise ScenarioError(
                f"{where}.texture: unknown texture {spec!r} (known: {', '.join(DEFAULT_TEXTURES)})"
            )
        return DEFAULT_TEXTURES[spec]
    vwc_map = spec.vwc_map if spec.vwc_map == "topp" else tuple(spec.vwc_map)
    return SoilTexture(spec.name, spec.theta_sat, spec.ec_sat, vwc_map)


def _build(model):
    def build(label, fn):
        try:
            return fn()
        except ScenarioError:
            raise
        except (ValueError, TypeError) as exc:
            raise ScenarioError(f"{label}: {exc}") from exc

    radar = build("radar", lambda: RadarConfig(**model.radar.model_dump()))
    tag = build("tag", lambda: TagConfig(**model.tag.model_dump()))
    layers = []
    for i, lm in enumerate(model.profile.layers):
        where = f"profile.layers.{i}"
        texture = build(where + ".texture", lambda: _texture(lm.texture, where))
        layers.append(build(where, lambda: Layer(lm.thickness, lm.theta, texture)))
    if not model.duration > 0:
        raise ScenarioError("duration: must be > 0")
    scenario = Scenario(
        radar=radar, tag=tag, profile=SoilProfile(tuple(layers)), d_air=float(model.d_air),
        duration=float(model.duration), seed=int(model.seed),
        clutter=Clutter(**model.clutter.model_dump()), pulse=model.pulse,
    )
    return scenario.validate()


def parse_scenario(data):
    """Build a validated :class:`Scenario` from decoded JSON."""
    try:
        model = _Scenario.model_validate(data)
    except ValidationError as err:
        raise ScenarioError(_format_validation_error(err)) from None
    return _build(model)


def load_scenario(path):
    with open(path) as fh:
        return parse_scenario(json.load(fh))


def build_scene(scenario):
    """Surface echo, static clutter below it and the tag."""
    radar = scenario.radar
    scene = []
    if scenario.clutter.surface_amplitude > 0:
        scene.append(Reflector(scenario.d_air, scenario.clutter.surface_amplitude))

    rng = np.random.default_rng([scenario.seed, 0xC1])
    lo = scenario.d_air + radar.range_res
    hi = radar.range_end
    n_clutter = int(round(scenario.clutter.reflector_density * max(0.0, hi - lo) / radar.range_res))
    if n_clutter and scenario.clutter.amplitude_scale > 0:
        dist = rng.uniform(lo, hi, n_clutter)
        mag = scenario.clutter.amplitude_scale * rng.lognormal(0.0, scenario.clutter.log_sigma, n_clutter)
        phase = rng.uniform(0, 2 * np.pi, n_clutter)
        scene.extend(Reflector(d, m * np.exp(1j * p)) for d, m, p in zip(dist, mag, phase))

    scene.append(tag_as_reflector(scenario.tag, scenario.profile, scenario.d_air, radar))
    return scene


def simulate(scenario):
    """Synthesize the capture a scenario describes."""
    scenario.validate()
    pulse = PulseShape.for_config(scenario.radar, scenario.pulse)
    annotations = {
        "scenario_digest": scenario.digest(),
        "d_air": scenario.d_air,
        "d_soil": scenario.tag.depth,
        "osc_freq": scenario.tag.osc_freq,
        "tag_mode": scenario.tag.mode,
        "true_theta": scenario.true_theta(),
        "pulse": scenario.pulse,
    }
    return synthesize_capture(
        scenario.radar, pulse, build_scene(scenario), scenario.duration,
        seed=scenario.seed, annotations=annotations,
    )


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: tuple
    base: Scenario
    replicates: int = 1

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ScenarioError(f"variable: must be one of {SWEEP_VARIABLES}")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.values:
            raise ScenarioError("values: must be non-empty")
        if self.replicates < 1:
            raise ScenarioError("replicates: must be >= 1")

    def scenarios(self):
        """Yield ``(value, replicate, scenario)``; replicate ``k`` uses ``base.seed + k``."""
        for value in self.values:
            varied = apply_sweep_value(self.base, self.variable, value)
            for k in range(self.replicates):
                yield value, k, replace(varied, seed=self.base.seed + k)


def parse_sweep(data):
    try:
        model = _Sweep.model_validate(data)
    except ValidationError as err:
        raise ScenarioError(_format_validation_error(err)) from None
    base = _build(model.base)
    spec = SweepSpec(model.variable, tuple(model.values), base, model.replicates)
    problems = []
    for value in spec.values:
        try:
            apply_sweep_value(base, spec.variable, value)
        except ScenarioError as exc:
            problems.append(f"values[{value}]: {exc}")
    if problems:
        raise ScenarioError("\n".join(problems))
    return spec


def load_sweep(path):
    with open(path) as fh:
        return parse_sweep(json.load(fh))


def apply_sweep_value(base, variable, value):
    """Return ``base`` with the swept variable set to ``value`` (validated)."""
    try:
        if variable == "theta":
            layers = tuple(replace(l, theta=value) for l in base.profile.layers)
            out = replace(base, profile=SoilProfile(layers))
        elif variable == "depth":
            profile = base.profile
            short = value - profile.total_thickness
            if short > 0:
                last = profile.layers[-1]
                layers = profile.layers[:-1] + (replace(last, thickness=last.thickness + short),)
                profile = SoilProfile(layers)
            out = replace(base, tag=replace(base.tag, depth=value), profile=profile)
        elif variable == "duration":
            out = replace(base, duration=value)
        elif variable == "center_freq":
            out = replace(base, radar=replace(base.radar, fc=value))
        elif variable == "osc_freq":
            out = replace(base, tag=replace(base.tag, osc_freq=value))
        else:
            raise ScenarioError(f"unknown sweep variable {variable!r}")
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError(f"{variable}={value}: {exc}") from exc
    return out.validate()


def run_scenario(scenario, mode="exact", threshold_db=10.0):
    """Simulate a scenario and estimate its water content with known geometry."""
    capture = simulate(scenario)
    return estimate_vwc(capture, scenario.tag.osc_freq, scenario.geometry(),
                        scenario.calibration(), mode=mode, threshold_db=threshold_db)


def _row(job):
    variable, value, replicate, scenario, mode, threshold_db = job
    try:
        est = run_scenario(scenario, mode, threshold_db)
    except Exception as exc:
        raise RuntimeError(
            f"sweep {variable}={value} replicate {replicate} (seed {scenario.seed}) failed: {exc}"
        ) from exc
    truth = scenario.true_theta()
    theta = est.theta
    return {
        "variable": variable,
        "value": value,
        "replicate": replicate,
        "seed": scenario.seed,
        "true_theta": truth,
        "theta_hat": theta,
        "error": None if theta is None else theta - truth,
        "ka": est.ka,
        "snr_db": est.snr_db,
        "detected": est.detected,
        "flags": "|".join(sorted(est.flags)),
        "scenario_digest": scenario.digest(),
    }


def run_sweep(spec, jobs=1, mode="exact", threshold_db=10.0):
    """One row per ``(value, replicate)``, sorted by value then replicate."""
    work = [(spec.variable, v, k, s, mode, threshold_db) for v, k, s in spec.scenarios()]
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_row, work))
    else:
        rows = [_row(w) for w in work]
    rows.sort(key=lambda r: (r["value"], r["replicate"]))
    return rows


def write_rows_csv(path_or_file, rows):
    def fmt(v):
        if v is None:
            return ""
        if isinstance(v, float):
            return "inf" if math.isinf(v) else repr(v)
        return str(v)

    own = isinstance(path_or_file, str)
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in rows:
            writer.writerow([fmt(r[c]) for c in CSV_COLUMNS])
    finally:
        if own:
            fh.close()
