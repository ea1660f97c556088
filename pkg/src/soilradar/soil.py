"""Soil dielectric and propagation physics.

Everything here is a pure function of its arguments. Permittivities are
relative (dimensionless), conductivity is bulk EC in S/m and frequencies
are in Hz.
"""

from dataclasses import dataclass, field
from enum import Enum
import math

import numpy as np
from scipy import constants, optimize

from ._validation import check_finite, check_nonnegative, check_positive

C = constants.c
EPS0 = constants.epsilon_0
MU0 = constants.mu_0

#: Topp cubic, constant term first.
TOPP_COEFFICIENTS = (-5.3e-2, 2.92e-2, -5.5e-4, 4.3e-6)

#: Ka range the inverse maps search; 81 is pure water.
KA_BRANCH = (1.0, 81.0)

#: Upper Ka of the data Topp's cubic was fitted to.
TOPP_FIT_MAX_KA = 40.0


@dataclass(frozen=True)
class DielectricState:
    eps_real: float
    eps_imag: float = 0.0
    sigma: float = 0.0
    mu_rel: float = 1.0

    def __post_init__(self):
        eps_real = check_finite(self.eps_real, "eps_real")
        if eps_real < 1:
            raise ValueError(f"eps_real must be >= 1, got {eps_real}")
        check_nonnegative(self.eps_imag, "eps_imag")
        check_nonnegative(self.sigma, "sigma")
        check_positive(self.mu_rel, "mu_rel")


class TextureName(str, Enum):
    SANDY_CLAY_LOAM = "sandy_clay_loam"
    SILT_LOAM = "silt_loam"
    CLAY_LOAM = "clay_loam"
    POTTING_SOIL = "potting_soil"
    CUSTOM = "custom"


@dataclass(frozen=True)
class SoilTexture:
    """Texture-level parameters used by the simulator.

    ``vwc_map`` is either the string ``"topp"`` or four cubic coefficients
    in Ka, constant term first, describing a calibrated map.
    """

    name: TextureName
    theta_sat: float
    ec_sat: float
    vwc_map: object = "topp"

    def __post_init__(self):
        object.__setattr__(self, "name", TextureName(self.name))
        theta_sat = check_finite(self.theta_sat, "theta_sat")
        if not 0 < theta_sat < 1:
            raise ValueError(f"theta_sat must lie in (0, 1), got {theta_sat}")
        check_nonnegative(self.ec_sat, "ec_sat")
        if isinstance(self.vwc_map, str):
            if self.vwc_map != "topp":
                raise ValueError(f"unknown vwc_map {self.vwc_map!r}")
        else:
            coeffs = tuple(float(c) for c in self.vwc_map)
            if len(coeffs) != 4 or not all(map(math.isfinite, coeffs)):
                raise ValueError("a calibrated vwc_map needs 4 finite coefficients")
            object.__setattr__(self, "vwc_map", coeffs)

    @property
    def coefficients(self):
        return TOPP_COEFFICIENTS if self.vwc_map == "topp" else self.vwc_map

    def theta_from_ka(self, ka):
        if self.vwc_map == "topp":
            return topp_vwc(ka)
        return cubic_vwc(ka, self.vwc_map)

    def conductivity(self, theta):
        """Bulk EC at water content ``theta``; linear from 0 at dry to ``ec_sat``."""
        return self.ec_sat * float(theta) / self.theta_sat


# Simulator defaults, not measured ground truth.
SANDY_CLAY_LOAM = SoilTexture(TextureName.SANDY_CLAY_LOAM, theta_sat=0.40, ec_sat=0.10)
SILT_LOAM = SoilTexture(TextureName.SILT_LOAM, theta_sat=0.45, ec_sat=0.15)
CLAY_LOAM = SoilTexture(TextureName.CLAY_LOAM, theta_sat=0.48, ec_sat=0.20)
POTTING_SOIL = SoilTexture(TextureName.POTTING_SOIL, theta_sat=0.60, ec_sat=1.0)

DEFAULT_TEXTURES = {
    t.name.value: t for t in (SANDY_CLAY_LOAM, SILT_LOAM, CLAY_LOAM, POTTING_SOIL)
}


@dataclass(frozen=True)
class Layer:
    thickness: float
    theta: float
    texture: SoilTexture = SANDY_CLAY_LOAM

    def __post_init__(self):
        check_positive(self.thickness, "thickness")
        theta = check_finite(self.theta, "theta")
        if not 0 <= theta <= self.texture.theta_sat:
            raise ValueError(
                f"theta={theta} outside [0, theta_sat={self.texture.theta_sat}] "
                f"for {self.texture.name.value}"
            )


@dataclass(frozen=True)
class SoilProfile:
    """Ordered soil layers, the first one at the surface."""

    layers: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ValueError("a soil profile needs at least one layer")

    @classmethod
    def uniform(cls, theta, thickness=1.0, texture=SANDY_CLAY_LOAM):
        return cls((Layer(thickness, theta, texture),))

    @property
    def total_thickness(self):
        return sum(layer.thickness for layer in self.layers)

    def segments(self, depth):
        """Yield ``(length, layer)`` pieces covering ``[0, depth]`` from the top."""
        depth = check_nonnegative(depth, "depth")
        if depth > self.total_thickness * (1 + 1e-12):
            raise ValueError(
                f"depth {depth} m exceeds profile thickness {self.total_thickness} m"
            )
        remaining = depth
        for layer in self.layers:
            if remaining <= 0:
                break
            length = min(layer.thickness, remaining)
            yield length, layer
            remaining -= length


def _check_freq(f):
    return check_positive(f, "f")


def apparent_dielectric(state, f):
    """Apparent dielectric constant Ka seen by a travel-time measurement."""
    f = _check_freq(f)
    loss = state.eps_imag + state.sigma / (2 * math.pi * f * EPS0)
    ratio = loss / state.eps_real
    return state.eps_real / 2 * (math.sqrt(1 + ratio * ratio) + 1)


def wave_velocity(state, f):
    """Phase velocity (m/s) of a plane wave in a conductive dielectric."""
    f = _check_freq(f)
    omega = 2 * math.pi * f
    loss_tangent = state.sigma / (omega * state.eps_real * EPS0)
    return C * (
        state.mu_rel * state.eps_real / 2 * (1 + math.sqrt(1 + loss_tangent**2))
    ) ** -0.5


def attenuation_constant(state, f):
    """Plane-wave attenuation constant in Np/m."""
    f = _check_freq(f)
    omega = 2 * math.pi * f
    sigma_eff = state.sigma + omega * EPS0 * state.eps_imag
    x = sigma_eff / (omega * state.eps_real * EPS0)
    # sqrt(1 + x^2) - 1 without cancellation at small x
    excess = x * x / (math.sqrt(1 + x * x) + 1)
    return omega * math.sqrt(state.mu_rel * MU0 * state.eps_real * EPS0 / 2 * excess)


def cubic_vwc(ka, coefficients):
    """Evaluate a constant-first cubic in Ka, clamped to [0, 1]."""
    ka = np.asarray(ka, dtype=float)
    if not np.all(np.isfinite(ka)):
        raise ValueError("Ka must be finite")
    if np.any(ka < 1):
        raise ValueError(f"Ka must be >= 1, got min {ka.min()}")
    c0, c1, c2, c3 = coefficients
    theta = np.clip(((c3 * ka + c2) * ka + c1) * ka + c0, 0.0, 1.0)
    return float(theta) if theta.ndim == 0 else theta


def topp_vwc(ka):
    """Volumetric water content from Ka via Topp's cubic, clamped to [0, 1]."""
    return cubic_vwc(ka, TOPP_COEFFICIENTS)


def vwc_to_ka(theta, texture=SANDY_CLAY_LOAM, xtol=1e-12):
    """Invert the texture's VWC map on the monotone branch Ka in [1, 81].

    Returns the smallest Ka whose (clamped) water content equals ``theta``,
    so ``theta = 0`` maps to dry soil at Ka = 1.
    """
    theta = check_finite(theta, "theta")
    if not 0 <= theta <= texture.theta_sat:
        raise ValueError(f"theta={theta} outside [0, {texture.theta_sat}]")
    lo, hi = KA_BRANCH
    g = lambda ka: texture.theta_from_ka(ka) - theta  # noqa: E731
    if g(lo) >= 0:
        return lo
    if g(hi) < 0:
        raise ValueError(f"no Ka in [{lo}, {hi}] reaches theta={theta}")
    return optimize.bisect(g, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)


def one_way_tof(distance, ka):
    """One-way travel time (s) over ``distance`` metres of medium with Ka."""
    distance = check_nonnegative(distance, "distance")
    ka = check_finite(ka, "ka")
    if ka < 1:
        raise ValueError(f"Ka must be >= 1, got {ka}")
    return distance * math.sqrt(ka) / C


def layer_ka(layer):
    return vwc_to_ka(layer.theta, layer.texture)


def layer_dielectric(layer, f):
    """Dielectric state of a layer whose apparent dielectric equals its Ka.

    Loss is carried entirely by conductivity; the real permittivity is
    solved from the apparent-dielectric relation in closed form.
    """
    f = _check_freq(f)
    ka = layer_ka(layer)
    sigma = layer.texture.conductivity(layer.theta)
    loss = sigma / (2 * math.pi * f * EPS0)
    eps_real = ka - loss * loss / (4 * ka)
    if eps_real < 1:
        raise ValueError(
            f"conductivity {sigma} S/m too high for Ka={ka:.3f} at {f:.3g} Hz"
        )
    return DielectricState(eps_real=eps_real, sigma=sigma)


def profile_effective_ka(profile, depth):
    """Ka of a uniform medium with the same travel time over ``[0, depth]``."""
    depth = check_positive(depth, "depth")
    sqrt_sum = sum(length * math.sqrt(layer_ka(layer)) for length, layer in profile.segments(depth))
    return (sqrt_sum / depth) ** 2


def path_attenuation(profile, depth, f):
    """One-way integrated attenuation (Np) from the surface to ``depth``."""
    return sum(
        length * attenuation_constant(layer_dielectric(layer, f), f)
        for length, layer in profile.segments(depth)
    )
