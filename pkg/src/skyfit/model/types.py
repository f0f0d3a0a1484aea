"""Domain types for the generative image model and its variational family.

Conventions used throughout the package:

* Sky positions are ``(x, y)`` pairs in sky units.  Image pixel ``(ix, iy)``
  has its center at ``origin + (ix, iy) * pixel_scale``; pixel arrays are
  indexed ``pixels[iy, ix]`` (row-major, ``height`` rows by ``width`` cols).
* There are five photometric bands, indexed 0..4 (u, g, r, i, z).  Band 2
  (r) is the reference band: per-source brightness is the r-band flux, and
  the four colors are log flux ratios of adjacent bands,
  ``color[i] = log(flux[i+1] / flux[i])``.
* Every source carries both a star and a galaxy hypothesis; type index 0 is
  the star hypothesis and 1 the galaxy hypothesis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError

N_BANDS = 5
REF_BAND = 2
BAND_NAMES = ("u", "g", "r", "i", "z")

STAR = 0
GALAXY = 1

# Row b gives the weights w_b such that log flux[b] = log flux[REF_BAND] + w_b . color.
COLOR_WEIGHTS = np.array(
    [
        [-1.0, -1.0, 0.0, 0.0],
        [0.0, -1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0, 1.0],
    ]
)


def _finite(*values: float) -> bool:
    return all(np.isfinite(v) for v in values)


@dataclass(frozen=True)
class Priors:
    """Parameters of the priors on source type, brightness, and color.

    ``star_prob`` is the Bernoulli parameter for the source type,
    ``log_flux_mean``/``log_flux_sd`` the log-normal prior on reference-band
    flux, and ``color_mean``/``color_cov`` the multivariate normal prior on
    the four colors.
    """

    star_prob: float = 0.5
    log_flux_mean: float = 9.0
    log_flux_sd: float = 1.25
    color_mean: np.ndarray = field(
        default_factory=lambda: np.array([0.6, 0.5, 0.3, 0.2])
    )
    color_cov: np.ndarray = field(
        default_factory=lambda: (
            0.09 * np.eye(4) + 0.0225 * np.ones((4, 4))
        )
    )

    @property
    def type_param(self) -> float:
        return self.star_prob

    def validate(self) -> None:
        if not 0.0 <= self.star_prob <= 1.0:
            raise ValidationError(f"star_prob must be in [0,1], got {self.star_prob}")
        if not (self.log_flux_sd > 0 and _finite(self.log_flux_mean, self.log_flux_sd)):
            raise ValidationError("log-flux prior must have finite mean and sd > 0")
        cov = np.asarray(self.color_cov, dtype=float)
        if cov.shape != (4, 4) or not np.allclose(cov, cov.T):
            raise ValidationError("color_cov must be a symmetric 4x4 matrix")
        if np.linalg.eigvalsh(cov).min() <= 0:
            raise ValidationError("color_cov must be positive definite")


@dataclass(frozen=True)
class ImageMeta:
    """Per-image metadata: band, sky mapping, dimensions, and conditions.

    ``origin`` is the sky coordinate of the center of pixel (0, 0).
    Dimensions live here (rather than only on the pixel grid) so that
    geometry-only consumers such as the work estimator need no pixel data.
    """

    band: int
    background: float
    psf_sigma: float
    origin: tuple[float, float]
    pixel_scale: float
    width: int
    height: int

    def validate(self) -> None:
        if not 0 <= self.band < N_BANDS:
            raise ValidationError(f"band must be in 0..{N_BANDS - 1}, got {self.band}")
        if not (self.background > 0 and np.isfinite(self.background)):
            raise ValidationError("background must be finite and > 0")
        if not (self.psf_sigma > 0 and np.isfinite(self.psf_sigma)):
            raise ValidationError("psf_sigma must be finite and > 0")
        if not (self.pixel_scale > 0 and np.isfinite(self.pixel_scale)):
            raise ValidationError("pixel_scale must be finite and > 0")
        if self.width < 1 or self.height < 1:
            raise ValidationError("image dimensions must be >= 1")

    def sky_to_pixel(self, x: float, y: float) -> tuple[float, float]:
        ox, oy = self.origin
        return (x - ox) / self.pixel_scale, (y - oy) / self.pixel_scale

    def sky_bounds(self) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) of the image footprint, pixel edges included."""
        ox, oy = self.origin
        h = 0.5 * self.pixel_scale
        return (
            ox - h,
            oy - h,
            ox + (self.width - 0.5) * self.pixel_scale,
            oy + (self.height - 0.5) * self.pixel_scale,
        )


@dataclass(frozen=True)
class ImagePatch:
    """A pixel grid of photon counts plus its metadata."""

    meta: ImageMeta
    pixels: np.ndarray

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def validate(self) -> None:
        self.meta.validate()
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.shape != (self.meta.height, self.meta.width):
            raise ValidationError(
                f"pixel grid shape {px.shape} does not match metadata "
                f"({self.meta.height}, {self.meta.width})"
            )
        if not np.all(np.isfinite(px)) or np.any(px < 0):
            raise ValidationError("pixel counts must be finite and >= 0")


@dataclass(frozen=True)
class GalaxyShape:
    """Galaxy morphology: profile mix, axis ratio, effective radius, angle.

    ``profile_mix`` interpolates between the exponential (0) and
    de Vaucouleurs (1) light profiles; ``eccentricity`` is the minor/major
    axis ratio; ``scale`` is the effective radius in pixels; ``angle`` the
    major-axis orientation in degrees, in [0, 180).
    """

    profile_mix: float
    eccentricity: float
    scale: float
    angle: float

    def validate(self) -> None:
        if not (0.0 <= self.profile_mix <= 1.0):
            raise ValidationError(f"profile_mix must be in [0,1], got {self.profile_mix}")
        if not (0.0 < self.eccentricity <= 1.0):
            raise ValidationError(
                f"eccentricity must be in (0,1], got {self.eccentricity}"
            )
        if not (self.scale > 0 and np.isfinite(self.scale)):
            raise ValidationError(f"scale must be finite and > 0, got {self.scale}")
        if not (0.0 <= self.angle < 180.0):
            raise ValidationError(f"angle must be in [0,180), got {self.angle}")


@dataclass
class SourceModel:
    """Variational state of one catalog entry.

    Position and shape are point estimates; ``q_star`` is the variational
    Bernoulli parameter for the source type; the brightness and color
    parameters are kept per type hypothesis (row 0 star, row 1 galaxy).
    """

    position: tuple[float, float]
    shape: GalaxyShape
    q_star: float
    q_logflux_mean: np.ndarray  # shape (2,)
    q_logflux_sd: np.ndarray  # shape (2,), > 0
    q_color_mean: np.ndarray  # shape (2, 4)
    q_color_sd: np.ndarray  # shape (2, 4), > 0

    def validate(self) -> None:
        if not 0.0 <= self.q_star <= 1.0:
            raise ValidationError(f"q_star must be in [0,1], got {self.q_star}")
        if not _finite(*self.position):
            raise ValidationError("position must be finite")
        self.shape.validate()
        lf_m = np.asarray(self.q_logflux_mean, dtype=float)
        lf_s = np.asarray(self.q_logflux_sd, dtype=float)
        c_m = np.asarray(self.q_color_mean, dtype=float)
        c_s = np.asarray(self.q_color_sd, dtype=float)
        if lf_m.shape != (2,) or lf_s.shape != (2,):
            raise ValidationError("log-flux parameters must have shape (2,)")
        if c_m.shape != (2, 4) or c_s.shape != (2, 4):
            raise ValidationError("color parameters must have shape (2, 4)")
        for arr in (lf_m, lf_s, c_m, c_s):
            if not np.all(np.isfinite(arr)):
                raise ValidationError("variational parameters must be finite")
        if np.any(lf_s <= 0) or np.any(c_s <= 0):
            raise ValidationError("variational sds must be > 0")

    def copy(self) -> "SourceModel":
        return SourceModel(
            position=tuple(self.position),
            shape=self.shape,
            q_star=self.q_star,
            q_logflux_mean=np.array(self.q_logflux_mean, dtype=float),
            q_logflux_sd=np.array(self.q_logflux_sd, dtype=float),
            q_color_mean=np.array(self.q_color_mean, dtype=float),
            q_color_sd=np.array(self.q_color_sd, dtype=float),
        )


@dataclass(frozen=True)
class Objective:
    """Value, gradient, and dense symmetric Hessian of a block objective."""

    value: float
    gradient: np.ndarray
    hessian: np.ndarray
