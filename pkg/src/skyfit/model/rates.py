"""Expected pixel rates, source footprints, and fixed-source contributions.

The rate model: pixel (ix, iy) of an image in band b has expected photon
count ``F = background + sum_s contrib_s`` where a source's contribution is
``q_star * f_star_b * G_star + (1 - q_star) * f_gal_b * G_gal``.  ``G_star``
is the PSF density at the pixel center and ``G_gal`` the galaxy profile
mixture convolved with the PSF, both per unit pixel area.  Rates are point
evaluations at pixel centers (adequate for psf_sigma >= 0.8 px).

Two flux readings of a :class:`SourceModel` appear below and are used in
different roles:

* *point* fluxes ``exp(q_logflux_mean)`` treat the variational location as
  a point estimate; they define :func:`expected_rate` (used to render
  synthetic skies from truth configurations);
* *moment* fluxes ``E_q[f]``/``E_q[f^2]`` are the analytic expectations
  under q; they define the contribution of fixed neighbor sources inside
  the variational objective (see :mod:`skyfit.model.elbo`).

A source's *footprint* on an image is the set of pixels within radius
``multiplier * (psf_sigma + scale)`` of its center (plus, always, the pixel
containing the center).  Footprints truncate each source's influence in the
objective and define the unit of work accounting: one objective evaluation
visits each footprint pixel once.
"""

from __future__ import annotations

import numpy as np

from ..errors import BoundsError, ValidationError
from . import moments, profiles
from .types import COLOR_WEIGHTS, ImageMeta, ImagePatch, SourceModel

DEFAULT_RADIUS_MULTIPLIER = 4.0


def footprint_radius_px(source: SourceModel, meta: ImageMeta, multiplier: float) -> float:
    return multiplier * (meta.psf_sigma + source.shape.scale)


def disc_pixels(
    meta: ImageMeta, position: tuple[float, float], radius_px: float
) -> tuple[np.ndarray, np.ndarray]:
    """Pixels (iy, ix arrays, row-major order) whose centers lie within
    ``radius_px`` of the sky position, plus the pixel containing it."""
    cx, cy = meta.sky_to_pixel(*position)
    r = max(float(radius_px), 0.0)
    x0 = max(int(np.floor(cx - r - 1)), 0)
    x1 = min(int(np.ceil(cx + r + 1)), meta.width - 1)
    y0 = max(int(np.floor(cy - r - 1)), 0)
    y1 = min(int(np.ceil(cy + r + 1)), meta.height - 1)
    if x0 > x1 or y0 > y1:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    xs = np.arange(x0, x1 + 1)
    ys = np.arange(y0, y1 + 1)
    dx = cx - xs
    dy = cy - ys
    mask = (dy * dy)[:, None] + (dx * dx)[None, :] <= r * r
    # The containing pixel is always in the footprint, even at radius 0.
    mask |= (np.abs(dy) <= 0.5)[:, None] & (np.abs(dx) <= 0.5)[None, :]
    iy, ix = np.nonzero(mask)
    return ys[iy], xs[ix]


def footprint_mask(dx: np.ndarray, dy: np.ndarray, radius_px: float) -> np.ndarray:
    """Same membership rule as :func:`disc_pixels`, on offset arrays."""
    r2 = dx * dx + dy * dy
    return (r2 <= radius_px * radius_px) | ((np.abs(dx) <= 0.5) & (np.abs(dy) <= 0.5))


def active_pixels(
    source: SourceModel,
    patch: ImagePatch | ImageMeta,
    multiplier: float = DEFAULT_RADIUS_MULTIPLIER,
) -> tuple[np.ndarray, np.ndarray]:
    """Footprint of a source on an image: (iy, ix) index arrays."""
    meta = patch.meta if isinstance(patch, ImagePatch) else patch
    return disc_pixels(meta, source.position, footprint_radius_px(source, meta, multiplier))


def count_disc_pixels(meta: ImageMeta, position: tuple[float, float], radius_px: float) -> int:
    """len(disc_pixels(...)) without materializing the index arrays."""
    ys, _ = disc_pixels(meta, position, radius_px)
    return int(ys.size)


def point_band_fluxes(source: SourceModel) -> np.ndarray:
    """Per-type, per-band point fluxes exp(m_t + w_b . c_t); shape (2, 5)."""
    lf = np.asarray(source.q_logflux_mean)[:, None]
    return np.exp(lf + source.q_color_mean @ COLOR_WEIGHTS.T)


def _shape_matrix_values(shape) -> np.ndarray:
    """Packed (S00, S01, S11) for a GalaxyShape, without derivatives."""
    e2 = shape.eccentricity * shape.eccentricity
    r2 = shape.scale * shape.scale
    phi = np.deg2rad(shape.angle)
    c2, s2 = np.cos(2 * phi), np.sin(2 * phi)
    alpha, beta = 0.5 * (1 + e2), 0.5 * (1 - e2)
    return r2 * np.array([alpha + beta * c2, beta * s2, alpha - beta * c2])


def source_kernels(
    source: SourceModel, meta: ImageMeta, dx: np.ndarray, dy: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """(G_star, G_gal) values at offsets; no eccentricity clamping."""
    s2 = meta.psf_sigma * meta.psf_sigma
    gs = np.exp(-0.5 * (dx * dx + dy * dy) / s2) / (2.0 * np.pi * s2)
    S = _shape_matrix_values(source.shape)
    weights = profiles.component_weights(source.shape.profile_mix)
    gg = np.zeros_like(gs)
    for k in range(profiles.N_COMPONENTS):
        v = profiles.MIX_VARS[k]
        a = v * S[0] + s2
        b = v * S[1]
        c = v * S[2] + s2
        det = a * c - b * b
        quad = (c * dx * dx - 2.0 * b * dx * dy + a * dy * dy) / det
        gg += weights[k] / (2.0 * np.pi * np.sqrt(det)) * np.exp(-0.5 * quad)
    return gs, gg


def source_point_rate(
    source: SourceModel, meta: ImageMeta, dx: np.ndarray, dy: np.ndarray
) -> np.ndarray:
    """Point-flux contribution of one source at pixel offsets."""
    gs, gg = source_kernels(source, meta, dx, dy)
    fluxes = point_band_fluxes(source)
    q = source.q_star
    return q * fluxes[0, meta.band] * gs + (1.0 - q) * fluxes[1, meta.band] * gg


def source_moment_rate(
    source: SourceModel, meta: ImageMeta, dx: np.ndarray, dy: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """(mean, variance) of one source's contribution under its own q."""
    gs, gg = source_kernels(source, meta, dx, dy)
    m1s, m2s = moments.flux_moment_values(
        source.q_logflux_mean[0], source.q_logflux_sd[0],
        source.q_color_mean[0], source.q_color_sd[0], meta.band,
    )
    m1g, m2g = moments.flux_moment_values(
        source.q_logflux_mean[1], source.q_logflux_sd[1],
        source.q_color_mean[1], source.q_color_sd[1], meta.band,
    )
    q = source.q_star
    mean = q * m1s * gs + (1.0 - q) * m1g * gg
    second = q * m2s * gs * gs + (1.0 - q) * m2g * gg * gg
    return mean, second - mean * mean


def expected_rate(
    sources: list[SourceModel], pixel: tuple[int, int], meta: ImageMeta
) -> float:
    """Expected photon rate F at one pixel for point source configurations.

    ``pixel`` is an (ix, iy) index pair.  The sum over sources is not
    truncated by footprints.
    """
    meta.validate()
    ix, iy = int(pixel[0]), int(pixel[1])
    if not (0 <= ix < meta.width and 0 <= iy < meta.height):
        raise BoundsError(f"pixel {pixel} outside {meta.width}x{meta.height} image")
    total = meta.background
    for s in sources:
        s.validate()
        cx, cy = meta.sky_to_pixel(*s.position)
        contrib = source_point_rate(s, meta, np.array([cx - ix]), np.array([cy - iy]))
        if not np.isfinite(contrib[0]):
            raise ValidationError("non-finite source contribution")
        total += float(contrib[0])
    return total


def rate_image(
    sources: list[SourceModel],
    meta: ImageMeta,
    cutoff_multiplier: float = 9.0,
) -> np.ndarray:
    """Full-image expected rate map for point configurations.

    Each source is accumulated only within ``cutoff_multiplier *
    (psf_sigma + scale)`` of its center, where the neglected tail is below
    1e-15 of the source flux.
    """
    img = np.full((meta.height, meta.width), float(meta.background))
    for s in sources:
        ys, xs = disc_pixels(
            meta, s.position, footprint_radius_px(s, meta, cutoff_multiplier)
        )
        if ys.size == 0:
            continue
        cx, cy = meta.sky_to_pixel(*s.position)
        img[ys, xs] += source_point_rate(s, meta, cx - xs, cy - ys)
    return img
