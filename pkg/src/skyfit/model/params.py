"""Free-parameter vector for one source's block of the objective.

Each source is optimized over an unconstrained vector of length
``NUM_PARAMS`` = 27.  Bounded quantities are mapped through smooth
reparameterizations (log for positive quantities, logit for proportions) so
the block optimizer never sees a constraint.  The ordering is fixed:

====== ============================================ =========
index  meaning                                      transform
====== ============================================ =========
0      q_star                                       logit
1      star log-flux mean                           identity
2      star log-flux sd                             log
3      galaxy log-flux mean                         identity
4      galaxy log-flux sd                           log
5-8    star color means (4)                         identity
9-12   star color sds (4)                           log
13-16  galaxy color means (4)                       identity
17-20  galaxy color sds (4)                         log
21-22  position x, y (sky units)                    identity
23     profile mix (0=exponential, 1=deV)           logit
24     eccentricity (minor/major ratio)             logit
25     scale (effective radius, px)                 log(scale - SCALE_FLOOR)
26     angle (degrees; folded mod 180 on decode)    identity
====== ============================================ =========

The angle coordinate is left unconstrained because the objective is
periodic in it; it is reduced to [0, 180) only when a vector is decoded
back into a :class:`SourceModel`.

The galaxy effective radius is bounded below by ``SCALE_FLOOR`` in this
parameterization (scale = SCALE_FLOOR + exp(theta)).  Without the floor
the galaxy hypothesis at scale -> 0 reproduces the PSF exactly, making the
star/galaxy types unidentifiable for point sources; the floor keeps the
two hypotheses distinguishable while staying well below any plausible
galaxy radius.  Scales at or below the floor snap to just above it when
encoded.
"""

from __future__ import annotations

import numpy as np

from .types import GalaxyShape, SourceModel

NUM_PARAMS = 27

# Index blocks, in vector order.
I_QSTAR = 0
I_FLUX = {0: np.array([1, 2]), 1: np.array([3, 4])}  # (mean, log sd) per type
I_COLOR_MEAN = {0: np.arange(5, 9), 1: np.arange(13, 17)}
I_COLOR_SD = {0: np.arange(9, 13), 1: np.arange(17, 21)}
I_POS = np.array([21, 22])
I_MIX = 23
I_ECC = 24
I_LOGSCALE = 25
I_ANGLE = 26

# Per type: [logflux_mean, log logflux_sd, color_mean x4, log color_sd x4].
I_FLUXBLOCK = {
    t: np.concatenate([I_FLUX[t], I_COLOR_MEAN[t], I_COLOR_SD[t]]) for t in (0, 1)
}
# Galaxy geometry block: position, mix logit, eccentricity logit, log scale, angle.
I_GEO = np.array([21, 22, 23, 24, 25, 26])

# Probabilities are clamped into this open interval before logit so that
# exactly-0/1 inputs encode to finite coordinates.
_P_EPS = 1e-9

# Lower bound on the galaxy effective radius, in pixels.
SCALE_FLOOR = 0.5


def sigmoid(u: float | np.ndarray):
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    pos = u >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-u[pos]))
    eu = np.exp(u[~pos])
    out[~pos] = eu / (1.0 + eu)
    return out if out.ndim else float(out)


def logit(p: float | np.ndarray):
    p = np.clip(np.asarray(p, dtype=float), _P_EPS, 1.0 - _P_EPS)
    out = np.log(p) - np.log1p(-p)
    return out if out.ndim else float(out)


def sigmoid_d1(q):
    """First derivative of sigmoid w.r.t. its argument, expressed via q."""
    return q * (1.0 - q)


def sigmoid_d2(q):
    return q * (1.0 - q) * (1.0 - 2.0 * q)


def encode(source: SourceModel) -> np.ndarray:
    """Pack a SourceModel into the unconstrained 27-vector."""
    th = np.empty(NUM_PARAMS)
    th[I_QSTAR] = logit(source.q_star)
    for t in (0, 1):
        th[I_FLUX[t][0]] = source.q_logflux_mean[t]
        th[I_FLUX[t][1]] = np.log(source.q_logflux_sd[t])
        th[I_COLOR_MEAN[t]] = source.q_color_mean[t]
        th[I_COLOR_SD[t]] = np.log(source.q_color_sd[t])
    th[I_POS] = source.position
    th[I_MIX] = logit(source.shape.profile_mix)
    th[I_ECC] = logit(source.shape.eccentricity)
    th[I_LOGSCALE] = np.log(source.shape.scale)
    th[I_ANGLE] = source.shape.angle
    return th


def decode(theta: np.ndarray) -> SourceModel:
    """Unpack the 27-vector back into a SourceModel (angle folded mod 180)."""
    th = np.asarray(theta, dtype=float)
    shape = GalaxyShape(
        profile_mix=float(sigmoid(th[I_MIX])),
        eccentricity=float(sigmoid(th[I_ECC])),
        scale=float(np.exp(th[I_LOGSCALE])),
        angle=float(np.mod(th[I_ANGLE], 180.0)),
    )
    return SourceModel(
        position=(float(th[I_POS[0]]), float(th[I_POS[1]])),
        shape=shape,
        q_star=float(sigmoid(th[I_QSTAR])),
        q_logflux_mean=np.array([th[I_FLUX[0][0]], th[I_FLUX[1][0]]]),
        q_logflux_sd=np.exp([th[I_FLUX[0][1]], th[I_FLUX[1][1]]]),
        q_color_mean=np.stack([th[I_COLOR_MEAN[0]], th[I_COLOR_MEAN[1]]]),
        q_color_sd=np.exp(np.stack([th[I_COLOR_SD[0]], th[I_COLOR_SD[1]]])),
    )
