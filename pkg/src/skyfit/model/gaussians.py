"""Bivariate Gaussian kernels with exact first and second derivatives.

These are the geometric building blocks of the pixel rate model: the star
kernel is an isotropic Gaussian in the source-to-pixel offset, and each
galaxy mixture component is a general-covariance Gaussian whose covariance
is an affine function of the source shape.  Everything here is evaluated
per pixel for arrays of offsets, returning value, gradient, and Hessian
with respect to the relevant unconstrained source parameters.

Parameter orderings used below:

* star geometry:   (pos_x, pos_y) in sky units;
* galaxy geometry: (pos_x, pos_y, mix_logit, ecc_logit, log_scale, angle_deg).

Offsets are measured in pixels, so position derivatives carry a factor of
1/pixel_scale per differentiation.
"""

from __future__ import annotations

import numpy as np

from . import profiles
from .params import sigmoid, sigmoid_d1, sigmoid_d2

_DEG = np.pi / 180.0


def isotropic_kernel(dx: np.ndarray, dy: np.ndarray, sigma2: float, inv_ps: float):
    """Isotropic Gaussian density at pixel offsets, with position derivatives.

    Returns ``(g, grad, hess)`` where ``g`` has shape (n,), ``grad`` (n, 2)
    and ``hess`` (n, 2, 2), derivatives taken w.r.t. the sky position.
    """
    dx = np.asarray(dx, dtype=float)
    dy = np.asarray(dy, dtype=float)
    r2 = dx * dx + dy * dy
    g = np.exp(-0.5 * r2 / sigma2) / (2.0 * np.pi * sigma2)
    ux = -dx / sigma2 * inv_ps
    uy = -dy / sigma2 * inv_ps
    grad = np.stack([g * ux, g * uy], axis=-1)
    hess = np.empty(g.shape + (2, 2))
    c = inv_ps * inv_ps / sigma2
    hess[..., 0, 0] = g * (ux * ux - c)
    hess[..., 1, 1] = g * (uy * uy - c)
    hess[..., 0, 1] = g * ux * uy
    hess[..., 1, 0] = hess[..., 0, 1]
    return g, grad, hess


def shape_cov(ecc_logit: float, log_scale: float, angle_deg: float):
    """Elliptical shape matrix S and its derivatives.

    S = R(angle) diag(scale^2, (ecc*scale)^2) R(angle)^T, packed as the
    triple (S00, S01, S11).  Returns ``(S, J, H)`` with J of shape (3, 3)
    over the parameters (ecc_logit, log_scale, angle_deg) and H of shape
    (3, 3, 3) giving each component's second-derivative matrix.
    """
    e = sigmoid(ecc_logit)
    de = sigmoid_d1(e)  # dE/decc chain pieces below
    d2e = sigmoid_d2(e)
    E = e * e
    dE = 2.0 * e * de
    d2E = 2.0 * (de * de + e * d2e)
    r2 = np.exp(2.0 * log_scale)
    phi = angle_deg * _DEG
    c2 = np.cos(2.0 * phi)
    s2 = np.sin(2.0 * phi)
    alpha = 0.5 * (1.0 + E)
    beta = 0.5 * (1.0 - E)

    S = np.array([r2 * (alpha + beta * c2), r2 * beta * s2, r2 * (alpha - beta * c2)])

    # Partials with respect to E and to the raw angle (degrees).
    S_E = np.array([0.5 * r2 * (1.0 - c2), -0.5 * r2 * s2, 0.5 * r2 * (1.0 + c2)])
    S_d = np.array(
        [-2.0 * r2 * beta * s2 * _DEG, 2.0 * r2 * beta * c2 * _DEG, 2.0 * r2 * beta * s2 * _DEG]
    )
    S_Ed = np.array([r2 * s2 * _DEG, -r2 * c2 * _DEG, -r2 * s2 * _DEG])
    S_dd = np.array(
        [
            -4.0 * r2 * beta * c2 * _DEG * _DEG,
            -4.0 * r2 * beta * s2 * _DEG * _DEG,
            4.0 * r2 * beta * c2 * _DEG * _DEG,
        ]
    )

    J = np.empty((3, 3))
    J[:, 0] = S_E * dE
    J[:, 1] = 2.0 * S
    J[:, 2] = S_d

    H = np.empty((3, 3, 3))
    H[:, 0, 0] = S_E * d2E
    H[:, 0, 1] = H[:, 1, 0] = 2.0 * S_E * dE
    H[:, 0, 2] = H[:, 2, 0] = S_Ed * dE
    H[:, 1, 1] = 4.0 * S
    H[:, 1, 2] = H[:, 2, 1] = 2.0 * S_d
    H[:, 2, 2] = S_dd
    return S, J, H


def general_kernel(dx: np.ndarray, dy: np.ndarray, cov: np.ndarray):
    """General-covariance Gaussian at pixel offsets with full derivatives.

    ``cov`` is the packed covariance (c00, c01, c11).  Returns
    ``(g, grad, hess)`` over the five quantities (dx, dy, c00, c01, c11):
    shapes (n,), (n, 5), (n, 5, 5).
    """
    a, b, c = float(cov[0]), float(cov[1]), float(cov[2])
    det = a * c - b * b
    if not det > 0:
        # Overflowed or degenerate covariance: report NaN so the caller's
        # trust-region loop rejects the trial point.
        n = np.shape(dx)
        return np.full(n, np.nan), np.full(n + (5,), np.nan), np.full(n + (5, 5), np.nan)
    p00, p01, p11 = c / det, -b / det, a / det
    dx = np.asarray(dx, dtype=float)
    dy = np.asarray(dy, dtype=float)
    z0 = p00 * dx + p01 * dy
    z1 = p01 * dx + p11 * dy
    quad = dx * z0 + dy * z1
    g = np.exp(-0.5 * quad) / (2.0 * np.pi * np.sqrt(det))

    gl = np.empty(dx.shape + (5,))
    gl[..., 0] = -z0
    gl[..., 1] = -z1
    gl[..., 2] = 0.5 * (z0 * z0 - p00)
    gl[..., 3] = z0 * z1 - p01
    gl[..., 4] = 0.5 * (z1 * z1 - p11)

    hl = np.empty(dx.shape + (5, 5))
    hl[..., 0, 0] = -p00
    hl[..., 0, 1] = -p01
    hl[..., 1, 1] = -p11
    hl[..., 0, 2] = z0 * p00
    hl[..., 1, 2] = z0 * p01
    hl[..., 0, 3] = z1 * p00 + z0 * p01
    hl[..., 1, 3] = z1 * p01 + z0 * p11
    hl[..., 0, 4] = z1 * p01
    hl[..., 1, 4] = z1 * p11
    hl[..., 2, 2] = 0.5 * p00 * p00 - p00 * z0 * z0
    hl[..., 2, 3] = p00 * p01 - z0 * (p00 * z1 + p01 * z0)
    hl[..., 2, 4] = 0.5 * p01 * p01 - p01 * z0 * z1
    hl[..., 3, 3] = p01 * p01 + p00 * p11 - p00 * z1 * z1 - 2.0 * p01 * z0 * z1 - p11 * z0 * z0
    hl[..., 3, 4] = p01 * p11 - p01 * z1 * z1 - p11 * z0 * z1
    hl[..., 4, 4] = 0.5 * p11 * p11 - p11 * z1 * z1
    for i in range(5):
        for j in range(i):
            hl[..., i, j] = hl[..., j, i]

    grad = g[..., None] * gl
    hess = g[..., None, None] * (gl[..., :, None] * gl[..., None, :] + hl)
    return g, grad, hess


def galaxy_kernel(
    dx: np.ndarray,
    dy: np.ndarray,
    mix_logit: float,
    ecc_logit: float,
    log_scale: float,
    angle_deg: float,
    psf_sigma2: float,
    inv_ps: float,
):
    """Galaxy spatial kernel: profile mixture convolved with the PSF.

    Evaluates sum_k w_k(mix) N(offset; v_k S(shape) + psf_sigma2 I) at the
    pixel offsets, together with gradient and Hessian over the six galaxy
    geometry parameters (pos_x, pos_y, mix_logit, ecc_logit, log_scale,
    angle_deg).  Returns ``(g, grad, hess)`` of shapes (n,), (n, 6),
    (n, 6, 6).
    """
    dx = np.asarray(dx, dtype=float)
    dy = np.asarray(dy, dtype=float)
    n = dx.shape
    S, JS, HS = shape_cov(ecc_logit, log_scale, angle_deg)
    m = sigmoid(mix_logit)
    dm = sigmoid_d1(m)
    d2m = sigmoid_d2(m)

    g = np.zeros(n)
    grad = np.zeros(n + (6,))
    hess = np.zeros(n + (6, 6))
    eye_cov = np.array([psf_sigma2, 0.0, psf_sigma2])

    for k in range(profiles.N_COMPONENTS):
        v = profiles.MIX_VARS[k]
        base = profiles.MIX_BASE_WEIGHTS[k]
        if profiles.MIX_SIGN[k] > 0:
            w, w1, w2 = base * m, base * dm, base * d2m
        else:
            w, w1, w2 = base * (1.0 - m), -base * dm, -base * d2m

        cov = v * S + eye_cov
        nk, gk, hk = general_kernel(dx, dy, cov)

        # Chain from (dx, dy, c00, c01, c11) to the geometry parameters.
        # Positions enter the offsets linearly with slope inv_ps; shape
        # parameters enter the covariance through v * S.
        JSv = v * JS  # (3 cov comps, 3 shape params)
        g_pos = gk[..., 0:2] * inv_ps
        g_cov = gk[..., 2:5]
        g_shape = g_cov @ JSv

        g += w * nk
        grad[..., 0:2] += w * g_pos
        grad[..., 2] += w1 * nk
        grad[..., 3:6] += w * g_shape

        h_pp = hk[..., 0:2, 0:2] * (inv_ps * inv_ps)
        h_pc = hk[..., 0:2, 2:5]
        h_cc = hk[..., 2:5, 2:5]
        h_ps = (h_pc @ JSv) * inv_ps
        h_ss = np.einsum("...ab,ai,bj->...ij", h_cc, JSv, JSv)
        h_ss += np.einsum("...a,aij->...ij", g_cov, v * HS)

        hess[..., 0:2, 0:2] += w * h_pp
        hess[..., 0:2, 3:6] += w * h_ps
        hess[..., 3:6, 0:2] += w * np.swapaxes(h_ps, -1, -2)
        hess[..., 3:6, 3:6] += w * h_ss
        hess[..., 2, 2] += w2 * nk
        hess[..., 2, 0:2] += w1 * g_pos
        hess[..., 0:2, 2] += w1 * g_pos
        hess[..., 2, 3:6] += w1 * g_shape
        hess[..., 3:6, 2] += w1 * g_shape
    return g, grad, hess
