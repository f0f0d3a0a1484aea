"""Analytic flux moments and KL divergence terms of the variational family.

Under the variational family, a source's log reference-band flux is normal
and its colors are independent normals (per type hypothesis), so the
per-band flux ``f_b = exp(log r + w_b . c)`` is log-normal with location
``lam = m + w_b . mc`` and squared scale ``s2 = sd_r^2 + sum w^2 sd_c^2``.
Its first two moments, and their exact derivatives with respect to the
unconstrained 10-parameter per-type flux block
``[m, log sd_r, mc(4), log sd_c(4)]``, follow in closed form.
"""

from __future__ import annotations

import numpy as np

from .types import COLOR_WEIGHTS

BLOCK = 10  # per-type flux block length


def flux_moment_values(
    lf_mean: float, lf_sd: float, c_mean: np.ndarray, c_sd: np.ndarray, band: int
) -> tuple[float, float]:
    """(E f_b, E f_b^2) for one type hypothesis, plain values."""
    w = COLOR_WEIGHTS[band]
    lam = lf_mean + w @ c_mean
    s2 = lf_sd * lf_sd + (w * w) @ (c_sd * c_sd)
    return float(np.exp(lam + 0.5 * s2)), float(np.exp(2.0 * lam + 2.0 * s2))


def flux_moment_derivs(block: np.ndarray, band: int):
    """Moments plus derivatives over one unconstrained 10-parameter block.

    ``block`` is ``[m, log sd_r, mc0..3, log sd_c0..3]``.  Returns
    ``(m1, dm1, hm1, m2, dm2, hm2)`` with gradient/Hessian shapes (10,) and
    (10, 10).
    """
    w = COLOR_WEIGHTS[band]
    m, ls = block[0], block[1]
    mc = block[2:6]
    lsc = block[6:10]

    e2ls = np.exp(2.0 * ls)
    e2lsc = np.exp(2.0 * lsc)
    lam = m + w @ mc
    s2 = e2ls + (w * w) @ e2lsc

    lam_p = np.zeros(BLOCK)
    lam_p[0] = 1.0
    lam_p[2:6] = w
    s2_p = np.zeros(BLOCK)
    s2_p[1] = 2.0 * e2ls
    s2_p[6:10] = 2.0 * (w * w) * e2lsc
    s2_pp = np.zeros(BLOCK)  # diagonal of the second derivative
    s2_pp[1] = 4.0 * e2ls
    s2_pp[6:10] = 4.0 * (w * w) * e2lsc

    m1 = np.exp(lam + 0.5 * s2)
    g1 = lam_p + 0.5 * s2_p
    hm1 = m1 * (np.outer(g1, g1) + np.diag(0.5 * s2_pp))
    dm1 = m1 * g1

    m2 = np.exp(2.0 * lam + 2.0 * s2)
    g2 = 2.0 * lam_p + 2.0 * s2_p
    hm2 = m2 * (np.outer(g2, g2) + np.diag(2.0 * s2_pp))
    dm2 = m2 * g2
    return float(m1), dm1, hm1, float(m2), dm2, hm2


def kl_bernoulli(q: float, phi: float):
    """KL(Bern(q) || Bern(phi)) with derivatives in probability space."""
    q = float(q)
    val = 0.0
    if q > 0.0:
        val += q * (np.log(q) - np.log(phi))
    if q < 1.0:
        val += (1.0 - q) * (np.log1p(-q) - np.log1p(-phi))
    d1 = (np.log(q) - np.log1p(-q)) - (np.log(phi) - np.log1p(-phi))
    d2 = 1.0 / (q * (1.0 - q))
    return float(val), float(d1), float(d2)


def kl_normal(m: float, ls: float, mu0: float, sd0: float):
    """KL(N(m, e^{2 ls}) || N(mu0, sd0^2)) over the (m, log sd) pair."""
    e2ls = np.exp(2.0 * ls)
    v0 = sd0 * sd0
    val = np.log(sd0) - ls + 0.5 * (e2ls + (m - mu0) ** 2) / v0 - 0.5
    grad = np.array([(m - mu0) / v0, -1.0 + e2ls / v0])
    hess = np.diag([1.0 / v0, 2.0 * e2ls / v0])
    return float(val), grad, hess


def kl_diag_vs_full(mc: np.ndarray, lsc: np.ndarray, mu: np.ndarray, prec: np.ndarray, logdet: float):
    """KL(N(mc, diag(e^{2 lsc})) || N(mu, Sigma)) over (mc(4), lsc(4)).

    ``prec`` is the prior precision matrix and ``logdet`` the prior
    covariance log-determinant.
    """
    e2 = np.exp(2.0 * lsc)
    delta = mc - mu
    pd = prec @ delta
    val = 0.5 * (logdet - 2.0 * np.sum(lsc) + np.diag(prec) @ e2 + delta @ pd - 4.0)
    grad = np.concatenate([pd, -1.0 + np.diag(prec) * e2])
    hess = np.zeros((8, 8))
    hess[:4, :4] = prec
    hess[4:, 4:] = np.diag(2.0 * np.diag(prec) * e2)
    return float(val), grad, hess


def kl_type_block(block: np.ndarray, lf_mu: float, lf_sd: float, c_mu: np.ndarray, c_prec: np.ndarray, c_logdet: float):
    """KL of one type hypothesis's brightness and colors vs the priors,
    over the 10-parameter block; returns (value, grad(10), hess(10, 10))."""
    v_r, g_r, h_r = kl_normal(block[0], block[1], lf_mu, lf_sd)
    v_c, g_c, h_c = kl_diag_vs_full(block[2:6], block[6:10], c_mu, c_prec, c_logdet)
    grad = np.concatenate([g_r, g_c])
    hess = np.zeros((BLOCK, BLOCK))
    hess[:2, :2] = h_r
    hess[2:, 2:] = h_c
    return v_r + v_c, grad, hess
