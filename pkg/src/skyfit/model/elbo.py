"""The variational objective for one source's block, with exact derivatives.

For the active source the objective is

    sum over footprint pixels of  x * Elog(F) - E(F)   -   KL(q || priors)

where ``E(F)`` is the exact expectation of the pixel rate under the
variational family and ``Elog(F)`` is the second-order surrogate
``log E(F) - Var(F) / (2 E(F)^2)`` for the intractable expected log rate.
Additive constants independent of the block parameters (the log x! terms
and all pixels outside the active source's footprint) are dropped.

Fixed sources contribute their mean *and* variance to ``E(F)``/``Var(F)``,
truncated to their own footprints.  With that convention the block
objective is exactly the restriction of the joint task objective
(:func:`sky_objective`) to one source's parameters, which makes block
coordinate ascent monotone in the joint objective and lets non-adjacent
sources be optimized concurrently without changing any result.

KL terms: the Bernoulli type KL plus, for each type hypothesis, the
type-conditional brightness and color KLs weighted by q_star and
1 - q_star.  Gradients and Hessians are assembled in closed form over the
27-parameter unconstrained block; see :mod:`skyfit.model.params` for the
layout.
"""

from __future__ import annotations

import numpy as np

from ..errors import ValidationError
from . import gaussians, moments, rates
from .params import (
    I_FLUXBLOCK,
    I_GEO,
    I_POS,
    I_QSTAR,
    NUM_PARAMS,
    encode,
    sigmoid,
    sigmoid_d1,
    sigmoid_d2,
)
from .types import ImageMeta, ImagePatch, Objective, Priors, SourceModel

_BS = I_FLUXBLOCK[0]
_BG = I_FLUXBLOCK[1]


def _color_prior_terms(priors: Priors) -> tuple[np.ndarray, float]:
    cov = np.asarray(priors.color_cov, dtype=float)
    prec = np.linalg.inv(cov)
    _, logdet = np.linalg.slogdet(cov)
    return prec, float(logdet)


def _kl_terms(theta: np.ndarray, priors: Priors, prec: np.ndarray, logdet: float):
    """(value, grad, hess) of KL(q || priors) over the 27-vector."""
    u = theta[I_QSTAR]
    q = sigmoid(u)
    dq = sigmoid_d1(q)
    d2q = sigmoid_d2(q)
    kl_a, kl_a1, kl_a2 = moments.kl_bernoulli(q, priors.star_prob)

    per_type = {}
    for t, idx in ((0, _BS), (1, _BG)):
        per_type[t] = moments.kl_type_block(
            theta[idx],
            priors.log_flux_mean,
            priors.log_flux_sd,
            np.asarray(priors.color_mean, dtype=float),
            prec,
            logdet,
        )
    ks, gks, hks = per_type[0]
    kg, gkg, hkg = per_type[1]

    value = kl_a + q * ks + (1.0 - q) * kg
    grad = np.zeros(NUM_PARAMS)
    grad[I_QSTAR] = (kl_a1 + ks - kg) * dq
    grad[_BS] = q * gks
    grad[_BG] = (1.0 - q) * gkg

    hess = np.zeros((NUM_PARAMS, NUM_PARAMS))
    hess[I_QSTAR, I_QSTAR] = kl_a2 * dq * dq + (kl_a1 + ks - kg) * d2q
    hess[I_QSTAR, _BS] = dq * gks
    hess[_BS, I_QSTAR] = dq * gks
    hess[I_QSTAR, _BG] = -dq * gkg
    hess[_BG, I_QSTAR] = -dq * gkg
    hess[np.ix_(_BS, _BS)] = q * hks
    hess[np.ix_(_BG, _BG)] = (1.0 - q) * hkg
    return value, grad, hess


class _PatchBlock:
    """Per-patch data frozen at objective construction."""

    __slots__ = ("meta", "xs", "ys", "counts", "base_mean", "base_var")

    def __init__(self, meta: ImageMeta, ys, xs, counts, base_mean, base_var):
        self.meta = meta
        self.ys = ys
        self.xs = xs
        self.counts = counts
        self.base_mean = base_mean
        self.base_var = base_var


def _compute_footprints(sources, patches, multiplier):
    return [
        [rates.active_pixels(s, p, multiplier) for p in patches] for s in sources
    ]


def _fixed_context(sources, patches, active, footprints):
    """Per-patch blocks with fixed-source means/variances accumulated."""
    blocks = []
    for ip, patch in enumerate(patches):
        meta = patch.meta
        ys, xs = footprints[active][ip]
        counts = patch.pixels[ys, xs].astype(float) if ys.size else np.empty(0)
        base_mean = np.full(ys.shape, float(meta.background))
        base_var = np.zeros(ys.shape)
        if ys.size:
            flat = ys * meta.width + xs
            for j, src in enumerate(sources):
                if j == active:
                    continue
                jys, jxs = footprints[j][ip]
                if jys.size == 0:
                    continue
                member = np.isin(flat, jys * meta.width + jxs)
                if not member.any():
                    continue
                cx, cy = meta.sky_to_pixel(*src.position)
                mean, var = rates.source_moment_rate(
                    src, meta, cx - xs[member], cy - ys[member]
                )
                base_mean[member] += mean
                base_var[member] += var
        blocks.append(_PatchBlock(meta, ys, xs, counts, base_mean, base_var))
    return blocks


def _sym(mat: np.ndarray) -> np.ndarray:
    return 0.5 * (mat + mat.T)


class BlockObjective:
    """Callable objective for one source's block; counts pixel visits.

    Footprints and fixed-source contributions are frozen at construction,
    so the callable is smooth in the block parameters.  ``n_evals`` and
    ``pixel_visits`` track work for the run accounting.
    """

    def __init__(
        self,
        sources: list[SourceModel],
        patches: list[ImagePatch],
        priors: Priors,
        active: int,
        multiplier: float = rates.DEFAULT_RADIUS_MULTIPLIER,
        footprints=None,
    ):
        if not patches:
            raise ValidationError("at least one image patch is required")
        if not 0 <= active < len(sources):
            raise ValidationError(f"active index {active} out of range")
        priors.validate()
        for s in sources:
            s.validate()
        for p in patches:
            p.validate()
        if footprints is None:
            footprints = _compute_footprints(sources, patches, multiplier)
        self.blocks = _fixed_context(sources, patches, active, footprints)
        self.priors = priors
        self._prec, self._logdet = _color_prior_terms(priors)
        self.x0 = encode(sources[active])
        self.pixels_per_eval = int(sum(b.ys.size for b in self.blocks))
        self.n_evals = 0
        self.pixel_visits = 0

    def __call__(self, theta: np.ndarray) -> Objective:
        theta = np.asarray(theta, dtype=float)
        self.n_evals += 1
        self.pixel_visits += self.pixels_per_eval

        kl_val, kl_grad, kl_hess = _kl_terms(theta, self.priors, self._prec, self._logdet)
        value = -kl_val
        grad = -kl_grad
        hess = -kl_hess

        q = sigmoid(theta[I_QSTAR])
        dq = sigmoid_d1(q)
        d2q = sigmoid_d2(q)
        pos = theta[I_POS]

        with np.errstate(all="ignore"):
            for blk in self.blocks:
                if blk.ys.size == 0:
                    continue
                meta = blk.meta
                inv_ps = 1.0 / meta.pixel_scale
                s2psf = meta.psf_sigma * meta.psf_sigma
                cx = (pos[0] - meta.origin[0]) * inv_ps
                cy = (pos[1] - meta.origin[1]) * inv_ps
                dx = cx - blk.xs
                dy = cy - blk.ys

                gs, dgs, hgs = gaussians.isotropic_kernel(dx, dy, s2psf, inv_ps)
                gg, dgg, hgg = gaussians.galaxy_kernel(
                    dx, dy, theta[23], theta[24], theta[25], theta[26], s2psf, inv_ps
                )
                m1s, dm1s, hm1s, m2s, dm2s, hm2s = moments.flux_moment_derivs(
                    theta[_BS], meta.band
                )
                m1g, dm1g, hm1g, m2g, dm2g, hm2g = moments.flux_moment_derivs(
                    theta[_BG], meta.band
                )

                mean = q * m1s * gs + (1.0 - q) * m1g * gg
                sec = q * m2s * gs * gs + (1.0 - q) * m2g * gg * gg
                a = blk.base_mean + mean
                v = blk.base_var + sec - mean * mean
                x = blk.counts

                value += float(np.sum(x * (np.log(a) - 0.5 * v / (a * a)) - a))
                inv_a = 1.0 / a
                inv_a2 = inv_a * inv_a
                t_a = x * (inv_a + v * inv_a2 * inv_a) - 1.0
                t_v = -0.5 * x * inv_a2
                t_aa = -x * (inv_a2 + 3.0 * v * inv_a2 * inv_a2)
                t_av = x * inv_a2 * inv_a

                # First derivatives of the pixel mean and second moment.
                d_mean = np.zeros((dx.size, NUM_PARAMS))
                d_mean[:, I_QSTAR] = dq * (m1s * gs - m1g * gg)
                d_mean[:, _BS] = q * gs[:, None] * dm1s
                d_mean[:, _BG] = (1.0 - q) * gg[:, None] * dm1g
                d_mean[:, I_POS] = q * m1s * dgs
                d_mean[:, I_GEO] += (1.0 - q) * m1g * dgg

                d_sec = np.zeros((dx.size, NUM_PARAMS))
                gs2 = gs * gs
                gg2 = gg * gg
                d_sec[:, I_QSTAR] = dq * (m2s * gs2 - m2g * gg2)
                d_sec[:, _BS] = q * gs2[:, None] * dm2s
                d_sec[:, _BG] = (1.0 - q) * gg2[:, None] * dm2g
                d_sec[:, I_POS] = 2.0 * q * m2s * gs[:, None] * dgs
                d_sec[:, I_GEO] += 2.0 * (1.0 - q) * m2g * gg[:, None] * dgg

                d_v = d_sec - 2.0 * mean[:, None] * d_mean
                grad += d_mean.T @ t_a + d_v.T @ t_v

                # Quadratic-in-first-derivative Hessian terms.
                w1 = t_aa - 2.0 * t_v
                hess += _sym((w1[:, None] * d_mean).T @ d_mean)
                cross = (t_av[:, None] * d_mean).T @ d_v
                hess += cross + cross.T

                # Terms in the second derivatives of mean and sec.  The
                # mean enters via t_a and via -2 m t_v (from Var = sec - mean^2).
                u = t_a - 2.0 * t_v * mean
                self._accum_second(
                    hess, u, q, dq, d2q, gs, dgs, hgs, gg, dgg, hgg,
                    m1s, dm1s, hm1s, m1g, dm1g, hm1g,
                )
                tv2 = t_v
                self._accum_second(
                    hess, tv2, q, dq, d2q,
                    gs2, 2.0 * gs[:, None] * dgs,
                    2.0 * (dgs[:, :, None] * dgs[:, None, :] + gs[:, None, None] * hgs),
                    gg2, 2.0 * gg[:, None] * dgg,
                    2.0 * (dgg[:, :, None] * dgg[:, None, :] + gg[:, None, None] * hgg),
                    m2s, dm2s, hm2s, m2g, dm2g, hm2g,
                )

        if not np.isfinite(value):
            grad = np.full(NUM_PARAMS, np.nan)
            hess = np.full((NUM_PARAMS, NUM_PARAMS), np.nan)
        return Objective(value=value, gradient=grad, hessian=_sym(hess))

    @staticmethod
    def _accum_second(
        hess, w, q, dq, d2q, gs, dgs, hgs, gg, dgg, hgg,
        m1s, dm1s, hm1s, m1g, dm1g, hm1g,
    ):
        """Add  sum_i w_i * d2(q M1s GS_i + (1-q) M1g GG_i)  to ``hess``.

        GS/GG stand for any per-pixel star/galaxy geometry factor with the
        given derivatives (the kernel itself, or its square).
        """
        s_gs = float(w @ gs)
        s_gg = float(w @ gg)
        s_dgs = w @ dgs
        s_dgg = w @ dgg
        s_hgs = np.einsum("i,ijk->jk", w, hgs)
        s_hgg = np.einsum("i,ijk->jk", w, hgg)

        hess[I_QSTAR, I_QSTAR] += d2q * (m1s * s_gs - m1g * s_gg)
        r_bs = dq * s_gs * dm1s
        hess[I_QSTAR, _BS] += r_bs
        hess[_BS, I_QSTAR] += r_bs
        r_bg = -dq * s_gg * dm1g
        hess[I_QSTAR, _BG] += r_bg
        hess[_BG, I_QSTAR] += r_bg
        r_geo = -dq * m1g * s_dgg
        r_geo[0:2] += dq * m1s * s_dgs
        hess[I_QSTAR, I_GEO] += r_geo
        hess[I_GEO, I_QSTAR] += r_geo

        hess[np.ix_(_BS, _BS)] += (q * s_gs) * hm1s
        hess[np.ix_(_BG, _BG)] += ((1.0 - q) * s_gg) * hm1g

        blk = q * np.outer(dm1s, s_dgs)
        hess[np.ix_(_BS, I_POS)] += blk
        hess[np.ix_(I_POS, _BS)] += blk.T
        blk = (1.0 - q) * np.outer(dm1g, s_dgg)
        hess[np.ix_(_BG, I_GEO)] += blk
        hess[np.ix_(I_GEO, _BG)] += blk.T

        hess[np.ix_(I_POS, I_POS)] += q * m1s * s_hgs
        hess[np.ix_(I_GEO, I_GEO)] += (1.0 - q) * m1g * s_hgg


def make_block_objective(
    sources: list[SourceModel],
    patches: list[ImagePatch],
    priors: Priors,
    active: int,
    multiplier: float = rates.DEFAULT_RADIUS_MULTIPLIER,
    footprints=None,
) -> BlockObjective:
    """Freeze footprints and fixed-source context; return the objective."""
    return BlockObjective(sources, patches, priors, active, multiplier, footprints)


def elbo(
    sources: list[SourceModel],
    patches: list[ImagePatch],
    priors: Priors,
    active: int,
    multiplier: float = rates.DEFAULT_RADIUS_MULTIPLIER,
) -> Objective:
    """Objective value/gradient/Hessian at the active source's current q."""
    fn = make_block_objective(sources, patches, priors, active, multiplier)
    return fn(fn.x0)


def sky_objective(
    sources: list[SourceModel],
    patches: list[ImagePatch],
    priors: Priors,
    multiplier: float = rates.DEFAULT_RADIUS_MULTIPLIER,
    footprints=None,
) -> float:
    """Joint surrogate objective over all sources (value only).

    Pixel terms run over the union of source footprints, with every
    source's mean and variance contribution truncated to its own
    footprint; KL terms are summed over all sources.  Block coordinate
    ascent with any conflict-free schedule is nondecreasing in this value
    when evaluated with the same frozen footprints.
    """
    priors.validate()
    if footprints is None:
        footprints = _compute_footprints(sources, patches, multiplier)
    prec, logdet = _color_prior_terms(priors)
    total = 0.0
    for ip, patch in enumerate(patches):
        meta = patch.meta
        mean_map = np.full((meta.height, meta.width), float(meta.background))
        var_map = np.zeros((meta.height, meta.width))
        union = np.zeros((meta.height, meta.width), dtype=bool)
        for j, src in enumerate(sources):
            ys, xs = footprints[j][ip]
            if ys.size == 0:
                continue
            cx, cy = meta.sky_to_pixel(*src.position)
            mean, var = rates.source_moment_rate(src, meta, cx - xs, cy - ys)
            mean_map[ys, xs] += mean
            var_map[ys, xs] += var
            union[ys, xs] = True
        if not union.any():
            continue
        x = patch.pixels[union].astype(float)
        a = mean_map[union]
        v = var_map[union]
        total += float(np.sum(x * (np.log(a) - 0.5 * v / (a * a)) - a))
    for src in sources:
        theta = encode(src)
        kl_val, _, _ = _kl_terms(theta, priors, prec, logdet)
        total -= kl_val
    return total


def check_gradients(
    sources: list[SourceModel],
    patches: list[ImagePatch],
    priors: Priors,
    active: int,
    step: float,
    multiplier: float = rates.DEFAULT_RADIUS_MULTIPLIER,
) -> float:
    """Max relative error of the analytic gradient and Hessian columns
    against central finite differences of the frozen block objective."""
    if not (isinstance(step, (int, float)) and 0.0 < step <= 1e-3):
        raise ValidationError(f"step must be in (0, 1e-3], got {step}")
    fn = make_block_objective(sources, patches, priors, active, multiplier)
    theta = fn.x0
    base = fn(theta)
    worst = 0.0
    for i in range(NUM_PARAMS):
        h = step * (1.0 + abs(theta[i]))
        tp = theta.copy()
        tp[i] += h
        tm = theta.copy()
        tm[i] -= h
        op = fn(tp)
        om = fn(tm)
        fd_grad = (op.value - om.value) / (2.0 * h)
        worst = max(
            worst, abs(fd_grad - base.gradient[i]) / (1.0 + abs(base.gradient[i]))
        )
        fd_col = (op.gradient - om.gradient) / (2.0 * h)
        rel = np.abs(fd_col - base.hessian[:, i]) / (1.0 + np.abs(base.hessian[:, i]))
        worst = max(worst, float(rel.max()))
    return worst
