"""Galaxy light profiles as circular Gaussian mixtures.

The two canonical profiles (exponential and de Vaucouleurs) are each
approximated by a fixed 3-component circular Gaussian mixture in units of
the effective radius.  The mixtures were fit once by least squares against
the analytic profiles on r/Re in [0, 8] (401-point uniform grid,
softmax-normalized weights, Levenberg-Marquardt from the starting variances
noted below); the resulting coefficients are shipped as constants.  Weights
sum to one exactly, so a galaxy's rendered flux integrates to its total
flux.  Relative RMS misfit over the grid is about 2.3% (exponential) and
0.9% (de Vaucouleurs); the mixture, not the analytic law, is the model this
package fits and renders.

A galaxy's full spatial kernel combines the mixture for its profile mix
with an elliptical covariance from its shape; see :mod:`skyfit.model.rates`.
"""

from __future__ import annotations

import numpy as np

# Half-light rate constants of the analytic profiles (gammainc(2n, b) = 1/2).
SERSIC1_B = 1.678346990016661
SERSIC4_B = 7.669249442500806

# Fit starting variances, part of the documented fitting procedure.
EXP_FIT_V0 = (0.12, 0.5, 1.5)
DEV_FIT_V0 = (0.005, 0.15, 2.5)

# Mixture weights and variances (in units of Re^2), smallest variance first.
EXP_WEIGHTS = np.array(
    [0.010429159850845894, 0.23726005227497035, 0.7523107878741837]
)
EXP_VARS = np.array(
    [0.014011445983228437, 0.18348919622538065, 1.137482877377105]
)
DEV_WEIGHTS = np.array(
    [0.030913367035684567, 0.09134684765189154, 0.8777397853124239]
)
DEV_VARS = np.array(
    [5.387572906702514e-05, 0.005138550524834067, 0.42074364688879434]
)

# Stacked [exponential..., deV...] views used by the kernel code: component k
# of a galaxy with profile mix m carries weight (1-m)*w_k for the exponential
# components and m*w_k for the deV components.
MIX_VARS = np.concatenate([EXP_VARS, DEV_VARS])
MIX_BASE_WEIGHTS = np.concatenate([EXP_WEIGHTS, DEV_WEIGHTS])
# +1 where weight scales with mix (deV), -1 where it scales with (1 - mix).
MIX_SIGN = np.array([-1.0, -1.0, -1.0, 1.0, 1.0, 1.0])
N_COMPONENTS = 6


def profile_exponential(r: np.ndarray) -> np.ndarray:
    """Analytic exponential profile, unit total flux, r in units of Re."""
    b = SERSIC1_B
    return b * b / (2.0 * np.pi) * np.exp(-b * np.asarray(r, dtype=float))


def profile_de_vaucouleurs(r: np.ndarray) -> np.ndarray:
    """Analytic de Vaucouleurs profile, unit total flux, r in units of Re."""
    b = SERSIC4_B
    c = b ** 8 / (8.0 * np.pi * 5040.0)
    return c * np.exp(-b * np.maximum(np.asarray(r, dtype=float), 0.0) ** 0.25)


def mixture_radial(r: np.ndarray, weights: np.ndarray, variances: np.ndarray) -> np.ndarray:
    """Evaluate a circular Gaussian mixture at radii r (units of Re)."""
    r2 = np.asarray(r, dtype=float)[..., None] ** 2
    return np.sum(
        weights / (2.0 * np.pi * variances) * np.exp(-r2 / (2.0 * variances)),
        axis=-1,
    )


def component_weights(profile_mix: float) -> np.ndarray:
    """Six effective component weights for a given profile mix; sums to 1."""
    m = float(profile_mix)
    return MIX_BASE_WEIGHTS * np.where(MIX_SIGN > 0, m, 1.0 - m)
