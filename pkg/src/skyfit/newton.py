"""Trust-region Newton maximization of one source's block objective.

The subproblem (maximize the local quadratic model inside a ball) is
solved exactly through an eigendecomposition: with H = Q diag(lam) Q^T and
b = Q^T g, the maximizer is p(nu) = sum_i b_i / (nu - lam_i) q_i for the
unique multiplier nu >= max(0, lam_max) that puts p on the boundary, or
nu = 0 when the unconstrained Newton step lies inside.  The hard case
(gradient orthogonal to the leading eigenspace) is filled along the
leading eigenvector.  Blocks are small and dense, so the exact method is
both cheap and more reliable than truncated CG.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


@dataclass
class SolverConfig:
    """Trust-region constants; defaults are standard textbook choices."""

    initial_radius: float = 1.0
    radius_min: float = 1e-12
    radius_max: float = 1e6
    shrink_factor: float = 0.25
    grow_factor: float = 2.0
    accept_rho: float = 0.1
    grow_rho: float = 0.75
    grad_tol: float = 1e-8
    max_iters: int = 200

    def validate(self) -> None:
        if not (0.0 < self.shrink_factor < 1.0 < self.grow_factor):
            raise ValidationError("need 0 < shrink_factor < 1 < grow_factor")
        if not (0.0 < self.accept_rho < self.grow_rho < 1.0):
            raise ValidationError("need 0 < accept_rho < grow_rho < 1")
        if not (0.0 < self.radius_min <= self.initial_radius <= self.radius_max):
            raise ValidationError("need radius_min <= initial_radius <= radius_max")
        if self.grad_tol <= 0 or self.max_iters < 1:
            raise ValidationError("grad_tol must be > 0 and max_iters >= 1")


@dataclass
class TrustRegionState:
    """Outcome of one block maximization."""

    radius: float
    iteration: int = 0
    converged: bool = False
    last_rho: float = field(default=float("nan"))
    accepted_steps: int = 0


def solve_tr_subproblem(
    gradient: np.ndarray,
    hessian: np.ndarray,
    radius: float,
    return_multiplier: bool = False,
):
    """Exact maximizer of g.p + p.H.p/2 over ||p|| <= radius."""
    g = np.asarray(gradient, dtype=float)
    h = np.asarray(hessian, dtype=float)
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(h))):
        raise ValidationError("gradient and hessian must be finite")
    if h.shape != (g.size, g.size):
        raise ValidationError("hessian shape does not match gradient")
    scale = max(1.0, float(np.abs(h).max()))
    if np.abs(h - h.T).max() > 1e-8 * scale:
        raise ValidationError("hessian must be symmetric")
    if not radius > 0:
        raise ValidationError("radius must be > 0")

    lam, q = np.linalg.eigh(0.5 * (h + h.T))
    b = q.T @ g
    lam_max = lam[-1]

    def step(nu: float) -> np.ndarray:
        return q @ (b / (nu - lam))

    # Interior solution: Newton step of a strictly concave model.
    if lam_max < 0:
        p = step(0.0)
        if p @ p <= radius * radius:
            return (p, 0.0) if return_multiplier else p

    lo = max(0.0, lam_max)
    gap = lam - lam_max
    on_edge = np.abs(gap) <= 1e-12 * max(1.0, abs(lam_max))
    edge_mass = float(np.sum(b[on_edge] ** 2))
    if edge_mass <= (1e-14 * max(1.0, float(np.linalg.norm(b)))) ** 2:
        # Possible hard case: the multiplier sits at lam_max and the
        # regular part may leave slack to fill along the leading vector.
        with np.errstate(divide="ignore", invalid="ignore"):
            coef = np.where(on_edge, 0.0, b / (lo - lam))
        p_reg = q @ coef
        slack = radius * radius - float(p_reg @ p_reg)
        if slack >= 0.0:
            p = p_reg + np.sqrt(slack) * q[:, -1]
            return (p, lo) if return_multiplier else p

    # Boundary solution: bisect the monotone ||p(nu)|| - radius on
    # (lo, hi]; ||p|| decreases in nu and falls below radius at hi.
    hi = lo + float(np.linalg.norm(b)) / radius + 1.0
    lo_open = lo
    for _ in range(200):
        mid = 0.5 * (lo_open + hi)
        if mid <= lo or mid >= hi:
            break
        if float(np.sum((b / (mid - lam)) ** 2)) > radius * radius:
            lo_open = mid
        else:
            hi = mid
    nu = hi
    p = step(nu)
    return (p, nu) if return_multiplier else p


def maximize_block(objective_fn, x0: np.ndarray, config: SolverConfig | None = None):
    """Trust-region Newton ascent of a block objective to tolerance.

    ``objective_fn(x)`` must return an object with ``value``, ``gradient``
    and ``hessian`` attributes.  Returns ``(x_opt, state)``.  Non-finite
    trial values are treated as step rejections; only failure to recover
    above ``radius_min`` raises.
    """
    config = config or SolverConfig()
    config.validate()
    x = np.asarray(x0, dtype=float).copy()
    if not np.all(np.isfinite(x)):
        raise ValidationError("x0 must be finite")
    cur = objective_fn(x)
    if not (np.isfinite(cur.value) and np.all(np.isfinite(cur.gradient))):
        raise ValidationError("objective is non-finite at x0")

    state = TrustRegionState(radius=config.initial_radius)
    if np.max(np.abs(cur.gradient)) < config.grad_tol:
        state.converged = True
        return x, state

    while state.iteration < config.max_iters:
        state.iteration += 1
        p = solve_tr_subproblem(cur.gradient, cur.hessian, state.radius)
        predicted = float(cur.gradient @ p + 0.5 * p @ cur.hessian @ p)
        if not np.isfinite(predicted) or predicted <= 0.0:
            break  # model sees no ascent direction; numerically stationary

        trial = objective_fn(x + p)
        if np.isfinite(trial.value):
            rho = (trial.value - cur.value) / predicted
        else:
            rho = -np.inf
        state.last_rho = float(rho)

        if rho >= config.accept_rho:
            x = x + p
            cur = trial
            state.accepted_steps += 1
            if rho > config.grow_rho:
                state.radius = min(state.radius * config.grow_factor, config.radius_max)
            if np.max(np.abs(cur.gradient)) < config.grad_tol:
                state.converged = True
                break
        else:
            if state.radius <= config.radius_min:
                if not np.isfinite(trial.value):
                    raise ValidationError(
                        "objective non-finite and trust region exhausted"
                    )
                break  # cannot make progress at the smallest radius
            state.radius = max(state.radius * config.shrink_factor, config.radius_min)
    return x, state
