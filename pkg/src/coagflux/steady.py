"""Stationary injection states of the truncated system.

Two independent routes are provided and cross-checked: time marching (the
steady state is an attractor inside the invariant region) and a damped
sequential fixed-point sweep, which is much cheaper at large cutoffs.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import _fast
from .discrete import TruncatedSystem, SourceSpec, evolve, rhs
from .errors import ParameterError, SolverError

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9


def residual_inf(system, n):
    """Max-norm of the right-hand side, normalized to be scale-free.

    The scale is max(a2 * N * ||n||_inf, sum(s)): the loss term's natural
    magnitude or the injection, whichever dominates.
    """
    n = system.check_state(n)
    r = rhs(system, n)
    total = float(n.sum())
    ninf = float(np.max(np.abs(n))) if n.size else 0.0
    scale = max(system.a2 * total * ninf, system.source.total_rate)
    if scale == 0.0:
        return float(np.max(np.abs(r)))
    return float(np.max(np.abs(r))) / scale


@dataclass
class SteadyResult:
    state: np.ndarray
    residual_inf: float
    method: str
    iterations: int
    converged: bool
    system: TruncatedSystem
    tol: float

    def __post_init__(self):
        if self.converged and self.residual_inf > self.tol:
            raise SolverError("converged result with residual above tolerance")
        if np.any(self.state < 0.0):
            raise SolverError("steady state must be nonnegative")


def solve_time_marching(system, tol=DEFAULT_TOL, max_time=1e5, rtol=1e-8, atol=1e-12):
    """March the truncated equations until the normalized residual <= tol.

    Integrates over geometrically growing windows, checking the residual at
    each boundary.  Exceeding max_time (simulated time) returns a
    non-converged result rather than raising.
    """
    if tol <= 0.0:
        raise ParameterError("tol must be positive")
    n = np.zeros(system.r_star)
    if system.source.is_zero:
        return SteadyResult(n, 0.0, "time_marching", 0, True, system, tol)

    t = 0.0
    window = max(1.0, 8.0 / (system.a2 * (1.0 + system.source.total_rate)))
    windows = 0
    res = residual_inf(system, n)
    while t < max_time:
        span = min(window, max_time - t)
        n = evolve(system, n, span, rtol=rtol, atol=atol)
        t += span
        windows += 1
        res = residual_inf(system, n)
        log.debug("time marching: t=%.4g residual=%.3e", t, res)
        if res <= tol:
            return SteadyResult(n, res, "time_marching", windows, True, system, tol)
        window *= 2.0
    log.warning(
        "time marching stopped at t=%.4g with residual %.3e > tol %.1e", t, res, tol
    )
    return SteadyResult(n, res, "time_marching", windows, False, system, tol)


def solve_fixed_point(system, tol=DEFAULT_TOL, damping=0.5, max_sweeps=50_000):
    """Damped Gauss-Seidel iteration on n_a = (gain_a + s_a) / loss_a.

    Sweeps ascend in cluster size so the gain term only touches
    already-updated entries; the loss denominator is frozen at the previous
    iterate.  Non-monotone residuals trigger damping halvings (bounded).
    """
    if tol <= 0.0:
        raise ParameterError("tol must be positive")
    if not (0.0 < damping <= 1.0):
        raise ParameterError("damping must lie in (0, 1]")

    n = np.zeros(system.r_star)
    if system.source.is_zero:
        return SteadyResult(n, 0.0, "fixed_point", 0, True, system, tol)

    # bootstrap: one explicit Euler step from zero so every loss sum is positive
    dt0 = 1.0 / (system.a2 * (1.0 + system.source.total_rate))
    n = system.s * dt0

    theta = damping
    best = n.copy()
    best_res = math.inf
    stall = 0
    halvings = 0
    for sweep in range(1, int(max_sweeps) + 1):
        loss = _fast.matvec(system.K, n)
        dmax = _fast.gs_sweep(system.K, n, system.s, loss, theta)
        res = residual_inf(system, n)
        ninf = float(np.max(np.abs(n)))
        if res <= tol and dmax <= tol * max(ninf, 1e-300):
            return SteadyResult(n, res, "fixed_point", sweep, True, system, tol)
        if res < best_res:
            best_res = res
            best = n.copy()
            stall = 0
        else:
            stall += 1
        if stall >= 50 or res > 10.0 * best_res:
            if halvings >= 8:
                break
            theta *= 0.5
            halvings += 1
            stall = 0
            n = best.copy()
            log.debug("fixed point: damping halved to %.4g at sweep %d", theta, sweep)
    res = residual_inf(system, best)
    log.warning("fixed point did not converge: residual %.3e > tol %.1e", res, tol)
    return SteadyResult(best, res, "fixed_point", int(max_sweeps), False, system, tol)


def solve(system, method="fixed_point", **kwargs):
    if method == "fixed_point":
        return solve_fixed_point(system, **kwargs)
    if method == "time_marching":
        return solve_time_marching(system, **kwargs)
    raise ParameterError(f"unknown solver method '{method}'")


def rescale_source(result, factor):
    """Steady state for the source scaled by `factor`, via sqrt-scaling.

    If n solves the system with source s then sqrt(L)*n solves it with
    source L*s; the normalized residual is scale-free, so convergence is
    inherited.
    """
    if factor <= 0.0:
        raise ParameterError("scaling factor must be positive")
    if not result.converged:
        raise ParameterError("rescale_source needs a converged result")
    scaled_system = result.system.with_source(result.system.source.scaled(factor))
    state = math.sqrt(factor) * result.state
    res = residual_inf(scaled_system, state)
    return SteadyResult(
        state,
        res,
        result.method + "+rescale",
        result.iterations,
        res <= result.tol,
        scaled_system,
        result.tol,
    )


def solve_bvp(system, c1_monomer, tol=DEFAULT_TOL, **kwargs):
    """Prescribed-monomer stationary state via the injection solution.

    Solves with the unit monomer source to get N, then returns
    c1 * N / N_1, which satisfies the source-free balance for sizes >= 2
    with n_1 = c1 exactly.
    """
    if c1_monomer <= 0.0:
        raise ParameterError("monomer concentration must be positive")
    monomer_system = system.with_source(SourceSpec.monomer(1.0))
    result = solve_fixed_point(monomer_system, tol=tol, **kwargs)
    if not result.converged:
        raise SolverError("monomer-source solve did not converge")
    n1 = result.state[0]
    if n1 < 1e-30:
        raise SolverError("degenerate solution: monomer concentration ~ 0")
    return (c1_monomer / n1) * result.state
