"""Truncated discrete coagulation system with a localized source.

The state is a plain numpy vector n[alpha-1] of concentrations on
{1, ..., R*}.  Merge events that would produce sizes above the cutoff are
discarded (the non-conservative truncation), which acts as an outflow
boundary for mass.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from . import _fast
from .errors import IntegrationError, ParameterError, StructuralError

log = logging.getLogger(__name__)

# Negative round-off handling: clamp quietly below the first threshold,
# abort if the integrator produced anything beyond the second.
CLAMP_TOL = 1e-14
CLAMP_ABORT = 1e-8


@dataclass(frozen=True)
class SourceSpec:
    """Nonnegative injection rates s_alpha on {1, ..., L_s}.

    A zero vector is allowed so that source-free relaxation problems can be
    expressed; experiment-level configs reject it where a nontrivial source
    is a genuine precondition.
    """

    rates: np.ndarray

    def __post_init__(self):
        r = np.atleast_1d(np.asarray(self.rates, dtype=float))
        if r.ndim != 1 or r.size == 0:
            raise ParameterError("source needs a nonempty 1-D rate vector")
        if not np.all(np.isfinite(r)):
            raise ParameterError("source rates must be finite")
        if np.any(r < 0.0):
            raise ParameterError("source rates must be nonnegative")
        object.__setattr__(self, "rates", r)

    @classmethod
    def monomer(cls, rate=1.0):
        return cls(np.array([rate]))

    @classmethod
    def from_pairs(cls, pairs):
        """Build from (alpha, rate) pairs, e.g. parsed CLI '1:1,2:0.5'."""
        pairs = list(pairs)
        if not pairs:
            raise ParameterError("source needs at least one (alpha, rate) pair")
        alphas = [int(a) for a, _ in pairs]
        if min(alphas) < 1:
            raise ParameterError("source indices start at 1")
        r = np.zeros(max(alphas))
        for a, v in pairs:
            r[int(a) - 1] += float(v)
        return cls(r)

    @property
    def L_s(self):
        return self.rates.size

    @property
    def total_rate(self):
        """c0 = sum_alpha s_alpha."""
        return float(self.rates.sum())

    @property
    def injection_rate(self):
        """Mass injection sum_alpha alpha * s_alpha."""
        return float(np.dot(np.arange(1, self.rates.size + 1), self.rates))

    @property
    def is_zero(self):
        return bool(np.all(self.rates == 0.0))

    def padded(self, size):
        if size < self.rates.size:
            raise ParameterError("target size smaller than source support")
        out = np.zeros(size)
        out[: self.rates.size] = self.rates
        return out

    def scaled(self, factor):
        return SourceSpec(self.rates * factor)


@dataclass
class TruncatedSystem:
    """Kernel + source + cutoff, with the rate table precomputed."""

    kernel: object
    source: SourceSpec
    r_star: int
    K: np.ndarray = field(init=False, repr=False)
    s: np.ndarray = field(init=False, repr=False)
    alphas: np.ndarray = field(init=False, repr=False)
    a1: float = field(init=False)
    a2: float = field(init=False)

    def __post_init__(self):
        self.r_star = int(self.r_star)
        if self.r_star <= self.source.L_s:
            raise ParameterError(
                f"cutoff R*={self.r_star} must exceed the source support L_s={self.source.L_s}"
            )
        self.K = np.ascontiguousarray(self.kernel.table(self.r_star))
        self.s = self.source.padded(self.r_star)
        self.alphas = np.arange(1, self.r_star + 1, dtype=float)
        self.a1 = float(self.K.min())
        self.a2 = float(self.K.max())
        if not self.a1 > 0.0:
            raise ParameterError("kernel table must be strictly positive")

    def with_source(self, source):
        return TruncatedSystem(self.kernel, source, self.r_star)

    @property
    def number_ceiling(self):
        """Invariant-region bound sqrt(2 c0 / a1) on the total number."""
        return math.sqrt(2.0 * self.source.total_rate / self.a1)

    def check_state(self, n):
        n = np.asarray(n, dtype=float)
        if n.shape != (self.r_star,):
            raise StructuralError(
                f"state has shape {n.shape}, system expects ({self.r_star},)"
            )
        if not np.all(np.isfinite(n)):
            raise StructuralError("state must be finite")
        return n


def rhs(system, n):
    """Time derivative of the truncated system at state n."""
    n = system.check_state(n)
    out = np.empty_like(n)
    _fast.rhs_into(system.K, n, system.s, out)
    return out


def rhs_reference(system, n):
    """Plain double-loop evaluation, kept as an independent oracle."""
    n = system.check_state(n)
    R = system.r_star
    K = system.K
    out = np.zeros(R)
    for a in range(1, R + 1):
        gain = 0.0
        for b in range(1, a):
            gain += K[a - b - 1, b - 1] * n[a - b - 1] * n[b - 1]
        loss = 0.0
        for b in range(1, R + 1):
            loss += K[a - 1, b - 1] * n[b - 1]
        out[a - 1] = 0.5 * gain - n[a - 1] * loss + system.s[a - 1]
    return out


def _clamp_negative(n, context):
    neg = n < 0.0
    if not np.any(neg):
        return n, 0
    scale = float(np.max(np.abs(n))) or 1.0
    worst = float(-n[neg].min())
    if worst > CLAMP_ABORT * scale:
        raise IntegrationError(
            f"{context}: negative concentration {-worst:.3e} exceeds "
            f"{CLAMP_ABORT:g} * ||n||_inf"
        )
    count = int(neg.sum())
    if worst > CLAMP_TOL * scale:
        log.debug("%s: clamped %d slightly negative entries (worst %.3e)", context, count, worst)
    out = n.copy()
    out[neg] = 0.0
    return out, count


def evolve(system, n0, horizon, rtol=1e-8, atol=1e-12):
    """Integrate the truncated equations from n0 over [0, horizon].

    Uses an adaptive embedded Runge-Kutta pair; reported states are clamped
    to be nonnegative (tiny round-off undershoots only) and checked against
    the invariant region sum(n) <= max(sum(n0), sqrt(2 c0 / a1)).
    """
    n0 = system.check_state(n0)
    if np.any(n0 < 0.0):
        raise ParameterError("initial state must be nonnegative")
    if horizon <= 0.0:
        return n0.copy()

    def fun(_t, y):
        out = np.empty_like(y)
        _fast.rhs_into(system.K, y, system.s, out)
        return out

    sol = solve_ivp(fun, (0.0, float(horizon)), n0, method="RK45", rtol=rtol, atol=atol)
    if not sol.success:
        raise IntegrationError(f"time integration failed: {sol.message}")
    n, _ = _clamp_negative(sol.y[:, -1], "evolve")

    ceiling = max(float(n0.sum()), system.number_ceiling)
    total = float(n.sum())
    slack = 1e3 * rtol * max(ceiling, 1.0) + 1e3 * atol * system.r_star
    if total > ceiling + slack:
        raise IntegrationError(
            f"invariant region violated: sum(n)={total:.6e} > ceiling {ceiling:.6e}"
        )
    return n


def mass_budget(system, n):
    """(injection rate, mass outflux through the cutoff, d/dt interior mass).

    The three satisfy interior = injection - outflux identically; at a
    converged steady state the interior derivative is residual-small.
    """
    n = system.check_state(n)
    injection = system.source.injection_rate
    outflux = float(_fast.outflux_mass(system.K, n))
    interior = float(np.dot(system.alphas, rhs(system, n)))
    return injection, outflux, interior
