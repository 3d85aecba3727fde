"""Continuum-side oracles: the G integral, constant-flux power laws, and
the continuous flux functional evaluated on power laws or histograms.

These are computed with machinery independent of the discrete solver
(adaptive quadrature and bin sums), so they can cross-check it.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .diagnostics import RescaledProfile
from .errors import ParameterError, RegimeError, StructuralError

# numeric tail-decay test: this many consecutive geometric blocks must
# shrink by at least this ratio, otherwise the integral is called divergent
RATIO_LIMIT = 0.995
RATIO_STREAK = 4
MAX_BLOCKS = 48


class GStatus(enum.Enum):
    FINITE = "finite"
    DIVERGENT = "divergent"
    INCONCLUSIVE = "inconclusive"


@dataclass
class GIntegralResult:
    status: GStatus
    value: float | None = None
    error: float | None = None

    @property
    def is_finite(self):
        return self.status is GStatus.FINITE

    @property
    def is_divergent(self):
        return self.status is GStatus.DIVERGENT


def analytic_G_window(gamma, lam):
    """Exponent window (lo, hi) with G(a) finite iff lo < a < hi.

    Power counting of the envelope weight: the z-tail needs
    a > 1 + max(gamma+lam, -lam), the endpoint corners a < 2 + min(-lam,
    gamma+lam).  At a = (3+gamma)/2 both collapse to |gamma+2*lam| < 1.
    """
    lo = 1.0 + max(gamma + lam, -lam)
    hi = 2.0 + min(-lam, gamma + lam)
    return lo, hi


def _quad(f, a, b, tol):
    val, err = integrate.quad(f, a, b, epsabs=1e-14, epsrel=0.1 * tol, limit=200)
    return val, err


def _outer_y(g, a, tol):
    # integral over y in (0, 1) of y^(1-a) g(y), regularized by y = sin^2(t)
    def h(t):
        st = math.sin(t)
        ct = math.cos(t)
        y = st * st
        if y <= 0.0 or y >= 1.0:
            return 0.0
        return 2.0 * st * ct * y ** (1.0 - a) * g(y)

    return _quad(h, 0.0, 0.5 * math.pi, tol)


def _inner_z(kernel, y, a, z_lo, z_hi, tol):
    def f(z):
        return kernel(y, z) * z ** (-a)

    return _quad(f, z_lo, z_hi, tol)


def G_integral(kernel, a, quad_tol=1e-8):
    """G(a) = int_0^1 dy int_{1-y}^inf dz K(y,z) y^(1-a) z^(-a), or Divergent.

    The envelope exponents decide divergence exactly; the tail is then summed
    over geometric blocks [2^k, 2^(k+1)] with a geometric-remainder
    correction, and the block ratios double-check the decay.
    """
    if quad_tol <= 0.0:
        raise ParameterError("quad_tol must be positive")
    env = kernel.envelope
    lo, hi = analytic_G_window(env.gamma, env.lam)
    if not (lo < a < hi):
        return GIntegralResult(GStatus.DIVERGENT)

    err_acc = 0.0

    def core_inner(y):
        v, e = _inner_z(kernel, y, a, 1.0 - y, 2.0, quad_tol)
        return v

    core, core_err = _outer_y(core_inner, a, quad_tol)
    err_acc += core_err

    total = core
    blocks = []
    ratios = []
    streak = 0
    prev = None
    for k in range(1, MAX_BLOCKS + 1):
        z0, z1 = 2.0**k, 2.0 ** (k + 1)

        def blk_inner(y, z0=z0, z1=z1):
            v, e = _inner_z(kernel, y, a, z0, z1, quad_tol)
            return v

        bk, bk_err = _outer_y(blk_inner, a, quad_tol)
        err_acc += bk_err
        blocks.append(bk)
        total += bk
        if prev is not None and prev > 0.0:
            rho = bk / prev
            ratios.append(rho)
            streak = streak + 1 if rho <= RATIO_LIMIT else 0
        prev = bk
        if len(ratios) >= RATIO_STREAK and streak == 0 and min(ratios[-RATIO_STREAK:]) > RATIO_LIMIT:
            # blocks refuse to decay; power counting said finite, so flag it
            return GIntegralResult(GStatus.INCONCLUSIVE)
        if streak >= RATIO_STREAK and bk < 0.01 * quad_tol * abs(total):
            break

    if len(ratios) < RATIO_STREAK:
        return GIntegralResult(GStatus.INCONCLUSIVE)
    rho = ratios[-1]
    if rho >= 1.0:
        return GIntegralResult(GStatus.DIVERGENT)
    remainder = blocks[-1] * rho / (1.0 - rho)
    drift = abs(ratios[-1] - ratios[-2]) if len(ratios) >= 2 else 0.0
    rem_err = remainder * min(1.0, drift / max(1.0 - rho, 1e-12))
    return GIntegralResult(GStatus.FINITE, total + remainder, err_acc + rem_err)


@dataclass
class PowerLawSolution:
    """Constant-flux power law c_s x^(-(3+gamma)/2) carrying flux J0."""

    exponent: float
    prefactor: float
    J0: float
    G_value: float


def powerlaw_solution(kernel, J0, quad_tol=1e-8):
    """Explicit constant-flux power law for a homogeneous-envelope kernel."""
    if J0 <= 0.0:
        raise ParameterError("J0 must be positive")
    env = kernel.envelope
    a = (3.0 + env.gamma) / 2.0
    g = G_integral(kernel, a, quad_tol)
    if not g.is_finite:
        raise RegimeError(
            f"no power-law solution: |gamma + 2 lambda| = "
            f"{abs(env.exponent_sum):g} >= 1 (G {g.status.value})"
        )
    return PowerLawSolution(a, math.sqrt(J0 / g.value), float(J0), g.value)


@dataclass
class MeasureHistogram:
    """Nonnegative masses on disjoint, ordered bins (lo_i, hi_i]."""

    lo: np.ndarray
    hi: np.ndarray
    mass: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        mass = np.atleast_1d(np.asarray(self.mass, dtype=float))
        if not (lo.shape == hi.shape == mass.shape):
            raise StructuralError("histogram arrays must share a shape")
        if lo.size:
            if not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)):
                raise StructuralError("histogram support must be bounded")
            if np.any(lo <= 0.0) or np.any(hi <= lo):
                raise StructuralError("bins must be positive with hi > lo")
            if np.any(lo[1:] < hi[:-1]):
                raise StructuralError("bins must be disjoint and ordered")
            if np.any(mass < 0.0) or not np.all(np.isfinite(mass)):
                raise StructuralError("masses must be finite and nonnegative")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "mass", mass)

    @classmethod
    def empty(cls):
        return cls(np.array([]), np.array([]), np.array([]))

    @classmethod
    def from_edges(cls, edges, mass):
        edges = np.asarray(edges, dtype=float)
        return cls(edges[:-1], edges[1:], mass)

    @classmethod
    def from_power_law(cls, prefactor, exponent, edges):
        """Exact bin masses of prefactor * x^(-exponent) dx."""
        edges = np.asarray(edges, dtype=float)
        if abs(exponent - 1.0) < 1e-12:
            mass = prefactor * np.diff(np.log(edges))
        else:
            p = 1.0 - exponent
            mass = prefactor * np.diff(edges**p) / p
        return cls(edges[:-1], edges[1:], mass)

    @classmethod
    def from_profile(cls, profile: RescaledProfile):
        """Masses value * width from the nonempty bins of a rescaled profile."""
        keep = profile.counts > 0
        lo = profile.edges[:-1][keep]
        hi = profile.edges[1:][keep]
        mass = profile.values[keep] * (hi - lo)
        return cls(lo, hi, mass)

    @property
    def midpoints(self):
        return 0.5 * (self.lo + self.hi)

    @property
    def support(self):
        if self.lo.size == 0:
            return (0.0, 0.0)
        return float(self.lo[0]), float(self.hi[-1])


def _flux_power(kernel, exponent, prefactor, x, quad_tol):
    a = exponent

    def inner(y):
        t = x - y
        if t <= 0.0:
            t = 0.0
        z_mid = max(2.0 * x, 2.0, 2.0 * t)
        total = 0.0
        if t < z_mid:
            v, _ = _inner_z(kernel, y, a, max(t, 1e-300), z_mid, quad_tol)
            total += v

        def tail(u):
            z = z_mid / (1.0 - u)
            return kernel(y, z) * z ** (-a) * z_mid / (1.0 - u) ** 2

        v, _ = _quad(tail, 0.0, 1.0, quad_tol)
        return total + v

    def h(t):
        st = math.sin(t)
        ct = math.cos(t)
        y = x * st * st
        if y <= 0.0 or y >= x:
            return 0.0
        return 2.0 * x * st * ct * y ** (1.0 - a) * inner(y)

    val, _ = _quad(h, 0.0, 0.5 * math.pi, quad_tol)
    return prefactor * prefactor * val


def _flux_hist(kernel, hist, x):
    if hist.lo.size == 0:
        return 0.0
    mids = hist.midpoints
    mass = hist.mass
    total = 0.0
    for i in range(mids.size):
        y = mids[i]
        if y > x or mass[i] == 0.0:
            continue
        sel = mids > (x - y)
        if not np.any(sel):
            continue
        rates = np.array([kernel(y, z) for z in mids[sel]])
        total += y * mass[i] * float(np.dot(rates, mass[sel]))
    return total


def flux_continuous(f, kernel, x, quad_tol=1e-8):
    """Continuous flux J(x; f) across size x.

    Power laws are integrated by nested adaptive quadrature (endpoints and
    the infinite tail regularized by substitution); histograms by a double
    bin sum with midpoint mass placement.
    """
    if x <= 0.0:
        raise ParameterError("x must be positive")
    if isinstance(f, PowerLawSolution):
        return _flux_power(kernel, f.exponent, f.prefactor, x, quad_tol)
    if isinstance(f, MeasureHistogram):
        return _flux_hist(kernel, f, x)
    raise ParameterError("f must be a PowerLawSolution or MeasureHistogram")


@dataclass
class ConstantFluxReport:
    x_grid: np.ndarray
    values: np.ndarray
    mean: float
    max_rel_dev: float
    passed: bool


def verify_constant_flux(f, kernel, x_grid, tol, quad_tol=1e-8):
    """Check J(x; f) is flat over the grid: max |J/mean - 1| <= tol."""
    x_grid = np.atleast_1d(np.asarray(x_grid, dtype=float))
    if x_grid.size == 0:
        raise ParameterError("x_grid must be nonempty")
    if isinstance(f, MeasureHistogram) and f.lo.size:
        s_lo, s_hi = f.support
        if np.any(x_grid <= s_lo) or np.any(x_grid >= s_hi):
            raise ParameterError("x_grid must lie inside the histogram support")
    values = np.array([flux_continuous(f, kernel, x, quad_tol) for x in x_grid])
    mean = float(values.mean())
    if mean == 0.0:
        dev = 0.0 if np.all(values == 0.0) else math.inf
    else:
        dev = float(np.max(np.abs(values / mean - 1.0)))
    return ConstantFluxReport(x_grid, values, mean, dev, dev <= tol)
