"""Diagnostics computed from a state of the truncated system.

Everything here is a read-only function of (system, n): cluster-size
fluxes, their decomposition by partner-size ratio, moments, tail band
averages, log-log exponent fits and rescaled profiles for the
discrete-to-continuum comparison.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _fast
from .errors import ParameterError

# fits and plateau checks ignore the top octaves, which the cutoff distorts
BOUNDARY_FRACTION = 4


@dataclass
class FluxProfile:
    """Mass flux J_alpha across each size, alpha = 0..R*-1 (J_0 = 0)."""

    J: np.ndarray
    plateau_value: float
    plateau_deviation: float
    window: tuple


@dataclass
class PartialFlux:
    """J(z) split by the pair-ratio regions of the (x, y) = (beta, gamma') plane.

    J1 collects pairs with y > x/delta, J3 pairs with y < delta*x, J2 the
    comparable-size band in between; J1 + J2 + J3 rebuilds J(z) exactly.
    """

    z: float
    delta: float
    J1: float
    J2: float
    J3: float

    @property
    def total(self):
        return self.J1 + self.J2 + self.J3


@dataclass
class ExponentFit:
    slope: float
    intercept: float
    stderr: float
    window: tuple


@dataclass
class RescaledProfile:
    """Binned rescaled concentrations R^((3+gamma)/2) * n_alpha vs x = alpha/R.

    `values[i]` is the average of the rescaled concentration over the lattice
    sites falling in bin i, i.e. an estimate of the limiting continuum
    density at the bin center; empty bins hold NaN with count 0.
    """

    edges: np.ndarray
    centers: np.ndarray
    values: np.ndarray
    counts: np.ndarray
    R: float
    gamma: float


def flux_profile(system, n):
    """Cluster-size flux J_alpha, with its bulk plateau summary.

    J_alpha sums K * beta * n_beta * n_gamma over pairs crossing alpha, the
    partner index capped at the truncation; at a steady state the profile
    telescopes to sum(alpha' * s_alpha') and is flat past the source.
    """
    n = system.check_state(n)
    if np.any(n < 0.0):
        raise ParameterError("flux profile expects a nonnegative state")
    J_full = _fast.flux_all(system.K, n)
    R = system.r_star
    J = J_full[:R]
    lo = max(2 * system.source.L_s, 8)
    hi = R // 2
    lo = min(lo, R - 1)
    hi = max(hi, lo)
    window = J[lo : hi + 1]
    plateau = float(window.mean())
    if plateau > 0.0:
        dev = float(np.max(np.abs(window / plateau - 1.0)))
    else:
        dev = 0.0
    return FluxProfile(J, plateau, dev, (lo, hi))


def partial_fluxes(system, n, z, delta):
    """Decompose J(z) by membership in the pair-ratio partition."""
    n = system.check_state(n)
    if not (0.0 < delta < 1.0):
        raise ParameterError("delta must lie in (0, 1)")
    if not (0.0 < z <= system.r_star):
        raise ParameterError("z must lie in (0, R*]")
    az = int(math.floor(z))
    if az < 1:
        raise ParameterError("z must reach the first cluster size")
    J1, J2, J3 = _fast.partial_flux(system.K, n, az, float(delta))
    return PartialFlux(float(z), float(delta), J1, J2, J3)


def moment(n, mu):
    """sum_alpha alpha^mu n_alpha over the truncated range."""
    n = np.asarray(n, dtype=float)
    alphas = np.arange(1, n.size + 1, dtype=float)
    return float(np.dot(alphas**mu, n))


def tail_band_average(n, z):
    """Average concentration (1/z) * sum_{alpha in [z/2, z]} n_alpha."""
    n = np.asarray(n, dtype=float)
    if z < 2.0:
        raise ParameterError("band [z/2, z] holds no integer for z < 2")
    if z > n.size:
        raise ParameterError("z beyond the truncated range")
    lo = int(math.ceil(z / 2.0))
    hi = int(math.floor(z))
    return float(n[lo - 1 : hi].sum()) / z


def fit_exponent(n, z_lo, z_hi, points_per_octave=2):
    """Least-squares slope of log band-average against log z.

    Band averages over [z/2, z] suppress the parity oscillations close to
    the source; the window must stay below R*/4 to dodge the cutoff layer
    and span at least three octaves.
    """
    n = np.asarray(n, dtype=float)
    R = n.size
    if not (0 < z_lo < z_hi):
        raise ParameterError("need 0 < z_lo < z_hi")
    if z_hi > R / BOUNDARY_FRACTION:
        raise ParameterError(f"z_hi must not exceed R*/{BOUNDARY_FRACTION}")
    if z_hi / z_lo < 8.0:
        raise ParameterError("fit window must span a factor >= 8")
    octaves = math.log2(z_hi / z_lo)
    m = max(5, int(round(points_per_octave * octaves)) + 1)
    zs = np.geomspace(z_lo, z_hi, m)
    vals = np.array([tail_band_average(n, z) for z in zs])
    keep = vals > 0.0
    if keep.sum() < 5:
        raise ParameterError("fewer than 5 positive band averages in the window")
    lx = np.log(zs[keep])
    ly = np.log(vals[keep])
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, res_sq, _, _ = np.linalg.lstsq(A, ly, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    m_eff = keep.sum()
    ssr = float(res_sq[0]) if res_sq.size else float(np.sum((ly - A @ coef) ** 2))
    sxx = float(np.sum((lx - lx.mean()) ** 2))
    stderr = math.sqrt(ssr / max(m_eff - 2, 1) / sxx) if sxx > 0 else math.inf
    return ExponentFit(slope, intercept, stderr, (float(z_lo), float(z_hi)))


def geometric_edges(x_lo, x_hi, bins_per_octave=4):
    """Geometric bin edges covering [x_lo, x_hi]."""
    if not (0.0 < x_lo < x_hi):
        raise ParameterError("need 0 < x_lo < x_hi")
    m = max(1, int(math.ceil(bins_per_octave * math.log2(x_hi / x_lo))))
    return np.geomspace(x_lo, x_hi, m + 1)


def rescaled_profile(n, R, gamma, edges):
    """Binned rescaled concentration profile against x = alpha/R.

    Each bin averages R^((3+gamma)/2) * n_alpha over the lattice sites it
    contains, so profiles at different R overlay directly (the per-site
    average is the density estimate the rescaled measure converges to).
    Empty bins are recorded as absent (NaN value, zero count).
    """
    n = np.asarray(n, dtype=float)
    if not (0.0 < R <= n.size):
        raise ParameterError("R must lie in (0, R*]")
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0.0):
        raise ParameterError("edges must be increasing with at least two entries")
    if edges[0] <= 0.0:
        raise ParameterError("edges must be positive")
    scale = R ** ((3.0 + gamma) / 2.0)
    nb = edges.size - 1
    values = np.full(nb, np.nan)
    counts = np.zeros(nb, dtype=int)
    for i in range(nb):
        a_lo = int(math.ceil(R * edges[i]))
        a_hi = int(math.ceil(R * edges[i + 1])) - 1  # bins are [lo, hi)
        a_lo = max(a_lo, 1)
        a_hi = min(a_hi, n.size)
        if a_hi < a_lo:
            continue
        counts[i] = a_hi - a_lo + 1
        values[i] = scale * float(n[a_lo - 1 : a_hi].sum()) / counts[i]
    centers = np.sqrt(edges[:-1] * edges[1:])
    return RescaledProfile(edges, centers, values, counts, float(R), float(gamma))
