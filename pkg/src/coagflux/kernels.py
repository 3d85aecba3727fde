"""Coagulation rate kernels and their power-law envelope classification.

Every kernel carries envelope parameters (gamma, lam, c1, c2) bounding it
between c1*w and c2*w for the weight

    w(x, y) = x**(gamma+lam) * y**(-lam) + y**(gamma+lam) * x**(-lam).

The sign of 1 - |gamma + 2*lam| decides whether stationary injection states
exist, so the envelope is the single most load-bearing piece of metadata a
kernel has.  Evaluation always canonicalizes (x, y) -> (min, max) first, so
K(x, y) == K(y, x) bitwise.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


class Regime(enum.Enum):
    EXISTENCE = "Existence"
    NONEXISTENCE = "NonExistence"


def classify_regime(gamma, lam):
    """Existence iff |gamma + 2*lam| < 1."""
    if not (math.isfinite(gamma) and math.isfinite(lam)):
        raise ParameterError("gamma and lambda must be finite")
    return Regime.EXISTENCE if abs(gamma + 2.0 * lam) < 1.0 else Regime.NONEXISTENCE


@dataclass(frozen=True)
class EnvelopeParams:
    """Envelope metadata: K is pinched between c1*w and c2*w."""

    gamma: float
    lam: float
    c1: float
    c2: float

    def __post_init__(self):
        for name in ("gamma", "lam", "c1", "c2"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"envelope parameter {name} must be finite")
        if self.c1 <= 0.0:
            raise ParameterError("envelope requires c1 > 0")
        if self.c2 < self.c1:
            raise ParameterError("envelope requires c2 >= c1")

    @property
    def exponent_sum(self):
        return self.gamma + 2.0 * self.lam


def weight(x, y, gamma, lam):
    """Envelope weight w(x,y) = x^(g+l) y^(-l) + y^(g+l) x^(-l)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return x ** (gamma + lam) * y ** (-lam) + y ** (gamma + lam) * x ** (-lam)


def zeta_ramp(t, eps):
    """Piecewise-affine bump: 1 on |t|<=1/2-eps, 0 on |t|>=1/2+eps."""
    a = np.abs(np.asarray(t, dtype=float))
    ramp = (0.5 + eps - a) / (2.0 * eps)
    return np.clip(ramp, 0.0, 1.0)


def _check_positive(x, y):
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ParameterError("kernel arguments must be finite")
    if np.any(np.asarray(x) <= 0.0) or np.any(np.asarray(y) <= 0.0):
        raise ParameterError("kernel arguments must be positive")


class Kernel:
    """Base class: symmetric, nonnegative rate K(x, y) with an envelope."""

    name = "kernel"

    def __init__(self, envelope):
        self.envelope = envelope

    def _raw(self, a, b):
        raise NotImplementedError

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        _check_positive(x, y)
        a = np.minimum(x, y)
        b = np.maximum(x, y)
        out = self._raw(a, b)
        if out.ndim == 0:
            return float(out)
        return out

    def table(self, size):
        """Dense K_{alpha,beta} for alpha, beta = 1..size."""
        idx = np.arange(1, size + 1, dtype=float)
        return np.asarray(self(idx[:, None], idx[None, :]), dtype=float)

    def __repr__(self):
        e = self.envelope
        return (
            f"{type(self).__name__}(gamma={e.gamma:g}, lambda={e.lam:g}, "
            f"c1={e.c1:g}, c2={e.c2:g})"
        )


class ConstantKernel(Kernel):
    name = "constant"

    def __init__(self, c=1.0):
        if c <= 0:
            raise ParameterError("constant kernel needs c > 0")
        self.c = float(c)
        super().__init__(EnvelopeParams(0.0, 0.0, c / 2.0, c / 2.0))

    def _raw(self, a, b):
        return np.broadcast_to(np.asarray(self.c), np.broadcast(a, b).shape).copy()


class AdditiveKernel(Kernel):
    name = "additive"

    def __init__(self):
        super().__init__(EnvelopeParams(1.0, 0.0, 1.0, 1.0))

    def _raw(self, a, b):
        return np.asarray(a + b)


class ProductKernel(Kernel):
    name = "product"

    def __init__(self):
        super().__init__(EnvelopeParams(2.0, -1.0, 0.5, 0.5))

    def _raw(self, a, b):
        return np.asarray(a * b)


class GeneralizedPowerKernel(Kernel):
    """K = prefactor * w, i.e. the envelope weight itself."""

    name = "power"

    def __init__(self, gamma, lam, prefactor=1.0):
        if prefactor <= 0:
            raise ParameterError("prefactor must be positive")
        self.prefactor = float(prefactor)
        super().__init__(EnvelopeParams(gamma, lam, prefactor, prefactor))

    def _raw(self, a, b):
        e = self.envelope
        return np.asarray(self.prefactor * weight(a, b, e.gamma, e.lam))


class BrownianKernel(Kernel):
    """Diffusion-limited rate (x^-1/3 + y^-1/3)(x^1/3 + y^1/3)."""

    name = "brownian"

    def __init__(self):
        # K/w = 1 + 2/w with w >= 2, hence ratios in (1, 2].
        super().__init__(EnvelopeParams(0.0, 1.0 / 3.0, 1.0, 2.0))

    def _raw(self, a, b):
        ac = np.cbrt(a)
        bc = np.cbrt(b)
        return np.asarray((1.0 / ac + 1.0 / bc) * (ac + bc))


class FreeMolecularKernel(Kernel):
    """Ballistic rate (x^1/3 + y^1/3)^2 sqrt(1/x + 1/y)."""

    name = "freemolecular"

    def __init__(self):
        # ratio to w is 2*sqrt(2) on the diagonal, -> 1 for very unequal sizes
        super().__init__(EnvelopeParams(1.0 / 6.0, 0.5, 1.0, 2.0 * math.sqrt(2.0)))

    def _raw(self, a, b):
        s = np.cbrt(a) + np.cbrt(b)
        return np.asarray(s * s * np.sqrt(1.0 / a + 1.0 / b))


class TabulatedKernel(Kernel):
    """Rates given only on the integer grid {1..m}^2."""

    name = "tabulated"

    def __init__(self, values, envelope):
        values = np.asarray(values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ParameterError("tabulated kernel needs a square table")
        if not np.array_equal(values, values.T):
            raise ParameterError("tabulated kernel must be symmetric")
        if np.any(values < 0.0) or not np.all(np.isfinite(values)):
            raise ParameterError("tabulated kernel must be finite and nonnegative")
        self.values = values
        super().__init__(envelope)

    @property
    def size(self):
        return self.values.shape[0]

    def _raw(self, a, b):
        ai = np.rint(a)
        bi = np.rint(b)
        if np.any(np.abs(a - ai) > 1e-9) or np.any(np.abs(b - bi) > 1e-9):
            raise ParameterError("tabulated kernel evaluated off the integer grid")
        ai = ai.astype(int)
        bi = bi.astype(int)
        if np.any(ai < 1) or np.any(bi < 1) or np.any(ai > self.size) or np.any(bi > self.size):
            raise ParameterError("tabulated kernel index outside 1..size")
        return np.asarray(self.values[ai - 1, bi - 1])

    def table(self, size):
        if size > self.size:
            raise ParameterError("requested table larger than tabulation")
        return self.values[:size, :size].copy()


def _adjusted_envelope(disc_envelope):
    # Interpolation keeps (gamma, lam) but loosens the constants: within one
    # grid cell the weight w moves by at most 3**(|g+l|+|l|) in either
    # direction, and up to nine neighbouring table entries contribute.
    e = disc_envelope
    cw = 3.0 ** (abs(e.gamma + e.lam) + abs(e.lam))
    return EnvelopeParams(e.gamma, e.lam, e.c1 / (2.0 * cw), 9.0 * e.c2 * cw + 2.0 * e.c1)


class _BumpInterpolation(Kernel):
    """Shared machinery for the bump-sum interpolation of a discrete table."""

    def __init__(self, disc, epsilon, envelope):
        if not isinstance(disc, TabulatedKernel):
            raise ParameterError("interpolation needs a TabulatedKernel")
        if not (0.0 < epsilon < 0.5):
            raise ParameterError("epsilon must lie in (0, 1/2)")
        self.disc = disc
        self.epsilon = float(epsilon)
        super().__init__(envelope)

    def _bumps(self, u):
        # integer centers whose bump covers u; at most two since eps < 1/2
        eps = self.epsilon
        lo = max(1, math.ceil(u - 0.5 - eps))
        hi = math.floor(u + 0.5 + eps)
        out = []
        for alpha in range(lo, hi + 1):
            wgt = float(zeta_ramp(u - alpha, eps))
            if wgt > 0.0:
                if alpha > self.disc.size:
                    raise ParameterError(
                        f"interpolation point {u:g} reaches past the tabulated range"
                    )
                out.append((alpha, wgt))
        return out

    def _bump_sum(self, u, v):
        acc = 0.0
        for alpha, wa in self._bumps(u):
            for beta, wb in self._bumps(v):
                acc += self.disc.values[alpha - 1, beta - 1] * wa * wb
        return acc

    def _raw(self, a, b):
        return np.vectorize(self._point, otypes=[float])(a, b)

    def _point(self, a, b):
        raise NotImplementedError


class InterpolatedKernel(_BumpInterpolation):
    """Continuous kernel matching a discrete table at integer pairs.

    Bump sum over the table plus the small-argument guard
    c1*(zeta(x)+zeta(y))*w(x,y), which keeps the envelope bounds valid below
    the first lattice site.
    """

    name = "interpolated"

    def __init__(self, disc, epsilon=0.25):
        super().__init__(disc, epsilon, _adjusted_envelope(disc.envelope))

    def _point(self, a, b):
        e = self.disc.envelope
        guard = float(zeta_ramp(a, self.epsilon) + zeta_ramp(b, self.epsilon))
        out = self._bump_sum(a, b)
        if guard > 0.0:
            out += e.c1 * guard * float(weight(a, b, e.gamma, e.lam))
        return out


class RescaledKernel(_BumpInterpolation):
    """Kernel R^-gamma K_{Rx,Ry} interpolated onto the rescaled lattice."""

    name = "rescaled"

    def __init__(self, disc, R, epsilon=0.25):
        if not (R > 0):
            raise ParameterError("R must be positive")
        self.R = float(R)
        super().__init__(disc, epsilon, _adjusted_envelope(disc.envelope))

    def _point(self, a, b):
        e = self.disc.envelope
        scale = self.R ** (-e.gamma)
        u = self.R * a
        v = self.R * b
        out = scale * self._bump_sum(u, v)
        guard = float(zeta_ramp(u, self.epsilon) + zeta_ramp(v, self.epsilon))
        if guard > 0.0:
            out += e.c1 * guard * float(weight(a, b, e.gamma, e.lam))
        return out


def interpolate_discrete(disc, epsilon=0.25):
    """Continuous interpolation of a tabulated kernel (exact at integers)."""
    return InterpolatedKernel(disc, epsilon)


def rescaled_kernel(disc, R, epsilon=0.25):
    """Rescaled interpolation with K_R(a/R, b/R) = R^-gamma K_{a,b}."""
    return RescaledKernel(disc, R, epsilon)


def verify_envelope(kernel, grid):
    """Empirical envelope constants: (min, max) of K/w over grid x grid."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ParameterError("grid must be nonempty")
    if np.any(grid <= 0.0) or not np.all(np.isfinite(grid)):
        raise ParameterError("grid entries must be positive and finite")
    e = kernel.envelope
    x = grid[:, None]
    y = grid[None, :]
    kv = np.vectorize(lambda u, v: kernel(u, v), otypes=[float])(x, y)
    ratio = kv / weight(x, y, e.gamma, e.lam)
    if not np.all(np.isfinite(ratio)):
        raise ParameterError("kernel rejected: non-finite envelope ratio")
    return float(ratio.min()), float(ratio.max())


def make_kernel(name, gamma=None, lam=None, prefactor=1.0, c=1.0):
    """Kernel registry used by configs and the command line."""
    key = name.strip().lower().replace("_", "").replace("-", "")
    if key == "constant":
        return ConstantKernel(c)
    if key == "additive":
        return AdditiveKernel()
    if key == "product":
        return ProductKernel()
    if key == "brownian":
        return BrownianKernel()
    if key in ("freemolecular", "ballistic"):
        return FreeMolecularKernel()
    if key in ("power", "generalizedpower"):
        if gamma is None or lam is None:
            raise ParameterError("power kernel needs gamma and lambda")
        return GeneralizedPowerKernel(gamma, lam, prefactor)
    raise ParameterError(f"unknown kernel '{name}'")


BUILTIN_KERNEL_NAMES = ("constant", "additive", "product", "brownian", "freemolecular")
