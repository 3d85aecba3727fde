"""Hot numerical loops for the truncated coagulation system.

Compiled with numba when available, otherwise vectorized numpy fallbacks.
The numba paths accumulate in ascending index order, sequentially, so that
repeated runs with identical inputs are bit-identical.
"""

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


@njit(cache=True)
def _rhs_into_nb(K, n, s, out):
    R = n.shape[0]
    for a in range(R):
        gain = 0.0
        for b in range(a):
            gain += K[a - b - 1, b] * n[a - b - 1] * n[b]
        loss = 0.0
        for b in range(R):
            loss += K[a, b] * n[b]
        out[a] = 0.5 * gain - n[a] * loss + s[a]
    return out


@njit(cache=True)
def _matvec_nb(K, n):
    R = n.shape[0]
    out = np.empty(R)
    for a in range(R):
        acc = 0.0
        for b in range(R):
            acc += K[a, b] * n[b]
        out[a] = acc
    return out


@njit(cache=True)
def _gs_sweep_nb(K, n, s, loss, theta):
    R = n.shape[0]
    dmax = 0.0
    for a in range(R):
        gain = 0.0
        for b in range(a):
            gain += K[a - b - 1, b] * n[a - b - 1] * n[b]
        target = (0.5 * gain + s[a]) / loss[a]
        new = (1.0 - theta) * n[a] + theta * target
        d = abs(new - n[a])
        if d > dmax:
            dmax = d
        n[a] = new
    return dmax


@njit(cache=True)
def _flux_all_nb(K, n):
    # J[alpha] = sum_{beta<=alpha} sum_{g=alpha-beta+1..R} K[beta,g] beta n_beta n_g
    # (1-based alpha, beta, g); J[0] = 0 and J[R] is the mass outflux.
    R = n.shape[0]
    J = np.zeros(R + 1)
    for b in range(R):  # beta = b + 1
        w = (b + 1.0) * n[b]
        if w == 0.0:
            continue
        acc = 0.0
        for g in range(R - b, R + 1):  # suffix for alpha = R: g = R-b .. R
            acc += K[b, g - 1] * n[g - 1]
        J[R] += w * acc
        for alpha in range(R - 1, b, -1):  # alpha = R-1 down to beta
            m = alpha - b  # new term joining the suffix
            acc += K[b, m - 1] * n[m - 1]
            J[alpha] += w * acc
    return J


@njit(cache=True)
def _outflux_mass_nb(K, n):
    # (1/2) sum_{alpha+beta > R, alpha,beta <= R} (alpha+beta) K n n
    R = n.shape[0]
    acc = 0.0
    for a in range(R):
        for b in range(R - 1 - a, R):
            acc += (a + b + 2.0) * K[a, b] * n[a] * n[b]
    return 0.5 * acc


@njit(cache=True)
def _partial_flux_nb(K, n, az, delta):
    # Buckets of J(az) terms by the partner-size ratio of the pair (x, y) =
    # (beta, gamma'): y > x/delta, delta*x <= y <= x/delta, y < delta*x.
    R = n.shape[0]
    J1 = 0.0
    J2 = 0.0
    J3 = 0.0
    for b in range(az):  # beta = b + 1 <= az
        x = b + 1.0
        w = x * n[b]
        lo = az - b  # gamma' >= az - beta + 1
        for g in range(lo, R + 1):
            t = w * K[b, g - 1] * n[g - 1]
            y = float(g)
            if y > x / delta:
                J1 += t
            elif y < delta * x:
                J3 += t
            else:
                J2 += t
    return J1, J2, J3


def _antidiag(K, a):
    # K[a-b-1, b] for b = 0..a-1
    return np.diag(K[:a, :a][::-1])


def _rhs_into_np(K, n, s, out):
    loss = K @ n
    R = n.shape[0]
    out[:] = s - n * loss
    for a in range(1, R):
        v = n[:a]
        out[a] += 0.5 * np.dot(_antidiag(K, a), v[::-1] * v)
    return out


def _matvec_np(K, n):
    return K @ n


def _gs_sweep_np(K, n, s, loss, theta):
    R = n.shape[0]
    dmax = 0.0
    for a in range(R):
        if a == 0:
            gain = 0.0
        else:
            v = n[:a]
            gain = float(np.dot(_antidiag(K, a), v[::-1] * v))
        new = (1.0 - theta) * n[a] + theta * (0.5 * gain + s[a]) / loss[a]
        d = abs(new - n[a])
        if d > dmax:
            dmax = d
        n[a] = new
    return dmax


def _flux_all_np(K, n):
    R = n.shape[0]
    # suffix[b, m-1] = sum_{g >= m} K[b, g-1] n[g-1]
    suffix = np.cumsum((K * n[None, :])[:, ::-1], axis=1)[:, ::-1]
    J = np.zeros(R + 1)
    bw = np.arange(1, R + 1) * n
    for alpha in range(1, R + 1):
        b = np.arange(alpha)  # beta - 1
        m = alpha - b - 1  # (alpha - beta + 1) - 1
        J[alpha] = np.dot(bw[: alpha], suffix[b, m])
    return J


def _outflux_mass_np(K, n):
    R = n.shape[0]
    i = np.arange(1, R + 1)
    mask = (i[:, None] + i[None, :]) > R
    tot = (i[:, None] + i[None, :]) * K * np.outer(n, n)
    return 0.5 * float(tot[mask].sum())


def _partial_flux_np(K, n, az, delta):
    R = n.shape[0]
    J1 = J2 = J3 = 0.0
    for b in range(az):
        x = b + 1.0
        lo = az - b
        g = np.arange(lo, R + 1, dtype=float)
        terms = x * n[b] * K[b, lo - 1 :] * n[lo - 1 :]
        m1 = g > x / delta
        m3 = g < delta * x
        m2 = ~(m1 | m3)
        J1 += float(terms[m1].sum())
        J2 += float(terms[m2].sum())
        J3 += float(terms[m3].sum())
    return J1, J2, J3


if HAVE_NUMBA:
    rhs_into = _rhs_into_nb
    matvec = _matvec_nb
    gs_sweep = _gs_sweep_nb
    flux_all = _flux_all_nb
    outflux_mass = _outflux_mass_nb
    partial_flux = _partial_flux_nb
else:  # pragma: no cover
    rhs_into = _rhs_into_np
    matvec = _matvec_np
    gs_sweep = _gs_sweep_np
    flux_all = _flux_all_np
    outflux_mass = _outflux_mass_np
    partial_flux = _partial_flux_np
