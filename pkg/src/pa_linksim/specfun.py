"""Special functions used by the channel statistics and the rate policies.

All functions accept scalars or numpy arrays and return the same kind.
Arguments outside the mathematical domain raise :class:`DomainError`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import gammainc, gammaincc, gammaln, ndtr, xlogy

__all__ = [
    "DomainError",
    "MarcumParams",
    "bessel_j0",
    "bessel_i0_scaled",
    "marcum_q1",
    "marcum_q1_approx",
    "marcum_i_poly",
    "marcum_j_poly",
    "lambert_w0",
    "lambert_w0_exp",
    "LARGE_S_THRESHOLD",
]


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


# Above this noncentrality the exact Marcum Q switches from the Poisson
# series to the asymptotic normal expansion.
LARGE_S_THRESHOLD = 30.0

_MAX_SERIES_TERMS = 10_000
# Elements processed together by the Poisson series are capped so that the
# (elements x terms) work array stays around this many entries.
_SERIES_BLOCK = 1 << 17


@dataclass(frozen=True)
class MarcumParams:
    """Arguments ``(s, rho)`` of the first-order Marcum Q-function."""

    s: float
    rho: float

    def __post_init__(self):
        for name in ("s", "rho"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise DomainError(f"{name} must be finite and >= 0, got {value!r}")


def _as_float_array(x, name):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def _return(arr, scalar):
    return float(arr) if scalar else arr


# ---------------------------------------------------------------------------
# Bessel J0
# ---------------------------------------------------------------------------

def _j0_series(x):
    # sum_i (-x^2/4)^i / (i!)^2 ; cancellation is harmless for |x| <= 8
    q = -0.25 * x * x
    term = 1.0
    total = 1.0
    i = 0
    while True:
        i += 1
        term *= q / (i * i)
        total += term
        if abs(term) < 1e-17 * max(1.0, abs(total)) and i > 2:
            return total


def _j0_miller(x):
    # Backward recurrence J_{k-1} = (2k/x) J_k - J_{k+1}, normalised with
    # 1 = J_0 + 2 * sum_{k>=1} J_{2k}.
    start = 2 * ((int(x) + int(math.sqrt(60.0 * x)) + 30) // 2)
    j_next, j_cur = 0.0, 1e-300
    even_sum = 0.0
    j0 = 0.0
    for k in range(start, 0, -1):
        j_prev = (2.0 * k / x) * j_cur - j_next
        j_next, j_cur = j_cur, j_prev
        if abs(j_cur) > 1e250:
            j_cur *= 1e-250
            j_next *= 1e-250
            even_sum *= 1e-250
        if (k - 1) % 2 == 0 and k - 1 > 0:
            even_sum += j_cur
        if k - 1 == 0:
            j0 = j_cur
    return j0 / (j0 + 2.0 * even_sum)


def _j0_asymptotic(x):
    # Hankel expansion J0 = sqrt(2/(pi x)) (P cos chi - Q sin chi)
    p_sum, q_sum = 0.0, 0.0
    term = 1.0
    k = 0
    while True:
        if k % 4 == 0:
            p_sum += term
        elif k % 4 == 1:
            q_sum -= term
        elif k % 4 == 2:
            p_sum -= term
        else:
            q_sum += term
        nxt = term * (2 * k + 1) ** 2 / ((k + 1) * 8.0 * x)
        if nxt > term or nxt < 1e-18:
            break
        term = nxt
        k += 1
    chi = x - 0.25 * math.pi
    return math.sqrt(2.0 / (math.pi * x)) * (p_sum * math.cos(chi) - q_sum * math.sin(chi))


def _j0_scalar(x):
    ax = abs(x)
    if ax <= 8.0:
        return _j0_series(ax)
    if ax <= 25.0:
        return _j0_miller(ax)
    return _j0_asymptotic(ax)


def bessel_j0(x):
    """Bessel function of the first kind of order zero.

    Power series for ``|x| <= 8``, Miller backward recurrence up to 25 and
    the Hankel asymptotic expansion beyond. Absolute error is below 1e-12
    on ``|x| <= 50``.
    """
    scalar = np.ndim(x) == 0
    arr = _as_float_array(x, "x")
    if scalar:
        return _j0_scalar(float(arr))
    out = np.array([_j0_scalar(v) for v in arr.ravel()], dtype=float)
    return out.reshape(arr.shape)


# ---------------------------------------------------------------------------
# Modified Bessel I0, exponentially scaled
# ---------------------------------------------------------------------------

_I0_SERIES_MAX = 30.0
_I0_SERIES_TERMS = 72
_I0_ASYM_TERMS = 24


def bessel_i0_scaled(x):
    """Return ``exp(-x) * I0(x)`` for ``x >= 0``.

    The scaled value lies in (0, 1] and never overflows. A positive power
    series is used up to ``x = 30`` and the large-argument expansion
    ``I0(x) ~ e^x / sqrt(2 pi x) * sum_k ((2k-1)!!)^2 / (k! (8x)^k)`` above.
    """
    scalar = np.ndim(x) == 0
    arr = _as_float_array(x, "x")
    if np.any(arr < 0):
        raise DomainError("bessel_i0_scaled requires x >= 0")
    flat = np.atleast_1d(arr).ravel()
    out = np.empty_like(flat)

    small = flat <= _I0_SERIES_MAX
    if np.any(small):
        xs = flat[small]
        q = 0.25 * xs * xs
        term = np.ones_like(xs)
        total = np.ones_like(xs)
        for i in range(1, _I0_SERIES_TERMS):
            term = term * q / (i * i)
            total += term
        out[small] = total * np.exp(-xs)

    large = ~small
    if np.any(large):
        xl = flat[large]
        term = np.ones_like(xl)
        total = np.ones_like(xl)
        for k in range(_I0_ASYM_TERMS):
            term = term * (2 * k + 1) ** 2 / ((k + 1) * 8.0 * xl)
            total += term
        out[large] = total / np.sqrt(2.0 * np.pi * xl)

    return _return(out.reshape(arr.shape), scalar)


# ---------------------------------------------------------------------------
# First-order Marcum Q
# ---------------------------------------------------------------------------

def _unpack_marcum(s, rho):
    if isinstance(s, MarcumParams):
        return s.s, s.rho
    if rho is None:
        raise TypeError("marcum function needs (s, rho) or a MarcumParams")
    return s, rho


def _marcum_series(s, rho):
    """Poisson-mixture series for the elements with moderate ``s``.

    ``Q1(s, rho) = P(J <= K)`` with ``K ~ Pois(s^2/2)``, ``J ~ Pois(rho^2/2)``::

        Q1 = sum_k P(K = k) P(J <= k)

    A Chernoff estimate bounds the Poisson mass outside ``mean +- (9 sqrt(mean)
    + 12)`` below 1e-16 for means up to 450, so only the intersection of the
    two windows is summed term by term.  Above the window of ``J`` the inner
    probability is one and the rest of the outer sum is the closed-form tail
    ``P(K > b)``; below it the inner probability is negligible.
    """
    lam = 0.5 * s * s
    y = 0.5 * rho * rho
    lam_lo, lam_hi = _poisson_window(lam)
    y_lo, y_hi = _poisson_window(y)
    a = np.maximum(lam_lo, y_lo)
    b = np.minimum(lam_hi, y_hi)
    b = np.minimum(b, a + _MAX_SERIES_TERMS - 1)

    out = np.zeros_like(s)
    # whole outer window lies where P(J <= k) = 1
    above = y_hi < lam_lo
    out[above] = gammainc(y_hi[above] + 1.0, lam[above])
    work = (a <= b) & ~above
    if not np.any(work):
        return out

    width = (b - a + 1).astype(np.int64)
    widx = np.flatnonzero(work)
    order = widx[np.argsort(width[widx], kind="stable")]
    sorted_width = width[order]
    start = 0
    while start < order.size:
        # widths are ascending, so the last member of a block is its widest
        span = np.arange(1, order.size - start + 1)
        fits = sorted_width[start:] * span <= _SERIES_BLOCK
        stop = start + max(1, int(np.count_nonzero(fits)))
        idx = order[start:stop]
        w = int(sorted_width[stop - 1])
        out[idx] = _marcum_series_block(lam[idx], y[idx], a[idx], b[idx], w)
        start = stop
    return out


def _poisson_window(mean):
    half = 9.0 * np.sqrt(mean) + 12.0
    return np.maximum(0.0, np.floor(mean - half)), np.ceil(mean + half)


def _marcum_series_block(lam, y, a, b, width):
    j = np.arange(1, width, dtype=float)[None, :]
    k = a[:, None] + j
    valid = k <= b[:, None]

    # P(K = k) along the window: exact value at k = a, then ratios lam / k
    w0 = np.exp(-lam + xlogy(a, lam) - gammaln(a + 1.0))
    weights = np.empty((lam.size, width))
    weights[:, 0] = w0
    ratio = np.where(valid, lam[:, None] / k, 0.0)
    weights[:, 1:] = w0[:, None] * np.cumprod(ratio, axis=1)

    # P(J <= k): regularised gamma at k = a, then add point masses of J
    q0 = np.exp(-y + xlogy(a, y) - gammaln(a + 1.0))
    cdf = np.empty_like(weights)
    cdf[:, 0] = gammaincc(a + 1.0, y)
    inc = q0[:, None] * np.cumprod(np.where(valid, y[:, None] / k, 0.0), axis=1)
    cdf[:, 1:] = cdf[:, :1] + np.cumsum(inc, axis=1)
    np.minimum(cdf, 1.0, out=cdf)

    total = np.einsum("ij,ij->i", weights, cdf)
    return total + gammainc(b + 1.0, lam)


def _large_s_coefficients(order):
    # Weight of the envelope tail integrand after the substitution x = a + t:
    #   sqrt(x/a) I0(a x) e^{-a x} sqrt(2 pi a x)  with 1/a = eps
    #   = sum_k c_k eps^{2k} (1 + t eps)^{1/2 - k}
    # Collect eps^p t^m as exact rationals.
    table = []
    for p in range(order + 1):
        row = {}
        for k in range(p // 2 + 1):
            m = p - 2 * k
            c_k = Fraction(1)
            for j in range(1, k + 1):
                c_k *= Fraction((2 * j - 1) ** 2, 8 * j)
            alpha = Fraction(1, 2) - k
            binom = Fraction(1)
            for j in range(m):
                binom *= (alpha - j) / (j + 1)
            row[m] = row.get(m, Fraction(0)) + c_k * binom
        table.append({m: float(v) for m, v in row.items() if v != 0})
    return table


_LARGE_S_ORDER = 10
_LARGE_S_COEFS = _large_s_coefficients(_LARGE_S_ORDER)


def _marcum_large_s(a, b):
    """Normal-approximation tail with asymptotic corrections, ``a > 30``.

    ``Q1(a, b) ~ sum_p a^-p sum_m coef[p][m] * int_c^inf t^m phi(t) dt``,
    ``c = b - a``; the truncated moments obey
    ``M_m = c^(m-1) phi(c) + (m-1) M_(m-2)``.
    """
    c = b - a
    phi = np.exp(-0.5 * c * c) / math.sqrt(2.0 * math.pi)
    moments = [ndtr(-c), phi]
    for m in range(2, _LARGE_S_ORDER + 1):
        moments.append(c ** (m - 1) * phi + (m - 1) * moments[m - 2])
    eps = 1.0 / a
    total = np.zeros_like(a)
    eps_p = np.ones_like(a)
    for p in range(_LARGE_S_ORDER + 1):
        row = sum(coef * moments[m] for m, coef in _LARGE_S_COEFS[p].items())
        total += eps_p * row
        eps_p = eps_p * eps
    return total


def marcum_q1(s, rho=None):
    """First-order Marcum Q-function ``Q1(s, rho)``.

    ``Q1(s, rho) = int_rho^inf x exp(-(x^2 + s^2)/2) I0(s x) dx``, the tail
    probability of a Rician envelope with noncentrality ``s`` and unit
    per-component variance.

    Parameters
    ----------
    s, rho : float or array_like
        Nonnegative finite arguments (broadcast together). A single
        :class:`MarcumParams` may be passed instead.

    Returns
    -------
    float or ndarray
        Values in [0, 1] with absolute error below 1e-10. For ``s > 30`` an
        asymptotic normal expansion is used (error below 1e-6, in practice
        far smaller).
    """
    s, rho = _unpack_marcum(s, rho)
    scalar = np.ndim(s) == 0 and np.ndim(rho) == 0
    s_arr = _as_float_array(s, "s")
    rho_arr = _as_float_array(rho, "rho")
    if np.any(s_arr < 0) or np.any(rho_arr < 0):
        raise DomainError("marcum_q1 requires s >= 0 and rho >= 0")
    s_arr, rho_arr = np.broadcast_arrays(s_arr, rho_arr)
    shape = s_arr.shape
    sf = s_arr.ravel()
    rf = rho_arr.ravel()
    out = np.empty(sf.shape, dtype=float)

    full = rf == 0.0
    out[full] = 1.0
    rayleigh = (sf == 0.0) & ~full
    out[rayleigh] = np.exp(-0.5 * rf[rayleigh] ** 2)
    large = (sf > LARGE_S_THRESHOLD) & ~full
    if np.any(large):
        out[large] = _marcum_large_s(sf[large], rf[large])
    series = ~(full | rayleigh | large)
    if np.any(series):
        out[series] = _marcum_series(sf[series], rf[series])

    np.clip(out, 0.0, 1.0, out=out)
    return _return(out.reshape(shape), scalar)


def marcum_i_poly(s):
    """Exponent polynomial ``I(s)`` of the Marcum Q approximation."""
    s = np.asarray(s, dtype=float)
    return -0.840 + s * (0.327 + s * (-0.740 + s * (0.083 + s * (-0.004))))


def marcum_j_poly(s):
    """Power polynomial ``J(s)`` of the Marcum Q approximation."""
    s = np.asarray(s, dtype=float)
    return 2.174 + s * (-0.592 + s * (0.593 + s * (-0.092 + s * 0.005)))


def marcum_q1_approx(s, rho=None):
    """Closed-form approximation ``exp(-exp(I(s)) * rho**J(s))`` of ``Q1``.

    Quartic fits in ``s`` for ``I`` and ``J``; the fit is only good for
    small to moderate ``s`` (measured errors are listed in the README).
    """
    s, rho = _unpack_marcum(s, rho)
    scalar = np.ndim(s) == 0 and np.ndim(rho) == 0
    s_arr = _as_float_array(s, "s")
    rho_arr = _as_float_array(rho, "rho")
    if np.any(s_arr < 0) or np.any(rho_arr < 0):
        raise DomainError("marcum_q1_approx requires s >= 0 and rho >= 0")
    out = np.exp(-np.exp(marcum_i_poly(s_arr)) * rho_arr ** marcum_j_poly(s_arr))
    return _return(np.asarray(out, dtype=float), scalar)


# ---------------------------------------------------------------------------
# Lambert W, principal branch
# ---------------------------------------------------------------------------

_INV_E = math.exp(-1.0)
_HALLEY_STEPS = 10


def lambert_w0(y):
    """Principal branch ``W0(y)`` of the Lambert W function, ``y >= -1/e``.

    Halley iteration started from ``log1p(y)`` for ``y >= 0`` and from the
    branch-point series ``-1 + p - p^2/3 + 11 p^3/72``,
    ``p = sqrt(2 (e y + 1))``, for ``y < 0``. At most ten steps are taken.
    """
    scalar = np.ndim(y) == 0
    arr = _as_float_array(y, "y")
    # the float nearest -1/e is accepted as the branch point itself
    if np.any(arr < -_INV_E - 1e-17):
        raise DomainError("lambert_w0 requires y >= -1/e")
    flat = np.atleast_1d(arr).astype(float).ravel()

    w = np.empty_like(flat)
    pos = flat >= 0
    w[pos] = np.log1p(flat[pos])
    p = np.sqrt(np.maximum(0.0, 2.0 * (math.e * flat[~pos] + 1.0)))
    w[~pos] = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3

    active = np.ones(flat.shape, dtype=bool)
    for _ in range(_HALLEY_STEPS):
        if not np.any(active):
            break
        wa = w[active]
        ew = np.exp(wa)
        f = wa * ew - flat[active]
        wp1 = wa + 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            denom = ew * wp1 - (wa + 2.0) * f / (2.0 * wp1)
            step = np.where(denom != 0, f / denom, 0.0)
        step[~np.isfinite(step)] = 0.0
        w[active] = wa - step
        done = np.abs(step) <= 1e-15 * (1.0 + np.abs(wa))
        idx = np.flatnonzero(active)
        active[idx[done]] = False

    w[flat == 0.0] = 0.0
    w[flat <= -_INV_E] = -1.0
    return _return(w.reshape(arr.shape), scalar)


def lambert_w0_exp(log_y):
    """``W0(exp(log_y))`` without forming ``exp(log_y)``.

    For ``log_y > 500`` Newton's method solves ``w + log(w) = log_y``
    starting from ``log_y - log(log_y)``; below that the argument is
    exponentiated and passed to :func:`lambert_w0`.
    """
    scalar = np.ndim(log_y) == 0
    arr = np.asarray(log_y, dtype=float)
    if np.any(np.isnan(arr)) or np.any(np.isposinf(arr)):
        raise DomainError("log_y must be finite or -inf")
    flat = np.atleast_1d(arr).ravel()
    out = np.empty_like(flat)
    big = flat > 500.0
    out[~big] = lambert_w0(np.exp(flat[~big]))
    if np.any(big):
        L = flat[big]
        w = L - np.log(L)
        for _ in range(_HALLEY_STEPS):
            step = (w + np.log(w) - L) / (1.0 + 1.0 / w)
            w = w - step
        out[big] = w
    return _return(out.reshape(arr.shape), scalar)
