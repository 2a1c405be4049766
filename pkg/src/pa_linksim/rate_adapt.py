"""Rate selection policies.

Rates are in nats per channel use (npcu). A transmission at rate ``R``
succeeds when ``log(1 + g P) >= R``, so given the known channel the success
probability is ``Q1(s, sqrt(2 (e^R - 1) / (P sigma^2)))`` with
``s = sqrt(2 g_hat) / sigma``.

The ``*_batch`` functions evaluate a policy for an array of ``g_hat`` values
sharing ``sigma`` and ``P``; the scalar functions wrap them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import ConditionalGain
from .specfun import LARGE_S_THRESHOLD, lambert_w0, lambert_w0_exp, marcum_i_poly, marcum_j_poly, marcum_q1

GRID_POINTS = 256
RATE_TOL = 1e-8
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
# Search grid as fractions of the bracket: 129 uniform points plus 127
# geometric ones down to 1e-12, so optima far below R_hi / 256 (small P or
# tiny sigma) are still bracketed by neighbouring grid points.
GRID_FRACTIONS = np.unique(
    np.concatenate([np.linspace(0.0, 1.0, GRID_POINTS // 2 + 1), np.geomspace(1e-12, 1.0, GRID_POINTS // 2)[:-1]])
)
assert GRID_FRACTIONS.size == GRID_POINTS


@dataclass(frozen=True)
class RateDecision:
    """Chosen rate with its predicted success probability and throughput.

    ``method`` names the policy that produced the rate; ``"exact_fallback"``
    marks an approximate-policy request answered by the exact optimiser
    because ``s`` was outside the fit range of the approximation.
    """

    rate_npcu: float
    success_prob: float
    expected_throughput_npcu: float
    method: str = "exact"
    omega: Optional[float] = None
    nu: Optional[float] = None
    s: Optional[float] = None

    @property
    def outage_prob(self) -> float:
        return 1.0 - self.success_prob


@dataclass(frozen=True)
class LemmaOneParams:
    omega: float
    nu: float


def _check_p(p_lin):
    if not (p_lin > 0 and math.isfinite(p_lin)):
        raise ValueError(f"p_lin must be positive, got {p_lin!r}")


def success_prob_batch(s, sigma, p_lin, rate):
    """Vectorised ``Q1(s, sqrt(2 (e^R - 1) / (P sigma^2)))``."""
    rho = np.sqrt(2.0 * np.expm1(rate) / (p_lin * sigma * sigma))
    return marcum_q1(s, rho)


def throughput_given_rate(cg: ConditionalGain, p_lin: float, rate: float) -> RateDecision:
    _check_p(p_lin)
    if rate < 0:
        raise ValueError("rate must be >= 0")
    success = float(success_prob_batch(cg.s, cg.sigma, p_lin, rate))
    return RateDecision(rate, success, rate * success, method="given", s=cg.s)


def rate_bracket(g_hat, sigma, p_lin):
    """Upper end of the exact search interval.

    At this rate the gain needed for success is about ``e^2 (g_hat + 12
    sigma^2)``, far in the tail of the conditional distribution, so the
    objective is negligible beyond it.
    """
    return np.log1p((np.asarray(g_hat, dtype=float) + 12.0 * sigma * sigma) * p_lin) + 2.0


def optimal_rate_exact_batch(g_hat, sigma: float, p_lin: float):
    """Exact throughput-maximising rates for an array of ``g_hat``.

    A 256-point grid on ``[0, rate_bracket]`` (see ``GRID_FRACTIONS``)
    locates the best cell, then a golden-section search over the two
    neighbouring cells refines it to ``RATE_TOL``. The refined point is kept only when it beats the best grid
    point, so the result never falls below the grid.

    Returns
    -------
    rates, success, throughput : ndarray
    """
    _check_p(p_lin)
    g_hat = np.atleast_1d(np.asarray(g_hat, dtype=float))
    s = np.sqrt(2.0 * g_hat) / sigma
    r_hi = rate_bracket(g_hat, sigma, p_lin)

    def objective(r, s_):
        return r * success_prob_batch(s_, sigma, p_lin, r)

    grid = r_hi[:, None] * GRID_FRACTIONS[None, :]
    values = objective(grid, s[:, None])
    best = np.argmax(values, axis=1)
    rows = np.arange(g_hat.size)
    grid_rate = grid[rows, best]
    grid_value = values[rows, best]

    lo = grid[rows, np.maximum(best - 1, 0)]
    hi = grid[rows, np.minimum(best + 1, GRID_POINTS - 1)]
    c = hi - _INV_PHI * (hi - lo)
    d = lo + _INV_PHI * (hi - lo)
    fc = objective(c, s)
    fd = objective(d, s)
    width = float(np.max(hi - lo)) if g_hat.size else 0.0
    steps = max(0, math.ceil(math.log(max(width, RATE_TOL) / RATE_TOL) / -math.log(_INV_PHI)))
    for _ in range(steps):
        left = fc >= fd
        # left probe wins: keep [lo, d], its old c becomes the new d
        new_lo = np.where(left, lo, c)
        new_hi = np.where(left, d, hi)
        kept = np.where(left, c, d)
        kept_value = np.where(left, fc, fd)
        span = new_hi - new_lo
        probe = np.where(left, new_hi - _INV_PHI * span, new_lo + _INV_PHI * span)
        f_probe = objective(probe, s)
        c = np.where(left, probe, kept)
        fc = np.where(left, f_probe, kept_value)
        d = np.where(left, kept, probe)
        fd = np.where(left, kept_value, f_probe)
        lo, hi = new_lo, new_hi
    refined = 0.5 * (lo + hi)
    refined_success = success_prob_batch(s, sigma, p_lin, refined)
    refined_value = refined * refined_success

    use_refined = refined_value >= grid_value
    rates = np.where(use_refined, refined, grid_rate)
    success = np.where(use_refined, refined_success, success_prob_batch(s, sigma, p_lin, grid_rate))
    return rates, success, rates * success


def optimal_rate_exact(cg: ConditionalGain, p_lin: float) -> RateDecision:
    """Global maximiser of ``R * P(success | R)`` for one known channel."""
    rates, success, thr = optimal_rate_exact_batch(cg.g_hat, cg.sigma, p_lin)
    return RateDecision(float(rates[0]), float(success[0]), float(thr[0]), method="exact", s=cg.s)


def lemma1_params_batch(g_hat, sigma: float, p_lin: float):
    """``(omega, nu, s)`` of the closed-form rate for an array of ``g_hat``.

    ``omega = exp(I(s)) * (2 / (P sigma^2))^(J(s)/2)`` and ``nu = J(s)/2``
    with ``I`` and ``J`` the Marcum approximation polynomials.
    """
    omega_log, half_j, s = _lemma1_log_params(g_hat, sigma, p_lin)
    with np.errstate(over="ignore", under="ignore"):
        omega = np.exp(omega_log)
    return omega, half_j, s


def _lemma1_log_params(g_hat, sigma, p_lin):
    _check_p(p_lin)
    s = np.sqrt(2.0 * np.asarray(g_hat, dtype=float)) / sigma
    half_j = 0.5 * marcum_j_poly(s)
    omega_log = marcum_i_poly(s) + half_j * math.log(2.0 / (p_lin * sigma * sigma))
    return omega_log, half_j, s


def lemma1_params(cg: ConditionalGain, p_lin: float) -> LemmaOneParams:
    omega, nu, _ = lemma1_params_batch(cg.g_hat, cg.sigma, p_lin)
    return LemmaOneParams(float(omega), float(nu))


def approx_rate_batch(g_hat, sigma: float, p_lin: float):
    """Closed-form rate ``W(1/omega) / nu``, without the large-``s`` fallback."""
    omega_log, nu, s = _lemma1_log_params(g_hat, sigma, p_lin)
    with np.errstate(over="ignore", under="ignore"):
        omega = np.exp(omega_log)
    return lambert_w0_exp(-omega_log) / nu, omega, nu, s


def optimal_rate_approx_batch(g_hat, sigma: float, p_lin: float):
    """Approximate policy for an array of ``g_hat``.

    Success probabilities come from the exact Marcum Q. Entries with
    ``s > 30`` are answered by :func:`optimal_rate_exact_batch`; the returned
    boolean mask flags them.

    Returns
    -------
    rates, success, throughput, fallback : ndarray
    """
    g_hat = np.atleast_1d(np.asarray(g_hat, dtype=float))
    rates, _, _, s = approx_rate_batch(g_hat, sigma, p_lin)
    rates = np.asarray(rates, dtype=float).copy()
    success = np.empty_like(rates)
    fallback = s > LARGE_S_THRESHOLD
    ok = ~fallback
    if np.any(ok):
        success[ok] = success_prob_batch(s[ok], sigma, p_lin, rates[ok])
    if np.any(fallback):
        r_ex, p_ex, _ = optimal_rate_exact_batch(g_hat[fallback], sigma, p_lin)
        rates[fallback] = r_ex
        success[fallback] = p_ex
    return rates, success, rates * success, fallback


def optimal_rate_approx(cg: ConditionalGain, p_lin: float) -> RateDecision:
    """Closed-form rate ``W(1/omega) / nu`` scored with the exact Marcum Q."""
    rates, success, thr, fallback = optimal_rate_approx_batch(cg.g_hat, cg.sigma, p_lin)
    omega, nu, s = lemma1_params_batch(cg.g_hat, cg.sigma, p_lin)
    return RateDecision(
        float(rates[0]),
        float(success[0]),
        float(thr[0]),
        method="exact_fallback" if fallback[0] else "approx",
        omega=float(omega),
        nu=float(nu),
        s=float(s),
    )


def rate_full_csit(g_actual: float, p_lin: float) -> RateDecision:
    """Capacity of the known gain, transmitted without outage."""
    _check_p(p_lin)
    if g_actual < 0:
        raise ValueError("g_actual must be >= 0")
    rate = math.log1p(g_actual * p_lin)
    return RateDecision(rate, 1.0, rate, method="full_csit")


def rate_no_csit(p_lin: float) -> RateDecision:
    """Best fixed rate over unit-mean Rayleigh fading, ``R = W(P)``.

    Stationarity of ``R exp(-(e^R - 1)/P)`` gives ``R e^R = P``.
    """
    _check_p(p_lin)
    rate = float(lambert_w0(p_lin))
    success = math.exp(-math.expm1(rate) / p_lin)
    return RateDecision(rate, success, rate * success, method="no_csit")
