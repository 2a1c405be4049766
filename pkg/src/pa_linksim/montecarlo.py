"""Seeded Monte Carlo estimates of throughput and outage, and parameter sweeps.

Every estimate draws ``n`` known channels ``H_hat ~ CN(0, 1)`` and averages
the analytic per-draw throughput ``R (1 - F(e^R - 1)/P)`` (or the per-draw
outage ``F``) of the chosen policy, so no decoding events are simulated.
All schemes evaluated at one point share the same draws.

The exact and approximate policies depend on a draw only through
``x = |H_hat|^2``. With ``method="table"`` (the default) each policy is
solved on a node grid spanning the drawn values and interpolated with a
cubic spline (see :class:`_PolicyTable`); ``method="direct"`` solves every
draw and is used to validate the tables.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .channel import SystemConfig, build_mismatch, make_rng, sample_known_channel, temporal_combine
from .rate_adapt import (
    approx_rate_batch,
    optimal_rate_exact_batch,
    rate_no_csit,
    success_prob_batch,
)
from .specfun import LARGE_S_THRESHOLD

KMH = 1.0 / 3.6
BLOCK_SIZE = 1 << 16
TABLE_NODES = 129
# the closed-form policy costs one Marcum evaluation per node
APPROX_TABLE_NODES = 1025
# residual std below which the partial-CSIT gain is treated as deterministic
SIGMA_FLOOR = 1e-12


class Scheme(str, enum.Enum):
    FULL_CSIT = "full_csit"
    PARTIAL_EXACT = "partial_exact"
    PARTIAL_APPROX = "partial_approx"
    NO_CSIT = "no_csit"


class Axis(str, enum.Enum):
    SNR_DB = "snr_db"
    VELOCITY_KMH = "velocity_kmh"
    BETA = "beta"
    ANTENNA_SEP_LAMBDA = "antenna_sep_lambda"

    def apply(self, base: SystemConfig, value: float) -> SystemConfig:
        if self is Axis.SNR_DB:
            return replace(base, snr_db=value)
        if self is Axis.VELOCITY_KMH:
            return replace(base, velocity_mps=value * KMH)
        if self is Axis.BETA:
            return replace(base, beta=value)
        return replace(base, antenna_sep_m=value * base.wavelength_m)


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_samples: int
    seed: int

    @classmethod
    def from_samples(cls, values, seed: int) -> "McEstimate":
        values = np.asarray(values, dtype=float)
        n = values.size
        # fsum is correctly rounded, hence independent of summation order
        mean = math.fsum(values) / n
        if n > 1:
            var = math.fsum((values - mean) ** 2) / (n - 1)
            std_error = math.sqrt(var / n)
        else:
            std_error = 0.0
        return cls(mean, std_error, n, seed)

    @classmethod
    def exact(cls, value: float, n: int, seed: int) -> "McEstimate":
        return cls(float(value), 0.0, n, seed)


@dataclass(frozen=True)
class PointResult:
    throughput: McEstimate
    outage: McEstimate


@dataclass(frozen=True)
class SweepSpec:
    base: SystemConfig
    axis: Axis
    points: tuple
    schemes: tuple = tuple(Scheme)
    n_samples: int = 100_000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "axis", Axis(self.axis))
        object.__setattr__(self, "points", tuple(float(p) for p in self.points))
        object.__setattr__(self, "schemes", tuple(Scheme(s) for s in self.schemes))
        if not self.points:
            raise ValueError("sweep needs at least one point")
        if any(b <= a for a, b in zip(self.points, self.points[1:])):
            raise ValueError("sweep points must be strictly increasing")
        if not self.schemes:
            raise ValueError("sweep needs at least one scheme")
        if self.n_samples < 100:
            raise ValueError("n_samples must be >= 100 for a sweep")


@dataclass(frozen=True)
class SweepRow:
    index: int
    axis_value: float
    scheme: Scheme
    config: SystemConfig
    throughput: McEstimate
    outage: McEstimate
    seed: int = field(default=0)


class SweepPointError(RuntimeError):
    """Failure while evaluating one sweep point; the message names the point."""


def derive_seed(seed: int, index: int) -> int:
    """Deterministic 64-bit child seed for ``(seed, index)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def draw_known_gains(n: int, seed: int) -> np.ndarray:
    """``|H_hat|^2`` for ``n`` draws, generated in fixed blocks.

    Block ``b`` uses the stream of ``derive_seed(seed, b)``, so the draws do
    not depend on how blocks are scheduled.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    out = np.empty(n)
    for b, start in enumerate(range(0, n, BLOCK_SIZE)):
        stop = min(n, start + BLOCK_SIZE)
        h = sample_known_channel(make_rng(derive_seed(seed, b)), stop - start)
        out[start:stop] = h.real ** 2 + h.imag ** 2
    return out


class _PolicyTable:
    """Cubic spline of per-draw policy results over a stretched coordinate.

    The policies vary on two scales: the capacity ``log1p(a x)`` and the
    Marcum noncentrality ``s = k sqrt(x)``, whose influence is strongest for
    ``s`` of order one. Nodes are spaced uniformly in
    ``z = log1p(a x) + S_WEIGHT * asinh(s)`` so both are resolved.
    """

    S_WEIGHT = 3.0

    def __init__(self, a, k, x_lo, x_hi, solve, nodes=TABLE_NODES):
        self.a = a
        self.k = k
        dense = x_lo + (x_hi - x_lo) * np.linspace(0.0, 1.0, 8193) ** 2
        z_dense = self._z(dense)
        x = np.interp(np.linspace(z_dense[0], z_dense[-1], nodes), z_dense, dense)
        x[0], x[-1] = x_lo, x_hi
        z = self._z(x)
        thr, success = solve(x)
        self._thr = CubicSpline(z, thr)
        self._success = CubicSpline(z, success)

    def _z(self, x):
        return np.log1p(self.a * x) + self.S_WEIGHT * np.arcsinh(self.k * np.sqrt(x))

    def __call__(self, x):
        z = self._z(x)
        return self._thr(z), np.clip(self._success(z), 0.0, 1.0)


def _evaluate_partial(x, scheme, mean_scale, sigma, p_lin, method):
    """Per-draw ``(throughput, success)`` arrays for a partial-CSIT scheme."""
    g_hat = mean_scale * mean_scale * x

    if sigma < SIGMA_FLOOR:
        thr = np.log1p(g_hat * p_lin)
        return thr, np.ones_like(thr)

    def exact(xs):
        _, succ, thr = optimal_rate_exact_batch(mean_scale * mean_scale * xs, sigma, p_lin)
        return thr, succ

    def approx(xs):
        rates, _, _, s = approx_rate_batch(mean_scale * mean_scale * xs, sigma, p_lin)
        succ = success_prob_batch(s, sigma, p_lin, rates)
        return rates * succ, succ

    if method == "direct":
        if scheme is Scheme.PARTIAL_EXACT:
            return exact(x)
        s = np.sqrt(2.0 * g_hat) / sigma
        thr = np.empty_like(x)
        succ = np.empty_like(x)
        fb = s > LARGE_S_THRESHOLD
        if np.any(~fb):
            thr[~fb], succ[~fb] = approx(x[~fb])
        if np.any(fb):
            thr[fb], succ[fb] = exact(x[fb])
        return thr, succ
    if method != "table":
        raise ValueError(f"unknown method {method!r}")

    a = mean_scale * mean_scale * p_lin
    k = math.sqrt(2.0) * mean_scale / sigma
    x_max = float(x.max())
    if a == 0.0 or x_max == 0.0:
        thr, succ = (exact if scheme is Scheme.PARTIAL_EXACT else approx)(np.zeros(1))
        return np.full_like(x, thr[0]), np.full_like(x, succ[0])

    if scheme is Scheme.PARTIAL_EXACT:
        return _PolicyTable(a, k, 0.0, x_max, exact)(x)

    # approximate policy hands over to the exact one above s = 30
    x_switch = 0.5 * (LARGE_S_THRESHOLD * sigma) ** 2 / (mean_scale * mean_scale)
    thr = np.empty_like(x)
    succ = np.empty_like(x)
    low = x <= x_switch
    if np.any(low):
        table = _PolicyTable(a, k, 0.0, min(x_switch, x_max), approx, nodes=APPROX_TABLE_NODES)
        thr[low], succ[low] = table(x[low])
    if np.any(~low):
        table = _PolicyTable(a, k, x_switch, x_max, exact)
        thr[~low], succ[~low] = table(x[~low])
    return thr, succ


def evaluate_point(
    cfg: SystemConfig,
    schemes: Iterable[Scheme],
    n: int,
    seed: int,
    method: str = "table",
) -> dict:
    """Throughput and outage estimates of several schemes on shared draws."""
    schemes = [Scheme(s) for s in schemes]
    p_lin = cfg.p_lin
    mean_scale, sigma = temporal_combine(build_mismatch(cfg), cfg.beta)
    x = draw_known_gains(n, seed) if any(s is not Scheme.NO_CSIT for s in schemes) else None

    results = {}
    for scheme in schemes:
        if scheme is Scheme.NO_CSIT:
            d = rate_no_csit(p_lin)
            results[scheme] = PointResult(
                McEstimate.exact(d.expected_throughput_npcu, n, seed),
                McEstimate.exact(d.outage_prob, n, seed),
            )
        elif scheme is Scheme.FULL_CSIT:
            thr = np.log1p(mean_scale * mean_scale * x * p_lin)
            results[scheme] = PointResult(
                McEstimate.from_samples(thr, seed), McEstimate.exact(0.0, n, seed)
            )
        else:
            thr, succ = _evaluate_partial(x, scheme, mean_scale, sigma, p_lin, method)
            results[scheme] = PointResult(
                McEstimate.from_samples(thr, seed), McEstimate.from_samples(1.0 - succ, seed)
            )
    return results


def estimate_throughput(cfg: SystemConfig, scheme, n: int, seed: int, method: str = "table") -> McEstimate:
    """Expected throughput (npcu) of ``scheme`` over ``n`` seeded draws."""
    scheme = Scheme(scheme)
    return evaluate_point(cfg, [scheme], n, seed, method)[scheme].throughput


def estimate_outage(cfg: SystemConfig, scheme, n: int, seed: int, method: str = "table") -> McEstimate:
    """Average conditional outage probability of ``scheme``.

    Full CSIT never transmits above the realised capacity, so its outage is
    exactly zero.
    """
    scheme = Scheme(scheme)
    return evaluate_point(cfg, [scheme], n, seed, method)[scheme].outage


def run_sweep(spec: SweepSpec, threads: Optional[int] = None, method: str = "table") -> list:
    """Evaluate every ``(point, scheme)`` of ``spec``.

    Point ``i`` uses seed ``derive_seed(spec.seed, i)``. Points may run on a
    thread pool; each point is computed independently and rows are emitted
    in point order, so the output does not depend on ``threads``.
    """
    configs = [spec.axis.apply(spec.base, v) for v in spec.points]
    seeds = [derive_seed(spec.seed, i) for i in range(len(configs))]

    def one(i):
        try:
            return evaluate_point(configs[i], spec.schemes, spec.n_samples, seeds[i], method)
        except Exception as exc:
            raise SweepPointError(
                f"{spec.axis.value}={spec.points[i]!r} (point {i}): {exc}"
            ) from exc

    workers = max(1, int(threads or 1))
    if workers == 1:
        per_point = [one(i) for i in range(len(configs))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_point = list(pool.map(one, range(len(configs))))

    rows = []
    for i, res in enumerate(per_point):
        for scheme in spec.schemes:
            rows.append(
                SweepRow(
                    index=i,
                    axis_value=spec.points[i],
                    scheme=scheme,
                    config=configs[i],
                    throughput=res[scheme].throughput,
                    outage=res[scheme].outage,
                    seed=seeds[i],
                )
            )
    return rows


def sweep_series(rows: Sequence[SweepRow], scheme, attr: str = "throughput"):
    """``(axis_values, means, std_errors)`` arrays of one scheme from sweep rows."""
    scheme = Scheme(scheme)
    sel = [r for r in rows if r.scheme is scheme]
    est = [getattr(r, attr) for r in sel]
    return (
        np.array([r.axis_value for r in sel]),
        np.array([e.mean for e in est]),
        np.array([e.std_error for e in est]),
    )
