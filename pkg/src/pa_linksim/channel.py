"""Predictor-antenna mismatch channel.

The receive antenna sees ``H = sqrt(1 - sigma^2) * H_hat + sigma * q`` where
``H_hat`` is the predictor-antenna channel known at the base station and
``sigma`` follows from the Jakes correlation at the effective mismatch
distance ``d = |d_a - v * delta|``. A first-order Gauss-Markov step with
factor ``beta`` adds temporal decorrelation on top.

Given ``H_hat``, the gain ``g = |H|^2`` is noncentral chi-squared with
noncentrality mass ``g_hat`` and residual variance ``sigma^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .specfun import DomainError, bessel_i0_scaled, bessel_j0, marcum_q1

SPEED_OF_LIGHT = 299_792_458.0
UINT64_MAX = (1 << 64) - 1


@dataclass(frozen=True)
class SystemConfig:
    """Physical and link parameters, SI units throughout."""

    carrier_freq_hz: float = 2.68e9
    proc_delay_s: float = 5e-3
    antenna_sep_m: float = 1.5 * SPEED_OF_LIGHT / 2.68e9
    velocity_mps: float = 0.0
    snr_db: float = 0.0
    beta: float = 1.0

    def __post_init__(self):
        for name in ("carrier_freq_hz", "proc_delay_s", "antenna_sep_m"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive, got {value!r}")
        if not (math.isfinite(self.velocity_mps) and self.velocity_mps >= 0):
            raise ValueError(f"velocity_mps must be >= 0, got {self.velocity_mps!r}")
        if not math.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta!r}")

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq_hz

    @property
    def p_lin(self) -> float:
        """Linear SNR ``P``; the noise has unit variance."""
        return 10.0 ** (self.snr_db / 10.0)

    @property
    def antenna_sep_lambda(self) -> float:
        return self.antenna_sep_m / self.wavelength_m

    @property
    def matched_velocity_mps(self) -> float:
        """Speed at which the receive antenna lands exactly on the probed spot."""
        return self.antenna_sep_m / self.proc_delay_s


@dataclass(frozen=True)
class MismatchModel:
    wavelength_m: float
    effective_distance_m: float
    rho: float
    sigma: float


@dataclass(frozen=True)
class ConditionalGain:
    """Parameters of the gain distribution given the known channel.

    ``g_hat`` is the noncentrality mass ``mean_scale^2 * |H_hat|^2`` and
    ``sigma`` the residual standard deviation. ``sigma = 0`` is rejected:
    the density is singular there and callers use the deterministic gain.
    """

    g_hat: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.g_hat) and self.g_hat >= 0):
            raise ValueError(f"g_hat must be >= 0, got {self.g_hat!r}")
        if not (0.0 < self.sigma <= 1.0):
            raise ValueError(f"sigma must lie in (0, 1], got {self.sigma!r}")

    @property
    def s(self) -> float:
        """Marcum noncentrality ``sqrt(2 g_hat / sigma^2)``."""
        return math.sqrt(2.0 * self.g_hat) / self.sigma


def build_mismatch(cfg: SystemConfig) -> MismatchModel:
    """Effective distance, Jakes correlation and mismatch std for ``cfg``."""
    lam = cfg.wavelength_m
    d = abs(cfg.antenna_sep_m - cfg.velocity_mps * cfg.proc_delay_s)
    rho = bessel_j0(2.0 * math.pi * d / lam)
    sigma = math.sqrt(max(0.0, 1.0 - rho * rho))
    return MismatchModel(wavelength_m=lam, effective_distance_m=d, rho=rho, sigma=sigma)


def temporal_combine(m: MismatchModel, beta: float) -> tuple[float, float]:
    """Fold one Gauss-Markov step into the mismatch model.

    Returns ``(mean_scale, sigma_eff)`` with ``mean_scale = beta sqrt(1 -
    sigma^2)`` multiplying ``H_hat`` and ``sigma_eff^2 = (beta sigma)^2 + 1 -
    beta^2`` the variance of the combined Gaussian residual.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta!r}")
    sigma2 = m.sigma * m.sigma
    mean_scale = beta * math.sqrt(max(0.0, 1.0 - sigma2))
    sigma_eff = math.sqrt(min(1.0, (beta * m.sigma) ** 2 + 1.0 - beta * beta))
    return mean_scale, sigma_eff


def inflate_sigma(sigma_eff: float, extra_variance: float) -> float:
    """Add an independent estimation-error variance to the residual std.

    The result is capped at one so it still fits :class:`ConditionalGain`.
    """
    if extra_variance < 0:
        raise ValueError("extra_variance must be >= 0")
    return min(1.0, math.sqrt(sigma_eff * sigma_eff + extra_variance))


def conditional_gain(h_hat: complex, mean_scale: float, sigma_eff: float) -> ConditionalGain:
    return ConditionalGain(g_hat=mean_scale * mean_scale * abs(h_hat) ** 2, sigma=sigma_eff)


def conditional_gain_pdf(cg: ConditionalGain, x):
    """Noncentral chi-squared density of ``g`` given ``H_hat`` at ``x >= 0``.

    Evaluated as ``exp(-(sqrt(x) - sqrt(g_hat))^2 / sigma^2) * i0e(z) /
    sigma^2`` with ``z = 2 sqrt(x g_hat) / sigma^2`` so nothing overflows.
    """
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise DomainError("conditional_gain_pdf requires finite x >= 0")
    s2 = cg.sigma * cg.sigma
    root = np.sqrt(x)
    z = 2.0 * root * math.sqrt(cg.g_hat) / s2
    out = np.exp(-((root - math.sqrt(cg.g_hat)) ** 2) / s2) * bessel_i0_scaled(z) / s2
    return float(out) if scalar else out


def conditional_gain_cdf(cg: ConditionalGain, x):
    """``P(g <= x | H_hat) = 1 - Q1(sqrt(2 g_hat)/sigma, sqrt(2 x)/sigma)``."""
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise DomainError("conditional_gain_cdf requires finite x >= 0")
    out = 1.0 - marcum_q1(cg.s, np.sqrt(2.0 * x) / cg.sigma)
    return float(out) if scalar else out


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 stream for a 64-bit seed.

    PCG64 (O'Neill's permuted congruential generator, 128-bit state) is
    numpy's documented default bit generator; identical seeds give identical
    streams on every platform numpy supports.
    """
    seed = int(seed)
    if not 0 <= seed <= UINT64_MAX:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))


def sample_known_channel(rng: np.random.Generator, size=None):
    """Draw ``H_hat ~ CN(0, 1)``: independent N(0, 1/2) real and imaginary parts."""
    shape = () if size is None else tuple(np.atleast_1d(size).astype(int))
    h = _complex_normal(rng, shape)
    return complex(h) if size is None else h


def sample_actual_gain(h_hat, mean_scale: float, sigma_eff: float, rng: np.random.Generator):
    """Draw ``|mean_scale * H_hat + sigma_eff * w|^2`` with fresh ``w ~ CN(0, 1)``."""
    if mean_scale * mean_scale + sigma_eff * sigma_eff > 1.0 + 1e-9:
        raise ValueError("mean_scale^2 + sigma_eff^2 must not exceed 1")
    h_hat = np.asarray(h_hat, dtype=complex)
    w = _complex_normal(rng, h_hat.shape)
    g = np.abs(mean_scale * h_hat + sigma_eff * w) ** 2
    return float(g) if g.ndim == 0 else g


def _complex_normal(rng: np.random.Generator, shape):
    parts = rng.standard_normal((2,) + tuple(shape))
    return (parts[0] + 1j * parts[1]) * math.sqrt(0.5)
