"""Throughput-optimal rate adaptation for predictor-antenna links.

Modules
-------
specfun
    Bessel J0 and I0, Marcum Q1 and its closed-form approximation, Lambert W.
channel
    Spatial mismatch model, conditional gain distribution and samplers.
rate_adapt
    Exact and closed-form rate policies plus the full/no CSIT benchmarks.
montecarlo
    Seeded throughput and outage estimates and parameter sweeps.
cli
    The ``pa-linksim`` command.
"""

from .channel import (
    SPEED_OF_LIGHT,
    ConditionalGain,
    MismatchModel,
    SystemConfig,
    build_mismatch,
    conditional_gain,
    conditional_gain_cdf,
    conditional_gain_pdf,
    inflate_sigma,
    make_rng,
    sample_actual_gain,
    sample_known_channel,
    temporal_combine,
)
from .montecarlo import (
    KMH,
    Axis,
    McEstimate,
    Scheme,
    SweepRow,
    SweepSpec,
    estimate_outage,
    estimate_throughput,
    run_sweep,
)
from .rate_adapt import (
    RateDecision,
    lemma1_params,
    optimal_rate_approx,
    optimal_rate_exact,
    rate_full_csit,
    rate_no_csit,
    throughput_given_rate,
)
from .specfun import DomainError, MarcumParams, bessel_j0, lambert_w0, marcum_q1, marcum_q1_approx

__version__ = "0.1.0"
