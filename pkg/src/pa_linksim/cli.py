"""Command-line front end: ``pa-linksim eval|sweep|figure``.

Configuration comes from built-in defaults, then an optional flat
``key = value`` file (``#`` starts a comment), then ``--set key=value``
overrides, later sources winning. Results are written as CSV; a summary
goes to standard output and errors to standard error.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from .channel import UINT64_MAX, SystemConfig, build_mismatch, temporal_combine
from .montecarlo import KMH, Axis, Scheme, SweepSpec, evaluate_point, run_sweep
from .rate_adapt import (
    lemma1_params_batch,
    optimal_rate_approx_batch,
    optimal_rate_exact_batch,
    rate_no_csit,
)
from .specfun import LARGE_S_THRESHOLD

CSV_COLUMNS = (
    "axis_name",
    "axis_value",
    "scheme",
    "beta",
    "d_a_lambda",
    "throughput_npcu",
    "throughput_bpcu",
    "throughput_stderr",
    "outage",
    "outage_stderr",
    "n",
    "seed",
)

DEFAULT_N = 100_000
DEFAULT_SEED = 0

_SYSTEM_KEYS = (
    "carrier_freq_ghz",
    "proc_delay_ms",
    "antenna_sep_lambda",
    "antenna_sep_m",
    "velocity_kmh",
    "velocity_mps",
    "snr_db",
    "beta",
)
_LIST_KEYS = ("scheme", "schemes", "axis", "points")
KNOWN_KEYS = _SYSTEM_KEYS + _LIST_KEYS
_CONFLICTS = (
    ("antenna_sep_lambda", "antenna_sep_m"),
    ("velocity_kmh", "velocity_mps"),
    ("scheme", "schemes"),
)

DEFAULT_POINTS = {
    Axis.SNR_DB: "0:40:5",
    Axis.VELOCITY_KMH: "60:180:5",
    Axis.BETA: "0.9,0.95,1",
    Axis.ANTENNA_SEP_LAMBDA: "1.4,1.5,1.6",
}

FIGURES = ("fig2", "fig3", "fig4", "fig5")
FIG_SNR_POINTS = tuple(float(v) for v in range(0, 41, 5))
# 1 km/h steps resolve the throughput peak of every antenna separation
FIG_VELOCITY_POINTS = tuple(float(v) for v in range(60, 181))
FIG_BETAS = (1.0, 0.95, 0.9)
FIG_SEPARATIONS = (1.4, 1.6)


class UsageError(Exception):
    """Invalid command line or configuration; maps to exit status 2."""


@dataclass(frozen=True)
class CliConfig:
    subcommand: str
    config_path: Optional[str] = None
    overrides: tuple = ()
    output_path: Optional[str] = None
    seed: int = DEFAULT_SEED
    n_samples: int = DEFAULT_N
    threads: Optional[int] = None
    figure: Optional[str] = None
    settings: dict = field(default_factory=dict)


def _parse_seed(text: str) -> int:
    try:
        seed = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed seed {text!r}") from None
    if not 0 <= seed <= UINT64_MAX:
        raise argparse.ArgumentTypeError(f"seed {text!r} is not an unsigned 64-bit integer")
    return seed


def _parse_positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed integer {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="key = value configuration file")
    common.add_argument(
        "--set",
        dest="overrides",
        metavar="KEY=VALUE",
        action="append",
        default=[],
        help="override one configuration key (repeatable)",
    )
    common.add_argument("--out", metavar="FILE", help="CSV output path")
    common.add_argument("--seed", type=_parse_seed, default=DEFAULT_SEED, help="64-bit master seed")
    common.add_argument("--n", type=_parse_positive_int, default=DEFAULT_N, help="draws of H_hat per point")
    common.add_argument("--threads", type=_parse_positive_int, default=None, help="worker cap")

    parser = argparse.ArgumentParser(
        prog="pa-linksim",
        description="Rate adaptation simulator for predictor-antenna links.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    sub.add_parser("eval", parents=[common], help="evaluate all schemes at one configuration")
    sub.add_parser("sweep", parents=[common], help="sweep one axis (keys: axis, points)")
    fig = sub.add_parser("figure", parents=[common], help="reproduce one figure as CSV")
    fig.add_argument("name", choices=FIGURES)
    return parser


def read_config_file(path: str) -> list:
    """``(key, value, origin)`` triples of a flat ``key = value`` file."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from None
    items = []
    for lineno, line in enumerate(lines, 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        items.append(_split_assignment(text, f"{path}:{lineno}"))
    return items


def _split_assignment(text: str, origin: str):
    if "=" not in text:
        raise UsageError(f"{origin}: expected key = value, got {text!r}")
    key, value = (part.strip() for part in text.split("=", 1))
    if not key:
        raise UsageError(f"{origin}: missing key in {text!r}")
    return key.lower(), value, origin


def merge_settings(file_items: Sequence, override_items: Sequence) -> dict:
    """Apply file entries then CLI overrides; reject unknown and conflicting keys.

    A unit conflict is only an error within one source: an override in the
    other unit replaces the file entry.
    """
    settings: dict = {}
    for source in (file_items, override_items):
        seen = {}
        for key, value, origin in source:
            if key not in KNOWN_KEYS:
                raise UsageError(f"{origin}: unknown key {key!r}")
            seen[key] = (value, origin)
        for a, b in _CONFLICTS:
            if a in seen and b in seen:
                raise UsageError(f"conflicting keys {a!r} and {b!r} given together")
        for key, entry in seen.items():
            for a, b in _CONFLICTS:
                if key in (a, b):
                    settings.pop(b if key == a else a, None)
            settings[key] = entry
    return settings


def _number(settings: dict, key: str) -> Optional[float]:
    if key not in settings:
        return None
    value, origin = settings[key]
    try:
        number = float(value)
    except ValueError:
        raise UsageError(f"{origin}: malformed number for {key!r}: {value!r}") from None
    if not math.isfinite(number):
        raise UsageError(f"{origin}: {key!r} must be finite, got {value!r}")
    return number


def system_config_from(settings: dict) -> SystemConfig:
    """Build a :class:`SystemConfig` on top of the built-in defaults."""
    cfg = SystemConfig()
    kwargs = {}
    f_ghz = _number(settings, "carrier_freq_ghz")
    if f_ghz is not None:
        kwargs["carrier_freq_hz"] = f_ghz * 1e9
    delay_ms = _number(settings, "proc_delay_ms")
    if delay_ms is not None:
        kwargs["proc_delay_s"] = delay_ms * 1e-3
    for key in ("snr_db", "beta", "velocity_mps", "antenna_sep_m"):
        value = _number(settings, key)
        if value is not None:
            kwargs[key] = value
    v_kmh = _number(settings, "velocity_kmh")
    if v_kmh is not None:
        kwargs["velocity_mps"] = v_kmh * KMH
    sep_lambda = _number(settings, "antenna_sep_lambda")
    if sep_lambda is None and "antenna_sep_m" not in kwargs:
        # the default separation is 1.5 wavelengths of whatever carrier is set
        sep_lambda = 1.5
    try:
        cfg = replace(cfg, **kwargs)
        if sep_lambda is not None:
            # wavelengths are relative to the configured carrier
            cfg = replace(cfg, antenna_sep_m=sep_lambda * cfg.wavelength_m)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return cfg


def schemes_from(settings: dict) -> tuple:
    key = "schemes" if "schemes" in settings else "scheme"
    if key not in settings:
        return tuple(Scheme)
    value, origin = settings[key]
    lookup = {s.value.replace("_", ""): s for s in Scheme}
    out = []
    for name in filter(None, (p.strip() for p in value.split(","))):
        norm = name.lower().replace("_", "").replace("-", "")
        if norm not in lookup:
            raise UsageError(f"{origin}: unknown scheme {name!r}")
        out.append(lookup[norm])
    if not out:
        raise UsageError(f"{origin}: empty scheme list")
    return tuple(dict.fromkeys(out))


def parse_points(text: str, origin: str = "points") -> tuple:
    """``"a,b,c"`` or an inclusive ``"start:stop:step"`` range."""
    try:
        if ":" in text:
            start, stop, step = (float(p) for p in text.split(":"))
            if step <= 0:
                raise ValueError
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            # rounding keeps 0.1-style steps free of binary noise
            return tuple(round(start + i * step, 12) for i in range(count))
        return tuple(float(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise UsageError(f"{origin}: malformed points {text!r}") from None


def sweep_spec_from(settings: dict, base: SystemConfig, n: int, seed: int) -> SweepSpec:
    if "axis" not in settings:
        raise UsageError("sweep needs an 'axis' key (snr_db, velocity_kmh, beta, antenna_sep_lambda)")
    value, origin = settings["axis"]
    try:
        axis = Axis(value.strip().lower())
    except ValueError:
        raise UsageError(f"{origin}: unknown axis {value!r}") from None
    if "points" in settings:
        text, p_origin = settings["points"]
    else:
        text, p_origin = DEFAULT_POINTS[axis], "default points"
    points = parse_points(text, p_origin)
    try:
        return SweepSpec(base, axis, points, schemes_from(settings), n, seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def parse_config(argv: Sequence[str]):
    """Parse ``argv`` into a :class:`CliConfig` and the run description.

    The second element is a :class:`SystemConfig` for ``eval`` and
    ``figure`` (the figure base) and a :class:`SweepSpec` for ``sweep``.
    Raises :class:`UsageError`; argparse-level errors exit directly.
    """
    args = build_parser().parse_args(list(argv))
    file_items = read_config_file(args.config) if args.config else []
    override_items = [_split_assignment(o, f"--set {o}") for o in args.overrides]
    settings = merge_settings(file_items, override_items)
    if args.subcommand != "sweep":
        for key in ("axis", "points"):
            if key in settings:
                raise UsageError(f"{settings[key][1]}: key {key!r} only applies to sweep")
    cli = CliConfig(
        subcommand=args.subcommand,
        config_path=args.config,
        overrides=tuple(args.overrides),
        output_path=args.out,
        seed=args.seed,
        n_samples=args.n,
        threads=args.threads,
        figure=getattr(args, "name", None),
        settings=settings,
    )
    base = system_config_from(settings)
    if args.subcommand == "sweep":
        return cli, sweep_spec_from(settings, base, args.n, args.seed)
    return cli, base


def _fmt(x) -> str:
    # repr is the shortest round-tripping form and ignores the locale
    return repr(float(x))


def row_fields(axis_name: str, axis_value, scheme: Scheme, cfg: SystemConfig, thr, out) -> list:
    return [
        axis_name,
        "" if axis_value is None else _fmt(axis_value),
        scheme.value,
        _fmt(cfg.beta),
        _fmt(cfg.antenna_sep_lambda),
        _fmt(thr.mean),
        _fmt(thr.mean / math.log(2.0)),
        _fmt(thr.std_error),
        _fmt(out.mean),
        _fmt(out.std_error),
        str(thr.n_samples),
        str(thr.seed),
    ]


def sweep_rows_to_fields(spec: SweepSpec, rows) -> list:
    return [
        row_fields(spec.axis.value, r.axis_value, r.scheme, r.config, r.throughput, r.outage)
        for r in rows
    ]


def render_csv(records: Sequence[Sequence[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    writer.writerows(records)
    return buf.getvalue()


def write_output(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def figure_sweeps(name: str, base: SystemConfig, n: int, seed: int) -> list:
    """The sweeps that make up one figure.

    Every variant uses the same master seed, so β and separation variants
    share their draws point by point.
    """
    lam = base.wavelength_m
    nominal = replace(base, antenna_sep_m=1.5 * lam, beta=1.0)
    out = []
    if name in ("fig2", "fig4"):
        fixed = replace(nominal, velocity_mps=117.0 * KMH)
        schemes = tuple(Scheme) if name == "fig2" else (Scheme.PARTIAL_EXACT,)
        for beta in FIG_BETAS:
            out.append(SweepSpec(replace(fixed, beta=beta), Axis.SNR_DB, FIG_SNR_POINTS, schemes, n, seed))
        return out
    fixed = replace(nominal, snr_db=25.0 if name == "fig3" else 10.0)
    for beta in FIG_BETAS:
        out.append(
            SweepSpec(replace(fixed, beta=beta), Axis.VELOCITY_KMH, FIG_VELOCITY_POINTS, (Scheme.PARTIAL_EXACT,), n, seed)
        )
    for sep in FIG_SEPARATIONS:
        out.append(
            SweepSpec(
                replace(fixed, antenna_sep_m=sep * lam),
                Axis.VELOCITY_KMH,
                FIG_VELOCITY_POINTS,
                (Scheme.PARTIAL_EXACT,),
                n,
                seed,
            )
        )
    return out


def _threads(cli: CliConfig) -> int:
    return cli.threads if cli.threads is not None else (os.cpu_count() or 1)


def cmd_figure(cli: CliConfig, base: SystemConfig) -> str:
    records = []
    for spec in figure_sweeps(cli.figure, base, cli.n_samples, cli.seed):
        records.extend(sweep_rows_to_fields(spec, run_sweep(spec, threads=_threads(cli))))
    return render_csv(records)


def cmd_sweep(cli: CliConfig, spec: SweepSpec) -> str:
    return render_csv(sweep_rows_to_fields(spec, run_sweep(spec, threads=_threads(cli))))


def cmd_eval(cli: CliConfig, cfg: SystemConfig, stream=None) -> str:
    """Evaluate every configured scheme at ``cfg`` and print a summary.

    Policy parameters are shown for the reference draw ``|H_hat|^2 = 1``,
    the mean of the known gain.
    """
    stream = stream or sys.stdout
    schemes = schemes_from(cli.settings)
    mm = build_mismatch(cfg)
    mean_scale, sigma = temporal_combine(mm, cfg.beta)
    p = cfg.p_lin
    g_ref = mean_scale * mean_scale

    print("pa-linksim eval", file=stream)
    print(
        f"  f_c = {cfg.carrier_freq_hz / 1e9:g} GHz, delay = {cfg.proc_delay_s * 1e3:g} ms, "
        f"d_a = {cfg.antenna_sep_lambda:.6g} lambda, v = {cfg.velocity_mps / KMH:.6g} km/h, "
        f"SNR = {cfg.snr_db:g} dB, beta = {cfg.beta:g}",
        file=stream,
    )
    print(
        f"  d = {mm.effective_distance_m:.6g} m, rho = {mm.rho:.6g}, sigma = {mm.sigma:.6g}, "
        f"mean_scale = {mean_scale:.6g}, sigma_eff = {sigma:.6g}",
        file=stream,
    )
    print(f"  n = {cli.n_samples}, seed = {cli.seed}; policy shown for |H_hat|^2 = 1", file=stream)

    records = []
    for scheme in schemes:
        start = time.perf_counter()
        res = evaluate_point(cfg, [scheme], cli.n_samples, cli.seed)[scheme]
        elapsed = time.perf_counter() - start
        detail = _policy_detail(scheme, g_ref, sigma, p)
        print(
            f"  {scheme.value:<15} throughput = {res.throughput.mean:.6f} +- {res.throughput.std_error:.2g} npcu"
            f"  outage = {res.outage.mean:.3e} +- {res.outage.std_error:.2g}  [{elapsed:.3f} s]  {detail}",
            file=stream,
        )
        records.append(row_fields("none", None, scheme, cfg, res.throughput, res.outage))
    return render_csv(records)


def _policy_detail(scheme: Scheme, g_ref: float, sigma: float, p: float) -> str:
    if scheme is Scheme.NO_CSIT:
        return f"R = W(P) = {rate_no_csit(p).rate_npcu:.6g}"
    if scheme is Scheme.FULL_CSIT:
        return f"R = log(1 + g P) = {math.log1p(g_ref * p):.6g}"
    if sigma < 1e-12:
        return "sigma = 0: deterministic gain"
    if scheme is Scheme.PARTIAL_EXACT:
        r, _, _ = optimal_rate_exact_batch(g_ref, sigma, p)
        return f"R = {r[0]:.6g}"
    omega, nu, s = lemma1_params_batch(g_ref, sigma, p)
    r, _, _, fb = optimal_rate_approx_batch(g_ref, sigma, p)
    note = f" (s > {LARGE_S_THRESHOLD:g}: exact fallback)" if fb[0] else ""
    return f"R = {r[0]:.6g}, omega = {float(omega):.6g}, nu = {float(nu):.6g}, s = {float(s):.6g}{note}"


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cli, target = parse_config(argv)
    except UsageError as exc:
        print(f"pa-linksim: error: {exc}", file=sys.stderr)
        return 2
    try:
        if cli.subcommand == "eval":
            text = cmd_eval(cli, target)
        elif cli.subcommand == "sweep":
            text = cmd_sweep(cli, target)
            print(f"swept {target.axis.value} over {len(target.points)} points", file=sys.stdout)
        else:
            text = cmd_figure(cli, target)
            print(f"{cli.figure}: {text.count(chr(10)) - 1} rows", file=sys.stdout)
        out = cli.output_path
        if out is None and cli.subcommand != "eval":
            out = f"{cli.figure}.csv" if cli.subcommand == "figure" else "sweep.csv"
        if out is not None:
            write_output(out, text)
            print(f"wrote {out}", file=sys.stdout)
    except Exception as exc:  # noqa: BLE001 - any failure must map to a nonzero exit
        print(f"pa-linksim: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
