import csv
import math
import subprocess
import sys

import numpy as np
import pytest
from scipy import special

from pa_linksim import cli
from pa_linksim.channel import SystemConfig
from pa_linksim.montecarlo import KMH, Axis, Scheme


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestParseConfig:
    def test_defaults(self):
        c, cfg = cli.parse_config(["eval"])
        assert cfg == SystemConfig()
        assert (c.n_samples, c.seed) == (100_000, 0)
        assert cfg.antenna_sep_lambda == pytest.approx(1.5)

    def test_velocity_conversion(self):
        _, cfg = cli.parse_config(["eval", "--set", "velocity_kmh=117"])
        assert cfg.velocity_mps == pytest.approx(32.5, rel=1e-15)

    def test_units(self):
        _, cfg = cli.parse_config(
            ["eval", "--set", "carrier_freq_ghz=3.5", "--set", "proc_delay_ms=2", "--set", "antenna_sep_lambda=1.4"]
        )
        assert cfg.carrier_freq_hz == 3.5e9
        assert cfg.proc_delay_s == pytest.approx(2e-3)
        assert cfg.antenna_sep_lambda == pytest.approx(1.4)

    def test_default_separation_follows_carrier(self):
        _, cfg = cli.parse_config(["eval", "--set", "carrier_freq_ghz=5"])
        assert cfg.antenna_sep_lambda == pytest.approx(1.5)

    def test_conflict_names_both_keys(self):
        with pytest.raises(cli.UsageError, match="antenna_sep_lambda.*antenna_sep_m"):
            cli.parse_config(["eval", "--set", "antenna_sep_m=0.2", "--set", "antenna_sep_lambda=1.5"])

    def test_unknown_key(self):
        with pytest.raises(cli.UsageError, match="'speed'"):
            cli.parse_config(["eval", "--set", "speed=3"])

    def test_malformed_number(self):
        with pytest.raises(cli.UsageError, match="snr_db"):
            cli.parse_config(["eval", "--set", "snr_db=ten"])

    def test_out_of_range_value(self):
        with pytest.raises(cli.UsageError, match="beta"):
            cli.parse_config(["eval", "--set", "beta=1.2"])

    def test_file_then_override(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# link\nsnr_db = 10   # dB\nvelocity_kmh = 100\n\nbeta=0.95\n")
        _, cfg = cli.parse_config(["eval", "--config", str(path), "--set", "snr_db=25", "--set", "velocity_mps=30"])
        assert cfg.snr_db == 25.0
        assert cfg.velocity_mps == 30.0
        assert cfg.beta == 0.95

    def test_file_errors_carry_line(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("snr_db = 10\nfoo = 1\n")
        with pytest.raises(cli.UsageError, match=r"bad.cfg:2.*'foo'"):
            cli.parse_config(["eval", "--config", str(path)])

    def test_missing_file(self, tmp_path):
        with pytest.raises(cli.UsageError, match="cannot read"):
            cli.parse_config(["eval", "--config", str(tmp_path / "nope.cfg")])

    def test_sweep_spec(self):
        _, spec = cli.parse_config(
            ["sweep", "--set", "axis=snr_db", "--set", "points=0:20:10", "--set", "schemes=PartialExact,no_csit", "--n", "500"]
        )
        assert spec.axis is Axis.SNR_DB
        assert spec.points == (0.0, 10.0, 20.0)
        assert spec.schemes == (Scheme.PARTIAL_EXACT, Scheme.NO_CSIT)
        assert spec.n_samples == 500

    def test_sweep_default_points(self):
        _, spec = cli.parse_config(["sweep", "--set", "axis=velocity_kmh"])
        assert spec.points[0] == 60.0 and spec.points[-1] == 180.0

    def test_sweep_needs_axis(self):
        with pytest.raises(cli.UsageError, match="axis"):
            cli.parse_config(["sweep"])

    def test_axis_only_for_sweep(self):
        with pytest.raises(cli.UsageError, match="only applies"):
            cli.parse_config(["eval", "--set", "axis=snr_db"])

    def test_points_parser(self):
        assert cli.parse_points("0.9,0.95,1") == (0.9, 0.95, 1.0)
        assert cli.parse_points("0:1:0.1")[-1] == 1.0
        with pytest.raises(cli.UsageError):
            cli.parse_points("1:2:0")


class TestMain:
    @pytest.mark.parametrize(
        "argv",
        [
            ["eval", "--set", "foo=1"],
            ["eval", "--set", "velocity_kmh=1", "--set", "velocity_mps=1"],
            ["eval", "--set", "beta=x"],
            ["eval", "--set", "noequals"],
        ],
    )
    def test_usage_errors_exit_nonzero(self, argv, capsys):
        code, out, err = run(argv, capsys)
        assert code == 2
        assert "error" in err and out == ""

    def test_bad_flag_values(self):
        for argv in (["eval", "--seed", "-1"], ["eval", "--n", "0"], ["figure", "fig9"]):
            with pytest.raises(SystemExit) as exc:
                cli.main(argv)
            assert exc.value.code == 2

    def test_eval_summary_and_csv(self, tmp_path, capsys):
        out_path = tmp_path / "eval.csv"
        code, out, _ = run(
            ["eval", "--set", "velocity_kmh=117", "--set", "snr_db=25", "--n", "20000", "--out", str(out_path)], capsys
        )
        assert code == 0
        for token in ("sigma =", "omega =", "nu =", "s =", "throughput", "outage", " s]"):
            assert token in out
        rows = read_csv(out_path)
        assert [r["scheme"] for r in rows] == [s.value for s in Scheme]
        t = {r["scheme"]: float(r["throughput_npcu"]) for r in rows}
        assert t["no_csit"] <= t["partial_approx"] <= t["partial_exact"] <= t["full_csit"]
        assert all(r["n"] == "20000" and r["seed"] == "0" for r in rows)
        assert float(rows[0]["throughput_bpcu"]) == pytest.approx(float(rows[0]["throughput_npcu"]) / math.log(2))

    def test_eval_at_matched_speed(self, tmp_path, capsys):
        v = SystemConfig().matched_velocity_mps
        out_path = tmp_path / "m.csv"
        code, out, _ = run(["eval", "--set", f"velocity_mps={v!r}", "--n", "20000", "--out", str(out_path)], capsys)
        assert code == 0
        sigma = float(out.split("sigma = ")[1].split(",")[0])
        assert sigma <= 1e-6
        rows = {r["scheme"]: r for r in read_csv(out_path)}
        full, part = rows["full_csit"], rows["partial_exact"]
        assert abs(float(full["throughput_npcu"]) - float(part["throughput_npcu"])) <= 3 * float(full["throughput_stderr"])

    def test_eval_no_csit_closed_form(self, tmp_path, capsys):
        out_path = tmp_path / "n.csv"
        code, _, _ = run(["eval", "--set", "scheme=no_csit", "--n", "100", "--out", str(out_path)], capsys)
        assert code == 0
        (row,) = read_csv(out_path)
        w = special.lambertw(1.0).real
        assert float(row["throughput_npcu"]) == pytest.approx(w * math.exp(-math.expm1(w)), rel=1e-15)

    def test_csv_format(self, tmp_path, capsys):
        out_path = tmp_path / "s.csv"
        argv = ["sweep", "--set", "axis=beta", "--set", "points=0.9,1", "--n", "200", "--seed", "7", "--out", str(out_path)]
        assert run(argv, capsys)[0] == 0
        raw = out_path.read_bytes()
        assert raw.endswith(b"\n") and b"\r" not in raw
        lines = raw.decode().splitlines()
        assert lines[0] == ",".join(cli.CSV_COLUMNS)
        assert len(lines) == 1 + 2 * 4
        assert all(line.split(",")[-1] != "" for line in lines[1:])

    def test_unwritable_output(self, tmp_path, capsys):
        target = tmp_path / "missing" / "x.csv"
        code, _, err = run(["eval", "--set", "scheme=no_csit", "--n", "100", "--out", str(target)], capsys)
        assert code == 1
        assert str(target) in err

    def test_figure_determinism_small(self, tmp_path, capsys):
        paths = [tmp_path / f"f{i}.csv" for i in range(3)]
        for p, threads in zip(paths, ("1", "1", "3")):
            assert run(["figure", "fig2", "--n", "300", "--seed", "42", "--threads", threads, "--out", str(p)], capsys)[0] == 0
        assert paths[0].read_bytes() == paths[1].read_bytes() == paths[2].read_bytes()

    def test_fig4_outage_decreases_with_snr(self, tmp_path, capsys):
        out_path = tmp_path / "fig4.csv"
        assert run(["figure", "fig4", "--n", "2000", "--out", str(out_path)], capsys)[0] == 0
        rows = [r for r in read_csv(out_path) if r["beta"] == "1.0"]
        outage = np.array([float(r["outage"]) for r in rows])
        assert len(rows) == 9
        assert np.all(np.diff(outage) < 0)

    def test_module_entry_point(self):
        res = subprocess.run([sys.executable, "-m", "pa_linksim", "eval", "--set", "bogus=1"], capture_output=True, text=True)
        assert res.returncode == 2
        assert "bogus" in res.stderr


class TestFigures:
    def test_velocity_figures_cover_separations(self):
        specs = cli.figure_sweeps("fig3", SystemConfig(), 1000, 0)
        combos = {(s.base.beta, round(s.base.antenna_sep_lambda, 6)) for s in specs}
        assert combos == {(1.0, 1.5), (0.95, 1.5), (0.9, 1.5), (1.0, 1.4), (1.0, 1.6)}
        assert all(s.axis is Axis.VELOCITY_KMH and s.base.snr_db == 25.0 for s in specs)
        assert specs[0].points[0] == 60.0 and specs[0].points[-1] == 180.0

    def test_snr_figures(self):
        specs = cli.figure_sweeps("fig2", SystemConfig(), 1000, 0)
        assert [s.base.beta for s in specs] == [1.0, 0.95, 0.9]
        assert all(s.base.velocity_mps == pytest.approx(117 * KMH) for s in specs)
        assert specs[0].schemes == tuple(Scheme)
        assert cli.figure_sweeps("fig5", SystemConfig(), 1000, 0)[0].base.snr_db == 10.0
