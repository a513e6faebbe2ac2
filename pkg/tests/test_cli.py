"""Tests of the command-line surface: outputs, determinism, exit codes."""

import numpy as np
import pytest

from subthermal.cli import main
from subthermal.distributions import SubtractionConfig, compound_poisson_pmf
from subthermal.traceio import read_samples


def run(*args) -> int:
    try:
        return main([str(a) for a in args])
    except SystemExit as exc:  # argparse errors
        return int(exc.code)


def _read_csv(path):
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    return header, rows


class TestPmfCommand:
    def test_head_value(self, tmp_path):
        out = tmp_path / "pmf.csv"
        assert run("pmf", "--M", 1, "--m", 1, "--K", 0, "--mu0", 0.24,
                   "--tail-tol", 1e-12, "--out", out) == 0
        header, rows = _read_csv(out)
        assert header == ["N", "P_model", "P_with_dark"]
        assert rows[0][0] == "0"
        assert float(rows[0][1]) == pytest.approx(1 / 1.24, rel=1e-9)

    def test_k0_independent_of_M(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run("pmf", "--M", 2, "--m", 2, "--K", 0, "--mu0", 0.5, "--out", a)
        run("pmf", "--M", 7, "--m", 2, "--K", 0, "--mu0", 0.5, "--out", b)
        assert a.read_bytes() == b.read_bytes()

    def test_whole_system_is_compound_poisson(self, tmp_path):
        out = tmp_path / "pmf.csv"
        run("pmf", "--M", 2, "--m", 2, "--K", 3, "--mu0", 0.5, "--out", out)
        _, rows = _read_csv(out)
        for row in rows[:10]:
            n = int(row[0])
            assert float(row[1]) == pytest.approx(
                compound_poisson_pmf(n, 0.5, 5.0), rel=1e-9, abs=1e-12
            )

    def test_invalid_params_exit_2(self, tmp_path):
        assert run("pmf", "--M", 1, "--m", 2, "--K", 0, "--mu0", 0.24,
                   "--out", tmp_path / "x.csv") == 2
        assert run("pmf", "--M", 1, "--m", 1, "--K", 0, "--mu0", -1.0,
                   "--out", tmp_path / "x.csv") == 2

    def test_missing_flag_exit_2(self, tmp_path):
        assert run("pmf", "--M", 1, "--m", 1, "--K", 0) == 2


class TestFiguresCommand:
    def test_4a_k_ordering_at_zero(self, tmp_path):
        assert run("figures", "--fig", "4a", "--out-dir", tmp_path, "--no-plot") == 0
        heads = []
        for K in range(6):
            _, rows = _read_csv(tmp_path / f"fig4a_M3_m3_K{K}.csv")
            heads.append(float(rows[0][2]))
        assert all(a > b for a, b in zip(heads, heads[1:]))

    def test_5a_slope(self, tmp_path):
        assert run("figures", "--fig", "5a", "--mu0", 0.24, "--out-dir", tmp_path,
                   "--no-plot") == 0
        _, rows = _read_csv(tmp_path / "fig5a_M5_K3.csv")
        mus = [float(r[1]) for r in rows]
        slope = mus[1] - mus[0]
        assert slope == pytest.approx(0.24 * (1 + 3 / 5), rel=1e-9)
        # exact proportionality mu/m
        for m, mu in zip(range(1, 6), mus):
            assert mu / m == pytest.approx(0.24 * (1 + 3 / 5), rel=1e-9)

    def test_5b_thermal_point(self, tmp_path):
        assert run("figures", "--fig", "5b", "--muD", 0.0, "--out-dir", tmp_path,
                   "--no-plot") == 0
        _, rows = _read_csv(tmp_path / "fig5b_M1_K0.csv")
        assert float(rows[0][1]) == pytest.approx(2.0, rel=1e-12)

    def test_renders_pngs(self, tmp_path):
        assert run("figures", "--fig", "4b", "--out-dir", tmp_path) == 0
        assert (tmp_path / "fig4b_M2_m1.png").exists()

    def test_png_bytes_deterministic(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run("figures", "--fig", "5b", "--out-dir", a)
        run("figures", "--fig", "5b", "--out-dir", b)
        assert (a / "fig5b_M3.png").read_bytes() == (b / "fig5b_M3.png").read_bytes()

    def test_unknown_fig_exit_2(self, tmp_path):
        assert run("figures", "--fig", "9z", "--out-dir", tmp_path) == 2


class TestSimulateCommand:
    def test_byte_determinism_and_summary(self, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["simulate", "--M", 2, "--m", 1, "--K", 1, "--mu-in", 1.0,
                "--trials", 500, "--seed", 9]
        assert run(*args, "--out", a) == 0
        assert run(*args, "--out", b) == 0
        assert a.read_bytes() == b.read_bytes()
        assert "acceptance" in a.read_text().splitlines()[0] or "rate" in a.read_text()
        samples = read_samples(a)
        assert samples.size == 500

    def test_abort_exit_4(self, tmp_path):
        assert run("simulate", "--M", 1, "--m", 1, "--K", 6, "--mu-in", 0.05,
                   "--trials", 100, "--seed", 1, "--acceptance-floor", 1e-3,
                   "--out", tmp_path / "x.csv") == 4


class TestSynthAnalyzeRoundTrip:
    def test_round_trip_self_test(self, tmp_path):
        trace = tmp_path / "trace.txt"
        report = tmp_path / "report.csv"
        assert run("synth", "--mu0", 0.24, "--muD", 0.0015, "--p-subtract", 0.4,
                   "--n-bins", 300_000, "--thin-period", 1, "--seed", 2024,
                   "--out", trace) == 0
        assert run("analyze", "--trace", trace, "--M", 2, "--m", 1,
                   "--K-list", "0,1,2", "--mu0", 0.24, "--muD", 0.0015,
                   "--seed", 5, "--report", report, "--no-plot", "--strict") == 0
        header, rows = _read_csv(report)
        assert header[:6] == ["K", "n_samples", "mu0", "chi2", "dof", "p_value"]
        assert len(rows) == 3
        for row in rows:
            assert row[-1] == "ok"
            assert float(row[5]) > 0.05
            assert 2000 <= int(row[1])

    def test_report_byte_determinism(self, tmp_path):
        trace = tmp_path / "trace.txt"
        run("synth", "--mu0", 0.3, "--p-subtract", 0.3, "--n-bins", 50_000,
            "--thin-period", 1, "--seed", 3, "--out", trace)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["analyze", "--trace", trace, "--M", 1, "--m", 1, "--K-list", "0,1",
                "--mu0", 0.3, "--muD", 0.0, "--seed", 8, "--no-plot"]
        assert run(*args, "--report", a) == 0
        assert run(*args, "--report", b) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_wrong_model_strict_exit_4(self, tmp_path):
        trace = tmp_path / "trace.txt"
        run("synth", "--mu0", 0.5, "--p-subtract", 0.0, "--muD", 0.0,
            "--n-bins", 100_000, "--thin-period", 1, "--seed", 4, "--out", trace)
        # analyze against a model with mu0 off by 2x: must reject
        assert run("analyze", "--trace", trace, "--M", 1, "--m", 1, "--K-list", "0",
                   "--mu0", 0.25, "--muD", 0.0, "--seed", 8,
                   "--report", tmp_path / "r.csv", "--no-plot", "--strict") == 4

    def test_fit_mu0_mode(self, tmp_path):
        trace = tmp_path / "trace.txt"
        run("synth", "--mu0", 0.24, "--muD", 0.0015, "--p-subtract", 0.4,
            "--n-bins", 100_000, "--thin-period", 1, "--seed", 6, "--out", trace)
        report = tmp_path / "r.csv"
        assert run("analyze", "--trace", trace, "--M", 1, "--m", 1, "--K-list", "0,1",
                   "--fit-mu0", "--muD", 0.0015, "--seed", 8, "--report", report,
                   "--no-plot") == 0
        _, rows = _read_csv(report)
        for row in rows:
            assert 0.20 <= float(row[2]) <= 0.28

    def test_empty_class_flagged(self, tmp_path):
        trace = tmp_path / "trace.txt"
        run("synth", "--mu0", 0.3, "--p-subtract", 0.0, "--muD", 0.0,
            "--n-bins", 5_000, "--thin-period", 1, "--seed", 4, "--out", trace)
        report = tmp_path / "r.csv"
        assert run("analyze", "--trace", trace, "--M", 1, "--m", 1, "--K-list", "0,5",
                   "--mu0", 0.3, "--muD", 0.0, "--seed", 8, "--report", report,
                   "--no-plot") == 0
        _, rows = _read_csv(report)
        assert rows[1][-1] == "insufficient_samples"

    def test_corrupt_trace_exit_3(self, tmp_path):
        bad = tmp_path / "bad.txt"
        bad.write_text("#subthermal-trace v1 tau_ns=100\n1,2\noops\n")
        assert run("analyze", "--trace", bad, "--M", 1, "--m", 1, "--mu0", 0.3,
                   "--seed", 1, "--report", tmp_path / "r.csv", "--no-plot") == 3

    def test_missing_mu0_and_fit_exit_2(self, tmp_path):
        trace = tmp_path / "trace.txt"
        run("synth", "--mu0", 0.3, "--p-subtract", 0.1, "--n-bins", 1_000,
            "--thin-period", 1, "--seed", 4, "--out", trace)
        assert run("analyze", "--trace", trace, "--M", 1, "--m", 1,
                   "--seed", 1, "--report", tmp_path / "r.csv", "--no-plot") == 2

    def test_analyze_events_input(self, tmp_path):
        from subthermal.traceio import write_events

        rng = np.random.default_rng(15)
        # homogeneous Poisson event stream on both channels
        ts_n = np.cumsum(rng.exponential(30_000, 40_000)).astype(np.int64)
        events = tmp_path / "events.txt"
        write_events([], ts_n, events)
        report = tmp_path / "r.csv"
        # Poisson counts are not thermal: just verify the pipeline runs and reports
        assert run("analyze", "--trace", events, "--tau-ns", 10_000, "--M", 1,
                   "--m", 1, "--K-list", "0", "--fit-mu0", "--muD", 0.0,
                   "--seed", 2, "--report", report, "--no-plot") == 0
        _, rows = _read_csv(report)
        assert rows[0][-1] == "ok"


class TestCommandConfig:
    def test_from_args_extracts_seed_and_outputs(self):
        from subthermal.cli import CommandConfig, build_parser

        args = build_parser().parse_args(
            ["synth", "--mu0", "0.3", "--p-subtract", "0.1", "--n-bins", "10",
             "--seed", "5", "--out", "trace.txt"]
        )
        cfg = CommandConfig.from_args(args)
        assert cfg == CommandConfig(command="synth", seed=5, outputs=("trace.txt",))


class TestMomentsCommand:
    def test_stdout_row(self, capsys):
        assert run("moments", "--M", 5, "--m", 2, "--K", 3, "--mu0", 0.24,
                   "--muD", 0.0015) == 0
        out = capsys.readouterr().out.splitlines()
        header = out[0].split(",")
        row = dict(zip(header, out[1].split(",")))
        assert float(row["mean"]) == pytest.approx(0.768)
        assert float(row["g2"]) == pytest.approx(1.40625)
        assert float(row["mean_with_dark"]) == pytest.approx(0.771)

    def test_csv_out(self, tmp_path):
        out = tmp_path / "m.csv"
        assert run("moments", "--M", 1, "--m", 1, "--K", 0, "--mu0", 1.0,
                   "--out", out) == 0
        _, rows = _read_csv(out)
        assert float(rows[0][6]) == pytest.approx(2.0)
