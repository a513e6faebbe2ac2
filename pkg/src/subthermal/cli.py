"""Batch command-line interface.

Subcommands: ``pmf``, ``figures``, ``simulate``, ``synth``, ``analyze``,
``moments``.  Delimited output is CSV with a one-line column header; report
paths additionally render PNG figures alongside the CSV unless ``--no-plot``
is given.  Every randomized command requires an explicit ``--seed``: a run
with identical flags and seed produces byte-identical output files.

Exit codes: 0 success, 2 invalid arguments, 3 input-format or I/O error,
4 statistical failure (the ``analyze --strict`` CI gate, and aborted
simulations).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .distributions import (
    Moments,
    SubtractionConfig,
    convolve_dark_counts,
    moments_with_dark,
    subsystem_table,
    theoretical_g2,
    theoretical_mean,
)
from .pipeline import chi2_test, estimate_moments, fit_mu0, group_and_condition, thin_bins
from .simulator import SimConfig, SimulationAbort, TraceConfig, run_conditional, synth_experiment_trace
from .traceio import TraceFormatError, load_trace, write_samples, write_trace

__all__ = ["main", "build_parser", "CommandConfig"]

_FLOAT_FMT = "%.10g"
_FIG_KS = range(6)
_FIG_MS = range(1, 6)


@dataclass(frozen=True)
class CommandConfig:
    """Resolved invocation: subcommand, seed (if randomized), output paths.

    Two invocations with equal CommandConfig and equal remaining flags
    produce byte-identical files at ``outputs``.
    """

    command: str
    seed: int | None
    outputs: tuple[str, ...]

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "CommandConfig":
        outputs = []
        for attr in ("out", "report"):
            value = getattr(args, attr, None)
            if value:
                outputs.append(str(value))
        if getattr(args, "out_dir", None):
            outputs.append(str(args.out_dir))
        return cls(command=args.command, seed=getattr(args, "seed", None),
                   outputs=tuple(outputs))


def _fmt(value) -> str:
    if isinstance(value, float):
        return _FLOAT_FMT % value
    return str(value)


def _write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _dark_table(cfg: SubtractionConfig, muD_total: float, tail_tol: float):
    return convolve_dark_counts(subsystem_table(cfg, tail_tol), muD_total)


# ----------------------------------------------------------------- pmf

def _cmd_pmf(args) -> int:
    cfg = SubtractionConfig(args.M, args.m, args.K, args.mu0)
    base = subsystem_table(cfg, args.tail_tol)
    dark = convolve_dark_counts(base, args.m * args.muD)
    rows = []
    for n in range(dark.probs.size):
        p_model = base.probs[n] if n < base.probs.size else 0.0
        rows.append((n, float(p_model), float(dark.probs[n])))
    _write_csv(args.out, ["N", "P_model", "P_with_dark"], rows)
    if args.plot:
        from .plotting import save_pmf_figure

        n = np.arange(dark.probs.size)
        save_pmf_figure(
            [(f"M={cfg.M} m={cfg.m} K={cfg.K}", n, dark.probs)],
            Path(args.out).with_suffix(".png"),
            f"subsystem law, mu0={cfg.mu0}",
        )
    return 0


# ------------------------------------------------------------- figures

def _fig4_families(fig_id: str):
    if fig_id == "4a":
        return [(M, M) for M in _FIG_MS]
    if fig_id == "4b":
        return [(M, 1) for M in _FIG_MS]
    return [(5, m) for m in _FIG_MS]  # 4c


def _cmd_figures(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[str] = []

    if args.fig in ("4a", "4b", "4c"):
        for M, m in _fig4_families(args.fig):
            curves = []
            for K in _FIG_KS:
                cfg = SubtractionConfig(M, m, K, args.mu0)
                base = subsystem_table(cfg, args.tail_tol)
                dark = convolve_dark_counts(base, m * args.muD)
                name = out_dir / f"fig{args.fig}_M{M}_m{m}_K{K}.csv"
                rows = [
                    (n, float(base.probs[n]) if n < base.probs.size else 0.0, float(dark.probs[n]))
                    for n in range(dark.probs.size)
                ]
                _write_csv(name, ["N", "P_model", "P_with_dark"], rows)
                written.append(str(name))
                curves.append((f"K={K}", np.arange(dark.probs.size), dark.probs))
            if args.plot:
                from .plotting import save_pmf_figure

                save_pmf_figure(curves, out_dir / f"fig{args.fig}_M{M}_m{m}.png",
                                f"fig {args.fig}: M={M}, m={m}, mu0={args.mu0}")
    elif args.fig in ("5a", "5b"):
        for M in _FIG_MS:
            curves = []
            for K in _FIG_KS:
                rows = []
                ys = []
                for m in range(1, M + 1):
                    cfg = SubtractionConfig(M, m, K, args.mu0)
                    theory = Moments(theoretical_mean(cfg), theoretical_g2(cfg))
                    shifted = moments_with_dark(theory, m * args.muD)
                    if args.fig == "5a":
                        rows.append((m, theory.mean, shifted.mean))
                        ys.append(shifted.mean)
                    else:
                        rows.append((m, theory.g2, shifted.g2))
                        ys.append(shifted.g2)
                name = out_dir / f"fig{args.fig}_M{M}_K{K}.csv"
                column = "mu" if args.fig == "5a" else "g2"
                _write_csv(name, ["m", column, f"{column}_with_dark"], rows)
                written.append(str(name))
                curves.append((f"K={K}", np.arange(1, M + 1), np.array(ys)))
            if args.plot:
                from .plotting import save_moment_figure

                ylabel = "mean photon number" if args.fig == "5a" else "g2(0)"
                save_moment_figure(curves, out_dir / f"fig{args.fig}_M{M}.png",
                                   f"fig {args.fig}: M={M}, mu0={args.mu0}", ylabel)
    print(f"wrote {len(written)} curve files to {out_dir}")
    return 0


# ------------------------------------------------------------ simulate

def _cmd_simulate(args) -> int:
    cfg = SimConfig(M=args.M, m=args.m, K_condition=args.K, mu_in=args.mu_in,
                    trials=args.trials, seed=args.seed, r=args.r,
                    acceptance_floor=args.acceptance_floor)
    result = run_conditional(cfg)
    write_samples(result.samples, args.out, meta={
        "M": cfg.M, "m": cfg.m, "K": cfg.K_condition, "mu_in": cfg.mu_in,
        "r": cfg.r, "seed": cfg.seed,
        "accepted": result.samples.size, "trials": result.trials_total,
        "acceptance_rate": _FLOAT_FMT % result.acceptance_rate,
    })
    print(f"accepted {result.samples.size} of {result.trials_total} trials "
          f"(rate {result.acceptance_rate:.3e}) -> {args.out}")
    return 0


# --------------------------------------------------------------- synth

def _cmd_synth(args) -> int:
    cfg = TraceConfig(mu0=args.mu0, muD_per_mode=args.muD, tau_ns=args.tau_ns,
                      thin_period_bins=args.thin_period, n_bins=args.n_bins,
                      p_subtract=args.p_subtract, seed=args.seed)
    trace = synth_experiment_trace(cfg)
    write_trace(trace, args.out)
    print(f"wrote {len(trace)} bins (tau={trace.tau_ns} ns) -> {args.out}")
    return 0


# ------------------------------------------------------------- analyze

def _parse_k_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise ValueError(f"--K-list must be comma-separated integers, got {text!r}") from None
    if not values or any(v < 0 for v in values):
        raise ValueError("--K-list must contain nonnegative integers")
    return values


def _cmd_analyze(args) -> int:
    if (args.mu0 is None) == (not args.fit_mu0):
        raise ValueError("exactly one of --mu0 or --fit-mu0 is required")
    k_values = _parse_k_list(args.K_list)
    trace = load_trace(args.trace, tau_ns=args.tau_ns)
    trace = thin_bins(trace, args.thin_period)
    muD_total = args.m * args.muD

    header = ["K", "n_samples", "mu0", "chi2", "dof", "p_value",
              "mu_hat", "mu_se", "g2_hat", "g2_se", "status"]
    rows = []
    rejected = False
    for K in k_values:
        samples = group_and_condition(trace, args.M, args.m, K)
        if samples.size < 50:
            rows.append((K, int(samples.size), "", "", "", "", "", "", "", "",
                         "insufficient_samples"))
            continue
        if args.fit_mu0:
            fit = fit_mu0(samples, args.M, args.m, K, muD_total)
            mu0_used, fitted_params = fit.mu0_hat, 1
        else:
            mu0_used, fitted_params = args.mu0, 0
        cfg = SubtractionConfig(args.M, args.m, K, mu0_used)
        model = _dark_table(cfg, muD_total, args.tail_tol)
        gof = chi2_test(samples, model, min_expected=args.min_expected,
                        fitted_params=fitted_params)
        est = estimate_moments(samples, args.bootstrap_reps, seed=[args.seed, K])
        rows.append((K, est.sample_size, float(mu0_used), gof.chi2, gof.dof,
                     gof.p_value, est.mu_hat, est.mu_se, est.g2_hat, est.g2_se, "ok"))
        if gof.p_value < args.min_p:
            rejected = True
        if args.plot:
            from .plotting import save_analysis_figure

            hist = np.bincount(samples, minlength=model.probs.size) / samples.size
            n_show = max(model.probs.size, hist.size)
            probs = np.zeros(n_show)
            probs[: model.probs.size] = model.probs
            freq = np.zeros(n_show)
            freq[: hist.size] = hist
            base = Path(args.report)
            save_analysis_figure(np.arange(n_show), freq, probs,
                                 base.with_name(base.stem + f"_K{K}.png"),
                                 f"M={args.M} m={args.m} K={K}: p={gof.p_value:.3f}")
    _write_csv(args.report, header, rows)
    print(f"wrote report for K in {k_values} -> {args.report}")
    if args.strict and rejected:
        print(f"statistical failure: at least one class rejected at p < {args.min_p}",
              file=sys.stderr)
        return 4
    return 0


# ------------------------------------------------------------- moments

def _cmd_moments(args) -> int:
    cfg = SubtractionConfig(args.M, args.m, args.K, args.mu0)
    theory = Moments(theoretical_mean(cfg), theoretical_g2(cfg))
    muD_total = args.m * args.muD
    shifted = moments_with_dark(theory, muD_total)
    rows = [(cfg.M, cfg.m, cfg.K, cfg.mu0, muD_total,
             theory.mean, theory.g2, shifted.mean, shifted.g2)]
    header = ["M", "m", "K", "mu0", "muD_total", "mean", "g2",
              "mean_with_dark", "g2_with_dark"]
    if args.out:
        _write_csv(args.out, header, rows)
    else:
        print(",".join(header))
        print(",".join(_fmt(v) for v in rows[0]))
    return 0


# -------------------------------------------------------------- parser

def _add_subtraction_flags(p: argparse.ArgumentParser, with_mu0=True) -> None:
    p.add_argument("--M", type=int, required=True, help="total thermal modes")
    p.add_argument("--m", type=int, required=True, help="observed modes (1..M)")
    p.add_argument("--K", type=int, required=True, help="total subtracted photons")
    if with_mu0:
        p.add_argument("--mu0", type=float, required=True,
                       help="mean photons per mode before subtraction")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="subthermal",
        description="Photon-number statistics of multiphoton-subtracted multimode thermal light.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pmf", help="tabulate the subsystem law as CSV")
    _add_subtraction_flags(p)
    p.add_argument("--muD", type=float, default=0.0,
                   help="dark-count mean per observed mode (table convolved with Poisson(m*muD))")
    p.add_argument("--tail-tol", type=float, default=1e-12)
    p.add_argument("--out", required=True)
    p.add_argument("--plot", action=argparse.BooleanOptionalAction, default=False)
    p.set_defaults(func=_cmd_pmf)

    p = sub.add_parser("figures", help="emit theory-curve families as CSV (+PNG)")
    p.add_argument("--fig", required=True, choices=["4a", "4b", "4c", "5a", "5b"])
    p.add_argument("--mu0", type=float, default=0.24)
    p.add_argument("--muD", type=float, default=0.0015,
                   help="dark-count mean per observed mode")
    p.add_argument("--tail-tol", type=float, default=1e-8)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--plot", action=argparse.BooleanOptionalAction, default=True)
    p.set_defaults(func=_cmd_figures)

    p = sub.add_parser("simulate", help="post-selected Monte Carlo of the tap model")
    _add_subtraction_flags(p, with_mu0=False)
    p.add_argument("--mu-in", type=float, required=True, help="per-mode mean entering the tap")
    p.add_argument("--r", type=float, default=0.02, help="tap probability toward the subtraction detector")
    p.add_argument("--trials", type=int, required=True, help="post-selected samples to collect")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--acceptance-floor", type=float, default=1e-6)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("synth", help="generate a synthetic two-channel trace file")
    p.add_argument("--mu0", type=float, required=True,
                   help="per-mode mean of the analyzed (post-selected) law")
    p.add_argument("--muD", type=float, default=0.0015, help="dark-count mean per bin")
    p.add_argument("--tau-ns", type=int, default=10_000)
    p.add_argument("--thin-period", type=int, default=48)
    p.add_argument("--n-bins", type=int, required=True)
    p.add_argument("--p-subtract", type=float, required=True,
                   help="per-photon tap probability of the subtraction channel")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("analyze", help="full pipeline: thin, group, condition, chi2, moments")
    p.add_argument("--trace", required=True, help="trace or events file")
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--K-list", default="0,1,2,3,4,5",
                   help="comma-separated K classes to analyze")
    p.add_argument("--mu0", type=float, default=None,
                   help="known per-mode mean (fully specified model)")
    p.add_argument("--fit-mu0", action="store_true",
                   help="maximum-likelihood fit of mu0 per K class")
    p.add_argument("--muD", type=float, default=0.0015,
                   help="dark-count mean per observed mode")
    p.add_argument("--thin-period", type=int, default=1)
    p.add_argument("--tau-ns", type=int, default=None,
                   help="bin width, required for raw events input")
    p.add_argument("--tail-tol", type=float, default=1e-12)
    p.add_argument("--min-expected", type=float, default=5.0)
    p.add_argument("--bootstrap-reps", type=int, default=200)
    p.add_argument("--seed", type=int, required=True, help="bootstrap seed")
    p.add_argument("--min-p", type=float, default=0.05)
    p.add_argument("--strict", action="store_true",
                   help="exit 4 if any analyzed class rejects at p < min-p")
    p.add_argument("--report", required=True)
    p.add_argument("--plot", action=argparse.BooleanOptionalAction, default=True)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("moments", help="theoretical mean and g2 with dark-count shift")
    _add_subtraction_flags(p)
    p.add_argument("--muD", type=float, default=0.0,
                   help="dark-count mean per observed mode")
    p.add_argument("--out", default=None, help="CSV path (default: stdout)")
    p.set_defaults(func=_cmd_moments)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TraceFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except SimulationAbort as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
