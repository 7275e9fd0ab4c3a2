"""Command-line driver: ``tickms {ingest,calibrate,simulate,verify}``.

Exit codes: 0 success, 2 input error, 3 estimation or validation error,
4 verification failure. Every command writes ``manifest.txt`` next to its
outputs, listing the inputs, settings and the SHA-256 of each output file.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import os
import platform
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from . import calibrate as cal
from . import config as cfg
from . import dcmm, ingest, ms_model, simulate, stats
from .markov import ReducibleChainError

EXIT_OK, EXIT_INPUT, EXIT_ESTIMATION, EXIT_VERIFY = 0, 2, 3, 4
SEED_ENV = "TICKMS_SEED"
AGG_SCALES = tuple(2**k for k in range(10))
DEFAULT_KAPPA_WINDOW = (8, 512)
VERIFY_BATCHES = 50


class VerificationFailed(RuntimeError):
    pass


# --- small helpers --------------------------------------------------------


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _fmt(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_report(path: Path, items: list[tuple[str, object]]) -> None:
    """Flat ``key = value`` text file, one entry per line, order preserved."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, val in items:
            fh.write(f"{key} = {_fmt(val)}\n")


def write_manifest(outdir: Path, command: str, settings: dict, inputs: list, outputs: list) -> None:
    import numba
    import scipy

    canon = json.dumps(settings, sort_keys=True, default=str)
    items = [
        ("manifest", "manifest.txt"),
        ("command", command),
        ("config_digest", hashlib.sha256(canon.encode()).hexdigest()),
    ]
    items += [(f"setting.{k}", settings[k]) for k in sorted(settings)]
    for p in inputs:
        items.append((f"input.{Path(p).name}", _sha256(p)))
    for p in outputs:
        items.append((f"output.{Path(p).name}", _sha256(p)))
    items += [
        ("version.tickms", __version__),
        ("version.python", platform.python_version()),
        ("version.numpy", np.__version__),
        ("version.scipy", scipy.__version__),
        ("version.numba", numba.__version__),
        ("created", _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")),
    ]
    write_report(outdir / "manifest.txt", items)


def _outdir(path: Optional[str]) -> Path:
    out = Path(path or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _window(text: Optional[str], default: tuple[int, int]) -> tuple[int, int]:
    if text is None:
        return default
    try:
        lo, hi = (int(v) for v in text.split(":"))
    except ValueError:
        raise cfg.ConfigError(f"--window expects lo:hi, got {text!r}") from None
    if not 0 < lo < hi:
        raise cfg.ConfigError(f"--window needs 0 < lo < hi, got {text!r}")
    return lo, hi


def _settings(args, pf: Optional[cfg.ParamFile]) -> dict:
    """Merge flags over the [run] section; the seed falls back to $TICKMS_SEED."""
    run = dict(pf.run) if pf else {}
    merged = {}
    for key in ("model", "p", "length", "runs", "seed", "burn_in", "max_lag", "window", "overlap"):
        flag = getattr(args, key, None)
        merged[key] = flag if flag is not None else run.get(key)
    if merged["seed"] is None:
        env = os.environ.get(SEED_ENV)
        try:
            merged["seed"] = int(env) if env not in (None, "") else 0
        except ValueError:
            raise cfg.ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return merged


def _load_pf(args) -> Optional[cfg.ParamFile]:
    if getattr(args, "params", None) is None:
        return None
    if not Path(args.params).is_file():
        raise ingest.InputError(f"parameter file not found: {args.params}")
    return cfg.load_param_file(args.params)


# --- ingest ---------------------------------------------------------------


def _series_summary(prefix: str, series: ingest.TickSeries) -> list[tuple[str, object]]:
    items: list[tuple[str, object]] = [
        (f"{prefix}.observations", series.n_observations),
        (f"{prefix}.returns", series.n_returns),
        (f"{prefix}.segments", len(series.segments)),
        (f"{prefix}.dropped", series.dropped_count),
    ]
    r = series.returns.astype(float)
    s = series.spreads
    items.append((f"{prefix}.pi1", float(np.mean(s == 1)) if s.size else None))
    if r.size >= 4 and np.ptp(r) > 0:
        items += [
            (f"{prefix}.mean", float(r.mean())),
            (f"{prefix}.sigma", float(r.std())),
            (f"{prefix}.excess_kurtosis", stats.excess_kurtosis(r)),
        ]
    return items


def cmd_ingest(args) -> int:
    if args.input is None:
        raise ingest.InputError("--input is required")
    if not Path(args.input).is_file():
        raise ingest.InputError(f"input file not found: {args.input}")
    out = _outdir(args.output)
    tick = args.tick_size
    rep = ingest.parse_trades(args.input)
    split = ingest.split_regimes(rep.records)
    high, low = split.series(tick)
    files = [out / "series_high.csv", out / "series_low.csv"]
    for series, path in zip((high, low), files):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            ingest.write_series_csv(series, fh)
    if rep.records:
        prof = ingest.activity_profile(rep.records, tick)
        path = out / "profile.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            ingest.write_profile_csv(prof, fh)
        files.append(path)
    items: list[tuple[str, object]] = [
        ("manifest", "manifest.txt"),
        ("tick_size", tick),
        ("records", len(rep.records)),
        ("rejected_lines", len(rep.errors)),
        ("collapsed_fills", rep.collapsed),
        ("trimmed_session_edges", split.trimmed),
        ("rejected_out_of_session", split.rejected),
    ]
    items += [(f"error.line{line}", msg) for line, msg in rep.errors]
    items += [(f"warning.{i}", w) for i, w in enumerate(rep.warnings)]
    items += _series_summary("high", high) + _series_summary("low", low)
    write_report(out / "ingest_report.txt", items)
    files.append(out / "ingest_report.txt")
    for line, msg in rep.errors:
        print(f"line {line}: {msg}", file=sys.stderr)
    settings = {"tick_size": tick, "quote_convention": "quote attached to each execution",
                "fill_collapse": "same (date, timestamp, side) -> keep last"}
    write_manifest(out, "ingest", settings, [args.input], files)
    return EXIT_OK


# --- calibrate ------------------------------------------------------------


def _read_any_series(path) -> ingest.TickSeries:
    if not Path(path).is_file():
        raise ingest.InputError(f"input file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        has_rows = any(line.strip() for line in fh)
    if header == ",".join(simulate.PATH_HEADER):
        if not has_rows:
            return ingest.TickSeries([])
        return simulate.read_path_csv(path).to_tick_series()
    return ingest.read_series_csv(path)


def cmd_calibrate(args) -> int:
    if args.input is None:
        raise ingest.InputError("--input is required")
    series = _read_any_series(args.input)
    model = args.model or "ms"
    out = _outdir(args.output)
    counts = cal.estimate_counts(series)
    items: list[tuple[str, object]] = [
        ("manifest", "manifest.txt"),
        ("model", model),
        ("observations", series.n_observations),
        ("returns", series.n_returns),
    ]
    for key in ("pi1", "p11", "p21", "theta1", "theta4"):
        items.append((f"{key}_hat", getattr(counts, f"{key}_hat")))
        items.append((f"{key}_se", counts.std_errors[key]))
    items += [(f"count.{k}", v) for k, v in counts.counts.items()]
    for k, (imb, z, flag) in counts.symmetry.items():
        items += [(f"symmetry.x{k}.imbalance", imb), (f"symmetry.x{k}.z", z),
                  (f"symmetry.x{k}.flagged", flag)]
    p = None
    if model == "dcmm":
        p = args.p if args.p is not None else 1
        y, X = cal.regime1_design(series, p)
        fit = cal.fit_logit_irls(y, X, p)
        items += [
            ("logit.order", p),
            ("logit.n_obs", fit.n_obs),
            ("logit.converged", fit.converged),
            ("logit.iterations", fit.iterations),
            ("logit.loglik", fit.loglik),
            ("logit.ridge", fit.ridge),
        ]
        if fit.diagnostic:
            items.append(("logit.diagnostic", fit.diagnostic))
        names = ["alpha1"] + [f"beta1_{i}" for i in range(1, p + 1)]
        for name, b, se, z, star in zip(names, fit.coefficients, fit.std_errors,
                                        fit.z_values, fit.stars):
            items += [(f"{name}", b), (f"{name}_se", se), (f"{name}_z", z),
                      (f"{name}_stars", star or "-")]
        if not fit.converged:
            write_report(out / "calibration.txt", items)
            raise cal.EstimationError(f"logit fit did not converge: {fit.diagnostic}")
    elif model == "msb":
        items.append(("bernoulli_p_hat", counts.pi1_hat))
    write_report(out / "calibration.txt", items)
    write_manifest(out, "calibrate", {"model": model, "p": p}, [args.input],
                   [out / "calibration.txt"])
    return EXIT_OK


# --- simulate -------------------------------------------------------------


def _sim_config(args, pf) -> tuple[simulate.SimConfig, dict]:
    st = _settings(args, pf)
    model = st["model"] or "ms"
    params = cfg.build_params(model, st["p"], pf)
    conf = simulate.SimConfig(
        model=model,
        params=params,
        length=st["length"] or simulate.DEFAULT_LENGTH,
        seed=st["seed"],
        burn_in=st["burn_in"],
        n_runs=st["runs"] or simulate.DEFAULT_RUNS,
    )
    st.update(model=model, length=conf.length, runs=conf.n_runs, burn_in=conf.burn_in,
              params=repr(params))
    return conf, st


def cmd_simulate(args) -> int:
    pf = _load_pf(args)
    conf, st = _sim_config(args, pf)
    overlap = (st["overlap"] or "on") == "on"
    window = _window(st["window"], DEFAULT_KAPPA_WINDOW)
    scales = [d for d in AGG_SCALES if d < conf.length]
    st.update(overlap=overlap, window=f"{window[0]}:{window[1]}",
              acf_normalization="biased", rng="philox4x64/seedsequence")
    out = _outdir(args.output)
    files = []
    for i in range(min(args.paths, conf.n_runs)):
        path = simulate.simulate_path(conf, simulate.run_seed(conf.seed, i))
        fname = out / f"path_{i:03d}.csv"
        simulate.save_path_csv(path, fname)
        files.append(fname)

    labels = ["mean_r", "sigma", "pi1"]
    labels += [f"kappa_{d}" for d in scales] + [f"sigma_n_{d}" for d in scales]

    def stat(path):
        r = path.returns
        row = [r.mean(), r.std(), np.mean(path.spreads == 1)]
        agg = [stats.aggregate_stats(r, d, overlap, with_histogram=False) for d in scales]
        return np.array(row + [a.kappa for a in agg] + [a.sigma_n for a in agg])

    res = simulate.run_ensemble(conf, stat)
    ens = out / "ensemble.csv"
    with open(ens, "w", encoding="utf-8", newline="") as fh:
        simulate.write_ensemble_csv(res, fh, labels)
    files.append(ens)

    items: list[tuple[str, object]] = [
        ("manifest", "manifest.txt"),
        ("model", conf.model.value),
        ("length", conf.length),
        ("runs", conf.n_runs),
        ("seed", conf.seed),
        ("burn_in", conf.burn_in),
        ("overlap", overlap),
    ]
    if res.sd is None:
        items.append(("sd_note", "single run: no standard deviation"))
    for j, name in enumerate(labels):
        items.append((f"{name}.mean", res.mean[j]))
        if res.sd is not None:
            items.append((f"{name}.sd", res.sd[j]))
    kappa = np.array([res.mean[3 + j] for j in range(len(scales))])
    try:
        fit = cal.fit_power_law(kappa, scales, window)
        items += [("kappa_power_law.exponent", fit.exponent),
                  ("kappa_power_law.se", fit.exponent_se),
                  ("kappa_power_law.window", f"{window[0]}:{window[1]}")]
    except cal.EstimationError as exc:
        items.append(("kappa_power_law.error", str(exc)))
    write_report(out / "summary.txt", items)
    files.append(out / "summary.txt")
    write_manifest(out, "simulate", st, [args.params] if args.params else [], files)
    return EXIT_OK


# --- verify ---------------------------------------------------------------


def _analytic_curve(params, max_lag: int) -> np.ndarray:
    if isinstance(params, dcmm.DcmmParams):
        return dcmm.acf_squared_dcmm_curve(params, max_lag, method="coupled")
    return ms_model.acf_squared_curve(params, max_lag)


def cmd_verify(args) -> int:
    pf = _load_pf(args)
    st = _settings(args, pf)
    model = st["model"] or "ms"
    params = cfg.build_params(model, st["p"], pf)
    max_lag = st["max_lag"] or (50 if model != "dcmm" else 10)
    if isinstance(params, dcmm.DcmmParams) and params.p > dcmm.MAX_ANALYTIC_ORDER:
        raise dcmm.ChainTooLarge(
            f"analytic chain limited to p <= {dcmm.MAX_ANALYTIC_ORDER}, got p={params.p}"
        )
    conf = simulate.SimConfig(model, params, length=st["length"] or simulate.DEFAULT_LENGTH,
                              seed=st["seed"], burn_in=st["burn_in"], n_runs=1)
    analytic = _analytic_curve(params, max_lag)
    path = simulate.simulate_path(conf)
    r2 = path.returns.astype(float) ** 2
    mc = stats.sample_acf(r2, max_lag).values[1:]
    se = stats.acf_batch_se(r2, max_lag, VERIFY_BATCHES)
    out = _outdir(args.output)
    ok = np.abs(mc - analytic) <= 3.0 * se
    table = out / "verify.csv"
    with open(table, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("tau,analytic,mc,mc_se,pass\n")
        for tau in range(1, max_lag + 1):
            j = tau - 1
            vals = ",".join(repr(float(v)) for v in (analytic[j], mc[j], se[j]))
            fh.write(f"{tau},{vals},{int(ok[j])}\n")
    items: list[tuple[str, object]] = [
        ("manifest", "manifest.txt"),
        ("model", model),
        ("length", conf.length),
        ("seed", conf.seed),
        ("burn_in", conf.burn_in),
        ("max_lag", max_lag),
        ("se_method", f"batch means, {VERIFY_BATCHES} batches"),
        ("rows_passed", int(ok.sum())),
        ("rows_total", int(ok.size)),
    ]
    all_ok = bool(ok.all())
    if isinstance(params, dcmm.DcmmParams):
        items.append(("analytic_chain", "coupled (x, Y)"))
        if params.p == 1:
            closed = dcmm.e3_closed_form(params)
            third = dcmm.e3_numeric(params)
            e3_ok = abs(closed - third) <= 1e-10
            items += [("e3.closed_form", closed), ("e3.spectrum", third), ("e3.pass", e3_ok)]
            all_ok = all_ok and e3_ok
    items.append(("pass", all_ok))
    write_report(out / "verify.txt", items)
    st.update(model=model, max_lag=max_lag, length=conf.length, burn_in=conf.burn_in,
              params=repr(params))
    write_manifest(out, "verify", st, [args.params] if args.params else [],
                   [table, out / "verify.txt"])
    if not all_ok:
        raise VerificationFailed(f"{int((~ok).sum())} of {ok.size} rows outside 3 SE")
    return EXIT_OK


# --- parser ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tickms", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, params=True):
        p.add_argument("--output", help="output directory (default: current)")
        if params:
            p.add_argument("--params", help="parameter file (INI sections run/chain/ms/dcmm)")
            p.add_argument("--model", choices=("msb", "ms", "dcmm"))
            p.add_argument("--p", type=int, help="DCMM order")
            p.add_argument("--length", type=int)
            p.add_argument("--seed", type=int, help=f"master seed (fallback: ${SEED_ENV})")

    p = sub.add_parser("ingest", help="parse trades into per-regime tick series")
    p.add_argument("--input", required=False)
    p.add_argument("--tick-size", type=float, default=0.01)
    common(p, params=False)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("calibrate", help="estimate model parameters from a series")
    p.add_argument("--input")
    p.add_argument("--model", choices=("msb", "ms", "dcmm"))
    p.add_argument("--p", type=int)
    common(p, params=False)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("simulate", help="simulate paths and ensemble statistics")
    common(p)
    p.add_argument("--runs", type=int)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--paths", type=int, default=1, help="number of path CSVs to write")
    p.add_argument("--window", help="kappa power-law window lo:hi (default 8:512)")
    p.add_argument("--overlap", choices=("on", "off"))
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="analytic vs Monte Carlo squared-return ACF")
    common(p)
    p.add_argument("--max-lag", dest="max_lag", type=int)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ingest.InputError, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"tickms {args.command}: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except VerificationFailed as exc:
        print(f"tickms {args.command}: verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (ValueError, ArithmeticError, ReducibleChainError) as exc:
        print(f"tickms {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION


if __name__ == "__main__":
    sys.exit(main())
