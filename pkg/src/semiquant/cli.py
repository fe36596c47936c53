"""Command-line experiment runner.

Usage::

    semiquant <verb> --config FILE [--out DIR] [--cache DIR] [--jobs N]
    semiquant cache-gc --cache DIR --max-bytes N [--out DIR]

Verbs: ``quantize``, ``spectrum``, ``evolve``, ``trace``, ``gutzwiller``,
``check``, ``cache-gc``.  Exit codes: 0 pass, 1 check failure, 2 config
error, 3 numerical failure.  Every run writes ``summary.json`` next to its
CSV reports; floats are written with 17 significant digits.
"""
import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .cache import ENV_VAR, SpectralCache, default_cache_dir
from .config import ConfigError, load_config
from .experiments import CHECKS, ERROR, RunContext, exit_status, trace_rows
from .hilbert import GridExactnessError
from .operators import NotHolomorphicFlowError, evolution, quantize
from .phase_space.flow import FlowIntegrationError
from .phase_space.orbits import CriticalLevelError, OpenLoopError
from .phase_space.structure import BranchTrackingError
from .semiclassics import CheckResult, ModelTerm, fit_expansion, gutzwiller_predict, resonant_orbits

log = logging.getLogger("semiquant")

VERBS = ("quantize", "spectrum", "evolve", "trace", "gutzwiller", "check", "cache-gc")
EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3
NUMERICAL_ERRORS = (np.linalg.LinAlgError, FlowIntegrationError, GridExactnessError,
                    BranchTrackingError, OpenLoopError, NotHolomorphicFlowError,
                    FloatingPointError, MemoryError)

COLUMNS = {
    "checks": ("name", "measured", "predicted", "rel_err", "verdict"),
    "traces": ("p", "re", "im"),
    "fits": ("term_id", "alpha", "lambda", "coeff_re", "coeff_im", "residual"),
    "orbits": ("level", "period", "resonant_time", "action_mod1", "stab_det", "nondeg_flag"),
}


def fmt(v):
    """17-significant-digit text for floats; plain text otherwise."""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path, rows, columns=None):
    rows = list(rows)
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r.get(c, "")) for c in columns])
    return Path(path).name


def _json_safe(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if np.isfinite(v) else None
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return int(v)
    return v


def check_entry(r):
    entry = {"name": r.name, "measured": _json_safe(r.measured),
             "predicted": _json_safe(r.predicted), "tolerance": _json_safe(r.tolerance),
             "verdict": r.verdict}
    if r.verdict == "skipped":
        entry["verdict"] = f"skipped: {r.details.get('reason', '')}"
    if r.verdict == ERROR:
        entry["error"] = r.details.get("error", "")
    return entry


def write_summary(out, verb, status, results=(), files=(), extra=None, source=""):
    summary = {"verb": verb, "config": source, "exit_status": status,
               "passed": status == EXIT_PASS,
               "checks": [check_entry(r) for r in results], "files": sorted(files)}
    if extra:
        summary.update({k: _json_safe(v) for k, v in extra.items()})
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")


# -- verbs ------------------------------------------------------------------------------

def run_checks(ctx, names=None):
    """Run the named checks; numerical failures become ``error`` verdicts."""
    results = []
    for name in names if names is not None else ctx.cfg.checks:
        t0 = time.perf_counter()
        try:
            results.extend(CHECKS[name](ctx))
        except CriticalLevelError:
            results.append(CheckResult(name, np.nan, np.nan, np.nan, "skipped",
                                       {"reason": "critical level"}))
        except NUMERICAL_ERRORS as exc:
            results.append(CheckResult(name, np.nan, np.nan, np.nan, ERROR,
                                       {"error": f"{type(exc).__name__}: {exc}"}))
        log.info("check %s finished in %.1fs", name, time.perf_counter() - t0)
    return results


def verb_check(ctx, out):
    results = run_checks(ctx)
    files = [write_csv(out / "checks.csv", (r.csv_row() for r in results), COLUMNS["checks"])]
    for table, rows in ctx.tables.items():
        files.append(write_csv(out / f"{table}.csv", rows, COLUMNS.get(table)))
    return exit_status(results), results, files, {}


def verb_quantize(ctx, out):
    rows, files = [], []
    for p in ctx.cfg.p_grid:
        Q = quantize(ctx.geom, ctx.f, p, ctx.spectra.mode)
        rows.append({"p": p, "dim": Q.shape[0], "hermitian_defect": Q.meta["hermitian_defect_raw"],
                     "trace": float(np.trace(Q.matrix).real),
                     "norm": float(np.linalg.norm(Q.matrix, 2))})
        if ctx.cfg.get("output", "matrices"):
            files.append(write_csv(out / f"operator_p{p}.csv", Q.csv_rows(),
                                   ("row", "col", "re", "im")))
    files.append(write_csv(out / "quantize.csv", rows))
    return EXIT_PASS, [], files, {}


def verb_spectrum(ctx, out):
    ctx.spectra.prefetch(ctx.cfg.p_grid if not ctx.spectra.separable else ())
    rows = []
    for p in ctx.cfg.p_grid:
        spec = ctx.spectra.trace_spectrum(p)
        rows.extend({"p": p, "index": k, "eigenvalue": lam}
                    for k, lam in enumerate(np.sort(spec.eigenvalues)))
    return EXIT_PASS, [], [write_csv(out / "spectrum.csv", rows, ("p", "index", "eigenvalue"))], {}


def verb_evolve(ctx, out):
    t = ctx.cfg.get("run", "time")
    ctx.spectra.prefetch(ctx.cfg.p_grid)
    rows, files = [], []
    for p in ctx.cfg.p_grid:
        spec = ctx.spectra(p)
        U = evolution(spec, t, p)
        half = evolution(spec, t / 2, p).matrix
        tr = np.trace(U.matrix)
        rows.append({"p": p, "t": t, "unitary_defect": U.unitary_defect(),
                     "group_law_defect": float(np.linalg.norm(half @ half - U.matrix, 2)),
                     "trace_re": tr.real, "trace_im": tr.imag})
        if ctx.cfg.get("output", "matrices"):
            files.append(write_csv(out / f"evolution_p{p}.csv", U.csv_rows(),
                                   ("row", "col", "re", "im")))
    files.append(write_csv(out / "evolve.csv", rows))
    return EXIT_PASS, [], files, {}


def _need_level(ctx):
    if ctx.cfg.level is None:
        raise ConfigError("this verb needs a level", ctx.cfg.line_of("run"), "run.level")


def verb_trace(ctx, out):
    _need_level(ctx)
    if not ctx.spectra.separable:
        ctx.spectra.prefetch(ctx.cfg.p_grid)
    rows = trace_rows(ctx)
    return EXIT_PASS, [], [write_csv(out / "traces.csv", rows, COLUMNS["traces"])], {}


def verb_gutzwiller(ctx, out):
    """Orbits, the leading-order prediction and a least-squares fit of the traces."""
    _need_level(ctx)
    g, c = ctx.window, ctx.cfg.level
    try:
        orbs = resonant_orbits(ctx.geom, ctx.f, c, g)
    except CriticalLevelError:
        res = CheckResult("gutzwiller", np.nan, np.nan, np.nan, "skipped",
                          {"reason": "critical level"})
        return EXIT_PASS, [res], [], {}
    files = [write_csv(out / "orbits.csv", (o.csv_row() for o in orbs), COLUMNS["orbits"])]
    if not ctx.spectra.separable:
        ctx.spectra.prefetch(ctx.cfg.p_grid)
    rows = trace_rows(ctx)
    files.append(write_csv(out / "traces.csv", rows, COLUMNS["traces"]))
    pred = gutzwiller_predict(ctx.geom, ctx.f, c, g, orbs, metaplectic=ctx.geom.metaplectic)
    files.append(write_csv(out / "prediction.csv",
                           ({"p": r["p"], "re": pred(r["p"]).real, "im": pred(r["p"]).imag}
                            for r in rows), COLUMNS["traces"]))
    ps = [r["p"] for r in rows]
    tr = np.array([complex(r["re"], r["im"]) for r in rows])
    terms = [ModelTerm(ctx.geom.n - 1, 0.0, r, label=f"weyl_r{r}")
             for r in range(ctx.cfg.get("run", "fit_orders"))] if pred.has_weyl else []
    terms += [ModelTerm((t.dim - 1) / 2, t.action, r, label=f"orbit{j}_r{r}")
              for j, t in enumerate(pred.terms) for r in range(ctx.cfg.get("run", "fit_orders"))]
    extra = {"orbits": len(orbs), "excluded_degenerate": len(pred.excluded)}
    if terms:
        try:
            fit = fit_expansion(ps, tr, terms)
            files.append(write_csv(out / "fits.csv", fit.csv_rows(), COLUMNS["fits"]))
            extra["fit_residual"] = fit.residual
        except (ValueError, np.linalg.LinAlgError) as exc:
            extra["fit_error"] = str(exc)
    return EXIT_PASS, [], files, extra


VERB_FUNCS = {"quantize": verb_quantize, "spectrum": verb_spectrum, "evolve": verb_evolve,
              "trace": verb_trace, "gutzwiller": verb_gutzwiller, "check": verb_check}


def verb_cache_gc(args):
    root = Path(args.cache) if args.cache else default_cache_dir()
    if args.max_bytes is None:
        print("error: cache-gc needs --max-bytes", file=sys.stderr)
        return EXIT_CONFIG
    report = SpectralCache(root).gc(args.max_bytes)
    print(f"cache {root}: {report.bytes_before} -> {report.bytes_after} bytes, "
          f"{len(report.evicted)} evicted, {len(report.skipped_locked)} in use, "
          f"{len(report.quarantined)} quarantined")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        files = [write_csv(out / "cache_gc.csv", report.csv_rows(), ("entry", "action"))]
        write_summary(out, "cache-gc", EXIT_PASS, files=files,
                      extra={"bytes_before": report.bytes_before,
                             "bytes_after": report.bytes_after,
                             "quarantined": len(report.quarantined)})
    return EXIT_PASS


# -- entry point ---------------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="semiquant", description=__doc__.split("\n\n")[0])
    ap.add_argument("verb", choices=VERBS)
    ap.add_argument("--config", help="experiment configuration file")
    ap.add_argument("--out", help="output directory (overrides [output] out)")
    ap.add_argument("--cache", help=f"cache directory (overrides ${ENV_VAR} and [output] cache)")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes for p-sweeps")
    ap.add_argument("--max-bytes", type=int, help="cache size limit for cache-gc")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def resolve_cache(args, cfg):
    """``--cache`` flag, then the environment variable, then the config key."""
    import os
    path = args.cache or os.environ.get(ENV_VAR) or cfg.get("output", "cache")
    return SpectralCache(path) if path else None


def run(argv=None):
    """Execute one CLI invocation and return its exit status."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.verb == "cache-gc":
        return verb_cache_gc(args)
    if not args.config:
        print("error: --config is required", file=sys.stderr)
        return EXIT_CONFIG
    if args.jobs < 1:
        print("error: --jobs must be positive", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error in {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out or cfg.get("output", "out"))
    out.mkdir(parents=True, exist_ok=True)
    ctx = RunContext.from_config(cfg, resolve_cache(args, cfg), args.jobs)
    try:
        status, results, files, extra = VERB_FUNCS[args.verb](ctx, out)
    except ConfigError as exc:
        print(f"config error in {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        write_summary(out, args.verb, EXIT_NUMERICAL, extra={"error": str(exc)},
                      source=str(args.config))
        return EXIT_NUMERICAL
    write_summary(out, args.verb, status, results, files, extra, str(args.config))
    for r in results:
        print(f"{r.verdict.upper():13s} {r.name}: measured {fmt(r.measured)} "
              f"predicted {fmt(r.predicted)}")
    return status


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
