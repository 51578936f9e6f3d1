"""``helix-waves`` command-line entry point.

Every subcommand writes its artifacts atomically and prints its primary
result as JSON on stdout.  Options may also come from ``--config file.json``
(a flat mapping of option names to values); flags given on the command line
win.  Exit codes: 0 ok, 1 input error, 2 numerical failure, 64 usage.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np

from . import TOOL_NAME, __version__
from . import analysis, infotheory, ingest, kdv, logistic, oscillator, sir, table1
from .errors import HelixWavesError, InputError, UsageError
from .ingest import SeriesKind

log = logging.getLogger(TOOL_NAME)

SCHEMA = 1
LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING,
              "info": logging.INFO, "debug": logging.DEBUG}
# options naming files or directories stay out of the config hash so that the
# same computation gets the same hash wherever its outputs land
PATH_OPTIONS = {"config", "input", "inputs", "out", "out_dir", "fits", "kdv_results",
                "ratios", "field_out"}


class ArgParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# -- output helpers --------------------------------------------------------

def _clean(obj):
    """Make ``obj`` strict-JSON: numpy scalars to Python, non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if math.isfinite(value) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_atomic(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    log.info("wrote %s", path)
    return path


def config_hash(args: argparse.Namespace) -> str:
    params = {k: v for k, v in sorted(vars(args).items())
              if k not in PATH_OPTIONS and not callable(v)}
    blob = json.dumps(params, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def provenance(args: argparse.Namespace) -> dict:
    return {"tool": TOOL_NAME, "version": __version__,
            "config_hash": config_hash(args), "seed": args.seed}


def provenance_lines(args: argparse.Namespace) -> list[str]:
    p = provenance(args)
    return [f"tool: {p['tool']} {p['version']}", f"config_hash: {p['config_hash']}",
            f"seed: {p['seed']}"]


def artifact(args, payload: dict) -> dict:
    return dict(payload, schema=SCHEMA, provenance=provenance(args))


def tsv(header: list[str], columns, comments=()) -> str:
    """Gnuplot-friendly table: ``#`` comments, a commented header, tab-separated rows."""
    lines = [f"# {c}" for c in comments]
    lines.append("# " + "\t".join(header))
    for row in zip(*columns):
        lines.append("\t".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def emit(args, payload: dict, text: Optional[str] = None):
    """Print the primary result: JSON by default, ``text`` for tsv/markdown."""
    if args.format != "json" and text is not None:
        sys.stdout.write(text)
    else:
        sys.stdout.write(dumps(payload))


# -- ingest ----------------------------------------------------------------

def _series_summary(cumulative, density) -> dict:
    return {"label": cumulative.label, "origin_date": cumulative.origin_date.isoformat(),
            "days": len(cumulative), "population": cumulative.population,
            "final_cumulative": float(cumulative.values[-1]),
            "peak_density": float(density.values.max())}


def cmd_ingest(args) -> int:
    if bool(args.input) == bool(args.table1):
        raise UsageError("ingest needs exactly one of --input or --table1")
    out_dir = Path(args.out_dir or ".")
    items = []
    if args.input:
        colmap = ingest.ColumnMap(args.date_column, args.cases_column,
                                  args.population_column, args.population, args.date_format)
        raw = ingest.load_csv(args.input, colmap, args.label or "")
        cumulative, density = ingest.to_probability(raw)
        items.append((cumulative, density, ingest.cleaning_report(raw)))
    else:
        names = table1.COUNTRIES if "all" in args.table1 else args.table1
        for name in names:
            if name not in table1.TABLE1:
                raise InputError(f"unknown country {name!r}; choose from "
                                 f"{', '.join(table1.COUNTRIES)} or 'all'")
            cumulative, density = table1.regenerate(name, args.noise, args.seed)
            items.append((cumulative, density, []))
    summaries = []
    comments = provenance_lines(args)
    for cumulative, density, cleaning in items:
        label = cumulative.label
        if args.window > 1:
            density = ingest.smooth(density, args.window)
            cumulative = ingest.density_to_cumulative(density)
        files = {}
        for ts, suffix in ((cumulative, "cumulative"), (density, "density")):
            path = write_atomic(out_dir / f"{label}_{suffix}.tsv",
                                ingest.format_series(ts, comments))
            files[suffix] = path.name
        summaries.append(dict(_series_summary(cumulative, density), files=files,
                              negative_days=cleaning))
    emit(args, artifact(args, {"series": summaries}))
    return 0


# -- fit -------------------------------------------------------------------

def _load_probability(path) -> tuple:
    ts = ingest.read_series(path)
    if ts.kind is SeriesKind.RAW_DAILY_CASES:
        return ingest.to_probability(ts)
    if ts.kind is SeriesKind.DAILY_PROBABILITY_DENSITY:
        return ingest.density_to_cumulative(ts), ts
    return ts, ingest.cumulative_to_density(ts)


def _fit_one(path: str, cfg: logistic.FitConfig, single: bool) -> dict:
    cumulative, density = _load_probability(path)
    label = cumulative.label or Path(path).stem
    log.info("fitting %s (%d days)", label, len(cumulative))
    fit = logistic.fit_single(cumulative) if single else \
        logistic.fit_composite(cumulative, density, cfg)
    return dict(fit.as_dict(), country=label, origin_date=cumulative.origin_date.isoformat(),
                population=cumulative.population,
                empirical={"cumulative": cumulative.values, "daily": density.values})


def _exit_code_for(errors: list[dict]) -> int:
    return max((e["exit_code"] for e in errors), default=0)


def cmd_fit(args) -> int:
    inputs = args.inputs or []
    if not inputs:
        raise UsageError("fit needs at least one --input")
    if len(inputs) > 1 and args.out:
        raise UsageError("use --out-dir with several inputs")
    cfg = logistic.FitConfig(window=args.window, valley_ratio=args.valley_ratio,
                             min_len=args.min_len, segments=args.segments,
                             max_iter=args.max_iter)

    def job(path):
        try:
            return _fit_one(path, cfg, args.single), None
        except HelixWavesError as exc:
            return None, {"input": Path(path).name, "error": str(exc),
                          "exit_code": exc.exit_code}

    if len(inputs) == 1:
        results = [job(inputs[0])]
    else:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(job, inputs))

    errors = [e for _, e in results if e is not None]
    fits = [artifact(args, r) for r, _ in results if r is not None]
    out_dir = Path(args.out_dir) if args.out_dir else None
    for fit in fits:
        if args.out:
            write_atomic(args.out, dumps(fit))
        elif out_dir is not None:
            write_atomic(out_dir / f"{fit['country']}.json", dumps(fit))
    for e in errors:
        log.error("%s: %s", e["input"], e["error"])
    if len(inputs) == 1 and fits:
        emit(args, fits[0])
    else:
        summary = [{"country": f["country"], "waves": len(f["waves"]),
                    "peak_times": f["peak_times"], "residual_rms": f["residual_rms"]}
                   for f in fits]
        emit(args, artifact(args, {"fits": summary, "errors": errors}))
    return _exit_code_for(errors)


# -- ratios ----------------------------------------------------------------

def _country_order(name: str):
    known = table1.COUNTRIES
    return (known.index(name), "") if name in known else (len(known), name)


def load_fits(directory) -> tuple[dict[str, dict], list[dict]]:
    """Fit artifacts found in ``directory`` keyed by country, plus unreadable files."""
    directory = Path(directory)
    if not directory.is_dir():
        raise InputError(f"{directory}: not a directory")
    found, errors = {}, []
    for path in sorted(directory.glob("*.json")):
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            errors.append({"input": path.name, "error": f"unreadable: {exc}", "exit_code": 1})
            continue
        if not isinstance(data, dict) or "waves" not in data:
            continue        # not a fit artifact (e.g. a multi-fit summary)
        if data.get("schema") != SCHEMA:
            errors.append({"input": path.name, "error": f"unsupported schema {data.get('schema')!r}",
                           "exit_code": 1})
            continue
        found[data.get("country") or path.stem] = data
    ordered = {k: found[k] for k in sorted(found, key=_country_order)}
    return ordered, errors


def cmd_ratios(args) -> int:
    if bool(args.fits) == bool(args.table1):
        raise UsageError("ratios needs exactly one of --fits or --table1")
    if args.table1:
        fits = {c: table1.composite_from_table1(c) for c in table1.COUNTRIES}
        errors = []
    else:
        raw, errors = load_fits(args.fits)
        fits = {c: logistic.CompositeFit.from_dict(d) for c, d in raw.items()}
    rows = []
    for country, fit in fits.items():
        try:
            rows.extend(analysis.wave_ratios(fit, country))
        except InputError as exc:
            errors.append({"input": country, "error": str(exc), "exit_code": exc.exit_code})
    if len(rows) < 2:
        raise InputError(f"need at least two ratio rows for a correlation, got {len(rows)}")
    report = analysis.correlation_report(rows)
    consistency = analysis.model_consistency(rows, args.flag_above)
    payload = artifact(args, dict(report.as_dict(), consistency=consistency.as_dict(),
                                  errors=errors))
    if args.out:
        write_atomic(args.out, dumps(payload))
    emit(args, payload, analysis.table2_markdown(report))
    return _exit_code_for(errors)


# -- kdv -------------------------------------------------------------------

def _kdv_config(args, c1=None) -> kdv.KdVConfig:
    return kdv.KdVConfig(delta=args.delta, c1=args.c1 if c1 is None else c1,
                         domain_length=args.length, grid_points=args.points, dt=args.dt)


def cmd_kdv_simulate(args) -> int:
    cfg = _kdv_config(args)
    spec = kdv.SolitonSpec(args.kappa, args.n, args.c1)
    x0 = 0.25 * cfg.domain_length if args.x0 is None else args.x0
    initial = kdv.KdVState(0.0, kdv.analytic_profile(kdv.SolitonSpec(args.kappa, args.n, 0.0),
                                                     0.0, cfg.periodic_offset(x0), cfg.delta))
    t_end = args.t_end
    if t_end is None:
        # one transit of the domain by the initial crest
        t_end = cfg.domain_length / (4 * args.kappa ** 2) if args.c1 == 0 else kdv.return_time(spec)
    snaps = list(kdv.evolve_snapshots(cfg, initial, t_end, max(args.snapshots, 1)))
    final = snaps[-1]
    m0, m1 = kdv.mass(initial, cfg), kdv.mass(final, cfg)
    q0, q1 = kdv.momentum(initial, cfg), kdv.momentum(final, cfg)
    result = {"kappa": args.kappa, "n": args.n, "c1": args.c1, "delta": args.delta,
              "length": cfg.domain_length, "points": cfg.grid_points, "t_end": final.time,
              "mass_initial": m0, "mass_final": m1,
              "momentum_initial": q0, "momentum_final": q1,
              "momentum_relative_drift": abs(q1 - q0) / abs(q0)}
    peaks = kdv.find_peaks(final.field, cfg.domain_length, -np.inf)
    if peaks:
        result["crest_amplitude"], result["crest_position"] = max(peaks)
    if args.n == 1:
        # wrap the crest displacement onto the periodic domain
        shift = float(kdv.peak_position(spec, final.time))
        grid = cfg.periodic_offset(x0 + shift) + shift
        exact = kdv.analytic_profile(spec, final.time, grid, cfg.delta)
        result["linf_error"] = float(np.max(np.abs(final.field - exact)))
    text = None
    if args.field_out or args.format == "tsv":
        blocks = []
        for i, s in enumerate(snaps):
            head = provenance_lines(args) + [f"T = {s.time!r}"] if i == 0 else [f"T = {s.time!r}"]
            blocks.append(tsv(["x", "U", "P"], [cfg.grid, s.field, s.paper_field], head))
        text = "\n\n".join(blocks)      # gnuplot "index" blocks
        if args.field_out:
            write_atomic(args.field_out, text)
    payload = artifact(args, result)
    if args.out:
        write_atomic(args.out, dumps(payload))
    emit(args, payload, text)
    return 0


def cmd_kdv_train(args) -> int:
    cfg = kdv.KdVConfig(1.0, 0.0, args.length, args.points, args.dt)
    report = kdv.soliton_train(cfg, args.n, args.kappa, args.t_end)
    payload = artifact(args, dict(report.as_dict(), length=args.length, points=args.points))
    if args.out:
        write_atomic(args.out, dumps(payload))
    emit(args, payload)
    return 0


def cmd_kdv_return(args) -> int:
    if args.c1 <= 0:
        raise UsageError("kdv return needs --c1 > 0")
    cfg = _kdv_config(args)
    rows = []
    for kappa in args.kappa:
        spec = kdv.SolitonSpec(kappa, 1, args.c1)
        measured = kdv.measure_return_time(cfg, kappa)
        predicted = kdv.return_time(spec)
        rows.append({"kappa": kappa, "amplitude": spec.peak_amplitude, "measured": measured,
                     "predicted": predicted, "relative_error": abs(measured - predicted) / predicted})
    payload = artifact(args, {"c1": args.c1, "delta": args.delta, "returns": rows})
    if args.out:
        write_atomic(args.out, dumps(payload))
    emit(args, payload)
    return 0


def cmd_kdv_profile(args) -> int:
    cfg = kdv.KdVConfig(args.delta, args.c1, args.length, args.points)
    spec = kdv.SolitonSpec(args.kappa, args.n, args.c1)
    grid = cfg.grid - 0.5 * cfg.domain_length
    u = kdv.analytic_profile(spec, args.time, grid, args.delta)
    text = tsv(["x", "U", "P"], [grid, u, kdv.field_to_paper(u)], provenance_lines(args))
    if args.out:
        write_atomic(args.out, text)
    payload = artifact(args, {"kappa": args.kappa, "n": args.n, "c1": args.c1, "time": args.time,
                              "peak_amplitude": float(u.max()),
                              "peak_position": float(grid[int(np.argmax(u))])})
    emit(args, payload, text)
    return 0


def cmd_kdv_sigmoid(args) -> int:
    smap = kdv.soliton_to_sigmoid(kdv.SolitonSpec(args.kappa, 1, 0.0))
    t = np.linspace(args.t_min, args.t_max, args.samples)
    profile = kdv.analytic_profile(kdv.SolitonSpec(args.kappa), 0.0, t)
    text = tsv(["t", "cumulative", "density", "profile"],
               [t, smap(t), smap.density(t), profile], provenance_lines(args))
    if args.out:
        write_atomic(args.out, text)
    payload = artifact(args, {"kappa": args.kappa, "wave": smap.wave.as_dict(),
                              "density_scale": smap.density_scale})
    emit(args, payload, text)
    return 0


# -- oscillator ------------------------------------------------------------

def cmd_oscillator(args) -> int:
    cfg = oscillator.OscillatorConfig(args.gamma, (args.p10, args.p20), args.alpha, args.C)
    p10, p20 = cfg.p_ref
    initial = args.initial
    if args.model == "harmonic":
        initial = initial or [p10 + 0.05, p20]
        traj = oscillator.integrate_harmonic(cfg, initial, args.t_end, args.dt)
    elif args.model == "coupled":
        initial = initial or [p10 + 0.05, p20]
        traj = oscillator.integrate_coupled_nonharmonic(cfg, initial, args.t_end, args.dt)
    else:
        initial = initial or [p20 + 0.05, 0.0]
        traj = oscillator.integrate_nonharmonic(cfg, initial, args.t_end, args.dt)
    c = traj.conserved
    scale = abs(c[0]) if c[0] != 0 else 1.0
    result = {"model": args.model, "gamma": cfg.gamma, "p_ref": list(cfg.p_ref),
              "alpha": cfg.alpha, "C": cfg.C, "omega": cfg.omega,
              "period_predicted": cfg.period, "quantity": traj.quantity,
              "conserved_initial": float(c[0]),
              "conserved_max_relative_drift": float(np.max(np.abs(c - c[0])) / scale),
              "final_state": traj.states[-1]}
    try:
        result["period_measured"] = oscillator.estimate_period(traj, 1)
    except InputError:
        result["period_measured"] = None
    text = tsv(["t", "p1", "p2", "D"],
               [traj.times, traj.states[:, 0], traj.states[:, 1], c], provenance_lines(args))
    if args.out:
        write_atomic(args.out, text)
    emit(args, artifact(args, result), text)
    return 0


# -- redundancy ------------------------------------------------------------

def cmd_redundancy(args) -> int:
    cube = infotheory.read_long_csv(args.input)
    report = infotheory.mutual_redundancy(cube)
    payload = artifact(args, dict(report.as_dict(), dims=list(cube.dims),
                                  labels=[list(map(str, ax)) for ax in cube.labels]))
    if args.out:
        write_atomic(args.out, dumps(payload))
    emit(args, payload)
    return 0


# -- sir -------------------------------------------------------------------

def cmd_sir(args) -> int:
    cfg = sir.SirConfig(args.beta, args.gamma, args.population, args.infected)
    t_end = args.t_end
    if t_end is None:
        t_end = sir.epidemic_window(cfg, dt=args.dt) if cfg.r0 > 1 else 10.0 / cfg.gamma_rec
    traj = sir.simulate(cfg, t_end, args.dt)
    total = traj.S + traj.I + traj.R
    result = {"r0": cfg.r0, "t_end": float(traj.times[-1]),
              "final": {"S": traj.S[-1], "I": traj.I[-1], "R": traj.R[-1]},
              "peak_infected": float(traj.I.max()),
              "peak_time": float(traj.times[int(np.argmax(traj.I))]),
              "conservation_error": float(np.max(np.abs(total - 1.0)))}
    if cfg.r0 > 1:
        result["final_size_predicted"] = 1.0 - sir.final_size(cfg.r0, traj.S[0])
    if args.reduce:
        result["reduction"] = sir.logistic_reduction_check(cfg, t_end, args.dt).as_dict()
    text = tsv(["t", "S", "I", "R"], [traj.times, traj.S, traj.I, traj.R], provenance_lines(args))
    if args.out:
        write_atomic(args.out, text)
    emit(args, artifact(args, result), text)
    return 0


# -- report ----------------------------------------------------------------

GNUPLOT_RECIPE = (
    "plot '{path}' using 1:2 with points pt 7 ps 0.4 title '{name} {view} (data)', "
    "'' using 1:3 with lines lw 2 title 'fit'\n")


def cmd_report(args) -> int:
    if not args.fits:
        raise UsageError("report needs --fits")
    out_dir = Path(args.out_dir or "report")
    raw, errors = load_fits(args.fits)
    missing = [c for c in (args.expect or []) if c not in raw]
    for c in missing:
        errors.append({"input": c, "error": "no fit artifact found", "exit_code": 1})
    if not raw:
        log.warning("no fit artifacts in %s; writing an empty report", args.fits)
    comments = provenance_lines(args)
    fits = {}
    plots, recipes = [], []
    for country, data in raw.items():
        fit = logistic.CompositeFit.from_dict(data)
        fits[country] = fit
        emp = data.get("empirical") or {}
        cum = np.asarray(emp.get("cumulative") or [], dtype=float)
        daily = np.asarray(emp.get("daily") or [], dtype=float)
        t = np.arange(max(cum.size, daily.size), dtype=float)
        if t.size == 0:
            errors.append({"input": country, "error": "fit artifact has no empirical data",
                           "exit_code": 1})
            continue
        for view, values, model in (("cumulative", cum, logistic.eval_cumulative),
                                    ("daily", daily, logistic.eval_daily)):
            name = f"{country}_{view}.tsv"
            write_atomic(out_dir / "plots" / name,
                         tsv(["t", "empirical", "fitted"], [t, values, model(fit, t)], comments))
            plots.append(f"plots/{name}")
            recipes.append(GNUPLOT_RECIPE.format(path=f"plots/{name}", name=country, view=view))

    table1_md = analysis.table1_markdown(fits) if fits else "_no fits_\n"
    rows = []
    for country, fit in fits.items():
        try:
            rows.extend(analysis.wave_ratios(fit, country))
        except InputError as exc:
            errors.append({"input": country, "error": str(exc), "exit_code": exc.exit_code})
    correlation = None
    if len(rows) >= 2:
        correlation = analysis.correlation_report(rows)
        table2_md = analysis.table2_markdown(correlation)
    else:
        table2_md = "_fewer than two wave-ratio rows_\n"
    write_atomic(out_dir / "table1.md", table1_md)
    write_atomic(out_dir / "table2.md", table2_md)
    gp = ["# one plot per line; run from the report directory, e.g.",
          "#   gnuplot -p -e \"set xlabel 'day'\" -e \"<line>\""]
    write_atomic(out_dir / "plots.gp", "\n".join(gp) + "\n" + "".join(recipes))

    extra = []
    for path in args.kdv_results or []:
        try:
            extra.append((Path(path).name, json.loads(Path(path).read_text(encoding="utf-8"))))
        except (OSError, ValueError) as exc:
            errors.append({"input": Path(path).name, "error": f"unreadable: {exc}", "exit_code": 1})

    md = [f"# {TOOL_NAME} report", ""] + [f"- {c}" for c in comments] + [""]
    md += ["## Fitted wave parameters", "", table1_md, "## Wave ratios", "", table2_md]
    for name, data in extra:
        data = {k: v for k, v in data.items() if k != "provenance"}
        md += [f"## {name}", "", "```json", dumps(data).rstrip(), "```", ""]
    if errors:
        md += ["## Problems", ""] + [f"- {e['input']}: {e['error']}" for e in errors] + [""]
    write_atomic(out_dir / "report.md", "\n".join(md))

    payload = artifact(args, {"countries": list(fits), "plots": plots,
                              "tables": ["table1.md", "table2.md"],
                              "pearson_r": correlation.pearson_r if correlation else None,
                              "errors": errors})
    write_atomic(out_dir / "report.json", dumps(payload))
    emit(args, payload, "\n".join(md))
    for e in errors:
        log.warning("%s: %s", e["input"], e["error"])
    return _exit_code_for(errors) if args.strict else 0


# -- parser ----------------------------------------------------------------

def build_parser() -> tuple[ArgParser, dict[str, ArgParser]]:
    common = ArgParser(add_help=False)
    common.add_argument("--config", help="JSON file of option defaults (flags win)")
    common.add_argument("--format", choices=("json", "tsv", "markdown"), default="json",
                        help="stdout format where the command supports it (default json)")
    common.add_argument("--seed", type=int, default=0, help="seed for randomised inputs")

    parser = ArgParser(prog=TOOL_NAME, description="Logistic-wave and soliton toolkit for "
                                                   "epidemic case series.")
    parser.add_argument("--version", action="version", version=f"{TOOL_NAME} {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    leaves: dict[str, ArgParser] = {}

    def leaf(container, name, handler, help_text):
        p = container.add_parser(name, parents=[common], help=help_text, description=help_text)
        p.set_defaults(handler=handler)
        leaves[p.prog] = p
        return p

    p = leaf(sub, "ingest", cmd_ingest, "Load daily counts into probability series TSVs.")
    p.add_argument("--input", help="CSV/TSV with a header row")
    p.add_argument("--table1", nargs="+", metavar="COUNTRY",
                   help="regenerate series from the built-in wave table ('all' for every country)")
    p.add_argument("--noise", type=float, default=0.0,
                   help="relative multiplicative noise on regenerated daily values")
    p.add_argument("--date-column", default="date")
    p.add_argument("--cases-column", default="cases")
    p.add_argument("--population-column")
    p.add_argument("--population", type=int, help="population override")
    p.add_argument("--date-format", choices=("auto", "iso", "dmy"), default="auto")
    p.add_argument("--label", help="series label (default: file stem)")
    p.add_argument("--window", type=int, default=1,
                   help="smooth the density with this odd moving-average window (default 1: off)")
    p.add_argument("--out-dir", help="directory for <label>_cumulative.tsv and <label>_density.tsv")

    p = leaf(sub, "fit", cmd_fit, "Fit logistic waves to probability series.")
    p.add_argument("--input", dest="inputs", action="append", help="series TSV (repeatable)")
    p.add_argument("--out", help="fit JSON (single input)")
    p.add_argument("--out-dir", help="directory for <country>.json (several inputs)")
    p.add_argument("--window", type=int, default=ingest.DEFAULT_SMOOTHING_WINDOW)
    p.add_argument("--valley-ratio", type=float, default=logistic.DEFAULT_VALLEY_RATIO)
    p.add_argument("--min-len", type=int, default=logistic.DEFAULT_MIN_LEN)
    p.add_argument("--segments", type=int, help="force this many waves")
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--single", action="store_true", help="fit one wave to the whole series")
    p.add_argument("--jobs", type=int, default=4, help="concurrent fits (default 4)")

    p = leaf(sub, "ratios", cmd_ratios, "Peak-time versus amplitude ratios and their correlation.")
    p.add_argument("--fits", help="directory of fit JSON artifacts")
    p.add_argument("--table1", action="store_true", help="use the built-in wave table")
    p.add_argument("--flag-above", type=float, default=analysis.FLAG_RELATIVE_DEVIATION)
    p.add_argument("--markdown", dest="format", action="store_const", const="markdown",
                   help="print the table as markdown (same as --format markdown)")
    p.add_argument("--out")

    p = sub.add_parser("kdv", help="KdV soliton experiments.")
    kdv_sub = p.add_subparsers(dest="kdv_command", metavar="ACTION")

    def grid_opts(q, length, points):
        q.add_argument("--length", type=float, default=length, help=f"domain length (default {length:g})")
        q.add_argument("--points", "--grid", dest="points", type=int, default=points, help=f"grid points (default {points})")

    q = leaf(kdv_sub, "simulate", cmd_kdv_simulate, "Evolve an n(n+1) kappa^2 sech^2 impulse.")
    q.add_argument("--kappa", type=float, default=0.5)
    q.add_argument("--n", type=int, default=1)
    q.add_argument("--c1", type=float, default=0.0, help="constant sink")
    q.add_argument("--delta", type=float, default=1.0, help="dispersion coefficient")
    grid_opts(q, 100.0, 256)
    q.add_argument("--dt", type=float, help="time step (default: stability limit)")
    q.add_argument("--t-end", type=float, help="default: one transit (c1 = 0) or the return time")
    q.add_argument("--x0", type=float, help="initial crest position (default L/4)")
    q.add_argument("--snapshots", type=int, default=1, help="equally spaced states to export")
    q.add_argument("--field-out", help="TSV of x, U, P per snapshot")
    q.add_argument("--out")

    q = leaf(kdv_sub, "train", cmd_kdv_train, "Split an n-soliton impulse and measure the train.")
    q.add_argument("--n", type=int, default=2)
    q.add_argument("--kappa", type=float, default=1.0)
    grid_opts(q, 100.0, 1024)
    q.add_argument("--dt", type=float)
    q.add_argument("--t-end", type=float, help="default 1.5 / kappa^3")
    q.add_argument("--out")

    q = leaf(kdv_sub, "return", cmd_kdv_return, "Time a crest's return to its start under the sink.")
    q.add_argument("--kappa", type=float, nargs="+", default=[0.8, 1.0, 1.25])
    q.add_argument("--c1", type=float, default=1.0)
    q.add_argument("--delta", type=float, default=1.0)
    grid_opts(q, 64.0, 256)
    q.add_argument("--dt", type=float)
    q.add_argument("--out")

    q = leaf(kdv_sub, "profile", cmd_kdv_profile, "Closed-form single-soliton profile.")
    q.add_argument("--kappa", type=float, default=1.0)
    q.add_argument("--n", type=int, default=1)
    q.add_argument("--c1", type=float, default=0.0)
    q.add_argument("--delta", type=float, default=1.0)
    q.add_argument("--time", type=float, default=0.0)
    grid_opts(q, 40.0, 512)
    q.add_argument("--out")

    q = leaf(kdv_sub, "sigmoid", cmd_kdv_sigmoid, "Logistic cumulative of the single soliton.")
    q.add_argument("--kappa", type=float, default=1.0)
    q.add_argument("--t-min", type=float, default=-5.0)
    q.add_argument("--t-max", type=float, default=5.0)
    q.add_argument("--samples", type=int, default=201)
    q.add_argument("--out")

    p = sub.add_parser("oscillator", help="Cyclic probability oscillators.")
    osc_sub = p.add_subparsers(dest="oscillator_command", metavar="ACTION")
    q = leaf(osc_sub, "simulate", cmd_oscillator, "Integrate a harmonic or non-harmonic oscillator.")
    q.add_argument("--model", choices=("harmonic", "coupled", "nonharmonic"), default="harmonic")
    q.add_argument("--gamma", type=float, default=0.1)
    q.add_argument("--p10", type=float, default=0.5)
    q.add_argument("--p20", type=float, default=0.5)
    q.add_argument("--alpha", type=float, default=0.0, help="quadratic coefficient (nonharmonic)")
    q.add_argument("--c", "--C", dest="C", type=float, default=0.0, help="constant drive (nonharmonic)")
    q.add_argument("--initial", type=float, nargs=2, metavar=("A", "B"),
                   help="(p_prev, p) for harmonic/coupled, (p, dp/dt) for nonharmonic")
    q.add_argument("--t-end", type=float, default=100.0)
    q.add_argument("--dt", type=float, default=1e-2)
    q.add_argument("--out", help="trajectory TSV")

    p = leaf(sub, "redundancy", cmd_redundancy, "Entropies and mutual redundancy of a 3-way table.")
    p.add_argument("--input", help="long CSV: cat1, cat2, cat3, count")
    p.add_argument("--out")

    p = sub.add_parser("sir", help="SIR epidemic model.")
    sir_sub = p.add_subparsers(dest="sir_command", metavar="ACTION")
    q = leaf(sir_sub, "simulate", cmd_sir, "Integrate SIR and optionally fit one logistic wave.")
    q.add_argument("--beta", type=float, default=0.15)
    q.add_argument("--gamma", type=float, default=0.1)
    q.add_argument("--population", "--n", dest="population", type=float, default=1e6)
    q.add_argument("--infected", "--i0", dest="infected", type=float, default=10.0)
    q.add_argument("--t-end", type=float,
                   help="default: until 99.9%% of the final size is infected (10/gamma if R0 <= 1)")
    q.add_argument("--dt", type=float, default=0.1)
    q.add_argument("--reduce", action="store_true", help="fit a single logistic to 1 - S")
    q.add_argument("--out", help="trajectory TSV")

    p = leaf(sub, "report", cmd_report, "Plot-data bundle and tables from fit artifacts.")
    p.add_argument("--fits", help="directory of fit JSON artifacts")
    p.add_argument("--out-dir", help="default ./report")
    p.add_argument("--kdv", dest="kdv_results", action="append",
                   help="kdv JSON result to include (repeatable)")
    p.add_argument("--expect", nargs="+", metavar="COUNTRY", help="countries that must be present")
    p.add_argument("--strict", action="store_true", help="nonzero exit when anything is missing")
    return parser, leaves


def _apply_config(args, argv, parser, leaves):
    try:
        data = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read config: {exc}") from None
    except ValueError as exc:
        raise InputError(f"config is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise InputError("config must be a JSON object")
    known = vars(args)
    defaults = {}
    for key, value in data.items():
        dest = key.lstrip("-").replace("-", "_")
        if dest not in known or dest in ("handler", "config"):
            raise UsageError(f"unknown config option {key!r} for this command")
        defaults[dest] = value
    leaf_parser = next(p for p in leaves.values() if p.get_default("handler") is args.handler)
    leaf_parser.set_defaults(**defaults)
    return parser.parse_args(argv)


def _setup_logging():
    level = LOG_LEVELS.get(os.environ.get("HELIXWAVES_LOG", "warn").lower(), logging.WARNING)
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s", force=True)


def main(argv: Optional[list[str]] = None) -> int:
    _setup_logging()
    argv = sys.argv[1:] if argv is None else list(argv)
    parser, leaves = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "handler", None) is None:
            parser.print_help(sys.stderr)
            return UsageError.exit_code
        if args.config:
            args = _apply_config(args, argv, parser, leaves)
        return args.handler(args)
    except HelixWavesError as exc:
        print(f"{TOOL_NAME}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except KeyError as exc:
        print(f"{TOOL_NAME}: error: {exc.args[0]}", file=sys.stderr)
        return InputError.exit_code
    except OSError as exc:
        print(f"{TOOL_NAME}: error: {exc}", file=sys.stderr)
        return InputError.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
