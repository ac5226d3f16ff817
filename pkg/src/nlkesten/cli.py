"""Command-line front end: ingest, fit, simulate, report.

All wealth values are in GBP. The non-linear dynamics are not scale
invariant, so feeding wealth in other units changes the results, not just
their labels. Simulations require an explicit seed; there is no silent
entropy source anywhere in the pipeline.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from nlkesten import __version__, plots
from nlkesten.distributions import (RICH_LIST_ALPHA, SURVEY_ALPHA,
                                    fit_nct_mle, sample_nct_many)
from nlkesten.empirics import (fit_ror_power, fit_savings, lorenz_to_tail,
                               merge_rich_list, percentile_ror,
                               read_deciles_csv, read_rich_list_csv,
                               read_survey_csv)
from nlkesten.errors import (EmptyInput, InputError, KestenError,
                             MissingArtifact, NumericError)
from nlkesten.process import (SavingsModel, UK_SAVINGS, config_digest,
                              config_from_dict, default_observation_times,
                              run, save_checkpoint)
from nlkesten.tailstats import fit_power_law, read_tail_csv, write_tail_csv

WEALTH_UNIT = "GBP"
THREADS_ENV = "NLKESTEN_THREADS"
# Rough count of UK households; the largest population the CLI accepts.
MAX_AGENTS = 23_000_000
SERIES_HEADER = ["n", "gini", "s01", "bankruptcies"]

_ALPHA_LAWS = {"rich": RICH_LIST_ALPHA, "survey": SURVEY_ALPHA}

_DEFAULTS = {
    "gamma": 1.075,
    "alpha_law": {"k": RICH_LIST_ALPHA.k, "c": RICH_LIST_ALPHA.c,
                  "l": RICH_LIST_ALPHA.l, "s": RICH_LIST_ALPHA.s},
    "premultiplier": 1.0,
    "savings": None,
    "replacement": "R1",
    "initial": {"kind": "constant", "w0": 10_000.0},
    "n_agents": 100_000,
    "horizon": 100,
    "master_seed": None,
}


# === shared plumbing =======================================================

def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def write_series_csv(path: str | Path, series: np.ndarray) -> None:
    """Inequality time series, one row per step."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SERIES_HEADER)
        for row in series:
            writer.writerow([int(row[0]), repr(float(row[1])),
                             repr(float(row[2])), int(row[3])])


def read_series_csv(path: str | Path) -> np.ndarray:
    """Series back as a (steps, 4) float array."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != SERIES_HEADER:
            raise ValueError(
                f"{path}: expected header {','.join(SERIES_HEADER)}")
        rows = [[float(v) for v in row] for row in reader]
    if not rows:
        raise EmptyInput(f"{path}: no rows")
    return np.array(rows)


def _read_json(path: Path) -> dict:
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise InputError(f"{path}: no such file")
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: {exc}")
    if not isinstance(raw, dict):
        raise InputError(f"{path}: expected a JSON object")
    return raw


def _tail_sidecar(tail_path: Path) -> dict:
    side = Path(str(tail_path) + ".meta.json")
    if not side.exists():
        raise InputError(f"{tail_path}: missing sidecar {side.name}; "
                         "the ingest command writes it")
    return _read_json(side)


def _write_manifest(outdir: Path, manifest: dict) -> None:
    (outdir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _resolve_threads(args) -> tuple[int, str]:
    source = "default"
    threads = 1
    env = os.environ.get(THREADS_ENV)
    if env is not None:
        try:
            threads = int(env)
        except ValueError:
            raise InputError(f"{THREADS_ENV}={env!r} is not an integer")
        source = "env"
    if getattr(args, "threads", None) is not None:
        threads = args.threads
        source = "flag"
    if threads < 1:
        raise InputError("thread count must be at least 1")
    return threads, source


# === config assembly =======================================================

def _parse_floats(text: str, n: int) -> list[float]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != n:
        raise InputError(f"expected {n} comma-separated values, got {text!r}")
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise InputError(f"non-numeric value in {text!r}")


def _parse_initial(text: str) -> dict:
    kind, _, rest = text.partition(":")
    kind = kind.strip().lower()
    try:
        if kind == "constant":
            return {"kind": "constant", "w0": float(rest)}
        if kind == "shiftedexp":
            floor, mean = _parse_floats(rest, 2)
            return {"kind": "shifted_exp", "floor": floor, "mean": mean}
        if kind == "exp":
            return {"kind": "exp", "mean": float(rest)}
        if kind == "pareto":
            x_m, beta = _parse_floats(rest, 2)
            return {"kind": "pareto", "x_m": x_m, "beta": beta}
        if kind == "bootstrap":
            if not rest:
                raise InputError("bootstrap needs a tail CSV path")
            return {"kind": "bootstrap", "path": str(Path(rest).resolve())}
    except ValueError:
        raise InputError(f"cannot parse initial condition {text!r}")
    raise InputError(
        f"unknown initial condition kind {kind!r}; use constant:W0, "
        "shiftedexp:FLOOR,MEAN, exp:MEAN, pareto:XM,BETA or bootstrap:PATH")


def _parse_savings(text: str) -> dict | None:
    label = text.strip().lower()
    if label == "zero":
        return None
    if label == "uk":
        return {"kappa1": UK_SAVINGS.kappa1, "kappa2": UK_SAVINGS.kappa2,
                "kappa3": UK_SAVINGS.kappa3}
    k1, k2, k3 = _parse_floats(text, 3)
    return {"kappa1": k1, "kappa2": k2, "kappa3": k3}


def _assemble_config(args):
    merged = json.loads(json.dumps(_DEFAULTS))
    provenance = {key: "default" for key in merged}
    digests = {}
    base_dir = None
    if args.config is not None:
        path = Path(args.config)
        raw = _read_json(path)
        unknown = set(raw) - set(_DEFAULTS)
        if unknown:
            raise InputError(f"{path}: unknown config keys "
                             f"{', '.join(sorted(unknown))}")
        for key, value in raw.items():
            merged[key] = value
            provenance[key] = "file"
        digests[str(path)] = _sha256(path)
        base_dir = path.parent

    def from_flag(key, value):
        if value is not None:
            merged[key] = value
            provenance[key] = "flag"

    from_flag("gamma", args.gamma)
    from_flag("premultiplier", args.mult)
    from_flag("n_agents", args.agents)
    from_flag("horizon", args.horizon)
    from_flag("master_seed", args.seed)
    if args.law is not None:
        law = _ALPHA_LAWS[args.law]
        from_flag("alpha_law",
                  {"k": law.k, "c": law.c, "l": law.l, "s": law.s})
    if args.replacement is not None:
        from_flag("replacement", args.replacement.upper())
    if args.init is not None:
        initial = _parse_initial(args.init)
        if initial["kind"] == "bootstrap":
            tail_path = Path(initial["path"])
            if not tail_path.exists():
                raise InputError(f"{tail_path}: no such tail file")
            digests[str(tail_path)] = _sha256(tail_path)
        from_flag("initial", initial)
    if args.savings is not None:
        merged["savings"] = _parse_savings(args.savings)
        provenance["savings"] = "flag"
    return merged, provenance, digests, base_dir


# === commands ==============================================================

def cmd_ingest(args) -> int:
    survey = read_survey_csv(args.survey, args.meta)
    tail = lorenz_to_tail(survey)
    survey_points = len(tail)
    rich_entries = 0
    if args.rich is not None:
        rich = read_rich_list_csv(args.rich, year=args.rich_year)
        rich_entries = rich.wealth.size
        tail = merge_rich_list(tail, rich)
    out = Path(args.out)
    write_tail_csv(tail, out)
    sidecar = {"year": survey.year,
               "households_total": survey.households_total,
               "wealth_total_gbp": survey.wealth_total,
               "survey_points": survey_points,
               "rich_list_entries": rich_entries,
               "points": len(tail)}
    Path(str(out) + ".meta.json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    print(f"households {survey.households_total:g}, wealth "
          f"{survey.wealth_total:g} {WEALTH_UNIT}; {survey_points} survey "
          f"points + {rich_entries} rich-list entries -> {len(tail)} tail "
          f"points in {out}")
    return 0


def _read_alpha_csv(path: Path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["alpha"]:
            raise ValueError(f"{path}: expected header alpha")
        values = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 1:
                raise ValueError(f"{path}:{lineno}: expected one column")
            try:
                values.append(float(row[0]))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric alpha "
                                 f"{row[0]!r}")
    if not values:
        raise EmptyInput(f"{path}: no samples")
    return np.array(values)


def cmd_fit(args) -> int:
    result: dict = {"wealth_unit": WEALTH_UNIT}
    diagnostics: dict = {}
    lines = []

    savings_model = SavingsModel.zero()
    if args.deciles is not None:
        wealth, savings = read_deciles_csv(args.deciles)
        savings_model = fit_savings(wealth, savings)
        result["savings"] = {"kappa1": savings_model.kappa1,
                             "kappa2": savings_model.kappa2,
                             "kappa3": savings_model.kappa3}
        diagnostics["savings_points"] = int(wealth.size)
        lines.append(f"savings: kappa1 {savings_model.kappa1:g}, kappa2 "
                     f"{savings_model.kappa2:g}, kappa3 "
                     f"{savings_model.kappa3:g}")

    if args.tails:
        if len(args.tails) < 2:
            raise InputError("need at least two tail files to compute "
                             "returns between observations")
        dated = []
        for name in args.tails:
            path = Path(name)
            meta = _tail_sidecar(path)
            total = meta.get("households_total")
            tail = read_tail_csv(path, households_total=None if total is None
                                 else int(total))
            dated.append((int(meta["year"]), str(path), tail))
        dated.sort(key=lambda item: item[0])
        years = [y for y, _, _ in dated]
        if len(set(years)) != len(years):
            raise InputError(f"tail files share a year: {years}")
        series = []
        for (y0, _, t0), (y1, _, t1) in zip(dated, dated[1:]):
            series.append(percentile_ror(t0, t1, savings_model,
                                         period_years=float(y1 - y0)))
        fit = fit_ror_power(series, gamma=args.gamma)
        result["gamma"] = fit.gamma
        result["mu"] = fit.mu
        result["sigma"] = fit.sigma
        diagnostics["ror_points"] = fit.n_points
        diagnostics["ror_excluded"] = fit.n_excluded
        diagnostics["tail_years"] = years
        mode = "fixed" if args.gamma is not None else "free"
        lines.append(f"returns ({mode} gamma): mu {fit.mu:.6g}, gamma "
                     f"{fit.gamma:.6g}, sigma {fit.sigma:.6g}")
    elif args.gamma is not None:
        result["gamma"] = float(args.gamma)

    if args.alpha is not None:
        samples = _read_alpha_csv(Path(args.alpha))
        params, loglik = fit_nct_mle(samples)
        result["nct"] = {"k": params.k, "c": params.c, "l": params.l,
                         "s": params.s}
        diagnostics["nct_samples"] = int(samples.size)
        diagnostics["nct_loglik"] = loglik
        lines.append(f"nct: k {params.k:.4g}, c {params.c:.4g}, "
                     f"l {params.l:.4g}, s {params.s:.4g}")

    if len(result) == 1:
        raise InputError("nothing to fit: supply --tails, --alpha or "
                         "--deciles")
    result["diagnostics"] = diagnostics
    Path(args.out).write_text(json.dumps(result, indent=2, sort_keys=True)
                              + "\n")
    for line in lines:
        print(line)
    print(f"parameters written to {args.out}")
    return 0


def cmd_simulate(args) -> int:
    merged, provenance, digests, base_dir = _assemble_config(args)
    if merged.get("master_seed") is None:
        raise InputError("a seed is required: pass --seed or set "
                         "master_seed in the config file")
    try:
        config = config_from_dict(merged, base_dir=base_dir)
    except (KeyError, TypeError) as exc:
        raise InputError(f"bad configuration: {exc}")
    if config.n_agents > MAX_AGENTS:
        raise InputError(f"{config.n_agents} agents exceeds the supported "
                         f"maximum {MAX_AGENTS}")
    threads, threads_source = _resolve_threads(args)
    if args.obs is not None:
        requested = _parse_floats(args.obs, len(args.obs.split(",")))
        observation_times = tuple(sorted(
            {int(t) for t in requested if t <= config.horizon}))
    else:
        observation_times = default_observation_times(config)

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    tail_names = {int(t): f"tail_n{int(t)}.csv" for t in observation_times}
    manifest = {
        "tool_version": __version__,
        "command": "simulate",
        "wealth_unit": WEALTH_UNIT,
        "master_seed": config.master_seed,
        # The merged dict (not the resolved config) keeps bootstrap tails
        # as paths, so the manifest alone can rebuild this exact run; the
        # digest below pins the resolved data either way.
        "config": merged,
        "config_sha256": config_digest(config),
        "observation_times": [int(t) for t in observation_times],
        "threads": threads,
        "threads_source": threads_source,
        "provenance": provenance,
        "input_digests": digests,
        "outputs": {"series": "series.csv",
                    "checkpoint": "final.ckpt",
                    "tails": {str(t): name for t, name in tail_names.items()}},
        "status": "running",
    }
    _write_manifest(outdir, manifest)

    def observer(snapshot):
        write_tail_csv(snapshot.tail, outdir / tail_names[snapshot.step])

    try:
        result = run(config, observer=observer,
                     observation_times=observation_times, threads=threads)
    except NumericError as exc:
        manifest["status"] = "failed"
        manifest["error"] = str(exc)
        step = getattr(exc, "step", None)
        if step is not None:
            manifest["failed_step"] = int(step)
        _write_manifest(outdir, manifest)
        raise
    write_series_csv(outdir / "series.csv", result.series)
    save_checkpoint(result.population, config, outdir / "final.ckpt")
    manifest["status"] = "complete"
    _write_manifest(outdir, manifest)
    final = result.series[-1]
    print(f"{config.n_agents} agents, {config.horizon} steps, seed "
          f"{config.master_seed}, {threads} thread(s)")
    print(f"final gini {final[1]:.4f}, top 1% share {final[2]:.4f}, "
          f"bankruptcies {int(final[3])}; outputs in {outdir}")
    return 0


def cmd_report(args) -> int:
    rundir = Path(args.rundir)
    if not rundir.is_dir():
        raise MissingArtifact(f"{rundir}: no such run directory")
    manifest_path = rundir / "manifest.json"
    summary: list[str] = []
    written: list[Path] = []
    if manifest_path.exists():
        manifest = _read_json(manifest_path)
        if manifest.get("status") == "failed":
            summary.append(f"run failed: {manifest.get('error')}")
        outputs = manifest.get("outputs", {})
        series_path = rundir / outputs.get("series", "series.csv")
        if series_path.exists():
            series = read_series_csv(series_path)
            written.append(plots.series_figure(series,
                                               rundir / "series.svg"))
            summary.append(
                f"n={int(series[-1, 0])}: gini {series[-1, 1]:.4f}, top 1% "
                f"share {series[-1, 2]:.4f}, bankruptcies "
                f"{int(series[-1, 3])}")
        households = int(manifest["config"]["n_agents"])
        for step in sorted(int(s) for s in outputs.get("tails", {})):
            path = rundir / outputs["tails"][str(step)]
            if not path.exists():
                summary.append(f"n={step}: tail missing (partial run)")
                continue
            tail = read_tail_csv(path, households_total=households)
            written.append(_tail_report(tail, f"n = {step}",
                                        rundir / f"tail_n{step}.svg",
                                        summary))
        # Only the alpha law matters for the density panel; swapping in a
        # stub initial condition avoids re-reading bootstrap tail files.
        cfg = config_from_dict(manifest["config"] | {
            "initial": {"kind": "constant", "w0": 1.0}}, base_dir=rundir)
        draws = cfg.premultiplier * sample_nct_many(
            cfg.alpha_law, cfg.master_seed, 100_000)
        written.append(plots.density_figure(draws,
                                            rundir / "alpha_density.svg"))
    else:
        tail_paths = sorted(p for p in rundir.glob("*.csv")
                            if Path(str(p) + ".meta.json").exists())
        if not tail_paths:
            raise MissingArtifact(f"{rundir}: no manifest.json and no "
                                  "ingested tail CSVs")
        for path in tail_paths:
            meta = _tail_sidecar(path)
            total = meta.get("households_total")
            tail = read_tail_csv(path, households_total=None if total is None
                                 else int(total))
            written.append(_tail_report(tail, path.stem,
                                        rundir / f"{path.stem}.svg",
                                        summary))
    (rundir / "summary.txt").write_text("\n".join(summary) + "\n")
    for line in summary:
        print(line)
    print(f"{len(written)} figure(s) written to {rundir}")
    return 0


def _tail_report(tail, label: str, figpath: Path,
                 summary: list[str]) -> Path:
    fits = None
    try:
        fit = fit_power_law(tail)
        fits = {"power law": fit}
        summary.append(f"{label}: tail exponent {fit.beta:.3f} on "
                       f"[{fit.window[0]:.3g}, {fit.window[1]:.3g}] "
                       f"{WEALTH_UNIT}")
    except KestenError:
        summary.append(f"{label}: no usable power-law window")
    return plots.tail_figure({label: tail}, figpath, fits=fits)


# === entry point ===========================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nlkesten",
        description="Household wealth dynamics under W' = W + alpha*W**gamma "
                    "+ S. All wealth is in GBP; the dynamics are not scale "
                    "invariant, so units matter.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    ingest = sub.add_parser("ingest",
                            help="survey Lorenz CSV (+ rich list) to tail CSV")
    ingest.add_argument("survey", help="Lorenz curve CSV")
    ingest.add_argument("meta", help="survey metadata JSON")
    ingest.add_argument("--rich", help="rich list CSV (rank,wealth_gbp)")
    ingest.add_argument("--rich-year", type=int, default=0)
    ingest.add_argument("--out", required=True, help="tail CSV to write")
    ingest.set_defaults(func=cmd_ingest)

    fit = sub.add_parser("fit", help="estimate model parameters")
    fit.add_argument("--tails", nargs="+", default=[],
                     help="ingested tail CSVs, two or more")
    fit.add_argument("--alpha", help="CSV of alpha samples for the nct fit")
    fit.add_argument("--deciles", help="decile CSV for the savings fit")
    fit.add_argument("--gamma", type=float,
                     help="fix gamma instead of fitting it")
    fit.add_argument("--out", required=True, help="params JSON to write")
    fit.set_defaults(func=cmd_fit)

    sim = sub.add_parser("simulate", help="run the wealth process")
    sim.add_argument("--config", help="config JSON (flags override it)")
    sim.add_argument("--gamma", type=float)
    sim.add_argument("--mult", type=float,
                     help="premultiplier applied to every alpha draw")
    sim.add_argument("--law", choices=sorted(_ALPHA_LAWS),
                     help="calibrated alpha law to use")
    sim.add_argument("--agents", type=int, help=f"population size, up to "
                     f"{MAX_AGENTS}")
    sim.add_argument("--horizon", type=int, help="number of steps")
    sim.add_argument("--seed", type=int, help="master seed (required unless "
                     "the config file sets one)")
    sim.add_argument("--replacement", choices=["r1", "r2", "r3", "R1", "R2",
                                               "R3"])
    sim.add_argument("--init",
                     help="constant:W0 | shiftedexp:FLOOR,MEAN | exp:MEAN | "
                          "pareto:XM,BETA | bootstrap:TAIL.csv")
    sim.add_argument("--savings", help="zero | uk | K1,K2,K3")
    sim.add_argument("--obs", help="comma-separated observation times")
    sim.add_argument("--threads", type=int,
                     help=f"worker threads (default ${THREADS_ENV} or 1)")
    sim.add_argument("--out", required=True, help="run directory")
    sim.set_defaults(func=cmd_simulate)

    rep = sub.add_parser("report", help="render SVG plots for a run or "
                                        "ingest directory")
    rep.add_argument("rundir")
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
