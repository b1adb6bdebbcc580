"""Command-line harness: worked examples, pipelines, and cone sweeps.

Subcommands
-----------
grid             print the default scale grid
exact            closed-form confidence report (slab, half-space, shell)
pipeline         sample counts, fit candidates, AIC-select, report
sweep-contour    confidence measure over a planar grid of observations
sweep-rejection  rejection rates over boundary means, replicated draws

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 sweep
finished with flagged rows.  REGIONBOOT_SEED provides the seed when --seed
is not given.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from importlib import metadata
from multiprocessing import get_context

import numpy as np

from .confidence import exact_slab_p_values
from .errors import ConfigError, NumericalError, RegionbootError
from .models import REGISTRY
from .pipeline import MEASURES, default_candidates, evaluate_measures, run_pipeline
from .regions import (
    Cone2D,
    HalfSpace,
    Region,
    Slab,
    SphericalShell,
    exact_bootstrap_prob,
    exact_one_sided_shell,
    exact_p_shell,
    region_from_dict,
    region_to_dict,
    shell_critical_constants,
)
from .sampling import counts_from_csv, counts_to_csv, default_scale_grid, ScaleGrid

DEFAULT_ALPHA_LOW = 0.05
DEFAULT_ALPHA_HIGH = 0.95


def _version() -> str:
    try:
        return metadata.version("regionboot")
    except metadata.PackageNotFoundError:
        return "unknown"


def _parse_region(text: str) -> Region:
    """Region from an inline JSON object or a path to a JSON file."""
    if os.path.exists(text):
        with open(text, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--region is neither a file nor valid JSON: {exc}") from exc
    return region_from_dict(data)


def _parse_vector(text: str) -> np.ndarray:
    try:
        return np.asarray([float(tok) for tok in text.split(",") if tok.strip() != ""])
    except ValueError as exc:
        raise ConfigError(f"--y must be a comma-separated vector: {exc}") from exc


def _resolve_seed(value) -> int:
    if value is not None:
        return int(value)
    env = os.environ.get("REGIONBOOT_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"REGIONBOOT_SEED must be an integer, got {env!r}") from exc
    return 0


def _load_grid(args) -> ScaleGrid:
    if getattr(args, "scales", None):
        with open(args.scales, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        return ScaleGrid(
            sigma2=tuple(data["sigma2"]),
            tau2=tuple(data["tau2"]) if data.get("tau2") else None,
            replicates=tuple(data.get("replicates", [args.B] * len(data["sigma2"]))),
        )
    return default_scale_grid(two_step=True, b=args.B)


def _emit_json(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2)
    print(text)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def _write_csv(path: str | None, header: list[str], rows: list[list]) -> None:
    def dump(fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])

    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            dump(fh)
    else:
        dump(sys.stdout)


def _sidecar(path: str | None, config: dict, elapsed: float) -> None:
    if not path:
        return
    payload = {"config": config, "version": _version(), "elapsed_seconds": elapsed}
    with open(path + ".json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_grid(args) -> int:
    grid = default_scale_grid(two_step=not args.one_step, b=args.B)
    payload = {
        "sigma2": list(grid.sigma2),
        "tau2": None if grid.tau2 is None else list(grid.tau2),
        "replicates": list(grid.replicates),
    }
    _emit_json(payload, args.out)
    return 0


def cmd_exact(args) -> int:
    region = _parse_region(args.region)
    y = _parse_vector(args.y)
    if isinstance(region, (Slab, HalfSpace)):
        if y.size != region.ambient_dim:
            raise ConfigError(f"y must have {region.ambient_dim} coordinates")
        y_last = float(y[-1]) - getattr(region, "offset", 0.0)
        if isinstance(region, HalfSpace):
            from .distributions import std_normal_cdf

            p = float(std_normal_cdf(-y_last))
            payload = {
                "region": region_to_dict(region),
                "p_one_sided": p,
                "pi_one_sided": p,
            }
        else:
            report = exact_slab_p_values(y_last, region.d)
            payload = {
                "region": region_to_dict(region),
                "p_one_sided": report.p_one_sided,
                "pi_one_sided": report.p_one_sided,
                "p1": report.p1,
                "p2": report.p2,
                "p_two_sided": report.p_two_sided,
                "pi_bayes": report.pi_bayes,
                "bp_sigma1": exact_bootstrap_prob(region, y, 1.0),
            }
    elif isinstance(region, SphericalShell):
        if y.size != region.ambient_dim:
            raise ConfigError(f"y must have {region.ambient_dim} coordinates")
        norm_y = float(np.linalg.norm(y))
        df = region.ambient_dim
        p1 = exact_one_sided_shell(norm_y, region.a1, df, "outer")
        p2 = exact_one_sided_shell(norm_y, region.a2, df, "inner")
        c1, c2 = shell_critical_constants(DEFAULT_ALPHA_LOW, region.a1, region.a2, df)
        payload = {
            "region": region_to_dict(region),
            "norm_y": norm_y,
            "p1": p1,
            "p2": p2,
            "p_two_sided_combined": 1.0 - abs(p1 - p2),
            "pi_bayes": max(0.0, 1.0 - (p1 + p2)),
            "p_exact": exact_p_shell(norm_y, region.a1, region.a2, df),
            "bp_sigma1": exact_bootstrap_prob(region, y, 1.0),
            "critical_constants_alpha_05": [c1, c2],
        }
    else:
        raise ConfigError(f"region {type(region).__name__} has no exact oracle")
    _emit_json(payload, args.out)
    return 0


def cmd_pipeline(args) -> int:
    region = _parse_region(args.region)
    seed = _resolve_seed(args.seed)
    models = args.models.split(",") if args.models else None

    if args.counts:
        from .fitting import select
        from .pipeline import report_from_selection

        with open(args.counts, "r", encoding="utf-8") as fh:
            counts = counts_from_csv(fh.read())
        names = models or default_candidates(region, args.target)
        selection = select([REGISTRY[n] for n in names], counts)
        report = report_from_selection(selection, args.k, args.sigma0sq)
        report.provenance["counts_file"] = args.counts

        class _Result:
            pass

        result = _Result()
        result.counts, result.selection, result.report = counts, selection, report
        y = None
    else:
        if not args.y:
            raise ConfigError("pipeline needs --y (or --counts)")
        y = _parse_vector(args.y)
        grid = _load_grid(args)
        result = run_pipeline(
            region,
            y,
            seed=seed,
            target=args.target,
            model_names=models,
            grid=grid,
            k=args.k,
            sigma0_sq=args.sigma0sq,
        )
    payload = {
        "region": region_to_dict(region),
        "y": None if y is None else [float(v) for v in y],
        "report": result.report.to_dict(),
    }
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "report.json"), "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
        with open(os.path.join(args.out, "counts.csv"), "w", encoding="utf-8") as fh:
            fh.write(counts_to_csv(result.counts))
        with open(os.path.join(args.out, "aic.json"), "w", encoding="utf-8") as fh:
            json.dump(result.selection.aic_table(), fh, indent=2)
            fh.write("\n")
    print(json.dumps(payload, indent=2))
    if not result.selection.chosen.converged:
        print("warning: chosen fit did not converge", file=sys.stderr)
        return 3
    return 0


def _point_seed(base_seed: int, index: int) -> int:
    state = np.random.SeedSequence(
        entropy=int(base_seed) % (1 << 63), spawn_key=(index,)
    ).generate_state(1, dtype=np.uint64)
    return int(state[0])


def _contour_task(task) -> dict:
    (index, region_dict, x, yv, measures, seed, b, model_names, k, sigma0_sq) = task
    region = region_from_dict(region_dict)
    try:
        out = evaluate_measures(
            region,
            np.array([x, yv]),
            tuple(measures),
            seed=seed,
            b=b,
            model_names=model_names,
            k=k,
            sigma0_sq=sigma0_sq,
        )
        return {"index": index, "values": out["values"], "model": out["model"], "error": ""}
    except RegionbootError as exc:
        return {"index": index, "values": {}, "model": None, "error": str(exc)}


def _rejection_task(task) -> dict:
    (index, region_dict, mu, rep, measures, seed, b, model_names, k, sigma0_sq) = task
    region = region_from_dict(region_dict)
    rng = np.random.Generator(np.random.Philox(key=np.array([np.uint64(seed), np.uint64(255)])))
    y = np.asarray(mu, dtype=float) + rng.standard_normal(2)
    try:
        out = evaluate_measures(
            region,
            y,
            tuple(measures),
            seed=seed,
            b=b,
            model_names=model_names,
            k=k,
            sigma0_sq=sigma0_sq,
        )
        return {"index": index, "values": out["values"], "error": ""}
    except RegionbootError as exc:
        return {"index": index, "values": {}, "error": str(exc)}


def _run_tasks(tasks, worker, threads: int):
    if threads <= 1:
        return [worker(t) for t in tasks]
    ctx = get_context("fork") if sys.platform.startswith("linux") else get_context("spawn")
    with ctx.Pool(processes=threads) as pool:
        return pool.map(worker, tasks, chunksize=1)


def _measures_from_args(args) -> tuple[str, ...]:
    measures = tuple(m.strip() for m in args.measure.split(",") if m.strip())
    bad = [m for m in measures if m not in MEASURES]
    if bad:
        raise ConfigError(f"unknown measures {bad}; known: {MEASURES}")
    if not measures:
        raise ConfigError("need at least one measure")
    return measures


def cmd_sweep_contour(args) -> int:
    region = _parse_region(args.region)
    if not isinstance(region, Cone2D):
        raise ConfigError("sweep-contour expects a cone2d region")
    measures = _measures_from_args(args)
    seed = _resolve_seed(args.seed)
    if args.step <= 0:
        raise ConfigError("--step must be > 0")
    xs = np.arange(args.xmin, args.xmax + 1e-12, args.step)
    ys = np.arange(args.ymin, args.ymax + 1e-12, args.step)
    model_names = args.models.split(",") if args.models else None

    t0 = time.perf_counter()
    points = [(x, yv) for yv in ys for x in xs]
    tasks = [
        (
            i,
            region_to_dict(region),
            float(x),
            float(yv),
            measures,
            _point_seed(seed, i),
            args.B,
            model_names,
            args.k,
            args.sigma0sq,
        )
        for i, (x, yv) in enumerate(points)
    ]
    results = _run_tasks(tasks, _contour_task, args.threads)
    results.sort(key=lambda r: r["index"])

    header = ["x", "y"]
    for m in measures:
        header += [m, f"{m}_reject_low", f"{m}_reject_high"]
    header += ["model", "flag"]
    rows = []
    n_flagged = 0
    for (x, yv), res in zip(points, results):
        row = [x, yv]
        for m in measures:
            v = res["values"].get(m)
            if v is None:
                row += ["nan", 0, 0]
            else:
                row += [v, int(v < args.alpha_low), int(v > args.alpha_high)]
        ok = res["error"] == ""
        if not ok:
            n_flagged += 1
        row += [res["model"] or "", "ok" if ok else f"error:{res['error']}"]
        rows.append(row)
    _write_csv(args.out, header, rows)
    _sidecar(
        args.out,
        {
            "command": "sweep-contour",
            "region": region_to_dict(region),
            "measures": list(measures),
            "seed": seed,
            "B": args.B,
            "grid": {
                "xmin": args.xmin,
                "xmax": args.xmax,
                "ymin": args.ymin,
                "ymax": args.ymax,
                "step": args.step,
            },
            "alpha": [args.alpha_low, args.alpha_high],
            "models": model_names or default_candidates(region, "H0"),
            "threads": args.threads,
        },
        time.perf_counter() - t0,
    )
    return 4 if n_flagged else 0


def cmd_sweep_rejection(args) -> int:
    region = _parse_region(args.region)
    if not isinstance(region, Cone2D):
        raise ConfigError("sweep-rejection expects a cone2d region")
    measures = _measures_from_args(args)
    seed = _resolve_seed(args.seed)
    try:
        mus = [float(tok) for tok in args.mus.split(",")]
    except ValueError as exc:
        raise ConfigError(f"--mus must be comma-separated numbers: {exc}") from exc
    if args.replicates < 1:
        raise ConfigError("--replicates must be >= 1")
    model_names = args.models.split(",") if args.models else None

    # means sit on the edge of the cone, which the default orientation puts
    # along the x-axis
    edge_angle = region.orientation - region.half_angle
    mu_points = [(r * np.cos(edge_angle), r * np.sin(edge_angle)) for r in mus]

    t0 = time.perf_counter()
    tasks = []
    idx = 0
    for mu in mu_points:
        for _ in range(args.replicates):
            tasks.append(
                (
                    idx,
                    region_to_dict(region),
                    mu,
                    None,
                    measures,
                    _point_seed(seed, idx),
                    args.B,
                    model_names,
                    args.k,
                    args.sigma0sq,
                )
            )
            idx += 1
    results = _run_tasks(tasks, _rejection_task, args.threads)
    results.sort(key=lambda r: r["index"])

    header = [
        "norm_mu",
        "mu_x",
        "mu_y",
        "measure",
        "replicates",
        "failures",
        "n_reject_low",
        "n_reject_high",
        "rate_low",
        "rate_high",
        "se_low",
        "se_high",
    ]
    rows = []
    n_flagged = 0
    for j, (r, mu) in enumerate(zip(mus, mu_points)):
        chunk = results[j * args.replicates : (j + 1) * args.replicates]
        failures = sum(1 for c in chunk if c["error"])
        n_flagged += failures
        for m in measures:
            vals = [c["values"][m] for c in chunk if not c["error"]]
            n = len(vals)
            n_low = sum(1 for v in vals if v < args.alpha_low)
            n_high = sum(1 for v in vals if v > args.alpha_high)
            rate_low = n_low / n if n else float("nan")
            rate_high = n_high / n if n else float("nan")
            se_low = float(np.sqrt(rate_low * (1 - rate_low) / n)) if n else float("nan")
            se_high = float(np.sqrt(rate_high * (1 - rate_high) / n)) if n else float("nan")
            rows.append(
                [r, mu[0], mu[1], m, n, failures, n_low, n_high, rate_low, rate_high, se_low, se_high]
            )
    _write_csv(args.out, header, rows)
    _sidecar(
        args.out,
        {
            "command": "sweep-rejection",
            "region": region_to_dict(region),
            "measures": list(measures),
            "seed": seed,
            "B": args.B,
            "mus": mus,
            "replicates": args.replicates,
            "alpha": [args.alpha_low, args.alpha_high],
            "models": model_names or default_candidates(region, "H0"),
            "threads": args.threads,
        },
        time.perf_counter() - t0,
    )
    return 4 if n_flagged else 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p: argparse.ArgumentParser, sweep: bool = False) -> None:
    p.add_argument("--region", required=True, help="region JSON (inline or file path)")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (default: REGIONBOOT_SEED or 0)")
    p.add_argument("--B", type=int, default=10000, help="bootstrap replicates per scale")
    p.add_argument("--scales", default=None, help="JSON file with sigma2/tau2/replicates")
    p.add_argument("--k", type=int, default=3, help="Taylor extrapolation order")
    p.add_argument("--sigma0sq", type=float, default=1.0, help="Taylor expansion point")
    p.add_argument("--models", default=None, help="comma-separated registry names")
    p.add_argument("--out", default=None, help="output path")
    if sweep:
        p.add_argument("--threads", type=int, default=1, help="worker processes")
        p.add_argument("--alpha-low", dest="alpha_low", type=float, default=DEFAULT_ALPHA_LOW)
        p.add_argument("--alpha-high", dest="alpha_high", type=float, default=DEFAULT_ALPHA_HIGH)
        p.add_argument(
            "--measure",
            default="two-sided-select",
            help=f"comma-separated measures from {MEASURES}",
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="regionboot",
        description="Frequentist and Bayesian confidence measures for regions "
        "via multiscale bootstrap",
    )
    parser.add_argument("--version", action="version", version=_version())
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("grid", help="print the default scale grid")
    p.add_argument("--one-step", action="store_true")
    p.add_argument("--B", type=int, default=10000)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("exact", help="closed-form confidence report")
    p.add_argument("--region", required=True)
    p.add_argument("--y", required=True, help="comma-separated observation vector")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("pipeline", help="bootstrap, fit, select, report")
    _add_common(p)
    p.add_argument("--y", default=None, help="comma-separated observation vector")
    p.add_argument("--counts", default=None, help="fit a previously written counts CSV")
    p.add_argument("--target", default="H0", choices=["H0", "H0p", "H1", "H2"])
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("sweep-contour", help="measure values over a planar grid")
    _add_common(p, sweep=True)
    p.add_argument("--xmin", type=float, default=-2.875)
    p.add_argument("--xmax", type=float, default=11.875)
    p.add_argument("--ymin", type=float, default=-4.375)
    p.add_argument("--ymax", type=float, default=4.375)
    p.add_argument("--step", type=float, default=0.25)
    p.set_defaults(func=cmd_sweep_contour)

    p = sub.add_parser("sweep-rejection", help="rejection rates over boundary means")
    _add_common(p, sweep=True)
    p.add_argument("--mus", default="0,2,4,8,16", help="distances from the vertex along the edge")
    p.add_argument("--replicates", type=int, default=1000)
    p.set_defaults(func=cmd_sweep_rejection)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, RegionbootError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
