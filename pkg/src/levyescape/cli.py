"""Command-line entry point: ``levyescape <subcommand> [options]``.

Exit codes: 0 success, 1 configuration error, 2 numerical-contract failure,
3 I/O failure. On failure a JSON error record goes to stderr (and to
``error.json`` in the output directory when one exists).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

import numpy as np

from . import __version__, kernels
from .config import emit, parse_config
from .errors import (ConfigError, GeometryError, LevyEscapeError, OutOfDomain, OutOfRegion)
from .io import (OutputError, read_field_csv, render_curves, render_heatmap, write_field,
                 write_json, write_matrix, write_table, write_text)
from .metrics import SweepSpec, heatmap_matrix, r_fep, r_mfet, sweep, turning_points
from .montecarlo import estimate_fep, estimate_mfet, simulate
from .solver import solve_fep, solve_mfet

log = logging.getLogger("levyescape")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3
INPUT_ERRORS = (ConfigError, OutOfDomain, OutOfRegion, GeometryError)


class ContractFailure(LevyEscapeError):
    """Some computations of a batch failed; artifacts were still written."""


# --------------------------------------------------------------------------- args

def _common(p):
    p.add_argument("-c", "--config", help="config file (section.key = value)")
    p.add_argument("-s", "--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key; repeatable")
    p.add_argument("-o", "--out", help="output directory")
    p.add_argument("--alpha", type=float)
    p.add_argument("--sigma", type=float, help="sets sigma1 and sigma2")
    p.add_argument("--sigma1", type=float)
    p.add_argument("--sigma2", type=float)
    p.add_argument("--grid", type=int, help="interior nodes per axis")
    p.add_argument("--seed", type=int)
    p.add_argument("--paths", type=int, help="Monte Carlo path count")
    p.add_argument("--p-star", type=float, help="FEP basin threshold")
    p.add_argument("--u-star", type=float, help="MFET basin threshold")
    p.add_argument("--no-plot", action="store_true")
    p.add_argument("-v", "--verbose", action="store_true")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # malformed flags are configuration errors, not numerical ones
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="levyescape",
                     description="Escape probability and exit time of the "
                                 "Morris-Lecar model under alpha-stable noise")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name, text in [("fep", "solve the first escape probability field"),
                       ("mfet", "solve the mean first exit time field"),
                       ("params", "print the effective configuration")]:
        _common(sub.add_parser(name, help=text))

    p = sub.add_parser("mc", help="Monte Carlo estimates at the start point")
    _common(p)
    p.add_argument("--dump", action="store_true", help="write per-path outcomes CSV")

    p = sub.add_parser("sweep", help="parameter sweep table")
    _common(p)
    p.add_argument("--alphas", help="comma-separated alpha values")
    p.add_argument("--sigmas", help="comma-separated intensity values")
    p.add_argument("--mode", choices=["diagonal", "fix_sigma1", "fix_sigma2"])
    p.add_argument("--fixed", type=float)
    p.add_argument("--dense", action="store_true", help="alpha step 0.01")

    p = sub.add_parser("metrics", help="basin area fraction of a field CSV")
    _common(p)
    p.add_argument("field", help="field CSV written by fep or mfet")
    p.add_argument("--kind", choices=["fep", "mfet"])

    p = sub.add_parser("reproduce", help="figure presets fig3 .. fig10")
    _common(p)
    p.add_argument("figure", choices=[f"fig{n}" for n in range(3, 11)])
    p.add_argument("--dense", action="store_true", help="alpha step 0.01, sigma step 0.01")
    p.add_argument("--quick", action="store_true",
                   help="coarse parameter axes for smoke runs")
    return parser


def _overrides(args):
    pairs = list(args.set)
    if args.alpha is not None:
        pairs.append(f"noise.alpha={args.alpha}")
    for key in ("sigma1", "sigma2"):
        val = getattr(args, key)
        if val is None:
            val = args.sigma
        if val is not None:
            pairs.append(f"noise.{key}={val}")
    if args.grid is not None:
        pairs += [f"solver.n_v={args.grid}", f"solver.n_w={args.grid}"]
    if args.seed is not None:
        pairs.append(f"mc.seed={args.seed}")
    if args.paths is not None:
        pairs.append(f"mc.n_paths={args.paths}")
    if args.no_plot:
        pairs.append("run.plot=false")
    for key, name in [("alphas", "sweep.alphas"), ("sigmas", "sweep.sigmas"),
                      ("mode", "sweep.mode"), ("fixed", "sweep.fixed"),
                      ("p_star", "metrics.p_star"), ("u_star", "metrics.u_star")]:
        val = getattr(args, key, None)
        if val is not None:
            pairs.append(f"{name}={val}")
    if getattr(args, "dense", False) and args.command == "sweep":
        pairs.append("sweep.dense=true")
    return pairs


def _outdir(args, cfg):
    return args.out or os.path.join(cfg.output_root(), args.command if args.command != "reproduce"
                                    else args.figure)


def _prepare(outdir, cfg):
    try:
        os.makedirs(outdir, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create {outdir}: {exc}") from None
    write_text(os.path.join(outdir, "config.txt"), emit(cfg))


# ----------------------------------------------------------------------- commands

def cmd_params(args, cfg):
    sys.stdout.write(emit(cfg))


def _field_command(args, cfg, kind):
    outdir = _outdir(args, cfg)
    _prepare(outdir, cfg)
    drift = cfg.drift()
    if kind == "fep":
        field = solve_fep(drift, cfg.noise, cfg.region, cfg.target, cfg.solver)
    else:
        field = solve_mfet(drift, cfg.noise, cfg.region, cfg.solver)
    path = os.path.join(outdir, f"{kind}.csv")
    write_field(field, path)
    if cfg.run.plot:
        vmax = 1.0 if kind == "fep" else max(field.max(), 1e-12)
        render_heatmap(path, os.path.join(outdir, f"{kind}.png"), 0.0, vmax, label=kind.upper(),
                       marker=cfg.point)
    value = float(field.at(*cfg.point))
    print(f"{kind} at ({cfg.point[0]}, {cfg.point[1]}) = {value:.6g}  "
          f"[residual {field.meta['residual']:.2e}, {field.meta['iterations']} its, "
          f"{field.meta['wall_time']:.2f} s] -> {path}")


def cmd_mc(args, cfg):
    outdir = _outdir(args, cfg)
    _prepare(outdir, cfg)
    drift = cfg.drift()
    t0 = time.perf_counter()
    out = simulate(cfg.point, cfg.region, drift, cfg.noise, cfg.mc, cfg.target)
    record = {"start": list(cfg.point), "alpha": cfg.noise.alpha, "sigma1": cfg.noise.sigma1,
              "sigma2": cfg.noise.sigma2, "dt": cfg.mc.dt, "t_max": cfg.mc.t_max,
              "n_paths": cfg.mc.n_paths, "seed": cfg.mc.seed, "backend": kernels.BACKEND}
    failures = []
    for name, fn in [("fep", lambda: estimate_fep(cfg.point, cfg.region, cfg.target, drift,
                                                  cfg.noise, cfg.mc, outcomes=out)),
                     ("mfet", lambda: estimate_mfet(cfg.point, cfg.region, drift, cfg.noise,
                                                    cfg.mc, outcomes=out))]:
        try:
            est = fn()
        except LevyEscapeError as exc:
            failures.append(f"{name}: {exc}")
            record[name] = {"error": f"{type(exc).__name__}: {exc}"}
            print(f"{name}: {exc}")
            continue
        record[name] = {"mean": est.mean, "half_width": est.half_width, "n_paths": est.n_paths,
                        "censored_fraction": est.censored_fraction, "nonfinite": est.nonfinite}
        print(est.summary(name))
    record["wall_time"] = time.perf_counter() - t0
    write_json(os.path.join(outdir, "estimates.json"), record)
    if args.dump:
        out.to_csv(os.path.join(outdir, "outcomes.csv"))
    if failures:
        raise ContractFailure("; ".join(failures))


def _check_rows(rows):
    bad = [r for r in rows if r["status"] != "ok"]
    if bad:
        raise ContractFailure(f"{len(bad)} of {len(rows)} sweep points failed")


def cmd_sweep(args, cfg):
    outdir = _outdir(args, cfg)
    _prepare(outdir, cfg)
    spec = cfg.sweep_spec()
    rows = sweep(spec, cfg.drift(), cfg.region, cfg.target, cfg.solver, cfg.metrics,
                 cache_dir=cfg.sweep.cache or None, workers=cfg.sweep.workers)
    write_table(rows, os.path.join(outdir, "sweep.csv"))
    if spec.mode != "diagonal":
        for q in ("fep_at_star", "mfet_at_star"):
            if any(r[q] is not None for r in rows):
                xs, ys, Z = heatmap_matrix(rows, q, "ratio")
                write_matrix(xs, ys, Z, os.path.join(outdir, f"heatmap_{q}.csv"))
    print(f"{len(rows)} rows -> {os.path.join(outdir, 'sweep.csv')}")
    _check_rows(rows)


def cmd_metrics(args, cfg):
    kind = args.kind
    meta_path = os.path.splitext(args.field)[0] + ".json"
    if kind is None and os.path.exists(meta_path):
        with open(meta_path) as fh:
            kind = json.load(fh).get("kind")
    if kind not in ("fep", "mfet"):
        raise ConfigError("metrics: field kind unknown; pass --kind fep|mfet")
    _, _, Z = read_field_csv(args.field)
    if kind == "fep":
        result = {"kind": kind, "p_star": cfg.metrics.p_star, "r_fep": r_fep(Z, cfg.metrics.p_star)}
    else:
        result = {"kind": kind, "u_star": cfg.metrics.u_star, "r_mfet": r_mfet(Z, cfg.metrics.u_star)}
    result["field"] = os.path.abspath(args.field)
    outdir = args.out or os.path.dirname(os.path.abspath(args.field))
    write_json(os.path.join(outdir, f"metrics_{kind}.json"), result)
    print(json.dumps(result))


# ------------------------------------------------------------------------ presets

SIGMA_CURVES = (0.25, 0.5, 0.75, 1.0)
ALPHA_CURVES = (0.5, 1.0, 1.5, 2.0)
SUB_ALPHAS = (0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75)
FIELD_PANELS = {
    "fig3": ("fep", [(a, 0.5) for a in ALPHA_CURVES] + [(1.25, s) for s in SIGMA_CURVES]),
    "fig7": ("mfet", [(a, 0.75) for a in ALPHA_CURVES] + [(1.25, s) for s in SIGMA_CURVES]),
}
CURVE_FIGS = {"fig4": ("fep", "fep_at_star"), "fig5": ("fep", "r_fep"),
              "fig8": ("mfet", "mfet_at_star"), "fig9": ("mfet", "r_mfet")}
HEATMAP_FIGS = {"fig6": ("fep", "fep_at_star"), "fig10": ("mfet", "mfet_at_star")}
HEATMAP_PANELS = [("a", "fix_sigma1", 0.5), ("b", "fix_sigma1", 1.0),
                  ("c", "fix_sigma2", 0.5), ("d", "fix_sigma2", 1.0)]


def _axes(args):
    """Artifact-default parameter axes (not stated in any caption)."""
    from .metrics import dense_alphas
    if args.dense:
        alphas = dense_alphas()
        sigmas = tuple(round(0.05 + 0.01 * i, 10) for i in range(96))
    elif args.quick:
        alphas = (0.5, 1.5)
        sigmas = (0.05, 0.5, 1.0)
    else:
        alphas = SUB_ALPHAS
        sigmas = tuple(round(0.05 * i, 10) for i in range(1, 21))
    return tuple(alphas), sigmas


def _artifact_meta(cfg, alphas, sigmas):
    return {"artifact default": {"grid": [cfg.solver.n_v, cfg.solver.n_w],
                                 "rtol": cfg.solver.rtol,
                                 "drift_scheme": cfg.solver.drift_scheme,
                                 "quadrature": cfg.solver.quadrature,
                                 "jump_convention": cfg.solver.jump_convention,
                                 "alpha_axis": list(alphas), "sigma_axis": list(sigmas)}}


def _reproduce_fields(name, cfg, outdir):
    kind, panels = FIELD_PANELS[name]
    drift = cfg.drift()
    fields = []
    for letter, (a, s) in zip("abcdefgh", panels):
        spec = cfg.noise.__class__(a, s, s)
        if kind == "fep":
            f = solve_fep(drift, spec, cfg.region, cfg.target, cfg.solver)
        else:
            f = solve_mfet(drift, spec, cfg.region, cfg.solver)
        path = os.path.join(outdir, f"{name}{letter}.csv")
        write_field(f, path, {"panel": letter, "preset": name,
                              "artifact default": {"grid": [cfg.solver.n_v, cfg.solver.n_w],
                                                   "rtol": cfg.solver.rtol}})
        fields.append((letter, a, s, path, f))
        print(f"{name}{letter}: alpha={a} sigma={s} max={f.max():.4f} -> {path}")
    vmax = 1.0 if kind == "fep" else max(f.max() for *_, f in fields)
    summary = {"preset": name, "kind": kind, "color_scale": [0.0, vmax],
               "panels": [{"panel": l, "alpha": a, "sigma": s, "file": os.path.basename(p),
                           "max": f.max(), "at_star": float(f.at(*cfg.point))}
                          for l, a, s, p, f in fields]}
    write_json(os.path.join(outdir, f"{name}.json"), summary)
    if cfg.run.plot:
        for letter, a, s, path, _ in fields:
            render_heatmap(path, path[:-4] + ".png", 0.0, vmax,
                           title=f"alpha={a}, sigma={s}", label=kind.upper(), marker=cfg.point)


def _reproduce_curves(name, cfg, outdir, args):
    kind, column = CURVE_FIGS[name]
    alphas, sigmas = _axes(args)
    cache = cfg.sweep.cache or os.path.join(cfg.output_root(), "cache")
    rows_all = []
    panels = {
        "a": SweepSpec(alphas + (2.0,), SIGMA_CURVES, point=cfg.point, quantities=(kind,)),
        "b": SweepSpec(ALPHA_CURVES, sigmas, point=cfg.point, quantities=(kind,)),
    }
    extras = {}
    for letter, spec in panels.items():
        rows = sweep(spec, cfg.drift(), cfg.region, cfg.target, cfg.solver, cfg.metrics,
                     cache_dir=cache, workers=cfg.sweep.workers)
        rows_all += rows
        path = os.path.join(outdir, f"{name}{letter}.csv")
        write_table(rows, path)
        series = {}
        if letter == "a":
            for s in SIGMA_CURVES:
                pts = [(r["alpha"], r[column]) for r in rows if r["sigma1"] == s and r[column] is not None]
                series[f"sigma={s}"] = tuple(zip(*pts)) if pts else ((), ())
            xlabel = "alpha"
        else:
            for a in ALPHA_CURVES:
                pts = [(r["sigma1"], r[column]) for r in rows if r["alpha"] == a and r[column] is not None]
                series[f"alpha={a:g}"] = tuple(zip(*pts)) if pts else ((), ())
                if pts:
                    extras[f"turning_points_alpha_{a:g}"] = turning_points(*zip(*pts))
            xlabel = "sigma"
        print(f"{name}{letter}: {len(rows)} rows -> {path}")
        if cfg.run.plot:
            render_curves(series, path[:-4] + ".png", xlabel, column)
    meta = {"preset": name, "column": column, **_artifact_meta(cfg, alphas, sigmas), **extras}
    write_json(os.path.join(outdir, f"{name}.json"), meta)
    _check_rows(rows_all)


def _reproduce_heatmaps(name, cfg, outdir, args):
    kind, column = HEATMAP_FIGS[name]
    alphas, sigmas = _axes(args)
    cache = cfg.sweep.cache or os.path.join(cfg.output_root(), "cache")
    rows_all = []
    for letter, mode, fixed in HEATMAP_PANELS:
        spec = SweepSpec(alphas + (2.0,), sigmas, mode, fixed, cfg.point, (kind,))
        rows = sweep(spec, cfg.drift(), cfg.region, cfg.target, cfg.solver, cfg.metrics,
                     cache_dir=cache, workers=cfg.sweep.workers)
        rows_all += rows
        write_table(rows, os.path.join(outdir, f"{name}{letter}.csv"))
        # alpha = 2 is its own column in the table, never blended into the alpha axis
        xs, ys, Z = heatmap_matrix(rows, column, "ratio")
        mpath = os.path.join(outdir, f"{name}{letter}_matrix.csv")
        write_matrix(xs, ys, Z, mpath)
        print(f"{name}{letter}: {len(rows)} rows -> {mpath}")
        if cfg.run.plot:
            _plot_matrix(xs, ys, Z, mpath[:-4] + ".png", column, kind,
                         f"{mode.replace('fix_', '')} = {fixed}")
    write_json(os.path.join(outdir, f"{name}.json"),
               {"preset": name, "column": column, **_artifact_meta(cfg, alphas, sigmas)})
    _check_rows(rows_all)


def _plot_matrix(xs, ys, Z, png, label, kind, title):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from .io import atomic_open

    fig, ax = plt.subplots(figsize=(5, 4.2))
    vmax = 1.0 if kind == "fep" else None
    im = ax.pcolormesh(np.arange(xs.size), ys, Z, shading="nearest", cmap="turbo", vmin=0.0, vmax=vmax)
    ax.set_xticks(np.arange(xs.size))
    ax.set_xticklabels([f"{x:g}" for x in xs], fontsize=7)
    fig.colorbar(im, ax=ax, label=label)
    ax.set_xlabel("alpha")
    ax.set_ylabel("r = sigma2 / sigma1")
    ax.set_title(title)
    fig.tight_layout()
    with atomic_open(png, "wb") as fh:
        fig.savefig(fh, format="png", dpi=110)
    plt.close(fig)


def cmd_reproduce(args, cfg):
    outdir = _outdir(args, cfg)
    _prepare(outdir, cfg)
    name = args.figure
    if name in FIELD_PANELS:
        _reproduce_fields(name, cfg, outdir)
    elif name in CURVE_FIGS:
        _reproduce_curves(name, cfg, outdir, args)
    else:
        _reproduce_heatmaps(name, cfg, outdir, args)


COMMANDS = {"params": cmd_params, "fep": lambda a, c: _field_command(a, c, "fep"),
            "mfet": lambda a, c: _field_command(a, c, "mfet"), "mc": cmd_mc,
            "sweep": cmd_sweep, "metrics": cmd_metrics, "reproduce": cmd_reproduce}


def _exit_code(exc):
    if isinstance(exc, INPUT_ERRORS):
        return EXIT_CONFIG
    if isinstance(exc, (OutputError, OSError)):
        return EXIT_IO
    return EXIT_NUMERIC


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    outdir = None
    try:
        cfg = parse_config(args.config, _overrides(args))
        if args.command not in ("params", "metrics"):
            outdir = _outdir(args, cfg)
        COMMANDS[args.command](args, cfg)
    except (LevyEscapeError, OSError) as exc:
        code = _exit_code(exc)
        record = {"error": type(exc).__name__, "message": str(exc), "exit_code": code,
                  "command": args.command}
        for attr in ("residual", "censored_fraction"):
            if getattr(exc, attr, None) is not None:
                record[attr] = getattr(exc, attr)
        print(json.dumps(record), file=sys.stderr)
        if outdir and os.path.isdir(outdir):
            try:
                write_json(os.path.join(outdir, "error.json"), record)
            except OSError:
                pass
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
