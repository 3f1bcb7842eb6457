"""Command-line entry point: ``wblab <command> [options]``.

Exit codes: 0 ok, 1 usage or configuration error, 2 infinite energy,
3 infeasible search.  Floats are written with 17 significant digits.
"""
from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .densities import DropletConfig, GridDensity, IntervalConfig, grid_from_indicator
from .droplets import PowerLawParams, linear_growth_limit, optimal_partition, partition_sweep, split_thresholds
from .energy import el_check, interaction_energy, separation_check
from .kernels import ToyKernel, load_kernel
from .search import AnnealSchedule, InfeasibleError, anneal, cluster_decompose, interaction_range
from .toy1d import brute_force_min, toy_minimal_energy

EXIT_OK, EXIT_USAGE, EXIT_INFINITE, EXIT_INFEASIBLE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- output helpers -------------------------------------------------------------

def _num(x) -> str:
    x = float(x)
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"+inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON with every float at 17 significant digits (infinities as strings)."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in seq):
            return "[" + ", ".join(dumps(v) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in seq) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _csv(header, rows) -> str:
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(_num(v) if isinstance(v, float) else str(v) for v in r))
    return "\n".join(lines) + "\n"


def svg_plot(xs, ys, title: str = "", xlabel: str = "x", ylabel: str = "y", scatter: bool = False,
             width: int = 480, height: int = 320) -> str:
    """Minimal SVG line (or scatter) plot; y grows upward, 40px margins."""
    xs = [float(x) for x in xs]
    ys = [float(y) for y in ys]
    pts = [(x, y) for x, y in zip(xs, ys) if math.isfinite(x) and math.isfinite(y)]
    mg = 40
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>']
    if pts:
        x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
        y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
        x1 = x1 if x1 > x0 else x0 + 1.0
        y1 = y1 if y1 > y0 else y0 + 1.0
        sx = lambda x: mg + (x - x0) / (x1 - x0) * (width - 2 * mg)
        sy = lambda y: height - mg - (y - y0) / (y1 - y0) * (height - 2 * mg)
        out.append(f'<line x1="{mg}" y1="{height - mg}" x2="{width - mg}" y2="{height - mg}" stroke="black"/>')
        out.append(f'<line x1="{mg}" y1="{mg}" x2="{mg}" y2="{height - mg}" stroke="black"/>')
        out.append(f'<text x="{mg}" y="{height - 10}" font-size="10">{x0:.4g}</text>')
        out.append(f'<text x="{width - mg}" y="{height - 10}" font-size="10" text-anchor="end">{x1:.4g}</text>')
        out.append(f'<text x="2" y="{height - mg}" font-size="10">{y0:.4g}</text>')
        out.append(f'<text x="2" y="{mg}" font-size="10">{y1:.4g}</text>')
        if scatter:
            for x, y in pts:
                out.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="2" fill="steelblue"/>')
        else:
            path = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="steelblue"/>')
    out.append(f'<text x="{width / 2}" y="16" font-size="12" text-anchor="middle">{title}</text>')
    out.append(f'<text x="{width / 2}" y="{height - 2}" font-size="10" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="10" y="{height / 2}" font-size="10" transform="rotate(-90 10 {height / 2})">{ylabel}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _write_outputs(out: str | None, **files):
    if not out:
        return
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        if text is not None:
            (d / name.replace("_", ".")).write_text(text)


def _emit(result: dict, out: str | None, **files):
    text = dumps(result) + "\n"
    sys.stdout.write(text)
    _write_outputs(out, result_json=text, **files)


# -- inputs ---------------------------------------------------------------------

def _kernel(args):
    if getattr(args, "toy_w", None) is not None:
        return ToyKernel(float(args.toy_w))
    if not getattr(args, "kernel", None):
        raise UsageError("a kernel is required (--kernel FILE or --toy-w W)")
    return load_kernel(args.kernel)


def load_density(path: str):
    """Grid text file, or JSON: a list of ``[a, b]`` intervals or of ``{center, radius}`` balls."""
    p = Path(path)
    if not p.exists():
        raise UsageError(f"density file not found: {path}")
    text = p.read_text()
    if p.suffix == ".json":
        data = json.loads(text)
        if data and isinstance(data[0], dict):
            return DropletConfig.from_json(text)
        return IntervalConfig(tuple((float(a), float(b)) for a, b in data))
    return GridDensity.from_text(text)


def _workers(args) -> int:
    if args.workers is not None:
        return max(1, int(args.workers))
    return max(1, int(os.environ.get("WBLAB_WORKERS", "1")))


# -- commands -------------------------------------------------------------------

def cmd_energy(args) -> int:
    kernel = _kernel(args)
    dens = load_density(args.density)
    if isinstance(dens, DropletConfig):
        dens = dens.to_intervals() if dens.dim == 1 else grid_from_indicator(dens, args.h)
    res = interaction_energy(kernel, dens, workers=_workers(args))
    _emit(res.as_dict(), args.out)
    return EXIT_OK if res.finite else EXIT_INFINITE


def _params(args) -> PowerLawParams:
    return PowerLawParams(args.n, args.p, args.d, args.a if args.a is not None else math.inf)


def _mass_grid(lo, hi, count, log):
    if not (lo > 0 and hi >= lo and count >= 1):
        raise UsageError("sweep needs 0 < lo <= hi and count >= 1")
    return list(np.geomspace(lo, hi, count) if log else np.linspace(lo, hi, count))


def cmd_droplets(args) -> int:
    params = _params(args)
    th = split_thresholds(params)
    m_star, lim = linear_growth_limit(params)
    head = {"n": params.n, "p": float(params.p), "d": float(params.d), "C_np": params.C,
            "m0": th.m0, "m1": th.m1, "m_star": m_star, "lim_E_over_m": lim}
    if args.sweep:
        ms = _mass_grid(*args.sweep, int(args.count), args.log)
        rows = partition_sweep(params, ms)
        csv = _csv(["m", "k", "total_energy", "energy_per_mass"],
                   [(r["m"], r["k"], r["total_energy"], r["energy_per_mass"]) for r in rows])
        svg = svg_plot([r["m"] for r in rows], [r["energy_per_mass"] for r in rows], "E(m)/m", "m", "E/m")
        head["sweep"] = {"count": len(rows), "last": rows[-1]}
        _emit(head, args.out, trace_csv=csv, plot_svg=svg)
        if not args.out:
            sys.stdout.write(csv)
        return EXIT_OK
    if args.m is None:
        raise UsageError("droplets needs --m or --sweep")
    if not args.m > 0:
        raise UsageError("mass must be positive")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        gm = optimal_partition(params, args.m, args.k_max)
    result = {"m": float(args.m), "k": gm.k, "masses": gm.masses, "energies": gm.energies,
              "total": gm.total_energy, **head, "warnings": [str(w.message) for w in caught]}
    _emit(result, args.out)
    return EXIT_OK


def cmd_toy(args) -> int:
    tm = toy_minimal_energy(args.m, args.w, args.dim, allow_conjecture=args.allow_conjecture)
    result = tm.as_dict()
    if args.brute_force:
        if args.length is None:
            raise UsageError("--brute-force needs --length")
        bf = brute_force_min(args.length, args.h, args.m, args.w, mode=args.mode, seed=args.seed,
                             workers=_workers(args))
        result["brute_force"] = {"energy": bf.energy, "mode": bf.mode, "h": args.h,
                                 "gap": bf.energy - tm.value}
        _emit(result, args.out, density_txt=bf.density.to_text())
        return EXIT_OK
    _emit(result, args.out)
    return EXIT_OK


def cmd_anneal(args) -> int:
    kernel = _kernel(args)
    sched = AnnealSchedule.default(kernel, args.m, args.h, args.dim, seed=args.seed)
    over = {k: v for k, v in (("T0", args.T0), ("cooling", args.cooling), ("epochs", args.epochs),
                              ("moves_per_epoch", args.moves_per_epoch)) if v is not None}
    if over:
        sched = AnnealSchedule(**{**sched.__dict__, **over})
    box = None
    if args.box is not None:
        half = 0.5 * args.box
        box = ((-half,) * args.dim, (half,) * args.dim)
    res = anneal(kernel, args.m, args.h, sched, box=box, dim=args.dim)
    gap = args.gap if args.gap is not None else interaction_range(kernel)
    clusters = cluster_decompose(res.density, gap)
    result = {"m": float(args.m), "h": float(args.h), "dim": args.dim, "seed": sched.seed,
              "energy": res.energy, "moves": res.moves, "accepted": res.accepted,
              "schedule": dict(sched.__dict__), **clusters.summary()}
    xs = [t[0] for t in res.trace]
    svg = svg_plot(xs, [t[2] for t in res.trace], "best energy", "epoch", "E")
    _emit(result, args.out, density_txt=res.density.to_text(), trace_csv=res.trace_csv(), plot_svg=svg)
    return EXIT_OK if math.isfinite(res.energy) else EXIT_INFINITE


def cmd_diagnose(args) -> int:
    kernel = _kernel(args)
    dens = load_density(args.density)
    if isinstance(dens, DropletConfig):
        dens = grid_from_indicator(dens, args.h, pad=interaction_range(kernel))
    w = _workers(args)
    res = interaction_energy(kernel, dens, workers=w)
    if not res.finite:
        _emit({"energy": res.as_dict()}, args.out)
        return EXIT_INFINITE
    el = el_check(kernel, dens, tol=args.tol, workers=w, h=args.h)
    out = {"energy": res.as_dict(), "el": el.as_dict()}
    if all(hasattr(kernel, n) for n in ("a", "w", "W")):
        out["separation"] = separation_check(kernel, dens, tol=args.tol, workers=w, h=args.h,
                                             max_pairs=args.max_pairs).as_dict()
    _emit(out, args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    ms = _mass_grid(args.lo, args.hi, int(args.count), args.log)
    if args.kind == "droplets":
        params = _params(args)
        rows = partition_sweep(params, ms)
        csv = _csv(["m", "k", "total_energy", "energy_per_mass"],
                   [(r["m"], r["k"], r["total_energy"], r["energy_per_mass"]) for r in rows])
        svg = svg_plot(ms, [r["energy_per_mass"] for r in rows], "E(m)/m", "m", "E/m")
    else:
        rows = []
        for m in ms:
            tm = toy_minimal_energy(m, args.w, 1, allow_conjecture=True)
            bf = math.nan
            if args.length is not None:
                try:
                    bf = brute_force_min(args.length, args.h, m, args.w, seed=args.seed, workers=_workers(args)).energy
                except ValueError:
                    pass
            rows.append((float(m), float(args.w), float(tm.value), float(bf), float(bf - tm.value)))
        csv = _csv(["m", "w", "theory", "brute_force", "gap"], rows)
        svg = svg_plot(ms, [r[2] for r in rows], "toy minimum", "m", "E")
    sys.stdout.write(csv)
    _write_outputs(args.out, trace_csv=csv, plot_svg=svg)
    return EXIT_OK


# -- parser ---------------------------------------------------------------------

def _add_common(p):
    p.add_argument("--config", help="INI file whose [wblab] section supplies defaults (flags override)")
    p.add_argument("--out", help="output directory (result.json, trace.csv, density.txt, plot.svg)")
    p.add_argument("--workers", type=int, default=None,
                   help="worker threads (count; default $WBLAB_WORKERS or 1)")


def _add_kernel(p):
    p.add_argument("--kernel", help="kernel config file (INI)")
    p.add_argument("--toy-w", type=float, default=None, help="use the toy kernel with band width W (length)")


def _add_power(p):
    p.add_argument("--n", type=int, default=1, help="dimension (1 or 2)")
    p.add_argument("--p", type=float, default=2.0, help="well exponent (dimensionless, > n)")
    p.add_argument("--d", type=float, default=1.0, help="well depth (energy)")
    p.add_argument("--a", type=float, default=None, help="end of the power-law region (length; default inf)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="wblab", description="Well-barrier interaction energies and droplet minimisers.")
    ap.add_argument("--version", action="version", version=f"wblab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("energy", help="interaction energy of a density")
    _add_common(p)
    _add_kernel(p)
    p.add_argument("--density", required=True, help="grid text file or JSON intervals/balls")
    p.add_argument("--h", type=float, default=0.01, help="grid spacing for ball input (length)")
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("droplets", help="optimal droplet partition for a power-law well")
    _add_common(p)
    _add_power(p)
    p.add_argument("--m", type=float, default=None, help="total mass (volume)")
    p.add_argument("--k-max", type=int, default=None, help="largest droplet count tried (count)")
    p.add_argument("--sweep", type=float, nargs=2, metavar=("LO", "HI"), default=None, help="mass range (volume)")
    p.add_argument("--count", type=int, default=100, help="sweep points (count)")
    p.add_argument("--log", action="store_true", help="log-spaced sweep")
    p.set_defaults(func=cmd_droplets)

    p = sub.add_parser("toy", help="toy-model minimum, optionally against brute force")
    _add_common(p)
    p.add_argument("--m", type=float, required=True, help="mass (length in 1D, area in 2D)")
    p.add_argument("--w", type=float, required=True, help="band width (length)")
    p.add_argument("--dim", type=int, default=1, help="dimension (1 or 2)")
    p.add_argument("--allow-conjecture", action="store_true", help="allow non-integer mass for 0 < w < 1")
    p.add_argument("--brute-force", action="store_true", help="also run the grid brute force")
    p.add_argument("--length", type=float, default=None, help="brute-force domain length (length)")
    p.add_argument("--h", type=float, default=0.5, help="brute-force grid spacing (length)")
    p.add_argument("--mode", choices=["auto", "exhaustive", "anneal"], default="auto", help="brute-force mode")
    p.add_argument("--seed", type=int, default=0, help="annealing seed (integer)")
    p.set_defaults(func=cmd_toy)

    p = sub.add_parser("anneal", help="simulated annealing over {0,1} grid densities")
    _add_common(p)
    _add_kernel(p)
    p.add_argument("--m", type=float, required=True, help="mass (volume)")
    p.add_argument("--h", type=float, default=0.05, help="grid spacing (length)")
    p.add_argument("--dim", type=int, default=1, help="dimension (1 or 2)")
    p.add_argument("--box", type=float, default=None, help="side of the centred search cube (length)")
    p.add_argument("--T0", type=float, default=None, help="initial temperature (energy; default d m h^N)")
    p.add_argument("--cooling", type=float, default=None, help="factor per epoch in (0,1) (default 0.95)")
    p.add_argument("--epochs", type=int, default=None, help="epochs (count; default 200)")
    p.add_argument("--moves-per-epoch", type=int, default=None, help="moves per epoch (count; default 50 per cell)")
    p.add_argument("--seed", type=int, default=0, help="PCG64 seed (integer)")
    p.add_argument("--gap", type=float, default=None, help="cluster gap threshold (length; default a+W)")
    p.set_defaults(func=cmd_anneal)

    p = sub.add_parser("diagnose", help="Euler-Lagrange and separation diagnostics")
    _add_common(p)
    _add_kernel(p)
    p.add_argument("--density", required=True, help="grid text file or JSON intervals/balls")
    p.add_argument("--h", type=float, default=0.01, help="sampling spacing for non-grid input (length)")
    p.add_argument("--tol", type=float, default=1e-9, help="potential tolerance (energy)")
    p.add_argument("--max-pairs", type=int, default=100, help="cap on reported pairs (count)")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("sweep", help="mass sweeps as CSV (droplets or toy)")
    _add_common(p)
    _add_power(p)
    p.add_argument("--kind", choices=["droplets", "toy"], default="droplets", help="what to sweep")
    p.add_argument("--lo", type=float, default=0.1, help="smallest mass (volume)")
    p.add_argument("--hi", type=float, default=10.0, help="largest mass (volume)")
    p.add_argument("--count", type=int, default=100, help="points (count)")
    p.add_argument("--log", action="store_true", help="log-spaced masses")
    p.add_argument("--w", type=float, default=1.5, help="toy band width (length)")
    p.add_argument("--length", type=float, default=None, help="toy brute-force domain (length; omit to skip)")
    p.add_argument("--h", type=float, default=0.5, help="toy brute-force spacing (length)")
    p.add_argument("--seed", type=int, default=0, help="annealing seed (integer)")
    p.set_defaults(func=cmd_sweep)
    return ap


def _apply_config(parser: argparse.ArgumentParser, argv):
    """Second pass: defaults from ``--config`` (section ``[wblab]``), then flags on top."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    if not Path(known.config).exists():
        raise UsageError(f"config file not found: {known.config}")
    cp = configparser.ConfigParser()
    cp.read(known.config)
    if not cp.has_section("wblab"):
        return
    cmd = next((a for a in argv if not a.startswith("-")), None)
    subs = parser._subparsers._group_actions[0].choices  # noqa: SLF001
    if cmd not in subs:
        return
    sp = subs[cmd]
    actions = {a.dest: a for a in sp._actions}  # noqa: SLF001
    defaults = {}
    for key, raw in cp.items("wblab"):
        dest = key.replace("-", "_")
        if dest not in actions:
            raise UsageError(f"unknown config key {key!r} for {cmd}")
        act = actions[dest]
        if isinstance(act, argparse._StoreTrueAction):  # noqa: SLF001
            defaults[dest] = cp.getboolean("wblab", key)
        elif act.nargs is not None and act.nargs not in ("?",):
            defaults[dest] = [act.type(x) if act.type else x for x in raw.split()]
        else:
            defaults[dest] = act.type(raw) if act.type is not None else raw
        act.required = False
    sp.set_defaults(**defaults)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        return int(args.func(args))
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else EXIT_USAGE
    except InfeasibleError as e:
        print(f"wblab: infeasible: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (UsageError, ValueError, TypeError, OSError, KeyError, configparser.Error) as e:
        print(f"wblab: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
