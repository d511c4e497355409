"""Command-line front end: run scenarios, validate configs, list bundles.

``run`` evaluates every requested analytic model, optionally runs the
Monte-Carlo verification, and writes a plot-ready CSV grid plus a metrics
JSON.  Outputs are deterministic for a fixed config and seed.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import MODEL_BUILDERS
from .geometry import beam_width_at_rx, build_radial_tables
from .montecarlo import compare, empirical_pdf, sample_channel
from .scenarios import BUNDLED_SCENARIOS, SchemaError, Scenario, load_scenario
from .turbulence import GammaGamma, LogNormal

_GRID_POINTS = 512


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def build_models(sc: Scenario):
    """Instantiate every requested ChannelPdf, with per-model timings."""
    out = {}
    for tag in sc.models:
        builder = MODEL_BUILDERS[tag]
        kwargs = {}
        if tag in ("theorem2", "theorem3", "theorem5", "theorem6"):
            kwargs["n_terms"] = sc.settings.n_prime
        if tag in ("theorem4", "theorem7"):
            kwargs["k_terms"] = sc.settings.k_terms
        if tag in ("theorem6", "theorem7"):
            kwargs["eps"] = sc.settings.series_epsilon
            if sc.settings.m_terms is not None:
                kwargs["m_terms"] = int(sc.settings.m_terms)
            if sc.settings.h_m is not None:
                kwargs["h_m"] = float(sc.settings.h_m)
        t0 = time.perf_counter()
        model = builder(sc.geometry, sc.stability, sc.turbulence, **kwargs)
        out[tag] = (model, time.perf_counter() - t0)
    return out


def run_scenario(sc: Scenario, out_dir: str | None = None, quiet: bool = False):
    """Evaluate a scenario end to end; returns the metrics dict.

    Writes <name>_grid.csv and <name>_metrics.json into the output
    directory (CLI --out and the UAVFSO_OUT_DIR environment variable
    override the config value, in that order of precedence).
    """
    out_base = Path(out_dir or os.environ.get("UAVFSO_OUT_DIR") or sc.output_dir)
    out_base.mkdir(parents=True, exist_ok=True)

    models = build_models(sc)
    metrics = {}
    emp = None
    sim_info = None

    if sc.plan is not None:
        t0 = time.perf_counter()
        w_z = beam_width_at_rx(sc.geometry)
        tables = build_radial_tables(sc.geometry, w_z,
                                     include_hpa=sc.plan.hpa_path == "airy")
        samples = sample_channel(sc.plan, sc.geometry, sc.stability, sc.turbulence,
                                 tables=tables)
        emp = empirical_pdf(samples, bins=sc.plan.bins, bin_scale=sc.plan.bin_scale)
        sim_info = {
            "n_samples": sc.plan.n_samples,
            "seed": sc.plan.seed,
            "hpa_path": sc.plan.hpa_path,
            "p_zero_hat": emp.p_zero_hat,
            "runtime_ms": 1e3 * (time.perf_counter() - t0),
        }

    for tag, (model, build_s) in models.items():
        t0 = time.perf_counter()
        if emp is not None and emp.bin_edges.size:
            cmp_ = compare(model, emp)
            tv, pz_err = cmp_.tv, cmp_.p_zero_err
        else:
            tv, pz_err = None, None
        metrics[tag] = {
            "tv": tv,
            "p_zero": model.p_zero,
            "p_zero_err": pz_err,
            "runtime_ms": 1e3 * (build_s + time.perf_counter() - t0),
            "validity_flags": list(model.validity_flags),
        }

    csv_path = out_base / f"{sc.name}_grid.csv"
    _write_grid_csv(csv_path, sc, models, emp)
    json_path = out_base / f"{sc.name}_metrics.json"
    payload = {"scenario": sc.name, "models": metrics}
    if sim_info is not None:
        payload["simulation"] = sim_info
    json_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")

    if not quiet:
        for tag, m in metrics.items():
            tv_txt = f"tv={m['tv']:.4f}" if m["tv"] is not None else "tv=n/a"
            flags = f" flags={','.join(m['validity_flags'])}" if m["validity_flags"] else ""
            print(f"{sc.name}/{tag}: {tv_txt} p_zero={m['p_zero']:.4e} "
                  f"runtime={m['runtime_ms']:.1f}ms{flags}")
        print(f"wrote {csv_path} and {json_path}")
    return payload


def _write_grid_csv(path: Path, sc: Scenario, models, emp):
    tags = list(models)
    lines = []
    for tag, (model, _) in models.items():
        lines.append(f"# p_zero: {tag} = {_fmt(model.p_zero)}")
    if emp is not None:
        lines.append(f"# p_zero_hat: mc = {_fmt(emp.p_zero_hat)}")
    if emp is not None and emp.bin_edges.size:
        h = emp.centers
        widths = np.diff(emp.bin_edges)
        counts = np.rint(emp.densities * emp.n * widths).astype(int)
        header = ["h"] + [f"{t}_pdf" for t in tags] + ["mc_pdf", "mc_count"]
        cols = [h] + [models[t][0].pdf(h) for t in tags] + [emp.densities, counts]
    else:
        h_max = max(m.h_max for m, _ in models.values())
        h = np.exp(np.linspace(math.log(h_max) - 12 * math.log(10.0), math.log(h_max),
                               _GRID_POINTS))
        header = ["h"] + [f"{t}_pdf" for t in tags]
        cols = [h] + [models[t][0].pdf(h) for t in tags]
    lines.append(",".join(header))
    for i in range(len(h)):
        row = []
        for c in cols:
            v = c[i]
            row.append(str(int(v)) if isinstance(v, (int, np.integer)) else _fmt(v))
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="uavfso",
        description="Analytic channel models and Monte-Carlo verification for "
                    "UAV optical links with pointing errors")
    parser.add_argument("--version", action="version", version=f"uavfso {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="evaluate a scenario and write CSV/JSON outputs")
    p_run.add_argument("--config", required=True,
                       help="scenario TOML path or bundled scenario name")
    p_run.add_argument("--samples", type=int, default=None,
                       help="override the Monte-Carlo sample count")
    p_run.add_argument("--seed", type=int, default=None, help="override the RNG seed")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--quiet", action="store_true")

    p_val = sub.add_parser("validate", help="parse and check a scenario without running")
    p_val.add_argument("--config", required=True)

    sub.add_parser("list", help="list bundled scenarios")

    args = parser.parse_args(argv)

    if args.command == "list":
        for name in BUNDLED_SCENARIOS:
            print(name)
        return 0

    try:
        sc = load_scenario(args.config)
    except SchemaError as exc:
        for problem in exc.problems:
            print(f"error: {problem}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if args.command == "validate":
        print(f"OK: scenario {sc.name!r} "
              f"({'Gamma-Gamma' if isinstance(sc.turbulence, GammaGamma) else 'log-normal'} "
              f"turbulence, models: {', '.join(sc.models)})")
        return 0

    if args.samples is not None or args.seed is not None:
        if sc.plan is None:
            print("error: --samples/--seed given but the scenario has no "
                  "[simulation] section", file=sys.stderr)
            return 2
        plan = sc.plan
        if args.samples is not None:
            plan = replace(plan, n_samples=args.samples)
        if args.seed is not None:
            plan = replace(plan, seed=args.seed)
        sc = replace(sc, plan=plan)

    try:
        run_scenario(sc, out_dir=args.out, quiet=args.quiet)
    except Exception as exc:  # surface a clean error, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
