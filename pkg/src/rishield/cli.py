"""Command line entry point: ``rishield {simulate,optimize,pattern,sweep}``.

Exit codes: 0 success, 2 usage or validation error, 3 runtime failure.
Every run writes ``manifest.json`` next to its outputs; outputs carry no
timestamps, so re-running a manifest reproduces them byte for byte.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from ._accel import backend_name
from .channel import channels_from_scenario
from .metrics import link_report, sum_rate
from .optimizer import (
    SolverOptions, brute_force_1bit, format_report, mrt_precoder, Precoder, shield_objective,
    smse, solve_shield,
)
from .pattern import array_factor_cut, find_lobes, full_pattern, lobe_table, pattern_csv, pattern_pgm
from .raytracer import GridSpec, RisMode, grid_stats, trace_coverage
from .ris import BitMask, PatternKind, RisConfig, make_pattern, quantize_1bit, read_mask, v_from_bits
from .scenario import ScenarioError, build_default_apartment, load_scenario

log = logging.getLogger("rishield")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RUNTIME = 3

BUILTIN_SCENARIOS = {"apartment": build_default_apartment}


class UsageError(Exception):
    """Bad flags or inputs; maps to exit code 2."""


def _setup_logging():
    level = os.environ.get("RISHIELD_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _resolve_scenario(name):
    if name in BUILTIN_SCENARIOS:
        return BUILTIN_SCENARIOS[name](), None
    path = Path(name)
    if not path.is_file():
        raise UsageError(f"scenario not found: {name}")
    try:
        return load_scenario(path), path
    except ScenarioError as exc:
        raise UsageError(f"invalid scenario {name}: {exc}") from exc


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class _Run:
    """Collects outputs and writes them plus the manifest into out_dir."""

    def __init__(self, args, subcommand):
        self.out = Path(args.out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.args = args
        self.subcommand = subcommand
        self.outputs = []
        self.inputs = {}

    def add_input(self, path):
        if path is not None:
            self.inputs[str(path)] = _sha256(path)

    def write_text(self, name, text):
        (self.out / name).write_text(text)
        self.outputs.append(name)

    def write_bytes(self, name, data):
        (self.out / name).write_bytes(data)
        self.outputs.append(name)

    def finish(self):
        opts = {k: v for k, v in sorted(vars(self.args).items()) if k not in ("func",)}
        manifest = {
            "subcommand": self.subcommand,
            "options": opts,
            "seed": self.args.seed,
            "inputs": self.inputs,
            "outputs": sorted(self.outputs),
            "version": __version__,
            "backend": backend_name(),
        }
        (self.out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")


# -- simulate --------------------------------------------------------------

def _ris_modes(args):
    if args.ris == "off":
        return [("off", RisMode.off())]
    if args.ris == "absorb-all":
        return [("absorb-all", RisMode.absorb_all(args.absorption_db))]
    if args.ris == "both":
        return [("off", RisMode.off()), ("absorb-all", RisMode.absorb_all(args.absorption_db))]
    if args.ris_mask is None:
        raise UsageError("--ris mask needs --ris-mask FILE")
    return [("mask", RisMode.from_mask(_load_mask(args.ris_mask), args.absorption_db))]


def _load_mask(path):
    try:
        return read_mask(path)
    except FileNotFoundError:
        raise UsageError(f"mask file not found: {path}") from None
    except ValueError as exc:
        raise UsageError(f"bad mask file {path}: {exc}") from None


def cmd_simulate(args):
    scenario, path = _resolve_scenario(args.scenario)
    run = _Run(args, "simulate")
    run.add_input(path)
    if args.ris_mask:
        run.add_input(args.ris_mask)
    modes = _ris_modes(args)
    if args.ris == "mask" and scenario.ris is not None:
        if run_mask_shape(args) != (scenario.ris.rows, scenario.ris.cols):
            raise UsageError("mask shape does not match the scenario's RIS grid")
    grid = GridSpec.covering(scenario, args.cell)
    rows = ["mode,region,n_cells,n_no_signal,median_dbm,max_dbm,min_dbm"]
    regions = [(r.name, r.region) for r in scenario.rooms] or [("all", scenario.bounding_box())]
    for label, mode in modes:
        cov = trace_coverage(scenario, mode, grid, max_order=args.max_order, coherent=args.coherent)
        run.write_text(f"coverage_{label}.csv", cov.to_csv())
        run.write_bytes(f"coverage_{label}.pgm", cov.to_pgm(args.floor_dbm, args.ceil_dbm))
        for name, region in regions:
            st = grid_stats(cov, region)
            rows.append(f"{label},{name},{st['n_cells']},{st['n_no_signal']},"
                        f"{st['median_dbm']:.6f},{st['max_dbm']:.6f},{st['min_dbm']:.6f}")
    run.write_text("stats.csv", "\n".join(rows) + "\n")
    print("\n".join(rows))
    run.finish()
    return EXIT_OK


def run_mask_shape(args):
    return _load_mask(args.ris_mask).shape


# -- optimize --------------------------------------------------------------

def _protected(scenario, spec):
    if spec is None:
        idx = scenario.protected_indices()
    else:
        keys = [k.strip() for k in spec.split(",") if k.strip()]
        try:
            idx = sorted({scenario.receiver_index(k) for k in keys})
        except KeyError as exc:
            raise UsageError(str(exc)) from None
    if not idx:
        raise UsageError("protected set is empty")
    return idx


def _solver_options(args, seed):
    try:
        return SolverOptions(
            restarts=args.restarts, max_iters=args.max_iters, step_init=args.step_init, tol=args.tol,
            seed=seed, include_binary_seeds=not args.no_binary_seeds, fixed_precoder=args.fixed_precoder,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def optimize_instance(scenario, protected, P, opts, brute_force=False):
    """One optimize run; returns (solution, channels, before, after, extra)."""
    ris = scenario.ris
    ch = channels_from_scenario(scenario, opts.seed)
    names = [rx.name or f"rx{u}" for u, rx in enumerate(scenario.receivers)]
    zones = [rx.zone.value for rx in scenario.receivers]
    sol = solve_shield(ch, protected, P, opts, rows=ris.rows, cols=ris.cols)
    base_cfg = v_from_bits(make_pattern(PatternKind.FULL_REFLECT, ris.rows, ris.cols))
    base_W = mrt_precoder(ch, base_cfg, range(ch.n_users), P)
    base_prec = Precoder(base_W, P)
    before = link_report(base_cfg, base_prec, ch, names, zones)
    after = link_report(sol.cfg, sol.precoder, ch, names, zones)
    extra = {
        "smse_before": f"{smse(base_cfg, base_prec, ch, protected):.12e}",
        "smse_after": f"{smse(sol.cfg, sol.precoder, ch, protected):.12e}",
        "sum_rate_before": f"{before.sum_rate:.12e}",
        "sum_rate_after": f"{after.sum_rate:.12e}",
        "protected": ",".join(names[u] for u in protected),
        "seed": str(opts.seed),
    }
    if brute_force:
        mask, prec, fb = brute_force_1bit(ch, protected, P, rows=ris.rows, cols=ris.cols,
                                          max_iters=opts.max_iters, step_init=opts.step_init, tol=opts.tol)
        extra["oracle_objective"] = f"{fb:.12e}"
        extra["oracle_gap"] = f"{sol.objective - fb:.12e}"
        extra["oracle_mask"] = mask.to_text().strip().replace("\n", "/")
    return sol, ch, before, after, extra


def _power_mw(args, scenario):
    dbm = scenario.tx.tx_power_dbm if args.power_dbm is None else args.power_dbm
    return 10.0 ** (dbm / 10.0)


def _require_ris(scenario):
    if scenario.ris is None:
        raise UsageError("scenario has no RIS panel")


def cmd_optimize(args):
    scenario, path = _resolve_scenario(args.scenario)
    _require_ris(scenario)
    protected = _protected(scenario, args.protected)
    opts = _solver_options(args, args.seed)
    if args.brute_force and scenario.ris.n_elements > 12:
        raise UsageError("--brute-force needs N <= 12 RIS elements")
    run = _Run(args, "optimize")
    run.add_input(path)
    sol, ch, before, after, extra = optimize_instance(scenario, protected, _power_mw(args, scenario), opts,
                                                      args.brute_force)
    report = format_report(sol, extra)
    run.write_text("report.txt", report)
    run.write_text("mask.txt", quantize_1bit(sol.cfg).to_text())
    run.write_text("links_before.csv", before.to_csv())
    run.write_text("links_after.csv", after.to_csv())
    run.write_text("trace.csv", "round,objective\n" + "".join(f"{i},{f:.12e}\n" for i, f in enumerate(sol.trace)))
    sys.stdout.write(report)
    run.finish()
    return EXIT_OK


# -- pattern -----------------------------------------------------------------

def cmd_pattern(args):
    run = _Run(args, "pattern")
    if args.mask is not None:
        mask = _load_mask(args.mask)
        run.add_input(args.mask)
        if mask.shape != (args.rows, args.cols):
            raise UsageError(f"mask is {mask.shape[0]}x{mask.shape[1]}, expected {args.rows}x{args.cols}")
        label = "mask"
    else:
        try:
            mask = make_pattern(args.preset, args.rows, args.cols)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        label = args.preset
    cfg = v_from_bits(mask, args.reflect_phase)
    try:
        cut = array_factor_cut(cfg, args.rows, args.cols, args.axis, args.resolution)
        u, v, mag = full_pattern(cfg, args.rows, args.cols, args.full_resolution)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    lobes = find_lobes(cut, args.threshold_db)
    run.write_text("mask.txt", mask.to_text())
    run.write_text("cut.csv", cut.to_csv())
    run.write_text("lobes.csv", lobe_table(lobes))
    run.write_text("full_pattern.csv", pattern_csv(u, v, mag))
    run.write_bytes("full_pattern.pgm", pattern_pgm(mag))
    print(f"# {label} {args.rows}x{args.cols}, {len(lobes)} lobe(s) above {args.threshold_db} dB")
    sys.stdout.write(lobe_table(lobes))
    run.finish()
    return EXIT_OK


# -- sweep -------------------------------------------------------------------

def _parse_seeds(text):
    try:
        if ":" in text:
            a, b = text.split(":", 1)
            seeds = list(range(int(a), int(b)))
        else:
            seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"bad seed range {text!r}") from None
    if not seeds:
        raise UsageError("empty seed range")
    return seeds


def _sweep_one(job):
    scenario_name, protected, P, opts = job
    scenario, _ = _resolve_scenario(scenario_name)
    sol, ch, before, after, extra = optimize_instance(scenario, protected, P, opts)
    return opts.seed, sol.objective, float(extra["smse_after"]), after.sum_rate, before.sum_rate


def cmd_sweep(args):
    scenario, path = _resolve_scenario(args.scenario)
    _require_ris(scenario)
    seeds = _parse_seeds(args.seeds)
    protected = _protected(scenario, args.protected)
    P = _power_mw(args, scenario)
    jobs = [(args.scenario, protected, P, _solver_options(args, s)) for s in seeds]
    run = _Run(args, "sweep")
    run.add_input(path)
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]
    lines = ["seed,objective,smse,sum_rate,sum_rate_before"]
    for seed, obj, sm, sr, srb in results:
        lines.append(f"{seed},{obj:.12e},{sm:.12e},{sr:.12e},{srb:.12e}")
    arr = np.array([r[1:] for r in results])
    mean = arr.mean(axis=0)
    lines.append("mean," + ",".join(f"{x:.12e}" for x in mean))
    run.write_text("sweep.csv", "\n".join(lines) + "\n")
    summary = ["stat,objective,sum_rate"]
    for name, fn in (("mean", np.mean), ("min", np.min), ("max", np.max)):
        summary.append(f"{name},{fn(arr[:, 0]):.12e},{fn(arr[:, 2]):.12e}")
    run.write_text("sweep_summary.csv", "\n".join(summary) + "\n")
    print("\n".join(summary))
    run.finish()
    return EXIT_OK


# -- replay ------------------------------------------------------------------

def argv_from_manifest(manifest, out_dir=None):
    """Command line that re-runs a manifest, optionally into another directory."""
    opts = dict(manifest["options"])
    if out_dir is not None:
        opts["out_dir"] = str(out_dir)
    if opts.get("mask") is not None:
        opts.pop("preset", None)
    argv = [manifest["subcommand"]]
    for key, val in opts.items():
        if key == "command" or val is None or val is False:
            continue
        flag = "--" + key.replace("_", "-")
        argv += [flag] if val is True else [flag, str(val)]
    return argv


def replay(manifest_path, out_dir=None):
    manifest = json.loads(Path(manifest_path).read_text())
    return main(argv_from_manifest(manifest, out_dir))


# -- parser ------------------------------------------------------------------

def _solver_flags(p):
    p.add_argument("--scenario", default="apartment", help="scenario file or built-in name (apartment)")
    p.add_argument("--protected", help="comma-separated receiver names or indices (default: protected zone)")
    p.add_argument("--power-dbm", type=float, help="transmit power budget P (default: the tx power)")
    p.add_argument("--restarts", type=int, default=32)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--step-init", type=float, default=0.1)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--no-binary-seeds", action="store_true")
    p.add_argument("--fixed-precoder", action="store_true",
                   help="extension: MRT toward served users, optimize the RIS only")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--out-dir", default="out")

    parser = argparse.ArgumentParser(prog="rishield", description=__doc__.splitlines()[0], parents=[common])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="coverage maps with and without the RIS shield")
    p.add_argument("--scenario", default="apartment")
    p.add_argument("--ris", choices=["off", "absorb-all", "both", "mask"], default="both")
    p.add_argument("--ris-mask", help="BitMask text file for --ris mask")
    p.add_argument("--absorption-db", type=float, default=30.0)
    p.add_argument("--max-order", type=int, default=2)
    p.add_argument("--cell", type=float, default=0.1)
    p.add_argument("--floor-dbm", type=float, default=-100.0)
    p.add_argument("--ceil-dbm", type=float, default=0.0)
    p.add_argument("--coherent", action="store_true", help="phasor summation (experimental)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("optimize", parents=[common], help="solve the shielding problem")
    _solver_flags(p)
    p.add_argument("--brute-force", action="store_true", help="also run the exhaustive 1-bit oracle")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("pattern", parents=[common], help="radiation diagram of a 1-bit configuration")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--preset", choices=[k.value for k in PatternKind], default="full-reflect")
    src.add_argument("--mask", help="BitMask text file")
    p.add_argument("--rows", type=int, default=10)
    p.add_argument("--cols", type=int, default=10)
    p.add_argument("--resolution", type=int, default=1024)
    p.add_argument("--full-resolution", type=int, default=201)
    p.add_argument("--axis", choices=["row", "col"], default="col")
    p.add_argument("--threshold-db", type=float, default=-10.0)
    p.add_argument("--reflect-phase", type=float, default=0.0)
    p.set_defaults(func=cmd_pattern)

    p = sub.add_parser("sweep", parents=[common], help="optimize over a range of channel seeds")
    _solver_flags(p)
    p.add_argument("--seeds", default="0:10", help="start:stop or comma list")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.jobs < 1:
        print("rishield: error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"rishield: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - top-level boundary
        log.debug("runtime failure", exc_info=True)
        print(f"rishield: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
