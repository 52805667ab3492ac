"""``sramflip`` command line.

Every subcommand writes into ``--out`` and leaves a ``manifest.json`` there;
rerunning the recorded command with ``--config <out>/manifest.json``
regenerates the same files. Offsets on the command line are in mV.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical
failure, 4 too many censored experiments.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, config, dc, linear, noise, predictors, report
from .errors import CensoringError, ConfigError, DomainError, ModelError, NumericalError, PreconditionError
from .variability import sweep, worst_case_line

log = logging.getLogger("sramflip")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_CENSORED = 0, 2, 3, 4


def _mv(s: str) -> float:
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {s!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError("offsets must be finite")
    return v


def _mv_list(s: str) -> list[float]:
    vals = [_mv(t) for t in s.replace(",", " ").split()]
    if not vals:
        raise argparse.ArgumentTypeError("empty dv list")
    return vals


def _u64(s: str) -> int:
    v = int(s, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _pos_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML config or a previous manifest.json")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: ./out)")
    common.add_argument("--seed", type=_u64, help="master seed, overrides [noise].seed")
    common.add_argument("--threads", type=_pos_int, default=1, help="worker threads/processes")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="sramflip", description="SRAM retention-failure simulator", parents=[common])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def cell(sp):
        sp.add_argument("--dv1", type=_mv, default=None, help="offset of inverter 1 [mV]")
        sp.add_argument("--dv2", type=_mv, default=None, help="offset of inverter 2 [mV]")

    def svg(sp):
        sp.add_argument("--svg", dest="svg", action="store_true", default=True)
        sp.add_argument("--no-svg", dest="svg", action="store_false")

    def noise_flags(sp):
        sp.add_argument("--n", type=_pos_int, help="experiments per point")
        sp.add_argument("--tmax", type=float, help="time horizon per experiment [s]")
        sp.add_argument("--fmax", type=float, help="noise bandwidth [Hz]")

    sp = sub.add_parser("butterfly", parents=[common], help="VTCs, crossings and SNM of one cell")
    cell(sp)
    svg(sp)
    sp.add_argument("--grid-step", type=float, default=1e-3, help="VTC sampling step [V]")

    sp = sub.add_parser("sweep", parents=[common], help="variability map over (dV1, dV2)")
    sp.add_argument("--range-min", type=_mv, help="[mV]")
    sp.add_argument("--range-max", type=_mv, help="[mV]")
    sp.add_argument("--step", type=_mv, help="[mV]")
    svg(sp)

    sp = sub.add_parser("equilibria", parents=[common], help="DC solutions and the linearized model")
    cell(sp)

    sp = sub.add_parser("transient", parents=[common], help="one noisy retention experiment")
    cell(sp)
    noise_flags(sp)
    sp.add_argument("--experiment", type=int, default=0, help="experiment index within the seed's streams")
    sp.add_argument("--decimation", type=_pos_int, help="record every k-th step")
    sp.add_argument("--after-flip", type=float, default=0.0, help="keep integrating this long after the flip [s]")

    sp = sub.add_parser("mttf", parents=[common], help="Monte-Carlo MTTF on the worst-case line")
    sp.add_argument("--dv", type=_mv_list, required=True, help="offsets dV1 = -dV2 [mV], e.g. '55,56,57'")
    noise_flags(sp)

    sp = sub.add_parser("predict", parents=[common], help="Kish and Nobile MTTF predictions")
    cell(sp)
    sp.add_argument("--dv", type=_mv_list, help="worst-case offsets [mV] instead of --dv1/--dv2")

    sp = sub.add_parser("compare", parents=[common], help="simulated vs predicted MTTF")
    sp.add_argument("--dv", type=_mv_list, required=True, help="offsets dV1 = -dV2 [mV]")
    sp.add_argument("--mttf-csv", type=Path, help="reuse an mttf.csv instead of simulating")
    noise_flags(sp)
    svg(sp)
    return p


def apply_overrides(cfg: config.RunConfig, args) -> config.RunConfig:
    """Fold the command-line flags into the loaded configuration."""
    latch = cfg.latch
    if getattr(args, "dv1", None) is not None or getattr(args, "dv2", None) is not None:
        dv1 = latch.dv1 if args.dv1 is None else args.dv1 / 1e3
        dv2 = latch.dv2 if args.dv2 is None else args.dv2 / 1e3
        latch = latch.with_variability(dv1, dv2)
    kw = {k: getattr(args, k) / 1e3 for k in ("range_min", "range_max", "step") if getattr(args, k, None) is not None}
    sweep_spec = replace(cfg.sweep, **kw)
    kw = {}
    if args.seed is not None:
        kw["seed"] = args.seed
    for flag, key in (("n", "n_experiments"), ("tmax", "t_max"), ("fmax", "fmax"), ("decimation", "decimation")):
        v = getattr(args, flag, None)
        if v is not None:
            kw[key] = v
    return config.RunConfig(latch, sweep_spec, replace(cfg.noise, **kw))


def cmd_butterfly(cfg, args):
    latch = cfg.latch
    b = dc.butterfly(latch, args.grid_step)
    res = squares = None
    if b.functional:
        res = dc.snm(b)
        squares = dc.snm_squares(b, res)
        log.info("SNM %.3f mV (%s lobe)", res.snm * 1e3, res.side)
    else:
        log.info("%d crossing(s): defective cell", len(b.crossings))
    return report.write_butterfly(args.out, b, res, squares, svg=args.svg), {}


def cmd_sweep(cfg, args):
    grid = sweep(cfg.latch, cfg.sweep, workers=args.threads)
    wcl = worst_case_line(grid)
    paths = report.write_sweep(args.out, grid, svg=args.svg)
    paths.append(
        report.write_json(
            args.out / "sweep_summary.json",
            {"last_working_V": wcl.last_working, "first_defective_V": wcl.first_defective, "boundary_V": wcl.boundary},
        )
    )
    return paths, {}


def cmd_equilibria(cfg, args):
    latch = cfg.latch
    eq = dc.equilibria(latch)
    dX, dY = dc.distances(eq)
    model = linear.linearize(latch, eq)
    doc = {"equilibria": eq.as_dict(), "dX_V": dX, "dY_V": dY, "linearized": model.report()}
    return [report.write_json(args.out / "equilibria.json", doc)], {}


def cmd_transient(cfg, args):
    latch = cfg.latch
    ncfg = replace(cfg.noise, record_trajectory=True)
    res = noise.transient(latch, ncfg, args.experiment, run_after_flip=args.after_flip)
    paths = [report.write_trajectory(args.out / "trajectory.csv", res.trajectory)]
    doc = {
        "experiment": res.index,
        "stream_seed": res.seed,
        "ttf_s": res.ttf,
        "t_XM_s": res.t_xm,
        "t_YM_s": res.t_ym,
        "final_state_V": list(res.final_state),
    }
    paths.append(report.write_json(args.out / "transient.json", doc))
    return paths, {"master": ncfg.seed, "streams": {str(res.index): res.seed}}


def _run_mttf(cfg, args, dvs):
    ncfg = cfg.noise
    rows, paths, seeds = [], [], {"master": ncfg.seed, "streams": {}}
    for dv_mv in dvs:
        latch = cfg.latch.worst_case(dv_mv / 1e3)
        tag = f"{dv_mv:g}mV"
        try:
            est, batch = noise.mttf_estimate(latch, ncfg, threads=args.threads)
        except CensoringError as exc:
            report.write_ttf_batch(args.out / f"ttf_{tag}.csv", exc.batch)
            raise
        paths.append(report.write_ttf_batch(args.out / f"ttf_{tag}.csv", batch))
        seeds["streams"][tag] = batch.seeds
        rows.append((dv_mv / 1e3, est, ncfg.seed))
    return rows, paths, seeds


def cmd_mttf(cfg, args):
    rows, paths, seeds = _run_mttf(cfg, args, args.dv)
    paths.insert(0, report.write_mttf(args.out / "mttf.csv", rows))
    return paths, seeds


def _bundle_doc(b: predictors.PredictorBundle):
    return b.as_dict()


def cmd_predict(cfg, args):
    if args.dv:
        cells = {f"{dv:g}": cfg.latch.worst_case(dv / 1e3) for dv in args.dv}
        doc = {k: _bundle_doc(predictors.predict(lt)[0]) for k, lt in cells.items()}
        doc = {"worst_case_dv_mV": doc}
    else:
        doc = _bundle_doc(predictors.predict(cfg.latch)[0])
    return [report.write_json(args.out / "predict.json", doc)], {}


def cmd_compare(cfg, args):
    paths, seeds = [], {}
    if args.mttf_csv is not None:
        sim = report.read_mttf(args.mttf_csv)
    else:
        rows, paths, seeds = _run_mttf(cfg, args, args.dv)
        paths.insert(0, report.write_mttf(args.out / "mttf.csv", rows))
        sim = report.read_mttf(paths[0])
    preds = {dv: predictors.predict(cfg.latch.worst_case(dv / 1e3))[0] for dv in args.dv}
    joined = report.join_compare(sim, preds)
    paths += report.write_compare(args.out, joined, svg=args.svg)
    return paths, seeds


COMMANDS = {
    "butterfly": cmd_butterfly,
    "sweep": cmd_sweep,
    "equilibria": cmd_equilibria,
    "transient": cmd_transient,
    "mttf": cmd_mttf,
    "predict": cmd_predict,
    "compare": cmd_compare,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    started = datetime.now(timezone.utc)
    try:
        cfg = apply_overrides(config.load(args.config), args)
        args.out.mkdir(parents=True, exist_ok=True)
        outputs, seeds = COMMANDS[args.command](cfg, args)
        report.write_manifest(args.out, ["sramflip"] + argv, cfg.snapshot(), seeds, outputs, started)
    except (ConfigError, DomainError) as exc:
        print(f"sramflip: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CensoringError as exc:
        print(f"sramflip: {exc}", file=sys.stderr)
        return EXIT_CENSORED
    except (NumericalError, PreconditionError, ModelError, ArithmeticError) as exc:
        print(f"sramflip: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
