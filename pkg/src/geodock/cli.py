"""Command-line front end: ``geodock <command> [options]``.

Exit status is 0 on success, 1 for usage errors, 2 for bad input data and
3 when a plan cannot meet its time budget.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import analysis, autotuner, io, screening
from .geometry import PocketGrid
from .kernel import BASELINE, ConfigError, KnobConfig, match_probes_shape
from .molecule import MoleculeError, with_positions
from .perfmodel import DataFeatures, predict

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INFEASIBLE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_pair(text):
    lo, _, hi = text.partition(",")
    return int(lo), int(hi or lo)


def _number_list(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _default_workers():
    raw = os.environ.get("GEODOCK_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"GEODOCK_WORKERS must be an integer, got {raw!r}") from None


def _add_knobs(p):
    g = p.add_argument_group("knobs")
    g.add_argument("--hp-step", type=int, default=BASELINE.high_precision_step)
    g.add_argument("--lp-step", type=int, default=None, help="defaults to the high-precision step")
    g.add_argument("--threshold", type=float, default=BASELINE.threshold)
    g.add_argument("--reps", type=int, default=BASELINE.repetitions)
    g.add_argument("--refine", action="store_true")


def _add_workers(p):
    p.add_argument("--workers", type=int, default=None, help="default: $GEODOCK_WORKERS or 1")


def _add_features(p, with_size=True):
    p.add_argument("--pocket-points", type=float, required=True)
    p.add_argument("--avg-atoms", type=float, required=True)
    p.add_argument("--avg-rotamers", type=float, required=True)
    if with_size:
        p.add_argument("--db-size", type=int, required=True)


def _knobs(args) -> KnobConfig:
    lp = args.hp_step if args.lp_step is None else args.lp_step
    try:
        return KnobConfig(args.hp_step, lp, args.threshold, args.reps, args.refine)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None


def _workers(args):
    w = _default_workers() if args.workers is None else args.workers
    if w < 1:
        raise UsageError("--workers must be >= 1")
    return w


def _features(args, size=None):
    return DataFeatures(args.pocket_points, args.avg_atoms, args.avg_rotamers,
                        args.db_size if size is None else size)


def _read(path):
    return Path(path).read_text(encoding="utf-8")


def _emit(text, path):
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def cmd_generate(args):
    spec = io.DatasetSpec(args.count, _int_pair(args.atoms), _int_pair(args.rotamers), args.seed,
                          args.pocket_points, args.pocket_id, args.prefix)
    try:
        spec.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    ligands, pocket = io.generate_synthetic(spec)
    Path(args.ligands).write_text(io.render_ligands(ligands), encoding="utf-8")
    Path(args.pocket).write_text(io.render_pocket(pocket), encoding="utf-8")
    print(f"wrote {len(ligands)} ligands to {args.ligands} and {pocket.n_points} points to {args.pocket}")


def cmd_dock(args):
    pocket = io.parse_pocket(_read(args.pocket))
    config = _knobs(args)
    found = False
    for lig in io.parse_ligands(_read(args.ligands)):
        if args.id is not None and lig.id != args.id:
            continue
        found = True
        res = match_probes_shape(lig, pocket, config=config)
        print(f"ligand={res.ligand_id} score={res.score!r} evaluations={res.evaluations} "
              f"feasibility_checks={res.feasibility_checks} wall_time={res.wall_time:.6f}")
        if args.pose_out:
            lig_out = with_positions(lig, res.final_pose)
            Path(args.pose_out).write_text(io.render_ligand(lig_out), encoding="utf-8")
        if args.id is None:
            break
    if not found:
        raise io.ParseError(f"ligand {args.id!r} not found" if args.id else "no ligand records")


def cmd_screen(args):
    pocket = io.parse_pocket(_read(args.pocket))
    index = PocketGrid(pocket.points) if args.grid else None
    with open(args.ligands, encoding="utf-8") as fh:
        report = screening.screen(pocket, io.parse_ligands(fh, errors="yield"), _knobs(args),
                                  _workers(args), index)
    if args.csv:
        Path(args.csv).write_text(screening.render_report_csv(report), encoding="utf-8")
    _emit(screening.render_summary(report), args.summary)


def cmd_analyze(args):
    pocket = io.parse_pocket(_read(args.pocket))
    ligands = list(io.parse_ligands(_read(args.ligands)))
    records = analysis.analyze_dataset(ligands, pocket)
    if args.fragments:
        Path(args.fragments).write_text(analysis.fragments_csv(records), encoding="utf-8")
    if args.tiles:
        stats = [analysis.PeakStats(r.delta_overlap, [], r.best_peak_width) for r in records]
        rows = analysis.tile_hit_probability(stats, [int(t) for t in _number_list(args.tiles)])
        Path(args.tiles_out or "tiles.csv").write_text(analysis.tile_csv(rows), encoding="utf-8")
    _emit(analysis.binned_csv(records, args.bins), args.out)


def cmd_profile(args):
    design = autotuner.parse_design_space(_read(args.design))
    pockets = [io.parse_pocket(_read(p)) for p in args.pockets]
    batches = [list(io.parse_ligands(_read(f))) for f in args.ligands]
    training = [(p, b) for p in pockets for b in batches]
    base = KnobConfig()
    if base not in design:
        design = [base] + design

    def progress(cfg, _):
        print(f"measured {cfg}", file=sys.stderr)

    kb = autotuner.build_knowledge_base(design, training, base, _workers(args), args.grid,
                                        progress if args.verbose else None,
                                        min_seconds=args.min_seconds)
    _emit(autotuner.render_knowledge_base(kb), args.out)


def _kb(args):
    try:
        return autotuner.parse_knowledge_base(_read(args.kb))
    except autotuner.PlanningError as exc:
        raise io.ParseError(str(exc)) from None


def cmd_predict(args):
    kb = _kb(args)
    config = _knobs(args)
    prof = next((p for p in kb if p.config.behaviour_key() == config.behaviour_key()), None)
    if prof is None:
        raise UsageError(f"{config} is not in the knowledge base")
    t = predict(prof.perf, _features(args), _workers(args))
    print(f"predicted_time={t!r} mean_degradation={prof.mean_degradation!r}")


def cmd_plan(args):
    plan = autotuner.select_config(_kb(args), _features(args), args.budget_seconds, _workers(args))
    c = plan.chosen
    print(f"hp_step={c.high_precision_step} lp_step={c.low_precision_step} threshold={c.threshold!r} "
          f"repetitions={c.repetitions} refinement={str(c.enable_refinement).lower()}")
    print(f"predicted_time={plan.predicted_time!r} expected_completion={plan.expected_completion!r} "
          f"expected_degradation={plan.expected_degradation!r}")
    return EXIT_OK if plan.feasible else EXIT_INFEASIBLE


def cmd_sweep(args):
    kb = _kb(args)
    workers = _workers(args)
    if args.sizes:
        if args.budget_seconds is None:
            raise UsageError("--sizes needs --budget-seconds")
        feats = _features(args, size=1)
        rows = autotuner.scenario_sweep(kb, feats, workers, sizes=[int(v) for v in _number_list(args.sizes)],
                                        budget=args.budget_seconds)
    elif args.budgets:
        if args.db_size is None:
            raise UsageError("--budgets needs --db-size")
        rows = autotuner.scenario_sweep(kb, _features(args), workers, budgets=_number_list(args.budgets))
    else:
        raise UsageError("give --sizes or --budgets")
    _emit(autotuner.sweep_csv(rows), args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="geodock", description="Tunable geometric docking and virtual screening.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write a synthetic ligand database and pocket")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--atoms", default="28,153", help="min,max atoms")
    p.add_argument("--rotamers", default="2,53", help="min,max rotamers")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pocket-points", type=int, default=120)
    p.add_argument("--pocket-id", default="pocket")
    p.add_argument("--prefix", default="L")
    p.add_argument("--ligands", required=True, help="output ligand file")
    p.add_argument("--pocket", required=True, help="output pocket file")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("dock", help="dock one ligand and print the result")
    p.add_argument("--pocket", required=True)
    p.add_argument("--ligands", required=True)
    p.add_argument("--id", help="ligand id (default: first record)")
    p.add_argument("--pose-out", help="write the docked ligand here")
    _add_knobs(p)
    p.set_defaults(func=cmd_dock)

    p = sub.add_parser("screen", help="dock a whole database")
    p.add_argument("--pocket", required=True)
    p.add_argument("--ligands", required=True)
    p.add_argument("--csv", help="per-ligand CSV output")
    p.add_argument("--summary", help="key=value summary output (default stdout)")
    p.add_argument("--grid", action="store_true", help="use the nearest-point grid index")
    _add_knobs(p)
    _add_workers(p)
    p.set_defaults(func=cmd_screen)

    p = sub.add_parser("analyze", help="rotation-profile peak statistics")
    p.add_argument("--pocket", required=True)
    p.add_argument("--ligands", required=True)
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--fragments", help="per-fragment CSV output")
    p.add_argument("--tiles", help="comma-separated tile sizes for the hit probability table")
    p.add_argument("--tiles-out", help="tile table output (default tiles.csv)")
    p.add_argument("--out", help="binned CSV output (default stdout)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("profile", help="build a knowledge base over a design-space file")
    p.add_argument("--design", required=True)
    p.add_argument("--pockets", nargs="+", required=True)
    p.add_argument("--ligands", nargs="+", required=True, help="ligand batches, crossed with the pockets")
    p.add_argument("--grid", action="store_true")
    p.add_argument("--min-seconds", type=float, default=0.0,
                   help="repeat short screens until this many seconds are spent, keep the median")
    p.add_argument("--out")
    p.add_argument("-v", "--verbose", action="store_true")
    _add_workers(p)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("predict", help="time-to-solution of one configuration")
    p.add_argument("--kb", required=True)
    _add_features(p)
    _add_knobs(p)
    _add_workers(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("plan", help="pick the configuration for a time budget")
    p.add_argument("--kb", required=True)
    p.add_argument("--budget-seconds", type=float, required=True)
    _add_features(p)
    _add_workers(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("sweep", help="plans over database sizes or budgets")
    p.add_argument("--kb", required=True)
    p.add_argument("--sizes", help="comma-separated database sizes (needs --budget-seconds)")
    p.add_argument("--budgets", help="comma-separated budgets in seconds (needs --db-size)")
    p.add_argument("--budget-seconds", type=float)
    p.add_argument("--pocket-points", type=float, required=True)
    p.add_argument("--avg-atoms", type=float, required=True)
    p.add_argument("--avg-rotamers", type=float, required=True)
    p.add_argument("--db-size", type=int)
    p.add_argument("--out")
    _add_workers(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        code = args.func(args)
    except UsageError as exc:
        print(f"geodock: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (io.ParseError, MoleculeError, OSError, ValueError) as exc:
        print(f"geodock: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
