"""Command line front end: ``mpbap gen | solve | game``.

Exit codes: 0 solved (optimal or feasible), 1 input/output error,
2 usage error, 3 infeasible instance, 4 time limit reached without an
incumbent.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import sys
from pathlib import Path

from .game import (CarrierSetup, CoreEmpty, CoalitionInfeasible, DegenerateGame, WINDOW_EXPANSION,
                   CharacteristicFunction, epm, game_from_table, shapley, terminal_savings)
from .model import InstanceError, dumps_instance, generate_instance, read_instance
from .search import CUT_POLICIES, FEASIBLE, INFEASIBLE, OPTIMAL, TIMEOUT, SolveOptions, plan_rows, solve

REPORT_SCHEMA = "mpbap-report/1"
GAME_SCHEMA = "mpbap-game/1"
EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_TIMEOUT = 0, 1, 2, 3, 4
PLAN_FIELDS = ["ship", "port", "berth_type", "berth_index_within_type", "start", "end", "speed_to_next_knots"]

log = logging.getLogger("mpbap")


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _fraction(text: str) -> float:
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError("must lie in (0, 1)")
    return v


def _count(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _carriers(text: str):
    """``A:0.5:1,B:0.25:2`` -> ((name, share, priority), ...)."""
    out = []
    try:
        for part in text.split(","):
            name, share, rank = part.split(":")
            out.append((name.strip(), float(share), int(rank)))
    except ValueError:
        raise argparse.ArgumentTypeError("expected NAME:SHARE:PRIORITY[,...]")
    if not 1 <= len(out) <= 6:
        raise argparse.ArgumentTypeError("between 1 and 6 carriers are supported")
    names = [name for name, _, _ in out]
    # coalition labels in the report are the concatenated names
    if any(len(n) != 1 for n in names) or len(set(names)) != len(names):
        raise argparse.ArgumentTypeError("carrier names must be distinct single characters")
    return tuple(out)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mpbap", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a random instance")
    g.add_argument("--ships", type=_count, required=True)
    g.add_argument("--berths", type=_count, required=True)
    g.add_argument("--ports", type=_count, required=True)
    g.add_argument("--tw", choices=("tight", "loose"), required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--out", type=Path)

    def solver_args(p, optional=False):
        p.add_argument("instance", type=Path, nargs="?" if optional else None)
        p.add_argument("--time-limit", type=_positive, default=300.0)
        p.add_argument("--cuts", choices=CUT_POLICIES, default="root")
        p.add_argument("--final-mip-fraction", type=_fraction, default=0.1)
        p.add_argument("--report", type=Path, help="report file (default: stdout)")

    s = sub.add_parser("solve", help="solve an instance")
    solver_args(s)
    s.add_argument("--plan", type=Path, help="plan CSV for Gantt charts")
    s.add_argument("--timing-out", type=Path, help="wall time and per phase shares (JSON)")

    c = sub.add_parser("game", help="carrier cooperation analysis")
    solver_args(c, optional=True)
    c.add_argument("--carriers", type=_carriers, help="NAME:SHARE:PRIORITY list, default A:0.5:1,B:0.25:2,C:0.25:3")
    c.add_argument("--expansion", type=float, default=WINDOW_EXPANSION)
    c.add_argument("--game-values", type=Path, help="JSON coalition costs, skips the solver")
    return ap


def _write(text: str, path: Path | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def cmd_gen(args) -> int:
    inst = generate_instance(args.ships, args.berths, args.ports, args.tw, seed=args.seed)
    out = args.out or Path(f"{inst.descriptor.replace('/', '_')}-s{args.seed}.json")
    out.write_text(dumps_instance(inst))
    print(inst.descriptor)
    return EXIT_OK


def _options(args) -> SolveOptions:
    return SolveOptions(cut_policy=args.cuts, time_limit=args.time_limit,
                        final_mip_fraction=args.final_mip_fraction)


def cmd_solve(args) -> int:
    inst = read_instance(args.instance)
    res = solve(inst, _options(args))
    rep = res.report
    doc = {"schema": REPORT_SCHEMA, "instance": inst.descriptor or args.instance.name,
           "options": {"cuts": args.cuts, "time_limit": args.time_limit,
                       "final_mip_fraction": args.final_mip_fraction},
           "result": rep.as_dict()}
    if res.certificate:
        doc["certificate"] = res.certificate
    _write(_dumps(doc), args.report)
    if args.plan is not None:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=PLAN_FIELDS, lineterminator="\n")
        w.writeheader()
        w.writerows(plan_rows(res))
        args.plan.write_text(buf.getvalue())
    if args.timing_out is not None:
        args.timing_out.write_text(_dumps({"wall_time": rep.wall_time, "time_pct": rep.time_shares()}))
    log.info("status %s, Z %s, LB %s, gap %.2f%%", rep.status, rep.z, rep.lb, rep.gap)
    return {OPTIMAL: EXIT_OK, FEASIBLE: EXIT_OK, INFEASIBLE: EXIT_INFEASIBLE, TIMEOUT: EXIT_TIMEOUT}[rep.status]


def _label(S) -> str:
    return "".join(sorted(S))


def _allocation_doc(alloc) -> dict:
    if isinstance(alloc, CoreEmpty):
        return {"core_empty": True, "detail": alloc.detail}
    d = {"cost": alloc.costs, "relative_savings": alloc.relative_savings,
         "savings_share": alloc.savings_share, "stable": alloc.stable}
    if alloc.z is not None:
        d["z"] = alloc.z
    return d


def cmd_game(args) -> int:
    doc = {"schema": GAME_SCHEMA}
    if args.game_values is not None:
        game = game_from_table(json.loads(args.game_values.read_text()))
        terminals = None
    elif args.instance is None:
        raise ValueError("game needs an instance file or --game-values")
    else:
        inst = read_instance(args.instance)
        if args.expansion:
            inst = inst.with_windows_scaled(1.0 + args.expansion)
        setup = (CarrierSetup.default(inst, args.carriers) if args.carriers
                 else CarrierSetup.default(inst))
        cf = CharacteristicFunction(inst, setup, _options(args))
        values, errors = {}, {}
        for S in _coalitions(setup.players):
            try:
                values[S] = cf(S)
            except CoalitionInfeasible as exc:
                errors[_label(S)] = str(exc)
        doc["carriers"] = setup.carriers
        doc["priorities"] = setup.priorities
        if errors:
            doc["infeasible"] = errors
            doc["values"] = {_label(S): v for S, v in values.items()}
            _write(_dumps(doc), args.report)
            return EXIT_INFEASIBLE
        game = game_from_table({_label(S): v for S, v in values.items()})
        terminals = terminal_savings(cf)
    doc["values"] = {_label(S): game.v(S) for S in game.coalitions()}
    doc["superadditive"] = game.superadditive()
    doc["shapley"] = _allocation_doc(shapley(game))
    try:
        doc["epm"] = _allocation_doc(epm(game))
    except DegenerateGame as exc:
        doc["epm"] = {"error": str(exc)}
    if terminals is not None:
        doc["terminals"] = [{"port": t.port, "standalone": t.standalone, "grand": t.grand,
                             "savings_pct": t.savings_pct} for t in terminals]
    _write(_dumps(doc), args.report)
    return EXIT_OK


def _coalitions(players):
    for r in range(1, len(players) + 1):
        for S in itertools.combinations(players, r):
            yield frozenset(S)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(message)s")
    handler = {"gen": cmd_gen, "solve": cmd_solve, "game": cmd_game}[args.command]
    try:
        return handler(args)
    except (InstanceError, OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
