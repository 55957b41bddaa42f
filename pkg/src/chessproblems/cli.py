"""The ``chessproblems`` command line.

Verbs: ``compose``, ``solve``, ``check``, ``score``, ``perft`` and
``archive {list,verify,reindex}``. Results go to stdout and diagnostics to
stderr. The exit code is 0 on success, 1 when the answer is negative (no
mate, conventions failed, records that do not verify) and 2 on bad input.
"""
import argparse
import contextlib
import json
import logging
import signal
import sys
from dataclasses import asdict
from datetime import datetime, timezone

from .aesthetics import ScoreWeights, score, select_main_line
from .archive import Archive, ArchiveError, render_local_time
from .board import (
    STARTING_FEN,
    FenError,
    IllegalMoveError,
    SanError,
    GameState,
    apply_move,
    classify,
    move_to_san,
    parse_fen,
    parse_move,
    perft,
    perft_divide,
    split_movetext,
)
from .composer import ComposerConfig, PieceSetSpec, run, verify_record
from .config import SettingsError, read_settings
from .conventions import ConventionConfig, embedded_problems, evaluate
from .solver import MAX_MATE_MOVES, MateIn, MateSolver, SearchAborted
from .solver import NoMateError, SearchBudget

__all__ = ["build_parser", "execute", "main"]

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_USAGE = 2


class UsageError(ValueError):
    """Bad flags or flag values discovered after parsing."""


# # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # #
# Parser


def _toggle(parser, name, dest, help):
    group = parser.add_mutually_exclusive_group()
    group.add_argument(
        "--no-" + name, dest=dest, action="store_true", help=help
    )
    group.add_argument(
        "--allow-" + name,
        dest=dest,
        action="store_false",
        help="Lift the requirement above.",
    )
    parser.set_defaults(**{dest: True})


def _add_conventions(parser):
    _toggle(parser, "cooks", "no_cooks", "Require a unique key.")
    _toggle(parser, "check-key", "no_check_key", "Require a non-checking key.")
    _toggle(
        parser, "capture-key", "no_capture_key", "Require a non-capturing key."
    )


def _add_budget(parser):
    parser.add_argument(
        "--solve-nodes",
        type=int,
        default=None,
        help="Node limit of each solver call.",
    )
    parser.add_argument(
        "--solve-seconds",
        type=float,
        default=None,
        help="Time limit in seconds of each solver call.",
    )
    parser.add_argument(
        "--tt-entries",
        type=int,
        default=None,
        help="Transposition table size (0 disables it).",
    )


def _add_settings(parser):
    parser.add_argument(
        "--settings",
        default=None,
        help="A key = value settings file (weights, sampling, substrate).",
    )


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument(
        "-v", "--verbose", action="store_true", help="Log debug output."
    )
    verbosity.add_argument(
        "-q", "--quiet", action="store_true", help="Log warnings only."
    )

    parser = argparse.ArgumentParser(
        prog="chessproblems",
        description="Compose, solve and check directmate chess problems.",
    )
    verbs = parser.add_subparsers(dest="verb", metavar="VERB")
    verbs.required = True

    p = verbs.add_parser(
        "compose", parents=[common], help="Run the composer."
    )
    p.add_argument("--white", required=True, help="White men, e.g. KNNNN.")
    p.add_argument("--black", required=True, help="Black men, e.g. KQ.")
    p.add_argument(
        "--goals",
        default="mate3,mate4,mate5",
        help="Comma-separated stipulations (default: %(default)s).",
    )
    _add_conventions(p)
    p.add_argument("--min-aesthetics", type=float, default=None)
    p.add_argument(
        "--en-prise-filter",
        action="store_true",
        help="Reject White men that stand en prise.",
    )
    p.add_argument("--max-candidates", type=int, default=1000)
    p.add_argument(
        "--max-seconds", type=float, default=3600.0, help="Wall time budget."
    )
    _add_budget(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--games", default=None, help="Games file, one per line.")
    p.add_argument("--images", default=None, help="Directory of images.")
    p.add_argument("--location", default="", help="Location label.")
    p.add_argument(
        "--archive",
        default=None,
        help="Archive directory (default: $CHESSPROBLEMS_ARCHIVE).",
    )
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--symmetric-dedup", action="store_true")
    p.add_argument(
        "--fixed-timestamp",
        default=None,
        help="Stamp every record with this UTC time (YYYY-MM-DDTHH:MM:SSZ).",
    )
    _add_settings(p)

    p = verbs.add_parser("solve", parents=[common], help="Solve a position.")
    p.add_argument("--fen", required=True)
    p.add_argument("--max-mate", type=int, default=5)
    p.add_argument(
        "--forced-line",
        default=None,
        help="Moves to play first, SAN or UCI, e.g. 'Ncd3' or 'c1d3'.",
    )
    p.add_argument(
        "--extend",
        type=int,
        default=None,
        help="Total move bound counted from the start of a forced line.",
    )
    p.add_argument(
        "--tree", choices=["text", "json", "none"], default="none"
    )
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.add_argument(
        "--embedded",
        action="store_true",
        help="List the sub-problems along the main line.",
    )
    _add_budget(p)

    p = verbs.add_parser(
        "check", parents=[common], help="Check a composition."
    )
    p.add_argument("--fen", required=True)
    p.add_argument("--mate", type=int, required=True, help="Stipulated N.")
    _add_conventions(p)
    p.add_argument("--format", choices=["text", "json"], default="text")
    _add_budget(p)

    p = verbs.add_parser("score", parents=[common], help="Score a problem.")
    p.add_argument("--fen", required=True)
    p.add_argument("--max-mate", type=int, default=5)
    p.add_argument("--format", choices=["text", "json"], default="text")
    _add_settings(p)
    _add_budget(p)

    p = verbs.add_parser(
        "perft", parents=[common], help="Count move-tree leaves."
    )
    p.add_argument("--fen", default=STARTING_FEN)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--divide", action="store_true")

    p = verbs.add_parser(
        "archive", parents=[common], help="Inspect the archive."
    )
    p.add_argument("action", choices=["list", "verify", "reindex"])
    p.add_argument("--archive", default=None)
    p.add_argument("--symmetric-dedup", action="store_true")
    _add_settings(p)
    _add_budget(p)
    return parser


# # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # #
# Helpers


def _budget(args):
    kwargs = {}
    if args.solve_nodes is not None:
        kwargs["max_nodes"] = args.solve_nodes
    if args.solve_seconds is not None:
        kwargs["max_seconds"] = args.solve_seconds
    if args.tt_entries is not None:
        kwargs["transposition_entries"] = args.tt_entries
    return SearchBudget(**kwargs) if kwargs else None


def _conventions(args):
    return ConventionConfig(
        require_no_cooks=args.no_cooks,
        require_no_check_in_key=args.no_check_key,
        require_no_capture_in_key=args.no_capture_key,
    )


def _settings(args):
    return read_settings(args.settings) if args.settings else {}


def _print_json(obj, out):
    out.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _check_bound(n, flag):
    if not 1 <= n <= MAX_MATE_MOVES:
        msg = "{} must be between 1 and {}, got {}.".format(
            flag, MAX_MATE_MOVES, n
        )
        raise UsageError(msg)


# # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # #
# Verbs


def _solve(args, out):
    p = parse_fen(args.fen)
    solver = MateSolver(_budget(args))
    played = []
    white_moves = 0
    if args.forced_line:
        for token in split_movetext(args.forced_line):
            move = parse_move(p, token)
            played.append(move_to_san(p, move))
            white_moves += p.turn
            p = apply_move(p, move)
    if not p.turn and classify(p) is GameState.CHECKMATE:
        # The forced line itself ends in mate.
        out.write("mate in {}\n".format(white_moves))
        return EXIT_OK
    total = args.extend if args.extend is not None else args.max_mate
    flag = "--extend" if args.extend is not None else "--max-mate"
    bound = total - white_moves
    _check_bound(bound, flag + " (after the forced line)")

    result = solver.solve(p, bound)
    report = {
        "fen": p.fen(),
        "forced_line": played,
        "outcome": result.outcome.value,
        "moves": result.moves + white_moves if result.is_mate else None,
        "nodes": result.nodes_searched,
    }
    if not result.is_mate:
        if args.format == "json":
            _print_json(report, out)
        else:
            out.write("{}\n".format(result))
        return EXIT_NEGATIVE

    tree = None
    keys = ()
    if p.turn:
        keys = solver.key_moves(p, result.moves)
        report["keys"] = [move_to_san(p, m) for m in keys]
    if args.tree != "none" or args.embedded:
        tree = solver.build_tree(p, result.moves)
    if args.format == "json":
        if tree is not None and args.tree != "none":
            report["tree"] = tree.to_dict()
        if args.embedded:
            report["embedded"] = [
                asdict(e) for e in embedded_problems(tree)
            ]
        _print_json(report, out)
        return EXIT_OK

    out.write("mate in {}\n".format(report["moves"]))
    if played:
        out.write("line: {}\n".format(" ".join(played)))
    if keys:
        label = "key" if len(keys) == 1 else "keys"
        out.write("{}: {}\n".format(label, ", ".join(report["keys"])))
    if args.tree == "text":
        out.write(tree.to_text())
    elif args.tree == "json":
        _print_json(tree.to_dict(), out)
    if args.embedded:
        for e in embedded_problems(tree):
            out.write("{}\n".format(e))
    return EXIT_OK


def _check(args, out):
    _check_bound(args.mate, "--mate")
    p = parse_fen(args.fen)
    report = evaluate(p, MateIn(args.mate), _conventions(args), _budget(args))
    if args.format == "json":
        _print_json(report.to_dict(), out)
    else:
        for name, enabled, ok in report.checks():
            if report.indeterminate:
                verdict = "UNKNOWN"
            elif not enabled:
                verdict = "SKIP"
            else:
                verdict = "PASS" if ok else "FAIL"
            out.write("{:<20} {}\n".format(name, verdict))
        if report.keys:
            out.write("keys: {}\n".format(", ".join(report.key_sans)))
    return EXIT_OK if report.passed else EXIT_NEGATIVE


def _score(args, out):
    _check_bound(args.max_mate, "--max-mate")
    p = parse_fen(args.fen)
    weights = ScoreWeights.from_settings(_settings(args))
    solver = MateSolver(_budget(args))
    try:
        tree = solver.build_tree(p, args.max_mate)
    except NoMateError as e:
        logger.error("%s", e)
        return EXIT_NEGATIVE
    line = select_main_line(tree, weights)
    total, breakdown = score(tree, weights, line)
    sans = [v.san for v in line]
    if args.format == "json":
        _print_json(
            {
                "score": total,
                "breakdown": breakdown.to_dict(),
                "contributions": breakdown.contributions(weights),
                "main_line": sans,
            },
            out,
        )
        return EXIT_OK
    out.write("score: {:.3f}\n".format(total))
    out.write("main line: {}\n".format(" ".join(sans)))
    for name, value in breakdown.contributions(weights).items():
        out.write("  {:<18} {:+.3f}\n".format(name, value))
    return EXIT_OK


def _perft(args, out):
    if args.depth < 0 or (args.divide and args.depth < 1):
        lowest = 1 if args.divide else 0
        raise UsageError("--depth must be at least {}.".format(lowest))
    p = parse_fen(args.fen)
    if args.divide:
        total = 0
        for move, count in perft_divide(p, args.depth):
            out.write("{}: {}\n".format(move.uci(), count))
            total += count
        out.write("total: {}\n".format(total))
    else:
        out.write("{}\n".format(perft(p, args.depth)))
    return EXIT_OK


def _fixed_clock(text):
    try:
        dt = datetime.strptime(text, "%Y-%m-%dT%H:%M:%SZ")
    except ValueError:
        msg = "--fixed-timestamp must look like 2017-08-23T04:51:51Z."
        raise UsageError(msg)
    dt = dt.replace(tzinfo=timezone.utc)
    return lambda: dt


def _raise_interrupt(signum, frame):
    raise KeyboardInterrupt


def _compose(args, out, err):
    spec = PieceSetSpec.parse(args.white, args.black)
    try:
        goals = [MateIn.parse(g) for g in args.goals.split(",") if g.strip()]
    except ValueError as e:
        raise UsageError(str(e))
    if args.workers < 1:
        raise UsageError("--workers must be at least 1.")
    clock = None
    if args.fixed_timestamp:
        clock = _fixed_clock(args.fixed_timestamp)
    extra = {}
    if _budget(args) is not None:
        extra["per_solve"] = _budget(args)
    cfg = ComposerConfig.from_settings(
        spec,
        _settings(args),
        goals=tuple(goals),
        conventions=_conventions(args),
        min_aesthetics=args.min_aesthetics,
        en_prise_filter=args.en_prise_filter,
        max_candidates=args.max_candidates,
        max_wall_seconds=args.max_seconds,
        seed=args.seed,
        games_path=args.games,
        images_path=args.images,
        location_label=args.location,
        symmetric_dedup=args.symmetric_dedup,
        **extra,
    )
    archive = Archive(args.archive)
    previous = signal.signal(signal.SIGTERM, _raise_interrupt)
    try:
        stats = run(cfg, archive, workers=args.workers, clock=clock)
    except ArchiveError as e:
        err.write("archive error: {}\n".format(e))
        if e.stats is not None:
            err.write("{}\n".format(e.stats))
        return EXIT_NEGATIVE
    finally:
        signal.signal(signal.SIGTERM, previous)
    out.write("{}\n".format(stats))
    return EXIT_OK


def _archive(args, out):
    archive = Archive(args.archive)
    if args.action == "reindex":
        n = archive.rebuild_index(args.symmetric_dedup)
        out.write("indexed {} records\n".format(n))
        return EXIT_OK
    records = archive.records()
    if args.action == "list":
        for r in records:
            out.write(
                "{:>6}  {}  {}  {:.3f}  {}  {}\n".format(
                    r.candidate_index,
                    render_local_time(r.utc_timestamp),
                    r.stipulation.tag(),
                    r.aesthetics_score,
                    r.fen,
                    r.location_label,
                ).rstrip()
                + "\n"
            )
        return EXIT_OK
    weights = ScoreWeights.from_settings(_settings(args))
    failures = 0
    for r in records:
        problems = verify_record(r, weights, _budget(args))
        if problems:
            failures += 1
            out.write("FAIL {}: {}\n".format(r.fen, "; ".join(problems)))
        else:
            out.write("OK   {}\n".format(r.fen))
    out.write("{} of {} records verified\n".format(
        len(records) - failures, len(records)
    ))
    return EXIT_NEGATIVE if failures else EXIT_OK


# # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # #
# Entry points


def _setup_logging(args, err):
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(
        stream=err,
        level=level,
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )


def execute(argv, stdout=None, stderr=None):
    """Run the command line `argv` (without the program name) and return
    the exit code.
    """
    out = stdout or sys.stdout
    err = stderr or sys.stderr
    parser = build_parser()
    try:
        with contextlib.redirect_stderr(err), contextlib.redirect_stdout(out):
            args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    _setup_logging(args, err)
    try:
        if args.verb == "compose":
            return _compose(args, out, err)
        if args.verb == "solve":
            return _solve(args, out)
        if args.verb == "check":
            return _check(args, out)
        if args.verb == "score":
            return _score(args, out)
        if args.verb == "perft":
            return _perft(args, out)
        return _archive(args, out)
    except (FenError, SanError, IllegalMoveError) as e:
        err.write("chessproblems: invalid input: {}\n".format(e))
        return EXIT_USAGE
    except (UsageError, SettingsError, ValueError) as e:
        err.write("chessproblems: {}\n".format(e))
        return EXIT_USAGE
    except SearchAborted as e:
        err.write("chessproblems: search budget exhausted: {}\n".format(e))
        return EXIT_NEGATIVE
    except ArchiveError as e:
        err.write("chessproblems: archive error: {}\n".format(e))
        return EXIT_NEGATIVE
    except KeyboardInterrupt:
        err.write("chessproblems: interrupted\n")
        return EXIT_NEGATIVE


def main():
    sys.exit(execute(sys.argv[1:]))
