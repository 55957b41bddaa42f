"""Composition conventions: the stipulation check, no cooks, no check in the
key and no capture in the key.

A problem is *cooked* when more than one first move forces mate within the
stipulated number of moves. A key is *quiet* when it neither checks nor
captures. The stipulation is read exactly: a mate in 4 does not satisfy
"mate in 5".
"""
import logging
from dataclasses import dataclass, field

import chess

from .board import annotate
from .solver import MateIn, MateSolver, SearchAborted, TerminalPositionError

__all__ = [
    "ConventionConfig",
    "ConventionReport",
    "EmbeddedProblem",
    "evaluate",
    "embedded_problems",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConventionConfig:
    """Which conventions a composition has to satisfy. All on by default."""

    require_no_cooks: bool = True
    require_no_check_in_key: bool = True
    require_no_capture_in_key: bool = True


@dataclass(frozen=True)
class ConventionReport:
    """The verdict of `evaluate`.

    `keys` are all first moves that mate within the stipulation; the
    ``key_*`` flags describe the key when it is unique and are False
    otherwise. `indeterminate` is set when the search budget ran out, in
    which case the report does not pass.
    """

    stipulation: MateIn
    stipulation_holds: bool
    dtm: object
    keys: tuple
    key_sans: tuple
    cooked: bool
    key_gives_check: bool
    key_captures: bool
    passed: bool
    config: ConventionConfig = field(default_factory=ConventionConfig)
    indeterminate: bool = False

    @property
    def key_is_quiet(self):
        return (
            len(self.keys) == 1
            and not self.key_gives_check
            and not self.key_captures
        )

    def checks(self):
        """Return ``(name, enabled, ok)`` triples, one per convention, with
        the stipulation itself first.
        """
        cfg = self.config
        return [
            ("stipulation", True, self.stipulation_holds),
            ("no-cooks", cfg.require_no_cooks, not self.cooked),
            (
                "no-check-in-key",
                cfg.require_no_check_in_key,
                not self.key_gives_check,
            ),
            (
                "no-capture-in-key",
                cfg.require_no_capture_in_key,
                not self.key_captures,
            ),
        ]

    def to_dict(self):
        return {
            "stipulation": self.stipulation.n,
            "stipulation_holds": self.stipulation_holds,
            "dtm": self.dtm,
            "keys": [m.uci() for m in self.keys],
            "key_sans": list(self.key_sans),
            "cooked": self.cooked,
            "key_gives_check": self.key_gives_check,
            "key_captures": self.key_captures,
            "passed": self.passed,
            "indeterminate": self.indeterminate,
            "config": {
                "require_no_cooks": self.config.require_no_cooks,
                "require_no_check_in_key": self.config.require_no_check_in_key,
                "require_no_capture_in_key": (
                    self.config.require_no_capture_in_key
                ),
            },
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            stipulation=MateIn(d["stipulation"]),
            stipulation_holds=d["stipulation_holds"],
            dtm=d["dtm"],
            keys=tuple(chess.Move.from_uci(u) for u in d["keys"]),
            key_sans=tuple(d["key_sans"]),
            cooked=d["cooked"],
            key_gives_check=d["key_gives_check"],
            key_captures=d["key_captures"],
            passed=d["passed"],
            config=ConventionConfig(**d["config"]),
            indeterminate=d.get("indeterminate", False),
        )


def _passes(cfg, holds, cooked, check, capture):
    return (
        holds
        and not (cfg.require_no_cooks and cooked)
        and not (cfg.require_no_check_in_key and check)
        and not (cfg.require_no_capture_in_key and capture)
    )


def evaluate(p, stipulation, cfg=None, budget=None, solver=None):
    """Check the composition `p` against `stipulation` and the conventions
    of `cfg`, and return a `ConventionReport`.

    A `MateSolver` may be passed in to reuse its transposition table;
    otherwise one is created with `budget`.
    """
    if not isinstance(stipulation, MateIn):
        stipulation = MateIn(stipulation)
    cfg = cfg or ConventionConfig()
    if p.turn != chess.WHITE:
        raise ValueError("A composition has White to move.")
    solver = solver or MateSolver(budget)
    n = stipulation.n

    def _indeterminate():
        return ConventionReport(
            stipulation, False, None, (), (), False, False, False, False,
            config=cfg, indeterminate=True,
        )

    result = solver.solve(p, n)
    if result.is_aborted:
        logger.debug("Budget ran out evaluating %s", p.fen())
        return _indeterminate()
    if not result.is_mate:
        return ConventionReport(
            stipulation, False, None, (), (), False, False, False, False,
            config=cfg,
        )
    try:
        keys = solver.key_moves(p, n)
    except SearchAborted:
        logger.debug("Budget ran out enumerating keys of %s", p.fen())
        return _indeterminate()
    except TerminalPositionError:
        keys = ()
    holds = result.moves == n
    cooked = len(keys) > 1
    check = capture = False
    if len(keys) == 1:
        flags = annotate(p, keys[0])
        check, capture = flags.check, flags.capture
    board = p.board()
    sans = tuple(board.san(m) for m in keys)
    return ConventionReport(
        stipulation=stipulation,
        stipulation_holds=holds,
        dtm=result.moves,
        keys=keys,
        key_sans=sans,
        cooked=cooked,
        key_gives_check=check,
        key_captures=capture,
        passed=_passes(cfg, holds, cooked, check, capture),
        config=cfg,
    )


@dataclass(frozen=True)
class EmbeddedProblem:
    """A White-to-move position on the main line, read as a problem of its
    own.
    """

    ply: int
    fen: str
    dtm: int
    key_sans: tuple
    quiet_key: bool
    cooked: bool

    def __str__(self):
        quiet = "quiet" if self.quiet_key else "not quiet"
        keys = ", ".join(self.key_sans)
        return "ply {}: mate in {}, key {} ({}{})".format(
            self.ply, self.dtm, keys, quiet, ", cooked" if self.cooked else ""
        )


def embedded_problems(tree, line=None):
    """List the sub-problems along `line` (default: the principal line of
    `tree`), one per White-to-move node, from the tree alone.

    The keys of such a node are exactly its optimal moves, because no move
    mates faster than its DTM.
    """
    line = tree.principal_line() if line is None else line
    problems = []
    node = tree.root
    for ply in range(len(line) + 1):
        if node.white_to_move and not node.is_leaf:
            board = chess.Board(node.fen)
            moves = [v.move for v in node.variations]
            quiet = len(moves) == 1 and not (
                board.is_capture(moves[0]) or board.gives_check(moves[0])
            )
            problems.append(
                EmbeddedProblem(
                    ply=ply,
                    fen=node.fen,
                    dtm=node.dtm,
                    key_sans=tuple(v.san for v in node.variations),
                    quiet_key=quiet,
                    cooked=len(moves) > 1,
                )
            )
        if ply < len(line):
            node = line[ply].node
    return problems
