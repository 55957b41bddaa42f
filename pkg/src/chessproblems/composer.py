"""The composing loop: sample positions with a fixed set of men, solve them,
keep the ones that meet the stipulation and the conventions, score them and
archive them.

Every candidate has an index, and everything about candidate ``i`` (the
bias drawn from the substrate, the squares its men land on, the solver's
verdict) is a function of the run seed and ``i`` alone. That is what makes
a run reproducible, and what lets `run` farm candidates out to worker
processes while the main process alone deduplicates and writes the archive.
"""
import enum
import logging
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace, fields
from datetime import datetime, timezone
from itertools import repeat

import numpy as np
import chess

from . import __version__
from .aesthetics import PIECE_VALUES, FeatureBreakdown, ScoreWeights, score
from .aesthetics import select_main_line
from .board import Position, parse_fen
from .config import read_settings, section
from .conventions import ConventionConfig, ConventionReport, evaluate
from .solver import MateIn, MateSolver, SearchAborted, SearchBudget
from .solver import SolutionTree
from .substrate import Substrate, SubstrateSettings

__all__ = [
    "PieceSetError",
    "PieceSetSpec",
    "Rejection",
    "SamplingSettings",
    "ComposerConfig",
    "CompositionRecord",
    "RunStatistics",
    "ComposerState",
    "CandidateResult",
    "candidate_rng",
    "sample_position",
    "examine_candidate",
    "compose_step",
    "run",
    "dedup_key",
    "verify_record",
    "utc_now",
]

logger = logging.getLogger(__name__)

_LETTERS = {
    "K": chess.KING,
    "Q": chess.QUEEN,
    "R": chess.ROOK,
    "B": chess.BISHOP,
    "N": chess.KNIGHT,
    "P": chess.PAWN,
}

# Men of each kind a side starts with; more need promoted pawns.
_INITIAL = {
    chess.QUEEN: 1,
    chess.ROOK: 2,
    chess.BISHOP: 2,
    chess.KNIGHT: 2,
}


class PieceSetError(ValueError):
    """A piece set that no legal position can have."""


# # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # #
# Piece sets


def _parse_side(text, name):
    kinds = []
    for ch in text.strip().upper():
        if ch not in _LETTERS:
            msg = "Unknown piece letter {!r} in {} set {!r}.".format(
                ch, name, text
            )
            raise PieceSetError(msg)
        kinds.append(_LETTERS[ch])
    return tuple(sorted(kinds, reverse=True))


def _check_side(kinds, name):
    counts = Counter(kinds)
    if counts[chess.KING] != 1:
        msg = "The {} set needs exactly one king, got {}.".format(
            name, counts[chess.KING]
        )
        raise PieceSetError(msg)
    promoted = sum(
        max(0, counts[pt] - n) for pt, n in _INITIAL.items()
    )
    if counts[chess.PAWN] + promoted > 8:
        msg = "The {} set needs more than eight pawns' worth of promotions."
        raise PieceSetError(msg.format(name))
    if len(kinds) > 16:
        raise PieceSetError("The {} set has more than 16 men.".format(name))


@dataclass(frozen=True)
class PieceSetSpec:
    """The exact men of both sides, as tuples of python-chess piece types
    (king first).
    """

    white: tuple
    black: tuple

    def __post_init__(self):
        _check_side(self.white, "white")
        _check_side(self.black, "black")

    @classmethod
    def parse(cls, white, black):
        """Build a spec from piece letters, e.g. ``("KNNNN", "KQ")``. The
        king has to be given explicitly.
        """
        return cls(_parse_side(white, "white"), _parse_side(black, "black"))

    @classmethod
    def from_string(cls, text):
        """Parse ``"KNNNNvKQ"`` (case-insensitive ``v`` separator)."""
        parts = text.lower().split("v")
        if len(parts) != 2:
            msg = "Expected '<white>v<black>', got {!r}.".format(text)
            raise PieceSetError(msg)
        return cls.parse(*parts)

    def pieces(self):
        """All men as `chess.Piece`s, White's first, kings first."""
        return [chess.Piece(pt, chess.WHITE) for pt in self.white] + [
            chess.Piece(pt, chess.BLACK) for pt in self.black
        ]

    def __str__(self):
        return "{}v{}".format(
            "".join(chess.piece_symbol(pt).upper() for pt in self.white),
            "".join(chess.piece_symbol(pt).upper() for pt in self.black),
        )


# # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # #
# Sampling


class Rejection(enum.Enum):
    """Why a sampled placement was thrown away."""

    OVERLAP = "overlap"
    PAWN_RANK = "pawn_rank"
    ADJACENCY = "adjacency"
    ILLEGAL_CHECK = "illegal_check"
    EN_PRISE = "en_prise"


@dataclass(frozen=True)
class SamplingSettings:
    """How a bias vector turns into square weights.

    Each man except the Black king lands on a square with weight
    ``floor + exp(-d**2 / (2 * spread**2))``, `d` being the distance to the
    bias centroid and `spread` shrinking linearly from `spread_max` at
    density 0 to `spread_min` at density 1. The Black king's weights also
    carry a factor ``exp(-(s - separation)**2 / (2 * king_spread**2))``,
    `s` being its Chebyshev distance to the White king.
    """

    floor: float = 0.02
    spread_min: float = 0.75
    spread_max: float = 4.0
    king_spread: float = 1.0

    def __post_init__(self):
        if self.floor < 0:
            raise ValueError("floor must be non-negative.")
        if not 0 < self.spread_min <= self.spread_max:
            raise ValueError("Need 0 < spread_min <= spread_max.")
        if self.king_spread <= 0:
            raise ValueError("king_spread must be positive.")

    @classmethod
    def from_settings(cls, settings):
        known = {f.name for f in fields(cls)}
        return cls(**section(settings, "sampling", known))


_FILES = np.array([chess.square_file(s) for s in chess.SQUARES], dtype=float)
_RANKS = np.array([chess.square_rank(s) for s in chess.SQUARES], dtype=float)


def _square_weights(bias, settings):
    cf, cr = bias.centroid
    d2 = (_FILES - cf) ** 2 + (_RANKS - cr) ** 2
    spread = settings.spread_max - bias.density * (
        settings.spread_max - settings.spread_min
    )
    return settings.floor + np.exp(-d2 / (2 * spread ** 2))


def _king_weights(weights, white_king, bias, settings):
    sep = np.array(
        [chess.square_distance(s, white_king) for s in chess.SQUARES],
        dtype=float,
    )
    factor = np.exp(
        -((sep - bias.king_separation) ** 2) / (2 * settings.king_spread ** 2)
    )
    return weights * factor


def _draw(rng, weights):
    if weights is None:
        return int(rng.integers(64))
    return int(rng.choice(64, p=weights / weights.sum()))


def _en_prise_squares(board):
    """The squares of White men, king aside, that Black can take at a
    profit.
    """
    squares = []
    for sq, piece in board.piece_map().items():
        if piece.color != chess.WHITE or piece.piece_type == chess.KING:
            continue
        attackers = board.attackers(chess.BLACK, sq)
        if not attackers:
            continue
        if not board.is_attacked_by(chess.WHITE, sq):
            squares.append(sq)
            continue
        # a defended man can not be taken by the king
        capturers = [a for a in attackers if a != board.king(chess.BLACK)]
        if not capturers:
            continue
        cheapest = min(
            PIECE_VALUES[board.piece_type_at(a)] for a in capturers
        )
        if cheapest < PIECE_VALUES[piece.piece_type]:
            squares.append(sq)
    return squares


def _en_prise(board):
    """Is some White man other than the king capturable at a profit?"""
    return bool(_en_prise_squares(board))


def sample_position(spec, bias, rng, en_prise_filter=False, settings=None):
    """Draw one placement of the men of `spec`, White to move.

    Returns a `Position`, or a `Rejection` saying why the draw was thrown
    away. Squares are drawn independently, uniformly when `bias` is None,
    so the accepted positions are uniform over valid placements.
    """
    settings = settings or SamplingSettings()
    weights = None if bias is None else _square_weights(bias, settings)
    pieces = spec.pieces()
    squares = []
    for piece in pieces:
        w = weights
        if (
            bias is not None
            and piece.piece_type == chess.KING
            and piece.color == chess.BLACK
        ):
            w = _king_weights(weights, squares[0], bias, settings)
        squares.append(_draw(rng, w))
    if len(set(squares)) < len(squares):
        return Rejection.OVERLAP
    board = chess.Board(None)
    for piece, sq in zip(pieces, squares):
        if piece.piece_type == chess.PAWN and sq in chess.SquareSet(
            chess.BB_BACKRANKS
        ):
            return Rejection.PAWN_RANK
        board.set_piece_at(sq, piece)
    board.turn = chess.WHITE
    wk, bk = board.king(chess.WHITE), board.king(chess.BLACK)
    if chess.square_distance(wk, bk) <= 1:
        return Rejection.ADJACENCY
    if board.was_into_check() or board.status() & (
        chess.STATUS_TOO_MANY_CHECKERS | chess.STATUS_IMPOSSIBLE_CHECK
    ):
        return Rejection.ILLEGAL_CHECK
    if en_prise_filter and _en_prise(board):
        return Rejection.EN_PRISE
    return Position(board)


def candidate_rng(seed, index):
    """The random stream of candidate `index` of a run with `seed`."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(index,))
    )


# # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # #
# Deduplication


def _reflections(board):
    """Boards equivalent to `board` for problem purposes."""
    variants = [board, board.mirror()]
    if board.castling_rights:
        return variants
    if board.pawns:
        flips = [chess.flip_horizontal]
    else:
        fv, fh, fd = (
            chess.flip_vertical,
            chess.flip_horizontal,
            chess.flip_diagonal,
        )
        flips = [
            fv,
            fh,
            lambda bb: fv(fh(bb)),
            fd,
            chess.flip_anti_diagonal,
            lambda bb: fd(fv(bb)),
            lambda bb: fd(fh(bb)),
        ]
    return [v.transform(f) for v in variants for f in flips] + variants


def dedup_key(p, symmetric=False):
    """The novelty key of `p`: its piece placement and side to move.

    Move counters, castling and en passant fields are not part of it. With
    `symmetric`, the key is the smallest over the board reflections and
    rotations that keep the position equivalent, and over swapping colours.
    """
    board = p.board()

    def _key(b):
        return "{} {}".format(b.board_fen(), "w" if b.turn else "b")

    if not symmetric:
        return _key(board)
    return min(_key(b) for b in _reflections(board))


# # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # #
# Configuration and records


@dataclass(frozen=True)
class ComposerConfig:
    """Everything a run depends on."""

    piece_set: PieceSetSpec
    goals: tuple = (MateIn(3), MateIn(4), MateIn(5))
    conventions: ConventionConfig = field(default_factory=ConventionConfig)
    min_aesthetics: float = None
    en_prise_filter: bool = False
    max_candidates: int = 1000
    max_wall_seconds: float = 3600.0
    per_solve: SearchBudget = field(
        default_factory=lambda: SearchBudget(
            max_nodes=200_000, max_seconds=30.0, transposition_entries=1 << 16
        )
    )
    seed: int = 0
    games_path: str = None
    images_path: str = None
    location_label: str = ""
    symmetric_dedup: bool = False
    weights: ScoreWeights = field(default_factory=ScoreWeights)
    sampling: SamplingSettings = field(default_factory=SamplingSettings)
    substrate: SubstrateSettings = field(default_factory=SubstrateSettings)

    def __post_init__(self):
        goals = tuple(
            sorted(
                g if isinstance(g, MateIn) else MateIn(g) for g in self.goals
            )
        )
        if not goals:
            raise ValueError("At least one goal is needed.")
        object.__setattr__(self, "goals", goals)
        if self.max_candidates < 0:
            raise ValueError("max_candidates must be non-negative.")
        if self.max_wall_seconds <= 0:
            raise ValueError("max_wall_seconds must be positive.")
        if not 0 <= self.seed < 1 << 64:
            raise ValueError("The seed must fit in 64 unsigned bits.")

    @classmethod
    def from_settings(cls, piece_set, settings, **kwargs):
        """Build a config whose weights and sampling and substrate settings
        come from a settings dict; `kwargs` set the other fields.
        """
        return cls(
            piece_set=piece_set,
            weights=ScoreWeights.from_settings(settings),
            sampling=SamplingSettings.from_settings(settings),
            substrate=SubstrateSettings.from_settings(settings),
            **kwargs,
        )

    @classmethod
    def from_file(cls, piece_set, path, **kwargs):
        return cls.from_settings(piece_set, read_settings(path), **kwargs)


def utc_now():
    return datetime.now(timezone.utc)


def _timestamp(dt):
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class CompositionRecord:
    """An archived composition. `stipulation` is a `MateIn`, `main_line`
    a tuple of SAN strings and `utc_timestamp` an ISO 8601 string ending in
    ``Z``.
    """

    fen: str
    stipulation: MateIn
    composer_version: str
    location_label: str
    utc_timestamp: str
    main_line: tuple
    solution_tree: SolutionTree
    aesthetics_score: float
    breakdown: FeatureBreakdown
    convention_report: ConventionReport
    seed: int
    candidate_index: int

    def to_dict(self):
        return {
            "fen": self.fen,
            "stipulation": self.stipulation.n,
            "composer_version": self.composer_version,
            "location_label": self.location_label,
            "utc_timestamp": self.utc_timestamp,
            "main_line": list(self.main_line),
            "solution_tree": self.solution_tree.to_dict(),
            "aesthetics_score": self.aesthetics_score,
            "breakdown": self.breakdown.to_dict(),
            "convention_report": self.convention_report.to_dict(),
            "seed": self.seed,
            "candidate_index": self.candidate_index,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            fen=d["fen"],
            stipulation=MateIn(d["stipulation"]),
            composer_version=d["composer_version"],
            location_label=d["location_label"],
            utc_timestamp=d["utc_timestamp"],
            main_line=tuple(d["main_line"]),
            solution_tree=SolutionTree.from_dict(d["solution_tree"]),
            aesthetics_score=d["aesthetics_score"],
            breakdown=FeatureBreakdown(**d["breakdown"]),
            convention_report=ConventionReport.from_dict(
                d["convention_report"]
            ),
            seed=d["seed"],
            candidate_index=d["candidate_index"],
        )

    def position(self):
        return parse_fen(self.fen)


# # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # #
# Statistics


@dataclass
class RunStatistics:
    """Counts of what happened to the candidates of a run.

    `rejections` is keyed by reason: the `Rejection` values for discarded
    samples, and ``no_mate``, ``goal_mismatch``, ``aborted``,
    ``aesthetics`` and ``duplicate`` for solved-and-discarded ones.
    Convention failures are counted separately.
    """

    candidates: int = 0
    solved: int = 0
    convention_failures: int = 0
    emitted: int = 0
    rejections: Counter = field(default_factory=Counter)
    interrupted: bool = False
    elapsed: float = 0.0

    @property
    def emissions_per_candidate(self):
        return self.emitted / self.candidates if self.candidates else 0.0

    def merge(self, other):
        """Add the counts of `other` into this one and return self."""
        self.candidates += other.candidates
        self.solved += other.solved
        self.convention_failures += other.convention_failures
        self.emitted += other.emitted
        self.rejections.update(other.rejections)
        self.interrupted = self.interrupted or other.interrupted
        self.elapsed = max(self.elapsed, other.elapsed)
        return self

    def to_dict(self):
        return {
            "candidates": self.candidates,
            "solved": self.solved,
            "convention_failures": self.convention_failures,
            "emitted": self.emitted,
            "rejections": dict(sorted(self.rejections.items())),
            "interrupted": self.interrupted,
        }

    def __str__(self):
        rejections = ", ".join(
            "{} {}".format(k, v) for k, v in sorted(self.rejections.items())
        )
        return (
            "candidates {}, solved {}, convention failures {}, emitted {}"
            "{}{}".format(
                self.candidates,
                self.solved,
                self.convention_failures,
                self.emitted,
                "; rejected: " + rejections if rejections else "",
                " (interrupted)" if self.interrupted else "",
            )
        )


# # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # #
# One candidate


@dataclass(frozen=True)
class CandidateResult:
    """What became of one candidate. `verdict` is ``"emitted"`` or a
    rejection reason; `record` is set only for emissions and still lacks its
    timestamp.
    """

    index: int
    verdict: str
    record: CompositionRecord = None
    key: str = None
    solved: bool = False


def examine_candidate(cfg, index, candidate=None, substrate=None, seen=()):
    """Sample (unless `candidate` is given), solve, check and score
    candidate `index` of the run `cfg`.

    Depends only on its arguments. Keys in `seen` are rejected as
    duplicates before any solving.
    """
    if candidate is None:
        rng = candidate_rng(cfg.seed, index)
        bias = substrate.draw(rng) if substrate else None
        sample = sample_position(
            cfg.piece_set, bias, rng, cfg.en_prise_filter, cfg.sampling
        )
        if isinstance(sample, Rejection):
            return CandidateResult(index, sample.value)
        candidate = sample
    if candidate.turn != chess.WHITE:
        raise ValueError("Candidates have White to move.")
    key = dedup_key(candidate, cfg.symmetric_dedup)
    if key in seen:
        return CandidateResult(index, "duplicate", key=key)

    def _reject(verdict, solved=True):
        logger.debug("Candidate %d %s: %s", index, candidate.fen(), verdict)
        return CandidateResult(index, verdict, key=key, solved=solved)

    solver = MateSolver(cfg.per_solve)
    result = solver.solve(candidate, cfg.goals[-1].n)
    if result.is_aborted:
        return _reject("aborted", solved=False)
    if not result.is_mate:
        return _reject("no_mate", solved=False)
    stipulation = MateIn(result.moves)
    if stipulation not in cfg.goals:
        return _reject("goal_mismatch")
    report = evaluate(candidate, stipulation, cfg.conventions, solver=solver)
    if report.indeterminate:
        return _reject("aborted")
    if not report.passed:
        return _reject("conventions")
    try:
        tree = solver.build_tree(candidate, stipulation.n)
    except SearchAborted:
        return _reject("aborted")
    main_line = select_main_line(tree, cfg.weights)
    total, breakdown = score(tree, cfg.weights, main_line)
    if cfg.min_aesthetics is not None and total < cfg.min_aesthetics:
        return _reject("aesthetics")
    record = CompositionRecord(
        fen=candidate.fen(),
        stipulation=stipulation,
        composer_version=__version__,
        location_label=cfg.location_label,
        utc_timestamp="",
        main_line=tuple(v.san for v in main_line),
        solution_tree=tree,
        aesthetics_score=total,
        breakdown=breakdown,
        convention_report=report,
        seed=cfg.seed,
        candidate_index=index,
    )
    logger.debug("Candidate %d %s: %s", index, candidate.fen(), stipulation)
    return CandidateResult(index, "emitted", record, key, solved=True)


class ComposerState:
    """The mutable side of a run: the next candidate index, the dedup keys
    seen so far, the statistics and the clock that stamps emissions.
    """

    def __init__(self, cfg, substrate=None, seen=(), clock=None):
        self.cfg = cfg
        self.substrate = substrate
        self.seen = set(seen)
        self.clock = clock or utc_now
        self.stats = RunStatistics()
        self.next_index = 0

    def accept(self, result):
        """Count `result` and return its stamped record if it is a new
        emission, else None.
        """
        stats = self.stats
        stats.candidates += 1
        if result.verdict == "emitted" and result.key in self.seen:
            stats.rejections["duplicate"] += 1
            return None
        stats.solved += result.solved
        if result.verdict == "conventions":
            stats.convention_failures += 1
            return None
        if result.verdict != "emitted":
            stats.rejections[result.verdict] += 1
            return None
        self.seen.add(result.key)
        stats.emitted += 1
        record = replace(result.record, utc_timestamp=_timestamp(self.clock()))
        logger.info(
            "Composed %s: %s (score %.3f)",
            record.stipulation, record.fen, record.aesthetics_score,
        )
        return record


def compose_step(state, candidate=None):
    """Examine the next candidate of `state` (or the forced `candidate`) and
    return the new `CompositionRecord`, or None.
    """
    result = examine_candidate(
        state.cfg, state.next_index, candidate, state.substrate, state.seen
    )
    state.next_index += 1
    return state.accept(result)


# # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # #
# Runs


def _examine_index(cfg, substrate, index):
    return examine_candidate(cfg, index, substrate=substrate)


def run(cfg, archive, workers=1, clock=None, substrate=None):
    """Compose until `cfg.max_candidates` candidates have been examined or
    `cfg.max_wall_seconds` have passed, appending every emission to
    `archive`. Returns the `RunStatistics`.

    With several `workers`, candidates are examined in worker processes in
    chunks, and results are accepted in index order, so the archive gets the
    same records as a sequential run. An interrupt stops the run between
    candidates; the statistics then have `interrupted` set. An archive
    failure raises `ArchiveError` carrying the statistics so far.
    """
    from .archive import ArchiveError

    if substrate is None:
        substrate = Substrate.from_sources(
            cfg.games_path, cfg.images_path, cfg.substrate
        )
    keys = archive.keys(cfg.symmetric_dedup)
    state = ComposerState(cfg, substrate, keys, clock)
    start = time.perf_counter()
    deadline = start + cfg.max_wall_seconds
    logger.info(
        "Composing %s, goals %s, seed %d, %d candidates, %d worker(s)",
        cfg.piece_set,
        ",".join(g.tag() for g in cfg.goals),
        cfg.seed,
        cfg.max_candidates,
        workers,
    )

    def _emit(record):
        try:
            archive.append(
                record, dedup_key(record.position(), cfg.symmetric_dedup)
            )
        except ArchiveError as e:
            e.stats = state.stats
            raise

    try:
        if workers <= 1:
            while (
                state.next_index < cfg.max_candidates
                and time.perf_counter() < deadline
            ):
                record = compose_step(state)
                if record is not None:
                    _emit(record)
        else:
            chunk = 4 * workers
            with ProcessPoolExecutor(workers) as pool:
                while (
                    state.next_index < cfg.max_candidates
                    and time.perf_counter() < deadline
                ):
                    stop = min(state.next_index + chunk, cfg.max_candidates)
                    indices = range(state.next_index, stop)
                    results = pool.map(
                        _examine_index, repeat(cfg), repeat(substrate), indices
                    )
                    for result in results:
                        record = state.accept(result)
                        if record is not None:
                            _emit(record)
                    state.next_index = stop
    except KeyboardInterrupt:
        logger.warning(
            "Interrupted after %d candidates", state.stats.candidates
        )
        state.stats.interrupted = True
    state.stats.elapsed = time.perf_counter() - start
    logger.info("Run finished: %s", state.stats)
    return state.stats


# # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # #
# Re-verification


def verify_record(record, weights=None, budget=None):
    """Re-derive the verdicts of `record` from its FEN and return a list of
    the discrepancies found (empty if it checks out).

    The score is re-checked only when `weights` are given, since the
    weights of the run are not archived.
    """
    problems = []
    try:
        p = parse_fen(record.fen)
    except ValueError as e:
        return ["bad FEN: {}".format(e)]
    n = record.stipulation.n
    solver = MateSolver(budget)
    result = solver.solve(p, n)
    if result.is_aborted:
        return ["search budget exhausted"]
    if not result.is_mate or result.moves != n:
        msg = "solver gives {}, not {}".format(result, record.stipulation)
        problems.append(msg)
        return problems
    report = evaluate(
        p, record.stipulation, record.convention_report.config, solver=solver
    )
    if report.indeterminate:
        return ["search budget exhausted"]
    if report != record.convention_report:
        problems.append("convention report differs")
    if not report.passed:
        problems.append("conventions fail")
    try:
        tree = solver.build_tree(p, n)
    except SearchAborted:
        return problems + ["search budget exhausted"]
    if tree.to_dict() != record.solution_tree.to_dict():
        problems.append("solution tree differs")
    if weights is not None:
        line = _line_by_sans(tree, record.main_line)
        if line is None:
            problems.append("main line is not in the solution tree")
            return problems
        total, _ = score(tree, weights, line)
        if not np.isclose(
            total, record.aesthetics_score, rtol=1e-9, atol=1e-12
        ):
            problems.append(
                "score {:.6f} differs from stored {:.6f}".format(
                    total, record.aesthetics_score
                )
            )
    return problems


def _line_by_sans(tree, sans):
    line = []
    node = tree.root
    for san in sans:
        matches = [v for v in node.variations if v.san == san]
        if not matches:
            return None
        line.append(matches[0])
        node = matches[0].node
    return tuple(line)
