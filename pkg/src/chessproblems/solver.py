"""Exact bounded distance-to-mate search.

The attacker is always White. A position's distance to mate (DTM) is the
smallest number of White moves that force checkmate against every defence;
"mate in 5" is nine plies when White is to move.

The search is a depth-first AND/OR search: a White node succeeds if *some*
move succeeds, a Black node succeeds if *every* reply leads to a White node
that succeeds with one move less. At the root the bound is deepened
iteratively, so the first bound that succeeds is the DTM. There is no
evaluation function; only proofs and refutations.

Proven facts are cached in a `TranspositionTable` keyed by the Polyglot
Zobrist hash of the position, updated move by move with `zobrist_push`.
Every slot stores the full 64-bit key as a verification key, and a
mismatching slot is simply ignored, so the table only ever changes how fast
an answer is found, never the answer.
"""
import enum
import logging
import time
from dataclasses import dataclass, field

import chess
import chess.polyglot

from .board import (
    Position,
    GameState,
    classify_board,
    move_order_key,
)

__all__ = [
    "MAX_MATE_MOVES",
    "SearchBudget",
    "SearchAborted",
    "TerminalPositionError",
    "NoMateError",
    "Outcome",
    "MateResult",
    "MateIn",
    "TranspositionTable",
    "zobrist_push",
    "Variation",
    "SolutionNode",
    "SolutionTree",
    "MateSolver",
    "solve_dtm",
    "key_moves",
    "build_tree",
]

logger = logging.getLogger(__name__)

MAX_MATE_MOVES = 16

# # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # #
# Errors and result types


class SearchAborted(Exception):
    """Raised when a `SearchBudget` runs out before a proof or refutation is
    complete. `nodes` and `elapsed` tell how far the search got.
    """

    def __init__(self, nodes=0, elapsed=0.0):
        msg = "Search budget exhausted after {} nodes and {:.2f} s.".format(
            nodes, elapsed
        )
        super().__init__(msg)
        self.nodes = nodes
        self.elapsed = elapsed


class TerminalPositionError(ValueError):
    """The position is already checkmate or stalemate, so it has no key."""


class NoMateError(ValueError):
    """White has no forced mate within the requested number of moves."""


@dataclass(frozen=True)
class SearchBudget:
    """Limits for a single solver call.

    `max_nodes` bounds the number of positions visited, `max_seconds` the
    wall time. `transposition_entries` is the size of the cache; 0 disables
    it, which changes speed only.
    """

    max_nodes: int = 20_000_000
    max_seconds: float = 3600.0
    transposition_entries: int = 1 << 20

    def __post_init__(self):
        if self.max_nodes <= 0:
            raise ValueError("max_nodes must be positive.")
        if self.max_seconds <= 0:
            raise ValueError("max_seconds must be positive.")
        if self.transposition_entries < 0:
            raise ValueError("transposition_entries must be non-negative.")


class Outcome(enum.Enum):
    MATE = "mate_in"
    NO_MATE = "no_mate_within"
    ABORTED = "aborted"


@dataclass(frozen=True)
class MateResult:
    """The verdict of `solve_dtm`.

    For ``MATE`` `moves` is the DTM, counted in White moves. For ``NO_MATE``
    and ``ABORTED`` it is the bound that was searched.
    """

    outcome: Outcome
    moves: int
    nodes_searched: int = 0
    elapsed: float = 0.0

    @property
    def is_mate(self):
        return self.outcome is Outcome.MATE

    @property
    def is_aborted(self):
        return self.outcome is Outcome.ABORTED

    def __str__(self):
        if self.outcome is Outcome.MATE:
            return "mate in {}".format(self.moves)
        if self.outcome is Outcome.NO_MATE:
            return "no mate within {}".format(self.moves)
        return "aborted after {} nodes".format(self.nodes_searched)


@dataclass(frozen=True, order=True)
class MateIn:
    """A stipulation: White to play and mate in exactly `n` moves."""

    n: int

    def __post_init__(self):
        if not 1 <= self.n <= MAX_MATE_MOVES:
            msg = "Mate length must be between 1 and {}, got {}.".format(
                MAX_MATE_MOVES, self.n
            )
            raise ValueError(msg)

    @classmethod
    def parse(cls, text):
        """Parse ``"mate5"``, ``"#5"``, ``"mate_in_5"`` or plain ``"5"``."""
        s = str(text).strip().lower()
        for prefix in ("mate_in_", "mate-in-", "mate", "#", "m"):
            if s.startswith(prefix):
                s = s[len(prefix):]
                break
        try:
            return cls(int(s))
        except ValueError:
            raise ValueError("Not a mate stipulation: {!r}".format(text))

    def __str__(self):
        return "mate in {}".format(self.n)

    def tag(self):
        return "#{}".format(self.n)


# # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # #
# Incremental Zobrist keys

_HASHER = chess.polyglot.ZobristHasher(chess.polyglot.POLYGLOT_RANDOM_ARRAY)
_RANDOM = chess.polyglot.POLYGLOT_RANDOM_ARRAY
_TURN = _RANDOM[780]


def _piece_key(piece_type, color, square):
    return _RANDOM[64 * ((piece_type - 1) * 2 + int(color)) + square]


def zobrist_push(board, move, key):
    """Push the legal `move` on `board` and return the Polyglot Zobrist key
    of the new position, given the `key` of the old one.

    Only the squares the move touches are rehashed, together with the
    castling, en passant and turn terms, which python-chess computes from
    the board in constant time. The result always equals
    ``chess.polyglot.zobrist_hash(board)`` after the push.
    """
    color = board.turn
    key ^= _HASHER.hash_castling(board) ^ _HASHER.hash_ep_square(board)
    piece_type = board.piece_type_at(move.from_square)
    key ^= _piece_key(piece_type, color, move.from_square)
    if board.is_castling(move):
        rank = chess.square_rank(move.from_square)
        kingside = chess.square_file(move.to_square) > chess.square_file(
            move.from_square
        )
        files = (6, 7, 5) if kingside else (2, 0, 3)
        king_to, rook_from, rook_to = (chess.square(f, rank) for f in files)
        key ^= _piece_key(chess.KING, color, king_to)
        key ^= _piece_key(chess.ROOK, color, rook_from)
        key ^= _piece_key(chess.ROOK, color, rook_to)
    else:
        captured = board.piece_type_at(move.to_square)
        if captured:
            key ^= _piece_key(captured, not color, move.to_square)
        elif board.is_en_passant(move):
            victim = move.to_square + (-8 if color == chess.WHITE else 8)
            key ^= _piece_key(chess.PAWN, not color, victim)
        key ^= _piece_key(move.promotion or piece_type, color, move.to_square)
    board.push(move)
    key ^= _TURN
    return key ^ _HASHER.hash_castling(board) ^ _HASHER.hash_ep_square(board)


# # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # #
# Transposition table


class TranspositionTable:
    """A fixed-size cache of proven search facts.

    For a position P (either side to move) let d(P) be the number of White
    moves White needs to force mate. Each slot stores two bounds for one
    position: ``mate`` (d(P) <= mate is proven) and ``no_mate`` (d(P) >
    no_mate is proven). Both are exact facts, so looking them up can never
    change a verdict.

    Slots are indexed by ``key % size`` and always replaced on collision.
    """

    def __init__(self, entries):
        self.size = entries
        self._keys = [None] * entries
        self._mate = [0] * entries
        self._no_mate = [0] * entries

    def __len__(self):
        return sum(k is not None for k in self._keys)

    def probe(self, key, n):
        """Return True/False if the table decides ``d(P) <= n`` for the
        position with Zobrist `key`, else None.
        """
        if not self.size:
            return None
        i = key % self.size
        if self._keys[i] != key:
            return None
        mate = self._mate[i]
        if mate and mate <= n:
            return True
        if self._no_mate[i] >= n:
            return False
        return None

    def store(self, key, n, mates):
        """Record that ``d(P) <= n`` (`mates` True) or ``d(P) > n``."""
        if not self.size:
            return
        i = key % self.size
        if self._keys[i] != key:
            self._keys[i] = key
            self._mate[i] = 0
            self._no_mate[i] = -1
        if mates:
            if not self._mate[i] or n < self._mate[i]:
                self._mate[i] = n
        elif n > self._no_mate[i]:
            self._no_mate[i] = n

    def clear(self):
        self._keys = [None] * self.size


# # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # #
# Solution trees


@dataclass(frozen=True)
class Variation:
    """An edge of a `SolutionTree`: a move and the node it leads to."""

    move: chess.Move
    san: str
    node: "SolutionNode"


@dataclass(frozen=True)
class SolutionNode:
    """A node of a `SolutionTree`.

    `dtm` is the number of White moves still needed from this node against
    best defence (0 at a mate leaf). At a White node `variations` holds every
    DTM-optimal move; at a Black node it holds every legal reply. `principal`
    indexes the designated variation: the lowest optimal move for White, the
    longest-resisting reply for Black.
    """

    fen: str
    white_to_move: bool
    dtm: int
    variations: tuple = ()
    principal: int = 0

    @property
    def is_leaf(self):
        return not self.variations

    def principal_variation(self):
        return self.variations[self.principal] if self.variations else None


@dataclass(frozen=True)
class SolutionTree:
    """The AND/OR tree of a forced mate."""

    root_fen: str
    stipulation: MateIn
    root: SolutionNode

    def nodes(self):
        """Iterate over all nodes, depth first, in move order."""
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(v.node for v in reversed(node.variations))

    def lines(self):
        """Iterate over all root-to-leaf lines as tuples of `Variation`s."""

        def _lines(node, prefix):
            if node.is_leaf:
                yield prefix
                return
            for v in node.variations:
                yield from _lines(v.node, prefix + (v,))

        yield from _lines(self.root, ())

    def principal_line(self):
        line = []
        node = self.root
        while not node.is_leaf:
            v = node.principal_variation()
            line.append(v)
            node = v.node
        return tuple(line)

    def keys(self):
        """The optimal first moves, if White moves first."""
        if not self.root.white_to_move:
            return ()
        return tuple(v.move for v in self.root.variations)

    def follow(self, sans):
        """Return the node reached by the SAN sequence `sans`."""
        node = self.root
        for san in sans:
            for v in node.variations:
                if v.san.rstrip("+#") == san.rstrip("+#"):
                    node = v.node
                    break
            else:
                raise KeyError("No variation {!r} in the tree.".format(san))
        return node

    # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # #
    # Serialization

    def to_dict(self):
        """A JSON-compatible dict. Only the root FEN is stored; the other
        positions follow from the moves.
        """

        def _node(node):
            d = {"dtm": node.dtm}
            if node.variations:
                d["principal"] = node.principal
                d["moves"] = [
                    {"uci": v.move.uci(), "san": v.san, "node": _node(v.node)}
                    for v in node.variations
                ]
            return d

        return {
            "root_fen": self.root_fen,
            "stipulation": self.stipulation.n,
            "root": _node(self.root),
        }

    @classmethod
    def from_dict(cls, d):
        """Inverse of `to_dict`, replaying the moves to recover the FENs."""

        def _node(data, board):
            variations = []
            for item in data.get("moves", ()):
                move = chess.Move.from_uci(item["uci"])
                board.push(move)
                child = _node(item["node"], board)
                board.pop()
                variations.append(Variation(move, item["san"], child))
            return SolutionNode(
                fen=board.fen(en_passant="fen"),
                white_to_move=board.turn == chess.WHITE,
                dtm=data["dtm"],
                variations=tuple(variations),
                principal=data.get("principal", 0),
            )

        board = chess.Board(d["root_fen"])
        root = _node(d["root"], board)
        return cls(d["root_fen"], MateIn(d["stipulation"]), root)

    def to_text(self):
        """Render the tree as an indented table: each Black defence on its
        own line followed by White's optimal replies, duals separated by
        ``" / "``. Only the principal White reply is expanded further.
        """
        board = chess.Board(self.root_fen)
        number = board.fullmove_number
        out = ["{} ({})".format(self.stipulation, self.root_fen)]

        def _white_text(node, number):
            return "{}. {}".format(
                number, " / ".join(v.san for v in node.variations)
            )

        def _black(node, number, indent):
            # `node` is a Black node; `number` is the move number of the
            # Black reply.
            for v in node.variations:
                reply = v.node
                text = "{}{}... {}".format("  " * indent, number, v.san)
                if reply.is_leaf:
                    out.append(text)
                    continue
                out.append(text + "  " + _white_text(reply, number + 1))
                nxt = reply.principal_variation().node
                if not nxt.is_leaf:
                    _black(nxt, number + 1, indent + 1)

        if self.root.white_to_move:
            out.append(_white_text(self.root, number))
            nxt = self.root.principal_variation().node
            if not nxt.is_leaf:
                _black(nxt, number, 1)
        else:
            _black(self.root, number, 1)
        return "\n".join(out) + "\n"


# # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # #
# The solver


class MateSolver:
    """A single-threaded mate solver owning its transposition table.

    The public methods take a `Position`; each call starts a fresh node and
    time budget but keeps the table, which only ever speeds things up.
    Different instances share nothing and may run concurrently.
    """

    def __init__(self, budget=None):
        self.budget = budget or SearchBudget()
        self.table = TranspositionTable(self.budget.transposition_entries)
        self.nodes = 0
        self._start = 0.0
        self._deadline = 0.0
        self._killers = {}

    # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # #
    # Bookkeeping

    def _reset(self):
        self.nodes = 0
        self._start = time.perf_counter()
        self._deadline = self._start + self.budget.max_seconds
        self._killers = {}

    def _elapsed(self):
        return time.perf_counter() - self._start

    def _tick(self):
        self.nodes += 1
        if self.nodes > self.budget.max_nodes or (
            not self.nodes & 1023 and time.perf_counter() > self._deadline
        ):
            raise SearchAborted(self.nodes, self._elapsed())

    # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # #
    # AND/OR search on raw boards

    def _white_mates(self, board, n, key=None):
        """White to move: can White force mate within `n` moves? `key` is
        the Zobrist key of `board`, computed afresh when not given.
        """
        self._tick()
        if key is None:
            key = chess.polyglot.zobrist_hash(board)
        known = self.table.probe(key, n)
        if known is not None:
            return known
        result = False
        quiet = []
        # Checking moves first, each pushed once; quiet moves are deferred.
        for move in board.generate_legal_moves():
            child = zobrist_push(board, move, key)
            if board.is_check():
                if not any(board.generate_legal_moves()):
                    result = True
                elif n > 1:
                    result = self._black_loses(board, n - 1, child)
            elif n > 1:
                quiet.append(move)
            board.pop()
            if result:
                break
        if not result:
            for move in quiet:
                child = zobrist_push(board, move, key)
                result = self._black_loses(board, n - 1, child)
                board.pop()
                if result:
                    break
        self.table.store(key, n, result)
        return result

    def _black_loses(self, board, n, key=None):
        """Black to move: does every reply allow mate within `n` more White
        moves? A checkmated Black side has lost with 0 moves to spare.
        """
        self._tick()
        if key is None:
            key = chess.polyglot.zobrist_hash(board)
        known = self.table.probe(key, n)
        if known is not None:
            return known
        replies = list(board.generate_legal_moves())
        if not replies:
            result = board.is_check()
            self.table.store(key, n, result)
            return result
        if n == 0:
            self.table.store(key, 0, False)
            return False
        killer = self._killers.get(n)
        if killer is not None and killer in replies:
            replies.remove(killer)
            replies.insert(0, killer)
        result = True
        for move in replies:
            child = zobrist_push(board, move, key)
            ok = self._white_mates(board, n, child)
            board.pop()
            if not ok:
                self._killers[n] = move
                result = False
                break
        self.table.store(key, n, result)
        return result

    def _node_mates(self, board, n):
        if board.turn == chess.WHITE:
            return self._white_mates(board, n)
        return self._black_loses(board, n)

    def _dtm(self, board, limit, lowest=1):
        """Smallest k in ``lowest..limit`` with mate within k, or None."""
        for k in range(lowest, limit + 1):
            if self._node_mates(board, k):
                return k
        return None

    # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # #
    # Public interface

    def solve(self, position, max_moves):
        """See `solve_dtm`."""
        _check_bound(max_moves)
        self._reset()
        board = position.board()
        state = classify_board(board)
        if state.is_terminal:
            if board.turn == chess.BLACK and state is GameState.CHECKMATE:
                raise TerminalPositionError(
                    "Black is already checkmated in {}.".format(position.fen())
                )
            return MateResult(Outcome.NO_MATE, max_moves, 0, 0.0)
        try:
            for k in range(1, max_moves + 1):
                if self._node_mates(board, k):
                    logger.debug(
                        "%s: mate in %d (%d nodes, %.2f s)",
                        position.fen(), k, self.nodes, self._elapsed(),
                    )
                    return MateResult(
                        Outcome.MATE, k, self.nodes, self._elapsed()
                    )
                logger.debug(
                    "%s: no mate in %d (%d nodes)",
                    position.fen(),
                    k,
                    self.nodes,
                )
        except SearchAborted as e:
            logger.debug("%s: %s", position.fen(), e)
            return MateResult(Outcome.ABORTED, max_moves, e.nodes, e.elapsed)
        return MateResult(
            Outcome.NO_MATE, max_moves, self.nodes, self._elapsed()
        )

    def key_moves(self, position, n):
        """See `key_moves`."""
        _check_bound(n)
        if position.turn != chess.WHITE:
            raise ValueError("Key moves are White moves; Black is to move.")
        board = position.board()
        if classify_board(board).is_terminal:
            raise TerminalPositionError(
                "No key in a terminal position: {}".format(position.fen())
            )
        self._reset()
        keys = []
        for move in sorted(board.legal_moves, key=move_order_key):
            board.push(move)
            if self._black_loses(board, n - 1):
                keys.append(move)
            board.pop()
        return tuple(keys)

    def build_tree(self, position, n):
        """See `build_tree`."""
        _check_bound(n)
        board = position.board()
        state = classify_board(board)
        if state.is_terminal:
            raise TerminalPositionError(
                "No solution tree for a terminal position: {}".format(
                    position.fen()
                )
            )
        self._reset()
        dtm = self._dtm(board, n)
        if dtm is None:
            raise NoMateError(
                "No mate within {} moves in {}.".format(n, position.fen())
            )
        if board.turn == chess.WHITE:
            root = self._build_white(board, dtm)
        else:
            root = self._build_black(board, dtm)
        tree = SolutionTree(position.fen(), MateIn(dtm), root)
        logger.debug(
            "Built tree for %s: %d nodes searched", position.fen(), self.nodes
        )
        return tree

    def _build_white(self, board, dtm):
        variations = []
        for move in sorted(board.legal_moves, key=move_order_key):
            san = board.san(move)
            board.push(move)
            if self._black_loses(board, dtm - 1):
                child = self._build_black(board, dtm - 1)
                variations.append(Variation(move, san, child))
            board.pop()
        assert variations, "a node of known DTM must have an optimal move"
        return SolutionNode(
            fen=board.fen(en_passant="fen"),
            white_to_move=True,
            dtm=dtm,
            variations=tuple(variations),
        )

    def _build_black(self, board, bound):
        fen = board.fen(en_passant="fen")
        replies = sorted(board.legal_moves, key=move_order_key)
        if not replies:
            assert board.is_check(), "leaves of a solution tree are mates"
            return SolutionNode(fen=fen, white_to_move=False, dtm=0)
        variations = []
        for move in replies:
            san = board.san(move)
            board.push(move)
            k = self._dtm(board, bound)
            assert k is not None, "every defence must lose within the bound"
            child = self._build_white(board, k)
            variations.append(Variation(move, san, child))
            board.pop()
        dtm = max(v.node.dtm for v in variations)
        principal = next(
            i for i, v in enumerate(variations) if v.node.dtm == dtm
        )
        return SolutionNode(
            fen=fen,
            white_to_move=False,
            dtm=dtm,
            variations=tuple(variations),
            principal=principal,
        )


def _check_bound(n):
    if not 1 <= n <= MAX_MATE_MOVES:
        msg = "Mate bound must be between 1 and {}, got {}.".format(
            MAX_MATE_MOVES, n
        )
        raise ValueError(msg)


# # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # #
# Functional interface


def solve_dtm(p, max_moves, budget=None):
    """Return the `MateResult` of `p` with bound `max_moves`.

    With White to move this is the minimal DTM, if it is at most
    `max_moves`. With Black to move, `max_moves` counts the White moves
    that remain after Black's reply, and the result counts the same.
    A budget overrun is reported as an ``ABORTED`` outcome.
    """
    return MateSolver(budget).solve(p, max_moves)


def key_moves(p, n, budget=None):
    """Return every first move after which White still forces mate within
    ``n - 1`` further moves, in move order. Raises `TerminalPositionError`
    for a checkmated or stalemated input and `SearchAborted` on a budget
    overrun.
    """
    return MateSolver(budget).key_moves(p, n)


def build_tree(p, n, budget=None):
    """Return the `SolutionTree` of `p`, whose DTM must be at most `n`.

    The stipulation of the tree is the actual DTM. Raises `NoMateError` if
    there is no mate within `n` and `SearchAborted` on a budget overrun.
    """
    return MateSolver(budget).build_tree(p, n)
