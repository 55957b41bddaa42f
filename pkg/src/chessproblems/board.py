"""The chess model everything else is built on: positions, legal moves, FEN
and SAN, terminal-state classification and perft.

Move generation, FEN parsing and SAN rendering are delegated to python-chess
(`chess.Board`). This module wraps a board in an immutable `Position`, checks
the validity rules a composed problem has to satisfy, and fixes the move order
to ``(from_square, to_square, promotion)`` so that search traces are
reproducible.

Squares are the python-chess square indices 0-63 (a1 = 0, b1 = 1, ...,
h8 = 63), which is the rank-major order. Moves are `chess.Move` values.
"""
import enum
import re
from collections import namedtuple

import chess

__all__ = [
    "FenError",
    "MalformedFenError",
    "IllegalPositionError",
    "KingCountError",
    "AdjacentKingsError",
    "OppositeCheckError",
    "BackRankPawnError",
    "IllegalMoveError",
    "SanError",
    "AmbiguousSanError",
    "GameState",
    "MoveFlags",
    "Position",
    "parse_fen",
    "emit_fen",
    "legal_moves",
    "apply_move",
    "annotate",
    "move_to_san",
    "parse_san",
    "parse_move",
    "split_movetext",
    "check_position",
    "classify_board",
    "classify",
    "perft",
    "perft_divide",
    "move_order_key",
    "STARTING_FEN",
]

STARTING_FEN = chess.STARTING_FEN

# # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # #
# Errors


class FenError(ValueError):
    """Base class for everything that can go wrong when reading a FEN."""


class MalformedFenError(FenError):
    """A FEN field is syntactically wrong or inconsistent with the board."""


class IllegalPositionError(FenError):
    """The FEN is well formed, but the position it describes is not legal."""


class KingCountError(IllegalPositionError):
    """A side has no king, or more than one."""


class AdjacentKingsError(IllegalPositionError):
    """The two kings stand on neighbouring squares."""


class OppositeCheckError(IllegalPositionError):
    """The side that is not to move is in check."""


class BackRankPawnError(IllegalPositionError):
    """A pawn stands on the first or the last rank."""


class IllegalMoveError(ValueError):
    """A move that is not legal in the position it is applied to."""


class SanError(ValueError):
    """A SAN string that does not describe a legal move."""


class AmbiguousSanError(SanError):
    """A SAN string that matches more than one legal move."""


# # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # #
# Small value types


class GameState(enum.Enum):
    """Classification of a position from the point of view of the side to
    move.
    """

    ONGOING = "ongoing"
    CHECK = "check"
    CHECKMATE = "checkmate"
    STALEMATE = "stalemate"

    @property
    def is_terminal(self):
        return self in (GameState.CHECKMATE, GameState.STALEMATE)


MoveFlags = namedtuple("MoveFlags", ["capture", "check", "checkmate"])
MoveFlags.__doc__ = """Annotations of a move, computed on demand by
`annotate`."""


def move_order_key(move):
    """The sort key of the deterministic move order: from-square, then
    to-square, then promotion piece (no promotion first).
    """
    return (move.from_square, move.to_square, move.promotion or 0)


# # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # #
# Positions


class Position:
    """An immutable chess position.

    A `Position` owns a private `chess.Board` without move history. The board
    is never handed out directly: `board()` returns a fresh copy that the
    caller may mutate freely, so a `Position` can be shared between threads
    and processes without locking.

    Positions compare equal when their FENs are equal, move counters
    included.
    """

    __slots__ = ("_board", "_fen")

    def __init__(self, board, validate=True):
        board = board.copy(stack=False)
        if validate:
            check_position(board)
        self._board = board
        self._fen = board.fen(en_passant="fen")

    @classmethod
    def from_fen(cls, text):
        """Parse a FEN string. See `parse_fen`."""
        return parse_fen(text)

    def board(self):
        """Return a mutable copy of the underlying `chess.Board`."""
        return self._board.copy(stack=False)

    def fen(self):
        return self._fen

    @property
    def turn(self):
        """`chess.WHITE` or `chess.BLACK`."""
        return self._board.turn

    @property
    def castling_rights(self):
        """The four castling flags as ``(K, Q, k, q)`` booleans."""
        b = self._board
        return (
            b.has_kingside_castling_rights(chess.WHITE),
            b.has_queenside_castling_rights(chess.WHITE),
            b.has_kingside_castling_rights(chess.BLACK),
            b.has_queenside_castling_rights(chess.BLACK),
        )

    @property
    def en_passant(self):
        return self._board.ep_square

    @property
    def halfmove_clock(self):
        return self._board.halfmove_clock

    @property
    def fullmove_number(self):
        return self._board.fullmove_number

    def piece_map(self):
        """Return a dict from square to `chess.Piece`."""
        return self._board.piece_map()

    def piece_at(self, square):
        return self._board.piece_at(square)

    def king(self, color):
        return self._board.king(color)

    def is_check(self):
        return self._board.is_check()

    def __eq__(self, other):
        if not isinstance(other, Position):
            return NotImplemented
        return self._fen == other._fen

    def __hash__(self):
        return hash(self._fen)

    def __repr__(self):
        return "Position({!r})".format(self._fen)

    def __str__(self):
        return str(self._board)


def check_position(board):
    """Raise the matching `IllegalPositionError` subclass if `board` breaks
    one of the validity rules of a `Position`, or `MalformedFenError` if its
    castling or en passant fields contradict the piece placement.
    """
    for color, name in ((chess.WHITE, "white"), (chess.BLACK, "black")):
        n_kings = len(board.pieces(chess.KING, color))
        if n_kings != 1:
            msg = "Expected exactly one {} king, found {}.".format(
                name, n_kings
            )
            raise KingCountError(msg)
    wk = board.king(chess.WHITE)
    bk = board.king(chess.BLACK)
    if chess.square_distance(wk, bk) <= 1:
        msg = "Kings on adjacent squares {} and {}.".format(
            chess.square_name(wk), chess.square_name(bk)
        )
        raise AdjacentKingsError(msg)
    if board.pawns & chess.BB_BACKRANKS:
        raise BackRankPawnError("Pawn on the first or last rank.")
    if board.was_into_check():
        side = "white" if not board.turn else "black"
        msg = "The side not to move ({}) is in check.".format(side)
        raise OppositeCheckError(msg)
    for color in chess.COLORS:
        if len(board.pieces(chess.PAWN, color)) > 8:
            raise IllegalPositionError("More than eight pawns of one colour.")
        if chess.popcount(board.occupied_co[color]) > 16:
            raise IllegalPositionError("More than sixteen men of one colour.")
    status = board.status()
    if status & chess.STATUS_BAD_CASTLING_RIGHTS:
        raise MalformedFenError(
            "Castling rights do not match the king and rook placement."
        )
    if status & chess.STATUS_INVALID_EP_SQUARE:
        raise MalformedFenError(
            "En passant square does not follow a double pawn push."
        )


# # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # #
# FEN


def parse_fen(text):
    """Parse a six-field FEN string into a `Position`.

    Raises `MalformedFenError` for syntax problems and one of the
    `IllegalPositionError` subclasses when the position breaks a validity
    rule.
    """
    if not isinstance(text, str):
        raise MalformedFenError("FEN must be a string, not {!r}.".format(text))
    fields = text.split()
    if len(fields) != 6:
        msg = "FEN needs 6 whitespace-separated fields, got {}: {!r}".format(
            len(fields), text
        )
        raise MalformedFenError(msg)
    try:
        board = chess.Board(" ".join(fields))
    except ValueError as e:
        raise MalformedFenError(str(e)) from e
    if int(fields[5]) < 1:
        raise MalformedFenError("Fullmove number must be at least 1.")
    return Position(board)


def emit_fen(p):
    """Return the canonical FEN of `p`.

    The en passant field follows the FEN standard: after a double pawn push
    it names the skipped square, whether or not a capture is possible.
    """
    return p.fen()


# # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # #
# Moves


def _sorted_legal(board):
    return sorted(board.legal_moves, key=move_order_key)


def legal_moves(p):
    """Return the legal moves of `p` as a tuple, in ``(from, to,
    promotion)`` order. Empty exactly when the side to move is checkmated or
    stalemated.
    """
    return tuple(_sorted_legal(p._board))


def apply_move(p, m):
    """Return the position after playing the legal move `m` in `p`."""
    board = p.board()
    if m.from_square == m.to_square or not board.is_legal(m):
        msg = "Move {} is not legal in {}.".format(m.uci(), p.fen())
        raise IllegalMoveError(msg)
    board.push(m)
    # Validity is re-checked in debug builds only; search code never builds
    # Positions for interior nodes.
    return Position(board, validate=__debug__)


def annotate(p, m):
    """Return the `MoveFlags` of the legal move `m` in `p`."""
    board = p.board()
    capture = board.is_capture(m)
    board.push(m)
    check = board.is_check()
    mate = check and board.is_checkmate()
    return MoveFlags(capture=capture, check=check, checkmate=mate)


def move_to_san(p, m):
    """Render the legal move `m` of `p` in SAN, with minimal disambiguation
    and ``+``/``#`` suffixes.
    """
    board = p._board
    if not board.is_legal(m):
        msg = "Move {} is not legal in {}.".format(m.uci(), p.fen())
        raise IllegalMoveError(msg)
    return board.san(m)


def parse_san(p, text):
    """Parse SAN `text` in the context of `p` and return the legal move it
    names.
    """
    board = p.board()
    try:
        move = board.parse_san(text.strip())
    except chess.AmbiguousMoveError as e:
        raise AmbiguousSanError(str(e)) from e
    except ValueError as e:
        raise SanError(str(e)) from e
    if not move:
        # parse_san lets null moves ("--") through.
        raise SanError("Null move {!r} is not a legal move.".format(text))
    return move


def parse_move(p, text):
    """Parse `text` as SAN, falling back to UCI coordinates such as
    ``c1d3``.
    """
    try:
        return parse_san(p, text)
    except SanError as san_error:
        try:
            move = chess.Move.from_uci(text.strip())
        except ValueError:
            raise san_error
        if not p._board.is_legal(move):
            raise san_error
        return move


_MOVE_NUMBER = re.compile(r"^\d+\.+")
_RESULTS = {"1-0", "0-1", "1/2-1/2", "*"}


def split_movetext(text):
    """Split movetext such as ``"1. f3 e5 2. g4 Qh4# 0-1"`` into move
    tokens, dropping move numbers and results. Commas separate too.
    """
    tokens = []
    for token in text.replace(",", " ").split():
        token = _MOVE_NUMBER.sub("", token)
        if token and token not in _RESULTS:
            tokens.append(token)
    return tokens


# # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # #
# Classification and perft


def classify_board(board):
    """`classify` for a raw `chess.Board`, used by the search code."""
    check = board.is_check()
    if any(board.generate_legal_moves()):
        return GameState.CHECK if check else GameState.ONGOING
    return GameState.CHECKMATE if check else GameState.STALEMATE


def classify(p):
    """Return the `GameState` of `p` for the side to move."""
    return classify_board(p._board)


def _perft(board, depth):
    if depth == 0:
        return 1
    if depth == 1:
        return board.legal_moves.count()
    count = 0
    for move in board.generate_legal_moves():
        board.push(move)
        count += _perft(board, depth - 1)
        board.pop()
    return count


def perft(p, depth):
    """Count the leaves of the legal-move tree of `p` at exactly `depth`
    plies.
    """
    if depth < 0:
        msg = "perft depth must be non-negative, got {}".format(depth)
        raise ValueError(msg)
    return _perft(p.board(), depth)


def perft_divide(p, depth):
    """Return a list of ``(move, count)`` pairs, one per legal move of `p`,
    giving the perft count below each move. Useful to pinpoint move
    generation bugs.
    """
    if depth < 1:
        raise ValueError("perft_divide needs depth >= 1, got {}".format(depth))
    board = p.board()
    result = []
    for move in _sorted_legal(board):
        board.push(move)
        result.append((move, _perft(board, depth - 1)))
        board.pop()
    return result
