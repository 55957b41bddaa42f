"""A small aesthetic scorer for solved problems.

The score is a weighted sum of features that problem composers care about:
a quiet key, sacrifices, few variations, few duals, geometric patterns in
the mate position, economy of the mating force, and the length of the main
line. Variations and duals are penalties and enter the sum negatively. The
weights are plain numbers, loadable from a settings file; the defaults put
typical five-movers in the 2.5-3.5 range.

Scores are computed relative to a main line. `select_main_line` picks the
root-to-leaf line with the highest line score, and `score` reports the
features of the tree with that line as its main line.
"""
import itertools as itt
from collections import Counter
from dataclasses import dataclass, fields, astuple

import numpy as np
import chess

from .config import read_settings, section

__all__ = [
    "FeatureBreakdown",
    "ScoreWeights",
    "PIECE_VALUES",
    "score",
    "line_breakdown",
    "line_score",
    "select_main_line",
    "weighted_total",
]

PIECE_VALUES = {
    chess.PAWN: 1,
    chess.KNIGHT: 3,
    chess.BISHOP: 3,
    chess.ROOK: 5,
    chess.QUEEN: 9,
    chess.KING: 0,
}

# Relative tolerance for calling two line scores equal.
_TIE_RTOL = 1e-9


@dataclass(frozen=True)
class FeatureBreakdown:
    """The individual features of a score. All are finite and >= 0.

    `dual_penalty` counts the non-leaf White nodes after the key with more
    than one optimal move. Alternatives at the root are cooks, which the
    conventions judge, and are not counted.
    """

    quiet_key: float = 0.0
    sacrifice_count: float = 0.0
    variation_penalty: float = 0.0
    dual_penalty: float = 0.0
    geometry_line: float = 0.0
    geometry_triangle: float = 0.0
    economy: float = 0.0
    mainline_length: float = 0.0

    def as_array(self):
        return np.array(astuple(self), dtype=float)

    def contributions(self, w):
        """Return a dict of the signed, weighted contribution of each
        feature. They sum to the total.
        """
        signed = _signs() * w.as_array() * self.as_array()
        return {f.name: float(c) for f, c in zip(fields(self), signed)}

    def to_dict(self):
        return {f.name: float(getattr(self, f.name)) for f in fields(self)}


_PENALTIES = ("variation_penalty", "dual_penalty")


def _signs():
    return np.array(
        [
            -1.0 if f.name in _PENALTIES else 1.0
            for f in fields(FeatureBreakdown)
        ]
    )


@dataclass(frozen=True)
class ScoreWeights:
    """One non-negative weight per feature of `FeatureBreakdown`."""

    quiet_key: float = 1.0
    sacrifice_count: float = 0.5
    variation_penalty: float = 0.25
    dual_penalty: float = 0.05
    geometry_line: float = 0.25
    geometry_triangle: float = 0.5
    economy: float = 1.0
    mainline_length: float = 0.1

    def __post_init__(self):
        values = astuple(self)
        if any(not np.isfinite(v) or v < 0 for v in values):
            raise ValueError("Score weights must be finite and non-negative.")
        if not any(v > 0 for v in values):
            raise ValueError("At least one score weight must be positive.")

    def as_array(self):
        return np.array(astuple(self), dtype=float)

    def scaled(self, factor):
        """Return the weights multiplied by `factor`."""
        return type(self)(*(factor * v for v in astuple(self)))

    @classmethod
    def from_settings(cls, settings):
        """Build weights from a settings dict (``aesthetics.<name>`` or bare
        ``<name>`` keys), starting from the defaults.
        """
        known = {f.name for f in fields(cls)}
        return cls(**section(settings, "aesthetics", known))

    @classmethod
    def from_file(cls, path):
        return cls.from_settings(read_settings(path))


def weighted_total(breakdown, w):
    """The signed weighted sum of `breakdown` under `w`."""
    return float(np.dot(_signs() * w.as_array(), breakdown.as_array()))


# # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # #
# Features of single positions and moves


def _is_sacrifice(board, reply):
    """Black's `reply` in `board` captures a White man that stood en prise:
    undefended, or worth more than the capturing piece.
    """
    if not board.is_capture(reply) or board.is_en_passant(reply):
        return False
    victim = board.piece_at(reply.to_square)
    if victim is None or victim.color != chess.WHITE:
        return False
    if victim.piece_type == chess.KING:
        return False
    attacker = board.piece_at(reply.from_square)
    defended = bool(board.attackers_mask(chess.WHITE, reply.to_square))
    if not defended:
        return True
    return PIECE_VALUES[attacker.piece_type] < PIECE_VALUES[victim.piece_type]


def _collinear_lines(board):
    """Count files, ranks and diagonals holding three or more men."""
    counts = Counter()
    for sq in board.piece_map():
        f, r = chess.square_file(sq), chess.square_rank(sq)
        counts["f", f] += 1
        counts["r", r] += 1
        counts["d", f - r] += 1
        counts["a", f + r] += 1
    return sum(1 for c in counts.values() if c >= 3)


def _triangle(board):
    """1 if three White minor pieces within two squares of the mated king
    form an isosceles triangle, else 0.
    """
    king = board.king(chess.BLACK)
    if king is None:
        return 0
    minors = [
        sq
        for sq in board.pieces(chess.KNIGHT, chess.WHITE)
        | board.pieces(chess.BISHOP, chess.WHITE)
        if chess.square_distance(sq, king) <= 2
    ]
    for a, b, c in itt.combinations(minors, 3):
        pa, pb, pc = (
            np.array([chess.square_file(s), chess.square_rank(s)])
            for s in (a, b, c)
        )
        # Collinear triples are not triangles.
        u, v = pb - pa, pc - pa
        if u[0] * v[1] - u[1] * v[0] == 0:
            continue
        d_ab = int(np.sum((pa - pb) ** 2))
        d_bc = int(np.sum((pb - pc) ** 2))
        d_ca = int(np.sum((pc - pa) ** 2))
        if d_ab == d_bc or d_bc == d_ca or d_ca == d_ab:
            return 1
    return 0


def _economy(board):
    """Fraction of White men that give check or guard a flight square of
    the Black king.
    """
    king = board.king(chess.BLACK)
    white = list(board.pieces(chess.KING, chess.WHITE))
    for pt in chess.PIECE_TYPES[:-1]:
        white.extend(board.pieces(pt, chess.WHITE))
    if king is None or not white:
        return 0.0
    targets = chess.SquareSet(chess.BB_KING_ATTACKS[king]) - chess.SquareSet(
        board.occupied_co[chess.BLACK]
    )
    targets.add(king)
    # Attacks are taken with the Black king removed, so that guards on the
    # far side of the king count.
    occupied = board.occupied & ~chess.BB_SQUARES[king]
    active = 0
    for sq in white:
        if any(
            sq in board.attackers(chess.WHITE, t, occupied) for t in targets
        ):
            active += 1
    return active / len(white)


# # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # #
# Scoring lines and trees


class _TreeFeatures:
    """Caches per-node features of one tree while lines are scored."""

    def __init__(self, tree):
        self.tree = tree
        self._sacrifice = {}
        self._leaf = {}
        self.variation_penalty = _variation_penalty(tree)

    def sacrifice(self, black_node, v):
        key = (id(black_node), v.move)
        if key not in self._sacrifice:
            board = chess.Board(black_node.fen)
            self._sacrifice[key] = _is_sacrifice(board, v.move)
        return self._sacrifice[key]

    def leaf(self, node):
        if id(node) not in self._leaf:
            board = chess.Board(node.fen)
            self._leaf[id(node)] = (
                _collinear_lines(board),
                _triangle(board),
                _economy(board),
            )
        return self._leaf[id(node)]


def _variation_penalty(tree):
    """log2(1 + number of distinct White answers to the first defences)."""
    node = tree.root
    if node.white_to_move:
        if node.is_leaf:
            return 0.0
        node = node.principal_variation().node
    answers = {
        tuple(r.san for r in v.node.variations) for v in node.variations
    }
    return float(np.log2(1 + len(answers)))


def _line_features(tf, line, duals):
    tree = tf.tree
    quiet = 0.0
    if tree.root.white_to_move and line:
        san = line[0].san
        quiet = 0.0 if ("x" in san or san[-1] in "+#") else 1.0
    sacrifices = 0
    node = tree.root
    for v in line:
        if not node.white_to_move:
            sacrifices += tf.sacrifice(node, v)
        node = v.node
    lines, triangle, economy = tf.leaf(node)
    return FeatureBreakdown(
        quiet_key=quiet,
        sacrifice_count=float(sacrifices),
        variation_penalty=tf.variation_penalty,
        dual_penalty=float(duals),
        geometry_line=float(lines),
        geometry_triangle=float(triangle),
        economy=float(economy),
        mainline_length=float(len(line)),
    )


def _line_duals(tree, line):
    count = 0
    node = tree.root
    for v in line:
        if node.white_to_move and node is not tree.root:
            count += len(node.variations) > 1
        node = v.node
    return count


def line_breakdown(tree, line, _tf=None):
    """Features of `line` alone: duals are counted along the line only."""
    tf = _tf or _TreeFeatures(tree)
    return _line_features(tf, line, _line_duals(tree, line))


def line_score(tree, line, w, _tf=None):
    """The per-line score used to pick the main line."""
    return weighted_total(line_breakdown(tree, line, _tf), w)


def _better(a, b):
    """Is candidate `a` = ``(score, line)`` preferred over `b`?"""
    sa, la = a
    sb, lb = b
    scale = max(abs(sa), abs(sb))
    if abs(sa - sb) > _TIE_RTOL * scale:
        return sa > sb
    if len(la) != len(lb):
        return len(la) > len(lb)
    return tuple(v.san for v in la) < tuple(v.san for v in lb)


def select_main_line(tree, w=None):
    """Return the root-to-leaf line (a tuple of `Variation`s) with the
    highest line score. Ties go to the longer line, then to the
    lexicographically smaller SAN sequence.
    """
    w = w or ScoreWeights()
    tf = _TreeFeatures(tree)
    best = None
    for line in tree.lines():
        cand = (line_score(tree, line, w, tf), line)
        if best is None or _better(cand, best):
            best = cand
    return best[1]


def score(tree, w=None, line=None):
    """Score `tree` and return ``(total, breakdown)``.

    The main line is `line` if given, else `select_main_line(tree, w)`.
    Duals are counted over the whole tree, the other features along the
    main line.
    """
    w = w or ScoreWeights()
    tf = _TreeFeatures(tree)
    if line is None:
        line = select_main_line(tree, w)
    duals = sum(
        1
        for node in tree.nodes()
        if node.white_to_move
        and node is not tree.root
        and len(node.variations) > 1
    )
    breakdown = _line_features(tf, line, duals)
    return weighted_total(breakdown, w), breakdown
