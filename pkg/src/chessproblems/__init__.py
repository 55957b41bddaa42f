__version__ = "0.1.0"

from .board import Position, parse_fen, emit_fen, legal_moves, apply_move
from .board import parse_san, move_to_san, classify, perft, GameState
from .solver import MateIn, MateSolver, SearchBudget, SolutionTree
from .solver import solve_dtm, key_moves, build_tree
from .conventions import ConventionConfig, evaluate, embedded_problems
from .aesthetics import ScoreWeights, score, select_main_line
from .substrate import AttributeVector, Substrate, combine
from .composer import PieceSetSpec, ComposerConfig, compose_step, run
from .archive import Archive
