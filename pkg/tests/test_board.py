"""Tests for the position model: FEN, legality, SAN and move generation."""
import chess
import pytest

from chessproblems.board import (
    AdjacentKingsError,
    AmbiguousSanError,
    BackRankPawnError,
    GameState,
    IllegalMoveError,
    KingCountError,
    MalformedFenError,
    OppositeCheckError,
    SanError,
    annotate,
    apply_move,
    classify,
    emit_fen,
    legal_moves,
    move_order_key,
    move_to_san,
    parse_fen,
    parse_move,
    parse_san,
    perft,
    perft_divide,
    split_movetext,
)

from .conftest import FOUR_KNIGHTS_FEN
from .naive_movegen import legal_uci, naive_perft

START_FEN = chess.STARTING_FEN
KIWIPETE_FEN = (
    "r3k2r/p1ppqpb1/bn2pnp1/3PN3/1p2P3/2N2Q1p/PPPBBPPP/R3K2R w KQkq - 0 1"
)
# Positions exercising castling through attacked squares, en passant,
# promotion with capture and en passant discovering check on the own king.
SPECIAL_FENS = [
    KIWIPETE_FEN,
    "8/2p5/3p4/KP5r/1R3p1k/8/4P1P1/8 w - - 0 1",
    "r3k2r/Pppp1ppp/1b3nbN/nP6/BBP1P3/q4N2/Pp1P2PP/R2Q1RK1 w kq - 0 1",
    "rnbq1k1r/pp1Pbppp/2p5/8/2B5/8/PPP1NnPP/RNBQK2R w KQ - 1 8",
    "8/8/8/2k5/3pP3/8/8/4K3 b - e3 0 1",
    "8/8/8/8/k2Pp2Q/8/8/3K4 b - d3 0 1",
]


def play(fen, *sans):
    p = parse_fen(fen)
    for san in sans:
        p = apply_move(p, parse_san(p, san))
    return p


# # # # # # # # # # # # # # # # # # # #
# FEN


def test_fen_round_trip():
    """Parsing and emitting a FEN gives back the same text."""
    for fen in (FOUR_KNIGHTS_FEN, START_FEN, KIWIPETE_FEN):
        assert emit_fen(parse_fen(fen)) == fen


def test_fen_en_passant_field():
    """The en passant square is written after every double push, as in
    standard FEN.
    """
    p = play(START_FEN, "e4")
    assert emit_fen(p).split()[3] == "e3"


@pytest.mark.parametrize(
    "fen, error",
    [
        ("not a fen", MalformedFenError),
        ("4k3/8/8/8/8/8/8/4K3 w - - 0", MalformedFenError),
        ("4k3/8/8/8/8/8/8/4K3 w - - 0 0", MalformedFenError),
        ("4k3/8/8/8/8/8/8/4K3 w K - 0 1", MalformedFenError),
        ("4k3/8/8/8/8/8/8/4K3 w - e3 0 1", MalformedFenError),
        ("8/8/8/8/8/8/8/4K3 w - - 0 1", KingCountError),
        ("4k3/8/8/8/8/8/8/3KK3 w - - 0 1", KingCountError),
        ("8/8/8/8/8/8/3k4/4K3 w - - 0 1", AdjacentKingsError),
        ("4k3/8/8/8/8/8/8/4R1K1 w - - 0 1", OppositeCheckError),
        ("4k3/8/8/8/8/8/8/P3K3 w - - 0 1", BackRankPawnError),
        ("p3k3/8/8/8/8/8/8/4K3 w - - 0 1", BackRankPawnError),
    ],
)
def test_invalid_fens(fen, error):
    with pytest.raises(error):
        parse_fen(fen)


def test_position_is_immutable():
    """Mutating the board handed out by a position does not change it."""
    p = parse_fen(FOUR_KNIGHTS_FEN)
    board = p.board()
    board.push(chess.Move.from_uci("c1e2"))
    assert emit_fen(p) == FOUR_KNIGHTS_FEN
    assert p == parse_fen(FOUR_KNIGHTS_FEN)


# # # # # # # # # # # # # # # # # # # #
# Moves and SAN


def test_legal_moves_order(n_iters, rposition):
    """Legal moves come sorted by from-square, to-square and promotion."""
    for iter_num in range(n_iters):
        p = rposition("KRBNP", "KQP")
        moves = legal_moves(p)
        assert list(moves) == sorted(moves, key=move_order_key)


def test_legal_moves_against_naive(n_iters, rposition):
    """The legal move sets of random positions agree with the naive mailbox
    generator.
    """
    for iter_num in range(n_iters):
        p = rposition("KQRBNPP", "KRNPP")
        ours = {m.uci() for m in legal_moves(p)}
        assert ours == legal_uci(emit_fen(p))


@pytest.mark.parametrize("fen", SPECIAL_FENS)
def test_special_moves_against_naive(fen):
    p = parse_fen(fen)
    assert {m.uci() for m in legal_moves(p)} == legal_uci(fen)


def test_san():
    p = parse_fen(FOUR_KNIGHTS_FEN)
    key = parse_san(p, "Ne2")
    assert key.uci() == "c1e2"
    assert move_to_san(p, key) == "Ne2"
    assert parse_san(p, "Ncd3").uci() == "c1d3"
    with pytest.raises(AmbiguousSanError):
        parse_san(p, "Nd3")
    for text in ("Zz9", "Ke8", "--", ""):
        with pytest.raises(SanError):
            parse_san(p, text)


def test_parse_move_uci_fallback():
    p = parse_fen(FOUR_KNIGHTS_FEN)
    assert parse_move(p, "c1d3").uci() == "c1d3"
    with pytest.raises(SanError):
        parse_move(p, "c1c3")


def test_apply_illegal_move():
    p = parse_fen(FOUR_KNIGHTS_FEN)
    with pytest.raises(IllegalMoveError):
        apply_move(p, chess.Move.from_uci("c1c3"))
    with pytest.raises(IllegalMoveError):
        move_to_san(p, chess.Move.from_uci("c1c3"))
    with pytest.raises(IllegalMoveError):
        apply_move(p, chess.Move(chess.F2, chess.F2))


def test_annotate():
    p = parse_fen(FOUR_KNIGHTS_FEN)
    flags = annotate(p, parse_san(p, "Ne2"))
    assert not flags.capture and not flags.check and not flags.checkmate
    p = apply_move(p, parse_san(p, "Ne2"))
    flags = annotate(p, parse_san(p, "Qxg2+"))
    assert flags.capture and flags.check and not flags.checkmate


def test_split_movetext():
    assert split_movetext("1. f3 e5 2. g4 Qh4# 0-1") == [
        "f3",
        "e5",
        "g4",
        "Qh4#",
    ]
    assert split_movetext("1.e4, e5 2...Nf6 *") == ["e4", "e5", "Nf6"]
    assert split_movetext("") == []


# # # # # # # # # # # # # # # # # # # #
# Classification


def test_classify():
    assert classify(parse_fen(START_FEN)) is GameState.ONGOING
    assert classify(play(START_FEN, "e4", "f5", "Qh5+")) is GameState.CHECK
    mated = play(START_FEN, "f3", "e5", "g4", "Qh4#")
    assert classify(mated) is GameState.CHECKMATE
    assert not legal_moves(mated)
    stalemate = parse_fen("7k/5Q2/6K1/8/8/8/8/8 b - - 0 1")
    assert classify(stalemate) is GameState.STALEMATE
    assert GameState.STALEMATE.is_terminal
    assert not GameState.CHECK.is_terminal


# # # # # # # # # # # # # # # # # # # #
# Perft


@pytest.mark.parametrize(
    "fen, depth, count",
    [
        (START_FEN, 1, 20),
        (START_FEN, 2, 400),
        (START_FEN, 3, 8902),
        (START_FEN, 4, 197281),
        (KIWIPETE_FEN, 1, 48),
        (KIWIPETE_FEN, 2, 2039),
    ],
)
def test_perft_known_counts(fen, depth, count):
    assert perft(parse_fen(fen), depth) == count


def test_perft_edge_cases():
    p = parse_fen(START_FEN)
    assert perft(p, 0) == 1
    with pytest.raises(ValueError):
        perft(p, -1)
    with pytest.raises(ValueError):
        perft_divide(p, 0)
    divide = perft_divide(p, 2)
    assert len(divide) == 20
    assert sum(count for _, count in divide) == 400


def test_perft_against_naive(n_iters, rposition):
    """Perft to depth 2 of random positions agrees with the naive mailbox
    generator.
    """
    for iter_num in range(n_iters):
        p = rposition("KRBNPP", "KQNP")
        assert perft(p, 2) == naive_perft(emit_fen(p), 2)


@pytest.mark.parametrize("fen", SPECIAL_FENS)
def test_special_perft_against_naive(fen):
    assert perft(parse_fen(fen), 2) == naive_perft(fen, 2)


@pytest.mark.extended
def test_deep_perft_against_naive(rposition):
    """Perft to depth 4 of the initial position and of twenty random
    positions agrees with the naive mailbox generator.
    """
    assert naive_perft(START_FEN, 4) == 197281
    for iter_num in range(20):
        p = rposition("KRBNPP", "KQNP")
        assert perft(p, 4) == naive_perft(emit_fen(p), 4)
