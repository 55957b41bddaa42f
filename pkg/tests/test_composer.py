"""Tests for the composer loop, its records and the archive."""
import json
from collections import Counter
from dataclasses import replace
from datetime import datetime, timedelta, timezone

import chess
import numpy as np
import pytest

from chessproblems.archive import Archive, ArchiveError, render_local_time
from chessproblems.board import apply_move, parse_fen, parse_san
from chessproblems.composer import (
    ComposerConfig,
    ComposerState,
    CompositionRecord,
    PieceSetError,
    PieceSetSpec,
    Rejection,
    RunStatistics,
    SamplingSettings,
    _en_prise,
    _en_prise_squares,
    candidate_rng,
    compose_step,
    dedup_key,
    run,
    sample_position,
    verify_record,
)
from chessproblems.config import parse_settings
from chessproblems.conventions import ConventionConfig
from chessproblems.solver import MateIn, SearchBudget
from chessproblems.substrate import AttributeVector, Substrate

from .conftest import FOUR_KNIGHTS_FEN, TWO_KEYS_FEN

LENIENT = ConventionConfig(False, False, False)

# # # # # # # # # # # # # # # # # # # #
# Utilities that tests use


EPOCH = datetime(2017, 8, 23, 11, 51, 51, tzinfo=timezone.utc)


def fixed_clock(start=EPOCH):
    """A clock that advances by one second per call."""
    calls = []

    def _clock():
        calls.append(None)
        return start + timedelta(seconds=len(calls) - 1)

    return _clock


def small_config(**kwargs):
    """A quick run: king, queen and rook against king, mates in 1 or 2, all
    conventions off.
    """
    settings = dict(
        piece_set=PieceSetSpec.parse("KQR", "K"),
        goals=(1, 2),
        conventions=LENIENT,
        max_candidates=150,
        per_solve=SearchBudget(max_nodes=50_000, max_seconds=10.0),
        seed=2017,
        location_label="test",
    )
    settings.update(kwargs)
    return ComposerConfig(**settings)


def men(p):
    return Counter(
        (piece.color, piece.piece_type) for piece in p.piece_map().values()
    )


class InterruptingSubstrate:
    """Raises KeyboardInterrupt on the `after`th draw."""

    def __init__(self, after):
        self.after = after
        self.draws = 0

    def __bool__(self):
        return True

    def draw(self, rng):
        self.draws += 1
        if self.draws >= self.after:
            raise KeyboardInterrupt
        return None


class BrokenArchive:
    def keys(self, symmetric=False):
        return set()

    def append(self, record, key=None):
        raise ArchiveError("disk full")


# # # # # # # # # # # # # # # # # # # #
# Piece sets and sampling


def test_piece_sets():
    spec = PieceSetSpec.parse("KNNNN", "KQ")
    assert spec == PieceSetSpec.from_string("KNNNNvKQ")
    assert spec == PieceSetSpec.from_string("nnnnkvqk")
    assert str(spec) == "KNNNNvKQ"
    assert len(spec.pieces()) == 7
    assert spec.pieces()[0] == chess.Piece(chess.KING, chess.WHITE)


@pytest.mark.parametrize(
    "white, black",
    [
        ("NNNN", "K"),
        ("KK", "K"),
        ("KX", "K"),
        ("K" + "N" * 11, "K"),
        ("K" + "P" * 9, "K"),
        ("K" + "Q" * 2 + "P" * 8, "K"),
        ("K", "KPPPPPPPPRRNNBBQQ"),
    ],
)
def test_bad_piece_sets(white, black):
    with pytest.raises(PieceSetError):
        PieceSetSpec.parse(white, black)


def test_bad_piece_set_string():
    with pytest.raises(PieceSetError):
        PieceSetSpec.from_string("KQK")


def test_samples_have_the_right_men(n_iters, rng):
    spec = PieceSetSpec.parse("KNNNN", "KQ")
    expected = Counter(
        (piece.color, piece.piece_type) for piece in spec.pieces()
    )
    accepted = 0
    for iter_num in range(50 * n_iters):
        p = sample_position(spec, None, rng)
        if isinstance(p, Rejection):
            continue
        accepted += 1
        assert p.turn == chess.WHITE
        assert men(p) == expected
        assert chess.square_distance(p.king(True), p.king(False)) > 1
        assert not p.board().was_into_check()
    assert accepted > 0


def test_rejections(rng):
    """Every reason to reject shows up, and pawns never land on the back
    ranks.
    """
    spec = PieceSetSpec.parse("KQPPPP", "KRR")
    reasons = Counter()
    for _ in range(2000):
        p = sample_position(spec, None, rng, en_prise_filter=True)
        if isinstance(p, Rejection):
            reasons[p] += 1
        else:
            assert not p.board().pawns & chess.BB_BACKRANKS
    assert set(reasons) == set(Rejection)


def test_en_prise_filter(n_iters, rng):
    """With the filter on, no White man can be taken for profit."""
    spec = PieceSetSpec.parse("KQRN", "KRB")
    values = {
        chess.PAWN: 1,
        chess.KNIGHT: 3,
        chess.BISHOP: 3,
        chess.ROOK: 5,
        chess.QUEEN: 9,
    }
    found = 0
    for _ in range(100 * n_iters):
        p = sample_position(spec, None, rng, en_prise_filter=True)
        if isinstance(p, Rejection):
            continue
        found += 1
        board = p.board()
        for sq, piece in board.piece_map().items():
            if piece.color != chess.WHITE or piece.piece_type == chess.KING:
                continue
            attackers = board.attackers(chess.BLACK, sq)
            if not attackers:
                continue
            assert board.is_attacked_by(chess.WHITE, sq)
            capturers = [a for a in attackers if a != board.king(chess.BLACK)]
            if not capturers:
                continue
            cheapest = min(values[board.piece_type_at(a)] for a in capturers)
            assert cheapest >= values[piece.piece_type]
    assert found > 0


def test_en_prise_ignores_king_on_defended_men():
    """The Black king next to a defended man does not make it en prise."""
    # Ng2 stands next to the king but is guarded; Nc1 hangs to the queen
    board = chess.Board(FOUR_KNIGHTS_FEN)
    assert _en_prise_squares(board) == [chess.C1]
    board.remove_piece_at(chess.C1)
    assert not _en_prise(board)
    assert not _en_prise(chess.Board("8/8/8/8/8/5k2/6N1/6K1 w - - 0 1"))
    # undefended, the king takes it
    assert _en_prise(chess.Board("8/8/8/8/8/5k2/6N1/K7 w - - 0 1"))
    # defended, but a pawn takes a knight at a profit
    assert _en_prise(chess.Board("8/8/8/8/8/5kp1/7N/6K1 w - - 0 1"))


def test_bias_moves_centroid(rng):
    """A bias towards the corner pulls the men towards it."""
    spec = PieceSetSpec.parse("KQRB", "KR")
    bias = AttributeVector(0.0, 6.0, 0.5, 0.0, 0.0, 4.0, 0.5)

    def mean_distance(b):
        distances = []
        while len(distances) < 200:
            p = sample_position(spec, b, rng)
            if isinstance(p, Rejection):
                continue
            squares = list(p.piece_map())
            files = np.mean([chess.square_file(s) for s in squares])
            ranks = np.mean([chess.square_rank(s) for s in squares])
            distances.append(np.hypot(files, ranks))
        return np.mean(distances)

    assert mean_distance(bias) < mean_distance(None) - 1.0


def test_candidate_rng():
    a = candidate_rng(5, 3).integers(1 << 30, size=4)
    b = candidate_rng(5, 3).integers(1 << 30, size=4)
    c = candidate_rng(5, 4).integers(1 << 30, size=4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_sampling_settings():
    s = SamplingSettings.from_settings(parse_settings("sampling.floor = 0.5"))
    assert s.floor == 0.5
    with pytest.raises(ValueError):
        SamplingSettings(spread_min=5.0, spread_max=1.0)


# # # # # # # # # # # # # # # # # # # #
# Dedup keys


def test_dedup_key():
    p = parse_fen(FOUR_KNIGHTS_FEN)
    later = parse_fen(FOUR_KNIGHTS_FEN.replace("0 1", "12 40"))
    assert dedup_key(p) == dedup_key(later)
    assert dedup_key(p) == "8/8/8/4N3/8/4N2k/5KN1/2N4q w"
    mirrored = parse_fen("2n4Q/5kn1/4n2K/8/4n3/8/8/8 b - - 0 1")
    assert dedup_key(mirrored) != dedup_key(p)
    assert dedup_key(mirrored, True) == dedup_key(p, True)
    flipped = parse_fen("8/8/8/3N4/8/k2N4/1NK5/q4N2 w - - 0 1")
    assert dedup_key(flipped, True) == dedup_key(p, True)


def test_dedup_key_with_pawns():
    """With pawns the board may be reflected left to right, but not turned
    upside down without also swapping the colours and the side to move.
    """
    p = parse_fen("4k3/8/8/8/8/8/4P3/3K4 w - - 0 1")
    reflected = parse_fen("3k4/8/8/8/8/8/3P4/4K3 w - - 0 1")
    upside_down = parse_fen("3k4/4p3/8/8/8/8/8/4K3 w - - 0 1")
    assert dedup_key(p, True) == dedup_key(reflected, True)
    assert dedup_key(p, True) != dedup_key(upside_down, True)


# # # # # # # # # # # # # # # # # # # #
# Configuration


def test_config_defaults():
    cfg = ComposerConfig(PieceSetSpec.parse("KNNNN", "KQ"))
    assert cfg.goals == (MateIn(3), MateIn(4), MateIn(5))
    assert cfg.conventions == ConventionConfig()
    assert cfg.min_aesthetics is None
    cfg = ComposerConfig(cfg.piece_set, goals=(5, MateIn(3)))
    assert cfg.goals == (MateIn(3), MateIn(5))


@pytest.mark.parametrize(
    "kwargs",
    [
        {"goals": ()},
        {"goals": (0,)},
        {"max_candidates": -1},
        {"max_wall_seconds": 0},
        {"seed": -1},
    ],
)
def test_bad_config(kwargs):
    with pytest.raises(ValueError):
        ComposerConfig(PieceSetSpec.parse("KQ", "K"), **kwargs)


def test_config_from_settings():
    settings = parse_settings(
        "aesthetics.economy = 2\nsampling.floor = 0.1\nsubstrate.noise = 0\n"
    )
    cfg = ComposerConfig.from_settings(
        PieceSetSpec.parse("KQ", "K"), settings, seed=3
    )
    assert cfg.weights.economy == 2.0
    assert cfg.sampling.floor == 0.1
    assert cfg.substrate.noise == 0.0
    assert cfg.seed == 3


# # # # # # # # # # # # # # # # # # # #
# Single steps


def test_compose_step_four_knights(four_knights):
    """Forcing the four-knights position gives a mate-in-5 record that
    re-verifies.
    """
    cfg = ComposerConfig(
        PieceSetSpec.parse("KNNNN", "KQ"),
        goals=(5,),
        per_solve=SearchBudget(),
    )
    state = ComposerState(cfg, clock=fixed_clock())
    record = compose_step(state, four_knights)
    assert record is not None
    assert record.fen == FOUR_KNIGHTS_FEN
    assert record.stipulation == MateIn(5)
    assert record.main_line[0] == "Ne2"
    assert record.utc_timestamp == "2017-08-23T11:51:51Z"
    assert record.convention_report.passed
    assert state.stats.emitted == 1
    assert verify_record(record, weights=cfg.weights) == []
    # The same position again is a duplicate.
    assert compose_step(state, four_knights) is None
    assert state.stats.rejections["duplicate"] == 1


def test_compose_step_wrong_length():
    """A mate in 2 is not emitted when only mates in 3 are wanted."""
    cfg = ComposerConfig(
        PieceSetSpec.parse("KRR", "K"), goals=(3,), conventions=LENIENT
    )
    state = ComposerState(cfg)
    assert compose_step(state, parse_fen(TWO_KEYS_FEN)) is None
    assert state.stats.rejections["goal_mismatch"] == 1
    assert state.stats.solved == 1


def test_compose_step_conventions():
    cfg = ComposerConfig(PieceSetSpec.parse("KRR", "K"), goals=(2,))
    state = ComposerState(cfg)
    assert compose_step(state, parse_fen(TWO_KEYS_FEN)) is None
    assert state.stats.convention_failures == 1
    lenient = ComposerState(replace(cfg, conventions=LENIENT))
    assert compose_step(lenient, parse_fen(TWO_KEYS_FEN)) is not None


def test_compose_step_aesthetics_gate():
    cfg = ComposerConfig(
        PieceSetSpec.parse("KRR", "K"),
        goals=(2,),
        conventions=LENIENT,
        min_aesthetics=1e6,
    )
    state = ComposerState(cfg)
    assert compose_step(state, parse_fen(TWO_KEYS_FEN)) is None
    assert state.stats.rejections["aesthetics"] == 1


def test_compose_step_black_to_move():
    cfg = small_config()
    p = parse_fen(FOUR_KNIGHTS_FEN)
    p = apply_move(p, parse_san(p, "Ne2"))
    with pytest.raises(ValueError):
        compose_step(ComposerState(cfg), p)


def test_verify_tampered_record():
    cfg = ComposerConfig(
        PieceSetSpec.parse("KRR", "K"), goals=(2,), conventions=LENIENT
    )
    record = compose_step(ComposerState(cfg), parse_fen(TWO_KEYS_FEN))
    assert verify_record(record) == []
    wrong = replace(record, stipulation=MateIn(3))
    assert verify_record(wrong)
    rescored = replace(record, aesthetics_score=record.aesthetics_score + 1)
    assert verify_record(rescored, weights=cfg.weights)
    assert verify_record(replace(record, fen="nonsense"))


def test_record_dict_round_trip():
    cfg = ComposerConfig(
        PieceSetSpec.parse("KRR", "K"), goals=(2,), conventions=LENIENT
    )
    state = ComposerState(cfg, clock=fixed_clock())
    record = compose_step(state, parse_fen(TWO_KEYS_FEN))
    d = json.loads(json.dumps(record.to_dict()))
    assert CompositionRecord.from_dict(d) == record


# # # # # # # # # # # # # # # # # # # #
# Runs


def test_zero_candidates(tmp_path):
    archive = Archive(tmp_path)
    stats = run(small_config(max_candidates=0), archive)
    assert stats.candidates == 0 and stats.emitted == 0
    assert stats.emissions_per_candidate == 0.0
    assert len(archive) == 0


def test_run_is_deterministic(tmp_path):
    """Two runs with the same seed and clock write identical archives."""
    cfg = small_config()
    first = Archive(tmp_path / "a")
    second = Archive(tmp_path / "b")
    s1 = run(cfg, first, clock=fixed_clock())
    s2 = run(cfg, second, clock=fixed_clock())
    assert s1.to_dict() == s2.to_dict()
    assert s1.candidates == cfg.max_candidates
    assert s1.emitted > 0
    assert first.records_path.read_bytes() == second.records_path.read_bytes()
    records = first.records()
    assert len(records) == s1.emitted
    keys = [dedup_key(r.position()) for r in records]
    assert len(set(keys)) == len(keys)
    for r in records:
        assert r.stipulation in cfg.goals
        assert r.location_label == "test"
        assert verify_record(r, weights=cfg.weights) == []


def test_run_continues_archive(tmp_path):
    """A second run into the same archive emits nothing it already has."""
    cfg = small_config()
    archive = Archive(tmp_path)
    first = run(cfg, archive)
    again = run(cfg, Archive(tmp_path))
    assert again.emitted == 0
    assert again.rejections["duplicate"] == (
        first.emitted + first.rejections["duplicate"]
    )
    assert len(Archive(tmp_path)) == first.emitted


def test_run_repairs_short_index(tmp_path):
    """A record whose key never reached the index is not emitted again."""
    cfg = small_config(max_candidates=60)
    first = run(cfg, Archive(tmp_path))
    assert first.emitted > 1
    index = Archive(tmp_path).index_path
    lines = index.read_text().splitlines(keepends=True)
    index.write_text("".join(lines[:-1]))
    again = run(cfg, Archive(tmp_path))
    assert again.emitted == 0
    archive = Archive(tmp_path)
    keys = [dedup_key(r.position()) for r in archive.records()]
    assert len(keys) == len(set(keys)) == first.emitted
    assert archive.keys() == set(keys)


def test_symmetric_run_rebuilds_plain_index(tmp_path):
    cfg = small_config(max_candidates=60)
    run(cfg, Archive(tmp_path))
    archive = Archive(tmp_path)
    records = archive.records()
    assert archive.keys() == {dedup_key(r.position()) for r in records}
    symmetric = {dedup_key(r.position(), True) for r in records}
    assert archive.keys(True) == symmetric
    assert Archive(tmp_path).keys(True) == symmetric
    assert archive.index_path.read_text().startswith("# symmetric\n")
    again = run(replace(cfg, symmetric_dedup=True), Archive(tmp_path))
    assert again.emitted == 0


def test_parallel_matches_sequential(tmp_path):
    cfg = small_config(max_candidates=60)
    sequential = Archive(tmp_path / "seq")
    parallel = Archive(tmp_path / "par")
    s1 = run(cfg, sequential, clock=fixed_clock())
    s2 = run(cfg, parallel, workers=2, clock=fixed_clock())
    assert s1.to_dict() == s2.to_dict()
    assert (
        sequential.records_path.read_bytes()
        == parallel.records_path.read_bytes()
    )


def test_interrupted_run(tmp_path):
    archive = Archive(tmp_path)
    stats = run(small_config(), archive, substrate=InterruptingSubstrate(40))
    assert stats.interrupted
    assert stats.candidates == 39
    assert "interrupted" in str(stats)
    assert len(archive.records()) == stats.emitted


def test_archive_failure_carries_stats():
    cfg = small_config()
    with pytest.raises(ArchiveError) as info:
        run(cfg, BrokenArchive())
    assert info.value.stats is not None
    assert info.value.stats.emitted == 1


def test_statistics_merge():
    a = RunStatistics(candidates=3, solved=2, emitted=1)
    a.rejections["no_mate"] += 2
    b = RunStatistics(candidates=5, convention_failures=1, interrupted=True)
    b.rejections["no_mate"] += 1
    b.rejections["overlap"] += 4
    a.merge(b)
    assert a.candidates == 8
    assert a.rejections == Counter(no_mate=3, overlap=4)
    assert a.interrupted
    assert a.emissions_per_candidate == 1 / 8


def test_substrate_run(tmp_path, rng):
    """A run biased by a substrate is as deterministic as a plain one."""
    vectors = [
        AttributeVector.from_array(rng.uniform(0.0, 1.0, size=7) * 7 + 0.5)
        for _ in range(3)
    ]
    substrate = Substrate(vectors)
    cfg = small_config(max_candidates=40)
    a = run(cfg, Archive(tmp_path / "a"), substrate=substrate)
    b = run(cfg, Archive(tmp_path / "b"), substrate=substrate)
    assert a.to_dict() == b.to_dict()


@pytest.mark.extended
def test_queen_mates_in_two(tmp_path):
    """Queen against bare king yields a conventional mate in 2."""
    cfg = ComposerConfig(
        PieceSetSpec.parse("KQ", "K"),
        goals=(2,),
        max_candidates=10 ** 6,
        max_wall_seconds=600.0,
    )
    archive = Archive(tmp_path)
    stats = run(cfg, archive)
    assert stats.emitted >= 1
    for record in archive:
        assert record.convention_report.passed
        assert verify_record(record) == []


@pytest.mark.extended
def test_four_knights_smoke(tmp_path):
    cfg = ComposerConfig(
        PieceSetSpec.parse("KNNNN", "KQ"),
        max_candidates=20,
        per_solve=SearchBudget(max_nodes=100_000, max_seconds=20.0),
    )
    stats = run(cfg, Archive(tmp_path))
    assert stats.candidates == 20


# # # # # # # # # # # # # # # # # # # #
# The archive


def test_archive_files(tmp_path):
    cfg = ComposerConfig(
        PieceSetSpec.parse("KRR", "K"), goals=(2,), conventions=LENIENT
    )
    record = compose_step(
        ComposerState(cfg, clock=fixed_clock()), parse_fen(TWO_KEYS_FEN)
    )
    archive = Archive(tmp_path)
    archive.append(record)
    assert archive.records() == [record]
    assert archive.keys() == {dedup_key(record.position())}
    (line,) = archive.records_path.read_text().splitlines()
    assert list(json.loads(line)) == sorted(json.loads(line))
    # The index is rebuilt when it goes missing.
    archive.index_path.unlink()
    assert Archive(tmp_path).keys() == {dedup_key(record.position())}
    assert archive.index_path.exists()


def test_archive_corruption(tmp_path, caplog):
    archive = Archive(tmp_path)
    archive.records_path.write_text("{\"fen\": 1}\n")
    with pytest.raises(ArchiveError):
        archive.records()
    archive.records_path.write_text("")
    assert archive.records() == []
    archive.records_path.write_text("{half a line")
    assert archive.records() == []
    assert "unterminated" in caplog.text


def test_archive_unwritable(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(ArchiveError):
        Archive(blocker)


def test_archive_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("CHESSPROBLEMS_ARCHIVE", str(tmp_path / "env"))
    assert Archive().directory == tmp_path / "env"
    assert (tmp_path / "env").is_dir()


def test_render_local_time():
    utc = timezone.utc
    assert render_local_time("2017-08-23T04:51:51Z", utc) == (
        "2017.8.23 4:51:51 AM"
    )
    assert render_local_time("2017-08-23T16:05:09Z", utc) == (
        "2017.8.23 4:05:09 PM"
    )
    assert render_local_time("2017-08-23T00:00:00Z", utc) == (
        "2017.8.23 12:00:00 AM"
    )
