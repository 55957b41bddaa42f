"""Define utility functions and set up pytest fixtures for the test suite."""
import numpy as np
import pytest

from chessproblems.board import parse_fen
from chessproblems.composer import PieceSetSpec, Rejection, sample_position
from chessproblems.solver import MateSolver

# The composition the test suite revolves around: White mates in 5 with four
# knights against a queen, key 1.Ne2.
FOUR_KNIGHTS_FEN = "8/8/8/4N3/8/4N2k/5KN1/2N4q w - - 0 1"
# Two rooks mate in 2 with either of two keys, 1.Ra7 and 1.Rb7.
TWO_KEYS_FEN = "7k/8/R7/1R6/8/8/8/2K5 w - - 0 1"
# A unique key that both checks and captures: 1.Qxd8#.
CHECK_CAPTURE_FEN = "3r2k1/5ppp/8/8/8/8/8/K2Q4 w - - 0 1"


def pytest_addoption(parser):
    """Add command line options for the number of times to repeat each
    randomised test, and for running the slow extended tests.
    """
    parser.addoption(
        "--n_iters",
        type=int,
        default=10,
        help="Number of times to run each test on new random input.",
    )
    parser.addoption(
        "--extended",
        action="store_true",
        default=False,
        help="Also run the slow tests marked 'extended'.",
    )


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "extended: slow acceptance test, run with --extended"
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("extended"):
        return
    skip = pytest.mark.skip(reason="needs --extended")
    for item in items:
        if "extended" in item.keywords:
            item.add_marker(skip)


def pytest_generate_tests(metafunc):
    """Pass the command line argument n_iters to the tests that ask for it."""
    n_iters = metafunc.config.getoption("n_iters")
    if "n_iters" in metafunc.fixturenames:
        metafunc.parametrize("n_iters", [n_iters])


@pytest.fixture
def rng(request):
    """A numpy Generator seeded from the test's name, so that every test
    sees the same stream whatever order pytest-randomly runs them in.
    """
    seed = sum(map(ord, request.node.name))
    return np.random.default_rng(seed)


@pytest.fixture
def rposition(rng):
    """Return a function that generates random valid positions with a given
    set of men, White to move.
    """

    def _rposition(white="KQR", black="K", max_tries=10000):
        spec = PieceSetSpec.parse(white, black)
        for _ in range(max_tries):
            p = sample_position(spec, None, rng)
            if not isinstance(p, Rejection):
                return p
        raise RuntimeError("No valid placement found.")

    return _rposition


@pytest.fixture(scope="session")
def four_knights():
    return parse_fen(FOUR_KNIGHTS_FEN)


@pytest.fixture(scope="session")
def four_knights_solver():
    """A solver shared by the tests on the four-knights composition, so its
    transposition table is warm after the first of them.
    """
    return MateSolver()


@pytest.fixture(scope="session")
def four_knights_tree(four_knights, four_knights_solver):
    return four_knights_solver.build_tree(four_knights, 5)
