"""Cross-domain attribute vectors that bias where the composer puts pieces.

Two kinds of source are reduced to the same `AttributeVector`:

- chess games: the final position of a game's movetext is summarised by its
  material balance, man count, how tightly the men are packed, where they
  are, how far apart the kings are and how mobile White is;
- grayscale images: brightness, contrast and edge density are measured and
  mapped affinely onto the same fields, through a mapping table that can be
  changed in a settings file.

`combine` blends a chess vector with an image vector at random, field by
field, and adds a little bounded noise. The result is what
`composer.sample_position` takes as its bias.
"""
import enum
import logging
from collections import namedtuple
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import scipy.stats
import chess
from PIL import Image, UnidentifiedImageError

from .aesthetics import PIECE_VALUES
from .board import split_movetext
from .config import SettingsError, read_settings, section

__all__ = [
    "ImageFormatError",
    "SourceTag",
    "AttributeVector",
    "ImageFeatures",
    "SubstrateSettings",
    "Substrate",
    "FIELD_RANGES",
    "position_attributes",
    "extract_from_games",
    "load_games",
    "image_features",
    "extract_from_image",
    "load_image",
    "load_images",
    "combine",
    "compare_corpora",
]

logger = logging.getLogger(__name__)


class ImageFormatError(ValueError):
    """An image that cannot be read as an 8-bit grayscale raster."""


class SourceTag(enum.Enum):
    CHESS = "chess"
    IMAGE = "image"
    BLENDED = "blended"


# Closed intervals of the numeric fields, in field order.
FIELD_RANGES = {
    "material_diff": (-40.0, 40.0),
    "piece_count": (2.0, 32.0),
    "density": (0.0, 1.0),
    "centroid_file": (0.0, 7.0),
    "centroid_rank": (0.0, 7.0),
    "king_separation": (2.0, 7.0),
    "attacker_mobility": (0.0, 1.0),
}
_NAMES = tuple(FIELD_RANGES)
_LO = np.array([lo for lo, _ in FIELD_RANGES.values()])
_HI = np.array([hi for _, hi in FIELD_RANGES.values()])


@dataclass(frozen=True)
class AttributeVector:
    """Features of a source, on the scale of chess positions.

    `density` is men per square of their bounding box, `centroid_file` and
    `centroid_rank` the mean square coordinates (0-7), `king_separation`
    the Chebyshev distance of the kings and `attacker_mobility` White's
    share of the pseudo-legal moves of both sides.
    """

    material_diff: float
    piece_count: float
    density: float
    centroid_file: float
    centroid_rank: float
    king_separation: float
    attacker_mobility: float
    source_tag: SourceTag = SourceTag.BLENDED

    def __post_init__(self):
        arr = self.as_array()
        if not np.all(np.isfinite(arr)):
            msg = "Attribute values must be finite: {}".format(self)
            raise ValueError(msg)
        if np.any(arr < _LO) or np.any(arr > _HI):
            raise ValueError("Attribute values out of range: {}".format(self))

    @property
    def centroid(self):
        return (self.centroid_file, self.centroid_rank)

    def as_array(self):
        return np.array([getattr(self, n) for n in _NAMES], dtype=float)

    @classmethod
    def from_array(cls, arr, source_tag=SourceTag.BLENDED):
        """Build a vector from numeric values in field order, clamping them
        into their ranges.
        """
        arr = np.clip(np.asarray(arr, dtype=float), _LO, _HI)
        return cls(*(float(x) for x in arr), source_tag=source_tag)

    def to_dict(self):
        d = {n: getattr(self, n) for n in _NAMES}
        d["source_tag"] = self.source_tag.value
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(
            *(float(d[n]) for n in _NAMES),
            source_tag=SourceTag(d["source_tag"]),
        )


@dataclass(frozen=True)
class ImageFeatures:
    brightness: float
    contrast: float
    edge_density: float


_IMAGE_FEATURES = tuple(f.name for f in fields(ImageFeatures))

# field -> (image feature, value at feature 0, value at feature 1)
DEFAULT_MAPPING = {
    "material_diff": ("brightness", -10.0, 10.0),
    "piece_count": ("edge_density", 4.0, 16.0),
    "density": ("contrast", 0.1, 0.9),
    "centroid_file": ("brightness", 2.0, 5.0),
    "centroid_rank": ("contrast", 2.0, 5.0),
    "king_separation": ("edge_density", 2.0, 6.0),
    "attacker_mobility": ("brightness", 0.3, 0.8),
}


@dataclass(frozen=True)
class SubstrateSettings:
    """Tunables of the substrate.

    `noise` is the noise amplitude of `combine` as a fraction of each
    field's range, `edge_threshold` the grey-level step that counts as an
    edge, and `mapping` the table from image features to attribute fields.
    """

    noise: float = 0.05
    edge_threshold: float = 32.0
    mapping: dict = field(default_factory=lambda: dict(DEFAULT_MAPPING))

    def __post_init__(self):
        if not 0 <= self.noise <= 1:
            msg = "noise must be in [0, 1], got {}".format(self.noise)
            raise ValueError(msg)
        if not 0 <= self.edge_threshold < 255:
            msg = "edge_threshold must be in [0, 255), got {}"
            raise ValueError(msg.format(self.edge_threshold))
        if set(self.mapping) != set(_NAMES):
            raise ValueError("The mapping must cover every attribute field.")
        for name, (feature, lo, hi) in self.mapping.items():
            flo, fhi = FIELD_RANGES[name]
            if feature not in _IMAGE_FEATURES:
                msg = "Unknown image feature {!r} in mapping.".format(feature)
                raise ValueError(msg)
            if not (flo <= lo <= fhi and flo <= hi <= fhi):
                msg = "Mapping of {} leaves its range [{}, {}].".format(
                    name, flo, fhi
                )
                raise ValueError(msg)

    @classmethod
    def from_settings(cls, settings):
        """Read ``substrate.noise``, ``substrate.edge_threshold`` and
        ``substrate.map.<field> = <feature> <lo> <hi>`` entries.
        """
        settings = dict(settings or {})
        mapping = dict(DEFAULT_MAPPING)
        prefix = "substrate.map."
        for key in [k for k in settings if k.startswith(prefix)]:
            value = settings.pop(key)
            name = key[len(prefix):]
            if name not in FIELD_RANGES:
                msg = "Unknown attribute field in {!r}.".format(key)
                raise SettingsError(msg)
            try:
                feature, lo, hi = value.split()
                mapping[name] = (feature, float(lo), float(hi))
            except ValueError:
                msg = "Expected '<feature> <lo> <hi>' for {!r}, got {!r}."
                raise SettingsError(msg.format(key, value))
        known = {"noise", "edge_threshold"}
        try:
            values = section(settings, "substrate", known)
            return cls(mapping=mapping, **values)
        except ValueError as e:
            if isinstance(e, SettingsError):
                raise
            raise SettingsError(str(e)) from e

    @classmethod
    def from_file(cls, path):
        return cls.from_settings(read_settings(path))


# # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # #
# Chess games


def _mobility(board, color):
    b = board.copy(stack=False)
    b.turn = color
    b.ep_square = None if color != board.turn else board.ep_square
    return sum(1 for _ in b.generate_pseudo_legal_moves())


def position_attributes(board, source_tag=SourceTag.CHESS):
    """Summarise a `chess.Board` as an `AttributeVector`."""
    squares = list(board.piece_map())
    files = np.array([chess.square_file(s) for s in squares], dtype=float)
    ranks = np.array([chess.square_rank(s) for s in squares], dtype=float)
    material = sum(
        PIECE_VALUES[p.piece_type] * (1 if p.color == chess.WHITE else -1)
        for p in board.piece_map().values()
    )
    box = (np.ptp(files) + 1) * (np.ptp(ranks) + 1)
    wk, bk = board.king(chess.WHITE), board.king(chess.BLACK)
    if wk is None or bk is None:
        separation = 7
    else:
        separation = chess.square_distance(wk, bk)
    w_moves = _mobility(board, chess.WHITE)
    b_moves = _mobility(board, chess.BLACK)
    total = w_moves + b_moves
    return AttributeVector.from_array(
        [
            material,
            len(squares),
            len(squares) / box,
            files.mean(),
            ranks.mean(),
            separation,
            w_moves / total if total else 0.5,
        ],
        source_tag=source_tag,
    )


def extract_from_games(records):
    """Return one `AttributeVector` per game movetext in `records`, taken
    from the final position.

    Move numbers and result tokens are skipped. A record with a move that
    does not parse is skipped with a warning naming the ply.
    """
    vectors = []
    for i, record in enumerate(records):
        board = chess.Board()
        try:
            for ply, san in enumerate(split_movetext(record), start=1):
                board.push_san(san)
        except ValueError as e:
            logger.warning(
                "Skipping game %d: cannot play %r at ply %d (%s)",
                i, san, ply, e,
            )
            continue
        vectors.append(position_attributes(board))
    return vectors


def load_games(path):
    """Read a games file (one movetext per line, ``#`` comments) and
    extract its vectors.
    """
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    records = [
        ln for ln in lines if ln.strip() and not ln.lstrip().startswith("#")
    ]
    return extract_from_games(records)


# # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # #
# Images


def image_features(raster, edge_threshold=32.0):
    """Measure a 2D array of grey levels 0-255.

    Brightness is the mean level over 255, contrast the standard deviation
    over 127.5, and edge density the fraction of horizontally or vertically
    neighbouring pixel pairs whose levels differ by more than
    `edge_threshold`.
    """
    arr = np.asarray(raster, dtype=float)
    if arr.ndim != 2 or min(arr.shape) < 2:
        msg = "Expected a 2D raster of at least 2x2 pixels, got shape {}."
        raise ImageFormatError(msg.format(arr.shape))
    if arr.min() < 0 or arr.max() > 255:
        raise ImageFormatError("Grey levels must lie in [0, 255].")
    horizontal = np.abs(np.diff(arr, axis=1)) > edge_threshold
    vertical = np.abs(np.diff(arr, axis=0)) > edge_threshold
    edges = horizontal.sum() + vertical.sum()
    return ImageFeatures(
        brightness=float(arr.mean() / 255),
        contrast=float(min(arr.std() / 127.5, 1.0)),
        edge_density=float(edges / (horizontal.size + vertical.size)),
    )


def extract_from_image(raster, settings=None):
    """Map the `ImageFeatures` of `raster` onto an `AttributeVector`."""
    settings = settings or SubstrateSettings()
    feats = image_features(raster, settings.edge_threshold)
    values = []
    for name in _NAMES:
        feature, lo, hi = settings.mapping[name]
        values.append(lo + getattr(feats, feature) * (hi - lo))
    return AttributeVector.from_array(values, source_tag=SourceTag.IMAGE)


def load_image(path):
    """Decode an image file (any format Pillow reads, portable graymaps
    included) into a 2D ``uint8`` array of grey levels.
    """
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("L"), dtype=np.uint8)
    except (UnidentifiedImageError, OSError, ValueError) as e:
        msg = "Cannot read image {}: {}".format(path, e)
        raise ImageFormatError(msg) from e


def load_images(directory, settings=None):
    """Extract vectors from every file in `directory`, in name order.
    Unreadable files are skipped with a warning.
    """
    vectors = []
    for path in sorted(p for p in Path(directory).iterdir() if p.is_file()):
        try:
            vectors.append(extract_from_image(load_image(path), settings))
        except ImageFormatError as e:
            logger.warning("Skipping image: %s", e)
    return vectors


# # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # # #
# Blending


def combine(a, b, rng, noise=0.05):
    """Blend two vectors field by field with uniform random weights, add
    uniform noise of amplitude `noise` times each field's range, and clamp.

    Deterministic for a given state of the `numpy.random.Generator` `rng`.
    """
    va, vb = a.as_array(), b.as_array()
    w = rng.uniform(0.0, 1.0, size=len(_NAMES))
    eps = rng.uniform(-1.0, 1.0, size=len(_NAMES)) * noise * (_HI - _LO)
    c = np.clip(vb + w * (va - vb), np.minimum(va, vb), np.maximum(va, vb))
    return AttributeVector.from_array(c + eps, source_tag=SourceTag.BLENDED)


class Substrate:
    """Pools of chess and image vectors to draw blended biases from.

    If only one pool is non-empty both parents are drawn from it. With
    both empty `draw` returns None, which means uniform sampling.
    """

    def __init__(self, chess_vectors=(), image_vectors=(), settings=None):
        self.chess_vectors = list(chess_vectors)
        self.image_vectors = list(image_vectors)
        self.settings = settings or SubstrateSettings()

    @classmethod
    def from_sources(cls, games_path=None, images_path=None, settings=None):
        settings = settings or SubstrateSettings()
        games = load_games(games_path) if games_path else []
        images = load_images(images_path, settings) if images_path else []
        logger.info(
            "Substrate loaded %d game and %d image vectors",
            len(games), len(images),
        )
        return cls(games, images, settings)

    def __bool__(self):
        return bool(self.chess_vectors or self.image_vectors)

    def draw(self, rng):
        if not self:
            return None
        first = self.chess_vectors or self.image_vectors
        second = self.image_vectors or self.chess_vectors
        a = first[rng.integers(len(first))]
        b = second[rng.integers(len(second))]
        return combine(a, b, rng, self.settings.noise)


FieldComparison = namedtuple(
    "FieldComparison", ["field", "statistic", "pvalue"]
)


def compare_corpora(sample_a, sample_b):
    """Welch's t-test per numeric field between two collections of
    `AttributeVector`s. Returns a list of `FieldComparison`s.
    """
    xa = np.array([v.as_array() for v in sample_a])
    xb = np.array([v.as_array() for v in sample_b])
    if len(xa) < 2 or len(xb) < 2:
        raise ValueError("Each sample needs at least two vectors.")
    t, p = scipy.stats.ttest_ind(xa, xb, axis=0, equal_var=False)
    return [
        FieldComparison(name, float(ti), float(pi))
        for name, ti, pi in zip(_NAMES, t, p)
    ]
