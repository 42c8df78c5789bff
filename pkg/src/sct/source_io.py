"""Grayscale sources: PGM I/O, block grids, label maps, synthetic fixtures.

Images are binary 8-bit PGM (P5, maxval 255). Label maps are per-pixel P5
files whose values are relabeled to a contiguous {0..L-1} set. The block grid
is fixed at 8x8 with edge replication on the right/bottom so partial blocks
do not inject artificial high-frequency energy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BLOCK = 8


class LoadError(Exception):
    """Base class for source ingestion failures."""


class UnsupportedFormatError(LoadError):
    pass


class MalformedHeaderError(LoadError):
    pass


class TruncatedFileError(LoadError):
    pass


class DimensionMismatchError(LoadError):
    pass


@dataclass(frozen=True)
class SourceImage:
    width: int
    height: int
    samples: np.ndarray  # (height, width) uint8

    def __post_init__(self) -> None:
        if self.samples.shape != (self.height, self.width):
            raise ValueError("sample grid does not match declared dimensions")


@dataclass(frozen=True)
class PixelLabelMap:
    width: int
    height: int
    labels: np.ndarray  # (height, width) int, values {0..L-1}

    @property
    def n_labels(self) -> int:
        return int(self.labels.max()) + 1


@dataclass(frozen=True)
class BlockGrid:
    cols: int
    rows: int
    pad_right: int
    pad_bottom: int
    block_size: int = BLOCK


@dataclass(frozen=True)
class SemanticLabelMap:
    """Per-block region labels, values {0..L-1}."""
    cols: int
    rows: int
    labels: np.ndarray  # (rows, cols) int

    @property
    def n_labels(self) -> int:
        return int(self.labels.max()) + 1


# ---------------------------------------------------------------------------
# PGM I/O

def _parse_pgm(data: bytes) -> tuple[int, int, np.ndarray]:
    if len(data) < 2 or data[:2] != b"P5":
        raise UnsupportedFormatError("not a binary PGM (magic P5)")
    # tokenize the header: magic, width, height, maxval; '#' starts a comment
    pos = 2
    fields: list[int] = []
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        token = data[start:pos]
        if not token.isdigit():
            raise MalformedHeaderError(f"bad header token {token!r}")
        fields.append(int(token))
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise MalformedHeaderError("missing whitespace after maxval")
    pos += 1
    width, height, maxval = fields
    if maxval != 255:
        raise UnsupportedFormatError(f"maxval {maxval} unsupported (need 255)")
    if width < 1 or height < 1:
        raise MalformedHeaderError("non-positive dimensions")
    payload = data[pos:pos + width * height]
    if len(payload) < width * height:
        raise TruncatedFileError(
            f"payload has {len(payload)} bytes, need {width * height}")
    samples = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    return width, height, samples


def load_image(path: str) -> SourceImage:
    with open(path, "rb") as fh:
        data = fh.read()
    width, height, samples = _parse_pgm(data)
    return SourceImage(width, height, samples.copy())


def write_image(img: SourceImage, path: str) -> None:
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(img.samples, dtype=np.uint8).tobytes())


def load_label_map(path: str, expected: tuple[int, int]) -> PixelLabelMap:
    """Load a per-pixel label file; values are relabeled to {0..L-1}.

    expected is the paired image's (width, height).
    """
    with open(path, "rb") as fh:
        data = fh.read()
    width, height, samples = _parse_pgm(data)
    if (width, height) != expected:
        raise DimensionMismatchError(
            f"label map {width}x{height} does not match image "
            f"{expected[0]}x{expected[1]}")
    values = np.unique(samples)
    lookup = np.zeros(256, dtype=np.int64)
    lookup[values] = np.arange(values.size)
    return PixelLabelMap(width, height, lookup[samples])


# ---------------------------------------------------------------------------
# block grid

def pad_and_grid(img: SourceImage) -> tuple[np.ndarray, BlockGrid]:
    """Replicate right/bottom edges out to multiples of the block size."""
    pad_r = (-img.width) % BLOCK
    pad_b = (-img.height) % BLOCK
    padded = np.pad(img.samples, ((0, pad_b), (0, pad_r)), mode="edge")
    grid = BlockGrid(cols=(img.width + pad_r) // BLOCK,
                     rows=(img.height + pad_b) // BLOCK,
                     pad_right=pad_r, pad_bottom=pad_b)
    return padded, grid


def block_labels(labmap: PixelLabelMap, grid: BlockGrid) -> SemanticLabelMap:
    """Majority pixel label per block, ties to the smallest label value.

    Padding pixels are excluded (the label map covers the original extent).
    """
    n_labels = labmap.n_labels
    out = np.zeros((grid.rows, grid.cols), dtype=np.int64)
    for r in range(grid.rows):
        for c in range(grid.cols):
            patch = labmap.labels[r * BLOCK:min((r + 1) * BLOCK, labmap.height),
                                  c * BLOCK:min((c + 1) * BLOCK, labmap.width)]
            counts = np.bincount(patch.ravel(), minlength=n_labels)
            out[r, c] = int(np.argmax(counts))  # argmax takes the first max
    return SemanticLabelMap(grid.cols, grid.rows, out)


# ---------------------------------------------------------------------------
# synthetic fixtures

PATTERNS = ("flat", "gradient", "checker", "two-region", "three-region")


def _texture(width: int, rows: slice, rng: np.random.Generator,
             base: int) -> np.ndarray:
    """High-variance texture with mean equal to `base` (see notes)."""
    n_rows = rows.stop - rows.start
    y, x = np.mgrid[rows.start:rows.stop, 0:width]
    wave = 55.0 * np.sin(2 * np.pi * x / 32.0) * np.cos(2 * np.pi * y / 32.0)
    noise = rng.integers(-15, 16, size=(n_rows, width))
    return np.clip(base + wave + noise, 0, 255).astype(np.uint8)


def synthesize_source(pattern: str, size: int,
                      seed: int) -> tuple[SourceImage, PixelLabelMap]:
    """Deterministic test sources; size must be a multiple of the block size."""
    if size % BLOCK:
        raise ValueError(f"size {size} is not a multiple of {BLOCK}")
    if pattern not in PATTERNS:
        raise ValueError(f"unknown pattern {pattern!r}")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x5C7)))
    labels = np.zeros((size, size), dtype=np.int64)
    if pattern == "flat":
        samples = np.full((size, size), 128, dtype=np.uint8)
    elif pattern == "gradient":
        row = np.floor(255.0 * np.arange(size) / (size - 1)).astype(np.uint8)
        samples = np.tile(row, (size, 1))
    elif pattern == "checker":
        r, c = np.mgrid[0:size, 0:size]
        tiles = ((r // BLOCK + c // BLOCK) % 2).astype(np.uint8)
        samples = np.where(tiles == 0, 112, 144).astype(np.uint8)
    elif pattern == "two-region":
        split = size // 2
        samples = np.full((size, size), 104, dtype=np.uint8)
        samples[split:] = _texture(size, slice(split, size), rng, base=104)
        labels[split:] = 1
    else:  # three-region
        a, b = (3 * size) // 8, (5 * size) // 8
        samples = np.full((size, size), 104, dtype=np.uint8)
        samples[a:b] = _texture(size, slice(a, b), rng, base=128)
        samples[b:] = 152
        labels[a:b] = 1
        labels[b:] = 2
    return (SourceImage(size, size, samples),
            PixelLabelMap(size, size, labels))
