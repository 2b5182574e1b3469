"""Multi-scale score-map fusion.

Segmentation score maps computed at input scales {0.5, 0.75, 1} are
upsampled (nearest neighbor) to the reference resolution, fused by
per-pixel, per-class maximum, and reduced to a label map by argmax with
ties broken to the lowest class id.

Score maps live in little-endian binary files:

    magic "ISA2SMAP" | u32 height | u32 width | u32 class_count |
    f64 scale_factor | height*width*class_count f32, (row, col, class) order
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SCORE_MAP_MAGIC = b"ISA2SMAP"
DEFAULT_SCALES = (0.5, 0.75, 1.0)


class ScoreMapFormatError(ValueError):
    """Malformed score-map file."""


def scaled_dim(reference: int, scale: float) -> int:
    """round(scale * reference), half away from zero."""
    return int(np.floor(scale * reference + 0.5))


@dataclass(frozen=True)
class ScoreMapSet:
    """Per-scale (scale_factor, scores[h, w, c]) entries for one frame."""

    entries: tuple[tuple[float, np.ndarray], ...]
    reference_height: int
    reference_width: int


def validate_score_map_set(s: ScoreMapSet) -> None:
    if not s.entries:
        raise ValueError("empty score-map set")
    scales = [scale for scale, _ in s.entries]
    if any(b <= a for a, b in zip(scales, scales[1:])):
        raise ValueError(f"scale factors not strictly increasing: {scales}")
    if scales[-1] != 1.0:
        raise ValueError(f"last scale factor must be 1.0, got {scales[-1]}")
    class_counts = {scores.shape[2] for _, scores in s.entries}
    if len(class_counts) != 1:
        raise ValueError(f"mismatched class counts across scales: {class_counts}")
    for scale, scores in s.entries:
        if not (0.0 < scale <= 1.0):
            raise ValueError(f"scale factor {scale} outside (0, 1]")
        expect = (
            scaled_dim(s.reference_height, scale),
            scaled_dim(s.reference_width, scale),
        )
        if scores.shape[:2] != expect:
            raise ValueError(
                f"scale {scale} map is {scores.shape[:2]}, expected {expect}"
            )
        if not np.isfinite(scores).all():
            raise ValueError(f"non-finite scores at scale {scale}")


def upsample_nearest(scores: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    """Nearest-neighbor upsample: out(y, x) = in(y*h // target_h, x*w // target_w)."""
    h, w = scores.shape[:2]
    if target_h < h or target_w < w:
        raise ValueError(f"target {target_h}x{target_w} smaller than source {h}x{w}")
    ys = np.arange(target_h) * h // target_h
    xs = np.arange(target_w) * w // target_w
    return scores[np.ix_(ys, xs)]


def fuse_scales(s: ScoreMapSet, check: bool = True) -> np.ndarray:
    """Per-pixel, per-class maximum over all entries at reference resolution."""
    if check:
        validate_score_map_set(s)
    elif not s.entries:
        raise ValueError("empty score-map set")
    upsampled = [
        upsample_nearest(scores, s.reference_height, s.reference_width)
        for _, scores in s.entries
    ]
    return np.maximum.reduce(upsampled)


def argmax_labels(scores: np.ndarray) -> np.ndarray:
    """Per-pixel label = smallest class id attaining the maximum score."""
    if scores.ndim != 3 or scores.shape[2] < 1:
        raise ValueError(f"expected (h, w, c) scores, got shape {scores.shape}")
    return np.argmax(scores, axis=2).astype(np.uint8)


# ---------------------------------------------------------------------------
# File format


def write_score_map(path: Path | str, scores: np.ndarray, scale_factor: float) -> None:
    scores = np.asarray(scores, dtype=np.float32)
    h, w, c = scores.shape
    with open(path, "wb") as f:
        f.write(SCORE_MAP_MAGIC)
        f.write(struct.pack("<IIId", h, w, c, scale_factor))
        f.write(scores.astype("<f4").tobytes())


def read_score_map(path: Path | str) -> tuple[float, np.ndarray]:
    path = Path(path)
    data = path.read_bytes()
    header = len(SCORE_MAP_MAGIC) + struct.calcsize("<IIId")
    if data[: len(SCORE_MAP_MAGIC)] != SCORE_MAP_MAGIC:
        raise ScoreMapFormatError(f"{path}: bad magic")
    h, w, c, scale = struct.unpack("<IIId", data[len(SCORE_MAP_MAGIC) : header])
    payload = np.frombuffer(data[header:], dtype="<f4")
    if payload.size != h * w * c:
        raise ScoreMapFormatError(
            f"{path}: payload holds {payload.size} floats, expected {h * w * c}"
        )
    return scale, payload.reshape(h, w, c)


def score_map_filename(frame_id: str, scale: float) -> str:
    return f"{frame_id}__{scale:.2f}.smap"


def write_score_map_set(directory: Path | str, frame_id: str, s: ScoreMapSet) -> None:
    directory = Path(directory)
    for scale, scores in s.entries:
        write_score_map(directory / score_map_filename(frame_id, scale), scores, scale)


def read_score_map_set(directory: Path | str, frame_id: str) -> ScoreMapSet:
    """Collect a frame's per-scale files; the scale-1.0 entry sets the reference."""
    directory = Path(directory)
    paths = sorted(directory.glob(f"{frame_id}__*.smap"))
    if not paths:
        raise FileNotFoundError(f"no score maps for frame {frame_id!r} in {directory}")
    entries = sorted((read_score_map(p) for p in paths), key=lambda e: e[0])
    if entries[-1][0] != 1.0:
        raise ScoreMapFormatError(
            f"frame {frame_id!r} has no scale-1.0 score map in {directory}"
        )
    h, w = entries[-1][1].shape[:2]
    return ScoreMapSet(tuple(entries), h, w)


def synthetic_score_maps(
    labels: np.ndarray,
    class_count: int,
    rng: np.random.Generator,
    scales: tuple[float, ...] = DEFAULT_SCALES,
) -> ScoreMapSet:
    """Random score maps whose fusion + argmax reproduces `labels` exactly.

    The full-scale map scores the true class 1.0 and everything else below
    0.5; coarser maps stay below 0.5 everywhere so the maximum never
    promotes a different class. Requires a void-free label map.
    """
    h, w = labels.shape
    if (labels >= class_count).any():
        raise ValueError("label map must be void-free to synthesize score maps")
    entries = []
    for scale in scales:
        sh, sw = scaled_dim(h, scale), scaled_dim(w, scale)
        scores = rng.uniform(0.0, 0.49, size=(sh, sw, class_count)).astype(np.float32)
        if scale == 1.0:
            scores[np.arange(h)[:, None], np.arange(w)[None, :], labels] = 1.0
        entries.append((scale, scores))
    return ScoreMapSet(tuple(entries), h, w)
