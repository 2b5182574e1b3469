"""On-disk data model: manifests, label maps and speed annotations.

A dataset is a CSV manifest (one row per frame) plus one binary PGM label
map per frame. Label maps store one semantic class id per pixel; pixels
with no valid label carry ``VOID_ID`` and are ignored downstream.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

VOID_ID = 255

# Cityscapes train classes; the default segmentation vocabulary.
DEFAULT_CLASS_COUNT = 19

MANIFEST_HEADER = ["frame_id", "label_map_path", "scenario", "split", "speed_kmh"]


class ManifestError(ValueError):
    """Malformed or inconsistent manifest content."""


class LabelMapError(ValueError):
    """Malformed PGM payload or out-of-range class ids."""


class Scenario(Enum):
    URBAN = "urban"
    HIGHWAY = "highway"


class Split(Enum):
    TRAIN = "train"
    TEST = "test"


@dataclass(frozen=True)
class Sample:
    frame_id: str
    label_map_path: str
    scenario: Scenario
    split: Split
    speed_kmh: float


@dataclass(frozen=True)
class Manifest:
    samples: tuple[Sample, ...]
    class_count: int
    source_note: str = ""
    root: Path = field(default_factory=Path)

    def __len__(self) -> int:
        return len(self.samples)

    def label_map_file(self, sample: Sample) -> Path:
        return self.root / sample.label_map_path


# ---------------------------------------------------------------------------
# PGM (binary P5) label maps


def write_label_map(path: Path | str, labels: np.ndarray) -> None:
    """Write a (H, W) uint8 class-id grid as binary PGM, maxval 255."""
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise LabelMapError(f"label map must be 2-D, got shape {labels.shape}")
    if labels.dtype != np.uint8:
        if labels.min() < 0 or labels.max() > 255:
            raise LabelMapError("label values outside [0, 255] cannot be stored")
        labels = labels.astype(np.uint8)
    h, w = labels.shape
    path = Path(path)
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(labels.tobytes())


def _read_pgm_tokens(data: bytes, count: int) -> tuple[list[int], int]:
    """Read `count` whitespace-separated ASCII integers, skipping # comments.

    Returns the values and the offset just past the final separator byte.
    """
    tokens: list[int] = []
    i = 0
    while len(tokens) < count:
        if i >= len(data):
            raise LabelMapError("truncated PGM header")
        c = data[i : i + 1]
        if c == b"#":
            while i < len(data) and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < len(data) and not data[j : j + 1].isspace():
                j += 1
            token = data[i:j]
            if not token.isdigit():
                raise LabelMapError(f"bad PGM header token {token!r}")
            tokens.append(int(token))
            i = j
    # exactly one whitespace byte separates the header from the payload
    return tokens, i + 1


def load_label_map(path: Path | str, class_count: int) -> np.ndarray:
    """Load a binary PGM label map, checking ids against `class_count`.

    Every pixel must be a class id below `class_count` or `VOID_ID`.
    """
    path = Path(path)
    data = path.read_bytes()
    if not data.startswith(b"P5"):
        raise LabelMapError(f"{path}: not a binary PGM (P5) file")
    (w, h, maxval), offset = _read_pgm_tokens(data[2:], 3)
    offset += 2
    if maxval != 255:
        raise LabelMapError(f"{path}: unsupported PGM maxval {maxval}")
    payload = data[offset : offset + h * w]
    if len(payload) != h * w:
        raise LabelMapError(
            f"{path}: truncated payload ({len(payload)} of {h * w} bytes)"
        )
    labels = np.frombuffer(payload, dtype=np.uint8).reshape(h, w)
    bad = (labels >= class_count) & (labels != VOID_ID)
    if bad.any():
        y, x = np.argwhere(bad)[0]
        raise LabelMapError(
            f"{path}: class id {labels[y, x]} out of range at pixel ({y}, {x}) "
            f"(class_count={class_count}, void={VOID_ID})"
        )
    return labels


# ---------------------------------------------------------------------------
# Manifest CSV


def write_manifest(path: Path | str, manifest: Manifest) -> None:
    path = Path(path)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(MANIFEST_HEADER)
        for s in manifest.samples:
            writer.writerow(
                [s.frame_id, s.label_map_path, s.scenario.value, s.split.value,
                 repr(s.speed_kmh)]
            )


def load_manifest(
    path: Path | str,
    class_count: int = DEFAULT_CLASS_COUNT,
    source_note: str = "",
) -> Manifest:
    """Parse a manifest CSV, preserving row order.

    Relative `label_map_path` entries are resolved against the manifest's
    directory; every referenced file must exist. The CSV carries no class
    vocabulary, so `class_count` is supplied by the caller.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"manifest not found: {path}")
    root = path.parent
    samples: list[Sample] = []
    seen: set[str] = set()
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != MANIFEST_HEADER:
            raise ManifestError(f"{path}: bad header {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(MANIFEST_HEADER):
                raise ManifestError(f"{path}:{lineno}: expected 5 fields, got {len(row)}")
            frame_id, map_path, scenario_s, split_s, speed_s = row
            if frame_id in seen:
                raise ManifestError(f"{path}:{lineno}: duplicate frame_id {frame_id!r}")
            seen.add(frame_id)
            try:
                scenario = Scenario(scenario_s)
                split = Split(split_s)
            except ValueError as e:
                raise ManifestError(f"{path}:{lineno}: {e}") from None
            try:
                speed = float(speed_s)
            except ValueError:
                raise ManifestError(f"{path}:{lineno}: bad speed {speed_s!r}") from None
            if not np.isfinite(speed) or speed < 0:
                raise ManifestError(f"{path}:{lineno}: negative speed {speed}")
            if not (root / map_path).is_file():
                raise ManifestError(
                    f"{path}:{lineno}: frame {frame_id!r} references missing "
                    f"label map {map_path!r}"
                )
            samples.append(Sample(frame_id, map_path, scenario, split, speed))
    return Manifest(
        samples=tuple(samples),
        class_count=class_count,
        source_note=source_note or str(path),
        root=root,
    )


def filter_manifest(
    manifest: Manifest,
    scenario: Scenario | None,
    split: Split | None,
) -> Manifest:
    """Subset by scenario and/or split (None means "all"), preserving order."""
    kept = tuple(
        s
        for s in manifest.samples
        if (scenario is None or s.scenario == scenario)
        and (split is None or s.split == split)
    )
    return replace(manifest, samples=kept)
