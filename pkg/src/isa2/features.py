"""Spatial-pyramid label-histogram descriptors and feature standardization.

The descriptor concatenates per-cell class histograms over successively
finer grids (1x1, 2x2, 4x4). Each histogram is L1-normalized over the
cell's non-void pixels, so cells of different sizes are comparable; a
fully void cell contributes a zero block.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import VOID_ID, Manifest, Sample, Scenario, Split, load_label_map

MAX_LEVELS = 3


@dataclass(frozen=True)
class PyramidConfig:
    """Number of pyramid levels; level l is a 2^l x 2^l grid."""

    levels: int = MAX_LEVELS

    def __post_init__(self) -> None:
        if self.levels not in (1, 2, 3):
            raise ValueError(f"levels must be in {{1, 2, 3}}, got {self.levels}")

    @property
    def cell_count(self) -> int:
        return sum(4**l for l in range(self.levels))


def descriptor_length(config: PyramidConfig, class_count: int) -> int:
    return class_count * config.cell_count


def cell_histogram(
    labels: np.ndarray,
    cell: tuple[int, int, int, int],
    class_count: int,
) -> np.ndarray:
    """Normalized class histogram of one (y0, x0, y1, x1) half-open cell.

    Entry c = (non-void pixels of class c) / (non-void pixels in the cell);
    an all-void cell yields the zero vector.
    """
    y0, x0, y1, x1 = cell
    h, w = labels.shape
    if not (0 <= y0 < y1 <= h and 0 <= x0 < x1 <= w):
        raise ValueError(f"cell {cell} empty or outside {h}x{w} map")
    window = labels[y0:y1, x0:x1].ravel()
    valid = window[window != VOID_ID]
    hist = np.bincount(valid, minlength=class_count).astype(np.float64)
    total = valid.size
    if total == 0:
        return np.zeros(class_count)
    return hist / total


def pyramid_cells(height: int, width: int, levels: int):
    """Yield (y0, x0, y1, x1) cells, level-major then row-major."""
    for l in range(levels):
        n = 2**l
        for r in range(n):
            y0, y1 = r * height // n, (r + 1) * height // n
            for c in range(n):
                x0, x1 = c * width // n, (c + 1) * width // n
                yield y0, x0, y1, x1


def spp_descriptor(
    labels: np.ndarray,
    config: PyramidConfig,
    class_count: int,
) -> np.ndarray:
    """Concatenated pyramid histograms; length class_count * cell_count."""
    h, w = labels.shape
    finest = 2 ** (config.levels - 1)
    if h < finest or w < finest:
        raise ValueError(
            f"{h}x{w} map too small for {config.levels}-level pyramid"
        )
    parts = [
        cell_histogram(labels, cell, class_count)
        for cell in pyramid_cells(h, w, config.levels)
    ]
    return np.concatenate(parts)


# ---------------------------------------------------------------------------
# Standardization


@dataclass(frozen=True)
class Standardization:
    """Per-dimension training mean/std; zero-variance dims pass through as 0."""

    mean: np.ndarray
    std: np.ndarray
    degenerate: np.ndarray  # bool mask of zero-variance dimensions


def fit_standardization(X: np.ndarray) -> Standardization:
    X = np.asarray(X, dtype=np.float64)
    if X.size == 0:
        raise ValueError("cannot standardize an empty matrix")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    degenerate = std == 0.0
    std = np.where(degenerate, 1.0, std)
    return Standardization(mean=mean, std=std, degenerate=degenerate)


def apply_standardization(X: np.ndarray, s: Standardization) -> np.ndarray:
    return (np.asarray(X, dtype=np.float64) - s.mean) / s.std


# ---------------------------------------------------------------------------
# Feature-matrix cache (CSV contract of the `featurize` stage)


def compute_features(
    manifest: Manifest,
    config: PyramidConfig,
    jobs: int = 1,
) -> np.ndarray:
    """Descriptor matrix for every manifest row, in manifest order."""
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        paths = [manifest.label_map_file(s) for s in manifest.samples]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(
                pool.map(
                    _descriptor_for_path,
                    paths,
                    [config.levels] * len(paths),
                    [manifest.class_count] * len(paths),
                    chunksize=64,
                )
            )
    else:
        rows = [
            _descriptor_for_path(
                manifest.label_map_file(s), config.levels, manifest.class_count
            )
            for s in manifest.samples
        ]
    if not rows:
        return np.zeros((0, descriptor_length(config, manifest.class_count)))
    return np.stack(rows)


def _descriptor_for_path(path: Path, levels: int, class_count: int) -> np.ndarray:
    labels = load_label_map(path, class_count)
    return spp_descriptor(labels, PyramidConfig(levels), class_count)


def write_feature_cache(
    path: Path | str,
    manifest: Manifest,
    X: np.ndarray,
) -> None:
    X = np.asarray(X)
    if X.shape[0] != len(manifest.samples):
        raise ValueError("feature rows do not match manifest rows")
    dim = X.shape[1]
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(
            ["frame_id", *[f"f{i}" for i in range(dim)], "speed_kmh", "scenario", "split"]
        )
        for sample, row in zip(manifest.samples, X):
            writer.writerow(
                [sample.frame_id, *[repr(v) for v in row.tolist()],
                 repr(sample.speed_kmh), sample.scenario.value, sample.split.value]
            )


def load_feature_cache(
    path: Path | str,
) -> tuple[list[str], np.ndarray, np.ndarray, list[Scenario], list[Split]]:
    """Read a feature cache: (frame_ids, X, speeds, scenarios, splits)."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"feature cache not found: {path}")
    frame_ids: list[str] = []
    rows: list[list[float]] = []
    speeds: list[float] = []
    scenarios: list[Scenario] = []
    splits: list[Split] = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if (
            header is None
            or len(header) < 4
            or header[0] != "frame_id"
            or header[-3:] != ["speed_kmh", "scenario", "split"]
        ):
            raise ValueError(f"{path}: not a feature cache file")
        dim = len(header) - 4
        for row in reader:
            frame_ids.append(row[0])
            rows.append([float(v) for v in row[1 : 1 + dim]])
            speeds.append(float(row[1 + dim]))
            scenarios.append(Scenario(row[2 + dim]))
            splits.append(Split(row[3 + dim]))
    X = np.array(rows, dtype=np.float64).reshape(len(rows), dim)
    return frame_ids, X, np.array(speeds), scenarios, splits
