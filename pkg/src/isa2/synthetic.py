"""Synthetic dataset generator with a planted linear speed relation.

Each frame is a block-structured label map: a 4x4 grid of blocks in which
half of every block's pixels encode a latent "speed fraction" through the
scenario's signal class (with the scenario's filler class absorbing the
remainder) and the other half is drawn from a scenario-conditioned
Dirichlet mixture over the remaining classes, so every pyramid cell
carries varying content.

The annotated speed is computed *from the realized descriptor*:

    speed = clamp(bias + w . spp_descriptor(map, L=3) + eps, 0)

with (bias, w) fixed per scenario and recorded in planted_weights.csv, so
the map -> speed relation is exactly linear by construction. Latent speeds
are sampled from a moment-matched truncated normal and affinely corrected
so each (scenario, split) hits its target mean and standard deviation.

By default both scenarios share one relation (more visible road means a
higher proper speed, urban frames simply show less of it), so a single
joint regressor can be exact. With `per_scenario_relation` the scenarios
get conflicting relations (urban speed falls with the person fraction),
which only per-scenario regressors can fit exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .dataset import (
    DEFAULT_CLASS_COUNT,
    Manifest,
    Sample,
    Scenario,
    Split,
    write_label_map,
    write_manifest,
)
from .features import PyramidConfig, descriptor_length, spp_descriptor
from .fusion import synthetic_score_maps, write_score_map_set

PLANTED_WEIGHTS_FILENAME = "planted_weights.csv"
LABEL_DIR_NAME = "labels"
SCORE_MAP_DIR_NAME = "score_maps"

# Default per-(scenario, split) speed moments in km/h: (mean, std).
DEFAULT_SPEED_TARGETS: Mapping[tuple[Scenario, Split], tuple[float, float]] = (
    MappingProxyType(
        {
            (Scenario.HIGHWAY, Split.TRAIN): (84.31, 18.15),
            (Scenario.HIGHWAY, Split.TEST): (95.08, 12.81),
            (Scenario.URBAN, Split.TRAIN): (19.55, 13.60),
            (Scenario.URBAN, Split.TEST): (19.59, 14.78),
        }
    )
)

_BLOCK_GRID = 4  # blocks per axis; aligned with the finest pyramid level
_SIGNAL_BUDGET = 0.5  # fraction of each block carrying the speed signal
_JITTER = 0.08  # per-block spread of the signal fraction
_SPEED_FLOOR = 1.0  # km/h; keeps noise-free speeds clear of the clamp


@dataclass(frozen=True)
class SyntheticConfig:
    out_dir: Path
    frames_per_scenario_split: int
    map_height: int = 64
    map_width: int = 64
    class_count: int = DEFAULT_CLASS_COUNT
    noise_std: float = 0.0
    rng_seed: int = 0
    targets: Mapping[tuple[Scenario, Split], tuple[float, float]] = field(
        default_factory=lambda: DEFAULT_SPEED_TARGETS
    )
    per_scenario_relation: bool = False
    emit_score_maps: bool = False

    def __post_init__(self) -> None:
        if self.frames_per_scenario_split < 1:
            raise ValueError("empty dataset: frames_per_scenario_split must be >= 1")
        if self.map_height < 16 or self.map_width < 16:
            raise ValueError("map dimensions must be at least 16x16")
        if self.class_count < 4:
            raise ValueError("class_count must be at least 4")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        for (scenario, split), (mean, std) in self.targets.items():
            if mean < 0:
                raise ValueError(
                    f"infeasible target: mean {mean} < 0 for "
                    f"{scenario.value}/{split.value}"
                )
            if std <= 0:
                raise ValueError(
                    f"target std must be > 0 for {scenario.value}/{split.value}"
                )


@dataclass(frozen=True)
class _Recipe:
    signal_class: int
    filler_class: int
    speed_at_zero: float  # speed when the signal fraction is 0
    speed_at_full: float  # speed when the signal fraction fills its budget
    context_alpha: np.ndarray  # Dirichlet concentration, 0 at signal/filler


def _curated_alpha(class_count: int, heavy: dict[int, float]) -> np.ndarray:
    alpha = np.full(class_count, 0.25)
    for cls, weight in heavy.items():
        alpha[cls] = weight
    return alpha


def _scenario_spans(config: SyntheticConfig) -> dict[Scenario, tuple[float, float]]:
    spans: dict[Scenario, tuple[float, float]] = {}
    for scenario in Scenario:
        pairs = [
            config.targets[(scenario, split)]
            for split in Split
            if (scenario, split) in config.targets
        ]
        if not pairs:
            raise ValueError(f"no moment targets for scenario {scenario.value}")
        sigma = max(p[1] for p in pairs)
        lo = min(p[0] for p in pairs) - 6.5 * sigma
        hi = max(p[0] for p in pairs) + 6.5 * sigma
        spans[scenario] = (lo, hi)
    return spans


def _recipes(config: SyntheticConfig) -> dict[Scenario, _Recipe]:
    # Cityscapes-style vocabulary when wide enough: road 0, sidewalk 1,
    # building 2, pole 5, vegetation 8, terrain 9, sky 10, person 11, car 13.
    c = config.class_count
    curated = c >= 14
    spans = _scenario_spans(config)
    highway_alpha = (
        _curated_alpha(c, {10: 6.0, 8: 5.0, 13: 3.0, 4: 1.0, 7: 0.8})
        if curated
        else np.ones(c)
    )
    urban_alpha = (
        _curated_alpha(c, {2: 6.0, 1: 3.0, 11: 2.0, 13: 3.0, 5: 1.0})
        if curated
        else np.ones(c)
    )

    if config.per_scenario_relation:
        # Conflicting relations: highway speed rises with visible road,
        # urban speed falls with the person fraction.
        highway = _Recipe(
            signal_class=0,
            filler_class=9 if curated else 2,
            speed_at_zero=spans[Scenario.HIGHWAY][0],
            speed_at_full=spans[Scenario.HIGHWAY][1],
            context_alpha=highway_alpha.copy(),
        )
        urban = _Recipe(
            signal_class=11 if curated else 1,
            filler_class=1 if curated else 3,
            speed_at_zero=spans[Scenario.URBAN][1],
            speed_at_full=spans[Scenario.URBAN][0],
            context_alpha=(
                _curated_alpha(c, {2: 6.0, 0: 4.0, 13: 3.0, 8: 2.0, 5: 1.0})
                if curated
                else np.ones(c)
            ),
        )
    else:
        # One shared relation across scenarios; only the latent speed range
        # and the context mixtures differ.
        lo = min(s[0] for s in spans.values())
        hi = max(s[1] for s in spans.values())
        signal, filler = (0, 9) if curated else (0, 2)
        highway = _Recipe(signal, filler, lo, hi, highway_alpha.copy())
        urban = _Recipe(signal, filler, lo, hi, urban_alpha.copy())
    for recipe in (highway, urban):
        recipe.context_alpha[recipe.signal_class] = 0.0
        recipe.context_alpha[recipe.filler_class] = 0.0
    return {Scenario.HIGHWAY: highway, Scenario.URBAN: urban}


# ---------------------------------------------------------------------------
# Moment-matched truncated normal latents


def _norm_cdf(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def _norm_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def _trunc_ratio(alpha: float) -> float:
    """std^2 / (mean - bound)^2 of a normal truncated below at alpha sigmas."""
    tail = 1.0 - _norm_cdf(alpha)
    if tail < 1e-300:
        return 1.0
    lam = _norm_pdf(alpha) / tail
    var = 1.0 + alpha * lam - lam * lam
    return var / (lam - alpha) ** 2


def _solve_truncated_normal(mean: float, std: float, lower: float) -> tuple[float, float]:
    """(mu, sigma) of a normal whose truncation below `lower` hits (mean, std)."""
    target = (std / (mean - lower)) ** 2
    lo, hi = -40.0, 8.0
    if target >= _trunc_ratio(hi):
        alpha = hi
    elif target <= _trunc_ratio(lo):
        alpha = lo
    else:
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if _trunc_ratio(mid) < target:
                lo = mid
            else:
                hi = mid
        alpha = 0.5 * (lo + hi)
    tail = 1.0 - _norm_cdf(alpha)
    lam = _norm_pdf(alpha) / tail if tail > 1e-300 else max(alpha, 1.0)
    sigma = (mean - lower) / (lam - alpha)
    mu = lower - alpha * sigma
    return mu, sigma


def _sample_latents(
    rng: np.random.Generator, n: int, mean: float, std: float
) -> np.ndarray:
    """n latent speeds with empirical mean/std matched to the targets."""
    floor = min(_SPEED_FLOOR, mean / 2.0)
    if std <= 0 or mean - floor < 1e-9:
        return np.full(n, mean)
    mu, sigma = _solve_truncated_normal(mean, std, floor)
    u = rng.normal(mu, sigma, size=n)
    for _ in range(100):
        below = u < floor
        if not below.any():
            break
        u[below] = rng.normal(mu, sigma, size=int(below.sum()))
    u = np.maximum(u, floor)
    if n > 1 and u.std() > 0:
        u = mean + (u - u.mean()) * (std / u.std())
    else:
        u = np.full(n, mean)
    return np.maximum(u, floor)


# ---------------------------------------------------------------------------
# Map assembly


def _apportion(ideal: np.ndarray, total: int) -> np.ndarray:
    """Integer counts summing to `total`, by largest remainder of `ideal`."""
    if total == 0:
        return np.zeros(ideal.shape, dtype=np.int64)
    weight = ideal.sum()
    scaled = ideal * (total / weight) if weight > 0 else np.full_like(ideal, total / ideal.size)
    base = np.floor(scaled).astype(np.int64)
    short = total - int(base.sum())
    if short > 0:
        order = np.argsort(-(scaled - base), kind="stable")
        base[order[:short]] += 1
    return base


def _block_bounds(size: int) -> list[tuple[int, int]]:
    return [
        (i * size // _BLOCK_GRID, (i + 1) * size // _BLOCK_GRID)
        for i in range(_BLOCK_GRID)
    ]


def _build_map(
    rng: np.random.Generator,
    recipe: _Recipe,
    t: float,
    height: int,
    width: int,
    class_count: int,
) -> np.ndarray:
    labels = np.empty((height, width), dtype=np.uint8)
    row_bounds = _block_bounds(height)
    col_bounds = _block_bounds(width)
    sizes = np.array(
        [(y1 - y0) * (x1 - x0) for y0, y1 in row_bounds for x0, x1 in col_bounds],
        dtype=np.int64,
    )
    budgets = sizes // 2
    jitter = rng.uniform(-_JITTER, _JITTER, size=sizes.size)
    jitter -= jitter.mean()
    t_blocks = np.clip(t + jitter, 0.02, 0.98)
    total_signal = int(np.floor(budgets.sum() * t + 0.5))
    signal_counts = np.minimum(_apportion(budgets * t_blocks, total_signal), budgets)
    context_ids = np.flatnonzero(recipe.context_alpha > 0)
    alpha = recipe.context_alpha[context_ids]
    k = 0
    for y0, y1 in row_bounds:
        for x0, x1 in col_bounds:
            n = sizes[k]
            c_sig = int(signal_counts[k])
            c_fill = int(budgets[k]) - c_sig
            ctx = _apportion(rng.dirichlet(alpha), int(n - budgets[k]))
            ids = np.concatenate(
                (
                    np.array([recipe.signal_class, recipe.filler_class]),
                    context_ids,
                )
            )
            counts = np.concatenate((np.array([c_sig, c_fill]), ctx))
            block = np.repeat(ids.astype(np.uint8), counts)
            labels[y0:y1, x0:x1] = block.reshape(y1 - y0, x1 - x0)
            k += 1
    return labels


# ---------------------------------------------------------------------------
# Generation


def planted_weight_vector(
    recipe: _Recipe, height: int, width: int, class_count: int
) -> tuple[float, np.ndarray]:
    """(bias, w) such that speed = bias + w . spp_descriptor(map, L=3)."""
    sizes = np.array(
        [
            (y1 - y0) * (x1 - x0)
            for y0, y1 in _block_bounds(height)
            for x0, x1 in _block_bounds(width)
        ],
        dtype=np.int64,
    )
    budget_fraction = (sizes // 2).sum() / sizes.sum()
    span = recipe.speed_at_full - recipe.speed_at_zero
    w = np.zeros(descriptor_length(PyramidConfig(3), class_count))
    w[recipe.signal_class] = span / budget_fraction
    return recipe.speed_at_zero, w


def write_planted_weights(
    path: Path, rows: dict[Scenario, tuple[float, np.ndarray]]
) -> None:
    with open(path, "w", newline="") as f:
        for scenario in Scenario:
            bias, w = rows[scenario]
            f.write(
                ",".join([scenario.value, repr(bias), *[repr(v) for v in w.tolist()]])
            )
            f.write("\n")


def load_planted_weights(path: Path | str) -> dict[Scenario, tuple[float, np.ndarray]]:
    out: dict[Scenario, tuple[float, np.ndarray]] = {}
    for line in Path(path).read_text().splitlines():
        parts = line.split(",")
        out[Scenario(parts[0])] = (
            float(parts[1]),
            np.array([float(v) for v in parts[2:]]),
        )
    return out


def generate_synthetic(config: SyntheticConfig) -> Manifest:
    """Write label maps, manifest and planted-weights sidecar; return the manifest.

    Everything is a pure function of the config (seed included): rerunning
    with identical inputs produces byte-identical files.
    """
    out_dir = Path(config.out_dir)
    label_dir = out_dir / LABEL_DIR_NAME
    label_dir.mkdir(parents=True, exist_ok=True)
    score_dir = out_dir / SCORE_MAP_DIR_NAME
    if config.emit_score_maps:
        score_dir.mkdir(parents=True, exist_ok=True)
    recipes = _recipes(config)
    pyramid = PyramidConfig(3)
    planted = {
        scenario: planted_weight_vector(
            recipes[scenario], config.map_height, config.map_width, config.class_count
        )
        for scenario in Scenario
    }

    seed_root = np.random.SeedSequence(config.rng_seed)
    cells = [
        (scenario, split)
        for scenario in (Scenario.URBAN, Scenario.HIGHWAY)
        for split in (Split.TRAIN, Split.TEST)
    ]
    children = seed_root.spawn(len(cells))

    samples: list[Sample] = []
    for (scenario, split), child in zip(cells, children):
        if (scenario, split) not in config.targets:
            raise ValueError(
                f"no moment targets for {scenario.value}/{split.value}"
            )
        rng = np.random.default_rng(child)
        mean, std = config.targets[(scenario, split)]
        n = config.frames_per_scenario_split
        recipe = recipes[scenario]
        bias, w = planted[scenario]
        span = recipe.speed_at_full - recipe.speed_at_zero
        latent_std = math.sqrt(max(std**2 - config.noise_std**2, (0.05 * std) ** 2))
        latents = _sample_latents(rng, n, mean, latent_std)
        noise = rng.normal(0.0, config.noise_std, size=n) if config.noise_std > 0 else np.zeros(n)
        for i in range(n):
            t = float(np.clip((latents[i] - recipe.speed_at_zero) / span, 0.02, 0.98))
            labels = _build_map(
                rng, recipe, t, config.map_height, config.map_width, config.class_count
            )
            descriptor = spp_descriptor(labels, pyramid, config.class_count)
            speed = max(0.0, bias + float(w @ descriptor) + float(noise[i]))
            frame_id = f"{scenario.value}_{split.value}_{i:05d}"
            rel_path = f"{LABEL_DIR_NAME}/{frame_id}.pgm"
            write_label_map(label_dir / f"{frame_id}.pgm", labels)
            if config.emit_score_maps:
                score_set = synthetic_score_maps(labels, config.class_count, rng)
                write_score_map_set(score_dir, frame_id, score_set)
            samples.append(Sample(frame_id, rel_path, scenario, split, speed))

    manifest = Manifest(
        samples=tuple(samples),
        class_count=config.class_count,
        source_note="synthetic planted-relation dataset",
        root=out_dir,
    )
    write_manifest(out_dir / "manifest.csv", manifest)
    write_planted_weights(out_dir / PLANTED_WEIGHTS_FILENAME, planted)
    return manifest
