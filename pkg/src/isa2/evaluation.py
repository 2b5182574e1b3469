"""MAE metric, joint/independent training regimes, reports and speed traces."""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .dataset import Manifest, Sample, Scenario, Split, filter_manifest
from .features import (
    PyramidConfig,
    Standardization,
    apply_standardization,
    compute_features,
    fit_standardization,
)
from .regressors import (
    STANDARDIZED_KINDS,
    ModelBundle,
    TrainConfig,
    fit,
    hyperparameters_for,
    predict,
)

REGIMES = ("joint", "independent")
JOINT_SCOPE = "all"


class RegimeError(ValueError):
    """A regime is missing a required train or test partition."""


@dataclass(frozen=True)
class EvalReport:
    regime: str
    rows: tuple[tuple[str, float, float], ...]  # (method, urban MAE, highway MAE)
    n_test: Mapping[str, int]  # scenario value -> test row count
    config_digest: str


def mae(predictions: np.ndarray, truths: np.ndarray) -> float:
    """Mean absolute error, (1/K) * sum(|truth - prediction|)."""
    predictions = np.asarray(predictions, dtype=np.float64)
    truths = np.asarray(truths, dtype=np.float64)
    if predictions.shape != truths.shape:
        raise ValueError(
            f"length mismatch: {predictions.shape} predictions vs "
            f"{truths.shape} truths"
        )
    if predictions.size == 0:
        raise ValueError("mae of empty vectors is undefined")
    return float(np.abs(truths - predictions).mean())


def config_digest(kind: str, config: TrainConfig, levels: int) -> str:
    hyper = hyperparameters_for(kind, config)
    blob = f"{kind}|levels={levels}|" + "|".join(
        f"{k}={hyper[k]!r}" for k in sorted(hyper)
    )
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


def regime_scopes(regime: str) -> tuple[str, ...]:
    if regime == "joint":
        return (JOINT_SCOPE,)
    if regime == "independent":
        return tuple(s.value for s in Scenario)
    raise ValueError(f"unknown regime {regime!r}; expected one of {REGIMES}")


def fit_regime_models(
    X: np.ndarray,
    y: np.ndarray,
    scenarios: Sequence[Scenario],
    splits: Sequence[Split],
    kind: str,
    config: TrainConfig,
    regime: str,
) -> dict[str, ModelBundle]:
    """One model per regime scope: "all" for joint, one per scenario otherwise."""
    scenarios = list(scenarios)
    splits = list(splits)
    bundles: dict[str, ModelBundle] = {}
    for scope in regime_scopes(regime):
        rows = np.array(
            [
                i
                for i in range(len(splits))
                if splits[i] == Split.TRAIN
                and (scope == JOINT_SCOPE or scenarios[i].value == scope)
            ]
        )
        if rows.size == 0:
            raise RegimeError(f"no training rows for scope {scope!r}")
        X_train = X[rows]
        standardization: Standardization | None = None
        if kind in STANDARDIZED_KINDS:
            standardization = fit_standardization(X_train)
            X_train = apply_standardization(X_train, standardization)
        model = fit(kind, X_train, y[rows], config)
        bundles[scope] = ModelBundle(model, standardization)
    return bundles


def predict_bundle(bundle: ModelBundle, X: np.ndarray) -> np.ndarray | float:
    if bundle.standardization is not None:
        X = apply_standardization(X, bundle.standardization)
    return predict(bundle.model, X)


def evaluate_bundles(
    bundles: Mapping[str, ModelBundle],
    X: np.ndarray,
    y: np.ndarray,
    scenarios: Sequence[Scenario],
    splits: Sequence[Split],
    kind: str,
    config: TrainConfig,
    levels: int,
    regime: str,
) -> EvalReport:
    """Per-scenario test MAE of the regime's models."""
    scenarios = list(scenarios)
    splits = list(splits)
    per_scenario: dict[str, float] = {}
    n_test: dict[str, int] = {}
    for scenario in Scenario:
        rows = np.array(
            [
                i
                for i in range(len(splits))
                if splits[i] == Split.TEST and scenarios[i] == scenario
            ]
        )
        if rows.size == 0:
            raise RegimeError(f"no test rows for scenario {scenario.value!r}")
        scope = JOINT_SCOPE if regime == "joint" else scenario.value
        pred = predict_bundle(bundles[scope], X[rows])
        per_scenario[scenario.value] = mae(pred, y[rows])
        n_test[scenario.value] = int(rows.size)
    return EvalReport(
        regime=regime,
        rows=(
            (
                kind,
                per_scenario[Scenario.URBAN.value],
                per_scenario[Scenario.HIGHWAY.value],
            ),
        ),
        n_test=n_test,
        config_digest=config_digest(kind, config, levels),
    )


def run_regime(
    manifest: Manifest,
    kind: str,
    config: TrainConfig,
    pyramid: PyramidConfig,
    regime: str,
    jobs: int = 1,
) -> EvalReport:
    """Fit and evaluate one solver under one regime, end to end."""
    X = compute_features(manifest, pyramid, jobs=jobs)
    y = np.array([s.speed_kmh for s in manifest.samples])
    scenarios = [s.scenario for s in manifest.samples]
    splits = [s.split for s in manifest.samples]
    bundles = fit_regime_models(X, y, scenarios, splits, kind, config, regime)
    return evaluate_bundles(
        bundles, X, y, scenarios, splits, kind, config, pyramid.levels, regime
    )


# ---------------------------------------------------------------------------
# Report serialization

REPORT_HEADER = ["regime", "method", "scenario", "mae_kmh", "n_test", "config_digest"]


def write_report_csv(path: Path | str, reports: Sequence[EvalReport]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(REPORT_HEADER)
        for report in reports:
            for method, urban, highway in report.rows:
                for scenario, value in (
                    (Scenario.URBAN.value, urban),
                    (Scenario.HIGHWAY.value, highway),
                ):
                    writer.writerow(
                        [
                            report.regime,
                            method,
                            scenario,
                            repr(value),
                            report.n_test[scenario],
                            report.config_digest,
                        ]
                    )


def format_report_table(reports: Sequence[EvalReport]) -> str:
    """Aligned text table: one row per method, MAE per scenario at 2 decimals."""
    header = ("Method", "Urban MAE (km/h)", "Highway MAE (km/h)")
    lines: list[tuple[str, str, str]] = []
    for report in reports:
        for method, urban, highway in report.rows:
            lines.append((f"{method} [{report.regime}]", f"{urban:.2f}", f"{highway:.2f}"))
    widths = [
        max(len(header[i]), *(len(line[i]) for line in lines)) if lines else len(header[i])
        for i in range(3)
    ]
    rule = "-+-".join("-" * w for w in widths)
    out = [
        " | ".join(header[i].ljust(widths[i]) for i in range(3)),
        rule,
    ]
    for line in lines:
        out.append(" | ".join(line[i].ljust(widths[i]) for i in range(3)))
    return "\n".join(out)


# ---------------------------------------------------------------------------
# Speed traces (CSV + standalone SVG)

TRACE_HEADER = ["frame_id", "true_kmh", "pred_kmh"]


def export_trace(
    samples: Sequence[Sample],
    predictions: np.ndarray,
    csv_path: Path | str,
    svg_path: Path | str | None = None,
) -> None:
    """Write per-frame true/predicted speeds in `samples` order."""
    predictions = np.asarray(predictions, dtype=np.float64)
    if len(samples) != predictions.shape[0]:
        raise ValueError("prediction count does not match sample count")
    with open(csv_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(TRACE_HEADER)
        for sample, pred in zip(samples, predictions):
            writer.writerow([sample.frame_id, repr(sample.speed_kmh), repr(float(pred))])
    if svg_path is not None:
        truths = np.array([s.speed_kmh for s in samples])
        Path(svg_path).write_text(trace_svg(truths, predictions))


def load_trace(path: Path | str) -> tuple[list[str], np.ndarray, np.ndarray]:
    frame_ids: list[str] = []
    truths: list[float] = []
    preds: list[float] = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != TRACE_HEADER:
            raise ValueError(f"{path}: not a trace file")
        for row in reader:
            frame_ids.append(row[0])
            truths.append(float(row[1]))
            preds.append(float(row[2]))
    return frame_ids, np.array(truths), np.array(preds)


def trace_svg(
    truths: np.ndarray,
    predictions: np.ndarray,
    width: int = 900,
    height: int = 320,
) -> str:
    """Standalone SVG: truth in blue, prediction in red, km/h over frame index."""
    truths = np.asarray(truths, dtype=np.float64)
    predictions = np.asarray(predictions, dtype=np.float64)
    margin = 48
    plot_w = width - 2 * margin
    plot_h = height - 2 * margin
    k = truths.shape[0]
    top = max(1.0, float(max(truths.max(), predictions.max())) * 1.05)

    def points(values: np.ndarray) -> str:
        xs = margin + (np.arange(k) / max(k - 1, 1)) * plot_w
        ys = height - margin - (values / top) * plot_h
        return " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" '
        f'stroke="black"/>',
        f'<text x="{width // 2}" y="{height - 10}" text-anchor="middle" '
        f'font-size="13">frame index</text>',
        f'<text x="14" y="{height // 2}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 14 {height // 2})">km/h</text>',
        f'<text x="{margin - 6}" y="{height - margin + 4}" text-anchor="end" '
        f'font-size="11">0</text>',
        f'<text x="{margin - 6}" y="{margin + 4}" text-anchor="end" '
        f'font-size="11">{top:.0f}</text>',
        f'<polyline fill="none" stroke="blue" stroke-width="1" '
        f'points="{points(truths)}"/>',
        f'<polyline fill="none" stroke="red" stroke-width="1" '
        f'points="{points(predictions)}"/>',
        f'<text x="{width - margin}" y="{margin - 10}" text-anchor="end" '
        f'font-size="12" fill="blue">true</text>',
        f'<text x="{width - margin - 50}" y="{margin - 10}" text-anchor="end" '
        f'font-size="12" fill="red">predicted</text>',
        "</svg>",
    ]
    return "\n".join(parts) + "\n"


def test_rows_for_scenario(manifest: Manifest, scenario: Scenario) -> Manifest:
    return filter_manifest(manifest, scenario, Split.TEST)
