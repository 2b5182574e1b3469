"""Command-line pipeline: generate, fuse, featurize, train, evaluate, trace.

All stages read one INI config file; relative paths are resolved against
the config file's directory, so a run is reproducible from (config, seed)
alone. Exit codes: 0 success, 2 config/contract error (including missing
prerequisite artifacts), 3 I/O failure, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .dataset import (
    DEFAULT_CLASS_COUNT,
    Sample,
    Scenario,
    Split,
    load_manifest,
    write_label_map,
)
from .evaluation import (
    JOINT_SCOPE,
    REGIMES,
    evaluate_bundles,
    export_trace,
    fit_regime_models,
    format_report_table,
    predict_bundle,
    regime_scopes,
    write_report_csv,
)
from .features import (
    PyramidConfig,
    compute_features,
    load_feature_cache,
    write_feature_cache,
)
from .fusion import argmax_labels, fuse_scales, read_score_map_set
from .regressors import (
    SOLVER_KINDS,
    LinearModel,
    MLPModel,
    NumericalError,
    TrainConfig,
    load_model,
    save_model,
)
from .synthetic import DEFAULT_SPEED_TARGETS, SyntheticConfig, generate_synthetic

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

SUBCOMMANDS = ("generate", "fuse", "featurize", "train", "evaluate", "trace")


class ConfigError(ValueError):
    """Unusable configuration file or option."""


@dataclass(frozen=True)
class PipelinePaths:
    data_dir: Path
    manifest: Path
    label_dir: Path
    score_map_dir: Path
    feature_cache: Path
    model_dir: Path
    report_dir: Path


@dataclass(frozen=True)
class PipelineConfig:
    paths: PipelinePaths
    synthetic: SyntheticConfig
    pyramid: PyramidConfig
    train: TrainConfig
    solver: str
    regime: str


def _get(parser: configparser.ConfigParser, section: str, key: str, default, cast):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key)
    try:
        return cast(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from None


def _bool(raw: str) -> bool:
    value = raw.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(value)


def _lr_schedule(raw: str) -> tuple[tuple[int, float], ...]:
    out = []
    for part in raw.split(","):
        until, lr = part.split(":")
        out.append((int(until), float(lr)))
    return tuple(out)


def load_pipeline_config(path: Path | str, seed: int | None = None) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path)
    except configparser.Error as e:
        raise ConfigError(f"{path}: {e}") from None

    base = path.parent

    def resolve(raw: str) -> Path:
        p = Path(raw)
        return p if p.is_absolute() else base / p

    out_dir = resolve(_get(parser, "paths", "out_dir", "run", str))
    data_dir = resolve(_get(parser, "paths", "data_dir", None, str) or str(out_dir / "data"))
    paths = PipelinePaths(
        data_dir=data_dir,
        manifest=resolve(_get(parser, "paths", "manifest", None, str) or str(data_dir / "manifest.csv")),
        label_dir=resolve(_get(parser, "paths", "label_dir", None, str) or str(data_dir / "labels")),
        score_map_dir=resolve(
            _get(parser, "paths", "score_map_dir", None, str) or str(data_dir / "score_maps")
        ),
        feature_cache=resolve(
            _get(parser, "paths", "feature_cache", None, str) or str(out_dir / "features.csv")
        ),
        model_dir=resolve(_get(parser, "paths", "model_dir", None, str) or str(out_dir / "models")),
        report_dir=resolve(_get(parser, "paths", "report_dir", None, str) or str(out_dir / "reports")),
    )

    targets = {}
    for scenario in Scenario:
        for split in Split:
            default = DEFAULT_SPEED_TARGETS[(scenario, split)]
            mean = _get(parser, "synthetic", f"{scenario.value}_{split.value}_mean", default[0], float)
            std = _get(parser, "synthetic", f"{scenario.value}_{split.value}_std", default[1], float)
            targets[(scenario, split)] = (mean, std)
    synth_seed = _get(parser, "synthetic", "seed", 0, int)
    train_seed = _get(parser, "train", "seed", 0, int)
    if seed is not None:
        synth_seed = train_seed = seed
    try:
        synthetic = SyntheticConfig(
            out_dir=paths.data_dir,
            frames_per_scenario_split=_get(
                parser, "synthetic", "frames_per_scenario_split", 100, int
            ),
            map_height=_get(parser, "synthetic", "map_height", 64, int),
            map_width=_get(parser, "synthetic", "map_width", 64, int),
            class_count=_get(parser, "synthetic", "class_count", DEFAULT_CLASS_COUNT, int),
            noise_std=_get(parser, "synthetic", "noise_std_kmh", 0.0, float),
            rng_seed=synth_seed,
            targets=targets,
            per_scenario_relation=_get(
                parser, "synthetic", "per_scenario_relation", False, _bool
            ),
            emit_score_maps=_get(parser, "synthetic", "emit_score_maps", False, _bool),
        )
        pyramid = PyramidConfig(levels=_get(parser, "features", "levels", 3, int))
    except ValueError as e:
        raise ConfigError(str(e)) from None

    train = TrainConfig(
        ridge_lambda=_get(parser, "train", "ridge_lambda", 0.0, float),
        lasso_lambda=_get(parser, "train", "lasso_lambda", 0.01, float),
        lasso_tol=_get(parser, "train", "lasso_tol", 1e-9, float),
        lasso_max_sweeps=_get(parser, "train", "lasso_max_sweeps", 1000, int),
        svr_cost=_get(parser, "train", "svr_cost", 1.0, float),
        svr_epsilon=_get(parser, "train", "svr_epsilon", 0.5, float),
        svr_epochs=_get(parser, "train", "svr_epochs", 60, int),
        svr_step_scale=_get(parser, "train", "svr_step_scale", 1.0, float),
        boosting_trees=_get(parser, "train", "boosting_trees", 100, int),
        boosting_depth=_get(parser, "train", "boosting_depth", 3, int),
        boosting_shrinkage=_get(parser, "train", "boosting_shrinkage", 0.1, float),
        mlp_hidden=_get(parser, "train", "mlp_hidden", 32, int),
        mlp_iterations=_get(parser, "train", "mlp_iterations", 4000, int),
        mlp_batch=_get(parser, "train", "mlp_batch", 20, int),
        mlp_momentum=_get(parser, "train", "mlp_momentum", 0.9, float),
        mlp_lr_schedule=_get(
            parser, "train", "mlp_lr_schedule", None, _lr_schedule
        ) or TrainConfig().mlp_lr_schedule,
        rng_seed=train_seed,
    )
    solver = _get(parser, "train", "solver", "ols", str)
    if solver not in SOLVER_KINDS:
        raise ConfigError(f"[train] solver: unknown kind {solver!r}, expected {SOLVER_KINDS}")
    regime = _get(parser, "train", "regime", "independent", str)
    if regime not in REGIMES:
        raise ConfigError(f"[train] regime: unknown regime {regime!r}, expected {REGIMES}")
    return PipelineConfig(paths, synthetic, pyramid, train, solver, regime)


def _model_path(cfg: PipelineConfig, regime: str, scope: str) -> Path:
    return cfg.paths.model_dir / f"model_{regime}_{scope}.isa2mdl"


def cmd_generate(cfg: PipelineConfig, jobs: int) -> int:
    manifest = generate_synthetic(cfg.synthetic)
    for scenario in Scenario:
        for split in Split:
            speeds = [
                s.speed_kmh
                for s in manifest.samples
                if s.scenario == scenario and s.split == split
            ]
            arr = np.array(speeds)
            print(
                f"{scenario.value}/{split.value}: mean={arr.mean():.2f} "
                f"std={arr.std():.2f} n={arr.size}"
            )
    print(f"wrote {len(manifest)} frames under {cfg.synthetic.out_dir}", file=sys.stderr)
    return EXIT_OK


def _fuse_one(args: tuple[Path, Path, str]) -> str:
    score_dir, label_dir, frame_id = args
    score_set = read_score_map_set(score_dir, frame_id)
    labels = argmax_labels(fuse_scales(score_set))
    write_label_map(label_dir / f"{frame_id}.pgm", labels)
    return frame_id


def cmd_fuse(cfg: PipelineConfig, jobs: int) -> int:
    score_dir = cfg.paths.score_map_dir
    if not score_dir.is_dir():
        raise FileNotFoundError(f"score map directory not found: {score_dir}")
    frame_ids = sorted({p.name.rsplit("__", 1)[0] for p in score_dir.glob("*.smap")})
    if not frame_ids:
        raise FileNotFoundError(f"no .smap files in {score_dir}")
    cfg.paths.label_dir.mkdir(parents=True, exist_ok=True)
    work = [(score_dir, cfg.paths.label_dir, fid) for fid in frame_ids]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(_fuse_one, work, chunksize=16))
    else:
        for item in work:
            _fuse_one(item)
    print(f"fused {len(frame_ids)} frames into {cfg.paths.label_dir}", file=sys.stderr)
    return EXIT_OK


def cmd_featurize(cfg: PipelineConfig, jobs: int) -> int:
    manifest = load_manifest(cfg.paths.manifest, class_count=cfg.synthetic.class_count)
    X = compute_features(manifest, cfg.pyramid, jobs=jobs)
    write_feature_cache(cfg.paths.feature_cache, manifest, X)
    print(
        f"wrote {X.shape[0]}x{X.shape[1]} feature cache to {cfg.paths.feature_cache}",
        file=sys.stderr,
    )
    return EXIT_OK


def _fit_summary(scope: str, bundle) -> str:
    model = bundle.model
    extra = ""
    if isinstance(model, LinearModel):
        nz = int(np.count_nonzero(model.weights))
        extra = f" nonzero={nz} converged={model.converged}"
    elif isinstance(model, MLPModel):
        extra = f" final_loss={model.loss_curve[-1]:.6g}"
    return f"scope={scope}{extra}"


def cmd_train(cfg: PipelineConfig, jobs: int) -> int:
    _, X, y, scenarios, splits = load_feature_cache(cfg.paths.feature_cache)
    bundles = fit_regime_models(
        X, y, scenarios, splits, cfg.solver, cfg.train, cfg.regime
    )
    cfg.paths.model_dir.mkdir(parents=True, exist_ok=True)
    for scope, bundle in bundles.items():
        save_model(_model_path(cfg, cfg.regime, scope), bundle)
        print(f"trained {cfg.solver} [{cfg.regime}] {_fit_summary(scope, bundle)}",
              file=sys.stderr)
    return EXIT_OK


def _load_bundles(cfg: PipelineConfig) -> dict[str, object]:
    bundles = {}
    for scope in regime_scopes(cfg.regime):
        path = _model_path(cfg, cfg.regime, scope)
        if not path.is_file():
            raise FileNotFoundError(
                f"missing trained model for scope {scope!r}: {path} (run `train` first)"
            )
        bundles[scope] = load_model(path)
    return bundles


def cmd_evaluate(cfg: PipelineConfig, jobs: int) -> int:
    _, X, y, scenarios, splits = load_feature_cache(cfg.paths.feature_cache)
    bundles = _load_bundles(cfg)
    report = evaluate_bundles(
        bundles, X, y, scenarios, splits, cfg.solver, cfg.train,
        cfg.pyramid.levels, cfg.regime,
    )
    cfg.paths.report_dir.mkdir(parents=True, exist_ok=True)
    out = cfg.paths.report_dir / f"report_{cfg.regime}.csv"
    write_report_csv(out, [report])
    print(format_report_table([report]))
    print(f"wrote {out}", file=sys.stderr)
    return EXIT_OK


def cmd_trace(cfg: PipelineConfig, jobs: int) -> int:
    frame_ids, X, y, scenarios, splits = load_feature_cache(cfg.paths.feature_cache)
    bundles = _load_bundles(cfg)
    cfg.paths.report_dir.mkdir(parents=True, exist_ok=True)
    for scenario in Scenario:
        rows = [
            i
            for i in range(len(splits))
            if splits[i] == Split.TEST and scenarios[i] == scenario
        ]
        if not rows:
            continue
        scope = JOINT_SCOPE if cfg.regime == "joint" else scenario.value
        preds = np.asarray(predict_bundle(bundles[scope], X[rows]))
        samples = [
            Sample(frame_ids[i], "", scenario, Split.TEST, float(y[i])) for i in rows
        ]
        stem = cfg.paths.report_dir / f"trace_{cfg.regime}_{scenario.value}"
        export_trace(samples, preds, stem.with_suffix(".csv"), stem.with_suffix(".svg"))
        print(f"wrote {stem.with_suffix('.csv')} and .svg", file=sys.stderr)
    return EXIT_OK


_HANDLERS = {
    "generate": cmd_generate,
    "fuse": cmd_fuse,
    "featurize": cmd_featurize,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "trace": cmd_trace,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="INI pipeline config")
    common.add_argument("--seed", type=int, default=None,
                        help="override every rng seed in the config")
    common.add_argument("--jobs", type=int, default=1,
                        help="parallel workers for per-frame stages")
    parser = argparse.ArgumentParser(
        prog="isa2",
        description="proper-speed regression pipeline over semantic label maps",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name in ("train", "evaluate", "trace"):
            p.add_argument("--regime", choices=REGIMES, default=None,
                           help="override the [train] regime")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_pipeline_config(args.config, seed=args.seed)
        if getattr(args, "regime", None):
            cfg = replace(cfg, regime=args.regime)
        if args.jobs < 1:
            raise ConfigError(f"--jobs must be >= 1, got {args.jobs}")
        return _HANDLERS[args.command](cfg, args.jobs)
    except NumericalError as e:
        print(f"isa2: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except FileNotFoundError as e:
        print(f"isa2: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"isa2: i/o failure: {e}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ValueError) as e:
        print(f"isa2: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
