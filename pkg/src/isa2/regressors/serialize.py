"""Versioned binary model files.

Layout (all integers little-endian):

    magic "ISA2MODL" | u16 version (1) | u8 kind tag | u8 has_standardization
    [standardization: mean, std, degenerate arrays]
    kind payload

Kind tags: 1 ols, 2 ridge, 3 lasso, 4 svr, 5 boosting, 6 mlp.

Arrays are stored as u8 dtype tag (0 f8, 1 i4, 2 bool u8) | u32 ndim |
u32 dims... | raw bytes. Scalars, strings and flags use the struct codes
in the writer below. Floats are stored as raw binary64, so round-trips
are bit-exact.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from io import BufferedReader, BufferedWriter
from pathlib import Path

import numpy as np

from ..features import Standardization
from .boosting import BoostedModel, Tree
from .config import Model
from .linear import LinearModel
from .mlp import MLPModel

MODEL_MAGIC = b"ISA2MODL"
MODEL_VERSION = 1

_KIND_TAGS = {"ols": 1, "ridge": 2, "lasso": 3, "svr": 4, "boosting": 5, "mlp": 6}
_TAG_KINDS = {v: k for k, v in _KIND_TAGS.items()}
_DTYPE_TAGS = {np.dtype("<f8"): 0, np.dtype("<i4"): 1, np.dtype(bool): 2}
_TAG_DTYPES = {0: "<f8", 1: "<i4", 2: "u1"}


class ModelFormatError(ValueError):
    """Malformed model file."""


@dataclass(frozen=True)
class ModelBundle:
    """A trained model plus the input standardization it was fitted with."""

    model: Model
    standardization: Standardization | None = None


def _write_array(f: BufferedWriter, arr: np.ndarray) -> None:
    arr = np.ascontiguousarray(arr)
    if arr.dtype == np.dtype(bool):
        tag, payload = 2, arr.astype("u1")
    elif arr.dtype.kind == "i":
        tag, payload = 1, arr.astype("<i4")
    else:
        tag, payload = 0, arr.astype("<f8")
    f.write(struct.pack("<BI", tag, arr.ndim))
    f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    f.write(payload.tobytes())


def _read_array(f: BufferedReader) -> np.ndarray:
    tag, ndim = struct.unpack("<BI", f.read(5))
    shape = struct.unpack(f"<{ndim}I", f.read(4 * ndim))
    dtype = np.dtype(_TAG_DTYPES[tag])
    count = int(np.prod(shape)) if shape else 1
    arr = np.frombuffer(f.read(count * dtype.itemsize), dtype=dtype).reshape(shape)
    if tag == 2:
        arr = arr.astype(bool)
    return arr.copy()


def _write_hyper(f: BufferedWriter, hyper: dict[str, float]) -> None:
    f.write(struct.pack("<I", len(hyper)))
    for key in sorted(hyper):
        encoded = key.encode("utf-8")
        f.write(struct.pack("<H", len(encoded)))
        f.write(encoded)
        f.write(struct.pack("<d", float(hyper[key])))


def _read_hyper(f: BufferedReader) -> dict[str, float]:
    (count,) = struct.unpack("<I", f.read(4))
    out: dict[str, float] = {}
    for _ in range(count):
        (klen,) = struct.unpack("<H", f.read(2))
        key = f.read(klen).decode("utf-8")
        (value,) = struct.unpack("<d", f.read(8))
        out[key] = value
    return out


def save_model(path: Path | str, bundle: ModelBundle) -> None:
    model = bundle.model
    if isinstance(model, LinearModel):
        tag = _KIND_TAGS[model.kind]
    elif isinstance(model, BoostedModel):
        tag = _KIND_TAGS["boosting"]
    elif isinstance(model, MLPModel):
        tag = _KIND_TAGS["mlp"]
    else:
        raise TypeError(f"cannot serialize {type(model)!r}")
    with open(path, "wb") as f:
        f.write(MODEL_MAGIC)
        f.write(struct.pack("<HBB", MODEL_VERSION, tag, int(bundle.standardization is not None)))
        if bundle.standardization is not None:
            s = bundle.standardization
            _write_array(f, s.mean)
            _write_array(f, s.std)
            _write_array(f, s.degenerate)
        if isinstance(model, LinearModel):
            f.write(struct.pack("<Bd", int(model.converged), model.bias))
            _write_array(f, model.weights)
            _write_hyper(f, model.hyperparameters)
        elif isinstance(model, BoostedModel):
            f.write(
                struct.pack(
                    "<dIIId",
                    model.base_prediction,
                    model.max_depth,
                    model.tree_count,
                    len(model.trees),
                    model.shrinkage,
                )
            )
            for tree in model.trees:
                _write_array(f, tree.feature)
                _write_array(f, tree.threshold)
                _write_array(f, tree.left)
                _write_array(f, tree.right)
                _write_array(f, tree.value)
            _write_array(f, np.asarray(model.train_mse, dtype=np.float64))
        else:
            f.write(struct.pack("<d", model.b2))
            _write_array(f, model.w1)
            _write_array(f, model.b1)
            _write_array(f, model.w2)
            _write_array(f, np.asarray(model.loss_curve, dtype=np.float64))


def load_model(path: Path | str) -> ModelBundle:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"model file not found: {path}")
    with open(path, "rb") as f:
        magic = f.read(len(MODEL_MAGIC))
        if magic != MODEL_MAGIC:
            raise ModelFormatError(f"{path}: bad magic {magic!r}")
        version, tag, has_std = struct.unpack("<HBB", f.read(4))
        if version != MODEL_VERSION:
            raise ModelFormatError(f"{path}: unsupported version {version}")
        if tag not in _TAG_KINDS:
            raise ModelFormatError(f"{path}: unknown model kind tag {tag}")
        standardization = None
        if has_std:
            mean = _read_array(f)
            std = _read_array(f)
            degenerate = _read_array(f)
            standardization = Standardization(mean, std, degenerate)
        kind = _TAG_KINDS[tag]
        model: Model
        if kind in ("ols", "ridge", "lasso", "svr"):
            converged, bias = struct.unpack("<Bd", f.read(9))
            weights = _read_array(f)
            hyper = _read_hyper(f)
            model = LinearModel(weights, bias, kind, hyper, bool(converged))
        elif kind == "boosting":
            base, max_depth, tree_count, n_trees, shrinkage = struct.unpack(
                "<dIIId", f.read(28)
            )
            trees = []
            for _ in range(n_trees):
                trees.append(
                    Tree(
                        _read_array(f),
                        _read_array(f),
                        _read_array(f),
                        _read_array(f),
                        _read_array(f),
                    )
                )
            train_mse = tuple(_read_array(f).tolist())
            model = BoostedModel(
                tuple(trees), shrinkage, base, max_depth, tree_count, train_mse
            )
        else:
            (b2,) = struct.unpack("<d", f.read(8))
            w1 = _read_array(f)
            b1 = _read_array(f)
            w2 = _read_array(f)
            loss_curve = tuple(_read_array(f).tolist())
            model = MLPModel(w1, b1, w2, b2, loss_curve)
    return ModelBundle(model, standardization)
