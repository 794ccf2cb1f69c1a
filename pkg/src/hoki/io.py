"""Dataset and model files.

Datasets are CSV (``label,logit_0,...,logit_{C-1}``) or a packed binary
variant detected by its magic bytes. Models are JSON with a fixed key order
and floats written with 17 significant digits, so saving is deterministic and
loading is lossless.
"""

from __future__ import annotations

import json
import os
import struct

import numpy as np

from .baselines import TemperatureModel
from .calibrator import INIT_MODES, CalibrationModel
from .core import InvalidInputError, LabeledLogits
from .transform import RNG_ALGORITHM, NoiseSpec, TransformSet

FORMAT_VERSION = 1
BINARY_MAGIC = b"HOKILOG1"
_HEADER = struct.Struct("<8sqq")


class DatasetParseError(InvalidInputError):
    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")


class ModelFormatError(InvalidInputError):
    pass


class UnsupportedVersionError(ModelFormatError):
    pass


# -- datasets ---------------------------------------------------------------


def _parse_label(text: str, path, lineno: int) -> int:
    text = text.strip()
    if not text.isdigit():
        raise DatasetParseError(path, lineno, f"label {text!r} is not a non-negative integer")
    return int(text)


def _load_csv(path) -> LabeledLogits:
    labels = []
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        header = fh.readline().rstrip("\r\n")
        cols = header.split(",")
        if len(cols) < 3 or cols[0] != "label":
            raise DatasetParseError(path, 1, "header must be label,logit_0,...,logit_{C-1}")
        c = len(cols) - 1
        if cols[1:] != [f"logit_{i}" for i in range(c)]:
            raise DatasetParseError(path, 1, "header must be label,logit_0,...,logit_{C-1}")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != c + 1:
                raise DatasetParseError(
                    path, lineno, f"expected {c + 1} columns, found {len(parts)}"
                )
            label = _parse_label(parts[0], path, lineno)
            if label >= c:
                raise DatasetParseError(path, lineno, f"label {label} out of range for C={c}")
            try:
                row = np.array(parts[1:], dtype=np.float64)
            except ValueError:
                raise DatasetParseError(path, lineno, "malformed logit value") from None
            if not np.all(np.isfinite(row)):
                raise DatasetParseError(path, lineno, "non-finite logit value")
            labels.append(label)
            rows.append(row)
    if not rows:
        raise DatasetParseError(path, None, "no examples")
    return LabeledLogits(np.vstack(rows), np.array(labels, dtype=np.int64))


def _load_binary(path) -> LabeledLogits:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise DatasetParseError(path, None, "truncated binary header")
    _, n, c = _HEADER.unpack_from(blob)
    if n < 1 or c < 2:
        raise DatasetParseError(path, None, f"invalid dimensions N={n}, C={c}")
    expected = _HEADER.size + 8 * n + 8 * n * c
    if len(blob) != expected:
        raise DatasetParseError(path, None, f"expected {expected} bytes, found {len(blob)}")
    labels = np.frombuffer(blob, dtype="<i8", count=n, offset=_HEADER.size).astype(np.int64)
    logits = np.frombuffer(blob, dtype="<f8", count=n * c, offset=_HEADER.size + 8 * n)
    logits = logits.reshape(n, c).astype(np.float64)
    bad = np.flatnonzero(~np.all(np.isfinite(logits), axis=1))
    if bad.size:
        raise DatasetParseError(path, None, f"non-finite logit in row {int(bad[0])}")
    bad = np.flatnonzero((labels < 0) | (labels >= c))
    if bad.size:
        raise DatasetParseError(path, None, f"label out of range in row {int(bad[0])}")
    return LabeledLogits(logits, labels)


def load_dataset(path) -> LabeledLogits:
    """Read a dataset file; raises FileNotFoundError or DatasetParseError."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"dataset not found: {path}")
    with open(path, "rb") as fh:
        magic = fh.read(len(BINARY_MAGIC))
    if magic == BINARY_MAGIC:
        return _load_binary(path)
    try:
        return _load_csv(path)
    except UnicodeDecodeError as exc:
        raise DatasetParseError(path, None, "not UTF-8 text") from exc


def dataset_csv_lines(data: LabeledLogits):
    yield "label," + ",".join(f"logit_{i}" for i in range(data.c)) + "\n"
    for label, row in zip(data.labels.tolist(), data.logits.tolist()):
        yield str(label) + "," + ",".join(map(repr, row)) + "\n"


def save_dataset(data: LabeledLogits, path, binary: bool = False) -> None:
    if binary:
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(BINARY_MAGIC, data.n, data.c))
            fh.write(data.labels.astype("<i8").tobytes())
            fh.write(np.ascontiguousarray(data.logits, dtype="<f8").tobytes())
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(dataset_csv_lines(data))


# -- models -----------------------------------------------------------------


def _num(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        raise TypeError("booleans are not numbers here")
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if not np.isfinite(x):
        raise ModelFormatError("cannot serialize non-finite float")
    return format(x, ".17g")


def _row(values) -> str:
    return "[" + ",".join(_num(v) for v in values) + "]"


def _fields_to_json(fields: list[tuple[str, str]]) -> str:
    body = ",\n".join(f"  {json.dumps(k)}: {v}" for k, v in fields)
    return "{\n" + body + "\n}\n"


def _matrix(rows) -> str:
    return "[\n    " + ",\n    ".join(rows) + "\n  ]"


def _obj(d: dict) -> str:
    parts = []
    for k, v in d.items():
        val = json.dumps(v) if isinstance(v, str) else _num(v)
        parts.append(f"{json.dumps(k)}: {val}")
    return "{" + ", ".join(parts) + "}"


def model_to_json(model) -> str:
    if isinstance(model, TemperatureModel):
        return _fields_to_json(
            [
                ("format_version", _num(FORMAT_VERSION)),
                ("model_type", json.dumps("temperature")),
                ("T", _num(model.T)),
            ]
        )
    if not isinstance(model, CalibrationModel):
        raise TypeError(f"cannot serialize {type(model).__name__}")
    ts = model.transforms
    return _fields_to_json(
        [
            ("format_version", _num(FORMAT_VERSION)),
            ("model_type", json.dumps("hoki")),
            ("J", _num(model.n_bins)),
            ("M", _num(ts.m)),
            ("C", _num(ts.c)),
            ("K_star", _num(model.k_star)),
            ("p_hat", _num(model.p_hat)),
            ("init_mode", json.dumps(model.init_mode)),
            ("rng", _obj(ts.rng_info())),
            ("noise_spec", _obj(ts.spec.to_dict())),
            ("transforms", _matrix(_row(r) for r in ts.noise.tolist())),
            (
                "params",
                _matrix(
                    "[" + ",".join(_row(pair) for pair in k_rows) + "]"
                    for k_rows in model.params.tolist()
                ),
            ),
        ]
    )


def save_model(model, path) -> None:
    text = model_to_json(model)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _require(doc: dict, key: str, kind):
    if key not in doc:
        raise ModelFormatError(f"model file missing field {key!r}")
    value = doc[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if kind is int and isinstance(value, float) and value.is_integer():
        return int(value)
    if not isinstance(value, kind) or isinstance(value, bool):
        raise ModelFormatError(f"field {key!r} has the wrong type")
    return value


def model_from_json(text: str):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelFormatError("model file must hold a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"unsupported model format_version {version!r}")
    kind = _require(doc, "model_type", str)
    try:
        if kind == "temperature":
            return TemperatureModel(_require(doc, "T", float))
        if kind != "hoki":
            raise ModelFormatError(f"unknown model_type {kind!r}")
        J = _require(doc, "J", int)
        M = _require(doc, "M", int)
        C = _require(doc, "C", int)
        K = _require(doc, "K_star", int)
        init_mode = _require(doc, "init_mode", str)
        if init_mode not in INIT_MODES:
            raise ModelFormatError(f"unknown init_mode {init_mode!r}")
        rng = _require(doc, "rng", dict)
        if rng.get("algorithm") != RNG_ALGORITHM:
            raise ModelFormatError(f"unsupported rng algorithm {rng.get('algorithm')!r}")
        spec = NoiseSpec.from_dict(_require(doc, "noise_spec", dict))
        noise = np.array(_require(doc, "transforms", list), dtype=np.float64)
        params = np.array(_require(doc, "params", list), dtype=np.float64)
        if noise.shape != (M, C):
            raise ModelFormatError(f"transforms shape {noise.shape} != ({M}, {C})")
        if params.shape != (K, J, 2):
            raise ModelFormatError(f"params shape {params.shape} != ({K}, {J}, 2)")
        ts = TransformSet(noise, spec, int(_require(rng, "seed", int)))
        return CalibrationModel(J, _require(doc, "p_hat", float), params, ts, init_mode)
    except ModelFormatError:
        raise
    except (InvalidInputError, ValueError, TypeError) as exc:
        raise ModelFormatError(f"invalid model file: {exc}") from exc


def load_model(path):
    if not os.path.exists(path):
        raise FileNotFoundError(f"model not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_json(fh.read())
