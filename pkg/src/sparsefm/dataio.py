"""Dataset and model persistence.

Three text formats are used, all described in ``docs/formats.md``:
libsvm data files, a JSON model archive and a dense-matrix sidecar.
Floats are written in Python's shortest round-trip form, so every save
followed by a load reproduces the values bit for bit.
"""

import json
import os

import numpy as np
import scipy.sparse as sp

from .kernels import AllSubsetsModel, FmModel, HofmModel
from .numcore import SparseDesignMatrix, as_design_matrix

FORMAT_VERSION = 1


class LibsvmParseError(ValueError):
    def __init__(self, line_no, message):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class ArchiveFormatError(ValueError):
    def __init__(self, field, message):
        super().__init__(f"field {field!r}: {message}")
        self.field = field


def _fnum(v):
    return repr(float(v))


# --------------------------------------------------------------------------
# libsvm
# --------------------------------------------------------------------------


def _parse_line(line, line_no):
    tokens = line.split()
    try:
        label = float(tokens[0])
    except ValueError:
        raise LibsvmParseError(line_no, f"bad label {tokens[0]!r}") from None
    cols, vals = [], []
    prev = 0
    for tok in tokens[1:]:
        idx, sep, val = tok.partition(":")
        if not sep:
            raise LibsvmParseError(line_no, f"expected index:value, got {tok!r}")
        try:
            j = int(idx)
            v = float(val)
        except ValueError:
            raise LibsvmParseError(line_no, f"malformed token {tok!r}") from None
        if j < 1:
            raise LibsvmParseError(line_no, f"indices are 1-based, got {j}")
        if j <= prev:
            raise LibsvmParseError(line_no, f"indices must be strictly ascending ({prev} then {j})")
        if not np.isfinite(v):
            raise LibsvmParseError(line_no, f"non-finite value in {tok!r}")
        prev = j
        cols.append(j - 1)
        vals.append(v)
    return label, cols, vals


def load_libsvm(path, n_features=None):
    """Read ``label idx:val ...`` lines (1-based ascending indices).

    Blank lines and ``#`` comments are skipped. ``n_features`` defaults to
    the largest index seen. Returns ``(SparseDesignMatrix, labels)``.
    """
    labels, indptr, indices, data = [], [0], [], []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            label, cols, vals = _parse_line(line, line_no)
            labels.append(label)
            indices.extend(cols)
            data.extend(vals)
            indptr.append(len(indices))
    d_seen = max(indices) + 1 if indices else 0
    if n_features is None:
        n_features = d_seen
    elif d_seen > n_features:
        raise ValueError(f"file uses feature {d_seen} but n_features={n_features}")
    m = sp.csr_matrix((np.array(data, dtype=np.float64), np.array(indices, dtype=np.int64),
                       np.array(indptr, dtype=np.int64)), shape=(len(labels), n_features))
    return SparseDesignMatrix(m), np.array(labels, dtype=np.float64)


def save_libsvm(data, labels, path):
    X = as_design_matrix(data)
    labels = np.asarray(labels, dtype=np.float64)
    if labels.shape != (X.n_rows,):
        raise ValueError(f"{X.n_rows} rows but {labels.shape[0] if labels.ndim else 0} labels")
    with open(path, "w", encoding="utf-8") as fh:
        for n in range(X.n_rows):
            idx, val = X.row(n)
            feats = " ".join(f"{j + 1}:{_fnum(v)}" for j, v in zip(idx, val))
            fh.write(f"{_fnum(labels[n])} {feats}".rstrip() + "\n")


def classification_labels(y):
    """Map labels <= 0 to -1 and positive labels to +1."""
    y = np.asarray(y, dtype=np.float64)
    return np.where(y > 0, 1.0, -1.0)


# --------------------------------------------------------------------------
# model archive
# --------------------------------------------------------------------------


def _matrix_to_json(P):
    P = np.asarray(P, dtype=np.float64)
    return {"rows": P.shape[0], "cols": P.shape[1], "values": P.ravel().tolist()}


def _require(obj, key, where):
    if not isinstance(obj, dict) or key not in obj:
        raise ArchiveFormatError(f"{where}{key}", "missing")
    return obj[key]


def _matrix_from_json(obj, field):
    rows = _require(obj, "rows", field + ".")
    cols = _require(obj, "cols", field + ".")
    values = _require(obj, "values", field + ".")
    if not (isinstance(rows, int) and isinstance(cols, int) and rows >= 0 and cols >= 0):
        raise ArchiveFormatError(field, "rows/cols must be non-negative integers")
    if not isinstance(values, list) or len(values) != rows * cols:
        raise ArchiveFormatError(f"{field}.values", f"expected {rows * cols} numbers")
    return _float_array(values, f"{field}.values").reshape(rows, cols)


def _float_array(values, field):
    if not isinstance(values, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                                               for v in values):
        raise ArchiveFormatError(field, "expected a list of numbers")
    return np.array(values, dtype=np.float64)


def model_to_dict(model, hyperparameters=None):
    out = {"format_version": FORMAT_VERSION, "hyperparameters": dict(hyperparameters or {})}
    if isinstance(model, FmModel):
        out.update(model_kind="fm", bias=float(model.bias), use_linear=bool(model.use_linear),
                   w=model.w.tolist(), P=_matrix_to_json(model.P))
    elif isinstance(model, HofmModel):
        out.update(model_kind="hofm", bias=float(model.bias), use_linear=bool(model.use_linear),
                   w=model.w.tolist(), P_by_order=[_matrix_to_json(P) for P in model.P_by_order])
    elif isinstance(model, AllSubsetsModel):
        out.update(model_kind="allsubsets", P=_matrix_to_json(model.P))
    else:
        raise TypeError(f"cannot archive {type(model).__name__}")
    return out


def model_from_dict(obj):
    version = _require(obj, "format_version", "")
    if version != FORMAT_VERSION:
        raise ArchiveFormatError("format_version", f"unsupported version {version!r}")
    kind = _require(obj, "model_kind", "")
    _require(obj, "hyperparameters", "")
    if kind == "allsubsets":
        return AllSubsetsModel(_matrix_from_json(_require(obj, "P", ""), "P"))
    if kind not in ("fm", "hofm"):
        raise ArchiveFormatError("model_kind", f"unknown model kind {kind!r}")
    bias = _require(obj, "bias", "")
    if not isinstance(bias, (int, float)) or isinstance(bias, bool):
        raise ArchiveFormatError("bias", "expected a number")
    use_linear = _require(obj, "use_linear", "")
    if not isinstance(use_linear, bool):
        raise ArchiveFormatError("use_linear", "expected true or false")
    w = _float_array(_require(obj, "w", ""), "w")
    try:
        if kind == "fm":
            return FmModel(w, _matrix_from_json(_require(obj, "P", ""), "P"), float(bias), use_linear)
        blocks = _require(obj, "P_by_order", "")
        if not isinstance(blocks, list):
            raise ArchiveFormatError("P_by_order", "expected a list")
        Ps = [_matrix_from_json(b, f"P_by_order[{i}]") for i, b in enumerate(blocks)]
        return HofmModel(w, Ps, float(bias), use_linear)
    except ArchiveFormatError:
        raise
    except ValueError as exc:
        raise ArchiveFormatError("P" if kind == "fm" else "P_by_order", str(exc)) from None


def save_model(model, path, hyperparameters=None):
    text = json.dumps(model_to_dict(model, hyperparameters), indent=1, allow_nan=False)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text + "\n")


def load_model(path, with_hyperparameters=False):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ArchiveFormatError("<document>", f"not valid JSON ({exc.msg} at char {exc.pos})") from None
    model = model_from_dict(obj)
    if with_hyperparameters:
        return model, obj["hyperparameters"]
    return model


# --------------------------------------------------------------------------
# dense matrix sidecar
# --------------------------------------------------------------------------


def save_dense_matrix(W, path):
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {W.shape}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{W.shape[0]} {W.shape[1]}\n")
        for row in W:
            fh.write(" ".join(_fnum(v) for v in row) + "\n")


def load_dense_matrix(path):
    with open(path, encoding="utf-8") as fh:
        lines = [ln.split() for ln in fh.read().splitlines()]
    if not lines or len(lines[0]) != 2:
        raise ArchiveFormatError("header", "expected 'rows cols'")
    try:
        rows, cols = int(lines[0][0]), int(lines[0][1])
    except ValueError:
        raise ArchiveFormatError("header", "rows and cols must be integers") from None
    if rows < 0 or cols < 0:
        raise ArchiveFormatError("header", "negative shape")
    body = [ln for ln in lines[1:] if ln]
    if cols == 0:
        # rows of width zero are empty lines
        if body or len(lines) - 1 != rows:
            raise ArchiveFormatError("body", f"expected {rows} empty rows")
        return np.zeros((rows, 0))
    if len(body) != rows:
        raise ArchiveFormatError("body", f"header says {rows} rows, found {len(body)}")
    out = np.zeros((rows, cols))
    for i, ln in enumerate(body):
        if len(ln) != cols:
            raise ArchiveFormatError(f"row {i}", f"expected {cols} values, found {len(ln)}")
        try:
            out[i] = [float(v) for v in ln]
        except ValueError:
            raise ArchiveFormatError(f"row {i}", "non-numeric value") from None
    return out


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
