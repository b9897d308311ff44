"""Dataset CSV files, model files and report tables.

Dataset files are respondent-major CSV::

    # p: 5
    q1,q2,q3
    1,4,
    5,2,3

The comment line declares the scale size, the header names the questions,
and an empty cell is a missing answer. In memory the matrix is transposed to
questions x respondents.

Model files are JSON documents carrying a format version and a SHA-256
checksum of their payload. Floats are written with Python's shortest
round-trip representation, so a save/load cycle is bit-exact.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import re
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .core import BoundarySpec, OrdinalMatrix, SimplexFactor
from .exceptions import ModelFileError, ParseError
from .solvers import FittedModel

MODEL_FORMAT = "ordinal-aa-model"
MODEL_FORMAT_VERSION = 1
_P_LINE = re.compile(r"^#\s*p\s*[:=]\s*(\d+)\s*$")


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------


def read_dataset(path, p=None):
    """Parse a dataset file; returns ``(OrdinalMatrix, question_ids)``."""
    path = Path(path)
    text = path.read_text()
    lines = text.splitlines()
    declared = None
    body_start = 0
    for i, line in enumerate(lines):
        if not line.startswith("#"):
            body_start = i
            break
        match = _P_LINE.match(line)
        if match:
            declared = int(match.group(1))
    else:
        body_start = len(lines)
    rows = list(csv.reader(lines[body_start:]))
    rows = [r for r in rows if r]
    if not rows:
        raise ParseError(f"{path}: no header row")
    header = [h.strip() for h in rows[0]]
    n_questions = len(header)
    if n_questions == 0 or any(not h for h in header):
        raise ParseError(f"{path}: empty question identifier in header", row=body_start + 1)
    if p is None:
        p = declared
    elif declared is not None and declared != p:
        raise ParseError(f"{path}: file declares p={declared} but p={p} was requested")

    values = np.zeros((len(rows) - 1, n_questions), dtype=np.int64)
    mask = np.zeros_like(values, dtype=bool)
    for r, row in enumerate(rows[1:]):
        file_row = body_start + r + 2
        if len(row) != n_questions:
            raise ParseError(f"{path}: expected {n_questions} cells, found {len(row)}", row=file_row)
        for c, cell in enumerate(row):
            cell = cell.strip()
            if cell == "":
                continue
            try:
                v = int(cell)
            except ValueError:
                raise ParseError(f"{path}: non-integer cell {cell!r}", row=file_row, column=c + 1) from None
            if v < 1 or (p is not None and v > p):
                bound = f"1..{p}" if p is not None else ">= 1"
                raise ParseError(f"{path}: level {v} outside {bound}", row=file_row, column=c + 1)
            values[r, c] = v
            mask[r, c] = True
    if values.shape[0] == 0:
        raise ParseError(f"{path}: no respondent rows")
    if p is None:
        if not mask.any():
            raise ParseError(f"{path}: cannot infer p from an all-missing file")
        p = int(values[mask].max())
    return OrdinalMatrix(values.T, p, mask.T), header


def load_csv(path, p=None) -> OrdinalMatrix:
    return read_dataset(path, p)[0]


def save_csv(path, X: OrdinalMatrix, question_ids=None):
    ids = list(question_ids) if question_ids is not None else [f"q{m + 1}" for m in range(X.n_questions)]
    if len(ids) != X.n_questions:
        raise ValueError("one identifier per question is required")
    buf = io.StringIO()
    buf.write(f"# p: {X.p}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ids)
    for n in range(X.n_respondents):
        writer.writerow([str(v) if ok else "" for v, ok in zip(X.values[:, n], X.mask[:, n])])
    Path(path).write_text(buf.getvalue())


def save_ground_truth(path, dataset):
    """Sidecar JSON with the generator's latent structure."""
    doc = {
        "config": asdict(dataset.config),
        "reseeds": dataset.reseeds,
        "sigma_gt": dataset.sigma_gt,
        "S_true": dataset.S_true.tolist(),
        "A_true": dataset.A_true.tolist(),
        "boundaries_true": np.asarray(dataset.boundaries_true).tolist(),
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def load_ground_truth(path) -> dict:
    doc = json.loads(Path(path).read_text())
    for key in ("S_true", "A_true", "boundaries_true"):
        doc[key] = np.asarray(doc[key], dtype=float)
    return doc


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------


def _payload(model: FittedModel) -> dict:
    params = {k: np.asarray(v).tolist() for k, v in model.params().items()}
    return {
        "format": MODEL_FORMAT,
        "format_version": MODEL_FORMAT_VERSION,
        "method": model.method,
        "K": model.K,
        "p": model.p,
        "n_respondents": model.n_respondents,
        "seed": model.seed,
        "restart_index": model.restart_index,
        "epochs_run": model.epochs_run,
        "loss_kind": model.loss_kind,
        "final_loss": model.final_loss,
        "params": params,
        "level_scores": None if model.level_scores is None else np.asarray(model.level_scores).tolist(),
        "loss_trace": np.asarray(model.loss_trace).tolist(),
    }


def _checksum(payload) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def dumps_model(model: FittedModel) -> str:
    payload = _payload(model)
    return json.dumps({**payload, "checksum": _checksum(payload)}, indent=1, sort_keys=True) + "\n"


def save_model(model: FittedModel, path):
    Path(path).write_text(dumps_model(model))


def loads_model(text: str) -> FittedModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"model file is truncated or corrupted: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ModelFileError("not an ordinal-aa model file")
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ModelFileError(
            f"unsupported model format version {doc.get('format_version')}; expected {MODEL_FORMAT_VERSION}"
        )
    stored = doc.pop("checksum", None)
    if stored != _checksum(doc):
        raise ModelFileError("model file checksum mismatch")
    prm = doc["params"]
    boundary = None
    if "b" in prm:
        boundary = BoundarySpec(prm["b"], prm["c1"], prm["c2"], prm["sigma"], per_subject=doc["method"] == "RBOAA")
    scores = doc["level_scores"]
    return FittedModel(
        method=doc["method"],
        K=int(doc["K"]),
        p=int(doc["p"]),
        C=SimplexFactor(np.asarray(prm["C"], dtype=float)),
        S=SimplexFactor(np.asarray(prm["S"], dtype=float)),
        boundary=boundary,
        final_loss=float(doc["final_loss"]),
        loss_kind=doc["loss_kind"],
        epochs_run=int(doc["epochs_run"]),
        restart_index=int(doc["restart_index"]),
        seed=int(doc["seed"]),
        loss_trace=np.asarray(doc["loss_trace"], dtype=float),
        level_scores=None if scores is None else np.asarray(scores, dtype=float),
    )


def load_model(path) -> FittedModel:
    return loads_model(Path(path).read_text())


# ---------------------------------------------------------------------------
# report tables
# ---------------------------------------------------------------------------


def write_table(path, rows, stamp=None, columns=None):
    """CSV table preceded by ``# key: value`` lines recording the configuration."""
    rows = list(rows)
    if columns is None:
        columns = list(rows[0]) if rows else []
    buf = io.StringIO()
    for key, value in (stamp or {}).items():
        buf.write(f"# {key}: {value}\n")
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(row.get(k)) for k in columns})
    Path(path).write_text(buf.getvalue())


def read_table(path):
    """Rows of a table written by :func:`write_table`, values as strings."""
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return v
