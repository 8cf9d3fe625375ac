"""Versioned JSONL record schemas tying the pipeline stages together.

Instance numerics are stored as plain JSON numbers (exact for doubles);
frontier payloads (anchors, decisions, prediction vectors) are stored as
4-decimal strings, which is lossless because every such vector lies on the
4-decimal grid by construction. Objectives are never stored: they are
recomputed from the instance and decisions on load, which keeps records
self-contained and evaluation bit-reproducible.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from . import __version__
from .frontier import Frontier
from .problems import PARAM_SCHEMAS, ProblemInstance, evaluate

SCHEMA_INSTANCE = "instance/1"
SCHEMA_SOLVED = "solved/1"
SCHEMA_PROMPT = "prompt/1"
SCHEMA_PREDICTION = "prediction/1"
SCHEMA_REPORT = "report/1"
SCHEMA_ERROR = "error/1"


class RecordError(ValueError):
    """A record violates its schema."""


def fmt4(value: float) -> str:
    """Grid scalar as a canonical 4-decimal string; negative zero folded."""
    text = f"{float(value):.4f}"
    return "0.0000" if text == "-0.0000" else text


def _grid_rows(matrix) -> list[list[str]]:
    return [[fmt4(v) for v in row] for row in np.atleast_2d(np.asarray(matrix, float))]


def _rows_to_array(rows, n: int, context: str) -> np.ndarray:
    try:
        arr = np.array([[float(v) for v in row] for row in rows], dtype=float)
    except (TypeError, ValueError) as exc:
        raise RecordError(f"{context}: {exc}") from exc
    if arr.size == 0:
        return np.zeros((0, n))
    if arr.ndim != 2 or arr.shape[1] != n:
        raise RecordError(f"{context}: rows must have width {n}")
    return arr


def dump_line(record: dict) -> str:
    """Canonical one-line JSON: sorted keys, no whitespace."""
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


def config_hash(config) -> str:
    """Short stable digest of a config dataclass (nested dataclasses ok)."""
    def unwrap(obj):
        if hasattr(obj, "__dataclass_fields__"):
            return {k: unwrap(getattr(obj, k)) for k in obj.__dataclass_fields__}
        return obj
    return hashlib.sha256(dump_line(unwrap(config)).encode()).hexdigest()[:16]


def write_jsonl(path, records) -> None:
    Path(path).write_text("".join(dump_line(r) + "\n" for r in records))


def read_jsonl(path) -> list[tuple[int, dict]]:
    """(line number, record) pairs; malformed JSON raises with the line."""
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise RecordError(f"line {lineno}: invalid JSON: {exc}") from exc
        if not isinstance(record, dict):
            raise RecordError(f"line {lineno}: record must be a JSON object")
        out.append((lineno, record))
    return out


def _require(record: dict, key: str, context: str):
    if key not in record:
        raise RecordError(f"{context}: missing field {key!r}")
    return record[key]


def instance_to_record(instance: ProblemInstance, provenance: dict | None = None) -> dict:
    params = {}
    for name, kind in PARAM_SCHEMAS[instance.family].items():
        value = instance.params[name]
        params[name] = float(value) if kind == "scalar" else np.asarray(value).tolist()
    record = {
        "schema": SCHEMA_INSTANCE,
        "instance_id": instance.instance_id,
        "family": instance.family,
        "n": instance.n,
        "lower": instance.lower.tolist(),
        "upper": instance.upper.tolist(),
        "cons_matrix": instance.cons_matrix.tolist(),
        "cons_rhs": instance.cons_rhs.tolist(),
        "params": params,
    }
    if provenance is not None:
        record["provenance"] = provenance
    return record


def instance_from_record(record: dict, context: str = "record") -> ProblemInstance:
    family = _require(record, "family", context)
    try:
        return ProblemInstance(
            family=family,
            n=int(_require(record, "n", context)),
            lower=np.array(_require(record, "lower", context), dtype=float),
            upper=np.array(_require(record, "upper", context), dtype=float),
            cons_matrix=np.array(
                _require(record, "cons_matrix", context), dtype=float
            ).reshape(-1, int(record["n"])),
            cons_rhs=np.array(_require(record, "cons_rhs", context), dtype=float),
            params=_require(record, "params", context),
            instance_id=str(record.get("instance_id", "")),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, RecordError):
            raise
        raise RecordError(f"{context}: {exc}") from exc


def solved_to_record(
    instance: ProblemInstance,
    anchors,
    frontier: Frontier,
    provenance: dict | None = None,
) -> dict:
    record = instance_to_record(instance, provenance)
    record["schema"] = SCHEMA_SOLVED
    record["anchors"] = [[fmt4(v) for v in anchor] for anchor in anchors]
    record["frontier"] = _grid_rows(frontier.decisions) if len(frontier) else []
    return record


def solved_from_record(record: dict, context: str = "record"):
    """(instance, anchors, frontier) with objectives recomputed exactly."""
    instance = instance_from_record(record, context)
    anchors_raw = _require(record, "anchors", context)
    if len(anchors_raw) != 2:
        raise RecordError(f"{context}: anchors must hold exactly two vectors")
    anchors = tuple(
        _rows_to_array([a], instance.n, f"{context}: anchor")[0] for a in anchors_raw
    )
    decisions = _rows_to_array(
        _require(record, "frontier", context), instance.n, f"{context}: frontier"
    )
    objectives = (
        evaluate(instance, decisions) if decisions.shape[0] else np.zeros((0, 2))
    )
    frontier = Frontier(
        decisions=decisions, objectives=objectives, instance_id=instance.instance_id
    )
    return instance, anchors, frontier


def prompt_to_record(instance_id: str, n: int, k: int, bundle) -> dict:
    return {
        "schema": SCHEMA_PROMPT,
        "instance_id": instance_id,
        "n": int(n),
        "k": int(k),
        "system": bundle.system,
        "user": bundle.user,
        "assistant": bundle.assistant,
    }


def prediction_to_record(
    instance_id: str,
    vectors,
    n: int,
    structural_failure: bool = False,
    failed_slots: int = 0,
) -> dict:
    vectors = np.asarray(vectors, dtype=float)
    return {
        "schema": SCHEMA_PREDICTION,
        "instance_id": instance_id,
        "n": int(n),
        "vectors": _grid_rows(vectors) if vectors.size else [],
        "structural_failure": bool(structural_failure),
        "failed_slots": int(failed_slots),
    }


def prediction_from_record(record: dict, context: str = "record"):
    """(instance_id, vectors) for one prediction line."""
    n = int(_require(record, "n", context))
    vectors = _rows_to_array(
        _require(record, "vectors", context), n, f"{context}: vectors"
    )
    return str(_require(record, "instance_id", context)), vectors


def error_record(lineno: int, message: str, instance_id: str = "") -> dict:
    message = str(message)
    prefix = f"line {int(lineno)}: "
    if message.startswith(prefix):    # the line field already carries it
        message = message[len(prefix):]
    record = {"schema": SCHEMA_ERROR, "line": int(lineno), "error": message}
    if instance_id:
        record["instance_id"] = instance_id
    return record


def expect_schema(record: dict, schema: str, lineno: int) -> None:
    found = record.get("schema")
    if found != schema:
        raise RecordError(f"line {lineno}: expected schema {schema!r}, found {found!r}")
