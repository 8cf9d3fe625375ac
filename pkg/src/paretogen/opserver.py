"""Line-delimited JSON op server for foreign-language callers.

Each stdin line is one request ``{"id": ..., "op": "...", "args": {...}}``
and produces exactly one stdout line in input order: ``{"id": ..., "ok":
true, "result": ...}`` on success, else ``{"id": ..., "ok": false, "kind":
"<exception class>", "error": "<message>"}``. Only leaf computations are
exposed; dataset generation and solving stay behind the pipeline CLI.

Scalars cross the boundary as plain JSON numbers (exact for doubles),
decision and probability blocks as nested lists, and problem instances as
the same ``instance/1`` records the JSONL pipeline uses.
"""

from __future__ import annotations

import json
import sys

import numpy as np

from . import __version__
from .codec import build_vocabulary, decode, decode_sequence, encode, encode_sequence
from .curriculum import (
    PositionBatch,
    ScheduleConfig,
    ValueTable,
    coarse_loss,
    fine_loss,
    schedule,
    total_loss,
)
from .embeddings import BaseSymbolTable, WeightScheme, init_embeddings
from .frontier import Frontier
from .fusion import CandidatePool, FusionConfig, fuse
from .problems import evaluate
from .prompts import parse_solutions, serialize
from .records import dump_line, instance_from_record


class OpError(ValueError):
    """Malformed request: unknown op or argument of the wrong shape."""


_VOCABULARY = None


def _vocabulary():
    global _VOCABULARY
    if _VOCABULARY is None:
        _VOCABULARY = build_vocabulary()
    return _VOCABULARY


def _get(args: dict, key: str):
    if key not in args:
        raise OpError(f"missing argument {key!r}")
    return args[key]


def _array(value, ndim: int, key: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim != ndim:
        raise OpError(f"argument {key!r} must be a {ndim}-D numeric array")
    return arr


def _instance(args: dict):
    record = _get(args, "instance")
    if not isinstance(record, dict):
        raise OpError("argument 'instance' must be an instance record object")
    return instance_from_record(record, "argument 'instance'")


def _table(args: dict):
    table = args.get("table")
    if table is None:
        return _vocabulary()
    return ValueTable(
        coarse_values=_array(_get(table, "coarse_values"), 1, "coarse_values"),
        fine_values=_array(_get(table, "fine_values"), 1, "fine_values"),
    )


def _batch(args: dict) -> PositionBatch:
    batch = _get(args, "batch")
    return PositionBatch(
        distributions=_array(_get(batch, "distributions"), 2, "distributions"),
        targets=np.asarray(_get(batch, "targets")),
        mask=np.asarray(_get(batch, "mask")),
    )


def _schedule_config(args: dict) -> ScheduleConfig:
    config = args.get("config")
    if config is None:
        return ScheduleConfig()
    if not isinstance(config, dict):
        raise OpError("argument 'config' must be an object")
    return ScheduleConfig(**{k: float(v) for k, v in config.items()})


def _frontier_from_decisions(instance, decisions) -> Frontier | None:
    """Rows reordered by ascending (f1, f2); empty input means no frontier."""
    arr = _array(decisions, 2, "frontier")
    if arr.shape[0] == 0:
        return None
    if arr.shape[1] != instance.n:
        raise OpError(f"frontier rows must have length {instance.n}")
    objectives = evaluate(instance, arr)
    order = np.lexsort((objectives[:, 1], objectives[:, 0]))
    return Frontier(decisions=arr[order], objectives=objectives[order])


def _op_encode(args):
    return encode(float(_get(args, "value")))


def _op_decode(args):
    return decode(_get(args, "text"))


def _op_encode_sequence(args):
    return encode_sequence(_array(_get(args, "values"), 1, "values"))


def _op_decode_sequence(args):
    count = args.get("count")
    return decode_sequence(
        _get(args, "text"), count=None if count is None else int(count)
    )


def _op_schedule(args):
    weights = schedule(float(_get(args, "r")), _schedule_config(args))
    return {"ce": weights.ce, "coarse": weights.coarse, "fine": weights.fine}


def _op_coarse_loss(args):
    return coarse_loss(_batch(args), _table(args))


def _op_fine_loss(args):
    return fine_loss(_batch(args), _table(args))


def _op_total_loss(args):
    return total_loss(
        ce=float(_get(args, "ce")),
        batch=_batch(args),
        r=float(_get(args, "r")),
        config=_schedule_config(args),
        vocab=_table(args),
    )


def _op_init_embeddings(args):
    base = _get(args, "base")
    embedding = _get(base, "embedding")
    if not isinstance(embedding, dict):
        raise OpError("argument 'base.embedding' must map symbols to vectors")
    table = BaseSymbolTable(
        embedding={k: np.asarray(v, dtype=float) for k, v in embedding.items()},
        dim=int(_get(base, "dim")),
        sigma=float(_get(base, "sigma")),
    )
    weights = args.get("weights")
    scheme = (
        WeightScheme()
        if weights is None
        else WeightScheme(
            int_weights=tuple(_get(weights, "int_weights")),
            frac_weights=tuple(_get(weights, "frac_weights")),
        )
    )
    result = init_embeddings(
        table,
        _vocabulary(),
        seed=int(args.get("seed", 0)),
        weights=scheme,
        eps=float(args.get("eps", 0.02)),
        normalize=bool(args.get("normalize", True)),
    )
    return {
        "int_vectors": result.int_vectors.tolist(),
        "frac_vectors": result.frac_vectors.tolist(),
        "seed": result.seed,
    }


def _op_serialize(args):
    instance = _instance(args)
    anchors = _get(args, "anchors")
    if not isinstance(anchors, list) or len(anchors) != 2:
        raise OpError("argument 'anchors' must hold exactly two vectors")
    frontier = args.get("frontier")
    bundle = serialize(
        instance,
        (np.asarray(anchors[0], dtype=float), np.asarray(anchors[1], dtype=float)),
        frontier=None if frontier is None else _frontier_from_decisions(instance, frontier),
        k=int(args.get("k", 20)),
    )
    return {"system": bundle.system, "user": bundle.user, "assistant": bundle.assistant}


def _op_parse_solutions(args):
    parsed = parse_solutions(
        _get(args, "text"), n=int(_get(args, "n")), k=int(_get(args, "k"))
    )
    return {
        "vectors": parsed.vectors.tolist(),
        "slots": [
            {"slot": s.slot, "ok": s.ok, "reason": s.reason} for s in parsed.slots
        ],
        "structural_failure": parsed.structural_failure,
    }


def _op_fuse(args):
    instance = _instance(args)
    passes = _get(args, "passes")
    if not isinstance(passes, list):
        raise OpError("argument 'passes' must be a list of decision blocks")
    pool = CandidatePool(
        passes=tuple(np.asarray(block, dtype=float) for block in passes),
        instance_id=str(args.get("instance_id", "")),
    )
    config = args.get("config") or {}
    if not isinstance(config, dict):
        raise OpError("argument 'config' must be an object")
    frontier = fuse(instance, pool, FusionConfig(**config))
    return {
        "decisions": frontier.decisions.tolist(),
        "objectives": frontier.objectives.tolist(),
        "shortfall": frontier.shortfall,
    }


def _op_ping(args):
    return {"version": __version__}


OPS = {
    "ping": _op_ping,
    "encode": _op_encode,
    "decode": _op_decode,
    "encode_sequence": _op_encode_sequence,
    "decode_sequence": _op_decode_sequence,
    "schedule": _op_schedule,
    "coarse_loss": _op_coarse_loss,
    "fine_loss": _op_fine_loss,
    "total_loss": _op_total_loss,
    "init_embeddings": _op_init_embeddings,
    "serialize": _op_serialize,
    "parse_solutions": _op_parse_solutions,
    "fuse": _op_fuse,
}


def handle_request(record) -> dict:
    """One request object in, one response object out; never raises."""
    request_id = record.get("id") if isinstance(record, dict) else None
    try:
        if not isinstance(record, dict):
            raise OpError("request must be a JSON object")
        op = record.get("op")
        if op not in OPS:
            raise OpError(f"unknown op {op!r}")
        args = record.get("args", {})
        if not isinstance(args, dict):
            raise OpError("'args' must be an object")
        result = OPS[op](args)
    except Exception as exc:
        return {
            "id": request_id,
            "ok": False,
            "kind": type(exc).__name__,
            "error": str(exc),
        }
    return {"id": request_id, "ok": True, "result": result}


def handle_line(line: str) -> dict:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        return {"id": None, "ok": False, "kind": "ProtocolError", "error": str(exc)}
    return handle_request(record)


def main() -> int:
    for line in sys.stdin:
        if not line.strip():
            continue
        try:
            sys.stdout.write(dump_line(handle_line(line)) + "\n")
            sys.stdout.flush()
        except BrokenPipeError:
            return 0
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
