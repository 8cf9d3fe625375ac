"""Command-line pipeline: generate, solve, encode, decode, eval, fuse.

Every command reads and writes versioned JSONL records. Records are
processed independently: a bad record becomes an error record in the
output (and one stderr line) and processing continues. A command exits
nonzero exactly when it emitted at least one error record. For fixed
inputs and flags the output bytes are deterministic; --workers changes
wall time only, never bytes or order.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from functools import partial
from pathlib import Path

import numpy as np

from . import __version__, records
from .frontier import PipelineConfig, build_reference
from .fusion import CandidatePool, FusionConfig, fuse
from .instances import GenConfig, anchor_solutions, generate
from .metrics import aggregate, evaluate_prediction
from .problems import DEFAULT_FEAS_TOL, FAMILIES, check_feasible, evaluate
from .prompts import parse_solutions, serialize
from .records import RecordError, dump_line, error_record

WORKERS_ENV = "PARETOGEN_WORKERS"


def _default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _parse_n_range(text: str) -> tuple[int, int]:
    parts = text.split("..")
    try:
        if len(parts) == 1:
            lo = hi = int(parts[0])
        elif len(parts) == 2:
            lo, hi = int(parts[0]), int(parts[1])
        else:
            raise ValueError
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected N or LO..HI, got {text!r}"
        ) from None
    if not 1 <= lo <= hi <= 64:
        raise argparse.ArgumentTypeError(
            f"n range {text!r} must satisfy 1 <= lo <= hi <= 64"
        )
    return lo, hi


def _read_lines(path) -> list[tuple[int, dict | None, str | None]]:
    """(lineno, record, error) per non-blank line; never raises per line."""
    items: list[tuple[int, dict | None, str | None]] = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            items.append((lineno, None, f"invalid JSON: {exc}"))
            continue
        if not isinstance(record, dict):
            items.append((lineno, None, "record must be a JSON object"))
            continue
        items.append((lineno, record, None))
    return items


def _check_schema(record: dict, allowed: tuple[str, ...], lineno: int) -> None:
    schema = record.get("schema")
    if schema not in allowed:
        raise RecordError(
            f"line {lineno}: expected schema in {list(allowed)}, found {schema!r}"
        )


def _field(record: dict, key: str, lineno: int):
    if key not in record:
        raise RecordError(f"line {lineno}: missing field {key!r}")
    return record[key]


def _map_items(items, worker, workers: int) -> list[dict]:
    if workers <= 1 or len(items) <= 1:
        return [worker(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, items, chunksize=1))


def _finish(command: str, out_path, out_records: list[dict]) -> int:
    n_errors = 0
    for record in out_records:
        if record.get("schema") == records.SCHEMA_ERROR:
            n_errors += 1
            where = record.get("source", "")
            prefix = f"{where} " if where else ""
            print(
                f"{command}: {prefix}line {record['line']}: {record['error']}",
                file=sys.stderr,
            )
    records.write_jsonl(out_path, out_records)
    print(f"{command}: {len(out_records)} records -> {out_path} ({n_errors} errors)")
    return n_errors


# ---------------------------------------------------------------- generate

def cmd_generate(args) -> int:
    families = list(FAMILIES) if args.family == "all" else [args.family]
    lo, hi = args.n
    run_hash = records.config_hash(
        {
            "command": "generate",
            "family": args.family,
            "n": [lo, hi],
            "count": args.count,
            "seed": args.seed,
            "num_cons": args.num_cons,
        }
    )
    out: list[dict] = []
    for fam_index, family in enumerate(families):
        rng = np.random.default_rng([args.seed, fam_index])
        sizes = rng.integers(lo, hi + 1, size=args.count)
        for i in range(args.count):
            lineno = len(out) + 1
            try:
                instance = generate(
                    GenConfig(
                        family=family,
                        n=int(sizes[i]),
                        seed=args.seed + i,
                        num_cons=args.num_cons,
                    )
                )
                provenance = {
                    "seed": args.seed + i,
                    "config_hash": run_hash,
                    "version": __version__,
                }
                out.append(records.instance_to_record(instance, provenance))
            except (ValueError, RuntimeError) as exc:
                out.append(error_record(lineno, str(exc)))
    return _finish("generate", args.out, out)


# ------------------------------------------------------------------- solve

def _solve_item(item, config: PipelineConfig) -> dict:
    lineno, record, err = item
    if err is not None:
        return error_record(lineno, err)
    try:
        _check_schema(record, (records.SCHEMA_INSTANCE, records.SCHEMA_SOLVED), lineno)
        instance = records.instance_from_record(record, f"line {lineno}")
        anchors = anchor_solutions(instance, config.solver)
        frontier = build_reference(instance, config)
        provenance = dict(record.get("provenance") or {})
        provenance["solve_config_hash"] = records.config_hash(config)
        return records.solved_to_record(instance, anchors, frontier, provenance)
    except (ValueError, RuntimeError) as exc:
        return error_record(lineno, str(exc), str(record.get("instance_id", "")))


def cmd_solve(args) -> int:
    config = PipelineConfig(
        num_eps=args.num_eps, k=args.k, obj_tol=args.obj_tol, feas_tol=args.tol
    )
    items = _read_lines(args.input)
    out = _map_items(items, partial(_solve_item, config=config), args.workers)
    return _finish("solve", args.out, out)


# ------------------------------------------------------------------ encode

def _encode_item(item, k: int) -> dict:
    lineno, record, err = item
    if err is not None:
        return error_record(lineno, err)
    try:
        _check_schema(record, (records.SCHEMA_SOLVED,), lineno)
        instance, anchors, frontier = records.solved_from_record(
            record, f"line {lineno}"
        )
        bundle = serialize(
            instance, anchors, frontier if len(frontier) else None, k=k
        )
        return records.prompt_to_record(
            instance.instance_id, instance.n, len(frontier) or k, bundle
        )
    except (ValueError, RuntimeError) as exc:
        return error_record(lineno, str(exc), str(record.get("instance_id", "")))


def cmd_encode(args) -> int:
    items = _read_lines(args.input)
    out = [_encode_item(item, args.k) for item in items]
    return _finish("encode", args.out, out)


# ------------------------------------------------------------------ decode

def _decode_item(item) -> dict:
    lineno, record, err = item
    if err is not None:
        return error_record(lineno, err)
    try:
        _check_schema(record, (records.SCHEMA_PROMPT,), lineno)
        n = int(_field(record, "n", lineno))
        k = int(_field(record, "k", lineno))
        parsed = parse_solutions(str(_field(record, "assistant", lineno)), n, k)
        failed = sum(1 for slot in parsed.slots if not slot.ok)
        return records.prediction_to_record(
            str(_field(record, "instance_id", lineno)),
            parsed.vectors,
            n,
            structural_failure=parsed.structural_failure,
            failed_slots=failed,
        )
    except (ValueError, RuntimeError) as exc:
        return error_record(lineno, str(exc), str(record.get("instance_id", "")))


def cmd_decode(args) -> int:
    items = _read_lines(args.input)
    out = [_decode_item(item) for item in items]
    return _finish("decode", args.out, out)


# -------------------------------------------------------------------- eval

def _prediction_vectors(record: dict, lineno: int) -> tuple[str, np.ndarray]:
    """Accepts prediction or solved records as the predicted side."""
    schema = record.get("schema")
    if schema == records.SCHEMA_PREDICTION:
        return records.prediction_from_record(record, f"line {lineno}")
    if schema == records.SCHEMA_SOLVED:
        instance, _, frontier = records.solved_from_record(record, f"line {lineno}")
        return instance.instance_id, frontier.decisions
    raise RecordError(
        f"line {lineno}: expected schema in "
        f"[{records.SCHEMA_PREDICTION!r}, {records.SCHEMA_SOLVED!r}], found {schema!r}"
    )


def _save_plot(directory, instance, reference, vectors, tol: float) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    Path(directory).mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    ref_obj = reference.objectives
    ax.plot(ref_obj[:, 0], ref_obj[:, 1], "o-", ms=3, lw=0.8, label="reference")
    X = np.asarray(vectors, dtype=float)
    if X.size:
        feasible = check_feasible(instance, X, tol)
        if feasible.any():
            pred_obj = evaluate(instance, X[feasible])
            ax.plot(pred_obj[:, 0], pred_obj[:, 1], "x", ms=5, label="prediction")
    ax.set_xlabel("f1")
    ax.set_ylabel("f2")
    ax.set_title(instance.instance_id or instance.family)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(Path(directory) / f"{instance.instance_id or 'instance'}.png", dpi=120)
    plt.close(fig)


def cmd_eval(args) -> int:
    errors: list[dict] = []

    predictions: dict[str, np.ndarray] = {}
    for lineno, record, err in _read_lines(args.pred):
        if err is not None:
            entry = error_record(lineno, err)
            entry["source"] = "pred"
            errors.append(entry)
            continue
        try:
            instance_id, vectors = _prediction_vectors(record, lineno)
            if instance_id in predictions:
                raise RecordError(
                    f"line {lineno}: duplicate prediction for {instance_id!r}"
                )
            predictions[instance_id] = vectors
        except (ValueError, RuntimeError) as exc:
            entry = error_record(lineno, str(exc), str(record.get("instance_id", "")))
            entry["source"] = "pred"
            errors.append(entry)

    per_instance: list[dict] = []
    reports = []
    for lineno, record, err in _read_lines(args.ref):
        if err is not None:
            entry = error_record(lineno, err)
            entry["source"] = "ref"
            errors.append(entry)
            continue
        instance_id = str(record.get("instance_id", ""))
        try:
            _check_schema(record, (records.SCHEMA_SOLVED,), lineno)
            instance, _, frontier = records.solved_from_record(record, f"line {lineno}")
            vectors = predictions.get(instance.instance_id)
            if vectors is None:
                raise RecordError(
                    f"line {lineno}: no prediction for {instance.instance_id!r}"
                )
            report = evaluate_prediction(instance, vectors, frontier, tol=args.tol)
            reports.append(report)
            per_instance.append(
                {
                    "instance_id": instance.instance_id,
                    "feasibility": report.feasibility,
                    "hvr": report.hvr,
                    "igd_plus": report.igd_plus,
                    "n_feasible": report.n_feasible,
                    "n_parsed": report.n_parsed,
                    "ideal": list(report.ideal),
                    "nadir": list(report.nadir),
                }
            )
            if args.plot:
                _save_plot(args.plot, instance, frontier, vectors, args.tol)
        except (ValueError, RuntimeError) as exc:
            entry = error_record(lineno, str(exc), instance_id)
            entry["source"] = "ref"
            errors.append(entry)

    report_obj = {
        "schema": records.SCHEMA_REPORT,
        "tol": args.tol,
        "count": len(reports),
        "per_instance": per_instance,
        "summary": asdict(aggregate(reports)) if reports else None,
        "errors": errors,
    }
    Path(args.out).write_text(dump_line(report_obj) + "\n")
    for entry in errors:
        print(
            f"eval: {entry.get('source', '')} line {entry['line']}: {entry['error']}",
            file=sys.stderr,
        )
    if reports:
        summary = report_obj["summary"]
        print(
            f"eval: {len(reports)} instances "
            f"feasibility_mean={summary['feasibility_mean']:.4f} "
            f"hvr_mean={summary['hvr_mean']:.4f} -> {args.out} "
            f"({len(errors)} errors)"
        )
    else:
        print(f"eval: 0 instances -> {args.out} ({len(errors)} errors)")
    return len(errors)


# -------------------------------------------------------------------- fuse

def _fuse_item(item, config: FusionConfig) -> dict:
    lineno, record, passes = item
    try:
        _check_schema(record, (records.SCHEMA_INSTANCE, records.SCHEMA_SOLVED), lineno)
        instance = records.instance_from_record(record, f"line {lineno}")
        pool = CandidatePool(passes=tuple(passes), instance_id=instance.instance_id)
        frontier = fuse(instance, pool, config)
        out = records.prediction_to_record(
            instance.instance_id, frontier.decisions, instance.n
        )
        out["shortfall"] = frontier.shortfall
        return out
    except (ValueError, RuntimeError) as exc:
        return error_record(lineno, str(exc), str(record.get("instance_id", "")))


def cmd_fuse(args) -> int:
    config = FusionConfig(
        k=args.k, tol=args.tol, obj_tol=args.obj_tol, selection_mode=args.mode
    )
    pre_errors: list[dict] = []
    by_id_per_pass: list[dict[str, np.ndarray]] = []
    for path in args.passes:
        by_id: dict[str, np.ndarray] = {}
        for lineno, record, err in _read_lines(path):
            if err is not None:
                entry = error_record(lineno, err)
                entry["source"] = str(path)
                pre_errors.append(entry)
                continue
            try:
                instance_id, vectors = _prediction_vectors(record, lineno)
                if instance_id in by_id:
                    raise RecordError(
                        f"line {lineno}: duplicate prediction for {instance_id!r}"
                    )
                by_id[instance_id] = vectors
            except (ValueError, RuntimeError) as exc:
                entry = error_record(
                    lineno, str(exc), str(record.get("instance_id", ""))
                )
                entry["source"] = str(path)
                pre_errors.append(entry)
        by_id_per_pass.append(by_id)

    items = []
    for lineno, record, err in _read_lines(args.instances):
        if err is not None:
            entry = error_record(lineno, err)
            entry["source"] = str(args.instances)
            pre_errors.append(entry)
            continue
        instance_id = str(record.get("instance_id", ""))
        passes = [
            by_id[instance_id] for by_id in by_id_per_pass if instance_id in by_id
        ]
        items.append((lineno, record, passes))

    out = pre_errors + _map_items(
        items, partial(_fuse_item, config=config), args.workers
    )
    return _finish("fuse", args.out, out)


# ------------------------------------------------------------------ parser

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="paretogen",
        description="Generate, solve, serialize, and score bi-objective instances.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample problem instances to JSONL")
    p.add_argument("--family", required=True, choices=list(FAMILIES) + ["all"])
    p.add_argument("--n", type=_parse_n_range, default=(10, 10),
                   metavar="N|LO..HI", help="dimension or inclusive range")
    p.add_argument("--count", type=int, default=10, help="instances per family")
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--num-cons", type=int, default=1, choices=(0, 1, 2))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", help="build reference frontiers for instances")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--num-eps", type=int, default=100)
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--tol", type=float, default=1e-4, help="feasibility tolerance")
    p.add_argument("--obj-tol", type=float, default=1e-4)
    p.add_argument("--workers", type=int, default=_default_workers(),
                   help=f"parallel workers (default from ${WORKERS_ENV})")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("encode", help="serialize solved records to prompt text")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=20,
                   help="advertised solution count when a record has no frontier")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="parse completion text back to vectors")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="score predictions against references")
    p.add_argument("--ref", required=True, help="solved records JSONL")
    p.add_argument("--pred", required=True, help="prediction or solved records JSONL")
    p.add_argument("--out", required=True, help="report path (single JSON object)")
    p.add_argument("--tol", type=float, default=DEFAULT_FEAS_TOL,
                   help="feasibility tolerance")
    p.add_argument("--plot", default="", metavar="DIR",
                   help="write one objective-space PNG per instance")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("fuse", help="merge prediction passes into one frontier")
    p.add_argument("--instances", required=True,
                   help="instance or solved records JSONL")
    p.add_argument("--passes", required=True, nargs="+",
                   help="prediction JSONL files, one per decoding pass")
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--tol", type=float, default=DEFAULT_FEAS_TOL,
                   help="feasibility tolerance")
    p.add_argument("--obj-tol", type=float, default=1e-4)
    p.add_argument("--mode", default="front_by_front",
                   choices=("front_by_front", "union"))
    p.add_argument("--workers", type=int, default=_default_workers(),
                   help=f"parallel workers (default from ${WORKERS_ENV})")
    p.set_defaults(func=cmd_fuse)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        n_errors = args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 1 if n_errors else 0


if __name__ == "__main__":
    raise SystemExit(main())
