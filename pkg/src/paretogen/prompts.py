"""Chat-template serialization of instances and tolerant output parsing.

``serialize`` renders the three-role prompt text with every scalar in the
two-token fixed-point form; ``parse_solutions`` recovers decision vectors
from arbitrary model output without ever raising. The canonical system
prompt wording is the BOQP one; the other four families are adaptations
that keep its structure and swap the formula and parameter lines.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .codec import CodecRangeError, TokenParseError, decode_sequence, encode_sequence
from .frontier import Frontier
from .problems import PARAM_SCHEMAS, ProblemInstance

SOLUTIONS_BEGIN = "SOLUTIONS_BEGIN"
SOLUTIONS_END = "SOLUTIONS_END"


class PromptError(ValueError):
    """Serialization inputs violate a precondition."""


@dataclass(frozen=True)
class PromptBundle:
    """System, user, and assistant texts for one instance."""

    system: str
    user: str
    assistant: str


@dataclass(frozen=True)
class SlotStatus:
    """Outcome of one ``Sol{k}:`` group in encounter order."""

    slot: int
    ok: bool
    reason: str = ""


@dataclass(frozen=True)
class ParsedSolutions:
    """Parser result: salvaged vectors plus per-slot diagnostics.

    ``structural_failure`` marks output with no SOLUTIONS_BEGIN marker at
    all; such predictions count as empty.
    """

    vectors: np.ndarray
    slots: tuple[SlotStatus, ...]
    structural_failure: bool

    def __post_init__(self):
        arr = np.array(self.vectors, dtype=float)
        if arr.ndim != 2:
            raise PromptError("vectors must be a (m, n) matrix")
        arr.setflags(write=False)
        object.__setattr__(self, "vectors", arr)
        object.__setattr__(self, "slots", tuple(self.slots))


_FAMILY_TITLES = {
    "boqp": "Bi-objective Quadratic Programming (BOQP)",
    "sbqp": "Separable Bi-objective Quadratic Programming (SBQP)",
    "ridge": "Bi-objective Ridge Regression",
    "huber": "Bi-objective Huber Regression",
    "softplus": "Bi-objective Softplus Minimization",
}

_FAMILY_FORMULAS = {
    "boqp": (
        "f1(x) = 0.5 * x^T * Q1 * x + q1^T * x + c1",
        "f2(x) = 0.5 * x^T * Q2 * x + q2^T * x + c2",
    ),
    "sbqp": (
        "f1(x) = sum_i a_i * x_i^2 + b_i * x_i",
        "f2(x) = sum_i alpha_i * x_i^2 + beta_i * x_i",
    ),
    "ridge": (
        "f1(x) = 0.5 * ||A1 * x - b1||^2 + 0.5 * lambda1 * ||x||^2",
        "f2(x) = 0.5 * ||A2 * x - b2||^2 + 0.5 * lambda2 * ||x||^2",
    ),
    "huber": (
        "f1(x) = sum_j huber_delta1((A1 * x - b1)_j) + 0.5 * lambda1 * ||x||^2",
        "f2(x) = sum_j huber_delta2((A2 * x - b2)_j) + 0.5 * lambda2 * ||x||^2",
    ),
    "softplus": (
        "f1(x) = sum_j log(1 + exp((A1 * x - b1)_j)) + 0.5 * lambda1 * ||x||^2",
        "f2(x) = sum_j log(1 + exp((A2 * x - b2)_j)) + 0.5 * lambda2 * ||x||^2",
    ),
}

_SYSTEM_TEMPLATE = """\
You are an expert optimization engine specialized in {title}. Your task is \
to predict the complete Pareto optimal set by interpolating between the \
provided Anchor Points.

### Problem Structure
Minimize two conflicting objectives subject to linear constraints (Ax <= b):
  {formula1}
  {formula2}

The content between lower_BEGIN and lower_END represents the lower bound of \
each variable, and the content between upper_BEGIN and upper_END represents \
the upper bound of each variable. The value of each variable must strictly \
comply with these bounds.

### Input Context & Anchor Usage
The input provides:
1. Problem Parameters: {params}, A, b.
2. Anchor Points: Two extreme solutions x_anchor1 (minimizes f1) and \
x_anchor2 (minimizes f2).

CRITICAL STRATEGY: Use the Anchor Points as the boundary endpoints of the \
Pareto front. You must generate the set of intermediate solutions that \
effectively 'connect' these two anchors, balancing the trade-off between f1 \
and f2 while satisfying all constraints.

### Numerical Format (2-Token Fixed-Point)
All values are encoded as <s{{sign}}i{{int2+dec1:03d}}><d{{dec2-4:03d}}> (4 decimal places):
- i-token: sign(0/1) + integer part(2 digits) + 1st decimal digit
- d-token: 2nd-4th decimal digits
- Example: 1.2345 -> <s0i012><d345>; -0.5678 -> <s1i005><d678>
- Matrices are row-wise (R0:, R1:, ...).

### Output Requirement
Output the sequence of decision vectors (x) representing the approximate \
Pareto front. A Pareto front consists of {k} solutions.
Format: {begin} Sol0: <x_tokens...> Sol1: <x_tokens...> ... {end}"""


def system_prompt(family: str, k: int = 20) -> str:
    """Static system text for one family, requesting ``k`` solutions."""
    if family not in _FAMILY_TITLES:
        raise PromptError(f"unknown family {family!r}")
    if k < 1:
        raise PromptError(f"solution count k={k} must be positive")
    f1, f2 = _FAMILY_FORMULAS[family]
    return _SYSTEM_TEMPLATE.format(
        title=_FAMILY_TITLES[family],
        formula1=f1,
        formula2=f2,
        params=", ".join(PARAM_SCHEMAS[family]),
        k=k,
        begin=SOLUTIONS_BEGIN,
        end=SOLUTIONS_END,
    )


def _encode_field(values, path: str) -> str:
    try:
        return encode_sequence(np.asarray(values, dtype=float).ravel())
    except CodecRangeError as exc:
        raise CodecRangeError(f"field {path}: {exc}") from exc


def _vector_block(name: str, values, path: str) -> str:
    body = _encode_field(values, path)
    return f"{name}_BEGIN {body} {name}_END" if body else f"{name}_BEGIN {name}_END"


def _matrix_block(name: str, rows: np.ndarray, path: str) -> str:
    rendered = [
        f"R{i}: {_encode_field(row, f'{path} row {i}')}" for i, row in enumerate(rows)
    ]
    body = " ".join(rendered)
    return f"{name}_BEGIN {body} {name}_END" if rendered else f"{name}_BEGIN {name}_END"


def serialize(
    instance: ProblemInstance,
    anchors,
    frontier: Frontier | None = None,
    k: int = 20,
) -> PromptBundle:
    """Render one instance (and optionally its frontier) as prompt text.

    Blocks appear in fixed order: n, bounds, the two anchors, the family
    parameters in schema order, then A and b. Byte-deterministic.
    """
    anchor1, anchor2 = anchors
    anchor1 = np.asarray(anchor1, dtype=float)
    anchor2 = np.asarray(anchor2, dtype=float)
    if anchor1.shape != (instance.n,) or anchor2.shape != (instance.n,):
        raise PromptError(f"anchors must be two vectors of length {instance.n}")
    parts = [
        f"n={instance.n}",
        _vector_block("lower", instance.lower, "lower"),
        _vector_block("upper", instance.upper, "upper"),
        _vector_block("anchor1", anchor1, "anchor1"),
        _vector_block("anchor2", anchor2, "anchor2"),
    ]
    for name, kind in PARAM_SCHEMAS[instance.family].items():
        value = instance.params[name]
        if kind == "scalar":
            parts.append(f"{name}: {_encode_field([value], name)}")
        elif kind in ("matrix", "obj_matrix"):
            parts.append(_matrix_block(name, np.asarray(value), name))
        else:
            parts.append(_vector_block(name, value, name))
    parts.append(_matrix_block("A", instance.cons_matrix, "A"))
    parts.append(_vector_block("b", instance.cons_rhs, "b"))

    assistant = ""
    rows = 0 if frontier is None else frontier.decisions.shape[0]
    if rows:
        groups = [
            f"Sol{i}: {_encode_field(row, f'frontier Sol{i}')}"
            for i, row in enumerate(frontier.decisions)
        ]
        assistant = f"{SOLUTIONS_BEGIN} {' '.join(groups)} {SOLUTIONS_END}"
    return PromptBundle(
        system=system_prompt(instance.family, k=rows or k),
        user=" ".join(parts),
        assistant=assistant,
    )


_SOL_MARKER = re.compile(r"Sol(\d+):")


def parse_solutions(text: str, n: int, k: int) -> ParsedSolutions:
    """Extract up to ``k`` decision vectors from arbitrary model output.

    Whitespace between tokens is free-form but the token grammar itself is
    strict; a group parses only if it holds exactly ``n`` well-formed
    scalars. Malformed groups are skipped and reported per slot. Never
    raises on arbitrary ``text``.
    """
    if n < 1 or k < 1:
        raise PromptError(f"need positive dimensions, got n={n}, k={k}")
    if not isinstance(text, str):
        raise PromptError("text must be a string")
    empty = np.zeros((0, n))
    begin = text.find(SOLUTIONS_BEGIN)
    if begin < 0:
        return ParsedSolutions(vectors=empty, slots=(), structural_failure=True)
    region = text[begin + len(SOLUTIONS_BEGIN) :]
    end = region.find(SOLUTIONS_END)
    if end >= 0:
        region = region[:end]
    markers = list(_SOL_MARKER.finditer(region))
    vectors: list[np.ndarray] = []
    slots: list[SlotStatus] = []
    for found, match in enumerate(markers):
        slot = int(match.group(1))
        stop = markers[found + 1].start() if found + 1 < len(markers) else len(region)
        body = region[match.end() : stop]
        if len(vectors) >= k:
            slots.append(SlotStatus(slot, False, f"beyond the {k}-solution budget"))
            continue
        try:
            vectors.append(np.array(decode_sequence(body, count=n)))
        except TokenParseError as exc:
            slots.append(SlotStatus(slot, False, str(exc)))
        else:
            slots.append(SlotStatus(slot, True))
    stacked = np.stack(vectors) if vectors else empty
    return ParsedSolutions(
        vectors=stacked, slots=tuple(slots), structural_failure=False
    )
