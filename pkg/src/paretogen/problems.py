"""Bi-objective convex problem families over box-and-linear feasible sets.

Five families, each with two strongly convex objectives over
``X = {x : lower <= x <= upper, A x <= rhs}``:

- ``boqp``      f_i(x) = 0.5 x'Q_i x + q_i'x + c_i            (Q_i sym PD)
- ``sbqp``      f_1(x) = sum a_j x_j^2 + b_j x_j, f_2 alike with alpha, beta
- ``ridge``     f_i(x) = 0.5 ||A_i x - b_i||^2 + lambda_i/2 ||x||^2
- ``huber``     f_i(x) = sum phi_delta_i((A_i x - b_i)_j) + lambda_i/2 ||x||^2
- ``softplus``  f_i(x) = sum log(1 + exp((A_i x - b_i)_j)) + lambda_i/2 ||x||^2

where phi_delta(r) = 0.5 r^2 for |r| <= delta, else delta|r| - 0.5 delta^2.

Evaluation and gradients are exact and accept batched inputs of shape
``(..., n)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .codec import MAX_ABS

DEFAULT_FEAS_TOL = 5e-5

FAMILIES = ("boqp", "sbqp", "ridge", "huber", "softplus")

# params schema per family; dict order fixes the serialization block order
PARAM_SCHEMAS: dict[str, dict[str, str]] = {
    "boqp": {
        "Q1": "matrix", "q1": "vector", "c1": "scalar",
        "Q2": "matrix", "q2": "vector", "c2": "scalar",
    },
    "sbqp": {"a": "vector", "b": "vector", "alpha": "vector", "beta": "vector"},
    "ridge": {
        "A1": "obj_matrix", "b1": "obj_vector", "lambda1": "scalar",
        "A2": "obj_matrix", "b2": "obj_vector", "lambda2": "scalar",
    },
    "huber": {
        "A1": "obj_matrix", "b1": "obj_vector", "lambda1": "scalar", "delta1": "scalar",
        "A2": "obj_matrix", "b2": "obj_vector", "lambda2": "scalar", "delta2": "scalar",
    },
    "softplus": {
        "A1": "obj_matrix", "b1": "obj_vector", "lambda1": "scalar",
        "A2": "obj_matrix", "b2": "obj_vector", "lambda2": "scalar",
    },
}


class InstanceError(ValueError):
    """Instance fields violate the family contract."""


def _frozen_array(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ProblemInstance:
    """One problem: family tag, box, linear constraints, family parameters.

    ``params`` holds the family coefficient bundle keyed per PARAM_SCHEMAS;
    ``instance_id`` is free-form provenance set by the generator.
    """

    family: str
    n: int
    lower: np.ndarray
    upper: np.ndarray
    cons_matrix: np.ndarray
    cons_rhs: np.ndarray
    params: Mapping[str, np.ndarray | float]
    instance_id: str = ""

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InstanceError(f"unknown family {self.family!r}")
        if not (1 <= self.n <= 64):
            raise InstanceError(f"dimension n={self.n} outside [1, 64]")
        object.__setattr__(self, "lower", _frozen_array(self.lower))
        object.__setattr__(self, "upper", _frozen_array(self.upper))
        object.__setattr__(self, "cons_matrix", _frozen_array(self.cons_matrix))
        object.__setattr__(self, "cons_rhs", _frozen_array(self.cons_rhs))
        self._check_geometry()
        object.__setattr__(self, "params", self._check_params(dict(self.params)))

    def _check_geometry(self):
        n = self.n
        if self.lower.shape != (n,) or self.upper.shape != (n,):
            raise InstanceError("bounds must have shape (n,)")
        if not (np.isfinite(self.lower).all() and np.isfinite(self.upper).all()):
            raise InstanceError("bounds must be finite")
        if np.abs(self.lower).max() > MAX_ABS or np.abs(self.upper).max() > MAX_ABS:
            raise InstanceError(f"bounds must lie within |v| <= {MAX_ABS}")
        if not (self.lower < self.upper).all():
            raise InstanceError("need lower < upper componentwise")
        if self.cons_matrix.ndim != 2 or self.cons_matrix.shape[1] != n:
            raise InstanceError("cons_matrix must have shape (m, n)")
        if self.cons_rhs.shape != (self.cons_matrix.shape[0],):
            raise InstanceError("cons_rhs length must match cons_matrix rows")
        if not (np.isfinite(self.cons_matrix).all() and np.isfinite(self.cons_rhs).all()):
            raise InstanceError("constraints must be finite")

    def _check_params(self, params: dict) -> Mapping:
        schema = PARAM_SCHEMAS[self.family]
        if set(params) != set(schema):
            raise InstanceError(
                f"{self.family} params must be exactly {sorted(schema)}, got {sorted(params)}"
            )
        clean: dict[str, np.ndarray | float] = {}
        for name in schema:  # schema order, not caller order
            kind = schema[name]
            value = params[name]
            if kind == "scalar":
                value = float(value)
                if not np.isfinite(value):
                    raise InstanceError(f"param {name} must be finite")
                clean[name] = value
                continue
            arr = _frozen_array(value)
            if not np.isfinite(arr).all():
                raise InstanceError(f"param {name} must be finite")
            clean[name] = arr
        self._check_family(clean)
        return clean

    def _check_family(self, p: Mapping):
        n = self.n
        if self.family == "boqp":
            for i in ("1", "2"):
                Q, q = p[f"Q{i}"], p[f"q{i}"]
                if Q.shape != (n, n) or q.shape != (n,):
                    raise InstanceError(f"Q{i}/q{i} shapes must be (n, n)/(n,)")
                if not np.allclose(Q, Q.T, rtol=0, atol=1e-12):
                    raise InstanceError(f"Q{i} must be symmetric")
                if np.linalg.eigvalsh(Q)[0] <= 0:
                    raise InstanceError(f"Q{i} must be positive definite")
        elif self.family == "sbqp":
            for name in ("a", "b", "alpha", "beta"):
                if p[name].shape != (n,):
                    raise InstanceError(f"param {name} must have shape (n,)")
            if p["a"].min() <= 0 or p["alpha"].min() <= 0:
                raise InstanceError("sbqp quadratic coefficients must be positive")
        else:
            for i in ("1", "2"):
                A, b = p[f"A{i}"], p[f"b{i}"]
                if A.ndim != 2 or A.shape[1] != n:
                    raise InstanceError(f"A{i} must have shape (m_obj, n)")
                if b.shape != (A.shape[0],):
                    raise InstanceError(f"b{i} length must match A{i} rows")
                if p[f"lambda{i}"] <= 0:
                    raise InstanceError(f"lambda{i} must be positive")
                if self.family == "huber" and p[f"delta{i}"] <= 0:
                    raise InstanceError(f"delta{i} must be positive")

    @property
    def num_cons(self) -> int:
        return self.cons_matrix.shape[0]

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)


def _huber_value(r: np.ndarray, delta: float) -> np.ndarray:
    quad = 0.5 * r * r
    lin = delta * np.abs(r) - 0.5 * delta * delta
    return np.where(np.abs(r) <= delta, quad, lin)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # tanh form stays finite for large |z|
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def evaluate(instance: ProblemInstance, x: np.ndarray) -> np.ndarray:
    """Exact objective pair; shape (..., 2) for input shape (..., n)."""
    x = np.asarray(x, dtype=float)
    p = instance.params
    fam = instance.family
    if fam == "boqp":
        f = [
            0.5 * np.sum((x @ p[f"Q{i}"]) * x, axis=-1) + x @ p[f"q{i}"] + p[f"c{i}"]
            for i in ("1", "2")
        ]
    elif fam == "sbqp":
        xx = x * x
        f = [xx @ p["a"] + x @ p["b"], xx @ p["alpha"] + x @ p["beta"]]
    else:
        sq = 0.5 * np.sum(x * x, axis=-1)
        f = []
        for i in ("1", "2"):
            r = x @ p[f"A{i}"].T - p[f"b{i}"]
            if fam == "ridge":
                data = 0.5 * np.sum(r * r, axis=-1)
            elif fam == "huber":
                data = np.sum(_huber_value(r, p[f"delta{i}"]), axis=-1)
            else:
                data = np.sum(np.logaddexp(0.0, r), axis=-1)
            f.append(data + p[f"lambda{i}"] * sq)
    return np.stack(f, axis=-1)


def gradient(instance: ProblemInstance, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact gradients (g1, g2), each of the input shape (..., n)."""
    x = np.asarray(x, dtype=float)
    p = instance.params
    fam = instance.family
    if fam == "boqp":
        return tuple(x @ p[f"Q{i}"] + p[f"q{i}"] for i in ("1", "2"))
    if fam == "sbqp":
        return (2.0 * x * p["a"] + p["b"], 2.0 * x * p["alpha"] + p["beta"])
    grads = []
    for i in ("1", "2"):
        A = p[f"A{i}"]
        r = x @ A.T - p[f"b{i}"]
        if fam == "ridge":
            pull = r
        elif fam == "huber":
            pull = np.clip(r, -p[f"delta{i}"], p[f"delta{i}"])
        else:
            pull = _sigmoid(r)
        grads.append(pull @ A + p[f"lambda{i}"] * x)
    return tuple(grads)


def constraint_values(instance: ProblemInstance, x: np.ndarray) -> np.ndarray:
    """Linear constraint slack ``A x - rhs`` with shape (..., m)."""
    x = np.asarray(x, dtype=float)
    if instance.num_cons == 0:
        return np.zeros(x.shape[:-1] + (0,))
    return x @ instance.cons_matrix.T - instance.cons_rhs


def max_violation(instance: ProblemInstance, x: np.ndarray) -> np.ndarray:
    """Worst bound or linear violation, clamped at zero; shape (...,)."""
    x = np.asarray(x, dtype=float)
    v = np.maximum(instance.lower - x, x - instance.upper).max(axis=-1)
    if instance.num_cons:
        v = np.maximum(v, constraint_values(instance, x).max(axis=-1))
    return np.maximum(v, 0.0)


def check_feasible(
    instance: ProblemInstance, x: np.ndarray, tol: float = DEFAULT_FEAS_TOL
) -> np.ndarray | bool:
    """Bounds and linear rows within additive tolerance ``tol``."""
    if tol < 0:
        raise ValueError("tol must be non-negative")
    result = max_violation(instance, x) <= tol
    return bool(result) if np.ndim(result) == 0 else result


@dataclass(frozen=True)
class TheoryBounds:
    """Constants feeding the solution-path and rounding bounds.

    grad_gap bounds sup ||grad f1 - grad f2||_2 over the box (sampled);
    strong_convexity is analytic for sbqp/boqp and the regularizer weight
    otherwise; lipschitz_l1 is the sampled sup of ||grad f_i||_inf, the
    Lipschitz constant of f_i w.r.t. the l1 norm.
    """

    grad_gap: float
    strong_convexity: float
    lipschitz_l1: float


def estimate_bounds(
    instance: ProblemInstance, samples: int = 4096, seed: int = 0
) -> TheoryBounds:
    """Sample the box uniformly and bound the theory constants."""
    if samples < 1:
        raise ValueError("samples must be positive")
    rng = np.random.default_rng(seed)
    width = instance.upper - instance.lower
    x = instance.lower + rng.random((samples, instance.n)) * width
    g1, g2 = gradient(instance, x)
    grad_gap = float(np.linalg.norm(g1 - g2, axis=-1).max())
    lip = float(max(np.abs(g1).max(), np.abs(g2).max()))

    p = instance.params
    if instance.family == "sbqp":
        mu = 2.0 * min(p["a"].min(), p["alpha"].min())
    elif instance.family == "boqp":
        mu = min(np.linalg.eigvalsh(p["Q1"])[0], np.linalg.eigvalsh(p["Q2"])[0])
    else:
        mu = min(p["lambda1"], p["lambda2"])
    return TheoryBounds(grad_gap=grad_gap, strong_convexity=float(mu), lipschitz_l1=lip)
