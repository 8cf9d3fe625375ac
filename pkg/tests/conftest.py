"""Shared instance builders kept independent of the generator module."""

from __future__ import annotations

import numpy as np

from paretogen.problems import ProblemInstance


def sbqp_instance(
    a=(1.0,),
    b=(0.0,),
    alpha=(1.0,),
    beta=(-2.0,),
    lower=(-2.0,),
    upper=(2.0,),
    cons_matrix=None,
    cons_rhs=None,
    instance_id="toy-sbqp",
) -> ProblemInstance:
    n = len(a)
    if cons_matrix is None:
        cons_matrix = np.zeros((0, n))
        cons_rhs = np.zeros(0)
    return ProblemInstance(
        family="sbqp",
        n=n,
        lower=np.asarray(lower, float),
        upper=np.asarray(upper, float),
        cons_matrix=np.asarray(cons_matrix, float),
        cons_rhs=np.asarray(cons_rhs, float),
        params={
            "a": np.asarray(a, float),
            "b": np.asarray(b, float),
            "alpha": np.asarray(alpha, float),
            "beta": np.asarray(beta, float),
        },
        instance_id=instance_id,
    )


def toy_sbqp() -> ProblemInstance:
    """n=1 toy with f1 = x^2 and f2 = x^2 - 2x over [-2, 2].

    Weighted-sum minimizer is x(w) = 1 - w; the cap f2 <= -0.75 makes the
    feasible interval [0.5, 1.5].
    """
    return sbqp_instance()


def random_instance(family: str, n: int, seed: int, num_cons: int = 0) -> ProblemInstance:
    """Small well-scaled instance for oracle tests; not the shipped generator."""
    rng = np.random.default_rng(seed)
    lower = -1.0 - rng.random(n)
    upper = 1.0 + rng.random(n)
    if num_cons:
        A = rng.uniform(-1.0, 1.0, size=(num_cons, n))
        rhs = A @ (0.5 * (lower + upper)) + rng.uniform(0.5, 1.0, size=num_cons)
    else:
        A = np.zeros((0, n))
        rhs = np.zeros(0)
    if family == "sbqp":
        params = {
            "a": rng.uniform(0.5, 2.0, n),
            "b": rng.uniform(-1.0, 1.0, n),
            "alpha": rng.uniform(0.5, 2.0, n),
            "beta": rng.uniform(-1.0, 1.0, n),
        }
    elif family == "boqp":
        params = {}
        for i in ("1", "2"):
            R = rng.standard_normal((n, n))
            Q = R.T @ R / n + 0.1 * np.eye(n)
            params[f"Q{i}"] = Q
            params[f"q{i}"] = rng.uniform(-1.0, 1.0, n)
            params[f"c{i}"] = float(rng.uniform(-1.0, 1.0))
    else:
        m_obj = n + 1
        params = {}
        for i in ("1", "2"):
            params[f"A{i}"] = rng.standard_normal((m_obj, n)) / np.sqrt(n)
            params[f"b{i}"] = rng.uniform(-1.0, 1.0, m_obj)
            params[f"lambda{i}"] = float(rng.uniform(0.1, 0.5))
            if family == "huber":
                params[f"delta{i}"] = float(rng.uniform(0.5, 1.5))
    return ProblemInstance(
        family=family,
        n=n,
        lower=lower,
        upper=upper,
        cons_matrix=A,
        cons_rhs=rhs,
        params=params,
        instance_id=f"{family}-test-{seed}",
    )
