"""First-order solver for scalarized and cap-constrained subproblems.

Box bounds are handled by exact projection inside a spectral projected
gradient loop (Barzilai-Borwein steps, nonmonotone Armijo backtracking).
Linear rows are handled by a safeguarded augmented Lagrangian outer loop:
multipliers update only when a row meets its feasibility target, otherwise
its penalty grows, which keeps the inner subproblems well conditioned.

Objective caps ``f_other(x) <= eps`` are not penalised directly. Every
problem family is strongly convex, so the weighted-sum path x(lam) traces
the entire Pareto front and the capped objective moves monotonically along
it; each cap is solved by bracketing lam (Illinois regula falsi) with
warm-started scalarized solves. This stays robust at any objective scale,
where a quadratic penalty on the cap would need an enormous coefficient.

The engine is batched: it advances B independent subproblems over the same
instance in lockstep, which is what makes dense epsilon sweeps affordable.
Single-problem calls run the same code with B = 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problems import ProblemInstance, evaluate, gradient

_ALPHA_MIN = 1e-12
_ALPHA_MAX = 1e12
_RHO_MAX = 1e10
_STRIKE_LIMIT = 4
_MU_MAX = 1e12
_ARMIJO = 1e-4
_MAX_HALVINGS = 60
_NM_MEMORY = 8
_MAX_BRACKET = 100


class SolverError(RuntimeError):
    """Solve call violated a precondition."""


class InfeasibleEpsError(SolverError):
    """The requested objective cap lies below its attainable minimum."""


@dataclass(frozen=True)
class SolverConfig:
    kkt_tol: float = 1e-8
    max_outer: int = 200
    max_inner: int = 2000
    penalty_growth: float = 10.0

    def __post_init__(self):
        if self.kkt_tol <= 0:
            raise SolverError("kkt_tol must be positive")
        if self.max_outer < 1 or self.max_inner < 1:
            raise SolverError("iteration budgets must be positive")
        if self.penalty_growth <= 1:
            raise SolverError("penalty_growth must exceed 1")


@dataclass(frozen=True)
class SolveResult:
    x: np.ndarray
    objectives: np.ndarray
    kkt_residual: float
    converged: bool
    iterations: int

    def __post_init__(self):
        self.x.setflags(write=False)
        self.objectives.setflags(write=False)


def _constraints(instance: ProblemInstance, X: np.ndarray) -> np.ndarray:
    if instance.num_cons == 0:
        return np.zeros((X.shape[0], 0))
    return X @ instance.cons_matrix.T - instance.cons_rhs


def _al_value(instance, W, X, MU, RHO):
    """Augmented Lagrangian value; also returns the constraint slab."""
    F = evaluate(instance, X)
    vals = np.sum(F * W, axis=-1)
    G = _constraints(instance, X)
    if G.shape[1]:
        S = np.maximum(0.0, MU + RHO[:, None] * G)
        vals = vals + np.sum(S * S - MU * MU, axis=-1) / (2.0 * RHO)
    return vals, G


def _al_gradient(instance, W, X, MU, RHO, G):
    """Gradient of the augmented Lagrangian given constraint values ``G``."""
    g1, g2 = gradient(instance, X)
    grad = W[:, :1] * g1 + W[:, 1:] * g2
    if G.shape[1]:
        S = np.maximum(0.0, MU + RHO[:, None] * G)
        grad = grad + S @ instance.cons_matrix
    return grad


def _projected_gradient_norm(X, grad, lower, upper):
    return np.abs(X - np.clip(X - grad, lower, upper)).max(axis=-1)


def _inner_descent(instance, W, X, MU, RHO, frozen, tol, budget, counts):
    """Advance unfrozen rows until their projected-gradient norm meets tol.

    Spectral projected gradient with a nonmonotone (last-8 reference) line
    search; every array op is gathered onto the still-active rows so
    stragglers do not keep the whole batch paying full price. Returns
    updated X plus the final constraint slab; mutates counts.
    """
    B = W.shape[0]
    lower, upper = instance.lower, instance.upper
    tol = np.broadcast_to(np.asarray(tol, dtype=float), (B,))
    L, G_cons = _al_value(instance, W, X, MU, RHO)
    grad = _al_gradient(instance, W, X, MU, RHO, G_cons)
    pg = _projected_gradient_norm(X, grad, lower, upper)
    alpha = np.clip(1.0 / np.maximum(pg, 1e-12), _ALPHA_MIN, 1.0)
    done = frozen | (pg <= tol)
    history = np.full((B, _NM_MEMORY), -np.inf)
    history[:, 0] = L
    hist_len = np.ones(B, dtype=int)

    for it in range(budget):
        idx = np.flatnonzero(~done)
        if idx.size == 0:
            break
        counts[idx] += 1
        W_a = W[idx]
        MU_a, RHO_a = MU[idx], RHO[idx]
        X_a, L_a, grad_a = X[idx], L[idx], grad[idx]
        # a periodic monotone iteration breaks the 2-cycles that a pure
        # nonmonotone reference lets spectral steps fall into
        if it % _NM_MEMORY == _NM_MEMORY - 1:
            ref = L_a
        else:
            ref = history[idx].max(axis=1)

        # masked backtracking against the nonmonotone reference value
        pending = np.arange(idx.size)
        trial_alpha = alpha[idx].copy()
        X_new, L_new, G_new = X_a.copy(), L_a.copy(), G_cons[idx].copy()
        stalled = np.zeros(idx.size, dtype=bool)
        for _ in range(_MAX_HALVINGS):
            if pending.size == 0:
                break
            T = np.clip(
                X_a[pending] - trial_alpha[pending, None] * grad_a[pending],
                lower,
                upper,
            )
            LT, GT = _al_value(
                instance, W_a[pending], T, MU_a[pending], RHO_a[pending]
            )
            dd = np.sum((T - X_a[pending]) * grad_a[pending], axis=-1)
            ok = LT <= ref[pending] + _ARMIJO * dd + 4e-15 * (1.0 + np.abs(ref[pending]))
            ok_rows = pending[ok]
            X_new[ok_rows] = T[ok]
            L_new[ok_rows] = LT[ok]
            G_new[ok_rows] = GT[ok]
            pending = pending[~ok]
            trial_alpha[pending] *= 0.5
            dead = trial_alpha[pending] < 1e-20
            stalled[pending[dead]] = True
            pending = pending[~dead]

        grad_new = _al_gradient(instance, W_a, X_new, MU_a, RHO_a, G_new)
        step = X_new - X_a
        diff = grad_new - grad_a
        ss = np.sum(step * step, axis=-1)
        sy = np.sum(step * diff, axis=-1)
        yy = np.sum(diff * diff, axis=-1)
        # alternate the two spectral step lengths (further cycle protection)
        bb1 = ss / np.maximum(sy, 1e-300)
        bb2 = sy / np.maximum(yy, 1e-300)
        bb = np.where(sy > 1e-30, bb1 if it % 2 == 0 else bb2, trial_alpha * 4.0)
        alpha[idx] = np.clip(bb, _ALPHA_MIN, _ALPHA_MAX)
        X[idx], L[idx], G_cons[idx], grad[idx] = X_new, L_new, G_new, grad_new
        history[idx, hist_len[idx] % _NM_MEMORY] = L_new
        hist_len[idx] += 1

        pg_a = _projected_gradient_norm(X_new, grad_new, lower, upper)
        done[idx] = stalled | (pg_a <= tol[idx])

    return X, G_cons


def _kkt(instance, W, X, S):
    """Independent KKT residuals: (stationarity, linear viol, comp).

    ``S`` is the (B, m) multiplier estimate. Stationarity is the projected
    gradient of the Lagrangian; comp is the worst complementarity slack
    min(-g, s) over constraints that are both slack and priced.
    """
    G = _constraints(instance, X)
    g1, g2 = gradient(instance, X)
    grad = W[:, :1] * g1 + W[:, 1:] * g2
    viol = np.zeros(W.shape[0])
    comp = np.zeros(W.shape[0])
    if G.shape[1]:
        grad = grad + S @ instance.cons_matrix
        viol = np.maximum(G, 0.0).max(axis=-1)
        slack_priced = np.maximum(np.minimum(-G, S), 0.0)
        comp = np.where((S > 0) & (G < 0), slack_priced, 0.0).max(axis=-1)
    stat = _projected_gradient_norm(X, grad, instance.lower, instance.upper)
    return stat, viol, comp


def _stationarity_tolerance(instance, W, config):
    """Per-row stopping tolerance, relative to the scalarized gradient
    magnitude at the box midpoint (floored at 1). Linear feasibility stays
    absolute so the tau guarantees downstream hold at face value."""
    g1, g2 = gradient(instance, instance.midpoint[None, :])
    grad0 = W[:, :1] * g1 + W[:, 1:] * g2
    return config.kkt_tol * np.maximum(1.0, np.abs(grad0).max(axis=-1))


def _solve_batch(instance, W, config, x0=None, mu0=None):
    """Safeguarded augmented-Lagrangian loop over all rows at once.

    A row's multipliers update only when it meets its feasibility target
    eta; otherwise its penalty grows. eta and the inner tolerance omega
    tighten multiplicatively on success. Warm starts: ``x0`` seeds the
    iterate and ``mu0`` the multipliers (skipping the loose early outer
    rounds). Returns (X, kkt, converged, iteration counts, multipliers).
    """
    B = W.shape[0]
    X = np.tile(instance.midpoint, (B, 1)) if x0 is None else np.array(x0, dtype=float)
    m = instance.num_cons
    counts = np.zeros(B, dtype=int)
    stat_tol = _stationarity_tolerance(instance, W, config)

    if m == 0:
        X, _ = _inner_descent(
            instance, W, X, np.zeros((B, 0)), np.ones(B),
            np.zeros(B, dtype=bool), stat_tol, config.max_inner, counts,
        )
        stat, *_ = _kkt(instance, W, X, np.zeros((B, 0)))
        return X, stat, stat <= stat_tol, counts, np.zeros((B, 0))

    F0 = evaluate(instance, X)
    G0 = _constraints(instance, X)
    scale = np.abs(np.sum(F0 * W, axis=-1))
    denom = np.maximum(np.sum(np.maximum(G0, 0.0) ** 2, axis=-1), 1.0)
    RHO = np.clip(10.0 * np.maximum(scale, 1.0) / denom, 1e-2, 1e4)
    # warm multipliers seed MU and let the inner solves run tight at once;
    # eta stays cold so a wrong guess is corrected by multiplier updates,
    # never by penalty growth alone
    MU = np.zeros((B, m)) if mu0 is None else np.array(mu0, dtype=float)
    ETA = np.full(B, 1e-1)
    if mu0 is None:
        OMEGA = 1e-2 * np.maximum(1.0, stat_tol / config.kkt_tol)
    else:
        OMEGA = stat_tol.copy()

    frozen = np.zeros(B, dtype=bool)
    failed = np.zeros(B, dtype=bool)
    strikes = np.zeros(B, dtype=int)
    kkt = np.full(B, np.inf)
    S = MU.copy()
    for _ in range(config.max_outer):
        X, G_cons = _inner_descent(
            instance, W, X, MU, RHO, frozen | failed,
            np.maximum(OMEGA, stat_tol), config.max_inner, counts,
        )
        S = np.maximum(0.0, MU + RHO[:, None] * G_cons)
        stat, viol, comp = _kkt(instance, W, X, S)
        kkt = np.maximum(stat, viol)
        feasible = viol <= config.kkt_tol
        frozen |= ~failed & feasible & (stat <= stat_tol) & (comp <= stat_tol)
        live = ~(frozen | failed)
        if not live.any():
            break
        ok = live & (viol <= np.maximum(ETA, config.kkt_tol))
        MU[ok] = np.minimum(S[ok], _MU_MAX)
        ETA[ok] = np.maximum(ETA[ok] * 0.1, config.kkt_tol)
        OMEGA[ok] = np.maximum(OMEGA[ok] * 0.1, stat_tol[ok])
        grow = live & ~ok
        RHO[grow] = np.minimum(RHO[grow] * config.penalty_growth, _RHO_MAX)
        strikes[grow & (RHO >= _RHO_MAX)] += 1
        failed |= strikes > _STRIKE_LIMIT
        if failed.all():
            break

    return X, kkt, frozen, counts, S


def _as_results(instance, X, kkt, converged, counts) -> list[SolveResult]:
    F = evaluate(instance, X)
    return [
        SolveResult(
            x=X[i].copy(),
            objectives=F[i].copy(),
            kkt_residual=float(kkt[i]),
            converged=bool(converged[i]),
            iterations=int(counts[i]),
        )
        for i in range(X.shape[0])
    ]


def minimize_scalarized_batch(
    instance: ProblemInstance, weights, config: SolverConfig = SolverConfig()
) -> list[SolveResult]:
    """Solve min w f1 + (1-w) f2 over the feasible set for each w in weights."""
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.size == 0:
        return []
    if ((w < 0) | (w > 1)).any() or not np.isfinite(w).all():
        raise SolverError("scalarization weights must lie in [0, 1]")
    W = np.stack([w, 1.0 - w], axis=1)
    X, kkt, conv, counts, _ = _solve_batch(instance, W, config)
    return _as_results(instance, X, kkt, conv, counts)


def minimize_scalarized(
    instance: ProblemInstance, weight: float, config: SolverConfig = SolverConfig()
) -> SolveResult:
    return minimize_scalarized_batch(instance, [weight], config)[0]


def minimize_eps_batch(
    instance: ProblemInstance,
    minimize_index: int,
    eps_values,
    config: SolverConfig = SolverConfig(),
) -> list[SolveResult]:
    """Minimize one objective with the other capped at each eps in turn.

    Solved by inverting the weighted-sum path: the capped objective is
    monotone in the weight lam placed on the minimized one, so each row
    runs an Illinois bracket on lam with warm-started scalarized solves.
    A returned row's cap can overshoot eps by at most
    10 * kkt_tol * max(1, |eps|).

    Rows whose cap cannot be met are returned unconverged (at the capped
    objective's own minimizer); attainability checks are the caller's
    business here (see minimize_eps_constrained).
    """
    if minimize_index not in (0, 1):
        raise SolverError("minimize_index must be 0 or 1")
    eps = np.asarray(eps_values, dtype=float).reshape(-1)
    if eps.size == 0:
        return []
    if not np.isfinite(eps).all():
        raise SolverError("eps values must be finite")
    cap_index = 1 - minimize_index
    B = eps.size

    def solve(lam, x0=None, mu0=None):
        W = np.zeros((lam.size, 2))
        W[:, minimize_index] = lam
        W[:, cap_index] = 1.0 - lam
        return _solve_batch(instance, W, config, x0=x0, mu0=mu0)

    ends_X, ends_kkt, ends_conv, ends_counts, ends_MU = solve(np.array([0.0, 1.0]))
    f_ends = evaluate(instance, ends_X)[:, cap_index]
    f_min, f_max = float(f_ends[0]), float(f_ends[1])
    shared = int(ends_counts.sum())

    # defaults cover the caps the bracket never touches: unattainable rows
    # sit at the capped objective's minimizer, slack rows at the other end
    X_out = np.tile(ends_X[0], (B, 1))
    kkt_out = np.maximum(float(ends_kkt[0]), f_min - eps)
    conv_out = np.zeros(B, dtype=bool)
    iters = np.full(B, shared)

    slack = eps >= f_max
    X_out[slack] = ends_X[1]
    kkt_out[slack] = float(ends_kkt[1])
    conv_out[slack] = bool(ends_conv[1])

    act = np.flatnonzero((eps >= f_min) & ~slack)
    if act.size:
        tol_f = 10.0 * config.kkt_tol * np.maximum(1.0, np.abs(eps[act]))
        lo = np.zeros(act.size)
        hi = np.ones(act.size)
        flo = f_min - eps[act]
        fhi = f_max - eps[act]
        side = np.zeros(act.size, dtype=int)
        Xb = np.tile(ends_X[0], (act.size, 1))
        kkt_b = np.full(act.size, float(ends_kkt[0]))
        conv_b = np.full(act.size, bool(ends_conv[0]))
        Xwarm = Xb.copy()
        MUwarm = np.tile(ends_MU[0], (act.size, 1))
        resolved = np.abs(flo) <= tol_f

        for _ in range(_MAX_BRACKET):
            live = np.flatnonzero(~resolved)
            if live.size == 0:
                break
            span = hi[live] - lo[live]
            lam = lo[live] - flo[live] * span / (fhi[live] - flo[live])
            inside = (lam > lo[live]) & (lam < hi[live])
            lam = np.where(inside, lam, lo[live] + 0.5 * span)
            Xs, kkts, convs, cnts, MUs = solve(lam, Xwarm[live], MUwarm[live])
            f = evaluate(instance, Xs)[:, cap_index] - eps[act[live]]
            iters[act[live]] += cnts
            Xwarm[live] = Xs
            MUwarm[live] = MUs

            good = np.abs(f) <= tol_f[live]
            rows = live[good]
            Xb[rows] = Xs[good]
            kkt_b[rows] = np.maximum(kkts[good], np.maximum(f[good], 0.0))
            conv_b[rows] = convs[good]
            resolved[rows] = True

            upd = ~good
            f_u, lam_u, rows_u = f[upd], lam[upd], live[upd]
            feas = f_u <= 0.0
            a = rows_u[feas]
            fhi[a[side[a] == -1]] *= 0.5
            lo[a], flo[a], side[a] = lam_u[feas], f_u[feas], -1
            Xb[a], kkt_b[a], conv_b[a] = Xs[upd][feas], kkts[upd][feas], convs[upd][feas]
            b = rows_u[~feas]
            flo[b[side[b] == 1]] *= 0.5
            hi[b], fhi[b], side[b] = lam_u[~feas], f_u[~feas], 1
            # collapsed brackets keep the stored feasible-side point
            resolved[rows_u] = (hi[rows_u] - lo[rows_u]) <= 1e-12

        conv_b[~resolved] = False
        X_out[act] = Xb
        kkt_out[act] = kkt_b
        conv_out[act] = conv_b

    return _as_results(instance, X_out, kkt_out, conv_out, iters)


def minimize_eps_constrained(
    instance: ProblemInstance,
    minimize_index: int,
    eps: float,
    config: SolverConfig = SolverConfig(),
) -> SolveResult:
    """Minimize objective ``minimize_index`` subject to the other <= eps."""
    result = minimize_eps_batch(instance, minimize_index, [eps], config)[0]
    cap_index = 1 - minimize_index
    slack = max(1e-6, 10.0 * config.kkt_tol * max(1.0, abs(eps)))
    if not result.converged or result.objectives[cap_index] > eps + slack:
        # distinguish a hard cap from an unattainable one
        best = minimize_scalarized(instance, float(cap_index == 0), config)
        if best.objectives[cap_index] > eps + slack:
            raise InfeasibleEpsError(
                f"cap f{cap_index + 1} <= {eps} is unattainable; "
                f"minimum is {best.objectives[cap_index]:.6f}"
            )
    return result
