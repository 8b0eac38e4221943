"""Smooth constrained nonlinear programming.

Problems have the form::

    minimize    f(x)
    subject to  c_eq(x)   = 0
                c_ineq(x) <= 0
                lower <= x <= upper

Inequalities become equalities ``c_ineq(x) + s = 0`` with nonnegative slacks
``s``.  The outer loop is a classical augmented Lagrangian (first-order
multiplier updates, penalty increased whenever the constraint violation does
not shrink fast enough); each bound-constrained subproblem is minimized by a
projected Newton method whose Hessian comes from second-order forward-mode
jets.  All derivatives are exact.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .autodiff import Dual, Jet, seed_duals, seed_jets, tangent

CONVERGED = "converged"
INFEASIBLE = "infeasible"
ITERATION_LIMIT = "iteration-limit"
# relative slack in the sufficient-decrease test for values near rounding level
_ROUNDOFF = 1e-13

Evaluator = Callable[[Sequence[Any]], tuple[Any, Sequence[Any], Sequence[Any]]]


class NonFiniteError(ArithmeticError):
    def __init__(self, locus: str):
        self.locus = locus
        super().__init__(f"non-finite value in {locus}")


def _guarded(evaluate, x):
    # plain floats raise on 1/0 or overflow instead of returning inf
    try:
        return evaluate(x)
    except (ZeroDivisionError, OverflowError) as exc:
        raise NonFiniteError(f"evaluation ({exc})") from exc


@dataclass(frozen=True)
class NlpProblem:
    """Generic smooth NLP.

    ``evaluate(x)`` returns ``(objective, equalities, inequalities)``; it must
    be written with plain arithmetic so that it accepts floats, :class:`Dual`
    and :class:`Jet` elements alike.
    """

    n: int
    evaluate: Evaluator
    lower: np.ndarray
    upper: np.ndarray
    x0: np.ndarray
    n_eq: int
    n_ineq: int
    eq_names: tuple[str, ...] = ()
    ineq_names: tuple[str, ...] = ()

    @classmethod
    def from_functions(cls, n: int, objective, equalities=None, inequalities=None,
                       lower=None, upper=None, x0=None) -> "NlpProblem":
        def evaluate(x):
            eq = list(equalities(x)) if equalities else []
            ineq = list(inequalities(x)) if inequalities else []
            return objective(x), eq, ineq

        lower = np.full(n, -np.inf) if lower is None else np.asarray(lower, float)
        upper = np.full(n, np.inf) if upper is None else np.asarray(upper, float)
        x0 = np.zeros(n) if x0 is None else np.asarray(x0, float)
        _, eq, ineq = evaluate([float(v) for v in np.clip(x0, lower, upper)])
        return cls(n, evaluate, lower, upper, x0, len(eq), len(ineq))

    def values(self, x) -> tuple[float, np.ndarray, np.ndarray]:
        f, eq, ineq = _guarded(self.evaluate, [float(v) for v in x])
        return float(f), np.asarray(eq, dtype=float), np.asarray(ineq, dtype=float)


@dataclass(frozen=True)
class SolverConfig:
    eq_tol: float = 1e-8
    kkt_tol: float = 1e-6
    max_outer: int = 50
    max_inner: int = 200
    penalty0: float = 10.0
    penalty_growth: float = 10.0
    penalty_max: float = 1e8

    def __post_init__(self):
        for name in ("eq_tol", "kkt_tol", "penalty0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.penalty_growth <= 1:
            raise ValueError("penalty_growth must exceed 1")


@dataclass
class SolverResult:
    status: str
    x: np.ndarray
    objective: float
    multipliers_eq: np.ndarray
    multipliers_ineq: np.ndarray
    slacks: np.ndarray
    eq_norm: float
    ineq_violation: float
    stationarity: float
    outer_iterations: int
    inner_iterations: int
    wall_time: float
    message: str = ""
    history: list[dict] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED


@dataclass(frozen=True)
class Derivatives:
    objective_gradient: np.ndarray
    eq_jacobian: np.ndarray
    ineq_jacobian: np.ndarray


@dataclass(frozen=True)
class KktResidual:
    stationarity: float
    equality: float
    inequality: float
    complementarity: float


def differentiate(problem: NlpProblem, x, directions=None) -> Derivatives:
    """Exact first derivatives by forward-mode dual numbers.

    ``directions`` (n x p) selects which tangent directions to push; the
    default identity yields full gradients and Jacobians.
    """
    x = np.asarray(x, dtype=float)
    p = problem.n if directions is None else np.atleast_2d(np.asarray(directions).T).shape[0]
    if directions is not None:
        directions = np.asarray(directions, dtype=float).reshape(problem.n, -1)
    f, eq, ineq = problem.evaluate(seed_duals(x, directions))
    grad = tangent(f, p)
    jeq = np.array([tangent(c, p) for c in eq]).reshape(len(eq), p)
    jin = np.array([tangent(c, p) for c in ineq]).reshape(len(ineq), p)
    return Derivatives(grad, jeq, jin)


def _project(z, lower, upper):
    return np.minimum(np.maximum(z, lower), upper)


def _projected_gradient(z, g, lower, upper):
    return z - _project(z - g, lower, upper)


def kkt_residual(problem: NlpProblem, result: SolverResult | None = None, *, x=None,
                 multipliers_eq=None, multipliers_ineq=None) -> KktResidual:
    """First-order optimality residuals of the original (slack-free) problem."""
    if result is not None:
        x, multipliers_eq, multipliers_ineq = (result.x, result.multipliers_eq,
                                               result.multipliers_ineq)
    x = np.asarray(x, dtype=float)
    lam = np.zeros(problem.n_eq) if multipliers_eq is None else np.asarray(multipliers_eq)
    nu = np.zeros(problem.n_ineq) if multipliers_ineq is None else np.asarray(multipliers_ineq)
    _, ceq, cin = problem.values(x)
    d = differentiate(problem, x)
    g = d.objective_gradient.copy()
    if problem.n_eq:
        g += d.eq_jacobian.T @ lam
    if problem.n_ineq:
        g += d.ineq_jacobian.T @ nu
    stat = _projected_gradient(x, g, problem.lower, problem.upper)
    return KktResidual(
        stationarity=float(np.max(np.abs(stat), initial=0.0)),
        equality=float(np.max(np.abs(ceq), initial=0.0)),
        inequality=float(np.max(cin, initial=0.0)) if cin.size else 0.0,
        complementarity=float(np.max(np.abs(nu * cin), initial=0.0)) if cin.size else 0.0,
    )


class _AugmentedLagrangian:
    """Value / derivatives of the augmented Lagrangian in z = (x, s)."""

    def __init__(self, problem: NlpProblem):
        self.p = problem
        self.n = problem.n
        self.m_eq = problem.n_eq
        self.m_in = problem.n_ineq

    def constraints(self, z):
        x, s = z[: self.n], z[self.n:]
        f, ceq, cin = _guarded(self.p.evaluate, [float(v) for v in x])
        f = float(f)
        c = np.concatenate([np.asarray(ceq, float), np.asarray(cin, float) + s])
        if not math.isfinite(f):
            raise NonFiniteError("objective")
        bad = np.flatnonzero(~np.isfinite(c))
        if bad.size:
            j = int(bad[0])
            raise NonFiniteError(f"equality {j}" if j < self.m_eq
                                 else f"inequality {j - self.m_eq}")
        return f, c

    def value(self, z, lam, mu):
        f, c = self.constraints(z)
        return f + lam @ c + 0.5 * mu * (c @ c)

    def second_order(self, z, lam, mu):
        n, m_eq, m_in = self.n, self.m_eq, self.m_in
        x, s = z[:n], z[n:]
        fj, ceq, cin = _guarded(self.p.evaluate, seed_jets(x))
        funcs = list(ceq) + list(cin)
        m = len(funcs)
        c = np.empty(m)
        jac = np.zeros((m, n))
        for j, cj in enumerate(funcs):
            if isinstance(cj, Jet):
                c[j], jac[j] = cj.v, cj.g
            else:
                c[j] = float(cj)
        c[m_eq:] += s
        w = lam + mu * c
        f = fj.v if isinstance(fj, Jet) else float(fj)
        if not math.isfinite(f) or not np.all(np.isfinite(c)):
            raise NonFiniteError("derivative evaluation")
        gx = (fj.g.copy() if isinstance(fj, Jet) else np.zeros(n)) + jac.T @ w
        hxx = fj.hessian(n).copy() if isinstance(fj, Jet) else np.zeros((n, n))
        for j, cj in enumerate(funcs):
            if isinstance(cj, Jet) and cj.h is not None and w[j] != 0.0:
                hxx += w[j] * cj.h
        hxx += mu * (jac.T @ jac)
        N = n + m_in
        H = np.empty((N, N))
        H[:n, :n] = hxx
        jin = jac[m_eq:]
        H[:n, n:] = mu * jin.T
        H[n:, :n] = mu * jin
        H[n:, n:] = mu * np.eye(m_in)
        g = np.concatenate([gx, w[m_eq:]])
        val = f + lam @ c + 0.5 * mu * (c @ c)
        return val, g, H, c


def _newton_direction(H, g, free, target):
    """Reduced Newton step on ``free``; the rest heads straight for ``target``."""
    d = target.copy()
    if free.any():
        Hf = H[np.ix_(free, free)]
        Hf = 0.5 * (Hf + Hf.T)
        w, V = np.linalg.eigh(Hf)
        scale = max(1.0, float(np.max(np.abs(w))))
        w = np.maximum(np.abs(w), max(1e-8, 1e-15 * scale))
        d[free] = -V @ ((V.T @ g[free]) / w)
    return d


def _minimize_bounded(al, z, lam, mu, lower, upper, tol, max_iter):
    """Projected Newton on the augmented Lagrangian; returns (z, iters, pg_norm, c)."""
    iters = 0
    val, g, H, c = al.second_order(z, lam, mu)
    pg = float(np.max(np.abs(_projected_gradient(z, g, lower, upper)), initial=0.0))
    while pg > tol and iters < max_iter:
        iters += 1
        eps = min(1e-3, math.sqrt(pg))
        at_low = (z - lower <= eps) & (g > 0)
        at_up = (upper - z <= eps) & (g < 0)
        free = ~(at_low | at_up)
        target = np.where(at_low, lower - z, np.where(at_up, upper - z, 0.0))
        moved = False
        for d in (_newton_direction(H, g, free, target), -g):
            alpha = 1.0
            for _ in range(60):
                z_new = _project(z + alpha * d, lower, upper)
                step = z_new - z
                decrease = float(g @ step)
                if decrease < 0:
                    new_val = al.value(z_new, lam, mu)
                    if new_val <= val + 1e-4 * decrease + _ROUNDOFF * abs(val):
                        z, moved = z_new, True
                        break
                alpha *= 0.5
            if moved:
                break
        if not moved:
            break
        val, g, H, c = al.second_order(z, lam, mu)
        pg = float(np.max(np.abs(_projected_gradient(z, g, lower, upper)), initial=0.0))
    return z, iters, pg, c


def solve(problem: NlpProblem, config: SolverConfig | None = None, x0=None) -> SolverResult:
    """Solve ``problem``; the result's residual norms are certified on exit."""
    cfg = config or SolverConfig()
    t0 = time.perf_counter()
    n, m_eq, m_in = problem.n, problem.n_eq, problem.n_ineq
    lower = np.concatenate([problem.lower, np.zeros(m_in)])
    upper = np.concatenate([problem.upper, np.full(m_in, np.inf)])
    x = _project(np.asarray(problem.x0 if x0 is None else x0, dtype=float),
                 problem.lower, problem.upper)
    al = _AugmentedLagrangian(problem)
    lam = np.zeros(m_eq + m_in)
    mu = cfg.penalty0
    history: list[dict] = []
    total_inner = 0
    outer = 0
    status, message = ITERATION_LIMIT, "outer iteration limit reached"

    def finish(status, z, lam, pg, message=""):
        xs = z[:n]
        try:
            f, ceq, cin = problem.values(xs)
        except Exception:  # pragma: no cover - evaluation already failed once
            f, ceq, cin = math.nan, np.full(m_eq, np.nan), np.full(m_in, np.nan)
        return SolverResult(
            status=status, x=xs, objective=f,
            multipliers_eq=lam[:m_eq].copy(), multipliers_ineq=lam[m_eq:].copy(),
            slacks=z[n:].copy(),
            eq_norm=float(np.max(np.abs(ceq), initial=0.0)),
            ineq_violation=float(np.max(cin, initial=0.0)) if m_in else 0.0,
            stationarity=pg, outer_iterations=outer, inner_iterations=total_inner,
            wall_time=time.perf_counter() - t0, message=message, history=history)

    try:
        _, cin0 = problem.values(x)[::2]
        z = np.concatenate([x, np.maximum(0.0, -cin0)])
        _, c = al.constraints(z)
    except NonFiniteError as exc:
        return finish(INFEASIBLE, np.concatenate([x, np.zeros(m_in)]), lam, math.inf,
                      f"non-finite value at the initial point ({exc.locus})")

    # reference violation for the first multiplier update
    accepted_viol = max(float(np.max(np.abs(c), initial=0.0)), 1.0)
    stalls = 0
    pg = math.inf
    inner_tol = 0.5 * cfg.kkt_tol
    try:
        for outer in range(1, cfg.max_outer + 1):
            z, its, pg, c = _minimize_bounded(al, z, lam, mu, lower, upper, inner_tol,
                                              cfg.max_inner)
            total_inner += its
            viol = float(np.max(np.abs(c), initial=0.0))
            accept = viol <= max(cfg.eq_tol, 0.25 * accepted_viol)
            history.append({"outer": outer, "penalty": mu, "violation": viol,
                            "stationarity": pg, "inner": its, "accepted": accept})
            if accept:
                lam = lam + mu * c
                accepted_viol = viol
                stalls = 0
                if viol <= cfg.eq_tol and pg <= cfg.kkt_tol:
                    status, message = CONVERGED, "KKT conditions satisfied"
                    break
                if viol <= cfg.eq_tol and its == 0 and mu >= cfg.penalty_max:
                    status, message = ITERATION_LIMIT, "stationarity stalled"
                    break
            else:
                if mu >= cfg.penalty_max:
                    stalls += 1
                    if stalls >= 3:
                        status = INFEASIBLE
                        message = f"constraint violation stalled at {viol:.3e}"
                        break
                mu = min(mu * cfg.penalty_growth, cfg.penalty_max)
    except NonFiniteError as exc:
        return finish(INFEASIBLE, z, lam, pg, f"non-finite value in {exc.locus}")
    return finish(status, z, lam, pg, message)
