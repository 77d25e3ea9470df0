"""Noise-scale selection.

Privacy cost and reconstructed cell variances are both linear in the
per-residual noise scales (in 1/sigma^2 and sigma^2 respectively).  The
coefficients are kept as exact rationals and only converted to floats at
the solver boundary.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .schema import AttrSet, Schema, Workload, closure, subsets

log = logging.getLogger(__name__)

SUMVAR = "sumvar"
MAXVAR = "maxvar"


class SolverError(RuntimeError):
    """The max-variance solver did not converge."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


def _level_products(schema: Schema, members: list[AttrSet], fn) -> dict[AttrSet, Fraction]:
    # members sorted by size, downward closed: every B[:-1] is already present
    out = {(): Fraction(1)}
    for B in members:
        if B:
            out[B] = out[B[:-1]] * fn(schema.sizes[B[-1]])
    return out


def _pcost_factor(m):
    return Fraction(m - 1, m)


def _spread_factor(m):
    return Fraction(1, m * m)


def _cov_factor(m):
    return Fraction(-1, m)


def variance_coefficients(schema: Schema, A: AttrSet) -> dict[AttrSet, Fraction]:
    """Coefficient of sigma^2_{A'} in the variance of every cell of marginal A."""
    members = subsets(A)
    p = _level_products(schema, members, _pcost_factor)
    q = _level_products(schema, members, _spread_factor)
    return {B: p[B] * q[_minus(A, B)] for B in members}


def covariance_coefficients(schema: Schema, A: AttrSet) -> dict[AttrSet, Fraction]:
    """Coefficient of sigma^2_{A'} in the covariance of two cells of marginal A
    that differ on every attribute of A."""
    members = subsets(A)
    r = _level_products(schema, members, _cov_factor)
    q = _level_products(schema, members, _spread_factor)
    return {B: r[B] * q[_minus(A, B)] for B in members}


def _minus(A: AttrSet, B: AttrSet) -> AttrSet:
    drop = set(B)
    return tuple(i for i in A if i not in drop)


@dataclass(frozen=True)
class CostModel:
    schema: Schema
    workload: Workload
    members: tuple[AttrSet, ...]
    pcoef: dict[AttrSet, Fraction] = field(repr=False)
    varcoef: dict[tuple[AttrSet, AttrSet], Fraction] = field(repr=False)
    covcoef: dict[tuple[AttrSet, AttrSet], Fraction] = field(repr=False)

    def sumvar_coefficients(self, weights=None) -> dict[AttrSet, Fraction]:
        """Coefficient of each sigma^2 in the weighted sum of all workload cell variances."""
        weights = self.workload.weights if weights is None else list(weights)
        v = {B: Fraction(0) for B in self.members}
        for (A, _), w in zip(self.workload, weights):
            n = self.schema.cell_count(A)
            w = Fraction(w)
            for B in subsets(A):
                v[B] += w * n * self.varcoef[A, B]
        return v


def build_cost_model(schema: Schema, workload: Workload) -> CostModel:
    workload.validate(schema)
    members = closure(workload)
    p = _level_products(schema, members, _pcost_factor) if members else {}
    q = _level_products(schema, members, _spread_factor) if members else {}
    r = _level_products(schema, members, _cov_factor) if members else {}
    varcoef, covcoef = {}, {}
    for A in workload.marginals:
        for B in subsets(A):
            rest = q[_minus(A, B)]
            varcoef[A, B] = p[B] * rest
            covcoef[A, B] = r[B] * rest
    return CostModel(schema, workload, tuple(members), {B: p[B] for B in members}, varcoef, covcoef)


@dataclass(frozen=True)
class LossSpec:
    kind: str = SUMVAR
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in (SUMVAR, MAXVAR):
            raise ValueError(f"unknown loss {self.kind!r}")
        if self.weights is not None and any(not w > 0 for w in self.weights):
            raise ValueError("loss weights must be positive")


@dataclass(frozen=True)
class Plan:
    sigma2: dict[AttrSet, float]
    total_pcost: float
    predicted_loss: float
    objective: str = SUMVAR
    diagnostics: dict = field(default_factory=dict, compare=False, repr=False)


def privacy_cost(model: CostModel, sigma2: dict[AttrSet, float]) -> float:
    return math.fsum(float(model.pcoef[B]) / sigma2[B] for B in model.members)


def marginal_variances(model: CostModel, plan: Plan) -> dict[AttrSet, float]:
    """Per-cell variance of each workload marginal under ``plan``."""
    out = {}
    for A in model.workload.marginals:
        out[A] = math.fsum(float(model.varcoef[A, B]) * plan.sigma2[B] for B in subsets(A))
    return out


def max_variance(model: CostModel, plan: Plan, weights=None) -> float:
    """Largest (weighted) cell variance over the workload."""
    weights = model.workload.weights if weights is None else list(weights)
    var = marginal_variances(model, plan)
    return max((var[A] / w for A, w in zip(model.workload.marginals, weights)), default=0.0)


def sum_of_variances(model: CostModel, plan: Plan, weights=None) -> float:
    weights = model.workload.weights if weights is None else list(weights)
    var = marginal_variances(model, plan)
    return math.fsum(w * model.schema.cell_count(A) * var[A]
                     for A, w in zip(model.workload.marginals, weights))


def rmse(model: CostModel, plan: Plan, workload: Workload | None = None) -> float:
    """Root mean squared error over all cells of the workload marginals."""
    workload = model.workload if workload is None else workload
    var = marginal_variances(model, plan)
    cells = [model.schema.cell_count(A) for A in workload.marginals]
    total = math.fsum(n * var[A] for n, A in zip(cells, workload.marginals))
    return math.sqrt(total / sum(cells)) if cells else 0.0


def _sumvar_terms(model, weights):
    v = model.sumvar_coefficients(weights)
    for B, vB in v.items():
        if vB <= 0:
            raise AssertionError(f"closure member {B} has zero variance weight")
    roots = {B: math.sqrt(float(v[B] * model.pcoef[B])) for B in model.members}
    return v, roots


def solve_sum_of_variances(model: CostModel, budget: float = 1.0, weights=None) -> Plan:
    """Closed-form minimizer of the weighted sum of variances at privacy cost ``budget``."""
    if not budget > 0:
        raise ValueError("privacy budget must be positive")
    if not model.members:
        return Plan({}, 0.0, 0.0, SUMVAR)
    v, roots = _sumvar_terms(model, weights)
    T = math.fsum(roots.values()) ** 2 / budget
    sigma2 = {B: math.sqrt(T * float(model.pcoef[B]) / (budget * float(v[B]))) for B in model.members}
    return Plan(sigma2, privacy_cost(model, sigma2), T, SUMVAR)


def solve_utility_constrained(model: CostModel, loss: LossSpec, bound: float, tol: float = 1e-8,
                              max_iter: int = 500) -> Plan:
    """Cheapest plan whose loss is at most ``bound``."""
    if not bound > 0:
        raise ValueError("loss bound must be positive")
    if not model.members:
        return Plan({}, 0.0, 0.0, loss.kind)
    if loss.kind == SUMVAR:
        _, roots = _sumvar_terms(model, loss.weights)
        budget = math.fsum(roots.values()) ** 2 / bound
        return solve_sum_of_variances(model, budget, loss.weights)
    unit, info = _unit_max_variance(model, loss.weights, tol, max_iter)
    sigma2 = {B: s * bound for B, s in unit.items()}
    plan = Plan(sigma2, privacy_cost(model, sigma2), bound, MAXVAR, info)
    return plan


def solve_max_variance(model: CostModel, budget: float = 1.0, weights=None, tol: float = 1e-8,
                       max_iter: int = 500) -> Plan:
    """Minimize the largest weighted cell variance at privacy cost ``budget``.

    Solved in the equivalent form "minimize privacy cost subject to every
    weighted variance <= 1" and rescaled; the two problems share optimizers
    up to a positive scale because both sides are homogeneous.
    """
    if not budget > 0:
        raise ValueError("privacy budget must be positive")
    if not model.members:
        return Plan({}, 0.0, 0.0, MAXVAR)
    unit, info = _unit_max_variance(model, weights, tol, max_iter)
    scale = info["pcost"] / budget
    sigma2 = {B: s * scale for B, s in unit.items()}
    plan = Plan(sigma2, privacy_cost(model, sigma2), scale, MAXVAR, info)
    return plan


def _unit_max_variance(model, weights, tol, max_iter):
    weights = model.workload.weights if weights is None else list(weights)
    index = {B: j for j, B in enumerate(model.members)}
    rows, cols, vals = [], [], []
    for i, (A, w) in enumerate(zip(model.workload.marginals, weights)):
        for B in subsets(A):
            rows.append(i)
            cols.append(index[B])
            vals.append(float(model.varcoef[A, B]) / w)
    G = scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(len(weights), len(index)))
    p = np.array([float(model.pcoef[B]) for B in model.members])
    u, info = minimize_inverse_cost(p, G, tol=tol, max_iter=max_iter)
    return {B: float(u[j]) for B, j in index.items()}, info


def minimize_inverse_cost(p, G, tol=1e-8, max_iter=200):
    """Primal-dual interior point for ``min sum(p/u)  s.t.  G u <= 1``.

    ``p`` is positive and ``G`` a non-negative (sparse) matrix with no empty
    rows or columns.  Mehrotra predictor-corrector steps on the perturbed KKT
    system; returns ``(u, info)`` where ``info`` holds the multipliers, the
    complementarity gap and the relative stationarity residual.
    """
    G = scipy.sparse.csr_matrix(G)
    m, n = G.shape
    p = np.asarray(p, dtype=float)
    # work in x = u / u0, with u0 the optimum for the aggregated constraint
    g = np.asarray(G.sum(axis=0)).ravel()
    u0 = np.sqrt(p / g) / np.sum(np.sqrt(p * g))
    Gs = (G @ scipy.sparse.diags(u0)).tocsr()
    GsT = Gs.T.tocsr()
    ps = p / u0
    dense = m <= 6000

    x = np.full(n, 0.9)
    s = 1.0 - Gs @ x
    lam = np.full(m, ps.sum() / m)
    for it in range(max_iter):
        grad = -ps / x**2
        r_d = grad + GsT @ lam
        r_p = Gs @ x + s - 1.0
        mu = s @ lam / m
        fval = ps @ (1.0 / x)
        stationarity = np.max(np.abs(r_d)) / np.max(np.abs(grad))
        if stationarity <= tol and np.max(np.abs(r_p)) <= tol and m * mu <= tol * fval:
            break

        # eliminate the primal step: the objective Hessian is diagonal and G
        # has full row rank, so the dual system stays well conditioned
        hinv = x**3 / (2.0 * ps)
        M = Gs @ scipy.sparse.diags(hinv) @ GsT + scipy.sparse.diags(s / lam)
        scale = 1.0 / np.sqrt(M.diagonal())
        M = scipy.sparse.diags(scale) @ M @ scipy.sparse.diags(scale)
        try:
            if dense:
                factor = scipy.linalg.cho_factor(M.toarray())
                solve = lambda b: scale * scipy.linalg.cho_solve(factor, scale * b)
            else:
                lu = scipy.sparse.linalg.splu(M.tocsc())
                solve = lambda b: scale * lu.solve(scale * b)
        except (np.linalg.LinAlgError, RuntimeError):
            raise SolverError("singular Newton system", {
                "iteration": it, "objective": float(fval), "gap": float(m * mu),
                "kkt_residual": float(stationarity)}) from None

        def direction(r_c):
            dl = solve(r_p - r_c / lam - Gs @ (hinv * r_d))
            dx = hinv * (-r_d - GsT @ dl)
            ds = (-r_c - s * dl) / lam
            return dx, ds, dl

        # predictor
        dx, ds, dl = direction(s * lam)
        a_aff = _max_step((x, dx), (s, ds), (lam, dl))
        mu_aff = (s + a_aff * ds) @ (lam + a_aff * dl) / m
        sigma = (mu_aff / mu) ** 3
        # corrector
        dx, ds, dl = direction(s * lam + ds * dl - sigma * mu)
        a = min(1.0, 0.99 * _max_step((x, dx), (s, ds), (lam, dl)))
        # the quadratic model of 1/x is only trustworthy for moderate relative moves
        grow = dx > x
        if grow.any():
            a = min(a, np.min(x[grow] / dx[grow]))
        shrink = dx < -0.5 * x
        if shrink.any():
            a = min(a, np.min(-0.5 * x[shrink] / dx[shrink]))
        x, s, lam = x + a * dx, s + a * ds, lam + a * dl
    else:
        raise SolverError("max-variance solver hit the iteration cap",
                          {"iterations": max_iter, "objective": float(fval), "gap": float(m * mu),
                           "kkt_residual": float(stationarity)})

    u = x * u0
    # land exactly on the feasible boundary
    u /= np.max(G @ u)
    info = {
        "pcost": float(np.sum(p / u)),
        "gap": float(m * mu),
        "kkt_residual": float(stationarity),
        "iterations": it,
        "dual": lam,
    }
    log.debug("interior point: %d iterations, gap %.3g, residual %.3g", it, m * mu, stationarity)
    return u, info


def _max_step(*pairs):
    step = np.inf
    for v, dv in pairs:
        neg = dv < 0
        if neg.any():
            step = min(step, np.min(-v[neg] / dv[neg]))
    return min(step, 1.0)
