"""scikit-learn style front end: configure, ``fit`` on records, read marginals."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .accounting import PrivacyAccount
from .mechanism import NoiseSource, measure_all
from .planner import (MAXVAR, SUMVAR, LossSpec, build_cost_model, solve_max_variance,
                      solve_sum_of_variances, solve_utility_constrained)
from .reconstruct import MarginalEstimate, reconstruct
from .schema import Dataset, Schema, Workload


class ResidualPlanner(BaseEstimator):
    """Differentially private release of a marginal workload.

    Parameters
    ----------
    schema : Schema
    workload : Workload
    objective : {"sumvar", "maxvar"}
        Weighted sum of cell variances or maximum weighted cell variance.
    pcost : float or None
        Privacy budget.  Ignored when ``loss_bound`` is set.
    loss_bound : float or None
        If given, spend the least budget that keeps the loss below this bound.
    random_state : int or None
        Master seed for the noise.  ``None`` draws a fresh one, stored in ``seed_``.
    workers : int
        Threads used for measurement.

    After ``fit``: ``plan_``, ``account_``, ``residuals_`` (dict keyed by
    attribute set), ``estimates_`` (one per workload marginal) and ``seed_``.
    """

    def __init__(self, schema: Schema, workload: Workload, objective: str = SUMVAR,
                 pcost: float | None = 1.0, loss_bound: float | None = None,
                 random_state: int | None = None, workers: int = 1):
        self.schema = schema
        self.workload = workload
        self.objective = objective
        self.pcost = pcost
        self.loss_bound = loss_bound
        self.random_state = random_state
        self.workers = workers

    def plan(self):
        """Select noise scales; needs no data."""
        if self.objective not in (SUMVAR, MAXVAR):
            raise ValueError(f"objective must be {SUMVAR!r} or {MAXVAR!r}, got {self.objective!r}")
        model = build_cost_model(self.schema, self.workload)
        if self.loss_bound is not None:
            return model, solve_utility_constrained(model, LossSpec(self.objective), self.loss_bound)
        if self.pcost is None:
            raise ValueError("either pcost or loss_bound is required")
        solve = solve_sum_of_variances if self.objective == SUMVAR else solve_max_variance
        return model, solve(model, self.pcost)

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.int64, ensure_min_samples=0)
        if X.shape[1] != len(self.schema):
            raise ValueError(f"X has {X.shape[1]} columns, schema has {len(self.schema)} attributes")
        dataset = Dataset(self.schema, X)
        self.model_, self.plan_ = self.plan()
        self.account_ = PrivacyAccount(self.plan_.total_pcost)
        noise = NoiseSource(self.random_state)
        self.seed_ = noise.seed
        self.residuals_ = {r.attrset: r for r in measure_all(dataset, self.plan_, noise, workers=self.workers)}
        self.estimates_ = [reconstruct(self.schema, A, self.residuals_) for A in self.workload.marginals]
        return self

    def marginal(self, attrs) -> MarginalEstimate:
        """Estimate any marginal in the workload's downward closure."""
        check_is_fitted(self, "residuals_")
        return reconstruct(self.schema, self.schema.attrset(attrs), self.residuals_)
