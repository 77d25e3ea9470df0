"""Differentially private marginal release with optimal residual noise planning."""
from .accounting import PrivacyAccount, approx_dp_delta, calibrate_budget, guarantees
from .estimator import ResidualPlanner
from .kronop import (KronOperator, kron_apply, marginal_operator, measurement_operator,
                     reconstruction_operator, residual_operator)
from .mechanism import NoiseSource, NoisyResidual, measure, measure_all
from .planner import (MAXVAR, SUMVAR, CostModel, LossSpec, Plan, SolverError, build_cost_model,
                      max_variance, rmse, solve_max_variance, solve_sum_of_variances,
                      solve_utility_constrained, sum_of_variances)
from .reconstruct import MarginalEstimate, MissingResidualError, reconstruct, reconstruct_all
from .schema import (Attribute, DataError, Dataset, Schema, SchemaError, Workload, closure, kway,
                     marginal_counts, upto_kway)

__version__ = "0.1.0"

__all__ = [
    "Attribute", "CostModel", "DataError", "Dataset", "KronOperator", "LossSpec", "MAXVAR",
    "MarginalEstimate", "MissingResidualError", "NoiseSource", "NoisyResidual", "Plan",
    "PrivacyAccount", "ResidualPlanner", "SUMVAR", "Schema", "SchemaError", "SolverError", "Workload",
    "approx_dp_delta", "build_cost_model", "calibrate_budget", "closure", "guarantees",
    "kron_apply", "kway", "marginal_counts", "marginal_operator", "max_variance", "measure",
    "measure_all", "measurement_operator", "reconstruct", "reconstruct_all",
    "reconstruction_operator", "residual_operator", "rmse", "solve_max_variance",
    "solve_sum_of_variances", "solve_utility_constrained", "sum_of_variances", "upto_kway",
]
