import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resplan.kronop import (KronOperator, marginal_operator, measurement_operator,
                            residual_operator)
from resplan.mechanism import measure_all
from resplan.oracle import (OracleSizeError, block_diag, dense_blue, dense_pcost, dense_sigma, densify,
                            eig_pinv)
from resplan.planner import build_cost_model, privacy_cost, solve_sum_of_variances
from resplan.schema import Schema, subsets

from dense_cases import dense_system, random_instance, true_vector
from test_kronop import factors


def test_marginal_on_two_of_three():
    s = Schema.from_sizes([2, 2, 3])
    M = densify(marginal_operator(s, (0, 1)))
    want = np.kron(np.eye(4), np.ones((1, 3)))
    assert M.shape == (4, 12) and np.array_equal(M, want)


def test_sum_query():
    s = Schema.from_sizes([2, 2, 3])
    assert np.array_equal(densify(residual_operator(s, ())), np.ones((1, 12)))


def test_size_guard():
    s = Schema.from_sizes([100, 100])
    with pytest.raises(OracleSizeError):
        densify(marginal_operator(s, (0,)))


@given(st.lists(factors(), min_size=1, max_size=2), st.lists(factors(), min_size=1, max_size=2))
@settings(max_examples=40)
def test_kron_composition(a, b):
    assert np.allclose(densify(KronOperator(tuple(a + b))),
                       np.kron(densify(KronOperator(tuple(a))), densify(KronOperator(tuple(b)))))


def test_pcost_single_residual():
    s = Schema.from_sizes([3])
    R = densify(residual_operator(s, (0,)))
    assert dense_pcost([(R, dense_sigma(s, (0,)))]) == pytest.approx(2 / 3)


def test_pcost_identity():
    assert dense_pcost([(np.eye(5), np.eye(5))]) == pytest.approx(1.0)


def test_pcost_singular():
    with pytest.raises(ValueError):
        dense_pcost([(np.ones((2, 3)), np.ones((2, 2)))])


def test_pcost_toy_plan(toy_schema, toy_workload):
    m = build_cost_model(toy_schema, toy_workload)
    plan = solve_sum_of_variances(m, 1.0)
    mechs = [(densify(residual_operator(toy_schema, A)), plan.sigma2[A] * dense_sigma(toy_schema, A))
             for A in m.members]
    assert dense_pcost(mechs) == pytest.approx(privacy_cost(m, plan.sigma2), abs=1e-10)


@pytest.mark.parametrize("m", [2, 3, 7, 64])
def test_sigma_is_h_ht(m):
    s = Schema.from_sizes([m])
    H = densify(measurement_operator(s, (0,)))
    assert np.array_equal(dense_sigma(s, (0,)), H @ H.T)
    assert np.array_equal(H @ H.T, np.eye(m - 1) + np.ones((m - 1, m - 1)))


def test_blue_zero_noise_exact():
    rng = np.random.default_rng(0)
    schema, workload, plan, ds = random_instance(rng, n_records=15)
    res = measure_all(ds, plan, zero_noise=True)
    B, Sigma, y = dense_system(schema, plan, res)
    for A in workload.marginals:
        W = densify(marginal_operator(schema, A))
        est, _ = dense_blue(W, B, Sigma, y)
        assert np.allclose(est, W @ true_vector(ds))


def test_blue_shapes():
    with pytest.raises(ValueError):
        dense_blue(np.eye(3), np.eye(2), np.eye(2), np.ones(2))


def test_blue_diag_matches_closed_form(toy_schema, toy_workload):
    m = build_cost_model(toy_schema, toy_workload)
    plan = solve_sum_of_variances(m, 1.0)
    B = np.vstack([densify(residual_operator(toy_schema, A)) for A in m.members])
    Sigma = block_diag([plan.sigma2[A] * dense_sigma(toy_schema, A) for A in m.members])
    for A in toy_workload.marginals:
        _, cov = dense_blue(densify(marginal_operator(toy_schema, A)), B, Sigma, np.zeros(len(B)))
        want = sum(float(m.varcoef[A, C]) * plan.sigma2[C] for C in subsets(A))
        assert np.allclose(np.diag(cov), want)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_rank_and_row_space(seed):
    rng = np.random.default_rng(seed)
    schema, workload, _, _ = random_instance(rng)
    for A in workload.marginals:
        stacked = np.vstack([densify(residual_operator(schema, C)) for C in subsets(A)])
        assert np.linalg.matrix_rank(stacked) == schema.cell_count(A)
        M = densify(marginal_operator(schema, A))
        coef, *_ = np.linalg.lstsq(stacked.T, M.T, rcond=None)
        assert np.max(np.abs(stacked.T @ coef - M.T)) <= 1e-9


def test_eig_pinv():
    A = np.diag([4.0, 1.0, 0.0])
    assert np.allclose(eig_pinv(A), np.diag([0.25, 1.0, 0.0]))
