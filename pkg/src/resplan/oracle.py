"""Dense reference implementations for testing small instances.

Everything here materializes full matrices and is only meant for schemas
whose universe is a few thousand cells.  The fast code paths never import
this module.
"""
from __future__ import annotations

from functools import reduce

import numpy as np

from .kronop import Factor, KronOperator, Kind, measurement_operator
from .schema import AttrSet, Schema

MAX_DIM = 4096


class OracleSizeError(ValueError):
    """The requested dense matrix exceeds the oracle's size guard."""


def dense_factor(f: Factor) -> np.ndarray:
    m = f.m
    if f.kind is Kind.ONES_ROW:
        return np.ones((1, m))
    if f.kind is Kind.IDENTITY:
        return np.eye(m)
    if f.kind is Kind.SUBTRACTION:
        S = np.zeros((m - 1, m))
        S[:, 0] = 1.0
        S[np.arange(m - 1), np.arange(1, m)] = -1.0
        return S
    if f.kind is Kind.SUBTRACTION_PINV:
        # computed independently of the closed form used by the fast path
        return np.linalg.pinv(dense_factor(Factor(Kind.SUBTRACTION, m)))
    if f.kind is Kind.SCALED_ONES_COL:
        return np.full((m, 1), 1.0 / m)
    if f.kind is Kind.SCALAR:
        return np.ones((1, 1))
    raise AssertionError(f.kind)


def densify(op: KronOperator) -> np.ndarray:
    rows, cols = op.shape
    if rows > MAX_DIM or cols > MAX_DIM:
        raise OracleSizeError(f"operator of shape {(rows, cols)} exceeds the dense limit {MAX_DIM}")
    return reduce(np.kron, (dense_factor(f) for f in op.factors), np.ones((1, 1)))


def dense_sigma(schema: Schema, A: AttrSet) -> np.ndarray:
    """Noise covariance H H^T of the base mechanism on ``A`` at unit scale."""
    H = densify(measurement_operator(schema, A))
    return H @ H.T


def dense_pcost(mechanisms) -> float:
    """Largest diagonal entry of sum_i B_i^T Sigma_i^{-1} B_i."""
    total = None
    for B, Sigma in mechanisms:
        B = np.atleast_2d(np.asarray(B, dtype=float))
        Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
        try:
            term = B.T @ np.linalg.solve(Sigma, B)
        except np.linalg.LinAlgError:
            raise ValueError("noise covariance is singular") from None
        total = term if total is None else total + term
    if total is None:
        return 0.0
    return float(np.max(np.diag(total)))


def block_diag(blocks) -> np.ndarray:
    blocks = [np.atleast_2d(b) for b in blocks]
    n = sum(b.shape[0] for b in blocks)
    out = np.zeros((n, n))
    k = 0
    for b in blocks:
        out[k:k + b.shape[0], k:k + b.shape[0]] = b
        k += b.shape[0]
    return out


def eig_pinv(M: np.ndarray, rcond: float = 1e-10) -> np.ndarray:
    """Pseudo-inverse of a symmetric PSD matrix by eigen-decomposition."""
    w, V = np.linalg.eigh((M + M.T) / 2)
    keep = w > rcond * max(w.max(), 0.0)
    return (V[:, keep] / w[keep]) @ V[:, keep].T


def dense_blue(W, B, Sigma, y):
    """Best linear unbiased estimate of ``W x`` and its covariance."""
    W, B, Sigma = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (W, B, Sigma))
    y = np.asarray(y, dtype=float)
    if W.shape[1] != B.shape[1] or B.shape[0] != Sigma.shape[0] or Sigma.shape[0] != Sigma.shape[1] \
            or y.shape[0] != B.shape[0]:
        raise ValueError("inconsistent shapes for W, B, Sigma, y")
    Si = np.linalg.inv(Sigma)
    P = eig_pinv(B.T @ Si @ B)
    estimate = W @ P @ B.T @ Si @ y
    covariance = W @ P @ W.T
    return estimate, covariance


def dense_data_vector(schema: Schema, records) -> np.ndarray:
    d = schema.domain_size
    if d > MAX_DIM:
        raise OracleSizeError(f"universe of size {d} exceeds the dense limit {MAX_DIM}")
    x = np.zeros(d)
    for r in np.asarray(records).reshape(-1, len(schema)):
        x[np.ravel_multi_index(tuple(r), schema.sizes)] += 1
    return x
