"""Implicit Kronecker-product operators built from a handful of structured factors.

Every operator holds one factor per schema attribute.  A factor is only a
``(kind, m)`` pair; its action on one tensor axis is implemented directly
(sums, differences, broadcasts) so no operator, not even a factor, is ever
stored densely.  Dense expansion lives in :mod:`resplan.oracle`.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .schema import AttrSet, Schema, SchemaError


class Kind(enum.Enum):
    ONES_ROW = "ones_row"            # 1 x m, all ones
    IDENTITY = "identity"            # m x m
    SUBTRACTION = "subtraction"      # (m-1) x m
    SUBTRACTION_PINV = "subtraction_pinv"  # m x (m-1), right inverse of SUBTRACTION
    SCALED_ONES_COL = "scaled_ones_col"    # m x 1, entries 1/m
    SCALAR = "scalar"                # 1 x 1, [1]


@dataclass(frozen=True)
class Factor:
    kind: Kind
    m: int = 1

    @property
    def shape(self) -> tuple[int, int]:
        m = self.m
        return {
            Kind.ONES_ROW: (1, m),
            Kind.IDENTITY: (m, m),
            Kind.SUBTRACTION: (m - 1, m),
            Kind.SUBTRACTION_PINV: (m, m - 1),
            Kind.SCALED_ONES_COL: (m, 1),
            Kind.SCALAR: (1, 1),
        }[self.kind]

    def apply(self, x: np.ndarray, axis: int) -> np.ndarray:
        """Multiply this factor into ``x`` along ``axis``."""
        kind = self.kind
        if kind is Kind.IDENTITY or kind is Kind.SCALAR:
            return x
        if kind is Kind.ONES_ROW:
            return x.sum(axis=axis, keepdims=True)
        if kind is Kind.SUBTRACTION:
            # row j: x[0] - x[j+1]; two nonzeros per row
            first = np.take(x, [0], axis=axis)
            rest = np.take(x, np.arange(1, self.m), axis=axis)
            return first - rest
        if kind is Kind.SUBTRACTION_PINV:
            # (1/m) [1^T ; 11^T - m I] applied to y
            total = x.sum(axis=axis, keepdims=True)
            return np.concatenate([total, total - self.m * x], axis=axis) / self.m
        if kind is Kind.SCALED_ONES_COL:
            reps = [1] * x.ndim
            reps[axis] = self.m
            return np.tile(x, reps) / self.m
        raise AssertionError(kind)


def ones_row(m): return Factor(Kind.ONES_ROW, m)
def identity(m): return Factor(Kind.IDENTITY, m)
def subtraction(m): return Factor(Kind.SUBTRACTION, m)
def subtraction_pinv(m): return Factor(Kind.SUBTRACTION_PINV, m)
def scaled_ones_col(m): return Factor(Kind.SCALED_ONES_COL, m)
def scalar(): return Factor(Kind.SCALAR, 1)


@dataclass(frozen=True)
class KronOperator:
    factors: tuple[Factor, ...]

    @property
    def shape(self) -> tuple[int, int]:
        return (math.prod(f.shape[0] for f in self.factors),
                math.prod(f.shape[1] for f in self.factors))

    def __matmul__(self, v):
        return kron_apply(self, v)


def kron_apply(op: KronOperator, v) -> np.ndarray:
    """Compute ``op @ v`` by sweeping each factor over its tensor axis.

    ``v`` may be a vector of length ``cols`` or a ``(cols, batch)`` matrix.
    """
    v = np.asarray(v, dtype=float)
    rows, cols = op.shape
    if v.shape[0] != cols or v.ndim not in (1, 2):
        raise ValueError(f"dimension mismatch: operator has {cols} columns, got array of shape {v.shape}")
    batch = v.shape[1:]
    x = v.reshape(tuple(f.shape[1] for f in op.factors) + batch)
    for axis, f in enumerate(op.factors):
        x = f.apply(x, axis)
    return x.reshape((rows,) + batch)


def residual_operator(schema: Schema, A: AttrSet) -> KronOperator:
    """R_A: subtraction factors on A, all-ones rows elsewhere."""
    schema.check(A)
    members = set(A)
    return KronOperator(tuple(
        subtraction(m) if i in members else ones_row(m) for i, m in enumerate(schema.sizes)))


def marginal_operator(schema: Schema, A: AttrSet) -> KronOperator:
    """M_A: identity factors on A, all-ones rows elsewhere."""
    schema.check(A)
    members = set(A)
    return KronOperator(tuple(
        identity(m) if i in members else ones_row(m) for i, m in enumerate(schema.sizes)))


def measurement_operator(schema: Schema, A: AttrSet) -> KronOperator:
    """H: maps marginal cells of A to residual rows of A (H M_A = R_A)."""
    schema.check(A)
    members = set(A)
    return KronOperator(tuple(
        subtraction(m) if i in members else scalar() for i, m in enumerate(schema.sizes)))


def reconstruction_operator(schema: Schema, target: AttrSet, source: AttrSet) -> KronOperator:
    """U_{target<-source} = M_target R_source^+, mapping residual rows of
    ``source`` to marginal cells of ``target``."""
    schema.check(target)
    schema.check(source)
    if not set(source) <= set(target):
        raise SchemaError(f"source {source} is not a subset of target {target}")
    src, tgt = set(source), set(target)
    factors = []
    for i, m in enumerate(schema.sizes):
        if i in src:
            factors.append(subtraction_pinv(m))
        elif i in tgt:
            factors.append(scaled_ones_col(m))
        else:
            factors.append(scalar())
    return KronOperator(tuple(factors))
