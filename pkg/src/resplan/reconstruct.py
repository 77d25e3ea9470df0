"""Unbiased marginal estimates from noisy residuals, with exact error moments."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .kronop import kron_apply, reconstruction_operator
from .mechanism import NoisyResidual
from .schema import AttrSet, Schema, SchemaError, Workload, subsets


class MissingResidualError(SchemaError):
    """A marginal was requested whose sub-marginal residuals were not measured."""


@dataclass(frozen=True)
class MarginalEstimate:
    """Estimated counts for one marginal.

    ``cell_variance`` is shared by every cell.  ``pairwise_covariance`` is the
    covariance of two cells that differ in every attribute; cells that agree
    on some attributes have a different covariance, available from
    :meth:`covariance`.
    """

    attrset: AttrSet
    values: np.ndarray = field(repr=False)
    cell_variance: float
    pairwise_covariance: float
    shape: tuple[int, ...] = ()
    sigma2: dict = field(default_factory=dict, repr=False, compare=False)

    def covariance(self, i: int, j: int) -> float:
        """Covariance between flattened cells ``i`` and ``j``."""
        if not self.shape:
            return self.cell_variance
        ci = np.unravel_index(i, self.shape)
        cj = np.unravel_index(j, self.shape)
        same = tuple(bool(a == b) for a, b in zip(ci, cj))
        return _moment(self.attrset, self.shape, self.sigma2, same)

    def covariance_matrix(self) -> np.ndarray:
        """Full cell covariance; only sensible for small marginals."""
        n = self.values.size
        idx = np.indices(self.shape).reshape(len(self.shape), n) if self.shape else np.zeros((0, n), int)
        out = np.empty((n, n))
        cache = {}
        for i in range(n):
            for j in range(n):
                same = tuple(bool(x) for x in idx[:, i] == idx[:, j])
                if same not in cache:
                    cache[same] = _moment(self.attrset, self.shape, self.sigma2, same)
                out[i, j] = cache[same]
        return out


def _moment(A, shape, sigma2, same):
    # per attribute in the measured subset: (m-1)/m if the cells agree there,
    # -1/m otherwise; per attribute outside it: 1/m^2
    pos = {a: k for k, a in enumerate(A)}
    total = []
    for B in subsets(A):
        inside = set(B)
        term = sigma2[B]
        for a in A:
            m = shape[pos[a]]
            if a in inside:
                term *= (m - 1) / m if same[pos[a]] else -1.0 / m
            else:
                term /= m * m
        total.append(term)
    return math.fsum(total)


def _as_map(residuals) -> Mapping[AttrSet, NoisyResidual]:
    if isinstance(residuals, Mapping):
        return residuals
    return {r.attrset: r for r in residuals}


def reconstruct(schema: Schema, A: AttrSet, residuals) -> MarginalEstimate:
    """Estimate marginal ``A`` from the residuals of all its subsets."""
    schema.check(A)
    residuals = _as_map(residuals)
    missing = [B for B in subsets(A) if B not in residuals]
    if missing:
        raise MissingResidualError(f"marginal {A} needs residuals for {missing}")
    q = np.zeros(schema.cell_count(A))
    for B in subsets(A):
        y = residuals[B].values
        q += kron_apply(reconstruction_operator(schema, A, B), y)
    shape = schema.shape(A)
    sigma2 = {B: residuals[B].sigma2 for B in subsets(A)}
    var = _moment(A, shape, sigma2, (True,) * len(A))
    cov = _moment(A, shape, sigma2, (False,) * len(A))
    return MarginalEstimate(A, q, var, cov, shape, sigma2)


def reconstruct_all(schema: Schema, marginals: Workload | Iterable[AttrSet], residuals,
                    workers: int = 1) -> list[MarginalEstimate]:
    targets = marginals.marginals if isinstance(marginals, Workload) else list(marginals)
    residuals = _as_map(residuals)
    run = lambda A: reconstruct(schema, A, residuals)
    if workers > 1 and len(targets) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, targets))
    return [run(A) for A in targets]
