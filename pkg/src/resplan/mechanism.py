"""Noisy residual measurements.

Each closure member ``A`` is measured as ``H v + sigma * H z`` where ``v`` is
the true marginal on ``A``, ``H`` the Kronecker product of subtraction
matrices on ``A`` and ``z`` standard normal noise over the marginal's cells.
The noise covariance is therefore ``sigma^2 H H^T``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .kronop import kron_apply, measurement_operator
from .planner import Plan
from .schema import AttrSet, Dataset, marginal_counts


@dataclass(frozen=True)
class NoisyResidual:
    attrset: AttrSet
    sigma2: float
    values: np.ndarray = field(repr=False)


class NoiseSource:
    """Master seed from which one independent normal stream per AttrSet is derived.

    Streams are keyed by the AttrSet itself through ``SeedSequence`` spawn
    keys, so the draws for ``A`` do not depend on which other sets are
    measured or in what order.  Normals come from PCG64 via numpy's
    ziggurat ``standard_normal``.
    """

    def __init__(self, seed: int | None = None):
        if seed is None:
            seed = int(np.random.SeedSequence().entropy % (2**63))
        self.seed = int(seed)

    def generator(self, A: AttrSet) -> np.random.Generator:
        key = (len(A),) + tuple(int(i) for i in A)
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=key)))

    def normals(self, A: AttrSet, size: int) -> np.ndarray:
        return self.generator(A).standard_normal(size)


def measure(dataset: Dataset, A: AttrSet, sigma2: float, noise: NoiseSource | None = None,
            zero_noise: bool = False) -> NoisyResidual:
    """Run the base mechanism on ``A``.

    ``zero_noise`` skips the noise entirely.  It exists for testing and is
    not differentially private.
    """
    if not sigma2 > 0:
        raise ValueError(f"sigma^2 must be positive, got {sigma2}")
    schema = dataset.schema
    H = measurement_operator(schema, A)
    v = marginal_counts(dataset, A).astype(float)
    if not zero_noise:
        if noise is None:
            raise ValueError("a noise source is required unless zero_noise is set")
        v = v + math.sqrt(sigma2) * noise.normals(A, v.size)
    return NoisyResidual(A, float(sigma2), kron_apply(H, v))


def measure_all(dataset: Dataset, plan: Plan, noise: NoiseSource | None = None,
                zero_noise: bool = False, workers: int = 1) -> list[NoisyResidual]:
    """Measure every AttrSet in ``plan``; results follow the plan's key order."""
    items = list(plan.sigma2.items())
    run = lambda item: measure(dataset, item[0], item[1], noise, zero_noise)
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, items))
    return [run(item) for item in items]
