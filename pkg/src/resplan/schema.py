"""Categorical schemas, attribute subsets, workloads and datasets.

Attribute subsets are plain sorted tuples of attribute positions.  Marginal
cells are flattened row-major with the last attribute (in schema order)
varying fastest, which is the order produced by expanding the Kronecker
factors in schema order.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

AttrSet = tuple  # sorted tuple of attribute positions


class SchemaError(ValueError):
    """Raised for malformed schemas, workloads or attribute subsets."""


class DataError(ValueError):
    """Raised when records do not fit the schema."""


def attrset(indices: Iterable[int]) -> AttrSet:
    """Normalize ``indices`` into a sorted, duplicate-free tuple."""
    return tuple(sorted(set(int(i) for i in indices)))


def subsets(A: AttrSet) -> list[AttrSet]:
    """All subsets of ``A`` (including the empty set and ``A``), by size."""
    return [c for r in range(len(A) + 1) for c in itertools.combinations(A, r)]


@dataclass(frozen=True)
class Attribute:
    name: str
    size: int
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if not isinstance(self.size, (int, np.integer)) or self.size < 2:
            raise SchemaError(f"attribute {self.name!r}: size must be an integer >= 2, got {self.size!r}")
        if self.labels is not None:
            if len(self.labels) != self.size:
                raise SchemaError(
                    f"attribute {self.name!r}: {len(self.labels)} labels for size {self.size}")
            if len(set(self.labels)) != len(self.labels):
                raise SchemaError(f"attribute {self.name!r}: duplicate labels")

    def encode(self, token: str) -> int:
        """Map a label (or integer code) to its 0-based value index."""
        if self.labels is not None:
            try:
                return self.labels.index(token)
            except ValueError:
                pass
        try:
            code = int(token)
        except (TypeError, ValueError):
            raise DataError(f"attribute {self.name!r}: unknown label {token!r}") from None
        if not 0 <= code < self.size:
            raise DataError(f"attribute {self.name!r}: code {code} out of range [0, {self.size})")
        return code

    def decode(self, index: int) -> str:
        return self.labels[index] if self.labels is not None else str(index)


@dataclass(frozen=True)
class Schema:
    """Ordered categorical attributes.  The universe size is never allocated."""

    attributes: tuple[Attribute, ...]

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(self.attributes))
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise SchemaError(f"attribute names must be unique: {names}")

    @classmethod
    def from_sizes(cls, sizes: Sequence[int], names: Sequence[str] | None = None) -> "Schema":
        names = names or [f"a{i + 1}" for i in range(len(sizes))]
        return cls(tuple(Attribute(n, int(s)) for n, s in zip(names, sizes)))

    def __len__(self):
        return len(self.attributes)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(a.size for a in self.attributes)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.attributes)

    @property
    def domain_size(self) -> int:
        """Universe size d as an exact integer (for reporting only)."""
        return math.prod(self.sizes)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SchemaError(f"unknown attribute {name!r}") from None

    def attrset(self, items: Iterable[int | str]) -> AttrSet:
        """Build a validated AttrSet from attribute names and/or positions."""
        idx = [self.index(i) if isinstance(i, str) else int(i) for i in items]
        A = attrset(idx)
        self.check(A)
        return A

    def check(self, A: AttrSet) -> None:
        if list(A) != sorted(set(A)):
            raise SchemaError(f"attribute set {A} is not sorted and duplicate-free")
        for i in A:
            if not 0 <= i < len(self.attributes):
                raise SchemaError(f"attribute index {i} out of range for {len(self)} attributes")

    def shape(self, A: AttrSet) -> tuple[int, ...]:
        return tuple(self.attributes[i].size for i in A)

    def cell_count(self, A: AttrSet) -> int:
        return math.prod(self.shape(A))

    def residual_row_count(self, A: AttrSet) -> int:
        return math.prod(s - 1 for s in self.shape(A))

    def names_of(self, A: AttrSet) -> tuple[str, ...]:
        return tuple(self.attributes[i].name for i in A)

    def cell_index(self, A: AttrSet, values: Sequence[int]) -> int:
        shape = self.shape(A)
        if len(values) != len(shape):
            raise SchemaError(f"expected {len(shape)} values for {A}, got {len(values)}")
        index = 0
        for v, m in zip(values, shape):
            if not 0 <= v < m:
                raise SchemaError(f"value index {v} out of range [0, {m})")
            index = index * m + int(v)
        return index

    def cell_values(self, A: AttrSet, index: int) -> tuple[int, ...]:
        shape = self.shape(A)
        if not 0 <= index < math.prod(shape):
            raise SchemaError(f"cell index {index} out of range for {A}")
        out = []
        for m in reversed(shape):
            index, v = divmod(index, m)
            out.append(v)
        return tuple(reversed(out))


def cell_index(schema: Schema, A: AttrSet, values: Sequence[int]) -> int:
    return schema.cell_index(A, values)


def cell_values(schema: Schema, A: AttrSet, index: int) -> tuple[int, ...]:
    return schema.cell_values(A, index)


@dataclass(frozen=True)
class Workload:
    """Weighted marginals.  Weights multiply (sum of variances) or divide
    (max variance) the variance of their marginal."""

    entries: tuple[tuple[AttrSet, float], ...]

    def __post_init__(self):
        entries = tuple((attrset(A), float(w)) for A, w in self.entries)
        seen = set()
        for A, w in entries:
            if A in seen:
                raise SchemaError(f"duplicate marginal {A} in workload")
            if not w > 0 or not math.isfinite(w):
                raise SchemaError(f"marginal {A}: weight must be positive, got {w}")
            seen.add(A)
        object.__setattr__(self, "entries", entries)

    @classmethod
    def of(cls, marginals: Iterable[Iterable[int]], weights: Iterable[float] | None = None) -> "Workload":
        marginals = [attrset(A) for A in marginals]
        weights = [1.0] * len(marginals) if weights is None else list(weights)
        if len(weights) != len(marginals):
            raise SchemaError("one weight per marginal is required")
        return cls(tuple(zip(marginals, weights)))

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def marginals(self) -> list[AttrSet]:
        return [A for A, _ in self.entries]

    @property
    def weights(self) -> list[float]:
        return [w for _, w in self.entries]

    def validate(self, schema: Schema) -> None:
        for A in self.marginals:
            schema.check(A)


def kway(schema: Schema, k: int) -> Workload:
    """All ``k``-way marginals."""
    return Workload.of(itertools.combinations(range(len(schema)), k))


def upto_kway(schema: Schema, k: int) -> Workload:
    """All marginals on at most ``k`` attributes, including the total."""
    return Workload.of(
        c for r in range(min(k, len(schema)) + 1)
        for c in itertools.combinations(range(len(schema)), r))


def closure(workload: Workload | Iterable[AttrSet]) -> list[AttrSet]:
    """Downward closure: every subset of every workload marginal.

    Returned sorted by (size, indices).  An empty workload has an empty closure.
    """
    marginals = workload.marginals if isinstance(workload, Workload) else [attrset(A) for A in workload]
    out: set[AttrSet] = set()
    for A in marginals:
        if A in out:
            continue
        out.update(subsets(A))
    return sorted(out, key=lambda A: (len(A), A))


@dataclass(frozen=True)
class Dataset:
    """Records as an (n, k) array of 0-based value indices."""

    schema: Schema
    records: np.ndarray = field(repr=False)

    def __post_init__(self):
        recs = np.asarray(self.records, dtype=np.int64)
        if recs.size == 0:
            recs = recs.reshape(0, len(self.schema))
        if recs.ndim != 2 or recs.shape[1] != len(self.schema):
            raise DataError(f"records must have shape (n, {len(self.schema)}), got {recs.shape}")
        sizes = np.asarray(self.schema.sizes, dtype=np.int64)
        bad = (recs < 0) | (recs >= sizes)
        if bad.any():
            row, col = np.argwhere(bad)[0]
            raise DataError(
                f"record {row}: value {recs[row, col]} out of range for attribute "
                f"{self.schema.attributes[col].name!r} (size {sizes[col]})")
        recs.setflags(write=False)
        object.__setattr__(self, "records", recs)

    def __len__(self):
        return self.records.shape[0]


def marginal_counts(dataset: Dataset, A: AttrSet) -> np.ndarray:
    """True marginal table on ``A``, flattened; computed by a group-by over records."""
    schema = dataset.schema
    schema.check(A)
    if not A:
        return np.array([len(dataset)], dtype=np.int64)
    shape = schema.shape(A)
    flat = np.ravel_multi_index(tuple(dataset.records[:, i] for i in A), shape)
    return np.bincount(flat, minlength=math.prod(shape)).astype(np.int64)
