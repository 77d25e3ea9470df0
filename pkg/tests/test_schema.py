import itertools
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resplan.schema import (Attribute, DataError, Dataset, Schema, SchemaError, Workload, closure,
                            kway, marginal_counts, subsets, upto_kway)


@st.composite
def schemas(draw, max_attrs=4, max_size=4):
    sizes = draw(st.lists(st.integers(2, max_size), min_size=1, max_size=max_attrs))
    return Schema.from_sizes(sizes)


@st.composite
def workloads(draw, schema):
    k = len(schema)
    all_sets = [c for r in range(k + 1) for c in itertools.combinations(range(k), r)]
    chosen = draw(st.lists(st.sampled_from(all_sets), min_size=0, max_size=5, unique=True))
    return Workload.of(chosen)


def brute_closure(marginals):
    out = set()
    for A in marginals:
        for r in range(len(A) + 1):
            out.update(itertools.combinations(A, r))
    return out


class TestSchema:
    def test_sizes_must_be_at_least_two(self):
        with pytest.raises(SchemaError):
            Schema.from_sizes([2, 1])

    def test_names_unique(self):
        with pytest.raises(SchemaError):
            Schema.from_sizes([2, 3], names=["x", "x"])

    def test_label_count(self):
        with pytest.raises(SchemaError):
            Attribute("x", 3, ("a", "b"))

    def test_counts(self, toy_schema):
        assert toy_schema.cell_count((1, 2)) == 6
        assert toy_schema.residual_row_count((1, 2)) == 2
        assert toy_schema.cell_count(()) == 1
        assert toy_schema.residual_row_count(()) == 1

    def test_huge_universe_is_only_a_number(self):
        s = Schema.from_sizes([100] * 30)
        assert s.domain_size == 100 ** 30
        assert s.cell_count((0, 1)) == 10_000

    def test_attrset_by_name(self, toy_schema):
        assert toy_schema.attrset(["a3", "a2"]) == (1, 2)
        with pytest.raises(SchemaError):
            toy_schema.attrset(["nope"])
        with pytest.raises(SchemaError):
            toy_schema.attrset([5])

    def test_encode_labels_and_codes(self, toy_schema):
        a3 = toy_schema.attributes[2]
        assert a3.encode("1") == 0  # label wins over code
        a1 = toy_schema.attributes[0]
        assert a1.encode("b") == 1 and a1.encode("0") == 0
        with pytest.raises(DataError):
            a1.encode("c")
        with pytest.raises(DataError):
            a1.encode("2")


class TestCellIndex:
    def test_toy_positions(self, toy_schema):
        assert toy_schema.cell_index((1, 2), (0, 2)) == 2
        assert toy_schema.cell_index((1, 2), (1, 1)) == 4

    def test_empty(self, toy_schema):
        assert toy_schema.cell_index((), ()) == 0
        assert toy_schema.cell_values((), 0) == ()

    def test_out_of_range(self, toy_schema):
        with pytest.raises(SchemaError):
            toy_schema.cell_index((1, 2), (2, 0))
        with pytest.raises(SchemaError):
            toy_schema.cell_values((1, 2), 6)

    @given(st.data())
    def test_roundtrip_and_numpy_order(self, data):
        s = data.draw(schemas())
        A = tuple(sorted(data.draw(st.sets(st.integers(0, len(s) - 1)))))
        shape = s.shape(A)
        for idx, cell in enumerate(itertools.product(*(range(m) for m in shape))):
            assert s.cell_index(A, cell) == idx
            assert s.cell_values(A, idx) == cell
        if A:
            assert s.cell_index(A, tuple(m - 1 for m in shape)) == int(np.prod(shape)) - 1


class TestWorkload:
    def test_duplicates_rejected(self):
        with pytest.raises(SchemaError):
            Workload.of([(0, 1), (1, 0)])

    def test_weights_positive(self):
        with pytest.raises(SchemaError):
            Workload.of([(0,)], [0.0])
        with pytest.raises(SchemaError):
            Workload.of([(0,)], [float("inf")])

    def test_weight_count(self):
        with pytest.raises(SchemaError):
            Workload.of([(0,), (1,)], [1.0])

    def test_validate(self):
        with pytest.raises(SchemaError):
            Workload.of([(0, 3)]).validate(Schema.from_sizes([2, 2]))

    def test_generators(self):
        s = Schema.from_sizes([2, 3, 4, 5])
        assert len(kway(s, 2)) == 6
        assert len(upto_kway(s, 2)) == 1 + 4 + 6


class TestClosure:
    def test_toy(self, toy_workload):
        assert closure(toy_workload) == [(), (0,), (1,), (2,), (0, 1), (1, 2)]

    def test_empty_marginal(self):
        assert closure(Workload.of([()])) == [()]

    def test_empty_workload(self):
        assert closure(Workload.of([])) == []

    def test_all_two_way_over_four(self):
        assert len(closure(kway(Schema.from_sizes([2] * 4), 2))) == 11

    @given(st.data())
    def test_matches_brute_force_and_is_idempotent(self, data):
        s = data.draw(schemas())
        W = data.draw(workloads(s))
        C = closure(W)
        assert set(C) == brute_closure(W.marginals)
        assert len(C) == len(set(C))
        assert closure(Workload.of(C)) == C
        assert len(C) <= sum(s.cell_count(A) for A in W.marginals)
        if W.marginals:
            assert () in C


class TestDataset:
    def test_out_of_range(self, toy_schema):
        with pytest.raises(DataError):
            Dataset(toy_schema, [(0, 0, 3)])
        with pytest.raises(DataError):
            Dataset(toy_schema, [(0, 0)])

    def test_empty(self, toy_schema):
        d = Dataset(toy_schema, [])
        assert len(d) == 0
        assert marginal_counts(d, (0,)).tolist() == [0, 0]
        assert marginal_counts(d, ()).tolist() == [0]

    def test_immutable(self, toy_dataset):
        with pytest.raises(ValueError):
            toy_dataset.records[0, 0] = 1


class TestMarginalCounts:
    def test_toy_a2_a3(self, toy_dataset):
        assert marginal_counts(toy_dataset, (1, 2)).tolist() == [0, 0, 2, 0, 2, 1]

    def test_toy_total(self, toy_dataset):
        assert marginal_counts(toy_dataset, ()).tolist() == [5]

    @given(st.data())
    @settings(max_examples=50)
    def test_full_table_matches_hash_count(self, data):
        s = data.draw(schemas())
        n = data.draw(st.integers(0, 40))
        rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
        recs = np.stack([rng.integers(0, m, n) for m in s.sizes], axis=1)
        full = tuple(range(len(s)))
        counts = marginal_counts(Dataset(s, recs), full)
        expected = Counter(tuple(int(v) for v in r) for r in recs)
        for idx, c in enumerate(counts):
            assert c == expected.get(s.cell_values(full, idx), 0)
        assert counts.sum() == n

    @given(st.data())
    @settings(max_examples=50)
    def test_sub_marginal_consistency(self, data):
        s = data.draw(schemas())
        rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
        recs = np.stack([rng.integers(0, m, 30) for m in s.sizes], axis=1)
        ds = Dataset(s, recs)
        A = tuple(sorted(data.draw(st.sets(st.integers(0, len(s) - 1), min_size=1))))
        for B in subsets(A):
            table = marginal_counts(ds, A).reshape(s.shape(A))
            drop = tuple(k for k, a in enumerate(A) if a not in B)
            assert np.array_equal(table.sum(axis=drop).ravel(), marginal_counts(ds, B))
