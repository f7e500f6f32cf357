import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fablab.partitions import (
    Assignment,
    BudgetExceeded,
    Partition,
    assignment_counts,
    class_size,
    count_partitions,
    enumerate_assignments,
    enumerate_partitions,
    log_class_size,
    partition_of,
)


def bell_triangle(n):
    """Bell numbers B_0..B_n from the Bell triangle."""
    bells = [1]
    row = [1]
    for _ in range(n):
        new = [row[-1]]
        for v in row:
            new.append(new[-1] + v)
        row = new
        bells.append(row[0])
    return bells


def brute_force_partitions(n, k_max):
    """Every partition reached by some labelling, deduplicated."""
    seen = set()
    for labels in itertools.product(range(k_max), repeat=n):
        blocks = {}
        for i, l in enumerate(labels, start=1):
            blocks.setdefault(l, []).append(i)
        seen.add(Partition.from_blocks(blocks.values()))
    return seen


assignments = st.integers(1, 6).flatmap(
    lambda k: st.lists(st.integers(1, k), min_size=1, max_size=12).map(lambda ls: Assignment(tuple(ls), k))
)


class TestAssignment:
    @pytest.mark.parametrize(
        "labels, k, expected",
        [([1], 1, [1]), ([1, 1, 2], 2, [2, 1]), ([1, 1], 3, [2, 0, 0])],
    )
    def test_counts(self, labels, k, expected):
        assert assignment_counts(Assignment(labels, k)).tolist() == expected

    def test_rejects_out_of_range_label(self):
        with pytest.raises(ValueError):
            Assignment((1, 3), 2)
        with pytest.raises(ValueError):
            Assignment((0,), 2)
        with pytest.raises(ValueError):
            Assignment((), 1)

    @given(assignments)
    def test_counts_sum_to_n(self, z):
        c = assignment_counts(z)
        assert c.sum() == z.n
        assert len(c) == z.k_slots


class TestPartitionOf:
    def test_examples(self):
        assert partition_of(Assignment((1,), 1)) == Partition(((1,),))
        assert partition_of(Assignment((2, 2, 1), 2)) == Partition(((1, 2), (3,)))
        assert partition_of(Assignment((1, 1, 2), 2)) == partition_of(Assignment((2, 2, 1), 2))

    @given(assignments, st.randoms(use_true_random=False))
    def test_relabel_invariance(self, z, rnd):
        perm = list(range(1, z.k_slots + 1))
        rnd.shuffle(perm)
        relabelled = Assignment(tuple(perm[l - 1] for l in z.labels), z.k_slots)
        assert partition_of(relabelled) == partition_of(z)

    @given(assignments)
    def test_block_sizes_are_nonzero_counts(self, z):
        b = partition_of(z)
        c = assignment_counts(z)
        assert sorted(b.sizes) == sorted(c[c > 0].tolist())


class TestPartition:
    def test_canonical_form_enforced(self):
        with pytest.raises(ValueError):
            Partition(((3,), (1, 2)))
        with pytest.raises(ValueError):
            Partition(((1, 3),))
        with pytest.raises(ValueError):
            Partition(((2, 1),))

    def test_string_roundtrip(self):
        b = Partition.from_blocks([[4, 3], [2, 1]])
        assert str(b) == "{1,2}|{3,4}"
        assert Partition.parse(str(b)) == b

    def test_labels(self):
        assert Partition.parse("{1,3}|{2}").labels().tolist() == [1, 2, 1]


class TestClassSize:
    @pytest.mark.parametrize("text, expected", [("{1,2,3}", 1), ("{1,2}|{3}", 3), ("{1}|{2}|{3}", 6)])
    def test_examples(self, text, expected):
        assert class_size(Partition.parse(text), 3) == expected

    def test_counts_assignments_with_that_count_vector(self):
        # N!/prod n_k! is the number of labelings whose ordered counts equal the block sizes
        for b in enumerate_partitions(6, 6):
            k = b.num_blocks
            hits = sum(
                1 for z in enumerate_assignments(6, k) if tuple(assignment_counts(z)) == b.sizes
            )
            assert hits == class_size(b, 6)

    def test_exact_at_n20(self):
        b = Partition.from_blocks([range(1, 11), range(11, 21)])
        assert class_size(b, 20) == 184756
        assert log_class_size(b.sizes) == pytest.approx(np.log(184756), rel=1e-12)

    def test_wrong_n(self):
        with pytest.raises(ValueError):
            class_size(Partition.parse("{1,2}"), 3)


class TestEnumeration:
    @pytest.mark.parametrize("n, k, expected", [(2, 2, 4), (3, 2, 8), (1, 5, 5)])
    def test_assignment_counts(self, n, k, expected):
        zs = list(enumerate_assignments(n, k))
        assert len(zs) == expected == len(set(zs))

    def test_assignment_order_deterministic(self):
        assert [z.labels for z in enumerate_assignments(2, 2)] == [(1, 1), (1, 2), (2, 1), (2, 2)]

    @pytest.mark.parametrize("n, k_max, expected", [(3, 3, 5), (3, 2, 4), (1, 1, 1)])
    def test_partition_examples(self, n, k_max, expected):
        ps = list(enumerate_partitions(n, k_max))
        assert len(ps) == expected == len(set(ps))

    @pytest.mark.parametrize("n", range(1, 11))
    def test_bell_numbers(self, n):
        assert sum(1 for _ in enumerate_partitions(n, n)) == bell_triangle(n)[n]

    @pytest.mark.parametrize("n, k_max", [(4, 2), (5, 3), (6, 6), (6, 1)])
    def test_matches_brute_force(self, n, k_max):
        assert set(enumerate_partitions(n, k_max)) == brute_force_partitions(n, k_max)

    def test_count_partitions(self):
        assert count_partitions(12, 12) == 4213597
        assert count_partitions(5, 2) == 16

    def test_budget(self, monkeypatch):
        with pytest.raises(BudgetExceeded, match="1024"):
            next(enumerate_assignments(10, 2, budget=1000))
        with pytest.raises(BudgetExceeded):
            next(enumerate_partitions(13, 13))
        monkeypatch.setenv("FABLAB_BUDGET", "10")
        with pytest.raises(BudgetExceeded, match="budget of 10"):
            next(enumerate_partitions(4, 4))
