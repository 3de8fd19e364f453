import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from poolscreen.population import (
    BERNOULLI,
    FIXED_COUNT,
    Population,
    assign_groups,
    generate_population,
)


def test_fixed_count_places_exact_positive_count():
    pop = generate_population(48800, 0.001, seed=3, mode=FIXED_COUNT)
    assert pop.positives == 49  # round(0.001 * 48800)
    assert pop.size == 48800


def test_zero_prevalence_all_negative():
    pop = generate_population(10, 0.0, seed=1, mode=FIXED_COUNT)
    assert pop.positives == 0


def test_unit_prevalence_all_positive():
    pop = generate_population(8, 1.0, seed=1, mode=FIXED_COUNT)
    assert pop.positives == 8


def test_bernoulli_count_within_three_sigma():
    n, p = 20000, 0.05
    pop = generate_population(n, p, seed=11, mode=BERNOULLI)
    sigma = math.sqrt(p * (1 - p) / n)
    assert abs(pop.positives / n - p) <= 3 * sigma


@pytest.mark.parametrize("prevalence", [-0.1, 1.5])
def test_rejects_prevalence_outside_unit_interval(prevalence):
    with pytest.raises(ValueError):
        generate_population(10, prevalence, seed=0)


def test_rejects_empty_population():
    with pytest.raises(ValueError):
        generate_population(0, 0.5, seed=0)


def test_rejects_unknown_mode():
    with pytest.raises(ValueError):
        generate_population(10, 0.5, seed=0, mode="pairs")


def test_population_labels_are_read_only():
    pop = generate_population(10, 0.5, seed=0)
    with pytest.raises(ValueError):
        pop.labels[0] = True


def test_reference_group_counts():
    assert len(assign_groups(48800, 8, seed=0).groups) == 6100
    assert len(assign_groups(48800, 2, seed=0).groups) == 24400


def test_trailing_group_keeps_remainder():
    groups = assign_groups(5, 2, seed=4).groups
    assert sorted(len(g) for g in groups) == [1, 2, 2]
    assert groups[-1] and len(groups[-1]) == 1  # trailer is last


@pytest.mark.parametrize("n,m", [(5, 0), (5, 6)])
def test_rejects_bad_group_size(n, m):
    with pytest.raises(ValueError):
        assign_groups(n, m, seed=0)


def test_assignment_deterministic():
    a = assign_groups(100, 7, seed=42)
    b = assign_groups(100, 7, seed=42)
    assert a == b
    assert a != assign_groups(100, 7, seed=43)


def test_population_deterministic():
    a = generate_population(1000, 0.1, seed=9, mode=BERNOULLI)
    b = generate_population(1000, 0.1, seed=9, mode=BERNOULLI)
    assert np.array_equal(a.labels, b.labels)


@given(
    n=st.integers(min_value=1, max_value=64),
    m=st.integers(min_value=1, max_value=64),
    seed=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_groups_partition_population(n, m, seed):
    m = min(m, n)
    assignment = assign_groups(n, m, seed)
    seen = [i for g in assignment.groups for i in g]
    assert sorted(seen) == list(range(n))
    sizes = [len(g) for g in assignment.groups]
    assert all(s == m for s in sizes[:-1])
    assert sizes[-1] == (n % m or m)
    assert len(assignment.groups) == math.ceil(n / m)


def test_pair_cooccurrence_uniform():
    # N=6, M=2: each unordered pair shares one of five equally likely slots.
    n_seeds = 10_000
    counts = np.zeros((6, 6))
    for seed in range(n_seeds):
        for a, b in assign_groups(6, 2, seed).groups:
            counts[a, b] += 1
            counts[b, a] += 1
    stderr = math.sqrt(0.2 * 0.8 / n_seeds)
    for i in range(6):
        for j in range(i + 1, 6):
            assert abs(counts[i, j] / n_seeds - 0.2) <= 3 * stderr


def test_population_requires_labels():
    with pytest.raises(ValueError):
        Population(labels=np.zeros(0, dtype=bool), prevalence=0.0, seed=0)
