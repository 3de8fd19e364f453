"""Ground-truth populations and uniform random group assignments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .streams import ROLE_ASSIGNMENT, ROLE_POPULATION, pcg

BERNOULLI = "bernoulli"
FIXED_COUNT = "fixed_count"
POPULATION_MODES = (BERNOULLI, FIXED_COUNT)


@dataclass(frozen=True)
class Population:
    """Binary ground truth for samples 0..N-1 (True = positive)."""

    labels: np.ndarray
    prevalence: float
    seed: int
    mode: str = FIXED_COUNT

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=bool)
        if labels.ndim != 1 or labels.size == 0:
            raise ValueError("population needs at least one label")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def size(self) -> int:
        return int(self.labels.size)

    @property
    def positives(self) -> int:
        return int(self.labels.sum())


@dataclass(frozen=True)
class GroupAssignment:
    """Disjoint groups covering 0..N-1, all of size M except at most one trailer."""

    groups: tuple[tuple[int, ...], ...]
    group_size: int

    @property
    def population_size(self) -> int:
        return sum(len(g) for g in self.groups)


def generate_population(
    n: int, prevalence: float, seed: int, mode: str = FIXED_COUNT
) -> Population:
    """Draw ground-truth labels for ``n`` samples.

    ``fixed_count`` places exactly round(prevalence * n) positives at uniformly
    random ids (round-half-even); ``bernoulli`` draws each label independently.
    Deterministic given (n, prevalence, seed, mode).
    """
    if n < 1:
        raise ValueError(f"population size must be >= 1, got {n}")
    if not 0.0 <= prevalence <= 1.0:
        raise ValueError(f"prevalence must be in [0, 1], got {prevalence}")
    rng = pcg(seed, ROLE_POPULATION)
    if mode == FIXED_COUNT:
        labels = np.zeros(n, dtype=bool)
        k = round(prevalence * n)
        if k:
            labels[rng.permutation(n)[:k]] = True
    elif mode == BERNOULLI:
        labels = rng.random(n) < prevalence
    else:
        raise ValueError(f"unknown population mode {mode!r}")
    return Population(labels=labels, prevalence=prevalence, seed=seed, mode=mode)


def assign_groups(n: int, m: int, seed: int) -> GroupAssignment:
    """Partition 0..n-1 into ceil(n/m) uniformly random groups of size m.

    A uniformly random permutation is chunked into consecutive blocks; when
    m does not divide n the final block keeps its natural size n mod m.
    """
    if m < 1:
        raise ValueError(f"group size must be >= 1, got {m}")
    if m > n:
        raise ValueError(f"group size {m} exceeds population size {n}")
    perm = pcg(seed, ROLE_ASSIGNMENT).permutation(n)
    groups = tuple(
        tuple(int(i) for i in perm[start : start + m]) for start in range(0, n, m)
    )
    return GroupAssignment(groups=groups, group_size=m)
