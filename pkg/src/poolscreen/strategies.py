"""The three test schedulers, each emitting a full audit log.

* two-round: test every group, then retest every member of a positive group
  individually with the unmodified network.
* multi-round: split positive groups into ``k`` contiguous sub-groups and
  retest recursively with the same group network; singletons are tested with
  the unmodified network.  Feature caching lets retests skip the per-sample
  leaf segment.
* one-round double pool: partition the population twice so every sample sits
  in exactly two groups, run all tests at once, and flag the samples that
  appear in no negative group.

Groups of size 1 are always priced as the unmodified network and their
positives are flagged directly.  Schedulers are deterministic given their
streams; randomness enters only through the oracle and the partitions.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .cost_model import CacheState, CostProfile, DesignSpec, group_test_cost, individual_cost
from .oracle import OracleProfile, TestOutcome, respond
from .population import GroupAssignment, Population, assign_groups
from .streams import ROLE_ASSIGNMENT, ROLE_ORACLE, ROLE_SECOND_ASSIGNMENT, TestStream, spawn_seed

KIND_GROUP = "group"
KIND_INDIVIDUAL = "individual"


@dataclass(frozen=True, slots=True)
class TestEvent:
    """One forward pass: who was tested, at what price, with what outcome."""

    round_index: int
    kind: str
    members: tuple[int, ...]
    cache_hits: tuple[bool, ...]
    outcome: TestOutcome
    cost: int


@dataclass(frozen=True)
class RunResult:
    """Flagged ids plus the complete test log of one run."""

    flagged: frozenset[int]
    log: tuple[TestEvent, ...]
    round_counts: tuple[int, ...]

    @property
    def tests_total(self) -> int:
        return len(self.log)

    @property
    def tests_first_round(self) -> int:
        return self.round_counts[0] if self.round_counts else 0

    @property
    def total_macs(self) -> int:
        return sum(event.cost for event in self.log)


class _Runner:
    """Shared per-run machinery: cache, stream plumbing, event construction."""

    def __init__(self, population, oracle_profile, cost_profile, design, stream,
                 use_cache=True, difficulties=None):
        self.population = population
        self.oracle_profile = oracle_profile
        self.cost_profile = cost_profile
        self.design = design
        self.stream = stream
        self.use_cache = use_cache
        self.difficulties = difficulties
        self.cache = CacheState()
        self.log: list[TestEvent] = []
        self.round_counts: Counter[int] = Counter()

    def _outcome(self, members, round_index, salt) -> TestOutcome:
        return respond(
            members, self.population, self.oracle_profile, self.stream,
            round_index=round_index, salt=salt, difficulties=self.difficulties,
        )

    def test_group(self, members, round_index, salt=0) -> TestOutcome:
        if len(members) == 1:
            return self.test_individual(members[0], round_index, salt)
        price = group_test_cost(self.design, self.cost_profile, self.cache, members)
        if self.use_cache:
            self.cache.add(price.new_checkpoints)
        outcome = self._outcome(members, round_index, salt)
        self._record(round_index, KIND_GROUP, tuple(members), price.cache_hits,
                     outcome, price.macs)
        return outcome

    def test_individual(self, sample, round_index, salt=0) -> TestOutcome:
        # The unmodified network: full price, no cache interaction.
        members = (sample,)
        outcome = self._outcome(members, round_index, salt)
        self._record(round_index, KIND_INDIVIDUAL, members, (False,), outcome,
                     individual_cost(self.cost_profile))
        return outcome

    def _record(self, round_index, kind, members, hits, outcome, cost):
        self.log.append(TestEvent(round_index, kind, members, hits, outcome, cost))
        self.round_counts[round_index] += 1

    def result(self, flagged) -> RunResult:
        n_rounds = max(self.round_counts) if self.round_counts else 0
        return RunResult(
            flagged=frozenset(flagged),
            log=tuple(self.log),
            round_counts=tuple(self.round_counts[r] for r in range(1, n_rounds + 1)),
        )


def run_two_round(
    population: Population,
    assignment: GroupAssignment,
    oracle_profile: OracleProfile,
    cost_profile: CostProfile,
    design: DesignSpec,
    stream: TestStream,
    *,
    use_cache: bool = True,
    difficulties=None,
) -> RunResult:
    """Group round, then individual retests of every member of a positive group."""
    runner = _Runner(population, oracle_profile, cost_profile, design, stream,
                     use_cache, difficulties)
    flagged = set()
    retest: list[int] = []
    for group in assignment.groups:
        outcome = runner.test_group(group, round_index=1)
        if outcome.positive:
            if len(group) == 1:
                flagged.add(group[0])
            else:
                retest.extend(group)
    for sample in retest:
        if runner.test_individual(sample, round_index=2).positive:
            flagged.add(sample)
    return runner.result(flagged)


def split_group(members: tuple[int, ...], k: int) -> list[tuple[int, ...]]:
    """Split into at most ``k`` contiguous blocks, as evenly as possible,
    preserving member order (block sizes differ by at most one)."""
    blocks = min(k, len(members))
    base, extra = divmod(len(members), blocks)
    out, start = [], 0
    for i in range(blocks):
        size = base + (1 if i < extra else 0)
        out.append(members[start : start + size])
        start += size
    return out


def run_multi_round(
    population: Population,
    assignment: GroupAssignment,
    oracle_profile: OracleProfile,
    cost_profile: CostProfile,
    design: DesignSpec,
    stream: TestStream,
    k: int = 2,
    *,
    use_cache: bool = True,
    difficulties=None,
) -> RunResult:
    """Recursively split positive groups into ``k`` sub-groups before the
    individual round."""
    if not 2 <= k <= assignment.group_size and assignment.group_size > 1:
        raise ValueError(f"split factor {k} outside 2..{assignment.group_size}")
    runner = _Runner(population, oracle_profile, cost_profile, design, stream,
                     use_cache, difficulties)
    flagged = set()
    pending = list(assignment.groups)
    round_index = 1
    while pending:
        next_round: list[tuple[int, ...]] = []
        for group in pending:
            outcome = runner.test_group(group, round_index)
            if not outcome.positive:
                continue
            if len(group) == 1:
                flagged.add(group[0])
            else:
                next_round.extend(split_group(group, k))
        pending = next_round
        round_index += 1
    return runner.result(flagged)


def export_log(result: RunResult, path) -> None:
    """Write the test log as line-delimited JSON records for audit, replay
    testing, and the CLI decoder."""
    lines = [
        json.dumps({
            "round": event.round_index,
            "kind": event.kind,
            "members": list(event.members),
            "size": len(event.members),
            "positive": event.outcome.positive,
            "truth": event.outcome.truth,
            "cost": event.cost,
        })
        for event in result.log
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def decode_double_pool(groups, outcomes) -> frozenset[int]:
    """Flag the ids that appear in no negative group.

    Every id must appear in exactly two of ``groups``; ``outcomes`` holds one
    boolean (positive) per group.
    """
    groups = [tuple(g) for g in groups]
    if len(groups) != len(outcomes):
        raise ValueError("need exactly one outcome per group")
    coverage = Counter()
    for group in groups:
        coverage.update(group)
    bad = {i for i, c in coverage.items() if c != 2}
    if bad:
        raise ValueError(f"ids with coverage != 2: {sorted(bad)[:5]}")
    ruled_out: set[int] = set()
    for group, positive in zip(groups, outcomes):
        if not positive:
            ruled_out.update(group)
    return frozenset(coverage) - ruled_out


def run_one_round_double_pool(
    population: Population,
    n: int,
    m: int,
    oracle_profile: OracleProfile,
    cost_profile: CostProfile,
    design: DesignSpec,
    seed: int,
    *,
    use_cache: bool = True,
    difficulties=None,
) -> RunResult:
    """Two independent random partitions tested in a single round, decoded by
    ruling out members of negative groups."""
    if n != population.size:
        raise ValueError(f"n={n} but population holds {population.size} samples")
    first = assign_groups(n, m, spawn_seed(seed, ROLE_ASSIGNMENT))
    second = assign_groups(n, m, spawn_seed(seed, ROLE_SECOND_ASSIGNMENT))
    stream = TestStream(seed, ROLE_ORACLE)
    runner = _Runner(population, oracle_profile, cost_profile, design, stream,
                     use_cache, difficulties)
    groups: list[tuple[int, ...]] = []
    outcomes: list[bool] = []
    for salt, partition in enumerate((first, second)):
        for group in partition.groups:
            outcome = runner.test_group(group, round_index=1, salt=salt)
            groups.append(tuple(group))
            outcomes.append(outcome.positive)
    return runner.result(decode_double_pool(groups, outcomes))
