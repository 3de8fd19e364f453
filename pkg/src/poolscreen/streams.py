"""Seed derivation rules and the per-test randomness source.

Two generator families cover all randomness in the engine:

* Bulk sampling (labels, permutations) uses numpy PCG64 streams derived via
  ``SeedSequence(entropy=seed, spawn_key=key)``.  Every consumer owns a
  private stream named by an integer role, so the same user-facing seed can
  feed several operations without correlation, and reruns are bit-identical
  across platforms.
* Test outcomes come from :class:`TestStream`, a counter-style source: the
  uniform draw for one test is keyed by (run seed, round, salt, sorted member
  ids) through BLAKE2b.  Outcomes therefore do not depend on how many other
  tests ran first, which keeps runs reproducible under reordered or parallel
  scheduling and makes the total workload monotone in the error rates.

Role constants record the documented stream-splitting rule.  The harness
derives one child seed per (run, trial) with :func:`spawn_seed` and hands it
to population generation, group assignment, and the oracle stream, each of
which applies its own role internally.
"""

from __future__ import annotations

import hashlib

import numpy as np

ROLE_POPULATION = 0
ROLE_ASSIGNMENT = 1
ROLE_SECOND_ASSIGNMENT = 2
ROLE_ORACLE = 3
ROLE_DIFFICULTY = 4


def seed_sequence(seed: int, *key: int) -> np.random.SeedSequence:
    """Child seed sequence for the stream named by ``key`` under ``seed``."""
    return np.random.SeedSequence(entropy=seed, spawn_key=key)


def pcg(seed: int, *key: int) -> np.random.Generator:
    """PCG64 generator on the child stream (seed, *key)."""
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *key)))


def spawn_seed(seed: int, *key: int) -> int:
    """Derive a 64-bit integer child seed, e.g. one per trial."""
    return int(seed_sequence(seed, *key).generate_state(1, np.uint64)[0])


class TestStream:
    """Uniform draws keyed by test identity rather than draw order.

    ``uniform`` returns the same value for the same (round, salt, members)
    triple no matter what was drawn before.  Member order does not matter:
    a test acts on a set of samples.
    """

    __test__ = False  # not a pytest collection target

    def __init__(self, seed: int, *key: int):
        self._key = seed_sequence(seed, *key).generate_state(4, np.uint64).astype("<u8").tobytes()

    def uniform(self, members, round_index: int = 0, salt: int = 0) -> float:
        ids = np.sort(np.asarray(members, dtype="<u8"))
        data = (
            int(round_index).to_bytes(8, "little")
            + int(salt).to_bytes(8, "little")
            + ids.tobytes()
        )
        digest = hashlib.blake2b(data, digest_size=8, key=self._key).digest()
        return int.from_bytes(digest, "little") / 2.0**64
