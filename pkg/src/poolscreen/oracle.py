"""Test outcomes from ground truth plus a size-keyed error model.

An :class:`OracleProfile` maps group-size buckets to (sensitivity,
specificity).  ``respond`` stands in for one forward pass of a screening
network: the true group label is the OR of the member labels, and the
reported outcome flips with the bucket's error rates.

Errors are independent Bernoulli per test by default.  Setting
``difficulty_weight`` > 0 and passing per-sample difficulty scores biases
both group and individual errors toward the same hard samples, which
correlates false positives across rounds; this is off by default.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ProfileError
from .population import Population
from .streams import ROLE_DIFFICULTY, TestStream, pcg

PROFILE_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class TestOutcome:
    positive: bool
    truth: bool


@dataclass(frozen=True)
class OracleProfile:
    """Sensitivity/specificity per group-size bucket.

    Lookups for unconfigured sizes fall back to the nearest configured
    bucket (ties break toward the smaller size).  A size-1 bucket is
    mandatory: every schedule ends in individual tests.
    """

    entries: dict[int, tuple[float, float]]
    design: str = ""
    difficulty_weight: float = 0.0
    notes: str = ""

    def __post_init__(self):
        if not self.entries:
            raise ProfileError("entries: profile has no buckets")
        clean: dict[int, tuple[float, float]] = {}
        for size, (sens, spec) in sorted(self.entries.items()):
            if int(size) < 1:
                raise ProfileError(f"entries[{size}]: size must be >= 1")
            for name, value in (("sensitivity", sens), ("specificity", spec)):
                if not 0.0 <= value <= 1.0:
                    raise ProfileError(
                        f"entries[{size}].{name}: {value} outside [0, 1]"
                    )
            clean[int(size)] = (float(sens), float(spec))
        if 1 not in clean:
            raise ProfileError("entries: size-1 bucket is required")
        object.__setattr__(self, "entries", clean)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(self.entries)

    def bucket(self, size: int) -> tuple[float, float]:
        """(sensitivity, specificity) for ``size``, nearest bucket on a miss."""
        if size in self.entries:
            return self.entries[size]
        best = min(self.entries, key=lambda s: (abs(s - size), s))
        return self.entries[best]


def perfect_profile() -> OracleProfile:
    """Error-free oracle: outcomes always equal the ground-truth group label."""
    return OracleProfile(entries={1: (1.0, 1.0)}, design="perfect")


def group_truth(members, population: Population) -> bool:
    """Ground-truth label of a pooled test: OR over the member labels."""
    ids = np.asarray(members, dtype=np.intp)
    if ids.size == 0:
        raise ValueError("group_truth needs at least one member")
    return bool(population.labels[ids].any())


def make_difficulties(n: int, seed: int) -> np.ndarray:
    """Latent per-sample difficulty scores (standard normal), for the
    correlated-error option."""
    return pcg(seed, ROLE_DIFFICULTY).standard_normal(n)


def _shift(p: float, amount: float) -> float:
    # Logit-scale shift; degenerate probabilities stay degenerate so a
    # perfect profile cannot be corrupted by difficulty scores.
    if amount == 0.0 or p <= 0.0 or p >= 1.0:
        return p
    return 1.0 / (1.0 + math.exp(-(math.log(p / (1.0 - p)) + amount)))


def respond(
    members,
    population: Population,
    profile: OracleProfile,
    stream: TestStream,
    *,
    round_index: int = 0,
    salt: int = 0,
    difficulties: np.ndarray | None = None,
) -> TestOutcome:
    """Simulate one test of ``members`` and report its outcome.

    A truly positive group reports positive with probability
    sensitivity(|members|); a truly negative one with probability
    1 - specificity(|members|).  Deterministic given the stream.
    """
    truth = group_truth(members, population)
    sens, spec = profile.bucket(len(members))
    p = sens if truth else 1.0 - spec
    if profile.difficulty_weight != 0.0 and difficulties is not None:
        hardest = float(np.max(difficulties[np.asarray(members, dtype=np.intp)]))
        p = _shift(p, profile.difficulty_weight * hardest)
    positive = stream.uniform(members, round_index, salt) < p
    return TestOutcome(positive=positive, truth=truth)


def save_profile(profile: OracleProfile, path) -> None:
    """Write a profile as the documented key/value JSON document."""
    doc = {
        "version": PROFILE_SCHEMA_VERSION,
        "design": profile.design,
        "rows": [
            {"size": size, "sensitivity": sens, "specificity": spec}
            for size, (sens, spec) in sorted(profile.entries.items())
        ],
        "difficulty_weight": profile.difficulty_weight,
        "notes": profile.notes,
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_profile(path) -> OracleProfile:
    """Parse a profile document, rejecting malformed fields by name."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ProfileError(f"{path}: not valid JSON ({exc})") from exc
    return profile_from_dict(doc, source=str(path))


def profile_from_dict(doc: dict, source: str = "profile") -> OracleProfile:
    if not isinstance(doc, dict):
        raise ProfileError(f"{source}: document must be an object")
    version = doc.get("version")
    if version != PROFILE_SCHEMA_VERSION:
        raise ProfileError(f"{source}: version: expected {PROFILE_SCHEMA_VERSION}, got {version!r}")
    rows = doc.get("rows")
    if not isinstance(rows, list) or not rows:
        raise ProfileError(f"{source}: rows: expected a non-empty list")
    entries: dict[int, tuple[float, float]] = {}
    for i, row in enumerate(rows):
        if not isinstance(row, dict):
            raise ProfileError(f"{source}: rows[{i}]: expected an object")
        try:
            size = row["size"]
            sens = row["sensitivity"]
            spec = row["specificity"]
        except KeyError as exc:
            raise ProfileError(f"{source}: rows[{i}].{exc.args[0]}: missing") from exc
        if not isinstance(size, int) or size < 1:
            raise ProfileError(f"{source}: rows[{i}].size: must be a positive integer")
        if size in entries:
            raise ProfileError(f"{source}: rows[{i}].size: duplicate bucket {size}")
        for name, value in (("sensitivity", sens), ("specificity", spec)):
            if not isinstance(value, (int, float)) or not 0.0 <= value <= 1.0:
                raise ProfileError(f"{source}: rows[{i}].{name}: {value!r} outside [0, 1]")
        entries[size] = (float(sens), float(spec))
    if 1 not in entries:
        raise ProfileError(f"{source}: rows: size-1 bucket is required")
    weight = doc.get("difficulty_weight", 0.0)
    if not isinstance(weight, (int, float)):
        raise ProfileError(f"{source}: difficulty_weight: must be a number")
    return OracleProfile(
        entries=entries,
        design=str(doc.get("design", "")),
        difficulty_weight=float(weight),
        notes=str(doc.get("notes", "")),
    )
