"""Rare-class screening pools built from the bundled 8x8 digits images."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from sklearn.datasets import load_digits


@dataclass(frozen=True)
class Pool:
    """Labeled samples: images (n, 1, 8, 8) in [0, 1], labels True = positive."""

    images: torch.Tensor
    labels: torch.Tensor

    @property
    def size(self) -> int:
        return int(self.labels.shape[0])

    @property
    def positives(self) -> int:
        return int(self.labels.sum())

    @property
    def prevalence(self) -> float:
        return self.positives / self.size


def load_pools(
    positive_digit: int = 3,
    train_fraction: float = 0.7,
    seed: int = 0,
) -> tuple[Pool, Pool]:
    """(train, heldout) pools for one-vs-rest detection of ``positive_digit``.

    Both keep the dataset's natural class balance; the balanced group sampler
    handles the imbalance during training, and ``subsample_prevalence`` turns
    the held-out pool into a rare-class screening pool.
    """
    raw = load_digits()
    images = torch.tensor(raw.images / 16.0, dtype=torch.float32).unsqueeze(1)
    labels = torch.tensor(raw.target == positive_digit)

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(labels))
    cut = int(train_fraction * len(labels))
    train_idx, heldout_idx = order[:cut], order[cut:]
    return (
        Pool(images=images[train_idx], labels=labels[train_idx]),
        Pool(images=images[heldout_idx], labels=labels[heldout_idx]),
    )


def subsample_prevalence(pool: Pool, prevalence: float, seed: int = 0) -> Pool:
    """Screening pool: all negatives plus enough positives for ``prevalence``."""
    rng = np.random.default_rng(seed)
    labels = pool.labels.numpy()
    negatives = np.flatnonzero(~labels)
    positives = np.flatnonzero(labels)
    keep = max(1, round(prevalence * len(negatives) / (1 - prevalence)))
    if keep > len(positives):
        raise ValueError(f"pool has only {len(positives)} positives, need {keep}")
    idx = np.concatenate([negatives, rng.permutation(positives)[:keep]])
    idx = idx[rng.permutation(len(idx))]
    return Pool(images=pool.images[idx], labels=pool.labels[idx])


def sample_groups(
    pool: Pool,
    size: int,
    count: int,
    rng: np.random.Generator,
    label: bool | None = None,
) -> np.ndarray:
    """``count`` uniform member draws of ``size`` ids, shape (count, size).

    ``label`` conditions on the group's ground truth (OR of member labels)
    by rejection, which keeps the conditional distribution exact.
    """
    if size < 1 or size > pool.size:
        raise ValueError(f"group size {size} outside 1..{pool.size}")
    labels = pool.labels.numpy()
    if label is True and not labels.any():
        raise ValueError("pool has no positive samples")
    if label is False and labels.all():
        raise ValueError("pool has no negative samples")
    if size == 1:
        ids = np.arange(pool.size) if label is None else np.flatnonzero(labels == label)
        return rng.choice(ids, size=(count, 1), replace=True)

    out: list[np.ndarray] = []
    need = count
    while need > 0:
        batch = max(64, 4 * need)
        candidates = np.argsort(rng.random((batch, pool.size)), axis=1)[:, :size]
        if label is not None:
            hits = labels[candidates].any(axis=1) == label
            candidates = candidates[hits]
        out.append(candidates[:need])
        need -= len(out[-1])
    return np.concatenate(out)


def group_labels(pool: Pool, members: np.ndarray) -> torch.Tensor:
    """Ground-truth group labels: OR over each row of member ids."""
    return pool.labels[torch.as_tensor(members)].any(dim=1)


def group_inputs(pool: Pool, members: np.ndarray) -> torch.Tensor:
    """Stacked set inputs, shape (count, size, 1, 8, 8)."""
    return pool.images[torch.as_tensor(members)]
