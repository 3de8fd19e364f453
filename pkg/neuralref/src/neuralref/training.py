"""Training loops: individual baseline and group-network fine-tuning.

Both samplers draw an equal number of positive and negative units per epoch
(singles for the baseline, groups for fine-tuning) so the rare class does not
vanish from the loss.  Group supervision is the OR of the member labels,
asserted on every sampled batch.  Runs are deterministic under fixed seeds.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from .data import Pool, group_inputs, group_labels, sample_groups
from .network import GroupNetwork, LayeredClassifier


def _batches(count: int, batch_size: int):
    for start in range(0, count, batch_size):
        yield start, min(start + batch_size, count)


def _balanced_members(pool: Pool, size: int, per_class: int,
                      rng: np.random.Generator) -> np.ndarray:
    positive = sample_groups(pool, size, per_class, rng, label=True)
    negative = sample_groups(pool, size, per_class, rng, label=False)
    members = np.concatenate([positive, negative])
    return members[rng.permutation(len(members))]


def train_individual(
    net: LayeredClassifier,
    pool: Pool,
    *,
    epochs: int = 6,
    per_class: int = 256,
    batch_size: int = 32,
    lr: float = 1e-3,
    seed: int = 0,
) -> LayeredClassifier:
    """Fit the baseline classifier on balanced singles."""
    if pool.positives == 0:
        raise ValueError("training pool has no positive samples")
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    optimizer = torch.optim.Adam(net.parameters(), lr=lr)
    loss_fn = nn.BCEWithLogitsLoss()
    net.train()
    for _ in range(epochs):
        members = _balanced_members(pool, 1, per_class, rng)
        for lo, hi in _batches(len(members), batch_size):
            batch = members[lo:hi]
            logits = net(pool.images[torch.as_tensor(batch[:, 0])])
            targets = pool.labels[torch.as_tensor(batch[:, 0])].float()
            optimizer.zero_grad()
            loss_fn(logits, targets).backward()
            optimizer.step()
    net.eval()
    return net


def finetune(
    group_net: GroupNetwork,
    pool: Pool,
    *,
    epochs: int = 40,
    per_class: int = 320,
    batch_size: int = 16,
    lr: float = 5e-4,
    cooldown_lr: float = 1e-4,
    pos_weight: float = 3.0,
    seed: int = 0,
) -> GroupNetwork:
    """Fine-tune the group network on balanced positive/negative groups.

    The last third of the epochs run at ``cooldown_lr`` so the network
    settles instead of bouncing around the optimum.  ``pos_weight`` biases
    the loss toward recall: in a screening setting a missed positive group
    is far costlier than a retested negative one.
    """
    if pool.positives == 0:
        raise ValueError("training pool has no positive samples")
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    size = group_net.spec.group_size
    optimizer = torch.optim.Adam(group_net.parameters(), lr=lr)
    loss_fn = nn.BCEWithLogitsLoss(pos_weight=torch.tensor(float(pos_weight)))
    group_net.train()
    for epoch in range(epochs):
        if epoch == epochs - max(1, epochs // 3):
            for group in optimizer.param_groups:
                group["lr"] = cooldown_lr
        members = _balanced_members(pool, size, per_class, rng)
        for lo, hi in _batches(len(members), batch_size):
            batch = members[lo:hi]
            targets = group_labels(pool, batch)
            # Group supervision is by definition the OR of the member labels.
            assert torch.equal(targets, pool.labels[torch.as_tensor(batch)].any(dim=1))
            logits = group_net(group_inputs(pool, batch))
            optimizer.zero_grad()
            loss_fn(logits, targets.float()).backward()
            optimizer.step()
    group_net.eval()
    return group_net


@torch.no_grad()
def predict_groups(net, pool: Pool, members: np.ndarray,
                   batch_size: int = 256) -> torch.Tensor:
    """Boolean predictions for each member row (singles use the raw net)."""
    singles = members.shape[1] == 1 and isinstance(net, LayeredClassifier)
    outputs = []
    for lo, hi in _batches(len(members), batch_size):
        batch = members[lo:hi]
        if singles:
            logits = net(pool.images[torch.as_tensor(batch[:, 0])])
        else:
            logits = net(group_inputs(pool, batch))
        outputs.append(logits > 0)
    return torch.cat(outputs)
