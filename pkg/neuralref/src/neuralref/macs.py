"""Per-block MAC counts for a layered classifier, measured from shapes."""

from __future__ import annotations

import torch
from torch import nn

from .network import LayeredClassifier


def _module_macs(module: nn.Module, x: torch.Tensor) -> tuple[int, torch.Tensor]:
    """(MACs for one sample, output) for a block, recursing into containers."""
    if isinstance(module, nn.Sequential):
        total = 0
        for child in module:
            macs, x = _module_macs(child, x)
            total += macs
        return total, x
    out = module(x)
    if isinstance(module, nn.Conv2d):
        kh, kw = module.kernel_size
        per_position = module.in_channels // module.groups * kh * kw
        macs = out.shape[1] * out.shape[2] * out.shape[3] * per_position
    elif isinstance(module, nn.Linear):
        macs = module.in_features * module.out_features
    else:
        macs = 0  # activations, pooling, flatten: no multiply-accumulates
    return int(macs), out


def block_mac_counts(net: LayeredClassifier,
                     input_shape: tuple[int, ...] = (1, 1, 8, 8)) -> list[int]:
    """MACs per block for one sample, in block order."""
    x = torch.zeros(input_shape)
    counts = []
    with torch.no_grad():
        for block in net.blocks:
            macs, x = _module_macs(block, x)
            counts.append(macs)
    return counts
