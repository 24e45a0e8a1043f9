"""Central finite-difference check of the analytic gradients."""
from __future__ import annotations

from typing import Dict

import torch

from .model import Batch, MultiStreamModel
from .train import backward, loss_fn


@torch.no_grad()
def numeric_gradients(model: MultiStreamModel, batch: Batch, step: float = 1e-4) -> Dict[str, torch.Tensor]:
    """Perturb every parameter entry by +-step and difference the loss."""
    out = {}
    for name, p in model.named_parameters():
        grad = torch.zeros_like(p)
        flat, gflat = p.view(-1), grad.view(-1)
        for i in range(flat.numel()):
            orig = flat[i].item()
            flat[i] = orig + step
            up = loss_fn(model, batch).item()
            flat[i] = orig - step
            down = loss_fn(model, batch).item()
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * step)
        out[name] = grad
    return out


def relative_errors(model: MultiStreamModel, batch: Batch, step: float = 1e-4) -> Dict[str, float]:
    """Per parameter tensor: |analytic - numeric| / max(|analytic|, |numeric|) in L2."""
    model.eval()  # dropout off; the check needs a deterministic loss
    analytic = backward(model, batch)
    numeric = numeric_gradients(model, batch, step)
    errs = {}
    for name, g in analytic.items():
        n = numeric[name]
        denom = max(g.norm().item(), n.norm().item(), 1e-12)
        errs[name] = (g - n).norm().item() / denom
    return errs


@torch.no_grad()
def randomize_biases(model: MultiStreamModel, scale: float = 0.1, seed: int = 0) -> None:
    """Move biases off zero.

    With zero biases an all-zero input row (a centroid grouped with itself and
    no features) sits exactly on the ReLU kink, where a central difference
    straddles two slopes and cannot match any single subgradient.
    """
    gen = torch.Generator().manual_seed(seed)
    for name, p in model.named_parameters():
        if name.endswith("bias"):
            p.copy_((torch.rand(p.shape, generator=gen, dtype=torch.float64) * 2 - 1) * scale)


@torch.no_grad()
def relu_margin(model: MultiStreamModel, batch: Batch) -> float:
    """Smallest |pre-activation| feeding a ReLU on this batch.

    Central differences with step h are only meaningful when no unit is
    within reach of its kink, so callers draw check points until this
    margin exceeds h.
    """
    values = []
    final = model.head[-1]
    hooks = [m.register_forward_hook(lambda _m, _i, out: values.append(out.abs().min().item()))
             for m in model.modules() if isinstance(m, torch.nn.Linear) and m is not final]
    try:
        model.eval()
        model(batch)
    finally:
        for h in hooks:
            h.remove()
    return min(values)
