"""Domain-adversarial disentanglement of encoder feature maps.

The encoder output f is split into an identity part and a domain part by an
attention gate A in [0, 1]:

    f_domain = A * f
    f_id     = f - f_domain

so f_id + f_domain reconstructs f exactly. The domain part feeds a domain
classifier (classifier-1); the identity embedding feeds a second domain
classifier through a gradient reversal layer (classifier-2), pushing the
identity branch toward domain invariance. The composite objective is

    L = L_id + lambda * (L_cls1 + L_cls2)
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

DDAL_VARIANTS = ("none", "simam", "asp")


class LossError(RuntimeError):
    """Raised when a loss component is non-finite."""


class _GradReverse(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x, scale):
        ctx.scale = scale
        return x.view_as(x)

    @staticmethod
    def backward(ctx, grad_output):
        return grad_output.neg() * ctx.scale, None


def grad_reverse(x, scale: float = 1.0):
    """Identity in the forward pass; multiplies the gradient by -scale."""
    return _GradReverse.apply(x, scale)


class SimAMGate(nn.Module):
    """Parameter-free attention from the per-position energy function.

    For each channel the energy of a position is its squared deviation from
    the channel mean, normalized by four times the (stabilized) channel
    variance, plus 0.5; the gate is the sigmoid of that energy. Adds no
    trainable parameters.
    """

    def __init__(self, e_lambda: float = 1e-4):
        super().__init__()
        self.e_lambda = e_lambda

    def forward(self, x):
        b, c, h, w = x.size()
        n = w * h - 1
        x_minus_mu_square = (x - x.mean(dim=[2, 3], keepdim=True)).pow(2)
        y = x_minus_mu_square / (
            4 * (x_minus_mu_square.sum(dim=[2, 3], keepdim=True) / n + self.e_lambda)
        ) + 0.5
        return torch.sigmoid(y)


class ASPGate(nn.Module):
    """Trainable per-frame attention over the flattened channel-frequency axis.

    Each time step's [C, F] slice is flattened, passed through a bottleneck
    MLP and squashed with a sigmoid, giving an independent [0, 1] gate per
    position.
    """

    def __init__(self, channels: int, freq_bins: int, bottleneck: int | None = None):
        super().__init__()
        self.channels = channels
        self.freq_bins = freq_bins
        d = channels * freq_bins
        hidden = bottleneck if bottleneck is not None else max(d // 8, 8)
        self.fc1 = nn.Linear(d, hidden)
        self.fc2 = nn.Linear(hidden, d)

    def forward(self, x):
        b, c, h, w = x.size()
        if c != self.channels or h != self.freq_bins:
            raise ValueError(
                f"gate built for [{self.channels}, {self.freq_bins}, T], "
                f"got [{c}, {h}, {w}]"
            )
        frames = x.permute(0, 3, 1, 2).reshape(b, w, c * h)
        gates = torch.sigmoid(self.fc2(F.relu(self.fc1(frames))))
        return gates.reshape(b, w, c, h).permute(0, 2, 3, 1)


def make_gate(variant: str, channels: int, freq_bins: int) -> nn.Module | None:
    """Attention gate for a variant name; None when disentanglement is off."""
    if variant == "none":
        return None
    if variant == "simam":
        return SimAMGate()
    if variant == "asp":
        return ASPGate(channels, freq_bins)
    raise ValueError(f"unknown attention variant {variant!r}, expected one of {DDAL_VARIANTS}")


@dataclass
class DisentangledFeatures:
    """Additive split of a feature map: f_id + f_domain == f."""

    f_id: torch.Tensor
    f_domain: torch.Tensor
    attention: torch.Tensor


def disentangle(f: torch.Tensor, gate: nn.Module) -> DisentangledFeatures:
    """Split f into identity and domain parts with the gate's attention map."""
    attention = gate(f)
    f_domain = attention * f
    return DisentangledFeatures(f_id=f - f_domain, f_domain=f_domain, attention=attention)


class DomainClassifier(nn.Module):
    """Two-layer classifier over embeddings: Linear-ReLU-Linear to 2 logits."""

    def __init__(self, embedding_dim: int = 256, hidden_dim: int | None = None):
        super().__init__()
        hidden = hidden_dim if hidden_dim is not None else embedding_dim
        self.fc1 = nn.Linear(embedding_dim, hidden)
        self.fc2 = nn.Linear(hidden, 2)

    def forward(self, z):
        return self.fc2(F.relu(self.fc1(z)))


@dataclass
class DDALConfig:
    """Disentanglement settings.

    variant: "none", "simam" (parameter-free gate) or "asp" (trainable gate).
    lambda_weight: weight on the two domain-classification losses.
    grl_scale: gradient multiplier of the reversal layer (constant schedule).
    backbone_grad_from_cls1: when False, classifier-1 gradients stop at the
        domain branch (gate and domain head) instead of reaching the shared
        encoder. Default True: they propagate everywhere except through f_id.
    detach_branches: diagnostic mode; identity path bypasses the split
        (f_id := f) and both domain branches run on detached inputs, so the
        identity stream is bitwise that of a gate-free model.
    """

    variant: str = "none"
    lambda_weight: float = 0.5
    grl_scale: float = 1.0
    backbone_grad_from_cls1: bool = True
    detach_branches: bool = False

    def __post_init__(self) -> None:
        if self.variant not in DDAL_VARIANTS:
            raise ValueError(
                f"variant must be one of {DDAL_VARIANTS}, got {self.variant!r}"
            )
        if self.lambda_weight < 0:
            raise ValueError(f"lambda_weight must be >= 0, got {self.lambda_weight}")
        if self.grl_scale < 0:
            raise ValueError(f"grl_scale must be >= 0, got {self.grl_scale}")

    @property
    def enabled(self) -> bool:
        return self.variant != "none"


def _check_finite(name: str, value: torch.Tensor) -> None:
    if not torch.isfinite(value).all():
        raise LossError(f"{name} is non-finite: {value}")


def ddal_loss(
    l_id: torch.Tensor,
    l_cls1: torch.Tensor | None,
    l_cls2: torch.Tensor | None,
    config: DDALConfig,
) -> torch.Tensor:
    """Composite objective L_id + lambda * (L_cls1 + L_cls2).

    With disentanglement off both classifier losses must be None and the
    identity loss passes through. Non-finite components raise LossError
    naming the offender.
    """
    _check_finite("L_id", l_id)
    if not config.enabled:
        if l_cls1 is not None or l_cls2 is not None:
            raise ValueError("classifier losses supplied but variant is 'none'")
        return l_id
    if l_cls1 is None or l_cls2 is None:
        raise ValueError("disentanglement enabled but classifier losses missing")
    _check_finite("L_cls1", l_cls1)
    _check_finite("L_cls2", l_cls2)
    return l_id + config.lambda_weight * (l_cls1 + l_cls2)
