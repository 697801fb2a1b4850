"""Embedding extractor building blocks: ResNet34, statistics pooling, ArcFace."""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F


@dataclass
class BackboneConfig:
    """Residual encoder geometry.

    Defaults give the 34-layer configuration: a stride-1 3x3 stem and four
    stages of basic blocks with channel doubling and stride-2 downsampling
    at the entry of stages 2-4, so 80 mel bands collapse to 10 and time is
    divided by 8.
    """

    block_counts: tuple[int, int, int, int] = (3, 4, 6, 3)
    channel_widths: tuple[int, int, int, int] = (64, 128, 256, 512)
    input_mels: int = 80
    embedding_dim: int = 256

    def __post_init__(self) -> None:
        if len(self.block_counts) != 4 or len(self.channel_widths) != 4:
            raise ValueError("block_counts and channel_widths must each have 4 entries")
        if any(c < 1 for c in self.block_counts):
            raise ValueError(f"block_counts must be positive, got {self.block_counts}")
        if any(w < 1 for w in self.channel_widths):
            raise ValueError(f"channel_widths must be positive, got {self.channel_widths}")
        if self.input_mels < 8:
            raise ValueError(f"input_mels must be >= 8, got {self.input_mels}")
        if self.embedding_dim < 1:
            raise ValueError(f"embedding_dim must be positive, got {self.embedding_dim}")

    @property
    def freq_bins_out(self) -> int:
        """Frequency bins after the three stride-2 stages."""
        bins = self.input_mels
        for _ in range(3):
            bins = (bins + 1) // 2
        return bins

    @property
    def pooled_dim(self) -> int:
        """Statistics-pooling output width (mean and std per channel)."""
        return 2 * self.channel_widths[3]


class BasicBlock(nn.Module):
    """Post-activation residual block with two 3x3 convolutions."""

    def __init__(self, in_planes: int, planes: int, stride: int = 1):
        super().__init__()
        self.conv1 = nn.Conv2d(in_planes, planes, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(planes)
        self.conv2 = nn.Conv2d(planes, planes, 3, stride=1, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(planes)
        self.downsample = None
        if stride != 1 or in_planes != planes:
            self.downsample = nn.Sequential(
                nn.Conv2d(in_planes, planes, 1, stride=stride, bias=False),
                nn.BatchNorm2d(planes),
            )

    def forward(self, x):
        identity = x if self.downsample is None else self.downsample(x)
        out = F.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return F.relu(out + identity)


class ResNetEncoder(nn.Module):
    """Maps [B, 1, n_mels, T] feature maps to [B, C4, n_mels/8, ceil(T/8)]."""

    def __init__(self, config: BackboneConfig | None = None):
        super().__init__()
        self.config = config or BackboneConfig()
        widths = self.config.channel_widths
        counts = self.config.block_counts
        self.conv1 = nn.Conv2d(1, widths[0], 3, stride=1, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(widths[0])
        self.layer1 = self._make_stage(widths[0], widths[0], counts[0], stride=1)
        self.layer2 = self._make_stage(widths[0], widths[1], counts[1], stride=2)
        self.layer3 = self._make_stage(widths[1], widths[2], counts[2], stride=2)
        self.layer4 = self._make_stage(widths[2], widths[3], counts[3], stride=2)

    @staticmethod
    def _make_stage(in_planes: int, planes: int, n_blocks: int, stride: int) -> nn.Sequential:
        blocks = [BasicBlock(in_planes, planes, stride=stride)]
        blocks += [BasicBlock(planes, planes) for _ in range(n_blocks - 1)]
        return nn.Sequential(*blocks)

    def forward(self, x, return_stages: bool = False):
        if x.dim() != 4 or x.size(1) != 1:
            raise ValueError(f"expected input [B, 1, n_mels, T], got {tuple(x.shape)}")
        out = F.relu(self.bn1(self.conv1(x)))
        stages = []
        for stage in (self.layer1, self.layer2, self.layer3, self.layer4):
            out = stage(out)
            stages.append(out)
        if return_stages:
            return out, stages
        return out


class GlobalStatsPooling(nn.Module):
    """Mean and standard deviation over all spatial positions.

    Input [B, C, H, W] pools to [B, 2C]: per-channel mean over the H*W grid
    concatenated with the population standard deviation (epsilon-stabilized).
    """

    def __init__(self, eps: float = 1e-8):
        super().__init__()
        self.eps = eps

    def forward(self, x):
        if x.dim() != 4:
            raise ValueError(f"expected [B, C, H, W], got {tuple(x.shape)}")
        flat = x.flatten(2)
        mean = flat.mean(dim=2)
        var = flat.var(dim=2, unbiased=False)
        std = torch.sqrt(var + self.eps)
        return torch.cat([mean, std], dim=1)


class ArcFaceLoss(nn.Module):
    """Additive angular margin softmax over speaker classes.

    Cosine logits between L2-normalized embeddings and class weights; the
    target class cosine is replaced by cos(theta + margin) (with the usual
    monotonic fallback past pi - margin) and everything is scaled before
    cross entropy.
    """

    def __init__(
        self,
        n_classes: int,
        embedding_dim: int = 256,
        margin: float = 0.2,
        scale: float = 32.0,
    ):
        super().__init__()
        if n_classes < 2:
            raise ValueError(f"need at least 2 classes, got {n_classes}")
        if not (0.0 <= margin < math.pi):
            raise ValueError(f"margin must be in [0, pi), got {margin}")
        if scale <= 0:
            raise ValueError(f"scale must be positive, got {scale}")
        self.n_classes = n_classes
        self.margin = margin
        self.scale = scale
        self.weight = nn.Parameter(torch.empty(n_classes, embedding_dim))
        nn.init.xavier_uniform_(self.weight)
        self.cos_m = math.cos(margin)
        self.sin_m = math.sin(margin)
        self.th = math.cos(math.pi - margin)
        self.mm = math.sin(math.pi - margin) * margin

    def cosine_logits(self, embeddings):
        """Cosine similarity of each embedding against every class weight."""
        return F.linear(F.normalize(embeddings, dim=1), F.normalize(self.weight, dim=1))

    def forward(self, embeddings, labels):
        if labels.min().item() < 0 or labels.max().item() >= self.n_classes:
            raise ValueError(
                f"labels must be in [0, {self.n_classes}), got range "
                f"[{labels.min().item()}, {labels.max().item()}]"
            )
        cosine = self.cosine_logits(embeddings)
        sine = torch.sqrt((1.0 - cosine.pow(2)).clamp(min=0.0))
        phi = cosine * self.cos_m - sine * self.sin_m
        phi = torch.where(cosine - self.th > 0, phi, cosine - self.mm)
        one_hot = torch.zeros_like(cosine)
        one_hot.scatter_(1, labels.view(-1, 1), 1.0)
        logits = self.scale * (one_hot * phi + (1.0 - one_hot) * cosine)
        return F.cross_entropy(logits, labels)


def count_parameters(module: nn.Module) -> int:
    """Total trainable parameter count."""
    return sum(p.numel() for p in module.parameters() if p.requires_grad)
