"""Assembled verification network: encoder, heads, and training losses."""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn

from .ddal import DDALConfig, DomainClassifier, grad_reverse, make_gate
from .model import ArcFaceLoss, BackboneConfig, GlobalStatsPooling, ResNetEncoder, count_parameters

DOMAIN_INDEX = {"ST": 0, "S": 1}


@dataclass
class TrainOutputs:
    """Per-batch training outputs; classifier losses are None without DDAL."""

    z_id: torch.Tensor
    z_domain: torch.Tensor | None
    l_id: torch.Tensor
    l_cls1: torch.Tensor | None
    l_cls2: torch.Tensor | None


class VerificationNet(nn.Module):
    """Speaker embedding network with optional domain disentanglement.

    The shared modules (encoder, pooling, identity head, margin loss) are
    constructed before any domain-branch modules, so two networks built
    under the same torch seed share bitwise-identical initial weights for
    the shared part regardless of the DDAL variant.
    """

    def __init__(
        self,
        n_speakers: int,
        backbone: BackboneConfig | None = None,
        ddal: DDALConfig | None = None,
        margin: float = 0.2,
        scale: float = 32.0,
    ):
        super().__init__()
        self.backbone_config = backbone or BackboneConfig()
        self.ddal_config = ddal or DDALConfig()
        self.n_speakers = n_speakers
        cfg = self.backbone_config
        self.encoder = ResNetEncoder(cfg)
        self.pooling = GlobalStatsPooling()
        self.id_head = nn.Linear(cfg.pooled_dim, cfg.embedding_dim)
        self.margin_loss = ArcFaceLoss(
            n_speakers, embedding_dim=cfg.embedding_dim, margin=margin, scale=scale
        )
        self.gate = None
        self.domain_head = None
        self.domain_cls1 = None
        self.domain_cls2 = None
        if self.ddal_config.enabled:
            self.gate = make_gate(
                self.ddal_config.variant, cfg.channel_widths[3], cfg.freq_bins_out
            )
            self.domain_head = nn.Linear(cfg.pooled_dim, cfg.embedding_dim)
            self.domain_cls1 = DomainClassifier(cfg.embedding_dim)
            self.domain_cls2 = DomainClassifier(cfg.embedding_dim)
        self.domain_ce = nn.CrossEntropyLoss()

    def _split(self, f: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor | None]:
        """Identity / domain feature maps per the configured branch wiring."""
        if not self.ddal_config.enabled:
            return f, None
        if self.ddal_config.detach_branches:
            attention = self.gate(f.detach())
            return f, attention * f.detach()
        if self.ddal_config.backbone_grad_from_cls1:
            attention = self.gate(f)
            f_domain = attention * f
        else:
            f_stop = f.detach()
            attention = self.gate(f_stop)
            f_domain = attention * f_stop
        return f - f_domain, f_domain

    def embed(self, feats: torch.Tensor) -> torch.Tensor:
        """Identity embedding for scoring, [B, embedding_dim]."""
        f = self.encoder(feats)
        f_id, _ = self._split(f)
        return self.id_head(self.pooling(f_id))

    def train_embeddings(self, feats: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor | None]:
        """Identity and domain embeddings from one encoder pass."""
        f = self.encoder(feats)
        f_id, f_domain = self._split(f)
        z_id = self.id_head(self.pooling(f_id))
        if f_domain is None:
            return z_id, None
        return z_id, self.domain_head(self.pooling(f_domain))

    def losses_from_embeddings(
        self,
        z_id: torch.Tensor,
        z_domain: torch.Tensor | None,
        speaker_labels: torch.Tensor,
        domain_labels: torch.Tensor | None,
    ) -> TrainOutputs:
        """Per-batch losses over (a slice of) train_embeddings output."""
        l_id = self.margin_loss(z_id, speaker_labels)
        if not self.ddal_config.enabled:
            return TrainOutputs(z_id=z_id, z_domain=None, l_id=l_id, l_cls1=None, l_cls2=None)
        if domain_labels is None or z_domain is None:
            raise ValueError("domain labels and embeddings required when disentanglement is enabled")
        l_cls1 = self.domain_ce(self.domain_cls1(z_domain), domain_labels)
        z_for_adv = z_id.detach() if self.ddal_config.detach_branches else z_id
        reversed_z = grad_reverse(z_for_adv, self.ddal_config.grl_scale)
        l_cls2 = self.domain_ce(self.domain_cls2(reversed_z), domain_labels)
        return TrainOutputs(z_id=z_id, z_domain=z_domain, l_id=l_id, l_cls1=l_cls1, l_cls2=l_cls2)

    def forward_train(
        self,
        feats: torch.Tensor,
        speaker_labels: torch.Tensor,
        domain_labels: torch.Tensor | None = None,
    ) -> TrainOutputs:
        z_id, z_domain = self.train_embeddings(feats)
        return self.losses_from_embeddings(z_id, z_domain, speaker_labels, domain_labels)

    def extractor_modules(self) -> dict[str, nn.Module]:
        """Modules that make up the deployable embedding extractor."""
        mods: dict[str, nn.Module] = {
            "encoder": self.encoder,
            "pooling": self.pooling,
            "id_head": self.id_head,
        }
        if self.gate is not None:
            mods["gate"] = self.gate
        if self.domain_head is not None:
            mods["domain_head"] = self.domain_head
        return mods

    def extractor_parameter_count(self) -> int:
        """Parameters of the embedding extractor.

        Counts the encoder, pooling, identity head, and (when present) the
        attention gate and domain projection head. The margin-loss class
        weights and the two small domain classifiers are training-only and
        excluded.
        """
        return sum(count_parameters(m) for m in self.extractor_modules().values())


def domain_label_tensor(domains: list[str]) -> torch.Tensor:
    """Map domain codes to class indices (ST -> 0, S -> 1)."""
    try:
        return torch.tensor([DOMAIN_INDEX[d] for d in domains], dtype=torch.long)
    except KeyError as exc:
        raise ValueError(f"unknown domain code {exc.args[0]!r}") from exc
