"""Contrastive Siamese training over same-speaker cross-domain pairs.

Each training batch pairs a singing utterance and a stage-speech utterance
of the same speaker. Both sides pass through the one shared network; the
per-utterance objectives are summed and the pair term pulls the two
identity embeddings together:

    L = L_utt_S + L_utt_ST + lambda * L_pair,   L_pair = 1 - cos(z_ST, z_S)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .ddal import LossError
from .manifest import DOMAIN_SINGING, DOMAIN_STAGE, Manifest, UtteranceRecord


@dataclass
class BCSTConfig:
    enabled: bool = False
    lambda_weight: float = 0.5

    def __post_init__(self) -> None:
        if self.lambda_weight < 0:
            raise ValueError(f"lambda_weight must be >= 0, got {self.lambda_weight}")


def eligible_speakers(manifest: Manifest) -> list[str]:
    """Speakers with at least one utterance in each domain, sorted."""
    st = {r.speaker_id for r in manifest if r.domain == DOMAIN_STAGE}
    s = {r.speaker_id for r in manifest if r.domain == DOMAIN_SINGING}
    return sorted(st & s)


def sample_pairs(
    manifest: Manifest,
    batch_size: int,
    rng: np.random.Generator,
) -> list[tuple[UtteranceRecord, UtteranceRecord]]:
    """Draw ``batch_size`` (stage-speech, singing) same-speaker pairs.

    Speakers are drawn uniformly with replacement from those present in both
    domains; one utterance per domain is then drawn uniformly from that
    speaker's utterances. Raises if no speaker spans both domains.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    speakers = eligible_speakers(manifest)
    if not speakers:
        raise ValueError("no speaker has utterances in both domains")
    by_speaker = manifest.by_speaker()
    pairs = []
    chosen = rng.choice(len(speakers), size=batch_size, replace=True)
    for idx in chosen:
        recs = by_speaker[speakers[int(idx)]]
        st_recs = [r for r in recs if r.domain == DOMAIN_STAGE]
        s_recs = [r for r in recs if r.domain == DOMAIN_SINGING]
        st = st_recs[int(rng.integers(0, len(st_recs)))]
        s = s_recs[int(rng.integers(0, len(s_recs)))]
        pairs.append((st, s))
    return pairs


def pair_loss(z_st: torch.Tensor, z_s: torch.Tensor, eps: float = 1e-8) -> torch.Tensor:
    """Mean over the batch of 1 - cosine(z_ST, z_S).

    Zero for identical embeddings, 1 for orthogonal, 2 for opposite; scale
    invariant in either argument. Norms are clamped at ``eps`` to keep the
    loss finite for degenerate embeddings.
    """
    if z_st.shape != z_s.shape:
        raise ValueError(f"shape mismatch: {tuple(z_st.shape)} vs {tuple(z_s.shape)}")
    if z_st.dim() != 2:
        raise ValueError(f"expected [B, D] embeddings, got {tuple(z_st.shape)}")
    dot = (z_st * z_s).sum(dim=1)
    denom = (z_st.norm(dim=1) * z_s.norm(dim=1)).clamp(min=eps)
    return (1.0 - dot / denom).mean()


def bcst_total(
    l_utt_s: torch.Tensor,
    l_utt_st: torch.Tensor,
    l_pair: torch.Tensor,
    lambda_weight: float,
) -> torch.Tensor:
    """Composite objective L_utt_S + L_utt_ST + lambda * L_pair."""
    for name, value in (("L_uttS", l_utt_s), ("L_uttST", l_utt_st), ("L_pair", l_pair)):
        if not torch.isfinite(value).all():
            raise LossError(f"{name} is non-finite: {value}")
    return l_utt_s + l_utt_st + lambda_weight * l_pair
