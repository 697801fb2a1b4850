"""Shared fixtures: a small generated corpus and a reduced backbone.

The corpus fixtures are session-scoped because waveform synthesis and
feature extraction dominate test runtime; every test treats them as
read-only.
"""

from pathlib import Path

import pytest
import torch

from crossvocal.manifest import Manifest, UtteranceRecord
from crossvocal.model import BackboneConfig
from crossvocal.toy import ToyCorpusSpec, gen_toy_corpus

torch.set_num_threads(1)


TINY_BACKBONE = BackboneConfig(
    block_counts=(1, 1, 1, 1),
    channel_widths=(4, 8, 16, 32),
    embedding_dim=16,
)


@pytest.fixture(scope="session")
def tiny_backbone() -> BackboneConfig:
    return TINY_BACKBONE


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory) -> tuple[Path, Manifest]:
    """6 speakers x 3 utterances per domain, short files."""
    root = tmp_path_factory.mktemp("tiny_corpus")
    spec = ToyCorpusSpec(
        n_speakers=6,
        utts_per_domain=3,
        duration_range=(0.8, 1.1),
        seed=11,
    )
    manifest = gen_toy_corpus(spec, root)
    return root, manifest


def make_manifest(entries, tmp_dir: Path | None = None) -> Manifest:
    """Build an in-memory manifest from (utt_id, speaker_id, domain) or
    (utt_id, speaker_id, domain, duration_s) tuples. Audio paths point at
    files that need not exist unless a test reads them.
    """
    records = []
    for entry in entries:
        utt_id, speaker_id, domain = entry[:3]
        duration = entry[3] if len(entry) > 3 else 2.0
        records.append(
            UtteranceRecord(
                utt_id=utt_id,
                speaker_id=speaker_id,
                play_id="play0",
                domain=domain,
                duration_s=duration,
                audio_path=f"wav/{utt_id}.wav",
            )
        )
    return Manifest(records)
