"""Utterance manifests: record schema, JSONL IO, splits, statistics, QA.

A manifest is a list of utterance records. On disk it is JSON Lines, one
record per line, with keys matching :class:`UtteranceRecord` fields. The
``character``, ``gender`` and ``text`` fields are optional metadata and may
be null.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

DOMAIN_STAGE = "ST"
DOMAIN_SINGING = "S"
DOMAINS = (DOMAIN_STAGE, DOMAIN_SINGING)

GENDERS = ("M", "F")


class ManifestError(ValueError):
    """Raised for malformed manifests or inconsistent manifest operations."""


@dataclass(frozen=True)
class UtteranceRecord:
    """One utterance with its speaker, domain and bookkeeping metadata.

    ``domain`` is "ST" for stage speech or "S" for singing. ``audio_path``
    is relative to the corpus root unless absolute. ``character``,
    ``gender`` and ``text`` are optional and default to None.
    """

    utt_id: str
    speaker_id: str
    play_id: str
    domain: str
    duration_s: float
    audio_path: str
    character: str | None = None
    gender: str | None = None
    text: str | None = None

    def __post_init__(self) -> None:
        if not self.utt_id:
            raise ManifestError("utt_id must be non-empty")
        if not self.speaker_id:
            raise ManifestError(f"{self.utt_id}: speaker_id must be non-empty")
        if self.domain not in DOMAINS:
            raise ManifestError(
                f"{self.utt_id}: domain must be one of {DOMAINS}, got {self.domain!r}"
            )
        if not (self.duration_s > 0):
            raise ManifestError(
                f"{self.utt_id}: duration_s must be positive, got {self.duration_s!r}"
            )
        if self.gender is not None and self.gender not in GENDERS:
            raise ManifestError(
                f"{self.utt_id}: gender must be one of {GENDERS} or null, got {self.gender!r}"
            )

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False)


class Manifest:
    """An ordered collection of utterance records with unique ids."""

    def __init__(self, records: Sequence[UtteranceRecord]):
        self.records = list(records)
        seen: set[str] = set()
        for rec in self.records:
            if rec.utt_id in seen:
                raise ManifestError(f"duplicate utt_id {rec.utt_id!r}")
            seen.add(rec.utt_id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[UtteranceRecord]:
        return iter(self.records)

    def speakers(self) -> list[str]:
        """Sorted unique speaker ids."""
        return sorted({rec.speaker_id for rec in self.records})

    def by_speaker(self) -> dict[str, list[UtteranceRecord]]:
        out: dict[str, list[UtteranceRecord]] = {}
        for rec in self.records:
            out.setdefault(rec.speaker_id, []).append(rec)
        return out

    def in_domain(self, domain: str) -> "Manifest":
        if domain not in DOMAINS:
            raise ManifestError(f"unknown domain {domain!r}")
        return Manifest([rec for rec in self.records if rec.domain == domain])

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.records:
                fh.write(rec.to_json() + "\n")


def load_manifest(path: str | Path) -> Manifest:
    """Load a JSONL manifest, raising ManifestError with the offending line."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(raw, dict):
                raise ManifestError(f"{path}:{lineno}: expected a JSON object")
            try:
                records.append(UtteranceRecord(**raw))
            except TypeError as exc:
                raise ManifestError(f"{path}:{lineno}: bad record fields: {exc}") from exc
            except ManifestError as exc:
                raise ManifestError(f"{path}:{lineno}: {exc}") from exc
    return Manifest(records)


def split_by_utterance_count(
    manifest: Manifest, n_train_speakers: int
) -> tuple[Manifest, Manifest]:
    """Split into train/test by speaker, never splitting a speaker across sides.

    Speakers are ranked by total utterance count descending; the top
    ``n_train_speakers`` go to train. Ties on count break by speaker id
    ascending so the split is a pure function of the manifest.
    """
    per_speaker = manifest.by_speaker()
    if not (0 < n_train_speakers < len(per_speaker)):
        raise ManifestError(
            f"n_train_speakers must be in (0, {len(per_speaker)}), got {n_train_speakers}"
        )
    ranked = sorted(per_speaker, key=lambda spk: (-len(per_speaker[spk]), spk))
    train_set = set(ranked[:n_train_speakers])
    train = Manifest([rec for rec in manifest if rec.speaker_id in train_set])
    test = Manifest([rec for rec in manifest if rec.speaker_id not in train_set])
    return train, test


@dataclass
class DomainStats:
    n_speakers: int
    n_utterances: int
    total_hours: float
    mean_utts_per_speaker: float
    mean_utt_length_s: float


def manifest_stats(manifest: Manifest) -> dict[str, DomainStats]:
    """Per-domain corpus statistics, keyed by domain code."""
    if len(manifest) == 0:
        raise ManifestError("cannot compute statistics of an empty manifest")
    out: dict[str, DomainStats] = {}
    for domain in DOMAINS:
        recs = [rec for rec in manifest if rec.domain == domain]
        if not recs:
            continue
        speakers = {rec.speaker_id for rec in recs}
        total_s = sum(rec.duration_s for rec in recs)
        out[domain] = DomainStats(
            n_speakers=len(speakers),
            n_utterances=len(recs),
            total_hours=total_s / 3600.0,
            mean_utts_per_speaker=len(recs) / len(speakers),
            mean_utt_length_s=total_s / len(recs),
        )
    return out


def format_stats(stats: Mapping[str, DomainStats]) -> str:
    header = f"{'domain':<8}{'speakers':>9}{'utts':>8}{'hours':>9}{'utts/spk':>10}{'mean_s':>8}"
    lines = [header]
    for domain, s in stats.items():
        lines.append(
            f"{domain:<8}{s.n_speakers:>9}{s.n_utterances:>8}"
            f"{s.total_hours:>9.2f}{s.mean_utts_per_speaker:>10.2f}{s.mean_utt_length_s:>8.2f}"
        )
    return "\n".join(lines)


@dataclass
class QAFlag:
    utt_id: str
    speaker_id: str
    domain: str
    similarity: float


@dataclass
class QAReport:
    threshold: float
    n_checked: int
    flags: list[QAFlag]

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# threshold {self.threshold:.6f} checked {self.n_checked}\n")
            for flag in self.flags:
                fh.write(
                    f"{flag.utt_id}\t{flag.speaker_id}\t{flag.domain}\t{flag.similarity:.6f}\n"
                )


def quality_assess(
    manifest: Manifest,
    embeddings: Mapping[str, np.ndarray],
    threshold: float = 0.4,
) -> QAReport:
    """Flag utterances whose embedding drifts from their speaker's centroid.

    Utterances are grouped by (speaker, domain); each group's centroid is the
    mean of its raw embeddings. An utterance whose cosine similarity to its
    own centroid is strictly below ``threshold`` is flagged. Flags come back
    sorted by similarity ascending (worst first).
    """
    if not (0.0 < threshold < 1.0):
        raise ManifestError(f"threshold must be in (0, 1), got {threshold}")
    groups: dict[tuple[str, str], list[UtteranceRecord]] = {}
    for rec in manifest:
        if rec.utt_id not in embeddings:
            raise ManifestError(f"no embedding for utterance {rec.utt_id!r}")
        groups.setdefault((rec.speaker_id, rec.domain), []).append(rec)
    flags: list[QAFlag] = []
    for (speaker_id, domain), recs in groups.items():
        mat = np.stack([np.asarray(embeddings[rec.utt_id], dtype=np.float64) for rec in recs])
        centroid = mat.mean(axis=0)
        norm_c = np.linalg.norm(centroid)
        if norm_c == 0.0:
            raise ManifestError(f"zero-norm centroid for speaker {speaker_id} domain {domain}")
        for rec, emb in zip(recs, mat):
            norm_e = np.linalg.norm(emb)
            if norm_e == 0.0:
                raise ManifestError(f"zero-norm embedding for utterance {rec.utt_id!r}")
            sim = float(np.dot(emb, centroid) / (norm_e * norm_c))
            if sim < threshold:
                flags.append(QAFlag(rec.utt_id, speaker_id, domain, sim))
    flags.sort(key=lambda f: (f.similarity, f.utt_id))
    return QAReport(threshold=threshold, n_checked=len(manifest), flags=flags)
