"""Two-dimensional embedding maps for eyeballing cross-domain speaker overlap."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np
from sklearn.manifold import TSNE

from .manifest import DOMAIN_SINGING, DOMAIN_STAGE, Manifest

DOMAIN_MARKERS = {DOMAIN_STAGE: "o", DOMAIN_SINGING: "*"}


@dataclass
class ProjectionResult:
    utt_ids: list[str]
    speaker_ids: list[str]
    domains: list[str]
    coords: np.ndarray
    image_path: Path
    coords_path: Path


def project_embeddings(
    embeddings: Mapping[str, np.ndarray],
    manifest: Manifest,
    out_image: str | Path,
    n_speakers: int = 11,
    perplexity: float = 15.0,
    seed: int = 0,
    coords_path: str | Path | None = None,
) -> ProjectionResult:
    """t-SNE of a speaker subset's embeddings, colored by speaker.

    ``n_speakers`` speakers with embeddings are drawn (seeded) from the
    manifest; every embedded utterance of theirs is projected. Stage speech
    plots as circles, singing as stars. Writes the scatter image and a
    coordinates file ``<utt_id> <speaker_id> <domain> <x> <y>``; both the
    file and the returned coordinates are deterministic in (embeddings,
    manifest, seed).
    """
    covered = [r for r in manifest if r.utt_id in embeddings]
    speakers = sorted({r.speaker_id for r in covered})
    if len(speakers) < n_speakers:
        raise ValueError(
            f"need {n_speakers} speakers with embeddings, found {len(speakers)}"
        )
    rng = np.random.default_rng(seed)
    chosen = sorted(rng.choice(speakers, size=n_speakers, replace=False))
    chosen_set = set(chosen)
    recs = [r for r in covered if r.speaker_id in chosen_set]
    mat = np.stack([np.asarray(embeddings[r.utt_id], dtype=np.float64) for r in recs])
    if len(recs) <= perplexity:
        raise ValueError(f"perplexity {perplexity} needs more than {len(recs)} points")
    tsne = TSNE(
        n_components=2,
        perplexity=perplexity,
        random_state=seed,
        init="pca",
        n_jobs=1,
    )
    coords = tsne.fit_transform(mat).astype(np.float64)

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_image = Path(out_image)
    out_image.parent.mkdir(parents=True, exist_ok=True)
    cmap = plt.get_cmap("tab20")
    color_of = {spk: cmap(i % 20) for i, spk in enumerate(chosen)}
    fig, ax = plt.subplots(figsize=(8, 7))
    for spk in chosen:
        for domain, marker in DOMAIN_MARKERS.items():
            pts = np.array(
                [c for c, r in zip(coords, recs) if r.speaker_id == spk and r.domain == domain]
            )
            if len(pts) == 0:
                continue
            ax.scatter(
                pts[:, 0], pts[:, 1],
                c=[color_of[spk]], marker=marker, s=60 if marker == "*" else 36,
                label=spk if domain == DOMAIN_STAGE else None,
                edgecolors="none", alpha=0.85,
            )
    ax.legend(loc="best", fontsize=7, ncol=2, title="speaker")
    ax.set_xticks([])
    ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(out_image, dpi=150)
    plt.close(fig)

    coords_path = Path(coords_path) if coords_path else out_image.with_suffix(".coords.txt")
    with open(coords_path, "w", encoding="utf-8") as fh:
        for rec, (x, y) in zip(recs, coords):
            fh.write(f"{rec.utt_id} {rec.speaker_id} {rec.domain} {x:.6f} {y:.6f}\n")
    return ProjectionResult(
        utt_ids=[r.utt_id for r in recs],
        speaker_ids=[r.speaker_id for r in recs],
        domains=[r.domain for r in recs],
        coords=coords,
        image_path=out_image,
        coords_path=coords_path,
    )
