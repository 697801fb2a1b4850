"""Verification trial construction, scoring, and the trial/score file formats.

Four evaluation scenarios govern which utterances may enroll and test:

    undiff  both sides drawn from the full test set
    st      both sides stage speech
    s       both sides singing
    cross   enroll on singing, test on stage speech

Trial files are whitespace-separated lines ``<label> <enroll> <test>`` with
label 1 for same-speaker; score files are ``<enroll> <test> <score>``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .manifest import DOMAIN_SINGING, DOMAIN_STAGE, Manifest
from .metrics import DCFConfig, compute_eer, compute_mdcf, cosine_score

SCENARIOS = ("undiff", "st", "s", "cross")


class TrialError(ValueError):
    """Raised for unbuildable scenarios or malformed trial/score files."""


@dataclass(frozen=True)
class TrialPair:
    enroll_utt: str
    test_utt: str
    is_target: bool


def _pools(manifest: Manifest, scenario: str):
    if scenario == "undiff":
        enroll = list(manifest)
        test = list(manifest)
    elif scenario == "st":
        enroll = [r for r in manifest if r.domain == DOMAIN_STAGE]
        test = enroll
    elif scenario == "s":
        enroll = [r for r in manifest if r.domain == DOMAIN_SINGING]
        test = enroll
    elif scenario == "cross":
        enroll = [r for r in manifest if r.domain == DOMAIN_SINGING]
        test = [r for r in manifest if r.domain == DOMAIN_STAGE]
    else:
        raise TrialError(f"unknown scenario {scenario!r}, expected one of {SCENARIOS}")
    if not enroll or not test:
        raise TrialError(f"scenario {scenario!r}: empty enrollment or test pool")
    return enroll, test


def build_trials(
    manifest: Manifest,
    scenario: str,
    n_target: int = 5,
    n_nontarget: int = 5,
    seed: int = 0,
) -> list[TrialPair]:
    """Sample verification trials for one scenario.

    For every utterance in the scenario's test pool, up to ``n_target``
    same-speaker and ``n_nontarget`` different-speaker enrollment utterances
    are drawn without replacement from the enrollment pool; the test
    utterance itself is never its own enrollment. Fewer candidates than the
    cap yields fewer trials, never duplicates. Deterministic in (manifest,
    scenario, seed): targets are drawn before nontargets for each test
    utterance, in manifest order.
    """
    if n_target < 0 or n_nontarget < 0:
        raise TrialError("trial counts must be non-negative")
    enroll_pool, test_pool = _pools(manifest, scenario)
    rng = np.random.default_rng(seed)
    trials: list[TrialPair] = []
    for test_rec in test_pool:
        same = [
            r for r in enroll_pool
            if r.speaker_id == test_rec.speaker_id and r.utt_id != test_rec.utt_id
        ]
        diff = [r for r in enroll_pool if r.speaker_id != test_rec.speaker_id]
        for pool, count, label in ((same, n_target, True), (diff, n_nontarget, False)):
            k = min(count, len(pool))
            if k == 0:
                continue
            picks = rng.choice(len(pool), size=k, replace=False)
            for idx in sorted(int(i) for i in picks):
                trials.append(TrialPair(pool[idx].utt_id, test_rec.utt_id, label))
    return trials


def trial_path(base: str | Path, scenario: str) -> Path:
    if scenario not in SCENARIOS:
        raise TrialError(f"unknown scenario {scenario!r}")
    base = Path(base)
    return base.parent / f"{base.name}.{scenario}.trials"


def save_trials(trials: Sequence[TrialPair], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for t in trials:
            fh.write(f"{int(t.is_target)} {t.enroll_utt} {t.test_utt}\n")


def load_trials(path: str | Path) -> list[TrialPair]:
    trials = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 3 or parts[0] not in ("0", "1"):
                raise TrialError(f"{path}:{lineno}: expected '<0|1> <enroll> <test>'")
            trials.append(TrialPair(parts[1], parts[2], parts[0] == "1"))
    if not trials:
        raise TrialError(f"{path}: no trials")
    return trials


def score_trials(
    trials: Sequence[TrialPair],
    embeddings: Mapping[str, np.ndarray],
) -> np.ndarray:
    """Cosine score for every trial, in trial order."""
    scores = np.empty(len(trials), dtype=np.float64)
    for i, t in enumerate(trials):
        for utt in (t.enroll_utt, t.test_utt):
            if utt not in embeddings:
                raise TrialError(f"no embedding for utterance {utt!r}")
        scores[i] = cosine_score(embeddings[t.enroll_utt], embeddings[t.test_utt])
    return scores


def save_scores(trials: Sequence[TrialPair], scores: np.ndarray, path: str | Path) -> None:
    if len(trials) != len(scores):
        raise TrialError(f"{len(trials)} trials but {len(scores)} scores")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for t, s in zip(trials, scores):
            fh.write(f"{t.enroll_utt} {t.test_utt} {s:.6f}\n")


def load_scores(path: str | Path) -> dict[tuple[str, str], float]:
    scores: dict[tuple[str, str], float] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 3:
                raise TrialError(f"{path}:{lineno}: expected '<enroll> <test> <score>'")
            try:
                scores[(parts[0], parts[1])] = float(parts[2])
            except ValueError as exc:
                raise TrialError(f"{path}:{lineno}: bad score {parts[2]!r}") from exc
    if not scores:
        raise TrialError(f"{path}: no scores")
    return scores


@dataclass
class EvalResult:
    eer: float
    min_dcf: float
    n_target: int
    n_nontarget: int


def evaluate_trials(
    trials: Sequence[TrialPair],
    scores_by_pair: Mapping[tuple[str, str], float],
    dcf: DCFConfig | None = None,
) -> EvalResult:
    """EER and minimum DCF of scored trials; every trial must have a score."""
    missing = [
        (t.enroll_utt, t.test_utt)
        for t in trials
        if (t.enroll_utt, t.test_utt) not in scores_by_pair
    ]
    if missing:
        shown = ", ".join(f"{e}/{t}" for e, t in missing[:5])
        raise TrialError(f"{len(missing)} trials lack scores (first: {shown})")
    scores = np.array([scores_by_pair[(t.enroll_utt, t.test_utt)] for t in trials])
    labels = np.array([int(t.is_target) for t in trials])
    return EvalResult(
        eer=compute_eer(scores, labels),
        min_dcf=compute_mdcf(scores, labels, dcf),
        n_target=int(labels.sum()),
        n_nontarget=int((1 - labels).sum()),
    )
