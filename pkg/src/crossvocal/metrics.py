"""Verification scoring and detection metrics: cosine, EER, minimum DCF."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MetricError(ValueError):
    """Raised for degenerate metric inputs."""


def cosine_score(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity between two embedding vectors.

    Raises MetricError on zero-norm input rather than returning NaN.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise MetricError(f"dimension mismatch: {a.shape} vs {b.shape}")
    norm_a = np.linalg.norm(a)
    norm_b = np.linalg.norm(b)
    if norm_a == 0.0 or norm_b == 0.0:
        raise MetricError("cosine of a zero-norm embedding is undefined")
    return float(np.dot(a, b) / (norm_a * norm_b))


def _as_score_label_arrays(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel().astype(np.int64)
    if scores.shape != labels.shape:
        raise MetricError(f"scores and labels differ in length: {scores.shape} vs {labels.shape}")
    if scores.size == 0:
        raise MetricError("no trials given")
    if not np.all(np.isfinite(scores)):
        raise MetricError("scores contain non-finite values")
    if not np.all((labels == 0) | (labels == 1)):
        raise MetricError("labels must be 0 (nontarget) or 1 (target)")
    if labels.min() == labels.max():
        raise MetricError("need both target and nontarget trials")
    return scores, labels


def operating_points(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    """False-accept and false-reject rates swept over all decision thresholds.

    Decisions are accept iff score >= threshold. Thresholds sweep from below
    the minimum score (FAR 1, FRR 0) up past the maximum (FAR 0, FRR 1),
    adding one operating point after each distinct score value. FAR is
    non-increasing and FRR non-decreasing along the returned arrays.
    """
    scores, labels = _as_score_label_arrays(scores, labels)
    order = np.argsort(scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    n_target = int(sorted_labels.sum())
    n_nontarget = sorted_labels.size - n_target
    cum_target = np.cumsum(sorted_labels)
    cum_nontarget = np.cumsum(1 - sorted_labels)
    # last index of each tie group: thresholds just above that score
    boundaries = np.nonzero(np.diff(sorted_scores, append=np.inf) > 0)[0]
    frr = np.concatenate([[0.0], cum_target[boundaries] / n_target])
    far = np.concatenate([[1.0], (n_nontarget - cum_nontarget[boundaries]) / n_nontarget])
    return far, frr


def compute_eer(scores, labels) -> float:
    """Equal error rate via linear interpolation between the two operating
    points that bracket the FAR = FRR crossing. Returned as a fraction."""
    far, frr = operating_points(scores, labels)
    k = int(np.argmax(frr >= far))
    if frr[k] == far[k]:
        return float(far[k])
    d1 = far[k - 1] - frr[k - 1]
    d2 = frr[k] - far[k]
    alpha = d1 / (d1 + d2)
    return float((1.0 - alpha) * far[k - 1] + alpha * far[k])


@dataclass
class DCFConfig:
    p_target: float = 0.01
    c_miss: float = 1.0
    c_fa: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 < self.p_target < 1.0):
            raise MetricError(f"p_target must be in (0, 1), got {self.p_target}")
        if self.c_miss <= 0 or self.c_fa <= 0:
            raise MetricError("costs must be positive")


def compute_mdcf(scores, labels, config: DCFConfig | None = None) -> float:
    """Minimum detection cost over all thresholds, normalized by the better
    of the always-accept / always-reject trivial systems."""
    cfg = config or DCFConfig()
    far, frr = operating_points(scores, labels)
    costs = cfg.c_miss * cfg.p_target * frr + cfg.c_fa * (1.0 - cfg.p_target) * far
    floor = min(cfg.c_miss * cfg.p_target, cfg.c_fa * (1.0 - cfg.p_target))
    return float(costs.min() / floor)
