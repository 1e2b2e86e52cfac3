"""ROC curves and AUC for normality scores.

A query is flagged novel when its score is below the threshold ``t``. The
curve sweeps ``t`` over every distinct score (plus one value above all of
them) and records (false alarm rate, detection rate).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..exceptions import EmptyInput, NonFiniteScore


@dataclass
class RocResult:
    auc: float
    false_alarm: np.ndarray
    detection: np.ndarray
    n_test: int

    @property
    def error_bar(self) -> float:
        return error_bar(self.n_test)

    @property
    def curve(self) -> list[tuple[float, float]]:
        return list(zip(self.false_alarm.tolist(), self.detection.tolist()))


def error_bar(n_test: int) -> float:
    """Ballpark standard deviation of an AUC estimated on ``n_test`` points."""
    return 1.0 / math.sqrt(n_test)


def _check(scores, what):
    arr = np.asarray(scores, dtype=float).ravel()
    if arr.size == 0:
        raise EmptyInput(f"no {what} scores")
    if not np.isfinite(arr).all():
        raise NonFiniteScore(f"{what} scores contain NaN or inf")
    return arr


def roc_auc(scores_normal, scores_novel) -> RocResult:
    normal = np.sort(_check(scores_normal, "normal"))
    novel = np.sort(_check(scores_novel, "novel"))
    thresholds = np.unique(np.concatenate([normal, novel]))
    far = np.searchsorted(normal, thresholds, side="left") / normal.size
    det = np.searchsorted(novel, thresholds, side="left") / novel.size
    far = np.append(far, 1.0)
    det = np.append(det, 1.0)
    auc = float(np.sum(np.diff(far) * (det[1:] + det[:-1]) / 2.0))
    return RocResult(auc, far, det, normal.size + novel.size)


def auc_from_labels(scores, is_novel) -> float:
    scores = np.asarray(scores, dtype=float)
    is_novel = np.asarray(is_novel, dtype=bool)
    return roc_auc(scores[~is_novel], scores[is_novel]).auc
