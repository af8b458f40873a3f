"""ROC AUC, DeLong confidence intervals, and confusion counts.

AUC uses the midrank (tie = half credit) convention throughout, which makes
the point estimate and the DeLong variance mutually consistent. The normal
quantile for the interval comes from Acklam's rational approximation of the
inverse normal CDF (|relative error| < 1.15e-9), so no statistical tables
or external libraries are needed.
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class EvalReport:
    auc: float
    ci_low: float
    ci_high: float
    ci_level: float
    threshold: float
    tp: int
    fp: int
    tn: int
    fn: int

    def to_json(self):
        return {
            "auc": self.auc,
            "ci": [self.ci_low, self.ci_high],
            "level": self.ci_level,
            "threshold": self.threshold,
            "confusion": {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn},
            "n": self.tp + self.fp + self.tn + self.fn,
        }


def midranks(x):
    """1-based midranks: tied values share the average of their positions."""
    x = np.asarray(x, dtype=float)
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x))
    i = 0
    while i < len(x):
        j = i
        while j < len(x) and x[order[j]] == x[order[i]]:
            j += 1
        ranks[order[i:j]] = (i + j + 1) / 2.0
        i = j
    return ranks


def _split_scores(scores, labels):
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("both classes must be present")
    return pos, neg


def roc_auc(scores, labels):
    """Probability a random positive outranks a random negative (ties: 1/2)."""
    pos, neg = _split_scores(scores, labels)
    m, n = len(pos), len(neg)
    ranks = midranks(np.concatenate([pos, neg]))
    return float((np.sum(ranks[:m]) - m * (m + 1) / 2.0) / (m * n))


# Acklam's inverse normal CDF approximation.
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)


def normal_quantile(p):
    """Inverse standard normal CDF via Acklam's rational approximation."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile argument must lie in (0, 1), got {p}")
    p_low, p_high = 0.02425, 1 - 0.02425
    if p < p_low:
        q = np.sqrt(-2 * np.log(p))
        return ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
                / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1))
    if p > p_high:
        q = np.sqrt(-2 * np.log(1 - p))
        return -((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
                 / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1))
    q = p - 0.5
    r = q * q
    return ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
            / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1))


def delong_ci(scores, labels, level=0.95):
    """DeLong variance and confidence interval for the AUC.

    Placement values: V10_i = (rank of positive i among all - rank among
    positives) / n_neg, V01_j symmetric. var(AUC) = S10/m + S01/n with
    sample variances S10, S01. Returns (low, high, variance); the interval
    is clipped to [0, 1] and collapses to a point when the variance is 0.
    """
    pos, neg = _split_scores(scores, labels)
    m, n = len(pos), len(neg)
    if m < 2 or n < 2:
        raise ValueError("DeLong CI needs at least 2 observations per class")
    all_ranks = midranks(np.concatenate([pos, neg]))
    v10 = (all_ranks[:m] - midranks(pos)) / n
    v01 = 1.0 - (all_ranks[m:] - midranks(neg)) / m
    auc = float(np.mean(v10))
    s10 = float(np.var(v10, ddof=1))
    s01 = float(np.var(v01, ddof=1))
    variance = s10 / m + s01 / n
    if variance <= 0:
        return auc, auc, 0.0
    z = normal_quantile(1 - (1 - level) / 2.0)
    half = z * np.sqrt(variance)
    return max(auc - half, 0.0), min(auc + half, 1.0), variance


def confusion(scores, labels, threshold=0.5):
    """(tp, fp, tn, fn) counting score >= threshold as a positive call."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    pred = scores >= threshold
    tp = int(np.sum(pred & (labels == 1)))
    fp = int(np.sum(pred & (labels == 0)))
    tn = int(np.sum(~pred & (labels == 0)))
    fn = int(np.sum(~pred & (labels == 1)))
    return tp, fp, tn, fn


def evaluate(scores, labels, level=0.95, threshold=0.5):
    auc = roc_auc(scores, labels)
    low, high, _ = delong_ci(scores, labels, level)
    tp, fp, tn, fn = confusion(scores, labels, threshold)
    return EvalReport(
        auc=auc, ci_low=low, ci_high=high, ci_level=level,
        threshold=threshold, tp=tp, fp=fp, tn=tn, fn=fn,
    )
