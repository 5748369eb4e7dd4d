"""Evaluation metrics: RMSE (overall, per score interval, per video),
classification accuracy, Pearson correlation, and the inter-rater agreement
coefficients ICC(2,1)/ICC(2,k) and Krippendorff's alpha (interval metric).

Undefined results (empty bin, zero variance, zero expected disagreement)
come back as NaN; report serialisation turns those into explicit nulls.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DataError

Array = np.ndarray

# Score intervals, binned by truth. Outer bins are open-ended so the four
# bins partition the whole axis; the nominal ranges are CP 0..100, GI 0..4.
CP_BINS = (
    ("CP < 55%", -math.inf, 55.0),
    ("55% <= CP < 75%", 55.0, 75.0),
    ("75% <= CP < 90%", 75.0, 90.0),
    ("CP >= 90%", 90.0, math.inf),
)
# the printed intervals leave GI = 3.8 exactly uncovered ("< 3.8" then
# "> 3.8"); it joins the third bin here so the bins partition the axis
_ABOVE_38 = math.nextafter(3.8, math.inf)
GI_BINS = (
    ("GI < 1.8", -math.inf, 1.8),
    ("1.8 <= GI < 2.8", 1.8, 2.8),
    ("2.8 <= GI <= 3.8", 2.8, _ABOVE_38),
    ("GI > 3.8", _ABOVE_38, math.inf),
)


def rmse(pred, truth) -> float:
    """Root mean square error; 0 iff the sequences are elementwise equal."""
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if p.shape != t.shape:
        raise DataError(f"length mismatch: {p.shape} vs {t.shape}")
    if p.size == 0:
        raise DataError("rmse of empty input")
    d = p - t
    return float(np.sqrt(np.mean(d * d)))


@dataclass
class IntervalBin:
    label: str
    count: int
    rmse: float  # NaN when the bin is empty


def interval_rmse(pred, truth, metric: str = "cp") -> list[IntervalBin]:
    """RMSE per score interval, samples binned by their truth value."""
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if p.shape != t.shape:
        raise DataError(f"length mismatch: {p.shape} vs {t.shape}")
    if p.size == 0:
        raise DataError("interval_rmse of empty input")
    bins = CP_BINS if metric == "cp" else GI_BINS
    out = []
    for label, lo, hi in bins:
        mask = (t >= lo) & (t < hi)
        if mask.any():
            out.append(IntervalBin(label, int(mask.sum()), rmse(p[mask], t[mask])))
        else:
            out.append(IntervalBin(label, 0, math.nan))
    return out


@dataclass
class GroupedStats:
    rmse: float
    mean_sigma: float
    rows: list[tuple[str, float, float, float]]  # (video_id, truth, mean_pred, sigma)


def grouped_video_stats(frame_preds: dict[str, Array], video_truth: dict[str, float]) -> GroupedStats:
    """Per-video averaging of frame predictions.

    The video estimate is the mean frame prediction; sigma is the population
    standard deviation within the video. Returns the RMSE of the video
    estimates against the video truths and the mean sigma over videos.
    """
    rows = []
    means = []
    truths = []
    sigmas = []
    for video_id, preds in frame_preds.items():
        if video_id not in video_truth:
            raise DataError(f"unknown video key {video_id!r}")
        preds = np.asarray(preds, dtype=np.float64)
        if preds.size == 0:
            raise DataError(f"video {video_id!r} has no frame predictions")
        mean = float(preds.mean())
        sigma = float(preds.std())
        rows.append((video_id, float(video_truth[video_id]), mean, sigma))
        means.append(mean)
        truths.append(video_truth[video_id])
        sigmas.append(sigma)
    return GroupedStats(
        rmse=rmse(means, truths),
        mean_sigma=float(np.mean(sigmas)),
        rows=rows,
    )


def accuracy(pred_classes, true_classes) -> float:
    p = np.asarray(pred_classes)
    t = np.asarray(true_classes)
    if p.shape != t.shape:
        raise DataError(f"length mismatch: {p.shape} vs {t.shape}")
    if p.size == 0:
        raise DataError("accuracy of empty input")
    return float(np.mean(p == t))


def pearson(x, y) -> float:
    """Sample Pearson correlation; NaN when either variance is zero."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DataError(f"length mismatch: {x.shape} vs {y.shape}")
    if x.size < 2:
        raise DataError("pearson needs at least 2 samples")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float((dx * dx).sum())
    sy = float((dy * dy).sum())
    if sx == 0.0 or sy == 0.0:
        return math.nan
    return float((dx * dy).sum() / math.sqrt(sx * sy))


def _check_ratings(matrix) -> Array:
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 2 or m.shape[1] < 2:
        raise DataError(f"ratings matrix must be (n>=2, k>=2), got {m.shape}")
    return m


def icc(matrix) -> tuple[float, float]:
    """Two-way random-effects agreement: (ICC(2,1), ICC(2,k)).

    Mean squares come from the usual subject/rater/residual decomposition:
      ICC(2,1) = (MSR-MSE) / (MSR + (k-1) MSE + k (MSC-MSE)/n)
      ICC(2,k) = (MSR-MSE) / (MSR + (MSC-MSE)/n)
    NaN when the between-subject variance is zero.
    """
    m = _check_ratings(matrix)
    n, k = m.shape
    grand = m.mean()
    row_dev = m.mean(axis=1) - grand
    col_dev = m.mean(axis=0) - grand
    ssr = k * float((row_dev * row_dev).sum())
    ssc = n * float((col_dev * col_dev).sum())
    sst = float(((m - grand) ** 2).sum())
    sse = sst - ssr - ssc
    if ssr == 0.0:
        return math.nan, math.nan
    msr = ssr / (n - 1)
    msc = ssc / (k - 1)
    mse = sse / ((n - 1) * (k - 1))
    icc21 = (msr - mse) / (msr + (k - 1) * mse + k * (msc - mse) / n)
    icc2k = (msr - mse) / (msr + (msc - mse) / n)
    return float(icc21), float(icc2k)


def krippendorff_alpha(matrix) -> float:
    """Interval-metric Krippendorff's alpha, alpha = 1 - D_o / D_e.

    Every unit (row) is rated by all k raters, so the coincidence counts
    reduce to within-row pair sums with weight 1/(k-1); the expected
    disagreement pairs every value with every other value. The squared
    difference delta(v, v') = (v - v')^2 is the interval metric.
    """
    m = _check_ratings(matrix)
    n, k = m.shape
    total = n * k
    obs = 0.0
    for row in m:
        s = float(row.sum())
        sq = float((row * row).sum())
        pair_sum = 2.0 * (k * sq - s * s)  # sum over ordered pairs of (a-b)^2
        obs += pair_sum / (k - 1)
    allv = m.ravel()
    s = float(allv.sum())
    sq = float((allv * allv).sum())
    exp_sum = 2.0 * (total * sq - s * s)
    if exp_sum == 0.0:
        return math.nan
    # alpha = 1 - (obs/total) / (exp/(total*(total-1)))
    return 1.0 - obs * (total - 1) / exp_sum


@dataclass
class MetricsReport:
    """Everything one evaluation or agreement run reports, JSON-serialisable."""

    target: Optional[str] = None
    overall_rmse: Optional[float] = None
    interval_rmse: Optional[list[IntervalBin]] = None
    grouped_rmse: Optional[float] = None
    grouped_mean_sigma: Optional[float] = None
    view_accuracy: Optional[float] = None
    pearson_cp_gi: Optional[float] = None
    per_view_agreement: Optional[dict] = None
    pooled_agreement: Optional[dict] = None
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        def scrub(value):
            if isinstance(value, float) and not math.isfinite(value):
                return None
            if isinstance(value, dict):
                return {k: scrub(v) for k, v in value.items()}
            if isinstance(value, (list, tuple)):
                return [scrub(v) for v in value]
            if isinstance(value, IntervalBin):
                return {
                    "label": value.label,
                    "count": value.count,
                    "rmse": scrub(value.rmse),
                    "defined": bool(value.count > 0),
                }
            return value

        doc = {
            "target": self.target,
            "overall_rmse": scrub(self.overall_rmse),
            "interval_rmse": scrub(self.interval_rmse),
            "grouped_rmse": scrub(self.grouped_rmse),
            "grouped_mean_sigma": scrub(self.grouped_mean_sigma),
            "view_accuracy": scrub(self.view_accuracy),
            "pearson_cp_gi": scrub(self.pearson_cp_gi),
            "per_view_agreement": scrub(self.per_view_agreement),
            "pooled_agreement": scrub(self.pooled_agreement),
        }
        doc.update(scrub(self.extra))
        return json.dumps(doc, indent=2) + "\n"
