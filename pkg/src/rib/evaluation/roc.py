"""AUC, ROC curves, recognizability and achievable regions."""

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata


def _scores(pos, neg):
    pos = np.asarray(pos, dtype=np.float64).ravel()
    neg = np.asarray(neg, dtype=np.float64).ravel()
    if pos.size == 0 or neg.size == 0:
        raise ValueError("both score sets must be non-empty")
    return pos, neg


def auc_roc(pos_scores, neg_scores):
    """Mann-Whitney AUC: P(pos > neg) + 0.5 * P(pos == neg).

    Computed from mid-ranks; ranks are half-integers, so the result is the
    exact pairwise count divided by ``len(pos) * len(neg)``.
    """
    pos, neg = _scores(pos_scores, neg_scores)
    ranks = rankdata(np.concatenate([pos, neg]))
    m = pos.size
    u = ranks[:m].sum() - m * (m + 1) / 2.0
    return float(u / (m * neg.size))


def recognizability(pos_scores, neg_scores):
    """Area of the achievable region, ``2 * max(auc, 1 - auc) - 1``."""
    auc = auc_roc(pos_scores, neg_scores)
    return 2.0 * max(auc, 1.0 - auc) - 1.0


@dataclass
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray  # thresholds[k] produced point k+1; point 0 is (0, 0)

    @property
    def points(self):
        return np.column_stack([self.fpr, self.tpr])

    def area(self):
        """Trapezoidal area under the curve."""
        return float(np.sum(np.diff(self.fpr) * (self.tpr[1:] + self.tpr[:-1])) / 2.0)


def roc_curve(pos_scores, neg_scores):
    """Empirical ROC of the rule "predict positive when score >= threshold".

    One point per distinct score, from (0, 0) to (1, 1); tied positive and
    negative scores produce a diagonal segment, so the trapezoidal area
    equals :func:`auc_roc`.
    """
    pos, neg = _scores(pos_scores, neg_scores)
    thresholds = np.unique(np.concatenate([pos, neg]))[::-1]
    pos_sorted, neg_sorted = np.sort(pos), np.sort(neg)
    # counts of scores >= each threshold
    tp = pos.size - np.searchsorted(pos_sorted, thresholds, side="left")
    fp = neg.size - np.searchsorted(neg_sorted, thresholds, side="left")
    fpr = np.concatenate([[0.0], fp / neg.size])
    tpr = np.concatenate([[0.0], tp / pos.size])
    return RocCurve(fpr, tpr, thresholds)


def polygon_area(points):
    """Shoelace area of a closed polygon given as an (k, 2) vertex array."""
    x, y = np.asarray(points, dtype=np.float64).T
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def achievable_region(curve):
    """Polygon bounded by the ROC curve and its reflection through (1/2, 1/2).

    Vertices run along the curve from (0, 0) to (1, 1) and back along the
    reflected curve; the polygon is implicitly closed.
    """
    pts = curve.points
    reflected = 1.0 - pts[1:-1]
    return np.vstack([pts, reflected])


def convex_hull_curve(curve):
    """Upper convex hull of the ROC points (the ROC convex hull)."""
    pts = sorted(set(map(tuple, curve.points)))
    hull = []
    for p in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1) >= 0:
                hull.pop()
            else:
                break
        hull.append(p)
    hull = np.array(hull)
    return RocCurve(hull[:, 0], hull[:, 1], np.full(len(hull) - 1, np.nan))
