"""Plug-in mutual information and the functional CMI generalization bound."""

import math
from dataclasses import dataclass, field

import numpy as np


def _codes(values):
    arr = np.asarray(values)
    if arr.ndim == 1:
        _, inv = np.unique(arr, return_inverse=True)
    else:
        _, inv = np.unique(arr.reshape(arr.shape[0], -1), axis=0, return_inverse=True)
    return inv.ravel()


def plugin_mi(symbols, u_bits):
    """Plug-in estimate of I(symbol; u) in nats from paired observations.

    ``symbols`` may be a 1-D array of labels or a 2-D array whose rows are
    treated as composite symbols (e.g. predicted-label pairs).
    """
    if len(symbols) == 0:
        raise ValueError("plug-in MI needs at least one observation")
    if len(symbols) != len(u_bits):
        raise ValueError(f"{len(symbols)} symbols for {len(u_bits)} selector bits")
    a = _codes(symbols)
    b = _codes(u_bits)
    joint = np.zeros((a.max() + 1, b.max() + 1))
    np.add.at(joint, (a, b), 1.0)
    joint /= joint.sum()
    pa = joint.sum(axis=1, keepdims=True)
    pb = joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    mi = float(np.sum(joint[nz] * np.log(joint[nz] / (pa @ pb)[nz])))
    return max(mi, 0.0)


def per_index_mi(masks, pred_left, pred_right):
    """Plug-in MI between each pair's predicted-label pair and its selector bit.

    All three arguments are (runs, n) arrays collected over repeated trainings
    on one supersample with fresh selectors.
    """
    masks = np.asarray(masks)
    pred_left = np.asarray(pred_left)
    pred_right = np.asarray(pred_right)
    if not masks.shape == pred_left.shape == pred_right.shape or masks.ndim != 2:
        raise ValueError("masks and predictions must share a (runs, n) shape")
    return np.array(
        [
            plugin_mi(np.column_stack([pred_left[:, i], pred_right[:, i]]), masks[:, i])
            for i in range(masks.shape[1])
        ]
    )


def fcmi_bound(total_cmi, n):
    """Expected-generalization-gap bound ``sqrt(2 * I / n)`` for a [0, 1] loss."""
    return math.sqrt(2.0 * max(total_cmi, 0.0) / n)


@dataclass
class FcmiEstimate:
    per_supersample: list  # mean per-index MI (nats) for each supersample
    n: int
    k1: int
    k2: int
    per_index: list = field(default_factory=list, repr=False)

    @property
    def mean_mi(self):
        """Average per-index MI, at most ln 2."""
        return float(np.mean(self.per_supersample))

    @property
    def total_cmi(self):
        """Estimated CMI summed over the ``n`` indices."""
        return self.n * self.mean_mi

    @property
    def bound(self):
        return fcmi_bound(self.total_cmi, self.n)

    def to_dict(self):
        return {
            "n": self.n,
            "k1": self.k1,
            "k2": self.k2,
            "per_supersample_mi": [float(v) for v in self.per_supersample],
            "mean_mi": self.mean_mi,
            "total_cmi": self.total_cmi,
            "bound": self.bound,
        }
