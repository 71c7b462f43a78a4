"""Recognizability of representations, estimated with a freshly trained critic.

Given aligned pairs (member ``i``, non-member ``i``) of representations, a
critic is fit on one fold of pairs to separate member-first concatenations
from selector-randomized ones, and scored on the other fold (and vice
versa). The pooled held-out scores give the AUC, the recognizability and the
achievable region.
"""

from dataclasses import dataclass, field

import numpy as np

from .. import nn
from ..critic import arrange_pairs, critic_score, critic_train_step, init_critic
from ..rng import stream
from .roc import achievable_region, auc_roc, polygon_area, roc_curve


@dataclass
class CriticFitConfig:
    hidden: tuple = (256, 256, 256)
    epochs: int = 60
    batch_size: int = 64
    lr: float = 0.01
    momentum: float = 0.9
    folds: int = 2
    negative_draws: int = 4  # fresh selectors drawn for held-out marginal scores


@dataclass
class RecognizabilityReport:
    auc: float
    recognizability: float
    pos_summary: dict
    neg_summary: dict
    curve: object = field(repr=False, default=None)
    region: np.ndarray = field(repr=False, default=None)
    pos_scores: np.ndarray = field(repr=False, default=None)
    neg_scores: np.ndarray = field(repr=False, default=None)

    @property
    def region_area(self):
        return polygon_area(self.region)

    def to_dict(self):
        return {
            "auc": self.auc,
            "recognizability": self.recognizability,
            "pos_summary": self.pos_summary,
            "neg_summary": self.neg_summary,
            "region_area": self.region_area,
        }


def _summary(x):
    return {
        "count": int(x.size),
        "mean": float(np.mean(x)),
        "std": float(np.std(x)),
        "min": float(np.min(x)),
        "max": float(np.max(x)),
    }


def report_from_scores(pos, neg):
    pos, neg = np.asarray(pos, dtype=np.float64), np.asarray(neg, dtype=np.float64)
    auc = auc_roc(pos, neg)
    curve = roc_curve(pos, neg)
    return RecognizabilityReport(
        auc=auc,
        recognizability=2.0 * max(auc, 1.0 - auc) - 1.0,
        pos_summary=_summary(pos),
        neg_summary=_summary(neg),
        curve=curve,
        region=achievable_region(curve),
        pos_scores=pos,
        neg_scores=neg,
    )


def _fit_critic(t_mem, t_non, cfg, seed, fold):
    critic = init_critic(t_mem.shape[1], cfg.hidden, stream(seed, "recog-init", fold))
    state = nn.MomentumState.for_params(critic, momentum=cfg.momentum)
    rng = stream(seed, "recog-batches", fold)
    m = t_mem.shape[0]
    for epoch in range(cfg.epochs):
        lr = nn.cosine_lr(epoch, cfg.epochs, cfg.lr)
        order = rng.permutation(m)
        for start in range(0, m, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            u = rng.integers(0, 2, size=len(idx))
            critic_train_step(critic, state, arrange_pairs(t_mem[idx], t_non[idx], u), lr)
    return critic


def estimate_recognizability(t_members, t_nonmembers, seed=0, config=None):
    """Cross-fitted recognizability of member vs non-member representations.

    Row ``i`` of ``t_members`` is paired with row ``i`` of ``t_nonmembers``.
    Positive scores come from member-first pairs and negative scores from
    selector-randomized pairs, all on folds the critic was not trained on.
    """
    cfg = config or CriticFitConfig()
    t_mem = np.asarray(t_members, dtype=np.float64)
    t_non = np.asarray(t_nonmembers, dtype=np.float64)
    if t_mem.shape != t_non.shape or t_mem.ndim != 2:
        raise ValueError("member and non-member representations must be aligned (m, k) arrays")
    m = t_mem.shape[0]
    if m < 2 * cfg.folds:
        raise ValueError(f"need at least {2 * cfg.folds} pairs, got {m}")
    # scale by pooled statistics so critic step sizes are comparable across encoders
    pooled = np.vstack([t_mem, t_non])
    mu, sd = pooled.mean(axis=0), pooled.std(axis=0)
    sd = np.where(sd > 1e-12, sd, 1.0)
    t_mem, t_non = (t_mem - mu) / sd, (t_non - mu) / sd

    fold_of = stream(seed, "recog-folds").permutation(m) % cfg.folds
    neg_rng = stream(seed, "recog-negatives")
    pos, neg = [], []
    for k in range(cfg.folds):
        fit_idx, eval_idx = np.flatnonzero(fold_of != k), np.flatnonzero(fold_of == k)
        critic = _fit_critic(t_mem[fit_idx], t_non[fit_idx], cfg, seed, k)
        a, b = t_mem[eval_idx], t_non[eval_idx]
        pos.append(critic_score(critic, np.hstack([a, b])))
        for _ in range(cfg.negative_draws):
            u = neg_rng.integers(0, 2, size=len(eval_idx))
            neg.append(critic_score(critic, arrange_pairs(a, b, u).marginal))
    return report_from_scores(np.concatenate(pos), np.concatenate(neg))
