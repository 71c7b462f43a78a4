"""The recognizability critic and the density-ratio matching surrogate.

The critic ``V`` scores a concatenated pair of representations. It is
trained to separate the membership-canonical arrangement (training
representation first) from the selector-randomized arrangement, using the
Jensen-Shannon lower bound. ``exp(V)`` then estimates the density ratio
between the two arrangements, and the encoder is pushed to make that ratio
equal to one through a Bregman divergence.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .nn import (
    ShapeError,
    init_mlp,
    mlp_backward,
    mlp_forward,
    momentum_step,
    sigmoid,
    softplus,
)


class BregmanKind(str, Enum):
    BKL = "bkl"
    SQ = "sq"
    UKL = "ukl"


def init_critic(rep_dim, hidden, rng):
    """LeakyReLU hidden layers and a linear scalar output over ``2 * rep_dim`` inputs."""
    sizes = [2 * rep_dim, *hidden, 1]
    acts = ["leaky_relu"] * len(hidden) + ["identity"]
    return init_mlp(sizes, acts, rng)


@dataclass
class PairBatch:
    joint: np.ndarray
    marginal: np.ndarray
    swapped: np.ndarray  # bool per row, True when the marginal row is ghost-first


def arrange_pairs(t_train, t_ghost, u):
    """Build canonical (joint) and selector-randomized (marginal) pair rows.

    Row ``i`` of ``joint`` is ``t_train[i] ++ t_ghost[i]``; row ``i`` of
    ``marginal`` is the same concatenation when ``u[i] == 0`` and the
    ghost-first concatenation when ``u[i] == 1``.
    """
    t_train = np.asarray(t_train, dtype=np.float64)
    t_ghost = np.asarray(t_ghost, dtype=np.float64)
    bits = np.asarray(getattr(u, "bits", u)).astype(bool)
    if t_train.shape != t_ghost.shape or t_train.ndim != 2:
        raise ValueError(f"train {t_train.shape} and ghost {t_ghost.shape} batches must match")
    if bits.shape != (t_train.shape[0],):
        raise ValueError(f"{bits.shape[0]} selector bits for a batch of {t_train.shape[0]}")
    joint = np.hstack([t_train, t_ghost])
    swapped = np.hstack([t_ghost, t_train])
    marginal = np.where(bits[:, None], swapped, joint)
    return PairBatch(joint, marginal, bits)


def critic_score(params, pairs):
    out, _ = mlp_forward(params, pairs)
    if out.shape[1] != 1:
        raise ShapeError("critic must have a scalar output")
    return out[:, 0]


def jsd_critic_loss(joint_scores, marginal_scores):
    """Negated Jensen-Shannon lower bound and its gradients w.r.t. both score vectors.

    loss = mean(softplus(-V_joint)) + mean(softplus(V_marginal))
    """
    vj = np.asarray(joint_scores, dtype=np.float64)
    vm = np.asarray(marginal_scores, dtype=np.float64)
    if vj.size == 0 or vm.size == 0:
        raise ValueError("score vectors must be non-empty")
    loss = float(np.mean(softplus(-vj)) + np.mean(softplus(vm)))
    return loss, (-sigmoid(-vj) / vj.size, sigmoid(vm) / vm.size)


def density_ratio(score):
    return np.exp(score)


def bregman_surrogate(ratio, kind=BregmanKind.BKL):
    """Bregman divergence between the target ratio 1 and ``ratio``, and its derivative in ``ratio``."""
    r = np.asarray(ratio, dtype=np.float64)
    if np.any(~(r > 0)):
        raise ValueError("density ratio must be strictly positive")
    kind = BregmanKind(kind)
    if kind is BregmanKind.BKL:
        half = np.log1p(r) - np.log(2.0)
        value = (1.0 + r) * half - np.log(r)
        deriv = half + 1.0 - 1.0 / r
    elif kind is BregmanKind.SQ:
        value = 0.5 * (1.0 - r) ** 2
        deriv = r - 1.0
    else:
        value = r - 1.0 - np.log(r)
        deriv = 1.0 - 1.0 / r
    if value.ndim == 0:
        return float(value), float(deriv)
    return value, deriv


def bregman_from_score(score, kind=BregmanKind.BKL):
    """Surrogate value and d(value)/d(score) with ``ratio = exp(score)``, in log space.

    Equivalent to ``bregman_surrogate(exp(score))`` chained with
    ``dR/dV = R``, but stays finite for large scores.
    """
    v = np.asarray(score, dtype=np.float64)
    kind = BregmanKind(kind)
    if kind is BregmanKind.BKL:
        sp = softplus(v)  # log(1 + R)
        value = (1.0 + np.exp(v)) * (sp - np.log(2.0)) - v
        # R * (log((1+R)/2) + 1 - 1/R)
        grad = np.exp(v) * (sp - np.log(2.0) + 1.0) - 1.0
    elif kind is BregmanKind.SQ:
        r = np.exp(v)
        value = 0.5 * (1.0 - r) ** 2
        grad = r * (r - 1.0)
    else:
        value = np.expm1(v) - v
        grad = np.expm1(v)
    return value, grad


def regularizer_grad_to_encoder(critic, joint_pairs, kind=BregmanKind.BKL):
    """Mean surrogate over joint rows and its gradient w.r.t. each pair row.

    The critic is treated as a constant: its parameters are read but never
    modified and no parameter gradients are returned.
    """
    scores, cache = mlp_forward(critic, joint_pairs)
    value, dscore = bregman_from_score(scores[:, 0], kind)
    m = scores.shape[0]
    _, pair_grads = mlp_backward(critic, cache, (dscore / m)[:, None])
    return float(np.mean(value)), pair_grads


def split_pair_grads(pair_grads):
    """Split gradients of concatenated pair rows back into (first-half, second-half)."""
    half = pair_grads.shape[1] // 2
    return pair_grads[:, :half], pair_grads[:, half:]


def decision_scores(critic, pairs):
    """Class probabilities ``sigmoid(exp(V))``; a monotone transform of ``V``."""
    return sigmoid(density_ratio(critic_score(critic, pairs)))


def critic_train_step(critic, state, pairs, lr):
    """One descent step of the Jensen-Shannon critic loss; returns the pre-step loss."""
    both = np.vstack([pairs.joint, pairs.marginal])
    scores, cache = mlp_forward(critic, both)
    m = pairs.joint.shape[0]
    loss, (gj, gm) = jsd_critic_loss(scores[:m, 0], scores[m:, 0])
    grads, _ = mlp_backward(critic, cache, np.concatenate([gj, gm])[:, None])
    momentum_step(state, critic, grads, lr)
    return loss

