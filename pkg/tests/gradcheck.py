"""Central finite-difference checks shared by the unit and acceptance tests."""

import numpy as np

from rib import nn
from rib.critic import init_critic, jsd_critic_loss
from rib.training import encoder_objective

EPS = 1e-6


def relative_error(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-10)


def numeric_grad(loss, array):
    num = np.zeros_like(array)
    for i in np.ndindex(array.shape):
        old = array[i]
        array[i] = old + EPS
        hi = loss()
        array[i] = old - EPS
        lo = loss()
        array[i] = old
        num[i] = (hi - lo) / (2 * EPS)
    return num


def _jitter_biases(rng, *nets):
    for net in nets:
        for layer in net.layers:
            layer.bias[:] = rng.normal(scale=0.3, size=layer.bias.shape)


def check_objective_gradients(rng, kind, beta, adversarial, act, depth=1):
    """Worst relative error of the encoder and head gradients of the full objective.

    The critic is frozen, so the regularizer gradient flows through it into
    the encoder.
    """
    d, k, c = rng.integers(2, 5), rng.integers(2, 4), rng.integers(2, 4)
    hidden = [int(h) for h in rng.integers(2, 6, size=depth)]
    m = int(rng.integers(2, 5))
    enc = nn.init_mlp([d, *hidden, k], [act] * depth + ["identity"], rng)
    head = nn.init_mlp([k, c], "identity", rng)
    critic = init_critic(k, (int(rng.integers(3, 7)),), rng)
    _jitter_biases(rng, enc, head, critic)
    x, xg = rng.normal(size=(m, d)), rng.normal(size=(m, d))
    y, u = rng.integers(0, c, size=m), rng.integers(0, 2, size=m)

    def loss():
        return encoder_objective(enc, head, critic, x, y, xg, u, beta, kind, adversarial).loss

    obj = encoder_objective(enc, head, critic, x, y, xg, u, beta, kind, adversarial)
    worst = 0.0
    for net, grads in ((enc, obj.encoder_grads), (head, obj.head_grads)):
        for a, g in zip(net.arrays(), grads.arrays()):
            worst = max(worst, relative_error(g, numeric_grad(loss, a)))
    return worst


def check_critic_gradients(rng):
    """Worst relative error of the critic-parameter gradients of the critic loss."""
    k, m = int(rng.integers(2, 4)), int(rng.integers(2, 6))
    critic = init_critic(k, tuple(int(h) for h in rng.integers(3, 7, size=rng.integers(1, 3))), rng)
    _jitter_biases(rng, critic)
    joint, marginal = rng.normal(size=(m, 2 * k)), rng.normal(size=(m, 2 * k))
    both = np.vstack([joint, marginal])

    def loss():
        scores = nn.mlp_forward(critic, both)[0][:, 0]
        return jsd_critic_loss(scores[:m], scores[m:])[0]

    scores, cache = nn.mlp_forward(critic, both)
    _, (gj, gm) = jsd_critic_loss(scores[:m, 0], scores[m:, 0])
    grads, _ = nn.mlp_backward(critic, cache, np.concatenate([gj, gm])[:, None])
    return max(relative_error(g, numeric_grad(loss, a)) for a, g in zip(critic.arrays(), grads.arrays()))
