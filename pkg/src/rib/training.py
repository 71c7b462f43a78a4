"""Training loops: cross-entropy baselines, RIB and its adversarial variant.

Each mini-batch step follows the same order: encode a training batch and
a ghost batch, arrange representation pairs under a fresh selector, take one
momentum-SGD step on the critic, then one Adam step on encoder and
classifier head. For RIB the encoder loss is the cross-entropy plus
``beta`` times the mean Bregman surrogate of the critic's density ratio on
the canonical pairs, with the critic held fixed. For the adversarial variant
the encoder instead maximizes the critic's Jensen-Shannon loss.

The CE baselines run the identical loop with ``beta = 0``; when a ghost set
is supplied they still train the critic as a passive monitor, so a CE run
and a ``beta = 0`` RIB run are the same computation.
"""

import csv
import hashlib
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.preprocessing import StandardScaler

from . import nn
from .critic import (
    BregmanKind,
    arrange_pairs,
    bregman_from_score,
    critic_train_step,
    init_critic,
    jsd_critic_loss,
    regularizer_grad_to_encoder,
    split_pair_grads,
)
from .data import GhostSet, LabeledDataset
from .rng import stream

OBJECTIVES = ("ce", "l2", "rib", "rib-adv")
STANDARDIZE_MODES = ("feature", "global", "none")
DEFAULT_L2 = 1e-4
METRIC_COLUMNS = ("epoch", "lr", "train_err", "test_err", "emp_risk", "critic_loss", "mean_bregman")
METRICS_SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


class DivergenceError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    objective: str = "rib"
    beta: float = 1.0
    bregman: str = "bkl"
    epochs: int = 100
    batch_size: int = 128
    lr: float = 1e-3
    critic_lr: float = 1e-3
    critic_momentum: float = 0.9
    critic_steps: int = 1
    weight_decay: float = 0.0
    hidden: tuple = (256,)
    hidden_activation: str = "relu"
    rep_dim: int = 64
    rep_activation: str = "identity"
    critic_hidden: tuple = (256, 256, 256)
    standardize: str = "feature"
    monitor_critic: bool = True
    freeze_encoder: bool = False  # keep the encoder at its random init; only the head learns
    init_seed: int = None  # seed for the initial weights when they must not follow ``seed``
    seed: int = 0

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        self.critic_hidden = tuple(int(h) for h in self.critic_hidden)
        problems = self.problems()
        if problems:
            raise ConfigError("; ".join(problems))

    def problems(self):
        out = []
        if self.objective not in OBJECTIVES:
            out.append(f"objective: must be one of {OBJECTIVES}, got {self.objective!r}")
        if not self.beta >= 0:
            out.append(f"beta: must be >= 0, got {self.beta}")
        try:
            BregmanKind(self.bregman)
        except ValueError:
            out.append(f"bregman: must be one of {[k.value for k in BregmanKind]}")
        if self.epochs < 1:
            out.append("epochs: must be >= 1")
        if self.batch_size < 2:
            out.append("batch_size: must be >= 2")
        if not self.lr > 0 or not self.critic_lr > 0:
            out.append("lr, critic_lr: must be > 0")
        if self.critic_steps < 1:
            out.append("critic_steps: must be >= 1")
        if self.weight_decay < 0:
            out.append("weight_decay: must be >= 0")
        if self.standardize not in STANDARDIZE_MODES:
            out.append(f"standardize: must be one of {STANDARDIZE_MODES}")
        if self.init_seed is not None and not 0 <= self.init_seed < 2**64:
            out.append("init_seed: must be null or an integer in [0, 2**64)")
        if self.rep_dim < 1:
            out.append("rep_dim: must be >= 1")
        for name in ("hidden_activation", "rep_activation"):
            if getattr(self, name) not in nn.ACTIVATIONS:
                out.append(f"{name}: unknown activation {getattr(self, name)!r}")
        return out

    @property
    def effective_beta(self):
        return self.beta if self.objective in ("rib", "rib-adv") else 0.0

    @property
    def effective_weight_decay(self):
        if self.objective == "l2" and self.weight_decay == 0:
            return DEFAULT_L2
        return self.weight_decay

    def to_dict(self):
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        d["critic_hidden"] = list(self.critic_hidden)
        return d

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


class GlobalScaler:
    """One mean and one standard deviation shared by every feature (image data)."""

    def fit(self, X):
        X = np.asarray(X, dtype=np.float64)
        self.mean_ = float(X.mean())
        std = float(X.std())
        self.scale_ = std if std > 1e-12 else 1.0
        return self

    def transform(self, X):
        return (np.asarray(X, dtype=np.float64) - self.mean_) / self.scale_


def make_scaler(mode, features):
    if mode == "feature":
        return StandardScaler().fit(features)
    if mode == "global":
        return GlobalScaler().fit(features)
    return None


@dataclass
class Model:
    """A trained encoder plus linear classifier head."""

    encoder: nn.MLPParams
    head: nn.MLPParams
    scaler: object = None  # fitted transformer with .transform, or None

    def prepare(self, features):
        x = np.asarray(features, dtype=np.float64)
        return self.scaler.transform(x) if self.scaler is not None else x

    def represent(self, features):
        return nn.mlp_forward(self.encoder, self.prepare(features))[0]

    def logits(self, features):
        return nn.mlp_forward(self.head, self.represent(features))[0]

    def predict(self, features):
        return np.argmax(self.logits(features), axis=1)

    def digest(self):
        return hashlib.sha256((self.encoder.digest() + self.head.digest()).encode()).hexdigest()


@dataclass
class RunRecord:
    config_digest: str
    seed: int
    objective: str
    beta: float
    n: int
    epochs: list = field(default_factory=list)  # one dict per epoch, METRIC_COLUMNS keys
    encoder_digest: str = ""
    train_err: float = float("nan")
    test_err: float = float("nan")
    recognizability: float = None
    fcmi_bound: float = None
    mean_mi: float = None
    dynamics: list = field(default_factory=list)  # (epoch, recognizability)
    wall_time: float = 0.0
    label: str = ""

    @property
    def gap(self):
        return self.test_err - self.train_err

    def to_dict(self):
        d = asdict(self)
        d["gap"] = self.gap
        return d

    def to_json(self):
        return json.dumps(_json_safe(self.to_dict()), indent=2, sort_keys=True)

    def metrics_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(METRIC_COLUMNS)
        for row in self.epochs:
            w.writerow([_fmt(row[c]) for c in METRIC_COLUMNS])
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None or not math.isfinite(v):
        return ""
    return repr(float(v))


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def evaluate(model, dataset):
    """0-1 error and mean cross-entropy of ``model`` on a labeled dataset."""
    logits = model.logits(dataset.features)
    loss, _ = nn.softmax_cross_entropy(logits, dataset.labels)
    err = float(np.mean(np.argmax(logits, axis=1) != dataset.labels))
    return err, loss


class _GhostSampler:
    """Cycles through the ghost set in reshuffled passes."""

    def __init__(self, size, rng):
        self.size, self.rng = size, rng
        self.order, self.pos = rng.permutation(size), 0

    def take(self, k):
        out = []
        while k > 0:
            if self.pos == self.size:
                self.order, self.pos = self.rng.permutation(self.size), 0
            chunk = self.order[self.pos : self.pos + k]
            out.append(chunk)
            self.pos += len(chunk)
            k -= len(chunk)
        return np.concatenate(out)


def _check_inputs(config, train, ghost):
    if not isinstance(train, LabeledDataset):
        raise ConfigError("train must be a LabeledDataset")
    if len(train) < 2:
        raise ConfigError("training set needs at least two rows")
    if ghost is not None:
        if isinstance(ghost, LabeledDataset):
            ghost = GhostSet.from_dataset(ghost)
        if ghost.dim != train.dim:
            raise ConfigError(f"ghost width {ghost.dim} does not match training width {train.dim}")
        if len(ghost) < 1:
            raise ConfigError("ghost set is empty")
    elif config.objective in ("rib", "rib-adv"):
        raise ConfigError(f"objective {config.objective!r} needs a ghost set")
    return ghost


def fit(config, train, ghost=None, test=None, callback=None):
    """Train according to ``config.objective``; returns (model, critic, RunRecord).

    ``callback(epoch, model)`` is invoked after every epoch; its return value,
    when not None, is appended to ``record.dynamics`` as ``(epoch, value)``.
    """
    ghost = _check_inputs(config, train, ghost)
    started = time.perf_counter()
    seed = config.seed
    beta = config.effective_beta
    kind = BregmanKind(config.bregman)
    adversarial = config.objective == "rib-adv"

    scaler = make_scaler(config.standardize, train.features)
    x_train = scaler.transform(train.features) if scaler is not None else train.features
    y_train = train.labels

    sizes = [train.dim, *config.hidden, config.rep_dim]
    acts = [config.hidden_activation] * len(config.hidden) + [config.rep_activation]
    init_seed = seed if config.init_seed is None else config.init_seed
    encoder = nn.init_mlp(sizes, acts, stream(init_seed, "init-encoder"))
    head = nn.init_mlp([config.rep_dim, train.num_classes], "identity", stream(init_seed, "init-head"))
    model = Model(encoder, head, scaler)
    enc_opt = nn.AdamState.for_params(encoder)
    head_opt = nn.AdamState.for_params(head)
    batch_rng = stream(seed, "batches")

    use_critic = ghost is not None and (beta > 0 or config.monitor_critic or config.objective in ("rib", "rib-adv"))
    critic = critic_opt = None
    if use_critic:
        x_ghost = scaler.transform(ghost.features) if scaler is not None else ghost.features
        critic = init_critic(config.rep_dim, config.critic_hidden, stream(seed, "init-critic"))
        critic_opt = nn.MomentumState.for_params(critic, momentum=config.critic_momentum)
        ghost_sampler = _GhostSampler(len(ghost), stream(seed, "ghost-batches"))
        selector_rng = stream(seed, "pair-selector")

    record = RunRecord(config.digest(), seed, config.objective, config.beta, len(train))
    wd = config.effective_weight_decay
    n = len(train)
    for epoch in range(config.epochs):
        lr = nn.cosine_lr(epoch, config.epochs, config.lr)
        critic_lr = nn.cosine_lr(epoch, config.epochs, config.critic_lr)
        critic_losses, bregman_values = [], []
        order = batch_rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            if use_critic:
                t = nn.mlp_forward(encoder, x_train[idx])[0]
                gidx = ghost_sampler.take(len(idx))
                t_ghost = nn.mlp_forward(encoder, x_ghost[gidx])[0]
                u = selector_rng.integers(0, 2, size=len(idx))
                pairs = arrange_pairs(t, t_ghost, u)
                for _ in range(config.critic_steps):
                    closs = critic_train_step(critic, critic_opt, pairs, critic_lr)
                if not math.isfinite(closs):
                    raise DivergenceError(f"non-finite critic loss in epoch {epoch}")
                critic_losses.append(closs)
                obj = encoder_objective(
                    encoder, head, critic, x_train[idx], y_train[idx], x_ghost[gidx], u, beta, kind,
                    adversarial,
                )
                bregman_values.append(obj.regularizer)
            else:
                obj = encoder_objective(encoder, head, None, x_train[idx], y_train[idx])
            if not math.isfinite(obj.loss):
                raise DivergenceError(f"non-finite encoder objective in epoch {epoch}")
            enc_grads, head_grads = obj.encoder_grads, obj.head_grads

            nn.add_weight_decay(enc_grads, encoder, wd)
            nn.add_weight_decay(head_grads, head, wd)
            if not config.freeze_encoder:
                nn.adam_step(enc_opt, encoder, enc_grads, lr)
            nn.adam_step(head_opt, head, head_grads, lr)

        train_err, emp_risk = evaluate(model, train)
        test_err = evaluate(model, test)[0] if test is not None else float("nan")
        if not math.isfinite(emp_risk):
            raise DivergenceError(f"training diverged in epoch {epoch}")
        record.epochs.append(
            {
                "epoch": epoch,
                "lr": lr,
                "train_err": train_err,
                "test_err": test_err,
                "emp_risk": emp_risk,
                "critic_loss": float(np.mean(critic_losses)) if critic_losses else float("nan"),
                "mean_bregman": float(np.mean(bregman_values)) if bregman_values else float("nan"),
            }
        )
        if callback is not None:
            value = callback(epoch, model)
            if value is not None:
                record.dynamics.append((epoch, value))

    record.encoder_digest = model.digest()
    record.train_err = record.epochs[-1]["train_err"]
    record.test_err = record.epochs[-1]["test_err"]
    record.wall_time = time.perf_counter() - started
    return model, critic, record


@dataclass
class ObjectiveValue:
    loss: float
    cross_entropy: float
    regularizer: float
    encoder_grads: nn.MLPParams
    head_grads: nn.MLPParams


def encoder_objective(encoder, head, critic, x, y, x_ghost=None, u=None, beta=0.0,
                      kind=BregmanKind.BKL, adversarial=False):
    """Encoder/head loss on one batch and its exact gradients, with the critic frozen.

    The loss is ``CE + beta * mean Bregman(exp V(joint pairs))``; with
    ``adversarial`` the penalty is the negated Jensen-Shannon critic loss
    instead. ``regularizer`` always reports the mean Bregman surrogate when a
    critic is given; the penalty enters loss and gradients only when
    ``beta > 0``.
    """
    t, enc_cache = nn.mlp_forward(encoder, x)
    logits, head_cache = nn.mlp_forward(head, t)
    ce, dlogits = nn.softmax_cross_entropy(logits, y)
    head_grads, dt = nn.mlp_backward(head, head_cache, dlogits)
    enc_grads, _ = nn.mlp_backward(encoder, enc_cache, dt)
    if critic is None:
        return ObjectiveValue(ce, ce, float("nan"), enc_grads, head_grads)
    t_ghost, ghost_cache = nn.mlp_forward(encoder, x_ghost)
    pairs = arrange_pairs(t, t_ghost, u)
    if beta > 0 and not adversarial:
        reg, pair_grads = regularizer_grad_to_encoder(critic, pairs.joint, kind)
        penalty = reg
        dt_train, dt_ghost = split_pair_grads(pair_grads)
    else:
        reg = float(np.mean(bregman_from_score(_scores(critic, pairs.joint), kind)[0]))
        if beta == 0:
            return ObjectiveValue(ce, ce, reg, enc_grads, head_grads)
        penalty, dt_train, dt_ghost = _adversarial_pair_grads(critic, pairs)
    g_train, _ = nn.mlp_backward(encoder, enc_cache, beta * dt_train)
    g_ghost, _ = nn.mlp_backward(encoder, ghost_cache, beta * dt_ghost)
    for g, a, b in zip(enc_grads.arrays(), g_train.arrays(), g_ghost.arrays()):
        g += a
        g += b
    loss = ce + beta * penalty
    return ObjectiveValue(loss, ce, reg, enc_grads, head_grads)


def _scores(critic, rows):
    return nn.mlp_forward(critic, rows)[0][:, 0]


def _adversarial_pair_grads(critic, pairs):
    """Gradients, w.r.t. train and ghost representations, of the negated critic loss."""
    m = pairs.joint.shape[0]
    scores, cache = nn.mlp_forward(critic, np.vstack([pairs.joint, pairs.marginal]))
    loss, (gj, gm) = jsd_critic_loss(scores[:m, 0], scores[m:, 0])
    _, rows = nn.mlp_backward(critic, cache, -np.concatenate([gj, gm])[:, None])
    joint_first, joint_second = split_pair_grads(rows[:m])
    marg_first, marg_second = split_pair_grads(rows[m:])
    swapped = pairs.swapped[:, None]
    dt_train = joint_first + np.where(swapped, marg_second, marg_first)
    dt_ghost = joint_second + np.where(swapped, marg_first, marg_second)
    return -loss, dt_train, dt_ghost


def train_ce(config, train, ghost=None, test=None, callback=None):
    """Cross-entropy baseline (with optional L2 weight decay); the critic never touches the encoder."""
    if config.objective not in ("ce", "l2"):
        config = TrainConfig(**{**config.to_dict(), "objective": "ce"})
    model, _, record = fit(config, train, ghost, test, callback)
    return model, record


def train_rib(config, train, ghost, test=None, callback=None):
    if config.objective != "rib":
        config = TrainConfig(**{**config.to_dict(), "objective": "rib"})
    return fit(config, train, ghost, test, callback)


def train_rib_adv(config, train, ghost, test=None, callback=None):
    if config.objective != "rib-adv":
        config = TrainConfig(**{**config.to_dict(), "objective": "rib-adv"})
    return fit(config, train, ghost, test, callback)
