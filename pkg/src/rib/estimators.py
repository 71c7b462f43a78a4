"""scikit-learn compatible front end."""

import numpy as np
from scipy.special import softmax
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .data import GhostSet, LabeledDataset
from .evaluation.recog import CriticFitConfig, estimate_recognizability
from .rng import stream
from .training import TrainConfig, fit


class RIBClassifier(ClassifierMixin, TransformerMixin, BaseEstimator):
    """MLP classifier trained with a recognizability regularizer.

    ``transform`` returns the learned representation. With
    ``objective="ce"`` or ``"l2"`` this is a plain (weight-decayed) MLP.

    When ``fit`` receives no ``X_ghost``, a ``ghost_fraction`` share of the
    training rows is held out (labels discarded) to serve as the ghost set.

    Parameters
    ----------
    objective : {"rib", "rib-adv", "ce", "l2"}
    beta : float
        Weight of the recognizability term.
    bregman : {"bkl", "sq", "ukl"}
        Divergence used for density-ratio matching.
    random_state : int
        Master seed; every random stream is derived from it.
    """

    def __init__(
        self,
        objective="rib",
        beta=1.0,
        bregman="bkl",
        hidden=(256,),
        rep_dim=64,
        hidden_activation="relu",
        rep_activation="identity",
        critic_hidden=(256, 256, 256),
        epochs=100,
        batch_size=128,
        lr=1e-3,
        critic_lr=1e-3,
        critic_steps=1,
        weight_decay=0.0,
        standardize="feature",
        ghost_fraction=0.5,
        random_state=0,
    ):
        self.objective = objective
        self.beta = beta
        self.bregman = bregman
        self.hidden = hidden
        self.rep_dim = rep_dim
        self.hidden_activation = hidden_activation
        self.rep_activation = rep_activation
        self.critic_hidden = critic_hidden
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.critic_lr = critic_lr
        self.critic_steps = critic_steps
        self.weight_decay = weight_decay
        self.standardize = standardize
        self.ghost_fraction = ghost_fraction
        self.random_state = random_state

    def _config(self):
        return TrainConfig(
            objective=self.objective,
            beta=self.beta,
            bregman=self.bregman,
            epochs=self.epochs,
            batch_size=self.batch_size,
            lr=self.lr,
            critic_lr=self.critic_lr,
            critic_steps=self.critic_steps,
            weight_decay=self.weight_decay,
            hidden=tuple(self.hidden),
            hidden_activation=self.hidden_activation,
            rep_dim=self.rep_dim,
            rep_activation=self.rep_activation,
            critic_hidden=tuple(self.critic_hidden),
            standardize=self.standardize,
            seed=int(self.random_state or 0),
        )

    def fit(self, X, y, X_ghost=None, X_test=None, y_test=None):
        X, y = check_X_y(X, y, dtype=np.float64)
        check_classification_targets(y)
        config = self._config()
        self.classes_, codes = np.unique(y, return_inverse=True)
        k = max(len(self.classes_), 2)
        train = LabeledDataset(X, codes, k)
        ghost = None
        if X_ghost is not None:
            ghost = GhostSet(check_array(X_ghost, dtype=np.float64))
            if ghost.dim != X.shape[1]:
                raise ValueError(f"X_ghost has {ghost.dim} features, X has {X.shape[1]}")
        elif config.objective in ("rib", "rib-adv"):
            if not 0 < self.ghost_fraction < 1:
                raise ValueError("ghost_fraction must lie in (0, 1) when no X_ghost is given")
            perm = stream(config.seed, "ghost-split").permutation(len(train))
            n_ghost = max(1, int(round(self.ghost_fraction * len(train))))
            ghost = GhostSet(X[perm[:n_ghost]])
            train = train.take(perm[n_ghost:])
        test = None
        if X_test is not None:
            Xt = check_array(X_test, dtype=np.float64)
            y_test = np.asarray(y_test)
            unseen = ~np.isin(y_test, self.classes_)
            if unseen.any():
                raise ValueError(f"y_test contains labels not seen in y: {np.unique(y_test[unseen])}")
            test = LabeledDataset(Xt, np.searchsorted(self.classes_, y_test), k)
        self.model_, self.critic_, self.record_ = fit(config, train, ghost, test)
        self.n_features_in_ = X.shape[1]
        return self

    def _checked(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X

    def decision_function(self, X):
        X = self._checked(X)
        return self.model_.logits(X)

    def predict_proba(self, X):
        scores = self.decision_function(X)
        return softmax(scores, axis=1)[:, : len(self.classes_)]

    def predict(self, X):
        proba = self.predict_proba(X)
        return self.classes_[np.argmax(proba, axis=1)]

    def transform(self, X):
        X = self._checked(X)
        return self.model_.represent(X)

    def recognizability(self, X_members, X_nonmembers, critic_config=None):
        """Recognizability of representations of paired members vs non-members."""
        return estimate_recognizability(
            self.transform(X_members),
            self.transform(X_nonmembers),
            seed=int(self.random_state or 0),
            config=critic_config or CriticFitConfig(),
        )
