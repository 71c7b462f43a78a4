"""Recognizable information bottleneck.

Train encoders whose representations of training data cannot be told apart
from representations of held-out ("ghost") data, and measure that
recognizability as a proxy for the generalization gap.
"""

from .critic import BregmanKind, bregman_surrogate
from .data import LabeledDataset, gaussian_mixture, load_idx
from .estimators import RIBClassifier
from .training import RunRecord, TrainConfig, evaluate, fit, train_ce, train_rib, train_rib_adv

__version__ = "0.1.0"

__all__ = [
    "BregmanKind",
    "LabeledDataset",
    "RIBClassifier",
    "RunRecord",
    "TrainConfig",
    "bregman_surrogate",
    "evaluate",
    "fit",
    "gaussian_mixture",
    "load_idx",
    "train_ce",
    "train_rib",
    "train_rib_adv",
]
