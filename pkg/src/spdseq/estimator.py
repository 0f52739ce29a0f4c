"""Scikit-learn style classifier over SPD-valued sequences."""

import numpy as np
import torch
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.model_selection import StratifiedKFold
from sklearn.utils.validation import check_is_fitted

from .exceptions import NotPositiveDefinite
from .layer import DEFAULT_SCALES
from .model import SpdSequenceModel, param_count
from .training import TrainConfig, fit


def check_spd_sequences(x, symmetry_tol=1e-8):
    """Validate an ``(N, T, n, n)`` array of SPD sequences.

    Symmetrizes inputs whose asymmetry stays below ``symmetry_tol`` and
    verifies positive definiteness through a Cholesky pass.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 4 or x.shape[-1] != x.shape[-2]:
        raise ValueError(f"expected shape (N, T, n, n), got {x.shape}")
    if not np.isfinite(x).all():
        raise ValueError("input contains non-finite entries")
    asym = np.abs(x - np.swapaxes(x, -1, -2)).max() if x.size else 0.0
    if asym > symmetry_tol:
        raise ValueError(f"matrices are not symmetric (max asymmetry {asym:.3g})")
    x = (x + np.swapaxes(x, -1, -2)) / 2
    t = torch.as_tensor(x)
    _, info = torch.linalg.cholesky_ex(t.reshape(-1, x.shape[-1], x.shape[-1]))
    if int(info.max()) != 0:
        raise NotPositiveDefinite("input matrices must be positive definite")
    return x


class SpdSequenceClassifier(BaseEstimator, ClassifierMixin):
    """Sequence classifier built on the recurrent SPD model.

    Parameters mirror :class:`~spdseq.training.TrainConfig`; ``fit``
    expects ``X`` of shape ``(N, T, n, n)`` with every matrix SPD.
    """

    def __init__(self, n_layers=1, scales=DEFAULT_SCALES, init_eps=1e-3,
                 epochs=100, batch_size=32, lr=0.05, momentum=0.9,
                 clip=5.0, seed=0):
        self.n_layers = n_layers
        self.scales = scales
        self.init_eps = init_eps
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.momentum = momentum
        self.clip = clip
        self.seed = seed

    def _config(self):
        return TrainConfig(layers=self.n_layers, scales=tuple(self.scales),
                           init_eps=self.init_eps, epochs=self.epochs,
                           batch=self.batch_size, lr=self.lr,
                           momentum=self.momentum, clip=self.clip, seed=self.seed)

    def fit(self, X, y):
        X = check_spd_sequences(X)
        y = np.asarray(y)
        if len(y) != len(X):
            raise ValueError("X and y disagree on sample count")
        self.classes_, y_enc = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise ValueError("need at least two classes")
        self.dim_ = X.shape[-1]
        self.model_ = SpdSequenceModel(self.dim_, len(self.classes_),
                                       n_layers=self.n_layers,
                                       scales=tuple(self.scales),
                                       init_eps=self.init_eps)
        self.train_log_ = fit(self.model_, torch.as_tensor(X),
                              torch.as_tensor(y_enc), self._config())
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        X = check_spd_sequences(X)
        with torch.no_grad():
            logits = self.model_(torch.as_tensor(X))
        return logits.numpy()

    def predict_proba(self, X):
        logits = torch.as_tensor(self.decision_function(X))
        return torch.softmax(logits, dim=-1).numpy()

    def predict(self, X):
        logits = self.decision_function(X)
        return self.classes_[logits.argmax(axis=-1)]

    def param_count(self):
        check_is_fitted(self, "model_")
        return param_count(self.model_)


def run_classification(dataset, config=None, folds=10, seed=0):
    """Stratified k-fold accuracy of the classifier on a dataset.

    Returns a dict with per-fold accuracies, their mean and standard
    deviation, and the model's stored-parameter count.
    """
    if folds < 2:
        raise ValueError("need at least two folds")
    if config is None:
        config = TrainConfig()
    x, y = dataset.sequences, dataset.labels.astype(np.int64)
    splitter = StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed)
    accuracies = []
    n_params = None
    for train_idx, test_idx in splitter.split(x, y):
        clf = SpdSequenceClassifier(n_layers=config.layers, scales=config.scales,
                                    init_eps=config.init_eps, epochs=config.epochs,
                                    batch_size=config.batch, lr=config.lr,
                                    momentum=config.momentum, clip=config.clip,
                                    seed=config.seed)
        clf.fit(x[train_idx], y[train_idx])
        accuracies.append(float(clf.score(x[test_idx], y[test_idx])))
        n_params = clf.param_count()
    accuracies = np.asarray(accuracies)
    return {
        "fold_accuracies": accuracies,
        "mean_accuracy": float(accuracies.mean()),
        "std_accuracy": float(accuracies.std()),
        "param_count": n_params,
    }
