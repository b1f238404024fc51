"""Scikit-learn style classifier wrapping the full training pipeline.

MaskedFusionClassifier exposes every TrainConfig field as a constructor
parameter, so get_params/set_params/clone behave like any other estimator,
and fits on in-memory clip arrays.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .config import TrainConfig
from .errors import GeometryError, LabelError
from .trainer import ClipSet, evaluate_clipset, fit_model


def check_clip_array(X) -> np.ndarray:
    """Validate an (N, T, C, H, W) clip array with values in [0, 1]."""
    X = np.asarray(X)
    if X.ndim != 5:
        raise GeometryError(
            f"expected clips of shape (N, T, C, H, W), got {tuple(X.shape)}"
        )
    if X.shape[0] == 0:
        raise GeometryError("need at least one clip")
    if not np.isfinite(X).all():
        raise ValueError("clip values must be finite")
    if X.min() < 0.0 or X.max() > 1.0:
        raise ValueError(
            f"clip values must lie in [0, 1], got range "
            f"[{X.min():.4g}, {X.max():.4g}]"
        )
    return X


def check_labels(y, n: int) -> np.ndarray:
    """Validate a length-n vector of {0, 1} labels."""
    y = np.asarray(y)
    if y.shape != (n,):
        raise LabelError(f"labels must have shape ({n},), got {tuple(y.shape)}")
    if not np.isin(y, (0, 1)).all():
        raise LabelError("labels must be 0 (genuine) or 1 (manipulated)")
    return y.astype(np.int64)


class MaskedFusionClassifier(BaseEstimator, ClassifierMixin):
    """Video forgery classifier with a masked texture-reconstruction branch.

    Parameters mirror :class:`texfuse.config.TrainConfig` exactly; see its
    docstring for meanings and defaults.

    Attributes (after fit)
    ----------------------
    model_:
        the trained torch module.
    config_:
        the TrainConfig assembled from the constructor parameters.
    classes_:
        always ``[0, 1]``; column 1 of predict_proba is the manipulated
        class.
    history_:
        per-step and per-epoch log records from training.
    """

    def __init__(
        self,
        modality_pair="RGB-LDP",
        loss_lambda=0.1,
        mask_ratio=0.75,
        frames=8,
        channels=3,
        height=32,
        width=32,
        patch_size=8,
        tube_size=2,
        enc_depth=4,
        enc_dim=64,
        enc_heads=4,
        dec_depth=2,
        dec_dim=32,
        dec_heads=4,
        drop_path=0.01,
        batch_size=8,
        epochs=20,
        lr_start=5e-5,
        lr_min=1e-6,
        momentum=0.9,
        weight_decay=0.05,
        seed=0,
        eval_mask_mode="training-ratio-deterministic",
        rec_norm="element",
        dtype="float32",
    ):
        self.modality_pair = modality_pair
        self.loss_lambda = loss_lambda
        self.mask_ratio = mask_ratio
        self.frames = frames
        self.channels = channels
        self.height = height
        self.width = width
        self.patch_size = patch_size
        self.tube_size = tube_size
        self.enc_depth = enc_depth
        self.enc_dim = enc_dim
        self.enc_heads = enc_heads
        self.dec_depth = dec_depth
        self.dec_dim = dec_dim
        self.dec_heads = dec_heads
        self.drop_path = drop_path
        self.batch_size = batch_size
        self.epochs = epochs
        self.lr_start = lr_start
        self.lr_min = lr_min
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.seed = seed
        self.eval_mask_mode = eval_mask_mode
        self.rec_norm = rec_norm
        self.dtype = dtype

    def _config(self) -> TrainConfig:
        return TrainConfig(**self.get_params())

    def _clip_set(self, X, y=None) -> ClipSet:
        X = check_clip_array(X)
        n = X.shape[0]
        labels = check_labels(y, n) if y is not None else np.zeros(n, dtype=np.int64)
        return ClipSet(
            ids=[f"sample-{i:06d}" for i in range(n)],
            clips=X,
            labels=labels,
        )

    def fit(self, X, y):
        """Train on clips X of shape (N, T, C, H, W) and binary labels y."""
        config = self._config()
        clip_set = self._clip_set(X, y)
        model, history = fit_model(config, clip_set)
        self.config_ = config
        self.model_ = model
        self.history_ = history
        self.classes_ = np.array([0, 1])
        return self

    def predict_proba(self, X):
        """Class probabilities, shape (N, 2); column 1 is manipulated."""
        check_is_fitted(self, "model_")
        clip_set = self._clip_set(X)
        result = evaluate_clipset(self.model_, self.config_, clip_set)
        pos = np.asarray(result.scores)
        return np.stack([1.0 - pos, pos], axis=1)

    def predict(self, X):
        """Hard 0/1 labels via the 0.5 probability threshold."""
        proba = self.predict_proba(X)
        return self.classes_[(proba[:, 1] >= 0.5).astype(int)]

    def decision_function(self, X):
        """Manipulated-class probability, shape (N,)."""
        return self.predict_proba(X)[:, 1]
