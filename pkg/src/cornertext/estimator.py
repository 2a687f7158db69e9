"""Scikit-learn style wrappers so the recognizer composes with pipelines.

Both classes follow the estimator protocol (``get_params``/``set_params``
driven by the constructor signature, ``fit`` returning self) without
depending on scikit-learn itself.
"""

from __future__ import annotations

import inspect

import numpy as np

from .config import ModelConfig, TrainConfig
from .corners import DetectorParams, detect_corners
from .data import Charset, Sample, bilinear_resize
from .model import CornerGuidedTransformer
from .train import evaluate_model, train
from .validation import ContractError, ShapeError


class BaseEstimator:
    """get_params/set_params over the constructor signature, sklearn-style."""

    @classmethod
    def _param_names(cls):
        sig = inspect.signature(cls.__init__)
        return [name for name in sig.parameters if name != "self"]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params) -> "BaseEstimator":
        valid = set(self._param_names())
        for key, value in params.items():
            if key not in valid:
                raise ValueError(
                    f"invalid parameter {key!r} for {type(self).__name__}; "
                    f"valid parameters are {sorted(valid)}"
                )
            setattr(self, key, value)
        return self

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"


def check_image_batch(X, image_h: int = 32, image_w: int = 128) -> np.ndarray:
    """Coerce input to (N, 3, image_h, image_w) float64 in [0, 1].

    Accepts channel-first (N, 3, H, W) or channel-last (N, H, W, 3) arrays,
    resizing bilinearly if the spatial extents differ.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 4:
        raise ShapeError(f"expected a 4-d image batch, got shape {X.shape}")
    if X.shape[1] != 3 and X.shape[-1] == 3:
        X = X.transpose(0, 3, 1, 2)
    if X.shape[1] != 3:
        raise ShapeError(f"expected 3 channels, got shape {X.shape}")
    if X.min() < 0.0 or X.max() > 1.0:
        raise ShapeError("image values must lie in [0, 1]")
    if X.shape[2] != image_h or X.shape[3] != image_w:
        X = np.clip(
            np.stack([bilinear_resize(img, image_h, image_w) for img in X]), 0.0, 1.0
        )
    return X


class CornerDetector(BaseEstimator):
    """Stateless transformer: image batch -> binary corner-map batch."""

    def __init__(self, kind: str = "shi_tomasi", window: int = 3, harris_k: float = 0.04,
                 quality_level: float = 0.01, min_distance: int = 3, max_corners: int = 512):
        self.kind = kind
        self.window = window
        self.harris_k = harris_k
        self.quality_level = quality_level
        self.min_distance = min_distance
        self.max_corners = max_corners

    def _detector_params(self) -> DetectorParams:
        return DetectorParams(
            kind=self.kind,
            window=self.window,
            harris_k=self.harris_k,
            quality_level=self.quality_level,
            min_distance=self.min_distance,
            max_corners=self.max_corners,
        )

    def fit(self, X=None, y=None) -> "CornerDetector":
        self._detector_params()  # validate hyperparameters
        return self

    def transform(self, X) -> np.ndarray:
        """(N, 3, H, W) or (N, H, W, 3) images -> (N, 1, H, W) corner masks."""
        params = self._detector_params()
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 4:
            raise ShapeError(f"expected a 4-d image batch, got shape {X.shape}")
        if X.shape[1] != 3 and X.shape[-1] == 3:
            X = X.transpose(0, 3, 1, 2)
        out = np.zeros((X.shape[0], 1) + X.shape[2:])
        for i, img in enumerate(X):
            out[i, 0] = detect_corners(img, params).mask
        return out

    def fit_transform(self, X, y=None) -> np.ndarray:
        return self.fit(X, y).transform(X)


class CornerTextRecognizer(BaseEstimator):
    """fit(images, texts) / predict(images) -> strings, desk-scale defaults."""

    def __init__(
        self,
        d_model: int = 64,
        n_heads: int = 4,
        n_enc_blocks: int = 3,
        n_dec_blocks: int = 2,
        ffn_dim: int = 256,
        proj_hidden: int = 128,
        proj_out: int = 128,
        fusion_mode: str = "corner_query",
        max_len: int = 25,
        detector_kind: str = "shi_tomasi",
        lr: float = 1e-3,
        batch_size: int = 32,
        epochs: int = 20,
        cc_weight: float = 0.1,
        temperature: float = 0.1,
        seed: int = 0,
    ):
        self.d_model = d_model
        self.n_heads = n_heads
        self.n_enc_blocks = n_enc_blocks
        self.n_dec_blocks = n_dec_blocks
        self.ffn_dim = ffn_dim
        self.proj_hidden = proj_hidden
        self.proj_out = proj_out
        self.fusion_mode = fusion_mode
        self.max_len = max_len
        self.detector_kind = detector_kind
        self.lr = lr
        self.batch_size = batch_size
        self.epochs = epochs
        self.cc_weight = cc_weight
        self.temperature = temperature
        self.seed = seed

    def _model_config(self) -> ModelConfig:
        return ModelConfig(
            d_model=self.d_model,
            n_heads=self.n_heads,
            n_enc_blocks=self.n_enc_blocks,
            n_dec_blocks=self.n_dec_blocks,
            ffn_dim=self.ffn_dim,
            max_len=self.max_len,
            proj_hidden=self.proj_hidden,
            proj_out=self.proj_out,
            fusion_mode=self.fusion_mode,
            vocab_size=Charset().vocab_size,
        )

    def _make_samples(self, X, y=None) -> list[Sample]:
        cfg = self._model_config()
        X = check_image_batch(X, cfg.image_h, cfg.image_w)
        detector = DetectorParams(kind=self.detector_kind)
        labels = ["" for _ in range(len(X))] if y is None else list(y)
        if len(labels) != len(X):
            raise ContractError(f"got {len(X)} images but {len(labels)} labels")
        samples = []
        for img, text in zip(X, labels):
            cmap = detect_corners(img, detector)
            samples.append(
                Sample(image=img, text=text, corner_map=cmap.mask[None].astype(np.float64))
            )
        return samples

    def fit(self, X, y) -> "CornerTextRecognizer":
        samples = self._make_samples(X, y)
        cfg = TrainConfig(
            lr=self.lr,
            batch_size=self.batch_size,
            epochs=self.epochs,
            decay_epoch=self.epochs,
            seed=self.seed,
            cc_weight=self.cc_weight,
            temperature=self.temperature,
        )
        self.model_ = CornerGuidedTransformer(self._model_config(), seed=self.seed)
        self.charset_ = Charset()
        result = train(self.model_, samples, cfg, charset=self.charset_)
        self.n_steps_ = result.steps
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise ContractError(
                f"{type(self).__name__} is not fitted yet; call fit(X, y) first"
            )

    def predict(self, X) -> list[str]:
        self._check_fitted()
        samples = self._make_samples(X)
        images = np.stack([s.image for s in samples])
        corner_maps = np.stack([s.corner_map for s in samples])
        return self.model_.greedy_decode(images, corner_maps, self.charset_)

    def score(self, X, y) -> float:
        """Word accuracy on (images, texts)."""
        self._check_fitted()
        samples = self._make_samples(X, y)
        report, _ = evaluate_model(
            self.model_, samples, self.charset_, batch_size=self.batch_size
        )
        return report.word_acc
