"""Estimator-protocol checks for the sklearn-style wrappers."""

import numpy as np
import pytest

from cornertext.corners import DetectorParams, detect_corners
from cornertext.estimator import (
    CornerDetector,
    CornerTextRecognizer,
    check_image_batch,
)
from cornertext.synth import RenderStyle, SyntheticWordDataset
from cornertext.validation import ContractError, ParameterError, ShapeError


def test_get_params_round_trip():
    det = CornerDetector(kind="harris", quality_level=0.05)
    params = det.get_params()
    clone = CornerDetector(**params)
    assert clone.get_params() == params


def test_set_params_chains_and_validates():
    det = CornerDetector()
    assert det.set_params(kind="harris").kind == "harris"
    with pytest.raises(ValueError, match="invalid parameter"):
        det.set_params(nonsense=1)


def test_recognizer_get_set_params():
    rec = CornerTextRecognizer(d_model=16, n_heads=2)
    params = rec.get_params()
    assert params["d_model"] == 16
    rec.set_params(fusion_mode="none", epochs=1)
    assert rec.fusion_mode == "none" and rec.epochs == 1
    clone = CornerTextRecognizer(**rec.get_params())
    assert clone.get_params() == rec.get_params()


def test_repr_mentions_params():
    assert "fusion_mode=" in repr(CornerTextRecognizer())


def test_check_image_batch_channel_orders():
    rng = np.random.default_rng(0)
    cf = rng.random((2, 3, 32, 128))
    assert check_image_batch(cf).shape == (2, 3, 32, 128)
    cl = rng.random((2, 32, 128, 3))
    assert check_image_batch(cl).shape == (2, 3, 32, 128)


def test_check_image_batch_resizes():
    rng = np.random.default_rng(1)
    big = rng.random((2, 3, 64, 256))
    out = check_image_batch(big)
    assert out.shape == (2, 3, 32, 128)
    assert out.min() >= 0.0 and out.max() <= 1.0


def test_check_image_batch_rejects_bad_input():
    with pytest.raises(ShapeError):
        check_image_batch(np.zeros((2, 5, 8, 8)))
    with pytest.raises(ShapeError):
        check_image_batch(np.full((1, 3, 32, 128), 2.0))
    with pytest.raises(ShapeError):
        check_image_batch(np.zeros((3, 32, 128)))


def test_corner_detector_transform_matches_function():
    rng = np.random.default_rng(2)
    X = rng.random((3, 3, 16, 24))
    det = CornerDetector().fit(X)
    maps = det.transform(X)
    assert maps.shape == (3, 1, 16, 24)
    assert set(np.unique(maps)).issubset({0.0, 1.0})
    for i in range(3):
        expected = detect_corners(X[i], DetectorParams()).mask
        assert np.array_equal(maps[i, 0], expected)


def test_corner_detector_fit_validates():
    with pytest.raises(ParameterError):
        CornerDetector(window=4).fit()


def test_corner_detector_fit_transform():
    rng = np.random.default_rng(3)
    X = rng.random((2, 16, 24, 3))  # channel-last accepted
    maps = CornerDetector().fit_transform(X)
    assert maps.shape == (2, 1, 16, 24)


@pytest.fixture(scope="module")
def tiny_fitted():
    words = ["cat", "dog", "sun", "map"]
    ds = SyntheticWordDataset(8, seed=5, lexicon=words, style=RenderStyle())
    X = np.stack([ds[i].image for i in range(8)])
    y = [ds[i].text for i in range(8)]
    rec = CornerTextRecognizer(
        d_model=16, n_heads=2, n_enc_blocks=1, n_dec_blocks=1, ffn_dim=32,
        proj_hidden=16, proj_out=8, max_len=8, epochs=2, batch_size=4, seed=0,
    )
    rec.fit(X, y)
    return rec, X, y


def test_recognizer_fit_predict_score(tiny_fitted):
    rec, X, y = tiny_fitted
    preds = rec.predict(X)
    assert isinstance(preds, list) and len(preds) == 8
    assert all(isinstance(p, str) for p in preds)
    score = rec.score(X, y)
    assert 0.0 <= score <= 1.0
    assert rec.n_steps_ == 4


def test_recognizer_unfitted_raises():
    rec = CornerTextRecognizer()
    with pytest.raises(ContractError, match="not fitted"):
        rec.predict(np.zeros((1, 3, 32, 128)))


def test_recognizer_label_count_mismatch():
    rec = CornerTextRecognizer(epochs=1)
    with pytest.raises(ContractError):
        rec.fit(np.zeros((2, 3, 32, 128)), ["one"])
