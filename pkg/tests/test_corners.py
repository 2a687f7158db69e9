"""Corner detector checks against per-pixel brute-force references."""

import numpy as np
import pytest

from cornertext.corners import (
    CornerMap,
    DetectorParams,
    detect_corners,
    harris_response,
    min_eigen_response,
    sobel_gradients,
    structure_tensor,
    threshold_nms,
    to_grayscale,
)
from cornertext.validation import ParameterError, ShapeError

from oracles import (
    naive_detect_corners,
    naive_min_eigen,
    naive_sobel,
    naive_structure_tensor,
)


def test_grayscale_weights():
    white = np.ones((3, 2, 2))
    assert np.allclose(to_grayscale(white), 1.0)
    assert np.allclose(to_grayscale(np.zeros((3, 2, 2))), 0.0)
    red = np.zeros((3, 2, 2))
    red[0] = 1.0
    assert np.allclose(to_grayscale(red), 0.299)


def test_grayscale_rejects_wrong_channels():
    with pytest.raises(ShapeError):
        to_grayscale(np.zeros((4, 5, 5)))


def test_sobel_constant_image_zero():
    ix, iy = sobel_gradients(np.full((6, 7), 0.4))
    assert np.all(ix == 0.0) and np.all(iy == 0.0)


def test_sobel_vertical_step_edge():
    img = np.zeros((8, 8))
    img[:, 4:] = 1.0
    ix, iy = sobel_gradients(img)
    assert np.all(iy == 0.0)
    interior = np.abs(ix[1:-1])
    assert interior.max() == np.abs(ix).max()
    assert np.argmax(np.abs(ix[4])) in (3, 4)


def test_sobel_matches_per_pixel_application():
    rng = np.random.default_rng(0)
    img = rng.random((10, 13))
    ix, iy = sobel_gradients(img)
    rix, riy = naive_sobel(img)
    assert np.array_equal(ix, rix)
    assert np.array_equal(iy, riy)


def test_sobel_too_small():
    with pytest.raises(ShapeError):
        sobel_gradients(np.zeros((2, 5)))


def test_structure_tensor_zero_gradients():
    z = np.zeros((5, 5))
    sxx, sxy, syy = structure_tensor(z, z, 3)
    assert np.all(sxx == 0.0) and np.all(sxy == 0.0) and np.all(syy == 0.0)


def test_structure_tensor_counting():
    ones = np.ones((6, 6))
    zeros = np.zeros((6, 6))
    sxx, sxy, syy = structure_tensor(ones, zeros, 3)
    assert np.all(sxx == 9.0)
    assert np.all(sxy == 0.0) and np.all(syy == 0.0)


def test_structure_tensor_even_window_rejected():
    with pytest.raises(ParameterError):
        structure_tensor(np.zeros((5, 5)), np.zeros((5, 5)), 4)


def test_structure_tensor_matches_naive_window_sum():
    rng = np.random.default_rng(1)
    ix = rng.standard_normal((9, 11))
    iy = rng.standard_normal((9, 11))
    for window in (3, 5):
        got = structure_tensor(ix, iy, window)
        ref = naive_structure_tensor(ix, iy, window)
        for g, r in zip(got, ref):
            assert np.array_equal(g, r)


def test_structure_tensor_positive_semidefinite():
    rng = np.random.default_rng(2)
    img = rng.random((16, 16))
    ix, iy = sobel_gradients(img)
    sxx, sxy, syy = structure_tensor(ix, iy, 3)
    assert sxx.min() >= 0.0 and syy.min() >= 0.0
    assert (sxx * syy - sxy * sxy).min() >= -1e-9


def test_min_eigen_diagonal_cases():
    assert min_eigen_response(np.array(2.0), np.array(0.0), np.array(2.0)) == 2.0
    assert min_eigen_response(np.array(3.0), np.array(0.0), np.array(1.0)) == 1.0


def test_min_eigen_matches_general_eigensolver():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((2000, 2, 2))
    s = a @ a.transpose(0, 2, 1)  # random PSD tensors
    got = min_eigen_response(s[:, 0, 0], s[:, 0, 1], s[:, 1, 1])
    ref = np.linalg.eigvalsh(s)[:, 0]
    assert np.max(np.abs(got - ref)) < 1e-10


def test_min_eigen_below_mean_eigenvalue():
    rng = np.random.default_rng(4)
    img = rng.random((20, 20))
    ix, iy = sobel_gradients(img)
    sxx, sxy, syy = structure_tensor(ix, iy, 3)
    assert np.all(min_eigen_response(sxx, sxy, syy) <= (sxx + syy) / 2.0 + 1e-12)


def test_harris_formula_cases():
    assert harris_response(np.array(0.0), np.array(0.0), np.array(0.0), 0.04) == 0.0
    got = harris_response(np.array(1.0), np.array(0.0), np.array(1.0), 0.04)
    assert abs(got - 0.84) < 1e-15


def test_harris_matches_direct_formula():
    rng = np.random.default_rng(5)
    sxx = rng.random(500) * 4
    syy = rng.random(500) * 4
    sxy = rng.standard_normal(500)
    k = 0.06
    ref = (sxx * syy - sxy**2) - k * (sxx + syy) ** 2
    assert np.max(np.abs(harris_response(sxx, sxy, syy, k) - ref)) < 1e-12


def test_threshold_nms_flat_response_empty():
    cm = threshold_nms(np.zeros((8, 8)), DetectorParams())
    assert isinstance(cm, CornerMap) and cm.count() == 0


def test_threshold_nms_zero_min_distance_is_plain_threshold():
    rng = np.random.default_rng(6)
    resp = rng.random((12, 12))
    params = DetectorParams(quality_level=0.5, min_distance=0, max_corners=10_000)
    cm = threshold_nms(resp, params)
    assert np.array_equal(cm.mask.astype(bool), resp > 0.5 * resp.max())


def test_threshold_nms_respects_spacing_and_cap():
    rng = np.random.default_rng(7)
    resp = rng.random((20, 20))
    params = DetectorParams(quality_level=0.01, min_distance=4, max_corners=5)
    cm = threshold_nms(resp, params)
    assert cm.count() <= 5
    pts = [(r, c) for r, c, _ in cm.corners]
    for i, (r1, c1) in enumerate(pts):
        for r2, c2 in pts[i + 1 :]:
            assert max(abs(r1 - r2), abs(c1 - c2)) >= 4


def test_square_geometry():
    img = np.zeros((32, 32))
    img[12:20, 12:20] = 1.0
    for kind in ("shi_tomasi", "harris"):
        cm = detect_corners(img, DetectorParams(kind=kind))
        assert cm.count() == 4
        true_corners = [(12, 12), (12, 19), (19, 12), (19, 19)]
        for r, c, _ in cm.corners:
            assert min(max(abs(r - tr), abs(c - tc)) for tr, tc in true_corners) <= 2


def test_black_image_empty_map():
    cm = detect_corners(np.zeros((3, 32, 64)))
    assert cm.count() == 0
    assert cm.mask.shape == (32, 64)


def test_uniform_image_no_corners():
    assert detect_corners(np.full((32, 32), 0.7)).count() == 0


def test_checkerboard_junctions_detected():
    cells = (((np.arange(32)[:, None] // 4) + (np.arange(32)[None, :] // 4)) % 2).astype(
        float
    )
    cm = detect_corners(cells, DetectorParams())
    junctions = [(r, c) for r in range(4, 32, 4) for c in range(4, 32, 4)]
    for jr, jc in junctions:
        assert min(max(abs(jr - r), abs(jc - c)) for r, c, _ in cm.corners) <= 2


M_GLYPH = [
    "#...#",
    "##.##",
    "#.#.#",
    "#...#",
    "#...#",
    "#...#",
    "#...#",
]


def draw_glyph(rows, scale, canvas_hw=(32, 32)):
    h, w = canvas_hw
    img = np.zeros((h, w))
    gh, gw = len(rows) * scale, len(rows[0]) * scale
    r0, c0 = (h - gh) // 2, (w - gw) // 2
    for i, row in enumerate(rows):
        for j, ch in enumerate(row):
            if ch == "#":
                img[r0 + i * scale : r0 + (i + 1) * scale, c0 + j * scale : c0 + (j + 1) * scale] = 1.0
    return img


def test_glyph_corner_count_stable_across_scales():
    # Scales above the NMS radius, so structural corners stay separated.
    counts = []
    for scale in (4, 5):
        cm = detect_corners(draw_glyph(M_GLYPH, scale, canvas_hw=(48, 48)))
        counts.append(cm.count())
        assert cm.count() >= 4
    assert abs(counts[0] - counts[1]) <= 2


def test_mask_binary_and_above_threshold():
    rng = np.random.default_rng(8)
    img = rng.random((3, 24, 40))
    params = DetectorParams()
    cm = detect_corners(img, params)
    assert set(np.unique(cm.mask)).issubset({0, 1})
    assert cm.count() == len(cm.corners)


def test_intensity_scaling_invariance():
    rng = np.random.default_rng(9)
    img = rng.random((3, 16, 24))
    a = detect_corners(img, DetectorParams())
    b = detect_corners(img * 0.5, DetectorParams())
    assert np.array_equal(a.mask, b.mask)


@pytest.mark.parametrize("kind", ["shi_tomasi", "harris"])
def test_full_pipeline_matches_brute_force(kind):
    rng = np.random.default_rng(10)
    params = DetectorParams(kind=kind)
    for _ in range(3):
        img = rng.random((3, 16, 32))
        cm = detect_corners(img, params)
        ref_mask, ref_corners = naive_detect_corners(img, params)
        assert np.array_equal(cm.mask, ref_mask)
        assert cm.corners == ref_corners


def test_detector_params_validation():
    with pytest.raises(ParameterError):
        DetectorParams(window=4)
    with pytest.raises(ParameterError):
        DetectorParams(quality_level=1.5)
    with pytest.raises(ParameterError):
        DetectorParams(harris_k=0.3)
    with pytest.raises(ParameterError):
        DetectorParams(kind="superpoint")
