"""Corner detection: structure tensor, min-eigenvalue / Harris responses, NMS.

Produces the sparse binary corner map that the recognizer consumes as its
second input branch. Implementations accumulate window sums offset-by-offset
in a fixed (row-major) order so results match a per-pixel reference
implementation exactly, not just to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .validation import (
    ParameterError,
    ShapeError,
    as_gray_image,
    as_rgb_image,
    check_in_open_interval,
    check_odd_window,
)

SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
SOBEL_Y = np.array([[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]])

LUMA_R, LUMA_G, LUMA_B = 0.299, 0.587, 0.114


@dataclass
class DetectorParams:
    """Knobs for the corner detector.

    kind: "shi_tomasi" (min-eigenvalue response) or "harris".
    window: odd box-window extent for structure-tensor accumulation.
    quality_level: response threshold as a fraction of the maximum response.
    min_distance: Chebyshev exclusion radius for non-maximum suppression.
    max_corners: hard cap on accepted corners.
    """

    kind: str = "shi_tomasi"
    window: int = 3
    harris_k: float = 0.04
    quality_level: float = 0.01
    min_distance: int = 3
    max_corners: int = 512

    def __post_init__(self):
        if self.kind not in ("shi_tomasi", "harris"):
            raise ParameterError(f"unknown detector kind {self.kind!r}")
        check_odd_window(self.window)
        check_in_open_interval(self.quality_level, 0.0, 1.0, "quality_level")
        check_in_open_interval(self.harris_k, 0.0, 0.25, "harris_k")
        if self.min_distance < 0:
            raise ParameterError(f"min_distance must be >= 0, got {self.min_distance}")
        if self.max_corners < 1:
            raise ParameterError(f"max_corners must be >= 1, got {self.max_corners}")


@dataclass
class CornerMap:
    """Binary corner mask plus the accepted corners in descending response."""

    mask: np.ndarray  # (H, W) uint8 in {0, 1}
    corners: list = field(default_factory=list)  # (row, col, response)

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    def count(self) -> int:
        return int(self.mask.sum())


def to_grayscale(rgb) -> np.ndarray:
    """Luma conversion 0.299 R + 0.587 G + 0.114 B of a (3, H, W) image."""
    rgb = as_rgb_image(rgb)
    return LUMA_R * rgb[0] + LUMA_G * rgb[1] + LUMA_B * rgb[2]


def _replicate_pad(img: np.ndarray, r: int) -> np.ndarray:
    return np.pad(img, r, mode="edge")


def sobel_gradients(gray) -> tuple[np.ndarray, np.ndarray]:
    """3x3 Sobel x/y gradients with replicate border padding."""
    gray = as_gray_image(gray)
    h, w = gray.shape
    if h < 3 or w < 3:
        raise ShapeError(f"image must be at least 3x3 for Sobel gradients, got {h}x{w}")
    gp = _replicate_pad(gray, 1)
    ix = np.zeros_like(gray)
    iy = np.zeros_like(gray)
    # One smoothing tap at a time, as weighted right-minus-left /
    # bottom-minus-top differences. Pairing the opposite-signed kernel taps
    # makes flat regions cancel exactly, and the fixed accumulation order
    # keeps results identical to a per-pixel loop.
    for t, c in ((0, 1.0), (1, 2.0), (2, 1.0)):
        ix += c * (gp[t : t + h, 2 : 2 + w] - gp[t : t + h, 0:w])
        iy += c * (gp[2 : 2 + h, t : t + w] - gp[0:h, t : t + w])
    return ix, iy


def structure_tensor(ix, iy, window: int = 3) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Box-window sums of gradient products (Sxx, Sxy, Syy), replicate padded."""
    check_odd_window(window)
    ix = np.asarray(ix, dtype=np.float64)
    iy = np.asarray(iy, dtype=np.float64)
    if ix.shape != iy.shape:
        raise ShapeError(f"gradient shapes disagree: {ix.shape} vs {iy.shape}")
    h, w = ix.shape
    r = window // 2
    pxx = _replicate_pad(ix * ix, r)
    pxy = _replicate_pad(ix * iy, r)
    pyy = _replicate_pad(iy * iy, r)
    sxx = np.zeros_like(ix)
    sxy = np.zeros_like(ix)
    syy = np.zeros_like(ix)
    for u in range(window):
        for v in range(window):
            sxx += pxx[u : u + h, v : v + w]
            sxy += pxy[u : u + h, v : v + w]
            syy += pyy[u : u + h, v : v + w]
    return sxx, sxy, syy


def min_eigen_response(sxx, sxy, syy) -> np.ndarray:
    """Smaller eigenvalue of the 2x2 structure tensor, in closed form."""
    half_trace = (sxx + syy) / 2.0
    half_diff = (sxx - syy) / 2.0
    return half_trace - np.sqrt(half_diff * half_diff + sxy * sxy)


def harris_response(sxx, sxy, syy, k: float = 0.04) -> np.ndarray:
    """det(S) - k * trace(S)^2."""
    check_in_open_interval(k, 0.0, 0.25, "harris_k")
    trace = sxx + syy
    return (sxx * syy - sxy * sxy) - k * (trace * trace)


def threshold_nms(response, params: DetectorParams) -> CornerMap:
    """Relative thresholding plus greedy Chebyshev non-maximum suppression.

    Candidates with response > quality_level * max(response) are visited in
    descending response (ties by ascending row, then column); a candidate is
    accepted unless it lies within ``min_distance`` (Chebyshev, strict) of an
    already accepted corner, until ``max_corners`` are taken.
    """
    response = np.asarray(response, dtype=np.float64)
    if not np.all(np.isfinite(response)):
        raise ShapeError("response field must be finite")
    h, w = response.shape
    mask = np.zeros((h, w), dtype=np.uint8)
    rmax = response.max()
    if rmax <= 0.0:
        return CornerMap(mask=mask)
    threshold = params.quality_level * rmax
    rows, cols = np.nonzero(response > threshold)
    values = response[rows, cols]
    order = np.lexsort((cols, rows, -values))
    accepted: list[tuple[int, int, float]] = []
    for idx in order:
        r, c, val = int(rows[idx]), int(cols[idx]), float(values[idx])
        ok = True
        for ar, ac, _ in accepted:
            if max(abs(ar - r), abs(ac - c)) < params.min_distance:
                ok = False
                break
        if ok:
            accepted.append((r, c, val))
            if len(accepted) >= params.max_corners:
                break
    for r, c, _ in accepted:
        mask[r, c] = 1
    return CornerMap(mask=mask, corners=accepted)


def detect_corners(image, params: DetectorParams | None = None) -> CornerMap:
    """Full pipeline: grayscale -> Sobel -> structure tensor -> response -> NMS."""
    params = params or DetectorParams()
    image = np.asarray(image, dtype=np.float64)
    gray = to_grayscale(image) if image.ndim == 3 else as_gray_image(image)
    ix, iy = sobel_gradients(gray)
    sxx, sxy, syy = structure_tensor(ix, iy, params.window)
    if params.kind == "harris":
        response = harris_response(sxx, sxy, syy, params.harris_k)
    else:
        response = min_eigen_response(sxx, sxy, syy)
    return threshold_nms(response, params)
