"""Synthetic word rendering: a 5x7 bitmap font, styled rasterization, datasets.

Each word is laid out glyph by glyph on a 32x128 canvas, centered, with
per-word scale, per-character jitter, optional stroke dilation, background
clutter, and a final rotation; the corner map is detected on the finished
image so the two model inputs always share one geometry. Everything is a
pure function of the supplied generator, so a seed pins a sample bit for bit.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .corners import DetectorParams, detect_corners
from .data import Charset, Sample, rotate_bilinear
from .validation import DataError, ParameterError

GLYPH_H, GLYPH_W = 7, 5

_FONT_ROWS = {
    "0": (".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."),
    "1": ("..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."),
    "2": (".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"),
    "3": (".###.", "#...#", "....#", "..##.", "....#", "#...#", ".###."),
    "4": ("...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."),
    "5": ("#####", "#....", "####.", "....#", "....#", "#...#", ".###."),
    "6": ("..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."),
    "7": ("#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."),
    "8": (".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."),
    "9": (".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."),
    "a": (".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"),
    "b": ("####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."),
    "c": (".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."),
    "d": ("####.", "#...#", "#...#", "#...#", "#...#", "#...#", "####."),
    "e": ("#####", "#....", "#....", "####.", "#....", "#....", "#####"),
    "f": ("#####", "#....", "#....", "####.", "#....", "#....", "#...."),
    "g": (".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".####"),
    "h": ("#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"),
    "i": (".###.", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."),
    "j": ("..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."),
    "k": ("#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"),
    "l": ("#....", "#....", "#....", "#....", "#....", "#....", "#####"),
    "m": ("#...#", "##.##", "#.#.#", "#...#", "#...#", "#...#", "#...#"),
    "n": ("#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#", "#...#"),
    "o": (".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."),
    "p": ("####.", "#...#", "#...#", "####.", "#....", "#....", "#...."),
    "q": (".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"),
    "r": ("####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"),
    "s": (".####", "#....", "#....", ".###.", "....#", "....#", "####."),
    "t": ("#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."),
    "u": ("#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."),
    "v": ("#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."),
    "w": ("#...#", "#...#", "#...#", "#...#", "#.#.#", "##.##", "#...#"),
    "x": ("#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"),
    "y": ("#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."),
    "z": ("#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"),
}

FONT = {
    ch: np.array([[1.0 if c == "#" else 0.0 for c in row] for row in rows])
    for ch, rows in _FONT_ROWS.items()
}


@dataclass(frozen=True)
class RenderStyle:
    """Randomization ranges for the synthetic renderer."""

    image_h: int = 32
    image_w: int = 128
    min_scale: int = 1
    max_scale: int = 3
    glyph_gap: int = 1
    jitter_px: int = 1
    max_rotation_deg: float = 15.0
    dilation_max_px: int = 1
    max_background: float = 0.25
    min_foreground: float = 0.75
    max_clutter_rects: int = 3

    @classmethod
    def plain(cls) -> "RenderStyle":
        """No jitter, rotation, dilation or clutter; for layout-math checks."""
        return cls(jitter_px=0, max_rotation_deg=0.0, dilation_max_px=0, max_clutter_rects=0)


def _dilate(mask: np.ndarray) -> np.ndarray:
    """1-px Chebyshev dilation (3x3 max filter)."""
    h, w = mask.shape
    padded = np.zeros((h + 2, w + 2))
    padded[1 : 1 + h, 1 : 1 + w] = mask
    out = np.zeros_like(mask)
    for u in range(3):
        for v in range(3):
            np.maximum(out, padded[u : u + h, v : v + w], out=out)
    return out


def word_layout(text: str, style: RenderStyle, scale: int, gap: int | None = None):
    """Column of each glyph plus the top row, for a centered unjittered word."""
    n = len(text)
    gap = style.glyph_gap if gap is None else gap
    total_w = n * GLYPH_W * scale + (n - 1) * gap * scale
    x0 = (style.image_w - total_w) // 2
    y0 = (style.image_h - GLYPH_H * scale) // 2
    xs = [x0 + i * (GLYPH_W + gap) * scale for i in range(n)]
    return xs, y0, total_w


def _fits(n: int, style: RenderStyle, scale: int, gap: int) -> bool:
    total_w = n * GLYPH_W * scale + (n - 1) * gap * scale
    return total_w <= style.image_w - 2 and GLYPH_H * scale <= style.image_h - 2


def max_feasible_scale(text: str, style: RenderStyle) -> tuple[int, int]:
    """Largest workable (scale, gap); gap drops to 0 only as a last resort."""
    n = len(text)
    best = 0
    for s in range(1, style.max_scale + 1):
        if _fits(n, style, s, style.glyph_gap):
            best = s
    if best:
        return best, style.glyph_gap
    if _fits(n, style, 1, 0):
        return 1, 0
    return 0, style.glyph_gap


def render_word(
    text: str,
    rng: np.random.Generator,
    style: RenderStyle | None = None,
    detector: DetectorParams | None = None,
    charset: Charset | None = None,
) -> Sample:
    """Rasterize ``text`` into a styled Sample (image, label, corner map)."""
    style = style or RenderStyle()
    charset = charset or Charset()
    norm = charset.normalize(text)
    if not norm:
        raise DataError(f"word {text!r} has no renderable characters")
    for ch in norm:
        if ch not in FONT:
            raise DataError(f"no glyph for character {ch!r}")
    smax, gap = max_feasible_scale(norm, style)
    if smax < 1:
        raise DataError(
            f"word {text!r} ({len(norm)} chars) does not fit a "
            f"{style.image_h}x{style.image_w} canvas"
        )

    lo = min(max(style.min_scale, 1), smax)
    scale = int(rng.integers(lo, smax + 1))
    background = rng.uniform(0.0, style.max_background)
    foreground = rng.uniform(style.min_foreground, 1.0)
    canvas = np.full((style.image_h, style.image_w), background)

    n_clutter = int(rng.integers(0, style.max_clutter_rects + 1))
    for _ in range(n_clutter):
        rh = int(rng.integers(2, 7))
        rw = int(rng.integers(2, 7))
        rr = int(rng.integers(0, style.image_h - rh + 1))
        rc = int(rng.integers(0, style.image_w - rw + 1))
        canvas[rr : rr + rh, rc : rc + rw] = rng.uniform(0.0, 0.5)

    xs, y0, _ = word_layout(norm, style, scale, gap)
    dilate_px = int(rng.integers(0, style.dilation_max_px + 1))
    for ch, x in zip(norm, xs):
        glyph = np.kron(FONT[ch], np.ones((scale, scale)))
        if dilate_px:
            glyph = _dilate(glyph)
        jy = int(rng.integers(-style.jitter_px, style.jitter_px + 1)) if style.jitter_px else 0
        jx = int(rng.integers(-style.jitter_px, style.jitter_px + 1)) if style.jitter_px else 0
        r = min(max(y0 + jy, 0), style.image_h - glyph.shape[0])
        c = min(max(x + jx, 0), style.image_w - glyph.shape[1])
        region = canvas[r : r + glyph.shape[0], c : c + glyph.shape[1]]
        np.copyto(region, foreground, where=glyph > 0.5)

    if style.max_rotation_deg > 0:
        angle = rng.uniform(-style.max_rotation_deg, style.max_rotation_deg)
        canvas = rotate_bilinear(canvas, angle)

    tint = rng.uniform(0.6, 1.0, size=3)
    image = np.clip(canvas[None] * tint[:, None, None], 0.0, 1.0)
    cmap = detect_corners(image, detector or DetectorParams())
    return Sample(image=image, text=norm, corner_map=cmap.mask[None].astype(np.float64))


def default_lexicon() -> list[str]:
    path = os.path.join(os.path.dirname(__file__), "assets", "lexicon.txt")
    with open(path, "r", encoding="utf-8") as fh:
        words = [line.strip() for line in fh if line.strip()]
    return words


def load_lexicon(path=None) -> list[str]:
    if path is None:
        return default_lexicon()
    with open(path, "r", encoding="utf-8") as fh:
        words = [line.strip() for line in fh if line.strip()]
    if not words:
        raise DataError(f"lexicon {path} is empty")
    return words


class SyntheticWordDataset:
    """Deterministic on-demand rendered words; sample i depends only on (seed, i)."""

    def __init__(
        self,
        count: int,
        seed: int = 0,
        lexicon: list[str] | None = None,
        style: RenderStyle | None = None,
        detector: DetectorParams | None = None,
    ):
        if count < 1:
            raise ParameterError(f"count must be >= 1, got {count}")
        self.count = count
        self.seed = seed
        self.style = style or RenderStyle()
        self.detector = detector or DetectorParams()
        charset = Charset()
        words = lexicon if lexicon is not None else default_lexicon()
        # Keep only words the canvas can hold, so small-geometry runs work
        # with the full embedded lexicon.
        self.lexicon = [
            w for w in words
            if charset.normalize(w) and max_feasible_scale(charset.normalize(w), self.style)[0] >= 1
        ]
        if not self.lexicon:
            raise ParameterError(
                f"no lexicon word fits a {self.style.image_h}x{self.style.image_w} canvas"
            )
        self._cache: dict[int, Sample] = {}

    def __len__(self):
        return self.count

    def word_for(self, index: int) -> str:
        rng = np.random.default_rng(np.random.SeedSequence((self.seed, index)))
        return self.lexicon[int(rng.integers(0, len(self.lexicon)))]

    def __getitem__(self, index: int) -> Sample:
        if not 0 <= index < self.count:
            raise IndexError(index)
        if index in self._cache:
            return self._cache[index]
        rng = np.random.default_rng(np.random.SeedSequence((self.seed, index)))
        word = self.lexicon[int(rng.integers(0, len(self.lexicon)))]
        sample = render_word(word, rng, self.style, self.detector)
        self._cache[index] = sample
        return sample


def write_synthetic_dataset(out_dir, count: int, seed: int = 0, lexicon=None) -> str:
    """Render ``count`` words to PNGs plus a manifest; returns the manifest path."""
    from .imageio import write_png

    os.makedirs(out_dir, exist_ok=True)
    dataset = SyntheticWordDataset(count, seed=seed, lexicon=lexicon)
    lines = []
    for i in range(count):
        sample = dataset[i]
        fname = f"word_{i:05d}.png"
        write_png(os.path.join(out_dir, fname), sample.image)
        lines.append(f"{fname}\t{sample.text}")
    manifest_path = os.path.join(out_dir, "manifest.tsv")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return manifest_path
