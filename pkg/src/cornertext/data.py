"""Charset, tokenization, image geometry, augmentation and manifest loading.

Labels are fixed-length token sequences [chars..., EOS, PAD...] over a
36-symbol lowercase-alphanumeric charset by default. Images are (3, H, W)
float arrays in [0, 1], resized to 32x128 with plain bilinear interpolation
(aspect ratio not preserved), and every sample carries the corner map of its
final geometry: corners are detected after resize and after augmentation.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .corners import DetectorParams, detect_corners
from .validation import DataError, ParameterError

DEFAULT_SYMBOLS = "0123456789abcdefghijklmnopqrstuvwxyz"


@dataclass(frozen=True)
class Charset:
    """Recognizable symbols plus the PAD/BOS/EOS specials (ids 0/1/2)."""

    symbols: str = DEFAULT_SYMBOLS

    PAD = 0
    BOS = 1
    EOS = 2

    def __post_init__(self):
        if len(set(self.symbols)) != len(self.symbols):
            raise DataError("charset contains duplicate symbols")

    @property
    def vocab_size(self) -> int:
        return len(self.symbols) + 3

    def char_to_id(self, ch: str) -> int:
        idx = self.symbols.find(ch)
        if idx < 0:
            raise DataError(f"character {ch!r} not in charset")
        return idx + 3

    def id_to_char(self, token: int) -> str:
        if not 3 <= token < self.vocab_size:
            raise DataError(f"token id {token} is not a symbol id")
        return self.symbols[token - 3]

    def normalize(self, text: str) -> str:
        """Case-fold and drop anything outside the charset."""
        return "".join(ch for ch in text.lower() if ch in self.symbols)


def tokenize(text: str, charset: Charset, max_len: int) -> np.ndarray:
    """Normalized characters, one EOS, PAD fill; always exactly ``max_len`` ids."""
    norm = charset.normalize(text)
    if len(norm) > max_len - 1:
        raise DataError(
            f"label {text!r} has {len(norm)} usable characters; at most "
            f"{max_len - 1} fit a length-{max_len} sequence"
        )
    ids = [charset.char_to_id(ch) for ch in norm]
    ids.append(Charset.EOS)
    ids.extend([Charset.PAD] * (max_len - len(ids)))
    return np.array(ids, dtype=np.int64)


def detokenize(ids, charset: Charset) -> str:
    """Characters up to the first EOS (PAD/BOS skipped defensively)."""
    out = []
    for token in np.asarray(ids).tolist():
        if token == Charset.EOS:
            break
        if token in (Charset.PAD, Charset.BOS):
            continue
        out.append(charset.id_to_char(int(token)))
    return "".join(out)


@dataclass
class Sample:
    image: np.ndarray  # (3, 32, 128) float64 in [0, 1]
    text: str
    corner_map: np.ndarray  # (1, 32, 128) float64 in {0, 1}


# -- bilinear geometry ---------------------------------------------------------


def bilinear_resize(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Pixel-center-aligned bilinear resampling of (H, W) or (C, H, W) arrays."""
    image = np.asarray(image, dtype=np.float64)
    squeeze = image.ndim == 2
    img = image[None] if squeeze else image
    _, h, w = img.shape
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    y0 = np.clip(np.floor(ys).astype(int), 0, h - 1)
    x0 = np.clip(np.floor(xs).astype(int), 0, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = np.clip(ys - y0, 0.0, 1.0)[:, None]
    wx = np.clip(xs - x0, 0.0, 1.0)[None, :]
    top = img[:, y0[:, None], x0[None, :]] * (1 - wx) + img[:, y0[:, None], x1[None, :]] * wx
    bot = img[:, y1[:, None], x0[None, :]] * (1 - wx) + img[:, y1[:, None], x1[None, :]] * wx
    out = top * (1 - wy) + bot * wy
    return out[0] if squeeze else out


def rotate_bilinear(image: np.ndarray, degrees: float) -> np.ndarray:
    """Rotate (H, W) or (C, H, W) about the center; replicate border sampling."""
    image = np.asarray(image, dtype=np.float64)
    squeeze = image.ndim == 2
    img = image[None] if squeeze else image
    _, h, w = img.shape
    theta = np.deg2rad(degrees)
    c, s = np.cos(theta), np.sin(theta)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.meshgrid(np.arange(h) - cy, np.arange(w) - cx, indexing="ij")
    src_y = c * yy - s * xx + cy
    src_x = s * yy + c * xx + cx
    y0 = np.floor(src_y).astype(int)
    x0 = np.floor(src_x).astype(int)
    wy = src_y - y0
    wx = src_x - x0
    y0c = np.clip(y0, 0, h - 1)
    y1c = np.clip(y0 + 1, 0, h - 1)
    x0c = np.clip(x0, 0, w - 1)
    x1c = np.clip(x0 + 1, 0, w - 1)
    top = img[:, y0c, x0c] * (1 - wx) + img[:, y0c, x1c] * wx
    bot = img[:, y1c, x0c] * (1 - wx) + img[:, y1c, x1c] * wx
    return (top * (1 - wy) + bot * wy)[0] if squeeze else top * (1 - wy) + bot * wy


# -- augmentation ---------------------------------------------------------------


@dataclass(frozen=True)
class AugmentPolicy:
    rotation: bool = True
    gaussian_noise: bool = True
    max_rotation_deg: float = 10.0
    max_noise_sigma: float = 0.05

    @property
    def enabled(self) -> bool:
        return self.rotation or self.gaussian_noise


def augment(image: np.ndarray, rng: np.random.Generator, policy: AugmentPolicy) -> np.ndarray:
    """Random rotation and/or additive Gaussian noise, clamped to [0, 1]."""
    if not policy.enabled:
        return image
    out = np.asarray(image, dtype=np.float64)
    if policy.rotation:
        angle = rng.uniform(-policy.max_rotation_deg, policy.max_rotation_deg)
        out = rotate_bilinear(out, angle)
    if policy.gaussian_noise:
        sigma = rng.uniform(0.0, policy.max_noise_sigma)
        out = out + rng.standard_normal(out.shape) * sigma
    return np.clip(out, 0.0, 1.0)


# -- manifest datasets ------------------------------------------------------------


@dataclass
class Manifest:
    root: str
    entries: list  # (filename, label)


def load_manifest(path, charset: Charset | None = None, max_len: int = 25) -> Manifest:
    """Read a ``filename<TAB>label`` manifest.

    Rejects duplicate filenames (reporting both line numbers), empty or
    untokenizable labels, and labels too long for ``max_len``.
    """
    path = os.fspath(path)
    charset = charset or Charset()
    if not os.path.exists(path):
        raise DataError(f"manifest not found: {path}")
    entries = []
    seen: dict[str, int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if "\t" not in line:
                raise DataError(f"{path}:{lineno}: expected 'filename<TAB>label', got {line!r}")
            fname, label = line.split("\t", 1)
            if not label:
                raise DataError(f"{path}:{lineno}: empty label for {fname!r}")
            norm = charset.normalize(label)
            if not norm:
                raise DataError(
                    f"{path}:{lineno}: label {label!r} has no characters in the charset"
                )
            if len(norm) > max_len - 1:
                raise DataError(
                    f"{path}:{lineno}: label {label!r} too long ({len(norm)} chars, "
                    f"max {max_len - 1})"
                )
            if fname in seen:
                raise DataError(
                    f"{path}: duplicate filename {fname!r} at lines {seen[fname]} and {lineno}"
                )
            seen[fname] = lineno
            entries.append((fname, label))
    return Manifest(root=os.path.dirname(path), entries=entries)


def load_sample(
    manifest: Manifest,
    index: int,
    detector: DetectorParams | None = None,
    image_h: int = 32,
    image_w: int = 128,
) -> Sample:
    """Decode, resize, and corner-map one manifest entry."""
    from .imageio import read_png

    fname, label = manifest.entries[index]
    path = os.path.join(manifest.root, fname)
    try:
        img = read_png(path)
    except FileNotFoundError:
        raise DataError(f"image file missing: {path}") from None
    except Exception as err:
        raise DataError(f"cannot decode image {path}: {err}") from err
    if img.shape[1] != image_h or img.shape[2] != image_w:
        img = np.clip(bilinear_resize(img, image_h, image_w), 0.0, 1.0)
    cmap = detect_corners(img, detector or DetectorParams())
    return Sample(image=img, text=label, corner_map=cmap.mask[None].astype(np.float64))


class ManifestDataset:
    """Index-addressable view over a manifest; corner maps computed per load."""

    def __init__(self, manifest: Manifest, detector: DetectorParams | None = None,
                 image_h: int = 32, image_w: int = 128):
        self.manifest = manifest
        self.detector = detector or DetectorParams()
        self.image_h = image_h
        self.image_w = image_w

    def __len__(self):
        return len(self.manifest.entries)

    def __getitem__(self, index) -> Sample:
        return load_sample(self.manifest, index, self.detector, self.image_h, self.image_w)


# -- batch assembly ----------------------------------------------------------------


@dataclass
class Batch:
    images: np.ndarray  # (B, 3, H, W)
    corner_maps: np.ndarray  # (B, 1, H, W)
    decoder_input: np.ndarray  # (B, m) ids, BOS-shifted
    targets: np.ndarray  # (B, m) ids
    ce_mask: np.ndarray  # (B, m) float {0,1}; chars plus the EOS position
    texts: list = field(default_factory=list)


def make_batch(samples, charset: Charset, max_len: int) -> Batch:
    """Stack samples; teacher-forcing input is the target shifted right of BOS."""
    if not samples:
        raise ParameterError("cannot assemble an empty batch")
    images = np.stack([s.image for s in samples])
    corner_maps = np.stack([s.corner_map for s in samples])
    targets = np.stack([tokenize(s.text, charset, max_len) for s in samples])
    decoder_input = np.full_like(targets, Charset.PAD)
    decoder_input[:, 0] = Charset.BOS
    decoder_input[:, 1:] = targets[:, :-1]
    mask = np.zeros(targets.shape, dtype=np.float64)
    for i, row in enumerate(targets):
        eos_pos = int(np.nonzero(row == Charset.EOS)[0][0])
        mask[i, : eos_pos + 1] = 1.0
    return Batch(
        images=images,
        corner_maps=corner_maps,
        decoder_input=decoder_input,
        targets=targets,
        ce_mask=mask,
        texts=[s.text for s in samples],
    )
