"""Image I/O, crops, padding, and dataset iteration."""

from pathlib import Path

import numpy as np
from PIL import Image as PILImage


class ImageError(ValueError):
    """Raised for unreadable or unsupported image inputs."""


_SUPPORTED_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")


def load_image(path, convert_to_rgb=True):
    """Load an image file as an (H, W, 3) uint8 RGB array.

    PNG round-trips losslessly. 16-bit inputs are rejected; non-RGB modes
    are converted to RGB unless ``convert_to_rgb`` is False.
    """
    try:
        with PILImage.open(path) as im:
            if im.mode in ("I", "I;16", "I;16B", "I;16L", "I;16N"):
                raise ImageError(f"unsupported bit depth in {path}")
            if im.mode != "RGB":
                if not convert_to_rgb:
                    raise ImageError(f"non-RGB image {path} (mode {im.mode})")
                im = im.convert("RGB")
            arr = np.asarray(im, dtype=np.uint8)
    except ImageError:
        raise
    except FileNotFoundError:
        raise
    except Exception as e:
        raise ImageError(f"cannot read image {path}: {e}") from e
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ImageError(f"unexpected shape {arr.shape} for {path}")
    return arr


def save_image(pixels, path):
    """Write an (H, W, 3) uint8 array as PNG (or whatever the suffix says)."""
    arr = np.asarray(pixels)
    if arr.dtype != np.uint8:
        arr = np.clip(np.round(arr), 0, 255).astype(np.uint8)
    PILImage.fromarray(arr, mode="RGB").save(path)


def random_resized_crop(img, side, rng, scale_range=(1.0, 1.0)):
    """Resize by a random factor, then take a random ``side`` x ``side`` crop.

    ``scale_range`` multiplies the image dimensions; the factor is sampled
    uniformly. Deterministic for a given ``rng`` state.
    """
    h, w = img.shape[:2]
    lo, hi = scale_range
    if lo > hi:
        raise ValueError("scale_range must be (lo, hi) with lo <= hi")
    short = min(h, w)
    if hi * short < side - 0.5:
        raise ImageError(
            f"image {h}x{w} too small for a {side}px crop even at max resize {hi}")
    factor = float(rng.uniform(lo, hi))
    if factor != 1.0:
        nh = max(side, int(round(h * factor)))
        nw = max(side, int(round(w * factor)))
        im = PILImage.fromarray(img).resize((nw, nh), PILImage.BILINEAR)
        img = np.asarray(im, dtype=np.uint8)
        h, w = nh, nw
    if min(h, w) < side:
        raise ImageError(f"resized image {h}x{w} smaller than crop side {side}")
    top = int(rng.integers(0, h - side + 1))
    left = int(rng.integers(0, w - side + 1))
    return img[top:top + side, left:left + side]


def pad_to_multiple(img, m):
    """Reflection-pad so both spatial dims are multiples of ``m``.

    Returns the padded image and the original (h, w) for cropping after
    decode.
    """
    if m < 1:
        raise ValueError("padding multiple must be >= 1")
    h, w = img.shape[:2]
    ph = (m - h % m) % m
    pw = (m - w % m) % m
    if ph == 0 and pw == 0:
        return img, (h, w)
    padded = np.pad(img, ((0, ph), (0, pw), (0, 0)), mode="reflect")
    return padded, (h, w)


def unpad(img, orig_dims):
    h, w = orig_dims
    return img[:h, :w]


def list_images(root):
    """Deterministic lexicographic enumeration of image files under ``root``."""
    root = Path(root)
    if not root.is_dir():
        raise ImageError(f"dataset directory not found: {root}")
    return sorted(
        p for p in root.iterdir()
        if p.is_file() and p.suffix.lower() in _SUPPORTED_SUFFIXES
    )


class CropDataset:
    """Directory of images sampled as fixed-size training crops.

    The resize factor per sample is chosen so the shorter side lands
    uniformly in ``short_side_range`` times the crop side before cropping.
    Images are cached in memory; fine at desk scale.
    """

    def __init__(self, root, side, short_side_range=(1.0, 2.0)):
        self.side = side
        self.short_side_range = short_side_range
        self.paths = list_images(root)
        if not self.paths:
            raise ImageError(f"no images found in {root}")
        self._images = [load_image(p) for p in self.paths]

    def __len__(self):
        return len(self._images)

    def sample_crop(self, rng, index=None):
        if index is None:
            index = int(rng.integers(0, len(self._images)))
        img = self._images[index]
        short = min(img.shape[:2])
        lo = self.short_side_range[0] * self.side / short
        hi = self.short_side_range[1] * self.side / short
        # Never downscale below the crop side.
        lo = max(lo, self.side / short)
        hi = max(hi, lo)
        return random_resized_crop(img, self.side, rng, scale_range=(lo, hi))

    def sample_batch(self, rng, batch_size):
        """(B, side, side, 3) uint8 batch; bit-identical for equal seeds."""
        return np.stack([self.sample_crop(rng) for _ in range(batch_size)])
