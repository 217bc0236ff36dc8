"""Synthetic textured corpus for demos and desk-scale training runs.

Images mix smooth color fields, oriented gratings, and granular noise, so
a rate-limited codec must choose between blurring texture away and
synthesizing it: the regime where the realism weight matters.
"""

from pathlib import Path

import numpy as np

from .data import save_image


def make_texture_image(rng, size=96, grain_range=(18.0, 55.0)):
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) / size
    img = np.zeros((size, size, 3))
    base = rng.uniform(50, 206, size=3)
    slope = rng.uniform(-60, 60, size=(2, 3))
    img += base + xx[..., None] * slope[0] + yy[..., None] * slope[1]

    for _ in range(rng.integers(1, 4)):
        theta = rng.uniform(0, np.pi)
        freq = rng.uniform(2, 10)
        phase = rng.uniform(0, 2 * np.pi)
        wave = np.sin(2 * np.pi * freq * (np.cos(theta) * xx + np.sin(theta) * yy) + phase)
        img += wave[..., None] * rng.uniform(5, 25, size=3)

    # Fine texture: band-pass noise. Its phase field is fresh randomness per
    # image (quadratic in pixels, so genuinely incompressible at low rate),
    # while its band-energy signature is simple. A distortion-optimal decoder
    # must attenuate it; a realism-driven one can synthesize an
    # amplitude-matched equivalent.
    spectrum = np.fft.rfft2(rng.normal(0, 1, (size, size)))
    fy = np.fft.fftfreq(size)[:, None]
    fx = np.fft.rfftfreq(size)[None, :]
    radius = np.sqrt(fx ** 2 + fy ** 2)
    center = rng.uniform(0.24, 0.38)
    band = np.exp(-0.5 * ((radius - center) / 0.05) ** 2)
    grain = np.fft.irfft2(spectrum * band, s=(size, size))
    grain /= max(grain.std(), 1e-9)
    amp = rng.uniform(*grain_range)
    tint = rng.uniform(0.7, 1.0, size=3)
    img += grain[..., None] * amp * tint

    return np.clip(np.round(img), 0, 255).astype(np.uint8)


def make_texture_corpus(out_dir, count, size=96, seed=0, grain_range=(18.0, 55.0)):
    """Write ``count`` PNG images and return their paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    paths = []
    for i in range(count):
        p = out_dir / f"tex_{i:05d}.png"
        save_image(make_texture_image(rng, size, grain_range), p)
        paths.append(p)
    return paths


def make_patch_set(count, size=64, seed=0, grain_range=(18.0, 55.0)):
    """In-memory (count, size, size, 3) uint8 evaluation patches."""
    rng = np.random.default_rng(seed)
    return np.stack([make_texture_image(rng, size, grain_range) for _ in range(count)])
