"""Reproducible test problems: phantoms, seeded noise, blur degradation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imgcore import ImageBuffer
from .linops import BlurSpec, blur_apply

PHANTOM_KINDS = ("cartoon", "texture", "mixed")


@dataclass(frozen=True)
class DegradationSpec:
    """Blur-then-noise forward model parameters with a fixed RNG seed."""

    blur: BlurSpec
    sigma: float
    seed: int = 0

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class PhantomSpec:
    """Synthetic ground-truth layout: piecewise-constant, sinusoidal, or both."""

    width: int
    height: int
    kind: str
    texture_freq: float = 8.0
    contrast: float = 1.0

    def __post_init__(self):
        if self.width < 32 or self.height < 32:
            raise ValueError("phantom dimensions must be at least 32")
        if self.kind not in PHANTOM_KINDS:
            raise ValueError(f"kind must be one of {PHANTOM_KINDS}, got {self.kind!r}")
        if self.texture_freq <= 0:
            raise ValueError(f"texture_freq must be positive, got {self.texture_freq}")
        if not 0.0 < self.contrast <= 1.0:
            raise ValueError(f"contrast must be in (0, 1], got {self.contrast}")


def _cartoon(width: int, height: int, contrast: float) -> np.ndarray:
    # Disk plus rectangle on a flat background: exactly three intensities.
    base = 0.15
    canvas = np.full((height, width), base)
    rows = np.arange(height)[:, None]
    cols = np.arange(width)[None, :]
    radius = 0.16 * min(width, height)
    disk = (rows - 0.30 * height) ** 2 + (cols - 0.50 * width) ** 2 <= radius**2
    canvas[disk] = base + 0.70 * contrast
    top, bottom = int(0.60 * height), int(0.85 * height)
    left, right = int(0.25 * width), int(0.75 * width)
    canvas[top:bottom, left:right] = base + 0.35 * contrast
    return canvas


def _texture(width: int, height: int, freq: float, contrast: float) -> np.ndarray:
    # Sinusoidal grid; each column carries a vertical tone at ``freq``
    # cycles per canvas, so its DFT peaks at that bin.
    rows = np.arange(height)[:, None]
    cols = np.arange(width)[None, :]
    amplitude = 0.25 * contrast
    return (
        0.5
        + amplitude * np.sin(2.0 * np.pi * freq * cols / width)
        + amplitude * np.sin(2.0 * np.pi * freq * rows / height)
    )


def make_phantom(spec: PhantomSpec) -> ImageBuffer:
    """Build the requested phantom; mixed places cartoon left, texture right."""
    if spec.kind == "cartoon":
        data = _cartoon(spec.width, spec.height, spec.contrast)
    elif spec.kind == "texture":
        data = _texture(spec.width, spec.height, spec.texture_freq, spec.contrast)
    else:
        split = spec.width // 2
        data = np.empty((spec.height, spec.width))
        data[:, :split] = _cartoon(split, spec.height, spec.contrast)
        data[:, split:] = _texture(
            spec.width - split, spec.height, spec.texture_freq, spec.contrast
        )
    return ImageBuffer(data)


def _standard_normal(gen: np.random.Generator, count: int) -> np.ndarray:
    # Box-Muller on Philox uniforms keeps the stream reproducible by name.
    pairs = (count + 1) // 2
    u1 = 1.0 - gen.random(pairs)  # in (0, 1]
    u2 = gen.random(pairs)
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    draws = np.concatenate((radius * np.cos(angle), radius * np.sin(angle)))
    return draws[:count]


def add_awgn(u: ImageBuffer, sigma: float, seed: int) -> ImageBuffer:
    """Add i.i.d. Gaussian noise of std ``sigma``; deterministic per seed, no clipping."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    gen = np.random.Generator(np.random.Philox(seed))
    noise = _standard_normal(gen, u.pixel_count).reshape(u.data.shape)
    return ImageBuffer(u.data + sigma * noise)


def degrade(u: ImageBuffer, spec: DegradationSpec) -> ImageBuffer:
    """Forward model: blur first, then additive noise."""
    return add_awgn(blur_apply(u, spec.blur), spec.sigma, spec.seed)
