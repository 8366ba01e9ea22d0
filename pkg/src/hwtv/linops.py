"""Discrete differential and convolution operators with periodic boundaries.

Forward differences, their exact adjoint, truncated Gaussian blur and the
local box mean all wrap periodically, which diagonalizes the restoration
normal equations in the 2-D DFT basis and keeps every operator pair
(operator, adjoint) exact to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imgcore import DimensionMismatchError, ImageBuffer


@dataclass(eq=False)
class GradientField:
    """Two-channel raster of per-pixel horizontal/vertical differences."""

    h: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        h = np.ascontiguousarray(self.h, dtype=np.float64)
        v = np.ascontiguousarray(self.v, dtype=np.float64)
        if h.ndim != 2 or h.shape != v.shape:
            raise ValueError("gradient channels must be 2-D arrays of equal shape")
        if not (np.all(np.isfinite(h)) and np.all(np.isfinite(v))):
            raise ValueError("gradient samples must be finite")
        self.h = h
        self.v = v

    @property
    def width(self) -> int:
        return self.h.shape[1]

    @property
    def height(self) -> int:
        return self.h.shape[0]


@dataclass(frozen=True)
class BlurSpec:
    """Truncated Gaussian blur kernel: ``band`` x ``band`` support, std ``sigma``.

    ``identity=True`` selects K = I (pure denoising); band and sigma are then
    ignored.
    """

    band: int = 1
    sigma: float = 1.0
    identity: bool = False

    def __post_init__(self):
        if self.identity:
            return
        if self.band < 1 or self.band % 2 == 0:
            raise ValueError(f"band must be an odd positive integer, got {self.band}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class SpectralPlan:
    """Frequency-domain factors for one image size and blur kernel.

    eigen_K is the 2-D DFT of the origin-centered kernel; eigen_DtD is the
    symbol of the periodic forward-difference normal operator,
    4 sin^2(pi w1 / W) + 4 sin^2(pi w2 / H). Immutable and shareable.
    """

    width: int
    height: int
    eigen_K: np.ndarray
    eigen_DtD: np.ndarray


def _require_plan_match(plan: SpectralPlan, img: ImageBuffer) -> None:
    if (img.height, img.width) != (plan.height, plan.width):
        raise DimensionMismatchError(
            f"image is {img.height}x{img.width}, plan is {plan.height}x{plan.width}"
        )


def gradient(u: ImageBuffer) -> GradientField:
    """Forward differences with periodic wrap in both directions."""
    arr = u.data
    return GradientField(
        h=np.roll(arr, -1, axis=1) - arr,
        v=np.roll(arr, -1, axis=0) - arr,
    )


def divergence(t: GradientField) -> ImageBuffer:
    """Exact adjoint of :func:`gradient`: <gradient(u), t> == <u, divergence(t)>."""
    acc = (np.roll(t.h, 1, axis=1) - t.h) + (np.roll(t.v, 1, axis=0) - t.v)
    return ImageBuffer(acc)


def pointwise_norm(t: GradientField, p: int) -> ImageBuffer:
    """Per-pixel p-norm of the two gradient channels, p in {1, 2}."""
    if p == 1:
        return ImageBuffer(np.abs(t.h) + np.abs(t.v))
    if p == 2:
        return ImageBuffer(np.hypot(t.h, t.v))
    raise ValueError(f"p must be 1 or 2, got {p}")


def make_kernel(spec: BlurSpec) -> np.ndarray:
    """Sampled Gaussian kernel on the band x band grid, normalized to sum 1."""
    if spec.identity:
        return np.ones((1, 1))
    half = (spec.band - 1) // 2
    offsets = np.arange(-half, half + 1, dtype=np.float64)
    profile = np.exp(-(offsets**2) / (2.0 * spec.sigma**2))
    kernel = np.outer(profile, profile)
    return kernel / kernel.sum()


def _otf(kernel: np.ndarray, height: int, width: int) -> np.ndarray:
    # Zero-pad the kernel and roll its center to the origin before the DFT.
    kh, kw = kernel.shape
    if kh > height or kw > width:
        raise ValueError(
            f"kernel {kh}x{kw} larger than image {height}x{width}"
        )
    padded = np.zeros((height, width))
    padded[:kh, :kw] = kernel
    padded = np.roll(padded, (-(kh // 2), -(kw // 2)), axis=(0, 1))
    return np.fft.fft2(padded)


def build_plan(width: int, height: int, spec: BlurSpec) -> SpectralPlan:
    """Precompute the DFT factors used by :func:`solve_u` and the blur."""
    if width < 1 or height < 1:
        raise ValueError("plan dimensions must be positive")
    if spec.identity:
        eigen_k = np.ones((height, width), dtype=np.complex128)
    else:
        eigen_k = _otf(make_kernel(spec), height, width)
    sym_x = 4.0 * np.sin(np.pi * np.arange(width) / width) ** 2
    sym_y = 4.0 * np.sin(np.pi * np.arange(height) / height) ** 2
    eigen_dtd = sym_y[:, None] + sym_x[None, :]
    return SpectralPlan(width=width, height=height, eigen_K=eigen_k, eigen_DtD=eigen_dtd)


def blur_via_plan(plan: SpectralPlan, u: ImageBuffer) -> ImageBuffer:
    """Circular convolution with the planned kernel via its eigenvalues."""
    _require_plan_match(plan, u)
    return ImageBuffer(np.fft.ifft2(np.fft.fft2(u.data) * plan.eigen_K).real)


def blur_adjoint_via_plan(plan: SpectralPlan, u: ImageBuffer) -> ImageBuffer:
    """Adjoint blur (correlation with the point-reflected kernel)."""
    _require_plan_match(plan, u)
    return ImageBuffer(np.fft.ifft2(np.fft.fft2(u.data) * np.conj(plan.eigen_K)).real)


def blur_apply(u: ImageBuffer, spec: BlurSpec) -> ImageBuffer:
    """Apply the blur operator: periodic convolution, computed spectrally."""
    if spec.identity:
        return u.copy()
    return blur_via_plan(build_plan(u.width, u.height, spec), u)


def blur_adjoint(u: ImageBuffer, spec: BlurSpec) -> ImageBuffer:
    """Apply the transposed blur operator (exact adjoint of :func:`blur_apply`)."""
    if spec.identity:
        return u.copy()
    return blur_adjoint_via_plan(build_plan(u.width, u.height, spec), u)


def solve_u(plan: SpectralPlan, rhs: ImageBuffer, ratio: float) -> ImageBuffer:
    """Solve (DtD + ratio KtK) u = rhs by per-frequency division.

    The denominator eigen_DtD + ratio |eigen_K|^2 is strictly positive for a
    normalized kernel and ratio > 0 (eigen_K equals 1 at the zero frequency),
    so the solve is exact to rounding.
    """
    if ratio <= 0:
        raise ValueError(f"ratio must be positive, got {ratio}")
    _require_plan_match(plan, rhs)
    denom = plan.eigen_DtD + ratio * np.abs(plan.eigen_K) ** 2
    return ImageBuffer(np.fft.ifft2(np.fft.fft2(rhs.data) / denom).real)


def _periodic_window_sum(arr: np.ndarray, r: int, axis: int) -> np.ndarray:
    # Running sum over a (2r+1)-wide periodic window along one axis.
    moved = np.moveaxis(arr, axis, 0)
    length = moved.shape[0]
    padded = np.concatenate((moved[length - r :], moved, moved[:r]), axis=0)
    csum = np.cumsum(padded, axis=0)
    csum = np.concatenate((np.zeros((1,) + csum.shape[1:]), csum), axis=0)
    window = 2 * r + 1
    sums = csum[window:] - csum[: length]
    return np.moveaxis(sums, 0, axis)


def box_mean(field_norms: ImageBuffer, r: int) -> ImageBuffer:
    """Mean over the periodic (2r+1) x (2r+1) window centered at each pixel."""
    if r < 1:
        raise ValueError(f"window radius must be a positive integer, got {r}")
    window = 2 * r + 1
    if window > min(field_norms.height, field_norms.width):
        raise ValueError(
            f"window {window}x{window} larger than image "
            f"{field_norms.height}x{field_norms.width}"
        )
    arr = field_norms.data
    sums = _periodic_window_sum(_periodic_window_sum(arr, r, axis=0), r, axis=1)
    out = sums / float(window * window)
    # The exact mean lies in [min, max]; clip the <=1 ulp summation excursions.
    np.clip(out, arr.min(), arr.max(), out=out)
    return ImageBuffer(out)
