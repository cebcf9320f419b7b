"""Shared numpy image kernels: resampling, Gaussian blur, warping, block DCT.

Resampling is expressed as dense per-axis sampling matrices so that the
forward pass and its transpose (used by the autodiff graph) are exactly
consistent and deterministic. Sizes are desk scale; dense matrices are fine.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.fft
import scipy.ndimage

__all__ = [
    "linear_resample_axis",
    "resample_axis_vjp",
    "cubic_resample_axis",
    "resize2d",
    "gaussian_kernel1d",
    "gaussian_blur",
    "warp_bilinear",
    "block_dct_quantize",
    "quant_step",
]


@lru_cache(maxsize=256)
def _linear_matrix(n_in: int, n_out: int) -> np.ndarray:
    """(n_out, n_in) bilinear sampling matrix, half-pixel centers, edge clamp."""
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    i0 = np.floor(src)
    frac = src - i0
    lo = np.clip(i0, 0, n_in - 1).astype(int)
    hi = np.clip(i0 + 1, 0, n_in - 1).astype(int)
    w = np.zeros((n_out, n_in), dtype=np.float64)
    rows = np.arange(n_out)
    np.add.at(w, (rows, lo), 1.0 - frac)
    np.add.at(w, (rows, hi), frac)
    return w


def _cubic_kernel(t: np.ndarray, a: float = -0.5) -> np.ndarray:
    t = np.abs(t)
    out = np.zeros_like(t)
    m1 = t <= 1
    m2 = (t > 1) & (t < 2)
    out[m1] = (a + 2) * t[m1] ** 3 - (a + 3) * t[m1] ** 2 + 1
    out[m2] = a * t[m2] ** 3 - 5 * a * t[m2] ** 2 + 8 * a * t[m2] - 4 * a
    return out


@lru_cache(maxsize=256)
def _cubic_matrix(n_in: int, n_out: int) -> np.ndarray:
    """(n_out, n_in) Catmull-Rom (a=-0.5) sampling matrix with edge clamp."""
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    base = np.floor(src).astype(int)
    w = np.zeros((n_out, n_in), dtype=np.float64)
    rows = np.arange(n_out)
    for k in range(-1, 3):
        idx = np.clip(base + k, 0, n_in - 1)
        np.add.at(w, (rows, idx), _cubic_kernel(src - (base + k)))
    return w


def _apply_matrix(x: np.ndarray, w: np.ndarray, axis: int) -> np.ndarray:
    xm = np.moveaxis(x, axis, -1)
    y = xm @ w.T.astype(x.dtype)
    return np.moveaxis(y, -1, axis)


def linear_resample_axis(x: np.ndarray, n_out: int, axis: int) -> np.ndarray:
    """Bilinear resample along one axis."""
    return _apply_matrix(x, _linear_matrix(x.shape[axis], n_out), axis)


def resample_axis_vjp(g: np.ndarray, n_in: int, axis: int) -> np.ndarray:
    """Transpose of :func:`linear_resample_axis` for gradient flow."""
    w = _linear_matrix(n_in, g.shape[axis])
    gm = np.moveaxis(g, axis, -1)
    gx = gm @ w.astype(g.dtype)
    return np.moveaxis(gx, -1, axis)


def cubic_resample_axis(x: np.ndarray, n_out: int, axis: int) -> np.ndarray:
    """Bicubic (Catmull-Rom) resample along one axis."""
    return _apply_matrix(x, _cubic_matrix(x.shape[axis], n_out), axis)


def resize2d(x: np.ndarray, out_hw: tuple[int, int], method: str = "bilinear", axes=(-2, -1)) -> np.ndarray:
    """Resize two axes of an array; ``method`` is 'bilinear' or 'bicubic'."""
    fn = {"bilinear": linear_resample_axis, "bicubic": cubic_resample_axis}[method]
    y = fn(x, out_hw[0], axis=axes[0])
    return fn(y, out_hw[1], axis=axes[1])


def gaussian_kernel1d(sigma: float) -> np.ndarray:
    """Normalized Gaussian taps truncated at radius ceil(3*sigma)."""
    if sigma <= 0:
        return np.ones(1, dtype=np.float64)
    radius = int(np.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_blur(img: np.ndarray, sigma: float, axes=(0, 1)) -> np.ndarray:
    """Isotropic Gaussian blur over two axes, reflect boundary."""
    if sigma <= 0:
        return img.copy()
    k = gaussian_kernel1d(sigma)
    out = img.astype(np.float64)
    for ax in axes:
        out = scipy.ndimage.convolve1d(out, k, axis=ax, mode="reflect")
    return out.astype(img.dtype)


def warp_bilinear(frame: np.ndarray, flow: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Warp a (H, W, C) frame forward by a (H, W, 2) flow via backward sampling.

    ``flow[..., 0]`` is horizontal displacement (dx), ``flow[..., 1]`` vertical
    (dy). For content translated by ``v`` per frame, warping frame t with
    flow ``v`` reproduces frame t+1. Returns (warped, valid_mask); the mask is
    False where sampling coordinates leave the frame.
    """
    h, w = frame.shape[:2]
    gy, gx = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    xs = gx - flow[..., 0]
    ys = gy - flow[..., 1]
    valid = (xs >= 0) & (xs <= w - 1) & (ys >= 0) & (ys <= h - 1)

    x0 = np.clip(np.floor(xs), 0, w - 1).astype(int)
    y0 = np.clip(np.floor(ys), 0, h - 1).astype(int)
    x1 = np.clip(x0 + 1, 0, w - 1)
    y1 = np.clip(y0 + 1, 0, h - 1)
    fx = np.clip(xs, 0, w - 1) - x0
    fy = np.clip(ys, 0, h - 1) - y0

    def gather(yy, xx):
        return frame[yy, xx]

    fx = fx[..., None]
    fy = fy[..., None]
    top = gather(y0, x0) * (1 - fx) + gather(y0, x1) * fx
    bot = gather(y1, x0) * (1 - fx) + gather(y1, x1) * fx
    warped = top * (1 - fy) + bot * fy
    return warped.astype(frame.dtype), valid


def quant_step(quality: float, base: float = 0.04, q_max: float = 100.0) -> float:
    """Map a JPEG-style quality in (0, 100] to a uniform DCT quantization step.

    Quality >= ``q_max`` means lossless (step 0).
    """
    if quality >= q_max:
        return 0.0
    if quality < 50:
        scale = 5000.0 / quality
    else:
        scale = 200.0 - 2.0 * quality
    return base * scale / 100.0


def block_dct_quantize(frame: np.ndarray, quality: float, block: int = 8) -> np.ndarray:
    """JPEG-like compression proxy: per-block DCT, uniform quantization, inverse.

    Operates channelwise on a (H, W, C) frame in [0, 1]; no entropy coding.
    """
    step = quant_step(quality)
    if step <= 0.0:
        return frame.copy()
    h, w = frame.shape[:2]
    ph = (-h) % block
    pw = (-w) % block
    x = np.pad(frame.astype(np.float64) - 0.5, ((0, ph), (0, pw), (0, 0)), mode="reflect")
    hh, ww = x.shape[:2]
    blocks = x.reshape(hh // block, block, ww // block, block, -1)
    blocks = np.moveaxis(blocks, 1, 2)  # (bh, bw, block, block, C)
    coef = scipy.fft.dctn(blocks, axes=(2, 3), norm="ortho")
    coef = np.round(coef / step) * step
    rec = scipy.fft.idctn(coef, axes=(2, 3), norm="ortho")
    rec = np.moveaxis(rec, 2, 1).reshape(hh, ww, -1)
    out = rec[:h, :w] + 0.5
    return np.clip(out, 0.0, 1.0).astype(frame.dtype)
