"""Full-reference quality metrics and temporal-consistency measures.

PSNR and SSIM follow the standard single-scale definitions on [0, 1]
frames. The warping error measures how well each frame, pushed forward by
the flow, predicts its successor; with the generator's exact flow it
isolates temporal consistency from flow-estimation error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.ndimage

from .imageops import warp_bilinear
from .video import VideoClip

__all__ = [
    "MetricRecord",
    "psnr",
    "per_frame_psnr",
    "ssim",
    "warping_error",
    "temporal_profile",
    "estimate_flow_block_matching",
    "METRICS_CSV_HEADER",
]

METRICS_CSV_HEADER = "clip_id,method,psnr,ssim,e_warp"

# BT.601 luma weights for the SSIM grayscale conversion.
_LUMA = np.array([0.299, 0.587, 0.114])

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_C1 = 0.01**2
_SSIM_C2 = 0.03**2


@dataclass
class MetricRecord:
    clip_id: str
    method: str
    psnr: float
    ssim: float
    e_warp: float
    per_frame_psnr: list[float] = field(default_factory=list)

    def csv_row(self) -> str:
        return ",".join(
            [self.clip_id, self.method] + [_fmt(v) for v in (self.psnr, self.ssim, self.e_warp)]
        )


def _fmt(v: float) -> str:
    return "inf" if math.isinf(v) else repr(float(v))


def _frames(x) -> np.ndarray:
    return x.frames if isinstance(x, VideoClip) else np.asarray(x)


def psnr(a, b) -> float:
    """Mean per-frame PSNR in dB; identical clips report infinity (capped flag)."""
    fa, fb = _frames(a).astype(np.float64), _frames(b).astype(np.float64)
    if fa.shape != fb.shape:
        raise ValueError(f"shape mismatch {fa.shape} vs {fb.shape}")
    vals = per_frame_psnr(fa, fb)
    return float(np.mean(vals))


def per_frame_psnr(fa: np.ndarray, fb: np.ndarray) -> list[float]:
    out = []
    for t in range(fa.shape[0]):
        mse = float(np.mean((fa[t] - fb[t]) ** 2))
        out.append(math.inf if mse == 0.0 else 10.0 * math.log10(1.0 / mse))
    return out


def _to_gray(frame: np.ndarray) -> np.ndarray:
    if frame.shape[-1] == 3:
        return frame @ _LUMA
    return frame[..., 0]


def _ssim_frame(a: np.ndarray, b: np.ndarray) -> float:
    h, w = a.shape
    if h < _SSIM_WINDOW or w < _SSIM_WINDOW:
        raise ValueError(f"frame ({h}, {w}) smaller than the {_SSIM_WINDOW}x{_SSIM_WINDOW} window")
    x = np.arange(_SSIM_WINDOW, dtype=np.float64) - _SSIM_WINDOW // 2
    g = np.exp(-0.5 * (x / _SSIM_SIGMA) ** 2)
    win = np.outer(g, g)
    win /= win.sum()
    crop = _SSIM_WINDOW // 2

    def filt(x):
        return scipy.ndimage.convolve(x, win, mode="constant")[crop:-crop, crop:-crop]

    mu_a = filt(a)
    mu_b = filt(b)
    var_a = filt(a * a) - mu_a**2
    var_b = filt(b * b) - mu_b**2
    cov = filt(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + _SSIM_C1) * (2 * cov + _SSIM_C2)
    den = (mu_a**2 + mu_b**2 + _SSIM_C1) * (var_a + var_b + _SSIM_C2)
    return float(np.mean(num / den))


def ssim(a, b) -> float:
    """Mean single-scale SSIM over frames (Gaussian 11x11 window, sigma 1.5)."""
    fa, fb = _frames(a).astype(np.float64), _frames(b).astype(np.float64)
    if fa.shape != fb.shape:
        raise ValueError(f"shape mismatch {fa.shape} vs {fb.shape}")
    vals = [_ssim_frame(_to_gray(fa[t]), _to_gray(fb[t])) for t in range(fa.shape[0])]
    return float(np.mean(vals))


def warping_error(clip: VideoClip, flows: np.ndarray) -> float:
    """Mean masked MSE between flow-warped frames and their successors, x1000.

    Pixels whose samples fall outside the frame are excluded from the mask
    (out-of-frame content is unknowable for non-periodic clips).
    """
    frames = clip.frames.astype(np.float64)
    if len(flows) != clip.t - 1:
        raise ValueError(f"need {clip.t - 1} flow fields, got {len(flows)}")
    total = 0.0
    for t in range(clip.t - 1):
        warped, valid = warp_bilinear(frames[t], flows[t].astype(np.float64))
        if not valid.any():
            raise ValueError(f"flow {t} leaves no valid pixels")
        diff = (warped - frames[t + 1]) ** 2
        total += float(diff[valid].mean())
    return total / (clip.t - 1) * 1e3


def temporal_profile(clip: VideoClip, row: int) -> np.ndarray:
    """Stack one pixel row across frames into a (T, W, C) image."""
    if not 0 <= row < clip.h:
        raise ValueError(f"row {row} out of range [0, {clip.h})")
    return clip.frames[:, row, :, :].copy()


def estimate_flow_block_matching(
    clip: VideoClip, max_disp: int = 7, block: int = 16
) -> np.ndarray:
    """Approximate integer-displacement flow by per-block SSD matching.

    A coarse fallback for natural clips without ground-truth flow; the
    generator's exact flow should be preferred whenever available.
    """
    frames = clip.frames.astype(np.float64)
    t_n, h, w = clip.t, clip.h, clip.w
    flows = np.zeros((t_n - 1, h, w, 2), dtype=np.float32)
    for t in range(t_n - 1):
        cur, nxt = frames[t], frames[t + 1]
        for by in range(0, h, block):
            for bx in range(0, w, block):
                ref = cur[by : by + block, bx : bx + block]
                best = (math.inf, 0, 0)
                for dy in range(-max_disp, max_disp + 1):
                    y0, y1 = by + dy, by + dy + ref.shape[0]
                    if y0 < 0 or y1 > h:
                        continue
                    for dx in range(-max_disp, max_disp + 1):
                        x0, x1 = bx + dx, bx + dx + ref.shape[1]
                        if x0 < 0 or x1 > w:
                            continue
                        ssd = float(np.sum((ref - nxt[y0:y1, x0:x1]) ** 2))
                        if ssd < best[0]:
                            best = (ssd, dx, dy)
                flows[t, by : by + block, bx : bx + block, 0] = best[1]
                flows[t, by : by + block, bx : bx + block, 1] = best[2]
    return flows
