"""Procedural clips with analytically exact optical flow.

Frames come from continuous periodic texture functions evaluated at
translated coordinates, so the per-pair flow field is known exactly and
never estimated. Textures are band-limited (or supersampled, for the
checkerboard) to keep sub-pixel warping well posed.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from .video import VideoClip

__all__ = ["ClipParams", "KINDS", "generate_clip", "constant_flow"]

KINDS = ("translating_sinusoid", "translating_checker", "translating_noise_texture", "static")


@dataclass(frozen=True)
class ClipParams:
    size: tuple[int, int] = (64, 64)  # (H, W)
    length: int = 16
    velocity: tuple[float, float] = (1.0, 0.0)  # (vx, vy) pixels/frame
    channels: int = 3
    fps: float = 24.0
    max_wavenumber: int = 2  # sinusoid/noise band limit, cycles per frame size
    checker_period: int = 16  # pixels per checker tile pair
    supersample: int = 4

    def as_dict(self) -> dict:
        d = asdict(self)
        d["size"] = list(self.size)
        d["velocity"] = list(self.velocity)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ClipParams":
        d = dict(d)
        d["size"] = tuple(d["size"])
        d["velocity"] = tuple(d["velocity"])
        return cls(**d)


def constant_flow(params: ClipParams) -> np.ndarray:
    """(T-1, H, W, 2) flow, constant (vx, vy) everywhere."""
    h, w = params.size
    flow = np.empty((params.length - 1, h, w, 2), dtype=np.float32)
    flow[..., 0] = params.velocity[0]
    flow[..., 1] = params.velocity[1]
    return flow


def _grids(params: ClipParams):
    h, w = params.size
    yy, xx = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    return yy, xx


def _sinusoid_frames(params: ClipParams, rng: np.random.Generator) -> np.ndarray:
    h, w = params.size
    yy, xx = _grids(params)
    vx, vy = params.velocity
    n_modes = 3
    frames = np.empty((params.length, h, w, params.channels), dtype=np.float64)
    # integer wavenumbers keep the texture exactly periodic over the frame
    kmax = params.max_wavenumber
    for c in range(params.channels):
        modes = []
        for i in range(n_modes):
            while True:
                ky = rng.integers(-kmax, kmax + 1)
                kx = rng.integers(-kmax, kmax + 1)
                if kx or ky:
                    break
            amp = 0.35 / (i + 1) / n_modes * 2.0
            modes.append((ky, kx, amp, rng.uniform(0, 2 * np.pi)))
        for t in range(params.length):
            sy = yy - vy * t
            sx = xx - vx * t
            f = np.zeros((h, w))
            for ky, kx, amp, phase in modes:
                f += amp * np.sin(2 * np.pi * (ky * sy / h + kx * sx / w) + phase)
            frames[t, :, :, c] = 0.5 + f
    return frames


def _noise_frames(params: ClipParams, rng: np.random.Generator) -> np.ndarray:
    """Band-limited periodic noise shifted exactly via the Fourier phase ramp."""
    h, w = params.size
    kmax = params.max_wavenumber
    vx, vy = params.velocity
    ky = np.fft.fftfreq(h, d=1.0) * h
    kx = np.fft.fftfreq(w, d=1.0) * w
    keep = (np.abs(ky)[:, None] <= kmax) & (np.abs(kx)[None, :] <= kmax)
    frames = np.empty((params.length, h, w, params.channels), dtype=np.float64)
    for c in range(params.channels):
        spec = (rng.normal(size=(h, w)) + 1j * rng.normal(size=(h, w))) * keep
        spec[0, 0] = 0.0
        base = np.fft.ifft2(spec).real
        scale = 0.35 / (1.2 * np.abs(base).max() + 1e-12)
        for t in range(params.length):
            ramp = np.exp(-2j * np.pi * (ky[:, None] * vy * t / h + kx[None, :] * vx * t / w))
            frames[t, :, :, c] = 0.5 + scale * np.fft.ifft2(spec * ramp).real
    return frames


def _checker_frames(params: ClipParams, rng: np.random.Generator) -> np.ndarray:
    h, w = params.size
    p = params.checker_period
    if h % p or w % p:
        raise ValueError(f"checker_period {p} must divide frame size {params.size}")
    vx, vy = params.velocity
    ss = params.supersample
    yy, xx = _grids(params)
    off = (np.arange(ss) + 0.5) / ss - 0.5
    lo, hi = rng.uniform(0.1, 0.35), rng.uniform(0.65, 0.9)
    frames = np.empty((params.length, h, w, params.channels), dtype=np.float64)
    for t in range(params.length):
        acc = np.zeros((h, w))
        for oy in off:
            for ox in off:
                sy = (yy + oy - vy * t) / p
                sx = (xx + ox - vx * t) / p
                acc += (np.floor(sy) + np.floor(sx)) % 2
        tile = acc / (ss * ss)
        frames[t] = (lo + (hi - lo) * tile)[..., None]
    return frames


def generate_clip(kind: str, params: ClipParams, seed: int) -> tuple[VideoClip, np.ndarray]:
    """Generate a clip of the given kind plus its exact flow sequence.

    The flow depends only on the velocity; the seed varies texture content.
    Per-frame displacement above a quarter frame height is rejected
    (wrap-around would make the flow ambiguous).
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    if params.length < 1:
        raise ValueError("length must be >= 1")
    vx, vy = params.velocity
    if kind == "static":
        params = replace(params, velocity=(0.0, 0.0))
        vx = vy = 0.0
    if np.hypot(vx, vy) > params.size[0] / 4:
        raise ValueError(f"per-frame displacement {np.hypot(vx, vy):.2f} exceeds H/4")

    rng = np.random.default_rng(seed)
    if kind in ("translating_sinusoid", "static"):
        frames = _sinusoid_frames(params, rng)
    elif kind == "translating_noise_texture":
        frames = _noise_frames(params, rng)
    else:
        frames = _checker_frames(params, rng)
    clip = VideoClip(np.clip(frames, 0.0, 1.0).astype(np.float32), params.fps)
    return clip, constant_flow(params)
