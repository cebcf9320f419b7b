"""Seeded two-order degradation: blur, resize, noise, compression, twice over.

Blur, resize scale, and compression quality are shared across a clip's
frames (camera/encoder behavior); noise is redrawn per frame from streams
split off the stage seed. Every stage clips back to [0, 1]. The full
parameter draw is recorded so any output can be replayed bit-exactly.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .imageops import block_dct_quantize, gaussian_blur, resize2d
from .video import VideoClip

__all__ = [
    "StageRanges",
    "DegradationConfig",
    "OrderParams",
    "DegradationRecord",
    "degrade_order",
    "degrade_two_order",
]


@dataclass(frozen=True)
class StageRanges:
    blur_sigma: tuple[float, float] = (0.2, 3.0)
    scale: tuple[float, float] = (0.25, 1.0)
    noise_sigma: tuple[float, float] = (0.0, 0.1)
    quality: tuple[float, float] = (30.0, 95.0)

    def __post_init__(self):
        for name in ("blur_sigma", "scale", "noise_sigma", "quality"):
            lo, hi = getattr(self, name)
            if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
                raise ValueError(f"{name} range ({lo}, {hi}) is empty or non-finite")
        if not 0.0 < self.scale[0]:
            raise ValueError("scale must stay positive")

    @classmethod
    def from_dict(cls, d: dict) -> "StageRanges":
        return cls(**{k: tuple(v) for k, v in d.items()})


@dataclass(frozen=True)
class DegradationConfig:
    order1: StageRanges = field(default_factory=StageRanges)
    order2: StageRanges = field(default_factory=StageRanges)
    final_scale: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.final_scale <= 1.0:
            raise ValueError(f"final_scale {self.final_scale} outside (0, 1]")

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DegradationConfig":
        return cls(
            order1=StageRanges.from_dict(d["order1"]),
            order2=StageRanges.from_dict(d["order2"]),
            final_scale=d["final_scale"],
            seed=d["seed"],
        )


@dataclass(frozen=True)
class OrderParams:
    """One concrete stage draw; ``noise_seed`` makes replays bit-exact."""

    blur_sigma: float
    scale: float
    noise_sigma: float
    quality: float
    noise_seed: int

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "OrderParams":
        return cls(**d)


@dataclass(frozen=True)
class DegradationRecord:
    order1: OrderParams
    order2: OrderParams
    final_scale: float

    def as_dict(self) -> dict:
        return {
            "order1": self.order1.as_dict(),
            "order2": self.order2.as_dict(),
            "final_scale": self.final_scale,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DegradationRecord":
        return cls(
            order1=OrderParams.from_dict(d["order1"]),
            order2=OrderParams.from_dict(d["order2"]),
            final_scale=d["final_scale"],
        )


def _scaled_size(h: int, w: int, scale: float) -> tuple[int, int]:
    return max(1, round(h * scale)), max(1, round(w * scale))


def degrade_order(clip: VideoClip, params: OrderParams) -> VideoClip:
    """One blur -> resize -> noise -> compression pass, clipping after each stage."""
    frames = clip.frames
    if params.blur_sigma > 0:
        frames = np.stack([gaussian_blur(f, params.blur_sigma, axes=(0, 1)) for f in frames])
        frames = np.clip(frames, 0.0, 1.0)
    if params.scale != 1.0:
        hw = _scaled_size(frames.shape[1], frames.shape[2], params.scale)
        frames = resize2d(frames, hw, method="bilinear", axes=(1, 2))
        frames = np.clip(frames, 0.0, 1.0)
    if params.noise_sigma > 0:
        streams = np.random.SeedSequence(params.noise_seed).spawn(frames.shape[0])
        noisy = np.empty_like(frames)
        for i, ss in enumerate(streams):
            rng = np.random.default_rng(ss)
            noisy[i] = frames[i] + rng.normal(0.0, params.noise_sigma, size=frames[i].shape).astype(
                frames.dtype
            )
        frames = np.clip(noisy, 0.0, 1.0)
    if params.quality < 100.0:
        frames = np.stack([block_dct_quantize(f, params.quality) for f in frames])
        frames = np.clip(frames, 0.0, 1.0)
    return VideoClip(frames.astype(np.float32), clip.fps)


def _draw(ranges: StageRanges, rng: np.random.Generator) -> OrderParams:
    def u(lo_hi):
        lo, hi = lo_hi
        return float(lo) if lo == hi else float(rng.uniform(lo, hi))

    return OrderParams(
        blur_sigma=u(ranges.blur_sigma),
        scale=u(ranges.scale),
        noise_sigma=u(ranges.noise_sigma),
        quality=u(ranges.quality),
        noise_seed=int(rng.integers(0, 2**31 - 1)),
    )


def degrade_two_order(clip: VideoClip, cfg: DegradationConfig) -> tuple[VideoClip, DegradationRecord]:
    """Two independent degradation passes, then the final resize to output scale.

    The final size is computed from the original frame size. Returns the LR
    clip and the parameter record needed to replay it.
    """
    rng = np.random.default_rng(cfg.seed)
    record = DegradationRecord(
        order1=_draw(cfg.order1, rng),
        order2=_draw(cfg.order2, rng),
        final_scale=cfg.final_scale,
    )
    out = degrade_order(clip, record.order1)
    out = degrade_order(out, record.order2)
    target_hw = _scaled_size(clip.h, clip.w, cfg.final_scale)
    if (out.h, out.w) != target_hw:
        frames = resize2d(out.frames, target_hw, method="bilinear", axes=(1, 2))
        out = VideoClip(np.clip(frames, 0.0, 1.0).astype(np.float32), clip.fps)
    return out, record
