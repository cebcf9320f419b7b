"""Video clip container: (T, H, W, C) float frames in [0, 1] plus frame rate."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .tensorio import load_tensor, save_tensor, write_ppm

__all__ = ["VideoClip"]


@dataclass
class VideoClip:
    frames: np.ndarray
    fps: float = 24.0

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float32)
        if self.frames.ndim != 4:
            raise ValueError(f"frames must be (T, H, W, C), got {self.frames.shape}")

    @property
    def t(self) -> int:
        return self.frames.shape[0]

    @property
    def h(self) -> int:
        return self.frames.shape[1]

    @property
    def w(self) -> int:
        return self.frames.shape[2]

    @property
    def c(self) -> int:
        return self.frames.shape[3]

    def clipped(self) -> "VideoClip":
        return VideoClip(np.clip(self.frames, 0.0, 1.0), self.fps)

    def save(self, path: str | Path) -> None:
        save_tensor(path, self.frames)

    @classmethod
    def load(cls, path: str | Path, fps: float = 24.0) -> "VideoClip":
        return cls(load_tensor(path).astype(np.float32), fps)

    def save_frames_ppm(self, directory: str | Path, stem: str = "frame") -> list[Path]:
        """Dump 8-bit PPM frames for interchange; returns the written paths."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        for i, frame in enumerate(self.frames):
            if frame.shape[-1] == 1:
                frame = np.repeat(frame, 3, axis=-1)
            p = directory / f"{stem}_{i:04d}.ppm"
            write_ppm(p, frame)
            paths.append(p)
        return paths
