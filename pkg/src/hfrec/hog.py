"""Differentiable oriented-gradient histograms over latent channels.

Orientation is unsigned (folded into [0, 180)), votes split bilinearly
between the two nearest bin centers with wrap-around between the last and
first bin, cell sums pool into overlapping blocks, and blocks are
normalized with L2-Hys (L2, clip, L2 again). The whole pipeline compiles
onto the autodiff graph so the texture loss can train a model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad

__all__ = [
    "HogConfig",
    "spatial_gradients",
    "hog_descriptor",
    "hog_loss",
    "hog_loss_node",
    "descriptor_nodes",
]

# Smoothing floor for the magnitude; subtracting sqrt(delta) keeps exact
# zeros on constant regions while the square root stays differentiable.
_DELTA = 1e-12
_NORM_EPS = 1e-12


@dataclass(frozen=True)
class HogConfig:
    bins: int = 9
    cell_size: int = 4
    block_size: int = 2
    hys_clip: float = 0.2

    def __post_init__(self):
        if self.bins < 1 or 180 % self.bins != 0:
            raise ValueError(f"bins={self.bins} must divide 180 degrees evenly")
        if self.cell_size < 2:
            raise ValueError("cell_size must be >= 2")
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        if not 0.0 < self.hys_clip <= 1.0:
            raise ValueError("hys_clip must be in (0, 1]")

    @property
    def bin_width_deg(self) -> float:
        return 180.0 / self.bins

    def min_side(self) -> int:
        return self.cell_size * self.block_size

    def key(self) -> tuple:
        return (self.bins, self.cell_size, self.block_size, self.hys_clip)


def spatial_gradients(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference gradients (gx along width, gy along height).

    Borders use one-sided differences; slices along leading axes are
    independent.
    """
    h, w = x.shape[-2], x.shape[-1]
    if h < 3 or w < 3:
        raise ValueError(f"spatial dims ({h}, {w}) must be >= 3")
    gx = np.empty_like(x)
    gx[..., :, 1:-1] = (x[..., :, 2:] - x[..., :, :-2]) * x.dtype.type(0.5)
    gx[..., :, 0] = x[..., :, 1] - x[..., :, 0]
    gx[..., :, -1] = x[..., :, -1] - x[..., :, -2]
    gy = np.empty_like(x)
    gy[..., 1:-1, :] = (x[..., 2:, :] - x[..., :-2, :]) * x.dtype.type(0.5)
    gy[..., 0, :] = x[..., 1, :] - x[..., 0, :]
    gy[..., -1, :] = x[..., -1, :] - x[..., -2, :]
    return gx, gy


def _gradient_nodes(x: ad.Sym) -> tuple[ad.Sym, ad.Sym]:
    gx = ad.concat(
        [
            x[..., :, 1:2] - x[..., :, 0:1],
            (x[..., :, 2:] - x[..., :, :-2]) * 0.5,
            x[..., :, -1:] - x[..., :, -2:-1],
        ],
        axis=-1,
    )
    gy = ad.concat(
        [
            x[..., 1:2, :] - x[..., 0:1, :],
            (x[..., 2:, :] - x[..., :-2, :]) * 0.5,
            x[..., -1:, :] - x[..., -2:-1, :],
        ],
        axis=-2,
    )
    return gx, gy


def descriptor_nodes(x: ad.Sym, cfg: HogConfig) -> ad.Sym:
    """Build the normalized descriptor graph for a (B, C, T, H, W) input.

    Output shape: (B, C, T, blocks_h, blocks_w, block, block, bins).
    """
    b, c, t, h, w = x.shape
    if h < cfg.min_side() or w < cfg.min_side():
        raise ValueError(f"spatial dims ({h}, {w}) below one block ({cfg.min_side()})")
    s = b * c * t
    xr = x.reshape((s, h, w))
    gx, gy = _gradient_nodes(xr)

    mag = ad.sqrt(ad.square(gx) + ad.square(gy) + _DELTA) - float(np.sqrt(_DELTA))
    theta = ad.orient180(gy, gx)

    # Bin coordinate: orientation in units of bins, measured from bin centers.
    centers = theta * (cfg.bins / np.pi) - 0.5
    c4 = centers.reshape((s, 1, h, w))
    k = x.graph.constant(np.arange(cfg.bins, dtype=np.float64).reshape(1, cfg.bins, 1, 1))
    dist = ad.absolute(c4 - k)
    dist = ad.minimum(dist, float(cfg.bins) - dist)  # wrap-around between last and first bin
    votes = ad.relu(1.0 - dist) * mag.reshape((s, 1, h, w))

    cell = cfg.cell_size
    cells = ad.conv2d(votes, np.ones((cell, cell)), stride=cell)  # (s, bins, nch, ncw)
    nch, ncw = cells.shape[-2], cells.shape[-1]

    blk = cfg.block_size
    nbh, nbw = nch - blk + 1, ncw - blk + 1
    pooled_sq = ad.conv2d(ad.square(cells), np.ones((blk, blk)), stride=1)
    norm = ad.sqrt(pooled_sq.sum(axis=1, keepdims=True) + _NORM_EPS)

    clipped = []
    for di in range(blk):
        for dj in range(blk):
            v = ad.divide(cells[:, :, di : di + nbh, dj : dj + nbw], norm)
            clipped.append(ad.minimum(v, cfg.hys_clip))

    sumsq2 = None
    for v in clipped:
        term = ad.square(v).sum(axis=1, keepdims=True)
        sumsq2 = term if sumsq2 is None else sumsq2 + term
    norm2 = ad.sqrt(sumsq2 + _NORM_EPS)

    final = ad.concat([ad.divide(v, norm2) for v in clipped], axis=1)
    # concat order is (di, dj) outer, bin inner
    desc = final.reshape((s, blk, blk, cfg.bins, nbh, nbw))
    desc = desc.transpose((0, 4, 5, 1, 2, 3))
    return desc.reshape((b, c, t, nbh, nbw, blk, blk, cfg.bins))


def hog_loss_node(v_pred: ad.Sym, target: ad.Sym, cfg: HogConfig) -> ad.Sym:
    """Mean squared difference between the two descriptors."""
    dp = descriptor_nodes(v_pred, cfg)
    dt = descriptor_nodes(target, cfg)
    return ad.square(dp - dt).mean()


_DESC_CACHE: dict[tuple, ad.Graph] = {}
_LOSS_CACHE: dict[tuple, ad.Graph] = {}


def _descriptor_graph(shape: tuple[int, ...], cfg: HogConfig) -> ad.Graph:
    key = (shape, cfg.key())
    g = _DESC_CACHE.get(key)
    if g is None:
        g = ad.Graph()
        x = g.input("x", shape)
        g.output("desc", descriptor_nodes(x, cfg))
        _DESC_CACHE[key] = g
    return g


def hog_descriptor(x: np.ndarray, cfg: HogConfig = HogConfig()) -> np.ndarray:
    """Descriptor for a (B, C, T, H, W) latent.

    Returns (B, C, T, blocks_h, blocks_w, block, block, bins); every entry is
    non-negative and each block vector has L2 norm at most 1.
    """
    x = np.asarray(x)
    if x.ndim != 5:
        raise ValueError(f"expected a 5-axis latent, got shape {x.shape}")
    g = _descriptor_graph(x.shape, cfg)
    return g.forward({"x": x})["desc"]


def hog_loss(
    v_pred: np.ndarray, x0: np.ndarray, eps: np.ndarray, cfg: HogConfig = HogConfig()
) -> float:
    """Descriptor-space loss of the velocity prediction against eps - x0."""
    if not (v_pred.shape == x0.shape == eps.shape):
        raise ValueError(f"shape mismatch: {v_pred.shape}, {x0.shape}, {eps.shape}")
    key = (v_pred.shape, cfg.key())
    g = _LOSS_CACHE.get(key)
    if g is None:
        g = ad.Graph()
        v = g.input("v", v_pred.shape)
        t = g.input("target", v_pred.shape)
        g.output("loss", hog_loss_node(v, t, cfg))
        _LOSS_CACHE[key] = g
    return float(g.forward({"v": v_pred, "target": eps - x0})["loss"])
