"""Single-level 2D Haar transform over spatial axes and the sub-band loss.

Decomposition applies the orthonormal pair L = [1, 1]/sqrt(2),
H = [-1, 1]/sqrt(2) separably with stride 2, independently per
(batch, channel, time) slice. Energy is preserved, so the unweighted
sub-band loss collapses to the plain mean-squared flow loss.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad

__all__ = [
    "SubbandSet",
    "SubbandWeights",
    "haar_decompose",
    "haar_reconstruct",
    "wlf_loss",
    "wlf_loss_node",
    "highband_energy",
]

_SQ2 = np.sqrt(2.0)
_LOW = np.array([1.0, 1.0]) / _SQ2
_HIGH = np.array([-1.0, 1.0]) / _SQ2

# 2x2 kernels, height filter x width filter.
KERNELS = {
    "ll": np.outer(_LOW, _LOW),
    "lh": np.outer(_LOW, _HIGH),
    "hl": np.outer(_HIGH, _LOW),
    "hh": np.outer(_HIGH, _HIGH),
}
BANDS = ("ll", "lh", "hl", "hh")


@dataclass
class SubbandSet:
    """The four half-resolution sub-bands of one decomposition level."""

    ll: np.ndarray
    lh: np.ndarray
    hl: np.ndarray
    hh: np.ndarray

    def band(self, name: str) -> np.ndarray:
        return getattr(self, name)

    def energy(self) -> float:
        return float(sum(np.sum(np.square(self.band(b).astype(np.float64))) for b in BANDS))


@dataclass(frozen=True)
class SubbandWeights:
    """Per-band loss weights; the defaults emphasize the detail bands."""

    w_ll: float = 1.0
    w_lh: float = 2.0
    w_hl: float = 2.0
    w_hh: float = 2.0

    def __post_init__(self):
        for name in ("w_ll", "w_lh", "w_hl", "w_hh"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name}={v} must be finite and >= 0")

    def as_dict(self) -> dict[str, float]:
        return {"ll": self.w_ll, "lh": self.w_lh, "hl": self.w_hl, "hh": self.w_hh}

    @classmethod
    def unit(cls) -> "SubbandWeights":
        return cls(1.0, 1.0, 1.0, 1.0)

    @classmethod
    def uniform_high(cls, k: float) -> "SubbandWeights":
        return cls(1.0, k, k, k)


def _pad_even(x: np.ndarray) -> np.ndarray:
    """Reflect-pad odd spatial dims by one on the trailing edge."""
    h, w = x.shape[-2], x.shape[-1]
    if h % 2 == 0 and w % 2 == 0:
        return x
    pad = [(0, 0)] * (x.ndim - 2) + [(0, h % 2), (0, w % 2)]
    mode = "reflect" if min(h, w) > 1 else "edge"
    return np.pad(x, pad, mode=mode)


def haar_decompose(x: np.ndarray) -> SubbandSet:
    """Split the last two axes into LL/LH/HL/HH at half resolution."""
    x = _pad_even(x)
    a = x[..., 0::2, 0::2]
    b = x[..., 0::2, 1::2]
    c = x[..., 1::2, 0::2]
    d = x[..., 1::2, 1::2]
    half = x.dtype.type(0.5)
    return SubbandSet(
        ll=(a + b + c + d) * half,
        lh=(-a + b - c + d) * half,
        hl=(-a - b + c + d) * half,
        hh=(a - b - c + d) * half,
    )


def haar_reconstruct(s: SubbandSet) -> np.ndarray:
    """Exact inverse of :func:`haar_decompose` (transpose of the orthonormal map)."""
    shape = s.ll.shape
    for b in BANDS[1:]:
        if s.band(b).shape != shape:
            raise ValueError(f"sub-band {b} shape {s.band(b).shape} != ll shape {shape}")
    ll, lh, hl, hh = s.ll, s.lh, s.hl, s.hh
    out = np.empty(shape[:-2] + (shape[-2] * 2, shape[-1] * 2), dtype=ll.dtype)
    half = ll.dtype.type(0.5)
    out[..., 0::2, 0::2] = (ll - lh - hl + hh) * half
    out[..., 0::2, 1::2] = (ll + lh - hl - hh) * half
    out[..., 1::2, 0::2] = (ll - lh + hl - hh) * half
    out[..., 1::2, 1::2] = (ll + lh + hl + hh) * half
    return out


def _pad_even_node(x: ad.Sym) -> ad.Sym:
    h, w = x.shape[-2], x.shape[-1]
    if h % 2:
        x = ad.concat([x, x[..., -2:-1, :]], axis=-2) if h > 1 else ad.concat([x, x], axis=-2)
    if w % 2:
        x = ad.concat([x, x[..., -2:-1]], axis=-1) if w > 1 else ad.concat([x, x], axis=-1)
    return x


def decompose_nodes(x: ad.Sym) -> dict[str, ad.Sym]:
    """Graph form of the decomposition: one strided kernel pass per band."""
    x = _pad_even_node(x)
    return {b: ad.conv2d(x, KERNELS[b], stride=2) for b in BANDS}


def wlf_loss_node(v_pred: ad.Sym, target: ad.Sym, w: SubbandWeights) -> ad.Sym:
    """Weighted sum of squared per-band residuals between prediction and target.

    Band sums are divided by the pre-split element count, so unit weights
    reproduce mean((v - target)^2) exactly (energy preservation).
    """
    n = float(np.prod(_padded_shape(v_pred.shape)))
    bp = decompose_nodes(v_pred)
    bt = decompose_nodes(target)
    weights = w.as_dict()
    total = None
    for b in BANDS:
        term = ad.square(bp[b] - bt[b]).sum() * (weights[b] / n)
        total = term if total is None else total + term
    return total


def _padded_shape(shape: tuple[int, ...]) -> tuple[int, ...]:
    h, w = shape[-2], shape[-1]
    return shape[:-2] + (h + h % 2, w + w % 2)


_WLF_CACHE: dict[tuple, ad.Graph] = {}


def _wlf_graph(shape: tuple[int, ...], w: SubbandWeights) -> ad.Graph:
    key = (shape, w.w_ll, w.w_lh, w.w_hl, w.w_hh)
    g = _WLF_CACHE.get(key)
    if g is None:
        g = ad.Graph()
        v = g.input("v", shape)
        t = g.input("target", shape)
        g.output("loss", wlf_loss_node(v, t, w))
        _WLF_CACHE[key] = g
    return g


def wlf_loss(v_pred: np.ndarray, x0: np.ndarray, eps: np.ndarray, w: SubbandWeights) -> float:
    """Sub-band loss of the velocity prediction against the target eps - x0."""
    if not (v_pred.shape == x0.shape == eps.shape):
        raise ValueError(f"shape mismatch: {v_pred.shape}, {x0.shape}, {eps.shape}")
    g = _wlf_graph(v_pred.shape, w)
    out = g.forward({"v": v_pred, "target": eps - x0})
    return float(out["loss"])


def highband_energy(x: np.ndarray) -> float:
    """Total LH + HL + HH energy of the spatial axes; a detail-content measure."""
    s = haar_decompose(np.asarray(x, dtype=np.float64))
    return float(sum(np.sum(np.square(s.band(b))) for b in ("lh", "hl", "hh")))
