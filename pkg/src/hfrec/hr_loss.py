"""Combined high-frequency loss: flow matching plus wavelet and HOG terms.

The three components are added without extra coefficients; the sub-band
weights live inside the wavelet term.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .diffusion import rec_loss_node
from .hog import HogConfig, hog_loss_node
from .wavelet import SubbandWeights, wlf_loss_node

__all__ = ["LossReport", "hr_loss", "hr_loss_nodes", "LOSS_CSV_HEADER"]

LOSS_CSV_HEADER = "step,t,l_rec,l_wlf,l_hog,l_total"


@dataclass
class LossReport:
    """Component breakdown of one loss evaluation."""

    l_rec: float
    l_wlf: float
    l_hog: float
    l_total: float
    weights: SubbandWeights = field(default_factory=SubbandWeights)
    t: float | None = None
    step: int | None = None

    def csv_row(self) -> str:
        step = "" if self.step is None else str(self.step)
        t = "" if self.t is None else repr(float(self.t))
        return ",".join(
            [step, t]
            + [repr(float(v)) for v in (self.l_rec, self.l_wlf, self.l_hog, self.l_total)]
        )


def hr_loss_nodes(
    v_pred: ad.Sym,
    target: ad.Sym,
    w: SubbandWeights,
    cfg: HogConfig,
    use_wlf: bool = True,
    use_hog: bool = True,
) -> dict[str, ad.Sym]:
    """Graph nodes for the selected components and their plain sum.

    Disabled components are omitted from the sum and reported as zero.
    """
    g = v_pred.graph
    zero = g.constant(0.0)
    l_rec = rec_loss_node(v_pred, target)
    l_wlf = wlf_loss_node(v_pred, target, w) if use_wlf else zero
    l_hog = hog_loss_node(v_pred, target, cfg) if use_hog else zero
    total = l_rec
    if use_wlf:
        total = total + l_wlf
    if use_hog:
        total = total + l_hog
    return {"l_rec": l_rec, "l_wlf": l_wlf, "l_hog": l_hog, "l_total": total}


_CACHE: dict[tuple, ad.Graph] = {}


def _graph(shape: tuple[int, ...], w: SubbandWeights, cfg: HogConfig) -> ad.Graph:
    key = (shape, w.w_ll, w.w_lh, w.w_hl, w.w_hh, cfg.key())
    g = _CACHE.get(key)
    if g is None:
        g = ad.Graph()
        v = g.input("v", shape)
        t = g.input("target", shape)
        for name, node in hr_loss_nodes(v, t, w, cfg).items():
            g.output(name, node)
        _CACHE[key] = g
    return g


def hr_loss(
    v_pred: np.ndarray,
    x0: np.ndarray,
    eps: np.ndarray,
    w: SubbandWeights = SubbandWeights(),
    cfg: HogConfig = HogConfig(),
    t: float | None = None,
    step: int | None = None,
) -> LossReport:
    """Evaluate all three components on a velocity prediction."""
    if not (v_pred.shape == x0.shape == eps.shape):
        raise ValueError(f"shape mismatch: {v_pred.shape}, {x0.shape}, {eps.shape}")
    g = _graph(v_pred.shape, w, cfg)
    out = g.forward({"v": v_pred, "target": eps - x0})
    return LossReport(
        l_rec=float(out["l_rec"]),
        l_wlf=float(out["l_wlf"]),
        l_hog=float(out["l_hog"]),
        l_total=float(out["l_total"]),
        weights=w,
        t=t,
        step=step,
    )
