"""Rectified-flow forward process, velocity target, plain flow loss, sampler.

The schedule is pinned to the linear interpolation alpha(t) = 1 - t,
sigma(t) = t; under it the constant velocity eps - x0 is the exact path
derivative, which is what makes the one-step sampler exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import autodiff as ad

__all__ = [
    "LinearSchedule",
    "LINEAR",
    "DiffusionSample",
    "forward_diffuse",
    "velocity_target",
    "rec_loss",
    "rec_loss_node",
    "euler_sample",
    "NumericalAbort",
]


class NumericalAbort(RuntimeError):
    """Non-finite values encountered; ``step`` is the sampler/trainer step index."""

    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (step {step})")
        self.step = step


class LinearSchedule:
    """alpha(t) = 1 - t, sigma(t) = t on t in [0, 1]."""

    def alpha(self, t: float) -> float:
        return 1.0 - t

    def sigma(self, t: float) -> float:
        return float(t)


LINEAR = LinearSchedule()


@dataclass
class DiffusionSample:
    x0: np.ndarray
    eps: np.ndarray
    t: float
    zt: np.ndarray


def _check_pair(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{what}: shape mismatch {a.shape} vs {b.shape}")


def forward_diffuse(
    x0: np.ndarray, eps: np.ndarray, t: float, sched: LinearSchedule = LINEAR
) -> DiffusionSample:
    """Interpolate clean latent and noise at time t: alpha(t)*x0 + sigma(t)*eps."""
    _check_pair(x0, eps, "forward_diffuse")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t={t} outside [0, 1]")
    a = x0.dtype.type(sched.alpha(t))
    s = x0.dtype.type(sched.sigma(t))
    if t == 0.0:
        zt = x0.copy()
    elif t == 1.0:
        zt = eps.astype(x0.dtype, copy=True)
    else:
        zt = a * x0 + s * eps.astype(x0.dtype)
    return DiffusionSample(x0=x0, eps=eps, t=float(t), zt=zt)


def velocity_target(x0: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """Constant flow velocity along the linear path: eps - x0."""
    _check_pair(x0, eps, "velocity_target")
    return eps - x0


def rec_loss(v_pred: np.ndarray, x0: np.ndarray, eps: np.ndarray) -> float:
    """Mean squared residual of the predicted velocity against eps - x0."""
    _check_pair(v_pred, x0, "rec_loss")
    _check_pair(x0, eps, "rec_loss")
    r = v_pred - velocity_target(x0, eps)
    return float(np.mean(np.square(r)))

def rec_loss_node(v_pred: ad.Sym, target: ad.Sym) -> ad.Sym:
    """Graph form of the flow loss: mean((v - target)^2)."""
    return ad.square(v_pred - target).mean()


def euler_sample(
    model: Callable[[np.ndarray, np.ndarray, float], np.ndarray],
    z1: np.ndarray,
    cond: np.ndarray,
    steps: int,
) -> np.ndarray:
    """Integrate dz/dt = v from t=1 (noise) down to t=0 with uniform Euler steps.

    ``model(z, cond, t)`` returns the predicted velocity. With the exact
    velocity eps - x0 the path is linear, so any step count recovers x0.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    z = np.array(z1, copy=True)
    dt = 1.0 / steps
    for k in range(steps):
        t = 1.0 - k * dt
        v = model(z, cond, t)
        if v.shape != z.shape:
            raise ValueError(f"model output shape {v.shape} != state shape {z.shape}")
        if not np.all(np.isfinite(v)):
            raise NumericalAbort("non-finite model output", step=k)
        z = z - z.dtype.type(dt) * v.astype(z.dtype)
    return z
