"""Toy conditional denoiser: main token stack plus a condition branch.

The branch consumes only the conditioning signal (its defining property;
a vanilla mode that also patchifies the noisy latent exists for ablation)
and its features are injected into main blocks through the depth-ratio
mapping i -> floor(i / ceil(l_main / l_cpc)) with a learnable scale.

Blocks are linear -> nonlinearity -> linear with a residual connection and
an additive time embedding; patchify is a strided linear projection over
(time, height, width) patches. No attention, no text path.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .diffusion import NumericalAbort, forward_diffuse
from .hog import HogConfig
from .hr_loss import LossReport, hr_loss_nodes
from .tensorio import load_checkpoint, save_checkpoint
from .wavelet import SubbandWeights

__all__ = [
    "FusionSchedule",
    "fusion_indices",
    "DenoiserConfig",
    "TrainConfig",
    "Denoiser",
    "TrainState",
    "train_step",
    "init_params",
    "time_features",
    "branch_input_param_count",
    "save_denoiser",
    "load_denoiser",
]

MODES = ("cpc", "vanilla_controlnet", "no_control")
LOSSES = ("rec", "rec+wlf", "rec+hog", "hr")
ACTIVATIONS = ("tanh", "relu", "identity")


@dataclass(frozen=True)
class FusionSchedule:
    """Depth-ratio mapping from main blocks onto branch features."""

    l_main: int
    l_cpc: int
    gamma_init: float = 1.0

    def __post_init__(self):
        if not 1 <= self.l_cpc <= self.l_main:
            raise ValueError(f"need 1 <= l_cpc <= l_main, got {self.l_cpc}, {self.l_main}")

    @property
    def r(self) -> int:
        return math.ceil(self.l_main / self.l_cpc)


def fusion_indices(sched: FusionSchedule) -> list[tuple[int, int]]:
    """(main block, branch feature) injection pairs, in block order."""
    pairs = [(i, i // sched.r) for i in range(sched.l_main)]
    for i, j in pairs:
        if not 0 <= j < sched.l_cpc:
            raise ValueError(f"fusion index {j} for block {i} escapes [0, {sched.l_cpc})")
    return pairs


@dataclass(frozen=True)
class DenoiserConfig:
    patch: tuple[int, int, int] = (2, 4, 4)  # (time, height, width)
    hidden: int = 48
    l_main: int = 8
    l_cpc: int = 4
    mode: str = "cpc"
    time_width: int = 16
    activation: str = "tanh"
    gamma_per_block: bool = False

    def __post_init__(self):
        if self.hidden <= 0 or self.time_width <= 0 or self.time_width % 2:
            raise ValueError("hidden and time_width must be positive (time_width even)")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        FusionSchedule(self.l_main, self.l_cpc)

    def schedule(self) -> FusionSchedule:
        return FusionSchedule(self.l_main, self.l_cpc)

    def token_dim(self, channels: int) -> int:
        pt, ph, pw = self.patch
        return channels * pt * ph * pw

    def check_latent(self, shape: tuple[int, ...]) -> None:
        if len(shape) != 5:
            raise ValueError(f"latent must be (B, C, T, H, W), got {shape}")
        pt, ph, pw = self.patch
        _, _, t, h, w = shape
        if t % pt or h % ph or w % pw:
            raise ValueError(f"patch {self.patch} does not divide latent dims {shape[2:]}")


def time_features(t: float, width: int, batch: int) -> np.ndarray:
    """Fixed sinusoidal features of the diffusion time, (batch, width)."""
    k = np.arange(1, width // 2 + 1, dtype=np.float64)
    feats = np.concatenate([np.sin(2 * np.pi * k * t), np.cos(2 * np.pi * k * t)])
    return np.broadcast_to(feats.astype(np.float32), (batch, width)).copy()


def init_params(cfg: DenoiserConfig, channels: int, seed: int) -> dict[str, np.ndarray]:
    """Seeded parameter initialization; scaled-normal weights, zero biases."""
    rng = np.random.default_rng(seed)
    d_in = cfg.token_dim(channels)
    d = cfg.hidden

    def dense(n_in, n_out):
        w = rng.normal(0.0, 1.0 / np.sqrt(n_in), size=(n_in, n_out)).astype(np.float32)
        return w, np.zeros(n_out, dtype=np.float32)

    params: dict[str, np.ndarray] = {}

    def add_dense(name, n_in, n_out):
        params[f"{name}.w"], params[f"{name}.b"] = dense(n_in, n_out)

    def add_block(prefix):
        add_dense(f"{prefix}.fc1", d, d)
        add_dense(f"{prefix}.fc2", d, d)

    add_dense("main.patch", d_in, d)
    add_dense("main.time", cfg.time_width, d)
    for i in range(cfg.l_main):
        add_block(f"main.block{i}")
    add_dense("main.out", d, d_in)
    # zero output projection: the untrained prediction starts at zero, which
    # keeps the first gradient steps well-scaled under any loss weighting
    params["main.out.w"][:] = 0.0

    if cfg.mode != "no_control":
        add_dense("branch.cond", d_in, d)
        if cfg.mode == "vanilla_controlnet":
            add_dense("branch.patch", d_in, d)
        add_dense("branch.time", cfg.time_width, d)
        for j in range(cfg.l_cpc):
            add_block(f"branch.block{j}")
        n_gamma = cfg.l_main if cfg.gamma_per_block else ()
        params["gamma"] = np.full(n_gamma, cfg.schedule().gamma_init, dtype=np.float32)
    return params


def branch_input_param_count(params: dict[str, np.ndarray]) -> int:
    """Parameters feeding the branch input stage (condition and latent projections)."""
    return sum(
        v.size for k, v in params.items() if k.startswith(("branch.cond", "branch.patch"))
    )


def _act(x: ad.Sym, kind: str) -> ad.Sym:
    if kind == "tanh":
        return ad.tanh(x)
    if kind == "relu":
        return ad.relu(x)
    return x


def _patchify(x: ad.Sym, patch: tuple[int, int, int]) -> ad.Sym:
    b, c, t, h, w = x.shape
    pt, ph, pw = patch
    nt, nh, nw = t // pt, h // ph, w // pw
    x = x.reshape((b, c, nt, pt, nh, ph, nw, pw))
    x = x.transpose((0, 2, 4, 6, 1, 3, 5, 7))
    return x.reshape((b, nt * nh * nw, c * pt * ph * pw))


def _unpatchify(tokens: ad.Sym, patch: tuple[int, int, int], latent_shape) -> ad.Sym:
    b, c, t, h, w = latent_shape
    pt, ph, pw = patch
    nt, nh, nw = t // pt, h // ph, w // pw
    x = tokens.reshape((b, nt, nh, nw, c, pt, ph, pw))
    x = x.transpose((0, 4, 1, 5, 2, 6, 3, 7))
    return x.reshape((b, c, t, h, w))


def _dense(x: ad.Sym, p: dict[str, ad.Sym], name: str) -> ad.Sym:
    return x @ p[f"{name}.w"] + p[f"{name}.b"]


def _block(x: ad.Sym, p: dict[str, ad.Sym], prefix: str, temb: ad.Sym, act: str) -> ad.Sym:
    h = _act(_dense(x + temb, p, f"{prefix}.fc1"), act)
    return x + _dense(h, p, f"{prefix}.fc2")


def build_denoiser_graph(
    cfg: DenoiserConfig,
    latent_shape: tuple[int, ...],
    loss: str | None = None,
    weights: SubbandWeights | None = None,
    hog_cfg: HogConfig | None = None,
) -> ad.Graph:
    """Velocity-prediction graph; with ``loss`` set, adds target and loss outputs.

    Inputs: ``z_t``, ``cond``, ``t_feat``, one ``p:<name>`` per parameter, and
    (training only) ``x0`` and ``eps``. Outputs: ``v_pred``, ``branch_in`` when
    a branch exists, and the loss components when training.
    """
    cfg.check_latent(latent_shape)
    b = latent_shape[0]
    c = latent_shape[1]
    g = ad.Graph()
    z_t = g.input("z_t", latent_shape)
    cond = g.input("cond", latent_shape)
    t_feat = g.input("t_feat", (b, cfg.time_width))

    template = init_params(cfg, c, seed=0)
    p = {name: g.input(f"p:{name}", arr.shape) for name, arr in template.items()}

    d = cfg.hidden
    temb_m = _dense(t_feat, p, "main.time").reshape((b, 1, d))

    feats: list[ad.Sym] = []
    if cfg.mode != "no_control":
        bx = _dense(_patchify(cond, cfg.patch), p, "branch.cond")
        if cfg.mode == "vanilla_controlnet":
            bx = bx + _dense(_patchify(z_t, cfg.patch), p, "branch.patch")
        g.output("branch_in", bx)
        temb_b = _dense(t_feat, p, "branch.time").reshape((b, 1, d))
        for j in range(cfg.l_cpc):
            bx = _block(bx, p, f"branch.block{j}", temb_b, cfg.activation)
            feats.append(bx)

    x = _dense(_patchify(z_t, cfg.patch), p, "main.patch")
    for i, j in fusion_indices(cfg.schedule()):
        x = _block(x, p, f"main.block{i}", temb_m, cfg.activation)
        if feats:
            gamma = p["gamma"][i] if cfg.gamma_per_block else p["gamma"]
            x = x + gamma * feats[j]
    v = _unpatchify(_dense(x, p, "main.out"), cfg.patch, latent_shape)
    g.output("v_pred", v)

    if loss is not None:
        if loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}")
        x0 = g.input("x0", latent_shape)
        eps = g.input("eps", latent_shape)
        target = eps - x0
        nodes = hr_loss_nodes(
            v,
            target,
            weights or SubbandWeights(),
            hog_cfg or HogConfig(),
            use_wlf=loss in ("rec+wlf", "hr"),
            use_hog=loss in ("rec+hog", "hr"),
        )
        for name, node in nodes.items():
            g.output(name, node)
    return g


class Denoiser:
    """Parameter bundle plus shape-specialized graphs for evaluation."""

    def __init__(self, cfg: DenoiserConfig, params: dict[str, np.ndarray]):
        self.cfg = cfg
        self.params = params
        self._graphs: dict[tuple, ad.Graph] = {}

    @classmethod
    def initialized(cls, cfg: DenoiserConfig, channels: int, seed: int) -> "Denoiser":
        return cls(cfg, init_params(cfg, channels, seed))

    def graph_for(self, latent_shape: tuple[int, ...], loss: str | None = None, **kw) -> ad.Graph:
        key = (tuple(latent_shape), loss, tuple(sorted(kw.items())))
        if key not in self._graphs:
            self._graphs[key] = build_denoiser_graph(self.cfg, tuple(latent_shape), loss=loss, **kw)
        return self._graphs[key]

    def bind(self, extra: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        bound = {f"p:{k}": v for k, v in self.params.items()}
        bound.update(extra)
        return bound

    def predict(self, z_t: np.ndarray, cond: np.ndarray, t: float) -> np.ndarray:
        """Velocity prediction; usable directly as the sampler's model callable."""
        g = self.graph_for(z_t.shape)
        t_feat = time_features(t, self.cfg.time_width, z_t.shape[0])
        out = g.forward(self.bind({"z_t": z_t, "cond": cond, "t_feat": t_feat}))
        return out["v_pred"]

    def branch_input(self, z_t: np.ndarray, cond: np.ndarray, t: float) -> np.ndarray:
        if self.cfg.mode == "no_control":
            raise ValueError("no branch in no_control mode")
        g = self.graph_for(z_t.shape)
        t_feat = time_features(t, self.cfg.time_width, z_t.shape[0])
        out = g.forward(self.bind({"z_t": z_t, "cond": cond, "t_feat": t_feat}))
        return out["branch_in"]


@dataclass(frozen=True)
class TrainConfig:
    loss: str = "hr"
    lr: float = 1e-3
    momentum: float = 0.9
    weight_decay: float = 1e-4
    weights: SubbandWeights = field(default_factory=SubbandWeights)
    hog: HogConfig = field(default_factory=HogConfig)

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}")


@dataclass
class TrainState:
    model: Denoiser
    cfg: TrainConfig
    rng: np.random.Generator
    momentum: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    @classmethod
    def create(cls, model: Denoiser, cfg: TrainConfig, seed: int) -> "TrainState":
        return cls(model=model, cfg=cfg, rng=np.random.default_rng(seed))


def train_step(state: TrainState, cond: np.ndarray, x0: np.ndarray) -> LossReport:
    """One gradient step on a (condition, clean-latent) batch.

    Draws the timestep uniformly and the noise from the state rng, steps the
    parameters with momentum gradient descent and decoupled weight decay,
    and returns the loss breakdown. Fully determined by the state.
    """
    if cond.shape != x0.shape:
        raise ValueError(f"cond shape {cond.shape} != target shape {x0.shape}")
    if x0.shape[0] < 1:
        raise ValueError("empty batch")
    model, cfg = state.model, state.cfg
    t = float(state.rng.uniform())
    eps = state.rng.standard_normal(x0.shape).astype(np.float32)
    z_t = forward_diffuse(x0, eps, t).zt
    t_feat = time_features(t, model.cfg.time_width, x0.shape[0])

    graph = model.graph_for(x0.shape, loss=cfg.loss, weights=cfg.weights, hog_cfg=cfg.hog)
    inputs = model.bind({"z_t": z_t, "cond": cond, "t_feat": t_feat, "x0": x0, "eps": eps})
    param_keys = [f"p:{k}" for k in model.params]
    outs, grads = graph.value_and_grad("l_total", inputs, wrt=param_keys)

    total = float(outs["l_total"])
    if not np.isfinite(total):
        raise NumericalAbort(
            f"non-finite training loss (rec={float(outs['l_rec'])!r}, "
            f"wlf={float(outs['l_wlf'])!r}, hog={float(outs['l_hog'])!r})",
            step=state.step,
        )

    lr = np.float32(cfg.lr)
    mom = np.float32(cfg.momentum)
    wd = np.float32(cfg.weight_decay)
    for name, p in model.params.items():
        gkey = f"p:{name}"
        buf = state.momentum.get(name)
        if buf is None:
            buf = np.zeros_like(p)
        buf = mom * buf + grads[gkey].astype(np.float32)
        state.momentum[name] = buf
        updated = p - lr * buf - lr * wd * p
        if not np.all(np.isfinite(updated)):
            raise NumericalAbort(f"parameter {name!r} became non-finite after update", step=state.step)
        model.params[name] = updated

    report = LossReport(
        l_rec=float(outs["l_rec"]),
        l_wlf=float(outs["l_wlf"]),
        l_hog=float(outs["l_hog"]),
        l_total=total,
        weights=cfg.weights,
        t=t,
        step=state.step,
    )
    state.step += 1
    return report


def save_denoiser(path_prefix: str | Path, model: Denoiser) -> None:
    """Write ``<prefix>.ckpt`` (named tensors) and ``<prefix>.json`` (config)."""
    prefix = Path(path_prefix)
    save_checkpoint(prefix.with_suffix(".ckpt"), model.params)
    cfg = asdict(model.cfg)
    cfg["patch"] = list(model.cfg.patch)
    prefix.with_suffix(".json").write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")


def load_denoiser(path_prefix: str | Path) -> Denoiser:
    prefix = Path(path_prefix)
    raw = json.loads(prefix.with_suffix(".json").read_text())
    raw["patch"] = tuple(raw["patch"])
    cfg = DenoiserConfig(**raw)
    params = {k: v.astype(np.float32) for k, v in load_checkpoint(prefix.with_suffix(".ckpt")).items()}
    return Denoiser(cfg, params)
