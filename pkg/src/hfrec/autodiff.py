"""Reverse-mode automatic differentiation over a small, fixed primitive set.

A :class:`Graph` records primitive operations applied to symbolic handles
(:class:`Sym`). Inputs are named placeholders with declared shapes, so one
graph can be re-run against fresh tensors. Tensors are plain numpy arrays;
float32 is the working precision, float64 is used for gradient checks.

The primitive set is closed on purpose: elementwise add/sub/mul, scalar
scale, matmul, strided 2D cross-correlation with a fixed kernel, a small
table of pointwise functions, sum/mean reductions, slice, concatenate,
bilinear resize, plus the index-permutation ops reshape/transpose needed
to route patches and sub-bands. Every loss in this package compiles to it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .imageops import linear_resample_axis, resample_axis_vjp

__all__ = [
    "Graph",
    "GraphError",
    "Sym",
    "GradCheckEntry",
    "GradCheckReport",
    "grad_check",
    "relu",
    "tanh",
    "sqrt",
    "exp",
    "absolute",
    "square",
    "minimum",
    "maximum",
    "divide",
    "orient180",
    "conv2d",
    "concat",
    "bilinear_resize",
]

DEFAULT_DTYPE = np.float32


class GraphError(ValueError):
    """Rejected graph construction or execution; carries the offending node id."""

    def __init__(self, message: str, node: int | None = None):
        super().__init__(message if node is None else f"node {node}: {message}")
        self.node = node


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if grad.shape[ax] != n:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


def _broadcast_shape(a: tuple, b: tuple, node: int) -> tuple:
    try:
        return np.broadcast_shapes(a, b)
    except ValueError:
        raise GraphError(f"shapes {a} and {b} do not broadcast", node) from None


# Pointwise function tables: name -> (f, df) / (f, (df/da, df/db)).
_UNARY: dict[str, tuple[Callable, Callable]] = {
    "relu": (lambda x: np.maximum(x, 0.0), lambda x, y: (x > 0).astype(x.dtype)),
    "tanh": (np.tanh, lambda x, y: 1.0 - y * y),
    "sqrt": (np.sqrt, lambda x, y: 0.5 / np.maximum(y, np.finfo(x.dtype).tiny)),
    "exp": (np.exp, lambda x, y: y),
    "abs": (np.abs, lambda x, y: np.sign(x)),
    "square": (np.square, lambda x, y: 2.0 * x),
}


def _orient180_fwd(gy: np.ndarray, gx: np.ndarray) -> np.ndarray:
    theta = np.arctan2(gy, gx)
    return np.where(theta < 0, theta + np.pi, theta)


def _orient180_dargs(gy, gx, out):
    # Folding adds a locally constant offset, so the derivative is that of
    # arctan2 itself; the isolated singular point gets subgradient zero.
    denom = gx * gx + gy * gy
    safe = np.where(denom == 0, 1.0, denom)
    d_gy = np.where(denom == 0, 0.0, gx / safe)
    d_gx = np.where(denom == 0, 0.0, -gy / safe)
    return d_gy, d_gx


_BINARY: dict[str, tuple[Callable, Callable]] = {
    "div": (
        lambda a, b: a / b,
        lambda a, b, y: (1.0 / b, -a / (b * b)),
    ),
    "maximum": (
        np.maximum,
        lambda a, b, y: ((a >= b).astype(a.dtype), (a < b).astype(a.dtype)),
    ),
    "minimum": (
        np.minimum,
        lambda a, b, y: ((a <= b).astype(a.dtype), (a > b).astype(a.dtype)),
    ),
    "orient180": (_orient180_fwd, _orient180_dargs),
}


@dataclass
class _Node:
    op: str
    args: tuple[int, ...]
    shape: tuple[int, ...]
    params: dict = field(default_factory=dict)


class Sym:
    """Symbolic handle to one graph node; arithmetic records new nodes."""

    __slots__ = ("graph", "nid")
    __array_priority__ = 100  # keep numpy from hijacking reflected operators

    def __init__(self, graph: "Graph", nid: int):
        self.graph = graph
        self.nid = nid

    @property
    def shape(self) -> tuple[int, ...]:
        return self.graph._nodes[self.nid].shape

    @property
    def size(self) -> int:
        return int(np.prod(self.shape)) if self.shape else 1

    def _lift(self, other) -> "Sym":
        if isinstance(other, Sym):
            if other.graph is not self.graph:
                raise GraphError("operands belong to different graphs")
            return other
        return self.graph.constant(other)

    def __add__(self, other):
        return self.graph._record("add", (self, self._lift(other)))

    def __radd__(self, other):
        return self._lift(other).__add__(self)

    def __sub__(self, other):
        return self.graph._record("sub", (self, self._lift(other)))

    def __rsub__(self, other):
        return self._lift(other).__sub__(self)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return self.graph._record("scale", (self,), factor=float(other))
        return self.graph._record("mul", (self, self._lift(other)))

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return self.graph._record("scale", (self,), factor=1.0 / float(other))
        return self.graph._record("div", (self, self._lift(other)))

    def __neg__(self):
        return self.graph._record("scale", (self,), factor=-1.0)

    def __matmul__(self, other):
        return self.graph._record("matmul", (self, self._lift(other)))

    def __getitem__(self, key):
        return self.graph._record("slice", (self,), key=key)

    def sum(self, axis=None, keepdims: bool = False) -> "Sym":
        return self.graph._record("sum", (self,), axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Sym":
        return self.graph._record("mean", (self,), axis=axis, keepdims=keepdims)

    def reshape(self, shape: Sequence[int]) -> "Sym":
        return self.graph._record("reshape", (self,), newshape=tuple(shape))

    def transpose(self, axes: Sequence[int]) -> "Sym":
        return self.graph._record("transpose", (self,), axes=tuple(axes))


def _pointwise(name: str):
    def fn(x: Sym) -> Sym:
        return x.graph._record("unary", (x,), fn=name)

    fn.__name__ = name
    return fn


relu = _pointwise("relu")
tanh = _pointwise("tanh")
sqrt = _pointwise("sqrt")
exp = _pointwise("exp")
absolute = _pointwise("abs")
square = _pointwise("square")


def _pointwise2(name: str):
    def fn(a: Sym, b) -> Sym:
        return a.graph._record("binary", (a, a._lift(b)), fn=name)

    fn.__name__ = name
    return fn


divide = _pointwise2("div")
maximum = _pointwise2("maximum")
minimum = _pointwise2("minimum")
orient180 = _pointwise2("orient180")


def conv2d(x: Sym, kernel: np.ndarray, stride: int | tuple[int, int] = 1) -> Sym:
    """Strided valid cross-correlation of the last two axes with a fixed kernel.

    The kernel is baked into the graph as a constant; gradients flow to the
    input only.
    """
    if isinstance(stride, int):
        stride = (stride, stride)
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.ndim != 2:
        raise GraphError("conv2d kernel must be 2D")
    return x.graph._record("conv2d", (x,), kernel=kernel, stride=tuple(stride))


def concat(parts: Sequence[Sym], axis: int) -> Sym:
    if not parts:
        raise GraphError("concat of zero tensors")
    g = parts[0].graph
    return g._record("concat", tuple(parts), axis=int(axis))


def bilinear_resize(x: Sym, out_hw: tuple[int, int]) -> Sym:
    """Bilinear resample of the last two axes (half-pixel centers, edge clamp)."""
    return x.graph._record("bilinear_resize", (x,), out_hw=(int(out_hw[0]), int(out_hw[1])))


def _conv_out(n: int, k: int, s: int) -> int:
    return (n - k) // s + 1


class Graph:
    """Recorded computation over named inputs; replayable and differentiable."""

    def __init__(self):
        self._nodes: list[_Node] = []
        self._inputs: dict[str, int] = {}
        self._outputs: dict[str, int] = {}
        self._consts: dict[int, np.ndarray] = {}
        self._frozen = False

    # -- construction -----------------------------------------------------

    def input(self, name: str, shape: Sequence[int]) -> Sym:
        self._check_open()
        if name in self._inputs:
            raise GraphError(f"duplicate input name {name!r}")
        nid = self._add(_Node("input", (), tuple(int(s) for s in shape), {"name": name}))
        self._inputs[name] = nid
        return Sym(self, nid)

    def constant(self, value) -> Sym:
        self._check_open()
        arr = np.asarray(value, dtype=np.float64)
        arr.flags.writeable = False
        nid = self._add(_Node("const", (), arr.shape))
        self._consts[nid] = arr
        return Sym(self, nid)

    def output(self, name: str, sym: Sym) -> None:
        self._check_open()
        if name in self._outputs:
            raise GraphError(f"duplicate output name {name!r}")
        self._outputs[name] = sym.nid

    @property
    def input_names(self) -> tuple[str, ...]:
        return tuple(self._inputs)

    @property
    def output_names(self) -> tuple[str, ...]:
        return tuple(self._outputs)

    def num_nodes(self) -> int:
        return len(self._nodes)

    def shape_of(self, name: str) -> tuple[int, ...]:
        return self._nodes[self._inputs[name]].shape

    def _check_open(self):
        if self._frozen:
            raise GraphError("graph is frozen after first execution")

    def _add(self, node: _Node) -> int:
        self._nodes.append(node)
        return len(self._nodes) - 1

    def _record(self, op: str, args: tuple[Sym, ...], **params) -> Sym:
        self._check_open()
        nid = len(self._nodes)
        shapes = [a.shape for a in args]
        shape = self._infer_shape(op, shapes, params, nid)
        self._nodes.append(_Node(op, tuple(a.nid for a in args), shape, params))
        return Sym(self, nid)

    def _infer_shape(self, op, shapes, params, nid) -> tuple[int, ...]:
        if op in ("add", "sub", "mul", "div", "maximum", "minimum", "binary"):
            return _broadcast_shape(shapes[0], shapes[1], nid)
        if op in ("scale", "unary"):
            return shapes[0]
        if op == "matmul":
            a, b = shapes
            if len(a) < 2 or len(b) < 2:
                raise GraphError("matmul operands must have rank >= 2", nid)
            if a[-1] != b[-2]:
                raise GraphError(f"matmul inner dims {a} @ {b}", nid)
            batch = _broadcast_shape(a[:-2], b[:-2], nid)
            return batch + (a[-2], b[-1])
        if op == "conv2d":
            k = params["kernel"].shape
            sh, sw = params["stride"]
            h, w = shapes[0][-2], shapes[0][-1]
            if h < k[0] or w < k[1]:
                raise GraphError(f"conv2d input {shapes[0]} smaller than kernel {k}", nid)
            return shapes[0][:-2] + (_conv_out(h, k[0], sh), _conv_out(w, k[1], sw))
        if op in ("sum", "mean"):
            axis, keep = params["axis"], params["keepdims"]
            if axis is None:
                return (1,) * len(shapes[0]) if keep else ()
            axes = (axis,) if isinstance(axis, int) else tuple(axis)
            axes = tuple(a % len(shapes[0]) for a in axes)
            if keep:
                return tuple(1 if i in axes else s for i, s in enumerate(shapes[0]))
            return tuple(s for i, s in enumerate(shapes[0]) if i not in axes)
        if op == "slice":
            probe = np.empty(shapes[0], dtype=np.bool_)
            try:
                return probe[params["key"]].shape
            except IndexError as e:
                raise GraphError(f"bad slice {params['key']!r} on {shapes[0]}: {e}", nid) from None
        if op == "concat":
            ax = params["axis"]
            base = list(shapes[0])
            for s in shapes[1:]:
                if len(s) != len(base) or any(s[i] != base[i] for i in range(len(base)) if i != ax % len(base)):
                    raise GraphError(f"concat shapes {shapes} on axis {ax}", nid)
                base[ax] += s[ax]
            return tuple(base)
        if op == "bilinear_resize":
            if len(shapes[0]) < 2:
                raise GraphError("bilinear_resize needs rank >= 2", nid)
            return shapes[0][:-2] + params["out_hw"]
        if op == "reshape":
            if int(np.prod(shapes[0])) != int(np.prod(params["newshape"])):
                raise GraphError(f"reshape {shapes[0]} -> {params['newshape']}", nid)
            return params["newshape"]
        if op == "transpose":
            return tuple(shapes[0][a] for a in params["axes"])
        raise GraphError(f"unknown op {op!r}", nid)

    # -- execution ----------------------------------------------------------

    def _bind(self, inputs: dict[str, np.ndarray], dtype) -> dict[int, np.ndarray]:
        missing = set(self._inputs) - set(inputs)
        if missing:
            raise GraphError(f"unbound inputs: {sorted(missing)}")
        env: dict[int, np.ndarray] = {}
        for name, nid in self._inputs.items():
            arr = np.asarray(inputs[name], dtype=dtype)
            want = self._nodes[nid].shape
            if arr.shape != want:
                raise GraphError(f"input {name!r} has shape {arr.shape}, declared {want}", nid)
            if not np.all(np.isfinite(arr)):
                raise GraphError(f"input {name!r} contains non-finite values", nid)
            env[nid] = arr
        return env

    @staticmethod
    def _exec_dtype(inputs: dict[str, np.ndarray], dtype):
        if dtype is not None:
            return np.dtype(dtype)
        if any(np.asarray(v).dtype == np.float64 for v in inputs.values()):
            return np.dtype(np.float64)
        return np.dtype(DEFAULT_DTYPE)

    def _run(self, inputs: dict[str, np.ndarray], dtype) -> dict[int, np.ndarray]:
        dt = self._exec_dtype(inputs, dtype)
        env = self._bind(inputs, dt)
        self._frozen = True
        # non-finite propagation is handled by explicit checks at the
        # boundaries (input binding, loss/sampler guards), not warnings
        with np.errstate(all="ignore"):
            for nid, node in enumerate(self._nodes):
                if node.op == "input":
                    continue
                if node.op == "const":
                    env[nid] = self._consts[nid].astype(dt)
                    continue
                args = [env[a] for a in node.args]
                env[nid] = self._eval(node, args, dt, nid)
        return env

    def forward(self, inputs: dict[str, np.ndarray], dtype=None) -> dict[str, np.ndarray]:
        """Evaluate every output against the bound inputs. Pure: no state kept."""
        env = self._run(inputs, dtype)
        return {name: env[nid] for name, nid in self._outputs.items()}

    def _eval(self, node: _Node, args, dt, nid) -> np.ndarray:
        op, p = node.op, node.params
        if op == "add":
            return args[0] + args[1]
        if op == "sub":
            return args[0] - args[1]
        if op == "mul":
            return args[0] * args[1]
        if op == "scale":
            return args[0] * dt.type(p["factor"])
        if op == "matmul":
            return args[0] @ args[1]
        if op == "unary":
            return _UNARY[p["fn"]][0](args[0])
        if op == "binary":
            return _BINARY[p["fn"]][0](args[0], args[1])
        if op == "conv2d":
            return _conv2d_fwd(args[0], p["kernel"].astype(dt), p["stride"])
        if op == "sum":
            return np.sum(args[0], axis=p["axis"], keepdims=p["keepdims"], dtype=dt)
        if op == "mean":
            return np.mean(args[0], axis=p["axis"], keepdims=p["keepdims"], dtype=dt)
        if op == "slice":
            return args[0][p["key"]]
        if op == "concat":
            return np.concatenate(args, axis=p["axis"])
        if op == "bilinear_resize":
            oh, ow = p["out_hw"]
            y = linear_resample_axis(args[0], oh, axis=-2)
            return linear_resample_axis(y, ow, axis=-1)
        if op == "reshape":
            return np.ascontiguousarray(args[0]).reshape(p["newshape"])
        if op == "transpose":
            return np.transpose(args[0], p["axes"])
        raise GraphError(f"unknown op {op!r}", nid)

    def backward(
        self,
        seed_output: str,
        inputs: dict[str, np.ndarray],
        dtype=None,
        wrt: Sequence[str] | None = None,
    ) -> dict[str, np.ndarray]:
        """Gradients of the scalar output ``seed_output`` w.r.t. every input.

        ``wrt`` restricts the differentiated inputs; subgraphs that cannot
        reach them are skipped entirely.
        """
        if seed_output not in self._outputs:
            raise GraphError(f"unknown output {seed_output!r}")
        return self._backward_env(seed_output, self._run(inputs, dtype), wrt)

    def value_and_grad(
        self,
        seed_output: str,
        inputs: dict[str, np.ndarray],
        dtype=None,
        wrt: Sequence[str] | None = None,
    ) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray]]:
        """One forward pass, then gradients from ``seed_output``; shares the env."""
        if seed_output not in self._outputs:
            raise GraphError(f"unknown output {seed_output!r}")
        env = self._run(inputs, dtype)
        outs = {name: env[nid] for name, nid in self._outputs.items()}
        return outs, self._backward_env(seed_output, env, wrt)

    def _needs_grad(self, wrt: Sequence[str] | None) -> list[bool]:
        needs = [False] * len(self._nodes)
        names = self._inputs if wrt is None else {n: self._inputs[n] for n in wrt}
        for nid in names.values():
            needs[nid] = True
        for nid, node in enumerate(self._nodes):
            if node.args:
                needs[nid] = any(needs[a] for a in node.args)
        return needs

    def _backward_env(self, seed_output: str, env, wrt: Sequence[str] | None = None) -> dict[str, np.ndarray]:
        seed_nid = self._outputs[seed_output]
        if self._nodes[seed_nid].shape != ():
            raise GraphError(f"seed output {seed_output!r} is not scalar", seed_nid)
        dt = env[seed_nid].dtype
        needs = self._needs_grad(wrt)
        grads: dict[int, np.ndarray] = {}
        if needs[seed_nid]:
            grads[seed_nid] = np.ones((), dtype=dt)
        with np.errstate(all="ignore"):
            for nid in range(seed_nid, -1, -1):
                g = grads.pop(nid, None)
                if g is None:
                    continue
                node = self._nodes[nid]
                if node.op in ("input", "const"):
                    grads[nid] = g  # terminal; reinstate
                    continue
                args = [env[a] for a in node.args]
                wanted = tuple(needs[a] for a in node.args)
                for aid, ag in zip(node.args, self._vjp(node, args, env[nid], g, dt, wanted)):
                    if ag is None:
                        continue
                    if aid in grads:
                        grads[aid] = grads[aid] + ag
                    else:
                        grads[aid] = ag
        watched = self._inputs if wrt is None else {n: self._inputs[n] for n in wrt}
        out = {}
        for name, nid in watched.items():
            out[name] = grads.get(nid)
            if out[name] is None:
                out[name] = np.zeros(self._nodes[nid].shape, dtype=dt)
        return out

    def _vjp(self, node: _Node, args, out, g, dt, wanted=(True, True)):
        op, p = node.op, node.params
        if op == "add":
            return (
                _unbroadcast(g, args[0].shape) if wanted[0] else None,
                _unbroadcast(g, args[1].shape) if wanted[1] else None,
            )
        if op == "sub":
            return (
                _unbroadcast(g, args[0].shape) if wanted[0] else None,
                _unbroadcast(-g, args[1].shape) if wanted[1] else None,
            )
        if op == "mul":
            return (
                _unbroadcast(g * args[1], args[0].shape) if wanted[0] else None,
                _unbroadcast(g * args[0], args[1].shape) if wanted[1] else None,
            )
        if op == "scale":
            return (g * dt.type(p["factor"]),)
        if op == "matmul":
            a, b = args
            ga = _unbroadcast(g @ np.swapaxes(b, -1, -2), a.shape) if wanted[0] else None
            gb = _unbroadcast(np.swapaxes(a, -1, -2) @ g, b.shape) if wanted[1] else None
            return (ga, gb)
        if op == "unary":
            return (g * _UNARY[p["fn"]][1](args[0], out),)
        if op == "binary":
            da, db = _BINARY[p["fn"]][1](args[0], args[1], out)
            return (
                _unbroadcast(g * da, args[0].shape) if wanted[0] else None,
                _unbroadcast(g * db, args[1].shape) if wanted[1] else None,
            )
        if op == "conv2d":
            return (_conv2d_vjp(g, args[0].shape, p["kernel"].astype(dt), p["stride"]),)
        if op == "sum":
            return (_reduce_vjp(g, args[0].shape, p["axis"], p["keepdims"], scale=1.0),)
        if op == "mean":
            n = args[0].size / max(out.size, 1)
            return (_reduce_vjp(g, args[0].shape, p["axis"], p["keepdims"], scale=1.0 / n),)
        if op == "slice":
            gx = np.zeros(args[0].shape, dtype=dt)
            gx[p["key"]] = g
            return (gx,)
        if op == "concat":
            ax = p["axis"]
            sizes = [a.shape[ax] for a in args]
            splits = np.cumsum(sizes)[:-1]
            return tuple(np.split(g, splits, axis=ax))
        if op == "bilinear_resize":
            h, w = args[0].shape[-2], args[0].shape[-1]
            gy = resample_axis_vjp(g, w, axis=-1)
            return (resample_axis_vjp(gy, h, axis=-2),)
        if op == "reshape":
            return (np.ascontiguousarray(g).reshape(args[0].shape),)
        if op == "transpose":
            return (np.transpose(g, np.argsort(p["axes"])),)
        raise GraphError(f"unknown op {op!r}")


def _conv_tiled(x: np.ndarray, stride) -> bool:
    # non-overlapping windows cover the input exactly; a plain reshape suffices
    return x.shape[-2] % stride[0] == 0 and x.shape[-1] % stride[1] == 0


def _conv2d_fwd(x: np.ndarray, k: np.ndarray, stride) -> np.ndarray:
    sh, sw = stride
    if (sh, sw) == k.shape and _conv_tiled(x, stride):
        ho, wo = x.shape[-2] // sh, x.shape[-1] // sw
        xr = x.reshape(x.shape[:-2] + (ho, sh, wo, sw))
        return np.einsum("...akbl,kl->...ab", xr, k, optimize=True)
    win = np.lib.stride_tricks.sliding_window_view(x, k.shape, axis=(-2, -1))
    win = win[..., ::sh, ::sw, :, :]
    return np.einsum("...ij,ij->...", win, k, optimize=True)


def _conv2d_vjp(g: np.ndarray, in_shape, k: np.ndarray, stride) -> np.ndarray:
    sh, sw = stride
    kh, kw = k.shape
    ho, wo = g.shape[-2], g.shape[-1]
    if (sh, sw) == k.shape and in_shape[-2] == sh * ho and in_shape[-1] == sw * wo:
        return np.einsum("...ab,kl->...akbl", g, k, optimize=True).reshape(in_shape)
    gx = np.zeros(in_shape, dtype=g.dtype)
    for i in range(kh):
        for j in range(kw):
            gx[..., i : i + sh * ho : sh, j : j + sw * wo : sw] += k[i, j] * g
    return gx


def _reduce_vjp(g, in_shape, axis, keepdims, scale):
    if axis is not None and not keepdims:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        axes = sorted(a % len(in_shape) for a in axes)
        for a in axes:
            g = np.expand_dims(g, a)
    return np.broadcast_to(g * g.dtype.type(scale), in_shape).copy()


# -- gradient checking ------------------------------------------------------


@dataclass
class GradCheckEntry:
    name: str
    max_rel_err: float
    passed: bool


@dataclass
class GradCheckReport:
    tolerance: float
    entries: dict[str, GradCheckEntry]

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries.values())

    def __str__(self) -> str:
        lines = [f"grad check (tol {self.tolerance:g}):"]
        for e in self.entries.values():
            lines.append(f"  {e.name}: max rel err {e.max_rel_err:.3e} {'ok' if e.passed else 'FAIL'}")
        return "\n".join(lines)


def grad_check(
    graph: Graph,
    inputs: dict[str, np.ndarray],
    tolerance: float,
    seed_output: str | None = None,
    step: float = 1e-3,
    wrt: Sequence[str] | None = None,
) -> GradCheckReport:
    """Compare analytic gradients against central finite differences (float64).

    The relative error per input is ``max |g - g_fd| / max(|g_fd|, 1e-8)``
    over all elements.
    """
    if seed_output is None:
        if len(graph.output_names) != 1:
            raise GraphError("seed_output required when the graph has several outputs")
        seed_output = graph.output_names[0]
    # private copies: the finite-difference loop perturbs entries in place
    base = {k: np.array(v, dtype=np.float64) for k, v in inputs.items()}
    names = list(wrt) if wrt is not None else list(graph.input_names)
    analytic = graph.backward(seed_output, base, dtype=np.float64, wrt=names)

    entries: dict[str, GradCheckEntry] = {}
    for name in names:
        x = base[name]
        fd = np.zeros_like(x)
        flat = x.reshape(-1)
        fd_flat = fd.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + step
            hi = float(graph.forward(base, dtype=np.float64)[seed_output])
            flat[i] = keep - step
            lo = float(graph.forward(base, dtype=np.float64)[seed_output])
            flat[i] = keep
            fd_flat[i] = (hi - lo) / (2.0 * step)
        err = np.abs(analytic[name] - fd) / np.maximum(np.abs(fd), 1e-8)
        worst = float(err.max()) if err.size else 0.0
        entries[name] = GradCheckEntry(name, worst, worst <= tolerance)
    return GradCheckReport(tolerance=tolerance, entries=entries)
