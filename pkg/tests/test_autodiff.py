import numpy as np
import pytest

from hfrec import autodiff as ad


def scalarize(g, node, rng):
    """Contract a tensor node to a scalar with fixed random weights so the
    gradient check exercises the full Jacobian."""
    w = g.constant(rng.normal(size=node.shape))
    return (node * w).sum()


def test_add_two_vectors():
    g = ad.Graph()
    a = g.input("a", (2,))
    b = g.input("b", (2,))
    g.output("y", a + b)
    y = g.forward({"a": np.array([1.0, 2.0], np.float32), "b": np.array([3.0, 4.0], np.float32)})
    assert np.array_equal(y["y"], np.array([4.0, 6.0], np.float32))


def test_scale_by_zero_annihilates(rng):
    g = ad.Graph()
    x = g.input("x", (3, 4))
    g.output("y", x * 0.0)
    y = g.forward({"x": rng.normal(size=(3, 4)).astype(np.float32)})["y"]
    assert np.array_equal(y, np.zeros((3, 4), np.float32))


def test_three_node_chain_matches_hand_evaluation():
    a = np.array([[1.0, 2.0], [3.0, -1.0]])
    b = np.array([[0.5, -0.25], [1.0, 2.0]])
    g = ad.Graph()
    xa = g.input("a", (2, 2))
    xb = g.input("b", (2, 2))
    g.output("f", ad.tanh(xa @ xb).mean())
    got = float(g.forward({"a": a, "b": b}, dtype=np.float64)["f"])
    # hand evaluation, no graph machinery
    prod = np.zeros((2, 2))
    for i in range(2):
        for j in range(2):
            prod[i, j] = sum(a[i, k] * b[k, j] for k in range(2))
    expected = np.tanh(prod).sum() / 4.0
    assert got == pytest.approx(expected, rel=1e-12)


def test_sum_gradient_is_ones(rng):
    g = ad.Graph()
    x = g.input("x", (3, 5))
    g.output("f", x.sum())
    grads = g.backward("f", {"x": rng.normal(size=(3, 5)).astype(np.float32)})
    assert np.array_equal(grads["x"], np.ones((3, 5), np.float32))


def test_mean_square_gradient(rng):
    g = ad.Graph()
    x = g.input("x", (6,))
    g.output("f", (x * x).mean())
    xv = rng.normal(size=6)
    grads = g.backward("f", {"x": xv}, dtype=np.float64)
    assert np.allclose(grads["x"], 2.0 * xv / 6.0, rtol=1e-12)


def test_grad_check_identity_graph_zero_error():
    g = ad.Graph()
    x = g.input("x", ())
    g.output("f", x + 0.0)
    # binary-exact step makes the central difference exact
    report = ad.grad_check(g, {"x": np.float64(0.5)}, tolerance=1e-15, step=2.0**-10)
    assert report.entries["x"].max_rel_err == 0.0
    assert report.passed


def _fd_graph_cases(rng):
    """One small graph per primitive; (name, graph, inputs)."""
    cases = []

    def make(name, build, shapes):
        g = ad.Graph()
        syms = [g.input(f"x{i}", s) for i, s in enumerate(shapes)]
        out = build(g, *syms)
        g.output("f", scalarize(g, out, rng) if out.shape != () else out)
        inputs = {f"x{i}": rng.normal(size=s) * 0.8 + 0.1 for i, s in enumerate(shapes)}
        cases.append((name, g, inputs))

    for shape in [(3,), (2, 4), (1, 3, 2), (5, 1), (2, 2, 2)]:
        make(f"add{shape}", lambda g, a, b: a + b, [shape, shape])
        make(f"mul{shape}", lambda g, a, b: a * b, [shape, shape])
        make(f"sub{shape}", lambda g, a, b: a - b, [shape, shape])
    make("add_broadcast", lambda g, a, b: a + b, [(3, 4), (1, 4)])
    make("mul_broadcast", lambda g, a, b: a * b, [(2, 3, 4), (4,)])
    for shape in [(2,), (3, 3), (1, 5), (4, 2), (2, 2, 3)]:
        make(f"scale{shape}", lambda g, a: a * -1.7, [shape])
    for sa, sb in [((2, 3), (3, 4)), ((3, 3), (3, 3)), ((1, 4), (4, 2)), ((5, 2), (2, 5)), ((2, 2, 3), (3, 2))]:
        make(f"matmul{sa}x{sb}", lambda g, a, b: a @ b, [sa, sb])
    kernels = [np.ones((2, 2)), rng.normal(size=(2, 2)), rng.normal(size=(3, 3)), np.ones((4, 4)), rng.normal(size=(2, 3))]
    strides = [(2, 2), (1, 1), (1, 2), (4, 4), (2, 1)]
    shapes = [(6, 8), (2, 5, 5), (4, 7), (8, 8), (3, 6, 7)]
    for k, s, shape in zip(kernels, strides, shapes):
        make(f"conv{shape}s{s}", lambda g, a, k=k, s=s: ad.conv2d(a, k, s), [shape])
    for fn in (ad.relu, ad.tanh, ad.exp, ad.absolute, ad.square):
        for shape in [(4,), (2, 3), (3, 1, 2), (5,), (2, 2)]:
            make(f"{fn.__name__}{shape}", lambda g, a, fn=fn: fn(a), [shape])
    for shape in [(4,), (2, 3), (5,), (3, 2), (2, 2, 2)]:
        # keep sqrt inputs positive and away from zero
        g = ad.Graph()
        a = g.input("x0", shape)
        g.output("f", scalarize(g, ad.sqrt(a), rng))
        cases.append((f"sqrt{shape}", g, {"x0": rng.uniform(0.5, 2.0, size=shape)}))
    for shape in [(4,), (2, 3), (5,), (3, 2), (2, 2, 2)]:
        make(f"div{shape}", lambda g, a, b: ad.divide(a, b + 3.0), [shape, shape])
        # order the operands so max/min selections sit away from ties
        g = ad.Graph()
        a, b = g.input("x0", shape), g.input("x1", shape)
        g.output("f", scalarize(g, ad.maximum(a, b), rng) + scalarize(g, ad.minimum(a, b), rng))
        xa = rng.normal(size=shape)
        cases.append((f"minmax{shape}", g, {"x0": xa + 1.0, "x1": xa - 1.0}))
    for shape in [(4,), (2, 3), (5,), (3, 2), (2, 2, 2)]:
        g = ad.Graph()
        gy, gx = g.input("x0", shape), g.input("x1", shape)
        g.output("f", scalarize(g, ad.orient180(gy, gx), rng))
        cases.append(
            (f"orient{shape}", g, {"x0": rng.uniform(0.3, 1.0, shape), "x1": rng.uniform(0.3, 1.0, shape)})
        )
    for axis in [None, 0, 1, (0, 1), -1]:
        make(f"sum_ax{axis}", lambda g, a, ax=axis: a.sum(axis=ax), [(3, 4, 2)])
        make(f"mean_ax{axis}", lambda g, a, ax=axis: a.mean(axis=ax), [(3, 4, 2)])
    for key in [np.s_[1:], np.s_[:, ::2], np.s_[..., 1], np.s_[0:2, 1:3], np.s_[::-1]]:
        make(f"slice{key}", lambda g, a, k=key: a[k], [(4, 4)])
    for axis in [0, 1, -1, 0, 1]:
        make(f"concat_ax{axis}", lambda g, a, b, ax=axis: ad.concat([a, b], ax), [(2, 3), (2, 3)])
    for out_hw in [(4, 4), (7, 5), (2, 8), (6, 6), (3, 3)]:
        make(f"resize{out_hw}", lambda g, a, o=out_hw: ad.bilinear_resize(a, o), [(2, 5, 5)])
    for shape, new in [((2, 6), (3, 4)), ((4,), (2, 2)), ((2, 3), (6,)), ((1, 8), (2, 2, 2)), ((3, 4), (4, 3))]:
        make(f"reshape{shape}->{new}", lambda g, a, n=new: a.reshape(n), [shape])
    for axes in [(1, 0), (2, 0, 1), (0, 2, 1), (1, 0), (2, 1, 0)]:
        shape = (2, 3) if len(axes) == 2 else (2, 3, 4)
        make(f"transpose{axes}", lambda g, a, ax=axes: a.transpose(ax), [shape])
    return cases


def test_every_primitive_matches_finite_differences(rng):
    failures = []
    for name, g, inputs in _fd_graph_cases(rng):
        report = ad.grad_check(g, inputs, tolerance=1e-5)
        if not report.passed:
            failures.append((name, {k: e.max_rel_err for k, e in report.entries.items()}))
    assert not failures, f"gradient mismatches: {failures}"


def test_full_combined_loss_gradient_at_coarse_fd_step(rng):
    # the complete training loss on a (1, 2, 1, 8, 8) latent, checked at the
    # coarse 1e-3 central-difference step; inputs verified clear of every
    # vote and clipping kink so the comparison is meaningful
    from conftest import assert_kink_safe, clip_margin, oriented_field

    from hfrec.hog import HogConfig
    from hfrec.hr_loss import hr_loss_nodes
    from hfrec.wavelet import SubbandWeights

    shape = (1, 2, 1, 8, 8)
    gen = np.random.default_rng(22)
    v = np.stack([oriented_field(gen, 8, 8, 45.0), oriented_field(gen, 8, 8, 117.0)]).reshape(shape)
    t = np.stack([oriented_field(gen, 8, 8, 58.0), oriented_field(gen, 8, 8, 104.0)]).reshape(shape)
    for arr in (v, t):
        for c in range(2):
            assert_kink_safe(arr[0, c, 0])
            assert clip_margin(arr[0, c, 0]) > 0.01
    g = ad.Graph()
    vs = g.input("v", shape)
    ts = g.input("target", shape)
    g.output("l_total", hr_loss_nodes(vs, ts, SubbandWeights(), HogConfig())["l_total"])
    report = ad.grad_check(g, {"v": v, "target": t}, tolerance=1e-5, seed_output="l_total", step=1e-3)
    assert report.passed, str(report)


def test_forward_bit_identical_across_runs(rng):
    g = ad.Graph()
    x = g.input("x", (8, 8))
    y = ad.tanh(ad.conv2d(x * x + x, np.ones((2, 2)) / 2, 2)).mean()
    g.output("f", y)
    xv = rng.normal(size=(8, 8)).astype(np.float32)
    a = g.forward({"x": xv})["f"]
    b = g.forward({"x": xv})["f"]
    assert a.tobytes() == b.tobytes()


def test_backward_linearity_exact(rng):
    # combination weights are powers of two so fp scaling is exact
    a_w, b_w = 2.0, 0.5
    xv = rng.normal(size=(4, 4))

    def build(combine):
        g = ad.Graph()
        x = g.input("x", (4, 4))
        f = ad.square(x).mean()
        h = ad.tanh(x).sum()
        g.output("f", combine(f, h))
        return g

    g_f = build(lambda f, h: f)
    g_h = build(lambda f, h: h)
    g_mix = build(lambda f, h: f * a_w + h * b_w)
    gf = g_f.backward("f", {"x": xv}, dtype=np.float64)["x"]
    gh = g_h.backward("f", {"x": xv}, dtype=np.float64)["x"]
    gmix = g_mix.backward("f", {"x": xv}, dtype=np.float64)["x"]
    assert np.array_equal(gmix, a_w * gf + b_w * gh)


def test_shape_mismatch_rejected_with_node_id():
    g = ad.Graph()
    a = g.input("a", (2, 3))
    b = g.input("b", (4, 2))
    with pytest.raises(ad.GraphError, match="node") as exc:
        _ = a @ b
    assert exc.value.node is not None


def test_bound_input_shape_mismatch_names_node():
    g = ad.Graph()
    a = g.input("a", (2, 2))
    g.output("y", a + a)
    with pytest.raises(ad.GraphError, match="declared"):
        g.forward({"a": np.zeros((3, 3), np.float32)})


def test_non_finite_input_rejected():
    g = ad.Graph()
    a = g.input("a", (2,))
    g.output("y", a * 2.0)
    with pytest.raises(ad.GraphError, match="non-finite"):
        g.forward({"a": np.array([1.0, np.nan], np.float32)})


def test_non_scalar_seed_rejected(rng):
    g = ad.Graph()
    a = g.input("a", (2,))
    g.output("y", a + a)
    with pytest.raises(ad.GraphError, match="not scalar"):
        g.backward("y", {"a": rng.normal(size=2).astype(np.float32)})


def test_graph_frozen_after_first_run(rng):
    g = ad.Graph()
    a = g.input("a", (2,))
    g.output("y", a.sum())
    g.forward({"a": rng.normal(size=2).astype(np.float32)})
    with pytest.raises(ad.GraphError, match="frozen"):
        g.input("b", (2,))


def test_unbound_input_rejected():
    g = ad.Graph()
    a = g.input("a", (2,))
    b = g.input("b", (2,))
    g.output("y", (a + b).sum())
    with pytest.raises(ad.GraphError, match="unbound"):
        g.forward({"a": np.zeros(2, np.float32)})


def test_float64_mode_inferred_from_inputs(rng):
    g = ad.Graph()
    a = g.input("a", (3,))
    g.output("y", ad.square(a).mean())
    out32 = g.forward({"a": rng.normal(size=3).astype(np.float32)})["y"]
    out64 = g.forward({"a": rng.normal(size=3)})["y"]
    assert out32.dtype == np.float32
    assert out64.dtype == np.float64


def test_wrt_restricts_and_prunes(rng):
    g = ad.Graph()
    a = g.input("a", (3,))
    b = g.input("b", (3,))
    g.output("f", (ad.square(a) + ad.square(b)).sum())
    av, bv = rng.normal(size=3), rng.normal(size=3)
    full = g.backward("f", {"a": av, "b": bv}, dtype=np.float64)
    part = g.backward("f", {"a": av, "b": bv}, dtype=np.float64, wrt=["a"])
    assert set(part) == {"a"}
    assert np.array_equal(part["a"], full["a"])
