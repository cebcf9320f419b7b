import numpy as np
import pytest

from hfrec.tensorio import (
    load_checkpoint,
    load_tensor,
    read_ppm,
    save_checkpoint,
    save_tensor,
    tensor_bytes,
    tensor_from_bytes,
    write_ppm,
)


@pytest.mark.parametrize(
    "shape,dtype",
    [((3, 4), np.float32), ((2, 3, 4, 5), np.float32), ((7,), np.float64), ((), np.float32), ((1, 1, 6), np.float64)],
)
def test_tensor_roundtrip(tmp_path, rng, shape, dtype):
    arr = rng.normal(size=shape).astype(dtype)
    path = tmp_path / "t.hfrt"
    save_tensor(path, arr)
    back = load_tensor(path)
    assert back.shape == arr.shape
    assert back.dtype == arr.dtype
    assert np.array_equal(back, arr)


def test_header_layout(rng):
    arr = np.arange(6, dtype=np.float32).reshape(2, 3)
    buf = tensor_bytes(arr)
    assert buf[:4] == b"HFRT"
    assert buf[4] == 1  # version
    assert buf[5] == 2  # rank
    assert int.from_bytes(buf[6:10], "little") == 2
    assert int.from_bytes(buf[10:14], "little") == 3
    assert buf[14] == 0  # f32 tag
    assert np.frombuffer(buf[15:], dtype="<f4").tolist() == arr.ravel().tolist()


def test_f64_tag(rng):
    buf = tensor_bytes(np.zeros(2, np.float64))
    assert buf[4 + 1 + 1 + 4] == 1


def test_bad_magic_rejected():
    with pytest.raises(ValueError, match="magic"):
        tensor_from_bytes(b"NOPE" + bytes(16))


def test_integer_dtype_rejected():
    with pytest.raises(ValueError, match="dtype"):
        tensor_bytes(np.zeros(3, np.int32))


def test_checkpoint_roundtrip(tmp_path, rng):
    tensors = {
        "block.w": rng.normal(size=(4, 4)).astype(np.float32),
        "block.b": rng.normal(size=4).astype(np.float32),
        "gamma": np.ones((), np.float32),
    }
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, tensors)
    back = load_checkpoint(path)
    assert list(back) == list(tensors)
    for k in tensors:
        assert back[k].shape == tensors[k].shape
        assert np.array_equal(back[k], tensors[k])


def test_ppm_roundtrip(tmp_path, rng):
    img = rng.uniform(size=(5, 7, 3)).astype(np.float32)
    path = tmp_path / "x.ppm"
    write_ppm(path, img)
    back = read_ppm(path)
    assert back.shape == (5, 7, 3)
    # 8-bit quantization bound
    assert np.abs(back - img).max() <= 0.5 / 255 + 1e-7


def test_ppm_deterministic_bytes(tmp_path, rng):
    img = rng.uniform(size=(4, 4, 3)).astype(np.float32)
    p1, p2 = tmp_path / "a.ppm", tmp_path / "b.ppm"
    write_ppm(p1, img)
    write_ppm(p2, img)
    assert p1.read_bytes() == p2.read_bytes()


def test_ppm_needs_three_channels(tmp_path):
    with pytest.raises(ValueError, match="H, W, 3"):
        write_ppm(tmp_path / "x.ppm", np.zeros((4, 4), np.float32))
