import math

import numpy as np
import pytest

from hfrec.metrics import (
    MetricRecord,
    estimate_flow_block_matching,
    psnr,
    ssim,
    temporal_profile,
    warping_error,
)
from hfrec.synth import ClipParams, generate_clip
from hfrec.video import VideoClip


def rand_clip(rng, t=3, h=16, w=16, c=3):
    return VideoClip(rng.uniform(size=(t, h, w, c)).astype(np.float32))


def test_psnr_identical_is_infinite(rng):
    a = rand_clip(rng)
    assert math.isinf(psnr(a, a))


def test_psnr_known_mse():
    a = VideoClip(np.full((2, 8, 8, 3), 0.3, np.float32))
    b = VideoClip(np.full((2, 8, 8, 3), 0.4, np.float32))
    # uniform difference of 0.1 -> MSE 0.01 -> 20 dB
    assert psnr(a, b) == pytest.approx(20.0, abs=1e-4)


def test_psnr_matches_scalar_oracle(rng):
    a, b = rand_clip(rng), rand_clip(rng)
    got = psnr(a, b)
    vals = []
    for t in range(a.t):
        acc = 0.0
        n = 0
        for idx in np.ndindex(a.frames[t].shape):
            d = float(a.frames[t][idx]) - float(b.frames[t][idx])
            acc += d * d
            n += 1
        vals.append(10.0 * math.log10(1.0 / (acc / n)))
    assert got == pytest.approx(sum(vals) / len(vals), abs=1e-6)


def test_psnr_decreases_with_mse():
    base = VideoClip(np.full((1, 8, 8, 3), 0.5, np.float32))
    vals = [psnr(base, VideoClip(np.full((1, 8, 8, 3), 0.5 + d, np.float32))) for d in (0.05, 0.1, 0.2)]
    assert vals[0] > vals[1] > vals[2]


def test_psnr_symmetric(rng):
    a, b = rand_clip(rng), rand_clip(rng)
    assert psnr(a, b) == pytest.approx(psnr(b, a), rel=1e-12)


def test_psnr_shape_mismatch(rng):
    with pytest.raises(ValueError, match="mismatch"):
        psnr(rand_clip(rng), rand_clip(rng, h=8))


def test_ssim_identical_is_one(rng):
    a = rand_clip(rng)
    assert ssim(a, a) == pytest.approx(1.0, abs=1e-12)


def test_ssim_inverted_clip_below_one_and_matches_oracle(rng):
    a = rand_clip(rng, t=1, h=16, w=16, c=1)
    b = VideoClip(1.0 - a.frames)
    got = ssim(a, b)
    assert got < 1.0

    # scalar oracle on the single frame
    fa = a.frames[0, :, :, 0].astype(np.float64)
    fb = b.frames[0, :, :, 0].astype(np.float64)
    x = np.arange(11, dtype=np.float64) - 5
    g = np.exp(-0.5 * (x / 1.5) ** 2)
    win = np.outer(g, g)
    win /= win.sum()
    h, w = fa.shape
    vals = []
    for i in range(5, h - 5):
        for j in range(5, w - 5):
            pa = fa[i - 5 : i + 6, j - 5 : j + 6]
            pb = fb[i - 5 : i + 6, j - 5 : j + 6]
            mu_a = float((pa * win).sum())
            mu_b = float((pb * win).sum())
            va = float((pa * pa * win).sum()) - mu_a**2
            vb = float((pb * pb * win).sum()) - mu_b**2
            cov = float((pa * pb * win).sum()) - mu_a * mu_b
            c1, c2 = 0.01**2, 0.03**2
            vals.append(
                ((2 * mu_a * mu_b + c1) * (2 * cov + c2))
                / ((mu_a**2 + mu_b**2 + c1) * (va + vb + c2))
            )
    assert got == pytest.approx(float(np.mean(vals)), abs=1e-10)


def test_ssim_equal_constants_is_one():
    a = VideoClip(np.full((1, 16, 16, 3), 0.25, np.float32))
    b = VideoClip(np.full((1, 16, 16, 3), 0.25, np.float32))
    assert ssim(a, b) == pytest.approx(1.0, abs=1e-9)


def test_ssim_symmetric(rng):
    a, b = rand_clip(rng), rand_clip(rng)
    assert ssim(a, b) == pytest.approx(ssim(b, a), rel=1e-12)


def test_ssim_window_too_large(rng):
    with pytest.raises(ValueError, match="window"):
        ssim(rand_clip(rng, h=8, w=8), rand_clip(rng, h=8, w=8))


def test_warping_error_static_zero_flow():
    clip, flows = generate_clip("static", ClipParams(size=(32, 32), length=4), seed=1)
    assert warping_error(clip, flows) == 0.0


def test_warping_error_ground_truth_flow_tiny():
    p = ClipParams(size=(64, 64), length=6, velocity=(0.6, -0.3), max_wavenumber=1)
    clip, flows = generate_clip("translating_sinusoid", p, seed=2)
    assert warping_error(clip, flows) < 1e-3


def test_zero_flow_worse_than_true_flow():
    p = ClipParams(size=(64, 64), length=6, velocity=(1.0, 0.0))
    clip, flows = generate_clip("translating_sinusoid", p, seed=2)
    good = warping_error(clip, flows)
    bad = warping_error(clip, np.zeros_like(flows))
    assert bad > good


def test_warping_error_length_mismatch():
    clip, flows = generate_clip("static", ClipParams(size=(32, 32), length=4), seed=1)
    with pytest.raises(ValueError, match="flow"):
        warping_error(clip, flows[:-1])


def test_temporal_profile_static_rows_identical():
    clip, _ = generate_clip("static", ClipParams(size=(32, 32), length=5), seed=3)
    prof = temporal_profile(clip, 7)
    assert prof.shape == (5, 32, 3)
    for t in range(1, 5):
        assert np.array_equal(prof[t], prof[0])


def test_temporal_profile_is_sheared_first_row():
    p = ClipParams(size=(32, 32), length=6, velocity=(1.0, 0.0))
    clip, _ = generate_clip("translating_sinusoid", p, seed=4)
    prof = temporal_profile(clip, 10)
    for t in range(6):
        # resampling oracle: periodic shift of the first profile row
        assert np.abs(np.roll(prof[0], t, axis=0) - prof[t]).max() < 1e-6


def test_temporal_profile_single_frame():
    clip = VideoClip(np.random.default_rng(0).uniform(size=(1, 8, 8, 3)).astype(np.float32))
    prof = temporal_profile(clip, 3)
    assert np.array_equal(prof[0], clip.frames[0, 3])


def test_temporal_profile_row_out_of_range():
    clip = VideoClip(np.zeros((2, 8, 8, 3), np.float32))
    with pytest.raises(ValueError, match="row"):
        temporal_profile(clip, 8)


def test_block_matching_recovers_integer_translation():
    p = ClipParams(size=(32, 32), length=3, velocity=(2.0, 0.0), max_wavenumber=4)
    clip, flows = generate_clip("translating_noise_texture", p, seed=6)
    est = estimate_flow_block_matching(clip, max_disp=3, block=8)
    # interior blocks should find the exact displacement
    inner = est[:, 8:24, 8:24, :]
    assert np.median(inner[..., 0]) == pytest.approx(2.0)
    assert np.median(inner[..., 1]) == pytest.approx(0.0)


def test_metric_record_csv_row():
    rec = MetricRecord(clip_id="clip_0001", method="model", psnr=20.0, ssim=0.5, e_warp=1.25)
    assert rec.csv_row() == "clip_0001,model,20.0,0.5,1.25"
    rec_inf = MetricRecord(clip_id="c", method="m", psnr=math.inf, ssim=1.0, e_warp=0.0)
    assert rec_inf.csv_row().split(",")[2] == "inf"
