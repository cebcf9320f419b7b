"""Shared test helpers.

The oriented-gradient loss is only piecewise smooth, so its gradient checks
need inputs whose orientations keep a margin from every vote kink and whose
gradient magnitudes stay away from zero. ``oriented_field`` builds such
inputs (a dominant ramp plus a small smooth wiggle) and ``orientation_margins``
measures the margins so tests can assert the preconditions they rely on.
"""

import numpy as np
import pytest

from hfrec.hog import spatial_gradients


def oriented_field(rng, h, w, angle_deg, wiggle=0.02, n_waves=2):
    """Ramp at the given orientation plus a low-amplitude smooth wiggle."""
    yy, xx = np.meshgrid(np.arange(h, dtype=float), np.arange(w, dtype=float), indexing="ij")
    th = np.deg2rad(angle_deg)
    f = np.cos(th) * xx + np.sin(th) * yy
    for _ in range(n_waves):
        fy, fx = rng.uniform(-0.5, 0.5, 2)
        f += wiggle * np.sin(fy * yy + fx * xx + rng.uniform(0, 2 * np.pi))
    return f


def orientation_margins(field: np.ndarray) -> tuple[float, float]:
    """(min gradient magnitude, min distance of the bin coordinate to a kink).

    Vote weights have kinks wherever the bin coordinate hits a half-integer
    (bin centers, vote cutoffs, and the wrap-around midpoint); distance is
    measured in bin units (1 unit = 20 degrees).
    """
    gx, gy = spatial_gradients(field)
    mag = np.sqrt(gx**2 + gy**2)
    theta = np.arctan2(gy, gx)
    theta = np.where(theta < 0, theta + np.pi, theta)
    c = theta * 9 / np.pi - 0.5
    kink_dist = np.abs(c * 2 - np.round(c * 2)) / 2
    return float(mag.min()), float(kink_dist.min())


def assert_kink_safe(field: np.ndarray, min_mag=0.25, min_margin=0.05):
    """Fail loudly if a gradient-check input violates the smoothness margins."""
    mag, margin = orientation_margins(field)
    assert mag >= min_mag, f"gradient magnitude {mag:.3f} too close to zero"
    assert margin >= min_margin, f"orientation within {margin * 20:.2f} degrees of a vote kink"


def clip_margin(field: np.ndarray, cell=4, block=2, bins=9, hys_clip=0.2) -> float:
    """Distance of the closest first-pass normalized block entry to the
    L2-Hys clipping threshold (another kink the gradient checks must avoid)."""
    gx, gy = spatial_gradients(field)
    mag = np.sqrt(gx**2 + gy**2 + 1e-12) - np.sqrt(1e-12)
    theta = np.arctan2(gy, gx)
    theta = np.where(theta < 0, theta + np.pi, theta)
    c = theta * bins / np.pi - 0.5
    h, w = field.shape
    nch, ncw = h // cell, w // cell
    cells = np.zeros((nch, ncw, bins))
    for i in range(nch * cell):
        for j in range(ncw * cell):
            for k in range(bins):
                d = abs(c[i, j] - k)
                d = min(d, bins - d)
                cells[i // cell, j // cell, k] += mag[i, j] * max(0.0, 1.0 - d)
    worst = np.inf
    for bi in range(nch - block + 1):
        for bj in range(ncw - block + 1):
            vec = cells[bi : bi + block, bj : bj + block]
            v1 = vec / np.sqrt(np.sum(vec**2) + 1e-12)
            worst = min(worst, float(np.abs(v1 - hys_clip).min()))
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
