"""Desk-scale video super-resolution training toolkit.

Rectified-flow training losses with wavelet and oriented-gradient
high-frequency terms, a toy condition-branch denoiser, a seeded two-order
degradation pipeline, synthetic clips with exact optical flow, and a
full-reference evaluation harness.
"""

from .diffusion import euler_sample, forward_diffuse, rec_loss, velocity_target
from .hog import HogConfig, hog_descriptor, hog_loss, spatial_gradients
from .hr_loss import LossReport, hr_loss
from .metrics import psnr, ssim, temporal_profile, warping_error
from .synth import ClipParams, generate_clip
from .video import VideoClip
from .wavelet import SubbandSet, SubbandWeights, haar_decompose, haar_reconstruct, wlf_loss

__all__ = [
    "ClipParams",
    "HogConfig",
    "LossReport",
    "SubbandSet",
    "SubbandWeights",
    "VideoClip",
    "euler_sample",
    "forward_diffuse",
    "generate_clip",
    "haar_decompose",
    "haar_reconstruct",
    "hog_descriptor",
    "hog_loss",
    "hr_loss",
    "psnr",
    "rec_loss",
    "spatial_gradients",
    "ssim",
    "temporal_profile",
    "velocity_target",
    "warping_error",
    "wlf_loss",
]

__version__ = "0.1.0"
