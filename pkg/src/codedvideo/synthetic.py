"""Synthetic test videos and small training corpora.

All videos are (H, W, T) arrays in [0, 1]; every generator is deterministic
given ``seed``.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter, map_coordinates, zoom


def _texture(shape, rng, sigma=1.5, contrast=0.25):
    tex = gaussian_filter(rng.standard_normal(shape), sigma, mode="wrap")
    tex /= tex.std() + 1e-12
    return contrast * tex


def moving_square(size=64, n_frames=20, seed=0, speed=1.0):
    """Textured square translating diagonally over a textured background."""
    rng = np.random.default_rng(seed)
    bg = 0.35 + _texture((size, size), rng, sigma=2.0, contrast=0.08)
    side = size // 3
    fg_tex = 0.75 + _texture((size, size), rng, sigma=1.0, contrast=0.12)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    video = np.empty((size, size, n_frames))
    y0 = size // 4
    x0 = size // 6
    for t in range(n_frames):
        oy = y0 + 0.5 * speed * t
        ox = x0 + speed * t
        # soft edges keep the motion sub-pixel accurate
        wy = np.clip(np.minimum(yy - oy + 0.5, oy + side - yy + 0.5), 0.0, 1.0)
        wx = np.clip(np.minimum(xx - ox + 0.5, ox + side - xx + 0.5), 0.0, 1.0)
        inside = wy * wx
        shifted = map_coordinates(fg_tex, [yy - oy, xx - ox], order=1, mode="grid-wrap")
        video[:, :, t] = (1 - inside) * bg + inside * shifted
    return np.clip(video, 0.0, 1.0)


def translating_gradient(size=64, n_frames=20, seed=0, speed=1.5, period=None):
    """Periodic ramp (sawtooth) pattern sliding horizontally, with a faint texture."""
    rng = np.random.default_rng(seed)
    period = period or size / 2.0
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    tilt = 0.15 * yy
    tex = _texture((size, size), rng, sigma=1.5, contrast=0.04)
    video = np.empty((size, size, n_frames))
    for t in range(n_frames):
        phase = ((xx + tilt - speed * t) % period) / period
        video[:, :, t] = 0.15 + 0.7 * phase + tex
    return np.clip(video, 0.0, 1.0)


def rotating_bar(size=64, n_frames=20, seed=0, angular_step=np.pi / 40):
    """Bright bar spinning about the frame centre over a textured background."""
    rng = np.random.default_rng(seed)
    bg = 0.3 + _texture((size, size), rng, sigma=1.5, contrast=0.08)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    cy = cx = (size - 1) / 2.0
    half_len = 0.4 * size
    half_width = max(size / 20.0, 1.5)
    theta0 = rng.uniform(0, np.pi)
    video = np.empty((size, size, n_frames))
    for t in range(n_frames):
        th = theta0 + angular_step * t
        along = (xx - cx) * np.cos(th) + (yy - cy) * np.sin(th)
        across = -(xx - cx) * np.sin(th) + (yy - cy) * np.cos(th)
        w = np.clip(half_width + 0.5 - np.abs(across), 0, 1) * np.clip(half_len + 0.5 - np.abs(along), 0, 1)
        video[:, :, t] = (1 - w) * bg + w * 0.9
    return np.clip(video, 0.0, 1.0)


MOTION_SUITE = {
    "moving_square": moving_square,
    "translating_gradient": translating_gradient,
    "rotating_bar": rotating_bar,
}


def motion_suite(size=64, n_frames=20, seed=0) -> dict:
    """The three synthetic motion videos used by the acceptance checks."""
    return {name: fn(size, n_frames, seed=seed) for name, fn in MOTION_SUITE.items()}


_GENERIC_IMAGES = ("camera", "astronaut", "coffee", "chelsea", "rocket", "coins", "moon", "brick", "grass", "gravel", "clock", "page")


def _to_gray(img):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3:
        img = img[..., :3] @ np.array([0.2126, 0.7152, 0.0722])
    return img / 255.0


def natural_images(n=10, size=128):
    """Generic natural photographs from scikit-image as grayscale ``size`` x ``size`` centre crops.

    Crops keep the native resolution, so the image structure has the same
    pixel scale as camera frames (downscaling whole photographs would pack
    several times more detail into every pixel).
    """
    from skimage import data

    if not 1 <= n <= len(_GENERIC_IMAGES):
        raise ValueError(f"n must be between 1 and {len(_GENERIC_IMAGES)}, got {n}")
    images = []
    for name in _GENERIC_IMAGES[:n]:
        img = _to_gray(getattr(data, name)())
        if min(img.shape) < size:
            img = zoom(img, size / min(img.shape), order=1)
        r0 = (img.shape[0] - size) // 2
        c0 = (img.shape[1] - size) // 2
        images.append(np.clip(img[r0 : r0 + size, c0 : c0 + size], 0, 1))
    return images


def video_frames(n=10, size=128, seed=1000):
    """Frames taken from synthetic videos unrelated (by seed) to the test suite."""
    frames = []
    gens = list(MOTION_SUITE.values())
    for i in range(n):
        vid = gens[i % len(gens)](size, 20, seed=seed + i)
        frames.append(vid[:, :, (7 * i) % 20])
    return frames
