"""Pixel-wise coded shutters and the coded-exposure measurement operator.

Each pixel is exposed during exactly one contiguous run ("bump") of
``bump_length`` frames. The coded image is the per-pixel sum of the scene
over the exposed frames.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_image, check_scalar, check_video
from .exceptions import ParamError


@dataclass(frozen=True)
class Shutter:
    """Binary exposure mask of shape (height, width, frames)."""

    mask: np.ndarray
    bump_length: int
    seed: int | None = None
    starts: np.ndarray | None = field(default=None, repr=False)

    @property
    def shape(self):
        return self.mask.shape

    @property
    def n_frames(self) -> int:
        return self.mask.shape[2]

    @classmethod
    def from_mask(cls, mask, seed=None) -> "Shutter":
        """Wrap an existing mask, checking the single-bump structure."""
        m = np.asarray(mask)
        if m.ndim != 3:
            raise ParamError(f"shutter mask must be 3-D, got shape {m.shape}")
        m = (m != 0).astype(np.uint8)
        sums = m.sum(axis=2)
        L = int(sums.flat[0])
        if L < 1 or np.any(sums != L):
            raise ParamError("every pixel must be exposed for the same number of frames")
        starts = np.argmax(m, axis=2)
        t = np.arange(m.shape[2])
        expect = (t >= starts[..., None]) & (t < starts[..., None] + L)
        if not np.array_equal(expect, m.astype(bool)):
            raise ParamError("each pixel must be exposed in one contiguous run")
        return cls(mask=m, bump_length=L, seed=seed, starts=starts)


def generate_shutter(height: int, width: int, n_frames: int, bump_length: int = 3, seed=None) -> Shutter:
    """Draw one bump start per pixel uniformly from ``{0, ..., T - L}``.

    Starts come from ``numpy.random.default_rng(seed)`` in C order over
    (row, column), so a given seed reproduces the same shutter.
    """
    for name, v in (("height", height), ("width", width), ("n_frames", n_frames), ("bump_length", bump_length)):
        check_scalar(v, name, min_val=1, kind=int)
    if bump_length > n_frames:
        raise ParamError(f"bump_length {bump_length} exceeds n_frames {n_frames}")
    rng = np.random.default_rng(seed)
    starts = rng.integers(0, n_frames - bump_length + 1, size=(height, width))
    t = np.arange(n_frames)
    mask = ((t >= starts[..., None]) & (t < starts[..., None] + bump_length)).astype(np.uint8)
    return Shutter(mask=mask, bump_length=bump_length, seed=seed, starts=starts)


def _mask(shutter) -> np.ndarray:
    return shutter.mask if isinstance(shutter, Shutter) else np.asarray(shutter)


def apply_measurement(volume, shutter) -> np.ndarray:
    """Forward operator: sum over time of mask * volume."""
    mask = _mask(shutter)
    v = check_video(volume, "volume")
    if v.shape != mask.shape:
        raise ParamError(f"volume shape {v.shape} does not match shutter {mask.shape}")
    return np.einsum("ijt,ijt->ij", mask.astype(v.dtype), v)


def apply_measurement_adjoint(image, shutter) -> np.ndarray:
    mask = _mask(shutter)
    img = check_image(image)
    if img.shape != mask.shape[:2]:
        raise ParamError(f"image shape {img.shape} does not match shutter {mask.shape[:2]}")
    return mask * img[..., None]


def code_exposure(frames, shutter) -> np.ndarray:
    """Form the coded image of a frame sequence (raw sum, range [0, L])."""
    return apply_measurement(frames, shutter)


def sampling_stats(shutter) -> tuple[np.ndarray, float]:
    """Fraction of active pixels per frame, and overall (= L / T)."""
    mask = _mask(shutter)
    h, w, T = mask.shape
    per_frame = mask.reshape(h * w, T).sum(axis=0) / float(h * w)
    overall = float(mask.sum()) / float(mask.size)
    return per_frame, overall


def expected_frame_ratios(n_frames: int, bump_length: int) -> np.ndarray:
    """Expected active fraction of each frame under uniform bump starts.

    Frame ``t`` is covered by the starts ``max(0, t-L+1) .. min(t, T-L)``.
    """
    n_starts = n_frames - bump_length + 1
    t = np.arange(n_frames)
    lo = np.maximum(0, t - bump_length + 1)
    hi = np.minimum(t, n_frames - bump_length)
    return (hi - lo + 1) / n_starts
