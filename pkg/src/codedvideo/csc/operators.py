"""Linear operators of the convolutional video model.

Public functions use the documented layouts: frames ``(H, W, T)`` and
feature maps ``(K, H, W, T)``. The solver keeps time ahead of space,
``(K, T, H, W)``, so that 2-D FFTs run over contiguous trailing axes; the
underscore helpers work in that layout.
"""

from __future__ import annotations

import numpy as np
import scipy.fft as sfft

from .._validation import check_array
from ..exceptions import ParamError


def check_filters(filters) -> np.ndarray:
    d = check_array(filters, 3, "filters")
    K, s1, s2 = d.shape
    if s1 != s2 or s1 % 2 == 0:
        raise ParamError(f"filters must be odd square kernels, got {s1}x{s2}")
    return d


def filter_spectra(filters, shape, dtype=np.float64) -> np.ndarray:
    """rFFT of each filter zero-padded to ``shape`` with its centre at the origin."""
    d = check_filters(filters)
    K, s, _ = d.shape
    H, W = shape
    if s > H or s > W:
        raise ParamError(f"filter size {s} exceeds image size {shape}")
    padded = np.zeros((K, H, W), dtype=dtype)
    padded[:, :s, :s] = d
    padded = np.roll(padded, (-(s // 2), -(s // 2)), axis=(1, 2))
    return sfft.rfft2(padded, axes=(1, 2))


def _synth_tf(dhat, u_tf, shape) -> np.ndarray:
    """sum_k d_k * u_k per frame, maps in (K, T, H, W) -> frames (T, H, W)."""
    uhat = sfft.rfft2(u_tf, axes=(2, 3))
    xhat = np.einsum("khw,kthw->thw", dhat, uhat)
    return sfft.irfft2(xhat, s=shape, axes=(1, 2))


def _synth_adjoint_tf(dhat, x_tf, shape) -> np.ndarray:
    """Adjoint of ``_synth_tf``: frames (T, H, W) -> maps (K, T, H, W)."""
    xhat = sfft.rfft2(x_tf, axes=(1, 2))
    uhat = np.conj(dhat)[:, None] * xhat[None]
    return sfft.irfft2(uhat, s=shape, axes=(2, 3))


def _tdiff_tf(u_tf) -> np.ndarray:
    return u_tf[:, 1:] - u_tf[:, :-1]


def _tdiff_adjoint_tf(g_tf, T) -> np.ndarray:
    K = g_tf.shape[0]
    out = np.zeros((K, T) + g_tf.shape[2:], dtype=g_tf.dtype)
    if T >= 2:
        out[:, 1:] += g_tf
        out[:, :-1] -= g_tf
    return out


def _check_maps(maps) -> np.ndarray:
    return check_array(maps, 4, "feature maps")


def synthesize(filters, maps) -> np.ndarray:
    """Frames ``x_t = sum_k d_k (*) z_k^t`` with circular 2-D convolution.

    Parameters
    ----------
    filters : array (K, s, s)
    maps : array (K, H, W, T)

    Returns
    -------
    array (H, W, T), not clamped.
    """
    d = check_filters(filters)
    z = _check_maps(maps)
    if z.shape[0] != d.shape[0]:
        raise ParamError(f"{d.shape[0]} filters but {z.shape[0]} feature maps")
    K, H, W, T = z.shape
    dhat = filter_spectra(d, (H, W))
    x_tf = _synth_tf(dhat, np.moveaxis(z, 3, 1), (H, W))
    return np.moveaxis(x_tf, 0, 2)


def synthesize_adjoint(filters, frames) -> np.ndarray:
    """Adjoint of :func:`synthesize`: (H, W, T) frames to (K, H, W, T) maps."""
    d = check_filters(filters)
    x = check_array(frames, 3, "frames")
    H, W, T = x.shape
    dhat = filter_spectra(d, (H, W))
    u_tf = _synth_adjoint_tf(dhat, np.moveaxis(x, 2, 0), (H, W))
    return np.moveaxis(u_tf, 1, 3)


def temporal_diff(maps) -> np.ndarray:
    """Backward differences ``z^t - z^{t-1}`` along the last axis; (K, H, W, T-1)."""
    z = _check_maps(maps)
    return z[..., 1:] - z[..., :-1]


def temporal_diff_adjoint(diffs, n_frames: int) -> np.ndarray:
    g = check_array(diffs, 4, "differences", allow_empty=True)
    if g.shape[-1] != max(n_frames - 1, 0):
        raise ParamError(f"expected {n_frames - 1} differences, got {g.shape[-1]}")
    out = np.zeros(g.shape[:3] + (n_frames,), dtype=g.dtype)
    if n_frames >= 2:
        out[..., 1:] += g
        out[..., :-1] -= g
    return out


def temporal_laplacian_eigenvalues(n_frames: int) -> np.ndarray:
    """Eigenvalues of D_t^T D_t for non-circular backward differences.

    The eigenvectors are the orthonormal DCT-II basis.
    """
    j = np.arange(n_frames)
    return 4.0 * np.sin(np.pi * j / (2.0 * n_frames)) ** 2
