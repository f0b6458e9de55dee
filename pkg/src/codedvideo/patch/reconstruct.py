"""Per-block lasso reconstruction of a coded image with a patch dictionary."""

from __future__ import annotations

import time
import warnings

import numpy as np
from sklearn.exceptions import ConvergenceWarning
from sklearn.linear_model import lars_path

from .._validation import check_array, check_image
from ..coded_exposure import Shutter
from ..exceptions import ParamError
from .blocks import PatchConfig, block_positions


def lasso_solve(A, b, lam: float) -> np.ndarray:
    """Minimize ``1/2 ||b - A x||^2 + lam ||x||_1`` by LARS-lasso (homotopy)."""
    A = check_array(A, 2, "A")
    b = check_array(b, 1, "b")
    if lam < 0:
        raise ParamError(f"lasso penalty must be >= 0, got {lam}")
    n = A.shape[0]
    if b.shape[0] != n:
        raise ParamError(f"A has {n} rows but b has {b.shape[0]} entries")
    if lam >= np.max(np.abs(A.T @ b)):
        return np.zeros(A.shape[1])
    # sklearn scales the quadratic term by 1/n
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        _, _, coef = lars_path(A, b, alpha_min=lam / n, method="lasso", return_path=False)
    return np.asarray(coef, dtype=np.float64)


def kkt_violation(A, b, x, lam) -> float:
    """Largest deviation from the lasso optimality conditions."""
    g = A.T @ (b - A @ x)
    nz = x != 0
    v_nz = np.abs(g[nz] - lam * np.sign(x[nz]))
    v_z = np.maximum(np.abs(g[~nz]) - lam, 0.0)
    return float(max(v_nz.max(initial=0.0), v_z.max(initial=0.0)))


def local_operator(dictionary, mask_block, patch_shape):
    """Effective dictionary ``Phi_blk Psi`` for one block; rows follow (y, x)."""
    py, px, pt = patch_shape
    psi = dictionary.reshape(pt, py, px, -1)
    return np.einsum("yxt,tyxq->yxq", mask_block, psi).reshape(py * px, -1)


def reconstruct_patch(coded, shutter, dictionary, cfg: PatchConfig | None = None, solve=None, return_info=False):
    """Reconstruct an (H, W, T) video block by block and average the overlaps.

    ``solve(A, b, lam)`` defaults to :func:`lasso_solve`.
    """
    cfg = (cfg or PatchConfig()).validate()
    if not isinstance(shutter, Shutter):
        shutter = Shutter.from_mask(shutter)
    b = check_image(coded, "coded image")
    mask = shutter.mask.astype(np.float64)
    H, W, T = mask.shape
    if b.shape != (H, W):
        raise ParamError(f"coded image {b.shape} does not match shutter {(H, W)}")
    if cfg.patch_t != T:
        raise ParamError(f"patch_t ({cfg.patch_t}) must equal the number of coded frames ({T})")
    Psi = check_array(dictionary, 2, "dictionary")
    if Psi.shape[0] != cfg.block_length:
        raise ParamError(f"dictionary atoms have length {Psi.shape[0]}, blocks have {cfg.block_length}")
    solve = solve or lasso_solve
    py, px, pt = cfg.patch_shape
    L = shutter.bump_length
    t0 = time.perf_counter()

    acc = np.zeros((H, W, T))
    cnt = np.zeros((H, W))
    n_blocks = 0
    for r in block_positions(H, py, cfg.stride):
        for c in block_positions(W, px, cfg.stride):
            mblk = mask[r : r + py, c : c + px]
            A = local_operator(Psi, mblk, cfg.patch_shape)
            y = b[r : r + py, c : c + px].ravel()
            mean = 0.0
            if cfg.remove_mean:
                mean = y.mean() / L
                y = y - L * mean
            alpha = solve(A, y, cfg.lasso_lambda)
            xblk = (Psi @ alpha).reshape(pt, py, px).transpose(1, 2, 0) + mean
            acc[r : r + py, c : c + px] += xblk
            cnt[r : r + py, c : c + px] += 1.0
            n_blocks += 1
    video = acc / cnt[..., None]
    if return_info:
        return video, {"blocks": n_blocks, "seconds": time.perf_counter() - t0, "params": cfg.to_dict()}
    return video
