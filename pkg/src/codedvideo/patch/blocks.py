"""Space-time blocks: extraction, merging and training-set selection."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .._validation import check_random_state, check_scalar, check_video
from ..exceptions import ParamError, SelectionError


@dataclass
class PatchConfig:
    """Block geometry and solver settings of the patch-based pipeline.

    ``n_atoms=None`` means twice the block length.
    """

    patch_x: int = 7
    patch_y: int = 7
    patch_t: int = 20
    stride: int = 2
    n_atoms: int | None = None
    train_sparsity: int = 10
    ksvd_iters: int = 30
    lasso_lambda: float = 0.1
    remove_mean: bool = False

    @property
    def block_length(self) -> int:
        return self.patch_x * self.patch_y * self.patch_t

    @property
    def atoms(self) -> int:
        return self.n_atoms if self.n_atoms is not None else 2 * self.block_length

    @property
    def patch_shape(self) -> tuple:
        return (self.patch_y, self.patch_x, self.patch_t)

    def validate(self) -> "PatchConfig":
        for name in ("patch_x", "patch_y", "patch_t", "stride", "train_sparsity", "ksvd_iters"):
            check_scalar(getattr(self, name), name, min_val=1, kind=int)
        check_scalar(self.lasso_lambda, "lasso_lambda", min_val=0.0)
        if self.atoms <= self.block_length:
            raise ParamError(
                f"dictionary must be overcomplete: {self.atoms} atoms for blocks of length {self.block_length}"
            )
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_atoms"] = self.atoms
        return d


def block_positions(n: int, p: int, stride: int) -> list:
    """Start offsets along one axis; the last block always touches the border."""
    if p > n:
        raise ParamError(f"block size {p} exceeds extent {n}")
    pos = list(range(0, n - p + 1, stride))
    if pos[-1] != n - p:
        pos.append(n - p)
    return pos


def vectorize_block(block) -> np.ndarray:
    """(py, px, pt) block to a vector with x fastest, then y, then t."""
    return np.transpose(block, (2, 0, 1)).ravel()


def unvectorize_block(vec, patch_shape) -> np.ndarray:
    py, px, pt = patch_shape
    return np.transpose(np.asarray(vec).reshape(pt, py, px), (1, 2, 0))


def extract_blocks(video, patch_shape, stride: int = 1, temporal_stride: int | None = None):
    """All blocks of ``patch_shape`` = (py, px, pt) at the given spatial stride.

    Returns ``(blocks, positions)``: an (N, py*px*pt) array and an (N, 3)
    array of (row, col, frame) offsets, ordered frame-major then row, col.
    """
    v = check_video(video)
    py, px, pt = patch_shape
    H, W, T = v.shape
    if py > H or px > W or pt > T:
        raise ParamError(f"video {v.shape} smaller than block {patch_shape}")
    rows = block_positions(H, py, stride)
    cols = block_positions(W, px, stride)
    frames = block_positions(T, pt, temporal_stride or pt)
    win = sliding_window_view(v, (py, px, pt))  # (H-py+1, W-px+1, T-pt+1, py, px, pt)
    sel = win[np.ix_(rows, cols, frames)]  # (nr, nc, nt, py, px, pt)
    sel = np.transpose(sel, (2, 0, 1, 5, 3, 4))  # (nt, nr, nc, pt, py, px)
    blocks = sel.reshape(len(frames) * len(rows) * len(cols), pt * py * px)
    fr, rr, cc = np.meshgrid(frames, rows, cols, indexing="ij")
    positions = np.stack([rr.ravel(), cc.ravel(), fr.ravel()], axis=1)
    return np.ascontiguousarray(blocks), positions


def merge_blocks(blocks, positions, shape, patch_shape, return_weights=False):
    """Average overlapping block estimates into a (H, W, T) volume."""
    py, px, pt = patch_shape
    acc = np.zeros(shape)
    cnt = np.zeros(shape)
    for vec, (r, c, f) in zip(blocks, positions):
        acc[r : r + py, c : c + px, f : f + pt] += unvectorize_block(vec, patch_shape)
        cnt[r : r + py, c : c + px, f : f + pt] += 1.0
    if np.any(cnt == 0):
        raise ParamError("blocks do not cover the whole volume")
    out = acc / cnt
    return (out, 1.0 / cnt) if return_weights else out


# --------------------------------------------------------------------------
# training-set selection
# --------------------------------------------------------------------------

STRATEGIES = ("random", "variance-bins", "stratified-gamma", "gamma")


@dataclass
class BlockSelectionConfig:
    strategy: str = "variance-bins"
    count: int = 2000
    gamma: float = 0.7
    n_strata: int = 10
    seed: int | None = 0

    def validate(self) -> "BlockSelectionConfig":
        if self.strategy not in STRATEGIES:
            raise ParamError(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")
        check_scalar(self.count, "count", min_val=1, kind=int)
        check_scalar(self.gamma, "gamma", min_val=0.0, max_val=1.0, include_min=False)
        check_scalar(self.n_strata, "n_strata", min_val=1, kind=int)
        return self


def _variance_order(blocks, rng):
    """Indices sorted by increasing block variance, ties broken at random."""
    var = np.var(blocks, axis=1)
    perm = rng.permutation(len(var))
    return perm[np.argsort(var[perm], kind="stable")]


def _select_variance_bins(order, count, rng):
    N = len(order)
    bins = np.array_split(order, [N // 3, (2 * N) // 3])  # low, medium, high
    share = [count // 3] * 3
    for i in range(count % 3):
        share[2 - i] += 1  # remainder goes to the high, then medium bin
    for b, s in zip(bins, share):
        if s > len(b):
            raise SelectionError(f"variance bin holds {len(b)} blocks, {s} requested")
    return np.concatenate([rng.choice(b, size=s, replace=False) for b, s in zip(bins, share)])


def _select_gamma(order, count, gamma, rng):
    N = len(order)
    taken = np.zeros(N, dtype=bool)
    picked = []
    while len(picked) < count:
        j = min(int(np.floor(N * rng.random() ** gamma + 0.5)), N - 1)
        if taken[j]:
            for _ in range(100):
                j = min(int(np.floor(N * rng.random() ** gamma + 0.5)), N - 1)
                if not taken[j]:
                    break
            else:
                free = np.flatnonzero(~taken)
                j = int(free[np.argmin(np.abs(free - j))])
        taken[j] = True
        picked.append(order[j])
    return np.asarray(picked)


def _select_stratified_gamma(order, count, gamma, n_strata, rng):
    N = len(order)
    edges = np.floor(N * (np.arange(n_strata + 1) / n_strata) ** gamma + 0.5).astype(int)
    edges[-1] = N
    strata = [list(rng.permutation(order[a:b])) for a, b in zip(edges[:-1], edges[1:]) if b > a]
    picked = []
    while len(picked) < count:
        for i in rng.permutation(len(strata)):
            if strata[i] and len(picked) < count:
                picked.append(strata[i].pop())
    return np.asarray(picked)


def select_training_blocks(blocks, cfg: BlockSelectionConfig | None = None) -> np.ndarray:
    """Indices of the training blocks chosen by ``cfg.strategy`` (no duplicates)."""
    cfg = (cfg or BlockSelectionConfig()).validate()
    blocks = np.asarray(blocks, dtype=np.float64)
    N = len(blocks)
    if cfg.count > N:
        raise SelectionError(f"requested {cfg.count} blocks but only {N} are available")
    rng = check_random_state(cfg.seed)
    if cfg.strategy == "random":
        return rng.choice(N, size=cfg.count, replace=False)
    order = _variance_order(blocks, rng)
    if cfg.strategy == "variance-bins":
        return _select_variance_bins(order, cfg.count, rng)
    if cfg.strategy == "gamma":
        return _select_gamma(order, cfg.count, cfg.gamma, rng)
    return _select_stratified_gamma(order, cfg.count, cfg.gamma, cfg.n_strata, rng)
