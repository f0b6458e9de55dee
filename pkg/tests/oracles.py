"""Independent reference implementations used only by the tests.

Everything here is written from the definitions with loops or dense
matrices, deliberately avoiding the package's transforms.
"""

from __future__ import annotations

import itertools

import numpy as np


def conv_circular(kernel, image):
    """``sum_ab kernel[a, b] * image[i - (a - c), j - (b - c)]`` with wrap-around."""
    s = kernel.shape[0]
    c = s // 2
    H, W = image.shape
    out = np.zeros((H, W))
    for i in range(H):
        for j in range(W):
            acc = 0.0
            for a in range(s):
                for b in range(s):
                    acc += kernel[a, b] * image[(i - (a - c)) % H, (j - (b - c)) % W]
            out[i, j] = acc
    return out


def synth_loops(filters, maps):
    """Frames from (K, s, s) filters and (K, H, W, T) maps by direct summation."""
    K, H, W, T = maps.shape
    out = np.zeros((H, W, T))
    for t in range(T):
        for k in range(K):
            out[:, :, t] += conv_circular(filters[k], maps[k, :, :, t])
    return out


def dense_operator(fn, in_shape):
    """Matrix of a linear function by probing it with unit vectors."""
    n = int(np.prod(in_shape))
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        cols.append(np.asarray(fn(e.reshape(in_shape))).ravel())
    return np.stack(cols, axis=1)


def difference_matrix(T):
    """(T-1, T) backward differences."""
    D = np.zeros((max(T - 1, 0), T))
    for i in range(T - 1):
        D[i, i] = -1.0
        D[i, i + 1] = 1.0
    return D


# --------------------------------------------------------------------------
# exact prox of lam * TV on short series, by enumerating segmentations
# --------------------------------------------------------------------------

def _segment_candidates(T):
    """All (segment labels, jump signs) pairs of a length-T series."""
    out = []
    for cuts in itertools.product([0, 1], repeat=T - 1):
        labels = np.concatenate([[0], np.cumsum(cuts)]).astype(int)
        n_seg = labels[-1] + 1
        for signs in itertools.product([-1.0, 1.0], repeat=n_seg - 1):
            out.append((labels, n_seg, np.asarray(signs)))
    return out


class TvProxEnumerator:
    """Exact ``argmin_x 1/2 ||x - y||^2 + lam sum |x_{i+1} - x_i|`` for T <= 6.

    The minimizer is piecewise constant; on a segment g with jump signs
    s_left (entering) and s_right (leaving) its value is
    ``mean(y_g) + lam (s_left - s_right) / |g|``. Every (segmentation,
    sign) choice gives a feasible point, and the true minimizer is one of
    them, so the best candidate is exact.
    """

    def __init__(self, T):
        self.T = T
        mats = []
        for labels, n_seg, signs in _segment_candidates(T):
            # x = P y + lam q, linear in y
            P = np.zeros((T, T))
            q = np.zeros(T)
            for g in range(n_seg):
                idx = np.flatnonzero(labels == g)
                P[np.ix_(idx, idx)] = 1.0 / len(idx)
                left = signs[g - 1] if g > 0 else 0.0
                right = signs[g] if g < n_seg - 1 else 0.0
                q[idx] = (left - right) / len(idx)
            mats.append((P, q))
        self.P = np.stack([m[0] for m in mats])  # (C, T, T)
        self.q = np.stack([m[1] for m in mats])  # (C, T)

    def __call__(self, Y, lam):
        """Row-wise prox of an (n, T) array."""
        Y = np.atleast_2d(Y)
        if self.T == 1 or lam == 0:
            return Y.copy()
        X = np.einsum("cij,nj->cni", self.P, Y) + lam * self.q[:, None, :]
        obj = 0.5 * np.sum((X - Y[None]) ** 2, axis=2) + lam * np.sum(np.abs(np.diff(X, axis=2)), axis=2)
        best = np.argmin(obj, axis=0)
        return X[best, np.arange(Y.shape[0])]


def soft(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def fused_prox(tv_prox, Y, lam1, lam2):
    """Prox of ``lam1 ||x||_1 + lam2 TV(x)``: soft-threshold the TV prox."""
    return soft(tv_prox(Y, lam2), lam1)


# --------------------------------------------------------------------------
# proximal-gradient reference for the CSC objective
# --------------------------------------------------------------------------

def csc_measurement_matrix(filters, mask):
    """Dense map from maps (K, H, W, T) (C order) to the coded image (H*W)."""
    K = filters.shape[0]
    H, W, T = mask.shape

    def forward(z):
        return (synth_loops_fast(filters, z) * mask).sum(axis=2)

    return dense_operator(forward, (K, H, W, T))


def synth_loops_fast(filters, maps):
    """Same as :func:`synth_loops` via shifted copies (no FFT)."""
    K, H, W, T = maps.shape
    s = filters.shape[1]
    c = s // 2
    out = np.zeros((H, W, T))
    for k in range(K):
        for a in range(s):
            for b in range(s):
                out += filters[k, a, b] * np.roll(maps[k], (a - c, b - c), axis=(0, 1))
    return out


def csc_objective_dense(M, b, z, beta, T):
    """``1/2 beta_d ||b - M z||^2 + beta_1 ||z||_1 + beta_2 ||grad_t z||_1`` with z (n, T) rows."""
    r = b.ravel() - M @ z.ravel()
    return (0.5 * beta[0] * float(r @ r) + beta[1] * float(np.abs(z).sum())
            + beta[2] * float(np.abs(np.diff(z, axis=1)).sum()))


def fista_csc(M, b, T, beta, iters=10_000):
    """Accelerated proximal gradient on the CSC objective; returns (z, objective).

    ``z`` is laid out as (K*H*W, T) rows, matching C-order (K, H, W, T) maps.
    """
    n = M.shape[1]
    rows = n // T
    L = beta[0] * np.linalg.norm(M, 2) ** 2
    step = 1.0 / L
    prox = TvProxEnumerator(T)
    bb = b.ravel()
    z = np.zeros((rows, T))
    yk = z.copy()
    tk = 1.0
    best = (csc_objective_dense(M, b, z, beta, T), z)
    for _ in range(iters):
        grad = (beta[0] * (M.T @ (M @ yk.ravel() - bb))).reshape(rows, T)
        z_new = fused_prox(prox, yk - step * grad, step * beta[1], step * beta[2])
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tk * tk))
        yk = z_new + ((tk - 1.0) / t_new) * (z_new - z)
        z, tk = z_new, t_new
    f = csc_objective_dense(M, b, z, beta, T)
    if f < best[0]:
        best = (f, z)
    return best[1], best[0]
