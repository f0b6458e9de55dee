"""K-SVD dictionary learning for vectorized space-time blocks."""

from __future__ import annotations

import logging
import warnings

import numpy as np
from scipy import sparse
from sklearn.linear_model import orthogonal_mp_gram

from .._validation import check_array, check_random_state, check_scalar
from ..exceptions import ParamError

log = logging.getLogger(__name__)


def omp_codes(dictionary, X, n_nonzero):
    """Greedy sparse codes (q, N) of the columns of ``X`` (m, N)."""
    gram = dictionary.T @ dictionary
    xy = dictionary.T @ X
    with warnings.catch_warnings():
        # exact fits before n_nonzero atoms are expected, not an error
        warnings.simplefilter("ignore", RuntimeWarning)
        codes = orthogonal_mp_gram(gram, xy, n_nonzero_coefs=n_nonzero, copy_Gram=False, copy_Xy=False)
    return np.asarray(codes).reshape(dictionary.shape[1], X.shape[1])


def _residual_norms(X, D, A):
    R = X - (sparse.csc_matrix(A).T @ D.T).T
    return np.einsum("ij,ij->j", R, R)


def train_ksvd(blocks, n_atoms: int, sparsity: int = 10, iterations: int = 30, seed=None, remove_mean: bool = False):
    """Learn an (m, q) dictionary with unit-norm atoms from (N, m) blocks.

    Each iteration sparse-codes every block with at most ``sparsity`` atoms
    (OMP; a block keeps its previous code if that one is still better), then
    updates each atom and its coefficients from the leading singular pair of
    the residual restricted to the blocks using it. Atoms nobody uses are
    replaced by the currently worst represented block.

    Returns ``(dictionary, history)``; ``history[i]`` is the total squared
    representation error after iteration ``i``.
    """
    Xb = check_array(blocks, 2, "blocks")
    N, m = Xb.shape
    check_scalar(n_atoms, "n_atoms", min_val=1, kind=int)
    check_scalar(sparsity, "sparsity", min_val=1, kind=int)
    check_scalar(iterations, "iterations", min_val=1, kind=int)
    if n_atoms < m:
        raise ParamError(f"dictionary must be overcomplete: {n_atoms} atoms < block length {m}")
    if remove_mean:
        Xb = Xb - Xb.mean(axis=1, keepdims=True)
    X = np.ascontiguousarray(Xb.T)  # (m, N)
    rng = check_random_state(seed)

    norms = np.linalg.norm(X, axis=0)
    usable = np.flatnonzero(norms > 1e-12)
    take = rng.choice(usable, size=min(n_atoms, len(usable)), replace=False)
    D = np.empty((m, n_atoms))
    D[:, : len(take)] = X[:, take] / norms[take]
    if len(take) < n_atoms:
        extra = rng.standard_normal((m, n_atoms - len(take)))
        D[:, len(take):] = extra / np.linalg.norm(extra, axis=0)

    A = np.zeros((n_atoms, N))
    err_prev = np.einsum("ij,ij->j", X, X)
    history = []
    for it in range(iterations):
        A_new = omp_codes(D, X, sparsity)
        err_new = _residual_norms(X, D, A_new)
        keep_old = err_prev < err_new
        A_new[:, keep_old] = A[:, keep_old]
        A = A_new
        errs = np.where(keep_old, err_prev, err_new)
        worst = list(np.argsort(errs)[::-1])

        for k in range(n_atoms):
            users = np.flatnonzero(A[k])
            if users.size == 0:
                j = worst.pop(0)
                v = X[:, j] - D @ A[:, j]
                nv = np.linalg.norm(v)
                if nv > 1e-12:
                    D[:, k] = v / nv
                continue
            Au = A[:, users]
            rows = np.flatnonzero(np.any(Au != 0, axis=1))
            E = X[:, users] - D[:, rows] @ Au[rows] + np.outer(D[:, k], A[k, users])
            U, s, Vt = np.linalg.svd(E, full_matrices=False)
            D[:, k] = U[:, 0]
            A[k, users] = s[0] * Vt[0]
        err_prev = _residual_norms(X, D, A)
        history.append(float(err_prev.sum()))
        log.info("K-SVD iteration %d: error %.6g", it, history[-1])
    D /= np.linalg.norm(D, axis=0)
    return D, np.asarray(history)
