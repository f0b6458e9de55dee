import cvxpy as cp
import numpy as np
import pytest

from codedvideo.coded_exposure import code_exposure, generate_shutter
from codedvideo.exceptions import ParamError, SelectionError
from codedvideo.patch import (
    BlockSelectionConfig,
    PatchConfig,
    block_positions,
    extract_blocks,
    kkt_violation,
    lasso_solve,
    local_operator,
    merge_blocks,
    reconstruct_patch,
    select_training_blocks,
    train_ksvd,
    unvectorize_block,
    vectorize_block,
)


# --------------------------------------------------------------------------
# blocks
# --------------------------------------------------------------------------

def test_single_block_equals_vectorized_video():
    v = np.random.default_rng(0).random((7, 7, 20))
    blocks, pos = extract_blocks(v, (7, 7, 20), stride=1)
    assert blocks.shape == (1, 980)
    np.testing.assert_array_equal(blocks[0], vectorize_block(v))
    np.testing.assert_array_equal(pos, [[0, 0, 0]])


def test_vectorization_order_x_fastest():
    blk = np.arange(2 * 3 * 4).reshape(2, 3, 4)  # (y, x, t)
    vec = vectorize_block(blk)
    assert vec[0] == blk[0, 0, 0] and vec[1] == blk[0, 1, 0] and vec[3] == blk[1, 0, 0]
    assert vec[6] == blk[0, 0, 1]
    np.testing.assert_array_equal(unvectorize_block(vec, (2, 3, 4)), blk)


def test_block_count_and_border_positions():
    v = np.zeros((8, 8, 20))
    assert extract_blocks(v, (7, 7, 20), stride=1)[0].shape[0] == 4
    assert block_positions(10, 7, 2) == [0, 2, 3]
    with pytest.raises(ParamError):
        extract_blocks(np.zeros((6, 8, 20)), (7, 7, 20))


@pytest.mark.parametrize("stride", [1, 2, 3])
def test_merge_is_partition_of_unity(stride):
    v = np.random.default_rng(1).random((12, 11, 20))
    blocks, pos = extract_blocks(v, (7, 7, 20), stride=stride)
    out, w = merge_blocks(blocks, pos, v.shape, (7, 7, 20), return_weights=True)
    np.testing.assert_allclose(out, v, atol=1e-12)
    assert np.all(w > 0) and np.all(w <= 1)


def test_merge_with_nonoverlapping_tiles_is_identity():
    v = np.random.default_rng(2).random((14, 14, 20))
    blocks, pos = extract_blocks(v, (7, 7, 20), stride=7)
    _, w = merge_blocks(blocks, pos, v.shape, (7, 7, 20), return_weights=True)
    assert np.all(w == 1.0)


# --------------------------------------------------------------------------
# selection
# --------------------------------------------------------------------------

def _linear_variance_corpus(n=900, m=10, seed=0):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, m)) * np.sqrt(np.linspace(0.01, 1.0, n))[:, None]


@pytest.mark.parametrize("strategy", ["random", "variance-bins", "stratified-gamma", "gamma"])
def test_selection_deterministic_without_duplicates(strategy):
    X = _linear_variance_corpus()
    cfg = BlockSelectionConfig(strategy, count=300, gamma=0.7, seed=4)
    a = select_training_blocks(X, cfg)
    b = select_training_blocks(X, cfg)
    np.testing.assert_array_equal(a, b)
    assert len(a) == 300 and len(set(a.tolist())) == 300


def test_variance_bins_equal_counts():
    X = _linear_variance_corpus()
    idx = select_training_blocks(X, BlockSelectionConfig("variance-bins", count=300, seed=0))
    ranks = np.argsort(np.argsort(np.var(X, axis=1)))
    counts = np.bincount(np.minimum(ranks[idx] * 3 // len(X), 2), minlength=3)
    np.testing.assert_array_equal(counts, [100, 100, 100])


def test_identical_variance_is_uniform():
    X = np.tile([1.0, -1.0], (600, 5))
    hits = np.zeros(600)
    for seed in range(200):
        hits[select_training_blocks(X, BlockSelectionConfig("gamma", count=60, gamma=0.3, seed=seed))] += 1
    # ties are broken at random, so position in the input does not matter
    assert abs(hits[:300].sum() - hits[300:].sum()) < 0.1 * hits.sum()


def test_gamma_small_exponent_prefers_high_variance():
    X = _linear_variance_corpus()
    var = np.var(X, axis=1)
    m03 = [var[select_training_blocks(X, BlockSelectionConfig("gamma", 100, 0.3, seed=s))].mean() for s in range(20)]
    m07 = [var[select_training_blocks(X, BlockSelectionConfig("gamma", 100, 0.7, seed=s))].mean() for s in range(20)]
    assert np.mean(m03) > np.mean(m07)


def test_selection_errors():
    X = _linear_variance_corpus(n=30)
    with pytest.raises(SelectionError):
        select_training_blocks(X, BlockSelectionConfig("random", count=31))
    with pytest.raises(ParamError):
        select_training_blocks(X, BlockSelectionConfig("best", count=3))
    with pytest.raises(ParamError):
        select_training_blocks(X, BlockSelectionConfig("gamma", count=3, gamma=1.5))


# --------------------------------------------------------------------------
# K-SVD
# --------------------------------------------------------------------------

def planted_problem(m=20, q=64, s=3, n=2000, seed=0):
    rng = np.random.default_rng(seed)
    D = rng.standard_normal((m, q))
    D /= np.linalg.norm(D, axis=0)
    codes = np.zeros((q, n))
    for j in range(n):
        codes[rng.choice(q, s, replace=False), j] = rng.standard_normal(s)
    return D, (D @ codes).T


def recovered_fraction(D_true, D_learned, thresh=0.95):
    corr = np.abs(D_true.T @ D_learned)
    return float(np.mean(corr.max(axis=1) > thresh))


def test_ksvd_small_problem_properties():
    _, X = planted_problem(m=12, q=24, n=400, seed=1)
    D, hist = train_ksvd(X, 24, sparsity=3, iterations=8, seed=0)
    np.testing.assert_allclose(np.linalg.norm(D, axis=0), 1.0, atol=1e-9)
    assert np.all(np.diff(hist) <= 1e-9 * hist[0])


def test_ksvd_requires_overcomplete():
    with pytest.raises(ParamError):
        train_ksvd(np.ones((50, 20)), 10)
    with pytest.raises(ParamError):
        PatchConfig(n_atoms=980).validate()


def test_ksvd_deterministic():
    _, X = planted_problem(m=10, q=20, n=200, seed=2)
    a, _ = train_ksvd(X, 20, 3, 3, seed=5)
    b, _ = train_ksvd(X, 20, 3, 3, seed=5)
    assert a.tobytes() == b.tobytes()


# --------------------------------------------------------------------------
# lasso
# --------------------------------------------------------------------------

def test_lasso_orthonormal_least_squares():
    Q, _ = np.linalg.qr(np.random.default_rng(3).standard_normal((8, 8)))
    b = np.random.default_rng(4).standard_normal(8)
    np.testing.assert_allclose(lasso_solve(Q, b, 0.0), Q.T @ b, atol=1e-10)


def test_lasso_null_threshold():
    rng = np.random.default_rng(5)
    A, b = rng.standard_normal((10, 25)), rng.standard_normal(10)
    assert np.all(lasso_solve(A, b, np.max(np.abs(A.T @ b))) == 0)


@pytest.mark.parametrize("seed", range(5))
def test_lasso_against_convex_solver(seed):
    rng = np.random.default_rng(seed)
    A, b = rng.standard_normal((10, 25)), rng.standard_normal(10)
    lam = 0.3
    x = lasso_solve(A, b, lam)
    z = cp.Variable(25)
    prob = cp.Problem(cp.Minimize(0.5 * cp.sum_squares(b - A @ z) + lam * cp.norm1(z)))
    prob.solve(solver="CLARABEL", tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
    f = 0.5 * np.sum((b - A @ x) ** 2) + lam * np.abs(x).sum()
    assert abs(f - prob.value) <= 1e-6
    assert kkt_violation(A, b, x, lam) <= 1e-6


def test_lasso_kkt_on_dictionary_sized_problem():
    rng = np.random.default_rng(6)
    A = rng.standard_normal((49, 300))
    A /= np.linalg.norm(A, axis=0)
    b = rng.random(49) * 3
    assert kkt_violation(A, b, lasso_solve(A, b, 0.1), 0.1) <= 1e-6


# --------------------------------------------------------------------------
# reconstruction
# --------------------------------------------------------------------------

def test_local_operator_matches_masked_sum():
    rng = np.random.default_rng(7)
    shape = (3, 4, 5)
    D = rng.standard_normal((60, 70))
    mask = (rng.random(shape) < 0.4).astype(float)
    alpha = rng.standard_normal(70)
    blk = unvectorize_block(D @ alpha, shape)
    np.testing.assert_allclose(local_operator(D, mask, shape) @ alpha, (mask * blk).sum(axis=2).ravel(), atol=1e-12)


def _small_cfg(**kw):
    base = dict(patch_x=4, patch_y=4, patch_t=6, stride=2, n_atoms=200, lasso_lambda=1e-3)
    base.update(kw)
    return PatchConfig(**base)


def test_planted_sparse_block_recovered():
    rng = np.random.default_rng(8)
    cfg = PatchConfig(lasso_lambda=1e-4)
    D = rng.standard_normal((980, 1960))
    D /= np.linalg.norm(D, axis=0)
    alpha = np.zeros(1960)
    alpha[rng.choice(1960, 3, replace=False)] = [2.0, -1.5, 1.0]
    x = unvectorize_block(D @ alpha, (7, 7, 20))
    s = generate_shutter(7, 7, 20, 3, seed=1)
    xhat = reconstruct_patch(code_exposure(x, s), s, D, cfg)
    assert np.linalg.norm(xhat - x) / np.linalg.norm(x) < 0.05


def test_copy_solver_reproduces_video():
    # with the lasso replaced by an exact copy, merging is a partition of unity
    rng = np.random.default_rng(9)
    cfg = _small_cfg(n_atoms=None)
    v = rng.random((10, 9, 6))
    D = np.eye(96)
    D = np.hstack([D, D])  # overcomplete, identity twice
    coords = {}

    def copy_solver(A, b, lam):
        r, c = coords["pos"].pop(0)
        a = np.zeros(192)
        a[:96] = vectorize_block(v[r:r + 4, c:c + 4])
        return a

    coords["pos"] = [(r, c) for r in block_positions(10, 4, 2) for c in block_positions(9, 4, 2)]
    s = generate_shutter(10, 9, 6, 2, seed=0)
    out = reconstruct_patch(code_exposure(v, s), s, D, cfg, solve=copy_solver)
    np.testing.assert_allclose(out, v, atol=1e-12)


def test_scaling_identity():
    rng = np.random.default_rng(10)
    cfg = _small_cfg(lasso_lambda=0.05)
    D = rng.standard_normal((96, 200))
    D /= np.linalg.norm(D, axis=0)
    s = generate_shutter(8, 8, 6, 2, seed=2)
    b = code_exposure(rng.random((8, 8, 6)), s)
    x1 = reconstruct_patch(b, s, D, cfg)
    x2 = reconstruct_patch(2 * b, s, D, _small_cfg(lasso_lambda=0.1))
    np.testing.assert_allclose(x2, 2 * x1, atol=1e-8)


def test_reconstruct_dimension_errors():
    D = np.random.default_rng(0).standard_normal((96, 200))
    s = generate_shutter(8, 8, 6, 2, seed=2)
    with pytest.raises(ParamError):
        reconstruct_patch(np.zeros((8, 8)), s, D, _small_cfg(patch_t=5, n_atoms=None))
    with pytest.raises(ParamError):
        reconstruct_patch(np.zeros((8, 8)), s, D[:90], _small_cfg())
    with pytest.raises(ParamError):
        reconstruct_patch(np.zeros((7, 8)), s, D, _small_cfg())
