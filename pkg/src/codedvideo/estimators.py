"""Scikit-learn style front ends for the capture simulation and both solvers.

The estimators only hold hyper-parameters in ``__init__`` and learn state
in ``fit`` (attributes with a trailing underscore), so ``get_params``,
``set_params`` and :func:`sklearn.base.clone` behave as usual.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_array, check_image, check_video
from .coded_exposure import Shutter, code_exposure, generate_shutter
from .csc.operators import check_filters
from .csc.solver import CscParams, reconstruct_csc
from .csc.training import CscTrainConfig, train_filters
from .exceptions import ParamError
from .patch.blocks import BlockSelectionConfig, PatchConfig, extract_blocks, select_training_blocks
from .patch.ksvd import train_ksvd
from .patch.reconstruct import reconstruct_patch


class CodedExposureSampler(TransformerMixin, BaseEstimator):
    """Simulate a single-bump coded-exposure camera.

    ``fit`` draws a shutter matching the (H, W, T) shape of ``X``;
    ``transform`` returns the coded image of a video of that shape.
    """

    def __init__(self, bump_length: int = 3, seed=None):
        self.bump_length = bump_length
        self.seed = seed

    def fit(self, X, y=None):
        H, W, T = check_video(X).shape
        self.shutter_ = generate_shutter(H, W, T, self.bump_length, seed=self.seed)
        return self

    def transform(self, X):
        check_is_fitted(self, "shutter_")
        return code_exposure(X, self.shutter_)


class ConvolutionalFilterLearner(BaseEstimator):
    """Learn a 2-D convolutional filter bank from a list of images."""

    def __init__(self, n_filters=100, size=11, sparsity=1.0, alternations=15, z_iters=10, d_iters=20,
                 rho=10.0, seed=0):
        self.n_filters = n_filters
        self.size = size
        self.sparsity = sparsity
        self.alternations = alternations
        self.z_iters = z_iters
        self.d_iters = d_iters
        self.rho = rho
        self.seed = seed

    def fit(self, X, y=None):
        cfg = CscTrainConfig(**self.get_params())
        self.filters_, self.history_ = train_filters(list(X), cfg)
        return self


class CSCVideoReconstructor(BaseEstimator):
    """Reconstruct coded images with temporally regularized convolutional sparse coding.

    Either pass a trained bank as ``filters`` (shape (K, s, s)) or call
    ``fit`` on training images to learn one with ``train_params``.
    """

    def __init__(self, filters=None, beta_d=100.0, beta_1=10.0, beta_2=1.0, rho=1.0, outer_iters=30, tol=1e-4,
                 lowpass_sigma=2.0, dtype="float32", train_params=None):
        self.filters = filters
        self.beta_d = beta_d
        self.beta_1 = beta_1
        self.beta_2 = beta_2
        self.rho = rho
        self.outer_iters = outer_iters
        self.tol = tol
        self.lowpass_sigma = lowpass_sigma
        self.dtype = dtype
        self.train_params = train_params

    def _solver_params(self) -> CscParams:
        names = ("beta_d", "beta_1", "beta_2", "rho", "outer_iters", "tol", "lowpass_sigma", "dtype")
        return CscParams(**{n: getattr(self, n) for n in names}).validate()

    def fit(self, X=None, y=None):
        """Learn a filter bank from images ``X``, or adopt ``filters`` when ``X`` is None."""
        self._solver_params()
        if X is None:
            if self.filters is None:
                raise ParamError("no filters given and no training images to learn them from")
            self.filters_ = check_filters(self.filters)
        else:
            learner = ConvolutionalFilterLearner(**(self.train_params or {})).fit(X)
            self.filters_ = learner.filters_
        return self

    def predict(self, coded, shutter):
        """Return the (H, W, T) frame estimate; the full result is kept in ``result_``."""
        check_is_fitted(self, "filters_")
        self.result_ = reconstruct_csc(coded, shutter, self.filters_, self._solver_params())
        return self.result_.frames


class PatchVideoReconstructor(BaseEstimator):
    """Patch-based baseline: K-SVD dictionary over space-time blocks plus per-block lasso."""

    def __init__(self, dictionary=None, patch_x=7, patch_y=7, patch_t=20, stride=2, n_atoms=None,
                 train_sparsity=10, ksvd_iters=30, lasso_lambda=0.1, remove_mean=False,
                 selection="variance-bins", n_train_blocks=2000, gamma=0.7, seed=0):
        self.dictionary = dictionary
        self.patch_x = patch_x
        self.patch_y = patch_y
        self.patch_t = patch_t
        self.stride = stride
        self.n_atoms = n_atoms
        self.train_sparsity = train_sparsity
        self.ksvd_iters = ksvd_iters
        self.lasso_lambda = lasso_lambda
        self.remove_mean = remove_mean
        self.selection = selection
        self.n_train_blocks = n_train_blocks
        self.gamma = gamma
        self.seed = seed

    def _config(self) -> PatchConfig:
        names = ("patch_x", "patch_y", "patch_t", "stride", "n_atoms", "train_sparsity", "ksvd_iters",
                 "lasso_lambda", "remove_mean")
        return PatchConfig(**{n: getattr(self, n) for n in names}).validate()

    def fit(self, X=None, y=None):
        """Train the dictionary on training videos ``X`` or adopt ``dictionary``."""
        cfg = self._config()
        if X is None:
            if self.dictionary is None:
                raise ParamError("no dictionary given and no training videos to learn one from")
            D = check_array(self.dictionary, 2, "dictionary")
            if D.shape[0] != cfg.block_length:
                raise ParamError(f"dictionary atoms have length {D.shape[0]}, blocks have {cfg.block_length}")
            self.dictionary_ = D
            return self
        if isinstance(X, np.ndarray) and X.ndim == 3:
            X = [X]
        blocks = np.concatenate([extract_blocks(v, cfg.patch_shape, stride=1)[0] for v in X])
        sel = BlockSelectionConfig(self.selection, self.n_train_blocks, self.gamma, seed=self.seed)
        self.train_indices_ = select_training_blocks(blocks, sel)
        self.dictionary_, self.history_ = train_ksvd(
            blocks[self.train_indices_], cfg.atoms, cfg.train_sparsity, cfg.ksvd_iters,
            seed=self.seed, remove_mean=cfg.remove_mean,
        )
        return self

    def predict(self, coded, shutter):
        check_is_fitted(self, "dictionary_")
        if not isinstance(shutter, Shutter):
            shutter = Shutter.from_mask(shutter)
        video, self.info_ = reconstruct_patch(check_image(coded, "coded image"), shutter, self.dictionary_,
                                              self._config(), return_info=True)
        return video
