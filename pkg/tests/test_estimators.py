import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from codedvideo import (CodedExposureSampler, ConvolutionalFilterLearner, CSCVideoReconstructor,
                        PatchVideoReconstructor, code_exposure)
from codedvideo.exceptions import ParamError
from codedvideo.synthetic import moving_square


@pytest.fixture
def video():
    return moving_square(32, 6, seed=2)


def test_sampler_fit_transform(video):
    sampler = CodedExposureSampler(bump_length=2, seed=3).fit(video)
    assert sampler.shutter_.mask.shape == video.shape
    coded = sampler.transform(video)
    assert np.array_equal(coded, code_exposure(video, sampler.shutter_))
    assert np.array_equal(CodedExposureSampler(bump_length=2, seed=3).fit_transform(video), coded)


def test_get_params_and_clone():
    est = CSCVideoReconstructor(beta_2=0.5, outer_iters=4)
    params = est.get_params()
    assert params["beta_2"] == 0.5 and params["outer_iters"] == 4
    twin = clone(est)
    assert twin is not est and twin.get_params() == params
    est.set_params(rho=3.0)
    assert est.rho == 3.0
    assert clone(PatchVideoReconstructor(stride=3)).stride == 3


def test_unfitted_estimators_raise(video):
    with pytest.raises(NotFittedError):
        CodedExposureSampler().transform(video)
    with pytest.raises(NotFittedError):
        CSCVideoReconstructor().predict(video.sum(axis=2), np.ones(video.shape))


def test_csc_reconstructor_with_given_filters(video):
    rng = np.random.default_rng(0)
    filters = rng.standard_normal((3, 5, 5))
    sampler = CodedExposureSampler(bump_length=2, seed=1).fit(video)
    est = CSCVideoReconstructor(filters=filters, outer_iters=3).fit()
    frames = est.predict(sampler.transform(video), sampler.shutter_)
    assert frames.shape == video.shape
    assert est.result_.info["iterations"] <= 3
    with pytest.raises(ParamError):
        CSCVideoReconstructor().fit()
    with pytest.raises(ParamError):
        CSCVideoReconstructor(filters=filters, rho=0.0).fit()


def test_csc_reconstructor_learns_bank(video):
    est = CSCVideoReconstructor(outer_iters=2, train_params=dict(n_filters=2, size=3, alternations=1, z_iters=2,
                                                                  d_iters=2))
    est.fit([video[:, :, 0], video[:, :, 3]])
    assert est.filters_.shape == (2, 3, 3)


def test_filter_learner(video):
    learner = ConvolutionalFilterLearner(n_filters=2, size=3, alternations=2, z_iters=2, d_iters=2).fit(
        [video[:, :, 0]])
    assert learner.filters_.shape == (2, 3, 3)
    assert learner.history_.shape == (2,)


def test_patch_reconstructor_fit_predict(video):
    est = PatchVideoReconstructor(patch_x=3, patch_y=3, patch_t=6, stride=3, n_atoms=60, train_sparsity=3,
                                  ksvd_iters=2, n_train_blocks=120, selection="random")
    est.fit(video)
    assert est.dictionary_.shape == (54, 60)
    assert len(est.train_indices_) == 120
    sampler = CodedExposureSampler(bump_length=2, seed=1).fit(video)
    out = est.predict(sampler.transform(video), sampler.shutter_.mask)
    assert out.shape == video.shape
    assert est.info_["blocks"] > 0


def test_patch_reconstructor_dictionary_checks():
    with pytest.raises(ParamError):
        PatchVideoReconstructor().fit()
    with pytest.raises(ParamError):
        PatchVideoReconstructor(dictionary=np.eye(10), patch_x=3, patch_y=3, patch_t=2).fit()
