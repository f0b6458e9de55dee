"""Learning a 2-D convolutional filter bank from still images.

Alternates a sparse-coding step (the ADMM of :mod:`.solver` with an identity
measurement and no temporal term) and a filter step: least squares in the
s x s filter coefficients, solved by conjugate gradients on the normal
equations, followed by projection onto the unit ball.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np
import scipy.fft as sfft
from scipy.ndimage import gaussian_filter

from .._validation import check_image, check_scalar
from ..exceptions import ParamError
from .operators import filter_spectra
from .solver import CscParams, QuadraticOperator, run_admm

log = logging.getLogger(__name__)


@dataclass
class CscTrainConfig:
    n_filters: int = 100
    size: int = 11
    sparsity: float = 1.0
    alternations: int = 15
    z_iters: int = 10
    d_iters: int = 20
    rho: float = 10.0
    seed: int | None = 0

    def validate(self) -> "CscTrainConfig":
        check_scalar(self.n_filters, "n_filters", min_val=1, kind=int)
        check_scalar(self.size, "size", min_val=1, kind=int)
        if self.size % 2 == 0:
            raise ParamError(f"filter size must be odd, got {self.size}")
        check_scalar(self.sparsity, "sparsity", min_val=0.0)
        for name in ("alternations", "z_iters", "d_iters"):
            check_scalar(getattr(self, name), name, min_val=1, kind=int)
        check_scalar(self.rho, "rho", min_val=0.0, include_min=False)
        return self

    def to_dict(self) -> dict:
        return asdict(self)


def project_filter(d):
    """Rescale a kernel onto the unit L2 ball (identity inside the ball)."""
    d = np.asarray(d, dtype=np.float64)
    n = np.linalg.norm(d)
    return d / n if n > 1.0 else d.copy()


def contrast_normalize(image, sigma: float = 2.0):
    """High-pass and local contrast normalization, scaled to unit std.

    Removes the Gaussian-smoothed local mean, divides by the local RMS
    (floored at its global mean so flat areas are not amplified) and
    rescales the result to unit standard deviation.
    """
    x = check_image(image)
    hp = x - gaussian_filter(x, sigma, mode="wrap")
    local = np.sqrt(gaussian_filter(hp * hp, sigma, mode="wrap"))
    out = hp / np.maximum(local, local.mean() + 1e-12)
    out -= out.mean()
    std = out.std()
    return out / std if std > 0 else out


def _crop_filters(full, s):
    # adjoint of the centred zero-padding used by filter_spectra
    c = s // 2
    return np.roll(full, (c, c), axis=(1, 2))[:, :s, :s]


class _FilterNormalEquations:
    """Normal operator of the filter least-squares problem for fixed maps."""

    def __init__(self, zhats, images, shape, size):
        self.zhats = zhats  # list of (K, H, Wr)
        self.shape = shape
        self.size = size
        self.xhats = [sfft.rfft2(x) for x in images]

    def _back(self, rhats):
        g = sum(np.conj(z) * r[None] for z, r in zip(self.zhats, rhats))
        return _crop_filters(sfft.irfft2(g, s=self.shape, axes=(1, 2)), self.size)

    def apply(self, d):
        dhat = filter_spectra(d, self.shape)
        return self._back([np.einsum("khw,khw->hw", z, dhat) for z in self.zhats])

    def rhs(self):
        return self._back(self.xhats)


def _cg(apply, b, x0, iters):
    x = x0.copy()
    r = b - apply(x)
    p = r.copy()
    rr = float(np.vdot(r, r))
    tiny = 1e-30 * max(float(np.vdot(b, b)), 1e-300)
    for _ in range(iters):
        if rr <= tiny:
            break
        Ap = apply(p)
        pAp = float(np.vdot(p, Ap))
        if pAp <= 0:
            break
        alpha = rr / pAp
        x += alpha * p
        r -= alpha * Ap
        rr_new = float(np.vdot(r, r))
        p = r + (rr_new / rr) * p
        rr = rr_new
    return x


def training_objective(filters, maps, images, sparsity):
    """sum_i 1/2 ||x_i - sum_k d_k * z_ik||^2 + sparsity * ||z||_1 (maps (K, H, W) each)."""
    total = 0.0
    for z, x in zip(maps, images):
        dhat = filter_spectra(filters, x.shape)
        rec = sfft.irfft2(np.einsum("khw,khw->hw", dhat, sfft.rfft2(z, axes=(1, 2))), s=x.shape)
        total += 0.5 * float(np.sum((x - rec) ** 2)) + sparsity * float(np.sum(np.abs(z)))
    return total


def train_filters(images, cfg: CscTrainConfig | None = None, preprocess: bool = True):
    """Learn ``cfg.n_filters`` odd-sized filters from a list of 2-D images.

    Returns ``(filters, history)`` with ``filters`` shaped (K, s, s) and
    ``history`` the training objective after each alternation.
    """
    cfg = (cfg or CscTrainConfig()).validate()
    if len(images) == 0:
        raise ParamError("need at least one training image")
    imgs = [check_image(im, "training image") for im in images]
    s = cfg.size
    for im in imgs:
        if im.shape[0] < s or im.shape[1] < s:
            raise ParamError(f"training image {im.shape} smaller than filter size {s}")
    if preprocess:
        imgs = [contrast_normalize(im) for im in imgs]

    rng = np.random.default_rng(cfg.seed)
    d = rng.standard_normal((cfg.n_filters, s, s))
    d /= np.linalg.norm(d.reshape(cfg.n_filters, -1), axis=1)[:, None, None]

    params = CscParams(beta_d=1.0, beta_1=cfg.sparsity, beta_2=0.0, rho=cfg.rho,
                       outer_iters=cfg.z_iters, tol=0.0, lowpass_sigma=None)
    states = [None] * len(imgs)
    history = []
    for it in range(cfg.alternations):
        # sparse coding with fixed filters, warm-started per image
        maps = []
        for i, x in enumerate(imgs):
            op = QuadraticOperator(d, x.shape, 1)
            s_tf = np.ones((1,) + x.shape)
            states[i], _ = run_admm(x, s_tf, op, params, state=states[i])
            maps.append(states[i].u[:, 0])
        # filter update with fixed maps
        zhats = [sfft.rfft2(z, axes=(1, 2)) for z in maps]
        d_new = np.zeros_like(d)
        groups = {}
        for i, x in enumerate(imgs):
            groups.setdefault(x.shape, []).append(i)
        normals = [
            _FilterNormalEquations([zhats[i] for i in idx], [imgs[i] for i in idx], shape, s)
            for shape, idx in groups.items()
        ]

        def apply(v):
            return sum(n.apply(v) for n in normals)

        rhs = sum(n.rhs() for n in normals)
        d_new = _cg(apply, rhs, d, cfg.d_iters)
        d = np.stack([project_filter(k) for k in d_new])
        obj = training_objective(d, maps, imgs, cfg.sparsity)
        history.append(obj)
        log.info("alternation %d: objective %.6g", it, obj)
    return d, np.asarray(history)
