"""Trainable head: normalization projections, gated fusion, hash layer.

Forward math (row-major batches, all float64):

    x_i = img @ W_vnorm.T + b_vnorm        (then optional dropout)
    x_t = txt @ W_tnorm.T + b_tnorm
    h_i = tanh(x_i @ W_i.T)
    h_t = tanh(x_t @ W_t.T)
    z   = sigmoid([x_i, x_t] @ W_z.T)
    h_f = z * h_i + (1 - z) * h_t
    he  = tanh(h_f @ W_hash.T + b_hash)

Fusion variants for ablations: "image" forces z = 1, "text" forces z = 0,
"concat" replaces the gate with a plain linear map h_f = [x_i, x_t] @ W_z.T.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import CacheMismatch, InvalidArgument, ShapeMismatch

FUSION_MODES = ("gmu", "image", "text", "concat")

# parameter blocks in checkpoint order
PARAM_NAMES = (
    "W_vnorm", "b_vnorm", "W_tnorm", "b_tnorm",
    "W_i", "W_t", "W_z", "W_hash", "b_hash",
)


@dataclass(frozen=True)
class Dims:
    d_img: int
    d_txt: int
    d: int
    code_length: int
    num_views: int = 2  # the fusion equations are written for two views

    def __post_init__(self):
        for name in ("d_img", "d_txt", "d", "code_length"):
            if getattr(self, name) < 1:
                raise InvalidArgument(f"{name} must be >= 1")


@dataclass
class ModelParams:
    dims: Dims
    init_seed: int
    W_vnorm: np.ndarray
    b_vnorm: np.ndarray
    W_tnorm: np.ndarray
    b_tnorm: np.ndarray
    W_i: np.ndarray
    W_t: np.ndarray
    W_z: np.ndarray
    W_hash: np.ndarray
    b_hash: np.ndarray

    def blocks(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def check_finite(self):
        for name, arr in self.blocks().items():
            if not np.isfinite(arr).all():
                raise InvalidArgument(f"parameter block {name} contains NaN/Inf")


def init_params(dims: Dims, seed: int) -> ModelParams:
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero biases."""
    rng = np.random.default_rng(seed)

    def w(rows, cols):
        bound = 1.0 / np.sqrt(cols)
        return rng.uniform(-bound, bound, size=(rows, cols))

    d, k = dims.d, dims.code_length
    return ModelParams(
        dims=dims,
        init_seed=int(seed),
        W_vnorm=w(d, dims.d_img),
        b_vnorm=np.zeros(d),
        W_tnorm=w(d, dims.d_txt),
        b_tnorm=np.zeros(d),
        W_i=w(d, d),
        W_t=w(d, d),
        W_z=w(d, 2 * d),
        W_hash=w(k, d),
        b_hash=np.zeros(k),
    )


@dataclass
class ForwardCache:
    """Intermediates of one forward call, consumed by backward()."""

    fusion: str
    img: np.ndarray
    txt: np.ndarray
    mask_i: np.ndarray | None  # inverted-dropout multipliers (0 or 1/(1-p))
    mask_t: np.ndarray | None
    x_i: np.ndarray  # after dropout
    x_t: np.ndarray
    h_i: np.ndarray
    h_t: np.ndarray
    z: np.ndarray
    h_f: np.ndarray
    he: np.ndarray
    dims: Dims = field(repr=False, default=None)


def _as_batch(x, dim, what):
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2 or a.shape[1] != dim:
        raise ShapeMismatch(f"{what}: expected (*, {dim}), got {a.shape}")
    if not np.isfinite(a).all():
        raise InvalidArgument(f"{what} contains NaN/Inf")
    return a


def forward(
    params: ModelParams,
    image_feat: np.ndarray,
    text_feat: np.ndarray,
    dropout_masks: tuple[np.ndarray, np.ndarray] | None = None,
    fusion: str = "gmu",
) -> tuple[np.ndarray, ForwardCache]:
    """Compute hash logits he in (-1,1)^K for a batch, caching intermediates."""
    if fusion not in FUSION_MODES:
        raise InvalidArgument(f"unknown fusion mode {fusion!r}")
    dims = params.dims
    img = _as_batch(image_feat, dims.d_img, "image features")
    txt = _as_batch(text_feat, dims.d_txt, "text features")
    if img.shape[0] != txt.shape[0]:
        raise ShapeMismatch(f"batch sizes differ: {img.shape[0]} vs {txt.shape[0]}")

    x_i = img @ params.W_vnorm.T + params.b_vnorm
    x_t = txt @ params.W_tnorm.T + params.b_tnorm
    mask_i = mask_t = None
    if dropout_masks is not None:
        mask_i, mask_t = dropout_masks
        x_i = x_i * mask_i
        x_t = x_t * mask_t

    h_i = np.tanh(x_i @ params.W_i.T)
    h_t = np.tanh(x_t @ params.W_t.T)
    xc = np.concatenate([x_i, x_t], axis=1)
    if fusion == "gmu":
        z = 1.0 / (1.0 + np.exp(-(xc @ params.W_z.T)))
        h_f = z * h_i + (1.0 - z) * h_t
    elif fusion == "image":
        z = np.ones_like(h_i)
        h_f = h_i
    elif fusion == "text":
        z = np.zeros_like(h_t)
        h_f = h_t
    else:  # concat: modulated views concatenated, linear map reusing the
        # (d, 2d) gate matrix; the gate itself is gone
        z = np.full_like(h_i, 0.5)
        h_f = np.concatenate([h_i, h_t], axis=1) @ params.W_z.T

    he = np.tanh(h_f @ params.W_hash.T + params.b_hash)
    cache = ForwardCache(
        fusion=fusion, img=img, txt=txt, mask_i=mask_i, mask_t=mask_t,
        x_i=x_i, x_t=x_t, h_i=h_i, h_t=h_t, z=z, h_f=h_f, he=he, dims=dims,
    )
    return he, cache


def backward(
    params: ModelParams, cache: ForwardCache, grad_he: np.ndarray
) -> dict[str, np.ndarray]:
    """Exact gradients of sum(grad_he * he) w.r.t. every parameter block."""
    if cache.dims != params.dims:
        raise CacheMismatch("cache was produced under different dims")
    g_he = np.asarray(grad_he, dtype=np.float64)
    if g_he.shape != cache.he.shape:
        raise CacheMismatch(f"grad_he shape {g_he.shape} != he shape {cache.he.shape}")

    d = params.dims.d
    g_a = g_he * (1.0 - cache.he**2)  # through final tanh
    gW_hash = g_a.T @ cache.h_f
    gb_hash = g_a.sum(axis=0)
    g_hf = g_a @ params.W_hash

    g_xi = np.zeros_like(cache.x_i)
    g_xt = np.zeros_like(cache.x_t)
    gW_z = np.zeros_like(params.W_z)
    gW_i = np.zeros_like(params.W_i)
    gW_t = np.zeros_like(params.W_t)

    def through_hi(g_hi):
        nonlocal gW_i, g_xi
        g_p = g_hi * (1.0 - cache.h_i**2)
        gW_i = g_p.T @ cache.x_i
        g_xi += g_p @ params.W_i

    def through_ht(g_ht):
        nonlocal gW_t, g_xt
        g_p = g_ht * (1.0 - cache.h_t**2)
        gW_t = g_p.T @ cache.x_t
        g_xt += g_p @ params.W_t

    if cache.fusion == "gmu":
        g_z = g_hf * (cache.h_i - cache.h_t)
        g_u = g_z * cache.z * (1.0 - cache.z)
        xc = np.concatenate([cache.x_i, cache.x_t], axis=1)
        gW_z = g_u.T @ xc
        g_xi += g_u @ params.W_z[:, :d]
        g_xt += g_u @ params.W_z[:, d:]
        through_hi(g_hf * cache.z)
        through_ht(g_hf * (1.0 - cache.z))
    elif cache.fusion == "image":
        through_hi(g_hf)
    elif cache.fusion == "text":
        through_ht(g_hf)
    else:  # concat
        hc = np.concatenate([cache.h_i, cache.h_t], axis=1)
        gW_z = g_hf.T @ hc
        through_hi(g_hf @ params.W_z[:, :d])
        through_ht(g_hf @ params.W_z[:, d:])

    if cache.mask_i is not None:
        g_xi = g_xi * cache.mask_i
        g_xt = g_xt * cache.mask_t

    return {
        "W_vnorm": g_xi.T @ cache.img,
        "b_vnorm": g_xi.sum(axis=0),
        "W_tnorm": g_xt.T @ cache.txt,
        "b_tnorm": g_xt.sum(axis=0),
        "W_i": gW_i,
        "W_t": gW_t,
        "W_z": gW_z,
        "W_hash": gW_hash,
        "b_hash": gb_hash,
    }


def binarize(he: np.ndarray) -> np.ndarray:
    """Sign binarization; exact zero maps to -1 so codes are reproducible."""
    a = np.asarray(he)
    if not np.isfinite(a).all():
        raise InvalidArgument("hash logits contain NaN/Inf")
    return np.where(a > 0, 1, -1).astype(np.int8)


def gate_values(
    params: ModelParams,
    image_feat: np.ndarray,
    text_feat: np.ndarray,
    fusion: str = "gmu",
) -> np.ndarray:
    """The fusion gate z for a sample or batch (no dropout)."""
    _, cache = forward(params, image_feat, text_feat, fusion=fusion)
    return cache.z
