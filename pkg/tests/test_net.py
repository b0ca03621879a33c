import math

import numpy as np
import pytest

from mvhash import net
from mvhash.errors import CacheMismatch, InvalidArgument, ShapeMismatch

SMALL = net.Dims(d_img=8, d_txt=8, d=6, code_length=4)


def test_init_deterministic():
    a = net.init_params(SMALL, seed=5)
    b = net.init_params(SMALL, seed=5)
    for name, arr in a.blocks().items():
        assert (arr == b.blocks()[name]).all()


def test_init_biases_zero_and_scale():
    p = net.init_params(net.Dims(64, 64, 64, 16), seed=1)
    assert (p.b_vnorm == 0).all() and (p.b_hash == 0).all()
    # uniform(-1/8, 1/8) has std (1/8)/sqrt(3); check within 20% of 1/sqrt(64)... of the
    # uniform std, sampled over a 64x64 matrix
    expected = (1 / math.sqrt(64)) / math.sqrt(3)
    assert abs(p.W_i.std() - expected) / expected < 0.2


def test_init_rejects_bad_dims():
    with pytest.raises(InvalidArgument):
        net.Dims(0, 8, 6, 4)


def _zero_params(dims=SMALL):
    p = net.init_params(dims, seed=0)
    for arr in p.blocks().values():
        arr[:] = 0.0
    return p


def test_forward_zero_params_fixed_point():
    p = _zero_params()
    he, cache = net.forward(p, np.ones(8), np.ones(8))
    assert (cache.z == 0.5).all()
    assert (cache.h_i == 0).all() and (cache.h_t == 0).all()
    assert (he == 0).all()


def test_forward_gate_saturation():
    rng = np.random.default_rng(0)
    p = net.init_params(SMALL, seed=1)
    img, txt = rng.normal(size=8), rng.normal(size=8)
    _, cache = net.forward(p, img, txt)
    # scale gate rows so the (positive-logit) gate saturates toward 1
    logits = np.concatenate([cache.x_i, cache.x_t], axis=1) @ p.W_z.T
    p.W_z *= np.where(logits[0] > 0, 1e3, -1e3)[:, None]
    _, cache2 = net.forward(p, img, txt)
    assert np.allclose(cache2.h_f, cache2.h_i, atol=1e-6)


def test_forward_matches_scalar_oracle():
    # independent scalar re-implementation of the five-step forward pass
    dims = net.Dims(d_img=2, d_txt=2, d=2, code_length=2)
    p = net.init_params(dims, seed=7)
    img, txt = np.array([0.3, -1.2]), np.array([0.8, 0.1])

    def dot(mat, vec):
        return [sum(mat[r][c] * vec[c] for c in range(len(vec))) for r in range(len(mat))]

    x_i = [a + b for a, b in zip(dot(p.W_vnorm.tolist(), img.tolist()), p.b_vnorm)]
    x_t = [a + b for a, b in zip(dot(p.W_tnorm.tolist(), txt.tolist()), p.b_tnorm)]
    h_i = [math.tanh(v) for v in dot(p.W_i.tolist(), x_i)]
    h_t = [math.tanh(v) for v in dot(p.W_t.tolist(), x_t)]
    z = [1 / (1 + math.exp(-v)) for v in dot(p.W_z.tolist(), x_i + x_t)]
    h_f = [zz * a + (1 - zz) * b for zz, a, b in zip(z, h_i, h_t)]
    he_ref = [math.tanh(v + bb) for v, bb in zip(dot(p.W_hash.tolist(), h_f), p.b_hash)]

    he, _ = net.forward(p, img, txt)
    assert np.allclose(he[0], he_ref, atol=1e-12, rtol=0)


def test_forward_range_invariants():
    rng = np.random.default_rng(3)
    p = net.init_params(SMALL, seed=2)
    he, cache = net.forward(p, rng.normal(size=(16, 8)), rng.normal(size=(16, 8)))
    assert ((cache.z > 0) & (cache.z < 1)).all()
    assert ((he > -1) & (he < 1)).all()
    # the gate mixture lies elementwise between its two inputs
    lo = np.minimum(cache.h_i, cache.h_t)
    hi = np.maximum(cache.h_i, cache.h_t)
    assert ((cache.h_f >= lo - 1e-12) & (cache.h_f <= hi + 1e-12)).all()


def test_forward_is_pure():
    rng = np.random.default_rng(4)
    p = net.init_params(SMALL, seed=2)
    img, txt = rng.normal(size=(5, 8)), rng.normal(size=(5, 8))
    he1, _ = net.forward(p, img, txt)
    he2, _ = net.forward(p, img, txt)
    assert (he1 == he2).all()


def test_forward_shape_and_finite_errors():
    p = net.init_params(SMALL, seed=2)
    with pytest.raises(ShapeMismatch):
        net.forward(p, np.ones(5), np.ones(8))
    bad = np.ones(8)
    bad[0] = np.nan
    with pytest.raises(InvalidArgument):
        net.forward(p, bad, np.ones(8))


def finite_difference_grads(p, img, txt, grad_he, fusion, masks=None, eps=1e-5):
    """Central differences of sum(grad_he * he) w.r.t. every parameter."""
    out = {}
    for name, arr in p.blocks().items():
        g = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + eps
            hp, _ = net.forward(p, img, txt, dropout_masks=masks, fusion=fusion)
            arr[idx] = orig - eps
            hm, _ = net.forward(p, img, txt, dropout_masks=masks, fusion=fusion)
            arr[idx] = orig
            g[idx] = np.sum(grad_he * (hp - hm)) / (2 * eps)
        out[name] = g
    return out


def assert_grads_close(analytic, numeric, rtol=1e-4):
    for name, g in analytic.items():
        ref = numeric[name]
        denom = max(np.abs(ref).max(), np.abs(g).max(), 1e-8)
        assert np.abs(g - ref).max() / denom < rtol, name


@pytest.mark.parametrize("fusion", net.FUSION_MODES)
def test_backward_matches_finite_differences(fusion):
    rng = np.random.default_rng(10)
    p = net.init_params(SMALL, seed=11)
    img, txt = rng.normal(size=(3, 8)), rng.normal(size=(3, 8))
    grad_he = rng.normal(size=(3, 4))
    he, cache = net.forward(p, img, txt, fusion=fusion)
    analytic = net.backward(p, cache, grad_he)
    numeric = finite_difference_grads(p, img, txt, grad_he, fusion)
    assert_grads_close(analytic, numeric)


def test_backward_with_dropout_masks():
    rng = np.random.default_rng(12)
    p = net.init_params(SMALL, seed=13)
    img, txt = rng.normal(size=(4, 8)), rng.normal(size=(4, 8))
    keep = 0.9
    masks = ((rng.random((4, 6)) < keep) / keep, (rng.random((4, 6)) < keep) / keep)
    grad_he = rng.normal(size=(4, 4))
    he, cache = net.forward(p, img, txt, dropout_masks=masks)
    analytic = net.backward(p, cache, grad_he)
    numeric = finite_difference_grads(p, img, txt, grad_he, "gmu", masks=masks)
    assert_grads_close(analytic, numeric)


def test_backward_zero_upstream_gives_zero_grads():
    rng = np.random.default_rng(14)
    p = net.init_params(SMALL, seed=15)
    he, cache = net.forward(p, rng.normal(size=(2, 8)), rng.normal(size=(2, 8)))
    grads = net.backward(p, cache, np.zeros_like(he))
    assert all((g == 0).all() for g in grads.values())


def test_backward_gate_grad_vanishes_when_views_agree():
    # force h_i == h_t by sharing weights and feeding identical views
    p = net.init_params(SMALL, seed=16)
    p.W_tnorm[:] = p.W_vnorm
    p.b_tnorm[:] = p.b_vnorm
    p.W_t[:] = p.W_i
    rng = np.random.default_rng(17)
    x = rng.normal(size=(3, 8))
    he, cache = net.forward(p, x, x)
    assert np.allclose(cache.h_i, cache.h_t)
    grads = net.backward(p, cache, rng.normal(size=(3, 4)))
    assert np.abs(grads["W_z"]).max() < 1e-12


def test_backward_rejects_mismatched_cache():
    rng = np.random.default_rng(18)
    p = net.init_params(SMALL, seed=19)
    he, cache = net.forward(p, rng.normal(size=(2, 8)), rng.normal(size=(2, 8)))
    with pytest.raises(CacheMismatch):
        net.backward(p, cache, np.zeros((5, 4)))
    other = net.init_params(net.Dims(8, 8, 5, 4), seed=19)
    with pytest.raises(CacheMismatch):
        net.backward(other, cache, np.zeros_like(he))


def test_binarize():
    assert net.binarize(np.array([0.9, -0.2, 0.0001, -0.9])).tolist() == [1, -1, 1, -1]
    assert net.binarize(np.zeros(4)).tolist() == [-1, -1, -1, -1]
    he = np.array([0.3, -0.7, 0.01, -0.001])
    assert (net.binarize(he) == net.binarize(0.5 * he)).all()


def test_gate_values():
    p = _zero_params()
    z = net.gate_values(p, np.ones(8), np.ones(8))
    assert (z == 0.5).all()
    rng = np.random.default_rng(20)
    p2 = net.init_params(SMALL, seed=21)
    z2 = net.gate_values(p2, rng.normal(size=8), rng.normal(size=8))
    assert ((z2 > 0) & (z2 < 1)).all()


def test_gate_swap_symmetry():
    # negating the gate matrix while swapping its halves and the two inputs
    # flips the gate: z -> 1 - z
    dims = net.Dims(d_img=8, d_txt=8, d=6, code_length=4)
    p = net.init_params(dims, seed=22)
    p.W_tnorm[:] = p.W_vnorm
    p.b_tnorm[:] = p.b_vnorm
    rng = np.random.default_rng(23)
    a, b = rng.normal(size=8), rng.normal(size=8)
    z = net.gate_values(p, a, b)
    d = dims.d
    p.W_z[:] = -np.concatenate([p.W_z[:, d:], p.W_z[:, :d]], axis=1)
    z_swapped = net.gate_values(p, b, a)
    assert np.allclose(z_swapped, 1.0 - z, atol=1e-12)
