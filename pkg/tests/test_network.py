import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from siamaug.augmentor import ViewPair, pad_batch
from siamaug.siamese import backward
from siamaug.siamese.network import (
    ATTENTION,
    EMBED_POOL_MLP,
    PREDICTOR_KEYS,
    ContractError,
    EncoderConfig,
    NetworkParams,
    NumericalError,
    byol_loss,
    collapse_metric,
    ema_update,
    encode,
    init_params,
    loss_and_grads,
    predict,
    project,
    symmetric_loss,
)

from oracles import finite_difference, random_network, relative_error


def small(variant=EMBED_POOL_MLP, seed=0, **kw):
    cfg = EncoderConfig(vocab_size=kw.get("vocab", 5), embed_dim=kw.get("d", 3), hidden_dim=kw.get("h", 4),
                        max_len=kw.get("L", 4), encoder_variant=variant)
    return init_params(cfg, np.random.default_rng(seed))


def two_dim():
    """Hand-sized network: vocab {PAD, EOS, a}, 2-dim everything."""
    cfg = EncoderConfig(vocab_size=3, embed_dim=2, hidden_dim=2, max_len=2)
    eye, zero = np.eye(2), np.zeros(2)
    arrays = {
        "emb": np.array([[0.0, 0.0], [0.0, 0.0], [0.5, -0.5]]),
        "pos": np.array([[9.0, 9.0], [0.1, 0.2]]),
        "enc_W1": eye.copy(), "enc_b1": zero.copy(),
        "enc_W2": np.array([[1.0, 0.0], [0.0, 2.0]]), "enc_b2": np.array([0.1, 0.0]),
        "proj_W1": np.array([[1.0, 2.0], [0.0, 1.0]]), "proj_b1": zero.copy(),
        "proj_W2": eye.copy(), "proj_b2": zero.copy(),
    }
    return NetworkParams(cfg, arrays)


# -- forward ---------------------------------------------------------------------------


def test_single_token_hand_computed():
    # h0 = emb[a] + pos[last] = (0.6, -0.3); y = W2 tanh(h0) + b2
    y = encode(two_dim(), [0, 2])
    np.testing.assert_allclose(y, [0.6370495669980353, -0.5826252249031818], rtol=0, atol=1e-15)


def test_projector_hand_computed():
    z = project(two_dim(), np.array([0.5, 0.25]))
    np.testing.assert_allclose(z, [0.46211715726000974, 0.8482836399575129], rtol=0, atol=1e-15)


def test_identity_projector_gives_tanh():
    p = two_dim()
    p.arrays["proj_W1"] = np.eye(2)
    y = np.array([0.3, -1.2])
    np.testing.assert_array_equal(project(p, y), np.tanh(y))


def test_padding_invariance():
    for variant in (EMBED_POOL_MLP, ATTENTION):
        p = small(variant, L=6)
        a = encode(p, [2, 3, 4])
        b = encode(p, [0, 0, 2, 3, 4])
        c = encode(p, [0, 0, 0, 2, 3, 4])
        np.testing.assert_allclose(a, b, atol=1e-14)
        np.testing.assert_allclose(a, c, atol=1e-14)


def test_zero_weights_give_zero_output():
    p = small()
    for k in p.arrays:
        p.arrays[k][...] = 0.0
    np.testing.assert_array_equal(encode(p, [2, 3]), 0.0)


def test_contract_errors():
    p = small()
    with pytest.raises(ContractError):
        encode(p, [2, 9])
    with pytest.raises(ContractError):
        encode(p, [2, 2, 2, 2, 2])
    with pytest.raises(ContractError):
        encode(p, [0, 0])
    with pytest.raises(ContractError):
        predict(p.without_predictor(), np.ones(3))


# -- loss --------------------------------------------------------------------------------


def test_byol_loss_values():
    u = np.array([0.6, 0.8])
    assert byol_loss(u, u) == 0.0
    assert byol_loss(u, np.array([-0.8, 0.6])) == 2.0
    assert byol_loss(u, -u) == 4.0
    with pytest.raises(NumericalError):
        byol_loss(np.zeros(2), u)


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3), st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_byol_loss_range(a, b):
    a, b = np.array(a), np.array(b)
    if np.linalg.norm(a) < 1e-3 or np.linalg.norm(b) < 1e-3:
        return
    assert -1e-12 <= byol_loss(a, b) <= 4 + 1e-12
    assert byol_loss(a, 3.0 * a) == pytest.approx(0.0, abs=1e-12)


def _constant_heads(p, c):
    # projection and prediction both output the constant c
    for pre in ("proj", "pred"):
        p.arrays[f"{pre}_W2"][...] = 0.0
        p.arrays[f"{pre}_b2"][...] = c
    return p


def test_symmetric_loss_aligned_and_swapped():
    online = small(seed=1)
    target = online.without_predictor()
    v, vp = np.array([[0, 2, 3], [2, 3, 4]]), np.array([[3, 3, 2], [0, 0, 4]])
    a = symmetric_loss(online, target, v, vp)
    b = symmetric_loss(online, target, vp, v)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)
    # the two directional terms computed separately
    d1 = byol_loss(predict(online, project(online, encode(online, v))), project(target, encode(target, vp)))
    d2 = byol_loss(predict(online, project(online, encode(online, vp))), project(target, encode(target, v)))
    np.testing.assert_allclose(a, d1 + d2, atol=1e-14)

    c = np.array([0.3, -0.1, 0.7])
    aligned = _constant_heads(small(seed=2), c)
    assert symmetric_loss(aligned, aligned.without_predictor(), v, v).max() == pytest.approx(0.0, abs=1e-12)


def test_stationary_point_has_zero_gradient():
    c = np.array([0.3, -0.1, 0.7])
    online = _constant_heads(small(seed=2), c)
    loss, grads = loss_and_grads(online, online.without_predictor(), np.array([[2, 3, 4]]), np.array([[0, 3, 4]]))
    assert loss == pytest.approx(0.0, abs=1e-12)
    assert max(np.abs(g).max() for g in grads.values()) < 1e-12


def test_gradients_only_for_online_parameters():
    online = small()
    target = small(seed=9).without_predictor()
    _, grads = loss_and_grads(online, target, np.array([[2, 3]]), np.array([[3, 4]]))
    assert set(grads) == set(online.arrays)
    before = {k: a.copy() for k, a in target.arrays.items()}
    batch = pad_batch([ViewPair((2,), (2, 3), (3, 4))])
    assert set(backward(online, target, batch)) == set(online.arrays)
    assert all(np.array_equal(before[k], target[k]) for k in before)


@pytest.mark.parametrize("variant", [EMBED_POOL_MLP, ATTENTION])
@pytest.mark.parametrize("seed", range(4))
def test_gradient_check(variant, seed):
    online, target, v, vp = random_network(seed, variant)
    _, grads = loss_and_grads(online, target, v, vp)
    f = lambda: loss_and_grads(online, target, v, vp)[0]
    for key in online.arrays:
        assert relative_error(grads[key], finite_difference(f, online, key)) < 1e-4, key


def test_gradient_near_cosine_singularity_converges():
    # zero-bias init with a tiny prediction norm: h = 1e-4 is too coarse, but the
    # difference quotient converges to the analytic value at rate h^2
    rng = np.random.default_rng(0)
    online = small(ATTENTION, seed=0, d=2, h=3, vocab=5, L=4)
    target = small(ATTENTION, seed=100, d=2, h=3, vocab=5, L=4).without_predictor()
    v, vp = rng.integers(2, 5, size=(3, 4)), rng.integers(2, 5, size=(3, 4))
    v[0, :2] = 0
    _, grads = loss_and_grads(online, target, v, vp)
    f = lambda: loss_and_grads(online, target, v, vp)[0]
    errs = [relative_error(grads["enc_b1"], finite_difference(f, online, "enc_b1", h)) for h in (1e-3, 1e-4, 1e-5)]
    assert errs[0] > 50 * errs[1] > 2500 * errs[2]
    assert errs[2] < 1e-5


# -- EMA ----------------------------------------------------------------------------------


def test_ema_boundaries():
    theta = small(seed=1)
    xi = small(seed=2).without_predictor()
    out = ema_update(xi, theta, 0.0)
    assert all(np.array_equal(out[k], theta[k]) for k in out.arrays)
    assert not any(k in out for k in PREDICTOR_KEYS)
    same = ema_update(theta.without_predictor(), theta, 0.9)
    assert all(np.allclose(same[k], theta[k], rtol=0, atol=1e-15) for k in same.arrays)
    cfg = EncoderConfig(3, 1, 1, 1)
    scalar = lambda v: NetworkParams(cfg, {"w": np.array([v])})
    assert ema_update(scalar(1.0), scalar(0.0), 0.5)["w"][0] == 0.5
    with pytest.raises(ContractError):
        ema_update(xi, theta, 1.0)
    with pytest.raises(ContractError):
        ema_update(small(d=2).without_predictor(), small(d=3), 0.5)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([0.5, 0.9, 0.99]), st.integers(0, 1000))
def test_ema_contraction(tau, seed):
    theta = small(seed=seed)
    xi = small(seed=seed + 1).without_predictor()
    dist = lambda p: np.sqrt(sum(((p[k] - theta[k]) ** 2).sum() for k in p.arrays))
    assert dist(ema_update(xi, theta, tau)) <= tau * dist(xi) + 1e-12


# -- collapse ---------------------------------------------------------------------------------


def test_collapse_metric():
    p = small(seed=3)
    assert collapse_metric(p, np.array([[2, 3]] * 5)) == pytest.approx(0.0, abs=1e-15)
    assert collapse_metric(p, np.array([[2, 3], [3, 4], [4, 4], [0, 2]])) > 0
    collapsed = _constant_heads(small(seed=3), np.array([1.0, 2.0, 3.0]))
    assert collapse_metric(collapsed, np.array([[2, 3], [3, 4]])) == 0.0


def test_params_round_trip(tmp_path):
    p = small(ATTENTION)
    path = tmp_path / "p.json"
    p.save(path)
    q = NetworkParams.load(path)
    assert q.config == p.config
    assert all(np.array_equal(p[k], q[k]) for k in p.arrays)
