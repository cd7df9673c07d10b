import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradconflict.numkit import (
    ALGORITHM_ID,
    Batch,
    LayerSpec,
    MlpModel,
    PROB_EPS,
    Rng,
    SimplexWeights,
    bce_loss_and_grad,
    default_layers,
    simplex_project,
)
from oracles import bce_scalar, fd_grad, mlp_logits_loops, project_simplex_sort

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)


# ---------------------------------------------------------------- rng


def test_rng_stream_is_reproducible():
    a, b = Rng(7), Rng(7)
    assert [a.next_u64() for _ in range(100)] == [b.next_u64() for _ in range(100)]
    assert Rng(7).normals(33).tobytes() == Rng(7).normals(33).tobytes()
    assert Rng(8).next_u64() != Rng(7).next_u64()


def test_rng_reference_values():
    # splitmix64(0) -> 0xE220A8397B1DCDAF; one xorshift64* step from there.
    x = 0xE220A8397B1DCDAF
    x ^= x >> 12
    x ^= (x << 25) & 0xFFFFFFFFFFFFFFFF
    x ^= x >> 27
    assert Rng(0).next_u64() == (x * 0x2545F4914F6CDD1D) & 0xFFFFFFFFFFFFFFFF
    assert ALGORITHM_ID.startswith("xorshift64star")


def test_rng_uniform_and_below_ranges():
    r = Rng(3)
    u = [r.uniform() for _ in range(2000)]
    assert min(u) >= 0.0 and max(u) < 1.0
    counts = np.bincount([r.below(5) for _ in range(5000)], minlength=5)
    assert counts.min() > 850
    assert sorted(Rng(1).permutation(20).tolist()) == list(range(20))


def test_rng_normals_moments():
    z = Rng(11).normals(20000)
    assert abs(z.mean()) < 0.03
    assert abs(z.std() - 1.0) < 0.03


# ---------------------------------------------------------------- bce


def test_bce_max_entropy_point():
    loss, _ = bce_loss_and_grad([0.0], [1.0])
    assert loss == pytest.approx(math.log(2), abs=1e-12)


def test_bce_saturated_correct_prediction_is_tiny_and_finite():
    loss, grad = bce_loss_and_grad([30.0], [1.0])
    assert 0.0 <= loss <= 1e-6
    assert np.all(np.isfinite(grad))


def test_bce_p_point_eight():
    # logit ln 4 gives p = 0.8
    loss, _ = bce_loss_and_grad([math.log(4.0)], [1.0])
    assert loss == pytest.approx(-math.log(0.8), abs=1e-12)
    assert loss == pytest.approx(0.223144, abs=1e-6)


def test_bce_gradient_matches_scalar_fd():
    z = np.array([-2.0, 0.3, 1.7, -0.4])
    y = np.array([0.0, 1.0, 1.0, 0.0])
    _, g = bce_loss_and_grad(z, y)
    fd = fd_grad(lambda t: np.mean([bce_scalar(a, b) for a, b in zip(t, y)]), z, 1e-6)
    np.testing.assert_allclose(g, fd, rtol=1e-6)


def test_bce_errors():
    with pytest.raises(ValueError, match="empty batch"):
        bce_loss_and_grad([], [])
    with pytest.raises(ValueError):
        bce_loss_and_grad([0.0, 1.0], [1.0])
    with pytest.raises(ValueError):
        bce_loss_and_grad([0.0], [0.5])


@given(st.lists(st.tuples(st.floats(-50, 50), st.sampled_from([0.0, 1.0])), min_size=1, max_size=20))
def test_bce_nonnegative(pairs):
    z, y = zip(*pairs)
    loss, grad = bce_loss_and_grad(np.array(z), np.array(y))
    assert loss >= 0.0
    assert np.all(np.isfinite(grad))
    # zero loss is only reachable at the clamp floor
    assert loss >= -math.log(1 - PROB_EPS) * (1 - 1e-9)


# ---------------------------------------------------------------- mlp


def _random_batch(rng, n, d):
    return Batch(rng.normals(n * d).reshape(n, d), np.array([float(rng.below(2)) for _ in range(n)]))


def test_zero_network_gives_zero_logits():
    model = MlpModel(default_layers())
    logits, _ = model.forward(np.ones((5, 16)))
    assert np.all(logits == 0.0)


def test_identity_layer_then_classifier():
    layers = [LayerSpec(2, 2, "linear", "projection"), LayerSpec(2, 1, "linear", "classifier")]
    model = MlpModel(layers)
    w = [(np.eye(2), np.zeros(2)), (np.array([[0.3, -1.2]]), np.zeros(1))]
    model.set_params(model.flatten(w))
    logits, _ = model.forward(np.array([[1.0, 2.0]]))
    assert logits[0] == pytest.approx(0.3 * 1 - 1.2 * 2, abs=1e-15)


def test_forward_matches_loop_reevaluation():
    rng = Rng(5)
    model = MlpModel.init(rng)
    batch = _random_batch(rng, 7, 16)
    logits, _ = model.forward(batch)
    ref = mlp_logits_loops(model.layers, model.unflatten(), batch.inputs)
    np.testing.assert_allclose(logits, ref, atol=1e-12, rtol=0)


def test_forward_rejects_wrong_width():
    with pytest.raises(ValueError):
        MlpModel.init(Rng(0)).forward(np.zeros((2, 5)))


def test_flatten_unflatten_identity():
    model = MlpModel.init(Rng(9))
    np.testing.assert_array_equal(model.flatten(model.unflatten()), model.params)


def test_partition_is_disjoint_cover():
    model = MlpModel.init(Rng(0))
    covered = np.zeros(model.n_params, dtype=int)
    for sl in model.partition.values():
        covered[sl] += 1
    assert np.all(covered == 1)
    assert model.partition["projection"].stop - model.partition["projection"].start == 32 * 32 + 32 + 32 * 16 + 16


def test_default_init_bounds_and_zero_bias():
    model = MlpModel.init(Rng(2))
    for spec, (W, b) in zip(model.layers, model.unflatten()):
        assert np.all(np.abs(W) <= 1.0 / math.sqrt(spec.fan_in))
        assert np.all(b == 0.0)


def test_init_is_byte_identical_for_same_seed():
    assert MlpModel.init(Rng(42)).params.tobytes() == MlpModel.init(Rng(42)).params.tobytes()


def test_zero_upstream_gives_zero_gradient():
    model = MlpModel.init(Rng(1))
    _, cache = model.forward(np.ones((3, 16)))
    assert np.all(model.backward(cache, np.zeros(3)) == 0.0)


def test_scalar_affine_backward():
    model = MlpModel([LayerSpec(1, 1, "linear", "classifier")], np.array([2.0, 0.5]))
    _, cache = model.forward(np.array([[3.0]]))
    g = model.backward(cache, np.array([1.0]))
    # d(w x + b)/dw = x, d/db = 1
    np.testing.assert_array_equal(g, [3.0, 1.0])


def test_stale_cache_rejected():
    model = MlpModel.init(Rng(1))
    _, cache = model.forward(np.ones((2, 16)))
    model.step(np.ones(model.n_params), 0.1)
    with pytest.raises(ValueError, match="stale"):
        model.backward(cache, np.ones(2))


@pytest.mark.parametrize("seed", range(5))
def test_backward_matches_fd_on_default_model(seed):
    rng = Rng(100 + seed)
    model = MlpModel.init(rng)
    batch = _random_batch(rng, 6, 16)
    _, g = model.loss_and_grad(batch)
    probe = model.copy()

    def loss(theta):
        probe.set_params(theta)
        return bce_loss_and_grad(probe.forward(batch)[0], batch.labels)[0]

    theta = model.params.copy()
    idx = np.flatnonzero(np.abs(g) > 1e-6)[::7]
    fd = []
    for i in idx:
        tp, tm = theta.copy(), theta.copy()
        tp[i] += 1e-5
        tm[i] -= 1e-5
        fd.append((loss(tp) - loss(tm)) / 2e-5)
    np.testing.assert_allclose(fd, g[idx], rtol=1e-4)


# ---------------------------------------------------------------- simplex


def test_simplex_feasible_point_unchanged():
    assert simplex_project((0.5, 0.5)).as_tuple() == (0.5, 0.5)


def test_simplex_examples_match_sort_oracle():
    for raw, expected in (((0.7, 0.5), (0.6, 0.4)), ((2.0, -1.0), (1.0, 0.0))):
        oracle = project_simplex_sort(raw)
        np.testing.assert_allclose(oracle, expected, atol=1e-15)
        np.testing.assert_allclose(simplex_project(raw).as_tuple(), oracle, atol=1e-15)


def test_simplex_rejects_non_finite():
    with pytest.raises(ValueError):
        simplex_project((math.nan, 0.0))
    with pytest.raises(ValueError):
        simplex_project((math.inf, 0.0))


def test_simplex_weights_validation():
    with pytest.raises(ValueError):
        SimplexWeights(-0.1, 1.1)
    with pytest.raises(ValueError):
        SimplexWeights(0.5, 0.6)


@given(finite, finite)
def test_simplex_invariants_and_idempotence(a, b):
    mu = simplex_project((a, b))
    assert mu.mu1 >= 0 and mu.mu2 >= 0
    assert abs(mu.mu1 + mu.mu2 - 1.0) <= 1e-12
    assert simplex_project(mu.as_tuple()) == mu
    np.testing.assert_allclose(mu.as_tuple(), project_simplex_sort((a, b)), atol=1e-9 * (1 + abs(a) + abs(b)))


def test_simplex_minimality_against_grid():
    rng = np.random.default_rng(0)
    t = np.arange(1001) / 1000.0
    grid = np.stack([t, 1 - t], axis=1)
    for _ in range(1000):
        raw = rng.uniform(-3, 3, size=2)
        ours = np.linalg.norm(np.array(simplex_project(raw).as_tuple()) - raw)
        best = np.linalg.norm(grid - raw, axis=1).min()
        # no grid point strictly closer, up to rounding in the distance itself
        assert ours <= best + 1e-12


@settings(max_examples=50)
@given(st.integers(min_value=0, max_value=2**64 - 1))
def test_batch_labels_and_finiteness(seed):
    rng = Rng(seed)
    b = _random_batch(rng, 4, 3)
    assert set(np.unique(b.labels)) <= {0.0, 1.0}
    with pytest.raises(ValueError):
        Batch(np.array([[np.nan]]), np.array([0.0]))
