import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from gradconflict.bench import (
    TRAJECTORY_COLUMNS,
    BenchDatasets,
    LandscapeId,
    SynthBenchConfig,
    auc,
    gen_synth_bench,
    load_bench,
    make_toy_landscape,
    save_bench,
    trajectory_dump,
)
from gradconflict.cgr import conflict_cosine
from gradconflict.trainer import Strategy, TrainConfig, train
from oracles import auc_pairs, least_squares_probe

LANDSCAPES = list(LandscapeId)


# ------------------------------------------------------------ landscapes


def test_split_quadratic_origin():
    ls = make_toy_landscape("SplitQuadratic")
    o = np.zeros(2)
    np.testing.assert_array_equal(ls.grad1(o), [-2.0, 0.0])
    np.testing.assert_array_equal(ls.grad2(o), [2.0, 0.0])
    assert conflict_cosine(ls.grad1(o), ls.grad2(o)).cosine == -1.0
    assert ls.loss1(o) == 1.0 and ls.loss2(o) == 1.0


def test_landscape_parse():
    assert LandscapeId.parse("bananapair") is LandscapeId.BANANA_PAIR
    assert make_toy_landscape(LandscapeId.SPLIT_QUADRATIC).id is LandscapeId.SPLIT_QUADRATIC
    with pytest.raises(ValueError):
        LandscapeId.parse("Himmelblau")


@pytest.mark.parametrize("lid", LANDSCAPES)
def test_landscape_gradients_match_fd(lid):
    ls = make_toy_landscape(lid)
    rng = np.random.default_rng(1)
    h = 1e-6
    for _ in range(200):
        t = rng.uniform(-2, 2, size=2)
        for loss, grad in ((ls.loss1, ls.grad1), (ls.loss2, ls.grad2)):
            g = grad(t)
            fd = np.array([(loss(t + h * e) - loss(t - h * e)) / (2 * h) for e in np.eye(2)])
            assert np.linalg.norm(fd - g) <= 1e-6 * max(np.linalg.norm(g), 1.0)


@pytest.mark.parametrize("lid", LANDSCAPES)
def test_landscape_losses_nonnegative_and_conflicting(lid):
    ls = make_toy_landscape(lid)
    rng = np.random.default_rng(2)
    pts = rng.uniform(-2, 2, size=(500, 2))
    if lid is LandscapeId.BANANA_PAIR:
        assert all(ls.loss1(t) >= 0 and ls.loss2(t) >= 0 for t in pts)
    assert any(ls.grad1(t) @ ls.grad2(t) < 0 for t in pts)


# ------------------------------------------------------------ generator


def test_generation_is_byte_identical():
    cfg = SynthBenchConfig(seed=7, n_per_class=64)
    a, b = gen_synth_bench(cfg), gen_synth_bench(cfg)
    for name in BenchDatasets.SPLITS:
        x, y = getattr(a, name), getattr(b, name)
        assert x.inputs.tobytes() == y.inputs.tobytes()
        assert x.labels.tobytes() == y.labels.tobytes()


def test_different_seeds_differ():
    a = gen_synth_bench(SynthBenchConfig(seed=1, n_per_class=8))
    b = gen_synth_bench(SynthBenchConfig(seed=2, n_per_class=8))
    assert a.subset_X.inputs.tobytes() != b.subset_X.inputs.tobytes()


def test_split_shapes_and_labels(default_bench):
    d = default_bench
    n = d.config.n_per_class
    assert len(d.subset_X) == len(d.subset_Xp) == len(d.target_test) == 2 * n
    assert len(d.source_test) == 3 * n
    assert d.subset_X.labels.sum() == n and d.source_test.labels.sum() == 2 * n
    assert all(b.dim == 16 for b in d.splits().values())


def test_reals_share_distribution(default_bench):
    n = default_bench.config.n_per_class
    r1 = default_bench.subset_X.inputs[:n]
    r2 = default_bench.subset_Xp.inputs[:n]
    se = 0.5 / np.sqrt(n)
    assert np.all(np.abs(r1.mean(0)) < 5 * se) and np.all(np.abs(r2.mean(0)) < 5 * se)
    assert np.allclose(r1.std(0), 0.5, rtol=0.15) and np.allclose(r2.std(0), 0.5, rtol=0.15)


def test_zero_conflict_equalizes_cue():
    d = gen_synth_bench(SynthBenchConfig(conflict_strength=0.0, seed=3))
    n = d.config.n_per_class
    fa = d.subset_X.inputs[n:, 0].mean()
    fb = d.subset_Xp.inputs[n:, 0].mean()
    se = 0.5 / np.sqrt(n)
    assert abs(fa) < 5 * se and abs(fb) < 5 * se and abs(fa - fb) < 7 * se


def test_target_fakes_have_no_cue(default_bench):
    n = default_bench.config.n_per_class
    tf = default_bench.target_test.inputs[n:]
    assert abs(tf[:, 0].mean()) < 5 * 0.5 / np.sqrt(n)
    assert np.all(tf[:, 9:13].mean(0) > 0.8)


def _logistic_probe(x, y, l2=1e-3):
    xa = np.hstack([x, np.ones((x.shape[0], 1))])

    def f(w):
        z = xa @ w
        loss = np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * w[:-1] @ w[:-1]
        p = 0.5 * (1 + np.tanh(0.5 * z))
        g = xa.T @ (p - y) / len(y)
        g[:-1] += l2 * w[:-1]
        return loss, g

    return minimize(f, np.zeros(xa.shape[1]), jac=True, method="L-BFGS-B").x[:-1]


def test_cue_probe_signs():
    d = gen_synth_bench(SynthBenchConfig(conflict_strength=1.0, noise_sigma=0.1, n_per_class=512, seed=42))
    for batch, sign in ((d.subset_X, 1.0), (d.subset_Xp, -1.0)):
        assert sign * _logistic_probe(batch.inputs, batch.labels)[0] > 0
        assert sign * least_squares_probe(batch.inputs, batch.labels)[0] > 0


@pytest.mark.parametrize("bad", [dict(dim=8), dict(conflict_strength=1.5), dict(n_per_class=0), dict(noise_sigma=0.0)])
def test_invalid_config(bad):
    with pytest.raises(ValueError):
        SynthBenchConfig(**bad)


def test_save_load_round_trip(tmp_path):
    d = gen_synth_bench(SynthBenchConfig(seed=11, n_per_class=20))
    bin_path, meta_path = save_bench(d, tmp_path / "bench")
    assert bin_path.stat().st_size == 8 * sum(len(b) * (b.dim + 1) for b in d.splits().values())
    back = load_bench(tmp_path / "bench")
    assert back.config == d.config
    for name in BenchDatasets.SPLITS:
        a, b = getattr(d, name), getattr(back, name)
        np.testing.assert_array_equal(a.inputs, b.inputs)
        np.testing.assert_array_equal(a.labels, b.labels)
        assert a.subset_tag is b.subset_tag
    first = np.frombuffer(bin_path.read_bytes(), dtype="<f8", count=3)
    np.testing.assert_array_equal(first, d.subset_X.inputs[:3, 0])  # column-major


def test_conflict_realization(default_bench):
    _, rep = train(TrainConfig(steps=50), default_bench, Strategy.NAIVE_JOINT)
    negative = sum(r.cosine < 0 for r in rep.rows)
    assert negative >= 40, f"{negative}/50 steps with negative cosine"


# ------------------------------------------------------------ auc


def test_auc_examples():
    assert auc([0.9, 0.8], [1, 0]) == 1.0
    assert auc([0.3] * 6, [0, 1, 0, 1, 1, 0]) == 0.5
    assert auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75


def test_auc_errors():
    with pytest.raises(ValueError):
        auc([0.1, 0.2], [1, 1])
    with pytest.raises(ValueError):
        auc([0.1, 0.2], [0, 2])
    with pytest.raises(ValueError):
        auc([0.1], [0, 1])


score_lists = st.lists(st.floats(-5, 5, allow_nan=False), min_size=4, max_size=30)


@settings(max_examples=200)
@given(score_lists, st.integers(0, 2 ** 31))
def test_auc_matches_pairwise_oracle(scores, seed):
    labels = np.random.default_rng(seed).integers(0, 2, len(scores))
    labels[0], labels[1] = 0, 1
    assert auc(scores, labels) == pytest.approx(auc_pairs(scores, labels), abs=1e-12)


@settings(max_examples=200)
@given(st.lists(st.integers(-50, 50), min_size=4, max_size=30), st.integers(0, 2 ** 31),
       st.floats(0.1, 10), st.floats(-3, 3))
def test_auc_monotone_invariance(scores, seed, a, b):
    # scores on a 0.1 grid so that exp and affine maps cannot merge distinct values
    s = np.array(scores) / 10.0
    labels = np.random.default_rng(seed).integers(0, 2, len(s))
    labels[0], labels[1] = 0, 1
    base = auc(s, labels)
    assert auc(np.exp(s), labels) == pytest.approx(base, abs=1e-12)
    assert auc(a * s + b, labels) == pytest.approx(base, abs=1e-12)


@settings(max_examples=200)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=4, max_size=30, unique=True), st.integers(0, 2 ** 31))
def test_auc_negation_complements(scores, seed):
    labels = np.random.default_rng(seed).integers(0, 2, len(scores))
    labels[0], labels[1] = 0, 1
    s = np.array(scores)
    assert auc(s, labels) + auc(-s, labels) == pytest.approx(1.0, abs=1e-12)


# ------------------------------------------------------------ trajectory


def test_trajectory_dump_writes_rows():
    buf = io.StringIO()
    rows = trajectory_dump(make_toy_landscape("SplitQuadratic"), "naive", 20, 0.01, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == ",".join(TRAJECTORY_COLUMNS)
    assert len(lines) == 21 and len(rows) == 20
    assert rows[0][1:3] == (0.5, 2.0)
