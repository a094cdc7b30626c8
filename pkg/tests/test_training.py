import copy
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from diffnets import (
    Arch,
    BlockParams,
    ConfigurationError,
    DimensionError,
    FluxKind,
    NetworkParams,
    NetworkSpec,
    NumericalError,
    Sharing,
    training,
)
from diffnets.networks import flatten, init_params
from diffnets.training import (
    AdamState,
    DatasetConfig,
    TrainConfig,
    adam_step,
    adam_update,
    classical_baselines,
    default_tau_ref,
    generate_dataset,
    loss_and_grad,
    mse,
    project_constraints,
    psnr,
    segment_lengths,
    temporal_penalty,
    train,
    write_metric_log,
)

from gradcheck import random_network
from oracles import central_gradient, relative_errors

SMALL = DatasetConfig(n_train=64, n_val=32, n_test=32, length=64, seed=3)


@pytest.fixture(scope="module")
def small_data():
    return generate_dataset(SMALL)


# ---------------------------------------------------------------- dataset

def test_zero_noise_gives_clean_signals():
    d = generate_dataset(DatasetConfig(n_train=5, n_val=2, n_test=2, noise_sigma=0.0))
    np.testing.assert_array_equal(d.train, d.train_clean)
    np.testing.assert_array_equal(d.test, d.test_clean)


def test_same_seed_same_dataset():
    a, b = generate_dataset(SMALL), generate_dataset(SMALL)
    for name in ("train", "train_clean", "val", "val_clean", "test", "test_clean"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))


def test_split_shapes_and_value_range(small_data):
    assert small_data.train.shape == (64, 64)
    assert small_data.val.shape == small_data.test.shape == (32, 64)
    assert small_data.train_clean.min() >= 0 and small_data.train_clean.max() <= 255
    # noise is not clipped
    assert small_data.train.min() < 0 or small_data.train.max() > 255


def test_noise_level(small_data):
    assert np.std(small_data.train - small_data.train_clean) == pytest.approx(10.0, rel=0.05)


def test_default_config_matches_benchmark():
    cfg = DatasetConfig()
    assert (cfg.n_train, cfg.n_val, cfg.n_test, cfg.length, cfg.noise_sigma) == (10000, 1000, 1000, 256, 10.0)
    assert cfg.segment_bounds == (26, 128)


@given(st.integers(10, 400), st.integers(0, 2**32 - 1))
def test_segment_lengths_within_bounds(n, seed):
    lo, hi = max(1, math.ceil(n / 10)), n // 2
    parts = segment_lengths(n, lo, hi, np.random.default_rng(seed))
    assert sum(parts) == n
    assert all(lo <= m <= hi for m in parts)


def test_dataset_config_validation():
    with pytest.raises(ConfigurationError):
        DatasetConfig(noise_sigma=-1)
    with pytest.raises(ConfigurationError):
        DatasetConfig(length=1)
    with pytest.raises(ConfigurationError):
        DatasetConfig(seg_min_frac=0.6, seg_max_frac=0.5)


def test_subset_keeps_evaluation_splits(small_data):
    s = small_data.subset(10)
    assert s.train.shape[0] == 10
    assert s.val is small_data.val


# ---------------------------------------------------------------- metrics

def test_identical_signals():
    a = np.arange(10.0)
    assert mse(a, a) == 0 and psnr(a, a) == math.inf


def test_offset_255_is_zero_db():
    assert psnr(np.zeros(7), np.full(7, 255.0)) == 0.0


def test_offset_16():
    assert psnr(np.zeros(7), np.full(7, 16.0)) == pytest.approx(10 * math.log10(255**2 / 256), abs=1e-12)
    assert psnr(np.zeros(7), np.full(7, 16.0)) == pytest.approx(24.03, abs=0.02)


def test_shape_mismatch():
    with pytest.raises(DimensionError):
        mse(np.zeros(3), np.zeros(4))


@given(st.floats(1e-6, 1e6), st.floats(1.0001, 100))
def test_psnr_strictly_decreasing_in_mse(m, factor):
    assert training.psnr_from_mse(m * factor) < training.psnr_from_mse(m)


# ---------------------------------------------------------------- temporal penalty

def two_scalar_blocks(d):
    return NetworkParams([BlockParams(np.array([[[0.0, 1.0, 0.0]]]), lam=2.0, tau=0.1),
                          BlockParams(np.array([[[0.0, 1.0 + d, 0.0]]]), lam=2.0, tau=0.7)])


DYN = NetworkSpec(Arch.SYMRESNET, 2, sharing=Sharing.TIME_DYNAMIC, length=16)


def test_penalty_single_difference():
    assert temporal_penalty(DYN, two_scalar_blocks(0.3), 10.0, 0.5) == pytest.approx(10 * 0.09 / 0.5)


def test_penalty_ignores_time_step():
    p = two_scalar_blocks(0.0)
    assert temporal_penalty(DYN, p, 10.0, 1.0) == 0.0


def test_penalty_linear_in_beta():
    p = two_scalar_blocks(0.4)
    assert temporal_penalty(DYN, p, 6.0, 1.0) == pytest.approx(2 * temporal_penalty(DYN, p, 3.0, 1.0), rel=1e-15)


def test_penalty_zero_for_shared():
    spec = NetworkSpec(Arch.SYMRESNET, 2, sharing=Sharing.SHARED, length=16)
    assert temporal_penalty(spec, two_scalar_blocks(1.0), 10.0, 1.0) == 0.0


def test_penalty_includes_lambda_and_biases():
    p = two_scalar_blocks(0.0)
    p.blocks[1].lam = 3.0
    assert temporal_penalty(DYN, p, 1.0, 1.0) == pytest.approx(1.0)
    spec = NetworkSpec(Arch.RESNET, 2, sharing=Sharing.TIME_DYNAMIC, length=16)
    q = init_params(spec, np.random.default_rng(0))
    q.blocks[1] = copy.deepcopy(q.blocks[0])
    q.blocks[1].bias_out = q.blocks[1].bias_out + 2.0
    assert temporal_penalty(spec, q, 1.0, 0.5) == pytest.approx(8.0)


def test_default_reference_step():
    assert default_tau_ref(NetworkSpec(Arch.RESNET, 4)) == 0.25
    assert default_tau_ref(NetworkSpec(Arch.SYMRESNET, 4)) == 1.0


@pytest.mark.parametrize("arch", list(Arch))
def test_loss_gradient_with_penalty(arch):
    spec = NetworkSpec(arch, 3, 2, Sharing.TIME_DYNAMIC, length=10)
    rng = np.random.default_rng(1)
    params = random_network(spec, rng)
    x = rng.normal(scale=3, size=(4, 10))
    y = x + rng.normal(size=x.shape)

    def loss(theta):
        return loss_and_grad(spec, training.unflatten(spec, theta, params), x, y, 2.0, 0.5)[0]

    _, grads = loss_and_grad(spec, params, x, y, 2.0, 0.5)
    fd = central_gradient(loss, flatten(spec, params))
    assert np.max(relative_errors(flatten(spec, grads), fd)) <= 1e-5


def test_threaded_reduction_is_deterministic():
    from concurrent.futures import ThreadPoolExecutor
    spec = NetworkSpec(Arch.SYMRESNET, 3, 2, Sharing.TIME_DYNAMIC, length=16)
    rng = np.random.default_rng(2)
    params = random_network(spec, rng)
    x = rng.normal(size=(37, 16))
    y = rng.normal(size=(37, 16))
    with ThreadPoolExecutor(4) as pool:
        runs = [loss_and_grad(spec, params, x, y, 1.0, 1.0, threads=4, pool=pool) for _ in range(3)]
    serial = loss_and_grad(spec, params, x, y, 1.0, 1.0)
    for loss, g in runs:
        assert loss == runs[0][0]
        np.testing.assert_array_equal(flatten(spec, g), flatten(spec, runs[0][1]))
    assert runs[0][0] == pytest.approx(serial[0], rel=1e-13)


# ---------------------------------------------------------------- Adam

def test_adam_zero_gradient():
    state = AdamState.zeros(3)
    state.m[:] = 1.0
    state.v[:] = 4.0
    theta = np.array([1.0, 2.0, 3.0])
    out = adam_update(theta, np.zeros(3), state, 0.1)
    np.testing.assert_allclose(state.m, 0.9)
    np.testing.assert_allclose(state.v, 4 * 0.999)
    # momentum still moves the parameters; with a fresh state nothing moves
    assert np.all(out < theta)
    np.testing.assert_array_equal(adam_update(theta, np.zeros(3), AdamState.zeros(3), 0.1), theta)


@given(st.floats(-1e3, 1e3).filter(lambda g: abs(g) > 1e-3), st.floats(1e-5, 1e-1))
def test_adam_first_step_is_signed_lr(g, lr):
    out = adam_update(np.zeros(1), np.array([g]), AdamState.zeros(1), lr)
    assert out[0] == pytest.approx(-lr * math.copysign(1, g), rel=1e-4)


def test_adam_identical_scalars_stay_identical():
    rng = np.random.default_rng(0)
    theta, state = np.full(2, 0.3), AdamState.zeros(2)
    for _ in range(20):
        theta = adam_update(theta, np.full(2, rng.normal()), state, 1e-2)
    assert theta[0] == theta[1]


def test_adam_shape_check():
    with pytest.raises(DimensionError):
        adam_update(np.zeros(2), np.zeros(3), AdamState.zeros(2), 0.1)


def test_adam_step_on_params():
    spec = NetworkSpec(Arch.SYMRESNET, 1)
    params = init_params(spec, np.random.default_rng(0))
    grads = training.unflatten(spec, np.ones(5), params)
    new, state = adam_step(spec, params, grads, AdamState.zeros(5), 0.01)
    np.testing.assert_allclose(flatten(spec, new), flatten(spec, params) - 0.01, rtol=1e-6)
    assert state.t == 1


# ---------------------------------------------------------------- projection

def test_projection_clamps_tau():
    spec = NetworkSpec(Arch.SYMRESNET, 1, length=64)
    p = NetworkParams([BlockParams(np.array([[[0.0, -1.0, 1.0]]]), lam=5.0, tau=10.0)])
    out = project_constraints(spec, p)
    # |K|^2 of the forward difference approaches 4 from below
    assert 0.5 <= out.blocks[0].tau <= 0.5 + 1e-3
    p.blocks[0].kernel = np.array([[[0.0, -0.5, 0.5]]])
    assert project_constraints(spec, p).blocks[0].tau == pytest.approx(2.0, rel=1e-3)


def test_projection_fsi_range():
    spec = NetworkSpec(Arch.FSINET, 3, length=16)
    p = init_params(spec, np.random.default_rng(0))
    p.extrapolation = np.array([2.5, -0.5])
    np.testing.assert_array_equal(project_constraints(spec, p).extrapolation, [2.0, 0.0])


def test_projection_df_alpha_minimum():
    # Gershgorin-rescaled forward difference: norm bound exactly 1
    spec = NetworkSpec(Arch.DFNET, 1, length=32, stability_mode="gershgorin")
    p = NetworkParams([BlockParams(np.array([[[0.0, -0.5, 0.5]]]), lam=5.0, tau=0.1, alpha=0.01)])
    out = project_constraints(spec, p)
    assert out.blocks[0].alpha == pytest.approx(0.25)


def test_projection_lambda_floor():
    spec = NetworkSpec(Arch.SYMRESNET, 1)
    p = NetworkParams([BlockParams(np.zeros((1, 1, 3)), lam=-3.0, tau=1.0)])
    assert project_constraints(spec, p).blocks[0].lam == 1e-4


@given(st.integers(0, 2**32 - 1), st.sampled_from(list(Arch)), st.sampled_from(list(Sharing)))
def test_projection_idempotent(seed, arch, sharing):
    spec = NetworkSpec(arch, 3, 2, sharing, length=20)
    rng = np.random.default_rng(seed)
    p = init_params(spec, rng, kernel_range=3.0, lam=rng.uniform(-1, 5), tau=rng.uniform(0, 20),
                    alpha=rng.uniform(-1, 3))
    p.extrapolation = rng.uniform(-1, 3, spec.n_extrapolation)
    once = project_constraints(spec, p)
    twice = project_constraints(spec, once)
    np.testing.assert_array_equal(flatten(spec, once), flatten(spec, twice))


# ---------------------------------------------------------------- training

def test_zero_learning_rate_keeps_initialisation(small_data):
    spec = NetworkSpec(Arch.SYMRESNET, 2, sharing=Sharing.TIME_DYNAMIC, length=64)
    cfg = TrainConfig(lr=0.0, max_epochs=3, restarts=1, seed=4)
    res = train(spec, small_data, cfg)
    init = project_constraints(spec, init_params(spec, np.random.default_rng([4, 0]), cfg.kernel_range,
                                                 cfg.lam0, cfg.tau0, cfg.alpha0))
    np.testing.assert_array_equal(flatten(spec, res.params), flatten(spec, init))
    assert len(res.log) == 3


def test_training_is_reproducible(small_data):
    spec = NetworkSpec(Arch.SYMRESNET, 1, length=64)
    cfg = TrainConfig(lr=1e-2, max_epochs=4, restarts=2, seed=5)
    a, b = train(spec, small_data, cfg), train(spec, small_data, cfg)
    np.testing.assert_array_equal(flatten(spec, a.params), flatten(spec, b.params))
    assert a.log == b.log


def test_loss_trend_decreases(small_data):
    spec = NetworkSpec(Arch.SYMRESNET, 2, sharing=Sharing.TIME_DYNAMIC, length=64)
    res = train(spec, small_data, TrainConfig(lr=5e-3, max_epochs=50, restarts=1, patience=50, seed=6))
    losses = np.array([row[1] for row in res.log])
    assert losses[-10:].mean() < losses[:10].mean()
    # epoch-averaged trend: allow stochastic wiggles of a few percent
    windows = losses[: len(losses) // 10 * 10].reshape(-1, 10).mean(axis=1)
    assert np.all(np.diff(windows) <= 0.05 * windows[:-1])


def test_nan_loss_aborts_restart(small_data, monkeypatch):
    spec = NetworkSpec(Arch.SYMRESNET, 1, length=64)
    real = training.loss_and_grad
    calls = {"n": 0}

    def flaky(*args, **kwargs):
        calls["n"] += 1
        loss, g = real(*args, **kwargs)
        return (math.nan if calls["n"] == 1 else loss), g

    monkeypatch.setattr(training, "loss_and_grad", flaky)
    res = train(spec, small_data, TrainConfig(max_epochs=1, restarts=2))
    assert res.failed == [0] and res.restart == 1
    monkeypatch.setattr(training, "loss_and_grad", lambda *a, **k: (math.inf, None))
    with pytest.raises(NumericalError):
        train(spec, small_data, TrainConfig(max_epochs=1, restarts=2))


def test_on_epoch_callback(small_data):
    seen = []
    train(NetworkSpec(Arch.SYMRESNET, 1, length=64), small_data,
          TrainConfig(max_epochs=2, restarts=1), on_epoch=lambda *row: seen.append(row))
    assert [r[:2] for r in seen] == [(0, 1), (0, 2)]


def test_train_config_validation():
    with pytest.raises(ConfigurationError):
        TrainConfig(lr=-1)
    with pytest.raises(ConfigurationError):
        TrainConfig(restarts=0)


def test_metric_log(tmp_path):
    write_metric_log(tmp_path / "log.csv", [(1, 2.5, 30.25), (2, 2.0, math.inf)])
    assert (tmp_path / "log.csv").read_text() == "epoch,train_mse,val_psnr\n1,2.5,30.25\n2,2.0,inf\n"


@pytest.mark.slow
def test_one_block_pm_beats_linear_baseline():
    data = generate_dataset(DatasetConfig(n_train=500, n_val=200, n_test=200, seed=7))
    linear = classical_baselines(data, FluxKind.LINEAR)
    spec = NetworkSpec(Arch.SYMRESNET, 1, flux=FluxKind.PERONA_MALIK)
    res = train(spec, data, TrainConfig(max_epochs=40, restarts=1, seed=7, lr=1e-2))
    out = training.predict(spec, res.params, data.test)
    assert psnr(out, data.test_clean) > linear.test_psnr


# ---------------------------------------------------------------- baselines

def test_baseline_rejects_relu(small_data):
    with pytest.raises(ConfigurationError):
        classical_baselines(small_data, FluxKind.RELU)


def test_baseline_rejects_unstable_step(small_data):
    with pytest.raises(ConfigurationError):
        classical_baselines(small_data, "linear", tau=1.0)


def test_baseline_improves_on_noisy_input(small_data):
    res = classical_baselines(small_data, "pm", lambdas=(5.0, 10.0), max_time=20)
    assert res.val_psnr > psnr(small_data.val, small_data.val_clean)
    assert res.lam in (5.0, 10.0) and res.steps >= 1
