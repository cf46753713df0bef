"""
Tests for SGD, schedules, checkpoints and the training loop.
"""

import math
from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from app.blocks import build_model
from app.core.errors import (
    CheckpointError,
    CheckpointMismatchError,
    ConfigurationError,
    NonFiniteGradientError,
)
from app.data import load_splits, synth_blobs, write_cifar_binary
from app.data.cifar import cifar_files
from app.engine import Parameter
from app.models.schemas import ModelConfig, ScheduleKind, TrainConfig, Variant, load_config
from app.training import (
    OptimizerState,
    Schedule,
    evaluate,
    load_checkpoint,
    restore_checkpoint,
    save_checkpoint,
    schedule_lr,
    sgd_step,
    train,
)
from app.training.checkpoint import manifest_path
from app.training.trainer import _diverged

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture
def blobs():
    train_set = synth_blobs(classes=3, per_class=4, size=8, seed=0)
    test_set = synth_blobs(classes=3, per_class=2, size=8, seed=0, split="test", stats=train_set.stats)
    return train_set, test_set


def test_momentum_on_a_quadratic_matches_closed_form():
    """On f(p) = p^2 / 2 with lr 0.1 and momentum 0.9, p_k = 0.9^(k/2) cos(k atan(1/3))."""
    p = Parameter(np.array([1.0]), "p", "A", dtype=np.float64)
    state = OptimizerState(lr=0.1, momentum=0.9, weight_decay=0.0)
    theta = math.atan(1.0 / 3.0)
    for k in range(1, 151):
        sgd_step([p], {"p": p.data.copy()}, state)
        if k <= 40:
            assert p.data[0] == pytest.approx(0.9 ** (k / 2) * math.cos(k * theta), abs=1e-12)
    assert abs(p.data[0]) < 1e-3
    assert state.step == 150


def test_weight_decay_skips_exempt_and_frozen_parameters():
    weight = Parameter(np.ones(2), "w", "A", dtype=np.float64)
    gamma = Parameter(np.ones(2), "bn.gamma", "BN", decay=False, dtype=np.float64)
    frozen = Parameter(np.ones(2), "f", "A", frozen=True, dtype=np.float64)
    zeros = {name: np.zeros(2) for name in ("w", "bn.gamma", "f")}
    sgd_step([weight, gamma, frozen], zeros, OptimizerState(lr=0.1, momentum=0.0, weight_decay=0.1))
    assert_allclose(weight.data, 0.99)
    assert_array_equal(gamma.data, 1.0)
    assert_array_equal(frozen.data, 1.0)


def test_non_finite_gradient_stops_before_any_update():
    first = Parameter(np.ones(3), "a", "A", dtype=np.float64)
    second = Parameter(np.ones(3), "b", "B", dtype=np.float64)
    grads = {"a": np.ones(3), "b": np.array([0.0, np.nan, np.inf])}
    with pytest.raises(NonFiniteGradientError, match="'b'.*1 NaN, 1 Inf"):
        sgd_step([first, second], grads, OptimizerState(lr=0.1))
    assert_array_equal(first.data, 1.0)


def test_gradient_shape_must_match():
    p = Parameter(np.ones(3), "p", "A")
    with pytest.raises(ConfigurationError, match="shape"):
        sgd_step([p], {"p": np.ones(4)}, OptimizerState(lr=0.1))


def test_optimizer_rejects_bad_hyperparameters():
    with pytest.raises(ConfigurationError):
        OptimizerState(lr=-1.0)
    with pytest.raises(ConfigurationError):
        OptimizerState(lr=0.1, momentum=1.0)


def test_cosine_schedule_endpoints():
    schedule = Schedule(kind=ScheduleKind.COSINE, base_lr=0.05, epochs=400)
    assert schedule_lr(schedule, 0) == pytest.approx(0.05)
    assert schedule_lr(schedule, 200) == pytest.approx(0.025)
    assert schedule_lr(schedule, 400) == pytest.approx(0.0, abs=1e-15)
    assert schedule_lr(schedule, 999) == schedule_lr(schedule, 400)


def test_step_schedule():
    schedule = Schedule(kind=ScheduleKind.STEP, base_lr=0.05, factor=0.1, period=25)
    assert schedule_lr(schedule, 24) == pytest.approx(0.05)
    assert schedule_lr(schedule, 26) == pytest.approx(0.005)
    assert schedule_lr(schedule, 50) == pytest.approx(0.0005)


def test_schedule_from_config():
    schedule = Schedule.from_config(TrainConfig(schedule=ScheduleKind.STEP, lr=0.1, step_period=10))
    assert schedule.kind is ScheduleKind.STEP
    assert schedule_lr(schedule, 10) == pytest.approx(0.01)


def test_zero_learning_rate_keeps_weights(small_mgiad, blobs):
    model = build_model(small_mgiad, seed=1)
    before = {name: p.data.copy() for name, p in model.registry.items()}
    config = TrainConfig(epochs=2, lr=0.0, batch_size=12)
    log = train(model, *blobs, config, seed=1)
    assert len(log.records) == 2
    for name, param in model.registry.items():
        assert_array_equal(param.data, before[name])


def test_training_is_deterministic(small_mgiad, blobs, tmp_path):
    config = TrainConfig(epochs=2, lr=0.05, batch_size=5)
    logs = []
    for run in ("a", "b"):
        model = build_model(small_mgiad, seed=3)
        log = train(model, *blobs, config, seed=3, augment=True, output_dir=tmp_path / run)
        logs.append((tmp_path / run / "log.csv").read_text())
        assert log.to_csv() == logs[-1]
    assert logs[0] == logs[1]
    assert logs[0].splitlines()[0] == "epoch,lr,train_loss,train_acc,test_acc"


def test_evaluation_leaves_the_model_untouched(small_mgiad, blobs):
    model = build_model(small_mgiad)
    params = {name: p.data.copy() for name, p in model.registry.items()}
    buffers = {name: b.copy() for name, b in model.registry.buffers().items()}
    result = evaluate(model, blobs[1], batch_size=4)
    assert result.samples == 6
    assert 0.0 <= result.accuracy <= 1.0
    for name, param in model.registry.items():
        assert_array_equal(param.data, params[name])
    for name, buffer in model.registry.buffers().items():
        assert_array_equal(buffer, buffers[name])


def test_checkpoints_restore_parameters_statistics_and_momentum(small_mgiad, blobs, tmp_path):
    model = build_model(small_mgiad, seed=2)
    train(model, *blobs, TrainConfig(epochs=2, batch_size=6, checkpoint_every=1), seed=2, output_dir=tmp_path)
    assert (tmp_path / "epoch0001.mgck").is_file()
    path = tmp_path / "final.mgck"
    assert manifest_path(path).read_text().startswith("MGCK v1 epoch=2 step=4")

    checkpoint = load_checkpoint(path)
    assert checkpoint.epoch == 2
    fresh = build_model(small_mgiad, seed=99)
    state = OptimizerState(lr=0.1)
    restore_checkpoint(fresh, checkpoint, state)
    for name, param in model.registry.items():
        assert_array_equal(fresh.registry[name].data, param.data)
    for name, buffer in model.registry.buffers().items():
        assert_array_equal(fresh.registry.buffers()[name], buffer)
    assert state.step == 4
    assert set(state.buffers) <= set(fresh.registry.names())
    assert evaluate(fresh, blobs[1]) == evaluate(model, blobs[1])


def test_checkpoint_of_another_architecture_is_rejected(small_mgiad, tmp_path):
    path = save_checkpoint(tmp_path / "m.mgck", build_model(small_mgiad))
    other = ModelConfig(variant=Variant.MGNET, levels=2, channels=[8, 16], nu=2, num_classes=3, input_size=8)
    with pytest.raises(CheckpointMismatchError):
        restore_checkpoint(build_model(other), load_checkpoint(path))
    wider = small_mgiad.model_copy(update={"channels": [8, 32]})
    with pytest.raises(CheckpointMismatchError, match="shape"):
        restore_checkpoint(build_model(wider), load_checkpoint(path))


def test_corrupt_checkpoints(small_mgiad, tmp_path):
    path = save_checkpoint(tmp_path / "m.mgck", build_model(small_mgiad))
    raw = path.read_bytes()
    path.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(CheckpointError, match="not a checkpoint"):
        load_checkpoint(path)
    path.write_bytes(raw[:-7])
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
    path.write_bytes(raw[:10])
    with pytest.raises(CheckpointError, match="too short"):
        load_checkpoint(path)


def test_divergence_needs_consecutive_epochs_above_the_factor():
    assert _diverged([1.0, 20.0, 30.0, 40.0], factor=10.0, patience=3)
    assert not _diverged([1.0, 20.0, 5.0, 40.0], factor=10.0, patience=3)
    assert not _diverged([1.0, 20.0, 30.0], factor=10.0, patience=3)


@pytest.mark.slow
def test_synthetic_blobs_are_learned_to_full_accuracy():
    config = load_config(CONFIG_DIR / "mgiad-synth.yaml")
    train_set, test_set = load_splits(config.data, seed=config.run.seed)
    assert len(train_set) == 64
    log = train(build_model(config.model, seed=config.run.seed), train_set, test_set, config.train)
    assert len(log.records) <= 50
    assert max(r.train_acc for r in log.records) == 1.0


def test_zeroed_model_predicts_the_first_class_at_chance(small_mgiad):
    config = small_mgiad.model_copy(update={"num_classes": 10})
    model = build_model(config, seed=0)
    for param in model.registry:
        if param.role != "BN":
            param.data[...] = 0.0
    dataset = synth_blobs(classes=10, per_class=3, size=8, seed=1)
    result = evaluate(model, dataset, batch_size=7)
    assert result.samples == 30
    assert result.accuracy == pytest.approx(0.1)
    assert result.loss == pytest.approx(math.log(10), rel=1e-6)


def test_training_loss_halves_on_synthetic_blobs():
    config = load_config(CONFIG_DIR / "mgiad-synth.yaml")
    train_set, test_set = load_splits(config.data, seed=config.run.seed)
    train_config = config.train.model_copy(update={"epochs": 20})
    log = train(build_model(config.model, seed=config.run.seed), train_set, test_set, train_config)
    losses = log.losses
    assert len(losses) == 20
    assert all(np.isfinite(losses))
    assert losses[-1] < 0.5 * losses[0]


def _cifar_like(count: int, seed: int):
    """Ten flat, well separated colours plus pixel noise."""
    rng = np.random.default_rng(seed)
    labels = np.arange(count) % 10
    colours = np.stack([25 * np.arange(10), 240 - 25 * np.arange(10), (97 * np.arange(10)) % 256], axis=1)
    images = colours[labels][:, None, None, :] + rng.normal(0.0, 8.0, size=(count, 32, 32, 3))
    return np.clip(np.rint(images), 0, 255).astype(np.uint8), labels


@pytest.mark.slow
def test_cifar_subset_config_fits_a_cifar_format_fixture(tmp_path):
    config = load_config(CONFIG_DIR / "mgiad-cifar10-subset.yaml")
    assert config.data.train_limit == 512
    base = tmp_path / "cifar-10-batches-bin"
    base.mkdir()
    images, labels = _cifar_like(600, seed=0)
    for i, chunk in enumerate(np.array_split(np.arange(600), 5), start=1):
        write_cifar_binary(base / f"data_batch_{i}.bin", images[chunk], labels[chunk])
    write_cifar_binary(base / "test_batch.bin", *_cifar_like(100, seed=1))

    data = config.data.model_copy(update={"data_dir": str(tmp_path)})
    train_set, test_set = load_splits(data, seed=0)
    assert len(train_set) == 512 and train_set.image_shape == (32, 32, 3)
    train_config = config.train.model_copy(update={"epochs": 30})
    log = train(build_model(config.model, seed=0), train_set, test_set, train_config, augment=data.augment)
    assert max(r.train_acc for r in log.records) >= 0.99


@pytest.mark.slow
def test_cifar_subset_is_memorized():
    """The shipped 512-sample config on the real CIFAR-10 batches."""
    config = load_config(CONFIG_DIR / "mgiad-cifar10-subset.yaml")
    data_dir = Path(config.data.data_dir)
    if not data_dir.is_absolute():
        data_dir = CONFIG_DIR.parent / data_dir
    try:
        cifar_files(data_dir, 10, "train")
        cifar_files(data_dir, 10, "test")
    except FileNotFoundError as exc:
        pytest.skip(f"CIFAR-10 binary batches not available: {exc}")
    data = config.data.model_copy(update={"data_dir": str(data_dir)})
    train_set, test_set = load_splits(data, seed=config.run.seed)
    assert len(train_set) == 512
    model = build_model(config.model, seed=config.run.seed)
    log = train(model, train_set, test_set, config.train, seed=config.run.seed, augment=data.augment)
    assert max(r.train_acc for r in log.records) >= 0.99
