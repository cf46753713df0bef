"""
Tests for the dataset readers, normalization and batching.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from app.core.errors import BadMagicError, ConfigurationError, CountMismatchError, TruncatedFileError
from app.data import (
    batches,
    channel_stats,
    load_cifar_binary,
    load_idx,
    load_splits,
    pad_to,
    read_idx_arrays,
    synth_blobs,
    write_cifar_binary,
    write_idx,
)
from app.data.splits import augment_default
from app.models.schemas import DataConfig, DatasetKind


@pytest.fixture
def idx_pair(tmp_path, rng):
    images = rng.integers(0, 256, size=(6, 28, 28), dtype=np.uint8)
    labels = np.array([0, 1, 2, 3, 4, 9], dtype=np.uint8)
    paths = tmp_path / "images-idx3-ubyte", tmp_path / "labels-idx1-ubyte"
    write_idx(*paths, images, labels)
    return paths, images, labels


def test_idx_reads_back_what_was_written(idx_pair):
    (images_path, labels_path), images, labels = idx_pair
    read_images, read_labels = read_idx_arrays(images_path, labels_path)
    assert_array_equal(read_images, images)
    assert_array_equal(read_labels, labels)


def test_idx_rewrite_is_byte_identical(idx_pair, tmp_path):
    (images_path, labels_path), _, _ = idx_pair
    copies = tmp_path / "copy-images", tmp_path / "copy-labels"
    write_idx(*copies, *read_idx_arrays(images_path, labels_path))
    assert copies[0].read_bytes() == images_path.read_bytes()
    assert copies[1].read_bytes() == labels_path.read_bytes()
    assert len(images_path.read_bytes()) == 16 + 6 * 28 * 28
    assert len(labels_path.read_bytes()) == 8 + 6


def test_idx_dataset_is_padded_and_normalized(idx_pair):
    (images_path, labels_path), images, _ = idx_pair
    dataset = load_idx(images_path, labels_path, pad=32)
    assert dataset.image_shape == (32, 32, 1)
    assert dataset.images.dtype == np.float32
    assert_allclose(dataset.images.mean(), 0.0, atol=1e-5)
    restored = np.rint(dataset.pixels()[:, 2:30, 2:30, 0] * 255)
    assert_array_equal(restored, images)


def test_idx_wrong_magic(idx_pair):
    (images_path, labels_path), _, _ = idx_pair
    raw = bytearray(images_path.read_bytes())
    raw[3] = 0x01
    images_path.write_bytes(bytes(raw))
    with pytest.raises(BadMagicError) as info:
        read_idx_arrays(images_path, labels_path)
    assert info.value.offset == 0
    assert info.value.path == str(images_path)


def test_idx_truncated_payload(idx_pair):
    (images_path, labels_path), _, _ = idx_pair
    images_path.write_bytes(images_path.read_bytes()[:-10])
    with pytest.raises(TruncatedFileError):
        read_idx_arrays(images_path, labels_path)


def test_idx_truncated_header(tmp_path):
    path = tmp_path / "short"
    path.write_bytes(b"\x00\x00\x08")
    with pytest.raises(TruncatedFileError):
        read_idx_arrays(path, path)


def test_idx_label_count_must_match(tmp_path, rng):
    images = rng.integers(0, 256, size=(3, 4, 4), dtype=np.uint8)
    write_idx(tmp_path / "i", tmp_path / "l", images, np.zeros(3))
    write_idx(tmp_path / "i2", tmp_path / "l2", images[:2], np.zeros(2))
    with pytest.raises(CountMismatchError):
        read_idx_arrays(tmp_path / "i", tmp_path / "l2")


def test_idx_label_out_of_range(tmp_path, rng):
    write_idx(tmp_path / "i", tmp_path / "l", np.zeros((2, 4, 4)), np.array([1, 12]))
    with pytest.raises(CountMismatchError) as info:
        load_idx(tmp_path / "i", tmp_path / "l")
    assert info.value.offset == 9


def test_idx_with_zero_items(tmp_path):
    write_idx(tmp_path / "i", tmp_path / "l", np.zeros((0, 28, 28)), np.zeros(0))
    dataset = load_idx(tmp_path / "i", tmp_path / "l")
    assert len(dataset) == 0
    assert dataset.image_shape == (28, 28, 1)


def test_cifar10_layout(tmp_path, rng):
    """Planes are stored red, green, blue; loading restores channel-last pixels."""
    images = rng.integers(0, 256, size=(5, 32, 32, 3), dtype=np.uint8)
    labels = np.array([3, 1, 4, 1, 5])
    path = tmp_path / "data_batch_1.bin"
    write_cifar_binary(path, images, labels)
    raw = path.read_bytes()
    assert len(raw) == 5 * 3073
    assert raw[0] == 3
    assert raw[1] == images[0, 0, 0, 0]
    assert raw[1 + 1024] == images[0, 0, 0, 1]

    dataset = load_cifar_binary([path])
    assert_array_equal(dataset.labels, labels)
    assert_array_equal(np.rint(dataset.pixels() * 255), images)


def test_cifar100_uses_fine_labels(tmp_path, rng):
    images = rng.integers(0, 256, size=(3, 32, 32, 3), dtype=np.uint8)
    path = tmp_path / "train.bin"
    write_cifar_binary(path, images, np.array([99, 0, 42]), classes=100, coarse_labels=np.array([19, 0, 7]))
    dataset = load_cifar_binary([path], classes=100)
    assert_array_equal(dataset.labels, [99, 0, 42])
    assert dataset.classes == 100


def test_cifar_concatenates_batches(tmp_path, rng):
    paths = []
    for i in range(2):
        path = tmp_path / f"b{i}.bin"
        write_cifar_binary(path, rng.integers(0, 256, size=(4, 32, 32, 3)), np.full(4, i))
        paths.append(path)
    dataset = load_cifar_binary(paths)
    assert len(dataset) == 8
    assert_array_equal(dataset.labels, [0] * 4 + [1] * 4)


def test_cifar_partial_record(tmp_path, rng):
    path = tmp_path / "b.bin"
    write_cifar_binary(path, rng.integers(0, 256, size=(2, 32, 32, 3)), np.zeros(2))
    path.write_bytes(path.read_bytes()[:-100])
    with pytest.raises(TruncatedFileError) as info:
        load_cifar_binary([path])
    assert info.value.offset == 3073


def test_cifar_missing_files_named(tmp_path):
    config = DataConfig(kind=DatasetKind.CIFAR10, data_dir=str(tmp_path))
    with pytest.raises(FileNotFoundError, match="data_batch_1.bin"):
        load_splits(config)


def test_fashion_mnist_splits_share_training_statistics(tmp_path, rng):
    root = tmp_path / "fashion_mnist"
    root.mkdir()
    for prefix, count in (("train", 8), ("t10k", 4)):
        write_idx(
            root / f"{prefix}-images-idx3-ubyte",
            root / f"{prefix}-labels-idx1-ubyte",
            rng.integers(0, 256, size=(count, 28, 28)),
            rng.integers(0, 10, size=count),
        )
    train, test = load_splits(DataConfig(kind=DatasetKind.FASHION_MNIST, data_dir=str(tmp_path), test_limit=3))
    assert train.image_shape == (32, 32, 1)
    assert len(train) == 8 and len(test) == 3
    assert_array_equal(test.mean, train.mean)
    assert_array_equal(test.std, train.std)


def test_channel_stats():
    images = np.zeros((2, 3, 3, 2))
    images[..., 0] = 2.0
    images[0, ..., 1] = 1.0
    mean, std = channel_stats(images)
    assert_allclose(mean, [2.0, 0.5])
    assert_allclose(std, [1.0, 0.5])


def test_pad_to_centers_images():
    padded = pad_to(np.ones((1, 28, 28, 1)), 32)
    assert padded.shape == (1, 32, 32, 1)
    assert padded.sum() == 28 * 28
    assert padded[0, 2, 2, 0] == 1.0 and padded[0, 1, 1, 0] == 0.0
    with pytest.raises(ConfigurationError):
        pad_to(np.ones((1, 28, 28, 1)), 16)


def test_synth_blobs_are_deterministic():
    first = synth_blobs(classes=3, per_class=4, size=8, seed=7)
    second = synth_blobs(classes=3, per_class=4, size=8, seed=7)
    assert len(first) == 12
    assert first.image_shape == (8, 8, 3)
    assert_array_equal(first.images, second.images)
    assert_array_equal(np.bincount(first.labels), [4, 4, 4])
    test = synth_blobs(classes=3, per_class=4, size=8, seed=7, split="test")
    assert not np.array_equal(first.images, test.images)


def test_batches_keep_the_partial_batch():
    dataset = synth_blobs(classes=2, per_class=5, size=4)
    sizes = [len(b.labels) for b in batches(dataset, 3, seed=1)]
    assert sizes == [3, 3, 3, 1]
    indices = np.concatenate([b.indices for b in batches(dataset, 3, seed=1)])
    assert sorted(indices) == list(range(10))


def test_batch_order_depends_only_on_seed_and_epoch():
    dataset = synth_blobs(classes=5, per_class=10, size=4)

    def order(seed, epoch, augment=False):
        return [b for b in batches(dataset, 8, seed=seed, epoch=epoch, augment=augment)]

    first_pass = np.concatenate([b.indices for b in order(3, 1)])
    assert_array_equal(first_pass, np.concatenate([b.indices for b in order(3, 1)]))
    assert not np.array_equal(order(3, 1)[0].indices, order(3, 2)[0].indices)
    for first, second in zip(order(3, 1, True), order(3, 1, True)):
        assert_array_equal(first.images, second.images)
        assert first.images.shape == (len(first.labels), 4, 4, 3)


def test_unshuffled_batches_follow_storage_order():
    dataset = synth_blobs(classes=2, per_class=2, size=4)
    assert_array_equal(next(batches(dataset, 4, shuffle=False)).indices, [0, 1, 2, 3])
    with pytest.raises(ConfigurationError):
        next(batches(dataset, 0))


def test_augmentation_defaults_on_for_cifar_only():
    assert augment_default(DataConfig(kind=DatasetKind.CIFAR10))
    assert augment_default(DataConfig(kind=DatasetKind.CIFAR100))
    assert not augment_default(DataConfig(kind=DatasetKind.FASHION_MNIST))
    assert not augment_default(DataConfig(kind=DatasetKind.SYNTH))
    assert not augment_default(DataConfig(kind=DatasetKind.CIFAR10, augment=False))
