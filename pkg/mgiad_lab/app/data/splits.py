"""
Train and test splits from a ``DataConfig``.
"""

from pathlib import Path
from typing import Tuple

import structlog

from app.core.config import get_settings
from app.data.cifar import cifar_files, load_cifar_binary
from app.data.dataset import Dataset
from app.data.idx import load_idx
from app.data.synthetic import synth_blobs
from app.models.schemas import DataConfig, DatasetKind

logger = structlog.get_logger("mgiad.data")

FASHION_MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def augment_default(config: DataConfig) -> bool:
    """Flip and crop for CIFAR unless configured otherwise."""
    if config.augment is not None:
        return config.augment
    return config.kind in (DatasetKind.CIFAR10, DatasetKind.CIFAR100)


def _fashion_mnist(root: Path, split: str, pad, stats) -> Dataset:
    images, labels = (root / "fashion_mnist" / name for name in FASHION_MNIST_FILES[split])
    for path in (images, labels):
        if not path.is_file():
            raise FileNotFoundError(f"dataset file not found: {path}")
    return load_idx(images, labels, 10, split, pad, stats)


def load_splits(config: DataConfig, seed: int = 0) -> Tuple[Dataset, Dataset]:
    """``(train, test)``; the test split is normalized with the training statistics."""
    root = Path(config.data_dir or get_settings().data_dir)
    kind = config.kind
    if kind is DatasetKind.SYNTH:
        options = dict(
            classes=config.synth_classes,
            per_class=config.synth_per_class,
            size=config.synth_size,
            seed=seed,
            channels=config.synth_channels,
            noise=config.synth_noise,
        )
        train = synth_blobs(split="train", **options)
        test = synth_blobs(split="test", stats=train.stats, **options)
    elif kind is DatasetKind.FASHION_MNIST:
        pad = config.pad_to if config.pad_to is not None else 32
        train = _fashion_mnist(root, "train", pad, None)
        test = _fashion_mnist(root, "test", pad, train.stats)
    else:
        classes = 10 if kind is DatasetKind.CIFAR10 else 100
        train = load_cifar_binary(cifar_files(root, classes, "train"), classes, "train")
        test = load_cifar_binary(cifar_files(root, classes, "test"), classes, "test", train.stats)

    train, test = train.subset(config.train_limit), test.subset(config.test_limit)
    logger.info("splits loaded", kind=kind.value, train=len(train), test=len(test))
    return train, test
