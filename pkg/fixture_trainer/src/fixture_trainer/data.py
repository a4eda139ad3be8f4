"""Dataset loading with a canonical, run-independent train/test split.

The split and any training subsampling are fixed (random_state 0) so that
every run in a gradient sees the same inputs; only the labels differ.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from sklearn.datasets import load_digits
from sklearn.model_selection import train_test_split

DATASETS = ("small-digits", "mnist-subset")


def _read_idx(path: Path) -> np.ndarray:
    """Minimal IDX reader (the classic MNIST container)."""
    raw = path.read_bytes()
    zero, dtype_code, ndim = struct.unpack(">HBB", raw[:4])
    if zero != 0 or dtype_code != 0x08:
        raise ValueError(f"{path}: not an unsigned-byte IDX file")
    shape = struct.unpack(">" + "I" * ndim, raw[4 : 4 + 4 * ndim])
    return np.frombuffer(raw, dtype=np.uint8, offset=4 + 4 * ndim).reshape(shape)


def _load_mnist_subset(data_dir: str | None, train_size: int | None):
    if data_dir is None:
        raise FileNotFoundError(
            "mnist-subset needs --data-dir pointing at the four IDX files "
            "(train-images-idx3-ubyte, train-labels-idx1-ubyte, "
            "t10k-images-idx3-ubyte, t10k-labels-idx1-ubyte)"
        )
    root = Path(data_dir)
    train_x = _read_idx(root / "train-images-idx3-ubyte").reshape(-1, 784)
    train_y = _read_idx(root / "train-labels-idx1-ubyte")
    test_x = _read_idx(root / "t10k-images-idx3-ubyte").reshape(-1, 784)
    test_y = _read_idx(root / "t10k-labels-idx1-ubyte")
    keep = train_size or 10_000
    picked = np.random.default_rng(0).permutation(len(train_x))[:keep]
    return (
        train_x[picked].astype(np.float32) / 255.0,
        train_y[picked].astype(np.int64),
        test_x.astype(np.float32) / 255.0,
        test_y.astype(np.int64),
    )


def _load_small_digits(train_size: int | None):
    digits = load_digits()
    X = digits.data.astype(np.float32) / 16.0
    y = digits.target.astype(np.int64)
    train_x, test_x, train_y, test_y = train_test_split(
        X, y, test_size=0.2, random_state=0, stratify=y
    )
    if train_size is not None and train_size < len(train_x):
        picked = np.random.default_rng(0).permutation(len(train_x))[:train_size]
        train_x, train_y = train_x[picked], train_y[picked]
    return train_x, train_y, test_x, test_y


def load_dataset(
    name: str, train_size: int | None = None, data_dir: str | None = None
):
    """Returns (train_x, train_y, test_x, test_y); test labels are never touched."""
    if name == "small-digits":
        return _load_small_digits(train_size)
    if name == "mnist-subset":
        return _load_mnist_subset(data_dir, train_size)
    raise ValueError(f"unknown dataset {name!r}; expected one of {DATASETS}")
