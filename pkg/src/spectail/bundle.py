"""Weight-bundle interchange format.

A bundle is a directory holding ``manifest.json`` plus one raw binary file
per layer (little-endian, row-major, no header), optionally paired with a
snapshot of the same layer at initialization:

    <bundle>/manifest.json
    <bundle>/<layer>.bin
    <bundle>/<layer>.init.bin      (optional)

Values may be stored as f32 or f64 on disk; they are widened to f64 on read
and everything downstream runs in f64.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError

_DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}


@dataclass(eq=False)
class LayerMatrix:
    """One named weight matrix, held row-major as a float64 (rows, cols) array."""

    name: str
    values: np.ndarray
    init_values: np.ndarray | None = None
    depth_index: int = 0

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.init_values is not None:
            self.init_values = np.ascontiguousarray(self.init_values, dtype=np.float64)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def validate(self) -> None:
        if not self.name:
            raise ValidationError("layer name must be non-empty")
        if os.sep in self.name or "/" in self.name or self.name in (".", ".."):
            raise ValidationError(f"layer name {self.name!r} is not filesystem-safe")
        if self.values.ndim != 2 or min(self.values.shape) < 1:
            raise ValidationError(f"layer {self.name!r}: values must be a non-empty 2-D matrix")
        if not np.isfinite(self.values).all():
            raise ValidationError(f"layer {self.name!r}: non-finite value (broken training run?)")
        if self.init_values is not None:
            if self.init_values.shape != self.values.shape:
                raise ValidationError(f"layer {self.name!r}: init snapshot shape differs from values")
            if not np.isfinite(self.init_values).all():
                raise ValidationError(f"layer {self.name!r}: non-finite value in init snapshot")
        if self.depth_index < 0:
            raise ValidationError(f"layer {self.name!r}: negative depth_index")

    def __eq__(self, other) -> bool:
        if not isinstance(other, LayerMatrix):
            return NotImplemented
        if (self.name, self.depth_index) != (other.name, other.depth_index):
            return False
        if not np.array_equal(self.values, other.values):
            return False
        if (self.init_values is None) != (other.init_values is None):
            return False
        return self.init_values is None or np.array_equal(self.init_values, other.init_values)


@dataclass(eq=False)
class WeightBundle:
    """An ordered set of layer matrices plus free-form string metadata."""

    model_id: str
    layers: list[LayerMatrix] = field(default_factory=list)
    metadata: dict[str, str] = field(default_factory=dict)

    def validate(self) -> None:
        names = [l.name for l in self.layers]
        if len(set(names)) != len(names):
            raise ValidationError(f"duplicate layer name in bundle {self.model_id!r}")
        depths = [l.depth_index for l in self.layers]
        if len(set(depths)) != len(depths):
            raise ValidationError(f"duplicate depth_index in bundle {self.model_id!r}")
        if depths != sorted(depths):
            raise ValidationError(f"bundle {self.model_id!r}: layers not ordered by depth_index")
        for key, value in self.metadata.items():
            if not isinstance(key, str) or not isinstance(value, str):
                raise ValidationError("bundle metadata must map strings to strings")
        for layer in self.layers:
            layer.validate()

    def layer(self, name: str) -> LayerMatrix:
        for l in self.layers:
            if l.name == name:
                return l
        raise ValidationError(f"bundle {self.model_id!r} has no layer named {name!r}")

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeightBundle):
            return NotImplemented
        return (
            self.model_id == other.model_id
            and self.metadata == other.metadata
            and self.layers == other.layers
        )


def _read_values(path: Path, dtype_tag: str, rows: int, cols: int, layer: str) -> np.ndarray:
    if dtype_tag not in _DTYPES:
        raise ValidationError(f"layer {layer!r}: unknown dtype {dtype_tag!r}")
    dtype = _DTYPES[dtype_tag]
    raw = path.read_bytes()
    expected = rows * cols * dtype.itemsize
    if len(raw) != expected:
        raise ValidationError(
            f"layer {layer!r}: {path.name} holds {len(raw)} bytes, expected {expected} "
            f"for {rows}x{cols} {dtype_tag} (corrupt export?)"
        )
    values = np.frombuffer(raw, dtype=dtype).astype(np.float64).reshape(rows, cols)
    return values


def read_bundle(path: str | Path) -> WeightBundle:
    """Read a bundle directory, validating shapes, finiteness and uniqueness."""
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise FileNotFoundError(f"no manifest.json under {root}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{manifest_path}: invalid JSON ({exc})") from exc

    for key in ("model_id", "metadata", "layers"):
        if key not in manifest:
            raise ValidationError(f"{manifest_path}: missing field {key!r}")

    layers = []
    for entry in manifest["layers"]:
        for key in ("name", "rows", "cols", "depth_index", "dtype", "file"):
            if key not in entry:
                raise ValidationError(f"{manifest_path}: layer entry missing field {key!r}")
        name = entry["name"]
        rows, cols = int(entry["rows"]), int(entry["cols"])
        if rows < 1 or cols < 1:
            raise ValidationError(f"layer {name!r}: non-positive shape {rows}x{cols}")
        values = _read_values(root / entry["file"], entry["dtype"], rows, cols, name)
        init_values = None
        if entry.get("init_file"):
            init_values = _read_values(root / entry["init_file"], entry["dtype"], rows, cols, name)
        layers.append(
            LayerMatrix(
                name=name,
                values=values,
                init_values=init_values,
                depth_index=int(entry["depth_index"]),
            )
        )

    layers.sort(key=lambda l: l.depth_index)
    bundle = WeightBundle(
        model_id=str(manifest["model_id"]),
        layers=layers,
        metadata={str(k): str(v) for k, v in manifest["metadata"].items()},
    )
    bundle.validate()
    return bundle


def write_bundle(bundle: WeightBundle, path: str | Path) -> None:
    """Write a bundle directory such that ``read_bundle`` restores it bit-exactly."""
    bundle.validate()
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)

    entries = []
    for layer in bundle.layers:
        value_file = f"{layer.name}.bin"
        (root / value_file).write_bytes(layer.values.astype("<f8").tobytes())
        init_file = None
        if layer.init_values is not None:
            init_file = f"{layer.name}.init.bin"
            (root / init_file).write_bytes(layer.init_values.astype("<f8").tobytes())
        entries.append(
            {
                "name": layer.name,
                "rows": layer.rows,
                "cols": layer.cols,
                "depth_index": layer.depth_index,
                "dtype": "f64",
                "file": value_file,
                "init_file": init_file,
            }
        )

    manifest = {
        "model_id": bundle.model_id,
        "metadata": dict(bundle.metadata),
        "layers": entries,
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
