"""Writer for the weight-bundle directory format consumed by the analyzer CLI.

Layout: <bundle>/manifest.json plus one raw little-endian float64 binary per
layer (row-major, no header) and one per init snapshot. Matrices are stored
fan-in x fan-out, so a layer mapping d_in -> d_out becomes a d_in x d_out
matrix.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


def write_weight_bundle(
    path: str | Path,
    model_id: str,
    layers: list[tuple[str, np.ndarray, np.ndarray]],
    metadata: dict[str, str],
) -> None:
    """Write (name, values, init_values) triples as a bundle directory."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for depth, (name, values, init_values) in enumerate(layers):
        if values.shape != init_values.shape:
            raise ValueError(f"layer {name}: init shape {init_values.shape} != {values.shape}")
        if not (np.isfinite(values).all() and np.isfinite(init_values).all()):
            raise ValueError(f"layer {name}: non-finite weights; refusing to export")
        value_file = f"{name}.bin"
        init_file = f"{name}.init.bin"
        (root / value_file).write_bytes(np.ascontiguousarray(values, dtype="<f8").tobytes())
        (root / init_file).write_bytes(np.ascontiguousarray(init_values, dtype="<f8").tobytes())
        entries.append(
            {
                "name": name,
                "rows": int(values.shape[0]),
                "cols": int(values.shape[1]),
                "depth_index": depth,
                "dtype": "f64",
                "file": value_file,
                "init_file": init_file,
            }
        )
    manifest = {
        "model_id": model_id,
        "metadata": {str(k): str(v) for k, v in metadata.items()},
        "layers": entries,
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
