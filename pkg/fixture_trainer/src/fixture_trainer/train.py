"""MLP training under controlled label noise, exporting init+final weights.

Defaults are pilot-tuned for the 8x8 digits dataset: a gentle learning rate
(0.02) trains every noise level to full interpolation while keeping the
bottleneck-layer spectra in the regime where the noise gradient is visible.
All hyperparameters land in the exported bundle's metadata.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .data import load_dataset
from .export import write_weight_bundle
from .noise import inject_label_noise

DEFAULT_WIDTHS = [64, 256, 128, 64, 10]


@dataclass
class TrainSpec:
    dataset: str = "small-digits"
    widths: list[int] = field(default_factory=lambda: list(DEFAULT_WIDTHS))
    noise_fraction: float = 0.0
    seed: int = 0
    epochs: int = 600
    learning_rate: float = 0.02
    momentum: float = 0.9
    weight_decay: float = 0.0
    batch_size: int = 64
    train_size: int | None = 360  # None = the full canonical train split
    data_dir: str | None = None

    def validate(self) -> None:
        if not 0.0 <= self.noise_fraction <= 1.0:
            raise ValueError(f"noise_fraction {self.noise_fraction} outside [0, 1]")
        if any(w < 1 for w in self.widths) or len(self.widths) < 2:
            raise ValueError(f"bad layer widths {self.widths}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")


@dataclass
class TrainResult:
    bundle_path: Path
    noise_fraction: float
    seed: int
    train_accuracy: float
    test_accuracy: float
    diverged: bool


def _build_mlp(widths: list[int], seed: int) -> nn.Sequential:
    torch.manual_seed(seed)
    modules = []
    for i in range(len(widths) - 1):
        modules.append(nn.Linear(widths[i], widths[i + 1]))
        if i < len(widths) - 2:
            modules.append(nn.ReLU())
    return nn.Sequential(*modules)


def _linear_weights(model: nn.Sequential) -> list[np.ndarray]:
    # stored fan-in x fan-out: transpose of the framework's (out, in) layout
    return [
        m.weight.detach().numpy().T.astype(np.float64).copy()
        for m in model
        if isinstance(m, nn.Linear)
    ]


def _accuracy(model: nn.Sequential, inputs: torch.Tensor, labels: torch.Tensor) -> float:
    with torch.no_grad():
        return float((model(inputs).argmax(dim=1) == labels).float().mean().item())


def train_and_export(spec: TrainSpec, out_path: str | Path) -> TrainResult:
    """Train one run and write its weight bundle (init + final, all layers)."""
    spec.validate()
    train_x, train_y, test_x, test_y = load_dataset(
        spec.dataset, spec.train_size, spec.data_dir
    )
    num_classes = spec.widths[-1]
    noisy_y = inject_label_noise(train_y, spec.noise_fraction, num_classes, spec.seed)

    model = _build_mlp(spec.widths, spec.seed)
    init_weights = _linear_weights(model)

    optimizer = torch.optim.SGD(
        model.parameters(),
        lr=spec.learning_rate,
        momentum=spec.momentum,
        weight_decay=spec.weight_decay,
    )
    loss_fn = nn.CrossEntropyLoss()
    inputs = torch.from_numpy(train_x)
    targets = torch.from_numpy(noisy_y)
    shuffler = torch.Generator().manual_seed(spec.seed)

    diverged = False
    snapshot = [p.detach().clone() for p in model.parameters()]
    for _ in range(spec.epochs):
        order = torch.randperm(len(inputs), generator=shuffler)
        for start in range(0, len(inputs), spec.batch_size):
            batch = order[start : start + spec.batch_size]
            optimizer.zero_grad()
            loss_fn(model(inputs[batch]), targets[batch]).backward()
            optimizer.step()
        finite = all(torch.isfinite(p).all() for p in model.parameters())
        if not finite:
            # roll back to the last healthy epoch so the export stays valid
            with torch.no_grad():
                for parameter, saved in zip(model.parameters(), snapshot):
                    parameter.copy_(saved)
            diverged = True
            break
        snapshot = [p.detach().clone() for p in model.parameters()]

    train_accuracy = _accuracy(model, inputs, targets)
    test_accuracy = _accuracy(
        model, torch.from_numpy(test_x), torch.from_numpy(test_y)
    )
    final_weights = _linear_weights(model)

    metadata = {
        "noise_fraction": repr(spec.noise_fraction),
        "test_accuracy": repr(test_accuracy),
        "train_accuracy": repr(train_accuracy),
        "seed": str(spec.seed),
        "epochs": str(spec.epochs),
        "learning_rate": repr(spec.learning_rate),
        "momentum": repr(spec.momentum),
        "weight_decay": repr(spec.weight_decay),
        "batch_size": str(spec.batch_size),
        "dataset": spec.dataset,
        "widths": ",".join(str(w) for w in spec.widths),
        "train_size": str(len(train_x)),
    }
    if diverged:
        metadata["warning"] = "training diverged; exported the last finite snapshot"

    layers = [
        (f"net.{i}", final, init)
        for i, (final, init) in enumerate(zip(final_weights, init_weights))
    ]
    model_id = f"{spec.dataset}-eta{spec.noise_fraction}-seed{spec.seed}"
    write_weight_bundle(out_path, model_id, layers, metadata)
    return TrainResult(
        bundle_path=Path(out_path),
        noise_fraction=spec.noise_fraction,
        seed=spec.seed,
        train_accuracy=train_accuracy,
        test_accuracy=test_accuracy,
        diverged=diverged,
    )


def run_noise_gradient(
    levels: list[float],
    seeds_per_level: int,
    template: TrainSpec,
    out_dir: str | Path,
    log=None,
) -> Path:
    """One bundle per (level, seed); returns the path of the runs.csv manifest.

    Bundle paths in the manifest are relative to the manifest's directory, so
    the whole output directory can be moved or fed to the analyzer as-is.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for eta in levels:
        for seed in range(seeds_per_level):
            name = f"eta{eta:.2f}-seed{seed}"
            spec = replace(template, noise_fraction=eta, seed=seed)
            result = train_and_export(spec, out_dir / name)
            rows.append(
                {
                    "bundle_path": name,
                    "noise_fraction": eta,
                    "test_accuracy": result.test_accuracy,
                    "seed": seed,
                }
            )
            if log:
                log(
                    f"eta={eta:.2f} seed={seed}: train={result.train_accuracy:.3f} "
                    f"test={result.test_accuracy:.3f}"
                    + (" [diverged]" if result.diverged else "")
                )
    manifest = out_dir / "runs.csv"
    with open(manifest, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(
            handle, fieldnames=["bundle_path", "noise_fraction", "test_accuracy", "seed"]
        )
        writer.writeheader()
        writer.writerows(rows)
    return manifest


def run_hyperparameter_sweep(
    template: TrainSpec, out_dir: str | Path, log=None
) -> Path:
    """Reduced 2x2x2 sweep at clean labels: width scale x learning rate x decay.

    Exercises the comparison pathway where runs differ in configuration, not
    data quality; every row carries noise_fraction 0.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    run_index = 0
    for width_scale in (0.5, 1.0):
        for lr in (template.learning_rate, template.learning_rate / 4):
            for decay in (0.0, 1e-4):
                widths = (
                    [template.widths[0]]
                    + [max(8, int(w * width_scale)) for w in template.widths[1:-1]]
                    + [template.widths[-1]]
                )
                name = f"cfg{run_index}"
                spec = replace(
                    template,
                    widths=widths,
                    noise_fraction=0.0,
                    seed=run_index,
                    learning_rate=lr,
                    weight_decay=decay,
                )
                result = train_and_export(spec, out_dir / name)
                rows.append(
                    {
                        "bundle_path": name,
                        "noise_fraction": 0.0,
                        "test_accuracy": result.test_accuracy,
                        "seed": run_index,
                    }
                )
                if log:
                    log(
                        f"{name}: widths={widths} lr={lr} wd={decay} "
                        f"test={result.test_accuracy:.3f}"
                    )
                run_index += 1
    manifest = out_dir / "runs.csv"
    with open(manifest, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(
            handle, fieldnames=["bundle_path", "noise_fraction", "test_accuracy", "seed"]
        )
        writer.writeheader()
        writer.writerows(rows)
    return manifest
