"""Bottleneck-layer selection: the most compressing layer with usable resolution."""

from __future__ import annotations

from dataclasses import dataclass

from .bundle import WeightBundle
from .errors import ValidationError

DEFAULT_MIN_RESOLUTION = 50


@dataclass(frozen=True)
class BottleneckVerdict:
    layer_name: str
    compression_ratio: float          # max(m, n) / min(m, n)
    resolution: int                   # min(m, n)
    eligible_layers: tuple[tuple[str, float, int], ...]
    reason: str


def _ratio(rows: int, cols: int) -> float:
    return max(rows, cols) / min(rows, cols)


def select_bottleneck(
    bundle: WeightBundle, min_resolution: int = DEFAULT_MIN_RESOLUTION
) -> BottleneckVerdict:
    """Pick the layer with the highest compression ratio among those whose
    smaller dimension is at least ``min_resolution``.

    Ties go to the deeper layer. If nothing is eligible, fall back to the
    layer with the largest small dimension and say so in the verdict.
    """
    if not bundle.layers:
        raise ValidationError("cannot select a bottleneck in an empty bundle")

    eligible = [l for l in bundle.layers if min(l.rows, l.cols) >= min_resolution]
    listing = tuple((l.name, _ratio(l.rows, l.cols), min(l.rows, l.cols)) for l in eligible)

    if eligible:
        chosen = max(eligible, key=lambda l: (_ratio(l.rows, l.cols), l.depth_index))
        reason = (
            f"highest compression ratio among {len(eligible)} layer(s) with "
            f"min dimension >= {min_resolution}; ties broken by depth"
        )
    else:
        chosen = max(bundle.layers, key=lambda l: (min(l.rows, l.cols), l.depth_index))
        reason = (
            f"no layer has min dimension >= {min_resolution}; "
            f"fell back to the layer with the largest min dimension"
        )

    return BottleneckVerdict(
        layer_name=chosen.name,
        compression_ratio=_ratio(chosen.rows, chosen.cols),
        resolution=min(chosen.rows, chosen.cols),
        eligible_layers=listing,
        reason=reason,
    )


def override_verdict(bundle: WeightBundle, layer_name: str, min_resolution: int) -> BottleneckVerdict:
    """Verdict pinned to a user-chosen layer; the reason records the override."""
    layer = bundle.layer(layer_name)
    eligible = [l for l in bundle.layers if min(l.rows, l.cols) >= min_resolution]
    listing = tuple((l.name, _ratio(l.rows, l.cols), min(l.rows, l.cols)) for l in eligible)
    return BottleneckVerdict(
        layer_name=layer.name,
        compression_ratio=_ratio(layer.rows, layer.cols),
        resolution=min(layer.rows, layer.cols),
        eligible_layers=listing,
        reason=f"user override (--layer {layer_name})",
    )
