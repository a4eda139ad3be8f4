"""Linear calibration of observables against noise fraction and test accuracy.

The evaluation metric throughout is leave-one-out R^2: each point is
predicted by a line fitted to all other points, and the squared prediction
errors are compared to the variance around the full-sample mean. It can be
negative when a predictor does worse than a constant.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError

# Constant-target data makes R^2 a 0/0; we define it as 0 ("nothing to explain")
# and flag the degenerate case instead of raising.
DEGENERATE_R2 = 0.0

_LEVERAGE_TOL = 1e-12


def _as_xy(points) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValidationError("points must be a sequence of (x, y) pairs")
    return arr[:, 0], arr[:, 1]


def fit_linear(points) -> tuple[float, float, float]:
    """Ordinary least squares y = a*x + b; returns (a, b, r_squared).

    A constant target yields r_squared = 0 by the degenerate rule; constant x
    is an error (no line is identifiable).
    """
    x, y = _as_xy(points)
    if len(x) < 2:
        raise ValidationError(f"linear fit needs >= 2 points, got {len(x)}")
    sxx = float(np.sum((x - x.mean()) ** 2))
    if sxx == 0.0:
        raise ValidationError("linear fit is degenerate: all x values are equal")
    slope = float(np.sum((x - x.mean()) * (y - y.mean())) / sxx)
    intercept = float(y.mean() - slope * x.mean())
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return slope, intercept, DEGENERATE_R2
    ss_res = float(np.sum((y - (slope * x + intercept)) ** 2))
    return slope, intercept, 1.0 - ss_res / ss_tot


def loo_r2(points) -> float:
    """Leave-one-out R^2 of the one-variable linear model.

    Uses the closed-form deletion residuals e_i / (1 - h_i) with leverage
    h_i = 1/n + (x_i - mean)^2 / Sxx, which is algebraically identical to
    refitting without each point. A fold whose removal leaves constant x
    (leverage 1) is an error; a constant target falls back to the degenerate
    rule.
    """
    x, y = _as_xy(points)
    n = len(x)
    if n < 3:
        raise ValidationError(f"leave-one-out needs >= 3 points, got {n}")
    sxx = float(np.sum((x - x.mean()) ** 2))
    if sxx == 0.0:
        raise ValidationError("leave-one-out is degenerate: all x values are equal")
    leverage = 1.0 / n + (x - x.mean()) ** 2 / sxx
    if np.any(1.0 - leverage <= _LEVERAGE_TOL):
        raise ValidationError(
            "leave-one-out fold is degenerate: removing a point leaves constant x"
        )
    slope, intercept, _ = fit_linear(np.column_stack([x, y]))
    residuals = y - (slope * x + intercept)
    deleted = residuals / (1.0 - leverage)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return DEGENERATE_R2
    return 1.0 - float(np.sum(deleted**2)) / ss_tot


# ---------------------------------------------------------------------------
# Predictor comparison


@dataclass
class PredictorRow:
    """One training run (or one seed-averaged group) as seen by the comparers."""

    noise_fraction: float
    test_accuracy: float
    seed: int
    tail_alpha: float | None
    effective_rank: float | None
    layer_frobenius: dict[str, float]
    layer_depth: dict[str, int]
    global_l2: float
    frobenius_sum: float
    spectral_max: float
    spectral_product: float


MEASURE_LABELS = {
    "tail_alpha": "Tail alpha (bottleneck layer)",
    "effective_rank": "Effective rank (bottleneck layer)",
    "best_layer_frobenius": "Best-layer Frobenius norm",
    "global_l2": "Global L2 norm",
    "frobenius_sum": "Sum of Frobenius norms",
    "spectral_max": "Max spectral norm",
    "spectral_product": "Product of spectral norms",
}


def average_rows_by_level(rows: list[PredictorRow]) -> list[PredictorRow]:
    """Average observables across seeds sharing the same noise fraction."""
    levels: dict[float, list[PredictorRow]] = {}
    for row in rows:
        levels.setdefault(row.noise_fraction, []).append(row)

    averaged = []
    for eta in sorted(levels):
        group = levels[eta]
        names = set(group[0].layer_frobenius)
        if any(set(r.layer_frobenius) != names for r in group):
            raise ValidationError("inconsistent layer names across runs at one noise level")

        def mean_of(getter):
            vals = [getter(r) for r in group]
            if any(v is None for v in vals):
                return None
            return float(np.mean(vals))

        averaged.append(
            PredictorRow(
                noise_fraction=eta,
                test_accuracy=float(np.mean([r.test_accuracy for r in group])),
                seed=len(group),
                tail_alpha=mean_of(lambda r: r.tail_alpha),
                effective_rank=mean_of(lambda r: r.effective_rank),
                layer_frobenius={
                    name: float(np.mean([r.layer_frobenius[name] for r in group]))
                    for name in sorted(names)
                },
                layer_depth=dict(group[0].layer_depth),
                global_l2=float(np.mean([r.global_l2 for r in group])),
                frobenius_sum=float(np.mean([r.frobenius_sum for r in group])),
                spectral_max=float(np.mean([r.spectral_max for r in group])),
                spectral_product=float(np.mean([r.spectral_product for r in group])),
            )
        )
    return averaged


def _abs_correlation(x: np.ndarray, y: np.ndarray) -> float:
    sx = np.std(x)
    sy = np.std(y)
    if sx == 0.0 or sy == 0.0:
        return 0.0
    return abs(float(np.corrcoef(x, y)[0, 1]))


def _best_layer_from_columns(
    frob_columns: dict[str, np.ndarray], depth: dict[str, int], accuracy: np.ndarray
) -> tuple[str, float]:
    scores = {name: _abs_correlation(col, accuracy) for name, col in frob_columns.items()}
    # max |corr|, ties toward the shallowest layer
    best = min(scores, key=lambda name: (-scores[name], depth.get(name, 0)))
    column = frob_columns[best]
    if np.std(column) == 0.0:
        return best, DEGENERATE_R2
    return best, loo_r2(np.column_stack([column, accuracy]))


def best_layer_frobenius(bundles) -> tuple[str, float]:
    """The layer whose Frobenius norm best tracks test accuracy across bundles.

    Bundles must share a layer set and carry ``test_accuracy`` metadata.
    Returns the layer name and the leave-one-out R^2 of predicting accuracy
    from that single layer's norm.
    """
    if len(bundles) < 3:
        raise ValidationError(f"best-layer selection needs >= 3 bundles, got {len(bundles)}")
    names = [l.name for l in bundles[0].layers]
    accuracy = []
    columns: dict[str, list[float]] = {name: [] for name in names}
    depth = {l.name: l.depth_index for l in bundles[0].layers}
    for bundle in bundles:
        if [l.name for l in bundle.layers] != names:
            raise ValidationError("bundles have inconsistent layer names")
        if "test_accuracy" not in bundle.metadata:
            raise ValidationError(f"bundle {bundle.model_id!r} lacks test_accuracy metadata")
        accuracy.append(float(bundle.metadata["test_accuracy"]))
        for layer in bundle.layers:
            columns[layer.name].append(float(np.linalg.norm(layer.values)))
    return _best_layer_from_columns(
        {name: np.asarray(vals) for name, vals in columns.items()},
        depth,
        np.asarray(accuracy),
    )


def compare_predictors(
    rows: list[PredictorRow], average_by_level: bool = True
) -> list[dict]:
    """Leave-one-out R^2 of every measure as a predictor of test accuracy.

    Rows are seed-averaged per noise level first (disable with
    ``average_by_level`` for per-run comparisons). Measures whose fit is
    impossible on this data are reported with a null score and sort last.
    Returns a list of {"measure", "loo_r2"} dicts, best first.
    """
    if len(rows) < 3:
        raise ValidationError(f"predictor comparison needs >= 3 rows, got {len(rows)}")
    data = average_rows_by_level(rows) if average_by_level else rows
    if len(data) < 3:
        raise ValidationError(
            f"predictor comparison needs >= 3 groups after averaging, got {len(data)}"
        )
    accuracy = np.asarray([r.test_accuracy for r in data])

    def score_column(values) -> float | None:
        if any(v is None for v in values):
            return None
        column = np.asarray(values, dtype=np.float64)
        if np.std(column) == 0.0:
            return DEGENERATE_R2
        try:
            return loo_r2(np.column_stack([column, accuracy]))
        except ValidationError:
            return None

    scores: dict[str, float | None] = {
        "tail_alpha": score_column([r.tail_alpha for r in data]),
        "effective_rank": score_column([r.effective_rank for r in data]),
        "global_l2": score_column([r.global_l2 for r in data]),
        "frobenius_sum": score_column([r.frobenius_sum for r in data]),
        "spectral_max": score_column([r.spectral_max for r in data]),
        "spectral_product": score_column([r.spectral_product for r in data]),
    }
    frob_columns = {
        name: np.asarray([r.layer_frobenius[name] for r in data])
        for name in data[0].layer_frobenius
    }
    try:
        _, best_score = _best_layer_from_columns(frob_columns, data[0].layer_depth, accuracy)
        scores["best_layer_frobenius"] = best_score
    except ValidationError:
        scores["best_layer_frobenius"] = None

    ranked = sorted(
        scores.items(), key=lambda kv: (kv[1] is None, -(kv[1] if kv[1] is not None else 0.0))
    )
    return [{"measure": name, "loo_r2": score} for name, score in ranked]


def render_comparison(table: list[dict]) -> str:
    """Aligned text rendering of a predictor-comparison table."""
    width = max(len(MEASURE_LABELS.get(r["measure"], r["measure"])) for r in table)
    lines = [f"{'Measure'.ljust(width)}  LOO R^2", f"{'-' * width}  -------"]
    for row in table:
        label = MEASURE_LABELS.get(row["measure"], row["measure"]).ljust(width)
        score = "n/a" if row["loo_r2"] is None else f"{row['loo_r2']:+.4f}"
        lines.append(f"{label}  {score}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Noise detector


@dataclass(frozen=True)
class CalibrationPoint:
    """One calibration node: seed-averaged observable at a known noise level."""

    noise_fraction: float
    alpha: float
    test_accuracy: float | None = None
    seed_count: int = 1
    stderr: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.noise_fraction <= 1.0:
            raise ValidationError(f"noise fraction {self.noise_fraction} outside [0, 1]")
        if not np.isfinite(self.stderr):
            raise ValidationError("stderr must be finite")


@dataclass
class CalibrationModel:
    """Monotone alpha -> noise map stored as piecewise-linear nodes.

    The OLS line over the same nodes is kept for reporting; detection itself
    interpolates through the nodes.
    """

    target: str
    slope: float
    intercept: float
    points: list[CalibrationPoint]
    loo_r2: float
    fit_r2: float
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "slope": self.slope,
            "intercept": self.intercept,
            "nodes": [
                {"eta": p.noise_fraction, "alpha": p.alpha, "stderr": p.stderr}
                for p in self.points
            ],
            "loo_r2": self.loo_r2,
            "warnings": list(self.warnings),
        }


@dataclass(frozen=True)
class DetectionResult:
    estimated_noise: float
    bracket: tuple[float, float]   # calibration noise levels around the estimate
    extrapolated: bool
    observable: str = "tail_alpha"

    def to_dict(self) -> dict:
        return {
            "estimated_noise": self.estimated_noise,
            "bracket": [self.bracket[0], self.bracket[1]],
            "extrapolated": self.extrapolated,
            "observable": self.observable,
        }


def aggregate_calibration_points(
    rows: list[tuple[float, float, float | None]]
) -> list[CalibrationPoint]:
    """Seed-average (eta, alpha, accuracy) triples into calibration nodes.

    stderr is the standard error of alpha across seeds (0 for single seeds).
    """
    levels: dict[float, list[tuple[float, float | None]]] = {}
    for eta, alpha, acc in rows:
        levels.setdefault(eta, []).append((alpha, acc))
    points = []
    for eta in sorted(levels):
        alphas = np.asarray([a for a, _ in levels[eta]])
        accs = [acc for _, acc in levels[eta] if acc is not None]
        stderr = float(alphas.std(ddof=1) / np.sqrt(len(alphas))) if len(alphas) > 1 else 0.0
        points.append(
            CalibrationPoint(
                noise_fraction=eta,
                alpha=float(alphas.mean()),
                test_accuracy=float(np.mean(accs)) if accs else None,
                seed_count=len(alphas),
                stderr=stderr,
            )
        )
    return points


def calibrate_detector(points: list[CalibrationPoint]) -> CalibrationModel:
    """Build the noise detector from >= 3 seed-averaged nodes at distinct levels."""
    if len(points) < 3:
        raise ValidationError(f"calibration needs >= 3 points, got {len(points)}")
    etas = [p.noise_fraction for p in points]
    if len(set(etas)) != len(etas):
        raise ValidationError("calibration noise levels must be distinct")
    nodes = sorted(points, key=lambda p: p.noise_fraction)

    warnings = []
    alphas = [p.alpha for p in nodes]
    if any(b <= a for a, b in zip(alphas, alphas[1:])):
        warnings.append(
            "calibration alphas are not strictly increasing in noise fraction; "
            "interpolation may be ambiguous"
        )

    pairs = np.column_stack([alphas, [p.noise_fraction for p in nodes]])
    slope, intercept, fit_r2 = fit_linear(pairs)
    return CalibrationModel(
        target="noise_fraction",
        slope=slope,
        intercept=intercept,
        points=nodes,
        loo_r2=loo_r2(pairs),
        fit_r2=fit_r2,
        warnings=warnings,
    )


def detect_noise(model: CalibrationModel, alpha_query: float) -> DetectionResult:
    """Estimate the noise fraction by inverse piecewise-linear interpolation.

    Queries outside the calibrated alpha range extrapolate along the nearest
    end segment, clamp to [0, 1], and set the extrapolated flag.
    """
    nodes = model.points
    alphas = [p.alpha for p in nodes]
    etas = [p.noise_fraction for p in nodes]

    # exact node hits return the calibrated level with no rounding
    for alpha, eta in zip(alphas, etas):
        if alpha_query == alpha:
            return DetectionResult(eta, (eta, eta), extrapolated=False)

    for (a0, e0), (a1, e1) in zip(zip(alphas, etas), zip(alphas[1:], etas[1:])):
        lo, hi = min(a0, a1), max(a0, a1)
        if lo <= alpha_query <= hi and hi > lo:
            t = (alpha_query - a0) / (a1 - a0)
            eta = e0 + t * (e1 - e0)
            return DetectionResult(min(1.0, max(0.0, eta)), (e0, e1), extrapolated=False)

    # outside the calibrated range: extend the nearer end segment
    if abs(alpha_query - alphas[0]) <= abs(alpha_query - alphas[-1]):
        a0, e0, a1, e1 = alphas[0], etas[0], alphas[1], etas[1]
    else:
        a0, e0, a1, e1 = alphas[-2], etas[-2], alphas[-1], etas[-1]
    if a1 == a0:
        eta = e1
    else:
        eta = e0 + (alpha_query - a0) / (a1 - a0) * (e1 - e0)
    return DetectionResult(min(1.0, max(0.0, eta)), (e0, e1), extrapolated=True)


def save_model(model: CalibrationModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=2) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> CalibrationModel:
    """Rebuild a model from its JSON file; derived fields are recomputed from the nodes."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid model JSON ({exc})") from exc
    for key in ("target", "slope", "intercept", "nodes", "loo_r2", "warnings"):
        if key not in doc:
            raise ValidationError(f"{path}: model file missing field {key!r}")
    points = [
        CalibrationPoint(
            noise_fraction=float(n["eta"]), alpha=float(n["alpha"]), stderr=float(n["stderr"])
        )
        for n in doc["nodes"]
    ]
    pairs = np.column_stack([[p.alpha for p in points], [p.noise_fraction for p in points]])
    _, _, fit_r2 = fit_linear(pairs)
    model = CalibrationModel(
        target=str(doc["target"]),
        slope=float(doc["slope"]),
        intercept=float(doc["intercept"]),
        points=points,
        loo_r2=float(doc["loo_r2"]),
        fit_r2=fit_r2,
        warnings=[str(w) for w in doc["warnings"]],
    )
    return model
