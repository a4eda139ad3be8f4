import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectail.bundle import LayerMatrix, WeightBundle
from spectail.calibration import (
    CalibrationPoint,
    PredictorRow,
    aggregate_calibration_points,
    best_layer_frobenius,
    calibrate_detector,
    compare_predictors,
    detect_noise,
    fit_linear,
    load_model,
    loo_r2,
    render_comparison,
    save_model,
)
from spectail.errors import ValidationError


def brute_force_loo_r2(points):
    """Literal refit-per-fold oracle."""
    points = np.asarray(points, dtype=float)
    y_mean = points[:, 1].mean()
    ss_res = 0.0
    for i in range(len(points)):
        rest = np.delete(points, i, axis=0)
        slope, intercept, _ = fit_linear(rest)
        prediction = slope * points[i, 0] + intercept
        ss_res += (points[i, 1] - prediction) ** 2
    ss_tot = float(np.sum((points[:, 1] - y_mean) ** 2))
    return 1.0 - ss_res / ss_tot


# ---------------------------------------------------------------------------
# linear fits


def test_fit_linear_exact_line():
    slope, intercept, r2 = fit_linear([(1, 1), (2, 2), (3, 3)])
    assert (slope, intercept, r2) == (1.0, 0.0, 1.0)


def test_fit_linear_constant_target_degenerate():
    slope, intercept, r2 = fit_linear([(1, 2), (2, 2), (3, 2)])
    assert (slope, intercept) == (0.0, 2.0)
    assert r2 == 0.0


def test_fit_linear_matches_normal_equations_oracle():
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 5, size=10)
    y = -0.9 * x + 1.0 + rng.normal(0, 0.1, size=10)
    slope, intercept, _ = fit_linear(np.column_stack([x, y]))
    design = np.column_stack([x, np.ones_like(x)])
    expected = np.linalg.solve(design.T @ design, design.T @ y)
    assert slope == pytest.approx(expected[0], abs=1e-12)
    assert intercept == pytest.approx(expected[1], abs=1e-12)


def test_fit_linear_degenerate_x_rejected():
    with pytest.raises(ValidationError, match="x"):
        fit_linear([(1, 1), (1, 2), (1, 3)])


def test_fit_linear_needs_two_points():
    with pytest.raises(ValidationError):
        fit_linear([(1, 1)])


# ---------------------------------------------------------------------------
# leave-one-out


def test_loo_collinear_is_exactly_one():
    assert loo_r2([(0, 1), (1, 3), (2, 5), (3, 7)]) == 1.0


def test_loo_matches_brute_force_oracle():
    rng = np.random.default_rng(1)
    for _ in range(25):
        points = np.column_stack(
            [rng.uniform(-3, 3, size=10), rng.normal(0, 2, size=10)]
        )
        assert loo_r2(points) == pytest.approx(brute_force_loo_r2(points), abs=1e-10)


def test_loo_below_fit_for_noise():
    rng = np.random.default_rng(5)
    x = np.arange(10.0)
    y = rng.permutation(np.linspace(0, 1, 10))  # seeded shuffle kills the relation
    points = np.column_stack([x, y])
    _, _, fit = fit_linear(points)
    loo = loo_r2(points)
    assert loo < fit
    assert loo == pytest.approx(brute_force_loo_r2(points), abs=1e-10)


def test_loo_needs_three_points():
    with pytest.raises(ValidationError):
        loo_r2([(0, 1), (1, 2)])


def test_loo_degenerate_fold_rejected():
    with pytest.raises(ValidationError, match="fold"):
        loo_r2([(0, 1), (1, 2), (1, 3), (1, 4)])


def test_loo_constant_target_degenerate_rule():
    assert loo_r2([(0, 5), (1, 5), (2, 5), (3, 5)]) == 0.0


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 99_999), n=st.integers(4, 24))
def test_loo_never_beats_fit(seed, n):
    rng = np.random.default_rng(seed)
    points = np.column_stack([rng.normal(size=n), rng.normal(size=n)])
    _, _, fit = fit_linear(points)
    assert loo_r2(points) <= fit + 1e-9


# ---------------------------------------------------------------------------
# best layer


def planted_bundles():
    bundles = []
    for k, acc in enumerate([0.2, 0.5, 0.8, 0.95]):
        layers = [
            LayerMatrix(name="sig", values=np.eye(4) * (2.0 * acc + 0.1), depth_index=0),
            LayerMatrix(name="flat", values=np.ones((4, 4)), depth_index=1),
        ]
        bundles.append(
            WeightBundle(
                model_id=f"b{k}", layers=layers, metadata={"test_accuracy": repr(acc)}
            )
        )
    return bundles


def test_best_layer_finds_planted_signal():
    name, loo = best_layer_frobenius(planted_bundles())
    assert name == "sig"
    assert loo == pytest.approx(1.0, abs=1e-12)


def test_best_layer_all_constant_norms():
    bundles = planted_bundles()
    for b in bundles:
        b.layers[0].values = np.ones((4, 4))
    name, loo = best_layer_frobenius(bundles)
    assert name == "sig"  # tie on zero correlation resolves to the shallowest
    assert loo == 0.0


def test_best_layer_inconsistent_layers_rejected():
    bundles = planted_bundles()
    bundles[1].layers[1].name = "other"
    with pytest.raises(ValidationError, match="inconsistent"):
        best_layer_frobenius(bundles)


def test_best_layer_needs_three_bundles():
    with pytest.raises(ValidationError):
        best_layer_frobenius(planted_bundles()[:2])


# ---------------------------------------------------------------------------
# predictor comparison


def rows_with_planted_alpha(transform=lambda acc: acc):
    rows = []
    rng = np.random.default_rng(3)
    for i, alpha in enumerate([2.0, 2.4, 2.8, 3.2, 3.6]):
        acc = -0.9 * alpha + 4.0
        for seed in range(2):
            rows.append(
                PredictorRow(
                    noise_fraction=i / 4,
                    test_accuracy=transform(acc),
                    seed=seed,
                    tail_alpha=alpha,
                    effective_rank=float(rng.uniform(0.3, 0.8)),
                    layer_frobenius={"w0": float(rng.uniform(1, 2)), "w1": 1.0},
                    layer_depth={"w0": 0, "w1": 1},
                    global_l2=float(rng.uniform(1, 2)),
                    frobenius_sum=float(rng.uniform(2, 4)),
                    spectral_max=float(rng.uniform(1, 3)),
                    spectral_product=float(rng.uniform(1, 9)),
                )
            )
    return rows


def test_compare_ranks_planted_predictor_first():
    table = compare_predictors(rows_with_planted_alpha())
    assert table[0]["measure"] == "tail_alpha"
    assert table[0]["loo_r2"] == pytest.approx(1.0, abs=1e-12)
    assert all(
        row["loo_r2"] is None or row["loo_r2"] <= 1.0 for row in table
    )


def test_compare_ranking_invariant_to_affine_target():
    base = [r["measure"] for r in compare_predictors(rows_with_planted_alpha())]
    moved = [
        r["measure"]
        for r in compare_predictors(rows_with_planted_alpha(lambda acc: 3.0 * acc - 7.0))
    ]
    assert base == moved


def test_compare_needs_three_rows():
    with pytest.raises(ValidationError):
        compare_predictors(rows_with_planted_alpha()[:2])


def test_render_comparison_is_aligned():
    table = compare_predictors(rows_with_planted_alpha())
    lines = render_comparison(table).splitlines()
    assert lines[0].endswith("LOO R^2")
    assert len(lines) == 2 + len(table)
    width = lines[1].index("  ")  # dashes under the label column
    assert all(line[width : width + 2] == "  " for line in lines)


# ---------------------------------------------------------------------------
# detector


def canonical_model():
    points = [
        CalibrationPoint(noise_fraction=0.0, alpha=2.1),
        CalibrationPoint(noise_fraction=0.5, alpha=2.8),
        CalibrationPoint(noise_fraction=1.0, alpha=3.5),
    ]
    return calibrate_detector(points)


def test_detect_exact_nodes():
    model = canonical_model()
    for eta, alpha in [(0.0, 2.1), (0.5, 2.8), (1.0, 3.5)]:
        result = detect_noise(model, alpha)
        assert result.estimated_noise == eta
        assert not result.extrapolated


def test_detect_segment_midpoint():
    result = detect_noise(canonical_model(), 2.45)
    assert result.estimated_noise == pytest.approx(0.25, abs=1e-12)
    assert result.bracket == (0.0, 0.5)
    assert not result.extrapolated


def test_detect_clamps_and_flags_extrapolation():
    model = canonical_model()
    high = detect_noise(model, 5.0)
    assert high.estimated_noise == 1.0
    assert high.extrapolated
    low = detect_noise(model, 1.0)
    assert low.estimated_noise == 0.0
    assert low.extrapolated


def test_calibrate_needs_three_distinct_levels():
    with pytest.raises(ValidationError):
        calibrate_detector(
            [CalibrationPoint(0.0, 2.0), CalibrationPoint(1.0, 3.0)]
        )
    with pytest.raises(ValidationError, match="distinct"):
        calibrate_detector(
            [
                CalibrationPoint(0.0, 2.0),
                CalibrationPoint(0.0, 2.2),
                CalibrationPoint(1.0, 3.0),
            ]
        )


def test_calibrate_warns_on_non_monotone_alpha():
    model = calibrate_detector(
        [
            CalibrationPoint(0.0, 2.1),
            CalibrationPoint(0.5, 3.0),
            CalibrationPoint(1.0, 2.5),
        ]
    )
    assert any("not strictly increasing" in w for w in model.warnings)


def test_calibrate_loo_leq_fit():
    model = canonical_model()
    assert model.loo_r2 <= model.fit_r2 + 1e-9


def test_model_round_trip(tmp_path):
    model = canonical_model()
    path = tmp_path / "model.json"
    save_model(model, path)
    loaded = load_model(path)
    again = tmp_path / "model2.json"
    save_model(loaded, again)
    assert path.read_bytes() == again.read_bytes()
    assert loaded.fit_r2 == model.fit_r2
    for alpha in (2.1, 2.45, 3.5, 9.9):
        assert detect_noise(loaded, alpha) == detect_noise(model, alpha)


def test_aggregation_averages_per_level():
    points = aggregate_calibration_points(
        [(0.0, 2.0, 0.9), (0.0, 2.2, 0.8), (1.0, 3.0, 0.1)]
    )
    assert len(points) == 2
    assert points[0].alpha == pytest.approx(2.1)
    assert points[0].seed_count == 2
    assert points[0].stderr == pytest.approx(np.std([2.0, 2.2], ddof=1) / np.sqrt(2))
    assert points[1].stderr == 0.0
