import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from spectail.bundle import LayerMatrix
from spectail.ensembles import gen_iid_gaussian
from spectail.errors import ValidationError
from spectail.mp import (
    MPParams,
    bbp_threshold,
    estimate_sigma_sq_from_init,
    fit_mp_sigma,
    mp_cdf,
    mp_edges,
    mp_pdf,
)
from spectail.spectrum import EigenSpectrum, gram_spectrum


def test_edges_quarter_aspect():
    assert mp_edges(1.0, 0.25) == (0.25, 2.25)


def test_edges_square_case():
    assert mp_edges(1.0, 1.0) == (0.0, 4.0)


def test_edges_scale_in_variance():
    assert mp_edges(2.0, 0.25) == (0.5, 4.5)


def test_edges_reject_non_positive():
    with pytest.raises(ValidationError):
        mp_edges(0.0, 0.5)
    with pytest.raises(ValidationError):
        mp_edges(1.0, -1.0)


@settings(max_examples=50, deadline=None)
@given(
    sigma_sq=st.floats(0.01, 50),
    gamma=st.floats(0.01, 10),
    scale=st.floats(0.01, 100),
)
def test_edges_scaling_property(sigma_sq, gamma, scale):
    base = mp_edges(sigma_sq, gamma)
    scaled = mp_edges(scale * sigma_sq, gamma)
    assert scaled[0] == pytest.approx(scale * base[0], rel=1e-12, abs=1e-300)
    assert scaled[1] == pytest.approx(scale * base[1], rel=1e-12)


def test_bbp_threshold_values():
    assert bbp_threshold(1.0, 0.25) == 0.5
    assert bbp_threshold(1.0, 1.0) == 1.0
    assert bbp_threshold(2.0, 0.25) == 1.0


def quad_bulk_mass(params, x):
    """Quadrature oracle: integrate the density from the lower bulk edge to x.

    Substituting t = a + (b-a) sin^2(theta) removes the square-root endpoint
    singularities, so plain quad resolves the integral to ~1e-12.
    """
    a, b = params.bulk_edges()
    x = min(max(x, a), b)
    upper = np.arcsin(np.sqrt((x - a) / (b - a)))

    def integrand(theta):
        t = a + (b - a) * np.sin(theta) ** 2
        return float(mp_pdf(t, params)) * (b - a) * np.sin(2 * theta)

    value, err = quad(integrand, 0.0, upper, limit=200, epsabs=1e-12, epsrel=1e-12)
    assert err < 1e-10
    return value


def test_cdf_matches_quadrature_oracle():
    for sigma_sq, gamma in [(1.0, 0.25), (2.0, 0.7), (1.0, 1.0), (1.5, 4.0), (0.5, 2.0)]:
        params = MPParams(sigma_sq=sigma_sq, gamma=gamma)
        a, b = params.bulk_edges()
        for frac in (0.05, 0.3, 0.5, 0.8, 0.999, 1.0):
            x = a + frac * (b - a)
            expected = quad_bulk_mass(params, x)
            got = mp_cdf(x, params) - params.zero_mass
            assert got == pytest.approx(expected, abs=1e-8)


def test_cdf_support_endpoints():
    params = MPParams(sigma_sq=1.0, gamma=0.25)
    assert mp_cdf(params.lambda_minus, params) == 0.0
    assert mp_cdf(params.lambda_plus, params) == 1.0
    assert mp_cdf(params.lambda_plus + 10.0, params) == 1.0


def test_cdf_zero_mass_for_wide_matrices():
    params = MPParams(sigma_sq=1.0, gamma=4.0)
    assert mp_cdf(-1e-9, params) == 0.0
    assert mp_cdf(0.0, params) == pytest.approx(0.75, abs=1e-12)
    a, _ = params.bulk_edges()
    assert mp_cdf(a / 2, params) == pytest.approx(0.75, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(sigma_sq=st.floats(0.05, 20), gamma=st.floats(0.05, 0.999))
def test_cdf_monotone_and_normalized(sigma_sq, gamma):
    params = MPParams(sigma_sq=sigma_sq, gamma=gamma)
    lo, hi = params.bulk_edges()
    grid = np.linspace(lo - 0.1 * hi, hi * 1.1, 200)
    values = mp_cdf(grid, params)
    assert np.all(np.diff(values) >= -1e-12)
    assert values[0] == 0.0
    assert values[-1] == 1.0


def test_cdf_against_empirical_spectrum():
    # oracle: empirical CDF of a large sample matrix, gamma = 2000/8000
    W = gen_iid_gaussian(8000, 2000, 1.0, seed=42)
    spectrum = gram_spectrum(W)
    params = MPParams(sigma_sq=1.0, gamma=0.25)
    x = 1.25  # midpoint of the support
    model = mp_cdf(x, params)
    empirical = float(np.mean(spectrum.eigenvalues <= x))
    assert 0.0 < model < 1.0
    assert abs(model - empirical) < 0.01


def test_sigma_estimate_constant_entries():
    layer = LayerMatrix(name="w", values=np.zeros((3, 4)), init_values=np.full((3, 4), 2.5))
    assert estimate_sigma_sq_from_init(layer) == pytest.approx(6.25, rel=1e-12)


def test_sigma_estimate_gaussian_init():
    rng = np.random.default_rng(21)
    init = rng.standard_normal((512, 784))
    layer = LayerMatrix(name="w", values=np.zeros((512, 784)), init_values=init)
    estimate = estimate_sigma_sq_from_init(layer)
    # direct sample-variance oracle
    assert estimate == pytest.approx(float((init**2).mean()), rel=1e-12)
    assert abs(estimate - 1.0) <= 3 * np.sqrt(2.0 / init.size)


def test_sigma_estimate_rejects_all_zero_init():
    layer = LayerMatrix(name="w", values=np.ones((2, 2)), init_values=np.zeros((2, 2)))
    with pytest.raises(ValidationError, match="zero"):
        estimate_sigma_sq_from_init(layer)


def test_sigma_estimate_requires_init():
    with pytest.raises(ValidationError, match="init"):
        estimate_sigma_sq_from_init(LayerMatrix(name="w", values=np.ones((2, 2))))


def test_fit_recovers_known_variance():
    spectrum = gram_spectrum(gen_iid_gaussian(512, 2048, 1.0, seed=7))
    params, ks = fit_mp_sigma(spectrum)
    assert abs(params.sigma_sq - 1.0) < 0.05
    assert ks < 0.02


@pytest.mark.parametrize("m,n,sigma_sq", [(256, 512, 1.0), (512, 256, 2.0), (300, 300, 0.5)])
def test_fit_recovery_within_five_percent(m, n, sigma_sq):
    spectrum = gram_spectrum(gen_iid_gaussian(m, n, sigma_sq, seed=100 + m + n))
    params, _ = fit_mp_sigma(spectrum)
    assert abs(params.sigma_sq - sigma_sq) / sigma_sq < 0.05


def test_fit_on_degenerate_spectrum_still_returns():
    spectrum = EigenSpectrum.from_values(np.full(64, 3.0))
    params, ks = fit_mp_sigma(spectrum)
    assert params.sigma_sq > 0
    assert ks > 0.4  # nothing MP-like about a point mass


def test_fit_needs_ten_positive_eigenvalues():
    with pytest.raises(ValidationError, match="10"):
        fit_mp_sigma(EigenSpectrum.from_values(np.arange(1.0, 9.0)))


def test_params_edges_consistency():
    params = MPParams(sigma_sq=2.0, gamma=4.0)
    assert params.lambda_minus == 0.0  # reported lower edge floors at zero
    assert params.bulk_edges()[0] == pytest.approx(2.0 * (1 - 2.0) ** 2, rel=1e-12)
    assert params.lambda_plus == pytest.approx(2.0 * 9.0, rel=1e-12)
