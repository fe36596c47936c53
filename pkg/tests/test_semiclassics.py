import numpy as np
import pytest

from semiquant.hilbert import build_basis, build_grid, default_degree
from semiquant.operators import SpectralData, quantize, separable_factor_spectra
from semiquant.phase_space import ModelGeometry, liouville_volume, parse_preset
from semiquant.phase_space.orbits import point_from_u_theta
from semiquant.semiclassics import (FactorSpectra, IllConditionedFitError, ModelTerm,
                                    WindowFunction, a0_check, b_kernel_check,
                                    coherent_propagation_check, fit_expansion, gutzwiller_predict,
                                    kernel_decay_check, poisson_rotation, resonant_orbits,
                                    richardson, smoothed_trace, smoothed_trace_direct,
                                    twist_holonomy, window_decay_check, weyl_term)
from semiquant.semiclassics.checks import INCONCLUSIVE, PASS


# -- windows --------------------------------------------------------------------------

@pytest.mark.parametrize("g", [WindowFunction(0.0, 2.5), WindowFunction(0.71, 0.09),
                               WindowFunction(0.2, 1.0, order=4), WindowFunction(0, 1, beta=4)])
def test_window_hat_against_adaptive_quadrature(g):
    E = np.array([0.0, 0.7, -3.2, 11.0, 40.5])
    ref = np.array([complex(np.ravel(g.hat_quad(e))[0]) for e in E])
    assert np.abs(g.hat(E) - ref).max() < 1e-12


def test_window_basic_properties():
    g = WindowFunction(0.3, 0.5)
    assert g(0.3) == 1.0
    assert g(0.8) == 0.0 and g(-0.2) == 0.0
    assert np.isclose(g.hat(0.0).real, g.integral(), atol=1e-13)
    with pytest.raises(ValueError):
        WindowFunction(0.0, -1.0)


# -- traces ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def radial_spectra():
    geom = ModelGeometry(1)
    f = parse_preset("radial:1,0.5")
    return {p: quantize(geom, f, p).spectral() for p in (50, 100, 200)}


def test_fast_trace_matches_direct(radial_spectra):
    g = WindowFunction(0.1, 0.6)
    for p, S in radial_spectra.items():
        assert abs(smoothed_trace(S, g, 0.3, p) - smoothed_trace_direct(S, g, 0.3, p)) < 1e-12


def test_trace_shift_invariance(radial_spectra):
    g = WindowFunction(0.0, 0.4)
    S = radial_spectra[100]
    shifted = SpectralData(S.eigenvalues + 0.25, S.vectors)
    assert abs(smoothed_trace(S, g, 0.3, 100) - smoothed_trace(shifted, g, 0.55, 100)) < 1e-12


def test_trace_linear_in_window(radial_spectra):
    g1, g2 = WindowFunction(0.0, 0.4), WindowFunction(0.5, 0.3)
    S = radial_spectra[50]
    lam = S.eigenvalues

    sum_hat = np.sum(g1.hat(50 * (lam - 0.3)) + g2.hat(50 * (lam - 0.3)))
    assert abs(smoothed_trace(S, g1, 0.3, 50) + smoothed_trace(S, g2, 0.3, 50) - sum_hat) < 1e-12


def test_factor_spectra_trace_matches_full():
    geom = ModelGeometry(2, (-1, -1))
    f = parse_preset("product:1,sqrt(2)")
    p = 12
    b = build_basis(geom, p)
    parts, const = separable_factor_spectra(b, build_grid(1, default_degree(p, (-1,), 1)), f)
    fs = FactorSpectra(tuple(parts), const)
    g = WindowFunction(0.71, 0.09)
    full = quantize(geom, f, p).spectral()
    assert abs(smoothed_trace(fs, g, 0.5, p) - smoothed_trace_direct(full, g, 0.5, p)) < 1e-12


@pytest.mark.parametrize("p", [50, 100, 200])
def test_poisson_identity(p, sphere, f0):
    g = WindowFunction(0.0, 2.5, beta=4)
    tr = smoothed_trace(quantize(sphere, f0, p).spectral(), g, 0.3, p)
    assert abs(tr - poisson_rotation(g, 0.3, p)) <= 1e-8


def test_weyl_limit(radial_spectra, sphere):
    f = parse_preset("radial:1,0.5")
    g = WindowFunction(0.0, 0.4)
    w = weyl_term(sphere, f, 0.3, g, 1)
    assert np.isclose(w, liouville_volume(sphere, f, 0.3))
    errs = [abs(smoothed_trace(S, g, 0.3, p) - w) for p, S in radial_spectra.items()]
    assert errs[0] > errs[-1]
    assert max(e * p for e, p in zip(errs, radial_spectra)) < 0.2


# -- fitting --------------------------------------------------------------------------

def test_fit_recovers_synthetic_coefficients():
    ps = np.arange(100, 401, 10)
    terms = [ModelTerm(0.0, 0.3, 0, "a"), ModelTerm(0.0, 0.3, 1, "b"), ModelTerm(1.0, 0.0, 0, "w")]
    coeffs = [0.4 - 0.2j, 1.3, 0.8]
    vals = sum(c * t(ps) for c, t in zip(coeffs, terms))
    fit = fit_expansion(ps, vals, terms)
    assert np.allclose(fit.coeffs, coeffs, atol=1e-10)
    assert fit.coefficient("w") == pytest.approx(0.8)
    assert len(list(fit.csv_rows())) == 3


def test_fit_rejects_rank_deficient_models():
    ps = np.arange(100, 201, 10)
    terms = [ModelTerm(0.0, 0.0, 0), ModelTerm(0.0, 1.0, 0)]    # identical on an integer grid
    with pytest.raises(IllConditionedFitError):
        fit_expansion(ps, np.ones(len(ps)), terms)
    with pytest.raises(ValueError):
        fit_expansion(ps[:3], np.ones(3), terms)


def test_richardson():
    ps = np.array([100, 150, 200, 250, 300, 350, 400], dtype=float)
    v = 2.0 + 3.0 / ps - 5.0 / ps ** 2 + 1.0 / ps ** 3
    ext = richardson(ps, v, order=3)
    assert abs(ext.limit - 2.0) < 1e-10


# -- pointwise checks -----------------------------------------------------------------

def test_a0_rotation_is_one(sphere, f0):
    x = point_from_u_theta([0.6], [0.4])
    r = a0_check(sphere, f0, 0.2, x, [10, 20, 30, 40, 50, 60], tol=1e-6)
    assert r.verdict == PASS
    assert abs(r.details["a0"] - 1) < 1e-6


def test_a0_inconclusive_is_reported(sphere):
    f = parse_preset("radial:1,0.5")
    x = point_from_u_theta([0.7], [0.3])
    r = a0_check(sphere, f, 0.2, x, [4, 5, 6, 7, 8], tol=1e-9)
    assert r.verdict in (INCONCLUSIVE, "fail")


def test_b0_rotation_diagonal(sphere, f0):
    x = point_from_u_theta([0.6], [0.4])
    g = WindowFunction(0, 0.4)
    r = b_kernel_check(sphere, f0, 0.4, g, x, x, 0.0, list(range(100, 401, 50)))
    assert r.verdict == PASS


def test_kernel_decay(sphere, f_pert):
    x, y = point_from_u_theta([0.95], [0.0]), point_from_u_theta([0.05], [2.5])
    r = kernel_decay_check(sphere, f_pert, 0.3, x, y, [20, 40, 80, 160])
    assert r.verdict == PASS and r.measured < -3
    with pytest.raises(ValueError):
        kernel_decay_check(sphere, f_pert, 0.0, x, x, [20, 40])


def test_window_kernel_decay_off_level(sphere):
    from semiquant.experiments import offset_point
    f = parse_preset("radial:1,0.5")
    x = offset_point(sphere, f, 0.6)
    assert np.isclose(f(x), 0.6)
    r = window_decay_check(sphere, f, 0.3, WindowFunction(0, 1.5), x, [20, 40, 80, 160])
    assert r.verdict == PASS


@pytest.mark.parametrize("preset,t", [("rotation", 0.25), ("perturbed:0.1,0.15", 0.3)])
def test_coherent_propagation(preset, t, sphere):
    f = parse_preset(preset)
    x0 = point_from_u_theta([0.6], [0.3])
    r = coherent_propagation_check(sphere, f, x0, t, [50, 100, 200])
    assert r.verdict == PASS


# -- Gutzwiller predictions ------------------------------------------------------------

@pytest.fixture(scope="module")
def product_orbit():
    geom = ModelGeometry(2, (-1, -1))
    f = parse_preset("product:1,sqrt(2)")
    g = WindowFunction(0.71, 0.09)
    return geom, f, g, resonant_orbits(geom, f, 0.5, g)


def test_product_prediction_modulus(product_orbit):
    geom, f, g, orbs = product_orbit
    pred = gutzwiller_predict(geom, f, 0.5, g, orbs)
    assert not pred.has_weyl and len(pred.terms) == 1
    expected = (1 / np.sqrt(2)) / (2 * abs(np.sin(np.pi / np.sqrt(2))))
    assert np.isclose(abs(pred.terms[0].b0), expected, rtol=1e-8)


def test_twist_holonomy_unit_modulus(product_orbit):
    geom, f, g, orbs = product_orbit
    assert np.isclose(abs(twist_holonomy(geom, f, orbs[0])), 1.0)


def test_complex_amplitude_reproduces_trace(product_orbit):
    geom, f, g, orbs = product_orbit
    pred = gutzwiller_predict(geom, f, 0.5, g, orbs, amplitude="complex")
    for p in (200, 400):
        b = build_basis(geom, p)
        parts, const = separable_factor_spectra(b, build_grid(1, default_degree(p, (-1,), 1)), f)
        tr = smoothed_trace(FactorSpectra(tuple(parts), const), g, 0.5, p)
        assert abs(tr / pred(p) - 1) < 0.02


def test_metaplectic_prediction_requires_twist():
    geom = ModelGeometry(2)
    f = parse_preset("product:1,sqrt(2)")
    with pytest.raises(ValueError):
        gutzwiller_predict(geom, f, 0.5, WindowFunction(0.71, 0.09), [])
