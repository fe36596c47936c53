import numpy as np
import pytest

from semiquant.hilbert import GridExactnessError, build_basis, build_grid, default_degree
from semiquant.operators import (NotHolomorphicFlowError, OperatorMatrix, SpectralData,
                                 _assemble, _grid_jets, bochner_laplacian, covariant_derivative,
                                 evolution, kato_products, kostant_souriau, pullback_operator,
                                 quantize, separable_spectrum, toeplitz)
from semiquant.phase_space import ModelGeometry, parse_preset, rotation


def grid_for(geom, p, f):
    return build_grid(geom, default_degree(p, geom.twists, f.max_degree))


# -- exact spectra --------------------------------------------------------------------

@pytest.mark.parametrize("p", [8, 32, 128])
def test_kostant_souriau_rotation_spectrum(p, sphere, f0):
    lam = np.linalg.eigvalsh(quantize(sphere, f0, p).matrix)
    assert np.abs(lam - np.arange(p + 1) / p).max() < 1e-10


@pytest.mark.parametrize("p", [8, 32, 128])
def test_metaplectic_rotation_spectrum(p, meta_sphere, f0):
    lam = np.linalg.eigvalsh(quantize(meta_sphere, f0, p, "metaplectic").matrix)
    assert np.abs(lam - (np.arange(p) + 0.5) / p).max() < 1e-10


def test_kostant_lift_on_twisted_bundle(f0):
    geom = ModelGeometry(1, (2,))
    p = 6
    lam = np.linalg.eigvalsh(quantize(geom, f0, p, "kostant").matrix)
    assert np.abs(lam - np.arange(p + 3) / p).max() < 1e-12


def test_toeplitz_of_height_function(sphere, f0):
    # T_p(f_0) z^k = (k + 1)/(p + 2) z^k on O(p)
    p = 10
    b = build_basis(sphere, p)
    T = toeplitz(b, grid_for(sphere, p, f0), f0).matrix
    assert np.allclose(T, np.diag((np.arange(p + 1) + 1) / (p + 2)), atol=1e-13)


def test_tuynman_relation(sphere, f_pert):
    # on an untwisted Kahler model Q_p(f) = T_p(f + Delta f / (4 pi p)),
    # Delta = -4 pi q^2 d_z d_zbar being the Laplacian of the area-one metric
    p = 8
    b = build_basis(sphere, p)
    G = grid_for(sphere, p, f_pert)
    jets = _grid_jets(f_pert, G)
    lap = -8 * np.pi * jets["lap"][:, 0]
    T = _assemble(b, G, jets["f"] + lap / (4 * np.pi * p))
    assert np.abs(kostant_souriau(b, G, f_pert).matrix - T).max() < 1e-12


def test_hermitian_and_linear(sphere, f_pert):
    p = 12
    Q = quantize(sphere, f_pert, p)
    assert Q.meta["hermitian_defect_raw"] < 1e-10
    Q2 = quantize(sphere, 1.7 * f_pert + 0.3, p).matrix
    assert np.abs(Q2 - (1.7 * Q.matrix + 0.3 * np.eye(p + 1))).max() < 1e-10


def test_grid_too_coarse(sphere, f_pert):
    b = build_basis(sphere, 10)
    with pytest.raises(GridExactnessError):
        kostant_souriau(b, build_grid(sphere, 5), f_pert)


def test_metaplectic_needs_holomorphic_flow(meta_sphere, f_pert):
    with pytest.raises(NotHolomorphicFlowError):
        quantize(meta_sphere, f_pert, 6, "metaplectic")


def test_covariant_derivative_closed_form(sphere, f0):
    # Q_p = T_p(f) + (i/2 pi p) P nabla P with Q_p(f_0) = k/p and T_p(f_0) = (k+1)/(p+2)
    p = 6
    b = build_basis(sphere, p)
    C = covariant_derivative(b, grid_for(sphere, p, f0), f0)
    assert isinstance(C, OperatorMatrix)
    k = np.arange(p + 1)
    expected = -2j * np.pi * (k - p * (k + 1) / (p + 2))
    assert np.abs(C.matrix - np.diag(expected)).max() < 1e-12


def test_separable_spectrum_matches_full():
    geom = ModelGeometry(2, (-1, -1))
    f = parse_preset("product:1,sqrt(2)")
    p = 5
    b = build_basis(geom, p)
    full = np.linalg.eigvalsh(quantize(geom, f, p).matrix)
    sep = separable_spectrum(b, build_grid(1, default_degree(p, (-1,), 1)), f)
    assert np.abs(full - sep).max() < 1e-12


# -- spectral data and evolution ------------------------------------------------------

def test_spectral_data_invariants(sphere, f_pert):
    Q = quantize(sphere, f_pert, 10)
    S = Q.spectral()
    assert S.reconstruction_defect(Q) < 1e-12
    assert S.orthonormality_defect() < 1e-12
    D = SpectralData.diagonal([3.0, 1.0, 2.0])
    assert np.allclose(D.eigenvalues, [1, 2, 3])


def test_evolution_unitary_and_group_law(sphere, f_pert):
    p = 16
    S = quantize(sphere, f_pert, p).spectral()
    U = evolution(S, 0.3, p)
    assert U.unitary_defect() < 1e-12
    lhs = evolution(S, 0.1, p).matrix @ evolution(S, 0.2, p).matrix
    assert np.abs(lhs - U.matrix).max() < 1e-12


def test_rotation_evolution_is_pullback(sphere, f0):
    p, t = 8, 0.3
    b = build_basis(sphere, p)
    U = evolution(quantize(sphere, f0, p), t, p).matrix
    A = pullback_operator(sphere, f0, t, b, b, grid_for(sphere, p, f0)).matrix
    assert np.abs(A - U).max() < 1e-10
    # the closed form: z^k picks up exp(-2 pi i t k)
    assert np.allclose(U, np.diag(np.exp(-2j * np.pi * t * np.arange(p + 1))), atol=1e-12)


def test_kato_transport_converges(sphere, f_pert):
    p, t = 4, 0.2
    b = build_basis(sphere, p)
    U = evolution(quantize(sphere, f_pert, p), t, p).matrix
    Ts = kato_products(sphere, f_pert, b, t, [40, 80, 160])
    d = [np.linalg.norm(Ts[s] - U, 2) for s in (40, 80, 160)]
    order = -np.polyfit(np.log([40, 80, 160]), np.log(d), 1)[0]
    assert d[0] > d[1] > d[2]
    assert order >= 0.9


def test_kato_rotation_is_exact(sphere, f0):
    # holomorphic flow: the spaces do not move, each step is the identity
    p = 5
    b = build_basis(sphere, p)
    T = kato_products(sphere, f0, b, 0.3, [10])[10]
    U = evolution(quantize(sphere, f0, p), 0.3, p).matrix
    assert np.linalg.norm(T - U, 2) < 1e-9


# -- Bochner Laplacian ----------------------------------------------------------------

@pytest.mark.parametrize("p", [4, 8, 12])
def test_bochner_gap(p, sphere):
    bs = bochner_laplacian(sphere, p)
    dim = p + 1
    assert bs.near_zero(1e-8 * p) == dim
    assert bs.eigenvalues[dim] >= 2 * np.pi * p
    assert np.isclose(bs.eigenvalues[dim], 4 * np.pi * (p + 2), rtol=1e-8)


def test_bochner_p0_is_laplace_beltrami(sphere):
    bs = bochner_laplacian(sphere, 0)
    assert abs(bs.eigenvalues[0]) < 1e-10
    assert np.isclose(bs.eigenvalues[1], 8 * np.pi, rtol=1e-8)


def test_bochner_product_dimension():
    bs = bochner_laplacian(ModelGeometry(2), 4)
    assert bs.near_zero(1e-7) == 25
