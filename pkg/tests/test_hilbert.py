import numpy as np
import pytest

from semiquant.hilbert import (GridMismatchError, SectionGrid, bergman_project, build_basis,
                               build_grid, coherent_state, default_degree, kernel_eval,
                               kernel_slice, kernel_trace_quadrature, l2_inner, pointwise_norm,
                               riemann_roch_dimension)
from semiquant.phase_space import ModelGeometry
from semiquant.phase_space.orbits import point_from_u_theta
from semiquant.semiclassics import decay_exponent


@pytest.mark.parametrize("twists,formula", [((0,), lambda p: p + 1), ((-1,), lambda p: p),
                                            ((0, 0), lambda p: (p + 1) ** 2),
                                            ((-1, -1), lambda p: p ** 2),
                                            ((2,), lambda p: p + 3)])
def test_riemann_roch(twists, formula):
    geom = ModelGeometry(len(twists), twists)
    for p in range(1, 65):
        assert build_basis(geom, p).dim == formula(p) == riemann_roch_dimension(geom, p)


def test_negative_degree_gives_zero_space():
    assert build_basis(ModelGeometry(1, (-3,)), 1).dim == 0


@pytest.mark.parametrize("twists,p", [((0,), 7), ((-1,), 9), ((0, 0), 4), ((-1, 0), 5)])
def test_basis_orthonormal(twists, p):
    geom = ModelGeometry(len(twists), twists)
    basis = build_basis(geom, p)
    grid = build_grid(geom, default_degree(p, twists))
    E = basis.grid_values(grid)
    G = E.conj().T @ (grid.weights[:, None] * E)
    assert np.abs(G - np.eye(basis.dim)).max() < 1e-12


def test_bergman_projector_idempotent_and_selfadjoint():
    geom = ModelGeometry(1)
    p = 6
    basis = build_basis(geom, p)
    grid = build_grid(geom, 2 * p + 4)
    E = basis.grid_values(grid)
    W = grid.weights
    Pi = E @ (E.conj().T * W[None, :])          # projector on grid-sampled sections
    assert np.abs(Pi @ Pi - Pi).max() < 1e-11
    A = W[:, None] * Pi                          # W-self-adjointness: W Pi = (W Pi)^H
    assert np.abs(A - A.conj().T).max() < 1e-11


def test_bergman_project_recovers_holomorphic_section(rng):
    geom = ModelGeometry(1)
    basis = build_basis(geom, 5)
    grid = build_grid(geom, 12)
    c = rng.standard_normal(basis.dim) + 1j * rng.standard_normal(basis.dim)
    s = SectionGrid.from_coefficients(basis, grid, c)
    assert np.allclose(bergman_project(basis, grid, s), c, atol=1e-12)
    assert np.isclose(l2_inner(grid, s, s, p=5), np.vdot(c, c), atol=1e-11)


def test_section_grid_mismatch():
    geom = ModelGeometry(1)
    g = build_grid(geom, 10)
    s1 = SectionGrid.from_coefficients(build_basis(geom, 3), g, np.ones(4))
    s2 = SectionGrid.from_coefficients(build_basis(geom, 4), g, np.ones(5))
    with pytest.raises(GridMismatchError):
        l2_inner(g, s1, s2)
    with pytest.raises(GridMismatchError):
        bergman_project(build_basis(geom, 4), g, s1)


def test_trace_formula_random_hermitian(rng):
    for twists, p in (((0,), 9), ((-1, 0), 4)):
        geom = ModelGeometry(len(twists), twists)
        basis = build_basis(geom, p)
        grid = build_grid(geom, default_degree(p, twists))
        for _ in range(20):
            A = rng.standard_normal((basis.dim,) * 2) + 1j * rng.standard_normal((basis.dim,) * 2)
            M = A + A.conj().T
            tr = np.trace(M)
            assert abs(kernel_trace_quadrature(basis, grid, M) - tr) <= 1e-9 * max(1, abs(tr))


@pytest.mark.parametrize("twists,dim", [((0,), lambda p: p + 1), ((-1,), lambda p: p)])
def test_coherent_state_norm_is_bergman_density(twists, dim):
    geom = ModelGeometry(1, twists)
    p = 12
    basis = build_basis(geom, p)
    for x in (point_from_u_theta([0.3], [1.0]), point_from_u_theta([0.9], [-2.0])):
        c = coherent_state(basis, x)
        assert np.isclose(np.vdot(c, c).real, dim(p), rtol=1e-12)
        assert np.isclose(kernel_eval(basis, np.eye(basis.dim), x, x).real, dim(p), rtol=1e-12)


def test_coherent_state_at_origin():
    basis = build_basis(ModelGeometry(1), 8)
    c = coherent_state(basis, point_from_u_theta([1.0], [0.0]))
    assert abs(c[0]) > 0 and np.allclose(c[1:], 0)


def test_coherent_state_peak_location():
    geom = ModelGeometry(1)
    p = 40
    basis = build_basis(geom, p)
    grid = build_grid(geom, 60)
    x0 = point_from_u_theta([0.42], [0.0])
    s = SectionGrid.from_coefficients(basis, grid, coherent_state(basis, x0))
    U, TH = grid.u_theta
    k = int(np.argmax(s.pointwise_norm()))
    du = np.max(np.diff(grid.u))
    assert abs(U[k, 0] - 0.42) <= du and min(abs(TH[k, 0]), 2 * np.pi - TH[k, 0]) <= 2 * np.pi / grid.n_ang


def test_pointwise_norm_matches_kernel():
    geom = ModelGeometry(1)
    basis = build_basis(geom, 10)
    x0, x = point_from_u_theta([0.4], [0.5]), point_from_u_theta([0.7], [0.1])
    c = coherent_state(basis, x0)
    assert np.isclose(pointwise_norm(basis, c, [x])[0],
                      abs(kernel_eval(basis, np.eye(basis.dim), x, x0)))


def test_off_diagonal_bergman_decay():
    geom = ModelGeometry(1)
    rng = np.random.default_rng(1)
    pts = [point_from_u_theta([u], [t]) for u, t in zip(rng.uniform(0.05, 0.95, 30),
                                                        rng.uniform(0, 2 * np.pi, 30))]
    pairs = [(a, b) for i, a in enumerate(pts) for b in pts[i + 1:] if geom.distance(a, b) >= 0.5]
    assert pairs
    ps = [20, 40, 80, 160]
    vals = []
    for p in ps:
        basis = build_basis(geom, p)
        ks = kernel_slice(basis, np.eye(basis.dim), [a for a, _ in pairs], [b for _, b in pairs])
        vals.append(np.max(np.abs(ks.values)) * p ** -1)
    assert decay_exponent(ps, vals) < -3


def test_kernel_slice_csv_columns():
    basis = build_basis(ModelGeometry(1), 3)
    x = point_from_u_theta([0.5], [0.0])
    rows = list(kernel_slice(basis, np.eye(4), [x], [x]).csv_rows())
    assert set(rows[0]) == {"x_re", "x_im", "chart", "value_re", "value_im", "pointwise_norm"}
