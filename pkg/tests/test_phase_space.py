import numpy as np
import pytest

from semiquant.hilbert import build_grid
from semiquant.phase_space import (ChartPoint, CriticalLevelError, FlowOptions, ModelGeometry,
                                   OpenLoopError, find_periodic_orbits, integrate_flow,
                                   liouville_volume, oblique_projectors, parse_preset,
                                   prequantum_action, product, pushforward_complex_structure,
                                   radial, rotation)
from semiquant.phase_space.flow import vector_field_real
from semiquant.phase_space.orbits import point_from_u_theta
from semiquant.phase_space.structure import a0_squared_geometric


def random_points(rng, s, count=50):
    us = rng.uniform(0.02, 0.98, (count, s))
    ths = rng.uniform(0, 2 * np.pi, (count, s))
    return [point_from_u_theta(list(u), list(t)) for u, t in zip(us, ths)]


# -- geometry -------------------------------------------------------------------------

def test_total_area_is_one():
    grid = build_grid(1, 12)
    z = grid.affine_z()[:, 0]
    # quadrature weights integrate against omega; integrating 1 gives the area
    assert np.isclose(grid.weights.sum(), 1.0, atol=1e-14)
    # omega density in u: dxdy / (pi q^2) maps to du dtheta / (2 pi)
    assert np.all(np.isfinite(ModelGeometry(1).density(z)))


def test_chart_transition_is_consistent(rng):
    for x in random_points(rng, 2, 20):
        y = x.in_charts((1, 1))
        assert np.allclose(y.unit_vectors(), x.unit_vectors(), atol=1e-12)


def test_twists_validated():
    with pytest.raises(ValueError):
        ModelGeometry(2, (0,))
    assert ModelGeometry(1, (-1,)).metaplectic
    assert not ModelGeometry(1).metaplectic


# -- Hamiltonians ---------------------------------------------------------------------

@pytest.mark.parametrize("preset,s", [("perturbed:0.1,0.15", 1), ("radial:1,0.5", 1),
                                      ("product:1,sqrt(2)", 2)])
def test_hamiltonian_vector_field_contracts_to_df(preset, s):
    geom = ModelGeometry(s)
    f = parse_preset(preset, s)
    rng = np.random.default_rng(7)
    worst = 0.0
    for x in random_points(rng, s, 1000):
        xi = vector_field_real(f, x)
        # omega(xi, v) = xi^T Omega v must equal df(v)
        worst = max(worst, np.max(np.abs(xi @ geom.omega_matrix(x.z) - f.gradient(x))))
    assert worst < 1e-12


def test_rotation_flow_closed_form():
    x = point_from_u_theta([0.6], [0.3])
    res = integrate_flow(ModelGeometry(1), rotation(), x, 0.25)
    assert np.allclose(res.point.z, x.z * np.exp(-0.5j * np.pi), atol=1e-11)


def test_preset_parsing_errors():
    for bad in ("nope", "radial", "product:1"):
        with pytest.raises(ValueError):
            parse_preset(bad)
    assert np.isclose(parse_preset("product:1,sqrt(2)").coef.real.max(), np.sqrt(2))


def test_separable_parts():
    parts, const = product([1.0, 2.0]).separable_parts()
    assert len(parts) == 2 and const == 0.0
    assert radial([1.0]).separable_parts() is not None


# -- flow invariants ------------------------------------------------------------------

@pytest.fixture(scope="module")
def flows():
    geom = ModelGeometry(1)
    f = parse_preset("perturbed:0.1,0.15")
    rng = np.random.default_rng(3)
    pts = random_points(rng, 1, 15)
    opts = FlowOptions(energy_tol=np.inf)
    return geom, f, pts, [integrate_flow(geom, f, x, 0.7, opts, variational=True) for x in pts]


def test_energy_conserved(flows):
    geom, f, pts, res = flows
    assert max(abs(f(r.point) - f(x)) for x, r in zip(pts, res)) < 1e-9


def test_dphi_symplectic(flows):
    geom, f, pts, res = flows
    for x, r in zip(pts, res):
        Om0, Om1 = geom.omega_matrix(x.z), geom.omega_matrix(r.point.z)
        assert np.linalg.norm(r.dphi.T @ Om1 @ r.dphi - Om0) / np.linalg.norm(Om0) < 1e-8


def test_dphi_transports_vector_field(flows):
    geom, f, pts, res = flows
    for x, r in zip(pts, res):
        assert np.allclose(r.dphi @ vector_field_real(f, x), vector_field_real(f, r.point),
                           atol=1e-8)


def test_group_law(flows):
    geom, f, pts, _ = flows
    for x in pts[:5]:
        a = integrate_flow(geom, f, x, 0.7).point
        b = integrate_flow(geom, f, integrate_flow(geom, f, x, 0.3).point, 0.4).point
        assert geom.distance(a, b) < 2e-10


def test_energy_drift_is_reported():
    from semiquant.phase_space import FlowIntegrationError
    x = point_from_u_theta([0.6], [0.3])
    with pytest.raises(FlowIntegrationError):
        integrate_flow(ModelGeometry(1), parse_preset("perturbed:0.1,0.15"), x, 0.5,
                       FlowOptions(rtol=1e-3, atol=1e-3, energy_tol=1e-15))


# -- orbits and volumes ---------------------------------------------------------------

@pytest.mark.parametrize("c", [0.1, 0.3, 0.8])
def test_volume_equals_period_rotation(c):
    assert np.isclose(liouville_volume(ModelGeometry(1), rotation(), c), 1.0, atol=1e-8)


def test_volume_equals_period_radial():
    # F(u) = u + 0.5 u^2 has F'(f_0) = 1 + f_0, period 1/F'
    c = 0.3
    u0 = -1 + np.sqrt(1 + 2 * c)
    assert np.isclose(liouville_volume(ModelGeometry(1), radial([1, 0.5]), c), 1 / (1 + u0),
                      atol=1e-8)


def test_critical_level_refused():
    with pytest.raises(CriticalLevelError):
        liouville_volume(ModelGeometry(1), rotation(), 0.0)


def test_product_orbit_stability_determinant():
    geom = ModelGeometry(2, (-1, -1))
    f = parse_preset("product:1,sqrt(2)")
    orbs = find_periodic_orbits(geom, f, 0.5, (0.62, 0.80))
    assert len(orbs) == 1
    o = orbs[0]
    assert np.isclose(o.resonant_time, 1 / np.sqrt(2), atol=1e-9)
    assert np.isclose(o.stab_det, 4 * np.sin(np.pi / np.sqrt(2)) ** 2, rtol=1e-8)
    assert o.nondegenerate
    assert set(o.csv_row()) == {"level", "period", "resonant_time", "action_mod1", "stab_det",
                                "nondeg_flag"}


def test_action_of_rotation_orbit():
    # integer spectrum k/p of Q_p(f_0) forces e^{-2 pi i p lambda} = 1 for all p,
    # so the action of f_0 over one period is an integer on every level
    geom, f = ModelGeometry(1), rotation()
    for c in (0.2, 0.7):
        x = point_from_u_theta([1 - c], [0.4])
        lam = prequantum_action(geom, f, x, 1.0)
        assert min(lam, 1 - lam) < 1e-9


def test_action_additivity():
    geom, f = ModelGeometry(1), radial([1, 0.5])
    x = point_from_u_theta([0.5], [0.2])
    T = liouville_volume(geom, f, f(x))
    lam1 = prequantum_action(geom, f, x, T, closure_tol=1e-7)
    for m in (2, 3):
        d = np.mod(prequantum_action(geom, f, x, m * T, closure_tol=1e-7) - m * lam1, 1.0)
        assert min(d, 1 - d) < 1e-8


def test_open_loop_rejected():
    x = point_from_u_theta([0.5], [0.2])
    with pytest.raises(OpenLoopError):
        prequantum_action(ModelGeometry(1), rotation(), x, 0.5)


# -- complex structures ---------------------------------------------------------------

def test_projectors(sphere, f_pert):
    x = point_from_u_theta([0.6], [0.3])
    td = pushforward_complex_structure(sphere, f_pert, 0.3, x)
    assert np.allclose(td.Jt @ td.Jt, -np.eye(2), atol=1e-9)
    assert np.allclose(td.Pi0t @ td.Pi0t, td.Pi0t, atol=1e-9)
    assert np.allclose(td.Pi0t + td.Pibar_t0, np.eye(2), atol=1e-9)
    v = np.array([1.0, 0.3])
    assert np.real(np.conj(v) @ td.Pi0t @ v) > 0


def test_a0_geometric_rotation_is_one(sphere, f0):
    x = point_from_u_theta([0.6], [0.3])
    assert abs(a0_squared_geometric(sphere, f0, 0.3, x) - 1) < 1e-10


def test_oblique_projectors_identity():
    J = np.array([[0.0, -1.0], [1.0, 0.0]])
    P, Pb = oblique_projectors(J, J)
    assert np.allclose(P + Pb, np.eye(2))
