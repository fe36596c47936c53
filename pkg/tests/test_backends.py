import numpy as np
import pytest

from semiquant import _kernels_py, kernels
from semiquant.phase_space import parse_preset

compiled = pytest.importorskip("semiquant._kernels")


@pytest.mark.parametrize("preset,s", [("perturbed:0.1,0.15", 1), ("radial:1,0.5", 1),
                                      ("product:1,sqrt(2)", 2)])
def test_compiled_matches_reference(preset, s):
    f = parse_preset(preset, s)
    rng = np.random.default_rng(11)
    P = 64
    z = (rng.uniform(-1, 1, (P, s)) + 1j * rng.uniform(-1, 1, (P, s))) * 0.8
    ch = rng.integers(0, 2, (P, s)).astype(np.int64)
    for order in (0, 1, 2):
        a = compiled.hamiltonian_jet(f.coef, f.ea, f.eb, f.ed, z, ch, order)
        b = _kernels_py.hamiltonian_jet(f.coef, f.ea, f.eb, f.ed, z, ch, order)
        assert set(a) == set(b)
        for key in a:
            assert np.allclose(a[key], b[key], rtol=1e-12, atol=1e-12), key
    y = np.empty((P, 2 * s))
    y[:, 0::2], y[:, 1::2] = z.real, z.imag
    ra = compiled.flow_rhs(f.coef, f.ea, f.eb, f.ed, y, ch, True)
    rb = _kernels_py.flow_rhs(f.coef, f.ea, f.eb, f.ed, y, ch, True)
    assert len(ra) == len(rb) == 4
    for x, w in zip(ra, rb):
        assert np.allclose(x, w, rtol=1e-12, atol=1e-12)


def test_default_backend_is_compiled():
    assert kernels.BACKEND == "compiled"
