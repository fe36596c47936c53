"""Model geometries: products of Riemann spheres with the normalized area form.

Each factor carries ``omega = (i/2pi) dz ^ dzbar / (1+|z|^2)^2``, which in real
coordinates is ``dx ^ dy / (pi (1+|z|^2)^2)`` and has total area 1.  The
prequantum bundle is ``O(1)`` with Hermitian weight ``(1+|z|^2)^{-1}``; a twist
``m_i`` replaces ``L^p`` by ``O(p + m_i)`` on factor ``i``.  ``m_i = -1`` is the
square root of the canonical bundle (metaplectic correction).
"""
from dataclasses import dataclass, field

import numpy as np

#: radius of the round sphere of total area 1
SPHERE_RADIUS = 0.5 / np.sqrt(np.pi)


@dataclass(frozen=True)
class ModelGeometry:
    """Product of ``factors`` Riemann spheres with per-factor twists.

    Parameters
    ----------
    factors : int
        Number ``s`` of sphere factors (complex dimension ``n = s``).
    twists : tuple of int, optional
        Twist power ``m_i`` per factor; defaults to all zeros.
    """

    factors: int = 1
    twists: tuple = None

    def __post_init__(self):
        if self.factors < 1:
            raise ValueError("a model needs at least one factor")
        tw = (0,) * self.factors if self.twists is None else tuple(int(m) for m in self.twists)
        if len(tw) != self.factors:
            raise ValueError(f"expected {self.factors} twists, got {len(tw)}")
        object.__setattr__(self, "twists", tw)

    @property
    def n(self):
        """Complex dimension."""
        return self.factors

    @property
    def metaplectic(self):
        return all(m == -1 for m in self.twists)

    def with_twists(self, twists):
        return ModelGeometry(self.factors, tuple(twists))

    def key(self):
        """Stable text key used by the disk cache."""
        return f"S2^{self.factors}:tw=" + ",".join(str(m) for m in self.twists)

    # -- pointwise tensors in real chart coordinates ------------------------
    def density(self, z):
        """Coefficient ``rho`` with ``omega = rho dx ^ dy`` per factor.

        Parameters
        ----------
        z : complex array (..., s)
        """
        z = np.asarray(z)
        return 1.0 / (np.pi * (1.0 + np.abs(z) ** 2) ** 2)

    def omega_matrix(self, z):
        """Matrix ``Omega`` with ``omega(u, v) = u^T Omega v`` at ``z``."""
        rho = self.density(np.asarray(z).reshape(self.factors))
        Om = np.zeros((2 * self.factors, 2 * self.factors))
        for i, r in enumerate(rho):
            Om[2 * i, 2 * i + 1] = r
            Om[2 * i + 1, 2 * i] = -r
        return Om

    def j0_matrix(self):
        """Standard complex structure (``J d/dx = d/dy``) in any chart."""
        J = np.zeros((2 * self.factors, 2 * self.factors))
        for i in range(self.factors):
            J[2 * i + 1, 2 * i] = 1.0
            J[2 * i, 2 * i + 1] = -1.0
        return J

    def metric_matrix(self, z):
        """Round metric ``g(u, v) = omega(u, J_0 v)``."""
        return self.omega_matrix(z) @ self.j0_matrix()

    def distance(self, x, y):
        """Geodesic distance in the product of round spheres of area 1."""
        ux = x.unit_vectors()
        uy = y.unit_vectors()
        cosang = np.clip(np.sum(ux * uy, axis=1), -1.0, 1.0)
        d = SPHERE_RADIUS * np.arccos(cosang)
        return float(np.sqrt(np.sum(d ** 2)))


@dataclass(frozen=True)
class ChartPoint:
    """A point of the model given chart-wise.

    Parameters
    ----------
    charts : tuple of int
        0 for the affine chart, 1 for the chart at infinity (``w = 1/z``).
    z : complex array (s,)
        Coordinate in the selected chart of each factor.
    """

    charts: tuple
    z: np.ndarray = field(compare=False)

    def __post_init__(self):
        z = np.atleast_1d(np.asarray(self.z, dtype=complex)).copy()
        ch = tuple(int(c) for c in self.charts)
        if len(ch) != z.shape[0]:
            raise ValueError("charts and coordinates differ in length")
        if any(c not in (0, 1) for c in ch):
            raise ValueError("chart index must be 0 or 1")
        z.setflags(write=False)
        object.__setattr__(self, "charts", ch)
        object.__setattr__(self, "z", z)

    @classmethod
    def affine(cls, *zs):
        """Point from affine coordinates, canonicalized (``|z| <= 1``)."""
        return cls((0,) * len(zs), np.array(zs, dtype=complex)).canonical()

    @property
    def factors(self):
        return len(self.charts)

    def canonical(self):
        """Representative with ``|z| <= 1`` in every factor."""
        ch = list(self.charts)
        z = self.z.copy()
        for i in range(len(ch)):
            if abs(z[i]) > 1.0:
                z[i] = 1.0 / z[i]
                ch[i] = 1 - ch[i]
        return ChartPoint(tuple(ch), z)

    def in_charts(self, charts):
        """Same point expressed in the requested charts."""
        z = self.z.copy()
        for i, (c_old, c_new) in enumerate(zip(self.charts, charts)):
            if c_old != c_new:
                if z[i] == 0:
                    raise ValueError("point at a chart pole has no coordinate in the other chart")
                z[i] = 1.0 / z[i]
        return ChartPoint(tuple(charts), z)

    def affine_coords(self):
        """Affine coordinates (``inf`` at the pole of the affine chart)."""
        out = np.empty(self.factors, dtype=complex)
        for i, (c, zi) in enumerate(zip(self.charts, self.z)):
            if c == 0:
                out[i] = zi
            else:
                out[i] = np.inf if zi == 0 else 1.0 / zi
        return out

    def u_theta(self):
        """Per-factor ``u = 1/(1+|z|^2)`` and affine angle ``arg z``."""
        u = np.empty(self.factors)
        th = np.empty(self.factors)
        for i, (c, zi) in enumerate(zip(self.charts, self.z)):
            r2 = abs(zi) ** 2
            if c == 0:
                u[i] = 1.0 / (1.0 + r2)
                th[i] = np.angle(zi)
            else:
                u[i] = r2 / (1.0 + r2)
                th[i] = -np.angle(zi)
        return u, th

    def unit_vectors(self):
        """Per-factor images on the unit sphere in R^3 (stereographic)."""
        u, th = self.u_theta()
        cos_pol = 2.0 * u - 1.0          # z = 0 maps to the north pole
        sin_pol = np.sqrt(np.clip(1.0 - cos_pol ** 2, 0.0, None))
        return np.stack([sin_pol * np.cos(th), sin_pol * np.sin(th), cos_pol], axis=1)

    def real_vector(self):
        """Interleaved real chart coordinates ``(x_1, y_1, ...)``."""
        out = np.empty(2 * self.factors)
        out[0::2] = self.z.real
        out[1::2] = self.z.imag
        return out

    @classmethod
    def from_real(cls, charts, y):
        y = np.asarray(y, dtype=float)
        return cls(tuple(charts), y[0::2] + 1j * y[1::2])


def chart_jacobian(z):
    """Real 2x2 Jacobian of ``z -> 1/z`` at ``z``."""
    c = -1.0 / z ** 2
    return np.array([[c.real, -c.imag], [c.imag, c.real]])
