"""Quantum state spaces on products of spheres.

Quadrature.  On one factor, ``u = 1/(1+|z|^2)`` and ``theta = arg z`` give
``omega = du dtheta / (2 pi)``.  Grids are Gauss-Legendre in ``u`` on (0, 1)
times uniform angles.  A grid of exactness degree ``D`` has ``D + 2`` radial
and ``2D + 1`` angular nodes per factor, which integrates
``z^a conj(z)^b (1+|z|^2)^{-a-b-2} omega`` exactly for ``a, b <= D``.

Bases.  ``H_p`` on a factor with twist ``m`` is spanned by ``z^k`` with
``0 <= k <= N = p + m`` and ``||z^k||^2 = k!(N-k)!/(N+1)!`` for the weight
``(1+|z|^2)^{-N}``.  Section values are handled in the *unitary frame* of a
chart: the holomorphic value times ``(1+|z|^2)^{-N/2}``.  In the affine chart
the normalized monomial reads ``e^{ik theta} R_k(u)`` with
``R_k(u) = sqrt(u^{N-k}(1-u)^k / B_k)``; in the chart ``w = 1/z`` it reads
``e^{i(N-k) arg w} R_k(u)``.  The two unitary frames differ by the phase
``(z/|z|)^N``.
"""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import gammaln, xlogy

from .phase_space.geometry import ChartPoint, ModelGeometry


class GridExactnessError(ValueError):
    """The quadrature grid is not exact for the requested integrands."""

    def __init__(self, required, have):
        super().__init__(f"quadrature grid of degree {have} is too coarse; "
                         f"degree >= {required} is required")
        self.required = required
        self.have = have


class GridMismatchError(ValueError):
    """Section grids built on different quadrature grids or bundles."""


# -- quadrature ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Tensor-product quadrature grid on ``factors`` spheres.

    Attributes
    ----------
    factors : int
    degree : int
        Exactness degree ``D``.
    u, wu : arrays (n_rad,)
        Gauss-Legendre nodes and weights on (0, 1) (weights sum to 1).
    n_ang : int
        Number of uniform angles per factor.
    """

    factors: int
    degree: int
    u: np.ndarray
    wu: np.ndarray
    n_ang: int

    @property
    def n_rad(self):
        return len(self.u)

    @property
    def theta(self):
        return 2 * np.pi * np.arange(self.n_ang) / self.n_ang

    @property
    def nodes_per_factor(self):
        return self.n_rad * self.n_ang

    @property
    def size(self):
        return self.nodes_per_factor ** self.factors

    def key(self):
        return (self.factors, self.n_rad, self.n_ang)

    @cached_property
    def factor_weights(self):
        """Weights of one factor, ordered radial-major, shape (n_rad * n_ang,)."""
        return np.repeat(self.wu / self.n_ang, self.n_ang)

    @cached_property
    def weights(self):
        w = self.factor_weights
        out = w
        for _ in range(self.factors - 1):
            out = np.multiply.outer(out, w).ravel()
        return out

    @cached_property
    def factor_u_theta(self):
        """``(u, theta)`` of one factor's nodes, radial-major."""
        return np.repeat(self.u, self.n_ang), np.tile(self.theta, self.n_rad)

    @cached_property
    def u_theta(self):
        """Per-node ``(U, TH)`` arrays of shape ``(size, factors)``."""
        u1, t1 = self.factor_u_theta
        n1 = len(u1)
        idx = np.indices((n1,) * self.factors).reshape(self.factors, -1).T
        return u1[idx], t1[idx]

    def affine_z(self):
        """Affine coordinates of the nodes, shape ``(size, factors)``."""
        U, TH = self.u_theta
        return np.sqrt(1.0 / U - 1.0) * np.exp(1j * TH)

    def chart_coordinates(self):
        """Best-chart coordinates ``(z, charts)`` of the nodes."""
        U, TH = self.u_theta
        return chart_coords(U, TH)


def chart_coords(U, TH):
    """Coordinates in the chart where ``|z| <= 1`` from ``(u, theta)`` arrays."""
    U = np.asarray(U, dtype=float)
    TH = np.asarray(TH, dtype=float)
    charts = (U < 0.5).astype(np.int64)
    with np.errstate(divide="ignore", invalid="ignore"):
        r0 = np.sqrt(np.clip(1.0 / U - 1.0, 0.0, None))
        r1 = np.sqrt(np.clip(U / (1.0 - U), 0.0, None))
        z = np.where(charts == 0, r0 * np.exp(1j * TH), r1 * np.exp(-1j * TH))
    return z, charts


def default_degree(p, twists=(0,), f_degree=0):
    """Grid degree ``p + max(m) + d + 2``, enough for every operator integrand."""
    return int(p + max(twists) + f_degree + 2)


def build_grid(geom, degree):
    """Quadrature grid of exactness degree ``degree`` on the model.

    Parameters
    ----------
    geom : ModelGeometry or int
        Geometry (or number of factors).
    degree : int
        Exactness degree ``D >= 0``.
    """
    if degree < 0:
        raise ValueError("grid degree must be non-negative")
    factors = geom.factors if isinstance(geom, ModelGeometry) else int(geom)
    n_rad = degree + 2
    x, w = np.polynomial.legendre.leggauss(n_rad)
    u = 0.5 * (x + 1.0)
    wu = 0.5 * w
    return QuadratureGrid(factors, int(degree), u, wu, 2 * degree + 1)


def fine_grid(factors, n_rad, n_ang):
    """Grid with explicit node counts (ambient spaces, non-polynomial integrands)."""
    x, w = np.polynomial.legendre.leggauss(n_rad)
    return QuadratureGrid(factors, -1, 0.5 * (x + 1.0), 0.5 * w, n_ang)


# -- bases -------------------------------------------------------------------

def log_beta(N, k):
    """``log(k!(N-k)!/(N+1)!)``, the log squared norm of ``z^k`` in ``O(N)``."""
    k = np.asarray(k, dtype=float)
    return gammaln(k + 1) + gammaln(N - k + 1) - gammaln(N + 2)


def radial_profiles(N, u):
    """``R_k(u) = sqrt(u^{N-k}(1-u)^k / B_k)`` for ``k = 0..N``, shape ``(N+1, len(u))``."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    k = np.arange(N + 1, dtype=float)[:, None]
    logv = xlogy(N - k, u[None, :]) + xlogy(k, 1.0 - u[None, :]) - log_beta(N, k)
    return np.exp(0.5 * logv)


@dataclass(frozen=True, eq=False)
class QuantumBasis:
    """Orthonormal monomial basis of ``H_p`` on a product of spheres.

    Attributes
    ----------
    geom : ModelGeometry
    p : int
    twists : tuple of int
    degrees : tuple of int
        ``N_i = p + m_i``; a negative entry means ``H_p = {0}``.
    """

    geom: ModelGeometry
    p: int
    twists: tuple
    degrees: tuple = field(init=False)

    def __post_init__(self):
        tw = tuple(int(m) for m in self.twists)
        if len(tw) != self.geom.factors:
            raise ValueError("one twist per factor is required")
        object.__setattr__(self, "twists", tw)
        object.__setattr__(self, "degrees", tuple(int(self.p) + m for m in tw))

    @property
    def factors(self):
        return self.geom.factors

    @property
    def factor_dims(self):
        return tuple(max(N + 1, 0) for N in self.degrees)

    @property
    def dim(self):
        return int(np.prod(self.factor_dims))

    def key(self):
        return f"{self.geom.key()}:p={self.p}:tw=" + ",".join(map(str, self.twists))

    @cached_property
    def index(self):
        """Multi-indices ``(dim, factors)``, first factor slowest."""
        if self.dim == 0:
            return np.zeros((0, self.factors), dtype=np.int64)
        return np.indices(self.factor_dims).reshape(self.factors, -1).T.astype(np.int64)

    def monomial_norms_sq(self):
        """``||z^k||^2 = prod_i k_i!(N_i-k_i)!/(N_i+1)!``."""
        out = np.zeros(self.dim)
        for i, N in enumerate(self.degrees):
            out += log_beta(N, self.index[:, i])
        return np.exp(out)

    def hermitian_weight(self, z):
        """Pointwise weight ``prod (1+|z_i|^2)^{-N_i}`` at affine coordinates."""
        z = np.atleast_2d(z)
        return np.prod((1.0 + np.abs(z) ** 2) ** (-np.array(self.degrees)), axis=1)

    # -- values ---------------------------------------------------------------
    def factor_grid_values(self, grid, i):
        """Unitary values of factor ``i`` on one grid factor, ``(n_rad*n_ang, N_i+1)``."""
        N = self.degrees[i]
        R = radial_profiles(N, grid.u)                     # (N+1, n_rad)
        ph = np.exp(1j * np.outer(grid.theta, np.arange(N + 1)))   # (n_ang, N+1)
        vals = R.T[:, None, :] * ph[None, :, :]
        return vals.reshape(grid.n_rad * grid.n_ang, N + 1)

    def grid_values(self, grid):
        """Unitary values of all basis sections at all nodes, ``(grid.size, dim)``."""
        if grid.factors != self.factors:
            raise GridMismatchError("grid and basis have different factor counts")
        out = self.factor_grid_values(grid, 0)
        for i in range(1, self.factors):
            out = np.einsum("aj,bk->abjk", out, self.factor_grid_values(grid, i)).reshape(
                out.shape[0] * grid.nodes_per_factor, -1)
        return out

    def values_at(self, points):
        """Unitary-frame values at ChartPoints (each in its own charts), ``(P, dim)``."""
        if isinstance(points, ChartPoint):
            points = [points]
        z = np.array([pt.z for pt in points], dtype=complex)
        ch = np.array([pt.charts for pt in points], dtype=np.int64)
        return self.values_chart(z, ch)

    def values_chart(self, z, charts):
        """Unitary-frame values from chart coordinate arrays ``(P, s)``."""
        z = np.atleast_2d(z)
        charts = np.broadcast_to(charts, z.shape)
        P = z.shape[0]
        out = np.ones((P, 1), dtype=complex)
        for i, N in enumerate(self.degrees):
            zi = z[:, i]
            r2 = np.abs(zi) ** 2
            c1 = charts[:, i] == 1
            u = np.where(c1, r2 / (1.0 + r2), 1.0 / (1.0 + r2))
            R = radial_profiles(N, u).T                       # (P, N+1)
            k = np.arange(N + 1)
            ang = np.angle(zi)[:, None]
            ph = np.where(c1[:, None], np.exp(1j * (N - k)[None, :] * ang),
                          np.exp(1j * k[None, :] * ang))
            out = np.einsum("pa,pb->pab", out, R * ph).reshape(P, -1)
        return out

    def frame_phase(self, point):
        """Phase turning unitary values in ``point``'s charts into affine-chart ones.

        Multiply values from :meth:`values_at` by this to express them in the
        affine unitary frame (undefined at the affine pole).
        """
        ph = 1.0 + 0j
        for N, c, zi in zip(self.degrees, point.charts, point.z):
            if c == 1:
                ph *= np.exp(-1j * N * np.angle(zi))
        return ph


def build_basis(geom, p, twists=None):
    """Orthonormal basis of ``H_p`` for twist ``twists`` (default: ``geom.twists``).

    ``dim`` is ``prod(p + m_i + 1)``; a factor with ``p + m_i < 0`` gives the
    zero space.
    """
    tw = geom.twists if twists is None else tuple(twists)
    return QuantumBasis(geom, int(p), tw)


def riemann_roch_dimension(geom, p, twists=None):
    """Riemann-Roch count ``prod_i (p + m_i + 1)`` (0 if some factor is negative)."""
    tw = geom.twists if twists is None else tuple(twists)
    dims = [p + m + 1 for m in tw]
    return 0 if any(d <= 0 for d in dims) else int(np.prod(dims))


# -- sections on grids --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SectionGrid:
    """Values of a section of ``O(N)`` at the nodes of a grid.

    ``values`` are in the affine-chart unitary frame (holomorphic value times
    ``(1+|z|^2)^{-N/2}``), which stays finite for large ``p``;
    :meth:`holomorphic` returns the raw affine trivialization.
    """

    grid: QuadratureGrid
    degrees: tuple
    values: np.ndarray

    def holomorphic(self):
        z = self.grid.affine_z()
        return self.values * np.prod((1.0 + np.abs(z) ** 2) ** (0.5 * np.array(self.degrees)),
                                     axis=1)

    def pointwise_norm(self):
        return np.abs(self.values)

    @classmethod
    def from_coefficients(cls, basis, grid, coeffs):
        return cls(grid, basis.degrees, basis.grid_values(grid) @ np.asarray(coeffs))

    @classmethod
    def from_function(cls, basis, grid, func):
        """Sample ``func(z_affine) -> holomorphic-trivialization values``."""
        z = grid.affine_z()
        vals = func(z) * basis.hermitian_weight(z) ** 0.5
        return cls(grid, basis.degrees, vals)


def _check_compatible(a, b):
    if a.grid is not b.grid and a.grid.key() != b.grid.key():
        raise GridMismatchError("sections live on different grids")
    if tuple(a.degrees) != tuple(b.degrees):
        raise GridMismatchError("sections of different bundles")


def l2_inner(grid, s1, s2, p=None, twists=None):
    """``<s1, s2> = int h(s1, s2) omega^n/n!`` (linear in ``s1``).

    ``p`` and ``twists`` are optional consistency checks against the
    sections' bundle degrees.
    """
    _check_compatible(s1, s2)
    if s1.grid.key() != grid.key():
        raise GridMismatchError("sections do not live on this grid")
    if p is not None:
        tw = twists if twists is not None else (0,) * grid.factors
        if tuple(p + m for m in tw) != tuple(s1.degrees):
            raise GridMismatchError("sections are not in the requested bundle")
    return complex(np.sum(grid.weights * s1.values * np.conj(s2.values)))


def bergman_project(basis, grid, s):
    """Coefficients ``c_j = <s, e_j>`` of the orthogonal projection onto ``H_p``."""
    if tuple(s.degrees) != tuple(basis.degrees):
        raise GridMismatchError("section and basis belong to different bundles")
    E = basis.grid_values(grid)
    return E.conj().T @ (grid.weights * s.values)


# -- kernels and coherent states ---------------------------------------------------

@dataclass(frozen=True, eq=False)
class KernelSlice:
    """Kernel values ``K(x_a, y_a)`` in the unitary frames of the points' charts."""

    xs: list
    ys: list
    values: np.ndarray

    def csv_rows(self):
        for x, v in zip(self.xs, self.values):
            yield {"x_re": float(x.z[0].real), "x_im": float(x.z[0].imag),
                   "chart": int(x.charts[0]), "value_re": float(v.real),
                   "value_im": float(v.imag), "pointwise_norm": float(abs(v))}


def _matrix(M):
    return M.matrix if hasattr(M, "matrix") else np.asarray(M)


def kernel_eval(basis, M, x, y):
    """``K(x, y) = sum_jk M_jk e_j(x) conj(e_k(y))`` in unitary frames."""
    ex = basis.values_at(x)[0]
    ey = basis.values_at(y)[0]
    return complex(ex @ _matrix(M) @ np.conj(ey))


def kernel_slice(basis, M, xs, ys):
    """Vectorized :func:`kernel_eval` over point pairs."""
    Ex = basis.values_at(list(xs))
    Ey = basis.values_at(list(ys))
    vals = np.einsum("aj,jk,ak->a", Ex, _matrix(M), np.conj(Ey))
    return KernelSlice(list(xs), list(ys), vals)


def kernel_trace_quadrature(basis, grid, M):
    """``int K(x, x) dv_X`` by quadrature (equals ``Tr M``)."""
    E = basis.grid_values(grid)
    diag = np.einsum("aj,jk,ak->a", E, _matrix(M), np.conj(E))
    return complex(np.sum(grid.weights * diag))


def coherent_state(basis, x0):
    """Coefficients of the coherent state at ``x0``.

    ``s_{x0}(x) = P_p(x, x0) zeta`` with ``zeta`` the unit vector of the
    unitary frame of ``x0``'s chart, so ``c_j = conj(e_j(x0))``.
    """
    return np.conj(basis.values_at(x0)[0])


def pointwise_norm(basis, coeffs, points):
    """``|s(x)|`` at ChartPoints."""
    return np.abs(basis.values_at(points) @ np.asarray(coeffs))
