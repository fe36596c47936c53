"""Operators on ``H_p``: Toeplitz, Kostant-Souriau, evolution, pullback, transport.

Conventions (checked on the rotation model by the test-suite)
---------------------------------------------------------------
* For a holomorphic section ``s = sigma e^N`` of ``O(N)`` on one factor,
  ``(i/2pi) nabla_{xi_f} s = q^2 d_zbar f (d_z sigma - N zbar sigma / q) e^N``
  with ``q = 1+|z|^2``.
* The Kostant-Souriau operator is ``Q_p(f) = P (f + (i/2pi p) nabla_{xi_f}) P``
  plus, for twisted bundles, ``mu_E / p`` where ``mu_E`` is the moment of the
  chosen lift of the flow to the twist: ``m f`` for ``O(m)`` lifted through
  ``O(1)``, and ``(1/2) q^2 d_z d_zbar f`` for the metaplectic lift of
  ``K^{1/2}`` (holomorphic flows only).
* The evolution is ``U(t) = exp(-2 pi i t p Q_p(f))``.  With these signs
  ``f_0 = |z|^2/(1+|z|^2)`` has ``Q_p(f_0) z^k = (k/p) z^k`` and
  ``U(t)`` equals the pullback of the lifted flow on the rotation model.
* The pullback acts in unitary frames as
  ``(phi_t^* s)(x) = e^{-2 pi i t (p f(x) + mu(x))} c^{-1} s(phi_t x)`` where
  ``c = exp(-i sum N_i alpha_i)`` is the parallel transport of the unitary
  frame along the trajectory.
"""
from dataclasses import dataclass, field

import numpy as np

from .hilbert import (GridExactnessError, QuadratureGrid, QuantumBasis, build_basis,
                      fine_grid, radial_profiles)
from .phase_space.flow import FlowOptions, integrate_batch
from .phase_space.geometry import ModelGeometry


class NotHolomorphicFlowError(ValueError):
    """The metaplectic lift is only implemented for holomorphic flows."""


class IllConditionedGramError(np.linalg.LinAlgError):
    """A Gram matrix in the ambient grid space is too ill-conditioned."""


# -- containers -------------------------------------------------------------------

@dataclass
class OperatorMatrix:
    """Dense matrix of an operator between two bases.

    Attributes
    ----------
    matrix : complex array (dim_dst, dim_src)
    basis : QuantumBasis
        Target basis (and source basis unless ``basis_src`` is given).
    hermitian, unitary : bool
        Structural flags; the defects are available through
        :meth:`hermitian_defect` and :meth:`unitary_defect`.
    provenance : str
        One of ``toeplitz``, ``kostant_souriau``, ``covariant``, ``evolution``,
        ``pullback``, ``transport``.
    """

    matrix: np.ndarray
    basis: QuantumBasis = None
    basis_src: QuantumBasis = None
    hermitian: bool = False
    unitary: bool = False
    provenance: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.matrix.shape

    def hermitian_defect(self):
        return float(np.linalg.norm(self.matrix - self.matrix.conj().T, 2))

    def unitary_defect(self):
        M = self.matrix
        return float(np.linalg.norm(M.conj().T @ M - np.eye(M.shape[1]), 2))

    def spectral(self):
        return SpectralData.from_matrix(self.matrix)

    def __matmul__(self, other):
        B = other.matrix if isinstance(other, OperatorMatrix) else other
        return OperatorMatrix(self.matrix @ B, self.basis,
                              getattr(other, "basis_src", None) or getattr(other, "basis", None),
                              provenance=f"{self.provenance}*{getattr(other, 'provenance', '')}")

    def csv_rows(self):
        for (j, k), v in np.ndenumerate(self.matrix):
            yield {"row": j, "col": k, "re": float(v.real), "im": float(v.imag)}


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Eigen-decomposition ``M = V diag(eigenvalues) V^H`` of a Hermitian matrix."""

    eigenvalues: np.ndarray
    vectors: np.ndarray

    @classmethod
    def from_matrix(cls, M):
        M = M.matrix if isinstance(M, OperatorMatrix) else np.asarray(M)
        H = 0.5 * (M + M.conj().T)
        lam, V = np.linalg.eigh(H)
        return cls(lam, V)

    @classmethod
    def diagonal(cls, eigenvalues):
        lam = np.sort(np.asarray(eigenvalues, dtype=float))
        return cls(lam, np.eye(len(lam), dtype=complex))

    @property
    def dim(self):
        return len(self.eigenvalues)

    def reconstruct(self):
        return (self.vectors * self.eigenvalues) @ self.vectors.conj().T

    def reconstruction_defect(self, M):
        M = M.matrix if isinstance(M, OperatorMatrix) else M
        return float(np.linalg.norm(M - self.reconstruct(), 2))

    def orthonormality_defect(self):
        V = self.vectors
        return float(np.linalg.norm(V.conj().T @ V - np.eye(V.shape[1]), 2))

    def function(self, func):
        """Matrix of ``func(M)`` by functional calculus."""
        return (self.vectors * func(self.eigenvalues)) @ self.vectors.conj().T


# -- grid helpers --------------------------------------------------------------

def grid_degree(grid):
    """Exactness degree of a grid (also for grids built with explicit counts)."""
    return min(grid.n_rad - 2, (grid.n_ang - 1) // 2)


def _check_grid(grid, required):
    have = grid_degree(grid)
    if have < required:
        raise GridExactnessError(required, have)


def _subgrid(grid):
    return QuadratureGrid(1, grid.degree, grid.u, grid.wu, grid.n_ang)


def _factor_basis(basis, i):
    m = basis.twists[i]
    return QuantumBasis(ModelGeometry(1, (m,)), basis.p, (m,))


def _assemble_1(grid, N, F):
    """``M_jk = sum_r w_r R_j R_k Ft(r, j-k)`` for ``F`` sampled on ``(n_rad, n_ang)``."""
    Ft = np.fft.fft(F, axis=1) / grid.n_ang
    R = radial_profiles(N, grid.u)
    Rw = R * grid.wu
    M = np.zeros((N + 1, N + 1), dtype=complex)
    k = np.arange(N + 1)
    # angular modes absent from F (beyond round-off) contribute nothing
    scale = np.max(np.abs(Ft)) if Ft.size else 0.0
    live = np.max(np.abs(Ft), axis=0) > 1e-15 * scale
    for m in range(-N, N + 1):
        if not live[m % grid.n_ang]:
            continue
        col = Ft[:, m % grid.n_ang]
        if m >= 0:
            M[k[: N + 1 - m] + m, k[: N + 1 - m]] = (Rw[m:] * R[: N + 1 - m]) @ col
        else:
            M[k[: N + 1 + m], k[: N + 1 + m] - m] = (Rw[: N + 1 + m] * R[-m:]) @ col
    return M


def _assemble_2(grid, N1, N2, F, max_elems=2e8):
    """Two-factor analogue of :func:`_assemble_1`; ``F`` has shape (r1, a1, r2, a2)."""
    n = grid.n_ang
    d1, d2 = N1 + 1, N2 + 1
    if grid.n_rad ** 2 * (2 * N1 + 1) * d2 * d2 > max_elems:
        raise MemoryError("two-factor dense assembly too large; use a separable Hamiltonian "
                          "or a smaller p")
    Ft = np.fft.fft2(F, axes=(1, 3)) / (n * n)
    R1 = radial_profiles(N1, grid.u)
    R2 = radial_profiles(N2, grid.u)
    m1 = np.arange(-N1, N1 + 1)
    D2 = (np.arange(d2)[:, None] - np.arange(d2)[None, :]) % n
    Fsel = Ft[:, m1 % n][:, :, :, D2]                      # (r1, m1, r2, d2, d2)
    G = np.einsum("s,js,ks,rmsjk->rmjk", grid.wu, R2, R2, Fsel)
    D1 = np.arange(d1)[:, None] - np.arange(d1)[None, :] + N1
    Gsel = G[:, D1]                                        # (r1, d1, d1, d2, d2)
    M = np.einsum("r,jr,kr,rjkab->jakb", grid.wu, R1, R1, Gsel)
    return M.reshape(d1 * d2, d1 * d2)


def _assemble(basis, grid, F):
    """Matrix ``<F e_k, e_j>`` for a function sampled on the (product) grid."""
    if basis.factors == 1:
        return _assemble_1(grid, basis.degrees[0], F.reshape(grid.n_rad, grid.n_ang))
    if basis.factors == 2:
        shape = (grid.n_rad, grid.n_ang, grid.n_rad, grid.n_ang)
        return _assemble_2(grid, basis.degrees[0], basis.degrees[1], F.reshape(shape))
    raise NotImplementedError("dense assembly supports one or two factors")


def _kron_sum(mats):
    """``sum_i I x .. x A_i x .. x I`` for square matrices ``A_i``."""
    dims = [A.shape[0] for A in mats]
    total = np.zeros((int(np.prod(dims)),) * 2, dtype=complex)
    for i, A in enumerate(mats):
        left = np.eye(int(np.prod(dims[:i])))
        right = np.eye(int(np.prod(dims[i + 1:])))
        total += np.kron(np.kron(left, A), right)
    return total


def _grid_jets(f, grid):
    """Values and affine-chart derivatives of ``f`` at the grid nodes.

    Returns a dict with ``f`` (size,), per-factor affine ``f_zbar`` (size, s),
    ``lap`` = ``(1/2) q^2 f_{z zbar}`` per factor and ``hol`` =
    ``d_zbar(q^2 f_zbar)`` per factor (evaluated in the best chart).
    """
    z, ch = grid.chart_coordinates()
    jet = f.jet(z, ch, 2)
    za = grid.affine_z()
    s = grid.factors
    fz0 = np.empty(z.shape, dtype=complex)
    lap = np.empty(z.shape)
    hol = np.empty(z.shape)
    for i in range(s):
        c1 = ch[:, i] == 1
        w = z[:, i]
        fz = jet["f_z"][:, i]
        fz0[:, i] = np.where(c1, -w ** 2 * fz, fz)
        q = 1.0 + np.abs(w) ** 2
        lap[:, i] = 0.5 * q ** 2 * jet["f_zw"][:, i, i].real
        hol[:, i] = np.abs(2.0 * q * w * jet["f_w"][:, i] + q ** 2 * jet["f_ww"][:, i, i])
    return {"f": jet["f"], "f_zbar": np.conj(fz0), "lap": lap, "hol": hol, "z": za}


def _twist_mode(basis, mode):
    tw = basis.twists
    if mode is None:
        mode = "metaplectic" if all(m == -1 for m in tw) else "kostant"
    if mode not in ("kostant", "metaplectic"):
        raise ValueError(f"unknown twist lift {mode!r}")
    if mode == "metaplectic" and not all(m == -1 for m in tw):
        raise ValueError("the metaplectic lift needs twist -1 on every factor")
    return mode


# -- Toeplitz and Kostant-Souriau ---------------------------------------------------

def toeplitz(basis, grid, f):
    """Toeplitz matrix ``M_jk = <f e_k, e_j>``.

    Raises
    ------
    GridExactnessError
        If the grid degree is below ``max(N_i) + deg f``.
    """
    _check_grid(grid, max(basis.degrees) + f.max_degree)
    sep = f.separable_parts() if basis.factors > 1 else None
    if sep is not None:
        parts, const = sep
        mats = [toeplitz(_factor_basis(basis, i), _subgrid(grid), part).matrix
                for i, part in enumerate(parts)]
        M = _kron_sum(mats) + const * np.eye(basis.dim)
    else:
        M = _assemble(basis, grid, f.values(grid.affine_z()))
    return OperatorMatrix(M, basis, hermitian=True, provenance="toeplitz")


def _scaled_covariant(basis, grid, jets):
    """Matrix of ``P (i/2pi) nabla_{xi_f} P`` (the operator ``C`` with ``pQ = T + C``)."""
    C = np.zeros((basis.dim, basis.dim), dtype=complex)
    z = jets["z"]
    for i, N in enumerate(basis.degrees):
        G1 = (1.0 + np.abs(z[:, i]) ** 2) ** 2 * jets["f_zbar"][:, i]
        H1 = G1 / z[:, i]
        H2 = -N * G1 * np.conj(z[:, i]) / (1.0 + np.abs(z[:, i]) ** 2)
        kcol = basis.index[:, i].astype(float)
        C += _assemble(basis, grid, H1) * kcol[None, :] + _assemble(basis, grid, H2)
    return C


def covariant_derivative(basis, grid, f):
    """Matrix of ``P nabla^{E_p}_{xi_f} P`` (equal to ``-2 pi i`` times ``C``)."""
    _check_grid(grid, max(basis.degrees) + f.max_degree + 1)
    sep = f.separable_parts() if basis.factors > 1 else None
    if sep is not None:
        parts, _ = sep
        mats = [covariant_derivative(_factor_basis(basis, i), _subgrid(grid), part).matrix
                for i, part in enumerate(parts)]
        M = _kron_sum(mats)
    else:
        M = -2j * np.pi * _scaled_covariant(basis, grid, _grid_jets(f, grid))
    return OperatorMatrix(M, basis, provenance="covariant")


def twist_moment_values(f, basis, jets, mode):
    """Moment ``mu`` of the lift to the twist bundle, sampled on the grid."""
    tw = basis.twists
    if all(m == 0 for m in tw):
        return np.zeros_like(jets["f"])
    if mode == "metaplectic":
        if np.max(jets["hol"]) > 1e-9 * max(1.0, np.max(np.abs(jets["f"]))):
            raise NotHolomorphicFlowError(
                "the metaplectic lift needs a holomorphic Hamiltonian flow")
        return jets["lap"].sum(axis=1)
    if len(set(tw)) == 1:
        return tw[0] * jets["f"]
    raise ValueError("unequal Kostant twists need a separable Hamiltonian")


def kostant_souriau(basis, grid, f, mode=None):
    """Kostant-Souriau operator ``Q_p(f)`` (Hermitian).

    Parameters
    ----------
    basis : QuantumBasis
    grid : QuadratureGrid
        Degree at least ``max(N_i) + deg f + 1`` (see :func:`hilbert.default_degree`).
    f : Hamiltonian
    mode : {None, "kostant", "metaplectic"}
        Lift of the flow to the twist; ``None`` picks ``metaplectic`` when every
        twist is ``-1`` and ``kostant`` otherwise.
    """
    mode = _twist_mode(basis, mode)
    _check_grid(grid, max(basis.degrees) + f.max_degree + 1)
    p = basis.p
    sep = f.separable_parts() if basis.factors > 1 else None
    if sep is not None:
        parts, const = sep
        mats = [p * kostant_souriau(_factor_basis(basis, i), _subgrid(grid), part,
                                    mode).matrix for i, part in enumerate(parts)]
        pQ = _kron_sum(mats) + p * const * np.eye(basis.dim)
    else:
        jets = _grid_jets(f, grid)
        mu = twist_moment_values(f, basis, jets, mode)
        pQ = _assemble(basis, grid, p * jets["f"] + mu) + _scaled_covariant(basis, grid, jets)
    Q = pQ / p
    raw_defect = float(np.linalg.norm(Q - Q.conj().T, 2))
    Q = 0.5 * (Q + Q.conj().T)
    return OperatorMatrix(Q, basis, hermitian=True, provenance="kostant_souriau",
                          meta={"mode": mode, "hermitian_defect_raw": raw_defect})


def separable_factor_spectra(basis, grid, f, mode=None):
    """Per-factor eigenvalues of ``Q_p(f)`` for separable ``f``.

    ``Q_p`` is a Kronecker sum, so its spectrum is the set of sums
    ``const + sum_i lambda_{i,k_i}``.

    Returns
    -------
    (list of ascending arrays, float const)
    """
    sep = f.separable_parts()
    if sep is None:
        raise ValueError("Hamiltonian is not separable")
    parts, const = sep
    out = [np.linalg.eigvalsh(kostant_souriau(_factor_basis(basis, i), _subgrid(grid),
                                              part, mode).matrix)
           for i, part in enumerate(parts)]
    return out, float(const)


def separable_spectrum(basis, grid, f, mode=None):
    """All eigenvalues of ``Q_p(f)`` for separable ``f``, from per-factor spectra."""
    parts, const = separable_factor_spectra(basis, grid, f, mode)
    lam = np.array([const])
    for li in parts:
        lam = (lam[:, None] + li[None, :]).ravel()
    return np.sort(lam)


def quantize(geom, f, p, mode=None, degree=None):
    """Kostant-Souriau operator on the default basis and exact grid of ``geom``.

    Returns
    -------
    OperatorMatrix
    """
    from .hilbert import build_grid, default_degree
    basis = build_basis(geom, p)
    D = degree if degree is not None else default_degree(p, geom.twists, f.max_degree)
    grid = build_grid(geom, D)
    return kostant_souriau(basis, grid, f, mode)


# -- evolution ----------------------------------------------------------------------

def evolution(Q, t, p):
    """``U(t) = V exp(-2 pi i t p Lambda) V^H`` for a :class:`SpectralData` ``Q``."""
    if isinstance(Q, OperatorMatrix):
        Q = Q.spectral()
    U = Q.function(lambda lam: np.exp(-2j * np.pi * t * p * lam))
    return OperatorMatrix(U, unitary=True, provenance="evolution", meta={"t": t, "p": p})


# -- pullback and transport ------------------------------------------------------------

class PushedFamily:
    """Sections ``(phi_t^*)^{-1} e_k`` of a basis, evaluable at any points.

    Values at ``y`` come from the backward trajectory ``x = phi_{-t}(y)``:
    ``e^{2 pi i t (p f + mu)(x)} c_{x->y} e_k(x)`` in unitary frames.
    """

    def __init__(self, geom, f, basis, t, opts=None, mu=None):
        self.geom, self.f, self.basis, self.t = geom, f, basis, float(t)
        self.opts = opts or FlowOptions()
        self.mu = mu
        self.degrees = basis.degrees
        self.dim = basis.dim

    def values_chart(self, z, charts):
        st = integrate_batch(self.f, (z, charts), -self.t, self.opts)
        return _pushed_values(self.basis, self.f, st, self.t, self.mu)


def _pushed_values(basis, f, st, t, mu):
    """Values of the pushed basis at the start points of a backward batch ``st``."""
    N = np.array(basis.degrees, dtype=float)
    lift = p_f = basis.p * st.f
    if mu is not None:
        lift = p_f + mu(st.z, st.charts)
    phase = np.exp(2j * np.pi * t * lift + 1j * st.alpha @ N)
    return basis.values_chart(st.z, st.charts) * phase[:, None]


def _lift_mu(f, basis, mode):
    """Moment of the twist lift as a function of chart arrays (``None`` if zero)."""
    tw = basis.twists
    if all(m == 0 for m in tw):
        return None
    if mode == "metaplectic":
        def mu(z, ch):
            jet = f.jet(z, ch, 2)
            q = 1.0 + np.abs(z) ** 2
            return 0.5 * np.einsum("pi,pii->p", q ** 2, jet["f_zw"]).real
        return mu
    if len(set(tw)) == 1:
        return lambda z, ch: tw[0] * f.jet(z, ch, 0)["f"]
    raise ValueError("unequal Kostant twists are not supported for the pullback")


def pullback_operator(geom, f, t, basis_src, basis_dst, grid, opts=None, mode=None):
    """Matrix ``A_jk = <phi_t^* s_k, e_j>`` of the pullback of the lifted flow.

    Parameters
    ----------
    basis_src : QuantumBasis or PushedFamily
        Sections ``s_k`` spanning ``H_{p,t}``; anything with
        ``values_chart(z, charts)`` and ``degrees``.
    basis_dst : QuantumBasis
        Orthonormal basis ``e_j`` of ``H_{p,0}``.
    grid : QuadratureGrid
        Quadrature for the inner products (needs to resolve the pulled-back
        sections; for holomorphic flows the default grid is exact).
    """
    opts = opts or FlowOptions()
    mode = _twist_mode(basis_dst, mode)
    mu = _lift_mu(f, basis_dst, mode)
    z0, ch0 = grid.affine_z(), np.zeros((grid.size, grid.factors), dtype=np.int64)
    z0c, chc = grid.chart_coordinates()
    st = integrate_batch(f, (z0c, chc), t, opts)
    N = np.array(basis_dst.degrees, dtype=float)
    lift = basis_dst.p * st.f
    if mu is not None:
        lift = lift + mu(z0c, chc)
    # frame at the start: grid values are in the affine unitary frame, the
    # trajectory starts in the best chart; convert with the frame phase
    start_phase = np.ones(grid.size, dtype=complex)
    for i, Ni in enumerate(basis_dst.degrees):
        c1 = chc[:, i] == 1
        start_phase *= np.where(c1, np.exp(1j * Ni * np.angle(z0c[:, i])), 1.0)
    phase = np.exp(-2j * np.pi * t * lift + 1j * st.alpha @ N) / start_phase
    S = basis_src.values_chart(st.z, st.charts) * phase[:, None]
    E = basis_dst.grid_values(grid)
    A = E.conj().T @ (grid.weights[:, None] * S)
    del z0, ch0
    return OperatorMatrix(A, basis_dst, getattr(basis_src, "basis", basis_src),
                          unitary=True, provenance="pullback", meta={"t": t})


def default_ambient_grid(basis, f):
    """Ambient grid for transport Grams: about four times the exact grid per axis."""
    D = max(basis.degrees) + f.max_degree + 2
    return fine_grid(basis.factors, max(4 * D, 24), max(8 * D, 48))


def _ambient_frame_phase(basis, zc, ch):
    """Phase converting best-chart unitary values to the affine unitary frame."""
    ph = np.ones(zc.shape[0], dtype=complex)
    for i, Ni in enumerate(basis.degrees):
        c1 = ch[:, i] == 1
        ph *= np.where(c1, np.exp(-1j * Ni * np.angle(zc[:, i])), 1.0)
    return ph


def kato_products(geom, f, basis, t, steps_list, grid=None, opts=None, mode=None,
                  cond_max=1e8):
    """Discrete parallel transport for several step counts in one sweep.

    For ``t_k = k t / steps`` the spaces ``H_{p,t_k}`` are spanned by the
    pushed bases ``B_k``; the L2-orthogonal projection from ``H_{p,t_{k-1}}``
    to ``H_{p,t_k}`` reads ``G_k^{-1} C_{k,k-1}`` in these bases, with ``G_k``
    the Gram matrix and ``C`` the cross Gram on the ambient grid.  The
    returned matrix is the ordered product; as ``phi_t^*`` maps ``B_steps``
    to the basis of ``H_{p,0}``, it is also the matrix of ``phi_t^* T``.

    Returns
    -------
    dict mapping steps -> complex array (dim, dim)

    Raises
    ------
    IllConditionedGramError
        If some Gram matrix has condition number above ``cond_max``.
    """
    opts = opts or FlowOptions()
    mode = _twist_mode(basis, mode)
    mu = _lift_mu(f, basis, mode)
    grid = grid or default_ambient_grid(basis, f)
    steps_list = sorted(set(int(s) for s in steps_list))
    if min(steps_list) < 1:
        raise ValueError("steps must be at least 1")
    fine = int(np.lcm.reduce(steps_list))
    if fine > 20000:
        raise ValueError("step counts have too large a common multiple")
    zc, ch = grid.chart_coordinates()
    frame = _ambient_frame_phase(basis, zc, ch)
    w = grid.weights
    B0 = basis.grid_values(grid)
    state = {s: {"prev": B0, "T": np.eye(basis.dim, dtype=complex)} for s in steps_list}
    times = -t * np.arange(1, fine + 1) / fine

    def cb(k, st):
        kk = k + 1
        Bk = None
        for s in steps_list:
            if kk % (fine // s):
                continue
            if Bk is None:
                tk = t * kk / fine
                Bk = _pushed_values(basis, f, st, tk, mu) * frame[:, None]
            S = state[s]
            G = Bk.conj().T @ (w[:, None] * Bk)
            if np.linalg.cond(G) > cond_max:
                raise IllConditionedGramError(
                    "Gram matrix condition above limit; use a denser ambient grid")
            C = Bk.conj().T @ (w[:, None] * S["prev"])
            S["T"] = np.linalg.solve(G, C) @ S["T"]
            S["prev"] = Bk

    if t == 0:
        return {s: np.eye(basis.dim, dtype=complex) for s in steps_list}
    integrate_batch(f, (zc, ch), -t, opts, times=times, callback=cb)
    return {s: state[s]["T"] for s in steps_list}


def quantum_parallel_transport(geom, f, p, t, steps, grid=None, opts=None, basis=None):
    """Discrete (Kato) parallel transport ``H_{p,0} -> H_{p,t}``.

    The matrix is expressed in the basis of ``H_{p,0}`` on the source side and
    in the pushed basis ``(phi_t^*)^{-1} e_j`` on the target side, so it is
    directly comparable with ``exp(-2 pi i t p Q_p(f))``.
    """
    basis = basis or build_basis(geom, p)
    T = kato_products(geom, f, basis, t, [steps], grid, opts)[int(steps)]
    return OperatorMatrix(T, basis, basis, provenance="transport",
                          meta={"t": t, "steps": int(steps)})


# -- Bochner Laplacian ------------------------------------------------------------------

@dataclass
class BochnerSpectrum:
    """Galerkin spectrum of the renormalized Bochner Laplacian.

    Attributes
    ----------
    eigenvalues : ascending array (all Galerkin eigenvalues)
    factor_eigenvalues : list of per-factor arrays (the spectrum is their sums)
    stiffness, mass : list of per-factor Galerkin matrices
    levels : int
        Number of levels above the holomorphic one kept in the trial space.
    """

    eigenvalues: np.ndarray
    factor_eigenvalues: list
    stiffness: list
    mass: list
    levels: int

    def near_zero(self, tol):
        return int(np.sum(np.abs(self.eigenvalues) <= tol))


def _bochner_factor(N, levels, n_rad=None, n_ang=None):
    """Galerkin matrices of ``Delta^{O(N)} - 2 pi N`` on one sphere.

    Trial sections are ``z^j zbar^k q^{-L} e^N`` with ``k <= L`` and
    ``j <= N + L`` (``L = levels``), which are smooth at both poles.  The
    quadratic form is ``int 2 pi q^2 (|A|^2 + |B|^2) |e^N|^2 dv`` with
    ``A = d_z sigma - N zbar sigma / q`` and ``B = d_zbar sigma``.
    """
    from scipy.linalg import eigh
    L = int(levels)
    deg = N + 2 * L + 2
    n_rad = n_rad or deg + 4
    n_ang = n_ang or 2 * deg + 5
    grid = fine_grid(1, n_rad, n_ang)
    z = grid.affine_z()[:, 0]
    w = grid.weights
    q = 1.0 + np.abs(z) ** 2
    zb = np.conj(z)
    idx = [(j, k) for k in range(L + 1) for j in range(N + L + 1)]

    def pw(x, e):
        return x ** e if e >= 0 else np.zeros_like(x)

    S, A, B = [], [], []
    for j, k in idx:
        base = q ** (-L)
        S.append(pw(z, j) * pw(zb, k) * base)
        dz = j * pw(z, j - 1) * pw(zb, k) * base - L * pw(z, j) * pw(zb, k + 1) * base / q
        dzb = k * pw(z, j) * pw(zb, k - 1) * base - L * pw(z, j + 1) * pw(zb, k) * base / q
        A.append(dz - N * zb * S[-1] / q)
        B.append(dzb)
    h = q ** (-N)
    S, A, B = (np.array(v).T for v in (S, A, B))
    Mmat = S.conj().T @ ((w * h)[:, None] * S)
    Kmat = A.conj().T @ ((2 * np.pi * w * q ** 2 * h)[:, None] * A) \
        + B.conj().T @ ((2 * np.pi * w * q ** 2 * h)[:, None] * B)
    Mmat = 0.5 * (Mmat + Mmat.conj().T)
    Kmat = 0.5 * (Kmat + Kmat.conj().T) - 2 * np.pi * N * Mmat
    # normalize the trial functions before solving the generalized problem
    d = 1.0 / np.sqrt(np.real(np.diag(Mmat)))
    Mn = Mmat * np.outer(d, d)
    Kn = Kmat * np.outer(d, d)
    lam = eigh(Kn, Mn, eigvals_only=True)
    return lam, Kn, Mn


def bochner_laplacian(geom, p, levels=2, grid_size=None):
    """Lowest spectrum of ``Delta_p = Delta^{E_p} - 2 pi n p - sum R^E(w_j, wbar_j)``.

    Galerkin approximation on the span of the lowest ``levels + 1`` levels
    per factor; for a product of spheres the operator is a Kronecker sum, so
    the eigenvalues are sums of per-factor eigenvalues.  With the twist
    ``O(m_i)`` carrying ``m_i`` times the curvature of ``L`` the constant
    renormalization per factor is ``2 pi (p + m_i)``.

    Returns
    -------
    BochnerSpectrum
    """
    if p + min(geom.twists) < 0:
        raise ValueError("negative bundle degree")
    per, Ks, Ms = [], [], []
    for m in geom.twists:
        n_rad, n_ang = (grid_size or (None, None))
        lam, K, M = _bochner_factor(p + m, levels, n_rad, n_ang)
        per.append(np.sort(lam))
        Ks.append(K)
        Ms.append(M)
    total = np.array([0.0])
    for lam in per:
        total = (total[:, None] + lam[None, :]).ravel()
    return BochnerSpectrum(np.sort(total), per, Ks, Ms, int(levels))
