"""Complex-structure paths along the flow and the pointwise coefficients.

Notation (all matrices in the real chart coordinates of the base point x):

* ``M_s = dphi_{-s}`` at x, from the backward flow ``y_s = phi_{-s}(x)``.
* ``J_s = M_s^{-1} J_0 M_s``: the pushed-forward structure ``dphi_s J_0 dphi_s^{-1}``
  at x.  Differentiating, ``d/ds J_s = M_s^{-1} [D xi(y_s), J_0] M_s``.
* ``g_s = omega(., J_s .)`` with matrix ``G_s = Omega J_s``.

Canonical transport.  On R x X with the product metric ``ds^2 + g_s`` the
Levi-Civita connection acting on vertical fields in the ``d/ds`` direction
is ``d/ds + B_s`` with ``B_s = 1/2 G_s^{-1} d/ds G_s = -1/2 J_s d/ds J_s``
(Christoffel symbols ``Gamma^k_{s i} = 1/2 g^{kl} d_s g_{il}``).  Its
restriction to ``T^{(1,0)}X_s`` is ``P_s (d/ds + B_s) P_s`` with
``P_s = (Id - i J_s)/2``.  A parallel frame ``V_s`` of ``T^{(1,0)}X_s``
therefore solves ``V' = (d/ds P_s) V - P_s B_s V``.

Scalars.  ``det(Pibar_t^0)`` and ``tau_t^{K_X}`` are maps ``K_{X,0} -> K_{X,t}``;
both are reported relative to the reference map induced by
``P_t : T^{(1,0)}X_0 -> T^{(1,0)}X_t``.  Their ratio, which is what enters
``mu`` and the kernel coefficients, does not depend on that reference.
"""
from dataclasses import dataclass

import numpy as np

from .flow import FlowOptions, TangentData, integrate_batch, vector_field_real
from .geometry import ChartPoint


class SingularProjectorError(np.linalg.LinAlgError):
    """The eigenspaces defining an oblique projector are not transverse."""


class BranchTrackingError(RuntimeError):
    """Square-root branch tracking saw a phase jump above pi/2."""


def holomorphic_projector(J):
    """Projector ``(Id - iJ)/2`` onto the ``+i`` eigenspace of ``J``."""
    return 0.5 * (np.eye(J.shape[0]) - 1j * J)


def oblique_projectors(J0_mat, Jt_mat, cond_max=1e12):
    """Oblique projectors of the splitting ``T^{(1,0)}X_0 + T^{(0,1)}X_t``.

    Parameters
    ----------
    J0_mat, Jt_mat : real arrays (2n, 2n)

    Returns
    -------
    Pi0t : complex array
        Projection onto the ``+i`` eigenspace of ``J0`` along the ``-i``
        eigenspace of ``Jt``.
    Pibar_t0 : complex array
        The complementary projection ``Id - Pi0t``.

    Raises
    ------
    SingularProjectorError
        If the two eigenspaces are not transverse.
    """
    n2 = J0_mat.shape[0]
    n = n2 // 2
    V = _basis(holomorphic_projector(J0_mat), n)            # T^{1,0}_0
    W = _basis(np.conj(holomorphic_projector(Jt_mat)), n)   # T^{0,1}_t
    A = np.hstack([V, W])
    if np.linalg.cond(A) > cond_max:
        raise SingularProjectorError("T^(1,0)X_0 and T^(0,1)X_t are not transverse")
    Ainv = np.linalg.inv(A)
    Pi = V @ Ainv[:n, :]
    return Pi, np.eye(n2) - Pi


def _basis(P, n):
    """Orthonormal basis of the range of a rank-n projector."""
    U, _, _ = np.linalg.svd(P)
    return U[:, :n]


def local_model(J0_mat, Jt_mat, Z, Zp, omega=None):
    """Evaluate ``exp(-pi [<Pi_0^t (Z - Z'), Z - Z'> + i omega(Z, Z')])``.

    Parameters
    ----------
    J0_mat, Jt_mat : real arrays (2n, 2n)
    Z, Zp : real arrays (2n,)
    omega : real array (2n, 2n), optional
        Coordinate matrix of omega; the standard symplectic matrix when
        omitted.  The inner product is ``g_0 = omega(., J_0 .)``.
    """
    n2 = J0_mat.shape[0]
    if omega is None:
        omega = np.zeros((n2, n2))
        for i in range(n2 // 2):
            omega[2 * i, 2 * i + 1] = 1.0
            omega[2 * i + 1, 2 * i] = -1.0
    G0 = omega @ J0_mat
    Pi, _ = oblique_projectors(J0_mat, Jt_mat)
    d = np.asarray(Z, dtype=float) - np.asarray(Zp, dtype=float)
    quad = (Pi @ d) @ G0 @ d
    sym = np.asarray(Z) @ omega @ np.asarray(Zp)
    return np.exp(-np.pi * (quad + 1j * sym))


@dataclass
class StructurePath:
    """Samples of ``J_s`` and the parallel frame along ``s`` in ``[0, t]``."""

    s: np.ndarray
    J: np.ndarray          # (K, 2n, 2n)
    dJ: np.ndarray         # (K, 2n, 2n)
    M: np.ndarray          # (K, 2n, 2n)  dphi_{-s} at x
    V: np.ndarray          # (K, 2n, n)   parallel frame of T^{1,0}X_s
    Omega: np.ndarray      # (2n, 2n) at x


def _sample_path(geom, f, x, t, steps, opts):
    """Backward flow samples on the uniform grid of ``2*steps + 1`` points."""
    s_grid = np.linspace(0.0, t, 2 * steps + 1)
    J0 = geom.j0_matrix()
    Ms, Js, dJs = [], [], []

    def grab(k, st):
        y = ChartPoint(tuple(st.charts[0]), st.z[0])
        _, A = vector_field_real(f, y, jac=True)
        M = st.D[0].copy()
        Minv = np.linalg.inv(M)
        Ms.append(M)
        Js.append(Minv @ J0 @ M)
        dJs.append(Minv @ (A @ J0 - J0 @ A) @ M)

    if t == 0:
        st0 = integrate_batch(f, [x], 0.0, opts, variational=True)
        grab(0, st0)
        Ms, Js, dJs = Ms * len(s_grid), Js * len(s_grid), dJs * len(s_grid)
    else:
        integrate_batch(f, [x], -t, opts, variational=True, times=[-s for s in s_grid],
                        callback=grab)
    return s_grid, np.array(Ms), np.array(Js), np.array(dJs)


def structure_path(geom, f, t, x, steps=200, opts=None):
    """Sample ``J_s`` at ``x`` for ``s`` in ``[0, t]`` and transport a frame.

    The frame ODE is linear, ``V' = A(s) V``, and is integrated with the
    classical fourth-order Runge-Kutta rule on the uniform grid (half steps
    come from the flow samples).
    """
    opts = opts or FlowOptions()
    x = x.canonical()
    n = geom.factors
    s_grid, M, J, dJ = _sample_path(geom, f, x, t, steps, opts)
    Om = geom.omega_matrix(x.z)
    I = np.eye(2 * n)

    def A_of(k):
        P = 0.5 * (I - 1j * J[k])
        dP = -0.5j * dJ[k]
        B = -0.5 * J[k] @ dJ[k]
        return dP - P @ B

    V = np.empty((steps + 1, 2 * n, n), dtype=complex)
    V[0] = holomorphic_projector(J[0])[:, 0::2]
    h = (s_grid[2] - s_grid[0]) if steps > 0 else 0.0
    for k in range(steps):
        A0, Am, A1 = A_of(2 * k), A_of(2 * k + 1), A_of(2 * k + 2)
        v = V[k]
        k1 = A0 @ v
        k2 = Am @ (v + 0.5 * h * k1)
        k3 = Am @ (v + 0.5 * h * k2)
        k4 = A1 @ (v + h * k3)
        V[k + 1] = v + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    idx = slice(0, None, 2)
    return StructurePath(s_grid[idx], J[idx], dJ[idx], M[idx], V, Om)


def pushforward_complex_structure(geom, f, t, x, opts=None):
    """``J_t = dphi_t J_0 dphi_t^{-1}`` at ``x``.

    Returns
    -------
    TangentData
        ``dphi`` is ``dphi_t`` at ``phi_{-t}(x)`` (mapping into ``T_x``), so
        that ``Jt = dphi @ J0 @ inv(dphi)``; ``Pi0t``/``Pibar_t0`` are the
        oblique projectors at ``x``.
    """
    opts = opts or FlowOptions()
    x = x.canonical()
    st = integrate_batch(f, [x], -t, opts, variational=True)
    M = st.D[0]
    dphi = np.linalg.inv(M)
    J0 = geom.j0_matrix()
    Jt = dphi @ J0 @ M
    Pi, Pib = oblique_projectors(J0, Jt)
    y = ChartPoint(tuple(st.charts[0]), st.z[0])
    return TangentData(x, J0, Jt, dphi, Pi, Pib,
                       extras={"source": y, "omega_x": geom.omega_matrix(x.z),
                               "omega_source": geom.omega_matrix(y.z)})


def _scalars(path, k):
    """``(tau, detPibar, unitarity defect)`` at sample ``k`` of a path."""
    J0 = path.J[0]
    Jt = path.J[k]
    n2 = J0.shape[0]
    I = np.eye(n2)
    V0 = path.V[0]
    Vt = path.V[k]
    Pt = 0.5 * (I - 1j * Jt)
    PV0 = Pt @ V0
    C = np.linalg.lstsq(PV0, Vt, rcond=None)[0]
    tau = 1.0 / np.linalg.det(C)
    G0 = path.Omega @ J0
    Gt = path.Omega @ Jt
    _, Pib = oblique_projectors(J0, Jt)
    num = np.linalg.det(PV0.T @ Gt @ Pib @ np.conj(V0))
    den = np.linalg.det(V0.T @ G0 @ np.conj(V0))
    detpib = num / den
    gram0 = np.linalg.det(V0.conj().T @ G0 @ V0).real
    gramt = np.linalg.det(Vt.conj().T @ Gt @ Vt).real
    return tau, detpib, abs(gramt / gram0 - 1.0)


def canonical_transport(geom, f, t, x, steps=200, opts=None, return_details=False):
    """Transport ``tau_t^{K_X}`` at ``x`` as a complex scalar.

    See the module docstring for the connection and the reference map.

    Returns
    -------
    complex, or ``(complex, dict)`` with ``return_details`` (the dict holds
    ``det_pibar`` and the ``unitarity_defect`` of the transported frame).
    """
    path = structure_path(geom, f, t, x, steps, opts)
    tau, detpib, defect = _scalars(path, len(path.s) - 1)
    if return_details:
        return tau, {"det_pibar": detpib, "unitarity_defect": defect, "path": path}
    return tau


def transport_log_derivative(path, k):
    """Connection coefficient ``d/ds log tau_s`` at sample ``k`` of a path.

    With ``P_s V_0 C_s = V_s`` (so ``tau_s = 1/det C_s``) and ``V_s = P_s V_0 C_s``
    the frame equation gives ``P_s V_0 C' = -(dP)(Id - P_s) V_0 C - P_s B_s P_s V_0 C``,
    hence ``d/ds log tau = -tr(C^{-1} C')``.  Used as the independent oracle for
    finite differences of :func:`canonical_transport`.
    """
    J, dJ = path.J[k], path.dJ[k]
    I = np.eye(J.shape[0])
    P = 0.5 * (I - 1j * J)
    dP = -0.5j * dJ
    B = -0.5 * J @ dJ
    PV0 = P @ path.V[0]
    rhs = -dP @ (I - P) @ path.V[0] - P @ B @ PV0
    # C' C^{-1} solves PV0 X = rhs, and tr(C^{-1}C') = tr(C'C^{-1})
    X = np.linalg.lstsq(PV0, rhs, rcond=None)[0]
    return complex(-np.trace(X))


def kx_ratio_path(geom, f, t, x, steps=200, opts=None):
    """``lambda_s = det(Pibar_s^0)^{-1} tau_s^{K_X}`` along ``s`` in ``[0, t]``."""
    path = structure_path(geom, f, t, x, steps, opts)
    vals = []
    for k in range(len(path.s)):
        tau, detpib, _ = _scalars(path, k)
        vals.append(tau / detpib)
    return path.s, np.array(vals)


def continuous_sqrt(values):
    """Square roots with a branch continuous along the sequence, starting near 1.

    Raises
    ------
    BranchTrackingError
        If consecutive roots differ in phase by more than pi/2.
    """
    out = np.empty(len(values), dtype=complex)
    prev = np.sqrt(complex(values[0]))
    if prev.real < 0:
        prev = -prev
    out[0] = prev
    for k in range(1, len(values)):
        r = np.sqrt(complex(values[k]))
        if abs(r - prev) > abs(r + prev):
            r = -r
        if abs(np.angle(r / prev)) > np.pi / 2:
            raise BranchTrackingError(f"phase jump at sample {k}; refine the step")
        out[k] = r
        prev = r
    return out


def mu_coefficient(geom, f, t, x, steps=200, opts=None):
    """``mu_t(x)`` with ``conj(mu_t)^2 = det(Pibar_t^0)^{-1} tau_t^{K_X}``.

    The root is continued from ``mu_0 = 1``; the sampling is refined
    (steps doubled, up to three times) when a phase jump above pi/2 occurs.
    """
    for _ in range(4):
        s, lam = kx_ratio_path(geom, f, t, x, steps, opts)
        try:
            mubar = continuous_sqrt(lam)
        except BranchTrackingError:
            steps *= 2
            continue
        return complex(np.conj(mubar[-1]))
    raise BranchTrackingError("branch tracking failed after refinement")


def a0_squared_geometric(geom, f, t, x, steps=200, opts=None):
    """Right-hand side ``(det(Pibar_{-t}^0)^{-1} tau_{-t}^{K_X})^{-1}`` at ``x``."""
    _, lam = kx_ratio_path(geom, f, -t, x, steps, opts)
    return complex(1.0 / lam[-1])


def b0_squared_geometric(geom, f, t0, y, steps=200, opts=None):
    """``(det(Pibar_{t0}^0)^{-1} tau_{t0}^{K_X})^{-1} <Pi_0^{t0} xi, xi>^{-1}`` at ``y``."""
    y = y.canonical()
    _, lam = kx_ratio_path(geom, f, t0, y, steps, opts)
    td = pushforward_complex_structure(geom, f, t0, y, opts)
    xi = vector_field_real(f, y)
    G0 = geom.metric_matrix(y.z)
    quad = (td.Pi0t @ xi) @ G0 @ xi
    return complex(1.0 / (lam[-1] * quad))
