"""Hamiltonian flows: vector field, adaptive integration, variational equation.

Conventions
-----------
* ``iota_xi omega = df``.  For ``f_0 = |z|^2/(1+|z|^2)`` this gives
  ``zdot = -2 pi i z``: a clockwise rotation of period 1.
* The integrator is the Dormand-Prince 5(4) pair with one adaptive step size
  shared by a batch of trajectories.  After every accepted step each factor
  with ``|z| > 1`` is moved to the other chart, so coordinates stay bounded.
* Alongside the position the integrator carries, per factor, the angle
  ``alpha_i`` of parallel transport in the unitary frame of ``O(1)``.  The
  transport coefficient of ``O(N)`` from the start point to the current point
  (start frame to current frame) is ``exp(-i sum_i N_i alpha_i)``.  A chart
  switch at coordinate ``z`` adds ``arg z`` because the unitary frames of the
  two charts differ by the phase ``(z/|z|)^N``.
"""
from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from .geometry import ChartPoint, chart_jacobian

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


class FlowIntegrationError(RuntimeError):
    """Raised when the adaptive step size underflows.

    Attributes
    ----------
    last_time : float
        Last time reached with an accepted step.
    """

    def __init__(self, msg, last_time):
        super().__init__(f"{msg} (last valid time {last_time:.6g})")
        self.last_time = last_time


class RechartRequired(ValueError):
    """Raised by :func:`hamiltonian_vector_field` for points far outside the unit disc."""


@dataclass
class FlowOptions:
    """Tolerances of the adaptive integrator.

    ``energy_tol`` bounds the admissible drift ``|f(phi_t x) - f(x)|``; drift
    is monitored and reported, never projected out.
    """

    rtol: float = 1e-12
    atol: float = 1e-12
    h_min: float = 1e-13
    max_steps: int = 2_000_000
    energy_tol: float = 1e-8


@dataclass
class BatchState:
    """State of a batch of trajectories at a common time."""

    t: float
    y: np.ndarray            # (P, 2s) real chart coordinates
    charts: np.ndarray       # (P, s) chart indices
    alpha: np.ndarray        # (P, s) unitary transport angles
    D: np.ndarray = None     # (P, 2s, 2s) variational matrices
    f: np.ndarray = None     # (P,) Hamiltonian values

    @property
    def z(self):
        return self.y[:, 0::2] + 1j * self.y[:, 1::2]

    def points(self):
        return [ChartPoint(tuple(c), zz) for c, zz in zip(self.charts, self.z)]


def _rhs(f, y, charts, D):
    dy, jac, dalpha, fval = kernels.flow_rhs(f.coef, f.ea, f.eb, f.ed, y, charts, D is not None)
    dD = None if D is None else np.einsum("pij,pjk->pik", jac, D)
    return dy, dD, dalpha, fval


def _rechart(state):
    """Move factors with |z| > 1 to the other chart, in place."""
    z = state.z
    big = np.abs(z) > 1.0
    if not big.any():
        return
    P, s = big.shape
    for i in range(s):
        idx = np.nonzero(big[:, i])[0]
        if idx.size == 0:
            continue
        zi = z[idx, i]
        state.alpha[idx, i] += np.angle(zi)
        znew = 1.0 / zi
        state.y[idx, 2 * i] = znew.real
        state.y[idx, 2 * i + 1] = znew.imag
        state.charts[idx, i] = 1 - state.charts[idx, i]
        if state.D is not None:
            for k, p in enumerate(idx):
                Jc = chart_jacobian(zi[k])
                state.D[p, 2 * i:2 * i + 2, :] = Jc @ state.D[p, 2 * i:2 * i + 2, :]


def integrate_batch(f, points, t, opts=None, variational=False, times=None, callback=None):
    """Integrate a batch of trajectories of the Hamiltonian flow.

    Parameters
    ----------
    f : Hamiltonian
    points : list of ChartPoint, or tuple ``(z (P,s), charts (P,s))``
    t : float
        Final time (may be negative).
    opts : FlowOptions, optional
    variational : bool
        Also integrate ``dphi_t`` in chart coordinates.
    times : array_like, optional
        Intermediate output times (monotone towards ``t``); the integrator
        lands on each of them exactly.
    callback : callable, optional
        Called as ``callback(k, state)`` at each output time ``times[k]``.

    Returns
    -------
    BatchState at time ``t``.
    """
    opts = opts or FlowOptions()
    if isinstance(points, tuple):
        z0, ch0 = points
        z0 = np.atleast_2d(np.asarray(z0, dtype=complex))
        ch0 = np.array(np.broadcast_to(ch0, z0.shape), dtype=np.int64)
    else:
        z0 = np.array([p.z for p in points], dtype=complex)
        ch0 = np.array([p.charts for p in points], dtype=np.int64)
    P, s = z0.shape
    y = np.empty((P, 2 * s))
    y[:, 0::2] = z0.real
    y[:, 1::2] = z0.imag
    D = np.broadcast_to(np.eye(2 * s), (P, 2 * s, 2 * s)).copy() if variational else None
    state = BatchState(0.0, y, ch0.copy(), np.zeros((P, s)), D)
    _rechart(state)
    targets = [] if times is None else [float(x) for x in times]
    if not targets or targets[-1] != t:
        targets.append(float(t))
        report = list(range(len(targets) - 1))
    else:
        report = list(range(len(targets)))
    direction = 1.0 if t >= 0 else -1.0

    dy, dD, dal, fval = _rhs(f, state.y, state.charts, state.D)
    state.f = fval
    speed = np.max(np.abs(dy)) + 1e-300
    h = direction * min(0.01, 0.05 / speed) if t != 0 else 0.0
    steps = 0
    for k, target in enumerate(targets):
        while direction * (target - state.t) > 0:
            steps += 1
            if steps > opts.max_steps:
                raise FlowIntegrationError("maximum number of steps exceeded", state.t)
            remaining = target - state.t
            last = abs(h) >= abs(remaining)
            hh = remaining if last else h
            ks_y, ks_D, ks_a = [dy], [dD], [dal]
            for st in range(1, 7):
                yt = state.y + hh * sum(_A[st][j] * ks_y[j] for j in range(st))
                at = state.alpha + hh * sum(_A[st][j] * ks_a[j] for j in range(st))
                Dt = None
                if D is not None:
                    Dt = state.D + hh * sum(_A[st][j] * ks_D[j] for j in range(st))
                a, b, c, _ = _rhs(f, yt, state.charts, Dt)
                ks_y.append(a)
                ks_D.append(b)
                ks_a.append(c)
                if st == 6:
                    y_new, D_new, a_new = yt, Dt, at   # FSAL: stage 7 sits at the 5th-order solution
            err_y = hh * sum(_E[j] * ks_y[j] for j in range(7))
            err_a = hh * sum(_E[j] * ks_a[j] for j in range(7))
            sc_y = opts.atol + opts.rtol * np.maximum(np.abs(state.y), np.abs(y_new))
            err = max(np.max(np.abs(err_y) / sc_y),
                      np.max(np.abs(err_a) / (opts.atol + opts.rtol * np.abs(a_new))))
            if D is not None:
                err_D = hh * sum(_E[j] * ks_D[j] for j in range(7))
                sc_D = opts.atol + opts.rtol * np.maximum(np.abs(state.D), np.abs(D_new))
                err = max(err, np.max(np.abs(err_D) / sc_D))
            if err <= 1.0:
                state.t = target if last else state.t + hh
                state.y, state.alpha, state.D = y_new, a_new, D_new
                dy, dD, dal = ks_y[6], ks_D[6], ks_a[6]
                before = state.charts.copy()
                _rechart(state)
                if not np.array_equal(before, state.charts):
                    dy, dD, dal, _ = _rhs(f, state.y, state.charts, state.D)
                fac = 0.9 * err ** (-0.2) if err > 0 else 5.0
                if not last:
                    h = hh * min(5.0, max(0.2, fac))
            else:
                fac = 0.9 * err ** (-0.2) if np.isfinite(err) else 0.1
                h = hh * min(0.9, max(0.1, fac))
                if abs(h) < opts.h_min:
                    raise FlowIntegrationError("step size underflow", state.t)
        if k in report and callback is not None:
            callback(k, state)
    state.f = _rhs(f, state.y, state.charts, None)[3]
    return state


# -- single point API -------------------------------------------------------

@dataclass
class TangentData:
    """Linear-algebra data attached to a base point.

    All matrices act on real chart coordinates of the base point (2s x 2s);
    the projectors act on the complexification.
    """

    base: ChartPoint
    J0: np.ndarray
    Jt: np.ndarray = None
    dphi: np.ndarray = None
    Pi0t: np.ndarray = None
    Pibar_t0: np.ndarray = None
    extras: dict = field(default_factory=dict)


@dataclass
class FlowResult:
    """End point of a single trajectory."""

    point: ChartPoint
    t: float
    dphi: np.ndarray = None          # maps start chart coordinates to end chart coordinates
    alpha: np.ndarray = None         # per-factor unitary transport angles
    energy_drift: float = 0.0

    def transport_phase(self, degrees):
        """Unitary transport coefficient of ``O(N)`` along the trajectory."""
        return np.exp(-1j * float(np.dot(degrees, self.alpha)))


def hamiltonian_vector_field(geom, f, x):
    """Hamiltonian vector field at ``x`` as per-factor complex components.

    Parameters
    ----------
    geom : ModelGeometry
    f : Hamiltonian
    x : ChartPoint

    Returns
    -------
    complex array (s,) with ``xi = sum_i Re(v_i) d/dx_i + Im(v_i) d/dy_i``.

    Raises
    ------
    RechartRequired
        If some coordinate has modulus above 10.
    """
    if np.any(np.abs(x.z) > 10.0):
        raise RechartRequired("point far outside the unit disc; switch to the other chart first")
    dy, _, _, _ = kernels.flow_rhs(f.coef, f.ea, f.eb, f.ed, x.real_vector()[None, :],
                                   np.array(x.charts)[None, :], False)
    return dy[0, 0::2] + 1j * dy[0, 1::2]


def vector_field_real(f, x, jac=False):
    """Real vector field (and optionally its Jacobian) at one point."""
    dy, J, _, _ = kernels.flow_rhs(f.coef, f.ea, f.eb, f.ed, x.real_vector()[None, :],
                                   np.array(x.charts)[None, :], jac)
    return (dy[0], J[0]) if jac else dy[0]


def integrate_flow(geom, f, x0, t, opts=None, variational=False):
    """Flow a single point for time ``t``.

    Parameters
    ----------
    geom : ModelGeometry
    f : Hamiltonian
    x0 : ChartPoint
    t : float
    opts : FlowOptions, optional
    variational : bool
        Also return ``dphi_t`` (real ``2s x 2s``, from the chart of ``x0`` to
        the chart of the end point).

    Returns
    -------
    FlowResult

    Raises
    ------
    FlowIntegrationError
        On step-size underflow or when the energy drift exceeds
        ``opts.energy_tol``.
    """
    opts = opts or FlowOptions()
    x0 = ChartPoint(x0.charts, x0.z)
    f_start = f(x0)
    st = integrate_batch(f, [x0], t, opts, variational=variational)
    end = ChartPoint(tuple(st.charts[0]), st.z[0])
    drift = abs(float(st.f[0]) - f_start)
    if drift > opts.energy_tol:
        raise FlowIntegrationError(f"energy drift {drift:.3e} exceeds tolerance", t)
    # the initial rechart inside ``integrate_batch`` is a frame change at the
    # start point, so ``D`` and ``alpha`` already refer to the charts of ``x0``
    dphi = st.D[0] if variational else None
    alpha = st.alpha[0].copy()
    return FlowResult(end, float(t), dphi, alpha, drift)
