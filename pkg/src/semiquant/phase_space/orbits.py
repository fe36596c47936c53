"""Periodic orbits on level sets with their actions; Liouville volume of a level.

Orbits are located by Gauss-Newton shooting on the unknowns ``(y, t)`` with
residuals ``phi_t(y) - y`` and ``f(y) - c`` plus the phase condition
``<xi(y_0), y - y_0> = 0``.  Seeds are points of the level set taken on a
``(u, theta)`` grid that includes the poles of every factor; each seed is
flowed over the window and local minima of the return distance start the
Newton iteration.

Action convention.  With ``alpha`` the unitary transport angles carried by
the integrator, the holonomy of ``L`` around a closed orbit is
``exp(-i sum alpha_i)`` and the lift satisfies ``phi_t^L = tau_t e^{2 pi i t f}``,
so ``lambda = -sum(alpha_i)/(2 pi) + t f(x)`` (mod 1).
"""
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate as sp_integrate
from scipy.optimize import brentq

from .flow import FlowOptions, integrate_batch, vector_field_real
from .geometry import ChartPoint, chart_jacobian


class CriticalLevelError(ValueError):
    """The level is (numerically) critical; ``points`` lists the offenders."""

    def __init__(self, msg, points):
        super().__init__(msg)
        self.points = points


class OpenLoopError(ValueError):
    """A loop passed as closed is not closed; ``defect`` is the closure defect."""

    def __init__(self, msg, defect):
        super().__init__(f"{msg} (closure defect {defect:.3e})")
        self.defect = defect


@dataclass
class OrbitOptions:
    """Controls for :func:`find_periodic_orbits`."""

    flow: FlowOptions = field(default_factory=FlowOptions)
    scan_flow: FlowOptions = field(default_factory=lambda: FlowOptions(rtol=1e-9, atol=1e-10))
    newton_tol: float = 1e-10
    max_iter: int = 40
    nondeg_min: float = 1e-6
    scan_dt: float = 0.005
    return_threshold: float = 0.08
    min_period: float = 0.05
    seed_theta: int = 8
    seed_u: int = 5
    regular_min: float = 1e-3


@dataclass
class OrbitRecord:
    """A periodic orbit of ``f`` at level ``c`` together with one resonant time."""

    level: float
    point: ChartPoint
    primitive_period: float
    resonant_time: float
    multiplicity: int
    action: float               # lambda of f, mod 1
    action_shifted: float       # lambda of f - c, mod 1 (the trace phase)
    return_map: np.ndarray      # (2n-2, 2n-2), g-orthonormal basis of N
    stab_det: float
    nondegenerate: bool
    closure_defect: float
    det_dphi: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def dim(self):
        return 1

    def csv_row(self):
        return {"level": self.level, "period": self.primitive_period,
                "resonant_time": self.resonant_time, "action_mod1": self.action_shifted,
                "stab_det": self.stab_det, "nondeg_flag": int(self.nondegenerate)}


# -- level-set utilities ----------------------------------------------------

def point_from_u_theta(u, theta):
    """ChartPoint with per-factor ``u = 1/(1+|z|^2)`` and ``arg z = theta``."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    charts, z = [], []
    for ui, ti in zip(u, theta):
        if ui >= 0.5:
            charts.append(0)
            z.append(np.sqrt(max(1.0 / ui - 1.0, 0.0)) * np.exp(1j * ti))
        else:
            charts.append(1)
            z.append(np.sqrt(ui / (1.0 - ui)) * np.exp(-1j * ti))
    return ChartPoint(tuple(charts), np.array(z))


def _u_derivative(f, x, i):
    """``d f / d u_i`` at fixed angles, with ``u_i = 1/(1+|z_i|^2)``."""
    jet = f.jet(x.z[None, :], np.array(x.charts)[None, :], 1)
    zi = x.z[i]
    u, _ = x.u_theta()
    den = u[i] * (1.0 - u[i])
    if den == 0.0:
        return np.nan
    val = (zi * jet["f_z"][0, i]).real / den
    return -val if x.charts[i] == 0 else val


def xi_norm(geom, f, x):
    """Length of ``xi_f`` in the round metric."""
    xi = vector_field_real(f, x)
    return float(np.sqrt(max(xi @ geom.metric_matrix(x.z) @ xi, 0.0)))


def _roots_in_u(func, n_scan=201):
    """Roots of ``func`` on ``[0, 1]`` from a sign scan refined by brentq."""
    s = np.linspace(0.0, 1.0, n_scan)
    v = np.array([func(x) for x in s])
    roots = [s[k] for k in range(n_scan) if v[k] == 0.0]
    for k in range(n_scan - 1):
        if v[k] * v[k + 1] < 0:
            roots.append(brentq(func, s[k], s[k + 1], xtol=1e-15, rtol=1e-15))
    return sorted(roots), s, v


def level_points(geom, f, c, n_theta=8, n_u=5):
    """Sample points of ``f^{-1}(c)``.

    The last factor's ``u`` is solved for; the other factors run over a grid
    of ``u`` values (including both poles) and all factors over ``n_theta``
    angles.
    """
    s = geom.factors
    thetas = 2 * np.pi * np.arange(n_theta) / n_theta
    ugrid = np.linspace(0.0, 1.0, n_u)
    outer = [()]
    for _ in range(s - 1):
        outer = [o + ((u, th),) for o in outer for u in ugrid for th in thetas]
    pts = []
    for o in outer:
        for th in thetas:
            def g(u_last, o=o, th=th):
                us = [a for a, _ in o] + [u_last]
                ts = [b for _, b in o] + [th]
                return f(point_from_u_theta(us, ts)) - c
            roots, _, _ = _roots_in_u(g, 101)
            for r in roots:
                us = [a for a, _ in o] + [r]
                ts = [b for _, b in o] + [th]
                pts.append(point_from_u_theta(us, ts).canonical())
    return pts


# -- Liouville volume -------------------------------------------------------

def _chart_arrays(U, TH):
    """Vectorized :func:`point_from_u_theta` for arrays ``(P, s)``."""
    U = np.asarray(U, dtype=float)
    TH = np.asarray(TH, dtype=float)
    charts = (U < 0.5).astype(np.int64)
    with np.errstate(divide="ignore", invalid="ignore"):
        r0 = np.sqrt(np.clip(1.0 / U - 1.0, 0.0, None))
        r1 = np.sqrt(np.clip(U / (1.0 - U), 0.0, None))
        z = np.where(charts == 0, r0 * np.exp(1j * TH), r1 * np.exp(-1j * TH))
    return z, charts


def liouville_volume(geom, f, c, n_theta=64, regular_min=None, epsabs=1e-11, n_scan=201):
    """Liouville volume of the level set ``f^{-1}(c)``.

    Computed by the coarea formula ``Vol = int delta(f - c) omega``: the last
    factor's ``u`` is eliminated at its roots (weight ``1/|d f/d u|``), the
    angles are integrated by the trapezoid rule (spectrally accurate for
    periodic integrands) and, for two factors, the remaining ``u_1`` by
    adaptive quadrature.

    Raises
    ------
    CriticalLevelError
        If ``|xi_f| < regular_min`` (default 1e-3) at a level point; the
        offending points are attached.
    """
    thr = 1e-3 if regular_min is None else regular_min
    s = geom.factors
    if s > 2:
        raise NotImplementedError("liouville_volume supports one or two factors")
    thetas = 2 * np.pi * np.arange(n_theta) / n_theta
    ugrid = np.linspace(0.0, 1.0, n_scan)
    bad = []

    def inner(u_outer, th_outer):
        """Average over the last angle of sum over roots of 1/|df/du_last|."""
        P = n_theta * n_scan
        U = np.empty((P, s))
        TH = np.empty((P, s))
        U[:, :-1] = u_outer
        TH[:, :-1] = th_outer
        U[:, -1] = np.tile(ugrid, n_theta)
        TH[:, -1] = np.repeat(thetas, n_scan)
        z, ch = _chart_arrays(U, TH)
        vals = (f.jet(z, ch, 0)["f"] - c).reshape(n_theta, n_scan)
        acc = 0.0
        for a, th in enumerate(thetas):
            def point(ul):
                return point_from_u_theta(list(u_outer) + [ul], list(th_outer) + [th])

            v = vals[a]
            roots = [ugrid[k] for k in range(n_scan) if v[k] == 0.0]
            for k in (0, n_scan - 1):
                if abs(v[k]) < 1e-9 and xi_norm(geom, f, point(ugrid[k])) < thr:
                    bad.append(point(ugrid[k]))
            for k in np.nonzero(v[:-1] * v[1:] < 0)[0]:
                roots.append(brentq(lambda ul: f(point(ul)) - c, ugrid[k], ugrid[k + 1],
                                    xtol=1e-15, rtol=1e-15))
            for r in roots:
                x = point(r)
                if xi_norm(geom, f, x) < thr:
                    bad.append(x)
                    continue
                d = _u_derivative(f, x, s - 1)
                if np.isfinite(d) and d != 0:
                    acc += 1.0 / abs(d)
        return acc / n_theta

    if s == 1:
        vol = inner([], [])
    else:
        outer_thetas = thetas[:: max(1, n_theta // 16)]

        def outer(u1):
            return float(np.mean([inner([u1], [t1]) for t1 in outer_thetas]))
        vol = sp_integrate.quad(outer, 0.0, 1.0, epsabs=epsabs, limit=200)[0]
    if bad:
        raise CriticalLevelError(f"level {c} is near-critical (|xi_f| < {thr}) at "
                                 f"{len(bad)} point(s)", bad)
    return float(vol)


# -- shooting ---------------------------------------------------------------

def _flow_in_chart(f, charts, y, t, opts, variational=True):
    """Flow from real chart coordinates ``y`` and express the end in ``charts``."""
    st = integrate_batch(f, (y[0::2] + 1j * y[1::2], np.array(charts)), t, opts,
                         variational=variational)
    y_end = st.y[0].copy()
    alpha = st.alpha[0].copy()
    D = st.D[0].copy() if variational else None
    for i, (ce, cs) in enumerate(zip(st.charts[0], charts)):
        if ce != cs:
            z = y_end[2 * i] + 1j * y_end[2 * i + 1]
            alpha[i] += np.angle(z)
            if D is not None:
                D[2 * i:2 * i + 2, :] = chart_jacobian(z) @ D[2 * i:2 * i + 2, :]
            w = 1.0 / z
            y_end[2 * i], y_end[2 * i + 1] = w.real, w.imag
    return y_end, D, alpha, float(st.f[0])


def _newton(geom, f, c, seed, t0, opts):
    """Gauss-Newton on ``(y, t)``; returns ``(point, t, residual, iterations)``."""
    charts = seed.charts
    y0 = seed.real_vector()
    xi0 = vector_field_real(f, seed)
    y, t = y0.copy(), float(t0)
    res = np.inf
    for it in range(1, opts.max_iter + 1):
        x = ChartPoint.from_real(charts, y)
        y_end, D, _, _ = _flow_in_chart(f, charts, y, t, opts.flow)
        r = np.concatenate([y_end - y, [f(x) - c, xi0 @ (y - y0)]])
        res = float(np.linalg.norm(r[:-1]))
        if res < opts.newton_tol:
            return x, t, res, it
        xi = vector_field_real(f, x)
        n2 = len(y)
        A = np.zeros((n2 + 2, n2 + 1))
        A[:n2, :n2] = D - np.eye(n2)
        A[:n2, n2] = D @ xi
        A[n2, :n2] = f.gradient(x)
        A[n2 + 1, :n2] = xi0
        step = np.linalg.lstsq(A, -r, rcond=1e-13)[0]
        y = y + step[:n2]
        t = t + step[n2]
        if np.any(np.abs(y[0::2] + 1j * y[1::2]) > 2.0) or not np.isfinite(t) or t <= 0:
            break
    return None, t, res, opts.max_iter


def _closure(f, x, t, opts):
    y = x.real_vector()
    y_end, _, _, _ = _flow_in_chart(f, x.charts, y, t, opts, variational=False)
    return float(np.linalg.norm(y_end - y))


def normal_basis(geom, f, x):
    """g-orthonormal basis of the complement of ``xi_f`` inside ``ker df``."""
    G = geom.metric_matrix(x.z)
    xi = vector_field_real(f, x)
    grad = f.gradient(x)
    n2 = len(xi)
    # ker df, then remove xi; Gram-Schmidt in the metric g
    _, _, Vt = np.linalg.svd(grad[None, :])
    K = Vt[1:].T
    vecs = [xi / np.sqrt(xi @ G @ xi)]
    for k in range(K.shape[1]):
        v = K[:, k].copy()
        for b in vecs:
            v -= (b @ G @ v) * b
        nv = np.sqrt(max(v @ G @ v, 0.0))
        if nv > 1e-10:
            vecs.append(v / nv)
    B = np.array(vecs[1:]).T if len(vecs) > 1 else np.zeros((n2, 0))
    return B[:, : n2 - 2]


def return_map(geom, f, x, dphi):
    """Linearized return map on ``N`` in a g-orthonormal basis."""
    B = normal_basis(geom, f, x)
    if B.shape[1] == 0:
        return np.zeros((0, 0))
    G = geom.metric_matrix(x.z)
    return B.T @ G @ dphi @ B


def stability_determinant(orbit):
    """``|det_N(Id - dphi_{t_j}|_N)|``; the empty determinant is 1."""
    M = orbit.return_map if isinstance(orbit, OrbitRecord) else np.asarray(orbit)
    if M.size == 0:
        return 1.0
    return float(abs(np.linalg.det(np.eye(M.shape[0]) - M)))


def prequantum_action(geom, f, x, t, opts=None, closure_tol=1e-8):
    """Action ``lambda`` (mod 1) of the lift over the closed orbit through ``x``.

    Returns
    -------
    float in ``[0, 1)`` with ``phi_t^L = exp(2 pi i lambda)`` at ``x``.

    Raises
    ------
    OpenLoopError
        If ``phi_t(x)`` differs from ``x`` by more than ``closure_tol``.
    """
    opts = opts or FlowOptions()
    x = x.canonical()
    if t == 0:
        return 0.0
    y = x.real_vector()
    y_end, _, alpha, _ = _flow_in_chart(f, x.charts, y, t, opts, variational=False)
    defect = float(np.linalg.norm(y_end - y))
    if defect > closure_tol:
        raise OpenLoopError("loop does not close", defect)
    lam = -float(np.sum(alpha)) / (2 * np.pi) + t * f(x)
    return float(np.mod(lam, 1.0))


def _mod1(v):
    r = float(np.mod(v, 1.0))
    return 0.0 if r > 1.0 - 1e-13 else r


def _scan_returns(geom, f, seeds, t_max, opts):
    """Candidate ``(seed, t)`` pairs from local minima of the return distance."""
    if not seeds or t_max <= 0:
        return []
    times = np.arange(1, int(np.ceil(t_max / opts.scan_dt)) + 1) * opts.scan_dt
    times = times[times <= t_max + 1e-12]
    if len(times) == 0:
        return []
    u0 = np.array([p.unit_vectors() for p in seeds])
    dist = np.zeros((len(seeds), len(times)))

    def cb(k, st):
        for j, pt in enumerate(st.points()):
            dist[j, k] = np.sqrt(np.sum((pt.unit_vectors() - u0[j]) ** 2))

    integrate_batch(f, seeds, times[-1], opts.scan_flow, times=times, callback=cb)
    out = []
    for j in range(len(seeds)):
        d = dist[j]
        for k in range(len(times)):
            left = d[k - 1] if k > 0 else np.inf
            right = d[k + 1] if k + 1 < len(times) else np.inf
            if d[k] <= left and d[k] <= right and d[k] < opts.return_threshold \
                    and times[k] >= opts.min_period:
                out.append((j, seeds[j], times[k]))
    return out


def find_periodic_orbits(geom, f, c, t_window, opts=None):
    """Periodic orbits in ``f^{-1}(c)`` with a resonant time in ``t_window``.

    Parameters
    ----------
    geom : ModelGeometry
    f : Hamiltonian
    c : float
        Regular level.
    t_window : (float, float)
        Closed interval of admissible resonant times ``m * T`` (``m != 0``).
    opts : OrbitOptions, optional

    Returns
    -------
    list of OrbitRecord, one per (orbit, resonant time), sorted by resonant
    time then level.  Degenerate orbits are kept with ``nondegenerate=False``.
    Rejected Newton candidates are not returned; their count is recorded in
    the ``diagnostics`` of every record.
    """
    opts = opts or OrbitOptions()
    lo, hi = float(t_window[0]), float(t_window[1])
    t_max = max(abs(lo), abs(hi))
    seeds = level_points(geom, f, c, opts.seed_theta, opts.seed_u)
    for x in seeds:
        if xi_norm(geom, f, x) < opts.regular_min:
            raise CriticalLevelError(f"level {c} is near-critical", [x])
    candidates = _scan_returns(geom, f, seeds, t_max, opts)
    found = []          # (point, primitive period, samples)
    rejected = 0
    done = set()
    for j, seed, t0 in candidates:
        if j in done:
            continue
        if any(_on_orbit(seed, samples) for _, _, samples in found):
            done.add(j)
            continue
        x, t, res, _ = _newton(geom, f, c, seed, t0, opts)
        if x is None:
            rejected += 1
            continue
        done.add(j)
        x = x.canonical()
        T = _primitive(f, x, t, opts)
        if any(abs(T - T2) < 1e-7 * max(1.0, T) and _on_orbit(x, samples)
               for _, T2, samples in found):
            continue
        samples = _orbit_samples(f, x, T, opts)
        found.append((x, T, samples))
    records = []
    for x, T, _ in found:
        m_lo = int(np.ceil(lo / T - 1e-12))
        m_hi = int(np.floor(hi / T + 1e-12))
        for m in range(m_lo, m_hi + 1):
            if m == 0:
                continue
            records.append(_make_record(geom, f, c, x, T, m, opts, rejected))
    records.sort(key=lambda r: (r.resonant_time, r.level, r.primitive_period))
    return records


def _primitive(f, x, t, opts, kmax=8):
    """Shortest period ``t/k`` (``k <= kmax``) that still closes the orbit."""
    kmax = min(kmax, int(np.floor(t / opts.min_period)))
    best = t
    for k in range(2, kmax + 1):
        if _closure(f, x, t / k, opts.flow) < 1e-7:
            best = t / k
    return best


def _orbit_samples(f, x, T, opts, n=400):
    pts = []
    times = np.linspace(0.0, T, n, endpoint=False)[1:]

    def cb(k, st):
        pts.append(st.points()[0].unit_vectors())

    integrate_batch(f, [x], T, opts.scan_flow, times=times, callback=cb)
    return [x.unit_vectors()] + pts


def _on_orbit(x, samples, tol=2e-2):
    ux = x.unit_vectors()
    return min(np.sqrt(np.sum((s - ux) ** 2)) for s in samples) < tol


def _make_record(geom, f, c, x, T, m, opts, rejected):
    tm = m * T
    y = x.real_vector()
    y_end, D, alpha, f_end = _flow_in_chart(f, x.charts, y, tm, opts.flow)
    defect = float(np.linalg.norm(y_end - y))
    lam = -float(np.sum(alpha)) / (2 * np.pi) + tm * f(x)
    M = return_map(geom, f, x, D)
    sd = stability_determinant(M)
    nondeg = bool(sd >= opts.nondeg_min) if M.size else True
    return OrbitRecord(level=float(c), point=x, primitive_period=float(T),
                       resonant_time=float(tm), multiplicity=int(m),
                       action=_mod1(lam), action_shifted=_mod1(lam - tm * c),
                       return_map=M, stab_det=sd, nondegenerate=nondeg,
                       closure_defect=defect, det_dphi=float(np.linalg.det(D)),
                       diagnostics={"rejected_candidates": rejected,
                                    "energy_drift": abs(f_end - f(x)),
                                    "alpha": np.asarray(alpha, dtype=float).copy()})
