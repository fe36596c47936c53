"""Named experiment checks driven by an :class:`~semiquant.config.ExperimentConfig`.

Every check returns a list of :class:`~semiquant.semiclassics.CheckResult`
and may add report tables (traces, fits, orbits) to the run context.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .cache import spectral_key
from .hilbert import (build_basis, build_grid, default_degree, kernel_trace_quadrature,
                      riemann_roch_dimension)
from .operators import (_twist_mode, bochner_laplacian, evolution, kato_products, quantize,
                        separable_factor_spectra)
from .phase_space.flow import FlowOptions, integrate_flow
from .phase_space.hamiltonian import Hamiltonian
from .phase_space.orbits import (CriticalLevelError, find_periodic_orbits, liouville_volume,
                                 point_from_u_theta, prequantum_action)
from .semiclassics import (CheckResult, FactorSpectra, ModelTerm, a0_check, b_kernel_check,
                           coherent_propagation_check, fit_expansion, gutzwiller_predict,
                           kernel_decay_check, poisson_rotation, resonant_orbits,
                           smoothed_trace, window_decay_check)
from .semiclassics.checks import FAIL, INCONCLUSIVE, PASS, SKIPPED

ERROR = "error"


def _compute_spectrum(geom, f, p, mode):
    return quantize(geom, f, p, mode).spectral()


class SpectraProvider:
    """``p -> SpectralData`` of ``Q_p(f)``, memoized in memory and optionally on disk.

    Parameters
    ----------
    cache : SpectralCache, optional
    jobs : int
        Worker processes used by :meth:`prefetch`.
    """

    def __init__(self, geom, f, mode=None, cache=None, jobs=1):
        self.geom, self.f, self.cache, self.jobs = geom, f, cache, max(1, int(jobs))
        self.mode = _twist_mode(build_basis(geom, 1), mode)
        self._mem = {}

    def _key(self, p):
        return spectral_key(self.geom, self.f, p, self.mode)

    def __call__(self, p):
        p = int(p)
        if p not in self._mem:
            if self.cache is None:
                self._mem[p] = _compute_spectrum(self.geom, self.f, p, self.mode)
            else:
                key, text = self._key(p)
                self._mem[p] = self.cache.get_or_compute(
                    key, lambda: _compute_spectrum(self.geom, self.f, p, self.mode), text)
        return self._mem[p]

    def prefetch(self, ps):
        """Fill the memo for every ``p`` (in parallel when ``jobs > 1``)."""
        todo = []
        for p in ps:
            p = int(p)
            if p in self._mem:
                continue
            if self.cache is not None:
                key, text = self._key(p)
                hit = self.cache.get(key, text)
                if hit is not None:
                    self.cache.hits += 1
                    self._mem[p] = hit
                    continue
            todo.append(p)
        if self.jobs > 1 and len(todo) > 1:
            with ProcessPoolExecutor(self.jobs) as ex:
                specs = list(ex.map(_compute_spectrum, [self.geom] * len(todo),
                                    [self.f] * len(todo), todo, [self.mode] * len(todo)))
        else:
            specs = [_compute_spectrum(self.geom, self.f, p, self.mode) for p in todo]
        for p, spec in zip(todo, specs):
            self._mem[p] = spec
            if self.cache is not None:
                key, text = self._key(p)
                self.cache.misses += 1
                self.cache.put(key, spec, text)

    @property
    def separable(self):
        return self.geom.factors > 1 and self.f.separable_parts() is not None

    def factor_spectra(self, p):
        """Per-factor spectra for separable ``f`` on two or more factors."""
        basis = build_basis(self.geom, p)
        sub = build_grid(1, default_degree(p, self.geom.twists, self.f.max_degree))
        parts, const = separable_factor_spectra(basis, sub, self.f, self.mode)
        return FactorSpectra(tuple(parts), const)

    def trace_spectrum(self, p):
        """Cheapest exact spectrum representation for traces."""
        return self.factor_spectra(p) if self.separable else self(p)


@dataclass
class RunContext:
    """Everything a check needs, built once per run."""

    cfg: object
    geom: object
    f: object
    spectra: SpectraProvider
    tables: dict = field(default_factory=dict)

    @classmethod
    def from_config(cls, cfg, cache=None, jobs=1):
        geom, f = cfg.geometry(), cfg.hamiltonian()
        return cls(cfg, geom, f, SpectraProvider(geom, f, cfg.lift, cache, jobs))

    def add_rows(self, table, rows):
        self.tables.setdefault(table, []).extend(rows)

    @property
    def window(self):
        return self.cfg.window()

    def rng(self):
        return np.random.default_rng(self.cfg.seed)


def _result(name, measured, predicted, tol, ok, **details):
    return CheckResult(name, float(measured), float(predicted), float(tol),
                       PASS if ok else FAIL, details)


def _skip(name, reason):
    return CheckResult(name, float("nan"), float("nan"), float("nan"), SKIPPED,
                       {"reason": reason})


def _require_level(ctx, name):
    if ctx.cfg.level is None:
        return _skip(name, "no level configured")
    return None


# -- rrh ------------------------------------------------------------------------------

def check_rrh(ctx):
    """``dim H_p`` against ``prod_i (p + m_i + 1)`` written out explicitly."""
    out = []
    tol = ctx.cfg.tolerance("rrh")
    for p in ctx.cfg.p_grid:
        dim = build_basis(ctx.geom, p).dim
        pred = 1
        for m in ctx.geom.twists:
            pred *= max(p + m + 1, 0)
        out.append(_result(f"rrh[p={p}]", dim, pred, tol, dim == pred))
    return out


# -- spectrum -------------------------------------------------------------------------

def rotation_oracle(geom, f, p, mode):
    """Exact spectrum of ``Q_p`` for ``sum_i w_i f_0(z_i)``, or ``None`` for other ``f``.

    Each factor contributes ``w_i (k + s_i) / p`` for ``k = 0..p + m_i``, with
    ``s_i = 1/2`` and ``k <= p - 1`` for the metaplectic lift.
    """
    sep = f.separable_parts() if geom.factors > 1 else ([f], 0.0)
    if sep is None:
        return None
    parts, const = sep
    lam = np.array([const])
    for part, m in zip(parts, geom.twists):
        if not (len(part.coef) == 1 and tuple(part.ea[0]) == (1,) and tuple(part.eb[0]) == (1,)
                and tuple(part.ed[0]) == (1,)):
            return None
        w = float(part.coef[0].real)
        if mode == "metaplectic":
            vals = w * (np.arange(p + m + 1) + 0.5) / p
        else:
            vals = w * np.arange(p + m + 1) / p
        lam = (lam[:, None] + vals[None, :]).ravel()
    return np.sort(lam)


def check_spectrum(ctx):
    tol = ctx.cfg.tolerance("spectrum")
    mode = ctx.spectra.mode
    out = []
    for p in ctx.cfg.p_grid:
        oracle = rotation_oracle(ctx.geom, ctx.f, p, mode)
        if oracle is None:
            out.append(_skip(f"spectrum[p={p}]", "no exact oracle for this Hamiltonian"))
            continue
        lam = np.sort(ctx.spectra(p).eigenvalues)
        dev = float(np.max(np.abs(lam - oracle))) if len(lam) == len(oracle) else np.inf
        out.append(_result(f"spectrum[p={p}]", dev, 0.0, tol, dev <= tol, dim=len(lam)))
    return out


# -- invariants -----------------------------------------------------------------------

def _mod1_distance(a):
    r = np.mod(a, 1.0)
    return float(min(r, 1.0 - r))


def check_invariants(ctx):
    """Operator-layer and classical-layer invariants."""
    cfg, geom, f = ctx.cfg, ctx.geom, ctx.f
    t = cfg.get("run", "time")
    rng = ctx.rng()
    out = []
    for p in cfg.p_grid:
        Q = quantize(geom, f, p, ctx.spectra.mode)
        h = Q.meta["hermitian_defect_raw"]
        out.append(_result(f"hermitian[p={p}]", h, 0.0, cfg.tolerance("hermitian"),
                           h <= cfg.tolerance("hermitian")))
        a, b = 1.7, 0.3
        Qab = quantize(geom, f * a + b, p, ctx.spectra.mode).matrix
        lin = float(np.linalg.norm(Qab - (a * Q.matrix + b * np.eye(Q.shape[0])), 2))
        out.append(_result(f"linearity[p={p}]", lin, 0.0, cfg.tolerance("hermitian"),
                           lin <= cfg.tolerance("hermitian")))
        spec = ctx.spectra(p)
        U = evolution(spec, t, p)
        ud = U.unitary_defect()
        out.append(_result(f"unitary[p={p}]", ud, 0.0, cfg.tolerance("unitary"),
                           ud <= cfg.tolerance("unitary")))
        s = 0.37 * t + 0.11
        gl = float(np.linalg.norm(evolution(spec, s, p).matrix @ U.matrix
                                  - evolution(spec, s + t, p).matrix, 2))
        out.append(_result(f"group_law[p={p}]", gl, 0.0, cfg.tolerance("group_law"),
                           gl <= cfg.tolerance("group_law")))
        basis = build_basis(geom, p)
        grid = build_grid(geom, default_degree(p, geom.twists, 0))
        worst = 0.0
        for _ in range(20):
            A = rng.standard_normal((basis.dim, basis.dim)) \
                + 1j * rng.standard_normal((basis.dim, basis.dim))
            M = 0.5 * (A + A.conj().T)
            tr = np.trace(M)
            worst = max(worst, abs(kernel_trace_quadrature(basis, grid, M) - tr)
                        / max(1.0, abs(tr)))
        out.append(_result(f"trace_formula[p={p}]", worst, 0.0, cfg.tolerance("trace_formula"),
                           worst <= cfg.tolerance("trace_formula")))
    out.extend(_classical_invariants(ctx, rng, t))
    return out


def _random_points(rng, factors, count):
    us = rng.uniform(0.05, 0.95, size=(count, factors))
    ths = rng.uniform(0.0, 2 * np.pi, size=(count, factors))
    return [point_from_u_theta(list(u), list(th)) for u, th in zip(us, ths)]


def _classical_invariants(ctx, rng, t):
    cfg, geom, f = ctx.cfg, ctx.geom, ctx.f
    opts = FlowOptions(energy_tol=np.inf)
    sym, energy = 0.0, 0.0
    for x in _random_points(rng, geom.factors, cfg.get("run", "samples")):
        res = integrate_flow(geom, f, x, t, opts, variational=True)
        Om0 = geom.omega_matrix(x.z)
        Om1 = geom.omega_matrix(res.point.z)
        D = res.dphi
        sym = max(sym, float(np.linalg.norm(D.T @ Om1 @ D - Om0) / np.linalg.norm(Om0)))
        energy = max(energy, abs(f(res.point) - f(x)))
    out = [_result("symplectic", sym, 0.0, cfg.tolerance("symplectic"),
                   sym <= cfg.tolerance("symplectic")),
           _result("energy", energy, 0.0, cfg.tolerance("energy"),
                   energy <= cfg.tolerance("energy"))]
    out.append(_action_additivity(ctx))
    return out


def _action_additivity(ctx):
    """``lambda(m T) = m lambda(T)`` mod 1 for ``m = 2, 3`` on one closed orbit."""
    cfg, geom, f = ctx.cfg, ctx.geom, ctx.f
    tol = cfg.tolerance("action_additivity")
    try:
        if geom.factors == 1:
            x = point_from_u_theta([0.5], [0.2]) if cfg.level is None else None
            c = f(x) if x is not None else cfg.level
            if x is None:
                root = brentq(lambda u: f(point_from_u_theta([u], [0.2])) - c, 1e-9, 1 - 1e-9)
                x = point_from_u_theta([root], [0.2])
            T = liouville_volume(geom, f, c)
        else:
            if cfg.level is None:
                return _skip("action_additivity", "no level configured")
            orbs = [o for o in find_periodic_orbits(geom, f, cfg.level, (0.05, 2.0))
                    if o.multiplicity == 1]
            if not orbs:
                return _skip("action_additivity", "no periodic orbit found")
            x, T = orbs[0].point, orbs[0].primitive_period
    except CriticalLevelError:
        return _skip("action_additivity", "critical level")
    lam1 = prequantum_action(geom, f, x, T, closure_tol=1e-7)
    worst = max(_mod1_distance(prequantum_action(geom, f, x, m * T, closure_tol=1e-7)
                               - m * lam1) for m in (2, 3))
    return _result("action_additivity", worst, 0.0, tol, worst <= tol, period=T)


# -- kato -----------------------------------------------------------------------------

def check_kato(ctx):
    """Discrete parallel transport against ``U(t)`` for increasing step counts."""
    cfg = ctx.cfg
    p, t = cfg.p_grid[0], cfg.get("run", "time")
    steps = sorted(cfg.get("run", "steps"))
    basis = build_basis(ctx.geom, p)
    Ts = kato_products(ctx.geom, ctx.f, basis, t, steps, mode=ctx.spectra.mode)
    U = evolution(ctx.spectra(p), t, p).matrix
    defects = np.array([np.linalg.norm(Ts[s] - U, 2) for s in steps])
    ctx.add_rows("kato", [{"p": p, "t": t, "steps": s, "defect": d}
                          for s, d in zip(steps, defects)])
    order = -float(np.polyfit(np.log(steps), np.log(defects), 1)[0]) if len(steps) > 1 else np.nan
    o_tol, d_tol = cfg.tolerance("kato_order"), cfg.tolerance("kato_defect")
    return [_result("kato_order", order, o_tol, o_tol, order >= o_tol,
                    defects=defects.tolist()),
            _result("kato_defect", defects[-1], 0.0, d_tol, defects[-1] <= d_tol)]


# -- traces ---------------------------------------------------------------------------

def trace_rows(ctx, ps=None):
    g, c = ctx.window, ctx.cfg.level
    rows = []
    for p in ps or ctx.cfg.p_grid:
        tr = smoothed_trace(ctx.spectra.trace_spectrum(p), g, c, p)
        rows.append({"p": p, "re": tr.real, "im": tr.imag})
    return rows


def check_poisson(ctx):
    """Smoothed trace of the rotation model against the Poisson sum ``sum g(m) e^{2 pi i m p c}``."""
    skip = _require_level(ctx, "poisson")
    if skip:
        return [skip]
    if ctx.geom.factors != 1 or rotation_oracle(ctx.geom, ctx.f, 1, ctx.spectra.mode) is None:
        return [_skip("poisson", "Poisson oracle needs the one-factor rotation model")]
    if any(ctx.geom.twists) or float(ctx.f.coef[0].real) != 1.0:
        return [_skip("poisson", "Poisson oracle implemented for untwisted f_0")]
    g, c = ctx.window, ctx.cfg.level
    tol = ctx.cfg.tolerance("poisson")
    rows = trace_rows(ctx)
    ctx.add_rows("traces", rows)
    out = []
    for r in rows:
        p = r["p"]
        pred = poisson_rotation(g, c, p)
        err = abs(complex(r["re"], r["im"]) - pred)
        out.append(_result(f"poisson[p={p}]", err, 0.0, tol, err <= tol,
                           trace=complex(r["re"], r["im"]), poisson=pred))
    return out


def check_weyl(ctx):
    """``p (Tr - g(0) Vol)`` is a constant ``C`` up to ``o(1)``; report its relative spread."""
    skip = _require_level(ctx, "weyl")
    if skip:
        return [skip]
    g, c = ctx.window, ctx.cfg.level
    tol = ctx.cfg.tolerance("weyl")
    try:
        vol = liouville_volume(ctx.geom, ctx.f, c)
    except CriticalLevelError:
        return [_skip("weyl", "critical level")]
    rows = trace_rows(ctx)
    ctx.add_rows("traces", rows)
    n = ctx.geom.n
    ps = np.array([r["p"] for r in rows], dtype=float)
    tr = np.array([r["re"] for r in rows])
    weyl = float(g(0.0)) * vol * ps ** (n - 1)
    C = ps * (tr - weyl) / ps ** (n - 1)
    Cbar = float(np.mean(C))
    dev = float(np.max(np.abs(C - Cbar)) / abs(Cbar)) if Cbar != 0 else np.inf
    spread = float((C.max() - C.min()) / abs(Cbar)) if Cbar != 0 else np.inf
    ctx.add_rows("fits", [{"term_id": "weyl_C", "alpha": -1.0, "lambda": 0.0,
                           "coeff_re": Cbar, "coeff_im": 0.0, "residual": dev}])
    return [_result("weyl_C_stability", dev, 0.0, tol, dev <= tol, C=C.tolist(),
                    spread=spread, volume=vol, C_mean=Cbar)]


def _closed_form_amplitude(geom, f, orbit):
    """``T / prod 2|sin(pi w_i t)|`` for an orbit of ``sum w_i f_0(z_i)`` on one factor."""
    if rotation_oracle(geom, f, 1, "kostant") is None or geom.factors == 1:
        return None
    parts, _ = f.separable_parts()
    u = orbit.point.u_theta()[0]
    moving = [i for i in range(geom.factors) if 1e-6 < u[i] < 1 - 1e-6]
    if len(moving) != 1:
        return None
    t = orbit.resonant_time
    amp = orbit.primitive_period
    for i, part in enumerate(parts):
        if i != moving[0]:
            amp /= 2.0 * abs(np.sin(np.pi * float(part.coef[0].real) * t))
    return amp


def check_orbit(ctx):
    """Fit the orbit coefficients ``b_{j,0}`` from the smoothed trace over the p-grid."""
    skip = _require_level(ctx, "orbit")
    if skip:
        return [skip]
    g, c = ctx.window, ctx.cfg.level
    tol = ctx.cfg.tolerance("orbit")
    try:
        orbs = resonant_orbits(ctx.geom, ctx.f, c, g)
    except CriticalLevelError:
        return [_skip("orbit", "critical level")]
    ctx.add_rows("orbits", [o.csv_row() for o in orbs])
    orbs = [o for o in orbs if o.nondegenerate and abs(g(o.resonant_time)) > 1e-12]
    if not orbs:
        return [_skip("orbit", "no nondegenerate resonant orbit in the window support")]
    rows = trace_rows(ctx)
    ctx.add_rows("traces", rows)
    ps = [r["p"] for r in rows]
    tr = np.array([complex(r["re"], r["im"]) for r in rows])
    n = ctx.geom.n
    pred = gutzwiller_predict(ctx.geom, ctx.f, c, g, orbs,
                              metaplectic=ctx.geom.metaplectic) if ctx.geom.metaplectic else None
    if g.contains(0.0):
        vol = liouville_volume(ctx.geom, ctx.f, c)
        tr = tr - float(g(0.0)) * vol * np.asarray(ps, dtype=float) ** (n - 1)
    R = ctx.cfg.get("run", "fit_orders")
    terms = [ModelTerm((o.dim - 1) / 2, o.action_shifted, r, label=f"orbit{j}_r{r}")
             for j, o in enumerate(orbs) for r in range(R)]
    fit = fit_expansion(ps, tr, terms)
    ctx.add_rows("fits", list(fit.csv_rows()))
    out = []
    for j, o in enumerate(orbs):
        coeff = fit.coefficient(f"orbit{j}_r0") / float(g(o.resonant_time))
        closed = _closed_form_amplitude(ctx.geom, ctx.f, o)
        formula = o.primitive_period / np.sqrt(o.stab_det) if n > 1 else o.primitive_period
        predicted = closed if closed is not None else formula
        rel = abs(abs(coeff) / predicted - 1.0)
        details = {"t": o.resonant_time, "stab_det": o.stab_det, "fit_residual": fit.residual,
                   "fitted": coeff, "formula_modulus": formula}
        if pred is not None:
            term = pred.terms[j]
            details["phase_vs_model"] = complex(coeff / (term.holonomy * term.b0))
        out.append(_result(f"orbit_b0[t={o.resonant_time:.6f}]", abs(coeff), predicted, tol,
                           rel <= tol, **details))
    return out


# -- pointwise coefficients ----------------------------------------------------------

def check_a0(ctx):
    pts = ctx.cfg.chart_points()
    if not pts:
        return [_skip("a0", "no points configured")]
    t = ctx.cfg.get("run", "time")
    ctx.spectra.prefetch(ctx.cfg.p_grid)
    out = []
    for k, x in enumerate(pts):
        r = a0_check(ctx.geom, ctx.f, t, x, list(ctx.cfg.p_grid), ctx.cfg.tolerance("a0"),
                     ctx.cfg.get("run", "extrapolation_order"), ctx.spectra, ctx.spectra.mode,
                     name=f"a0[point={k}]")
        out.append(r)
    return out


def check_b0(ctx):
    skip = _require_level(ctx, "b0")
    if skip:
        return [skip]
    pts = ctx.cfg.chart_points()
    if not pts:
        return [_skip("b0", "no points configured")]
    t0 = ctx.cfg.get("run", "time")
    out = []
    for k, x in enumerate(pts):
        y = integrate_flow(ctx.geom, ctx.f, x, t0).point if t0 else x
        out.append(b_kernel_check(ctx.geom, ctx.f, ctx.cfg.level, ctx.window, x, y, t0,
                                  list(ctx.cfg.p_grid), ctx.cfg.tolerance("b0"),
                                  ctx.cfg.get("run", "extrapolation_order"), ctx.spectra,
                                  ctx.spectra.mode, name=f"b0[point={k}]"))
    return out


def check_kernel_decay(ctx):
    pts = ctx.cfg.chart_points("far_points")
    if len(pts) < 2:
        return [_skip("kernel_decay", "far_points needs at least two points")]
    t = ctx.cfg.get("run", "time")
    rate = ctx.cfg.tolerance("decay_rate")
    return [kernel_decay_check(ctx.geom, ctx.f, t, x, y, list(ctx.cfg.p_grid), -rate,
                               spectra=ctx.spectra, mode=ctx.spectra.mode,
                               name=f"kernel_decay[pair={k}]")
            for k, (x, y) in enumerate(zip(pts[0::2], pts[1::2]))]


def offset_point(geom, f, target, theta=0.1):
    """A point with ``f = target`` on the meridian ``arg z = theta`` (one factor)."""
    h = lambda u: f(point_from_u_theta([u], [theta])) - target
    us = np.linspace(1e-9, 1 - 1e-9, 401)
    vals = np.array([h(u) for u in us])
    idx = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    if not len(idx):
        return None
    k = idx[0]
    return point_from_u_theta([brentq(h, us[k], us[k + 1])], [theta])


def check_window_decay(ctx):
    skip = _require_level(ctx, "window_decay")
    if skip:
        return [skip]
    if ctx.geom.factors != 1:
        return [_skip("window_decay", "offset point search implemented for one factor")]
    c, off = ctx.cfg.level, ctx.cfg.get("run", "offset")
    x = offset_point(ctx.geom, ctx.f, c + off)
    if x is None:
        return [_skip("window_decay", "level c + offset not attained")]
    rate = ctx.cfg.tolerance("decay_rate")
    return [window_decay_check(ctx.geom, ctx.f, c, ctx.window, x, list(ctx.cfg.p_grid), -rate,
                               spectra=ctx.spectra, mode=ctx.spectra.mode)]


def check_coherent(ctx):
    pts = ctx.cfg.chart_points()
    if not pts:
        return [_skip("coherent", "no points configured")]
    t = ctx.cfg.get("run", "time")
    return [coherent_propagation_check(ctx.geom, ctx.f, x, t, list(ctx.cfg.p_grid),
                                       ctx.spectra, ctx.spectra.mode,
                                       ctx.cfg.tolerance("coherent_peak"),
                                       ctx.cfg.tolerance("coherent_mass"),
                                       name=f"coherent[point={k}]")
            for k, x in enumerate(pts)]


def check_bochner(ctx):
    """Near-zero count equals ``dim H_p``; next eigenvalue at least ``2 pi n p``."""
    cfg, geom = ctx.cfg, ctx.geom
    gap_tol, zero_tol = cfg.tolerance("bochner_gap"), cfg.tolerance("bochner_zero")
    out = []
    for p in cfg.p_grid:
        bs = bochner_laplacian(geom, p, cfg.get("run", "bochner_levels"))
        dim = riemann_roch_dimension(geom, p)
        thr = zero_tol * 4 * np.pi * max(p, 1)
        nz = bs.near_zero(thr)
        nxt = float(bs.eigenvalues[dim]) if len(bs.eigenvalues) > dim else np.nan
        bound = gap_tol * 2 * np.pi * geom.n * p
        out.append(_result(f"bochner_zeros[p={p}]", nz, dim, zero_tol, nz == dim))
        out.append(_result(f"bochner_gap[p={p}]", nxt, bound, gap_tol,
                           np.isfinite(nxt) and nxt >= bound, ratio=nxt / max(p, 1)))
    return out


CHECKS = {
    "rrh": check_rrh,
    "spectrum": check_spectrum,
    "invariants": check_invariants,
    "kato": check_kato,
    "poisson": check_poisson,
    "weyl": check_weyl,
    "orbit": check_orbit,
    "a0": check_a0,
    "b0": check_b0,
    "kernel_decay": check_kernel_decay,
    "window_decay": check_window_decay,
    "coherent": check_coherent,
    "bochner": check_bochner,
}


def exit_status(results):
    """0 all pass or skipped, 1 some check failed or inconclusive, 3 numerical error."""
    verdicts = {r.verdict for r in results}
    if ERROR in verdicts:
        return 3
    if verdicts & {FAIL, INCONCLUSIVE}:
        return 1
    return 0
