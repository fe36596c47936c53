"""Smoothed spectral traces and their Weyl and Gutzwiller predictions."""
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..operators import SpectralData
from ..phase_space.orbits import liouville_volume
from .window import WindowFunction, time_sum


@dataclass(frozen=True, eq=False)
class FactorSpectra:
    """Spectrum of a Kronecker sum: all sums ``const + sum_i a_{i,k_i}``."""

    factors: tuple
    const: float = 0.0

    @property
    def dim(self):
        return int(np.prod([len(a) for a in self.factors]))

    @property
    def eigenvalues(self):
        lam = np.array([self.const])
        for a in self.factors:
            lam = (lam[:, None] + np.asarray(a)[None, :]).ravel()
        return np.sort(lam)

    def bounds(self):
        lo = self.const + sum(float(np.min(a)) for a in self.factors)
        hi = self.const + sum(float(np.max(a)) for a in self.factors)
        return lo, hi


def _spectrum_parts(Q):
    if isinstance(Q, FactorSpectra):
        return list(Q.factors), Q.const
    lam = Q.eigenvalues if isinstance(Q, SpectralData) else np.asarray(Q, dtype=float)
    return [lam], 0.0


def smoothed_trace(Q, g, c, p):
    """``Tr ghat(p (Q_p(f) - c)) = sum_k ghat(p (lambda_k - c))``.

    Parameters
    ----------
    Q : SpectralData, FactorSpectra or array of eigenvalues
    g : WindowFunction
    c : float
    p : int
    """
    parts, const = _spectrum_parts(Q)
    scaled = [p * np.asarray(a, dtype=float) for a in parts]
    shift = p * (const - c)
    e_max = abs(shift) + sum(float(np.max(np.abs(a))) for a in scaled)
    return time_sum(g, e_max, scaled, shift)


def smoothed_trace_direct(Q, g, c, p):
    """Reference evaluation ``sum_k ghat(p (lambda_k - c))`` term by term."""
    lam = Q.eigenvalues if hasattr(Q, "eigenvalues") else np.asarray(Q, dtype=float)
    return complex(np.sum(g.hat(p * (lam - c))))


def smoothed_kernel_matrix(Q, g, c, p):
    """Matrix of ``ghat(p (Q - c))`` in the basis of ``Q``."""
    return Q.function(lambda lam: g.hat(p * (lam - c)))


def poisson_rotation(g, c, p, m_range=None):
    """``sum_m g(m) e^{2 pi i m p c}`` over integers ``m`` in the support of ``g``.

    This is the exact Poisson-summation value of ``sum_{k in Z} ghat(k - p c)``.
    """
    a, b = g.support
    ms = np.arange(int(np.ceil(a)), int(np.floor(b)) + 1) if m_range is None else np.asarray(m_range)
    return complex(np.sum(g(ms) * np.exp(2j * np.pi * ms * p * c)))


def weyl_term(geom, f, c, g, p, rkE=1, **volume_kw):
    """``p^{n-1} g(0) rk(E) Vol_omega(f^{-1}(c))``."""
    g0 = float(g(0.0))
    if g0 == 0.0:
        return 0.0
    vol = liouville_volume(geom, f, c, **volume_kw)
    return float(p ** (geom.n - 1) * g0 * rkE * vol)


@dataclass
class OrbitTerm:
    """One resonant orbit contribution ``p^{(d-1)/2} g(t) e^{-2 pi i p lam} chi b``."""

    resonant_time: float
    action: float
    dim: int
    b0: complex
    holonomy: complex = 1.0
    weight: float = 0.0
    primitive_period: float = 0.0
    stab_det: float = 0.0

    def value(self, p):
        return (p ** ((self.dim - 1) / 2) * self.weight
                * np.exp(-2j * np.pi * p * self.action) * self.holonomy * self.b0)


@dataclass
class TracePrediction:
    """Leading-order model of the smoothed trace."""

    terms: list
    weyl: float = 0.0
    weyl_power: int = 0
    has_weyl: bool = False
    excluded: list = field(default_factory=list)
    branch: complex = 1.0

    def __call__(self, p):
        total = (self.weyl * p ** self.weyl_power) if self.has_weyl else 0.0
        return complex(total + sum(term.value(p) for term in self.terms))

    def csv_rows(self):
        for j, term in enumerate(self.terms):
            yield {"term": j, "resonant_time": term.resonant_time, "action": term.action,
                   "dim": term.dim, "b0_re": complex(term.b0).real,
                   "b0_im": complex(term.b0).imag, "weight": term.weight}


def twist_holonomy(geom, f, orbit, mode=None):
    """Phase of the twist lift around a closed orbit (1 for untwisted bundles).

    For ``O(m)`` lifted with moment ``mu`` the fibre map over one resonant
    time ``t`` is ``exp(-2 pi i t mu(x) + i sum_i m_i alpha_i)``; ``mu = m f``
    for the Kostant lift and ``(1/2) q^2 f_{z zbar}`` for the metaplectic one.
    """
    tw = np.asarray(geom.twists, dtype=float)
    if not np.any(tw):
        return 1.0 + 0.0j
    if mode is None:
        mode = "metaplectic" if geom.metaplectic else "kostant"
    x = orbit.point
    alpha = np.asarray(orbit.diagnostics["alpha"], dtype=float)
    if mode == "metaplectic":
        jet = f.jet(x.z[None, :], np.array(x.charts)[None, :], 2)
        q = 1.0 + np.abs(x.z) ** 2
        mu = 0.5 * float(np.sum(q ** 2 * np.diagonal(jet["f_zw"][0]).real))
    else:
        if len(set(geom.twists)) != 1:
            raise ValueError("unequal Kostant twists are not supported")
        mu = geom.twists[0] * f(x)
    t = orbit.resonant_time
    return complex(np.exp(-2j * np.pi * t * mu + 1j * float(tw @ alpha)))


def complex_normal_determinant(geom, f, orbit, tol=1e-6):
    """``det_C(Id - dphi|_{N^{1,0}})`` for a return map commuting with ``J``.

    Raises
    ------
    ValueError
        If the return map is not complex linear (within ``tol``).
    """
    from ..phase_space.orbits import normal_basis
    A = orbit.return_map
    if A.size == 0:
        return 1.0 + 0.0j
    x = orbit.point
    B = normal_basis(geom, f, x)
    G = geom.metric_matrix(x.z)
    JN = B.T @ G @ geom.j0_matrix() @ B
    if np.linalg.norm(A @ JN - JN @ A) > tol * max(1.0, np.linalg.norm(A)):
        raise ValueError("return map is not complex linear on the normal space")
    w, V = np.linalg.eig(JN)
    hol = V[:, np.abs(w - 1j) < 1e-6]
    lam = [complex(v.conj() @ A @ v / (v.conj() @ v)) for v in hol.T]
    return complex(np.prod([1.0 - l for l in lam]))


def orbit_amplitude(orbit, n, branch=1j, mode="formula", geom=None, f=None):
    """Leading orbit amplitude ``b_{j,0}``.

    ``mode="formula"``: ``s_n t(Y) / |det(Id - P)|^{1/2}`` with
    ``s_n = (-1)^{(n-1)/2}``; for even ``n`` the square root of ``-1`` is
    ``branch`` (a recorded convention, determined on the product model).

    ``mode="complex"``: ``t(Y) / det_C(Id - P|_{N^{1,0}})``, available when the
    return map is complex linear (holomorphic flows); same modulus, with the
    phase fixed by the holomorphic determinant.
    """
    if mode == "complex":
        return complex(orbit.primitive_period / complex_normal_determinant(geom, f, orbit))
    if mode != "formula":
        raise ValueError(f"unknown amplitude mode {mode!r}")
    sign = (-1.0) ** ((n - 1) // 2) if n % 2 == 1 else branch ** (n - 1)
    det = orbit.stab_det if n > 1 else 1.0
    return complex(sign * orbit.primitive_period / np.sqrt(det))


def gutzwiller_predict(geom, f, c, g, orbits, p=None, metaplectic=True, branch=1j,
                       amplitude="formula", weyl_kw=None):
    """Leading-order Gutzwiller model of ``Tr ghat(p Q_p(f - c))``.

    Parameters
    ----------
    orbits : list of OrbitRecord
        Orbits with resonant times in the support of ``g``.  Degenerate ones
        are excluded with a warning.
    p : int, optional
        Unused by the model itself; kept so callers can evaluate directly.
    metaplectic : bool
        Requires twist ``-1`` on every factor; the amplitudes then carry no
        subprincipal correction.
    branch : complex
        Square root of ``-1`` used for even ``n``.
    amplitude : {"formula", "complex"}
        See :func:`orbit_amplitude`.

    Every term carries the twist holonomy of :func:`twist_holonomy`.
    """
    if metaplectic and not geom.metaplectic:
        raise ValueError("metaplectic prediction requires twist -1 on every factor")
    n = geom.n
    terms, excluded = [], []
    for orb in orbits:
        w = float(g(orb.resonant_time))
        if abs(w) <= 1e-12:
            continue
        if not orb.nondegenerate:
            warnings.warn(f"degenerate orbit at t={orb.resonant_time:.6g} excluded",
                          RuntimeWarning, stacklevel=2)
            excluded.append(orb)
            continue
        terms.append(OrbitTerm(resonant_time=orb.resonant_time, action=orb.action_shifted,
                               dim=orb.dim,
                               b0=orbit_amplitude(orb, n, branch, amplitude, geom, f),
                               holonomy=twist_holonomy(geom, f, orb), weight=w,
                               primitive_period=orb.primitive_period,
                               stab_det=orb.stab_det))
    a, b = g.support
    has_weyl = a < 0.0 < b
    weyl = weyl_term(geom, f, c, g, 1, **(weyl_kw or {})) if has_weyl else 0.0
    return TracePrediction(terms, weyl=weyl, weyl_power=n - 1, has_weyl=has_weyl,
                           excluded=excluded, branch=branch)


def resonant_orbits(geom, f, c, g, opts=None):
    """Orbits at level ``c`` whose resonant times lie in the support of ``g``."""
    from ..phase_space.orbits import find_periodic_orbits
    a, b = g.support
    return [o for o in find_periodic_orbits(geom, f, c, (a, b), opts)
            if g.contains(o.resonant_time)]
