"""Compactly supported windows ``g`` and their transforms ``ghat(E) = int g(t) e^{-2 pi i t E} dt``."""
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate


@dataclass(frozen=True)
class WindowFunction:
    """Bump ``g`` supported on ``(center - half_width, center + half_width)``.

    With ``x = (t - center) / half_width`` the profile is
    ``exp(-beta x^2 / (1 - x^2))`` for ``order = inf`` (smooth, ``g(center) = 1``)
    and ``(1 - x^2)^order`` otherwise (``order - 1`` continuous derivatives,
    ``|ghat(E)| ~ |E|^{-order-1}``).

    ``ghat`` is evaluated by the trapezoidal rule on the support.  For a
    compactly supported ``g`` that rule returns ``sum_m ghat(E + m/h)``, so
    choosing ``1/h`` beyond ``|E|`` plus the energy where ``|ghat|`` falls
    below round-off makes it accurate to about ``1e-15`` absolute.
    """

    center: float = 0.0
    half_width: float = 1.0
    order: float = np.inf
    beta: float = 1.0

    def __post_init__(self):
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")
        if not (np.isinf(self.order) or self.order >= 1):
            raise ValueError("order must be >= 1 or inf")
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    @property
    def support(self):
        return (self.center - self.half_width, self.center + self.half_width)

    def contains(self, t):
        a, b = self.support
        return a < t < b

    def __call__(self, t):
        x = (np.asarray(t, dtype=float) - self.center) / self.half_width
        inside = np.abs(x) < 1.0
        xi = np.where(inside, x, 0.0)
        if np.isinf(self.order):
            val = np.exp(-self.beta * xi ** 2 / (1.0 - xi ** 2))
        else:
            val = (1.0 - xi ** 2) ** self.order
        return np.where(inside, val, 0.0)

    def integral(self):
        """``int g = ghat(0)``."""
        a, b = self.support
        return integrate.quad(self, a, b, epsabs=1e-14, epsrel=1e-13, limit=200)[0]

    # -- transform ---------------------------------------------------------------
    @cached_property
    def tail_energy(self):
        """Energy beyond which ``|ghat|`` stays below ``1e-16 * int g``."""
        n = 2 ** 15
        t = self.center - self.half_width + np.arange(1, n) * (2 * self.half_width / n)
        h = 2 * self.half_width / n
        pad = 8
        spec = np.abs(np.fft.rfft(self(t), n * pad)) * h
        E = np.arange(len(spec)) / (n * pad * h)
        big = np.nonzero(spec > 1e-16 * spec[0])[0]
        return float(E[big[-1]] * 1.2 + 1.0)

    def nodes(self, e_max):
        """Trapezoid nodes and weights adequate for energies ``|E| <= e_max``."""
        w = self.half_width
        n = int(np.ceil(2 * w * (abs(e_max) + self.tail_energy))) + 32
        h = 2 * w / n
        t = self.center - w + np.arange(1, n) * h
        return t, h * self(t)

    def hat(self, E, chunk=4096):
        """``ghat(E)`` for an array of energies."""
        E = np.asarray(E, dtype=float)
        flat = E.ravel()
        if flat.size == 0:
            return np.zeros(E.shape, dtype=complex)
        t, wt = self.nodes(np.max(np.abs(flat)))
        out = np.empty(flat.size, dtype=complex)
        for s in range(0, flat.size, chunk):
            e = flat[s:s + chunk]
            out[s:s + chunk] = np.exp(-2j * np.pi * np.outer(e, t)) @ wt
        return out.reshape(E.shape)

    def hat_quad(self, E):
        """``ghat(E)`` by adaptive oscillatory quadrature (reference values)."""
        a, b = self.support
        out = []
        for e in np.atleast_1d(np.asarray(E, dtype=float)):
            om = 2 * np.pi * e
            if om == 0:
                out.append(self.integral())
                continue
            kw = dict(epsabs=1e-13, epsrel=1e-12, limit=400)
            re = integrate.quad(self, a, b, weight="cos", wvar=om, **kw)[0]
            im = integrate.quad(self, a, b, weight="sin", wvar=om, **kw)[0]
            out.append(re - 1j * im)
        return np.array(out)

    def key(self):
        return f"bump(c={self.center!r},w={self.half_width!r},k={self.order!r},b={self.beta!r})"


def time_sum(g, phases_max, factor_spectra, shift):
    """``sum_k ghat(E_k)`` for ``E = sum_i a_{i,k_i} + shift`` over a product index set.

    Parameters
    ----------
    g : WindowFunction
    phases_max : float
        Upper bound on ``|E|``.
    factor_spectra : list of real arrays ``a_i``
    shift : float

    Notes
    -----
    Uses ``sum_k ghat(E_k) = int g(t) e^{-2 pi i t shift} prod_i sum_k e^{-2 pi i t a_{i,k}} dt``
    with the trapezoid nodes of :meth:`WindowFunction.nodes`, which costs
    ``O(n_nodes * sum_i len(a_i))`` instead of the product of the lengths.
    """
    t, wt = g.nodes(phases_max)
    acc = wt * np.exp(-2j * np.pi * t * shift)
    for a in factor_spectra:
        a = np.asarray(a, dtype=float)
        S = np.zeros(len(t), dtype=complex)
        for s in range(0, len(a), 512):
            S += np.exp(-2j * np.pi * np.outer(t, a[s:s + 512])).sum(axis=1)
        acc = acc * S
    return complex(acc.sum())
