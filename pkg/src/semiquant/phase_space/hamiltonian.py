"""Real rational Hamiltonians on products of spheres.

A Hamiltonian is a finite sum of product terms

    c * prod_i z_i^{a_i} conj(z_i)^{b_i} (1+|z_i|^2)^{-d_i},   a_i, b_i <= d_i,

which is smooth on the sphere because in ``w = 1/z`` the same term reads
``w^{d-a} conj(w)^{d-b} (1+|w|^2)^{-d}``.  Terms are symmetrized on
construction so that the sum is real-valued.
"""
import hashlib
from math import comb

import numpy as np

from .. import kernels
from .geometry import ChartPoint


class Hamiltonian:
    """Real rational Hamiltonian given by product terms.

    Parameters
    ----------
    factors : int
        Number of sphere factors.
    terms : iterable of (coef, a, b, d)
        ``coef`` complex, ``a``, ``b``, ``d`` integer tuples of length
        ``factors``.  The conjugate of every term is added with half weight,
        so the stored function is ``Re`` of the given sum.
    name : str, optional
        Label used in reports.
    """

    def __init__(self, factors, terms, name="custom"):
        self.factors = int(factors)
        self.name = name
        acc = {}
        for coef, a, b, d in terms:
            a, b, d = (tuple(int(v) for v in x) for x in (a, b, d))
            if not (len(a) == len(b) == len(d) == self.factors):
                raise ValueError("exponent tuples must have one entry per factor")
            if any(ai < 0 or bi < 0 or ai > di or bi > di for ai, bi, di in zip(a, b, d)):
                raise ValueError(f"term {(a, b, d)} is not smooth at infinity (need a, b <= d)")
            for key, val in (((a, b, d), 0.5 * complex(coef)), ((b, a, d), 0.5 * np.conj(complex(coef)))):
                acc[key] = acc.get(key, 0.0) + val
        keys = sorted(k for k, v in acc.items() if v != 0)
        T = len(keys)
        s = self.factors
        self.coef = np.array([acc[k] for k in keys], dtype=complex).reshape(T)
        self.ea = np.array([k[0] for k in keys], dtype=np.int64).reshape(T, s)
        self.eb = np.array([k[1] for k in keys], dtype=np.int64).reshape(T, s)
        self.ed = np.array([k[2] for k in keys], dtype=np.int64).reshape(T, s)
        for arr in (self.coef, self.ea, self.eb, self.ed):
            arr.setflags(write=False)

    # -- construction helpers -----------------------------------------------
    @classmethod
    def constant(cls, factors, value):
        zero = (0,) * factors
        return cls(factors, [(value, zero, zero, zero)], name=f"const:{value}")

    def _terms(self):
        return [(c, tuple(a), tuple(b), tuple(d))
                for c, a, b, d in zip(self.coef, self.ea, self.eb, self.ed)]

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Hamiltonian.constant(self.factors, float(other))
        if other.factors != self.factors:
            raise ValueError("factor count mismatch")
        return Hamiltonian(self.factors, self._terms() + other._terms(),
                           name=f"({self.name})+({other.name})")

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, a):
        a = float(a)
        return Hamiltonian(self.factors, [(a * c, x, y, d) for c, x, y, d in self._terms()],
                           name=f"{a}*({self.name})")

    __rmul__ = __mul__

    def __neg__(self):
        return (-1.0) * self

    # -- structure ---------------------------------------------------------
    @property
    def degree(self):
        """Per-factor maximal denominator power ``d_i``."""
        if len(self.coef) == 0:
            return (0,) * self.factors
        return tuple(int(v) for v in self.ed.max(axis=0))

    @property
    def max_degree(self):
        return max(self.degree) if self.factors else 0

    def fingerprint(self):
        """Short hash of the term list (cache key component)."""
        h = hashlib.sha256()
        for arr in (self.coef, self.ea, self.eb, self.ed):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()[:16]

    def is_rotation_invariant(self, factor=None):
        """True when every term has ``a_i = b_i`` (invariant under z_i -> e^{is} z_i)."""
        idx = range(self.factors) if factor is None else [factor]
        return all(np.all(self.ea[:, i] == self.eb[:, i]) for i in idx)

    def separable_parts(self):
        """Split into single-factor Hamiltonians, or ``None`` if coupled.

        Returns
        -------
        list of Hamiltonian (one per factor, each with ``factors=1``) plus the
        constant part, or ``None`` when some term involves two factors.
        """
        parts = [[] for _ in range(self.factors)]
        const = 0.0
        for c, a, b, d in self._terms():
            active = [i for i in range(self.factors) if d[i] > 0]
            if len(active) == 0:
                const += c.real
            elif len(active) == 1:
                i = active[0]
                parts[i].append((c, (a[i],), (b[i],), (d[i],)))
            else:
                return None
        return [Hamiltonian(1, p, name=f"{self.name}[{i}]") for i, p in enumerate(parts)], const

    # -- evaluation --------------------------------------------------------
    def jet(self, z, charts, order=2):
        """Value and chart Wirtinger derivatives at a batch of points.

        Parameters
        ----------
        z : complex array (P, s)
        charts : int array (P, s)
        order : {0, 1, 2}
        """
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        charts = np.broadcast_to(np.atleast_2d(np.asarray(charts, dtype=np.int64)), z.shape)
        if len(self.coef) == 0:
            P, s = z.shape
            out = {"f": np.zeros(P)}
            if order >= 1:
                out["f_z"] = np.zeros((P, s), complex)
                out["f_w"] = np.zeros((P, s), complex)
            if order >= 2:
                for k in ("f_zz", "f_zw", "f_ww"):
                    out[k] = np.zeros((P, s, s), complex)
            return out
        return kernels.hamiltonian_jet(self.coef, self.ea, self.eb, self.ed, z, charts, order)

    def __call__(self, x):
        """Value at a :class:`ChartPoint`."""
        return float(self.jet(x.z[None, :], np.array(x.charts)[None, :], 0)["f"][0])

    def values(self, z, charts=None):
        """Values at affine (``charts=None``) or chart coordinates."""
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        if charts is None:
            charts = np.zeros(z.shape, dtype=np.int64)
        return self.jet(z, charts, 0)["f"]

    def gradient(self, x):
        """Real chart gradient ``(df/dx_1, df/dy_1, ...)`` at a point."""
        jet = self.jet(x.z[None, :], np.array(x.charts)[None, :], 1)
        fz = jet["f_z"][0]
        g = np.empty(2 * self.factors)
        g[0::2] = 2.0 * fz.real        # df/dx = f_z + f_w = 2 Re f_z
        g[1::2] = -2.0 * fz.imag       # df/dy = i(f_z - f_w) = -2 Im f_z
        return g

    def hessian(self, x):
        """Real chart Hessian at a point."""
        jet = self.jet(x.z[None, :], np.array(x.charts)[None, :], 2)
        s = self.factors
        H = np.empty((2 * s, 2 * s))
        fzz, fzw, fww = jet["f_zz"][0], jet["f_zw"][0], jet["f_ww"][0]
        for i in range(s):
            for j in range(s):
                # second derivatives via d/dx = d_z + d_w, d/dy = i(d_z - d_w)
                xx = fzz[i, j] + fzw[i, j] + fzw[j, i] + fww[i, j]
                xy = 1j * (fzz[i, j] - fzw[i, j] + fzw[j, i] - fww[i, j])
                yy = -(fzz[i, j] - fzw[i, j] - fzw[j, i] + fww[i, j])
                H[2 * i, 2 * j] = xx.real
                H[2 * i, 2 * j + 1] = xy.real
                H[2 * i + 1, 2 * j] = (1j * (fzz[i, j] + fzw[i, j] - fzw[j, i] - fww[i, j])).real
                H[2 * i + 1, 2 * j + 1] = yy.real
        return H

    def __repr__(self):
        return f"Hamiltonian({self.name!r}, factors={self.factors}, terms={len(self.coef)})"


# -- presets ---------------------------------------------------------------

def _unit(factors, i, a, b, d):
    vec = [[0] * factors for _ in range(3)]
    vec[0][i], vec[1][i], vec[2][i] = a, b, d
    return tuple(vec[0]), tuple(vec[1]), tuple(vec[2])


def rotation(factors=1, frequencies=None):
    """``sum_i w_i |z_i|^2/(1+|z_i|^2)``; the height function of each factor."""
    w = [1.0] * factors if frequencies is None else list(frequencies)
    terms = [(w[i],) + _unit(factors, i, 1, 1, 1) for i in range(factors)]
    name = "rotation" if frequencies is None else "product:" + ",".join(repr(x) for x in w)
    return Hamiltonian(factors, terms, name=name)


def radial(coeffs):
    """``F(f_0)`` with ``F(u) = sum_k coeffs[k-1] u^k`` on one sphere."""
    coeffs = [float(c) for c in coeffs]
    K = len(coeffs)
    terms = []
    for k, ck in enumerate(coeffs, start=1):
        # f0^k = |z|^{2k} (1+|z|^2)^{K-k} / (1+|z|^2)^K
        for j in range(K - k + 1):
            terms.append((ck * comb(K - k, j), (k + j,), (k + j,), (K,)))
    return Hamiltonian(1, terms, name="radial:" + ",".join(repr(c) for c in coeffs))


def perturbed(coeffs):
    """``f_0 + e1 * 2Re(z)/(1+|z|^2) + e2 * 2Re(z^2)/(1+|z|^2)^2`` on one sphere.

    The ``e1`` term generates a rotation about a tilted axis (still
    holomorphic); the ``e2`` term is a quadrupole and makes the flow
    non-holomorphic, so the complex structure moves along the flow.
    """
    e = [float(c) for c in coeffs] + [0.0] * (2 - len(coeffs))
    e1, e2 = e[:2]
    terms = [(1.0, (1,), (1,), (1,)),
             (2.0 * e1, (1,), (0,), (1,)),
             (2.0 * e2, (2,), (0,), (2,))]
    return Hamiltonian(1, terms, name="perturbed:" + ",".join(repr(c) for c in e[:2]))


def product(frequencies):
    """``w_1 f_0(z_1) + w_2 f_0(z_2) + ...`` on a product of spheres."""
    return rotation(len(frequencies), frequencies)


def parse_preset(spec, factors=None):
    """Build a Hamiltonian from a preset string.

    Accepted forms: ``rotation``, ``radial:c1,c2,...``, ``perturbed:e1,e2``,
    ``product:w1,w2``, ``const:c``.
    """
    name, _, arg = spec.partition(":")
    name = name.strip().lower()
    vals = [float(eval_number(v)) for v in arg.split(",") if v.strip()] if arg else []
    if name == "rotation":
        return rotation(factors or 1)
    if name == "radial":
        if not vals:
            raise ValueError("radial preset needs coefficients, e.g. radial:1,0.5")
        return radial(vals)
    if name == "perturbed":
        if not vals:
            raise ValueError("perturbed preset needs coefficients, e.g. perturbed:0.1,0.15")
        return perturbed(vals)
    if name == "product":
        if len(vals) < 2:
            raise ValueError("product preset needs at least two frequencies")
        return product(vals)
    if name == "const":
        return Hamiltonian.constant(factors or 1, vals[0] if vals else 0.0)
    raise ValueError(f"unknown Hamiltonian preset {spec!r}")


def eval_number(text):
    """Parse a float, also accepting ``sqrt(x)``."""
    text = text.strip()
    if text.startswith("sqrt(") and text.endswith(")"):
        return np.sqrt(float(text[5:-1]))
    return float(text)


def as_chart_arrays(points):
    """Stack ChartPoints into ``(z, charts)`` arrays."""
    if isinstance(points, ChartPoint):
        points = [points]
    z = np.array([p.z for p in points], dtype=complex)
    ch = np.array([p.charts for p in points], dtype=np.int64)
    return z, ch
