"""Pure numpy implementation of the flow kernels.

This module is the reference implementation and the fallback used when the
compiled extension ``semiquant._kernels`` is not available.  Both expose the
same two functions with identical signatures:

``hamiltonian_jet(coef, ea, eb, ed, z, charts, order)``
    Value and Wirtinger derivatives (up to second order) of a rational
    Hamiltonian given as a sum of product terms
    ``coef * prod_i z_i**a_i * conj(z_i)**b_i * (1 + |z_i|**2)**(-d_i)``.

``flow_rhs(coef, ea, eb, ed, y, charts, want_jac)``
    Right-hand side of the Hamiltonian ODE in real chart coordinates, its
    Jacobian and the rate of the unitary-frame connection phase.

Exponents are stored for the affine chart.  A factor in the chart at infinity
uses ``(d - a, d - b, d)``, which is the same function written in ``w = 1/z``.
"""
import numpy as np

TWO_PI = 2.0 * np.pi


def _pw(x, k):
    """``x**k`` for integer arrays ``k`` with zero wherever ``k < 0``."""
    out = np.power(x, np.clip(k, 0, None))
    return np.where(k >= 0, out, 0.0)


def _factor_jet(z, a, b, d, order):
    """Jet of ``z^a zbar^b q^{-d}`` for one factor.

    Parameters
    ----------
    z : complex array (P, 1)
    a, b, d : int arrays (P, T) or (1, T)
    order : int

    Returns
    -------
    tuple of complex arrays (P, T): g, g_z, g_w and, for ``order >= 2``,
    g_zz, g_zw, g_ww (``w`` standing for ``conj(z)``).
    """
    w = np.conj(z)
    q = 1.0 + (z * w).real
    qd0 = q ** (-d)
    g = _pw(z, a) * _pw(w, b) * qd0
    if order == 0:
        return (g,)
    qd1 = qd0 / q
    g_z = a * _pw(z, a - 1) * _pw(w, b) * qd0 - d * _pw(z, a) * _pw(w, b + 1) * qd1
    g_w = b * _pw(z, a) * _pw(w, b - 1) * qd0 - d * _pw(z, a + 1) * _pw(w, b) * qd1
    if order == 1:
        return g, g_z, g_w
    qd2 = qd1 / q
    dd = d * (d + 1)
    g_zz = (a * (a - 1) * _pw(z, a - 2) * _pw(w, b) * qd0
            - 2 * a * d * _pw(z, a - 1) * _pw(w, b + 1) * qd1
            + dd * _pw(z, a) * _pw(w, b + 2) * qd2)
    g_zw = (a * b * _pw(z, a - 1) * _pw(w, b - 1) * qd0
            - d * (a + b + 1) * _pw(z, a) * _pw(w, b) * qd1
            + dd * _pw(z, a + 1) * _pw(w, b + 1) * qd2)
    g_ww = (b * (b - 1) * _pw(z, a) * _pw(w, b - 2) * qd0
            - 2 * b * d * _pw(z, a + 1) * _pw(w, b - 1) * qd1
            + dd * _pw(z, a + 2) * _pw(w, b) * qd2)
    return g, g_z, g_w, g_zz, g_zw, g_ww


def _chart_exponents(ea, eb, ed, charts, i):
    """Per-point exponent arrays of factor ``i`` in the point's chart."""
    flip = (np.asarray(charts)[:, i] == 1)[:, None]
    a = np.where(flip, ed[None, :, i] - ea[None, :, i], ea[None, :, i])
    b = np.where(flip, ed[None, :, i] - eb[None, :, i], eb[None, :, i])
    d = np.broadcast_to(ed[None, :, i], a.shape)
    return a, b, d


def hamiltonian_jet(coef, ea, eb, ed, z, charts, order=2):
    """Value and chart derivatives of a rational product Hamiltonian.

    Parameters
    ----------
    coef : complex array (T,)
    ea, eb, ed : int arrays (T, s)
        Affine-chart exponents of ``z``, ``conj(z)`` and ``1/(1+|z|^2)``.
    z : complex array (P, s)
        Chart coordinates.
    charts : int array (P, s)
        0 for the affine chart, 1 for the chart at infinity.
    order : {0, 1, 2}

    Returns
    -------
    dict with ``f`` (P,), and for ``order >= 1`` ``f_z``, ``f_w`` (P, s), and
    for ``order >= 2`` ``f_zz``, ``f_zw``, ``f_ww`` (P, s, s) where
    ``f_zw[:, i, j]`` is the derivative along ``z_i`` then ``conj(z_j)``.
    """
    z = np.asarray(z, dtype=complex)
    P, s = z.shape
    jets = []
    for i in range(s):
        a, b, d = _chart_exponents(ea, eb, ed, charts, i)
        jets.append(_factor_jet(z[:, i:i + 1], a, b, d, order))
    G = [j[0] for j in jets]
    c = coef[None, :]

    def prod_except(skip):
        out = np.ones_like(G[0])
        for k in range(s):
            if k not in skip:
                out = out * G[k]
        return out

    res = {"f": (c * prod_except(())).sum(axis=1).real}
    if order == 0:
        return res
    f_z = np.empty((P, s), dtype=complex)
    f_w = np.empty((P, s), dtype=complex)
    for i in range(s):
        rest = c * prod_except((i,))
        f_z[:, i] = (rest * jets[i][1]).sum(axis=1)
        f_w[:, i] = (rest * jets[i][2]).sum(axis=1)
    res["f_z"] = f_z
    res["f_w"] = f_w
    if order == 1:
        return res
    f_zz = np.empty((P, s, s), dtype=complex)
    f_zw = np.empty((P, s, s), dtype=complex)
    f_ww = np.empty((P, s, s), dtype=complex)
    for i in range(s):
        rest = c * prod_except((i,))
        f_zz[:, i, i] = (rest * jets[i][3]).sum(axis=1)
        f_zw[:, i, i] = (rest * jets[i][4]).sum(axis=1)
        f_ww[:, i, i] = (rest * jets[i][5]).sum(axis=1)
        for j in range(s):
            if j == i:
                continue
            rest2 = c * prod_except((i, j))
            f_zz[:, i, j] = (rest2 * jets[i][1] * jets[j][1]).sum(axis=1)
            f_zw[:, i, j] = (rest2 * jets[i][1] * jets[j][2]).sum(axis=1)
            f_ww[:, i, j] = (rest2 * jets[i][2] * jets[j][2]).sum(axis=1)
    res["f_zz"] = f_zz
    res["f_zw"] = f_zw
    res["f_ww"] = f_ww
    return res


def flow_rhs(coef, ea, eb, ed, y, charts, want_jac=False):
    """Hamiltonian vector field in real chart coordinates.

    With ``omega = (i/2pi) dz ^ dzbar / (1+|z|^2)^2`` per factor, the equation
    ``iota_xi omega = df`` gives ``zdot_i = -2 pi i (1+|z_i|^2)^2 df/dzbar_i``.

    Parameters
    ----------
    y : real array (P, 2s)
        Interleaved ``(x_1, y_1, x_2, y_2, ...)`` chart coordinates.
    charts : int array (P, s)
    want_jac : bool
        Also return the real Jacobian of the vector field.

    Returns
    -------
    dy : real array (P, 2s)
    jac : real array (P, 2s, 2s) or None
    dalpha : real array (P, s)
        Rate of the per-factor unitary-frame connection angle,
        ``-Im(conj(z) zdot) / (1+|z|^2)``.
    f : real array (P,)
    """
    y = np.asarray(y, dtype=float)
    P = y.shape[0]
    s = y.shape[1] // 2
    z = y[:, 0::2] + 1j * y[:, 1::2]
    jet = hamiltonian_jet(coef, ea, eb, ed, z, charts, order=2 if want_jac else 1)
    w = np.conj(z)
    q = 1.0 + (z * w).real
    zdot = -1j * TWO_PI * q ** 2 * jet["f_w"]
    dy = np.empty((P, 2 * s))
    dy[:, 0::2] = zdot.real
    dy[:, 1::2] = zdot.imag
    dalpha = -(w * zdot).imag / q
    jac = None
    if want_jac:
        jac = np.empty((P, 2 * s, 2 * s))
        for i in range(s):
            for j in range(s):
                # d zdot_i / d z_j and d zdot_i / d zbar_j
                Fz = q[:, i] ** 2 * jet["f_zw"][:, j, i]
                Fw = q[:, i] ** 2 * jet["f_ww"][:, i, j]
                if i == j:
                    Fz = Fz + 2.0 * q[:, i] * w[:, i] * jet["f_w"][:, i]
                    Fw = Fw + 2.0 * q[:, i] * z[:, i] * jet["f_w"][:, i]
                Fz = -1j * TWO_PI * Fz
                Fw = -1j * TWO_PI * Fw
                col_x = Fz + Fw
                col_y = 1j * (Fz - Fw)
                jac[:, 2 * i, 2 * j] = col_x.real
                jac[:, 2 * i + 1, 2 * j] = col_x.imag
                jac[:, 2 * i, 2 * j + 1] = col_y.real
                jac[:, 2 * i + 1, 2 * j + 1] = col_y.imag
    return dy, jac, dalpha, jet["f"]
