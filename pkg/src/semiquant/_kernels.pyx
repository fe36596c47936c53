# cython: language_level=3
"""Compiled flow kernels.

Same contract as ``semiquant._kernels_py``; the loops over points, terms and
factors run in C.  See that module for the meaning of the arguments.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport M_PI

cnp.import_array()


cdef inline double complex _cpw(double complex x, long k) noexcept nogil:
    cdef double complex r = 1.0
    cdef long i
    if k < 0:
        return 0.0
    for i in range(k):
        r = r * x
    return r


cdef inline void _factor_jet(double complex z, long a, long b, long d, int order,
                             double complex *g) noexcept nogil:
    """Fill g[0..5] with g, g_z, g_w, g_zz, g_zw, g_ww of z^a w^b q^-d."""
    cdef double complex w = z.conjugate()
    cdef double q = 1.0 + (z.real * z.real + z.imag * z.imag)
    cdef double qd0 = q ** (-d)
    cdef double qd1 = qd0 / q
    cdef double qd2 = qd1 / q
    cdef double dd = d * (d + 1.0)
    g[0] = _cpw(z, a) * _cpw(w, b) * qd0
    if order == 0:
        return
    g[1] = a * _cpw(z, a - 1) * _cpw(w, b) * qd0 - d * _cpw(z, a) * _cpw(w, b + 1) * qd1
    g[2] = b * _cpw(z, a) * _cpw(w, b - 1) * qd0 - d * _cpw(z, a + 1) * _cpw(w, b) * qd1
    if order == 1:
        return
    g[3] = (a * (a - 1.0) * _cpw(z, a - 2) * _cpw(w, b) * qd0
            - 2.0 * a * d * _cpw(z, a - 1) * _cpw(w, b + 1) * qd1
            + dd * _cpw(z, a) * _cpw(w, b + 2) * qd2)
    g[4] = (a * b * _cpw(z, a - 1) * _cpw(w, b - 1) * qd0
            - d * (a + b + 1.0) * _cpw(z, a) * _cpw(w, b) * qd1
            + dd * _cpw(z, a + 1) * _cpw(w, b + 1) * qd2)
    g[5] = (b * (b - 1.0) * _cpw(z, a) * _cpw(w, b - 2) * qd0
            - 2.0 * b * d * _cpw(z, a + 1) * _cpw(w, b - 1) * qd1
            + dd * _cpw(z, a + 2) * _cpw(w, b) * qd2)


cdef void _jet_point(const double complex[:] coef, const long[:, :] ea,
                     const long[:, :] eb, const long[:, :] ed,
                     const double complex[:] z, const long[:] charts, int order,
                     double complex[:, :] gbuf, double *f,
                     double complex[:] f_z, double complex[:] f_w,
                     double complex[:, :] f_zz, double complex[:, :] f_zw,
                     double complex[:, :] f_ww) noexcept nogil:
    cdef Py_ssize_t T = coef.shape[0]
    cdef Py_ssize_t s = z.shape[0]
    cdef Py_ssize_t t, i, j, k
    cdef long a, b, d
    cdef double complex c, rest, rest2, acc = 0.0
    for i in range(s):
        f_z[i] = 0.0
        f_w[i] = 0.0
        for j in range(s):
            f_zz[i, j] = 0.0
            f_zw[i, j] = 0.0
            f_ww[i, j] = 0.0
    for t in range(T):
        c = coef[t]
        for i in range(s):
            d = ed[t, i]
            if charts[i] == 1:
                a = d - ea[t, i]
                b = d - eb[t, i]
            else:
                a = ea[t, i]
                b = eb[t, i]
            _factor_jet(z[i], a, b, d, order, &gbuf[i, 0])
        rest = c
        for i in range(s):
            rest = rest * gbuf[i, 0]
        acc = acc + rest
        if order == 0:
            continue
        for i in range(s):
            rest = c
            for k in range(s):
                if k != i:
                    rest = rest * gbuf[k, 0]
            f_z[i] = f_z[i] + rest * gbuf[i, 1]
            f_w[i] = f_w[i] + rest * gbuf[i, 2]
            if order == 1:
                continue
            f_zz[i, i] = f_zz[i, i] + rest * gbuf[i, 3]
            f_zw[i, i] = f_zw[i, i] + rest * gbuf[i, 4]
            f_ww[i, i] = f_ww[i, i] + rest * gbuf[i, 5]
            for j in range(s):
                if j == i:
                    continue
                rest2 = c
                for k in range(s):
                    if k != i and k != j:
                        rest2 = rest2 * gbuf[k, 0]
                f_zz[i, j] = f_zz[i, j] + rest2 * gbuf[i, 1] * gbuf[j, 1]
                f_zw[i, j] = f_zw[i, j] + rest2 * gbuf[i, 1] * gbuf[j, 2]
                f_ww[i, j] = f_ww[i, j] + rest2 * gbuf[i, 2] * gbuf[j, 2]
    f[0] = acc.real


def hamiltonian_jet(coef, ea, eb, ed, z, charts, int order=2):
    cdef const double complex[:] c_v = np.ascontiguousarray(coef, dtype=np.complex128)
    cdef const long[:, :] ea_v = np.ascontiguousarray(ea, dtype=np.int64)
    cdef const long[:, :] eb_v = np.ascontiguousarray(eb, dtype=np.int64)
    cdef const long[:, :] ed_v = np.ascontiguousarray(ed, dtype=np.int64)
    zz = np.ascontiguousarray(z, dtype=np.complex128)
    cdef const double complex[:, :] z_v = zz
    cdef const long[:, :] ch_v = np.ascontiguousarray(charts, dtype=np.int64)
    cdef Py_ssize_t P = zz.shape[0]
    cdef Py_ssize_t s = zz.shape[1]
    f = np.empty(P)
    f_z = np.zeros((P, s), dtype=np.complex128)
    f_w = np.zeros((P, s), dtype=np.complex128)
    f_zz = np.zeros((P, s, s), dtype=np.complex128)
    f_zw = np.zeros((P, s, s), dtype=np.complex128)
    f_ww = np.zeros((P, s, s), dtype=np.complex128)
    cdef double[:] f_v = f
    cdef double complex[:, :] fz_v = f_z
    cdef double complex[:, :] fw_v = f_w
    cdef double complex[:, :, :] fzz_v = f_zz
    cdef double complex[:, :, :] fzw_v = f_zw
    cdef double complex[:, :, :] fww_v = f_ww
    cdef double complex[:, :] gbuf = np.zeros((s, 6), dtype=np.complex128)
    cdef Py_ssize_t p
    with nogil:
        for p in range(P):
            _jet_point(c_v, ea_v, eb_v, ed_v, z_v[p], ch_v[p], order, gbuf,
                       &f_v[p], fz_v[p], fw_v[p], fzz_v[p], fzw_v[p], fww_v[p])
    res = {"f": f}
    if order >= 1:
        res["f_z"] = f_z
        res["f_w"] = f_w
    if order >= 2:
        res["f_zz"] = f_zz
        res["f_zw"] = f_zw
        res["f_ww"] = f_ww
    return res


def flow_rhs(coef, ea, eb, ed, y, charts, bint want_jac=False):
    cdef const double complex[:] c_v = np.ascontiguousarray(coef, dtype=np.complex128)
    cdef const long[:, :] ea_v = np.ascontiguousarray(ea, dtype=np.int64)
    cdef const long[:, :] eb_v = np.ascontiguousarray(eb, dtype=np.int64)
    cdef const long[:, :] ed_v = np.ascontiguousarray(ed, dtype=np.int64)
    yy = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[:, :] y_v = yy
    cdef const long[:, :] ch_v = np.ascontiguousarray(charts, dtype=np.int64)
    cdef Py_ssize_t P = yy.shape[0]
    cdef Py_ssize_t s = yy.shape[1] // 2
    cdef int order = 2 if want_jac else 1
    dy = np.empty((P, 2 * s))
    dalpha = np.empty((P, s))
    f = np.empty(P)
    jac = np.zeros((P, 2 * s, 2 * s)) if want_jac else np.zeros((1, 1, 1))
    cdef double[:, :] dy_v = dy
    cdef double[:, :] da_v = dalpha
    cdef double[:] f_v = f
    cdef double[:, :, :] jac_v = jac
    cdef double complex[:, :] gbuf = np.zeros((s, 6), dtype=np.complex128)
    cdef double complex[:] zp = np.zeros(s, dtype=np.complex128)
    cdef double complex[:] f_z = np.zeros(s, dtype=np.complex128)
    cdef double complex[:] f_w = np.zeros(s, dtype=np.complex128)
    cdef double complex[:, :] f_zz = np.zeros((s, s), dtype=np.complex128)
    cdef double complex[:, :] f_zw = np.zeros((s, s), dtype=np.complex128)
    cdef double complex[:, :] f_ww = np.zeros((s, s), dtype=np.complex128)
    cdef Py_ssize_t p, i, j
    cdef double q
    cdef double complex zdot, Fz, Fw, cx, cy, mtp = -2.0j * M_PI
    with nogil:
        for p in range(P):
            for i in range(s):
                zp[i] = y_v[p, 2 * i] + 1j * y_v[p, 2 * i + 1]
            _jet_point(c_v, ea_v, eb_v, ed_v, zp, ch_v[p], order, gbuf,
                       &f_v[p], f_z, f_w, f_zz, f_zw, f_ww)
            for i in range(s):
                q = 1.0 + zp[i].real * zp[i].real + zp[i].imag * zp[i].imag
                zdot = mtp * q * q * f_w[i]
                dy_v[p, 2 * i] = zdot.real
                dy_v[p, 2 * i + 1] = zdot.imag
                da_v[p, i] = -(zp[i].conjugate() * zdot).imag / q
                if not want_jac:
                    continue
                for j in range(s):
                    Fz = q * q * f_zw[j, i]
                    Fw = q * q * f_ww[i, j]
                    if i == j:
                        Fz = Fz + 2.0 * q * zp[i].conjugate() * f_w[i]
                        Fw = Fw + 2.0 * q * zp[i] * f_w[i]
                    Fz = mtp * Fz
                    Fw = mtp * Fw
                    cx = Fz + Fw
                    cy = 1j * (Fz - Fw)
                    jac_v[p, 2 * i, 2 * j] = cx.real
                    jac_v[p, 2 * i + 1, 2 * j] = cx.imag
                    jac_v[p, 2 * i, 2 * j + 1] = cy.real
                    jac_v[p, 2 * i + 1, 2 * j + 1] = cy.imag
    return dy, (jac if want_jac else None), dalpha, f
