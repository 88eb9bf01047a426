# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled 7-point complex stencil kernel (the solver's hot matvec)."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

ctypedef double complex dc


def apply_stencil(cnp.ndarray[dc, ndim=3] diag,
                  cnp.ndarray[dc, ndim=3] wx,
                  cnp.ndarray[dc, ndim=3] wy,
                  cnp.ndarray[dc, ndim=3] wz,
                  cnp.ndarray[dc, ndim=3] v,
                  cnp.ndarray[dc, ndim=3] out=None):
    cdef Py_ssize_t nx = v.shape[0], ny = v.shape[1], nz = v.shape[2]
    cdef Py_ssize_t i, j, k
    cdef dc acc
    if out is None:
        out = np.empty_like(v)
    cdef dc[:, :, ::1] o = out
    cdef dc[:, :, ::1] d = diag
    cdef dc[:, :, ::1] x = v
    cdef dc[:, :, ::1] cx = wx
    cdef dc[:, :, ::1] cy = wy
    cdef dc[:, :, ::1] cz = wz
    with nogil:
        for i in range(nx):
            for j in range(ny):
                for k in range(nz):
                    acc = d[i, j, k] * x[i, j, k]
                    if i + 1 < nx:
                        acc = acc + cx[i, j, k] * x[i + 1, j, k]
                    if i > 0:
                        acc = acc + cx[i - 1, j, k].conjugate() * x[i - 1, j, k]
                    if j + 1 < ny:
                        acc = acc + cy[i, j, k] * x[i, j + 1, k]
                    if j > 0:
                        acc = acc + cy[i, j - 1, k].conjugate() * x[i, j - 1, k]
                    if k + 1 < nz:
                        acc = acc + cz[i, j, k] * x[i, j, k + 1]
                    if k > 0:
                        acc = acc + cz[i, j, k - 1].conjugate() * x[i, j, k - 1]
                    o[i, j, k] = acc
    return out
