# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-cell assembly kernels (hot path of time-dependent assembly)."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def advection_local(const double[:, ::1] wdet, const double[:, ::1] shape_vals,
                    const double[:, :, ::1] grads, const double[:, :, ::1] b_quad):
    """local[c,i,j] = sum_q wdet[c,q] (b[c,q,:] . grads[c,j,:]) shape_vals[q,i]."""
    cdef Py_ssize_t nc = wdet.shape[0]
    cdef Py_ssize_t nq = wdet.shape[1]
    cdef Py_ssize_t c, q, i, j
    cdef double bg, wq
    out_arr = np.zeros((nc, 4, 4))
    cdef double[:, :, ::1] out = out_arr
    for c in range(nc):
        for q in range(nq):
            wq = wdet[c, q]
            for j in range(4):
                bg = (b_quad[c, q, 0] * grads[c, j, 0]
                      + b_quad[c, q, 1] * grads[c, j, 1]
                      + b_quad[c, q, 2] * grads[c, j, 2])
                for i in range(4):
                    out[c, i, j] += wq * shape_vals[q, i] * bg
    return out_arr


def reaction_local(const double[:, ::1] wdet, const double[:, ::1] shape_vals,
                   const double[:, ::1] c_quad):
    """local[c,i,j] = sum_q wdet[c,q] c[c,q] shape_vals[q,i] shape_vals[q,j]."""
    cdef Py_ssize_t nc = wdet.shape[0]
    cdef Py_ssize_t nq = wdet.shape[1]
    cdef Py_ssize_t c, q, i, j
    cdef double wc
    out_arr = np.zeros((nc, 4, 4))
    cdef double[:, :, ::1] out = out_arr
    for c in range(nc):
        for q in range(nq):
            wc = wdet[c, q] * c_quad[c, q]
            for i in range(4):
                for j in range(4):
                    out[c, i, j] += wc * shape_vals[q, i] * shape_vals[q, j]
    return out_arr


def load_local(const double[:, ::1] wdet, const double[:, ::1] shape_vals,
               const double[:, ::1] f_quad):
    """local[c,i] = sum_q wdet[c,q] f[c,q] shape_vals[q,i]."""
    cdef Py_ssize_t nc = wdet.shape[0]
    cdef Py_ssize_t nq = wdet.shape[1]
    cdef Py_ssize_t c, q, i
    cdef double wf
    out_arr = np.zeros((nc, 4))
    cdef double[:, ::1] out = out_arr
    for c in range(nc):
        for q in range(nq):
            wf = wdet[c, q] * f_quad[c, q]
            for i in range(4):
                out[c, i] += wf * shape_vals[q, i]
    return out_arr
