"""Vectorized fallback implementations of the per-cell assembly kernels."""

from __future__ import annotations

import numpy as np


def advection_local(wdet, shape_vals, grads, b_quad):
    """local[c,i,j] = sum_q wdet[c,q] (b[c,q,:] . grads[c,j,:]) shape_vals[q,i]."""
    bg = np.einsum("cqx,cjx->cqj", b_quad, grads, optimize=True)
    return np.einsum("cq,qi,cqj->cij", wdet, shape_vals, bg, optimize=True)


def reaction_local(wdet, shape_vals, c_quad):
    """local[c,i,j] = sum_q wdet[c,q] c[c,q] shape_vals[q,i] shape_vals[q,j]."""
    return np.einsum("cq,qi,qj->cij", wdet * c_quad, shape_vals, shape_vals, optimize=True)


def load_local(wdet, shape_vals, f_quad):
    """local[c,i] = sum_q wdet[c,q] f[c,q] shape_vals[q,i]."""
    return np.einsum("cq,qi->ci", wdet * f_quad, shape_vals, optimize=True)
