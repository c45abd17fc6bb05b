"""P1 finite element assembly over a periodic tetrahedral mesh.

The weak form of the transport operator contributes four matrices (mass,
diffusion, advection, reaction) and a load vector.  Mass and stiffness use
closed-form P1 integrals; the coefficient-dependent terms use a fixed cell
quadrature and route their per-cell work through ``tgapod._kernels``.

Coefficient fields are numpy-vectorized callables:

* scalar fields: ``f(x, y, z, t) -> array`` broadcasting over the point
  arrays;
* velocity fields: ``B(x, y, z, t) -> (Bx, By, Bz)`` with each component
  broadcasting over the point arrays.

All assembly runs over cells in a fixed order, so repeated calls with the
same inputs return bitwise-identical matrices.
"""

from __future__ import annotations

import weakref

import numpy as np
import scipy.sparse as sp

from tgapod import _kernels
from tgapod.mesh import PeriodicMesh
from tgapod.quadrature import TetRule, degree2_rule

DEFAULT_RULE = degree2_rule()

_geom_cache: "weakref.WeakKeyDictionary[PeriodicMesh, dict]" = weakref.WeakKeyDictionary()


def _scatter(mesh: PeriodicMesh) -> dict:
    """Precomputed local-to-global CSR scatter for one mesh.

    Cell-major triplets are sorted once by (row, col); each assembly then
    gathers its values through the fixed permutation and segment-sums them,
    which both avoids re-sorting and pins the accumulation order (bitwise
    reproducibility).  Every assembled matrix shares this one sparsity
    pattern, so sparse additions between them take the aligned fast path.
    """
    per_mesh = _geom_cache.setdefault(mesh, {})
    scatter = per_mesh.get("scatter")
    if scatter is None:
        rows = np.repeat(mesh.cells, 4, axis=1).ravel()
        cols = np.tile(mesh.cells, (1, 4)).ravel()
        order = np.lexsort((cols, rows))
        sorted_rows = rows[order]
        sorted_cols = cols[order]
        boundary = np.empty(order.size, dtype=bool)
        boundary[0] = True
        boundary[1:] = (np.diff(sorted_rows) != 0) | (np.diff(sorted_cols) != 0)
        seg_starts = np.flatnonzero(boundary)
        indices = sorted_cols[seg_starts]
        unique_rows = sorted_rows[seg_starts]
        indptr = np.zeros(mesh.n_dofs + 1, dtype=indices.dtype)
        np.add.at(indptr, unique_rows + 1, 1)
        np.cumsum(indptr, out=indptr)
        scatter = {"order": order, "seg_starts": seg_starts, "indices": indices, "indptr": indptr}
        per_mesh["scatter"] = scatter
    return scatter


def _geometry(mesh: PeriodicMesh, rule: TetRule) -> dict:
    """Per-(mesh, rule) precomputations shared by the quadrature assemblers."""
    per_mesh = _geom_cache.setdefault(mesh, {})
    geom = per_mesh.get(rule.name)
    if geom is None:
        quad_xyz = np.einsum("ql,clx->cqx", rule.points, mesh.cell_coords)
        geom = {
            "quad_xyz": np.ascontiguousarray(quad_xyz),
            "wdet": np.ascontiguousarray(np.outer(mesh.volumes, rule.weights)),
            "shape_vals": np.ascontiguousarray(rule.shape_values()),
        }
        per_mesh[rule.name] = geom
    return geom


def _to_csr(mesh: PeriodicMesh, values: np.ndarray) -> sp.csr_matrix:
    scatter = _scatter(mesh)
    data = np.add.reduceat(values.ravel()[scatter["order"]], scatter["seg_starts"])
    n = mesh.n_dofs
    mat = sp.csr_matrix((data, scatter["indices"], scatter["indptr"]), shape=(n, n))
    return mat


def assemble_mass(mesh: PeriodicMesh) -> sp.csr_matrix:
    """Mass matrix (phi_j, phi_i); exact closed-form P1 integration."""
    local = np.full((4, 4), 1.0 / 20.0)
    np.fill_diagonal(local, 2.0 / 20.0)
    values = mesh.volumes[:, np.newaxis, np.newaxis] * local
    return _to_csr(mesh, values)


def assemble_stiffness(mesh: PeriodicMesh) -> sp.csr_matrix:
    """Gradient matrix (grad phi_j, grad phi_i), exact for P1.

    Under periodic boundary conditions the surface flux term of the weak
    form cancels identically, so the volume term below is the whole
    diffusion operator.
    """
    values = np.einsum("c,cix,cjx->cij", mesh.volumes, mesh.grads, mesh.grads)
    return _to_csr(mesh, values)


def _eval_scalar(field, geom, t: float) -> np.ndarray:
    x, y, z = geom["quad_xyz"][..., 0], geom["quad_xyz"][..., 1], geom["quad_xyz"][..., 2]
    vals = np.broadcast_to(np.asarray(field(x, y, z, t), dtype=float), x.shape)
    return np.ascontiguousarray(vals)


def _eval_velocity(field, geom, t: float) -> np.ndarray:
    x, y, z = geom["quad_xyz"][..., 0], geom["quad_xyz"][..., 1], geom["quad_xyz"][..., 2]
    bx, by, bz = field(x, y, z, t)
    out = np.empty(x.shape + (3,))
    out[..., 0] = np.broadcast_to(np.asarray(bx, dtype=float), x.shape)
    out[..., 1] = np.broadcast_to(np.asarray(by, dtype=float), x.shape)
    out[..., 2] = np.broadcast_to(np.asarray(bz, dtype=float), x.shape)
    return out


def assemble_advection(
    mesh: PeriodicMesh, velocity, t: float, rule: TetRule = DEFAULT_RULE
) -> sp.csr_matrix:
    """Advection matrix with entries int (B . grad phi_j) phi_i dx at time t."""
    geom = _geometry(mesh, rule)
    b_quad = _eval_velocity(velocity, geom, t)
    values = _kernels.advection_local(
        geom["wdet"], geom["shape_vals"], np.ascontiguousarray(mesh.grads), b_quad
    )
    return _to_csr(mesh, values)


def assemble_reaction(
    mesh: PeriodicMesh, coefficient, t: float, rule: TetRule = DEFAULT_RULE
) -> sp.csr_matrix:
    """Reaction matrix with entries int c phi_j phi_i dx at time t."""
    geom = _geometry(mesh, rule)
    c_quad = _eval_scalar(coefficient, geom, t)
    values = _kernels.reaction_local(geom["wdet"], geom["shape_vals"], c_quad)
    return _to_csr(mesh, values)


def assemble_load(
    mesh: PeriodicMesh, forcing, t: float, rule: TetRule = DEFAULT_RULE
) -> np.ndarray:
    """Load vector with entries int f phi_i dx at time t (no timestep scaling)."""
    geom = _geometry(mesh, rule)
    f_quad = _eval_scalar(forcing, geom, t)
    values = _kernels.load_local(geom["wdet"], geom["shape_vals"], f_quad)
    out = np.zeros(mesh.n_dofs)
    np.add.at(out, mesh.cells.ravel(), values.ravel())
    return out


def compose_system(M, K, N, Rc, eps: float, dt: float) -> sp.csr_matrix:
    """Implicit Euler system matrix M + dt (eps K + N + Rc).

    `Rc` may be None when the reaction coefficient is absent.
    """
    shape = M.shape
    operands = [K, N] + ([Rc] if Rc is not None else [])
    for op in operands:
        if op.shape != shape:
            raise ValueError(f"operand shape {op.shape} does not match mass shape {shape}")
    acc = eps * K + N
    if Rc is not None:
        acc = acc + Rc
    return (M + dt * acc).tocsr()


def dump_matrix(mat, path: str) -> None:
    """Write a sparse matrix in `row col value` coordinate text format."""
    coo = mat.tocoo()
    with open(path, "w") as fh:
        fh.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r} {c} {float(v)!r}\n")
