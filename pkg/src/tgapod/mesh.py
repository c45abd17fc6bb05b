"""Structured periodic tetrahedral meshes of the cube [0, L]^3.

Each cube cell of an n x n x n grid is split into six tetrahedra along the
main diagonal (Kuhn subdivision), so refinement is controlled by the single
integer n.  Periodicity is handled purely through the global vertex
numbering: opposite faces share degrees of freedom, no ghost nodes exist.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Orders in which the unit steps ex, ey, ez are taken from a cube corner to
# the opposite corner; each order yields one tetrahedron of the subdivision.
_KUHN_PERMS = ((0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0))


@dataclass(frozen=True, eq=False)
class PeriodicMesh:
    """Periodic Kuhn-subdivided tetrahedral mesh.

    Attributes
    ----------
    L : float
        Edge length of the periodic cube.
    n : int
        Cells per axis; the mesh has ``n**3`` unique vertices and
        ``6 * n**3`` tetrahedra.
    vertices : (n**3, 3) float array
        Coordinates of the unique periodic vertices, all in ``[0, L)``.
    cells : (6 n**3, 4) int array
        Global (wrapped) vertex indices of each tetrahedron.
    cell_coords : (6 n**3, 4, 3) float array
        Unwrapped physical vertex coordinates of each tetrahedron; boundary
        cells reach the coordinate ``L`` here even though their DOF wraps
        to 0.
    volumes : (6 n**3,) float array
        Positive signed volumes.
    grads : (6 n**3, 4, 3) float array
        Constant gradients of the four linear basis functions on each cell.
    h : float
        Mesh diameter (largest cell diameter).
    """

    L: float
    n: int
    vertices: np.ndarray
    cells: np.ndarray
    cell_coords: np.ndarray
    volumes: np.ndarray
    grads: np.ndarray
    h: float

    @property
    def n_dofs(self) -> int:
        return self.n**3

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    def vertex_index(self, i: int, j: int, k: int) -> int:
        """Global DOF of lattice site (i, j, k), wrapping each axis mod n."""
        n = self.n
        return ((i % n) * n + (j % n)) * n + (k % n)


def build_periodic_mesh(L: float, n: int) -> PeriodicMesh:
    """Build the periodic Kuhn mesh of [0, L]^3 with n cells per axis.

    Parameters
    ----------
    L : float
        Domain edge length, must be positive.
    n : int
        Cells per axis, must be at least 2 (below that the periodic
        identification degenerates: a cell would touch itself).
    """
    if L <= 0:
        raise ValueError(f"domain length must be positive, got L={L}")
    if n < 2:
        raise ValueError(f"need at least 2 cells per axis, got n={n}")

    spacing = L / n
    idx = np.arange(n)
    ii, jj, kk = np.meshgrid(idx, idx, idx, indexing="ij")
    vertices = np.stack([ii, jj, kk], axis=-1).reshape(-1, 3) * spacing

    corner_offsets = []
    for perm in _KUHN_PERMS:
        s = np.zeros(3, dtype=np.int64)
        path = [s.copy()]
        for axis in perm:
            s[axis] += 1
            path.append(s.copy())
        tet = np.array(path)
        if _perm_sign(perm) < 0:
            tet[[2, 3]] = tet[[3, 2]]  # restore positive orientation
        corner_offsets.append(tet)
    corner_offsets = np.array(corner_offsets)  # (6, 4, 3)

    base = np.stack([ii, jj, kk], axis=-1).reshape(-1, 1, 1, 3)
    lattice = base + corner_offsets[np.newaxis]  # (n^3, 6, 4, 3)
    lattice = lattice.reshape(-1, 4, 3)

    cell_coords = lattice * spacing
    wrapped = lattice % n
    cells = (wrapped[..., 0] * n + wrapped[..., 1]) * n + wrapped[..., 2]

    volumes, grads = _cell_geometry(cell_coords)
    if np.any(volumes <= 0):
        raise AssertionError("non-positive tetrahedron volume in Kuhn subdivision")

    return PeriodicMesh(
        L=float(L),
        n=int(n),
        vertices=vertices,
        cells=cells.astype(np.int64),
        cell_coords=cell_coords,
        volumes=volumes,
        grads=grads,
        h=float(spacing * np.sqrt(3.0)),
    )


def _perm_sign(perm: tuple[int, int, int]) -> int:
    inversions = sum(
        1 for a in range(3) for b in range(a + 1, 3) if perm[a] > perm[b]
    )
    return -1 if inversions % 2 else 1


def _cell_geometry(cell_coords: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Signed volumes and P1 basis gradients for all cells at once."""
    v0 = cell_coords[:, 0]
    edges = cell_coords[:, 1:] - v0[:, np.newaxis]  # (nc, 3, 3), rows are edges
    det = np.linalg.det(edges)
    volumes = det / 6.0

    # Reference gradients of (1-x-y-z, x, y, z); physical grads via J^{-T}.
    # The edge-per-row matrix above is J^T, so J^{-T} is its plain inverse.
    ref_grads = np.array(
        [[-1.0, -1.0, -1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
    )
    inv_jt = np.linalg.inv(edges)
    grads = np.einsum("cxy,iy->cix", inv_jt, ref_grads)
    return volumes, grads


def dump_mesh(mesh: PeriodicMesh, path: str) -> None:
    """Write vertices then cell connectivity as plain text (debug aid)."""
    with open(path, "w") as fh:
        for x, y, z in mesh.vertices:
            fh.write(f"{float(x)!r} {float(y)!r} {float(z)!r}\n")
        for a, b, c, d in mesh.cells:
            fh.write(f"{a} {b} {c} {d}\n")
