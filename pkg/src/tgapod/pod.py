"""Snapshot SVD, mode selection, basis updates and reduced stepping.

The thin SVD reduces to a small dense factorization because the snapshot
count is far below the DOF count: a Householder QR of the snapshot matrix
followed by an SVD of its (cols x cols) triangular factor.  The cost is
O(n cols^2), the same class as the Gram-matrix route, but it stays accurate
for the fast-decaying spectra of parabolic snapshots, where a Gram
eigendecomposition cannot resolve singular values below sqrt(eps) of the
largest.  Singular values are kept when they exceed
``max(n, cols) * sigma_1 * 1e-12``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RANK_RTOL = 1e-12
_RECONSTRUCTION_RTOL = 1e-10


@dataclass
class SnapshotMatrix:
    """Ordered solution snapshots: data[:, j] was captured at times[j]."""

    data: np.ndarray
    times: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        self.times = np.asarray(self.times, dtype=float)
        if self.data.ndim != 2 or self.data.shape[1] < 1:
            raise ValueError("snapshot matrix needs at least one column")
        if self.times.shape != (self.data.shape[1],):
            raise ValueError("one capture time per snapshot column required")

    @property
    def n_columns(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True, eq=False)
class PodBasis:
    """Column-orthonormal mode matrix with the singular values behind it.

    `singular_values` keeps the full descending spectrum of the snapshot
    (or concatenation) matrix the modes were cut from, so its length is at
    least the mode count.
    """

    modes: np.ndarray
    singular_values: np.ndarray

    def __post_init__(self):
        modes = self.modes
        if modes.ndim != 2 or modes.shape[1] < 1:
            raise ValueError("basis needs at least one mode column")
        gram_defect = np.abs(modes.T @ modes - np.eye(modes.shape[1])).max()
        if gram_defect > 1e-10:
            raise ValueError(f"modes are not orthonormal (defect {gram_defect:.2e})")
        sv = self.singular_values
        if sv.size < modes.shape[1]:
            raise ValueError("fewer singular values than modes")
        if np.any(sv <= 0) or np.any(np.diff(sv) > 0):
            raise ValueError("singular values must be positive and non-increasing")

    @property
    def n(self) -> int:
        return self.modes.shape[0]

    @property
    def m(self) -> int:
        return self.modes.shape[1]

    def dump(self, path: str) -> None:
        """Header `n m`, then the mode entries column-major, one per line."""
        with open(path, "w") as fh:
            fh.write(f"{self.n} {self.m}\n")
            for value in self.modes.ravel(order="F"):
                fh.write(f"{float(value)!r}\n")

    @classmethod
    def load(cls, path: str) -> "PodBasis":
        with open(path) as fh:
            n, m = (int(tok) for tok in fh.readline().split())
            entries = np.array([float(line) for line in fh])
        modes = entries.reshape((n, m), order="F")
        sv = np.linalg.svd(modes, compute_uv=False)
        return cls(modes, sv)


@dataclass(frozen=True)
class ReducedSystem:
    """Dense m x m projection of one implicit Euler step."""

    matrix: np.ndarray
    rhs_load: np.ndarray
    mass: np.ndarray
    basis: PodBasis


def _as_array(snapshots) -> np.ndarray:
    if isinstance(snapshots, SnapshotMatrix):
        return snapshots.data
    arr = np.asarray(snapshots, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, np.newaxis]
    return arr


def thin_svd(snapshots) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD ``U = R diag(S) V^T`` through a small dense factorization.

    Returns column-orthonormal ``R`` (n x r), descending positive ``S`` and
    column-orthonormal ``V``; an all-zero input yields rank 0 and empty
    factors.
    """
    U = _as_array(snapshots)
    n, cols = U.shape
    Q, tri = np.linalg.qr(U)
    left_small, sigma, vt = np.linalg.svd(tri, full_matrices=False)

    if sigma.size == 0 or sigma[0] == 0.0:
        return np.zeros((n, 0)), np.zeros(0), np.zeros((cols, 0))

    # Guard the factorization itself (before the rank cutoff): the cutoff
    # may legitimately discard a tail above this tolerance, but the full
    # factorization must always reproduce the input.
    full_defect = np.linalg.norm(U - Q @ (left_small * sigma) @ vt)
    if full_defect > _RECONSTRUCTION_RTOL * np.linalg.norm(U):
        raise RuntimeError(f"thin SVD reconstruction failed ({full_defect:.2e})")

    rank = int(np.count_nonzero(sigma > max(n, cols) * sigma[0] * RANK_RTOL))
    sigma = np.ascontiguousarray(sigma[:rank])
    V = np.ascontiguousarray(vt[:rank].T)
    R = Q @ left_small[:, :rank]

    # Canonical sign: largest-magnitude component of each right vector is
    # positive, so results do not depend on LAPACK's sign choices; modes
    # flip along with their right vectors to keep the product intact.
    peak = np.argmax(np.abs(V), axis=0)
    flip = V[peak, np.arange(rank)] < 0
    V[:, flip] *= -1.0
    R[:, flip] *= -1.0
    return R, sigma, V


def select_mode_count(singular_values: np.ndarray, gamma: float) -> int:
    """Smallest m whose leading singular-value sum strictly exceeds
    gamma times the total sum."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"energy fraction must lie in (0, 1), got {gamma}")
    sv = np.asarray(singular_values, dtype=float)
    if sv.size == 0:
        return 0
    cum = np.cumsum(sv)
    above = cum > gamma * cum[-1]
    if not above.any():
        return sv.size
    return int(np.argmax(above)) + 1


def pod_mode(snapshots, gamma: float) -> PodBasis:
    """Build a basis from snapshots: thin SVD plus energy truncation."""
    R, S, _ = thin_svd(snapshots)
    if S.size == 0:
        raise ValueError("cannot build a basis from all-zero snapshots")
    m = select_mode_count(S, gamma)
    return PodBasis(np.ascontiguousarray(R[:, :m]), S)


def update_pod_mode(window_snapshots, gamma2: float, gamma3: float, old: PodBasis) -> PodBasis:
    """Refresh a basis with snapshots from an update window.

    The window snapshots are truncated at energy `gamma2`, the surviving
    directions are concatenated (unweighted) with the old modes, and the
    concatenation is truncated again at energy `gamma3`.
    """
    W1 = _as_array(window_snapshots)
    if W1.shape[0] != old.n:
        raise ValueError(f"snapshot length {W1.shape[0]} does not match basis length {old.n}")
    R1, S1, _ = thin_svd(W1)
    if S1.size == 0:
        raise ValueError("cannot update a basis from all-zero snapshots")
    m1 = select_mode_count(S1, gamma2)
    combined = np.hstack([R1[:, :m1], old.modes])
    R2, S2, _ = thin_svd(combined)
    m2 = select_mode_count(S2, gamma3)
    return PodBasis(np.ascontiguousarray(R2[:, :m2]), S2)


def reduce_system(A, rhs_load: np.ndarray, C, basis: PodBasis) -> ReducedSystem:
    """Galerkin projection of one full-order step onto the basis.

    Computed as sparse-times-dense followed by dense transposed products,
    costing O(nnz m + n m^2).
    """
    R = basis.modes
    n = basis.n
    if A.shape != (n, n) or C.shape != (n, n) or rhs_load.shape != (n,):
        raise ValueError(
            f"operator shapes {A.shape}/{C.shape}/{rhs_load.shape} do not match basis length {n}"
        )
    reduced_a = R.T @ (A @ R)
    reduced_c = R.T @ (C @ R)
    reduced_b = R.T @ rhs_load
    return ReducedSystem(reduced_a, reduced_b, reduced_c, basis)


def pod_step(prev_reduced: np.ndarray, reduced: ReducedSystem) -> np.ndarray:
    """One reduced implicit Euler step by dense elimination."""
    rhs = reduced.rhs_load + reduced.mass @ prev_reduced
    try:
        return np.linalg.solve(reduced.matrix, rhs)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError("reduced system matrix is singular") from exc


def restrict(basis: PodBasis, u: np.ndarray) -> np.ndarray:
    """Orthogonal projection coefficients of a full-order vector."""
    if u.shape != (basis.n,):
        raise ValueError(f"vector shape {u.shape} does not match basis length {basis.n}")
    return basis.modes.T @ u


def lift(basis: PodBasis, u_reduced: np.ndarray) -> np.ndarray:
    """Full-order representative of reduced coefficients."""
    if u_reduced.shape != (basis.m,):
        raise ValueError(f"vector shape {u_reduced.shape} does not match mode count {basis.m}")
    return basis.modes @ u_reduced
