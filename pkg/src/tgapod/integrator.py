"""Implicit Euler time stepping of the full finite element system.

Each step solves ``A^k u^k = dt b(t_k) + M u^{k-1}`` with
``A^k = M + dt (eps K + N(t_k) + Rc(t_k))``.  Mass and stiffness are
assembled once per mesh; the advection (and reaction, when present) blocks
are reassembled at every step because their coefficients depend on time.

Time bookkeeping is done in integer step indices so that two grids with
nested steps land on exactly the same floating-point times.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from tgapod.assembly import assemble_advection, assemble_load, assemble_mass, assemble_reaction, assemble_stiffness
from tgapod.mesh import PeriodicMesh
from tgapod.pod import SnapshotMatrix

# Largest system handed to the sparse direct factorization by default;
# bigger systems go through preconditioned GMRES.
DIRECT_DOF_LIMIT = 4096


class SolverError(RuntimeError):
    """Linear solve failed; carries the final relative residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (final relative residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class SolverConfig:
    method: str = "auto"  # auto | krylov | direct
    rel_tol: float = 1e-10
    max_iter: int = 200

    def __post_init__(self):
        if self.method not in ("auto", "krylov", "direct"):
            raise ValueError(f"unknown solver method {self.method!r}")
        if not 0.0 < self.rel_tol < 1.0:
            raise ValueError(f"rel_tol must lie in (0, 1), got {self.rel_tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be at least 1, got {self.max_iter}")


@dataclass
class StateVector:
    """FEM coefficient vector at one time instance."""

    coeffs: np.ndarray
    t: float


class SystemPieces(NamedTuple):
    """Time-dependent blocks of one implicit Euler step.

    ``load`` is already scaled by the timestep; ``advection``/``reaction``
    are None when the corresponding coefficient is absent.
    """

    advection: Optional[sp.csr_matrix]
    reaction: Optional[sp.csr_matrix]
    load: np.ndarray


def solve_linear(A: sp.spmatrix, rhs: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    """Solve A x = rhs to the configured relative residual, or raise."""
    n_rows, n_cols = A.shape
    if n_rows != n_cols or rhs.shape != (n_rows,):
        raise ValueError(f"shape mismatch: A is {A.shape}, rhs has {rhs.shape}")
    rhs_norm = np.linalg.norm(rhs)
    if rhs_norm == 0.0:
        return np.zeros(n_rows)

    method = cfg.method
    if method == "auto":
        method = "direct" if n_rows <= DIRECT_DOF_LIMIT else "krylov"

    if method == "direct":
        x = spla.spsolve(A.tocsc(), rhs)
    else:
        diag = A.diagonal()
        diag = np.where(diag != 0.0, diag, 1.0)
        precond = spla.LinearOperator(A.shape, matvec=lambda v: v / diag)
        x, _ = spla.gmres(
            A,
            rhs,
            rtol=cfg.rel_tol,
            atol=0.0,
            restart=min(50, n_rows),
            maxiter=cfg.max_iter,
            M=precond,
        )

    residual = np.linalg.norm(A @ x - rhs) / rhs_norm
    if not np.isfinite(residual) or residual > cfg.rel_tol:
        raise SolverError(f"{method} solve did not reach rel_tol={cfg.rel_tol}", residual)
    return x


class TransportOperators:
    """Cached implicit Euler algebra for one (mesh, problem, timestep).

    The mass matrix, stiffness matrix and the static combination
    ``M + dt eps K`` are assembled once; `pieces_at` supplies the
    time-dependent blocks for a given step time.
    """

    def __init__(self, mesh: PeriodicMesh, problem, dt: float, solver: SolverConfig | None = None):
        if dt <= 0:
            raise ValueError(f"timestep must be positive, got {dt}")
        self.mesh = mesh
        self.problem = problem
        self.dt = float(dt)
        self.solver = solver if solver is not None else SolverConfig()
        self.M = assemble_mass(mesh)
        self.K = assemble_stiffness(mesh)
        self.static = (self.M + (self.dt * problem.eps) * self.K).tocsr()

    @property
    def n_dofs(self) -> int:
        return self.mesh.n_dofs

    def pieces_at(self, t: float) -> SystemPieces:
        problem, mesh = self.problem, self.mesh
        advection = None
        if problem.velocity is not None:
            advection = assemble_advection(mesh, problem.velocity, t)
        reaction = None
        if problem.reaction is not None:
            reaction = assemble_reaction(mesh, problem.reaction, t)
        if problem.forcing is not None:
            load = self.dt * assemble_load(mesh, problem.forcing, t)
        else:
            load = np.zeros(mesh.n_dofs)
        return SystemPieces(advection, reaction, load)

    def full_matrix(self, pieces: SystemPieces) -> sp.csr_matrix:
        A = self.static
        if pieces.advection is not None:
            A = A + self.dt * pieces.advection
        if pieces.reaction is not None:
            A = A + self.dt * pieces.reaction
        return A

    def step_full(self, coeffs: np.ndarray, pieces: SystemPieces) -> np.ndarray:
        A = self.full_matrix(pieces)
        rhs = pieces.load + self.M @ coeffs
        return solve_linear(A, rhs, self.solver)


def initial_state(mesh: PeriodicMesh, problem) -> StateVector:
    """Nodal interpolant of the problem's initial condition at t = 0."""
    if problem.initial is None:
        coeffs = np.zeros(mesh.n_dofs)
    else:
        x, y, z = mesh.vertices.T
        coeffs = np.broadcast_to(np.asarray(problem.initial(x, y, z), dtype=float), x.shape).copy()
    return StateVector(coeffs, 0.0)


def fem_step(
    prev: StateVector,
    problem,
    mesh: PeriodicMesh,
    dt: float,
    cfg: SolverConfig | None = None,
    ops: TransportOperators | None = None,
) -> StateVector:
    """Advance one implicit Euler step from `prev`.

    Pass a prebuilt `ops` when stepping repeatedly; otherwise the
    time-invariant matrices are assembled on the fly.
    """
    t_k = prev.t + dt
    if t_k > problem.T + dt * 1e-9:
        raise ValueError(f"step to t={t_k} exceeds problem horizon T={problem.T}")
    if ops is None:
        ops = TransportOperators(mesh, problem, dt, cfg)
    coeffs = ops.step_full(prev.coeffs, ops.pieces_at(t_k))
    return StateVector(coeffs, t_k)


@dataclass
class FemTrajectory:
    """Dense record of a FEM run: states[:, k] is the solution at times[k]."""

    times: np.ndarray
    states: np.ndarray

    @property
    def n_steps(self) -> int:
        return self.times.size - 1

    def last_state(self) -> np.ndarray:
        return self.states[:, -1]


def _integral_ratio(num: float, den: float, what: str) -> int:
    ratio = num / den
    rounded = int(round(ratio))
    if rounded < 0 or abs(ratio - rounded) > 1e-9 * max(1.0, abs(ratio)):
        raise ValueError(f"{what}: {num} is not an integer multiple of {den}")
    return rounded


def run_fem(
    init: StateVector,
    interval: tuple[float, float],
    dt: float,
    snapshot_stride: int,
    *,
    ops: TransportOperators,
) -> tuple[FemTrajectory, SnapshotMatrix]:
    """Step the full system across `interval`, collecting periodic snapshots.

    Snapshots are the states at step offsets 0, stride, 2*stride, ... within
    the interval; the initial state is always the first column.
    """
    t_a, t_b = interval
    if abs(ops.dt - dt) > 1e-12 * max(1.0, dt):
        raise ValueError(f"dt={dt} does not match operator cache dt={ops.dt}")
    if snapshot_stride < 1:
        raise ValueError(f"snapshot stride must be >= 1, got {snapshot_stride}")
    if abs(init.t - t_a) > 1e-9 * max(1.0, abs(t_a)):
        raise ValueError(f"initial state at t={init.t} does not start interval {interval}")
    n_steps = _integral_ratio(t_b - t_a, dt, "interval/timestep alignment")

    states = np.empty((ops.n_dofs, n_steps + 1))
    states[:, 0] = init.coeffs
    times = t_a + dt * np.arange(n_steps + 1)
    coeffs = init.coeffs
    for k in range(1, n_steps + 1):
        coeffs = ops.step_full(coeffs, ops.pieces_at(times[k]))
        states[:, k] = coeffs

    snap_cols = np.arange(0, n_steps + 1, snapshot_stride)
    snapshots = SnapshotMatrix(states[:, snap_cols].copy(), times[snap_cols].copy())
    return FemTrajectory(times, states), snapshots
