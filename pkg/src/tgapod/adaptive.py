"""Error indicators, marking, and the reduced-order time-stepping drivers.

Three drivers share one reduced-stepping engine and differ only in when
they refresh the basis:

* ``run_pod``            -- never: warm-up snapshots fix the basis for good.
* ``run_apod_residual``  -- when the full-order residual of the reduced
  step, relative to its right-hand side, exceeds the threshold; the
  triggering step is rolled back and recomputed by FEM.
* ``run_tg_apod``        -- update instants are decided in advance by a
  cheap companion run on a coarse space/time grid, where the reduced state
  is compared against the coarse FEM state directly.

On every update the driver runs full FEM across a window, refreshes the
basis from the window snapshots, adopts the FEM states as the trajectory
over the window, and re-enters reduced stepping from the projection of the
final window state.  All time bookkeeping is in integer step indices so
that coarse-grid instants land exactly on fine-grid steps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from tgapod.integrator import (
    FemTrajectory,
    SolverConfig,
    StateVector,
    TransportOperators,
    initial_state,
    run_fem,
)
from tgapod.mesh import PeriodicMesh, build_periodic_mesh
from tgapod.pod import (
    PodBasis,
    ReducedSystem,
    SnapshotMatrix,
    lift,
    pod_mode,
    pod_step,
    restrict,
    update_pod_mode,
)

TRACE_HEADER = "step,time,indicator,error,marked,m"


def _check_integral(num: float, den: float, what: str) -> int:
    ratio = num / den
    rounded = int(round(ratio))
    if rounded < 0 or abs(ratio - rounded) > 1e-9 * max(1.0, abs(ratio)):
        raise ValueError(f"{what}: {num} is not an integer multiple of {den}")
    return rounded


@dataclass(frozen=True)
class AdaptiveParams:
    """Knobs shared by all drivers.

    `T0` is the warm-up horizon, `dT` the update-window length, `dM` the
    snapshot stride in steps, `dt` the timestep and `T` the final time.
    The energy fractions select mode counts (warm-up / window / merge) and
    `eta0` is the marking threshold.
    """

    T0: float
    dT: float
    dM: int
    dt: float
    T: float
    gamma1: float = 0.999
    gamma2: float = 0.999
    gamma3: float = 1.0 - 1.0e-8
    eta0: float = 0.005

    def __post_init__(self):
        for label, value in (("T0", self.T0), ("dT", self.dT), ("dt", self.dt), ("T", self.T)):
            if value <= 0:
                raise ValueError(f"{label} must be positive, got {value}")
        if self.dM < 1:
            raise ValueError(f"snapshot stride dM must be >= 1, got {self.dM}")
        for label, value in (("gamma1", self.gamma1), ("gamma2", self.gamma2), ("gamma3", self.gamma3)):
            if not 0.0 < value < 1.0:
                raise ValueError(f"{label} must lie in (0, 1), got {value}")
        if self.eta0 <= 0:
            raise ValueError(f"threshold eta0 must be positive, got {self.eta0}")
        if self.T0 >= self.T:
            raise ValueError(f"warm-up horizon T0={self.T0} must be below T={self.T}")
        _check_integral(self.T0, self.dt, "T0/dt alignment")
        _check_integral(self.dT, self.dt, "dT/dt alignment")
        _check_integral(self.T, self.dt, "T/dt alignment")

    @property
    def n_total(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def n_warmup(self) -> int:
        return int(round(self.T0 / self.dt))

    @property
    def window_steps(self) -> int:
        return int(round(self.dT / self.dt))


@dataclass(frozen=True)
class TwoGridParams:
    """Coarse companion grid: n_coarse cells per axis, timestep dt_coarse."""

    n_coarse: int
    dt_coarse: float

    def __post_init__(self):
        if self.n_coarse < 2:
            raise ValueError(f"coarse mesh needs n >= 2, got {self.n_coarse}")
        if self.dt_coarse <= 0:
            raise ValueError(f"coarse timestep must be positive, got {self.dt_coarse}")

    def validate_with(self, fine_n: int, params: AdaptiveParams) -> int:
        """Check the alignment contract against the fine grid; returns the
        step ratio dt_coarse / dt."""
        m1 = _check_integral(self.dt_coarse, params.dt, "coarse/fine timestep alignment")
        if m1 < 1:
            raise ValueError(f"coarse step {self.dt_coarse} is below fine step {params.dt}")
        if self.n_coarse >= fine_n:
            raise ValueError(
                f"coarse mesh (n={self.n_coarse}) must be coarser than the fine mesh (n={fine_n})"
            )
        _check_integral(params.T0, self.dt_coarse, "T0/coarse-step alignment")
        _check_integral(params.dT, self.dt_coarse, "dT/coarse-step alignment")
        _check_integral(params.T, self.dt_coarse, "T/coarse-step alignment")
        return m1

    def step_ratio(self, params: AdaptiveParams) -> int:
        return _check_integral(self.dt_coarse, params.dt, "coarse/fine timestep alignment")

    def mesh_ratio(self, fine_n: int) -> float:
        """H / h for the companion grid (need not be an integer)."""
        return fine_n / self.n_coarse


@dataclass(frozen=True)
class MarkedSet:
    """Times at which the coarse phase requested a basis update.

    Stored as coarse step indices so fine-grid membership tests are exact
    integer comparisons.
    """

    coarse_indices: tuple[int, ...]
    dt_coarse: float

    def __post_init__(self):
        idx = self.coarse_indices
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("marked indices must be strictly increasing")
        if idx and idx[0] < 0:
            raise ValueError("marked indices must be non-negative")

    @property
    def times(self) -> np.ndarray:
        return np.asarray(self.coarse_indices, dtype=float) * self.dt_coarse

    def fine_steps(self, m1: int) -> frozenset[int]:
        return frozenset(i * m1 for i in self.coarse_indices)

    def write(self, path: str) -> None:
        with open(path, "w") as fh:
            for t in self.times:
                fh.write(f"{float(t)!r}\n")

    def __len__(self) -> int:
        return len(self.coarse_indices)


@dataclass
class ErrorTrace:
    """Per-step run record: indicator value, error vs reference, marking
    flag and the active mode count."""

    steps: np.ndarray
    times: np.ndarray
    indicators: np.ndarray
    errors: np.ndarray
    marked: np.ndarray
    modes: np.ndarray

    def __post_init__(self):
        sizes = {arr.shape for arr in (self.steps, self.times, self.indicators, self.errors, self.marked, self.modes)}
        if len(sizes) != 1:
            raise ValueError("trace columns must share one length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trace times must be strictly increasing")

    def __len__(self) -> int:
        return self.steps.size

    def average_error(self) -> float:
        return float(np.mean(self.errors))

    def n_updates(self) -> int:
        return int(self.marked.sum())

    def max_modes(self) -> int:
        return int(self.modes.max())

    def write_csv(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write(TRACE_HEADER + "\n")
            for k, t, eta, err, flag, m in zip(
                self.steps, self.times, self.indicators, self.errors, self.marked, self.modes
            ):
                fh.write(f"{k},{float(t)!r},{float(eta)!r},{float(err)!r},{flag},{m}\n")

    @classmethod
    def read_csv(cls, path: str) -> "ErrorTrace":
        with open(path) as fh:
            header = fh.readline().strip()
            if header != TRACE_HEADER:
                raise ValueError(f"unexpected trace header {header!r}")
            rows = [line.strip().split(",") for line in fh if line.strip()]
        cols = list(zip(*rows)) if rows else [[]] * 6
        return cls(
            steps=np.array([int(v) for v in cols[0]]),
            times=np.array([float(v) for v in cols[1]]),
            indicators=np.array([float(v) for v in cols[2]]),
            errors=np.array([float(v) for v in cols[3]]),
            marked=np.array([int(v) for v in cols[4]]),
            modes=np.array([int(v) for v in cols[5]]),
        )


class _TraceRows:
    def __init__(self):
        self.rows: list[tuple] = []

    def append(self, step: int, time: float, indicator: float, error: float, marked: int, m: int):
        self.rows.append((step, time, indicator, error, marked, m))

    def build(self) -> ErrorTrace:
        cols = list(zip(*self.rows))
        return ErrorTrace(
            steps=np.array(cols[0], dtype=int),
            times=np.array(cols[1], dtype=float),
            indicators=np.array(cols[2], dtype=float),
            errors=np.array(cols[3], dtype=float),
            marked=np.array(cols[4], dtype=int),
            modes=np.array(cols[5], dtype=int),
        )


def residual_indicator(
    A, rhs_load: np.ndarray, C, basis: PodBasis, u_red_k: np.ndarray, u_red_prev: np.ndarray
) -> float:
    """Full-order residual of a reduced step, relative to its right-hand side.

    `rhs_load` is the timestep-scaled load vector, matching the step system
    ``A u^k = rhs_load + C u^{k-1}``.
    """
    lifted_prev = lift(basis, u_red_prev)
    carried = C @ lifted_prev
    rhs = rhs_load + carried
    rhs_norm = np.linalg.norm(rhs)
    if rhs_norm == 0.0:
        raise ValueError("degenerate step: zero right-hand side in residual indicator")
    resid = A @ lift(basis, u_red_k) - rhs_load - carried
    return float(np.linalg.norm(resid) / rhs_norm)


def coarse_indicator(u_fem: np.ndarray, u_pod_lifted: np.ndarray) -> float:
    """Relative distance of the lifted reduced state from the FEM state."""
    nrm = np.linalg.norm(u_fem)
    if nrm == 0.0:
        raise ValueError("degenerate step: zero-norm reference state in coarse indicator")
    return float(np.linalg.norm(u_fem - u_pod_lifted) / nrm)


def mark(eta: float, eta0: float) -> int:
    """1 when the indicator strictly exceeds the threshold, else 0."""
    return 1 if eta > eta0 else 0


def rethreshold(trace: ErrorTrace, eta0: float) -> tuple[int, ...]:
    """Steps of a stored trace whose indicator exceeds a (new) threshold."""
    return tuple(int(k) for k, eta in zip(trace.steps, trace.indicators) if mark(eta, eta0))


def _relative_state_error(ref_col: np.ndarray, approx_col: np.ndarray) -> float:
    nrm = np.linalg.norm(ref_col)
    diff = np.linalg.norm(ref_col - approx_col)
    if nrm == 0.0:
        return 0.0 if diff == 0.0 else np.inf
    return float(diff / nrm)


def relative_error_trace(reference, approx) -> tuple[np.ndarray, float]:
    """Columnwise relative errors of a trajectory pair, plus their mean."""
    ref = reference.states if isinstance(reference, FemTrajectory) else np.asarray(reference, dtype=float)
    app = approx.states if isinstance(approx, FemTrajectory) else np.asarray(approx, dtype=float)
    if ref.shape != app.shape:
        raise ValueError(f"trajectory shapes differ: {ref.shape} vs {app.shape}")
    errors = np.array(
        [_relative_state_error(ref[:, k], app[:, k]) for k in range(ref.shape[1])]
    )
    return errors, float(np.mean(errors))


class ReducedStepper:
    """Reduced implicit Euler stepping against a (replaceable) basis.

    Projections of the time-invariant operators are cached per basis; the
    advection block is projected anew at every step.
    """

    def __init__(self, ops: TransportOperators, basis: PodBasis):
        self.ops = ops
        self.set_basis(basis)

    def set_basis(self, basis: PodBasis) -> None:
        if basis.n != self.ops.n_dofs:
            raise ValueError(f"basis length {basis.n} does not match system size {self.ops.n_dofs}")
        modes = basis.modes
        self.basis = basis
        self._static_red = modes.T @ (self.ops.static @ modes)
        self._mass_red = modes.T @ (self.ops.M @ modes)

    def reduced_system(self, pieces) -> ReducedSystem:
        modes = self.basis.modes
        dt = self.ops.dt
        reduced_a = self._static_red
        if pieces.advection is not None:
            reduced_a = reduced_a + dt * (modes.T @ (pieces.advection @ modes))
        if pieces.reaction is not None:
            reduced_a = reduced_a + dt * (modes.T @ (pieces.reaction @ modes))
        reduced_b = modes.T @ pieces.load
        return ReducedSystem(reduced_a, reduced_b, self._mass_red, self.basis)

    def step(self, u_red: np.ndarray, pieces) -> np.ndarray:
        return pod_step(u_red, self.reduced_system(pieces))


class _NeverUpdate:
    """Plain POD: no indicator, no updates."""

    rollback = False

    def indicator(self, ops, stepper, pieces, u_prev, u_new) -> float:
        return 0.0

    def wants_update(self, k: int, eta: float) -> bool:
        return False

    def marks_step(self, k: int) -> bool:
        return False


class _ResidualUpdate(_NeverUpdate):
    """Residual-indicator policy: roll the triggering step back."""

    rollback = True

    def __init__(self, eta0: float):
        self.eta0 = eta0

    def indicator(self, ops, stepper, pieces, u_prev, u_new) -> float:
        A = ops.full_matrix(pieces)
        return residual_indicator(A, pieces.load, ops.M, stepper.basis, u_new, u_prev)

    def wants_update(self, k: int, eta: float) -> bool:
        return bool(mark(eta, self.eta0))


class _MarkedUpdate(_NeverUpdate):
    """Two-grid policy: update at precomputed fine steps, keeping the
    reduced step at the marked instant as the window's starting state."""

    rollback = False

    def __init__(self, fine_steps: frozenset[int]):
        self.fine_steps = fine_steps

    def wants_update(self, k: int, eta: float) -> bool:
        return k in self.fine_steps

    def marks_step(self, k: int) -> bool:
        return k in self.fine_steps


def _ensure_reference(ops: TransportOperators, params: AdaptiveParams, reference) -> FemTrajectory:
    if reference is None:
        init = initial_state(ops.mesh, ops.problem)
        reference, _ = run_fem(init, (0.0, params.T), params.dt, params.dM, ops=ops)
    if reference.states.shape != (ops.n_dofs, params.n_total + 1):
        raise ValueError(
            f"reference trajectory shape {reference.states.shape} does not match "
            f"({ops.n_dofs}, {params.n_total + 1})"
        )
    return reference


def _drive_reduced(
    ops: TransportOperators,
    params: AdaptiveParams,
    reference: FemTrajectory,
    policy,
    basis: Optional[PodBasis] = None,
) -> tuple[ErrorTrace, int]:
    """Shared warm-up / reduced-stepping / update-window loop."""
    dt = params.dt
    n_total, n_warm = params.n_total, params.n_warmup
    times = dt * np.arange(n_total + 1)
    rows = _TraceRows()

    init = initial_state(ops.mesh, ops.problem)
    warm_traj, warm_snaps = run_fem(init, (0.0, params.T0), dt, params.dM, ops=ops)
    if basis is None:
        basis = pod_mode(warm_snaps, params.gamma1)
    stepper = ReducedStepper(ops, basis)

    for k in range(n_warm + 1):
        err = _relative_state_error(reference.states[:, k], warm_traj.states[:, k])
        rows.append(k, times[k], 0.0, err, 0, 0)

    def run_window(start_k: int, start_state: np.ndarray):
        """FEM across [start_k, start_k + window] (truncated at the horizon),
        basis refresh from the window snapshots, trajectory adoption."""
        end_k = min(start_k + params.window_steps, n_total)
        window_init = StateVector(start_state, times[start_k])
        traj, snaps = run_fem(window_init, (times[start_k], times[end_k]), dt, params.dM, ops=ops)
        new_basis = update_pod_mode(snaps, params.gamma2, params.gamma3, stepper.basis)
        stepper.set_basis(new_basis)
        return end_k, traj

    k = n_warm
    u_red = restrict(stepper.basis, warm_traj.last_state())
    current_full = warm_traj.last_state()
    n_updates = 0

    def boundary_windows(k: int, current_full: np.ndarray):
        """Marks sitting exactly on the warm-up end or on a window end are
        processed immediately, starting from the full state at hand."""
        nonlocal n_updates
        while policy.marks_step(k) and k < n_total:
            end_k, traj = run_window(k, current_full)
            n_updates += 1
            for kk in range(k + 1, end_k + 1):
                err = _relative_state_error(reference.states[:, kk], traj.states[:, kk - k])
                rows.append(kk, times[kk], 0.0, err, 0, stepper.basis.m)
            current_full = traj.last_state()
            k = end_k
        return k, restrict(stepper.basis, current_full), current_full

    k, u_red, current_full = boundary_windows(k, current_full)

    while k < n_total:
        k += 1
        pieces = ops.pieces_at(times[k])
        u_new = stepper.step(u_red, pieces)
        eta = policy.indicator(ops, stepper, pieces, u_red, u_new)
        if not policy.wants_update(k, eta):
            err = _relative_state_error(reference.states[:, k], lift(stepper.basis, u_new))
            rows.append(k, times[k], eta, err, 0, stepper.basis.m)
            u_red = u_new
            continue

        n_updates += 1
        old_m = stepper.basis.m
        if policy.rollback:
            # Discard the triggering step; restart FEM one step earlier.
            start_k = k - 1
            start_state = lift(stepper.basis, u_red)
        else:
            start_k = k
            start_state = lift(stepper.basis, u_new)
            err = _relative_state_error(reference.states[:, k], start_state)
            rows.append(k, times[k], eta, err, 1, old_m)
        end_k, traj = run_window(start_k, start_state)
        for kk in range(start_k + 1, end_k + 1):
            state = traj.states[:, kk - start_k]
            err = _relative_state_error(reference.states[:, kk], state)
            if policy.rollback and kk == k:
                rows.append(kk, times[kk], eta, err, 1, old_m)
            else:
                rows.append(kk, times[kk], 0.0, err, 0, stepper.basis.m)
        k, u_red, _ = boundary_windows(end_k, traj.last_state())

    return rows.build(), n_updates


def run_pod(
    problem,
    mesh: PeriodicMesh,
    params: AdaptiveParams,
    *,
    solver: SolverConfig | None = None,
    reference: FemTrajectory | None = None,
    basis: PodBasis | None = None,
) -> ErrorTrace:
    """Warm-up FEM, one basis, reduced stepping to the horizon; no updates.

    `basis` overrides the warm-up construction (used by equivalence tests);
    `reference` supplies a precomputed fine FEM trajectory for the error
    column, otherwise it is computed here.
    """
    ops = TransportOperators(mesh, problem, params.dt, solver)
    reference = _ensure_reference(ops, params, reference)
    trace, _ = _drive_reduced(ops, params, reference, _NeverUpdate(), basis=basis)
    return trace


def run_apod_residual(
    problem,
    mesh: PeriodicMesh,
    params: AdaptiveParams,
    *,
    solver: SolverConfig | None = None,
    reference: FemTrajectory | None = None,
) -> ErrorTrace:
    """Adaptive POD guarded by the full-order residual indicator."""
    ops = TransportOperators(mesh, problem, params.dt, solver)
    reference = _ensure_reference(ops, params, reference)
    trace, _ = _drive_reduced(ops, params, reference, _ResidualUpdate(params.eta0))
    return trace


@dataclass
class CoarsePhaseResult:
    """Everything the coarse companion run produced.

    `pod_states` holds, per coarse step, the lifted reduced state the
    indicator was evaluated against (FEM states stand in over warm-up and
    update windows, where no reduced step runs).
    """

    marked: MarkedSet
    trace: ErrorTrace
    fem: FemTrajectory
    pod_states: np.ndarray
    n_updates: int


@dataclass
class TgApodResult:
    """Fine-grid trace plus the coarse phase that scheduled its updates."""

    trace: ErrorTrace
    marked: MarkedSet
    coarse: CoarsePhaseResult
    n_updates: int


def run_coarse_phase(
    problem,
    coarse_mesh: PeriodicMesh,
    params: AdaptiveParams,
    *,
    solver: SolverConfig | None = None,
    basis: PodBasis | None = None,
) -> CoarsePhaseResult:
    """Coarse companion run: FEM and reduced trajectories side by side,
    marking every instant whose relative gap exceeds the threshold.

    `params.dt` must already be the coarse timestep.  The coarse FEM
    trajectory is computed once up front (it is needed at every step by the
    indicator); update windows reuse its states as snapshots.
    """
    ops = TransportOperators(coarse_mesh, problem, params.dt, solver)
    dt = params.dt
    n_total, n_warm = params.n_total, params.n_warmup
    init = initial_state(coarse_mesh, problem)
    fem_traj, _ = run_fem(init, (0.0, params.T), dt, params.dM, ops=ops)
    times = fem_traj.times

    if basis is None:
        warm_cols = np.arange(0, n_warm + 1, params.dM)
        warm_snaps = SnapshotMatrix(fem_traj.states[:, warm_cols].copy(), times[warm_cols].copy())
        basis = pod_mode(warm_snaps, params.gamma1)
    stepper = ReducedStepper(ops, basis)

    rows = _TraceRows()
    pod_states = np.empty_like(fem_traj.states)
    pod_states[:, : n_warm + 1] = fem_traj.states[:, : n_warm + 1]
    for k in range(n_warm + 1):
        rows.append(k, times[k], 0.0, 0.0, 0, 0)

    marked: list[int] = []
    n_updates = 0
    u_red = restrict(basis, fem_traj.states[:, n_warm])
    k = n_warm
    while k < n_total:
        k += 1
        pieces = ops.pieces_at(times[k])
        u_new = stepper.step(u_red, pieces)
        lifted = lift(stepper.basis, u_new)
        pod_states[:, k] = lifted
        eta = coarse_indicator(fem_traj.states[:, k], lifted)
        if not mark(eta, params.eta0):
            rows.append(k, times[k], eta, eta, 0, stepper.basis.m)
            u_red = u_new
            continue

        # Mark the stepped-back instant; refresh the basis from the window
        # of (already computed) coarse FEM states and adopt them.
        rows.append(k, times[k], eta, 0.0, 1, stepper.basis.m)
        start_k = k - 1
        marked.append(start_k)
        n_updates += 1
        end_k = min(start_k + params.window_steps, n_total)
        snap_cols = np.arange(start_k, end_k + 1, params.dM)
        snaps = SnapshotMatrix(fem_traj.states[:, snap_cols].copy(), times[snap_cols].copy())
        new_basis = update_pod_mode(snaps, params.gamma2, params.gamma3, stepper.basis)
        stepper.set_basis(new_basis)
        for kk in range(k + 1, end_k + 1):
            pod_states[:, kk] = fem_traj.states[:, kk]
            rows.append(kk, times[kk], 0.0, 0.0, 0, new_basis.m)
        u_red = restrict(new_basis, fem_traj.states[:, end_k])
        k = end_k

    return CoarsePhaseResult(
        marked=MarkedSet(tuple(marked), dt),
        trace=rows.build(),
        fem=fem_traj,
        pod_states=pod_states,
        n_updates=n_updates,
    )


def run_tg_apod(
    problem,
    mesh: PeriodicMesh,
    two_grid: TwoGridParams,
    params: AdaptiveParams,
    *,
    solver: SolverConfig | None = None,
    reference: FemTrajectory | None = None,
) -> TgApodResult:
    """Two-grid adaptive POD: a coarse run schedules the fine-grid updates."""
    m1 = two_grid.validate_with(mesh.n, params)
    coarse_params = AdaptiveParams(
        T0=params.T0,
        dT=params.dT,
        dM=params.dM,
        dt=two_grid.dt_coarse,
        T=params.T,
        gamma1=params.gamma1,
        gamma2=params.gamma2,
        gamma3=params.gamma3,
        eta0=params.eta0,
    )
    coarse_mesh = build_periodic_mesh(problem.L, two_grid.n_coarse)
    coarse = run_coarse_phase(problem, coarse_mesh, coarse_params, solver=solver)

    ops = TransportOperators(mesh, problem, params.dt, solver)
    reference = _ensure_reference(ops, params, reference)
    policy = _MarkedUpdate(coarse.marked.fine_steps(m1))
    trace, n_updates = _drive_reduced(ops, params, reference, policy)
    return TgApodResult(trace=trace, marked=coarse.marked, coarse=coarse, n_updates=n_updates)
