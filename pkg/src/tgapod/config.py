"""Flat key=value run configuration.

Keys use dotted section prefixes (``problem.eps = 0.1``).  Unknown keys are
hard errors so misspellings cannot silently fall back to defaults; every
diagnostic names the offending key.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from tgapod.adaptive import AdaptiveParams, TwoGridParams
from tgapod.integrator import SolverConfig
from tgapod.problems import ProblemSpec, abc_problem, kolmogorov_problem, manufactured_problem

METHODS = ("fem", "pod", "apod-residual", "tg-apod")
PROBLEMS = ("kolmogorov", "abc", "manufactured")
SWEEP_AXES = ("gamma3", "gamma12", "coarse-n")


class ConfigError(ValueError):
    """Invalid or unknown configuration input."""


def _parse_float(key, raw):
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {raw!r}") from None


def _parse_int(key, raw):
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None


def _parse_float_list(key, raw):
    try:
        return tuple(float(tok) for tok in raw.split(",") if tok.strip())
    except ValueError:
        raise ConfigError(f"{key}: expected comma-separated numbers, got {raw!r}") from None


def _parse_int_list(key, raw):
    try:
        return tuple(int(tok) for tok in raw.split(",") if tok.strip())
    except ValueError:
        raise ConfigError(f"{key}: expected comma-separated integers, got {raw!r}") from None


def _parse_str(key, raw):
    return raw


_KNOWN_KEYS = {
    "method": _parse_str,
    "problem.name": _parse_str,
    "problem.eps": _parse_float,
    "problem.w": _parse_float,
    "problem.T": _parse_float,
    "fine.n": _parse_int,
    "fine.dt": _parse_float,
    "coarse.n": _parse_int,
    "coarse.dt": _parse_float,
    "adaptive.gamma1": _parse_float,
    "adaptive.gamma2": _parse_float,
    "adaptive.gamma3": _parse_float,
    "adaptive.eta0": _parse_float,
    "adaptive.T0": _parse_float,
    "adaptive.dT": _parse_float,
    "adaptive.dM": _parse_int,
    "solver.method": _parse_str,
    "solver.rel_tol": _parse_float,
    "solver.max_iter": _parse_int,
    "output.dir": _parse_str,
    "converge.ns": _parse_int_list,
    "converge.dts": _parse_float_list,
    "converge.spatial_dt": _parse_float,
    "converge.temporal_n": _parse_int,
    "converge.t_end_spatial": _parse_float,
    "converge.t_end_temporal": _parse_float,
    "converge.ref_dt": _parse_float,
    "sweep.axis": _parse_str,
    "sweep.values": _parse_float_list,
}


@dataclass
class ConvergeConfig:
    ns: tuple[int, ...] = (8, 16, 32)
    dts: tuple[float, ...] = (0.04, 0.02, 0.01)
    spatial_dt: float = 1.0e-3
    temporal_n: int = 16
    t_end_spatial: float = 0.05
    t_end_temporal: float = 0.4
    ref_dt: float = 0.00125


@dataclass
class RunConfig:
    method: str = "pod"
    problem_name: str = "kolmogorov"
    eps: float = 0.1
    w: float = 1.0
    horizon: float = 10.0
    fine_n: int = 8
    fine_dt: float = 0.01
    coarse_n: int = 4
    coarse_dt: float = 0.05
    gamma1: float = 0.999
    gamma2: float = 0.999
    gamma3: float = 1.0 - 1.0e-8
    eta0: float = 0.005
    T0: Optional[float] = None
    dT: Optional[float] = None
    dM: Optional[int] = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    out_dir: str = "runs"
    seed: Optional[int] = None
    converge: ConvergeConfig = field(default_factory=ConvergeConfig)
    sweep_axis: str = "gamma3"
    sweep_values: Optional[tuple[float, ...]] = None

    def warmup_defaults(self) -> tuple[float, float, int]:
        """Desk-scale warm-up schedule; slow diffusion needs the longer one."""
        if self.eps <= 0.01 + 1e-15:
            return 5.0, 3.0, 20
        return 1.5, 1.0, 5

    def adaptive_params(self) -> AdaptiveParams:
        t0_def, dt_def, dm_def = self.warmup_defaults()
        try:
            return AdaptiveParams(
                T0=self.T0 if self.T0 is not None else t0_def,
                dT=self.dT if self.dT is not None else dt_def,
                dM=self.dM if self.dM is not None else dm_def,
                dt=self.fine_dt,
                T=self.horizon,
                gamma1=self.gamma1,
                gamma2=self.gamma2,
                gamma3=self.gamma3,
                eta0=self.eta0,
            )
        except ValueError as exc:
            raise ConfigError(f"adaptive parameters: {exc}") from None

    def two_grid_params(self) -> TwoGridParams:
        try:
            two_grid = TwoGridParams(self.coarse_n, self.coarse_dt)
            two_grid.validate_with(self.fine_n, self.adaptive_params())
        except ValueError as exc:
            raise ConfigError(
                f"coarse.n={self.coarse_n}, coarse.dt={self.coarse_dt} against "
                f"fine.n={self.fine_n}, fine.dt={self.fine_dt}: {exc}"
            ) from None
        return two_grid

    def make_problem(self) -> ProblemSpec:
        if self.problem_name == "kolmogorov":
            return kolmogorov_problem(self.eps, T=self.horizon)
        if self.problem_name == "abc":
            return abc_problem(self.eps, w=self.w, T=self.horizon)
        problem, _ = manufactured_problem(
            self.eps, velocity=kolmogorov_problem(self.eps).velocity, T=self.horizon
        )
        return problem


def parse_config(path: str, overrides: dict | None = None) -> RunConfig:
    """Read and validate a config file; `overrides` come from the CLI."""
    entries: dict[str, object] = {}
    with open(path) as fh:
        for lineno, raw_line in enumerate(fh, start=1):
            line = raw_line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected `key = value`, got {raw_line.strip()!r}")
            key, raw_value = (part.strip() for part in line.split("=", 1))
            if key not in _KNOWN_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            if key in entries:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            entries[key] = _KNOWN_KEYS[key](key, raw_value)
    if overrides:
        entries.update(overrides)
    return _build(entries)


def _build(entries: dict) -> RunConfig:
    cfg = RunConfig()

    method = entries.get("method", cfg.method)
    if method not in METHODS:
        raise ConfigError(f"method: expected one of {METHODS}, got {method!r}")
    cfg.method = method

    name = entries.get("problem.name", cfg.problem_name)
    if name not in PROBLEMS:
        raise ConfigError(f"problem.name: expected one of {PROBLEMS}, got {name!r}")
    cfg.problem_name = name

    cfg.eps = entries.get("problem.eps", cfg.eps)
    if cfg.eps <= 0:
        raise ConfigError(f"problem.eps: diffusivity must be positive, got {cfg.eps}")
    cfg.w = entries.get("problem.w", cfg.w)
    cfg.horizon = entries.get("problem.T", cfg.horizon)
    if cfg.horizon <= 0:
        raise ConfigError(f"problem.T: horizon must be positive, got {cfg.horizon}")

    cfg.fine_n = entries.get("fine.n", cfg.fine_n)
    if cfg.fine_n < 2:
        raise ConfigError(f"fine.n: need at least 2 cells per axis, got {cfg.fine_n}")
    cfg.fine_dt = entries.get("fine.dt", cfg.fine_dt)
    if cfg.fine_dt <= 0:
        raise ConfigError(f"fine.dt: timestep must be positive, got {cfg.fine_dt}")
    cfg.coarse_n = entries.get("coarse.n", cfg.coarse_n)
    cfg.coarse_dt = entries.get("coarse.dt", cfg.coarse_dt)

    cfg.gamma1 = entries.get("adaptive.gamma1", cfg.gamma1)
    cfg.gamma2 = entries.get("adaptive.gamma2", cfg.gamma2)
    cfg.gamma3 = entries.get("adaptive.gamma3", cfg.gamma3)
    for key, value in (
        ("adaptive.gamma1", cfg.gamma1),
        ("adaptive.gamma2", cfg.gamma2),
        ("adaptive.gamma3", cfg.gamma3),
    ):
        if not 0.0 < value < 1.0:
            raise ConfigError(f"{key}: energy fraction must lie in (0, 1), got {value}")
    cfg.eta0 = entries.get("adaptive.eta0", cfg.eta0)
    if cfg.eta0 <= 0:
        raise ConfigError(f"adaptive.eta0: threshold must be positive, got {cfg.eta0}")
    cfg.T0 = entries.get("adaptive.T0", cfg.T0)
    cfg.dT = entries.get("adaptive.dT", cfg.dT)
    cfg.dM = entries.get("adaptive.dM", cfg.dM)
    if cfg.dM is not None and cfg.dM < 1:
        raise ConfigError(f"adaptive.dM: snapshot stride must be >= 1, got {cfg.dM}")

    try:
        cfg.solver = SolverConfig(
            method=entries.get("solver.method", "auto"),
            rel_tol=entries.get("solver.rel_tol", 1e-10),
            max_iter=entries.get("solver.max_iter", 200),
        )
    except ValueError as exc:
        raise ConfigError(f"solver configuration: {exc}") from None

    cfg.out_dir = entries.get("output.dir", cfg.out_dir)

    conv = cfg.converge
    conv.ns = entries.get("converge.ns", conv.ns)
    conv.dts = entries.get("converge.dts", conv.dts)
    conv.spatial_dt = entries.get("converge.spatial_dt", conv.spatial_dt)
    conv.temporal_n = entries.get("converge.temporal_n", conv.temporal_n)
    conv.t_end_spatial = entries.get("converge.t_end_spatial", conv.t_end_spatial)
    conv.t_end_temporal = entries.get("converge.t_end_temporal", conv.t_end_temporal)
    conv.ref_dt = entries.get("converge.ref_dt", conv.ref_dt)

    axis = entries.get("sweep.axis", cfg.sweep_axis)
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep.axis: expected one of {SWEEP_AXES}, got {axis!r}")
    cfg.sweep_axis = axis
    cfg.sweep_values = entries.get("sweep.values", cfg.sweep_values)

    # Validate alignment eagerly so bad configs fail at parse time.
    cfg.adaptive_params()
    if cfg.method == "tg-apod":
        cfg.two_grid_params()
    return cfg
