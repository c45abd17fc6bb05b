"""Benchmark transport problems on the periodic cube [0, 2*pi]^3.

Field callables are numpy-vectorized: scalar fields map point arrays (and a
scalar time) to an array, velocity fields return a component triple.  A
`None` field means identically zero and lets the assembly skip that term.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ProblemSpec:
    """Coefficients and horizon of one transport problem."""

    eps: float
    velocity: Optional[Callable]
    reaction: Optional[Callable]
    forcing: Optional[Callable]
    initial: Optional[Callable]
    L: float
    T: float
    name: str = "custom"

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError(f"diffusivity must be positive, got {self.eps}")
        if self.L <= 0 or self.T <= 0:
            raise ValueError("domain length and horizon must be positive")


def kolmogorov_problem(eps: float, T: float = 100.0) -> ProblemSpec:
    """Advection-dominated transport driven by the time-modulated
    Kolmogorov velocity field, starting from rest."""

    def velocity(x, y, z, t):
        ct = np.cos(t)
        return (
            np.cos(y) + np.sin(z) * ct,
            np.cos(z) + np.sin(x) * ct,
            np.cos(x) + np.sin(y) * ct,
        )

    def forcing(x, y, z, t):
        return -np.cos(y) - np.sin(z) * np.cos(t)

    return ProblemSpec(
        eps=eps,
        velocity=velocity,
        reaction=None,
        forcing=forcing,
        initial=None,
        L=TWO_PI,
        T=T,
        name="kolmogorov",
    )


def abc_problem(eps: float, w: float = 1.0, T: float = 100.0) -> ProblemSpec:
    """Arnold-Beltrami-Childress flow with phase shift sin(w t), from rest."""

    def velocity(x, y, z, t):
        s = np.sin(w * t)
        return (
            np.sin(z + s) + np.cos(y + s),
            np.sin(x + s) + np.cos(z + s),
            np.sin(y + s) + np.cos(x + s),
        )

    def forcing(x, y, z, t):
        s = np.sin(w * t)
        return -np.sin(z + s) - np.cos(y + s)

    return ProblemSpec(
        eps=eps,
        velocity=velocity,
        reaction=None,
        forcing=forcing,
        initial=None,
        L=TWO_PI,
        T=T,
        name="abc",
    )


def manufactured_problem(
    eps: float, velocity: Optional[Callable] = None, T: float = 10.0
) -> tuple[ProblemSpec, Callable]:
    """Transport problem whose exact solution is sin(x + y + z - t).

    The forcing is derived from the exact solution, so FEM errors against
    it measure pure discretization error.  Returns the problem together
    with the exact-solution evaluator.
    """

    def exact(x, y, z, t):
        return np.sin(x + y + z - t)

    def forcing(x, y, z, t):
        s = x + y + z - t
        # u_t + B.grad(u) - eps Lap(u) with Lap(u) = -3 u for this phase.
        f = -np.cos(s) + 3.0 * eps * np.sin(s)
        if velocity is not None:
            bx, by, bz = velocity(x, y, z, t)
            f = f + (bx + by + bz) * np.cos(s)
        return f

    def initial(x, y, z):
        return np.sin(x + y + z)

    problem = ProblemSpec(
        eps=eps,
        velocity=velocity,
        reaction=None,
        forcing=forcing,
        initial=initial,
        L=TWO_PI,
        T=T,
        name="manufactured",
    )
    return problem, exact
