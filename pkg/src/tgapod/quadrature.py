"""Quadrature rules on the reference tetrahedron.

Rules are stored barycentrically; weights sum to one, so a cell integral is
``volume * sum_q w_q f(x_q)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TetRule:
    name: str
    degree: int
    points: np.ndarray  # (nq, 4) barycentric coordinates
    weights: np.ndarray  # (nq,), summing to 1

    @property
    def n_points(self) -> int:
        return self.weights.size

    def shape_values(self) -> np.ndarray:
        """P1 basis values at the rule's points: identical to `points`."""
        return self.points


def degree2_rule() -> TetRule:
    """Classic 4-point rule, exact for quadratics."""
    a = (5.0 + 3.0 * np.sqrt(5.0)) / 20.0
    b = (5.0 - np.sqrt(5.0)) / 20.0
    points = np.full((4, 4), b)
    np.fill_diagonal(points, a)
    return TetRule("tet4", 2, points, np.full(4, 0.25))


def collapsed_gauss_rule(n_gauss: int) -> TetRule:
    """Tensor Gauss-Legendre rule mapped onto the tetrahedron.

    The collapsed-cube map (x, y, z) = (u, v(1-u), w(1-u)(1-v)) has Jacobian
    (1-u)^2 (1-v); with g points per axis the rule is exact for total degree
    2g - 3 (each mapped monomial plus the Jacobian stays within per-axis
    degree 2g - 1).  All weights are positive.
    """
    if n_gauss < 2:
        raise ValueError("collapsed rule needs at least 2 points per axis")
    x01, w01 = np.polynomial.legendre.leggauss(n_gauss)
    x01 = 0.5 * (x01 + 1.0)
    w01 = 0.5 * w01

    u, v, w = np.meshgrid(x01, x01, x01, indexing="ij")
    wu, wv, ww = np.meshgrid(w01, w01, w01, indexing="ij")
    xi = u
    eta = v * (1.0 - u)
    zeta = w * (1.0 - u) * (1.0 - v)
    jac = (1.0 - u) ** 2 * (1.0 - v)
    weights = (wu * wv * ww * jac).ravel() * 6.0  # reference volume is 1/6

    lam = np.column_stack(
        [1.0 - xi.ravel() - eta.ravel() - zeta.ravel(), xi.ravel(), eta.ravel(), zeta.ravel()]
    )
    return TetRule(f"collapsed{n_gauss}", 2 * n_gauss - 3, lam, weights)
