"""Throughput comparison of the compiled and numpy assembly kernels.

Run as `python benchmarks/bench_kernels.py [n ...]` with optional mesh
refinements (default 8 16).  The kernels are the per-step hot loop: the
advection/reaction/load blocks are reassembled at every implicit Euler
step, so their cost dominates long runs.
"""

from __future__ import annotations

import sys
import time

import numpy as np

from tgapod import _kernels
from tgapod._kernels import _numpy as numpy_backend
from tgapod.assembly import DEFAULT_RULE, _eval_scalar, _eval_velocity, _geometry, assemble_advection
from tgapod.mesh import build_periodic_mesh
from tgapod.problems import kolmogorov_problem

try:
    from tgapod._kernels import _cy as compiled_backend
except ImportError:
    compiled_backend = None


def _time(fn, reps: int) -> float:
    fn()
    start = time.perf_counter()
    for _ in range(reps):
        fn()
    return (time.perf_counter() - start) / reps


def bench(n: int) -> None:
    mesh = build_periodic_mesh(2.0 * np.pi, n)
    geom = _geometry(mesh, DEFAULT_RULE)
    problem = kolmogorov_problem(0.1)
    b_quad = _eval_velocity(problem.velocity, geom, 0.3)
    f_quad = _eval_scalar(problem.forcing, geom, 0.3)
    grads = np.ascontiguousarray(mesh.grads)
    reps = max(3, 60_000 // mesh.n_cells)

    backends = [("numpy", numpy_backend)]
    if compiled_backend is not None:
        backends.append(("cython", compiled_backend))

    print(f"n={n}: {mesh.n_cells} cells, {mesh.n_dofs} dofs ({reps} reps)")
    for name, mod in backends:
        adv = _time(lambda: mod.advection_local(geom["wdet"], geom["shape_vals"], grads, b_quad), reps)
        rea = _time(lambda: mod.reaction_local(geom["wdet"], geom["shape_vals"], f_quad), reps)
        lod = _time(lambda: mod.load_local(geom["wdet"], geom["shape_vals"], f_quad), reps)
        print(
            f"  {name:7s} advection {adv * 1e3:8.3f} ms   reaction {rea * 1e3:8.3f} ms   "
            f"load {lod * 1e3:8.3f} ms"
        )
    full = _time(lambda: assemble_advection(mesh, problem.velocity, 0.3), reps)
    print(f"  end-to-end assemble_advection ({_kernels.backend_name()} backend): {full * 1e3:.3f} ms")


if __name__ == "__main__":
    sizes = [int(arg) for arg in sys.argv[1:]] or [8, 16]
    for n in sizes:
        bench(n)
