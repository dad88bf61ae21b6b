"""Compiled stencil kernel versus the numpy fallback.

    python benchmarks/bench_kernels.py [--size 32] [--steps 20] [--orders 0 1 2 3]

Both backends step the same perturbed box; the script checks that their
fields agree bit for bit and reports milliseconds per step and the speedup.
"""
import argparse
import time

import numpy as np

from mcfdtd import perturbation as pt
from mcfdtd.fdtd import kernels
from mcfdtd.fdtd.grid import BoundarySpec, MaterialMap, SourceSpec, YeeGrid
from mcfdtd.fdtd.solver import Simulation


def make(size: int, order: int, backend: str) -> Simulation:
    dims = (size, size, size)
    grid = YeeGrid.uniform(dims, (1e-3, 1e-3, 1e-3))
    eps = MaterialMap.vacuum(dims).eps_r
    q = size // 4
    eps[q:3 * q, q:3 * q, q:3 * q, 0] = 2.2
    if order:
        spec = pt.PerturbationSpec((pt.ParameterPerturbation("eps", pt.MATERIAL, 1e-5, [((q, q, q), (3 * q, 3 * q, 3 * q))], order),))
        applied = pt.apply(spec, eps, grid.sizes)
        grid, eps = YeeGrid(dims, applied.sizes), applied.eps_r
    faces = {f: "mur" for f in ("x-", "x+", "y-", "y+", "z-", "z+")}
    src = SourceSpec("Ez", (size // 2,) * 3, (size // 2 + 1,) * 3, width=10e-12)
    return Simulation(grid, MaterialMap(eps), BoundarySpec(faces), [src], backend=backend)


def seconds_per_step(sim: Simulation, steps: int) -> float:
    sim.step()
    t0 = time.perf_counter()
    for _ in range(steps):
        sim.step()
    return (time.perf_counter() - t0) / steps


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=32)
    ap.add_argument("--steps", type=int, default=20)
    ap.add_argument("--orders", type=int, nargs="+", default=[0, 1, 2, 3])
    args = ap.parse_args(argv)
    if "compiled" not in kernels.BACKENDS:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
    print(f"grid {args.size}^3, {args.steps} steps")
    print(f"{'order':>5} {'compiled ms':>12} {'python ms':>10} {'speedup':>8} {'identical':>9}")
    for order in args.orders:
        fast, slow = make(args.size, order, "compiled"), make(args.size, order, "python")
        t_fast = seconds_per_step(fast, args.steps)
        t_slow = seconds_per_step(slow, args.steps)
        same = all(np.array_equal(fast.fields[c], slow.fields[c]) for c in fast.fields)
        print(f"{order:>5} {1e3 * t_fast:>12.2f} {1e3 * t_slow:>10.2f} {t_slow / t_fast:>8.2f} {str(same):>9}")


if __name__ == "__main__":
    main()
