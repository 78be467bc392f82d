"""Timing comparison of the compiled and pure-Python element kernels.

Runs the per-cell element-matrix kernel (the hot loop of pencil assembly)
through both backends on identical inputs and reports wall times, the
speedup, and the maximum discrepancy.  Also times a full stiffness/mass
assembly with each backend swapped in.

Usage:  python3 benchmarks/bench_kernels.py [--cells N] [--order {1,2}]
        [--dim {1,2,3}] [--repeat R]
"""

import argparse
import time

import numpy as np

import pseig.assembly as assembly
from pseig.assembly import KERNEL_BACKEND, CoefficientSpec, ReferenceTables, assemble_pencil
from pseig.grid import BoundarySpec, DomainSpec, build_box_mesh, build_dof_map

try:
    from pseig import _kernels as kern_c
except ImportError:
    kern_c = None
from pseig import _kernels_py as kern_py


def _best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_element_kernel(mesh, repeat):
    tables = ReferenceTables(mesh)
    nc, nq = mesh.n_active_cells, tables.w.shape[0]
    rng = np.random.default_rng(0)
    rho = rng.uniform(0.5, 2.0, size=(nc, nq))
    V = rng.uniform(0.0, 1.0, size=(nc, nq))
    args = (tables.w, rho, V, tables.PG, tables.NN)

    rows = []
    ref = None
    for name, mod in (("cython", kern_c), ("python", kern_py)):
        if mod is None:
            continue
        t = _best_of(lambda m=mod: m.element_matrices(*args), repeat)
        Ae, Be = mod.element_matrices(*args)
        if ref is None:
            ref = (Ae, Be)
            diff = 0.0
        else:
            diff = max(
                np.abs(Ae - ref[0]).max(), np.abs(Be - ref[1]).max()
            )
        rows.append((name, t, diff))
    return rows


def bench_assembly(mesh, dofmap, repeat):
    coeff = CoefficientSpec(rho=lambda p: 1.0 + 0.5 * np.cos(np.pi * p[:, 0]),
                            V=1.0)
    rows = []
    saved = assembly._kern
    try:
        for name, mod in (("cython", kern_c), ("python", kern_py)):
            if mod is None:
                continue
            assembly._kern = mod
            t = _best_of(lambda: assemble_pencil(mesh, dofmap, coeff), repeat)
            rows.append((name, t))
    finally:
        assembly._kern = saved
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cells", type=int, default=40)
    ap.add_argument("--order", type=int, default=2, choices=(1, 2))
    ap.add_argument("--dim", type=int, default=2, choices=(1, 2, 3))
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    dom = DomainSpec(p=args.dim, q=0)
    mesh = build_box_mesh(dom, (args.cells,) * args.dim, args.order)
    dofmap = build_dof_map(mesh, BoundarySpec(bx="dirichlet", by="dirichlet"))

    print(f"active backend at import: {KERNEL_BACKEND}")
    print(f"mesh: {mesh.n_active_cells} cells, order {args.order}, "
          f"{mesh.n_nodes} nodes\n")

    print("element kernel (best of %d):" % args.repeat)
    ek = bench_element_kernel(mesh, args.repeat)
    for name, t, diff in ek:
        print(f"  {name:8s} {t * 1e3:10.2f} ms   max |diff| = {diff:.3e}")
    if len(ek) == 2:
        print(f"  speedup: {ek[1][1] / ek[0][1]:.2f}x")

    print("\nfull pencil assembly (best of %d):" % args.repeat)
    fa = bench_assembly(mesh, dofmap, args.repeat)
    for name, t in fa:
        print(f"  {name:8s} {t * 1e3:10.2f} ms")
    if len(fa) == 2:
        print(f"  speedup: {fa[1][1] / fa[0][1]:.2f}x")


if __name__ == "__main__":
    main()
