"""Minimal end-to-end run: discretise, solve, compare with the exact solution.

Solves -lap u = f on the unit square for the smooth sin-product solution,
once per refinement level, and prints cycle counts and errors.  The error
column should drop by about 3^(p+1) per level.
"""

import numpy as np

from hpmg import (MgConfig, build_hierarchy, build_local_blocks, build_rhs,
                  discretisation_error, fit_slope, get_problem, make_basis,
                  solve)


def main(p=2, levels=(2, 3, 4), basis_kind="lobatto"):
    prob = get_problem("sin_product")
    basis = make_basis(basis_kind, p)
    cfg = MgConfig(eps=1e-10, max_cycles=200)

    print(f"sin_product, {basis_kind} basis, p = {p}")
    print(f"{'level':>5} {'cells':>7} {'h':>10} {'cycles':>7} "
          f"{'rel res':>10} {'L2 error':>11}")
    hs, errs = [], []
    for level in levels:
        mesh = build_hierarchy(2, level)[0]
        blocks = build_local_blocks(basis, mesh.dim, mesh.h)
        b = build_rhs(prob, mesh, basis)
        res = solve(mesh, basis, blocks, b, cfg)
        e2, _ = discretisation_error(res.u, prob, mesh, basis)
        hs.append(mesh.h)
        errs.append(e2)
        print(f"{level:>5} {mesh.ncells:>7} {mesh.h:>10.6f} "
              f"{res.trace.cycles:>7} {res.trace.rel_prec()[-1]:>10.2e} "
              f"{e2:>11.4e}")
    print(f"fitted L2 slope: {fit_slope(hs, errs):.2f} (expected {p + 1})")


if __name__ == "__main__":
    main()
