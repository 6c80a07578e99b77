"""Cycle counts stay flat under h-refinement and grow mildly with p.

Builds the two-grid solver for the sharper two-peak problem over a small
(level, p) grid and prints the cycles needed to cut the preconditioned
residual by 1e-7, next to the bundled reference counts.
"""

from hpmg import (MgConfig, build_hierarchy, build_local_blocks, build_rhs,
                  get_problem, make_basis, solve)
from hpmg.bench import REF_CYCLES


def main(levels=(2, 3, 4), ps=(2, 3, 4)):
    prob = get_problem("two_peak")
    cfg = MgConfig(criterion="prec", eps=1e-7, max_cycles=300)
    print("two_peak, lobatto basis, cycles to 1e-7 (measured/reference)")
    header = " ".join(f"{'p=' + str(p):>9}" for p in ps)
    print(f"{'level':>5} {header}")
    for level in levels:
        mesh = build_hierarchy(2, level)[0]
        row = []
        for p in ps:
            basis = make_basis("lobatto", p)
            blocks = build_local_blocks(basis, mesh.dim, mesh.h)
            b = build_rhs(prob, mesh, basis)
            res = solve(mesh, basis, blocks, b, cfg)
            ref = REF_CYCLES.get(("two_peak", "prec", "lobatto", level, p))
            row.append(f"{res.trace.cycles:>4}/{ref if ref else '-':<4}")
        print(f"{level:>5} " + " ".join(row))


if __name__ == "__main__":
    main()
