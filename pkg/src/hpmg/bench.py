"""Experiment drivers and the command line harness.

Each driver reproduces one solver study end to end: discretisation-error
convergence, two-grid cycle-count tables, residual histories, the
error-versus-residual stopping study, cross-variant equivalence, and the
closed-form access-count model.  Every driver writes CSV files plus a JSON
manifest that echoes all knobs affecting the iterates, so a run can be
reproduced bit for bit from its manifest.

The cycle tables carry a ref_cycles column with reference counts for the
standard configurations of the same experiment design, for side-by-side
trend comparison; the solver's own counts depend on the relaxation and
penalty choices and are validated by trend, not digit by digit.
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from .basis import make_basis
from .fields import CellField, fmt_float
from .localops import build_local_blocks, memory_access_model
from .mesh import build_hierarchy, make_partition
from .multigrid import MgConfig, build_coarse_space, solve
from .problems import (build_rhs, discretisation_error, fit_slope,
                       get_problem, interpolate_exact)
from .smoother import apply_operator, compute_residual_only, make_state, sweep

OMEGA_SMOOTHER = 0.6   # standalone block-Jacobi default; two-grid uses MgConfig


# -- reference cycle counts -----------------------------------------------------
# Counts published for this experiment design (reduction 1e-7, levels 2..5,
# p 2..6); keyed by (problem, criterion, basis, level, p).  Used only as a
# side-by-side column in the emitted tables.

def _ref_table(rows):
    out = {}
    for (prob, crit, bk), by_level in rows.items():
        for level, counts in by_level.items():
            for p, c in zip((2, 3, 4, 5, 6), counts):
                if c is not None:
                    out[(prob, crit, bk, level, p)] = c
    return out


REF_CYCLES = _ref_table({
    ("sin_product", "unprec", "lobatto"): {
        2: (12, 24, 43, 63, 89),
        3: (13, 23, 41, 61, 86),
        4: (13, 22, 41, 61, 85),
        5: (13, 22, 41, 61, 85),
    },
    ("two_peak", "unprec", "lobatto"): {
        2: (19, 36, 59, 89, 125),
        3: (18, 33, 55, 82, 116),
        4: (17, 31, 52, 78, 111),
        5: (16, 30, 50, 75, 106),
    },
    ("sin_product", "prec", "lobatto"): {
        2: (11, 20, 32, 46, 62),
        3: (9, 15, 25, 35, 47),
        4: (7, 12, 19, 26, 35),
        5: (7, 9, 13, 18, 22),
    },
    ("two_peak", "prec", "lobatto"): {
        2: (16, 27, 43, 61, 82),
        3: (12, 19, 29, 41, 55),
        4: (9, 14, 21, 29, 39),
        5: (8, 10, 15, 20, 26),
    },
    ("two_peak", "unprec", "legendre"): {
        2: (20, 37, 62, 92, 131),
        3: (19, 34, 57, 85, 122),
        4: (18, 33, 55, 82, 117),
        5: (17, 31, 53, 78, None),
    },
    ("two_peak", "prec", "legendre"): {
        2: (16, 27, 43, 61, 82),
        3: (12, 19, 29, 41, 55),
        4: (9, 13, 21, 29, 38),
        5: (8, 10, 15, 20, None),
    },
})


# -- plumbing --------------------------------------------------------------------

def _build_id():
    here = os.path.dirname(os.path.abspath(__file__))
    try:
        out = subprocess.run(["git", "rev-parse", "--short", "HEAD"],
                             cwd=here, capture_output=True, text=True,
                             timeout=10)
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def _fmt(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float):
        return fmt_float(v)
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def write_manifest(out, name, command, config, meshes, outputs, wall, seed=None):
    doc = {
        "command": command,
        "config": config,
        "meshes": meshes,
        "outputs": [os.path.basename(p) for p in outputs],
        "build_id": _build_id(),
        "wall_time_s": round(wall, 3),
    }
    if seed is not None:
        doc["seed"] = seed
    path = os.path.join(out, name)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


class _Setup:
    """Caches meshes, coarse spaces and assembled blocks across solves."""

    def __init__(self):
        self.meshes = {}
        self.cspaces = {}

    def mesh(self, level):
        if level not in self.meshes:
            self.meshes[level] = build_hierarchy(2, level)[0]
        return self.meshes[level]

    def cspace(self, level):
        if level not in self.cspaces:
            self.cspaces[level] = build_coarse_space(2, level)
        return self.cspaces[level]

    def assemble(self, level, p, basis_kind, theta, penalty):
        mesh = self.mesh(level)
        basis = make_basis(basis_kind, p)
        blocks = build_local_blocks(basis, 2, mesh.h, theta=theta,
                                    penalty_const=penalty)
        return mesh, basis, blocks


def solver_config(args_like=None, **kw):
    """MgConfig from CLI-style overrides; None keeps the library default."""
    cfg = MgConfig()
    src = dict(vars(args_like)) if args_like is not None else {}
    src.update(kw)
    for name, attr in (("omega", "omega"), ("nu", "nu"), ("coarse", "coarse"),
                       ("criterion", "criterion"), ("variant", "variant"),
                       ("inverse", "inverse_mode"), ("workers", "workers"),
                       ("eps", "eps"), ("max_cycles", "max_cycles")):
        v = src.get(name)
        if v is not None:
            setattr(cfg, attr, v)
    return cfg


def _knob_echo(cfg, basis, theta, penalty, partition="balanced", subdomains=1,
               extra=None):
    doc = {
        "basis": basis,
        "theta": theta,
        "penalty_const": penalty,
        "omega": cfg.omega,
        "omega_smoother": OMEGA_SMOOTHER,
        "nu": cfg.nu,
        "nu_coarse": list(cfg.nu_coarse),
        "omega_coarse": cfg.omega_coarse,
        "coarse": cfg.coarse,
        "coarsest_sweeps": cfg.coarsest_sweeps,
        "criterion": cfg.criterion,
        "eps": cfg.eps,
        "max_cycles": cfg.max_cycles,
        "variant": cfg.variant,
        "inverse_mode": cfg.inverse_mode,
        "partition": partition,
        "subdomains": subdomains,
        "workers": cfg.workers,
    }
    if extra:
        doc.update(extra)
    return doc


def _partition_for(mesh, mode, nparts):
    if nparts <= 1:
        return None
    return make_partition(mesh, mode, nparts)


def predicted_total_accesses(mesh, p, variant):
    """Entity-resolved access count for one sweep on a concrete mesh.

    The closed-form model amortizes facet work over cells in the bulk
    limit (d interior facets per cell); on a finite mesh the same
    per-entity counts are 7 facet records per interior facet, 4 per
    boundary facet, and the model's volumetric term per cell.
    """
    dim = mesh.dim
    nloc = (p + 1) ** dim
    nf = (p + 1) ** (dim - 1)
    nb = int(np.sum(mesh.facet_cells[:, 1] < 0))
    ni = mesh.nfacets - nb
    vol = {"vanilla": (2 * dim + 5), "fused": 3, "fused_standalone": 5}[variant]
    facet = 0 if variant == "vanilla" else (7 * ni + 4 * nb) * nf
    return mesh.ncells * vol * nloc + facet


def access_model_echo(p_list, dim=2):
    return {str(p): {v: memory_access_model(v, dim, p)
                     for v in ("vanilla", "fused", "fused_standalone")}
            for p in p_list}


# -- drivers ---------------------------------------------------------------------

def run_convergence_study(p_list, levels, problem="sin_product",
                          basis="lobatto", theta=-1.0, penalty=1.0,
                          out=".", cli=None):
    """Discretisation error over (p, level) plus fitted slopes."""
    t0 = time.time()
    os.makedirs(out, exist_ok=True)
    setup = _Setup()
    prob = get_problem(problem)
    cfg = solver_config(cli, criterion="prec", eps=1e-10, max_cycles=300)
    rows, slope_rows = [], []
    for p in p_list:
        errs2, errsi, hs = [], [], []
        for level in levels:
            mesh, bas, blocks = setup.assemble(level, p, basis, theta, penalty)
            b = build_rhs(prob, mesh, bas)
            res = solve(mesh, bas, blocks, b, cfg, cspace=setup.cspace(level))
            e2, ei = discretisation_error(res.u, prob, mesh, bas)
            rows.append((problem, basis, p, level, mesh.h,
                         mesh.ncells * bas.n ** 2, res.trace.cycles,
                         res.trace.converged, e2, ei))
            errs2.append(e2); errsi.append(ei); hs.append(mesh.h)
        slope_rows.append((problem, basis, p, fit_slope(hs, errs2),
                           fit_slope(hs, errsi)))
    paths = [
        write_csv(os.path.join(out, "convergence.csv"),
                  ["problem", "basis", "p", "level", "h", "dofs", "cycles",
                   "converged", "err_l2", "err_linf"], rows),
        write_csv(os.path.join(out, "convergence_slopes.csv"),
                  ["problem", "basis", "p", "slope_l2", "slope_linf"],
                  slope_rows),
    ]
    write_manifest(out, "convergence.json", "convergence",
                   _knob_echo(cfg, basis, theta, penalty,
                              extra={"p": list(p_list),
                                     "levels": list(levels),
                                     "problem": problem}),
                   [setup.mesh(lv).summary() for lv in levels],
                   paths, time.time() - t0)
    return rows, slope_rows


def run_cycle_count_table(p_list=(2, 3, 4, 5, 6), levels=(2, 3, 4, 5),
                          problem="two_peak", criterion="prec",
                          basis="lobatto", theta=-1.0, penalty=1.0,
                          out=".", cli=None):
    """Cycles to reduce the chosen residual flavor by 1e-7."""
    t0 = time.time()
    os.makedirs(out, exist_ok=True)
    setup = _Setup()
    prob = get_problem(problem)
    cfg = solver_config(cli, criterion=criterion, eps=1e-7, max_cycles=500)
    rows = []
    for level in levels:
        for p in p_list:
            mesh, bas, blocks = setup.assemble(level, p, basis, theta, penalty)
            b = build_rhs(prob, mesh, bas)
            res = solve(mesh, bas, blocks, b, cfg, cspace=setup.cspace(level))
            ref = REF_CYCLES.get((problem, criterion, basis, level, p), "")
            rows.append((problem, criterion, basis, level, mesh.n, p,
                         res.trace.cycles, res.trace.converged, ref))
    path = write_csv(os.path.join(out, "cycles.csv"),
                     ["problem", "criterion", "basis", "level",
                      "cells_per_axis", "p", "cycles", "converged",
                      "ref_cycles"], rows)
    write_manifest(out, "cycles.json", "cycles",
                   _knob_echo(cfg, basis, theta, penalty,
                              extra={"p": list(p_list), "levels": list(levels),
                                     "problem": problem,
                                     "access_model_per_cell":
                                         access_model_echo(p_list)}),
                   [setup.mesh(lv).summary() for lv in levels],
                   [path], time.time() - t0)
    return rows


def run_residual_history(problem="two_peak", p=2, level=3, basis="lobatto",
                         theta=-1.0, penalty=1.0, max_sweeps=1000,
                         out=".", cli=None):
    """Residual evolution for the standalone smoother and for the two-grid
    solver with the exact and the V-cycle coarse solve."""
    t0 = time.time()
    os.makedirs(out, exist_ok=True)
    setup = _Setup()
    prob = get_problem(problem)
    mesh, bas, blocks = setup.assemble(level, p, basis, theta, penalty)
    b = build_rhs(prob, mesh, bas)
    omega_sm = OMEGA_SMOOTHER
    if cli is not None and getattr(cli, "omega", None) is not None:
        omega_sm = cli.omega
    variant = "fused"
    if cli is not None and getattr(cli, "variant", None) is not None:
        variant = cli.variant

    st = make_state(mesh, bas, blocks, b.copy(), omega=omega_sm,
                    variant=variant)
    st.warm_up()
    r0 = compute_residual_only(st)
    n0_2 = float(np.linalg.norm(r0.data))
    n0_i = float(np.max(np.abs(r0.data)))
    sm_rows = []
    uprev = st.u.data.copy()
    d1 = None
    for it in range(1, max_sweeps + 1):
        sweep(st)
        r = compute_residual_only(st)
        r2 = float(np.linalg.norm(r.data))
        ri = float(np.max(np.abs(r.data)))
        diff = float(np.linalg.norm(st.u.data - uprev))
        uprev = st.u.data.copy()
        if d1 is None:
            d1 = diff if diff > 0 else 1.0
        sm_rows.append((it, r2, ri, r2 / n0_2, ri / n0_i, diff, diff / d1))
        if r2 <= 1e-7 * n0_2:
            break
    st.close()
    paths = [write_csv(os.path.join(out, "history_smoother.csv"),
                       ["sweep", "res_l2", "res_linf", "rel_res_l2",
                        "rel_res_linf", "prec_l2", "rel_prec_l2"], sm_rows)]

    for mode in ("exact", "vcycle"):
        cfg = solver_config(cli, criterion="unprec", eps=1e-7,
                            max_cycles=500, coarse=mode)
        res = solve(mesh, bas, blocks, b.copy(), cfg,
                    cspace=setup.cspace(level))
        tr_path = os.path.join(out, f"history_{mode}.csv")
        res.trace.to_csv(tr_path)
        paths.append(tr_path)

    cfg = solver_config(cli, criterion="unprec", eps=1e-7, max_cycles=500)
    write_manifest(out, "history.json", "history",
                   _knob_echo(cfg, basis, theta, penalty,
                              extra={"p": p, "levels": [level],
                                     "problem": problem,
                                     "omega_smoother": omega_sm,
                                     "max_sweeps": max_sweeps,
                                     "access_model_per_cell":
                                         access_model_echo([p])}),
                   [mesh.summary()], paths, time.time() - t0)
    return sm_rows, paths


def run_residual_vs_error(p_list=(2, 3), levels=(2, 3, 4), basis="lobatto",
                          theta=-1.0, penalty=1.0, out=".", cli=None):
    """Solve A u = 0 from the two-peak interpolant until the solution error
    drops below 5e-9, then report both residual flavors."""
    t0 = time.time()
    os.makedirs(out, exist_ok=True)
    setup = _Setup()
    prob = get_problem("two_peak")
    rows = []
    for p in p_list:
        for level in levels:
            mesh, bas, blocks = setup.assemble(level, p, basis, theta, penalty)
            u0 = interpolate_exact(prob, mesh, bas)
            cfg = solver_config(cli, criterion="error", eps=5e-9,
                                max_cycles=500)
            res = solve(mesh, bas, blocks,
                        CellField(np.zeros_like(u0.data)), cfg,
                        u0=u0.data.copy(), cspace=setup.cspace(level))
            rfin = apply_operator(mesh, bas, blocks, res.u.data)
            rel_unprec = float(np.linalg.norm(rfin.data)) / res.trace.r0_l2
            rows.append((p, level, mesh.h, res.trace.cycles,
                         res.trace.converged, res.trace.rel_err()[-1],
                         res.trace.rel_prec()[-1], rel_unprec))
    path = write_csv(os.path.join(out, "residual_vs_error.csv"),
                     ["p", "level", "h", "cycles", "converged", "rel_err_l2",
                      "rel_prec_l2", "rel_unprec_l2"], rows)
    cfg = solver_config(cli, criterion="error", eps=5e-9, max_cycles=500)
    write_manifest(out, "residual_vs_error.json", "residual-vs-error",
                   _knob_echo(cfg, basis, theta, penalty,
                              extra={"p": list(p_list),
                                     "levels": list(levels),
                                     "problem": "two_peak",
                                     "access_model_per_cell":
                                         access_model_echo(p_list)}),
                   [setup.mesh(lv).summary() for lv in levels],
                   [path], time.time() - t0)
    return rows


def run_equivalence_suite(p=3, level=3, problem="two_peak", basis="lobatto",
                          theta=-1.0, penalty=1.0, n_iter=10,
                          subdomains=(1, 2, 4, 8),
                          partitions=("balanced", "geometric"),
                          variants=("vanilla", "stages", "fused", "tasked"),
                          inverse_modes=("precomputed", "percell"),
                          workers=(1, 4), seed=0, out=".", cli=None):
    """Iterate-invariance across variants, partitions, and worker counts,
    plus instrumented-counter agreement with the access model."""
    t0 = time.time()
    os.makedirs(out, exist_ok=True)
    setup = _Setup()
    mesh, bas, blocks = setup.assemble(level, p, basis, theta, penalty)
    b = build_rhs(get_problem(problem), mesh, bas)
    omega = OMEGA_SMOOTHER
    if cli is not None and getattr(cli, "omega", None) is not None:
        omega = cli.omega

    def iterate(variant, inverse, pmode, nparts, nworkers):
        part = _partition_for(mesh, pmode, nparts)
        st = make_state(mesh, bas, blocks, b.copy(), partition=part,
                        omega=omega, variant=variant, inverse_mode=inverse,
                        workers=nworkers)
        st.warm_up()
        for _ in range(n_iter):
            sweep(st)
        u = st.u.data.copy()
        counters = st.counters
        st.close()
        return u, counters

    base, _ = iterate("fused", "precomputed", "balanced", 1, 1)
    scale = float(np.max(np.abs(base)))
    rows = []
    all_ok = True
    for variant in variants:
        for inverse in inverse_modes:
            for pmode in partitions:
                for nparts in subdomains:
                    for nworkers in (workers if variant == "tasked" else (1,)):
                        u, _ = iterate(variant, inverse, pmode, nparts,
                                       nworkers)
                        dev = float(np.max(np.abs(u - base))) / scale
                        bitwise = bool(np.array_equal(u, base))
                        passed = dev <= 1e-12
                        all_ok &= passed
                        rows.append(("iterate", variant, inverse, pmode,
                                     nparts, nworkers, dev, bitwise, passed))

    counter_rows = []
    for pp in range(1, 7):
        bas_p = make_basis(basis, pp)
        blocks_p = build_local_blocks(bas_p, 2, mesh.h, theta=theta,
                                      penalty_const=penalty)
        b_p = build_rhs(get_problem(problem), mesh, bas_p)
        st = make_state(mesh, bas_p, blocks_p, b_p, omega=omega)
        st.warm_up()
        st.counters.reset()
        sweep(st)
        vol_cell = st.counters.volumetric() / mesh.ncells
        total = st.counters.total()
        st.close()
        model = memory_access_model("fused", 2, pp)
        predicted = predicted_total_accesses(mesh, pp, "fused")
        passed = vol_cell == 3 * (pp + 1) ** 2 and total == predicted
        all_ok &= passed
        counter_rows.append(("counter", "fused", pp, vol_cell,
                             3 * (pp + 1) ** 2, total, predicted,
                             total / mesh.ncells, model, passed))

    paths = [
        write_csv(os.path.join(out, "equivalence.csv"),
                  ["kind", "variant", "inverse", "partition", "subdomains",
                   "workers", "max_rel_dev", "bitwise", "passed"], rows),
        write_csv(os.path.join(out, "equivalence_counters.csv"),
                  ["kind", "variant", "p", "vol_per_cell", "model_vol",
                   "total", "predicted_total", "total_per_cell",
                   "model_bulk_per_cell", "passed"], counter_rows),
    ]
    cfg = solver_config(cli)
    write_manifest(out, "equivalence.json", "equivalence",
                   _knob_echo(cfg, basis, theta, penalty,
                              extra={"p": p, "levels": [level],
                                     "problem": problem, "n_iter": n_iter,
                                     "subdomains": list(subdomains),
                                     "partitions": list(partitions),
                                     "variants": list(variants),
                                     "inverse_modes": list(inverse_modes),
                                     "worker_counts": list(workers),
                                     "omega_smoother": omega,
                                     "access_model_per_cell":
                                         access_model_echo(range(1, 7))}),
                   [mesh.summary()], paths, time.time() - t0, seed=seed)
    return rows, counter_rows, all_ok


def run_model_table(dims=(2, 3), p_max=10, out="."):
    """Closed-form access counts per cell and sweep."""
    t0 = time.time()
    os.makedirs(out, exist_ok=True)
    rows = []
    for dim in dims:
        for p in range(1, p_max + 1):
            v = memory_access_model("vanilla", dim, p)
            f = memory_access_model("fused", dim, p)
            s = memory_access_model("fused_standalone", dim, p)
            rows.append((dim, p, v, f, s, v / f, v / s))
    path = write_csv(os.path.join(out, "model.csv"),
                     ["dim", "p", "vanilla", "fused", "fused_standalone",
                      "reduction", "reduction_standalone"], rows)
    write_manifest(out, "model.json", "model",
                   {"dims": list(dims), "p_max": p_max}, [], [path],
                   time.time() - t0)
    return rows


# -- CLI -------------------------------------------------------------------------

def _add_common(sp):
    sp.add_argument("--p", type=int, nargs="+", default=None)
    sp.add_argument("--levels", type=int, nargs="+", default=None)
    sp.add_argument("--problem", default=None,
                    choices=["sin_product", "two_peak", "zero"])
    sp.add_argument("--basis", default="lobatto",
                    choices=["lobatto", "legendre"])
    sp.add_argument("--theta", type=float, default=-1.0)
    sp.add_argument("--penalty", type=float, default=1.0)
    sp.add_argument("--omega", type=float, default=None)
    sp.add_argument("--nu", type=int, default=None)
    sp.add_argument("--coarse", default=None, choices=["exact", "vcycle"])
    sp.add_argument("--criterion", default=None, choices=["prec", "unprec"])
    sp.add_argument("--variant", default=None,
                    choices=["vanilla", "stages", "fused", "tasked"])
    sp.add_argument("--inverse", default=None,
                    choices=["precomputed", "percell"])
    sp.add_argument("--subdomains", type=int, nargs="+", default=[1])
    sp.add_argument("--partition", default=None,
                    choices=["balanced", "geometric"])
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--out", default=".")
    sp.add_argument("--seed", type=int, default=0)


def make_parser():
    ap = argparse.ArgumentParser(
        prog="hpmg-bench",
        description="Benchmark harness for the matrix-free two-grid solver.")
    sub = ap.add_subparsers(dest="cmd", required=True)
    for name in ("convergence", "cycles", "history", "residual-vs-error",
                 "equivalence", "model"):
        _add_common(sub.add_parser(name))
    return ap


def main(argv=None):
    args = make_parser().parse_args(argv)
    out = args.out
    if args.cmd == "convergence":
        p_list = args.p or [1, 2, 3]
        levels = args.levels or [2, 3, 4]
        problem = args.problem or "sin_product"
        rows, slopes = run_convergence_study(
            p_list, levels, problem, args.basis, args.theta, args.penalty,
            out=out, cli=args)
        for r in slopes:
            print(f"p={r[2]}: slope_l2={r[3]:.3f} slope_linf={r[4]:.3f}")
    elif args.cmd == "cycles":
        rows = run_cycle_count_table(
            args.p or (2, 3, 4, 5, 6), args.levels or (2, 3, 4, 5),
            args.problem or "two_peak", args.criterion or "prec",
            args.basis, args.theta, args.penalty, out=out, cli=args)
        for r in rows:
            ref = f" ref={r[8]}" if r[8] != "" else ""
            print(f"L{r[3]} ({r[4]}x{r[4]}) p={r[5]}: {r[6]} cycles{ref}")
    elif args.cmd == "history":
        p = (args.p or [2])[0]
        level = (args.levels or [3])[0]
        sm_rows, paths = run_residual_history(
            args.problem or "two_peak", p, level, args.basis, args.theta,
            args.penalty, out=out, cli=args)
        print(f"smoother sweeps recorded: {len(sm_rows)} "
              f"(final rel_res={sm_rows[-1][3]:.3e}); outputs: "
              + ", ".join(os.path.basename(q) for q in paths))
    elif args.cmd == "residual-vs-error":
        rows = run_residual_vs_error(
            args.p or (2, 3), args.levels or (2, 3, 4), args.basis,
            args.theta, args.penalty, out=out, cli=args)
        for r in rows:
            print(f"p={r[0]} L{r[1]}: cycles={r[3]} rel_err={r[5]:.2e} "
                  f"rel_prec={r[6]:.2e} rel_unprec={r[7]:.2e}")
    elif args.cmd == "equivalence":
        p = (args.p or [3])[0]
        level = (args.levels or [3])[0]
        partitions = ([args.partition] if args.partition
                      else ["balanced", "geometric"])
        workers = sorted({1, args.workers})
        rows, counter_rows, all_ok = run_equivalence_suite(
            p, level, args.problem or "two_peak", args.basis, args.theta,
            args.penalty, subdomains=tuple(args.subdomains or (1, 2, 4, 8)),
            partitions=tuple(partitions), workers=tuple(workers),
            seed=args.seed, out=out, cli=args)
        nbit = sum(1 for r in rows if r[7])
        print(f"iterate checks: {len(rows)} ({nbit} bitwise), "
              f"counter checks: {len(counter_rows)}, "
              f"{'all passed' if all_ok else 'FAILURES'}")
        if not all_ok:
            return 1
    elif args.cmd == "model":
        rows = run_model_table(out=out)
        print(f"wrote {len(rows)} model rows")
    return 0


if __name__ == "__main__":
    sys.exit(main())
