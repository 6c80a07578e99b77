"""Geometric hp-multigrid on the condensed cell system.

One p-coarsening step maps the element polynomial space onto continuous
bilinears on the same mesh: the vertex hat functions are a subspace of
every p >= 1 space, their inter-element jumps vanish, so the Galerkin
coarse operator is the plain bilinear finite-element stiffness, applied
as an assembled 9-point vertex stencil.  The h-hierarchy then coarsens
the vertex grids by threes down to the 3x3-cell base mesh with nested
bilinear transfers.

Traversal accounting with the one-traversal smoother: one warm-up
projection traversal, then per cycle nu smoothing traversals, one
residual traversal that also restricts, and one prolongation traversal
that materialises the correction at the start of the following cycle
(re-projecting the updated cells) or, for the last correction, after the
final cycle.  A run of n cycles touches the mesh n*(nu+2)+1 times.

Stopping is either on the residual recorded in the restriction traversal
(criterion "unprec", no extra work) or on the difference of consecutive
cycle iterates, available when a correction is materialised (criterion
"prec"); both are relative to their first recorded value, the residual
one to the residual of the initial guess.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import CellField, exchange_interface, fmt_float
from .localops import build_coarse_ops
from .smoother import SWEEPS, compute_residual_only, make_state


class MgError(RuntimeError):
    pass


class CoarseSolveError(MgError):
    pass


# traversals of the fine mesh per smoother sweep / residual evaluation
_SWEEP_COST = {"vanilla": 1, "stages": 3, "fused": 1, "tasked": 1}


@dataclass
class MgConfig:
    nu: int = 2
    omega: float = 0.9
    eps: float = 1e-7
    max_cycles: int = 200
    criterion: str = "prec"        # prec | unprec | error
    coarse: str = "vcycle"         # vcycle | exact
    nu_coarse: tuple = (3, 3)
    omega_coarse: float = 0.6
    coarsest_sweeps: int = 100
    coarse_tol: float = 1e-14
    coarse_max_cycles: int = 400
    variant: str = "fused"
    inverse_mode: str = "precomputed"
    workers: int = 1

    def validate(self):
        if self.criterion not in ("prec", "unprec", "error"):
            raise MgError(f"unknown stopping criterion {self.criterion!r}")
        if self.coarse not in ("exact", "vcycle"):
            raise MgError(f"unknown coarse solve mode {self.coarse!r}")
        if self.nu < 1:
            raise MgError("need at least one smoothing sweep per cycle")


@dataclass
class CoarseLevel:
    n: int                  # cells per direction
    h: float
    stencil: np.ndarray
    diag: float
    interior: np.ndarray    # (n+1, n+1) bool
    W: np.ndarray           # 1d interpolation from the next coarser level


@dataclass
class CoarseSpace:
    dim: int
    levels: list            # finest first, down to the 3x3-cell base

    # -- vertex-grid kernels ------------------------------------------------

    def apply_stiffness(self, li, U):
        """9-point stencil with eliminated Dirichlet rows."""
        st = self.levels[li].stencil
        P = np.pad(U, 1)
        R = np.zeros_like(U)
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                w = st[di + 1, dj + 1]
                R += w * P[1 + di:P.shape[0] - 1 + di, 1 + dj:P.shape[1] - 1 + dj]
        R[~self.levels[li].interior] = 0.0
        return R

    def jacobi(self, li, U, B, omega, nsweeps):
        lev = self.levels[li]
        for _ in range(nsweeps):
            R = B - self.apply_stiffness(li, U)
            U = U + (omega / lev.diag) * np.where(lev.interior, R, 0.0)
        return U

    def restrict(self, li, R):
        """Full weighting (transpose of bilinear interpolation) to li+1."""
        W = self.levels[li].W
        C = W.T @ R @ W
        C[~self.levels[li + 1].interior] = 0.0
        return C

    def prolong(self, li, C):
        W = self.levels[li].W
        return W @ C @ W.T


def build_coarse_space(dim, level):
    if dim != 2:
        raise MgError("vertex-grid hierarchy is implemented for dim == 2")
    levels = []
    for l in range(level, 0, -1):
        n = 3 ** l
        ops = build_coarse_ops(dim, 3.0 ** -l)
        vb = np.zeros((n + 1, n + 1), dtype=bool)
        vb[0, :] = vb[-1, :] = vb[:, 0] = vb[:, -1] = True
        if l > 1:
            nc = 3 ** (l - 1)
            W = np.zeros((n + 1, nc + 1))
            for q in range(n + 1):
                c, r = divmod(q, 3)
                if r == 0:
                    W[q, c] = 1.0
                else:
                    W[q, c] = 1.0 - r / 3.0
                    W[q, c + 1] = r / 3.0
        else:
            W = None
        levels.append(CoarseLevel(n=n, h=ops.h, stencil=ops.stencil,
                                  diag=ops.diag, interior=~vb, W=W))
    return CoarseSpace(dim=dim, levels=levels)


def h_vcycle(cspace, li, B, nu_pre=3, nu_post=3, omega=0.6,
             coarsest_sweeps=100):
    """One V-cycle from a zero initial guess on vertex level li."""
    if li == len(cspace.levels) - 1:
        return cspace.jacobi(li, np.zeros_like(B), B, omega, coarsest_sweeps)
    U = cspace.jacobi(li, np.zeros_like(B), B, omega, nu_pre)
    R = B - cspace.apply_stiffness(li, U)
    R[~cspace.levels[li].interior] = 0.0
    C = cspace.restrict(li, R)
    E = h_vcycle(cspace, li + 1, C, nu_pre, nu_post, omega, coarsest_sweeps)
    U = U + cspace.prolong(li, E)
    U[~cspace.levels[li].interior] = 0.0
    return cspace.jacobi(li, U, B, omega, nu_post)


def coarse_solve(cspace, B, cfg):
    """Vertex-level solve: a single V-cycle, or V-cycles iterated to
    rounding ("exact" mode).

    The exact mode accepts a stall slightly above the nominal tolerance
    when the iteration has hit its rounding plateau (no progress over
    three cycles below 1e-12 relative); anything worse is an error.
    """
    pre, post = cfg.nu_coarse
    if cfg.coarse == "vcycle":
        return h_vcycle(cspace, 0, B, pre, post, cfg.omega_coarse,
                        cfg.coarsest_sweeps)
    b_inf = np.max(np.abs(B))
    if b_inf == 0.0:
        return np.zeros_like(B)
    U = np.zeros_like(B)
    best, stalled = np.inf, 0
    for it in range(cfg.coarse_max_cycles):
        R = B - cspace.apply_stiffness(0, U)
        R[~cspace.levels[0].interior] = 0.0
        r_inf = np.max(np.abs(R))
        if r_inf <= cfg.coarse_tol * b_inf:
            return U
        if r_inf < 0.5 * best:
            best, stalled = r_inf, 0
        else:
            stalled += 1
            if stalled >= 3:
                if r_inf <= 1e-12 * b_inf:
                    return U
                raise CoarseSolveError(
                    f"coarse vertex solve stalled at relative residual "
                    f"{r_inf / b_inf:.3e}")
        if r_inf > 1e3 * b_inf:
            raise CoarseSolveError("coarse vertex solve is diverging")
        U = U + h_vcycle(cspace, 0, R, pre, post, cfg.omega_coarse,
                         cfg.coarsest_sweeps)
    raise CoarseSolveError(
        f"coarse vertex solve did not reach {cfg.coarse_tol:g} in "
        f"{cfg.coarse_max_cycles} V-cycles")


# -- transfers between the cell system and the vertex grid --------------------

def restrict_to_vertices(mesh, blocks, R):
    """Accumulate P^T r over cells; Dirichlet vertices are masked out.

    The accumulation runs in global cell order whatever the partition,
    so the result is bitwise independent of the subdomain layout.
    """
    contrib = np.einsum("ci,ib->cb", R, blocks.P_loc)
    bV = np.zeros(mesh.nvertices)
    np.add.at(bV, mesh.cell_vertices, contrib)
    bV[mesh.vertex_boundary] = 0.0
    n = mesh.n
    return bV.reshape(n + 1, n + 1)

def prolong_from_vertices(mesh, blocks, E):
    corner = E.reshape(-1)[mesh.cell_vertices]
    return np.einsum("cb,ib->ci", corner, blocks.P_loc)


def coarse_grid_correction(mesh, blocks, cspace, R, cfg):
    """Residual rows -> vertex load -> solve -> prolonged correction rows."""
    bV = restrict_to_vertices(mesh, blocks, R)
    eV = coarse_solve(cspace, bV, cfg)
    return prolong_from_vertices(mesh, blocks, eV), eV


# -- the solver ----------------------------------------------------------------

@dataclass
class CycleTrace:
    """Per-cycle history of one multigrid run."""

    eps: float
    criterion: str
    cycles: int = 0
    traversals: int = 0
    converged: bool = False
    r0_l2: float = 0.0
    r0_linf: float = 0.0
    res_l2: list = field(default_factory=list)
    res_linf: list = field(default_factory=list)
    prec_l2: list = field(default_factory=list)
    prec_linf: list = field(default_factory=list)
    e0_l2: float = 0.0
    e0_linf: float = 0.0
    err_l2: list = field(default_factory=list)
    err_linf: list = field(default_factory=list)

    def rel_res(self):
        d = self.r0_l2 if self.r0_l2 > 0 else 1.0
        return [r / d for r in self.res_l2]

    def rel_prec(self):
        if not self.prec_l2:
            return []
        d = self.prec_l2[0] if self.prec_l2[0] > 0 else 1.0
        return [r / d for r in self.prec_l2]

    def rel_err(self):
        d = self.e0_l2 if self.e0_l2 > 0 else 1.0
        return [e / d for e in self.err_l2]

    def to_csv(self, path):
        rel_r, rel_p = self.rel_res(), self.rel_prec()
        cols = "cycle,res_l2,res_linf,rel_res_l2,prec_l2,prec_linf,rel_prec_l2"
        rel_e = self.rel_err() if self.err_l2 else None
        if rel_e is not None:
            cols += ",err_l2,err_linf,rel_err_l2"
        with open(path, "w") as fh:
            fh.write(cols + "\n")
            for i in range(len(self.res_l2)):
                p2 = self.prec_l2[i] if i < len(self.prec_l2) else float("nan")
                pi = self.prec_linf[i] if i < len(self.prec_linf) else float("nan")
                rp = rel_p[i] if i < len(rel_p) else float("nan")
                row = [str(i + 1), fmt_float(self.res_l2[i]),
                       fmt_float(self.res_linf[i]),
                       fmt_float(rel_r[i]), fmt_float(p2),
                       fmt_float(pi), fmt_float(rp)]
                if rel_e is not None:
                    e2 = self.err_l2[i] if i < len(self.err_l2) else float("nan")
                    ei = self.err_linf[i] if i < len(self.err_linf) else float("nan")
                    re = rel_e[i] if i < len(rel_e) else float("nan")
                    row += [fmt_float(e2), fmt_float(ei), fmt_float(re)]
                fh.write(",".join(row) + "\n")


@dataclass
class MgResult:
    u: CellField
    trace: CycleTrace
    counters: object


def _norms(data):
    flat = data.reshape(-1)
    if flat.size == 0:
        return 0.0, 0.0
    return float(np.linalg.norm(flat)), float(np.max(np.abs(flat)))


def solve(mesh, basis, blocks, b, cfg=None, partition=None, u0=None,
          cspace=None, u_ref=None):
    """Run multigrid cycles on A u = b until the configured criterion or
    the cycle cap; returns the iterate, the trace and the access counters.

    With criterion="error" the run stops once the dof-vector distance to
    u_ref (zeros when omitted) has dropped by eps relative to the initial
    guess; the per-cycle error history is recorded on the trace."""
    cfg = cfg or MgConfig()
    cfg.validate()
    if cspace is None:
        cspace = build_coarse_space(mesh.dim, mesh.level)
    state = make_state(mesh, basis, blocks, b, partition=partition,
                       omega=cfg.omega, variant=cfg.variant,
                       inverse_mode=cfg.inverse_mode, workers=cfg.workers,
                       u0=u0)
    sweep_fn = SWEEPS[cfg.variant]
    sweep_cost = _SWEEP_COST[cfg.variant]
    trace = CycleTrace(eps=cfg.eps, criterion=cfg.criterion)

    ref = None
    if cfg.criterion == "error":
        ref = np.zeros_like(state.u.data) if u_ref is None else np.asarray(u_ref)
        ref = ref.reshape(state.u.data.shape)
        trace.e0_l2, trace.e0_linf = _norms(state.u.data - ref)
        if trace.e0_l2 == 0.0:
            trace.converged = True
            state.close()
            return MgResult(state.u, trace, state.counters)

    if u0 is None or not np.any(state.u.data):
        trace.r0_l2, trace.r0_linf = _norms(state.b.data)
        if trace.r0_l2 == 0.0:
            trace.converged = True
            state.close()
            return MgResult(state.u, trace, state.counters)
        state.warm_up()
        trace.traversals += 1
    else:
        state.warm_up()
        trace.traversals += 1
        r = compute_residual_only(state)
        trace.traversals += 1
        trace.r0_l2, trace.r0_linf = _norms(r.data)
        if trace.r0_l2 == 0.0:
            trace.converged = True
            state.close()
            return MgResult(state.u, trace, state.counters)

    snapshot = state.u.data.copy()
    pending = None
    k = 0
    while k < cfg.max_cycles:
        if pending is not None:
            # prolongation traversal of correction k, fused with the
            # re-projection that the next cycle's smoothing consumes
            state.u.data += pending
            for part in range(state.partition.nparts):
                lo, hi = state.partition.cell_range(part)
                state._project_range(part, lo, hi)
            exchange_interface(state.proj, state.partition)
            state.respawn_tasks()
            trace.traversals += 1
            pending = None
            diff = state.u.data - snapshot
            snapshot = state.u.data.copy()
            d2, di = _norms(diff)
            trace.prec_l2.append(d2)
            trace.prec_linf.append(di)
            if (cfg.criterion == "prec" and len(trace.prec_l2) >= 2
                    and trace.prec_l2[0] > 0
                    and d2 <= cfg.eps * trace.prec_l2[0]):
                trace.converged = True
                break
            if ref is not None:
                e2, ei = _norms(state.u.data - ref)
                trace.err_l2.append(e2)
                trace.err_linf.append(ei)
                if e2 <= cfg.eps * trace.e0_l2:
                    trace.converged = True
                    break
        k += 1
        for _ in range(cfg.nu):
            sweep_fn(state)
            trace.traversals += sweep_cost
        was_warm = state.warm
        r = compute_residual_only(state)
        trace.traversals += 1 if was_warm else 2
        r2, ri = _norms(r.data)
        trace.res_l2.append(r2)
        trace.res_linf.append(ri)
        trace.cycles = k
        if cfg.criterion == "unprec" and r2 <= cfg.eps * trace.r0_l2:
            trace.converged = True
            break
        delta, _ = coarse_grid_correction(mesh, blocks, cspace, r.data, cfg)
        pending = delta
    if pending is not None:
        # final prolongation traversal, nothing left to re-project for
        state.u.data += pending
        state.warm = False
        trace.traversals += 1
        diff = state.u.data - snapshot
        d2, di = _norms(diff)
        trace.prec_l2.append(d2)
        trace.prec_linf.append(di)
        if (cfg.criterion == "prec" and len(trace.prec_l2) >= 2
                and trace.prec_l2[0] > 0
                and d2 <= cfg.eps * trace.prec_l2[0]):
            trace.converged = True
        if ref is not None:
            e2, ei = _norms(state.u.data - ref)
            trace.err_l2.append(e2)
            trace.err_linf.append(ei)
            if e2 <= cfg.eps * trace.e0_l2:
                trace.converged = True
    state.close()
    return MgResult(state.u, trace, state.counters)
