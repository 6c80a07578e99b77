"""Nodal 1D polynomial bases on [0, 1] and their reference matrices.

Shape functions are Lagrange cardinal polynomials over either Gauss-Lobatto
or Gauss-Legendre nodes.  All integrals are evaluated with a Gauss-Legendre
rule of p+2 points, which is exact for degree 2p+3 and therefore for every
mass, stiffness and trace-times-flux integrand that shows up downstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_DEGREE = 9


class BasisError(ValueError):
    pass


def _legendre_and_deriv(n, x):
    """Evaluate P_n and P_n' on [-1, 1] by the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    p0 = np.ones_like(x)
    if n == 0:
        return p0, np.zeros_like(x)
    p1 = x
    for k in range(1, n):
        p0, p1 = p1, ((2 * k + 1) * x * p1 - k * p0) / (k + 1)
    dp = n * (x * p1 - p0) / (x * x - 1.0)
    return p1, dp


def _gauss_legendre_nodes(n):
    """Roots of P_n on [-1, 1] via Newton from Chebyshev initial guesses."""
    if n == 1:
        return np.array([0.0])
    if n == 2:
        c = 1.0 / np.sqrt(3.0)
        return np.array([-c, c])
    x = np.cos(np.pi * (4 * np.arange(n) + 3) / (4 * n + 2))
    for _ in range(100):
        p, dp = _legendre_and_deriv(n, x)
        dx = p / dp
        x -= dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    return np.sort(x)


def _gauss_lobatto_nodes(n):
    """n Lobatto points on [-1, 1]: endpoints plus the roots of P'_{n-1}."""
    if n == 2:
        return np.array([-1.0, 1.0])
    if n == 3:
        return np.array([-1.0, 0.0, 1.0])
    m = n - 1
    # interior nodes: Newton on P'_m, started from Chebyshev-Lobatto points
    x = np.cos(np.pi * np.arange(1, m) / m)
    for _ in range(100):
        p, dp = _legendre_and_deriv(m, x)
        # P''_m from the Legendre ODE: (1-x^2) P'' = 2x P' - m(m+1) P
        ddp = (2 * x * dp - m * (m + 1) * p) / (1.0 - x * x)
        dx = dp / ddp
        x -= dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    return np.concatenate(([-1.0], np.sort(x), [1.0]))


def _gauss_quadrature01(n):
    """n-point Gauss-Legendre rule mapped to [0, 1]."""
    x = _gauss_legendre_nodes(n)
    _, dp = _legendre_and_deriv(n, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    return 0.5 * (x + 1.0), 0.5 * w


@dataclass
class NodalBasis1D:
    """Lagrange basis over p+1 nodes in [0, 1] plus its assembly quadrature."""

    kind: str
    p: int
    nodes: np.ndarray
    bary: np.ndarray      # barycentric weights
    quad_x: np.ndarray    # p+2 Gauss-Legendre points on [0, 1]
    quad_w: np.ndarray

    @property
    def n(self):
        return self.p + 1

    def eval(self, x):
        """Cardinal function values; returns shape (len(x), p+1)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty((x.size, self.n))
        for r, xv in enumerate(x):
            d = xv - self.nodes
            hit = np.abs(d) < 1e-14
            if hit.any():
                row = np.zeros(self.n)
                row[np.argmax(hit)] = 1.0
            else:
                q = self.bary / d
                row = q / q.sum()
            out[r] = row
        return out

    def eval_deriv(self, x):
        """Cardinal derivative values; returns shape (len(x), p+1)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        D = self.diff_matrix()
        out = np.empty((x.size, self.n))
        for r, xv in enumerate(x):
            d = xv - self.nodes
            hit = np.abs(d) < 1e-14
            if hit.any():
                out[r] = D[np.argmax(hit)]
                continue
            q = self.bary / d
            s = q.sum()
            qp = -q / d
            sp = qp.sum()
            out[r] = (qp * s - q * sp) / (s * s)
        return out

    def diff_matrix(self):
        """D[i, j] = l_j'(node_i)."""
        n = self.n
        D = np.zeros((n, n))
        for i in range(n):
            for j in range(n):
                if i != j:
                    D[i, j] = (self.bary[j] / self.bary[i]) / (self.nodes[i] - self.nodes[j])
            D[i, i] = -D[i].sum() + 2 * D[i, i]  # row sum zero
        return D


def make_basis(kind, p):
    if not 1 <= p <= MAX_DEGREE:
        raise BasisError(f"polynomial degree must be in [1, {MAX_DEGREE}], got {p}")
    if kind == "lobatto":
        nodes = 0.5 * (_gauss_lobatto_nodes(p + 1) + 1.0)
    elif kind == "legendre":
        nodes = 0.5 * (_gauss_legendre_nodes(p + 1) + 1.0)
    else:
        raise BasisError(f"unknown basis kind {kind!r} (want 'lobatto' or 'legendre')")
    diffs = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diffs, 1.0)
    bary = 1.0 / diffs.prod(axis=1)
    qx, qw = _gauss_quadrature01(p + 2)
    return NodalBasis1D(kind=kind, p=p, nodes=nodes, bary=bary, quad_x=qx, quad_w=qw)


@dataclass
class Ref1DMatrices:
    """1D building blocks on an interval of length h.

    mass       M[i,j]  = int l_i l_j
    stiffness  K[i,j]  = int l_i' l_j'
    e0, e1     traces      l_i(0), l_i(h)
    g0, g1     derivatives l_i'(0), l_i'(h)
    """

    h: float
    mass: np.ndarray
    stiffness: np.ndarray
    e0: np.ndarray
    e1: np.ndarray
    g0: np.ndarray
    g1: np.ndarray


def ref_matrices(basis, h=1.0):
    """Assemble the 1D reference matrices on [0, h] by quadrature."""
    if h <= 0:
        raise BasisError(f"interval length must be positive, got {h}")
    E = basis.eval(basis.quad_x)          # values at reference quad points
    Ed = basis.eval_deriv(basis.quad_x) / h
    w = basis.quad_w * h
    M = E.T @ (w[:, None] * E)
    K = Ed.T @ (w[:, None] * Ed)
    M = 0.5 * (M + M.T)
    K = 0.5 * (K + K.T)
    e0 = basis.eval(0.0)[0]
    e1 = basis.eval(1.0)[0]
    g0 = basis.eval_deriv(0.0)[0] / h
    g1 = basis.eval_deriv(1.0)[0] / h
    return Ref1DMatrices(h=h, mass=M, stiffness=K, e0=e0, e1=e1, g0=g0, g1=g1)
