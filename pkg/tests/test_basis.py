import numpy as np
import pytest

from hpmg import BasisError, make_basis, ref_matrices

ALL_KINDS = ("lobatto", "legendre")


def test_legendre_nodes_match_gauss_rule():
    for p in range(1, 10):
        basis = make_basis("legendre", p)
        x, _ = np.polynomial.legendre.leggauss(p + 1)
        np.testing.assert_allclose(basis.nodes, (x + 1.0) / 2.0, atol=1e-14)


def test_lobatto_nodes_small_degrees():
    np.testing.assert_allclose(make_basis("lobatto", 1).nodes, [0.0, 1.0],
                               atol=1e-15)
    np.testing.assert_allclose(make_basis("lobatto", 2).nodes, [0.0, 0.5, 1.0],
                               atol=1e-14)
    # endpoints are exact for every degree
    for p in range(1, 10):
        nodes = make_basis("lobatto", p).nodes
        assert nodes[0] == 0.0 and nodes[-1] == 1.0


def test_legendre_p1_nodes_closed_form():
    want = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
    np.testing.assert_allclose(make_basis("legendre", 1).nodes, want,
                               atol=1e-15)


@pytest.mark.parametrize("kind", ALL_KINDS)
@pytest.mark.parametrize("p", [1, 2, 3, 5, 9])
def test_node_ordering_and_interior(kind, p):
    nodes = make_basis(kind, p).nodes
    assert np.all(np.diff(nodes) > 0)
    if kind == "legendre":
        assert nodes[0] > 0.0 and nodes[-1] < 1.0


@pytest.mark.parametrize("kind", ALL_KINDS)
@pytest.mark.parametrize("p", [1, 2, 4, 7])
def test_lagrange_cardinality(kind, p):
    basis = make_basis(kind, p)
    np.testing.assert_allclose(basis.eval(basis.nodes), np.eye(p + 1),
                               atol=1e-12)


@pytest.mark.parametrize("kind", ALL_KINDS)
@pytest.mark.parametrize("p", [1, 3, 6])
def test_partition_of_unity(kind, p, rng):
    basis = make_basis(kind, p)
    x = rng.uniform(0.0, 1.0, size=20)
    np.testing.assert_allclose(basis.eval(x).sum(axis=1), np.ones(20),
                               atol=1e-12)


@pytest.mark.parametrize("kind", ALL_KINDS)
@pytest.mark.parametrize("p", [1, 2, 3, 5, 9])
def test_quadrature_monomial_exactness(kind, p):
    basis = make_basis(kind, p)
    for k in range(2 * p + 1):
        got = np.sum(basis.quad_w * basis.quad_x ** k)
        assert abs(got - 1.0 / (k + 1)) < 1e-12, (k, got)


@pytest.mark.parametrize("kind", ALL_KINDS)
@pytest.mark.parametrize("p", [1, 2, 4, 7])
def test_endpoint_derivative_vectors_exact_on_monomials(kind, p):
    # g0.q and g1.q must reproduce q'(0) and q'(1) for every q in the space
    basis = make_basis(kind, p)
    r = ref_matrices(basis, 1.0)
    for k in range(p + 1):
        q = basis.nodes ** k
        d0 = 1.0 if k == 1 else 0.0
        d1 = float(k)
        assert abs(r.g0 @ q - d0) < 1e-10
        assert abs(r.g1 @ q - d1) < 1e-10


def test_ref_matrices_p1_exact_values():
    r = ref_matrices(make_basis("lobatto", 1), 1.0)
    np.testing.assert_allclose(
        r.mass, [[1 / 3, 1 / 6], [1 / 6, 1 / 3]], atol=1e-15)
    np.testing.assert_allclose(
        r.stiffness, [[1.0, -1.0], [-1.0, 1.0]], atol=1e-14)
    np.testing.assert_allclose(r.e0, [1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(r.e1, [0.0, 1.0], atol=1e-15)


def test_ref_matrices_h_scaling():
    h = 1.0 / 3.0
    r1 = ref_matrices(make_basis("lobatto", 2), 1.0)
    rh = ref_matrices(make_basis("lobatto", 2), h)
    np.testing.assert_allclose(rh.mass, h * r1.mass, atol=1e-15)
    np.testing.assert_allclose(rh.stiffness, r1.stiffness / h, atol=1e-13)
    np.testing.assert_allclose(rh.g0, r1.g0 / h, atol=1e-12)


@pytest.mark.parametrize("kind", ALL_KINDS)
@pytest.mark.parametrize("p", [1, 2, 4, 6])
def test_mass_spd_stiffness_psd(kind, p):
    r = ref_matrices(make_basis(kind, p), 1.0)
    np.testing.assert_allclose(r.mass, r.mass.T, atol=0.0)
    np.testing.assert_allclose(r.stiffness, r.stiffness.T, atol=0.0)
    assert np.linalg.eigvalsh(r.mass).min() > 0.0
    ev = np.linalg.eigvalsh(r.stiffness)
    assert ev.min() > -1e-12
    ones = np.ones(p + 1)
    np.testing.assert_allclose(r.stiffness @ ones, np.zeros(p + 1), atol=1e-12)


def test_legendre_mass_diagonal_equals_node_weights():
    for p in (1, 2, 3, 5):
        r = ref_matrices(make_basis("legendre", p), 1.0)
        off = r.mass - np.diag(np.diag(r.mass))
        assert np.max(np.abs(off)) < 1e-14
        _, w = np.polynomial.legendre.leggauss(p + 1)
        np.testing.assert_allclose(np.diag(r.mass), w / 2.0, atol=1e-14)


def test_lobatto_endpoint_vectors_are_units():
    for p in (1, 2, 3, 6):
        r = ref_matrices(make_basis("lobatto", p), 1.0)
        e = np.zeros(p + 1)
        e[0] = 1.0
        np.testing.assert_allclose(r.e0, e, atol=1e-13)
        np.testing.assert_allclose(r.e1, e[::-1], atol=1e-13)


def test_rejects_unsupported_inputs():
    with pytest.raises(BasisError):
        make_basis("lobatto", 0)
    with pytest.raises(BasisError):
        make_basis("lobatto", 10)
    with pytest.raises(BasisError):
        make_basis("chebyshev", 2)
    with pytest.raises(BasisError):
        ref_matrices(make_basis("lobatto", 2), 0.0)
    with pytest.raises(BasisError):
        ref_matrices(make_basis("lobatto", 2), -1.0)
