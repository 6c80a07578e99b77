import numpy as np
import pytest

from hpmg import (
    CellField,
    SmootherError,
    apply_operator,
    build_rhs,
    get_problem,
    make_partition,
    make_state,
    memory_access_model,
    norm,
    sweep,
)
from hpmg.fields import DER, VAL
from hpmg.smoother import compute_residual_only, sweep_fused, sweep_tasked

from conftest import blocks_for, rng  # noqa: F401
from oracles import blocks_global, jacobi_iteration_dense


def _random_setup(kind="lobatto", p=2, level=1, seed=3, **kw):
    mesh, basis, blocks = blocks_for(kind, p, level)
    gen = np.random.default_rng(seed)
    b = CellField(gen.normal(size=(mesh.ncells, blocks.nloc)))
    st = make_state(mesh, basis, blocks, b, **kw)
    return mesh, basis, blocks, b, st


def _run(st, nsweeps):
    if st.variant in ("fused", "tasked"):
        st.warm_up()
    for _ in range(nsweeps):
        sweep(st)
    st.close()
    return st.u.data.copy()


ALL_VARIANTS = ("vanilla", "stages", "fused", "tasked")


@pytest.mark.parametrize("variant", ALL_VARIANTS)
def test_sweep_matches_dense_block_jacobi(variant):
    # oracle: dense residual, the same interior block inverse on every cell
    mesh, basis, blocks, b, st = _random_setup(variant=variant, omega=1.0)
    A = blocks_global(mesh, blocks)
    want = jacobi_iteration_dense(A, blocks.Sinv, 1.0,
                                  np.zeros(A.shape[0]), b.data.reshape(-1),
                                  nsteps=3)
    got = _run(st, 3).reshape(-1)
    assert np.max(np.abs(got - want)) < 1e-11 * max(1.0, np.max(np.abs(want)))


@pytest.mark.parametrize("variant", ALL_VARIANTS)
def test_fixed_point_is_left_alone(variant):
    mesh, basis, blocks, b, st = _random_setup(variant=variant, omega=0.9)
    A = blocks_global(mesh, blocks)
    ustar = np.linalg.solve(A, b.data.reshape(-1))
    st.set_solution(ustar.reshape(mesh.ncells, blocks.nloc))
    got = _run(st, 2)
    assert np.max(np.abs(got.reshape(-1) - ustar)) < 1e-12 * np.max(np.abs(ustar))


def test_zero_relaxation_changes_nothing(rng):
    mesh, basis, blocks, b, st = _random_setup(variant="fused", omega=0.0)
    u0 = rng.normal(size=(mesh.ncells, blocks.nloc))
    st.set_solution(u0)
    got = _run(st, 3)
    np.testing.assert_array_equal(got, u0)


def test_variants_agree_to_machine_precision():
    results = {}
    for variant in ALL_VARIANTS:
        *_, st = _random_setup(kind="lobatto", p=3, level=1,
                               variant=variant, omega=0.9)
        results[variant] = _run(st, 10)
    base = results["fused"]
    scale = np.max(np.abs(base))
    for variant in ALL_VARIANTS:
        assert np.max(np.abs(results[variant] - base)) < 1e-12 * scale, variant
    # the staged and deferred forms replay the exact fused arithmetic
    np.testing.assert_array_equal(results["stages"], base)
    np.testing.assert_array_equal(results["tasked"], base)


def test_percell_inverse_is_bitwise_equal():
    *_, st_pre = _random_setup(variant="fused", inverse_mode="precomputed")
    *_, st_per = _random_setup(variant="fused", inverse_mode="percell")
    np.testing.assert_array_equal(_run(st_pre, 5), _run(st_per, 5))


def test_partition_and_worker_invariance():
    mesh, basis, blocks, b, _ = _random_setup(level=2)
    runs = []
    for mode, nparts in (("balanced", 1), ("balanced", 4), ("geometric", 3)):
        part = make_partition(mesh, mode, nparts)
        st = make_state(mesh, basis, blocks, b, partition=part,
                        variant="fused", omega=0.9)
        runs.append(_run(st, 6))
    for w in (1, 4):
        st = make_state(mesh, basis, blocks, b, variant="tasked",
                        omega=0.9, workers=w)
        runs.append(_run(st, 6))
    for other in runs[1:]:
        np.testing.assert_array_equal(other, runs[0])


def test_vanilla_counter_matches_model():
    for p in (1, 3):
        mesh, basis, blocks, b, st = _random_setup(p=p, variant="vanilla")
        n = 4
        _run(st, n)
        per_cell = st.counters.volumetric() / (n * mesh.ncells)
        assert per_cell == memory_access_model("vanilla", 2, p)
        assert st.counters.total() == st.counters.volumetric()
        assert st.counters.sweeps == n


def test_fused_counter_matches_model():
    from hpmg.bench import predicted_total_accesses

    for p in (1, 2, 4):
        mesh, basis, blocks, b, st = _random_setup(p=p, level=2,
                                                   variant="fused")
        st.warm_up()
        st.counters.reset()
        sweep(st)
        assert st.counters.volumetric() == 3 * mesh.ncells * blocks.nloc
        assert st.counters.total() == predicted_total_accesses(mesh, p, "fused")
        st.close()


def test_standalone_tracking_adds_two_blocks():
    from hpmg.bench import predicted_total_accesses

    p = 2
    mesh, basis, blocks, b, st = _random_setup(p=p, variant="fused",
                                               track_old=True)
    st.warm_up()
    st.counters.reset()
    sweep(st)
    assert st.counters.volumetric() == 5 * mesh.ncells * blocks.nloc
    assert st.counters.total() == predicted_total_accesses(
        mesh, p, "fused_standalone")
    st.close()


def test_tasked_counters_count_tasks():
    mesh, basis, blocks, b, st = _random_setup(variant="tasked")
    st.warm_up()
    assert st.counters.tasks_spawned == mesh.ncells
    n = 3
    for _ in range(n):
        sweep(st)
    st.close()
    assert st.counters.tasks_executed == n * mesh.ncells
    assert st.counters.tasks_spawned == (n + 1) * mesh.ncells


def test_constant_state_produces_zero_interior_value_flux():
    mesh, basis, blocks, b, st = _random_setup(variant="stages")
    st.set_solution(np.full((mesh.ncells, blocks.nloc), 2.5))
    sweep(st)
    interior = ~mesh.facet_boundary
    fl = st.flux[0].data
    # signed value traces of the two sides cancel in the average
    assert np.max(np.abs(fl[interior, VAL])) < 1e-14
    assert np.max(np.abs(fl[interior, DER])) < 1e-12
    # boundary facets copy the one-sided trace of the constant
    np.testing.assert_allclose(fl[mesh.facet_boundary, VAL], 2.5, atol=1e-14)


def test_boundary_flux_is_one_sided_copy():
    mesh, basis, blocks, b, st = _random_setup(variant="stages", seed=11)
    st.set_solution(np.random.default_rng(5).normal(
        size=(mesh.ncells, blocks.nloc)))
    sweep(st)
    pr, fl = st.proj[0].data, st.flux[0].data
    for f in np.where(mesh.facet_boundary)[0]:
        np.testing.assert_array_equal(fl[f], pr[f, 0])


def test_cold_fused_and_tasked_refuse_to_run():
    *_, st = _random_setup(variant="fused")
    with pytest.raises(SmootherError, match="warm_up"):
        sweep_fused(st)
    *_, st = _random_setup(variant="tasked")
    with pytest.raises(SmootherError, match="warm_up"):
        sweep_tasked(st)
    st.close()


def test_tasked_guards_against_lost_tasks():
    *_, st = _random_setup(variant="tasked")
    st.warm_up()
    st._pending_res.clear()
    with pytest.raises(SmootherError, match="never spawned"):
        sweep(st)
    st.close()


def test_residual_only_routes():
    mesh, basis, blocks, b, st = _random_setup(variant="stages")
    # u = 0: the residual is the right-hand side itself
    r = compute_residual_only(st)
    np.testing.assert_array_equal(r.data, b.data)
    # generic u: dense oracle
    gen = np.random.default_rng(1)
    u = gen.normal(size=(mesh.ncells, blocks.nloc))
    st.set_solution(u)
    r = compute_residual_only(st)
    A = blocks_global(mesh, blocks)
    want = b.data.reshape(-1) - A @ u.reshape(-1)
    assert np.max(np.abs(r.data.reshape(-1) - want)) < 1e-10
    # at the solve the residual vanishes
    st.set_solution(np.linalg.solve(A, b.data.reshape(-1)).reshape(u.shape))
    r = compute_residual_only(st)
    assert norm(r) < 1e-10 * norm(b)


def test_apply_operator_matches_dense(rng):
    mesh, basis, blocks, b, _ = _random_setup(p=3)
    A = blocks_global(mesh, blocks)
    u = rng.normal(size=(mesh.ncells, blocks.nloc))
    got = apply_operator(mesh, basis, blocks, CellField(u))
    want = A @ u.reshape(-1)
    assert np.max(np.abs(got.data.reshape(-1) - want)) < 1e-10 * np.max(np.abs(want))


def test_state_validation():
    mesh, basis, blocks = blocks_for("lobatto", 2, 1)
    b = CellField.zeros(mesh.ncells, blocks.nloc)
    with pytest.raises(SmootherError, match="variant"):
        make_state(mesh, basis, blocks, b, variant="jacobi")
    with pytest.raises(SmootherError, match="inverse mode"):
        make_state(mesh, basis, blocks, b, inverse_mode="cholesky")
    with pytest.raises(SmootherError, match="relaxation weight"):
        make_state(mesh, basis, blocks, b, omega=1.5)
    with pytest.raises(SmootherError, match="relaxation weight"):
        make_state(mesh, basis, blocks, b, omega=-0.1)
    with pytest.raises(SmootherError, match="workers"):
        make_state(mesh, basis, blocks, b, workers=0)
    with pytest.raises(SmootherError, match="shape"):
        make_state(mesh, basis, blocks, CellField.zeros(mesh.ncells, 3))


def test_standalone_smoothing_is_monotone():
    # plain smoothing converges slowly but never regresses on the smooth
    # problem at its standalone relaxation weight
    mesh, basis, blocks = blocks_for("lobatto", 2, 3)
    problem = get_problem("sin_product")
    b = build_rhs(problem, mesh, basis)
    st = make_state(mesh, basis, blocks, b, omega=0.6, variant="fused",
                    track_old=True)
    st.warm_up()
    res = []
    for _ in range(100):
        sweep(st)
        res.append(norm(compute_residual_only(st)))
    st.close()
    res = np.asarray(res)
    assert np.all(np.diff(res) <= 1e-12 * res[:-1])
    assert res[-1] < res[0]
