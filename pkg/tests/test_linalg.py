import numpy as np
import pytest

from robustlp.errors import NonFiniteInput, SingularSystem
from robustlp.linalg import (SparseMatrix, apply_scaled, jl_sketch, jl_size, read_matrix_market,
                             solve_normal_equations, write_matrix_market)

from conftest import dense_to_sparse


def test_identity_system():
    rep = solve_normal_equations(dense_to_sparse(np.eye(2)), [1, 1], [3, 5])
    assert np.allclose(rep.solution, [3, 5])


def test_three_by_two(three_by_two):
    rep = solve_normal_equations(three_by_two, np.ones(3), [1, 1])
    assert np.allclose(rep.solution, [1 / 3, 1 / 3], atol=1e-12)
    assert rep.residual_norm < 1e-10


def test_path_incidence_matches_pseudo_solve(rng):
    n = 6
    tails, heads = np.arange(n - 1), np.arange(1, n)
    m = n - 1
    A = SparseMatrix.from_coo(np.r_[np.arange(m), np.arange(m)], np.r_[tails, heads],
                              np.r_[-np.ones(m), np.ones(m)], (m, n))
    d = rng.uniform(0.5, 2.0, m)
    rhs = rng.normal(size=n)
    rhs -= rhs.mean()
    rep = solve_normal_equations(A, d, rhs, rel_tol=1e-8)
    L = A.toarray().T @ (d[:, None] * A.toarray())
    ref = np.linalg.pinv(L) @ rhs
    err = rep.solution - ref
    err -= err.mean()
    assert np.sqrt(err @ L @ err) <= 1e-8 * np.sqrt(ref @ L @ ref) + 1e-12
    assert rep.method == "pcg"


def test_random_spd_agrees_with_dense(rng):
    for _ in range(10):
        m, n = int(rng.integers(16, 80)), int(rng.integers(2, 16))
        Ad = rng.normal(size=(m, n))
        d = rng.uniform(0.1, 3.0, m)
        rhs = rng.normal(size=n)
        rep = solve_normal_equations(dense_to_sparse(Ad), d, rhs, rel_tol=1e-9)
        M = Ad.T @ (d[:, None] * Ad)
        ref = np.linalg.solve(M, rhs)
        e = rep.solution - ref
        assert np.sqrt(e @ M @ e) <= 1e-9 * np.sqrt(ref @ M @ ref)


def test_singular_and_nonfinite():
    A = dense_to_sparse([[1.0, 1.0], [2.0, 2.0]])
    with pytest.raises(SingularSystem):
        solve_normal_equations(A, [1, 1], [1, 0], method="cholesky")
    with pytest.raises(NonFiniteInput):
        solve_normal_equations(dense_to_sparse(np.eye(2)), [1, np.nan], [1, 1])


def test_apply_scaled(three_by_two):
    I2 = dense_to_sparse(np.eye(2))
    assert np.allclose(apply_scaled(I2, [2, 3], [1, 1]), [2, 3])
    assert np.allclose(apply_scaled(I2, [0, 0], [1, 1]), 0)
    assert np.allclose(apply_scaled(three_by_two, np.ones(3), [1, 2]), [1, 2, 3])


def test_jl_sketch_norms():
    assert jl_size(0.5, 1) == int(np.ceil(8 * 4 * np.log(2)))
    hits = 0
    for seed in range(100):
        J = jl_sketch(0.5, 1, seed)
        nv = np.linalg.norm(J @ [7.0])
        hits += np.exp(-0.5) * 7 <= nv <= np.exp(0.5) * 7
    assert hits >= 95
    assert np.all(jl_sketch(0.5, 4, 0) @ np.zeros(4) == 0)
    rng = np.random.default_rng(0)
    v = rng.normal(size=100)
    v /= np.linalg.norm(v)
    ok = sum(abs(np.linalg.norm(jl_sketch(0.25, 100, s) @ v) - 1) <= 0.25 for s in range(100))
    assert ok >= 95


def test_jl_unbiased_squared_norm():
    v = np.array([1.0, -2.0, 0.5])
    vals = [np.sum((jl_sketch(0.9, 3, s) @ v) ** 2) for s in range(10_000)]
    assert 0.97 <= np.mean(vals) / (v @ v) <= 1.03


def test_jl_deterministic():
    assert np.array_equal(jl_sketch(0.3, 10, 7), jl_sketch(0.3, 10, 7))


def test_canonical_storage_and_matrix_market(tmp_path):
    A = SparseMatrix.from_coo([0, 0, 1, 1], [1, 1, 0, 1], [1.0, 2.0, 0.0, 4.0], (2, 2))
    assert A.nnz == 2
    assert np.allclose(A.toarray(), [[0, 3], [0, 4]])
    p = tmp_path / "a.mtx"
    write_matrix_market(p, A)
    B = read_matrix_market(p)
    assert np.array_equal(A.toarray(), B.toarray())
