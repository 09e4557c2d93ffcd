import numpy as np
import pytest

from robustlp.errors import DriftTooLarge, SingularSystem
from robustlp.oracles import dense_lewis, dense_scores
from robustlp.scores import (LewisState, leverage_scores, lewis_fixed_point, lewis_residual,
                             lewis_step, regularizer_for)

from conftest import dense_to_sparse

M3 = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])


def test_identity_scores_are_one():
    assert np.allclose(leverage_scores(np.eye(4), [1, 2, 3, 4]), 1.0)


def test_three_row_scores():
    assert np.allclose(leverage_scores(M3, np.ones(3)), 2 / 3)


def test_scores_sum_to_rank(rng):
    A = rng.normal(size=(20, 5))
    g = rng.uniform(0.1, 2, 20)
    assert abs(leverage_scores(A, g).sum() - 5) < 1e-8
    assert np.allclose(leverage_scores(A, g), dense_scores(A, g).witness, atol=1e-10)


def test_sketched_scores_within_factor(rng):
    A = rng.normal(size=(40, 4))
    g = rng.uniform(0.5, 2, 40)
    exact = leverage_scores(A, g)
    sk = leverage_scores(A, g, "sketched", eps=0.5, seed=3)
    assert np.all(np.abs(np.log(sk / exact)) <= 0.5)


def test_rank_deficient_raises():
    with pytest.raises(SingularSystem):
        leverage_scores(np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]), np.ones(3))


def test_p2_is_sigma_plus_z(rng):
    A = rng.normal(size=(12, 3))
    g = rng.uniform(0.5, 2, 12)
    z = np.full(12, 3 / 12)
    w = lewis_fixed_point(A, g, z, 2.0)
    assert np.allclose(w, leverage_scores(A, g) + z, atol=1e-10)


def test_square_invertible_gives_one_plus_z(rng):
    A = rng.normal(size=(4, 4))
    z = rng.uniform(1, 2, 4)
    for p in (0.5, 1.0, 1.5):
        assert np.allclose(lewis_fixed_point(A, rng.uniform(0.5, 2, 4), z, p), 1 + z)


def test_m3_matches_long_oracle():
    z = np.full(3, 2 / 3)
    w = lewis_fixed_point(M3, np.ones(3), z, 1.0, tol=1e-12)
    ref = dense_lewis(M3, np.ones(3), z, 1.0).witness
    assert np.allclose(w, ref, atol=1e-8)


def test_fixed_point_sum_identity(rng):
    A = dense_to_sparse(rng.normal(size=(30, 6)))
    z = regularizer_for(A)
    w = lewis_fixed_point(A, rng.uniform(0.2, 5, 30), z, 0.8)
    assert abs(w.sum() - (6 + z.sum())) <= 1e-6 * w.sum()


def test_contraction_step(rng):
    A = rng.normal(size=(25, 4))
    g = rng.uniform(0.5, 2, 25)
    z = np.full(25, 4 / 25)
    p = 0.9
    ws = lewis_fixed_point(A, g, z, p, tol=1e-14)
    w0 = ws * np.exp(0.05 * rng.uniform(-1, 1, 25))
    e0 = np.max(np.abs(np.log(w0 / ws)))
    e1 = np.max(np.abs(np.log(lewis_step(A, g, z, p, w0) / ws)))
    assert e1 <= (1 - p / 2) * e0 + 1e-9


def test_regularizer_bounds(rng):
    A = dense_to_sparse(rng.normal(size=(10, 3)) * (rng.random((10, 3)) < 0.6) + np.eye(10, 3))
    z = regularizer_for(A)
    assert np.all(z >= 3 / 10) and z.sum() <= 4 * 3 + 1e-12


class TestLewisState:
    def setup_method(self):
        self.A = M3
        self.z = np.full(3, 2 / 3)

    def test_init_residual_and_levels(self):
        st = LewisState(self.A, np.ones(3), self.z, 1.0, eps=0.05)
        assert st.residual() <= 0.05
        ref = lewis_fixed_point(self.A, np.ones(3), self.z, 1.0)
        assert np.all(np.abs(np.log(st.levels[-1] / ref)) <= 0.05)

    def test_global_scaling_invariance(self):
        st = LewisState(self.A, np.ones(3), self.z, 1.0, eps=0.05)
        before = [v.copy() for v in st.levels]
        st.set_scaling(np.full(3, 7.0))
        changed, _ = st.query()
        assert changed.size == 0
        for a, b in zip(before, st.levels):
            assert np.allclose(a, b)

    def test_no_updates_no_changes(self, rng):
        A = rng.normal(size=(15, 3))
        st = LewisState(A, np.ones(15), np.full(15, 0.2), 0.9, eps=0.05)
        v = st.weights.copy()
        changed, v1 = st.query()
        assert changed.size == 0 and np.array_equal(v, v1)

    def test_small_scale_keeps_residual(self, rng):
        A = rng.normal(size=(15, 3))
        st = LewisState(A, np.ones(15), np.full(15, 0.2), 0.9, eps=0.05)
        st.scale(4, np.exp(0.05 / 100))
        st.query()
        assert st.residual() <= 0.05

    def test_large_rescale_practical(self, rng):
        A = rng.normal(size=(15, 3))
        g = rng.uniform(0.5, 2, 15)
        st = LewisState(A, g, np.full(15, 0.2), 0.9, eps=0.05)
        g2 = g.copy()
        g2[:5] *= 3
        st.set_scaling(g2)
        _, v1 = st.query()
        ref = lewis_fixed_point(A, g2, np.full(15, 0.2), 0.9)
        assert np.all(np.abs(np.log(v1 / ref)) <= 0.05 + 1e-9)

    def test_drift_check(self):
        st = LewisState(self.A, np.ones(3), self.z, 1.0, eps=0.01, check_drift=True)
        st.scale(0, 2.0)
        with pytest.raises(DriftTooLarge):
            st.query()


def test_lewis_residual_function(rng):
    A = rng.normal(size=(8, 2))
    w = lewis_fixed_point(A, np.ones(8), np.full(8, 0.25), 1.2, tol=1e-11)
    assert lewis_residual(A, np.ones(8), np.full(8, 0.25), 1.2, w) <= 1e-11
