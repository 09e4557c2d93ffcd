import math

import numpy as np
import pytest

from robustlp.errors import DegenerateInput, OutOfDomain
from robustlp.ipm import (Backends, IpmParams, LpInstance, barrier_derivs, centrality,
                          final_point, flat_operator, make_triple, mixed_norm, path_following,
                          potential, short_step, tau_weights)
from robustlp.ipm.core import infeasibility
from robustlp.ipm.flat import dual_norm
from robustlp.oracles import dense_lewis, flat_oracle
from robustlp.scores import regularizer_for

from conftest import dense_to_sparse


def centered_instance(m, n, rng, y_scale=0.0, mu=1.0, mode="practical", **bk):
    """Random LP with an exactly feasible point whose centrality vector is y."""
    A = dense_to_sparse(rng.normal(size=(m, n)))
    lower = rng.uniform(-2, 0, m)
    upper = lower + rng.uniform(0.5, 3, m)
    x = lower + (upper - lower) * rng.uniform(0.2, 0.8, m)
    inst0 = LpInstance(A, A.rmatvec(x), np.zeros(m), lower, upper)
    params = IpmParams.derive(m, n, mode=mode)
    tau = tau_weights(inst0, x, p=params.p, tol=1e-12)
    _, d1, d2, _, _ = barrier_derivs(x, lower, upper)
    y = y_scale * rng.uniform(-1, 1, m)
    s = mu * tau * (np.sqrt(d2) * y - d1)
    inst = LpInstance(A, inst0.b, s, lower, upper)
    backends = Backends(inst, params, **bk)
    return inst, params, backends, make_triple(inst, x, s, mu, tau, z=np.zeros(n))


def box_lp():
    A = dense_to_sparse([[1.0], [1.0]])
    return LpInstance(A, [1.0], [1.0, 0.0], [0.0, 0.0], [1.0, 1.0])


# ---------------------------------------------------------------- barrier

def test_barrier_midpoint_and_value():
    _, d1, d2, _, _ = barrier_derivs(np.array([1.0, 0.3]), np.array([0.0, -0.4]), np.array([2.0, 1.0]))
    assert d1[0] == 0.0 and d2[0] == 2.0
    assert d1[1] == 0.0


def test_barrier_self_concordance_grid(rng):
    lo = rng.uniform(-5, 5, 100)
    hi = lo + rng.exponential(2, 100) + 1e-3
    t = np.linspace(1e-4, 1 - 1e-4, 10_000)
    for a, b in zip(lo, hi):
        x = a + (b - a) * t
        _, d1, d2, d3, d4 = barrier_derivs(x, np.full_like(x, a), np.full_like(x, b))
        assert np.all(np.abs(d1) <= np.sqrt(d2) * (1 + 1e-12))
        assert np.all(np.abs(d3) <= 2 * d2**1.5 * (1 + 1e-12))
        assert np.all(np.abs(d4) <= 6 * d2**2 * (1 + 1e-12))


def test_barrier_out_of_domain():
    with pytest.raises(OutOfDomain):
        barrier_derivs([0.0], [0.0], [1.0])
    with pytest.raises(OutOfDomain):
        barrier_derivs([2.0], [0.0], [1.0])


# ---------------------------------------------------------------- flat

def test_flat_single_coordinate():
    tau = np.array([0.3, 0.5, 0.2])
    h, val = flat_operator([1.0, 0, 0], tau, 5.0, return_value=True)
    t = 1 / (1 + 5.0 * math.sqrt(0.3))
    assert np.allclose(h, [t, 0, 0])
    assert abs(val - t) < 1e-12


def test_flat_equal_ratios_symmetric():
    tau = np.array([0.2, 0.4, 0.4])
    g = np.array([0.2, -0.4, 0.4])
    h = flat_operator(g, tau, 3.0)
    assert np.allclose(np.abs(h), abs(h[0])) and np.all(np.sign(h) == np.sign(g))
    assert abs(mixed_norm(h, tau, 3.0) - 1) < 1e-12


def test_flat_against_oracle(rng):
    for _ in range(40):
        m = int(rng.integers(1, 11))
        g = rng.normal(size=m)
        tau = rng.uniform(0.05, 2, m)
        cn = float(rng.uniform(0.5, 20))
        h, val = flat_operator(g, tau, cn, return_value=True)
        assert abs(mixed_norm(h, tau, cn) - 1) <= 1e-9
        assert val >= flat_oracle(g, tau, cn).value - 1e-6
        assert abs(dual_norm(g, tau, cn) - val) < 1e-12


def test_flat_degenerate():
    assert np.all(flat_operator(np.zeros(3), np.ones(3), 2.0) == 0)
    with pytest.raises(DegenerateInput):
        flat_operator(np.ones(2), np.array([1.0, 0.0]), 2.0)


# ---------------------------------------------------------------- potential and weights

def test_potential_values(rng):
    inst, params, _, st = centered_instance(10, 3, rng)
    psi, y = potential(inst, st.x, st.s, st.mu, st.taubar, params.lam)
    assert np.max(np.abs(y)) < 1e-9 and abs(psi - 10) < 1e-6
    yy = np.zeros(10)
    yy[0] = 1 / params.lam
    s = st.mu * st.taubar * (np.sqrt(barrier_derivs(st.x, inst.lower, inst.upper)[2]) * yy
                             - barrier_derivs(st.x, inst.lower, inst.upper)[1])
    psi1, _ = potential(inst, st.x, s, st.mu, st.taubar, params.lam)
    assert abs(psi1 - (9 + math.cosh(1))) < 1e-6
    eps = math.log(10) / params.lam
    inst2, _, _, st2 = centered_instance(10, 3, rng, y_scale=eps)
    assert potential(inst2, st2.x, st2.s, st2.mu, st2.taubar, params.lam)[0] <= 100
    huge = potential(inst, st.x, st.s + 1e6, st.mu, st.taubar, params.lam)[0]
    assert huge == math.inf


def test_tau_weights_properties(rng):
    A = dense_to_sparse(rng.normal(size=(4, 4)))
    inst = LpInstance(A, np.zeros(4), np.zeros(4), -np.ones(4), np.ones(4))
    tau = tau_weights(inst, rng.uniform(-0.5, 0.5, 4))
    assert np.allclose(tau, 1 + regularizer_for(A))
    B = dense_to_sparse([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    x = np.array([0.2, -0.3, 0.6])
    i1 = LpInstance(B, np.zeros(2), np.zeros(3), -np.ones(3), np.ones(3))
    i3 = LpInstance(B, np.zeros(2), np.zeros(3), -3 * np.ones(3), 3 * np.ones(3))
    assert np.allclose(tau_weights(i1, x), tau_weights(i3, 3 * x), atol=1e-9)
    p = IpmParams.derive(3, 2).p
    d2 = barrier_derivs(x, -np.ones(3), np.ones(3))[2]
    ref = dense_lewis(B.toarray(), d2**-0.5, regularizer_for(B), p).witness
    assert np.allclose(tau_weights(i1, x), ref, atol=1e-6)
    assert np.all(tau_weights(i1, x) >= regularizer_for(B))


def test_params_derivation():
    p = IpmParams.derive(40, 8, C=4)
    alpha = 1 / (4 * math.log(20))
    assert math.isclose(p.alpha, alpha) and math.isclose(p.eps, alpha / 4)
    assert math.isclose(p.lam, 4 * math.log(4 * 40 / p.eps**2) / p.eps)
    assert math.isclose(p.r, p.eps * p.gamma / (p.c_norm * math.sqrt(8)))
    with pytest.raises(ValueError):
        IpmParams.derive(4, 2, C=1)


# ---------------------------------------------------------------- steps

def test_central_state_is_fixed(rng):
    inst, params, bk, st = centered_instance(12, 3, rng, sampler="none")
    new = short_step(st, st.mu, params, bk)
    assert np.allclose(new.x, st.x, atol=1e-12) and np.allclose(new.s, st.s, atol=1e-9)


def test_unsampled_step_restores_feasibility(rng):
    inst, params, bk, st = centered_instance(12, 3, rng, y_scale=0.01, sampler="none")
    # push x off the affine space
    x = st.x + 1e-4 * rng.normal(size=12)
    st2 = make_triple(inst, x, st.s, st.mu, st.taubar, z=st.z)
    assert np.max(np.abs(infeasibility(inst, st2.xl, st2.xu))) > 1e-6
    new = short_step(st2, st.mu, params, bk)
    assert np.max(np.abs(new.delta)) < 1e-10


def test_step_keeps_invariants(rng):
    inst, params, bk, st = centered_instance(30, 5, rng, y_scale=params_y(30, 5))
    new = short_step(st, 0.99 * st.mu, params, bk)
    rep = bk.report(new)
    assert rep.dual_residual <= 1e-8 and rep.invariant and rep.psi_ok


def params_y(m, n):
    return IpmParams.derive(m, n).y_target / 2


def test_path_following_noop_and_box():
    inst = box_lp()
    params = IpmParams.derive(2, 1)
    bk = Backends(inst, params, check_invariants=True)
    x0 = np.array([0.5, 0.5])
    tau = bk.tau(x0 - inst.lower, inst.upper - x0)
    st = make_triple(inst, x0, inst.c.copy(), 100.0, tau, z=np.zeros(1))
    assert path_following(inst, st, 100.0, params, bk) is st
    end = path_following(inst, st, 1e-9, params, bk)
    xf, _, _ = final_point(inst, end, bk)
    assert inst.c @ xf <= 10 * 1 * 1e-9 + 1e-6
    assert inst.c @ xf <= 1e-6
    assert all(r.ok for r in bk.reports)


def test_final_point_cases(rng):
    inst, params, bk, st = centered_instance(10, 3, rng, y_scale=0.001)
    xf, s, _ = final_point(inst, st, bk)
    assert np.allclose(xf, st.x, atol=1e-12) and np.array_equal(s, st.s)
    x = st.x + 1e-5 * rng.normal(size=10)
    st2 = make_triple(inst, x, st.s, st.mu, st.taubar)
    xf2, _, _ = final_point(inst, st2, bk)
    assert np.max(np.abs(inst.A.rmatvec(xf2) - inst.b)) <= 1e-8
    assert np.all(xf2 > inst.lower) and np.all(xf2 < inst.upper)
