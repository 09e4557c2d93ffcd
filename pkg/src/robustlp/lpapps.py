"""LP frontends: general two-sided LPs, l1 regression and discounted MDPs."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (CenteringCheckFailed, CenteringLost, DegenerateInput, Infeasible,
                     OutOfDomain, SingularSystem)
from .ipm import Backends, IpmParams, LpInstance, centrality, final_point, make_triple, path_following
from .linalg import SparseMatrix, check_finite


# ------------------------------------------------------------------ general LP

@dataclass(frozen=True)
class AugmentedLp:
    """min c^T x + c~ 1^T x~  s.t.  A'^T x + beta x~ = b',  with A' = A diag(signs).

    Auxiliary coordinates whose initial value is zero are dropped; ``aux``
    lists the constraint index of every kept auxiliary column.
    """

    lp: LpInstance
    x_init: np.ndarray
    m_orig: int
    signs: np.ndarray
    aux: np.ndarray
    beta: float
    Xi: float
    W: float
    delta_prime: float
    penalty: float
    c_scale: float


@dataclass(frozen=True)
class LpResult:
    x: np.ndarray
    objective: float
    residual: float
    gap: float
    mu: float
    steps: int
    records: list = field(default_factory=list)
    reports: list = field(default_factory=list)


def lp_width(inst: LpInstance) -> float:
    """W = max(|c|, |A|, |b|, |u|, |l|, widest/narrowest box)."""
    widths = inst.upper - inst.lower
    vals = [np.abs(inst.c).max(initial=0.0), np.abs(inst.A.csr.data).max(initial=0.0),
            np.abs(inst.b).max(initial=0.0), np.abs(inst.upper).max(), np.abs(inst.lower).max(),
            widths.max() / widths.min(), 1.0]
    return float(max(vals))


def augment_lp(inst: LpInstance, delta: float) -> AugmentedLp:
    if not delta > 0:
        raise ValueError("delta must be positive")
    m, n = inst.m, inst.n
    x0 = (inst.lower + inst.upper) / 2.0
    res = inst.b - inst.A.rmatvec(x0)
    Xi = float(np.max(inst.upper - inst.lower))
    W = lp_width(inst)
    dprime = delta / (10.0 * m * W * W)
    c1 = float(np.abs(inst.c).sum())
    c_scale = c1 if c1 > 0 else 1.0
    penalty = 2.0 * c_scale / dprime
    rmax = float(np.abs(res).max(initial=0.0))
    signs = np.where(res < 0, -1.0, 1.0)
    if rmax == 0.0:
        return AugmentedLp(inst, x0, m, signs, np.zeros(0, dtype=np.int64), 0.0, Xi, W, dprime,
                           penalty, c_scale)
    beta = rmax / Xi
    xt = np.abs(res) / beta
    aux = np.flatnonzero(xt > 0)
    A = inst.A.csr.multiply(signs[None, :]).tocoo()
    rows = np.concatenate([A.row, m + np.arange(aux.size)])
    cols = np.concatenate([A.col, aux])
    vals = np.concatenate([A.data, np.full(aux.size, beta)])
    At = SparseMatrix.from_coo(rows, cols, vals, (m + aux.size, n))
    # auxiliary box [0, 2 x~init] keeps x~ >= 0 so the penalty cannot be gamed
    lower = np.concatenate([inst.lower, np.zeros(aux.size)])
    upper = np.concatenate([inst.upper, 2.0 * xt[aux]])
    c = np.concatenate([inst.c, np.full(aux.size, penalty)])
    lp = LpInstance(At, signs * inst.b, c, lower, upper)
    return AugmentedLp(lp, np.concatenate([x0, xt[aux]]), m, signs, aux, beta, Xi, W, dprime,
                       penalty, c_scale)


def lp_initial_point(aug: AugmentedLp, eps: float, backends: Backends, mu: float | None = None):
    """Midpoint plus scaled residual, s = costs, mu = 8 m ||c||_1 Xi / (eps delta')."""
    lp = aug.lp
    if mu is None:
        mu = 8.0 * lp.m * aug.c_scale * aug.Xi / (eps * aug.delta_prime)
    x = aug.x_init
    tau = backends.tau(x - lp.lower, lp.upper - x)
    state = make_triple(lp, x, lp.c.copy(), mu, tau, z=np.zeros(lp.n))
    yinf = float(np.max(np.abs(centrality(state.s, mu, tau, state.xl, state.xu))))
    if yinf > eps:
        raise CenteringCheckFailed(f"initial point has ||y||_inf = {yinf:.3g}")
    return state


def duality_gap(lp: LpInstance, x, s) -> float:
    """s^T x - sum_i min(s_i l_i, s_i u_i): gap of a primal-feasible x against s = c + A z."""
    return float(np.sum(s * x) - np.sum(np.minimum(s * lp.lower, s * lp.upper)))


def solve_lp(inst: LpInstance, delta: float = 1e-6, seed: int = 0, *, C: float = 4.0,
             mode: str = "practical", check_every: int = 10, check_invariants: bool = False,
             trace: Callable[[dict], None] | None = None) -> LpResult:
    """x with l <= x <= u, ||A^T x - b||_inf <= delta and c^T x <= OPT + delta."""
    aug = augment_lp(inst, delta)
    lp, m0 = aug.lp, aug.m_orig
    params = IpmParams.derive(lp.m, lp.n, C=C, mode=mode, seed=seed)
    backends = Backends(lp, params, check_invariants=check_invariants, seed=seed, trace=trace)
    mu_target = aug.delta_prime * aug.c_scale * aug.Xi / (C * lp.n)
    found: dict = {}

    def finish(state):
        xf, s, _ = final_point(lp, state, backends)
        xf = np.clip(xf, lp.lower, lp.upper)
        x = xf[:m0]
        return x, float(np.max(np.abs(inst.A.rmatvec(x) - inst.b), initial=0.0)), \
            duality_gap(lp, xf, s), xf[m0:]

    def stop(state, t):
        found["last"] = state
        if mode != "practical" or t % check_every:
            return False
        x, resid, gap, _ = finish(state)
        if gap <= delta / 2 and resid <= delta:
            found["x"] = (x, resid, gap)
            return True
        return False

    init = lp_initial_point(aug, params.eps, backends)
    found["last"] = init
    try:
        path_following(lp, init, mu_target, params, backends, stop=stop)
    except (CenteringLost, SingularSystem, OutOfDomain):
        if mode == "theory":
            raise
    state = found["last"]
    if "x" in found:
        x, resid, gap = found["x"]
    else:
        x, resid, gap, xt = finish(state)
        if xt.size and float(np.max(xt)) > aug.delta_prime * aug.Xi and resid > delta:
            raise Infeasible("auxiliary coordinates stay positive at the target path parameter")
    return LpResult(x, float(inst.c @ x), resid, gap, state.mu, backends.steps,
                    backends.records, backends.reports)


# ------------------------------------------------------------- l1 regression

@dataclass(frozen=True)
class L1Result:
    z: np.ndarray
    value: float
    dual_bound: float
    mu: float
    steps: int
    records: list = field(default_factory=list)
    reports: list = field(default_factory=list)


def solve_l1_regression(A, c, delta: float = 1e-6, seed: int = 0, *, C: float = 4.0,
                        mode: str = "practical", check_every: int = 10,
                        check_invariants: bool = False,
                        trace: Callable[[dict], None] | None = None) -> L1Result:
    """z with ||A z + c||_1 <= min ||A z + c||_1 + delta.

    Solves min c^T x s.t. A^T x = 0, -1 <= x <= 1 from (0, c, ||c||_inf m / (eps n))
    and reads z off the dual slack s = c + A z.  Columns of A are scaled to unit
    norm first and z is rescaled on output.  ``dual_bound`` is -c^T x_final,
    a certified lower bound on the optimum.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    Ad = np.asarray(A.toarray() if isinstance(A, SparseMatrix) else A, dtype=float)
    if Ad.ndim == 1:
        Ad = Ad[:, None]
    c = np.asarray(c, dtype=float).reshape(-1)
    check_finite(Ad, c, names="A, c")
    m, n = Ad.shape
    if c.size != m:
        raise ValueError(f"c has length {c.size}, expected {m}")
    if m < n or np.linalg.matrix_rank(Ad) < n:
        raise DegenerateInput("A must have full column rank")
    cinf = float(np.abs(c).max(initial=0.0))
    if cinf == 0.0:
        return L1Result(np.zeros(n), 0.0, 0.0, 0.0, 0)
    colscale = 1.0 / np.linalg.norm(Ad, axis=0)
    As = Ad * colscale
    rows, cols = np.nonzero(As)
    lp = LpInstance(SparseMatrix.from_coo(rows, cols, As[rows, cols], (m, n)), np.zeros(n), c,
                    -np.ones(m), np.ones(m))
    params = IpmParams.derive(m, n, C=C, mode=mode, seed=seed)
    backends = Backends(lp, params, check_invariants=check_invariants, seed=seed, trace=trace)
    mu0 = cinf * m / (params.eps * n)
    mu_target = delta / (C * n)
    tau = backends.tau(np.ones(m), np.ones(m))
    init = make_triple(lp, np.zeros(m), c.copy(), mu0, tau, z=np.zeros(n))
    yinf = float(np.max(np.abs(centrality(init.s, mu0, tau, init.xl, init.xu))))
    if yinf > params.eps:
        raise CenteringCheckFailed(f"initial point has ||y||_inf = {yinf:.3g}")
    found: dict = {"last": init}

    def extract(state):
        xf, s, _ = final_point(lp, state, backends)
        xf = np.clip(xf, -1.0, 1.0)
        zs = np.linalg.lstsq(As, s - c, rcond=None)[0]
        val = float(np.abs(As @ zs + c).sum())
        return zs, val, float(-(c @ xf))

    def stop(state, t):
        found["last"] = state
        if mode != "practical" or t % check_every:
            return False
        zs, val, lb = extract(state)
        if val - lb <= delta / 2:
            found["z"] = (zs, val, lb)
            return True
        return False

    try:
        path_following(lp, init, mu_target, params, backends, stop=stop)
    except (CenteringLost, SingularSystem, OutOfDomain):
        if mode == "theory":
            raise
    state = found["last"]
    zs, val, lb = found["z"] if "z" in found else extract(state)
    z = zs * colscale
    return L1Result(z, float(np.abs(Ad @ z + c).sum()), lb, state.mu, backends.steps,
                    backends.records, backends.reports)


# ----------------------------------------------------------------------- MDP

@dataclass(frozen=True)
class MdpInstance:
    """Discounted MDP with rewards[s, a] and transitions[s, a, s']."""

    rewards: np.ndarray
    transitions: np.ndarray
    gamma: float

    def __post_init__(self):
        r = np.asarray(self.rewards, dtype=float)
        P = np.asarray(self.transitions, dtype=float)
        if r.ndim != 2 or P.shape != (r.shape[0], r.shape[1], r.shape[0]):
            raise ValueError("rewards must be S x A and transitions S x A x S")
        check_finite(r, P, names="mdp")
        if np.any(P < 0) or np.any(np.abs(P.sum(axis=2) - 1.0) > 1e-12):
            raise ValueError("each transition row must be a probability vector")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        object.__setattr__(self, "rewards", r)
        object.__setattr__(self, "transitions", P)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def num_states(self) -> int:
        return self.rewards.shape[0]

    @property
    def num_actions(self) -> int:
        return self.rewards.shape[1]

    @property
    def M(self) -> float:
        top = float(np.abs(self.rewards).max())
        return top if top > 0 else 1.0


@dataclass(frozen=True)
class MdpResult:
    policy: np.ndarray
    values: np.ndarray
    l1: L1Result


def mdp_l1_problem(mdp: MdpInstance, alpha: float):
    """Matrix and vector of the l1 objective
    |alpha(|S|M/(1-g) + 1^T v)| + ||S^-1 A v - S^-1 b - 1||_1 + ||S^-1 A v - S^-1 b + 1||_1."""
    S, nA = mdp.num_states, mdp.num_actions
    g, M = mdp.gamma, mdp.M
    E = np.repeat(np.eye(S), nA, axis=0)
    Amdp = E - g * mdp.transitions.reshape(S * nA, S)
    r = mdp.rewards.reshape(-1)
    top = 2.0 * M / (1.0 - g)
    sv = 0.5 * (top - r)
    bv = 0.5 * (top + r)
    SA = Amdp / sv[:, None]
    Sb = bv / sv
    A = np.vstack([SA, SA, np.full((1, S), alpha)])
    c = np.concatenate([-Sb - 1.0, -Sb + 1.0, [alpha * S * M / (1.0 - g)]])
    return A, c


def greedy_policy(mdp: MdpInstance, v) -> np.ndarray:
    """argmax_a r_a(i) + gamma p(i,a)^T v, lowest action index on ties."""
    q = mdp.rewards + mdp.gamma * mdp.transitions @ np.asarray(v, dtype=float)
    best = q.max(axis=1, keepdims=True)
    tie = q >= best - 1e-12 * (1.0 + np.abs(best))
    return np.argmax(tie, axis=1)


def policy_values(mdp: MdpInstance, policy) -> np.ndarray:
    S = mdp.num_states
    idx = np.arange(S)
    P = mdp.transitions[idx, policy]
    return np.linalg.solve(np.eye(S) - mdp.gamma * P, mdp.rewards[idx, policy])


def mdp_tolerances(mdp: MdpInstance, eps: float, mode: str = "practical"):
    """(alpha, eps3) for the l1 reduction."""
    S, g, M = mdp.num_states, mdp.gamma, mdp.M
    eps2 = eps * (1 - g) ** 2 / (8 * S)
    if mode == "theory":
        alpha = eps2 * (1 - g) ** 2 / (4 * S * M * M)
    else:
        alpha = (1 - g) ** 2 / (4 * S * M)
    eps3 = min(alpha * eps2, eps2 * (1 - g) / (2 * M))
    return alpha, eps3


def solve_mdp(mdp: MdpInstance, eps: float = 1e-3, seed: int = 0, *, C: float = 4.0,
              mode: str = "practical", delta_floor: float = 1e-11,
              check_invariants: bool = False,
              trace: Callable[[dict], None] | None = None) -> MdpResult:
    """eps-optimal policy (0-based actions) via the l1 regression reduction."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    alpha, eps3 = mdp_tolerances(mdp, eps, mode)
    A, c = mdp_l1_problem(mdp, alpha)
    delta = max(eps3, delta_floor * float(np.abs(c).sum()))
    res = solve_l1_regression(A, c, delta, seed, C=C, mode=mode,
                              check_invariants=check_invariants, trace=trace)
    pi = greedy_policy(mdp, res.z)
    return MdpResult(pi, policy_values(mdp, pi), res)


# ------------------------------------------------------------------------ I/O

def read_lp(matrix_path, sidecar_path) -> LpInstance:
    """Matrix Market A plus a JSON sidecar {"b", "c", "l", "u"}."""
    from .linalg import read_matrix_market

    A = read_matrix_market(matrix_path)
    with open(sidecar_path) as fh:
        side = json.load(fh)
    missing = [k for k in ("b", "c", "l", "u") if k not in side]
    if missing:
        raise ValueError(f"sidecar is missing {', '.join(missing)}")
    return LpInstance(A, side["b"], side["c"], side["l"], side["u"])


def write_lp(inst: LpInstance, matrix_path, sidecar_path) -> None:
    from .linalg import write_matrix_market

    write_matrix_market(matrix_path, inst.A)
    with open(sidecar_path, "w") as fh:
        json.dump({"b": inst.b.tolist(), "c": inst.c.tolist(), "l": inst.lower.tolist(),
                   "u": inst.upper.tolist()}, fh)
        fh.write("\n")


def read_mdp(path) -> MdpInstance:
    with open(path) as fh:
        d = json.load(fh)
    missing = [k for k in ("gamma", "rewards", "transitions") if k not in d]
    if missing:
        raise ValueError(f"MDP file is missing {', '.join(missing)}")
    return MdpInstance(np.asarray(d["rewards"], float), np.asarray(d["transitions"], float),
                       float(d["gamma"]))


def write_mdp(mdp: MdpInstance, path) -> None:
    with open(path, "w") as fh:
        json.dump({"gamma": mdp.gamma, "rewards": mdp.rewards.tolist(),
                   "transitions": mdp.transitions.tolist()}, fh)
        fh.write("\n")


__all__ = ["AugmentedLp", "L1Result", "LpResult", "MdpInstance", "MdpResult", "augment_lp",
           "duality_gap", "greedy_policy", "lp_initial_point", "lp_width", "mdp_l1_problem",
           "mdp_tolerances", "policy_values", "read_lp", "read_mdp", "solve_l1_regression",
           "solve_lp", "solve_mdp", "write_lp", "write_mdp"]
