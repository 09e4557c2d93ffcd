"""Brute-force reference solvers.

These deliberately share no code with the solver modules; they only read
the plain data fields of the instance types.  Each one enforces a size cap
so that exhaustive methods stay honest.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInput, Infeasible


@dataclass(frozen=True)
class OracleResult:
    value: float
    witness: np.ndarray
    method: str


def _check_cap(name: str, value: int, cap: int) -> None:
    if value > cap:
        raise ValueError(f"{name}={value} exceeds oracle cap {cap}")


# ---------------------------------------------------------------- flows

def ssp_mincost(inst) -> OracleResult:
    """Successive shortest paths with Bellman-Ford distances.

    Negative-cost edges are saturated up front so the residual graph starts
    without negative cycles; remaining imbalances are routed along cheapest
    residual paths.
    """
    n = inst.n
    _check_cap("n", n, 50)
    tails, heads = list(map(int, inst.tails)), list(map(int, inst.heads))
    cap = [int(u) for u in inst.cap]
    cost = [int(c) for c in inst.cost]
    m = len(tails)
    x = [cap[e] if cost[e] < 0 else 0 for e in range(m)]
    excess = [0] * n
    excess[inst.s] += int(inst.F)
    excess[inst.t] -= int(inst.F)
    for e in range(m):
        excess[tails[e]] -= x[e]
        excess[heads[e]] += x[e]

    def residual_arcs():
        for e in range(m):
            if x[e] < cap[e]:
                yield tails[e], heads[e], cost[e], e, 1
            if x[e] > 0:
                yield heads[e], tails[e], -cost[e], e, -1

    while True:
        sources = [v for v in range(n) if excess[v] > 0]
        if not sources:
            break
        src = sources[0]
        dist = [math.inf] * n
        pred = [None] * n
        dist[src] = 0
        arcs = list(residual_arcs())
        for _ in range(n - 1):
            changed = False
            for a, b, c, e, d in arcs:
                if dist[a] + c < dist[b]:
                    dist[b] = dist[a] + c
                    pred[b] = (a, e, d)
                    changed = True
            if not changed:
                break
        sinks = [v for v in range(n) if excess[v] < 0 and dist[v] < math.inf]
        if not sinks:
            raise Infeasible("demand cannot be routed")
        dst = min(sinks, key=lambda v: (dist[v], v))
        path = []
        v = dst
        while v != src:
            a, e, d = pred[v]
            path.append((e, d))
            v = a
        push = min(excess[src], -excess[dst])
        for e, d in path:
            push = min(push, cap[e] - x[e] if d == 1 else x[e])
        for e, d in path:
            x[e] += d * push
        excess[src] -= push
        excess[dst] += push
    value = sum(cost[e] * x[e] for e in range(m))
    return OracleResult(float(value), np.array(x, dtype=np.int64), "ssp")


def dinic_maxflow(n: int, tails, heads, cap, s: int, t: int) -> OracleResult:
    """Dinic's blocking-flow algorithm."""
    _check_cap("n", n, 200)
    m = len(tails)
    to, rcap, adj = [], [], [[] for _ in range(n)]
    for e in range(m):
        a, b = int(tails[e]), int(heads[e])
        adj[a].append(len(to)); to.append(b); rcap.append(int(cap[e]))
        adj[b].append(len(to)); to.append(a); rcap.append(0)
    total = 0
    if s == t:
        return OracleResult(0.0, np.zeros(m, dtype=np.int64), "dinic")
    while True:
        level = [-1] * n
        level[s] = 0
        q = deque([s])
        while q:
            v = q.popleft()
            for a in adj[v]:
                if rcap[a] > 0 and level[to[a]] < 0:
                    level[to[a]] = level[v] + 1
                    q.append(to[a])
        if level[t] < 0:
            break
        it = [0] * n

        def dfs(v, f):
            if v == t:
                return f
            while it[v] < len(adj[v]):
                a = adj[v][it[v]]
                w = to[a]
                if rcap[a] > 0 and level[w] == level[v] + 1:
                    got = dfs(w, min(f, rcap[a]))
                    if got:
                        rcap[a] -= got
                        rcap[a ^ 1] += got
                        return got
                it[v] += 1
            return 0

        while True:
            f = dfs(s, math.inf)
            if not f:
                break
            total += f
    flow = np.array([rcap[2 * e + 1] for e in range(m)], dtype=np.int64)
    return OracleResult(float(total), flow, "dinic")


def mincut_enumeration(n: int, tails, heads, cap, s: int, t: int) -> float:
    """Minimum s-t cut by enumerating vertex subsets (n <= 12)."""
    _check_cap("n", n, 12)
    others = [v for v in range(n) if v not in (s, t)]
    best = math.inf
    for mask in range(1 << len(others)):
        side = {s} | {others[i] for i in range(len(others)) if mask >> i & 1}
        val = sum(int(c) for a, b, c in zip(tails, heads, cap) if a in side and b not in side)
        best = min(best, val)
    return float(best)


# ---------------------------------------------------------------- LPs

def enumerate_lp(inst, tol: float = 1e-9) -> OracleResult:
    """Vertex enumeration: choose n basic coordinates, put the rest at bounds."""
    A = inst.A.toarray() if hasattr(inst.A, "toarray") else np.asarray(inst.A, float)
    b, c = np.asarray(inst.b, float), np.asarray(inst.c, float)
    lo, hi = np.asarray(inst.lower, float), np.asarray(inst.upper, float)
    m, n = A.shape
    _check_cap("m", m, 14)
    if np.linalg.matrix_rank(A) < n:
        raise DegenerateInput("enumerate_lp needs full column rank")
    k = m - n
    patterns = np.array(list(itertools.product((0, 1), repeat=k)), dtype=bool).reshape(2**k, k)
    best_val, best_x = math.inf, None
    scale = 1.0 + np.abs(A).sum() + np.abs(b).sum()
    for basis in itertools.combinations(range(m), n):
        B = list(basis)
        N = [i for i in range(m) if i not in basis]
        AB = A[B].T
        if abs(np.linalg.det(AB)) < 1e-10:
            continue
        XN = np.where(patterns, hi[N], lo[N])  # P x k
        rhs = b[None, :] - XN @ A[N]
        XB = np.linalg.solve(AB, rhs.T).T  # P x n
        ok = np.all((XB >= lo[B] - tol * scale) & (XB <= hi[B] + tol * scale), axis=1)
        if not ok.any():
            continue
        vals = XB @ c[B] + XN @ c[N]
        vals = np.where(ok, vals, np.inf)
        j = int(np.argmin(vals))
        if vals[j] < best_val:
            best_val = float(vals[j])
            best_x = np.empty(m)
            best_x[B], best_x[N] = XB[j], XN[j]
    if best_x is None:
        raise Infeasible("no vertex satisfies the constraints")
    return OracleResult(best_val, np.clip(best_x, lo, hi), "vertex-enumeration")


def enumerate_l1(A, c) -> OracleResult:
    """min_z ||Az + c||_1 by zeroing every n-subset of residuals."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    c = np.asarray(c, dtype=float)
    m, n = A.shape
    _check_cap("m", m, 20)
    _check_cap("n", n, 4)
    best_val, best_z = math.inf, None
    for rows in itertools.combinations(range(m), n):
        S = list(rows)
        if abs(np.linalg.det(A[S])) < 1e-12:
            continue
        z = np.linalg.solve(A[S], -c[S])
        val = float(np.abs(A @ z + c).sum())
        if val < best_val:
            best_val, best_z = val, z
    if best_z is None:
        raise DegenerateInput("A has no invertible n-row subset")
    return OracleResult(best_val, best_z, "subset-enumeration")


# ---------------------------------------------------------------- MDPs

def value_iteration(mdp, iters: int = 10_000, tol: float = 0.0) -> OracleResult:
    """Bellman sweeps v <- max_a r_a + gamma P_a v; witness is v*."""
    r = np.asarray(mdp.rewards, dtype=float)  # S x A
    P = np.asarray(mdp.transitions, dtype=float)  # S x A x S
    gamma = float(mdp.gamma)
    v = np.zeros(r.shape[0])
    for _ in range(iters):
        new = np.max(r + gamma * P @ v, axis=1)
        done = np.max(np.abs(new - v)) <= tol
        v = new
        if done:
            break
    return OracleResult(float(np.max(v)), v, "value-iteration")


def policy_value(mdp, policy) -> np.ndarray:
    """Exact value of a deterministic policy, (I - gamma P_pi)^{-1} r_pi."""
    r = np.asarray(mdp.rewards, dtype=float)
    P = np.asarray(mdp.transitions, dtype=float)
    S = r.shape[0]
    pi = np.asarray(policy, dtype=int)
    Ppi = P[np.arange(S), pi]
    rpi = r[np.arange(S), pi]
    return np.linalg.solve(np.eye(S) - mdp.gamma * Ppi, rpi)


# ---------------------------------------------------------------- weights

def dense_scores(A, g) -> OracleResult:
    """Leverage scores from the pseudoinverse, diag(B pinv(B))."""
    A = A.toarray() if hasattr(A, "toarray") else np.asarray(A, float)
    B = np.asarray(g, float).reshape(-1, 1) * A
    sigma = np.diag(B @ np.linalg.pinv(B)).copy()
    return OracleResult(float(sigma.sum()), sigma, "pseudoinverse")


def dense_lewis(A, g, z, p: float, iters: int = 500) -> OracleResult:
    """Regularized Lewis weights by a fixed number of plain iterations."""
    A = A.toarray() if hasattr(A, "toarray") else np.asarray(A, float)
    g, z = np.asarray(g, float) * np.ones(A.shape[0]), np.asarray(z, float)
    w = np.ones(A.shape[0])
    for _ in range(iters):
        sigma = dense_scores(A, w ** (0.5 - 1 / p) * g).witness
        w = (w ** (2 / p - 1) * (sigma + z)) ** (p / 2)
    return OracleResult(float(w.sum()), w, "fixed-point")


# ---------------------------------------------------------------- flat operator

def flat_oracle(g, tau, c_norm: float, iters: int = 90) -> OracleResult:
    """max <g,h> subject to ||h||_inf + c_norm ||h||_tau <= 1.

    For a fixed cap t the inner problem over {|h_i| <= t, ||h||_tau <= (1-t)/c}
    is solved by bisection on the multiplier; the outer value is concave in t
    and maximized by golden-section search.
    """
    g, tau = np.asarray(g, float), np.asarray(tau, float)
    a = np.abs(g)

    def inner(t):
        radius = (1 - t) / c_norm
        h = np.full_like(a, t)
        h[a == 0] = 0.0
        if math.sqrt(np.sum(tau * h * h)) <= radius:
            return float(a @ h), h
        lo, hi = 0.0, 1.0
        while math.sqrt(np.sum(tau * np.minimum(t, hi * a / tau) ** 2)) < radius:
            hi *= 2
        for _ in range(90):
            mid = 0.5 * (lo + hi)
            if math.sqrt(np.sum(tau * np.minimum(t, mid * a / tau) ** 2)) < radius:
                lo = mid
            else:
                hi = mid
        h = np.minimum(t, lo * a / tau)
        return float(a @ h), h

    phi = (math.sqrt(5) - 1) / 2
    lo, hi = 0.0, 1.0
    x1, x2 = hi - phi * (hi - lo), lo + phi * (hi - lo)
    f1, f2 = inner(x1)[0], inner(x2)[0]
    for _ in range(iters):
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + phi * (hi - lo)
            f2 = inner(x2)[0]
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - phi * (hi - lo)
            f1 = inner(x1)[0]
    val, h = inner(0.5 * (lo + hi))
    return OracleResult(val, np.sign(g) * h, "golden-bisection")
