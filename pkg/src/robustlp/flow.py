"""Min-cost flow and max flow on top of the robust IPM."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .errors import (CenteringCheckFailed, CenteringLost, Infeasible, OutOfDomain, ParseError,
                     RetriesExhausted, SingularSystem)
from .ipm import Backends, IpmParams, LpInstance, final_point, make_triple, path_following
from .ipm.core import centrality
from .linalg import SparseMatrix


@dataclass(frozen=True)
class FlowInstance:
    """Directed graph with integral capacities/costs and an s-t demand F.

    Vertices are 0-based.  The incidence matrix has A[e, tail] = -1 and
    A[e, head] = +1, so feasibility reads A^T x = F (e_t - e_s).
    """

    n: int
    tails: np.ndarray
    heads: np.ndarray
    cap: np.ndarray
    cost: np.ndarray
    s: int
    t: int
    F: int

    def __post_init__(self):
        for name in ("tails", "heads", "cap", "cost"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.int64).reshape(-1))
        m = self.tails.size
        if not (self.heads.size == self.cap.size == self.cost.size == m):
            raise ValueError("edge arrays must have equal length")
        if m and (self.tails.min() < 0 or self.heads.max(initial=0) >= self.n or
                  self.heads.min() < 0 or self.tails.max() >= self.n):
            raise ValueError("edge endpoint out of range")
        if np.any(self.cap < 0):
            raise ValueError("capacities must be non-negative")
        if not (0 <= self.s < self.n and 0 <= self.t < self.n) or self.F < 0:
            raise ValueError("bad source, sink or demand")

    @property
    def m(self) -> int:
        return int(self.tails.size)

    @property
    def W(self) -> int:
        return int(max(np.abs(self.cap).max(initial=0), np.abs(self.cost).max(initial=0)))

    def demand(self) -> np.ndarray:
        d = np.zeros(self.n, dtype=np.int64)
        if self.s != self.t:
            d[self.t] += self.F
            d[self.s] -= self.F
        return d

    def incidence(self) -> SparseMatrix:
        m = self.m
        rows = np.concatenate([np.arange(m), np.arange(m)])
        cols = np.concatenate([self.tails, self.heads])
        vals = np.concatenate([-np.ones(m), np.ones(m)])
        return SparseMatrix.from_coo(rows, cols, vals, (m, self.n))

    def net_inflow(self, x) -> np.ndarray:
        x = np.asarray(x)
        out = np.zeros(self.n, dtype=x.dtype)
        np.add.at(out, self.heads, x)
        np.subtract.at(out, self.tails, x)
        return out

    def cost_of(self, x) -> int:
        return int(np.dot(self.cost, np.asarray(x, dtype=np.int64)))


@dataclass(frozen=True)
class AugmentedFlow:
    """Star-augmented LP with vertex z removed; rows are [edges; (v,z); (z,v)]."""

    lp: LpInstance
    x_init: np.ndarray
    m_orig: int
    n: int
    star_cost: float
    W: float


@dataclass(frozen=True)
class FlowResult:
    flow: np.ndarray
    cost: int
    attempts: int
    mu: float
    ipm_steps: int
    records: list = field(default_factory=list, repr=False, compare=False)
    reports: list = field(default_factory=list, repr=False, compare=False)


def augment_with_star(inst: FlowInstance, costs=None) -> AugmentedFlow:
    """Add edges (v,z), (z,v) for every v and embed the midpoint flow u/2."""
    n, m = inst.n, inst.m
    costs = np.asarray(inst.cost if costs is None else costs, dtype=float)
    x = inst.cap / 2.0
    excess = inst.net_inflow(x) - inst.demand()
    out_star = 1.0 + np.maximum(excess, 0.0)   # (v, z)
    in_star = 1.0 + np.maximum(-excess, 0.0)   # (z, v)
    W = float(max(inst.W, inst.F, 1))
    cmax = max(float(np.abs(costs).max(initial=0.0)), 1.0)
    umax = max(float(inst.cap.max(initial=0)), 1.0)
    star_cost = 50.0 * (m + 2 * n) * umax * cmax
    verts = np.arange(n)
    rows = np.concatenate([np.arange(m), np.arange(m), m + verts, m + n + verts])
    cols = np.concatenate([inst.tails, inst.heads, verts, verts])
    vals = np.concatenate([-np.ones(m), np.ones(m), -np.ones(n), np.ones(n)])
    A = SparseMatrix.from_coo(rows, cols, vals, (m + 2 * n, n))
    x_init = np.concatenate([x, out_star, in_star])
    upper = np.concatenate([inst.cap.astype(float), 2 * out_star, 2 * in_star])
    c = np.concatenate([costs, np.full(2 * n, star_cost)])
    lp = LpInstance(A, inst.demand().astype(float), c, np.zeros(m + 2 * n), upper)
    return AugmentedFlow(lp, x_init, m, n, star_cost, W)


def flow_initial_point(aug: AugmentedFlow, eps: float, backends: Backends, mu: float | None = None):
    """Midpoint flow, s = costs, mu = 100 m^2 W^3 / eps; checked for centering."""
    lp = aug.lp
    if mu is None:
        mu = 100.0 * lp.m**2 * aug.W**3 / eps
    x = aug.x_init
    tau = backends.tau(x - lp.lower, lp.upper - x)
    state = make_triple(lp, x, lp.c.copy(), mu, tau, z=np.zeros(lp.n))
    y = centrality(state.s, mu, tau, state.xl, state.xu)
    if np.max(np.abs(y)) > eps:
        raise CenteringCheckFailed(f"initial point has ||y||_inf = {np.max(np.abs(y)):.3g}")
    return state


def perturbed_costs(inst: FlowInstance, rng: np.random.Generator) -> list[Fraction]:
    """c_e + k_e / (4 m^2 W^2) with k_e uniform in {1, ..., 2 m W}."""
    m = inst.m
    W = max(inst.W, 1)
    den = 4 * m * m * W * W
    ks = rng.integers(1, 2 * m * W + 1, size=m)
    return [Fraction(int(c)) + Fraction(int(k), den) for c, k in zip(inst.cost, ks)]


def has_negative_cycle(n: int, arcs) -> bool:
    """Bellman-Ford from a virtual root joined to every vertex."""
    dist = [0] * n
    for _ in range(n):
        changed = False
        for a, b, c in arcs:
            if dist[a] + c < dist[b]:
                dist[b] = dist[a] + c
                changed = True
        if not changed:
            return False
    return True


def verify_optimal(inst: FlowInstance, x) -> bool:
    """Integral feasibility plus absence of negative residual cycles."""
    x = np.asarray(x, dtype=np.int64)
    if np.any(x < 0) or np.any(x > inst.cap):
        return False
    if np.any(inst.net_inflow(x) != inst.demand()):
        return False
    arcs = []
    for e in range(inst.m):
        a, b, c = int(inst.tails[e]), int(inst.heads[e]), int(inst.cost[e])
        if x[e] < inst.cap[e]:
            arcs.append((a, b, c))
        if x[e] > 0:
            arcs.append((b, a, -c))
    return not has_negative_cycle(inst.n, arcs)


def _attempt(inst: FlowInstance, seed_seq, C: float, mode: str, check_every: int,
             check_invariants: bool, trace) -> tuple[str, FlowResult | None]:
    """One perturbed IPM run; returns ("ok", result), ("retry", None) or ("infeasible", None)."""
    rng = np.random.default_rng(seed_seq)
    costs = perturbed_costs(inst, rng)
    aug = augment_with_star(inst, [float(c) for c in costs])
    lp = aug.lp
    params = IpmParams.derive(lp.m, lp.n, C=C, mode=mode, seed=int(rng.integers(2**31)))
    backends = Backends(lp, params, check_invariants=check_invariants, seed=rng.integers(2**63),
                        trace=trace)
    mu_target = 1.0 / (12.0 * lp.m**2 * aug.W**3 * lp.n)
    found: dict = {}
    m0 = aug.m_orig
    # a near-optimal point with star flow sigma costs at least sigma * (c~ - 2 m W^2)
    # more than OPT, so sigma <= 12 n mu / (c~ - 2 m W^2) on feasible instances
    margin = aug.star_cost - 2.0 * max(m0, 1) * aug.W**2

    def star_bound(mu):
        return 12.0 * lp.n * mu / margin if margin > 0 else math.inf

    def examine(state):
        xf, _, _ = final_point(lp, state, backends)
        star = float(np.max(np.abs(xf[m0:])))
        if star >= 0.1:
            if star_bound(state.mu) < 0.05:
                found["infeasible"] = True
                return True
            return False
        xr = np.rint(xf[:m0]).astype(np.int64)
        if verify_optimal(inst, xr):
            found["x"] = xr
            return True
        return False

    def stop(state, t):
        found["last"] = state
        if mode != "practical" or state.mu > 1.0 or t % check_every:
            return False
        return examine(state)

    try:
        init = flow_initial_point(aug, params.eps, backends)
        found["last"] = init
        path_following(lp, init, mu_target, params, backends, stop=stop)
    except (CenteringLost, SingularSystem, OutOfDomain):
        pass
    state = found["last"]
    if "x" not in found and "infeasible" not in found:
        try:
            examine(state)
        except (SingularSystem, OutOfDomain):
            return "retry", None
    if found.get("infeasible"):
        return "infeasible", None
    if "x" not in found:
        return "retry", None
    x = found["x"]
    return "ok", FlowResult(x, inst.cost_of(x), 1, state.mu, backends.steps,
                            backends.records, backends.reports)


def _drop_trivial_edges(inst: FlowInstance):
    """Remove zero-capacity edges and self-loops (which carry no net flow)."""
    keep = np.flatnonzero((inst.cap > 0) & (inst.tails != inst.heads))
    sub = FlowInstance(inst.n, inst.tails[keep], inst.heads[keep], inst.cap[keep],
                       inst.cost[keep], inst.s, inst.t, inst.F)
    return sub, keep


def _run_attempt(args):
    return _attempt(*args)


def solve_mincost_flow(inst: FlowInstance, seed: int = 0, *, C: float = 4.0,
                       mode: str = "practical", retries: int = 64, check_every: int = 10,
                       check_invariants: bool = False, trace: Callable[[dict], None] | None = None,
                       jobs: int = 1) -> FlowResult:
    """Exact integral min-cost flow of value F from s to t.

    Each attempt perturbs the costs, follows the central path of the
    star-augmented LP, rounds the final point and accepts it only if the
    rounded flow is feasible and its residual graph has no negative cycle.
    """
    sub, keep = _drop_trivial_edges(inst)
    loops = (inst.tails == inst.heads) & (inst.cost < 0)
    base = np.where(loops, inst.cap, 0).astype(np.int64)
    if sub.F > 0 and sub.s != sub.t:
        if sub.F > int(sub.cap[sub.tails == sub.s].sum()):
            raise Infeasible("demand exceeds the capacity leaving s")
    if sub.m == 0:
        if sub.F == 0 or sub.s == sub.t:
            return FlowResult(base, inst.cost_of(base), 0, 0.0, 0)
        raise Infeasible("no edges to carry the demand")
    root = np.random.SeedSequence(seed)
    seqs = root.spawn(retries)
    attempt = 0
    while attempt < retries:
        batch = list(range(attempt, min(retries, attempt + max(1, jobs))))
        args = [(sub, seqs[i], C, mode, check_every, check_invariants, trace) for i in batch]
        if jobs > 1 and len(batch) > 1 and trace is None:
            with ProcessPoolExecutor(max_workers=jobs) as ex:
                outs = list(ex.map(_run_attempt, args))
        else:
            outs = []
            for a in args:
                outs.append(_run_attempt(a))
                if outs[-1][0] != "retry":
                    break
        for i, (status, res) in zip(batch, outs):
            if status == "infeasible":
                raise Infeasible("star edges keep flow at the final path parameter")
            if status == "ok":
                full = base.copy()
                full[keep] = res.flow
                return FlowResult(full, inst.cost_of(full), i + 1, res.mu, res.ipm_steps,
                                  res.records, res.reports)
        attempt = batch[-1] + 1
    raise RetriesExhausted(f"no verified optimum after {retries} attempts")


# ------------------------------------------------------------------ max flow

@dataclass(frozen=True)
class MaxFlowInstance:
    n: int
    tails: np.ndarray
    heads: np.ndarray
    cap: np.ndarray
    s: int
    t: int

    def __post_init__(self):
        for name in ("tails", "heads", "cap"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.int64).reshape(-1))

    @property
    def m(self) -> int:
        return int(self.tails.size)


@dataclass(frozen=True)
class MaxFlowResult:
    value: int
    flow: np.ndarray
    scales: int


def solve_maxflow(inst: MaxFlowInstance, seed: int = 0, *, C: float = 4.0, mode: str = "practical",
                  retries: int = 64, check_invariants: bool = False, trace=None,
                  jobs: int = 1, reports: list | None = None,
                  records: list | None = None) -> MaxFlowResult:
    """Capacity scaling; each scale solves a min-cost circulation on G_f(Delta).

    The residual arcs with capacity >= Delta (capped at 2 m Delta) get cost 0
    and a return arc t -> s of cost -1 closes the circulation, so the optimal
    circulation routes a maximum s-t flow in G_f(Delta).
    """
    m = inst.m
    f = np.zeros(m, dtype=np.int64)
    umax = int(inst.cap.max(initial=0))
    if umax <= 0 or inst.s == inst.t:
        return MaxFlowResult(0, f, 0)
    delta = 1 << (umax.bit_length() - 1)
    scales = 0
    while delta >= 1:
        scales += 1
        tails, heads, caps, refs = [], [], [], []
        for e in range(m):
            fwd, bwd = int(inst.cap[e] - f[e]), int(f[e])
            if fwd >= delta:
                tails.append(inst.tails[e]); heads.append(inst.heads[e])
                caps.append(min(fwd, 2 * m * delta)); refs.append((e, 1))
            if bwd >= delta:
                tails.append(inst.heads[e]); heads.append(inst.tails[e])
                caps.append(min(bwd, 2 * m * delta)); refs.append((e, -1))
        if refs:
            ret_cap = min(2 * m * delta, sum(c for c, a in zip(caps, tails) if a == inst.s))
            if ret_cap > 0:
                tails.append(inst.t); heads.append(inst.s); caps.append(ret_cap)
                costs = [0] * len(refs) + [-1]
                sub = FlowInstance(inst.n, tails, heads, caps, costs, inst.s, inst.t, 0)
                res = solve_mincost_flow(sub, seed + scales, C=C, mode=mode, retries=retries,
                                         check_invariants=check_invariants, trace=trace, jobs=jobs)
                if reports is not None:
                    reports.extend(res.reports)
                if records is not None:
                    records.extend(res.records)
                for (e, d), v in zip(refs, res.flow[:-1]):
                    f[e] += d * int(v)
        delta //= 2
    value = int(_net_out(inst, f))
    return MaxFlowResult(value, f, scales)


def _net_out(inst: MaxFlowInstance, f) -> int:
    return int(f[inst.tails == inst.s].sum() - f[inst.heads == inst.s].sum())


# ------------------------------------------------------------------ general demands

@dataclass(frozen=True)
class FlowNetwork:
    """DIMACS-style network: supplies (positive = source) and edge lower bounds."""

    n: int
    tails: np.ndarray
    heads: np.ndarray
    low: np.ndarray
    cap: np.ndarray
    cost: np.ndarray
    supply: np.ndarray

    def __post_init__(self):
        for name in ("tails", "heads", "low", "cap", "cost", "supply"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.int64).reshape(-1))
        if np.any(self.low > self.cap):
            raise ValueError("lower bound exceeds capacity")

    @property
    def m(self) -> int:
        return int(self.tails.size)


def reduce_to_st(net: FlowNetwork) -> tuple[FlowInstance, int]:
    """Shift lower bounds and add a super source S and sink T.

    Returns the s-t instance (original edges first) and the constant cost
    contributed by the lower bounds.
    """
    n, m = net.n, net.m
    b = net.supply.copy()
    np.subtract.at(b, net.tails, net.low)
    np.add.at(b, net.heads, net.low)
    S, T = n, n + 1
    pos, neg = np.flatnonzero(b > 0), np.flatnonzero(b < 0)
    tails = np.concatenate([net.tails, np.full(pos.size, S), neg])
    heads = np.concatenate([net.heads, pos, np.full(neg.size, T)])
    cap = np.concatenate([net.cap - net.low, b[pos], -b[neg]])
    cost = np.concatenate([net.cost, np.zeros(pos.size + neg.size, dtype=np.int64)])
    F = int(b[pos].sum())
    if F != int(-b[neg].sum()):
        raise Infeasible("supplies do not sum to zero")
    inst = FlowInstance(n + 2, tails, heads, cap, cost, S, T, F)
    return inst, int(np.dot(net.low, net.cost))


def solve_network(net: FlowNetwork, seed: int = 0, **kw) -> FlowResult:
    """Min-cost flow for a general network via the s-t reduction."""
    inst, offset = reduce_to_st(net)
    res = solve_mincost_flow(inst, seed, **kw)
    x = res.flow[: net.m] + net.low
    return FlowResult(x, int(np.dot(net.cost, x)), res.attempts, res.mu, res.ipm_steps,
                      res.records, res.reports)


def network_from_st(inst: FlowInstance) -> FlowNetwork:
    supply = np.zeros(inst.n, dtype=np.int64)
    if inst.s != inst.t:
        supply[inst.s] += inst.F
        supply[inst.t] -= inst.F
    return FlowNetwork(inst.n, inst.tails, inst.heads, np.zeros(inst.m, dtype=np.int64),
                       inst.cap, inst.cost, supply)


# ------------------------------------------------------------------ DIMACS

def _tokens(text: str):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        yield lineno, line.split()


def _int(tok: str, lineno: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"expected an integer, got {tok!r}", lineno) from None


def _ints(tok, lineno: int) -> list[int]:
    """Integer fields of an arc line; errors quote the whole line."""
    try:
        return [int(t) for t in tok[1:]]
    except ValueError:
        raise ParseError(f"non-integer field in arc line {' '.join(tok)!r}", lineno) from None


def parse_dimacs_min(text: str) -> FlowNetwork:
    n = m = None
    supply = None
    arcs = []
    for lineno, tok in _tokens(text):
        kind = tok[0]
        if kind == "p":
            if len(tok) != 4 or tok[1] != "min":
                raise ParseError("expected 'p min NODES ARCS'", lineno)
            n, m = _int(tok[2], lineno), _int(tok[3], lineno)
            supply = np.zeros(n, dtype=np.int64)
        elif n is None:
            raise ParseError("problem line must come first", lineno)
        elif kind == "n":
            if len(tok) != 3:
                raise ParseError("expected 'n ID FLOW'", lineno)
            v = _int(tok[1], lineno)
            if not 1 <= v <= n:
                raise ParseError(f"node {v} out of range", lineno)
            supply[v - 1] += _int(tok[2], lineno)
        elif kind == "a":
            if len(tok) != 6:
                raise ParseError(f"malformed arc line {' '.join(tok)!r}: expected 'a SRC DST LOW CAP COST'", lineno)
            a, b, lo, hi, c = _ints(tok, lineno)
            if not (1 <= a <= n and 1 <= b <= n):
                raise ParseError(f"arc endpoint out of range in {' '.join(tok)!r}", lineno)
            if lo < 0 or hi < lo:
                raise ParseError(f"bad bounds in {' '.join(tok)!r}", lineno)
            arcs.append((a - 1, b - 1, lo, hi, c))
        else:
            raise ParseError(f"unknown line type {kind!r}", lineno)
    if n is None:
        raise ParseError("missing problem line")
    if len(arcs) != m:
        raise ParseError(f"expected {m} arcs, found {len(arcs)}")
    arr = np.array(arcs, dtype=np.int64).reshape(-1, 5)
    return FlowNetwork(n, arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4], supply)


def write_dimacs_min(net: FlowNetwork) -> str:
    lines = [f"p min {net.n} {net.m}"]
    for v in range(net.n):
        if net.supply[v] != 0:
            lines.append(f"n {v + 1} {int(net.supply[v])}")
    for e in range(net.m):
        lines.append(f"a {net.tails[e] + 1} {net.heads[e] + 1} {int(net.low[e])} "
                     f"{int(net.cap[e])} {int(net.cost[e])}")
    return "\n".join(lines) + "\n"


def parse_dimacs_max(text: str) -> MaxFlowInstance:
    n = m = None
    s = t = None
    arcs = []
    for lineno, tok in _tokens(text):
        kind = tok[0]
        if kind == "p":
            if len(tok) != 4 or tok[1] != "max":
                raise ParseError("expected 'p max NODES ARCS'", lineno)
            n, m = _int(tok[2], lineno), _int(tok[3], lineno)
        elif n is None:
            raise ParseError("problem line must come first", lineno)
        elif kind == "n":
            if len(tok) != 3 or tok[2] not in ("s", "t"):
                raise ParseError("expected 'n ID s' or 'n ID t'", lineno)
            v = _int(tok[1], lineno)
            if not 1 <= v <= n:
                raise ParseError(f"node {v} out of range", lineno)
            if tok[2] == "s":
                s = v - 1
            else:
                t = v - 1
        elif kind == "a":
            if len(tok) != 4:
                raise ParseError(f"malformed arc line {' '.join(tok)!r}: expected 'a SRC DST CAP'", lineno)
            a, b, c = _ints(tok, lineno)
            if not (1 <= a <= n and 1 <= b <= n) or c < 0:
                raise ParseError(f"bad arc {' '.join(tok)!r}", lineno)
            arcs.append((a - 1, b - 1, c))
        else:
            raise ParseError(f"unknown line type {kind!r}", lineno)
    if n is None:
        raise ParseError("missing problem line")
    if s is None or t is None:
        raise ParseError("source and sink lines are required")
    if len(arcs) != m:
        raise ParseError(f"expected {m} arcs, found {len(arcs)}")
    arr = np.array(arcs, dtype=np.int64).reshape(-1, 3)
    return MaxFlowInstance(n, arr[:, 0], arr[:, 1], arr[:, 2], s, t)


def write_dimacs_max(inst: MaxFlowInstance) -> str:
    lines = [f"p max {inst.n} {inst.m}", f"n {inst.s + 1} s", f"n {inst.t + 1} t"]
    for e in range(inst.m):
        lines.append(f"a {inst.tails[e] + 1} {inst.heads[e] + 1} {int(inst.cap[e])}")
    return "\n".join(lines) + "\n"


def write_flow_solution(value: int, tails, heads, flow) -> str:
    lines = [f"s {int(value)}"]
    for a, b, x in zip(tails, heads, flow):
        lines.append(f"f {int(a) + 1} {int(b) + 1} {int(x)}")
    return "\n".join(lines) + "\n"


def parse_flow_solution(text: str) -> tuple[int, np.ndarray]:
    value, flows = None, []
    for lineno, tok in _tokens(text):
        if tok[0] == "s":
            value = _int(tok[1], lineno)
        elif tok[0] == "f" and len(tok) == 4:
            flows.append(_int(tok[3], lineno))
        else:
            raise ParseError("expected 's VALUE' or 'f SRC DST FLOW'", lineno)
    if value is None:
        raise ParseError("missing solution line")
    return value, np.array(flows, dtype=np.int64)
