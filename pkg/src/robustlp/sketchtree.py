"""JL segment tree over the rows of G A, heavy hitters and valid samplers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetTooSmall
from .linalg import C_JL, SparseMatrix, as_scaling, jl_size

E4 = math.exp(4.0)


@dataclass(frozen=True)
class SampleMatrix:
    """Sparse random diagonal matrix R given by (index, weight) pairs."""

    m: int
    indices: np.ndarray
    weights: np.ndarray

    def diag(self) -> np.ndarray:
        d = np.zeros(self.m)
        d[self.indices] = self.weights
        return d

    @property
    def nnz(self) -> int:
        return int(self.indices.size)


class SketchTree:
    """Binary segment tree; node (l, j) stores Q = J^{l,j} [GA]^{l,j}.

    Rows are padded with zeros to a power of two.  Each node owns an
    independent Gaussian sketch with k = ceil(C_jl c^-2 log m) rows where
    c = 1/log(4m).
    """

    def __init__(self, A, g, seed=None, c_jl: float = C_JL, k: int | None = None):
        Ad = A.toarray() if isinstance(A, SparseMatrix) else np.asarray(A, dtype=float)
        self.m, self.n = Ad.shape
        self.depth = max(0, math.ceil(math.log2(max(self.m, 1))))
        self.size = 1 << self.depth
        self.A = np.zeros((self.size, self.n))
        self.A[: self.m] = Ad
        self.g = np.zeros(self.size)
        self.g[: self.m] = as_scaling(g, self.m)
        self.c = 1.0 / math.log(4 * max(self.m, 1))
        self.k = k if k is not None else jl_size(self.c, self.m, c_jl)
        rng = np.random.default_rng(seed)
        self.J: list[list[np.ndarray]] = []
        self.Q: list[list[np.ndarray]] = []
        GA = self.g[:, None] * self.A
        for lvl in range(self.depth + 1):
            width = self.size >> lvl
            Js, Qs = [], []
            for j in range(1 << lvl):
                J = rng.standard_normal((self.k, width)) / math.sqrt(self.k)
                Js.append(J)
                Qs.append(J @ GA[j * width:(j + 1) * width])
            self.J.append(Js)
            self.Q.append(Qs)

    def scale(self, i: int, s: float) -> None:
        """Set g_i <- s and patch the log m sketches covering row i."""
        if not s >= 0:
            raise ValueError("scaling must be non-negative")
        diff = s - self.g[i]
        if diff == 0:
            return
        a = self.A[i]
        for lvl in range(self.depth + 1):
            width = self.size >> lvl
            j, off = divmod(i, width)
            self.Q[lvl][j] += diff * np.outer(self.J[lvl][j][:, off], a)
        self.g[i] = s

    def node_norm2(self, lvl: int, j: int, h) -> float:
        v = self.Q[lvl][j] @ h
        return float(v @ v)

    def exact_values(self, h) -> np.ndarray:
        return (self.g * (self.A @ np.asarray(h, float)))[: self.m]

    def recompute_error(self) -> float:
        """Largest deviation between stored sketches and J [GA] recomputed."""
        GA = self.g[:, None] * self.A
        worst = 0.0
        for lvl in range(self.depth + 1):
            width = self.size >> lvl
            for j in range(1 << lvl):
                ref = self.J[lvl][j] @ GA[j * width:(j + 1) * width]
                worst = max(worst, float(np.max(np.abs(ref - self.Q[lvl][j]), initial=0.0)))
        return worst

    def root_bound(self, h) -> float:
        """Upper estimate e^{2c} ||Q_root h||^2 of ||GAh||^2."""
        return math.exp(2 * self.c) * self.node_norm2(0, 0, h)


def tree_init(A, g, seed=None, c_jl: float = C_JL, k: int | None = None) -> SketchTree:
    return SketchTree(A, g, seed, c_jl, k)


def tree_scale(t: SketchTree, i: int, s: float) -> None:
    t.scale(i, s)


def tree_sample(t: SketchTree, h, U: float, rng=None) -> int | None:
    """Return j with probability exactly (GAh)_j^2 / U, else None.

    The descent follows sketched child norms; the leaf acceptance step
    divides out the accumulated path probability Z.
    """
    rng = np.random.default_rng(rng)
    h = np.asarray(h, dtype=float)
    Z, j = 1.0, 0
    for lvl in range(1, t.depth + 1):
        left, right = t.node_norm2(lvl, 2 * j, h), t.node_norm2(lvl, 2 * j + 1, h)
        tot = left + right
        if tot == 0:
            return None
        pl = left / tot
        if rng.random() < pl:
            j, Z = 2 * j, Z * pl
        else:
            j, Z = 2 * j + 1, Z * (1 - pl)
    if j >= t.m:
        return None
    v = t.g[j] * (t.A[j] @ h)
    ratio = v * v / (U * Z)
    if ratio > 1:
        raise BudgetTooSmall(f"leaf acceptance ratio {ratio:.3g} > 1")
    return j if rng.random() < ratio else None


def heavy_query(t: SketchTree, h, eps: float, safety: float = math.e) -> np.ndarray:
    """Exactly the indices with |(GAh)_i| >= eps.

    A node is pruned when safety * ||Q h|| < eps; survivors are checked with
    exact dot products at the leaves.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    h = np.asarray(h, dtype=float)
    out = []
    stack = [(0, 0)]
    while stack:
        lvl, j = stack.pop()
        if safety * math.sqrt(t.node_norm2(lvl, j, h)) < eps:
            continue
        if lvl == t.depth:
            if j < t.m and abs(t.g[j] * (t.A[j] @ h)) >= eps:
                out.append(j)
            continue
        stack.append((lvl + 1, 2 * j + 1))
        stack.append((lvl + 1, 2 * j))
    return np.array(sorted(out), dtype=np.int64)


# ------------------------------------------------------------------ samplers

@dataclass(frozen=True)
class SamplerConstants:
    C_valid: float = 4.0
    C_sample: float = 1.0
    C1: float = 1.0
    C2: float = 1.0
    C3: float = 4.0
    C0_cap: float | None = 1e4

    @classmethod
    def theory(cls, gamma: float) -> "SamplerConstants":
        cv = 4.0
        # C1 * C2 >= C_valid^4 / gamma^2 and C3 >= 4 C_sample
        return cls(C_valid=cv, C_sample=1.0, C1=cv**2 / gamma, C2=cv**2 / gamma, C3=4.0, C0_cap=None)


def independent_probabilities(deltas, sigma, gamma, C_valid=4.0, C_sample=1.0) -> np.ndarray:
    deltas, sigma = np.asarray(deltas, float), np.asarray(sigma, float)
    m = deltas.size
    q = C_valid**2 / gamma * np.abs(deltas) + C_sample * sigma * math.log(max(m, 2)) / gamma**2
    return np.minimum(q, 1.0)


def sample_valid_independent(deltas, sigma, gamma, C_valid=4.0, C_sample=1.0, seed=None) -> SampleMatrix:
    """R_ii = 1/min(q_i,1) with probability min(q_i,1), independently."""
    rng = np.random.default_rng(seed)
    q = independent_probabilities(deltas, sigma, gamma, C_valid, C_sample)
    keep = np.flatnonzero(rng.random(q.size) < q)
    return SampleMatrix(q.size, keep, 1.0 / q[keep])


def mixture_weights(l2_part, tau, gamma, n, consts: SamplerConstants) -> tuple[np.ndarray, np.ndarray]:
    """(C1 sqrt(n) v_i^2, C2/sqrt(n) + C3 tau_i gamma^-2 log m)."""
    m = tau.size
    p1 = consts.C1 * math.sqrt(n) * l2_part**2
    p2 = consts.C2 / math.sqrt(n) + consts.C3 * tau * math.log(max(m, 2)) / gamma**2
    return p1, p2


def sample_valid_proportional(t: SketchTree, h, tau, gamma, consts: SamplerConstants | None = None,
                              seed=None, C0: float | None = None,
                              max_tree_draws: int = 10**6) -> SampleMatrix:
    """Average of N i.i.d. draws X = e_i/p_i w.p. p_i/S' (else 0).

    Each draw flips a balanced coin between the l2 part (tree_sample on
    sqrt(C1 sqrt n) GAh) and the uniform+tau part, both normalized by the
    same budget T, so S' = 2T >= sum p.  R is scaled by S'/N so that
    E[R] = I exactly.  Large N uses a multinomial over the same exact
    probabilities instead of N tree descents.
    """
    consts = consts or SamplerConstants()
    rng = np.random.default_rng(seed)
    tau = np.asarray(tau, dtype=float)
    m, n = t.m, t.n
    v = t.exact_values(h)
    p1, p2 = mixture_weights(v, tau, gamma, n, consts)
    p = p1 + p2
    scale1 = consts.C1 * math.sqrt(n)
    U = E4 * max(m / n, t.root_bound(h))
    T = max(scale1 * U, float(p2.sum()))
    U = T / scale1
    S = 2 * T
    if C0 is None:
        C0 = 100 * consts.C_valid**4 * math.log(max(m, 2)) / gamma**2
        if consts.C0_cap is not None:
            C0 = min(C0, consts.C0_cap)
    N = max(1, int(math.ceil(C0 * S)))
    if N <= max_tree_draws:
        counts = np.zeros(m, dtype=np.int64)
        cdf = np.cumsum(p2) / T
        for _ in range(N):
            if rng.random() < 0.5:
                i = tree_sample(t, h, U, rng)
            else:
                u = rng.random()
                i = int(np.searchsorted(cdf, u, side="right")) if u < cdf[-1] else None
            if i is not None:
                counts[i] += 1
    else:
        probs = np.append(p / S, max(0.0, 1.0 - p.sum() / S))
        counts = rng.multinomial(N, probs / probs.sum())[:m]
    idx = np.flatnonzero(counts)
    return SampleMatrix(m, idx, counts[idx] * S / (N * p[idx]))


def sum_bound(m, n, gamma, consts: SamplerConstants) -> float:
    return (consts.C1 + consts.C2) * m / math.sqrt(n) + consts.C3 * n * math.log(max(m, 2)) / gamma**2
