"""Leverage scores, regularized Lewis weights and their lazy maintenance."""

from __future__ import annotations

import math

import numpy as np

from .errors import DriftTooLarge, NotConverged, SingularSystem
from .linalg import SparseMatrix, as_scaling, check_finite, jl_sketch

RANK_TOL = 1e-12


def _dense(A) -> np.ndarray:
    return A.toarray() if isinstance(A, SparseMatrix) else np.asarray(A, dtype=float)


def _orthobasis(B: np.ndarray) -> np.ndarray:
    """Orthonormal basis Q of range(B), raising SingularSystem on rank loss."""
    norms = np.linalg.norm(B, axis=0)
    if np.any(norms == 0):
        raise SingularSystem("scaled matrix has a zero column")
    Q, R = np.linalg.qr(B / norms)
    rd = np.abs(np.diag(R))
    if rd.min() <= RANK_TOL * rd.max():
        raise SingularSystem("scaled matrix is rank deficient")
    return Q


def dense_leverage(B: np.ndarray) -> np.ndarray:
    """Leverage scores of an already scaled dense matrix."""
    Q = _orthobasis(B)
    return np.einsum("ij,ij->i", Q, Q)


def leverage_scores(A, g, mode: str = "exact", eps: float = 0.1, seed=None) -> np.ndarray:
    """Leverage scores sigma(GA).

    ``mode="sketched"`` returns ||e_i^T GA (A^T G^2 A)^{-1} A^T G J^T||^2 for a
    JL matrix J with accuracy eps/2 on norms, i.e. e^{+-eps} on the scores.
    """
    Ad = _dense(A)
    g = as_scaling(g, Ad.shape[0])
    B = g[:, None] * Ad
    if mode == "exact":
        return dense_leverage(B)
    if mode != "sketched":
        raise ValueError(f"unknown mode {mode!r}")
    Q = _orthobasis(B)
    J = jl_sketch(eps / 2, Ad.shape[0], seed)
    P = Q @ (Q.T @ J.T)
    return np.einsum("ij,ij->i", P, P)


def lewis_iterations(m: int, p: float, tol: float, buffer: int = 5) -> int:
    """Contraction steps needed from w = 1: error log(m) shrinks by |1-p/2| per step."""
    rate = abs(1 - p / 2)
    if rate == 0:
        return 1 + buffer
    return int(math.ceil(math.log(max(math.log(max(m, 2)), 1.0) / tol) / math.log(1 / rate))) + buffer


def lewis_target(Ad: np.ndarray, g: np.ndarray, z: np.ndarray, p: float, w: np.ndarray) -> np.ndarray:
    """sigma(W^{1/2-1/p} G A) + z."""
    return dense_leverage((w ** (0.5 - 1 / p) * g)[:, None] * Ad) + z


def lewis_residual(A, g, z, p: float, w) -> float:
    """||log w - log(sigma(W^{1/2-1/p} G A) + z)||_inf."""
    Ad = _dense(A)
    t = lewis_target(Ad, as_scaling(g, Ad.shape[0]), np.asarray(z, float), p, np.asarray(w, float))
    return float(np.max(np.abs(np.log(w) - np.log(t))))


def lewis_step(Ad, g, z, p, w, target=None) -> np.ndarray:
    """One contraction step w <- (w^{2/p-1} (sigma(W^{1/2-1/p} G A) + z))^{p/2}."""
    if target is None:
        target = lewis_target(Ad, g, z, p, w)
    return (w ** (2 / p - 1) * target) ** (p / 2)


def check_regularizer(z, n: int, strict: bool = False) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    check_finite(z, names="regularizer")
    m = z.size
    if np.any(z <= 0):
        raise ValueError("regularizer must be positive")
    if strict and (np.any(z < n / m * (1 - 1e-12)) or z.sum() > 4 * n * (1 + 1e-12)):
        raise ValueError("regularizer must satisfy z_i >= n/m and ||z||_1 <= 4n")
    return z


def lewis_fixed_point(A, g, z, p: float, tol: float = 1e-10, w0=None,
                      max_iter: int = 500) -> np.ndarray:
    """Regularized l_p Lewis weights w = sigma(W^{1/2-1/p} G A) + z.

    Iterates the contraction from w = 1 (or ``w0``) until the log-scale
    fixed-point residual is at most ``tol``.
    """
    if not 0 < p <= 2:
        raise ValueError("p must lie in (0, 2]")
    Ad = _dense(A)
    m, n = Ad.shape
    g = as_scaling(g, m)
    z = check_regularizer(z, n)
    w = np.ones(m) if w0 is None else np.asarray(w0, dtype=float).copy()
    for _ in range(max_iter):
        target = lewis_target(Ad, g, z, p, w)
        if np.max(np.abs(np.log(w) - np.log(target))) <= tol:
            return w
        w = lewis_step(Ad, g, z, p, w, target)
    raise NotConverged(f"Lewis iteration did not reach tol={tol} in {max_iter} steps")


def regularizer_for(A: SparseMatrix) -> np.ndarray:
    """z = n/m + n c/||c||_1 with per-row cost c_i = nnz(a_i)."""
    m, n = A.shape
    c = A.row_nnz().astype(float)
    return n / m + n * c / c.sum()


class LewisState:
    """Lazy multi-level maintenance of regularized Lewis weights.

    Level j+1 is one contraction step applied to level j under the current
    scaling; the top level v[0] is rewritten only where the last level has
    drifted by more than e^{eps/10}.  With ``verify=True`` (practical mode)
    every query also checks the fixed-point residual of v[0] and re-runs the
    contraction to convergence if it exceeds eps.
    """

    def __init__(self, A, g, z, p: float, delta: float = 1.0, eps: float = 0.1,
                 sketch_eps: float | None = None, seed=None, verify: bool = True,
                 check_drift: bool = False):
        if not 0.5 <= p < 2:
            raise ValueError("p must lie in [1/2, 2)")
        self.Ad = _dense(A)
        m, n = self.Ad.shape
        self.p, self.eps, self.delta = p, eps, max(delta, 1.0)
        self.z = check_regularizer(z, n)
        self.g = as_scaling(g, m).copy()
        self._g_last = self.g.copy()
        self.sketch_eps = sketch_eps
        self.rng = np.random.default_rng(seed)
        self.verify = verify
        self.check_drift = check_drift
        self.L = int(math.ceil(math.log(200 * self.delta, 4 / 3) + 1))
        # distance to the fixed point is at most 2/p <= 4 times the residual, so
        # eps/100 keeps the untouched chain inside the eps/10 write-back band
        v1 = lewis_fixed_point(self.Ad, self.g, self.z, p, tol=eps / 100)
        self.levels = [v1]
        for _ in range(self.L - 1):
            self.levels.append(self._next(self.levels[-1]))

    @property
    def weights(self) -> np.ndarray:
        return self.levels[0]

    def _sigma(self, v: np.ndarray) -> np.ndarray:
        B = (v ** (0.5 - 1 / self.p) * self.g)[:, None] * self.Ad
        if self.sketch_eps is None:
            return dense_leverage(B) + self.z
        return leverage_scores(B, 1.0, "sketched", self.sketch_eps,
                               self.rng.integers(2**63)) + self.z

    def _next(self, v: np.ndarray) -> np.ndarray:
        return (v ** (2 / self.p - 1) * self._sigma(v)) ** (self.p / 2)

    def scale(self, i: int, b: float) -> None:
        if not b >= 0 or not math.isfinite(b):
            raise ValueError("scale value must be finite and non-negative")
        self.g[i] = b

    def set_scaling(self, g) -> None:
        self.g = as_scaling(g, self.g.size).copy()

    def query(self) -> tuple[np.ndarray, np.ndarray]:
        """Refresh the chain; return (rewritten indices, v^(1))."""
        if self.check_drift:
            drift = np.max(np.abs(np.log(self.g) - np.log(self._g_last)))
            if drift > 2 * self.delta * self.eps:
                raise DriftTooLarge(f"scaling drift {drift:.3g} exceeds 2*delta*eps")
        self._g_last = self.g.copy()
        for j in range(self.L - 1):
            self.levels[j + 1] = self._next(self.levels[j])
        v1, vL = self.levels[0], self.levels[-1]
        changed = np.flatnonzero(np.abs(np.log(vL) - np.log(v1)) > self.eps / 10)
        v1[changed] = vL[changed]
        if self.verify and self.residual() > self.eps:
            old = v1.copy()
            fresh = lewis_fixed_point(self.Ad, self.g, self.z, self.p, tol=self.eps / 100, w0=v1)
            self.levels[0] = fresh
            for j in range(self.L - 1):
                self.levels[j + 1] = self._next(self.levels[j])
            changed = np.flatnonzero(fresh != old)
        return changed, self.levels[0]

    def residual(self) -> float:
        return lewis_residual(self.Ad, self.g, self.z, self.p, self.levels[0])
