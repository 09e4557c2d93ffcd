"""Sparse matrix container, normal-equation solvers and JL sketches."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NonFiniteInput, SingularSystem

SINGULAR_TOL = 1e-12
C_JL = 8.0


def check_finite(*arrays, names: str = "input") -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFiniteInput(f"{names} contains NaN or Inf")


class SparseMatrix:
    """Row-compressed m x n real matrix.

    Thin immutable wrapper around a canonical scipy CSR matrix (sorted
    column indices, no duplicates, no explicit zeros).
    """

    __slots__ = ("_csr", "_dense")

    def __init__(self, data):
        csr = sp.csr_matrix(data, dtype=float, copy=True)
        csr.sum_duplicates()
        csr.eliminate_zeros()
        csr.sort_indices()
        check_finite(csr.data, names="matrix")
        self._csr = csr
        self._dense = None

    @classmethod
    def from_coo(cls, rows, cols, vals, shape) -> "SparseMatrix":
        return cls(sp.coo_matrix((vals, (rows, cols)), shape=shape))

    @property
    def shape(self) -> tuple[int, int]:
        return self._csr.shape

    @property
    def m(self) -> int:
        return self._csr.shape[0]

    @property
    def n(self) -> int:
        return self._csr.shape[1]

    @property
    def nnz(self) -> int:
        return self._csr.nnz

    @property
    def csr(self) -> sp.csr_matrix:
        return self._csr

    def row_nnz(self) -> np.ndarray:
        return np.diff(self._csr.indptr)

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self._csr.indptr[i], self._csr.indptr[i + 1]
        return self._csr.indices[lo:hi], self._csr.data[lo:hi]

    def toarray(self) -> np.ndarray:
        # cached; callers must not mutate the result
        if self._dense is None:
            self._dense = self._csr.toarray()
            self._dense.setflags(write=False)
        return self._dense

    def matvec(self, h) -> np.ndarray:
        return self._csr @ np.asarray(h, dtype=float)

    def rmatvec(self, y) -> np.ndarray:
        return self._csr.T @ np.asarray(y, dtype=float)

    def __repr__(self) -> str:
        return f"SparseMatrix(shape={self.shape}, nnz={self.nnz})"


def as_scaling(d, m: int) -> np.ndarray:
    """Validate a diagonal scaling given as a length-m vector."""
    d = np.broadcast_to(np.asarray(d, dtype=float), (m,)).copy()
    check_finite(d, names="scaling")
    if np.any(d < 0):
        raise ValueError("diagonal scaling must be non-negative")
    return d


def apply_scaled(A: SparseMatrix, g, h) -> np.ndarray:
    """Return G A h."""
    return as_scaling(g, A.m) * A.matvec(h)


@dataclass(frozen=True)
class SolveReport:
    solution: np.ndarray
    residual_norm: float
    iterations: int
    method: str = "cholesky"


class NormalFactor:
    """Factorization of A^T D A reused across several right-hand sides."""

    def __init__(self, A: SparseMatrix, d, method: str = "auto"):
        d = as_scaling(d, A.m)
        self.n = A.n
        M = (A.csr.T @ sp.diags(d) @ A.csr).tocsr()
        self.M = M
        diag = M.diagonal()
        scale = max(float(diag.max(initial=0.0)), 1e-300)
        if method == "auto":
            method = "pcg" if _is_incidence_like(A) and _is_sdd(M) else "cholesky"
        self.method = method
        if method == "pcg":
            dinv = np.where(diag > SINGULAR_TOL * scale, 1.0 / np.maximum(diag, 1e-300), 0.0)
            self._precond = spla.LinearOperator((self.n, self.n), matvec=lambda v: dinv * v)
            self._dense = None
        elif method == "cholesky":
            dense = M.toarray()
            # Jacobi-scaled pivots are compared against the relative floor
            if np.any(diag <= SINGULAR_TOL * scale):
                raise SingularSystem("zero pivot in normal equations")
            s = 1.0 / np.sqrt(diag)
            self._s = s
            try:
                self._cho = scipy.linalg.cho_factor(dense * s[:, None] * s[None, :], lower=True)
            except np.linalg.LinAlgError as exc:
                raise SingularSystem(str(exc)) from None
            piv = np.abs(np.diag(self._cho[0]))
            if piv.min() ** 2 < SINGULAR_TOL:
                raise SingularSystem("pivot below 1e-12 of the trace scale")
        else:
            raise ValueError(f"unknown method {method!r}")

    def solve(self, rhs, rel_tol: float = 1e-10) -> SolveReport:
        rhs = np.asarray(rhs, dtype=float)
        check_finite(rhs, names="rhs")
        if self.method == "cholesky":
            x = self._s * scipy.linalg.cho_solve(self._cho, self._s * rhs)
            it = 1
        else:
            count = [0]

            def cb(_):
                count[0] += 1

            bnorm = np.linalg.norm(rhs)
            if bnorm == 0:
                x = np.zeros(self.n)
            else:
                # energy-norm error <= rel_tol follows from a small enough residual
                x, info = spla.cg(self.M, rhs, rtol=rel_tol * 1e-3, atol=0.0,
                                  maxiter=20 * self.n + 100, M=self._precond, callback=cb)
                if info != 0:
                    dense = self.M.toarray()
                    x = np.linalg.lstsq(dense, rhs, rcond=None)[0]
            it = count[0]
        res = float(np.linalg.norm(self.M @ x - rhs))
        return SolveReport(x, res, it, self.method)


def _is_incidence_like(A: SparseMatrix) -> bool:
    return A.nnz > 0 and int(A.row_nnz().max()) <= 2


def _is_sdd(M: sp.csr_matrix) -> bool:
    diag = M.diagonal()
    off = np.asarray(abs(M).sum(axis=1)).ravel() - np.abs(diag)
    return bool(np.all(diag >= off - 1e-12 * np.abs(diag)))


def solve_normal_equations(A: SparseMatrix, d, rhs, rel_tol: float = 1e-10,
                           method: str = "auto") -> SolveReport:
    """Solve A^T D A x = rhs.

    PCG with a Jacobi preconditioner is used for SDD systems coming from
    matrices with at most two nonzeros per row; dense Cholesky otherwise.
    """
    if not 0 < rel_tol < 1:
        raise ValueError("rel_tol must lie in (0, 1)")
    return NormalFactor(A, d, method).solve(rhs, rel_tol)


def jl_size(eps: float, m: int, const: float = C_JL) -> int:
    return int(math.ceil(const * eps ** -2 * math.log(max(m, 2))))


def jl_sketch(eps: float, m: int, seed=None, const: float = C_JL) -> np.ndarray:
    """Dense Gaussian JL matrix with ceil(const * eps^-2 * log m) rows."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    k = jl_size(eps, m, const)
    rng = np.random.default_rng(seed)
    return rng.standard_normal((k, m)) / math.sqrt(k)


def read_matrix_market(path) -> SparseMatrix:
    return SparseMatrix(scipy.io.mmread(str(path)))


def write_matrix_market(path, A: SparseMatrix) -> None:
    scipy.io.mmwrite(str(Path(path)), A.csr.tocoo(), field="real", symmetry="general")
