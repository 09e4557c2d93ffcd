"""Step-size and accuracy parameters of the path-following method."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace


@dataclass(frozen=True)
class IpmParams:
    m: int
    n: int
    C: float
    alpha: float
    p: float
    eps: float
    lam: float
    gamma: float
    c_norm: float
    r: float
    mode: str = "practical"
    seed: int = 0
    # practical-mode controls
    step_scale: float = 1e8
    max_step: float = 0.05
    max_backtracks: int = 30
    max_correctors: int = 8
    newton_cap: float = 0.5
    C_start: float = 8.0

    @classmethod
    def derive(cls, m: int, n: int, C: float = 4.0, mode: str = "practical",
               seed: int = 0, **kw) -> "IpmParams":
        if mode not in ("practical", "theory"):
            raise ValueError("mode must be 'practical' or 'theory'")
        if C < 2:
            raise ValueError("C must be at least 2")
        if m < n or n < 1:
            raise ValueError("need m >= n >= 1")
        alpha = 1.0 / (4.0 * math.log(4.0 * m / n))
        eps = alpha / C
        lam = C * math.log(C * m / eps**2) / eps
        gamma = eps / (C * lam)
        c_norm = C / alpha
        r = eps * gamma / (c_norm * math.sqrt(n))
        kw.setdefault("C_start", 2 * C)
        return cls(m, n, C, alpha, 1.0 - alpha, eps, lam, gamma, c_norm, r, mode, seed, **kw)

    def with_(self, **kw) -> "IpmParams":
        return replace(self, **kw)

    @property
    def y_target(self) -> float:
        """Corrector target; with tau error below tau_tol, lam ||y||_inf <= ln m
        for the exact weights, so Psi <= m cosh(ln m) <= (m^2 + 1)/2."""
        return min(self.eps / self.C_start, 0.5 * math.log(max(self.m, 2)) / self.lam)

    @property
    def tau_tol(self) -> float:
        """Fixed-point residual tolerance for the maintained weights."""
        return min(self.eps / 10, 0.2 * math.log(max(self.m, 2)) / self.lam)

    @property
    def feas_bound(self) -> float:
        return self.eps * self.gamma / self.c_norm

    @property
    def initial_step(self) -> float:
        return min(self.max_step, self.r * self.step_scale)
