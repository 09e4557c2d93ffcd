"""Robust path following for min c^T x s.t. A^T x = b, l <= x <= u."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.linalg

from ..errors import CenteringLost, NonFiniteInput, NotConverged, OutOfDomain, SingularSystem
from ..linalg import SINGULAR_TOL, SparseMatrix, check_finite
from ..scores import LewisState, lewis_fixed_point, regularizer_for
from ..sketchtree import (SamplerConstants, independent_probabilities, mixture_weights,
                          sample_valid_proportional, tree_init)
from .barrier import derivs_from_gaps
from .flat import flat_operator
from .params import IpmParams


@dataclass(frozen=True)
class LpInstance:
    A: SparseMatrix
    b: np.ndarray
    c: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        m, n = self.A.shape
        for name, size in (("b", n), ("c", m), ("lower", m), ("upper", m)):
            arr = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if arr.size != size:
                raise ValueError(f"{name} has length {arr.size}, expected {size}")
            check_finite(arr, names=name)
            object.__setattr__(self, name, arr)
        if np.any(~(self.lower < self.upper)):
            raise ValueError("need lower < upper componentwise")

    @property
    def m(self) -> int:
        return self.A.m

    @property
    def n(self) -> int:
        return self.A.n


@dataclass(frozen=True)
class CenteredTriple:
    """Iterate (x, s, mu) with maintained approximations.

    x is stored through its distances to both bounds (``xl = x - l``,
    ``xu = u - x``) so that coordinates close to a bound keep full relative
    accuracy; ``x`` itself is reconstructed from the nearer bound.  The
    dual slack is kept as s = c + A z.
    """

    x: np.ndarray
    xl: np.ndarray
    xu: np.ndarray
    s: np.ndarray
    z: np.ndarray
    mu: float
    xbl: np.ndarray
    xbu: np.ndarray
    sbar: np.ndarray
    taubar: np.ndarray
    mubar: float
    delta: np.ndarray

    def xbar(self, inst: "LpInstance") -> np.ndarray:
        return point_from_gaps(inst, self.xbl, self.xbu)


def _anchored(inst: LpInstance, xl, xu):
    near_low = xl <= xu
    anchor = np.where(near_low, inst.lower, inst.upper)
    off = np.where(near_low, xl, -xu)
    return anchor, off


def point_from_gaps(inst: LpInstance, xl, xu) -> np.ndarray:
    anchor, off = _anchored(inst, xl, xu)
    return anchor + off


def infeasibility(inst: LpInstance, xl, xu) -> np.ndarray:
    """A^T x - b evaluated as (A^T anchor - b) + A^T offset."""
    anchor, off = _anchored(inst, xl, xu)
    return (inst.A.rmatvec(anchor) - inst.b) + inst.A.rmatvec(off)


def make_triple(inst: LpInstance, x, s, mu: float, tau, z=None) -> CenteredTriple:
    x = np.asarray(x, dtype=float)
    xl, xu = x - inst.lower, inst.upper - x
    if np.any(~(xl > 0)) or np.any(~(xu > 0)):
        raise OutOfDomain("initial point is not strictly interior")
    s = np.asarray(s, dtype=float)
    if z is None:
        z = np.linalg.lstsq(inst.A.toarray(), s - inst.c, rcond=None)[0]
    tau = np.asarray(tau, dtype=float)
    return CenteredTriple(x.copy(), xl, xu, s.copy(), np.asarray(z, float), float(mu), xl.copy(),
                          xu.copy(), s.copy(), tau.copy(), float(mu), infeasibility(inst, xl, xu))


# --------------------------------------------------------------- potential

def centrality(s, mu, tau, xl, xu) -> np.ndarray:
    """y = (s + mu tau phi') / (mu tau sqrt(phi''))."""
    d1, d2 = derivs_from_gaps(xl, xu)
    return (s + mu * tau * d1) / (mu * tau * np.sqrt(d2))


def log_potential(y, lam: float) -> float:
    """log sum cosh(lam y), stable for large arguments."""
    a = lam * np.abs(np.asarray(y, dtype=float))
    terms = a - math.log(2.0) + np.log1p(np.exp(-2 * a))
    top = float(terms.max(initial=-math.inf))
    return top + math.log(float(np.sum(np.exp(terms - top))))


def potential(inst: LpInstance, x, s, mu: float, tau, lam: float):
    """(Psi, y) with Psi = sum cosh(lam y_i); Psi is inf on overflow."""
    x = np.asarray(x, dtype=float)
    y = centrality(np.asarray(s, float), mu, np.asarray(tau, float), x - inst.lower, inst.upper - x)
    a = lam * np.abs(y)
    if a.max(initial=0.0) <= 500:
        return float(np.sum(np.cosh(lam * y))), y
    lp = log_potential(y, lam)
    return (math.exp(lp) if lp < 709 else math.inf), y


def potential_gradient_direction(y, lam: float) -> np.ndarray:
    """A positive multiple of grad Psi(y) = lam sinh(lam y), overflow-free."""
    a = lam * np.abs(y)
    top = a.max(initial=0.0)
    return np.sign(y) * np.exp(a - top) * (-np.expm1(-2 * a)) / 2


def dual_residual(Ad: np.ndarray, v: np.ndarray, scale: float = 1.0) -> float:
    """Relative distance of v from range(A), via least squares."""
    coef = np.linalg.lstsq(Ad, v, rcond=None)[0]
    return float(np.linalg.norm(v - Ad @ coef)) / max(1.0, scale)


# --------------------------------------------------------------- backends

class DenseNormal:
    """Cholesky of A^T diag(w) A on the Jacobi-scaled matrix, with an
    eigenvalue pseudo-solve fallback when pivots fall below 1e-12."""

    def __init__(self, Ad: np.ndarray, w: np.ndarray, allow_fallback: bool = True):
        M = Ad.T @ (w[:, None] * Ad)
        diag = np.diag(M).copy()
        if not np.all(np.isfinite(M)):
            raise NonFiniteInput("normal matrix is not finite")
        if np.any(diag <= 0):
            raise SingularSystem("zero diagonal in normal matrix")
        self.sc = 1.0 / np.sqrt(diag)
        Ms = M * self.sc[:, None] * self.sc[None, :]
        self.M = M
        self.cho = None
        try:
            cho = scipy.linalg.cho_factor(Ms, lower=True, check_finite=False)
            if np.min(np.abs(np.diag(cho[0]))) ** 2 >= SINGULAR_TOL:
                self.cho = cho
        except np.linalg.LinAlgError:
            pass
        if self.cho is None:
            if not allow_fallback:
                raise SingularSystem("normal matrix pivot below 1e-12")
            vals, vecs = np.linalg.eigh(Ms)
            keep = vals > 1e-15 * vals.max()
            self.eig = (vals[keep], vecs[:, keep])

    def solve(self, rhs) -> np.ndarray:
        r = self.sc * rhs
        if self.cho is not None:
            y = scipy.linalg.cho_solve(self.cho, r, check_finite=False)
        else:
            vals, vecs = self.eig
            y = vecs @ ((vecs.T @ r) / vals)
        return self.sc * y

    def inv_norm(self, v) -> float:
        return math.sqrt(max(float(v @ self.solve(v)), 0.0))


@dataclass
class StepRecord:
    t: int
    mu: float
    psi: float
    yinf: float
    feas: float

    def as_dict(self) -> dict:
        return {"t": self.t, "mu": self.mu, "psi": self.psi, "yinf": self.yinf, "feas": self.feas}


@dataclass
class InvariantReport:
    yinf: float
    dual_residual: float
    feas: float
    feas_bound: float
    x_invariant: float
    tau_invariant: float
    psi: float
    m: int
    eps: float
    feas_floor: float = 0.0

    @property
    def centered(self) -> bool:
        # infeasibility below the rounding floor of A^T x - b cannot be resolved in floating point
        feas_ok = self.feas <= max(self.feas_bound, self.feas_floor)
        return self.yinf <= self.eps and self.dual_residual <= 1e-8 and feas_ok

    @property
    def invariant(self) -> bool:
        return self.x_invariant <= self.eps and self.tau_invariant <= self.eps

    @property
    def psi_ok(self) -> bool:
        return self.psi <= self.m**2

    @property
    def ok(self) -> bool:
        return self.centered and self.invariant and self.psi_ok


class Backends:
    """Per-solve oracles: central-path weights, normal-equation factorizations
    and the sampler producing R.

    tau_mode: "fixed_point" (warm-started contraction, default) or
    "lewis_state" (multi-level lazy maintenance).  H_mode: "exact" or
    "sparsified".  sampler: "auto", "independent", "proportional" or "none".
    """

    def __init__(self, inst: LpInstance, params: IpmParams, *, tau_mode: str = "fixed_point",
                 tau_tol: float | None = None, H_mode: str = "exact", sampler: str = "auto",
                 consts: SamplerConstants | None = None, check_invariants: bool = False,
                 seed=None, trace: Callable[[dict], None] | None = None):
        self.inst = inst
        self.params = params
        self.Ad = np.ascontiguousarray(inst.A.toarray())
        self.z = regularizer_for(inst.A)
        self.tau_mode = tau_mode
        self.tau_tol = tau_tol if tau_tol is not None else params.tau_tol
        self.H_mode = H_mode
        if sampler == "auto":
            sampler = "independent" if int(inst.A.row_nnz().max()) <= 2 else "proportional"
        self.sampler = sampler
        self.consts = consts or SamplerConstants()
        self.rng = np.random.default_rng(params.seed if seed is None else seed)
        self.check_invariants = check_invariants
        self.trace = trace
        self.records: list[StepRecord] = []
        self.reports: list[InvariantReport] = []
        self._lewis: LewisState | None = None
        self.last_factor: DenseNormal | None = None
        self.steps = 0

    # central path weights
    def tau(self, xl, xu, warm=None) -> np.ndarray:
        _, d2 = derivs_from_gaps(xl, xu)
        gs = d2 ** -0.5
        if self.tau_mode == "lewis_state":
            if self._lewis is None:
                self._lewis = LewisState(self.Ad, gs, self.z, self.params.p, eps=self.tau_tol,
                                         seed=self.rng.integers(2**63))
            else:
                self._lewis.set_scaling(gs)
                self._lewis.query()
            return self._lewis.weights.copy()
        return lewis_fixed_point(self.Ad, gs, self.z, self.params.p, tol=self.tau_tol, w0=warm)

    def exact_tau(self, xl, xu, warm=None) -> np.ndarray:
        _, d2 = derivs_from_gaps(xl, xu)
        gs = d2 ** -0.5
        try:
            return lewis_fixed_point(self.Ad, gs, self.z, self.params.p, tol=1e-11, w0=warm)
        except NotConverged:
            # ill-conditioned scalings put the rounding floor above 1e-11;
            # 1e-8 is still far below any eps the invariants are checked at
            return lewis_fixed_point(self.Ad, gs, self.z, self.params.p, tol=1e-8, w0=warm)

    def factor(self, w: np.ndarray, taubar: np.ndarray) -> DenseNormal:
        if self.H_mode == "sparsified":
            n, gamma = self.params.n, self.params.gamma
            prob = np.minimum(1.0, 100 * taubar * math.log(max(n, 2)) / gamma**2)
            keep = self.rng.random(w.size) < prob
            w = np.where(keep, w / prob, 0.0)
        F = DenseNormal(self.Ad, w)
        self.last_factor = F
        return F

    def sample(self, delta_r, hvec, gscale, taubar) -> np.ndarray:
        m = delta_r.size
        p = self.params
        if self.sampler == "none":
            return np.ones(m)
        if self.sampler == "independent":
            c = self.consts
            q = independent_probabilities(delta_r, taubar, p.gamma, c.C_valid, c.C_sample)
            keep = self.rng.random(m) < q
            return np.where(keep, 1.0 / np.where(q > 0, q, 1.0), 0.0)
        values = gscale * (self.Ad @ hvec)
        p1, p2 = mixture_weights(values, taubar, p.gamma, p.n, self.consts)
        C0 = 100 * self.consts.C_valid**4 * math.log(max(m, 2)) / p.gamma**2
        if self.consts.C0_cap is not None:
            C0 = min(C0, self.consts.C0_cap)
        S = 2 * max(math.exp(4) * max(m / p.n, float(p1.sum()) / (self.consts.C1 * math.sqrt(p.n)))
                    * self.consts.C1 * math.sqrt(p.n), float(p2.sum()))
        if C0 * S > 1e6:
            N = int(min(math.ceil(C0 * S), 2**62))
            pv = p1 + p2
            probs = np.append(pv / S, max(0.0, 1 - pv.sum() / S))
            counts = self.rng.multinomial(N, probs / probs.sum())[:m]
            return counts * S / (N * pv)
        tree = tree_init(self.Ad, gscale, seed=self.rng.integers(2**63))
        R = sample_valid_proportional(tree, hvec, taubar, p.gamma, self.consts,
                                      seed=self.rng.integers(2**63), C0=C0)
        return R.diag()

    # diagnostics
    def report(self, state: CenteredTriple, exact_tau=None) -> InvariantReport:
        inst, p = self.inst, self.params
        tau = self.exact_tau(state.xl, state.xu, warm=state.taubar) if exact_tau is None else exact_tau
        y = centrality(state.s, state.mu, tau, state.xl, state.xu)
        _, d2 = derivs_from_gaps(state.xl, state.xu)
        H = DenseNormal(self.Ad, 1.0 / (tau * d2))
        feas = H.inv_norm(infeasibility(inst, state.xl, state.xu))
        absA = np.abs(self.Ad)
        k = int(np.max(np.count_nonzero(absA, axis=0))) + 2
        x = point_from_gaps(inst, state.xl, state.xu)
        err = k * np.finfo(float).eps * (absA.T @ np.abs(x) + np.abs(inst.b))
        floor = H.inv_norm(err)
        dual = dual_residual(self.Ad, state.s - inst.c, float(np.linalg.norm(state.s)))
        xinv = float(np.max(np.sqrt(d2) * np.abs(state.xbl - state.xl)))
        tau_xbar = self.exact_tau(state.xbl, state.xbu, warm=state.taubar)
        tinv = float(np.max(np.abs(state.taubar - tau_xbar) / tau_xbar))
        lp = log_potential(y, p.lam)
        psi = math.exp(lp) if lp < 709 else math.inf
        return InvariantReport(float(np.max(np.abs(y))), dual, feas, p.feas_bound, xinv, tinv, psi,
                               inst.m, p.eps, floor)

    def record(self, state: CenteredTriple, t: int) -> None:
        p = self.params
        y = centrality(state.s, state.mu, state.taubar, state.xl, state.xu)
        lp = log_potential(y, p.lam)
        feas = self.last_factor.inv_norm(state.delta) if self.last_factor is not None else 0.0
        rec = StepRecord(t, state.mu, math.exp(lp) if lp < 709 else math.inf,
                         float(np.max(np.abs(y))), feas)
        self.records.append(rec)
        if self.trace is not None:
            self.trace(rec.as_dict())
        if self.check_invariants:
            self.reports.append(self.report(state))


# --------------------------------------------------------------- steps

def _close(a, b, tol):
    return abs(math.log(a / b)) <= tol


def short_step(state: CenteredTriple, mu_new: float, params: IpmParams,
               backends: Backends) -> CenteredTriple:
    """One robust step towards the central path point at mu_new."""
    inst, A = backends.inst, backends.Ad
    gamma = params.gamma
    mubar = state.mubar if _close(state.mubar, mu_new, gamma / 2**12) else mu_new
    d1b, d2b = derivs_from_gaps(state.xbl, state.xbu)
    taubar = state.taubar
    ybar = (state.sbar + mubar * taubar * d1b) / (mubar * taubar * np.sqrt(d2b))
    if params.mode == "theory":
        g = -gamma * flat_operator(potential_gradient_direction(ybar, params.lam), taubar,
                                   params.c_norm)
    else:
        g = -ybar
    rs = d2b ** -0.5
    F = backends.factor(1.0 / (taubar * d2b), taubar)
    u1 = F.solve(A.T @ (rs * g))
    u2 = F.solve(state.delta)
    Au1, Au2 = A @ u1, A @ u2
    delta1 = rs * Au1 / taubar
    delta2 = rs * Au2 / taubar
    R = backends.sample(delta1 + delta2, u1 + u2, rs / taubar, taubar)
    theta = 1.0
    if params.mode == "practical":
        size = float(np.max(np.abs(g - R * delta1), initial=0.0))
        if size > params.newton_cap:
            theta = params.newton_cap / size
    dx = rs * (theta * (g - R * delta1) - R * delta2)
    xl, xu = state.xl + dx, state.xu - dx
    if np.any(~(xl > 0)) or np.any(~(xu > 0)):
        raise CenteringLost("step left the domain")
    z = state.z + mu_new * theta * u1
    s = inst.c + A @ z
    x = point_from_gaps(inst, xl, xu)
    delta = infeasibility(inst, xl, xu)

    # refresh maintained approximations coordinatewise
    _, d2 = derivs_from_gaps(xl, xu)
    move = np.sqrt(d2b) * np.abs(xl - state.xbl)
    upd = move > gamma / 2**12
    xbl = np.where(upd, xl, state.xbl)
    xbu = np.where(upd, xu, state.xbu)
    tau_new = backends.tau(xbl, xbu, warm=taubar)
    tupd = np.abs(tau_new - taubar) > (gamma / 2**10) * tau_new
    taubar = np.where(tupd, tau_new, taubar)
    scale = mu_new * taubar * np.sqrt(d2)
    supd = np.abs(s - state.sbar) > (gamma / 2**10) * scale
    sbar = np.where(supd, s, state.sbar)
    backends.steps += 1
    return CenteredTriple(x, xl, xu, s, z, float(mu_new), xbl, xbu, sbar, taubar, float(mubar), delta)


def measured_yinf(state: CenteredTriple) -> float:
    y = centrality(state.s, state.mu, state.taubar, state.xl, state.xu)
    return float(np.max(np.abs(y)))


def recenter(state: CenteredTriple, params: IpmParams, backends: Backends, target: float,
             max_steps: int) -> CenteredTriple:
    """Corrector steps at fixed mu until ||y||_inf <= target."""
    for _ in range(max_steps):
        yinf = measured_yinf(state)
        if yinf <= target:
            return state
        state = short_step(state, state.mu, params, backends)
    yinf = measured_yinf(state)
    if yinf > target:
        raise CenteringLost(f"could not recenter: ||y||_inf = {yinf:.3g}", yinf)
    return state


def path_following(inst: LpInstance, init: CenteredTriple, mu_final: float, params: IpmParams,
                   backends: Backends, stop: Callable[[CenteredTriple, int], bool] | None = None,
                   stop_every: int = 1) -> CenteredTriple:
    """Follow the central path from init.mu down to mu_final.

    Theory mode: mu <- (1 - r) mu with one short step each, no correction.
    Practical mode: mu <- (1 - beta) mu with adaptive beta <= max_step;
    corrector steps restore ||y||_inf <= y_target and failed attempts are
    retried with half the step.
    """
    state = init
    if mu_final >= state.mu:
        return state
    t = 0
    if params.mode == "theory":
        while state.mu > mu_final:
            mu_new = max(mu_final, (1 - params.r) * state.mu)
            state = short_step(state, mu_new, params, backends)
            t += 1
            yinf = measured_yinf(state)
            if yinf > params.eps:
                raise CenteringLost(f"||y||_inf = {yinf:.3g} exceeds eps", yinf)
            backends.record(state, t)
            if stop is not None and t % stop_every == 0 and stop(state, t):
                break
        return state

    target = params.y_target
    state = recenter(state, params, backends, target, 4 * params.max_correctors)
    backends.record(state, t)
    beta = params.initial_step
    failures = 0
    while state.mu > mu_final:
        mu_new = max(mu_final, (1 - beta) * state.mu)
        try:
            cand = short_step(state, mu_new, params, backends)
            k = 0
            while measured_yinf(cand) > target and k < params.max_correctors:
                cand = short_step(cand, mu_new, params, backends)
                k += 1
            yinf = measured_yinf(cand)
            if yinf > target:
                raise CenteringLost(f"||y||_inf = {yinf:.3g} after correction", yinf)
        except (CenteringLost, OutOfDomain, SingularSystem) as exc:
            failures += 1
            if failures > params.max_backtracks:
                raise CenteringLost(f"step control failed at mu={state.mu:.3g}: {exc}",
                                    getattr(exc, "yinf", math.nan)) from None
            beta /= 2
            continue
        failures = 0
        state = cand
        t += 1
        backends.record(state, t)
        if k <= 1:
            beta = min(params.max_step, beta * 2)
        if stop is not None and t % stop_every == 0 and stop(state, t):
            break
    return state


def final_point(inst: LpInstance, state: CenteredTriple, backends: Backends | None = None):
    """Project x onto A^T x = b in the T^-1 Phi''^-1 metric; s is unchanged.

    Returns (x_final, s_final, (xl, xu)).
    """
    Ad = backends.Ad if backends is not None else inst.A.toarray()
    _, d2 = derivs_from_gaps(state.xl, state.xu)
    w = 1.0 / (state.taubar * d2)
    delta = infeasibility(inst, state.xl, state.xu)
    F = DenseNormal(Ad, w)
    dx = -w * (Ad @ F.solve(delta))
    xl, xu = state.xl + dx, state.xu - dx
    return point_from_gaps(inst, xl, xu), state.s.copy(), (xl, xu)
