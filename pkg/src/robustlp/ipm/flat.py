"""Dual-norm maximizer of the mixed tau + infinity norm."""

from __future__ import annotations

import math

import numpy as np

from ..errors import DegenerateInput


def mixed_norm(h, tau, c_norm: float) -> float:
    """||h||_inf + c_norm * ||h||_tau with ||h||_tau^2 = sum tau_i h_i^2."""
    h = np.asarray(h, float)
    return float(np.max(np.abs(h), initial=0.0) + c_norm * math.sqrt(np.sum(tau * h * h)))


def _roots(a2, a1, a0):
    if abs(a2) < 1e-300:
        return [-a0 / a1] if a1 != 0 else []
    disc = a1 * a1 - 4 * a2 * a0
    if disc < 0:
        if disc > -1e-12 * a1 * a1:
            disc = 0.0
        else:
            return []
    sq = math.sqrt(disc)
    q = -0.5 * (a1 + math.copysign(sq, a1))
    out = [q / a2] if q != 0 else []
    if q != 0:
        out.append(a0 / q)
    elif a2 != 0:
        out.append(0.0)
    return out


def flat_operator(g, tau, c_norm: float, return_value: bool = False):
    """h = argmax <g,h> over ||h||_inf + c_norm ||h||_tau = 1.

    The maximizer has the form h_i = sign(g_i) min(t, kappa |g_i|/tau_i).
    Coordinates are sorted by |g_i|/tau_i; for each number k of capped
    coordinates the cap t solves a quadratic and kappa follows from the
    optimality condition.  Every candidate is renormalized onto the unit
    sphere and the best one is returned.
    """
    g = np.asarray(g, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if np.any(~(tau > 0)):
        raise DegenerateInput("tau must be positive")
    a = np.abs(g)
    if not np.any(a > 0):
        h = np.zeros_like(g)
        return (h, 0.0) if return_value else h
    ratio = a / tau
    order = np.argsort(-ratio, kind="stable")
    r_sorted = ratio[order]
    a_sorted, t_sorted = a[order], tau[order]
    G = np.cumsum(a_sorted)
    S = np.cumsum(t_sorted)
    tail = a_sorted**2 / t_sorted
    Q = np.concatenate([np.cumsum(tail[::-1])[::-1][1:], [0.0]])
    e = 1.0 / c_norm**2
    m = a.size
    best, best_h = -math.inf, None
    cands = []
    for k in range(m):
        Gk, Sk, Qk = G[k], S[k], Q[k]
        if Qk <= 0:
            ts = [1.0 / (1.0 + c_norm * math.sqrt(Sk))]
        else:
            K = Qk / Gk**2
            ts = _roots(Sk + K * (Sk - e) ** 2 - e, 2 * e * K * (Sk - e) + 2 * e, K * e * e - e)
        for t in ts:
            if not 0 < t <= 1:
                continue
            kappa = ((1 - t) * e + t * Sk) / Gk
            hi_ok = kappa * r_sorted[k] >= t * (1 - 1e-9)
            lo_ok = k + 1 >= m or kappa * r_sorted[k + 1] <= t * (1 + 1e-9)
            cands.append((hi_ok and lo_ok, t, kappa))
    consistent = [c for c in cands if c[0]] or cands
    for _, t, kappa in consistent:
        h = np.minimum(t, kappa * ratio)
        h /= mixed_norm(h, tau, c_norm)
        val = float(a @ h)
        if val > best:
            best, best_h = val, h
    h = np.sign(g) * best_h
    return (h, best) if return_value else h


def dual_norm(g, tau, c_norm: float) -> float:
    return flat_operator(g, tau, c_norm, return_value=True)[1]
