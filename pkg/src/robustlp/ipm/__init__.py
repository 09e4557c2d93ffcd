"""Robust interior point method over two-sided constraints."""

from .barrier import barrier_derivs
from .core import (Backends, CenteredTriple, InvariantReport, LpInstance, centrality,
                   final_point, infeasibility, make_triple, path_following, potential,
                   recenter, short_step)
from .flat import dual_norm, flat_operator, mixed_norm
from .params import IpmParams


def tau_weights(inst, x, backends=None, p=None, tol=1e-10):
    """Central path weights tau(x) = w(phi''(x)^{-1/2}) with z = n/m + n c/||c||_1."""
    import numpy as np

    from ..scores import lewis_fixed_point, regularizer_for
    from .barrier import barrier_derivs as _bd

    x = np.asarray(x, dtype=float)
    if backends is not None:
        return backends.tau(x - inst.lower, inst.upper - x)
    if p is None:
        p = IpmParams.derive(inst.m, inst.n).p
    _, _, d2, _, _ = _bd(x, inst.lower, inst.upper)
    return lewis_fixed_point(inst.A, d2 ** -0.5, regularizer_for(inst.A), p, tol=tol)


__all__ = ["Backends", "CenteredTriple", "InvariantReport", "IpmParams", "LpInstance",
           "barrier_derivs", "centrality", "dual_norm", "final_point", "flat_operator",
           "infeasibility", "make_triple", "mixed_norm", "path_following", "potential",
           "recenter", "short_step", "tau_weights"]
