"""Population limit of the naive estimator and its asymptotic bias.

The naive slope converges to the root ``b1`` of

    G(beta1, b1) = K_W'(b1) - E[U] - K_X'(beta1),

and the naive intercept to ``beta0 + K_X(beta1) - K_W(b1)``.  Because
``K_W'`` is strictly increasing whenever ``W`` has positive variance, the
root is unique; two families (Gamma covariate with Normal error, Gamma
covariate with Gamma error of the same rate) have closed forms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .dists import DegenerateZero, Dist, Gamma, MgfDomain, Normal
from .errors import DomainError, NoRootError
from .naive import ModelParams

__all__ = [
    "EivModel",
    "BiasReport",
    "family",
    "big_g",
    "forward_map_g",
    "gamma_normal_branches",
    "naive_limit",
    "solve_increasing",
]

BOUNDARY_GAP = 1e-9
ROOT_XTOL = 1e-15


@dataclass(frozen=True)
class EivModel:
    """True coefficients plus the covariate law ``x`` and error law ``u``."""

    x: Dist
    u: Dist
    beta: ModelParams

    def __post_init__(self):
        if self.beta.beta1 not in self.x.domain:
            raise DomainError(
                f"beta1={self.beta.beta1} outside the MGF domain of the covariate "
                f"({self.x.domain.lo}, {self.x.domain.hi}); M_X(beta1) does not exist"
            )


@dataclass(frozen=True)
class BiasReport:
    b: ModelParams
    bias: tuple[float, float]
    asy_mse: tuple[float, float]


def family(x: Dist, u: Dist) -> str:
    """Classify a law pair: ``"no-error"``, ``"gamma-normal"``, ``"gamma-gamma"`` or ``"generic"``."""
    if isinstance(u, DegenerateZero) or (isinstance(u, Normal) and u.var == 0):
        return "no-error"
    if isinstance(x, Gamma) and isinstance(u, Normal):
        return "gamma-normal"
    if isinstance(x, Gamma) and isinstance(u, Gamma) and x.lam == u.lam:
        return "gamma-gamma"
    return "generic"


def _w_domain(x: Dist, u: Dist) -> MgfDomain:
    return x.domain.intersect(u.domain)


def big_g(x: Dist, u: Dist, beta1: float, b1: float) -> float:
    x.domain.check(beta1, "beta1")
    _w_domain(x, u).check(b1, "b1")
    return x._d1(b1) + u._d1(b1) - u.mean() - x._d1(beta1)


def solve_increasing(
    f: Callable[[float], float],
    domain: MgfDomain,
    start: float = 0.0,
    what: str = "root",
) -> float:
    """Root of a strictly increasing ``f`` on an open interval.

    Expands geometrically from ``start`` toward the side indicated by the
    sign of ``f(start)``, stopping ``BOUNDARY_GAP`` inside a finite
    boundary, then refines the bracket with Brent's method.
    """
    f0 = f(start)
    if f0 == 0.0:
        return start
    direction = 1.0 if f0 < 0 else -1.0
    limit = domain.hi - BOUNDARY_GAP if direction > 0 else domain.lo + BOUNDARY_GAP
    prev, step = start, 1.0
    while True:
        cand = start + direction * step
        capped = (cand >= limit) if direction > 0 else (cand <= limit)
        if capped:
            cand = limit
        fc = f(cand)
        if fc == 0.0:
            return cand
        if (fc > 0) == (direction > 0):
            lo, hi = (prev, cand) if direction > 0 else (cand, prev)
            break
        if capped or step > 1e12:
            raise NoRootError(f"no sign change found for {what} inside {domain}")
        prev, step = cand, step * 2.0
    return brentq(f, lo, hi, xtol=ROOT_XTOL, rtol=4 * np.finfo(float).eps, maxiter=500)


def gamma_normal_branches(k: float, lam: float, sigma2: float, beta1: float):
    """Both quadratic roots ``(b1_plus, b1_minus)`` for a Gamma covariate with Normal error.

    Only ``b1_minus`` lies below ``lam``; ``b1_plus`` always exceeds it,
    so ``M_X`` does not exist there and that branch is rejected.
    """
    d = lam - beta1
    a = d * lam * sigma2 + k
    s = (d * lam * sigma2 - k) ** 2 + 4 * d * d * sigma2 * k
    root = math.sqrt(s)
    return (a + root) / (2 * d * sigma2), (a - root) / (2 * d * sigma2)


def _g_gamma_normal(k, lam, sigma2, beta1):
    d = lam - beta1
    a = d * lam * sigma2 + k
    s = (d * lam * sigma2 - k) ** 2 + 4 * d * d * sigma2 * k
    # (a - sqrt(s)) / (2 d sigma2) rewritten without cancellation
    return 2 * k * beta1 / (a + math.sqrt(s))


def _g_gamma_gamma(k1, k2, lam, beta1):
    return k1 * lam * beta1 / (k1 * lam + k2 * (lam - beta1))


def forward_map_g(x: Dist, u: Dist, beta1: float, method: str = "auto") -> float:
    """Limit ``b1 = g(beta1)`` of the naive slope.

    ``method`` is ``"auto"`` (closed form when the law pair has one),
    ``"closed"`` (require a closed form) or ``"generic"`` (root finding).
    """
    x.domain.check(beta1, "beta1")
    fam = family(x, u)
    if method not in ("auto", "closed", "generic"):
        raise ValueError(f"unknown method {method!r}")
    if method == "closed" and fam == "generic":
        raise ValueError(f"no closed form for the law pair {x} / {u}")

    dom = _w_domain(x, u)
    if method == "generic" or fam == "generic":
        target = u.mean() + x._d1(beta1)
        b1 = solve_increasing(
            lambda t: x._d1(t) + u._d1(t) - target, dom, what="b1 = g(beta1)"
        )
    elif fam == "no-error":
        b1 = beta1
    elif fam == "gamma-normal":
        b1 = _g_gamma_normal(x.k, x.lam, u.var, beta1)
    else:
        b1 = _g_gamma_gamma(x.k, u.k, x.lam, beta1)

    if b1 not in dom:
        raise DomainError(f"naive limit b1={b1} leaves the MGF domain of W {dom}")
    return float(b1)


def naive_limit(model: EivModel, method: str = "auto") -> BiasReport:
    """Naive limit ``b``, asymptotic bias ``b - beta`` and asymptotic MSE (squared bias)."""
    x, u, beta = model.x, model.u, model.beta
    b1 = forward_map_g(x, u, beta.beta1, method=method)
    b0 = beta.beta0 + (x._cgf(beta.beta1) - (x._cgf(b1) + u._cgf(b1)))
    bias = (b0 - beta.beta0, b1 - beta.beta1)
    return BiasReport(
        b=ModelParams(b0, b1),
        bias=bias,
        asy_mse=(bias[0] ** 2, bias[1] ** 2),
    )
