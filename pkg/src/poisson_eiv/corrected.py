"""Corrected naive estimator: invert the bias map at the naive estimate.

Given a naive fit ``(b0, b1)`` the corrected slope is ``h(b1)``, the root
in ``beta1`` of ``K_X'(beta1) = K_W'(b1) - E[U]``, and the corrected
intercept is ``b0 + K_W(b1) - K_X(h(b1))``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bias import family, solve_increasing
from .dists import Dist, Gamma, Normal
from .errors import ConfigError, DegenerateMomentError, DomainError, NoRootError
from .naive import Dataset, ModelParams, NaiveEstimate, fit_naive

__all__ = [
    "CorrectedEstimate",
    "inverse_map_h",
    "correct_estimate",
    "estimate_nuisance_normal_error",
    "estimate_nuisance_gamma_error",
    "fit_nuisance",
    "fit_corrected",
]


@dataclass(frozen=True)
class CorrectedEstimate:
    params: ModelParams
    naive: NaiveEstimate | ModelParams
    x: Dist
    u: Dist
    diagnostics: dict = field(default_factory=dict)


def _h_gamma_normal(k, lam, sigma2, b1):
    # K_X'(beta1) must be positive for a Gamma covariate
    if k / (lam - b1) + sigma2 * b1 <= 0:
        raise NoRootError(f"b1={b1} is below the range of g for this Gamma/Normal pair")
    num = sigma2 * lam * b1 * b1 - (k + lam * lam * sigma2) * b1
    den = sigma2 * b1 * b1 - lam * sigma2 * b1 - k
    return num / den


def _h_gamma_gamma(k1, k2, lam, b1):
    den = k1 * lam + k2 * b1
    if den <= 0:
        raise NoRootError(f"b1={b1} is below the range of g for this Gamma/Gamma pair")
    return (k1 + k2) * b1 * lam / den


def inverse_map_h(x: Dist, u: Dist, b1: float, method: str = "auto") -> float:
    """True slope ``beta1 = h(b1)`` whose naive limit is ``b1``.

    ``method`` has the same meaning as in :func:`forward_map_g`.
    """
    x.domain.intersect(u.domain).check(b1, "b1")
    fam = family(x, u)
    if method not in ("auto", "closed", "generic"):
        raise ValueError(f"unknown method {method!r}")
    if method == "closed" and fam == "generic":
        raise ValueError(f"no closed form for the law pair {x} / {u}")

    if method == "generic" or fam == "generic":
        target = x._d1(b1) + u._d1(b1) - u.mean()
        beta1 = solve_increasing(
            lambda t: x._d1(t) - target, x.domain, what="beta1 = h(b1)"
        )
    elif fam == "no-error":
        beta1 = b1
    elif fam == "gamma-normal":
        beta1 = _h_gamma_normal(x.k, x.lam, u.var, b1)
    else:
        beta1 = _h_gamma_gamma(x.k, u.k, x.lam, b1)

    if beta1 not in x.domain:
        raise NoRootError(f"h(b1)={beta1} leaves the MGF domain of the covariate")
    return float(beta1)


def correct_estimate(
    naive: NaiveEstimate | ModelParams,
    x: Dist,
    u: Dist,
    method: str = "auto",
) -> CorrectedEstimate:
    """Bias-correct a naive estimate for known covariate and error laws.

    Raises :class:`DomainError` when the naive slope lies outside the MGF
    domain of ``W`` (e.g. ``b1 >= lambda`` for Gamma laws): the correction
    is infeasible for that sample.
    """
    p = naive.params if isinstance(naive, NaiveEstimate) else naive
    b0, b1 = p.beta0, p.beta1
    dom = x.domain.intersect(u.domain)
    if b1 not in dom:
        raise DomainError(
            f"correction infeasible: naive slope {b1} outside the MGF domain of W "
            f"({dom.lo}, {dom.hi})"
        )
    beta1 = inverse_map_h(x, u, b1, method=method)
    beta0 = b0 + ((x._cgf(b1) + u._cgf(b1)) - x._cgf(beta1))
    fam = family(x, u)
    used = "generic" if method == "generic" or fam == "generic" else "closed"
    return CorrectedEstimate(
        params=ModelParams(beta0, beta1),
        naive=naive,
        x=x,
        u=u,
        diagnostics={"family": fam, "method": used},
    )


def _moments(w):
    w = np.asarray(w, dtype=float)
    if w.size < 2:
        raise DegenerateMomentError("need at least two observations")
    m = w.mean()
    return m, np.mean((w - m) ** 2)


def estimate_nuisance_normal_error(w, sigma2: float) -> tuple[float, float]:
    """Moment estimates ``(k, lambda)`` of a Gamma covariate observed with N(0, sigma2) error.

    Uses the 1/n variance: ``lambda = mean / (var - sigma2)``, ``k = mean * lambda``.
    """
    m, v = _moments(w)
    excess = v - sigma2
    if excess <= 0:
        raise DegenerateMomentError(
            f"sample variance {v:.6g} does not exceed the error variance {sigma2:.6g}"
        )
    lam = m / excess
    if lam <= 0:
        raise DegenerateMomentError(f"non-positive rate estimate {lam:.6g}")
    return m * lam, lam


def estimate_nuisance_gamma_error(w, k2: float) -> tuple[float, float]:
    """Moment estimates ``(k1, lambda)`` when X ~ Gamma(k1, lambda) and U ~ Gamma(k2, lambda)."""
    m, v = _moments(w)
    if v <= 0:
        raise DegenerateMomentError("sample variance of w is zero")
    lam = m / v
    k1 = m * lam - k2
    if lam <= 0 or k1 <= 0:
        raise DegenerateMomentError(
            f"moment estimates imply lambda={lam:.6g}, k1={k1:.6g}; both must be positive"
        )
    return k1, lam


def fit_nuisance(w, u: Dist, error_param: float | None = None) -> tuple[Gamma, Dist]:
    """Gamma covariate law and error law fitted from ``w`` by moments.

    ``u`` supplies the error family (and its known mean for Normal errors);
    ``error_param`` overrides the known variance (Normal) or shape (Gamma).
    For Gamma errors the rate is replaced by the estimated common rate.
    """
    if isinstance(u, Normal):
        sigma2 = u.var if error_param is None else error_param
        k, lam = estimate_nuisance_normal_error(np.asarray(w) - u.mu, sigma2)
        return Gamma(k, lam), Normal(u.mu, sigma2)
    if isinstance(u, Gamma):
        k2 = u.k if error_param is None else error_param
        k1, lam = estimate_nuisance_gamma_error(w, k2)
        return Gamma(k1, lam), Gamma(k2, lam)
    raise ConfigError(
        f"moment estimation is defined for Normal or Gamma errors, not {u}"
    )


def fit_corrected(
    data: Dataset,
    x: Dist,
    u: Dist,
    nuisance: str = "known",
    error_param: float | None = None,
    **fit_kwargs,
) -> CorrectedEstimate:
    """Naive fit followed by correction.

    With ``nuisance="moment"`` the covariate law is re-estimated from
    ``data.w`` (Gamma family only) and ``x`` serves only as a family tag.
    """
    if nuisance == "moment":
        if not isinstance(x, Gamma) and x is not None:
            raise ConfigError("moment estimation assumes a Gamma covariate")
        x, u = fit_nuisance(data.w, u, error_param)
    elif nuisance != "known":
        raise ConfigError(f"nuisance mode must be 'known' or 'moment', not {nuisance!r}")
    naive = fit_naive(data, **fit_kwargs)
    return correct_estimate(naive, x, u)
