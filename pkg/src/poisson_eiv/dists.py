"""Distribution catalog with exact MGF/CGF analytics.

Only the families needed by the measurement-error model are supported:
Gamma (shape/rate), Normal (mean/variance) and the point mass at zero.
``convolve`` builds the law of an independent sum, which is what the
observed covariate ``W = X + U`` follows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "MgfDomain",
    "Dist",
    "Gamma",
    "Normal",
    "DegenerateZero",
    "Sum",
    "convolve",
    "mgf",
    "cgf",
    "cgf_prime",
    "cgf_double_prime",
    "mean",
    "variance",
    "sample",
    "parse_law",
]


@dataclass(frozen=True)
class MgfDomain:
    """Open interval ``(lo, hi)`` on which the MGF is finite."""

    lo: float = -math.inf
    hi: float = math.inf

    def __contains__(self, t) -> bool:
        return self.lo < t < self.hi

    def intersect(self, other: "MgfDomain") -> "MgfDomain":
        return MgfDomain(max(self.lo, other.lo), min(self.hi, other.hi))

    def check(self, t, what: str = "argument") -> None:
        if not (self.lo < t < self.hi):
            raise DomainError(
                f"{what} t={t!r} is outside the MGF domain ({self.lo}, {self.hi})"
            )


class Dist:
    """Common interface of the catalog entries.

    Subclasses implement the ``_cgf``/``_d1``/``_d2`` kernels on the open
    domain; the public methods add the domain check.
    """

    @property
    def domain(self) -> MgfDomain:
        return MgfDomain()

    def mgf(self, t: float) -> float:
        self.domain.check(t)
        return math.exp(self._cgf(t))

    def cgf(self, t: float) -> float:
        self.domain.check(t)
        return self._cgf(t)

    def cgf_prime(self, t: float) -> float:
        self.domain.check(t)
        return self._d1(t)

    def cgf_double_prime(self, t: float) -> float:
        self.domain.check(t)
        return self._d2(t)

    def mean(self) -> float:
        return self._d1(0.0)

    def variance(self) -> float:
        return self._d2(0.0)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    # kernels
    def _cgf(self, t):
        raise NotImplementedError

    def _d1(self, t):
        raise NotImplementedError

    def _d2(self, t):
        raise NotImplementedError


@dataclass(frozen=True)
class Gamma(Dist):
    """Gamma law with shape ``k`` and rate ``lam`` (mean ``k/lam``)."""

    k: float
    lam: float

    def __post_init__(self):
        if not (math.isfinite(self.k) and self.k > 0):
            raise DomainError(f"Gamma shape must be positive, got {self.k!r}")
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise DomainError(f"Gamma rate must be positive, got {self.lam!r}")

    @property
    def domain(self) -> MgfDomain:
        return MgfDomain(-math.inf, self.lam)

    def mgf(self, t: float) -> float:
        self.domain.check(t)
        return (1.0 - t / self.lam) ** (-self.k)

    def _cgf(self, t):
        return -self.k * math.log1p(-t / self.lam)

    def _d1(self, t):
        return self.k / (self.lam - t)

    def _d2(self, t):
        return self.k / (self.lam - t) ** 2

    def sample(self, rng, n):
        return rng.gamma(self.k, 1.0 / self.lam, size=n)

    def __str__(self):
        return f"gamma:{self.k:g}:{self.lam:g}"


@dataclass(frozen=True)
class Normal(Dist):
    """Normal law parameterised by mean and *variance*; variance 0 is allowed."""

    mu: float = 0.0
    var: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.mu):
            raise DomainError(f"Normal mean must be finite, got {self.mu!r}")
        if not (math.isfinite(self.var) and self.var >= 0):
            raise DomainError(f"Normal variance must be >= 0, got {self.var!r}")

    def _cgf(self, t):
        return self.mu * t + 0.5 * self.var * t * t

    def _d1(self, t):
        return self.mu + self.var * t

    def _d2(self, t):
        return self.var

    def sample(self, rng, n):
        return rng.normal(self.mu, math.sqrt(self.var), size=n)

    def __str__(self):
        return f"normal:{self.mu:g}:{self.var:g}"


@dataclass(frozen=True)
class DegenerateZero(Dist):
    """Point mass at zero: MGF identically one."""

    def mgf(self, t):
        return 1.0

    def _cgf(self, t):
        return 0.0

    def _d1(self, t):
        return 0.0

    def _d2(self, t):
        return 0.0

    def sample(self, rng, n):
        return np.zeros(n)

    def __str__(self):
        return "degenerate"


@dataclass(frozen=True)
class Sum(Dist):
    """Law of ``a + b`` for independent ``a`` and ``b`` (cumulants add)."""

    a: Dist
    b: Dist

    @property
    def domain(self) -> MgfDomain:
        return self.a.domain.intersect(self.b.domain)

    def _cgf(self, t):
        return self.a._cgf(t) + self.b._cgf(t)

    def _d1(self, t):
        return self.a._d1(t) + self.b._d1(t)

    def _d2(self, t):
        return self.a._d2(t) + self.b._d2(t)

    def sample(self, rng, n):
        return self.a.sample(rng, n) + self.b.sample(rng, n)

    def __str__(self):
        return f"({self.a}) + ({self.b})"


def convolve(a: Dist, b: Dist) -> Dist:
    """Law of the independent sum, in closed form where the family is closed."""
    if isinstance(b, DegenerateZero):
        return a
    if isinstance(a, DegenerateZero):
        return b
    if isinstance(a, Gamma) and isinstance(b, Gamma) and a.lam == b.lam:
        return Gamma(a.k + b.k, a.lam)
    if isinstance(a, Normal) and isinstance(b, Normal):
        return Normal(a.mu + b.mu, a.var + b.var)
    return Sum(a, b)


def mgf(spec: Dist, t: float) -> float:
    return spec.mgf(t)


def cgf(spec: Dist, t: float) -> float:
    return spec.cgf(t)


def cgf_prime(spec: Dist, t: float) -> float:
    return spec.cgf_prime(t)


def cgf_double_prime(spec: Dist, t: float) -> float:
    return spec.cgf_double_prime(t)


def mean(spec: Dist) -> float:
    return spec.mean()


def variance(spec: Dist) -> float:
    return spec.variance()


def sample(spec: Dist, rng: np.random.Generator, n: int) -> np.ndarray:
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    return spec.sample(rng, n)


def parse_law(text: str) -> Dist:
    """Parse ``gamma:k:lambda``, ``normal:mu:sigma2`` or ``degenerate``.

    >>> parse_law("gamma:2:1.2")
    Gamma(k=2.0, lam=1.2)
    """
    parts = [p.strip() for p in text.strip().split(":")]
    name = parts[0].lower()
    try:
        args = [float(p) for p in parts[1:]]
    except ValueError:
        raise DomainError(f"non-numeric parameter in law spec {text!r}") from None
    if name == "gamma" and len(args) == 2:
        return Gamma(*args)
    if name == "normal" and len(args) == 2:
        return Normal(*args)
    if name in ("degenerate", "zero") and not args:
        return DegenerateZero()
    raise DomainError(
        f"cannot parse law spec {text!r}; expected gamma:k:lambda, "
        "normal:mu:sigma2 or degenerate"
    )
