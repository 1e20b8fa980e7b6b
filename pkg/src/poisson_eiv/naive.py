"""Naive Poisson fit that treats the error-prone covariate as exact."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AllZeroCountsError, InvalidDatasetError, NonConvergenceError

__all__ = [
    "EXP_BOUND",
    "Dataset",
    "ModelParams",
    "NaiveEstimate",
    "score",
    "score_jacobian",
    "fit_naive",
]

# Largest exponent accepted before exp() is considered an overflow.
EXP_BOUND = 700.0
MAX_HALVINGS = 30


@dataclass(frozen=True)
class ModelParams:
    beta0: float
    beta1: float

    def __post_init__(self):
        if not (math.isfinite(self.beta0) and math.isfinite(self.beta1)):
            raise ValueError(f"coefficients must be finite, got {self!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.beta0, self.beta1])

    @classmethod
    def from_array(cls, a) -> "ModelParams":
        return cls(float(a[0]), float(a[1]))


@dataclass(frozen=True, eq=False)
class Dataset:
    """Observed counts ``y`` and error-prone covariate ``w``."""

    y: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y)
        w = np.asarray(self.w, dtype=float)
        if y.ndim != 1 or w.ndim != 1:
            raise InvalidDatasetError("y and w must be one-dimensional")
        if y.shape != w.shape:
            raise InvalidDatasetError(
                f"y and w differ in length ({y.size} vs {w.size})"
            )
        if y.size < 2:
            raise InvalidDatasetError("need at least two observations")
        yf = np.asarray(y, dtype=float)
        if not np.all(np.isfinite(yf)) or np.any(yf < 0) or np.any(yf != np.round(yf)):
            raise InvalidDatasetError("y must hold non-negative integer counts")
        if not np.all(np.isfinite(w)):
            raise InvalidDatasetError("w must be finite")
        if np.all(w == w[0]):
            raise InvalidDatasetError("w must take at least two distinct values")
        object.__setattr__(self, "y", yf.astype(np.int64))
        object.__setattr__(self, "w", w)

    @property
    def n(self) -> int:
        return self.y.size


@dataclass(frozen=True)
class NaiveEstimate:
    params: ModelParams
    iterations: int
    converged: bool
    score_norm: float
    tol: float = field(default=1e-10, repr=False)


def _rates(b, w):
    eta = b[0] + b[1] * w
    top = np.max(np.abs(eta))
    if not top <= EXP_BOUND:
        raise OverflowError(
            f"linear predictor reaches {top:.6g}, beyond the exp bound {EXP_BOUND}"
        )
    return np.exp(eta)


def _score(b, y, w):
    r = y - _rates(b, w)
    return np.array([r.mean(), (r * w).mean()])


def _jacobian(b, w):
    mu = _rates(b, w)
    s0 = mu.mean()
    s1 = (mu * w).mean()
    s2 = (mu * w * w).mean()
    return -np.array([[s0, s1], [s1, s2]])


def score(b: ModelParams, data: Dataset) -> np.ndarray:
    """Averaged naive score ``(1/n) sum (y_i - exp(b0 + b1 w_i)) (1, w_i)``."""
    return _score(b.as_array(), data.y, data.w)


def score_jacobian(b: ModelParams, data: Dataset) -> np.ndarray:
    return _jacobian(b.as_array(), data.w)


def fit_naive(
    data: Dataset,
    init: ModelParams | None = None,
    tol: float = 1e-10,
    max_iter: int = 100,
) -> NaiveEstimate:
    """Solve the naive score equation by Newton's method with step halving.

    Each Newton step is halved (at most 30 times) until the Euclidean
    norm of the score decreases; trial points whose linear predictor
    would overflow count as "no decrease".

    Raises
    ------
    AllZeroCountsError
        If every count is zero.
    NonConvergenceError
        If the tolerance is not met within ``max_iter`` iterations or no
        step length reduces the score. The last iterate is attached.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    y = data.y.astype(float)
    w = data.w
    if not np.any(y > 0):
        raise AllZeroCountsError(
            "all counts are zero; the naive estimator does not exist"
        )
    if init is None:
        b = np.array([math.log(y.mean() + 1e-10), 0.0])
    else:
        b = init.as_array()

    s = _score(b, y, w)
    norm = float(np.hypot(s[0], s[1]))
    it = 0
    stalled = False
    while norm > tol and it < max_iter:
        it += 1
        step = np.linalg.solve(_jacobian(b, w), s)
        t = 1.0
        for _ in range(MAX_HALVINGS + 1):
            cand = b - t * step
            try:
                s_new = _score(cand, y, w)
            except OverflowError:
                t *= 0.5
                continue
            n_new = float(np.hypot(s_new[0], s_new[1]))
            if n_new < norm:
                b, s, norm = cand, s_new, n_new
                break
            t *= 0.5
        else:
            stalled = True
            break

    est = NaiveEstimate(
        params=ModelParams.from_array(b),
        iterations=it,
        converged=norm <= tol,
        score_norm=norm,
        tol=tol,
    )
    if not est.converged:
        why = "no step length reduced the score" if stalled else f"{max_iter} iterations"
        raise NonConvergenceError(
            f"naive fit did not converge ({why}); score norm {norm:.3e} > tol {tol:.1e}",
            estimate=est,
        )
    return est
