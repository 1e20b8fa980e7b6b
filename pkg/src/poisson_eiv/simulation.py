"""Seeded Monte Carlo comparison of the naive and corrected estimators.

Every replication draws from its own generator, derived from the master
seed and the replication index, so a report does not depend on how many
worker threads produced it.
"""
from __future__ import annotations

import logging
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bias import BiasReport, EivModel, naive_limit
from .corrected import correct_estimate, fit_nuisance
from .errors import ConfigError, EivError, SimulationError
from .naive import Dataset, fit_naive

__all__ = [
    "SimConfig",
    "SimReport",
    "replication_rng",
    "generate_dataset",
    "run_monte_carlo",
    "compare_with_theory",
    "TABLE_COLUMNS",
]

log = logging.getLogger(__name__)

NUISANCE_MODES = ("known", "moment")


@dataclass(frozen=True)
class SimConfig:
    model: EivModel
    n: int
    mc: int
    seed: int
    nuisance_mode: str = "known"
    error_known_param: float | None = None
    label: str = ""

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError(f"sample size n must be >= 2, got {self.n}")
        if self.mc < 1:
            raise ConfigError(f"replication count mc must be >= 1, got {self.mc}")
        if self.nuisance_mode not in NUISANCE_MODES:
            raise ConfigError(
                f"nuisance_mode must be one of {NUISANCE_MODES}, got {self.nuisance_mode!r}"
            )
        if self.nuisance_mode == "moment" and self.error_known_param is None:
            raise ConfigError("moment-estimated nuisance needs error_known_param")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class SimReport:
    config: SimConfig
    theory: BiasReport
    bias_naive: np.ndarray
    bias_corrected: np.ndarray
    mse_naive: np.ndarray
    mse_corrected: np.ndarray
    se_naive: np.ndarray
    se_corrected: np.ndarray
    replications_used: int
    failed_replications: int
    failure_reasons: dict = field(default_factory=dict)


def replication_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for replication ``index`` of master ``seed``."""
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,)))
    )


def generate_dataset(model: EivModel, n: int, rng: np.random.Generator) -> Dataset:
    """Draw ``n`` observations of ``(Y, W)``; the latent ``X`` and ``U`` are discarded."""
    x = model.x.sample(rng, n)
    u = model.u.sample(rng, n)
    rate = np.exp(model.beta.beta0 + model.beta.beta1 * x)
    y = rng.poisson(rate)
    return Dataset(y, x + u)


def _replicate(config: SimConfig, index: int):
    """Return ``(naive, corrected)`` coefficient arrays or the failure reason."""
    model = config.model
    try:
        data = generate_dataset(model, config.n, replication_rng(config.seed, index))
        if config.nuisance_mode == "moment":
            x, u = fit_nuisance(data.w, model.u, config.error_known_param)
        else:
            x, u = model.x, model.u
        naive = fit_naive(data)
        corr = correct_estimate(naive, x, u)
    except (EivError, OverflowError, np.linalg.LinAlgError) as exc:
        return type(exc).__name__
    return naive.params.as_array(), corr.params.as_array()


def _summarise(est: np.ndarray, beta: np.ndarray):
    dev = est - beta
    m = est.shape[0]
    bias = dev.mean(axis=0)
    mse = dev.T @ dev / m
    if m > 1:
        se = est.std(axis=0, ddof=1) / math.sqrt(m)
    else:
        se = np.full(2, np.nan)
    return bias, mse, se


def run_monte_carlo(config: SimConfig, workers: int = 1) -> SimReport:
    """Run ``config.mc`` replications and aggregate bias and MSE.

    Replications whose naive fit, nuisance estimation or correction fails
    are dropped from both estimators and counted. More than half failing
    raises :class:`SimulationError`.
    """
    theory = naive_limit(config.model)
    indices = range(config.mc)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda i: _replicate(config, i), indices))
    else:
        results = [_replicate(config, i) for i in indices]

    ok = [r for r in results if not isinstance(r, str)]
    reasons = Counter(r for r in results if isinstance(r, str))
    failed = config.mc - len(ok)
    if failed:
        log.warning("%d of %d replications failed: %s", failed, config.mc, dict(reasons))
    if not ok or failed > config.mc / 2:
        raise SimulationError(
            f"{failed} of {config.mc} replications failed ({dict(reasons)})"
        )

    beta = config.model.beta.as_array()
    naive = np.array([r[0] for r in ok])
    corr = np.array([r[1] for r in ok])
    bn, mn, sn = _summarise(naive, beta)
    bc, mc_, sc = _summarise(corr, beta)
    return SimReport(
        config=config,
        theory=theory,
        bias_naive=bn,
        bias_corrected=bc,
        mse_naive=mn,
        mse_corrected=mc_,
        se_naive=sn,
        se_corrected=sc,
        replications_used=len(ok),
        failed_replications=failed,
        failure_reasons=dict(sorted(reasons.items())),
    )


TABLE_COLUMNS = (
    "scenario",
    "estimator",
    "asy_bias_b0",
    "bias_b0",
    "asy_bias_b1",
    "bias_b1",
    "asy_mse_b0",
    "mse_b0",
    "asy_mse_b1",
    "mse_b1",
    "se_b0",
    "se_b1",
    "n",
    "mc",
    "failed",
)


def compare_with_theory(
    config: SimConfig, report: SimReport | None = None, workers: int = 1
) -> list[dict]:
    """Two table rows (naive, corrected) pairing asymptotic and simulated bias/MSE.

    The corrected estimator is consistent, so its asymptotic columns are 0.
    Pass ``report`` to reuse an existing run.
    """
    if report is None:
        report = run_monte_carlo(config, workers=workers)
    th = report.theory
    label = config.label or f"{config.model.x} + {config.model.u}"
    rows = []
    for name, asy_b, asy_m, bias, mse, se in (
        ("naive", th.bias, th.asy_mse, report.bias_naive, report.mse_naive, report.se_naive),
        ("CN", (0.0, 0.0), (0.0, 0.0), report.bias_corrected, report.mse_corrected,
         report.se_corrected),
    ):
        rows.append({
            "scenario": label,
            "estimator": name,
            "asy_bias_b0": float(asy_b[0]),
            "bias_b0": float(bias[0]),
            "asy_bias_b1": float(asy_b[1]),
            "bias_b1": float(bias[1]),
            "asy_mse_b0": float(asy_m[0]),
            "mse_b0": float(mse[0, 0]),
            "asy_mse_b1": float(asy_m[1]),
            "mse_b1": float(mse[1, 1]),
            "se_b0": float(se[0]),
            "se_b1": float(se[1]),
            "n": config.n,
            "mc": config.mc,
            "failed": report.failed_replications,
        })
    return rows
