"""Two-component univariate Gaussian mixture fitted by Expectation-Maximisation.

The lower-mean component is the fishing mode; the fit is always returned
with ``mu1 <= mu2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


class FitError(ValueError):
    """A vessel's speed sample cannot support a two-component fit."""

    reason = "fit_error"


class TooFewSamples(FitError):
    reason = "too_few_samples"


class DegenerateSample(FitError):
    reason = "degenerate_sample"


@dataclass(frozen=True)
class EmConfig:
    min_speed: float = 0.5
    min_samples: int = 50
    max_iter: int = 500
    rel_tol: float = 1e-8
    var_floor: float = 1e-4
    seed: int = 0
    n_restarts: int = 1

    def __post_init__(self):
        for name in ("min_speed", "max_iter", "rel_tol", "var_floor", "n_restarts"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)!r}")
        if not self.rel_tol < 1:
            raise ValueError(f"rel_tol must be < 1, got {self.rel_tol!r}")
        if self.min_samples < 4:
            raise ValueError(f"min_samples must be >= 4, got {self.min_samples!r}")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed!r}")


@dataclass(frozen=True)
class MixtureFit:
    w1: float
    w2: float
    mu1: float
    mu2: float
    sigma1: float
    sigma2: float
    loglik: float
    iterations: int
    converged: bool
    n_samples: int = 0
    # log-likelihood before each M-step and after the last one
    history: tuple[float, ...] = ()


@dataclass(frozen=True)
class SeparationDiagnostics:
    separation: float
    min_weight: float
    ambiguous: bool


def _log_components(x, w, mu, var):
    d = x[None, :] - mu[:, None]
    return (np.log(w) - 0.5 * np.log(var) - _HALF_LOG_2PI)[:, None] - 0.5 * d * d / var[:, None]


def _run_em(x: np.ndarray, w, mu, var, config: EmConfig):
    w, mu, var = (np.asarray(a, dtype=np.float64).copy() for a in (w, mu, var))
    history: list[float] = []
    converged = False
    for it in range(config.max_iter + 1):
        logp = _log_components(x, w, mu, var)
        point_ll = np.logaddexp(logp[0], logp[1])
        ll = float(point_ll.sum())
        if history and abs(ll - history[-1]) < config.rel_tol * abs(history[-1]):
            history.append(ll)
            converged = True
            break
        history.append(ll)
        if it == config.max_iter:
            break
        resp = np.exp(logp - point_ll)
        nk = np.maximum(resp.sum(axis=1), np.finfo(float).tiny)
        mu = resp @ x / nk
        d = x[None, :] - mu[:, None]
        var = np.maximum((resp * d * d).sum(axis=1) / nk, config.var_floor)
        w1 = min(max(nk[0] / (nk[0] + nk[1]), np.finfo(float).tiny), 1.0 - np.finfo(float).eps)
        w = np.array([w1, 1.0 - w1])
    return w, mu, var, history, converged


def _canonical(w, mu, var, history, converged, n) -> MixtureFit:
    i, j = (0, 1) if mu[0] <= mu[1] else (1, 0)
    return MixtureFit(
        w1=float(w[i]),
        w2=float(w[j]),
        mu1=float(mu[i]),
        mu2=float(mu[j]),
        sigma1=math.sqrt(var[i]),
        sigma2=math.sqrt(var[j]),
        loglik=history[-1],
        iterations=len(history) - 1,
        converged=converged,
        n_samples=n,
        history=tuple(history),
    )


def fit_sample(speeds, config: EmConfig = EmConfig()) -> np.ndarray:
    """The speeds that enter the fit: those strictly above ``min_speed``."""
    x = np.asarray(speeds, dtype=np.float64)
    return x[x > config.min_speed]


def initial_parameters(x: np.ndarray, config: EmConfig = EmConfig()):
    """Deterministic start: quartile means, half the sample std, equal weights."""
    q25, q75 = np.percentile(x, [25.0, 75.0])
    s = max(float(x.std()) / 2.0, math.sqrt(config.var_floor))
    if q25 == q75:
        # quantised samples can pile up; identical means would never separate
        q25, q75 = float(x.mean()) - s, float(x.mean()) + s
    return np.array([0.5, 0.5]), np.array([q25, q75]), np.array([s * s, s * s])


def fit_em(speeds, config: EmConfig = EmConfig()) -> MixtureFit:
    """Fit a two-component Gaussian mixture to the speeds above ``config.min_speed``.

    Raises
    ------
    TooFewSamples
        Fewer than ``config.min_samples`` speeds remain after filtering.
    DegenerateSample
        The remaining speeds have (near) zero spread.
    """
    x = fit_sample(speeds, config)
    if len(x) < config.min_samples:
        raise TooFewSamples(f"{len(x)} speeds above {config.min_speed} kn, need {config.min_samples}")
    if not x.var() > config.var_floor:
        raise DegenerateSample(f"speed variance {x.var():.3g} kn^2 is within the variance floor")

    best = _run_em(x, *initial_parameters(x, config), config)
    if config.n_restarts > 1:
        rng = np.random.default_rng(config.seed)
        values = np.unique(x)
        s2 = max(float(x.var()) / 4.0, config.var_floor)
        for _ in range(config.n_restarts - 1):
            mu0 = np.sort(rng.choice(values, size=2, replace=False))
            run = _run_em(x, [0.5, 0.5], mu0, [s2, s2], config)
            if run[3][-1] > best[3][-1]:
                best = run
    return _canonical(*best, len(x))


def responsibilities(fit: MixtureFit, speed):
    """Posterior probabilities (p1, p2) that ``speed`` came from each component."""
    s = np.asarray(speed, dtype=np.float64)
    l1 = math.log(fit.w1) - math.log(fit.sigma1) - 0.5 * ((s - fit.mu1) / fit.sigma1) ** 2
    l2 = math.log(fit.w2) - math.log(fit.sigma2) - 0.5 * ((s - fit.mu2) / fit.sigma2) ** 2
    h = np.tanh(0.5 * (l1 - l2))
    p1, p2 = 0.5 * (1.0 + h), 0.5 * (1.0 - h)
    if p1.ndim == 0:
        return float(p1), float(p2)
    return p1, p2


def separation_diagnostics(
    fit: MixtureFit, min_separation: float = 2.0, min_weight: float = 0.05
) -> SeparationDiagnostics:
    """Mode separation in units of the wider component, and an ambiguity flag."""
    separation = (fit.mu2 - fit.mu1) / max(fit.sigma1, fit.sigma2)
    w_min = min(fit.w1, fit.w2)
    return SeparationDiagnostics(
        separation=separation,
        min_weight=w_min,
        ambiguous=bool(separation < min_separation or w_min < min_weight),
    )
