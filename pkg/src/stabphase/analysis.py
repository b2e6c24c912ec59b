"""
Variance analysis: the alpha factor of the expected one-step variance
decrease, an exact quadrature oracle for that decrease, Monte-Carlo variance
estimation over random truths, and the c/n fit.
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import models
from .estimators import (BayesConfig, DirectBayesConfig, PhomConfig, RamseyConfig,
                         bayes_direct_cc, bayes_marginal, bayes_single_adaptive, phom,
                         ramsey_scan)
from .estimators._common import ConfigError
from .phasecore import PosteriorGrid1D, bayes_update, circ_diff, moments
from .simkernel import HiddenTruth, spawn_rng

#: variance above which the Gaussian closed form is not trusted
GAUSSIAN_REGIME_MAX = 0.5
#: curve budgets used when none are given
DEFAULT_BUDGETS = (250, 500, 1000, 2000, 4000)
MIN_TRIALS = 100


class OutOfRegimeWarning(UserWarning):
    """The analytic variance step was evaluated outside its Gaussian regime."""


@dataclass(frozen=True)
class AlphaParams:
    K: int
    sigma2: float = 0.0
    delta: float = 0.5 * np.pi

    def __post_init__(self):
        if self.K not in (1, 2, 4):
            raise ValueError(f"K must be 1, 2 or 4, got {self.K}")
        if not self.sigma2 >= 0.0:
            raise ValueError("sigma2 must be non-negative")


def alpha_factor(p: AlphaParams) -> float:
    """e^{-s2} sin^2(d) / (K^2 - e^{-s2} cos^2(d)).

    For K = 1 at zero variance the ratio is 0/0 at d = 0; its limit, 1, is
    returned for every d.
    """
    e = np.exp(-p.sigma2)
    if p.K == 1 and p.sigma2 == 0.0:
        return 1.0
    s, c = np.sin(p.delta), np.cos(p.delta)
    # K^2 - e c^2 rearranged so K = 1 at small sigma2 does not cancel
    den = (p.K * p.K - 1) + s * s - np.expm1(-p.sigma2) * c * c
    return float(e * s * s / den)


def mean_alpha(K: int, points: int = 4096) -> float:
    """Average of alpha_factor over a uniform delta, in the zero-variance limit."""
    d = -np.pi + (np.arange(points) + 0.5) * (2.0 * np.pi / points)
    return float(np.mean([alpha_factor(AlphaParams(K, 0.0, x)) for x in d]))


def variance_step_analytic(K: int, sigma2: float, phibar: float, theta_tilde: float) -> float:
    """Expected change of the variance after one measurement, -alpha sigma^4.

    Issues an OutOfRegimeWarning when sigma2 exceeds GAUSSIAN_REGIME_MAX.
    """
    if sigma2 > GAUSSIAN_REGIME_MAX:
        warnings.warn(f"sigma2={sigma2} is outside the Gaussian regime "
                      f"(<= {GAUSSIAN_REGIME_MAX})", OutOfRegimeWarning, stacklevel=2)
    a = alpha_factor(AlphaParams(K, sigma2, float(circ_diff(phibar, theta_tilde))))
    return -a * sigma2 * sigma2


def variance_step_numeric(grid: PosteriorGrid1D, theta_tilde: float, K: int = 1,
                          amplitude: Optional[float] = None) -> float:
    """Exact expected variance change for outcome likelihoods (1 +- a cos(phi - t~))/2.

    ``a`` is 1/K unless ``amplitude`` is given. Both outcomes are weighted by
    their predictive probability; no Gaussian approximation is made.
    """
    a = 1.0 / K if amplitude is None else float(amplitude)
    w = grid.weights()
    cosd = np.cos(grid.points - theta_tilde)
    prior = moments(grid).variance
    expected = 0.0
    for sign in (1, -1):
        lik = 0.5 * (1.0 + sign * a * cosd)
        p = float(np.dot(w, lik))
        if p <= 0.0:
            continue
        expected += p * moments(bayes_update(grid, lik)).variance
    return expected - prior


# Monte-Carlo variance

@dataclass(frozen=True)
class EstimatorSpec:
    """Which estimator to run and its fixed (budget-independent) parameters.

    ``method`` is one of ramsey, bayes1q, phom, ccphom, bayes-direct,
    bayes-marginal. Scan methods turn a budget n into the largest whole number
    of shots per point that fits.
    """

    method: str
    model: str = "single_qubit"
    params: dict = field(default_factory=dict)

    SEQUENTIAL = ("bayes1q", "bayes-marginal")
    METHODS = ("ramsey", "bayes1q", "phom", "ccphom", "bayes-direct", "bayes-marginal")

    def __post_init__(self):
        if self.method not in self.METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        single = self.method in ("ramsey", "bayes1q")
        if single and self.model != "single_qubit":
            raise ConfigError(f"{self.method} runs on single_qubit only")
        if not single and self.model == "single_qubit":
            raise ConfigError(f"{self.method} needs a plaquette model")

    @property
    def sequential(self) -> bool:
        return self.method in self.SEQUENTIAL

    def run(self, truth: HiddenTruth, budget: int, rng, checkpoints=None):
        model = models.build_model(self.model)
        p = dict(self.params)
        if self.method == "bayes1q":
            p.setdefault("warmup", 0)
            return bayes_single_adaptive(truth.phases[0], BayesConfig(budget=budget, **p), rng,
                                         checkpoints=checkpoints)
        if self.method == "bayes-marginal":
            p.setdefault("warmup", min(20, budget))
            return bayes_marginal(model, truth, BayesConfig(budget=budget, **p), rng,
                                  checkpoints=checkpoints)
        if self.method == "ramsey":
            m = p.get("scan_points", 10)
            if budget < m:
                raise ConfigError(f"budget {budget} below one shot per point")
            return ramsey_scan(truth.phases[0], RamseyConfig(m, budget // m), rng)
        if self.method in ("phom", "ccphom"):
            if self.method == "ccphom":
                p["variant"] = "constant_cosine"
            cfg = PhomConfig.from_budget(budget, len(model.combos), **p)
            return phom(model, truth, cfg, rng)
        return bayes_direct_cc(model, truth, DirectBayesConfig(budget=budget, **p), rng)


@dataclass(frozen=True)
class VariancePoint:
    n: int
    sigma2: float
    stderr: float
    trials: int
    diffuse_count: int
    per_phase: Tuple[float, ...] = ()


@dataclass
class VarianceCurve:
    samples: List[Tuple[int, float]]
    fitted_c: float
    fit_residual: float
    points: List[VariancePoint] = field(default_factory=list)


def _trial(spec: EstimatorSpec, budgets: Tuple[int, ...], master_seed: int, k: int):
    """Squared errors (len(budgets) x P), realized n and diffuse flags for trial k.

    The truth is the first draw of the trial's stream; the estimator then
    consumes the same stream. Scan methods restart the stream per budget so
    every budget sees the same truth.
    """
    model = models.build_model(spec.model)
    errs, ns, diffuse = [], [], []
    if spec.sequential:
        rng = spawn_rng(master_seed, k)
        truth = HiddenTruth.draw(model, rng)
        res = spec.run(truth, max(budgets), rng, checkpoints=budgets)
        snaps = {n: (mean, d) for n, mean, _, d in res.trajectory}
        for n in budgets:
            mean, d = snaps[n]
            errs.append(circ_diff(mean, truth.phases) ** 2)
            ns.append(n)
            diffuse.append(d)
    else:
        for n in budgets:
            rng = spawn_rng(master_seed, k)
            truth = HiddenTruth.draw(model, rng)
            res = spec.run(truth, n, rng)
            errs.append(circ_diff(res.phases_est, truth.phases) ** 2)
            ns.append(res.preparations_used)
            diffuse.append(res.diffuse)
    return np.array(errs, dtype=float), np.array(ns), np.array(diffuse)


def _chunk(args):
    spec, budgets, seed, ks = args
    return [_trial(spec, budgets, seed, k) for k in ks]


def _run_trials(spec, budgets, trials, master_seed, workers):
    workers = max(1, int(workers or os.cpu_count() or 1))
    if workers == 1:
        return [_trial(spec, budgets, master_seed, k) for k in range(trials)]
    chunks = [(spec, budgets, master_seed, list(range(s, trials, workers)))
              for s in range(workers)]
    with ProcessPoolExecutor(workers) as pool:
        parts = list(pool.map(_chunk, chunks))
    # restore trial order so the reduction does not depend on the worker count
    out = [None] * trials
    for s, part in enumerate(parts):
        for j, r in enumerate(part):
            out[s + j * workers] = r
    return out


def monte_carlo_curve(spec: EstimatorSpec, budgets: Sequence[int], trials: int,
                      master_seed: int, workers: Optional[int] = 1) -> List[VariancePoint]:
    """Mean squared circular error per budget, averaged over phases and trials.

    Diffuse trials are kept with their realized error and counted.
    """
    if trials < MIN_TRIALS:
        raise ConfigError(f"need at least {MIN_TRIALS} trials, got {trials}")
    budgets = tuple(sorted(set(int(b) for b in budgets)))
    if not budgets or budgets[0] < 1:
        raise ConfigError("budgets must be positive")
    results = _run_trials(spec, budgets, trials, master_seed, workers)
    errs = np.stack([r[0] for r in results])       # trials x budgets x P
    ns = np.stack([r[1] for r in results])
    diffuse = np.stack([r[2] for r in results])
    points = []
    for j in range(len(budgets)):
        per_trial = errs[:, j, :].mean(axis=1)
        n = int(ns[0, j])
        if np.any(ns[:, j] != n):
            raise RuntimeError("preparations used differ between trials")
        points.append(VariancePoint(
            n=n,
            sigma2=float(per_trial.mean()),
            stderr=float(per_trial.std(ddof=1) / np.sqrt(trials)),
            trials=trials,
            diffuse_count=int(diffuse[:, j].sum()),
            per_phase=tuple(float(x) for x in errs[:, j, :].mean(axis=0)),
        ))
    return points


def monte_carlo_variance(spec: EstimatorSpec, n: int, trials: int, master_seed: int,
                         workers: Optional[int] = 1) -> VariancePoint:
    return monte_carlo_curve(spec, [n], trials, master_seed, workers)[0]


def fit_inverse_n(samples: Sequence[Tuple[float, float]]) -> Tuple[float, float]:
    """Least-squares sigma2 = c/n through the origin in 1/n.

    Returns ``(c, residual)``; the residual is the RMS relative deviation of
    the samples from c/n.
    """
    if len(samples) < 4:
        raise ValueError(f"need at least 4 samples, got {len(samples)}")
    n = np.array([s[0] for s in samples], dtype=float)
    y = np.array([s[1] for s in samples], dtype=float)
    if np.any(n <= 0) or np.any(y <= 0):
        raise ValueError("samples must have positive n and sigma2")
    x = 1.0 / n
    c = float(np.dot(x, y) / np.dot(x, x))
    resid = float(np.sqrt(np.mean((y * n / c - 1.0) ** 2)))
    return c, resid


def variance_curve(spec: EstimatorSpec, budgets: Sequence[int] = DEFAULT_BUDGETS,
                   trials: int = 1000, master_seed: int = 0,
                   workers: Optional[int] = 1, scale: float = 1.0) -> VarianceCurve:
    """Monte-Carlo curve over ``budgets`` and its c/n fit.

    ``scale`` multiplies every n before fitting; 1/num_combos gives the
    per-combination accounting of the scan methods.
    """
    points = monte_carlo_curve(spec, budgets, trials, master_seed, workers)
    samples = [(p.n * scale, p.sigma2) for p in points]
    c, resid = fit_inverse_n(samples)
    return VarianceCurve(samples, c, resid, points)
