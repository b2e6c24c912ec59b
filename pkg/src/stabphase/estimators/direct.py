"""
Direct constant-cosine Bayes for the two-plaquette state.

For each combination the angles move only along the constant-cosine
direction, so its likelihood reduces to

    P(+- | phi_i, h_i) = (2 +- h_i +- cos(phi_i - t~)) / 4

with the frozen cross cosine h_i in [-1, 1] treated as a nuisance parameter.
Each combination gets one third of the budget and its own (phi_i, h_i) grid.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..models import ModelSpec
from ..phasecore import (PosteriorGrid2D, bayes_update, bayes_update_log, moments,
                         uniform_prior_2d, wrap)
from ..simkernel import HiddenTruth, RngLike, as_generator
from ._common import ConfigError, DirectBayesConfig, EstimateResult
from .scans import constant_cosine_angles, ramsey_points


def direct_likelihood(sign, phi, h, theta_tilde, K=2):
    return (K + sign * h + sign * np.cos(phi - theta_tilde)) / (2.0 * K)


@lru_cache(maxsize=4)
def _scan_log_tables(bins_phase, bins_offset, scan_points):
    g = uniform_prior_2d(bins_phase, bins_offset)
    phi, h = g.points
    tts = ramsey_points(scan_points)
    plus = np.stack([np.log(direct_likelihood(1, phi, h, t)) for t in tts])
    minus = np.stack([np.log(direct_likelihood(-1, phi, h, t)) for t in tts])
    return tts, plus, minus


def _summarize(grid: PosteriorGrid2D):
    return moments(grid.phase_marginal())


def bayes_direct_cc(model: ModelSpec, truth, cfg: DirectBayesConfig, rng: RngLike, *,
                    base_angles=None, return_grids: bool = False) -> EstimateResult:
    if model.name != "two_plaquette":
        raise ConfigError("direct constant-cosine Bayes is defined for two_plaquette only")
    phases = truth.phases if isinstance(truth, HiddenTruth) else np.asarray(truth, float)
    base = np.zeros(model.num_angles) if base_angles is None else np.asarray(base_angles, float)
    gen = as_generator(rng)
    G = len(model.combos)

    est = np.zeros(model.num_phases)
    var = np.zeros(model.num_phases)
    grids = {}
    diffuse = False
    if cfg.selection == "scan":
        shots = cfg.budget // (G * cfg.scan_points)
        if shots < 1:
            raise ConfigError(f"budget {cfg.budget} below one shot per scan point")
        tts, logp, logm = _scan_log_tables(cfg.bins_phase, cfg.bins_offset, cfg.scan_points)
        used = G * cfg.scan_points * shots
        for c in model.combos:
            thetas = constant_cosine_angles(model, c.id, base, tts)
            p_plus = np.clip(c.likelihood.prob(1, phases, thetas), 0.0, 1.0)
            n_plus = gen.binomial(shots, p_plus)
            # repeated outcomes at one scan point fold into a single power
            logl = np.tensordot(n_plus, logp, 1) + np.tensordot(shots - n_plus, logm, 1)
            grid = bayes_update_log(uniform_prior_2d(cfg.bins_phase, cfg.bins_offset), logl)
            mom = _summarize(grid)
            est[c.target], var[c.target] = mom.mean, mom.variance
            diffuse |= mom.diffuse
            grids[c.id] = grid
    else:
        per_combo = cfg.budget // G
        used = G * per_combo
        for c in model.combos:
            grid = uniform_prior_2d(cfg.bins_phase, cfg.bins_offset)
            mom = _summarize(grid)
            for _ in range(per_combo):
                beta = 0.5 * np.pi if gen.random() < 0.5 else -0.5 * np.pi
                t = wrap(mom.mean + beta)
                theta = constant_cosine_angles(model, c.id, base, [t])[0]
                p_plus = float(c.likelihood.prob(1, phases, theta))
                o = 1 if gen.random() < p_plus else -1
                grid = bayes_update(grid, lambda phi, h: direct_likelihood(o, phi, h, t))
                mom = _summarize(grid)
            est[c.target], var[c.target] = mom.mean, mom.variance
            diffuse |= mom.diffuse
            grids[c.id] = grid
    flags = {"diffuse": diffuse}
    if return_grids:
        flags["grids"] = grids
    return EstimateResult(est, var, used, flags=flags)
