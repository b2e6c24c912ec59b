"""
Scan-and-fit estimators: the single-qubit Ramsey scan, the iterative PHOM
and its constant-cosine variant.

All of them estimate expectation values at a set of scan points from a fixed
number of shots per point, then fit a first-harmonic model by linear least
squares. Each shot is one preparation attributed to the scanned combination.
"""

from __future__ import annotations

import numpy as np

from ..models import ModelSpec
from ..phasecore import wrap
from ..simkernel import HiddenTruth, RngLike, as_generator
from ._common import (ConfigError, EstimateResult, PhomConfig, RamseyConfig,
                      fit_harmonic, phase_from_harmonic)

#: fitted first-harmonic amplitude below which a scan is treated as flat
FLAT_AMPLITUDE = 1e-9


def ramsey_points(m: int) -> np.ndarray:
    return np.arange(m) * (2.0 * np.pi / m) - np.pi


def _measure(p_plus, shots, rng, noiseless):
    """Estimated <O> = (N+ - N-)/N at each point, or the exact value."""
    p_plus = np.clip(np.asarray(p_plus, dtype=float), 0.0, 1.0)
    if noiseless:
        return 2.0 * p_plus - 1.0
    n_plus = as_generator(rng).binomial(shots, p_plus)
    return (2.0 * n_plus - shots) / shots


def fit_cosine_phase(thetas, expectations):
    """Fit r cos(A - theta) on the basis {cos, sin}; returns (A, r, var_A)."""
    coef, cov = fit_harmonic(thetas, expectations, constant=False)
    a, b = coef
    r = float(np.hypot(a, b))
    A, var = phase_from_harmonic(a, b, cov)
    return wrap(A), r, var


def ramsey_scan(phi_true: float, cfg: RamseyConfig, rng: RngLike = None, *,
                noiseless: bool = False) -> EstimateResult:
    thetas = ramsey_points(cfg.scan_points)
    p_plus = 0.5 * (1.0 + np.cos(phi_true - thetas))
    expect = _measure(p_plus, cfg.shots_per_point, rng, noiseless)
    A, r, var = fit_cosine_phase(thetas, expect)
    flags = {"scan": (thetas, expect)}
    if r < FLAT_AMPLITUDE:
        flags["diffuse"] = True
    return EstimateResult(np.array([A]), np.array([var]), cfg.budget, flags=flags)


def _check_model(model: ModelSpec):
    if model.name not in ("two_plaquette", "three_plaquette"):
        raise ConfigError(f"PHOM needs a plaquette model, got {model.name}")


def _initial(model, cfg):
    if cfg.initial_angles is None:
        return np.zeros(model.num_angles)
    theta = np.array(cfg.initial_angles, dtype=float)
    if theta.shape != (model.num_angles,):
        raise ConfigError(f"initial_angles must have {model.num_angles} entries")
    return theta


def _phases_from_angles(model, theta):
    est = np.zeros(model.num_phases)
    for c in model.combos:
        est[c.target] = wrap(theta @ c.ttilde_row)
    return est


def phom_scan_points(m: int) -> np.ndarray:
    """M points covering one period (length pi) of a single rotation angle."""
    return -0.5 * np.pi + np.arange(m) * (np.pi / m)


def phom(model: ModelSpec, truth, cfg: PhomConfig, rng: RngLike = None, *,
         noiseless: bool = False) -> EstimateResult:
    """Iterative scan-and-maximize over one designated angle per combination.

    The designated angle enters every cosine of the combination with
    coefficient +-2, so the scan is fitted to {1, cos 2x, sin 2x} and the angle
    is fixed at the fitted maximum. Phase estimates are the theta~ forms of the
    final angles.
    """
    _check_model(model)
    if cfg.variant == "constant_cosine":
        return phom_constant_cosine(model, truth, cfg, rng, noiseless=noiseless)
    phases = truth.phases if isinstance(truth, HiddenTruth) else np.asarray(truth, float)
    theta = _initial(model, cfg)
    grid = phom_scan_points(cfg.scan_points)
    flat = set()
    for _ in range(cfg.iterations):
        for c in model.combos:
            q = c.designated_qubit - 1
            thetas = np.repeat(theta[None, :], cfg.scan_points, axis=0)
            thetas[:, q] = grid
            p_plus = c.likelihood.prob(1, phases, thetas)
            expect = _measure(p_plus, cfg.shots_per_point, rng, noiseless)
            (c0, a, b), _ = fit_harmonic(grid, expect, freq=2.0)
            if np.hypot(a, b) < FLAT_AMPLITUDE:
                flat.add(c.id)
                continue
            theta[q] = 0.5 * np.arctan2(b, a)
    used = len(model.combos) * cfg.scan_points * cfg.shots_per_point * cfg.iterations
    est = _phases_from_angles(model, theta)
    designated = {c.id: c.designated_qubit for c in model.combos}
    return EstimateResult(est, np.full(model.num_phases, np.nan), used,
                          flags={"flat": sorted(flat), "angles": theta,
                                 "designated": designated, "diffuse": bool(flat)})


def constant_cosine_angles(model: ModelSpec, combo, base, theta_tilde_values):
    """Angle vectors that put ``combo``'s theta~ at each requested value.

    Every rotated qubit in the combination's support is shifted by the same
    amount, which leaves all cross-cosine arguments of that combination
    unchanged (their coefficients on the support sum to zero).
    """
    c = model.combo(combo)
    idx = [q for q in model.rotated if (q + 1) in c.support]
    base = np.asarray(base, dtype=float)
    t0 = base @ c.ttilde_row
    # theta~ = -2 sum(theta_q) over idx moves by -2 len(idx) per unit shift
    shift = (t0 - np.asarray(theta_tilde_values, dtype=float)) / (2.0 * len(idx))
    thetas = np.repeat(base[None, :], len(shift), axis=0)
    thetas[:, idx] += shift[:, None]
    return thetas


def phom_constant_cosine(model: ModelSpec, truth, cfg: PhomConfig, rng: RngLike = None, *,
                         noiseless: bool = False) -> EstimateResult:
    """One theta~ scan per combination along the constant-cosine direction."""
    _check_model(model)
    phases = truth.phases if isinstance(truth, HiddenTruth) else np.asarray(truth, float)
    base = _initial(model, cfg)
    tts = ramsey_points(cfg.scan_points)
    est = np.zeros(model.num_phases)
    var = np.full(model.num_phases, np.nan)
    flat = []
    for c in model.combos:
        thetas = constant_cosine_angles(model, c.id, base, tts)
        p_plus = c.likelihood.prob(1, phases, thetas)
        expect = _measure(p_plus, cfg.shots_per_point, rng, noiseless)
        (c0, a, b), cov = fit_harmonic(tts, expect, freq=1.0)
        if np.hypot(a, b) < FLAT_AMPLITUDE:
            flat.append(c.id)
            est[c.target] = wrap(base @ c.ttilde_row)
            continue
        phase, v = phase_from_harmonic(a, b, None if cov is None else cov[1:, 1:])
        est[c.target] = wrap(phase)
        var[c.target] = v
    used = len(model.combos) * cfg.scan_points * cfg.shots_per_point
    return EstimateResult(est, var, used, flags={"flat": flat, "diffuse": bool(flat)})
