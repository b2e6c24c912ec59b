"""
Sequential grid-Bayes estimators: the adaptive single-qubit protocol and the
marginal-likelihood method for the plaquette states.

Both run the same compiled loop. Every phase keeps its own 1-D grid; after
each preparation the grid of phase i is multiplied by the marginal
likelihood (K +- cos(phi_i - t~_i)) / 2K of the combination that targets it.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .. import models
from ..models import ModelSpec
from ..phasecore import DegeneratePosteriorError, grid_points
from ..simkernel import HiddenTruth, MeasurementRecord, RngLike, as_generator
from . import _kernels
from ._common import BayesConfig, ConfigError, EstimateResult

SAMPLING_ANALYTIC, SAMPLING_JOINT, SAMPLING_INDEPENDENT = 0, 1, 2


@lru_cache(maxsize=8)
def _grid_tables(bins: int):
    pts = grid_points(bins)
    return pts, np.cos(pts), np.sin(pts)


@lru_cache(maxsize=4)
def _model_tables(name: str):
    m = models.build_model(name)
    G = len(m.combos)
    lik_a = np.stack([c.likelihood.a for c in m.combos]).astype(float)
    lik_b = np.stack([c.likelihood.b for c in m.combos]).astype(float)
    target = np.array([c.target for c in m.combos], dtype=np.int64)
    rows = m.ttilde_matrix.astype(float)
    solver = np.ascontiguousarray(m._solver)
    rotated = np.array(m.rotated, dtype=np.int64)
    masks = np.array([c.mask for c in m.combos], dtype=np.int64)
    if m.components:
        comp_phase = np.array([k for k, _ in m.components], dtype=np.int64)
        bits = np.array([b for _, b in m.components], dtype=np.int64)
        comp_qubits = ((bits[:, None] >> (models.NUM_QUBITS - 1 - np.arange(models.NUM_QUBITS))) & 1).astype(float)
        s = np.arange(models.DIM)[:, None] & bits[None, :]
        parity = np.array([[bin(v).count("1") & 1 for v in row] for row in s])
        sign_table = (1.0 - 2.0 * parity)
    else:
        comp_phase = np.zeros(1, dtype=np.int64)
        comp_qubits = np.zeros((1, m.num_angles))
        sign_table = np.ones((1, 1))
    return m, G, lik_a, lik_b, target, rows, solver, rotated, comp_phase, comp_qubits, sign_table, masks


def uniform_width(model: ModelSpec) -> int:
    """Uniform draws consumed per preparation."""
    return 1 + len(model.combos) + model.num_phases


def _run(model: ModelSpec, phases, budget: int, grid_bins: int, rng: RngLike, *,
         adaptive: bool, warmup: int, first_zero: bool, sampling: int,
         checkpoints: Optional[Sequence[int]], record: bool) -> EstimateResult:
    (m, G, lik_a, lik_b, target, rows, solver, rotated,
     comp_phase, comp_qubits, sign_table, masks) = _model_tables(model.name)
    phases = np.asarray(phases, dtype=float)
    if phases.shape != (m.num_phases,):
        raise ConfigError(f"{m.name} needs {m.num_phases} true phases")
    cps = sorted(set(int(c) for c in (checkpoints or ())) | {budget})
    if cps[0] < 1 or cps[-1] > budget:
        raise ConfigError("checkpoints must lie in [1, budget]")
    cps = np.array(cps, dtype=np.int64)

    # one row per preparation so shorter runs consume a prefix of the stream
    uniforms = as_generator(rng).random((budget, uniform_width(m)))
    pts, cg, sg = _grid_tables(grid_bins)
    P, Q = m.num_phases, m.num_angles
    out_mean = np.zeros((len(cps), P))
    out_var = np.zeros((len(cps), P))
    out_diffuse = np.zeros((len(cps), P), dtype=np.bool_)
    nrec = budget if record else 0
    rec_tt = np.zeros((nrec, G))
    rec_phibar = np.zeros((nrec, P))
    rec_theta = np.zeros((nrec, Q))
    rec_out = np.zeros((nrec, G), dtype=np.int64)

    status, steps = _kernels.run_sequential(
        phases, pts, cg, sg, lik_a, lik_b, target, rows, solver, rotated,
        comp_phase, comp_qubits, sign_table, masks,
        sampling, uniforms, warmup, adaptive, first_zero,
        cps, out_mean, out_var, out_diffuse,
        record, rec_tt, rec_phibar, rec_theta, rec_out,
    )
    if status == _kernels.DEGENERATE:
        raise DegeneratePosteriorError(f"posterior collapsed at preparation {steps}")

    history = None
    if record:
        history = []
        for t in range(budget):
            for g, c in enumerate(m.combos):
                history.append(MeasurementRecord(c.id, rec_theta[t].copy(), int(rec_out[t, g]), t))
    flags = {
        "diffuse": bool(out_diffuse[-1].any()),
        "theta_tilde": rec_tt if record else None,
        "phibar_before": rec_phibar if record else None,
    }
    trajectory = [(int(n), out_mean[k].copy(), out_var[k].copy(), bool(out_diffuse[k].any()))
                  for k, n in enumerate(cps)]
    return EstimateResult(out_mean[-1].copy(), out_var[-1].copy(), budget,
                          history=history, flags=flags, trajectory=trajectory)


def bayes_single_adaptive(phi_true: float, cfg: BayesConfig, rng: RngLike, *,
                          checkpoints=None, record: bool = False) -> EstimateResult:
    """Adaptive single-qubit estimation.

    The first measurement uses theta = 0; afterwards theta = phi_bar +- pi/2
    with the sign drawn uniformly at every step. ``cfg.warmup`` is ignored.
    """
    model = models.build_model("single_qubit")
    return _run(model, [phi_true], cfg.budget, cfg.grid_bins, rng,
                adaptive=True, warmup=0, first_zero=True,
                sampling=SAMPLING_ANALYTIC, checkpoints=checkpoints, record=record)


def bayes_marginal(model: ModelSpec, truth, cfg: BayesConfig, rng: RngLike, *,
                   checkpoints=None, record: bool = False) -> EstimateResult:
    """Marginal-likelihood Bayes for the two- or three-plaquette state.

    Every preparation reads all combinations at once. With adaptive
    selection, theta~_i = phi_bar_i + beta_i with an independent beta_i in
    {+pi/2, -pi/2} per phase; the first ``cfg.warmup`` preparations, and every
    preparation in random mode, use uniformly drawn theta~ instead.
    """
    if model.name not in ("two_plaquette", "three_plaquette"):
        raise ConfigError("bayes_marginal needs a plaquette model")
    phases = truth.phases if isinstance(truth, HiddenTruth) else truth
    sampling = SAMPLING_INDEPENDENT if cfg.independent_sampling else SAMPLING_JOINT
    return _run(model, phases, cfg.budget, cfg.grid_bins, rng,
                adaptive=cfg.selection == "adaptive", warmup=cfg.warmup,
                first_zero=False, sampling=sampling,
                checkpoints=checkpoints, record=record)
