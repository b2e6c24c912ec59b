"""
Seeded measurement simulation.

Each trial owns one Philox stream keyed by ``(master_seed, trial_index)``.
A *preparation* is one creation-and-readout of the code state; budgets of
every estimator are counted in preparations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Union

import numpy as np

from . import models
from .models import ModelSpec

PRNG_ALGORITHM = "numpy.random.Philox via SeedSequence((master_seed, trial_index))"


@dataclass
class RngStream:
    master_seed: int
    stream_index: int
    generator: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        seq = np.random.SeedSequence((int(self.master_seed), int(self.stream_index)))
        self.generator = np.random.Generator(np.random.Philox(seq))


RngLike = Union[RngStream, np.random.Generator]


def spawn_rng(master_seed: int, trial_index: int) -> RngStream:
    return RngStream(master_seed, trial_index)


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


@dataclass
class PreparationCounter:
    count: int = 0

    def next(self) -> int:
        i = self.count
        self.count += 1
        return i


@dataclass(frozen=True)
class HiddenTruth:
    phases: np.ndarray

    @classmethod
    def draw(cls, model: ModelSpec, rng: RngLike) -> "HiddenTruth":
        g = as_generator(rng)
        return cls(g.uniform(-np.pi, np.pi, model.num_phases))


@dataclass(frozen=True)
class MeasurementRecord:
    combo: str
    theta: np.ndarray
    outcome: int
    preparation_index: int


def sample_single_qubit(phi_true: float, theta: float, rng: RngLike,
                        counter: PreparationCounter | None = None) -> int:
    """One projective measurement of cos(theta) X + sin(theta) Y."""
    if counter is not None:
        counter.next()
    p_plus = 0.5 * (1.0 + np.cos(phi_true - theta))
    return 1 if as_generator(rng).random() < p_plus else -1


def prepare_and_measure(model: ModelSpec, truth, theta, combos: Iterable,
                        rng: RngLike, counter: PreparationCounter | None = None,
                        independent: bool = False) -> list:
    """Prepare the rotated code state once and read the requested combinations.

    By default all outcomes come from a single X-basis readout of the
    statevector, so commuting combinations are sampled jointly. With
    ``independent=True`` each combination is an independent Bernoulli draw from
    its own likelihood (ablation only).
    """
    combos = [model.combo(c) for c in combos]
    if not combos:
        raise ValueError("no combinations requested")
    phases = truth.phases if isinstance(truth, HiddenTruth) else np.asarray(truth, float)
    theta = np.asarray(theta, dtype=float)
    g = as_generator(rng)
    index = counter.next() if counter is not None else 0

    if model.name == "single_qubit":
        outcomes = [1 if g.random() < c.likelihood.prob(1, phases, theta) else -1
                    for c in combos]
    elif independent:
        outcomes = [1 if g.random() < float(c.likelihood.prob(1, phases, theta)) else -1
                    for c in combos]
    else:
        state = models.statevector_build(phases, theta, model)
        probs = models.x_basis_probabilities(state)
        s = int(np.searchsorted(np.cumsum(probs), g.random(), side="right"))
        s = min(s, models.DIM - 1)
        outcomes = [models.parity(s, c.mask) for c in combos]
    return [MeasurementRecord(c.id, theta.copy(), o, index) for c, o in zip(combos, outcomes)]
