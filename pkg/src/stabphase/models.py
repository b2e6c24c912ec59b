"""
Likelihood models for the single-qubit, two-plaquette and three-plaquette
(Steane |0>_L) phase-estimation problems.

Every stabilizer-combination likelihood is a normalized sum of K unit
cosines,

    P(+ | phi, theta) = (K + sum_j cos(a_j . phi + b_j . theta)) / (2K),

stored as integer coefficient tables. The tables below are transcribed term
by term from the closed-form likelihoods; :func:`statevector_expectations`
recomputes the same quantities by explicit operator application and serves
as the independent check.

Indices in the tables are 1-based (phi_1..phi_7, theta_1..theta_7, qubits
1..7); array positions are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.linalg import hadamard

from .phasecore import wrap

NUM_QUBITS = 7
DIM = 2**NUM_QUBITS

MODEL_NAMES = ("single_qubit", "two_plaquette", "three_plaquette")

_GENERATORS = {
    "S1": frozenset({1, 2, 3, 4}),
    "S2": frozenset({2, 3, 5, 6}),
    "S3": frozenset({3, 4, 6, 7}),
}


class ModelError(ValueError):
    pass


def _t(phases, thetas):
    """One cosine term: signed 1-based phase and angle indices."""
    return tuple(phases), tuple(thetas)


# Cosine terms per combination; the first term carries the target phase.
_TWO_PLAQUETTE_TERMS = {
    "S1": [_t((2,), (1, 2, 3, 4)), _t((1, -3), (-1, 2, 3, -4))],
    "S2": [_t((1,), (2, 3, 5, 6)), _t((2, -3), (2, 3, -5, -6))],
    "S1S2": [_t((3,), (1, 4, 5, 6)), _t((1, -2), (-1, -4, 5, 6))],
}

_THREE_PLAQUETTE_TERMS = {
    "S1": [
        _t((2,), (1, 2, 3, 4)),
        _t((1, -3), (-1, 2, 3, -4)),
        _t((4, -6), (-1, -2, 3, 4)),
        _t((5, -7), (-1, 2, -3, 4)),
    ],
    "S2": [
        _t((1,), (2, 3, 5, 6)),
        _t((2, -3), (2, 3, -5, -6)),
        _t((4, -5), (-2, 3, -5, 6)),
        _t((6, -7), (2, -3, -5, 6)),
    ],
    "S3": [
        _t((4,), (3, 4, 6, 7)),
        _t((1, -5), (3, -4, 6, -7)),
        _t((2, -6), (3, 4, -6, -7)),
        _t((3, -7), (-3, 4, 6, -7)),
    ],
    "S1S2": [
        _t((3,), (1, 4, 5, 6)),
        _t((1, -2), (-1, -4, 5, 6)),
        _t((4, -7), (-1, 4, -5, 6)),
        _t((5, -6), (-1, 4, 5, -6)),
    ],
    "S1S3": [
        _t((6,), (1, 2, 6, 7)),
        _t((1, -7), (-1, 2, 6, -7)),
        _t((2, -4), (1, 2, -6, -7)),
        _t((3, -5), (1, -2, 6, -7)),
    ],
    "S2S3": [
        _t((5,), (2, 4, 5, 7)),
        _t((1, -4), (2, -4, 5, -7)),
        _t((2, -7), (2, 4, -5, -7)),
        _t((3, -6), (-2, 4, 5, -7)),
    ],
    "S1S2S3": [
        _t((7,), (1, 3, 5, 7)),
        _t((1, -6), (-1, 3, 5, -7)),
        _t((2, -5), (1, 3, -5, -7)),
        _t((3, -4), (1, -3, 5, -7)),
    ],
}

# Code-state components: (phase index or 0 for the reference, bitstring q1..q7)
_COMPONENTS = [
    (0, "0000000"),
    (1, "0110110"),
    (2, "1111000"),
    (3, "1001110"),
    (4, "0011011"),
    (5, "0101101"),
    (6, "1100011"),
    (7, "1010101"),
]

# Rotation qubit scanned for each combination by the iterative scan method.
_DESIGNATED = {
    "two_plaquette": {"S1": 2, "S2": 5, "S1S2": 1},
    "three_plaquette": {
        "S1": 2, "S2": 5, "S3": 7, "S1S2": 1, "S1S3": 6, "S2S3": 4, "S1S2S3": 3,
    },
}


@dataclass(frozen=True)
class CosineSumLikelihood:
    """Coefficient tables: ``a`` is (K, P) in {-1,0,1}, ``b`` is (K, Q)."""

    a: np.ndarray
    b: np.ndarray

    @property
    def K(self) -> int:
        return self.a.shape[0]

    def arguments(self, phi, theta) -> np.ndarray:
        phi = np.asarray(phi, dtype=float)
        theta = np.asarray(theta, dtype=float)
        return phi @ self.a.T + theta @ self.b.T

    def expectation(self, phi, theta):
        return np.cos(self.arguments(phi, theta)).sum(axis=-1) / self.K

    def prob(self, sign: int, phi, theta):
        return 0.5 * (1.0 + sign * self.expectation(phi, theta))


@dataclass(frozen=True)
class Combo:
    id: str
    support: frozenset
    likelihood: CosineSumLikelihood
    target: int
    ttilde_row: np.ndarray
    designated_qubit: int | None = None

    @property
    def mask(self) -> int:
        return support_mask(self.support)


@dataclass(frozen=True)
class ModelSpec:
    name: str
    num_phases: int
    num_angles: int
    combos: tuple
    rotated: tuple  # 0-based angle indices that estimators may set
    components: tuple = field(default=())  # (phase index, bit mask) pairs

    @property
    def K(self) -> int:
        return self.combos[0].likelihood.K

    @property
    def combo_ids(self) -> tuple:
        return tuple(c.id for c in self.combos)

    def combo(self, cid) -> Combo:
        if isinstance(cid, (int, np.integer)):
            return self.combos[cid]
        for c in self.combos:
            if c.id == cid:
                return c
        raise ModelError(f"model {self.name} has no combination {cid!r}")

    @property
    def ttilde_matrix(self) -> np.ndarray:
        return np.array([c.ttilde_row for c in self.combos])

    @property
    def targets(self) -> np.ndarray:
        return np.array([c.target for c in self.combos])

    @cached_property
    def _solver(self) -> np.ndarray:
        # rows reordered by target phase so the system reads theta~_i = t_i
        order = np.argsort(self.targets)
        a = self.ttilde_matrix[order][:, list(self.rotated)].astype(float)
        if a.shape[0] != a.shape[1] or not np.isfinite(np.linalg.cond(a)) \
                or abs(np.linalg.det(a)) < 1e-9:
            raise ModelError(f"theta-tilde system of {self.name} is singular")
        return np.linalg.inv(a)


def support_mask(support) -> int:
    """Bit mask with qubit 1 as the most significant of 7 bits."""
    m = 0
    for q in support:
        m |= 1 << (NUM_QUBITS - q)
    return m


def _bits(bitstring: str) -> int:
    return int(bitstring, 2)


def _vector(signed, length, scale):
    v = np.zeros(length, dtype=int)
    for s in signed:
        v[abs(s) - 1] += scale * (1 if s > 0 else -1)
    return v


def _plaquette_model(name, terms, num_phases, rotated):
    combos = []
    for cid, tl in terms.items():
        a = np.array([_vector(p, num_phases, 1) for p, _ in tl])
        b = np.array([_vector(t, NUM_QUBITS, 2) for _, t in tl])
        support = frozenset()
        for g in ("S1", "S2", "S3"):
            if g in cid:
                support = support ^ _GENERATORS[g]
        target = int(np.flatnonzero(a[0])[0])
        combos.append(Combo(
            id=cid,
            support=support,
            likelihood=CosineSumLikelihood(a, b),
            target=target,
            ttilde_row=-b[0],
            designated_qubit=_DESIGNATED[name][cid],
        ))
    comps = tuple((k, _bits(s)) for k, s in _COMPONENTS[: num_phases + 1])
    return ModelSpec(name, num_phases, NUM_QUBITS, tuple(combos), tuple(rotated), comps)


def build_model(kind: str) -> ModelSpec:
    """Return the coefficient tables for one of :data:`MODEL_NAMES`."""
    if kind == "single_qubit":
        lik = CosineSumLikelihood(np.array([[1]]), np.array([[-1]]))
        combo = Combo("O", frozenset({1}), lik, target=0, ttilde_row=np.array([1]))
        return ModelSpec(kind, 1, 1, (combo,), (0,))
    if kind == "two_plaquette":
        return _plaquette_model(kind, _TWO_PLAQUETTE_TERMS, 3, rotated=(0, 1, 4))
    if kind == "three_plaquette":
        return _plaquette_model(kind, _THREE_PLAQUETTE_TERMS, 7, rotated=range(7))
    raise ModelError(f"unknown model {kind!r}; expected one of {MODEL_NAMES}")


def _check_dims(model, phi, theta):
    phi = np.asarray(phi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if phi.shape[-1:] != (model.num_phases,) or theta.shape[-1:] != (model.num_angles,):
        raise ModelError(
            f"{model.name} expects {model.num_phases} phases and "
            f"{model.num_angles} angles, got {phi.shape} and {theta.shape}")
    return phi, theta


def full_likelihood(model: ModelSpec, combo, sign: int, phi, theta):
    """P(sign | phi, theta) for one combination; broadcasts over leading axes."""
    phi, theta = _check_dims(model, phi, theta)
    return model.combo(combo).likelihood.prob(sign, phi, theta)


def marginal_likelihood(model: ModelSpec, combo, sign: int, phi_target, theta_tilde):
    """Likelihood with every cross cosine averaged out: (K +- cos(phi - t~)) / 2K."""
    K = model.combo(combo).likelihood.K
    return (K + sign * np.cos(np.subtract(phi_target, theta_tilde))) / (2.0 * K)


def theta_tilde(model: ModelSpec, combo, theta):
    theta = np.asarray(theta, dtype=float)
    return wrap(theta @ model.combo(combo).ttilde_row)


def solve_angles(model: ModelSpec, targets: Sequence[float]) -> np.ndarray:
    """Rotation angles realising theta~_i = targets[i] for every phase i.

    ``targets`` is indexed by phase. Only the model's rotated qubits are set;
    the rest stay at zero.
    """
    targets = np.asarray(targets, dtype=float)
    if targets.shape[-1] != model.num_phases:
        raise ModelError(f"expected {model.num_phases} targets, got {targets.shape[-1]}")
    theta = np.zeros(targets.shape[:-1] + (model.num_angles,))
    theta[..., list(model.rotated)] = targets @ model._solver.T
    return theta


# ---------------------------------------------------------------------------
# statevector oracle
# ---------------------------------------------------------------------------

_BIT_TABLE = (np.arange(DIM)[:, None] >> (NUM_QUBITS - 1 - np.arange(NUM_QUBITS))) & 1
_HADAMARD = hadamard(DIM) / np.sqrt(DIM)


@dataclass(frozen=True)
class StatevectorOracle:
    amplitudes: np.ndarray

    @property
    def num_qubits(self) -> int:
        return NUM_QUBITS

    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)


def statevector_build(phi, theta, model: ModelSpec | str = "three_plaquette") -> StatevectorOracle:
    """Code state carrying ``phi``, followed by exp(-i theta_q Z_q) on each qubit."""
    if isinstance(model, str):
        model = build_model(model)
    if not model.components:
        raise ModelError(f"{model.name} has no multi-qubit statevector")
    phi = np.asarray(phi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if phi.shape != (model.num_phases,) or theta.shape != (NUM_QUBITS,):
        raise ModelError("phase/angle vector length mismatch")
    psi = np.zeros(DIM, dtype=complex)
    amp = 1.0 / np.sqrt(len(model.components))
    for k, bits in model.components:
        psi[bits] = amp * np.exp(1j * (phi[k - 1] if k else 0.0))
    # Z eigenvalue is +1 for |0>, -1 for |1>
    z = 1 - 2 * _BIT_TABLE
    psi = psi * np.exp(-1j * (z @ theta))
    return StatevectorOracle(psi)


def pauli_x_expectation(state: StatevectorOracle, mask: int) -> float:
    psi = state.amplitudes
    flipped = psi[np.arange(DIM) ^ mask]
    return float(np.vdot(flipped, psi).real)


def statevector_expectations(state: StatevectorOracle, model: ModelSpec) -> np.ndarray:
    return np.array([pauli_x_expectation(state, c.mask) for c in model.combos])


def x_basis_probabilities(state: StatevectorOracle) -> np.ndarray:
    """Outcome distribution after a Hadamard on every qubit."""
    p = np.abs(_HADAMARD @ state.amplitudes) ** 2
    return p / p.sum()


def parity(outcome_index: int, mask: int) -> int:
    """+1/-1 eigenvalue of the X string on ``mask`` for an X-basis outcome."""
    return -1 if bin(outcome_index & mask).count("1") % 2 else 1
