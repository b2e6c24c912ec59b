from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RamseyConfig:
    scan_points: int = 10
    shots_per_point: int = 50

    def __post_init__(self):
        if self.scan_points < 4:
            raise ConfigError("scan_points must be >= 4")
        if self.shots_per_point < 1:
            raise ConfigError("shots_per_point must be >= 1")

    @property
    def budget(self) -> int:
        return self.scan_points * self.shots_per_point


@dataclass(frozen=True)
class PhomConfig:
    iterations: int = 1
    scan_points: int = 10
    shots_per_point: int = 1
    initial_angles: Optional[Sequence[float]] = None
    variant: str = "plain"

    def __post_init__(self):
        if self.variant not in ("plain", "constant_cosine"):
            raise ConfigError(f"unknown PHOM variant {self.variant!r}")
        if self.variant == "constant_cosine" and self.iterations != 1:
            object.__setattr__(self, "iterations", 1)
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.scan_points < 3:
            raise ConfigError("scan_points must be >= 3")
        if self.shots_per_point < 1:
            raise ConfigError("shots_per_point must be >= 1")

    @classmethod
    def from_budget(cls, budget: int, num_combos: int, **kw) -> "PhomConfig":
        """Largest whole number of shots per scan point that fits in ``budget``."""
        probe = cls(**kw)
        per_shot = num_combos * probe.scan_points * probe.iterations
        shots = budget // per_shot
        if shots < 1:
            raise ConfigError(f"budget {budget} below one shot per point ({per_shot})")
        return cls(shots_per_point=shots, **kw)


@dataclass(frozen=True)
class BayesConfig:
    budget: int = 500
    grid_bins: int = 2048
    selection: str = "adaptive"
    warmup: int = 20
    independent_sampling: bool = False

    def __post_init__(self):
        if self.selection not in ("adaptive", "random"):
            raise ConfigError(f"unknown selection {self.selection!r}")
        if not self.budget >= self.warmup >= 0:
            raise ConfigError("need budget >= warmup >= 0")
        if self.grid_bins < 8:
            raise ConfigError("grid_bins must be >= 8")


@dataclass(frozen=True)
class DirectBayesConfig:
    """Constant-cosine Bayes on a joint (phase, offset) grid.

    ``selection='scan'`` measures at ``scan_points`` equally spaced theta~
    values with equal shots; ``'adaptive'`` picks phi_bar +- pi/2 from the
    phase marginal after every preparation.
    """

    budget: int = 600
    bins_phase: int = 512
    bins_offset: int = 256
    selection: str = "scan"
    scan_points: int = 10

    def __post_init__(self):
        if self.selection not in ("scan", "adaptive"):
            raise ConfigError(f"unknown selection {self.selection!r}")
        if self.bins_phase < 8 or self.bins_offset < 2:
            raise ConfigError("grid too small")
        if self.scan_points < 3:
            raise ConfigError("scan_points must be >= 3")


@dataclass
class EstimateResult:
    phases_est: np.ndarray
    variances: np.ndarray
    preparations_used: int
    history: Optional[list] = None
    flags: dict = field(default_factory=dict)
    # (n, means, variances) snapshots for sequential estimators
    trajectory: Optional[list] = None

    @property
    def diffuse(self) -> bool:
        return bool(self.flags.get("diffuse", False))


def harmonic_design(x, freq: float = 1.0, constant: bool = True) -> np.ndarray:
    cols = [np.cos(freq * x), np.sin(freq * x)]
    if constant:
        cols.insert(0, np.ones_like(x))
    return np.stack(cols, axis=-1)


def fit_harmonic(x, y, freq: float = 1.0, constant: bool = True):
    """Least squares y ~ [c0 +] a cos(freq x) + b sin(freq x).

    Returns ``(coef, cov)``; ``cov`` is the residual-scaled covariance, or
    None when there are no spare degrees of freedom.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    X = harmonic_design(x, freq, constant)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    dof = len(x) - X.shape[1]
    cov = None
    if dof > 0:
        resid = y - X @ coef
        s2 = float(resid @ resid) / dof
        cov = s2 * np.linalg.inv(X.T @ X)
    return coef, cov


def phase_from_harmonic(a: float, b: float, cov_ab=None):
    """Argmax phase atan2(b, a) and its delta-method variance."""
    r2 = a * a + b * b
    phase = float(np.arctan2(b, a))
    if cov_ab is None or r2 == 0.0:
        return phase, float("nan")
    var = (a * a * cov_ab[1, 1] + b * b * cov_ab[0, 0] - 2 * a * b * cov_ab[0, 1]) / (r2 * r2)
    return phase, float(var)
