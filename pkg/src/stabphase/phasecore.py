"""
Circular arithmetic and grid posteriors over phases.

Phases live on [-pi, pi). Posteriors are stored as densities sampled at the
midpoints of a uniform periodic grid, so every integral below is a midpoint
sum, which is spectrally accurate for smooth periodic integrands.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

TWO_PI = 2.0 * np.pi

#: resultant length below which the circular mean is undefined
DIFFUSE_RESULTANT = 1e-12
#: total posterior mass below which an update is considered contradictory
DEGENERATE_MASS = 1e-300


class DegeneratePosteriorError(ArithmeticError):
    """Raised when a Bayes update leaves (numerically) zero probability mass."""


def wrap(angle):
    """Reduce an angle (or array of angles) to [-pi, pi).

    Raises ValueError on NaN or infinite input.
    """
    a = np.asarray(angle, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"cannot wrap non-finite angle {angle!r}")
    w = np.mod(a + np.pi, TWO_PI) - np.pi
    # np.mod can round up to exactly 2*pi for tiny negative inputs
    w = np.where(w >= np.pi, w - TWO_PI, w)
    if w.ndim == 0:
        return float(w)
    return w


def circ_diff(a, b):
    """Signed shortest angular distance a - b, in [-pi, pi)."""
    return wrap(np.subtract(a, b))


@dataclass(frozen=True)
class CircularMoments:
    mean: float
    variance: float
    diffuse: bool = False


@dataclass(frozen=True)
class PosteriorGrid1D:
    """Probability density over a phase, sampled at B bin midpoints."""

    density: np.ndarray

    @property
    def bins(self) -> int:
        return self.density.shape[0]

    @property
    def spacing(self) -> float:
        return TWO_PI / self.bins

    @property
    def points(self) -> np.ndarray:
        return grid_points(self.bins)

    def mass(self) -> float:
        return float(self.density.sum() * self.spacing)

    def weights(self) -> np.ndarray:
        """Probability of each bin (sums to one)."""
        return self.density * self.spacing


@dataclass(frozen=True)
class PosteriorGrid2D:
    """Joint density over a phase (periodic) and an offset h in [-1, 1].

    ``density`` has shape (bins_phase, bins_offset).
    """

    density: np.ndarray
    _mesh: tuple = field(default=None, repr=False, compare=False)

    @property
    def bins_phase(self) -> int:
        return self.density.shape[0]

    @property
    def bins_offset(self) -> int:
        return self.density.shape[1]

    @property
    def phase_points(self) -> np.ndarray:
        return grid_points(self.bins_phase)

    @property
    def offset_points(self) -> np.ndarray:
        dh = 2.0 / self.bins_offset
        return -1.0 + (np.arange(self.bins_offset) + 0.5) * dh

    @property
    def cell_area(self) -> float:
        return (TWO_PI / self.bins_phase) * (2.0 / self.bins_offset)

    @property
    def points(self):
        if self._mesh is None:
            mesh = np.meshgrid(self.phase_points, self.offset_points, indexing="ij")
            object.__setattr__(self, "_mesh", tuple(mesh))
        return self._mesh

    def mass(self) -> float:
        return float(self.density.sum() * self.cell_area)

    def phase_marginal(self) -> PosteriorGrid1D:
        return PosteriorGrid1D(self.density.sum(axis=1) * (2.0 / self.bins_offset))

    def offset_marginal(self) -> np.ndarray:
        """Density over h at ``offset_points``."""
        return self.density.sum(axis=0) * (TWO_PI / self.bins_phase)


Grid = Union[PosteriorGrid1D, PosteriorGrid2D]


def grid_points(bins: int) -> np.ndarray:
    return -np.pi + (np.arange(bins) + 0.5) * (TWO_PI / bins)


def uniform_prior(bins: int = 2048) -> PosteriorGrid1D:
    if int(bins) != bins or bins < 8:
        raise ValueError(f"need at least 8 bins, got {bins}")
    return PosteriorGrid1D(np.full(int(bins), 1.0 / TWO_PI))


def uniform_prior_2d(bins_phase: int = 512, bins_offset: int = 256) -> PosteriorGrid2D:
    if bins_phase < 8 or bins_offset < 2:
        raise ValueError("need bins_phase >= 8 and bins_offset >= 2")
    return PosteriorGrid2D(np.full((bins_phase, bins_offset), 1.0 / (TWO_PI * 2.0)))


def bayes_update(grid: Grid, likelihood: Union[Callable, np.ndarray]) -> Grid:
    """Multiply the density by a likelihood and renormalize.

    ``likelihood`` is either an array of values at the grid points or a
    callable evaluated there (one argument for 1-D grids, ``(phi, h)`` for
    2-D grids).
    """
    if callable(likelihood):
        if isinstance(grid, PosteriorGrid2D):
            values = likelihood(*grid.points)
        else:
            values = likelihood(grid.points)
    else:
        values = likelihood
    values = np.broadcast_to(np.asarray(values, dtype=float), grid.density.shape)
    if np.any(values < 0.0) or np.any(values > 1.0):
        raise ValueError("likelihood values must lie in [0, 1]")

    unnorm = grid.density * values
    if isinstance(grid, PosteriorGrid2D):
        mass = unnorm.sum() * grid.cell_area
    else:
        mass = unnorm.sum() * grid.spacing
    if not mass >= DEGENERATE_MASS:
        raise DegeneratePosteriorError(f"posterior mass {mass:.3g} after update")
    return type(grid)(unnorm / mass)


def moments(grid: PosteriorGrid1D) -> CircularMoments:
    """Circular mean and second moment about it.

    When the resultant length vanishes (e.g. an exactly uniform grid) the mean
    is set to 0 and the result is flagged diffuse.
    """
    w = grid.weights()
    phi = grid.points
    c = float(np.dot(w, np.cos(phi)))
    s = float(np.dot(w, np.sin(phi)))
    if np.hypot(c, s) < DIFFUSE_RESULTANT:
        mean, diffuse = 0.0, True
    else:
        mean, diffuse = wrap(np.arctan2(s, c)), False
    d = circ_diff(phi, mean)
    return CircularMoments(mean, float(np.dot(w, d * d)), diffuse)


def gaussian_grid(mean: float, sigma2: float, bins: int = 2048) -> PosteriorGrid1D:
    """Wrapped normal density on the grid (images summed to +-3 turns)."""
    phi = grid_points(bins)
    d = circ_diff(phi, mean)
    dens = np.zeros(bins)
    for k in range(-3, 4):
        dens += np.exp(-((d + k * TWO_PI) ** 2) / (2.0 * sigma2))
    dens /= dens.sum() * (TWO_PI / bins)
    return PosteriorGrid1D(dens)


def bayes_update_log(grid: Grid, log_likelihood: np.ndarray) -> Grid:
    """Bayes update by a likelihood given in log form.

    Used when many repeated outcomes are folded into one update, e.g.
    sum_m count_m * log L_m, which would underflow as a direct product.
    """
    logl = np.broadcast_to(np.asarray(log_likelihood, dtype=float), grid.density.shape)
    with np.errstate(divide="ignore"):
        logd = np.log(grid.density)
    total = logd + logl
    peak = np.max(total)
    if not np.isfinite(peak):
        raise DegeneratePosteriorError("posterior has no support after update")
    unnorm = np.exp(total - peak)
    area = grid.cell_area if isinstance(grid, PosteriorGrid2D) else grid.spacing
    return type(grid)(unnorm / (unnorm.sum() * area))
