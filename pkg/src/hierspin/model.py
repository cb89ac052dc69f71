"""Model definition: hierarchical site set, parameters, state and flip rates.

Sites live on {1..N}^k, flattened to integers 0..N^k-1 so that the level-d
block containing site s is simply s // N^d.  A spin at site s flips with rate

    1 + tanh( -spin * sum_d beta_d * (x_d + m_d) ),

where (x_d, m_d) are the field and magnetization averages of the level-d
block containing s.  At zero temperature the tanh is replaced by the sign of
the unweighted pair sum, with sign(0) := 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class UnsupportedConfigurationError(ValueError):
    """Raised for parameter combinations outside the supported model family."""


@dataclass(frozen=True)
class HierarchyShape:
    """Uniform k-level hierarchy with branching factor N (N^k sites total)."""

    levels: int
    block_size: int

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")

    @property
    def n_sites(self) -> int:
        return self.block_size ** self.levels

    def n_blocks(self, level: int) -> int:
        """Number of level-d blocks, d in 1..levels (level k is the top)."""
        self._check_level(level)
        return self.block_size ** (self.levels - level)

    def block_of(self, site: int, level: int) -> int:
        """Index of the level-d block containing a flat site index."""
        self._check_level(level)
        if not 0 <= site < self.n_sites:
            raise IndexError(f"site {site} out of range for {self.n_sites} sites")
        return site // (self.block_size ** level)

    def site_tuple(self, site: int) -> tuple:
        """Flat index -> (i_1, ..., i_k) with components in 1..N."""
        if not 0 <= site < self.n_sites:
            raise IndexError(f"site {site} out of range for {self.n_sites} sites")
        digits = []
        for _ in range(self.levels):
            digits.append(site % self.block_size + 1)
            site //= self.block_size
        return tuple(digits)

    def _check_level(self, level: int):
        if not 1 <= level <= self.levels:
            raise ValueError(f"level must be in 1..{self.levels}, got {level}")


@dataclass(frozen=True)
class ModelParams:
    """All couplings and initial-law parameters of the coupled system.

    beta[d-1] is the spin coupling at hierarchical distance d, alpha[d-1]
    the field coupling.  zero_temperature=True replaces every beta with
    +infinity (the tanh rate degenerates to a sign rule) and excludes a
    finite beta vector.
    """

    shape: HierarchyShape
    beta: tuple = ()
    alpha: tuple = ()
    sigma: float = 1.0
    zero_temperature: bool = False
    spin_up_prob: float = 0.5
    field_init_mean: float = 0.0
    field_init_std: float = 1.0

    def __post_init__(self):
        k = self.shape.levels
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        if self.zero_temperature:
            if self.beta:
                raise UnsupportedConfigurationError(
                    "zero_temperature excludes finite beta values")
        else:
            if len(self.beta) != k:
                raise ValueError(f"beta must have {k} entries, got {len(self.beta)}")
            if any(b < 0 for b in self.beta):
                raise ValueError("beta entries must be nonnegative")
        if len(self.alpha) != k:
            raise ValueError(f"alpha must have {k} entries, got {len(self.alpha)}")
        if any(a < 0 for a in self.alpha):
            raise ValueError("alpha entries must be nonnegative")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if not 0.0 <= self.spin_up_prob <= 1.0:
            raise ValueError("spin_up_prob must be in [0, 1]")
        if self.field_init_std < 0:
            raise ValueError("field_init_std must be nonnegative")

    @property
    def is_subcritical(self) -> bool:
        """True iff beta_1 + ... + beta_k < 1 (finite-temperature only)."""
        return (not self.zero_temperature) and sum(self.beta) < 1.0


@dataclass
class SystemState:
    """Configuration of the finite system: +-1 spins and real fields per site."""

    time: float
    spins: np.ndarray
    fields: np.ndarray

    def __post_init__(self):
        self.spins = np.asarray(self.spins, dtype=np.int8)
        self.fields = np.asarray(self.fields, dtype=np.float64)
        if self.spins.shape != self.fields.shape or self.spins.ndim != 1:
            raise ValueError("spins and fields must be 1-d arrays of equal length")
        if not np.all(np.abs(self.spins) == 1):
            raise ValueError("spins must be +-1")
        if self.time < 0:
            raise ValueError("time must be nonnegative")

    def validate_shape(self, shape: HierarchyShape):
        if len(self.spins) != shape.n_sites:
            raise ValueError(
                f"state has {len(self.spins)} sites, shape wants {shape.n_sites}")


@dataclass
class BlockObservables:
    """Per-level block magnetizations and field averages.

    magnetization[d-1] and field_avg[d-1] are arrays over the N^(k-d)
    level-d blocks; the top level is a length-1 array holding (M, X).
    """

    shape: HierarchyShape
    magnetization: list = field(default_factory=list)
    field_avg: list = field(default_factory=list)

    def level(self, d: int):
        """(m, x) arrays for hierarchical level d in 1..k."""
        self.shape._check_level(d)
        return self.magnetization[d - 1], self.field_avg[d - 1]

    @property
    def top(self):
        """(M, X): magnetization and field average over the whole system."""
        return float(self.magnetization[-1][0]), float(self.field_avg[-1][0])


def block_observables(state: SystemState, shape: HierarchyShape) -> BlockObservables:
    """Aggregate spins and fields into block averages at every level."""
    state.validate_shape(shape)
    N = shape.block_size
    mags, favgs = [], []
    m = state.spins.astype(np.float64)
    x = state.fields
    for _ in range(shape.levels):
        m = m.reshape(-1, N).mean(axis=1)
        x = x.reshape(-1, N).mean(axis=1)
        mags.append(m)
        favgs.append(x)
    return BlockObservables(shape=shape, magnetization=mags, field_avg=favgs)


def local_flip_argument(state: SystemState, params: ModelParams, site: int,
                        obs: BlockObservables | None = None) -> float:
    """Weighted field argument sum_d beta_d (x_d + m_d) at a site.

    At zero temperature the beta weights drop and the unweighted pair sum
    sum_d (x_d + m_d) is returned; the sign of that sum drives the rate.
    Block observables are recomputed unless a consistent cache is passed.
    """
    if obs is None:
        obs = block_observables(state, params.shape)
    shape = params.shape
    z = 0.0
    for d in range(1, shape.levels + 1):
        b = shape.block_of(site, d)
        m_d, x_d = obs.magnetization[d - 1][b], obs.field_avg[d - 1][b]
        w = 1.0 if params.zero_temperature else params.beta[d - 1]
        z += w * (x_d + m_d)
    return z


def flip_rate(spin, field_arg, params: ModelParams):
    """Spin-flip rate 1 + tanh(-spin * field_arg), bounded in [0, 2].

    Zero temperature: 1 + sign(-spin * field_arg) with sign(0) := 0, so the
    rate is 0 for an aligned spin, 2 for an anti-aligned one and 1 at a tie.
    Accepts scalars or broadcastable arrays.
    """
    a = -np.asarray(spin, dtype=np.float64) * np.asarray(field_arg, dtype=np.float64)
    if params.zero_temperature:
        out = 1.0 + np.sign(a)
    else:
        out = 1.0 + np.tanh(a)
    if out.ndim == 0:
        return float(out)
    return out
