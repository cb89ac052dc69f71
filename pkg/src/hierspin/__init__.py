"""hierspin: hierarchical mean-field spins driven by Ornstein-Uhlenbeck fields.

Exact event-driven simulation of the finite-N system at the order-1, order-N
and order-N^2 timescales, the associated limit objects (invariant curve,
deterministic ODEs, one-dimensional limit SDEs with deterministic jumps,
quadrature fixed-point laws, renormalization recursion, zero-temperature
staircase geometry), and a Monte Carlo harness tying the two together.
"""

from . import harness, limits, model, sim, zerotemp
from .model import (BlockObservables, HierarchyShape, ModelParams, SystemState,
                    block_observables, flip_rate, local_flip_argument)
from .quadrature import GaussianMeasure
from .rng import SeedSpec
from .sim import (ObservablePath, TimescaleSpec, sample_initial_state,
                  simulate_batch, simulate_diffusions_exact, simulate_system,
                  uniform_grid)

__version__ = "0.1.0"

__all__ = [
    "BlockObservables", "HierarchyShape", "ModelParams", "SystemState",
    "block_observables", "flip_rate", "local_flip_argument",
    "GaussianMeasure", "SeedSpec",
    "ObservablePath", "TimescaleSpec", "sample_initial_state",
    "simulate_batch", "simulate_diffusions_exact", "simulate_system",
    "uniform_grid",
    "harness", "limits", "model", "sim", "zerotemp",
]
