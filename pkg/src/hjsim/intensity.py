"""Memory flow, event updates and intensity evaluation for the y component.

Between events every entry decays exponentially at its own rate; an event
of component j adds column j of the amplitude matrix.  The intensity of
component i is f_i applied to the i-th row sum of y.
"""

from __future__ import annotations

import numpy as np

from .model import KernelMatrix, ModelSpec

__all__ = [
    "flow_memory",
    "apply_event",
    "intensity_vector",
    "total_event_rate",
    "dominating_rate",
]


def flow_memory(kernel: KernelMatrix, y: np.ndarray, dt: float) -> np.ndarray:
    """Deterministic decay of y over dt >= 0: entry (i, j) is scaled by exp(-alpha[i,j]*dt)."""
    if dt < 0:
        raise ValueError("dt must be >= 0")
    return np.asarray(y, dtype=float) * np.exp(-kernel.alpha * dt)


def apply_event(kernel: KernelMatrix, y: np.ndarray, component: int) -> np.ndarray:
    """State update at an event of ``component`` (1-based): column gains c[:, component-1]."""
    m = kernel.n_components
    if not 1 <= component <= m:
        raise IndexError(f"component must be in 1..{m}, got {component}")
    out = np.array(y, dtype=float, copy=True)
    out[:, component - 1] += kernel.c[:, component - 1]
    return out


def intensity_vector(model: ModelSpec, y: np.ndarray) -> np.ndarray:
    """Per-component rates f_i(sum_j y[i, j]); strictly positive by construction."""
    y = np.asarray(y, dtype=float)
    m = model.n_components
    if y.shape != (m, m):
        raise ValueError(f"y must have shape ({m}, {m})")
    row_sums = y.sum(axis=1)
    return np.array([float(f(row_sums[i])) for i, f in enumerate(model.rates)])


def total_event_rate(model: ModelSpec, y: np.ndarray) -> float:
    """Summed intensity of all components at state y."""
    return float(intensity_vector(model, y).sum())


def dominating_rate(model: ModelSpec, y: np.ndarray, refined: bool = False) -> float:
    """Upper bound on the total rate along the whole decay flow started at y.

    Default is the Lipschitz envelope sum_i [f_i(0) + gamma_i * sum_j |y[i,j]|],
    which dominates total_event_rate(flow_memory(y, t)) for every t >= 0
    because row absolute sums only shrink under the flow.  With
    ``refined=True`` (valid only when every rate function is nondecreasing)
    the tighter bound sum_i f_i(sum_j max(y[i,j], 0)) is returned, exact for
    purely excitatory models with nonnegative memory.
    """
    y = np.asarray(y, dtype=float)
    if refined:
        if not all(f.is_nondecreasing() for f in model.rates):
            raise ValueError("refined bound requires nondecreasing rate functions")
        pos_rows = np.maximum(y, 0.0).sum(axis=1)
        return float(sum(float(f(pos_rows[i])) for i, f in enumerate(model.rates)))
    gammas = model.lipschitz_constants()
    return float(model.rates_at_zero().sum() + gammas @ np.abs(y).sum(axis=1))
