"""Integration of the diffusion between events and the event displacement.

Two schemes: Euler-Maruyama substepping with a fixed step (the last partial
substep lands exactly on the requested interval), and the exact Gaussian
transition for linear drift with constant noise.  With a zero diffusion
coefficient no noise draws are consumed, so the integrator is a
deterministic ODE step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .model import CoefficientSpec, ConstantDiffusion, LinearDrift
from .rng import RandomStream

__all__ = [
    "EulerMaruyama",
    "ExactOU",
    "IntegratorConfig",
    "advance_diffusion",
    "advance_diffusion_many",
    "apply_state_jump",
]

_REL_EPS = 1e-12


@dataclass(frozen=True)
class EulerMaruyama:
    """Fixed-step scheme x <- x + b(x)*h + sigma(x)*sqrt(h)*xi."""

    step: float

    kind = "euler_maruyama"

    def __post_init__(self):
        if not (self.step > 0 and math.isfinite(self.step)):
            raise ValueError("step must be a finite positive number")


@dataclass(frozen=True)
class ExactOU:
    """Exact Gaussian transition; admissible only for linear drift with constant sigma."""

    kind = "exact_ou"


Scheme = Union[EulerMaruyama, ExactOU]


@dataclass(frozen=True)
class IntegratorConfig:
    scheme: Scheme
    grid_dt: float

    def __post_init__(self):
        if not (self.grid_dt > 0 and math.isfinite(self.grid_dt)):
            raise ValueError("grid_dt must be a finite positive number")

    def validate_for(self, coeffs: CoefficientSpec) -> None:
        if isinstance(self.scheme, ExactOU):
            if not isinstance(coeffs.drift, LinearDrift):
                raise ValueError("exact transition requires a linear drift")
            if not isinstance(coeffs.diffusion, ConstantDiffusion):
                raise ValueError("exact transition requires a constant diffusion coefficient")


def _ou_moments(x, dt: float, drift: LinearDrift, sigma: float):
    beta, b0 = drift.rate, drift.intercept
    if beta == 0.0:
        return x + b0 * dt, sigma * sigma * dt
    decay = math.exp(-beta * dt)
    mean_level = b0 / beta
    mean = mean_level + (x - mean_level) * decay
    var = sigma * sigma * (1.0 - decay * decay) / (2.0 * beta)
    return mean, var


def advance_diffusion(x: float, dt: float, coeffs: CoefficientSpec,
                      cfg: IntegratorConfig, rng: RandomStream) -> float:
    """Advance the diffusion from x over an interval of length dt > 0."""
    if not dt > 0:
        raise ValueError("dt must be > 0")
    scheme = cfg.scheme
    if isinstance(scheme, ExactOU):
        cfg.validate_for(coeffs)
        sigma = coeffs.diffusion.value
        mean, var = _ou_moments(x, dt, coeffs.drift, sigma)
        if sigma == 0.0:
            return mean
        return mean + math.sqrt(var) * rng.normal()

    h = scheme.step
    drift, diffusion = coeffs.drift, coeffs.diffusion
    noiseless = isinstance(diffusion, ConstantDiffusion) and diffusion.value == 0.0
    n_full = int(dt / h + _REL_EPS)
    rem = dt - n_full * h
    if rem < _REL_EPS * max(h, dt):
        rem = 0.0
    for _ in range(n_full):
        b = float(drift(x))
        if noiseless:
            x = x + b * h
        else:
            x = x + b * h + float(diffusion(x)) * math.sqrt(h) * rng.normal()
    if rem > 0.0:
        b = float(drift(x))
        if noiseless:
            x = x + b * rem
        else:
            x = x + b * rem + float(diffusion(x)) * math.sqrt(rem) * rng.normal()
    return x


def advance_diffusion_many(xs: np.ndarray, dt: float, coeffs: CoefficientSpec,
                           cfg: IntegratorConfig, rng: RandomStream) -> np.ndarray:
    """Vectorised advance of many independent positions over the same dt.

    Uses one normal draw per position per substep, in position-major order;
    the marginal law of each output matches :func:`advance_diffusion`.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    xs = np.array(xs, dtype=float, copy=True)
    n = len(xs)
    scheme = cfg.scheme
    if isinstance(scheme, ExactOU):
        cfg.validate_for(coeffs)
        sigma = coeffs.diffusion.value
        mean, var = _ou_moments(xs, dt, coeffs.drift, sigma)
        if sigma == 0.0:
            return np.asarray(mean)
        return mean + math.sqrt(var) * rng.normals(n)

    h = scheme.step
    diffusion = coeffs.diffusion
    noiseless = isinstance(diffusion, ConstantDiffusion) and diffusion.value == 0.0
    n_full = int(dt / h + _REL_EPS)
    rem = dt - n_full * h
    if rem < _REL_EPS * max(h, dt):
        rem = 0.0
    steps = [h] * n_full + ([rem] if rem > 0.0 else [])
    for s in steps:
        b = coeffs.drift(xs)
        if noiseless:
            xs = xs + b * s
        else:
            xs = xs + b * s + diffusion(xs) * math.sqrt(s) * rng.normals(n)
    return xs


def apply_state_jump(x: float, coeffs: CoefficientSpec) -> float:
    """Post-event position x + a(x)."""
    return x + float(coeffs.jump(x))
