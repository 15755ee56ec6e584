"""Exact event-driven simulation of the coupled process z = (x, y).

The default engine is acceptance-rejection thinning with a local dominating
rate: candidates arrive at the Lipschitz-envelope rate B(y) of the current
memory state, which dominates the total intensity along the whole decay
flow until the next event (row absolute sums only shrink between events).
A candidate at time tau is attributed to component i with probability
lambda_i(y(tau-))/B using a single uniform that partitions [0, 1] into
M + 1 ordered intervals, the last being the rejection mass; after a
rejection the bound is recomputed at the flowed state, so it tightens as
the memory decays.

``simulate_path_reference`` keeps the alternative textbook construction as
a cross-validation oracle: a one-dimensional dominating counting process
whose rate starts at the envelope of the initial state and gains a fixed
increment M * gamma_bar * c_bar at every dominating event (with no decay),
each dominating event then being thinned by the true intensities.  Both
engines produce the same law; the reference construction is exponentially
wasteful in time and is only practical over short horizons.

The memory matrix y is never discretised: its flow is applied in closed
form at candidate and sample times.  Only the diffusion needs a scheme.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .diffusion import IntegratorConfig, advance_diffusion, apply_state_jump
from .model import ModelSpec, State, model_digest
from .rng import RandomStream, derive_path_seed

__all__ = [
    "SimulationLimitError",
    "CandidateEvent",
    "Path",
    "next_event",
    "simulate_path",
    "simulate_path_reference",
    "simulate_ensemble",
    "reference_rate_step",
    "DEFAULT_MAX_EVENTS",
]

DEFAULT_MAX_EVENTS = 10_000_000


class SimulationLimitError(RuntimeError):
    """Event-count circuit breaker tripped; the model is likely supercritical
    (interaction spectral radius >= 1) or the horizon is too long."""


@dataclass(frozen=True)
class CandidateEvent:
    """One thinning candidate: ``accepted_component`` is 1..M, or 0 if rejected."""

    time: float
    accepted_component: int


@dataclass(frozen=True, eq=False)
class Path:
    """One realised trajectory.

    Events carry 1-based component labels and strictly increasing times in
    (0, horizon].  The skeleton records (time, x, row sums of y) at time 0,
    at every global multiple of the output grid step, at the horizon, and
    twice at every event time (the values immediately before and after the
    jump), so skeleton times are nondecreasing with equal times exactly at
    jumps.
    """

    event_times: np.ndarray
    event_components: np.ndarray
    skeleton_times: np.ndarray
    skeleton_x: np.ndarray
    skeleton_row_sums: np.ndarray
    horizon: float
    seed: int
    model_hash: str

    def __post_init__(self):
        for name in ("event_times", "skeleton_times", "skeleton_x"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        comp = np.asarray(self.event_components, dtype=np.int32)
        comp.setflags(write=False)
        object.__setattr__(self, "event_components", comp)
        rs = np.asarray(self.skeleton_row_sums, dtype=float)
        rs.setflags(write=False)
        object.__setattr__(self, "skeleton_row_sums", rs)
        if len(self.event_times) and not np.all(np.diff(self.event_times) > 0):
            raise ValueError("event times must be strictly increasing")
        if np.any(np.diff(self.skeleton_times) < 0):
            raise ValueError("skeleton times must be nondecreasing")

    @property
    def n_events(self) -> int:
        return len(self.event_times)

    @property
    def n_components(self) -> int:
        return self.skeleton_row_sums.shape[1]

    @property
    def events(self) -> list[tuple[float, int]]:
        return [(float(t), int(c)) for t, c in zip(self.event_times, self.event_components)]

    @property
    def skeleton(self) -> list[tuple[float, float, np.ndarray]]:
        return [(float(t), float(x), self.skeleton_row_sums[i])
                for i, (t, x) in enumerate(zip(self.skeleton_times, self.skeleton_x))]


class _ModelRuntime:
    """Pre-extracted arrays and callables for the hot simulation loop."""

    __slots__ = ("alpha", "c", "rates", "f_zero_sum", "gammas", "refined", "m")

    def __init__(self, model: ModelSpec, refined: bool = False):
        self.alpha = model.kernel.alpha
        self.c = model.kernel.c
        self.rates = model.rates
        self.gammas = model.lipschitz_constants()
        self.f_zero_sum = float(model.rates_at_zero().sum())
        self.m = model.n_components
        if refined and not all(f.is_nondecreasing() for f in model.rates):
            raise ValueError("refined bound requires nondecreasing rate functions")
        self.refined = refined

    def bound(self, y: np.ndarray) -> float:
        if self.refined:
            pos = np.maximum(y, 0.0).sum(axis=1)
            return float(sum(float(f(pos[i])) for i, f in enumerate(self.rates)))
        return self.f_zero_sum + float(self.gammas @ np.abs(y).sum(axis=1))

    def intensities(self, y: np.ndarray) -> np.ndarray:
        rs = y.sum(axis=1)
        return np.array([float(f(rs[i])) for i, f in enumerate(self.rates)])


def _pick_component(lam: np.ndarray, u_scaled: float) -> int:
    """1-based component for a scaled uniform below sum(lam); 0 if rejected.

    The uniform partitions [0, bound] into M + 1 ordered intervals, interval
    i having length lam[i-1], the remainder being the rejection mass.
    """
    cum = np.cumsum(lam)
    if u_scaled >= cum[-1]:
        return 0
    return int(np.searchsorted(cum, u_scaled, side="right")) + 1


def _next_event(rt: _ModelRuntime, y: np.ndarray, clock: float, horizon: float,
                rng: RandomStream, trace: Optional[list] = None):
    """First accepted event strictly after ``clock``; y is the state at ``clock``.

    Returns (tau, component, y_at_tau_pre_jump) or (horizon, None, None) when
    no event occurs before the horizon.  Does not mutate ``y``.
    """
    t = clock
    y_cur = y
    bound = rt.bound(y_cur)
    while True:
        if not (bound > 0.0 and math.isfinite(bound)):
            raise RuntimeError(f"dominating rate must be finite and positive, got {bound}")
        tau = t + rng.exponential(bound)
        if tau > horizon:
            return horizon, None, None
        y_cur = y_cur * np.exp(-rt.alpha * (tau - t))
        lam = rt.intensities(y_cur)
        total = float(lam.sum())
        if total > bound * (1.0 + 1e-9):
            raise RuntimeError("dominating rate violated; rate functions inconsistent")
        comp = _pick_component(lam, rng.uniform() * bound)
        if trace is not None:
            trace.append(CandidateEvent(tau, comp))
        if comp:
            return tau, comp, y_cur
        bound = rt.bound(y_cur)
        t = tau


def next_event(model: ModelSpec, state: State, clock: float, horizon: float,
               rng: RandomStream, refined_bound: bool = False,
               trace: Optional[list] = None) -> Optional[tuple[float, int]]:
    """Time and 1-based component of the first event after ``clock``, or None
    if no event occurs before ``horizon``."""
    rt = _ModelRuntime(model, refined_bound)
    tau, comp, _ = _next_event(rt, np.asarray(state.y, dtype=float), clock, horizon, rng, trace)
    return None if comp is None else (tau, comp)


def _build_sample_times(horizon: float, grid_dt: float, extra) -> np.ndarray:
    eps = 1e-12 * max(1.0, horizon)
    k_max = int(horizon / grid_dt + eps)
    times = [k * grid_dt for k in range(1, k_max + 1) if k * grid_dt <= horizon + eps]
    if extra is not None:
        times.extend(float(t) for t in extra if 0.0 < float(t) <= horizon + eps)
    times.append(horizon)
    times = sorted(min(t, horizon) for t in times)
    out = [times[0]]
    for t in times[1:]:
        if t - out[-1] > eps:
            out.append(t)
    return np.array(out)


class _PathBuilder:
    """Shared skeleton/diffusion bookkeeping for both simulation engines.

    y is kept anchored at the last event time and flowed in closed form to
    sample times; x is advanced lazily so rejected candidates never touch
    the diffusion."""

    def __init__(self, model: ModelSpec, cfg: IntegratorConfig, rng: RandomStream,
                 horizon: float, sample_times: np.ndarray):
        self.coeffs = model.coefficients
        self.alpha = model.kernel.alpha
        self.c = model.kernel.c
        self.cfg = cfg
        self.rng = rng
        self.horizon = horizon
        self.samples = sample_times
        self.si = 0
        self.eps = 1e-12 * max(1.0, horizon)
        self.x = model.initial.x
        self.y = np.array(model.initial.y, dtype=float)
        self.t_anchor = 0.0
        self.t_x = 0.0
        self.ev_t: list[float] = []
        self.ev_c: list[int] = []
        self.sk_t: list[float] = [0.0]
        self.sk_x: list[float] = [self.x]
        self.sk_rs: list[np.ndarray] = [self.y.sum(axis=1)]

    def _row_sums_at(self, t: float) -> np.ndarray:
        dt = t - self.t_anchor
        if dt <= 0.0:
            return self.y.sum(axis=1)
        return (self.y * np.exp(-self.alpha * dt)).sum(axis=1)

    def _advance_x(self, t: float) -> None:
        dt = t - self.t_x
        if dt > 0.0:
            self.x = advance_diffusion(self.x, dt, self.coeffs, self.cfg, self.rng)
        self.t_x = t

    def _record(self, t: float, row_sums: np.ndarray) -> None:
        self.sk_t.append(t)
        self.sk_x.append(self.x)
        self.sk_rs.append(row_sums)

    def _advance_through_samples(self, t_stop: float, skip_at_stop: bool) -> None:
        while self.si < len(self.samples) and self.samples[self.si] < t_stop - self.eps:
            g = float(self.samples[self.si])
            self._advance_x(g)
            self._record(g, self._row_sums_at(g))
            self.si += 1
        while (skip_at_stop and self.si < len(self.samples)
               and abs(self.samples[self.si] - t_stop) <= self.eps):
            self.si += 1
        self._advance_x(t_stop)

    def jump(self, tau: float, comp: int, y_pre: np.ndarray) -> None:
        """Record the pre/post skeleton pair and apply the event updates."""
        self._advance_through_samples(tau, skip_at_stop=True)
        self._record(tau, y_pre.sum(axis=1))
        y_post = y_pre
        y_post[:, comp - 1] += self.c[:, comp - 1]
        self.x = apply_state_jump(self.x, self.coeffs)
        self._record(tau, y_post.sum(axis=1))
        self.ev_t.append(tau)
        self.ev_c.append(comp)
        self.y = y_post
        self.t_anchor = tau

    def finish(self) -> None:
        self._advance_through_samples(self.horizon, skip_at_stop=False)
        if not self.sk_t or self.horizon - self.sk_t[-1] > self.eps:
            self._record(self.horizon, self._row_sums_at(self.horizon))

    def to_path(self, seed: int, digest: str) -> Path:
        return Path(
            event_times=np.array(self.ev_t, dtype=float),
            event_components=np.array(self.ev_c, dtype=np.int32),
            skeleton_times=np.array(self.sk_t, dtype=float),
            skeleton_x=np.array(self.sk_x, dtype=float),
            skeleton_row_sums=np.array(self.sk_rs, dtype=float),
            horizon=self.horizon,
            seed=seed,
            model_hash=digest,
        )


def simulate_path(model: ModelSpec, horizon: float, cfg: IntegratorConfig, seed: int,
                  *, sample_at=None, max_events: int = DEFAULT_MAX_EVENTS,
                  refined_bound: bool = False) -> Path:
    """Simulate one trajectory over (0, horizon], fully determined by
    (model, horizon, cfg, seed).

    ``sample_at`` optionally adds extra skeleton sample times on top of the
    regular grid.  Raises :class:`SimulationLimitError` after ``max_events``
    accepted events.
    """
    if not horizon > 0:
        raise ValueError("horizon must be > 0")
    cfg.validate_for(model.coefficients)
    rng = RandomStream(seed)
    rt = _ModelRuntime(model, refined_bound)
    builder = _PathBuilder(model, cfg, rng, horizon,
                           _build_sample_times(horizon, cfg.grid_dt, sample_at))
    while True:
        tau, comp, y_pre = _next_event(rt, builder.y, builder.t_anchor, horizon, rng)
        if comp is None:
            builder.finish()
            break
        builder.jump(tau, comp, y_pre)
        if len(builder.ev_t) >= max_events:
            raise SimulationLimitError(
                f"exceeded {max_events} events before t = {tau:.6g} "
                "(supercritical model or horizon too long?)")
    return builder.to_path(seed, model_digest(model))


def reference_rate_step(model: ModelSpec) -> float:
    """Per-event increment M * gamma_bar * c_bar of the dominating process rate."""
    return (model.n_components
            * float(model.lipschitz_constants().max())
            * float(np.abs(model.kernel.c).max()))


def simulate_path_reference(model: ModelSpec, horizon: float, cfg: IntegratorConfig,
                            seed: int, *, k2_bound: float | None = None,
                            sample_at=None, max_candidates: int = DEFAULT_MAX_EVENTS,
                            trace: Optional[list] = None) -> Path:
    """Textbook dominating-process construction; same law as :func:`simulate_path`.

    The dominating rate starts at the Lipschitz envelope of the initial
    state (or the envelope over a memory ball of l1 radius ``k2_bound``, if
    given) and gains :func:`reference_rate_step` at every dominating event,
    accepted or not.  Tractable only over short horizons: the dominating
    count grows exponentially with the horizon.  A zero horizon yields the
    empty path.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    cfg.validate_for(model.coefficients)
    rng = RandomStream(seed)
    rt = _ModelRuntime(model)
    builder = _PathBuilder(model, cfg, rng, horizon,
                           _build_sample_times(horizon, cfg.grid_dt, sample_at))
    lam_star = rt.bound(builder.y)
    if k2_bound is not None:
        lam_star = max(lam_star,
                       rt.f_zero_sum + float(rt.gammas.max()) * float(k2_bound))
    step = reference_rate_step(model)
    t_cand = 0.0
    n_cand = 0
    while True:
        tau = t_cand + rng.exponential(lam_star)
        if tau > horizon:
            builder.finish()
            break
        n_cand += 1
        if n_cand > max_candidates:
            raise SimulationLimitError(
                f"exceeded {max_candidates} dominating events before t = {tau:.6g}")
        y_pre = builder.y * np.exp(-rt.alpha * (tau - builder.t_anchor))
        lam = rt.intensities(y_pre)
        if float(lam.sum()) > lam_star * (1.0 + 1e-9):
            raise RuntimeError("dominating rate violated in reference construction")
        comp = _pick_component(lam, rng.uniform() * lam_star)
        if trace is not None:
            trace.append(CandidateEvent(tau, comp))
        if comp:
            builder.jump(tau, comp, y_pre)
        lam_star += step
        t_cand = tau
    return builder.to_path(seed, model_digest(model))


def _simulate_indexed(args):
    model, horizon, cfg, master_seed, index, kwargs = args
    return index, simulate_path(model, horizon, cfg,
                                derive_path_seed(master_seed, index), **kwargs)


def simulate_ensemble(model: ModelSpec, horizon: float, cfg: IntegratorConfig,
                      master_seed: int, n_paths: int, *, workers: int = 1,
                      **kwargs) -> list[Path]:
    """Independent paths with per-path seeds derived from (master_seed, index).

    The result is identical for any worker count: path i always uses
    ``derive_path_seed(master_seed, i)`` and results are ordered by index.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    if workers <= 1 or n_paths == 1:
        return [simulate_path(model, horizon, cfg, derive_path_seed(master_seed, i),
                              **kwargs) for i in range(n_paths)]
    tasks = [(model, horizon, cfg, master_seed, i, kwargs) for i in range(n_paths)]
    out: list[Optional[Path]] = [None] * n_paths
    with ProcessPoolExecutor(max_workers=workers) as pool:
        chunk = max(1, n_paths // (workers * 8))
        for index, path in pool.map(_simulate_indexed, tasks, chunksize=chunk):
            out[index] = path
    return out  # type: ignore[return-value]


def _propagate_with_first_candidate(model: ModelSpec, x0: float, y0: np.ndarray,
                                    horizon: float, cfg: IntegratorConfig,
                                    rng: RandomStream, tau1: float) -> tuple[float, np.ndarray]:
    """Terminal (x, y) at ``horizon`` given the first thinning candidate time
    ``tau1`` <= horizon was already drawn externally at the initial bound.

    Used by the Monte Carlo generator check, where the (overwhelmingly
    likely) no-candidate branch is vectorised separately.
    """
    rt = _ModelRuntime(model)
    coeffs = model.coefficients
    x = x0
    y = np.array(y0, dtype=float)
    t_anchor = 0.0
    t_x = 0.0
    bound = rt.bound(y)
    tau = tau1
    while True:
        y = y * np.exp(-rt.alpha * (tau - t_anchor))
        t_anchor = tau
        lam = rt.intensities(y)
        comp = _pick_component(lam, rng.uniform() * bound)
        if comp:
            if tau - t_x > 0:
                x = advance_diffusion(x, tau - t_x, coeffs, cfg, rng)
            t_x = tau
            y[:, comp - 1] += rt.c[:, comp - 1]
            x = apply_state_jump(x, coeffs)
        bound = rt.bound(y)
        tau = tau + rng.exponential(bound)
        if tau > horizon:
            break
    if horizon - t_x > 0:
        x = advance_diffusion(x, horizon - t_x, coeffs, cfg, rng)
    y = y * np.exp(-rt.alpha * (horizon - t_anchor))
    return x, y
