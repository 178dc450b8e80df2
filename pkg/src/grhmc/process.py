"""Continuous-time randomized HMC as a piecewise deterministic process.

Between events the chain follows standardized Hamiltonian dynamics

    d qbar / dt = pbar
    d pbar / dt = S * grad log pi~(m + S * qbar)

augmented with quadrature accumulators (running integrals of q, q^2, the
squared gradient, and the event rate) carried inside the ODE state. At
Poisson event times, located as roots of the integrated rate minus an
Exp(1) threshold, the momentum is refreshed from N(0, I).

Randomness per chain comes from a single generator consumed in a fixed
order: the initial momentum (d draws), the initial event threshold (one
draw), then at every refresh event the new momentum (d draws) followed by
the next threshold (one draw). Everything else is deterministic, so the
sample stream and the evaluation count are reproducible from the seed.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .ode import EventRule, IntegratorConfig, OdeSystem, integrate_until
from .targets import TargetModel
from .tuning import ConstantRate, NullTuner, reanchor

__all__ = [
    "ScalingState",
    "PhaseState",
    "ProcessConfig",
    "ChainOutput",
    "StateLayout",
    "ChainView",
    "make_standardized_rhs",
    "momentum_refresh",
    "draw_event_threshold",
    "hamiltonian",
    "simulate_chain",
]


@dataclass
class ScalingState:
    """Center vector and positive diagonal scale of the standardization."""

    m: np.ndarray
    S: np.ndarray

    def __post_init__(self):
        self.m = np.asarray(self.m, dtype=float).copy()
        self.S = np.asarray(self.S, dtype=float).copy()
        self._check()

    def _check(self):
        if not np.all(np.isfinite(self.m)):
            raise ValueError("center vector must be finite")
        if not (np.all(self.S > 0) and np.all(np.isfinite(self.S))):
            raise ValueError("scale entries must be positive and finite")

    def update(self, m_new, S_new):
        self.m = np.asarray(m_new, dtype=float).copy()
        self.S = np.asarray(S_new, dtype=float).copy()
        self._check()


@dataclass
class PhaseState:
    """Structured view of the augmented ODE state."""

    qbar: np.ndarray
    pbar: np.ndarray
    accumulators: dict[str, np.ndarray]
    rate_integral: float
    threshold: float


class StateLayout:
    """Index map of the flat ODE state: position, momentum, accumulators, rate."""

    def __init__(self, dim: int, accum_names: tuple[str, ...] = ()):
        self.dim = dim
        self.accums: dict[str, slice] = {}
        idx = 2 * dim
        for name in accum_names:
            self.accums[name] = slice(idx, idx + dim)
            idx += dim
        self.rate_index = idx
        self.size = idx + 1

    def pack(self, qbar, pbar, rate_integral: float = 0.0) -> np.ndarray:
        y = np.zeros(self.size)
        y[: self.dim] = qbar
        y[self.dim : 2 * self.dim] = pbar
        y[self.rate_index] = rate_integral
        return y

    def unpack(self, y: np.ndarray, threshold: float = math.nan) -> PhaseState:
        d = self.dim
        return PhaseState(
            qbar=y[:d].copy(),
            pbar=y[d : 2 * d].copy(),
            accumulators={k: y[sl].copy() for k, sl in self.accums.items()},
            rate_integral=float(y[self.rate_index]),
            threshold=threshold,
        )


class ChainView:
    """Hook-facing handle on the live chain state.

    Tuners read positions and accumulators through it and change the
    standardization via :meth:`reanchor`, which preserves the untransformed
    position exactly and marks the state dirty so the integrator restarts.
    """

    def __init__(self, dim: int, scaling: ScalingState):
        self.dim = dim
        self.scaling = scaling
        self._y: Optional[np.ndarray] = None
        self._accums: dict[str, slice] = {}
        self.dirty = False

    def bind(self, y: np.ndarray, accums: Optional[dict[str, slice]] = None):
        self._y = y
        self._accums = accums or {}
        self.dirty = False
        return self

    @property
    def qbar(self) -> np.ndarray:
        return self._y[: self.dim]

    @property
    def pbar(self) -> np.ndarray:
        return self._y[self.dim : 2 * self.dim]

    def accum(self, name: str) -> np.ndarray:
        return self._y[self._accums[name]]

    def position(self) -> np.ndarray:
        return self.scaling.m + self.scaling.S * self.qbar

    def reanchor(self, m_new, S_new) -> None:
        self._y[: self.dim] = reanchor(
            self.qbar, self.scaling.m, self.scaling.S, m_new, S_new
        )
        self.scaling.update(m_new, S_new)
        self.dirty = True


@dataclass(frozen=True)
class ProcessConfig:
    """Chain-level settings: event rate, sampling grid, durations, seed."""

    rate_initial: float = 0.2
    sample_spacing: float = 2.0
    t_sample: float = 100000.0
    t_rate_tuning: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.rate_initial < 0:
            raise ValueError("event rate must be nonnegative")
        if self.sample_spacing <= 0:
            raise ValueError("sample spacing must be positive")
        if self.t_sample < 0 or self.t_rate_tuning < 0:
            raise ValueError("durations must be nonnegative")


@dataclass
class ChainOutput:
    """One replica's samples and final adapted state."""

    samples: np.ndarray
    n_ode: int
    m: np.ndarray
    S: np.ndarray
    rate: float
    seed: int
    refresh_times: np.ndarray
    t_burn: float
    n_steps: int

    def save(self, out_dir, stem: str = "chain") -> tuple[Path, Path]:
        """Write a CSV sample dump (one row per sample) and a JSON metadata record."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        sample_path = out_dir / f"{stem}_samples.csv"
        np.savetxt(sample_path, self.samples, delimiter=",", fmt="%.17g")
        meta = {
            "seed": self.seed,
            "n_ode": self.n_ode,
            "m": self.m.tolist(),
            "S": self.S.tolist(),
            "rate": self.rate,
            "t_burn": self.t_burn,
            "n_samples": int(self.samples.shape[0]),
            "n_refresh_events": int(self.refresh_times.size),
        }
        meta_path = out_dir / f"{stem}_meta.json"
        meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True))
        return sample_path, meta_path


def make_standardized_rhs(
    target: TargetModel,
    scaling: ScalingState,
    layout: StateLayout,
    rate_cell,
) -> Callable[[float, np.ndarray], np.ndarray]:
    """Right-hand side of the augmented system; one gradient evaluation per call."""
    d = layout.dim
    ev = target.eval
    sl_q = layout.accums.get("q")
    sl_q2 = layout.accums.get("q2")
    sl_g2 = layout.accums.get("g2")
    rate_index = layout.rate_index

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        out = np.empty(layout.size)
        qbar = y[:d]
        q = scaling.m + scaling.S * qbar
        _, grad = ev(q)
        out[:d] = y[d : 2 * d]
        out[d : 2 * d] = scaling.S * grad
        if sl_q is not None:
            out[sl_q] = q
        if sl_q2 is not None:
            out[sl_q2] = q * q
        if sl_g2 is not None:
            out[sl_g2] = grad * grad
        out[rate_index] = rate_cell[0]
        return out

    return rhs


def momentum_refresh(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Full independent momentum refresh from N(0, I)."""
    return rng.standard_normal(dim)


def draw_event_threshold(rng: np.random.Generator) -> float:
    """Exp(1) threshold; the next event fires when the rate integral reaches it."""
    return float(rng.exponential())


def hamiltonian(target: TargetModel, scaling: ScalingState, qbar, pbar) -> float:
    """Total energy of the standardized system (up to the constant log |S|)."""
    lp, _ = target.eval(scaling.m + scaling.S * np.asarray(qbar))
    return -lp + 0.5 * float(np.asarray(pbar) @ np.asarray(pbar))


def simulate_chain(
    target: TargetModel,
    tuner=None,
    process_config: ProcessConfig = ProcessConfig(),
    integrator_config: Optional[IntegratorConfig] = None,
    rate_tuner=None,
) -> ChainOutput:
    """Run one chain: scale-tuning burn-in, rate burn-in, then sampling.

    The tuner's phase schedule defines the scale burn-in; afterwards m and S
    are frozen, the rate policy runs for ``t_rate_tuning`` time units, and
    ``floor(t_sample / sample_spacing)`` equally spaced samples are recorded
    in the original parameterization.
    """
    if tuner is None:
        tuner = NullTuner()
    pcfg = process_config
    icfg = integrator_config if integrator_config is not None else IntegratorConfig()
    d = target.dim
    rng = np.random.default_rng(pcfg.seed)

    scaling = ScalingState(np.zeros(d), np.ones(d))
    view = ChainView(d, scaling)
    qbar = np.zeros(d)
    pbar = momentum_refresh(rng, d)
    threshold = [draw_event_threshold(rng)]
    rate_cell = [float(pcfg.rate_initial)]
    if rate_tuner is None:
        rate_tuner = ConstantRate(pcfg.rate_initial)

    refresh_times: list[float] = []
    n_ode = 0
    n_steps = 0
    t = 0.0
    rate_carry = 0.0  # rate integral since the last event, across phase boundaries

    def run_phase(
        t0: float,
        duration: float,
        accum_names: tuple[str, ...],
        crossings: bool,
        schedule=None,
        on_schedule=None,
        on_refresh_extra=None,
        on_crossing=None,
    ):
        """Integrate one phase, returning the end time; carries q/p/rate over."""
        nonlocal qbar, pbar, n_ode, n_steps, rate_carry
        if duration <= 0:
            return t0
        layout = StateLayout(d, accum_names)
        accums = dict(layout.accums)
        y0 = layout.pack(qbar, pbar, rate_integral=rate_carry)
        rhs = make_standardized_rhs(target, scaling, layout, rate_cell)

        roots = [lambda tt, yy: yy[layout.rate_index] - threshold[0]]
        rules = [EventRule(root=0, handler=None, name="refresh", direction=1)]

        def refresh_handler(tt, yy):
            view.bind(yy, accums)
            if on_refresh_extra is not None:
                on_refresh_extra(tt, view)
            yy[d : 2 * d] = momentum_refresh(rng, d)
            yy[layout.rate_index] = 0.0
            threshold[0] = draw_event_threshold(rng)
            refresh_times.append(tt)
            return yy

        rules[0].handler = refresh_handler
        if crossings:
            for j in range(d):
                roots.append(lambda tt, yy, j=j: yy[j])

                def cross_handler(tt, yy, j=j):
                    view.bind(yy, accums)
                    on_crossing(j, tt, view)
                    return yy if view.dirty else None

                rules.append(EventRule(root=1 + j, handler=cross_handler))

        def schedule_handler(tt, yy):
            view.bind(yy, accums)
            on_schedule(tt, view)
            return yy if view.dirty else None

        system = OdeSystem(state_dim=layout.size, rhs=rhs, root_fns=roots)
        outcome = integrate_until(
            system,
            y0,
            t0,
            t0 + duration,
            icfg,
            events=rules,
            schedule=schedule,
            on_schedule=schedule_handler if on_schedule is not None else None,
        )
        final = layout.unpack(outcome.state)
        qbar, pbar = final.qbar, final.pbar
        rate_carry = final.rate_integral
        n_ode += outcome.n_rhs_evals
        n_steps += outcome.n_steps
        return outcome.t

    # adaptive scale burn-in, one integration per tuner phase
    accum_names = tuple(tuner.accumulators)
    for idx, duration in enumerate(tuner.phases()):
        view.bind(qbar)
        tuner.begin_phase(idx, t, view)
        grid = None
        if tuner.grid_spacing is not None:
            n_grid = int(math.floor(duration / tuner.grid_spacing + 1e-9))
            grid = t + tuner.grid_spacing * np.arange(1, n_grid + 1)
        t = run_phase(
            t,
            duration,
            accum_names,
            crossings=tuner.track_crossings,
            schedule=grid,
            on_schedule=tuner.on_grid if tuner.grid_spacing is not None else None,
            on_refresh_extra=tuner.on_refresh,
            on_crossing=tuner.on_crossing,
        )
        view.bind(qbar)
        tuner.end_phase(idx, t, view)
    view.bind(qbar)
    tuner.finalize(t, view)

    # rate-tuning phase with frozen m, S
    def rate_hook(tt, chain):
        rate_cell[0] = rate_tuner.on_refresh(tt, chain)

    t = run_phase(t, pcfg.t_rate_tuning, (), crossings=False, on_refresh_extra=rate_hook)
    rate_cell[0] = rate_tuner.finalize()

    # sampling phase: everything frozen, equally spaced draws
    t_burn = t
    n_samples = int(math.floor(pcfg.t_sample / pcfg.sample_spacing + 1e-9))
    samples = np.empty((n_samples, d))
    cursor = [0]

    def collect(tt, chain):
        samples[cursor[0]] = chain.position()
        cursor[0] += 1

    sample_times = t_burn + pcfg.sample_spacing * np.arange(1, n_samples + 1)
    t = run_phase(
        t,
        pcfg.t_sample,
        (),
        crossings=False,
        schedule=sample_times,
        on_schedule=collect,
    )
    if cursor[0] != n_samples:
        raise RuntimeError(f"collected {cursor[0]} of {n_samples} samples")

    return ChainOutput(
        samples=samples,
        n_ode=n_ode,
        m=scaling.m.copy(),
        S=scaling.S.copy(),
        rate=rate_cell[0],
        seed=pcfg.seed,
        refresh_times=np.array(refresh_times),
        t_burn=t_burn,
        n_steps=n_steps,
    )
