"""Diagonal scale adaptation: VARI, ISG and MCT tuners plus their machinery.

All three strategies estimate a center vector m and a positive diagonal
scale S for the standardization ``q = m + S * qbar`` during burn-in:

* VARI sets ``S_j`` to the time-integrated marginal standard deviation and
  ``m_j`` to the time-integrated mean, refreshed at every momentum event.
* ISG sets ``S_j^-2`` to the time average of the squared log-density
  gradient component, which equals the precision diagonal for Gaussians.
* MCT equalizes the mean time between successive median crossings of each
  coordinate to a common target using dual averaging on ``log S_j``, with
  the median tracked by a constant-memory streaming estimator.

Whenever m or S changes, the standardized position is re-anchored so the
untransformed position is preserved exactly.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

VARIANCE_FLOOR = 1e-8


def reanchor(qbar, m, S, m_new, S_new) -> np.ndarray:
    """Move qbar so that ``m_new + S_new*qbar_new == m + S*qbar``.

    Raises:
        ValueError: if any entry of ``S_new`` is not strictly positive.
    """
    S_new = np.asarray(S_new, dtype=float)
    if np.any(S_new <= 0):
        raise ValueError("new scale entries must be strictly positive")
    return (S * qbar + m - m_new) / S_new


def vari_update(int_q: np.ndarray, int_q2: np.ndarray, t: float):
    """Center and scale from running mean/second-moment integrals up to time t.

    A numerically negative variance estimate is clamped at a small floor.
    """
    if t <= 0:
        raise ValueError("elapsed time must be positive")
    m = int_q / t
    var = int_q2 / t - m * m
    if np.any(var <= 0):
        warnings.warn("variance estimate not positive; clamping at floor", RuntimeWarning)
        var = np.maximum(var, VARIANCE_FLOOR)
    return m, np.sqrt(var)


def isg_update(int_q: np.ndarray, int_g2: np.ndarray, t: float):
    """Center from the mean integral, scale from squared-gradient integrals."""
    if t <= 0:
        raise ValueError("elapsed time must be positive")
    mean_g2 = int_g2 / t
    if np.any(mean_g2 <= 0):
        raise ValueError("squared-gradient accumulator is zero; target gradient is flat")
    return int_q / t, 1.0 / np.sqrt(mean_g2)


class P2Estimator:
    """Streaming median via the P-square algorithm of Jain & Chlamtac (1985).

    Keeps five markers whose heights approximate the quintiles needed for
    the 0.5 quantile; marker heights move by parabolic interpolation with a
    linear fallback. Exact for the first five observations.
    """

    __slots__ = ("count", "_first", "heights", "positions", "_desired", "_incr")

    def __init__(self):
        self.count = 0
        self._first: list[float] = []
        self.heights: Optional[np.ndarray] = None
        self.positions: Optional[np.ndarray] = None
        self._desired = np.array([1.0, 1.5, 2.0, 2.5, 3.0])
        self._incr = np.array([0.0, 0.25, 0.5, 0.75, 1.0])

    def insert(self, x: float) -> None:
        self.count += 1
        if self.heights is None:
            self._first.append(float(x))
            if len(self._first) == 5:
                self.heights = np.sort(np.array(self._first))
                self.positions = np.arange(1.0, 6.0)
            return
        q, pos = self.heights, self.positions
        if x < q[0]:
            q[0] = x
            cell = 0
        elif x >= q[4]:
            q[4] = x
            cell = 3
        else:
            cell = min(int(np.searchsorted(q, x, side="right")) - 1, 3)
        pos[cell + 1 :] += 1.0
        self._desired += self._incr
        for i in (1, 2, 3):
            d = self._desired[i] - pos[i]
            if (d >= 1.0 and pos[i + 1] - pos[i] > 1.0) or (
                d <= -1.0 and pos[i - 1] - pos[i] < -1.0
            ):
                s = 1.0 if d >= 0 else -1.0
                cand = q[i] + (s / (pos[i + 1] - pos[i - 1])) * (
                    (pos[i] - pos[i - 1] + s) * (q[i + 1] - q[i]) / (pos[i + 1] - pos[i])
                    + (pos[i + 1] - pos[i] - s) * (q[i] - q[i - 1]) / (pos[i] - pos[i - 1])
                )
                if q[i - 1] < cand < q[i + 1]:
                    q[i] = cand
                else:  # parabolic step would break monotonicity
                    j = i + int(s)
                    q[i] = q[i] + s * (q[j] - q[i]) / (pos[j] - pos[i])
                pos[i] += s

    def estimate(self) -> float:
        """Current median estimate (middle of the sorted prefix before 5 obs)."""
        if self.heights is not None:
            return float(self.heights[2])
        if not self._first:
            return 0.0
        ordered = sorted(self._first)
        mid = (len(ordered) - 1) // 2
        if len(ordered) % 2:
            return ordered[mid]
        return 0.5 * (ordered[mid] + ordered[mid + 1])


class DualAveraging:
    """Per-coordinate dual averaging on log-scale driving crossing intervals.

    After ``k`` observed intervals ``T_1..T_k`` of coordinate j:

        log S_j = mu_j - sqrt(k)/gamma_j * sum_i (target - T_i) / (k + k0)

    and the averaged iterate uses the learning rate ``k**-kappa``. The
    working value during adaptation is the current iterate; the averaged
    iterate is the quantity to freeze at the end of a stage.
    """

    def __init__(self, mu, gamma: float, target_interval: float, kappa: float = 0.75, k0: float = 10.0):
        self.mu = np.asarray(mu, dtype=float).copy()
        d = self.mu.size
        self.gamma = float(gamma)
        self.target_interval = float(target_interval)
        self.kappa = float(kappa)
        self.k0 = float(k0)
        self.k = np.zeros(d)
        self.h_sum = np.zeros(d)
        self.log_s = self.mu.copy()
        self.log_s_bar = self.mu.copy()

    def update(self, j: int, observed_interval: float) -> float:
        """Consume one crossing interval for coordinate j; returns new log S_j."""
        if observed_interval <= 0:
            raise ValueError("crossing interval must be positive")
        self.k[j] += 1.0
        k = self.k[j]
        self.h_sum[j] += self.target_interval - observed_interval
        self.log_s[j] = self.mu[j] - (math.sqrt(k) / self.gamma) * self.h_sum[j] / (k + self.k0)
        eta = k**-self.kappa
        self.log_s_bar[j] = eta * self.log_s[j] + (1.0 - eta) * self.log_s_bar[j]
        return float(self.log_s[j])


@dataclass(frozen=True)
class MctSchedule:
    """Two-stage burn-in constants for the median-crossing tuner."""

    t_stage1: float = 1000.0
    t_stage2: float = 5000.0
    c_burn: float = 0.05
    grid_spacing: float = 1.0
    target_interval: float = math.pi
    gamma_stage1: float = 10.0
    gamma_stage2: float = 25.0
    anchor_inflation: float = 1.1
    kappa: float = 0.75
    k0: float = 10.0

    @classmethod
    def from_total(cls, t_scale: float, stage_ratio: float = 0.2, **overrides) -> "MctSchedule":
        """Split a total scale-tuning duration into the two stages.

        ``stage_ratio`` is t_stage1/t_stage2, so the default 0.2 turns a
        6000-unit budget into 1000 + 5000.
        """
        t2 = t_scale / (1.0 + stage_ratio)
        return cls(t_stage1=t_scale - t2, t_stage2=t2, **overrides)

    def __post_init__(self):
        if self.t_stage1 <= 0 or self.t_stage2 <= 0 or self.grid_spacing <= 0:
            raise ValueError("durations must be positive")
        if not 0 <= self.c_burn <= 1:
            raise ValueError("c_burn must lie in [0, 1]")


class VariTuner:
    """Scale from time-integrated marginal variances, updated at refresh events."""

    accumulators = ("q", "q2")
    grid_spacing = None
    track_crossings = False

    def __init__(self, t_scale: float = 6000.0):
        self.t_scale = float(t_scale)

    def phases(self):
        return [self.t_scale]

    def begin_phase(self, idx, t, chain):
        pass

    def end_phase(self, idx, t, chain):
        pass

    def on_grid(self, t, chain):
        pass

    def on_crossing(self, j, t, chain):
        pass

    def on_refresh(self, t, chain):
        if t <= 0:
            return
        m, S = vari_update(chain.accum("q"), chain.accum("q2"), t)
        chain.reanchor(m, S)

    def finalize(self, t, chain):
        pass


class IsgTuner:
    """Scale from time-integrated squared gradients, updated at refresh events."""

    accumulators = ("q", "g2")
    grid_spacing = None
    track_crossings = False

    def __init__(self, t_scale: float = 6000.0):
        self.t_scale = float(t_scale)

    def phases(self):
        return [self.t_scale]

    def begin_phase(self, idx, t, chain):
        pass

    def end_phase(self, idx, t, chain):
        pass

    def on_grid(self, t, chain):
        pass

    def on_crossing(self, j, t, chain):
        pass

    def on_refresh(self, t, chain):
        if t <= 0:
            return
        m, S = isg_update(chain.accum("q"), chain.accum("g2"), t)
        chain.reanchor(m, S)

    def finalize(self, t, chain):
        pass


class MctTuner:
    """Median-crossing-time tuner with the two-stage dual-averaging schedule.

    Stage 1 shrinks ``log S`` towards zero; stage 2 re-anchors towards an
    inflated copy of the stage-1 output and averages with a larger shrinkage
    parameter. The streaming median estimates feed the center vector at
    every grid time once the initial estimation window has passed; crossing
    events drive the dual-averaging updates of the scale.
    """

    accumulators = ()
    track_crossings = True

    def __init__(self, schedule: MctSchedule = MctSchedule()):
        self.schedule = schedule
        self.grid_spacing = schedule.grid_spacing
        self._medians: list[P2Estimator] = []
        self._da: Optional[DualAveraging] = None
        self._last_cross: Optional[np.ndarray] = None
        self._stage = 0
        self.optimizing = False

    def phases(self):
        return [self.schedule.t_stage1, self.schedule.t_stage2]

    def begin_phase(self, idx, t, chain):
        d = chain.dim
        sched = self.schedule
        self._stage = idx
        self._last_cross = np.full(d, np.nan)
        if idx == 0:
            self._medians = [P2Estimator() for _ in range(d)]
            self.optimizing = False
            self._opt_start = t + sched.c_burn * sched.t_stage1
            self._da = DualAveraging(
                np.zeros(d), sched.gamma_stage1, sched.target_interval, sched.kappa, sched.k0
            )
        else:
            # freeze stage 1 at the averaged iterate, then re-anchor the
            # shrinkage target at an inflated copy of it
            log_bar = self._da.log_s_bar.copy()
            chain.reanchor(chain.scaling.m, np.exp(log_bar))
            da = DualAveraging(
                sched.anchor_inflation * log_bar,
                sched.gamma_stage2,
                sched.target_interval,
                sched.kappa,
                sched.k0,
            )
            da.log_s = log_bar.copy()
            da.log_s_bar = log_bar.copy()
            self._da = da

    def end_phase(self, idx, t, chain):
        pass

    def on_grid(self, t, chain):
        q = chain.position()
        for j, est in enumerate(self._medians):
            est.insert(q[j])
        if not self.optimizing:
            if self._stage == 0 and t < self._opt_start:
                return
            self.optimizing = True
        m_new = np.array([est.estimate() for est in self._medians])
        chain.reanchor(m_new, chain.scaling.S)

    def on_crossing(self, j, t, chain):
        if not self.optimizing:
            return
        previous = self._last_cross[j]
        self._last_cross[j] = t
        if np.isnan(previous):
            return  # first crossing of a stage only starts the clock
        log_s_j = self._da.update(j, t - previous)
        S_new = chain.scaling.S.copy()
        S_new[j] = math.exp(log_s_j)
        chain.reanchor(chain.scaling.m, S_new)

    def on_refresh(self, t, chain):
        pass

    def finalize(self, t, chain):
        chain.reanchor(chain.scaling.m, np.exp(self._da.log_s_bar))


class NullTuner:
    """No adaptation; keeps the initial center and scale."""

    accumulators = ()
    grid_spacing = None
    track_crossings = False

    def phases(self):
        return []

    def begin_phase(self, idx, t, chain):
        pass

    def end_phase(self, idx, t, chain):
        pass

    def on_grid(self, t, chain):
        pass

    def on_crossing(self, j, t, chain):
        pass

    def on_refresh(self, t, chain):
        pass

    def finalize(self, t, chain):
        pass


class ConstantRate:
    """Default event-rate policy: keep the initial rate."""

    def __init__(self, rate: float):
        self.rate = float(rate)

    def on_refresh(self, t, chain) -> float:
        return self.rate

    def finalize(self) -> float:
        return self.rate


class SmoothedRate:
    """Exponentially smoothed event rate driven by caller-supplied proposals.

    The proposal callable is invoked at each refresh event and its value is
    folded into the running rate with the given smoothing factor. This is an
    extension point; the bundled experiments all use ``ConstantRate``.
    """

    def __init__(self, proposal: Callable[[float, object], float], initial: float, smoothing: float = 0.99):
        if not 0.0 <= smoothing < 1.0:
            raise ValueError("smoothing must lie in [0, 1)")
        self.proposal = proposal
        self.rate = float(initial)
        self.smoothing = float(smoothing)

    def on_refresh(self, t, chain) -> float:
        self.rate = self.smoothing * self.rate + (1.0 - self.smoothing) * float(
            self.proposal(t, chain)
        )
        return self.rate

    def finalize(self) -> float:
        return self.rate


def make_tuner(method: str, t_scale: float = 6000.0, mct: Optional[MctSchedule] = None):
    """Tuner factory keyed by method name (VARI, ISG, MCT, or NONE)."""
    key = method.upper()
    if key == "VARI":
        return VariTuner(t_scale)
    if key == "ISG":
        return IsgTuner(t_scale)
    if key == "MCT":
        return MctTuner(mct if mct is not None else MctSchedule.from_total(t_scale))
    if key in ("NONE", "NULL"):
        return NullTuner()
    raise ValueError(f"unknown tuning method {method!r}")


def run_burnin(target, method: str, process_config, integrator_config=None, *, t_scale=6000.0, mct=None):
    """Run the burn-in phases only and return the frozen (m, S, rate).

    Convenience wrapper over the chain engine with the sampling duration set
    to zero.
    """
    from dataclasses import replace

    from .process import simulate_chain

    tuner = make_tuner(method, t_scale=t_scale, mct=mct)
    cfg = replace(process_config, t_sample=0.0)
    out = simulate_chain(target, tuner, cfg, integrator_config)
    return out.m, out.S, out.rate
