"""Adaptive Dormand-Prince 5(4) integration with dense output and root events.

The stepper propagates the fifth-order solution and controls the embedded
fourth-order error estimate against ``abs_tol + rel_tol * |y|``. The
controller aims each step's error estimate at ``error_target`` times the
tolerance (acceptance still at the full tolerance); the conservative
default keeps long-horizon energy drift of Hamiltonian systems within an
order of magnitude of the local tolerance.

Dense output is a cubic Hermite interpolant built from the endpoint
states and derivatives. Root functions are located on the interpolant
with a safeguarded bracketing solve, and event handlers may mutate the
state, after which integration restarts from the event with a single
fresh right-hand-side evaluation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "OdeSystem",
    "IntegratorConfig",
    "CubicHermite",
    "RootEvent",
    "StepResult",
    "EventRule",
    "IntegrationOutcome",
    "IntegrationError",
    "DormandPrince",
    "step",
    "find_event",
    "integrate_until",
]

# Dormand-Prince 5(4) tableau.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = (
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
)
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_B_HAT = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_E = np.concatenate([_B, [0.0]]) - _B_HAT

_ORDER_EXPONENT = -1.0 / 5.0
_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0


class IntegrationError(RuntimeError):
    """Step size collapsed; carries the time and state where it happened."""

    def __init__(self, message: str, t: float, state: np.ndarray):
        super().__init__(message)
        self.t = t
        self.state = state


@dataclass
class OdeSystem:
    """Right-hand side plus optional root functions for event detection."""

    state_dim: int
    rhs: Callable[[float, np.ndarray], np.ndarray]
    root_fns: Sequence[Callable[[float, np.ndarray], float]] = ()


@dataclass(frozen=True)
class IntegratorConfig:
    abs_tol: float = 1e-6
    rel_tol: float = 1e-6
    max_step: float = math.inf
    initial_step: Optional[float] = None
    error_target: float = 0.05
    min_step: float = 1e-14
    refine_events: bool = True

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        if not 0 < self.error_target <= 1:
            raise ValueError("error_target must be in (0, 1]")


class CubicHermite:
    """Cubic Hermite interpolant on [t0, t1] from endpoint states and slopes."""

    __slots__ = ("t0", "t1", "_h", "_y0", "_f0", "_y1", "_f1")

    def __init__(self, t0, y0, f0, t1, y1, f1):
        self.t0 = t0
        self.t1 = t1
        self._h = t1 - t0
        self._y0 = y0
        self._f0 = f0
        self._y1 = y1
        self._f1 = f1

    def __call__(self, t: float) -> np.ndarray:
        s = (t - self.t0) / self._h
        s2 = s * s
        s3 = s2 * s
        return (
            (2 * s3 - 3 * s2 + 1) * self._y0
            + ((s3 - 2 * s2 + s) * self._h) * self._f0
            + (-2 * s3 + 3 * s2) * self._y1
            + ((s3 - s2) * self._h) * self._f1
        )


@dataclass(frozen=True)
class RootEvent:
    root_index: int
    time: float
    state: np.ndarray


@dataclass(frozen=True)
class StepResult:
    t_new: float
    state_new: np.ndarray
    dense: CubicHermite
    n_rhs_evals: int
    events: tuple[RootEvent, ...] = ()


def find_event(dense, root_fn, t_lo: float, t_hi: float, n_scan: int = 8) -> Optional[float]:
    """Earliest root of ``root_fn(t, dense(t))`` on [t_lo, t_hi].

    Scans ``n_scan`` subintervals for the first sign change, then solves
    it with a safeguarded bracketing method. Returns None when no sign
    change is found.
    """
    g_prev = root_fn(t_lo, dense(t_lo))
    grid = np.linspace(t_lo, t_hi, n_scan + 1)
    a = t_lo
    for b in grid[1:]:
        if g_prev == 0.0:
            return float(a)
        g_b = root_fn(b, dense(b))
        if g_prev * g_b < 0.0:
            return float(brentq(lambda s: root_fn(s, dense(s)), a, b, xtol=1e-13))
        a, g_prev = b, g_b
    if g_prev == 0.0:
        return float(a)
    return None


class DormandPrince:
    """Stateful adaptive stepper with FSAL reuse and a shared eval counter."""

    def __init__(self, system: OdeSystem, config: IntegratorConfig):
        self.system = system
        self.config = config
        self.n_rhs_evals = 0
        self._k = np.zeros((7, system.state_dim))
        self._f = None  # derivative at the current point (FSAL memory)
        self._h = None

    def _eval(self, t: float, y: np.ndarray) -> np.ndarray:
        self.n_rhs_evals += 1
        return self.system.rhs(t, y)

    def restart(self, t: float, y: np.ndarray) -> None:
        """Re-evaluate the derivative after the state was changed externally."""
        self._f = self._eval(t, y)

    def advance_fixed(self, t: float, y: np.ndarray, f0: np.ndarray, h: float):
        """One uncontrolled step of size h; returns (state, derivative) at t + h.

        Used to reconstruct event states more accurately than the cubic
        interpolant: the sub-step inherits the parent step's error bound.
        """
        k = self._k
        k[0] = f0
        k[1] = self._eval(t + _C[1] * h, y + (h * _A[0][0]) * k[0])
        k[2] = self._eval(t + _C[2] * h, y + h * (_A[1] @ k[:2]))
        k[3] = self._eval(t + _C[3] * h, y + h * (_A[2] @ k[:3]))
        k[4] = self._eval(t + _C[4] * h, y + h * (_A[3] @ k[:4]))
        k[5] = self._eval(t + _C[5] * h, y + h * (_A[4] @ k[:5]))
        y_new = y + h * (_B @ k[:6])
        f_new = self._eval(t + h, y_new)
        return y_new, f_new

    def _initial_step(self, t: float, y: np.ndarray) -> float:
        cfg = self.config
        if cfg.initial_step is not None:
            return min(cfg.initial_step, cfg.max_step)
        # Hairer/Norsett/Wanner heuristic, scaled down to the error target.
        f0 = self._f
        scale = cfg.abs_tol + cfg.rel_tol * np.abs(y)
        d0 = math.sqrt(float(np.mean((y / scale) ** 2)))
        d1 = math.sqrt(float(np.mean((f0 / scale) ** 2)))
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        f1 = self._eval(t + h0, y + h0 * f0)
        d2 = math.sqrt(float(np.mean(((f1 - f0) / scale) ** 2))) / h0
        if d1 <= 1e-15 and d2 <= 1e-15:
            h1 = max(1e-6, h0 * 1e-3)
        else:
            h1 = (0.01 / max(d1, d2)) ** 0.2
        return min(100 * h0, h1, cfg.max_step) * cfg.error_target**0.2

    def step(
        self,
        t: float,
        y: np.ndarray,
        h_cap: float = math.inf,
        detect_events: bool = True,
    ) -> StepResult:
        """Advance one accepted step from (t, y), retrying rejections internally.

        ``h_cap`` bounds the step so scheduled stop times are hit exactly.
        """
        cfg = self.config
        if self._f is None:
            self.restart(t, y)
        if self._h is None:
            self._h = self._initial_step(t, y)
        f0 = self._f
        k = self._k
        h = min(self._h, cfg.max_step)
        rejected = False
        while True:
            capped = h > h_cap
            if capped:
                h = h_cap
            if h < max(cfg.min_step, 4.0 * np.finfo(float).eps * abs(t)):
                raise IntegrationError(f"step size underflow (h={h:.3e})", t, y)
            k[0] = f0
            k[1] = self._eval(t + _C[1] * h, y + (h * _A[0][0]) * k[0])
            k[2] = self._eval(t + _C[2] * h, y + h * (_A[1] @ k[:2]))
            k[3] = self._eval(t + _C[3] * h, y + h * (_A[2] @ k[:3]))
            k[4] = self._eval(t + _C[4] * h, y + h * (_A[3] @ k[:4]))
            k[5] = self._eval(t + _C[5] * h, y + h * (_A[4] @ k[:5]))
            y_new = y + h * (_B @ k[:6])
            k[6] = self._eval(t + h, y_new)
            err = h * (_E @ k)
            scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
            ratio = err / scale
            err_norm = math.sqrt(float(ratio @ ratio) / ratio.size)
            if err_norm <= 1.0:
                break
            rejected = True
            if math.isfinite(err_norm):
                h *= max(
                    _MIN_FACTOR, _SAFETY * (cfg.error_target / err_norm) ** -_ORDER_EXPONENT
                )
            else:
                # overshot into a non-finite region; retry much smaller
                h *= _MIN_FACTOR

        if err_norm == 0.0:
            factor = _MAX_FACTOR
        else:
            factor = min(
                _MAX_FACTOR, _SAFETY * (cfg.error_target / err_norm) ** -_ORDER_EXPONENT
            )
        if rejected:
            factor = min(1.0, factor)
        if capped:
            # the cap, not accuracy, limited this step: keep the larger proposal
            self._h = min(max(self._h, h * factor), cfg.max_step)
        else:
            self._h = min(h * factor, cfg.max_step)

        f_new = k[6].copy()
        t_new = t + h
        dense = CubicHermite(t, y.copy(), f0.copy(), t_new, y_new, f_new)
        events: list[RootEvent] = []
        if detect_events and self.system.root_fns:
            for i, root in enumerate(self.system.root_fns):
                if root(t, y) * root(t_new, y_new) <= 0.0:
                    te = find_event(dense, root, t, t_new)
                    if te is not None:
                        events.append(RootEvent(i, te, dense(te)))
            events.sort(key=lambda e: e.time)
        self._f = f_new
        return StepResult(
            t_new=t_new,
            state_new=y_new,
            dense=dense,
            n_rhs_evals=self.n_rhs_evals,
            events=tuple(events),
        )


def step(system: OdeSystem, state: np.ndarray, t: float, config: IntegratorConfig) -> StepResult:
    """Take a single accepted adaptive step from (t, state)."""
    stepper = DormandPrince(system, config)
    stepper.restart(t, np.asarray(state, dtype=float))
    return stepper.step(t, np.asarray(state, dtype=float))


@dataclass
class EventRule:
    """Reaction to a root crossing.

    The handler receives (t, state) at the event and returns the new state
    (or None if the state is unchanged). Terminal rules stop integration.

    ``direction=0`` detects crossings in either direction with a sign-memory
    guard against re-triggering at a just-handled event. ``direction=+1``
    fires whenever the root function reaches zero from below and expects the
    handler to push it negative again (monotone integrated-rate thresholds).
    """

    root: int
    handler: Optional[Callable[[float, np.ndarray], Optional[np.ndarray]]] = None
    terminal: bool = False
    name: str = ""
    direction: int = 0


@dataclass
class IntegrationOutcome:
    t: float
    state: np.ndarray
    n_rhs_evals: int
    n_steps: int
    n_events: int
    stop_reason: str


_ARM_TOL = 1e-8
_SNAP = 1e-9


def integrate_until(
    system: OdeSystem,
    state: np.ndarray,
    t0: float,
    t_end: float,
    config: IntegratorConfig,
    events: Sequence[EventRule] = (),
    schedule: Optional[Sequence[float]] = None,
    on_schedule: Optional[Callable[[float, np.ndarray], Optional[np.ndarray]]] = None,
    observer: Optional[Callable[[float, np.ndarray], None]] = None,
    stepper: Optional[DormandPrince] = None,
) -> IntegrationOutcome:
    """Advance to ``t_end``, processing root events and scheduled stops in order.

    Scheduled times are hit exactly (the step is capped, never interpolated).
    Root events are localized on the dense output; their handlers may return
    a replacement state, after which the stepper restarts at the event time.
    A root is re-armed only once its function moves decisively (> 1e-8) away
    from zero, which suppresses chatter from re-triggering at a just-handled
    event.

    Returns the final state along with step/event statistics; the eval count
    is the total for the supplied stepper (cumulative when reused).
    """
    y = np.asarray(state, dtype=float).copy()
    t = float(t0)
    if stepper is None:
        stepper = DormandPrince(system, config)
    rules = {rule.root: rule for rule in events}
    roots = system.root_fns
    n_roots = len(roots)
    directions = [rules[i].direction if i in rules else 0 for i in range(n_roots)]
    sched = [float(s) for s in (() if schedule is None else schedule) if t0 < s <= t_end + _SNAP]
    sched_idx = 0

    stepper.restart(t, y)
    g_left = [roots[i](t, y) for i in range(n_roots)]
    arm = [0.0] * n_roots

    def _rearm(i: int) -> None:
        g = g_left[i]
        if g > _ARM_TOL:
            arm[i] = 1.0
        elif g < -_ARM_TOL:
            arm[i] = -1.0

    for i in range(n_roots):
        _rearm(i)

    n_steps = 0
    n_events = 0
    stop_reason = "horizon"
    while t < t_end - _SNAP:
        cap = t_end if sched_idx >= len(sched) else min(t_end, sched[sched_idx])
        res = stepper.step(t, y, h_cap=cap - t, detect_events=False)
        n_steps += 1
        t_new, y_new, dense = res.t_new, res.state_new, res.dense
        if abs(t_new - cap) <= _SNAP:
            t_new = cap

        hit = None
        for i in range(n_roots):
            g1 = roots[i](t_new, y_new)
            te = None
            if directions[i] > 0:
                if g1 >= 0.0:
                    te = find_event(dense, roots[i], t, t_new) if g_left[i] < 0.0 else t
                    if te is None:
                        te = t_new
            elif arm[i] != 0.0 and g1 != 0.0 and (g1 > 0.0) != (arm[i] > 0.0):
                if g_left[i] * g1 > 0.0:
                    te = t  # crossed within the arming dead band of the left endpoint
                else:
                    te = find_event(dense, roots[i], t, t_new)
            if te is not None and (hit is None or te < hit[0]):
                hit = (te, i)
            g_left[i] = g1

        if hit is not None:
            te, i = hit
            f_te = None
            if te > t:
                if config.refine_events:
                    y, f_te = stepper.advance_fixed(t, y, dense._f0, te - t)
                else:
                    y = dense(te)
            t = te
            n_events += 1
            rule = rules.get(i)
            mutated = False
            if rule is not None and rule.handler is not None:
                replacement = rule.handler(t, y)
                if replacement is not None:
                    y = np.asarray(replacement, dtype=float)
                    mutated = True
            if rule is not None and rule.terminal:
                stop_reason = f"event:{rule.name or i}"
                break
            if mutated or f_te is None:
                stepper.restart(t, y)
            else:
                stepper._f = f_te
            for j in range(n_roots):
                g_left[j] = roots[j](t, y)
                _rearm(j)
            # the fired root stays disarmed until a step endpoint gives a
            # decisive sign; the event-point residual sign is noise
            arm[i] = 0.0
            continue

        t, y = t_new, y_new
        for j in range(n_roots):
            _rearm(j)
        if observer is not None:
            observer(t, y)
        if sched_idx < len(sched) and abs(t - sched[sched_idx]) <= _SNAP:
            sched_idx += 1
            if on_schedule is not None:
                replacement = on_schedule(t, y)
                if replacement is not None:
                    y = np.asarray(replacement, dtype=float)
                    stepper.restart(t, y)
                    for j in range(n_roots):
                        g_left[j] = roots[j](t, y)
                        arm[j] = 0.0
                        _rearm(j)

    return IntegrationOutcome(
        t=t,
        state=y,
        n_rhs_evals=stepper.n_rhs_evals,
        n_steps=n_steps,
        n_events=n_events,
        stop_reason=stop_reason,
    )
