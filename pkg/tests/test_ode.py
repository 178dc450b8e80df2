"""Integrator unit tests: accuracy, dense output, events, determinism."""
import math

import numpy as np
import pytest

from grhmc.ode import (
    DormandPrince,
    EventRule,
    IntegratorConfig,
    IntegrationError,
    OdeSystem,
    find_event,
    integrate_until,
    step,
)


def oscillator():
    return OdeSystem(state_dim=2, rhs=lambda t, y: np.array([y[1], -y[0]]))


def test_oscillator_energy_drift():
    sys = oscillator()
    cfg = IntegratorConfig(abs_tol=1e-7, rel_tol=1e-7)
    drift = [0.0]

    def watch(t, y):
        drift[0] = max(drift[0], abs(0.5 * float(y @ y) - 0.5))

    out = integrate_until(sys, np.array([1.0, 0.0]), 0.0, 100.0, cfg, observer=watch)
    assert out.stop_reason == "horizon"
    assert drift[0] <= 1e-6


def test_oscillator_endpoint_value():
    sys = oscillator()
    cfg = IntegratorConfig()
    out = integrate_until(sys, np.array([1.0, 0.0]), 0.0, 2 * math.pi, cfg)
    assert abs(out.state[0] - 1.0) <= 1e-6


def test_pure_quadrature_is_exact():
    sys = OdeSystem(state_dim=1, rhs=lambda t, y: np.array([1.0]))
    cfg = IntegratorConfig()
    out = integrate_until(sys, np.array([0.0]), 0.0, 7.5, cfg)
    assert abs(out.state[0] - 7.5) <= 1e-9


def test_single_step_controls_local_error():
    sys = oscillator()
    res = step(sys, np.array([1.0, 0.0]), 0.0, IntegratorConfig())
    exact = np.array([math.cos(res.t_new), -math.sin(res.t_new)])
    assert np.max(np.abs(res.state_new - exact)) <= 2e-6
    # interpolant endpoints match states exactly
    assert np.array_equal(res.dense(0.0), np.array([1.0, 0.0]))
    assert np.array_equal(res.dense(res.t_new), res.state_new)


def test_convergence_order_at_least_four():
    sys = oscillator()
    horizon = 7.3
    exact = np.array([math.cos(horizon), -math.sin(horizon)])
    errs = []
    for h in (0.4, 0.2, 0.1):
        cfg = IntegratorConfig(abs_tol=1.0, rel_tol=1.0, max_step=h, initial_step=h)
        out = integrate_until(sys, np.array([1.0, 0.0]), 0.0, horizon, cfg)
        errs.append(float(np.linalg.norm(out.state - exact)))
    order_a = math.log2(errs[0] / errs[1])
    order_b = math.log2(errs[1] / errs[2])
    assert order_a >= 4.0
    assert order_b >= 4.0


class _AnalyticDense:
    """Stand-in dense output handing the time straight to the root function."""

    def __call__(self, t):
        return np.array([t])


def test_find_event_cosine_root():
    te = find_event(_AnalyticDense(), lambda t, y: math.cos(t), 1.0, 2.0)
    assert abs(te - math.pi / 2) <= 1e-9


def test_find_event_linear_root():
    te = find_event(_AnalyticDense(), lambda t, y: t - 1.5, 1.0, 2.0)
    assert te == pytest.approx(1.5, abs=1e-12)


def test_find_event_rate_integral_threshold():
    # integrated rate 0.2*t hits threshold 1 at t=5
    te = find_event(_AnalyticDense(), lambda t, y: 0.2 * t - 1.0, 0.0, 8.0)
    assert abs(te - 5.0) <= 1e-9


def test_find_event_returns_earliest_of_multiple():
    te = find_event(_AnalyticDense(), lambda t, y: math.sin(t), 2.0, 8.0)
    assert abs(te - math.pi) <= 1e-9


def test_find_event_no_sign_change():
    assert find_event(_AnalyticDense(), lambda t, y: 1.0 + t * 0, 0.0, 1.0) is None


def test_integrate_until_horizon():
    sys = oscillator()
    out = integrate_until(sys, np.array([1.0, 0.0]), 0.0, 10.0, IntegratorConfig())
    assert out.t == pytest.approx(10.0, abs=1e-9)
    assert out.stop_reason == "horizon"
    assert out.n_events == 0


def test_crossing_counter_three_roots_in_horizon():
    # q(t) = cos(t) crosses zero at pi/2, 3pi/2, 5pi/2 within (0, 10]
    sys = OdeSystem(
        state_dim=2,
        rhs=lambda t, y: np.array([y[1], -y[0]]),
        root_fns=[lambda t, y: y[0]],
    )
    times = []
    rule = EventRule(root=0, handler=lambda t, y: times.append(t))
    out = integrate_until(sys, np.array([1.0, 0.0]), 0.0, 10.0, IntegratorConfig(), events=[rule])
    assert len(times) == 3
    expect = [math.pi / 2, 3 * math.pi / 2, 5 * math.pi / 2]
    assert np.allclose(times, expect, atol=1e-6)
    assert all(b > a for a, b in zip(times, times[1:]))


def test_reflecting_handler_preserves_energy():
    sys = OdeSystem(
        state_dim=2,
        rhs=lambda t, y: np.array([y[1], -y[0]]),
        root_fns=[lambda t, y: y[0]],
    )

    def reflect(t, y):
        y = y.copy()
        y[1] = -y[1]
        return y

    drift = [0.0]

    def watch(t, y):
        drift[0] = max(drift[0], abs(0.5 * float(y @ y) - 0.5))

    out = integrate_until(
        sys,
        np.array([1.0, 0.0]),
        0.0,
        10.0,
        IntegratorConfig(),
        events=[EventRule(root=0, handler=reflect)],
        observer=watch,
    )
    assert out.n_events == 3
    assert drift[0] <= 1e-6


def test_terminal_event_stops_integration():
    sys = OdeSystem(
        state_dim=1,
        rhs=lambda t, y: np.array([1.0]),
        root_fns=[lambda t, y: y[0] - 2.5],
    )
    out = integrate_until(
        sys,
        np.array([0.0]),
        0.0,
        10.0,
        IntegratorConfig(),
        events=[EventRule(root=0, terminal=True, name="level")],
    )
    assert out.stop_reason == "event:level"
    assert out.t == pytest.approx(2.5, abs=1e-9)


def test_scheduled_stops_hit_exactly():
    sys = oscillator()
    seen = []

    def grab(t, y):
        seen.append((t, y[0]))

    out = integrate_until(
        sys,
        np.array([1.0, 0.0]),
        0.0,
        10.0,
        IntegratorConfig(),
        schedule=np.arange(1.0, 11.0),
        on_schedule=grab,
    )
    assert [t for t, _ in seen] == [float(i) for i in range(1, 11)]
    for t, q in seen:
        assert abs(q - math.cos(t)) <= 1e-6
    assert out.t == pytest.approx(10.0, abs=1e-9)


def test_rhs_eval_count_reproducible():
    counts = []
    for _ in range(2):
        sys = oscillator()
        out = integrate_until(sys, np.array([1.0, 0.0]), 0.0, 25.0, IntegratorConfig())
        counts.append(out.n_rhs_evals)
    assert counts[0] == counts[1]


def test_blowup_raises_integration_error():
    # y' = y^2 blows up at t = 1; the controller must fail loudly, not hang
    sys = OdeSystem(state_dim=1, rhs=lambda t, y: y * y)
    with pytest.raises(IntegrationError) as err:
        integrate_until(sys, np.array([1.0]), 0.0, 2.0, IntegratorConfig())
    assert err.value.t > 0.9
    assert err.value.state.shape == (1,)


def test_event_times_nondecreasing_across_many_events():
    sys = OdeSystem(
        state_dim=2,
        rhs=lambda t, y: np.array([y[1], -y[0]]),
        root_fns=[lambda t, y: y[0], lambda t, y: y[1]],
    )
    log = []
    rules = [
        EventRule(root=0, handler=lambda t, y: log.append(t)),
        EventRule(root=1, handler=lambda t, y: log.append(t)),
    ]
    integrate_until(sys, np.array([1.0, 0.5]), 0.0, 40.0, IntegratorConfig(), events=rules)
    assert len(log) >= 20
    assert all(b >= a for a, b in zip(log, log[1:]))


def test_stepper_counts_every_eval():
    sys = oscillator()
    stepper = DormandPrince(sys, IntegratorConfig(initial_step=0.1))
    y = np.array([1.0, 0.0])
    stepper.restart(0.0, y)
    assert stepper.n_rhs_evals == 1
    res = stepper.step(0.0, y)
    assert stepper.n_rhs_evals == 7  # restart + six new stages (FSAL reuses the first)
    assert res.n_rhs_evals == 7
