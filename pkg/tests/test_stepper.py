"""Trajectory driver, error analytics, interaction picture."""

import math

import numpy as np
import pytest

from cfet.expm import DenseBackend, KrylovBackend, SU2Backend
from cfet.models import TwoLevelParams, two_level_exact, two_level_generator
from cfet.schemes import Generator, scheme_lookup
from cfet.stepper import (
    InteractionPictureGenerator,
    StepPlan,
    StepperError,
    crossover_threshold,
    effective_error_constant,
    empirical_effective_constant,
    estimate_error_constant,
    frobenius_error,
    interaction_picture,
    propagate,
)

PARAMS = TwoLevelParams(delta=1.0, v=0.5, omega=0.8)
UP = np.array([1.0, 0.0], dtype=complex)


def _exact_final(p, t0, T):
    return two_level_exact(p, T) @ np.linalg.inv(two_level_exact(p, t0)) @ UP


# ---------------------------------------------------------------------------
# plan validation


def test_plan_validation():
    with pytest.raises(StepperError):
        StepPlan(0.0, 0.0, dt=0.1)
    with pytest.raises(StepperError):
        StepPlan(0.0, 1.0)  # neither dt nor target
    with pytest.raises(StepperError):
        StepPlan(0.0, 1.0, dt=0.1, target=1e-6)
    with pytest.raises(StepperError):
        StepPlan(0.0, 1.0, dt=-0.1)
    with pytest.raises(StepperError):
        StepPlan(0.0, 1.0, dt=0.1, record_stride=0)


def test_dimension_mismatch():
    gen = two_level_generator(PARAMS)
    with pytest.raises(StepperError):
        propagate(gen, scheme_lookup("CF2:1"), SU2Backend(),
                  StepPlan(0.0, 1.0, dt=0.1), np.ones(3, complex))


# ---------------------------------------------------------------------------
# fixed stepping against the closed-form propagator


def test_propagate_matches_exact_solution():
    gen = two_level_generator(PARAMS)
    plan = StepPlan(0.0, 10.0, dt=10.0 / 400)
    rec = propagate(gen, scheme_lookup("CF6:5Opt"), SU2Backend(), plan, UP)
    ref = two_level_exact(PARAMS, 10.0) @ UP
    assert np.linalg.norm(rec.final_state - ref) < 1e-11
    assert not rec.partial_final
    assert rec.times[0] == 0.0 and rec.times[-1] == 10.0
    assert rec.total_matvecs == 400 * 5


def test_propagate_nonzero_start_time():
    gen = two_level_generator(PARAMS)
    rec = propagate(gen, scheme_lookup("CF4:2"), SU2Backend(),
                    StepPlan(2.5, 7.5, dt=0.01), UP)
    ref = _exact_final(PARAMS, 2.5, 7.5)
    assert np.linalg.norm(rec.final_state - ref) < 1e-9


def test_record_stride_and_times():
    gen = two_level_generator(PARAMS)
    rec = propagate(gen, scheme_lookup("CF2:1"), SU2Backend(),
                    StepPlan(0.0, 1.0, dt=0.1, record_stride=3), UP)
    assert np.allclose(rec.times, [0.0, 0.3, 0.6, 0.9, 1.0])
    assert rec.states.shape == (5, 2)
    # recorded samples agree with the exact flow at recording accuracy
    for t, s in zip(rec.times, rec.states):
        assert np.linalg.norm(s - two_level_exact(PARAMS, t) @ UP) < 5e-3


def test_partial_final_step_flagged_and_correct():
    gen = two_level_generator(PARAMS)
    rec = propagate(gen, scheme_lookup("CF4:2"), SU2Backend(),
                    StepPlan(0.0, 1.05, dt=0.1), UP)
    assert rec.partial_final
    assert rec.times[-1] == 1.05
    assert abs(rec.dts.sum() - 1.05) < 1e-14
    ref = two_level_exact(PARAMS, 1.05) @ UP
    assert np.linalg.norm(rec.final_state - ref) < 1e-6


@pytest.mark.parametrize(
    "name,dts,slope_lo,slope_hi",
    [
        ("CF2:1", (0.1, 0.05, 0.025), 1.8, 2.2),
        ("CF4:3Opt", (0.2, 0.1, 0.05), 3.7, 4.3),
        ("CF6:5", (0.4, 0.2, 0.1), 5.6, 6.4),
    ],
)
def test_convergence_order(name, dts, slope_lo, slope_hi):
    gen = two_level_generator(PARAMS)
    ref = two_level_exact(PARAMS, 4.0) @ UP
    errs = []
    for dt in dts:
        rec = propagate(gen, scheme_lookup(name), SU2Backend(),
                        StepPlan(0.0, 4.0, dt=dt), UP)
        errs.append(np.linalg.norm(rec.final_state - ref))
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    assert slope_lo < slope < slope_hi


def test_reversibility_of_symmetric_steps():
    from cfet.schemes import step

    gen = two_level_generator(PARAMS)
    v = UP.copy()
    for name in ("CF2:1", "CF4:2", "CF6:5Opt", "CF8:11"):
        scheme = scheme_lookup(name)
        fwd = step(scheme, gen, 0.3, 0.25, v, SU2Backend())
        back = step(scheme, gen, 0.55, -0.25, fwd, SU2Backend())
        assert np.linalg.norm(back - v) < 1e-13, name


# ---------------------------------------------------------------------------
# adaptive stepping


def test_adaptive_meets_target():
    gen = two_level_generator(PARAMS)
    target = 1e-8
    plan = StepPlan(0.0, 10.0, target=target, macro_steps=16)
    rec = propagate(gen, scheme_lookup("CF4:2"), SU2Backend(), plan, UP)
    ref = two_level_exact(PARAMS, 10.0) @ UP
    err = np.linalg.norm(rec.final_state - ref)
    assert err < 10 * target  # safety-factor headroom, not a hard bound
    assert rec.dts is not None and abs(rec.dts.sum() - 10.0) < 1e-12


def test_adaptive_uses_fewer_steps_at_loose_target():
    gen = two_level_generator(PARAMS)
    tight = propagate(gen, scheme_lookup("CF4:2"), SU2Backend(),
                      StepPlan(0.0, 10.0, target=1e-10), UP)
    loose = propagate(gen, scheme_lookup("CF4:2"), SU2Backend(),
                      StepPlan(0.0, 10.0, target=1e-5), UP)
    assert len(loose.dts) < len(tight.dts)


# ---------------------------------------------------------------------------
# error analytics


def test_error_constant_estimate_predicts_error():
    gen = two_level_generator(PARAMS)
    scheme = scheme_lookup("CF4:2")
    est = estimate_error_constant(gen, scheme, SU2Backend(),
                                  (0.0, 8.0), 0.05, 0.025, UP)
    assert est.reliable and est.c > 0
    # prediction eps = c*T*dt^N vs a measured run
    dt = 0.04
    rec = propagate(gen, scheme, SU2Backend(), StepPlan(0.0, 8.0, dt=dt), UP)
    ref = two_level_exact(PARAMS, 8.0) @ UP
    measured = np.linalg.norm(rec.final_state - ref)
    predicted = est.c * 8.0 * dt**4
    assert 0.2 < measured / predicted < 5.0


def test_error_constant_floor_flagged():
    gen = two_level_generator(PARAMS)
    est = estimate_error_constant(gen, scheme_lookup("CF8:11"), SU2Backend(),
                                  (0.0, 1.0), 0.1, 0.05, UP)
    # an 8th-order scheme at these steps is at round-off: flagged
    assert not est.reliable


def test_error_constant_requires_distinct_steps():
    gen = two_level_generator(PARAMS)
    with pytest.raises(StepperError):
        estimate_error_constant(gen, scheme_lookup("CF2:1"), SU2Backend(),
                                (0.0, 1.0), 0.1, 0.1, UP)


def test_effective_constant_formulas():
    assert effective_error_constant(1, 16.0, 4) == 2.0
    assert empirical_effective_constant(2, 0.1, 1e-8, 10.0, 4) == pytest.approx(
        20 * (1e-9) ** 0.25
    )
    with pytest.raises(StepperError):
        effective_error_constant(1, -1.0, 4)


def test_crossover_threshold_formula():
    # equal effective constants cross at eps/T = 1
    assert crossover_threshold(2, 0.5, 4, 0.5) == 1.0
    # the exponent N1*N2/(N2-N1)
    assert crossover_threshold(2, 1.0, 4, 2.0) == pytest.approx(0.5**4)
    with pytest.raises(StepperError):
        crossover_threshold(4, 1.0, 2, 1.0)


def test_frobenius_error_normalization():
    u = np.eye(3, dtype=complex)
    v = np.zeros((3, 3), dtype=complex)
    # ||U - 0||_F^2 = 3, normalized by L=3 -> 1
    assert frobenius_error(u, v) == pytest.approx(1.0)
    with pytest.raises(StepperError):
        frobenius_error(np.eye(2), np.eye(3))


# ---------------------------------------------------------------------------
# interaction picture


def test_interaction_picture_strips_diagonal():
    p = TwoLevelParams(delta=1.0, v=0.4, omega=1.0)
    gen = two_level_generator(p)
    d = np.array([-1j * p.delta, 1j * p.delta])
    ip = interaction_picture(gen, d)
    b = ip.sample(1.3)
    assert abs(b[0, 0]) == 0 and abs(b[1, 1]) == 0
    # off-diagonals keep their magnitude, only the phase rotates
    assert abs(abs(b[0, 1]) - p.v) < 1e-14


def test_interaction_picture_apply_matches_sample():
    p = TwoLevelParams(delta=0.7, v=0.3, omega=0.5)
    ip = interaction_picture(two_level_generator(p), np.array([-0.7j, 0.7j]))
    rng = np.random.default_rng(0)
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    for t in (0.0, 0.9, 2.7):
        assert np.allclose(ip.apply(t, v), ip.sample(t) @ v, atol=1e-13)


def test_interaction_picture_propagation_round_trip():
    # propagating in the rotating frame and mapping back must agree with
    # the lab-frame propagation
    p = TwoLevelParams(delta=1.0, v=0.4, omega=0.9)
    gen = two_level_generator(p)
    d = np.array([-1j * p.delta, 1j * p.delta])
    ip = InteractionPictureGenerator(gen, d)
    T = 6.0
    plan = StepPlan(0.0, T, dt=T / 600)
    lab = propagate(gen, scheme_lookup("CF6:5Opt"), SU2Backend(), plan, UP)
    rot = propagate(ip, scheme_lookup("CF6:5Opt"), DenseBackend(), plan,
                    ip.from_lab(0.0, UP))
    back = ip.to_lab(T, rot.final_state)
    assert np.linalg.norm(back - lab.final_state) < 1e-10
    ref = two_level_exact(p, T) @ UP
    assert np.linalg.norm(back - ref) < 1e-9


def test_interaction_picture_rejects_nondiagonal():
    gen = two_level_generator(PARAMS)
    with pytest.raises(StepperError):
        InteractionPictureGenerator(gen, np.array([[0.0, 1.0], [1.0, 0.0]]))
    with pytest.raises(StepperError):
        InteractionPictureGenerator(gen, np.zeros(3))
