import numpy as np
import pytest

from mcfsurgery.errors import CflViolation, PreconditionError
from mcfsurgery.initial_data import REFERENCE_DUMBBELL, Sphere, build_initial
from mcfsurgery.profile import DomainSlice, Endpoint, ProfileCurve, is_two_convex
from mcfsurgery.smooth_mcf import (FlowSettings, FlowState, StopReason, cfl_bound, evolve_until,
                                   extinction_time, step)


def open_cylinder(r=0.5, half=2.0, dx=0.005, n=3):
    xs = np.arange(-half, half + dx / 2, dx)
    c = ProfileCurve.from_radii(n, xs, np.full(len(xs), r), Endpoint.OPEN, Endpoint.OPEN)
    return DomainSlice([c], 0.0)


def sphere_state(R=1.0, dx=0.005, n=3):
    return FlowState.from_slice(build_initial(Sphere(R), n, dx))


def test_sphere_radius_at_t01():
    st, why = evolve_until(sphere_state(), np.inf, 0.1)
    assert why is StopReason.REACHED_T_END
    R = st.slice.components[0].us.max()
    assert R == pytest.approx(np.sqrt(0.4), rel=0.01)


def test_cylinder_radius_at_t005():
    st, why = evolve_until(FlowState.from_slice(open_cylinder()), np.inf, 0.05)
    assert why is StopReason.REACHED_T_END
    assert st.slice.components[0].us.mean() == pytest.approx(np.sqrt(0.05), rel=0.01)


def test_zero_step_is_identity():
    st = sphere_state(dx=0.02)
    out = step(st, 0.0)
    assert np.array_equal(out.slice.components[0].ws, st.slice.components[0].ws)
    assert out.time == st.time


def test_cfl_violation():
    st = sphere_state(dx=0.02)
    with pytest.raises(CflViolation):
        step(st, 10 * cfl_bound(st.slice))


def test_sphere_stops_at_trigger():
    st, why = evolve_until(sphere_state(), 30.0, 1.0)
    assert why is StopReason.REACHED_H
    assert 30.0 <= st.max_mean_curvature <= 30.0 * 1.005
    assert st.slice.components[0].us.max() == pytest.approx(0.1, rel=0.01)
    assert st.time == pytest.approx(0.99 / 6, rel=0.01)


def test_dumbbell_triggers_before_pinch(lsf_pinch_time):
    st0 = FlowState.from_slice(build_initial(REFERENCE_DUMBBELL, 3, 0.005))
    st, why = evolve_until(st0, 60.0, 1.0)
    assert why is StopReason.REACHED_H
    assert st.time < lsf_pinch_time


def test_precondition():
    st = sphere_state(dx=0.02)
    with pytest.raises(PreconditionError):
        evolve_until(st, 2.0, 1.0)


@pytest.mark.parametrize("R,n,T", [(1.0, 3, 1 / 6), (0.5, 3, 1 / 24), (1.0, 4, 1 / 8)])
def test_extinction_time(R, n, T):
    s = build_initial(Sphere(R), n, 0.01 * R)
    assert extinction_time(s) == pytest.approx(T, rel=0.02)


def test_recording_cadence():
    rec = []
    evolve_until(sphere_state(dx=0.02), np.inf, 0.01, rec, FlowSettings(record_interval=0.001))
    t = np.array([s.time for s in rec])
    assert np.allclose(t, 0.001 * np.arange(1, 11), atol=1e-12)


def test_two_convexity_preserved():
    dx = 0.01
    rec = []
    st = FlowState.from_slice(build_initial(REFERENCE_DUMBBELL, 3, dx))
    evolve_until(st, 40.0, 1.0, rec, FlowSettings(record_interval=2e-4))
    assert len(rec) > 10
    for s in rec:
        for c in s.components:
            # margin >= -O(dx) relative to the local curvature scale
            assert is_two_convex(c, tol=dx * 40.0).ok


def test_disjoint_spheres_separate():
    # two spheres side by side evolve independently; the gap only grows
    a = build_initial(Sphere(0.5), 3, 0.01).components[0]
    b = build_initial(Sphere(0.3), 3, 0.01).components[0]
    b = ProfileCurve(3, b.xs + 1.0, b.ws)
    st = FlowState.from_slice(DomainSlice([a, b], 0.0))
    rec = []
    evolve_until(st, np.inf, 0.014, rec, FlowSettings(record_interval=0.001))
    gaps = [s.components[1].tips[0] - s.components[0].tips[1] for s in rec]
    assert np.all(np.diff(gaps) >= -0.01)


def test_exact_solution_errors_bounded_by_dx():
    # the lifted scheme reproduces spheres up to round-off, far below C dx
    for dx in (0.02, 0.01):
        st, _ = evolve_until(sphere_state(dx=dx), np.inf, 0.1)
        err = abs(st.slice.components[0].us.max() - np.sqrt(0.4))
        assert err <= dx
