"""Property tests for the invariants of every module."""
import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from mcfsurgery.errors import NotTwoConvex
from mcfsurgery.harness import depth_points
from mcfsurgery.initial_data import REFERENCE_DUMBBELL, CappedCylinder, Dumbbell, Sphere, build_initial
from mcfsurgery.level_set import GridSpec, compute_t_epsilon, evolve_lsf, signed_distance_init
from mcfsurgery.profile import (DomainSlice, Endpoint, ProfileCurve, curvature_profile,
                                distance_to_boundary, is_two_convex)
from mcfsurgery.smooth_mcf import FlowSettings, FlowState, evolve_until
from mcfsurgery.spacetime import (Provenance, SpaceTimeTrack, contains_track, hausdorff_distance,
                                  shift_track)
from mcfsurgery.surgery import SurgeryConfig, h0_threshold

SLOW = settings(max_examples=6, deadline=None, suppress_health_check=[HealthCheck.too_slow])
FAST = settings(max_examples=40, deadline=None)

DUMBBELL_02 = build_initial(REFERENCE_DUMBBELL, 3, 0.02)


def ball(R, center=0.0, t=0.0, dx=0.02):
    c = build_initial(Sphere(R), 3, dx).components[0]
    return DomainSlice([ProfileCurve(3, c.xs + center, c.ws)], t)


points = st.tuples(st.floats(-4, 4), st.floats(0, 2))


@FAST
@given(points, points)
def test_distance_is_1_lipschitz(p, q):
    d = distance_to_boundary(p, DUMBBELL_02) - distance_to_boundary(q, DUMBBELL_02)
    assert abs(d) <= np.hypot(p[0] - q[0], p[1] - q[1]) + 1e-12


@FAST
@given(st.floats(0.3, 2.0), st.floats(-0.02, 0.02))
def test_two_convex_criterion_matches_closed_form(a, c):
    # u = a + c cos(k x) has zero slope at both open (mirrored) ends
    L = 0.2
    k = np.pi / L
    xs = np.linspace(-L, L, 81)
    u, up, upp = a + c * np.cos(k * xs), -c * k * np.sin(k * xs), -c * k * k * np.cos(k * xs)
    kax = -upp / (1 + up**2) ** 1.5
    krot = 1 / (u * np.sqrt(1 + up**2))
    margin = np.where(kax < krot, kax + krot, 2 * krot).min()
    assume(abs(margin) > 0.2)
    got = is_two_convex(ProfileCurve.from_radii(3, xs, u, Endpoint.OPEN, Endpoint.OPEN))
    assert got.ok == (margin > 0)


def random_track(draw_radii, times):
    return SpaceTimeTrack([ball(r, c, t) for (r, c), t in zip(draw_radii, times)])


track_specs = st.lists(st.tuples(st.floats(0.3, 1.0), st.floats(-0.5, 0.5)), min_size=1, max_size=3)


@SLOW
@given(track_specs, track_specs, track_specs)
def test_hausdorff_is_a_metric(a, b, c):
    tracks = [random_track(x, 0.05 * np.arange(len(x))) for x in (a, b, c)]
    h = 0.01
    d = {(i, j): hausdorff_distance(tracks[i], tracks[j], h).hausdorff
         for i in range(3) for j in range(3)}
    for i in range(3):
        assert d[i, i] == 0.0
        for j in range(3):
            assert d[i, j] == d[j, i]
            for k in range(3):
                assert d[i, k] <= d[i, j] + d[j, k] + 1e-12


@FAST
@given(st.floats(0.2, 1.2), st.floats(0.2, 1.2), st.floats(0.2, 1.2),
       st.floats(0, 0.1), st.floats(0, 0.1))
def test_containment_transitive(ra, rb, rc, t1, t2):
    A, B, C = (SpaceTimeTrack([ball(r)]) for r in (ra, rb, rc))
    if contains_track(A, B, t1).ok and contains_track(B, C, t2).ok:
        assert contains_track(A, C, t1 + t2).ok


@FAST
@given(st.integers(0, 20), st.integers(0, 20))
def test_shift_composition(i, j):
    a = SpaceTimeTrack([ball(1.0, t=k / 64) for k in range(32)])
    x, y = i / 64, j / 64
    twice, once = shift_track(shift_track(a, x), y), shift_track(a, x + y)
    assert np.array_equal(twice.times, once.times)
    assert [s.components for s in twice.slices] == [s.components for s in once.slices]


@FAST
@given(st.floats(0.01, 1.0), st.floats(0.1, 0.8), st.integers(2, 6))
def test_h0_scaling(eps, omega1, n):
    cfg = SurgeryConfig(100.0, omega1=omega1, omega2=max(0.9, omega1 + 0.05))
    h = h0_threshold(eps, cfg, n)
    assert h * eps * omega1 == pytest.approx(2 * n)
    assert h0_threshold(eps / 2, cfg, n) == pytest.approx(2 * h)


@SLOW
@given(st.floats(0.03, 0.1), st.floats(0.03, 0.1))
def test_t_epsilon_monotone(e1, e2):
    assume(abs(e1 - e2) > 0.02)
    s = build_initial(Sphere(1.0), 3, 0.02)
    g = GridSpec.around(s, 0.02)
    t1, t2 = compute_t_epsilon(s, e1, g), compute_t_epsilon(s, e2, g)
    assert (t1 < t2) == (e1 < e2)


@FAST
@given(st.sampled_from(["sphere", "tube"]), st.floats(0.05, 0.3), st.floats(0.2, 1.0))
def test_high_curvature_body_has_small_inradius(kind, r, L):
    # a body with mean curvature >= d everywhere holds no ball of radius n/d
    spec = Sphere(r) if kind == "sphere" else CappedCylinder(r, L)
    dx = r / 20
    s = build_initial(spec, 3, dx)
    d = float(curvature_profile(s.components[0]).mean[s.components[0].active].min())
    assert len(depth_points(s, dx, 3 / d + dx)) == 0


@SLOW
@given(st.floats(0.3, 0.6), st.floats(-0.3, 0.3))
def test_lsf_inclusion_monotone(r_in, shift):
    dx = 0.04
    outer = ball(1.0, dx=dx)
    assume(abs(shift) + r_in < 1.0 - 2 * dx)
    inner = ball(r_in, shift, dx=dx)
    g = GridSpec.around(outer, dx)
    times = 0.01 * np.arange(0, 6)
    tracks = []
    for s in (inner, outer):
        rec = []
        evolve_lsf(signed_distance_init(s, g), 0.05, rec, 3, times)
        tracks.append(SpaceTimeTrack(rec, Provenance.LEVEL_SET))
    assert contains_track(tracks[0], tracks[1], dx).ok


@SLOW
@given(st.floats(0.3, 0.6), st.floats(0.3, 0.6), st.floats(0.1, 0.5))
def test_lsf_disjoint_bodies_stay_disjoint(ra, rb, gap):
    dx = 0.04
    a = ball(ra, dx=dx).components[0]
    b = ball(rb, ra + gap + rb, dx=dx).components[0]
    s = DomainSlice([a, b], 0.0)
    rec = []
    evolve_lsf(signed_distance_init(s, GridSpec.around(s, dx)), 0.03, rec, 3, 0.005 * np.arange(7))
    for sl in rec:
        tips = sorted(c.tips for c in sl.components)
        assert all(q[0] > p[1] for p, q in zip(tips, tips[1:]))


@SLOW
@given(st.floats(0.1, 0.25), st.floats(0.5, 1.5))
def test_smooth_flow_keeps_two_convexity(r_neck, L_neck):
    dx = 0.01
    try:
        s = build_initial(Dumbbell(1.0, r_neck, L_neck, 0.3), 3, dx)
    except NotTwoConvex:
        assume(False)
    rec = []
    st0 = FlowState.from_slice(s)
    assume(st0.max_mean_curvature < 0.9 * 30.0)
    evolve_until(st0, 30.0, 1.0, rec, FlowSettings(record_interval=5e-4))
    for sl in rec:
        for c in sl.components:
            assert is_two_convex(c, tol=dx * 40.0).ok
