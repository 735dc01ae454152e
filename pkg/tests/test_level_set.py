import numpy as np
import pytest

from mcfsurgery.errors import CflViolation, DomainTooSmall, NotReached, ValidationError
from mcfsurgery.initial_data import REFERENCE_DUMBBELL, Sphere, build_initial
from mcfsurgery.level_set import (GridSpec, LevelSetField, LsfSettings, cfl_limit, compute_t_epsilon,
                                  evolve_lsf, extinction_time_lsf, lsf_step, reinitialize,
                                  signed_distance_init, sublevel_slice)
from mcfsurgery.profile import DomainSlice, ProfileCurve, brute_force_polyline_distance
from mcfsurgery.spacetime import (Provenance, ShrinkingSphere, SpaceTimeTrack, contains_track,
                                  distance_series, is_nondecreasing)


def sphere_field(R=1.0, dx=0.01, n=3):
    s = build_initial(Sphere(R), n, dx)
    return signed_distance_init(s, GridSpec.around(s, dx))


def zero_radius(f, n=3):
    s = sublevel_slice(f, n)
    return float(max(c.us.max() for c in s.components))


def lsf_track(f, t_end, times, n=3):
    rec = []
    evolve_lsf(f, t_end, rec, n, times)
    return SpaceTimeTrack(rec, Provenance.LEVEL_SET)


def test_init_unit_ball():
    s = build_initial(Sphere(1.0), 3, 0.01)
    g = GridSpec(-2.5, 2.5, 2.5, 0.05)
    f = signed_distance_init(s, g)
    i0 = int(round(2.5 / 0.05))
    poly = s.components[0].polyline()
    for i, sign in ((i0, -1.0), (i0 + 40, 1.0)):
        p = np.array([g.xs[i], 0.0])
        # exact for the polygon, which sits within dx^2 of the circle
        assert f.phi[i, 0] == pytest.approx(sign * brute_force_polyline_distance(p, poly), abs=1e-12)
        assert f.phi[i, 0] == pytest.approx(sign, abs=0.01**2)


def test_init_matches_segment_oracle():
    s = build_initial(REFERENCE_DUMBBELL, 3, 0.01)
    g = GridSpec.around(s, 0.04)
    f = signed_distance_init(s, g)
    poly = s.components[0].polyline()
    rng = np.random.default_rng(0)
    for i, j in zip(rng.integers(0, g.nx, 40), rng.integers(0, g.nr, 40)):
        p = np.array([g.xs[i], g.rs[j]])
        assert abs(f.phi[i, j]) == pytest.approx(brute_force_polyline_distance(p, poly), abs=1e-12)


def test_domain_too_small():
    s = build_initial(Sphere(1.0), 3, 0.01)
    with pytest.raises(DomainTooSmall):
        signed_distance_init(s, GridSpec(-1.05, 1.05, 1.05, 0.01))


def test_sphere_radius_at_t01():
    f = evolve_lsf(sphere_field(dx=0.01), 0.1)
    assert f.time == pytest.approx(0.1, abs=1e-14)
    assert zero_radius(f) == pytest.approx(np.sqrt(0.4), rel=0.02)


def test_zero_step_and_cfl():
    f = sphere_field(dx=0.04)
    assert np.array_equal(lsf_step(f, 0.0).phi, f.phi)
    with pytest.raises(CflViolation):
        lsf_step(f, 2 * cfl_limit(f.grid))


def sphere_errors(dxs, t=0.1):
    return np.array([abs(zero_radius(evolve_lsf(sphere_field(dx=dx), t)) - np.sqrt(1 - 6 * t))
                     for dx in dxs])


def test_self_convergence_order_at_least_one():
    e = sphere_errors((0.04, 0.02, 0.01))
    print("sphere radius errors", e)
    assert np.all(np.log2(e[:-1] / e[1:]) >= 1.0)


def test_halving_dx_halves_error():
    # first-order ratio band; see the ledger, the scheme measures ~3-4 here
    e = sphere_errors((0.04, 0.02, 0.01))
    ratios = e[:-1] / e[1:]
    print("error ratios", ratios)
    assert np.all((ratios >= 1.6) & (ratios <= 2.6))


def test_sphere_extinction():
    T = extinction_time_lsf(sphere_field(dx=0.01))
    assert T == pytest.approx(1 / 6, rel=0.02)


def test_sigma_insensitive():
    radii = [zero_radius(evolve_lsf(sphere_field(dx=0.02), 0.05, settings=LsfSettings(sigma=s)))
             for s in (1e-4, 1e-6, 1e-8)]
    assert np.ptp(radii) < 1e-6


def test_disjoint_bodies_stay_disjoint():
    dx = 0.02
    a = build_initial(Sphere(0.5), 3, dx).components[0]
    b = build_initial(Sphere(0.35), 3, dx).components[0]
    b = ProfileCurve(3, b.xs + 1.0, b.ws)
    s = DomainSlice([a, b], 0.0)
    f = signed_distance_init(s, GridSpec.around(s, dx))
    rec = []
    evolve_lsf(f, 0.04, rec, 3, 0.002 * np.arange(1, 21))
    for sl in rec:
        tips = sorted(c.tips for c in sl.components)
        for (_, hi), (lo, _) in zip(tips[:-1], tips[1:]):
            assert lo - hi > 0.1
    assert len(rec[0].components) == 2


def ellipse_field(a=1.0, b=0.6, dx=0.02):
    # signed distance to the ellipse x^2/a^2 + r^2/b^2 = 1 by Newton on the foot point angle
    g = GridSpec(-1.6, 1.6, 1.2, dx)
    X, R = np.meshgrid(g.xs, g.rs, indexing="ij")
    th = np.arctan2(a * R, b * X)
    for _ in range(60):
        c, s_ = np.cos(th), np.sin(th)
        fx, fr = X - a * c, R - b * s_
        f1 = fx * a * s_ - fr * b * c
        f2 = a * a * s_ * s_ + b * b * c * c + fx * a * c + fr * b * s_
        th = th - f1 / f2
    d = np.hypot(X - a * np.cos(th), R - b * np.sin(th))
    sign = np.where((X / a) ** 2 + (R / b) ** 2 < 1, -1.0, 1.0)
    return LevelSetField(g, sign * d)


def test_reinit_keeps_signed_distance():
    X, R = np.meshgrid(*(GridSpec(-1.6, 1.6, 1.6, 0.02).xs, GridSpec(-1.6, 1.6, 1.6, 0.02).rs),
                       indexing="ij")
    f = LevelSetField(GridSpec(-1.6, 1.6, 1.6, 0.02), np.hypot(X, R) - 1.0)
    g = reinitialize(f)
    band = np.abs(f.phi) < f.band - 2 * f.grid.dx
    assert np.abs(g.phi - f.phi)[band].max() < 1e-6


def test_reinit_idempotent():
    once = reinitialize(ellipse_field())
    twice = reinitialize(once)
    band = np.abs(once.phi) < once.band - 2 * once.grid.dx
    assert np.abs(twice.phi - once.phi)[band].max() < 1e-6


def test_reinit_of_scaled_field_keeps_zero_set():
    dx = 0.02
    s = build_initial(REFERENCE_DUMBBELL, 3, dx)
    f = signed_distance_init(s, GridSpec.around(s, dx))
    scaled = LevelSetField(f.grid, 5 * f.phi, f.time, f.band)
    g = reinitialize(scaled)
    # marker points on the zero set of f: phi of the reinitialised field there
    markers = sublevel_slice(f).components[0].polyline()
    xs, rs = f.grid.xs, f.grid.rs
    from scipy.interpolate import RegularGridInterpolator
    interp = RegularGridInterpolator((xs, rs), g.phi, method="cubic")
    assert np.abs(interp(markers)).max() <= 0.1 * dx


def test_t_epsilon_sphere():
    s = build_initial(Sphere(1.0), 3, 0.01)
    g = GridSpec.around(s, 0.01)
    t1 = compute_t_epsilon(s, 0.1, g)
    t2 = compute_t_epsilon(s, 0.05, g)
    assert t1 == pytest.approx((1 - 0.81) / 6, rel=0.05)
    assert t2 == pytest.approx((1 - 0.95**2) / 6, rel=0.05)
    assert t2 < t1


def test_t_epsilon_errors():
    s = build_initial(Sphere(0.5), 3, 0.02)
    g = GridSpec.around(s, 0.02)
    with pytest.raises(ValidationError):
        compute_t_epsilon(s, 0.0, g)
    with pytest.raises(NotReached):
        compute_t_epsilon(s, 2.0, g)


def test_avoidance_against_exact_sphere():
    dx = 0.02
    f = sphere_field(dx=dx)
    tr = lsf_track(f, 0.16, 0.005 * np.arange(0, 33))
    ok, drop = is_nondecreasing(distance_series(tr, ShrinkingSphere(5.0, 3.0)), 2 * dx)
    assert ok, drop


def test_inclusion_monotone():
    dx = 0.02
    outer = build_initial(REFERENCE_DUMBBELL, 3, dx)
    inner = build_initial(Sphere(0.7), 3, dx).components[0]
    inner = ProfileCurve(3, inner.xs + REFERENCE_DUMBBELL.bell_center, inner.ws)
    inner = DomainSlice([inner], 0.0)
    g = GridSpec.around(outer, dx)
    times = 0.004 * np.arange(0, 21)
    a = lsf_track(signed_distance_init(inner, g), 0.08, times)
    b = lsf_track(signed_distance_init(outer, g), 0.08, times)
    c = contains_track(a, b, dx)
    assert c.ok, c


def test_dumbbell_pinches_then_vanishes(khat):
    counts = [len(s.components) for s in khat.slices]
    series = [c for i, c in enumerate(counts) if i == 0 or c != counts[i - 1]]
    assert series == [1, 2, 0]


def test_recorded_slices_stay_compact(khat):
    g = khat.meta["grid"]
    for s in khat.slices:
        for c in s.components:
            lo, hi = c.tips
            assert g["x0"] < lo and hi < g["x1"] and c.us.max() < g["r1"]
