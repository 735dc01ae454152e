"""Smooth mean curvature flow of profile graphs between surgery times.

The flow is advanced in the lifted variable w = u**2::

    w_t = (4 w w'' - 2 w'^2) / (4 w + w'^2) - 2 (n - 1)

which is u_t = u''/(1 + u'^2) - (n - 1)/u multiplied by 2u.  The reaction
term is constant in w, and closing points recede by themselves when the
node next to the axis turns nonpositive.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from numba import njit
from scipy.interpolate import PchipInterpolator

from .errors import CflViolation, NegativeRadius, NotConvex, PreconditionError, Stalled
from .profile import DomainSlice, Endpoint, ProfileCurve, curvature_profile, node_area

log = logging.getLogger(__name__)


class StopReason(str, Enum):
    REACHED_H = "reached_h"
    EXTINCT = "extinct"
    REACHED_T_END = "reached_t_end"
    STALLED = "stalled"


@dataclass(frozen=True)
class FlowSettings:
    cfl: float = 0.2
    dt_min: float = 1e-14
    max_bisections: int = 40
    crossing_tol: float = 0.005
    # components with fewer positive nodes are resampled at half spacing
    min_active: int = 16
    max_refinements: int = 8
    record_interval: float | None = None


@dataclass(frozen=True, eq=False)
class FlowState:
    slice: DomainSlice
    max_mean_curvature: float
    dt_last: float = 0.0
    # smallest spacing a component may be refined to
    dx_floor: float = 0.0

    @property
    def time(self) -> float:
        return self.slice.time

    @classmethod
    def from_slice(cls, s: DomainSlice, max_refinements: int = FlowSettings.max_refinements):
        dx = min((c.dx for c in s.components), default=0.0)
        return cls(s, slice_max_mean(s), 0.0, dx / 2**max_refinements)


def slice_max_mean(s: DomainSlice) -> float:
    return max((float(curvature_profile(c).mean.max()) for c in s.components), default=0.0)


@njit(cache=True)
def _rate(ws, dx, n, lo, hi, left_open, right_open):
    m = len(ws)
    out = np.zeros(m)
    for i in range(lo, hi):
        if i == 0:
            wm = ws[1] if left_open else ws[0]
        else:
            wm = ws[i - 1]
        if i == m - 1:
            wp_ = ws[m - 2] if right_open else ws[m - 1]
        else:
            wp_ = ws[i + 1]
        w = ws[i]
        d1 = (wp_ - wm) / (2 * dx)
        d2 = (wp_ - 2 * w + wm) / (dx * dx)
        D = 4 * w + d1 * d1
        out[i] = (4 * w * d2 - 2 * d1 * d1) / D - 2 * (n - 1)
    return out


def lifted_rate(c: ProfileCurve) -> np.ndarray:
    """w_t at every positive node (zero at closing nodes)."""
    s = c.active
    return _rate(c.ws, c.dx, c.n, s.start, s.stop,
                 c.left is Endpoint.OPEN, c.right is Endpoint.OPEN)


def cfl_bound(s: DomainSlice, cfl: float = 0.2) -> float:
    """Largest admissible explicit step: cfl * min(dx^2, u_min^2 / (2 (n-1)))."""
    bound = np.inf
    for c in s.components:
        a = c.active
        lo = a.start + (1 if c.left is Endpoint.ON_AXIS else 0)
        hi = a.stop - (1 if c.right is Endpoint.ON_AXIS else 0)
        # the node adjacent to an axis closure may cross zero: that is the tip receding
        w_min = c.ws[lo:hi].min() if hi > lo else np.inf
        bound = min(bound, cfl * min(c.dx**2, w_min / (2 * max(c.n - 1, 1))))
    return float(bound)


def _extrapolate_closing(ws, left, right):
    if left is Endpoint.ON_AXIS:
        ws[0] = min(3 * ws[1] - 3 * ws[2] + ws[3], 0.0)
    if right is Endpoint.ON_AXIS:
        ws[-1] = min(3 * ws[-2] - 3 * ws[-3] + ws[-4], 0.0)


def _renormalize(n, xs, ws, left, right):
    """Trim nonpositive nodes at axis ends and rebuild the curve.

    Returns None when fewer than three positive nodes remain.
    """
    pos = np.flatnonzero(ws > 0)
    if len(pos) < 3:
        return None
    lo = pos[0] - 1 if left is Endpoint.ON_AXIS else 0
    hi = pos[-1] + 1 if right is Endpoint.ON_AXIS else len(ws) - 1
    if lo < 0 or hi >= len(ws):
        raise NegativeRadius("radius reached zero at a truncated end")
    w = ws[lo : hi + 1].copy()
    a = 1 if left is Endpoint.ON_AXIS else 0
    b = len(w) - (1 if right is Endpoint.ON_AXIS else 0)
    if np.any(w[a:b] <= 0):
        bad = lo + a + int(np.argmax(w[a:b] <= 0))
        raise NegativeRadius(f"interior radius reached zero near x={xs[bad]:.6g}")
    _extrapolate_closing(w, left, right)
    return ProfileCurve(n, xs[lo : hi + 1], w, left, right)


def refine(c: ProfileCurve) -> ProfileCurve:
    """Resample at half spacing with monotone cubic interpolation of w."""
    xs = c.xs
    fine = np.linspace(xs[0], xs[-1], 2 * len(xs) - 1)
    ws = PchipInterpolator(xs, c.ws)(fine)
    if c.left is Endpoint.ON_AXIS:
        ws[0] = min(ws[0], 0.0)
    if c.right is Endpoint.ON_AXIS:
        ws[-1] = min(ws[-1], 0.0)
    out = _renormalize(c.n, fine, ws, c.left, c.right)
    return out if out is not None else c


def _advance_component(c: ProfileCurve, dt: float):
    ws = c.ws + dt * lifted_rate(c)
    return _renormalize(c.n, c.xs, ws, c.left, c.right)


def step(state: FlowState, dt: float, settings: FlowSettings = FlowSettings()) -> FlowState:
    """One explicit Euler step of size ``dt`` for every component."""
    if dt < 0:
        raise ValueError("negative time step")
    if dt == 0:
        return state
    bound = cfl_bound(state.slice, settings.cfl)
    if dt > bound * (1 + 1e-9):
        raise CflViolation(f"dt={dt:.3e} exceeds CFL bound {bound:.3e}")
    comps = []
    for c in state.slice.components:
        nc = _advance_component(c, dt)
        if nc is None:
            continue
        while nc.n_active < settings.min_active and nc.dx > state.dx_floor * (1 + 1e-9):
            nc = refine(nc)
        comps.append(nc)
    s = DomainSlice(comps, state.slice.time + dt)
    return FlowState(s, slice_max_mean(s), dt, state.dx_floor)


def evolve_until(state: FlowState, H: float, t_end: float, recorder=None,
                 settings: FlowSettings = FlowSettings()):
    """Run the smooth flow until max mean curvature reaches ``H``.

    Returns ``(state, reason)``.  On REACHED_H the returned state has
    max mean curvature in [H, H*(1 + crossing_tol)] unless the bisection
    budget ran out first.  ``recorder`` receives slices at multiples of
    ``settings.record_interval``.
    """
    if state.max_mean_curvature >= H:
        raise PreconditionError(
            f"max mean curvature {state.max_mean_curvature:.6g} already >= H={H:.6g}")
    interval = settings.record_interval
    next_rec = _next_record_time(state.time, interval)
    while True:
        if state.slice.empty:
            return state, StopReason.EXTINCT
        if state.time >= t_end:
            return state, StopReason.REACHED_T_END
        dt = cfl_bound(state.slice, settings.cfl)
        dt = min(dt, t_end - state.time)
        if next_rec is not None:
            dt = min(dt, next_rec - state.time)
        trial = None
        while trial is None:
            if dt < settings.dt_min:
                return state, StopReason.STALLED
            try:
                trial = step(state, dt, settings)
            except NegativeRadius:
                dt *= 0.5
        if trial.max_mean_curvature >= H:
            return _bisect_crossing(state, trial, dt, H, settings)
        state = trial
        if next_rec is not None and state.time >= next_rec - 1e-15:
            if recorder is not None:
                recorder.append(state.slice)
            next_rec = _next_record_time(state.time, interval)


def _next_record_time(t, interval):
    if not interval:
        return None
    k = np.floor(t / interval + 1e-9) + 1
    return float(k * interval)


def _bisect_crossing(state, trial, dt, H, settings):
    lo, hi = 0.0, dt
    best = trial
    for _ in range(settings.max_bisections):
        if best.max_mean_curvature <= H * (1 + settings.crossing_tol):
            break
        mid = 0.5 * (lo + hi)
        if mid - lo < settings.dt_min:
            return state, StopReason.STALLED
        s_mid = step(state, mid, settings)
        if s_mid.max_mean_curvature >= H:
            hi, best = mid, s_mid
        else:
            lo = mid
    return best, StopReason.REACHED_H


def extinction_time(initial: DomainSlice, settings: FlowSettings = FlowSettings()) -> float:
    """Time at which a single convex component shrinks below one grid cell."""
    if len(initial) != 1:
        raise NotConvex("extinction_time expects a single component")
    c0 = initial.components[0]
    k = curvature_profile(c0)
    if np.any(k.kappa_axial < -1e-9 * np.abs(k.mean).max()):
        raise NotConvex("initial component is not convex")
    cell = c0.dx**2
    state = FlowState.from_slice(initial, settings.max_refinements)
    state = replace(state, dx_floor=0.0)
    while True:
        if state.slice.empty or node_area(state.slice.components[0]) < cell:
            return state.time
        dt = cfl_bound(state.slice, settings.cfl)
        if dt < settings.dt_min:
            raise Stalled("time step underflow before extinction")
        try:
            state = step(state, dt, settings)
        except NegativeRadius:
            raise NotConvex("component pinched before extinction")
