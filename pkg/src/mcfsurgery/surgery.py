"""Surgery on profile graphs when the smooth flow reaches the trigger curvature.

High-curvature regions are the components of {H >= H1/2} that reach H2.
Each OPEN boundary of a region gets a standard surgery: a window around
the first slice with mean curvature H1 is removed and both cut ends are
closed by convex caps lying inside the removed tube.  Afterwards every
component whose minimum mean curvature is at least H1/2 is discarded.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import (CapCurvatureExceeded, NonpositiveEpsilon, NoTrigger,
                     SurgeryCapExceeded, ValidationError, WindowOutOfRange)
from .profile import DomainSlice, Endpoint, ProfileCurve, curvature_profile, split_samples
from .smooth_mcf import FlowState, slice_max_mean

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SurgeryConfig:
    H: float
    omega1: float = 0.5
    omega2: float = 0.9
    Lambda: float = 10.0
    max_surgeries: int = 64

    def __post_init__(self):
        if not self.H > 0:
            raise ValidationError(f"H must be positive, got {self.H}")
        if not (0 < self.omega1 < self.omega2 < 1):
            raise ValidationError("need 0 < omega1 < omega2 < 1")
        if self.Lambda < 10:
            raise ValidationError(f"Lambda must be >= 10, got {self.Lambda}")
        if self.max_surgeries < 1:
            raise ValidationError("max_surgeries must be positive")

    @property
    def H1(self) -> float:
        return self.omega1 * self.H

    @property
    def H2(self) -> float:
        return self.omega2 * self.H


class Topology(str, Enum):
    SPHERE_LIKE = "sphere_like"
    UNSUPPORTED = "unsupported"


@dataclass(frozen=True)
class SurgerySlice:
    """Where a standard surgery is centred, seen from one region boundary.

    ``side`` is +1 when the region lies at larger x than the boundary.
    """
    z0: float
    r_z0: float
    side: int
    fits: bool


@dataclass(frozen=True)
class NeckRegion:
    component: int
    a: float
    b: float
    boundary_count: int
    # node range of the region inside its component
    lo: int = field(default=0, repr=False)
    hi: int = field(default=0, repr=False)
    open_left: bool = False
    open_right: bool = False
    surgery_slices: tuple = ()
    whole_region: bool = False


@dataclass(frozen=True)
class Cap:
    component: int
    x_cut: float
    side: int
    radius: float
    k: float
    length: float
    max_mean: float


@dataclass(frozen=True)
class Discard:
    curve: ProfileCurve
    topology: Topology
    min_mean: float


@dataclass(frozen=True, eq=False)
class SurgeryEvent:
    time: float
    pre_slice: DomainSlice
    post_slice: DomainSlice
    regions: tuple
    cuts: tuple
    caps: tuple
    discarded: tuple
    H: float

    @property
    def standard_surgeries(self) -> int:
        return len(self.cuts)


def h0_threshold(epsilon: float, cfg: SurgeryConfig, n: int) -> float:
    """Smallest trigger curvature for which surgery keeps eps-balls: 2n/(eps omega1)."""
    if not epsilon > 0:
        raise NonpositiveEpsilon(f"epsilon must be positive, got {epsilon}")
    return 2 * n / (epsilon * cfg.omega1)


# -- detection ---------------------------------------------------------------


def find_high_curvature_regions(s: DomainSlice, cfg: SurgeryConfig) -> list[NeckRegion]:
    """Components of {H >= H1/2} that meet {H >= H2}, one list for the slice."""
    hmax = slice_max_mean(s)
    if hmax < cfg.H:
        raise NoTrigger(f"max mean curvature {hmax:.6g} is below H={cfg.H:.6g}")
    out = []
    for ci, c in enumerate(s.components):
        mean = curvature_profile(c).mean
        high = mean >= cfg.H1 / 2
        m = len(mean)
        i = 0
        while i < m:
            if not high[i]:
                i += 1
                continue
            j = i
            while j + 1 < m and high[j + 1]:
                j += 1
            if mean[i : j + 1].max() >= cfg.H2:
                out.append(_region(ci, c, i, j, m))
            i = j + 1
    return out


def _region(ci, c, i, j, m):
    lo_tip, hi_tip = c.tips
    # a run reaching the end node reaches the axis (or a truncation): no boundary there
    open_left = i > 0 and not (i == 1 and c.left is Endpoint.ON_AXIS)
    open_right = j < m - 1 and not (j == m - 2 and c.right is Endpoint.ON_AXIS)
    a = float(c.xs[i]) if open_left else lo_tip
    b = float(c.xs[j]) if open_right else hi_tip
    return NeckRegion(ci, a, b, int(open_left) + int(open_right), i, j, open_left, open_right)


def locate_surgery_slice(region: NeckRegion, s: DomainSlice, cfg: SurgeryConfig) -> list[SurgerySlice]:
    """First slice with mean curvature H1 walking inward from each OPEN boundary.

    ``fits`` records whether the window z0 +- 4 Lambda r_z0 lies strictly
    inside [a, b].
    """
    c = s.components[region.component]
    mean = curvature_profile(c).mean
    n = c.n
    out = []
    sides = []
    if region.open_left:
        sides.append((+1, range(region.lo, region.hi + 1)))
    if region.open_right:
        sides.append((-1, range(region.hi, region.lo - 1, -1)))
    for side, walk in sides:
        idx = next((i for i in walk if mean[i] >= cfg.H1), None)
        if idx is None:
            continue
        z0 = float(c.xs[idx])
        r = (n - 1) / float(mean[idx])
        half = 4 * cfg.Lambda * r
        fits = region.a < z0 - half and z0 + half < region.b
        out.append(SurgerySlice(z0, r, side, bool(fits)))
    return out


# -- caps --------------------------------------------------------------------


def _cap_values(A, B, k, s):
    return A + B * s - k * s * s


def _fit_cap(ws_pre, i0, step, dx, n_max, k0=1.0):
    """Conic cap w = A + B s - k s^2 grown from node i0 in direction ``step``.

    A and B match w and its slope at the cut (C^1).  k starts at k0 (a round
    cap when B = 0) and is raised until the cap lies under the old profile.
    Returns (k, values at nodes i0+step, i0+2 step, ...) ending with the first
    nonpositive value.
    """
    A = ws_pre[i0]
    B = (ws_pre[i0 + step] - ws_pre[i0 - step]) / (2 * dx)
    k = k0
    for _ in range(60):
        disc = B * B + 4 * k * A
        s_tip = (B + np.sqrt(disc)) / (2 * k)
        m = int(np.floor(s_tip / dx)) + 1
        # a tip just past a node closes on that node instead
        if m >= 2 and s_tip - dx * (m - 1) < 0.05 * dx:
            m -= 1
        if m > n_max:
            k *= 1.5
            continue
        s = dx * np.arange(1, m + 1)
        vals = _cap_values(A, B, k, s)
        pre = ws_pre[i0 + step * np.arange(1, m + 1)]
        inner = vals[:-1]
        bad = inner > pre[:-1]
        if not np.any(bad):
            vals[-1] = min(vals[-1], 0.0)
            return k, vals
        ss = s[:-1][bad]
        k = max(k * 1.01, float(np.max((A + B * ss - pre[:-1][bad]) / ss**2)) * 1.0001)
    raise CapCurvatureExceeded("could not fit a cap under the old profile")


def _cap_mean(n, dx, seg):
    """Max mean curvature over a cap given as [w before cut, w at cut, cap..., closing]."""
    if len(seg) < 5:
        seg = np.concatenate([[seg[0]] * (5 - len(seg)), seg])
    c = ProfileCurve(n, dx * np.arange(len(seg)), seg, Endpoint.OPEN, Endpoint.ON_AXIS)
    return float(curvature_profile(c).mean[-len(seg) + 1:].max())


@dataclass
class _Cut:
    lo: int   # last kept node on the left
    hi: int   # first kept node on the right
    whole_region: bool


def _apply_cuts(c: ProfileCurve, cuts, ci):
    """Remove node windows (lo, hi) and close each cut end with a cap.

    ``lo = -1`` or ``hi = len(xs)`` mark a window running to the end of the
    component: everything beyond the single cut is removed.
    """
    ws_pre = np.array(c.ws)
    ws = ws_pre.copy()
    m = len(ws)
    dx = c.dx
    caps = []
    for cut in sorted(cuts, key=lambda q: q.lo):
        ends = [(i0, st) for i0, st in ((cut.lo, +1), (cut.hi, -1)) if 0 <= i0 < m]
        room = min(cut.hi, m) - max(cut.lo, -1) - 1
        per_cap = room // len(ends)
        if per_cap < 2:
            raise WindowOutOfRange(f"cut window of {room} nodes is too short for its caps")
        ws[max(cut.lo, -1) + 1 : min(cut.hi, m)] = -1.0
        for i0, step in ends:
            k, vals = _fit_cap(ws_pre, i0, step, dx, per_cap)
            idx = i0 + step * np.arange(1, len(vals) + 1)
            ws[idx] = vals
            hm = _cap_mean(c.n, dx, np.concatenate([[ws_pre[i0 - step], ws_pre[i0]], vals]))
            caps.append(Cap(ci, float(c.xs[i0]), step, float(np.sqrt(ws_pre[i0])), float(k),
                            float(len(vals) * dx), hm))
    return split_samples(c.n, c.xs, ws), caps


def standard_surgery(s: DomainSlice, z0: float, r_z0: float, side: int, cfg: SurgeryConfig,
                     component: int = 0) -> DomainSlice:
    """Remove [z0 - 3 Lambda r_z0, z0 + 3 Lambda r_z0] and cap both ends."""
    c = s.components[component]
    cut = _window_cut(c, z0, 3 * cfg.Lambda * r_z0)
    pieces, caps = _apply_cuts(c, [cut], component)
    for cap in caps:
        if cap.max_mean > cfg.H2:
            raise CapCurvatureExceeded(f"cap mean curvature {cap.max_mean:.6g} exceeds omega2 H = {cfg.H2:.6g}")
    comps = list(s.components[:component]) + pieces + list(s.components[component + 1:])
    return DomainSlice(comps, s.time)


def _window_cut(c, z0, half):
    lo_x, hi_x = z0 - half, z0 + half
    i_lo = int(np.floor((lo_x - c.xs[0]) / c.dx + 1e-9))
    i_hi = int(np.ceil((hi_x - c.xs[0]) / c.dx - 1e-9))
    a = c.active
    if i_lo < a.start + 1 or i_hi > a.stop - 2:
        raise WindowOutOfRange(f"cut window [{lo_x:.6g}, {hi_x:.6g}] leaves the component")
    return _Cut(i_lo, i_hi, False)


def _boundary_cut(c, region: NeckRegion, side: int):
    """Cut at a region boundary (used when the 4 Lambda window does not fit).

    The kept outer piece ends at the boundary node.  The window is long
    enough for the two caps, each about one local radius long; when that
    would leave too little of the region for a piece of its own, the
    window runs to the end of the component.
    """
    u = c.us
    a = c.active
    if side > 0:
        lo = region.lo
        hi = lo + int(np.ceil(2.5 * u[lo] / c.dx)) + 6
        if hi > a.stop - 4:
            hi = len(u)
        return _Cut(lo, hi, True)
    hi = region.hi
    lo = hi - int(np.ceil(2.5 * u[hi] / c.dx)) - 6
    if lo < a.start + 3:
        lo = -1
    return _Cut(lo, hi, True)


def _cut_record(ci, c, q):
    lo_tip, hi_tip = c.tips
    x0 = float(c.xs[q.lo]) if q.lo >= 0 else lo_tip
    x1 = float(c.xs[q.hi]) if q.hi < len(c.xs) else hi_tip
    return (ci, x0, x1, q.whole_region)


def discard_components(s: DomainSlice, cfg: SurgeryConfig):
    """Split off every component whose minimum mean curvature is >= H1/2."""
    kept, gone = [], []
    for c in s.components:
        m = float(curvature_profile(c).mean[c.active].min())
        if m >= cfg.H1 / 2:
            closed = c.left is Endpoint.ON_AXIS and c.right is Endpoint.ON_AXIS
            gone.append(Discard(c, Topology.SPHERE_LIKE if closed else Topology.UNSUPPORTED, m))
        else:
            kept.append(c)
    return DomainSlice(kept, s.time), gone


def perform_surgery(state: FlowState, cfg: SurgeryConfig, events_so_far: int = 0):
    """Run the whole surgery algorithm on a state that reached H.

    Returns (new_state, event).
    """
    if events_so_far + 1 > cfg.max_surgeries:
        raise SurgeryCapExceeded(f"more than {cfg.max_surgeries} surgery events")
    s = state.slice
    regions = find_high_curvature_regions(s, cfg)
    by_comp: dict[int, list] = {}
    done = []
    for reg in regions:
        c = s.components[reg.component]
        slices = tuple(locate_surgery_slice(reg, s, cfg))
        cuts = []
        whole = reg.boundary_count > 0 and not all(q.fits for q in slices)
        if reg.boundary_count > 0 and not whole:
            cuts = [_window_cut(c, q.z0, 3 * cfg.Lambda * q.r_z0) for q in slices]
            if len(cuts) == 2 and cuts[0].hi >= cuts[1].lo:
                whole = True
        if whole:
            cuts = []
            if reg.open_left:
                cuts.append(_boundary_cut(c, reg, +1))
            if reg.open_right:
                cuts.append(_boundary_cut(c, reg, -1))
            if len(cuts) == 2 and cuts[0].hi >= cuts[1].lo:
                # region too short for two separate windows: remove it in one piece
                cuts = [_Cut(cuts[0].lo, cuts[1].hi, True)]
        done.append(NeckRegion(reg.component, reg.a, reg.b, reg.boundary_count, reg.lo, reg.hi,
                               reg.open_left, reg.open_right, slices, whole))
        by_comp.setdefault(reg.component, []).extend(cuts)
    comps, caps, cut_records = [], [], []
    for ci, c in enumerate(s.components):
        cuts = by_comp.get(ci, [])
        if not cuts:
            comps.append(c)
            continue
        cuts.sort(key=lambda q: q.lo)
        for p, q in zip(cuts, cuts[1:]):
            if p.hi >= q.lo:
                raise WindowOutOfRange("surgery windows overlap")
        pieces, cap_list = _apply_cuts(c, cuts, ci)
        comps.extend(pieces)
        caps.extend(cap_list)
        cut_records.extend(_cut_record(ci, c, q) for q in cuts)
    cut_slice = DomainSlice(comps, s.time)
    kept, gone = discard_components(cut_slice, cfg)
    post_max = slice_max_mean(kept)
    if post_max > cfg.H2:
        raise CapCurvatureExceeded(
            f"post-surgery max mean curvature {post_max:.6g} exceeds omega2 H = {cfg.H2:.6g}")
    event = SurgeryEvent(s.time, s, kept, tuple(done), tuple(cut_records), tuple(caps), tuple(gone), cfg.H)
    log.info("surgery at t=%.6g: %d regions, %d cuts, %d discarded, %d kept",
             s.time, len(done), len(cut_records), len(gone), len(kept))
    return FlowState(kept, post_max, 0.0, state.dx_floor), event
