"""Space-time tracks and the distances between them.

A track is a time-ordered list of slices.  By rotational symmetry the
distance between two tracks in R^(n+2) equals the distance between their
half-plane profiles in (x, r, t), so every comparison works on boundary
point clouds in three dimensions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyTrack, NotDisjoint, TimeMismatch, ValidationError
from .profile import DomainSlice, signed_distance


class Provenance(str, Enum):
    SURGERY_FLOW = "surgery_flow"
    LEVEL_SET = "level_set"
    SHIFTED = "shifted"
    EXACT = "exact"


class Closure(str, Enum):
    EXTINCT = "extinct"
    HORIZON = "horizon"


@dataclass(frozen=True, eq=False)
class SpaceTimeTrack:
    slices: tuple
    provenance: Provenance = Provenance.EXACT
    events: tuple = ()
    closure: Closure = Closure.HORIZON
    # free-form provenance details (H, shift, grid)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        sl = tuple(self.slices)
        object.__setattr__(self, "slices", sl)
        object.__setattr__(self, "events", tuple(self.events))
        t = np.array([s.time for s in sl])
        if len(t) > 1 and np.any(np.diff(t) <= 0):
            raise ValidationError("track times must increase strictly")

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.slices])

    def __len__(self):
        return len(self.slices)

    def nonempty(self) -> "SpaceTimeTrack":
        """The same track without its empty (post-extinction) slices."""
        return SpaceTimeTrack([s for s in self.slices if not s.empty], self.provenance,
                              self.events, self.closure, self.meta)


def boundary_points(s: DomainSlice, spacing: float) -> np.ndarray:
    """Boundary of a slice as (x, r) points no further than ``spacing`` apart."""
    out = []
    for c in s.components:
        poly = c.polyline()
        seg = np.diff(poly, axis=0)
        L = np.hypot(seg[:, 0], seg[:, 1])
        k = np.maximum(np.ceil(L / spacing).astype(int), 1)
        # k sub-points per segment, last vertex appended once
        idx = np.repeat(np.arange(len(seg)), k)
        start = np.repeat(np.cumsum(k) - k, k)
        frac = (np.arange(len(idx)) - start) / k[idx]
        out.append(poly[idx] + frac[:, None] * seg[idx])
        out.append(poly[-1:])
    return np.vstack(out) if out else np.empty((0, 2))


def track_cloud(track: SpaceTimeTrack, spacing: float):
    """All boundary points of a track in (x, r, t) plus the slice index of each."""
    pts, owner = [], []
    for i, s in enumerate(track.slices):
        p = boundary_points(s, spacing)
        if len(p) == 0:
            continue
        pts.append(np.column_stack([p, np.full(len(p), s.time)]))
        owner.append(np.full(len(p), i))
    if not pts:
        return np.empty((0, 3)), np.empty(0, dtype=int)
    return np.vstack(pts), np.concatenate(owner)


@dataclass(frozen=True, eq=False)
class DistanceReport:
    hausdorff: float
    # space-time points (x, r, t) realising the distance
    witness: tuple
    # per slice: the largest distance from that slice's points to the other track
    a_to_b: np.ndarray
    b_to_a: np.ndarray


def _default_spacing(*tracks):
    # half the typical grid spacing; a few finely resampled specks near
    # extinction should not set the density of the whole cloud
    dxs = [c.dx for t in tracks for s in t.slices for c in s.components]
    return 0.5 * float(np.median(dxs))


def _slice_clouds(track: SpaceTimeTrack, spacing: float):
    times, pts = [], []
    for s in track.slices:
        p = boundary_points(s, spacing)
        if len(p):
            times.append(s.time)
            pts.append(p)
    return np.array(times), pts


def _stack(t, p, lo, hi):
    # slices lo..hi-1 as one (x, r, t) cloud with (slice, point) labels
    pts = np.vstack([np.column_stack([p[i], np.full(len(p[i]), t[i])]) for i in range(lo, hi)])
    sid = np.concatenate([np.full(len(p[i]), i) for i in range(lo, hi)])
    loc = np.concatenate([np.arange(len(p[i])) for i in range(lo, hi)])
    return pts, sid, loc


def _one_sided(ta, pa, tb, pb, block=4):
    """For every point of A: distance to the nearest point of B in (x, r, t).

    B is cut into blocks of consecutive slices, each with its own 3d tree.
    Blocks are visited in order of time gap and a point skips a block once
    the gap alone exceeds its best distance, so the result is exact.
    Returns per-slice arrays of distances and of (slice, point) witnesses.
    """
    nb = len(tb)
    edges = list(range(0, nb, block)) + [nb]
    blo = np.array([tb[edges[k]] for k in range(len(edges) - 1)])
    bhi = np.array([tb[edges[k + 1] - 1] for k in range(len(edges) - 1)])
    trees = {}
    dists, wit = [], []
    for lo in range(0, len(ta), block):
        hi = min(lo + block, len(ta))
        q, sid, loc = _stack(ta, pa, lo, hi)
        t = q[:, 2]
        best = np.full(len(q), np.inf)
        arg = np.zeros((len(q), 2), dtype=np.int64)
        gap_blk = np.maximum(np.maximum(blo - ta[hi - 1], ta[lo] - bhi), 0.0)
        for k in np.argsort(gap_blk, kind="stable"):
            if gap_blk[k] >= best.max():
                break
            gap = np.maximum(np.maximum(blo[k] - t, t - bhi[k]), 0.0)
            act = np.flatnonzero(best > gap)
            if len(act) == 0:
                continue
            if k not in trees:
                trees[k] = (cKDTree((bs := _stack(tb, pb, edges[k], edges[k + 1]))[0]), bs[1], bs[2])
            tree, bsid, bloc = trees[k]
            d, m = tree.query(q[act])
            better = d < best[act]
            upd = act[better]
            best[upd] = d[better]
            arg[upd, 0] = bsid[m[better]]
            arg[upd, 1] = bloc[m[better]]
        for i in range(lo, hi):
            sel = sid == i
            dists.append(best[sel])
            wit.append(arg[sel])
    return dists, wit


def hausdorff_distance(a: SpaceTimeTrack, b: SpaceTimeTrack, spacing: float | None = None) -> DistanceReport:
    """Hausdorff distance between the boundary clouds of two tracks in (x, r, t)."""
    if not any(not s.empty for s in a.slices) or not any(not s.empty for s in b.slices):
        raise EmptyTrack("both tracks need at least one nonempty slice")
    h = spacing or _default_spacing(a, b)
    ta, pa = _slice_clouds(a, h)
    tb, pb = _slice_clouds(b, h)
    dab, wab = _one_sided(ta, pa, tb, pb)
    dba, wba = _one_sided(tb, pb, ta, pa)
    ma = np.array([d.max() for d in dab])
    mb = np.array([d.max() for d in dba])
    if ma.max() >= mb.max():
        i = int(np.argmax(ma))
        k = int(np.argmax(dab[i]))
        j, m = wab[i][k]
        w = ((*pa[i][k], ta[i]), (*pb[j][m], tb[j]))
    else:
        j = int(np.argmax(mb))
        m = int(np.argmax(dba[j]))
        i, k = wba[j][m]
        w = ((*pa[i][k], ta[i]), (*pb[j][m], tb[j]))
    w = tuple(tuple(float(v) for v in q) for q in w)
    return DistanceReport(float(max(ma.max(), mb.max())), w,
                          _expand(ma, ta, a), _expand(mb, tb, b))


def _expand(per, times, track):
    # per-slice maxima back onto the track's own slice indices (nan: empty)
    out = np.full(len(track), np.nan)
    lookup = {t: v for t, v in zip(times, per)}
    for i, s in enumerate(track.slices):
        if s.time in lookup and not s.empty:
            out[i] = lookup[s.time]
    return out


def shift_track(a: SpaceTimeTrack, t_shift: float) -> SpaceTimeTrack:
    """Shift backwards in time: output slice at t is the input slice at t + t_shift."""
    if t_shift < 0:
        raise ValidationError("t_shift must be nonnegative")
    out = [DomainSlice(s.components, s.time - t_shift) for s in a.slices if s.time - t_shift >= -1e-12 * max(1.0, t_shift)]
    # a slice landing within rounding of t = 0 is placed exactly there
    out = [DomainSlice(s.components, max(s.time, 0.0)) for s in out]
    meta = dict(a.meta)
    meta["shift"] = meta.get("shift", 0.0) + t_shift
    return SpaceTimeTrack(out, Provenance.SHIFTED, (), a.closure, meta)


@dataclass(frozen=True)
class Containment:
    ok: bool
    # largest signed distance of an inner boundary point to the outer region
    margin: float
    where: tuple


def contains_track(inner: SpaceTimeTrack, outer: SpaceTimeTrack, tol: float,
                   max_gap: float | None = None, spacing: float | None = None) -> Containment:
    """Is every inner boundary point within ``tol`` of the matching outer region?

    Inner slices are matched to the nearest outer slice in time; a gap
    larger than ``max_gap`` (default: the largest spacing of outer's times)
    raises TimeMismatch.  Inner slices past the end of ``outer`` must be
    empty.
    """
    if len(outer) == 0:
        raise EmptyTrack("outer track is empty")
    to = outer.times
    if max_gap is None:
        max_gap = float(np.diff(to).max()) if len(to) > 1 else 0.0
    h = spacing or _default_spacing(inner, outer)
    worst = -np.inf
    where = ()
    for s in inner.slices:
        if s.empty:
            continue
        j = int(np.argmin(np.abs(to - s.time)))
        if abs(to[j] - s.time) > max_gap * (1 + 1e-9) + 1e-15:
            raise TimeMismatch(f"no outer slice within {max_gap:.3g} of t={s.time:.6g}")
        pts = boundary_points(s, h)
        o = outer.slices[j]
        if o.empty:
            d = np.full(len(pts), np.inf)
        else:
            d = signed_distance(pts, o)
        k = int(np.argmax(d))
        if d[k] > worst:
            worst = float(d[k])
            where = (float(pts[k, 0]), float(pts[k, 1]), float(s.time))
    if worst == -np.inf:
        return Containment(True, -np.inf, ())
    # boundary points of a region sit at distance 0 up to round-off
    return Containment(bool(worst <= tol + 1e-12), worst, where)


# -- exact comparison flows --------------------------------------------------


@dataclass(frozen=True)
class ShrinkingSphere:
    """Round sphere centred on the axis at x = center: R(t)^2 = R0^2 - 2 n t."""
    center: float
    R0: float
    n: int = 3

    @property
    def extinction(self) -> float:
        return self.R0**2 / (2 * self.n)

    def radius(self, t):
        return np.sqrt(np.maximum(self.R0**2 - 2 * self.n * np.asarray(t, dtype=float), 0.0))

    def distance(self, pts, t) -> np.ndarray:
        """Signed gap from points outside the sphere (negative: inside)."""
        return np.hypot(pts[:, 0] - self.center, pts[:, 1]) - self.radius(t)


@dataclass(frozen=True)
class ShrinkingCylinder:
    """Coaxial round cylinder r = R(t), R(t)^2 = R0^2 - 2 (n-1) t, enclosing the track."""
    R0: float
    n: int = 3

    @property
    def extinction(self) -> float:
        return self.R0**2 / (2 * (self.n - 1))

    def radius(self, t):
        return np.sqrt(np.maximum(self.R0**2 - 2 * (self.n - 1) * np.asarray(t, dtype=float), 0.0))

    def distance(self, pts, t) -> np.ndarray:
        return self.radius(t) - pts[:, 1]


def distance_series(a: SpaceTimeTrack, flow, spacing: float | None = None) -> list[tuple[float, float]]:
    """Minimum distance between each recorded boundary and an exact flow.

    Stops at the comparison flow's extinction and at the track's last
    nonempty slice.
    """
    h = spacing or _default_spacing(a.nonempty())
    out = []
    for i, s in enumerate(a.slices):
        if s.empty or s.time >= flow.extinction:
            break
        d = float(flow.distance(boundary_points(s, h), s.time).min())
        if i == 0 and d <= 0:
            raise NotDisjoint(f"track and comparison flow intersect at t={s.time:.6g}")
        out.append((float(s.time), d))
    return out


def is_nondecreasing(series, slack: float) -> tuple[bool, float]:
    """Check a distance series never drops more than ``slack`` below its running max."""
    v = np.array([d for _, d in series])
    if len(v) == 0:
        return True, 0.0
    drop = float(np.max(np.maximum.accumulate(v) - v))
    return drop <= slack, drop
