"""Rotationally symmetric hypersurfaces stored as profile graphs.

A component of the hypersurface in R^(n+1) is the rotation of the graph
r = u(x) about the x-axis.  Samples live on a uniform grid and the
primary unknown is the lifted variable w = u**2, which stays smooth where
the surface closes on the axis (w is quadratic near a round cap).  The
node just beyond an axis closure carries the extension of w (w <= 0), so
the closing point lies between that node and its neighbour.

In terms of w, with D = 4 w + w'^2::

    kappa_rot   = 2 / sqrt(D)
    kappa_axial = 2 (w'^2 - 2 w w'') / D^(3/2)

both of which remain finite at w = 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from enum import Enum
import numpy as np
from numba import njit

from .errors import EmptySlice, MalformedProfile


class Endpoint(str, Enum):
    ON_AXIS = "on_axis"
    OPEN = "open"


@dataclass(frozen=True, eq=False)
class ProfileCurve:
    """One connected component, sampled on a uniform grid.

    ``ws`` holds u**2.  At an ``ON_AXIS`` end the outermost node is the
    closing node (w <= 0); every other node must have w > 0.  ``OPEN`` ends
    are artificial truncations with mirror symmetry.
    """

    n: int
    xs: np.ndarray
    ws: np.ndarray
    left: Endpoint = Endpoint.ON_AXIS
    right: Endpoint = Endpoint.ON_AXIS

    def __post_init__(self):
        xs = np.array(self.xs, dtype=float)
        ws = np.array(self.ws, dtype=float)
        xs.setflags(write=False)
        ws.setflags(write=False)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ws", ws)
        object.__setattr__(self, "left", Endpoint(self.left))
        object.__setattr__(self, "right", Endpoint(self.right))
        self._validate()

    @classmethod
    def from_radii(cls, n, xs, us, left=Endpoint.ON_AXIS, right=Endpoint.ON_AXIS):
        us = np.asarray(us, dtype=float)
        if np.any(us < 0):
            raise MalformedProfile("negative radius")
        return cls(n, xs, us**2, left, right)

    @classmethod
    def from_support(cls, n, xs, ws):
        """Trim samples of w to its positive support plus one closing node per side.

        The support must be a single run of positive values strictly inside
        the sample range.
        """
        xs = np.asarray(xs, dtype=float)
        ws = np.asarray(ws, dtype=float)
        idx = np.flatnonzero(ws > 0)
        if len(idx) == 0:
            raise MalformedProfile("w has no positive samples")
        lo, hi = idx[0] - 1, idx[-1] + 1
        if lo < 0 or hi >= len(xs):
            raise MalformedProfile("support touches the end of the sample range")
        return cls(n, xs[lo : hi + 1], ws[lo : hi + 1])

    def _validate(self):
        xs, ws = self.xs, self.ws
        if self.n < 1:
            raise MalformedProfile(f"n must be positive, got {self.n}")
        if xs.ndim != 1 or xs.shape != ws.shape:
            raise MalformedProfile("xs and ws must be 1-d arrays of equal length")
        if len(xs) < 5:
            raise MalformedProfile(f"need at least 5 samples, got {len(xs)}")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ws))):
            raise MalformedProfile("non-finite sample")
        steps = np.diff(xs)
        dx = steps.mean()
        if dx <= 0:
            raise MalformedProfile("abscissae must increase")
        scale = max(1.0, float(np.abs(xs).max()) / dx)
        if np.abs(steps - dx).max() > 1e-12 * dx * scale:
            raise MalformedProfile("non-uniform spacing")
        inner = ws[self._active_slice()]
        if np.any(inner <= 0):
            bad = int(np.argmax(ws[self._active_slice()] <= 0)) + self._active_slice().start
            raise MalformedProfile(f"u <= 0 at interior node {bad} (x={xs[bad]:.6g})")
        for end, idx in ((self.left, 0), (self.right, -1)):
            if end is Endpoint.ON_AXIS and ws[idx] > 0:
                raise MalformedProfile("ON_AXIS end node must have u = 0")

    def _active_slice(self):
        lo = 1 if self.left is Endpoint.ON_AXIS else 0
        hi = len(self.xs) - 1 if self.right is Endpoint.ON_AXIS else len(self.xs)
        return slice(lo, hi)

    @property
    def dx(self) -> float:
        return float((self.xs[-1] - self.xs[0]) / (len(self.xs) - 1))

    @property
    def us(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.ws, 0.0))

    @property
    def active(self) -> slice:
        """Index range of the nodes with u > 0."""
        return self._active_slice()

    @property
    def n_active(self) -> int:
        s = self._active_slice()
        return s.stop - s.start

    @property
    def tips(self) -> tuple[float, float]:
        """Abscissae where the component ends (axis closures or truncations)."""
        xs, ws = self.xs, self.ws
        lo = xs[0] if self.left is Endpoint.OPEN else _tip(xs[:3], ws[:3])
        hi = xs[-1] if self.right is Endpoint.OPEN else _tip(xs[-1:-4:-1], ws[-1:-4:-1])
        return float(lo), float(hi)

    def polyline(self) -> np.ndarray:
        """Boundary polyline in the half-plane, ordered by x, shape (m, 2).

        The interval between an axis closure and the first positive node is
        filled from the local quadratic in w, so round caps are resolved well
        below the grid spacing.  The array is cached and read-only.
        """
        return self._polyline

    @cached_property
    def _polyline(self) -> np.ndarray:
        s = self.active
        pts = [_refined_body(self.xs, self.ws, s)]
        if self.left is Endpoint.ON_AXIS:
            pts.insert(0, _tip_points(self.xs[:3], self.ws[:3]))
        if self.right is Endpoint.ON_AXIS:
            pts.append(_tip_points(self.xs[-1:-4:-1], self.ws[-1:-4:-1]))
        out = np.vstack(pts)
        out.setflags(write=False)
        return out

    def radius_at(self, x) -> np.ndarray:
        """Piecewise-linear radius of the polyline; 0 outside the component."""
        poly = self.polyline()
        x = np.asarray(x, dtype=float)
        r = np.interp(x, poly[:, 0], poly[:, 1], left=0.0, right=0.0)
        lo, hi = self.tips
        return np.where((x < lo) | (x > hi), 0.0, r)

    def with_ws(self, ws, left=None, right=None) -> "ProfileCurve":
        return ProfileCurve(self.n, self.xs, ws, left or self.left, right or self.right)


_TIP_SAMPLES = 8


def _tip_quadratic(x3, w3):
    # w(x) = w1 + b (x - x1) + a (x - x1)^2 through three equally spaced nodes,
    # x3[0] being the closing node (x3 may run in either direction)
    h = x3[1] - x3[0]
    a = (w3[0] - 2 * w3[1] + w3[2]) / (2 * h * h)
    b = (w3[2] - w3[0]) / (x3[2] - x3[0])
    return a, b


def _tip(x3, w3):
    """Zero of the local quadratic between the closing node and its neighbour."""
    x0, x1 = x3[0], x3[1]
    w0, w1 = w3[0], w3[1]
    if w0 >= 0.0:
        return x0
    a, b = _tip_quadratic(x3, w3)
    # solve w1 + b s + a s^2 = 0 for s between x0 - x1 and 0
    lo, hi = sorted((x0 - x1, 0.0))
    if abs(a) > 1e-300:
        disc = b * b - 4 * a * w1
        if disc >= 0:
            sq = np.sqrt(disc)
            q = -0.5 * (b + np.copysign(sq, b))
            cands = [q / a] + ([w1 / q] if q != 0 else [])
            for sroot in cands:
                if lo <= sroot <= hi:
                    return x1 + sroot
    elif b != 0:
        sroot = -w1 / b
        if lo <= sroot <= hi:
            return x1 + sroot
    return x0 + (x1 - x0) * (-w0) / (w1 - w0)


def _refined_body(xs, ws, s):
    # steep intervals (longer than two cells, near caps) get extra points
    # from cubic interpolation of w
    x = xs[s]
    u = np.sqrt(ws[s])
    dx = xs[1] - xs[0]
    seg = np.hypot(np.diff(x), np.diff(u))
    extra = np.ceil(seg / (2 * dx)).astype(int) - 1
    steep = np.flatnonzero(extra > 0)
    if len(steep) == 0:
        return np.column_stack([x, u])
    cnt = extra[steep]
    kk = np.repeat(steep, cnt)
    t = (np.arange(len(kk)) - np.repeat(np.cumsum(cnt) - cnt, cnt) + 1) / (extra[kk] + 1)
    i = s.start + kk
    j0 = np.clip(i - 1, 0, len(xs) - 4)
    st = j0[:, None] + np.arange(4)
    xq = x[kk] + t * dx
    wq = _lagrange(xs[st].T, ws[st].T, xq)
    lin = (1 - t) * ws[i] + t * ws[i + 1]
    ok = (wq > 0.5 * np.minimum(ws[i], ws[i + 1])) & (wq < 2 * np.maximum(ws[i], ws[i + 1]))
    wq = np.where(ok, wq, lin)
    # merge: every inserted point sorts after its segment's left node
    allx = np.concatenate([x, xq])
    allu = np.concatenate([u, np.sqrt(wq)])
    key = np.concatenate([np.arange(len(x)) * 1.0, kk + t])
    o = np.argsort(key, kind="stable")
    return np.column_stack([allx[o], allu[o]])


def _lagrange(xx, yy, x):
    total = 0.0
    for a in range(len(xx)):
        term = yy[a]
        for b in range(len(xx)):
            if b != a:
                term *= (x - xx[b]) / (xx[a] - xx[b])
        total += term
    return total


def _tip_points(x3, w3):
    """Points of the cap between the tip and the first positive node."""
    xt = _tip(x3, w3)
    x1 = x3[1]
    a, b = _tip_quadratic(x3, w3)
    frac = (np.arange(_TIP_SAMPLES) / _TIP_SAMPLES) ** 2
    xq = xt + frac * (x1 - xt)
    s = xq - x1
    wq = w3[1] + b * s + a * s * s
    wq[0] = 0.0
    pts = np.column_stack([xq, np.sqrt(np.maximum(wq, 0.0))])
    if x1 < xt:
        pts = pts[::-1]
    return pts


@dataclass(frozen=True, eq=False)
class DomainSlice:
    """The union of the regions bounded by several components at one time."""

    components: tuple = field(default_factory=tuple)
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))

    @property
    def empty(self) -> bool:
        return len(self.components) == 0

    def __len__(self):
        return len(self.components)


@dataclass(frozen=True)
class CurvatureSample:
    kappa_axial: float
    kappa_rot: float
    mean: float


@dataclass(frozen=True, eq=False)
class Curvatures:
    """Per-node curvatures of one component (arrays aligned with xs)."""

    kappa_axial: np.ndarray
    kappa_rot: np.ndarray
    mean: np.ndarray

    def __len__(self):
        return len(self.mean)

    def __getitem__(self, i) -> CurvatureSample:
        return CurvatureSample(float(self.kappa_axial[i]), float(self.kappa_rot[i]), float(self.mean[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))


def lifted_derivatives(c: ProfileCurve) -> tuple[np.ndarray, np.ndarray]:
    """First and second x-derivatives of w at every node.

    Interior nodes use central differences.  OPEN ends use a mirror ghost
    node.  Closing nodes report the slope of the local quadratic at the tip.
    """
    ws, dx = c.ws, c.dx
    wp = np.empty_like(ws)
    wpp = np.empty_like(ws)
    wp[1:-1] = (ws[2:] - ws[:-2]) / (2 * dx)
    wpp[1:-1] = (ws[2:] - 2 * ws[1:-1] + ws[:-2]) / dx**2
    lo, hi = c.tips
    if c.left is Endpoint.OPEN:
        wp[0] = 0.0
        wpp[0] = 2 * (ws[1] - ws[0]) / dx**2
    else:
        wp[0], wpp[0] = _quadratic_at(c.xs[:3], ws[:3], lo)
    if c.right is Endpoint.OPEN:
        wp[-1] = 0.0
        wpp[-1] = 2 * (ws[-2] - ws[-1]) / dx**2
    else:
        wp[-1], wpp[-1] = _quadratic_at(c.xs[-3:], ws[-3:], hi)
    return wp, wpp


def _quadratic_at(x3, w3, x):
    x0, x1, x2 = x3
    w0, w1, w2 = w3
    h = x1 - x0
    c2 = (w0 - 2 * w1 + w2) / (2 * h * h)
    c1 = (w2 - w0) / (2 * h)
    # expanded about the middle node
    return c1 + 2 * c2 * (x - x1), 2 * c2


def curvature_profile(c: ProfileCurve) -> Curvatures:
    """Principal and mean curvatures at every node of ``c``.

    At a closing node the values are those at the axis point itself, where
    the two principal curvatures coincide.
    """
    wp, wpp = lifted_derivatives(c)
    ws = c.ws.copy()
    ends = []
    if c.left is Endpoint.ON_AXIS:
        ends.append(0)
    if c.right is Endpoint.ON_AXIS:
        ends.append(len(ws) - 1)
    ws[ends] = 0.0
    D = 4 * ws + wp**2
    if np.any(D <= 0):
        raise MalformedProfile("degenerate slope at an axis closure")
    sqD = np.sqrt(D)
    k_rot = 2.0 / sqD
    k_ax = 2.0 * (wp**2 - 2 * ws * wpp) / (D * sqD)
    k_ax[ends] = k_rot[ends]
    mean = k_ax + (c.n - 1) * k_rot
    return Curvatures(k_ax, k_rot, mean)


def max_mean_curvature(s: DomainSlice) -> float:
    if s.empty:
        return 0.0
    return max(float(curvature_profile(c).mean.max()) for c in s.components)


@dataclass(frozen=True)
class TwoConvexity:
    ok: bool
    margin: float
    worst_index: int


def two_smallest_sum(k: Curvatures) -> np.ndarray:
    # kappa_rot has multiplicity n-1 >= 2
    return np.where(k.kappa_axial < k.kappa_rot, k.kappa_axial + k.kappa_rot, 2 * k.kappa_rot)


def is_two_convex(c: ProfileCurve, tol: float = 0.0) -> TwoConvexity:
    """Check that the sum of the two smallest principal curvatures is >= -tol."""
    s = two_smallest_sum(curvature_profile(c))
    i = int(np.argmin(s))
    return TwoConvexity(bool(s[i] >= -tol), float(s[i]), i)


# -- distances ---------------------------------------------------------------


@njit(cache=True)
def _seg_d2(x, r, x0, r0, x1, r1):
    ex = x1 - x0
    er = r1 - r0
    L2 = ex * ex + er * er
    t = 0.0
    if L2 > 0:
        t = min(max(((x - x0) * ex + (r - r0) * er) / L2, 0.0), 1.0)
    qx = x0 + t * ex - x
    qr = r0 + t * er - r
    return qx * qx + qr * qr


@njit(cache=True)
def _polyline_distance(px, pr, vx, vr):
    # vx is nondecreasing (graph profile): scan outward from the bracketing
    # segment and stop once the x-gap alone exceeds the best distance
    m = len(vx)
    out = np.empty(len(px))
    for k in range(len(px)):
        x = px[k]
        r = pr[k]
        if m == 1:
            out[k] = np.sqrt((vx[0] - x) ** 2 + (vr[0] - r) ** 2)
            continue
        up = min(max(np.searchsorted(vx, x) - 1, 0), m - 2)
        best2 = np.inf
        for i in range(up, m - 1):
            gap = vx[i] - x
            if gap > 0 and gap * gap >= best2:
                break
            best2 = min(best2, _seg_d2(x, r, vx[i], vr[i], vx[i + 1], vr[i + 1]))
        for i in range(up - 1, -1, -1):
            gap = x - vx[i + 1]
            if gap > 0 and gap * gap >= best2:
                break
            best2 = min(best2, _seg_d2(x, r, vx[i], vr[i], vx[i + 1], vr[i + 1]))
        out[k] = np.sqrt(best2)
    return out


def polyline_distance(points, poly) -> np.ndarray:
    """Unsigned distance from each point to an x-monotone polyline."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    poly = np.asarray(poly, dtype=float)
    return _polyline_distance(
        np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1]),
        np.ascontiguousarray(poly[:, 0]), np.ascontiguousarray(poly[:, 1]),
    )


def brute_force_polyline_distance(point, poly) -> float:
    """Reference implementation: minimum over every segment, no pruning."""
    p = np.asarray(point, dtype=float)
    a = poly[:-1]
    e = poly[1:] - a
    L2 = (e**2).sum(axis=1)
    t = np.where(L2 > 0, ((p - a) * e).sum(axis=1) / np.where(L2 > 0, L2, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    q = a + t[:, None] * e
    return float(np.sqrt(((q - p) ** 2).sum(axis=1)).min())


def inside(points, s: DomainSlice) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    res = np.zeros(len(pts), dtype=bool)
    for c in s.components:
        lo, hi = c.tips
        r = c.radius_at(pts[:, 0])
        res |= (pts[:, 0] >= lo) & (pts[:, 0] <= hi) & (pts[:, 1] <= r)
    return res


def signed_distance(points, s: DomainSlice) -> np.ndarray:
    """Signed half-plane distance to the boundary of ``s`` (negative inside)."""
    if s.empty:
        raise EmptySlice("slice has no components")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = np.full(len(pts), np.inf)
    for c in s.components:
        d = np.minimum(d, polyline_distance(pts, c.polyline()))
    return np.where(inside(pts, s), -d, d)


def distance_to_boundary(p, s: DomainSlice) -> float:
    return float(signed_distance(np.asarray(p, dtype=float)[None, :], s)[0])


# -- component bookkeeping ---------------------------------------------------


def split_components(s: DomainSlice) -> list[ProfileCurve]:
    """Break every component at interior axis closures (nodes with w <= 0).

    Runs with fewer than three positive nodes are below grid resolution and
    are dropped.
    """
    out = []
    for c in s.components:
        out.extend(_split_one(c))
    return out


def _split_one(c: ProfileCurve) -> list[ProfileCurve]:
    return split_samples(c.n, c.xs, c.ws)


def split_samples(n, xs, ws) -> list[ProfileCurve]:
    """Components of the runs of positive samples of w.

    A run touching the end of the sample range gets an OPEN end there.
    """
    xs = np.asarray(xs, dtype=float)
    ws = np.asarray(ws, dtype=float)
    pos = ws > 0
    m = len(ws)
    pieces = []
    i = 0
    while i < m:
        if not pos[i]:
            i += 1
            continue
        j = i
        while j + 1 < m and pos[j + 1]:
            j += 1
        lo, hi = i, j
        left = right = Endpoint.ON_AXIS
        if lo == 0:
            left = Endpoint.OPEN
        else:
            lo -= 1
        if hi == m - 1:
            right = Endpoint.OPEN
        else:
            hi += 1
        if j - i + 1 >= 3:
            pieces.append(ProfileCurve(n, xs[lo : hi + 1], ws[lo : hi + 1], left, right))
        i = j + 1
    return pieces


def enclosed_area(c: ProfileCurve) -> float:
    """Half-plane area under the profile polyline."""
    poly = c.polyline()
    return float(np.trapz(poly[:, 1], poly[:, 0]))


def node_area(c: ProfileCurve) -> float:
    """Cheap area estimate from the grid nodes alone (no tip refinement)."""
    return float(c.us.sum() * c.dx)
