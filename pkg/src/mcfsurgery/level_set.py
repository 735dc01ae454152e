"""Level set flow of axisymmetric domains on a half-plane grid.

The domain at time t is {phi <= 0} rotated about the x-axis.  phi solves

    phi_t = (phi_xx phi_r^2 - 2 phi_x phi_r phi_xr + phi_rr phi_x^2) / |grad phi|^2
            + (n - 1) phi_r / r

with |grad phi|^2 regularised by sigma^2 and the last term replaced by
(n - 1) phi_rr on the axis.  Only a narrow band around the zero set is
updated; reinitialisation recomputes distances by closest-point projection
onto the zero set of a bicubic interpolant, which leaves the zero set in
place up to interpolation error.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.spatial import cKDTree

from .errors import CflViolation, DomainTooSmall, NotReached, ValidationError
from .profile import DomainSlice, ProfileCurve, polyline_distance, signed_distance

log = logging.getLogger(__name__)

SIGMA = 1e-6


@dataclass(frozen=True)
class GridSpec:
    x0: float
    x1: float
    r1: float
    dx: float

    def __post_init__(self):
        if not self.dx > 0:
            raise ValidationError("dx must be positive")
        if not (self.x1 > self.x0 and self.r1 > 0):
            raise ValidationError("empty grid")

    @property
    def nx(self) -> int:
        return int(round((self.x1 - self.x0) / self.dx)) + 1

    @property
    def nr(self) -> int:
        return int(round(self.r1 / self.dx)) + 1

    @property
    def xs(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.nx)

    @property
    def rs(self) -> np.ndarray:
        return self.dx * np.arange(self.nr)

    @classmethod
    def around(cls, s: DomainSlice, dx: float, margin: int = 24) -> "GridSpec":
        """Grid aligned with x = 0 covering ``s`` with ``margin`` cells to spare."""
        lo = min(c.tips[0] for c in s.components)
        hi = max(c.tips[1] for c in s.components)
        rmax = max(float(c.us.max()) for c in s.components)
        i0 = int(np.floor(lo / dx)) - margin
        i1 = int(np.ceil(hi / dx)) + margin
        jr = int(np.ceil(rmax / dx)) + margin
        return cls(i0 * dx, i1 * dx, jr * dx, dx)


@dataclass(frozen=True, eq=False)
class LevelSetField:
    grid: GridSpec
    phi: np.ndarray
    time: float = 0.0
    # half-width of the band of exact distances (plateau beyond)
    band: float = field(default=0.0)

    def __post_init__(self):
        phi = np.array(self.phi, dtype=float)
        if phi.shape != (self.grid.nx, self.grid.nr):
            raise ValidationError(f"phi has shape {phi.shape}, grid is {(self.grid.nx, self.grid.nr)}")
        if not np.all(np.isfinite(phi)):
            raise ValidationError("phi must be finite")
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        if self.band <= 0:
            object.__setattr__(self, "band", 10 * self.grid.dx)

    @property
    def extinct(self) -> bool:
        return bool(self.phi.min() > 0)


def _check_margin(s: DomainSlice, grid: GridSpec):
    m = 10 * grid.dx
    for c in s.components:
        lo, hi = c.tips
        if lo < grid.x0 + m or hi > grid.x1 - m or c.us.max() > grid.r1 - m:
            raise DomainTooSmall("the body must stay 10 cells inside the grid")


def signed_distance_init(s: DomainSlice, grid: GridSpec, band: float | None = None) -> LevelSetField:
    """phi = signed half-plane distance to the boundary of ``s`` at every node."""
    _check_margin(s, grid)
    X, R = np.meshgrid(grid.xs, grid.rs, indexing="ij")
    pts = np.column_stack([X.ravel(), R.ravel()])
    phi = signed_distance(pts, s).reshape(X.shape)
    return LevelSetField(grid, phi, s.time, band or 0.0)


# -- time stepping -----------------------------------------------------------


@njit(cache=True)
def _lsf_kernel(phi, out, ii, jj, dx, dt, n, sigma):
    """Explicit update of the listed nodes; returns (max |dphi| near the front, min phi)."""
    nx, nr = phi.shape
    h2 = dx * dx
    near = 2.0 * dx
    moved = 0.0
    lowest = np.inf
    for k in range(len(ii)):
        i = ii[k]
        j = jj[k]
        c = phi[i, j]
        if i == 0 or i == nx - 1 or j == nr - 1:
            out[i, j] = c
            continue
        jm = j - 1 if j > 0 else 1
        e = phi[i + 1, j]
        w = phi[i - 1, j]
        up = phi[i, j + 1]
        dn = phi[i, jm]
        px = (e - w) / (2 * dx)
        pr = (up - dn) / (2 * dx)
        pxx = (e - 2 * c + w) / h2
        prr = (up - 2 * c + dn) / h2
        pxr = (phi[i + 1, j + 1] - phi[i - 1, j + 1] - phi[i + 1, jm] + phi[i - 1, jm]) / (4 * h2)
        g2 = px * px + pr * pr + sigma * sigma
        rate = (pxx * pr * pr - 2 * px * pr * pxr + prr * px * px) / g2
        if j == 0:
            rate += (n - 1) * prr
        else:
            rate += (n - 1) * pr / (j * dx)
        v = c + dt * rate
        out[i, j] = v
        if abs(c) < near and abs(v - c) > moved:
            moved = abs(v - c)
        if v < lowest:
            lowest = v
    return moved, lowest


def _band_nodes(phi, band):
    ii, jj = np.nonzero(np.abs(phi) < band)
    return ii.astype(np.int64), jj.astype(np.int64)


def cfl_limit(grid: GridSpec, cfl: float = 0.2) -> float:
    return cfl * grid.dx**2


def lsf_step(f: LevelSetField, dt: float, n: int = 3, sigma: float = SIGMA) -> LevelSetField:
    """One explicit step of size ``dt`` on the band |phi| < f.band."""
    if dt < 0:
        raise ValueError("negative time step")
    if dt == 0:
        return f
    if dt > cfl_limit(f.grid) * (1 + 1e-9):
        raise CflViolation(f"dt={dt:.3e} exceeds 0.2 dx^2 = {cfl_limit(f.grid):.3e}")
    phi = np.array(f.phi)
    out = phi.copy()
    ii, jj = _band_nodes(phi, f.band)
    _lsf_kernel(phi, out, ii, jj, f.grid.dx, dt, n, sigma)
    return LevelSetField(f.grid, out, f.time + dt, f.band)


# -- reinitialisation --------------------------------------------------------


@njit(cache=True)
def _at(phi, i, j):
    # even reflection across the axis, clamped at the other edges
    if j < 0:
        j = -j
    nx, nr = phi.shape
    if i < 0:
        i = 0
    elif i > nx - 1:
        i = nx - 1
    if j > nr - 1:
        j = nr - 1
    return phi[i, j]


@njit(cache=True)
def _d1x(phi, i, j):
    return (-_at(phi, i + 2, j) + 8 * _at(phi, i + 1, j) - 8 * _at(phi, i - 1, j) + _at(phi, i - 2, j)) / 12.0


@njit(cache=True)
def _d1r(phi, i, j):
    return (-_at(phi, i, j + 2) + 8 * _at(phi, i, j + 1) - 8 * _at(phi, i, j - 1) + _at(phi, i, j - 2)) / 12.0


@njit(cache=True)
def _dxr(phi, i, j):
    return (_at(phi, i + 1, j + 1) - _at(phi, i + 1, j - 1) - _at(phi, i - 1, j + 1) + _at(phi, i - 1, j - 1)) / 4.0


@njit(cache=True)
def _hermite(s):
    s2 = s * s
    s3 = s2 * s
    return (2 * s3 - 3 * s2 + 1, -2 * s3 + 3 * s2, s3 - 2 * s2 + s, s3 - s2,
            6 * s2 - 6 * s, -6 * s2 + 6 * s, 3 * s2 - 4 * s + 1, 3 * s2 - 2 * s)


@njit(cache=True)
def _bicubic(phi, x0, dx, x, r):
    """Value and gradient of the bicubic Hermite interpolant at (x, r)."""
    gx = (x - x0) / dx
    gr = r / dx
    i = int(np.floor(gx))
    j = int(np.floor(gr))
    s = gx - i
    t = gr - j
    hs = _hermite(s)
    ht = _hermite(t)
    val = 0.0
    ds = 0.0
    dt_ = 0.0
    for a in range(2):
        for b in range(2):
            f = _at(phi, i + a, j + b)
            fx = _d1x(phi, i + a, j + b)
            fr = _d1r(phi, i + a, j + b)
            fxr = _dxr(phi, i + a, j + b)
            Ha, Ga, dHa, dGa = hs[a], hs[2 + a], hs[4 + a], hs[6 + a]
            Hb, Gb, dHb, dGb = ht[b], ht[2 + b], ht[4 + b], ht[6 + b]
            val += f * Ha * Hb + fx * Ga * Hb + fr * Ha * Gb + fxr * Ga * Gb
            ds += f * dHa * Hb + fx * dGa * Hb + fr * dHa * Gb + fxr * dGa * Gb
            dt_ += f * Ha * dHb + fx * Ga * dHb + fr * Ha * dGb + fxr * Ga * dGb
    return val, ds / dx, dt_ / dx


@njit(cache=True)
def _foot_points(phi, x0, dx, px, pr, qx, qr, out):
    """Closest points on the interpolated zero set, started from seeds (qx, qr)."""
    for k in range(len(px)):
        x = qx[k]
        r = qr[k]
        ok = False
        for it in range(200):
            v, gx, gr = _bicubic(phi, x0, dx, x, r)
            g2 = gx * gx + gr * gr
            if g2 < 1e-24:
                break
            d1x = -v * gx / g2
            d1r = -v * gr / g2
            vx = px[k] - x
            vr = pr[k] - r
            proj = (vx * gx + vr * gr) / g2
            d2x = vx - proj * gx
            d2r = vr - proj * gr
            # keep tangential moves within one cell per iteration
            m = np.sqrt(d2x * d2x + d2r * d2r)
            if m > dx:
                d2x *= dx / m
                d2r *= dx / m
            x += d1x + d2x
            r += d1r + d2r
            if abs(d1x + d2x) + abs(d1r + d2r) < 1e-11 * dx:
                ok = True
                break
        if ok:
            out[k] = np.sqrt((px[k] - x) ** 2 + (pr[k] - r) ** 2)
        else:
            out[k] = -1.0


def _seeds(phi, xs, rs):
    """Zero crossings of phi along grid edges, by linear interpolation."""
    pts = []
    a, b = phi[:-1, :], phi[1:, :]
    i, j = np.nonzero((a <= 0) != (b <= 0))
    t = a[i, j] / (a[i, j] - b[i, j])
    pts.append(np.column_stack([xs[i] + t * (xs[1] - xs[0]), rs[j]]))
    a, b = phi[:, :-1], phi[:, 1:]
    i, j = np.nonzero((a <= 0) != (b <= 0))
    t = a[i, j] / (a[i, j] - b[i, j])
    pts.append(np.column_stack([xs[i], rs[j] + t * (rs[1] - rs[0])]))
    return np.vstack(pts)


@njit(cache=True)
def _dilate(seeds, x0, dx, shape, radius):
    nx, nr = shape
    out = np.zeros(shape, dtype=np.bool_)
    k = int(np.ceil(radius / dx)) + 1
    for m in range(len(seeds)):
        ci = int(round((seeds[m, 0] - x0) / dx))
        cj = int(round(seeds[m, 1] / dx))
        for i in range(max(ci - k, 0), min(ci + k + 1, nx)):
            for j in range(max(cj - k, 0), min(cj + k + 1, nr)):
                out[i, j] = True
    return out


def reinitialize(f: LevelSetField) -> LevelSetField:
    """Replace phi by the signed distance to its zero set inside the band.

    Nodes farther than the band get the plateau value +-band.
    """
    g = f.grid
    phi = np.ascontiguousarray(f.phi)
    sign = np.where(phi <= 0, -1.0, 1.0)
    out = sign * f.band
    seeds = _seeds(phi, g.xs, g.rs)
    if len(seeds) == 0:
        return LevelSetField(g, out, f.time, f.band)
    # mirrored seeds so nodes near the axis see the reflected front as well
    tree = cKDTree(np.vstack([seeds, seeds * [1, -1]]))
    # candidates: nodes whose nearest seed lies within the band plus a cell
    near = _dilate(seeds, g.x0, g.dx, phi.shape, f.band + 2 * g.dx)
    ci, cj = np.nonzero(near)
    pts = np.column_stack([g.xs[ci], g.rs[cj]])
    d_all, i_all = tree.query(pts, distance_upper_bound=f.band + 2 * g.dx)
    keep = np.isfinite(d_all)
    cand = np.ravel_multi_index((ci[keep], cj[keep]), phi.shape)
    pts = pts[keep]
    d_seed = np.full(phi.size, np.inf)
    idx = np.zeros(phi.size, dtype=np.int64)
    d_seed[cand] = d_all[keep]
    idx[cand] = i_all[keep]
    q = tree.data[idx[cand]]
    dist = np.empty(len(cand))
    _foot_points(phi, g.x0, g.dx, pts[:, 0].copy(), pts[:, 1].copy(),
                 q[:, 0].copy(), q[:, 1].copy(), dist)
    # Newton failures fall back to the seed distance
    dist = np.where(dist < 0, d_seed[cand], np.minimum(dist, d_seed[cand] + g.dx))
    flat = out.ravel()
    flat[cand] = sign.ravel()[cand] * np.minimum(dist, f.band)
    return LevelSetField(g, flat.reshape(phi.shape), f.time, f.band)


# -- zero set to profiles ----------------------------------------------------


@njit(cache=True)
def _column_radii(phi, dx):
    """Radius of {phi <= 0} in each column (negative when the axis node is outside)."""
    nx, nr = phi.shape
    u = np.full(nx, -1.0)
    for i in range(nx):
        if phi[i, 0] >= 0:
            continue
        j = 1
        while j < nr and phi[i, j] < 0:
            j += 1
        if j >= nr:
            u[i] = (nr - 1) * dx
            continue
        # cubic through j-2..j+1 (reflected at the axis), root in [j-1, j]
        a = j - 1.0
        b = float(j)
        fa = phi[i, j - 1]
        fb = phi[i, j]
        for _ in range(60):
            m = 0.5 * (a + b)
            fm = _cubic_col(phi, i, m)
            if (fm < 0) == (fa < 0):
                a, fa = m, fm
            else:
                b, fb = m, fm
            if b - a < 1e-12:
                break
        u[i] = 0.5 * (a + b) * dx
    return u


@njit(cache=True)
def _cubic_col(phi, i, g):
    j = int(np.floor(g))
    if j > phi.shape[1] - 3:
        j = phi.shape[1] - 3
    t = g - j
    f0 = _at(phi, i, j - 1)
    f1 = _at(phi, i, j)
    f2 = _at(phi, i, j + 1)
    f3 = _at(phi, i, j + 2)
    # Lagrange through offsets -1, 0, 1, 2
    return (-t * (t - 1) * (t - 2) / 6 * f0 + (t + 1) * (t - 1) * (t - 2) / 2 * f1
            - (t + 1) * t * (t - 2) / 2 * f2 + (t + 1) * t * (t - 1) / 6 * f3)


def _axis_root(row, xs, i_out, i_in):
    """Abscissa where phi(., 0) vanishes between nodes i_out and i_in (cubic)."""
    step = i_in - i_out
    idx = np.array([i_out - step, i_out, i_in, i_in + step])
    idx = np.clip(idx, 0, len(row) - 1)
    c = np.polyfit(np.arange(-1.0, 3.0), row[idx], 3)
    roots = np.roots(c)
    roots = roots[np.isreal(roots)].real
    roots = roots[(roots >= -1e-9) & (roots <= 1 + 1e-9)]
    if len(roots) == 0:
        t = row[i_out] / (row[i_out] - row[i_in])
    else:
        t = float(roots[0])
    return xs[i_out] + t * step * (xs[1] - xs[0])


def _closing_value(x_out, x_tip, x1, w1, x2, w2):
    # quadratic with a root at the tip through the two nearest positive nodes
    A = np.array([[1, x_tip, x_tip**2], [1, x1, x1**2], [1, x2, x2**2]])
    c = np.linalg.solve(A, [0.0, w1, w2])
    return min(c[0] + c[1] * x_out + c[2] * x_out**2, 0.0)


def sublevel_slice(f: LevelSetField, n: int = 3) -> DomainSlice:
    """{phi <= 0} as profile graphs, one per run of columns meeting the axis."""
    g = f.grid
    phi = np.ascontiguousarray(f.phi)
    u = _column_radii(phi, g.dx)
    xs = g.xs
    row = phi[:, 0]
    comps = []
    pos = u > 0
    i = 0
    m = len(u)
    while i < m:
        if not pos[i]:
            i += 1
            continue
        j = i
        while j + 1 < m and pos[j + 1]:
            j += 1
        if j - i + 1 >= 3 and i > 0 and j < m - 1:
            w = np.empty(j - i + 3)
            w[1:-1] = u[i : j + 1] ** 2
            xl = _axis_root(row, xs, i - 1, i)
            xr = _axis_root(row, xs, j + 1, j)
            w[0] = _closing_value(xs[i - 1], xl, xs[i], w[1], xs[i + 1], w[2])
            w[-1] = _closing_value(xs[j + 1], xr, xs[j], w[-2], xs[j - 1], w[-3])
            comps.append(ProfileCurve(n, xs[i - 1 : j + 2], w))
        i = j + 1
    return DomainSlice(comps, f.time)


# -- evolution ---------------------------------------------------------------


@dataclass(frozen=True)
class LsfSettings:
    cfl: float = 0.2
    reinit_every: int = 50
    # reinitialise early once the front has moved this many cells
    move_budget: float = 3.0
    sigma: float = SIGMA


def evolve_lsf(f: LevelSetField, t_end: float, recorder=None, n: int = 3,
               record_times=None, settings: LsfSettings = LsfSettings()) -> LevelSetField:
    """Evolve to ``t_end`` or extinction, whichever comes first.

    ``recorder.append`` receives the sublevel slice at every time in
    ``record_times`` (sorted) that is reached; once the field is extinct an
    empty slice is recorded at the next record time and the run stops.
    """
    g = f.grid
    dx = g.dx
    times = np.asarray(record_times if record_times is not None else [], dtype=float)
    times = times[times > f.time - 1e-15]
    k = 0
    f = reinitialize(f)
    a = np.array(f.phi)
    b = a.copy()
    ii, jj = _band_nodes(a, f.band)
    t = f.time
    steps = 0
    moved = 0.0
    base_dt = settings.cfl * dx * dx
    if k < len(times) and abs(times[k] - t) <= 1e-15:
        if recorder is not None:
            recorder.append(sublevel_slice(LevelSetField(g, a, t, f.band), n))
        k += 1
    while t < t_end:
        target = t_end if k >= len(times) else min(t_end, times[k])
        dt = min(base_dt, target - t)
        if target - t - dt < 1e-3 * base_dt:
            dt = target - t
        mv, lowest = _lsf_kernel(a, b, ii, jj, dx, dt, n, settings.sigma)
        a, b = b, a
        t = target if dt == target - t else t + dt
        steps += 1
        moved += mv
        extinct = lowest > 0 and a.min() > 0
        if not extinct and (steps >= settings.reinit_every or moved > settings.move_budget * dx):
            cur = reinitialize(LevelSetField(g, a, t, f.band))
            a = np.array(cur.phi)
            b = a.copy()
            ii, jj = _band_nodes(a, f.band)
            steps = 0
            moved = 0.0
        if k < len(times) and t >= times[k] - 1e-15:
            if recorder is not None:
                recorder.append(sublevel_slice(LevelSetField(g, a, t, f.band), n))
            k += 1
        if extinct:
            if recorder is not None and (k == 0 or t > times[k - 1]):
                recorder.append(DomainSlice([], t))
            break
    return LevelSetField(g, a, t, f.band)


def extinction_time_lsf(f: LevelSetField, n: int = 3, t_max: float = 10.0,
                        settings: LsfSettings = LsfSettings()) -> float:
    """First step at which no node of phi is <= 0."""
    out = evolve_lsf(f, t_max, None, n, None, settings)
    if not out.extinct:
        raise NotReached(f"not extinct by t={t_max}")
    return out.time


def slice_hausdorff(s1: DomainSlice, s2: DomainSlice, spacing: float) -> float:
    """Hausdorff distance between the boundaries of two slices in the half-plane."""
    from .spacetime import boundary_points

    def one_sided(a, b):
        pts = boundary_points(a, spacing)
        d = np.full(len(pts), np.inf)
        for c in b.components:
            d = np.minimum(d, polyline_distance(pts, c.polyline()))
        return float(d.max())

    if s1.empty or s2.empty:
        return np.inf
    return max(one_sided(s1, s2), one_sided(s2, s1))


def compute_t_epsilon(s: DomainSlice, epsilon: float, grid: GridSpec, n: int = 3,
                      settings: LsfSettings = LsfSettings()) -> float:
    """Time at which the level set flow of ``s`` is at Hausdorff distance epsilon from it.

    Coarse scan with checkpoints every few steps, then bisection on the
    bracketing interval until the distance is within dx/2 of epsilon.
    """
    if not epsilon > 0:
        raise ValidationError("epsilon must be positive")
    dx = grid.dx
    f = signed_distance_init(s, grid)
    spacing = dx / 2

    def dist(field_):
        cur = sublevel_slice(field_, n)
        return slice_hausdorff(s, cur, spacing) if not cur.empty else np.inf

    chunk = 20 * settings.cfl * dx * dx
    lo_f, lo_d = f, 0.0
    while True:
        nxt = evolve_lsf(lo_f, lo_f.time + chunk, None, n, None, settings)
        d = dist(nxt)
        if nxt.extinct or not np.isfinite(d):
            raise NotReached(f"flow went extinct before reaching distance {epsilon}")
        if d >= epsilon:
            hi_f, hi_d = nxt, d
            break
        lo_f, lo_d = nxt, d
    # bisection in time between the two checkpoints
    t_lo, t_hi = lo_f.time, hi_f.time
    for _ in range(40):
        if hi_d - epsilon <= dx / 2 and epsilon - lo_d <= dx / 2:
            break
        if t_hi - t_lo < 1e-3 * settings.cfl * dx * dx:
            break
        tm = 0.5 * (t_lo + t_hi)
        mid = evolve_lsf(lo_f, tm, None, n, None, settings)
        dm = dist(mid)
        if dm >= epsilon:
            t_hi, hi_d = tm, dm
        else:
            lo_f, lo_d, t_lo = mid, dm, tm
    # linear interpolation of the distance inside the final bracket
    if hi_d > lo_d:
        return float(t_lo + (epsilon - lo_d) / (hi_d - lo_d) * (t_hi - t_lo))
    return float(t_hi)
