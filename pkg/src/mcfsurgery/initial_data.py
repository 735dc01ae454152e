"""Axisymmetric initial domains: spheres, capped cylinders, dumbbells."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import NotTwoConvex, ValidationError
from .profile import DomainSlice, ProfileCurve, is_two_convex


@dataclass(frozen=True)
class Sphere:
    R: float = 1.0


@dataclass(frozen=True)
class CappedCylinder:
    r: float = 0.5
    L: float = 2.0


@dataclass(frozen=True)
class Dumbbell:
    """Two spherical bells joined by a cylindrical neck.

    The neck |x| <= L_neck has radius r_neck.  Over the next ``smoothing``
    in |x| the profile bends up into a sphere of radius R_bell (R_right on
    the positive side when given).  The bend is prescribed through the
    ratio mu = u u'' / (1 + u'^2), which is 0 on a cylinder, -1 on a sphere
    and must stay <= 1 for two-convexity.  mu is a piecewise cubic in x
    (so the profile is C^2) whose plateau height is found by shooting.
    """
    R_bell: float = 1.0
    r_neck: float = 0.15
    L_neck: float = 1.0
    smoothing: float = 0.3
    R_right: float | None = None

    def bell(self, side: int) -> "Bell":
        R = self.R_bell if side < 0 or self.R_right is None else self.R_right
        return _bell(float(R), float(self.r_neck), float(self.L_neck), float(self.smoothing))

    @property
    def bell_center(self) -> float:
        return self.bell(+1).center

    @property
    def half_length(self) -> float:
        return max(self.bell(-1).center + self.bell(-1).R, self.bell(+1).center + self.bell(+1).R)


REFERENCE_DUMBBELL = Dumbbell(1.0, 0.15, 1.0, 0.3)

# fraction of the blend used by each ramp of mu
_RAMP = 0.15


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3 - 2 * t)


def blend_ratio(t, peak):
    """mu on the blend as a function of t in [0, 1]: 0 -> peak -> -1."""
    t = np.asarray(t, dtype=float)
    up = peak * _smoothstep(t / _RAMP)
    down = peak + (-1 - peak) * _smoothstep((t - (1 - _RAMP)) / _RAMP)
    return np.where(t < 0.5, up, down)


def _blend_rhs(k, peak):
    # w'' = 2 mu + (mu + 1) w'^2 / (2 w)  is  u u'' = mu (1 + u'^2) in w = u^2
    def f(s, y):
        m = blend_ratio(s / k, peak)
        return [y[1], 2 * m + (m + 1) * y[1] ** 2 / (2 * y[0])]
    return f


def _shoot(r, k, peak):
    sol = solve_ivp(_blend_rhs(k, peak), (0.0, k), [r * r, 0.0], method="DOP853",
                    rtol=1e-12, atol=1e-14, dense_output=True)
    if not sol.success:
        return np.inf, sol
    w, wp = sol.y[:, -1]
    # radius of the sphere centred on the axis and tangent at the end point
    return float(np.sqrt(w + wp * wp / 4)), sol


@dataclass(frozen=True)
class Bell:
    R: float
    peak: float
    center: float
    blend: object


@lru_cache(maxsize=64)
def _bell(R, r, L, k) -> Bell:
    if not (0 < r < R) or L < 0 or k <= 0:
        raise ValidationError(f"invalid dumbbell parameters R={R}, r={r}, L={L}, smoothing={k}")
    hi = 1.0
    while _shoot(r, k, hi)[0] < R:
        hi *= 2
        if hi > 1e4:
            raise ValidationError("dumbbell blend cannot reach the bell radius")
    peak = brentq(lambda m: _shoot(r, k, m)[0] - R, 0.0, hi, xtol=1e-13)
    _, sol = _shoot(r, k, peak)
    w, wp = sol.y[:, -1]
    return Bell(R, float(peak), float(L + k + wp / 2), sol.sol)


def _dumbbell_half(spec: Dumbbell, s, side):
    b = spec.bell(side)
    L, k, r = spec.L_neck, spec.smoothing, spec.r_neck
    t = np.clip(s - L, 0.0, k)
    w_blend = b.blend(t)[0] if np.size(t) else np.empty(0)
    return np.where(s <= L, r * r, np.where(s < L + k, w_blend, b.R**2 - (s - b.center) ** 2))


def _grid(half_extent: float, dx: float, pad: int = 3) -> np.ndarray:
    k = int(np.ceil(half_extent / dx)) + pad
    return np.arange(-k, k + 1) * dx


def lifted_samples(spec, xs) -> np.ndarray:
    """w = u^2 on ``xs``, continued past the axis closures as a smooth negative."""
    xs = np.asarray(xs, dtype=float)
    if isinstance(spec, Sphere):
        return spec.R**2 - xs**2
    if isinstance(spec, CappedCylinder):
        s = np.maximum(np.abs(xs) - spec.L, 0.0)
        return spec.r**2 - s**2
    if isinstance(spec, Dumbbell):
        s = np.abs(xs)
        return np.where(xs < 0, _dumbbell_half(spec, s, -1), _dumbbell_half(spec, s, +1))
    raise ValidationError(f"unknown initial data {spec!r}")


def half_extent(spec) -> float:
    if isinstance(spec, Sphere):
        return spec.R
    if isinstance(spec, CappedCylinder):
        return spec.L + spec.r
    return spec.half_length


def max_radius(spec) -> float:
    if isinstance(spec, Sphere):
        return spec.R
    if isinstance(spec, CappedCylinder):
        return spec.r
    return max(spec.R_bell, spec.R_right or 0.0)


def build_initial(spec, n: int = 3, dx: float = 0.005, check: bool = True) -> DomainSlice:
    """Sample ``spec`` on a uniform grid centred at x = 0.

    Raises NotTwoConvex (with the violating node) when ``check`` is set and
    the sampled profile fails the two-convexity test.
    """
    if dx <= 0:
        raise ValidationError("dx must be positive")
    xs = _grid(half_extent(spec), dx)
    c = ProfileCurve.from_support(n, xs, lifted_samples(spec, xs))
    if check:
        tc = is_two_convex(c)
        if not tc.ok:
            i = tc.worst_index
            raise NotTwoConvex(
                f"initial profile is not two-convex at node {i} (x={c.xs[i]:.6g}, margin {tc.margin:.4g})",
                node=i, x=float(c.xs[i]))
    return DomainSlice([c], 0.0)
