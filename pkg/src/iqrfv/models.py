"""Concrete scalar conservation laws: fluxes, initial data, exact solutions.

Every model evaluates vectorized on point arrays of shape (..., d).  The
registry names used by the harness are linear1d, linear2d, linear3d,
rotation, burgers2d, burgers3d and riemann2d.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class ModelError(ValueError):
    pass


@dataclass
class ConservationLawModel:
    name: str
    dim: int
    domain: tuple
    flux_normal: Callable        # (pts, normals, u) -> F(u[,x]) . n
    initial: Callable            # (pts) -> values
    bc: object                   # "periodic" or {tag: spec}
    max_speed: Callable | None = None       # (umin, umax, normals) -> float
    velocity: Callable | None = None        # space-dependent advection field
    exact: Callable | None = None           # (pts, t) -> values
    smooth_ic: bool = True

    @property
    def space_dependent(self) -> bool:
        return self.velocity is not None


def _periodic_shift(ic, velocity, domain):
    lo = np.asarray(domain[0], dtype=float)
    hi = np.asarray(domain[1], dtype=float)
    period = hi - lo
    vel = np.asarray(velocity, dtype=float)

    def exact(pts, t):
        pts = np.asarray(pts, dtype=float)
        back = lo + np.mod(pts - vel * t - lo, period)
        return ic(back)

    return exact


def linear_advection_model(velocity, ic=None, domain=None,
                           name: str = "linear") -> ConservationLawModel:
    """Constant-velocity advection with periodic boundaries."""
    vel = np.atleast_1d(np.asarray(velocity, dtype=float))
    d = len(vel)
    if domain is None:
        domain = (np.zeros(d), np.ones(d))
    if ic is None:
        def ic(pts):
            pts = np.asarray(pts, dtype=float)
            out = np.sin(2 * np.pi * pts[..., 0])
            if d >= 2:
                out = out * np.sin(2 * np.pi * pts[..., 1])
            return out

    def flux_normal(pts, normals, u):
        vn = np.asarray(normals) @ vel
        return np.expand_dims(vn, axis=-1) * u if np.ndim(u) > np.ndim(vn) else vn * u

    def max_speed(umin, umax, normals):
        return float(np.max(np.abs(np.asarray(normals) @ vel)))

    return ConservationLawModel(
        name=name, dim=d, domain=domain, flux_normal=flux_normal,
        initial=ic, bc="periodic", max_speed=max_speed,
        exact=_periodic_shift(ic, vel, domain))


def leveque_shapes(x, y):
    """Hump + cone + slotted cylinder on the unit square, radius 0.15."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r0 = 0.15
    out = np.zeros(np.broadcast_shapes(x.shape, y.shape))

    r_hump = np.sqrt((x - 0.25) ** 2 + (y - 0.5) ** 2)
    mask = r_hump <= r0
    out = np.where(mask, 0.25 * (1.0 + np.cos(np.pi * np.minimum(r_hump, r0) / r0)), out)

    r_cone = np.sqrt((x - 0.5) ** 2 + (y - 0.25) ** 2)
    mask = r_cone <= r0
    out = np.where(mask, 1.0 - r_cone / r0, out)

    r_cyl = np.sqrt((x - 0.5) ** 2 + (y - 0.75) ** 2)
    in_cyl = r_cyl <= r0
    in_slot = (np.abs(x - 0.5) < 0.025) & (y < 0.85)
    out = np.where(in_cyl & ~in_slot, 1.0, out)
    return out


def rotation_model() -> ConservationLawModel:
    """Rigid rotation about (0.5, 0.5) of the hump/cone/slotted-cylinder data."""
    center = np.array([0.5, 0.5])

    def velocity(pts):
        pts = np.asarray(pts, dtype=float)
        return np.stack([0.5 - pts[..., 1], pts[..., 0] - 0.5], axis=-1)

    def flux_normal(pts, normals, u):
        vn = np.sum(velocity(pts) * np.asarray(normals), axis=-1)
        return vn * u

    def ic(pts):
        pts = np.asarray(pts, dtype=float)
        return leveque_shapes(pts[..., 0], pts[..., 1])

    def exact(pts, t):
        pts = np.asarray(pts, dtype=float)
        ct, st = np.cos(t), np.sin(t)
        dx = pts[..., 0] - center[0]
        dy = pts[..., 1] - center[1]
        back = np.stack([center[0] + ct * dx + st * dy,
                         center[1] - st * dx + ct * dy], axis=-1)
        return ic(back)

    bc = {tag: ("value", 0.0) for tag in ("x_lo", "x_hi", "y_lo", "y_hi")}
    return ConservationLawModel(
        name="rotation", dim=2, domain=(np.zeros(2), np.ones(2)),
        flux_normal=flux_normal, initial=ic, bc=bc, velocity=velocity,
        exact=exact, smooth_ic=False)


def burgers_model(dim: int, name: str | None = None) -> ConservationLawModel:
    """Burgers flux (u^2/2) in every direction with the sine initial data."""
    if dim not in (2, 3):
        raise ModelError("burgers model is defined for dim 2 or 3")
    half = dim * 1.0
    lo = -np.full(dim, half)
    hi = np.full(dim, half)

    def ic(pts):
        pts = np.asarray(pts, dtype=float)
        return 0.3 + 0.7 * np.sin(np.pi * pts.sum(axis=-1) / dim)

    def flux_normal(pts, normals, u):
        sn = np.sum(np.asarray(normals), axis=-1)
        if np.ndim(u) > np.ndim(sn):
            sn = np.expand_dims(sn, axis=-1)
        return 0.5 * u * u * sn

    def max_speed(umin, umax, normals):
        sn = np.max(np.abs(np.sum(np.asarray(normals), axis=-1)))
        return float(max(abs(umin), abs(umax)) * sn)

    def exact(pts, t):
        return burgers_exact_smooth(pts, t, dim)

    return ConservationLawModel(
        name=name or f"burgers{dim}d", dim=dim, domain=(lo, hi),
        flux_normal=flux_normal, initial=ic, bc="periodic",
        max_speed=max_speed, exact=exact)


def burgers_exact_smooth(pts, t, dim: int, tol: float = 1e-14,
                         max_iter: int = 100) -> np.ndarray:
    """Pre-shock exact solution by fixed-point iteration on
    u = 0.3 + 0.7 sin(pi sum(x)/dim - pi t u)."""
    pts = np.asarray(pts, dtype=float)
    theta = np.pi * pts.sum(axis=-1) / dim
    u = 0.3 + 0.7 * np.sin(theta)
    for _ in range(max_iter):
        nxt = 0.3 + 0.7 * np.sin(theta - np.pi * t * u)
        if np.max(np.abs(nxt - u)) <= tol:
            return nxt
        u = nxt
    raise ModelError("fixed-point iteration did not converge (post-shock query?)")


def riemann_ic_and_exact(pts, t) -> np.ndarray:
    """Four-state Riemann data for the 2D Burgers equation and its
    characteristics solution, valid through t = 1/12."""
    pts = np.asarray(pts, dtype=float)
    x = pts[..., 0]
    y = pts[..., 1]
    if t == 0.0:
        out = np.ones_like(x)
        out = np.where((x < 0.25) & (y < 0.25), 2.0, out)
        out = np.where((x > 0.25) & (y > 0.25), 3.0, out)
        return out
    mn = np.minimum(x, y)
    mx = np.maximum(x, y)
    fan_lo = 0.25 + 2 * t - np.minimum(np.sqrt(2 * np.abs(x - y) * t), t)
    out = np.full_like(x, 2.0)
    cond1 = mn < 0.25 + t
    cond2 = 0.25 + 1.5 * t < mx
    out = np.where(cond1 & cond2, 1.0, out)
    out = np.where((fan_lo <= mn) & (mn <= 0.25 + 3 * t), (mn - 0.25) / t, out)
    out = np.where(mn > 0.25 + 3 * t, 3.0, out)
    return out


def riemann_model() -> ConservationLawModel:
    burgers = burgers_model(2)

    def ic(pts):
        return riemann_ic_and_exact(pts, 0.0)

    def exact(pts, t):
        return riemann_ic_and_exact(pts, t)

    def dirichlet(pts, t):
        return riemann_ic_and_exact(pts, t)

    bc = {
        "x_lo": ("dirichlet", dirichlet),
        "y_lo": ("dirichlet", dirichlet),
        "x_hi": ("copy",),
        "y_hi": ("copy",),
    }
    return ConservationLawModel(
        name="riemann2d", dim=2, domain=(np.zeros(2), np.ones(2)),
        flux_normal=burgers.flux_normal, initial=ic, bc=bc,
        max_speed=burgers.max_speed, exact=exact, smooth_ic=False)


def _linear3d() -> ConservationLawModel:
    model = linear_advection_model([1.0, 2.0, 0.0], name="linear3d")

    def ic(pts):
        pts = np.asarray(pts, dtype=float)
        return np.sin(2 * np.pi * pts[..., 0]) * np.sin(2 * np.pi * pts[..., 1])

    model.initial = ic
    model.exact = _periodic_shift(ic, [1.0, 2.0, 0.0], model.domain)
    return model


_REGISTRY = {
    "linear1d": lambda: linear_advection_model([1.0], name="linear1d"),
    "linear2d": lambda: linear_advection_model([1.0, 2.0], name="linear2d"),
    "linear3d": _linear3d,
    "rotation": rotation_model,
    "burgers2d": lambda: burgers_model(2),
    "burgers3d": lambda: burgers_model(3),
    "riemann2d": riemann_model,
}


def get_model(name: str) -> ConservationLawModel:
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise ModelError(f"unknown model {name!r}; known: {sorted(_REGISTRY)}") from None


def model_names():
    return sorted(_REGISTRY)
