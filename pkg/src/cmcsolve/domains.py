"""Uniformly convex planar domains represented by smooth defining functions.

A domain is the super-level set {h > 0} of a smooth concave function h with
h = 0 on the boundary and D^2 h <= -theta I for a recorded theta > 0.  The
gradient Dh points inward, so Dh/|Dh| is the inner unit normal on the
boundary.  Two analytic kinds are provided (balls and axis-aligned ellipses)
plus the super-level composites used by the continuation family, obtained by
shifting h down by a constant level.

Conventions:
  * Ball(center, R):      h(x) = (R^2 - |x - center|^2) / (2R), so |Dh| = 1
    on the boundary and D^2 h = -I/R exactly.
  * Ellipse(center, a, b): h(x) = (s/2) (1 - ((x1-c1)/a)^2 - ((x2-c2)/b)^2)
    with s chosen so the boundary gradient magnitude stays within a recorded
    band [delta, 1/delta]; exact unit gradient is not needed because the
    boundary condition h(Du) = 0 and the obliqueness direction are invariant
    under positive scaling of h.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import brentq

from .errors import DegenerateSublevel, NotOnBoundary, RootFindFailure

# Relative tolerance (times domain diameter) for "x is on the boundary".
BOUNDARY_RTOL = 1e-9

# Angles used for the dense boundary quadrature behind measures().
_MEASURE_SAMPLES = 1024


class ConvexDomain:
    """Base class; subclasses provide the defining function."""

    def defining(self, x):
        """Evaluate (h, Dh, D2h) at points x of shape (..., 2).

        Defined on all of R^2 by the same smooth formula; h > 0 strictly
        inside, h = 0 on the boundary, h < 0 outside.
        """
        raise NotImplementedError

    @property
    def theta(self) -> float:
        """Uniform concavity constant: D^2 h <= -theta I everywhere."""
        raise NotImplementedError

    @property
    def h_max(self) -> float:
        """Maximum of h, attained at the unique interior peak."""
        raise NotImplementedError

    @property
    def peak(self) -> np.ndarray:
        """Interior maximizer of h."""
        raise NotImplementedError

    @property
    def grad_bound_delta(self) -> float:
        """delta > 0 with |Dh| in [delta, 1/delta] on the boundary."""
        raise NotImplementedError

    def diameter(self) -> float:
        raise NotImplementedError

    # -- derived geometry ---------------------------------------------------

    def boundary_tol(self) -> float:
        return BOUNDARY_RTOL * self.diameter()

    def inward_normal(self, x) -> np.ndarray:
        """Unit inward normal at a boundary point (Dh/|Dh|)."""
        x = np.asarray(x, dtype=float)
        h, dh, _ = self.defining(x)
        if np.any(np.abs(h) > self.boundary_tol()):
            raise NotOnBoundary(f"|h(x)| = {np.max(np.abs(h)):.3e} exceeds "
                                f"boundary tolerance {self.boundary_tol():.3e}")
        return dh / np.linalg.norm(dh, axis=-1, keepdims=True)

    def boundary_radius(self, phi, origin=None):
        """Distance from origin (default: peak) to the boundary along
        direction (cos phi, sin phi), by 1-D root finding on h.

        Convexity plus an interior origin make the root unique.
        """
        phi = np.atleast_1d(np.asarray(phi, dtype=float))
        origin = self.peak if origin is None else np.asarray(origin, dtype=float)
        scale = max(np.sqrt(2.0 * self.h_max / self.theta), 1e-12)
        out = np.empty(phi.shape)
        for k, p in np.ndenumerate(phi):
            e = np.array([np.cos(p), np.sin(p)])

            def f(r):
                return float(self.defining(origin + r * e)[0])

            hi = scale
            n_double = 0
            while f(hi) > 0:
                hi *= 2.0
                n_double += 1
                if n_double > 60:
                    raise RootFindFailure(f"cannot bracket boundary along phi={p}")
            out[k] = brentq(f, 0.0, hi, xtol=1e-15 * max(hi, 1.0), rtol=1e-15)
        return out if out.size > 1 else float(out[0])

    def boundary_radius_deriv(self, phi, origin=None):
        """dR/dphi by implicit differentiation of h(origin + R e(phi)) = 0."""
        phi = np.asarray(phi, dtype=float)
        origin = self.peak if origin is None else np.asarray(origin, dtype=float)
        r = np.atleast_1d(np.asarray(self.boundary_radius(phi, origin)))
        p = np.atleast_1d(phi)
        e = np.stack([np.cos(p), np.sin(p)], axis=-1)
        e_perp = np.stack([-np.sin(p), np.cos(p)], axis=-1)
        x = origin + r[..., None] * e
        _, dh, _ = self.defining(x)
        rp = -r * np.einsum('...i,...i->...', dh, e_perp) / np.einsum('...i,...i->...', dh, e)
        return rp if rp.size > 1 else float(rp[0])

    def sublevel(self, t: float) -> "ConvexDomain":
        """The super-level set {h >= (1-t) h_max} for t in (0, 1], wrapped
        with the shifted defining function h - (1-t) h_max.

        Returns self at t = 1.  Raises DegenerateSublevel when the level set
        is too small to resolve.
        """
        if not 0.0 < t <= 1.0:
            raise ValueError(f"t must be in (0, 1], got {t}")
        if t == 1.0:
            return self
        level = (1.0 - t) * self.h_max
        if isinstance(self, SublevelDomain):
            dom = SublevelDomain(self.base, self.level + level)
        else:
            dom = SublevelDomain(self, level)
        # resolvability floor: keep the level curve a few percent of the
        # original size so grids and root finding stay well conditioned
        rb = np.atleast_1d(dom.boundary_radius(np.linspace(0, 2 * np.pi, 8, endpoint=False)))
        if np.min(rb) < 1e-2 * self.diameter():
            raise DegenerateSublevel(f"super-level set at t={t} has inradius "
                                     f"{np.min(rb):.3e}, below the resolvable floor")
        return dom

    def measures(self) -> tuple[float, float]:
        """(area, perimeter); analytic when available, otherwise dense
        boundary quadrature about the peak (spectrally accurate for the
        smooth boundaries used here)."""
        phi = np.linspace(0, 2 * np.pi, _MEASURE_SAMPLES, endpoint=False)
        r = np.atleast_1d(self.boundary_radius(phi))
        rp = np.atleast_1d(self.boundary_radius_deriv(phi))
        dphi = 2 * np.pi / _MEASURE_SAMPLES
        area = 0.5 * np.sum(r ** 2) * dphi
        perimeter = np.sum(np.sqrt(r ** 2 + rp ** 2)) * dphi
        return float(area), float(perimeter)

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(eq=True)
class Ball(ConvexDomain):
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        self.center = (float(self.center[0]), float(self.center[1]))
        self.radius = float(self.radius)

    def defining(self, x):
        x = np.asarray(x, dtype=float)
        d = x - np.asarray(self.center)
        r2 = np.sum(d * d, axis=-1)
        h = (self.radius ** 2 - r2) / (2.0 * self.radius)
        dh = -d / self.radius
        d2h = np.broadcast_to(-np.eye(2) / self.radius, x.shape[:-1] + (2, 2)).copy()
        return h, dh, d2h

    @property
    def theta(self):
        return 1.0 / self.radius

    @property
    def h_max(self):
        return self.radius / 2.0

    @property
    def peak(self):
        return np.asarray(self.center, dtype=float)

    @property
    def grad_bound_delta(self):
        return 1.0

    def diameter(self):
        return 2.0 * self.radius

    def measures(self):
        return float(np.pi * self.radius ** 2), float(2 * np.pi * self.radius)

    def to_dict(self):
        return {"kind": "ball", "center": list(self.center), "radius": self.radius}


@dataclass(eq=True)
class Ellipse(ConvexDomain):
    center: tuple[float, float]
    semi_axes: tuple[float, float]

    def __post_init__(self):
        a, b = self.semi_axes
        if a <= 0 or b <= 0:
            raise ValueError(f"semi-axes must be positive, got {self.semi_axes}")
        self.center = (float(self.center[0]), float(self.center[1]))
        self.semi_axes = (float(a), float(b))
        # scale keeping boundary |Dh| = s*sqrt(cos^2/a^2 + sin^2/b^2) within
        # [1/2, 2]-ish: geometric-mean normalization, floored so min |Dh| >= 1/2
        self._scale = max(np.sqrt(a * b), max(a, b) / 2.0)

    def defining(self, x):
        x = np.asarray(x, dtype=float)
        a, b = self.semi_axes
        s = self._scale
        d = x - np.asarray(self.center)
        q = (d[..., 0] / a) ** 2 + (d[..., 1] / b) ** 2
        h = 0.5 * s * (1.0 - q)
        dh = np.empty_like(d)
        dh[..., 0] = -s * d[..., 0] / a ** 2
        dh[..., 1] = -s * d[..., 1] / b ** 2
        d2h = np.broadcast_to(-s * np.diag([1.0 / a ** 2, 1.0 / b ** 2]),
                              x.shape[:-1] + (2, 2)).copy()
        return h, dh, d2h

    @property
    def theta(self):
        return self._scale / max(self.semi_axes) ** 2

    @property
    def h_max(self):
        return self._scale / 2.0

    @property
    def peak(self):
        return np.asarray(self.center, dtype=float)

    @property
    def grad_bound_delta(self):
        a_max, a_min = max(self.semi_axes), min(self.semi_axes)
        return min(self._scale / a_max, a_min / self._scale)

    def diameter(self):
        return 2.0 * max(self.semi_axes)

    def measures(self):
        area = float(np.pi * self.semi_axes[0] * self.semi_axes[1])
        return area, super().measures()[1]

    def to_dict(self):
        return {"kind": "ellipse", "center": list(self.center),
                "semi_axes": list(self.semi_axes)}


@dataclass(eq=True)
class SublevelDomain(ConvexDomain):
    """Super-level composite {h_base >= level}, defined by h_base - level."""

    base: ConvexDomain
    level: float
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not 0.0 < self.level < self.base.h_max:
            raise ValueError(f"level must be in (0, h_max), got {self.level}")
        self.level = float(self.level)

    def defining(self, x):
        h, dh, d2h = self.base.defining(x)
        return h - self.level, dh, d2h

    @property
    def theta(self):
        return self.base.theta

    @property
    def h_max(self):
        return self.base.h_max - self.level

    @property
    def peak(self):
        return self.base.peak

    @cached_property
    def _boundary_stats(self):
        phi = np.linspace(0, 2 * np.pi, 64, endpoint=False)
        r = np.atleast_1d(self.boundary_radius(phi))
        x = self.peak + r[:, None] * np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        _, dh, _ = self.defining(x)
        g = np.linalg.norm(dh, axis=-1)
        return float(2 * np.max(r)), float(min(np.min(g), 1.0 / np.max(g)))

    @property
    def grad_bound_delta(self):
        return self._boundary_stats[1]

    def diameter(self):
        return self._boundary_stats[0]

    def to_dict(self):
        return {"kind": "sublevel", "base": self.base.to_dict(), "level": self.level}


def domain_from_dict(d: dict) -> ConvexDomain:
    kind = d.get("kind")
    if kind == "ball":
        return Ball(tuple(d["center"]), d["radius"])
    if kind == "ellipse":
        return Ellipse(tuple(d["center"]), tuple(d["semi_axes"]))
    if kind == "sublevel":
        return SublevelDomain(domain_from_dict(d["base"]), d["level"])
    raise ValueError(f"unknown domain kind {kind!r}")
