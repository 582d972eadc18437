"""Smooth strictly convex bodies, two-body scenes and convex gauges.

Bodies describe themselves through a level function ``F`` (negative inside),
its gradient and Hessian.  Everything else (normals, shape operators, ray
intersections, support points) is derived from those three callables, with
closed forms substituted for spheres and ellipsoids.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq, minimize, minimize_scalar
from scipy.spatial.transform import Rotation

from ._validation import as_unit_vector, as_vector, check_positive, normalize
from .errors import ConfigError, ConvergenceError

TANGENCY_TOL = 1e-8
DEFAULT_DELTA1 = 1e-2


def tangent_basis(n) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic orthonormal pair ``(t1, t2)`` with ``t1 x t2 = n``."""
    n = np.asarray(n, dtype=float)
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(n)))] = 1.0
    t1 = axis - axis.dot(n) * n
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(n, t1)
    return t1, t2


@dataclass(frozen=True)
class Hit:
    """First contact of a ray with a body.

    ``shape_operator`` is the 2x2 second fundamental form in the frame
    ``tangent_basis(normal)``; ``cos_incidence`` is ``|dir . normal|``.
    """

    point: np.ndarray
    length: float
    normal: np.ndarray
    shape_operator: np.ndarray
    cos_incidence: float
    tangential: bool = False


class ConvexBody:
    """Base class: subclasses provide ``level``, ``gradient`` and ``hessian``."""

    kind = "abstract"
    center: np.ndarray

    # -- level function interface -------------------------------------
    def level(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def hessian(self, x):
        raise NotImplementedError

    @property
    def bounding_radius(self) -> float:
        raise NotImplementedError

    # -- derived geometry ----------------------------------------------
    def normal(self, x) -> np.ndarray:
        g = self.gradient(x)
        return g / np.linalg.norm(g)

    def contains(self, x) -> bool:
        return bool(self.level(np.asarray(x, dtype=float)) < 0.0)

    def boundary_distance(self, X) -> np.ndarray:
        """First-order signed distance ``F / |grad F|`` (positive outside), row-wise."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.array([self.level(x) / np.linalg.norm(self.gradient(x)) for x in X])

    def shape_operator(self, p, basis=None) -> np.ndarray:
        """Second fundamental form at boundary point ``p`` (outward normal convention).

        Equals the tangential block of ``Hess F / |grad F|``; for the unit
        sphere this is the identity.
        """
        p = np.asarray(p, dtype=float)
        g = self.gradient(p)
        n = g / np.linalg.norm(g)
        t1, t2 = basis if basis is not None else tangent_basis(n)
        T = np.column_stack([t1, t2])
        S = T.T @ self.hessian(p) @ T / np.linalg.norm(g)
        return 0.5 * (S + S.T)

    def support(self, n) -> np.ndarray:
        """Boundary point maximizing ``x . n``."""
        raise NotImplementedError

    def radial_point(self, u) -> np.ndarray:
        """Boundary point on the half-line from the center along unit ``u``."""
        u = np.asarray(u, dtype=float)
        R = self.bounding_radius
        f = lambda r: self.level(self.center + r * u)
        r = brentq(f, 0.0, 1.01 * R, xtol=1e-14, maxiter=200)
        return self.center + r * u

    def intersect(self, origin, direction, tangency_tol: float = TANGENCY_TOL) -> Optional[Hit]:
        """First intersection of the ray ``origin + s*direction`` (s > 0), or ``None``."""
        origin = np.asarray(origin, dtype=float)
        direction = np.asarray(direction, dtype=float)
        s = self._first_root(origin, direction)
        if s is None:
            return None
        p = origin + s * direction
        n = self.normal(p)
        cosi = abs(float(direction.dot(n)))
        S = self.shape_operator(p)
        return Hit(point=p, length=float(s), normal=n, shape_operator=S,
                   cos_incidence=cosi, tangential=bool(cosi < tangency_tol))

    def _first_root(self, origin, direction):
        raise NotImplementedError

    def project_along(self, q, n) -> np.ndarray:
        """Boundary point on the line ``q + s n`` closest to ``s = 0``.

        Used as a surface chart around a boundary point with normal ``n``.
        """
        q = np.asarray(q, dtype=float)
        n = np.asarray(n, dtype=float)
        s = 0.0
        for _ in range(50):
            x = q + s * n
            f = self.level(x)
            df = float(self.gradient(x).dot(n))
            if df == 0.0:
                break
            ds = f / df
            s -= ds
            if abs(ds) < 1e-15 * max(1.0, self.bounding_radius):
                return q + s * n
        return self.radial_point(normalize(q - self.center))

    def sample_boundary(self, m: int, rng) -> np.ndarray:
        """``m`` boundary points (radial projection of uniform directions)."""
        u = rng.normal(size=(m, 3))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        return np.array([self.radial_point(ui) for ui in u])

    def min_curvature(self, m: int = 1000, rng=None) -> float:
        """Smallest shape-operator eigenvalue over ``m`` sampled boundary points."""
        rng = np.random.default_rng(0) if rng is None else rng
        pts = self.sample_boundary(m, rng)
        return float(min(np.linalg.eigvalsh(self.shape_operator(p))[0] for p in pts))

    def to_dict(self) -> dict:
        raise NotImplementedError


class Ellipsoid(ConvexBody):
    """Ellipsoid ``{c + R y : sum (y_i/a_i)^2 <= 1}`` with rotation ``R``."""

    kind = "ellipsoid"

    def __init__(self, center, semi_axes, rotation=None):
        self.center = as_vector(center, 3, "center")
        a = as_vector(semi_axes, 3, "semi_axes")
        if np.any(a <= 0):
            raise ConfigError("semi_axes must be positive")
        self.semi_axes = a
        if rotation is None:
            Rm = np.eye(3)
        elif isinstance(rotation, Rotation):
            Rm = rotation.as_matrix()
        else:
            Rm = np.asarray(rotation, dtype=float)
            if Rm.shape != (3, 3) or not np.allclose(Rm.T @ Rm, np.eye(3), atol=1e-10):
                raise ConfigError("rotation must be an orthogonal 3x3 matrix")
        self.rotation = Rm
        # quadratic form of the body in world coordinates and its inverse-like partner
        self._Q = Rm @ np.diag(1.0 / a**2) @ Rm.T
        self._M = Rm @ np.diag(a**2) @ Rm.T

    @property
    def bounding_radius(self) -> float:
        return float(self.semi_axes.max())

    def level(self, x):
        d = np.asarray(x, dtype=float) - self.center
        return np.einsum("...i,ij,...j->...", d, self._Q, d) - 1.0

    def gradient(self, x):
        return 2.0 * (np.asarray(x, dtype=float) - self.center) @ self._Q

    def hessian(self, x):
        return 2.0 * self._Q

    def boundary_distance(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        g = np.linalg.norm(self.gradient(X), axis=1)
        return self.level(X) / np.maximum(g, 1e-300)

    def support(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=float)
        Mn = self._M @ n
        return self.center + Mn / np.sqrt(n.dot(Mn))

    def radial_point(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return self.center + u / np.sqrt(u @ self._Q @ u)

    def project_along(self, q, n) -> np.ndarray:
        d = np.asarray(q, dtype=float) - self.center
        n = np.asarray(n, dtype=float)
        a = n @ self._Q @ n
        b = n @ self._Q @ d
        c = d @ self._Q @ d - 1.0
        disc = b * b - a * c
        if disc < 0:
            return self.radial_point(normalize(d))
        sq = np.sqrt(disc)
        qq = -(b + np.copysign(sq, b)) if (b != 0 or sq != 0) else 0.0
        roots = [r for r in ((qq / a) if a else np.inf, (c / qq) if qq else np.inf) if np.isfinite(r)]
        s = min(roots, key=abs) if roots else 0.0
        return self.center + d + s * n

    def _first_root(self, origin, direction):
        s = self.intersect_many(origin[None, :], direction[None, :])[0]
        return None if not np.isfinite(s) else float(s)

    def intersect_many(self, origins, directions) -> np.ndarray:
        """Vectorized first-hit travel length (``inf`` for a miss)."""
        d = np.asarray(origins, dtype=float) - self.center
        v = np.asarray(directions, dtype=float)
        a = np.einsum("ni,ij,nj->n", v, self._Q, v)
        b = np.einsum("ni,ij,nj->n", v, self._Q, d)
        c = np.einsum("ni,ij,nj->n", d, self._Q, d) - 1.0
        disc = b * b - a * c
        out = np.full(d.shape[0], np.inf)
        ok = disc >= 0.0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        # numerically stable smaller root of a s^2 + 2 b s + c
        qq = -(b + np.copysign(sq, b))
        with np.errstate(divide="ignore", invalid="ignore"):
            r1 = qq / a
            r2 = c / qq
        lo = np.minimum(r1, r2)
        hi = np.maximum(r1, r2)
        # origin outside (c>0): first positive root is lo when lo > 0
        hit = ok & (c > 0) & (lo > 0)
        out[hit] = lo[hit]
        inside = ok & (c <= 0) & (hi > 0)
        out[inside] = hi[inside]
        return out

    def to_dict(self) -> dict:
        return {"kind": "ellipsoid", "center": self.center.tolist(),
                "semi_axes": self.semi_axes.tolist(), "rotation": self.rotation.tolist()}

    def __repr__(self):
        return f"Ellipsoid(center={self.center.tolist()}, semi_axes={self.semi_axes.tolist()})"


class Sphere(Ellipsoid):
    """Round ball of given radius; reuses the ellipsoid quadric machinery."""

    kind = "sphere"

    def __init__(self, center, radius):
        self.radius = check_positive(float(radius), "radius")
        super().__init__(center, [radius] * 3)

    def normal(self, x):
        d = np.asarray(x, dtype=float) - self.center
        return d / np.linalg.norm(d)

    def support(self, n):
        return self.center + self.radius * np.asarray(n, dtype=float)

    def boundary_distance(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.linalg.norm(X - self.center, axis=1) - self.radius

    def shape_operator(self, p, basis=None):
        return np.eye(2) / self.radius

    def to_dict(self) -> dict:
        return {"kind": "sphere", "center": self.center.tolist(), "radius": self.radius}

    def __repr__(self):
        return f"Sphere(center={self.center.tolist()}, radius={self.radius})"


class ImplicitBody(ConvexBody):
    """Convex body given by a smooth level function ``F`` with ``F < 0`` inside.

    ``center`` must lie inside and ``bound`` must be a radius about ``center``
    containing the body.  The gradient defaults to central differences; the
    shape operator is always the finite-difference derivative of the unit
    normal field.
    """

    kind = "implicit"

    def __init__(self, F: Callable, center, bound: float, grad: Callable | None = None,
                 fd_step: float = 1e-5, name: str = "implicit"):
        self.F = F
        self.center = as_vector(center, 3, "center")
        self.bound = check_positive(float(bound), "bound")
        self._grad = grad
        self.fd_step = fd_step
        self.name = name
        if not self.F(self.center) < 0:
            raise ConfigError("implicit body: F(center) must be negative")

    @property
    def bounding_radius(self) -> float:
        return self.bound

    def level(self, x):
        return float(self.F(np.asarray(x, dtype=float)))

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        if self._grad is not None:
            return np.asarray(self._grad(x), dtype=float)
        h = 1e-6 * max(1.0, self.bound)
        E = np.eye(3) * h
        return np.array([(self.F(x + E[i]) - self.F(x - E[i])) / (2 * h) for i in range(3)])

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        h = self.fd_step * max(1.0, self.bound)
        E = np.eye(3) * h
        H = np.array([(self.gradient(x + E[i]) - self.gradient(x - E[i])) / (2 * h) for i in range(3)])
        return 0.5 * (H + H.T)

    def shape_operator(self, p, basis=None):
        p = np.asarray(p, dtype=float)
        n = self.normal(p)
        t1, t2 = basis if basis is not None else tangent_basis(n)
        h = self.fd_step * max(1.0, self.bound)
        cols = []
        for t in (t1, t2):
            dn = (self.normal(p + h * t) - self.normal(p - h * t)) / (2 * h)
            cols.append([t1.dot(dn), t2.dot(dn)])
        S = np.array(cols).T
        return 0.5 * (S + S.T)

    def _first_root(self, origin, direction):
        # restrict to the chord of the bounding ball, then bracket the first root
        d = origin - self.center
        b = d.dot(direction)
        disc = b * b - (d.dot(d) - self.bound**2)
        if disc <= 0:
            return None
        s0 = max(0.0, -b - np.sqrt(disc))
        s1 = -b + np.sqrt(disc)
        if s1 <= 0:
            return None
        f = lambda s: self.level(origin + s * direction)
        # F is quasiconvex along lines, so a bounded scalar minimization is unimodal
        res = minimize_scalar(f, bounds=(s0, s1), method="bounded",
                              options={"xatol": 1e-12 * max(1.0, s1)})
        s_min = float(res.x)
        if f(s_min) >= 0.0:
            return None
        if f(s0) <= 0.0:
            return s0 if s0 > 0 else None
        return self._newton_bracketed(f, s0, s_min)

    def _newton_bracketed(self, f, a, b, tol=1e-12):
        """Safeguarded Newton on ``[a, b]`` with ``f(a) > 0 >= f(b)``; bisection fallback."""
        s = a

        for _ in range(200):
            fs = f(s)
            if fs > 0:
                a = s
            else:
                b = s
            if b - a < tol:
                break
            h = 1e-7 * max(1.0, abs(s))
            df = (f(s + h) - f(s - h)) / (2 * h)
            step = s - fs / df if df != 0 else None
            s = step if step is not None and a < step < b else 0.5 * (a + b)
        return float(b)

    def support(self, n) -> np.ndarray:
        n = normalize(n)
        # maximize (p(u) . n) over directions u, p(u) the radial boundary point
        t1, t2 = tangent_basis(n)

        def u_of(z):
            return normalize(n + z[0] * t1 + z[1] * t2)

        obj = lambda z: -self.radial_point(u_of(z)).dot(n)
        res = minimize(obj, np.zeros(2), method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 4000})
        z = res.x
        # polish: Newton on the tangential part of the normal mismatch
        for _ in range(30):
            p = self.radial_point(u_of(z))
            r = np.array([self.normal(p).dot(t1), self.normal(p).dot(t2)])
            if np.linalg.norm(r) < 1e-13:
                break
            h = 1e-6
            J = np.empty((2, 2))
            for k in range(2):
                dz = np.zeros(2)
                dz[k] = h
                pp = self.radial_point(u_of(z + dz))
                pm = self.radial_point(u_of(z - dz))
                J[:, k] = (np.array([self.normal(pp).dot(t1), self.normal(pp).dot(t2)])
                           - np.array([self.normal(pm).dot(t1), self.normal(pm).dot(t2)])) / (2 * h)
            z = z - np.linalg.solve(J, r)
        return self.radial_point(u_of(z))

    def to_dict(self) -> dict:
        return {"kind": "implicit", "name": self.name, "center": self.center.tolist(),
                "bound": self.bound}


# ---------------------------------------------------------------------------
# two-body scenes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrappedRay:
    a1: np.ndarray
    a2: np.ndarray
    gap: float
    residual: float
    iterations: int

    @property
    def axis(self) -> np.ndarray:
        return (self.a2 - self.a1) / self.gap

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.a1 + self.a2)


def trapped_ray(body1: ConvexBody, body2: ConvexBody, tol: float = 1e-10,
                sweep_iter: int = 100) -> TrappedRay:
    """Common perpendicular of two disjoint convex bodies.

    The separating direction ``n`` maximizes the support gap
    ``(support2(-n) - support1(n)) . n``.  A fixed-point sweep that alternates
    between the two support maps gives a good start, and Newton on the
    tangential residual ``unit(a2 - a1) - n`` finishes it.
    """
    n = normalize(body2.center - body1.center, "center offset")

    def pair(m):
        return body1.support(m), body2.support(-m)

    def resid(m):
        a1, a2 = pair(m)
        d = a2 - a1
        nd = np.linalg.norm(d)
        if d.dot(m) <= 0 or nd == 0:
            raise ConfigError("bodies are not disjoint")
        return d / nd - m

    it = 0
    r = resid(n)
    while np.linalg.norm(r) > 1e-6 and it < sweep_iter:
        n = normalize(n + r)
        r = resid(n)
        it += 1
    for _ in range(50):
        res = float(np.linalg.norm(r))
        if res < tol:
            break
        t1, t2 = tangent_basis(n)
        h = 1e-6
        J = np.empty((2, 2))
        for k, t in enumerate((t1, t2)):
            rp = resid(normalize(n + h * t))
            rm = resid(normalize(n - h * t))
            J[:, k] = [(rp - rm).dot(t1) / (2 * h), (rp - rm).dot(t2) / (2 * h)]
        rt = np.array([r.dot(t1), r.dot(t2)])
        try:
            dz = np.linalg.solve(J, -rt)
        except np.linalg.LinAlgError:
            dz = rt
        n = normalize(n + dz[0] * t1 + dz[1] * t2)
        r = resid(n)
        it += 1
    a1, a2 = pair(n)
    d = a2 - a1
    gap = float(np.linalg.norm(d))
    # residual against the true outward normals at the endpoints
    res = max(float(np.linalg.norm(d / gap - body1.normal(a1))),
              float(np.linalg.norm(d / gap + body2.normal(a2))))
    if res > tol:
        raise ConvergenceError("trapped ray search did not converge", res)
    return TrappedRay(a1=a1, a2=a2, gap=gap, residual=res, iterations=it)


@dataclass(frozen=True)
class Scene:
    """Two disjoint strictly convex obstacles plus run-time tolerances.

    ``delta1`` is the minimal incidence cosine required of an admissible
    phase at its first obstacle; ``cylinder_radius`` is the radius of the
    reference cylinder around the trapped ray.
    """

    body1: ConvexBody
    body2: ConvexBody
    delta1: float = DEFAULT_DELTA1
    cylinder_radius: float = 0.25
    tangency_tol: float = TANGENCY_TOL
    name: str = "scene"
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        check_positive(self.cylinder_radius, "cylinder_radius")
        check_positive(self.tangency_tol, "tangency_tol")
        check_positive(self.delta1, "delta1", strict=False)
        _ = self.ray  # validates disjointness and finds the perpendicular

    @classmethod
    def two_spheres(cls, r1=1.0, r2=1.0, distance=4.0, **kw) -> "Scene":
        """Spheres centered at the origin and at ``(distance, 0, 0)``."""
        return cls(Sphere([0.0, 0.0, 0.0], r1), Sphere([distance, 0.0, 0.0], r2), **kw)

    @classmethod
    def standard(cls, **kw) -> "Scene":
        kw.setdefault("name", "standard")
        return cls.two_spheres(1.0, 1.0, 4.0, **kw)

    @classmethod
    def wide(cls, **kw) -> "Scene":
        """Radius-50 spheres with gap 2: weakly hyperbolic (``lambda`` about 0.32)."""
        kw.setdefault("name", "wide")
        return cls.two_spheres(50.0, 50.0, 102.0, **kw)

    def body(self, j: int) -> ConvexBody:
        if j == 1:
            return self.body1
        if j == 2:
            return self.body2
        raise ConfigError(f"body index must be 1 or 2, got {j}")

    @cached_property
    def ray(self) -> TrappedRay:
        return trapped_ray(self.body1, self.body2)

    @property
    def axis(self) -> np.ndarray:
        return self.ray.axis

    @property
    def gap(self) -> float:
        return self.ray.gap

    @property
    def midpoint(self) -> np.ndarray:
        return self.ray.midpoint

    @cached_property
    def transverse_basis(self) -> tuple[np.ndarray, np.ndarray]:
        return tangent_basis(self.axis)

    @cached_property
    def diameter(self) -> float:
        c1, c2 = self.body1.center, self.body2.center
        return float(np.linalg.norm(c2 - c1) + self.body1.bounding_radius
                     + self.body2.bounding_radius)

    @property
    def escape_radius(self) -> float:
        return 2.0 * self.diameter

    def outside(self, x) -> bool:
        return not (self.body1.contains(x) or self.body2.contains(x))

    def to_dict(self) -> dict:
        return {"name": self.name, "body1": self.body1.to_dict(), "body2": self.body2.to_dict(),
                "delta1": self.delta1, "cylinder_radius": self.cylinder_radius,
                "tangency_tol": self.tangency_tol}

    def describe(self, samples: int = 1000, seed: int = 0) -> dict:
        """Trapped ray, gap and convexity margins, as plain Python values."""
        rng = np.random.default_rng(seed)
        r = self.ray
        return {
            "a1": r.a1.tolist(), "a2": r.a2.tolist(), "gap": r.gap,
            "axis": r.axis.tolist(), "perpendicularity_residual": r.residual,
            "min_curvature_body1": self.body1.min_curvature(samples, rng),
            "min_curvature_body2": self.body2.min_curvature(samples, rng),
            "cylinder_radius": self.cylinder_radius, "delta1": self.delta1,
        }


def body_from_dict(d: dict) -> ConvexBody:
    kind = d.get("kind")
    if kind == "sphere":
        return Sphere(d["center"], d["radius"])
    if kind == "ellipsoid":
        rot = d.get("rotation")
        if rot is not None and np.asarray(rot).shape == (3,):
            rot = Rotation.from_rotvec(rot)
        return Ellipsoid(d["center"], d["semi_axes"], rot)
    raise ConfigError(f"unsupported body kind {kind!r} (scene files accept sphere, ellipsoid)")


def scene_from_dict(d: dict) -> Scene:
    for key in ("body1", "body2"):
        if key not in d:
            raise ConfigError(f"scene: missing field '{key}'")
    kw = {k: d[k] for k in ("delta1", "cylinder_radius", "tangency_tol", "name") if k in d}
    return Scene(body_from_dict(d["body1"]), body_from_dict(d["body2"]), **kw)


# ---------------------------------------------------------------------------
# convex gauges
# ---------------------------------------------------------------------------

class GaugeWeight:
    """Gauge of the ellipsoid ``{sum q_i (x - c)_i^2 <= 1}`` (diagonal in its frame).

    ``rho(x) = sqrt(sum q_i (x-c)_i^2)``.  With ``extended=True`` an extra
    coordinate ``z`` with coefficient 1 is appended, which gives
    ``sqrt(rho(x)^2 + z^2)``.
    """

    def __init__(self, q, center=None, extended: bool = False):
        q = np.asarray(q, dtype=float)
        if q.ndim != 1 or np.any(q <= 0):
            raise ConfigError("gauge coefficients must be a positive vector")
        self.base_q = q
        self.extended = bool(extended)
        self.q = np.append(q, 1.0) if extended else q
        self.dim = self.q.size
        c = np.zeros(self.dim) if center is None else np.asarray(center, dtype=float)
        if c.size == q.size and extended:
            c = np.append(c, 0.0)
        self.center = c
        self.params = None

    @classmethod
    def from_params(cls, n: int, k: int, eps: float, extended: bool = False) -> "GaugeWeight":
        """``x_1^2 + .. + x_k^2 + eps (x_{k+1}^2 + .. + x_n^2)``."""
        if not (1 <= k <= n):
            raise ConfigError(f"need 1 <= k <= n, got n={n}, k={k}")
        check_positive(eps, "eps")
        w = cls(np.r_[np.ones(k), np.full(n - k, float(eps))], extended=extended)
        w.params = (int(n), int(k), float(eps))
        return w

    def _d(self, x):
        d = np.asarray(x, dtype=float) - self.center
        if d.shape[-1] != self.dim:
            raise ConfigError(f"gauge expects points of dimension {self.dim}")
        return d

    def value(self, x):
        d = self._d(x)
        return np.sqrt(np.sum(self.q * d * d, axis=-1))

    def gradient(self, x):
        d = self._d(x)
        r = self.value(x)
        if np.any(r == 0):
            raise ConfigError("gauge gradient undefined at the center")
        return self.q * d / np.asarray(r)[..., None]

    def hessian(self, x):
        d = self._d(x)
        r = self.value(d + self.center)
        Qd = self.q * d
        return np.diag(self.q) / r - np.outer(Qd, Qd) / r**3

    def laplacian(self, x):
        d = self._d(x)
        r = self.value(x)
        Qd = self.q * d
        return self.q.sum() / r - np.sum(Qd * Qd, axis=-1) / r**3

    def evaluate(self, x) -> dict:
        x = np.asarray(x, dtype=float)
        return {"rho": float(self.value(x)), "grad": self.gradient(x)}

    def __call__(self, x):
        return self.value(x)


def gauge_eval(weight: GaugeWeight, x) -> dict:
    """Value and gradient of a gauge at ``x`` (error at the center)."""
    x = np.asarray(x, dtype=float)
    if np.allclose(x, weight.center, atol=0.0, rtol=0.0):
        raise ConfigError("gauge gradient is undefined at the center")
    return weight.evaluate(x)


def ray_intersect(body: ConvexBody, origin, direction,
                  tangency_tol: float = TANGENCY_TOL) -> Optional[Hit]:
    """Checked wrapper around :meth:`ConvexBody.intersect`."""
    origin = as_vector(origin, 3, "origin")
    direction = as_unit_vector(direction, 3, "direction")
    if body.contains(origin):
        raise ConfigError("ray origin lies inside the body")
    return body.intersect(origin, direction, tangency_tol)
