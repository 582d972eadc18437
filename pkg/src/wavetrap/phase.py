"""Reflected phases, their gradients and level-surface curvatures.

A reflected phase for the story ``J = (j_1, ..., j_n)`` is the optical path
length of the broken ray that leaves an initial wave (a plane wave
``(z - y) . d`` or a point source ``|z - y|``), reflects on
``j_1, ..., j_n`` in order and ends at ``x``.  The reflection points are
found by minimizing that length over the obstacle surfaces (Fermat's
principle).  For dispersing obstacles the minimization problem is
block-tridiagonal and positive definite, so it stays well conditioned for
long stories, unlike shooting from the initial wavefront.

Curvatures are carried as the 3x3 Hessian ``H`` of the phase (``H g = 0``
for the unit gradient ``g``).  Free flight maps ``H -> H (I + tau H)^-1``;
a reflection adds ``2 |g.n| S`` to the restriction of ``H`` to the surface
tangent plane, ``S`` being the shape operator.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ._validation import as_vector, check_story, normalize
from .errors import ConfigError, ConvergenceError, DomainError, FocalPointError, TangencyError
from .geometry import Hit, Scene, tangent_basis

I3 = np.eye(3)


# ---------------------------------------------------------------------------
# initial waves
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PlaneWave:
    """Initial phase ``(z - y) . d`` with unit direction ``d``."""

    y: np.ndarray
    d: np.ndarray

    def value(self, z):
        return float((np.asarray(z) - self.y).dot(self.d))

    def grad(self, z):
        return self.d

    def hess(self, z):
        return np.zeros((3, 3))


@dataclass(frozen=True)
class PointSource:
    """Initial phase ``|z - y|``."""

    y: np.ndarray

    def value(self, z):
        return float(np.linalg.norm(np.asarray(z) - self.y))

    def grad(self, z):
        return normalize(np.asarray(z) - self.y)

    def hess(self, z):
        v = np.asarray(z) - self.y
        r = np.linalg.norm(v)
        u = v / r
        return (I3 - np.outer(u, u)) / r


# ---------------------------------------------------------------------------
# Fermat solver
# ---------------------------------------------------------------------------

@dataclass
class RayPath:
    """Broken ray of a given story from an initial wave to ``x``."""

    story: tuple
    x: np.ndarray
    points: np.ndarray
    source: object
    length: float
    residual: float
    iterations: int
    cosines: np.ndarray = field(default_factory=lambda: np.zeros(0))
    normals: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    admissible: bool = True
    reason: str = ""

    @property
    def l_J(self) -> float:
        """Path length from the first reflection point to ``x``."""
        if not self.story:
            return 0.0
        pts = np.vstack([self.points, self.x])
        return float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))

    @property
    def first_point(self) -> np.ndarray:
        return self.points[0] if len(self.story) else self.x

    def directions(self) -> list[np.ndarray]:
        """Unit travel direction of each leg (initial leg first, final leg last)."""
        if not self.story:
            return [self.source.grad(self.x)]
        out = [self.source.grad(self.points[0])]
        pts = np.vstack([self.points, self.x])
        for a, b in zip(pts[:-1], pts[1:]):
            out.append(normalize(b - a))
        return out


def _total_length(source, P, x):
    if len(P) == 0:
        return source.value(x)
    pts = np.vstack([P, x])
    return source.value(P[0]) + float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))


def _grad_hess(source, P, x):
    """Gradient (n,3) and Hessian (3n,3n) of the path length in the points."""
    n = len(P)
    G = np.zeros((n, 3))
    H = np.zeros((3 * n, 3 * n))
    G[0] += source.grad(P[0])
    H[0:3, 0:3] += source.hess(P[0])
    nxt = np.vstack([P[1:], x])
    for i in range(n):
        v = nxt[i] - P[i]
        ln = np.linalg.norm(v)
        u = v / ln
        Pm = (I3 - np.outer(u, u)) / ln
        G[i] -= u
        H[3 * i:3 * i + 3, 3 * i:3 * i + 3] += Pm
        if i + 1 < n:
            G[i + 1] += u
            H[3 * i + 3:3 * i + 6, 3 * i + 3:3 * i + 6] += Pm
            H[3 * i:3 * i + 3, 3 * i + 3:3 * i + 6] -= Pm
            H[3 * i + 3:3 * i + 6, 3 * i:3 * i + 3] -= Pm
    return G, H


def _reduced(scene, story, source, P, x):
    """Gradient and Hessian in local graph charts of the obstacle surfaces."""
    n = len(P)
    G, H = _grad_hess(source, P, x)
    T = np.zeros((3 * n, 2 * n))
    frames, normals = [], []
    curv = np.zeros((2 * n, 2 * n))
    for i, j in enumerate(story):
        body = scene.body(j)
        nrm = body.normal(P[i])
        t1, t2 = tangent_basis(nrm)
        T[3 * i:3 * i + 3, 2 * i] = t1
        T[3 * i:3 * i + 3, 2 * i + 1] = t2
        S = body.shape_operator(P[i], basis=(t1, t2))
        # second-order term of the graph chart p(z) = p0 + z.t - 1/2 z^T S z n
        curv[2 * i:2 * i + 2, 2 * i:2 * i + 2] = -G[i].dot(nrm) * S
        frames.append((t1, t2))
        normals.append(nrm)
    gz = T.T @ G.ravel()
    Hz = T.T @ H @ T + curv
    return gz, 0.5 * (Hz + Hz.T), frames, np.array(normals)


def _chart_step(scene, story, P, frames, normals, dz):
    Q = np.empty_like(P)
    for i, j in enumerate(story):
        t1, t2 = frames[i]
        q = P[i] + dz[2 * i] * t1 + dz[2 * i + 1] * t2
        Q[i] = scene.body(j).project_along(q, normals[i])
    return Q


def _newton(scene, story, source, x, P, tol, max_iter):
    L = _total_length(source, P, x)
    res = np.inf
    for it in range(1, max_iter + 1):
        gz, Hz, frames, normals = _reduced(scene, story, source, P, x)
        res = float(np.max(np.abs(gz)))
        if res < tol:
            return P, res, it
        w = np.linalg.eigvalsh(Hz)
        shift = 0.0 if w[0] > 1e-10 * max(1.0, w[-1]) else (1e-3 - w[0])
        dz = np.linalg.solve(Hz + shift * np.eye(len(gz)), -gz)
        # keep steps well inside the charts
        scale = np.max(np.abs(dz))
        limit = 0.5 * min(scene.body(j).bounding_radius for j in set(story))
        if scale > limit:
            dz *= limit / scale
        step = 1.0
        for _ in range(40):
            Q = _chart_step(scene, story, P, frames, normals, step * dz)
            Lq = _total_length(source, Q, x)
            if Lq <= L + 1e-14 * max(1.0, abs(L)):
                break
            step *= 0.5
        else:
            return P, res, it
        P, L = Q, Lq
    gz, *_ = _reduced(scene, story, source, P, x)
    return P, float(np.max(np.abs(gz))), max_iter


def _seeds(scene: Scene, story, x, source, n_seeds: int = 9):
    ends = {1: scene.ray.a1, 2: scene.ray.a2}
    base = np.array([ends[j] for j in story])
    e = scene.axis
    b1, b2 = scene.transverse_basis
    xp = (x - scene.midpoint) - ((x - scene.midpoint).dot(e)) * e
    r = scene.cylinder_radius
    offsets = [np.zeros(3), xp, 0.5 * xp, r * b1, -r * b1, r * b2, -r * b2,
               2 * r * b1, -2 * r * b1]
    out = []
    for off in offsets[:n_seeds]:
        P = np.array([scene.body(j).project_along(p + off, scene.body(j).normal(p))
                      for j, p in zip(story, base)])
        out.append(P)
    return out


def solve_path(scene: Scene, x, story, source, seeds=None, tol: float = 1e-12,
               max_iter: int = 60, delta1: float | None = None) -> RayPath:
    """Stationary broken ray for ``story`` ending at ``x``.

    Newton runs from each seed in turn (at most nine default seeds); the
    first admissible converged path is returned.  A :class:`DomainError`
    is raised when none qualifies, i.e. ``x`` is outside the domain of the
    reflected phase.
    """
    x = as_vector(x, 3, "x")
    story = check_story(story)
    if not scene.outside(x):
        raise DomainError(f"x={x.tolist()} lies inside an obstacle")
    if not story:
        return RayPath(story, x, np.zeros((0, 3)), source, source.value(x), 0.0, 0)
    delta1 = scene.delta1 if delta1 is None else delta1
    seed_list = list(seeds) if seeds is not None else _seeds(scene, story, x, source)
    reasons = []
    best_res = np.inf
    for P0 in seed_list:
        try:
            P, res, it = _newton(scene, story, source, x, np.array(P0, dtype=float), tol, max_iter)
        except (np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
            reasons.append(str(exc))
            continue
        best_res = min(best_res, res)
        if res >= tol * 10:
            reasons.append(f"stagnated at residual {res:.2e}")
            continue
        path = _finalize(scene, story, source, x, P, res, it, delta1)
        if path.admissible:
            return path
        reasons.append(path.reason)
    if np.isfinite(best_res) and best_res >= tol * 10 and all("stagnated" in r for r in reasons):
        raise ConvergenceError(f"Fermat solve for story {story} stagnated", best_res)
    raise DomainError(f"x={x.tolist()} is outside the domain of story {story}: "
                      + "; ".join(sorted(set(reasons)))[:300])


def _finalize(scene, story, source, x, P, res, it, delta1) -> RayPath:
    path = RayPath(story, x, P, source, _total_length(source, P, x), res, it)
    dirs = path.directions()
    normals = np.array([scene.body(j).normal(p) for j, p in zip(story, P)])
    cos_in = np.array([dirs[i].dot(normals[i]) for i in range(len(story))])
    path.cosines = cos_in
    path.normals = normals
    if cos_in[0] > -delta1:
        path.admissible, path.reason = False, f"first incidence {cos_in[0]:.3f} > -delta1"
    elif np.any(cos_in >= -scene.tangency_tol):
        path.admissible, path.reason = False, "non-incoming or grazing reflection"
    elif np.any(np.array([dirs[i + 1].dot(normals[i]) for i in range(len(story))]) <= 0):
        path.admissible, path.reason = False, "outgoing leg does not leave the obstacle"
    elif isinstance(source, PlaneWave):
        e = scene.axis
        side = (P[0] - scene.midpoint).dot(e)
        if side * source.d.dot(e) <= 0:
            path.admissible, path.reason = False, "first reflection is not reached from the gap"
    return path


# ---------------------------------------------------------------------------
# wavefront samples
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WavefrontSample:
    """Phase value, unit gradient and curvature at one point.

    ``hessian`` is the 3x3 phase Hessian; ``curvature`` its 2x2 restriction
    to ``tangent_basis(grad)`` (level-surface second fundamental form).
    ``factors`` holds ``det(I + tau H)`` for each free leg after a
    reflection, so the curvature product is ``prod(1 / factors)``.
    """

    x: np.ndarray
    phase: float
    grad: np.ndarray
    hessian: np.ndarray
    story: tuple = ()
    sign: int = 1
    l_J: float = 0.0
    first_point: np.ndarray | None = None
    factors: tuple = ()
    points: np.ndarray | None = None

    @property
    def curvature(self) -> np.ndarray:
        t1, t2 = tangent_basis(self.grad)
        T = np.column_stack([t1, t2])
        C = T.T @ self.hessian @ T
        return 0.5 * (C + C.T)

    @property
    def curvature_eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.curvature)

    @property
    def curvature_product(self) -> float:
        return float(np.prod(1.0 / np.asarray(self.factors))) if self.factors else 1.0

    def as_dict(self) -> dict:
        return {"x": self.x.tolist(), "phase": self.phase, "grad": self.grad.tolist(),
                "curvature_eigenvalues": self.curvature_eigenvalues.tolist(),
                "story": list(self.story), "sign": self.sign, "l_J": self.l_J,
                "curvature_product": self.curvature_product}


def propagate_hessian(H, tau: float) -> np.ndarray:
    A = I3 + tau * H
    w = np.linalg.eigvalsh(0.5 * (A + A.T))
    if w[0] <= 0:
        raise FocalPointError(f"focal point within free flight of length {tau}")
    out = H @ np.linalg.inv(A)
    return 0.5 * (out + out.T)


def reflect_hessian(H, g, n, S, basis):
    """Reflected gradient and phase Hessian at a boundary point.

    ``S`` is the shape operator in ``basis`` (two tangent vectors at the
    reflection point).  On the surface tangent plane the reflected Hessian
    equals ``H + 2 |g.n| S``; together with ``H' g' = 0`` this fixes it.
    """
    c = float(g.dot(n))
    if c >= 0:
        raise TangencyError("wave is not incoming at the reflection point")
    g2 = g - 2.0 * c * n
    t1, t2 = basis
    T = np.column_stack([t1, t2])
    B2 = T.T @ H @ T + 2.0 * abs(c) * S
    M = np.column_stack([t1, t2, g2])
    B = np.zeros((3, 3))
    B[:2, :2] = B2
    Minv = np.linalg.inv(M)
    H2 = Minv.T @ B @ Minv
    return g2, 0.5 * (H2 + H2.T)


def propagate_wavefront(sample: WavefrontSample, tau: float) -> WavefrontSample:
    """Free flight over ``tau >= 0`` along the gradient (no obstacle check)."""
    if tau < 0:
        raise ConfigError("tau must be non-negative")
    H = propagate_hessian(sample.hessian, tau)
    return replace(sample, x=sample.x + tau * sample.grad, phase=sample.phase + tau, hessian=H)


def reflect_wavefront(sample: WavefrontSample, hit: Hit) -> WavefrontSample:
    """Specular reflection of a wavefront sample located at ``hit.point``."""
    if hit.tangential:
        raise TangencyError("tangential hit cannot reflect a wavefront")
    t1, t2 = tangent_basis(hit.normal)
    g2, H2 = reflect_hessian(sample.hessian, sample.grad, hit.normal, hit.shape_operator, (t1, t2))
    return replace(sample, x=np.asarray(hit.point, dtype=float), grad=g2, hessian=H2)


def wavefront_chain(scene: Scene, path: RayPath):
    """Phase Hessian at ``x`` and per-leg factors ``det(I + tau H)`` along ``path``."""
    if not path.story:
        return path.source.hess(path.x), ()
    P = path.points
    H = path.source.hess(P[0])
    g = path.source.grad(P[0])
    factors = []
    nxt = np.vstack([P[1:], path.x])
    for i, j in enumerate(path.story):
        body = scene.body(j)
        n = path.normals[i] if len(path.normals) else body.normal(P[i])
        t1, t2 = tangent_basis(n)
        S = body.shape_operator(P[i], basis=(t1, t2))
        g, H = reflect_hessian(H, g, n, S, (t1, t2))
        tau = float(np.linalg.norm(nxt[i] - P[i]))
        factors.append(float(np.linalg.det(I3 + tau * H)))
        H = propagate_hessian(H, tau)
        g = normalize(nxt[i] - P[i])
    return H, tuple(factors)


@dataclass(frozen=True)
class PhaseQuery:
    x: np.ndarray
    xi: np.ndarray
    story: tuple = ()
    y: np.ndarray = field(default_factory=lambda: np.zeros(3))
    sign: int = 1


def _direction(scene: Scene, xi, sign: int, cone_cos: float) -> np.ndarray:
    xi = as_vector(xi, 3, "xi")
    if np.linalg.norm(xi) == 0:
        raise ConfigError("xi must be nonzero")
    if sign not in (1, -1):
        raise ConfigError("sign must be +1 or -1")
    d = sign * xi / np.linalg.norm(xi)
    if abs(d.dot(scene.axis)) < cone_cos:
        raise DomainError("direction outside the admissible cone around the axis")
    return d


def evaluate_phase(scene: Scene, query: PhaseQuery, seeds=None, cone_cos: float = 0.5,
                   with_curvature: bool = True) -> WavefrontSample:
    """Reflected plane-wave phase ``phi_J^{sign}(x, xi)`` with gradient and curvature."""
    d = _direction(scene, query.xi, query.sign, cone_cos)
    y = as_vector(query.y, 3, "y")
    source = PlaneWave(y, d)
    path = solve_path(scene, query.x, query.story, source, seeds=seeds)
    return sample_from_path(scene, path, query.sign, with_curvature)


def sample_from_path(scene: Scene, path: RayPath, sign: int = 1,
                     with_curvature: bool = True) -> WavefrontSample:
    if with_curvature:
        H, factors = wavefront_chain(scene, path)
    else:
        H, factors = np.full((3, 3), np.nan), ()
    grad = path.directions()[-1]
    return WavefrontSample(x=path.x, phase=path.length, grad=grad, hessian=H,
                           story=path.story, sign=sign, l_J=path.l_J,
                           first_point=path.first_point, factors=factors,
                           points=path.points)


def phase_value(scene: Scene, x, xi, story, y, sign: int = 1, seeds=None) -> tuple[float, np.ndarray]:
    """Phase and reflection points only (no curvature work)."""
    d = _direction(scene, xi, sign, 0.0)
    path = solve_path(scene, x, story, PlaneWave(as_vector(y, 3, "y"), d), seeds=seeds)
    return path.length, path.points


def fd_gradient(scene: Scene, x, xi, story, y, sign: int = 1, step: float = 1e-5,
                points=None) -> np.ndarray:
    """Central-difference gradient of the phase in ``x`` (warm-started solves)."""
    x = np.asarray(x, dtype=float)
    g = np.zeros(3)
    seeds = None if points is None or len(points) == 0 else [points]
    for k in range(3):
        e = np.zeros(3)
        e[k] = step
        fp, _ = phase_value(scene, x + e, xi, story, y, sign, seeds=seeds)
        fm, _ = phase_value(scene, x - e, xi, story, y, sign, seeds=seeds)
        g[k] = (fp - fm) / (2 * step)
    return g


def alternating_story(first: int, length: int) -> tuple:
    other = 3 - first
    return tuple(first if k % 2 == 0 else other for k in range(length))


def story_class_for(scene: Scene, xi, sign: int) -> int:
    """Obstacle met first by the ``sign`` wave: 2 when ``sign * xi . e > 0``, else 1."""
    return 2 if sign * float(np.dot(xi, scene.axis)) > 0 else 1


# ---------------------------------------------------------------------------
# derivative growth
# ---------------------------------------------------------------------------

@dataclass
class GrowthTable:
    rows: list
    slope_x: float
    slope_xi: float
    bound_x: float

    def to_csv_rows(self):
        header = ["length", "m0", "m1_x", "m1_x_fd", "d_xi", "reliable"]
        return header, [[r[k] for k in header] for r in self.rows]


def derivative_growth_certificate(scene: Scene, max_length: int = 12, y=None, xi=None,
                                  samples=None, step: float = 1e-5, sign: int = 1) -> GrowthTable:
    """First-derivative sizes of ``grad phi_J`` for alternating stories up to ``max_length``.

    For each story length the table reports ``|grad phi_J|`` (order 0), the
    spectral norm of ``D_x grad phi_J`` from the curvature chain and from
    finite differences, and ``|D_xi grad phi_J|`` by finite differences.
    Growth in the story length is summarized by least-squares slopes of
    the log sizes.
    """
    y = scene.midpoint - 3.0 * scene.gap * scene.axis if y is None else as_vector(y)
    xi = scene.axis if xi is None else normalize(as_vector(xi))
    if samples is None:
        b1, b2 = scene.transverse_basis
        r = 0.3 * scene.cylinder_radius
        m = scene.midpoint
        samples = [m, m + r * b1, m - r * b2 + 0.2 * scene.gap * scene.axis]
    first = story_class_for(scene, xi, sign)
    rows = []
    t1, t2 = tangent_basis(xi)
    for n in range(0, max_length + 1):
        J = alternating_story(first, n)
        m0, m1, m1fd, dxi = [], [], [], []
        reliable = True
        for x in samples:
            s = evaluate_phase(scene, PhaseQuery(x, xi, J, y, sign))
            m0.append(np.linalg.norm(s.grad))
            m1.append(np.linalg.norm(s.hessian, 2))
            # FD of the gradient in x
            cols = []
            for k in range(3):
                e = np.zeros(3)
                e[k] = step
                sp = evaluate_phase(scene, PhaseQuery(x + e, xi, J, y, sign), seeds=[s.points] if n else None,
                                    with_curvature=False)
                sm = evaluate_phase(scene, PhaseQuery(x - e, xi, J, y, sign), seeds=[s.points] if n else None,
                                    with_curvature=False)
                cols.append((sp.grad - sm.grad) / (2 * step))
            m1fd.append(np.linalg.norm(np.column_stack(cols), 2))
            # FD in the direction of xi (unit sphere tangent directions)
            dcols = []
            for t in (t1, t2):
                sp = evaluate_phase(scene, PhaseQuery(x, normalize(xi + step * t), J, y, sign),
                                    seeds=[s.points] if n else None, with_curvature=False)
                sm = evaluate_phase(scene, PhaseQuery(x, normalize(xi - step * t), J, y, sign),
                                    seeds=[s.points] if n else None, with_curvature=False)
                diff = sp.grad - sm.grad
                if 0 < np.linalg.norm(diff) < 1e-10:
                    reliable = False
                dcols.append(diff / (2 * step))
            dxi.append(np.linalg.norm(np.column_stack(dcols), 2))
        rows.append({"length": n, "m0": float(max(m0)), "m1_x": float(max(m1)),
                     "m1_x_fd": float(max(m1fd)), "d_xi": float(max(dxi)), "reliable": reliable})
    lengths = np.array([r["length"] for r in rows], dtype=float)
    sel = lengths >= 1
    m1v = np.array([r["m1_x"] for r in rows])
    dxv = np.array([r["d_xi"] for r in rows])
    slope_x = float(np.polyfit(lengths[sel], np.log(np.maximum(m1v[sel], 1e-300)), 1)[0])
    slope_xi = float(np.polyfit(lengths[sel], np.log(np.maximum(dxv[sel], 1e-300)), 1)[0])
    return GrowthTable(rows=rows, slope_x=slope_x, slope_xi=slope_xi, bound_x=float(m1v[sel].max()))


# ---------------------------------------------------------------------------
# independent check of the reflection rule with a pencil of rays
# ---------------------------------------------------------------------------

def pencil_reflection_check(scene: Scene, sample: WavefrontSample, body: int,
                            delta: float = 1e-5) -> dict:
    """Compare the reflected curvature with one measured from five traced rays.

    Rays leave the level surface of ``sample`` near ``sample.x`` with
    directions given to first order by the sample's Hessian.  Each is
    traced to ``body`` and reflected specularly; the spread of the
    reflected directions across the plane normal to the central reflected
    ray gives ``H' = B A^-1`` by central differences.
    """
    obstacle = scene.body(body)
    hit = obstacle.intersect(sample.x, sample.grad, scene.tangency_tol)
    if hit is None:
        raise DomainError("central ray misses the obstacle")
    at_hit = propagate_wavefront(sample, hit.length)
    predicted = reflect_wavefront(at_hit, hit)
    g2 = predicted.grad
    u1, u2 = tangent_basis(g2)
    s1, s2 = tangent_basis(sample.grad)

    def trace(offset):
        x0 = sample.x + offset
        d0 = normalize(sample.grad + sample.hessian @ offset)
        h = obstacle.intersect(x0, d0, scene.tangency_tol)
        if h is None:
            raise DomainError("pencil ray misses the obstacle")
        d1 = d0 - 2.0 * d0.dot(h.normal) * h.normal
        # move to the plane through the central hit point normal to g2
        tau = (hit.point - h.point).dot(g2) / d1.dot(g2)
        z = h.point + tau * d1
        return np.array([(z - hit.point).dot(u1), (z - hit.point).dot(u2)]), \
            np.array([d1.dot(u1), d1.dot(u2)])

    A = np.zeros((2, 2))
    B = np.zeros((2, 2))
    for k, s in enumerate((s1, s2)):
        zp, dp = trace(delta * s)
        zm, dm = trace(-delta * s)
        A[:, k] = (zp - zm) / (2 * delta)
        B[:, k] = (dp - dm) / (2 * delta)
    measured = B @ np.linalg.inv(A)
    U = np.column_stack([u1, u2])
    chain = U.T @ predicted.hessian @ U
    return {"chain": chain, "pencil": 0.5 * (measured + measured.T),
            "error": float(np.abs(chain - measured).max()),
            "scale": float(np.abs(chain).max())}


# ---------------------------------------------------------------------------
# sampled geometric properties and the domain threshold
# ---------------------------------------------------------------------------

def gap_samples(scene: Scene, m: int, seed=0, radius: float | None = None) -> np.ndarray:
    """Uniform points of the cylinder between the obstacles, outside both of them."""
    rng = np.random.default_rng(seed)
    r = scene.cylinder_radius if radius is None else radius
    b1, b2 = scene.transverse_basis
    out = []
    while len(out) < m:
        s = rng.uniform(0, scene.gap, 4 * m)
        rr = r * np.sqrt(rng.uniform(size=4 * m))
        th = rng.uniform(0, 2 * np.pi, 4 * m)
        X = (scene.ray.a1 + s[:, None] * scene.axis + (rr * np.cos(th))[:, None] * b1
             + (rr * np.sin(th))[:, None] * b2)
        out.extend(x for x in X if scene.outside(x))
    return np.array(out[:m])


@dataclass
class PropertySampling:
    """Outcome of the sampled shadow (P2) and sublevel-convexity (P3) checks."""

    p2_checked: int
    p2_failures: int
    p3_checked: int
    p3_failures: int
    p3_worst: float
    skipped: int
    p2_fail_min_radius: float = float("inf")

    @property
    def passes(self) -> bool:
        return self.p2_failures == 0 and self.p3_failures == 0

    def as_dict(self) -> dict:
        d = self.__dict__.copy()
        d["passes"] = self.passes
        return d


def property_sampling(scene: Scene, max_length: int = 6, y=None, xi=None, sign: int = 1,
                      m: int = 30, seed=0, tol: float = 1e-9,
                      radius: float | None = None) -> PropertySampling:
    """Falsification tests for the shadow condition and sublevel convexity.

    Shadow: from ``x`` the forward ray along ``grad phi_J`` meets the obstacle
    not reflected on last; failures are summarized by the smallest transverse
    radius at which one occurred, since the tube radius is a free parameter.
    Convexity: for sampled pairs ``a, b`` the
    midpoint satisfies ``phi(mid) <= max(phi(a), phi(b)) + tol``.
    """
    from .billiard import _next_hit

    y = scene.midpoint - 3.0 * scene.gap * scene.axis if y is None else as_vector(y)
    xi = scene.axis if xi is None else normalize(as_vector(xi))
    rng = np.random.default_rng(seed)
    X = gap_samples(scene, 2 * m, rng, radius)
    first = story_class_for(scene, xi, sign)
    p2 = p2f = p3 = p3f = skipped = 0
    fail_r = np.inf
    worst = -np.inf
    for n in range(max_length + 1):
        J = alternating_story(first, n)
        target = first if n == 0 else 3 - J[-1]
        for i in range(m):
            a, b = X[2 * i], X[2 * i + 1]
            mid = 0.5 * (a + b)
            try:
                sa = evaluate_phase(scene, PhaseQuery(a, xi, J, y, sign), with_curvature=False)
                sb = evaluate_phase(scene, PhaseQuery(b, xi, J, y, sign), with_curvature=False)
                pm, _ = phase_value(scene, mid, xi, J, y, sign)
            except (DomainError, ConvergenceError):
                skipped += 1
                continue
            for s in (sa, sb):
                p2 += 1
                _, j, _ = _next_hit(scene, s.x, s.grad, exclude=None)
                if j != target:
                    p2f += 1
                    d = s.x - scene.ray.a1
                    fail_r = min(fail_r, float(np.linalg.norm(d - d.dot(scene.axis) * scene.axis)))
            p3 += 1
            excess = pm - max(sa.phase, sb.phase)
            worst = max(worst, excess)
            p3f += int(excess > tol)
    return PropertySampling(p2, p2f, p3, p3f, float(worst), skipped, fail_r)


@dataclass
class DomainThreshold:
    """Smallest story length from which every sample lies in the detected domain."""

    threshold: int | None
    success: dict
    samples: int
    max_length: int

    def as_dict(self) -> dict:
        return {"threshold": self.threshold, "success": {str(k): v for k, v in self.success.items()},
                "samples": self.samples, "max_length": self.max_length}


def domain_threshold(scene: Scene, max_length: int = 12, y=None, xi=None, sign: int = 1,
                     m: int = 20, seed=0) -> DomainThreshold:
    """Report the smallest ``M`` with domain detection succeeding on the gap samples
    for every alternating story of length ``M .. max_length``."""
    y = scene.midpoint - 3.0 * scene.gap * scene.axis if y is None else as_vector(y)
    xi = scene.axis if xi is None else normalize(as_vector(xi))
    X = gap_samples(scene, m, seed)
    first = story_class_for(scene, xi, sign)
    success = {}
    for n in range(max_length + 1):
        J = alternating_story(first, n)
        ok = 0
        for x in X:
            try:
                phase_value(scene, x, xi, J, y, sign)
                ok += 1
            except (DomainError, ConvergenceError):
                pass
        success[n] = ok / len(X)
    threshold = None
    for n in range(max_length, -1, -1):
        if success[n] < 1.0:
            break
        threshold = n
    return DomainThreshold(threshold, success, len(X), max_length)
