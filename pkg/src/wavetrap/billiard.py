"""Broken bicharacteristic flow between two convex obstacles.

Rays move at unit speed and reflect specularly.  Besides the plain flow this
module provides the story-constrained backward flow used by transport
amplitudes and the linearized return map of the periodic two-bounce orbit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import as_unit_vector, as_vector, check_positive, check_story
from .errors import ConfigError, ResolutionError, TangencyError
from .geometry import Scene


def reflect_direction(xi, n) -> np.ndarray:
    """Specular reflection ``xi - 2 (xi.n) n`` of an incoming direction."""
    xi = np.asarray(xi, dtype=float)
    n = np.asarray(n, dtype=float)
    c = float(xi.dot(n))
    if c >= 0.0:
        raise ConfigError(f"direction is not incoming (xi.n = {c:.3e} >= 0)")
    return xi - 2.0 * c * n


@dataclass(frozen=True)
class PhasePoint:
    x: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", as_vector(self.x, 3, "x"))
        object.__setattr__(self, "xi", as_unit_vector(self.xi, 3, "xi", tol=1e-9))


@dataclass(frozen=True)
class Event:
    time: float
    body: int
    point: np.ndarray
    cos_incidence: float
    normal: np.ndarray


@dataclass
class Trajectory:
    initial: PhasePoint
    events: list = field(default_factory=list)
    final: PhasePoint | None = None
    escaped: bool = False
    tangential: bool = False
    duration: float = 0.0

    @property
    def story(self) -> tuple[int, ...]:
        return tuple(ev.body for ev in self.events)

    @property
    def escape_time(self) -> float:
        """Time of the last reflection (0 if none) for escaped rays, else ``inf``."""
        if not self.escaped:
            return float("inf")
        return self.events[-1].time if self.events else 0.0

    def vertices(self) -> np.ndarray:
        """Start point, reflection points and final point (the polygonal path)."""
        pts = [self.initial.x] + [ev.point for ev in self.events] + [self.final.x]
        return np.array(pts)


def _next_hit(scene: Scene, x, xi, exclude: int | None, only: int | None = None):
    """Closest obstacle hit ahead of ``(x, xi)`` as ``(s, body index, Hit)``."""
    best = (np.inf, None, None)
    for j in (1, 2):
        if j == exclude or (only is not None and j != only):
            continue
        hit = scene.body(j).intersect(x, xi, scene.tangency_tol)
        if hit is not None and hit.length < best[0]:
            best = (hit.length, j, hit)
    return best


def flow(scene: Scene, p: PhasePoint, t: float, max_events: int = 100000) -> Trajectory:
    """Follow the broken ray from ``p`` for time ``t``.

    ``escaped`` is set when, at the final state, the forward ray meets
    neither obstacle; by convexity it then leaves every bounded set.  A
    grazing contact stops the trajectory at the contact point with
    ``tangential=True``.
    """
    if not isinstance(p, PhasePoint):
        p = PhasePoint(*p)
    t = check_positive(float(t), "t", strict=False)
    if not scene.outside(p.x):
        raise ConfigError("initial point lies inside an obstacle")
    traj = Trajectory(initial=p)
    x, xi = p.x.copy(), p.xi.copy()
    clock = 0.0
    last = None
    while len(traj.events) < max_events:
        s, j, hit = _next_hit(scene, x, xi, last)
        if j is None or clock + s > t:
            x = x + (t - clock) * xi
            clock = t
            if j is None:
                traj.escaped = True
            else:
                # no reflection before t; still escaped if the remaining ray is free
                traj.escaped = False
            break
        clock += s
        x = hit.point
        if hit.tangential:
            traj.tangential = True
            traj.events.append(Event(clock, j, x.copy(), hit.cos_incidence, hit.normal))
            break
        traj.events.append(Event(clock, j, x.copy(), hit.cos_incidence, hit.normal))
        xi = reflect_direction(xi, hit.normal)
        xi /= np.linalg.norm(xi)
        last = j
    traj.final = PhasePoint(x, xi)
    traj.duration = clock
    return traj


def flow_batch(scene: Scene, points, directions, t: float) -> list[Trajectory]:
    """Independent flows, returned in input order."""
    return [flow(scene, PhasePoint(x, v), t) for x, v in zip(points, directions)]


def backward_flow_constrained(scene: Scene, x, grad, story, t: float,
                              return_events: bool = False):
    """Backward spatial point after time ``t`` along a story-constrained ray.

    Starting at ``x`` with velocity ``-grad``, the ray may reflect only on
    ``story[-1]``, then ``story[-2]``, and so on; any other obstacle in the
    way is ignored, and after ``len(story)`` reflections the motion is free.
    """
    x = as_vector(x, 3, "x").copy()
    v = -as_unit_vector(grad, 3, "grad", tol=1e-8)
    story = check_story(story)
    t = check_positive(float(t), "t", strict=False)
    remaining = t
    pending = list(reversed(story))
    events = []
    while pending:
        j = pending[0]
        hit = scene.body(j).intersect(x, v, scene.tangency_tol)
        if hit is None or hit.length > remaining:
            break
        if hit.tangential:
            raise TangencyError(f"grazing contact with obstacle {j} in constrained backward flow")
        remaining -= hit.length
        x = hit.point
        v = reflect_direction(v, hit.normal)
        v /= np.linalg.norm(v)
        events.append((t - remaining, j, x.copy()))
        pending.pop(0)
    out = x + remaining * v
    if return_events:
        return out, events
    return out


# ---------------------------------------------------------------------------
# return map of the periodic orbit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReturnMapAnalysis:
    period: float
    monodromy: np.ndarray
    eigenvalues: np.ndarray
    lam: float
    mu_max: float
    block_dets: tuple[float, float]

    @property
    def rate(self) -> float:
        """Expansion rate per unit time, ``log(mu_max) / period``."""
        return float(np.log(self.mu_max) / self.period)

    def as_dict(self) -> dict:
        return {"period": self.period, "lambda": self.lam, "mu_max": self.mu_max,
                "eigenvalues": [float(np.real(e)) for e in self.eigenvalues],
                "block_dets": list(self.block_dets), "rate_per_time": self.rate}


def _section_state_to_ray(scene: Scene, z):
    b1, b2 = scene.transverse_basis
    e = scene.axis
    u1, u2, v1, v2 = z
    x = scene.midpoint + u1 * b1 + u2 * b2
    w = np.sqrt(max(0.0, 1.0 - v1 * v1 - v2 * v2))
    return x, v1 * b1 + v2 * b2 + w * e


def first_return(scene: Scene, z) -> np.ndarray:
    """Section state after one full period (reflections on 2 then 1).

    The section is the plane through the trapped-ray midpoint normal to the
    axis; a state is ``(u1, u2, v1, v2)``: transverse offset and transverse
    direction components in the basis ``scene.transverse_basis``.
    """
    x, xi = _section_state_to_ray(scene, z)
    for j in (2, 1):
        hit = scene.body(j).intersect(x, xi, scene.tangency_tol)
        if hit is None or hit.tangential:
            raise ResolutionError("return-map perturbation left the periodic orbit")
        x = hit.point
        xi = reflect_direction(xi, hit.normal)
    e = scene.axis
    s = (scene.midpoint - x).dot(e) / xi.dot(e)
    x = x + s * xi
    b1, b2 = scene.transverse_basis
    d = x - scene.midpoint
    return np.array([d.dot(b1), d.dot(b2), xi.dot(b1), xi.dot(b2)])


def _analyze(M: np.ndarray, period: float) -> ReturnMapAnalysis:
    ev = np.linalg.eigvals(M)
    order = np.argsort(np.abs(ev))
    ev = ev[order]
    small = ev[np.abs(ev) < 1.0]
    lam = float(np.real(np.prod(small))) if small.size else float("nan")
    blocks = (float(np.linalg.det(M[np.ix_([0, 2], [0, 2])])),
              float(np.linalg.det(M[np.ix_([1, 3], [1, 3])])))
    return ReturnMapAnalysis(period=period, monodromy=M, eigenvalues=ev, lam=lam,
                             mu_max=float(np.abs(ev[-1])), block_dets=blocks)


def _central_jacobian(scene: Scene, h: float) -> np.ndarray:
    M = np.empty((4, 4))
    for k in range(4):
        dz = np.zeros(4)
        dz[k] = h
        M[:, k] = (first_return(scene, dz) - first_return(scene, -dz)) / (2 * h)
    return M


def return_map(scene: Scene, step: float | None = None, max_cond: float = 1e8,
               richardson: bool = True) -> ReturnMapAnalysis:
    """Central-difference linearization of the two-bounce return map.

    The default step is ``1e-5 * gap``.  With ``richardson=True`` the
    step-``h`` and step-``h/2`` estimates are combined to cancel the
    second-order truncation term.
    """
    h = 1e-5 * scene.gap if step is None else step
    M = _central_jacobian(scene, h)
    if richardson:
        M = (4.0 * _central_jacobian(scene, h / 2) - M) / 3.0
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > max_cond:
        raise ResolutionError(f"return-map Jacobian condition number {cond:.3e} exceeds "
                              f"{max_cond:.0e}; change the finite-difference step")
    return _analyze(M, 2.0 * scene.gap)


def transfer_monodromy(scene: Scene) -> ReturnMapAnalysis:
    """Exact monodromy from ray-transfer matrices at normal incidence.

    Free flight over length ``l`` is ``[[I, l I], [0, I]]`` and a reflection
    at a point of shape operator ``S`` is ``[[I, 0], [2 S, I]]`` (unfolded
    picture).  Starting at the midpoint section the period reads
    ``F(l/2) R1 F(l) R2 F(l/2)``.
    """
    b1, b2 = scene.transverse_basis
    r = scene.ray
    I2 = np.eye(2)
    Z2 = np.zeros((2, 2))

    def free(length):
        return np.block([[I2, length * I2], [Z2, I2]])

    def mirror(body, a):
        S = body.shape_operator(a, basis=(b1, b2))
        return np.block([[I2, Z2], [2.0 * S, I2]])

    ell = r.gap
    M = free(ell / 2) @ mirror(scene.body1, r.a1) @ free(ell) @ mirror(scene.body2, r.a2) @ free(ell / 2)
    # reorder (u1, u2, v1, v2) like the finite-difference map
    return _analyze(M, 2.0 * ell)


def sphere_lambda(r1: float, r2: float, gap: float) -> float:
    """Closed-form contraction product for two spheres (both transverse blocks)."""
    F = np.array([[1.0, gap], [0.0, 1.0]])
    A = np.array([[1.0, 0.0], [2.0 / r1, 1.0]]) @ F @ np.array([[1.0, 0.0], [2.0 / r2, 1.0]]) @ F
    ev = np.linalg.eigvals(A)
    return float(np.min(np.abs(ev)) ** 2)


# ---------------------------------------------------------------------------
# vectorized segment walker (used by the trapped-set grids)
# ---------------------------------------------------------------------------

def _hit_lengths(body, P, W) -> np.ndarray:
    if hasattr(body, "intersect_many"):
        return body.intersect_many(P, W)
    out = np.full(len(P), np.inf)
    for i, (p, w) in enumerate(zip(P, W)):
        hit = body.intersect(p, w)
        if hit is not None:
            out[i] = hit.length
    return out


def _normals(body, P) -> np.ndarray:
    if hasattr(body, "intersect_many"):
        G = (P - body.center) @ body._Q
    else:
        G = np.array([body.gradient(p) for p in P])
    return G / np.linalg.norm(G, axis=1, keepdims=True)


def walk_segments(scene: Scene, X, V, t_max: float, on_segment) -> None:
    """Advance many rays at once, one free segment per sweep.

    For every sweep ``on_segment(idx, P, W, L, t0)`` receives the indices of
    the still-active rays, their segment start points and directions, the
    segment lengths (clipped at ``t_max``) and start times; it returns a
    boolean mask of rays to retire early (or ``None``).  Rays reaching
    ``t_max`` or escaping are retired automatically.  Grazing contacts are
    treated as ordinary reflections since they form a null set.
    """
    X = np.array(X, dtype=float, copy=True)
    V = np.array(V, dtype=float, copy=True)
    n = X.shape[0]
    clock = np.zeros(n)
    last = np.zeros(n, dtype=int)
    active = np.arange(n)
    while active.size:
        P, W = X[active], V[active]
        s1 = _hit_lengths(scene.body1, P, W)
        s2 = _hit_lengths(scene.body2, P, W)
        s1[last[active] == 1] = np.inf
        s2[last[active] == 2] = np.inf
        s = np.minimum(s1, s2)
        which = np.where(s1 <= s2, 1, 2)
        rem = t_max - clock[active]
        L = np.minimum(s, rem)
        stop = on_segment(active, P, W, L, clock[active])
        finished = s >= rem
        if stop is not None:
            finished = finished | stop
        go = ~finished
        if not np.any(go):
            break
        idx = active[go]
        Pn = P[go] + s[go, None] * W[go]
        Wn = W[go].copy()
        for j, body in ((1, scene.body1), (2, scene.body2)):
            m = which[go] == j
            if np.any(m):
                N = _normals(body, Pn[m])
                c = np.sum(Wn[m] * N, axis=1, keepdims=True)
                Wn[m] = Wn[m] - 2.0 * c * N
        Wn /= np.linalg.norm(Wn, axis=1, keepdims=True)
        X[idx] = Pn
        V[idx] = Wn
        clock[idx] += s[go]
        last[idx] = which[go]
        active = idx
