"""Curvature products, transport amplitudes and story counts.

Leading amplitudes follow the transport equation along the broken rays of
a reflected phase: their square equals the ratio of infinitesimal ray-tube
cross sections, which is the product over free legs of
``1 / det(I + tau H)`` (``H`` the phase Hessian right after a reflection).
That product is :func:`curvature_product`.  The initial plane leg has no
curvature and contributes the factor 1.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ._validation import as_vector, check_positive, check_story, normalize
from .billiard import transfer_monodromy, walk_segments
from .errors import ConfigError, DomainError, ResolutionError
from .fitting import ExponentialFit, LinearFit, LogLinearFit
from .geometry import Scene
from .phase import (PhaseQuery, PlaneWave, alternating_story, evaluate_phase, sample_from_path,
                    solve_path, story_class_for)
from .trapped import Cylinder

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# curvature products
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CurvatureProduct:
    story: tuple
    value: float
    factors: tuple = ()

    def partial(self, n: int) -> float:
        """Product over the first ``n`` legs."""
        return float(np.prod(1.0 / np.asarray(self.factors[:n]))) if n else 1.0

    def tail(self, n: int) -> float:
        """Product over the legs after the first ``n``."""
        rest = self.factors[n:]
        return float(np.prod(1.0 / np.asarray(rest))) if rest else 1.0


def curvature_product(scene: Scene, x, xi, story, y=None, sign: int = 1) -> CurvatureProduct:
    """``Lambda_J(x, xi)`` for the plane wave launched from ``y`` (default: 10 gaps behind the midpoint)."""
    story = check_story(story)
    if not story:
        return CurvatureProduct((), 1.0, ())
    xi = as_vector(xi, 3, "xi")
    if y is None:
        y = scene.midpoint - 10.0 * scene.gap * sign * normalize(xi)
    s = evaluate_phase(scene, PhaseQuery(as_vector(x, 3, "x"), xi, story, as_vector(y, 3, "y"), sign))
    val = s.curvature_product
    if not val > 0:
        raise DomainError(f"non-positive curvature product {val}")
    return CurvatureProduct(story, val, s.factors)


# ---------------------------------------------------------------------------
# convergence of Lambda_J / lambda^r
# ---------------------------------------------------------------------------

@dataclass
class ConvergenceReport:
    lam: float
    r: np.ndarray
    patterns: dict
    alpha: float
    r2: float
    flagged: bool

    def table(self):
        header = ["pattern", "r", "ratio_min", "ratio_max", "rel_step"]
        rows = []
        for name, p in self.patterns.items():
            for k, r in enumerate(self.r):
                step = p["rel_step"][k] if k < len(p["rel_step"]) else float("nan")
                rows.append([name, int(r), p["ratio_min"][k], p["ratio_max"][k], step])
        return header, rows

    def as_dict(self) -> dict:
        return {"lambda": self.lam, "r": self.r.tolist(), "alpha": self.alpha, "r2": self.r2,
                "flagged": self.flagged,
                "patterns": {k: {"a_est": v["a_est"], "alpha": v["alpha"], "r2": v["r2"]}
                             for k, v in self.patterns.items()}}


def _default_samples(scene: Scene, n: int = 4, seed: int = 0):
    rng = np.random.default_rng(seed)
    b1, b2 = scene.transverse_basis
    rad = 0.5 * scene.cylinder_radius
    out = [scene.midpoint]
    while len(out) < n:
        u = rng.uniform(-rad, rad, 2)
        a = rng.uniform(-0.3, 0.3) * scene.gap
        out.append(scene.midpoint + u[0] * b1 + u[1] * b2 + a * scene.axis)
    return np.array(out)


def convergence_check(scene: Scene, r_max: int = 10, r_min: int = 4, samples=None,
                      xi=None, lam: float | None = None,
                      noise_floor: float = 1e-11) -> ConvergenceReport:
    """Geometric convergence of ``Lambda_J / lambda^r`` for periodic stories.

    For ``J = I^r l`` with ``I`` a period of the alternating story and ``l``
    empty or one extra letter, the ratio is tabulated for ``r = 1..r_max``
    at each sample point.  Its relative change from ``r`` to ``r+1``
    (sup over samples) is fitted as ``C alpha^(2r)`` over ``r >= r_min``.
    Strongly hyperbolic scenes converge to round-off within a few periods;
    steps below ``noise_floor`` are then dropped and the window starts
    earlier.
    """
    if r_max < 6:
        raise ConfigError("r_max must be at least 6")
    samples = _default_samples(scene) if samples is None else np.atleast_2d(samples)
    xi = scene.axis if xi is None else normalize(as_vector(xi))
    lam = transfer_monodromy(scene).lam if lam is None else lam
    rs = np.arange(1, r_max + 2)
    patterns = {}
    all_r, all_d = [], []
    for sign in (1, -1):
        first = story_class_for(scene, xi, sign)
        y = scene.midpoint - 10.0 * scene.gap * sign * xi
        for extra in (0, 1):
            name = f"I{first}" + (f"+({first})" if extra else "")
            ratios = np.zeros((len(samples), len(rs)))
            for i, x in enumerate(samples):
                for k, r in enumerate(rs):
                    J = alternating_story(first, 2 * r + extra)
                    s = evaluate_phase(scene, PhaseQuery(x, xi, J, y, sign))
                    ratios[i, k] = s.curvature_product / lam**r
            rel = np.max(np.abs(np.diff(ratios, axis=1)) / ratios[:, :-1], axis=0)
            # entries at round-off level carry no information; when fewer than
            # three resolved steps remain in the window, extend it downwards
            resolved = rel > noise_floor
            ok = (rs[:-1] >= r_min) & resolved
            if ok.sum() < 3:
                ok = resolved.copy()
            fit = LogLinearFit(log_y=True).fit(rs[:-1][ok], rel[ok]) if ok.sum() >= 2 else None
            patterns[name] = {"a_est": float(np.mean(ratios[:, -1])),
                              "a_spread": float(np.ptp(ratios[:, -1])),
                              "ratio_min": ratios.min(axis=0).tolist(),
                              "ratio_max": ratios.max(axis=0).tolist(),
                              "rel_step": rel.tolist(),
                              "alpha": float(np.exp(fit.slope_ / 2)) if fit else float("nan"),
                              "r2": fit.r2_ if fit else float("nan")}
            all_r.extend(rs[:-1][ok])
            all_d.extend(rel[ok])
    # pooled fit on the sup over patterns
    pooled = {}
    for r, d in zip(all_r, all_d):
        pooled[r] = max(pooled.get(r, 0.0), d)
    rr = np.array(sorted(pooled))
    dd = np.array([pooled[r] for r in rr])
    fit = LogLinearFit(log_y=True).fit(rr, dd)
    alpha = float(np.exp(fit.slope_ / 2))
    flagged = fit.r2_ < 0.8 or any(p["r2"] < 0.8 for p in patterns.values())
    if flagged:
        log.warning("convergence of Lambda/lambda^r is not clearly geometric (R2=%.3f)", fit.r2_)
    return ConvergenceReport(lam, rs[:-1], patterns, alpha, fit.r2_, flagged)


# ---------------------------------------------------------------------------
# amplitudes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AmplitudeTerm:
    """Which transport term to evaluate: story, wave sign and order ``k``."""

    story: tuple = ()
    sign: int = 1
    order: int = 0
    support: dict = field(default_factory=dict)


class TransportTerm:
    """Transport amplitudes of one story at a fixed point ``x``, vectorized in ``t``.

    Everything that does not depend on ``t`` is computed once: the broken
    ray through ``x``, the leading amplitude ``a(x) = sqrt(Lambda_J(x))``
    and, for ``order >= 1``, the rays through every finite-difference
    stencil point at the quadrature nodes of each reflected leg.  Only the
    backward end point changes with ``t``, so evaluating a whole time
    series costs one batched call of the cutoff.

    ``spatial(X, V)`` is the position/direction factor of the cutoff; the
    frequency-shell factor is left to the caller.
    """

    def __init__(self, scene: Scene, story, d, y, x, spatial, order: int = 0, h: float = 0.05,
                 fd_factor: float = 0.25, nodes_per_leg: int = 4, min_step: float = 1e-4,
                 path=None):
        self.scene = scene
        self.story = check_story(story)
        self.d = normalize(as_vector(d))
        self.y = as_vector(y)
        self.x = as_vector(x)
        self.spatial = spatial
        self.order = int(order)
        if self.order not in (0, 1):
            raise ConfigError("only orders 0 and 1 are implemented")
        self.source = PlaneWave(self.y, self.d)
        self.path = path if path is not None else solve_path(scene, self.x, self.story, self.source)
        self.a_x = self._amp(self.path)
        self.delta = fd_factor * h
        self.nodes_per_leg = nodes_per_leg
        if self.order >= 1:
            if self.delta < min_step:
                raise ResolutionError(f"finite-difference step {self.delta:.2e} is below the floor {min_step:.1e}")
            self._prepare_nodes()

    def _amp(self, path):
        if not path.story:
            return 1.0
        return float(np.sqrt(sample_from_path(self.scene, path).curvature_product))

    def _prepare_nodes(self):
        gx, gw = np.polynomial.legendre.leggauss(self.nodes_per_leg)
        n = len(self.story)
        P = np.vstack([self.path.points, self.x])
        offs = [np.zeros(3)] + [s * self.delta * np.eye(3)[k] for k in range(3) for s in (1, -1)]
        weights, p1, lj, amp = [], [], [], []
        s_done = 0.0
        s_list = []
        for i in range(n, 0, -1):
            a, b = P[i - 1], P[i]
            length = float(np.linalg.norm(b - a))
            u = (b - a) / length
            sub = self.story[:i]
            seeds = [self.path.points[:i]]
            for xg, wg in zip(gx, gw):
                sigma = 0.5 * length * (xg + 1.0)
                z = b - sigma * u
                rows_p, rows_l, rows_a = [], [], []
                for off in offs:
                    pk = solve_path(self.scene, z + off, sub, self.source, seeds=seeds)
                    rows_p.append(pk.points[0])
                    rows_l.append(pk.l_J)
                    rows_a.append(self._amp(pk))
                p1.append(rows_p)
                lj.append(rows_l)
                amp.append(rows_a)
                weights.append(0.5 * length * wg)
                s_list.append(s_done + sigma)
            s_done += length
        self._s = np.array(s_list)
        self._w = np.array(weights)
        self._p1 = np.array(p1).reshape(len(s_list), 7, 3)
        self._lj = np.array(lj).reshape(len(s_list), 7)
        self._amp_n = np.array(amp).reshape(len(s_list), 7)
        self._leg_total = s_done

    def back_points(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if not self.story:
            return self.x[None, :] - t[:, None] * self.d, np.ones(len(t), dtype=bool)
        ok = t >= self.path.l_J
        return self.path.points[0][None, :] - (t - self.path.l_J)[:, None] * self.d, ok

    def _q(self, X):
        X = np.atleast_2d(X)
        return np.asarray(self.spatial(X, np.tile(self.d, (len(X), 1))), dtype=float)

    def w0(self, t) -> np.ndarray:
        B, ok = self.back_points(t)
        out = np.zeros(len(B))
        if ok.any():
            out[ok] = 0.5 * self.a_x * self._q(B[ok])
        return out

    def w1(self, t) -> np.ndarray:
        """``a(x) int box w_0 / (2 a) ds`` along the backward characteristic, for each ``t``."""
        if self.order < 1:
            raise ConfigError("term was prepared for order 0 only")
        t = np.atleast_1d(np.asarray(t, dtype=float))
        dl = self.delta
        out = np.zeros(len(t))
        gx, gw = np.polynomial.legendre.leggauss(self.nodes_per_leg)
        # reflected legs: cached stencils, time enters through tau = t - s
        if len(self._s):
            tau = t[:, None] - self._s[None, :]                          # (m, N)
            # stencil values: index 0 centre, 1..6 spatial; time offsets on the centre
            taus = np.concatenate([tau[..., None] + np.zeros(7), (tau + dl)[..., None],
                                   (tau - dl)[..., None]], axis=-1)       # (m, N, 9)
            P1 = np.concatenate([self._p1, self._p1[:, :1], self._p1[:, :1]], axis=1)   # (N, 9, 3)
            LJ = np.concatenate([self._lj, self._lj[:, :1], self._lj[:, :1]], axis=1)
            AM = np.concatenate([self._amp_n, self._amp_n[:, :1], self._amp_n[:, :1]], axis=1)
            rem = taus - LJ[None]
            valid = rem >= 0
            B = P1[None] - rem[..., None] * self.d                        # (m, N, 9, 3)
            vals = np.zeros(rem.shape)
            if valid.any():
                vals[valid] = 0.5 * AM[None].repeat(len(t), 0)[valid] * self._q(B[valid])
            c = vals[..., 0]
            lap = sum(vals[..., 1 + 2 * k] - 2 * c + vals[..., 2 + 2 * k] for k in range(3)) / dl**2
            tt = (vals[..., 7] - 2 * c + vals[..., 8]) / dl**2
            box = tt - lap
            live = self._s[None, :] <= t[:, None]
            out += np.sum(np.where(live, self._w[None, :] * box / (2.0 * self._amp_n[None, :, 0]), 0.0), axis=1)
        # initial plane leg: w_0 = q(z - tau d) / 2 with unit amplitude
        p_start = self.path.points[0] if self.story else self.x
        s0 = self._leg_total if self.story else 0.0
        for m, tm in enumerate(t):
            length = tm - s0
            if length <= 0:
                continue
            sig = 0.5 * length * (gx + 1.0)
            z = p_start[None, :] - sig[:, None] * self.d
            tau = tm - s0 - sig
            pts = []
            for off in [np.zeros(3)] + [s * dl * np.eye(3)[k] for k in range(3) for s in (1, -1)]:
                pts.append(z + off - tau[:, None] * self.d)
            pts.append(z - (tau + dl)[:, None] * self.d)
            pts.append(z - (tau - dl)[:, None] * self.d)
            v = 0.5 * self._q(np.vstack(pts)).reshape(9, -1)
            c = v[0]
            lap = sum(v[1 + 2 * k] - 2 * c + v[2 + 2 * k] for k in range(3)) / dl**2
            tt = (v[7] - 2 * c + v[8]) / dl**2
            out[m] += np.sum(0.5 * length * gw * (tt - lap) / 2.0)
        return self.a_x * out


def amplitude_eval(scene: Scene, term: AmplitudeTerm, x, t: float, xi, cutoff, y=None,
                   h: float = 0.05, fd_factor: float = 0.25, nodes_per_leg: int = 4,
                   min_step: float = 1e-4) -> complex:
    """Transport amplitude ``w_k^{J,sign}(x, t, xi)`` for ``k`` in {0, 1}.

    ``w_0 = 1/2 sqrt(Lambda_J) q(X_back, xi)`` where ``X_back`` is the start
    of the story-constrained backward ray of length ``t``; it vanishes until
    all reflections of ``J`` have been used.  ``w_1`` integrates
    ``box w_0 / (2 a)`` along the broken characteristic (``a`` the leading
    amplitude), with ``box`` taken by centred differences of step
    ``fd_factor * h`` in space and time.
    """
    if term.sign not in (1, -1):
        raise ConfigError("sign must be +1 or -1")
    xi = as_vector(xi, 3, "xi")
    t = check_positive(float(t), "t", strict=False)
    d = term.sign * normalize(xi)
    y = (scene.midpoint - 10.0 * scene.gap * d) if y is None else as_vector(y, 3, "y")

    def spatial(X, V):
        return cutoff(X, np.tile(xi, (len(X), 1)))

    tt = TransportTerm(scene, term.story, d, y, x, spatial, order=term.order, h=h,
                       fd_factor=fd_factor, nodes_per_leg=nodes_per_leg, min_step=min_step)
    if term.order == 0:
        return complex(tt.w0(t)[0])
    return complex(tt.w1(t)[0])


# ---------------------------------------------------------------------------
# decay of the leading amplitudes
# ---------------------------------------------------------------------------

@dataclass
class AmplitudeDecay:
    t: np.ndarray
    total: np.ndarray
    rate: float
    r2: float

    def rows(self):
        return [[float(a), float(b), self.rate] for a, b in zip(self.t, self.total)]


def amplitude_decay(scene: Scene, cutoff, t_grid, samples=None, xi=None, budget: int = 12,
                    y=None) -> AmplitudeDecay:
    """``sup_x sum_J |w_0^{J,+-}(x, t)|`` over sample points, with an exponential fit."""
    t_grid = np.asarray(t_grid, dtype=float)
    samples = _default_samples(scene, 6) if samples is None else np.atleast_2d(samples)
    xi = scene.axis if xi is None else as_vector(xi)
    total = np.zeros((len(samples), len(t_grid)))
    for sign in (1, -1):
        d = sign * normalize(xi)
        yy = scene.midpoint - 10.0 * scene.gap * d if y is None else as_vector(y)
        first = story_class_for(scene, xi, sign)
        for n in range(0, budget + 1):
            J = alternating_story(first, n)
            def spatial(X, V, d=d):
                return cutoff(X, np.tile(xi, (len(X), 1)))

            for i, x in enumerate(samples):
                try:
                    term = TransportTerm(scene, J, d, yy, x, spatial)
                except DomainError:
                    continue
                total[i] += np.abs(term.w0(t_grid))
    sup = total.max(axis=0)
    ok = sup > 0
    rate, r2 = float("nan"), float("nan")
    if ok.sum() >= 2:
        fit = ExponentialFit().fit(t_grid[ok], sup[ok])
        rate, r2 = fit.rate_, fit.r2_
    return AmplitudeDecay(t_grid, sup, rate, r2)


def amplitude_bound_table(scene: Scene, max_length: int = 10, samples=None, xi=None,
                          lam: float | None = None) -> dict:
    """Sup of ``sqrt(Lambda_J) / lambda^(|J|/4)`` per story length.

    Leading amplitudes are ``1/2 sqrt(Lambda_J) q``, and ``Lambda_J`` behaves
    like ``lambda^(|J|/2)``, so this ratio stays bounded above and below.
    """
    samples = _default_samples(scene) if samples is None else np.atleast_2d(samples)
    xi = scene.axis if xi is None else normalize(as_vector(xi))
    lam = transfer_monodromy(scene).lam if lam is None else lam
    first = story_class_for(scene, xi, 1)
    y = scene.midpoint - 10.0 * scene.gap * xi
    out = []
    for n in range(1, max_length + 1):
        J = alternating_story(first, n)
        vals = [np.sqrt(evaluate_phase(scene, PhaseQuery(x, xi, J, y)).curvature_product) for x in samples]
        out.append(float(max(vals)) / lam ** (n / 4))
    out = np.array(out)
    return {"lengths": list(range(1, max_length + 1)), "ratio": out.tolist(),
            "spread": float(out.max() / out.min())}


# ---------------------------------------------------------------------------
# story census
# ---------------------------------------------------------------------------

@dataclass
class StoryCensus:
    t: np.ndarray
    count: np.ndarray
    count_unlocalized: np.ndarray
    direct: np.ndarray
    c1: float
    c2: float
    slope: float
    intercept: float
    r2: float

    def rows(self):
        return [[float(a), int(b), int(c), int(d)] for a, b, c, d in
                zip(self.t, self.count, self.count_unlocalized, self.direct)]

    def as_dict(self) -> dict:
        return {"c1": self.c1, "c2": self.c2, "slope": self.slope, "intercept": self.intercept,
                "r2": self.r2}


def _reflection_windows(scene: Scene, D: Cylinder, collar: float, t_max: float, n_rays: int, seed: int):
    """Sample rays starting in the shrunken cylinder and record, per reflection count,
    the times spent inside the localization window."""
    rng = np.random.default_rng(seed)
    b1, b2 = scene.transverse_basis
    e = scene.axis
    inner = Cylinder(D.base + collar * e, e, D.length - 2 * collar, max(D.radius - collar, 1e-3), 0.0)
    u = rng.uniform(0, 1, n_rays)
    rad = inner.radius * np.sqrt(rng.uniform(0, 1, n_rays))
    ang = rng.uniform(0, 2 * np.pi, n_rays)
    X = (inner.base + (u * inner.length)[:, None] * e
         + (rad * np.cos(ang))[:, None] * b1 + (rad * np.sin(ang))[:, None] * b2)
    tilt = 0.5 * inner.radius / scene.gap
    V = (np.where(rng.uniform(size=n_rays) < 0.5, 1.0, -1.0)[:, None] * e
         + rng.uniform(-tilt, tilt, (n_rays, 1)) * b1 + rng.uniform(-tilt, tilt, (n_rays, 1)) * b2)
    V /= np.linalg.norm(V, axis=1)[:, None]
    nref = np.zeros(n_rays, dtype=int)
    records = []   # (k, t_enter, t_leave) of segments inside the window

    def on_segment(idx, P, W, L, t0):
        # parametrize the chord of the window along each segment
        sp = np.linspace(0.0, 1.0, 9)
        for j, i in enumerate(idx):
            pts = P[j] + (L[j] * sp)[:, None] * W[j]
            inside = inner.contains(pts)
            if inside.any():
                ts = t0[j] + L[j] * sp[inside]
                records.append((nref[i], float(ts.min()), float(ts.max())))
        nref[idx] += 1
        return None

    walk_segments(scene, X, V, t_max, on_segment)
    return records


def story_census(scene: Scene, t_max: float, D: Cylinder | None = None, collar: float | None = None,
                 n_rays: int = 400, n_t: int = 200, seed: int = 0) -> StoryCensus:
    """Number of stories with a nonvanishing localized term, per time.

    From sampled rays that start in the localization window (``D`` minus a
    collar of width ``collar`` near its ends) the reflection-count windows
    give ``c1 = min t/k`` and ``c2 = max t/(k+1)``.  A story of length ``n``
    is active at time ``t`` when ``c1 n <= t <= c2 (n + 1)``; two stories
    exist per length.  ``direct`` counts the (k, class) pairs actually
    observed at each time.
    """
    D = Cylinder.around(scene) if D is None else D
    collar = 0.1 * scene.gap if collar is None else collar
    recs = _reflection_windows(scene, D, collar, t_max, n_rays, seed)
    ks = np.array([r[0] for r in recs])
    t0 = np.array([r[1] for r in recs])
    t1 = np.array([r[2] for r in recs])
    pos = ks >= 1
    c1 = float(np.min(t0[pos] / ks[pos])) if pos.any() else float("inf")
    c2 = float(np.max(t1 / (ks + 1)))
    t = np.linspace(0.0, t_max, n_t)
    n_max = int(np.ceil(t_max / c1)) + 1 if np.isfinite(c1) else 0
    n = np.arange(1, n_max + 1)
    active = (c1 * n[None, :] <= t[:, None]) & (t[:, None] <= c2 * (n[None, :] + 1))
    count = 1 + 2 * active.sum(axis=1)
    unloc = 1 + 2 * (c1 * n[None, :] <= t[:, None]).sum(axis=1)
    direct = np.array([1 + 2 * len({k for k, a, b in recs if k >= 1 and a <= tt <= b}) for tt in t])
    fit = LinearFit().fit(t, count)
    return StoryCensus(t, count, unloc, direct, c1, c2, fit.slope_, fit.intercept_, fit.r2_)
