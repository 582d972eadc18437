"""Trapped sets of a cylinder around the periodic ray, and cutoff symbols.

A phase-space point ``(x, xi)`` is trapped in ``D`` for time ``T`` when the
unit-speed broken ray from ``(x, xi)`` or from ``(x, -xi)`` keeps its
position inside ``D`` during the whole interval ``[0, T]``.  All sets are
encoded through the *trapping time* ``tau(x, xi)``: the larger of the two
exit times, so that membership for time ``T`` is simply ``tau > T``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import distance_transform_cdt

from ._validation import check_interval, check_positive
from .billiard import transfer_monodromy, walk_segments
from .errors import ConfigError, ResolutionError
from .fitting import ExponentialFit, LogLinearFit
from .geometry import Scene


@dataclass(frozen=True)
class Cylinder:
    """Finite solid cylinder around the trapped ray.

    Axial coordinate ``s = (x - base) . axis`` ranges over
    ``[-margin, length + margin]``.
    """

    base: np.ndarray
    axis: np.ndarray
    length: float
    radius: float
    margin: float

    @classmethod
    def around(cls, scene: Scene, radius: float | None = None,
               axial_margin: float = 0.1) -> "Cylinder":
        """Default ``D``: ``scene.cylinder_radius`` and an axial margin of 10% of the gap."""
        r = scene.cylinder_radius if radius is None else check_positive(radius, "radius")
        return cls(scene.ray.a1, scene.axis, scene.gap, r, axial_margin * scene.gap)

    def _coords(self, X):
        d = np.asarray(X, dtype=float) - self.base
        s = d @ self.axis
        perp = d - s[..., None] * self.axis
        return s, perp

    def signed_margin(self, X) -> np.ndarray:
        """Positive inside, equal to the distance to the boundary in the axial/radial sense."""
        s, perp = self._coords(X)
        rad = self.radius - np.linalg.norm(perp, axis=-1)
        return np.minimum(rad, np.minimum(s + self.margin, self.length + self.margin - s))

    def contains(self, X) -> np.ndarray:
        return self.signed_margin(X) > 0

    def exit_parameter(self, P, W) -> np.ndarray:
        """First ``s >= 0`` with ``P + s W`` on the boundary, for rays starting inside."""
        s0, perp = self._coords(P)
        w_ax = W @ self.axis
        w_perp = W - w_ax[:, None] * self.axis
        a = np.sum(w_perp * w_perp, axis=1)
        b = np.sum(w_perp * perp, axis=1)
        c = np.sum(perp * perp, axis=1) - self.radius**2
        out = np.full(len(P), np.inf)
        with np.errstate(divide="ignore", invalid="ignore"):
            disc = np.maximum(b * b - a * c, 0.0)
            root = np.where(a > 0, (-b + np.sqrt(disc)) / a, np.inf)
            out = np.minimum(out, np.where(root >= 0, root, 0.0))
            lo = np.where(w_ax < 0, (-self.margin - s0) / w_ax, np.inf)
            hi = np.where(w_ax > 0, (self.length + self.margin - s0) / w_ax, np.inf)
        return np.minimum(out, np.minimum(lo, hi))

    def as_dict(self) -> dict:
        return {"base": self.base.tolist(), "axis": self.axis.tolist(), "length": self.length,
                "radius": self.radius, "axial_margin": self.margin}


def _in_obstacle(scene: Scene, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    out = np.zeros(len(X), dtype=bool)
    for body in (scene.body1, scene.body2):
        if hasattr(body, "intersect_many"):
            out |= body.level(X) < 0
        else:
            out |= np.array([body.level(x) < 0 for x in X])
    return out


def exit_times(scene: Scene, D: Cylinder, X, V, t_max: float) -> np.ndarray:
    """Time at which each forward ray first leaves ``D`` (``inf`` if not before ``t_max``).

    Starts outside ``D`` or inside an obstacle get exit time 0.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    V = np.atleast_2d(np.asarray(V, dtype=float))
    out = np.full(len(X), np.inf)
    bad = (~D.contains(X)) | _in_obstacle(scene, X)
    out[bad] = 0.0
    good = np.flatnonzero(~bad)
    if good.size == 0:
        return out

    def on_segment(idx, P, W, L, t0):
        sp = D.exit_parameter(P, W)
        leave = sp <= L
        out[good[idx[leave]]] = t0[leave] + sp[leave]
        return leave

    walk_segments(scene, X[good], V[good], t_max, on_segment)
    return out


def trapping_time(scene: Scene, D: Cylinder, X, V, t_max: float) -> np.ndarray:
    """``max(exit(x, xi), exit(x, -xi))``; membership in ``T_T(D)`` is ``tau > T``."""
    V = np.atleast_2d(np.asarray(V, dtype=float))
    return np.maximum(exit_times(scene, D, X, V, t_max), exit_times(scene, D, X, -V, t_max))


def path_margin(scene: Scene, D: Cylinder, X, V, T: float) -> np.ndarray:
    """Smallest signed ``D``-margin along the forward path over ``[0, T]``.

    The margin is concave along straight segments, so checking segment end
    points is exact.  Starts inside an obstacle get ``-inf``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    V = np.atleast_2d(np.asarray(V, dtype=float))
    out = D.signed_margin(X).astype(float)
    out[_in_obstacle(scene, X)] = -np.inf
    good = np.flatnonzero(np.isfinite(out))

    def on_segment(idx, P, W, L, t0):
        end = P + L[:, None] * W
        gi = good[idx]
        out[gi] = np.minimum(out[gi], D.signed_margin(end))
        return None

    if good.size:
        walk_segments(scene, X[good], V[good], T, on_segment)
    return out


def trapped_margin(scene: Scene, D: Cylinder, X, V, T: float) -> np.ndarray:
    """``max`` of the forward path margins of ``(x, xi)`` and ``(x, -xi)``."""
    V = np.atleast_2d(np.asarray(V, dtype=float))
    return np.maximum(path_margin(scene, D, X, V, T), path_margin(scene, D, X, -V, T))


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

@dataclass
class TrappedSetGrid:
    """Trapping times on a product grid of positions and directions.

    ``tau`` has shape ``(n_positions, n_directions)``; ``membership`` is the
    bit array for the stored ``T``.  ``shape``/``spacing`` describe the
    underlying structured axes, used to compute grid distances.
    """

    D: Cylinder
    T: float
    positions: np.ndarray
    directions: np.ndarray
    tau: np.ndarray
    shape: tuple
    spacing: tuple
    t_max: float
    warnings: list = field(default_factory=list)

    @property
    def membership(self) -> np.ndarray:
        return self.member_at(self.T)

    def member_at(self, T: float) -> np.ndarray:
        if T > self.t_max + 1e-12:
            raise ConfigError(f"grid was computed up to T={self.t_max}, asked for {T}")
        return self.tau > T

    def header(self) -> dict:
        return {"dims": list(self.shape), "spacings": list(self.spacing), "T": self.T,
                "t_max": self.t_max, "D": self.D.as_dict()}


def _tilted(scene: Scene, a1, a2):
    """Unit directions ``normalize(e + tan(a1) b1 + tan(a2) b2)``."""
    b1, b2 = scene.transverse_basis
    e = scene.axis
    V = e + np.tan(a1)[..., None] * b1 + np.tan(a2)[..., None] * b2
    return V / np.linalg.norm(V, axis=-1, keepdims=True)


def expansion_rate(scene: Scene) -> float:
    """Per-unit-time expansion rate of the periodic orbit (exact transfer matrices)."""
    return transfer_monodromy(scene).rate


def compute_trapped_set(scene: Scene, D: Cylinder | None = None, T: float = 0.0,
                        spatial_res: int = 9, angular_res: int = 9, axial_res: int = 9,
                        angle_max: float | None = None) -> TrappedSetGrid:
    """Membership of ``T_T(D)`` on a structured grid.

    Positions form an ``axial_res x spatial_res x spatial_res`` grid over the
    cylinder's bounding box (axial coordinate x two transverse offsets);
    directions are ``angular_res x angular_res`` tilts of the axis.  A
    warning is attached when the spacing exceeds the expected width
    ``radius * exp(-c T)`` of the trapped set.
    """
    D = Cylinder.around(scene) if D is None else D
    T = check_positive(float(T), "T", strict=False)
    b1, b2 = scene.transverse_basis
    s_ax = np.linspace(-D.margin, D.length + D.margin, axial_res)
    u = np.linspace(-D.radius, D.radius, spatial_res)
    amax = np.arctan(2 * D.radius / D.length) * 2 if angle_max is None else angle_max
    ang = np.linspace(-amax, amax, angular_res)
    S, U1, U2 = np.meshgrid(s_ax, u, u, indexing="ij")
    P = (D.base + S[..., None] * D.axis + U1[..., None] * b1 + U2[..., None] * b2).reshape(-1, 3)
    A1, A2 = np.meshgrid(ang, ang, indexing="ij")
    Vd = _tilted(scene, A1, A2).reshape(-1, 3)
    XX = np.repeat(P, len(Vd), axis=0)
    VV = np.tile(Vd, (len(P), 1))
    tau = trapping_time(scene, D, XX, VV, T).reshape(len(P), len(Vd))
    du = u[1] - u[0] if spatial_res > 1 else D.radius
    dang = ang[1] - ang[0] if angular_res > 1 else amax
    warn = []
    width = D.radius * np.exp(-expansion_rate(scene) * T)
    if max(du, dang) > width:
        msg = (f"grid spacing {max(du, dang):.3g} exceeds the expected trapped-set width "
               f"{width:.3g} at T={T}; the set is under-resolved")
        warn.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return TrappedSetGrid(D=D, T=T, positions=P, directions=Vd, tau=tau,
                          shape=(axial_res, spatial_res, spatial_res, angular_res, angular_res),
                          spacing=(s_ax[1] - s_ax[0] if axial_res > 1 else 0.0, du, du, dang, dang),
                          t_max=T, warnings=warn)


@dataclass
class SliceGrid:
    """Trapping times on the 2-d slice (transverse offset ``u`` along ``b1``,
    tilt angle ``a`` along ``b1``) through the midpoint section.

    Both axes share the same step, so Chebyshev grid distance equals the
    phase-space distance ``max(|du|, |da|)``.
    """

    D: Cylinder
    u: np.ndarray
    a: np.ndarray
    tau: np.ndarray
    step: float
    t_max: float

    def member_at(self, T: float) -> np.ndarray:
        if T > self.t_max + 1e-12:
            raise ConfigError(f"slice was computed up to T={self.t_max}, asked for {T}")
        return self.tau > T

    def distance(self, T_outer: float, T_inner: float) -> float:
        """Grid distance from ``T_{T_inner}`` to the complement of ``T_{T_outer}``.

        The distance is measured inside the sampled window: points outside
        it are ignored (padded as members of the outer set).  The window sits
        strictly inside ``D`` because rays starting on the wall of ``D`` with
        an inward velocity are trapped while their outside neighbours are
        not, which would pin every distance to zero.  Returns ``nan`` when
        the inner set is empty.
        """
        outer = np.pad(self.member_at(max(T_outer, 0.0)), 1, constant_values=True)
        inner = np.pad(self.member_at(T_inner), 1, constant_values=False)
        if not inner.any() or outer.all():
            return float("nan")
        dist = distance_transform_cdt(outer, metric="chessboard")
        return float(dist[inner].min()) * self.step


def slice_grid(scene: Scene, D: Cylinder, t_max: float, n: int = 401,
               half_width: float | None = None) -> SliceGrid:
    """Square slice with ``n x n`` samples over ``[-w, w]^2`` (default ``w = 0.6 * radius``)."""
    w = 0.6 * D.radius if half_width is None else half_width
    u = np.linspace(-w, w, n)
    a = np.linspace(-w, w, n)
    U, A = np.meshgrid(u, a, indexing="ij")
    b1, _ = scene.transverse_basis
    X = scene.midpoint + U.reshape(-1, 1) * b1
    V = _tilted(scene, A.ravel(), np.zeros(A.size))
    tau = trapping_time(scene, D, X, V, t_max).reshape(n, n)
    return SliceGrid(D=D, u=u, a=a, tau=tau, step=float(u[1] - u[0]), t_max=t_max)


@dataclass
class ShrinkageResult:
    c_est: float
    r2: float
    T_star: float
    T: np.ndarray
    distances: np.ndarray
    used: np.ndarray
    floor: float
    candidates: dict
    warnings: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"c_est": self.c_est, "r2": self.r2, "T_star": self.T_star,
                "T": self.T.tolist(), "distances": self.distances.tolist(),
                "used": self.used.tolist(), "grid_floor": self.floor, "warnings": self.warnings}


def shrinkage_fit(scene: Scene, D: Cylinder | None = None, T_list=None, n: int = 401,
                  T_star_candidates=(1.0, 2.0, 3.0, 4.0), grid: SliceGrid | None = None) -> ShrinkageResult:
    """Fit ``log d(T_{T-T*}^c, T_T) ~ -c T`` on a slice grid.

    Distances at the grid floor (one cell) carry no information and are
    left out of the fit; if nothing is left a :class:`ResolutionError` is
    raised.  ``T*`` is chosen among the candidates by best R^2.
    """
    D = Cylinder.around(scene) if D is None else D
    T_list = np.asarray(np.arange(2.0, 9.5, 1.0) if T_list is None else T_list, dtype=float)
    if T_list.size < 4:
        raise ConfigError("shrinkage_fit needs at least 4 values of T")
    if grid is None:
        grid = slice_grid(scene, D, float(T_list.max()), n=n)
    floor = grid.step
    best = None
    cands = {}
    warn = []
    for ts in T_star_candidates:
        d = np.array([grid.distance(T - ts, T) for T in T_list])
        used = np.isfinite(d) & (d > floor * 1.5)
        entry = {"distances": d.tolist(), "used": used.tolist()}
        if used.sum() >= 3:
            fit = ExponentialFit().fit(T_list[used], d[used])
            entry.update(c=fit.rate_, r2=fit.r2_)
            if best is None or fit.r2_ > best[0].r2_:
                best = (fit, ts, d, used)
        cands[float(ts)] = entry
    if best is None:
        raise ResolutionError("all shrinkage distances sit at the grid floor; increase resolution")
    fit, ts, d, used = best
    if (~used).any():
        warn.append(f"{int((~used).sum())} distances at the grid floor were excluded")
    return ShrinkageResult(c_est=fit.rate_, r2=fit.r2_, T_star=float(ts), T=T_list, distances=d,
                           used=used, floor=floor, candidates=cands, warnings=warn)


# ---------------------------------------------------------------------------
# cutoff symbol
# ---------------------------------------------------------------------------

def smoothstep(s):
    """C-infinity step: 0 for ``s <= 0``, 1 for ``s >= 1``."""
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        f0 = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
        f1 = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1.0 - s, 1.0)), 0.0)
        out = f0 / (f0 + f1)
    return np.where(s <= 0, 0.0, np.where(s >= 1, 1.0, out))


def smoothstep_slope_max() -> float:
    """``max |d/ds smoothstep|``; equals 2 for this profile."""
    return 2.0


@dataclass
class CutoffSymbol:
    """Smooth symbol supported in ``T_{2 eps |log h|}(D) x {alpha0 <= |xi| <= beta0}``.

    ``q = smoothstep(m / width) * psi(|xi|)`` with ``m`` the trapped margin
    over time ``T = 2 eps |log h|``, so ``q = 1`` where the margin exceeds
    ``width`` and ``q = 0`` outside the trapped set.  With ``collar > 0`` the
    symbol is also switched off smoothly within ``collar`` of the obstacles,
    which keeps it smooth where the cylinder ``D`` meets them.  Derivatives inherit the
    Lipschitz constant of ``m``, which grows like ``exp(c T) = h^(-2 c eps)``.
    """

    scene: Scene
    D: Cylinder
    eps: float
    h: float
    alpha0: float
    beta0: float
    width: float
    shell_width: float
    c_est: float | None = None
    collar: float = 0.0

    @property
    def T(self) -> float:
        return 2.0 * self.eps * abs(np.log(self.h))

    def shell(self, r):
        r = np.asarray(r, dtype=float)
        return (smoothstep((r - self.alpha0) / self.shell_width)
                * smoothstep((self.beta0 - r) / self.shell_width))

    def spatial(self, X, directions) -> np.ndarray:
        """Factor depending on position and unit direction only."""
        m = trapped_margin(self.scene, self.D, X, directions, self.T)
        out = smoothstep(m / self.width)
        if self.collar > 0:
            X = np.atleast_2d(X)
            dist = np.minimum(self.scene.body1.boundary_distance(X), self.scene.body2.boundary_distance(X))
            out = out * smoothstep(dist / self.collar)
        return out

    def __call__(self, X, Xi) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Xi = np.atleast_2d(np.asarray(Xi, dtype=float))
        r = np.linalg.norm(Xi, axis=1)
        out = np.zeros(len(X))
        ok = r > 0
        if ok.any():
            out[ok] = self.spatial(X[ok], Xi[ok] / r[ok, None]) * self.shell(r[ok])
        return out


def build_cutoff(scene: Scene, eps: float, h: float, alpha0: float = 0.5, beta0: float = 2.0,
                 D: Cylinder | None = None, width: float | None = None,
                 c_est: float | None = None, resolution: float | None = None,
                 collar: float | None = None) -> CutoffSymbol:
    """Construct the cutoff symbol; ``resolution`` (if given) must resolve the transition layer."""
    check_interval(h, "h", 0.0, 0.5)
    check_positive(eps, "eps")
    if not 0 < alpha0 < beta0:
        raise ConfigError("need 0 < alpha0 < beta0")
    D = Cylinder.around(scene) if D is None else D
    w = 0.5 * min(D.radius, D.margin) if width is None else check_positive(width, "width")
    collar = 0.1 * scene.gap if collar is None else check_positive(collar, "collar", strict=False)
    q = CutoffSymbol(scene, D, float(eps), float(h), float(alpha0), float(beta0), w,
                     0.25 * (beta0 - alpha0), c_est, float(collar))
    if resolution is not None:
        c = expansion_rate(scene) if c_est is None else c_est
        layer = w * np.exp(-c * q.T)
        if resolution > layer:
            raise ResolutionError(f"smoothing layer {layer:.3g} is below the resolution {resolution:.3g}")
    return q


@dataclass
class DerivativeGrowth:
    h: np.ndarray
    sup_grad: np.ndarray
    exponent: float
    r2: float
    bound: float | None

    def as_dict(self) -> dict:
        return {"h": self.h.tolist(), "sup_grad": self.sup_grad.tolist(),
                "exponent": self.exponent, "r2": self.r2, "bound": self.bound}


def cutoff_derivative_growth(scene: Scene, eps: float, h_list=None, c_est: float | None = None,
                             n_line: int = 4001, n_lines: int = 5, D: Cylinder | None = None,
                             alpha0: float = 0.5, beta0: float = 2.0) -> DerivativeGrowth:
    """Measure ``sup |grad q|`` across an h-ladder and fit its power of ``1/h``.

    Derivatives are taken by central differences along line scans through
    the midpoint section: offset lines ``u`` at fixed tilt and tilt lines at
    fixed offset.  The step is checked against the width of the transition
    layer before measuring.
    """
    h_list = np.asarray([2.0**-k for k in range(4, 10)] if h_list is None else h_list, dtype=float)
    D = Cylinder.around(scene) if D is None else D
    b1, b2 = scene.transverse_basis
    w = 1.2 * D.radius
    grid = np.linspace(-w, w, n_line)
    step = grid[1] - grid[0]
    offsets = np.linspace(-0.5 * D.radius, 0.5 * D.radius, n_lines)
    sups = []
    for h in h_list:
        q = build_cutoff(scene, eps, h, alpha0, beta0, D=D, c_est=c_est)
        best = 0.0
        for off in offsets:
            for along_u in (True, False):
                if along_u:
                    X = scene.midpoint + grid[:, None] * b1 + 0.0 * b2
                    V = _tilted(scene, np.full(n_line, off), np.zeros(n_line))
                else:
                    X = np.tile(scene.midpoint + off * b1, (n_line, 1))
                    V = _tilted(scene, grid, np.zeros(n_line))
                vals = q.spatial(X, V)
                jump = float(np.max(np.abs(np.diff(vals))))
                if jump > 0.5:
                    raise ResolutionError(
                        f"cutoff transition at h={h:.3g} is narrower than the scan step "
                        f"{step:.3g} (jump {jump:.2f}); increase n_line or lower eps")
                g = np.abs(np.gradient(vals, step))
                best = max(best, float(g.max()))
        sups.append(best)
    sups = np.asarray(sups)
    ok = sups > 0
    fit = LogLinearFit(log_x=True, log_y=True).fit(1.0 / h_list[ok], sups[ok])
    bound = None if c_est is None else 2.0 * c_est * eps + 0.2
    return DerivativeGrowth(h=h_list, sup_grad=sups, exponent=fit.slope_, r2=fit.r2_, bound=bound)
