"""Parametrix sums, stationary phase on frequency spheres and decay curves.

The approximate solution of the wave equation with data localized at a
point ``y`` is a sum over stories of oscillatory integrals in the frequency
``xi``.  Writing ``xi = s omega`` the angular integral over each sphere
``|xi| = s`` is evaluated by stationary phase.  The critical direction of a
reflected term is the launch direction of the broken ray from ``y`` to
``x`` with that story, so it comes from the point-source Fermat solve.
The free term is radial and is reduced exactly to a one-dimensional
integral.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import as_vector, check_interval, check_positive, check_story, normalize
from .amplitude import TransportTerm
from .errors import ConfigError, ConvergenceError, DomainError
from .fitting import ExponentialFit, PowerLawFit
from .geometry import Scene, tangent_basis
from .phase import PlaneWave, PointSource, _reduced, alternating_story, solve_path
from .trapped import Cylinder, build_cutoff, smoothstep

log = logging.getLogger(__name__)

D = 3


# ---------------------------------------------------------------------------
# configuration and the remainder budget
# ---------------------------------------------------------------------------

def remainder_exponent(K: int, c_eps: float, d: int = D) -> float:
    """Power of ``h`` in the remainder bound: ``K (1 - 2 c eps) - d (2 + c eps)``."""
    return K * (1.0 - 2.0 * c_eps) - d * (2.0 + c_eps)


def minimal_K(c_eps: float, d: int = D) -> int:
    """Smallest ``K`` with remainder exponent at least ``-(d+1)/2 + 1``."""
    if 2.0 * c_eps >= 1.0:
        raise ConfigError("need 2 c eps < 1 for any K to control the remainder")
    target = -(d + 1) / 2 + 1
    return max(0, math.ceil((target + d * (2.0 + c_eps)) / (1.0 - 2.0 * c_eps) - 1e-12))


@dataclass
class ParametrixConfig:
    """Parameters of the parametrix evaluation.

    ``c_est`` (expansion rate) enables the remainder-budget check at
    construction; ``budget`` is the largest story length kept.
    """

    h: float
    eps: float
    K: int = 12
    k0: int = 1
    alpha0: float = 0.5
    beta0: float = 2.0
    c_est: float | None = None
    y: np.ndarray | None = None
    t_grid: np.ndarray | None = None
    x_grid: np.ndarray | None = None
    eta: float | None = None
    budget: int | None = None

    def __post_init__(self):
        check_interval(self.h, "h", 0.0, 0.5)
        check_positive(self.eps, "eps")
        if not 0 < self.alpha0 < self.beta0:
            raise ConfigError("need 0 < alpha0 < beta0")
        if self.k0 not in (0, 1):
            raise ConfigError("k0 must be 0 or 1")
        if self.c_est is not None:
            c_eps = self.c_est * self.eps
            if 2 * c_eps > 0.5:
                raise ConfigError(f"2 c eps = {2 * c_eps:.3f} exceeds 1/2; lower eps")
            if remainder_exponent(self.K, c_eps) < -(D + 1) / 2 + 1:
                raise ConfigError(f"K={self.K} violates the remainder budget; "
                                  f"minimal K is {minimal_K(c_eps)}")

    @property
    def t_max(self) -> float:
        return self.eps * abs(math.log(self.h))

    def as_dict(self) -> dict:
        return {"h": self.h, "eps": self.eps, "K": self.K, "k0": self.k0, "alpha0": self.alpha0,
                "beta0": self.beta0, "c_est": self.c_est, "eta": self.eta, "budget": self.budget}


def remainder_budget(config: ParametrixConfig, t=None) -> dict:
    """Scalar remainder budget ``|log h| h^E (1+t)^(d/2+1)`` and the implied bound.

    Raises :class:`ConfigError` (with the minimal ``K``) when the exponent
    ``E`` falls below ``-(d+1)/2 + 1``.
    """
    if config.c_est is None:
        raise ConfigError("remainder budget needs c_est")
    c_eps = config.c_est * config.eps
    E = remainder_exponent(config.K, c_eps)
    need = -(D + 1) / 2 + 1
    if E < need:
        raise ConfigError(f"K={config.K} gives exponent {E:.3f} < {need}; minimal K is {minimal_K(c_eps)}")
    t = np.linspace(0.0, config.t_max, 50) if t is None else np.asarray(t, dtype=float)
    h = config.h
    budget = abs(math.log(h)) * h**E * (1.0 + t) ** (D / 2 + 1)
    implied = h ** (-(D + 1) / 2) * np.exp(-t / config.eps)
    return {"exponent": E, "required": need, "holds": True, "minimal_K": minimal_K(c_eps),
            "simplified_holds": config.K / 2 - 3 * D - 1 >= need,
            "t": t.tolist(), "budget": budget.tolist(), "implied_bound": implied.tolist()}


# ---------------------------------------------------------------------------
# stationary phase data
# ---------------------------------------------------------------------------

@dataclass
class StationaryPhaseData:
    story: tuple
    sign: int
    s: float
    omega: np.ndarray
    xi: np.ndarray
    lagrange: float
    hessian: np.ndarray
    det: float
    signature: int
    L: float
    l_J: float
    first_point: np.ndarray
    residual: float
    degenerate: bool
    points: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))

    def as_dict(self) -> dict:
        return {"story": list(self.story), "sign": self.sign, "s": self.s,
                "xi": self.xi.tolist(), "lagrange": self.lagrange,
                "hessian": self.hessian.tolist(), "det": self.det, "signature": self.signature,
                "L": self.L, "l_J": self.l_J, "residual": self.residual,
                "degenerate": self.degenerate}


def _dp1_dd(scene: Scene, story, x, points, d):
    """Derivative of the first reflection point in the plane-wave direction ``d``."""
    src = PlaneWave(np.zeros(3), d)
    gz, Hz, frames, _ = _reduced(scene, story, src, points, x)
    n = len(story)
    E = np.zeros((2 * n, 3))
    t1, t2 = frames[0]
    E[0] = t1
    E[1] = t2
    dz = -np.linalg.solve(Hz, E)              # (2n, 3)
    return np.column_stack([t1, t2]) @ dz[:2]  # (3, 3)


def critical_point(scene: Scene, x, y, story, s: float = 1.0, sign: int = 1, t: float = 0.0,
                   eta: float | None = None, seeds=None) -> StationaryPhaseData:
    """Stationary direction of ``xi -> phi_J(x, xi) - t |xi|`` on the sphere ``|xi| = s``.

    Returns the critical ``xi``, the Lagrange multiplier ``2 lambda`` and
    the Hessian restricted to the tangent plane (orthonormal coordinates
    on the radius-``s`` sphere), assembled by the Lagrange formula
    ``P (D^2 S - 2 lambda) P``.
    """
    x = as_vector(x, 3, "x")
    y = as_vector(y, 3, "y")
    story = check_story(story)
    s = check_positive(float(s), "s")
    if sign not in (1, -1):
        raise ConfigError("sign must be +1 or -1")
    eta = 0.1 * scene.gap if eta is None else eta
    if not story:
        v = x - y
        r = float(np.linalg.norm(v))
        if r == 0:
            raise DomainError("x coincides with the source point")
        omega = v / r
        P = np.eye(2)
        lag = (r - t) / s
        H = (P * (-t / s)) - lag * P        # D^2 S restricted minus 2 lambda
        H = 0.5 * (H + H.T)
        return _finish((), sign, s, omega, lag, H, r, 0.0, x, 0.0, np.zeros((0, 3)))
    path = solve_path(scene, x, story, PointSource(y), seeds=seeds)
    p1 = path.points[0]
    v = p1 - y
    r = float(np.linalg.norm(v))
    if r < eta:
        raise DomainError(f"first reflection point within eta={eta:.3g} of the source")
    omega = v / r
    T = np.column_stack(tangent_basis(omega))
    residual = float(np.linalg.norm(T.T @ v)) * s
    lJ = path.l_J
    Dp = _dp1_dd(scene, story, x, path.points, omega)
    # P D^2 S P = (T^T Dp T + (l_J - t) I) / s ; 2 lambda = ((p1 - y).omega + l_J - t) / s
    d2S = (T.T @ Dp @ T + (lJ - t) * np.eye(2)) / s
    lag = (float(v.dot(omega)) + lJ - t) / s
    H = d2S - lag * np.eye(2)
    H = 0.5 * (H + H.T)
    return _finish(story, sign, s, omega, lag, H, r + lJ, lJ, p1, residual, path.points)


def _finish(story, sign, s, omega, lag, H, L, lJ, p1, residual, points):
    w = np.linalg.eigvalsh(H)
    det = float(np.prod(w))
    sig = int(np.sum(w > 0) - np.sum(w < 0))
    return StationaryPhaseData(story=tuple(story), sign=sign, s=s, omega=omega, xi=sign * s * omega,
                               lagrange=lag, hessian=H, det=det, signature=sig, L=L, l_J=lJ,
                               first_point=p1, residual=residual, degenerate=abs(det) < 1e-8,
                               points=points)


def phase_on_sphere(scene: Scene, x, y, story, s: float, t: float, omega, seeds=None) -> float:
    """``S(xi) = phi_J(x, xi) - t |xi|`` at ``xi = s omega`` (plane-wave phase, homogeneous in ``xi``)."""
    omega = normalize(as_vector(omega))
    if not story:
        return s * (float(np.dot(x - y, omega)) - t)
    path = solve_path(scene, x, story, PlaneWave(as_vector(y), omega), seeds=seeds)
    return s * (path.length - t)


def chart_hessian_fd(scene: Scene, x, y, story, s: float, t: float, omega, step: float = 1e-3,
                     seeds=None) -> np.ndarray:
    """Fourth-order finite-difference Hessian of ``S`` in the tangent chart ``s normalize(omega + u/s)``."""
    omega = normalize(as_vector(omega))
    t1, t2 = tangent_basis(omega)
    x = as_vector(x)
    y = as_vector(y)

    def f(u):
        d = normalize(omega + (u[0] * t1 + u[1] * t2) / s)
        return phase_on_sphere(scene, x, y, story, s, t, d, seeds)

    h = step
    H = np.zeros((2, 2))
    f0 = f(np.zeros(2))
    E = np.eye(2)
    for i in range(2):
        e = E[i] * h
        H[i, i] = (-f(2 * e) + 16 * f(e) - 30 * f0 + 16 * f(-e) - f(-2 * e)) / (12 * h * h)
    e1, e2 = E[0] * h, E[1] * h

    def mixed(a):
        return (f(a * (e1 + e2)) - f(a * (e1 - e2)) - f(a * (-e1 + e2)) + f(-a * (e1 + e2))) / (4 * a * a * h * h)

    H[0, 1] = H[1, 0] = (4 * mixed(1) - mixed(2)) / 3
    return H


def critical_points_all(scene: Scene, x, y, story, tol: float = 1e-6) -> list:
    """All distinct admissible point-source paths found from the default seeds."""
    from .phase import _finalize, _newton, _seeds
    x = as_vector(x)
    src = PointSource(as_vector(y))
    story = check_story(story)
    found = []
    for P0 in _seeds(scene, story, x, src):
        try:
            P, res, it = _newton(scene, story, src, x, P0, 1e-12, 60)
        except (np.linalg.LinAlgError, ValueError):
            continue
        if res > 1e-10:
            continue
        path = _finalize(scene, story, src, x, P, res, it, scene.delta1)
        if not path.admissible or float((P[0] - y).dot(normalize(P[0] - y))) <= 0:
            continue
        if not any(np.max(np.abs(P - Q)) < tol for Q in found):
            found.append(P)
    return found


# ---------------------------------------------------------------------------
# radial quadrature
# ---------------------------------------------------------------------------

def shell_profile(alpha0: float, beta0: float):
    width = 0.25 * (beta0 - alpha0)

    def psi(s):
        s = np.asarray(s, dtype=float)
        return smoothstep((s - alpha0) / width) * smoothstep((beta0 - s) / width)
    return psi


def _reduced_phase(s, tau):
    """``exp(i s tau)`` with the product formed and reduced mod 2 pi in extended precision."""
    ph = np.multiply.outer(np.asarray(tau, dtype=np.longdouble), np.asarray(s, dtype=np.longdouble))
    ph = np.mod(ph, np.longdouble(2.0) * np.pi).astype(float)
    return np.exp(1j * ph)


def radial_integral(tau, psi, alpha0: float, beta0: float, power: int = 1, weight=None,
                    n0: int = 64, rtol: float = 1e-8, n_max: int = 1 << 14) -> np.ndarray:
    """``int s^power psi(s) weight(s) exp(i s tau) ds`` over ``[alpha0, beta0]`` for each ``tau``.

    Gauss-Legendre from ``n0`` nodes, doubling until the largest change is
    below ``rtol`` relative to the largest value.
    """
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    prev = None
    n = n0
    while n <= n_max:
        xg, wg = np.polynomial.legendre.leggauss(n)
        s = 0.5 * (beta0 - alpha0) * (xg + 1.0) + alpha0
        w = 0.5 * (beta0 - alpha0) * wg * s**power * psi(s)
        if weight is not None:
            w = w * weight(s)
        val = _reduced_phase(s, tau) @ w
        if prev is not None:
            scale = max(float(np.max(np.abs(val))), 1e-300)
            if float(np.max(np.abs(val - prev))) <= rtol * scale:
                return val
        prev = val
        n *= 2
    raise ConvergenceError(f"radial quadrature did not converge with {n_max} nodes; "
                           "reduce the t range or increase n_max", float(np.max(np.abs(val - prev))))


# ---------------------------------------------------------------------------
# free term
# ---------------------------------------------------------------------------

def free_kernel(r, t, h: float, alpha0: float = 0.5, beta0: float = 2.0) -> np.ndarray:
    """Free evolution ``cos(t|D|)`` of the shell-localized delta, as a function of ``r = |x - y|``.

    ``(2 pi h)^-3 4 pi int psi(s) s^2 cos(t s / h) sinc(s r / h) ds``.
    Vectorized over ``r`` (one ``t``).
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    psi = shell_profile(alpha0, beta0)
    out = np.zeros(len(r))
    # cos(ts/h) sin(sr/h)/(sr/h) = [sin(s(r+t)/h) + sin(s(r-t)/h)] / (2 s r / h)
    small = r < 1e-8
    if (~small).any():
        rr = r[~small]
        taus = np.concatenate([(rr + t) / h, (rr - t) / h])
        I = radial_integral(taus, psi, alpha0, beta0, power=1)
        m = len(rr)
        val = (I[:m].imag + I[m:].imag) * h / (2.0 * rr)
        out[~small] = val
    if small.any():
        I = radial_integral(np.array([t / h]), psi, alpha0, beta0, power=2)
        out[small] = I.real[0]
    return out * 4.0 * np.pi / (2.0 * np.pi * h) ** 3


def free_kernel_bruteforce(x, y, t: float, h: float, alpha0: float = 0.5, beta0: float = 2.0,
                           n_s: int = 160, n_theta: int = 240, n_phi: int = 160, seed: int = 0) -> float:
    """Direct 3-D quadrature of ``(2 pi h)^-3 int exp(i (x-y).xi/h) cos(t|xi|/h) psi(|xi|) dxi``.

    Spherical coordinates about a random axis, Gauss-Legendre in ``s`` and
    ``cos theta``, trapezoid in ``phi``.
    """
    rng = np.random.default_rng(seed)
    axis = normalize(rng.normal(size=3))
    b1, b2 = tangent_basis(axis)
    v = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    psi = shell_profile(alpha0, beta0)
    xs, ws = np.polynomial.legendre.leggauss(n_s)
    s = 0.5 * (beta0 - alpha0) * (xs + 1) + alpha0
    ws = 0.5 * (beta0 - alpha0) * ws
    ct, wt = np.polynomial.legendre.leggauss(n_theta)
    st = np.sqrt(1 - ct**2)
    ph = np.linspace(0, 2 * np.pi, n_phi, endpoint=False)
    wp = 2 * np.pi / n_phi
    va, v1, v2 = v.dot(axis), v.dot(b1), v.dot(b2)
    # direction cosine of each angular node with v
    proj = (ct[:, None] * va + st[:, None] * (np.cos(ph)[None, :] * v1 + np.sin(ph)[None, :] * v2))
    total = 0.0
    for k in range(n_s):
        ang = np.sum(wt[:, None] * wp * np.cos(s[k] * proj / h))
        total += ws[k] * s[k] ** 2 * psi(s[k]) * np.cos(t * s[k] / h) * ang
    return float(total / (2 * np.pi * h) ** 3)


@dataclass
class DecayCurve:
    t: np.ndarray
    values: np.ndarray
    power: float | None = None
    power_r2: float | None = None
    rate: float | None = None
    rate_r2: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"power": self.power, "power_r2": self.power_r2, "rate": self.rate,
                "rate_r2": self.rate_r2, "diagnostics": self.diagnostics}


def free_sup(t: float, h: float, alpha0: float = 0.5, beta0: float = 2.0, half_width: float = 30.0,
             n: int = 481) -> float:
    """``sup_x |S^free(x, t)|``; the maximum sits within a few ``h`` of the sphere ``r = t``."""
    r = np.linspace(max(t - half_width * h, 0.0), t + half_width * h, n)
    return float(np.max(np.abs(free_kernel(r, t, h, alpha0, beta0))))


def free_term(config: ParametrixConfig | None = None, t=None, h: float | None = None,
              h_ladder=(0.1, 0.05, 0.025)) -> DecayCurve:
    """Sup-norm curve of the free term with its fitted ``t`` and ``h`` exponents."""
    h = (config.h if config is not None else 0.05) if h is None else h
    a0, b0 = (config.alpha0, config.beta0) if config is not None else (0.5, 2.0)
    t = np.linspace(2.0, 20.0, 37) if t is None else np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ConfigError("free term times must be positive")
    vals = np.array([free_sup(tt, h, a0, b0) for tt in t])
    pf = PowerLawFit().fit(t, vals)
    t_ref = np.array([2.0, 5.0, 10.0, 20.0])
    hs = np.asarray(h_ladder, dtype=float)
    exps = []
    for tt in t_ref:
        sup_h = [free_sup(tt, hh, a0, b0) for hh in hs]
        exps.append(PowerLawFit().fit(hs, sup_h).exponent_)
    return DecayCurve(t=t, values=vals, power=pf.exponent_, power_r2=pf.r2_,
                      diagnostics={"h": h, "h_exponent": float(np.median(exps)),
                                   "h_exponents": [float(e) for e in exps], "h_ladder": hs.tolist()})


# ---------------------------------------------------------------------------
# reflected sum
# ---------------------------------------------------------------------------

def default_x_grid(scene: Scene, collar: float | None = None) -> np.ndarray:
    """Points of the localization window: three axial stations times five transverse offsets."""
    b1, b2 = scene.transverse_basis
    e = scene.axis
    r = 0.5 * scene.cylinder_radius
    pts = []
    for a in (0.3, 0.5, 0.7):
        base = scene.ray.a1 + a * scene.gap * e
        for off in (np.zeros(3), r * b1, -r * b1, r * b2, -r * b2):
            pts.append(base + off)
    return np.array(pts)


def chi0(scene: Scene, X, collar: float | None = None) -> np.ndarray:
    """Spatial localization: 1 inside the cylinder minus a collar near the obstacles, smooth to 0."""
    collar = 0.1 * scene.gap if collar is None else collar
    D = Cylinder(scene.ray.a1, scene.axis, scene.gap, scene.cylinder_radius, 0.0)
    m = D.signed_margin(np.atleast_2d(X))
    return smoothstep(m / collar)


@dataclass
class ReflectedSum:
    curve: DecayCurve
    field: np.ndarray          # (n_x, n_t) complex values of chi0 S^r
    contributions: int
    excluded_degenerate: int
    dropped_near_source: int
    active: dict


def reflected_sum(scene: Scene, config: ParametrixConfig, budget: int | None = None,
                  cutoff=None, t_start: float = 2.0, dt: float | None = None) -> ReflectedSum:
    """``h^2 sup_x |chi0 S^r(x, t)|`` over ``t`` in ``[t_start, eps |log h|]`` with an exponential fit.

    Each story contributes ``2 Re T_J`` (the two signs are complex
    conjugates), with

    ``T_J = (2 pi h)^-2 |det H|^-1/2 e^{i pi sigma/4} w_J(x, t) int s psi(s) e^{i s (L_J - t)/h} ds``,

    ``H`` the unit-sphere Hessian, ``L_J`` the broken-ray length from ``y``
    to ``x`` and ``w_J = w_0 + (h/i) w_1`` (orders up to ``k0``).
    """
    h = config.h
    budget = config.budget if budget is None else budget
    budget = 12 if budget is None else int(budget)
    y = scene.midpoint if config.y is None else as_vector(config.y)
    X = default_x_grid(scene) if config.x_grid is None else np.atleast_2d(config.x_grid)
    dt = h / 4 if dt is None else dt
    t = (np.arange(t_start, config.t_max + 1e-12, dt) if config.t_grid is None
         else np.asarray(config.t_grid, dtype=float))
    if len(t) < 2:
        raise ConfigError(f"empty time range [{t_start}, {config.t_max:.3f}]; increase eps")
    q = build_cutoff(scene, config.eps, h, config.alpha0, config.beta0) if cutoff is None else cutoff
    psi = shell_profile(config.alpha0, config.beta0)
    chi = chi0(scene, X)
    field_ = np.zeros((len(X), len(t)), dtype=complex)
    n_contrib = n_degen = n_drop = 0
    active = {}
    pad = np.array([-0.5, 0.0, 0.5]) * scene.gap
    for i, x in enumerate(X):
        if chi[i] == 0:
            continue
        for n in range(1, budget + 1):
            for first in (1, 2):
                J = alternating_story(first, n)
                try:
                    cp = critical_point(scene, x, y, J, 1.0, 1, 0.0, eta=config.eta)
                except DomainError as exc:
                    if "eta" in str(exc):
                        n_drop += 1
                    continue
                # quick support test on the backward end points y + (L - t) omega
                tt = np.concatenate([t + p for p in pad])
                B = y[None, :] + (cp.L - tt)[:, None] * cp.omega
                if not np.any(q.spatial(B, np.tile(cp.omega, (len(B), 1))) > 0):
                    continue
                n_contrib += 1
                Hs = cp.hessian         # unit sphere, s = 1
                if cp.degenerate:
                    n_degen += 1
                    continue
                path = solve_path(scene, x, J, PlaneWave(y, cp.omega), seeds=[cp.points])
                term = TransportTerm(scene, J, cp.omega, y, x, q.spatial, order=config.k0, h=h,
                                     path=path)
                w = term.w0(t).astype(complex)
                if config.k0 >= 1:
                    w = w + (h / 1j) * term.w1(t)
                I = radial_integral((cp.L - t) / h, psi, config.alpha0, config.beta0, power=1)
                pref = (2 * np.pi * h) ** -2 * abs(np.linalg.det(Hs)) ** -0.5 * np.exp(1j * np.pi * cp.signature / 4)
                T = pref * w * I
                field_[i] += chi[i] * 2.0 * T.real
                active[J] = active.get(J, 0) + 1
    if n_contrib and n_degen > 0.01 * n_contrib:
        raise DomainError(f"{n_degen} of {n_contrib} contributions have degenerate Hessians")
    sup = np.max(np.abs(field_), axis=0)
    scaled = h ** ((D + 1) / 2) * sup
    ok = scaled > 0
    rate = r2 = None
    if ok.sum() >= 2:
        fit = ExponentialFit().fit(t[ok], scaled[ok])
        rate, r2 = fit.rate_, fit.r2_
    curve = DecayCurve(t=t, values=scaled, rate=rate, rate_r2=r2,
                       diagnostics={"h": h, "budget": budget, "contributions": n_contrib,
                                    "excluded_degenerate": n_degen, "dropped_near_source": n_drop})
    return ReflectedSum(curve, field_, n_contrib, n_degen, n_drop,
                        {"-".join(map(str, k)): v for k, v in active.items()})


def combined_curve(scene: Scene, config: ParametrixConfig, refl: ReflectedSum) -> dict:
    """``h^2 t sup_x |S^free + chi0 S^r|`` on the reflected-sum grid."""
    y = scene.midpoint if config.y is None else as_vector(config.y)
    X = default_x_grid(scene) if config.x_grid is None else np.atleast_2d(config.x_grid)
    r = np.linalg.norm(X - y, axis=1)
    t = refl.curve.t
    free = np.array([free_kernel(r, tt, config.h, config.alpha0, config.beta0) for tt in t]).T
    tot = np.max(np.abs(free + refl.field), axis=0)
    scaled = config.h ** ((D + 1) / 2) * tot * t ** ((D - 1) / 2)
    return {"t": t.tolist(), "free_sup": np.max(np.abs(free), axis=0).tolist(),
            "combined": tot.tolist(), "normalized": scaled.tolist(), "max_normalized": float(scaled.max())}
