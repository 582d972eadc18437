"""Morawetz weights: closed-form derivatives, sign certificates and thresholds.

Two families are covered.  The two-center weight ``chi = |x| + |x - c|`` in
three dimensions, whose bilaplacian vanishes away from the centers, and
gauges ``rho(x) = sqrt(x_1^2 + .. + x_k^2 + eps (x_{k+1}^2 + .. + x_n^2))``
of ellipsoids, whose bilaplacian is

    A / rho^3 + B s / rho^5 + C s^2 / rho^7,   s = x_{k+1}^2 + .. + x_n^2,

with polynomial coefficients ``A, B, C`` in ``eps``.  The sign of the
bilaplacian is governed by ``A`` once ``eps`` is at least the threshold
``eps0(n, k)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import as_vector, check_random_state
from .errors import ConfigError, NumericalInconsistencyError
from .geometry import GaugeWeight, Scene

# 4th-order accurate centred stencils as (offsets, integer weights, denominator);
# the weights stay exact so that extended precision actually pays off
_D2 = (np.array([-2, -1, 0, 1, 2]), np.array([-1, 16, -30, 16, -1]), 12)
_D4 = (np.array([-3, -2, -1, 0, 1, 2, 3]), np.array([-1, 12, -39, 56, -39, 12, -1]), 6)
_D1 = (np.array([-2, -1, 1, 2]), np.array([1, -8, 8, -1]), 12)

COEFFICIENT_NOTE = ("the coefficient of the |u|^6 Laplacian-weighted term appears as 3/2 in the "
                    "multiplier identity and as 2/3 in the energy estimate; both values are kept "
                    "and nothing computed here depends on the choice")


# ---------------------------------------------------------------------------
# thresholds
# ---------------------------------------------------------------------------

@dataclass
class Threshold:
    n: int
    k: int
    A: np.polynomial.Polynomial
    B: np.polynomial.Polynomial
    C: np.polynomial.Polynomial
    eps0: float
    note: str = ""

    def as_dict(self) -> dict:
        return {"n": self.n, "k": self.k, "A": self.A.coef.tolist(), "B": self.B.coef.tolist(),
                "C": self.C.coef.tolist(), "eps0": self.eps0, "note": self.note}


def bilaplacian_coefficients(n: int, k: int):
    """``A, B, C`` as polynomials in ``eps`` (coefficients in increasing degree)."""
    P = np.polynomial.Polynomial
    m = n - k
    A = P([-(k - 1) * (k - 3), -2 * m * (k - 3), -(m + 2) * m])
    B = P([0.0, 6 * (3 - k), 6 * (2 * k - n - 5), 6 * (m + 2)])
    C = P([0.0, 0.0, -15.0, 30.0, -15.0])
    return A, B, C


def bilaplacian_threshold(n: int, k: int) -> Threshold:
    """Coefficient polynomials and the threshold ``eps0`` above which the bilaplacian is nonpositive."""
    if not (isinstance(n, (int, np.integer)) and isinstance(k, (int, np.integer))):
        raise ConfigError("n and k must be integers")
    if n < 2 or not 1 <= k <= n:
        raise ConfigError(f"need n >= 2 and 1 <= k <= n, got n={n}, k={k}")
    A, B, C = bilaplacian_coefficients(n, k)
    note = ""
    if k >= 3:
        eps0 = 0.0
    elif k == 2:
        if n == 2:
            raise ConfigError("the k=2 threshold divides by n-2 and is undefined for n=2")
        eps0 = 1.0 / n + math.sqrt(2.0 * (n - 2) * (n - 1)) / (n * (n - 2))
        if n == 3:
            note = ("n=3, k=2 gives eps0=1: the direct three-dimensional reading is not applicable; "
                    "use the four-dimensional extension")
    else:
        eps0 = 4.0 / (n + 1)
    return Threshold(int(n), int(k), A, B, C, float(eps0), note)


def gauge_bilaplacian(n: int, k: int, eps: float, X) -> np.ndarray:
    """Closed-form bilaplacian of the ``(n, k, eps)`` gauge at rows of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != n:
        raise ConfigError(f"points must have {n} coordinates")
    A, B, C = bilaplacian_coefficients(n, k)
    q = np.r_[np.ones(k), np.full(n - k, eps)]
    rho = np.sqrt(np.sum(q * X * X, axis=1))
    s = np.sum(X[:, k:] ** 2, axis=1)
    return A(eps) / rho**3 + B(eps) * s / rho**5 + C(eps) * s**2 / rho**7


def _bilaplacian_scale(n, k, eps, X):
    A, B, C = bilaplacian_coefficients(n, k)
    q = np.r_[np.ones(k), np.full(n - k, eps)]
    rho = np.sqrt(np.sum(q * X * X, axis=1))
    s = np.sum(X[:, k:] ** 2, axis=1)
    # 1 / rho^3 keeps the scale meaningful when all three coefficients vanish
    return (1.0 + abs(A(eps))) / rho**3 + abs(B(eps)) * s / rho**5 + abs(C(eps)) * s**2 / rho**7


# ---------------------------------------------------------------------------
# finite differences (extended precision)
# ---------------------------------------------------------------------------

def fd_bilaplacian(f, X, step: float) -> np.ndarray:
    """4th-order centred bilaplacian of a vectorized ``f`` in extended precision."""
    X = np.atleast_2d(np.asarray(X, dtype=np.longdouble))
    n = X.shape[1]
    h = np.longdouble(step)
    E = np.eye(n, dtype=np.longdouble)
    out = np.zeros(len(X), dtype=np.longdouble)
    off, w, den = _D4
    for i in range(n):
        for o, c in zip(off, w):
            out += int(c) * f(X + int(o) * h * E[i])
    out /= den * h**4
    off2, w2, den2 = _D2
    for i in range(n):
        for j in range(i + 1, n):
            acc = np.zeros(len(X), dtype=np.longdouble)
            for oi, ci in zip(off2, w2):
                for oj, cj in zip(off2, w2):
                    acc += int(ci * cj) * f(X + int(oi) * h * E[i] + int(oj) * h * E[j])
            out += 2 * acc / (den2 * den2 * h**4)
    return out.astype(float)


def fd_gradient(f, X, step: float) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.longdouble))
    n = X.shape[1]
    h = np.longdouble(step)
    E = np.eye(n, dtype=np.longdouble)
    G = np.zeros(X.shape, dtype=np.longdouble)
    off, w, den = _D1
    for i in range(n):
        for o, c in zip(off, w):
            G[:, i] += int(c) * f(X + int(o) * h * E[i])
    return (G / (den * h)).astype(float)


def fd_hessian(f, X, step: float) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.longdouble))
    n = X.shape[1]
    h = np.longdouble(step)
    E = np.eye(n, dtype=np.longdouble)
    H = np.zeros((len(X), n, n), dtype=np.longdouble)
    off1, w1, den1 = _D1
    off2, w2, den2 = _D2
    for i in range(n):
        for o, c in zip(off2, w2):
            H[:, i, i] += int(c) * f(X + int(o) * h * E[i]) / den2
        for j in range(i + 1, n):
            acc = np.zeros(len(X), dtype=np.longdouble)
            for oi, ci in zip(off1, w1):
                for oj, cj in zip(off1, w1):
                    acc += int(ci * cj) * f(X + int(oi) * h * E[i] + int(oj) * h * E[j])
            H[:, i, j] = H[:, j, i] = acc / (den1 * den1)
    return (H / h**2).astype(float)


# ---------------------------------------------------------------------------
# weights
# ---------------------------------------------------------------------------

class TwoCenterWeight:
    """``chi(x) = |x| + |x - c|`` in three dimensions."""

    kind = "two_center"

    def __init__(self, c):
        self.c = as_vector(c, 3, "c")
        if np.linalg.norm(self.c) == 0:
            raise ConfigError("c must differ from the origin")

    def value(self, X):
        X = np.atleast_2d(X)
        return np.sqrt(np.sum(X * X, axis=1)) + np.sqrt(np.sum((X - self.c) ** 2, axis=1))

    def gradient(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        a = np.linalg.norm(X, axis=1)[:, None]
        b = np.linalg.norm(X - self.c, axis=1)[:, None]
        return X / a + (X - self.c) / b

    def hessian(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.zeros((len(X), 3, 3))
        for v in (X, X - self.c):
            r = np.linalg.norm(v, axis=1)
            u = v / r[:, None]
            out += (np.eye(3)[None] - u[:, :, None] * u[:, None, :]) / r[:, None, None]
        return out

    def laplacian(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return 2.0 / np.linalg.norm(X, axis=1) + 2.0 / np.linalg.norm(X - self.c, axis=1)

    def bilaplacian(self, X):
        return np.zeros(len(np.atleast_2d(X)))

    def as_dict(self):
        return {"kind": self.kind, "c": self.c.tolist()}


class GaugeMultiplier:
    """The ``(n, k, eps)`` gauge with its closed-form derivatives (wraps :class:`GaugeWeight`)."""

    kind = "gauge"

    def __init__(self, n: int, k: int, eps: float):
        self.gauge = GaugeWeight.from_params(n, k, eps)
        self.n, self.k, self.eps = int(n), int(k), float(eps)

    def value(self, X):
        X = np.atleast_2d(X)
        q = np.r_[np.ones(self.k), np.full(self.n - self.k, self.eps)].astype(X.dtype)
        return np.sqrt(np.sum(q * X * X, axis=1))

    def gradient(self, X):
        return self.gauge.gradient(np.atleast_2d(X))

    def hessian(self, X):
        return np.array([self.gauge.hessian(x) for x in np.atleast_2d(X)])

    def laplacian(self, X):
        return self.gauge.laplacian(np.atleast_2d(X))

    def bilaplacian(self, X):
        return gauge_bilaplacian(self.n, self.k, self.eps, X)

    def as_dict(self):
        return {"kind": self.kind, "n": self.n, "k": self.k, "eps": self.eps}


def derivative_check(weight, X, step: float = 1e-2, bilap_step: float = 3e-3) -> dict:
    """Largest relative deviation of closed-form derivatives from 4th-order differences."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    f = weight.value
    g = weight.gradient(X)
    H = weight.hessian(X)
    lap = weight.laplacian(X)
    g_fd = fd_gradient(f, X, step)
    H_fd = fd_hessian(f, X, step)
    rel = lambda a, b: float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))
    out = {"gradient": rel(g_fd, g), "hessian": rel(H_fd, H),
           "laplacian": rel(np.trace(H_fd, axis1=1, axis2=2), lap)}
    b = weight.bilaplacian(X)
    b_fd = fd_bilaplacian(f, X, bilap_step)
    out["bilaplacian_abs"] = float(np.max(np.abs(b_fd - b)))
    out["samples"] = len(X)
    return out


# ---------------------------------------------------------------------------
# bilaplacian verdicts
# ---------------------------------------------------------------------------

@dataclass
class BilaplacianVerdict:
    n: int
    k: int
    eps: float
    nonpositive: bool
    max_value: float
    fd_rel_error: float
    samples: int
    A_value: float
    tolerance: float = 1e-8

    def as_dict(self) -> dict:
        return self.__dict__.copy()


def gauge_samples(n: int, k: int, eps: float, m: int = 1000, seed=0, rho_range=(0.5, 2.0)) -> np.ndarray:
    """Random points with gauge value in ``rho_range`` (directions uniform on the sphere)."""
    rng = check_random_state(seed)
    U = rng.normal(size=(m, n))
    U /= np.linalg.norm(U, axis=1)[:, None]
    q = np.r_[np.ones(k), np.full(n - k, eps)]
    r = np.sqrt(np.sum(q * U * U, axis=1))
    target = rng.uniform(*rho_range, size=m)
    return U * (target / r)[:, None]


def verify_bilaplacian(n: int, k: int, eps: float, samples=None, m: int = 1000, seed=0,
                       fd_step: float = 3e-3, fd_tol: float = 1e-4, tol: float = 1e-8,
                       min_rho: float = 1e-3) -> BilaplacianVerdict:
    """Sign verdict for the gauge bilaplacian, cross-checked by finite differences.

    Raises :class:`NumericalInconsistencyError` when the closed form and
    the difference quotient disagree by more than ``fd_tol`` relative to
    the size of the three terms.
    """
    if not 0 < eps <= 1:
        raise ConfigError("eps must lie in (0, 1]")
    X = gauge_samples(n, k, eps, m, seed) if samples is None else np.atleast_2d(samples)
    w = GaugeMultiplier(n, k, eps)
    rho = w.value(X)
    X = X[rho >= min_rho]
    closed = gauge_bilaplacian(n, k, eps, X)
    fd = fd_bilaplacian(w.value, X, fd_step)
    scale = _bilaplacian_scale(n, k, eps, X)
    err = float(np.max(np.abs(fd - closed) / scale))
    if err > fd_tol:
        raise NumericalInconsistencyError(
            f"closed-form and finite-difference bilaplacian disagree ({err:.2e} > {fd_tol:.0e})")
    A, _, _ = bilaplacian_coefficients(n, k)
    return BilaplacianVerdict(n, k, float(eps), bool(np.all(closed <= tol)), float(closed.max()),
                              err, len(X), float(A(eps)), tol)


def sphere_bilaplacian_check(n: int, k: int, m: int = 200, seed=0) -> float:
    """``max |bilap rho - bilap |x||`` at ``eps = 1`` where ``bilap |x| = -(n-1)(n-3)/|x|^3``."""
    X = gauge_samples(n, k, 1.0, m, seed)
    r = np.linalg.norm(X, axis=1)
    return float(np.max(np.abs(gauge_bilaplacian(n, k, 1.0, X) + (n - 1) * (n - 3) / r**3)))


# ---------------------------------------------------------------------------
# two-center analysis
# ---------------------------------------------------------------------------

def lambda2_closed(X, c) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    a = np.linalg.norm(X, axis=1)
    b = np.linalg.norm(X - c, axis=1)
    cos = np.sum(X * (X - c), axis=1) / (a * b)
    sin2 = np.clip(1.0 - cos**2, 0.0, None)
    s = 1.0 / b + 1.0 / a
    return 0.5 * (s + np.sqrt(np.maximum(s * s - 4.0 * sin2 / (a * b), 0.0)))


def lambda2_matrix(X, c) -> np.ndarray:
    """Largest eigenvalue of the 2x2 block in the plane of ``x`` and ``x - c``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    a = np.linalg.norm(X, axis=1)
    b = np.linalg.norm(X - c, axis=1)
    cos = np.sum(X * (X - c), axis=1) / (a * b)
    sin = np.sqrt(np.clip(1.0 - cos**2, 0.0, None))
    M = np.empty((len(X), 2, 2))
    M[:, 0, 0] = 1.0 / a + cos**2 / b
    M[:, 0, 1] = M[:, 1, 0] = sin * cos / b
    M[:, 1, 1] = sin**2 / b
    return np.linalg.eigvalsh(M)[:, -1]


@dataclass
class TwoCenterReport:
    c: np.ndarray
    radius: float
    samples: int
    skipped: int
    lambda2_max_error: float
    lambda2_range: tuple
    excluded_fraction: dict
    excluded_measure: dict
    form_constant: dict
    min_eig_over_alpha: dict

    def as_dict(self) -> dict:
        d = self.__dict__.copy()
        d["c"] = self.c.tolist()
        return d


def two_center_analysis(c, A: float, alphas=(0.2, 0.1, 0.05), m: int = 20000, seed=0,
                        exclusion: float = 1e-3, scene: Scene | None = None,
                        n_directions: int = 16) -> TwoCenterReport:
    """``lambda_2`` statistics, the cone sets ``V(alpha) = {sin^2 theta >= alpha}`` and
    the quadratic-form constant of ``D^2 chi`` on them, from uniform samples of ``B(0, A)``."""
    c = as_vector(c, 3, "c")
    if not A > np.linalg.norm(c):
        raise ConfigError("need A > |c|")
    rng = check_random_state(seed)
    U = rng.normal(size=(m, 3))
    U /= np.linalg.norm(U, axis=1)[:, None]
    X = U * (A * rng.uniform(size=m) ** (1 / 3))[:, None]
    keep = (np.linalg.norm(X, axis=1) > exclusion) & (np.linalg.norm(X - c, axis=1) > exclusion)
    if scene is not None:
        keep &= np.array([scene.outside(x) for x in X])
    skipped = int(m - keep.sum())
    X = X[keep]
    l_closed = lambda2_closed(X, c)
    l_mat = lambda2_matrix(X, c)
    a = np.linalg.norm(X, axis=1)
    b = np.linalg.norm(X - c, axis=1)
    cos = np.sum(X * (X - c), axis=1) / (a * b)
    sin2 = 1.0 - cos**2
    H = TwoCenterWeight(c).hessian(X)
    min_eig = np.linalg.eigvalsh(H)[:, 0]
    Xi = rng.normal(size=(n_directions, 3))
    Xi /= np.linalg.norm(Xi, axis=1)[:, None]
    forms = np.einsum("di,nij,dj->nd", Xi, H, Xi).min(axis=1)
    vol = 4.0 / 3.0 * np.pi * A**3 * len(X) / m
    frac, meas, const, eigc = {}, {}, {}, {}
    for al in alphas:
        inV = sin2 >= al
        frac[al] = float(1.0 - inV.mean())
        meas[al] = frac[al] * vol
        const[al] = float(np.min(forms[inV]) / al) if inV.any() else float("nan")
        eigc[al] = float(np.min(min_eig[inV]) / al) if inV.any() else float("nan")
    return TwoCenterReport(c, float(A), len(X), skipped, float(np.max(np.abs(l_closed - l_mat))),
                           (float(l_closed.min()), float(l_closed.max())), frac, meas, const, eigc)


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------

@dataclass
class WeightReport:
    weight: dict
    laplacian_range: tuple
    hessian_eigen_range: tuple
    bilaplacian_max_abs: float
    bilaplacian_fd_max_abs: float
    flux_min: float
    flags: dict
    samples: dict
    tolerances: dict
    notes: list = field(default_factory=list)

    @property
    def passes(self) -> bool:
        return all(self.flags.values())

    def as_dict(self) -> dict:
        d = self.__dict__.copy()
        d["passes"] = self.passes
        return d


def _exterior_samples(scene: Scene, m: int, rng, pad: float = 2.0, min_dist: float = 0.5, centers=()):
    lo = np.minimum(scene.body1.center, scene.body2.center) - scene.diameter / 2 - pad
    hi = np.maximum(scene.body1.center, scene.body2.center) + scene.diameter / 2 + pad
    out = []
    while len(out) < m:
        P = rng.uniform(lo, hi, size=(4 * m, 3))
        ok = np.array([scene.outside(p) for p in P])
        for cc in centers:
            ok &= np.linalg.norm(P - cc, axis=1) > min_dist
        out.extend(P[ok])
    return np.array(out[:m])


def flux_and_identity_certificate(weight, scene: Scene, m_boundary: int = 2000, m_interior: int = 1000,
                                  seed=0, flux_tol: float = 1e-10, bilap_tol: float = 1e-6,
                                  fd_step: float = 6e-3, min_dist: float = 0.5) -> WeightReport:
    """Sign flags a multiplier needs: PSD Hessian, nonnegative Laplacian,
    nonpositive bilaplacian and nonnegative boundary flux ``-grad chi . n``
    (``n`` the normal of the exterior domain, pointing into the obstacle).

    The bilaplacian flag uses both the closed form and a finite-difference
    evaluation at exterior points at least ``min_dist`` from the centers.
    """
    rng = check_random_state(seed)
    centers = [np.zeros(3), weight.c] if isinstance(weight, TwoCenterWeight) else []
    X = _exterior_samples(scene, m_interior, rng, centers=centers, min_dist=min_dist)
    lap = weight.laplacian(X)
    eig = np.linalg.eigvalsh(weight.hessian(X))
    bl = weight.bilaplacian(X)
    bl_fd = fd_bilaplacian(weight.value, X, fd_step)
    flux = []
    for body in (scene.body1, scene.body2):
        P = body.sample_boundary(m_boundary, rng)
        Nb = np.array([body.normal(p) for p in P])
        flux.append(np.sum(weight.gradient(P) * Nb, axis=1))   # -grad chi . (-normal)
    flux = np.concatenate(flux)
    flags = {"hessian_psd": bool(eig[:, 0].min() >= -1e-12),
             "laplacian_nonneg": bool(lap.min() >= 0),
             "bilaplacian_nonpos": bool(bl.max() <= bilap_tol and bl_fd.max() <= bilap_tol),
             "boundary_flux_nonneg": bool(flux.min() >= -flux_tol)}
    return WeightReport(weight=weight.as_dict(), laplacian_range=(float(lap.min()), float(lap.max())),
                        hessian_eigen_range=(float(eig.min()), float(eig.max())),
                        bilaplacian_max_abs=float(np.abs(bl).max()),
                        bilaplacian_fd_max_abs=float(np.abs(bl_fd).max()),
                        flux_min=float(flux.min()), flags=flags,
                        samples={"interior": len(X), "boundary": len(flux)},
                        tolerances={"flux": flux_tol, "bilaplacian": bilap_tol, "fd_step": fd_step},
                        notes=[COEFFICIENT_NOTE])


# ---------------------------------------------------------------------------
# illumination and the cylindrical extension
# ---------------------------------------------------------------------------

class DogBone:
    """Surface of revolution about the first axis with radius ``r0 (1 + gamma u^2) sqrt(1 - u^2/L^2)``.

    Not convex: the waist is thinner than the shoulders.  Boundary samples
    come with exact outward normals.
    """

    def __init__(self, r0: float = 0.5, gamma: float = 0.3, L: float = 2.0):
        self.r0, self.gamma, self.L = float(r0), float(gamma), float(L)

    def radius(self, u):
        return self.r0 * (1 + self.gamma * u**2) * np.sqrt(np.clip(1 - (u / self.L) ** 2, 0, None))

    def radius_slope(self, u):
        g = 1 + self.gamma * u**2
        s = np.sqrt(np.clip(1 - (u / self.L) ** 2, 1e-300, None))
        return self.r0 * (2 * self.gamma * u * s - g * u / (self.L**2 * s))

    def sample_boundary_with_normals(self, m: int, rng):
        # parametrize the profile by the polar angle to keep the tips sampled
        th = rng.uniform(0, np.pi, m)
        u = self.L * np.cos(th)
        R = self.radius(u)
        phi = rng.uniform(0, 2 * np.pi, m)
        P = np.column_stack([u, R * np.cos(phi), R * np.sin(phi)])
        # implicit F = r^2 - R(u)^2 with gradient (-d(R^2)/du, 2 y, 2 z)
        # d(R^2)/du is finite at the tips: R^2 = r0^2 g^2 (1 - u^2/L^2)
        g = 1 + self.gamma * u**2
        dR2 = self.r0**2 * (2 * g * 2 * self.gamma * u * (1 - (u / self.L) ** 2) - g**2 * 2 * u / self.L**2)
        G = np.column_stack([-dR2, 2 * P[:, 1], 2 * P[:, 2]])
        return P, G / np.linalg.norm(G, axis=1)[:, None]


@dataclass
class IlluminationReport:
    margin: float
    argmin: np.ndarray
    samples: int
    illuminated: bool

    def as_dict(self) -> dict:
        return {"margin": self.margin, "argmin": self.argmin.tolist(), "samples": self.samples,
                "illuminated": self.illuminated}


def illumination_gauge(eps: float) -> GaugeWeight:
    """Three-dimensional gauge ``sqrt(x_1^2 + eps (x_2^2 + x_3^2))``."""
    return GaugeWeight(np.array([1.0, eps, eps]))


def illumination(body, gauge: GaugeWeight, m: int = 20000, seed=0) -> IlluminationReport:
    """``min over the boundary of grad rho . nu`` from at least ``m`` samples."""
    if m < 10000:
        raise ConfigError("illumination needs at least 10^4 boundary samples")
    rng = check_random_state(seed)
    if hasattr(body, "sample_boundary_with_normals"):
        P, N = body.sample_boundary_with_normals(m, rng)
    else:
        P = body.sample_boundary(m, rng)
        N = np.array([body.normal(p) for p in P])
    vals = np.sum(gauge.gradient(P) * N, axis=1)
    i = int(np.argmin(vals))
    return IlluminationReport(float(vals[i]), P[i], m, bool(vals[i] > 0))


def cylindrical_extension_check(body, gauge: GaugeWeight, z_values=(-3.0, -0.5, 0.0, 0.7, 2.5),
                                m: int = 200, seed=0, step: float = 1e-4) -> float:
    """Max deviation between the FD normal derivative of ``sqrt(rho^2 + z^2)`` on ``dK x {z}``
    and ``rho / sqrt(rho^2 + z^2) d_n rho``."""
    rng = check_random_state(seed)
    if hasattr(body, "sample_boundary_with_normals"):
        P, N = body.sample_boundary_with_normals(m, rng)
    else:
        P = body.sample_boundary(m, rng)
        N = np.array([body.normal(p) for p in P])
    ext = GaugeWeight(gauge.base_q, extended=True)
    worst = 0.0
    for z in z_values:
        Y = np.column_stack([P, np.full(len(P), z)])
        Nt = np.column_stack([N, np.zeros(len(P))])
        fd = (-ext.value(Y + 2 * step * Nt) + 8 * ext.value(Y + step * Nt)
              - 8 * ext.value(Y - step * Nt) + ext.value(Y - 2 * step * Nt)) / (12 * step)
        rho = gauge.value(P)
        dn = np.sum(gauge.gradient(P) * N, axis=1)
        closed = rho / np.sqrt(rho**2 + z**2) * dn
        worst = max(worst, float(np.max(np.abs(fd - closed))))
    return worst


# ---------------------------------------------------------------------------
# logarithmic factor
# ---------------------------------------------------------------------------

def log_factor(T):
    """``int_{-T}^{T} dz / sqrt(1 + z^2) = 2 asinh(T)``."""
    T = np.asarray(T, dtype=float)
    if np.any(~(T > 0)):
        raise ConfigError("T must be positive")
    out = 2.0 * np.arcsinh(T)
    return float(out) if out.ndim == 0 else out
