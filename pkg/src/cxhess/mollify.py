"""Green-function mollification of subharmonic functions on a ball in R^d.

For the Laplacian on D = B(0, R) with Green function g (g ~ Gamma(|x-y|)),
p(x, y) = 1 - |x-y|^2 and a unit bump Phi on (0, 1), the kernel

    G_h(x, y) = int Phi(s - h) max(g - s p, 0) ds

vanishes for |x - y| >= delta once h >= h_delta.  With t = g/p,
A(t) = Phicdf(t - h) and B(t) = h A + int_0^{t-h} sigma Phi,

    G_h        = g A - p B
    dG_h/dh    = -p A
    -Delta_x G_h = delta_y - K,  K = 2d B + Phi(t - h) |grad g - t grad p|^2 / p

so K >= 0 has unit mass and u_h(y) = int u K dx satisfies u_h - u(y) =
int G_h Delta u >= 0 for subharmonic u, decreasing in h.
"""
from dataclasses import dataclass, field
from math import gamma, pi

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import CubicSpline

from .errors import AccuracyError, DomainError, GeometryError


def _bump(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = (t > 0) & (t < 1)
    ti = t[inside]
    out[inside] = np.exp(-1.0 / (ti * (1.0 - ti)))
    return out


class Profile:
    """Normalized bump Phi(t) ~ exp(-1/(t(1-t))) on (0, 1) with tabulated antiderivatives."""

    def __init__(self, samples=4001):
        self.mass, _ = integrate.quad(_bump, 0, 1, epsabs=1e-15, epsrel=1e-13, limit=200)
        s = np.linspace(0, 1, samples)
        f = _bump(s) / self.mass
        cdf = integrate.cumulative_simpson(f, x=s, initial=0.0)
        first = integrate.cumulative_simpson(s * f, x=s, initial=0.0)
        # exact end values: unit mass and mean 1/2 by symmetry
        cdf *= 1.0 / cdf[-1]
        first *= 0.5 / first[-1]
        self._cdf = CubicSpline(s, cdf)
        self._first = CubicSpline(s, first)

    def __call__(self, t):
        return _bump(t) / self.mass

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t <= 0, 0.0, np.where(t >= 1, 1.0, self._cdf(np.clip(t, 0, 1))))

    def first_moment(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t <= 0, 0.0, np.where(t >= 1, 0.5, self._first(np.clip(t, 0, 1))))


def sphere_area(d):
    """Area of the unit sphere in R^d."""
    return 2 * pi ** (d / 2) / gamma(d / 2)


def fundamental(r, d):
    """Gamma(r) with -Delta Gamma = delta_0 in R^d, d >= 3."""
    return np.asarray(r, dtype=float) ** (2 - d) / ((d - 2) * sphere_area(d))


def _fundamental_prime(r, d):
    return -np.asarray(r, dtype=float) ** (1 - d) / sphere_area(d)


@dataclass
class MollifySetup:
    dim: int = 3
    radius: float = 1.0
    delta: float = 0.1
    delta0: float = 0.5
    profile: Profile = field(default_factory=Profile, repr=False)
    h_delta: float = None

    def __post_init__(self):
        if self.dim < 3:
            raise DomainError("dimension must be at least 3")
        if not 0 < self.delta0 < 1:
            raise DomainError("delta0 must lie in (0, 1)")
        if self.delta <= 0 or 2 * self.delta > self.delta0:
            raise DomainError("need 0 < 2 delta <= delta0 so that p >= delta0 on the kernel support")
        if 2 * self.delta >= self.radius:
            raise DomainError("interior margin 2 delta must be smaller than the radius")
        if self.h_delta is None:
            self.h_delta = compute_h_delta(self)

    def p(self, x, y):
        return 1.0 - np.sum((np.asarray(x) - np.asarray(y)) ** 2, axis=-1)

    def inner_radius(self):
        """Radius of D_{2 delta}."""
        return self.radius - 2 * self.delta


def _image(y, R):
    """Image point R^2 y/|y|^2 and the factor |y|/R; y = 0 handled by the caller."""
    ny = np.linalg.norm(y, axis=-1, keepdims=True)
    safe = np.where(ny > 0, ny, 1.0)
    return R * R * y / safe ** 2, ny[..., 0] / R


def green_function(x, y, setup):
    """Dirichlet Green function of -Laplacian on B(0, R) by images."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d, R = setup.dim, setup.radius
    r = np.linalg.norm(x - y, axis=-1)
    if np.any(r == 0):
        raise DomainError("green_function is singular at x = y")
    ystar, c = _image(y, R)
    rr = np.where(c > 0, c * np.linalg.norm(x - ystar, axis=-1), R)
    return fundamental(r, d) - fundamental(rr, d)


def green_gradient(x, y, setup):
    """grad_x g(x, y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d, R = setup.dim, setup.radius
    diff = x - y
    r = np.linalg.norm(diff, axis=-1, keepdims=True)
    out = _fundamental_prime(r, d) * diff / r
    ystar, c = _image(y, R)
    dstar = x - ystar
    rs = np.linalg.norm(dstar, axis=-1, keepdims=True)
    cc = c[..., None]
    safe = np.where(cc > 0, rs, 1.0)
    rarg = np.where(cc > 0, cc * safe, 1.0)
    img = np.where(cc > 0, _fundamental_prime(rarg, d) * cc * dstar / safe, 0.0)
    return out - img


def compute_h_delta(setup, samples=24):
    """(1/delta0) max g(x, y) over y in D_{2 delta}, delta <= |x - y| <= 2 delta.

    By rotation invariance y = (a, 0, ...), x = y + rho (cos th, sin th, 0, ...);
    dense search in (a, rho, th), then a bounded local refinement.
    """
    R, delta, d = setup.radius, setup.delta, setup.dim
    amax = R - 2 * delta

    def g_of(v):
        a, rho, th = v
        y = np.zeros(d)
        y[0] = a
        x = y.copy()
        x[0] += rho * np.cos(th)
        x[1] += rho * np.sin(th)
        return float(green_function(x, y, setup))

    grid = [(a, rho, th) for a in np.linspace(0, amax, samples) for rho in np.linspace(delta, 2 * delta, 6)
            for th in np.linspace(0, pi, samples)]
    vals = [g_of(v) for v in grid]
    start = grid[int(np.argmax(vals))]
    res = optimize.minimize(lambda v: -g_of(v), start, method="L-BFGS-B",
                            bounds=[(0, amax), (delta, 2 * delta), (0, pi)])
    return max(float(-res.fun), max(vals)) / setup.delta0


def _t_value(x, y, setup):
    return green_function(x, y, setup) / setup.p(x, y)


def kernel_closed(x, y, h, setup):
    """G_h(x, y) from the closed form; zero when |x - y| >= 2 delta."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.linalg.norm(x - y, axis=-1)
    g = green_function(x, y, setup)
    p = setup.p(x, y)
    t = g / p
    prof = setup.profile
    A = prof.cdf(t - h)
    B = h * A + prof.first_moment(t - h)
    return np.where(r < 2 * setup.delta, np.maximum(g * A - p * B, 0.0), 0.0)


def kernel_G_h(x, y, h, setup, tol=1e-12):
    """G_h(x, y) by adaptive Gauss-Kronrod quadrature of the s-integral."""
    if h < 0:
        raise DomainError("level h must be non-negative")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.linalg.norm(y) >= setup.inner_radius():
        raise GeometryError("y must lie in D_{2 delta}")
    if np.linalg.norm(x - y) >= 2 * setup.delta:
        return 0.0
    g = float(green_function(x, y, setup))
    p = float(setup.p(x, y))
    top = min(g / p, h + 1.0)
    if top <= h:
        return 0.0
    val, _, _ = _quad(lambda s: float(setup.profile(s - h)) * (g - s * p), h, top, tol)
    return val


def _quad(fn, a, b, tol):
    val, err, info = integrate.quad(fn, a, b, epsabs=tol, epsrel=tol, limit=200, full_output=True)[:3]
    if err > max(1e3 * tol, 1e-10) * max(1.0, abs(val)):
        raise AccuracyError(f"quadrature error {err:.3e} exceeds tolerance", estimate=val, error=err)
    return val, err, info


def kernel_dh(x, y, h, setup):
    """dG_h/dh = -p Phicdf(t - h)."""
    g = green_function(x, y, setup)
    p = setup.p(x, y)
    r = np.linalg.norm(np.asarray(x) - np.asarray(y), axis=-1)
    return np.where(r < 2 * setup.delta, -p * setup.profile.cdf(g / p - h), 0.0)


def mollifier_density(x, y, h, setup):
    """Regular part K of -Delta_x G_h (non-negative, unit mass); x != y."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = setup.dim
    g = green_function(x, y, setup)
    p = setup.p(x, y)
    t = g / p
    prof = setup.profile
    A = prof.cdf(t - h)
    B = h * A + prof.first_moment(t - h)
    grad = green_gradient(x, y, setup) + t[..., None] * 2.0 * (x - y)
    out = 2 * d * B + prof(t - h) * np.sum(grad * grad, axis=-1) / p
    r = np.linalg.norm(x - y, axis=-1)
    return np.where(r < 2 * setup.delta, out, 0.0)


# quadrature of u_h ----------------------------------------------------------------------

def sphere_rule(n_theta, n_phi):
    """Product rule on S^2: Gauss-Legendre in cos(theta) times uniform phi.  Returns (dirs, weights)."""
    c, wc = np.polynomial.legendre.leggauss(n_theta)
    ph = (np.arange(n_phi) + 0.5) * 2 * pi / n_phi
    s = np.sqrt(1 - c * c)
    dirs = np.stack([np.outer(s, np.cos(ph)), np.outer(s, np.sin(ph)),
                     np.outer(c, np.ones(n_phi))], axis=-1).reshape(-1, 3)
    w = np.outer(wc, np.full(n_phi, 2 * pi / n_phi)).ravel()
    return dirs, w


def _ray_roots(y, dirs, level, setup, iters=80):
    """Radius rho <= 2 delta along each ray where t = g/p drops to ``level`` (t decreasing)."""
    lo = np.full(len(dirs), 1e-12)
    hi = np.full(len(dirs), 2 * setup.delta * (1 - 1e-12))
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        above = _t_value(y + mid[:, None] * dirs, y, setup) > level
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    return 0.5 * (lo + hi)


@dataclass
class Quadrature:
    n_r: int = 40
    n_theta: int = 20
    n_phi: int = 40


def mollify_point(u, y, h, setup, quad=None):
    """u_h(y) = int u K_h(., y) dx; u is a callable of points (N, 3)."""
    quad = quad or Quadrature()
    if setup.dim != 3:
        raise DomainError("u_h quadrature is implemented for dim = 3")
    if h < setup.h_delta - 1e-12:
        raise DomainError(f"level {h:g} below h_delta = {setup.h_delta:g}: kernel support not localized")
    y = np.asarray(y, dtype=float)
    if np.linalg.norm(y) >= setup.inner_radius():
        raise GeometryError("y must lie in D_{2 delta}")
    dirs, wang = sphere_rule(quad.n_theta, quad.n_phi)
    rin = _ray_roots(y, dirs, h + 1.0, setup)
    rout = _ray_roots(y, dirs, h, setup)
    xg, wg = np.polynomial.legendre.leggauss(quad.n_r)
    xg, wg = 0.5 * (xg + 1), 0.5 * wg
    core = 2 * setup.dim * (h + 0.5)
    # inner ball: K is the constant core value
    rho = rin[:, None] * xg[None, :]
    pts = y + rho[..., None] * dirs[:, None, :]
    vals = u(pts.reshape(-1, 3)).reshape(rho.shape)
    inner = core * np.sum(wang[:, None] * wg[None, :] * rin[:, None] * rho ** 2 * vals)
    # shell: smooth bump layer
    rho = rin[:, None] + (rout - rin)[:, None] * xg[None, :]
    pts = (y + rho[..., None] * dirs[:, None, :]).reshape(-1, 3)
    K = mollifier_density(pts, y, h, setup).reshape(rho.shape)
    vals = u(pts).reshape(rho.shape)
    shell = np.sum(wang[:, None] * wg[None, :] * (rout - rin)[:, None] * rho ** 2 * K * vals)
    return float(inner + shell)


@dataclass
class MollifiedFamily:
    points: np.ndarray
    inputs: np.ndarray
    levels: list
    outputs: np.ndarray  # (len(levels), len(points))
    weights: np.ndarray

    def l1_errors(self):
        return [float(np.sum(np.abs(o - self.inputs) * self.weights)) for o in self.outputs]


def evaluation_lattice(setup, step):
    """Lattice points inside D_{2 delta} and their cell volumes."""
    r = setup.inner_radius()
    k = np.arange(-np.floor(r / step), np.floor(r / step) + 1) * step
    pts = np.array(np.meshgrid(k, k, k, indexing="ij")).reshape(3, -1).T
    pts = pts[np.linalg.norm(pts, axis=1) < r - 1e-12]
    return pts, np.full(len(pts), step ** 3)


def mollify(u, levels, setup, points=None, step=None, quad=None):
    """u_h at every point for every level (levels sorted ascending, all >= h_delta)."""
    levels = sorted(float(h) for h in levels)
    if levels and levels[0] < setup.h_delta - 1e-12:
        raise DomainError(f"level {levels[0]:g} below h_delta = {setup.h_delta:g}")
    if points is None:
        points, weights = evaluation_lattice(setup, step or setup.inner_radius() / 4)
    else:
        points = np.asarray(points, dtype=float)
        weights = np.full(len(points), np.nan)
    outs = np.array([[mollify_point(u, y, h, setup, quad) for y in points] for h in levels])
    return MollifiedFamily(points=points, inputs=np.asarray(u(points), float), levels=levels,
                           outputs=outs, weights=weights)


# sub-mean value --------------------------------------------------------------------------

def poisson_kernel(x, xi, center, r):
    """Poisson kernel of B(center, r) in R^3 for x inside and xi on the sphere."""
    x = np.asarray(x, dtype=float) - center
    xi = np.asarray(xi, dtype=float) - center
    return (r * r - np.sum(x * x, axis=-1)) / (4 * pi * r * np.linalg.norm(xi - x, axis=-1) ** 3)


def sub_mean_value(u, a, r, setup, n_theta=24, n_phi=48):
    """(u(a), M(u, a, r)) with M the Poisson-kernel mean over the sphere |x - a| = r."""
    a = np.asarray(a, dtype=float)
    if r <= 0 or np.linalg.norm(a) + r >= setup.radius:
        raise GeometryError("ball B(a, r) must lie inside the domain")
    dirs, w = sphere_rule(n_theta, n_phi)
    xi = a + r * dirs
    P = poisson_kernel(a, xi, a, r)
    M = float(np.sum(w * r * r * P * u(xi)))
    return float(u(a[None, :])[0]), M
