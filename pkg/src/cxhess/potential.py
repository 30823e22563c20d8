"""Capacity lower bounds, volume-capacity, stability and mixed-type inequality checks.

Normalization: the Hessian measure of an admissible v relative to the
alpha-volume is S_m(lambda) / binom(n, m), lambda the eigenvalues of
alpha^{-1}(chi + v_{i jbar}), and the alpha-volume of a node cell is
det(alpha) spacing^{2n}.  In the equation S_m(lambda)^{1/m} = h the
binomial factor is absorbed into the density f = h^m.
"""
from dataclasses import dataclass, field
from math import comb
import logging

import numpy as np

from . import solver, symfun
from .errors import DomainError

log = logging.getLogger(__name__)

ADMISSIBLE_TOL = 1e-9
# discrete Hessians of admissible potentials carry O(spacing^2) truncation
# error; cone membership is tested up to TRUNCATION_FACTOR spacing^2 scale^k
TRUNCATION_FACTOR = 4.0
# absolute slack in the stability check for rounding and solver tolerance
STABILITY_SLACK = 1e-9


@dataclass
class Candidate:
    interior: np.ndarray
    boundary: np.ndarray
    label: str


@dataclass
class CapacityEstimate:
    set_id: str
    cap_lower: float
    witness: np.ndarray
    volume: float
    samples: int
    cap_m_lower: float = 0.0
    witness_index: int = -1
    degenerate: bool = False


def _mask(spec, E):
    g = spec.grid
    if E is None:
        return np.zeros(g.size, dtype=bool)
    if callable(E):
        mask = np.asarray(E(g.points), dtype=bool)
    else:
        mask = np.asarray(E, dtype=bool)
    if mask.shape != (g.size,):
        raise DomainError("set must be a node predicate or a boolean node mask")
    return mask


def fundamental_profile(n, m):
    """Increasing radial m-subharmonic profile: log t for m = n, -t^{2-2n/m} otherwise."""
    if m == n:
        return np.log
    p = 2.0 - 2.0 * n / m

    def G(t):
        with np.errstate(over="ignore", divide="ignore"):
            return -np.power(t, p)

    return G


def radial_candidate(grid, m, center, inner):
    """1 + max(psi(|z - c|), -1) with psi = 0 on |z - c| = delta + |c| and psi = -1 at ``inner``.

    Equals 1 on B(c, inner), lies in [0, 1] on the domain.
    """
    G = fundamental_profile(grid.n, m)
    outer = grid.delta + np.linalg.norm(center - grid.balls[0].center)

    def v(pts):
        t = np.maximum(np.linalg.norm(pts - center, axis=-1), 1e-300)
        psi = (G(t) - G(outer)) / (G(outer) - G(inner))
        return 1.0 + np.maximum(psi, -1.0)

    return v


def bump_candidate(grid, center, radius, amp):
    def v(pts):
        q = np.clip(1.0 - np.sum((pts - center) ** 2, axis=-1) / radius ** 2, 0.0, 1.0)
        return amp * q * q

    return v


def candidate_family(spec, budget=64, seed=0):
    """Deterministic list of candidate potentials shared by all sets.

    Centred radial extremal profiles on a radius ladder, then seeded random
    radial profiles and clipped bumps.  Admissibility is checked later.
    """
    g = spec.grid
    rng = np.random.default_rng(seed)
    c0 = g.balls[0].center
    funcs = []
    ladder = max(1, budget // 2)
    for s in np.linspace(g.spacing, 0.95 * g.delta, ladder):
        funcs.append((radial_candidate(g, spec.m, c0, s), f"radial c=0 s={s:.6g}"))
    for k in range(budget - ladder):
        d = rng.standard_normal(g.dim)
        c = c0 + d / np.linalg.norm(d) * g.delta * 0.5 * rng.random()
        if k % 2 == 0:
            s = g.delta * (0.05 + 0.5 * rng.random())
            funcs.append((radial_candidate(g, spec.m, c, s), f"radial random {k}"))
        else:
            funcs.append((bump_candidate(g, c, g.delta * (0.2 + 0.5 * rng.random()), rng.random()),
                          f"bump random {k}"))
    return [Candidate(np.asarray(f(g.points)), np.asarray(f(g.boundary_points)), lab) for f, lab in funcs]


def hessian_density(spec, cand, chi=None):
    """S_m / binom(n, m) per node, or None when the candidate is not admissible."""
    if np.min(cand.interior) < -ADMISSIBLE_TOL or np.max(cand.interior) > 1 + ADMISSIBLE_TOL:
        return None
    if cand.boundary.size and (np.min(cand.boundary) < -ADMISSIBLE_TOL
                               or np.max(cand.boundary) > 1 + ADMISSIBLE_TOL):
        return None
    lam, _ = solver.spectra(spec, cand.interior, cand.boundary, chi=chi)
    s = symfun.symmetric_all(lam, upto=spec.m)[:, 1:]
    scale = 1.0 + np.max(np.abs(lam))
    rel = max(ADMISSIBLE_TOL, TRUNCATION_FACTOR * spec.grid.spacing ** 2)
    if np.any(s < -rel * scale ** np.arange(1, spec.m + 1)):
        return None
    return np.maximum(s[:, -1], 0.0) / comb(spec.n, spec.m)


def _masses(spec, candidates, chi=None):
    w = spec.grid.volume_element(spec.alpha)
    out = []
    for c in candidates:
        dens = hessian_density(spec, c, chi)
        out.append(None if dens is None else dens * w)
    return out


def estimate_capacity(E, spec, budget=64, seed=0, candidates=None, set_id="E", _cache=None):
    """Best lower bound for the capacity of E over a candidate family.

    Returns the chi-capacity and the chi = 0 variant; both are lower
    bounds only (the sup runs over a finite family).
    """
    mask = _mask(spec, E)
    cands = candidate_family(spec, budget, seed) if candidates is None else candidates
    if _cache is None:
        _cache = {}
    if "chi" not in _cache:
        _cache["chi"] = _masses(spec, cands)
        _cache["flat"] = _masses(spec, cands, chi=np.zeros_like(spec.chi))
    best, best_i = 0.0, -1
    best_m = 0.0
    for i, (wc, wf) in enumerate(zip(_cache["chi"], _cache["flat"])):
        if wc is not None:
            val = float(np.sum(wc[mask]))
            if val > best:
                best, best_i = val, i
        if wf is not None:
            best_m = max(best_m, float(np.sum(wf[mask])))
    admissible = any(w is not None for w in _cache["chi"])
    witness = cands[best_i].interior if best_i >= 0 else np.zeros(spec.grid.size)
    vol = spec.grid.integrate(1.0, spec.alpha, mask).value
    return CapacityEstimate(set_id=set_id, cap_lower=best, witness=witness, volume=vol,
                            samples=len(cands), cap_m_lower=best_m, witness_index=best_i,
                            degenerate=not admissible)


def capacity_family(sets, spec, budget=64, seed=0):
    """Estimates for several sets on one shared candidate family (monotone under inclusion)."""
    cands = candidate_family(spec, budget, seed)
    cache = {}
    return [estimate_capacity(E, spec, candidates=cands, set_id=name, _cache=cache)
            for name, E in sets]


def disc_capacity(s, r):
    """Capacity of the disc of radius s in the disc of radius r (n = m = 1, chi = 0)."""
    return np.pi / (2.0 * np.log(r / s))


@dataclass
class VolumeCapacityReport:
    tau: float
    fitted_c: float
    frozen_c: float
    volumes: np.ndarray
    caps: np.ndarray
    ok: bool
    vacuous: bool

    def scatter(self):
        return np.column_stack([self.volumes, self.caps])


def verify_volume_capacity(estimates, spec, tau, frozen_c=None):
    """V(E) <= C(tau) cap(E)^tau over a family of estimates.

    ``fitted_c`` is the smallest constant consistent with the family; the
    check passes when no member exceeds ``frozen_c`` (or the fitted value).
    """
    n, m = spec.n, spec.m
    vacuous = m == n
    if not vacuous and not 1 < tau < n / (n - m):
        raise DomainError(f"tau must lie in (1, {n / (n - m):g})")
    vols = np.array([e.volume for e in estimates])
    caps = np.array([e.cap_lower for e in estimates])
    if np.any(caps <= 0):
        raise DomainError("capacity estimate is zero for a set of positive volume")
    ratios = vols / caps ** tau
    fitted = float(np.max(ratios))
    frozen = fitted if frozen_c is None else float(frozen_c)
    ok = bool(np.all(vols <= frozen * caps ** tau * (1 + 1e-12)))
    return VolumeCapacityReport(tau=tau, fitted_c=fitted, frozen_c=frozen, volumes=vols,
                                caps=caps, ok=ok, vacuous=vacuous)


# stability ----------------------------------------------------------------------------

@dataclass
class StabilityReport:
    sup_diff: float
    boundary_diff: float
    density_lp: float
    l1_diff: float
    p: float
    constant: float
    bound: float

    @property
    def ok(self):
        return self.sup_diff <= self.bound + STABILITY_SLACK

    @property
    def residual(self):
        return self.sup_diff - self.bound


def lp_norm(spec, values, p):
    w = spec.grid.volume_element(spec.alpha)
    return float(np.sum(np.abs(values) ** p * w) ** (1.0 / p))


def verify_stability(spec_f, report_u, spec_g, report_v, p, constant):
    """sup|u - v| <= sup_boundary |phi - psi| + C ||f - g||_p^{1/m}, f = h^m."""
    if spec_f.grid is not spec_g.grid:
        raise DomainError("both problems must live on the same grid")
    n, m = spec_f.n, spec_f.m
    if p <= n / m:
        raise DomainError(f"need p > n/m = {n / m:g}")
    du = report_u.solution - report_v.solution
    dphi = np.abs(spec_f.boundary - spec_g.boundary)
    sup_diff = float(max(np.max(np.abs(du)), np.max(dphi, initial=0.0)))
    bdiff = float(np.max(dphi, initial=0.0))
    dens = lp_norm(spec_f, spec_f.rhs ** m - spec_g.rhs ** m, p)
    return StabilityReport(sup_diff=sup_diff, boundary_diff=bdiff, density_lp=dens,
                           l1_diff=lp_norm(spec_f, du, 1.0), p=p, constant=constant,
                           bound=bdiff + constant * dens ** (1.0 / m))


def fit_holder(sup_diffs, l1_diffs):
    """Least-squares fit of log sup = log C + a log L1; returns (C, a)."""
    x = np.log(np.asarray(l1_diffs, dtype=float))
    y = np.log(np.asarray(sup_diffs, dtype=float))
    a, logc = np.polyfit(x, y, 1)
    return float(np.exp(logc)), float(a)


# mixed-type inequality -----------------------------------------------------------------

@dataclass
class MixedReport:
    margins: np.ndarray  # (m + 1, size): E_k - f^{k/m} g^{(m-k)/m}
    mixed: np.ndarray
    lower: np.ndarray
    tol: float
    fallback_nodes: int

    @property
    def min_margin(self):
        return np.min(self.margins, axis=1)

    @property
    def ok(self):
        return bool(np.all(self.margins >= -self.tol))


def mixed_forms(a, b, m, frame_tol=1e-10):
    """E_k = [x^k y^{m-k}] S_m(x A + y B) / binom(m, k) for Hermitian A, B (batched).

    Where the eigenframe of A also diagonalizes B the mixed symmetric
    function of the two spectra is used; elsewhere the coefficients come
    from exact interpolation of t -> S_m(eig(t A + B)) at m + 1 nodes.
    Returns (E of shape (..., m + 1), mask of fallback nodes).
    """
    lam, q = np.linalg.eigh(a)
    bq = np.conj(np.swapaxes(q, -1, -2)) @ b @ q
    mu = np.real(np.diagonal(bq, axis1=-2, axis2=-1))
    off = np.max(np.abs(bq - mu[..., :, None] * np.eye(a.shape[-1])), axis=(-2, -1))
    scale = 1.0 + np.max(np.abs(mu), axis=-1)
    fallback = off > frame_tol * scale
    out = np.empty(a.shape[:-2] + (m + 1,))
    for k in range(m + 1):
        out[..., k] = symfun.mixed_symmetric(lam, mu, k, m) / comb(m, k)
    if np.any(fallback):
        ts = np.arange(m + 1, dtype=float)
        vals = np.stack([
            symfun.elementary_symmetric(np.linalg.eigvalsh(t * a[fallback] + b[fallback]), m) for t in ts
        ], axis=-1)
        coef = np.linalg.solve(np.vander(ts, increasing=True), vals.T).T  # coef[:, k] of t^k
        out[fallback] = coef / np.array([comb(m, k) for k in range(m + 1)])
    return out, fallback


def verify_mixed_inequality(report_u, spec_u, report_v, spec_v, tol=None):
    g = spec_u.grid
    if spec_v.grid is not g:
        raise DomainError("both solutions must live on the same grid")
    m = spec_u.m
    tol = 10 * g.spacing ** 2 if tol is None else tol
    cinv = spec_u.cinv
    ch = np.conj(np.swapaxes(cinv, -1, -2))
    gu = spec_u.chi + g.complex_hessian(report_u.solution, report_u.boundary)
    gv = spec_v.chi + g.complex_hessian(report_v.solution, report_v.boundary)
    a = cinv @ gu @ ch
    b = cinv @ gv @ ch
    a = 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))
    b = 0.5 * (b + np.conj(np.swapaxes(b, -1, -2)))
    E, fb = mixed_forms(a, b, m)
    f, gd = spec_u.rhs ** m, spec_v.rhs ** m
    ks = np.arange(m + 1)
    lower = f[:, None] ** (ks / m) * gd[:, None] ** ((m - ks) / m)
    return MixedReport(margins=(E - lower).T, mixed=E.T, lower=lower.T, tol=tol,
                       fallback_nodes=int(np.sum(fb)))


# Wang-type product bound -----------------------------------------------------------------

def wang_ratios(samples, m):
    """prod_i S_{m-1;i} / S_m^{n(m-1)/m} for each spectrum in ``samples`` (rows in Gamma_m)."""
    lhs, rhs = symfun.wang_product_bound(np.asarray(samples, dtype=float), m)
    return lhs / rhs
