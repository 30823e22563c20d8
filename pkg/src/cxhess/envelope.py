"""Perron envelope by ball lifts, and the penalized approximation from above.

A lift solves the Dirichlet problem on (domain) intersected with a small
ball, with boundary data read off the current iterate, and glues the result
back by pointwise max.  Sweeping lifts over a cover converges to the
envelope of subsolutions, which on solvable problems is the direct solution.
"""
from dataclasses import dataclass, field
import itertools
import logging

import numpy as np
from scipy.spatial import cKDTree

from . import solver
from .errors import DomainError, GeometryError, NonConvergenceError, SolverError

log = logging.getLogger(__name__)

EPS_SCHEDULE = (1e-1, 1e-2, 1e-3, 1e-4)


def envelope_tol(grid):
    return max(1e-7, grid.spacing ** 2)


@dataclass
class BallCover:
    balls: list
    overlap_fraction: float

    def __len__(self):
        return len(self.balls)

    def colors(self):
        """Greedy coloring so that balls sharing a color are disjoint; lexicographic ball order."""
        out = []
        for i, (ci, ri) in enumerate(self.balls):
            used = {out[j] for j, (cj, rj) in enumerate(self.balls[:i])
                    if np.linalg.norm(ci - cj) < ri + rj}
            out.append(next(c for c in itertools.count() if c not in used))
        return out

    def order(self):
        col = self.colors()
        return sorted(range(len(self.balls)), key=lambda i: (col[i], i))


def make_cover(grid, per_axis=3, overlap=0.3, max_radius=None):
    """Cubic lattice of ball centres covering every interior node.

    ``per_axis`` centres per real axis (kept only if their ball meets the
    domain); the radius is the covering radius of the interior nodes, raised
    if needed so that neighbouring balls overlap by at least ``overlap``
    (fraction 1 - pitch / (2 radius)).
    """
    if not 0 < overlap < 1:
        raise DomainError("overlap fraction must lie in (0, 1)")
    c0 = grid.balls[0].center
    delta = grid.delta
    if per_axis == 1:
        centers = c0[None, :].copy()
        pitch = 0.0
    else:
        pitch = 1.2 * delta / (per_axis - 1)
        offs = (np.arange(per_axis) - (per_axis - 1) / 2) * pitch
        centers = np.array(list(itertools.product(offs, repeat=grid.dim))) + c0
    dist, _ = cKDTree(centers).query(grid.points)
    radius = float(np.max(dist)) * 1.02 + grid.spacing
    if pitch > 0:
        radius = max(radius, pitch / (2 * (1 - overlap)))
    keep = np.linalg.norm(centers - c0, axis=1) < delta + radius
    centers = centers[keep]
    _, owner = cKDTree(centers).query(grid.points)
    centers = centers[np.unique(owner)]
    if max_radius is not None and radius > max_radius:
        raise GeometryError(f"cover radius {radius:g} exceeds the limit {max_radius:g}")
    frac = 1.0 - pitch / (2 * radius) if pitch > 0 else 1.0
    return BallCover([(c, radius) for c in centers], frac)


@dataclass
class EnvelopeState:
    current: np.ndarray
    boundary: np.ndarray
    sweep_count: int = 0
    max_update: float = np.inf
    history: list = field(default_factory=list)
    iterates: list = field(default_factory=list)


class _LiftCache:
    def __init__(self):
        self.subs = {}

    def get(self, spec, ball):
        key = (tuple(np.round(ball[0], 14)), round(float(ball[1]), 14))
        if key not in self.subs:
            g = spec.grid
            sub = g.subgrid(ball[0], ball[1])
            idx = sub.parent_index
            sspec = solver.ProblemSpec(
                grid=sub, alpha=spec.alpha[idx], chi=spec.chi[idx], m=spec.m, rhs=spec.rhs[idx],
                boundary=np.zeros(sub.nboundary), validate=False,
            )
            sspec._cinv = spec.cinv[idx]
            self.subs[key] = sspec
        return self.subs[key]


def lift(state, ball, spec, opts=None, cache=None):
    """Replace ``state.current`` on the ball by max(current, ball solution)."""
    cache = cache or _LiftCache()
    sspec = cache.get(spec, ball)
    sub = sspec.grid
    idx = sub.parent_index
    if sub.size == 0:
        return state
    sspec.boundary = spec.grid.boundary_values_from_parent(sub, state.current, state.boundary)
    start = state.current[idx]
    sspec.phi_interior = start
    try:
        try:
            rep = solver.solve_dirichlet(sspec, opts, u0=start)
        except SolverError:
            rep = solver.solve_dirichlet(sspec, opts)
    except SolverError as exc:
        raise type(exc)(f"lift on ball centre {np.round(ball[0], 6).tolist()} failed: {exc}") from exc
    new = state.current.copy()
    new[idx] = np.maximum(new[idx], rep.solution)
    return EnvelopeState(current=new, boundary=state.boundary, sweep_count=state.sweep_count,
                         max_update=float(np.max(new - state.current)), history=state.history,
                         iterates=state.iterates)


def perron_sweep(spec, cover, max_sweeps=50, tol=None, opts=None, keep_iterates=False):
    """Sweep lifts over the cover, starting from the subsolution, until updates fall below tol."""
    if spec.subsolution is None:
        raise DomainError("perron_sweep needs a subsolution to start from")
    tol = envelope_tol(spec.grid) if tol is None else tol
    state = EnvelopeState(current=spec.subsolution.copy(), boundary=spec.boundary.copy())
    if keep_iterates:
        state.iterates.append(state.current.copy())
    cache = _LiftCache()
    order = cover.order()
    for sweep in range(1, max_sweeps + 1):
        before = state.current
        for i in order:
            state = lift(state, cover.balls[i], spec, opts, cache)
        state.sweep_count = sweep
        state.max_update = float(np.max(np.abs(state.current - before)))
        state.history.append(state.max_update)
        if keep_iterates:
            state.iterates.append(state.current.copy())
        log.debug("sweep %d: max update %.3e", sweep, state.max_update)
        if state.max_update <= tol:
            return state
    raise NonConvergenceError(f"envelope stalled: last update {state.max_update:.3e} > {tol:.3e} "
                              f"after {max_sweeps} sweeps", residual_history=state.history)


def modulus_of_continuity(grid, values, radii=None):
    """max |u(x) - u(y)| over node pairs with |x - y| <= t, for each t in ``radii``.

    Defaults to 1, 2 and 4 grid spacings.  A discrete envelope can only be
    checked this way; continuity of the continuum limit is not certified.
    """
    radii = radii or [grid.spacing * k for k in (1, 2, 4)]
    tree = cKDTree(grid.points)
    out = {}
    for t in radii:
        pairs = tree.query_pairs(t * (1 + 1e-9), output_type="ndarray")
        out[float(t)] = float(np.max(np.abs(values[pairs[:, 0]] - values[pairs[:, 1]]), initial=0.0))
    return out


# penalization -------------------------------------------------------------------------

EXP_CLIP = 50.0


class _Penalty:
    """T(w) = exp((w - h)/eps) (F_* + eps) and its derivative."""

    def __init__(self, h, fstar, eps):
        self.h, self.fstar, self.eps = h, fstar, eps

    def __call__(self, w):
        e = np.exp(np.clip((w - self.h) / self.eps, -700.0, EXP_CLIP)) * (self.fstar + self.eps)
        return e, e / self.eps


def _target_values(spec, h_target):
    g = spec.grid
    if callable(h_target):
        return np.asarray(h_target(g.points), float), np.asarray(h_target(g.boundary_points), float)
    hi, hb = h_target
    return np.asarray(hi, float), np.asarray(hb, float)


def penalized_solve(spec, h_target, eps, opts=None, u0=None):
    """Solve F(A(w)) = exp((w - h)/eps) (F_* + eps), w = h on the boundary.

    ``h_target`` is a callable of points or a pair (interior values, boundary
    values).  F_* = max(F(A(h)), 0) with F = 0 outside the cone.
    """
    if not 0 < eps <= 1:
        raise DomainError("eps must lie in (0, 1]")
    hi, hb = _target_values(spec, h_target)
    fstar = np.maximum(solver.evaluate_F(spec, hi, hb), 0.0)
    pspec = spec.with_(boundary=hb, phi_interior=hi, subsolution=None)
    pspec._cinv = spec._cinv
    opts = opts or solver.SolveOptions()
    if u0 is None:
        u0 = solver.default_initializer(pspec, opts.cone_eps)
    w, iters, margin = solver._newton(pspec, u0, _Penalty(hi, fstar, eps), opts, hist := [])
    return solver.SolveReport(solution=w, boundary=hb.copy(), residual_history=hist,
                              newton_iters=iters, cone_margin=margin,
                              diagnostics={"eps": eps, "max_excess": float(np.max(w - hi))})


def penalized_family(spec, h_target, eps_values=EPS_SCHEDULE, opts=None):
    """penalized_solve along a decreasing eps schedule with warm starts."""
    out = []
    u0 = None
    for eps in eps_values:
        rep = penalized_solve(spec, h_target, eps, opts, u0)
        u0 = rep.solution
        out.append(rep)
    return out


def sup_convolution(points, values, targets, sigma):
    """max_y values(y) - |x - y|^2 / (2 sigma) over sample points y, at each target x."""
    osc = float(np.max(values) - np.min(values))
    radius = np.sqrt(2 * sigma * osc) + 1e-12
    tree = cKDTree(points)
    out = np.empty(len(targets))
    for k, nbrs in enumerate(tree.query_ball_point(targets, radius)):
        if not nbrs:
            _, j = tree.query(targets[k])
            nbrs = [j]
        d2 = np.sum((points[nbrs] - targets[k]) ** 2, axis=1)
        out[k] = np.max(values[nbrs] - d2 / (2 * sigma))
    return out


def approximate_from_above(spec, u_rough, levels=4, sigma0=None, eps=1e-3, opts=None):
    """Decreasing family of smooth subsolutions lying above ``u_rough``.

    Level j penalizes towards the majorant phi_j = (sup-convolution of
    u_rough with parameter sigma0 4^-j) + spacing^2 2^-j.  A backward pass
    then adds the smallest constants making every level >= u_rough and
    the family nodewise nonincreasing in j.  Returns (fields, constants).
    """
    g = spec.grid
    u_rough = np.asarray(u_rough, dtype=float)
    sigma0 = 0.05 * g.delta ** 2 if sigma0 is None else sigma0
    samples = np.concatenate([g.points, g.boundary_points])
    svals = np.concatenate([u_rough, spec.boundary])
    raw = []
    for j in range(levels):
        sigma = sigma0 * 4.0 ** -j
        eta = g.spacing ** 2 * 2.0 ** -j
        hi = sup_convolution(samples, svals, g.points, sigma) + eta
        hb = sup_convolution(samples, svals, g.boundary_points, sigma) + eta
        raw.append(penalized_solve(spec, (hi, hb), eps, opts).solution)
    fields = [None] * levels
    consts = [0.0] * levels
    for j in reversed(range(levels)):
        c = max(0.0, float(np.max(u_rough - raw[j])))
        if j + 1 < levels:
            c = max(c, float(np.max(fields[j + 1] - raw[j])))
        consts[j] = c
        fields[j] = raw[j] + c
    return fields, consts
