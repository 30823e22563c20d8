"""Dirichlet solver for S_m(lambda(alpha^{-1}(chi + u_{i jbar})))^{1/m} = h on a ball.

Unknowns are the values of u at interior nodes; Dirichlet data sit on the
grid's boundary points.  ``u_{i jbar}`` is d^2u/dz_i dzbar_j with no 1/pi
factor, so for example u = c(|z|^2 - delta^2) has u_{i jbar} = c * identity.
"""
from dataclasses import dataclass, field, replace
import logging
import time

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import pencil, symfun
from .errors import ConeTrapError, DomainError, GeometryError, NonConvergenceError, SolverError
from .expr import as_callable

log = logging.getLogger(__name__)


@dataclass
class SolveOptions:
    tol_residual: float = 1e-8
    max_iter: int = 200
    min_step: float = 1e-6
    backtrack: float = 0.5
    linear_solver: str = "auto"
    linear_rtol: float = 1e-12
    regularize: bool = True
    eps_schedule: tuple = (1e-2, 1e-3, 1e-4)
    cone_eps: float = 1e-6


@dataclass
class ProblemSpec:
    """One Dirichlet problem sampled on a grid.

    ``alpha`` and ``chi`` are (size, n, n) Hermitian arrays on interior nodes,
    ``rhs`` is h >= 0 (root form), ``boundary`` holds phi on the grid's
    boundary points.  ``phi_interior`` is an optional extension of phi used
    only by the default initializer.
    """

    grid: object
    alpha: np.ndarray
    chi: np.ndarray
    m: int
    rhs: np.ndarray
    boundary: np.ndarray
    subsolution: np.ndarray = None
    phi_interior: np.ndarray = None
    alpha_fn: object = None
    chi_fn: object = None
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        g = self.grid
        n = g.n
        self.alpha = np.asarray(self.alpha, dtype=complex)
        self.chi = np.asarray(self.chi, dtype=complex)
        self.rhs = np.asarray(self.rhs, dtype=float)
        self.boundary = np.asarray(self.boundary, dtype=float)
        if self.alpha.shape != (g.size, n, n) or self.chi.shape != (g.size, n, n):
            raise DomainError("alpha and chi must have shape (size, n, n)")
        if self.rhs.shape != (g.size,) or self.boundary.shape != (g.nboundary,):
            raise DomainError("rhs / boundary shape does not match the grid")
        if not 1 <= self.m <= n:
            raise DomainError(f"order m={self.m} outside 1..{n}")
        self._cinv = None
        if not self.validate:
            return
        pencil.hermitian(self.alpha, 1e-10)
        pencil.hermitian(self.chi, 1e-10)
        pencil.check_metric(self.alpha)
        if self.subsolution is not None:
            self.subsolution = np.asarray(self.subsolution, dtype=float)
            lam, _ = spectra(self, self.subsolution)
            F = node_values(lam, self.m)
            ok = symfun.in_cone(lam, self.m)
            if not np.all(ok):
                node = int(np.nonzero(~ok)[0][0])
                raise DomainError(f"subsolution leaves Gamma_{self.m} at node {node}")
            if np.any(F < self.rhs - 1e-9):
                node = int(np.argmin(F - self.rhs))
                raise DomainError(f"subsolution has F < h at node {node}")

    @property
    def cinv(self):
        if self._cinv is None:
            self._cinv = pencil.whitener(self.alpha)
        return self._cinv

    @property
    def n(self):
        return self.grid.n

    def with_(self, **changes):
        changes.setdefault("validate", False)
        return replace(self, **changes)


@dataclass
class SolveReport:
    solution: np.ndarray
    boundary: np.ndarray
    residual_history: list
    newton_iters: int
    cone_margin: float
    continuity_steps: int = 0
    wall_time: float = 0.0
    converged: bool = True
    eps_sequence: list = field(default_factory=list)
    eps_differences: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def final_residual(self):
        return self.residual_history[-1] if self.residual_history else float("nan")

    def to_dict(self):
        return {
            "final_residual": self.final_residual,
            "residual_history": list(map(float, self.residual_history)),
            "newton_iters": int(self.newton_iters),
            "cone_margin": float(self.cone_margin),
            "continuity_steps": int(self.continuity_steps),
            "wall_time": float(self.wall_time),
            "converged": bool(self.converged),
            "eps_sequence": list(map(float, self.eps_sequence)),
            "eps_differences": list(map(float, self.eps_differences)),
            "diagnostics": self.diagnostics,
        }


# problem construction ----------------------------------------------------------------

def _matrix_field(value, grid, points):
    """Constant matrix, scalar (times identity) or callable -> (len(points), n, n)."""
    n = grid.n
    if value is None:
        value = np.eye(n)
    if callable(value):
        out = np.asarray(value(points), dtype=complex)
    else:
        arr = np.asarray(value, dtype=complex)
        if arr.ndim == 0:
            arr = arr * np.eye(n)
        out = np.broadcast_to(arr, (len(points), n, n)).copy() if arr.ndim == 2 else arr
    if out.shape != (len(points), n, n):
        raise DomainError(f"matrix field has shape {out.shape}, expected {(len(points), n, n)}")
    return out


def make_problem(grid, m, h=None, f=None, phi=0.0, alpha=None, chi=None, subsolution=None,
                 constants=None):
    """Sample a problem on ``grid``.

    alpha, chi: None (identity), scalar, constant matrix or callable of points.
    h (root form) or f (density, h = f^{1/m}), phi, subsolution: numbers,
    expression strings, callables or arrays over interior nodes.
    """
    n = grid.n
    consts = {"delta": grid.delta, **(constants or {})}
    if (h is None) == (f is None):
        raise DomainError("give exactly one of h or f")

    def scalar(value, pts):
        if isinstance(value, np.ndarray) and value.shape == (len(pts),):
            return value.astype(float)
        return np.asarray(as_callable(value, n, consts)(pts), dtype=float)

    if h is not None:
        rhs = scalar(h, grid.points)
    else:
        dens = scalar(f, grid.points)
        if np.any(dens < 0):
            raise DomainError("density f must be non-negative")
        rhs = dens ** (1.0 / m)
    phi_fn = phi if isinstance(phi, np.ndarray) else as_callable(phi, n, consts)
    if isinstance(phi_fn, np.ndarray):
        raise DomainError("phi must be a number, expression or callable")
    alpha_fn = alpha if callable(alpha) else None
    chi_fn = chi if callable(chi) else None
    sub = None if subsolution is None else scalar(subsolution, grid.points)
    return ProblemSpec(
        grid=grid,
        alpha=_matrix_field(alpha, grid, grid.points),
        chi=_matrix_field(chi, grid, grid.points),
        m=m,
        rhs=rhs,
        boundary=np.asarray(phi_fn(grid.boundary_points), dtype=float),
        subsolution=sub,
        phi_interior=np.asarray(phi_fn(grid.points), dtype=float),
        alpha_fn=alpha_fn,
        chi_fn=chi_fn,
    )


# pointwise evaluation ------------------------------------------------------------------

def spectra(spec, u, boundary=None, chi=None):
    """Relative eigenvalues and whitened eigenvectors of chi + dd^c u at each node."""
    ub = spec.boundary if boundary is None else boundary
    g = (spec.chi if chi is None else chi) + spec.grid.complex_hessian(u, ub)
    return pencil.whitened_spectra(g, spec.cinv)


def node_values(lam, m):
    """F = S_m^{1/m} where lam is in the cone, 0 elsewhere."""
    sm = symfun.elementary_symmetric(lam, m)
    ok = symfun.in_cone(lam, m)
    return np.where(ok & (sm > 0), np.abs(sm) ** (1.0 / m), 0.0)


def evaluate_F(spec, u, boundary=None):
    lam, _ = spectra(spec, u, boundary)
    return node_values(lam, spec.m)


def _state(spec, u, boundary=None):
    lam, q = spectra(spec, u, boundary)
    m = spec.m
    ok = symfun.in_cone(lam, m) & (symfun.elementary_symmetric(lam, m) >= symfun.F_FLOOR)
    F, f = symfun.f_and_partials(lam, m)
    return lam, q, F, f, ok


def linearized_field(spec, u, boundary=None):
    """Per-node L^{p jbar} of the current iterate, plus f_i and the trace."""
    lam, q, F, f, ok = _state(spec, u, boundary)
    if not np.all(ok):
        node = int(np.nonzero(~ok)[0][0])
        raise DomainError(f"iterate leaves Gamma_{spec.m} at node {node}")
    return pencil.linearization(spec.cinv, q, f), f, F


# linear algebra ----------------------------------------------------------------------

def _krylov(A, b, opts, method):
    if method == "bicgstab":
        d = A.diagonal()
        if np.any(d == 0):
            raise SolverError("zero diagonal in Jacobian")
        x, info = spla.bicgstab(A, b, rtol=opts.linear_rtol, atol=0.0, M=sp.diags(1.0 / d),
                                maxiter=20 * A.shape[0])
    else:
        import pyamg

        ml = pyamg.smoothed_aggregation_solver(A.tocsr(), symmetry="nonsymmetric")
        x, info = spla.gmres(A, b, rtol=opts.linear_rtol, atol=0.0, M=ml.aspreconditioner(),
                             restart=100, maxiter=200)
    if info != 0 or not np.all(np.isfinite(x)):
        raise SolverError(f"{method} did not converge (info={info})")
    return x


def _linear_solve(A, b, opts):
    """Jacobian solve: Jacobi-BiCGStab, AMG-GMRES as fallback, LU for small systems."""
    method = opts.linear_solver
    if method == "direct" or (method == "auto" and A.shape[0] <= 4000):
        return spla.splu(A.tocsc()).solve(b)
    if method == "auto":
        try:
            return _krylov(A, b, opts, "bicgstab")
        except SolverError:
            log.info("BiCGStab failed, retrying with AMG-preconditioned GMRES")
            return _krylov(A, b, opts, "gmres")
    if method in ("bicgstab", "gmres"):
        return _krylov(A, b, opts, method)
    raise DomainError(f"unknown linear solver {method!r}")


# solvers -----------------------------------------------------------------------------

def solve_linear(spec, opts=None):
    """m = 1: tr_alpha(chi + dd^c u) = h with u = phi on the boundary."""
    opts = opts or SolveOptions()
    if spec.m != 1:
        raise DomainError("solve_linear requires m = 1")
    t0 = time.perf_counter()
    g = spec.grid
    ainv = np.linalg.inv(spec.alpha)
    # tr(alpha^{-1} U) = sum_{p,j} ainv[p, j] U[j, p]
    A, B = g.linear_operator(ainv)
    trchi = np.real(np.einsum("kij,kji->k", ainv, spec.chi))
    b = spec.rhs - trchi - B @ spec.boundary
    try:
        u = _linear_solve(A, b, opts)
    except RuntimeError as exc:
        raise SolverError(f"singular linear system: {exc}") from None
    res = np.max(np.abs(A @ u + B @ spec.boundary + trchi - spec.rhs))
    lam, _ = spectra(spec, u)
    return SolveReport(
        solution=u, boundary=spec.boundary.copy(), residual_history=[float(res)], newton_iters=1,
        cone_margin=float(np.min(symfun.cone_margin(lam, 1))),
        wall_time=time.perf_counter() - t0,
    )


def default_initializer(spec, cone_eps=1e-6):
    """rho if given, else phi-extension + c(|z|^2 - delta^2) with the smallest c giving cone margin."""
    if spec.subsolution is not None:
        return spec.subsolution.copy()
    g = spec.grid
    base = spec.phi_interior if spec.phi_interior is not None else harmonic_extension(spec)
    bowl = g.defining_function()
    for c in [0.0] + [2.0 ** k for k in range(-3, 31)]:
        u0 = base + c * bowl
        lam, _ = spectra(spec, u0)
        if np.all(symfun.in_cone(lam, spec.m, certified=True, cone_eps=cone_eps)):
            return u0
    raise ConeTrapError("no admissible initial iterate of the form phi + c(|z|^2 - delta^2)")


def harmonic_extension(spec):
    g = spec.grid
    lap = make_problem_like(spec, alpha=np.eye(g.n), chi=np.zeros((g.n, g.n)), rhs=np.zeros(g.size), m=1)
    return solve_linear(lap).solution


def make_problem_like(spec, alpha=None, chi=None, rhs=None, m=None, boundary=None):
    g = spec.grid

    def field_of(value, default):
        if value is None:
            return default
        arr = np.asarray(value, dtype=complex)
        return np.broadcast_to(arr, (g.size, g.n, g.n)).copy() if arr.ndim == 2 else arr

    out = spec.with_(
        alpha=field_of(alpha, spec.alpha), chi=field_of(chi, spec.chi),
        rhs=spec.rhs if rhs is None else np.asarray(rhs, dtype=float),
        m=spec.m if m is None else m,
        boundary=spec.boundary if boundary is None else np.asarray(boundary, dtype=float),
        subsolution=None,
    )
    out._cinv = None
    return out


class _Target:
    """Right-hand side T(u) of F(u) = T(u) and its pointwise derivative."""

    def __init__(self, values):
        self.values = values

    def __call__(self, u):
        return self.values, None


def _newton(spec, u0, target, opts, history=None):
    g = spec.grid
    m = spec.m
    u = np.array(u0, dtype=float)
    history = [] if history is None else history
    lam, q, F, f, ok = _state(spec, u)
    if not np.all(ok):
        node = int(np.nonzero(~ok)[0][0])
        raise ConeTrapError(f"initial iterate outside Gamma_{m} at node {node}", node=node,
                            residual_history=history)
    T, dT = target(u)
    R = F - T
    res = float(np.max(np.abs(R)))
    history.append(res)
    iters = 0
    while res > opts.tol_residual:
        if iters >= opts.max_iter:
            raise NonConvergenceError(f"Newton did not converge in {opts.max_iter} iterations "
                                      f"(residual {res:.3e})", residual_history=history)
        L = pencil.linearization(spec.cinv, q, f)
        A, _ = g.linear_operator(L)
        if dT is not None:
            A = A - sp.diags(dT)
        du = _linear_solve(A.tocsr(), -R, opts)
        step = 1.0
        last_bad = None
        while True:
            trial = u + step * du
            lam_t, q_t, F_t, f_t, ok_t = _state(spec, trial)
            if np.all(ok_t):
                T_t, dT_t = target(trial)
                R_t = F_t - T_t
                res_t = float(np.max(np.abs(R_t)))
                if np.isfinite(res_t) and res_t <= res:
                    break
                last_bad = ("residual", None)
            else:
                last_bad = ("cone", int(np.nonzero(~ok_t)[0][0]))
            step *= opts.backtrack
            if step < opts.min_step:
                if last_bad[0] == "cone":
                    raise ConeTrapError(f"line search cannot keep Gamma_{m} (node {last_bad[1]})",
                                        node=last_bad[1], residual_history=history)
                raise NonConvergenceError(f"line search stalled at residual {res:.3e}",
                                          residual_history=history)
        u, q, F, f, R, res, dT = trial, q_t, F_t, f_t, R_t, res_t, dT_t
        history.append(res)
        iters += 1
        log.debug("newton %d: residual %.3e step %.3g", iters, res, step)
    margin = float(np.min(symfun.cone_margin(lam_t if iters else lam, m)))
    return u, iters, margin


def solve_dirichlet(spec, opts=None, u0=None):
    """Damped Newton for F(A) = h with a cone-preserving backtracking line search.

    Degenerate data (min h <= 0) are regularized with h_eps = max(h, eps)
    along ``opts.eps_schedule``; the report lists the eps values and the
    sup-norm change between consecutive eps solutions.
    """
    opts = opts or SolveOptions()
    t0 = time.perf_counter()
    u = default_initializer(spec, opts.cone_eps) if u0 is None else np.asarray(u0, dtype=float)
    history = []
    eps_seq, eps_diff = [], []
    if np.min(spec.rhs) <= 0 and spec.m > 1 or np.min(spec.rhs) < 0:
        if not opts.regularize:
            raise DomainError("h must be positive unless regularization is enabled")
        iters = 0
        prev = None
        for eps in opts.eps_schedule:
            target = _Target(np.maximum(spec.rhs, eps))
            u, k, margin = _newton(spec, u, target, opts, history)
            iters += k
            if prev is not None:
                eps_diff.append(float(np.max(np.abs(u - prev))))
            prev = u.copy()
            eps_seq.append(eps)
    else:
        u, iters, margin = _newton(spec, u, _Target(spec.rhs), opts, history)
    return SolveReport(
        solution=u, boundary=spec.boundary.copy(), residual_history=history, newton_iters=iters,
        cone_margin=margin, wall_time=time.perf_counter() - t0,
        eps_sequence=eps_seq, eps_differences=eps_diff,
    )


def continuity_path(spec, steps, opts=None, u0=None):
    """Solve F = (1-t) h_0 + t h for t = 1/steps, ..., 1 with warm starts.

    h_0 is F at the initial iterate, so t = 0 is solved by construction.
    """
    opts = opts or SolveOptions()
    if steps < 1:
        raise DomainError("steps must be >= 1")
    t0 = time.perf_counter()
    u = default_initializer(spec, opts.cone_eps) if u0 is None else np.asarray(u0, dtype=float)
    h0 = evaluate_F(spec, u)
    history = []
    iters = 0
    margin = float("nan")
    for k in range(1, steps + 1):
        t = k / steps
        target = _Target((1 - t) * h0 + t * spec.rhs)
        try:
            u, it, margin = _newton(spec, u, target, opts, history)
        except (NonConvergenceError, ConeTrapError) as exc:
            raise NonConvergenceError(f"continuity step t={t:.4g} failed: {exc}",
                                      residual_history=history, t=t) from exc
        iters += it
    return SolveReport(
        solution=u, boundary=spec.boundary.copy(), residual_history=history, newton_iters=iters,
        cone_margin=margin, continuity_steps=steps, wall_time=time.perf_counter() - t0,
    )


# diagnostics -------------------------------------------------------------------------

@dataclass
class C0Check:
    lower_ok: bool
    upper_ok: bool
    lower_margin: float
    upper_margin: float
    c0: float
    tol: float


def reduce_to_zero_boundary(spec, C=None):
    """Rewrite the problem for u - s with s = C(|z|^2 - delta^2) + phi-extension.

    The new problem has zero boundary data, chi' = chi + dd^c s satisfies
    chi' >= alpha and F(chi') >= h, so 0 is a subsolution.  Returns
    (reduced_spec, s).
    """
    g = spec.grid
    ext = spec.phi_interior if spec.phi_interior is not None else harmonic_extension(spec)
    H = g.complex_hessian(ext, spec.boundary)
    bowl = g.defining_function()
    eye = np.eye(g.n)
    for c in ([C] if C is not None else [0.0] + [2.0 ** k for k in range(-3, 31)]):
        chi_new = spec.chi + H + c * eye
        gap = np.linalg.eigvalsh(chi_new - spec.alpha)[:, 0]
        lam, _ = pencil.whitened_spectra(chi_new, spec.cinv)
        if np.all(gap >= 0) and np.all(node_values(lam, spec.m) >= spec.rhs):
            shift = ext + c * bowl
            red = make_problem_like(spec, chi=chi_new, boundary=np.zeros(g.nboundary))
            red.phi_interior = np.zeros(g.size)
            return red, shift
    raise DomainError("could not find C making chi + dd^c s dominate alpha")


def check_c0_bounds(spec, report, opts=None):
    """0 <= u <= u_1 for the reduced problem, u_1 solving tr_alpha(chi + dd^c u_1) = 0."""
    g = spec.grid
    if np.max(np.abs(spec.boundary), initial=0.0) > 1e-12:
        raise DomainError("check_c0_bounds needs zero boundary data (use reduce_to_zero_boundary)")
    lam0, _ = pencil.whitened_spectra(spec.chi, spec.cinv)
    if np.any(node_values(lam0, spec.m) < spec.rhs - 1e-9):
        raise DomainError("0 is not a subsolution of the problem")
    lin = make_problem_like(spec, m=1, rhs=np.zeros(g.size))
    u1 = solve_linear(lin, opts).solution
    u = report.solution
    tol = 10 * g.spacing ** 2
    lower = float(np.min(u))
    upper = float(np.max(u - u1))
    return C0Check(lower_ok=lower >= -tol, upper_ok=upper <= tol, lower_margin=lower,
                   upper_margin=upper, c0=float(np.max(u1)), tol=tol)


@dataclass
class BarrierReport:
    mu: float
    tau: float
    max_excess: float
    min_b: float
    nodes: int
    tol: float

    @property
    def ok(self):
        return self.max_excess <= self.tol and self.min_b >= -self.tol


def verify_barrier(spec, report, mu_barrier, tau, point=None, tol=1e-6):
    """Check L b <= -Ftrace/2 and b >= 0 for b = u - r - mu r^2 near a boundary point.

    r = |z|^2 - delta^2; L is the linearization at the converged solution.
    """
    g = spec.grid
    c = g.balls[0].center
    if point is None:
        point = c.copy()
        point[0] += g.delta
    point = np.asarray(point, dtype=float)
    if abs(np.linalg.norm(point - c) - g.delta) > 1e-9 * max(1.0, g.delta):
        raise GeometryError("barrier point must lie on the boundary sphere")
    if not 0 < tau <= g.delta:
        raise GeometryError(f"half-ball radius {tau:g} leaves the grid (delta={g.delta:g})")
    region = np.linalg.norm(g.points - point, axis=1) <= tau * (1 + 1e-12)
    if not np.any(region):
        raise GeometryError("half-ball region contains no interior nodes")
    u, ub = report.solution, report.boundary
    r = g.defining_function()
    rb = g.boundary_defining_function()
    b = u - r - mu_barrier * r ** 2
    bb = ub - rb - mu_barrier * rb ** 2
    L, f, _ = linearized_field(spec, u, ub)
    Hb = g.complex_hessian(b, bb)
    Lb = np.real(np.einsum("kij,kji->k", L, Hb))
    ftrace = np.sum(f, axis=1)
    excess = Lb + 0.5 * ftrace
    return BarrierReport(mu=float(mu_barrier), tau=float(tau), max_excess=float(np.max(excess[region])),
                         min_b=float(np.min(b[region])), nodes=int(np.sum(region)), tol=tol)


def barrier_sweep(spec, report, mus=(0.0, 1.0, 10.0, 100.0, 1000.0), taus=None, point=None, tol=1e-6):
    g = spec.grid
    taus = taus or (g.delta / 2, g.delta / 4, g.delta / 8)
    out = []
    for mu in mus:
        for tau in taus:
            try:
                out.append(verify_barrier(spec, report, mu, tau, point, tol))
            except GeometryError as exc:
                log.info("skipping tau=%g: %s", tau, exc)
    return out


def metric_diagnostics(spec, step=1e-4):
    """Curvature/torsion bounds R, T of alpha, the constant C_1 and 16(R+T^2+3)C_1^2 delta^2.

    Needs ``spec.alpha_fn``; derivatives by central differences of the callable.
    """
    g = spec.grid
    n = g.n
    ev_a = np.linalg.eigvalsh(spec.alpha)
    ev_c = np.linalg.eigvalsh(spec.chi)
    c1 = float(max(np.max(ev_c), 1.0 / np.min(ev_a)))
    if spec.alpha_fn is None:
        R = T = 0.0
    else:
        def dz(fn, pts, k):
            e = np.zeros(g.dim)
            e[2 * k] = step
            fx = (fn(pts + e) - fn(pts - e)) / (2 * step)
            e[:] = 0
            e[2 * k + 1] = step
            fy = (fn(pts + e) - fn(pts - e)) / (2 * step)
            return fx, fy

        def christoffel(pts):
            a = np.asarray(spec.alpha_fn(pts), dtype=complex)
            ainv = np.linalg.inv(a)
            gam = np.zeros(a.shape[:-2] + (n, n, n), dtype=complex)  # gam[..., q, p, i]
            for p in range(n):
                fx, fy = dz(lambda x: np.asarray(spec.alpha_fn(x), dtype=complex), pts, p)
                dpa = 0.5 * (fx - 1j * fy)  # d_p alpha_{i lbar}
                # Gamma^q_{p i} = alpha^{q lbar} d_p alpha_{i lbar}; ainv[l, q] = alpha^{q lbar}
                gam[..., :, p, :] = np.einsum("...lq,...il->...qi", ainv, dpa)
            return gam

        pts = g.points
        gam = christoffel(pts)
        T = 0.0
        for i in range(n):
            for p in range(n):
                T = max(T, float(np.max(np.abs(gam[:, p, i, p] - gam[:, p, p, i]))))
        R = 0.0
        for p in range(n):
            fx, fy = dz(christoffel, pts, p)
            dbar = 0.5 * (fx + 1j * fy)
            for q in range(n):
                for i in range(n):
                    R = max(R, float(np.max(np.abs(dbar[:, q, p, i]))))
    return {"R": R, "T": T, "C1": c1, "smallness": 16 * (R + T ** 2 + 3) * c1 ** 2 * g.delta ** 2}
