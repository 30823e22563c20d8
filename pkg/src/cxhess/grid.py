"""Lattice discretization of a ball in C^n (or of an intersection of balls).

Nodes are the points ``spacing * k`` of the integer lattice in R^{2n}, with
real coordinates ordered (x_1, y_1, ..., x_n, y_n).  A node is interior when
it lies strictly inside every ball of the domain; nodes within 1e-12 of a
sphere count as boundary.  Second differences are taken along a fixed set of
lattice directions; when a stencil arm leaves the domain it is cut at the
sphere crossing (Shortley-Weller), and the crossing becomes a *boundary
point* that carries Dirichlet data.  Boundary points are recorded per
(node, direction, sign), so a lattice node lying on the sphere may appear
several times.
"""
from dataclasses import dataclass
from math import factorial, pi
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .errors import DiscretizationError, DomainError, GeometryError, ResourceError

TIE_TOL = 1e-12
DEFAULT_MAX_NODES = 1_500_000


def ball_volume(dim, radius):
    """Lebesgue volume of a ball in R^dim."""
    k = dim // 2
    if dim % 2 == 0:
        return pi ** k / factorial(k) * radius ** dim
    return 2 ** dim * factorial(k) * pi ** k / factorial(dim) * radius ** dim


def _directions(n):
    """Axis directions, then e_a +- e_b for real axes of different complex coordinates."""
    dim = 2 * n
    dirs = [np.eye(dim, dtype=np.int64)[a] for a in range(dim)]
    pairs = []
    for a in range(dim):
        for b in range(a + 1, dim):
            if a // 2 == b // 2:
                continue
            e = np.zeros(dim, dtype=np.int64)
            e[a], e[b] = 1, 1
            f = e.copy()
            f[b] = -1
            pairs.append((a, b, len(dirs), len(dirs) + 1))
            dirs.extend([e, f])
    return np.array(dirs), pairs


@dataclass
class Ball:
    center: np.ndarray
    radius: float


class Integral(NamedTuple):
    value: float
    empty: bool


class BallGrid:
    """Interior nodes, boundary points and difference operators of a ball domain.

    Parameters
    ----------
    n : complex dimension (1 or 2 at desk scale)
    delta : radius of the primary ball
    spacing : lattice step per real coordinate, at most delta/8
    center : centre of the primary ball (default origin)
    clip : extra balls ``[(center, radius), ...]`` intersected with the primary one
    """

    def __init__(self, n, delta, spacing, center=None, clip=(), max_nodes=DEFAULT_MAX_NODES):
        if n < 1:
            raise DomainError("complex dimension must be positive")
        if delta <= 0 or spacing <= 0:
            raise DomainError("delta and spacing must be positive")
        if spacing > delta / 8 * (1 + 1e-12):
            raise DomainError(f"spacing {spacing:g} coarser than delta/8 = {delta / 8:g}")
        self.n = int(n)
        self.dim = 2 * self.n
        self.delta = float(delta)
        self.spacing = float(spacing)
        c0 = np.zeros(self.dim) if center is None else np.asarray(center, dtype=float)
        if c0.shape != (self.dim,):
            raise DomainError(f"center must have {self.dim} real coordinates")
        self.balls = [Ball(c0, self.delta)] + [Ball(np.asarray(c, dtype=float), float(r)) for c, r in clip]
        smallest = min(b.radius for b in self.balls)
        estimate = ball_volume(self.dim, smallest) / self.spacing ** self.dim
        if estimate > max_nodes:
            raise ResourceError(
                f"about {estimate:.3g} interior nodes requested (n={self.n}, spacing={spacing:g}); "
                f"budget is {max_nodes:g}")
        self.directions, self._pairs = _directions(self.n)
        self._build_nodes()
        self._build_stencils()
        self._build_operators()

    # construction -----------------------------------------------------------------

    def _build_nodes(self):
        h = self.spacing
        lo = np.max([np.ceil((b.center - b.radius) / h - 1e-9) for b in self.balls], axis=0).astype(np.int64)
        hi = np.min([np.floor((b.center + b.radius) / h + 1e-9) for b in self.balls], axis=0).astype(np.int64)
        if np.any(hi < lo):
            raise GeometryError("domain contains no lattice nodes")
        self._box_lo = lo
        self._box_shape = tuple(int(s) for s in hi - lo + 1)
        axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
        keys = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
        inside = np.ones(len(keys), dtype=bool)
        for b in self.balls:
            dist = np.sqrt(np.sum((keys * h - b.center) ** 2, axis=1))
            inside &= dist < b.radius - TIE_TOL
        self.keys = keys[inside]
        self.points = self.keys * h
        self.size = len(self.keys)
        if self.size == 0:
            raise GeometryError("domain contains no interior nodes")
        self._box_index = np.full(self._box_shape, -1, dtype=np.int64)
        self._box_index[tuple((self.keys - lo).T)] = np.arange(self.size)

    def index_of(self, keys):
        """Interior index of lattice keys, -1 where the key is not interior."""
        keys = np.atleast_2d(np.asarray(keys, dtype=np.int64))
        rel = keys - self._box_lo
        ok = np.all((rel >= 0) & (rel < np.array(self._box_shape)), axis=1)
        out = np.full(len(keys), -1, dtype=np.int64)
        out[ok] = self._box_index[tuple(rel[ok].T)]
        return out

    def _crossing(self, p, step):
        """Fraction t in (0, 1] of the step from p at which the domain is left, and which ball."""
        best = np.full(len(p), np.inf)
        src = np.zeros(len(p), dtype=np.int64)
        a = float(step @ step)
        for i, b in enumerate(self.balls):
            d = p - b.center
            bb = d @ step
            cc = np.sum(d * d, axis=1) - b.radius ** 2
            disc = np.maximum(bb * bb - a * cc, 0.0)
            t = (-bb + np.sqrt(disc)) / a
            better = t < best
            best[better] = t[better]
            src[better] = i
        return np.clip(best, 1e-300, 1.0), src

    def _build_stencils(self):
        h = self.spacing
        nd = len(self.directions)
        self.neighbor = np.full((nd, 2, self.size), -1, dtype=np.int64)
        self.bindex = np.full((nd, 2, self.size), -1, dtype=np.int64)
        self.theta = np.ones((nd, 2, self.size))
        bpts, bsrc, bnode, bdir, bsign, btheta = [], [], [], [], [], []
        count = 0
        for d, v in enumerate(self.directions):
            for s, sign in enumerate((1, -1)):
                nb = self.index_of(self.keys + sign * v)
                self.neighbor[d, s] = nb
                out = np.nonzero(nb < 0)[0]
                if len(out) == 0:
                    continue
                step = sign * v * h
                t, src = self._crossing(self.points[out], step.astype(float))
                self.theta[d, s, out] = t
                self.bindex[d, s, out] = count + np.arange(len(out))
                count += len(out)
                bpts.append(self.points[out] + t[:, None] * step)
                bsrc.append(src)
                bnode.append(out)
                bdir.append(np.full(len(out), d))
                bsign.append(np.full(len(out), s))
                btheta.append(t)
        if count == 0:
            self.boundary_points = np.zeros((0, self.dim))
            empty = np.zeros(0, dtype=np.int64)
            self.boundary_source = self.boundary_node = self.boundary_dir = self.boundary_sign = empty
            self.boundary_theta = np.zeros(0)
        else:
            self.boundary_points = np.concatenate(bpts)
            self.boundary_source = np.concatenate(bsrc)
            self.boundary_node = np.concatenate(bnode)
            self.boundary_dir = np.concatenate(bdir)
            self.boundary_sign = np.concatenate(bsign)
            self.boundary_theta = np.concatenate(btheta)
        self.nboundary = count

    def _build_operators(self):
        """Sparse second differences along each direction (unit-speed), split interior/boundary."""
        h = self.spacing
        N, Nb = self.size, self.nboundary
        rows = np.arange(N)
        self.d2_int, self.d2_bdy = [], []
        self.d1_int, self.d1_bdy = [], []
        for d, v in enumerate(self.directions):
            length = h * float(np.sqrt(v @ v))
            lp = self.theta[d, 0] * length
            lm = self.theta[d, 1] * length
            wp = 2.0 / (lp * (lp + lm))
            wm = 2.0 / (lm * (lp + lm))
            w0 = -(wp + wm)
            self.d2_int.append(self._assemble(d, rows, w0, wp, wm, N, Nb, interior=True))
            self.d2_bdy.append(self._assemble(d, rows, w0, wp, wm, N, Nb, interior=False))
            if d < self.dim:
                denom = lp * lm * (lp + lm)
                gp = lm * lm / denom
                gm = -lp * lp / denom
                g0 = -(gp + gm)
                self.d1_int.append(self._assemble(d, rows, g0, gp, gm, N, Nb, interior=True))
                self.d1_bdy.append(self._assemble(d, rows, g0, gp, gm, N, Nb, interior=False))

    def _assemble(self, d, rows, w0, wp, wm, N, Nb, interior):
        r, c, v = [], [], []
        if interior:
            r.append(rows)
            c.append(rows)
            v.append(w0)
        for s, w in ((0, wp), (1, wm)):
            nb = self.neighbor[d, s]
            if interior:
                mask = nb >= 0
                r.append(rows[mask])
                c.append(nb[mask])
            else:
                mask = nb < 0
                r.append(rows[mask])
                c.append(self.bindex[d, s][mask])
            v.append(w[mask])
        shape = (N, N) if interior else (N, Nb)
        return sp.csr_matrix((np.concatenate(v), (np.concatenate(r), np.concatenate(c))), shape=shape)

    # field operations ---------------------------------------------------------------

    def _check(self, u, ub):
        u = np.asarray(u, dtype=float)
        if u.shape != (self.size,):
            raise DomainError(f"field has shape {u.shape}, grid has {self.size} interior nodes")
        if ub is None:
            if self.nboundary:
                raise DiscretizationError("boundary values required to resolve stencils near the sphere")
            ub = np.zeros(0)
        ub = np.asarray(ub, dtype=float)
        if ub.shape != (self.nboundary,):
            raise DomainError(f"boundary values have shape {ub.shape}, grid has {self.nboundary}")
        bad = ~np.isfinite(u)
        if np.any(bad):
            node = int(np.nonzero(bad)[0][0])
            raise DiscretizationError(f"non-finite value at node {node}", node=node)
        if not np.all(np.isfinite(ub)):
            raise DiscretizationError("non-finite boundary value")
        return u, ub

    def second_differences(self, u, ub):
        """Directional second derivatives, shape (len(directions), size)."""
        u, ub = self._check(u, ub)
        return np.stack([a @ u + b @ ub for a, b in zip(self.d2_int, self.d2_bdy)])

    def hessian_terms(self):
        """Complex Hessian entries as linear combinations of direction operators.

        Returns ``{(i, j): (real_terms, imag_terms)}`` for i <= j, each a list of
        (coefficient, direction index).  Uses
        u_{i jbar} = (u_{x_i x_j} + u_{y_i y_j} + i (u_{x_i y_j} - u_{y_i x_j})) / 4
        and u_{ab} = (D_{e_a+e_b} - D_{e_a-e_b}) / 2 for unit-speed D.
        """
        pair_dirs = {(a, b): (p, q) for a, b, p, q in self._pairs}

        def mixed(a, b, coef):
            if a == b:
                return [(coef, a)]
            a, b = min(a, b), max(a, b)
            p, q = pair_dirs[(a, b)]
            return [(coef / 2, p), (-coef / 2, q)]

        terms = {}
        for i in range(self.n):
            for j in range(i, self.n):
                xi, yi, xj, yj = 2 * i, 2 * i + 1, 2 * j, 2 * j + 1
                re = mixed(xi, xj, 0.25) + mixed(yi, yj, 0.25)
                im = [] if i == j else mixed(xi, yj, 0.25) + mixed(yi, xj, -0.25)
                terms[(i, j)] = (re, im)
        return terms

    def complex_hessian(self, u, ub=None):
        """u_{i jbar} = d^2 u / dz_i dzbar_j at every interior node, shape (size, n, n)."""
        dd = self.second_differences(u, ub)
        return self.combine_hessian(dd)

    def combine_hessian(self, dd):
        H = np.zeros((dd.shape[1], self.n, self.n), dtype=complex)
        for (i, j), (re, im) in self.hessian_terms().items():
            val = sum(c * dd[d] for c, d in re) + 1j * sum((c * dd[d] for c, d in im), np.zeros(dd.shape[1]))
            H[:, i, j] = val
            if i != j:
                H[:, j, i] = np.conj(val)
        return H

    def linear_operator(self, lmat):
        """Sparse matrix of w -> tr(L Hess_c w) on interior unknowns, plus its boundary part.

        ``lmat`` has shape (size, n, n); the result pair (A_int, A_bdy)
        satisfies tr(L Hess_c u) = A_int @ u + A_bdy @ ub.
        """
        weights = np.zeros((len(self.directions), self.size))
        for (i, j), (re, im) in self.hessian_terms().items():
            if i == j:
                wr = np.real(lmat[:, i, i])
                wi = None
            else:
                wr = 2.0 * np.real(lmat[:, j, i])
                wi = -2.0 * np.imag(lmat[:, j, i])
            for c, d in re:
                weights[d] += c * wr
            for c, d in im:
                weights[d] += c * wi
        A = sp.csr_matrix((self.size, self.size))
        B = sp.csr_matrix((self.size, self.nboundary))
        for d in range(len(self.directions)):
            if not np.any(weights[d]):
                continue
            W = sp.diags(weights[d])
            A = A + W @ self.d2_int[d]
            B = B + W @ self.d2_bdy[d]
        return A.tocsr(), B.tocsr()

    def gradient(self, u, ub=None):
        """Real gradient (size, 2n), second order, one-sided at the sphere."""
        u, ub = self._check(u, ub)
        return np.stack([a @ u + b @ ub for a, b in zip(self.d1_int, self.d1_bdy)], axis=1)

    def complex_gradient(self, u, ub=None):
        """du/dz_i = (u_x - i u_y) / 2, shape (size, n)."""
        g = self.gradient(u, ub)
        return 0.5 * (g[:, 0::2] - 1j * g[:, 1::2])

    # geometry -----------------------------------------------------------------------

    def defining_function(self, points=None):
        """r = |z - c|^2 - delta^2 for the primary ball."""
        pts = self.points if points is None else np.asarray(points, dtype=float)
        c = self.balls[0].center
        return np.sum((pts - c) ** 2, axis=-1) - self.delta ** 2

    def boundary_defining_function(self):
        return self.defining_function(self.boundary_points)

    def local_graph_coefficients(self, point):
        """Hermitian a_{jk} of r = -x_n + sum a_{jk} z_j zbar_k + O(|z|^3) at a sphere point.

        Coordinates are centred at ``point`` and rotated unitarily so the
        inner normal is the positive x_n axis; r is normalized by |grad r|.
        Returns (a, linear) where ``linear`` is d r / d x_n at the point
        (-1 for a correctly oriented chart).
        """
        P = np.asarray(point, dtype=float)
        c = self.balls[0].center
        rel = P - c
        if abs(np.linalg.norm(rel) - self.delta) > 1e-9 * max(1.0, self.delta):
            raise GeometryError("point is not on the boundary sphere")
        zrel = rel[0::2] + 1j * rel[1::2]
        nu = -zrel / np.linalg.norm(zrel)
        # unitary U with last column = inner normal direction
        basis = np.eye(self.n, dtype=complex)
        cols = [b for b in basis]
        M = np.column_stack([nu] + cols)
        q, _ = np.linalg.qr(M)
        q = q[:, : self.n]
        q[:, 0] *= np.vdot(q[:, 0], nu) / abs(np.vdot(q[:, 0], nu))
        U = np.roll(q, -1, axis=1)
        grad_norm = 2.0 * self.delta
        hess = np.eye(self.n, dtype=complex) / grad_norm  # d d-bar of |z|^2 is the identity
        a = U.conj().T @ hess @ U
        # r(P + t nu) grows like -2 delta t, i.e. -1 after normalization
        dr = 2.0 * float(np.real(np.vdot(zrel, nu))) / grad_norm
        return a, dr

    def volume_element(self, alpha=None):
        w = np.full(self.size, self.spacing ** self.dim)
        if alpha is not None:
            w = w * np.real(np.linalg.det(alpha))
        return w

    def integrate(self, values, alpha=None, region=None):
        """Midpoint sum of values * det(alpha) * spacing^{2n} over a node subset."""
        vals = np.broadcast_to(np.asarray(values, dtype=float), (self.size,))
        w = self.volume_element(alpha)
        mask = np.ones(self.size, dtype=bool) if region is None else self._region(region)
        if not np.any(mask):
            return Integral(0.0, True)
        return Integral(float(np.sum(vals[mask] * w[mask])), False)

    def _region(self, region):
        if callable(region):
            return np.asarray(region(self.points), dtype=bool)
        mask = np.asarray(region)
        if mask.dtype != bool or mask.shape != (self.size,):
            raise DomainError("region must be a node predicate or boolean mask")
        return mask

    def classify(self, points):
        """0 interior, 1 boundary, 2 exterior for arbitrary points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(len(pts), dtype=np.int64)
        for b in self.balls:
            dist = np.sqrt(np.sum((pts - b.center) ** 2, axis=1))
            out = np.maximum(out, np.where(dist > b.radius + TIE_TOL, 2,
                                           np.where(dist >= b.radius - TIE_TOL, 1, 0)))
        return out

    def complex_points(self, points=None):
        pts = self.points if points is None else points
        return pts[..., 0::2] + 1j * pts[..., 1::2]

    # sub-domains ----------------------------------------------------------------------

    def subgrid(self, center, radius):
        """The lattice domain (this domain) intersected with ball(center, radius)."""
        extra = [(b.center, b.radius) for b in self.balls[1:]] + [(center, radius)]
        sub = BallGrid(self.n, self.delta, self.spacing, center=self.balls[0].center, clip=extra,
                       max_nodes=np.inf)
        sub.parent_index = self.index_of(sub.keys)
        if np.any(sub.parent_index < 0):
            raise GeometryError("sub-domain node missing from parent grid")
        return sub

    def boundary_values_from_parent(self, sub, u, ub):
        """Dirichlet data for ``sub`` taken from a field (u, ub) on this grid.

        Crossings of this grid's spheres reuse its boundary values; crossings of
        the extra ball interpolate linearly along the stencil arm.
        """
        nparent = len(self.balls)
        node = sub.boundary_node
        pidx = sub.parent_index[node]
        d, s = sub.boundary_dir, sub.boundary_sign
        out = np.empty(sub.nboundary)
        own = sub.boundary_source < nparent
        pb = self.bindex[d, s, pidx]
        if np.any(own & (pb < 0)):
            raise GeometryError("sub-domain crossing has no matching parent boundary point")
        out[own] = ub[pb[own]]
        other = ~own
        p_other = pidx[other]
        d_o, s_o = d[other], s[other]
        nb = self.neighbor[d_o, s_o, p_other]
        far_theta = np.where(nb >= 0, 1.0, self.theta[d_o, s_o, p_other])
        far_val = np.where(nb >= 0, u[np.maximum(nb, 0)], ub[np.maximum(self.bindex[d_o, s_o, p_other], 0)])
        u0 = u[p_other]
        out[other] = u0 + (sub.boundary_theta[other] / far_theta) * (far_val - u0)
        return out
