"""Reference problems with known structure, shared by calibration, tests and the CLI."""
from math import comb

import numpy as np

from . import solver
from .grid import BallGrid


def quadratic_problem(n=2, m=2, c=1.0, delta=1.0, spacing=None):
    """alpha = chi = identity, phi = 0, h = binom(n,m)^{1/m} (1 + c); exact solution c(|z|^2 - delta^2).

    For m = n this is h = 1 + c.
    """
    g = BallGrid(n, delta, spacing or delta / 8)
    spec = solver.make_problem(g, m, h=comb(n, m) ** (1.0 / m) * (1.0 + c), phi=0.0)
    return spec, c * g.defining_function()


def bump(center, width):
    center = np.asarray(center, dtype=float)

    def f(pts):
        q = np.clip(1.0 - np.sum((pts - center) ** 2, axis=-1) / width ** 2, 0.0, 1.0)
        return q ** 3

    return f


def conformal_metric(weight):
    """alpha = exp(weight(z)) * identity (locally conformally flat)."""

    def alpha(pts):
        n = pts.shape[-1] // 2
        return np.exp(weight(pts))[:, None, None] * np.eye(n)

    return alpha


def linear_corpus(grid):
    """Five m = 1 problems on one grid (varied metrics, chi, data)."""
    x1 = lambda p: p[:, 0]
    hermit = np.array([[1.0, 0.2 + 0.1j], [0.2 - 0.1j, 1.5]]) if grid.n == 2 else np.array([[1.3]])
    return [
        solver.make_problem(grid, 1, h="1 + r2", phi=0.0),
        solver.make_problem(grid, 1, h="2 + 0.5*x1", phi="0.2*x1 - 0.1*y1", chi=2.0),
        solver.make_problem(grid, 1, h=1.5, phi="r2", alpha=hermit),
        solver.make_problem(grid, 1, h="1 + 0.3*sin(3*x1)", phi=0.0,
                            alpha=conformal_metric(lambda p: 0.2 * x1(p))),
        solver.make_problem(grid, 1, h="exp(0.5*y1)", phi="0.1*x1*x1", chi=hermit),
    ]


def comparison_pairs(grid, m):
    """Ten (spec_u, spec_v) with h_u <= h_v and phi_u >= phi_v."""
    base = [("1 + r2", "0"), ("1.5", "0.1*x1"), ("2 + 0.5*x1", "0.05*r2"), ("1 + 0.2*sin(4*y1)", "0"),
            ("1.2 + 0.3*r2", "-0.1*y1")]
    out = []
    for k, (h, phi) in enumerate(base):
        hu = h
        for variant in range(2):
            if variant == 0:
                hv, phiv = f"({h}) + 0.3", phi
            else:
                hv, phiv = f"({h}) * 1.5", f"({phi}) - 0.2"
            out.append((solver.make_problem(grid, m, h=hu, phi=phi),
                        solver.make_problem(grid, m, h=hv, phi=phiv)))
    return out


def stability_cases(grid, m, centers, amplitudes, p_base="1 + 0.5*r2"):
    """(base spec, [perturbed specs]) with h^m perturbed by amplitude * bump at each centre."""
    base = solver.make_problem(grid, m, h=p_base, phi=0.0)
    dens = base.rhs ** m
    cases = []
    for c in centers:
        b = bump(c, 0.5 * grid.delta)(grid.points)
        for a in amplitudes:
            cases.append(solver.make_problem(grid, m, f=dens + a * b, phi=0.0))
    return base, cases


def mixed_pairs(grid):
    """Five n = m = 2 pairs with different densities and data."""
    pairs = [("1 + r2", "2 - 0.5*x1"), ("1.5", "1 + 0.3*sin(3*y2)"), ("1 + 0.5*x1*x1", "1.2"),
             ("2 + 0.3*x2", "1 + r2"), ("1 + 0.2*cos(2*x1 + y2)", "1.8 - 0.4*r2")]
    return [(solver.make_problem(grid, 2, h=hu, phi=0.0, chi=1.0),
             solver.make_problem(grid, 2, h=hv, phi="0.1*x1*y2", chi=1.0)) for hu, hv in pairs]


def nested_balls(radii, center=None):
    out = []
    for s in radii:
        def pred(pts, s=s):
            c = 0 if center is None else center
            return np.linalg.norm(pts - c, axis=-1) <= s
        out.append((f"B(s={s:g})", pred))
    return out
