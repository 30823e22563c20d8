"""Frozen constants for the inequality checks and the routine that produced them.

The inequalities hold with non-explicit constants.  Each constant below was
fitted as the worst ratio over a calibration corpus (disjoint from the
corpora used for verification) and multiplied by SAFETY.  ``calibrate()``
recomputes the fits; tests compare its output against the frozen table.
"""
import numpy as np

from . import corpus, potential, solver, symfun
from .grid import BallGrid

VERSION = 1
SAFETY = 1.25

# stability: sup|u - v| <= sup|phi - psi| + C ||f - g||_p^{1/m}; n = m = 2, delta = 1, p = 2
STABILITY_P = 2.0
# volume-capacity: V(E) <= C(tau) cap(E)^tau; n = 2, m = 1, chi = alpha = identity
VOLCAP_TAUS = (1.25, 1.5, 1.75)

FROZEN = {
    "version": VERSION,
    "stability_C": 0.10904221797849276,
    "volcap_C": {1.25: 0.25336293828828244, 1.5: 0.3754857344111439, 1.75: 0.8522367405059255},
    "wang_C": {(2, 1): 0.8, (2, 2): 0.8, (3, 2): 1.2316846466706421, (3, 3): 0.8},
}

CAL_STABILITY_CENTERS = [(0.3, 0.0, 0.0, 0.2), (-0.2, 0.3, 0.1, 0.0), (0.0, -0.1, -0.3, 0.3)]
CAL_STABILITY_AMPLITUDES = (0.05, 0.1, 0.2, 0.3)
CAL_VOLCAP_RADII = (0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85)
CAL_SEED = 1


def stability_grid():
    return BallGrid(2, 1.0, 1.0 / 8)


def stability_ratios(grid, centers, amplitudes, p=STABILITY_P):
    base, cases = corpus.stability_cases(grid, 2, centers, amplitudes)
    ru = solver.solve_dirichlet(base)
    out = []
    for spec in cases:
        rv = solver.solve_dirichlet(spec)
        rep = potential.verify_stability(base, ru, spec, rv, p, constant=0.0)
        out.append(rep.sup_diff / rep.density_lp ** (1.0 / 2))
    return np.array(out)


def volcap_estimates(radii, seed, budget=64):
    g = BallGrid(2, 1.0, 1.0 / 8)
    spec = solver.make_problem(g, 1, h=0.0, phi=0.0)
    return spec, potential.capacity_family(corpus.nested_balls(radii), spec, budget=budget, seed=seed)


def wang_samples(n, m, count, seed):
    """Random spectra in Gamma_m, including near-boundary ones."""
    rng = np.random.default_rng(seed)
    lam = rng.standard_normal((4 * count, n)) * rng.exponential(1.0, (4 * count, 1))
    lam = lam[symfun.in_cone(lam, m, certified=True)]
    return lam[:count]


def calibrate(wang_count=20000):
    """Recompute every constant from the calibration corpus (a few seconds)."""
    ratios = stability_ratios(stability_grid(), CAL_STABILITY_CENTERS, CAL_STABILITY_AMPLITUDES)
    spec, est = volcap_estimates(CAL_VOLCAP_RADII, CAL_SEED)
    volcap = {tau: SAFETY * potential.verify_volume_capacity(est, spec, tau).fitted_c for tau in VOLCAP_TAUS}
    wang = {}
    for n, m in FROZEN["wang_C"]:
        r = potential.wang_ratios(wang_samples(n, m, wang_count, seed=n * 10 + m), m)
        wang[(n, m)] = float(np.min(r)) / SAFETY
    return {"version": VERSION, "stability_C": SAFETY * float(np.max(ratios)), "volcap_C": volcap,
            "wang_C": wang}
