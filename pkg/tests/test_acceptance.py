"""Acceptance criteria, one test each; every test records a PASS/FAIL line."""
from itertools import combinations
import time

import numpy as np
import pytest
import scipy.linalg

from cxhess import calibration, corpus, envelope, mollify, pencil, potential, solver, symfun
from cxhess.errors import ResourceError
from cxhess.grid import BallGrid


def cone_samples(rng, count, n, m):
    out = []
    while sum(len(o) for o in out) < count:
        lam = rng.standard_normal((4 * count, n)) * rng.exponential(1.0, (4 * count, 1))
        lam = lam + rng.uniform(0, 1, (4 * count, 1))
        out.append(lam[symfun.in_cone(lam, m, certified=True)])
    return np.concatenate(out)[:count]


@pytest.fixture(scope="module")
def grid2():
    return BallGrid(2, 1.0, 1.0 / 8)


def test_01_symmetric_oracle(criterion):
    rng = np.random.default_rng(101)
    total = 10_000
    worst = 0.0
    elapsed = 0.0
    for n in range(1, 9):
        lam = rng.standard_normal((total // 8, n)) * rng.exponential(2.0, (total // 8, 1))
        for k in range(n + 1):
            t0 = time.perf_counter()
            got = symfun.elementary_symmetric(lam, k)
            elapsed += time.perf_counter() - t0
            terms = [np.prod(lam[:, list(I)], axis=1) for I in combinations(range(n), k)]
            ref = np.sum(terms, axis=0)
            scale = np.sum(np.abs(terms), axis=0)
            worst = max(worst, float(np.max(np.abs(got - ref) / np.maximum(scale, 1e-300))))
    ok = worst <= 1e-10 and elapsed <= 5.0
    criterion(1, ok, f"max relative error {worst:.2e} over {total} spectra, {elapsed:.2f} s")
    assert ok


def test_02_garding_and_euler(criterion):
    rng = np.random.default_rng(102)
    t0 = time.perf_counter()
    pairs = [(n, m) for n in range(1, 6) for m in range(1, n + 1)]
    per = 100_000 // len(pairs) + 1
    worst_g, worst_e, count = 0.0, 0.0, 0
    for n, m in pairs:
        a = cone_samples(rng, per, n, m)
        b = cone_samples(rng, per, n, m)
        lhs, rhs = symfun.garding_pairing(a, b, m)
        worst_g = max(worst_g, float(np.max((rhs - lhs) / np.abs(lhs))))
        F, f = symfun.f_and_partials(a, m, f_floor=0.0)
        worst_e = max(worst_e, float(np.nanmax(np.abs(np.sum(f * a, axis=1) - F) / np.maximum(F, 1.0))))
        count += len(a)
    elapsed = time.perf_counter() - t0
    ok = worst_g <= 1e-12 and worst_e <= 1e-10 and elapsed <= 30
    criterion(2, ok, f"{count} samples, worst Garding deficit {worst_g:.2e}, Euler error {worst_e:.2e}, "
                     f"{elapsed:.1f} s")
    assert ok


def test_03_pencil_oracle(criterion):
    rng = np.random.default_rng(103)
    worst = 0.0
    for k in range(1000):
        n = 1 + k % 4
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        alpha = a @ a.conj().T + 0.1 * np.eye(n)
        b = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        g = b + b.conj().T
        got = pencil.relative_eigen(g, alpha).spectrum
        c = scipy.linalg.cholesky(alpha, lower=True)
        w = scipy.linalg.solve_triangular(c, scipy.linalg.solve_triangular(c, g, lower=True).conj().T,
                                          lower=True)
        ref = np.linalg.eigvalsh(0.5 * (w + w.conj().T))
        worst = max(worst, float(np.max(np.abs(got - ref)) / max(1.0, np.max(np.abs(ref)))))
    ok = worst <= 1e-9
    criterion(3, ok, f"max relative eigenvalue error {worst:.2e} over 1000 pairs")
    assert ok


def test_04_manufactured_convergence(criterion):
    c = 0.5
    t0 = time.perf_counter()
    errors = []
    try:
        for k in (16, 32, 64):
            spec, exact = corpus.quadratic_problem(2, 2, c, spacing=1.0 / k)
            rep = solver.solve_dirichlet(spec)
            errors.append(float(np.max(np.abs(rep.solution - exact))))
    except ResourceError as exc:
        criterion(4, False, f"errors {errors} before the grid at spacing delta/{k} was refused: {exc}")
        raise
    elapsed = time.perf_counter() - t0
    orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    ok = np.all(orders >= 1.8) and errors[-1] <= 1e-3 * abs(c) and elapsed <= 60
    criterion(4, ok, f"errors {errors}, orders {orders}, {elapsed:.1f} s")
    assert ok


def test_05_linear_reduction(criterion, grid2):
    diffs = []
    for spec in corpus.linear_corpus(grid2):
        a = solver.solve_dirichlet(spec).solution
        b = solver.solve_linear(spec).solution
        diffs.append(float(np.max(np.abs(a - b))))
    ok = max(diffs) <= 1e-8
    criterion(5, ok, f"max |u_newton - u_linear| = {max(diffs):.2e} on {len(diffs)} problems")
    assert ok


def test_06_comparison(criterion, grid2):
    worst = np.inf
    pairs = corpus.comparison_pairs(grid2, 2)
    for su, sv in pairs:
        assert np.all(su.rhs <= sv.rhs) and np.all(su.boundary >= sv.boundary - 1e-15)
        u = solver.solve_dirichlet(su).solution
        v = solver.solve_dirichlet(sv).solution
        worst = min(worst, float(np.min(u - v)))
    tol = -10 * grid2.spacing ** 2
    ok = worst >= tol
    criterion(6, ok, f"min(u - v) = {worst:.3e} over {len(pairs)} pairs (bound {tol:.3e})")
    assert ok


VERIFY_CENTERS = [(0.0, 0.3, -0.2, 0.1), (0.25, -0.25, 0.0, -0.2)]
VERIFY_AMPLITUDES = (0.08, 0.15, 0.25)


def test_07_stability(criterion):
    g = calibration.stability_grid()
    C = calibration.FROZEN["stability_C"]
    p = calibration.STABILITY_P
    base, cases = corpus.stability_cases(g, 2, VERIFY_CENTERS, VERIFY_AMPLITUDES)
    ru = solver.solve_dirichlet(base)
    worst = -np.inf
    for spec in cases:
        rep = potential.verify_stability(base, ru, spec, solver.solve_dirichlet(spec), p, C)
        worst = max(worst, rep.residual)
    shifted = solver.make_problem(g, 2, h="1 + 0.5*r2", phi=0.25)
    rs = solver.solve_dirichlet(shifted)
    shift = potential.verify_stability(base, ru, shifted, rs, p, C)
    shift_err = abs(shift.sup_diff - 0.25) + float(np.max(np.abs(rs.solution - ru.solution - 0.25)))
    ok = worst <= potential.STABILITY_SLACK and shift_err <= 1e-9 and shift.ok
    criterion(7, ok, f"worst sup|u-v| - bound = {worst:.3e} over {len(cases)} pairs, C = {C:.4g}; "
                     f"constant shift error {shift_err:.1e}")
    assert ok


def test_08_mixed_inequality(criterion, grid2):
    worst = np.inf
    for su, sv in corpus.mixed_pairs(grid2):
        rep = potential.verify_mixed_inequality(solver.solve_dirichlet(su), su, solver.solve_dirichlet(sv), sv)
        worst = min(worst, float(np.min(rep.margins)))
    tol = -10 * grid2.spacing ** 2
    ok = worst >= tol
    criterion(8, ok, f"min margin {worst:.3e} over 5 pairs, k = 0..2 (bound {tol:.3e})")
    assert ok


def test_09_envelope(criterion):
    g = BallGrid(1, 1.0, 1.0 / 64)
    cover = envelope.make_cover(g)
    problems = [("2 + 0.5*x1", "0.1*x1", "3*(r2 - 1) + 0.1*x1"), ("1 + r2", "0", "3*(r2 - 1)"),
                ("exp(0.5*y1)", "0.2*x1*y1", "4*(r2 - 1) + 0.2*x1*y1")]
    tol = max(10 * envelope.envelope_tol(g), 10 * g.spacing ** 2)
    gap, mono = 0.0, np.inf
    for h, phi, sub in problems:
        spec = solver.make_problem(g, 1, h=h, phi=phi, subsolution=sub)
        state = envelope.perron_sweep(spec, cover, keep_iterates=True)
        gap = max(gap, float(np.max(np.abs(state.current - solver.solve_dirichlet(spec).solution))))
        mono = min(mono, min(float(np.min(b - a)) for a, b in zip(state.iterates, state.iterates[1:])))
    ok = len(cover) == 9 and gap <= tol and mono >= 0
    criterion(9, ok, f"{len(cover)} balls, max gap {gap:.2e} (tolerance {tol:.2e}), "
                     f"min sweep increment {mono:.1e}")
    assert ok


def test_10_penalization(criterion):
    g = BallGrid(1, 1.0, 1.0 / 32)
    spec = solver.make_problem(g, 1, h="1 + r2", phi="0.1*x1")
    rep = solver.solve_dirichlet(spec)
    fam = envelope.penalized_family(spec, (rep.solution, rep.boundary), (1e-1, 1e-2, 1e-3))
    ws = [r.solution for r in fam]
    excess = max(float(np.max(w - rep.solution)) for w in ws)
    mono = min(float(np.min(b - a)) for a, b in zip(ws, ws[1:]))
    gaps = [float(np.max(np.abs(w - rep.solution))) for w in ws]
    ok = excess <= 10 * g.spacing ** 2 and mono >= 0 and all(b <= 0.5 * a for a, b in zip(gaps, gaps[1:]))
    criterion(10, ok, f"max w - h {excess:.2e}, min increment {mono:.2e}, gaps {['%.1e' % x for x in gaps]}")
    assert ok


def test_11_barrier(criterion, grid2):
    spec, _ = corpus.quadratic_problem(2, 2, -0.5)
    red, _ = solver.reduce_to_zero_boundary(spec)
    rep = solver.solve_dirichlet(red)
    sweep = solver.barrier_sweep(red, rep)
    good = [(b.mu, b.tau) for b in sweep if b.ok]
    ok = bool(good)
    criterion(11, ok, f"{len(good)} of {len(sweep)} (mu, tau) pairs satisfy the barrier bounds, e.g. {good[:2]}")
    assert ok


def test_12_mollifier(criterion):
    t0 = time.perf_counter()
    setup = mollify.MollifySetup(dim=3, radius=1.0, delta=0.2, delta0=0.5)
    rng = np.random.default_rng(112)
    one = lambda p: np.ones(len(p))
    mass_err = max(abs(mollify.mollify_point(one, y, h, setup) - 1.0)
                   for y in rng.uniform(-0.3, 0.3, (4, 3)) for h in (setup.h_delta, 3 * setup.h_delta))
    u = lambda p: np.sum(p ** 2, axis=-1)
    levels = [setup.h_delta * k for k in (1, 2, 4, 8)]
    fam = mollify.mollify(u, levels, setup, step=0.15)
    mono = max(float(np.max(b - a)) for a, b in zip(fam.outputs, fam.outputs[1:]))
    errs = fam.l1_errors()
    l1_ok = all(b < a for a, b in zip(errs, errs[1:]))
    inputs = [u, lambda p: np.exp(p[..., 0] - p[..., 2]), lambda p: np.sum(p ** 2, axis=-1) ** 2,
              lambda p: 1.0 / np.linalg.norm(p - np.array([2.0, 0.0, 0.0]), axis=-1)]
    sub_worst = -np.inf
    for k in range(1000):
        a = rng.uniform(-1, 1, 3)
        a *= rng.uniform(0, 0.8) / np.linalg.norm(a)
        r = rng.uniform(0.01, 0.99) * (0.95 - np.linalg.norm(a))
        ua, M = mollify.sub_mean_value(inputs[k % 4], a, r, setup)
        sub_worst = max(sub_worst, (ua - M) / max(1.0, abs(ua)))
    elapsed = time.perf_counter() - t0
    ok = mass_err <= 1e-6 and mono <= 1e-9 and l1_ok and sub_worst <= 1e-10 and elapsed <= 120
    criterion(12, ok, f"mass error {mass_err:.1e}, max increase in h {mono:.1e}, L1 errors "
                      f"{['%.2e' % e for e in errs]}, worst u(a) - M {sub_worst:.1e}, {elapsed:.0f} s")
    assert ok


def test_13_capacity(criterion):
    g = BallGrid(2, 1.0, 1.0 / 8)
    spec = solver.make_problem(g, 1, h=0.0, phi=0.0)
    radii = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]
    est = potential.capacity_family(corpus.nested_balls(radii), spec, budget=64, seed=0)
    caps = [e.cap_lower for e in est]
    monotone = all(b >= a for a, b in zip(caps, caps[1:]))
    # exact on shared witnesses: each admissible candidate's mass grows along the nested sets
    w = g.volume_element(spec.alpha)
    masks = [np.linalg.norm(g.points, axis=1) <= r for r in radii]
    shared = True
    for cand in potential.candidate_family(spec, 64, 0):
        dens = potential.hessian_density(spec, cand)
        if dens is not None:
            masses = [float(np.sum((dens * w)[mk])) for mk in masks]
            shared &= all(b >= a for a, b in zip(masses, masses[1:]))
    results = {}
    for tau, c in calibration.FROZEN["volcap_C"].items():
        results[tau] = potential.verify_volume_capacity(est, spec, tau, c).ok
    ok = monotone and shared and all(results.values())
    criterion(13, ok, f"monotone={monotone}, frozen-C bound holds for tau {results}")
    assert ok
