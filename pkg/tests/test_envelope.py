import numpy as np
import pytest

from cxhess import envelope, solver
from cxhess.errors import DomainError, GeometryError, NonConvergenceError
from cxhess.grid import BallGrid


@pytest.fixture(scope="module")
def grid():
    return BallGrid(1, 1.0, 1.0 / 32)


@pytest.fixture(scope="module")
def spec(grid):
    return solver.make_problem(grid, 1, h="2 + 0.5*x1", phi="0.1*x1", subsolution="3*(r2 - 1) + 0.1*x1")


def test_cover_geometry(grid):
    cover = envelope.make_cover(grid)
    assert len(cover) == 9
    assert cover.overlap_fraction >= 0.3
    centers = np.array([c for c, _ in cover.balls])
    radius = cover.balls[0][1]
    dist = np.min(np.linalg.norm(grid.points[:, None] - centers[None], axis=2), axis=1)
    assert np.all(dist < radius)
    colors = cover.colors()
    for i in range(len(cover)):
        for j in range(i):
            if colors[i] == colors[j]:
                assert np.linalg.norm(centers[i] - centers[j]) >= 2 * radius
    assert sorted(cover.order()) == list(range(len(cover)))
    with pytest.raises(DomainError):
        envelope.make_cover(grid, overlap=1.5)
    with pytest.raises(GeometryError):
        envelope.make_cover(grid, max_radius=1e-3)


def test_single_lift_raises_and_solves_locally(grid, spec):
    state = envelope.EnvelopeState(current=spec.subsolution.copy(), boundary=spec.boundary.copy())
    ball = (np.array([0.2, 0.1]), 0.4)
    new = envelope.lift(state, ball, spec)
    assert np.all(new.current >= state.current)
    inside = np.linalg.norm(grid.points - ball[0], axis=1) < 0.4
    assert np.all(new.current[~inside] == state.current[~inside])
    assert new.max_update > 0


def test_sweep_matches_direct_and_is_monotone(grid, spec):
    state = envelope.perron_sweep(spec, envelope.make_cover(grid), keep_iterates=True)
    direct = solver.solve_dirichlet(spec).solution
    tol = max(10 * envelope.envelope_tol(grid), 10 * grid.spacing ** 2)
    assert np.max(np.abs(state.current - direct)) <= tol
    for a, b in zip(state.iterates, state.iterates[1:]):
        assert np.all(b >= a - 1e-12)
    assert state.history[-1] <= envelope.envelope_tol(grid)


def test_sweep_errors(grid, spec):
    with pytest.raises(DomainError):
        envelope.perron_sweep(spec.with_(subsolution=None), envelope.make_cover(grid))
    with pytest.raises(NonConvergenceError):
        envelope.perron_sweep(spec, envelope.make_cover(grid), max_sweeps=1)


@pytest.fixture(scope="module")
def solved(grid):
    s = solver.make_problem(grid, 1, h="1 + r2", phi="0.1*x1")
    return s, solver.solve_dirichlet(s)


def test_penalized_family(grid, solved):
    s, rep = solved
    fam = envelope.penalized_family(s, (rep.solution, rep.boundary), (1e-1, 1e-2, 1e-3))
    ws = [r.solution for r in fam]
    gaps = [np.max(np.abs(w - rep.solution)) for w in ws]
    for w in ws:
        assert np.all(w <= rep.solution + 10 * grid.spacing ** 2)
    for a, b in zip(ws, ws[1:]):
        assert np.all(b >= a - 1e-12)
    assert all(g1 <= 0.5 * g0 for g0, g1 in zip(gaps, gaps[1:]))
    assert fam[-1].diagnostics["eps"] == 1e-3


def test_penalized_callable_target_and_eps_check(grid, solved):
    s, _ = solved
    h = lambda p: 0.5 * (np.sum(p ** 2, axis=1) - 1.0)
    rep = envelope.penalized_solve(s, h, 1e-2)
    assert rep.diagnostics["max_excess"] <= 10 * grid.spacing ** 2
    with pytest.raises(DomainError):
        envelope.penalized_solve(s, h, 0.0)


def test_sup_convolution():
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1, 1, (400, 2))
    vals = np.sin(3 * pts[:, 0]) + pts[:, 1]
    big = envelope.sup_convolution(pts, vals, pts, 0.1)
    small = envelope.sup_convolution(pts, vals, pts, 0.01)
    assert np.all(big >= vals) and np.all(small >= vals)
    assert np.all(big >= small - 1e-14)


def test_approximate_from_above(grid, solved):
    s, rep = solved
    # a rough subsolution: the solution with a kink added where it stays below
    rough = rep.solution - 0.05 * np.abs(grid.points[:, 0]) * (1 - np.sum(grid.points ** 2, 1))
    fields, consts = envelope.approximate_from_above(s, rough, levels=3)
    assert len(fields) == 3 and all(c >= 0 for c in consts)
    for f in fields:
        assert np.all(f >= rough - 1e-12)
    for a, b in zip(fields, fields[1:]):
        assert np.all(b <= a + 1e-12)


def test_modulus_of_continuity(grid):
    u = 2.0 * grid.points[:, 0]
    mod = envelope.modulus_of_continuity(grid, u)
    steps = sorted(mod)
    assert mod[steps[0]] == pytest.approx(2 * grid.spacing)
    assert mod[steps[-1]] == pytest.approx(8 * grid.spacing)
