"""Pipelines behind the CLI subcommands; each returns True when all checks pass."""
import os

import numpy as np

from . import calibration, corpus, envelope, mollify, potential, problem, solver
from .errors import DomainError


def run(args, threads=None):
    return {"solve": cmd_solve, "envelope": cmd_envelope, "verify": cmd_verify,
            "mollify": cmd_mollify, "cap": cmd_cap}[args.command](args, threads)


def _summary(out, lines):
    with open(os.path.join(out, "summary.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print("\n".join(lines))


def _solve(spec, opts, steps=0):
    if steps:
        return solver.continuity_path(spec, steps, opts)
    return solver.solve_dirichlet(spec, opts)


def cmd_solve(args, threads):
    doc, spec, opts = problem.load_problem(args.problem)
    steps = args.continuation if args.continuation is not None else doc.get("options", {}).get(
        "continuation_steps", 0)
    rep = _solve(spec, opts, steps)
    out = args.out
    report = rep.to_dict()
    report["threads"] = threads
    report["metric"] = solver.metric_diagnostics(spec)
    problem.write_json(os.path.join(out, "report.json"), report)
    problem.write_field(os.path.join(out, "solution.csv"), spec.grid, rep.solution, rep.boundary)
    _summary(out, [f"solve: {len(rep.residual_history) - 1} Newton steps, residual "
                   f"{rep.final_residual:.3e}, cone margin {rep.cone_margin:.3e}, "
                   f"{rep.wall_time:.2f} s"])
    return True


def cmd_envelope(args, threads):
    doc, spec, opts = problem.load_problem(args.problem)
    if spec.subsolution is None:
        raise DomainError("envelope needs a 'subsolution' in the problem file")
    cover = envelope.make_cover(spec.grid, args.per_axis, args.overlap)
    state = envelope.perron_sweep(spec, cover, args.max_sweeps, opts=opts)
    direct = solver.solve_dirichlet(spec, opts)
    out = args.out
    gap = float(np.max(np.abs(state.current - direct.solution)))
    tol = max(10 * envelope.envelope_tol(spec.grid), 10 * spec.grid.spacing ** 2)
    problem.write_table(os.path.join(out, "sweeps.csv"), ["sweep", "max_update"],
                        [(k + 1, float(v)) for k, v in enumerate(state.history)])
    problem.write_field(os.path.join(out, "envelope.csv"), spec.grid, state.current, state.boundary)
    problem.write_json(os.path.join(out, "report.json"), {
        "balls": len(cover), "overlap_fraction": cover.overlap_fraction, "sweeps": state.sweep_count,
        "max_update": state.max_update, "direct_gap": gap, "tolerance": tol, "pass": gap <= tol,
        "modulus_of_continuity": envelope.modulus_of_continuity(spec.grid, state.current),
        "threads": threads})
    _summary(out, [f"envelope: {state.sweep_count} sweeps over {len(cover)} balls, "
                   f"gap to direct solve {gap:.3e} (tolerance {tol:.3e})"])
    return gap <= tol


def _pair(doc, spec, args):
    other = problem.pair_document(doc)
    spec_v, _ = problem.build_problem(other, os.path.dirname(os.path.abspath(args.problem)),
                                      grid=spec.grid)
    return spec_v


def _reduced(spec, opts):
    lam0 = solver.spectra(spec, np.zeros(spec.grid.size), np.zeros(spec.grid.nboundary))[0]
    zero_ok = np.max(np.abs(spec.boundary), initial=0.0) <= 1e-12 and np.all(
        solver.node_values(lam0, spec.m) >= spec.rhs - 1e-9)
    if zero_ok:
        return spec
    return solver.reduce_to_zero_boundary(spec)[0]


def cmd_verify(args, threads):
    doc, spec, opts = problem.load_problem(args.problem)
    suites = [s for s in ("stability", "mixed", "capacity", "barrier", "c0") if getattr(args, s)]
    suites = suites or ["c0", "barrier"] + (["mixed", "stability"] if "pair" in doc else []) + ["capacity"]
    out = args.out
    results = {}
    lines = []
    for suite in suites:
        res = VERIFY[suite](doc, spec, opts, args, out)
        results[suite] = res
        lines.append(f"{suite}: {'PASS' if res['pass'] else 'FAIL'}")
    ok = all(r["pass"] for r in results.values())
    problem.write_json(os.path.join(out, "verify.json"), {"pass": ok, "suites": results,
                                                          "threads": threads})
    _summary(out, lines)
    return ok


def _verify_c0(doc, spec, opts, args, out):
    red = _reduced(spec, opts)
    rep = solver.solve_dirichlet(red, opts)
    chk = solver.check_c0_bounds(red, rep, opts)
    return {"pass": chk.lower_ok and chk.upper_ok, "lower_ok": chk.lower_ok, "upper_ok": chk.upper_ok,
            "lower_margin": chk.lower_margin, "upper_margin": chk.upper_margin, "C0": chk.c0,
            "tol": chk.tol}


def _verify_barrier(doc, spec, opts, args, out):
    red = _reduced(spec, opts)
    rep = solver.solve_dirichlet(red, opts)
    sweep = solver.barrier_sweep(red, rep)
    problem.write_table(os.path.join(out, "barrier.csv"), ["mu", "tau", "nodes", "max_excess", "min_b", "ok"],
                        [(b.mu, b.tau, b.nodes, b.max_excess, b.min_b, int(b.ok)) for b in sweep])
    good = [b for b in sweep if b.ok]
    return {"pass": bool(good), "accepted": [[b.mu, b.tau] for b in good], "tested": len(sweep)}


def _verify_mixed(doc, spec, opts, args, out):
    spec_v = _pair(doc, spec, args)
    ru = solver.solve_dirichlet(spec, opts)
    rv = solver.solve_dirichlet(spec_v, opts)
    rep = potential.verify_mixed_inequality(ru, spec, rv, spec_v)
    m = spec.m
    rows = [[i] + [float(rep.margins[k, i]) for k in range(m + 1)] for i in range(spec.grid.size)]
    problem.write_table(os.path.join(out, "mixed_margins.csv"), ["node"] + [f"k={k}" for k in range(m + 1)],
                        rows)
    return {"pass": rep.ok, "min_margin": rep.min_margin, "tol": rep.tol, "fallback_nodes": rep.fallback_nodes}


def _verify_stability(doc, spec, opts, args, out):
    spec_v = _pair(doc, spec, args)
    ru = solver.solve_dirichlet(spec, opts)
    rv = solver.solve_dirichlet(spec_v, opts)
    p = float(doc.get("options", {}).get("p", calibration.STABILITY_P))
    C = calibration.FROZEN["stability_C"]
    rep = potential.verify_stability(spec, ru, spec_v, rv, p, C)
    return {"pass": rep.ok, "sup_diff": rep.sup_diff, "bound": rep.bound, "boundary_diff": rep.boundary_diff,
            "density_lp": rep.density_lp, "l1_diff": rep.l1_diff, "p": p, "C": C}


def _verify_capacity(doc, spec, opts, args, out):
    radii = doc.get("options", {}).get("radii", [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8])
    seed = int(doc.get("options", {}).get("seed", 0))
    return _capacity(spec, radii, 64, seed, None, out)


def _capacity(spec, radii, budget, seed, tau, out):
    g = spec.grid
    sets = corpus.nested_balls([r * g.delta for r in radii], g.balls[0].center)
    est = potential.capacity_family(sets, spec, budget=budget, seed=seed)
    caps = [e.cap_lower for e in est]
    monotone = all(b >= a for a, b in zip(caps, caps[1:]))
    n, m = spec.n, spec.m
    if tau is None:
        top = n / (n - m) if m < n else np.inf
        tau = 1.5 if top > 1.5 else 0.5 * (1.0 + top)
    frozen = calibration.FROZEN["volcap_C"].get(tau) if (n, m) == (2, 1) else None
    ratios = [e.cap_m_lower / e.cap_lower for e in est if e.cap_lower > 0]
    res = {"monotone": monotone, "tau": tau, "frozen_C": frozen,
           "equivalence_ratio": [min(ratios), max(ratios)] if ratios else None}
    if all(c > 0 for c in caps):
        vc = potential.verify_volume_capacity(est, spec, tau, frozen)
        res.update(fitted_C=vc.fitted_c, volcap_ok=vc.ok, vacuous=vc.vacuous)
    else:
        res.update(fitted_C=None, volcap_ok=False, vacuous=False)
    problem.write_table(os.path.join(out, "capacity.csv"),
                        ["set", "radius", "volume", "cap_lower", "cap_m_lower", "witness"],
                        [(e.set_id, float(r * g.delta), e.volume, e.cap_lower, e.cap_m_lower, e.witness_index)
                         for e, r in zip(est, radii)])
    res["pass"] = bool(monotone and res["volcap_ok"])
    return res


VERIFY = {"c0": _verify_c0, "barrier": _verify_barrier, "mixed": _verify_mixed,
          "stability": _verify_stability, "capacity": _verify_capacity}


def cmd_cap(args, threads):
    doc, spec, opts = problem.load_problem(args.problem)
    radii = args.radii or doc.get("options", {}).get("radii", [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8])
    seed = args.seed if args.seed is not None else int(doc.get("options", {}).get("seed", 0))
    res = _capacity(spec, radii, args.budget, seed, args.tau, args.out)
    res["threads"] = threads
    problem.write_json(os.path.join(args.out, "capacity.json"), res)
    _summary(args.out, [f"capacity: monotone={res['monotone']} volume-capacity ok={res['volcap_ok']} "
                        f"fitted C={res['fitted_C']}"])
    return res["pass"]


def cmd_mollify(args, threads):
    doc = problem.load_json(args.setup)
    setup = mollify.MollifySetup(dim=int(doc.get("dim", 3)), radius=float(doc.get("radius", 1.0)),
                                 delta=float(doc.get("delta", 0.1)), delta0=float(doc.get("delta0", 0.5)))
    if args.field:
        u = _field_interpolant(args.field, setup.dim)
    else:
        u = problem.real_expression(doc.get("u", "x1^2 + x2^2 + x3^2"), setup.dim)
    levels = args.levels or doc.get("levels") or [setup.h_delta * k for k in (1, 2, 4, 8)]
    fam = mollify.mollify(u, levels, setup, step=doc.get("step"))
    out = args.out
    rows = []
    for h, vals in zip(fam.levels, fam.outputs):
        rows += [(float(h), i, *map(float, fam.points[i]), float(vals[i])) for i in range(len(fam.points))]
    problem.write_table(os.path.join(out, "levels.csv"), ["h", "point", "x1", "x2", "x3", "u_h"], rows)
    errs = fam.l1_errors()
    problem.write_table(os.path.join(out, "convergence.csv"), ["h", "l1_error", "max_abs_diff"],
                        [(float(h), e, float(np.max(np.abs(o - fam.inputs))))
                         for h, e, o in zip(fam.levels, errs, fam.outputs)])
    mono = all(np.all(b <= a + 1e-9) for a, b in zip(fam.outputs, fam.outputs[1:]))
    problem.write_json(os.path.join(out, "report.json"), {"h_delta": setup.h_delta, "levels": fam.levels,
                                                          "l1_errors": errs, "monotone": mono})
    _summary(out, [f"mollify: h_delta={setup.h_delta:.6g}, L1 errors {['%.3e' % e for e in errs]}, "
                   f"monotone={mono}"])
    return mono


def _field_interpolant(path, dim):
    from scipy.interpolate import LinearNDInterpolator, NearestNDInterpolator

    data = np.loadtxt(path, delimiter=",", skiprows=1)
    pts, vals = data[:, :dim], data[:, dim]
    lin = LinearNDInterpolator(pts, vals)
    near = NearestNDInterpolator(pts, vals)

    def u(x):
        v = lin(x)
        bad = np.isnan(v)
        v[bad] = near(x[bad])
        return v

    return u
