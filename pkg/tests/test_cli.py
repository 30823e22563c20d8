import json
import os

import numpy as np
import pytest

from cxhess import cli, problem, solver
from cxhess.errors import DomainError
from cxhess.grid import BallGrid


def write(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh)
    return str(path)


QUAD = {"schema_version": 1, "n": 2, "m": 2, "delta": 1.0, "spacing": 0.125, "chi": "identity",
        "h": "1 + c", "phi": 0, "constants": {"c": 1.0},
        "pair": {"h": "1.5 + r2", "phi": "0.1*x1*y2"}}


def test_solve_writes_outputs(tmp_path):
    prob = write(tmp_path / "p.json", QUAD)
    out = tmp_path / "out"
    assert cli.main(["--threads", "1", "solve", prob, "--out", str(out)]) == 0
    rep = json.load(open(out / "report.json"))
    assert rep["converged"] and rep["final_residual"] <= 1e-8 and rep["threads"] == 1
    data = np.loadtxt(out / "solution.csv", delimiter=",", skiprows=1)
    meta = json.load(open(out / "solution.csv.meta.json"))
    assert len(data) == meta["interior_nodes"] + meta["boundary_points"]
    interior = data[: meta["interior_nodes"]]
    exact = np.sum(interior[:, 1:5] ** 2, axis=1) - 1.0
    assert np.max(np.abs(interior[:, 5] - exact)) <= 1e-8
    assert os.environ["OMP_NUM_THREADS"] == "1"
    assert (out / "summary.txt").read_text().startswith("solve:")


def test_continuation_flag(tmp_path):
    prob = write(tmp_path / "p.json", QUAD)
    assert cli.main(["solve", prob, "--out", str(tmp_path / "o"), "--continuation", "3"]) == 0
    assert json.load(open(tmp_path / "o" / "report.json"))["continuity_steps"] == 3


def test_bad_json_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"n": 2,\n "m": }')
    assert cli.main(["solve", str(bad), "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert "line 2 column" in err and "ProblemFileError" in err


@pytest.mark.parametrize("doc,match", [
    ({"n": 2, "m": 2, "delta": 1.0, "phi": 0}, "exactly one"),
    ({"n": 2, "m": 2, "h": 1}, "missing field"),
    ({"schema_version": 7, "n": 2, "m": 2, "delta": 1.0, "h": 1}, "schema_version"),
    ({"n": 2, "m": 2, "delta": 1.0, "h": "x1 +"}, "syntax"),
    ({"n": 2, "m": 2, "delta": 1.0, "h": 1, "alpha": [[1, 0]]}, "2x2"),
])
def test_problem_validation(doc, match):
    with pytest.raises(DomainError, match=match):
        problem.build_problem(doc)


def test_matrix_forms_and_field_files(tmp_path):
    g = BallGrid(1, 1.0, 0.125)
    with open(tmp_path / "h.csv", "w") as fh:
        fh.write("node,value\n" + "".join(f"{i},{1 + 0.1 * i / g.size}\n" for i in range(g.size)))
    doc = {"n": 1, "m": 1, "delta": 1.0, "spacing": 0.125, "h": {"field": "h.csv"},
           "alpha": {"conformal": "0.2*x1"}, "chi": [["0.5"]], "options": {"tol_residual": 1e-9}}
    spec, opts = problem.build_problem(doc, str(tmp_path))
    assert opts.tol_residual == 1e-9
    assert spec.rhs[-1] == pytest.approx(1 + 0.1 * (g.size - 1) / g.size)
    assert np.allclose(spec.alpha[:, 0, 0].real, np.exp(0.2 * g.points[:, 0]))
    assert np.allclose(spec.chi, 0.5)
    doc2 = {"n": 2, "m": 1, "delta": 1.0, "h": 1, "alpha": [[1, "0.2+0.1j"], ["0.2-0.1j", 2]]}
    spec2, _ = problem.build_problem(doc2)
    assert spec2.alpha[0, 0, 1] == 0.2 + 0.1j
    with pytest.raises(DomainError, match="rows"):
        (tmp_path / "short.csv").write_text("node,value\n0,1\n")
        problem.build_problem({**doc, "h": {"field": "short.csv"}}, str(tmp_path))


def test_pair_document():
    other = problem.pair_document(QUAD)
    assert other["h"] == "1.5 + r2" and "pair" not in other
    with pytest.raises(DomainError):
        problem.pair_document({"n": 1})


def test_json_output_is_deterministic(tmp_path):
    problem.write_json(tmp_path / "a.json", {"b": np.float64(0.1), "a": np.arange(2), "c": np.bool_(True)})
    text = (tmp_path / "a.json").read_text()
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text)["b"] == 0.1


def test_verify_envelope_cap_mollify(tmp_path):
    prob = write(tmp_path / "p.json", QUAD)
    out = tmp_path / "v"
    assert cli.main(["verify", prob, "--out", str(out), "--c0", "--barrier", "--mixed", "--stability"]) == 0
    res = json.load(open(out / "verify.json"))
    assert res["pass"] and set(res["suites"]) == {"c0", "barrier", "mixed", "stability"}
    assert (out / "barrier.csv").exists() and (out / "mixed_margins.csv").exists()

    env = write(tmp_path / "e.json", {"n": 1, "m": 1, "delta": 1.0, "spacing": 1 / 32, "h": "2 + 0.5*x1",
                                      "phi": "0.1*x1", "subsolution": "3*(r2-1) + 0.1*x1"})
    assert cli.main(["envelope", env, "--out", str(tmp_path / "e")]) == 0
    erep = json.load(open(tmp_path / "e" / "report.json"))
    assert erep["balls"] == 9 and erep["pass"] and len(erep["modulus_of_continuity"]) == 3

    cap = write(tmp_path / "c.json", {"n": 2, "m": 1, "delta": 1.0, "spacing": 0.125, "h": 0, "phi": 0})
    assert cli.main(["cap", cap, "--out", str(tmp_path / "c"), "--budget", "32"]) == 0
    capres = json.load(open(tmp_path / "c" / "capacity.json"))
    assert capres["monotone"] and capres["volcap_ok"] and capres["frozen_C"] is not None
    assert 0 < capres["equivalence_ratio"][0] <= capres["equivalence_ratio"][1]

    mol = write(tmp_path / "m.json", {"dim": 3, "radius": 1.0, "delta": 0.2, "u": "x1^2 + x2^2 + x3^2",
                                      "step": 0.3})
    assert cli.main(["mollify", mol, "--out", str(tmp_path / "m")]) == 0
    rep = json.load(open(tmp_path / "m" / "report.json"))
    errs = rep["l1_errors"]
    assert rep["monotone"] and all(b < a for a, b in zip(errs, errs[1:]))


def test_envelope_without_subsolution_is_an_error(tmp_path, capsys):
    prob = write(tmp_path / "p.json", {"n": 1, "m": 1, "delta": 1.0, "h": 1})
    assert cli.main(["envelope", prob, "--out", str(tmp_path / "o")]) == 1
    assert "DomainError" in capsys.readouterr().err


def test_error_and_failure_exit_codes(tmp_path):
    # p <= n/m is invalid input
    prob = write(tmp_path / "p.json", dict(QUAD, options={"p": 0.5}))
    assert cli.main(["verify", prob, "--out", str(tmp_path / "o"), "--stability"]) == 1
    # a superharmonic input is not decreasing in h, so the check fails
    mol = write(tmp_path / "m.json", {"dim": 3, "delta": 0.2, "u": "-(x1^2 + x2^2 + x3^2)", "step": 0.3})
    assert cli.main(["mollify", mol, "--out", str(tmp_path / "m"), "--levels", "0.7", "1.4"]) == 2


def test_threads_env(monkeypatch, tmp_path):
    monkeypatch.setenv("CXHESS_THREADS", "2")
    prob = write(tmp_path / "p.json", QUAD)
    assert cli.main(["solve", prob, "--out", str(tmp_path / "o")]) == 0
    assert json.load(open(tmp_path / "o" / "report.json"))["threads"] == 2
