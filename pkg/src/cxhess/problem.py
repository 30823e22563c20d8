"""Problem files (JSON) and field files (CSV).

Problem schema, version 1::

    {
      "schema_version": 1,
      "n": 2, "m": 2, "delta": 1.0, "spacing": 0.125,
      "center": [0, 0, 0, 0],                       optional
      "alpha": "identity" | number | matrix | {"conformal": EXPR} | {"field": CSV},
      "chi":   same forms as alpha,
      "h": EXPR | number | {"field": CSV}           or "f" (density, h = f^(1/m)),
      "phi": EXPR | number,
      "subsolution": EXPR,                          optional
      "constants": {"c": 0.5},                      optional names usable in EXPR
      "options": {"tol_residual": 1e-8, "max_iter": 200, "linear_solver": "auto",
                  "continuation_steps": 0, "seed": 0, ...},
      "pair": {...}                                 optional overrides for a second problem
    }

A matrix is a list of rows; entries are numbers or strings such as "0.2+0.1j".
{"conformal": G} means alpha = exp(G) * identity.  Field CSVs carry a header
and one row per interior node in grid order: ``node,value`` for scalars and
``node,a11_re,a11_im,a12_re,...`` for matrices.
"""
import copy
import csv
import json
import os

import numpy as np

from . import solver
from .errors import DomainError
from .expr import as_callable
from .grid import BallGrid

SCHEMA_VERSION = 1
FLOAT_FMT = "%.17g"


class ProblemFileError(DomainError):
    pass


def load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    except OSError as exc:
        raise ProblemFileError(f"cannot read {path}: {exc.strerror}") from None


def _resolve(base_dir, path):
    return path if os.path.isabs(path) else os.path.join(base_dir, path)


def read_field_csv(path, size, columns=1):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ProblemFileError(f"{path}: empty field file")
    body = rows[1:]
    if len(body) != size:
        raise ProblemFileError(f"{path}: expected {size} rows, found {len(body)}")
    try:
        data = np.array([[float(v) for v in r[1:]] for r in body])
    except ValueError as exc:
        raise ProblemFileError(f"{path}: {exc}") from None
    if data.shape[1] != columns:
        raise ProblemFileError(f"{path}: expected {columns} value columns, found {data.shape[1]}")
    return data


def _matrix_value(value, n, consts, base_dir, grid):
    if value is None or value == "identity":
        return None
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, list):
        try:
            mat = np.array([[complex(str(e).replace(" ", "")) for e in row] for row in value])
        except ValueError as exc:
            raise ProblemFileError(f"bad matrix entry: {exc}") from None
        if mat.shape != (n, n):
            raise ProblemFileError(f"matrix must be {n}x{n}")
        return mat
    if isinstance(value, dict) and "conformal" in value:
        weight = as_callable(value["conformal"], n, consts)
        base = _matrix_value(value.get("base"), n, consts, base_dir, grid)
        base = np.eye(n) if base is None else np.broadcast_to(base, (n, n))

        def alpha(pts):
            return np.exp(weight(pts))[:, None, None] * base

        return alpha
    if isinstance(value, dict) and "field" in value:
        data = read_field_csv(_resolve(base_dir, value["field"]), grid.size, 2 * n * n)
        return (data[:, 0::2] + 1j * data[:, 1::2]).reshape(grid.size, n, n)
    raise ProblemFileError(f"cannot interpret matrix specification {value!r}")


def _scalar_value(value, grid, base_dir):
    if isinstance(value, dict) and "field" in value:
        return read_field_csv(_resolve(base_dir, value["field"]), grid.size)[:, 0]
    return value


def build_problem(doc, base_dir=".", grid=None):
    """ProblemSpec plus solver options from a parsed problem document.

    ``grid`` reuses an existing grid (the document must describe the same one).
    """
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ProblemFileError(f"unsupported schema_version {version}")
    try:
        n, m = int(doc["n"]), int(doc["m"])
        delta = float(doc["delta"])
        spacing = float(doc.get("spacing", delta / 8))
    except KeyError as exc:
        raise ProblemFileError(f"missing field {exc.args[0]!r}") from None
    if grid is None:
        grid = BallGrid(n, delta, spacing, center=doc.get("center"))
    elif (grid.n, grid.delta, grid.spacing) != (n, delta, spacing):
        raise ProblemFileError("paired problems must share n, delta and spacing")
    consts = {"delta": delta, **doc.get("constants", {})}
    alpha = _matrix_value(doc.get("alpha"), n, consts, base_dir, grid)
    chi = _matrix_value(doc.get("chi"), n, consts, base_dir, grid)
    if ("h" in doc) == ("f" in doc):
        raise ProblemFileError("give exactly one of 'h' or 'f'")
    kw = {"h": _scalar_value(doc["h"], grid, base_dir)} if "h" in doc else \
        {"f": _scalar_value(doc["f"], grid, base_dir)}
    spec = solver.make_problem(grid, m, phi=doc.get("phi", 0.0), alpha=alpha, chi=chi,
                               subsolution=doc.get("subsolution"), constants=consts, **kw)
    return spec, options_from(doc.get("options", {}))


def options_from(opts):
    known = {f for f in solver.SolveOptions.__dataclass_fields__}
    return solver.SolveOptions(**{k: (tuple(v) if isinstance(v, list) else v)
                                  for k, v in opts.items() if k in known})


def pair_document(doc):
    """The second problem of a pair: the document with ``pair`` overrides applied."""
    if "pair" not in doc:
        raise ProblemFileError("this check needs a 'pair' section in the problem file")
    other = copy.deepcopy(doc)
    over = other.pop("pair")
    for key in ("h", "f"):
        if key in over:
            other.pop("h", None)
            other.pop("f", None)
    other.update(over)
    return other


def load_problem(path):
    doc = load_json(path)
    spec, opts = build_problem(doc, os.path.dirname(os.path.abspath(path)))
    return doc, spec, opts


# output ---------------------------------------------------------------------------------

def write_field(path, grid, interior, boundary=None, extra_meta=None):
    """CSV with node, coordinates and value; interior rows, then boundary points indexed size + j.

    A JSON sidecar ``<path>.meta.json`` records the grid parameters.
    """
    dim = grid.dim
    names = [c for k in range(1, grid.n + 1) for c in (f"x{k}", f"y{k}")]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node"] + names + ["value"])
        for i in range(grid.size):
            w.writerow([i] + [FLOAT_FMT % v for v in grid.points[i]] + [FLOAT_FMT % interior[i]])
        if boundary is not None:
            for j in range(grid.nboundary):
                w.writerow([grid.size + j] + [FLOAT_FMT % v for v in grid.boundary_points[j]]
                           + [FLOAT_FMT % boundary[j]])
    meta = {"n": grid.n, "delta": grid.delta, "spacing": grid.spacing, "interior_nodes": grid.size,
            "boundary_points": grid.nboundary if boundary is not None else 0,
            "center": [float(c) for c in grid.balls[0].center], "dim": dim}
    meta.update(extra_meta or {})
    write_json(path + ".meta.json", meta)


def write_table(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([FLOAT_FMT % v if isinstance(v, (float, np.floating)) else v for v in r])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(FLOAT_FMT % obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def real_expression(value, dim):
    """Scalar function on R^dim from an expression using x1..x_dim."""
    return as_callable(value, 0, None, coords=[f"x{k}" for k in range(1, dim + 1)])

