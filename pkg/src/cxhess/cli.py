"""Command-line front end.

Exit status: 0 when every requested check passes, 2 when a verification
check fails, 1 on any error (bad input, solver failure).
"""
import argparse
import logging
import os
import sys

THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")
EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2

log = logging.getLogger("cxhess")


def _threads(arg):
    value = arg if arg is not None else os.environ.get("CXHESS_THREADS")
    if value is None:
        return None
    n = int(value)
    if n < 1:
        raise ValueError("thread count must be positive")
    for var in THREAD_VARS:
        os.environ[var] = str(n)
    return n


def build_parser():
    p = argparse.ArgumentParser(prog="cxhess", description="Complex Hessian equations on balls.")
    p.add_argument("--threads", type=int, help="thread count (default: $CXHESS_THREADS)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve the Dirichlet problem")
    s.add_argument("problem")
    s.add_argument("--out", default="out")
    s.add_argument("--continuation", type=int, default=None, help="continuity-path steps")

    e = sub.add_parser("envelope", help="Perron envelope by ball lifts")
    e.add_argument("problem")
    e.add_argument("--out", default="out")
    e.add_argument("--per-axis", type=int, default=3)
    e.add_argument("--overlap", type=float, default=0.3)
    e.add_argument("--max-sweeps", type=int, default=50)

    v = sub.add_parser("verify", help="run inequality checks")
    v.add_argument("problem")
    v.add_argument("--out", default="out")
    for flag in ("stability", "mixed", "capacity", "barrier", "c0"):
        v.add_argument(f"--{flag}", action="store_true")

    mo = sub.add_parser("mollify", help="Green-function mollification in R^3")
    mo.add_argument("setup", help="JSON with dim, radius, delta, delta0 and u (expression)")
    mo.add_argument("--field", help="CSV with x1,x2,x3,value samples of u (overrides the expression)")
    mo.add_argument("--levels", type=float, nargs="+", help="levels h (default: multiples of h_delta)")
    mo.add_argument("--out", default="out")

    c = sub.add_parser("cap", help="capacity lower bounds of nested balls")
    c.add_argument("problem")
    c.add_argument("--out", default="out")
    c.add_argument("--radii", type=float, nargs="+", help="ball radii as fractions of delta")
    c.add_argument("--budget", type=int, default=64)
    c.add_argument("--seed", type=int, default=None)
    c.add_argument("--tau", type=float, default=None)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        threads = _threads(args.threads)
        from . import commands

        os.makedirs(getattr(args, "out", "out"), exist_ok=True)
        passed = commands.run(args, threads)
    except Exception as exc:  # noqa: BLE001 - every failure maps to exit 1
        module = type(exc).__module__.rsplit(".", 1)[-1]
        print(f"error [{module}.{type(exc).__name__}]: {exc}", file=sys.stderr)
        if args.verbose:
            raise
        return EXIT_ERROR
    return EXIT_OK if passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
