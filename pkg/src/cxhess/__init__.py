"""Complex Hessian equations on balls: discretization, solvers and inequality checks."""
__version__ = "0.1.0"
