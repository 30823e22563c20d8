"""Elementary symmetric polynomials on spectra and the Garding cone.

Every function accepts either a :class:`Spectrum` or a plain array whose last
axis holds the eigenvalues, so the same code serves single spectra (tests,
CLI diagnostics) and per-node batches (the solver).
"""
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .errors import ConeViolationError, DomainError

CONE_EPS = 1e-12
F_FLOOR = 1e-14


@dataclass(frozen=True)
class Spectrum:
    values: np.ndarray
    m: int

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size == 0:
            raise DomainError("spectrum must be a non-empty 1-d vector")
        if not np.all(np.isfinite(vals)):
            raise DomainError("spectrum entries must be finite")
        if not 1 <= self.m <= vals.size:
            raise DomainError(f"order m={self.m} outside 1..{vals.size}")
        object.__setattr__(self, "values", vals)

    @property
    def n(self):
        return self.values.size


@dataclass
class SymmetricValues:
    s: np.ndarray
    s_minor: np.ndarray
    f_value: float
    f_partials: np.ndarray
    f_trace: float = field(init=False)

    def __post_init__(self):
        self.f_trace = float(np.sum(self.f_partials))


def _values(lam):
    if isinstance(lam, Spectrum):
        return lam.values
    return np.asarray(lam, dtype=float)


def _order(lam, m):
    if m is None:
        if not isinstance(lam, Spectrum):
            raise DomainError("order m is required for a bare array")
        return lam.m
    return int(m)


def symmetric_all(lam, upto=None):
    """Return S_0..S_upto along a new last axis.

    Coefficients of prod_i (1 + lam_i t), accumulated left to right in input
    order, so results are bitwise reproducible.
    """
    lam = _values(lam)
    n = lam.shape[-1]
    upto = n if upto is None else upto
    out = np.zeros(lam.shape[:-1] + (upto + 1,))
    out[..., 0] = 1.0
    for i in range(n):
        li = lam[..., i]
        for k in range(min(i + 1, upto), 0, -1):
            out[..., k] = out[..., k] + li * out[..., k - 1]
    return out


def elementary_symmetric(lam, k):
    lam_arr = _values(lam)
    n = lam_arr.shape[-1]
    if not 0 <= k <= n:
        raise DomainError(f"k={k} outside 0..{n}")
    return symmetric_all(lam_arr, upto=k)[..., k]


def symmetric_minors(lam, k):
    """S_{k;i}: the k-th symmetric function of lam with entry i removed.

    Shape ``lam.shape``; entry i of the last axis corresponds to removal of i.
    """
    lam = _values(lam)
    n = lam.shape[-1]
    if not 0 <= k <= n - 1:
        if k == n:
            return np.zeros_like(lam)
        raise DomainError(f"k={k} outside 0..{n - 1}")
    out = np.empty_like(lam)
    idx = np.arange(n)
    for i in range(n):
        rest = lam[..., idx != i]
        out[..., i] = symmetric_all(rest, upto=k)[..., k]
    return out


def cone_margin(lam, m=None):
    """min_{1<=k<=m} S_k, the quantity whose positivity defines Gamma_m."""
    m = _order(lam, m)
    s = symmetric_all(lam, upto=m)
    return np.min(s[..., 1:], axis=-1)


def in_cone(lam, m=None, certified=False, cone_eps=CONE_EPS):
    """Membership in Gamma_m.

    The strict test asks S_k > 0 for k = 1..m.  The certified test asks
    S_k >= cone_eps * (1 + |lam|_inf)**k, which keeps points that float
    rounding pushes onto the boundary out of the cone.
    """
    m = _order(lam, m)
    vals = _values(lam)
    s = symmetric_all(vals, upto=m)[..., 1:]
    if not certified:
        ok = np.all(s > 0, axis=-1)
    else:
        scale = 1.0 + np.max(np.abs(vals), axis=-1)
        powers = scale[..., None] ** np.arange(1, m + 1)
        ok = np.all(s >= cone_eps * powers, axis=-1)
    return bool(ok) if np.ndim(ok) == 0 else ok


def first_cone_failure(lam, m):
    """Index k of the first S_k <= 0 (1-based), or None."""
    s = symmetric_all(_values(lam), upto=m)
    for k in range(1, m + 1):
        if not s[k] > 0:
            return k
    return None


def f_and_partials(lam, m, f_floor=F_FLOOR):
    """Batched F = S_m^{1/m} and f_i = S_m^{(1-m)/m} S_{m-1;i} / m.

    No cone check; entries with S_m below ``f_floor`` come back as NaN so
    the caller decides how to fail.
    """
    lam = _values(lam)
    sm = elementary_symmetric(lam, m)
    minors = symmetric_minors(lam, m - 1)
    good = sm >= f_floor
    safe = np.where(good, sm, 1.0)
    F = np.where(good, safe ** (1.0 / m), np.nan)
    coef = np.where(good, safe ** ((1.0 - m) / m) / m, np.nan)
    return F, coef[..., None] * minors


def hessian_f(lam, m=None, f_floor=F_FLOOR):
    """F, its gradient f_i and trace for one spectrum in Gamma_m."""
    m = _order(lam, m)
    vals = _values(lam)
    if vals.ndim != 1:
        raise DomainError("hessian_f takes a single spectrum; use f_and_partials for batches")
    k = first_cone_failure(vals, m)
    if k is not None:
        raise ConeViolationError(f"spectrum outside Gamma_{m}: S_{k} <= 0", index=k)
    s = symmetric_all(vals)
    if s[m] < f_floor:
        raise ConeViolationError(f"S_{m}={s[m]:.3e} below floor {f_floor:g}", index=m)
    F, f = f_and_partials(vals, m, f_floor)
    return SymmetricValues(s=s, s_minor=symmetric_minors(vals, m - 1), f_value=float(F), f_partials=f)


def _require_cone(vals, m, label):
    k = first_cone_failure(vals, m)
    if k is not None:
        raise ConeViolationError(f"{label} outside Gamma_{m}: S_{k} <= 0", index=k)


def garding_pairing(lam, lam2, m=None):
    """Both sides of Garding's inequality.

    lhs = sum_i lam2_i S_{m-1;i}(lam)
    rhs = m S_m(lam2)^{1/m} S_m(lam)^{(m-1)/m}
    For lam, lam2 in Gamma_m, lhs >= rhs.
    """
    m = _order(lam, m)
    a, b = _values(lam), _values(lam2)
    if a.ndim == 1:
        _require_cone(a, m, "first spectrum")
        _require_cone(b, m, "second spectrum")
    lhs = np.sum(b * symmetric_minors(a, m - 1), axis=-1)
    rhs = m * elementary_symmetric(b, m) ** (1.0 / m) * elementary_symmetric(a, m) ** ((m - 1.0) / m)
    return lhs, rhs


def wang_product_bound(lam, m=None):
    """(prod_i S_{m-1;i}(lam), S_m(lam)^{n(m-1)/m}).

    Their ratio is bounded below on Gamma_m by a constant depending on n, m.
    """
    m = _order(lam, m)
    vals = _values(lam)
    if vals.ndim == 1:
        _require_cone(vals, m, "spectrum")
    n = vals.shape[-1]
    lhs = np.prod(symmetric_minors(vals, m - 1), axis=-1)
    rhs = elementary_symmetric(vals, m) ** (n * (m - 1.0) / m)
    return lhs, rhs


def maclaurin_constant(n, m):
    """C with det^{1/n} <= C S_m^{1/m} on the positive orthant: binom(n,m)^{-1/m}."""
    return comb(n, m) ** (-1.0 / m)


def mixed_symmetric(lam, mu, k, m):
    """Mixed symmetric function: coefficient of x^k y^(m-k) in prod_i (1 + x lam_i + y mu_i).

    Equals sum over |I| = m and J subset I with |J| = k of
    prod_{J} lam * prod_{I\\J} mu.  With lam = mu it reduces to binom(m,k) S_m.
    """
    a, b = _values(lam), _values(mu)
    n = a.shape[-1]
    if not 0 <= k <= m <= n:
        raise DomainError(f"need 0 <= k <= m <= n, got k={k}, m={m}, n={n}")
    # coef[..., p, q] = coefficient of x^p y^q
    coef = np.zeros(a.shape[:-1] + (k + 1, m - k + 1))
    coef[..., 0, 0] = 1.0
    for i in range(n):
        ai = a[..., i, None, None]
        bi = b[..., i, None, None]
        new = coef.copy()
        new[..., 1:, :] += ai * coef[..., :-1, :]
        new[..., :, 1:] += bi * coef[..., :, :-1]
        coef = new
    return coef[..., k, m - k]
