"""Generalized Mercer kernel families given by explicit expansion terms.

A family is a kernel ``K(x, y) = sum_n phi_n(x) phi'_n(y)`` truncated to its
first ``truncation`` terms under a fixed enumeration of the index set.  All the
built-in families are products of univariate factors and totally symmetric
(``phi' == phi``):

==================  =======================================  ===============
kind                expansion term (one axis)                 closed form
==================  =======================================  ===============
min-integral        sqrt(2) sin(n pi x) / (n pi)^2, n >= 1   piecewise cubic
gaussian-eigen      rho_n e_n(x), n >= 1 (Hermite functions) K_theta
gaussian-integral   same expansion as gaussian-eigen          K_theta
gaussian-taylor     sqrt(2^n / n!) (theta x)^n e^{-theta^2 x^2} G_theta
power-series        a_n^{1/2} x^n, n >= 0                     prod eta(x y)
==================  =======================================  ===============

``custom`` families wrap user callables and carry no product structure.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "DomainError",
    "ExpansionFamily",
    "IndexEnumeration",
    "TailReport",
    "min_integral",
    "gaussian_eigen",
    "gaussian_integral",
    "gaussian_taylor",
    "power_series",
    "custom",
    "default_truncation",
    "features",
    "phi",
    "phi_prime",
    "kernel_eval",
    "gram",
    "kstar_eval",
    "kstar_factorized",
    "eta_m_coefficients",
    "tail_report",
    "kernel_tail_bound",
    "eigen_data",
    "gaussian_eigenvalue_sum",
    "gaussian_shape_constants",
]

KINDS = (
    "min-integral",
    "gaussian-eigen",
    "gaussian-integral",
    "gaussian-taylor",
    "power-series",
    "custom",
)
_GAUSSIAN_EIGEN_KINDS = ("gaussian-eigen", "gaussian-integral")

# Cramer's bound on orthonormal Hermite functions, |psi_n(z)| <= K pi^{-1/4}.
_CRAMER = 1.086435


class DomainError(ValueError):
    """A point lies outside the declared domain of a family."""


def default_truncation(dim: int) -> int:
    return 512 if dim == 1 else 1024


# --------------------------------------------------------------------------
# index enumeration
# --------------------------------------------------------------------------


def _compositions(level: int, dim: int, base: int):
    """Yield tuples with entries >= base summing to ``level``, in lex order."""
    if dim == 1:
        if level >= base:
            yield (level,)
        return
    for first in range(base, level - (dim - 1) * base + 1):
        for rest in _compositions(level - first, dim - 1, base):
            yield (first,) + rest


@functools.lru_cache(maxsize=128)
def _enumerate(dim: int, count: int, base: int) -> np.ndarray:
    out = np.empty((count, dim), dtype=np.int64)
    pos = 0
    level = dim * base
    while pos < count:
        for comp in _compositions(level, dim, base):
            if pos == count:
                break
            out[pos] = comp
            pos += 1
        level += 1
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class IndexEnumeration:
    """Bijection ``{0..count-1} -> multi-indices`` ordered by l1 norm, then lex.

    ``base`` is 1 for index sets built on the positive integers and 0 for the
    non-negative integers.
    """

    dim: int
    count: int
    base: int = 1

    @property
    def indices(self) -> np.ndarray:
        return _enumerate(self.dim, self.count, self.base)

    def __getitem__(self, k: int) -> tuple:
        if not 0 <= k < self.count:
            raise IndexError(f"index {k} outside enumeration of size {self.count}")
        return tuple(int(v) for v in self.indices[k])

    def max_per_axis(self) -> np.ndarray:
        if self.count == 0:
            return np.full(self.dim, self.base - 1, dtype=np.int64)
        return self.indices.max(axis=0)


# --------------------------------------------------------------------------
# the family type
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ExpansionFamily:
    """An indexed family ``n -> (phi_n, phi'_n)`` truncated to ``truncation`` terms.

    Use the constructor functions (:func:`min_integral`, :func:`gaussian_eigen`,
    ...) rather than building this directly.
    """

    kind: str
    dim: int
    truncation: int
    lower: tuple
    upper: tuple
    theta: tuple = ()
    eta: str = ""
    eta_param: float = 0.0
    coeffs: tuple = ()
    phi_fn: Optional[Callable] = field(default=None, compare=False, repr=False)
    phi_prime_fn: Optional[Callable] = field(default=None, compare=False, repr=False)
    closed_form_fn: Optional[Callable] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dimension must be positive")
        if self.truncation < 0:
            raise ValueError("truncation must be non-negative")
        if len(self.lower) != self.dim or len(self.upper) != self.dim:
            raise ValueError("domain bounds must have one entry per dimension")
        if any(lo > hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("domain lower bound exceeds upper bound")
        if self.kind in _GAUSSIAN_EIGEN_KINDS + ("gaussian-taylor",):
            if len(self.theta) != self.dim or min(self.theta) <= 0:
                raise ValueError("theta must hold one positive shape per dimension")
        if self.kind == "power-series":
            if self.eta == "geometric" and not 0 < self.eta_param < 1:
                raise ValueError("geometric power series needs 0 < theta < 1")
            if self.eta == "coefficients":
                a = np.asarray(self.coeffs, dtype=float)
                if a.size == 0 or np.any(a <= 0):
                    raise ValueError("power-series coefficients must be strictly positive")
                need = int(self.enumeration.max_per_axis().max()) + 1
                if a.size < need:
                    raise ValueError(
                        f"{a.size} coefficients given but truncation reaches degree {need - 1}"
                    )
            elif self.eta not in ("exp", "geometric"):
                raise ValueError(f"unknown power series {self.eta!r}")
        if self.kind == "custom" and self.phi_fn is None:
            raise ValueError("custom family needs a phi callable")

    @property
    def base(self) -> int:
        return 1 if self.kind in ("min-integral",) + _GAUSSIAN_EIGEN_KINDS else 0

    @property
    def enumeration(self) -> IndexEnumeration:
        return IndexEnumeration(self.dim, self.truncation, self.base)

    @property
    def symmetric(self) -> bool:
        return self.kind != "custom" or self.phi_prime_fn is None

    @property
    def has_closed_form(self) -> bool:
        if self.kind == "custom":
            return self.closed_form_fn is not None
        if self.kind == "power-series":
            return self.eta in ("exp", "geometric")
        return True

    @property
    def has_eigen_data(self) -> bool:
        return self.kind == "min-integral" or self.kind in _GAUSSIAN_EIGEN_KINDS

    @property
    def reference_measure(self) -> str:
        return "gaussian" if self.kind in _GAUSSIAN_EIGEN_KINDS else "lebesgue"

    def with_truncation(self, truncation: int) -> "ExpansionFamily":
        from dataclasses import replace

        return replace(self, truncation=int(truncation))

    def check_points(self, X) -> np.ndarray:
        """Return ``X`` as an ``(n, dim)`` array, raising on points outside the box."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 0:
            X = X.reshape(1, 1)
        elif X.ndim == 1:
            X = X.reshape(1, -1) if X.size == self.dim else X.reshape(-1, 1)
        if X.shape[1] != self.dim:
            raise ValueError(f"points have dimension {X.shape[1]}, family has {self.dim}")
        if not np.all(np.isfinite(X)):
            raise DomainError("non-finite point")
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        bad = np.any((X < lo) | (X > hi), axis=1)
        if np.any(bad):
            k = int(np.argmax(bad))
            raise DomainError(f"point {X[k].tolist()} outside domain {self.lower}..{self.upper}")
        return X


def _as_theta(theta, dim):
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.size == 1 and dim > 1:
        theta = np.repeat(theta, dim)
    return tuple(float(t) for t in theta)


def min_integral(dim: int = 1, truncation: Optional[int] = None) -> ExpansionFamily:
    """Integral-type min kernel ``K_d`` on ``[0, 1]^d``."""
    t = default_truncation(dim) if truncation is None else truncation
    return ExpansionFamily("min-integral", dim, t, (0.0,) * dim, (1.0,) * dim)


def gaussian_eigen(theta, dim: Optional[int] = None, truncation: Optional[int] = None,
                   half_width: float = 6.0) -> ExpansionFamily:
    """Integral-Gaussian kernel expanded in Gaussian eigenpairs, ``phi_n = rho_n e_n``.

    The reference measure is the Gaussian probability measure; the box of
    half-width ``half_width`` only bounds evaluation and quadrature.
    """
    dim = dim or np.atleast_1d(theta).size
    th = _as_theta(theta, dim)
    t = default_truncation(dim) if truncation is None else truncation
    h = float(half_width)
    return ExpansionFamily("gaussian-eigen", dim, t, (-h,) * dim, (h,) * dim, theta=th)


def gaussian_integral(theta, dim: Optional[int] = None, truncation: Optional[int] = None,
                      half_width: float = 6.0) -> ExpansionFamily:
    """Same expansion as :func:`gaussian_eigen`, tagged by its closed form ``K_theta``."""
    fam = gaussian_eigen(theta, dim, truncation, half_width)
    from dataclasses import replace

    return replace(fam, kind="gaussian-integral")


def gaussian_taylor(theta, dim: Optional[int] = None, truncation: Optional[int] = None,
                    half_width: float = 6.0) -> ExpansionFamily:
    """Gaussian kernel ``G_theta`` through its Taylor-type expansion on a box."""
    dim = dim or np.atleast_1d(theta).size
    th = _as_theta(theta, dim)
    t = default_truncation(dim) if truncation is None else truncation
    h = float(half_width)
    return ExpansionFamily("gaussian-taylor", dim, t, (-h,) * dim, (h,) * dim, theta=th)


def power_series(eta: str = "exp", dim: int = 1, theta: float = 0.5,
                 truncation: Optional[int] = None,
                 coeffs: Optional[Sequence[float]] = None) -> ExpansionFamily:
    """Nonlinearly factorizable power series kernel ``prod_k eta(x_k y_k)`` on ``[-1, 1]^d``.

    Parameters
    ----------
    eta : {"exp", "geometric", "coefficients"}
        ``exp`` uses ``a_n = 1/n!``; ``geometric`` is ``1/(1 - theta z)`` with
        ``a_n = theta^n``; ``coefficients`` takes ``a_n`` from ``coeffs``.
    """
    t = default_truncation(dim) if truncation is None else truncation
    if coeffs is not None:
        eta = "coefficients"
    return ExpansionFamily(
        "power-series", dim, t, (-1.0,) * dim, (1.0,) * dim,
        eta=eta, eta_param=float(theta) if eta == "geometric" else 0.0,
        coeffs=tuple(float(c) for c in coeffs) if coeffs is not None else (),
    )


def custom(phi: Callable, truncation: int, lower, upper,
           phi_prime: Optional[Callable] = None,
           closed_form: Optional[Callable] = None) -> ExpansionFamily:
    """Family from user callables ``phi(n, x) -> float`` with ``x`` a 1-d point."""
    lower = tuple(float(v) for v in np.atleast_1d(lower))
    upper = tuple(float(v) for v in np.atleast_1d(upper))
    return ExpansionFamily(
        "custom", len(lower), int(truncation), lower, upper,
        phi_fn=phi, phi_prime_fn=phi_prime, closed_form_fn=closed_form,
    )


# --------------------------------------------------------------------------
# univariate factor tables
# --------------------------------------------------------------------------


def gaussian_shape_constants(theta: float):
    """Return ``(w, u, beta)`` for the univariate Gaussian eigen-expansion.

    ``beta = (1 + 4 theta^2)^{1/4}`` scales the Hermite argument.
    """
    s = math.sqrt(1.0 + 4.0 * theta * theta)
    w = 2.0 * theta * theta / (1.0 + s + 2.0 * theta * theta)
    u = 2.0 * theta * theta / (1.0 + s)
    return w, u, math.sqrt(s)


def _hermite_functions(z: np.ndarray, nmax: int) -> np.ndarray:
    """``psi_j(z) = H_j(z) e^{-z^2/2} / sqrt(2^j j!)`` for ``j = 0..nmax``.

    The normalisation is carried through the three-term recurrence so neither
    ``H_j`` nor ``j!`` is ever formed.
    """
    out = np.zeros((z.size, nmax + 1))
    if nmax < 0:
        return out
    out[:, 0] = np.exp(-0.5 * z * z)
    if nmax >= 1:
        out[:, 1] = math.sqrt(2.0) * z * out[:, 0]
    for j in range(2, nmax + 1):
        out[:, j] = math.sqrt(2.0 / j) * z * out[:, j - 1] - math.sqrt((j - 1) / j) * out[:, j - 2]
    return out


def _ratio_table(first: np.ndarray, ratio: Callable[[int], np.ndarray], nmax: int) -> np.ndarray:
    out = np.zeros((first.size, nmax + 1))
    if nmax < 0:
        return out
    out[:, 0] = first
    for n in range(1, nmax + 1):
        out[:, n] = out[:, n - 1] * ratio(n)
    return out


def _axis_table(fam: ExpansionFamily, axis: int, xs: np.ndarray, nmax: int,
                eigen: bool = False) -> np.ndarray:
    """Column ``n`` holds the univariate factor of index ``n`` at each of ``xs``.

    With ``eigen=True`` the eigenvalue factor is dropped, leaving the
    orthonormal eigenfunction.
    """
    xs = np.asarray(xs, dtype=float).ravel()
    n = np.arange(nmax + 1)
    if fam.kind == "min-integral":
        tab = math.sqrt(2.0) * np.sin(np.pi * np.outer(xs, n))
        if not eigen:
            with np.errstate(divide="ignore"):
                rho = np.where(n > 0, 1.0 / (np.pi * np.pi * np.maximum(n, 1) ** 2), 0.0)
            tab = tab * rho
        tab[:, 0] = 0.0
        return tab
    if fam.kind in _GAUSSIAN_EIGEN_KINDS:
        w, _, beta = gaussian_shape_constants(fam.theta[axis])
        tab = np.zeros((xs.size, nmax + 1))
        if nmax >= 1:
            psi = _hermite_functions(beta * xs, nmax - 1)
            # e^{-u x^2} H(beta x) / norm == e^{x^2/2} psi(beta x)
            e = math.sqrt(beta) * np.exp(0.5 * xs * xs)[:, None] * psi
            if not eigen:
                rho = (1.0 - w) * w ** (n[1:] - 1.0)
                e = e * rho
            tab[:, 1:] = e
        return tab
    if eigen:
        raise ValueError(f"{fam.kind} family has no eigen-data")
    if fam.kind == "gaussian-taylor":
        th = fam.theta[axis]
        return _ratio_table(np.exp(-(th * xs) ** 2),
                            lambda k: math.sqrt(2.0 / k) * th * xs, nmax)
    if fam.kind == "power-series":
        if fam.eta == "exp":
            return _ratio_table(np.ones_like(xs), lambda k: xs / math.sqrt(k), nmax)
        if fam.eta == "geometric":
            r = math.sqrt(fam.eta_param)
            return _ratio_table(np.ones_like(xs), lambda k: r * xs, nmax)
        a = np.sqrt(np.asarray(fam.coeffs[: nmax + 1]))
        return a[None, :] * xs[:, None] ** n[None, :]
    raise ValueError(f"{fam.kind} family has no product structure")


def _custom_features(fam: ExpansionFamily, X: np.ndarray, fn: Callable) -> np.ndarray:
    out = np.empty((X.shape[0], fam.truncation))
    for i, x in enumerate(X):
        for n in range(fam.truncation):
            out[i, n] = fn(n, x)
    return out


def features(fam: ExpansionFamily, X, prime: bool = False) -> np.ndarray:
    """Matrix of expansion terms, ``out[i, n] = phi_n(X[i])`` (``phi'_n`` if ``prime``)."""
    X = fam.check_points(X)
    if fam.kind == "custom":
        fn = fam.phi_prime_fn if (prime and fam.phi_prime_fn is not None) else fam.phi_fn
        return _custom_features(fam, X, fn)
    return _product_features(fam, X, eigen=False)


def _product_features(fam: ExpansionFamily, X: np.ndarray, eigen: bool) -> np.ndarray:
    idx = fam.enumeration.indices
    out = np.ones((X.shape[0], fam.truncation))
    if fam.truncation == 0:
        return out
    nmax = fam.enumeration.max_per_axis()
    for k in range(fam.dim):
        tab = _axis_table(fam, k, X[:, k], int(nmax[k]), eigen=eigen)
        out *= tab[:, idx[:, k]]
    return out


def phi(fam: ExpansionFamily, n: int, x) -> float:
    """Value of the ``n``-th retained expansion term at ``x``."""
    if not 0 <= n < fam.truncation:
        raise IndexError(f"term {n} outside truncation {fam.truncation}")
    x = fam.check_points(x)
    if fam.kind == "custom":
        return float(fam.phi_fn(n, x[0]))
    multi = fam.enumeration.indices[n]
    val = 1.0
    for k in range(fam.dim):
        val *= _axis_table(fam, k, x[:, k], int(multi[k]))[0, multi[k]]
    return float(val)


def phi_prime(fam: ExpansionFamily, n: int, x) -> float:
    if fam.kind == "custom" and fam.phi_prime_fn is not None:
        if not 0 <= n < fam.truncation:
            raise IndexError(f"term {n} outside truncation {fam.truncation}")
        return float(fam.phi_prime_fn(n, fam.check_points(x)[0]))
    return phi(fam, n, x)


# --------------------------------------------------------------------------
# kernels
# --------------------------------------------------------------------------


def _min_k1(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    lo = np.minimum(x, y)
    hi = np.maximum(x, y)
    # symmetric form of the piecewise cubic with lo <= hi
    return -lo ** 3 / 6 + lo ** 3 * hi / 6 + lo * hi ** 3 / 6 - lo * hi ** 2 / 2 + lo * hi / 3


def _closed_form(fam: ExpansionFamily, x: np.ndarray, y: np.ndarray) -> float:
    if fam.kind == "min-integral":
        return float(np.prod(_min_k1(x, y)))
    if fam.kind in _GAUSSIAN_EIGEN_KINDS:
        th = np.asarray(fam.theta)
        c = np.prod((2 * th ** 2 + 1) ** -0.5)
        vt2 = (th ** 4 + th ** 2) / (2 * th ** 2 + 1)
        al2 = 2 * th ** 2 / (2 * th ** 2 + 1)
        return float(c * np.exp(-np.sum(vt2 * (x - y) ** 2) - np.sum(al2 * x * y)))
    if fam.kind == "gaussian-taylor":
        th = np.asarray(fam.theta)
        return float(np.exp(-np.sum(th ** 2 * (x - y) ** 2)))
    if fam.kind == "power-series":
        z = x * y
        if fam.eta == "exp":
            return float(np.exp(np.sum(z)))
        if fam.eta == "geometric":
            return float(np.prod(1.0 / (1.0 - fam.eta_param * z)))
    if fam.kind == "custom" and fam.closed_form_fn is not None:
        return float(fam.closed_form_fn(x, y))
    raise ValueError(f"no closed form for {fam.kind} family")


def kernel_eval(fam: ExpansionFamily, x, y, closed_form: bool = False) -> float:
    """``K(x, y)`` as the truncated sum ``sum_n phi_n(x) phi'_n(y)``, or its closed form."""
    X = fam.check_points(x)
    Y = fam.check_points(y)
    if closed_form:
        return _closed_form(fam, X[0], Y[0])
    fx = features(fam, X)[0]
    fy = features(fam, Y, prime=True)[0]
    return float(np.sum(fx * fy))


def gram(fam: ExpansionFamily, X, Y=None, closed_form: bool = False) -> np.ndarray:
    """Kernel matrix ``out[i, j] = K(X[i], Y[j])``."""
    X = fam.check_points(X)
    Y = X if Y is None else fam.check_points(Y)
    if closed_form:
        return np.array([[_closed_form(fam, a, b) for b in Y] for a in X]).reshape(len(X), len(Y))
    return features(fam, X) @ features(fam, Y, prime=True).T


def kstar_eval(fam: ExpansionFamily, x, ys) -> float:
    """Higher-order kernel ``sum_n phi_n(x) prod_j phi_n(y_j)`` over ``2m-1`` points ``ys``."""
    Y = fam.check_points(np.asarray(ys, dtype=float).reshape(-1, fam.dim))
    if Y.shape[0] % 2 == 0:
        raise ValueError(f"need an odd number of points, got {Y.shape[0]}")
    fx = features(fam, x)[0]
    fy = features(fam, Y, prime=True)
    prod = fy[0]
    for row in fy[1:]:
        prod = prod * row
    return float(np.sum(fx * prod))


def eta_m_coefficients(fam: ExpansionFamily, m: int, nmax: int) -> np.ndarray:
    """Coefficients ``a_n^m`` of ``eta_m(z) = sum_n a_n^m z^n`` for ``n = 0..nmax``."""
    n = np.arange(nmax + 1)
    if fam.eta == "exp":
        lg = np.array([math.lgamma(k + 1.0) for k in n])
        return np.exp(-m * lg)
    if fam.eta == "geometric":
        return fam.eta_param ** (m * n.astype(float))
    return np.asarray(fam.coeffs[: nmax + 1], dtype=float) ** m


def kstar_factorized(fam: ExpansionFamily, x, ys) -> float:
    """``K^{*(2m-1)}`` of a power series kernel as ``prod_k eta_m(x_k w_k)``.

    ``w_k`` is the product of the ``k``-th coordinates of ``ys``.  Each factor
    sums ``eta_m`` up to the largest per-axis degree in the truncation; in one
    dimension this is the same term set as :func:`kstar_eval`.
    """
    if fam.kind != "power-series":
        raise ValueError("factorized evaluation needs a power-series family")
    X = fam.check_points(x)[0]
    Y = fam.check_points(np.asarray(ys, dtype=float).reshape(-1, fam.dim))
    if Y.shape[0] % 2 == 0:
        raise ValueError(f"need an odd number of points, got {Y.shape[0]}")
    m = (Y.shape[0] + 1) // 2
    w = np.prod(Y, axis=0)
    nmax = fam.enumeration.max_per_axis()
    val = 1.0
    for k in range(fam.dim):
        coef = eta_m_coefficients(fam, m, int(nmax[k]))
        val *= np.polynomial.polynomial.polyval(X[k] * w[k], coef)
    return float(val)


# --------------------------------------------------------------------------
# eigen-data and tails
# --------------------------------------------------------------------------


def eigen_data(fam: ExpansionFamily):
    """Eigenvalues ``lambda_n`` and an evaluator for eigenfunctions ``e_n``.

    Only families built from Mercer eigenpairs qualify; for them
    ``phi_n = lambda_n^{1/2} e_n``.
    """
    if not fam.has_eigen_data:
        raise ValueError(f"{fam.kind} family carries no eigen-data")
    idx = fam.enumeration.indices
    lam = np.ones(fam.truncation)
    for k in range(fam.dim):
        n = idx[:, k].astype(float)
        if fam.kind == "min-integral":
            lam *= (np.pi * n) ** -4.0
        else:
            w = gaussian_shape_constants(fam.theta[k])[0]
            lam *= ((1.0 - w) * w ** (n - 1.0)) ** 2

    def eigenfunctions(X) -> np.ndarray:
        return _product_features(fam, fam.check_points(X), eigen=True)

    return lam, eigenfunctions


def gaussian_eigenvalue_sum(theta: float, count: int) -> float:
    """``sum_{n<count} rho_{theta,n}`` for the univariate Gaussian kernel."""
    w = gaussian_shape_constants(theta)[0]
    rho = (1.0 - w) * w ** np.arange(count, dtype=float)
    return float(np.sum(rho))


@dataclass(frozen=True)
class TailReport:
    """Partial sums ``S_N = sum_{n<N} |phi_n(x)|^q`` along a doubling ladder of ``N``.

    ``tail_bound`` bounds ``sum_{n >= truncation} |phi_n(x)|^q`` (``nan`` when
    the family gives no envelope).  ``last_increment_ratio`` is the last ladder
    increment divided by the one before it.
    """

    q: float
    ladder: np.ndarray
    partial_sums: np.ndarray
    last_increment_ratio: float
    tail_bound: float


def _ladder(truncation: int) -> np.ndarray:
    steps = [0]
    n = 1
    while n < truncation:
        steps.append(n)
        n *= 2
    if truncation > 0:
        steps.append(truncation)
    return np.array(steps, dtype=np.int64)


def _summing_exponent(p: float) -> float:
    if p < 1:
        raise ValueError("exponent must lie in [1, inf]")
    if p == 1 or math.isinf(p):
        return 1.0
    return p / (p - 1.0)


def tail_report(fam: ExpansionFamily, x, p: float) -> TailReport:
    """Convergence diagnostics for ``sum_n |phi_n(x)|^q`` with ``q`` conjugate to ``p``.

    ``p = 1`` (and ``p = inf``) use plain absolute sums.
    """
    q = _summing_exponent(p)
    X = fam.check_points(x)
    terms = np.abs(features(fam, X)[0]) ** q
    csum = np.concatenate([[0.0], np.cumsum(terms)])
    ladder = _ladder(fam.truncation)
    sums = csum[ladder]
    ratio = float("nan")
    if sums.size >= 3:
        prev = sums[-2] - sums[-3]
        if prev != 0:
            ratio = float((sums[-1] - sums[-2]) / prev)
    return TailReport(q, ladder, sums, ratio, _tail_bound(fam, X[0], q))


def kernel_tail_bound(fam: ExpansionFamily, x, y) -> float:
    """Bound on ``|K(x, y) - K_N(x, y)|`` by Cauchy-Schwarz over the discarded terms."""
    X = fam.check_points(x)[0]
    Y = fam.check_points(y)[0]
    return math.sqrt(_tail_bound(fam, X, 2.0) * _tail_bound(fam, Y, 2.0))


def _envelope_remainder(fam: ExpansionFamily, axis: int, x: float, L: int,
                        tab: np.ndarray, q: float) -> float:
    """Upper bound on ``sum_{n > L} |g_n(x)|^q`` for one axis (``tab`` has ``L+2`` columns)."""
    if fam.kind == "min-integral":
        return (math.sqrt(2.0) / math.pi ** 2) ** q * L ** (1.0 - 2.0 * q) / (2.0 * q - 1.0)
    if fam.kind in _GAUSSIAN_EIGEN_KINDS:
        w, _, beta = gaussian_shape_constants(fam.theta[axis])
        c = _CRAMER * math.sqrt(beta) * math.exp(0.5 * x * x) * (1.0 - w)
        return c ** q * w ** (q * L) / (1.0 - w ** q)
    # ratio families: |g_{n+1}/g_n| is non-increasing in n
    if fam.kind == "gaussian-taylor":
        r = math.sqrt(2.0 / (L + 2)) * fam.theta[axis] * abs(x)
    elif fam.eta == "exp":
        r = abs(x) / math.sqrt(L + 2)
    elif fam.eta == "geometric":
        r = math.sqrt(fam.eta_param) * abs(x)
    else:
        return float("nan")
    if r >= 1.0:
        return float("inf")
    return abs(tab[L + 1]) ** q / (1.0 - r ** q)


def _tail_bound(fam: ExpansionFamily, x: np.ndarray, q: float) -> float:
    if fam.kind == "custom" or (fam.kind == "power-series" and fam.eta == "coefficients"):
        return float("nan")
    enum = fam.enumeration
    nmax = enum.max_per_axis()
    L = int(4 * nmax.max() + 64)
    for k in range(fam.dim):
        if fam.kind == "gaussian-taylor":
            L = max(L, int(8 * (fam.theta[k] * x[k]) ** 2) + 16)
    tabs, rems = [], []
    for k in range(fam.dim):
        tab = np.abs(_axis_table(fam, k, x[k : k + 1], L + 1)[0])
        rems.append(_envelope_remainder(fam, k, float(x[k]), L, tab, q))
        t = tab[: L + 1] ** q
        t[: fam.base] = 0.0
        tabs.append(t)
    totals = [float(np.sum(t)) + r for t, r in zip(tabs, rems)]
    remainder = 0.0
    for k in range(fam.dim):
        others = math.prod(totals[j] for j in range(fam.dim) if j != k)
        remainder += rems[k] * others
    if fam.truncation == 0:
        return math.prod(totals)
    if fam.dim == 1:
        return float(np.sum(tabs[0][int(nmax[0]) + 1 :])) + remainder
    # levels of the l1 norm beyond the last retained index, plus the
    # unretained entries sharing its level
    last = enum.indices[-1]
    s_last = int(last.sum())
    level = tabs[0]
    for t in tabs[1:]:
        level = np.convolve(level, t)
    beyond = float(np.sum(level[s_last + 1 :]))
    idx = enum.indices
    kept = int(np.sum(idx.sum(axis=1) == s_last))
    same = 0.0
    for j, comp in enumerate(_compositions(s_last, fam.dim, fam.base)):
        if j < kept:
            continue
        if max(comp) > L:
            continue
        same += math.prod(tabs[k][comp[k]] for k in range(fam.dim))
    return beyond + same + remainder
