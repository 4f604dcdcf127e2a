"""Functions in the p-norm spaces spanned by an expansion family.

A left-sided function is ``f = sum_n a_n phi_n`` with norm ``||a||_p``; a
right-sided one is ``g = sum_n b_n phi'_n``.  Functions are exact finite
objects: coefficients past the stored vector are zero and the truncated tail
of the family is never represented.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import expansion
from .expansion import ExpansionFamily
from .quadrature import QuadratureRule, default_rule

__all__ = [
    "SequenceFunction",
    "DualPairingResult",
    "conjugate",
    "norm",
    "evaluate",
    "dual_pair",
    "kernel_section",
    "gateaux",
    "representer_coefficients",
    "representer_to_function",
    "integral_operator",
    "check_distinct",
]


def conjugate(p: float) -> float:
    """Conjugate exponent ``q`` with ``1/p + 1/q = 1``."""
    if p < 1:
        raise ValueError(f"exponent {p} below 1")
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


@dataclass(frozen=True, eq=False)
class SequenceFunction:
    coeffs: np.ndarray
    p: float
    family: ExpansionFamily
    side: str = "left"

    def __post_init__(self):
        a = np.array(self.coeffs, dtype=float).ravel()
        if a.size > self.family.truncation:
            raise ValueError(
                f"{a.size} coefficients exceed truncation {self.family.truncation}"
            )
        if self.side not in ("left", "right"):
            raise ValueError("side must be 'left' or 'right'")
        if self.p < 1:
            raise ValueError("exponent must be >= 1")
        a.setflags(write=False)
        object.__setattr__(self, "coeffs", a)

    def padded(self) -> np.ndarray:
        out = np.zeros(self.family.truncation)
        out[: self.coeffs.size] = self.coeffs
        return out

    def __call__(self, x):
        return evaluate(self, x)


@dataclass(frozen=True)
class DualPairingResult:
    value: float
    truncation_used: int


def norm(f: SequenceFunction) -> float:
    a = np.abs(f.coeffs)
    if a.size == 0:
        return 0.0
    if math.isinf(f.p):
        return float(a.max())
    if f.p == 1:
        return float(np.sum(a))
    return float(np.sum(a ** f.p) ** (1.0 / f.p))


def evaluate(f: SequenceFunction, x) -> np.ndarray | float:
    """Point values ``sum_n a_n phi_n(x)``; a scalar for a single point."""
    X = f.family.check_points(x)
    n = f.coeffs.size
    if n == 0:
        vals = np.zeros(X.shape[0])
    else:
        feats = expansion.features(f.family, X, prime=(f.side == "right"))[:, :n]
        vals = feats @ f.coeffs
    return float(vals[0]) if vals.size == 1 else vals


def dual_pair(f: SequenceFunction, g: SequenceFunction) -> DualPairingResult:
    """Dual bilinear pairing ``<f, g> = sum_n a_n b_n`` of a left and a right function."""
    if f.family != g.family:
        raise ValueError("functions belong to different families")
    if f.side != "left" or g.side != "right":
        raise ValueError("pairing takes a left-sided and a right-sided function")
    if not math.isclose(conjugate(f.p), g.p, rel_tol=1e-12):
        raise ValueError(f"exponents {f.p} and {g.p} are not conjugate")
    n = min(f.coeffs.size, g.coeffs.size)
    return DualPairingResult(float(np.dot(f.coeffs[:n], g.coeffs[:n])), n)


def kernel_section(family: ExpansionFamily, x, p: float = 2.0) -> SequenceFunction:
    """``K(x, .)`` as a right-sided function, paired against left functions of exponent ``p``."""
    coeffs = expansion.features(family, x)[0]
    return SequenceFunction(coeffs, conjugate(p), family, "right")


def _signed_power(a: np.ndarray, r: float) -> np.ndarray:
    """``a |a|^r`` with the value 0 at ``a = 0`` (continuous extension for r > -1)."""
    out = np.zeros_like(a)
    nz = a != 0
    out[nz] = a[nz] * np.abs(a[nz]) ** r
    return out


def gateaux(f: SequenceFunction) -> SequenceFunction:
    """Gateaux derivative of the norm, ``a |a|^{p-2} / ||a||_p^{p-1}``, on the dual side.

    Returns the zero function at ``f = 0``.
    """
    if not 1 < f.p < math.inf:
        raise ValueError("Gateaux derivative needs 1 < p < inf")
    q = conjugate(f.p)
    nrm = norm(f)
    if nrm == 0:
        return SequenceFunction(np.zeros_like(f.coeffs), q, f.family, "right")
    # normalise first so large coefficient vectors do not overflow
    b = _signed_power(f.coeffs / nrm, f.p - 2.0)
    return SequenceFunction(b, q, f.family, "right")


def check_distinct(X: np.ndarray) -> None:
    X = np.asarray(X, dtype=float)
    if X.shape[0] < 2:
        return
    _, first, counts = np.unique(X, axis=0, return_index=True, return_counts=True)
    if np.any(counts > 1):
        row = X[first[np.argmax(counts > 1)]]
        raise ValueError(f"duplicate data point {row.tolist()}")


def representer_coefficients(c, Phi: np.ndarray, q: float):
    """``(a, u)`` with ``u = Phi c`` and ``a = u |u|^{q-2}``; ``Phi`` is terms x points."""
    u = Phi @ np.asarray(c, dtype=float)
    a = u.copy() if q == 2 else _signed_power(u, q - 2.0)
    return a, u


def representer_to_function(c, X, q: float, family: ExpansionFamily):
    """Reconstruct ``s = sum_n u_n |u_n|^{q-2} phi_n`` with ``u_n = sum_k c_k phi_n(x_k)``.

    Returns
    -------
    f : SequenceFunction
        The function with exponent ``p = q / (q - 1)``.
    norm : float
        ``(sum_n |u_n|^q)^{1/p}``, computed from ``u`` directly.
    """
    if q < 2 or math.isinf(q):
        raise ValueError("representer reconstruction needs 2 <= q < inf")
    X = family.check_points(X)
    c = np.asarray(c, dtype=float).ravel()
    if c.size != X.shape[0]:
        raise ValueError("one coefficient per data point required")
    check_distinct(X)
    Phi = expansion.features(family, X).T
    a, u = representer_coefficients(c, Phi, q)
    p = conjugate(q)
    nrm = float(np.sum(np.abs(u) ** q) ** (1.0 / p))
    return SequenceFunction(a, p, family, "left"), nrm


def integral_operator(family: ExpansionFamily, zeta: Callable, rule: Optional[QuadratureRule] = None,
                      p: float = 2.0) -> SequenceFunction:
    """Coefficients ``b_n = int phi_n zeta dmu`` of the image of ``zeta`` under the kernel operator.

    ``zeta`` must accept an ``(n, d)`` array of points and return ``n`` values.
    The result is right-sided so that ``<f, I zeta> = int f zeta dmu``.
    """
    rule = default_rule(family) if rule is None else rule
    if rule.measure != family.reference_measure:
        raise ValueError(
            f"{rule.measure} rule does not match the {family.reference_measure} measure of the family"
        )
    nodes = np.asarray(rule.nodes, dtype=float).reshape(-1, family.dim)
    try:
        family.check_points(nodes)
    except expansion.DomainError as exc:
        raise ValueError(f"quadrature nodes leave the family domain: {exc}") from None
    vals = np.asarray(zeta(nodes), dtype=float).ravel()
    b = expansion.features(family, nodes).T @ (rule.weights * vals)
    return SequenceFunction(b, conjugate(p), family, "right")
