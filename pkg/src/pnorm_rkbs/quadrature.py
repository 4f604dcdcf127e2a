"""Tensor-product quadrature rules for the reference measures of the families."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.polynomial.hermite import hermgauss
from numpy.polynomial.legendre import leggauss

__all__ = ["QuadratureRule", "gauss_legendre", "gauss_hermite", "default_rule"]


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray  # (n, d)
    weights: np.ndarray  # (n,)
    measure: str  # "lebesgue" or "gaussian"

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, np.asarray(values, dtype=float)))


def _tensor(axes_nodes, axes_weights):
    nodes = np.array(list(itertools.product(*axes_nodes)), dtype=float)
    weights = np.array([np.prod(w) for w in itertools.product(*axes_weights)], dtype=float)
    return nodes, weights


def gauss_legendre(lower, upper, n: int = 256) -> QuadratureRule:
    """Gauss-Legendre rule with ``n`` nodes per axis on the box ``[lower, upper]``."""
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    t, w = leggauss(n)
    axes_n = [0.5 * (hi - lo) * t + 0.5 * (hi + lo) for lo, hi in zip(lower, upper)]
    axes_w = [0.5 * (hi - lo) * w for lo, hi in zip(lower, upper)]
    nodes, weights = _tensor(axes_n, axes_w)
    return QuadratureRule(nodes, weights, "lebesgue")


def gauss_hermite(dim: int = 1, n: int = 256, half_width: Optional[float] = None) -> QuadratureRule:
    """Rule for the Gaussian probability measure with density ``pi^{-d/2} e^{-|x|^2}``.

    Nodes outside ``[-half_width, half_width]^d`` are dropped; their weights
    are below ``e^{-half_width^2}``.
    """
    t, w = hermgauss(n)
    w = w / np.sqrt(np.pi)
    if half_width is not None:
        keep = np.abs(t) <= half_width
        t, w = t[keep], w[keep]
    nodes, weights = _tensor([t] * dim, [w] * dim)
    return QuadratureRule(nodes, weights, "gaussian")


def default_rule(family, n: Optional[int] = None) -> QuadratureRule:
    """Rule matching the family's reference measure (256 nodes per axis in 1-d, else 64)."""
    if n is None:
        n = 256 if family.dim == 1 else 64
    if family.reference_measure == "gaussian":
        return gauss_hermite(family.dim, n, half_width=float(family.upper[0]))
    return gauss_legendre(family.lower, family.upper, n)
