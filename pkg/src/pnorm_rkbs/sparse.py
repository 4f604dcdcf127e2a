"""Weighted-l1 least squares in eigen-coordinates, solved by proximal gradient.

Writing a function of a Mercer-eigen family as ``f = sum_n xi_n e_n`` turns
1-norm least-square learning with ``R(r) = sigma r`` into

    min_xi  (1/2N) ||y - E xi||^2 + sigma sum_n w_n |xi_n|,   w_n = lambda_n^{-1/2},

with ``E[k, n] = e_n(x_k)``.  The bridge to expansion coefficients is
``a_n = xi_n / lambda_n^{1/2}``, so ``||a||_1 = sum_n w_n |xi_n|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import expansion, learn
from .expansion import ExpansionFamily
from .rkbs import SequenceFunction

__all__ = [
    "SparseProblem",
    "IstaConfig",
    "IstaResult",
    "EquivalenceReport",
    "WEIGHTINGS",
    "build_design",
    "soft_threshold",
    "spectral_norm",
    "optimality_residual",
    "ista_solve",
    "xi_to_function",
    "function_to_xi",
    "svm_equivalence_check",
]

# "inverse-sqrt" is w_n = lambda_n^{-1/2}; "literal" is w_n = lambda_n^{1/2},
# kept only for comparison runs
WEIGHTINGS = ("inverse-sqrt", "literal")


@dataclass(frozen=True, eq=False)
class SparseProblem:
    E: np.ndarray
    w: np.ndarray
    y: np.ndarray
    sigma: float
    lam: np.ndarray
    family: Optional[ExpansionFamily] = None
    weighting: str = "inverse-sqrt"

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.E.shape != (self.y.size, self.w.size):
            raise ValueError("design, weights and targets have inconsistent shapes")
        if not np.all(np.isfinite(self.E)):
            raise ValueError("design matrix has non-finite entries")

    @property
    def N(self) -> int:
        return self.E.shape[0]

    @property
    def M(self) -> int:
        return self.E.shape[1]

    def smooth_gradient(self, xi) -> np.ndarray:
        if self.N == 0:
            return np.zeros(self.M)
        return self.E.T @ (self.E @ xi - self.y) / self.N

    def objective(self, xi) -> float:
        xi = np.asarray(xi, dtype=float)
        fit = 0.5 * float(np.sum((self.y - self.E @ xi) ** 2)) / self.N if self.N else 0.0
        return fit + self.sigma * float(np.sum(self.w * np.abs(xi)))

    def with_targets(self, y, sigma: Optional[float] = None) -> "SparseProblem":
        return SparseProblem(self.E, self.w, np.asarray(y, dtype=float).ravel(),
                             self.sigma if sigma is None else sigma, self.lam,
                             self.family, self.weighting)


def build_design(family: ExpansionFamily, X, y=None, sigma: float = 1.0,
                 weighting: str = "inverse-sqrt") -> SparseProblem:
    """Eigenfunction design ``E[k, n] = e_n(x_k)`` with the l1 weights of the family.

    ``y`` defaults to zeros.  Families without Mercer eigen-data are rejected.
    """
    if weighting not in WEIGHTINGS:
        raise ValueError(f"unknown weighting {weighting!r}")
    if not family.has_eigen_data:
        raise ValueError(f"{family.kind} family carries no eigen-data")
    lam, efun = expansion.eigen_data(family)
    if np.any(lam <= 0):
        n = int(np.argmax(lam <= 0))
        raise ValueError(f"eigenvalue {n} underflows to zero; lower the truncation")
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        E = np.zeros((0, family.truncation))
    else:
        E = efun(X)
    w = lam ** -0.5 if weighting == "inverse-sqrt" else lam ** 0.5
    y = np.zeros(E.shape[0]) if y is None else np.asarray(y, dtype=float).ravel()
    return SparseProblem(E, w, y, float(sigma), lam, family, weighting)


def soft_threshold(z, t):
    """``sign(z) max(|z| - t, 0)``, elementwise."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("threshold must be nonnegative")
    z = np.asarray(z, dtype=float)
    out = np.sign(z) * np.maximum(np.abs(z) - t, 0.0)
    return float(out) if out.ndim == 0 else out


def spectral_norm(E: np.ndarray, iters: int = 50, seed: int = 0) -> float:
    """Estimate of ``||E^T E||_2`` by power iteration."""
    if E.size == 0:
        return 0.0
    v = np.random.default_rng(seed).standard_normal(E.shape[1])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        z = E.T @ (E @ v)
        est = float(np.linalg.norm(z))
        if est == 0.0:
            return 0.0
        v = z / est
    return est


def optimality_residual(problem: SparseProblem, xi) -> np.ndarray:
    """Per-coordinate violation of the subgradient conditions.

    ``|g_n + sigma w_n sign(xi_n)|`` where ``xi_n != 0`` and
    ``max(|g_n| - sigma w_n, 0)`` where ``xi_n = 0``, with ``g`` the gradient
    of the least-squares term.
    """
    xi = np.asarray(xi, dtype=float)
    g = problem.smooth_gradient(xi)
    sw = problem.sigma * problem.w
    return np.where(xi != 0, np.abs(g + sw * np.sign(xi)), np.maximum(np.abs(g) - sw, 0.0))


@dataclass(frozen=True)
class IstaConfig:
    step: Optional[float] = None  # default 0.9 N / ||E^T E||_2
    tol: float = 1e-8
    max_iters: int = 200000
    backtracking: bool = True
    accelerated: bool = False
    power_iters: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")
        if self.step is not None and self.step <= 0:
            raise ValueError("step must be positive")


@dataclass(frozen=True, eq=False)
class IstaResult:
    xi: np.ndarray
    objective: float
    iterations: int
    converged: bool
    residual: float = 0.0
    history: tuple = field(default=(), repr=False)


def ista_solve(problem: SparseProblem, config: Optional[IstaConfig] = None,
               accelerated: Optional[bool] = None, xi0=None) -> IstaResult:
    """Proximal gradient (ISTA, or FISTA with adaptive restart) on the weighted-l1 problem.

    Stops when every coordinate meets :func:`optimality_residual` ``<= tol``.
    With backtracking a step is shrunk until the quadratic upper model holds,
    so the plain ISTA objective never increases.
    """
    cfg = config or IstaConfig()
    fast = cfg.accelerated if accelerated is None else accelerated
    M = problem.M
    xi = np.zeros(M) if xi0 is None else np.array(xi0, dtype=float).ravel()
    if problem.N == 0:
        xi = np.zeros(M)
        return IstaResult(xi, problem.objective(xi), 0, True, 0.0, (problem.objective(xi),))
    if cfg.step is not None:
        step = cfg.step
    else:
        L = spectral_norm(problem.E, cfg.power_iters, cfg.seed) / problem.N
        step = 0.9 / L if L > 0 else 1.0
    sw = problem.sigma * problem.w
    obj = problem.objective(xi)
    history = [obj]
    z, tk = xi.copy(), 1.0
    res = float(optimality_residual(problem, xi).max())
    it = 0
    while res > cfg.tol and it < cfg.max_iters:
        it += 1
        base = z if fast else xi
        g = problem.smooth_gradient(base)
        while True:
            new = soft_threshold(base - step * g, step * sw)
            if not cfg.backtracking:
                break
            # the smooth term is quadratic, so the upper-model test reduces to
            # ||E d||^2 / N <= ||d||^2 / step without cancellation
            diff = new - base
            Ed = problem.E @ diff
            if float(Ed @ Ed) / problem.N <= float(diff @ diff) / step:
                break
            step *= 0.5
        new_obj = problem.objective(new)
        if fast:
            if new_obj > obj and tk > 1.0:
                # restart the momentum from the current iterate
                z, tk = xi.copy(), 1.0
                continue
            t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * tk * tk))
            z = new + ((tk - 1.0) / t_next) * (new - xi)
            tk = t_next
        xi, obj = new, new_obj
        history.append(obj)
        res = float(optimality_residual(problem, xi).max())
    return IstaResult(xi, obj, it, res <= cfg.tol, res, tuple(history))


def xi_to_function(problem: SparseProblem, xi) -> SequenceFunction:
    """1-norm function ``sum_n xi_n e_n`` expressed in the expansion coefficients ``a = xi / lambda^{1/2}``."""
    if problem.family is None:
        raise ValueError("problem has no family attached")
    a = np.asarray(xi, dtype=float) / np.sqrt(problem.lam)
    return SequenceFunction(a, 1.0, problem.family, "left")


def function_to_xi(problem: SparseProblem, f: SequenceFunction) -> np.ndarray:
    return f.padded() * np.sqrt(problem.lam)


@dataclass(frozen=True, eq=False)
class EquivalenceReport:
    ista_objective: float
    homotopy_objective: float
    gap: float
    subgradient_residual: float
    ista: IstaResult
    models: tuple = field(default=(), repr=False)

    def passed(self, tol: float = 1e-3, opt_tol: float = 1e-8) -> bool:
        return self.gap <= tol and self.subgradient_residual <= opt_tol


def svm_equivalence_check(family: ExpansionFamily, X, Y, sigma: float, models=None,
                          schedule: Sequence[int] = tuple(range(1, 17)),
                          weighting: str = "inverse-sqrt",
                          train_config: Optional[learn.TrainConfig] = None,
                          ista_config: Optional[IstaConfig] = None) -> EquivalenceReport:
    """Compare the weighted-l1 optimum with the 1-norm risk of the homotopy's last model.

    ``models`` may hold a finished homotopy run; otherwise one is run with
    least-square loss and ``R(r) = sigma r`` over ``schedule``.
    """
    Y = np.asarray(Y, dtype=float).ravel()
    X = np.asarray(X, dtype=float)
    loss = learn.Loss("least-square")
    reg = learn.Regularizer(sigma, 1.0)
    if train_config is not None:
        if train_config.loss.kind != "least-square":
            raise ValueError("the l1 equivalence holds for least-square loss only")
        if train_config.reg.power != 1 or train_config.reg.sigma != sigma:
            raise ValueError("the l1 equivalence needs the linear regularizer sigma r")
    problem = build_design(family, X, Y, sigma, weighting)
    result = ista_solve(problem, ista_config)
    opt = float(optimality_residual(problem, result.xi).max()) if problem.M else 0.0
    if Y.size == 0:
        zero = learn.function_risk(SequenceFunction(np.zeros(0), 1.0, family), X, Y, loss, reg)
        return EquivalenceReport(result.objective, zero, abs(result.objective - zero), opt, result)
    if models is None:
        cfg = train_config or learn.TrainConfig(loss=loss, reg=reg)
        models = learn.homotopy(family, X, Y, cfg, schedule)
    models = tuple(models)
    last = models[-1]
    t1 = learn.function_risk(last.function, X, Y, loss, reg, p=1.0)
    return EquivalenceReport(result.objective, t1, abs(t1 - result.objective), opt, result, models)
