"""Regularized empirical risk over p-norm spaces and its finite-dimensional solver.

For data ``(x_k, y_k)`` and a parameter vector ``c`` the candidate function is

    f_c = sum_n u_n |u_n|^{q-2} phi_n,     u_n = sum_k c_k phi_n(x_k),

and the risk is ``T_p(c) = (1/N) sum_k L(y_k, eta_k(c)) + R((eta(c)^T c)^{1/p})``
with ``eta_k(c) = f_c(x_k)``.  The minimiser over ``c`` gives the minimiser
over the whole space.

The gradient factors as ``grad T_p(c) = J(c) r(c)`` where ``J`` is the
(symmetric, positive semidefinite) Jacobian of ``eta`` and

    r(c) = (1/N) L'(y, eta(c)) + p alpha(c) c

is the fixed-point residual; ``r(c) = 0`` is the optimality condition in
function space.  :func:`solve` drives ``r`` to zero with Newton steps on
``r`` safeguarded by an Armijo line search on ``T_p``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np
from scipy.special import expit

from . import expansion, rkbs
from .expansion import ExpansionFamily
from .rkbs import SequenceFunction, conjugate

__all__ = [
    "Loss",
    "Regularizer",
    "TrainConfig",
    "RepresenterModel",
    "IllConditionedWarning",
    "ConvergenceWarning",
    "schedule_exponent",
    "eta",
    "eta_jacobian",
    "risk",
    "grad_risk",
    "fixed_point_residual",
    "function_risk",
    "solve",
    "homotopy",
    "predict",
    "classify",
]

LOSS_KINDS = ("hinge", "smoothed-hinge", "least-square", "logistic")


class IllConditionedWarning(UserWarning):
    pass


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Loss:
    """Loss ``L(y, t)`` as a function of the prediction ``t``.

    ``smoothed-hinge`` replaces the kink of ``max(0, 1 - y t)`` by a quadratic
    on ``|y t - 1| < delta``, which makes it continuously differentiable.
    """

    kind: str = "least-square"
    delta: float = 1e-2

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss {self.kind!r}")
        if self.kind == "smoothed-hinge" and self.delta <= 0:
            raise ValueError("smoothing width must be positive")

    @property
    def differentiable(self) -> bool:
        return self.kind != "hinge"

    def value(self, y, t):
        y = np.asarray(y, dtype=float)
        t = np.asarray(t, dtype=float)
        if self.kind == "least-square":
            return 0.5 * (y - t) ** 2
        if self.kind == "logistic":
            return np.logaddexp(0.0, -y * t)
        z = y * t
        if self.kind == "hinge":
            return np.maximum(0.0, 1.0 - z)
        d = self.delta
        band = np.clip(z, 1 - d, 1 + d)
        return np.where(z <= 1 - d, 1.0 - z,
                        np.where(z >= 1 + d, 0.0, (1.0 + d - band) ** 2 / (4 * d)))

    def derivative(self, y, t):
        y = np.asarray(y, dtype=float)
        t = np.asarray(t, dtype=float)
        if self.kind == "least-square":
            return t - y
        if self.kind == "logistic":
            return -y * expit(-y * t)
        if self.kind == "hinge":
            raise ValueError("hinge loss is not differentiable; use smoothed-hinge")
        z = y * t
        d = self.delta
        return y * np.where(z <= 1 - d, -1.0, np.where(z >= 1 + d, 0.0, -(1.0 + d - z) / (2 * d)))

    def second(self, y, t):
        y = np.asarray(y, dtype=float)
        t = np.asarray(t, dtype=float)
        if self.kind == "least-square":
            return np.ones_like(t)
        if self.kind == "logistic":
            s = expit(-y * t)
            return y * y * s * (1.0 - s)
        if self.kind == "hinge":
            raise ValueError("hinge loss is not differentiable; use smoothed-hinge")
        z = y * t
        d = self.delta
        return np.where(np.abs(z - 1.0) < d, y * y / (2 * d), 0.0)


@dataclass(frozen=True)
class Regularizer:
    """``R(r) = sigma r^power`` with ``sigma > 0`` and ``power >= 1``."""

    sigma: float = 1e-2
    power: float = 2.0

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.power < 1:
            raise ValueError("power must be >= 1")

    def value(self, r: float) -> float:
        return self.sigma * r ** self.power

    def derivative(self, r: float) -> float:
        if self.power == 1:
            return self.sigma
        return self.sigma * self.power * r ** (self.power - 1.0)

    def second(self, r: float) -> float:
        if self.power == 1:
            return 0.0
        if self.power == 2:
            return 2.0 * self.sigma
        return self.sigma * self.power * (self.power - 1.0) * r ** (self.power - 2.0)


def schedule_exponent(m: int) -> float:
    """Typical exponent ``p_m = 2m / (2m - 1)``."""
    if m < 1:
        raise ValueError("schedule entries must be positive integers")
    return 2.0 * m / (2.0 * m - 1.0)


@dataclass(frozen=True)
class TrainConfig:
    loss: Loss = field(default_factory=Loss)
    reg: Regularizer = field(default_factory=Regularizer)
    p: float = 2.0
    max_iters: int = 500
    grad_tol: float = 1e-10
    # bound on the fixed-point residual r(c); also rules out the spurious
    # stationary point c = 0 that appears for q > 2
    residual_tol: float = 1e-9
    shrink: float = 0.5
    initial_step: float = 1.0
    armijo: float = 1e-4
    max_backtracks: int = 60
    schedule: tuple = (1,)
    seed: int = 0
    truncation: Optional[int] = None
    cond_cap: float = 1e16

    def __post_init__(self):
        if not 1 < self.p <= 2:
            raise ValueError("training exponent p must lie in (1, 2]")
        if self.grad_tol <= 0 or self.residual_tol <= 0:
            raise ValueError("tolerances must be positive")
        if not 0 < self.shrink < 1:
            raise ValueError("backtracking shrink factor must lie in (0, 1)")

    @property
    def q(self) -> float:
        return conjugate(self.p)


@dataclass(frozen=True, eq=False)
class RepresenterModel:
    """A trained predictor ``s_p`` held through its data points and parameters ``c``."""

    family: ExpansionFamily
    X: np.ndarray
    c: np.ndarray
    p: float
    risk: float
    norm: float
    iterations: int = 0
    converged: bool = True
    grad_norm: float = 0.0
    residual_norm: float = 0.0
    loss: Loss = field(default_factory=Loss)
    reg: Regularizer = field(default_factory=Regularizer)
    history: tuple = ()

    @property
    def q(self) -> float:
        return conjugate(self.p)

    @property
    def function(self) -> SequenceFunction:
        return rkbs.representer_to_function(self.c, self.X, self.q, self.family)[0]

    @property
    def beta(self) -> np.ndarray:
        """Coefficients of the norming functional, ``c / ||a||_p^{p-1}``."""
        if self.norm == 0:
            return np.zeros_like(self.c)
        return self.c / self.norm ** (self.p - 1.0)


# --------------------------------------------------------------------------
# objective
# --------------------------------------------------------------------------


class _Objective:
    """Risk, gradient and residual for fixed data, with the term matrix cached."""

    def __init__(self, family, X, Y, config: TrainConfig):
        self.family = family
        self.X = family.check_points(X)
        self.Y = np.asarray(Y, dtype=float).ravel()
        if self.Y.size != self.X.shape[0]:
            raise ValueError("one target per data point required")
        self.N = self.X.shape[0]
        self.Phi = expansion.features(family, self.X).T  # terms x points
        self.cfg = config
        self.p = config.p
        self.q = config.q

    def state(self, c):
        c = np.asarray(c, dtype=float)
        a, u = rkbs.representer_coefficients(c, self.Phi, self.q)
        eta = self.Phi.T @ a
        s = float(eta @ c)
        if s < -1e-12 * max(1.0, float(np.abs(eta).max(initial=0.0) * np.abs(c).max(initial=0.0))):
            raise FloatingPointError(f"eta(c)^T c = {s} is negative")
        return u, eta, max(s, 0.0)

    def risk(self, c) -> float:
        _, eta, s = self.state(c)
        data = float(np.mean(self.cfg.loss.value(self.Y, eta))) if self.N else 0.0
        return data + self.cfg.reg.value(s ** (1.0 / self.p))

    def weights(self, u):
        if self.q == 2:
            return np.ones_like(u)
        w = np.zeros_like(u)
        nz = u != 0
        w[nz] = np.abs(u[nz]) ** (self.q - 2.0)
        return w

    def jacobian(self, u) -> np.ndarray:
        return (self.q - 1.0) * (self.Phi.T * self.weights(u)) @ self.Phi

    def alpha(self, c, s) -> float:
        if not np.any(c) or s == 0:
            return 0.0
        return s ** (-1.0 / self.q) * self.cfg.reg.derivative(s ** (1.0 / self.p)) / self.p

    def gradient(self, c):
        c = np.asarray(c, dtype=float)
        u, eta, s = self.state(c)
        J = self.jacobian(u)
        lt = self.cfg.loss.derivative(self.Y, eta)
        al = self.alpha(c, s)
        return J @ lt / self.N + al * (eta + J.T @ c)

    def full(self, c):
        """Everything one solver step needs."""
        c = np.asarray(c, dtype=float)
        u, eta, s = self.state(c)
        J = self.jacobian(u)
        lt = self.cfg.loss.derivative(self.Y, eta)
        al = self.alpha(c, s)
        grad = J @ lt / self.N + al * (eta + J.T @ c)
        resid = lt / self.N + self.p * al * c
        return dict(u=u, eta=eta, s=s, J=J, lt=lt, alpha=al, grad=grad, resid=resid)

    def residual_jacobian(self, c, st) -> np.ndarray:
        """Derivative of the fixed-point residual ``r(c)``."""
        ltt = self.cfg.loss.second(self.Y, st["eta"])
        G = (ltt[:, None] * st["J"]) / self.N + self.p * st["alpha"] * np.eye(self.N)
        s = st["s"]
        if s > 0 and np.any(c):
            reg = self.cfg.reg
            r = s ** (1.0 / self.p)
            dalpha_ds = (-(1.0 / self.q) * s ** (-1.0 / self.q - 1.0) * reg.derivative(r)
                         + s ** (-1.0 / self.q) * reg.second(r) * s ** (1.0 / self.p - 1.0) / self.p) / self.p
            G = G + self.p * np.outer(c, dalpha_ds * self.q * st["eta"])
        return G

    def zero_is_optimal(self) -> bool:
        """Subgradient test at ``f = 0``: ``||(1/N) Phi L'(y, 0)||_q <= R'(0)``."""
        lt = self.cfg.loss.derivative(self.Y, np.zeros(self.N))
        v = self.Phi @ lt / self.N
        dual = float(np.sum(np.abs(v) ** self.q) ** (1.0 / self.q)) if v.size else 0.0
        r0 = self.cfg.reg.derivative(0.0)
        return dual <= r0 + 1e-14 or dual == 0.0


def _objective(family, X, Y, config) -> _Objective:
    if config.truncation is not None and config.truncation != family.truncation:
        family = family.with_truncation(config.truncation)
    return _Objective(family, X, Y, config)


def eta(c, X, q: float, family: ExpansionFamily) -> np.ndarray:
    """Values of ``f_c`` at the data points."""
    X = family.check_points(X)
    Phi = expansion.features(family, X).T
    a, _ = rkbs.representer_coefficients(c, Phi, q)
    return Phi.T @ a


def eta_jacobian(c, X, q: float, family: ExpansionFamily) -> np.ndarray:
    """``d eta_j / d c_k = (q-1) sum_n phi_n(x_j) phi_n(x_k) |u_n|^{q-2}``."""
    cfg = TrainConfig(p=conjugate(q))
    obj = _Objective(family, X, np.zeros(np.asarray(c).size), cfg)
    u = obj.Phi @ np.asarray(c, dtype=float)
    return obj.jacobian(u)


def risk(c, family: ExpansionFamily, X, Y, config: TrainConfig) -> float:
    """Regularized empirical risk ``T_p(c)``; any loss kind, exact hinge included."""
    return _objective(family, X, Y, config).risk(c)


def grad_risk(c, family: ExpansionFamily, X, Y, config: TrainConfig) -> np.ndarray:
    if not config.loss.differentiable:
        raise ValueError("gradient needs a differentiable loss; use smoothed-hinge")
    return _objective(family, X, Y, config).gradient(c)


def fixed_point_residual(c, family: ExpansionFamily, X, Y, config: TrainConfig) -> np.ndarray:
    if not config.loss.differentiable:
        raise ValueError("residual needs a differentiable loss; use smoothed-hinge")
    return _objective(family, X, Y, config).full(c)["resid"]


def function_risk(f: SequenceFunction, X, Y, loss: Loss, reg: Regularizer,
                  p: Optional[float] = None) -> float:
    """``(1/N) sum_k L(y_k, f(x_k)) + R(||f||_p)`` evaluated through the function itself.

    ``p`` overrides the exponent of the norm, e.g. ``p=1`` scores a p-norm
    solution under the 1-norm risk.
    """
    if p is not None:
        f = SequenceFunction(f.coeffs, p, f.family, f.side)
    Y = np.asarray(Y, dtype=float).ravel()
    vals = np.atleast_1d(rkbs.evaluate(f, X)) if Y.size else np.zeros(0)
    data = float(np.mean(loss.value(Y, vals))) if Y.size else 0.0
    return data + reg.value(rkbs.norm(f))


# --------------------------------------------------------------------------
# solver
# --------------------------------------------------------------------------


def _line_search(obj: _Objective, c, t0, slope, d, cfg):
    step = cfg.initial_step
    for _ in range(cfg.max_backtracks):
        trial = c + step * d
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                val = obj.risk(trial)
        except (FloatingPointError, OverflowError):
            val = math.inf
        if np.isfinite(val) and val < t0 and val <= t0 + cfg.armijo * step * slope:
            return trial, val
        step *= cfg.shrink
    return None, t0


def _polish(obj: _Objective, c, t0, d, rnorm, cfg):
    slack = 16 * np.finfo(float).eps * max(abs(t0), 1e-300)
    step = 1.0
    for _ in range(8):
        trial = c + step * d
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                val = obj.risk(trial)
                r = float(np.abs(obj.full(trial)["resid"]).max())
        except (FloatingPointError, OverflowError):
            val, r = math.inf, math.inf
        if val <= t0 + slack and r < 0.5 * rnorm:
            return True, trial, val
        step *= cfg.shrink
    return False, c, t0


def _cold_start(obj: _Objective, t0):
    """Scale scan along the steepest function-space direction out of ``c = 0``.

    Near the origin the risk moves like ``|c|^(q-1)``, so for large ``q`` a
    backtracking search from a unit step rarely lands in the window where the
    decrease is visible at working precision.
    """
    d = -obj.cfg.loss.derivative(obj.Y, np.zeros(obj.N)) / obj.N
    best_c, best_t = np.zeros(obj.N), t0
    if not np.any(d):
        return best_c, best_t
    for k in range(-60, 61):
        trial = math.ldexp(1.0, k) * d
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                val = obj.risk(trial)
        except (FloatingPointError, OverflowError):
            continue
        if np.isfinite(val) and val < best_t:
            best_c, best_t = trial, val
    return best_c, best_t


def _newton_direction(obj, c, st):
    G = obj.residual_jacobian(c, st)
    try:
        with np.errstate(all="ignore"):
            d = np.linalg.solve(G, -st["resid"])
    except np.linalg.LinAlgError:
        d = np.linalg.lstsq(G, -st["resid"], rcond=None)[0]
    return d if np.all(np.isfinite(d)) else None


def _check_conditioning(obj: _Objective, cfg: TrainConfig) -> float:
    A = obj.Phi.T @ obj.Phi
    if A.size == 0:
        return 1.0
    cond = float(np.linalg.cond(A))
    if not np.isfinite(cond) or cond > cfg.cond_cap:
        warnings.warn(f"kernel sections are numerically dependent (Gram condition {cond:.3g})",
                      IllConditionedWarning, stacklevel=3)
    return cond


def solve(family: ExpansionFamily, X, Y, config: TrainConfig, c0=None) -> RepresenterModel:
    """Minimise ``T_p(c)`` and return the trained model.

    Each step tries the Newton direction for the fixed-point residual, then
    the residual itself, then the plain negative gradient, accepting the first
    that passes an Armijo test on ``T_p``; the risk therefore decreases
    monotonically.  The run converges when both ``||grad T_p||_inf <=
    grad_tol`` and ``||r(c)||_inf <= residual_tol``.  On hitting
    ``max_iters`` the best iterate is returned with ``converged=False``.
    """
    if not config.loss.differentiable:
        raise ValueError("training needs a differentiable loss; use smoothed-hinge")
    obj = _objective(family, X, Y, config)
    rkbs.check_distinct(obj.X)
    if obj.N:
        _check_conditioning(obj, config)
    c = np.zeros(obj.N) if c0 is None else np.array(c0, dtype=float).ravel()
    if c.size != obj.N:
        raise ValueError("initial parameters must have one entry per data point")
    t = obj.risk(c)
    history = [t]
    if obj.N and obj.zero_is_optimal():
        # the problem is convex, so the subgradient test certifies f = 0
        if np.any(c):
            c = np.zeros(obj.N)
            t = obj.risk(c)
            history.append(t)
    elif c0 is None and obj.N:
        c, t = _cold_start(obj, t)
        if t < history[0]:
            history.append(t)
    converged = False
    it = 0
    st = obj.full(c) if obj.N else None
    while obj.N:
        gnorm = float(np.abs(st["grad"]).max())
        rnorm = float(np.abs(st["resid"]).max())
        if gnorm <= config.grad_tol and rnorm <= config.residual_tol:
            converged = True
            break
        if not np.any(c) and obj.zero_is_optimal():
            converged = True
            break
        if it >= config.max_iters:
            break
        it += 1
        g = st["grad"]
        moved = False
        candidates = []
        dn = _newton_direction(obj, c, st)
        if dn is not None:
            candidates.append(dn)
        candidates.append(-st["resid"])
        candidates.append(-g)
        for d in candidates:
            slope = float(g @ d)
            if slope > 0:
                continue
            trial, val = _line_search(obj, c, t, slope, d, config)
            if trial is not None:
                c, t = trial, val
                moved = True
                break
        if not moved and dn is not None:
            # risk changes are below roundoff; accept a Newton step that keeps
            # the risk within a few ulps and shrinks the residual
            moved, c, t = _polish(obj, c, t, dn, rnorm, config)
        if not moved:
            # no direction decreases the risk at working precision
            converged = gnorm <= config.grad_tol and rnorm <= max(config.residual_tol, 1e3 * config.grad_tol)
            break
        history.append(t)
        st = obj.full(c)
    if obj.N == 0:
        converged = True
        gnorm = rnorm = 0.0
    else:
        gnorm = float(np.abs(st["grad"]).max())
        rnorm = float(np.abs(st["resid"]).max())
    if not converged:
        warnings.warn(f"solver stopped after {it} iterations without convergence "
                      f"(|grad|={gnorm:.3g}, |r|={rnorm:.3g})", ConvergenceWarning, stacklevel=2)
    s = obj.state(c)[2] if obj.N else 0.0
    return RepresenterModel(
        family=obj.family, X=obj.X.copy(), c=c.copy(), p=config.p, risk=t,
        norm=s ** (1.0 / config.p), iterations=it, converged=converged,
        grad_norm=gnorm, residual_norm=rnorm, loss=config.loss, reg=config.reg,
        history=tuple(history),
    )


def homotopy(family: ExpansionFamily, X, Y, config: TrainConfig,
             schedule: Optional[Sequence[int]] = None) -> List[RepresenterModel]:
    """Solve at ``p_m = 2m/(2m-1)`` for each ``m`` of the schedule, warm-starting each stage.

    The optimal risks are non-decreasing along the schedule and bounded by the
    optimal 1-norm risk; the last model approximates the 1-norm learner.
    """
    schedule = tuple(config.schedule if schedule is None else schedule)
    if not schedule:
        raise ValueError("empty homotopy schedule")
    if any(int(m) != m or m < 1 for m in schedule):
        raise ValueError("schedule entries must be positive integers")
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("schedule must be strictly increasing")
    models = []
    c = None
    for m in schedule:
        cfg = replace(config, p=schedule_exponent(int(m)))
        model = solve(family, X, Y, cfg, c0=c)
        models.append(model)
        c = model.c
    return models


def predict(model: RepresenterModel, x):
    """Value of the trained function at ``x`` (scalar for one point)."""
    return rkbs.evaluate(model.function, x)


def classify(model: RepresenterModel, x):
    """Decision rule ``sign(s(x))`` with ties at 0 sent to +1."""
    v = np.atleast_1d(predict(model, x))
    lab = np.where(v >= 0, 1, -1)
    return int(lab[0]) if lab.size == 1 else lab
