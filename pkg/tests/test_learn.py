import warnings
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pnorm_rkbs import expansion as ex
from pnorm_rkbs import learn, rkbs
from pnorm_rkbs.learn import Loss, Regularizer, TrainConfig

MIN = ex.min_integral(truncation=128)
LOSSES = ["least-square", "smoothed-hinge", "logistic"]


def _instance(seed, N=5, labels=False):
    rng = np.random.default_rng(seed)
    X = np.sort(rng.random(N))[:, None]
    Y = rng.standard_normal(N)
    if labels:
        Y = np.where(Y >= 0, 1.0, -1.0)
    return X, Y, rng


def _unit_output(c, X, q, fam=MIN):
    top = np.abs(learn.eta(c, X, q, fam)).max()
    return c * top ** (-1.0 / (q - 1.0))


def _fd(fun, c, h=1e-6):
    return np.array([(fun(c + h * e) - fun(c - h * e)) / (2 * h) for e in np.eye(c.size)])


# -- losses and regularizers ------------------------------------------------------


@pytest.mark.parametrize("kind", LOSSES + ["hinge"])
@given(t=st.floats(-5, 5), y=st.sampled_from([-1.0, 1.0, 0.3]))
def test_loss_nonnegative(kind, t, y):
    assert Loss(kind).value(y, t) >= 0.0


@pytest.mark.parametrize("kind", LOSSES)
@given(t=st.floats(-3, 3), y=st.sampled_from([-1.0, 1.0]))
def test_loss_derivative_matches_finite_difference(kind, t, y):
    loss = Loss(kind, 0.1)
    h = 1e-6
    fd = (loss.value(y, t + h) - loss.value(y, t - h)) / (2 * h)
    # the smoothed hinge is only C^1 at the band edges, where central differences err by up to h / (4 delta)
    assert float(loss.derivative(y, t)) == pytest.approx(float(fd), abs=h / (4 * 0.1) + 1e-8)


@pytest.mark.parametrize("kind", LOSSES + ["hinge"])
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), lam=st.floats(0, 1), y=st.sampled_from([-1.0, 1.0]))
def test_loss_convex(kind, a, b, lam, y):
    loss = Loss(kind)
    mid = loss.value(y, lam * a + (1 - lam) * b)
    assert mid <= lam * loss.value(y, a) + (1 - lam) * loss.value(y, b) + 1e-12


def test_smoothed_hinge_pieces():
    loss = Loss("smoothed-hinge", 0.1)
    assert loss.value(1.0, 0.5) == pytest.approx(0.5)
    assert loss.value(1.0, 1.2) == 0.0
    assert loss.value(1.0, 1.0) == pytest.approx(0.1 ** 2 / 0.4)
    # continuity at the band edges
    for z in (0.9, 1.1):
        assert loss.value(1.0, z - 1e-12) == pytest.approx(loss.value(1.0, z + 1e-12), abs=1e-10)


def test_hinge_not_differentiable():
    with pytest.raises(ValueError):
        Loss("hinge").derivative(1.0, 0.0)
    with pytest.raises(ValueError):
        Loss("nope")


def test_regularizer():
    r = Regularizer(0.5, 1.0)
    assert r.value(2.0) == 1.0 and r.derivative(0.0) == 0.5
    r2 = Regularizer(0.5, 3.0)
    assert r2.derivative(2.0) == pytest.approx(6.0)
    with pytest.raises(ValueError):
        Regularizer(0.0)
    with pytest.raises(ValueError):
        Regularizer(1.0, 0.5)


def test_schedule_exponent():
    assert learn.schedule_exponent(1) == 2.0
    assert learn.schedule_exponent(2) == pytest.approx(4 / 3)
    assert learn.schedule_exponent(16) == pytest.approx(32 / 31)


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(p=1.0)
    with pytest.raises(ValueError):
        TrainConfig(p=2.5)
    with pytest.raises(ValueError):
        TrainConfig(grad_tol=0.0)
    assert TrainConfig(p=1.5).q == pytest.approx(3.0)


# -- eta, risk, gradient ------------------------------------------------------------


def test_eta_zero_and_single_point():
    X = [[0.3]]
    assert learn.eta([0.0], X, 3.0, MIN)[0] == 0.0
    assert learn.eta([1.0], X, 2.0, MIN)[0] == pytest.approx(ex.kernel_eval(MIN, 0.3, 0.3), rel=1e-14)


def test_eta_matches_reconstructed_function():
    X, _, rng = _instance(1, 3)
    c = rng.standard_normal(3)
    f, _ = rkbs.representer_to_function(c, X, 4.0, MIN)
    np.testing.assert_allclose(learn.eta(c, X, 4.0, MIN), rkbs.evaluate(f, X), rtol=1e-13)


@given(seed=st.integers(0, 2 ** 31), q=st.sampled_from([2.0, 3.0, 4.0]))
def test_eta_jacobian_matches_finite_difference(seed, q):
    X, _, rng = _instance(seed, 4)
    c = _unit_output(rng.standard_normal(4), X, q)
    J = learn.eta_jacobian(c, X, q, MIN)
    fd = np.array([(learn.eta(c + 1e-6 * e, X, q, MIN) - learn.eta(c - 1e-6 * e, X, q, MIN)) / 2e-6
                   for e in np.eye(4)]).T
    np.testing.assert_allclose(J, fd, rtol=1e-5, atol=1e-8 * np.abs(J).max())
    np.testing.assert_allclose(J, J.T, rtol=1e-12)


def test_risk_at_zero():
    cfg = TrainConfig(loss=Loss("least-square"), reg=Regularizer(0.1, 2.0))
    assert learn.risk([0.0], MIN, [[0.4]], [1.0], cfg) == 0.5
    hinge = TrainConfig(loss=Loss("hinge"), reg=Regularizer(0.1, 1.0))
    X, Y, _ = _instance(2, 4, labels=True)
    assert learn.risk(np.zeros(4), MIN, X, Y, hinge) == 1.0


@pytest.mark.parametrize("kind", LOSSES + ["hinge"])
@given(seed=st.integers(0, 2 ** 31), p=st.sampled_from([4 / 3, 1.5, 2.0]),
       power=st.sampled_from([1.0, 2.0, 3.0]))
def test_risk_matches_function_path(kind, seed, p, power):
    X, Y, rng = _instance(seed, 4, labels=kind != "least-square")
    cfg = TrainConfig(loss=Loss(kind), reg=Regularizer(0.05, power), p=p)
    c = _unit_output(rng.standard_normal(4), X, cfg.q)
    f, _ = rkbs.representer_to_function(c, X, cfg.q, MIN)
    ref = learn.function_risk(f, X, Y, cfg.loss, cfg.reg)
    assert learn.risk(c, MIN, X, Y, cfg) == pytest.approx(ref, rel=1e-10, abs=1e-12)


def test_gradient_reduces_to_ridge():
    X, Y, rng = _instance(3, 5)
    sigma = 0.03
    cfg = TrainConfig(loss=Loss("least-square"), reg=Regularizer(sigma, 2.0), p=2.0)
    A = ex.gram(MIN, X)
    for _ in range(3):
        c = rng.standard_normal(5) * 30
        ref = -A @ (Y - A @ c) / 5 + 2 * sigma * A @ c
        np.testing.assert_allclose(learn.grad_risk(c, MIN, X, Y, cfg), ref, rtol=1e-10, atol=1e-14)


def test_gradient_at_zero():
    X, Y, _ = _instance(4, 4)
    cfg = TrainConfig(loss=Loss("least-square"), reg=Regularizer(0.1, 1.0), p=2.0)
    A = ex.gram(MIN, X)
    np.testing.assert_allclose(learn.grad_risk(np.zeros(4), MIN, X, Y, cfg), A @ (-Y) / 4, rtol=1e-12)
    # for q > 2 the Jacobian vanishes at the origin
    cfg43 = replace(cfg, p=4 / 3)
    assert not np.any(learn.grad_risk(np.zeros(4), MIN, X, Y, cfg43))
    r = learn.fixed_point_residual(np.zeros(4), MIN, X, Y, cfg43)
    np.testing.assert_allclose(r, -Y / 4)


@pytest.mark.parametrize("kind", LOSSES)
@given(seed=st.integers(0, 2 ** 31), p=st.sampled_from([4 / 3, 1.5, 2.0]),
       power=st.sampled_from([1.0, 2.0]))
def test_gradient_matches_finite_difference(kind, seed, p, power):
    X, Y, rng = _instance(seed, 4, labels=kind != "least-square")
    cfg = TrainConfig(loss=Loss(kind), reg=Regularizer(0.01, power), p=p)
    c = _unit_output(rng.standard_normal(4), X, cfg.q)
    g = learn.grad_risk(c, MIN, X, Y, cfg)
    fd = _fd(lambda v: learn.risk(v, MIN, X, Y, cfg), c)
    assert np.linalg.norm(g - fd) <= 1e-5 * np.linalg.norm(g)


def test_gradient_rejects_hinge():
    with pytest.raises(ValueError):
        learn.grad_risk([1.0], MIN, [[0.5]], [1.0], TrainConfig(loss=Loss("hinge")))


# -- solver ---------------------------------------------------------------------------


@pytest.mark.parametrize("N", [1, 2, 7, 20])
def test_solve_matches_ridge_oracle(N):
    X, Y, _ = _instance(N, N)
    sigma = 0.01
    cfg = TrainConfig(loss=Loss("least-square"), reg=Regularizer(sigma, 2.0), p=2.0)
    model = learn.solve(MIN, X, Y, cfg)
    A = ex.gram(MIN, X)
    c = np.linalg.solve(A + 2 * N * sigma * np.eye(N), Y)
    assert model.converged
    np.testing.assert_allclose(model.c, c, atol=1e-6)
    assert abs(model.risk - learn.risk(c, MIN, X, Y, cfg)) <= 1e-8


def test_solve_zero_targets():
    X, _, _ = _instance(5, 4)
    cfg = TrainConfig(loss=Loss("least-square"), reg=Regularizer(0.1, 2.0), p=4 / 3)
    model = learn.solve(MIN, X, np.zeros(4), cfg)
    assert model.converged and not np.any(model.c) and model.risk == 0.0


def test_solve_large_sigma_linear_returns_zero():
    X, Y, _ = _instance(6, 4)
    cfg = TrainConfig(loss=Loss("least-square"), reg=Regularizer(10.0, 1.0), p=1.5)
    model = learn.solve(MIN, X, Y, cfg)
    assert model.converged and not np.any(model.c)


def test_solve_beats_random_search():
    X = np.array([[0.25], [0.7]])
    Y = np.array([1.0, -0.5])
    cfg = TrainConfig(loss=Loss("least-square"), reg=Regularizer(1e-3, 2.0), p=4 / 3)
    model = learn.solve(MIN, X, Y, cfg)
    rng = np.random.default_rng(0)
    scale = 2 * np.abs(model.c).max()
    best = min(learn.risk(c, MIN, X, Y, cfg) for c in rng.uniform(-scale, scale, (200, 2)))
    assert model.risk <= best


@pytest.mark.parametrize("kind", LOSSES)
@pytest.mark.parametrize("p", [4 / 3, 1.5, 2.0])
def test_solve_properties(kind, p):
    X, Y, _ = _instance(11, 6, labels=kind != "least-square")
    cfg = TrainConfig(loss=Loss(kind), reg=Regularizer(1e-2, 2.0), p=p)
    model = learn.solve(MIN, X, Y, cfg)
    assert model.converged
    # monotone within a few ulps (see solver notes)
    h = np.array(model.history)
    assert np.all(np.diff(h) <= 16 * np.finfo(float).eps * np.abs(h[:-1]))
    g = learn.grad_risk(model.c, MIN, X, Y, cfg)
    assert np.abs(g).max() <= cfg.grad_tol
    f = model.function
    s = learn.eta(model.c, X, cfg.q, MIN) @ model.c
    assert abs(model.norm - rkbs.norm(f)) <= 1e-10
    assert abs(model.norm - s ** (1 / p)) <= 1e-10


def test_representer_duality():
    X, Y, _ = _instance(12, 5)
    cfg = TrainConfig(loss=Loss("least-square"), reg=Regularizer(1e-2, 2.0), p=1.5)
    model = learn.solve(MIN, X, Y, cfg)
    iota = rkbs.gateaux(model.function)
    span = ex.features(MIN, X).T @ model.beta
    np.testing.assert_allclose(iota.coeffs, span, rtol=1e-9, atol=1e-12)


def test_cross_exponent_monotonicity():
    X, Y, _ = _instance(13, 6)
    risks = []
    for p in (1.1, 4 / 3, 1.5, 1.75, 2.0):
        cfg = TrainConfig(loss=Loss("least-square"), reg=Regularizer(1e-2, 1.0), p=p)
        risks.append(learn.solve(MIN, X, Y, cfg).risk)
    assert np.all(np.diff(risks) <= 10 * 1e-10)


def test_solve_preconditions():
    cfg = TrainConfig()
    with pytest.raises(ValueError, match="duplicate"):
        learn.solve(MIN, [[0.2], [0.2]], [1.0, 2.0], cfg)
    with pytest.raises(ValueError):
        learn.solve(MIN, [[0.2]], [1.0], replace(cfg, loss=Loss("hinge")))


def test_iteration_cap_flags_non_convergence():
    X, Y, _ = _instance(14, 5)
    cfg = TrainConfig(loss=Loss("logistic"), reg=Regularizer(1e-3, 2.0), p=1.2, max_iters=1)
    with pytest.warns(learn.ConvergenceWarning):
        model = learn.solve(MIN, X, np.sign(Y), cfg)
    assert not model.converged and model.iterations == 1
    assert model.risk <= learn.risk(np.zeros(5), MIN, X, np.sign(Y), cfg)


def test_ill_conditioned_warning():
    X = np.array([[0.5], [0.5 + 1e-9], [0.7]])
    with pytest.warns(learn.IllConditionedWarning):
        learn.solve(ex.min_integral(truncation=32), X, [1.0, 1.0, 0.0],
                    TrainConfig(cond_cap=1e6, max_iters=5))


# -- homotopy ------------------------------------------------------------------------


def test_homotopy_head_equals_plain_solve():
    X, Y, _ = _instance(15, 5)
    cfg = TrainConfig(loss=Loss("least-square"), reg=Regularizer(1e-2, 1.0))
    models = learn.homotopy(MIN, X, Y, cfg, schedule=[1, 2, 3])
    plain = learn.solve(MIN, X, Y, replace(cfg, p=2.0))
    np.testing.assert_array_equal(models[0].c, plain.c)
    assert [m.p for m in models] == [2.0, 4 / 3, 1.2]


@given(seed=st.integers(0, 2 ** 31))
def test_homotopy_monotone(seed):
    X, Y, _ = _instance(seed, 5)
    cfg = TrainConfig(loss=Loss("least-square"), reg=Regularizer(1e-2, 1.0))
    models = learn.homotopy(MIN, X, Y, cfg, schedule=range(1, 9))
    risks = np.array([m.risk for m in models])
    assert all(m.converged for m in models)
    assert np.all(np.diff(risks) >= -10 * cfg.grad_tol)


def test_homotopy_bounded_by_one_norm_risk():
    X, Y, _ = _instance(16, 4)
    cfg = TrainConfig(loss=Loss("least-square"), reg=Regularizer(1e-2, 1.0))
    models = learn.homotopy(MIN, X, Y, cfg, schedule=range(1, 9))
    for m in models:
        t1 = learn.function_risk(m.function, X, Y, cfg.loss, cfg.reg, p=1.0)
        assert t1 >= models[-1].risk - 1e-12


def test_homotopy_schedule_validation():
    cfg = TrainConfig()
    for bad in ([], [2, 1], [0, 1], [1, 1.5]):
        with pytest.raises(ValueError):
            learn.homotopy(MIN, [[0.5]], [1.0], cfg, schedule=bad)


# -- prediction -----------------------------------------------------------------------


def test_predict_zero_model():
    model = learn.RepresenterModel(MIN, np.array([[0.3]]), np.zeros(1), 2.0, 0.0, 0.0)
    assert learn.predict(model, 0.6) == 0.0
    assert learn.classify(model, 0.6) == 1


def test_predict_single_kernel_section():
    model = learn.RepresenterModel(MIN, np.array([[0.3]]), np.ones(1), 2.0, 0.0, 0.0)
    for x in (0.1, 0.3, 0.9):
        assert learn.predict(model, x) == pytest.approx(ex.kernel_eval(MIN, 0.3, x), rel=1e-14)


def test_predict_matches_reconstruction():
    X, Y, _ = _instance(17, 5)
    model = learn.solve(MIN, X, Y, TrainConfig(p=1.5))
    xs = np.linspace(0, 1, 7)[:, None]
    np.testing.assert_array_equal(learn.predict(model, xs), rkbs.evaluate(model.function, xs))
    labels = learn.classify(model, xs)
    np.testing.assert_array_equal(labels, np.where(learn.predict(model, xs) >= 0, 1, -1))


def test_predict_out_of_domain():
    model = learn.RepresenterModel(MIN, np.array([[0.3]]), np.ones(1), 2.0, 0.0, 0.0)
    with pytest.raises(ex.DomainError):
        learn.predict(model, 1.5)


@pytest.mark.parametrize("power", [1.0, 2.0])
def test_cold_start_at_large_q(power):
    # near c = 0 the risk moves like |c|^(q-1); the solver must still leave the origin
    X, Y, _ = _instance(13, 6, labels=True)
    cfg = TrainConfig(loss=Loss("smoothed-hinge", 0.05), reg=Regularizer(1e-4, power), p=1.1)
    assert not learn._objective(MIN, X, Y, cfg).zero_is_optimal()
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        model = learn.solve(MIN, X, Y, cfg)
    assert model.converged and np.any(model.c)
    assert model.risk < learn.risk(np.zeros(6), MIN, X, Y, cfg)


def test_warm_start_jumps_to_certified_zero():
    X, Y, rng = _instance(20, 4)
    cfg = TrainConfig(loss=Loss("least-square"), reg=Regularizer(10.0, 1.0), p=4 / 3)
    model = learn.solve(MIN, X, Y, cfg, c0=rng.standard_normal(4))
    assert model.converged and not np.any(model.c)
