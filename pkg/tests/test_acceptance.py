"""Acceptance criteria, one test per criterion.

Each test records a ``PASS``/``FAIL`` line with the measured quantity and the
elapsed time; the lines are printed in the terminal summary (see conftest) and
when the module is run as a script.
"""

import math
import time

import numpy as np
import pytest
from numpy.polynomial.legendre import leggauss

from pnorm_rkbs import cli, fileio, learn, quadrature, rkbs, sparse
from pnorm_rkbs import expansion as ex
from pnorm_rkbs.learn import Loss, Regularizer, TrainConfig
from pnorm_rkbs.rkbs import SequenceFunction

LINES = []


def _record(number, title, ok, detail, elapsed, limit=None):
    timing = f"{elapsed:.2f}s" + (f" (limit {limit:g}s)" if limit is not None else "")
    ok = ok and (limit is None or elapsed < limit)
    LINES.append(f"{'PASS' if ok else 'FAIL'} criterion {number:>2} {title}: {detail}; {timing}")
    return ok


def _builtins():
    return {
        "min-integral": ex.min_integral(truncation=128),
        "min-integral-2d": ex.min_integral(dim=2, truncation=200),
        "gaussian-eigen": ex.gaussian_eigen(1.0, truncation=96),
        "gaussian-integral": ex.gaussian_integral([0.7, 1.3], truncation=120),
        "gaussian-taylor": ex.gaussian_taylor(0.8, truncation=96),
        "power-exp": ex.power_series("exp", truncation=40),
        "power-geometric": ex.power_series("geometric", theta=0.5, truncation=80),
    }


def _points(fam, n, rng, clip=3.0):
    lo = np.maximum(np.asarray(fam.lower), -clip)
    hi = np.minimum(np.asarray(fam.upper), clip)
    return lo + (hi - lo) * rng.random((n, fam.dim))


def _unit_output(c, X, q, fam):
    top = float(np.abs(learn.eta(c, X, q, fam)).max())
    return c * top ** (-1.0 / (q - 1.0))


# trained models shared between criteria; the norm criterion inspects all of them
_MODELS = {}


def _ridge_models():
    if "ridge" not in _MODELS:
        fam = ex.min_integral(truncation=128)
        rng = np.random.default_rng(3)
        runs = []
        for N in (1, 2, 5, 10, 15, 20):
            X = rng.random((N, 1))
            Y = rng.standard_normal(N)
            sigma = 10.0 ** rng.uniform(-4, -1)
            cfg = TrainConfig(loss=Loss("least-square"), reg=Regularizer(sigma, 2.0), p=2.0)
            runs.append((X, Y, sigma, cfg, learn.solve(fam, X, Y, cfg)))
        _MODELS["ridge"] = (fam, runs)
    return _MODELS["ridge"]


def _homotopy_runs():
    if "homotopy" not in _MODELS:
        fam = ex.min_integral(truncation=128)
        cfg = TrainConfig(loss=Loss("least-square"), reg=Regularizer(1e-3, 2.0))
        runs = []
        start = time.perf_counter()
        for seed in range(5):
            rng = np.random.default_rng(100 + seed)
            X = rng.random((6, 1))
            Y = rng.standard_normal(6)
            runs.append(learn.homotopy(fam, X, Y, cfg, schedule=range(1, 13)))
        _MODELS["homotopy"] = (fam, cfg, runs, time.perf_counter() - start)
    return _MODELS["homotopy"]


def _l1_report():
    if "l1" not in _MODELS:
        fam = ex.min_integral(truncation=64)
        rng = np.random.default_rng(0)
        X = rng.random((4, 1))
        Y = rng.standard_normal(4)
        start = time.perf_counter()
        rep = sparse.svm_equivalence_check(fam, X, Y, 1e-2, schedule=tuple(range(1, 17)))
        _MODELS["l1"] = (fam, X, rep, time.perf_counter() - start)
    return _MODELS["l1"]


# ---------------------------------------------------------------------------


def test_criterion_01_reproducing_identity():
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst = 0.0
    for fam in (ex.min_integral(truncation=64), ex.power_series("exp", truncation=30)):
        grid = np.linspace(fam.lower[0], fam.upper[0], 100)
        sections = [rkbs.kernel_section(fam, x) for x in grid]
        for _ in range(100):
            p = float(rng.uniform(1.05, 4.0))
            f = SequenceFunction(rng.standard_normal(fam.truncation), p, fam)
            values = rkbs.evaluate(f, grid[:, None])
            for x_sec, fx in zip(sections, values):
                k = SequenceFunction(x_sec.coeffs, rkbs.conjugate(p), fam, "right")
                worst = max(worst, abs(rkbs.dual_pair(f, k).value - fx))
    elapsed = time.perf_counter() - start
    ok = _record(1, "reproducing identity", worst <= 1e-12, f"max |<f,K(x,.)> - f(x)| = {worst:.2e} <= 1e-12",
                 elapsed, 5)
    assert ok


def test_criterion_02_gateaux_duality():
    rng = np.random.default_rng(2)
    fam = ex.min_integral(truncation=24)
    start = time.perf_counter()
    norm_err = pair_err = fd_err = 0.0
    for p in (4 / 3, 1.5, 2.0, 3.0):
        q = rkbs.conjugate(p)
        for _ in range(1000):
            a = rng.standard_normal(fam.truncation) * rng.uniform(0.1, 10.0)
            f = SequenceFunction(a, p, fam)
            g = rkbs.gateaux(f)
            nf = rkbs.norm(f)
            norm_err = max(norm_err, abs(float(np.sum(np.abs(g.coeffs) ** q) ** (1 / q)) - 1.0))
            pair_err = max(pair_err, abs(rkbs.dual_pair(f, g).value - nf) / nf)
            d = rng.standard_normal(fam.truncation)

            def phi(t):
                return rkbs.norm(SequenceFunction(a + t * d, p, fam))

            h = 1e-6 * nf / np.linalg.norm(d)
            d1 = (phi(h) - phi(-h)) / (2 * h)
            d2 = (phi(h / 2) - phi(-h / 2)) / h
            rich = (4 * d2 - d1) / 3
            exact = float(d @ g.coeffs)
            fd_err = max(fd_err, abs(rich - exact))
    elapsed = time.perf_counter() - start
    ok = norm_err <= 1e-12 and pair_err <= 1e-12 and fd_err <= 1e-6
    ok = _record(2, "Gateaux duality", ok,
                 f"| ||iota f||_q - 1 | = {norm_err:.1e}, rel pairing error {pair_err:.1e}, "
                 f"directional FD error {fd_err:.1e}", elapsed, 5)
    assert ok


def test_criterion_03_kernel_ridge_oracle():
    start = time.perf_counter()
    fam, runs = _ridge_models()
    c_err = r_err = 0.0
    for X, Y, sigma, cfg, model in runs:
        N = Y.size
        A = ex.gram(fam, X)
        c = np.linalg.solve(A + 2 * N * sigma * np.eye(N), Y)
        c_err = max(c_err, float(np.abs(model.c - c).max()))
        r_err = max(r_err, abs(model.risk - learn.risk(c, fam, X, Y, cfg)))
    elapsed = time.perf_counter() - start
    ok = c_err <= 1e-6 and r_err <= 1e-8 and all(r[-1].converged for r in runs)
    ok = _record(3, "kernel ridge oracle", ok,
                 f"N in 1..20: max |c - c_oracle| = {c_err:.1e} <= 1e-6, risk error {r_err:.1e} <= 1e-8",
                 elapsed, 10)
    assert ok


def test_criterion_04_gradient_check():
    fam = ex.min_integral(truncation=64)
    rng = np.random.default_rng(4)
    start = time.perf_counter()
    worst = 0.0
    count = 0
    for p in (4 / 3, 1.5, 2.0):
        for kind in ("smoothed-hinge", "least-square"):
            cfg = TrainConfig(loss=Loss(kind, 0.1), reg=Regularizer(1e-2, 2.0), p=p)
            for _ in range(50):
                N = int(rng.integers(2, 9))
                X = rng.random((N, 1))
                Y = rng.standard_normal(N)
                if kind == "smoothed-hinge":
                    Y = np.where(Y >= 0, 1.0, -1.0)
                c = _unit_output(rng.standard_normal(N), X, cfg.q, fam)
                g = learn.grad_risk(c, fam, X, Y, cfg)
                h = 1e-6
                fd = np.array([(learn.risk(c + h * e, fam, X, Y, cfg) - learn.risk(c - h * e, fam, X, Y, cfg))
                               / (2 * h) for e in np.eye(N)])
                worst = max(worst, float(np.linalg.norm(g - fd) / np.linalg.norm(g)))
                count += 1
    elapsed = time.perf_counter() - start
    ok = _record(4, "gradient check", worst <= 1e-5,
                 f"{count} instances, max relative error {worst:.1e} <= 1e-5", elapsed, 30)
    assert ok


def test_criterion_05_representer_norm():
    start = time.perf_counter()
    models = [r[-1] for r in _ridge_models()[1]]
    for run in _homotopy_runs()[2]:
        models.extend(run)
    models.extend(_l1_report()[2].models)
    worst = 0.0
    for m in models:
        worst = max(worst, abs(m.norm - rkbs.norm(m.function)))
    elapsed = time.perf_counter() - start
    ok = _record(5, "representer norm formula", worst <= 1e-10,
                 f"{len(models)} trained models, max |stored - computed| = {worst:.1e} <= 1e-10", elapsed)
    assert ok


def test_criterion_06_homotopy_monotone():
    fam, cfg, runs, elapsed = _homotopy_runs()
    tol = 10 * cfg.grad_tol
    worst = max(float(-np.diff([m.risk for m in run]).min()) for run in runs)
    converged = all(m.converged for run in runs for m in run)
    nontrivial = all(np.any(run[-1].c) for run in runs)
    ok = worst <= tol and converged and nontrivial
    ok = _record(6, "homotopy monotonicity", ok,
                 f"5 instances, m = 1..12, largest decrease {max(worst, 0.0):.1e} <= {tol:.0e}, "
                 f"all stages converged: {converged}", elapsed, 60)
    assert ok


def test_criterion_07_l1_equivalence():
    fam, X, rep, elapsed = _l1_report()
    ok = rep.gap <= 1e-3 and rep.subgradient_residual <= 1e-8 and rep.ista.converged
    ok = _record(7, "l1 equivalence", ok,
                 f"N=4, M=64: |T_1(homotopy m=16) - ISTA| = {rep.gap:.1e} <= 1e-3, "
                 f"subgradient residual {rep.subgradient_residual:.1e} <= 1e-8", elapsed, 60)
    assert ok


def test_criterion_08_kernel_identities():
    rng = np.random.default_rng(8)
    start = time.perf_counter()
    fams = _builtins()
    exact = True
    for fam in fams.values():
        for x in _points(fam, 4, rng):
            for y in _points(fam, 4, rng):
                exact &= ex.kstar_eval(fam, x, [y]) == ex.kernel_eval(fam, x, y)
    fact = 0.0
    grid = np.linspace(-0.9, 0.9, 5)
    for eta in ("exp", "geometric"):
        fam = ex.power_series(eta, theta=0.5, truncation=64)
        for x in grid:
            for y in grid:
                ys = [y, 0.5 * y, -0.8]
                fact = max(fact, abs(ex.kstar_factorized(fam, x, ys) - ex.kstar_eval(fam, x, ys)))
    excess = -math.inf
    for trunc in (16, 64, 256):
        fam = ex.min_integral(truncation=trunc)
        for x, y in rng.random((25, 2)):
            diff = abs(ex.kernel_eval(fam, x, y) - ex.kernel_eval(fam, x, y, closed_form=True))
            excess = max(excess, diff - ex.kernel_tail_bound(fam, x, y))
    gsum = 0.0
    for theta in (0.3, 1.0, 2.5):
        w = ex.gaussian_shape_constants(theta)[0]
        for n in (0, 1, 5, 20, 100):
            gsum = max(gsum, abs(1.0 - ex.gaussian_eigenvalue_sum(theta, n) - w ** n))
    elapsed = time.perf_counter() - start
    ok = exact and fact <= 1e-10 and excess <= 0 and gsum <= 1e-12
    ok = _record(8, "kernel identities", ok,
                 f"K*1 bit-exact: {bool(exact)}, factorized vs direct {fact:.1e} <= 1e-10, "
                 f"closed form excess over tail bound {excess:.1e} <= 0, eigenvalue sum {gsum:.1e} <= 1e-12",
                 elapsed, 5)
    assert ok


def test_criterion_09_integral_operator():
    start = time.perf_counter()
    fam = ex.min_integral(truncation=128)
    rule = quadrature.gauss_legendre([0.0], [1.0], 256)

    def e1(P):
        return math.sqrt(2) * np.sin(math.pi * P[:, 0])

    g = rkbs.integral_operator(fam, e1, rule)
    xs = np.linspace(0, 1, 101)[:, None]
    eig = float(np.abs(rkbs.evaluate(g, xs) - math.pi ** -4 * e1(xs)).max())

    rng = np.random.default_rng(9)
    t, w = leggauss(256)
    nodes = 0.5 * (t + 1)[:, None]
    pair = 0.0
    for _ in range(20):
        f = SequenceFunction(rng.standard_normal(64) / np.arange(1, 65), 2.0, fam)
        freq = rng.uniform(0, 6, 3)
        amp = rng.standard_normal(3)

        def zeta(P):
            return np.cos(np.outer(P[:, 0], freq)) @ amp

        lhs = 0.5 * float(np.sum(w * rkbs.evaluate(f, nodes) * zeta(nodes)))
        rhs = float(f.coeffs @ rkbs.integral_operator(fam, zeta, rule).coeffs[:64])
        pair = max(pair, abs(lhs - rhs))
    elapsed = time.perf_counter() - start
    ok = eig <= 1e-8 and pair <= 1e-8
    ok = _record(9, "integral operator", ok,
                 f"|I_K e_1 - pi^-4 e_1| = {eig:.1e} <= 1e-8, pairing identity {pair:.1e} <= 1e-8", elapsed, 5)
    assert ok


def test_criterion_10_gram_psd():
    rng = np.random.default_rng(10)
    start = time.perf_counter()
    worst = math.inf
    for fam in _builtins().values():
        for _ in range(200):
            X = _points(fam, int(rng.integers(1, 9)), rng)
            G = ex.gram(fam, X)
            worst = min(worst, float(np.linalg.eigvalsh(0.5 * (G + G.T)).min()))
    elapsed = time.perf_counter() - start
    ok = _record(10, "Gram PSD", worst >= -1e-10,
                 f"7 kernels x 200 sets, smallest eigenvalue {worst:.1e} >= -1e-10", elapsed, 10)
    assert ok


def test_criterion_11_cli(tmp_path, capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(11)
    data = tmp_path / "train.csv"
    data.write_text("x,y\n" + "".join(f"{float(x)!r},{float(y)!r}\n" for x, y in zip(rng.random(8), rng.standard_normal(8))))
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("kernel: {kind: min-integral, truncation: 64}\nregularizer: {sigma: 0.01, power: 1}\n")
    codes = []
    for name in ("a.yaml", "b.yaml"):
        codes.append(cli.main(["train", "--config", str(cfg), "--data", str(data), "--out",
                               str(tmp_path / name), "--schedule", "1:6", "--seed", "7"]))
    same = (tmp_path / "a.yaml").read_bytes() == (tmp_path / "b.yaml").read_bytes()
    model, meta = fileio.load_model(str(tmp_path / "a.yaml"))
    text = fileio.save_model(str(tmp_path / "c.yaml"), model, tuple(meta["schedule"]),
                             fileio.load_config(str(cfg)).with_overrides(seed=7).train)
    round_trip = text == (tmp_path / "a.yaml").read_text()
    again, _ = fileio.load_model(str(tmp_path / "c.yaml"))
    fields = (np.array_equal(again.c, model.c) and np.array_equal(again.X, model.X)
              and again.p == model.p and again.risk == model.risk and again.norm == model.norm)
    verify_code = cli.main(["verify"])
    capsys.readouterr()
    elapsed = time.perf_counter() - start
    ok = codes == [0, 0] and same and round_trip and fields and verify_code == 0
    ok = _record(11, "CLI determinism and round trip", ok,
                 f"train exits {codes}, byte-identical: {same}, save(load) identical: {round_trip}, "
                 f"fields exact: {fields}, verify exit {verify_code}", elapsed)
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
