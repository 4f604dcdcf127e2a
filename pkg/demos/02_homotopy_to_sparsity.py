"""From ridge regression to sparse 1-norm learning.

Training at ``p_m = 2m/(2m-1)`` for ``m = 1, 2, ...`` walks from the kernel
ridge solution (``m = 1``) towards the 1-norm learner.  Each stage is warm
started from the previous one; the optimal risk can only rise, and the
coefficient sequence concentrates on fewer terms.  The last stage is compared
with a direct weighted-l1 solve in eigen-coordinates.
"""

import numpy as np

from pnorm_rkbs import expansion as ex
from pnorm_rkbs import learn, rkbs, sparse

rng = np.random.default_rng(1)
fam = ex.min_integral(truncation=64)
X = np.sort(rng.random(8))[:, None]
Y = np.sin(2 * np.pi * X[:, 0]) + 0.1 * rng.standard_normal(8)
sigma = 1e-2

cfg = learn.TrainConfig(loss=learn.Loss("least-square"), reg=learn.Regularizer(sigma, 1.0))
models = learn.homotopy(fam, X, Y, cfg, schedule=range(1, 17))

print(" m      p       risk          T_1(s_p)     terms > 1e-3 max|a|")
for m, model in zip(range(1, 17), models):
    a = model.function.coeffs
    t1 = learn.function_risk(model.function, X, Y, cfg.loss, cfg.reg, p=1.0)
    big = int(np.sum(np.abs(a) > 1e-3 * np.abs(a).max()))
    print(f"{m:2d}  {model.p:.4f}  {model.risk:.10f}  {t1:.10f}  {big:3d}")

rep = sparse.svm_equivalence_check(fam, X, Y, sigma, models=models)
print(f"\nweighted-l1 optimum        {rep.ista_objective:.10f} ({np.count_nonzero(rep.ista.xi)} nonzeros)")
print(f"1-norm risk of stage m=16  {rep.homotopy_objective:.10f}")
print(f"gap {rep.gap:.2e}, subgradient residual {rep.subgradient_residual:.1e}")

xs = np.linspace(0, 1, 5)[:, None]
f1 = sparse.xi_to_function(sparse.build_design(fam, X, Y, sigma), rep.ista.xi)
print("\n  x     s_(p16)(x)   l1 solution")
for x, u, v in zip(xs[:, 0], learn.predict(models[-1], xs), rkbs.evaluate(f1, xs)):
    print(f"{x:.2f}  {u: .6f}   {v: .6f}")
