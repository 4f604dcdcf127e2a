"""Binary classification with a smoothed hinge loss.

Two classes on [0, 1] are separated by a wavy boundary; labels are predicted
by the sign of the trained function (a score of exactly 0 counts as +1).
Train and test error are reported for a few exponents ``p``.
"""

import numpy as np

from pnorm_rkbs import expansion as ex
from pnorm_rkbs import learn

rng = np.random.default_rng(2)


def sample(n):
    x = rng.random(n)
    y = np.where(np.sin(3 * np.pi * x) + 0.3 * rng.standard_normal(n) >= 0, 1.0, -1.0)
    return x[:, None], y


Xtr, Ytr = sample(40)
Xte, Yte = sample(400)
fam = ex.min_integral(truncation=128)
hinge = learn.Loss("hinge")

for p in (2.0, 1.5, 4 / 3, 1.1):
    cfg = learn.TrainConfig(loss=learn.Loss("smoothed-hinge", 0.05), reg=learn.Regularizer(1e-4, 2.0), p=p)
    model = learn.solve(fam, Xtr, Ytr, cfg)
    train_err = np.mean(learn.classify(model, Xtr) != Ytr)
    test_err = np.mean(learn.classify(model, Xte) != Yte)
    test_hinge = np.mean(hinge.value(Yte, learn.predict(model, Xte)))
    print(f"p={p:.3f}  iterations={model.iterations:3d}  converged={model.converged}  "
          f"train error={train_err:.3f}  test error={test_err:.3f}  test hinge={test_hinge:.3f}")
