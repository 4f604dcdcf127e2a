"""Kernels as coefficient sequences.

Every kernel here is a sum ``K(x, y) = sum_n phi_n(x) phi_n(y)``.  A function
is a coefficient sequence ``a`` with value ``f(x) = sum_n a_n phi_n(x)`` and
norm ``||a||_p``; pairing against the sequence of a kernel section returns the
point value.  This script checks those facts numerically.
"""

import numpy as np

from pnorm_rkbs import expansion as ex
from pnorm_rkbs import rkbs

rng = np.random.default_rng(0)

# the min-integral kernel: series against closed form, with the reported tail bound
print("min-integral kernel, K(0.3, 0.6):")
for trunc in (8, 32, 128, 512):
    fam = ex.min_integral(truncation=trunc)
    s = ex.kernel_eval(fam, 0.3, 0.6)
    c = ex.kernel_eval(fam, 0.3, 0.6, closed_form=True)
    print(f"  N={trunc:4d}  series={s:.15f}  |series-closed|={abs(s - c):.2e}  "
          f"bound={ex.kernel_tail_bound(fam, 0.3, 0.6):.2e}")

# Gaussian kernel: eigenvalues rho_n sum to one, with a geometric tail
theta = 1.0
w = ex.gaussian_shape_constants(theta)[0]
print(f"\nGaussian theta={theta}: w={w:.6f}")
for n in (1, 5, 20):
    print(f"  1 - sum_(k<{n}) rho_k = {1 - ex.gaussian_eigenvalue_sum(theta, n):.3e}   w^{n} = {w ** n:.3e}")

# reproducing identity and the Gateaux derivative of the p-norm
fam = ex.min_integral(truncation=64)
for p in (4 / 3, 2.0, 3.0):
    f = rkbs.SequenceFunction(rng.standard_normal(64) / np.arange(1, 65), p, fam)
    k = rkbs.kernel_section(fam, 0.37, p)
    g = rkbs.gateaux(f)
    q = rkbs.conjugate(p)
    print(f"\np={p:.4g}: <f, K(x,.)> - f(x) = {rkbs.dual_pair(f, k).value - rkbs.evaluate(f, 0.37):.1e}")
    print(f"        ||iota(f)||_q = {np.sum(np.abs(g.coeffs) ** q) ** (1 / q):.15f}")
    print(f"        <f, iota(f)> - ||f||_p = {rkbs.dual_pair(f, g).value - rkbs.norm(f):.1e}")
