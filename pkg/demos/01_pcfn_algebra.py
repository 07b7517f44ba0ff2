"""Piecewise-constant function algebra: norms, cell averaging, kernels.

Run:  python3 demos/01_pcfn_algebra.py
"""

import numpy as np

from nlbalance.pcfn import PCFn, ExpKernel, convolve, dilate, project

rng = np.random.default_rng(1)

# a deviation-from-base profile: compact support, exactly zero tails
u = PCFn.from_steps([-1.0, -0.3, 0.2, 0.9], [[0.4], [-0.2], [0.3]])
print("u:", u)
print("  TV       =", u.tv())
print("  L1 norm  =", u.l1_norm())
print("  integral =", u.integral()[0])

print("\ncell averaging Pi_N (mesh 1/N, window ]-N-1/N, N]):")
print("  N    ||Pi_N u - u||_L1    TV ratio")
for N in (4, 8, 16, 32, 64):
    p = project(u, N)
    print("  %-4d %.6e        %.3f" % (N, p.l1_dist(u), p.tv() / u.tv()))
print("  (error decays like 1/N; TV never more than doubles)")

K = ExpKernel([(0.5, 1.0)])  # exp(-|x|)/2, unit mass
c = convolve(K, u)
print("\nconvolution with exp(-|x|)/2 (closed form, no quadrature):")
xs = np.linspace(-2, 2, 9)
for x, v in zip(xs, c(xs)[:, 0]):
    print("  (K*u)(%5.2f) = %9.6f" % (x, v))
print("  ||K*u||_L1 = %.6f <= ||K|| ||u|| = %.6f"
      % (c.l1_norm(), K.l1_norm() * u.l1_norm()))
print("  TV(K*u)    = %.6f <= ||K|| TV(u) = %.6f"
      % (c.tv(), K.l1_norm() * u.tv()))

d = dilate(u, 2.0)
print("\ndilatation u(2x): TV %.3f (unchanged), L1 %.3f (halved)"
      % (d.tv(), d.l1_norm()))
