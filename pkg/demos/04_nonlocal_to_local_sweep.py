#!/usr/bin/env python3
"""Nonlocal-to-local convergence of the dynamics.

Runs the same initial data under the nonlocal model for a shrinking eps
sequence and under the local anisotropic reference with the extrapolated
gradient matrix, then tabulates the terminal solution errors. The errors
drop roughly quadratically in eps once the kernel range is below the
interface width.
"""

import numpy as np

import anisochill as ac

grid = ac.Grid.line(256)
(x,) = grid.meshgrid()
eps_list = [0.4, 0.2, 0.1, 0.05]
spec = ac.KernelSpec(ac.KernelFamily.BBM_OVER_R2, epsilon=0.4, dim=1)
pot = ac.PotentialSpec(theta=1.0, theta_c=44.0, lam=1e-3)
cfg = ac.SchemeConfig(h=1e-4, T=0.05)
c0 = ac.ScalarField(grid, 0.1 * np.cos(2 * np.pi * x))

gradient = ac.local_anisotropy_from_moments(ac.limit_matrix(spec, eps_list).matrix)
model = ac.LocalModel(grid, gradient, pot)
print(f"local gradient coefficient: {gradient[0, 0]:.6f}")
local_traj = ac.local_simulate(c0, None, model, cfg)
c_ref = local_traj[-1].c.values
vol = grid.cell_volume

print("\n  eps    l2 error     linf error   energy gap")
prev = None
for eps in eps_list:
    form = ac.assemble(spec.with_epsilon(eps), grid)
    traj = ac.simulate(c0, None, form, pot, cfg)
    diff = traj[-1].c.values - c_ref
    l2 = float(np.sqrt(np.sum(diff**2) * vol))
    linf = float(np.max(np.abs(diff)))
    egap = abs(traj[-1].report.e_lambda_after
               - local_traj[-1].report.e_lambda_after)
    marker = "" if prev is None else ("  v" if l2 < prev else "  ^")
    print(f"  {eps:4.2f}  {l2:.6e}  {linf:.6e}  {egap:.4e}{marker}")
    prev = l2
