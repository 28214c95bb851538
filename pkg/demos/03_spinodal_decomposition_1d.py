#!/usr/bin/env python3
"""Spinodal decomposition under the nonlocal dynamics, with audits.

A small cosine perturbation of a balanced mixture is linearly unstable in
the deep-quench regime; the implicit scheme drives it to a two-interface
profile while the per-step report certifies the energy budget: the
dissipation never exceeds the released free energy, and the mean is
conserved to rounding.
"""

import numpy as np

import anisochill as ac

grid = ac.Grid.line(256)
(x,) = grid.meshgrid()
spec = ac.KernelSpec(ac.KernelFamily.BBM_OVER_R2, epsilon=0.1, dim=1)
form = ac.assemble(spec, grid)
pot = ac.PotentialSpec(theta=1.0, theta_c=44.0, lam=1e-3)
cfg = ac.SchemeConfig(h=1e-4, T=0.03)

c0 = ac.ScalarField(grid, 0.1 * np.cos(2 * np.pi * x))
trajectory = ac.simulate(c0, None, form, pot, cfg)

print(" step      t      E_lambda   dissipation      slack      mass      max|c|")
for k in (1, 5, 20, 50, 100, 200, 300):
    st = trajectory[k]
    r = st.report
    print(f"{k:5d}  {st.t:7.4f}  {r.e_lambda_after:+.5f}   {r.dissipation:.3e}"
          f"   {r.inequality_slack:+.2e}  {ac.mean(st.c):+.2e}"
          f"   {np.max(np.abs(st.c.values)):.4f}")

final = trajectory[-1].c
ac.save_field(final, "spinodal_final_1d.csv")
print("\nfinal profile sign pattern (one char per 8 cells):")
signs = np.sign(final.values[::8])
print("".join("+" if s > 0 else "-" if s < 0 else "0" for s in signs))
print("\nsaved final profile to spinodal_final_1d.csv")

worst = min(st.report.inequality_slack for st in trajectory[1:])
print(f"worst energy-inequality slack over the run: {worst:.2e} "
      "(nonnegative up to solver rounding)")
