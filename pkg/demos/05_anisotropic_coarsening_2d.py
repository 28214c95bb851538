#!/usr/bin/env python3
"""Anisotropy steers the coarsening direction; transport stirs the mixture.

Three short 2d runs from the same seeded spinodal noise:

* the isotropic local model,
* a local model with a hard x axis (gradient coefficient 4 vs 1), whose
  pattern aligns with the cheap y direction,
* the sheared nonlocal kernel, whose limit matrix carries an off-diagonal
  coupling, together with a divergence-free vortex velocity.
"""

import numpy as np

import anisochill as ac

rng = np.random.default_rng(42)
grid = ac.Grid.rect(24, 24)
x, y = grid.meshgrid()

vals = np.zeros(grid.extents)
for kx in range(0, 5):
    cx = np.cos(kx * np.pi * x) if kx else np.ones(grid.extents)
    for ky in range(0, 5):
        if kx == 0 and ky == 0:
            continue
        cy = np.cos(ky * np.pi * y) if ky else 1.0
        vals += rng.standard_normal() / (kx + ky) * cx * cy
vals = 0.2 * vals / np.max(np.abs(vals))
vals -= vals.mean()
c0 = ac.ScalarField(grid, vals)

pot = ac.PotentialSpec(theta=1.0, theta_c=44.0, lam=1e-3)
cfg = ac.SchemeConfig(h=2e-4, T=60 * 2e-4)


def directional_ratio(c):
    dx = np.diff(c.values, axis=0)
    dy = np.diff(c.values, axis=1)
    return float(np.sum(dx * dx) / np.sum(dy * dy))


print("run                      Ex/Ey ratio   max|c|")
for label, matrix in (("isotropic", np.eye(2)),
                      ("hard x axis (4, 1)", np.diag([4.0, 1.0]))):
    model = ac.LocalModel(grid, matrix, pot)
    traj = ac.local_simulate(c0, None, model, cfg)
    print(f"{label:24s} {directional_ratio(traj[-1].c):10.4f}"
          f"   {np.max(np.abs(traj[-1].c.values)):.4f}")

# sheared nonlocal kernel with a vortex velocity (w . n = 0 on the boundary)
shear = np.array([[1.0, 0.5], [0.0, 1.0]])
spec = ac.KernelSpec(ac.KernelFamily.AFFINE_TRANSFORMED, epsilon=0.25, dim=2,
                     transform=shear)
form = ac.assemble(spec, grid)
vx = np.pi * np.sin(np.pi * x) * np.cos(np.pi * y)
vy = -np.pi * np.cos(np.pi * x) * np.sin(np.pi * y)
vortex = ac.VectorField(grid, np.stack([vx, vy], axis=-1))
traj = ac.simulate(c0, vortex, form, pot, cfg)
last = traj[-1].report
print(f"{'sheared nonlocal+vortex':24s} {directional_ratio(traj[-1].c):10.4f}"
      f"   {np.max(np.abs(traj[-1].c.values)):.4f}")
print(f"\ntransport work over the last step: {last.transport_work:+.3e}; "
      f"energy-inequality slack stays nonnegative: {last.inequality_slack:+.3e}")
print(f"mass drift across the stirred run: "
      f"{max(st.report.mass_drift for st in traj[1:]):.2e}")
