"""Local anisotropic reference model: the limit target of the eps sweep.

``LocalForm`` realizes the gradient form B(u, v) = int (A grad u) . grad v
with the natural zero co-normal-flux boundary condition, discretized so
that summation by parts is exact:

* diagonal entries of A use face differences (the standard 5-point flux
  form, so A = a I reduces to the isotropic scheme exactly),
* the mixed term uses corner-averaged gradients on interior nodes
  (9-point coupling), symmetric by construction.

``LocalForm`` exposes the same energy / bilinear / apply surface as the
nonlocal form, so the implicit stepper drives both models unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .fields import Grid, ScalarField
from .potential import PotentialSpec, f_lambda_energy

_DIAG_DOMINANCE_SLACK = 1e-12


def local_anisotropy_from_moments(moment_limit: np.ndarray) -> np.ndarray:
    """Gradient-form matrix matching a kernel family's moment limit.

    The quarter-weighted pair energy of a kernel with second moments M
    tends to (1/4) int grad u . M grad u = (1/2) int grad u . (M/2) grad u,
    so the local Dirichlet coefficient is half the moment limit.
    """
    m = np.asarray(moment_limit, dtype=float)
    return 0.25 * (m + m.T)


@dataclass
class LocalForm:
    """Discrete int (A grad u) . grad v with natural boundary conditions."""

    grid: Grid
    matrix: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.matrix, dtype=float)
        d = self.grid.dim
        if a.shape != (d, d):
            raise ConfigError(f"anisotropy matrix must be {d}x{d}, got {a.shape}")
        if float(np.max(np.abs(a - a.T))) > 1e-12 * max(float(np.max(np.abs(a))), 1e-300):
            raise ConfigError("anisotropy matrix must be symmetric")
        a = 0.5 * (a + a.T)
        eigs = np.linalg.eigvalsh(a)
        if eigs[0] <= 0.0:
            raise ConfigError(f"anisotropy matrix must be positive definite, eigs={eigs}")
        if d == 2 and abs(a[0, 1]) > min(a[0, 0], a[1, 1]) + _DIAG_DOMINANCE_SLACK:
            raise ConfigError(
                "mixed-derivative coupling too strong for the 9-point form: "
                "|a12| must not exceed min(a11, a22)"
            )
        self.matrix = a
        self._dense_operator = None

    # -- corner gradients (2d mixed term) ---------------------------------

    def _corner_grads(self, vals: np.ndarray):
        hx, hy = self.grid.spacing
        gx = (vals[1:, 1:] + vals[1:, :-1] - vals[:-1, 1:] - vals[:-1, :-1]) / (2 * hx)
        gy = (vals[1:, 1:] - vals[1:, :-1] + vals[:-1, 1:] - vals[:-1, :-1]) / (2 * hy)
        return gx, gy

    def bilinear(self, u: ScalarField, v: ScalarField) -> float:
        if u.grid != self.grid or v.grid != self.grid:
            raise ConfigError("field grid does not match the local form")
        a = self.matrix
        g = self.grid
        vol = g.cell_volume
        total = 0.0
        for axis, h in enumerate(g.spacing):
            du = np.diff(u.values, axis=axis)
            dv = np.diff(v.values, axis=axis)
            total += a[axis, axis] * float(np.sum(du * dv)) * vol / h**2
        if g.dim == 2 and a[0, 1] != 0.0:
            ux, uy = self._corner_grads(u.values)
            vx, vy = self._corner_grads(v.values)
            total += a[0, 1] * float(np.sum(ux * vy + uy * vx)) * vol
        return total

    def energy(self, u: ScalarField) -> float:
        return 0.5 * self.bilinear(u, u)

    def apply(self, u: ScalarField) -> ScalarField:
        """Operator L with <L u, v> * cell_volume = bilinear(u, v) exactly."""
        if u.grid != self.grid:
            raise ConfigError("field grid does not match the local form")
        a = self.matrix
        g = self.grid
        out = np.zeros(g.extents)
        for axis, h in enumerate(g.spacing):
            flux = a[axis, axis] * np.diff(u.values, axis=axis) / h**2
            pad = [(0, 0)] * flux.ndim
            pad[axis] = (1, 1)
            padded = np.pad(flux, pad)
            out -= np.diff(padded, axis=axis)
        if g.dim == 2 and a[0, 1] != 0.0:
            hx, hy = g.spacing
            ux, uy = self._corner_grads(u.values)
            # adjoint of the corner-gradient sampling, cross-coupled via a12
            sx = a[0, 1] * uy / (2 * hx)   # pairs with vx
            sy = a[0, 1] * ux / (2 * hy)   # pairs with vy
            scat = np.zeros(g.extents)
            scat[1:, 1:] += sx + sy
            scat[1:, :-1] += sx - sy
            scat[:-1, 1:] += -sx + sy
            scat[:-1, :-1] += -sx - sy
            out += scat
        return ScalarField(g, out)

    def operator_matrix(self) -> np.ndarray:
        if self._dense_operator is None:
            n = self.grid.n_cells
            mat = np.zeros((n, n))
            basis = np.zeros(self.grid.extents)
            flat = basis.ravel()
            for k in range(n):
                flat[k] = 1.0
                mat[:, k] = self.apply(ScalarField(self.grid, basis)).values.ravel()
                flat[k] = 0.0
            self._dense_operator = mat
        return self._dense_operator


@dataclass
class LocalModel:
    """Local anisotropic Cahn-Hilliard model: gradient form plus potential."""

    grid: Grid
    matrix: np.ndarray
    pot: PotentialSpec

    def __post_init__(self):
        self.form = LocalForm(self.grid, self.matrix)
        self.matrix = self.form.matrix


def local_energy(model: LocalModel, c: ScalarField) -> float:
    """Gradient energy plus the regularized potential integral.

    Values outside [-1, 1] are admissible through the regularized density;
    callers can flag overshoot via max(|c| - 1, 0).
    """
    return model.form.energy(c) + f_lambda_energy(model.pot, c)


def local_step(state, model: LocalModel, cfg, w_k=None, m_fn=None):
    """One implicit step of the local model (same construction and audits
    as the nonlocal stepper)."""
    from . import stepper

    return stepper.step(state, model.form, model.pot, cfg, w_k=w_k, m_fn=m_fn)


def local_simulate(c0: ScalarField, velocity, model: LocalModel, cfg, m_fn=None):
    from . import stepper

    return stepper.simulate(c0, velocity, model.form, model.pot, cfg, m_fn=m_fn)
