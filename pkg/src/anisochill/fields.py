"""Uniform-grid fields on rectangular domains and the discrete Neumann calculus.

Cells are uniform boxes with centers strictly inside the domain; all
operators are in flux form so that discrete conservation and summation by
parts hold exactly (up to floating-point rounding):

* ``neumann_divergence`` -- div(m grad p) with zero-flux boundary faces and
  harmonic-mean face coefficients,
* ``neumann_solve`` -- its mean-zero inverse by Jacobi-preconditioned CG,
* ``hminus1_norm`` -- the Riesz realization of the dual norm on mean-zero
  fields,
* ``transport_divergence`` -- div(w c) with first-order upwind faces and
  zero normal boundary flux.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericsError


@dataclass(frozen=True)
class Grid:
    """Axis-aligned uniform cell grid over a rectangle (or interval)."""

    extents: tuple[int, ...]
    lengths: tuple[float, ...]

    def __post_init__(self):
        extents = tuple(int(n) for n in self.extents)
        lengths = tuple(float(v) for v in self.lengths)
        if len(extents) not in (1, 2) or len(extents) != len(lengths):
            raise ConfigError(f"bad grid shape: extents={extents} lengths={lengths}")
        if any(n < 4 for n in extents):
            raise ConfigError("grids need at least 4 cells per axis")
        if any(v <= 0 for v in lengths):
            raise ConfigError("grid lengths must be positive")
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "lengths", lengths)

    @classmethod
    def line(cls, n: int, length: float = 1.0) -> "Grid":
        return cls((n,), (length,))

    @classmethod
    def rect(cls, nx: int, ny: int, lx: float = 1.0, ly: float = 1.0) -> "Grid":
        return cls((nx, ny), (lx, ly))

    @property
    def dim(self) -> int:
        return len(self.extents)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(length / n for length, n in zip(self.lengths, self.extents))

    @property
    def cell_volume(self) -> float:
        return math.prod(self.spacing)

    @property
    def n_cells(self) -> int:
        return math.prod(self.extents)

    @property
    def volume(self) -> float:
        return math.prod(self.lengths)

    @property
    def diameter(self) -> float:
        return math.sqrt(sum(v * v for v in self.lengths))

    def centers(self, axis: int) -> np.ndarray:
        h = self.spacing[axis]
        return (np.arange(self.extents[axis]) + 0.5) * h

    def meshgrid(self) -> tuple[np.ndarray, ...]:
        axes = [self.centers(a) for a in range(self.dim)]
        if self.dim == 1:
            return (axes[0],)
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def cell_centers_flat(self) -> np.ndarray:
        """(n_cells, dim) array of centers in C (row-major) cell order."""
        grids = self.meshgrid()
        return np.stack([g.ravel() for g in grids], axis=1)


def _check_values(grid: Grid, values, extra_shape=()):
    arr = np.asarray(values, dtype=float)
    want = grid.extents + extra_shape
    if arr.shape != want:
        raise ConfigError(f"field shape {arr.shape} does not match grid {want}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError("field values must be finite")
    return arr


@dataclass
class ScalarField:
    """One real value per cell."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = _check_values(self.grid, self.values)

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, np.zeros(grid.extents))

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.extents, float(value)))

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "ScalarField":
        return cls(grid, np.asarray(fn(*grid.meshgrid()), dtype=float))

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())


@dataclass
class VectorField:
    """One d-vector per cell (cell-centered velocities)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = _check_values(self.grid, self.values, (self.grid.dim,))

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        return cls(grid, np.zeros(grid.extents + (grid.dim,)))


def mean(u: ScalarField) -> float:
    """Volume-weighted mean (plain average on a uniform grid)."""
    return float(np.sum(u.values) * u.grid.cell_volume / u.grid.volume)


def _face_coefficients(m: np.ndarray, axis: int) -> np.ndarray:
    """Harmonic mean of the coefficient on interior faces along axis."""
    lo = np.moveaxis(m, axis, 0)[:-1]
    hi = np.moveaxis(m, axis, 0)[1:]
    face = 2.0 * lo * hi / (lo + hi)
    return np.moveaxis(face, 0, axis)


def _pad_diff(flux: np.ndarray, axis: int) -> np.ndarray:
    """Difference of a face array padded with zero boundary fluxes."""
    pad = [(0, 0)] * flux.ndim
    pad[axis] = (1, 1)
    return np.diff(np.pad(flux, pad), axis=axis)


def neumann_divergence(m_coef: ScalarField, p: ScalarField) -> ScalarField:
    """div(m grad p) with zero-flux boundary faces.

    Face coefficients are harmonic means of the adjacent cell values, so
    strongly varying mobilities stay robust; the output sums to zero
    exactly by telescoping.
    """
    grid = p.grid
    mv = m_coef.values
    if np.any(mv <= 0.0):
        raise ConfigError("coefficient field must be positive everywhere")
    out = np.zeros(grid.extents)
    for axis, h in enumerate(grid.spacing):
        flux = _face_coefficients(mv, axis) * np.diff(p.values, axis=axis) / h
        out += _pad_diff(flux, axis) / h
    return ScalarField(grid, out)


def dissipation_form(m_coef: ScalarField, u: ScalarField, v: ScalarField) -> float:
    """Face inner product  sum_f m_f (Du/h)(Dv/h) * vol_f  =  int m grad u . grad v.

    Exactly the negative of <div(m grad u), v> * cell_volume.
    """
    grid = u.grid
    mv = m_coef.values
    total = 0.0
    vol = grid.cell_volume
    for axis, h in enumerate(grid.spacing):
        du = np.diff(u.values, axis=axis)
        dv = np.diff(v.values, axis=axis)
        total += float(np.sum(_face_coefficients(mv, axis) * du * dv)) * vol / h**2
    return total


def gradient_norm_sq(u: ScalarField) -> float:
    """int |grad u|^2 with unit coefficient (face differences)."""
    ones = ScalarField.constant(u.grid, 1.0)
    return dissipation_form(ones, u, u)


def _neumann_diag(grid: Grid, mv: np.ndarray) -> np.ndarray:
    """Diagonal of -div(m grad .) for Jacobi preconditioning."""
    diag = np.zeros(grid.extents)
    for axis, h in enumerate(grid.spacing):
        face = _face_coefficients(mv, axis) / h**2
        pad = [(0, 0)] * face.ndim
        pad[axis] = (1, 0)
        diag += np.pad(face, pad)
        pad[axis] = (0, 1)
        diag += np.pad(face, pad)
    return diag


def neumann_solve(
    m_coef: ScalarField,
    rhs: ScalarField,
    tol: float = 1e-10,
    max_iters: int | None = None,
) -> ScalarField:
    """Mean-zero u with div(m grad u) = rhs, by CG on the mean-zero subspace.

    The right-hand side must be (numerically) mean-free; the final iterate
    is projected to exact zero mean. Raises NumericsError with the residual
    history if the iteration cap (10 * n_cells by default) is hit.
    """
    grid = rhs.grid
    mv = m_coef.values
    if np.any(mv <= 0.0):
        raise ConfigError("coefficient field must be positive everywhere")
    b = rhs.values
    bnorm_inf = float(np.max(np.abs(b)))
    if bnorm_inf == 0.0:
        return ScalarField.zeros(grid)
    if abs(float(np.mean(b))) > 1e-10 * bnorm_inf:
        raise ConfigError(
            "incompatible right-hand side: mean(rhs) must vanish "
            f"(got {float(np.mean(b)):.3e})"
        )
    b = -(b - np.mean(b))          # solve (-div(m grad)) u = -rhs, SPD
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return ScalarField.zeros(grid)

    def apply_neg(x):
        out = np.zeros(grid.extents)
        for axis, h in enumerate(grid.spacing):
            flux = _face_coefficients(mv, axis) * np.diff(x, axis=axis) / h
            out -= _pad_diff(flux, axis) / h
        return out

    diag = _neumann_diag(grid, mv)
    cap = max_iters if max_iters is not None else 10 * grid.n_cells
    x = np.zeros(grid.extents)
    r = b.copy()
    z = r / diag
    p = z.copy()
    rho = float(np.sum(r * z))
    history = []
    for it in range(cap):
        q = apply_neg(p)
        alpha = rho / float(np.sum(p * q))
        x += alpha * p
        r -= alpha * q
        rnorm = float(np.linalg.norm(r))
        history.append(rnorm)
        restart = False
        if rnorm <= tol * bnorm:
            r = b - apply_neg(x)
            if float(np.linalg.norm(r)) <= tol * bnorm:
                break
            restart = True
        if (it + 1) % 256 == 0:      # guard against drift in the recursion
            x -= np.mean(x)
            r = b - apply_neg(x)
            restart = True
        z = r / diag
        rho_new = float(np.sum(r * z))
        p = z + (0.0 if restart else rho_new / rho) * p
        rho = rho_new
    else:
        raise NumericsError(
            f"neumann_solve: no convergence in {cap} iterations; "
            f"last residuals {history[-5:]}"
        )
    x -= np.mean(x)
    return ScalarField(grid, x)


def neumann_matrix(grid: Grid, m_values: np.ndarray) -> np.ndarray:
    """Dense matrix of -div(m grad .) acting on flat (C-order) cell vectors."""
    n = grid.n_cells
    if grid.dim == 1:
        h = grid.spacing[0]
        face = _face_coefficients(m_values, 0) / h**2
        mat = np.zeros((n, n))
        idx = np.arange(n - 1)
        mat[idx, idx] += face
        mat[idx + 1, idx + 1] += face
        mat[idx, idx + 1] -= face
        mat[idx + 1, idx] -= face
        return mat
    nx, ny = grid.extents
    hx, hy = grid.spacing
    mat = np.zeros((n, n))
    fx = _face_coefficients(m_values, 0) / hx**2
    for i in range(nx - 1):
        for j in range(ny):
            a, b = i * ny + j, (i + 1) * ny + j
            c = fx[i, j]
            mat[a, a] += c
            mat[b, b] += c
            mat[a, b] -= c
            mat[b, a] -= c
    fy = _face_coefficients(m_values, 1) / hy**2
    for i in range(nx):
        for j in range(ny - 1):
            a, b = i * ny + j, i * ny + j + 1
            c = fy[i, j]
            mat[a, a] += c
            mat[b, b] += c
            mat[a, b] -= c
            mat[b, a] -= c
    return mat


def hminus1_norm(u: ScalarField) -> float:
    """Dual-norm realization: ||grad v||_2 where div(grad v) = -u, mean v = 0."""
    scale = float(np.max(np.abs(u.values)))
    if scale == 0.0:
        return 0.0
    if abs(mean(u)) > 1e-10 * scale:
        raise ConfigError("hminus1_norm needs a mean-zero field")
    ones = ScalarField.constant(u.grid, 1.0)
    v = neumann_solve(ones, ScalarField(u.grid, -u.values), tol=1e-10)
    return math.sqrt(max(dissipation_form(ones, v, v), 0.0))


def transport_divergence(w: VectorField, c: ScalarField) -> ScalarField:
    """div(w c) in flux form: upwind face values, zero normal boundary flux.

    Velocity presets keep w . n = 0 on the boundary, so dropping the
    boundary flux is exact; the output sums to zero by telescoping.
    """
    grid = c.grid
    out = np.zeros(grid.extents)
    for axis, h in enumerate(grid.spacing):
        wa = np.moveaxis(w.values[..., axis], axis, 0)
        cm = np.moveaxis(c.values, axis, 0)
        w_face = 0.5 * (wa[:-1] + wa[1:])
        c_face = np.where(w_face > 0, cm[:-1], cm[1:])
        flux = np.moveaxis(w_face * c_face, 0, axis)
        out += _pad_diff(flux, axis) / h
    return ScalarField(grid, out)


def save_field(u: ScalarField, path) -> None:
    """Write one row per cell (index coordinates, value) with a grid header."""
    grid = u.grid
    with open(path, "w", encoding="utf-8") as fh:
        ext = ",".join(str(n) for n in grid.extents)
        lng = ",".join(format(v, ".17g") for v in grid.lengths)
        fh.write(f"# grid dim={grid.dim} extents={ext} lengths={lng}\n")
        if grid.dim == 1:
            fh.write("i,value\n")
            for i, v in enumerate(u.values):
                fh.write(f"{i},{format(float(v), '.17g')}\n")
        else:
            fh.write("i,j,value\n")
            nx, ny = grid.extents
            for i in range(nx):
                for j in range(ny):
                    fh.write(f"{i},{j},{format(float(u.values[i, j]), '.17g')}\n")


def load_field(path) -> ScalarField:
    """Read a field written by save_field."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("# grid"):
            raise ConfigError(f"{path}: missing grid header line")
        meta = dict(tok.split("=") for tok in header[7:].split() if "=" in tok)
        extents = tuple(int(s) for s in meta["extents"].split(","))
        lengths = tuple(float(s) for s in meta["lengths"].split(","))
        grid = Grid(extents, lengths)
        fh.readline()  # column header
        values = np.zeros(extents)
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) < 2:
                continue
            if grid.dim == 1:
                values[int(parts[0])] = float(parts[1])
            else:
                values[int(parts[0]), int(parts[1])] = float(parts[2])
    return ScalarField(grid, values)
