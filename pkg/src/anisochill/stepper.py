"""Implicit time discretization of the nonlocal (or local) CH dynamics.

Each step minimizes the convex functional

    F_h(c) = (h/2) int m(c_k) |grad mu0|^2  +  form.energy(c)
             + int f0_lambda(c)  -  kappa int c_k c

over fields with the conserved mean, where mu0 is the mean-zero weak
solution of  div(m(c_k) grad mu0) = (c - c_k)/h + div(w_k c_k)  with
zero-flux boundary. Stationarity gives the chemical-potential identity
mu0 = P0[L c + g_lambda(c) - kappa c_k]; the reported potential adds back
the mean of g_lambda(c) - kappa c_k.

Two interchangeable solvers: a damped Newton iteration on the stationarity
system (default) and projected Barzilai-Borwein descent on F_h, kept as a
cross-validation oracle. Both iterate in the mean-zero tangent space, so
mass is conserved to rounding.

Every accepted step carries an audit: with delta = c_{k+1} - c_k the
identity

    E_lam(c_k) + transport_work - E_lam(c_{k+1}) - dissipation
        = form.energy(delta) + (kappa/2) ||delta||^2 + convexity slack
          + solver-residual terms

makes the energy-inequality slack nonnegative up to solver tolerance.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, StepFailure
from .fields import (
    Grid,
    ScalarField,
    VectorField,
    dissipation_form,
    gradient_norm_sq,
    hminus1_norm,
    mean,
    neumann_divergence,
    neumann_matrix,
    neumann_solve,
    transport_divergence,
)
from .potential import (
    PotentialSpec,
    f_lambda_energy,
    f0_lambda,
    g_lambda,
    g_lambda_prime,
)

logger = logging.getLogger(__name__)


class SolverKind(enum.Enum):
    NEWTON_EL = "NEWTON_EL"
    DESCENT_ON_FH = "DESCENT_ON_FH"


def mobility_constant(c_values: np.ndarray) -> np.ndarray:
    """Unit mobility (default)."""
    return np.ones_like(c_values)


def mobility_linear(c_values: np.ndarray) -> np.ndarray:
    """Positive non-degenerate preset 1 + c/2 (requires |c| < 2)."""
    return 1.0 + 0.5 * c_values


@dataclass(frozen=True)
class SchemeConfig:
    h: float = 1e-4
    T: float = 1e-2
    lambda_schedule: tuple[tuple[float, float], ...] | None = None
    solver: SolverKind = SolverKind.NEWTON_EL
    newton_tol: float = 1e-10
    descent_tol: float = 1e-9
    max_inner_iters: int = 50_000
    dense_limit: int = 2048    # Newton memory cap (cells); beyond it use descent
    snapshot_every: int = 10

    def __post_init__(self):
        if self.h <= 0 or self.T < self.h:
            raise ConfigError("need h > 0 and T >= h")
        if self.newton_tol <= 0 or self.descent_tol <= 0:
            raise ConfigError("solver tolerances must be positive")
        if self.max_inner_iters < 1:
            raise ConfigError("max_inner_iters must be positive")

    def lambda_at(self, t: float, default: float) -> float:
        if not self.lambda_schedule:
            return default
        lam = default
        for t_k, lam_k in self.lambda_schedule:
            if t >= t_k - 1e-12:
                lam = lam_k
        return lam


@dataclass
class StepReport:
    e_lambda_before: float
    e_lambda_after: float
    e_form_after: float
    e_potential_after: float
    dissipation: float
    transport_work: float
    inequality_slack: float
    inner_iters: int
    residual: float
    mass_drift: float
    lam: float


@dataclass
class SchemeState:
    t: float
    c: ScalarField
    mu: ScalarField | None
    m_omega: float
    report: StepReport | None = None

    def __post_init__(self):
        if not (-1.0 < self.m_omega < 1.0):
            raise ConfigError(f"conserved mean must lie in (-1, 1), got {self.m_omega}")
        drift = abs(mean(self.c) - self.m_omega)
        if drift > 1e-12:
            raise ConfigError(f"state mean drifted by {drift:.3e}")

    @classmethod
    def initial(cls, c0: ScalarField) -> "SchemeState":
        return cls(t=0.0, c=c0, mu=None, m_omega=mean(c0))


# ---------------------------------------------------------------------------
# objective and gradient (variational surface; also the descent solver's)
# ---------------------------------------------------------------------------

def _inner_tol(cfg: SchemeConfig) -> float:
    return min(1e-12, cfg.newton_tol)


def _transport_rhs(w_k: VectorField | None, ck: ScalarField) -> np.ndarray:
    if w_k is None:
        return np.zeros(ck.grid.extents)
    return transport_divergence(w_k, ck).values


def _mu0_of(c_values, prev, m_field, tdiv, cfg):
    grid = prev.c.grid
    rhs = (c_values - prev.c.values) / cfg.h + tdiv
    rhs -= np.mean(rhs)             # exact compatibility projection
    return neumann_solve(m_field, ScalarField(grid, rhs), tol=_inner_tol(cfg))


def objective(
    c_candidate: ScalarField,
    prev: SchemeState,
    form,
    pot: PotentialSpec,
    cfg: SchemeConfig,
    w_k: VectorField | None = None,
    m_fn=None,
) -> float:
    """Value of the per-step functional F_h at a mean-constrained candidate."""
    m_fn = m_fn or mobility_constant
    if abs(mean(c_candidate) - prev.m_omega) > 1e-10:
        raise ConfigError("candidate violates the conserved-mean constraint")
    grid = prev.c.grid
    m_field = ScalarField(grid, m_fn(prev.c.values))
    tdiv = _transport_rhs(w_k, prev.c)
    mu0 = _mu0_of(c_candidate.values, prev, m_field, tdiv, cfg)
    metric = 0.5 * cfg.h * dissipation_form(m_field, mu0, mu0)
    vol = grid.cell_volume
    bulk = float(np.sum(f0_lambda(pot, c_candidate.values))) * vol
    coupling = pot.kappa * float(np.sum(prev.c.values * c_candidate.values)) * vol
    return metric + form.energy(c_candidate) + bulk - coupling


def objective_gradient(
    c_candidate: ScalarField,
    prev: SchemeState,
    form,
    pot: PotentialSpec,
    cfg: SchemeConfig,
    w_k: VectorField | None = None,
    m_fn=None,
) -> ScalarField:
    """Mean-zero variation of F_h: P0[-mu0 + L c + g_lambda(c) - kappa c_k]."""
    m_fn = m_fn or mobility_constant
    if abs(mean(c_candidate) - prev.m_omega) > 1e-10:
        raise ConfigError("candidate violates the conserved-mean constraint")
    grid = prev.c.grid
    m_field = ScalarField(grid, m_fn(prev.c.values))
    tdiv = _transport_rhs(w_k, prev.c)
    mu0 = _mu0_of(c_candidate.values, prev, m_field, tdiv, cfg)
    r = (
        -mu0.values
        + form.apply(c_candidate).values
        + g_lambda(pot, c_candidate.values)
        - pot.kappa * prev.c.values
    )
    r -= np.mean(r)
    return ScalarField(grid, r)


# ---------------------------------------------------------------------------
# solvers
# ---------------------------------------------------------------------------

class _DenseStepSolver:
    """Newton iteration with dense linear algebra (grids up to dense_limit).

    The mean constraint is enforced through a bordered system; the inverse
    Neumann operator is precomputed once per mobility field.
    """

    def __init__(self, grid: Grid, m_values: np.ndarray, form):
        n = grid.n_cells
        self.grid = grid
        self.n = n
        neg_a = neumann_matrix(grid, m_values)
        bord = np.zeros((n + 1, n + 1))
        bord[:n, :n] = neg_a
        bord[:n, n] = 1.0
        bord[n, :n] = 1.0
        rhs = np.zeros((n + 1, n))
        rhs[:n, :] = np.eye(n)
        self.ninv = np.linalg.solve(bord, rhs)[:n, :]   # (-div(m grad))^+ on mean-zero
        self.lmat = form.operator_matrix()

    def mu0(self, resid_rhs: np.ndarray) -> np.ndarray:
        # mu0 solves (-div(m grad)) mu0 = -(rhs), rhs = (c - ck)/h + tdiv
        return self.ninv @ resid_rhs

    def newton_matrix(self, h: float, gprime: np.ndarray) -> np.ndarray:
        return self.ninv / h + self.lmat + np.diag(gprime)


def _newton_step(prev, form, pot, cfg, tdiv, solver: _DenseStepSolver):
    ck = prev.c.values.ravel()
    td = tdiv.ravel()
    h = cfg.h
    n = solver.n
    ones = np.ones(n)

    def residual(cv):
        mu0 = solver.mu0((ck - cv) / h - td)
        r = -mu0 + solver.lmat @ cv + g_lambda(pot, cv) - pot.kappa * ck
        return r - np.mean(r)

    c = ck.copy()
    g_vec = residual(c)
    best = (float(np.max(np.abs(g_vec))), c)
    iters = 0
    cap = min(200, cfg.max_inner_iters)
    while float(np.max(np.abs(g_vec))) > cfg.newton_tol:
        iters += 1
        if iters > cap:
            raise StepFailure(
                f"Newton stalled at residual {best[0]:.3e} after {cap} iterations",
                best_values=best[1], residual=best[0],
            )
        jac = solver.newton_matrix(h, g_lambda_prime(pot, c))
        bord = np.zeros((n + 1, n + 1))
        bord[:n, :n] = jac
        bord[:n, n] = ones
        bord[n, :n] = ones
        rhs = np.zeros(n + 1)
        rhs[:n] = -g_vec
        direction = np.linalg.solve(bord, rhs)[:n]
        gnorm = float(np.linalg.norm(g_vec))
        alpha = 1.0
        for _ in range(50):
            c_try = c + alpha * direction
            g_try = residual(c_try)
            if float(np.linalg.norm(g_try)) <= (1.0 - 1e-4 * alpha) * gnorm:
                break
            alpha *= 0.5
        else:
            raise StepFailure(
                f"Newton line search failed at residual {gnorm:.3e}",
                best_values=best[1], residual=best[0],
            )
        c, g_vec = c_try, g_try
        res = float(np.max(np.abs(g_vec)))
        if res < best[0]:
            best = (res, c)
    return c, iters, float(np.max(np.abs(g_vec)))


def _descent_step(prev, form, pot, cfg, w_k, m_fn):
    """Projected Barzilai-Borwein descent on F_h (oracle solver)."""
    grid = prev.c.grid

    def grad(cv):
        return objective_gradient(
            ScalarField(grid, cv.reshape(grid.extents)), prev, form, pot, cfg,
            w_k=w_k, m_fn=m_fn,
        ).values.ravel()

    c = prev.c.values.ravel().copy()
    g = grad(c)
    alpha = 1.0 / (1.0 / pot.lam + 1.0 / cfg.h)
    best = (float(np.max(np.abs(g))), c.copy())
    iters = 0
    while float(np.max(np.abs(g))) > cfg.descent_tol:
        iters += 1
        if iters > cfg.max_inner_iters:
            raise StepFailure(
                f"descent stalled at residual {best[0]:.3e}",
                best_values=best[1], residual=best[0],
            )
        c_new = c - alpha * g
        c_new -= np.mean(c_new) - np.mean(c)      # exact mean lock
        g_new = grad(c_new)
        s = c_new - c
        y = g_new - g
        sy = float(np.dot(s, y))
        if sy > 1e-300:
            alpha = min(max(float(np.dot(s, s)) / sy, 1e-14), 1e6)
        else:
            alpha *= 0.5
        c, g = c_new, g_new
        res = float(np.max(np.abs(g)))
        if res < best[0]:
            best = (res, c.copy())
        elif res > 1e4 * best[0]:                 # runaway: restart from best
            c, g = best[1].copy(), grad(best[1])
            alpha *= 0.25
    return c, iters, float(np.max(np.abs(g)))


# ---------------------------------------------------------------------------
# the step and the trajectory driver
# ---------------------------------------------------------------------------

def step(
    prev: SchemeState,
    form,
    pot: PotentialSpec,
    cfg: SchemeConfig,
    w_k: VectorField | None = None,
    m_fn=None,
    *,
    _solver_cache: dict | None = None,
) -> SchemeState:
    """Advance one implicit step and audit it.

    Returns the new state, whose report carries the energy budget:
    energies before/after, dissipation, transport work, and the
    energy-inequality slack (nonnegative up to solver residual).
    """
    m_fn = m_fn or mobility_constant
    grid = prev.c.grid
    lam = cfg.lambda_at(prev.t, pot.lam)
    pot_k = pot if lam == pot.lam else pot.with_lambda(lam)

    m_values = m_fn(prev.c.values)
    if np.any(m_values <= 0.0):
        raise ConfigError("mobility must stay positive")
    m_field = ScalarField(grid, m_values)
    tdiv = _transport_rhs(w_k, prev.c)

    if cfg.solver is SolverKind.DESCENT_ON_FH:
        c_flat, iters, resid = _descent_step(prev, form, pot_k, cfg, w_k, m_fn)
    else:
        if grid.n_cells > cfg.dense_limit:
            raise ConfigError(
                f"grid has {grid.n_cells} cells > dense_limit={cfg.dense_limit}; "
                "raise the limit (dense Newton memory grows quadratically) or "
                "switch to the DESCENT_ON_FH solver"
            )
        solver = _solver_cache.get("solver") if _solver_cache is not None else None
        if solver is None:
            solver = _DenseStepSolver(grid, m_values, form)
            if _solver_cache is not None and m_fn is mobility_constant:
                _solver_cache["solver"] = solver
        c_flat, iters, resid = _newton_step(prev, form, pot_k, cfg, tdiv, solver)

    c_new = ScalarField(grid, c_flat.reshape(grid.extents))
    vol = grid.cell_volume

    # chemical potential from the stationarity identity
    g_new = g_lambda(pot_k, c_new.values)
    mu_values = form.apply(c_new).values + g_new - pot_k.kappa * prev.c.values
    mu = ScalarField(grid, mu_values)
    mu0 = ScalarField(grid, mu_values - np.mean(mu_values))

    # weak-form residual of the mass update (audit of the inner solve),
    # rescaled to order-parameter units and folded into the report
    rhs_update = (c_new.values - prev.c.values) / cfg.h + tdiv
    upd = neumann_divergence(m_field, mu0).values - rhs_update
    weak = float(np.max(np.abs(upd))) * cfg.h / max(1.0, float(np.max(np.abs(c_new.values))))
    resid = max(resid, weak)

    e_before = form.energy(prev.c) + f_lambda_energy(pot_k, prev.c)
    e_form = form.energy(c_new)
    e_pot = f_lambda_energy(pot_k, c_new)
    e_after = e_form + e_pot
    diss = cfg.h * dissipation_form(m_field, mu, mu)
    twork = -cfg.h * float(np.sum(tdiv * mu.values)) * vol if w_k is not None else 0.0
    slack = e_before + twork - e_after - diss
    drift = abs(mean(c_new) - prev.m_omega)

    report = StepReport(
        e_lambda_before=e_before,
        e_lambda_after=e_after,
        e_form_after=e_form,
        e_potential_after=e_pot,
        dissipation=diss,
        transport_work=twork,
        inequality_slack=slack,
        inner_iters=iters,
        residual=resid,
        mass_drift=drift,
        lam=lam,
    )
    return SchemeState(
        t=prev.t + cfg.h, c=c_new, mu=mu, m_omega=prev.m_omega, report=report
    )


def simulate(
    c0: ScalarField,
    velocity: VectorField | None,
    form,
    pot: PotentialSpec,
    cfg: SchemeConfig,
    m_fn=None,
) -> list[SchemeState]:
    """Run T/h implicit steps from c0; returns the full state trajectory.

    The velocity field is steady, so the per-interval average needed by
    the scheme is the field itself. Any step failure aborts with the
    partial trajectory attached to the exception.
    """
    if float(np.max(np.abs(c0.values))) > 1.0:
        raise ConfigError("initial data must satisfy |c0| <= 1 per cell")
    n_steps = round(cfg.T / cfg.h)
    if abs(n_steps - cfg.T / cfg.h) > 1e-8 * max(n_steps, 1):
        raise ConfigError(f"T={cfg.T} is not an integer multiple of h={cfg.h}")
    state = SchemeState.initial(c0)
    trajectory = [state]
    cache: dict = {}
    for _ in range(n_steps):
        try:
            state = step(state, form, pot, cfg, w_k=velocity, m_fn=m_fn,
                         _solver_cache=cache)
        except StepFailure as exc:
            exc.trajectory = trajectory
            raise
        trajectory.append(state)
    return trajectory


def n_operator_probe(
    c: ScalarField, f_rhs: ScalarField, m_fn=None
) -> tuple[ScalarField, float]:
    """Apply the mobility-weighted inverse Neumann operator and report the
    discrete H1-to-dual-norm ratio (bounded independently of c)."""
    m_fn = m_fn or mobility_constant
    scale = float(np.max(np.abs(f_rhs.values)))
    if scale == 0.0:
        return ScalarField.zeros(c.grid), 0.0
    if abs(mean(f_rhs)) > 1e-10 * scale:
        raise ConfigError("probe needs a mean-zero right-hand side")
    m_values = m_fn(c.values)
    if np.any(m_values <= 0.0):
        raise ConfigError("mobility must stay positive")
    u = neumann_solve(
        ScalarField(c.grid, m_values),
        ScalarField(c.grid, -f_rhs.values),
        tol=1e-10,
    )
    vol = c.grid.cell_volume
    h1 = math.sqrt(float(np.sum(u.values**2)) * vol + gradient_norm_sq(u))
    dual = hminus1_norm(f_rhs)
    return u, h1 / dual
