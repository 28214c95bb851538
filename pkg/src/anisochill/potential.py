"""Logarithmic double-well potential, its convex split, and the Lipschitz
regularization used by the implicit scheme.

The free-energy density is

    f(s) = (theta/2) ((1+s) log(1+s) + (1-s) log(1-s)) - (theta_c/2) s^2

on [-1, 1] (endpoint convention 0 log 0 = 0), in the phase-separating
regime theta < theta_c. The scheme splits f = f0 - kappa s^2 / 2 with a
convex f0; two conventions for kappa are supported:

* ``"theta_c"`` (default): kappa = theta_c, so f0 is exactly the
  logarithmic part,
* ``"inf_fpp"``: kappa = theta_c - theta, the negative infimum of f''.

For lam in (0, 1) the derivative of f0 is clamped to linear growth with
slope 1/lam outside (-1+lam, 1-lam); ``f0_lambda`` is the matching
antiderivative (quadratic tails, logarithmic core) and ``f_lambda``
restores the concave quadratic.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError
from .fields import ScalarField

KAPPA_CONVENTIONS = ("theta_c", "inf_fpp")


@dataclass(frozen=True)
class PotentialSpec:
    theta: float = 1.0
    theta_c: float = 44.0
    lam: float = 1e-3
    kappa_convention: str = "theta_c"

    def __post_init__(self):
        if self.theta <= 0 or self.theta_c <= 0:
            raise ConfigError("potential temperatures must be positive")
        if not (0.0 < self.lam < 1.0):
            raise ConfigError(f"potential.lambda must lie in (0, 1), got {self.lam}")
        if self.kappa_convention not in KAPPA_CONVENTIONS:
            raise ConfigError(
                f"potential.kappa_convention must be one of {KAPPA_CONVENTIONS}"
            )
        if self.theta >= self.theta_c:
            warnings.warn(
                "theta >= theta_c: the potential is convex and no phase "
                "separation occurs",
                stacklevel=2,
            )

    @property
    def kappa(self) -> float:
        if self.kappa_convention == "theta_c":
            return self.theta_c
        return self.theta_c - self.theta

    def with_lambda(self, lam: float) -> "PotentialSpec":
        return replace(self, lam=float(lam))


def _xlogx(a: np.ndarray) -> np.ndarray:
    """a * log(a) with the limit value 0 at a = 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(a > 0.0, a * np.log(np.maximum(a, 1e-300)), 0.0)


def f_value(spec: PotentialSpec, s):
    """The double-well density on [-1, 1]; endpoints use 0 log 0 = 0."""
    arr = np.asarray(s, dtype=float)
    if np.any(np.abs(arr) > 1.0):
        raise ConfigError("f is only defined on [-1, 1]")
    val = 0.5 * spec.theta * (_xlogx(1.0 + arr) + _xlogx(1.0 - arr)) \
        - 0.5 * spec.theta_c * arr**2
    return float(val) if np.isscalar(s) else val


def f0_value(spec: PotentialSpec, s):
    """Convex part f0 = f + kappa s^2 / 2 on [-1, 1]."""
    arr = np.asarray(s, dtype=float)
    val = np.asarray(f_value(spec, arr)) + 0.5 * spec.kappa * arr**2
    return float(val) if np.isscalar(s) else val


def f0_prime(spec: PotentialSpec, s):
    """Derivative of the convex part; strictly increasing, blows up at +-1."""
    arr = np.asarray(s, dtype=float)
    if np.any(np.abs(arr) >= 1.0):
        raise ConfigError("f0' is only defined on the open interval (-1, 1)")
    val = 0.5 * spec.theta * (np.log1p(arr) - np.log1p(-arr))
    val = val + (spec.kappa - spec.theta_c) * arr
    return float(val) if np.isscalar(s) else val


def f0_second(spec: PotentialSpec, s):
    arr = np.asarray(s, dtype=float)
    if np.any(np.abs(arr) >= 1.0):
        raise ConfigError("f0'' is only defined on the open interval (-1, 1)")
    val = 0.5 * spec.theta * (1.0 / (1.0 + arr) + 1.0 / (1.0 - arr)) \
        + (spec.kappa - spec.theta_c)
    return float(val) if np.isscalar(s) else val


def _branch_point(spec: PotentialSpec) -> float:
    return 1.0 - spec.lam


def g_lambda(spec: PotentialSpec, s):
    """Regularized convex derivative: f0' inside (-1+lam, 1-lam), linear
    continuations of slope 1/lam outside. Globally Lipschitz and odd."""
    arr = np.atleast_1d(np.asarray(s, dtype=float))
    a = _branch_point(spec)
    ga = f0_prime(spec, a)
    out = np.empty_like(arr)
    mid = np.abs(arr) < a
    out[mid] = f0_prime(spec, arr[mid])
    hi = arr >= a
    out[hi] = ga + (arr[hi] - a) / spec.lam
    lo = arr <= -a
    out[lo] = -ga + (arr[lo] + a) / spec.lam
    return float(out[0]) if np.isscalar(s) else out.reshape(np.shape(s))


def g_lambda_prime(spec: PotentialSpec, s):
    """Slope of g_lambda (the convex Hessian used by the Newton solver)."""
    arr = np.atleast_1d(np.asarray(s, dtype=float))
    a = _branch_point(spec)
    out = np.full_like(arr, 1.0 / spec.lam)
    mid = np.abs(arr) < a
    out[mid] = f0_second(spec, arr[mid])
    return float(out[0]) if np.isscalar(s) else out.reshape(np.shape(s))


def f0_lambda(spec: PotentialSpec, s):
    """Antiderivative of g_lambda with f0_lambda(0) = f0(0) = 0.

    Equals f0 on [-1+lam, 1-lam]; quadratic tails of curvature 1/lam
    continue it to all of R. Convex by construction.
    """
    arr = np.atleast_1d(np.asarray(s, dtype=float))
    a = _branch_point(spec)
    ga = f0_prime(spec, a)
    fa = f0_value(spec, a)
    out = np.empty_like(arr)
    mid = np.abs(arr) <= a
    out[mid] = f0_value(spec, arr[mid])
    for sign, msk in ((1.0, arr > a), (-1.0, arr < -a)):
        d = sign * arr[msk] - a
        out[msk] = fa + ga * d + d * d / (2.0 * spec.lam)
    return float(out[0]) if np.isscalar(s) else out.reshape(np.shape(s))


def f_lambda(spec: PotentialSpec, s):
    """Regularized double-well density f0_lambda - kappa s^2 / 2."""
    arr = np.asarray(s, dtype=float)
    val = np.asarray(f0_lambda(spec, arr)) - 0.5 * spec.kappa * arr**2
    return float(val) if np.isscalar(s) else val


def f_lambda_energy(spec: PotentialSpec, c: ScalarField) -> float:
    """int f_lambda(c) over the domain."""
    return float(np.sum(f_lambda(spec, c.values)) * c.grid.cell_volume)


def f0_lambda_energy(spec: PotentialSpec, c: ScalarField) -> float:
    """int f0_lambda(c) over the domain (convex part of the step functional)."""
    return float(np.sum(f0_lambda(spec, c.values)) * c.grid.cell_volume)


def lipschitz_bound(spec: PotentialSpec) -> float:
    """Global Lipschitz constant of g_lambda: max(1/lam, f0''(1-lam))."""
    return max(1.0 / spec.lam, f0_second(spec, _branch_point(spec)))


def coercivity_constant(spec: PotentialSpec, bound: float = 3.0) -> float:
    """C with f0_lambda(s) >= s^2/(2 lam) - C on [-bound, bound].

    The difference s^2/(2 lam) - f0_lambda(s) is even and increasing in |s|
    beyond the branch point for the supported parameter ranges, so the
    range endpoint gives the constant; a dense grid check guards the
    interior.
    """
    ss = np.linspace(-bound, bound, 4001)
    gap = ss**2 / (2.0 * spec.lam) - np.asarray(f0_lambda(spec, ss))
    return float(max(np.max(gap), 0.0))
