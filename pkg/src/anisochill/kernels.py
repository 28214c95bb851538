"""Kernel families for the nonlocal interaction operator.

Three built-in families of even, possibly singular, possibly anisotropic
kernels ``k_eps`` concentrating at the origin as ``eps -> 0``:

* ``SCALED_SINGULAR`` -- a rescaled fractional-type kernel of order
  ``alpha in (0, 2)``: exactly ``c * |z|**(-d - alpha)`` up to radius eps,
  with damped middle and outer branches so the family mass concentrates.
  The constant ``c`` makes the radial bound integrate ``min(1, |z|**2)``
  to one.
* ``BBM_OVER_R2`` -- ``eta_eps(|z|) / |z|**2`` for a compactly supported
  mollifier ``eta_eps`` (uniform shell or triangular) normalized so that
  ``int_0^inf eta_eps(r) r**(d-1) dr = 2 / C_d`` with
  ``C_d = int_{S^{d-1}} (e1 . sigma)**2 dH^{d-1}``.
* ``AFFINE_TRANSFORMED`` -- a radial base family evaluated at ``B z`` for
  an invertible matrix ``B``; anisotropic unless ``B`` is orthogonal.

The module also computes truncated second-moment matrices
``a_jk(eps) = int_{|z| <= R} k_eps(z) z_j z_k dz`` and their extrapolated
``eps -> 0`` limit, the anisotropy matrix feeding the local limit model.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, NumericsError

logger = logging.getLogger(__name__)

_GAUSS_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}
_SINGULAR_CONST_CACHE: dict[tuple[int, float, float], float] = {}

#: eps sequence used by built-in diagnostic sweeps
BUILTIN_EPS_SEQUENCE = (0.4, 0.2, 0.1, 0.05)

DEFAULT_TAIL_DELTAS = (0.1, 0.25, 0.5)


class KernelFamily(enum.Enum):
    SCALED_SINGULAR = "SCALED_SINGULAR"
    BBM_OVER_R2 = "BBM_OVER_R2"
    AFFINE_TRANSFORMED = "AFFINE_TRANSFORMED"


class Mollifier(enum.Enum):
    UNIFORM_SHELL = "UNIFORM_SHELL"
    TRIANGULAR = "TRIANGULAR"


def sphere_measure(dim: int) -> float:
    """Surface measure of the unit sphere: 2 in 1d, 2*pi in 2d."""
    if dim == 1:
        return 2.0
    if dim == 2:
        return 2.0 * math.pi
    raise ConfigError(f"dim must be 1 or 2, got {dim}")


def _angular_second_moment(dim: int) -> float:
    # C_d = int_{S^{d-1}} (e1 . sigma)^2 dH^{d-1} = omega_d / d
    return sphere_measure(dim) / dim


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """One kernel family member with all its parameters.

    ``transform`` must be the identity unless the family is
    AFFINE_TRANSFORMED, in which case ``base_family`` names the radial
    family evaluated at ``transform @ z``.
    """

    family: KernelFamily
    epsilon: float
    dim: int = 1
    alpha: float = 1.0
    transform: np.ndarray | None = None
    mollifier: Mollifier = Mollifier.TRIANGULAR
    moment_radius: float = 1.0
    base_family: KernelFamily = KernelFamily.BBM_OVER_R2

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ConfigError(f"kernel.dim must be 1 or 2, got {self.dim}")
        if not (self.epsilon > 0.0):
            raise ConfigError(f"kernel.epsilon must be positive, got {self.epsilon}")
        if not (0.0 < self.alpha < 2.0):
            raise ConfigError(f"kernel.alpha must lie in (0, 2), got {self.alpha}")
        if not (self.moment_radius > 0.0):
            raise ConfigError("kernel.moment_radius must be positive")
        t = self.transform
        if t is None:
            t = np.eye(self.dim)
        t = np.asarray(t, dtype=float)
        if t.shape != (self.dim, self.dim):
            raise ConfigError(
                f"kernel.transform must be {self.dim}x{self.dim}, got {t.shape}"
            )
        if abs(np.linalg.det(t)) <= 1e-12:
            raise ConfigError("kernel.transform must be invertible (|det| > 1e-12)")
        if self.family is not KernelFamily.AFFINE_TRANSFORMED and not np.array_equal(
            t, np.eye(self.dim)
        ):
            raise ConfigError(
                "kernel.transform must be the identity unless family is "
                "AFFINE_TRANSFORMED"
            )
        if (
            self.family is KernelFamily.AFFINE_TRANSFORMED
            and self.base_family is KernelFamily.AFFINE_TRANSFORMED
        ):
            raise ConfigError("base_family must be a radial family")
        object.__setattr__(self, "transform", t)

    def base_spec(self) -> "KernelSpec":
        """The radial base of an affine-transformed spec (self if radial)."""
        if self.family is not KernelFamily.AFFINE_TRANSFORMED:
            return self
        return replace(self, family=self.base_family, transform=np.eye(self.dim))

    def with_epsilon(self, epsilon: float) -> "KernelSpec":
        return replace(self, epsilon=float(epsilon))


@dataclass
class MomentReport:
    """Second-moment diagnostics of one kernel family member."""

    epsilon: float
    second_moment: np.ndarray          # (d, d), truncated at moment_radius
    near_origin_mass: float            # int_{|z| <= 1} k |z|^2
    tail_mass: dict[float, float]      # delta -> int_{delta <= |z| <= R} k
    normalization_check: float         # unit-normalized radial-bound integral
    moment_radius: float
    warnings: list[str] = field(default_factory=list)


@dataclass
class LimitMatrixResult:
    matrix: np.ndarray
    eigenvalues: np.ndarray
    per_epsilon: list[MomentReport]
    rate_estimate: float | None
    used_fallback: bool
    warnings: list[str] = field(default_factory=list)


@dataclass
class AssumptionReport:
    evenness_ok: bool
    normalization_value: float
    tail_table: dict[float, list[tuple[float, float]]]  # delta -> [(eps, mass)]
    tails_decreasing: dict[float, bool]
    warnings: list[str] = field(default_factory=list)


# ---------------------------------------------------------------------------
# radial profiles
# ---------------------------------------------------------------------------

class _RadialProfile:
    """Radial profile r -> k(r) with known breakpoints and tail behaviour."""

    def __init__(self, fn, breakpoints, support=math.inf, tail_exponent=None):
        self.fn = fn
        self.breakpoints = tuple(sorted(set(float(b) for b in breakpoints)))
        self.support = support
        # k(r) ~ C r**tail_exponent beyond the last breakpoint (if unbounded)
        self.tail_exponent = tail_exponent

    def __call__(self, r):
        return self.fn(np.asarray(r, dtype=float))


def _singular_profile(dim, alpha, epsilon, constant=1.0) -> _RadialProfile:
    e = float(epsilon)

    def fn(r):
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        inner = r <= e
        mid = (r > e) & (r <= 1.0)
        outer = r > 1.0
        with np.errstate(divide="ignore"):
            out[inner] = e ** (alpha - 2.0) * r[inner] ** (-dim - alpha)
            out[mid] = e**alpha * r[mid] ** (-dim - alpha - 2.0)
            out[outer] = e**alpha * r[outer] ** (-dim - alpha)
        return constant * out

    return _RadialProfile(fn, (e, 1.0), tail_exponent=-dim - alpha)


def singular_normalization(dim: int, alpha: float, epsilon: float) -> float:
    """Constant of the SCALED_SINGULAR family.

    Solves for c such that the radial member integrates min(1, |z|^2) to
    one over R^d; computed by the deterministic radial quadrature below and
    cached per (dim, alpha, epsilon).
    """
    key = (dim, float(alpha), float(epsilon))
    if key not in _SINGULAR_CONST_CACHE:
        unit = _singular_profile(dim, alpha, epsilon)
        total = _radial_integral_profile(unit, dim + 1, 0.0, 1.0)
        total += _radial_tail_profile(unit, dim - 1, 1.0)
        total *= sphere_measure(dim)
        if total <= 0.0:
            raise NumericsError("normalization integral came out nonpositive")
        _SINGULAR_CONST_CACHE[key] = 1.0 / total
    return _SINGULAR_CONST_CACHE[key]


def _mollifier_profile(spec: KernelSpec):
    """(support radius, eta(r)) for the BBM family mollifier."""
    d, e = spec.dim, spec.epsilon
    cd = _angular_second_moment(d)
    if spec.mollifier is Mollifier.UNIFORM_SHELL:
        const = 2.0 * d / (cd * e**d)

        def eta(r):
            return np.where(r < e, const, 0.0)

    elif spec.mollifier is Mollifier.TRIANGULAR:
        const = 2.0 * d * (d + 1) / (cd * e**d)

        def eta(r):
            return np.where(r < e, const * np.maximum(1.0 - r / e, 0.0), 0.0)

    else:  # pragma: no cover
        raise ConfigError(f"unknown mollifier {spec.mollifier}")
    return e, eta


def radial_profile(spec: KernelSpec) -> _RadialProfile:
    """Radial profile of a radial spec (base profile for affine specs)."""
    s = spec.base_spec()
    if s.family is KernelFamily.SCALED_SINGULAR:
        c = singular_normalization(s.dim, s.alpha, s.epsilon)
        return _singular_profile(s.dim, s.alpha, s.epsilon, c)
    if s.family is KernelFamily.BBM_OVER_R2:
        e, eta = _mollifier_profile(s)

        def fn(r):
            r = np.asarray(r, dtype=float)
            with np.errstate(divide="ignore", invalid="ignore"):
                v = np.where(r > 0, eta(r) / np.maximum(r, 1e-300) ** 2, 0.0)
            return v

        return _RadialProfile(fn, (e,), support=e)
    raise ConfigError(f"no radial profile for family {s.family}")


def _bound_constant(spec: KernelSpec) -> float:
    """C0 such that (family) / C0 is the unit-normalized radial bound.

    SCALED_SINGULAR bakes the normalization into its constant; the BBM
    families integrate min(1, |z|^2) to 2d by the mollifier normalization.
    """
    s = spec.base_spec()
    if s.family is KernelFamily.SCALED_SINGULAR:
        return 1.0
    return 2.0 * s.dim


# ---------------------------------------------------------------------------
# kernel evaluation
# ---------------------------------------------------------------------------

def eval_kernel(spec: KernelSpec, z) -> float:
    """Evaluate k_eps at one offset z (scalar in 1d, length-2 in 2d)."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.shape != (spec.dim,):
        raise ConfigError(f"offset must have shape ({spec.dim},), got {z.shape}")
    if float(np.linalg.norm(z)) == 0.0:
        raise ConfigError("kernel is singular at the origin; z must be nonzero")
    return float(eval_offsets(spec, z[None, :])[0])


def eval_offsets(spec: KernelSpec, offsets: np.ndarray) -> np.ndarray:
    """Vectorized kernel evaluation on an (N, d) array of nonzero offsets."""
    offsets = np.asarray(offsets, dtype=float)
    if spec.family is KernelFamily.AFFINE_TRANSFORMED:
        offsets = offsets @ spec.transform.T
    prof = radial_profile(spec)
    r = np.sqrt(np.sum(offsets * offsets, axis=-1))
    return prof(r)


# ---------------------------------------------------------------------------
# graded radial quadrature
# ---------------------------------------------------------------------------

def _gauss(n: int):
    if n not in _GAUSS_CACHE:
        _GAUSS_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GAUSS_CACHE[n]


def _panel_integral(f, a, b, order):
    x, w = _gauss(order)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return half * float(np.sum(w * f(mid + half * x)))


def _graded_integral(f, lo, hi, *, levels=40, ratio=0.5, order=8):
    """Integrate f over (lo, hi), geometric refinement toward a singular 0.

    For lo == 0 the innermost sliver is closed with a local power-law fit,
    exact for the piecewise-power built-in profiles.
    """
    if hi <= lo:
        return 0.0
    if lo > 0.0:
        # geometric panels resolve steep power decay away from the origin
        edges = np.geomspace(lo, hi, 17)
        return sum(
            _panel_integral(f, a, b, order) for a, b in zip(edges[:-1], edges[1:])
        )
    total = 0.0
    r = hi
    for _ in range(levels):
        total += _panel_integral(f, r * ratio, r, order)
        r *= ratio
    s1, s2 = r, 0.5 * r
    f1, f2 = float(f(np.array([s1]))[0]), float(f(np.array([s2]))[0])
    if f1 <= 0.0 or f2 <= 0.0:
        return total
    q = math.log(f1 / f2) / math.log(s1 / s2)
    if q <= -1.0:
        raise NumericsError(
            f"radial integrand not integrable near 0 (exponent {q:.3f})"
        )
    return total + f1 * s1 / (q + 1.0)


def _radial_integral_profile(prof: _RadialProfile, power, lo, hi, *, order=8):
    """integral of k(r) * r**power over (lo, hi), hi finite."""
    hi = min(hi, prof.support)
    if hi <= lo:
        return 0.0

    def f(r):
        return prof(r) * r**power

    cuts = [lo] + [b for b in prof.breakpoints if lo < b < hi] + [hi]
    return sum(
        _graded_integral(f, a, b, order=order) for a, b in zip(cuts[:-1], cuts[1:])
    )


def _radial_tail_profile(prof: _RadialProfile, power, lo):
    """integral of k(r) * r**power over (lo, infinity)."""
    if prof.support < math.inf:
        return _radial_integral_profile(prof, power, lo, prof.support)
    last = max(prof.breakpoints)
    a = max(lo, last)
    head = _radial_integral_profile(prof, power, lo, a)
    q = prof.tail_exponent + power
    if q >= -1.0:
        raise NumericsError("kernel tail integral diverges")
    c = float(prof(np.array([a * 1.000001]))[0]) / (a * 1.000001) ** prof.tail_exponent
    return head - c * a ** (q + 1.0) / (q + 1.0)


def _radial_cumulative(prof: _RadialProfile, power, radii, *, order=8, base=0.0):
    """F(R) = int_base^R k(r) r**power dr evaluated at an array of radii.

    Shares the (possibly graded) head across all requests and fills the
    gaps with panel quadrature split at profile breakpoints. ``base`` must
    be positive whenever the integrand is not integrable at the origin.
    """
    radii = np.asarray(radii, dtype=float)
    flat = radii.ravel()
    caps = np.minimum(flat, prof.support)
    uniq, inv = np.unique(caps, return_inverse=True)

    def f(r):
        return prof(r) * r**power

    vals = np.empty_like(uniq)
    prev_r = float(uniq[0])
    acc = _radial_integral_profile(prof, power, base, prev_r, order=order)
    vals[0] = acc
    for i in range(1, len(uniq)):
        r = float(uniq[i])
        cuts = [prev_r] + [b for b in prof.breakpoints if prev_r < b < r] + [r]
        for a, b in zip(cuts[:-1], cuts[1:]):
            acc += _panel_integral(f, a, b, order)
        vals[i] = acc
        prev_r = r
    return vals[inv].reshape(radii.shape)


def _with_error_estimate(compute):
    """Run a quadrature at two orders and insist they agree to 1e-6."""
    coarse = np.asarray(compute(8))
    fine = np.asarray(compute(12))
    scale = max(float(np.max(np.abs(fine))), 1e-300)
    err = float(np.max(np.abs(fine - coarse))) / scale
    if err > 1e-6:
        raise NumericsError(
            f"moment quadrature did not converge (relative error {err:.3e})"
        )
    return fine


# ---------------------------------------------------------------------------
# second moments
# ---------------------------------------------------------------------------

def _radial_moment_matrix(spec, radius, order=8) -> np.ndarray:
    d = spec.dim
    f2 = _radial_integral_profile(radial_profile(spec), d + 1, 0.0, radius, order=order)
    return (sphere_measure(d) / d) * f2 * np.eye(d)


def _affine_moment_matrix(spec, radius, order=8, nang=512) -> np.ndarray:
    """Moments of k_base(B z) over |z| <= radius, polar in u = B z."""
    b = spec.transform
    binv = np.linalg.inv(b)
    det = abs(np.linalg.det(b))
    prof = radial_profile(spec)
    d = spec.dim
    if d == 1:
        s = abs(float(b[0, 0]))
        f2 = _radial_integral_profile(prof, 2, 0.0, s * radius, order=order)
        return np.array([[2.0 * f2 / (s**2 * det)]])
    theta = (np.arange(nang) + 0.5) * (2.0 * math.pi / nang)
    u_hat = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    w_hat = u_hat @ binv.T                        # B^{-1} u_hat
    rmax = radius / np.linalg.norm(w_hat, axis=1)
    f2 = _radial_cumulative(prof, d + 1, rmax, order=order)
    acc = np.einsum("a,ai,aj->ij", f2, w_hat, w_hat)
    return acc * (2.0 * math.pi / nang / det)


def _tail_mass(spec, delta, radius, order=8) -> float:
    prof = radial_profile(spec)
    d = spec.dim
    if delta >= radius:
        return 0.0
    if spec.family is not KernelFamily.AFFINE_TRANSFORMED:
        return sphere_measure(d) * _radial_integral_profile(
            prof, d - 1, delta, radius, order=order
        )
    b = spec.transform
    det = abs(np.linalg.det(b))
    if d == 1:
        s = abs(float(b[0, 0]))
        return 2.0 * _radial_integral_profile(
            prof, 0, s * delta, s * radius, order=order
        ) / det
    nang = 512
    theta = (np.arange(nang) + 0.5) * (2.0 * math.pi / nang)
    w_hat = np.stack([np.cos(theta), np.sin(theta)], axis=1) @ np.linalg.inv(b).T
    scale = 1.0 / np.linalg.norm(w_hat, axis=1)
    base = float(np.min(delta * scale))   # > 0: keeps clear of the singularity
    f_hi = _radial_cumulative(prof, d - 1, radius * scale, order=order, base=base)
    f_lo = _radial_cumulative(prof, d - 1, delta * scale, order=order, base=base)
    return float(np.sum(f_hi - f_lo)) * (2.0 * math.pi / nang / det)


def second_moment(spec: KernelSpec, tail_deltas=DEFAULT_TAIL_DELTAS) -> MomentReport:
    """Truncated second-moment matrix and mass diagnostics of one member.

    The moment integral runs over |z| <= spec.moment_radius: heavy-tailed
    members have divergent full-space second moments, while pair distances
    inside a bounded domain never exceed its diameter. The truncation
    radius is recorded in the report.
    """
    radius = spec.moment_radius
    warnings_list: list[str] = []

    if spec.family is KernelFamily.AFFINE_TRANSFORMED:
        mat = _with_error_estimate(lambda o: _affine_moment_matrix(spec, radius, o))
        near_mat = _with_error_estimate(lambda o: _affine_moment_matrix(spec, 1.0, o))
        near = float(np.trace(near_mat))
    else:
        mat = _with_error_estimate(lambda o: _radial_moment_matrix(spec, radius, o))
        near = float(
            sphere_measure(spec.dim)
            * _radial_integral_profile(radial_profile(spec), spec.dim + 1, 0.0, 1.0)
        )

    base_prof = radial_profile(spec.base_spec())
    d = spec.dim
    norm_check = (
        sphere_measure(d)
        * (
            _radial_integral_profile(base_prof, d + 1, 0.0, 1.0)
            + _radial_tail_profile(base_prof, d - 1, 1.0)
        )
        / _bound_constant(spec)
    )

    tails = {float(dl): float(_tail_mass(spec, float(dl), radius)) for dl in tail_deltas}
    asym = float(np.max(np.abs(mat - mat.T)))
    if asym > 1e-10 * max(float(np.max(np.abs(mat))), 1e-300):
        warnings_list.append(f"moment matrix asymmetry {asym:.3e}")
    return MomentReport(
        epsilon=spec.epsilon,
        second_moment=mat,
        near_origin_mass=near,
        tail_mass=tails,
        normalization_check=float(norm_check),
        moment_radius=radius,
        warnings=warnings_list,
    )


def limit_matrix(spec_template: KernelSpec, eps_list) -> LimitMatrixResult:
    """Extrapolated eps -> 0 limit of the second moments over eps_list.

    Richardson extrapolation at assumed first-order rate; when the observed
    rate falls outside (0.5, 2) the smallest-eps value is returned with a
    warning. The result is symmetrized and its spectrum reported.
    """
    eps = [float(e) for e in eps_list]
    if len(eps) < 3:
        raise ConfigError("eps_list needs at least 3 entries")
    if any(b >= a for a, b in zip(eps[:-1], eps[1:])):
        raise ConfigError("eps_list must be strictly decreasing")

    reports = [second_moment(spec_template.with_epsilon(e)) for e in eps]
    mats = [r.second_moment for r in reports]
    scale = max(float(np.max(np.abs(m))) for m in mats)
    atol = 1e-10 * scale
    diffs = [float(np.max(np.abs(b - a))) for a, b in zip(mats[:-1], mats[1:])]
    for k in range(len(diffs) - 1):
        if diffs[k + 1] > max(diffs[k] * 1.10, atol):
            lines = "\n".join(
                f"  eps={e:g}: {np.array2string(m, precision=8)}"
                for e, m in zip(eps, mats)
            )
            raise NumericsError(
                "moment sequence is not settling "
                f"(successive differences {diffs}); per-eps matrices:\n{lines}"
            )

    warnings_list: list[str] = []
    rate = None
    used_fallback = False
    if diffs[-1] <= atol:
        limit = mats[-1]
    else:
        if diffs[-2] > atol:
            rate = math.log(diffs[-2] / diffs[-1]) / math.log(eps[-2] / eps[-1])
        if rate is not None and not (0.5 < rate < 2.0):
            msg = (f"observed moment rate {rate:.3f} outside (0.5, 2); "
                   "returning the smallest-eps moment without extrapolation")
            warnings_list.append(msg)
            logger.warning(msg)
            used_fallback = True
            limit = mats[-1]
        else:
            e1, e2 = eps[-2], eps[-1]
            limit = mats[-1] + (mats[-1] - mats[-2]) * e2 / (e1 - e2)

    limit = 0.5 * (limit + limit.T)
    eigs = np.linalg.eigvalsh(limit)
    return LimitMatrixResult(
        matrix=limit,
        eigenvalues=eigs,
        per_epsilon=reports,
        rate_estimate=rate,
        used_fallback=used_fallback,
        warnings=warnings_list,
    )


def check_assumptions(
    spec: KernelSpec,
    deltas=DEFAULT_TAIL_DELTAS,
    eps_sequence=BUILTIN_EPS_SEQUENCE,
    n_samples: int = 64,
    seed: int = 0,
) -> AssumptionReport:
    """Evenness, normalization and tail-decay diagnostics for a family.

    Raises ConfigError when the unit normalization of the radial bound is
    off by more than 1e-4 (family constants wrong); smaller deviations are
    recorded as warnings.
    """
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n_samples, spec.dim))
    z = z[np.linalg.norm(z, axis=-1) > 1e-8]
    even_ok = bool(np.array_equal(eval_offsets(spec, z), eval_offsets(spec, -z)))

    report = second_moment(spec, tail_deltas=deltas)
    norm = report.normalization_check
    if abs(norm - 1.0) > 1e-4:
        raise ConfigError(
            f"radial-bound normalization is {norm!r}, off by more than 1e-4; "
            "family constants are wrong"
        )
    warnings_list = []
    if abs(norm - 1.0) > 1e-6:
        warnings_list.append(f"normalization deviates by {abs(norm - 1.0):.2e}")

    tail_table: dict[float, list[tuple[float, float]]] = {}
    decreasing: dict[float, bool] = {}
    for dl in deltas:
        rows = [
            (float(e), float(_tail_mass(spec.with_epsilon(e), float(dl),
                                         spec.moment_radius)))
            for e in eps_sequence
        ]
        tail_table[float(dl)] = rows
        masses = [m for _, m in rows]
        decreasing[float(dl)] = all(
            b <= a + 1e-12 for a, b in zip(masses[:-1], masses[1:])
        )
    return AssumptionReport(
        evenness_ok=even_ok,
        normalization_value=float(norm),
        tail_table=tail_table,
        tails_decreasing=decreasing,
        warnings=warnings_list,
    )


def moments_to_csv(reports: list[MomentReport], dim: int) -> list[str]:
    """CSV lines (header included) for a list of moment reports."""
    if dim == 1:
        header = "epsilon,a11,near_origin_mass,normalization_check"
    else:
        header = "epsilon,a11,a12,a21,a22,near_origin_mass,normalization_check"
    lines = [header]
    for r in reports:
        m = r.second_moment
        if dim == 1:
            vals = [r.epsilon, m[0, 0], r.near_origin_mass, r.normalization_check]
        else:
            vals = [
                r.epsilon, m[0, 0], m[0, 1], m[1, 0], m[1, 1],
                r.near_origin_mass, r.normalization_check,
            ]
        lines.append(",".join(format(float(v), ".17g") for v in vals))
    return lines
