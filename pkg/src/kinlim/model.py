"""Closed-form layer: model constants, local equilibrium, entropy, Bregman
divergence, and the internal-variable extension of velocity profiles.

Everything here is a pure function of its arguments.  The continuous model is
parametrized by an adiabatic exponent ``gamma`` in ``(1, 1 + 2/(d+2)]`` and the
spatial dimension ``d``; all other constants are derived.  The local
equilibrium at density ``rho`` is the compactly supported profile

    m(rho, v) = c * (b0 * rho**(gamma-1) - |v|^2)_+ ** (n/2),

whose velocity moments reproduce the density ``rho``, zero momentum, and the
isotropic pressure ``rho**gamma``.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy.special import gammaln

from .errors import ConsistencyError, NumericalFailure, ParameterError

__all__ = [
    "ModelParams",
    "VelocityQuadrature",
    "derive_params",
    "equilibrium_value",
    "support_radius",
    "psi_n",
    "psi_n_prime",
    "entropy_density",
    "bregman",
    "extended_moments",
    "discrete_equilibrium",
    "pow_pos",
]


@dataclass(frozen=True)
class ModelParams:
    """Adiabatic exponent, dimension and every derived constant.

    ``n`` is the internal-variable exponent ``2/(gamma-1) - d`` (always >= 2),
    ``c_gamma_d`` the equilibrium normalization, ``b0 = 2*gamma/(gamma-1)``
    the support coefficient, and ``b1``, ``b2`` the weights of the
    internal-variable extension.  The product identity ``b1*b2 = n*c_gamma_d``
    is checked at construction time.
    """

    gamma: float
    d: int
    n: float
    c_gamma_d: float
    b0: float
    b1: float
    b2: float

    def __post_init__(self):
        prod = self.b1 * self.b2
        target = self.n * self.c_gamma_d
        if not math.isclose(prod, target, rel_tol=1e-12):
            raise NumericalFailure(
                f"constant identity b1*b2 = n*c failed: {prod!r} vs {target!r}"
            )
        for name in ("n", "c_gamma_d", "b0", "b1", "b2"):
            if not getattr(self, name) > 0.0:
                raise ParameterError(f"derived constant {name} must be positive")


def gamma_upper_bound(d):
    """Largest admissible adiabatic exponent for dimension ``d``."""
    return 1.0 + 2.0 / (d + 2)


def derive_params(gamma, d):
    """Derive all model constants for an admissible ``(gamma, d)`` pair.

    Raises ParameterError if ``d < 1`` or ``gamma`` falls outside
    ``(1, 1 + 2/(d+2)]``.  Gamma-function factors are evaluated through
    log-gamma so that large ``b0/2`` (gamma close to 1) cannot overflow.
    """
    if not isinstance(d, (int, np.integer)) or d < 1:
        raise ParameterError(f"dimension d must be an integer >= 1, got {d!r}")
    d = int(d)
    hi = gamma_upper_bound(d)
    if not (1.0 < gamma <= hi + 1e-12):
        raise ParameterError(
            f"gamma must lie in (1, {hi!r}] for d={d}, got {gamma!r}"
        )
    gm1 = gamma - 1.0
    n = 2.0 / gm1 - d
    b0 = 2.0 * gamma / gm1
    # c = b0^{-1/(gamma-1)} * Gamma(gamma/(gamma-1)) / (pi^{d/2} Gamma(1+n/2))
    log_c = (
        -math.log(b0) / gm1
        + gammaln(gamma / gm1)
        - 0.5 * d * math.log(math.pi)
        - gammaln(1.0 + 0.5 * n)
    )
    # b1 = 2 pi^{n/2} / Gamma(n/2),  b2 = (pi b0)^{-1/(gamma-1)} Gamma(b0/2)
    log_b1 = math.log(2.0) + 0.5 * n * math.log(math.pi) - gammaln(0.5 * n)
    log_b2 = -math.log(math.pi * b0) / gm1 + gammaln(0.5 * b0)
    return ModelParams(
        gamma=gamma,
        d=d,
        n=n,
        c_gamma_d=math.exp(log_c),
        b0=b0,
        b1=math.exp(log_b1),
        b2=math.exp(log_b2),
    )


def pow_pos(x, exponent):
    """(x)_+ ** exponent with an explicit zero branch.

    The fractional power is evaluated as exp(exponent*log(x)) on the strictly
    positive part, which keeps the support boundary NaN-free.
    """
    x = np.asarray(x, dtype=float)
    pos = x > 0.0
    out = np.zeros_like(x)
    if np.any(pos):
        out[pos] = np.exp(exponent * np.log(x[pos]))
    if out.ndim == 0:
        return float(out)
    return out


def _v_sq(v, d):
    """|v|^2 for a scalar velocity (d=1) or stacked d-vectors (last axis)."""
    v = np.asarray(v, dtype=float)
    if d == 1 and (v.ndim == 0 or v.shape[-1] != 1):
        return v * v
    if v.shape[-1] != d:
        raise ParameterError(f"velocity vector must have {d} components, got shape {v.shape}")
    return np.sum(v * v, axis=-1)


def equilibrium_value(p, rho, v):
    """Local equilibrium profile c*(b0*rho^(gamma-1) - |v|^2)_+^(n/2).

    ``rho`` may be a scalar or an array broadcastable against ``|v|^2``;
    negative densities raise ParameterError.  ``v`` is a scalar (d=1) or an
    array whose last axis holds the d components.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0.0):
        raise ParameterError("density must be nonnegative")
    w = _v_sq(v, p.d)
    arg = p.b0 * pow_pos(rho, p.gamma - 1.0) - w
    return p.c_gamma_d * pow_pos(arg, 0.5 * p.n)


def support_radius(p, rho):
    """Velocity-space support radius sqrt(b0)*rho^((gamma-1)/2) of the equilibrium."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0.0):
        raise ParameterError("density must be nonnegative")
    out = math.sqrt(p.b0) * pow_pos(rho, 0.5 * (p.gamma - 1.0))
    return out


def psi_n(p, s):
    """Internal entropy density Psi(s) = s^(1+2/n) / ((1+2/n) * 2 c^(2/n))."""
    s = np.asarray(s, dtype=float)
    if np.any(s < 0.0):
        raise ParameterError("psi_n requires nonnegative argument")
    q = 1.0 + 2.0 / p.n
    scale = 2.0 * p.c_gamma_d ** (2.0 / p.n) * q
    out = np.power(s, q) / scale
    return float(out) if out.ndim == 0 else out


def psi_n_prime(p, s):
    """Derivative Psi'(s) = s^(2/n) / (2 c^(2/n))."""
    s = np.asarray(s, dtype=float)
    if np.any(s < 0.0):
        raise ParameterError("psi_n_prime requires nonnegative argument")
    out = np.power(s, 2.0 / p.n) / (2.0 * p.c_gamma_d ** (2.0 / p.n))
    return float(out) if out.ndim == 0 else out


def entropy_density(p, f_val, v):
    """Kinetic entropy density H(f, v) = |v|^2 f / 2 + Psi(f)."""
    f_val = np.asarray(f_val, dtype=float)
    if np.any(f_val < 0.0):
        raise ParameterError("entropy_density requires nonnegative f")
    w = _v_sq(v, p.d)
    out = 0.5 * w * f_val + psi_n(p, f_val)
    return float(out) if np.ndim(out) == 0 else out


def bregman(p, f_val, g_val):
    """Bregman divergence Psi(f) - Psi(g) - Psi'(g)(f-g); >= 0 for f,g >= 0."""
    f_val = np.asarray(f_val, dtype=float)
    g_val = np.asarray(g_val, dtype=float)
    if np.any(f_val < 0.0) or np.any(g_val < 0.0):
        raise ParameterError("bregman requires nonnegative arguments")
    out = psi_n(p, f_val) - psi_n(p, g_val) - psi_n_prime(p, g_val) * (f_val - g_val)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class VelocityQuadrature:
    """Midpoint quadrature over a symmetric velocity box.

    ``centers`` holds the cell centers with shape (N,) for d=1 or (N, d)
    in general; ``cell_volume`` is the product of spacings.
    """

    centers: np.ndarray
    cell_volume: float
    mass_rtol: float = 1e-6

    @classmethod
    def midpoint(cls, d, v_max, n_per_axis, mass_rtol=1e-6):
        if n_per_axis % 2 != 0:
            raise ParameterError("n_per_axis must be even for a symmetric grid")
        dv = 2.0 * v_max / n_per_axis
        axis = -v_max + dv * (np.arange(n_per_axis) + 0.5)
        if d == 1:
            centers = axis
        else:
            grids = np.meshgrid(*([axis] * d), indexing="ij")
            centers = np.stack([g.ravel() for g in grids], axis=-1)
        return cls(centers=centers, cell_volume=dv**d, mass_rtol=mass_rtol)

    def v_squared(self, d):
        if self.centers.ndim == 1:
            return self.centers**2
        if self.centers.shape[-1] != d:
            raise ParameterError("quadrature dimension mismatch")
        return np.sum(self.centers**2, axis=-1)


def extended_moments(p, f_slice, rho, quad):
    """Weighted moments of the internal-variable extension of a profile.

    Returns the pair ``(F_hat, D_hat)`` where, with ``m`` the equilibrium at
    density ``rho`` and the extension lifting profiles to (v, I) against the
    measure b1*I^(n-1) dI,

        F_hat = integral of (|v|^2 + I^2) |fhat - mhat|,
        D_hat = integral of (|v|^2 + I^2) (fhat - mhat).

    The I-integral is exact: substituting u = I^n turns the measure into
    (b1/n) du and both integrals reduce per velocity node to

        |v|^2 (f - m) + 2*(Psi(f) - Psi(m))        (signed),
        |v|^2 |f - m| + 2*|Psi(f) - Psi(m)|        (absolute),

    so only the v-integral is approximated (midpoint rule).  In particular
    D_hat equals twice the entropy gap of the profile relative to the
    equilibrium, up to the velocity quadrature error.
    """
    f_slice = np.asarray(f_slice, dtype=float)
    if np.any(f_slice < 0.0) or not np.all(np.isfinite(f_slice)):
        raise ParameterError("profile must be nonnegative and finite")
    if rho < 0.0:
        raise ParameterError("density must be nonnegative")
    mass = float(np.sum(f_slice) * quad.cell_volume)
    scale = max(abs(rho), 1e-300)
    if abs(mass - rho) > quad.mass_rtol * scale:
        raise ConsistencyError(
            f"profile mass {mass!r} does not match declared density {rho!r}"
        )
    w = quad.v_squared(p.d)
    m = equilibrium_value(p, rho, _centers_as_vectors(quad, p.d))
    df = f_slice - m
    dpsi = psi_n(p, f_slice) - psi_n(p, m)
    d_hat = float(np.sum(w * df + 2.0 * dpsi) * quad.cell_volume)
    f_hat = float(np.sum(w * np.abs(df) + 2.0 * np.abs(dpsi)) * quad.cell_volume)
    return f_hat, d_hat


def _centers_as_vectors(quad, d):
    if d == 1 and quad.centers.ndim == 1:
        return quad.centers
    return quad.centers


def discrete_equilibrium(p, masses, v_squared, cell_volume, rtol=1e-15, max_iter=200):
    """Grid equilibrium profiles whose *discrete* mass matches the target.

    For each target mass this solves for the support parameter ``b`` in

        c * sum_j (b - |v_j|^2)_+^(n/2) * cell_volume = mass

    by safeguarded Newton iteration (bisection fallback) on the active set.
    The result is the exact minimizer of the discrete kinetic entropy sum
    under the discrete mass constraint, which is what makes the relaxation
    step mass-exact and the entropy gap nonnegative at the grid level.

    Cells converge when the residual drops below ``rtol*mass + atol`` with
    ``atol = 1e-16 * max(masses)``, or when the enclosing bracket collapses
    to machine width (tiny masses whose support parameter sits within a few
    ulps of the smallest grid speed; the returned profile is then the best
    representable one).  Returns ``(values, b)`` with ``values`` of shape
    ``masses.shape + v_squared.shape``.
    """
    masses_in = np.asarray(masses, dtype=float)
    masses = np.atleast_1d(masses_in).ravel()
    if np.any(masses < 0.0) or not np.all(np.isfinite(masses)):
        raise ParameterError("masses must be nonnegative and finite")
    w = np.asarray(v_squared, dtype=float).ravel()
    half_n = 0.5 * p.n
    c_vol = p.c_gamma_d * cell_volume
    w_min = float(w.min())

    def mass_of(b, wsub=w):
        return c_vol * np.sum(pow_pos(b[:, None] - wsub[None, :], half_n), axis=1)

    def dmass_of(b, wsub=w):
        arg = b[:, None] - wsub[None, :]
        if half_n == 1.0:
            inner = (arg > 0.0).astype(float)
        else:
            inner = pow_pos(arg, half_n - 1.0)
        return c_vol * half_n * np.sum(inner, axis=1)

    b = np.zeros_like(masses)
    atol = 1e-16 * float(masses.max(initial=0.0))
    idx = np.flatnonzero(masses > 0.0)
    if idx.size:
        tgt = masses[idx]
        lo = np.full_like(tgt, w_min)
        hi = np.maximum(p.b0 * pow_pos(tgt, p.gamma - 1.0), w_min) * 1.5 + float(np.ptp(w)) * 1e-3 + 1e-12
        for _ in range(400):
            too_low = mass_of(hi) < tgt
            if not np.any(too_low):
                break
            hi[too_low] = 2.0 * hi[too_low] + 1.0
        else:
            raise NumericalFailure("could not bracket the equilibrium support parameter")
        x = np.clip(p.b0 * pow_pos(tgt, p.gamma - 1.0), np.nextafter(lo, np.inf), hi)
        for _ in range(max_iter):
            g = mass_of(x) - tgt
            width_tol = 4.0 * np.finfo(float).eps * np.maximum(np.abs(x), abs(w_min))
            done = (np.abs(g) <= rtol * tgt + atol) | (hi - lo <= width_tol)
            if np.all(done):
                b[idx] = x
                break
            keep = ~done
            b[idx[done]] = x[done]
            idx, tgt, x, lo, hi, g = idx[keep], tgt[keep], x[keep], lo[keep], hi[keep], g[keep]
            above = g > 0.0
            hi = np.where(above, x, hi)
            lo = np.where(above, lo, x)
            dg = dmass_of(x)
            with np.errstate(divide="ignore", invalid="ignore"):
                x_new = x - g / np.where(dg > 0.0, dg, 1.0)
            bad = ~np.isfinite(x_new) | (x_new <= lo) | (x_new >= hi) | (dg <= 0.0)
            x = np.where(bad, 0.5 * (lo + hi), x_new)
        else:
            raise NumericalFailure("equilibrium support solve did not converge")
    masses = np.atleast_1d(masses_in).ravel()
    values = p.c_gamma_d * pow_pos(b[:, None] - w[None, :], half_n)
    shape = masses_in.shape + np.asarray(v_squared).shape if masses_in.ndim else np.asarray(v_squared).shape
    b_out = b.reshape(masses_in.shape) if masses_in.ndim else float(b[0])
    return values.reshape(shape), b_out
