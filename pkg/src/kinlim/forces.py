"""External and interaction potentials and the nonlocal force on the torus.

The force splits as (gradient of V) + (gradient of K convolved with rho).
Interaction kernels are sampled with minimal-image displacements, which keeps
the discrete kernel odd under negation and therefore the total interaction
force exactly zero for even K.  The convolution has two implementations: a
direct O(Nx^(2d)) reference sum and an FFT path that must match it to 1e-12
relative error.

Rapidly decaying kernels (gaussian, morse) are faithful on the torus once the
box holds ~6 decay widths; unbounded built-ins (quadratic V, power-law K) are
allowed but log a warning because the torus distorts them at the boundary.
"""

from dataclasses import dataclass, field
import logging
import math

import numpy as np

from .errors import ParameterError, ShapeError
from .fields import DensityField, MomentumField, SpatialGrid

logger = logging.getLogger("kinlim.forces")

__all__ = [
    "PotentialSpec",
    "ForceField",
    "ValidationReport",
    "grad_V",
    "conv_grad_K",
    "conv_grad_K_direct",
    "force_field",
    "energies",
    "validate_assumptions",
]

_BUILTIN_KINDS = ("zero", "quadratic", "gaussian", "morse", "power", "tabulated")
_UNBOUNDED_KINDS = ("quadratic", "power")


@dataclass(frozen=True)
class PotentialSpec:
    """A potential: built-in radial kind with parameters, or tabulated samples.

    Roles: "external" for confinement potentials V, "interaction" for
    convolution kernels K.  All built-ins are radial, hence even, so any
    interaction kernel constructed here is symmetric.
    """

    kind: str
    role: str
    params: tuple = ()
    samples: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in _BUILTIN_KINDS:
            raise ParameterError(f"unknown potential kind {self.kind!r}")
        if self.role not in ("external", "interaction"):
            raise ParameterError(f"potential role must be external|interaction, got {self.role!r}")
        if self.kind != "tabulated" and not all(math.isfinite(q) for q in self.params):
            raise ParameterError("potential parameters must be finite")

    @classmethod
    def zero(cls, role):
        return cls("zero", role)

    @classmethod
    def quadratic(cls, a, role="external"):
        """V(x) = a |x|^2."""
        return cls("quadratic", role, (float(a),))

    @classmethod
    def gaussian(cls, amplitude, width, role="interaction"):
        """U(x) = A exp(-|x|^2 / w^2)."""
        if width <= 0.0:
            raise ParameterError("gaussian width must be positive")
        return cls("gaussian", role, (float(amplitude), float(width)))

    @classmethod
    def morse(cls, amplitude, rate, role="interaction"):
        """U(x) = A exp(-rate |x|)."""
        if rate <= 0.0:
            raise ParameterError("morse rate must be positive")
        return cls("morse", role, (float(amplitude), float(rate)))

    @classmethod
    def power(cls, c_a, exponent, offset=0.0, role="interaction"):
        """U(x) = c_a |x|^a + c_b (unbounded for a > 0)."""
        return cls("power", role, (float(c_a), float(exponent), float(offset)))

    @classmethod
    def tabulated(cls, samples, role):
        return cls("tabulated", role, (), np.asarray(samples, dtype=float))

    def is_unbounded(self):
        return self.kind in _UNBOUNDED_KINDS

    def value_radial(self, r):
        """Potential value as a function of radius (built-ins only)."""
        r = np.asarray(r, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(r)
        if self.kind == "quadratic":
            (a,) = self.params
            return a * r**2
        if self.kind == "gaussian":
            amp, w = self.params
            return amp * np.exp(-(r**2) / w**2)
        if self.kind == "morse":
            amp, rate = self.params
            return amp * np.exp(-rate * np.abs(r))
        if self.kind == "power":
            c_a, a, c_b = self.params
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.where(r > 0.0, c_a * np.abs(r) ** a, 0.0 if a > 0 else np.inf)
            return out + c_b
        raise ParameterError(f"no radial closed form for kind {self.kind!r}")

    def radial_derivative(self, r):
        """dU/dr for built-ins; the gradient is (dU/dr) * x/|x|."""
        r = np.asarray(r, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(r)
        if self.kind == "quadratic":
            (a,) = self.params
            return 2.0 * a * r
        if self.kind == "gaussian":
            amp, w = self.params
            return -2.0 * amp * r / w**2 * np.exp(-(r**2) / w**2)
        if self.kind == "morse":
            amp, rate = self.params
            return -amp * rate * np.exp(-rate * r)
        if self.kind == "power":
            c_a, a, _ = self.params
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(r > 0.0, c_a * a * np.abs(r) ** (a - 1.0), 0.0)
        raise ParameterError(f"no radial closed form for kind {self.kind!r}")


@dataclass
class ForceField:
    """Force vector per spatial cell; values shape (d,) + (Nx,)*d."""

    grid: SpatialGrid
    values: np.ndarray

    def __post_init__(self):
        expected = (self.grid.d,) + self.grid.shape()
        if self.values.shape != expected:
            raise ShapeError(f"force values have shape {self.values.shape}, expected {expected}")
        if not np.all(np.isfinite(self.values)):
            raise ParameterError("force field has non-finite entries")

    def max_abs(self):
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


_warned_unbounded = set()


def _warn_if_unbounded(spec):
    if spec.is_unbounded() and (spec.kind, spec.role) not in _warned_unbounded:
        _warned_unbounded.add((spec.kind, spec.role))
        logger.warning(
            "potential kind %r is unbounded; torus truncation distorts it near "
            "the boundary (decay-margin check disabled)", spec.kind,
        )


def _gradient_at(spec, coords):
    """Analytic gradient of a built-in at stacked points (..., d)."""
    r = np.sqrt(np.sum(coords**2, axis=-1))
    dur = spec.radial_derivative(np.where(r > 0.0, r, 1.0))
    with np.errstate(invalid="ignore"):
        unit = np.where(r[..., None] > 0.0, coords / np.where(r[..., None] > 0.0, r[..., None], 1.0), 0.0)
    grad = dur[..., None] * unit
    # removable/odd singularity at the origin cell averages to zero
    grad[r == 0.0] = 0.0
    return grad


def grad_V(spec, grid):
    """Gradient of the external potential at the cell centers.

    Built-ins use the analytic gradient; tabulated potentials use centered
    differences with periodic wrap.
    """
    if spec.role != "external":
        raise ParameterError("grad_V expects a potential with role 'external'")
    if spec.kind == "tabulated":
        if spec.samples.shape != grid.shape():
            raise ShapeError(
                f"tabulated samples have shape {spec.samples.shape}, expected {grid.shape()}"
            )
        comps = [
            (np.roll(spec.samples, -1, axis=k) - np.roll(spec.samples, 1, axis=k)) / (2.0 * grid.dx)
            for k in range(grid.d)
        ]
        return ForceField(grid, np.stack(comps, axis=0))
    _warn_if_unbounded(spec)
    grad = _gradient_at(spec, grid.centers())
    return ForceField(grid, np.moveaxis(grad, -1, 0))


def _minimal_image_kernel(spec, grid):
    """Gradient of K sampled at minimal-image displacements, exactly odd.

    The displacement coordinate at index Nx/2 is ambiguous (+L and -L are the
    same torus point); for even K the two images of that gradient component
    cancel, so the component is set to zero there.  This makes the sampled
    kernel exactly odd under index negation.
    """
    nx = grid.cells_per_axis
    idx = np.arange(nx)
    delta = ((idx + nx // 2) % nx - nx // 2) * grid.dx
    if grid.d == 1:
        coords = delta[:, None]
    else:
        gx, gy = np.meshgrid(delta, delta, indexing="ij")
        coords = np.stack([gx, gy], axis=-1)
    grad = np.moveaxis(_gradient_at(spec, coords), -1, 0)
    for k in range(grid.d):
        sl = [slice(None)] * (grid.d + 1)
        sl[1 + k] = nx // 2
        grad[tuple([k] + sl[1:])] = 0.0
    return grad


def _value_kernel(spec, grid):
    """K itself sampled at minimal-image displacements (for energies)."""
    nx = grid.cells_per_axis
    idx = np.arange(nx)
    delta = ((idx + nx // 2) % nx - nx // 2) * grid.dx
    if grid.d == 1:
        r = np.abs(delta)
    else:
        gx, gy = np.meshgrid(delta, delta, indexing="ij")
        r = np.sqrt(gx**2 + gy**2)
    vals = spec.value_radial(r)
    if not np.all(np.isfinite(vals)):
        raise ParameterError("interaction kernel is singular on the grid")
    return vals


def _circular_convolve(kernel, rho_values, grid):
    """Periodic convolution (kernel * rho) * dx^d via FFT."""
    if grid.d == 1:
        out = np.fft.ifft(np.fft.fft(kernel) * np.fft.fft(rho_values)).real
    else:
        out = np.fft.ifft2(np.fft.fft2(kernel) * np.fft.fft2(rho_values)).real
    return out * grid.cell_volume


def conv_grad_K(spec, rho):
    """Nonlocal force contribution (grad K) * rho on the torus (FFT path)."""
    if spec.role != "interaction":
        raise ParameterError("conv_grad_K expects a potential with role 'interaction'")
    grid = rho.grid
    if spec.kind == "zero":
        return ForceField(grid, np.zeros((grid.d,) + grid.shape()))
    if spec.kind == "tabulated":
        raise ParameterError("tabulated interaction kernels are not supported")
    _warn_if_unbounded(spec)
    kernel = _minimal_image_kernel(spec, grid)
    comps = [_circular_convolve(kernel[k], rho.values, grid) for k in range(grid.d)]
    return ForceField(grid, np.stack(comps, axis=0))


def conv_grad_K_direct(spec, rho):
    """Direct-summation reference for conv_grad_K (O(Nx^(2d)))."""
    if spec.role != "interaction":
        raise ParameterError("conv_grad_K expects a potential with role 'interaction'")
    grid = rho.grid
    if spec.kind == "zero":
        return ForceField(grid, np.zeros((grid.d,) + grid.shape()))
    kernel = _minimal_image_kernel(spec, grid)
    nx = grid.cells_per_axis
    out = np.zeros((grid.d,) + grid.shape())
    if grid.d == 1:
        for i in range(nx):
            shifts = (i - np.arange(nx)) % nx
            out[:, i] = np.sum(kernel[:, shifts] * rho.values[None, :], axis=1)
    else:
        ii = np.arange(nx)
        for i in range(nx):
            for j in range(nx):
                si = (i - ii) % nx
                sj = (j - ii) % nx
                sub = kernel[:, si[:, None], sj[None, :]]
                out[:, i, j] = np.sum(sub * rho.values[None, :, :], axis=(1, 2))
    return ForceField(grid, out * grid.cell_volume)


def force_field(v_spec, k_spec, rho):
    """Total force: gradient of V plus (gradient of K) convolved with rho."""
    fv = grad_V(v_spec, rho.grid)
    fk = conv_grad_K(k_spec, rho)
    return ForceField(rho.grid, fv.values + fk.values)


def energies(v_spec, k_spec, rho):
    """(potential, interaction) energy pair for a density field.

    potential = sum(V rho) dx^d; interaction = (1/2) sum(rho (K*rho)) dx^d,
    with the same minimal-image kernel sampling as the force convolution.
    """
    grid = rho.grid
    vol = grid.cell_volume
    if v_spec.kind == "zero":
        pot = 0.0
    elif v_spec.kind == "tabulated":
        if v_spec.samples.shape != grid.shape():
            raise ShapeError("tabulated samples do not match the grid")
        pot = float(np.sum(v_spec.samples * rho.values) * vol)
    else:
        r = np.sqrt(np.sum(grid.centers() ** 2, axis=-1))
        pot = float(np.sum(v_spec.value_radial(r) * rho.values) * vol)
    if k_spec.kind == "zero":
        inter = 0.0
    else:
        k_conv = _circular_convolve(_value_kernel(k_spec, grid), rho.values, grid)
        inter = 0.5 * float(np.sum(rho.values * k_conv) * vol)
    return pot, inter


@dataclass
class ValidationReport:
    """Outcome of the potential-assumption checks."""

    conditions: list
    c_v: float
    c_k: float

    @property
    def passed(self):
        return all(ok for _, ok, _ in self.conditions)

    def failures(self):
        return [(name, detail) for name, ok, detail in self.conditions if not ok]


def _growth_constant(spec, radii):
    """Empirical sup of r|U'(r)| / (1 + |U(r)|) over sample radii."""
    vals = spec.value_radial(radii)
    der = spec.radial_derivative(radii)
    ratio = np.abs(radii * der) / (1.0 + np.abs(vals))
    return float(np.max(ratio))


def validate_assumptions(p, v_spec, k_spec, p_exp, q_exp, r_exp, sample_count=256):
    """Check the structural conditions on (V, K) and the exponent region.

    The growth inequalities |grad U . x| <= C (1 + |U|) are sampled on
    ``sample_count`` log-spaced radii and the empirical constants reported.
    The integrability exponents (p, q, r), given as extended reals in
    [1, inf], must satisfy

        0 <= 1/p < 2 - 2/gamma,
        0 <= 1/r < min(2/(n+2), 2 - 2/gamma),
        1/gamma - 1 <= 1/r - 1/q <= 0.
    """
    for spec in (v_spec, k_spec):
        if spec.kind == "tabulated":
            raise ParameterError("validate_assumptions supports built-in potentials only")
    radii = np.logspace(-3, 3, sample_count)
    c_v = _growth_constant(v_spec, radii)
    c_k = _growth_constant(k_spec, radii)
    inv = lambda e: 0.0 if math.isinf(e) else 1.0 / e
    ip, iq, ir = inv(p_exp), inv(q_exp), inv(r_exp)
    for name, val in (("p", p_exp), ("q", q_exp), ("r", r_exp)):
        if not (val >= 1.0):
            raise ParameterError(f"exponent {name} must lie in [1, inf], got {val!r}")
    gamma = p.gamma
    lim_p = 2.0 - 2.0 / gamma
    lim_r = min(2.0 / (p.n + 2.0), lim_p)
    conditions = [
        ("V growth bound", math.isfinite(c_v), f"empirical C_V = {c_v:.6g}"),
        ("K lower bound", _bounded_below(k_spec), "K must be bounded below"),
        ("K growth bound", math.isfinite(c_k), f"empirical C_K = {c_k:.6g}"),
        ("near-field exponent", 0.0 <= ip < lim_p, f"need 0 <= 1/p < {lim_p:.6g}, got {ip:.6g}"),
        ("far-field exponent", 0.0 <= ir < lim_r, f"need 0 <= 1/r < {lim_r:.6g}, got {ir:.6g}"),
        (
            "gradient exponent window",
            1.0 / gamma - 1.0 <= ir - iq <= 0.0,
            f"need {1.0 / gamma - 1.0:.6g} <= 1/r - 1/q <= 0, got {ir - iq:.6g}",
        ),
    ]
    return ValidationReport(conditions=conditions, c_v=c_v, c_k=c_k)


def _bounded_below(spec):
    if spec.kind in ("zero", "gaussian", "morse"):
        return True
    if spec.kind == "quadratic":
        return spec.params[0] >= 0.0
    if spec.kind == "power":
        c_a, a, _ = spec.params
        return c_a >= 0.0 or a <= 0.0
    return False
