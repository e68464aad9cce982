"""Grids, field containers, velocity moments, discrete norms, and field I/O.

The spatial domain is the periodic box [-L, L)^d with an even number of
cells per axis; velocities live on a symmetric bounded box [-v_max, v_max)^d
whose cell centers come in +/- pairs (v = 0 is a cell face).  All integrals
are midpoint sums, so moments are linear in the field and exact under
grid-periodic translation.

Distribution values are stored dense and row-major with the x axes first:
shape (Nx,)*d + (Nv,)*d.
"""

from dataclasses import dataclass, field
import struct

import numpy as np

from .errors import ParameterError, ShapeError, TruncationError
from . import model

__all__ = [
    "SpatialGrid",
    "VelocityGrid",
    "DistributionField",
    "DensityField",
    "MomentumField",
    "density_moment",
    "momentum_moment",
    "second_v_moment",
    "second_x_moment",
    "equilibrium_field",
    "lp_norm",
    "lp_distance",
    "gaussian_density",
    "write_field_csv",
    "write_field_binary",
    "read_field_binary",
]

_MAGIC = b"KINLIM01"


@dataclass(frozen=True)
class SpatialGrid:
    """Periodic box [-L, L)^d with Nx cells per axis."""

    d: int
    half_length: float
    cells_per_axis: int

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ParameterError(f"spatial dimension must be 1 or 2, got {self.d}")
        if self.cells_per_axis < 8 or self.cells_per_axis % 2 != 0:
            raise ParameterError("Nx must be even and >= 8")
        if not self.half_length > 0.0:
            raise ParameterError("half_length must be positive")

    @property
    def dx(self):
        return 2.0 * self.half_length / self.cells_per_axis

    @property
    def cell_volume(self):
        return self.dx**self.d

    def axis_centers(self):
        return -self.half_length + self.dx * (np.arange(self.cells_per_axis) + 0.5)

    def centers(self):
        """Cell-center coordinates, shape (Nx,)*d + (d,)."""
        axis = self.axis_centers()
        if self.d == 1:
            return axis[:, None]
        gx, gy = np.meshgrid(axis, axis, indexing="ij")
        return np.stack([gx, gy], axis=-1)

    def shape(self):
        return (self.cells_per_axis,) * self.d


@dataclass(frozen=True)
class VelocityGrid:
    """Symmetric velocity box with Nv cells per axis, centers in +/- pairs."""

    d: int
    v_max: float
    cells_per_axis: int

    def __post_init__(self):
        if self.cells_per_axis % 2 != 0 or self.cells_per_axis < 2:
            raise ParameterError("Nv must be even and >= 2")
        if not self.v_max > 0.0:
            raise ParameterError("v_max must be positive")

    @property
    def dv(self):
        return 2.0 * self.v_max / self.cells_per_axis

    @property
    def cell_volume(self):
        return self.dv**self.d

    def axis_centers(self):
        return -self.v_max + self.dv * (np.arange(self.cells_per_axis) + 0.5)

    def shape(self):
        return (self.cells_per_axis,) * self.d

    def speed_squared(self):
        """|v|^2 on the velocity grid, shape (Nv,)*d."""
        axis = self.axis_centers() ** 2
        if self.d == 1:
            return axis
        return axis[:, None] + axis[None, :]


@dataclass
class DistributionField:
    """Nonnegative phase-space density on a (SpatialGrid, VelocityGrid) pair."""

    sgrid: SpatialGrid
    vgrid: VelocityGrid
    values: np.ndarray

    def __post_init__(self):
        expected = self.sgrid.shape() + self.vgrid.shape()
        if self.values.shape != expected:
            raise ShapeError(
                f"distribution values have shape {self.values.shape}, expected {expected}"
            )

    @property
    def cell_volume(self):
        return self.sgrid.cell_volume * self.vgrid.cell_volume

    def mass(self):
        return float(np.sum(self.values) * self.cell_volume)

    def copy(self):
        return DistributionField(self.sgrid, self.vgrid, self.values.copy())


@dataclass
class DensityField:
    """Nonnegative mass density on a spatial grid."""

    grid: SpatialGrid
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.grid.shape():
            raise ShapeError(
                f"density values have shape {self.values.shape}, expected {self.grid.shape()}"
            )

    def mass(self):
        return float(np.sum(self.values) * self.grid.cell_volume)

    def copy(self):
        return DensityField(self.grid, self.values.copy())


@dataclass
class MomentumField:
    """Momentum density per axis; values shape (d,) + (Nx,)*d."""

    grid: SpatialGrid
    values: np.ndarray

    def __post_init__(self):
        expected = (self.grid.d,) + self.grid.shape()
        if self.values.shape != expected:
            raise ShapeError(
                f"momentum values have shape {self.values.shape}, expected {expected}"
            )


def _v_axes(f):
    return tuple(range(f.sgrid.d, f.sgrid.d + f.vgrid.d))


def density_moment(f):
    """Midpoint velocity integral of f: the mass density field."""
    rho = np.sum(f.values, axis=_v_axes(f)) * f.vgrid.cell_volume
    return DensityField(f.sgrid, rho)


def momentum_moment(f):
    """First velocity moment of f per axis."""
    axis = f.vgrid.axis_centers()
    comps = []
    for k in range(f.vgrid.d):
        shape = [1] * f.values.ndim
        shape[f.sgrid.d + k] = f.vgrid.cells_per_axis
        weight = axis.reshape(shape)
        comps.append(np.sum(f.values * weight, axis=_v_axes(f)) * f.vgrid.cell_volume)
    return MomentumField(f.sgrid, np.stack(comps, axis=0))


def second_v_moment(f):
    """Total kinetic second moment: integral of |v|^2 f over phase space."""
    w = f.vgrid.speed_squared()
    return float(np.sum(f.values * w[(None,) * f.sgrid.d]) * f.cell_volume)


def second_x_moment(f):
    """Spatial second moment: integral of |x|^2 f over phase space."""
    axis = f.sgrid.axis_centers() ** 2
    if f.sgrid.d == 1:
        x2 = axis
    else:
        x2 = axis[:, None] + axis[None, :]
    x2 = x2.reshape(f.sgrid.shape() + (1,) * f.vgrid.d)
    return float(np.sum(f.values * x2) * f.cell_volume)


def equilibrium_field(p, rho, vgrid):
    """Cellwise sampled equilibrium with the quadrature error it commits.

    Returns ``(field, max_rel_density_error)``: the field holds the pointwise
    equilibrium values at the cell centers, and the error is the largest
    relative mismatch between its discrete velocity integral and ``rho``.
    Raises TruncationError when the support of the densest cell exceeds the
    velocity box.
    """
    rho_max = float(np.max(rho.values)) if rho.values.size else 0.0
    radius = model.support_radius(p, rho_max)
    if radius > vgrid.v_max:
        raise TruncationError(
            f"equilibrium support radius {radius:.6g} exceeds the velocity box; "
            f"requires v_max >= {radius:.6g}"
        )
    w = vgrid.speed_squared()
    arg = p.b0 * model.pow_pos(rho.values, p.gamma - 1.0)
    arg = arg.reshape(rho.values.shape + (1,) * vgrid.d) - w[(None,) * rho.grid.d]
    values = p.c_gamma_d * model.pow_pos(arg, 0.5 * p.n)
    f = DistributionField(rho.grid, vgrid, values)
    got = density_moment(f).values
    scale = np.maximum(np.abs(rho.values), 1e-300)
    err = float(np.max(np.abs(got - rho.values) / scale)) if rho.values.size else 0.0
    return f, err


def _cell_volume_of(obj):
    if isinstance(obj, DistributionField):
        return obj.cell_volume
    if isinstance(obj, (DensityField, MomentumField)):
        return obj.grid.cell_volume
    raise ShapeError(f"unsupported field type {type(obj)!r}")


def lp_norm(field_obj, p):
    """Discrete L^p norm (sum |.|^p * cellvol)^(1/p); max-norm for p = inf."""
    if not (p >= 1.0):
        raise ParameterError("norm exponent must satisfy p >= 1")
    vol = _cell_volume_of(field_obj)
    vals = np.abs(field_obj.values)
    if np.isinf(p):
        return float(np.max(vals)) if vals.size else 0.0
    return float(np.sum(vals**p) * vol) ** (1.0 / p)


def lp_distance(a, b, p):
    """L^p distance between two fields on the same grids."""
    if type(a) is not type(b) or a.values.shape != b.values.shape:
        raise ShapeError("fields must share a grid to be compared")
    if isinstance(a, DistributionField):
        if a.sgrid != b.sgrid or a.vgrid != b.vgrid:
            raise ShapeError("fields must share a grid to be compared")
        out = DistributionField(a.sgrid, a.vgrid, a.values - b.values)
    else:
        if a.grid != b.grid:
            raise ShapeError("fields must share a grid to be compared")
        out = type(a)(a.grid, a.values - b.values)
    return lp_norm(out, p)


def gaussian_density(sgrid, sigma, center=0.0, mass=1.0):
    """Normalized Gaussian bump on the periodic box, rescaled to exact mass."""
    pts = sgrid.centers()
    center = np.broadcast_to(np.asarray(center, dtype=float), (sgrid.d,))
    r2 = np.sum((pts - center) ** 2, axis=-1)
    vals = np.exp(-r2 / (2.0 * sigma**2))
    vals *= mass / (np.sum(vals) * sgrid.cell_volume)
    return DensityField(sgrid, vals)


def write_field_csv(field_obj, path):
    """CSV dump, one row per cell: coordinates then value(s)."""
    lines = []
    if isinstance(field_obj, DistributionField):
        sg, vg = field_obj.sgrid, field_obj.vgrid
        header = [f"x{k}" for k in range(sg.d)] + [f"v{k}" for k in range(vg.d)] + ["f"]
        xc = sg.axis_centers()
        vc = vg.axis_centers()
        lines.append(",".join(header))
        it = np.ndindex(field_obj.values.shape)
        for idx in it:
            coords = [xc[i] for i in idx[: sg.d]] + [vc[i] for i in idx[sg.d :]]
            row = [format(c, ".17g") for c in coords]
            row.append(format(field_obj.values[idx], ".17g"))
            lines.append(",".join(row))
    elif isinstance(field_obj, DensityField):
        sg = field_obj.grid
        header = [f"x{k}" for k in range(sg.d)] + ["rho"]
        xc = sg.axis_centers()
        lines.append(",".join(header))
        for idx in np.ndindex(field_obj.values.shape):
            row = [format(xc[i], ".17g") for i in idx]
            row.append(format(field_obj.values[idx], ".17g"))
            lines.append(",".join(row))
    elif isinstance(field_obj, MomentumField):
        sg = field_obj.grid
        header = [f"x{k}" for k in range(sg.d)] + [f"m{k}" for k in range(sg.d)]
        xc = sg.axis_centers()
        lines.append(",".join(header))
        for idx in np.ndindex(sg.shape()):
            row = [format(xc[i], ".17g") for i in idx]
            row += [format(field_obj.values[(k,) + idx], ".17g") for k in range(sg.d)]
            lines.append(",".join(row))
    else:
        raise ShapeError(f"unsupported field type {type(field_obj)!r}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


# binary header: magic(8s) d(u32) Nx(u32) Nv(u32) L(f32) v_max(f32) pad(4) = 32 bytes
_HEADER = struct.Struct("<8sIIIff4x")


def write_field_binary(field_obj, path):
    """Little-endian dump: 32-byte header then float64 values in C order."""
    if isinstance(field_obj, DistributionField):
        sg, vg = field_obj.sgrid, field_obj.vgrid
        header = _HEADER.pack(
            _MAGIC, sg.d, sg.cells_per_axis, vg.cells_per_axis,
            sg.half_length, vg.v_max,
        )
    elif isinstance(field_obj, DensityField):
        sg = field_obj.grid
        header = _HEADER.pack(_MAGIC, sg.d, sg.cells_per_axis, 0, sg.half_length, 0.0)
    else:
        raise ShapeError(f"unsupported field type {type(field_obj)!r}")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(field_obj.values, dtype="<f8").tobytes())


def read_field_binary(path):
    """Inverse of write_field_binary; returns a Distribution or Density field."""
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        magic, d, nx, nv, L, v_max = _HEADER.unpack(raw)
        if magic != _MAGIC:
            raise ShapeError(f"bad magic {magic!r} in {path}")
        payload = np.frombuffer(fh.read(), dtype="<f8")
    sgrid = SpatialGrid(d=int(d), half_length=float(L), cells_per_axis=int(nx))
    if nv == 0:
        return DensityField(sgrid, payload.reshape(sgrid.shape()).copy())
    vgrid = VelocityGrid(d=int(d), v_max=float(v_max), cells_per_axis=int(nv))
    shape = sgrid.shape() + vgrid.shape()
    return DistributionField(sgrid, vgrid, payload.reshape(shape).copy())
