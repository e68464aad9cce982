"""Explicit finite-volume solver for the limit equation

    d/dt rho = Laplacian(rho^gamma) + div(rho F[rho]),

on the periodic box, with conservative face fluxes: centered differences of
rho^gamma for the degenerate diffusion (no division by rho, well-defined at
vacuum) and upwinding by the sign of the face-averaged drift velocity -F for
the advection, which preserves nonnegativity under the explicit stability
bound checked every step.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericalFailure, ParameterError, StabilityError
from . import fields, forces, model
from .fields import DensityField

__all__ = ["MacroConfig", "MacroReport", "step", "run", "energy_F", "stable_dt_bound"]


@dataclass(frozen=True)
class MacroConfig:
    params: model.ModelParams
    grid: fields.SpatialGrid
    dt: float
    t_final: float
    v_spec: forces.PotentialSpec
    k_spec: forces.PotentialSpec
    diag_stride: int = 10

    def __post_init__(self):
        if self.dt <= 0.0 or self.t_final <= 0.0:
            raise ParameterError("dt and t_final must be positive")
        if self.diag_stride < 1:
            raise ParameterError("diag_stride must be >= 1")


@dataclass
class MacroReport:
    times: np.ndarray
    mass: np.ndarray
    f_energy: np.ndarray
    min_rho: np.ndarray
    max_rho: np.ndarray
    rho_snapshots: list          # [(time, density ndarray)]
    final: DensityField

    CSV_COLUMNS = ("t", "mass", "F_energy", "min_rho", "max_rho")

    def write_csv(self, path):
        lines = [",".join(self.CSV_COLUMNS)]
        for k in range(len(self.times)):
            vals = (self.times[k], self.mass[k], self.f_energy[k], self.min_rho[k], self.max_rho[k])
            lines.append(",".join(format(v, ".17g") for v in vals))
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")


def stable_dt_bound(p, grid, rho_values, force):
    """0.9 * min(diffusive, advective) explicit-step bound for the state."""
    dx = grid.dx
    rho_max = float(np.max(rho_values))
    if rho_max > 0.0:
        diff_bound = dx**2 / (2.0 * grid.d * p.gamma * rho_max ** (p.gamma - 1.0))
    else:
        diff_bound = np.inf
    fmax = force.max_abs()
    adv_bound = dx / (2.0 * fmax) if fmax > 0.0 else np.inf
    return 0.9 * min(diff_bound, adv_bound)


def step(rho, cfg, force=None):
    """One conservative explicit update; raises StabilityError if dt is too big."""
    p = cfg.params
    grid = cfg.grid
    if rho.grid != grid:
        raise ParameterError("density does not live on the configured grid")
    if force is None:
        force = forces.force_field(cfg.v_spec, cfg.k_spec, rho)
    bound = stable_dt_bound(p, grid, rho.values, force)
    if cfg.dt > bound:
        raise StabilityError(
            f"dt={cfg.dt!r} violates the explicit stability bound {bound:.6g}"
        )
    dx = grid.dx
    vals = rho.values
    press = vals**p.gamma
    new = vals.copy()
    for axis in range(grid.d):
        # diffusion: centered second difference of rho^gamma
        lap = np.roll(press, -1, axis=axis) - 2.0 * press + np.roll(press, 1, axis=axis)
        new += cfg.dt / dx**2 * lap
        # advection d/dt rho + div(rho u) = 0 with u = -F, upwind by face speed
        u = -force.values[axis]
        u_face = 0.5 * (u + np.roll(u, -1, axis=axis))      # face between i and i+1
        flux = np.where(u_face > 0.0, u_face * vals, u_face * np.roll(vals, -1, axis=axis))
        new -= cfg.dt / dx * (flux - np.roll(flux, 1, axis=axis))
    if not np.all(np.isfinite(new)):
        raise NumericalFailure("non-finite density in macro step")
    return DensityField(grid, new)


def energy_F(p, v_spec, k_spec, rho):
    """Limit-equation energy (1 + d/2) sum rho^gamma dx + potential + interaction."""
    vol = rho.grid.cell_volume
    bulk = (1.0 + 0.5 * p.d) * float(np.sum(rho.values**p.gamma) * vol)
    pot, inter = forces.energies(v_spec, k_spec, rho)
    return bulk + pot + inter


def run(cfg, rho0):
    """Integrate to t_final with diagnostics every diag_stride steps."""
    if np.any(rho0.values < 0.0):
        raise ParameterError("initial density must be nonnegative")
    n_steps = int(round(cfg.t_final / cfg.dt))
    if abs(n_steps * cfg.dt - cfg.t_final) > 1e-9 * max(cfg.t_final, 1.0):
        raise ParameterError("t_final must be an integer number of steps")
    rho = rho0.copy()
    times, mass, f_en, mins, maxs = [], [], [], [], []
    snapshots = []

    def record(t):
        times.append(t)
        mass.append(rho.mass())
        f_en.append(energy_F(cfg.params, cfg.v_spec, cfg.k_spec, rho))
        mins.append(float(np.min(rho.values)))
        maxs.append(float(np.max(rho.values)))
        snapshots.append((t, rho.values.copy()))

    record(0.0)
    for k in range(1, n_steps + 1):
        force = forces.force_field(cfg.v_spec, cfg.k_spec, rho)
        rho = step(rho, cfg, force)
        if np.min(rho.values) < -1e-13 * max(float(np.max(rho.values)), 1.0):
            raise NumericalFailure(f"negativity in macro step {k}")
        np.clip(rho.values, 0.0, None, out=rho.values)
        if k % cfg.diag_stride == 0 or k == n_steps:
            record(k * cfg.dt)
    return MacroReport(
        times=np.array(times),
        mass=np.array(mass),
        f_energy=np.array(f_en),
        min_rho=np.array(mins),
        max_rho=np.array(maxs),
        rho_snapshots=snapshots,
        final=rho,
    )
