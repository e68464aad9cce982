"""kinlim: a desk-scale laboratory for a kinetic relaxation model with
nonlocal forcing and its porous-medium aggregation-diffusion limit."""

from .errors import (
    ConsistencyError,
    KinlimError,
    NumericalFailure,
    ParameterError,
    RunFileError,
    ShapeError,
    StabilityError,
    TruncationError,
)
from .model import (
    ModelParams,
    VelocityQuadrature,
    bregman,
    derive_params,
    discrete_equilibrium,
    entropy_density,
    equilibrium_value,
    extended_moments,
    psi_n,
    psi_n_prime,
    support_radius,
)
from .fields import (
    DensityField,
    DistributionField,
    MomentumField,
    SpatialGrid,
    VelocityGrid,
    density_moment,
    equilibrium_field,
    gaussian_density,
    lp_distance,
    lp_norm,
    momentum_moment,
    second_v_moment,
    second_x_moment,
)
from .forces import PotentialSpec, ForceField, force_field, energies, validate_assumptions
from .kinetic import KineticConfig, EnergyReport, RunReport
from .macro import MacroConfig, MacroReport, energy_F
from .limit import SweepConfig, SweepReport, entropy_audit, run_sweep

__version__ = "0.1.0"
