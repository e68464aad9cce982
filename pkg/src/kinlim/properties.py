"""Seeded property batteries shared by the test suite and the CLI.

Each check runs a deterministic random sweep (xorshift64* cases) and returns
a PropertyResult carrying the worst observed violation, so the CLI can print
one line per check and pytest can assert on the same numbers.
"""

from dataclasses import dataclass
import inspect

import numpy as np

from . import fields, forces, model
from .fields import DensityField, SpatialGrid
from .rng import Xorshift64Star, random_profile

__all__ = ["PropertyResult", "run_all", "BATTERIES"]


@dataclass
class PropertyResult:
    name: str
    passed: bool
    worst: float
    detail: str

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: worst={self.worst:.6e} ({self.detail})"


def _oracle_quad(p, rho_max, n_points=4096):
    """Midpoint oracle grid covering 1.25x the largest support radius."""
    radius = 1.25 * model.support_radius(p, rho_max)
    return model.VelocityQuadrature.midpoint(p.d, radius, n_points)


def equilibrium_moment_identities(seed=0, cases=20):
    """Mass/momentum/pressure/entropy moments of the sampled equilibrium."""
    worst = 0.0
    rhos = (0.1, 0.5, 1.0, 2.0, 5.0)
    gammas = ((1.2, 1), (1.5, 1), (5.0 / 3.0, 1), (1.25, 2), (1.5, 2))
    for gamma, d in gammas:
        p = model.derive_params(gamma, d)
        for rho in rhos:
            quad = _oracle_quad(p, rho, 4096 if d == 1 else 1024)
            vals = model.equilibrium_value(p, rho, quad.centers)
            w = quad.v_squared(d)
            vol = quad.cell_volume
            mass = float(np.sum(vals) * vol)
            if d == 1:
                mom = abs(float(np.sum(vals * quad.centers) * vol))
            else:
                mom = float(np.max(np.abs(np.sum(vals[:, None] * quad.centers, axis=0)))) * vol
            v2 = float(np.sum(vals * w) * vol)
            psi = float(np.sum(model.psi_n(p, vals)) * vol)
            target = rho**gamma
            errs = [
                abs(mass - rho) / rho,
                abs(mom) / rho,
                abs(v2 - d * target) / (d * target),
                abs(psi - target) / target,
            ]
            worst = max(worst, max(errs))
    return PropertyResult(
        "equilibrium-moment-identities", worst < 1e-6, worst,
        "mass, momentum, |v|^2 and internal-entropy moments vs closed forms",
    )


def minimization_principle(seed=42, cases=1000):
    """Random mass-matched profiles never beat the discrete equilibrium entropy."""
    rng = Xorshift64Star(seed)
    p = model.derive_params(1.5, 1)
    quad = _oracle_quad(p, 2.0, 2048)
    w = quad.v_squared(1)
    worst = -np.inf
    for _ in range(cases):
        rho = rng.uniform(low=0.1, high=2.0)
        g = random_profile(rng, quad.centers, quad.cell_volume, 0.6 * float(np.max(np.abs(quad.centers))), rho)
        eq, _ = model.discrete_equilibrium(p, rho, w, quad.cell_volume)
        h_g = float(np.sum(0.5 * w * g + model.psi_n(p, g)) * quad.cell_volume)
        h_eq = float(np.sum(0.5 * w * eq + model.psi_n(p, eq)) * quad.cell_volume)
        worst = max(worst, h_eq - h_g)
    return PropertyResult(
        "entropy-minimization", worst <= 1e-10, worst,
        "discrete equilibrium minimizes the kinetic entropy at fixed mass",
    )


def bregman_chain(seed=7, cases=1000):
    """Bregman <= entropy gap, and the L^(1+2/n) norm control, mass-matched."""
    rng = Xorshift64Star(seed)
    p = model.derive_params(1.5, 1)
    quad = _oracle_quad(p, 2.0, 1024)
    w = quad.v_squared(1)
    vol = quad.cell_volume
    q = 1.0 + 2.0 / p.n
    c_n = 16.0 * p.c_gamma_d ** (2.0 / p.n) / p.n
    worst_gap = -np.inf
    worst_norm = -np.inf
    for _ in range(cases):
        rho = rng.uniform(low=0.2, high=2.0)
        eq, _ = model.discrete_equilibrium(p, rho, w, vol)
        f = random_profile(rng, quad.centers, vol, 0.6 * float(np.max(np.abs(quad.centers))), rho)
        breg = float(np.sum(model.bregman(p, f, eq)) * vol)
        gap = float(np.sum(0.5 * w * (f - eq) + model.psi_n(p, f) - model.psi_n(p, eq)) * vol)
        worst_gap = max(worst_gap, breg - gap)
        # norm control needs no mass matching; reuse the pair
        lhs = float(np.sum(np.abs(f - eq) ** q) * vol) ** (2.0 / q)
        factor = max(
            float(np.sum(f**q) * vol) ** (1.0 / q),
            float(np.sum(eq**q) * vol) ** (1.0 / q),
        ) ** (1.0 - 2.0 / p.n)
        worst_norm = max(worst_norm, lhs - c_n * factor * breg)
    ok = worst_gap <= 1e-10 and worst_norm <= 1e-10
    return PropertyResult(
        "bregman-entropy-chain", ok, max(worst_gap, worst_norm),
        "Bregman below entropy gap; squared L^(1+2/n) below c_n * factor * Bregman",
    )


def nemytskii_lipschitz(seed=11, cases=1000):
    """Equilibrium map Lipschitz bounds with constants 2n and 2n*b0."""
    rng = Xorshift64Star(seed)
    p = model.derive_params(1.5, 1)
    sgrid = SpatialGrid(d=1, half_length=2.0, cells_per_axis=32)
    quad = _oracle_quad(p, 3.0, 1024)
    w = quad.v_squared(1)
    vol_v = quad.cell_volume
    vol_x = sgrid.cell_volume
    a_gamma = 2.0 * p.n
    b_gamma = 2.0 * p.n * p.b0
    q = 1.0 + 2.0 / p.n
    worst = -np.inf
    xc = sgrid.axis_centers()
    for _ in range(cases):
        rho = random_profile(rng, xc, vol_x, 1.5, rng.uniform(low=0.3, high=2.0))
        eta = random_profile(rng, xc, vol_x, 1.5, rng.uniform(low=0.3, high=2.0))
        m_rho = model.equilibrium_value(p, rho[:, None], quad.centers[None, :])
        m_eta = model.equilibrium_value(p, eta[:, None], quad.centers[None, :])
        diff = np.abs(m_rho - m_eta)
        l1 = float(np.sum(diff) * vol_v * vol_x)
        lhs_w = float(np.sum(diff * w[None, :]) * vol_v * vol_x)
        lhs_q = float(np.sum(diff**q) * vol_v * vol_x)
        d_l1 = float(np.sum(np.abs(rho - eta)) * vol_x)
        d_lg = float(np.sum(np.abs(rho - eta) ** p.gamma) * vol_x) ** (1.0 / p.gamma)
        norm_sum = (
            float(np.sum(rho**p.gamma) * vol_x) ** ((p.gamma - 1.0) / p.gamma)
            + float(np.sum(eta**p.gamma) * vol_x) ** ((p.gamma - 1.0) / p.gamma)
        )
        worst = max(
            worst,
            l1 - a_gamma * d_l1,
            lhs_w - b_gamma * norm_sum * d_lg,
            lhs_q - b_gamma * p.c_gamma_d ** (2.0 / p.n) * norm_sum * d_lg,
        )
    return PropertyResult(
        "equilibrium-map-lipschitz", worst <= 1e-10, worst,
        "L^1, velocity-weighted and L^(1+2/n) bounds on equilibrium differences",
    )


def extension_moments_sweep(seed=3, cases=100):
    """F_hat >= D_hat >= 0 and the empirical constant of the moment bound."""
    rng = Xorshift64Star(seed)
    p = model.derive_params(1.5, 1)
    quad = _oracle_quad(p, 1.0, 2048)
    ratio_max = 0.0
    worst = -np.inf
    for _ in range(cases):
        f = random_profile(rng, quad.centers, quad.cell_volume, 0.6 * float(np.max(np.abs(quad.centers))), 1.0)
        f_hat, d_hat = model.extended_moments(p, f, 1.0, quad)
        worst = max(worst, -d_hat, d_hat - f_hat)
        denom = d_hat + np.sqrt(1.0**p.gamma * d_hat)
        if denom > 0.0:
            ratio_max = max(ratio_max, f_hat / denom)
    ok = worst <= 1e-8 and np.isfinite(ratio_max)
    return PropertyResult(
        "extension-moment-bound", ok, worst,
        f"F_hat >= D_hat >= 0; empirical C_d = {ratio_max:.6g}",
    )


def psi_derivative_consistency(seed=5, cases=100):
    """Central finite differences of Psi match its analytic derivative."""
    rng = Xorshift64Star(seed)
    p = model.derive_params(1.5, 1)
    h = 1e-5
    worst = 0.0
    for _ in range(cases):
        s = rng.uniform(low=0.05, high=10.0)
        fd = (model.psi_n(p, s + h) - model.psi_n(p, s - h)) / (2.0 * h)
        worst = max(worst, abs(fd - model.psi_n_prime(p, s)) / abs(model.psi_n_prime(p, s)))
    return PropertyResult(
        "psi-derivative", worst < 1e-6, worst, "central differences vs analytic derivative"
    )


def moment_linearity(seed=9, cases=50):
    """Velocity moments are linear in the field; translation invariance."""
    rng = Xorshift64Star(seed)
    p = model.derive_params(1.5, 1)
    sgrid = SpatialGrid(d=1, half_length=2.0, cells_per_axis=16)
    vgrid = fields.VelocityGrid(d=1, v_max=3.0, cells_per_axis=32)
    worst = 0.0
    for _ in range(cases):
        a = rng.uniform(low=0.1, high=2.0)
        vals1 = rng.uniform(size=sgrid.shape() + vgrid.shape())
        vals2 = rng.uniform(size=sgrid.shape() + vgrid.shape())
        f1 = fields.DistributionField(sgrid, vgrid, vals1)
        f2 = fields.DistributionField(sgrid, vgrid, vals2)
        combo = fields.DistributionField(sgrid, vgrid, a * vals1 + vals2)
        lin = fields.density_moment(combo).values - (
            a * fields.density_moment(f1).values + fields.density_moment(f2).values
        )
        shifted = fields.DistributionField(sgrid, vgrid, np.roll(vals1, 3, axis=0))
        worst = max(
            worst,
            float(np.max(np.abs(lin))),
            abs(shifted.mass() - f1.mass()),
            abs(fields.second_v_moment(shifted) - fields.second_v_moment(f1)),
        )
    return PropertyResult(
        "moment-linearity-translation", worst < 1e-12, worst,
        "moments linear in f and invariant under periodic x-translation",
    )


def interaction_force_properties(seed=13, cases=20):
    """FFT vs direct convolution; action-reaction; quadratic interaction energy."""
    rng = Xorshift64Star(seed)
    sgrid = SpatialGrid(d=1, half_length=4.0, cells_per_axis=64)
    spec = forces.PotentialSpec.gaussian(0.7, 1.1)
    worst = 0.0
    xc = sgrid.axis_centers()
    for _ in range(cases):
        rho = DensityField(sgrid, random_profile(rng, xc, sgrid.cell_volume, 2.0, rng.uniform(low=0.5, high=2.0)))
        fast = forces.conv_grad_K(spec, rho).values
        ref = forces.conv_grad_K_direct(spec, rho).values
        scale = max(float(np.max(np.abs(ref))), 1e-30)
        worst = max(worst, float(np.max(np.abs(fast - ref))) / scale)
        total = float(np.sum(rho.values * fast[0]) * sgrid.cell_volume)
        worst = max(worst, abs(total))
        _, inter1 = forces.energies(forces.PotentialSpec.zero("external"), spec, rho)
        rho2 = DensityField(sgrid, 2.0 * rho.values)
        _, inter2 = forces.energies(forces.PotentialSpec.zero("external"), spec, rho2)
        worst = max(worst, abs(inter2 - 4.0 * inter1) / max(abs(inter2), 1e-30))
    return PropertyResult(
        "interaction-force", worst < 1e-12, worst,
        "FFT path matches direct sum; even-kernel action-reaction; quadratic energy",
    )


def lp_triangle(seed=17, cases=1000):
    """Triangle inequality for the discrete norms on random triples."""
    rng = Xorshift64Star(seed)
    sgrid = SpatialGrid(d=1, half_length=1.0, cells_per_axis=16)
    worst = -np.inf
    for k in range(cases):
        pnorm = (1.0, 1.25, 2.0, np.inf)[k % 4]
        a = rng.uniform(size=sgrid.shape(), low=-1.0, high=1.0)
        b = rng.uniform(size=sgrid.shape(), low=-1.0, high=1.0)
        fa = DensityField(sgrid, a)
        fb = DensityField(sgrid, np.abs(b))
        fab = DensityField(sgrid, a + np.abs(b))
        worst = max(
            worst,
            fields.lp_norm(fab, pnorm) - fields.lp_norm(fa, pnorm) - fields.lp_norm(fb, pnorm),
        )
    return PropertyResult(
        "lp-triangle-inequality", worst <= 1e-12, worst, "norm of sum below sum of norms"
    )


BATTERIES = (
    equilibrium_moment_identities,
    minimization_principle,
    bregman_chain,
    nemytskii_lipschitz,
    extension_moments_sweep,
    psi_derivative_consistency,
    moment_linearity,
    interaction_force_properties,
    lp_triangle,
)


def run_all(seed=42, cases=100):
    """Run every battery with scaled case counts; returns PropertyResults."""
    results = []
    for battery in BATTERIES:
        sig = inspect.signature(battery)
        default_cases = sig.parameters["cases"].default
        scaled = max(1, int(default_cases * cases / 100))
        results.append(battery(seed=seed, cases=scaled))
    return results
