"""Command-line surface.

Subcommands: equilibrium-check, kinetic-run, macro-run, limit-study,
property-suite, config-reference.  Exit codes: 0 success, 1 check failure,
2 usage/config error, 3 numerical failure.  The KINLIM_OUT environment
variable overrides the default output directory.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from .errors import KinlimError, NumericalFailure, RunFileError, StabilityError
from . import fields, forces, kinetic, limit, macro, model, properties, runfile

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


class _WarningCounter(logging.Handler):
    def __init__(self):
        super().__init__(level=logging.WARNING)
        self.count = 0

    def emit(self, record):
        self.count += 1


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="kinlim",
        description="Kinetic relaxation model, its aggregation-diffusion limit, "
        "and the diagnostics connecting them.",
        epilog="Run 'kinlim config-reference' for every run-file key and default.",
    )
    parser.add_argument("--out", default=None, help="output directory (default: out, env KINLIM_OUT)")
    parser.add_argument("--threads", type=int, default=0, help="worker threads for sweeps (0 = auto)")
    parser.add_argument("--strict", action="store_true", help="treat warnings as errors")
    sub = parser.add_subparsers(dest="command", required=True)

    eq = sub.add_parser("equilibrium-check", help="moment table and constant identities")
    eq.add_argument("--gamma", type=float, required=True)
    eq.add_argument("--d", type=int, required=True)
    eq.add_argument("--rho", type=float, nargs="*", default=[0.1, 0.5, 1.0, 2.0, 5.0])
    eq.add_argument("--points", type=int, default=4096, help="oracle quadrature points per axis")

    for name, help_text in (
        ("kinetic-run", "one kinetic run from a run file"),
        ("macro-run", "one macroscopic run from a run file"),
        ("limit-study", "epsilon sweep vs the macro solution"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("config", nargs="?", default=None, help="run file path")
        cmd.add_argument("--config", dest="config_flag", default=None, help="run file path")

    prop = sub.add_parser("property-suite", help="deterministic property batteries")
    prop.add_argument("--seed", type=int, default=42)
    prop.add_argument("--cases", type=int, default=100)

    sub.add_parser("config-reference", help="print the run-file reference page")
    return parser


def _resolve_out(args):
    if args.out is not None:
        return args.out
    return os.environ.get("KINLIM_OUT", "out")


def _load_setup(args):
    path = args.config_flag or args.config
    if path is None:
        raise RunFileError("no run file given (positional or --config)")
    return runfile.parse_run_file(path)


def _cmd_equilibrium_check(args):
    p = model.derive_params(args.gamma, args.d)
    print(f"gamma={p.gamma:.12g} d={p.d} n={p.n:.12g} b0={p.b0:.12g} "
          f"c={p.c_gamma_d:.12g} b1={p.b1:.12g} b2={p.b2:.12g}")
    ident = abs(p.b1 * p.b2 - p.n * p.c_gamma_d) / (p.n * p.c_gamma_d)
    print(f"constant identity |b1*b2 - n*c| / (n*c) = {ident:.3e}")
    header = f"{'rho':>8} {'mass':>12} {'momentum':>12} {'pressure':>12} {'|v|^2':>12} {'psi-int':>12} {'worst rel err':>14}"
    print(header)
    worst_all = ident
    for rho in args.rho:
        radius = 1.25 * model.support_radius(p, rho)
        quad = model.VelocityQuadrature.midpoint(p.d, radius, args.points)
        vals = model.equilibrium_value(p, rho, quad.centers)
        w = quad.v_squared(p.d)
        vol = quad.cell_volume
        mass = float(np.sum(vals) * vol)
        if p.d == 1:
            mom = float(np.sum(vals * quad.centers) * vol)
            press = float(np.sum(vals * quad.centers**2) * vol)
        else:
            mom = float(np.max(np.abs(np.sum(vals[:, None] * quad.centers, axis=0))) * vol)
            press = float(np.sum(vals * quad.centers[:, 0] ** 2) * vol)
        v2 = float(np.sum(vals * w) * vol)
        psi = float(np.sum(model.psi_n(p, vals)) * vol)
        tgt = rho**p.gamma
        worst = max(
            abs(mass - rho) / rho,
            abs(mom) / rho,
            abs(press - tgt) / tgt,
            abs(v2 - p.d * tgt) / (p.d * tgt),
            abs(psi - tgt) / tgt,
        )
        worst_all = max(worst_all, worst)
        print(f"{rho:>8.3g} {mass:>12.8g} {mom:>12.3e} {press:>12.8g} {v2:>12.8g} {psi:>12.8g} {worst:>14.3e}")
    if worst_all < 1e-6:
        print("equilibrium-check: PASS")
        return EXIT_OK
    print("equilibrium-check: FAIL")
    print(json.dumps({"failures": [{"check": "equilibrium-moments", "worst": worst_all}]}))
    return EXIT_CHECK_FAILED


def _cmd_kinetic_run(args, out_dir):
    setup = _load_setup(args)
    f0 = kinetic.prepared_equilibrium(setup.params, setup.rho0, setup.vgrid)
    report = kinetic.run(setup.kinetic_config, f0)
    os.makedirs(out_dir, exist_ok=True)
    report.write_csv(os.path.join(out_dir, "kinetic_diagnostics.csv"))
    fields.write_field_binary(report.final, os.path.join(out_dir, "kinetic_final.bin"))
    fields.write_field_binary(
        fields.density_moment(report.final), os.path.join(out_dir, "kinetic_final_density.bin")
    )
    print(f"kinetic-run: {len(report.reports)} diagnostics, "
          f"mass drift {report.mass_drift:.3e}, leak {report.leak_total:.3e}, "
          f"energy violation {report.energy_violation:.3e}")
    print(f"wrote {out_dir}/kinetic_diagnostics.csv")
    return EXIT_OK


def _cmd_macro_run(args, out_dir):
    setup = _load_setup(args)
    report = macro.run(setup.macro_config, setup.rho0)
    os.makedirs(out_dir, exist_ok=True)
    report.write_csv(os.path.join(out_dir, "macro_diagnostics.csv"))
    fields.write_field_binary(report.final, os.path.join(out_dir, "macro_final_density.bin"))
    drift = abs(report.mass[-1] - report.mass[0]) / max(report.mass[0], 1e-300)
    print(f"macro-run: {len(report.times)} diagnostics, mass drift {drift:.3e}")
    print(f"wrote {out_dir}/macro_diagnostics.csv")
    return EXIT_OK


def _cmd_limit_study(args, out_dir, threads):
    setup = _load_setup(args)
    validation = forces.validate_assumptions(
        setup.params, setup.v_spec, setup.k_spec, *setup.exponents_pqr
    )
    report = limit.run_sweep(setup.sweep_config, setup.rho0, threads=threads)
    os.makedirs(out_dir, exist_ok=True)
    report.write_csv(os.path.join(out_dir, "sweep_report.csv"))
    summary = json.loads(report.summary_json())
    summary["assumption_checks"] = {
        "passed": validation.passed,
        "C_V": validation.c_v,
        "C_K": validation.c_k,
        "conditions": [[name, ok, detail] for name, ok, detail in validation.conditions],
    }
    with open(os.path.join(out_dir, "sweep_summary.json"), "w", newline="\n") as fh:
        fh.write(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"limit-study: slope={report.slope:.4f} "
          f"l1={['%.6g' % v for v in report.distances[1.0]]}")
    print(f"wrote {out_dir}/sweep_report.csv and sweep_summary.json")
    if not validation.passed or not report.passed:
        print(json.dumps({
            "failures": [
                {"check": name, "detail": detail}
                for name, detail in validation.failures()
            ] + [
                {"epsilon": eps, "check": "member-run", "detail": msg}
                for eps, msg in report.failures
            ] + [
                {"epsilon": eps, "check": "audit", "detail": a.failures}
                for eps, a in zip(report.epsilons, report.audits)
                if not a.passed
            ],
        }, default=str))
        return EXIT_CHECK_FAILED
    return EXIT_OK


def _cmd_property_suite(args):
    results = properties.run_all(seed=args.seed, cases=args.cases)
    for res in results:
        print(res.line())
    failures = [res for res in results if not res.passed]
    if failures:
        print(json.dumps({
            "failures": [
                {"check": res.name, "worst": res.worst, "detail": res.detail}
                for res in failures
            ]
        }, sort_keys=True))
        return EXIT_CHECK_FAILED
    print(f"property-suite: {len(results)} batteries passed (seed={args.seed}, cases={args.cases})")
    return EXIT_OK


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    counter = _WarningCounter()
    logging.getLogger("kinlim").addHandler(counter)
    out_dir = _resolve_out(args)
    threads = args.threads if args.threads > 0 else (os.cpu_count() or 1)
    try:
        if args.command == "equilibrium-check":
            code = _cmd_equilibrium_check(args)
        elif args.command == "kinetic-run":
            code = _cmd_kinetic_run(args, out_dir)
        elif args.command == "macro-run":
            code = _cmd_macro_run(args, out_dir)
        elif args.command == "limit-study":
            code = _cmd_limit_study(args, out_dir, threads)
        elif args.command == "property-suite":
            code = _cmd_property_suite(args)
        elif args.command == "config-reference":
            print(runfile.reference_text(), end="")
            code = EXIT_OK
        else:  # pragma: no cover - argparse enforces the choices
            return EXIT_USAGE
    except RunFileError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalFailure, StabilityError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except KinlimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.strict and counter.count > 0:
        print(f"strict mode: {counter.count} warning(s) raised", file=sys.stderr)
        return EXIT_USAGE
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
