"""Line-oriented ``key = value`` run files with [sections] and strict keys.

The format is deliberately minimal so any implementation can parse it:
one ``key = value`` pair per line, ``#`` comments, section headers in
brackets.  Unknown sections or keys are rejected, duplicates are a parse
error at the second occurrence, and every key outside [model] has a default.

Sections and keys (defaults in parentheses):

  [model]      gamma (required), d (required)
  [grids]      L (4.0), Nx (128), Nv (256), v_max (3.0), rho_cap (0.9)
  [potentials] V (zero), K (zero)  -- e.g. "quadratic a=0.5",
               "gaussian A=0.5 w=1.0", "morse A=1.0 rate=1.0",
               "power c_a=1.0 a=1.0 c_b=0.0", "zero"
  [initial]    profile (gaussian sigma=0.5 center=0.0 mass=1.0 | uniform value=...)
  [kinetic]    epsilon (0.2), dt (1e-3), t_final (0.5), splitting (lie),
               diag_stride (50)
  [macro]      dt (1e-3), t_final (0.5), diag_stride (50)
  [sweep]      epsilons (0.4 0.2 0.1 0.05), p_list (1.0 1.25),
               snap_interval (0.05), exponents_pqr (inf inf inf),
               audit_budget_factor (2.0)
  [output]     dir (out)
"""

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, RunFileError, TruncationError
from . import fields, forces, kinetic, limit, macro, model

__all__ = ["RunSetup", "parse_run_file", "parse_run_text", "serialize", "reference_text"]

_DEFAULTS = {
    "grids": {"L": "4.0", "Nx": "128", "Nv": "256", "v_max": "3.0", "rho_cap": "0.9"},
    "potentials": {"V": "zero", "K": "zero"},
    "initial": {"profile": "gaussian sigma=0.5 center=0.0 mass=1.0"},
    "kinetic": {
        "epsilon": "0.2",
        "dt": "1e-3",
        "t_final": "0.5",
        "splitting": "lie",
        "diag_stride": "50",
    },
    "macro": {"dt": "1e-3", "t_final": "0.5", "diag_stride": "50"},
    "sweep": {
        "epsilons": "0.4 0.2 0.1 0.05",
        "p_list": "1.0 1.25",
        "snap_interval": "0.05",
        "exponents_pqr": "inf inf inf",
        "audit_budget_factor": "2.0",
    },
    "output": {"dir": "out"},
}
_SECTIONS = ("model",) + tuple(_DEFAULTS)


def reference_text():
    """Generated reference page: every section, key and default."""
    lines = ["Run-file reference (key = default):", "", "[model]", "gamma = <required>", "d = <required>"]
    for section, keys in _DEFAULTS.items():
        lines.append("")
        lines.append(f"[{section}]")
        for key, val in keys.items():
            lines.append(f"{key} = {val}")
    return "\n".join(lines) + "\n"


def _parse_sections(text):
    sections = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in _SECTIONS:
                raise RunFileError(f"unknown section [{name}]", line=lineno)
            if name in sections:
                raise RunFileError(f"duplicate section [{name}]", line=lineno)
            sections[name] = {}
            current = name
            continue
        if "=" not in line:
            raise RunFileError(f"expected 'key = value', got {line!r}", line=lineno)
        if current is None:
            raise RunFileError("key outside of any [section]", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        allowed = {"gamma", "d"} if current == "model" else set(_DEFAULTS[current])
        if key not in allowed:
            raise RunFileError(f"unknown key {key!r} in section [{current}]", line=lineno)
        if key in sections[current]:
            raise RunFileError(f"duplicate key {key!r}", line=lineno)
        if not value:
            raise RunFileError(f"empty value for key {key!r}", line=lineno)
        sections[current][key] = value
    if "model" not in sections:
        raise RunFileError("missing required section [model]")
    for key in ("gamma", "d"):
        if key not in sections["model"]:
            raise RunFileError(f"missing required key {key!r} in [model]")
    return sections


def _float(section, key, value):
    try:
        return float(value)
    except ValueError:
        raise RunFileError(f"[{section}] {key}: not a number: {value!r}") from None


def _int(section, key, value):
    try:
        return int(value)
    except ValueError:
        raise RunFileError(f"[{section}] {key}: not an integer: {value!r}") from None


def _float_list(section, key, value):
    return [_float(section, key, tok) for tok in value.split()]


def _potential(section, key, value, role):
    toks = value.split()
    kind = toks[0]
    kv = {}
    for tok in toks[1:]:
        if "=" not in tok:
            raise RunFileError(f"[{section}] {key}: expected name=value, got {tok!r}")
        name, val = tok.split("=", 1)
        kv[name] = _float(section, key, val)
    try:
        if kind == "zero":
            return forces.PotentialSpec.zero(role)
        if kind == "quadratic":
            return forces.PotentialSpec.quadratic(kv.pop("a"), role=role)
        if kind == "gaussian":
            return forces.PotentialSpec.gaussian(kv.pop("A"), kv.pop("w"), role=role)
        if kind == "morse":
            return forces.PotentialSpec.morse(kv.pop("A"), kv.pop("rate"), role=role)
        if kind == "power":
            return forces.PotentialSpec.power(
                kv.pop("c_a"), kv.pop("a"), kv.pop("c_b", 0.0), role=role
            )
    except KeyError as exc:
        raise RunFileError(f"[{section}] {key}: missing parameter {exc}") from None
    raise RunFileError(f"[{section}] {key}: unknown potential kind {kind!r}")


@dataclass
class RunSetup:
    """Everything a subcommand needs, parsed and validated."""

    params: model.ModelParams
    sgrid: fields.SpatialGrid
    vgrid: fields.VelocityGrid
    v_spec: forces.PotentialSpec
    k_spec: forces.PotentialSpec
    rho_cap: float
    rho0: fields.DensityField
    kinetic_config: kinetic.KineticConfig
    macro_config: macro.MacroConfig
    sweep_config: limit.SweepConfig
    exponents_pqr: tuple
    out_dir: str
    raw_sections: dict

    def serialize(self):
        return serialize(self.raw_sections)


def serialize(sections):
    """Canonical text form; parse(serialize(parse(text))) is the identity."""
    lines = []
    for section in _SECTIONS:
        content = sections.get(section)
        if not content:
            continue
        lines.append(f"[{section}]")
        for key, value in content.items():
            lines.append(f"{key} = {value}")
        lines.append("")
    return "\n".join(lines)


def parse_run_text(text):
    """Parse and validate run-file text into a RunSetup."""
    sections = _parse_sections(text)
    filled = {"model": dict(sections["model"])}
    for section, defaults in _DEFAULTS.items():
        filled[section] = dict(defaults)
        filled[section].update(sections.get(section, {}))

    gamma = _float("model", "gamma", filled["model"]["gamma"])
    d = _int("model", "d", filled["model"]["d"])
    try:
        params = model.derive_params(gamma, d)
    except ParameterError as exc:
        raise RunFileError(f"[model]: {exc}") from None

    g = filled["grids"]
    try:
        sgrid = fields.SpatialGrid(d=d, half_length=_float("grids", "L", g["L"]),
                                   cells_per_axis=_int("grids", "Nx", g["Nx"]))
        vgrid = fields.VelocityGrid(d=d, v_max=_float("grids", "v_max", g["v_max"]),
                                    cells_per_axis=_int("grids", "Nv", g["Nv"]))
    except ParameterError as exc:
        raise RunFileError(f"[grids]: {exc}") from None
    rho_cap = _float("grids", "rho_cap", g["rho_cap"])

    v_spec = _potential("potentials", "V", filled["potentials"]["V"], "external")
    k_spec = _potential("potentials", "K", filled["potentials"]["K"], "interaction")

    rho0 = _initial_density(filled["initial"]["profile"], sgrid)

    kin = filled["kinetic"]
    try:
        kcfg = kinetic.KineticConfig(
            params=params,
            epsilon=_float("kinetic", "epsilon", kin["epsilon"]),
            dt=_float("kinetic", "dt", kin["dt"]),
            t_final=_float("kinetic", "t_final", kin["t_final"]),
            sgrid=sgrid,
            vgrid=vgrid,
            v_spec=v_spec,
            k_spec=k_spec,
            rho_cap=rho_cap,
            diag_stride=_int("kinetic", "diag_stride", kin["diag_stride"]),
            splitting=kin["splitting"],
        )
    except (ParameterError, TruncationError) as exc:
        raise RunFileError(f"[kinetic]: {exc}") from None

    mac = filled["macro"]
    try:
        mcfg = macro.MacroConfig(
            params=params,
            grid=sgrid,
            dt=_float("macro", "dt", mac["dt"]),
            t_final=_float("macro", "t_final", mac["t_final"]),
            v_spec=v_spec,
            k_spec=k_spec,
            diag_stride=_int("macro", "diag_stride", mac["diag_stride"]),
        )
    except ParameterError as exc:
        raise RunFileError(f"[macro]: {exc}") from None

    sw = filled["sweep"]
    try:
        scfg = limit.SweepConfig(
            epsilons=tuple(_float_list("sweep", "epsilons", sw["epsilons"])),
            kinetic_template=kcfg,
            macro_config=mcfg,
            p_list=tuple(_float_list("sweep", "p_list", sw["p_list"])),
            snap_interval=_float("sweep", "snap_interval", sw["snap_interval"]),
            audit_budget_factor=_float(
                "sweep", "audit_budget_factor", sw["audit_budget_factor"]
            ),
        )
    except ParameterError as exc:
        raise RunFileError(f"[sweep]: {exc}") from None

    pqr = _float_list("sweep", "exponents_pqr", sw["exponents_pqr"])
    if len(pqr) != 3:
        raise RunFileError("[sweep] exponents_pqr: expected three values (p q r)")

    return RunSetup(
        params=params,
        sgrid=sgrid,
        vgrid=vgrid,
        v_spec=v_spec,
        k_spec=k_spec,
        rho_cap=rho_cap,
        rho0=rho0,
        kinetic_config=kcfg,
        macro_config=mcfg,
        sweep_config=scfg,
        exponents_pqr=tuple(pqr),
        out_dir=filled["output"]["dir"],
        raw_sections=filled,
    )


def _initial_density(value, sgrid):
    toks = value.split()
    kind = toks[0]
    kv = {}
    for tok in toks[1:]:
        if "=" not in tok:
            raise RunFileError(f"[initial] profile: expected name=value, got {tok!r}")
        name, val = tok.split("=", 1)
        kv[name] = _float("initial", "profile", val)
    if kind == "gaussian":
        return fields.gaussian_density(
            sgrid,
            sigma=kv.get("sigma", 0.5),
            center=kv.get("center", 0.0),
            mass=kv.get("mass", 1.0),
        )
    if kind == "uniform":
        val = kv.get("value", 1.0)
        return fields.DensityField(sgrid, np.full(sgrid.shape(), val))
    raise RunFileError(f"[initial] profile: unknown kind {kind!r}")


def parse_run_file(path):
    with open(path, "r") as fh:
        return parse_run_text(fh.read())
