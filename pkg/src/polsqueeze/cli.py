"""Command-line front end: ``polsqueeze <command> [--config FILE] [--set k=v]``.

Configuration is an INI file (sections below, every key optional). Command
line flags override file values. Output CSV files are written to ``--out``
(default: the current directory) and rates are given in units of γs.

Exit codes: 0 success, 1 failed verification or physics precondition,
2 configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import math
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import fluctuations as fl
from . import meanfield as mf
from . import oracle
from .models import (
    CHI3_CHARGES,
    OPO_CHARGES,
    Chi3Params,
    OpoParams,
    ParameterError,
    build_chi3_circular,
    build_opo_hamiltonian,
    chi3_model,
    conservation_residual,
    opo_model,
    opo_reduced_model,
    symmetry_residual,
    verify_basis_equivalence,
)
from .polarization import E_MINUS, E_PLUS, E_X, E_Y, JonesVector

COMMANDS = ("thresholds", "steady", "spectrum", "squeeze-sweep", "oracle", "verify")

# section -> key -> (parser, default)
SCHEMA = {
    "model": {"name": (str, "chi3")},
    "chi3": {
        "delta": (float, 2.0),
        "g": (float, -1.0),
        "rho2": (float, 0.7),
        "gamma_s": (float, 1.0),
        "A": (float, 1 / 3),
        "B": (float, 1 / 3),
    },
    "opo": {
        "pump": (float, 1.5),
        "chi": (float, 1.0),
        "gamma_p": (float, 1.0),
        "gamma_s": (float, 1.0),
    },
    "sweep": {
        "variable": (str, ""),
        "start": (float, math.nan),
        "stop": (float, math.nan),
        "points": (int, 15),
        "scale": (str, "linear"),
    },
    "thresholds": {
        "start": (float, 0.0),
        "stop": (float, 5.0),
        "points": (int, 51),
    },
    "spectrum": {
        "mode": (str, "dark"),
        "phi": (str, "optimal"),
        "points": (int, 401),
        "omega_min": (float, 1e-3),
        "omega_max": (float, 1e3),
    },
    "oracle": {
        "opo_cutoff": (int, 12),
        "chi3_cutoff": (int, 7),
        "pump_cutoff": (int, 4),
        "pump": (str, "classical"),
        "opo_pump": (float, 0.2),
        "chi3_delta": (float, 3.0),
        "chi3_g": (float, -0.01),
        "chi3_rho2": (float, 10.0),
    },
    "tolerances": {
        "symmetry": (float, 1e-14),
        "conservation": (float, 1e-10),
        "basis": (float, 1e-12),
        "goldstone": (float, 1e-8),
        "squeezing": (float, 1e-6),
        "oracle": (float, 1e-2),
        "drift": (float, 1e-6),
    },
}

CHOICES = {
    ("model", "name"): ("opo", "chi3"),
    ("sweep", "scale"): ("linear", "log"),
    ("spectrum", "mode"): ("dark", "bright", "x", "y", "plus", "minus", "twin"),
    ("oracle", "pump"): ("classical", "quantum"),
}


class ConfigError(ValueError):
    pass


class PhysicsError(RuntimeError):
    """A valid configuration whose requested quantity does not exist."""


@dataclass
class RunConfig:
    values: dict
    out: Path

    def __getitem__(self, key):
        section, name = key.split(".")
        return self.values[section][name]

    @property
    def model(self):
        return self["model.name"]

    def chi3_params(self):
        s = self.values["chi3"]
        return Chi3Params(s["delta"], s["g"], s["rho2"], s["gamma_s"], s["A"], s["B"])

    def opo_params(self):
        s = self.values["opo"]
        return OpoParams(s["pump"], s["chi"], s["gamma_p"], s["gamma_s"])

    def params(self):
        return self.chi3_params() if self.model == "chi3" else self.opo_params()

    def gamma_s(self):
        return self.values[self.model]["gamma_s"]

    def sweep_values(self):
        s = self.values["sweep"]
        var = s["variable"] or mf.control_variable(self.params())
        start, stop = s["start"], s["stop"]
        if math.isnan(start) or math.isnan(stop):
            start, stop = _default_sweep_range(self, var)
        if s["points"] < 1:
            raise ConfigError("sweep.points must be at least 1")
        if s["scale"] == "log":
            if start <= 0 or stop <= 0:
                raise ConfigError("log sweeps need positive start and stop")
            return var, np.geomspace(start, stop, s["points"])
        return var, np.linspace(start, stop, s["points"])


def _default_sweep_range(cfg, var):
    p = cfg.params()
    if isinstance(p, Chi3Params) and var == "rho2":
        iv = mf.threshold_interval(p)
        if iv.exists:
            lo, hi = iv.branch_lower, iv.upper
            return lo - 0.1 * (hi - lo), hi + 0.1 * (hi - lo)
        return 0.0, 1.0
    if isinstance(p, OpoParams) and var == "pump":
        th = mf.opo_threshold(p)
        return 0.5 * th, 2.0 * th
    value = getattr(p, var)
    return 0.5 * value, 1.5 * value


def _parse_value(section, key, text):
    conv, _ = SCHEMA[section][key]
    try:
        value = conv(text.strip())
    except ValueError as exc:
        raise ConfigError(f"{section}.{key}: cannot parse {text!r}") from exc
    allowed = CHOICES.get((section, key))
    if allowed and value not in allowed:
        raise ConfigError(f"{section}.{key} must be one of {', '.join(allowed)}")
    return value


def load_config(path=None, overrides=(), model=None, out=".") -> RunConfig:
    values = {sec: {k: d for k, (_, d) in keys.items()} for sec, keys in SCHEMA.items()}
    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        parser.optionxform = str
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        for section in parser.sections():
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]")
            for key, text in parser.items(section):
                if key not in SCHEMA[section]:
                    raise ConfigError(f"unknown key {section}.{key}")
                values[section][key] = _parse_value(section, key, text)
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        key, text = item.split("=", 1)
        section, name = key.strip().split(".", 1)
        if section not in SCHEMA or name not in SCHEMA[section]:
            raise ConfigError(f"unknown key {key}")
        values[section][name] = _parse_value(section, name, text)
    if model is not None:
        values["model"]["name"] = _parse_value("model", "name", model)
    cfg = RunConfig(values, Path(out))
    try:
        cfg.chi3_params()
        cfg.opo_params()
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


# CSV -------------------------------------------------------------------------------


def format_value(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0:
        return "0"
    if abs(x) < 1e-3:
        return f"{x:.10e}"
    return repr(round(x, 12))


def render_csv(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row[c]) for c in columns])
    return buf.getvalue()


def write_csv(cfg: RunConfig, name, columns, rows) -> Path:
    cfg.out.mkdir(parents=True, exist_ok=True)
    path = cfg.out / name
    path.write_text(render_csv(columns, rows))
    return path


# commands ------------------------------------------------------------------------


THRESHOLD_COLUMNS = ("delta", "rho2_min", "rho2_max", "exists")


def cmd_thresholds(cfg: RunConfig):
    if cfg.model == "opo":
        p = cfg.opo_params()
        rows = [{"pump_threshold": mf.opo_threshold(p)}]
        return write_csv(cfg, "thresholds.csv", ("pump_threshold",), rows), 0
    s = cfg.values["thresholds"]
    if s["points"] < 1:
        raise ConfigError("thresholds.points must be at least 1 (empty δ grid)")
    base = cfg.chi3_params()
    gs = base.gamma_s
    rows = []
    for d in np.linspace(s["start"], s["stop"], s["points"]):
        iv = mf.threshold_interval(replace(base, delta=float(d) * gs))
        rows.append(
            {
                "delta": float(d),
                "rho2_min": iv.branch_lower if iv.exists else math.nan,
                "rho2_max": iv.upper if iv.exists else math.nan,
                "exists": iv.exists,
            }
        )
    return write_csv(cfg, "thresholds.csv", THRESHOLD_COLUMNS, rows), 0


def cmd_steady(cfg: RunConfig):
    var, values = cfg.sweep_values()
    p = cfg.params()
    if var != mf.control_variable(p):
        raise ConfigError(f"steady sweeps the control variable {mf.control_variable(p)}")
    rows = mf.sweep(p, values)
    cols = mf.SWEEP_COLUMNS[cfg.model]
    for r in rows:
        r["max_re_lambda"] /= p.gamma_s
    return write_csv(cfg, "steady.csv", cols, rows), 0


_FIXED_MODES = {"x": E_X, "y": E_Y, "plus": E_PLUS, "minus": E_MINUS}


def _spectrum_setup(cfg: RunConfig):
    p = cfg.params()
    model = chi3_model(p) if cfg.model == "chi3" else opo_model(p)
    mode_name = cfg["spectrum.mode"]
    bright = fl.bright_state(model)
    if mode_name in ("dark", "bright", "twin") and bright is None:
        raise PhysicsError(f"mode '{mode_name}' needs a stable bright state at these parameters")
    if mode_name == "twin":
        if cfg.model != "opo":
            raise ConfigError("spectrum.mode = twin applies to the opo model only")
        return model, bright, np.array([1.0, -1.0]) / math.sqrt(2)
    state = bright if bright is not None else mf.steady_states(model)[0]
    if mode_name == "dark":
        mode = fl.dark_mode_of(model, state)
    elif mode_name == "bright":
        mode = state.polarization(model)
    else:
        mode = _FIXED_MODES[mode_name]
    return model, state, mode


def cmd_spectrum(cfg: RunConfig):
    s = cfg.values["spectrum"]
    if s["points"] < 1 or not (0 < s["omega_min"] < s["omega_max"]):
        raise ConfigError("spectrum needs points >= 1 and 0 < omega_min < omega_max")
    model, state, mode = _spectrum_setup(cfg)
    dd = fl.linearize(model, state)
    gs = model.gamma_s
    omegas = np.concatenate([[0.0], np.geomspace(s["omega_min"], s["omega_max"], s["points"]) * gs])
    if s["mode"] == "twin":
        phi = float(np.angle(state["sig_x"]))
    elif s["phi"] == "optimal":
        phi, _ = fl.optimal_quadrature(dd, mode)
    else:
        try:
            phi = float(s["phi"])
        except ValueError as exc:
            raise ConfigError("spectrum.phi must be 'optimal' or a number") from exc
    spec = fl.output_spectrum(dd, mode, phi, omegas)
    print(f"mode={_describe(mode)} phi={format_value(phi)}")
    return write_csv(cfg, "spectrum.csv", ("omega_over_gamma_s", "V"), spec.rows(gs)), 0


def _describe(mode):
    if isinstance(mode, JonesVector):
        return f"({format_value(mode.cx.real)}{mode.cx.imag:+.6f}j, {format_value(mode.cy.real)}{mode.cy.imag:+.6f}j)"
    return "intensity-difference"


def cmd_squeeze_sweep(cfg: RunConfig):
    if cfg.model != "chi3":
        raise ConfigError("squeeze-sweep applies to the chi3 model")
    var, values = cfg.sweep_values()
    base = cfg.chi3_params()
    points = [replace(base, **{var: float(v)}) for v in values]
    rows = fl.dark_mode_squeezing(points)
    return write_csv(cfg, "squeeze_sweep.csv", fl.SQUEEZE_COLUMNS, rows), 0


def oracle_models(cfg: RunConfig):
    """``[(label, model, cutoffs)]`` for the oracle comparison points."""
    s = cfg.values["oracle"]
    out = []
    if cfg.model == "opo":
        n = s["opo_cutoff"]
        p = replace(cfg.opo_params(), pump=s["opo_pump"])
        if p.pump >= p.threshold:
            raise ConfigError("oracle.opo_pump must be below threshold")
        if s["pump"] == "classical":
            out.append(("opo", opo_reduced_model(p), (n, n)))
        else:
            out.append(("opo", opo_model(p), (n, n, s["pump_cutoff"])))
    else:
        p = replace(cfg.chi3_params(), delta=s["chi3_delta"], g=s["chi3_g"], rho2=s["chi3_rho2"])
        iv = mf.threshold_interval(p)
        if p.rho2 >= iv.lower:
            raise ConfigError("oracle.chi3_rho2 must be below the lower threshold")
        n = s["chi3_cutoff"]
        out.append(("chi3", chi3_model(p), (n, n)))
    return out


def cmd_oracle(cfg: RunConfig):
    rows = []
    for label, model, cutoffs in oracle_models(cfg):
        rows.extend(oracle.compare(model, cutoffs, label))
    worst = max(r["rel_dev"] for r in rows)
    print(f"max rel_dev = {format_value(worst)}")
    return write_csv(cfg, "oracle.csv", oracle.COMPARISON_COLUMNS, rows), 0


# verification suite ----------------------------------------------------------------


VERIFY_COLUMNS = ("check", "value", "tolerance", "passed")


def _check(name, value, tol, passed=None):
    ok = value < tol if passed is None else passed
    return {"check": name, "value": value, "tolerance": tol, "passed": bool(ok)}


def verification_rows(cfg: RunConfig):
    tol = cfg.values["tolerances"]
    c3 = cfg.chi3_params()
    op = cfg.opo_params()
    rows = []

    thetas = np.linspace(0, 2 * math.pi, 100, endpoint=False) + 0.1
    h_opo, h_c3 = build_opo_hamiltonian(op), build_chi3_circular(c3)
    rows.append(_check("symmetry_opo", max(symmetry_residual(h_opo, OPO_CHARGES, t) for t in thetas), tol["symmetry"]))
    rows.append(_check("symmetry_chi3", max(symmetry_residual(h_c3, CHI3_CHARGES, t) for t in thetas), tol["symmetry"]))
    rows.append(_check("basis_equivalence", verify_basis_equivalence(c3), tol["basis"]))
    rows.append(_check("conservation_opo_coeff", conservation_residual(h_opo, OPO_CHARGES), tol["conservation"]))
    rows.append(_check("conservation_chi3_coeff", conservation_residual(h_c3, CHI3_CHARGES), tol["conservation"]))
    rows.append(_check("conservation_opo_fock", oracle.conservation_check(h_opo, (6, 6, 4), OPO_CHARGES), tol["conservation"]))
    rows.append(_check("conservation_chi3_fock", oracle.conservation_check(h_c3, (8, 8), CHI3_CHARGES), tol["conservation"]))

    for name, model in (("chi3", chi3_model(c3)), ("opo", opo_model(op))):
        bright = fl.bright_state(model)
        if bright is None:
            rows.append(_check(f"goldstone_{name}", math.nan, tol["goldstone"], False))
            continue
        rep = mf.stability(model, bright)
        overlap = mf.goldstone_overlap(model, bright, rep)
        rows.append(_check(f"goldstone_{name}_zero_count", rep.zero_count, 1.5, rep.zero_count == 1))
        rows.append(_check(f"goldstone_{name}_alignment", max(0.0, 1 - overlap), 1e-6))
        dd = fl.linearize(model, bright)
        if name == "chi3":
            phi, v0 = fl.optimal_quadrature(dd, fl.dark_mode_of(model, bright))
            rows.append(_check("dark_mode_V0", v0, tol["squeezing"]))
            conj = fl.output_spectrum(dd, fl.dark_mode_of(model, bright), phi + math.pi / 2, [0.0]).V[0]
            rows.append(_check("dark_mode_conjugate_V0", conj, 1e3, conj > 1e3))
        else:
            spec = fl.twin_beam_intensity_spectrum(op, [0.0, 100 * op.gamma_s])
            rows.append(_check("twin_beam_V0", spec.V[0], tol["squeezing"]))
            rows.append(_check("twin_beam_shot_noise", abs(spec.V[1] - 1), 1e-3))

    for model_name in ("opo", "chi3"):
        sub = replace(cfg, values={**cfg.values, "model": {"name": model_name}})
        for label, model, cutoffs in oracle_models(sub):
            dev = max(r["rel_dev"] for r in oracle.compare(model, cutoffs, label))
            rows.append(_check(f"oracle_{label}", dev, tol["oracle"]))
            rows.append(_check(f"oracle_{label}_cutoff_drift", oracle.cutoff_drift(model, cutoffs), tol["drift"]))
    return rows


def cmd_verify(cfg: RunConfig):
    rows = verification_rows(cfg)
    width = max(len(r["check"]) for r in rows)
    for r in rows:
        status = "PASS" if r["passed"] else "FAIL"
        print(f"{r['check']:<{width}}  {format_value(r['value']):>22}  {format_value(r['tolerance']):>10}  {status}")
    path = write_csv(cfg, "verify.csv", VERIFY_COLUMNS, rows)
    return path, 0 if all(r["passed"] for r in rows) else 1


HANDLERS = {
    "thresholds": cmd_thresholds,
    "steady": cmd_steady,
    "spectrum": cmd_spectrum,
    "squeeze-sweep": cmd_squeeze_sweep,
    "oracle": cmd_oracle,
    "verify": cmd_verify,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="polsqueeze", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", metavar="PATH")
    ap.add_argument("--model", choices=("opo", "chi3"))
    ap.add_argument("--out", metavar="DIR", default=".")
    ap.add_argument("--set", metavar="KEY=VALUE", action="append", default=[], dest="overrides")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides, args.model, args.out)
        path, code = HANDLERS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (PhysicsError, mf.NotStationaryError, fl.UnstableError, oracle.SteadyStateError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {path}")
    return code


if __name__ == "__main__":
    sys.exit(main())
