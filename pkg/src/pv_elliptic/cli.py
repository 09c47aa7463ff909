"""Command-line interface: ``pv-elliptic boutroux|identities|verify|orbit``.

Configs and reports are JSON with complex numbers as ``[re, im]``; sample
tables are CSV; plot data is two-column text.  Exit codes: 0 pass, 1 check
failure, 2 numerical failure, 3 config error.
"""

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .curve_periods import BILINEAR, BoutrouxFailure, continue_in_phi, solve_boutroux
from .dynamics import (IntegrationFailure, PainleveParams, RayOptions, integrate_ray,
                       y_of_psi)
from .error_term import ContourError, TailBudgetError
from .identities import run_identities
from .leading_order import StripSpec, default_delta0, make_frame, psi0, psi0_prime
from .verify import FitError, InsufficientSamples, MeasureError, compare, fit_frame

EXIT_PASS, EXIT_CHECK, EXIT_NUMERIC, EXIT_CONFIG = 0, 1, 2, 3
BOUTROUX_RESIDUAL_MAX = 1e-10
BILINEAR_TOL = 1e-9

CSV_COLUMNS = ["re_x", "im_x", "re_psi_num", "im_psi_num", "re_h_num", "im_h_num",
               "re_h_pred", "im_h_pred", "abs_x_delta", "re_b_num_minus_b0",
               "im_b_num_minus_b0", "re_b_corr_pred", "im_b_corr_pred"]
ORBIT_COLUMNS = ["t", "re_y", "im_y", "re_dy", "im_dy", "chart", "in_detour"]


class ConfigError(ValueError):
    """Malformed or unknown configuration entries."""


class StageError(RuntimeError):
    def __init__(self, stage, exc):
        super().__init__(f"{stage}: {exc}")
        self.stage, self.exc = stage, exc


NUMERIC_ERRORS = (BoutrouxFailure, IntegrationFailure, FitError, MeasureError, TailBudgetError,
                  ContourError, InsufficientSamples, np.linalg.LinAlgError, FloatingPointError)


# ---------------------------------------------------------------- config

def _cx(v, where):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return complex(v)
    if (isinstance(v, list) and len(v) == 2
            and all(isinstance(a, (int, float)) and not isinstance(a, bool) for a in v)):
        return complex(v[0], v[1])
    raise ConfigError(f"{where}: expected [re, im], got {v!r}")


def _real(v, where):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return float(v)
    raise ConfigError(f"{where}: expected a number, got {v!r}")


def _enc(v):
    return [v.real, v.imag] if isinstance(v, complex) else v


@dataclass
class Section:
    """Base for config sections: ``from_dict`` rejects unknown keys and checks types."""

    @classmethod
    def from_dict(cls, d, where):
        if not isinstance(d, dict):
            raise ConfigError(f"{where}: expected an object")
        known = {f.name: f for f in fields(cls)}
        extra = sorted(set(d) - set(known))
        if extra:
            raise ConfigError(f"{where}: unknown key(s) {extra}")
        kw = {}
        for name, val in d.items():
            kind = known[name].metadata.get("kind", "real")
            path = f"{where}.{name}"
            if val is None and known[name].metadata.get("nullable"):
                kw[name] = None
            elif kind == "complex":
                kw[name] = _cx(val, path)
            elif kind == "real":
                kw[name] = _real(val, path)
            elif kind == "int":
                if not isinstance(val, int) or isinstance(val, bool):
                    raise ConfigError(f"{path}: expected an integer")
                kw[name] = val
            elif kind == "str":
                if not isinstance(val, str):
                    raise ConfigError(f"{path}: expected a string")
                kw[name] = val
        return cls(**kw)

    def to_dict(self):
        return {f.name: _enc(getattr(self, f.name)) for f in fields(self)}


def _f(default, kind="real", nullable=False):
    return field(default=default, metadata={"kind": kind, "nullable": nullable})


@dataclass
class ParamsSection(Section):
    theta0: complex = _f(1 / 3 + 0j, "complex")
    theta1: complex = _f(1 / 5 + 0j, "complex")
    theta_inf: complex = _f(1 / 7 + 0j, "complex")


@dataclass
class StripSection(Section):
    t_inf: float = _f(None, nullable=True)
    kappa0: float = _f(1.0)
    delta0: float = _f(None, nullable=True)


@dataclass
class ICSection(Section):
    """Either ``y0`` and ``y0p``, or ``x0``: then ``y`` is seeded from ``psi0`` of that frame."""

    t0: float = _f(30.0)
    y0: complex = _f(None, "complex", True)
    y0p: complex = _f(None, "complex", True)
    x0: complex = _f(1 + 0.5j, "complex", True)


@dataclass
class TolSection(Section):
    tail: float = _f(1e-4)
    ode_rtol: float = _f(1e-12)
    ode_atol: float = _f(1e-12)
    boutroux: float = _f(1e-10)


@dataclass
class OutputSection(Section):
    report: str = _f("report.json", "str")
    csv: str = _f("samples.csv", "str")
    plot: str = _f("plot_x_delta.txt", "str")


@dataclass
class IdentitiesSection(Section):
    x0: complex = _f(1 + 0.5j, "complex")
    beta0: complex = _f(0.3 - 0.2j, "complex")
    constant_shift: float = _f(0.0)


@dataclass
class VerifySection(Section):
    fit_passes: int = _f(3, "int")


SECTIONS = {"params": ParamsSection, "strip": StripSection, "ic": ICSection,
            "tolerances": TolSection, "outputs": OutputSection,
            "identities": IdentitiesSection, "verify": VerifySection}


@dataclass
class RunConfig:
    phi: float = 0.7
    phi_grid: list = None
    t_end: float = 480.0
    dt_out: float = 0.25
    params: ParamsSection = field(default_factory=ParamsSection)
    strip: StripSection = field(default_factory=StripSection)
    ic: ICSection = field(default_factory=ICSection)
    tolerances: TolSection = field(default_factory=TolSection)
    outputs: OutputSection = field(default_factory=OutputSection)
    identities: IdentitiesSection = field(default_factory=IdentitiesSection)
    verify: VerifySection = field(default_factory=VerifySection)

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("config: expected an object")
        extra = sorted(set(d) - {f.name for f in fields(cls)})
        if extra:
            raise ConfigError(f"config: unknown key(s) {extra}")
        kw = {}
        for name, val in d.items():
            if name in SECTIONS:
                kw[name] = SECTIONS[name].from_dict(val, name)
            elif name == "phi_grid":
                if val is not None and (not isinstance(val, list) or not val):
                    raise ConfigError("phi_grid: expected a non-empty list or null")
                kw[name] = None if val is None else [_real(v, name) for v in val]
            else:
                kw[name] = _real(val, name)
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    def to_dict(self):
        grid = None if self.phi_grid is None else list(self.phi_grid)
        out = {"phi": self.phi, "phi_grid": grid, "t_end": self.t_end,
               "dt_out": self.dt_out}
        for name in SECTIONS:
            out[name] = getattr(self, name).to_dict()
        return out

    def validate(self):
        for phi in [self.phi] + list(self.phi_grid or []):
            if not 0 < abs(phi) < np.pi / 2:
                raise ConfigError(f"phi = {phi}: must satisfy 0 < |phi| < pi/2")
        if self.ic.t0 <= 0 or self.t_end < self.ic.t0:
            raise ConfigError("ic.t0 must be positive and t_end >= t0")
        if self.dt_out <= 0:
            raise ConfigError("dt_out: must be positive")
        if (self.ic.y0 is None) != (self.ic.y0p is None):
            raise ConfigError("ic: give both y0 and y0p, or neither")
        if self.ic.y0 is None and self.ic.x0 is None:
            raise ConfigError("ic: give y0 and y0p, or x0")
        for name in ("tail", "ode_rtol", "ode_atol", "boutroux"):
            if getattr(self.tolerances, name) <= 0:
                raise ConfigError(f"tolerances.{name}: must be positive")
        if self.verify.fit_passes < 0:
            raise ConfigError("verify.fit_passes: must be non-negative")

    @property
    def painleve_params(self):
        p = self.params
        return PainleveParams(p.theta0, p.theta1, p.theta_inf)


def load_config(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return RunConfig.from_dict(data)


# ---------------------------------------------------------------- output helpers

def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (complex, np.complexfloating)):
        return [float(v.real), float(v.imag)]
    if isinstance(v, (np.floating, float)):
        return float(v) if np.isfinite(v) else None
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2)
        fh.write("\n")


def _fmt(v):
    return repr(float(v))


# ---------------------------------------------------------------- commands

def _bd_record(bd):
    return {"phi": bd.phi, "A": bd.A, "k": bd.k, "Omega_a": bd.Omega_a, "Omega_b": bd.Omega_b,
            "E_a": bd.E_a, "E_b": bd.E_b, "tau0": bd.tau0,
            "residuals": list(bd.residual), "bilinear": bd.bilinear,
            "bilinear_error": abs(bd.bilinear - BILINEAR)}


def cmd_boutroux(cfg, out):
    """Solve at ``phi`` or along ``phi_grid``; write ``boutroux.json``."""
    grid = cfg.phi_grid or [cfg.phi]
    tol = cfg.tolerances.boutroux
    solved = continue_in_phi(grid, tol=tol) if len(grid) > 1 else []
    if len(grid) == 1:
        try:
            solved = [solve_boutroux(grid[0], tol=tol)]
        except BoutrouxFailure:
            solved = []
    records = [_bd_record(bd) for bd in solved]
    ok = all(max(map(abs, r["residuals"])) <= BOUTROUX_RESIDUAL_MAX
             and r["bilinear_error"] <= BILINEAR_TOL * 4 * np.pi and r["tau0"].imag > 0
             for r in records)
    report = {"records": records, "passed": ok}
    if len(solved) < len(grid):
        report["error"] = {"stage": "boutroux", "index": len(solved), "phi": grid[len(solved)],
                           "message": "Boutroux solve failed"}
        write_json(out / "boutroux.json", report)
        return EXIT_NUMERIC
    write_json(out / "boutroux.json", report)
    return EXIT_PASS if ok else EXIT_CHECK


def cmd_identities(cfg, out):
    """Run the function identities; write ``identities.json``."""
    bd = _stage("boutroux", lambda: solve_boutroux(cfg.phi, tol=cfg.tolerances.boutroux))
    s = cfg.identities
    checks = run_identities(bd, s.x0, s.beta0, s.constant_shift)
    ok = all(c["passed"] for c in checks.values())
    write_json(out / "identities.json", {"phi": cfg.phi, "checks": checks, "passed": ok})
    return EXIT_PASS if ok else EXIT_CHECK


def initial_condition(cfg, bd):
    """``(t0, y0, y0')`` from the config; with ``x0`` the data of ``psi0`` at ``t0``."""
    ic = cfg.ic
    if ic.y0 is not None:
        return ic.t0, ic.y0, ic.y0p
    frame = make_frame(bd, ic.x0, 0)
    e = np.exp(1j * bd.phi)
    p, dp = psi0(e * ic.t0, frame), psi0_prime(e * ic.t0, frame)
    # y = (psi + 1)/(psi - 1), and d/dt = e^{i phi} d/dx
    return ic.t0, complex(y_of_psi(p)), complex(e * (-2 * dp / (p - 1) ** 2))


def _ray_options(cfg):
    return RayOptions(rtol=cfg.tolerances.ode_rtol, atol=cfg.tolerances.ode_atol,
                      dt_out=cfg.dt_out)


def _stage(stage, fn):
    try:
        return fn()
    except NUMERIC_ERRORS as exc:
        raise StageError(stage, exc) from exc


def _integrate(cfg, bd):
    ic = initial_condition(cfg, bd)
    return _stage("integrate", lambda: integrate_ray(ic, cfg.t_end, cfg.painleve_params,
                                                     cfg.phi, _ray_options(cfg)))


def cmd_orbit(cfg, out):
    """Integrate only; write ``orbit.csv`` and ``detours.json``."""
    bd = _stage("boutroux", lambda: solve_boutroux(cfg.phi, tol=cfg.tolerances.boutroux))
    tr = _integrate(cfg, bd)
    with open(out / "orbit.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ORBIT_COLUMNS)
        for t, y, yt, ch, ok in zip(tr.t, tr.y, tr.yt, tr.chart, tr.valid):
            w.writerow([_fmt(t), _fmt(y.real), _fmt(y.imag), _fmt(yt.real), _fmt(yt.imag),
                        ch, int(not ok)])
    write_json(out / "detours.json", {"detours": [list(d) for d in tr.detours],
                                      "stats": tr.stats})
    return EXIT_PASS


def _strip(cfg, bd, frame):
    s = cfg.strip
    t_inf = cfg.ic.t0 - 1e-9 if s.t_inf is None else s.t_inf
    delta0 = default_delta0(bd) if s.delta0 is None else s.delta0
    try:
        return StripSpec(cfg.phi, t_inf, s.kappa0, delta0, frame)
    except ValueError as exc:
        raise ConfigError(f"strip: {exc}") from exc


def cmd_verify(cfg, out):
    """Full pipeline; write the report, the sample CSV and the plot data."""
    params = cfg.painleve_params
    tol = cfg.tolerances.tail
    bd = _stage("boutroux", lambda: solve_boutroux(cfg.phi, tol=cfg.tolerances.boutroux))
    tr = _integrate(cfg, bd)
    strip = _strip(cfg, bd, make_frame(bd, 0, 0))
    frame, info = _stage("fit", lambda: fit_frame(tr, bd, tol, cfg.verify.fit_passes, strip))
    rep = _stage("compare", lambda: compare(tr, frame, params, bd, tol, fit=info, strip=strip))
    r = rep.rows
    report = {
        "phi": cfg.phi, "A": bd.A,
        "fit": rep.fit,
        "windows": rep.windows,
        "stats": rep.stats,
        "ratios": rep.ratios,
        "gates": rep.gates,
        "consistency": rep.consistency,
        "budgets": {"h": float(r["h_budget"][0]), "b_max": float(np.max(r["b_budget"]))},
        "n_rows": len(r["x"]),
        "passed": rep.passed,
    }
    write_json(out / cfg.outputs.report, report)
    chi = r["b_num"] - r["b0"]
    xd = np.abs(r["x"] * r["delta_num"])
    with open(out / cfg.outputs.csv, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for i in range(len(r["x"])):
            vals = [r["x"][i].real, r["x"][i].imag, r["psi_num"][i].real, r["psi_num"][i].imag,
                    r["h_num"][i].real, r["h_num"][i].imag, r["h_pred"][i].real,
                    r["h_pred"][i].imag, xd[i], chi[i].real, chi[i].imag,
                    r["b_corr_pred"][i].real, r["b_corr_pred"][i].imag]
            w.writerow([_fmt(v) for v in vals])
    with open(out / cfg.outputs.plot, "w") as fh:
        fh.write("# abs_x abs_x_delta\n")
        for a, b in zip(np.abs(r["x"]), xd):
            fh.write(f"{_fmt(a)} {_fmt(b)}\n")
    return EXIT_PASS if rep.passed else EXIT_CHECK


COMMANDS = {"boutroux": cmd_boutroux, "identities": cmd_identities, "verify": cmd_verify,
            "orbit": cmd_orbit}


def build_parser():
    p = argparse.ArgumentParser(prog="pv-elliptic", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="JSON run config")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--tol", type=float, help="override tolerances.tail")
    p.add_argument("--phi", type=float, help="override phi")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        cfg = load_config(args.config)
        if args.phi is not None:
            cfg.phi, cfg.phi_grid = args.phi, None
        if args.tol is not None:
            cfg.tolerances.tail = args.tol
        cfg.validate()
        out.mkdir(parents=True, exist_ok=True)
        code = COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        write_json(out / "error.json", {"stage": exc.stage, "type": type(exc.exc).__name__,
                                        "message": str(exc.exc)})
        print(f"numerical failure in stage {exc.stage}: {exc.exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"{args.command}: {'pass' if code == EXIT_PASS else 'fail'} (exit {code})")
    return code


if __name__ == "__main__":
    sys.exit(main())
