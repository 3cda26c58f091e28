"""Command-line front end: ``growth solve|classify|verify|figures``.

A scenario is one JSON document. It may name an in-repo preset with
``"preset": "<name>"`` and override any of its keys; ``--scenario`` also
accepts a bare preset name. Recognised keys:

``profile`` / ``profiles``
    ``{"family": "zero" | "power" | "logpos" | "logneg" | "custom", ...}``
    with ``k`` and ``C`` for power, ``C`` for logpos, and ``coefficient``,
    ``exponent`` and ``sign`` for the custom profile ``c s^a``.
    ``{"preset": "pucci-sublinear" | "px-laplace"}`` is also accepted.
``ellipticity``
    ``{"lam": 1.0, "Lam": 1.0}``.
``geometry``
    ``{"n": 2, "gamma_factor": 1.0, "kappa": null}``, i.e.
    ``gamma(R) = gamma_factor * R`` and ``K = kappa/gamma`` (default ``n``).
``nu``
    Nonempty list of initial values.
``R``, ``R_sweep``, ``grid_points``
    Horizon, classification sweep, output grid size.
``operator``, ``sampling``
    Barrier verification: operator tag with its parameters, sample plan.
``px``, ``one_d``
    Sharp solutions of the variable exponent Laplacian.

Exit codes: 0 success, 1 verification failed, 2 configuration error,
3 solver failure, 4 unknown family.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import closed_forms as cf
from .barrier import BarrierField, OperatorUnderTest, SamplePlan, verify_supersolution
from .errors import GrowthError, SolverError, UnknownFamily
from .growth import DEFAULT_SWEEP, classify
from .ode_engine import OdeProblem, StepControl, solve
from .profiles import Ellipticity, Geometry, GrowthProfile, preset as profile_preset
from .pxlaplace import Exponent, divergence_residual, px_operator, verify_1d_solution

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_UNKNOWN_FAMILY = 4

PRESETS = ("fig2", "fig3", "fig4", "pucci-sublinear", "px-laplace")
TARGETS = ("barrier", "px-sharp", "1d-solution")


class ConfigError(Exception):
    """Malformed scenario document."""


# ---------------------------------------------------------------- scenario

def load_preset(name):
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    text = resources.files("plgrowth").joinpath("presets", f"{name}.json").read_text()
    return json.loads(text)


def load_scenario(entry):
    """Parse a scenario from a path or a preset name and validate it."""
    path = Path(entry)
    if path.is_file():
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    elif entry in PRESETS:
        doc = {"preset": entry}
    else:
        raise ConfigError(f"scenario {entry!r} is neither a file nor a preset")
    if not isinstance(doc, dict):
        raise ConfigError("scenario must be a JSON object")
    if "preset" in doc:
        base = load_preset(doc["preset"])
        base.update({k: v for k, v in doc.items() if k != "preset"})
        doc = base
    nu = doc.get("nu")
    if not isinstance(nu, list) or not nu:
        raise ConfigError("scenario needs a nonempty 'nu' list")
    try:
        doc["nu"] = [float(v) for v in nu]
    except (TypeError, ValueError):
        raise ConfigError("'nu' entries must be numbers") from None
    if "profile" not in doc and "profiles" not in doc:
        raise ConfigError("scenario needs 'profile' or 'profiles'")
    doc.setdefault("name", "scenario")
    return doc


def build_profile(entry):
    if not isinstance(entry, dict):
        raise ConfigError("profile must be an object")
    if "preset" in entry:
        return profile_preset(entry["preset"])[0]
    fam = entry.get("family")
    if fam == "zero":
        return GrowthProfile.zero()
    if fam == "power":
        if "k" not in entry:
            raise ConfigError("power profile needs 'k'")
        return GrowthProfile.power(float(entry["k"]), C=float(entry.get("C", 1.0)))
    if fam == "logpos":
        return GrowthProfile.logpos(C=float(entry.get("C", 1.0)))
    if fam == "logneg":
        return GrowthProfile.logneg()
    if fam == "custom":
        c = float(entry.get("coefficient", 1.0))
        a = float(entry.get("exponent", 1.0))
        sign = entry.get("sign", "nonnegative")
        s = -1.0 if sign == "nonpositive" else 1.0
        return GrowthProfile.custom(lambda t, v: s * c * np.power(np.maximum(v, 0.0), a), sign=sign)
    raise UnknownFamily(f"unknown profile family {fam!r}")


def profile_label(phi):
    if phi.family == "power":
        return f"power_k{phi.k:g}"
    return phi.family


def build_profiles(doc):
    specs = doc.get("profiles") or [doc["profile"]]
    return [(profile_label(p), p) for p in map(build_profile, specs)]


def build_ellipticity(doc):
    e = doc.get("ellipticity", {})
    return Ellipticity(float(e.get("lam", 1.0)), float(e.get("Lam", 1.0)))


def build_geometry(doc, multiplier=1.0):
    g = doc.get("geometry")
    if g is None:
        return None
    factor = float(g.get("gamma_factor", 1.0)) * multiplier
    kappa = g.get("kappa")
    return Geometry(int(g.get("n", 2)), lambda R: factor * R, None if kappa is None else float(kappa))


def _control(tol):
    # RK45 cannot honour a relative tolerance below about 100 ulp
    if tol is None:
        return StepControl()
    return StepControl(rtol=max(tol, 1e-13), interp_tol=max(tol, 1e-12))


def _fmt(v):
    return f"{float(v):.17g}"


def write_columns(path, header, columns):
    """CSV with 17 significant digits, so values re-parse bit-identically."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating, int)) else v for v in row])


def read_columns(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], [list(col) for col in zip(*rows[1:])]


# ---------------------------------------------------------------- commands

def cmd_solve(doc, out, tol=None, multiplier=1.0):
    """Solve ``f_nu``, ``f_{nu,R}`` (when a geometry is given) and the
    primitive ``u``; one CSV per (profile, nu, variant)."""
    ell = build_ellipticity(doc)
    geom = build_geometry(doc, multiplier)
    R = float(doc.get("R", 10.0))
    control = _control(tol)
    written = []
    for label, phi in build_profiles(doc):
        for nu in doc["nu"]:
            tag = f"{label}_nu{nu:g}"
            curve = solve(OdeProblem(phi, ell, None, nu, R), control)
            path = out / f"{tag}_f_nu.csv"
            curve.to_csv(path)
            written.append(path)
            path = out / f"{tag}_u.csv"
            write_columns(path, ["x", "u", "nu"],
                          [curve.t_grid, curve.primitive(curve.t_grid), [nu] * curve.t_grid.size])
            written.append(path)
            if geom is not None:
                curve_R = solve(OdeProblem(phi, ell, geom, nu, R), control)
                path = out / f"{tag}_f_nu_R.csv"
                curve_R.to_csv(path)
                written.append(path)
    return written


def cmd_classify(doc, out, multiplier=1.0):
    ell = build_ellipticity(doc)
    n = int(doc.get("geometry", {}).get("n", 2))
    sweep = np.asarray(doc.get("R_sweep", DEFAULT_SWEEP), dtype=float)
    reports = []
    for label, phi in build_profiles(doc):
        for nu in doc["nu"]:
            rep = classify(phi, ell, nu, n=n, multiplier=multiplier, R_sweep=sweep)
            reports.append((label, rep))
    return reports


def _operator(doc, phi, ell):
    entry = dict(doc.get("operator", {"tag": "Extremal"}))
    tag = entry.pop("tag", "Extremal")
    if tag == "Extremal":
        return OperatorUnderTest.extremal(phi, ell)
    if tag == "PucciSublinear":
        return OperatorUnderTest.pucci_sublinear(**{k: float(v) for k, v in entry.items()})
    if tag == "PLaplaceLower":
        return OperatorUnderTest.p_laplace_lower(**{k: float(v) for k, v in entry.items()})
    if tag == "PxLaplace":
        px = doc.get("px", {})
        return OperatorUnderTest.px_laplace(Exponent.quadratic(float(px.get("M0", 3.0)), px.get("M", [1.0])))
    raise ConfigError(f"unknown operator tag {tag!r}")


def verify_barrier(doc, multiplier=1.0, tol=None):
    _, phi = build_profiles(doc)[0]
    ell = build_ellipticity(doc)
    geom = build_geometry(doc, multiplier)
    if geom is None:
        raise ConfigError("barrier verification needs a 'geometry'")
    field = BarrierField.build(phi, ell, geom, float(doc.get("R", 1.0)), doc["nu"][0],
                               control=_control(tol))
    s = doc.get("sampling", {})
    plan = SamplePlan(n_points=int(s.get("n_points", 10_000)), seed=int(s.get("seed", 0)),
                      layers=tuple(s.get("layers", (1e-3, 1e-6))))
    report = verify_supersolution(field, _operator(doc, phi, ell), plan)
    return report.to_dict(), report.passed


def verify_px_sharp(doc, tol=None, n_points=64, seed=0):
    """``u = c x_n`` with a quadratic exponent: analytic operator and a
    finite-difference evaluation of the divergence form."""
    px = doc.get("px")
    if px is None:
        raise ConfigError("px-sharp verification needs a 'px' block")
    c, M0, M = float(px.get("c", 1.0)), float(px["M0"]), list(px.get("M", []))
    expo = Exponent.quadratic(M0, M)
    n = expo.n
    tol = 1e-8 if tol is None else tol
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, (n_points, n))
    x[:, -1] = rng.uniform(0.05, 2.0, n_points)
    grad = np.zeros((n_points, n))
    grad[:, -1] = c
    analytic = np.abs(px_operator(expo, x, grad, np.zeros((n_points, n, n))))

    def u(y):
        return c * y[-1]

    fd = np.array([abs(divergence_residual(expo, u, xi)) for xi in x])
    ok = bool(analytic.max() == 0.0 and fd.max() <= tol)
    return {"target": "px-sharp", "c": c, "M0": M0, "M": M, "n_points": n_points,
            "max_analytic": float(analytic.max()), "max_fd_residual": float(fd.max()),
            "tolerance": tol, "pass": ok}, ok


def verify_one_d(doc, tol=None):
    entry = dict(doc.get("one_d", {"family": "Sista2"}))
    family = entry.pop("family", "Sista2")
    reports = []
    for nu in doc["nu"]:
        kw = {} if tol is None else {"tol": tol}
        reports.append(verify_1d_solution(family, dict(entry, nu=nu), **kw))
    ok = all(r.passed for r in reports)
    return {"target": "1d-solution", "reports": [r.to_dict() for r in reports], "pass": ok}, ok


def cmd_verify(doc, target, multiplier=1.0, tol=None):
    if target == "barrier":
        return verify_barrier(doc, multiplier, tol)
    if target == "px-sharp":
        return verify_px_sharp(doc, tol)
    if target == "1d-solution":
        return verify_one_d(doc, tol)
    raise ConfigError(f"unknown verify target {target!r}; expected one of {TARGETS}")


def _figure_fig2(doc, x):
    ell = build_ellipticity(doc)
    cols_f, cols_u, head = [], [], []
    nu = doc["nu"][0]
    for label, phi in build_profiles(doc):
        a = float(ell.A(phi.C)(0.0))
        head.append(f"k={phi.k:g}")
        cols_f.append(cf.f_power(x, phi.k, a, nu))
        cols_u.append(cf.u_power(x, phi.k, a, nu))
    return {"f": (head, cols_f), "u": (head, cols_u)}


def _figure_fig3(doc, x):
    ell = build_ellipticity(doc)
    panels = {}
    for label, phi in build_profiles(doc):
        head, cols_f, cols_u = [], [], []
        for nu in doc["nu"]:
            head.append(f"nu={nu:g}")
            if phi.family == "logpos":
                A = float(ell.A(phi.C)(0.0))
                cols_f.append(cf.f_logpos(x, A, nu))
                cols_u.append(cf.u_logpos(x, A, nu))
            elif phi.family == "logneg":
                Lam = float(ell.Lam(0.0))
                cols_f.append(cf.f_logneg(x, 1.0 / Lam, nu))
                cols_u.append(cf.u_logneg(x, Lam, nu))
            else:
                raise ConfigError("fig3 panels need logpos or logneg profiles")
        panels[f"{label}_f"] = (head, cols_f)
        panels[f"{label}_u"] = (head, cols_u)
    return panels


def _figure_fig4(doc, x):
    A = float(doc.get("one_d", {}).get("A", 1.0))
    panels = {}
    for name, fn in (("sista1", cf.u_sista1), ("sista2", cf.u_sista2)):
        head = [f"nu={nu:g}" for nu in doc["nu"]]
        panels[f"{name}_u"] = (head, [fn(x, A, nu) for nu in doc["nu"]])
    return panels


FIGURES = {"fig2": _figure_fig2, "fig3": _figure_fig3, "fig4": _figure_fig4}


def cmd_figures(doc, out):
    """Closed-form curves behind the figures, one CSV per panel."""
    fig = doc.get("figure")
    if fig not in FIGURES:
        raise ConfigError(f"scenario has no figure among {sorted(FIGURES)}")
    x = np.linspace(0.0, float(doc.get("R", 10.0)), int(doc.get("grid_points", 401)))
    written = []
    for panel, (head, cols) in FIGURES[fig](doc, x).items():
        path = out / f"{fig}_{panel}.csv"
        write_columns(path, ["x"] + head, [x] + [np.asarray(c, dtype=float) for c in cols])
        written.append(path)
    return written


# ---------------------------------------------------------------- entry

def build_parser():
    p = argparse.ArgumentParser(prog="growth", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("solve", "integrate the envelope ODE and write curves"),
                        ("classify", "growth report for each profile and nu"),
                        ("verify", "run a numerical certificate"),
                        ("figures", "write the closed-form figure curves")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--scenario", required=True, help="scenario JSON path or preset name")
        sp.add_argument("--out", default=".", help="output directory (default: current)")
        sp.add_argument("--gamma-multiplier", type=float, default=1.0,
                        help="scale factor applied to gamma(R)")
        sp.add_argument("--tol", type=float, default=None, help="solver / residual tolerance")
        if name == "verify":
            sp.add_argument("--target", choices=TARGETS, default="barrier")
    return p


def _emit_json(obj, path):
    text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=True)
    path.write_text(text + "\n")
    print(text)


def run(argv=None):
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        if not args.gamma_multiplier > 0 or not math.isfinite(args.gamma_multiplier):
            raise ConfigError("--gamma-multiplier must be positive and finite")
        if args.tol is not None and not args.tol > 0:
            raise ConfigError("--tol must be positive")
        doc = load_scenario(args.scenario)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "solve":
            for path in cmd_solve(doc, out, args.tol, args.gamma_multiplier):
                print(path)
            return EXIT_OK
        if args.command == "figures":
            for path in cmd_figures(doc, out):
                print(path)
            return EXIT_OK
        if args.command == "classify":
            reports = cmd_classify(doc, out, args.gamma_multiplier)
            payload = []
            for label, rep in reports:
                print(rep.to_table())
                print()
                payload.append(json.loads(rep.to_json()))
            (out / f"{doc['name']}_classify.json").write_text(json.dumps(payload, indent=2) + "\n")
            return EXIT_OK
        report, ok = cmd_verify(doc, args.target, args.gamma_multiplier, args.tol)
        _emit_json(report, out / f"{doc['name']}_{args.target}.json")
        return EXIT_OK if ok else EXIT_FAIL
    except UnknownFamily as exc:
        print(f"growth: {exc}", file=sys.stderr)
        return EXIT_UNKNOWN_FAMILY
    except SolverError as exc:
        print(f"growth {args.command}: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, GrowthError, ValueError, KeyError, TypeError, OSError) as exc:
        print(f"growth {args.command}: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
