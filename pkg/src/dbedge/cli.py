"""Command line: run bundled or user scenarios and verify structural invariants."""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from fractions import Fraction
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .cohomology import integral_cohomology, verify_exactness
from .complex import annulus, build_cover, circle, sample_function, sample_one_form, sphere
from .db import db_differential, random_db_cochain
from .dynamics import (QuantizationObstruction, charge_bracket, chart_functions, electric_charge,
                       eom_residuals, magnetic_charges, on_shell_state, quantization_check)
from .fields import gerbe_class, winding_number
from .wilson import _boundary_period, solve_harmonic_form

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 1, 2, 3
TWO_PI = 2 * np.pi


class ConfigError(ValueError):
    pass


def _schema() -> dict:
    return json.loads(resources.files("dbedge").joinpath("scenario.schema.json").read_text())


def bundled_scenarios() -> dict[str, Path]:
    root = resources.files("dbedge").joinpath("scenarios")
    return {Path(p.name).stem: Path(str(p)) for p in sorted(root.iterdir(), key=lambda p: p.name)
            if p.name.endswith(".json")}


def load_config(source) -> dict:
    """Parse and validate a scenario given as a dict, a path or a bundled name."""
    if isinstance(source, dict):
        cfg = source
    else:
        path = Path(source)
        if not path.exists():
            named = bundled_scenarios()
            if str(source) not in named:
                raise ConfigError(f"no scenario file or bundled scenario named {source!r}")
            path = named[str(source)]
        try:
            cfg = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    validator = jsonschema.Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = "/" + "/".join(str(p) for p in err.absolute_path)
        raise ConfigError(f"config error at {where}: {err.message}")
    m = cfg["manifold"]
    if m.get("r_inner", 1.0) >= m.get("r_outer", 2.0):
        raise ConfigError("config error at /manifold: r_inner must be below r_outer")
    return cfg


def _fourier(spec: dict | None):
    spec = spec or {}
    c0 = float(spec.get("constant", 0.0))
    a = [float(v) for v in spec.get("cos", [])]
    b = [float(v) for v in spec.get("sin", [])]

    def f(theta):
        theta = np.asarray(theta, dtype=float)
        out = np.full_like(theta, c0)
        for m, v in enumerate(a, 1):
            out = out + v * np.cos(m * theta)
        for m, v in enumerate(b, 1):
            out = out + v * np.sin(m * theta)
        return out

    return f, (c0, a, b)


def bracket_oracle(k: int, alpha: dict | None, alpha_t: dict | None, winding: int) -> float:
    """Closed form of ``−(k/2π) ∫ α dα̃`` for Fourier data plus a winding term."""
    _, (c0, a, b) = _fourier(alpha)
    _, (_, at, bt) = _fourier(alpha_t)
    total = 2 * np.pi * c0 * winding
    for m in range(1, max(len(a), len(b), len(at), len(bt)) + 1):
        get = lambda xs: xs[m - 1] if m <= len(xs) else 0.0
        total += np.pi * m * (get(a) * get(bt) - get(b) * get(at))
    return -k / TWO_PI * total + 0.0


def _tag(value, mode: str, tol=None) -> dict:
    if isinstance(value, Fraction):
        value = int(value) if value.denominator == 1 else str(value)
    elif isinstance(value, (np.floating, float)):
        value = float(value)
    elif isinstance(value, (np.integer,)):
        value = int(value)
    return {"value": value, "mode": mode, "tol": tol}


def _fit_order(hs, errs) -> float | None:
    pts = [(np.log(h), np.log(e)) for h, e in zip(hs, errs) if e > 0]
    if len(pts) < 2:
        return None
    x, y = np.array(pts).T
    return float(np.polyfit(x, y, 1)[0])


def _doubling_check(cover, rng, samples: int = 5) -> bool:
    for k in range(3):
        for l in range(-1, k + 1):
            for _ in range(samples):
                x = random_db_cochain(cover, k, l, rng)
                if not db_differential(k, l + 1, db_differential(k, l, x)).is_zero():
                    return False
    return True


def run_scenario(config, refine=None, tolerance: float | None = None,
                 exact_only: bool = False) -> tuple[dict, dict, dict]:
    """Build, solve, verify and measure one scenario.

    Returns ``(report, series, timings)``.  The report is deterministic for a
    fixed config; wall-clock timings are kept apart from it.
    """
    cfg = load_config(config)
    levels = list(refine) if refine is not None else list(cfg["refine"])
    tol = dict(cfg.get("tolerances", {}))
    if tolerance is not None:
        tol["numeric"] = tolerance
    num_tol = float(tol.get("numeric", 1e-8))
    rel_tol = float(tol.get("bracket_rel", 0.01))
    rng = np.random.default_rng(cfg.get("seed", 0))
    timings: dict = {}
    clock = time.perf_counter()

    def lap(name):
        nonlocal clock
        now = time.perf_counter()
        timings[name] = now - clock
        clock = now

    man = cfg["manifold"]
    r_in, r_out = man.get("r_inner", 1.0), man.get("r_outer", 2.0)
    cpl = cfg["couplings"]
    k, p, n = cpl["k"], cpl["p"], cpl["n"]
    e2 = float(cpl.get("e2", 1.0))
    flds = cfg.get("fields", {})
    invariants: dict[str, bool] = {}
    numeric_checks: dict[str, bool] = {}
    series: dict[str, list] = {}

    ann = annulus(man["n_r"], man["n_theta"], r_in, r_out)
    cover, nerve = build_cover(ann, cfg["charts"])
    coh = {f"H{d}": integral_cohomology(nerve, d).to_json() for d in range(nerve.dim + 1)}
    h1 = integral_cohomology(nerve, 1)
    invariants["nerve_H1_is_Z"] = h1.free_rank == 1 and not h1.torsion
    invariants["DD_zero"] = _doubling_check(cover, rng)
    lap("complex")
    report: dict = {
        "scenario": cfg["name"],
        "config": cfg,
        "levels": levels,
        "cohomology": {"annulus_cover": coh},
    }

    check = quantization_check(k, p, n)
    report["quantization"] = {key: _tag(v, "exact") for key, v in check.to_json().items()}

    omega = solve_harmonic_form(ann, n)
    period = _boundary_period(omega.cochain, "inner")
    invariants["wilson_closed"] = bool(omega.diagnostics["closure_exact"])
    invariants["wilson_period"] = period == n
    wilson = {
        "period_turns": _tag(period, "exact"),
        "period_outer_turns": _tag(_boundary_period(omega.cochain, "outer"), "exact"),
    }
    if not exact_only:
        for key in ("coclosure", "tangentiality", "discrete_coclosure"):
            wilson[key] = _tag(omega.diagnostics[key], "numeric")
        rows = []
        for lev in levels:
            cpx = annulus(man["n_r"] << lev, man["n_theta"] << lev, r_in, r_out)
            d = solve_harmonic_form(cpx, n).diagnostics
            rows.append({"h": d["h"], "value": d["coclosure"], "error": None})
        series["wilson_coclosure"] = rows
    report["wilson"] = wilson
    lap("wilson")

    status = "ok"
    if not check.feasible:
        status = "infeasible"
        report["obstruction"] = {
            "message": str(QuantizationObstruction(check)),
            "required_winding": _tag(check.winding, "exact"),
        }
    else:
        dressed_f, _ = _fourier(flds.get("dressed"))
        a = sample_one_form(ann, lambda x: (dressed_f(np.arctan2(x[:, 1], x[:, 0]))[:, None]
                                           * np.stack([-x[:, 1], x[:, 0]], 1) / np.sum(x * x, 1)[:, None]))
        state = on_shell_state(k, p, n, omega, cover, a=a, e2=e2)
        eom = eom_residuals(state)
        gc = gerbe_class(state.dual_edge_mode)
        w = winding_number(state.dual_edge_mode)
        invariants["winding_matches"] = Fraction(w) == check.winding
        invariants["eom_omega_exact"] = eom.eom_omega == 0.0
        report["gerbe"] = {
            "class": _tag(list(gc.coordinates), "exact"),
            "trivial": _tag(bool(gc.trivial), "exact"),
            "jumps": _tag([int(v) for v in state.dual_edge_mode.jumps], "exact"),
            "winding": _tag(w, "exact"),
        }
        report["eom"] = {key: _tag(v, "numeric", num_tol) for key, v in eom.to_json().items()
                         if not isinstance(v, bool) and key not in ("winding", "required_winding")}
        numeric_checks["eom"] = eom.max_residual <= num_tol
        lap("dynamics")

        if not exact_only:
            alpha_f, _ = _fourier(flds.get("alpha"))
            at_f, _ = _fourier(flds.get("alpha_tilde"))
            wt = int(flds.get("alpha_tilde_winding", 0))
            alpha_ann = sample_function(ann, lambda x: alpha_f(np.arctan2(x[:, 1], x[:, 0])))
            qe = electric_charge(alpha_ann, state.dual_connection, k)
            sc = state.dual_edge_mode.cover
            qm = magnetic_charges(state.a_circle, chart_functions(sc, at_f, wt), k, sc)
            report["charges"] = {
                "electric": _tag(qe, "numeric", num_tol),
                "magnetic": _tag([float(v) for v in qm], "numeric", num_tol),
                "magnetic_total": _tag(float(qm.sum()), "numeric", num_tol),
                "magnetic_convention": "partition of unity over charts",
            }
            oracle = bracket_oracle(k, flds.get("alpha"), flds.get("alpha_tilde"), wt)
            rows = []
            nb = cfg["bracket"]["nodes"]
            nc = cfg["bracket"].get("charts", 4)
            for lev in levels:
                c = circle(nb << lev)
                ccov, _ = build_cover(c, nc)
                al = sample_function(c, lambda x: alpha_f(np.arctan2(x[:, 1], x[:, 0])))
                val = charge_bracket(al, chart_functions(ccov, at_f, wt), k, ccov)
                h = float(np.linalg.norm(c.coords[1] - c.coords[0]))
                rows.append({"h": h, "value": val, "error": abs(val - oracle)})
            series["bracket"] = rows
            order = _fit_order([r["h"] for r in rows], [r["error"] for r in rows])
            first = rows[0]["value"]
            ok = abs(first - oracle) <= rel_tol * max(abs(oracle), 1e-12) if oracle else abs(first) <= 1e-12
            numeric_checks["bracket"] = bool(ok)
            report["bracket"] = {
                "value": _tag(first, "numeric", rel_tol),
                "oracle": _tag(oracle, "numeric"),
                "order": _tag(order, "numeric", 0.2),
            }
            lap("charges")

    report["invariants"] = {key: bool(v) for key, v in invariants.items()}
    report["numeric_checks"] = {key: bool(v) for key, v in numeric_checks.items()}
    if not all(invariants.values()):
        status = "invariant_failure"
    report["status"] = status
    return report, series, timings


def exit_code(report: dict) -> int:
    return {"ok": EXIT_OK, "invariant_failure": EXIT_INVARIANT,
            "infeasible": EXIT_INFEASIBLE}.get(report["status"], EXIT_INVARIANT)


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    return obj


def dumps_report(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2) + "\n"


def emit_outputs(report: dict, series: dict, out_dir, timings: dict | None = None) -> list[Path]:
    """Write ``report.json``, one CSV per series and (separately) timings."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    path = out / "report.json"
    path.write_text(dumps_report(report))
    written.append(path)
    for name, rows in sorted(series.items()):
        path = out / f"{name}.csv"
        with path.open("w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["h", "value", "abs_error"])
            for r in rows:
                err = "" if r["error"] is None else repr(float(r["error"]))
                wr.writerow([repr(float(r["h"])), repr(float(r["value"])), err])
        written.append(path)
    if timings is not None:
        path = out / "timings.json"
        path.write_text(json.dumps({k: round(v, 6) for k, v in timings.items()}, indent=2) + "\n")
        written.append(path)
    return written


def verify(exact_only: bool = False, seed: int = 0) -> dict[str, bool]:
    """Structural checks on standard instances."""
    rng = np.random.default_rng(seed)
    out = {}
    c = circle(12)
    ccov, cn = build_cover(c, 3)
    s = sphere(2)
    scov, sn = build_cover(s)
    g = lambda nerve, d: integral_cohomology(nerve, d)
    out["circle_H0_Z"] = g(cn, 0).free_rank == 1 and not g(cn, 0).torsion
    out["circle_H1_Z"] = g(cn, 1).free_rank == 1 and not g(cn, 1).torsion
    out["sphere_H1_0"] = g(sn, 1).free_rank == 0 and not g(sn, 1).torsion
    out["sphere_H2_Z"] = g(sn, 2).free_rank == 1 and not g(sn, 2).torsion
    out["DD_zero"] = _doubling_check(ccov, rng)
    for name, cov in (("circle", ccov), ("sphere", scov)):
        res = verify_exactness(cov, rng)
        out[f"ses_exact_{name}"] = all(res.values())
    if not exact_only:
        om = solve_harmonic_form(annulus(2, 16), 1)
        out["wilson_period"] = abs(om.diagnostics["period_inner"] - TWO_PI) <= 1e-8
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="dbedge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario and report")
    run.add_argument("--scenario", required=True, help="scenario file or bundled name")
    run.add_argument("--refine", help="comma-separated refinement levels, e.g. 0,1,2")
    run.add_argument("--tolerance", type=float, help="numeric tolerance override")
    run.add_argument("--emit", help="output directory (default: print report)")
    run.add_argument("--exact-only", action="store_true", help="skip metric and charge computations")
    ver = sub.add_parser("verify", help="check structural invariants")
    ver.add_argument("--exact-only", action="store_true")
    ver.add_argument("--scenario", help="also run this scenario's exact invariants")
    sub.add_parser("list-scenarios", help="list bundled scenarios")
    args = parser.parse_args(argv)

    if args.command == "list-scenarios":
        for name, path in bundled_scenarios().items():
            desc = json.loads(path.read_text()).get("description", "")
            print(f"{name}\t{desc}")
        return EXIT_OK

    if args.command == "verify":
        try:
            results = verify(args.exact_only)
            if args.scenario:
                rep, _, _ = run_scenario(args.scenario, exact_only=True)
                results.update({f"scenario.{k}": v for k, v in rep["invariants"].items()})
        except ConfigError as exc:
            print(exc, file=sys.stderr)
            return EXIT_CONFIG
        for name, ok in results.items():
            print(f"{'PASS' if ok else 'FAIL'} {name}")
        return EXIT_OK if all(results.values()) else EXIT_INVARIANT

    try:
        levels = None
        if args.refine:
            try:
                levels = [int(v) for v in args.refine.split(",") if v.strip()]
            except ValueError:
                raise ConfigError(f"--refine expects comma-separated integers, got {args.refine!r}")
            if not levels or min(levels) < 0:
                raise ConfigError("--refine needs non-negative levels")
        report, series, timings = run_scenario(args.scenario, levels, args.tolerance, args.exact_only)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    if args.emit:
        try:
            for path in emit_outputs(report, series, args.emit, timings):
                print(path)
        except OSError as exc:
            print(f"cannot write outputs: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    else:
        sys.stdout.write(dumps_report(report))
    return exit_code(report)


if __name__ == "__main__":
    sys.exit(main())
