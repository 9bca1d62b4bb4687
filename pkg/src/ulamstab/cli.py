"""Command-line front end: problem files in, JSON reports out.

Subcommands: ``analyze`` (classification and constants), ``empirical``
(perturbation experiments), ``corpus`` (built-in examples), and
``riccati-check`` (candidate validation).  Exit codes: 0 stable, 1 input
error, 2 inconclusive, 3 instability evidence.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import sys
import time
from importlib import resources
from pathlib import Path

import click
import jsonschema
import numpy as np

from . import __version__, dynamics, exprlang, riccati, stability
from . import corpus as corpus_mod
from .model import Config, problem_from_dict

EXIT_STABLE = 0
EXIT_INPUT_ERROR = 1
EXIT_INCONCLUSIVE = 2
EXIT_INSTABILITY = 3

_VERDICT_EXIT = {
    "stable_with_constant": EXIT_STABLE,
    "best_constant": EXIT_STABLE,
    "inconclusive": EXIT_INCONCLUSIVE,
    "instability_evidence": EXIT_INSTABILITY,
}

CONFIG_ENV = "ULAMSTAB_CONFIG"


def _schema(name):
    return json.loads(resources.files("ulamstab.schemas").joinpath(name).read_text())


def _fail(kind, detail, code=EXIT_INPUT_ERROR):
    click.echo(json.dumps({"error": {"kind": kind, "detail": str(detail)}}, sort_keys=True), err=True)
    sys.exit(code)


def _jsonable(obj):
    """Recursively coerce report payloads into JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.generic,)):
        obj = obj.item()
    if isinstance(obj, complex):
        if abs(obj.imag) <= 1e-12 * (1.0 + abs(obj.real)):
            obj = obj.real
        else:
            return {"re": _jsonable(obj.real), "im": _jsonable(obj.imag)}
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, (str, int, bool)) or obj is None:
        return obj
    return str(obj)


def _load_document(path):
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        _fail("read", exc)
    try:
        jsonschema.validate(data, _schema("problem.schema.json"))
    except jsonschema.ValidationError as exc:
        _fail("schema", exc.message)
    return data


def _build_problem(data):
    try:
        return problem_from_dict(data)
    except (exprlang.ExprError, ValueError, KeyError) as exc:
        _fail("problem", exc)


def _make_config(tolerances, tol):
    overrides = {}
    env_path = os.environ.get(CONFIG_ENV)
    if env_path:
        try:
            overrides.update(json.loads(Path(env_path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            _fail("config", f"{CONFIG_ENV}: {exc}")
    overrides.update(tolerances or {})
    if tol is not None:
        overrides["quad_tol"] = tol
        overrides["cum_tol"] = 0.1 * tol
    return Config.from_dict({**Config().to_dict(), **overrides})


def _config_hash(config: Config):
    blob = json.dumps(config.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def _parse_solve_rho(spec):
    fields = {}
    for part in spec.split(","):
        if "=" not in part:
            _fail("solve-rho", f"expected key=value, got {part!r}")
        k, v = part.split("=", 1)
        try:
            fields[k.strip()] = float(v)
        except ValueError:
            _fail("solve-rho", f"non-numeric value in {part!r}")
    if set(fields) != {"t0", "rho0"}:
        _fail("solve-rho", "expected exactly t0=..,rho0=..")
    return fields["t0"], fields["rho0"]


def _resolve_rho(problem, rho_expr, solve_rho, config):
    if solve_rho:
        t0, rho0 = _parse_solve_rho(solve_rho)
        return riccati.solve_riccati(problem, t0, rho0, config)
    if rho_expr is not None:
        return rho_expr
    _fail("rho", 'no Riccati candidate: supply "rho" in the problem file or --solve-rho t0=..,rho0=..')


def _witness_for(data):
    if data.get("witness"):
        return data["witness"]
    name = data.get("name", "")
    try:
        entry = corpus_mod.get(name)
    except KeyError:
        return None
    return entry.witness


def _escalate_instability(doc, problem, data, config):
    """Attach a witness-family probe; upgrade the verdict if it evidences growth."""
    witness = _witness_for(data)
    if witness is None:
        return
    try:
        probe = dynamics.instability_probe(problem, exprlang.parse(witness), 0.1, config)
    except (exprlang.ExprError, ValueError) as exc:
        doc["instability"] = {"error": str(exc)}
        return
    doc["instability"] = _jsonable({"witness": witness, **probe})
    if probe["growth_ok"] and probe["residual_sup"] <= probe["epsilon"] * (1.0 + 1e-6):
        doc["report"]["verdict"] = "instability_evidence"


def _report_doc(problem_data, report_dict, config, wall_time, reproducible, extra=None):
    doc = {
        "schema": "ulamstab-report/1",
        "tool": {
            "name": "ulamstab",
            "version": __version__,
            "config_hash": _config_hash(config),
            "config": config.to_dict(),
        },
        "problem": problem_data,
        "report": _jsonable(report_dict),
    }
    if extra:
        doc.update(_jsonable(extra))
    if not reproducible:
        doc["wall_time_s"] = round(wall_time, 3)
    return doc


def _emit(doc, out, stem):
    jsonschema.validate(doc, _schema("report.schema.json"))
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    click.echo(text, nl=False)
    if out:
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / f"{stem}.report.json").write_text(text)


def _fast_path_report(problem):
    grid = np.linspace(problem.domain.default_anchor() - 1.0, problem.domain.default_anchor() + 1.0, 17)
    grid = grid[[problem.domain.contains(t) for t in grid]]
    consts = []
    for which in ("alpha", "beta", "gamma"):
        vals = problem.fn(which)(grid)
        if np.max(np.abs(vals - vals[0])) > 1e-12 * (1.0 + np.max(np.abs(vals))):
            _fail("fast-path", f"{which} is not constant; the closed-form route does not apply")
        consts.append(complex(vals[0]))
    try:
        cc = stability.constant_coefficients(*consts)
    except stability.DegenerateLeadingCoefficient as exc:
        _fail("fast-path", exc)
    l1, l2 = cc["roots"].lambda1, cc["roots"].lambda2
    if l1.real > 0 and l2.real > 0:
        case = "i"
    elif l1.real > 0 > l2.real:
        case = "ii"
    elif l1.real < 0 and l2.real < 0:
        case = "iii"
    else:
        case = "none"
    constant = {}
    if cc["L"] is not None:
        constant["L"] = cc["L"]
    if cc["B"] is not None:
        constant["B"] = cc["B"]
    if case == "none" or not constant:
        verdict = "inconclusive"
    elif "B" in constant:
        verdict = "best_constant"
    else:
        verdict = "stable_with_constant"
    return {
        "case": case,
        "f_sups": {},
        "divergence": [],
        "constant": constant,
        "verdict": verdict,
        "diagnostics": {
            "fast_path": True,
            "roots": {"lambda1": l1, "lambda2": l2},
        },
    }


@click.group()
@click.version_option(__version__, prog_name="ulamstab")
def main():
    """Ulam stability analysis for second-order linear oscillators."""


@main.command()
@click.argument("problem_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--best/--no-best", default=True, help="Also certify the minimal constant.")
@click.option("--fast-path", is_flag=True, help="Closed-form route for constant coefficients.")
@click.option("--solve-rho", default=None, metavar="t0=..,rho0=..", help="Integrate the Riccati companion numerically.")
@click.option("--tol", type=float, default=None, help="Override the quadrature tolerance.")
@click.option("--reproducible", is_flag=True, help="Omit timing fields for byte-identical output.")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Directory for report artifacts.")
def analyze(problem_path, best, fast_path, solve_rho, tol, reproducible, out):
    """Classify a problem and compute its Ulam constant(s)."""
    t_start = time.perf_counter()
    data = _load_document(problem_path)
    problem, rho_expr, tolerances = _build_problem(data)
    config = _make_config(tolerances, tol)

    if fast_path:
        report_dict = _fast_path_report(problem)
    else:
        rho = _resolve_rho(problem, rho_expr, solve_rho, config)
        report_dict = stability.analyze(problem, rho, config, best=best).to_dict()

    doc = _report_doc(data, report_dict, config, time.perf_counter() - t_start, reproducible)
    if doc["report"]["verdict"] == "inconclusive":
        _escalate_instability(doc, problem, data, config)
    _emit(doc, out, Path(problem_path).stem)
    sys.exit(_VERDICT_EXIT[doc["report"]["verdict"]])


@main.command()
@click.argument("problem_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--epsilon", type=float, default=0.1, show_default=True)
@click.option("--trials", type=int, default=32, show_default=True)
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--solve-rho", default=None, metavar="t0=..,rho0=..")
@click.option("--tol", type=float, default=None)
@click.option("--reproducible", is_flag=True)
@click.option("--out", type=click.Path(file_okay=False), default=None)
def empirical(problem_path, epsilon, trials, seed, solve_rho, tol, reproducible, out):
    """Extremal and randomized perturbation experiments."""
    if not epsilon > 0:
        _fail("epsilon", "epsilon must be positive")
    t_start = time.perf_counter()
    data = _load_document(problem_path)
    problem, rho_expr, tolerances = _build_problem(data)
    config = _make_config(tolerances, tol)
    rho = _resolve_rho(problem, rho_expr, solve_rho, config)

    report = stability.analyze(problem, rho, config, best=True)
    doc_report = report.to_dict()
    if report.case == "none":
        doc = _report_doc(data, doc_report, config, time.perf_counter() - t_start, reproducible)
        _escalate_instability(doc, problem, data, config)
        _emit(doc, out, Path(problem_path).stem)
        sys.exit(_VERDICT_EXIT[doc["report"]["verdict"]])

    bound = report.constant.get("B", report.constant.get("L"))
    engine = dynamics.SolutionEngine(problem, rho, config)
    extremal = dynamics.extremal_experiment(problem, rho, report.case, epsilon, config, engine=engine)
    try:
        max_ratio, records = dynamics.random_perturbation_test(
            problem, rho, report.case, epsilon, trials, seed, bound, config, engine=engine
        )
    except dynamics.RatioExceedsConstant as exc:
        _fail("dominance", exc, code=EXIT_INCONCLUSIVE)

    experiments = {
        "extremal": extremal.to_dict(),
        "random": {
            "trials": trials,
            "seed": seed,
            "epsilon": epsilon,
            "max_ratio": max_ratio,
            "records": records,
        },
    }
    doc = _report_doc(
        data, doc_report, config, time.perf_counter() - t_start, reproducible, extra={"experiments": experiments}
    )
    _emit(doc, out, Path(problem_path).stem)

    grid, dist = dynamics.extremal_profile(problem, rho, report.case, epsilon, config, engine=engine)
    csv_dir = Path(out) if out else Path(".")
    csv_dir.mkdir(parents=True, exist_ok=True)
    csv_path = csv_dir / f"{Path(problem_path).stem}.extremal.csv"
    with csv_path.open("w") as fh:
        fh.write("t,value\n")
        for t, v in zip(grid, dist):
            fh.write(f"{float(t)!r},{float(v)!r}\n")
    sys.exit(_VERDICT_EXIT[doc["report"]["verdict"]])


@main.command("riccati-check")
@click.argument("problem_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--solve-rho", default=None, metavar="t0=..,rho0=..")
@click.option("--tol", type=float, default=None)
def riccati_check(problem_path, solve_rho, tol):
    """Validate the Riccati candidate: residual and usable coverage."""
    data = _load_document(problem_path)
    problem, rho_expr, tolerances = _build_problem(data)
    config = _make_config(tolerances, tol)
    rho = _resolve_rho(problem, rho_expr, solve_rho, config)
    resid = riccati.residual_sup(problem, rho, config)
    cov = riccati.rho_coverage(problem, rho, config)
    ok = resid <= config.residual_tol
    click.echo(
        json.dumps(
            _jsonable(
                {
                    "residual_sup": resid,
                    "tolerance": config.residual_tol,
                    "ok": ok,
                    "coverage": {"lo": cov.lo, "hi": cov.hi, "full": cov.full, "detail": cov.detail},
                }
            ),
            indent=2,
            sort_keys=True,
        )
    )
    sys.exit(EXIT_STABLE if ok else EXIT_INCONCLUSIVE)


@main.group()
def corpus():
    """Built-in example problems with analytic targets."""


@corpus.command("list")
def corpus_list():
    """Show the corpus entries and their targets."""
    for entry in corpus_mod.entries():
        v = entry.default
        target = f"B={v.expected_B:.6g}" if v.expected_B is not None else "unstable"
        click.echo(f"{entry.name:10s} {target:14s} case={v.expected_case:4s} {entry.description}")


@corpus.command("run")
@click.option("--default-only", is_flag=True, help="Skip the parameter sweeps.")
@click.option("--tol", type=float, default=None)
def corpus_run(default_only, tol):
    """Run every corpus problem and compare against the analytic targets."""
    config = _make_config({}, tol)
    failures = 0
    for result in corpus_mod.run_all(config, default_only=default_only):
        status = "PASS" if result["passed"] else "FAIL"
        failures += 0 if result["passed"] else 1
        d = result["detail"]
        if "B" in d:
            rel = d.get("rel_error")
            info = f"B={d['B']:.10g} target={d['expected_B']:.10g} rel={rel:.2e}" if rel is not None else "no constant"
        else:
            info = f"residual={d['residual_sup']:.3e} growth_ok={d['growth_ok']}"
        click.echo(f"{status} {result['name']:10s} {result['label']:22s} {info}")
    if failures:
        click.echo(f"{failures} corpus check(s) failed", err=True)
        sys.exit(EXIT_INCONCLUSIVE)
    click.echo("all corpus checks passed")


if __name__ == "__main__":
    main()
