"""Domain objects shared by all modules.

Intervals with extended-real endpoints, oscillator problems, Riccati
solutions, characteristic roots, stability reports, and the tolerance
configuration.  All types are immutable after construction and safe to
share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from . import exprlang
from .quad import graded_grid

__all__ = [
    "Endpoint",
    "Interval",
    "OscillatorProblem",
    "RiccatiSolution",
    "CharacteristicRoots",
    "StabilityReport",
    "Config",
    "validate_problem",
    "problem_from_dict",
    "problem_to_dict",
]


@dataclass(frozen=True)
class Endpoint:
    value: float  # may be +-inf
    included: bool = False

    def __post_init__(self):
        if math.isinf(self.value) and self.included:
            raise ValueError("infinite endpoints cannot be included")

    @property
    def finite(self):
        return math.isfinite(self.value)


@dataclass(frozen=True)
class Interval:
    lower: Endpoint
    upper: Endpoint

    def __post_init__(self):
        if not self.lower.value < self.upper.value:
            raise ValueError("interval requires lower < upper")

    @classmethod
    def open(cls, lo, hi):
        return cls(Endpoint(float(lo)), Endpoint(float(hi)))

    @property
    def tau(self):
        return self.lower.value

    @property
    def sigma(self):
        return self.upper.value

    def default_anchor(self):
        """Deterministic interior reference point.

        Midpoint for finite intervals, one unit inside a single infinite
        endpoint, zero for the whole real line.
        """
        lo, hi = self.tau, self.sigma
        if math.isfinite(lo) and math.isfinite(hi):
            return 0.5 * (lo + hi)
        if math.isfinite(lo):
            return lo + 1.0
        if math.isfinite(hi):
            return hi - 1.0
        return 0.0

    def contains(self, t):
        lo_ok = t > self.tau or (self.lower.included and t == self.tau)
        hi_ok = t < self.sigma or (self.upper.included and t == self.sigma)
        return lo_ok and hi_ok


@dataclass(frozen=True)
class OscillatorProblem:
    """alpha x'' + beta x' + gamma x = forcing on the interval."""

    alpha: exprlang.Expr
    beta: exprlang.Expr
    gamma: exprlang.Expr
    forcing: exprlang.Expr
    domain: Interval
    params: dict = field(default_factory=dict)
    name: str = ""

    def fn(self, which):
        expr = getattr(self, which)
        return exprlang.compile_expr(expr, self.params)


@dataclass
class RiccatiSolution:
    """A candidate solution rho of alpha(rho' + rho^2) + beta rho + gamma = 0."""

    rho: object  # exprlang.Expr or riccati.NumericSolution
    source: str = "analytic"  # "analytic" | "numeric"
    residual_sup: float | None = None


@dataclass(frozen=True)
class CharacteristicRoots:
    lambda1: complex
    lambda2: complex
    a0: complex
    a1: complex
    a2: complex


@dataclass
class StabilityReport:
    case: str = "none"  # "i" | "ii" | "iii" | "none"
    f_sups: dict = field(default_factory=dict)
    divergence: list = field(default_factory=list)
    constant: dict = field(default_factory=dict)  # {"L": float} and/or {"B": float}
    verdict: str = "inconclusive"
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "case": self.case,
            "f_sups": self.f_sups,
            "divergence": self.divergence,
            "constant": self.constant,
            "verdict": self.verdict,
            "diagnostics": self.diagnostics,
        }


@dataclass(frozen=True)
class Config:
    """Numerical knobs; defaults sized for 1e-4-relative final constants."""

    quad_tol: float = 1e-9
    cum_tol: float = 1e-10
    residual_tol: float = 1e-6
    reality_tol: float = 1e-12
    log_budget: float = 300.0
    range_cap: float = 1e8
    divergence_threshold: float = 1e6
    divergence_points: int = 24
    tail_k: int = 8
    sup_scan: int = 257
    nested_scan: int = 129
    probe_points: int = 1024

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)


# ---------------------------------------------------------------------------
# validation


def probe_grid(interval: Interval, n=1024, range_cap=1e8):
    """Interior probe points, geometrically graded toward hard endpoints."""
    lo = interval.tau if interval.lower.finite else -range_cap
    hi = interval.sigma if interval.upper.finite else range_cap
    return graded_grid(lo, hi, n, include_lo=interval.lower.included, include_hi=interval.upper.included)


def validate_problem(p: OscillatorProblem, config: Config = Config()):
    """Check the standing hypotheses on a probe grid; violations are data."""
    violations = []
    try:
        grid = probe_grid(p.domain, config.probe_points, config.range_cap)
    except ValueError as exc:
        return [{"kind": "domain", "detail": str(exc)}]
    for which in ("alpha", "beta", "gamma", "forcing"):
        try:
            fn = p.fn(which)
        except exprlang.ExprError as exc:
            violations.append({"kind": "expression", "which": which, "detail": str(exc)})
            continue
        with np.errstate(all="ignore"):
            vals = fn(grid)
        bad = ~(np.isfinite(vals.real) & np.isfinite(vals.imag))
        if np.any(bad):
            violations.append(
                {
                    "kind": "evaluation",
                    "which": which,
                    "detail": f"non-finite at {int(np.sum(bad))} probe points",
                    "first_t": float(grid[bad][0]),
                }
            )
        if which == "alpha":
            tiny = np.abs(vals) < 1e-300
            sign_flip = False
            if np.all(np.abs(vals.imag) < 1e-12 * (1 + np.abs(vals.real))):
                re = vals.real[np.isfinite(vals.real)]
                sign_flip = re.size > 1 and (np.min(np.sign(re)) < np.max(np.sign(re)))
            if np.any(tiny) or sign_flip:
                t_bad = float(grid[tiny][0]) if np.any(tiny) else None
                violations.append(
                    {
                        "kind": "alpha_zero",
                        "which": "alpha",
                        "detail": "alpha vanishes or changes sign on the probe grid",
                        "first_t": t_bad,
                    }
                )
    return violations


# ---------------------------------------------------------------------------
# JSON mapping (schema lives in ulamstab/schemas/problem.schema.json)


def _endpoint_from_json(value, closed):
    if value == "-inf":
        v = -math.inf
    elif value == "inf":
        v = math.inf
    else:
        v = float(value)
    return Endpoint(v, bool(closed))


def _endpoint_to_json(e: Endpoint):
    if e.value == -math.inf:
        return "-inf"
    if e.value == math.inf:
        return "inf"
    return e.value


def problem_from_dict(d: dict) -> tuple[OscillatorProblem, exprlang.Expr | None, dict]:
    """Build (problem, optional rho expression, tolerances) from JSON data."""
    params = {k: float(v) for k, v in d.get("params", {}).items()}
    iv = d["interval"]
    domain = Interval(
        _endpoint_from_json(iv["lower"], iv.get("lower_closed", False)),
        _endpoint_from_json(iv["upper"], iv.get("upper_closed", False)),
    )
    problem = OscillatorProblem(
        alpha=exprlang.parse(d["alpha"]),
        beta=exprlang.parse(d["beta"]),
        gamma=exprlang.parse(d["gamma"]),
        forcing=exprlang.parse(d.get("forcing", "0")),
        domain=domain,
        params=params,
        name=d.get("name", ""),
    )
    rho = exprlang.parse(d["rho"]) if d.get("rho") else None
    return problem, rho, d.get("tolerances", {})


def problem_to_dict(p: OscillatorProblem, rho=None) -> dict:
    out = {
        "alpha": exprlang.to_string(p.alpha),
        "beta": exprlang.to_string(p.beta),
        "gamma": exprlang.to_string(p.gamma),
        "forcing": exprlang.to_string(p.forcing),
        "interval": {
            "lower": _endpoint_to_json(p.domain.lower),
            "upper": _endpoint_to_json(p.domain.upper),
            "lower_closed": p.domain.lower.included,
            "upper_closed": p.domain.upper.included,
        },
        "params": dict(p.params),
    }
    if p.name:
        out["name"] = p.name
    if rho is not None:
        out["rho"] = exprlang.to_string(rho)
    return out
