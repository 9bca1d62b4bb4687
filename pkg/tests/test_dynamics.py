"""Solution representation and perturbation experiments."""

import math

import numpy as np
import pytest

from conftest import make_problem
from ulamstab import dynamics, exprlang
from ulamstab.dynamics import (
    CoverageExceeded,
    IvpData,
    RatioExceedsConstant,
    SolutionEngine,
    SolutionFamilyParams,
)


@pytest.fixture(scope="module")
def eng01(exeq01, cfg):
    p, r = exeq01
    return SolutionEngine(p, r, cfg)


@pytest.fixture(scope="module")
def eng03(exeq03, cfg):
    p, r = exeq03
    return SolutionEngine(p, r, cfg)


def test_representation_matches_closed_form(eng01):
    # x(t) = 2 - 1/(4t) - t solves the IVP x(1/2)=1, x'(1/2)=0
    x = eng01.representation(IvpData(0.5, 1.0, 0.0))
    ts = np.linspace(0.1, 0.9, 33)
    assert np.max(np.abs(x(ts) - (2.0 - 1.0 / (4.0 * ts) - ts))) < 1e-9


def test_zero_ivp_gives_zero(eng01):
    z = eng01.representation(IvpData(0.5, 0.0, 0.0))
    assert np.max(np.abs(z(np.linspace(0.1, 0.9, 17)))) == 0.0


def test_representation_vs_rk_oracle(exeq03, eng03):
    p, _ = exeq03
    ivp = IvpData(0.5, 0.3, -0.2)
    x = eng03.representation(ivp, forcing_key="problem")
    ts = np.linspace(0.05, 0.95, 41)
    oracle = dynamics.ivp_solution(p, ivp, ts)
    assert np.max(np.abs(x(ts) - oracle)) < 1e-6


def test_homogeneous_member_solves_equation(exeq03, eng03):
    # w(t0)=d2, w'(t0)=d1 + rho(t0) d2; compare against direct integration
    d1, d2 = 0.7, -0.3
    w = eng03.homogeneous(0.5, SolutionFamilyParams(d1, d2))
    rho0 = -1.0 / 0.5
    ivp = IvpData(0.5, d2, d1 + rho0 * d2)
    p, _ = exeq03
    ts = np.linspace(0.05, 0.95, 41)
    zero = lambda s: np.zeros_like(np.asarray(s, float))
    oracle = dynamics.ivp_solution(p, ivp, ts, forcing=zero)
    assert np.max(np.abs(w(ts) - oracle)) < 1e-6


def test_coverage_exceeded(eng01):
    x = eng01.representation(IvpData(0.5, 1.0, 0.0))
    with pytest.raises(CoverageExceeded):
        x(np.array([1.5]))


def test_extremal_reproduces_best_constant(exeq01, eng01, cfg):
    p, r = exeq01
    exp = dynamics.extremal_experiment(p, r, "iii", 0.1, cfg, engine=eng01)
    assert exp.ratio == pytest.approx(0.5, rel=1e-3)


def test_extremal_linear_in_epsilon(exeq01, eng01, cfg):
    p, r = exeq01
    e1 = dynamics.extremal_experiment(p, r, "iii", 0.05, cfg, engine=eng01)
    e2 = dynamics.extremal_experiment(p, r, "iii", 0.2, cfg, engine=eng01)
    assert e2.sup_distance == pytest.approx(4.0 * e1.sup_distance, rel=1e-6)
    assert e2.ratio == pytest.approx(e1.ratio, rel=1e-6)


def test_epsilon_must_be_positive(exeq01, cfg):
    p, r = exeq01
    with pytest.raises(ValueError):
        dynamics.extremal_experiment(p, r, "iii", 0.0, cfg)
    with pytest.raises(ValueError):
        dynamics.random_perturbation_test(p, r, "iii", -1.0, 4, 7, 0.5, cfg)


def test_random_trials_stay_under_constant(exeq01, eng01, cfg):
    p, r = exeq01
    max_ratio, records = dynamics.random_perturbation_test(p, r, "iii", 0.1, 4, 11, 0.5, cfg, engine=eng01)
    assert len(records) == 4
    assert 0.0 < max_ratio <= 0.5 * 1.02
    assert all(rec["ratio"] <= 0.5 * 1.02 for rec in records)


def test_random_trials_are_seed_deterministic(exeq01, eng01, cfg):
    p, r = exeq01
    a, _ = dynamics.random_perturbation_test(p, r, "iii", 0.1, 3, 5, 0.5, cfg, engine=eng01)
    b, _ = dynamics.random_perturbation_test(p, r, "iii", 0.1, 3, 5, 0.5, cfg, engine=eng01)
    assert a == b


def test_ratio_exceeds_constant_raises(exeq01, eng01, cfg):
    p, r = exeq01
    with pytest.raises(RatioExceedsConstant):
        dynamics.random_perturbation_test(p, r, "iii", 0.1, 4, 7, 1e-6, cfg, engine=eng01)


def test_nearest_solution_recovers_member(exeq01, eng01, cfg):
    p, r = exeq01
    member = eng01.homogeneous(0.5, SolutionFamilyParams(0.4, 0.9))
    out = dynamics.nearest_solution(member, p, r, cfg, engine=eng01)
    assert out["sup_distance"] < 1e-8


def test_instability_probe_exeq02(cfg):
    p = make_problem("1", "2/t", "0", "-1", 1.0, math.inf, name="exeq02")
    out = dynamics.instability_probe(p, exprlang.parse("(eps - 1)*t^2/6"), 0.1, cfg)
    assert out["residual_sup"] == pytest.approx(0.1, rel=1e-9)
    assert out["growth_ok"]
    dists = [rec["sup_distance"] for rec in out["trace"]]
    assert dists[1] >= 10.0 * dists[0] and dists[2] >= 10.0 * dists[1]


def test_instability_probe_exeq05(cfg):
    p = make_problem("1", "2/t", "1", "0", 0.0, math.inf, name="exeq05")
    wit = exprlang.parse("eps/(8*t)*(cos(t) + 2*t*sin(t) - 2*t^2*cos(t))")
    out = dynamics.instability_probe(p, wit, 0.1, cfg)
    assert out["residual_sup"] <= 0.1 * (1.0 + 1e-4)
    assert out["growth_ok"]
