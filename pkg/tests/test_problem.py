import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from parabound.problem import (GreensBounds, ProblemSpec, builtin_test_problem,
                               load_problem, manufactured_problem, validate)


def test_builtin_constants():
    spec = builtin_test_problem()
    assert spec.greens.gamma == 0.5
    assert abs(spec.greens.kappa1 - 1.060660) < 1e-6
    assert spec.greens.kappa0 == 1.0
    assert spec.greens.kappa1_prime == 0.0
    assert (spec.x_left, spec.x_right) == (-1.0, 1.0)
    assert spec.horizon == 1.0


def test_builtin_coefficients_pointwise():
    spec = builtin_test_problem()
    assert spec.reaction(np.array([-1.0]))[0] == 1.0
    assert spec.reaction(np.array([1.0]))[0] == 11.0
    assert abs(spec.initial(np.array([-1.0]))[0]) < 1e-15
    assert abs(spec.initial(np.array([1.0]))[0]) < 1e-12
    assert abs(spec.initial(np.array([0.0]))[0] - 1.0) < 1e-15
    # f(x, 0) = 1 - cos(x)^4
    assert abs(spec.source(np.array([0.3]), 0.0)[0] - (1.0 - np.cos(0.3) ** 4)) < 1e-15


def test_builtin_passes_validation():
    assert validate(builtin_test_problem()).ok
    assert validate(manufactured_problem()).ok


def test_validation_flags_nonzero_initial_boundary():
    spec = builtin_test_problem()
    bad = ProblemSpec(x_left=-1.0, x_right=1.0, diffusion=1.0, reaction=spec.reaction,
                      source=spec.source, initial=lambda x: np.ones_like(x),
                      horizon=1.0, greens=spec.greens)
    report = validate(bad)
    assert not report.ok
    assert any("initial" in v for v in report.violations)


def test_validation_flags_negative_reaction():
    spec = builtin_test_problem()
    bad = ProblemSpec(x_left=-1.0, x_right=1.0, diffusion=1.0,
                      reaction=lambda x: -np.ones_like(x), source=spec.source,
                      initial=spec.initial, horizon=1.0, greens=spec.greens)
    report = validate(bad)
    assert not report.ok
    assert any("reaction" in v for v in report.violations)


@given(st.sampled_from(["kappa0", "kappa1", "kappa1_prime", "gamma"]),
       st.one_of(st.floats(max_value=-1e-12, allow_nan=False, allow_infinity=False),
                 st.just(math.nan), st.just(math.inf)))
def test_greens_bounds_reject_invalid(field, value):
    kwargs = {"kappa0": 1.0, "kappa1": 1.0, "kappa1_prime": 0.0, "gamma": 0.5}
    kwargs[field] = value
    with pytest.raises(ValueError):
        GreensBounds(**kwargs)


def test_load_problem_by_builtin_name():
    spec = load_problem("paper-sect4")
    assert spec.name == "paper-sect4"
    assert validate(spec).ok


def test_load_problem_from_dict_reference():
    spec = load_problem({"problem": "manufactured-decay"})
    assert spec.exact_solution is not None


def test_load_problem_from_json_file(tmp_path):
    config = {
        "name": "cosine-forced",
        "domain": [-1.0, 1.0],
        "diffusion": 1.0,
        "reaction": {"kind": "affine", "a": 5.0, "b": 6.0},
        "source": {"kind": "separable",
                   "space": {"kind": "polynomial", "coeffs": [-1.0, 0.0, 1.0]},
                   "time": {"kind": "cos", "omega": 2.0}},
        "initial": {"kind": "domain-sine", "amplitude": 0.5},
        "horizon": 1.0,
        "greens": {"kappa0": 1.0, "kappa1": 1.0606601717798212,
                   "kappa1_prime": 0.0, "gamma": 0.5},
    }
    path = tmp_path / "problem.json"
    path.write_text(json.dumps(config))
    spec = load_problem(str(path))
    assert spec.name == "cosine-forced"
    assert spec.reaction(np.array([0.0]))[0] == 6.0
    # source = (1 - x^2) * cos(2t)
    assert abs(spec.source(np.array([0.0]), 0.5)[0] - math.cos(1.0)) < 1e-15
    assert abs(spec.initial(np.array([0.0]))[0] - 0.5) < 1e-15
    assert validate(spec).ok


def test_load_problem_rejects_unknown_kind():
    with pytest.raises(ValueError):
        load_problem({
            "domain": [0.0, 1.0], "horizon": 1.0,
            "reaction": {"kind": "mystery"},
            "source": {"kind": "zero"},
            "initial": {"kind": "zero"},
            "greens": {"kappa0": 1.0, "kappa1": 0.0, "kappa1_prime": 0.0, "gamma": 0.0},
        })


def test_manufactured_solution_satisfies_equation():
    # finite-difference residual of du/dt - u'' + r u - f at interior points
    spec = manufactured_problem()
    x = np.linspace(-0.9, 0.9, 7)
    t, eps = 0.37, 1e-5
    u = lambda xx, tt: spec.exact_solution(xx, tt)
    dudt = (u(x, t + eps) - u(x, t - eps)) / (2.0 * eps)
    uxx = (u(x + eps, t) - 2.0 * u(x, t) + u(x - eps, t)) / eps ** 2
    residual = dudt - spec.diffusion * uxx + spec.reaction(x) * u(x, t) - spec.source(x, t)
    assert np.max(np.abs(residual)) < 1e-5
