"""Continuous problem data for 1D linear parabolic initial-boundary-value problems.

A problem instance holds everything the solver and the error bound consume:

    du/dt - eps*u'' + r(x)*u = f(x, t)   on (x_left, x_right) x (0, T],
    u = 0 on the boundary,  u(., 0) = u0,

together with the Green's-function bound constants (kappa0, kappa1,
kappa1_prime, gamma) of the parabolic operator.  Those constants are inputs
taken from the literature for the operator at hand; nothing here tries to
compute them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True)
class GreensBounds:
    """Constants bounding the parabolic Green's function.

    ||G(t)||_1 <= kappa0 * exp(-gamma*t) and
    ||dG/dt(t)||_1 <= (kappa1/t + kappa1_prime) * exp(-gamma*t).
    """

    kappa0: float
    kappa1: float
    kappa1_prime: float
    gamma: float

    def __post_init__(self):
        for name in ("kappa0", "kappa1", "kappa1_prime", "gamma"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0.0:
                raise ValueError(f"GreensBounds.{name} must be finite and non-negative, got {value!r}")


@dataclass(frozen=True)
class ProblemSpec:
    """Immutable description of one parabolic problem instance.

    Coefficient callables must be pure and accept numpy arrays.  `source` is
    f(x, t) with vectorized x and scalar t.  `exact_solution`, when present,
    is a closed-form u(x, t) used by manufactured-solution runs.
    """

    x_left: float
    x_right: float
    diffusion: float
    reaction: Callable
    source: Callable
    initial: Callable
    horizon: float
    greens: GreensBounds
    name: str = "custom"
    exact_solution: Optional[Callable] = None

    def __post_init__(self):
        if not self.x_left < self.x_right:
            raise ValueError("domain endpoints must satisfy x_left < x_right")
        if not self.diffusion > 0.0:
            raise ValueError("diffusion coefficient must be positive")
        if not self.horizon > 0.0:
            raise ValueError("time horizon must be positive")

    @property
    def length(self) -> float:
        return self.x_right - self.x_left


@dataclass
class ValidationReport:
    ok: bool
    violations: list = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok


def validate(spec: ProblemSpec, n_samples: int = 1001) -> ValidationReport:
    """Check the problem invariants on a sampling grid.

    Non-fatal: returns a report naming the first offending location per rule
    instead of raising, so callers can decide how to proceed.
    """
    violations = []
    x = np.linspace(spec.x_left, spec.x_right, max(n_samples, 3))

    u0 = np.asarray(spec.initial(x), dtype=float)
    for endpoint, value in ((spec.x_left, u0[0]), (spec.x_right, u0[-1])):
        if abs(value) > 1e-12:
            violations.append(
                f"initial data must vanish on the boundary: u0({endpoint:g}) = {value:.3e}")

    r = np.asarray(spec.reaction(x), dtype=float)
    if np.any(r < 0.0):
        where = x[int(np.argmin(r))]
        violations.append(
            f"reaction coefficient must be non-negative: r({where:g}) = {r.min():.3e}")

    return ValidationReport(ok=not violations, violations=violations)


def _sect4_source(x, t):
    return np.exp(-4.0 * t) - np.cos(x + t) ** 4


def _sect4_initial(x):
    return np.sin(np.pi * (1.0 + np.asarray(x)) / 2.0)


def builtin_test_problem() -> ProblemSpec:
    """Reaction-diffusion benchmark on (-1, 1) with known Green's constants.

    du/dt - u'' + (5x+6) u = exp(-4t) - cos(x+t)^4, u0 = sin(pi(1+x)/2), T = 1.
    The Green's function of this operator satisfies ||G(t)||_1 <= e^{-t/2} and
    ||dG/dt(t)||_1 <= (3/2^{3/2}) e^{-t/2} / t.
    """
    return ProblemSpec(
        x_left=-1.0,
        x_right=1.0,
        diffusion=1.0,
        reaction=lambda x: 5.0 * np.asarray(x) + 6.0,
        source=_sect4_source,
        initial=_sect4_initial,
        horizon=1.0,
        greens=GreensBounds(kappa0=1.0, kappa1=3.0 / 2.0 ** 1.5, kappa1_prime=0.0, gamma=0.5),
        name="paper-sect4",
    )


def manufactured_problem() -> ProblemSpec:
    """Problem with the closed-form solution u = exp(-t) sin(pi(1+x)/2).

    Same operator as the built-in benchmark (so the same Green's constants
    apply); the source is matched to the chosen solution.
    """
    quarter_pi_sq = (np.pi / 2.0) ** 2

    def exact(x, t):
        return np.exp(-t) * np.sin(np.pi * (1.0 + np.asarray(x)) / 2.0)

    def source(x, t):
        x = np.asarray(x)
        return (quarter_pi_sq - 1.0 + 5.0 * x + 6.0) * np.exp(-t) * np.sin(np.pi * (1.0 + x) / 2.0)

    return ProblemSpec(
        x_left=-1.0,
        x_right=1.0,
        diffusion=1.0,
        reaction=lambda x: 5.0 * np.asarray(x) + 6.0,
        source=source,
        initial=lambda x: exact(x, 0.0),
        horizon=1.0,
        greens=GreensBounds(kappa0=1.0, kappa1=3.0 / 2.0 ** 1.5, kappa1_prime=0.0, gamma=0.5),
        name="manufactured-decay",
        exact_solution=exact,
    )


BUILTIN_PROBLEMS = {
    "paper-sect4": builtin_test_problem,
    "manufactured-decay": manufactured_problem,
}


# -- config-file loading ------------------------------------------------------
#
# Coefficient functions in JSON configs are selected by registered kind plus
# numeric parameters, e.g. {"kind": "affine", "a": 5, "b": 6}.

def _space_fn(entry, domain):
    kind = entry["kind"]
    if kind == "zero":
        return lambda x: np.zeros_like(np.asarray(x, dtype=float))
    if kind == "constant":
        value = float(entry["value"])
        return lambda x: np.full_like(np.asarray(x, dtype=float), value)
    if kind == "affine":
        a, b = float(entry["a"]), float(entry["b"])
        return lambda x: a * np.asarray(x) + b
    if kind == "polynomial":
        coeffs = [float(c) for c in entry["coeffs"]]
        return lambda x: np.polyval(coeffs, np.asarray(x))
    if kind == "domain-sine":
        # First Dirichlet eigenfunction of the interval, scaled by `amplitude`.
        amplitude = float(entry.get("amplitude", 1.0))
        x_l, x_r = domain
        return lambda x: amplitude * np.sin(np.pi * (np.asarray(x) - x_l) / (x_r - x_l))
    raise ValueError(f"unknown space-function kind {kind!r}")


def _time_fn(entry):
    kind = entry["kind"]
    if kind == "one":
        return lambda t: 1.0
    if kind == "exp":
        rate = float(entry["rate"])
        return lambda t: math.exp(rate * t)
    if kind == "cos":
        omega = float(entry.get("omega", 1.0))
        return lambda t: math.cos(omega * t)
    raise ValueError(f"unknown time-function kind {kind!r}")


def _source_fn(entry, domain):
    kind = entry["kind"]
    if kind == "zero":
        return lambda x, t: np.zeros_like(np.asarray(x, dtype=float))
    if kind == "constant":
        value = float(entry["value"])
        return lambda x, t: np.full_like(np.asarray(x, dtype=float), value)
    if kind == "separable":
        space = _space_fn(entry["space"], domain)
        time = _time_fn(entry["time"])
        return lambda x, t: space(x) * time(t)
    if kind == "sum":
        terms = [_source_fn(term, domain) for term in entry["terms"]]
        return lambda x, t: sum(term(x, t) for term in terms)
    raise ValueError(f"unknown source kind {kind!r}")


def load_problem(source) -> ProblemSpec:
    """Build a ProblemSpec from a builtin name, a JSON file path, or a dict."""
    if isinstance(source, ProblemSpec):
        return source
    if isinstance(source, str) and source in BUILTIN_PROBLEMS:
        return BUILTIN_PROBLEMS[source]()
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as handle:
            source = json.load(handle)
    if not isinstance(source, dict):
        raise TypeError(f"cannot build a problem from {type(source).__name__}")

    if "problem" in source:
        name = source["problem"]
        if name not in BUILTIN_PROBLEMS:
            raise ValueError(f"unknown builtin problem {name!r}")
        return BUILTIN_PROBLEMS[name]()

    domain = (float(source["domain"][0]), float(source["domain"][1]))
    greens = GreensBounds(**{k: float(v) for k, v in source["greens"].items()})
    return ProblemSpec(
        x_left=domain[0],
        x_right=domain[1],
        diffusion=float(source.get("diffusion", 1.0)),
        reaction=_space_fn(source["reaction"], domain),
        source=_source_fn(source["source"], domain),
        initial=_space_fn(source["initial"], domain),
        horizon=float(source["horizon"]),
        greens=greens,
        name=str(source.get("name", "custom")),
    )
