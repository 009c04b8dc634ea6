"""Extrapolated backward-Euler time stepping.

Three solve families are produced on a shared time grid: the one-step
backward-Euler chain v, the two-half-steps chain w (whose intermediate states
at t_{j-1/2} are retained), and the extrapolated iterate

    u^j = 2 w^j - v^j,

which cancels the leading O(tau) error term of backward Euler and is second
order under the h = tau coupling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fem1d import (NodalField, SpatialMesh, SolverError, TriDiagonalMatrix,
                    assemble_load, assemble_mass, assemble_stiffness)
from .problem import ProblemSpec


class TimeGrid:
    """Partition 0 = t_0 < t_1 < ... < t_M = T."""

    def __init__(self, times):
        times = np.asarray(times, dtype=float)
        if times.ndim != 1 or times.size < 2:
            raise ValueError("time grid needs at least two points")
        if times[0] != 0.0:
            raise ValueError("time grid must start at t = 0")
        if not np.all(np.diff(times) > 0.0):
            raise ValueError("time grid must be strictly increasing")
        self.times = times
        self.taus = np.diff(times)

    @classmethod
    def uniform(cls, horizon: float, m_steps: int) -> "TimeGrid":
        # linspace puts t_M = T exactly; no truncated last step.
        return cls(np.linspace(0.0, horizon, m_steps + 1))

    @property
    def m_steps(self) -> int:
        return self.taus.size

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def midpoints(self) -> np.ndarray:
        return self.times[1:] - 0.5 * self.taus


class Trajectory:
    """The three solution families of one run.

    `w` is stored in half-index slots: slot 2j holds w^j and slot 2j-1 holds
    w^{j-1/2}, avoiding float dictionary keys.
    """

    def __init__(self, mesh: SpatialMesh, grid: TimeGrid, v, w, u):
        m = grid.m_steps
        if len(v) != m + 1 or len(u) != m + 1 or len(w) != 2 * m + 1:
            raise ValueError("trajectory length does not match the time grid")
        self.mesh = mesh
        self.grid = grid
        self.v = v
        self.w = w
        self.u = u

    def w_full(self, j: int) -> NodalField:
        return self.w[2 * j]

    def w_half(self, j: int) -> NodalField:
        """State w^{j-1/2} for j = 1..M."""
        if j < 1:
            raise IndexError("half steps exist for j >= 1")
        return self.w[2 * j - 1]


@dataclass
class Operators:
    """Assembled matrices and factor cache for one (problem, mesh) pair."""

    mesh: SpatialMesh
    spec: ProblemSpec
    mass: TriDiagonalMatrix = None
    stiffness: TriDiagonalMatrix = None

    def __post_init__(self):
        if self.mass is None:
            self.mass = assemble_mass(self.mesh)
        if self.stiffness is None:
            self.stiffness = assemble_stiffness(self.mesh, self.spec.diffusion, self.spec.reaction)
        self._step_factors = {}
        self._mass_factor = None

    def step_factor(self, tau: float):
        """Factorization of (M + tau*A), cached per distinct step size."""
        factor = self._step_factors.get(tau)
        if factor is None:
            system = self.mass + self.stiffness.scaled(tau)
            if not system.is_diagonally_dominant():
                raise SolverError("step system lost diagonal dominance; check reaction sign")
            factor = system.factor()
            self._step_factors[tau] = factor
        return factor

    def mass_factor(self):
        if self._mass_factor is None:
            self._mass_factor = self.mass.factor()
        return self._mass_factor

    def load(self, t: float) -> np.ndarray:
        return assemble_load(self.mesh, lambda x: self.spec.source(x, t))


def initial_field(spec: ProblemSpec, mesh: SpatialMesh, mode: str = "interpolate") -> NodalField:
    """Discrete initial state u_h^0.

    Modes: "interpolate" (nodal interpolant, the default), "l2-projection"
    (projection in the discrete scalar product), "ritz" (Galerkin solution
    with data -eps*u0'' + r*u0 obtained weakly, i.e. the elliptic projection).
    """
    if mode == "interpolate":
        values = np.asarray(spec.initial(mesh.nodes), dtype=float)
        values[0] = 0.0
        values[-1] = 0.0
        return NodalField(mesh, values, in_space=True)
    ops = Operators(mesh, spec)
    if mode == "l2-projection":
        rhs = assemble_load(mesh, spec.initial)
        return NodalField.from_interior(mesh, ops.mass_factor().solve(rhs))
    if mode == "ritz":
        # a_h(u_h^0, chi) = a(u0, chi) with the u0-side integrals done by
        # fine per-element Simpson on a once-refined sampling of u0.
        rhs = _ritz_rhs(spec, mesh)
        return NodalField.from_interior(mesh, ops.stiffness.factor().solve(rhs))
    raise ValueError(f"unknown initial mode {mode!r}")


def _ritz_rhs(spec: ProblemSpec, mesh: SpatialMesh) -> np.ndarray:
    # int eps*u0'*phi_i' + r*u0*phi_i, with u0' by central differences on a
    # fine per-element grid; adequate for the optional projection mode.
    n_sub = 16
    rhs = np.zeros(mesh.n_nodes)
    samples = mesh.element_samples(n_sub + 1)
    h = mesh.widths
    dx = h / n_sub
    u0 = np.asarray(spec.initial(samples.ravel()), dtype=float).reshape(samples.shape)
    du0 = np.gradient(u0, axis=1) / dx[:, None]
    r = np.asarray(spec.reaction(samples.ravel()), dtype=float).reshape(samples.shape)
    offs = np.linspace(0.0, 1.0, n_sub + 1)
    phi_left, dphi_left = 1.0 - offs, -1.0 / h[:, None]
    phi_right, dphi_right = offs, 1.0 / h[:, None]
    w = np.full(n_sub + 1, 1.0)
    w[0] = w[-1] = 0.5
    quad = w[None, :] * dx[:, None]
    rhs[:-1] += np.sum((spec.diffusion * du0 * dphi_left + r * u0 * phi_left[None, :]) * quad, axis=1)
    rhs[1:] += np.sum((spec.diffusion * du0 * dphi_right + r * u0 * phi_right[None, :]) * quad, axis=1)
    return rhs[1:-1]


def backward_euler_step(field: NodalField, t_from: float, tau: float, spec: ProblemSpec,
                        mesh: SpatialMesh, ops: Operators | None = None) -> NodalField:
    """One implicit Euler step: (M + tau*A) x = M*field + tau*(f(., t_from+tau), phi)_h."""
    if tau <= 0.0:
        raise ValueError("step size must be positive")
    if ops is None:
        ops = Operators(mesh, spec)
    rhs = ops.mass.matvec(field.interior) + tau * ops.load(t_from + tau)
    return NodalField.from_interior(mesh, ops.step_factor(tau).solve(rhs))


def delta_t(field_j: NodalField, field_jm1: NodalField, tau: float) -> NodalField:
    """Backward difference quotient (field_j - field_jm1) / tau."""
    if tau <= 0.0:
        raise ValueError("step size must be positive")
    return (field_j - field_jm1) * (1.0 / tau)


def run(spec: ProblemSpec, mesh: SpatialMesh, grid: TimeGrid,
        initial_mode: str = "interpolate", ops: Operators | None = None) -> Trajectory:
    """March the one-step, two-half-steps and extrapolated families to T."""
    if ops is None:
        ops = Operators(mesh, spec)
    u0 = initial_field(spec, mesh, mode=initial_mode)

    v = [u0]
    w = [u0]
    u = [u0]
    for j in range(1, grid.m_steps + 1):
        tau = float(grid.taus[j - 1])
        t_prev = float(grid.times[j - 1])
        try:
            v.append(backward_euler_step(v[-1], t_prev, tau, spec, mesh, ops=ops))
            w_half = backward_euler_step(w[-1], t_prev, 0.5 * tau, spec, mesh, ops=ops)
            w_full = backward_euler_step(w_half, t_prev + 0.5 * tau, 0.5 * tau, spec, mesh, ops=ops)
        except SolverError as exc:
            raise SolverError(f"time step {j} failed: {exc}") from exc
        w.extend([w_half, w_full])
        u.append(2.0 * w_full - v[-1])
    return Trajectory(mesh, grid, v, w, u)
