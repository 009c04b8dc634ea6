"""Discrete reconstruction functionals attached to a trajectory.

For a discrete field phi_h and evaluation time t the functional psi solves

    (psi, chi)_h = a_h(phi_h, chi) - (f(., t), chi)_h   for all chi,

i.e. a mass-matrix solve.  With psi in hand, phi_h is exactly the Galerkin
solution of the elliptic problem with data f + psi, which is what lets
elliptic a posteriori estimators bound parabolic errors.  psi is always
computed by the mass solve here; the closed-form identities it satisfies
along the Euler chains (e.g. psi for v^j equals -delta_t v^j) are kept as
independent cross-checks in the test suite, where they guard the assembly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List

from .fem1d import NodalField, SpatialMesh
from .problem import ProblemSpec
from .stepping import Operators, Trajectory


def compute_psi(field: NodalField, t_eval: float, spec: ProblemSpec, mesh: SpatialMesh,
                ops: Operators | None = None) -> NodalField:
    """Solve (psi, chi)_h = a_h(field, chi) - (f(., t_eval), chi)_h for psi."""
    if ops is None:
        ops = Operators(mesh, spec)
    rhs = ops.stiffness.matvec(field.interior) - ops.load(t_eval)
    return NodalField.from_interior(mesh, ops.mass_factor().solve(rhs))


class PsiFamily:
    """psi fields for the v, w and u families of one trajectory.

    Indexing mirrors Trajectory: psi_w uses half-index slots (slot 2j-1 is
    the functional of w^{j-1/2}, evaluated with f at t_{j-1/2}).
    """

    def __init__(self, psi_v: List[NodalField], psi_w: List[NodalField],
                 psi_u: List[NodalField]):
        self.psi_v = psi_v
        self.psi_w = psi_w
        self.psi_u = psi_u

    def psi_w_full(self, j: int) -> NodalField:
        return self.psi_w[2 * j]

    def psi_w_half(self, j: int) -> NodalField:
        if j < 1:
            raise IndexError("half slots exist for j >= 1")
        return self.psi_w[2 * j - 1]


def compute_psi_family(traj: Trajectory, spec: ProblemSpec,
                       ops: Operators | None = None) -> PsiFamily:
    if ops is None:
        ops = Operators(traj.mesh, spec)
    times = traj.grid.times
    mids = traj.grid.midpoints

    psi_v = [compute_psi(traj.v[j], times[j], spec, traj.mesh, ops)
             for j in range(len(times))]
    psi_u = [compute_psi(traj.u[j], times[j], spec, traj.mesh, ops)
             for j in range(len(times))]

    psi_w = [psi_v[0]]  # w^0 = v^0 = u_h^0, same functional
    for j in range(1, len(times)):
        psi_w.append(compute_psi(traj.w_half(j), mids[j - 1], spec, traj.mesh, ops))
        psi_w.append(compute_psi(traj.w_full(j), times[j], spec, traj.mesh, ops))
    return PsiFamily(psi_v, psi_w, psi_u)


@dataclass
class StarDefect:
    """Extrapolation-defect objects for one step index j.

    z_star = w^{j-1/2} - w^{j-1} - (v^j - v^{j-1})/2 measures how far the
    half-step state is from the mean of the one-step increments; it is the
    Galerkin solution for the data psi_star - f_star, which is the relation
    the error bound exploits.
    """

    j: int
    z_star: NodalField
    psi_star: NodalField
    f_star: Callable


def compute_star_defect(traj: Trajectory, psi: PsiFamily, j: int,
                        spec: ProblemSpec) -> StarDefect:
    if not 1 <= j <= traj.grid.m_steps:
        raise IndexError(f"star defect defined for 1 <= j <= {traj.grid.m_steps}")
    z_star = traj.w_half(j) - traj.w_full(j - 1) - 0.5 * (traj.v[j] - traj.v[j - 1])
    psi_star = psi.psi_w_half(j) - psi.psi_w_full(j - 1) - 0.5 * (psi.psi_v[j] - psi.psi_v[j - 1])

    t_prev, t_cur = traj.grid.times[j - 1], traj.grid.times[j]
    t_mid = traj.grid.midpoints[j - 1]
    source = spec.source

    def f_star(x):
        return 0.5 * (source(x, t_cur) - 2.0 * source(x, t_mid) + source(x, t_prev))

    return StarDefect(j=j, z_star=z_star, psi_star=psi_star, f_star=f_star)
