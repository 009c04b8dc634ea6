"""High-accuracy reference solutions at the final time.

The reference integrator is deliberately disjoint from the production
scheme: Crank-Nicolson in time (with two initial implicit-Euler substeps to
damp any rough startup transients) on a much finer P1 mesh, followed by one
Richardson extrapolation level in time (step ratio 2, leaving O(tau^4)) and
one in space (mesh ratio 2, leaving O(h^4)).  Accuracy is estimated by
self-convergence against one further refinement of everything; if the
estimate misses the requested tolerance after one escalation, an explicit
failure is raised rather than silently degrading.

Computed references are cached on disk keyed by a content hash of the
problem and the tolerance.  Cache format: magic + version byte, a
length-prefixed JSON header, then the node and value arrays as little-endian
float64.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fem1d import NodalField, SpatialMesh, assemble_mass, assemble_stiffness
from .problem import ProblemSpec
from .stepping import Trajectory

CACHE_ENV_VAR = "PARABOUND_CACHE_DIR"
_MAGIC = b"PBRF"
_VERSION = 1


class OracleFailure(RuntimeError):
    """The reference solver could not certify the requested tolerance."""


@dataclass
class ReferenceSolution:
    nodes: np.ndarray
    values: np.ndarray
    accuracy: float
    tol: float
    problem_key: str

    @property
    def n_elements(self) -> int:
        return self.nodes.size - 1


def problem_content_key(spec: ProblemSpec) -> str:
    """Content hash of a problem: scalar data plus coefficient samples."""
    hasher = hashlib.sha256()
    scalars = np.array([spec.x_left, spec.x_right, spec.diffusion, spec.horizon,
                        spec.greens.kappa0, spec.greens.kappa1,
                        spec.greens.kappa1_prime, spec.greens.gamma])
    hasher.update(scalars.tobytes())
    x = np.linspace(spec.x_left, spec.x_right, 97)
    hasher.update(np.asarray(spec.reaction(x), dtype=float).tobytes())
    hasher.update(np.asarray(spec.initial(x), dtype=float).tobytes())
    for t in np.linspace(0.0, spec.horizon, 17):
        hasher.update(np.asarray(spec.source(x, float(t)), dtype=float).tobytes())
    return hasher.hexdigest()


def _fast_load_builder(mesh: SpatialMesh, source):
    """Per-time load assembly reusing node/midpoint sample locations."""
    nodes = mesh.nodes
    mids = mesh.midpoints
    h = mesh.widths

    def load(t: float) -> np.ndarray:
        f_nodes = np.asarray(source(nodes, t), dtype=float)
        f_mid = np.asarray(source(mids, t), dtype=float)
        full = np.zeros(nodes.size)
        full[:-1] += (h / 6.0) * (f_nodes[:-1] + 2.0 * f_mid)
        full[1:] += (h / 6.0) * (2.0 * f_mid + f_nodes[1:])
        return full[1:-1]

    return load


def _crank_nicolson_final(spec: ProblemSpec, n_elements: int, n_steps: int,
                          n_startup_steps: int = 2) -> np.ndarray:
    """CN values of u(., T) on a uniform mesh, including boundary zeros."""
    mesh = SpatialMesh.uniform(spec.x_left, spec.x_right, n_elements)
    mass = assemble_mass(mesh)
    stiffness = assemble_stiffness(mesh, spec.diffusion, spec.reaction)
    tau = spec.horizon / n_steps
    load = _fast_load_builder(mesh, spec.source)

    # (M + tau/2 A) serves both the CN step and the startup half-steps.
    half_system = (mass + stiffness.scaled(0.5 * tau)).factor()

    u = np.asarray(spec.initial(mesh.nodes[1:-1]), dtype=float)
    t = 0.0
    for step in range(n_steps):
        if step < n_startup_steps:
            # two implicit-Euler substeps of tau/2
            for _ in range(2):
                u = half_system.solve(mass.matvec(u) + 0.5 * tau * load(t + 0.5 * tau))
                t += 0.5 * tau
        else:
            rhs = (mass.matvec(u) - 0.5 * tau * stiffness.matvec(u)
                   + 0.5 * tau * (load(t) + load(t + tau)))
            u = half_system.solve(rhs)
            t += tau
    values = np.zeros(mesh.n_nodes)
    values[1:-1] = u
    return values


def _extrapolated_level(spec: ProblemSpec, n_elements: int, n_steps: int,
                        run_cache: dict) -> np.ndarray:
    """Space-time Richardson combination, returned on the n_elements mesh."""

    def cn(nel, nst):
        key = (nel, nst)
        if key not in run_cache:
            run_cache[key] = _crank_nicolson_final(spec, nel, nst)
        return run_cache[key]

    def time_extrapolated(nel):
        return (4.0 * cn(nel, 2 * n_steps) - cn(nel, n_steps)) / 3.0

    coarse = time_extrapolated(n_elements)
    fine = time_extrapolated(2 * n_elements)
    return (4.0 * fine[::2] - coarse) / 3.0


def solve_reference(spec: ProblemSpec, tol: float = 1e-9, production_elements: int = 512,
                    fine_factor: int = 16, base_steps: int = 512,
                    cache_dir=None) -> ReferenceSolution:
    """Reference u(., T) with certified self-convergence accuracy <= tol."""
    if tol < 1e-11:
        raise ValueError("tolerances below 1e-11 are out of scope for this oracle")
    key = problem_content_key(spec)
    cached = _cache_load(cache_dir, key, tol)
    if cached is not None:
        return cached

    nel0 = fine_factor * production_elements
    run_cache: dict = {}
    level = _extrapolated_level(spec, nel0, base_steps, run_cache)
    nel, nst = nel0, base_steps
    accuracy = np.inf
    for _ in range(2):  # refinement schedule: base comparison plus one escalation
        finer = _extrapolated_level(spec, 2 * nel, 2 * nst, run_cache)
        accuracy = float(np.max(np.abs(finer[::2] - level)))
        level, nel, nst = finer, 2 * nel, 2 * nst
        if accuracy <= tol:
            break
    if accuracy > tol:
        raise OracleFailure(
            f"reference self-convergence stalled at {accuracy:.3e} > tol {tol:.1e} "
            f"(mesh {nel} elements, {nst} base steps)")

    nodes = np.linspace(spec.x_left, spec.x_right, nel + 1)
    ref = ReferenceSolution(nodes=nodes, values=level, accuracy=accuracy, tol=tol,
                            problem_key=key)
    _cache_store(cache_dir, ref)
    return ref


def exact_reference(spec: ProblemSpec, n_elements: int = 4096) -> ReferenceSolution:
    """Reference built from a closed-form solution (manufactured problems)."""
    if spec.exact_solution is None:
        raise ValueError(f"problem {spec.name!r} has no closed-form solution")
    nodes = np.linspace(spec.x_left, spec.x_right, n_elements + 1)
    values = np.asarray(spec.exact_solution(nodes, spec.horizon), dtype=float)
    return ReferenceSolution(nodes=nodes, values=values, accuracy=0.0, tol=0.0,
                             problem_key=problem_content_key(spec))


def error_at_T(approx, ref: ReferenceSolution) -> float:
    """Sup-norm distance of an approximation at T, sampled on the reference grid."""
    if isinstance(approx, Trajectory):
        approx = approx.u[-1]
    if isinstance(approx, NodalField):
        sampled = approx.eval(ref.nodes)
    else:
        sampled = np.asarray(approx(ref.nodes), dtype=float)
    return float(np.max(np.abs(sampled - ref.values)))


# -- disk cache ----------------------------------------------------------------

def _cache_path(cache_dir, key: str, tol: float) -> Path | None:
    if cache_dir is None:
        cache_dir = os.environ.get(CACHE_ENV_VAR)
    if cache_dir is None:
        return None
    directory = Path(cache_dir)
    directory.mkdir(parents=True, exist_ok=True)
    return directory / f"ref-{key[:20]}-{tol:.1e}.bin"


def _cache_store(cache_dir, ref: ReferenceSolution) -> None:
    path = _cache_path(cache_dir, ref.problem_key, ref.tol)
    if path is None:
        return
    header = json.dumps({
        "version": _VERSION, "problem_key": ref.problem_key, "tol": ref.tol,
        "accuracy": ref.accuracy, "n_nodes": int(ref.nodes.size),
    }).encode("utf-8")
    with open(path, "wb") as handle:
        handle.write(_MAGIC + bytes([_VERSION]))
        handle.write(struct.pack("<I", len(header)))
        handle.write(header)
        handle.write(ref.nodes.astype("<f8").tobytes())
        handle.write(ref.values.astype("<f8").tobytes())


def _cache_load(cache_dir, key: str, tol: float) -> ReferenceSolution | None:
    path = _cache_path(cache_dir, key, tol)
    if path is None or not path.exists():
        return None
    with open(path, "rb") as handle:
        magic = handle.read(5)
        if magic[:4] != _MAGIC or magic[4] != _VERSION:
            return None
        (header_len,) = struct.unpack("<I", handle.read(4))
        header = json.loads(handle.read(header_len).decode("utf-8"))
        if header["problem_key"] != key or header["tol"] != tol:
            return None
        n = header["n_nodes"]
        nodes = np.frombuffer(handle.read(8 * n), dtype="<f8").copy()
        values = np.frombuffer(handle.read(8 * n), dtype="<f8").copy()
    return ReferenceSolution(nodes=nodes, values=values, accuracy=header["accuracy"],
                             tol=tol, problem_key=key)
