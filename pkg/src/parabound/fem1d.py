"""P1 finite-element kernel on an interval.

Provides the 1D mesh, continuous piecewise-linear nodal fields, assembly of
mass/stiffness/load for the operator -eps*u'' + r(x)*u with homogeneous
Dirichlet conditions, and a tridiagonal direct solver.  Quadrature policy:
the eps-part of the stiffness and the mass matrix are integrated exactly,
reaction and load integrals use per-element Simpson (exact for cubics, so
O(h^4) consistency on smooth data).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded, solve_banded


class SolverError(RuntimeError):
    """Raised when a linear solve fails or produces an untrustworthy result."""


class MeshError(ValueError):
    """Raised for degenerate or inconsistent meshes."""


class SpatialMesh:
    """Partition x_0 < x_1 < ... < x_N of an interval into N elements."""

    def __init__(self, nodes):
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise MeshError("mesh needs at least two nodes")
        widths = np.diff(nodes)
        if not np.all(widths > 0.0):
            raise MeshError("mesh nodes must be strictly increasing")
        self.nodes = nodes
        self.widths = widths
        self._sample_cache: dict[int, np.ndarray] = {}
        self._fn_sample_cache: dict = {}

    @classmethod
    def uniform(cls, x_left: float, x_right: float, n_elements: int) -> "SpatialMesh":
        if n_elements < 1:
            raise MeshError("need at least one element")
        return cls(np.linspace(x_left, x_right, n_elements + 1))

    @property
    def n_elements(self) -> int:
        return self.widths.size

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    @property
    def x_left(self) -> float:
        return float(self.nodes[0])

    @property
    def x_right(self) -> float:
        return float(self.nodes[-1])

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.nodes[:-1] + self.nodes[1:])

    def element_samples(self, n_per_element: int) -> np.ndarray:
        """Equispaced sample points per element incl. endpoints, shape (N, n)."""
        if n_per_element < 2:
            raise ValueError("need at least 2 samples per element")
        cached = self._sample_cache.get(n_per_element)
        if cached is None:
            offsets = np.linspace(0.0, 1.0, n_per_element)
            cached = self.nodes[:-1, None] + self.widths[:, None] * offsets[None, :]
            self._sample_cache[n_per_element] = cached
        return cached

    def cached_samples(self, fn: Callable, n_per_element: int) -> np.ndarray:
        """Per-element samples of a time-independent function, memoized on the
        mesh (which keeps the function alive, so the keys stay valid)."""
        key = (fn, n_per_element)
        cached = self._fn_sample_cache.get(key)
        if cached is None:
            cached = sample_function(fn, self, n_per_element)
            self._fn_sample_cache[key] = cached
        return cached

    def refine(self, factor: int = 2) -> "SpatialMesh":
        """Uniformly split every element into `factor` pieces."""
        if factor < 2:
            return self
        offsets = np.linspace(0.0, 1.0, factor + 1)[:-1]
        pieces = self.nodes[:-1, None] + self.widths[:, None] * offsets[None, :]
        return SpatialMesh(np.append(pieces.ravel(), self.nodes[-1]))


class NodalField:
    """Continuous piecewise-linear function given by nodal values."""

    def __init__(self, mesh: SpatialMesh, values, in_space: bool = False):
        values = np.asarray(values, dtype=float)
        if values.shape != mesh.nodes.shape:
            raise ValueError("nodal value count does not match the mesh")
        if in_space and (values[0] != 0.0 or values[-1] != 0.0):
            raise ValueError("fields in the Dirichlet space must vanish at the boundary")
        self.mesh = mesh
        self.values = values
        self.in_space = in_space

    @classmethod
    def zero(cls, mesh: SpatialMesh) -> "NodalField":
        return cls(mesh, np.zeros(mesh.n_nodes), in_space=True)

    @classmethod
    def from_interior(cls, mesh: SpatialMesh, interior) -> "NodalField":
        values = np.zeros(mesh.n_nodes)
        values[1:-1] = interior
        return cls(mesh, values, in_space=True)

    @classmethod
    def interpolate(cls, mesh: SpatialMesh, fn: Callable, in_space: bool = False) -> "NodalField":
        return cls(mesh, np.asarray(fn(mesh.nodes), dtype=float), in_space=in_space)

    @property
    def interior(self) -> np.ndarray:
        return self.values[1:-1]

    def eval(self, x) -> np.ndarray:
        return np.interp(x, self.mesh.nodes, self.values)

    def sample_on_elements(self, n_per_element: int) -> np.ndarray:
        offsets = np.linspace(0.0, 1.0, n_per_element)
        return (self.values[:-1, None] * (1.0 - offsets)[None, :]
                + self.values[1:, None] * offsets[None, :])

    def sup_norm(self) -> float:
        # P1 functions attain their extrema at nodes.
        return float(np.max(np.abs(self.values)))

    def __add__(self, other: "NodalField") -> "NodalField":
        self._check_same_mesh(other)
        return NodalField(self.mesh, self.values + other.values,
                          in_space=self.in_space and other.in_space)

    def __sub__(self, other: "NodalField") -> "NodalField":
        self._check_same_mesh(other)
        return NodalField(self.mesh, self.values - other.values,
                          in_space=self.in_space and other.in_space)

    def __mul__(self, scalar: float) -> "NodalField":
        return NodalField(self.mesh, self.values * scalar, in_space=self.in_space)

    __rmul__ = __mul__

    def _check_same_mesh(self, other: "NodalField") -> None:
        if other.mesh is not self.mesh and not np.array_equal(other.mesh.nodes, self.mesh.nodes):
            raise ValueError("field arithmetic requires a common mesh")


@dataclass
class TriDiagonalMatrix:
    """Tridiagonal matrix on the interior nodes of a mesh."""

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        n = self.diag.size
        if self.lower.size != n - 1 or self.upper.size != n - 1:
            raise ValueError("inconsistent diagonal lengths")

    @property
    def size(self) -> int:
        return self.diag.size

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diag * x
        y[:-1] += self.upper * x[1:]
        y[1:] += self.lower * x[:-1]
        return y

    def __add__(self, other: "TriDiagonalMatrix") -> "TriDiagonalMatrix":
        return TriDiagonalMatrix(self.lower + other.lower, self.diag + other.diag,
                                 self.upper + other.upper)

    def scaled(self, factor: float) -> "TriDiagonalMatrix":
        return TriDiagonalMatrix(self.lower * factor, self.diag * factor, self.upper * factor)

    def is_symmetric(self) -> bool:
        return np.array_equal(self.lower, self.upper)

    def is_diagonally_dominant(self) -> bool:
        slack = np.abs(self.diag).copy()
        slack[:-1] -= np.abs(self.upper)
        slack[1:] -= np.abs(self.lower)
        return bool(np.all(slack > 0.0))

    def dense(self) -> np.ndarray:
        a = np.diag(self.diag)
        a += np.diag(self.lower, -1)
        a += np.diag(self.upper, 1)
        return a

    def norm_inf(self) -> float:
        row = np.abs(self.diag).copy()
        row[:-1] += np.abs(self.upper)
        row[1:] += np.abs(self.lower)
        return float(row.max()) if row.size else 0.0

    def factor(self) -> "TriFactor":
        return TriFactor(self)


class TriFactor:
    """Reusable factorization of a tridiagonal system.

    Symmetric positive definite systems (the only kind produced by the
    assembly routines with r >= 0) go through a banded Cholesky factorization;
    anything else falls back to a banded LU solve per call.
    """

    def __init__(self, matrix: TriDiagonalMatrix):
        self.matrix = matrix
        self._chol = None
        if matrix.is_symmetric():
            ab = np.zeros((2, matrix.size))
            ab[0, 1:] = matrix.upper
            ab[1, :] = matrix.diag
            try:
                self._chol = cholesky_banded(ab)
            except np.linalg.LinAlgError:
                self._chol = None

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        m = self.matrix
        try:
            if self._chol is not None:
                x = cho_solve_banded((self._chol, False), rhs)
            else:
                ab = np.zeros((3, m.size))
                ab[0, 1:] = m.upper
                ab[1, :] = m.diag
                ab[2, :-1] = m.lower
                x = solve_banded((1, 1), ab, rhs)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise SolverError(f"tridiagonal solve failed: {exc}") from exc
        if not np.all(np.isfinite(x)):
            raise SolverError("tridiagonal solve produced non-finite values")
        return x


def solve_tridiagonal(matrix: TriDiagonalMatrix, rhs: np.ndarray) -> np.ndarray:
    """One-shot direct solve with a backward-error check."""
    rhs = np.asarray(rhs, dtype=float)
    x = matrix.factor().solve(rhs)
    residual = np.max(np.abs(matrix.matvec(x) - rhs)) if x.size else 0.0
    scale = matrix.norm_inf() * np.max(np.abs(x), initial=0.0) + np.max(np.abs(rhs), initial=0.0)
    if residual > 1e-12 * max(scale, 1e-300):
        raise SolverError(f"solve residual {residual:.3e} exceeds 1e-12 * {scale:.3e}")
    return x


def assemble_mass(mesh: SpatialMesh) -> TriDiagonalMatrix:
    """Consistent P1 mass matrix (exact integration) on interior nodes."""
    h = mesh.widths
    n_nodes = mesh.n_nodes
    diag_full = np.zeros(n_nodes)
    diag_full[:-1] += h / 3.0
    diag_full[1:] += h / 3.0
    off_full = h / 6.0
    return TriDiagonalMatrix(off_full[1:-1].copy(), diag_full[1:-1], off_full[1:-1].copy())


def assemble_stiffness(mesh: SpatialMesh, diffusion: float, reaction: Callable) -> TriDiagonalMatrix:
    """Matrix of eps*phi_i'*phi_j' + r*phi_i*phi_j over interior hat functions.

    The diffusion block is exact; the reaction block uses per-element Simpson,
    which integrates r*phi_i*phi_j exactly whenever r is linear on the element.
    """
    h = mesh.widths
    ra = np.asarray(reaction(mesh.nodes[:-1]), dtype=float)
    rm = np.asarray(reaction(mesh.midpoints), dtype=float)
    rb = np.asarray(reaction(mesh.nodes[1:]), dtype=float)

    n_nodes = mesh.n_nodes
    diag_full = np.zeros(n_nodes)
    diag_full[:-1] += diffusion / h + (h / 6.0) * (ra + rm)
    diag_full[1:] += diffusion / h + (h / 6.0) * (rm + rb)
    off_full = -diffusion / h + (h / 6.0) * rm
    return TriDiagonalMatrix(off_full[1:-1].copy(), diag_full[1:-1], off_full[1:-1].copy())


def assemble_load(mesh: SpatialMesh, g: Callable) -> np.ndarray:
    """Vector of (g, phi_i)_h over interior nodes, per-element Simpson."""
    h = mesh.widths
    ga = np.asarray(g(mesh.nodes[:-1]), dtype=float)
    gm = np.asarray(g(mesh.midpoints), dtype=float)
    gb = np.asarray(g(mesh.nodes[1:]), dtype=float)
    full = np.zeros(mesh.n_nodes)
    full[:-1] += (h / 6.0) * (ga + 2.0 * gm)
    full[1:] += (h / 6.0) * (2.0 * gm + gb)
    return full[1:-1]


def sample_function(fn: Callable, mesh: SpatialMesh, n_per_element: int) -> np.ndarray:
    """Evaluate a scalar function on the per-element sample grid."""
    points = mesh.element_samples(n_per_element)
    return np.asarray(fn(points.ravel()), dtype=float).reshape(points.shape)


def sup_norm(obj, mesh: SpatialMesh | None = None, n_per_element: int = 9) -> float:
    """Maximum-norm of a nodal field (exact) or of a sampled scalar function.

    General functions are sampled on `n_per_element` equispaced points per
    element including endpoints; for residual-type quantities this recovers
    the sup norm up to O((h/n)^2).
    """
    if isinstance(obj, NodalField):
        return obj.sup_norm()
    if mesh is None:
        raise ValueError("sup_norm of a general function needs a mesh")
    return float(np.max(np.abs(sample_function(obj, mesh, n_per_element))))


def solve_discrete_elliptic(mesh: SpatialMesh, diffusion: float, reaction: Callable,
                            g: Callable) -> NodalField:
    """Galerkin solution of the discrete elliptic problem a_h(y, chi) = (g, chi)_h."""
    stiffness = assemble_stiffness(mesh, diffusion, reaction)
    load = assemble_load(mesh, g)
    return NodalField.from_interior(mesh, solve_tridiagonal(stiffness, load))
