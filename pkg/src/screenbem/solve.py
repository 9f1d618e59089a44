"""
Incident fields, right-hand sides and dense solves.

Sound-soft:  a_S([d_n u], psi) = <u^i, psi>          (piecewise constants)
Sound-hard:  a_T([u], psi)     = -<d u^i/d x_n, psi> (interior hats)

Traces of the incident field are evaluated pointwise on the screen plane.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .assembly import (
    PIECEWISE_CONSTANT,
    PIECEWISE_LINEAR,
    BasisSpec,
    EmptyBasisError,
    GalerkinSystem,
    QuadSpec,
    assemble,
    gauss01,
    triangle_rule,
)
from .geometry import ScreenPanelMesh
from .specialfn import grad_phi_y, phi

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10
PIVOT_TOL = 1e-13


class SingularSystemError(ArithmeticError):
    """LU factorisation met a pivot that is zero to working tolerance."""

    def __init__(self, msg, pivot):
        super().__init__(msg)
        self.pivot = pivot


# --------------------------------------------------------------------------- #
# Incident fields                                                             #
# --------------------------------------------------------------------------- #
@dataclass(frozen=True)
class IncidentField:
    """Plane wave ``A exp(i k d.x)`` or point source ``C Phi(x, y)``.

    Attributes
    ----------
    kind : str
        ``"plane_wave"`` or ``"point_source"``.
    vector : tuple of float
        Unit direction d (plane wave) or source position y (point source).
    amplitude : complex
        A or C (default 1).
    """

    kind: str
    vector: tuple
    amplitude: complex = 1.0

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=float)
        if v.ndim != 1 or len(v) not in (2, 3) or not np.all(np.isfinite(v)):
            raise ValueError("incident vector must be a finite 2- or 3-vector")
        if self.kind == "plane_wave":
            if abs(np.linalg.norm(v) - 1.0) > 1e-12:
                raise ValueError(f"plane-wave direction must be a unit vector, |d| = {np.linalg.norm(v)}")
        elif self.kind == "point_source":
            if v[-1] == 0.0:
                raise ValueError("point source must lie off the screen plane (y_n != 0)")
        else:
            raise ValueError(f"unknown incident field kind {self.kind!r}")
        object.__setattr__(self, "vector", tuple(float(x) for x in v))
        object.__setattr__(self, "amplitude", complex(self.amplitude))

    @classmethod
    def plane_wave(cls, direction, amplitude: complex = 1.0) -> "IncidentField":
        return cls("plane_wave", tuple(direction), amplitude)

    @classmethod
    def point_source(cls, source, amplitude: complex = 1.0) -> "IncidentField":
        return cls("point_source", tuple(source), amplitude)

    @property
    def dimension(self) -> int:
        return len(self.vector)

    def scaled(self, factor: complex) -> "IncidentField":
        return IncidentField(self.kind, self.vector, self.amplitude * factor)

    def to_dict(self) -> dict:
        key = "direction" if self.kind == "plane_wave" else "source"
        return {"type": self.kind, key: list(self.vector),
                "amplitude": [self.amplitude.real, self.amplitude.imag]}


def _points(field_, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != field_.dimension:
        raise ValueError("point dimension does not match the incident field")
    return x


def incident_value(field_: IncidentField, x, k: float):
    """u^i(x) for points x of shape (..., n)."""
    x = _points(field_, x)
    v = np.asarray(field_.vector)
    if field_.kind == "plane_wave":
        return field_.amplitude * np.exp(1j * k * (x @ v))
    if np.any(np.all(x == v, axis=-1)):
        raise ValueError("evaluation point coincides with the point source")
    return field_.amplitude * phi(x, v, k, field_.dimension)


def incident_normal_derivative(field_: IncidentField, x, k: float):
    """d u^i / d x_n at points x of shape (..., n)."""
    x = _points(field_, x)
    v = np.asarray(field_.vector)
    if field_.kind == "plane_wave":
        return 1j * k * v[-1] * field_.amplitude * np.exp(1j * k * (x @ v))
    if np.any(np.all(x == v, axis=-1)):
        raise ValueError("evaluation point coincides with the point source")
    # grad_x Phi(x, y) = -grad_y Phi(x, y)
    return -field_.amplitude * grad_phi_y(x, v, k, field_.dimension)[..., -1]


# --------------------------------------------------------------------------- #
# Right-hand sides                                                            #
# --------------------------------------------------------------------------- #
def panel_quadrature(mesh: ScreenPanelMesh, order: int = 8):
    """Quadrature points, shape values and weights on every panel.

    Returns
    -------
    pts : ndarray (P, M, n)
    shape : ndarray (M, n)   nodal shape functions at the reference points
    wts : ndarray (P, M)     weights including the panel Jacobian
    """
    c = mesh.panel_coords()
    if mesh.dimension == 2:
        g, w = gauss01(order)
        shape = np.stack([1.0 - g, g], axis=1)
        jac = mesh.panel_measures()
    else:
        tp, w = triangle_rule(order)
        shape = np.stack([1.0 - tp[:, 0], tp[:, 0] - tp[:, 1], tp[:, 1]], axis=1)
        jac = 2.0 * mesh.panel_measures()
    pts = np.einsum("mv,pvd->pmd", shape, c)
    return pts, shape, jac[:, None] * w[None, :]


def rhs_soft(mesh: ScreenPanelMesh, basis: BasisSpec, field_: IncidentField, k: float,
             order: int = 8) -> np.ndarray:
    """b_p = int_{panel p} u^i ds for piecewise constants."""
    if basis.kind != PIECEWISE_CONSTANT or basis.mesh is not mesh:
        raise ValueError("rhs_soft needs the piecewise-constant basis of this mesh")
    pts, _, wts = panel_quadrature(mesh, order)
    return np.sum(wts * incident_value(field_, pts, k), axis=1)


def rhs_hard(mesh: ScreenPanelMesh, basis: BasisSpec, field_: IncidentField, k: float,
             order: int = 8) -> np.ndarray:
    """b_i = -int d u^i/d x_n lambda_i ds for interior hats."""
    if basis.kind != PIECEWISE_LINEAR or basis.mesh is not mesh:
        raise ValueError("rhs_hard needs the hat-function basis of this mesh")
    if basis.dimension == 0:
        raise EmptyBasisError("no interior vertices: the hat-function space is {0}")
    pts, shape, wts = panel_quadrature(mesh, order)
    dn = incident_normal_derivative(field_, pts, k)
    local = -np.einsum("pm,mv->pv", wts * dn, shape)
    dof = basis.vertex_dof_map()[mesh.panels]
    b = np.zeros(basis.dimension, dtype=complex)
    mask = dof >= 0
    np.add.at(b, dof[mask], local[mask])
    return b


# --------------------------------------------------------------------------- #
# Solutions                                                                   #
# --------------------------------------------------------------------------- #
@dataclass(frozen=True, eq=False)
class DensitySolution:
    """Jump density [d_n u] (soft) or [u] (hard) in its conforming basis.

    Attributes
    ----------
    problem : str
    coefficients : ndarray of complex
    basis : BasisSpec
    k : float
    field : IncidentField
    residual : float
        ``||A x - b||_inf / ||b||_inf`` (0 for an exactly zero right-hand side).
    min_pivot : float
        Smallest |U_ii| / max |U_ii| of the LU factors (nan if not factorised).
    quad : QuadSpec
    """

    problem: str
    coefficients: np.ndarray
    basis: BasisSpec
    k: float
    field: IncidentField
    residual: float = 0.0
    min_pivot: float = float("nan")
    quad: QuadSpec = field(default_factory=QuadSpec)

    @property
    def mesh(self) -> ScreenPanelMesh:
        return self.basis.mesh

    def nodal_values(self) -> np.ndarray:
        """Density values at the local nodes of every panel, shape (P, n)."""
        m = self.mesh
        if self.basis.kind == PIECEWISE_CONSTANT:
            return np.repeat(self.coefficients[:, None], m.dimension, axis=1)
        full = np.zeros(m.n_vertices, dtype=complex)
        full[self.basis.dofs] = self.coefficients
        return full[m.panels]

    def to_dict(self) -> dict:
        return {
            "problem": self.problem,
            "k": self.k,
            "basis": self.basis.kind,
            "mesh_hash": self.mesh.hash(),
            "incident": self.field.to_dict(),
            "residual": self.residual,
            "coefficients": [[float(c.real), float(c.imag)] for c in self.coefficients],
        }


def lu_solve(A: np.ndarray, b: np.ndarray):
    """Dense LU with partial pivoting; returns (x, relative residual, min pivot)."""
    with warnings.catch_warnings():
        # exact zero pivots are reported below with their magnitude
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=True)
    d = np.abs(np.diag(lu))
    rel = float(d.min() / d.max()) if d.max() > 0 else 0.0
    if rel < PIVOT_TOL:
        raise SingularSystemError(f"matrix singular to working precision (pivot ratio {rel:.3e})", rel)
    x = scipy.linalg.lu_solve((lu, piv), b)
    bn = np.abs(b).max()
    res = float(np.abs(A @ x - b).max() / bn) if bn > 0 else float(np.abs(A @ x).max())
    return x, res, rel


def solve_system(system: GalerkinSystem, b: np.ndarray, field_: IncidentField) -> DensitySolution:
    x, res, piv = lu_solve(system.matrix, b)
    if res > RESIDUAL_TOL:
        log.warning("solver residual %.3e exceeds %.0e", res, RESIDUAL_TOL)
    return DensitySolution(system.problem, x, system.basis, system.k, field_, res, piv, system.quad)


def _zero_solution(problem, basis, k, field_, quad):
    return DensitySolution(problem, np.zeros(basis.dimension, dtype=complex), basis, float(k),
                           field_, 0.0, float("nan"), quad)


def solve_soft(mesh: ScreenPanelMesh, k: float, field_: IncidentField,
               quad: QuadSpec | None = None, system: GalerkinSystem | None = None) -> DensitySolution:
    """Solve the sound-soft variational problem with piecewise constants."""
    quad = quad or QuadSpec()
    system = system or assemble("soft", mesh, k, quad)
    b = rhs_soft(mesh, system.basis, field_, k)
    if not np.any(b):
        return _zero_solution("soft", system.basis, k, field_, quad)
    return solve_system(system, b, field_)


def solve_hard(mesh: ScreenPanelMesh, k: float, field_: IncidentField,
               quad: QuadSpec | None = None, system: GalerkinSystem | None = None) -> DensitySolution:
    """Solve the sound-hard variational problem with interior hats.

    An empty hat space yields the explicit zero solution.
    """
    quad = quad or QuadSpec()
    basis = BasisSpec(PIECEWISE_LINEAR, mesh)
    if basis.dimension == 0:
        log.info("empty hat space: returning the zero solution")
        return _zero_solution("hard", basis, k, field_, quad)
    system = system or assemble("hard", mesh, k, quad)
    b = rhs_hard(mesh, system.basis, field_, k)
    if not np.any(b):
        return _zero_solution("hard", system.basis, k, field_, quad)
    return solve_system(system, b, field_)


def solve(problem: str, mesh: ScreenPanelMesh, k: float, field_: IncidentField,
          quad: QuadSpec | None = None) -> DensitySolution:
    if problem == "soft":
        return solve_soft(mesh, k, field_, quad)
    if problem == "hard":
        return solve_hard(mesh, k, field_, quad)
    raise ValueError(f"problem must be 'soft' or 'hard', got {problem!r}")
