"""
Steady Neo-Hookean hyperelasticity in total Lagrangian form. One end of the
body is held while the opposite face is displaced, the displacement being
ramped over load steps with a Newton solve per step.

    S = lambda / 2 (J^2 - 1) C^-1 + mu (I - C^-1),    P = F S
"""

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from beartype.typing import Callable, Dict, List, Literal, Optional, Tuple, Union

from ..assembly import (
    Discretization,
    Partition,
    PointData,
    apply_dirichlet,
    batched,
    form_matrix,
    form_vector,
    integrate,
    load_report,
    partition,
)
from ..errors import AssemblyError, ConvergenceError, ParameterError
from ..geometry import ShapeBundle
from ..logger import table_printer, whi, yel
from ..patch_io import write_matrix, write_vector, write_vtk
from ..solvers import NewtonReport, SolverConfig, ilu0_block_jacobi, newton_solve
from ..space import boundary_dofs
from ..typechecker import Int, Real, optional_typecheck
from .base import build_discretization, output_dir


@optional_typecheck
@dataclass(frozen=True)
class NeoHookean:
    lam: float
    mu: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ParameterError(f"Shear modulus must be positive, not {self.mu}")
        if not self.lam > -2.0 * self.mu / 3.0:
            raise ParameterError(f"Need lambda > -2 mu / 3, got lambda={self.lam} mu={self.mu}")

    @classmethod
    def from_young(cls, E: Real = 70.0, nu: Real = 0.35) -> "NeoHookean":
        if not -1.0 < nu < 0.5:
            raise ParameterError(f"Poisson ratio must lie in (-1, 0.5), not {nu}")
        return cls(
            lam=float(E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))),
            mu=float(E / (2.0 * (1.0 + nu))),
        )

    def kinematics(self, F: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        "C, C^-1 and J for deformation gradients (..., d, d)"
        C = np.einsum("...ki,...kj->...ij", F, F)
        J = np.linalg.det(F)
        return C, np.linalg.inv(C), J

    def stress(self, F: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        "second and first Piola-Kirchhoff stresses"
        _, Cinv, J = self.kinematics(F)
        eye = np.eye(F.shape[-1])
        S = 0.5 * self.lam * (J**2 - 1.0)[..., None, None] * Cinv + self.mu * (eye - Cinv)
        return S, np.einsum("...ik,...kj->...ij", F, S)

    def energy_density(self, F: np.ndarray) -> np.ndarray:
        C, _, J = self.kinematics(F)
        dim = F.shape[-1]
        trC = np.einsum("...ii->...", C)
        with np.errstate(divide="ignore", invalid="ignore"):
            lnJ = np.log(J)
        return (
            0.25 * self.lam * (J**2 - 1.0)
            - 0.5 * self.lam * lnJ
            + 0.5 * self.mu * (trC - dim)
            - self.mu * lnJ
        )

    def tangent(self, F: np.ndarray, G: np.ndarray) -> np.ndarray:
        """
        dP_iJ / du_Bk contracted with the test gradients, shape
        (nq, nen, dim, nen, dim), from

            dS = lambda / 2 J^2 (C^-1 : dC) C^-1 - (lambda / 2 (J^2 - 1) - mu) C^-1 dC C^-1
        """
        S, _ = self.stress(F)
        _, Cinv, J = self.kinematics(F)
        dim = F.shape[-1]
        dC = np.einsum("qbI,qkJ->qbkIJ", G, F)
        dC = dC + np.swapaxes(dC, -1, -2)
        trace = np.einsum("qIJ,qbkIJ->qbk", Cinv, dC)
        coef = 0.5 * self.lam * (J**2 - 1.0) - self.mu
        dS = 0.5 * self.lam * (J**2)[:, None, None, None, None] * trace[..., None, None] * Cinv[:, None, None]
        dS -= coef[:, None, None, None, None] * np.einsum("qIK,qbkKL,qLJ->qbkIJ", Cinv, dC, Cinv)
        GS = np.einsum("qbK,qKJ->qbJ", G, S)
        dP = np.einsum("ki,qbJ->qbkiJ", np.eye(dim), GS)
        dP += np.einsum("qiK,qbkKJ->qbkiJ", F, dS)
        return np.einsum("qaJ,qbkiJ->qaibk", G, dP)


def _deformation(shapes: ShapeBundle, Ue: np.ndarray) -> np.ndarray:
    dim = shapes.grad.shape[-1]
    return np.eye(dim) + np.einsum("ac,qaJ->qcJ", Ue, shapes.grad)


def residual_integrand(material: NeoHookean) -> Callable:
    @batched
    def integrand(shapes: ShapeBundle, Ue: np.ndarray, point: PointData) -> np.ndarray:
        F = _deformation(shapes, Ue)
        J = np.linalg.det(F)
        _, P = material.stress(F)
        R = np.einsum("qiJ,qaJ->qai", P, shapes.grad)
        # inverted material points make the residual meaningless
        R[J <= 0] = np.nan
        return R

    return integrand


def tangent_integrand(material: NeoHookean) -> Callable:
    @batched
    def integrand(shapes: ShapeBundle, Ue: np.ndarray, point: PointData) -> np.ndarray:
        return material.tangent(_deformation(shapes, Ue), shapes.grad)

    return integrand


def linear_elastic_integrand(lam: Real, mu: Real) -> Callable:
    "small strain stiffness, the Neo-Hookean tangent at F = I"

    @batched
    def integrand(shapes: ShapeBundle, Ue: np.ndarray, point: PointData) -> np.ndarray:
        G = shapes.grad
        dim = G.shape[-1]
        K = lam * np.einsum("qai,qbk->qaibk", G, G)
        K += mu * np.einsum("ik,qaJ,qbJ->qaibk", np.eye(dim), G, G)
        K += mu * np.einsum("qak,qbi->qaibk", G, G)
        return K

    return integrand


@optional_typecheck
@dataclass(frozen=True)
class HyperelasticProblem:
    """
    ``displacement`` is imposed on the face (axis, 1) and ``fixed`` on the
    face (axis, 0), both ramped by the load factor.
    """

    material: NeoHookean = field(default_factory=NeoHookean.from_young)
    displacement: Tuple[float, ...] = (-0.2, 0.0)
    fixed: Optional[Tuple[float, ...]] = None
    axis: int = 0
    load_steps: int = 15

    def __post_init__(self):
        if self.load_steps < 1:
            raise ParameterError(f"Need at least one load step, not {self.load_steps}")
        if self.fixed is not None and len(self.fixed) != len(self.displacement):
            raise ParameterError("Fixed and imposed displacements differ in length")

    def boundary(self, disc: Discretization) -> Tuple[np.ndarray, np.ndarray]:
        "constrained dofs and their full load values"
        space = disc.space
        dim = space.dim
        if len(self.displacement) < dim:
            raise ParameterError(f"Need {dim} displacement components, got {len(self.displacement)}")
        if space.axes[self.axis].periodic:
            raise ParameterError(f"Axis {self.axis} is periodic and has no faces to load")
        fixed = self.fixed if self.fixed is not None else (0.0,) * dim
        values: Dict[int, float] = {}
        for side, disp in ((0, fixed), (1, self.displacement)):
            for comp in range(dim):
                for dof in boundary_dofs(space, self.axis, side, [comp]):
                    values[int(dof)] = float(disp[comp])
        dofs = np.array(sorted(values), dtype=int)
        return dofs, np.array([values[d] for d in dofs])


@optional_typecheck
def strain_energy(disc: Discretization, U: np.ndarray, material: NeoHookean) -> float:
    Ue = np.asarray(U, dtype=float)[disc.dofs].reshape(disc.element_count, disc.nen, disc.dof_per_node)
    H = np.einsum("eac,eqaJ->eqcJ", Ue, disc.shapes.grad)
    F = np.eye(disc.space.dim) + H
    return integrate(disc, material.energy_density(F))


@optional_typecheck
@dataclass(eq=False)
class ElasticSystem:
    disc: Discretization
    part: Partition
    problem: HyperelasticProblem

    def __post_init__(self):
        self._residual = residual_integrand(self.problem.material)
        self._tangent = tangent_integrand(self.problem.material)
        self.bc_dofs, self.bc_values = self.problem.boundary(self.disc)
        self.bc_zero = (self.bc_dofs, np.zeros(len(self.bc_dofs)))

    def internal_force(self, U: np.ndarray) -> np.ndarray:
        return form_vector(self.disc, self.part, self._residual, U)

    def stiffness(self, U: np.ndarray) -> sp.csr_matrix:
        return form_matrix(self.disc, self.part, self._tangent, U)

    def residual(self, U: np.ndarray) -> np.ndarray:
        "internal force with the constrained rows zeroed"
        R = self.internal_force(U)
        R[self.bc_dofs] = 0.0
        return R

    def jacobian(self, U: np.ndarray) -> sp.csr_matrix:
        K, _ = apply_dirichlet(self.stiffness(U), np.zeros(self.disc.dof_count), self.bc_zero)
        return K

    def preconditioner(self, J: sp.csr_matrix):
        return ilu0_block_jacobi(J, self.part, self.disc.dof_per_node)

    def solve_at(self, U: np.ndarray, factor: float, config: SolverConfig) -> Tuple[np.ndarray, NewtonReport]:
        U = np.array(U, dtype=float)
        U[self.bc_dofs] = factor * self.bc_values
        return newton_solve(self.residual, self.jacobian, U, config, self.preconditioner)


@optional_typecheck
@dataclass(eq=False)
class HyperelasticResult:
    system: ElasticSystem
    U: np.ndarray
    monitors: List[Dict[str, float]]
    timings: Dict[str, float] = field(default_factory=dict)


@optional_typecheck
def neohookean_run(
    problem: Optional[HyperelasticProblem] = None,
    N: Int = 8,
    p: Int = 2,
    c: Optional[Int] = None,
    dim: Int = 2,
    geometry: Literal["square", "annulus"] = "square",
    load_steps: Optional[Int] = None,
    workers: Int = 1,
    config: Optional[SolverConfig] = None,
    patch_file: Optional[Union[str, Path]] = None,
    out: Optional[Union[str, Path]] = None,
    dump_matrix: bool = False,
) -> HyperelasticResult:
    """
    Ramp the boundary displacement linearly over the load steps. A load
    step whose Newton solve fails is retried once as two half steps.
    """
    problem = problem or HyperelasticProblem(displacement=(-0.2,) + (0.0,) * (int(dim) - 1))
    if load_steps is not None:
        problem = HyperelasticProblem(
            problem.material, problem.displacement, problem.fixed, problem.axis, int(load_steps)
        )
    config = config or SolverConfig()
    timings = {}
    start = time.perf_counter()
    disc = build_discretization(dim, N, p, c, False, geometry, patch_file, dof_per_node=dim)
    part = partition(disc.space, workers)
    system = ElasticSystem(disc, part, problem)
    timings["setup"] = time.perf_counter() - start

    U = np.zeros(disc.dof_count)
    steps = problem.load_steps
    monitors = []
    start = time.perf_counter()
    for s in range(steps):
        lo, hi = s / steps, (s + 1) / steps
        try:
            U, report = system.solve_at(U, hi, config)
            iterations = report.iterations
        except (ConvergenceError, AssemblyError) as err:
            yel(f"Load step {s + 1} failed ({err}), retrying with two half increments")
            half, first = system.solve_at(U, 0.5 * (lo + hi), config)
            U, report = system.solve_at(half, hi, config)
            iterations = first.iterations + report.iterations
        monitors.append(
            {
                "step": s + 1,
                "load": hi,
                "newton": iterations,
                "residual": report.residuals[-1],
                "energy": strain_energy(disc, U, problem.material),
                "max_displacement": float(np.max(np.abs(U))) if len(U) else 0.0,
            }
        )
    timings["load_stepping"] = time.perf_counter() - start

    table_printer(
        "Load steps",
        ["step", "load", "Newton", "|R|", "energy"],
        [
            [str(m["step"]), f"{m['load']:.3f}", str(m["newton"]), f"{m['residual']:.3e}", f"{m['energy']:.6e}"]
            for m in monitors
        ],
    )
    dest = output_dir(out)
    if dest is not None:
        load_report(disc, part, show=False)
        write_vtk(disc.space, disc.patch, U, dest / "hyperelastic.vtk", name="displacement")
        write_vector(U, dest / "hyperelastic_U.txt")
        rows = np.array([[m["step"], m["load"], m["newton"], m["residual"], m["energy"]] for m in monitors])
        np.savetxt(
            dest / "hyperelastic_monitors.csv", rows, delimiter=",",
            header="step,load,newton,residual,energy", comments="",
            fmt=["%d", "%.16e", "%d", "%.16e", "%.16e"],
        )
        if dump_matrix:
            write_matrix(system.jacobian(U), dest / "hyperelastic_K.mtx", comment="Neo-Hookean tangent")
    whi(f"Hyperelastic run finished: {steps} load steps, energy {monitors[-1]['energy']:.6e}")
    return HyperelasticResult(system, U, monitors, timings)
