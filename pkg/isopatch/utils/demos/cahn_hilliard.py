"""
Cahn-Hilliard phase separation on a periodic patch,

    dc/dt - div(M grad(mu(c) - kappa lap c)) = 0,

discretized in primal form with C1 splines: the weak residual

    int w dc/dt + M mu'(c) grad w . grad c + M kappa lap w lap c

uses second derivatives of the basis. Time stepping by generalized-alpha.
"""

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from beartype.typing import Callable, Dict, List, Literal, Optional, Union

from ..assembly import (
    Discretization,
    Partition,
    PointData,
    batched,
    field_at_points,
    form_matrix,
    form_vector,
    integrate,
    load_report,
    partition,
)
from ..errors import ParameterError
from ..geometry import ShapeBundle
from ..logger import whi
from ..patch_io import write_vector, write_vtk
from ..solvers import (
    SolverConfig,
    TimeState,
    Trajectory,
    alpha_parameters,
    galpha_solve,
    ilu0_block_jacobi,
)
from ..typechecker import Int, Real, optional_typecheck
from .base import build_discretization, output_dir


@optional_typecheck
@dataclass(frozen=True)
class ChemicalPotential:
    "mu(c), its first two derivatives and the bulk free energy density psi"

    name: str
    mu: Callable
    dmu: Callable
    d2mu: Callable
    psi: Callable


@optional_typecheck
def double_well() -> ChemicalPotential:
    "mu = c^3 - c, psi = (c^2 - 1)^2 / 4"
    return ChemicalPotential(
        name="polynomial",
        mu=lambda c: c**3 - c,
        dmu=lambda c: 3.0 * c**2 - 1.0,
        d2mu=lambda c: 6.0 * c,
        psi=lambda c: 0.25 * (c**2 - 1.0) ** 2,
    )


@optional_typecheck
def logarithmic(theta: Real = 1.5) -> ChemicalPotential:
    "mu = ln(c / (1 - c)) / (2 theta) + 1 - 2c"
    a = 1.0 / (2.0 * float(theta))
    return ChemicalPotential(
        name="logarithmic",
        mu=lambda c: a * np.log(c / (1.0 - c)) + 1.0 - 2.0 * c,
        dmu=lambda c: a * (1.0 / c + 1.0 / (1.0 - c)) - 2.0,
        d2mu=lambda c: a * (1.0 / (1.0 - c) ** 2 - 1.0 / c**2),
        psi=lambda c: a * (c * np.log(c) + (1.0 - c) * np.log(1.0 - c)) + c * (1.0 - c),
    )


@optional_typecheck
@dataclass(frozen=True)
class CahnHilliardProblem:
    mobility: float = 1.0
    kappa: float = 1.0
    potential: Literal["polynomial", "logarithmic"] = "polynomial"
    mean: float = 0.63
    amplitude: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if not self.mobility > 0:
            raise ParameterError(f"Mobility must be positive, not {self.mobility}")
        if not self.kappa > 0:
            raise ParameterError(f"kappa must be positive, not {self.kappa}")
        if self.potential == "logarithmic" and not (
            0 < self.mean - self.amplitude and self.mean + self.amplitude < 1
        ):
            raise ParameterError(
                f"The logarithmic potential needs concentrations in (0, 1): "
                f"mean={self.mean} amplitude={self.amplitude}"
            )

    def chemical_potential(self) -> ChemicalPotential:
        return logarithmic() if self.potential == "logarithmic" else double_well()

    def initial(self, dof_count: Int) -> np.ndarray:
        "uniform random perturbation of the control values about the mean"
        rng = np.random.default_rng(self.seed)
        return self.mean + self.amplitude * rng.uniform(-1.0, 1.0, int(dof_count))


def _point_state(shapes: ShapeBundle, Ue: np.ndarray):
    u = Ue[:, 0]
    lap = np.einsum("qaii->qa", shapes.hess)
    c = shapes.values @ u
    grad_c = np.einsum("qai,a->qi", shapes.grad, u)
    return c, grad_c, lap, lap @ u


def residual_integrand(problem: CahnHilliardProblem, chem: ChemicalPotential) -> Callable:
    M, kappa = problem.mobility, problem.kappa

    @batched
    def integrand(shapes: ShapeBundle, Ue: np.ndarray, point: PointData) -> np.ndarray:
        c, grad_c, lap, lap_c = _point_state(shapes, Ue)
        c_t = shapes.values @ point.fields["Udot"][:, 0]
        R = shapes.values * c_t[:, None]
        R += M * chem.dmu(c)[:, None] * np.einsum("qai,qi->qa", shapes.grad, grad_c)
        R += M * kappa * lap * lap_c[:, None]
        return R

    return integrand


def tangent_integrand(
    problem: CahnHilliardProblem, chem: ChemicalPotential, a: float, b: float
) -> Callable:
    "a dR/dUdot + b dR/dU"
    M, kappa = problem.mobility, problem.kappa

    @batched
    def integrand(shapes: ShapeBundle, Ue: np.ndarray, point: PointData) -> np.ndarray:
        N, G = shapes.values, shapes.grad
        c, grad_c, lap, _ = _point_state(shapes, Ue)
        mm = np.einsum("qa,qb->qab", N, N)
        gg = np.einsum("qai,qbi->qab", G, G)
        gc = np.einsum("qai,qi->qa", G, grad_c)
        K = M * chem.dmu(c)[:, None, None] * gg
        K += M * chem.d2mu(c)[:, None, None] * gc[:, :, None] * N[:, None, :]
        K += M * kappa * np.einsum("qa,qb->qab", lap, lap)
        return a * mm + b * K

    return integrand


@optional_typecheck
def free_energy(disc: Discretization, U: np.ndarray, problem: CahnHilliardProblem) -> float:
    "int psi(c) + kappa / 2 |grad c|^2"
    chem = problem.chemical_potential()
    c = field_at_points(disc, U, 0)[..., 0]
    g = field_at_points(disc, U, 1)[..., 0, :]
    return integrate(disc, chem.psi(c) + 0.5 * problem.kappa * np.sum(g**2, axis=-1))


@optional_typecheck
def mass(disc: Discretization, U: np.ndarray) -> float:
    return integrate(disc, field_at_points(disc, U, 0)[..., 0])


@optional_typecheck
@dataclass(eq=False)
class CahnHilliardSystem:
    "residual and Jacobian callbacks in the form the time integrator expects"

    disc: Discretization
    part: Partition
    problem: CahnHilliardProblem

    def __post_init__(self):
        self.chem = self.problem.chemical_potential()
        self._residual = residual_integrand(self.problem, self.chem)

    def residual(self, t: float, U: np.ndarray, Udot: np.ndarray) -> np.ndarray:
        return form_vector(self.disc, self.part, self._residual, U, fields={"Udot": Udot}, t=t)

    def jacobian(self, t: float, U: np.ndarray, Udot: np.ndarray, a: float, b: float) -> sp.csr_matrix:
        integrand = tangent_integrand(self.problem, self.chem, float(a), float(b))
        return form_matrix(self.disc, self.part, integrand, U, fields={"Udot": Udot}, t=t)

    def preconditioner(self, J: sp.csr_matrix):
        return ilu0_block_jacobi(J, self.part, 1)

    def monitor(self, state: TimeState) -> Dict[str, float]:
        return {
            "mass": mass(self.disc, state.U),
            "energy": free_energy(self.disc, state.U, self.problem),
        }


@optional_typecheck
@dataclass(eq=False)
class CahnHilliardResult:
    system: CahnHilliardSystem
    trajectory: Trajectory
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def monitors(self) -> List[Dict[str, float]]:
        return self.trajectory.monitors

    @property
    def mass_drift(self) -> float:
        m0 = self.monitors[0]["mass"]
        return max(abs(m["mass"] - m0) for m in self.monitors) / abs(m0)


@optional_typecheck
def cahn_hilliard_run(
    problem: Optional[CahnHilliardProblem] = None,
    N: Int = 16,
    p: Int = 2,
    c: Optional[Int] = None,
    dim: Int = 2,
    dt: Real = 1e-4,
    steps: Int = 10,
    rho_inf: Real = 0.5,
    workers: Int = 1,
    config: Optional[SolverConfig] = None,
    patch_file: Optional[Union[str, Path]] = None,
    out: Optional[Union[str, Path]] = None,
    U0: Optional[np.ndarray] = None,
) -> CahnHilliardResult:
    """
    Periodic run from a random initial state, returning the trajectory
    with mass and free energy monitors per step.
    """
    problem = problem or CahnHilliardProblem()
    timings = {}
    start = time.perf_counter()
    disc = build_discretization(
        dim, N, p, c, periodic=True, patch_file=patch_file, nderiv=2
    )
    if min(disc.space.degrees) < 2 or any(ax.periodic and ax.k < 1 for ax in disc.space.axes):
        raise ParameterError(
            f"The fourth order operator needs C1 continuity across elements and seams: {disc.space}"
        )
    part = partition(disc.space, workers)
    system = CahnHilliardSystem(disc, part, problem)
    timings["setup"] = time.perf_counter() - start

    U = problem.initial(disc.dof_count) if U0 is None else np.asarray(U0, dtype=float)
    state = TimeState(U=U, Udot=np.zeros_like(U), t=0.0)
    params = alpha_parameters(rho_inf, dt)
    dest = output_dir(out)
    if dest is not None:
        load_report(disc, part, show=False)
        write_vtk(disc.space, disc.patch, U, dest / "cahn_hilliard_0000.vtk", name="c")

    start = time.perf_counter()
    trajectory = galpha_solve(
        system.residual,
        system.jacobian,
        state,
        params,
        steps,
        config,
        system.preconditioner,
        system.monitor,
        history_path=None if dest is None else dest / "cahn_hilliard_newton.csv",
        keep_states=False,
    )
    timings["time_stepping"] = time.perf_counter() - start
    result = CahnHilliardResult(system, trajectory, timings)
    final = trajectory.final
    whi(
        f"Cahn-Hilliard: {final.step} steps to t={final.t:.4g}, "
        f"mass drift {result.mass_drift:.3e}, energy {result.monitors[-1]['energy']:.6e}"
    )
    if dest is not None:
        write_vtk(disc.space, disc.patch, final.U, dest / f"cahn_hilliard_{final.step:04d}.vtk", name="c")
        write_vector(final.U, dest / "cahn_hilliard_U.txt")
        rows = np.array([[m["step"], m["t"], m["mass"], m["energy"]] for m in result.monitors])
        np.savetxt(
            dest / "cahn_hilliard_monitors.csv", rows, delimiter=",",
            header="step,t,mass,energy", comments="", fmt=["%d", "%.16e", "%.16e", "%.16e"],
        )
    return result
