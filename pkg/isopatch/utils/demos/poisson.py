"""
Poisson problem -div(grad u) = f with Dirichlet data, on the unit square or
cube, the quarter annulus or a patch file. Errors are measured against a
manufactured solution.
"""

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from beartype.typing import Callable, Dict, List, Literal, Optional, Sequence, Union

from ..assembly import (
    Discretization,
    PointData,
    apply_dirichlet,
    batched,
    field_at_points,
    form_matrix,
    form_vector,
    integrate,
    load_report,
    partition,
    project_dirichlet,
)
from ..errors import ParameterError
from ..geometry import ShapeBundle
from ..logger import table_printer, whi
from ..patch_io import write_matrix, write_vector, write_vtk
from ..solvers import GmresResult, SolverConfig
from ..typechecker import Int, optional_typecheck
from .base import boundary_faces, build_discretization, observed_orders, output_dir, solve_linear


def _sine(x: np.ndarray) -> np.ndarray:
    return np.prod(np.sin(np.pi * x), axis=-1)


def _sine_grad(x: np.ndarray) -> np.ndarray:
    s, c = np.sin(np.pi * x), np.cos(np.pi * x)
    out = np.empty_like(x)
    for i in range(x.shape[-1]):
        others = np.prod(np.delete(s, i, axis=-1), axis=-1)
        out[..., i] = np.pi * c[..., i] * others
    return out


def _linear(x: np.ndarray) -> np.ndarray:
    return 1.0 + x @ np.arange(1.0, x.shape[-1] + 1.0)


def _linear_grad(x: np.ndarray) -> np.ndarray:
    return np.broadcast_to(np.arange(1.0, x.shape[-1] + 1.0), x.shape).copy()


@optional_typecheck
@dataclass(frozen=True)
class PoissonProblem:
    """
    Source and Dirichlet data as vectorized functions of physical points
    (..., dim). ``exact`` and ``exact_grad`` enable the error report.
    """

    source: Callable
    dirichlet: Callable
    exact: Optional[Callable] = None
    exact_grad: Optional[Callable] = None
    name: str = "custom"


@optional_typecheck
def manufactured(kind: Literal["sine", "linear"] = "sine") -> PoissonProblem:
    if kind == "sine":
        return PoissonProblem(
            source=lambda x: x.shape[-1] * np.pi**2 * _sine(x),
            dirichlet=_sine,
            exact=_sine,
            exact_grad=_sine_grad,
            name="sine",
        )
    return PoissonProblem(
        source=lambda x: np.zeros(x.shape[:-1]),
        dirichlet=_linear,
        exact=_linear,
        exact_grad=_linear_grad,
        name="linear",
    )


@batched
def stiffness_integrand(shapes: ShapeBundle, Ue: np.ndarray, point: PointData) -> np.ndarray:
    return np.einsum("qai,qbi->qab", shapes.grad, shapes.grad)


def load_integrand(source: Callable) -> Callable:
    @batched
    def integrand(shapes: ShapeBundle, Ue: np.ndarray, point: PointData) -> np.ndarray:
        return shapes.values * np.asarray(source(point.x), dtype=float)[:, None]

    return integrand


@optional_typecheck
@dataclass(eq=False)
class PoissonResult:
    disc: Discretization
    U: np.ndarray
    K: sp.csr_matrix
    F: np.ndarray
    solve: GmresResult
    errors: Dict[str, float] = field(default_factory=dict)
    timings: Dict[str, float] = field(default_factory=dict)


@optional_typecheck
def error_norms(disc: Discretization, U: np.ndarray, problem: PoissonProblem) -> Dict[str, float]:
    "L2 norm and H1 seminorm of u_h - u by quadrature"
    if problem.exact is None:
        return {}
    uh = field_at_points(disc, U, 0)[..., 0]
    out = {"l2": float(np.sqrt(integrate(disc, (uh - problem.exact(disc.x)) ** 2)))}
    if problem.exact_grad is not None:
        gh = field_at_points(disc, U, 1)[..., 0, :]
        diff = np.sum((gh - problem.exact_grad(disc.x)) ** 2, axis=-1)
        out["h1"] = float(np.sqrt(integrate(disc, diff)))
    return out


@optional_typecheck
def poisson_run(
    problem: Optional[PoissonProblem] = None,
    N: Int = 8,
    p: Int = 2,
    c: Optional[Int] = None,
    dim: Int = 2,
    geometry: Literal["square", "annulus"] = "square",
    patch_file: Optional[Union[str, Path]] = None,
    workers: Int = 1,
    config: Optional[SolverConfig] = None,
    out: Optional[Union[str, Path]] = None,
    dump_matrix: bool = False,
) -> PoissonResult:
    """
    Assemble the stiffness matrix and load vector, impose the Dirichlet
    data by boundary L2 projection, solve with GMRES and block Jacobi
    ILU(0) and report the errors against the exact solution.
    """
    problem = problem or manufactured("sine")
    config = config or SolverConfig(rtol=1e-12, atol=1e-14)
    timings = {}
    start = time.perf_counter()
    disc = build_discretization(dim, N, p, c, False, geometry, patch_file)
    if any(disc.space.periodic):
        raise ParameterError("The Poisson demo needs a space without periodic axes")
    part = partition(disc.space, workers)
    timings["setup"] = time.perf_counter() - start

    start = time.perf_counter()
    K = form_matrix(disc, part, stiffness_integrand)
    F = form_vector(disc, part, load_integrand(problem.source))
    timings["assembly"] = time.perf_counter() - start

    bc = project_dirichlet(disc, boundary_faces(disc.space), problem.dirichlet)
    Kb, Fb = apply_dirichlet(K, F, bc)

    start = time.perf_counter()
    solve = solve_linear(Kb, Fb, part, config)
    timings["solve"] = time.perf_counter() - start

    errors = error_norms(disc, solve.x, problem)
    if errors:
        whi(
            f"Poisson {problem.name} on {geometry}, N={N} p={p}: "
            + ", ".join(f"{k}={v:.6e}" for k, v in errors.items())
        )

    dest = output_dir(out)
    if dest is not None:
        write_vtk(disc.space, disc.patch, solve.x, dest / "poisson.vtk")
        write_vector(solve.x, dest / "poisson_U.txt")
        load_report(disc, part, show=False)
        if dump_matrix:
            write_matrix(Kb, dest / "poisson_K.mtx", comment="Poisson stiffness, Dirichlet rows eliminated")
            write_vector(Fb, dest / "poisson_F.txt")
    return PoissonResult(disc, solve.x, Kb, Fb, solve, errors, timings)


@optional_typecheck
def convergence_study(
    problem: Optional[PoissonProblem] = None,
    Ns: Sequence[Int] = (8, 16, 32),
    p: Int = 2,
    geometry: Literal["square", "annulus"] = "square",
    dim: Int = 2,
    workers: Int = 1,
    show: bool = True,
) -> List[Dict[str, float]]:
    "errors over a sequence of meshes with the observed orders"
    problem = problem or manufactured("sine")
    rows = []
    for N in Ns:
        res = poisson_run(problem, N=N, p=p, dim=dim, geometry=geometry, workers=workers)
        rows.append({"N": int(N), **res.errors})
    h = [1.0 / r["N"] for r in rows]
    for key in ("l2", "h1"):
        if all(key in r for r in rows):
            orders = observed_orders(h, [r[key] for r in rows])
            for r, o in zip(rows[1:], orders):
                r[f"{key}_order"] = float(o)
    if show:
        keys = [k for k in ("l2", "l2_order", "h1", "h1_order") if any(k in r for r in rows)]
        table_printer(
            f"Poisson convergence, p={p}, {geometry}",
            ["N"] + keys,
            [
                [str(r["N"])] + [f"{r[k]:.4e}" if k in r else "" for k in keys]
                for r in rows
            ],
        )
    return rows
