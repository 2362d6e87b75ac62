"""
Pieces shared by the demo drivers.
"""

from pathlib import Path

import numpy as np
from beartype.typing import Literal, Optional, Union

from ..assembly import Discretization, Partition
from ..errors import ConvergenceError, ParameterError
from ..logger import whi
from ..patch_io import read_patch
from ..patches import make_geometry
from ..solvers import GmresResult, SolverConfig, gmres_solve, ilu0_block_jacobi
from ..space import TensorSpace, uniform_space
from ..typechecker import Int, optional_typecheck


@optional_typecheck
def build_discretization(
    dim: Int = 2,
    N: Int = 8,
    p: Int = 2,
    c: Optional[Int] = None,
    periodic: bool = False,
    geometry: Literal["square", "annulus"] = "square",
    patch_file: Optional[Union[str, Path]] = None,
    dof_per_node: Int = 1,
    nderiv: Int = 1,
) -> Discretization:
    """
    Discretization of a generated geometry on a uniform space, or of the
    space and control net stored in a patch file.
    """
    if patch_file is not None:
        space, patch = read_patch(patch_file)
        if space.dof_per_node != dof_per_node:
            space = TensorSpace(space.axes, int(dof_per_node))
    else:
        space = uniform_space(dim, N, p, c, periodic=periodic, dof_per_node=dof_per_node)
        patch = make_geometry(geometry, space)
    return Discretization(space, patch, nderiv)


@optional_typecheck
def boundary_faces(space: TensorSpace) -> list:
    "every (axis, side) face of the non periodic axes"
    faces = [(d, s) for d, ax in enumerate(space.axes) if not ax.periodic for s in (0, 1)]
    if not faces:
        raise ParameterError(f"{space} has no boundary to hold Dirichlet data")
    return faces


@optional_typecheck
def solve_linear(
    K, F: np.ndarray, part: Partition, config: SolverConfig, dof_per_node: Int = 1
) -> GmresResult:
    "GMRES with one ILU(0) block per worker, raising when it does not converge"
    M = ilu0_block_jacobi(K, part, dof_per_node)
    result = gmres_solve(K, F, M, config)
    whi(
        f"GMRES: {result.iterations} iterations, status {result.status}, "
        f"residual {result.residual:.3e}"
    )
    if not result.converged and not config.fixed_iterations:
        raise ConvergenceError(
            f"GMRES stopped with status '{result.status}' after {result.iterations} "
            f"iterations, residual {result.residual:.3e} > {result.target:.3e}"
        )
    return result


@optional_typecheck
def output_dir(out: Optional[Union[str, Path]]) -> Optional[Path]:
    if out is None:
        return None
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


@optional_typecheck
def observed_orders(sizes, errors) -> np.ndarray:
    "convergence rates log(e_i / e_{i+1}) / log(h_i / h_{i+1})"
    h = np.asarray(sizes, dtype=float)
    e = np.asarray(errors, dtype=float)
    return np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:])
