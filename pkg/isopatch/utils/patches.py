"""
Construction of geometry patches: unit boxes, the quarter annulus, identity
maps of any space, exact transfer of a coarse geometry onto a finer
clamped space and unclamping of control nets along periodic axes.
"""

import numpy as np
from beartype.typing import Literal, Sequence, Tuple

from .errors import ContractError, ParameterError
from .geometry import NurbsPatch
from .logger import whi
from .space import AxisSpec, TensorSpace, build_space, check_isoparametric
from .splines import KnotVector, eval_basis, unclamp_curve
from .typechecker import Int, Real, optional_typecheck


@optional_typecheck
def collocation_matrix(kv: KnotVector, points: np.ndarray) -> np.ndarray:
    "N_j(points[i]) for every basis function j of a knot vector"
    out = np.zeros((len(points), kv.basis_count))
    for i, x in enumerate(points):
        t = eval_basis(kv, x, 0)
        out[i, t.first : t.span + 1] = t.values
    return out


def _apply_along(matrix: np.ndarray, arr: np.ndarray, axis: int) -> np.ndarray:
    return np.moveaxis(np.tensordot(matrix, arr, axes=(1, axis)), 0, axis)


@optional_typecheck
def unclamp_patch(space: TensorSpace, patch: NurbsPatch) -> NurbsPatch:
    """
    Unclamp the homogeneous control net along every periodic axis of the
    space so that the map stays unchanged on the parametric domain while
    being evaluated with the unclamped knots.
    """
    check_isoparametric(space, patch)
    points = np.array(patch.points)
    for d, ax in enumerate(space.axes):
        if not ax.periodic:
            continue
        moved = np.moveaxis(points, d, 0)
        shape = moved.shape
        knots, lines = unclamp_curve(ax.clamped, moved.reshape(shape[0], -1), ax.k)
        if not np.array_equal(knots.knots, ax.knots.knots):
            raise ContractError(f"Unclamped knots of axis {d} differ from the space's")
        points = np.moveaxis(lines.reshape(shape), 0, d)
    return NurbsPatch(points)


@optional_typecheck
def refine_patch(
    patch: NurbsPatch, patch_space: TensorSpace, space: TensorSpace
) -> NurbsPatch:
    """
    Represent a geometry given on a clamped ``patch_space`` on the clamped
    basis of ``space`` by collocating its homogeneous map at the Greville
    abscissae of the target. The transfer is exact when the target space
    contains the source one (same domain, higher or equal degree, nested
    knots). Periodic axes of the target are unclamped afterwards.
    """
    check_isoparametric(patch_space, patch)
    if any(patch_space.periodic):
        raise ParameterError("The source geometry must live on a clamped space")
    if patch_space.dim != space.dim:
        raise ParameterError(f"Dimension mismatch: {patch_space.dim} vs {space.dim}")
    points = np.array(patch.points)
    for d, (src, dst) in enumerate(zip(patch_space.axes, space.axes)):
        if src.domain != dst.clamped.domain:
            raise ParameterError(
                f"Axis {d}: geometry domain {src.domain} differs from {dst.clamped.domain}"
            )
        if dst.degree < src.degree:
            raise ParameterError(
                f"Axis {d}: degree {dst.degree} can't represent a degree {src.degree} geometry exactly"
            )
        greville = dst.clamped.greville()
        sample = collocation_matrix(src.clamped, greville)
        target = collocation_matrix(dst.clamped, greville)
        points = _apply_along(np.linalg.solve(target, sample), points, d)
    refined = NurbsPatch(points)
    if any(space.periodic):
        refined = unclamp_patch(space, refined)
    return refined


@optional_typecheck
def box_patch(
    dim: Int, lengths: Sequence[Real] = (1.0, 1.0, 1.0), origin: Sequence[Real] = (0.0, 0.0, 0.0)
) -> Tuple[TensorSpace, NurbsPatch]:
    "degree one, single element box"
    dim = int(dim)
    space = build_space([AxisSpec(elements=1, degree=1, continuity=0)] * dim)
    corners = np.stack(np.meshgrid(*[np.array([0.0, 1.0])] * dim, indexing="ij"), axis=-1)
    ctrl = np.asarray(origin[:dim], dtype=float) + corners * np.asarray(lengths[:dim], dtype=float)
    return space, NurbsPatch.from_ctrl(ctrl)


@optional_typecheck
def quarter_annulus_patch(
    inner: Real = 1.0, outer: Real = 2.0
) -> Tuple[TensorSpace, NurbsPatch]:
    """
    Exact quarter annulus in the first quadrant. Axis 0 is radial, axis 1
    runs along the arc from (r, 0) to (0, r).
    """
    if not 0 < inner < outer:
        raise ParameterError(f"Invalid radii inner={inner} outer={outer}")
    space = build_space([AxisSpec(elements=1, degree=2, continuity=1)] * 2)
    radii = np.array([inner, 0.5 * (inner + outer), outer], dtype=float)
    arc = np.array([[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    ctrl = radii[:, None, None] * arc[None, :, :]
    weights = np.tile(np.array([1.0, np.sqrt(2.0) / 2.0, 1.0]), (3, 1))
    return space, NurbsPatch.from_ctrl(ctrl, weights)


@optional_typecheck
def identity_patch(space: TensorSpace) -> NurbsPatch:
    "x = xi on the parametric domain of the space"
    lo = [ax.clamped.domain[0] for ax in space.axes]
    hi = [ax.clamped.domain[1] for ax in space.axes]
    specs = [
        AxisSpec(elements=1, degree=1, continuity=0, domain=(a, b)) for a, b in zip(lo, hi)
    ]
    box_space = build_space(specs)
    _, box = box_patch(space.dim, [b - a for a, b in zip(lo, hi)], lo)
    return refine_patch(box, box_space, space)


@optional_typecheck
def make_geometry(name: Literal["square", "annulus"], space: TensorSpace) -> NurbsPatch:
    "geometry of the given name, represented on the space's basis"
    if name == "square":
        return identity_patch(space)
    if space.dim != 2:
        raise ParameterError(f"The annulus geometry is two dimensional, got dim={space.dim}")
    if any(space.periodic):
        raise ParameterError("The annulus geometry doesn't support periodic axes")
    if min(space.degrees) < 2:
        raise ParameterError(
            f"The annulus needs degree >= 2 along both axes to be exact, got {space.degrees}"
        )
    coarse_space, coarse = quarter_annulus_patch()
    whi(f"Transferring quarter annulus onto {space}")
    return refine_patch(coarse, coarse_space, space)
