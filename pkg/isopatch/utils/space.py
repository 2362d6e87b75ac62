"""
Tensor-product function spaces: construction (with periodic unclamping),
element traversal, Gauss-Legendre quadrature, global numbering,
tensor-product adjacency and pointwise evaluation of shape functions.

Numbering: the basis multi-index is raveled in C order (last axis
fastest) and the field component varies fastest of all, so that
dof = node * dof_per_node + component.
"""

from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np
from beartype.typing import List, Optional, Sequence, Tuple, Union

from .errors import BasisIndexError, ContractError, ParameterError
from .geometry import (
    MapDerivatives,
    NurbsPatch,
    ShapeBundle,
    inverse_map_higher,
    map_and_jacobian,
    push_forward,
)
from .nurbs import eval_rational, tensor_basis
from .splines import KnotVector, basis_stencil, eval_basis, uniform_knots, unclamp_knots
from .typechecker import Int, Real, optional_typecheck

ElementId = Tuple[int, ...]


@optional_typecheck
@dataclass(frozen=True)
class AxisSpec:
    """
    Recipe for one parametric axis. ``continuity`` is the interior
    continuity c, ``periodic_continuity`` the continuity k across the
    periodic seam (defaults to c). An explicit ``knots`` sequence overrides
    the uniform construction.
    """

    elements: int = 1
    degree: int = 1
    continuity: int = 0
    domain: Tuple[float, float] = (0.0, 1.0)
    periodic: bool = False
    periodic_continuity: Optional[int] = None
    knots: Optional[Tuple[float, ...]] = None


@optional_typecheck
@dataclass(frozen=True, eq=False)
class SpaceAxis:
    "clamped knot vector, active (possibly unclamped) one and periodicity"

    clamped: KnotVector
    knots: KnotVector
    periodic: bool = False
    k: int = -1

    @property
    def degree(self) -> int:
        return self.knots.degree

    @property
    def clamped_count(self) -> int:
        return self.clamped.basis_count

    @property
    def unique_count(self) -> int:
        if self.periodic:
            return self.clamped_count - (self.k + 1)
        return self.clamped_count

    @property
    def spans(self) -> np.ndarray:
        return self.knots.spans()

    @property
    def element_count(self) -> int:
        return len(self.spans)

    @property
    def domain(self) -> Tuple[float, float]:
        return self.knots.domain

    def wrap(self, i: Union[Int, np.ndarray]) -> Union[int, np.ndarray]:
        "map pre-wrap basis indices to unique ones"
        if self.periodic:
            return np.mod(i, self.unique_count) if isinstance(i, np.ndarray) else int(i) % self.unique_count
        if np.any(np.asarray(i) < 0) or np.any(np.asarray(i) >= self.clamped_count):
            raise BasisIndexError(f"Basis index {i} outside of 0..{self.clamped_count - 1}")
        return i if isinstance(i, np.ndarray) else int(i)


@optional_typecheck
def make_axis(spec: AxisSpec) -> SpaceAxis:
    if spec.knots is not None:
        clamped = KnotVector(np.asarray(spec.knots, dtype=float), spec.degree)
    else:
        clamped = uniform_knots(spec.elements, spec.degree, spec.continuity, spec.domain)
    if not spec.periodic:
        return SpaceAxis(clamped=clamped, knots=clamped)
    k = spec.continuity if spec.periodic_continuity is None else spec.periodic_continuity
    active = unclamp_knots(clamped, k)
    axis = SpaceAxis(clamped=clamped, knots=active, periodic=True, k=int(k))
    if axis.unique_count < axis.degree + 1:
        raise ParameterError(
            f"A periodic axis of degree {axis.degree} with k={k} needs more elements: "
            f"only {axis.unique_count} unique functions"
        )
    return axis


@optional_typecheck
@dataclass(frozen=True, eq=False)
class TensorSpace:
    axes: Tuple[SpaceAxis, ...]
    dof_per_node: int = 1

    def __post_init__(self):
        if not 1 <= len(self.axes) <= 3:
            raise ParameterError(f"Only 1 to 3 dimensions are supported, not {len(self.axes)}")
        if self.dof_per_node < 1:
            raise ParameterError(f"dof_per_node must be >= 1, not {self.dof_per_node}")

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def degrees(self) -> Tuple[int, ...]:
        return tuple(a.degree for a in self.axes)

    @property
    def basis_counts(self) -> Tuple[int, ...]:
        return tuple(a.unique_count for a in self.axes)

    @property
    def clamped_counts(self) -> Tuple[int, ...]:
        return tuple(a.clamped_count for a in self.axes)

    @property
    def element_counts(self) -> Tuple[int, ...]:
        return tuple(a.element_count for a in self.axes)

    @property
    def periodic(self) -> Tuple[bool, ...]:
        return tuple(a.periodic for a in self.axes)

    @property
    def node_count(self) -> int:
        return int(np.prod(self.basis_counts))

    @property
    def dof_count(self) -> int:
        return self.node_count * self.dof_per_node

    @property
    def nen(self) -> int:
        "local functions per element"
        return int(np.prod([p + 1 for p in self.degrees]))

    def __repr__(self) -> str:
        desc = ", ".join(
            f"p={a.degree} ne={a.element_count}" + (f" periodic k={a.k}" if a.periodic else "")
            for a in self.axes
        )
        return f"TensorSpace({desc}, dof={self.dof_per_node})"


@optional_typecheck
def build_space(specs: Sequence[AxisSpec], dof_per_node: Int = 1) -> TensorSpace:
    """
    Open uniform knot vectors with interior multiplicity p-c per axis,
    unclamped on periodic axes.
    """
    for spec in specs:
        if spec.knots is None and not 0 <= spec.continuity <= spec.degree - 1:
            raise ParameterError(
                f"Interior continuity must satisfy 0 <= c <= p-1, got c={spec.continuity} for p={spec.degree}"
            )
    return TensorSpace(tuple(make_axis(s) for s in specs), int(dof_per_node))


@optional_typecheck
def uniform_space(
    dim: Int,
    elements: Union[Int, Sequence[Int]],
    degree: Int,
    continuity: Optional[Int] = None,
    periodic: bool = False,
    dof_per_node: Int = 1,
    domain: Tuple[Real, Real] = (0.0, 1.0),
) -> TensorSpace:
    "same recipe along every axis, maximal continuity by default"
    if isinstance(elements, (int, np.integer)):
        elements = [elements] * int(dim)
    if len(elements) != dim:
        raise ParameterError(f"Got {len(elements)} element counts for dimension {dim}")
    c = int(degree) - 1 if continuity is None else int(continuity)
    spec = dict(
        degree=int(degree),
        continuity=c,
        domain=(float(domain[0]), float(domain[1])),
        periodic=periodic,
    )
    return build_space([AxisSpec(elements=int(n), **spec) for n in elements], dof_per_node)


@optional_typecheck
def elements(space: TensorSpace) -> List[ElementId]:
    "lexicographic, last axis fastest"
    return list(product(*(range(n) for n in space.element_counts)))


@optional_typecheck
def element_array(space: TensorSpace) -> np.ndarray:
    "per-axis ordinals of every element, shape (ne, dim), in traversal order"
    grids = np.indices(space.element_counts).reshape(space.dim, -1)
    return grids.T.copy()


@lru_cache(maxsize=16)
def gauss_legendre(npts: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(npts)
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


@optional_typecheck
def axis_quadrature(axis: SpaceAxis, ordinal: Int, npts: Optional[Int] = None) -> Tuple[np.ndarray, np.ndarray]:
    "Gauss-Legendre points and weights on one element of an axis"
    span = int(axis.spans[ordinal])
    a, b = axis.knots.knots[span], axis.knots.knots[span + 1]
    nodes, weights = gauss_legendre(int(npts or axis.degree + 1))
    half = 0.5 * (b - a)
    return a + half * (nodes + 1.0), half * weights


@optional_typecheck
@dataclass(frozen=True, eq=False)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    counts: Tuple[int, ...]


@optional_typecheck
def quadrature_rule(space: TensorSpace, e: Sequence[Int]) -> QuadratureRule:
    "tensor Gauss-Legendre rule with p+1 points per axis"
    if len(e) != space.dim or any(
        not 0 <= j < n for j, n in zip(e, space.element_counts)
    ):
        raise BasisIndexError(f"Invalid element {tuple(e)} for {space}")
    rules = [axis_quadrature(ax, j) for ax, j in zip(space.axes, e)]
    points = np.stack(
        [g.ravel() for g in np.meshgrid(*(r[0] for r in rules), indexing="ij")], axis=-1
    )
    weights = rules[0][1]
    for r in rules[1:]:
        weights = np.multiply.outer(weights, r[1])
    return QuadratureRule(points, weights.ravel(), tuple(len(r[0]) for r in rules))


@optional_typecheck
def axis_stencil(axis: SpaceAxis, i: Int) -> np.ndarray:
    """
    Unique indices adjacent to basis function i along an axis. On periodic
    axes both pre-wrap copies of i are queried and the result wrapped.
    """
    copies = [int(i)]
    if axis.periodic and i + axis.unique_count < axis.clamped_count:
        copies.append(int(i) + axis.unique_count)
    found = []
    for c in copies:
        st = basis_stencil(c, axis.knots)
        found.append(np.arange(st.left, st.right + 1))
    return np.unique(axis.wrap(np.concatenate(found)))


@optional_typecheck
def tensor_stencil(space: TensorSpace, A: Sequence[Int]) -> np.ndarray:
    "flat node indices adjacent to the node with multi-index A"
    if len(A) != space.dim:
        raise BasisIndexError(f"Multi-index {tuple(A)} has the wrong dimension for {space}")
    for a, n in zip(A, space.basis_counts):
        if not 0 <= a < n:
            raise BasisIndexError(f"Multi-index {tuple(A)} out of range {space.basis_counts}")
    per_axis = [axis_stencil(ax, a) for ax, a in zip(space.axes, A)]
    grids = np.meshgrid(*per_axis, indexing="ij")
    return np.sort(np.ravel_multi_index(tuple(g.ravel() for g in grids), space.basis_counts))


@optional_typecheck
def global_index(space: TensorSpace, indices: Sequence[Int], component: Int = 0) -> int:
    "flat dof index of pre-wrap basis indices and a field component"
    if len(indices) != space.dim:
        raise BasisIndexError(f"Expected {space.dim} indices, got {len(indices)}")
    if not 0 <= component < space.dof_per_node:
        raise BasisIndexError(f"Component {component} outside of 0..{space.dof_per_node - 1}")
    for i, ax in zip(indices, space.axes):
        if not 0 <= i < ax.clamped_count:
            raise BasisIndexError(f"Basis index {i} outside of 0..{ax.clamped_count - 1}")
    wrapped = tuple(ax.wrap(i) for i, ax in zip(indices, space.axes))
    node = int(np.ravel_multi_index(wrapped, space.basis_counts))
    return node * space.dof_per_node + int(component)


def _combine(parts: List[np.ndarray], counts: Sequence[int]) -> np.ndarray:
    "C-order ravel of per-axis index tables (ne, nen_d) into (ne, nen)"
    out = parts[0]
    for part, n in zip(parts[1:], counts[1:]):
        out = (out[:, :, None] * n + part[:, None, :]).reshape(len(out), -1)
    return out


@optional_typecheck
def connectivity(space: TensorSpace, elems: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    For elements given as per-axis ordinals (ne, dim): flat indices of the
    local functions in the clamped control net (for the geometry) and their
    wrapped node indices (for the solution), both of shape (ne, nen).
    """
    pre = []
    for d, ax in enumerate(space.axes):
        first = ax.spans[elems[:, d]] - ax.degree
        pre.append(first[:, None] + np.arange(ax.degree + 1)[None, :])
    geometry_ids = _combine(pre, space.clamped_counts)
    nodes = _combine([ax.wrap(p) for ax, p in zip(space.axes, pre)], space.basis_counts)
    return geometry_ids, nodes


@optional_typecheck
def node_dofs(space: TensorSpace, nodes: np.ndarray) -> np.ndarray:
    "expand node indices (..., nen) into dof indices (..., nen * dof)"
    dof = space.dof_per_node
    out = nodes[..., None] * dof + np.arange(dof)
    return out.reshape(nodes.shape[:-1] + (-1,))


@optional_typecheck
def axis_rows(axis: SpaceAxis, points: np.ndarray, nderiv: Int) -> np.ndarray:
    """
    Basis rows at points of a single span, shape (nderiv+1, npts, p+1).
    All points must share their span.
    """
    tables = [eval_basis(axis.knots, x, nderiv) for x in points]
    spans = {t.span for t in tables}
    if len(spans) != 1:
        raise ContractError(f"Points {points.tolist()} straddle several spans: {sorted(spans)}")
    return np.stack(
        [np.stack([t.row(o) for t in tables]) for o in range(int(nderiv) + 1)]
    )


@optional_typecheck
def check_isoparametric(space: TensorSpace, patch: NurbsPatch) -> None:
    if patch.dim != space.dim or patch.counts != space.clamped_counts:
        raise ContractError(
            f"Patch with control net {patch.counts} is not isoparametric with {space} "
            f"(expected {space.clamped_counts})"
        )


@optional_typecheck
def shape_bundle(
    patch: NurbsPatch,
    rows: Sequence[np.ndarray],
    geometry_ids: np.ndarray,
    nderiv: Int,
) -> Tuple[ShapeBundle, MapDerivatives]:
    """
    Shape functions and map derivatives from per-axis rows of shape
    (..., nderiv+1, nq_d, nen_d) and local geometry ids (..., nen).
    Results have shape (..., nq, nen, ...).
    """
    nderiv = int(nderiv)
    order = max(nderiv, 1)
    tb = tensor_basis(rows, order)
    weights = patch.flat_weights()[geometry_ids]
    ctrl = patch.flat_ctrl()[geometry_ids]
    rt = eval_rational(tb, weights[..., None, :], order)
    md = map_and_jacobian(ctrl[..., None, :, :], rt)
    if nderiv >= 2:
        md = inverse_map_higher(md, nderiv)
    return push_forward(rt, md, nderiv), md


@optional_typecheck
@dataclass(frozen=True, eq=False)
class PointEvaluation:
    nodes: np.ndarray
    geometry_ids: np.ndarray
    shape: ShapeBundle
    x: np.ndarray
    dx: np.ndarray


@optional_typecheck
def eval_point(
    space: TensorSpace, patch: NurbsPatch, xi: Sequence[Real], nderiv: Int = 1
) -> PointEvaluation:
    "local functions, their spatial derivatives and the mapped point at xi"
    check_isoparametric(space, patch)
    if len(xi) != space.dim:
        raise ParameterError(f"Expected {space.dim} coordinates, got {len(xi)}")
    order = max(int(nderiv), 1)
    tables = [eval_basis(ax.knots, x, order) for ax, x in zip(space.axes, xi)]
    rows = [
        np.stack([t.row(o) for o in range(order + 1)])[:, None, :] for t in tables
    ]
    elems = np.array(
        [[int(np.searchsorted(ax.spans, t.span)) for ax, t in zip(space.axes, tables)]]
    )
    geometry_ids, nodes = connectivity(space, elems)
    bundle, md = shape_bundle(patch, rows, geometry_ids[0], nderiv)
    return PointEvaluation(
        nodes=nodes[0],
        geometry_ids=geometry_ids[0],
        shape=bundle[0],
        x=md.x[0],
        dx=md.dx[0],
    )


@optional_typecheck
def map_point(patch_space: TensorSpace, patch: NurbsPatch, xi: Sequence[Real]) -> np.ndarray:
    return eval_point(patch_space, patch, xi, 0).x


@optional_typecheck
def boundary_nodes(space: TensorSpace, axis: Int, side: Int) -> np.ndarray:
    "flat node indices of the functions that do not vanish on a face"
    if not 0 <= axis < space.dim or side not in (0, 1):
        raise ParameterError(f"Invalid face axis={axis} side={side}")
    if space.axes[axis].periodic:
        raise ParameterError(f"Axis {axis} is periodic and has no boundary")
    ranges = [np.arange(n) for n in space.basis_counts]
    ranges[axis] = np.array([0 if side == 0 else space.basis_counts[axis] - 1])
    grids = np.meshgrid(*ranges, indexing="ij")
    return np.ravel_multi_index(tuple(g.ravel() for g in grids), space.basis_counts)


@optional_typecheck
def boundary_dofs(
    space: TensorSpace, axis: Int, side: Int, components: Optional[Sequence[Int]] = None
) -> np.ndarray:
    nodes = boundary_nodes(space, axis, side)
    comps = range(space.dof_per_node) if components is None else components
    return np.sort(np.concatenate([nodes * space.dof_per_node + c for c in comps]))


@optional_typecheck
def sample_lattice(
    space: TensorSpace, patch: NurbsPatch, coords: Sequence[np.ndarray]
) -> PointEvaluation:
    """
    Evaluate on the tensor lattice of per-axis parametric coordinates. The
    lattice is flattened with axis 0 fastest and every field of the result
    carries a leading point axis.
    """
    check_isoparametric(space, patch)
    if len(coords) != space.dim:
        raise ParameterError(f"Expected {space.dim} coordinate arrays, got {len(coords)}")
    firsts, tables = [], []
    for ax, pts in zip(space.axes, coords):
        found = [eval_basis(ax.knots, float(x), 1) for x in np.asarray(pts, dtype=float)]
        firsts.append(np.array([t.first for t in found], dtype=int))
        tables.append(np.stack([np.stack([t.row(0), t.row(1)]) for t in found]))
    grids = np.meshgrid(*[np.arange(len(c)) for c in coords], indexing="ij")
    which = [g.ravel(order="F") for g in grids]
    pre = [
        firsts[d][which[d]][:, None] + np.arange(ax.degree + 1)[None, :]
        for d, ax in enumerate(space.axes)
    ]
    rows = [tables[d][which[d]][:, :, None, :] for d in range(space.dim)]
    geometry_ids = _combine(pre, space.clamped_counts)
    nodes = _combine([ax.wrap(p) for ax, p in zip(space.axes, pre)], space.basis_counts)
    bundle, md = shape_bundle(patch, rows, geometry_ids, 0)
    return PointEvaluation(
        nodes=nodes,
        geometry_ids=geometry_ids,
        shape=bundle[:, 0],
        x=md.x[:, 0],
        dx=md.dx[:, 0],
    )
