"""
Worker-partitioned Galerkin assembly.

The single patch is split into contiguous element blocks, one per worker.
Each worker loops over its own elements, accumulates into a local array
covering every dof (or matrix entry) its elements touch, and hands back
that array. Entries owned by the worker are then written to the global
structure directly while the others go through a per-worker contribution
cache merged in ascending rank order, so results at fixed worker count are
bitwise reproducible.
"""

from contextlib import contextmanager
from dataclasses import dataclass
from itertools import product

import numpy as np
import scipy.sparse as sp
from beartype.typing import (
    Any,
    Callable,
    Dict,
    Iterator,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
    Union,
)
from joblib import Parallel, delayed
from tqdm import tqdm

from .env import BACKENDS, ISOPATCH_PARALLEL_BACKEND
from .errors import AssemblyError, ContractError, ParameterError, PreallocationViolation
from .flags import is_piped, is_verbose
from .geometry import NurbsPatch, ShapeBundle
from .logger import table_printer, whi
from .space import (
    TensorSpace,
    axis_quadrature,
    axis_rows,
    axis_stencil,
    boundary_nodes,
    check_isoparametric,
    connectivity,
    element_array,
    eval_point,
    node_dofs,
    shape_bundle,
)
from .splines import basis_support
from .typechecker import Int, Real, optional_typecheck


@optional_typecheck
@dataclass(frozen=True, eq=False)
class PointData:
    """
    What an integrand knows about where it is evaluated. For batched
    integrands ``x``, ``xi`` and ``weight`` carry a leading point axis and
    ``index`` is None.
    """

    x: np.ndarray
    xi: np.ndarray
    weight: Union[float, np.ndarray]
    element: int
    index: Optional[int]
    fields: Dict[str, np.ndarray]
    t: Optional[float] = None


def batched(func: Callable) -> Callable:
    "mark an integrand as receiving all quadrature points of an element at once"
    func.batched = True
    return func


def is_batched(func: Callable) -> bool:
    return bool(getattr(func, "batched", False))


@optional_typecheck
@dataclass(frozen=True, eq=False)
class WorkerPlan:
    """
    Work of one worker: its elements, the global targets (dofs or CSR data
    positions) they touch, where each element scatters into those targets
    and which targets the worker owns.
    """

    rank: int
    elements: np.ndarray
    targets: np.ndarray
    slots: np.ndarray
    owned: np.ndarray


@optional_typecheck
@dataclass(frozen=True, eq=False)
class ContributionCache:
    "off-owner contributions of one worker, waiting to be merged"

    rank: int
    targets: np.ndarray
    values: np.ndarray

    def flush(self, out: np.ndarray) -> np.ndarray:
        np.add.at(out, self.targets, self.values)
        return out


@optional_typecheck
@dataclass(frozen=True, eq=False)
class Partition:
    worker_count: int
    grid: Tuple[int, ...]
    starts: Tuple[np.ndarray, ...]
    axis_owners: Tuple[np.ndarray, ...]
    node_owner: np.ndarray
    element_counts: Tuple[int, ...]

    def coords(self, rank: Int) -> Tuple[int, ...]:
        return tuple(int(c) for c in np.unravel_index(int(rank), self.grid))

    def element_ranges(self, rank: Int) -> Tuple[Tuple[int, int], ...]:
        "per axis [first, last) element ordinals of a worker"
        return tuple(
            (int(s[c]), int(s[c + 1])) for s, c in zip(self.starts, self.coords(rank))
        )

    def worker_elements(self, rank: Int) -> np.ndarray:
        "ordinals (traversal order) of the worker's elements"
        ranges = [np.arange(a, b) for a, b in self.element_ranges(rank)]
        grids = np.meshgrid(*ranges, indexing="ij")
        flat = np.ravel_multi_index(tuple(g.ravel() for g in grids), self.element_counts)
        return np.sort(flat)

    def dof_owner(self, dof_per_node: Int) -> np.ndarray:
        return np.repeat(self.node_owner, int(dof_per_node))

    def owned_nodes(self, rank: Int) -> np.ndarray:
        return np.flatnonzero(self.node_owner == rank)

    def owned_dofs(self, rank: Int, dof_per_node: Int) -> np.ndarray:
        return np.flatnonzero(self.dof_owner(dof_per_node) == rank)


def _factorisations(W: int, dim: int) -> List[Tuple[int, ...]]:
    if dim == 1:
        return [(W,)]
    out = []
    for w in range(1, W + 1):
        if W % w == 0:
            out += [(w,) + rest for rest in _factorisations(W // w, dim - 1)]
    return out


@optional_typecheck
def choose_grid(element_counts: Sequence[Int], W: Int) -> Tuple[int, ...]:
    """
    Worker grid with the smallest number of cut element faces among the
    factorisations of W that fit the element counts.
    """
    counts = [int(n) for n in element_counts]
    best = None
    for grid in _factorisations(int(W), len(counts)):
        if any(w > n for w, n in zip(grid, counts)):
            continue
        cut = sum(
            (w - 1) * int(np.prod(counts[:d] + counts[d + 1 :])) for d, w in enumerate(grid)
        )
        if best is None or (cut, grid) < best:
            best = (cut, grid)
    if best is None:
        total = int(np.prod(counts))
        feasible = [
            w for w in range(1, total + 1)
            if any(all(g <= n for g, n in zip(grid, counts)) for grid in _factorisations(w, len(counts)))
        ]
        lower = max((w for w in feasible if w < W), default=None)
        higher = min((w for w in feasible if w > W), default=None)
        nearest = " or ".join(str(w) for w in (lower, higher) if w is not None)
        raise ParameterError(
            f"Can't split {tuple(counts)} elements among {W} workers: no factorisation "
            f"of {W} into a worker grid fits the element grid, nearest usable worker "
            f"counts are {nearest}"
        )
    return best[1]


def _block_starts(n: int, w: int) -> np.ndarray:
    sizes = [n // w + (1 if i < n % w else 0) for i in range(w)]
    return np.concatenate([[0], np.cumsum(sizes)]).astype(int)


@optional_typecheck
def axis_ownership(space: TensorSpace, axis: Int, starts: np.ndarray) -> np.ndarray:
    """
    Owner block of every unique function along an axis: the largest block
    whose first element lies in the function's support, else the block
    holding the first supporting element.
    """
    ax = space.axes[axis]
    firsts = starts[:-1]
    owners = np.empty(ax.unique_count, dtype=int)
    for i in range(ax.unique_count):
        support = basis_support(i, ax.knots)
        if support is None:
            raise ContractError(f"Basis function {i} of axis {axis} has no support in the domain")
        s, e = support
        inside = np.flatnonzero((firsts >= s) & (firsts <= e))
        if len(inside):
            owners[i] = inside[-1]
        else:
            owners[i] = int(np.searchsorted(starts, s, side="right") - 1)
    return owners


@optional_typecheck
def partition(space: TensorSpace, W: Int) -> Partition:
    "contiguous element blocks on a worker grid and the dof ownership map"
    if W < 1:
        raise ParameterError(f"Need at least one worker, not {W}")
    grid = choose_grid(space.element_counts, W)
    starts = tuple(_block_starts(n, w) for n, w in zip(space.element_counts, grid))
    owners = tuple(axis_ownership(space, d, s) for d, s in enumerate(starts))
    mesh = np.meshgrid(*owners, indexing="ij")
    node_owner = np.ravel_multi_index(tuple(m.ravel() for m in mesh), grid)
    return Partition(
        worker_count=int(W),
        grid=grid,
        starts=starts,
        axis_owners=owners,
        node_owner=node_owner,
        element_counts=space.element_counts,
    )


@optional_typecheck
def axis_pattern(space: TensorSpace, axis: Int) -> sp.csr_matrix:
    ax = space.axes[axis]
    rows, cols = [], []
    for i in range(ax.unique_count):
        st = axis_stencil(ax, i)
        rows.append(np.full(len(st), i))
        cols.append(st)
    rows, cols = np.concatenate(rows), np.concatenate(cols)
    n = ax.unique_count
    return sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))


@optional_typecheck
def preallocate(space: TensorSpace) -> sp.csr_matrix:
    """
    CSR matrix holding the tensor-product adjacency graph expanded to
    dof blocks, with all values set to explicit zeros.
    """
    K = axis_pattern(space, 0)
    for d in range(1, space.dim):
        K = sp.kron(K, axis_pattern(space, d), format="csr")
    dof = space.dof_per_node
    if dof > 1:
        K = sp.kron(K, np.ones((dof, dof)), format="csr")
    K = sp.csr_matrix(K, dtype=float)
    K.sum_duplicates()
    K.sort_indices()
    K.data[:] = 0.0
    return K


class Discretization:
    """
    A space and an isoparametric geometry, with everything element loops
    need precomputed: connectivity, quadrature, shape functions and the
    J_q * w_q weights.
    """

    @optional_typecheck
    def __init__(self, space: TensorSpace, patch: NurbsPatch, nderiv: Int = 1) -> None:
        check_isoparametric(space, patch)
        if not 0 <= nderiv <= 3:
            raise ParameterError(f"nderiv must be in 0..3, not {nderiv}")
        self.space = space
        self.patch = patch
        self.nderiv = int(nderiv)
        self.elements = element_array(space)
        self.geometry_ids, self.nodes = connectivity(space, self.elements)
        self.dofs = node_dofs(space, self.nodes)

        order = max(self.nderiv, 1)
        rows, xis, wts = [], [], []
        for d, ax in enumerate(space.axes):
            pts, ws, tabs = [], [], []
            for j in range(ax.element_count):
                p, w = axis_quadrature(ax, j)
                pts.append(p)
                ws.append(w)
                tabs.append(axis_rows(ax, p, order))
            pick = self.elements[:, d]
            rows.append(np.stack(tabs)[pick])
            xis.append(np.stack(pts)[pick])
            wts.append(np.stack(ws)[pick])
        self.quad_counts = tuple(x.shape[-1] for x in xis)
        nq = int(np.prod(self.quad_counts))
        which = np.unravel_index(np.arange(nq), self.quad_counts)
        self.xi = np.stack([x[:, which[d]] for d, x in enumerate(xis)], axis=-1)
        qw = wts[0]
        for w in wts[1:]:
            qw = (qw[:, :, None] * w[:, None, :]).reshape(len(qw), -1)
        self.quad_weights = qw

        self.shapes, md = shape_bundle(patch, rows, self.geometry_ids, self.nderiv)
        self.x = md.x
        self.jw = np.abs(md.det) * qw

        self._pattern = None
        self._positions = None
        self._plans: Dict[Tuple[str, Tuple[int, ...], int], List[WorkerPlan]] = {}
        whi(
            f"Discretized {space}: {self.element_count} elements, "
            f"{nq} points each, {space.dof_count} dofs"
        )

    @property
    def element_count(self) -> int:
        return len(self.elements)

    @property
    def nq(self) -> int:
        return self.xi.shape[1]

    @property
    def nen(self) -> int:
        return self.nodes.shape[1]

    @property
    def dof_per_node(self) -> int:
        return self.space.dof_per_node

    @property
    def dof_count(self) -> int:
        return self.space.dof_count

    def element_shape(self, e: Int) -> ShapeBundle:
        return self.shapes[int(e)]

    def pattern(self) -> sp.csr_matrix:
        "preallocated CSR template, built once"
        if self._pattern is None:
            self._pattern = preallocate(self.space)
        return self._pattern

    def csr_positions(self) -> np.ndarray:
        """
        Position in the CSR data array of every (row, column) pair of every
        element matrix, shape (ne, nd * nd).
        """
        if self._positions is None:
            K = self.pattern()
            n = K.shape[0]
            rows = np.repeat(np.arange(n, dtype=np.int64), np.diff(K.indptr))
            keys = rows * n + K.indices.astype(np.int64)
            d = self.dofs.astype(np.int64)
            query = (d[:, :, None] * n + d[:, None, :]).reshape(len(d), -1)
            pos = np.searchsorted(keys, query)
            clipped = np.minimum(pos, len(keys) - 1)
            bad = (pos >= len(keys)) | (keys[clipped] != query)
            if np.any(bad):
                e, k = np.argwhere(bad)[0]
                raise PreallocationViolation(int(query[e, k] // n), int(query[e, k] % n))
            self._positions = pos
        return self._positions

    def vector_plans(self, part: Partition) -> List[WorkerPlan]:
        key = ("vector", part.grid, part.worker_count)
        if key not in self._plans:
            owner = part.dof_owner(self.dof_per_node)
            self._plans[key] = [
                self._plan(part, rank, self.dofs, lambda t: owner[t] == rank)
                for rank in range(part.worker_count)
            ]
        return self._plans[key]

    def matrix_plans(self, part: Partition) -> List[WorkerPlan]:
        key = ("matrix", part.grid, part.worker_count)
        if key not in self._plans:
            owner = part.dof_owner(self.dof_per_node)
            K = self.pattern()
            row_of = np.repeat(np.arange(K.shape[0]), np.diff(K.indptr))
            positions = self.csr_positions()
            self._plans[key] = [
                self._plan(part, rank, positions, lambda t: owner[row_of[t]] == rank)
                for rank in range(part.worker_count)
            ]
        return self._plans[key]

    def _plan(
        self, part: Partition, rank: int, per_element: np.ndarray, is_owned: Callable
    ) -> WorkerPlan:
        if part.element_counts != self.space.element_counts:
            raise ContractError("Partition was built for another space")
        elems = part.worker_elements(rank)
        touched = per_element[elems]
        targets = np.unique(touched)
        slots = np.searchsorted(targets, touched)
        return WorkerPlan(
            rank=rank,
            elements=elems,
            targets=targets,
            slots=slots,
            owned=np.asarray(is_owned(targets), dtype=bool),
        )


@optional_typecheck
class PartitionedVector:
    """
    Globally indexed vector with per-worker ghosted views covering every
    dof the worker's elements touch.
    """

    def __init__(
        self,
        disc: Discretization,
        part: Partition,
        values: Optional[np.ndarray] = None,
    ) -> None:
        self.disc = disc
        self.partition = part
        if values is None:
            values = np.zeros(disc.dof_count)
        values = np.array(values, dtype=float).ravel()
        if len(values) != disc.dof_count:
            raise ContractError(f"Expected {disc.dof_count} values, got {len(values)}")
        self.values = values

    @property
    def plans(self) -> List[WorkerPlan]:
        return self.disc.vector_plans(self.partition)

    def owned(self, rank: Int) -> np.ndarray:
        return self.partition.owned_dofs(rank, self.disc.dof_per_node)

    def local(self, rank: Int) -> np.ndarray:
        return self.values[self.plans[int(rank)].targets]


@optional_typecheck
def scatter_local(pv: PartitionedVector) -> List[np.ndarray]:
    "per-worker ghosted copies of the current global values"
    return [pv.values[plan.targets] for plan in pv.plans]


def _as_global(U: Union[None, np.ndarray, PartitionedVector], size: int) -> np.ndarray:
    if U is None:
        return np.zeros(size)
    if isinstance(U, PartitionedVector):
        return U.values
    U = np.asarray(U, dtype=float)
    if U.shape != (size,):
        raise ContractError(f"Expected a vector of {size} values, got shape {U.shape}")
    return U


def _as_partitioned(
    U: Union[None, np.ndarray, PartitionedVector], disc: Discretization, part: Partition
) -> PartitionedVector:
    if isinstance(U, PartitionedVector) and U.disc is disc and U.partition is part:
        return U
    return PartitionedVector(disc, part, _as_global(U, disc.dof_count))


_backend = {"name": ISOPATCH_PARALLEL_BACKEND}


@contextmanager
def assembly_backend(name: str) -> Iterator[str]:
    "run the worker loops on another joblib backend inside the block"
    if name not in BACKENDS:
        raise ParameterError(f"Unknown parallel backend '{name}', expected one of {BACKENDS}")
    previous = _backend["name"]
    _backend["name"] = name
    try:
        yield name
    finally:
        _backend["name"] = previous


def _merge(size: int, plans: List[WorkerPlan], local: List[np.ndarray]) -> np.ndarray:
    out = np.zeros(size)
    caches = []
    for plan, values in zip(plans, local):
        out[plan.targets[plan.owned]] = values[plan.owned]
        caches.append(
            ContributionCache(plan.rank, plan.targets[~plan.owned], values[~plan.owned])
        )
    for cache in caches:
        cache.flush(out)
    return out


def _element_integral(
    disc: Discretization,
    integrand: Callable,
    e: int,
    Ue: np.ndarray,
    fields: Dict[str, np.ndarray],
    t: Optional[float],
    size: int,
) -> np.ndarray:
    "sum over the element's points of integrand * J_q * w_q, flattened"
    shapes = disc.shapes[e]
    if is_batched(integrand):
        point = PointData(
            x=disc.x[e], xi=disc.xi[e], weight=disc.jw[e],
            element=e, index=None, fields=fields, t=t,
        )
        out = np.asarray(integrand(shapes, Ue, point), dtype=float)
        if out.size != disc.nq * size:
            raise AssemblyError(
                f"Batched integrand returned shape {out.shape} on element {e}, "
                f"expected {disc.nq} x {size} values"
            )
        out = out.reshape(disc.nq, size)
    else:
        out = np.empty((disc.nq, size))
        for q in range(disc.nq):
            point = PointData(
                x=disc.x[e, q], xi=disc.xi[e, q], weight=float(disc.jw[e, q]),
                element=e, index=q, fields={k: v for k, v in fields.items()}, t=t,
            )
            value = np.asarray(integrand(shapes[q], Ue, point), dtype=float)
            if value.size != size:
                raise AssemblyError(
                    f"Integrand returned shape {value.shape} on element {e} point {q}, "
                    f"expected {size} values"
                )
            out[q] = value.ravel()
    if not np.all(np.isfinite(out)):
        q = int(np.argwhere(~np.isfinite(out))[0][0])
        raise AssemblyError(
            f"Non finite integrand value on element {e} "
            f"{tuple(int(i) for i in disc.elements[e])} at quadrature point {q} "
            f"x={disc.x[e, q].tolist()}"
        )
    return disc.jw[e] @ out


def _worker_loop(
    disc: Discretization,
    plan: WorkerPlan,
    gather: np.ndarray,
    integrand: Callable,
    U_local: np.ndarray,
    fields_local: Dict[str, np.ndarray],
    t: Optional[float],
    size: int,
) -> np.ndarray:
    "integrate the worker's elements reading only its ghosted local views"
    local = np.zeros(len(plan.targets))
    shape = (disc.nen, disc.dof_per_node)
    for i, e in enumerate(
        tqdm(
            plan.elements,
            desc=f"Worker {plan.rank}",
            unit="element",
            disable=not is_verbose or is_piped,
            position=plan.rank,
            leave=False,
        )
    ):
        fe = _element_integral(
            disc,
            integrand,
            int(e),
            U_local[gather[i]].reshape(shape),
            {k: v[gather[i]].reshape(shape) for k, v in fields_local.items()},
            t,
            size,
        )
        np.add.at(local, plan.slots[i], fe)
    return local


def _assemble(
    disc: Discretization,
    part: Partition,
    plans: List[WorkerPlan],
    integrand: Callable,
    U: Union[None, np.ndarray, PartitionedVector],
    fields: Optional[Mapping[str, Any]],
    t: Optional[float],
    size: int,
) -> List[np.ndarray]:
    "fill every worker's local views then run the worker loops"
    views = scatter_local(_as_partitioned(U, disc, part))
    field_views = {
        k: scatter_local(_as_partitioned(v, disc, part)) for k, v in (fields or {}).items()
    }
    # element order of the vector plans matches every other plan of the partition
    gathers = disc.vector_plans(part)
    jobs = [
        (
            disc, plan, gathers[plan.rank].slots, integrand, views[plan.rank],
            {k: v[plan.rank] for k, v in field_views.items()}, t, size,
        )
        for plan in plans
    ]
    if len(jobs) == 1:
        return [_worker_loop(*jobs[0])]
    return Parallel(
        n_jobs=len(jobs),
        backend=_backend["name"],
        verbose=0,
    )(delayed(_worker_loop)(*job) for job in jobs)


@optional_typecheck
def form_vector(
    disc: Discretization,
    part: Partition,
    integrand: Callable,
    U: Union[None, np.ndarray, PartitionedVector] = None,
    fields: Optional[Mapping[str, Any]] = None,
    t: Optional[Real] = None,
) -> np.ndarray:
    """
    Assemble F_A = sum_e sum_q integrand(shape_q, U_e, point_q)_A J_q w_q.
    The integrand returns (nen, dof) values (or the flattened equivalent),
    with a leading point axis when marked ``batched``.
    """
    plans = disc.vector_plans(part)
    size = disc.nen * disc.dof_per_node
    t = None if t is None else float(t)
    local = _assemble(disc, part, plans, integrand, U, fields, t, size)
    return _merge(disc.dof_count, plans, local)


@optional_typecheck
def form_matrix(
    disc: Discretization,
    part: Partition,
    integrand: Callable,
    U: Union[None, np.ndarray, PartitionedVector] = None,
    fields: Optional[Mapping[str, Any]] = None,
    t: Optional[Real] = None,
) -> sp.csr_matrix:
    """
    Assemble K_AB into the preallocated pattern. The integrand returns
    (nen, dof, nen, dof) values (or (nd, nd)), test function first.
    """
    plans = disc.matrix_plans(part)
    nd = disc.nen * disc.dof_per_node
    t = None if t is None else float(t)
    K = disc.pattern()
    local = _assemble(disc, part, plans, integrand, U, fields, t, nd * nd)
    out = K.copy()
    out.data = _merge(len(K.data), plans, local)
    return out


def _normalise_bc(
    bc: Union[Mapping[Any, Any], Sequence[Any], Tuple[np.ndarray, np.ndarray]],
    n: int,
) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(bc, Mapping):
        pairs = list(bc.items())
    elif isinstance(bc, tuple) and len(bc) == 2 and isinstance(bc[0], np.ndarray):
        pairs = list(zip(bc[0].tolist(), np.asarray(bc[1], dtype=float).tolist()))
    else:
        pairs = [tuple(p) for p in bc]
    values: Dict[int, float] = {}
    for dof, value in pairs:
        dof, value = int(dof), float(value)
        if not 0 <= dof < n:
            raise ParameterError(f"Boundary condition on dof {dof} outside of 0..{n - 1}")
        if dof in values and values[dof] != value:
            raise ParameterError(
                f"Conflicting boundary values for dof {dof}: {values[dof]} and {value}"
            )
        values[dof] = value
    dofs = np.array(sorted(values), dtype=int)
    return dofs, np.array([values[d] for d in dofs], dtype=float)


@optional_typecheck
def apply_dirichlet(
    K: sp.csr_matrix,
    F: np.ndarray,
    bc: Union[Mapping[Any, Any], Sequence[Any], Tuple[np.ndarray, np.ndarray]],
) -> Tuple[sp.csr_matrix, np.ndarray]:
    """
    Symmetric elimination of prescribed values. The sparsity pattern is
    kept: eliminated entries become explicit zeros.
    """
    n = K.shape[0]
    dofs, values = _normalise_bc(bc, n)
    K = K.copy()
    F = np.array(F, dtype=float)
    if not len(dofs):
        return K, F
    g = np.zeros(n)
    g[dofs] = values
    F -= K @ g
    fixed = np.zeros(n, dtype=bool)
    fixed[dofs] = True
    rows = np.repeat(np.arange(n), np.diff(K.indptr))
    K.data[fixed[rows] | fixed[K.indices]] = 0.0
    diag = np.flatnonzero(fixed[rows] & (rows == K.indices))
    if len(diag) != len(dofs):
        raise ContractError("Constrained rows without a diagonal entry in the pattern")
    K.data[diag] = 1.0
    F[dofs] = values
    return K, F


@optional_typecheck
def project_dirichlet(
    disc: Discretization,
    faces: Sequence[Tuple[Int, Int]],
    g: Callable,
    components: Optional[Sequence[Int]] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Dirichlet values by L2 projection of g (a function of the physical
    point returning one value per constrained component) onto the trace
    space of each face. Nodes shared by several faces keep the value of
    the first face listed.
    """
    space, patch = disc.space, disc.patch
    comps = list(range(space.dof_per_node)) if components is None else [int(c) for c in components]
    found: Dict[int, float] = {}
    for axis, side in faces:
        axis, side = int(axis), int(side)
        bnodes = boundary_nodes(space, axis, side)
        lookup = {int(n): i for i, n in enumerate(bnodes)}
        M = np.zeros((len(bnodes), len(bnodes)))
        b = np.zeros((len(bnodes), len(comps)))
        ax = space.axes[axis]
        fixed = ax.domain[side]
        others = [d for d in range(space.dim) if d != axis]
        element_ranges = [range(space.axes[d].element_count) for d in others]
        for face_elem in product(*element_ranges):
            rules = [axis_quadrature(space.axes[d], j) for d, j in zip(others, face_elem)]
            for pts in product(*(zip(*r) for r in rules)):
                xi = [0.0] * space.dim
                xi[axis] = fixed
                w = 1.0
                for d, (x, wq) in zip(others, pts):
                    xi[d] = float(x)
                    w *= float(wq)
                ev = eval_point(space, patch, xi, 1)
                if others:
                    Jt = ev.dx[:, others]
                    w *= float(np.sqrt(np.linalg.det(Jt.T @ Jt)))
                keep = [i for i, n in enumerate(ev.nodes) if int(n) in lookup]
                idx = [lookup[int(ev.nodes[i])] for i in keep]
                vals = ev.shape.values[keep]
                gx = np.broadcast_to(np.asarray(g(ev.x), dtype=float), (len(comps),))
                M[np.ix_(idx, idx)] += w * np.outer(vals, vals)
                b[idx] += w * np.outer(vals, gx)
        coeffs = np.linalg.solve(M, b)
        for i, node in enumerate(bnodes):
            for j, c in enumerate(comps):
                found.setdefault(int(node) * space.dof_per_node + c, float(coeffs[i, j]))
    dofs = np.array(sorted(found), dtype=int)
    return dofs, np.array([found[d] for d in dofs])


@optional_typecheck
def load_report(disc: Discretization, part: Partition, show: bool = True) -> List[Dict[str, Any]]:
    "per-worker element and dof counts with the dof imbalance"
    plans = disc.vector_plans(part)
    rows = []
    for plan in plans:
        owned = int(plan.owned.sum())
        rows.append(
            dict(
                rank=plan.rank,
                elements=len(plan.elements),
                owned=owned,
                ghosted=len(plan.targets),
                cached=len(plan.targets) - owned,
            )
        )
    owned = np.array([r["owned"] for r in rows], dtype=float)
    imbalance = float(owned.max() / owned.mean()) if owned.mean() > 0 else 1.0
    for r in rows:
        r["imbalance"] = imbalance
    if show:
        table_printer(
            f"Load report, {part.worker_count} workers on grid {part.grid} (imbalance {imbalance:.3f})",
            ["rank", "elements", "owned dofs", "local dofs", "cached dofs"],
            [
                [str(r["rank"]), str(r["elements"]), str(r["owned"]), str(r["ghosted"]), str(r["cached"])]
                for r in rows
            ],
        )
    return rows


@optional_typecheck
def field_at_points(disc: Discretization, U: np.ndarray, order: Int = 0) -> np.ndarray:
    """
    Values (order 0) or spatial gradients (order 1) of a discrete field at
    every quadrature point: (ne, nq, dof) or (ne, nq, dof, dim).
    """
    Ue = np.asarray(U, dtype=float)[disc.dofs].reshape(
        disc.element_count, disc.nen, disc.dof_per_node
    )
    if order == 0:
        return np.einsum("eqa,eac->eqc", disc.shapes.values, Ue)
    if order == 1:
        if disc.shapes.grad is None:
            raise ContractError("Discretization holds no gradients")
        return np.einsum("eqai,eac->eqci", disc.shapes.grad, Ue)
    raise ParameterError(f"Only orders 0 and 1 are available, not {order}")


@optional_typecheck
def integrate(disc: Discretization, values: np.ndarray) -> float:
    "sum of J_q w_q * values over all quadrature points, values shaped (ne, nq)"
    return float(np.sum(disc.jw * values))
