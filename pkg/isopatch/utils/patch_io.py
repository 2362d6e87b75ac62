"""
Patch files, field output and matrix dumps.

A patch file is JSON text:

    {
      "dim": 2,
      "degrees": [2, 2],
      "knots": [[0, 0, 0, 1, 1, 1], [0, 0, 0, 1, 1, 1]],
      "periodic": [false, false],
      "continuity": [null, null],
      "dof_per_node": 1,
      "points": [[x*w, y*w, w], ...]
    }

``knots`` are the clamped knot vectors, ``continuity`` the seam continuity
of periodic axes and ``points`` the homogeneous control net raveled in C
order (last axis fastest), paired with the active (unclamped on periodic
axes) knot vectors.
"""

import json
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from beartype.typing import List, Optional, Tuple, Union
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from scipy.io import mmread, mmwrite

from .env import ISOPATCH_VTK_RESOLUTION
from .errors import ContractError, IsopatchError, PatchFileError
from .geometry import NurbsPatch
from .logger import whi
from .space import AxisSpec, TensorSpace, build_space, check_isoparametric, node_dofs, sample_lattice
from .typechecker import Int, optional_typecheck


class PatchFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dim: int = Field(ge=1, le=3)
    degrees: List[int]
    knots: List[List[float]]
    periodic: Optional[List[bool]] = None
    continuity: Optional[List[Optional[int]]] = None
    dof_per_node: int = Field(default=1, ge=1)
    points: List[List[float]]

    @model_validator(mode="after")
    def check_invariants(self) -> "PatchFile":
        dim = self.dim
        for name in ("degrees", "knots", "periodic", "continuity"):
            value = getattr(self, name)
            if value is not None and len(value) != dim:
                raise ValueError(f"'{name}' has {len(value)} entries for dim={dim}")
        counts = []
        for d, (p, kv) in enumerate(zip(self.degrees, self.knots)):
            if p < 0:
                raise ValueError(f"degrees[{d}] must be >= 0, not {p}")
            steps = np.diff(kv)
            if np.any(steps < 0):
                bad = int(np.flatnonzero(steps < 0)[0])
                raise ValueError(
                    f"knots[{d}] is not non-decreasing: knots[{d}][{bad}]={kv[bad]} > "
                    f"knots[{d}][{bad + 1}]={kv[bad + 1]}"
                )
            counts.append(len(kv) - p - 1)
            if counts[-1] < p + 1:
                raise ValueError(f"knots[{d}] has {len(kv)} entries, too few for degree {p}")
        expected = int(np.prod(counts))
        if len(self.points) != expected:
            raise ValueError(
                f"'points' holds {len(self.points)} control points, expected {expected} for counts {tuple(counts)}"
            )
        for i, pt in enumerate(self.points):
            if len(pt) != dim + 1:
                raise ValueError(f"points[{i}] has {len(pt)} coordinates, expected {dim + 1}")
            if not np.all(np.isfinite(pt)):
                raise ValueError(f"points[{i}] is not finite")
            if pt[-1] <= 0:
                raise ValueError(f"points[{i}] has a non positive weight {pt[-1]}")
        if self.periodic and any(self.periodic):
            cont = self.continuity or [None] * dim
            for d, (per, k) in enumerate(zip(self.periodic, cont)):
                if per and k is None:
                    raise ValueError(f"continuity[{d}] is required for the periodic axis {d}")
        return self

    @property
    def counts(self) -> Tuple[int, ...]:
        return tuple(len(kv) - p - 1 for p, kv in zip(self.degrees, self.knots))


def _error_context(err: ValidationError, text: str) -> str:
    lines = []
    for e in err.errors():
        where = ".".join(str(x) for x in e.get("loc", ())) or "<root>"
        lines.append(f"{where}: {e.get('msg')}")
    if err.error_count() and err.errors()[0].get("type") == "json_invalid":
        try:
            json.loads(text)
        except json.JSONDecodeError as jerr:
            lines.append(f"line {jerr.lineno} column {jerr.colno}: {jerr.msg}")
    return "; ".join(lines)


@optional_typecheck
def parse_patch(text: str, source: str = "<string>") -> Tuple[TensorSpace, NurbsPatch]:
    try:
        model = PatchFile.model_validate_json(text)
    except ValidationError as err:
        raise PatchFileError(f"Invalid patch file {source}: {_error_context(err, text)}") from err
    periodic = model.periodic or [False] * model.dim
    cont = model.continuity or [None] * model.dim
    try:
        specs = [
            AxisSpec(
                degree=p,
                knots=tuple(kv),
                periodic=per,
                continuity=0 if k is None else k,
                periodic_continuity=k,
            )
            for p, kv, per, k in zip(model.degrees, model.knots, periodic, cont)
        ]
        space = build_space(specs, model.dof_per_node)
        points = np.array(model.points, dtype=float).reshape(model.counts + (model.dim + 1,))
        patch = NurbsPatch(points)
        check_isoparametric(space, patch)
    except IsopatchError as err:
        raise PatchFileError(f"Invalid patch file {source}: {err}") from err
    return space, patch


@optional_typecheck
def read_patch(path: Union[str, Path]) -> Tuple[TensorSpace, NurbsPatch]:
    path = Path(path)
    if not path.exists():
        raise PatchFileError(f"Patch file not found: '{path}'")
    space, patch = parse_patch(path.read_text(), str(path))
    whi(f"Loaded {space} from '{path}'")
    return space, patch


@optional_typecheck
def dump_patch(space: TensorSpace, patch: NurbsPatch) -> str:
    check_isoparametric(space, patch)
    model = PatchFile(
        dim=space.dim,
        degrees=list(space.degrees),
        knots=[ax.clamped.knots.tolist() for ax in space.axes],
        periodic=list(space.periodic),
        continuity=[ax.k if ax.periodic else None for ax in space.axes],
        dof_per_node=space.dof_per_node,
        points=patch.points.reshape(-1, patch.dim + 1).tolist(),
    )
    return model.model_dump_json(indent=1)


@optional_typecheck
def write_patch(space: TensorSpace, patch: NurbsPatch, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_patch(space, patch))
    return path


def _axis_samples(space: TensorSpace, resolution: int) -> List[np.ndarray]:
    out = []
    for ax in space.axes:
        knots = ax.knots.knots
        parts = [
            np.linspace(knots[s], knots[s + 1], resolution + 1)[:-1] for s in ax.spans
        ]
        parts.append(np.array([ax.domain[1]]))
        out.append(np.concatenate(parts))
    return out


@optional_typecheck
def write_vtk(
    space: TensorSpace,
    patch: NurbsPatch,
    U: np.ndarray,
    path: Union[str, Path],
    name: str = "u",
    resolution: Optional[Int] = None,
) -> Path:
    """
    Legacy ASCII VTK structured grid of a field sampled on a uniform
    parametric lattice (``resolution`` intervals per element and axis),
    mapped through the patch.
    """
    U = np.asarray(U, dtype=float).ravel()
    if len(U) != space.dof_count:
        raise ContractError(f"Field has {len(U)} values, the space {space.dof_count} dofs")
    dof = space.dof_per_node
    if dof > 3:
        raise ContractError(f"Can't write fields with {dof} components to VTK")
    res = int(resolution or ISOPATCH_VTK_RESOLUTION)
    coords = _axis_samples(space, res)
    ev = sample_lattice(space, patch, coords)
    npts = len(ev.x)
    Ue = U[node_dofs(space, ev.nodes)].reshape(npts, -1, dof)
    values = np.einsum("na,nac->nc", ev.shape.values, Ue)

    dims = [len(c) for c in coords] + [1] * (3 - space.dim)
    xyz = np.zeros((npts, 3))
    xyz[:, : space.dim] = ev.x
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as f:
        f.write("# vtk DataFile Version 3.0\n")
        f.write(f"isopatch field {name}\n")
        f.write("ASCII\n")
        f.write("DATASET STRUCTURED_GRID\n")
        f.write(f"DIMENSIONS {dims[0]} {dims[1]} {dims[2]}\n")
        f.write(f"POINTS {npts} double\n")
        np.savetxt(f, xyz, fmt="%.17g")
        f.write(f"POINT_DATA {npts}\n")
        if dof == 1:
            f.write(f"SCALARS {name} double 1\n")
            f.write("LOOKUP_TABLE default\n")
            np.savetxt(f, values, fmt="%.17g")
        else:
            vec = np.zeros((npts, 3))
            vec[:, :dof] = values
            f.write(f"VECTORS {name} double\n")
            np.savetxt(f, vec, fmt="%.17g")
    whi(f"Wrote {npts} points to '{path}'")
    return path


@optional_typecheck
def write_matrix(K: sp.spmatrix, path: Union[str, Path], comment: str = "") -> Path:
    "matrix market dump, explicit zeros of the pattern included"
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mmwrite(str(path), sp.coo_matrix(K), comment=comment)
    return path


@optional_typecheck
def read_matrix(path: Union[str, Path]) -> sp.csr_matrix:
    return sp.csr_matrix(mmread(str(path)))


@optional_typecheck
def write_vector(values: np.ndarray, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.asarray(values, dtype=float), fmt="%.17g")
    return path
