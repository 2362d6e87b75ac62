"""
Isoparametric geometric map: physical points, Jacobians, derivatives of the
inverse map up to third order and the push-forward of rational basis
derivatives to physical coordinates.

Index conventions (trailing axes, after any batch axes):
    dx[i, a]        x_{i,a}
    dx2[i, a, b]    x_{i,ab}
    dxi[a, i]       xi_{a,i}
    dxi2[a, i, j]   xi_{a,ij}
    grad[A, i]      R_{A,i}
"""

from dataclasses import dataclass, replace

import numpy as np
from beartype.typing import Optional, Tuple

from .env import ISOPATCH_SINGULAR_RTOL
from .errors import ContractError, ParameterError, SingularMappingError
from .nurbs import RationalTable, mirror_symmetric
from .typechecker import Int, optional_typecheck


@optional_typecheck
@dataclass(frozen=True, eq=False)
class NurbsPatch:
    """
    Control net stored in homogeneous coordinates: ``points[..., :dim]`` holds
    x_B * w_B and ``points[..., dim]`` holds w_B, indexed by the tensor
    multi-index of the clamped basis.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        dim = pts.ndim - 1
        if not 1 <= dim <= 3 or pts.shape[-1] != dim + 1:
            raise ParameterError(
                f"Expected a homogeneous control net of shape (n_1, .., n_d, d+1), got {pts.shape}"
            )
        if not np.all(np.isfinite(pts)):
            raise ParameterError("Control net contains non finite values")
        if np.any(pts[..., -1] <= 0):
            raise ParameterError("NURBS weights must be strictly positive")

    @classmethod
    def from_ctrl(cls, ctrl: np.ndarray, weights: Optional[np.ndarray] = None) -> "NurbsPatch":
        ctrl = np.asarray(ctrl, dtype=float)
        if weights is None:
            weights = np.ones(ctrl.shape[:-1])
        weights = np.asarray(weights, dtype=float)
        if weights.shape != ctrl.shape[:-1]:
            raise ParameterError(
                f"Weights of shape {weights.shape} don't match control points {ctrl.shape}"
            )
        if np.any(weights <= 0):
            raise ParameterError("NURBS weights must be strictly positive")
        return cls(np.concatenate([ctrl * weights[..., None], weights[..., None]], axis=-1))

    @property
    def dim(self) -> int:
        return self.points.ndim - 1

    @property
    def counts(self) -> Tuple[int, ...]:
        return tuple(self.points.shape[:-1])

    @property
    def weights(self) -> np.ndarray:
        return self.points[..., -1]

    @property
    def ctrl(self) -> np.ndarray:
        return self.points[..., :-1] / self.points[..., -1:]

    def flat_ctrl(self) -> np.ndarray:
        return self.ctrl.reshape(-1, self.dim)

    def flat_weights(self) -> np.ndarray:
        return self.weights.ravel()


@optional_typecheck
@dataclass(frozen=True, eq=False)
class MapDerivatives:
    x: np.ndarray
    dx: np.ndarray
    det: np.ndarray
    dxi: np.ndarray
    dx2: Optional[np.ndarray] = None
    dx3: Optional[np.ndarray] = None
    dxi2: Optional[np.ndarray] = None
    dxi3: Optional[np.ndarray] = None


@optional_typecheck
@dataclass(frozen=True, eq=False)
class ShapeBundle:
    "basis values and spatial derivatives at one or several points"

    values: np.ndarray
    grad: Optional[np.ndarray]
    hess: Optional[np.ndarray]
    third: Optional[np.ndarray]
    det: np.ndarray

    @property
    def nderiv(self) -> int:
        return sum(x is not None for x in (self.grad, self.hess, self.third))

    def __getitem__(self, index) -> "ShapeBundle":
        "slice the batch axes"
        return ShapeBundle(
            values=self.values[index],
            grad=None if self.grad is None else self.grad[index],
            hess=None if self.hess is None else self.hess[index],
            third=None if self.third is None else self.third[index],
            det=np.asarray(self.det[index]),
        )


def _inverse(dx: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    "closed form inverse and determinant of batches of 1x1, 2x2 or 3x3 matrices"
    dim = dx.shape[-1]
    if dim == 1:
        det = dx[..., 0, 0].copy()
        cof = np.ones_like(dx)
    elif dim == 2:
        a, b = dx[..., 0, 0], dx[..., 0, 1]
        c, d = dx[..., 1, 0], dx[..., 1, 1]
        det = a * d - b * c
        cof = np.stack([np.stack([d, -b], -1), np.stack([-c, a], -1)], -2)
    else:
        m = dx
        cof = np.empty_like(m)
        for i in range(3):
            for j in range(3):
                r = [k for k in range(3) if k != j]
                c = [k for k in range(3) if k != i]
                minor = (
                    m[..., r[0], c[0]] * m[..., r[1], c[1]]
                    - m[..., r[0], c[1]] * m[..., r[1], c[0]]
                )
                cof[..., i, j] = (-1) ** (i + j) * minor
        det = (
            m[..., 0, 0] * cof[..., 0, 0]
            + m[..., 0, 1] * cof[..., 1, 0]
            + m[..., 0, 2] * cof[..., 2, 0]
        )
    with np.errstate(divide="ignore", invalid="ignore"):
        return cof / det[..., None, None], det


@optional_typecheck
def map_and_jacobian(geometry: np.ndarray, rt: RationalTable) -> MapDerivatives:
    """
    Physical point x = sum_B x_B R_B and Jacobian x_{i,a} = sum_B x_B R_{B,a},
    with its inverse and determinant. ``geometry`` holds the control points
    of the local functions, shape (..., nen, dim), broadcastable against
    ``rt``. Second and third parametric derivatives of the map are filled
    when ``rt`` holds them.
    """
    if rt.d1 is None:
        raise ContractError("The geometric map needs first derivatives of the basis")
    geometry = np.asarray(geometry, dtype=float)
    dim = geometry.shape[-1]
    if rt.d1.shape[-1] != dim:
        raise ContractError(
            f"Parametric dimension {rt.d1.shape[-1]} differs from spatial dimension {dim}"
        )
    x = np.einsum("...a,...ai->...i", rt.values, geometry)
    dx = np.einsum("...aA,...ai->...iA", rt.d1, geometry)
    dxi, det = _inverse(dx)
    scale = np.max(np.abs(dx), axis=(-2, -1)) ** dim
    singular = ~(np.abs(det) > ISOPATCH_SINGULAR_RTOL * scale)
    if np.any(singular):
        where = np.argwhere(singular)[0]
        raise SingularMappingError(
            f"Singular geometric map at batch index {tuple(int(i) for i in where)}: "
            f"det={det[tuple(where)]!r}"
        )
    dx2 = dx3 = None
    if rt.d2 is not None:
        dx2 = mirror_symmetric(np.einsum("...aAB,...ai->...iAB", rt.d2, geometry), 2)
    if rt.d3 is not None:
        dx3 = mirror_symmetric(np.einsum("...aABC,...ai->...iABC", rt.d3, geometry), 3)
    return MapDerivatives(x=x, dx=dx, det=det, dxi=dxi, dx2=dx2, dx3=dx3)


@optional_typecheck
def inverse_map_higher(md: MapDerivatives, order: Int = 2) -> MapDerivatives:
    """
    Second (and third) derivatives of the inverse map, obtained by
    differentiating x_{i,a} xi_{a,j} = delta_ij:

        xi_{v,nl}  = -x_{m,eu} xi_{e,n} xi_{u,l} xi_{v,m}
        xi_{v,nlo} = -x_{m,euz} xi_{z,o} xi_{e,n} xi_{u,l} xi_{v,m}
                     - x_{m,eu} (xi_{e,no} xi_{u,l} xi_{v,m}
                                 + xi_{e,n} xi_{u,lo} xi_{v,m}
                                 + xi_{e,n} xi_{u,l} xi_{v,mo})
    """
    if order not in (2, 3):
        raise ParameterError(f"Inverse map order must be 2 or 3, not {order}")
    if md.dx2 is None or (order == 3 and md.dx3 is None):
        raise ContractError(f"Map derivatives of order {order} are missing")
    xi = md.dxi
    dxi2 = -np.einsum("...meu,...en,...ul,...vm->...vnl", md.dx2, xi, xi, xi)
    dxi2 = mirror_symmetric(dxi2, 2)
    if order == 2:
        return replace(md, dxi2=dxi2)
    dxi3 = -np.einsum("...meuz,...zo,...en,...ul,...vm->...vnlo", md.dx3, xi, xi, xi, xi)
    dxi3 -= np.einsum("...meu,...eno,...ul,...vm->...vnlo", md.dx2, dxi2, xi, xi)
    dxi3 -= np.einsum("...meu,...en,...ulo,...vm->...vnlo", md.dx2, xi, dxi2, xi)
    dxi3 -= np.einsum("...meu,...en,...ul,...vmo->...vnlo", md.dx2, xi, xi, dxi2)
    return replace(md, dxi2=dxi2, dxi3=mirror_symmetric(dxi3, 3))


@optional_typecheck
def push_forward(rt: RationalTable, md: MapDerivatives, nderiv: Int) -> ShapeBundle:
    """
    Spatial derivatives of the rational functions by the chain rule:

        R_{A,i}   = R_{A,a} xi_{a,i}
        R_{A,ij}  = R_{A,ab} xi_{a,i} xi_{b,j} + R_{A,a} xi_{a,ij}
        R_{A,ijk} = R_{A,abc} xi_{a,i} xi_{b,j} xi_{c,k}
                    + R_{A,ab} (xi_{a,ik} xi_{b,j} + xi_{a,i} xi_{b,jk} + xi_{a,ij} xi_{b,k})
                    + R_{A,a} xi_{a,ijk}
    """
    nderiv = int(nderiv)
    if not 0 <= nderiv <= 3:
        raise ParameterError(f"nderiv must be in 0..3, not {nderiv}")
    if rt.nderiv < nderiv:
        raise ContractError(f"Rational table holds {rt.nderiv} orders, {nderiv} requested")
    if nderiv >= 2 and md.dxi2 is None or nderiv >= 3 and md.dxi3 is None:
        raise ContractError(f"Inverse map derivatives up to order {nderiv} are missing")
    xi = md.dxi
    grad = hess = third = None
    if nderiv >= 1:
        grad = np.einsum("...Aa,...ai->...Ai", rt.d1, xi)
    if nderiv >= 2:
        hess = np.einsum("...Aab,...ai,...bj->...Aij", rt.d2, xi, xi)
        hess += np.einsum("...Aa,...aij->...Aij", rt.d1, md.dxi2)
        hess = mirror_symmetric(hess, 2)
    if nderiv >= 3:
        x2 = md.dxi2
        third = np.einsum("...Aabc,...ai,...bj,...ck->...Aijk", rt.d3, xi, xi, xi)
        third += np.einsum("...Aab,...aik,...bj->...Aijk", rt.d2, x2, xi)
        third += np.einsum("...Aab,...ai,...bjk->...Aijk", rt.d2, xi, x2)
        third += np.einsum("...Aab,...aij,...bk->...Aijk", rt.d2, x2, xi)
        third += np.einsum("...Aa,...aijk->...Aijk", rt.d1, md.dxi3)
        third = mirror_symmetric(third, 3)
    return ShapeBundle(values=rt.values, grad=grad, hess=hess, third=third, det=md.det)
