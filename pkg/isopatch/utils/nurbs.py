"""
Tensor-product B-spline tables and their rational (NURBS) counterparts.

Every array here may carry leading batch axes (quadrature points, elements)
in front of the local function axis, so a whole element can be evaluated
in one call.
"""

from dataclasses import dataclass
from itertools import combinations_with_replacement, permutations

import numpy as np
from beartype.typing import Optional, Sequence, Tuple

from .errors import ContractError, DegenerateConfigurationError, ParameterError
from .typechecker import Int, optional_typecheck


@optional_typecheck
def mirror_symmetric(block: np.ndarray, nidx: Int) -> np.ndarray:
    """
    Copy the entry stored at the sorted index combination of the last
    ``nidx`` axes to every permutation of it. The result is exactly
    symmetric.
    """
    dim = block.shape[-1]
    out = np.empty_like(block)
    for combo in combinations_with_replacement(range(dim), int(nidx)):
        value = block[(Ellipsis,) + combo]
        for perm in set(permutations(combo)):
            out[(Ellipsis,) + perm] = value
    return out


def _orders(combo: Tuple[int, ...], dim: int) -> Tuple[int, ...]:
    "per-axis derivative orders of a parametric index combination"
    return tuple(combo.count(d) for d in range(dim))


@optional_typecheck
@dataclass(frozen=True, eq=False)
class TensorBasis:
    "M_A and its parametric derivatives; local functions in C order"

    values: np.ndarray
    d1: Optional[np.ndarray] = None
    d2: Optional[np.ndarray] = None
    d3: Optional[np.ndarray] = None

    @property
    def dim(self) -> int:
        if self.d1 is None:
            raise ContractError("Dimension is unknown without first derivatives")
        return self.d1.shape[-1]

    @property
    def nderiv(self) -> int:
        return sum(x is not None for x in (self.d1, self.d2, self.d3))


@optional_typecheck
def tensor_basis(axis_rows: Sequence[np.ndarray], nderiv: Int) -> TensorBasis:
    """
    Build tensor-product tables from per-axis rows.

    ``axis_rows[d]`` has shape (..., nderiv+1, nq_d, nen_d): derivative order,
    axis quadrature point, axis local function. Points and functions of the
    result are both in C order (last axis fastest), giving arrays of shape
    (..., nq, nen[, dim...]).
    """
    dim = len(axis_rows)
    if not 1 <= dim <= 3:
        raise ParameterError(f"Only 1 to 3 parametric dimensions are supported, not {dim}")
    for rows in axis_rows:
        if rows.shape[-3] <= nderiv:
            raise ContractError(
                f"Axis tables hold {rows.shape[-3] - 1} derivatives, {nderiv} requested"
            )

    def product(orders: Tuple[int, ...]) -> np.ndarray:
        out = axis_rows[0][..., orders[0], :, :]
        for rows, o in zip(axis_rows[1:], orders[1:]):
            r = rows[..., o, :, :]
            out = out[..., :, None, :, None] * r[..., None, :, None, :]
            out = out.reshape(out.shape[:-4] + (out.shape[-4] * out.shape[-3], -1))
        return out

    values = product((0,) * dim)
    blocks = []
    for order in range(1, int(nderiv) + 1):
        block = np.empty(values.shape + (dim,) * order)
        for combo in combinations_with_replacement(range(dim), order):
            value = product(_orders(combo, dim))
            for perm in set(permutations(combo)):
                block[(Ellipsis,) + perm] = value
        blocks.append(block)
    blocks += [None] * (3 - len(blocks))
    return TensorBasis(values, *blocks)


@optional_typecheck
@dataclass(frozen=True, eq=False)
class RationalTable:
    values: np.ndarray
    d1: Optional[np.ndarray]
    d2: Optional[np.ndarray]
    d3: Optional[np.ndarray]
    weight_value: np.ndarray
    weight_derivs: Tuple[Optional[np.ndarray], ...]

    @property
    def nderiv(self) -> int:
        return sum(x is not None for x in (self.d1, self.d2, self.d3))


@optional_typecheck
def eval_rational(
    bspline: TensorBasis, weights: np.ndarray, nderiv: Int
) -> RationalTable:
    """
    Rational functions R_A = w_A M_A / w and their parametric derivatives up
    to third order. Each derivative order reuses the lower order R values:

        R_{A,a}   = (w_A M_{A,a} - R_A w_{,a}) / w
        R_{A,ab}  = (w_A M_{A,ab} - R_{A,a} w_{,b} - R_{A,b} w_{,a} - R_A w_{,ab}) / w
        R_{A,abc} = (w_A M_{A,abc} - sum over the 3 splits of R_{A,..} w_{,..}
                     - R_A w_{,abc}) / w

    ``weights`` must broadcast against ``bspline.values``.
    """
    nderiv = int(nderiv)
    if nderiv > bspline.nderiv:
        raise ContractError(
            f"B-spline table holds {bspline.nderiv} derivative orders, {nderiv} requested"
        )
    weights = np.asarray(weights, dtype=float)
    if np.any(weights <= 0):
        raise ParameterError("NURBS weights must be strictly positive")
    M = bspline.values
    W = np.sum(weights * M, axis=-1)
    if np.any(W <= 0):
        raise DegenerateConfigurationError(f"Weighting function w(xi) <= 0 (min {W.min()})")
    wr = W[..., None]
    R = weights * M / wr

    if nderiv == 0:
        return RationalTable(R, None, None, None, W, (None, None, None))

    dim = bspline.dim
    wA1 = weights[..., None]
    W1 = np.einsum("...a,...ai->...i", weights, bspline.d1)
    R1 = (wA1 * bspline.d1 - R[..., None] * W1[..., None, :]) / wr[..., None]
    R2 = R3 = W2 = W3 = None

    if nderiv >= 2:
        M2 = bspline.d2
        W2 = np.einsum("...a,...aij->...ij", weights, M2)
        R2 = np.empty(M2.shape)
        for a, b in combinations_with_replacement(range(dim), 2):
            value = (
                weights * M2[..., a, b]
                - R1[..., a] * W1[..., None, b]
                - R1[..., b] * W1[..., None, a]
                - R * W2[..., None, a, b]
            ) / wr
            R2[..., a, b] = value
            R2[..., b, a] = value

    if nderiv >= 3:
        M3 = bspline.d3
        W3 = np.einsum("...a,...aijk->...ijk", weights, M3)
        R3 = np.empty(M3.shape)
        for a, b, c in combinations_with_replacement(range(dim), 3):
            value = (
                weights * M3[..., a, b, c]
                - R2[..., a, b] * W1[..., None, c]
                - R2[..., a, c] * W1[..., None, b]
                - R2[..., b, c] * W1[..., None, a]
                - R1[..., a] * W2[..., None, b, c]
                - R1[..., b] * W2[..., None, a, c]
                - R1[..., c] * W2[..., None, a, b]
                - R * W3[..., None, a, b, c]
            ) / wr
            for perm in set(permutations((a, b, c))):
                R3[(Ellipsis,) + perm] = value

    return RationalTable(R, R1, R2, R3, W, (W1, W2, W3))
