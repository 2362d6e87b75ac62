"""
1D B-spline kernel: knot vectors, span search, basis functions and their
derivatives, unclamping of knot vectors and curves, and basis stencils
(the 1D adjacency graph).

All indices are 0-based. Knot equality tests are exact float comparisons,
so repeated knots must be bitwise identical (see uniform_knots).
"""

from dataclasses import dataclass, field

import numpy as np
from beartype.typing import List, Optional, Tuple, Union

from .errors import (
    BasisIndexError,
    DegenerateConfigurationError,
    DomainError,
    ParameterError,
    PreconditionError,
)
from .typechecker import Int, Real, optional_typecheck


@optional_typecheck
@dataclass(frozen=True, eq=False)
class KnotVector:
    "Non-decreasing knot sequence U[0..m] of a degree p basis with n+1 functions"

    knots: Union[np.ndarray, List[float], Tuple[float, ...]]
    degree: Int

    def __post_init__(self):
        U = np.array(self.knots, dtype=float).ravel()
        U.flags.writeable = False
        object.__setattr__(self, "knots", U)
        object.__setattr__(self, "degree", int(self.degree))
        p = self.degree
        if p < 0:
            raise ParameterError(f"Degree must be >= 0, not {p}")
        if len(U) < 2 * (p + 1):
            raise ParameterError(
                f"A degree {p} knot vector needs at least {2 * (p + 1)} knots, got {len(U)}"
            )
        if not np.all(np.isfinite(U)):
            raise ParameterError("Knot vector contains non finite values")
        if np.any(np.diff(U) < 0):
            raise ParameterError(f"Knots are not non-decreasing: {U.tolist()}")
        _, counts = np.unique(U, return_counts=True)
        if counts.max() > p + 1:
            raise ParameterError(
                f"A knot is repeated {counts.max()} times but degree {p} allows at most {p + 1}"
            )
        if not U[p] < U[len(U) - p - 1]:
            raise ParameterError("Knot vector has an empty parametric domain")

    @property
    def m(self) -> int:
        return len(self.knots) - 1

    @property
    def n(self) -> int:
        "index of the last basis function"
        return self.m - self.degree - 1

    @property
    def basis_count(self) -> int:
        return self.n + 1

    @property
    def domain(self) -> Tuple[float, float]:
        return float(self.knots[self.degree]), float(self.knots[self.n + 1])

    def is_clamped(self) -> bool:
        U, p = self.knots, self.degree
        return bool(np.all(U[: p + 1] == U[0]) and np.all(U[-p - 1 :] == U[-1]))

    def spans(self) -> np.ndarray:
        "indices k of the non-empty spans [U[k], U[k+1]) inside the domain"
        k = np.arange(self.degree, self.n + 1)
        return k[self.knots[k] < self.knots[k + 1]]

    def multiplicity(self, value: Real) -> int:
        return int(np.count_nonzero(self.knots == value))

    def greville(self) -> np.ndarray:
        p = self.degree
        if p == 0:
            return 0.5 * (self.knots[:-1] + self.knots[1:])
        U = self.knots
        return np.array([U[i + 1 : i + p + 1].sum() / p for i in range(self.n + 1)])

    def __repr__(self) -> str:
        return f"KnotVector(p={self.degree}, knots={self.knots.tolist()})"


@optional_typecheck
@dataclass(frozen=True, eq=False)
class BasisTable:
    "The p+1 non-vanishing functions N_{span-p..span} and their derivatives"

    span: int
    values: np.ndarray
    derivs: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    @property
    def first(self) -> int:
        "index of the first non-vanishing function"
        return self.span - (len(self.values) - 1)

    def row(self, order: Int) -> np.ndarray:
        "values for order 0, derivative rows otherwise"
        if order == 0:
            return self.values
        return self.derivs[order - 1]


@optional_typecheck
@dataclass(frozen=True)
class Stencil:
    left: int
    right: int

    def indices(self) -> range:
        return range(self.left, self.right + 1)


@optional_typecheck
def uniform_knots(
    elements: Int,
    degree: Int,
    continuity: Int,
    domain: Tuple[Real, Real] = (0.0, 1.0),
) -> KnotVector:
    "open uniform knot vector with interior multiplicity p - c"
    p, c = int(degree), int(continuity)
    if elements < 1:
        raise ParameterError(f"Need at least one element, not {elements}")
    if not -1 <= c <= p - 1:
        raise ParameterError(
            f"Interior continuity must satisfy -1 <= c <= p-1, got c={c} for p={p}"
        )
    a, b = float(domain[0]), float(domain[1])
    if not a < b:
        raise ParameterError(f"Invalid domain {domain}")
    breaks = np.linspace(a, b, int(elements) + 1)
    # repeat the same float object so that multiplicities are bitwise exact
    interior = np.repeat(breaks[1:-1], p - c)
    U = np.concatenate([np.full(p + 1, a), interior, np.full(p + 1, b)])
    return KnotVector(U, p)


@optional_typecheck
def find_span(xi: Real, kv: KnotVector) -> int:
    "index k such that U[k] <= xi < U[k+1], the last non-empty span at the right end"
    U = kv.knots
    lo, hi = kv.domain
    if not lo <= xi <= hi:
        raise DomainError(float(xi), lo, hi)
    if xi == hi:
        return int(kv.spans()[-1])
    return int(np.searchsorted(U, xi, side="right") - 1)


@optional_typecheck
def eval_basis(kv: KnotVector, xi: Real, nderiv: Int = 0) -> BasisTable:
    """
    Values and derivatives of the p+1 basis functions that are non-zero on
    the span containing xi, using the in-span triangular scheme of
    Cox-DeBoor (inverted triangle of the recursion plus the derivative
    recurrence over the coefficients a_{k,j}).
    """
    if not 0 <= nderiv <= 3:
        raise ParameterError(f"nderiv must be in 0..3, not {nderiv}")
    span = find_span(xi, kv)
    U, p = kv.knots, kv.degree
    nderiv = int(nderiv)

    ndu = np.zeros((p + 1, p + 1))
    left = np.zeros(p + 1)
    right = np.zeros(p + 1)
    ndu[0, 0] = 1.0
    for j in range(1, p + 1):
        left[j] = xi - U[span + 1 - j]
        right[j] = U[span + j] - xi
        saved = 0.0
        for r in range(j):
            # lower triangle stores knot differences
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved
    values = ndu[:, p].copy()

    ders = np.zeros((nderiv, p + 1))
    top = min(nderiv, p)
    a = np.zeros((2, p + 1))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[0, 0] = 1.0
        for k in range(1, top + 1):
            d = 0.0
            rk, pk = r - k, p - k
            if r >= k:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d += a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r]
                d += a[s2, k] * ndu[r, pk]
            ders[k - 1, r] = d
            s1, s2 = s2, s1
    factor = float(p)
    for k in range(1, top + 1):
        ders[k - 1] *= factor
        factor *= p - k
    return BasisTable(span=span, values=values, derivs=ders)


@optional_typecheck
def unclamp_knots(kv: KnotVector, k: Int) -> KnotVector:
    "unclamp both ends of an open knot vector for C^k periodicity"
    n, p = kv.n, kv.degree
    if not 0 <= k <= p - 1:
        raise ParameterError(f"Continuity k must satisfy 0 <= k <= p-1, got k={k} for p={p}")
    if not kv.is_clamped():
        raise PreconditionError(f"Only clamped knot vectors can be unclamped: {kv}")
    U = kv.knots.copy()
    m = n + p + 1
    for i in range(k + 1):
        U[k - i] = U[p] - U[n + 1] + U[n - i]
        U[m - k + i] = U[n + 1] - U[p] + U[p + i + 1]
    return KnotVector(U, p)


@optional_typecheck
def unclamp_curve(
    kv: KnotVector, ctrl: np.ndarray, k: Int
) -> Tuple[KnotVector, np.ndarray]:
    """
    Unclamp a curve given by homogeneous control points Pw (n+1 rows) so that
    its basis becomes C^k periodic, without changing the curve on the
    original domain.
    """
    n, p = kv.n, kv.degree
    if not 0 <= k <= p - 1:
        raise ParameterError(f"Continuity k must satisfy 0 <= k <= p-1, got k={k} for p={p}")
    if not kv.is_clamped():
        raise PreconditionError(f"Only clamped curves can be unclamped: {kv}")
    Pw = np.array(ctrl, dtype=float)
    if Pw.shape[0] != n + 1:
        raise ParameterError(
            f"Expected {n + 1} control points for this knot vector, got {Pw.shape[0]}"
        )
    U = kv.knots.copy()
    m = n + p + 1

    def ratio(num: float, den: float) -> float:
        if den == 0.0:
            raise DegenerateConfigurationError(
                f"Zero denominator while unclamping with k={k}: repeated knots near the ends of {kv}"
            )
        return num / den

    for i in range(k + 1):
        U[k - i] = U[p] - U[n + 1] + U[n - i]
    for i in range(p - k - 1, p - 1):
        for j in range(i, -1, -1):
            alpha = ratio(U[p] - U[p + j - i - 1], U[p + j + 1] - U[p + j - i - 1])
            Pw[j] = (Pw[j] - alpha * Pw[j + 1]) / _nonzero(1.0 - alpha, kv, k)
    for i in range(k + 1):
        U[m - k + i] = U[n + 1] - U[p] + U[p + i + 1]
    for i in range(p - k - 1, p - 1):
        for j in range(i, -1, -1):
            alpha = ratio(U[n + 1] - U[n - j], U[n - j + i + 2] - U[n - j])
            Pw[n - j] = (Pw[n - j] - (1.0 - alpha) * Pw[n - j - 1]) / _nonzero(
                alpha, kv, k
            )
    return KnotVector(U, p), Pw


def _nonzero(value: float, kv: KnotVector, k: int) -> float:
    if value == 0.0:
        raise DegenerateConfigurationError(
            f"Degenerate alpha while unclamping {kv} with k={k}"
        )
    return value


@optional_typecheck
def basis_stencil(i: Int, kv: KnotVector) -> Stencil:
    "left-most and right-most indices of the functions whose support meets N_i"
    n, p, U = kv.n, kv.degree, kv.knots
    if not 0 <= i <= n:
        raise BasisIndexError(f"Basis index {i} outside of 0..{n}")
    k = int(i)
    while U[k] == U[k + 1]:
        k += 1
    left = k - p
    k = int(i) + p + 1
    while U[k] == U[k - 1]:
        k -= 1
    right = k - 1
    return Stencil(left=left, right=right)


@optional_typecheck
def eval_curve(
    kv: KnotVector, ctrl: np.ndarray, xi: Real, rational: bool = True
) -> np.ndarray:
    "point of a (homogeneous when rational) curve at xi"
    table = eval_basis(kv, xi, 0)
    Pw = np.asarray(ctrl, dtype=float)[table.first : table.span + 1]
    point = table.values @ Pw
    if not rational:
        return point
    return point[:-1] / point[-1]


@optional_typecheck
def basis_support(i: Int, kv: KnotVector) -> Optional[Tuple[int, int]]:
    "first and last element ordinals (within the domain) where N_i is non-zero"
    spans = kv.spans()
    inside = np.flatnonzero((spans >= i) & (spans <= i + kv.degree))
    if not len(inside):
        return None
    return int(inside[0]), int(inside[-1])
