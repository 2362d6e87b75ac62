"""
Solvers: restarted GMRES with right preconditioning, block Jacobi ILU(0),
Newton's method and the generalized-alpha integrator for first order
systems R(t, U, Udot) = 0.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from beartype.typing import Callable, Dict, List, Optional, Sequence, Tuple, Union
from scipy.linalg import solve_triangular
from scipy.sparse.linalg import LinearOperator, aslinearoperator, spsolve_triangular
from tqdm import tqdm

from .env import (
    ISOPATCH_GMRES_ATOL,
    ISOPATCH_GMRES_MAXITER,
    ISOPATCH_GMRES_RESTART,
    ISOPATCH_GMRES_RTOL,
    ISOPATCH_NEWTON_ATOL,
    ISOPATCH_NEWTON_MAXITER,
    ISOPATCH_NEWTON_RTOL,
    ISOPATCH_PIVOT_SHIFT,
)
from .errors import ContractError, ConvergenceError, ParameterError
from .flags import is_piped, is_verbose
from .logger import logger, whi, yel
from .typechecker import Int, Real, optional_typecheck


@optional_typecheck
@dataclass(frozen=True)
class AlphaParams:
    rho_inf: float
    alpha_m: float
    alpha_f: float
    gamma: float
    dt: float


@optional_typecheck
def alpha_parameters(rho_inf: Real, dt: Real = 1.0) -> AlphaParams:
    "generalized-alpha parameters from the spectral radius at infinity"
    if not 0.0 <= rho_inf <= 1.0:
        raise ParameterError(f"rho_inf must lie in [0, 1], not {rho_inf}")
    if not dt > 0:
        raise ParameterError(f"Time step must be positive, not {dt}")
    rho = float(rho_inf)
    alpha_m = 0.5 * (3.0 - rho) / (1.0 + rho)
    alpha_f = 1.0 / (1.0 + rho)
    gamma = 0.5 + alpha_m - alpha_f
    return AlphaParams(rho, alpha_m, alpha_f, gamma, float(dt))


@optional_typecheck
@dataclass(frozen=True)
class SolverConfig:
    """
    Krylov and Newton settings. ``fixed_iterations`` runs exactly ``restart``
    GMRES iterations per linear solve and exactly ``newton_maxiter`` Newton
    iterations, ignoring tolerances.
    """

    restart: int = ISOPATCH_GMRES_RESTART
    maxiter: int = ISOPATCH_GMRES_MAXITER
    rtol: float = ISOPATCH_GMRES_RTOL
    atol: float = ISOPATCH_GMRES_ATOL
    newton_maxiter: int = ISOPATCH_NEWTON_MAXITER
    newton_rtol: float = ISOPATCH_NEWTON_RTOL
    newton_atol: float = ISOPATCH_NEWTON_ATOL
    blocks: Optional[int] = None
    fixed_iterations: bool = False

    def __post_init__(self):
        if self.restart < 1 or self.maxiter < 1 or self.newton_maxiter < 1:
            raise ParameterError(f"Iteration counts must be >= 1: {self}")
        for name in ("rtol", "atol", "newton_rtol", "newton_atol"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"Tolerance {name} must be positive, not {getattr(self, name)}")

    @classmethod
    def fixed_protocol(cls, newton: int = 2, gmres: int = 30) -> "SolverConfig":
        "fixed budget of Newton and GMRES iterations, for timing runs"
        return cls(
            restart=gmres, maxiter=gmres, newton_maxiter=newton, fixed_iterations=True
        )


@optional_typecheck
@dataclass(frozen=True, eq=False)
class GmresResult:
    x: np.ndarray
    iterations: int
    history: List[float]
    status: str
    residual: float
    target: float

    @property
    def converged(self) -> bool:
        return self.residual <= self.target


Operator = Union[LinearOperator, sp.spmatrix, np.ndarray]


@optional_typecheck
def gmres_solve(
    A: Operator,
    b: np.ndarray,
    M: Optional[Operator] = None,
    config: Optional[SolverConfig] = None,
    x0: Optional[np.ndarray] = None,
) -> GmresResult:
    """
    Restarted GMRES on A M^-1 y = b, x = M^-1 y, using modified Gram-Schmidt
    Arnoldi and Givens rotations. ``M`` approximates the inverse of A.
    The history holds the residual estimate after every iteration; the true
    residual is recomputed at every restart.
    """
    config = config or SolverConfig()
    A = aslinearoperator(A)
    b = np.asarray(b, dtype=float)
    n = len(b)
    if A.shape != (n, n):
        raise ContractError(f"Operator of shape {A.shape} can't act on a vector of {n} values")
    Mop = aslinearoperator(M) if M is not None else None
    precond = (lambda v: Mop.matvec(v)) if Mop is not None else (lambda v: v)
    fixed = config.fixed_iterations

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    target = max(config.rtol * float(np.linalg.norm(b)), config.atol)
    r = b - A.matvec(x)
    beta = float(np.linalg.norm(r))
    history = [beta]
    status = "maxiter"
    total = 0
    m = config.restart

    if beta == 0.0 or (beta <= target and not fixed):
        return GmresResult(x, 0, history, "converged", beta, target)

    while True:
        V = np.zeros((m + 1, n))
        H = np.zeros((m + 1, m))
        cs, sn = np.zeros(m), np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        k = 0
        breakdown = singular = False
        for j in range(m):
            if total >= config.maxiter:
                break
            w = A.matvec(precond(V[j]))
            for i in range(j + 1):
                H[i, j] = np.dot(w, V[i])
                w = w - H[i, j] * V[i]
            H[j + 1, j] = np.linalg.norm(w)
            breakdown = H[j + 1, j] <= np.finfo(float).eps * beta
            if not breakdown:
                V[j + 1] = w / H[j + 1, j]
            for i in range(j):
                temp = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = temp
            denom = np.hypot(H[j, j], H[j + 1, j])
            if denom == 0.0:
                singular = True
                break
            cs[j], sn[j] = H[j, j] / denom, H[j + 1, j] / denom
            H[j, j], H[j + 1, j] = denom, 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            total += 1
            k = j + 1
            history.append(abs(float(g[j + 1])))
            if breakdown or (not fixed and abs(g[j + 1]) <= target):
                break

        if k > 0:
            y = solve_triangular(H[:k, :k], g[:k])
            x = x + precond(V[:k].T @ y)
        r = b - A.matvec(x)
        previous, beta = beta, float(np.linalg.norm(r))

        # happy breakdown: the Krylov space holds the solution
        if beta == 0.0 or (beta <= target and (not fixed or breakdown)):
            status = "converged"
        elif singular or breakdown:
            status = "breakdown"
        elif total >= config.maxiter:
            status = "converged" if beta <= target else "maxiter"
        elif not fixed and beta >= previous * (1.0 - 1e-12):
            status = "stagnation"
        else:
            continue
        break

    if status != "converged" and not fixed:
        logger.debug(f"GMRES stopped with status {status} after {total} iterations, residual {beta:.3e}")
    return GmresResult(x, total, history, status, beta, target)


@optional_typecheck
def ilu0(A: sp.spmatrix, shift: Real = ISOPATCH_PIVOT_SHIFT) -> sp.csr_matrix:
    """
    Incomplete LU factorization with zero fill-in, natural ordering. Both
    factors are returned packed in one CSR matrix with A's pattern: strict
    lower part for L (unit diagonal implied), the rest for U. A zero pivot
    is replaced by ``shift`` times the largest diagonal magnitude.
    """
    LU = sp.csr_matrix(A, dtype=float, copy=True)
    LU.sort_indices()
    n = LU.shape[0]
    indptr, indices, data = LU.indptr, LU.indices, LU.data
    diag_pos = np.empty(n, dtype=int)
    for i in range(n):
        cols = indices[indptr[i] : indptr[i + 1]]
        p = np.searchsorted(cols, i)
        if p >= len(cols) or cols[p] != i:
            raise ContractError(f"ILU(0) needs a diagonal entry in the pattern of row {i}")
        diag_pos[i] = indptr[i] + p
    dmax = float(np.max(np.abs(data[diag_pos]))) if n else 0.0
    fallback = float(shift) * (dmax if dmax > 0 else 1.0)

    for i in range(n):
        start, stop = indptr[i], indptr[i + 1]
        cols = indices[start:stop]
        for kk in range(start, diag_pos[i]):
            k = indices[kk]
            data[kk] /= data[diag_pos[k]]
            upper = slice(diag_pos[k] + 1, indptr[k + 1])
            kcols = indices[upper]
            pos = np.searchsorted(cols, kcols)
            hit = pos < len(cols)
            hit[hit] = cols[pos[hit]] == kcols[hit]
            data[start + pos[hit]] -= data[kk] * data[upper][hit]
        if data[diag_pos[i]] == 0.0:
            yel(f"Zero pivot in ILU(0) at row {i}, shifting it to {fallback:.3e}")
            data[diag_pos[i]] = fallback
    return LU


class BlockJacobiILU0:
    "block Jacobi preconditioner with an ILU(0) solve per block"

    @optional_typecheck
    def __init__(self, A: sp.spmatrix, blocks: Sequence[np.ndarray]) -> None:
        A = sp.csr_matrix(A, dtype=float)
        n = A.shape[0]
        covered = np.concatenate([np.asarray(b, dtype=int) for b in blocks]) if blocks else np.array([], dtype=int)
        if len(covered) != n or not np.array_equal(np.sort(covered), np.arange(n)):
            raise ContractError("Preconditioner blocks must partition the unknowns")
        self.shape = A.shape
        self.blocks = []
        for idx in blocks:
            idx = np.sort(np.asarray(idx, dtype=int))
            if not len(idx):
                continue
            LU = ilu0(A[idx][:, idx])
            L = sp.tril(LU, k=-1, format="csr") + sp.identity(len(idx), format="csr")
            U = sp.triu(LU, format="csr")
            L.sort_indices()
            U.sort_indices()
            self.blocks.append((idx, L, U))

    def solve(self, r: np.ndarray) -> np.ndarray:
        z = np.zeros_like(np.asarray(r, dtype=float))
        for idx, L, U in self.blocks:
            y = spsolve_triangular(L, r[idx], lower=True, unit_diagonal=True)
            z[idx] = spsolve_triangular(U, y, lower=False)
        return z

    def as_operator(self) -> LinearOperator:
        return LinearOperator(self.shape, matvec=self.solve, dtype=float)


@optional_typecheck
def ilu0_block_jacobi(
    A: sp.spmatrix,
    part=None,
    dof_per_node: Int = 1,
    blocks: Optional[Sequence[np.ndarray]] = None,
) -> LinearOperator:
    """
    One ILU(0) block per worker of the partition (its owned dofs), or per
    explicit index block, or a single block.
    """
    n = A.shape[0]
    if blocks is None:
        if part is None:
            blocks = [np.arange(n)]
        else:
            blocks = [part.owned_dofs(rank, dof_per_node) for rank in range(part.worker_count)]
    return BlockJacobiILU0(A, blocks).as_operator()


@optional_typecheck
@dataclass(eq=False)
class NewtonReport:
    converged: bool = False
    iterations: int = 0
    residuals: List[float] = field(default_factory=list)
    linear_iterations: List[int] = field(default_factory=list)
    status: str = "running"


@optional_typecheck
def newton_solve(
    residual: Callable,
    jacobian: Callable,
    U0: np.ndarray,
    config: Optional[SolverConfig] = None,
    preconditioner: Optional[Callable] = None,
) -> Tuple[np.ndarray, NewtonReport]:
    """
    Newton's method with GMRES inner solves. ``jacobian(U)`` returns a
    matrix or operator, ``preconditioner(J)`` an approximate inverse of it.
    Converged when |F| <= max(rtol |F(U0)|, atol).
    """
    config = config or SolverConfig()
    U = np.array(U0, dtype=float)
    F = np.asarray(residual(U), dtype=float)
    norm0 = norm = float(np.linalg.norm(F))
    report = NewtonReport(residuals=[norm0])
    if not np.isfinite(norm0):
        report.status = "diverged"
        raise ConvergenceError("Non finite initial residual", report)
    target = max(config.newton_rtol * norm0, config.newton_atol)
    fixed = config.fixed_iterations

    for it in range(config.newton_maxiter):
        if not fixed and norm <= target:
            break
        J = jacobian(U)
        M = preconditioner(J) if preconditioner is not None else None
        lin = gmres_solve(J, -F, M, config)
        U = U + lin.x
        F = np.asarray(residual(U), dtype=float)
        norm = float(np.linalg.norm(F))
        report.iterations = it + 1
        report.residuals.append(norm)
        report.linear_iterations.append(lin.iterations)
        if is_verbose:
            whi(f"Newton {it + 1}: |F|={norm:.6e} ({lin.iterations} GMRES, {lin.status})")
        if not np.isfinite(norm):
            report.status = "diverged"
            raise ConvergenceError(f"Newton diverged at iteration {it + 1}", report)

    report.converged = norm <= target
    if fixed:
        report.status = "fixed"
    elif report.converged:
        report.status = "converged"
    else:
        report.status = "maxiter"
        raise ConvergenceError(
            f"Newton did not converge in {config.newton_maxiter} iterations: "
            f"|F|={norm:.3e} > {target:.3e}",
            report,
        )
    return U, report


@optional_typecheck
@dataclass(frozen=True, eq=False)
class TimeState:
    U: np.ndarray
    Udot: np.ndarray
    t: float = 0.0
    step: int = 0
    report: Optional[NewtonReport] = None

    def __post_init__(self):
        if np.shape(self.U) != np.shape(self.Udot):
            raise ContractError(
                f"U and Udot differ in shape: {np.shape(self.U)} vs {np.shape(self.Udot)}"
            )


@optional_typecheck
def consistent_rate(
    residual: Callable,
    jacobian: Callable,
    U0: np.ndarray,
    t0: Real = 0.0,
    config: Optional[SolverConfig] = None,
    preconditioner: Optional[Callable] = None,
) -> np.ndarray:
    "Udot_0 solving R(t0, U0, Udot_0) = 0"
    U0 = np.asarray(U0, dtype=float)
    t0 = float(t0)
    rate, _ = newton_solve(
        lambda V: residual(t0, U0, V),
        lambda V: jacobian(t0, U0, V, 1.0, 0.0),
        np.zeros_like(U0),
        config,
        preconditioner,
    )
    return rate


@optional_typecheck
def galpha_step(
    residual: Callable,
    jacobian: Callable,
    state: TimeState,
    params: AlphaParams,
    config: Optional[SolverConfig] = None,
    preconditioner: Optional[Callable] = None,
) -> TimeState:
    """
    One generalized-alpha step. Newton iterates on Udot_{n+1}, starting
    from the same-U predictor, with the residual evaluated at the stages

        U_{n+1}        = U_n + dt ((1 - gamma) Udot_n + gamma Udot_{n+1})
        U_{n+alpha_f}  = U_n + alpha_f (U_{n+1} - U_n)
        Udot_{n+alpha_m} = Udot_n + alpha_m (Udot_{n+1} - Udot_n)

    ``jacobian(t, U, Udot, a, b)`` must return a dR/dUdot + b dR/dU.
    """
    am, af, gamma, dt = params.alpha_m, params.alpha_f, params.gamma, params.dt
    Un = np.asarray(state.U, dtype=float)
    Vn = np.asarray(state.Udot, dtype=float)
    t_stage = state.t + af * dt

    def update(V: np.ndarray) -> np.ndarray:
        return Un + dt * ((1.0 - gamma) * Vn + gamma * V)

    def stages(V: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return Un + af * (update(V) - Un), Vn + am * (V - Vn)

    def G(V: np.ndarray) -> np.ndarray:
        return residual(t_stage, *stages(V))

    def dG(V: np.ndarray):
        return jacobian(t_stage, *stages(V), am, af * gamma * dt)

    predictor = (gamma - 1.0) / gamma * Vn
    try:
        V, report = newton_solve(G, dG, predictor, config, preconditioner)
    except ConvergenceError as err:
        raise ConvergenceError(
            f"Step {state.step + 1} (t={state.t + dt:.6g}) failed: {err}", err.report
        ) from err
    return TimeState(U=update(V), Udot=V, t=state.t + dt, step=state.step + 1, report=report)


@optional_typecheck
@dataclass(eq=False)
class Trajectory:
    states: List[TimeState]
    monitors: List[Dict[str, float]]
    history: np.ndarray

    @property
    def final(self) -> TimeState:
        return self.states[-1]


@optional_typecheck
def galpha_solve(
    residual: Callable,
    jacobian: Callable,
    state: TimeState,
    params: AlphaParams,
    steps: Int,
    config: Optional[SolverConfig] = None,
    preconditioner: Optional[Callable] = None,
    monitor: Optional[Callable] = None,
    history_path: Optional[Union[str, Path]] = None,
    keep_states: bool = True,
) -> Trajectory:
    """
    Advance ``steps`` generalized-alpha steps. ``monitor(state)`` may return
    a dict of scalars recorded per step. The Newton residual history is
    returned as rows (step, iteration, residual) and optionally written as
    CSV.
    """
    states = [state]
    monitors = []
    if monitor is not None:
        monitors.append({"step": 0, "t": state.t, **(monitor(state) or {})})
    rows = []
    for _ in tqdm(range(int(steps)), desc="Time steps", unit="step", disable=is_piped):
        state = galpha_step(residual, jacobian, state, params, config, preconditioner)
        for i, r in enumerate(state.report.residuals):
            rows.append((state.step, i, r))
        if monitor is not None:
            monitors.append({"step": state.step, "t": state.t, **(monitor(state) or {})})
        if keep_states:
            states.append(state)
        else:
            states = [state]
    history = np.array(rows, dtype=float).reshape(-1, 3)
    if history_path is not None:
        write_history(history, history_path)
    return Trajectory(states, monitors, history)


@optional_typecheck
def write_history(history: np.ndarray, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(
        path, history, delimiter=",", header="step,iteration,residual",
        comments="", fmt=["%d", "%d", "%.16e"],
    )
    return path


@optional_typecheck
def directional_check(
    residual: Callable,
    jacobian: Callable,
    U: np.ndarray,
    direction: Optional[np.ndarray] = None,
    eps: Real = 1e-6,
    seed: Int = 0,
) -> float:
    """
    Relative mismatch between J(U) v and the central difference
    (R(U + eps v) - R(U - eps v)) / (2 eps).
    """
    U = np.asarray(U, dtype=float)
    if direction is None:
        direction = np.random.default_rng(int(seed)).uniform(-1.0, 1.0, U.shape)
    v = np.asarray(direction, dtype=float)
    exact = aslinearoperator(jacobian(U)).matvec(v)
    approx = (np.asarray(residual(U + eps * v)) - np.asarray(residual(U - eps * v))) / (2.0 * eps)
    scale = max(float(np.linalg.norm(exact)), float(np.linalg.norm(approx)), np.finfo(float).tiny)
    return float(np.linalg.norm(exact - approx)) / scale
