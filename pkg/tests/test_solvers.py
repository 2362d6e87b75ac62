import os

import numpy as np
import pytest
import scipy.sparse as sp

os.environ["ISOPATCH_TYPECHECKING"] = "crash"

from isopatch.utils.assembly import (
    Discretization,
    apply_dirichlet,
    form_matrix,
    form_vector,
    partition,
)
from isopatch.utils.errors import ContractError, ConvergenceError, ParameterError
from isopatch.utils.patches import identity_patch
from isopatch.utils.solvers import (
    SolverConfig,
    TimeState,
    alpha_parameters,
    consistent_rate,
    directional_check,
    galpha_solve,
    galpha_step,
    gmres_solve,
    ilu0,
    ilu0_block_jacobi,
    newton_solve,
)
from isopatch.utils.space import boundary_dofs, uniform_space

TIGHT = SolverConfig(rtol=1e-13, atol=1e-15, newton_rtol=1e-12, newton_atol=1e-14)


def _poisson(N=16, p=2):
    space = uniform_space(2, N, p)
    disc = Discretization(space, identity_patch(space), 1)
    part = partition(space, 4)
    K = form_matrix(disc, part, lambda s, U, pt: s.grad @ s.grad.T)
    F = form_vector(disc, part, lambda s, U, pt: s.values[:, None])
    fixed = np.unique(
        np.concatenate([boundary_dofs(space, a, side) for a in range(2) for side in (0, 1)])
    )
    K, F = apply_dirichlet(K, F, (fixed, np.zeros(len(fixed))))
    return part, K, F


@pytest.mark.basic
@pytest.mark.parametrize(
    "rho,expected",
    [(1.0, (0.5, 0.5, 0.5)), (0.0, (1.5, 1.0, 1.0)), (0.5, (5 / 6, 2 / 3, 2 / 3))],
)
def test_alpha_parameters(rho, expected):
    params = alpha_parameters(rho, 0.1)
    assert (params.alpha_m, params.alpha_f, params.gamma) == pytest.approx(expected, abs=1e-15)
    assert params.gamma == 0.5 + params.alpha_m - params.alpha_f
    assert params.dt == 0.1


@pytest.mark.basic
def test_alpha_parameters_range():
    with pytest.raises(ParameterError):
        alpha_parameters(1.5)
    with pytest.raises(ParameterError):
        alpha_parameters(-0.1)
    with pytest.raises(ParameterError):
        alpha_parameters(0.5, 0.0)


@pytest.mark.basic
def test_solver_config_checks():
    with pytest.raises(ParameterError):
        SolverConfig(restart=0)
    with pytest.raises(ParameterError):
        SolverConfig(rtol=0.0)
    fixed = SolverConfig.fixed_protocol()
    assert (fixed.newton_maxiter, fixed.restart, fixed.maxiter) == (2, 30, 30)
    assert fixed.fixed_iterations


@pytest.mark.basic
def test_gmres_identity():
    b = np.array([1.0, -2.0, 3.0])
    res = gmres_solve(np.eye(3), b)
    assert res.converged
    assert res.iterations == 1
    assert np.allclose(res.x, b, atol=1e-15)


@pytest.mark.basic
def test_gmres_small_system():
    A = np.array([[4.0, 1.0], [1.0, 3.0]])
    res = gmres_solve(A, np.array([1.0, 2.0]))
    assert res.status == "converged"
    assert np.allclose(res.x, [1 / 11, 7 / 11], atol=1e-10)


@pytest.mark.basic
def test_gmres_history_decreases_within_a_cycle():
    rng = np.random.default_rng(4)
    A = np.eye(60) * 4 + rng.normal(scale=0.3, size=(60, 60))
    config = SolverConfig(restart=10, maxiter=200, rtol=1e-10)
    b = rng.normal(size=60)
    res = gmres_solve(A, b, config=config)
    assert res.converged
    first = res.history[: config.restart + 1]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(first, first[1:]))
    assert res.residual == pytest.approx(np.linalg.norm(b - A @ res.x), rel=1e-6)


@pytest.mark.basic
def test_gmres_shape_mismatch():
    with pytest.raises(ContractError):
        gmres_solve(np.eye(3), np.ones(2))


@pytest.mark.basic
def test_gmres_fixed_iterations():
    rng = np.random.default_rng(5)
    A = np.eye(10) * 3 + rng.normal(scale=0.5, size=(10, 10))
    res = gmres_solve(A, np.ones(10), config=SolverConfig.fixed_protocol(gmres=3))
    assert res.iterations == 3
    assert len(res.history) == 4


@pytest.mark.basic
def test_ilu_of_diagonal_is_exact():
    A = sp.diags([1.0, 2.0, 4.0, 5.0, 8.0], format="csr")
    M = ilu0_block_jacobi(A, blocks=[np.array([0, 1]), np.array([2, 3, 4])])
    b = np.arange(1.0, 6.0)
    assert np.allclose(M.matvec(b), b / A.diagonal(), atol=1e-15)


@pytest.mark.basic
def test_ilu_of_tridiagonal_is_exact():
    n = 12
    A = sp.diags([-np.ones(n - 1), 4 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csr")
    M = ilu0_block_jacobi(A)
    v = np.random.default_rng(6).normal(size=n)
    assert np.allclose(M.matvec(A @ v), v, atol=1e-12)
    LU = ilu0(A)
    assert LU.nnz == A.nnz


@pytest.mark.basic
def test_ilu_needs_diagonal():
    with pytest.raises(ContractError):
        ilu0(sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 1.0]])))
    with pytest.raises(ContractError):
        ilu0_block_jacobi(sp.identity(4, format="csr"), blocks=[np.array([0, 1])])


@pytest.mark.basic
def test_preconditioned_poisson():
    part, K, F = _poisson()
    config = SolverConfig(rtol=1e-8, maxiter=5000)
    plain = gmres_solve(K, F, config=config)
    M = ilu0_block_jacobi(K, part)
    pre = gmres_solve(K, F, M, config)
    assert pre.converged and plain.converged
    assert pre.iterations < plain.iterations
    assert np.linalg.norm(K @ pre.x - F) <= 1e-8 * np.linalg.norm(F) * (1 + 1e-6)
    exact = np.linalg.solve(K.toarray(), F)
    assert np.allclose(pre.x, exact, atol=1e-6)


@pytest.mark.basic
def test_newton_scalar():
    U, report = newton_solve(
        lambda x: x**2 - 4.0, lambda x: np.array([[2.0 * x[0]]]), np.array([3.0])
    )
    assert U[0] == pytest.approx(2.0, abs=1e-10)
    assert report.converged and report.status == "converged"
    assert report.iterations <= 6
    r = report.residuals
    ratios = [b / a**2 for a, b in zip(r, r[1:]) if a > 1e-6]
    # quadratic convergence
    assert max(ratios) < 1.0


@pytest.mark.basic
def test_newton_linear_system():
    A = np.array([[3.0, 1.0, 0.0], [1.0, 4.0, 1.0], [0.0, 1.0, 5.0]])
    b = np.array([1.0, 2.0, 3.0])
    U, report = newton_solve(lambda u: A @ u - b, lambda u: A, np.zeros(3))
    assert report.iterations == 1
    assert np.allclose(U, np.linalg.solve(A, b), atol=1e-12)


@pytest.mark.basic
def test_newton_failures():
    with pytest.raises(ConvergenceError) as info:
        newton_solve(
            lambda x: x**2 + 1.0,
            lambda x: np.array([[2.0 * x[0]]]),
            np.array([0.5]),
            SolverConfig(newton_maxiter=5),
        )
    assert info.value.report.status == "maxiter"
    assert len(info.value.report.residuals) == 6
    with pytest.raises(ConvergenceError):
        newton_solve(lambda x: x * np.nan, lambda x: np.eye(1), np.ones(1))


@pytest.mark.basic
def test_newton_fixed_iterations():
    U, report = newton_solve(
        lambda x: x**2 - 4.0,
        lambda x: np.array([[2.0 * x[0]]]),
        np.array([3.0]),
        SolverConfig.fixed_protocol(newton=2, gmres=1),
    )
    assert report.iterations == 2
    assert report.status == "fixed"


@pytest.mark.basic
def test_galpha_keeps_constant_state():
    state = TimeState(np.array([1.0, 2.0]), np.zeros(2))
    out = galpha_step(
        lambda t, U, V: V,
        lambda t, U, V, a, b: a * np.eye(2),
        state,
        alpha_parameters(0.3, 0.5),
    )
    assert np.array_equal(out.U, state.U)
    assert out.t == 0.5 and out.step == 1


@pytest.mark.basic
def test_galpha_crank_nicolson():
    lam, dt = -2.0, 0.1
    residual = lambda t, U, V: V - lam * U
    jacobian = lambda t, U, V, a, b: np.array([[a - b * lam]])
    state = TimeState(np.array([1.0]), np.array([lam]))
    out = galpha_step(residual, jacobian, state, alpha_parameters(1.0, dt), TIGHT)
    expected = (1 + lam * dt / 2) / (1 - lam * dt / 2)
    assert out.U[0] == pytest.approx(expected, abs=1e-12)


@pytest.mark.basic
def test_galpha_update_consistency():
    params = alpha_parameters(0.5, 0.05)
    residual = lambda t, U, V: V + U**3 - np.sin(t)
    jacobian = lambda t, U, V, a, b: np.diag(a + 3.0 * b * U**2)
    state = TimeState(np.array([0.5, -1.0]), np.array([0.1, 0.2]))
    out = galpha_step(residual, jacobian, state, params)
    g = params.gamma
    update = state.U + params.dt * ((1 - g) * state.Udot + g * out.Udot)
    assert np.allclose(out.U, update, atol=1e-13, rtol=0)


@pytest.mark.basic
def test_galpha_second_order():
    residual = lambda t, U, V: V + U**2
    jacobian = lambda t, U, V, a, b: np.array([[a + 2.0 * b * U[0]]])
    U0 = np.array([1.0])
    V0 = consistent_rate(residual, jacobian, U0, config=TIGHT)
    assert V0[0] == pytest.approx(-1.0, abs=1e-12)
    errors = []
    for n in (10, 20, 40):
        traj = galpha_solve(
            residual, jacobian, TimeState(U0, V0), alpha_parameters(0.5, 1.0 / n), n,
            TIGHT, keep_states=False,
        )
        assert traj.final.t == pytest.approx(1.0)
        errors.append(abs(traj.final.U[0] - 0.5))
    orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    assert np.all(orders >= 1.9)


@pytest.mark.basic
def test_galpha_solve_history(temp_dir):
    residual = lambda t, U, V: V + U
    jacobian = lambda t, U, V, a, b: np.array([[a + b]])
    path = temp_dir / "out" / "history.csv"
    traj = galpha_solve(
        residual, jacobian, TimeState(np.array([1.0]), np.array([-1.0])),
        alpha_parameters(0.5, 0.1), 3,
        monitor=lambda s: {"u": float(s.U[0])},
        history_path=path,
    )
    assert len(traj.states) == 4
    assert [m["step"] for m in traj.monitors] == [0, 1, 2, 3]
    assert traj.monitors[-1]["u"] == pytest.approx(np.exp(-0.3), rel=1e-2)
    lines = path.read_text().splitlines()
    assert lines[0] == "step,iteration,residual"
    assert len(lines) == 1 + len(traj.history)
    assert set(traj.history[:, 0].astype(int)) == {1, 2, 3}


@pytest.mark.basic
def test_time_state_shapes():
    with pytest.raises(ContractError):
        TimeState(np.zeros(2), np.zeros(3))


@pytest.mark.basic
def test_directional_check():
    residual = lambda U: U**3 + np.roll(U, 1)
    jacobian = lambda U: np.diag(3 * U**2) + np.roll(np.eye(len(U)), 1, axis=0)
    U = np.random.default_rng(7).normal(size=6)
    assert directional_check(residual, jacobian, U) < 1e-6
    assert directional_check(residual, lambda U: np.diag(3 * U**2), U) > 1e-2
