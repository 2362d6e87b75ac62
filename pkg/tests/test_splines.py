import os

import numpy as np
import pytest

os.environ["ISOPATCH_TYPECHECKING"] = "crash"

from isopatch.utils.errors import (
    BasisIndexError,
    DomainError,
    ParameterError,
    PreconditionError,
)
from isopatch.utils.splines import (
    KnotVector,
    basis_stencil,
    basis_support,
    eval_basis,
    eval_curve,
    find_span,
    uniform_knots,
    unclamp_curve,
    unclamp_knots,
)

OPEN_KNOTS = [0, 0, 0, 0, 0.2, 0.4, 0.6, 0.8, 1, 1, 1, 1]


def _random_knots(rng, p):
    "clamped knots on [0, 1] with a few interior knots of random multiplicity"
    interior = np.sort(rng.choice(np.arange(1, 8), size=int(rng.integers(1, 5)), replace=False)) / 8
    mult = rng.integers(1, p + 1, size=len(interior))
    return KnotVector([0.0] * (p + 1) + list(np.repeat(interior, mult)) + [1.0] * (p + 1), p)


def _cox_de_boor(U, p, i, xi):
    if p == 0:
        return 1.0 if U[i] <= xi < U[i + 1] else 0.0
    left = right = 0.0
    if U[i + p] > U[i]:
        left = (xi - U[i]) / (U[i + p] - U[i]) * _cox_de_boor(U, p - 1, i, xi)
    if U[i + p + 1] > U[i + 1]:
        right = (U[i + p + 1] - xi) / (U[i + p + 1] - U[i + 1]) * _cox_de_boor(U, p - 1, i + 1, xi)
    return left + right


def _dense(table, count, order):
    out = np.zeros(count)
    out[table.first : table.span + 1] = table.row(order)
    return out


@pytest.mark.basic
def test_find_span(mixed_knots):
    assert find_span(3.0, mixed_knots) == 4
    assert find_span(0.0, mixed_knots) == 3
    # right end belongs to the last non-empty span
    assert find_span(8.0, mixed_knots) == 9
    assert find_span(5.999, mixed_knots) == 6
    assert find_span(6.0, mixed_knots) == 9


@pytest.mark.basic
def test_find_span_outside(mixed_knots):
    with pytest.raises(DomainError):
        find_span(8.0001, mixed_knots)
    with pytest.raises(DomainError):
        find_span(-1e-9, mixed_knots)


@pytest.mark.basic
def test_knot_vector_validation():
    with pytest.raises(ParameterError):
        KnotVector([0, 0, 1, 0.5, 1, 1], 1)
    with pytest.raises(ParameterError):
        KnotVector([0, 0, 0, 0, 1, 1, 1], 2)
    with pytest.raises(ParameterError):
        KnotVector([0, 0, 1], 1)
    kv = KnotVector(OPEN_KNOTS, 3)
    assert kv.n == 7
    assert kv.basis_count == 8
    assert kv.domain == (0.0, 1.0)
    assert kv.is_clamped()
    assert kv.multiplicity(1.0) == 4
    assert kv.spans().tolist() == [3, 4, 5, 6, 7]


@pytest.mark.basic
def test_linear_values():
    t = eval_basis(KnotVector([0, 0, 1, 1], 1), 0.25)
    assert t.span == 1
    assert np.allclose(t.values, [0.75, 0.25], atol=1e-15)


@pytest.mark.basic
def test_quadratic_values_and_derivatives():
    t = eval_basis(KnotVector([0, 0, 0, 1, 1, 1], 2), 0.5, 2)
    assert np.allclose(t.values, [0.25, 0.5, 0.25], atol=1e-15)
    assert np.allclose(t.row(1), [-1.0, 0.0, 1.0], atol=1e-14)
    assert np.allclose(t.row(2), [2.0, -4.0, 2.0], atol=1e-13)


@pytest.mark.basic
def test_partition_of_unity(mixed_knots):
    rng = np.random.default_rng(0)
    for xi in np.concatenate([rng.uniform(0, 8, 50), [0.0, 2.0, 4.0, 6.0, 8.0]]):
        t = eval_basis(mixed_knots, xi, 3)
        assert t.values.sum() == pytest.approx(1.0, abs=1e-14)
        assert np.all(t.values >= -1e-15)
        for order in (1, 2, 3):
            assert t.row(order).sum() == pytest.approx(0.0, abs=1e-11)


@pytest.mark.basic
def test_derivatives_match_finite_differences():
    kv = uniform_knots(5, 4, 2)
    h = 1e-6
    for xi in (0.13, 0.41, 0.77):
        t = eval_basis(kv, xi, 2)
        plus, minus = eval_basis(kv, xi + h, 1), eval_basis(kv, xi - h, 1)
        assert plus.span == minus.span == t.span
        assert np.allclose(t.row(1), (plus.values - minus.values) / (2 * h), rtol=1e-6, atol=1e-6)
        assert np.allclose(t.row(2), (plus.row(1) - minus.row(1)) / (2 * h), rtol=1e-5, atol=1e-4)


@pytest.mark.basic
def test_derivatives_above_degree_vanish():
    t = eval_basis(KnotVector([0, 0, 0, 1, 2, 2, 2], 2), 0.5, 3)
    assert np.all(t.row(3) == 0.0)


@pytest.mark.basic
def test_uniform_knots():
    kv = uniform_knots(4, 3, 2)
    assert kv.knots.tolist() == [0, 0, 0, 0, 0.25, 0.5, 0.75, 1, 1, 1, 1]
    assert kv.basis_count == 7
    kv = uniform_knots(3, 3, 0, (0.0, 3.0))
    assert kv.multiplicity(1.0) == 3
    assert kv.multiplicity(2.0) == 3
    assert len(kv.spans()) == 3
    with pytest.raises(ParameterError):
        uniform_knots(4, 2, 2)
    with pytest.raises(ParameterError):
        uniform_knots(0, 2, 1)


@pytest.mark.basic
@pytest.mark.parametrize(
    "k,expected",
    [
        (0, [-0.2, 0, 0, 0, 0.2, 0.4, 0.6, 0.8, 1, 1, 1, 1.2]),
        (1, [-0.4, -0.2, 0, 0, 0.2, 0.4, 0.6, 0.8, 1, 1, 1.2, 1.4]),
        (2, [-0.6, -0.4, -0.2, 0, 0.2, 0.4, 0.6, 0.8, 1, 1.2, 1.4, 1.6]),
    ],
)
def test_unclamp_knots(k, expected):
    out = unclamp_knots(KnotVector(OPEN_KNOTS, 3), k)
    assert out.knots.tolist() == pytest.approx(expected, abs=1e-15)
    assert out.domain == (0.0, 1.0)
    assert out.basis_count == 8


@pytest.mark.basic
def test_unclamp_knots_errors():
    kv = KnotVector(OPEN_KNOTS, 3)
    with pytest.raises(ParameterError):
        unclamp_knots(kv, 3)
    with pytest.raises(ParameterError):
        unclamp_knots(kv, -1)
    with pytest.raises(PreconditionError):
        unclamp_knots(unclamp_knots(kv, 1), 1)


@pytest.mark.basic
def test_unclamp_curve_linear_is_identity():
    kv = uniform_knots(4, 1, 0)
    ctrl = np.random.default_rng(1).uniform(size=(5, 3)) + [0, 0, 1]
    knots, out = unclamp_curve(kv, ctrl, 0)
    assert np.array_equal(out, ctrl)
    assert knots.knots[0] == pytest.approx(-0.25)


@pytest.mark.basic
@pytest.mark.parametrize("k", [0, 1, 2])
def test_unclamp_curve_keeps_line(k):
    kv = KnotVector(OPEN_KNOTS, 3)
    xs = np.linspace(0.0, 3.0, 8)
    ctrl = np.stack([xs, 2.0 * xs + 1.0, np.ones(8)], axis=-1)
    knots, out = unclamp_curve(kv, ctrl, k)
    assert np.allclose(knots.knots, unclamp_knots(kv, k).knots, atol=1e-15)
    for xi in np.linspace(0.0, 1.0, 10):
        before = eval_curve(kv, ctrl, xi)
        after = eval_curve(knots, out, xi)
        assert np.allclose(before, after, atol=1e-12)


@pytest.mark.basic
def test_unclamp_quarter_circle():
    kv = KnotVector([0, 0, 0, 1, 1, 1], 2)
    w = np.array([1.0, np.sqrt(2) / 2, 1.0])
    pts = np.array([[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    ctrl = np.concatenate([pts * w[:, None], w[:, None]], axis=-1)
    knots, out = unclamp_curve(kv, ctrl, 0)
    for xi in np.linspace(0.0, 1.0, 10):
        a = eval_curve(kv, ctrl, xi)
        assert np.linalg.norm(a) == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(a, eval_curve(knots, out, xi), atol=1e-12)


@pytest.mark.basic
def test_unclamp_curve_wrong_count():
    with pytest.raises(ParameterError):
        unclamp_curve(KnotVector(OPEN_KNOTS, 3), np.ones((7, 2)), 1)


@pytest.mark.basic
def test_basis_stencil(mixed_knots):
    assert basis_stencil(0, mixed_knots).indices() == range(0, 4)
    s = basis_stencil(4, mixed_knots)
    assert (s.left, s.right) == (1, 6)
    s = basis_stencil(6, mixed_knots)
    assert (s.left, s.right) == (3, 9)
    s = basis_stencil(3, mixed_knots)
    assert (s.left, s.right) == (0, 6)
    with pytest.raises(BasisIndexError):
        basis_stencil(10, mixed_knots)
    with pytest.raises(BasisIndexError):
        basis_stencil(-1, mixed_knots)


@pytest.mark.basic
def test_basis_stencil_matches_support_overlap(mixed_knots):
    n = mixed_knots.basis_count
    for i in range(n):
        si = basis_support(i, mixed_knots)
        overlap = [
            j
            for j in range(n)
            if max(si[0], basis_support(j, mixed_knots)[0]) <= min(si[1], basis_support(j, mixed_knots)[1])
        ]
        s = basis_stencil(i, mixed_knots)
        assert list(s.indices()) == overlap


@pytest.mark.basic
def test_greville():
    assert KnotVector([0, 0, 0, 1, 1, 1], 2).greville().tolist() == [0.0, 0.5, 1.0]
    assert uniform_knots(4, 1, 0).greville().tolist() == [0.0, 0.25, 0.5, 0.75, 1.0]


@pytest.mark.basic
@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_matches_literal_recursion(p):
    rng = np.random.default_rng(p)
    for _ in range(5):
        kv = _random_knots(rng, p)
        U = kv.knots.tolist()
        for xi in rng.uniform(0.0, 1.0, 6):
            t = eval_basis(kv, float(xi), 0)
            expected = [_cox_de_boor(U, p, i, xi) for i in range(kv.basis_count)]
            assert np.allclose(_dense(t, kv.basis_count, 0), expected, rtol=0, atol=1e-13)


@pytest.mark.basic
def test_stencil_is_symmetric():
    rng = np.random.default_rng(11)
    for p in (1, 2, 3):
        kv = _random_knots(rng, p)
        n = kv.basis_count
        members = [set(basis_stencil(i, kv).indices()) for i in range(n)]
        for i in range(n):
            for j in range(n):
                assert (j in members[i]) == (i in members[j])


@pytest.mark.basic
@pytest.mark.parametrize("k", [0, 1, 2])
def test_unclamped_basis_wraps(k):
    rng = np.random.default_rng(20 + k)
    for kv in (KnotVector(OPEN_KNOTS, 3), _random_knots(rng, 3)):
        out = unclamp_knots(kv, k)
        a, b = out.domain
        count = out.basis_count
        unique = count - (k + 1)
        left = eval_basis(out, a, k)
        right = eval_basis(out, b, k)
        # N_{i + unique}(b) == N_i(a) for the k+1 functions crossing the seam
        for order in range(k + 1):
            at_a = _dense(left, count, order)[: k + 1]
            at_b = _dense(right, count, order)[unique : unique + k + 1]
            scale = max(1.0, np.abs(at_a).max())
            assert np.allclose(at_a, at_b, rtol=0, atol=1e-12 * scale)
