import os

import numpy as np
import pytest

os.environ["ISOPATCH_TYPECHECKING"] = "crash"

from isopatch.utils.errors import (
    ContractError,
    DegenerateConfigurationError,
    ParameterError,
    SingularMappingError,
)
from isopatch.utils.geometry import (
    NurbsPatch,
    inverse_map_higher,
    map_and_jacobian,
    push_forward,
)
from isopatch.utils.nurbs import eval_rational, mirror_symmetric, tensor_basis
from isopatch.utils.patches import (
    box_patch,
    identity_patch,
    make_geometry,
    quarter_annulus_patch,
    refine_patch,
    unclamp_patch,
)
from isopatch.utils.space import eval_point, map_point, uniform_space
from isopatch.utils.splines import KnotVector, eval_basis


def _rows(kv, xi, nderiv):
    t = eval_basis(kv, xi, nderiv)
    return np.stack([t.row(o) for o in range(nderiv + 1)])[:, None, :]


@pytest.mark.basic
def test_unit_weights_give_bsplines():
    kv = KnotVector([0, 0, 0, 0.5, 1, 1, 1], 2)
    rows = [_rows(kv, 0.3, 3), _rows(kv, 0.8, 3)]
    tb = tensor_basis(rows, 3)
    rt = eval_rational(tb, np.ones(9), 3)
    assert np.allclose(rt.values, tb.values, atol=1e-14)
    assert np.allclose(rt.d1, tb.d1, atol=1e-13)
    assert np.allclose(rt.d2, tb.d2, atol=1e-12)
    assert np.allclose(rt.d3, tb.d3, atol=1e-11)


@pytest.mark.basic
def test_single_supported_function():
    kv = KnotVector([0, 0, 0, 1, 1, 1], 2)
    tb = tensor_basis([_rows(kv, 0.0, 1)], 1)
    rt = eval_rational(tb, np.array([2.0, 5.0, 7.0]), 1)
    assert np.allclose(rt.values[0], [1.0, 0.0, 0.0], atol=1e-15)


@pytest.mark.basic
def test_circular_arc_values():
    kv = KnotVector([0, 0, 0, 1, 1, 1], 2)
    w = np.array([1.0, np.sqrt(2) / 2, 1.0])
    rt = eval_rational(tensor_basis([_rows(kv, 0.5, 2)], 2), w, 2)
    assert rt.weight_value[0] == pytest.approx(0.853553, abs=1e-6)
    assert np.allclose(rt.values[0], [0.292893, 0.414214, 0.292893], atol=1e-6)
    assert rt.values.sum() == pytest.approx(1.0, abs=1e-15)
    assert rt.d1.sum() == pytest.approx(0.0, abs=1e-14)


@pytest.mark.basic
@pytest.mark.parametrize("dim", [1, 2, 3])
def test_rational_derivatives_match_finite_differences(dim):
    kv = KnotVector([0, 0, 0, 0.5, 1, 1, 1], 2)
    # every point stays in the first span, whose 3 local functions get the weights
    w = np.random.default_rng(dim).uniform(0.6, 1.4, size=3**dim)
    xi0 = np.array([0.3, 0.2, 0.35][:dim])
    h = 1e-5

    def rational(xi):
        rows = [_rows(kv, float(x), 3) for x in xi]
        return eval_rational(tensor_basis(rows, 3), w, 3)

    rt = rational(xi0)
    assert np.allclose(rt.values.sum(), 1.0, atol=1e-14)
    for a in range(dim):
        e = np.zeros(dim)
        e[a] = h
        plus, minus = rational(xi0 + e), rational(xi0 - e)
        assert np.allclose(rt.d1[..., a], (plus.values - minus.values) / (2 * h), rtol=1e-6, atol=1e-8)
        assert np.allclose(rt.d2[..., a], (plus.d1 - minus.d1) / (2 * h), rtol=1e-6, atol=1e-6)
        assert np.allclose(rt.d3[..., a], (plus.d2 - minus.d2) / (2 * h), rtol=1e-5, atol=1e-5)


@pytest.mark.basic
def test_rational_weight_checks():
    kv = KnotVector([0, 0, 1, 1], 1)
    tb = tensor_basis([_rows(kv, 0.5, 1)], 1)
    with pytest.raises(ParameterError):
        eval_rational(tb, np.array([1.0, 0.0]), 1)
    with pytest.raises(ContractError):
        eval_rational(tb, np.array([1.0, 1.0]), 2)
    with pytest.raises(ParameterError):
        NurbsPatch.from_ctrl(np.zeros((2, 1)), np.array([1.0, -1.0]))


@pytest.mark.basic
def test_mirror_symmetric_is_exact():
    block = np.random.default_rng(0).normal(size=(4, 3, 3, 3))
    out = mirror_symmetric(block, 3)
    for perm in [(0, 2, 1), (1, 0, 2), (2, 1, 0), (1, 2, 0), (2, 0, 1)]:
        assert np.array_equal(out, np.transpose(out, (0,) + tuple(p + 1 for p in perm)))


@pytest.mark.basic
def test_identity_map():
    space, patch = box_patch(2)
    ev = eval_point(space, patch, [0.3, 0.7], 1)
    assert np.allclose(ev.x, [0.3, 0.7], atol=1e-15)
    assert np.allclose(ev.dx, np.eye(2), atol=1e-15)
    assert ev.shape.det == pytest.approx(1.0)


@pytest.mark.basic
def test_scaling_map():
    space = uniform_space(2, 2, 3)
    ident = identity_patch(space)
    scaled = NurbsPatch(ident.points * np.array([2.0, 2.0, 1.0]))
    xi = [0.3, 0.8]
    a = eval_point(space, ident, xi, 3)
    b = eval_point(space, scaled, xi, 3)
    assert np.allclose(a.dx, np.eye(2), atol=1e-13)
    assert np.allclose(b.dx, 2 * np.eye(2), atol=1e-13)
    assert b.shape.det == pytest.approx(4.0)
    assert np.allclose(b.shape.grad, a.shape.grad / 2, atol=1e-12)
    assert np.allclose(b.shape.hess, a.shape.hess / 4, atol=1e-10)
    assert np.allclose(b.shape.third, a.shape.third / 8, atol=1e-8)


@pytest.mark.basic
def test_affine_map_has_no_curvature():
    space, _ = box_patch(2)
    ctrl = np.array([[[0.0, 0.0], [0.5, 1.0]], [[2.0, 0.3], [2.5, 1.3]]])
    patch = NurbsPatch.from_ctrl(ctrl)
    kvs = [ax.knots for ax in space.axes]
    tb = tensor_basis([_rows(kvs[0], 0.4, 3), _rows(kvs[1], 0.9, 3)], 3)
    rt = eval_rational(tb, patch.flat_weights(), 3)
    md = inverse_map_higher(map_and_jacobian(patch.flat_ctrl(), rt), 3)
    assert np.allclose(md.dx2, 0.0, atol=1e-14)
    assert np.allclose(md.dxi2, 0.0, atol=1e-14)
    assert np.allclose(md.dxi3, 0.0, atol=1e-14)


@pytest.mark.basic
def test_inverse_derivatives_of_square_map():
    # x = xi^2 on [0, 1], inverse xi = sqrt(x)
    kv = KnotVector([0, 0, 0, 1, 1, 1], 2)
    tb = tensor_basis([_rows(kv, 1.0, 3)], 3)
    rt = eval_rational(tb, np.ones(3), 3)
    md = map_and_jacobian(np.array([[0.0], [0.0], [1.0]]), rt)
    md = inverse_map_higher(md, 3)
    assert md.x[0, 0] == pytest.approx(1.0)
    assert md.dxi[0, 0, 0] == pytest.approx(0.5, abs=1e-14)
    assert md.dxi2[0, 0, 0, 0] == pytest.approx(-0.25, abs=1e-14)
    assert md.dxi3[0, 0, 0, 0, 0] == pytest.approx(0.375, abs=1e-14)


@pytest.mark.basic
def test_missing_orders():
    kv = KnotVector([0, 0, 0, 1, 1, 1], 2)
    rt = eval_rational(tensor_basis([_rows(kv, 0.5, 1)], 1), np.ones(3), 1)
    md = map_and_jacobian(np.array([[0.0], [0.5], [1.0]]), rt)
    with pytest.raises(ContractError):
        push_forward(rt, md, 2)
    with pytest.raises(ContractError):
        inverse_map_higher(md, 2)


@pytest.mark.basic
def test_singular_map():
    space, _ = box_patch(1)
    patch = NurbsPatch.from_ctrl(np.array([[1.0], [1.0]]))
    with pytest.raises(SingularMappingError):
        eval_point(space, patch, [0.5], 1)


@pytest.mark.basic
def test_annulus_geometry(annulus):
    space, patch = annulus
    for xi in ([0.0, 0.0], [1.0, 0.3], [0.4, 0.75]):
        x = map_point(space, patch, xi)
        assert np.linalg.norm(x) == pytest.approx(1.0 + xi[0], abs=1e-14)
    h = 1e-6
    xi = np.array([0.35, 0.6])
    ev = eval_point(space, patch, xi.tolist(), 1)
    for b in range(2):
        e = np.zeros(2)
        e[b] = h
        fd = (map_point(space, patch, (xi + e).tolist()) - map_point(space, patch, (xi - e).tolist())) / (2 * h)
        assert np.allclose(ev.dx[:, b], fd, rtol=1e-6, atol=1e-9)


@pytest.mark.basic
def test_annulus_physical_derivatives():
    space = uniform_space(2, 4, 2)
    patch = make_geometry("annulus", space)
    xi0 = np.array([0.3, 0.6])
    h = 1e-6
    ev = eval_point(space, patch, xi0.tolist(), 3)
    for b in range(2):
        e = np.zeros(2)
        e[b] = h
        plus = eval_point(space, patch, (xi0 + e).tolist(), 3)
        minus = eval_point(space, patch, (xi0 - e).tolist(), 3)
        assert np.array_equal(plus.nodes, ev.nodes)
        # derivative along xi_b of a spatial derivative is its gradient times x_{,b}
        fd_grad = (plus.shape.grad - minus.shape.grad) / (2 * h)
        assert np.allclose(fd_grad, ev.shape.hess @ ev.dx[:, b], rtol=1e-5, atol=1e-6)
        fd_hess = (plus.shape.hess - minus.shape.hess) / (2 * h)
        assert np.allclose(fd_hess, ev.shape.third @ ev.dx[:, b], rtol=1e-5, atol=1e-5)
        fd_values = (plus.shape.values - minus.shape.values) / (2 * h)
        assert np.allclose(fd_values, ev.shape.grad @ ev.dx[:, b], rtol=1e-6, atol=1e-8)
    hess = ev.shape.hess
    assert np.array_equal(hess, np.swapaxes(hess, -1, -2))


@pytest.mark.basic
def test_refine_patch_is_exact(annulus):
    coarse_space, coarse = annulus
    space = uniform_space(2, (3, 5), 3, 1)
    fine = refine_patch(coarse, coarse_space, space)
    for xi in ([0.1, 0.2], [0.5, 0.5], [0.93, 0.01], [1.0, 1.0]):
        assert np.allclose(map_point(space, fine, xi), map_point(coarse_space, coarse, xi), atol=1e-12)


@pytest.mark.basic
def test_refine_patch_rejects_lower_degree(annulus):
    coarse_space, coarse = annulus
    with pytest.raises(ParameterError):
        refine_patch(coarse, coarse_space, uniform_space(2, 2, 1))


@pytest.mark.basic
def test_make_geometry_errors():
    with pytest.raises(ParameterError):
        make_geometry("annulus", uniform_space(2, 2, 1))
    with pytest.raises(ParameterError):
        make_geometry("annulus", uniform_space(3, 2, 2))
    with pytest.raises(ParameterError):
        make_geometry("annulus", uniform_space(2, 4, 2, periodic=True))


@pytest.mark.basic
def test_identity_patch_on_periodic_space():
    space = uniform_space(2, 5, 3, 2, periodic=True)
    patch = identity_patch(space)
    assert patch.counts == space.clamped_counts
    for xi in ([0.0, 0.0], [0.37, 0.81], [1.0, 0.5]):
        assert np.allclose(map_point(space, patch, xi), xi, atol=1e-12)


@pytest.mark.basic
def test_unclamp_patch_keeps_map():
    clamped = uniform_space(2, 5, 2, 1)
    periodic = uniform_space(2, 5, 2, 1, periodic=True)
    patch = identity_patch(clamped)
    moved = NurbsPatch(patch.points * np.array([1.5, 0.5, 1.0]))
    out = unclamp_patch(periodic, moved)
    for xi in ([0.05, 0.9], [0.5, 0.5], [0.99, 0.01]):
        assert np.allclose(map_point(periodic, out, xi), map_point(clamped, moved, xi), atol=1e-12)


@pytest.mark.basic
def test_degenerate_weighting():
    kv = KnotVector([0, 0, 0, 1, 1, 1], 2)
    tb = tensor_basis([_rows(kv, 0.5, 1)], 1)
    tb_bad = type(tb)(values=-tb.values, d1=tb.d1)
    with pytest.raises(DegenerateConfigurationError):
        eval_rational(tb_bad, np.ones(3), 1)


@pytest.mark.basic
@pytest.mark.parametrize("dim", [1, 2, 3])
def test_perturbed_patch_identities(dim):
    rng = np.random.default_rng(10 + dim)
    space = uniform_space(dim, 1, 3)
    base = identity_patch(space)
    ctrl = base.ctrl + rng.uniform(-0.05, 0.05, base.ctrl.shape)
    patch = NurbsPatch.from_ctrl(ctrl, rng.uniform(0.8, 1.25, base.weights.shape))
    for _ in range(4):
        xi = rng.uniform(0.0, 1.0, dim)
        rows = [_rows(ax.knots, float(x), 3) for ax, x in zip(space.axes, xi)]
        rt = eval_rational(tensor_basis(rows, 3), patch.flat_weights(), 3)
        md = inverse_map_higher(map_and_jacobian(patch.flat_ctrl(), rt), 3)
        assert np.all(md.det > 0)
        assert np.allclose(md.dx @ md.dxi, np.eye(dim), atol=1e-12)
        shapes = push_forward(rt, md, 3)
        assert shapes.values.sum() == pytest.approx(1.0, abs=1e-13)
        for block in (shapes.grad, shapes.hess, shapes.third):
            scale = max(1.0, np.abs(block).max())
            assert np.allclose(block.sum(axis=1), 0.0, atol=1e-11 * scale)
