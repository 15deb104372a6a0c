import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from pytest import mark, raises

from roughmax.errors import ParameterError, SingularDirectionError
from roughmax.kernels import RoughKernel, SphereFunction, kernel_from_json, sphere_quadrature


@mark.parametrize("n, total", [(1, 2.0), (2, 2 * np.pi), (3, 4 * np.pi)])
def test_sphere_quadrature_total_mass(n, total):
    nodes, w = sphere_quadrature(n, 16)
    assert np.isclose(w.sum(), total, rtol=1e-13)
    assert np.allclose(np.linalg.norm(nodes, axis=1), 1.0)


def test_sphere_quadrature_integrates_polynomials():
    nodes, w = sphere_quadrature(3, 16)
    assert np.isclose(w @ nodes[:, 2] ** 2, 4 * np.pi / 3, rtol=1e-13)
    nodes, w = sphere_quadrature(2, 16)
    assert np.isclose(w @ nodes[:, 0] ** 2, np.pi, rtol=1e-13)


def test_constant_and_sign_kernel_evaluation():
    assert RoughKernel.const(1.0, 1, 2).evaluate([[0.3], [-2.0]]) == 1.0
    sign = RoughKernel.product([SphereFunction(1, {"+": 2.0, "-": 0.0})], s=2.0)
    assert sign.evaluate([0.3]) == 2.0
    assert sign.evaluate([-0.3]) == 0.0
    with raises(SingularDirectionError):
        sign.evaluate([0.0])


@given(st.floats(1e-3, 1e3))
def test_kernels_are_homogeneous_of_degree_zero(lam):
    f = SphereFunction(2, np.arange(16.0), order=16)
    k = RoughKernel.product([f, f], s=2.0)
    y = np.array([[0.3, -0.7], [1.1, 0.2]])
    assert k.evaluate(lam * y) == k.evaluate(y)


@mark.parametrize("m, expected", [(1, np.sqrt(2)), (2, 2.0)])
def test_ls_norm_of_constant_kernel_on_s0(m, expected):
    assert np.isclose(RoughKernel.const(1.0, 1, m).ls_norm(2.0), expected, rtol=1e-15)


def test_ls_norm_of_sign_kernel():
    k = RoughKernel.product([SphereFunction(1, {"+": 2.0, "-": 0.0})], s=2.0)
    assert k.ls_norm() == 2.0


def test_ls_norm_of_constant_kernel_in_two_dimensions():
    k = RoughKernel.const(1.0, 2, 1)
    assert np.isclose(k.ls_norm(2.0), np.sqrt(2 * np.pi), rtol=1e-13)


@settings(max_examples=50)
@given(st.lists(st.floats(0, 10), min_size=4, max_size=4), st.floats(0.01, 100), st.floats(1.1, 6))
def test_ls_norm_is_homogeneous_and_factors(vals, lam, s):
    f1 = SphereFunction(1, vals[:2])
    f2 = SphereFunction(1, vals[2:])
    k = RoughKernel.product([f1, f2], s)
    scaled = RoughKernel.product([SphereFunction(1, [lam * vals[0], lam * vals[1]]), f2], s)
    assert np.isclose(scaled.ls_norm(), lam * k.ls_norm(), rtol=1e-12, atol=1e-300)
    assert np.isclose(k.to_joint().ls_norm(), f1.ls_norm(s) * f2.ls_norm(s), rtol=1e-13, atol=1e-300)


@mark.parametrize("n", [1, 2])
def test_product_form_equals_joint_form_at_random_directions(n, rng):
    order = 12
    m = 2
    size = 2 if n == 1 else order
    factors = [SphereFunction(n, rng.random(size) * 3, order=order) for _ in range(m)]
    prod = RoughKernel.product(factors, s=2.0)
    joint = prod.to_joint()
    for _ in range(100):
        y = rng.normal(size=(m, n))
        assert np.isclose(prod.evaluate(y), joint.evaluate(y), rtol=1e-15)


def test_joint_stencil_averages_zero_components():
    k = RoughKernel.joint_1d({"++": 4.0, "+-": 0.0, "-+": 2.0, "--": 2.0}, m=2, s=2.0)
    st_ = k.joint_stencil(np.array([[[0.0], [1.0]], [[1.0], [-1.0]]]))
    # first offset: y_1 = 0 averages over both signs of y_1 with y_2 > 0
    assert list(st_) == [3.0, 0.0]


def test_kernel_from_json_forms():
    k = kernel_from_json({"form": "product", "values": [{"+": 2, "-": 0}], "s": 2}, 1, 1)
    assert k.describe()["values"] == [{"+": 2.0, "-": 0.0}]
    j = kernel_from_json({"form": "joint", "values": {"++": 1, "+-": 2, "-+": 3, "--": 4}, "s": 3}, 1, 2)
    assert j.evaluate([[1.0], [-1.0]]) == 2.0
    assert kernel_from_json({"value": 2.0}, 1, 2).evaluate([[1.0], [1.0]]) == 2.0
    with raises(ParameterError):
        kernel_from_json({"form": "joint", "values": {"+x": 1}}, 1, 2)
    with raises(ParameterError):
        kernel_from_json({"form": "spiral"}, 1, 1)
