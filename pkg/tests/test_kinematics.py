import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mixfem.errors import InvertedElementError
from mixfem.kinematics import (
    check_positive,
    deformation_gradient,
    deformation_gradients,
    det3,
    inv3,
    operator_matrices,
    spatial_gradients,
    unvec9,
    vec9,
)


def cofactor_det(A):
    a = A.tolist()
    return (a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]))


def test_undeformed_state():
    s = deformation_gradient(np.zeros((3, 3)))
    np.testing.assert_array_equal(s.F, np.eye(3))
    assert s.J == 1.0 and s.I1bar == pytest.approx(3.0, abs=1e-15)
    np.testing.assert_allclose(s.Fbar, np.eye(3))


def test_uniaxial_stretch():
    s = deformation_gradient(np.diag([1.0, 0.0, 0.0]))
    assert s.J == pytest.approx(2.0, rel=1e-15)
    np.testing.assert_allclose(s.Fbar, np.diag([2.0, 1.0, 1.0]) * 2 ** (-1 / 3), rtol=1e-15)
    assert np.linalg.det(s.Fbar) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (3, 3), elements=st.floats(-0.3, 0.3)))
def test_state_invariants(grad_u):
    s = deformation_gradient(grad_u)
    assert s.J == pytest.approx(cofactor_det(s.F), rel=1e-12)
    assert np.linalg.det(s.Fbar) == pytest.approx(1.0, abs=1e-10)
    np.testing.assert_allclose(s.Cbar, s.Cbar.T, atol=1e-14)
    assert np.all(np.linalg.eigvalsh(s.Cbar) > 0)


@pytest.mark.parametrize("alpha", [0.3, 1.0, 2.5, 7.0])
def test_pure_dilation_has_identity_isochoric_part(alpha):
    s = deformation_gradient((alpha - 1.0) * np.eye(3))
    np.testing.assert_allclose(s.Fbar, np.eye(3), atol=1e-12)
    assert s.I1bar == pytest.approx(3.0, abs=1e-12)


def test_inverted_gradient_raises():
    with pytest.raises(InvertedElementError) as ei:
        deformation_gradient(np.diag([-1.5, 0.0, 0.0]))
    assert ei.value.value == pytest.approx(-0.5)


def test_check_positive_reports_location():
    J = np.ones((3, 4))
    J[2, 1] = -0.25
    with pytest.raises(InvertedElementError) as ei:
        check_positive(J)
    assert (ei.value.element, ei.value.point) == (2, 1)
    assert "element 2" in str(ei.value)


def test_batched_det_and_inverse(rng):
    F = np.eye(3) + 0.3 * rng.normal(size=(5, 7, 3, 3))
    np.testing.assert_allclose(det3(F), np.linalg.det(F), rtol=1e-12)
    np.testing.assert_allclose(inv3(F), np.linalg.inv(F), rtol=1e-10, atol=1e-12)


def test_vec9_layout():
    A = np.arange(9.0).reshape(3, 3)
    v = vec9(A)
    for i in range(3):
        for j in range(3):
            assert v[i + 3 * j] == A[i, j]
    np.testing.assert_array_equal(unvec9(v), A)


def test_single_node_operator():
    op = operator_matrices(np.array([[1.0, 0.0, 0.0]]))
    assert np.count_nonzero(op.G) == 3
    np.testing.assert_array_equal(op.D, [[1.0, 0.0, 0.0]])


def test_operator_matrices_reproduce_spatial_gradient(hex_geom, rng):
    u = 0.1 * rng.normal(size=(1, 8, 3))
    F = deformation_gradients(u, hex_geom.dN_dX)[0, 0]
    dN_dx = spatial_gradients(hex_geom.dN_dX[0, 0], np.linalg.inv(F))
    op = operator_matrices(dN_dx)
    grad_x = unvec9(op.G @ u.reshape(-1))
    # push-forward: grad_x u = grad_X u F^-1
    grad_X = F - np.eye(3)
    np.testing.assert_allclose(grad_x, grad_X @ np.linalg.inv(F), atol=1e-11)
    assert (op.D @ u.reshape(-1))[0] == pytest.approx(np.trace(grad_x), abs=1e-13)


def test_divergence_is_trace_contraction(rng):
    dN = rng.normal(size=(10, 3))
    op = operator_matrices(dN)
    u = rng.normal(size=30)
    assert (op.D @ u)[0] == pytest.approx(np.trace(unvec9(op.G @ u)), abs=1e-13)


def test_operator_layout_is_stable(rng):
    dN = rng.normal(size=(4, 3))
    a, b = operator_matrices(dN), operator_matrices(dN.copy())
    assert a.G.tobytes() == b.G.tobytes()
