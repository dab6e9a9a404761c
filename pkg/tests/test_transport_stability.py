import numpy as np
import pytest

from origami_billiards.billiards import simulate
from origami_billiards.geom_core import box, polygon
from origami_billiards.transport_stability import (
    BouquetSpec,
    LoopInDouble,
    NotALoop,
    Singular,
    bouquet_simple,
    certify_bouquet,
    defect_operator,
    direct_sum,
    index_form,
    irreducibility_check,
    kernel,
    predicted_kernel,
    principal_angle,
    stationarity_residual,
    superadditivity_check,
    trivial_intersection,
    twisted_tube_certificate,
    twisted_tube_residual,
)

E = np.eye(3)


def col(*vs):
    return np.array(vs, dtype=float).T


def right_angle_loop():
    # hypotenuse then leg of a right isosceles triangle turns the direction by 90 degrees
    T = polygon([(0, 0), (2, 0), (0, 2)], ids=["B", "H", "L"])
    p = np.array([1.0, 0.5])
    d = (np.array([[0, -1], [1, 0]]) - np.eye(2)) @ (p - np.array([2.0, 0.0]))
    return LoopInDouble(simulate(T, p, d / np.linalg.norm(d), float(np.linalg.norm(d))))


def test_kernel_of_simple_matrices():
    K = kernel(np.diag([1.0, 0.0, 2.0]))
    assert K.shape == (3, 1)
    assert principal_angle(K, col([0, 1, 0])) <= 1e-12
    assert kernel(np.zeros((2, 2))).shape == (2, 2)


def test_trivial_intersection_examples():
    assert trivial_intersection([col([0, 1, 0]), col([0, 0, 1])])
    assert not trivial_intersection([col([0, 1, 0]), col([0, 1, 0], [0, 0, 1])])


def test_principal_angle_dimension_mismatch():
    assert principal_angle(col([1, 0, 0]), col([1, 0, 0], [0, 1, 0])) == pytest.approx(np.pi / 2)


def test_stationarity_right_angle_pair():
    lp = right_angle_loop()
    assert lp.sheet_consistent
    r = stationarity_residual(BouquetSpec((lp,)))
    assert r == pytest.approx(2 * np.sin(np.pi / 4), abs=1e-12)


def test_pass_through_loops_do_not_count(square_y2):
    a = simulate(square_y2, [0, 0], np.array([-1, 1]) / np.sqrt(2), 4 * np.sqrt(2))
    lp = LoopInDouble(a)
    assert not lp.sheet_consistent
    assert stationarity_residual(BouquetSpec((lp,))) == 0.0


def test_not_a_loop():
    sq = box([0, 0], [1, 1])
    with pytest.raises(NotALoop):
        LoopInDouble(simulate(sq, [0.5, 0.5], [1, 0], 0.7))


def test_tower3_kernel_is_tangent_line(towers):
    lp = towers[3].bouquet_spec("tower").loops[0]
    K = kernel(defect_operator(lp))
    assert K.shape[1] == 1
    assert principal_angle(K, lp.tangent_out[:, None]) <= 1e-6


def test_predicted_kernel_rules():
    v = np.array([1.0, 0.0, 0.0])
    # odd parity: the tangent line survives; an even fold count adds a height axis
    assert principal_angle(predicted_kernel(3, [3], (v, v)), col(v)) <= 1e-12
    P = predicted_kernel(3, [2], (v, v))
    assert principal_angle(P, col(v, [0, 0, 1])) <= 1e-12
    assert predicted_kernel(2, [3], (v, v)).shape[1] == 0


def test_figure_eight_3d_certificate(fig3):
    b = fig3.bouquet_spec("figure_eight")
    cert = certify_bouquet(b, [col([0, 1, 0]), col([0, 0, 1])], grid=16)
    assert max(cert.prediction_angles) <= 1e-6
    assert cert.trivial_intersection
    assert cert.stationarity_residual <= 1e-9
    assert cert.irreducible and cert.simple and cert.sheet_consistent
    assert cert.verdict
    assert cert.to_json()["verdict"] == "pass"
    assert irreducibility_check(b) and bouquet_simple(b)


def test_index_form_tower3_approximates_pi_squared(towers):
    b = towers[3].bouquet_spec("tower")
    f16 = index_form(b, 16)
    # [DERIVED] frozen from the assembled quadrature
    assert f16.min_eigenvalue == pytest.approx(9.870251534143355, rel=1e-9)
    assert f16.kernel_dim == 0
    assert f16.constraint_nullity == 1
    assert np.sum(np.abs(f16.eigenvalues - f16.min_eigenvalue) <= 1e-6 * f16.min_eigenvalue) == 4
    f32 = index_form(b, 32)
    assert f32.min_eigenvalue == pytest.approx(9.869766180972137, rel=1e-9)
    # convergence towards pi^2 from above
    assert abs(f32.min_eigenvalue - np.pi**2) < abs(f16.min_eigenvalue - np.pi**2)
    assert f32.min_eigenvalue > np.pi**2


def test_index_form_figure_eight_3d(fig3):
    f = index_form(fig3.bouquet_spec("figure_eight"), 16)
    assert f.min_eigenvalue == pytest.approx(3.650607894639772, rel=1e-9)  # [DERIVED]
    assert f.kernel_dim == 0 and f.constraint_nullity == 0
    with pytest.raises(ValueError):
        index_form(fig3.bouquet_spec("figure_eight"), 4)


def test_twisted_tube(towers):
    lp = towers[3].bouquet_spec("tower").loops[0]
    assert twisted_tube_residual(lp) <= 1e-9
    assert twisted_tube_certificate(lp)
    sq = box([0, 0], [1, 1])
    assert not twisted_tube_certificate(LoopInDouble(simulate(sq, [0.5, 0.5], [1, 0], 10.0)))


def test_direct_sum_and_superadditivity(fig3, fig3_small):
    F = fig3.bouquet_spec("figure_eight")
    G = fig3_small.bouquet_spec("figure_eight")
    S = direct_sum(F, G)
    assert S.dim == 6
    for lp, la, lb in zip(S.loops, F.loops, G.loops):
        assert lp.collisions == la.collisions + lb.collisions
        assert lp.transport == pytest.approx(np.block([[la.transport, np.zeros((3, 3))], [np.zeros((3, 3)), lb.transport]]), abs=1e-12)
    assert superadditivity_check(F, G, trials=100, seed=0) >= -1e-8
    with pytest.raises(Singular):
        direct_sum(F, F)
