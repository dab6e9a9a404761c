import copy

import numpy as np
import pytest

from origami_billiards.billiards import is_simple, transport
from origami_billiards.constructions import (
    ConstructionResult,
    SingularSchedule,
    StageFailed,
    ValidationFailed,
    certify,
    collision_schedule,
    decagon,
    fagnano_seed,
    figure_eight_3d,
    figure_eight_5d,
    figure_eight_n,
    homothety_fit,
    load_polygon_data,
    pentagon_crossings,
    solve_figure_eight_polygons,
    twisted_tower,
    validate_polygon_data,
)
from origami_billiards.transport_stability import Singular, min_collision_gap

SQRT3 = np.sqrt(3.0)


def test_fagnano_seed_is_a_simple_loop():
    T, tr = fagnano_seed()
    np.testing.assert_allclose(tr.start, [0.75, SQRT3 / 4])
    assert tr.is_loop() and is_simple(tr)
    assert len(tr.collisions) == 3


@pytest.mark.parametrize("n", [3, 4, 5])
def test_twisted_tower(towers, n):
    res = towers[n]
    beta = res.trajectories[f"beta{n}"]
    assert beta.dim == n
    assert len(beta.collisions) == 3 * (n - 1)
    assert len(set(beta.facet_sequence)) == len(beta.facet_sequence)
    assert is_simple(beta)
    P = transport(beta).linear
    v = beta.velocity0 / np.linalg.norm(beta.velocity0)
    np.testing.assert_allclose(P @ v, v, atol=1e-9)
    assert np.linalg.det(P) == pytest.approx((-1.0) ** (3 * (n - 1)))
    cert = certify(res, grid=16)
    assert cert.ok, [c.name for c in cert.failed()]


def test_tower_shrinks_delta_as_it_climbs(towers):
    # [DERIVED] each stage halves until the new wedges clear the earlier creases
    assert towers[4].stages[-1].params["delta"] == pytest.approx(0.003125)
    assert towers[5].stages[-1].params["delta"] == pytest.approx(0.0001953125)
    assert towers[3].stages[-1].params["delta"] == pytest.approx(0.05)


def test_tower_rejects_small_n():
    with pytest.raises(ValueError):
        twisted_tower(2)


def test_figure_eight_3d(fig3):
    X3 = fig3.polytopes["X3"]
    assert X3.dim == 3
    assert sorted(X3.ids) == sorted(["F2+", "F2-", "F3+", "F3-", "F1+", "F1-", "rF2+", "rF2-"])
    assert len(X3.vertices) == 12
    a, b = fig3.trajectories["alpha3"], fig3.trajectories["beta3"]
    np.testing.assert_allclose(a.start, 0, atol=1e-12)
    np.testing.assert_allclose(b.start, 0, atol=1e-12)
    assert len(a.collisions) == len(b.collisions) == 6
    cert = certify(fig3, grid=16)
    assert cert.ok, [c.name for c in cert.failed()]
    assert cert.check("stationarity:figure_eight").value <= 1e-9


def test_figure_eight_3d_large_delta_fails_with_witness():
    with pytest.raises(StageFailed) as exc:
        figure_eight_3d(5.0)
    assert exc.value.stage == "alpha-lift"
    assert exc.value.certificate == "isolated_collisions"
    assert "[0.0, 0.0]" in exc.value.witness


def test_polygon_data_round_trip():
    data = load_polygon_data()
    fresh = solve_figure_eight_polygons()
    for key in ("Y", "Z"):
        np.testing.assert_allclose(data[key]["vertices"], fresh[key]["vertices"], atol=1e-12)
    pd = validate_polygon_data(data)
    assert pd.alpha.length == pytest.approx(pd.beta.length, abs=1e-9)
    assert pd.alpha.length == pytest.approx(9.611789039188006, abs=1e-9)
    assert len(pd.alpha.collisions) % 2 == 1 and len(pd.beta.collisions) % 2 == 0


@pytest.mark.parametrize(
    "mutate, predicate",
    [
        (lambda d: d["Y"]["vertices"].reverse(), "convex"),
        (lambda d: d["alpha"].update(length=d["alpha"]["length"] * 0.9), "alpha_loop"),
        (lambda d: d["beta"].update(start=[d["beta"]["start"][0] + 0.01, d["beta"]["start"][1]]), "beta_loop"),
        (lambda d: d["alpha_heights"].update(NOPE=1), "fold_pattern"),
    ],
)
def test_polygon_data_validation_failures(mutate, predicate):
    data = copy.deepcopy(load_polygon_data())
    mutate(data)
    with pytest.raises(ValidationFailed) as exc:
        validate_polygon_data(data)
    assert exc.value.predicate == predicate


def test_figure_eight_4d(fig4):
    assert fig4.params["delta_used"] == pytest.approx(0.025)
    assert fig4.params["epsilon_used"] == pytest.approx(0.0015625)
    X3, X4 = fig4.polytopes["X3"], fig4.polytopes["X4"]
    assert sorted(X3.ids) == sorted(["AB+", "AB-", "BC+", "BC-", "CE", "EF+", "EF-", "FG+", "FG-", "HI+", "HI-", "IJ"])
    assert len(X4.facets) == 18
    assert fig4.trajectories["alpha3"].facet_sequence == ("AB-", "AB+", "EF+", "EF-", "CE", "BC+", "BC-", "FG-", "FG+")
    assert fig4.trajectories["beta3"].facet_sequence == ("FG+", "AB+", "HI+", "HI-", "IJ", "FG-", "AB-")
    assert len(fig4.trajectories["alpha4"].collisions) == 12
    assert len(fig4.trajectories["beta4"].collisions) == 10
    cert = certify(fig4, grid=16)
    assert cert.ok, [c.name for c in cert.failed()]
    ks = cert.certificates["figure_eight"].kernels
    assert [k.shape[1] for k in ks] == [2, 1]


def test_pentagon_crossings():
    pts = pentagon_crossings()
    assert len(pts) == 10
    # [DERIVED] lexicographic order of the ten crossings
    np.testing.assert_allclose(pts[0], [-0.809016994, 0.0], atol=1e-9)
    np.testing.assert_allclose(pts[1], [-0.654508497, -0.475528258], atol=1e-9)
    np.testing.assert_allclose(pts[2], [-0.654508497, 0.475528258], atol=1e-9)
    D = decagon()
    assert all(D.contains(p) for p in pts)


def test_figure_eight_5d(fig5):
    X5 = fig5.polytopes["X5"]
    assert X5.dim == 5 and len(X5.facets) == 22
    la = fig5.trajectories["loop_alpha"]
    # [DERIVED]
    expected = [0.1434549, 0.14472136, 0.15081156, 0.34472136, 0.40890603, 0.41504005, 0.5,
                0.54472136, 0.58495995, 0.59109397, 0.74472136, 0.84918844, 0.8565451, 0.94472136]
    np.testing.assert_allclose(la.normalized_collision_times(), expected, atol=1e-7)
    cert = certify(fig5, grid=16)
    assert cert.ok, [c.name for c in cert.failed()]
    assert [k.shape[1] for k in cert.certificates["x3_factor"].kernels] == [2, 1]
    assert [k.shape[1] for k in cert.certificates["decagon_factor"].kernels] == [1, 1]
    assert cert.check("collision_gap:product").value > 1e-7
    for a, b in (("alpha3", "pentagon1"), ("beta3", "pentagon2")):
        assert min_collision_gap(fig5.trajectories[a], fig5.trajectories[b]) > 1e-7


def test_figure_eight_5d_other_basepoint():
    res = figure_eight_5d(y_choice=3)
    np.testing.assert_allclose(res.trajectories["pentagon1"].start, pentagon_crossings()[3])
    assert res.trajectories["pentagon1"].is_loop()


@pytest.mark.parametrize("n", [6, 7])
def test_figure_eight_n(fig6, fig7, n):
    res = {6: fig6, 7: fig7}[n]
    assert res.polytopes[res.trajectory_polytope["P1/loop_alpha"]].dim == n
    cert = certify(res, grid=16)
    assert cert.ok, [c.name for c in cert.failed()]
    sched = collision_schedule(res)
    assert set(sched) == {"P1/loop_alpha", "P1/loop_beta"}


def test_figure_eight_n_rejects_coincident_schedules():
    with pytest.raises(SingularSchedule) as exc:
        figure_eight_n(6, (0.08, 0.08))
    assert isinstance(exc.value, Singular)
    assert "copy 1" in exc.value.suggestion
    with pytest.raises(ValueError):
        figure_eight_n(5)


def test_homothety_fit_is_exact_for_linear_data():
    fit = homothety_fit([0.02, 0.04, 0.08], [[1 + 0.02 * 3, 2], [1 + 0.04 * 3, 2], [1 + 0.08 * 3, 2]])
    assert fit["mu"] == pytest.approx([1, 2])
    assert fit["tau"] == pytest.approx([3, 0], abs=1e-12)
    assert fit["residual"] <= 1e-12


def test_result_json_round_trip(fig5):
    back = ConstructionResult.from_json(fig5.to_json())
    assert set(back.polytopes) == set(fig5.polytopes)
    a, b = certify(fig5, grid=16), certify(back, grid=16)
    assert [(c.name, c.passed, c.value) for c in a.checks] == [(c.name, c.passed, c.value) for c in b.checks]
