import numpy as np
import pytest

from origami_billiards.billiards import is_simple, simulate
from origami_billiards.constructions import fagnano_seed
from origami_billiards.origami import (
    DeltaSearchFailed,
    PreconditionFailed,
    build_origami_model,
    check_isolated_collisions,
    check_simplicity_transfer,
    deviation_report,
    flatten,
    height_profile,
    precondition_failure,
    search_delta,
)

SQRT2 = np.sqrt(2.0)


def alpha2(Y):
    return simulate(Y, [0, 0], np.array([-1, 1]) / SQRT2, 4 * SQRT2)


def fold(d):
    return {"F1": d, "F2": 0.0, "F3": -d}


def test_height_profile_triangle():
    T, tr = fagnano_seed()
    assert tr.facet_sequence == ("F1", "F2", "F3")
    p = height_profile(fold(0.05), tr)
    assert p.H == pytest.approx((0, 0.1, -0.1, 0))
    assert p.general_position and p.closed
    assert p.delta == pytest.approx(0.1)


def test_height_profile_alpha2(square_y2):
    p = height_profile(fold(0.08), alpha2(square_y2))
    assert p.H == pytest.approx((0, 0.16, -0.16, 0))
    assert p.threshold == pytest.approx(0.16 + 0.32)


def test_general_position_fails_for_zero_first_height(square_y2):
    h = {"F1": 0.0, "F2": 0.0, "F3": 0.0}
    assert not height_profile(h, alpha2(square_y2)).general_position
    assert precondition_failure(square_y2, alpha2(square_y2), h)[0] == "general_position"


def test_isolation_fails_for_large_delta(square_y2):
    a = alpha2(square_y2)
    assert check_isolated_collisions(a, height_profile(fold(0.08), a)).ok
    bad = check_isolated_collisions(a, height_profile(fold(0.4), a))
    assert not bad.ok and bad.point is not None
    with pytest.raises(PreconditionFailed) as exc:
        build_origami_model(square_y2, a, fold(0.4), fold(0.4))
    assert exc.value.which == "isolated_collisions"


def test_repeated_facet_is_rejected():
    from origami_billiards.geom_core import box

    sq = box([0, 0], [1, 1])
    tr = simulate(sq, [0.5, 0.5], [1, 0], 3.0)
    assert precondition_failure(sq, tr, {"x0+": 0.1, "x0-": -0.1})[0] == "single_collision"


def test_heights_must_match_folded_set(square_y2):
    with pytest.raises(PreconditionFailed) as exc:
        build_origami_model(square_y2, alpha2(square_y2), {"F1", "F2"}, fold(0.08))
    assert exc.value.which == "heights_domain"


def test_alpha2_model(square_y2):
    a = alpha2(square_y2)
    m = build_origami_model(square_y2, a, fold(0.08), fold(0.08))
    assert m.complete
    assert "".join(k[0].upper() for k in m.classes.kinds) == "HCHCHCH"
    assert m.classes.folds[1::2] == ("F1", "F2", "F3")
    assert m.simulated == ("F1", "F2", "F3")
    assert len(m.lifted.collisions) == 6
    r = deviation_report(m)
    assert all(0 < d <= m.profile.delta + 1e-12 for d in r.crease_distances)
    assert r.flatten_length_error <= 1e-9
    assert r.flatten_point_error <= 1e-9
    assert r.height_range[0] >= m.profile.hmin - 1e-9 and r.height_range[1] <= m.profile.hmax + 1e-9
    flat = flatten(m)
    assert flat.length == pytest.approx(a.length, abs=1e-9)
    assert flat.facet_sequence == a.facet_sequence
    assert check_simplicity_transfer(m)
    assert is_simple(m.lifted)


def test_triangle_model_with_search():
    T, tr = fagnano_seed()
    d, m = search_delta(lambda d: build_origami_model(T, tr, fold(d), fold(d)), 0.05)
    assert d == 0.05
    r = deviation_report(m)
    assert all(0 < x <= 0.1 + 1e-12 for x in r.crease_distances)
    assert r.flatten_length_error <= 1e-9
    np.testing.assert_allclose(m.lifted.end, np.append(tr.end, 0.0), atol=1e-9)


def test_search_halves_until_success(square_y2):
    a = alpha2(square_y2)
    d, _ = search_delta(lambda d: build_origami_model(square_y2, a, fold(d), fold(d)), 0.4)
    # threshold 6*delta must stay below the corner distance 1 along the path
    assert d == 0.05  # [DERIVED]
    with pytest.raises(DeltaSearchFailed):
        search_delta(lambda d: build_origami_model(square_y2, a, fold(d), fold(d)), 0.4, min_delta=0.3)
