import numpy as np
import pytest

from origami_billiards.billiards import (
    SkeletonHit,
    advance,
    classify_polygon_transport,
    is_simple,
    refold_deviation,
    simulate,
    transport,
    unfold,
)
from origami_billiards.constructions import decagon, fagnano_seed, pentagon_orbits
from origami_billiards.geom_core import box

SQRT2 = np.sqrt(2.0)
SQRT3 = np.sqrt(3.0)


def test_advance_unit_square():
    sq = box([0, 0], [1, 1])
    c = advance(sq, [0.5, 0.5], [1, 0])
    np.testing.assert_allclose(c.point, [1, 0.5])
    assert c.facet == "x0+"
    with pytest.raises(SkeletonHit):
        advance(sq, [0.5, 0.5], np.array([1, 1]) / SQRT2)


def test_advance_y2_hits_top_at_minus_one_one(square_y2):
    c = advance(square_y2, [0, 0], np.array([-1, 1]) / SQRT2)
    np.testing.assert_allclose(c.point, [-1, 1], atol=1e-12)
    assert c.facet == "F1"


def test_alpha2_loop(square_y2):
    a = simulate(square_y2, [0, 0], np.array([-1, 1]) / SQRT2, 4 * SQRT2)
    assert a.facet_sequence == ("F1", "F2", "F3")
    np.testing.assert_allclose([c.point for c in a.collisions], [[-1, 1], [-2, 0], [-1, -1]], atol=1e-12)
    assert a.is_loop()
    np.testing.assert_allclose(transport(a).linear, np.diag([-1.0, 1.0]), atol=1e-12)


def test_fagnano_seed_hits_midpoints():
    T, tr = fagnano_seed()
    np.testing.assert_allclose([c.point for c in tr.collisions], [[1, 0], [1.5, SQRT3 / 2], [0.5, SQRT3 / 2]], atol=1e-12)
    assert tr.is_loop() and is_simple(tr)
    assert classify_polygon_transport(tr) == "reflection"
    assert np.linalg.det(transport(tr).linear) == pytest.approx(-1.0)


def test_square_bounce_period_two():
    sq = box([0, 0], [1, 1])
    tr = simulate(sq, [0.5, 0.5], [1, 0], 10.0)
    assert len(tr.collisions) == 10
    assert classify_polygon_transport(tr) == "rotation"


def test_pentagon_orbit_transport_is_reflection():
    D = decagon()
    P1, _ = pentagon_orbits()
    u = P1[1] - P1[0]
    per = 5 * np.linalg.norm(u)
    tr = simulate(D, (P1[0] + P1[1]) / 2, u / np.linalg.norm(u), per)
    assert len(tr.collisions) == 5 and tr.is_loop()
    assert classify_polygon_transport(tr) == "reflection"


def test_transport_within_a_segment_is_identity(square_y2):
    a = simulate(square_y2, [0, 0], np.array([-1, 1]) / SQRT2, 4 * SQRT2)
    np.testing.assert_array_equal(transport(a, 0.1, 0.9).linear, np.eye(2))


def test_is_simple_rejects_crossing_path():
    sq = box([0, 0], [1, 1])
    v = np.array([1.0, 0.37])
    tr = simulate(sq, [0.2, 0.2], v / np.linalg.norm(v), 6.0)
    assert not is_simple(tr)


def test_unfold_collision_free_and_alpha2(square_y2):
    sq = box([0, 0], [1, 1])
    tr = simulate(sq, [0.2, 0.5], [0.1, 0.0], 0.5)
    line, chain = unfold(tr)
    assert len(chain) == 0
    a = simulate(square_y2, [0, 0], np.array([-1, 1]) / SQRT2, 4 * SQRT2)
    (p, q), chain = unfold(a)
    assert len(chain) == 3
    assert np.linalg.norm(q - p) == pytest.approx(4 * SQRT2)
    assert refold_deviation(a) <= 1e-10


def test_unfold_square_period_two():
    sq = box([0, 0], [1, 1])
    tr = simulate(sq, [0.5, 0.5], [1, 0], 3.0)
    (p, q), chain = unfold(tr)
    assert len(chain) == 3
    assert np.linalg.norm(q - p) == pytest.approx(3.0)
