import numpy as np
import pytest

from origami_billiards.geom_core import (
    DimensionMismatch,
    EmptyInterior,
    HalfSpace,
    Isometry,
    NotConvex,
    NotConvexUnion,
    Outside,
    RedundantFacet,
    Unbounded,
    UnknownFacet,
    box,
    convex_union,
    hyperplane_distances,
    locate,
    make_polytope,
    polygon,
    product,
    reflect_about_facet,
)

SQRT3 = np.sqrt(3.0)


def test_triangle_is_valid_with_three_facets(triangle):
    assert triangle.dim == 2
    assert len(triangle.facets) == 3
    np.testing.assert_allclose(sorted(map(tuple, triangle.vertices)), [(0, 0), (1, SQRT3), (2, 0)], atol=1e-12)


def test_square_y2_has_four_facets(square_y2):
    assert len(square_y2.facets) == 4
    assert len(square_y2.vertices) == 4


def test_duplicate_half_space_is_redundant(triangle):
    hs = [h for _, h in triangle.facets] + [triangle.facets[0][1]]
    with pytest.raises(RedundantFacet):
        make_polytope(hs)


def test_unbounded_and_empty_are_rejected():
    with pytest.raises(Unbounded):
        make_polytope([HalfSpace(np.array([1.0, 0.0]), 1.0), HalfSpace(np.array([0.0, 1.0]), 1.0), HalfSpace(np.array([-1.0, 0.0]), 1.0)])
    with pytest.raises(EmptyInterior):
        make_polytope(
            [
                HalfSpace(np.array([1.0, 0.0]), -1.0),
                HalfSpace(np.array([-1.0, 0.0]), -1.0),
                HalfSpace(np.array([0.0, 1.0]), 1.0),
                HalfSpace(np.array([0.0, -1.0]), 1.0),
            ]
        )


def test_non_unit_normal_rejected():
    with pytest.raises(ValueError):
        HalfSpace(np.array([2.0, 0.0]), 1.0)


def test_locate(triangle):
    assert locate(triangle, [1, SQRT3 / 3]).kind == "interior"
    loc = locate(triangle, [1, 0])
    assert loc.kind == "boundary" and loc.facets == {"F1"}
    assert locate(triangle, [0, 0]).facets == {"F1", "F3"}
    assert locate(triangle, [5, 5]).kind == "outside"
    with pytest.raises(DimensionMismatch):
        locate(triangle, [0, 0, 0])


def test_reflect_about_top_facet(square_y2):
    r = reflect_about_facet(square_y2, "F1")
    np.testing.assert_allclose(r([0, 0]), [0, 2], atol=1e-12)
    np.testing.assert_allclose(r([-1.3, 1.0]), [-1.3, 1.0], atol=1e-12)
    x = np.array([0.37, -5.2])
    np.testing.assert_allclose(r(r(x)), x, atol=1e-12)
    with pytest.raises(UnknownFacet):
        reflect_about_facet(square_y2, "nope")


def test_hyperplane_distances():
    unit = box([0, 0], [1, 1])
    assert [d for _, d in hyperplane_distances(unit, [0.5, 0.5])] == pytest.approx([0.5] * 4)
    Y = box([-2, -1], [0, 1], ids=["F2", "F0", "F3", "F1"])
    assert dict(hyperplane_distances(Y, [-1, 1]))["F1"] == pytest.approx(0.0, abs=1e-12)
    T = polygon([(0, 0), (2, 0), (1, SQRT3)], ids=["F1", "F2", "F3"])
    d = dict(hyperplane_distances(T, [1, 0]))
    assert d == pytest.approx({"F1": 0.0, "F2": SQRT3 / 2, "F3": SQRT3 / 2})
    with pytest.raises(Outside):
        hyperplane_distances(T, [3, 3])


def test_products(triangle):
    seg = box([0], [1])
    sq = product(seg, seg)
    assert sq.dim == 2 and len(sq.facets) == 4
    prism = product(triangle, seg)
    assert prism.dim == 3 and len(prism.facets) == 5 and len(prism.vertices) == 6


def test_convex_union_of_adjacent_squares():
    a = box([0, 0], [1, 1], ids=["l", "r", "b", "t"])
    b = box([1, 0], [2, 1], ids=["l2", "r2", "b2", "t2"])
    u = convex_union(a, b)
    np.testing.assert_allclose(u.vertices.min(axis=0), [0, 0], atol=1e-12)
    np.testing.assert_allclose(u.vertices.max(axis=0), [2, 1], atol=1e-12)
    assert len(u.facets) == 4


def test_convex_union_of_corner_squares_fails():
    a = box([0, 0], [1, 1])
    b = box([1, 1], [2, 2])
    with pytest.raises(NotConvexUnion):
        convex_union(a, b)


def test_polygon_rejects_clockwise_or_nonconvex():
    with pytest.raises((NotConvex, Unbounded, EmptyInterior)):
        polygon([(0, 0), (1, SQRT3), (2, 0)])
    with pytest.raises((NotConvex, RedundantFacet)):
        polygon([(0, 0), (2, 0), (1, 0.2), (1, 2)])


def test_isometry_requires_orthogonal_matrix():
    with pytest.raises(ValueError):
        Isometry(np.array([[2.0, 0.0], [0.0, 1.0]]), np.zeros(2))


def test_isometry_relabels_facets(square_y2):
    rot = Isometry.linear_map(-np.eye(2), relabel={"F1": "G1"})
    Q = rot.apply_to_polytope(square_y2)
    assert "G1" in Q.ids and "F1" not in Q.ids
    assert Q.contains([1.5, 0.5])


def test_polytope_json_round_trip(triangle):
    P = type(triangle).from_json(triangle.to_json())
    assert P.ids == triangle.ids
    np.testing.assert_array_equal(P.normals, triangle.normals)
