import numpy as np
import pytest

from origami_billiards.beveling import (
    WEDGE_MINUS,
    WEDGE_PLUS,
    DegenerateBeveling,
    EmptySection,
    bevel,
    check_projection_compatibility,
    cross_section,
    minus_id,
    plus_id,
    rho,
    wedge,
)
from origami_billiards.geom_core import UnknownFacet, box, reflection

TRI_H = {"F1": 0.05, "F2": 0.0, "F3": -0.05}


def test_triangle_beveling_has_six_wedge_facets(triangle):
    b = bevel(triangle, TRI_H, TRI_H)
    assert b.lifted.dim == 3
    assert len(b.lifted.facets) == 6
    expected = {plus_id(f): (f, WEDGE_PLUS) for f in TRI_H} | {minus_id(f): (f, WEDGE_MINUS) for f in TRI_H}
    assert dict(b.inheritance) == expected
    for f in TRI_H:
        assert b.partner(plus_id(f)) == minus_id(f)


def test_square_with_top_and_bottom_folded():
    sq = box([0, 0], [1, 1], ids=["l", "r", "b", "t"])
    b = bevel(sq, {"t", "b"}, {"t": 0.1, "b": -0.1})
    assert len(b.lifted.facets) == 6
    flat = [lid for lid, (f, tag) in b.inheritance.items() if f in ("l", "r")]
    assert sorted(flat) == ["l", "r"]
    # vertical facets have no height component
    for lid in flat:
        assert b.lifted.halfspace(lid).normal[-1] == 0.0


def test_wedge_geometry(triangle):
    w = wedge(triangle, "F1", 0.05)
    base = triangle.halfspace("F1")
    for hs, sign in ((w.plus, 1), (w.minus, -1)):
        assert np.linalg.norm(hs.normal) == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(hs.normal[:2], base.normal / np.sqrt(2), atol=1e-12)
        assert np.sign(hs.normal[2]) == sign
    # the crease sits at height h above the base facet
    x = np.array([1.0, 0.0, 0.05])
    assert w.plus.signed_distance(x) == pytest.approx(0.0, abs=1e-12)
    assert w.minus.signed_distance(x) == pytest.approx(0.0, abs=1e-12)


def test_cross_section_pull_in(triangle):
    b = bevel(triangle, TRI_H, TRI_H)
    S = cross_section(b, 0.2)
    pulls = {f: triangle.halfspace(f).offset - S.halfspace(f).offset for f in TRI_H}
    assert pulls == pytest.approx({"F1": 0.15, "F2": 0.2, "F3": 0.25})
    with pytest.raises(EmptySection):
        cross_section(b, 5.0)


def test_rho_is_orientation_preserving_and_projects(triangle):
    b = bevel(triangle, TRI_H, TRI_H)
    for f in TRI_H:
        r = rho(b, f)
        assert r.det == pytest.approx(1.0, abs=1e-12)
        base = reflection(triangle.halfspace(f))
        x = np.array([0.3, 0.4, 0.02])
        np.testing.assert_allclose(r(x)[:2], base(x[:2]), atol=1e-12)
        assert check_projection_compatibility(b, f, samples=200).residual <= 1e-10
    with pytest.raises(UnknownFacet):
        rho(b, "F9")


def test_rho_of_unfolded_facet_is_vertical_reflection():
    sq = box([0, 0], [1, 1], ids=["l", "r", "b", "t"])
    b = bevel(sq, {"t"}, {"t": 0.1})
    r = rho(b, "l")
    assert r.det == pytest.approx(-1.0)
    np.testing.assert_allclose(r([0.25, 0.5, 0.3]), [-0.25, 0.5, 0.3], atol=1e-12)


def test_bevel_input_errors(triangle):
    with pytest.raises(DegenerateBeveling):
        bevel(triangle, set(), {})
    with pytest.raises(ValueError):
        bevel(triangle, {"F1"}, {"F1": 0.1, "F2": 0.0})
