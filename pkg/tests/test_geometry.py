import numpy as np
import pytest

from fkripple import fkmodel as F
from fkripple import geometry as G
from fkripple.params import ModelParams
from fkripple.potential import GeometryError


def test_circle_from_constant_curvature():
    R = 3.0
    n = 40
    knots = np.linspace(0.0, 2 * np.pi * R, n + 1)
    c = G.ArcCurve.integrate(knots, np.full(n, 1.0 / R))
    assert c.total_turning() == pytest.approx(2 * np.pi, abs=1e-12)
    np.testing.assert_allclose(c.points[-1], [0.0, 0.0], atol=1e-12)
    # every point sits on the circle of radius R centered at (0, R)
    s = np.linspace(0.0, 2 * np.pi * R, 77)
    pos, tangent, normal = c.evaluate(s)
    np.testing.assert_allclose(np.hypot(pos[:, 0], pos[:, 1] - R), R, atol=1e-12)
    np.testing.assert_allclose(pos, np.column_stack([R * np.sin(s / R), R - R * np.cos(s / R)]), atol=1e-12)
    np.testing.assert_allclose(np.einsum("ij,ij->i", tangent, normal), 0.0, atol=1e-15)


def test_straight_segments_have_exact_chords():
    c = G.ArcCurve.integrate([0.0, 1.5, 4.0], [0.0, 0.0], start=(1.0, 2.0), angle=np.pi / 2)
    np.testing.assert_allclose(c.points, [[1.0, 2.0], [1.0, 3.5], [1.0, 6.0]], atol=1e-15)


def test_flat_reconstruction_for_exactly_commensurate_spacing():
    params = ModelParams(alpha="0.9")
    st = F.SupercellState(9, 10, np.arange(10) * 0.9)
    rc = G.reconstruct_curves(st, params)
    assert np.max(np.abs(rc.curve.kappa)) < 1e-14
    np.testing.assert_allclose(rc.chain1, np.column_stack([rc.chain1_index, np.zeros(len(rc.chain1_index))]),
                               atol=1e-13)
    np.testing.assert_allclose(rc.chain_alpha, np.column_stack([st.s, np.full(10, params.h)]), atol=1e-13)
    np.testing.assert_allclose(rc.closure_offset, 0.0, atol=1e-13)
    assert rc.closure_angle == pytest.approx(0.0, abs=1e-14)
    assert list(rc.chain1_index) == list(range(10))


def test_reconstruction_round_trip(relaxed_35, params):
    st = relaxed_35.state
    rc = G.reconstruct_curves(st, params)
    np.testing.assert_allclose(G.measured_spacings(rc.curve), st.spacings(), rtol=0, atol=1e-12)


def test_chain_alpha_offset_is_normal_at_distance_h(relaxed_35, params):
    st = relaxed_35.state
    rc = G.reconstruct_curves(st, params)
    pos, tangent, _ = rc.curve.evaluate(st.s)
    d = rc.chain_alpha - pos
    np.testing.assert_allclose(np.hypot(d[:, 0], d[:, 1]), params.h, rtol=1e-14)
    np.testing.assert_allclose(np.einsum("ij,ij->i", d, tangent), 0.0, atol=1e-13)


def test_chain1_atoms_are_unit_arc_length_apart(relaxed_35, params):
    rc = G.reconstruct_curves(relaxed_35.state, params, periods=2)
    d = np.diff(rc.chain1, axis=0)
    chords = np.hypot(d[:, 0], d[:, 1])
    # chords of unit arcs are at most one and within curvature^2/24 of it
    kmax = np.max(np.abs(rc.curve.kappa))
    assert np.all(chords <= 1.0 + 1e-14)
    assert np.all(chords >= 1.0 - kmax**2 / 24 - 1e-14)


def test_reconstruction_rejects_excessive_curvature(params):
    a = params.a
    st = F.SupercellState(3, 2, np.array([0.0, 2.1 * a]))
    with pytest.raises(GeometryError):
        G.reconstruct_curves(st, params)


def test_dominant_wavelength_of_cosine_curvature():
    n, lam = 1000, 125.0
    knots = np.arange(n + 1, dtype=float)
    kappa = 0.01 * np.cos(2 * np.pi * (knots[:-1] + 0.5) / lam)
    c = G.ArcCurve.integrate(knots, kappa)
    assert G.dominant_wavelength(c) == pytest.approx(lam, rel=1e-12)


def test_dominant_wavelength_ignores_net_turning():
    n, lam = 1000, 250.0
    knots = np.arange(n + 1, dtype=float)
    kappa = 1e-4 + 0.01 * np.cos(2 * np.pi * (knots[:-1] + 0.5) / lam)
    assert G.dominant_wavelength(G.ArcCurve.integrate(knots, kappa)) == pytest.approx(lam, rel=1e-12)


def _straight_pair(offset, n=12, spacing=1.0):
    bottom = np.column_stack([np.arange(n) * spacing, np.zeros(n)])
    top = np.column_stack([np.arange(1, n - 2) * spacing + offset, np.full(n - 3, 0.8)])
    return bottom, top


@pytest.mark.parametrize("offset, expected", [(0.25, 0.25), (0.75, 0.75), (0.0, 0.0), (1.25, 0.25)])
def test_disregistry_on_straight_chains(offset, expected):
    bottom, top = _straight_pair(offset)
    np.testing.assert_allclose(G.disregistry(bottom, top, 1.0), expected, atol=1e-13)


def test_disregistry_with_non_unit_spacing():
    bottom, top = _straight_pair(0.2, spacing=0.5)
    np.testing.assert_allclose(G.disregistry(bottom, top, 0.5), 0.2, atol=1e-13)


def test_disregistry_invariant_under_rigid_motion(rng):
    bottom = np.column_stack([np.arange(15.0), 0.1 * np.sin(np.arange(15.0))])
    top = np.column_stack([np.arange(2, 12) + rng.random(10), np.full(10, 1.0)])
    d0 = G.disregistry(bottom, top, 1.0)
    c, s = np.cos(0.7), np.sin(0.7)
    rot = np.array([[c, -s], [s, c]])
    move = lambda r: r @ rot.T + np.array([3.0, -2.0])
    np.testing.assert_allclose(G.disregistry(move(bottom), move(top), 1.0), d0, atol=1e-12)


def test_projection_tie_goes_to_lower_arc():
    poly = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]])
    arcs, idx, cum = G.project_onto_polyline([[1.0, 0.0]], poly)
    assert idx[0] == 0
    assert arcs[0] == pytest.approx(np.sqrt(2) / 2, abs=1e-15)
    assert cum[-1] == pytest.approx(2 * np.sqrt(2), abs=1e-15)


def test_projection_beyond_ends_is_rejected():
    poly = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    with pytest.raises(G.ProjectionError):
        G.project_onto_polyline([[-0.5, 1.0]], poly)
    with pytest.raises(G.ProjectionError):
        G.project_onto_polyline([[2.5, 0.3]], poly)


def test_fk_disregistry_is_fractional_part():
    st = F.SupercellState(2, 3, np.array([-0.25, 0.5, 1.75]))
    np.testing.assert_array_equal(G.fk_disregistry(st), [0.75, 0.5, 0.75])


def test_curve_rows_list_both_chains(relaxed_35, params):
    rc = G.reconstruct_curves(relaxed_35.state, params)
    rows = list(rc.rows())
    assert len(rows) == len(rc.chain1) + 35
    assert {r[0] for r in rows} == {1, 2}
