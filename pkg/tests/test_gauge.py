import numpy as np
from numpy.testing import assert_allclose
from pytest import fixture, mark, raises

from csgrav.errors import DegreeOverflowError, SeriesDivergenceError, SpaceMismatchError
from csgrav.services.algebra import PairingKind
from csgrav.services.gauge import (
    GaugeMap,
    GaugePotential,
    bianchi_residual,
    chern_weil_form,
    cs_form,
    curvature,
    gauge_defect,
    gauge_transform,
    invariant_basis,
    maurer_cartan,
    random_gauge_map,
    random_potential,
    section_pullback,
    structure_residual,
    transgression_form,
    wzw_form,
)
from csgrav.services.gravity import sup_norm
from csgrav.services.jetfields import Chart, ValueSpace, ValuedForm, ext_d, random_form

GL3 = ValueSpace.gl(3)
AFF3 = ValueSpace.aff(3)

SPACES = (
    (GL3, PairingKind.GL_ETA),
    (AFF3, PairingKind.AFF3),
)


@fixture
def small_chart():
    return Chart.periodic([1.0, 1.0])


# construction

def test_potential_must_be_algebra_valued_one_form(rng, chart3):
    with raises(DegreeOverflowError):
        GaugePotential(random_form(rng, chart3, 0, GL3))
    with raises(SpaceMismatchError):
        GaugePotential(random_form(rng, chart3, 1, ValueSpace.vec(3)))


def test_gauge_map_generators_are_zero_forms(rng, chart3):
    with raises(SpaceMismatchError):
        GaugeMap(chart3, GL3, (random_form(rng, chart3, 1, GL3),))
    with raises(SpaceMismatchError):
        GaugeMap(chart3, GL3, (random_form(rng, chart3, 0, AFF3),))


def test_gauge_maps_of_different_spaces_do_not_multiply(rng, chart3):
    with raises(SpaceMismatchError):
        random_gauge_map(rng, chart3, GL3) * random_gauge_map(rng, chart3, AFF3)


def test_invariant_basis_sizes(sig):
    assert invariant_basis(GL3, sig).shape == (3, 3, 3)
    blocks = invariant_basis(AFF3, sig)
    assert blocks.shape == (6, 4, 4)
    assert np.all(blocks[:, 3, :] == 0.0)


# curvature and Chern-Simons forms

@mark.parametrize("space", (GL3, AFF3))
def test_bianchi_identity(rng, chart3, points3, space):
    potential = random_potential(rng, chart3, space)
    assert sup_norm(bianchi_residual(potential), points3) <= 1e-10


def test_curvature_of_constant_potential(chart3, points3):
    coeffs = np.zeros((3, 3, 3))
    coeffs[0, 0, 1] = 1.0
    coeffs[1, 1, 0] = 1.0
    f = curvature(GaugePotential(ValuedForm.constant(chart3, 1, GL3, coeffs))).values(points3)
    # F_{01} = [A_0, A_1] = E_11 - E_22
    assert_allclose(f[:, 0], np.broadcast_to(np.diag([1.0, -1.0, 0.0]), (len(points3), 3, 3)))
    assert_allclose(f[:, 1:], 0.0)


@mark.parametrize(("space", "pk"), SPACES)
def test_cs_equals_transgression(rng, chart3, points3, sig, space, pk):
    potential = random_potential(rng, chart3, space, sig)
    diff = cs_form(potential, pk, sig) - transgression_form(potential, pk, sig)
    assert sup_norm(diff, points3) <= 1e-13


@mark.parametrize(("space", "pk"), SPACES)
def test_d_of_cs_is_chern_weil(rng, chart4, points4, sig, space, pk):
    potential = random_potential(rng, chart4, space, sig, restricted=True)
    diff = ext_d(cs_form(potential, pk, sig)) - chern_weil_form(potential, pk, sig)
    assert sup_norm(diff, points4) <= 1e-9


def test_form_degree_limits(rng, small_chart, chart3, sig):
    with raises(DegreeOverflowError):
        cs_form(random_potential(rng, small_chart, GL3), PairingKind.GL_ETA, sig)
    with raises(DegreeOverflowError):
        chern_weil_form(random_potential(rng, chart3, GL3), PairingKind.GL_ETA, sig)
    with raises(DegreeOverflowError):
        wzw_form(random_gauge_map(rng, small_chart, GL3), PairingKind.GL_ETA, sig)


# gauge maps

@mark.parametrize("space", (GL3, AFF3))
def test_maurer_cartan_structure_equation(rng, chart3, points3, space):
    g = random_gauge_map(rng, chart3, space, factors=2)
    assert sup_norm(structure_residual(g), points3) <= 1e-10


def test_maurer_cartan_matches_finite_difference(rng, chart3):
    g = random_gauge_map(rng, chart3, GL3, factors=2)
    x = np.array([[0.3, 0.6, 0.1]])
    lam = maurer_cartan(g).form.values(x)[0]
    g_inv = np.linalg.inv(g.group_values(x)[0])
    h = 1e-5
    for axis in range(3):
        step = h * np.eye(3)[axis]
        dg = (g.group_values(x + step)[0] - g.group_values(x - step)[0]) / (2 * h)
        assert_allclose(lam[axis], g_inv @ dg, atol=1e-6)


def test_identity_map_changes_nothing(rng, chart3, points3):
    potential = random_potential(rng, chart3, GL3)
    identity = GaugeMap.identity(chart3, GL3)
    assert sup_norm(maurer_cartan(identity).form, points3) == 0.0
    moved = gauge_transform(potential, identity).form.values(points3)
    assert_allclose(moved, potential.form.values(points3))
    assert_allclose(identity.group_values(points3), np.broadcast_to(np.eye(3), (20, 3, 3)))


def test_adjoint_inverse_conjugates(rng, chart3, points3):
    g = random_gauge_map(rng, chart3, GL3, factors=2)
    form = random_form(rng, chart3, 1, GL3)
    g_vals = g.group_values(points3)
    expected = np.linalg.inv(g_vals)[:, None] @ form.values(points3) @ g_vals[:, None]
    assert_allclose(g.adjoint_inverse(form).values(points3), expected, atol=1e-12)


@mark.parametrize("space", (GL3, AFF3))
def test_gauge_action_composes_on_the_right(rng, chart3, points3, space):
    potential = random_potential(rng, chart3, space)
    g = random_gauge_map(rng, chart3, space)
    h = random_gauge_map(rng, chart3, space)
    twice = gauge_transform(gauge_transform(potential, g), h)
    once = gauge_transform(potential, g * h)
    assert sup_norm(twice.form - once.form, points3) <= 1e-10
    assert_allclose(
        (g * h).group_values(points3),
        g.group_values(points3) @ h.group_values(points3),
        atol=1e-12,
    )


def test_section_pullback_is_gauge_transform(rng, chart3, points3):
    potential = random_potential(rng, chart3, GL3)
    g = random_gauge_map(rng, chart3, GL3)
    diff = section_pullback(g, potential).form - gauge_transform(potential, g).form
    assert sup_norm(diff, points3) == 0.0


@mark.parametrize(("space", "pk"), SPACES)
def test_gauge_defect_vanishes_for_invariant_values(rng, chart3, points3, sig, space, pk):
    potential = random_potential(rng, chart3, space, sig, restricted=True)
    g = random_gauge_map(rng, chart3, space, sig, restricted=True, factors=2)
    assert sup_norm(gauge_defect(potential, g, pk, sig), points3) <= 1e-9


@mark.parametrize(("space", "pk"), SPACES)
def test_wzw_form_is_closed(rng, chart4, points4, sig, space, pk):
    g = random_gauge_map(rng, chart4, space, sig, restricted=True, factors=2)
    assert sup_norm(ext_d(wzw_form(g, pk, sig)), points4) <= 1e-9


def test_adjoint_series_divergence(chart3, points3):
    rotation = np.zeros((1, 3, 3))
    rotation[0, 1, 2] = 50.0
    rotation[0, 2, 1] = -50.0
    g = GaugeMap.from_generator(ValuedForm.constant(chart3, 0, GL3, rotation))
    seed = np.zeros((3, 3, 3))
    seed[:, 1, 1] = 1.0
    with raises(SeriesDivergenceError):
        g.adjoint_inverse(ValuedForm.constant(chart3, 1, GL3, seed)).values(points3)
