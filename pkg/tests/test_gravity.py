import numpy as np
from numpy.testing import assert_allclose
from pytest import fixture, raises

from csgrav.errors import (
    DimensionMismatchError,
    InadmissibleSectionError,
    SingularMatrixError,
    SpaceMismatchError,
)
from csgrav.services.gauge import GaugePotential, curvature
from csgrav.services.gravity import (
    CS_PER_PALATINI,
    PALATINI_PAIRING_SIGN,
    CoframeField,
    GravSection,
    SpinConnection,
    correspondence,
    cs_of_section,
    covariant_metric,
    field_equations,
    flat_section,
    linear_part,
    metric_from_frame,
    metricity_residual,
    orthogonality_check,
    palatini_form,
    palatini_pairing_form,
    random_admissible_section,
    random_section,
    reduce_connection,
    sup_norm,
    torsion,
    translation_part,
    witten_lift,
)
from csgrav.services.jetfields import Chart, QuadratureGrid, ValueSpace, ValuedForm, random_form


@fixture
def section(rng, chart3, sig):
    return random_admissible_section(rng, chart3, sig)


@fixture
def contaminated(rng, chart3, sig):
    return random_section(rng, chart3, sig, p_contamination=0.2)


# domain types

def test_coframe_shape_checks(rng, chart3, chart4):
    with raises(SpaceMismatchError):
        CoframeField(random_form(rng, chart3, 1, ValueSpace.gl(3)))
    with raises(DimensionMismatchError):
        CoframeField(random_form(rng, chart4, 1, ValueSpace.vec(3)))
    with raises(SpaceMismatchError):
        SpinConnection(random_form(rng, chart3, 1, ValueSpace.aff(3)))


def test_section_needs_one_chart(chart3):
    other = Chart.periodic([2.0, 1.0, 1.0])
    with raises(DimensionMismatchError):
        GravSection(flat_section(chart3).theta, flat_section(other).omega)


def test_singular_coframe(chart3, points3):
    flat = flat_section(chart3)
    degenerate = GravSection(
        CoframeField(ValuedForm.zero(chart3, 1, ValueSpace.vec(3))), flat.omega
    )
    with raises(SingularMatrixError):
        degenerate.check_invertible(points3)


# metric

def test_covariant_metric_inverts_zeta(section, sig, points3):
    zeta = metric_from_frame(section, sig).values(points3)
    g = covariant_metric(section, sig).values(points3)
    assert_allclose(g @ zeta, np.broadcast_to(np.eye(3), zeta.shape), atol=1e-12)


def test_flat_metric_is_eta(chart3, sig, points3):
    zeta = metric_from_frame(flat_section(chart3), sig).values(points3)
    assert_allclose(zeta, np.broadcast_to(sig.eta, zeta.shape))


def test_scaled_frame_scales_metric_inversely(section, sig, points3):
    c = 2.5
    scaled = GravSection(CoframeField(section.theta.form.scale(c)), section.omega)
    assert_allclose(
        metric_from_frame(scaled, sig).values(points3),
        metric_from_frame(section, sig).values(points3) / c**2,
        rtol=1e-12,
        atol=1e-14,
    )


def test_orthogonality(section, sig, points3):
    result = orthogonality_check(section, metric_from_frame(section, sig), sig, 1e-12, points3)
    assert result.ok
    assert result.sup_norm <= 1e-12
    wrong = orthogonality_check(section, covariant_metric(section, sig), sig, 1e-12, points3)
    assert not wrong.ok


def test_doubled_frame_is_not_orthonormal_for_eta(chart3, sig, points3):
    flat = flat_section(chart3)
    doubled = GravSection(CoframeField(flat.theta.form.scale(2.0)), flat.omega)
    result = orthogonality_check(doubled, metric_from_frame(flat, sig), sig, 1e-12, points3)
    assert not result.ok
    assert_allclose(result.sup_norm, 0.75)


def test_metric_jet_matches_finite_difference(section, sig):
    zeta = metric_from_frame(section, sig)
    x = np.array([[0.2, 0.4, 0.9]])
    grad = zeta.jet(x, 1).grad[0]
    h = 1e-6
    for axis in range(3):
        step = h * np.eye(3)[axis]
        numeric = (zeta.values(x + step)[0] - zeta.values(x - step)[0]) / (2 * h)
        assert_allclose(grad[axis], numeric, atol=1e-7)


# metricity and field equations

def test_admissible_connection_is_metric(section, sig, points3):
    result = metricity_residual(section, sig, points3)
    assert sup_norm(result.p_part, points3) <= 1e-14
    assert np.max(np.abs(result.nabla)) <= 1e-12


def test_metricity_measures_transvection_part(contaminated, sig, points3):
    result = metricity_residual(contaminated, sig, points3)
    p = result.p_part.values(points3)
    assert np.max(np.abs(p)) > 1e-3
    assert_allclose(result.nabla, 2.0 * p @ sig.eta, atol=1e-12)


def test_flat_section_solves_field_equations(chart3, points3):
    omega_curv, theta_torsion = field_equations(flat_section(chart3))
    assert sup_norm(omega_curv, points3) == 0.0
    assert sup_norm(theta_torsion, points3) == 0.0


def test_torsion_of_constant_connection(rng, chart3, points3):
    coeffs = rng.standard_normal((3, 3, 3))
    section = GravSection(
        flat_section(chart3).theta,
        SpinConnection(ValuedForm.constant(chart3, 1, ValueSpace.gl(3), coeffs)),
    )
    values = torsion(section).values(points3)
    # components (0,1), (0,2), (1,2); omega payload is [mu, a, b]
    for comp, (mu, nu) in enumerate(((0, 1), (0, 2), (1, 2))):
        expected = coeffs[mu, :, nu] - coeffs[nu, :, mu]
        assert_allclose(values[:, comp], np.broadcast_to(expected, (len(points3), 3)))


# Witten lift

def test_lift_curvature_splits_into_curvature_and_torsion(section, points3):
    lift_curv = curvature(witten_lift(section))
    omega_curv, theta_torsion = field_equations(section)
    assert sup_norm(linear_part(lift_curv) - omega_curv, points3) <= 1e-12
    assert sup_norm(translation_part(lift_curv) - theta_torsion, points3) <= 1e-12


def test_reduce_round_trip(section, sig, points3):
    result = reduce_connection(witten_lift(section), sig, frame=section.theta, points=points3)
    assert result.reducible
    assert result.soldered
    assert sup_norm(result.omega_k.form - section.omega.form, points3) <= 1e-14
    assert sup_norm(result.theta.form - section.theta.form, points3) == 0.0


def test_reduce_rejects_transvections(contaminated, sig, points3):
    result = reduce_connection(witten_lift(contaminated), sig, points=points3)
    assert not result.reducible
    assert result.p_norm > 1e-3
    assert result.omega_k is None and result.theta is None
    assert result.soldered is None


def test_reduce_reports_unsoldered_frame(section, chart3, sig, points3):
    result = reduce_connection(
        witten_lift(section), sig, frame=flat_section(chart3).theta, points=points3
    )
    assert result.reducible
    assert result.soldered is False


def test_reduce_needs_affine_potential(section, sig):
    with raises(SpaceMismatchError):
        reduce_connection(GaugePotential(section.omega.form), sig)


# Lagrangians

def test_palatini_contraction_matches_pairing(section, sig, points3):
    direct = palatini_form(section, sig, verify_points=points3).values(points3)
    paired = palatini_pairing_form(section, sig).values(points3)
    assert_allclose(direct, PALATINI_PAIRING_SIGN * paired, atol=1e-12)


def test_palatini_form_is_quadratic_in_connection_scale(section, sig, points3):
    def density(t):
        scaled = GravSection(section.theta, SpinConnection(section.omega.form.scale(t)))
        return palatini_form(scaled, sig).values(points3)

    one, two, three = density(1.0), density(2.0), density(3.0)
    # t a + t^2 b has vanishing third difference through t = 0
    assert np.max(np.abs(three - 3.0 * two + 3.0 * one)) <= 1e-12
    quadratic = (two - 2.0 * one) / 2.0
    linear = one - quadratic
    assert np.max(np.abs(quadratic)) > 1e-3
    assert np.max(np.abs(linear)) > 1e-3


def test_chern_simons_of_pure_frame_vanishes(section, chart3, sig, points3):
    frame_only = GravSection(
        section.theta, SpinConnection(ValuedForm.zero(chart3, 1, ValueSpace.gl(3)))
    )
    assert sup_norm(cs_of_section(frame_only, sig), points3) <= 1e-15


def test_correspondence_ratio(section, chart3, sig):
    grid = QuadratureGrid.for_frequency(chart3, 2)
    result = correspondence(section, sig, grid)
    assert result.p_norm <= 1e-14
    assert abs(result.integral_pg) > 1e-6
    assert_allclose(result.ratio, CS_PER_PALATINI, rtol=1e-9)
    assert sup_norm(result.exact_residual, chart3.sample_points(4)) <= 1e-10


def test_correspondence_rejects_contaminated_connection(contaminated, chart3, sig):
    with raises(InadmissibleSectionError) as excinfo:
        correspondence(contaminated, sig, QuadratureGrid.for_frequency(chart3, 2))
    assert excinfo.value.p_norm > 1e-10


def test_flat_section_has_no_ratio(chart3, sig):
    result = correspondence(flat_section(chart3), sig, QuadratureGrid(chart3, (3, 3, 3)))
    assert result.integral_pg == 0.0
    assert result.ratio is None
