import numpy as np
from numpy.testing import assert_allclose, assert_array_equal
from pytest import mark, raises

from csgrav.errors import (
    ChartKindError,
    DegreeOverflowError,
    DimensionMismatchError,
    JetExhaustedError,
    SingularMatrixError,
    SpaceMismatchError,
)
from csgrav.services.algebra import PairingKind
from csgrav.services.jetfields import (
    Chart,
    ChartKind,
    FormTerm,
    Jet,
    QuadratureGrid,
    ValueSpace,
    ValuedForm,
    eval_form,
    ext_d,
    integrate_top,
    jet_inverse,
    make_quadratic_field,
    make_trig_field,
    multi_indices,
    pairwise_sum,
    random_form,
    random_trig_field,
    sample_top,
    wedge,
    wedge_bracket,
    wedge_pair,
    wedge_scalar,
)


def _product(x, y):
    return x * y


def _scalar_form(chart, degree, terms):
    """Scalar form with one trig coefficient per (index, field terms) pair."""
    return ValuedForm.from_terms(
        chart,
        degree,
        ValueSpace.scalar(),
        [FormTerm(index, np.ones(()), make_trig_field(chart, spec)) for index, spec in terms],
    )


# charts and grids

def test_chart_rejects_empty_extent():
    with raises(ValueError):
        Chart.box([0.0, 0.0], [1.0, 0.0])


def test_chart_dimension_mismatch():
    with raises(DimensionMismatchError):
        Chart(2, ChartKind.PERIODIC, (0.0,), (1.0, 1.0))


def test_sample_points_are_cell_centred(chart3):
    points = chart3.sample_points(per_axis=2)
    assert points.shape == (8, 3)
    assert_allclose(np.unique(points), [0.25, 0.75])


def test_grid_needs_periodic_chart():
    with raises(ChartKindError):
        QuadratureGrid(Chart.box([0.0], [1.0]), (4,))


def test_grid_counts(chart3):
    with raises(ValueError):
        QuadratureGrid(chart3, (1, 4, 4))
    grid = QuadratureGrid.for_frequency(chart3, 2)
    assert grid.counts == (9, 9, 9)
    assert grid.points().shape == (729, 3)
    assert_allclose(grid.points()[1], [0.0, 0.0, 1.0 / 9.0])


# scalar fields and jets

def test_empty_trig_field_is_zero(chart3, points3):
    val, grad, hess = make_trig_field(chart3, []).jet(points3)
    assert_array_equal(val, 0.0)
    assert_array_equal(grad, 0.0)
    assert_array_equal(hess, 0.0)


def test_trig_field_derivatives():
    chart = Chart.periodic([2.0, 1.0])
    field = make_trig_field(chart, [((1, 2), 0.7, 0.3)])
    x = np.array([[0.4, 0.1]])
    w = 2.0 * np.pi * np.array([1.0 / 2.0, 2.0])
    arg = x[0] @ w + 0.3
    val, grad, hess = field.jet(x)
    assert_allclose(val, 0.7 * np.cos(arg))
    assert_allclose(grad[0], -0.7 * np.sin(arg) * w)
    assert_allclose(hess[0], -0.7 * np.cos(arg) * np.outer(w, w))


def test_random_trig_field_hessian_symmetric(rng, chart3, points3):
    _, _, hess = random_trig_field(rng, chart3).jet(points3)
    assert np.max(np.abs(hess - np.swapaxes(hess, 1, 2))) <= 1e-13


def test_trig_field_needs_periodic_chart():
    with raises(ChartKindError):
        make_trig_field(Chart.box([0.0], [1.0]), [((1,), 1.0, 0.0)])


def test_quadratic_field_only_constant_on_torus(chart3):
    make_quadratic_field(chart3, 2.0)
    with raises(ChartKindError):
        make_quadratic_field(chart3, 0.0, b=[1.0, 0.0, 0.0])


def test_quadratic_field_on_box():
    chart = Chart.box([-1.0, -1.0], [1.0, 1.0])
    field = make_quadratic_field(chart, 1.0, b=[2.0, 0.0], h=[[2.0, 1.0], [1.0, 0.0]])
    val, grad, hess = field.jet(np.array([[0.5, -0.5]]))
    assert_allclose(val, [1.0 + 1.0 + 0.5 * (0.5 - 0.5)])
    assert_allclose(grad, [[2.0 + 1.0 - 0.5, 0.5]])
    assert_allclose(hess[0], [[2.0, 1.0], [1.0, 0.0]])


def test_jet_inverse_matches_finite_difference(rng):
    a = np.eye(3) + 0.2 * rng.standard_normal((3, 3))
    b = rng.standard_normal((3, 3))
    mat = Jet(a[None], b[None, None])
    inv = jet_inverse(mat, 1)
    h = 1e-6
    numeric = (np.linalg.inv(a + h * b) - np.linalg.inv(a - h * b)) / (2 * h)
    assert_allclose(inv.val[0], np.linalg.inv(a))
    assert_allclose(inv.grad[0, 0], numeric, atol=1e-8)


def test_jet_inverse_singular():
    with raises(SingularMatrixError):
        jet_inverse(Jet(np.zeros((1, 3, 3))), 0)


def test_jet_truncate_beyond_order():
    with raises(JetExhaustedError):
        Jet(np.zeros((1, 2))).truncate(1)


# forms

def test_degree_outside_chart(chart3):
    with raises(DegreeOverflowError):
        ValuedForm.zero(chart3, 4, ValueSpace.scalar())


def test_multi_indices_lexicographic():
    assert multi_indices(3, 2) == ((0, 1), (0, 2), (1, 2))


def test_d_of_function_is_gradient(rng, chart3, points3):
    f = random_form(rng, chart3, 0, ValueSpace.scalar())
    grad = f.evaluate(points3, 1).grad
    assert_allclose(ext_d(f).values(points3), grad[:, :, 0])


@mark.parametrize("n", (3, 4))
@mark.parametrize("space", (ValueSpace.scalar(), ValueSpace.gl(3), ValueSpace.aff(3)))
def test_d_squared_vanishes(rng, n, space):
    chart = Chart.periodic([1.0] * n)
    points = chart.random_points(rng, 100)
    for degree in range(n - 1):
        alpha = random_form(rng, chart, degree, space)
        assert np.max(np.abs(ext_d(ext_d(alpha)).values(points))) <= 1e-10


def test_d_of_top_form(chart3):
    with raises(DegreeOverflowError):
        ext_d(ValuedForm.zero(chart3, 3, ValueSpace.scalar()))


def test_d_runs_out_of_jets(rng, chart4):
    f = random_form(rng, chart4, 0, ValueSpace.scalar())
    dd = ext_d(ext_d(f))
    assert dd.max_order == 0
    with raises(JetExhaustedError):
        ext_d(dd)


def test_evaluate_beyond_max_order(rng, chart3, points3):
    df = ext_d(random_form(rng, chart3, 0, ValueSpace.scalar()))
    with raises(JetExhaustedError):
        df.evaluate(points3, 2)


@mark.parametrize("p q".split(), ((0, 1), (1, 1), (1, 2), (0, 3)))
def test_wedge_graded_commutative(rng, chart3, points3, p, q):
    alpha = random_form(rng, chart3, p, ValueSpace.scalar())
    beta = random_form(rng, chart3, q, ValueSpace.scalar())
    ab = wedge(_product, alpha, beta, ValueSpace.scalar()).values(points3)
    ba = wedge(_product, beta, alpha, ValueSpace.scalar()).values(points3)
    assert_allclose(ab, (-1.0) ** (p * q) * ba, atol=1e-14)


def test_wedge_degree_overflow(rng, chart3):
    alpha = random_form(rng, chart3, 2, ValueSpace.scalar())
    with raises(DegreeOverflowError):
        wedge(_product, alpha, alpha, ValueSpace.scalar())


def test_wedge_of_coordinate_forms(chart3, points3):
    one = [((0, 0, 0), 1.0, 0.0)]
    dx = _scalar_form(chart3, 1, [((0,), one)])
    dy = _scalar_form(chart3, 1, [((1,), one)])
    dxdy = wedge(_product, dx, dy, ValueSpace.scalar()).values(points3)
    assert_allclose(dxdy[:, 0], 1.0)
    assert_allclose(dxdy[:, 1:], 0.0)


@mark.parametrize("n", (3, 4))
@mark.parametrize("p q".split(), ((0, 1), (1, 1), (0, 2)))
def test_leibniz_rule(rng, n, p, q):
    chart = Chart.periodic([1.0] * n)
    points = chart.random_points(rng, 100)
    alpha = random_form(rng, chart, p, ValueSpace.scalar())
    beta = random_form(rng, chart, q, ValueSpace.scalar())
    lhs = ext_d(wedge(_product, alpha, beta, ValueSpace.scalar()))
    rhs = wedge(_product, ext_d(alpha), beta, ValueSpace.scalar()) + wedge(
        _product, alpha, ext_d(beta), ValueSpace.scalar()
    ).scale((-1.0) ** p)
    assert np.max(np.abs((lhs - rhs).values(points))) <= 1e-10


def test_leibniz_for_pairing_and_bracket(rng, chart3, points3, sig):
    alpha = random_form(rng, chart3, 1, ValueSpace.gl(3))
    beta = random_form(rng, chart3, 1, ValueSpace.gl(3))
    lhs = ext_d(wedge_pair(PairingKind.GL_ETA, alpha, beta, sig))
    rhs = wedge_pair(PairingKind.GL_ETA, ext_d(alpha), beta, sig) - wedge_pair(
        PairingKind.GL_ETA, alpha, ext_d(beta), sig
    )
    assert np.max(np.abs((lhs - rhs).values(points3))) <= 1e-10
    lhs = ext_d(wedge_bracket(alpha, beta))
    rhs = wedge_bracket(ext_d(alpha), beta) - wedge_bracket(alpha, ext_d(beta))
    assert np.max(np.abs((lhs - rhs).values(points3))) <= 1e-10


def test_bracket_of_one_form_with_itself_doubles_commutator(rng, chart3, points3):
    a = random_form(rng, chart3, 1, ValueSpace.gl(3))
    aa = wedge_bracket(a, a).values(points3)
    # [A ^ A]_{01} = 2 [A_0, A_1]
    vals = a.values(points3)
    assert_allclose(aa[:, 0], 2.0 * (vals[:, 0] @ vals[:, 1] - vals[:, 1] @ vals[:, 0]), atol=1e-14)


def test_wedge_pair_space_checks(rng, chart3, sig):
    gl = random_form(rng, chart3, 1, ValueSpace.gl(3))
    aff = random_form(rng, chart3, 1, ValueSpace.aff(3))
    with raises(SpaceMismatchError):
        wedge_pair(PairingKind.GL_ETA, gl, aff, sig)
    with raises(SpaceMismatchError):
        wedge_pair(PairingKind.AFF3, gl, gl, sig)
    with raises(SpaceMismatchError):
        wedge_bracket(random_form(rng, chart3, 1, ValueSpace.vec(3)), gl)


def test_wedge_pair_requires_signature(rng, chart3):
    gl = random_form(rng, chart3, 1, ValueSpace.gl(3))
    with raises(TypeError):
        wedge_pair(PairingKind.GL_ETA, gl, gl)


def test_wedge_scalar_multiplies(rng, chart3, points3):
    f = random_form(rng, chart3, 0, ValueSpace.scalar())
    alpha = random_form(rng, chart3, 1, ValueSpace.vec(3))
    product = wedge_scalar(f, alpha).values(points3)
    assert_allclose(product, f.values(points3)[:, :, None] * alpha.values(points3))


def test_form_arithmetic_checks(rng, chart3):
    one = random_form(rng, chart3, 1, ValueSpace.scalar())
    two = random_form(rng, chart3, 2, ValueSpace.scalar())
    with raises(DegreeOverflowError):
        one + two
    with raises(SpaceMismatchError):
        one + random_form(rng, chart3, 1, ValueSpace.vec(3))


def test_from_terms_rejects_bad_basis(chart3):
    field = make_trig_field(chart3, [])
    with raises(SpaceMismatchError):
        ValuedForm.from_terms(chart3, 1, ValueSpace.gl(3), [FormTerm((0,), np.eye(2), field)])
    with raises(DimensionMismatchError):
        ValuedForm.from_terms(chart3, 1, ValueSpace.scalar(), [FormTerm((0, 1), np.ones(()), field)])


# evaluation

def test_eval_form_on_vectors(rng, chart3):
    alpha = random_form(rng, chart3, 2, ValueSpace.scalar())
    x = np.array([0.1, 0.2, 0.3])
    v = rng.standard_normal(3)
    w = rng.standard_normal(3)
    assert_allclose(eval_form(alpha, x, [v, w]), -eval_form(alpha, x, [w, v]))
    e0, e1 = np.eye(3)[:2]
    assert_allclose(eval_form(alpha, x, [e0, e1]), alpha.values(x[None])[0, 0])


def test_eval_form_vector_count(rng, chart3):
    alpha = random_form(rng, chart3, 2, ValueSpace.scalar())
    with raises(DimensionMismatchError):
        eval_form(alpha, np.zeros(3), [np.ones(3)])


# quadrature

def test_integral_of_constant_top_form():
    chart = Chart.periodic([2.0, 1.0, 0.5])
    form = ValuedForm.constant(chart, 3, ValueSpace.scalar(), np.array([3.0]))
    assert_allclose(integrate_top(form, QuadratureGrid(chart, (4, 4, 4))), 3.0)


def test_integral_of_cos_squared_is_exact(chart3):
    # cos^2(2 pi x) dx^dy^dz has bandwidth 2 < 5 samples per axis
    cos = make_trig_field(chart3, [((1, 0, 0), 1.0, 0.0)])
    form = ValuedForm.from_terms(
        chart3, 3, ValueSpace.scalar(), [FormTerm((0, 1, 2), np.ones(()), cos)]
    )
    squared = wedge(_product, ValuedForm.from_terms(
        chart3, 0, ValueSpace.scalar(), [FormTerm((), np.ones(()), cos)]
    ), form, ValueSpace.scalar())
    grid = QuadratureGrid(chart3, (5, 3, 3))
    assert abs(integrate_top(form, grid)) <= 1e-15
    assert_allclose(integrate_top(squared, grid), 0.5, rtol=1e-14)


def test_integral_of_exact_form_vanishes(rng, chart3):
    alpha = random_form(rng, chart3, 2, ValueSpace.scalar())
    grid = QuadratureGrid.for_frequency(chart3, 2)
    assert abs(integrate_top(ext_d(alpha), grid)) <= 1e-12


def test_integral_needs_top_scalar_form(rng, chart3):
    grid = QuadratureGrid(chart3, (3, 3, 3))
    with raises(DegreeOverflowError):
        integrate_top(random_form(rng, chart3, 2, ValueSpace.scalar()), grid)


def test_integral_independent_of_workers(rng):
    chart = Chart.periodic([1.0, 1.0, 1.0])
    alpha = wedge(
        _product,
        random_form(rng, chart, 1, ValueSpace.scalar()),
        random_form(rng, chart, 2, ValueSpace.scalar()),
        ValueSpace.scalar(),
    )
    grid = QuadratureGrid(chart, (17, 17, 17))
    serial = integrate_top(alpha, grid, workers=1)
    assert integrate_top(alpha, grid, workers=4) == serial
    assert_array_equal(sample_top(alpha, grid, workers=3), sample_top(alpha, grid))


def test_pairwise_sum_order():
    values = np.array([1e16, 1.0, -1e16, 1.0])
    assert pairwise_sum(values) == (1e16 + 1.0) + (-1e16 + 1.0)
    assert pairwise_sum(np.array([])) == 0.0
    assert pairwise_sum(np.arange(7.0)) == 21.0
