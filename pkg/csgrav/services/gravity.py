"""
First-order gravity in three dimensions on a single chart.

A section is a pair (theta, omega): the coframe theta^i_mu (R^3-valued 1-form,
payload [mu, i]) and the connection omega^a_{b mu} (gl(3)-valued 1-form,
payload [mu, a, b]). Its Witten lift is the a(3)-valued potential (omega, theta).
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from csgrav.config import ADMISSIBILITY_TOL, EPS_DET
from csgrav.errors import (
    DimensionMismatchError,
    InadmissibleSectionError,
    PairingNormalizationError,
    SingularMatrixError,
    SpaceMismatchError,
)
from csgrav.services.algebra import (
    PairingKind,
    Signature,
    k_basis,
    levi_civita,
    p_basis,
    project_kp_array,
)
from csgrav.services.gauge import GaugePotential, cs_form, curvature
from csgrav.services.jetfields import (
    Chart,
    Jet,
    QuadratureGrid,
    ValueSpace,
    ValuedForm,
    ext_d,
    integrate_top,
    jet_inverse,
    jet_product,
    random_form,
    wedge,
    wedge_action,
    wedge_pair,
)

logger = logging.getLogger(__name__)

# lambda_PG = PALATINI_PAIRING_SIGN * <(0, theta) ^ (Omega, 0)> under the a(3) pairing
PALATINI_PAIRING_SIGN = -1.0

# L_CS(lift) = CS_PER_PALATINI * lambda_PG up to the exact form -d<(omega,0) ^ (0,theta)>
CS_PER_PALATINI = -2.0

# Smallest |integral of lambda_PG| for which a ratio is reported
RATIO_FLOOR = 1e-12


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CoframeField:
    form: ValuedForm

    def __post_init__(self):
        if self.form.degree != 1 or self.form.space != ValueSpace.vec(3):
            raise SpaceMismatchError(f"a coframe is an R^3-valued 1-form, got {self.form!r}")
        if self.form.chart.n != 3:
            raise DimensionMismatchError(f"coframes live on 3-charts, got n = {self.form.chart.n}")

    def matrix_jet(self, points: np.ndarray, order: int) -> Jet:
        """Jet of the matrix Theta[i, mu] = theta^i_mu."""
        return self.form.evaluate(points, order).map(lambda arr: np.swapaxes(arr, -1, -2))


@dataclass(frozen=True, eq=False)
class SpinConnection:
    form: ValuedForm

    def __post_init__(self):
        if self.form.degree != 1 or self.form.space != ValueSpace.gl(3):
            raise SpaceMismatchError(f"a connection is a gl(3)-valued 1-form, got {self.form!r}")

    @property
    def potential(self) -> GaugePotential:
        return GaugePotential(self.form)


@dataclass(frozen=True, eq=False)
class GravSection:
    theta: CoframeField
    omega: SpinConnection

    def __post_init__(self):
        if self.theta.form.chart != self.omega.form.chart:
            raise DimensionMismatchError("coframe and connection live on different charts")

    @property
    def chart(self) -> Chart:
        return self.theta.form.chart

    def check_invertible(self, points: np.ndarray) -> float:
        """Smallest |det theta| over points; raises SingularMatrixError below EPS_DET."""
        dets = np.abs(np.linalg.det(self.theta.matrix_jet(points, 0).val))
        smallest = float(np.min(dets))
        if smallest <= EPS_DET:
            raise SingularMatrixError(f"coframe is singular (min |det| = {smallest:.3e})")
        return smallest


@dataclass(frozen=True, eq=False)
class MetricField:
    """Symmetric matrix field stored as a gl(3)-valued 0-form."""

    form: ValuedForm

    def values(self, points: np.ndarray) -> np.ndarray:
        return self.form.values(points)[:, 0]

    def jet(self, points: np.ndarray, order: int) -> Jet:
        return self.form.evaluate(points, order).map(lambda arr: arr[..., 0, :, :])


@dataclass
class OrthogonalityResult:
    ok: bool
    sup_norm: float
    residual: np.ndarray


@dataclass
class MetricityResult:
    p_part: ValuedForm
    nabla: np.ndarray
    points: np.ndarray


@dataclass
class CorrespondenceResult:
    integral_pg: float
    integral_cs: float
    ratio: Optional[float]
    p_norm: float
    pointwise_diff: ValuedForm
    boundary: ValuedForm
    exact_residual: ValuedForm


@dataclass
class ReductionResult:
    reducible: bool
    p_norm: float
    omega_k: Optional[SpinConnection]
    theta: Optional[CoframeField]
    soldered: Optional[bool]


# ---------------------------------------------------------------------------
# metric
# ---------------------------------------------------------------------------

def _as_zero_form(chart: Chart, rule, max_order: int, label: str) -> MetricField:
    def wrapped(points, order):
        return rule(points, order).map(lambda arr: arr[..., None, :, :])

    return MetricField(ValuedForm(chart, 0, ValueSpace.gl(3), wrapped, max_order, label))


def metric_from_frame(section: GravSection, sig: Signature) -> MetricField:
    """zeta^{mu nu} = eta^{ij} X^mu_i X^nu_j with X the frame dual to theta."""
    eta = sig.eta
    theta = section.theta

    def op(x, y):
        return x @ eta @ np.swapaxes(y, -1, -2)

    def rule(points, order):
        frame = jet_inverse(theta.matrix_jet(points, order), order)
        return jet_product(op, frame, frame, order)

    return _as_zero_form(section.chart, rule, theta.form.max_order, "zeta")


def covariant_metric(section: GravSection, sig: Signature) -> MetricField:
    """g_{mu nu} = eta_{ab} theta^a_mu theta^b_nu, the inverse of zeta."""
    eta = sig.eta
    theta = section.theta

    def op(x, y):
        return np.swapaxes(x, -1, -2) @ eta @ y

    def rule(points, order):
        mat = theta.matrix_jet(points, order)
        return jet_product(op, mat, mat, order)

    return _as_zero_form(section.chart, rule, theta.form.max_order, "g")


def orthogonality_check(
    section: GravSection,
    metric: MetricField,
    sig: Signature,
    tol: float,
    points: Optional[np.ndarray] = None,
) -> OrthogonalityResult:
    """Residual eta^{ij} X^mu_i X^nu_j - zeta^{mu nu}; ok iff its sup-norm is <= tol."""
    points = section.chart.sample_points() if points is None else points
    section.check_invertible(points)
    frame = np.linalg.inv(section.theta.matrix_jet(points, 0).val)
    residual = frame @ sig.eta @ np.swapaxes(frame, -1, -2) - metric.values(points)
    largest = float(np.max(np.abs(residual)))
    return OrthogonalityResult(largest <= tol, largest, residual)


# ---------------------------------------------------------------------------
# metricity, torsion, curvature
# ---------------------------------------------------------------------------

def p_part(omega: SpinConnection, sig: Signature) -> ValuedForm:
    """Transvection part of every connection component."""
    return omega.form.map_values(
        lambda arr: project_kp_array(arr, sig)[1], ValueSpace.gl(3), "p(omega)"
    )


def k_part(omega: SpinConnection, sig: Signature) -> ValuedForm:
    return omega.form.map_values(
        lambda arr: project_kp_array(arr, sig)[0], ValueSpace.gl(3), "k(omega)"
    )


def metricity_residual(
    section: GravSection, sig: Signature, points: Optional[np.ndarray] = None
) -> MetricityResult:
    """
    Transvection part of omega and the covariant derivative of zeta.

    nabla[p, mu, a, b] holds the frame components theta^a_alpha theta^b_beta
    nabla_mu zeta^{alpha beta}, with the affine connection
    Gamma^alpha_{mu lambda} = X^alpha_a (d_mu theta^a_lambda + omega^a_{b mu} theta^b_lambda).
    For this sign of omega the result equals omega_mu eta + eta omega_mu^T = 2 p_mu eta.
    """
    points = section.chart.sample_points() if points is None else np.atleast_2d(points)
    section.check_invertible(points)
    coframe = section.theta.matrix_jet(points, 1)
    frame = np.linalg.inv(coframe.val)
    omega = section.omega.form.values(points)
    theta_mat = coframe.val

    # christoffel[p, mu, alpha, lambda]
    christoffel = frame[:, None] @ (coframe.grad + omega @ theta_mat[:, None])
    zeta = metric_from_frame(section, sig).jet(points, 1)
    coordinate = (
        zeta.grad
        + christoffel @ zeta.val[:, None]
        + zeta.val[:, None] @ np.swapaxes(christoffel, -1, -2)
    )
    nabla = theta_mat[:, None] @ coordinate @ np.swapaxes(theta_mat, -1, -2)[:, None]
    return MetricityResult(p_part(section.omega, sig), nabla, points)


def torsion(section: GravSection) -> ValuedForm:
    """Theta^i = d theta^i + omega^i_j ^ theta^j."""
    return ext_d(section.theta.form) + wedge_action(section.omega.form, section.theta.form)


def field_equations(section: GravSection) -> Tuple[ValuedForm, ValuedForm]:
    """(Omega, Theta); both vanish on solutions of the vacuum equations."""
    return curvature(section.omega.potential), torsion(section)


def sup_norm(form: ValuedForm, points: np.ndarray) -> float:
    values = form.values(points)
    return float(np.max(np.abs(values))) if values.size else 0.0


# ---------------------------------------------------------------------------
# affine embedding
# ---------------------------------------------------------------------------

def embed_linear(form: ValuedForm) -> ValuedForm:
    """(a, 0) in a(3) for a gl(3)-valued form."""

    def fn(arr):
        block = np.zeros(arr.shape[:-2] + (4, 4))
        block[..., :3, :3] = arr
        return block

    return form.map_values(fn, ValueSpace.aff(3), f"({form.label},0)")


def embed_translation(form: ValuedForm) -> ValuedForm:
    """(0, xi) in a(3) for an R^3-valued form."""

    def fn(arr):
        block = np.zeros(arr.shape[:-1] + (4, 4))
        block[..., :3, 3] = arr
        return block

    return form.map_values(fn, ValueSpace.aff(3), f"(0,{form.label})")


def linear_part(form: ValuedForm) -> ValuedForm:
    return form.map_values(lambda arr: arr[..., :3, :3], ValueSpace.gl(3), f"lin({form.label})")


def translation_part(form: ValuedForm) -> ValuedForm:
    return form.map_values(lambda arr: arr[..., :3, 3], ValueSpace.vec(3), f"trans({form.label})")


def witten_lift(section: GravSection) -> GaugePotential:
    """The a(3)-valued potential A = (omega, theta)."""
    lifted = embed_linear(section.omega.form) + embed_translation(section.theta.form)
    lifted.label = "A_sigma"
    return GaugePotential(lifted)


# ---------------------------------------------------------------------------
# Lagrangians
# ---------------------------------------------------------------------------

def _palatini_tensor(sig: Signature) -> np.ndarray:
    """T[i, j, k] = eta^{kl} eps_{lij}."""
    return np.einsum("k,kij->ijk", sig.eta_vector, levi_civita())


def palatini_pairing_form(section: GravSection, sig: Signature) -> ValuedForm:
    """<(0, theta) ^ (Omega, 0)> under the a(3) pairing."""
    omega_curv = curvature(section.omega.potential)
    return wedge_pair(
        PairingKind.AFF3, embed_translation(section.theta.form), embed_linear(omega_curv), sig
    )


def palatini_form(
    section: GravSection,
    sig: Signature,
    verify_points: Optional[np.ndarray] = None,
    tol: float = 1e-10,
) -> ValuedForm:
    """
    lambda_PG = eta^{kl} eps_{lij} theta^i ^ Omega^j_k.

    When verify_points is given, the contraction is compared with
    PALATINI_PAIRING_SIGN * <theta ^ Omega> at those points.

    Raises:
        PairingNormalizationError: if the two expressions disagree beyond tol.
    """
    if section.chart.n != 3:
        raise DimensionMismatchError(f"the Palatini form needs a 3-chart, got n = {section.chart.n}")
    tensor = _palatini_tensor(sig)

    def contract(x, y):
        return np.einsum("...i,ijk,...jk->...", x, tensor, y)

    omega_curv = curvature(section.omega.potential)
    form = wedge(contract, section.theta.form, omega_curv, ValueSpace.scalar(), "lambda_PG")

    if verify_points is not None:
        direct = form.values(verify_points)
        paired = PALATINI_PAIRING_SIGN * palatini_pairing_form(section, sig).values(verify_points)
        gap = float(np.max(np.abs(direct - paired)))
        if gap > tol:
            raise PairingNormalizationError(
                f"eta-eps contraction and pairing form differ by {gap:.3e} (tol {tol:.1e})"
            )
        logger.debug("Palatini normalization gap %.3e", gap)
    return form


def cs_of_section(section: GravSection, sig: Signature) -> ValuedForm:
    """Chern-Simons form of the Witten lift under the a(3) pairing."""
    if section.chart.n != 3:
        raise DimensionMismatchError(f"needs a 3-chart, got n = {section.chart.n}")
    return cs_form(witten_lift(section), PairingKind.AFF3, sig)


def lift_boundary_form(section: GravSection, sig: Signature) -> ValuedForm:
    """<(omega, 0) ^ (0, theta)>."""
    return wedge_pair(
        PairingKind.AFF3,
        embed_linear(section.omega.form),
        embed_translation(section.theta.form),
        sig,
    )


def correspondence(
    section: GravSection,
    sig: Signature,
    grid: QuadratureGrid,
    tol: float = ADMISSIBILITY_TOL,
    workers: int = 1,
) -> CorrespondenceResult:
    """
    Integrals of lambda_PG and of the Chern-Simons form of the lift.

    Raises:
        InadmissibleSectionError: if omega has a transvection part above tol.
    """
    points = grid.points()
    p_norm = sup_norm(p_part(section.omega, sig), points)
    if p_norm > tol:
        raise InadmissibleSectionError(
            f"connection is not Lorentz-valued: sup |p(omega)| = {p_norm:.3e} > {tol:.1e}",
            p_norm,
        )
    pg = palatini_form(section, sig)
    cs = cs_of_section(section, sig)
    integral_pg = integrate_top(pg, grid, workers)
    integral_cs = integrate_top(cs, grid, workers)
    ratio = integral_cs / integral_pg if abs(integral_pg) > RATIO_FLOOR else None

    boundary = lift_boundary_form(section, sig)
    diff = cs - pg.scale(CS_PER_PALATINI)
    diff.label = "L_CS - c*lambda_PG"
    exact = diff + ext_d(boundary)
    logger.info(
        "Correspondence: int lambda_PG = %.6e, int L_CS = %.6e, ratio = %s",
        integral_pg,
        integral_cs,
        "n/a" if ratio is None else f"{ratio:.12f}",
    )
    return CorrespondenceResult(integral_pg, integral_cs, ratio, p_norm, diff, boundary, exact)


def reduce_connection(
    potential: GaugePotential,
    sig: Signature,
    frame: Optional[CoframeField] = None,
    tol: float = ADMISSIBILITY_TOL,
    points: Optional[np.ndarray] = None,
) -> ReductionResult:
    """
    Split an a(3)-valued potential into (omega_k, theta) when its linear part is
    Lorentz-valued. soldered reports whether the translation part equals frame.
    """
    if potential.space != ValueSpace.aff(3):
        raise SpaceMismatchError(f"reduction needs an a(3) potential, got {potential.space}")
    points = potential.chart.sample_points() if points is None else points
    lin = linear_part(potential.form)
    trans = translation_part(potential.form)
    linear = SpinConnection(lin)
    p_norm = sup_norm(p_part(linear, sig), points)
    reducible = p_norm <= tol

    soldered = None
    if frame is not None:
        gap = np.abs(trans.values(points) - frame.form.values(points))
        soldered = bool(np.max(gap) <= tol)

    if not reducible:
        logger.info("Potential is not reducible: sup |p(lin)| = %.3e", p_norm)
        return ReductionResult(False, p_norm, None, None, soldered)
    omega_k = SpinConnection(k_part(linear, sig))
    return ReductionResult(True, p_norm, omega_k, CoframeField(trans), soldered)


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def _identity_coframe(chart: Chart) -> ValuedForm:
    return ValuedForm.constant(chart, 1, ValueSpace.vec(3), np.eye(3), "dx")


def flat_section(chart: Chart) -> GravSection:
    """theta^i = dx^i, omega = 0."""
    return GravSection(
        CoframeField(_identity_coframe(chart)),
        SpinConnection(ValuedForm.zero(chart, 1, ValueSpace.gl(3))),
    )


def random_section(
    rng: np.random.Generator,
    chart: Chart,
    sig: Signature,
    max_frequency: int = 2,
    amplitude: float = 0.3,
    coframe_amplitude: float = 0.1,
    p_contamination: float = 0.0,
    attempts: int = 10,
) -> GravSection:
    """
    theta = dx + small trig perturbation, omega on the iso-basis of k, plus an
    optional transvection component of size p_contamination.
    """
    points = chart.sample_points()
    for attempt in range(attempts):
        omega = random_form(
            rng, chart, 1, ValueSpace.gl(3), k_basis(sig), max_frequency, amplitude, label="omega"
        )
        if p_contamination > 0.0:
            omega = omega + random_form(
                rng, chart, 1, ValueSpace.gl(3), p_basis(sig), max_frequency, p_contamination
            )
        perturbation = random_form(
            rng, chart, 1, ValueSpace.vec(3), None, max_frequency, coframe_amplitude
        )
        theta = _identity_coframe(chart) + perturbation
        section = GravSection(CoframeField(theta), SpinConnection(omega))
        try:
            section.check_invertible(points)
            return section
        except SingularMatrixError:
            logger.warning("Random coframe %d was singular, drawing again", attempt)
    raise SingularMatrixError(f"no invertible coframe after {attempts} draws")


def random_admissible_section(
    rng: np.random.Generator,
    chart: Chart,
    sig: Signature,
    max_frequency: int = 2,
    amplitude: float = 0.3,
    coframe_amplitude: float = 0.1,
) -> GravSection:
    return random_section(rng, chart, sig, max_frequency, amplitude, coframe_amplitude, 0.0)
