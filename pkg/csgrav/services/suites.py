"""
Command suites behind the CLI: each takes a validated RunSpec and returns the
check records, a results dictionary and (for extremize) the iteration rows.

All randomness comes from one numpy Generator seeded with spec.seed and is
consumed in a fixed order, so a suite's output depends only on the spec.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Tuple

import numpy as np

from csgrav.config import ADMISSIBILITY_TOL
from csgrav.errors import InadmissibleSectionError
from csgrav.schemas import CheckRecord, FieldSpec, RunSpec
from csgrav.services.algebra import (
    PairingKind,
    Signature,
    commutator,
    gram,
    iso_k_r3_array,
    is_lorentz,
    k_defect,
    lorentz_basis,
    matrix_exp,
    p_defect,
    pairing_matrix,
    project_kp_array,
)
from csgrav.services.gauge import (
    GaugePotential,
    bianchi_residual,
    chern_weil_form,
    cs_form,
    curvature,
    gauge_defect,
    gauge_transform,
    random_gauge_map,
    random_potential,
    structure_residual,
    transgression_form,
    wzw_form,
)
from csgrav.services.gravity import (
    CS_PER_PALATINI,
    PALATINI_PAIRING_SIGN,
    GravSection,
    correspondence,
    flat_section,
    metric_from_frame,
    metricity_residual,
    orthogonality_check,
    palatini_form,
    palatini_pairing_form,
    random_section,
    reduce_connection,
    sup_norm,
    torsion,
    witten_lift,
)
from csgrav.services.jetfields import (
    Chart,
    QuadratureGrid,
    ValueSpace,
    ValuedForm,
    ext_d,
    integrate_top,
    pairwise_sum,
    random_form,
    sample_top,
    wedge_bracket,
    wedge_pair,
)
from csgrav.services.reporting import CheckCollector
from csgrav.services.varsolver import (
    ActionKind,
    LatticeConfig,
    descend,
    discrete_action,
    el_residual,
    stationarity_report,
)

logger = logging.getLogger(__name__)

# Sites per axis for lattice runs when the spec gives no grid
EXTREMIZE_DEFAULT_COUNTS = 16

# Per-axis counts for the action-level gauge check; the boundary term carries
# the full exponential series of the gauge map, so the coarse grid is not exact
GAUGE_INTEGRAL_COUNTS = 20

INVARIANCE_TRIPLES = 1000
ALGEBRA_SAMPLES = 200
METRICITY_SECTIONS = 50
CONTAMINATION = 0.3

GL3 = ValueSpace.gl(3)
AFF3 = ValueSpace.aff(3)
PAIRINGS = ((GL3, PairingKind.GL_ETA, "gl3"), (AFF3, PairingKind.AFF3, "aff3"))


@dataclass
class SuiteOutcome:
    checks: List[CheckRecord]
    results: Dict[str, Any]
    history: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(record.status == "PASS" for record in self.checks)


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

def spec_sig(spec: RunSpec) -> Signature:
    return Signature(tuple(spec.signature))


def _amplitudes(fs: FieldSpec) -> Tuple[float, float]:
    """(field amplitude, coframe perturbation amplitude) for the named generator."""
    if fs.name == "flat":
        return 0.0, 0.0
    if fs.name == "perturbed-flat":
        return fs.magnitude, fs.magnitude
    return fs.amplitude, fs.coframe_amplitude


def _section(
    rng: np.random.Generator,
    chart: Chart,
    sig: Signature,
    fs: FieldSpec,
    p_contamination: float = 0.0,
) -> GravSection:
    amplitude, coframe_amplitude = _amplitudes(fs)
    if fs.name == "flat" and p_contamination == 0.0:
        return flat_section(chart)
    return random_section(
        rng, chart, sig, fs.max_frequency, amplitude, coframe_amplitude, p_contamination
    )


def _pair_arrays(pk: PairingKind, sig: Signature, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Pairing of stacked matrices through the flattened pairing matrix."""
    q = pairing_matrix(pk, sig)
    flat_x = x.reshape(x.shape[0], -1)
    flat_y = y.reshape(y.shape[0], -1)
    return np.einsum("na,ab,nb->n", flat_x, q, flat_y)


def _relative_integral(form: ValuedForm, grid: QuadratureGrid, workers: int) -> Tuple[float, float]:
    """(integral, |integral| / max(1, L1 norm)) of a scalar top form."""
    samples = sample_top(form, grid, workers)
    weight = grid.chart.volume / grid.size
    integral = pairwise_sum(samples) * weight
    l1 = float(np.sum(np.abs(samples))) * weight
    return integral, abs(integral) / max(1.0, l1)


def _compact_generators(sig: Signature) -> np.ndarray:
    basis = lorentz_basis(sig)
    return np.array([g for g in basis if np.allclose(g, -g.T)])


def _lorentz_elements(rng: np.random.Generator, sig: Signature, count: int) -> np.ndarray:
    basis = lorentz_basis(sig)
    coeffs = rng.uniform(-1.0, 1.0, (count, len(basis)))
    return np.einsum("nc,cij->nij", coeffs, basis)


def _invariant_blocks(rng: np.random.Generator, sig: Signature, count: int) -> np.ndarray:
    """Random 4x4 blocks of k + R^3."""
    blocks = np.zeros((count, 4, 4))
    blocks[:, :3, :3] = _lorentz_elements(rng, sig, count)
    blocks[:, :3, 3] = rng.uniform(-1.0, 1.0, (count, 3))
    return blocks


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def _verify_algebra(checks: CheckCollector, rng: np.random.Generator, sig: Signature) -> Dict[str, Any]:
    results: Dict[str, Any] = {}

    a = rng.uniform(-1.0, 1.0, (ALGEBRA_SAMPLES, 3, 3))
    k, p = project_kp_array(a, sig)
    kk, kp = project_kp_array(k, sig)
    pk, pp = project_kp_array(p, sig)
    projector = max(
        np.max(np.abs(k + p - a)),
        np.max(np.abs(k_defect(k, sig))),
        np.max(np.abs(p_defect(p, sig))),
        np.max(np.abs(kk - k)),
        np.max(np.abs(pp - p)),
        np.max(np.abs(kp)),
        np.max(np.abs(pk)),
    )
    checks.add("projector", "gl(3) = k + p: complementary idempotent projectors", projector)

    x = rng.uniform(-1.0, 1.0, (INVARIANCE_TRIPLES, 3, 3))
    y = rng.uniform(-1.0, 1.0, (INVARIANCE_TRIPLES, 3, 3))
    h = np.array([matrix_exp(g) for g in _lorentz_elements(rng, sig, INVARIANCE_TRIPLES)])
    lorentz = all(is_lorentz(elt, sig) for elt in h)
    h_inv = np.linalg.inv(h)
    before = _pair_arrays(PairingKind.GL_ETA, sig, x, y)
    after = _pair_arrays(PairingKind.GL_ETA, sig, h @ x @ h_inv, h @ y @ h_inv)
    k_inv = float(np.max(np.abs(after - before) / (1.0 + np.abs(before)))) if lorentz else float("inf")
    checks.add(
        "k_invariance",
        "pairing on gl(3) is invariant under the Lorentz group",
        k_inv,
        detail=f"{INVARIANCE_TRIPLES} random triples",
    )

    det_gl = float(np.linalg.det(gram(PairingKind.GL_ETA, sig)))
    det_aff = float(np.linalg.det(gram(PairingKind.AFF3, sig)))
    results["gram_det_gl"] = det_gl
    results["gram_det_aff3"] = det_aff
    checks.add("gram_gl", "pairing on gl(3) is non-degenerate", abs(abs(det_gl) - 1.0))
    checks.add("gram_aff3", "extended pairing on a(3) is non-degenerate", abs(det_aff), comparison="ge")

    u = _invariant_blocks(rng, sig, INVARIANCE_TRIPLES)
    v = _invariant_blocks(rng, sig, INVARIANCE_TRIPLES)
    g = np.array([matrix_exp(b) for b in _invariant_blocks(rng, sig, INVARIANCE_TRIPLES)])
    g_inv = np.linalg.inv(g)
    before = _pair_arrays(PairingKind.AFF3, sig, u, v)
    after = _pair_arrays(PairingKind.AFF3, sig, g @ u @ g_inv, g @ v @ g_inv)
    checks.add(
        "aff_invariance",
        "extended pairing is invariant under K x| R^3 on k + R^3",
        float(np.max(np.abs(after - before) / (1.0 + np.abs(before)))),
        detail=f"{INVARIANCE_TRIPLES} random triples",
    )

    blocks = [np.zeros((ALGEBRA_SAMPLES, 4, 4)) for _ in range(3)]
    for block in blocks:
        block[:, :3, :] = rng.uniform(-1.0, 1.0, (ALGEBRA_SAMPLES, 3, 4))
    bx, by, bz = blocks
    jacobi = (
        commutator(bx, commutator(by, bz))
        + commutator(by, commutator(bz, bx))
        + commutator(bz, commutator(bx, by))
    )
    checks.add("jacobi", "a(3) bracket satisfies the Jacobi identity", float(np.max(np.abs(jacobi))))

    generators = _compact_generators(sig)
    xi = rng.uniform(-1.0, 1.0, (ALGEBRA_SAMPLES, 3))
    phis = rng.uniform(-1.0, 1.0, (ALGEBRA_SAMPLES, len(generators)))
    rotations = np.array([matrix_exp(np.tensordot(phi, generators, axes=1)) for phi in phis])
    lhs = iso_k_r3_array(np.einsum("nij,nj->ni", rotations, xi), sig)
    rhs = rotations @ iso_k_r3_array(xi, sig) @ np.linalg.inv(rotations)
    checks.add(
        "iso_intertwining",
        "k ~ R^3 intertwines the rotation subgroup",
        float(np.max(np.abs(lhs - rhs))),
    )
    return results


def _verify_forms(
    checks: CheckCollector,
    rng: np.random.Generator,
    spec: RunSpec,
    sig: Signature,
    chart3: Chart,
    chart4: Chart,
    points3: np.ndarray,
    points4: np.ndarray,
    workers: int,
) -> Dict[str, Any]:
    fs = spec.field_spec
    amplitude, _ = _amplitudes(fs)
    vec = ValueSpace.vec(3)

    d_squared = 0.0
    for chart, points in ((chart3, points3), (chart4, points4)):
        for degree in range(chart.n - 1):
            alpha = random_form(rng, chart, degree, vec, None, fs.max_frequency, amplitude)
            d_squared = max(d_squared, sup_norm(ext_d(ext_d(alpha)), points))
    checks.add("d_squared", "d o d = 0", d_squared)

    leibniz = 0.0
    for chart, points in ((chart3, points3), (chart4, points4)):
        for p, q in ((1, 1), (0, 2)):
            if p + q + 1 > chart.n:
                continue
            alpha = random_form(rng, chart, p, GL3, None, fs.max_frequency, amplitude)
            beta = random_form(rng, chart, q, GL3, None, fs.max_frequency, amplitude)
            lhs = ext_d(wedge_pair(PairingKind.GL_ETA, alpha, beta, sig))
            rhs = wedge_pair(PairingKind.GL_ETA, ext_d(alpha), beta, sig) + wedge_pair(
                PairingKind.GL_ETA, alpha, ext_d(beta), sig
            ).scale((-1.0) ** p)
            leibniz = max(leibniz, sup_norm(lhs - rhs, points))
            bracket_lhs = ext_d(wedge_bracket(alpha, beta))
            bracket_rhs = wedge_bracket(ext_d(alpha), beta) + wedge_bracket(
                alpha, ext_d(beta)
            ).scale((-1.0) ** p)
            leibniz = max(leibniz, sup_norm(bracket_lhs - bracket_rhs, points))
    checks.add("leibniz", "graded Leibniz rule for d over pairings and brackets", leibniz)

    grid = QuadratureGrid(chart3, tuple(spec.grid_counts_or_default()))
    alpha = random_form(rng, chart3, 2, ValueSpace.scalar(), None, fs.max_frequency, amplitude)
    integral, stokes = _relative_integral(ext_d(alpha), grid, workers)
    checks.add("stokes", "integral of an exact top form over the torus vanishes", stokes)
    return {"stokes_integral": integral}


def _verify_gauge(
    checks: CheckCollector,
    rng: np.random.Generator,
    spec: RunSpec,
    sig: Signature,
    chart3: Chart,
    chart4: Chart,
    points3: np.ndarray,
    points4: np.ndarray,
    workers: int,
) -> Dict[str, Any]:
    fs = spec.field_spec
    amplitude, _ = _amplitudes(fs)
    freq = fs.max_frequency
    results: Dict[str, Any] = {}

    bianchi = 0.0
    for chart, points, space in ((chart3, points3, GL3), (chart3, points3, AFF3), (chart4, points4, GL3)):
        potential = random_potential(rng, chart, space, sig, False, freq, amplitude)
        bianchi = max(bianchi, sup_norm(bianchi_residual(potential), points))
    checks.add("bianchi", "Bianchi identity dF + [A ^ F] = 0", bianchi)

    transgression = 0.0
    for space, pk, _ in PAIRINGS:
        potential = random_potential(rng, chart3, space, sig, False, freq, amplitude)
        residual = cs_form(potential, pk, sig) - transgression_form(potential, pk, sig)
        transgression = max(transgression, sup_norm(residual, points3))
    checks.add(
        "cs_transgression",
        "Chern-Simons form equals the transgression form Tq(A, F)",
        transgression,
    )

    mc = 0.0
    for space in (GL3, AFF3):
        g = random_gauge_map(rng, chart3, space, sig, False, 2, freq, amplitude)
        mc = max(mc, sup_norm(structure_residual(g), points3))
    checks.add("maurer_cartan", "Maurer-Cartan structure equation d lambda + 1/2 [lambda ^ lambda] = 0", mc)

    composition = 0.0
    for space in (GL3, AFF3):
        potential = random_potential(rng, chart3, space, sig, False, freq, amplitude)
        g = random_gauge_map(rng, chart3, space, sig, False, 1, freq, amplitude)
        h = random_gauge_map(rng, chart3, space, sig, False, 1, freq, amplitude)
        twice = gauge_transform(gauge_transform(potential, g), h).form
        once = gauge_transform(potential, g * h).form
        composition = max(composition, sup_norm(twice - once, points3))
    checks.add("gauge_composition", "right action: (A^g)^h = A^(gh)", composition)

    grid = QuadratureGrid(chart3, tuple(spec.grid_counts_or_default()))
    dense_counts = tuple(max(c, GAUGE_INTEGRAL_COUNTS) for c in spec.grid_counts_or_default())
    dense = QuadratureGrid(chart3, dense_counts)
    gauge_freq = min(freq, 1)
    defect = 0.0
    defect_integral = 0.0
    invariance = 0.0
    for space, pk, tag in PAIRINGS:
        potential = random_potential(rng, chart3, space, sig, True, freq, amplitude)
        g = random_gauge_map(rng, chart3, space, sig, True, 2, gauge_freq, amplitude)
        residual = gauge_defect(potential, g, pk, sig)
        defect = max(defect, sup_norm(residual, points3))
        integral = integrate_top(residual, grid, workers)
        cs_l1 = float(np.sum(np.abs(sample_top(cs_form(potential, pk, sig), grid, workers))))
        cs_l1 *= grid.chart.volume / grid.size
        defect_integral = max(defect_integral, abs(integral) / max(1.0, cs_l1))

        action = integrate_top(cs_form(potential, pk, sig), dense, workers)
        transformed = integrate_top(cs_form(gauge_transform(potential, g), pk, sig), dense, workers)
        wzw = integrate_top(wzw_form(g, pk, sig), dense, workers)
        scale = max(1.0, abs(action), abs(transformed))
        invariance = max(invariance, abs(transformed - action + wzw) / scale)
        results[f"action_{tag}"] = {"cs": action, "cs_transformed": transformed, "wzw": wzw}
    checks.add(
        "gauge_defect",
        "cs(A^g) = cs(A) + d<Ad A ^ lambda> - wzw(g) pointwise",
        defect,
    )
    checks.add(
        "gauge_defect_integral",
        "gauge relation after integration over the 3-torus",
        defect_integral,
    )

    wzw_closed = 0.0
    for space, pk, _ in PAIRINGS:
        g = random_gauge_map(rng, chart4, space, sig, True, 1, gauge_freq, amplitude)
        wzw_closed = max(wzw_closed, sup_norm(ext_d(wzw_form(g, pk, sig)), points4))
    checks.add("wzw_closed", "WZW 3-form is closed", wzw_closed)
    checks.add(
        "action_gauge_invariance",
        "integrated Chern-Simons action changes only by the WZW term",
        invariance,
        detail=f"quadrature on {'x'.join(str(c) for c in dense_counts)} points",
    )
    return results


def _verify_gravity(
    checks: CheckCollector,
    rng: np.random.Generator,
    spec: RunSpec,
    sig: Signature,
    chart3: Chart,
    points3: np.ndarray,
) -> Dict[str, Any]:
    fs = spec.field_spec

    relation = 0.0
    admissible_nabla = 0.0
    contaminated_p = 0.0
    for index in range(METRICITY_SECTIONS):
        contamination = CONTAMINATION if index % 2 else 0.0
        section = _section(rng, chart3, sig, fs, contamination)
        metricity = metricity_residual(section, sig, points3)
        p_values = metricity.p_part.values(points3)
        relation = max(relation, float(np.max(np.abs(metricity.nabla - 2.0 * p_values @ sig.eta))))
        if contamination:
            contaminated_p = max(contaminated_p, float(np.max(np.abs(p_values))))
        else:
            admissible_nabla = max(admissible_nabla, float(np.max(np.abs(metricity.nabla))))
    checks.add(
        "metricity",
        "metricity: p(omega) = 0 iff nabla zeta = 0, with nabla zeta = 2 p(omega) eta",
        max(relation, admissible_nabla),
        detail=f"{METRICITY_SECTIONS} sections, half with a transvection part",
    )

    section = _section(rng, chart3, sig, fs)
    ortho = orthogonality_check(section, metric_from_frame(section, sig), sig, 0.0, points3)
    checks.add("frame_completeness", "the induced metric makes the frame orthonormal", ortho.sup_norm)

    lift = witten_lift(section)
    lifted = curvature(lift).values(points3)
    split = max(
        float(np.max(np.abs(lifted[..., :3, :3] - curvature(section.omega.potential).values(points3)))),
        float(np.max(np.abs(lifted[..., :3, 3] - torsion(section).values(points3)))),
        float(np.max(np.abs(lifted[..., 3, :]))),
    )
    checks.add("witten_split", "curvature of the lift splits into (Omega, Theta)", split)

    reduced = reduce_connection(lift, sig, section.theta, points=points3)
    if reduced.reducible and reduced.soldered:
        rebuilt = witten_lift(GravSection(reduced.theta, reduced.omega_k))
        round_trip = float(np.max(np.abs(rebuilt.form.values(points3) - lift.form.values(points3))))
    else:
        round_trip = float("inf")
    contaminated = _section(rng, chart3, sig, fs, CONTAMINATION)
    rejected = not reduce_connection(witten_lift(contaminated), sig, points=points3).reducible
    if not rejected:
        round_trip = float("inf")
    checks.add(
        "reduce_round_trip",
        "a(3) potential with Lorentz linear part reduces to (omega, theta) and back",
        round_trip,
        detail="contaminated potential rejected" if rejected else "contaminated potential accepted",
    )

    direct = palatini_form(section, sig).values(points3)
    paired = palatini_pairing_form(section, sig).values(points3)
    checks.add(
        "palatini_normalization",
        "eta-eps contraction of theta ^ Omega equals the a(3) pairing up to its sign",
        float(np.max(np.abs(direct - PALATINI_PAIRING_SIGN * paired))),
    )
    return {"contaminated_p_norm": contaminated_p, "palatini_pairing_sign": PALATINI_PAIRING_SIGN}


def run_verify(spec: RunSpec, workers: int = 1) -> SuiteOutcome:
    """Full identity suite: algebra, exterior calculus, gauge calculus, gravity."""
    sig = spec_sig(spec)
    rng = np.random.default_rng(spec.seed)
    checks = CheckCollector(spec.tolerance)
    chart3 = Chart.periodic(spec.chart.periods)
    chart4 = Chart.periodic(list(spec.chart.periods) + [spec.chart.periods[0]])
    points3 = chart3.random_points(rng, spec.field_spec.samples)
    points4 = chart4.random_points(rng, spec.field_spec.samples)

    results: Dict[str, Any] = {}
    results["algebra"] = _verify_algebra(checks, rng, sig)
    results["forms"] = _verify_forms(checks, rng, spec, sig, chart3, chart4, points3, points4, workers)
    results["gauge"] = _verify_gauge(checks, rng, spec, sig, chart3, chart4, points3, points4, workers)
    results["gravity"] = _verify_gravity(checks, rng, spec, sig, chart3, points3)
    return SuiteOutcome(checks.records, results)


# ---------------------------------------------------------------------------
# correspond
# ---------------------------------------------------------------------------

def run_correspond(spec: RunSpec, workers: int = 1) -> SuiteOutcome:
    """
    Integrals of the Palatini and Chern-Simons Lagrangians over random sections.

    Raises:
        InadmissibleSectionError: if a section drawn without contamination is
        rejected; contaminated runs record a FAIL instead.
    """
    sig = spec_sig(spec)
    fs = spec.field_spec
    rng = np.random.default_rng(spec.seed)
    checks = CheckCollector(spec.tolerance)
    chart = Chart.periodic(spec.chart.periods)
    grid = QuadratureGrid(chart, tuple(spec.grid_counts_or_default()))
    points = chart.random_points(rng, fs.samples)

    sections: List[Dict[str, Any]] = []
    pointwise = 0.0
    identity = 0.0
    rejected = 0
    for index in range(fs.sections):
        section = _section(rng, chart, sig, fs, fs.p_contamination)
        try:
            result = correspondence(section, sig, grid, ADMISSIBILITY_TOL, workers)
        except InadmissibleSectionError as exc:
            if fs.p_contamination == 0.0:
                raise
            rejected += 1
            checks.add(
                f"admissibility_{index}",
                "Chern-Simons/Palatini identity requires a Lorentz-valued connection",
                exc.p_norm,
                tolerance=ADMISSIBILITY_TOL,
                detail=str(exc),
            )
            continue
        pointwise = max(pointwise, sup_norm(result.exact_residual, points))
        identity = max(
            identity,
            abs(result.integral_cs - CS_PER_PALATINI * result.integral_pg)
            / max(abs(result.integral_pg), 1.0),
        )
        sections.append(
            {
                "index": index,
                "integral_pg": result.integral_pg,
                "integral_cs": result.integral_cs,
                "ratio": result.ratio,
            }
        )

    ratios = [s["ratio"] for s in sections if s["ratio"] is not None]
    mean = float(np.mean(ratios)) if ratios else None
    spread = (max(ratios) - min(ratios)) / abs(mean) if ratios else 0.0
    results: Dict[str, Any] = {
        "sections": sections,
        "rejected": rejected,
        "ratio_mean": mean,
        "ratio_expected": CS_PER_PALATINI,
        "ratio_spread": spread,
        "grid": list(grid.counts),
    }
    if sections:
        checks.add(
            "correspondence_pointwise",
            "L_CS(lift) = c lambda_PG - d<omega ^ theta> pointwise",
            pointwise,
            key="correspondence",
        )
        checks.add(
            "correspondence",
            "integrated Chern-Simons action of the lift is a constant multiple of the Palatini action",
            identity,
            detail=f"c = {CS_PER_PALATINI:g}",
        )
        checks.add("ratio_spread", "measured action ratio is the same for every section", spread)
    logger.info(
        "Correspondence over %d sections: ratio %s, spread %.3e",
        len(sections),
        "n/a" if mean is None else f"{mean:.12f}",
        spread,
    )
    return SuiteOutcome(checks.records, results)


# ---------------------------------------------------------------------------
# chern
# ---------------------------------------------------------------------------

def run_chern(spec: RunSpec, workers: int = 1) -> SuiteOutcome:
    """d(cs) = <F ^ F> pointwise and zero integral of <F ^ F> on a 4-torus."""
    sig = spec_sig(spec)
    fs = spec.field_spec
    amplitude, _ = _amplitudes(fs)
    rng = np.random.default_rng(spec.seed)
    checks = CheckCollector(spec.tolerance)
    chart = Chart.periodic(spec.chart.periods)
    grid = QuadratureGrid(chart, tuple(spec.grid_counts_or_default()))
    points = chart.random_points(rng, fs.samples)
    results: Dict[str, Any] = {}

    for space, pk, tag in PAIRINGS:
        potential = random_potential(rng, chart, space, sig, True, fs.max_frequency, amplitude)
        weil = chern_weil_form(potential, pk, sig)
        residual = ext_d(cs_form(potential, pk, sig)) - weil
        checks.add(
            f"chern_weil_{tag}",
            "d of the Chern-Simons form is the Chern-Weil form <F ^ F>",
            sup_norm(residual, points),
            key="chern_weil",
        )
        integral, relative = _relative_integral(weil, grid, workers)
        checks.add(
            f"chern_weil_integral_{tag}",
            "<F ^ F> is exact, so its integral over the closed 4-torus vanishes",
            relative,
            key="chern_weil_integral",
        )
        results[tag] = {"integral_chern_weil": integral}

    abelian = lorentz_basis(sig)[:1]
    form = random_form(rng, chart, 1, GL3, abelian, fs.max_frequency, amplitude, label="A")
    potential = GaugePotential(form)
    d_a = ext_d(form)
    bracket_free = chern_weil_form(potential, PairingKind.GL_ETA, sig) - wedge_pair(
        PairingKind.GL_ETA, d_a, d_a, sig
    )
    checks.add(
        "chern_weil_abelian",
        "for an abelian potential both sides reduce to <dA ^ dA>",
        sup_norm(bracket_free, points),
        key="chern_weil",
    )
    results["grid"] = list(grid.counts)
    return SuiteOutcome(checks.records, results)


# ---------------------------------------------------------------------------
# extremize
# ---------------------------------------------------------------------------

def _start_config(
    spec: RunSpec, grid: QuadratureGrid, sig: Signature, rng: np.random.Generator
) -> LatticeConfig:
    fs = spec.field_spec
    if fs.name == "flat":
        return LatticeConfig.flat(grid)
    if fs.name == "perturbed-flat":
        return LatticeConfig.perturbed_flat(grid, rng, fs.magnitude)
    section = random_section(
        rng, grid.chart, sig, fs.max_frequency, fs.amplitude, fs.coframe_amplitude
    )
    return LatticeConfig.from_section(section, grid, sig)


def run_extremize(spec: RunSpec, workers: int = 1) -> SuiteOutcome:
    """Residual descent on the lattice, then stationarity of both actions."""
    sig = spec_sig(spec)
    solver = spec.solver
    rng = np.random.default_rng(spec.seed)
    checks = CheckCollector(spec.tolerance)
    chart = Chart.periodic(spec.chart.periods)
    counts = tuple(spec.grid) if spec.grid is not None else (EXTREMIZE_DEFAULT_COUNTS,) * 3
    grid = QuadratureGrid(chart, counts)

    start = _start_config(spec, grid, sig, rng)
    cfg, report = descend(start, sig, solver.max_iters, solver.step0, solver.tol)
    if report.stalled:
        logger.warning("Line search stalled; thresholds still decide the outcome")

    history = [
        {
            "iter": i,
            "objective": report.objective_history[i],
            "step": report.step_history[i],
            "action_pg": report.action_pg_history[i],
            "action_cs": report.action_cs_history[i],
        }
        for i in range(len(report.objective_history))
    ]

    checks.add(
        "objective_reduction",
        "descent drives the Einstein-equation residual toward an extremal",
        report.reduction,
        comparison="ge",
    )
    final_objective = report.objective_history[-1]
    checks.add(
        "solver_converged",
        "residual objective below the solver tolerance",
        final_objective,
        tolerance=solver.tol,
    )

    stationarity = stationarity_report(cfg, solver.stationarity_dirs, sig, rng)
    scale = stationarity.action_scale
    checks.add(
        "stationarity_palatini",
        "extremal of the Palatini action: directional derivatives vanish",
        stationarity.max_abs_palatini / scale,
        key="stationarity",
    )
    checks.add(
        "stationarity_cs",
        "extremal of the Chern-Simons action of the lift: directional derivatives vanish",
        stationarity.max_abs_cs / scale,
        key="stationarity",
    )

    residual = el_residual(cfg, sig)
    results = {
        "grid": list(counts),
        "iterations": report.iterations,
        "initial_objective": report.objective_history[0],
        "final_objective": final_objective,
        "reduction": report.reduction,
        "monotone": report.monotone,
        "converged": report.converged,
        "stalled": report.stalled,
        "curvature_sup": residual.curv_sup,
        "torsion_sup": residual.tors_sup,
        "action_pg": discrete_action(cfg, ActionKind.PALATINI, sig, workers),
        "action_cs": discrete_action(cfg, ActionKind.CS, sig, workers),
        "stationarity": {
            "directions": solver.stationarity_dirs,
            "action_scale": scale,
            "max_abs_palatini": stationarity.max_abs_palatini,
            "max_abs_cs": stationarity.max_abs_cs,
            "max_abs_difference": stationarity.max_abs_difference,
            "ratio": stationarity.ratio,
        },
    }
    return SuiteOutcome(checks.records, results, history)


SUITES = {
    "verify": run_verify,
    "correspond": run_correspond,
    "chern": run_chern,
    "extremize": run_extremize,
}
