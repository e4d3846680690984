"""
Connection potentials, gauge maps and the Chern-Simons family of forms.

Gauge maps act on the right: A -> Ad_{g^-1} A + g^-1 dg, so transforming by g
and then by h equals transforming by g h.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from csgrav.config import EXP_TOL, SERIES_MAX_TERMS
from csgrav.errors import DegreeOverflowError, SeriesDivergenceError, SpaceMismatchError
from csgrav.services.algebra import (
    PairingKind,
    Signature,
    commutator,
    lorentz_basis,
    matrix_exp,
)
from csgrav.services.jetfields import (
    Chart,
    Jet,
    ValueKind,
    ValueSpace,
    ValuedForm,
    ext_d,
    jet_product,
    random_form,
    wedge_bracket,
    wedge_pair,
)

logger = logging.getLogger(__name__)


def _jet_size(jet: Jet) -> float:
    slots = [arr for arr in (jet.val, jet.grad, jet.hess) if arr is not None and arr.size]
    return max((float(np.max(np.abs(arr))) for arr in slots), default=0.0)


def _ad_series(chi: Jet, seed: Jet, order: int, shift: int) -> Jet:
    """
    Jet of sum_k (-ad chi)^k seed / ((shift+1)(shift+2)...(shift+k)).

    shift = 0 gives Ad_{exp(-chi)} seed; shift = 1 gives the Maurer-Cartan
    series with seed = d chi.
    """
    total = seed
    term = seed
    for k in range(1, SERIES_MAX_TERMS + 1):
        term = jet_product(commutator, chi, term, order).scale(-1.0 / (k + shift))
        total = total + term
        if _jet_size(term) < EXP_TOL * max(1.0, _jet_size(total)):
            return total
    raise SeriesDivergenceError(
        f"adjoint series did not settle within {SERIES_MAX_TERMS} terms "
        f"(last term size {_jet_size(term):.3e})"
    )


@dataclass(frozen=True, eq=False)
class GaugePotential:
    """Local connection potential A: an algebra-valued 1-form."""

    form: ValuedForm

    def __post_init__(self):
        if self.form.degree != 1:
            raise DegreeOverflowError(f"a potential is a 1-form, got degree {self.form.degree}")
        if not self.form.space.is_algebra:
            raise SpaceMismatchError(f"a potential takes gl or aff values, got {self.form.space}")

    @property
    def chart(self) -> Chart:
        return self.form.chart

    @property
    def space(self) -> ValueSpace:
        return self.form.space


@dataclass(frozen=True, eq=False)
class GaugeMap:
    """g = exp(chi_1) exp(chi_2) ... exp(chi_r) for algebra-valued 0-forms chi_i."""

    chart: Chart
    space: ValueSpace
    generators: Tuple[ValuedForm, ...] = ()

    def __post_init__(self):
        generators = tuple(self.generators)
        for chi in generators:
            if chi.degree != 0 or chi.chart != self.chart or chi.space != self.space:
                raise SpaceMismatchError(
                    f"gauge generator {chi!r} does not match {self.space} on this chart"
                )
        object.__setattr__(self, "generators", generators)

    @classmethod
    def identity(cls, chart: Chart, space: ValueSpace) -> "GaugeMap":
        return cls(chart, space, ())

    @classmethod
    def from_generator(cls, chi: ValuedForm) -> "GaugeMap":
        return cls(chi.chart, chi.space, (chi,))

    def __mul__(self, other: "GaugeMap") -> "GaugeMap":
        if other.chart != self.chart or other.space != self.space:
            raise SpaceMismatchError("cannot multiply gauge maps of different kinds")
        return GaugeMap(self.chart, self.space, self.generators + other.generators)

    compose = __mul__

    @property
    def max_order(self) -> int:
        return min((chi.max_order for chi in self.generators), default=2)

    def group_values(self, points: np.ndarray) -> np.ndarray:
        """g(x) at every point, shape (P, k, k) in the matrix / block embedding."""
        points = np.atleast_2d(points)
        size = self.space.shape[0]
        values = np.broadcast_to(np.eye(size), (len(points), size, size)).copy()
        for chi in self.generators:
            chi_vals = chi.values(points)[:, 0]
            values = values @ np.array([matrix_exp(v) for v in chi_vals])
        return values

    def _require_space(self, space: ValueSpace) -> None:
        if space != self.space:
            raise SpaceMismatchError(f"gauge map in {self.space} cannot act on {space}")

    def adjoint_inverse(self, form: ValuedForm) -> ValuedForm:
        """Ad_{g^-1} applied pointwise to an algebra-valued form of any degree."""
        self._require_space(form.space)
        if not self.generators:
            return form
        generators = self.generators

        def rule(points, order):
            jet = form.rule(points, order)
            for chi in generators:
                jet = _ad_series(chi.rule(points, order), jet, order, shift=0)
            return jet

        return ValuedForm(
            form.chart,
            form.degree,
            form.space,
            rule,
            min(form.max_order, self.max_order),
            f"Ad(g^-1){form.label}",
        )


def curvature(potential: GaugePotential) -> ValuedForm:
    """F = dA + 1/2 [A ^ A]."""
    a = potential.form
    return ext_d(a) + wedge_bracket(a, a).scale(0.5)


def maurer_cartan(g: GaugeMap) -> GaugePotential:
    """
    Pull-back g^-1 dg of the left Maurer-Cartan form.

    Each factor contributes sum_k (-ad chi)^k d chi / (k+1)!, and factors fold as
    lambda_{gh} = Ad_{h^-1} lambda_g + lambda_h.
    """
    if not g.generators:
        return GaugePotential(ValuedForm.zero(g.chart, 1, g.space))
    generators = g.generators

    def rule(points, order):
        result = None
        for chi in generators:
            chi_jet = chi.rule(points, order + 1)
            d_chi = Jet(
                chi_jet.grad[:, :, 0],
                chi_jet.hess[:, :, :, 0] if order >= 1 else None,
            )
            chi_jet = chi_jet.truncate(order)
            piece = _ad_series(chi_jet, d_chi, order, shift=1)
            if result is None:
                result = piece
            else:
                result = _ad_series(chi_jet, result, order, shift=0) + piece
        return result

    form = ValuedForm(g.chart, 1, g.space, rule, g.max_order - 1, "lambda_g")
    return GaugePotential(form)


def gauge_transform(potential: GaugePotential, g: GaugeMap) -> GaugePotential:
    """A^g = Ad_{g^-1} A + g^-1 dg."""
    if potential.chart != g.chart:
        raise SpaceMismatchError("potential and gauge map live on different charts")
    transformed = g.adjoint_inverse(potential.form) + maurer_cartan(g).form
    transformed.label = f"{potential.form.label}^g"
    return GaugePotential(transformed)


def section_pullback(g: GaugeMap, potential: GaugePotential) -> GaugePotential:
    """Potential of the same connection along the section u0 . g."""
    return gauge_transform(potential, g)


def _require_three_forms(potential: GaugePotential) -> None:
    if potential.chart.n < 3:
        raise DegreeOverflowError(
            f"Chern-Simons forms need a chart of dimension >= 3, got {potential.chart.n}"
        )


def cs_form(
    potential: GaugePotential, pk: PairingKind, sig: Optional[Signature] = None
) -> ValuedForm:
    """<A ^ (dA + 1/3 [A ^ A])>."""
    _require_three_forms(potential)
    a = potential.form
    return wedge_pair(pk, a, ext_d(a), sig) + wedge_pair(pk, a, wedge_bracket(a, a), sig).scale(
        1.0 / 3.0
    )


def transgression_form(
    potential: GaugePotential, pk: PairingKind, sig: Optional[Signature] = None
) -> ValuedForm:
    """Tq(A, F) = <A ^ F> - 1/6 <A ^ [A ^ A]>."""
    _require_three_forms(potential)
    a = potential.form
    return wedge_pair(pk, a, curvature(potential), sig) - wedge_pair(
        pk, a, wedge_bracket(a, a), sig
    ).scale(1.0 / 6.0)


def chern_weil_form(
    potential: GaugePotential, pk: PairingKind, sig: Optional[Signature] = None
) -> ValuedForm:
    """q(F) = <F ^ F>, a 4-form."""
    if potential.chart.n < 4:
        raise DegreeOverflowError(
            f"the Chern-Weil form needs a chart of dimension >= 4, got {potential.chart.n}"
        )
    f = curvature(potential)
    return wedge_pair(pk, f, f, sig)


def wzw_form(g: GaugeMap, pk: PairingKind, sig: Optional[Signature] = None) -> ValuedForm:
    """1/6 <lambda_g ^ [lambda_g ^ lambda_g]>."""
    if g.chart.n < 3:
        raise DegreeOverflowError(f"the WZW form needs a chart of dimension >= 3, got {g.chart.n}")
    lam = maurer_cartan(g).form
    return wedge_pair(pk, lam, wedge_bracket(lam, lam), sig).scale(1.0 / 6.0)


def boundary_term(
    potential: GaugePotential, g: GaugeMap, pk: PairingKind, sig: Optional[Signature] = None
) -> ValuedForm:
    """<Ad_{g^-1} A ^ lambda_g>, the 2-form whose d separates cs(A^g) from cs(A)."""
    return wedge_pair(pk, g.adjoint_inverse(potential.form), maurer_cartan(g).form, sig)


def gauge_defect(
    potential: GaugePotential, g: GaugeMap, pk: PairingKind, sig: Optional[Signature] = None
) -> ValuedForm:
    """
    cs(A^g) - cs(A) - d<Ad_{g^-1} A ^ lambda_g> + wzw(g).

    Vanishes identically when the pairing is invariant under the values of g.
    """
    transformed = gauge_transform(potential, g)
    return (
        cs_form(transformed, pk, sig)
        - cs_form(potential, pk, sig)
        - ext_d(boundary_term(potential, g, pk, sig))
        + wzw_form(g, pk, sig)
    )


def bianchi_residual(potential: GaugePotential) -> ValuedForm:
    """dF + [A ^ F]."""
    f = curvature(potential)
    return ext_d(f) + wedge_bracket(potential.form, f)


def structure_residual(g: GaugeMap) -> ValuedForm:
    """d lambda + 1/2 [lambda ^ lambda] for the Maurer-Cartan potential of g."""
    return curvature(maurer_cartan(g))


# ---------------------------------------------------------------------------
# random inputs
# ---------------------------------------------------------------------------

def invariant_basis(space: ValueSpace, sig: Signature) -> np.ndarray:
    """
    Basis of the subalgebra on which the pairing is ad-invariant: k inside gl(m),
    k + R^3 inside a(3).
    """
    k_elements = lorentz_basis(sig)
    if space.kind is ValueKind.GL:
        return k_elements
    m = space.m
    blocks = []
    for element in k_elements:
        block = np.zeros((m + 1, m + 1))
        block[:m, :m] = element
        blocks.append(block)
    for axis in range(m):
        block = np.zeros((m + 1, m + 1))
        block[axis, m] = 1.0
        blocks.append(block)
    return np.array(blocks)


def random_potential(
    rng: np.random.Generator,
    chart: Chart,
    space: ValueSpace,
    sig: Optional[Signature] = None,
    restricted: bool = False,
    max_frequency: int = 2,
    amplitude: float = 0.3,
) -> GaugePotential:
    sig = sig or Signature()
    basis = invariant_basis(space, sig) if restricted else None
    form = random_form(
        rng, chart, 1, space, basis, max_frequency, amplitude, label="A"
    )
    return GaugePotential(form)


def random_gauge_map(
    rng: np.random.Generator,
    chart: Chart,
    space: ValueSpace,
    sig: Optional[Signature] = None,
    restricted: bool = False,
    factors: int = 1,
    max_frequency: int = 2,
    amplitude: float = 0.3,
) -> GaugeMap:
    sig = sig or Signature()
    basis = invariant_basis(space, sig) if restricted else None
    generators = tuple(
        random_form(rng, chart, 0, space, basis, max_frequency, amplitude, label=f"chi{i}")
        for i in range(factors)
    )
    return GaugeMap(chart, space, generators)
