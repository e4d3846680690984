"""
Differential forms on coordinate charts with 2-jet coefficients.

A form of degree p stores one coefficient per strictly increasing multi-index
of length p. Evaluating a form at P points yields a Jet whose arrays carry the
payload (C, *S): C multi-index components, S the value-space shape.
"""
import itertools
import logging
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from csgrav.config import EPS_DET, EVAL_CHUNK
from csgrav.errors import (
    ChartKindError,
    DegreeOverflowError,
    DimensionMismatchError,
    JetExhaustedError,
    SingularMatrixError,
    SpaceMismatchError,
)
from csgrav.services.algebra import PairingKind, Signature, pairing_matrix

logger = logging.getLogger(__name__)

MAX_JET_ORDER = 2


# ---------------------------------------------------------------------------
# charts and grids
# ---------------------------------------------------------------------------

class ChartKind(Enum):
    PERIODIC = "periodic"
    BOX = "box"


@dataclass(frozen=True)
class Chart:
    """Axis-aligned box [lower, upper) in R^n; PERIODIC identifies opposite faces."""

    n: int
    kind: ChartKind
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]

    def __post_init__(self):
        lower = tuple(float(v) for v in self.lower)
        upper = tuple(float(v) for v in self.upper)
        if self.n < 1:
            raise DimensionMismatchError(f"chart dimension must be >= 1, got {self.n}")
        if len(lower) != self.n or len(upper) != self.n:
            raise DimensionMismatchError(
                f"chart of dimension {self.n} needs {self.n} lower and upper bounds"
            )
        if any(hi - lo <= 0.0 for lo, hi in zip(lower, upper)):
            raise ValueError("chart extents must be strictly positive")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def periodic(cls, periods: Sequence[float]) -> "Chart":
        periods = tuple(periods)
        return cls(len(periods), ChartKind.PERIODIC, (0.0,) * len(periods), periods)

    @classmethod
    def box(cls, lower: Sequence[float], upper: Sequence[float]) -> "Chart":
        return cls(len(tuple(lower)), ChartKind.BOX, tuple(lower), tuple(upper))

    @property
    def lengths(self) -> np.ndarray:
        return np.array(self.upper) - np.array(self.lower)

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def random_points(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return np.array(self.lower) + self.lengths * rng.random((count, self.n))

    def sample_points(self, per_axis: int = 5) -> np.ndarray:
        """Cell-centred lattice of per_axis^n points, usable on any chart kind."""
        axes = [
            lo + length * (np.arange(per_axis) + 0.5) / per_axis
            for lo, length in zip(self.lower, self.lengths)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([axis.ravel() for axis in mesh], axis=-1)

    def require_periodic(self, what: str) -> None:
        if self.kind is not ChartKind.PERIODIC:
            raise ChartKindError(f"{what} needs a PERIODIC chart, got {self.kind.value}")


@dataclass(frozen=True)
class QuadratureGrid:
    """Uniform grid with counts[i] samples along axis i of a periodic chart."""

    chart: Chart
    counts: Tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        self.chart.require_periodic("a quadrature grid")
        if len(counts) != self.chart.n:
            raise DimensionMismatchError(
                f"grid needs {self.chart.n} counts, got {len(counts)}"
            )
        if any(c < 2 for c in counts):
            raise ValueError(f"grid counts must be >= 2, got {counts}")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def for_frequency(cls, chart: Chart, max_frequency: int) -> "QuadratureGrid":
        """Default grid 4K+1 per axis, exact for cubic densities of bandwidth K."""
        return cls(chart, (4 * max_frequency + 1,) * chart.n)

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    @property
    def spacing(self) -> np.ndarray:
        return self.chart.lengths / np.array(self.counts)

    def axes(self) -> List[np.ndarray]:
        return [
            lo + length * np.arange(count) / count
            for lo, length, count in zip(self.chart.lower, self.chart.lengths, self.counts)
        ]

    def points(self) -> np.ndarray:
        """All grid points, shape (size, n), in C (row-major) order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([axis.ravel() for axis in mesh], axis=-1)


# ---------------------------------------------------------------------------
# jets
# ---------------------------------------------------------------------------

@dataclass
class Jet:
    """
    Value and derivatives of a payload at P points.

    val has shape (P, *payload), grad (P, n, *payload), hess (P, n, n, *payload).
    Missing derivatives are None.
    """

    val: np.ndarray
    grad: Optional[np.ndarray] = None
    hess: Optional[np.ndarray] = None

    @property
    def order(self) -> int:
        if self.grad is None:
            return 0
        return 1 if self.hess is None else 2

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise JetExhaustedError(f"jet of order {self.order} cannot supply order {order}")
        return Jet(
            self.val,
            self.grad if order >= 1 else None,
            self.hess if order >= 2 else None,
        )

    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "Jet":
        """Apply a payload-linear map to every slot."""
        return Jet(
            fn(self.val),
            None if self.grad is None else fn(self.grad),
            None if self.hess is None else fn(self.hess),
        )

    def _combine(self, other: "Jet", fn) -> "Jet":
        order = min(self.order, other.order)
        grad = fn(self.grad, other.grad) if order >= 1 else None
        hess = fn(self.hess, other.hess) if order >= 2 else None
        return Jet(fn(self.val, other.val), grad, hess)

    def __add__(self, other: "Jet") -> "Jet":
        return self._combine(other, np.add)

    def __sub__(self, other: "Jet") -> "Jet":
        return self._combine(other, np.subtract)

    def __neg__(self) -> "Jet":
        return self.map(np.negative)

    def scale(self, factor: float) -> "Jet":
        return self.map(lambda arr: factor * arr)


def jet_product(
    op: Callable[[np.ndarray, np.ndarray], np.ndarray], x: Jet, y: Jet, order: int
) -> Jet:
    """
    Jet of op(x, y) for a bilinear op by the product rule.

    op must act on the trailing payload axes and broadcast over leading ones.
    """
    val = op(x.val, y.val)
    grad = hess = None
    if order >= 1:
        grad = op(x.grad, y.val[:, None]) + op(x.val[:, None], y.grad)
    if order >= 2:
        hess = (
            op(x.hess, y.val[:, None, None])
            + op(x.grad[:, :, None], y.grad[:, None, :])
            + op(x.grad[:, None, :], y.grad[:, :, None])
            + op(x.val[:, None, None], y.hess)
        )
    return Jet(val, grad, hess)


def jet_inverse(mat: Jet, order: int) -> Jet:
    """Jet of the matrix inverse over the trailing (k, k) payload axes."""
    det = np.linalg.det(mat.val)
    if np.any(np.abs(det) <= EPS_DET):
        raise SingularMatrixError(
            f"matrix not invertible (min |det| = {float(np.min(np.abs(det))):.3e})"
        )
    inv = np.linalg.inv(mat.val)
    grad = hess = None
    if order >= 1:
        grad = -inv[:, None] @ mat.grad @ inv[:, None]
    if order >= 2:
        inv2 = inv[:, None, None]
        hess = (
            -grad[:, None, :] @ mat.grad[:, :, None] @ inv2
            - inv2 @ mat.hess @ inv2
            - inv2 @ mat.grad[:, :, None] @ grad[:, None, :]
        )
    return Jet(inv, grad, hess)


# ---------------------------------------------------------------------------
# scalar coefficient fields
# ---------------------------------------------------------------------------

class ScalarField(ABC):
    """A real function on a chart with exact first and second derivatives."""

    @abstractmethod
    def jet(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return value (P,), gradient (P, n) and Hessian (P, n, n)."""

    @abstractmethod
    def check_chart(self, chart: Chart) -> None:
        """Raise ChartKindError if the field is not a valid function on chart."""


@dataclass(frozen=True, eq=False)
class TrigField(ScalarField):
    """f(x) = sum_t a_t cos(2 pi k_t . x / L + phi_t)."""

    wavevectors: np.ndarray
    amplitudes: np.ndarray
    phases: np.ndarray
    periods: np.ndarray

    @property
    def frequencies(self) -> np.ndarray:
        return 2.0 * np.pi * self.wavevectors / self.periods

    def jet(self, points):
        points = np.asarray(points, dtype=float)
        n = points.shape[1]
        count = points.shape[0]
        if self.amplitudes.size == 0:
            return np.zeros(count), np.zeros((count, n)), np.zeros((count, n, n))
        w = self.frequencies
        arg = points @ w.T + self.phases
        cos_a = np.cos(arg) * self.amplitudes
        sin_a = np.sin(arg) * self.amplitudes
        val = cos_a.sum(axis=1)
        grad = -sin_a @ w
        hess = -np.einsum("pt,ti,tj->pij", cos_a, w, w)
        return val, grad, hess

    def check_chart(self, chart):
        chart.require_periodic("a trigonometric field")
        if self.periods.shape != (chart.n,) or not np.allclose(self.periods, chart.lengths):
            raise ChartKindError("trigonometric field periods do not match the chart")


@dataclass(frozen=True, eq=False)
class QuadraticField(ScalarField):
    """f(x) = c + b . x + 1/2 x^T H x."""

    c: float
    b: np.ndarray
    h: np.ndarray

    def jet(self, points):
        points = np.asarray(points, dtype=float)
        sym = 0.5 * (self.h + self.h.T)
        val = self.c + points @ self.b + 0.5 * np.einsum("pi,ij,pj->p", points, sym, points)
        grad = self.b + points @ sym
        hess = np.broadcast_to(sym, (points.shape[0],) + sym.shape).copy()
        return val, grad, hess

    def check_chart(self, chart):
        if self.b.shape != (chart.n,) or self.h.shape != (chart.n, chart.n):
            raise DimensionMismatchError("quadratic field does not match chart dimension")
        if chart.kind is ChartKind.PERIODIC and (np.any(self.b != 0) or np.any(self.h != 0)):
            raise ChartKindError("only constant polynomial fields are periodic")


def make_trig_field(chart: Chart, terms: Sequence[Tuple[Sequence[int], float, float]]) -> TrigField:
    """
    Build a trigonometric field from (wavevector, amplitude, phase) triples.

    Raises:
        ChartKindError: if the chart is not PERIODIC.
    """
    chart.require_periodic("a trigonometric field")
    wavevectors = np.array([list(k) for k, _, _ in terms], dtype=float).reshape(-1, chart.n)
    amplitudes = np.array([a for _, a, _ in terms], dtype=float)
    phases = np.array([phi for _, _, phi in terms], dtype=float)
    return TrigField(wavevectors, amplitudes, phases, chart.lengths)


def make_quadratic_field(chart: Chart, c: float, b=None, h=None) -> QuadraticField:
    b = np.zeros(chart.n) if b is None else np.asarray(b, dtype=float)
    h = np.zeros((chart.n, chart.n)) if h is None else np.asarray(h, dtype=float)
    field = QuadraticField(float(c), b, h)
    field.check_chart(chart)
    return field


def random_trig_field(
    rng: np.random.Generator,
    chart: Chart,
    max_frequency: int = 2,
    amplitude: float = 0.3,
    terms: int = 2,
) -> TrigField:
    wavevectors = rng.integers(-max_frequency, max_frequency + 1, size=(terms, chart.n))
    amplitudes = amplitude * rng.uniform(-1.0, 1.0, size=terms)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=terms)
    return make_trig_field(chart, list(zip(wavevectors, amplitudes, phases)))


# ---------------------------------------------------------------------------
# value spaces and multi-indices
# ---------------------------------------------------------------------------

class ValueKind(Enum):
    SCALAR = "scalar"
    VEC = "vec"
    GL = "gl"
    AFF = "aff"


@dataclass(frozen=True)
class ValueSpace:
    kind: ValueKind
    m: int = 0

    @classmethod
    def scalar(cls) -> "ValueSpace":
        return cls(ValueKind.SCALAR, 0)

    @classmethod
    def vec(cls, m: int) -> "ValueSpace":
        return cls(ValueKind.VEC, m)

    @classmethod
    def gl(cls, m: int) -> "ValueSpace":
        return cls(ValueKind.GL, m)

    @classmethod
    def aff(cls, m: int) -> "ValueSpace":
        return cls(ValueKind.AFF, m)

    @property
    def shape(self) -> Tuple[int, ...]:
        if self.kind is ValueKind.SCALAR:
            return ()
        if self.kind is ValueKind.VEC:
            return (self.m,)
        if self.kind is ValueKind.GL:
            return (self.m, self.m)
        return (self.m + 1, self.m + 1)

    @property
    def rank(self) -> int:
        return len(self.shape)

    @property
    def is_algebra(self) -> bool:
        return self.kind in (ValueKind.GL, ValueKind.AFF)

    def unit_basis(self) -> np.ndarray:
        """Standard basis of the space; AFF skips the (structurally zero) last row."""
        if self.kind is ValueKind.SCALAR:
            return np.ones((1,))
        size = int(np.prod(self.shape))
        units = np.eye(size).reshape((size,) + self.shape)
        if self.kind is ValueKind.AFF:
            units = units[: self.m * (self.m + 1)]
        return units


@lru_cache(maxsize=None)
def multi_indices(n: int, p: int) -> Tuple[Tuple[int, ...], ...]:
    """Strictly increasing multi-indices of length p in range(n), lexicographic."""
    return tuple(itertools.combinations(range(n), p))


def _shuffle_sign(first: Tuple[int, ...], second: Tuple[int, ...]) -> float:
    inversions = sum(1 for i in first for j in second if i > j)
    return -1.0 if inversions % 2 else 1.0


@lru_cache(maxsize=None)
def _wedge_table(n: int, p: int, q: int):
    left = {idx: c for c, idx in enumerate(multi_indices(n, p))}
    right = {idx: c for c, idx in enumerate(multi_indices(n, q))}
    out = multi_indices(n, p + q)
    li, ri, signs, scatter = [], [], [], []
    for k, target in enumerate(out):
        for first in itertools.combinations(target, p):
            second = tuple(i for i in target if i not in first)
            li.append(left[first])
            ri.append(right[second])
            signs.append(_shuffle_sign(first, second))
            scatter.append(k)
    matrix = np.zeros((len(li), len(out)))
    matrix[np.arange(len(li)), scatter] = signs
    return np.array(li, dtype=int), np.array(ri, dtype=int), matrix


@lru_cache(maxsize=None)
def _ext_d_table(n: int, p: int):
    source = {idx: c for c, idx in enumerate(multi_indices(n, p))}
    out = multi_indices(n, p + 1)
    axes, comps, signs, scatter = [], [], [], []
    for k, target in enumerate(out):
        for pos, axis in enumerate(target):
            axes.append(axis)
            comps.append(source[target[:pos] + target[pos + 1:]])
            signs.append(-1.0 if pos % 2 else 1.0)
            scatter.append(k)
    matrix = np.zeros((len(axes), len(out)))
    matrix[np.arange(len(axes)), scatter] = signs
    return np.array(axes, dtype=int), np.array(comps, dtype=int), matrix


def _contract_axis(arr: np.ndarray, axis: int, matrix: np.ndarray) -> np.ndarray:
    """Contract one axis of arr with the rows of matrix, keeping its position."""
    moved = np.moveaxis(arr, axis, -1) @ matrix
    return np.moveaxis(moved, -1, axis)


# ---------------------------------------------------------------------------
# valued forms
# ---------------------------------------------------------------------------

Rule = Callable[[np.ndarray, int], Jet]


@dataclass(frozen=True)
class FormTerm:
    """field(x) * basis dx^index, one summand of a form built from scalar fields."""

    index: Tuple[int, ...]
    basis: np.ndarray
    field: ScalarField


class ValuedForm:
    """
    A p-form on a chart with values in a ValueSpace.

    The coefficients are produced lazily by rule(points, order), which returns a
    Jet of at least the requested order; max_order is the highest order the
    rule can supply.
    """

    def __init__(
        self,
        chart: Chart,
        degree: int,
        space: ValueSpace,
        rule: Rule,
        max_order: int,
        label: str = "",
    ):
        if not 0 <= degree <= chart.n:
            raise DegreeOverflowError(
                f"degree {degree} is outside 0..{chart.n} for this chart"
            )
        if max_order < 0:
            raise JetExhaustedError(f"form '{label}' has no derivatives left to evaluate")
        self.chart = chart
        self.degree = degree
        self.space = space
        self.rule = rule
        self.max_order = min(max_order, MAX_JET_ORDER)
        self.label = label

    def __repr__(self):
        return (
            f"ValuedForm({self.label or 'anonymous'}, degree={self.degree}, "
            f"space={self.space.kind.value}({self.space.m}), n={self.chart.n})"
        )

    @property
    def indices(self) -> Tuple[Tuple[int, ...], ...]:
        return multi_indices(self.chart.n, self.degree)

    @property
    def payload_shape(self) -> Tuple[int, ...]:
        return (len(self.indices),) + self.space.shape

    def evaluate(self, points: np.ndarray, order: int = 0) -> Jet:
        if order > self.max_order:
            raise JetExhaustedError(
                f"form '{self.label}' carries derivatives up to order {self.max_order}, "
                f"requested {order}"
            )
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self.chart.n:
            raise DimensionMismatchError(
                f"points have dimension {points.shape[1]}, chart has {self.chart.n}"
            )
        return self.rule(points, order).truncate(order)

    def values(self, points: np.ndarray) -> np.ndarray:
        """Coefficient values, shape (P, C, *S)."""
        return self.evaluate(points, 0).val

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_terms(
        cls,
        chart: Chart,
        degree: int,
        space: ValueSpace,
        terms: Sequence[FormTerm],
        label: str = "",
    ) -> "ValuedForm":
        positions = {idx: c for c, idx in enumerate(multi_indices(chart.n, degree))}
        placed = []
        for term in terms:
            if term.index not in positions:
                raise DimensionMismatchError(
                    f"multi-index {term.index} is not an increasing index of length {degree}"
                )
            basis = np.asarray(term.basis, dtype=float)
            if basis.shape != space.shape:
                raise SpaceMismatchError(
                    f"basis element has shape {basis.shape}, space needs {space.shape}"
                )
            term.field.check_chart(chart)
            placed.append((positions[term.index], basis, term.field))
        count = len(positions)

        def rule(points: np.ndarray, order: int) -> Jet:
            p, n = points.shape
            val = np.zeros((p, count) + space.shape)
            grad = np.zeros((p, n, count) + space.shape) if order >= 1 else None
            hess = np.zeros((p, n, n, count) + space.shape) if order >= 2 else None
            for comp, basis, field in placed:
                f, df, ddf = field.jet(points)
                val[:, comp] += np.multiply.outer(f, basis)
                if grad is not None:
                    grad[:, :, comp] += np.multiply.outer(df, basis)
                if hess is not None:
                    hess[:, :, :, comp] += np.multiply.outer(ddf, basis)
            return Jet(val, grad, hess)

        return cls(chart, degree, space, rule, MAX_JET_ORDER, label)

    @classmethod
    def constant(
        cls, chart: Chart, degree: int, space: ValueSpace, coeffs: np.ndarray, label: str = ""
    ) -> "ValuedForm":
        count = len(multi_indices(chart.n, degree))
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (count,) + space.shape:
            raise SpaceMismatchError(
                f"constant coefficients need shape {(count,) + space.shape}, got {coeffs.shape}"
            )

        def rule(points: np.ndarray, order: int) -> Jet:
            p, n = points.shape
            val = np.broadcast_to(coeffs, (p,) + coeffs.shape).copy()
            grad = np.zeros((p, n) + coeffs.shape) if order >= 1 else None
            hess = np.zeros((p, n, n) + coeffs.shape) if order >= 2 else None
            return Jet(val, grad, hess)

        return cls(chart, degree, space, rule, MAX_JET_ORDER, label)

    @classmethod
    def zero(cls, chart: Chart, degree: int, space: ValueSpace) -> "ValuedForm":
        count = len(multi_indices(chart.n, degree))
        return cls.constant(chart, degree, space, np.zeros((count,) + space.shape), "zero")

    # -- arithmetic ---------------------------------------------------------

    def _check_compatible(self, other: "ValuedForm") -> None:
        if self.chart != other.chart:
            raise DimensionMismatchError("forms live on different charts")
        if self.degree != other.degree:
            raise DegreeOverflowError(
                f"cannot add forms of degrees {self.degree} and {other.degree}"
            )
        if self.space != other.space:
            raise SpaceMismatchError(f"cannot add {self.space} and {other.space} forms")

    def _binary(self, other: "ValuedForm", combine, label: str) -> "ValuedForm":
        self._check_compatible(other)

        def rule(points, order):
            return combine(self.rule(points, order), other.rule(points, order))

        return ValuedForm(
            self.chart, self.degree, self.space, rule, min(self.max_order, other.max_order), label
        )

    def __add__(self, other: "ValuedForm") -> "ValuedForm":
        return self._binary(other, lambda a, b: a + b, f"({self.label}+{other.label})")

    def __sub__(self, other: "ValuedForm") -> "ValuedForm":
        return self._binary(other, lambda a, b: a - b, f"({self.label}-{other.label})")

    def __neg__(self) -> "ValuedForm":
        return self.scale(-1.0)

    def scale(self, factor: float) -> "ValuedForm":
        return self.map_values(lambda arr: factor * arr, self.space, f"{factor}*{self.label}")

    def map_values(
        self, fn: Callable[[np.ndarray], np.ndarray], space: ValueSpace, label: str = ""
    ) -> "ValuedForm":
        """Apply a linear map to the values; fn acts on the trailing payload axes."""

        def rule(points, order):
            return self.rule(points, order).map(fn)

        return ValuedForm(self.chart, self.degree, space, rule, self.max_order, label)


def random_form(
    rng: np.random.Generator,
    chart: Chart,
    degree: int,
    space: ValueSpace,
    basis: Optional[np.ndarray] = None,
    max_frequency: int = 2,
    amplitude: float = 0.3,
    terms: int = 2,
    label: str = "random",
) -> ValuedForm:
    """Form whose coefficient on every (multi-index, basis element) is a random trig field."""
    basis = space.unit_basis() if basis is None else np.asarray(basis, dtype=float)
    form_terms = [
        FormTerm(index, element, random_trig_field(rng, chart, max_frequency, amplitude, terms))
        for index in multi_indices(chart.n, degree)
        for element in basis
    ]
    return ValuedForm.from_terms(chart, degree, space, form_terms, label)


# ---------------------------------------------------------------------------
# exterior calculus
# ---------------------------------------------------------------------------

def ext_d(alpha: ValuedForm) -> ValuedForm:
    """
    Exterior derivative; the output carries one derivative fewer than the input.

    Raises:
        DegreeOverflowError: if alpha is already a top form.
        JetExhaustedError: if alpha has no derivatives left.
    """
    n, p = alpha.chart.n, alpha.degree
    if p >= n:
        raise DegreeOverflowError(f"d of a {p}-form on an {n}-chart")
    if alpha.max_order < 1:
        raise JetExhaustedError(f"d of '{alpha.label}' needs a derivative it does not carry")
    axes, comps, matrix = _ext_d_table(n, p)
    comp_axis = -(alpha.space.rank + 1)

    def rule(points, order):
        src = alpha.rule(points, order + 1)
        val = _contract_axis(src.grad[:, axes, comps], comp_axis, matrix)
        grad = None
        if order >= 1:
            grad = _contract_axis(src.hess[:, :, axes, comps], comp_axis, matrix)
        return Jet(val, grad)

    return ValuedForm(
        alpha.chart, p + 1, alpha.space, rule, min(alpha.max_order - 1, 1), f"d{alpha.label}"
    )


def wedge(
    op: Callable[[np.ndarray, np.ndarray], np.ndarray],
    alpha: ValuedForm,
    beta: ValuedForm,
    space: ValueSpace,
    label: str = "",
) -> ValuedForm:
    """
    op(alpha ^ beta) for a bilinear op on values, with shuffle signs.

    op receives arrays whose trailing axes are the two value payloads and must
    broadcast over all leading axes; its output has the payload of `space`.
    """
    if alpha.chart != beta.chart:
        raise DimensionMismatchError("forms live on different charts")
    n, p, q = alpha.chart.n, alpha.degree, beta.degree
    if p + q > n:
        raise DegreeOverflowError(f"wedge of degrees {p} and {q} exceeds chart dimension {n}")
    left, right, matrix = _wedge_table(n, p, q)
    left_axis = -(alpha.space.rank + 1)
    right_axis = -(beta.space.rank + 1)
    out_axis = -(space.rank + 1)

    def kernel(x, y):
        gathered = op(np.take(x, left, axis=left_axis), np.take(y, right, axis=right_axis))
        return _contract_axis(gathered, out_axis, matrix)

    def rule(points, order):
        return jet_product(kernel, alpha.rule(points, order), beta.rule(points, order), order)

    max_order = min(alpha.max_order, beta.max_order)
    return ValuedForm(alpha.chart, p + q, space, rule, max_order, label)


def _pairing_op(q_matrix: np.ndarray, rank: int):
    def op(x, y):
        xf = x.reshape(x.shape[: x.ndim - rank] + (-1,))
        yf = y.reshape(y.shape[: y.ndim - rank] + (-1,))
        return np.sum((xf @ q_matrix) * yf, axis=-1)

    return op


def wedge_pair(
    pk: PairingKind, alpha: ValuedForm, beta: ValuedForm, sig: Signature
) -> ValuedForm:
    """Scalar form <alpha ^ beta> for the pairing pk."""
    if alpha.space != beta.space:
        raise SpaceMismatchError(f"cannot pair {alpha.space} with {beta.space}")
    expected = (
        ValueSpace.gl(sig.m) if pk is PairingKind.GL_ETA else ValueSpace.aff(3)
    )
    if alpha.space != expected:
        raise SpaceMismatchError(
            f"pairing {pk.value} needs {expected} values, got {alpha.space}"
        )
    op = _pairing_op(pairing_matrix(pk, sig), alpha.space.rank)
    return wedge(op, alpha, beta, ValueSpace.scalar(), f"<{alpha.label}^{beta.label}>")


def _bracket_op(x, y):
    return x @ y - y @ x


def wedge_bracket(alpha: ValuedForm, beta: ValuedForm) -> ValuedForm:
    """[alpha ^ beta] in gl(m) or a(m) (commutator of the block embedding)."""
    if not alpha.space.is_algebra or alpha.space != beta.space:
        raise SpaceMismatchError(f"cannot bracket {alpha.space} with {beta.space}")
    return wedge(_bracket_op, alpha, beta, alpha.space, f"[{alpha.label}^{beta.label}]")


def _action_op(x, y):
    return (x @ y[..., None])[..., 0]


def wedge_action(omega: ValuedForm, theta: ValuedForm) -> ValuedForm:
    """omega^i_j ^ theta^j for gl(m)-valued omega and R^m-valued theta."""
    if omega.space != ValueSpace.gl(theta.space.m) or theta.space.kind is not ValueKind.VEC:
        raise SpaceMismatchError(f"cannot act with {omega.space} on {theta.space}")
    return wedge(_action_op, omega, theta, theta.space, f"{omega.label}^{theta.label}")


def wedge_scalar(f: ValuedForm, alpha: ValuedForm) -> ValuedForm:
    """Scalar-valued f times alpha (f ^ alpha)."""
    if f.space.kind is not ValueKind.SCALAR:
        raise SpaceMismatchError("left factor must be scalar-valued")
    rank = alpha.space.rank

    def op(x, y):
        return x.reshape(x.shape + (1,) * rank) * y

    return wedge(op, f, alpha, alpha.space, f"{f.label}*{alpha.label}")


# ---------------------------------------------------------------------------
# evaluation and quadrature
# ---------------------------------------------------------------------------

def eval_form(alpha: ValuedForm, x: np.ndarray, vectors: Sequence[np.ndarray]) -> np.ndarray:
    """alpha_x(v_1, ..., v_p) = sum_I alpha_I(x) det(v_a^{I_b})."""
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float)) if len(vectors) else np.zeros(
        (0, alpha.chart.n)
    )
    if vectors.shape != (alpha.degree, alpha.chart.n):
        raise DimensionMismatchError(
            f"a {alpha.degree}-form on an {alpha.chart.n}-chart needs {alpha.degree} "
            f"vectors of length {alpha.chart.n}, got shape {vectors.shape}"
        )
    coeffs = alpha.values(np.asarray(x, dtype=float)[None, :])[0]
    if alpha.degree == 0:
        return coeffs[0]
    dets = np.array([np.linalg.det(vectors[:, list(idx)]) for idx in alpha.indices])
    return np.tensordot(dets, coeffs, axes=(0, 0))


def pairwise_sum(values: np.ndarray) -> float:
    """Pairwise tree summation in index order (reproducible for any chunking)."""
    vals = np.asarray(values, dtype=float).ravel()
    if vals.size == 0:
        return 0.0
    while vals.size > 1:
        if vals.size % 2:
            vals = np.append(vals, 0.0)
        vals = vals[0::2] + vals[1::2]
    return float(vals[0])


def sample_top(alpha: ValuedForm, grid: QuadratureGrid, workers: int = 1) -> np.ndarray:
    """Top coefficient of a scalar n-form at every grid point, in grid order."""
    if alpha.chart != grid.chart:
        raise DimensionMismatchError("form and grid live on different charts")
    grid.chart.require_periodic("integration")
    if alpha.degree != alpha.chart.n or alpha.space.kind is not ValueKind.SCALAR:
        raise DegreeOverflowError(
            f"integration needs a scalar {alpha.chart.n}-form, got {alpha!r}"
        )
    points = grid.points()
    chunks = [points[i: i + EVAL_CHUNK] for i in range(0, len(points), EVAL_CHUNK)]

    def evaluate(chunk):
        return alpha.values(chunk)[:, 0]

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(evaluate, chunks))
    else:
        parts = [evaluate(chunk) for chunk in chunks]
    return np.concatenate(parts)


def integrate_top(alpha: ValuedForm, grid: QuadratureGrid, workers: int = 1) -> float:
    """
    Rectangle-rule integral of a scalar top form over a periodic chart.

    Exact for trigonometric coefficients of per-axis bandwidth below the counts.
    """
    samples = sample_top(alpha, grid, workers)
    return pairwise_sum(samples) * grid.chart.volume / grid.size
