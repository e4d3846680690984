"""
Lattice layer: sections sampled on a periodic 3-grid, discrete actions,
Euler-Lagrange residuals and a residual-descent solver.

Configurations store the coframe as theta[..., i, mu] and the connection as
coefficients omega_k[..., mu, c] on the basis J_c = iso_k_r3(e_c), so every
configuration is Lorentz-valued by construction.
"""
import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Dict, List, Optional, Tuple

import numpy as np

from csgrav.config import EPS_DET, SOLVER_TOL
from csgrav.errors import LatticeError, SingularMatrixError
from csgrav.services.algebra import Signature, commutator, iso_k_r3_array, iso_r3_k_array, k_basis
from csgrav.services.gauge import maurer_cartan, random_gauge_map
from csgrav.services.gravity import (
    CoframeField,
    GravSection,
    SpinConnection,
    cs_of_section,
    palatini_form,
)
from csgrav.services.jetfields import (
    Jet,
    QuadratureGrid,
    ValueSpace,
    ValuedForm,
    integrate_top,
    pairwise_sum,
)

logger = logging.getLogger(__name__)

PAIRS = ((0, 1), (0, 2), (1, 2))

# Armijo sufficient-decrease constant and step bounds for the descent solver
ARMIJO_C = 1e-4
STEP_FLOOR = 1e-20
BB_MIN, BB_MAX = 1e-10, 1e10


class ActionKind(Enum):
    PALATINI = "palatini"
    CS = "cs"


def difference(values: np.ndarray, axis: int, spacing: float) -> np.ndarray:
    """Central difference with periodic wrap along one lattice axis."""
    return (np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)) / (2.0 * spacing)


def prolong_field(values: np.ndarray, grid: QuadratureGrid) -> Tuple[np.ndarray, np.ndarray]:
    """
    Discrete 1-jet of a lattice field.

    Returns:
        (values, diffs) where diffs[..., nu, *rest] is the central difference
        along axis nu, placed right after the site axes.
    """
    n = grid.chart.n
    if any(count < 3 for count in grid.counts):
        raise LatticeError(f"central differences need at least 3 sites per axis, got {grid.counts}")
    if values.shape[:n] != grid.counts:
        raise LatticeError(f"field of shape {values.shape} does not sit on grid {grid.counts}")
    diffs = np.stack(
        [difference(values, axis, h) for axis, h in enumerate(grid.spacing)], axis=n
    )
    return values, diffs


@lru_cache(maxsize=None)
def _k_structure(sig: Signature) -> Tuple[np.ndarray, np.ndarray]:
    """(J, C) with J[a] = iso_k_r3(e_a) and [J_a, J_b] = C[a, b, c] J_c."""
    basis = np.array(k_basis(sig))
    brackets = commutator(basis[:, None], basis[None, :])
    structure = iso_r3_k_array(brackets, sig)
    basis.setflags(write=False)
    structure.setflags(write=False)
    return basis, structure


# ---------------------------------------------------------------------------
# configurations
# ---------------------------------------------------------------------------

@dataclass
class Perturbation:
    d_theta: np.ndarray
    d_omega_k: np.ndarray

    def dot(self, other: "Perturbation") -> float:
        return float(np.sum(self.d_theta * other.d_theta) + np.sum(self.d_omega_k * other.d_omega_k))

    def norm(self) -> float:
        return float(np.sqrt(self.dot(self)))

    def scale(self, factor: float) -> "Perturbation":
        return Perturbation(factor * self.d_theta, factor * self.d_omega_k)

    def __sub__(self, other: "Perturbation") -> "Perturbation":
        return Perturbation(self.d_theta - other.d_theta, self.d_omega_k - other.d_omega_k)

    @classmethod
    def random_unit(cls, rng: np.random.Generator, like: "LatticeConfig") -> "Perturbation":
        pert = cls(
            rng.standard_normal(like.theta.shape), rng.standard_normal(like.omega_k.shape)
        )
        return pert.scale(1.0 / pert.norm())


@dataclass
class LatticeConfig:
    grid: QuadratureGrid
    theta: np.ndarray
    omega_k: np.ndarray

    def __post_init__(self):
        if self.grid.chart.n != 3:
            raise LatticeError(f"lattice configurations live on 3-grids, got n = {self.grid.chart.n}")
        site_shape = self.grid.counts
        self.theta = np.asarray(self.theta, dtype=float)
        self.omega_k = np.asarray(self.omega_k, dtype=float)
        if self.theta.shape != site_shape + (3, 3) or self.omega_k.shape != site_shape + (3, 3):
            raise LatticeError(
                f"expected per-site 3x3 arrays on grid {site_shape}, got "
                f"{self.theta.shape} and {self.omega_k.shape}"
            )

    # -- generators --------------------------------------------------------

    @classmethod
    def flat(cls, grid: QuadratureGrid, coframe: Optional[np.ndarray] = None) -> "LatticeConfig":
        """Constant coframe (identity by default) and zero connection."""
        coframe = np.eye(3) if coframe is None else np.asarray(coframe, dtype=float)
        theta = np.broadcast_to(coframe, grid.counts + (3, 3)).copy()
        return cls(grid, theta, np.zeros(grid.counts + (3, 3)))

    @classmethod
    def perturbed_flat(
        cls, grid: QuadratureGrid, rng: np.random.Generator, magnitude: float
    ) -> "LatticeConfig":
        flat = cls.flat(grid)
        theta = flat.theta + magnitude * rng.uniform(-1.0, 1.0, flat.theta.shape)
        omega_k = magnitude * rng.uniform(-1.0, 1.0, flat.omega_k.shape)
        return cls(grid, theta, omega_k)

    @classmethod
    def from_section(cls, section: GravSection, grid: QuadratureGrid, sig: Signature) -> "LatticeConfig":
        """Sample an analytic section at the grid points (the p-part of omega is dropped)."""
        points = grid.points()
        theta = np.swapaxes(section.theta.form.values(points), -1, -2)
        omega_k = iso_r3_k_array(section.omega.form.values(points), sig)
        return cls(grid, theta.reshape(grid.counts + (3, 3)), omega_k.reshape(grid.counts + (3, 3)))

    @classmethod
    def gauge_rotated_flat(
        cls,
        grid: QuadratureGrid,
        rng: np.random.Generator,
        sig: Signature,
        max_frequency: int = 1,
        amplitude: float = 0.3,
    ) -> "LatticeConfig":
        """
        Flat section transformed by a Lorentz-valued gauge map g:
        theta = g^-1, omega = g^-1 dg, sampled exactly at the sites.
        """
        g = random_gauge_map(
            rng, grid.chart, ValueSpace.gl(3), sig, restricted=True,
            max_frequency=max_frequency, amplitude=amplitude,
        )
        points = grid.points()
        theta = np.linalg.inv(g.group_values(points))
        omega = maurer_cartan(g).form.values(points)
        omega_k = iso_r3_k_array(omega, sig)
        return cls(grid, theta.reshape(grid.counts + (3, 3)), omega_k.reshape(grid.counts + (3, 3)))

    # -- arithmetic ---------------------------------------------------------

    def shifted(self, pert: Perturbation, t: float) -> "LatticeConfig":
        return LatticeConfig(self.grid, self.theta + t * pert.d_theta, self.omega_k + t * pert.d_omega_k)

    def as_perturbation(self) -> Perturbation:
        return Perturbation(self.theta.copy(), self.omega_k.copy())

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.grid.spacing))

    def min_abs_det(self) -> float:
        return float(np.min(np.abs(np.linalg.det(self.theta))))

    def omega_matrices(self, sig: Signature) -> np.ndarray:
        """omega[..., mu, a, b] from the k-coefficients."""
        return iso_k_r3_array(self.omega_k, sig)

    # -- analytic view --------------------------------------------------------

    def _lattice_form(self, values: np.ndarray, space: ValueSpace, label: str) -> ValuedForm:
        """1-form whose coefficients are site values with central-difference gradients."""
        grid = self.grid
        site_values, diffs = prolong_field(values, grid)
        flat_values = site_values.reshape((grid.size,) + values.shape[3:])
        flat_diffs = diffs.reshape((grid.size,) + diffs.shape[3:])
        lower = np.array(grid.chart.lower)
        spacing = grid.spacing
        counts = np.array(grid.counts)

        def rule(points, order):
            rel = (points - lower) / spacing
            nearest = np.rint(rel)
            if np.max(np.abs(rel - nearest), initial=0.0) > 1e-6:
                raise LatticeError("lattice forms can only be evaluated at grid points")
            sites = np.mod(nearest.astype(int), counts)
            index = np.ravel_multi_index(tuple(sites.T), grid.counts)
            return Jet(flat_values[index], flat_diffs[index] if order >= 1 else None)

        return ValuedForm(grid.chart, 1, space, rule, 1, label)

    def as_section(self, sig: Signature) -> GravSection:
        """The configuration as a section whose derivatives are lattice differences."""
        theta = self._lattice_form(np.swapaxes(self.theta, -1, -2), ValueSpace.vec(3), "theta_h")
        omega = self._lattice_form(self.omega_matrices(sig), ValueSpace.gl(3), "omega_h")
        return GravSection(CoframeField(theta), SpinConnection(omega))


def prolong(cfg: LatticeConfig) -> Dict[str, Tuple[np.ndarray, np.ndarray]]:
    """Discrete 1-jets of the coframe and of the connection coefficients."""
    return {
        "theta": prolong_field(cfg.theta, cfg.grid),
        "omega_k": prolong_field(cfg.omega_k, cfg.grid),
    }


# ---------------------------------------------------------------------------
# actions and residuals
# ---------------------------------------------------------------------------

def action_density(cfg: LatticeConfig, which: ActionKind, sig: Signature) -> ValuedForm:
    section = cfg.as_section(sig)
    if which is ActionKind.PALATINI:
        return palatini_form(section, sig)
    return cs_of_section(section, sig)


def discrete_action(
    cfg: LatticeConfig, which: ActionKind, sig: Signature, workers: int = 1
) -> float:
    """Sum of the Lagrangian's top coefficient over the sites times the cell volume."""
    if cfg.min_abs_det() <= EPS_DET:
        raise SingularMatrixError("lattice coframe is singular at some site")
    return integrate_top(action_density(cfg, which, sig), cfg.grid, workers)


@dataclass
class ElResidual:
    curv: np.ndarray
    tors: np.ndarray
    curv_sup: float
    tors_sup: float
    curv_l2: float
    tors_l2: float

    @property
    def objective(self) -> float:
        return self.curv_l2 ** 2 + self.tors_l2 ** 2


def _residual_fields(cfg: LatticeConfig, sig: Signature):
    basis, structure = _k_structure(sig)
    spacing = cfg.grid.spacing
    k = cfg.omega_k
    theta = cfg.theta
    d_k = [difference(k, axis, spacing[axis]) for axis in range(3)]
    d_theta = [difference(theta, axis, spacing[axis]) for axis in range(3)]
    omega = np.einsum("...mc,cij->...mij", k, basis)

    curv = np.empty(cfg.grid.counts + (3, 3))
    tors = np.empty(cfg.grid.counts + (3, 3))
    for slot, (nu, rho) in enumerate(PAIRS):
        curv[..., slot, :] = (
            d_k[nu][..., rho, :]
            - d_k[rho][..., nu, :]
            + np.einsum("abc,...a,...b->...c", structure, k[..., nu, :], k[..., rho, :])
        )
        tors[..., slot, :] = (
            d_theta[nu][..., :, rho]
            - d_theta[rho][..., :, nu]
            + np.einsum("...ij,...j->...i", omega[..., nu, :, :], theta[..., :, rho])
            - np.einsum("...ij,...j->...i", omega[..., rho, :, :], theta[..., :, nu])
        )
    return curv, tors, omega


def el_residual(cfg: LatticeConfig, sig: Signature) -> ElResidual:
    """
    Discrete curvature f^c_{nu rho} (k-coefficients) and torsion t^i_{nu rho}
    for the pairs (1,2), (1,3), (2,3).
    """
    curv, tors, _ = _residual_fields(cfg, sig)
    volume = cfg.cell_volume
    return ElResidual(
        curv,
        tors,
        float(np.max(np.abs(curv))),
        float(np.max(np.abs(tors))),
        float(np.sqrt(volume * pairwise_sum(curv ** 2))),
        float(np.sqrt(volume * pairwise_sum(tors ** 2))),
    )


def objective(cfg: LatticeConfig, sig: Signature) -> float:
    """R = |curv|^2_L2 + |tors|^2_L2; +inf on a degenerate coframe."""
    if cfg.min_abs_det() <= EPS_DET:
        return float("inf")
    curv, tors, _ = _residual_fields(cfg, sig)
    return cfg.cell_volume * (pairwise_sum(curv ** 2) + pairwise_sum(tors ** 2))


def objective_gradient(cfg: LatticeConfig, sig: Signature) -> Tuple[float, Perturbation]:
    """R and its exact gradient (the adjoint of a central difference is minus itself)."""
    basis, structure = _k_structure(sig)
    spacing = cfg.grid.spacing
    curv, tors, omega = _residual_fields(cfg, sig)
    volume = cfg.cell_volume
    value = volume * (pairwise_sum(curv ** 2) + pairwise_sum(tors ** 2))

    k = cfg.omega_k
    theta = cfg.theta
    grad_k = np.zeros_like(k)
    grad_theta = np.zeros_like(theta)
    for slot, (nu, rho) in enumerate(PAIRS):
        f_bar = 2.0 * volume * curv[..., slot, :]
        t_bar = 2.0 * volume * tors[..., slot, :]

        grad_k[..., rho, :] -= difference(f_bar, nu, spacing[nu])
        grad_k[..., nu, :] += difference(f_bar, rho, spacing[rho])
        grad_k[..., nu, :] += np.einsum("abc,...c,...b->...a", structure, f_bar, k[..., rho, :])
        grad_k[..., rho, :] += np.einsum("abc,...c,...a->...b", structure, f_bar, k[..., nu, :])

        grad_theta[..., :, rho] += -difference(t_bar, nu, spacing[nu]) + np.einsum(
            "...ji,...j->...i", omega[..., nu, :, :], t_bar
        )
        grad_theta[..., :, nu] += difference(t_bar, rho, spacing[rho]) - np.einsum(
            "...ji,...j->...i", omega[..., rho, :, :], t_bar
        )
        grad_k[..., nu, :] += np.einsum("...i,aij,...j->...a", t_bar, basis, theta[..., :, rho])
        grad_k[..., rho, :] -= np.einsum("...i,aij,...j->...a", t_bar, basis, theta[..., :, nu])

    return value, Perturbation(grad_theta, grad_k)


# ---------------------------------------------------------------------------
# directional derivatives
# ---------------------------------------------------------------------------

def directional_derivative(
    cfg: LatticeConfig, pert: Perturbation, which: ActionKind, sig: Signature, eps: float
) -> float:
    """(S(cfg + eps pert) - S(cfg - eps pert)) / (2 eps)."""
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    forward = discrete_action(cfg.shifted(pert, eps), which, sig)
    backward = discrete_action(cfg.shifted(pert, -eps), which, sig)
    return (forward - backward) / (2.0 * eps)


@dataclass
class StationarityRecord:
    dd_palatini: float
    dd_cs: float
    difference: float


@dataclass
class StationarityReport:
    max_abs_palatini: float
    max_abs_cs: float
    max_abs_difference: float
    action_scale: float
    ratio: float
    directions: List[StationarityRecord] = field(default_factory=list)


def _richardson(cfg, pert, which, sig, eps) -> float:
    """Richardson-extrapolated central difference from eps and 2 eps."""
    small = directional_derivative(cfg, pert, which, sig, eps)
    large = directional_derivative(cfg, pert, which, sig, 2.0 * eps)
    return (4.0 * small - large) / 3.0


def stationarity_report(
    cfg: LatticeConfig,
    n_dirs: int,
    sig: Signature,
    rng: np.random.Generator,
    eps: Optional[float] = None,
    ratio: float = -2.0,
) -> StationarityReport:
    """
    Directional derivatives of both actions along n_dirs random unit directions,
    with their difference dd_cs - ratio * dd_palatini.
    """
    density = action_density(cfg, ActionKind.PALATINI, sig)
    scale = max(1.0, float(np.sum(np.abs(density.values(cfg.grid.points())))) * cfg.cell_volume)
    eps = 1e-5 * scale if eps is None else eps
    records = []
    for _ in range(n_dirs):
        pert = Perturbation.random_unit(rng, cfg)
        dd_pg = _richardson(cfg, pert, ActionKind.PALATINI, sig, eps)
        dd_cs = _richardson(cfg, pert, ActionKind.CS, sig, eps)
        records.append(StationarityRecord(dd_pg, dd_cs, dd_cs - ratio * dd_pg))
    return StationarityReport(
        max((abs(r.dd_palatini) for r in records), default=0.0),
        max((abs(r.dd_cs) for r in records), default=0.0),
        max((abs(r.difference) for r in records), default=0.0),
        scale,
        ratio,
        records,
    )


# ---------------------------------------------------------------------------
# solver
# ---------------------------------------------------------------------------

@dataclass
class SolveReport:
    iterations: int = 0
    objective_history: List[float] = field(default_factory=list)
    step_history: List[float] = field(default_factory=list)
    action_pg_history: List[float] = field(default_factory=list)
    action_cs_history: List[float] = field(default_factory=list)
    curvature_history: List[float] = field(default_factory=list)
    torsion_history: List[float] = field(default_factory=list)
    final_curvature_sup: float = 0.0
    final_torsion_sup: float = 0.0
    converged: bool = False
    stalled: bool = False
    wall_time: float = 0.0

    @property
    def monotone(self) -> bool:
        history = self.objective_history
        return all(b <= a for a, b in zip(history, history[1:]))

    @property
    def reduction(self) -> float:
        if len(self.objective_history) < 2 or self.objective_history[-1] == 0.0:
            return float("inf") if self.objective_history else 1.0
        return self.objective_history[0] / self.objective_history[-1]


def _record(report: SolveReport, cfg: LatticeConfig, sig: Signature, value: float, step: float,
            track_actions: bool) -> None:
    residual = el_residual(cfg, sig)
    report.objective_history.append(value)
    report.step_history.append(step)
    report.curvature_history.append(residual.curv_l2)
    report.torsion_history.append(residual.tors_l2)
    report.final_curvature_sup = residual.curv_sup
    report.final_torsion_sup = residual.tors_sup
    if track_actions:
        report.action_pg_history.append(discrete_action(cfg, ActionKind.PALATINI, sig))
        report.action_cs_history.append(discrete_action(cfg, ActionKind.CS, sig))


def descend(
    cfg0: LatticeConfig,
    sig: Signature,
    max_iters: int = 500,
    step0: float = 1e-2,
    tol: float = SOLVER_TOL,
    track_actions: bool = True,
) -> Tuple[LatticeConfig, SolveReport]:
    """
    Gradient descent on R with Barzilai-Borwein initial steps and Armijo
    backtracking. Accepted steps never increase R; a step underflow ends the
    run with stalled=True instead of raising.
    """
    started = time.perf_counter()
    report = SolveReport()
    cfg = cfg0
    value, grad = objective_gradient(cfg, sig)
    if not np.isfinite(value) or cfg.min_abs_det() <= EPS_DET:
        raise SingularMatrixError("descent needs an invertible starting coframe")
    _record(report, cfg, sig, value, 0.0, track_actions)
    step = step0
    previous: Optional[Tuple[LatticeConfig, Perturbation]] = None

    while value >= tol and report.iterations < max_iters:
        if previous is not None:
            s = cfg.as_perturbation() - previous[0].as_perturbation()
            y = grad - previous[1]
            curvature = s.dot(y)
            candidate = s.dot(s) / curvature if curvature > 0.0 else 0.0
            step = candidate if BB_MIN <= candidate <= BB_MAX else 2.0 * step
        slope = grad.dot(grad)
        t = step
        while True:
            trial = cfg.shifted(grad, -t)
            trial_value = objective(trial, sig)
            if trial_value <= value - ARMIJO_C * t * slope:
                break
            t *= 0.5
            if t < STEP_FLOOR:
                break
        if t < STEP_FLOOR:
            report.stalled = True
            logger.warning(
                "Line search stalled at iteration %d (R = %.3e)", report.iterations, value
            )
            break
        previous = (cfg, grad)
        cfg = trial
        value, grad = objective_gradient(cfg, sig)
        step = t
        report.iterations += 1
        _record(report, cfg, sig, value, t, track_actions)
        logger.debug("iter %d: R = %.6e, step = %.3e", report.iterations, value, t)

    report.converged = value < tol
    report.wall_time = time.perf_counter() - started
    logger.info(
        "Descent finished after %d iterations: R = %.3e (converged=%s, stalled=%s)",
        report.iterations, value, report.converged, report.stalled,
    )
    return cfg, report
