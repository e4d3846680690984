"""
Linear algebra of gl(m), the Lorentz subalgebra k, the transvections p,
the affine algebra a(m) = gl(m) + R^m and the affine group A(m, R).

Index convention: a^j_i is stored at row j, column i (upper index = row).
Affine elements are embedded as (m+1)x(m+1) block matrices [[a, xi], [0, 0]]
(algebra) and [[h, t], [0, 1]] (group).
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import List, Tuple

import numpy as np

from csgrav.config import (
    DEFAULT_SIGNATURE,
    EPS_DET,
    EXP_SCALE_TARGET,
    EXP_TOL,
    SERIES_MAX_TERMS,
)
from csgrav.errors import DimensionMismatchError, SingularMatrixError

logger = logging.getLogger(__name__)


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Signature:
    """The diagonal matrix eta fixing the Lorentz group K and the k + p split."""

    diag: Tuple[int, ...] = DEFAULT_SIGNATURE

    def __post_init__(self):
        entries = tuple(int(v) for v in self.diag)
        if not entries:
            raise ValueError("signature needs at least one entry")
        if any(v not in (-1, 1) for v in entries):
            raise ValueError(f"signature entries must be +1 or -1, got {self.diag}")
        object.__setattr__(self, "diag", entries)

    @property
    def m(self) -> int:
        return len(self.diag)

    @property
    def eta(self) -> np.ndarray:
        return np.diag(np.array(self.diag, dtype=float))

    @property
    def eta_vector(self) -> np.ndarray:
        return np.array(self.diag, dtype=float)

    @property
    def eta_outer(self) -> np.ndarray:
        """eta_r * eta_c for every matrix slot (r, c)."""
        v = self.eta_vector
        return np.outer(v, v)


@dataclass(frozen=True, eq=False)
class GlElt:
    """Element of gl(m, R)."""

    mat: np.ndarray

    def __post_init__(self):
        mat = _frozen(self.mat)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise DimensionMismatchError(f"gl element must be square, got shape {mat.shape}")
        if not np.all(np.isfinite(mat)):
            raise ValueError("gl element has non-finite entries")
        object.__setattr__(self, "mat", mat)

    @property
    def m(self) -> int:
        return self.mat.shape[0]

    @classmethod
    def zero(cls, m: int) -> "GlElt":
        return cls(np.zeros((m, m)))

    @classmethod
    def identity(cls, m: int) -> "GlElt":
        return cls(np.eye(m))

    @classmethod
    def unit(cls, m: int, upper: int, lower: int) -> "GlElt":
        """E^upper_lower with 1-based indices, as printed in formulas."""
        mat = np.zeros((m, m))
        mat[upper - 1, lower - 1] = 1.0
        return cls(mat)

    def __add__(self, other: "GlElt") -> "GlElt":
        return GlElt(self.mat + other.mat)

    def __sub__(self, other: "GlElt") -> "GlElt":
        return GlElt(self.mat - other.mat)

    def scale(self, factor: float) -> "GlElt":
        return GlElt(factor * self.mat)


@dataclass(frozen=True, eq=False)
class AffElt:
    """Element (a, xi) of the affine algebra a(m)."""

    lin: GlElt
    trans: np.ndarray

    def __post_init__(self):
        lin = self.lin if isinstance(self.lin, GlElt) else GlElt(self.lin)
        trans = _frozen(self.trans)
        if trans.shape != (lin.m,):
            raise DimensionMismatchError(
                f"translation part must have shape ({lin.m},), got {trans.shape}"
            )
        if not np.all(np.isfinite(trans)):
            raise ValueError("affine element has non-finite entries")
        object.__setattr__(self, "lin", lin)
        object.__setattr__(self, "trans", trans)

    @property
    def m(self) -> int:
        return self.lin.m

    @classmethod
    def zero(cls, m: int) -> "AffElt":
        return cls(GlElt.zero(m), np.zeros(m))

    def to_block(self) -> np.ndarray:
        block = np.zeros((self.m + 1, self.m + 1))
        block[: self.m, : self.m] = self.lin.mat
        block[: self.m, self.m] = self.trans
        return block

    @classmethod
    def from_block(cls, block: np.ndarray) -> "AffElt":
        block = np.asarray(block, dtype=float)
        m = block.shape[0] - 1
        return cls(GlElt(block[:m, :m]), block[:m, m])


@dataclass(frozen=True, eq=False)
class AffGroupElt:
    """Element (h, t) of A(m, R), acting as x -> h x + t."""

    lin: np.ndarray
    trans: np.ndarray

    def __post_init__(self):
        lin = _frozen(self.lin)
        trans = _frozen(self.trans)
        if lin.ndim != 2 or lin.shape[0] != lin.shape[1] or trans.shape != (lin.shape[0],):
            raise DimensionMismatchError(
                f"inconsistent affine group shapes {lin.shape} and {trans.shape}"
            )
        if abs(np.linalg.det(lin)) <= EPS_DET:
            raise SingularMatrixError("linear part of the affine group element is singular")
        object.__setattr__(self, "lin", lin)
        object.__setattr__(self, "trans", trans)

    @property
    def m(self) -> int:
        return self.lin.shape[0]

    @classmethod
    def identity(cls, m: int) -> "AffGroupElt":
        return cls(np.eye(m), np.zeros(m))

    def to_block(self) -> np.ndarray:
        block = np.eye(self.m + 1)
        block[: self.m, : self.m] = self.lin
        block[: self.m, self.m] = self.trans
        return block

    @classmethod
    def from_block(cls, block: np.ndarray) -> "AffGroupElt":
        block = np.asarray(block, dtype=float)
        m = block.shape[0] - 1
        return cls(block[:m, :m], block[:m, m])

    def __matmul__(self, other: "AffGroupElt") -> "AffGroupElt":
        return AffGroupElt(self.lin @ other.lin, self.lin @ other.trans + self.trans)

    def inverse(self) -> "AffGroupElt":
        inv = np.linalg.inv(self.lin)
        return AffGroupElt(inv, -inv @ self.trans)


class PairingKind(Enum):
    GL_ETA = "gl_eta"
    AFF3 = "aff3"


def _check_dim(sig: Signature, m: int) -> None:
    if sig.m != m:
        raise DimensionMismatchError(f"signature has dimension {sig.m}, element has {m}")


def _require_three(sig: Signature) -> None:
    if sig.m != 3:
        raise DimensionMismatchError(f"operation needs m = 3, signature has m = {sig.m}")


@lru_cache(maxsize=None)
def levi_civita() -> np.ndarray:
    """Permutation symbol with eps_123 = +1."""
    eps = np.zeros((3, 3, 3))
    eps[0, 1, 2] = eps[1, 2, 0] = eps[2, 0, 1] = 1.0
    eps[0, 2, 1] = eps[2, 1, 0] = eps[1, 0, 2] = -1.0
    eps.setflags(write=False)
    return eps


def commutator(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Matrix commutator over the trailing two axes (broadcasts leading axes)."""
    return x @ y - y @ x


# ---------------------------------------------------------------------------
# k / p split
# ---------------------------------------------------------------------------

def eta_transpose(arr: np.ndarray, sig: Signature) -> np.ndarray:
    """eta a^T eta over the trailing two axes."""
    return sig.eta_outer * np.swapaxes(arr, -1, -2)


def project_kp_array(arr: np.ndarray, sig: Signature) -> Tuple[np.ndarray, np.ndarray]:
    """Array version of project_kp acting on the trailing (m, m) axes."""
    if arr.shape[-2:] != (sig.m, sig.m):
        raise DimensionMismatchError(
            f"expected trailing shape ({sig.m}, {sig.m}), got {arr.shape[-2:]}"
        )
    flipped = eta_transpose(arr, sig)
    return 0.5 * (arr - flipped), 0.5 * (arr + flipped)


def project_kp(a: GlElt, sig: Signature) -> Tuple[GlElt, GlElt]:
    """
    Split a into its Lorentz part and its transvection part.

    Returns:
        (k_part, p_part) with k_part eta + eta k_part^T = 0 and
        p_part eta - eta p_part^T = 0.
    """
    _check_dim(sig, a.m)
    k_part, p_part = project_kp_array(a.mat, sig)
    return GlElt(k_part), GlElt(p_part)


def k_defect(arr: np.ndarray, sig: Signature) -> np.ndarray:
    """a eta + eta a^T, zero exactly on k."""
    eta = sig.eta
    return arr @ eta + eta @ np.swapaxes(arr, -1, -2)


def p_defect(arr: np.ndarray, sig: Signature) -> np.ndarray:
    """a eta - eta a^T, zero exactly on p."""
    eta = sig.eta
    return arr @ eta - eta @ np.swapaxes(arr, -1, -2)


# ---------------------------------------------------------------------------
# k ~ R^3
# ---------------------------------------------------------------------------

def iso_k_r3_array(xi: np.ndarray, sig: Signature) -> np.ndarray:
    """a^j_i = eta^{jk} eps_{ikl} xi^l over a trailing axis of length 3."""
    _require_three(sig)
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != 3:
        raise DimensionMismatchError(f"expected a trailing axis of length 3, got {xi.shape}")
    return np.einsum("j,ijl,...l->...ji", sig.eta_vector, levi_civita(), xi)


def iso_r3_k_array(arr: np.ndarray, sig: Signature) -> np.ndarray:
    """Inverse of iso_k_r3_array; the transvection part of the input is ignored."""
    _require_three(sig)
    skew = sig.eta_vector[:, None] * arr
    return 0.5 * np.stack(
        [
            skew[..., 2, 1] - skew[..., 1, 2],
            skew[..., 0, 2] - skew[..., 2, 0],
            skew[..., 1, 0] - skew[..., 0, 1],
        ],
        axis=-1,
    )


def iso_k_r3(xi: np.ndarray, sig: Signature) -> GlElt:
    return GlElt(iso_k_r3_array(xi, sig))


def iso_r3_k(a: GlElt, sig: Signature) -> np.ndarray:
    _check_dim(sig, a.m)
    return iso_r3_k_array(a.mat, sig)


@lru_cache(maxsize=None)
def _k_basis_cached(sig: Signature) -> np.ndarray:
    basis = iso_k_r3_array(np.eye(3), sig)
    basis.setflags(write=False)
    return basis


def k_basis(sig: Signature) -> np.ndarray:
    """iso_k_r3(e_1), iso_k_r3(e_2), iso_k_r3(e_3) stacked as (3, 3, 3)."""
    return _k_basis_cached(sig)


def lorentz_basis(sig: Signature) -> np.ndarray:
    """E^i_j - eta_i eta_j E^j_i for i < j: a basis of k for any m."""
    m = sig.m
    eta = sig.eta_vector
    elements = []
    for i in range(m):
        for j in range(i + 1, m):
            mat = np.zeros((m, m))
            mat[i, j] = 1.0
            mat[j, i] = -eta[i] * eta[j]
            elements.append(mat)
    return np.array(elements).reshape(-1, m, m)


def p_basis(sig: Signature) -> np.ndarray:
    """
    Basis 1/2 (E^i_j + eta E^j_i eta) of p for i <= j, in row-major order.
    """
    m = sig.m
    eta = sig.eta_vector
    elements = []
    for i in range(m):
        for j in range(i, m):
            mat = np.zeros((m, m))
            mat[i, j] += 0.5
            mat[j, i] += 0.5 * eta[i] * eta[j]
            elements.append(mat)
    return np.array(elements)


# ---------------------------------------------------------------------------
# pairings
# ---------------------------------------------------------------------------

def pair_gl(a: GlElt, b: GlElt, sig: Signature) -> float:
    """<a, b> = eta^{ij} eta_{kl} a^k_i b^l_j."""
    if a.m != b.m:
        raise DimensionMismatchError(f"cannot pair gl({a.m}) with gl({b.m})")
    _check_dim(sig, a.m)
    return float(np.sum(sig.eta_outer * a.mat * b.mat))


def pair_aff(x: AffElt, y: AffElt, sig: Signature) -> float:
    """
    Extended pairing on a(3): <(a,xi),(b,zeta)> = <a,zeta> + <b,xi> on k + R^3,
    p + 0 orthogonal to k + R^3, and <a,b> on p.
    """
    _require_three(sig)
    _check_dim(sig, x.m)
    _check_dim(sig, y.m)
    kx, px = project_kp(x.lin, sig)
    ky, py = project_kp(y.lin, sig)
    return (
        pair_gl(kx, iso_k_r3(y.trans, sig), sig)
        + pair_gl(ky, iso_k_r3(x.trans, sig), sig)
        + pair_gl(px, py, sig)
    )


def quadratic_form(x: AffElt, sig: Signature) -> float:
    """q(a, xi) = <(a, xi), (a, xi)>."""
    return pair_aff(x, x, sig)


@lru_cache(maxsize=None)
def _pairing_matrix_cached(pk: PairingKind, sig: Signature) -> np.ndarray:
    if pk is PairingKind.GL_ETA:
        matrix = np.diag(sig.eta_outer.ravel())
    else:
        _require_three(sig)
        size = 4
        matrix = np.zeros((size * size, size * size))
        units = []
        for slot in range(size * size):
            block = np.zeros(size * size)
            block[slot] = 1.0
            units.append(AffElt.from_block(block.reshape(size, size)))
        for a in range(size * size):
            if a // size == size - 1:
                continue
            for b in range(size * size):
                if b // size == size - 1:
                    continue
                matrix[a, b] = pair_aff(units[a], units[b], sig)
    matrix.setflags(write=False)
    return matrix


def pairing_matrix(pk: PairingKind, sig: Signature) -> np.ndarray:
    """
    Matrix Q with <x, y> = vec(x)^T Q vec(y) over the flattened payload:
    the m x m matrix for GL_ETA, the 4 x 4 affine block for AFF3.
    """
    return _pairing_matrix_cached(pk, sig)


def aff3_basis(sig: Signature) -> List[AffElt]:
    """p-basis (6) + k-basis (3) + R^3 basis (3)."""
    _require_three(sig)
    basis = [AffElt(GlElt(mat), np.zeros(3)) for mat in p_basis(sig)]
    basis += [AffElt(GlElt(mat), np.zeros(3)) for mat in k_basis(sig)]
    basis += [AffElt(GlElt.zero(3), e) for e in np.eye(3)]
    return basis


def gram(pk: PairingKind, sig: Signature) -> np.ndarray:
    """Gram matrix of the pairing over its standard basis."""
    if pk is PairingKind.GL_ETA:
        m = sig.m
        basis = [GlElt.unit(m, i + 1, j + 1) for i in range(m) for j in range(m)]
        return np.array([[pair_gl(a, b, sig) for b in basis] for a in basis])
    basis = aff3_basis(sig)
    return np.array([[pair_aff(x, y, sig) for y in basis] for x in basis])


# ---------------------------------------------------------------------------
# bracket, adjoint action, exponential
# ---------------------------------------------------------------------------

def bracket_aff(x: AffElt, y: AffElt) -> AffElt:
    """[(a, xi), (b, zeta)] = ([a, b], a zeta - b xi)."""
    if x.m != y.m:
        raise DimensionMismatchError(f"cannot bracket a({x.m}) with a({y.m})")
    a, b = x.lin.mat, y.lin.mat
    return AffElt(GlElt(commutator(a, b)), a @ y.trans - b @ x.trans)


def adjoint_aff(g: AffGroupElt, x: AffElt) -> AffElt:
    """Ad_(h,t)(a, xi) = (h a h^-1, h xi - h a h^-1 t)."""
    if g.m != x.m:
        raise DimensionMismatchError(f"cannot act with A({g.m}) on a({x.m})")
    h_inv = np.linalg.inv(g.lin)
    conj = g.lin @ x.lin.mat @ h_inv
    return AffElt(GlElt(conj), g.lin @ x.trans - conj @ g.trans)


def matrix_exp(mat: np.ndarray, tol: float = EXP_TOL) -> np.ndarray:
    """
    Matrix exponential by scaling and squaring of the Taylor series.

    The input is scaled by 2^-s so that its 1-norm is at most 0.5; the series
    stops once a term's norm falls below tol relative to the partial sum.
    """
    mat = np.asarray(mat, dtype=float)
    size = mat.shape[-1]
    norm = float(np.abs(mat).sum(axis=0).max()) if mat.size else 0.0
    squarings = 0
    if norm > EXP_SCALE_TARGET:
        squarings = int(math.ceil(math.log2(norm / EXP_SCALE_TARGET)))
    scaled = mat / (2.0 ** squarings)

    result = np.eye(size)
    term = np.eye(size)
    for order in range(1, SERIES_MAX_TERMS + 1):
        term = term @ scaled / order
        result = result + term
        if np.linalg.norm(term) < tol * max(1.0, np.linalg.norm(result)):
            break
    for _ in range(squarings):
        result = result @ result
    return result


def exp_aff(x: AffElt, tol: float = EXP_TOL) -> AffGroupElt:
    """Group exponential through the (m+1)x(m+1) block embedding."""
    return AffGroupElt.from_block(matrix_exp(x.to_block(), tol))


def is_lorentz(h: np.ndarray, sig: Signature, tol: float = 1e-10) -> bool:
    """h eta h^T = eta."""
    eta = sig.eta
    return bool(np.max(np.abs(h @ eta @ h.T - eta)) <= tol)


# Homomorphisms of the exact sequence R^m -> A(m) -> GL(m)

def alpha_embed(xi: np.ndarray) -> AffGroupElt:
    xi = np.asarray(xi, dtype=float)
    return AffGroupElt(np.eye(xi.shape[0]), xi)


def beta_project(g: AffGroupElt) -> np.ndarray:
    return np.array(g.lin)


def gamma_embed(h: np.ndarray) -> AffGroupElt:
    h = np.asarray(h, dtype=float)
    return AffGroupElt(h, np.zeros(h.shape[0]))
