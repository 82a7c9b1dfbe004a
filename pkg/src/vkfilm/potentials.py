"""Cell-level interaction laws.

All laws act on scaled corner stacks G of shape (..., 3, 8) (or (..., 3, 4)
for surface terms): column i is the deformed position of corner z^i divided
by the lattice spacing.  Every law is translation invariant, so callers may
pass either raw scaled positions or mean-subtracted discrete gradients.

Energy weights follow the ordered-pair convention alpha/16 per nearest pair
and beta/8 per diagonal pair in the bulk (alpha/8, beta/8 on a surface face);
pair lists here are unordered, so the coefficients below carry the factor 2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .lattice import (
    PAIRS_DIAG,
    PAIRS_NN,
    SQRT2,
    SURF_PAIRS_DIAG,
    SURF_PAIRS_NN,
    Z,
    Z1,
    affine_part,
)

# (pair list, rest length, ordered-weight numerator) per interaction class.
_BULK_CLASSES = ((PAIRS_NN, 1.0, 1.0 / 8.0), (PAIRS_DIAG, SQRT2, 1.0 / 4.0))
_SURF_CLASSES = ((SURF_PAIRS_NN, 1.0, 1.0 / 4.0), (SURF_PAIRS_DIAG, SQRT2, 1.0 / 4.0))


def _pair_distance(G: np.ndarray, i: int, j: int) -> tuple[np.ndarray, np.ndarray]:
    d = G[..., :, j] - G[..., :, i]
    r = np.sqrt(np.sum(d * d, axis=-1))
    return d, r


@dataclass(frozen=True)
class MassSpring:
    """Harmonic springs on cube edges (stiffness alpha) and face diagonals
    (stiffness beta)."""

    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.alpha <= 0.0 or self.beta <= 0.0:
            raise ValueError("spring stiffnesses must be positive")

    def _energy(self, G, classes, coeffs):
        e = np.zeros(G.shape[:-2])
        for (pairs, rest, w), c in zip(classes, coeffs):
            for (i, j) in pairs:
                _, r = _pair_distance(G, i, j)
                e += (c * w) * (r - rest) ** 2
        return e

    def _gradient(self, G, classes, coeffs):
        g = np.zeros_like(G)
        for (pairs, rest, w), c in zip(classes, coeffs):
            for (i, j) in pairs:
                d, r = _pair_distance(G, i, j)
                f = (2.0 * c * w) * (1.0 - rest / r)[..., None] * d
                g[..., :, j] += f
                g[..., :, i] -= f
        return g

    def cell_energy(self, G: np.ndarray) -> np.ndarray:
        return self._energy(G, _BULK_CLASSES, (self.alpha, self.beta))

    def cell_gradient(self, G: np.ndarray) -> np.ndarray:
        return self._gradient(G, _BULK_CLASSES, (self.alpha, self.beta))

    def surf_energy(self, G4: np.ndarray) -> np.ndarray:
        return self._energy(G4, _SURF_CLASSES, (self.alpha, self.beta))

    def surf_gradient(self, G4: np.ndarray) -> np.ndarray:
        return self._gradient(G4, _SURF_CLASSES, (self.alpha, self.beta))

    def _spring_hessian(self, classes, coeffs, ref):
        # Each unordered pair contributes c(|w_j - w_i| - rest)^2; at the
        # reference its Hessian is the rank-one block 2c * u u^T on the
        # (i, i), (j, j) diagonals and -2c * u u^T off-diagonal.
        n = ref.shape[1]
        H = np.zeros((3 * n, 3 * n))
        for (pairs, rest, w), c in zip(classes, coeffs):
            for (i, j) in pairs:
                u = (ref[:, j] - ref[:, i]) / rest
                blk = (2.0 * c * w) * np.outer(u, u)
                for a in range(3):
                    for b in range(3):
                        H[a * n + i, b * n + i] += blk[a, b]
                        H[a * n + j, b * n + j] += blk[a, b]
                        H[a * n + i, b * n + j] -= blk[a, b]
                        H[a * n + j, b * n + i] -= blk[a, b]
        return H

    def cell_hessian(self) -> np.ndarray:
        """Exact 24x24 Hessian of the cell energy at the reference cube."""
        return self._spring_hessian(_BULK_CLASSES, (self.alpha, self.beta), Z)

    def surf_hessian(self) -> np.ndarray:
        """Exact 12x12 Hessian of the surface energy at the reference face."""
        return self._spring_hessian(_SURF_CLASSES, (self.alpha, self.beta), Z1)


def lennard_jones(r: np.ndarray) -> np.ndarray:
    """Shifted 12-6 well with minimum 0 at r = 0 and curvature 72."""
    s = 1.0 + r
    return s ** -12 - 2.0 * s ** -6 + 1.0


def lennard_jones_deriv(r: np.ndarray) -> np.ndarray:
    s = 1.0 + r
    return -12.0 * s ** -13 + 12.0 * s ** -7


def quadratic_well(r: np.ndarray) -> np.ndarray:
    return np.square(r)


def quadratic_well_deriv(r: np.ndarray) -> np.ndarray:
    return 2.0 * np.asarray(r)


@dataclass(frozen=True)
class PairLaw:
    """Pair-potential generalization of the spring law: V1 on cube edges,
    V2 on face diagonals, evaluated at the deviation from rest length.

    v1/v2 take the signed deviation r - rest and must vanish to second order
    nowhere but at 0 (minimum value 0, zero slope there).
    """

    v1: Callable[[np.ndarray], np.ndarray] = lennard_jones
    v2: Callable[[np.ndarray], np.ndarray] = lennard_jones
    dv1: Callable[[np.ndarray], np.ndarray] = lennard_jones_deriv
    dv2: Callable[[np.ndarray], np.ndarray] = lennard_jones_deriv
    alpha: float = 1.0
    beta: float = 1.0

    def _energy(self, G, classes, pots):
        e = np.zeros(G.shape[:-2])
        for (pairs, rest, w), c, v in zip(classes, (self.alpha, self.beta), pots):
            for (i, j) in pairs:
                _, r = _pair_distance(G, i, j)
                e += (c * w) * v(r - rest)
        return e

    def _gradient(self, G, classes, dpots):
        g = np.zeros_like(G)
        for (pairs, rest, w), c, dv in zip(classes, (self.alpha, self.beta), dpots):
            for (i, j) in pairs:
                d, r = _pair_distance(G, i, j)
                f = ((c * w) * dv(r - rest) / r)[..., None] * d
                g[..., :, j] += f
                g[..., :, i] -= f
        return g

    def cell_energy(self, G: np.ndarray) -> np.ndarray:
        return self._energy(G, _BULK_CLASSES, (self.v1, self.v2))

    def cell_gradient(self, G: np.ndarray) -> np.ndarray:
        return self._gradient(G, _BULK_CLASSES, (self.dv1, self.dv2))

    def surf_energy(self, G4: np.ndarray) -> np.ndarray:
        return self._energy(G4, _SURF_CLASSES, (self.v1, self.v2))

    def surf_gradient(self, G4: np.ndarray) -> np.ndarray:
        return self._gradient(G4, _SURF_CLASSES, (self.dv1, self.dv2))


@dataclass(frozen=True)
class PenaltyParams:
    """Orientation penalty c * psi(det of the affine part), with psi the
    cubic ramp that is 1 below r0 and 0 above r1."""

    c: float = 1.0
    r0: float = 0.0
    r1: float = 0.5

    def __post_init__(self):
        if not self.r0 < self.r1:
            raise ValueError("penalty requires r0 < r1")
        if self.c < 0.0:
            raise ValueError("penalty strength must be nonnegative")


def smoothstep_down(s: np.ndarray, r0: float, r1: float) -> np.ndarray:
    """C^1 ramp: 1 for s <= r0, 0 for s >= r1, cubic in between."""
    t = np.clip((r1 - s) / (r1 - r0), 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def smoothstep_down_deriv(s: np.ndarray, r0: float, r1: float) -> np.ndarray:
    t = np.clip((r1 - s) / (r1 - r0), 0.0, 1.0)
    return -6.0 * t * (1.0 - t) / (r1 - r0)


def _cofactor(A: np.ndarray) -> np.ndarray:
    """Cofactor matrix of (..., 3, 3) via column cross products."""
    a1, a2, a3 = A[..., :, 0], A[..., :, 1], A[..., :, 2]
    return np.stack(
        [np.cross(a2, a3), np.cross(a3, a1), np.cross(a1, a2)], axis=-1
    )


def chi_penalty(G: np.ndarray, p: PenaltyParams) -> np.ndarray:
    """Orientation penalty on a cell matrix; kicks in as the affine part of
    the cell degenerates or inverts."""
    det = np.linalg.det(affine_part(G))
    return p.c * smoothstep_down(det, p.r0, p.r1)


def chi_penalty_gradient(G: np.ndarray, p: PenaltyParams) -> np.ndarray:
    A = affine_part(G)
    det = np.linalg.det(A)
    dpsi = p.c * smoothstep_down_deriv(det, p.r0, p.r1)
    return 0.5 * dpsi[..., None, None] * (_cofactor(A) @ Z)


@dataclass(frozen=True)
class PenalizedLaw:
    """Bulk law plus orientation penalty (the penalty never touches faces)."""

    base: MassSpring | PairLaw
    penalty: PenaltyParams = field(default_factory=PenaltyParams)

    def cell_energy(self, G: np.ndarray) -> np.ndarray:
        return self.base.cell_energy(G) + chi_penalty(G, self.penalty)

    def cell_gradient(self, G: np.ndarray) -> np.ndarray:
        return self.base.cell_gradient(G) + chi_penalty_gradient(G, self.penalty)

    def surf_energy(self, G4: np.ndarray) -> np.ndarray:
        return self.base.surf_energy(G4)

    def surf_gradient(self, G4: np.ndarray) -> np.ndarray:
        return self.base.surf_gradient(G4)

    def cell_hessian(self) -> np.ndarray:
        # psi is identically zero near det = 1 whenever r1 < 1, so the
        # penalty does not contribute to the reference Hessian.
        if not self.penalty.r1 < 1.0:
            raise ValueError("analytic Hessian needs r1 < 1 (penalty flat at the reference)")
        return self.base.cell_hessian()

    def surf_hessian(self) -> np.ndarray:
        return self.base.surf_hessian()


@dataclass(frozen=True)
class NonPenParams:
    """Short-range repulsion: gamma at separation <= delta (in lattice
    units), linear ramp to 0 at 2*delta."""

    gamma: float = 1.0
    delta: float = 0.25

    def __post_init__(self):
        if self.gamma < 0.0 or self.delta <= 0.0:
            raise ValueError("need gamma >= 0 and delta > 0")


def v_nonpen(v: np.ndarray, w: np.ndarray, p: NonPenParams) -> np.ndarray:
    """Repulsion between two scaled positions (...,3)."""
    d = np.linalg.norm(np.asarray(v) - np.asarray(w), axis=-1)
    return nonpen_of_distance(d, p)


def nonpen_of_distance(d: np.ndarray, p: NonPenParams) -> np.ndarray:
    return p.gamma * np.clip((2.0 * p.delta - d) / p.delta, 0.0, 1.0)


def nonpen_deriv_of_distance(d: np.ndarray, p: NonPenParams) -> np.ndarray:
    d = np.asarray(d)
    inside = (d > p.delta) & (d < 2.0 * p.delta)
    return np.where(inside, -p.gamma / p.delta, 0.0)


def random_rotations(rng: np.random.Generator, n: int) -> np.ndarray:
    """Haar-ish random rotations from normalized quaternions."""
    q = rng.normal(size=(n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    R = np.empty((n, 3, 3))
    R[:, 0, 0] = 1 - 2 * (y * y + z * z)
    R[:, 0, 1] = 2 * (x * y - w * z)
    R[:, 0, 2] = 2 * (x * z + w * y)
    R[:, 1, 0] = 2 * (x * y + w * z)
    R[:, 1, 1] = 1 - 2 * (x * x + z * z)
    R[:, 1, 2] = 2 * (y * z - w * x)
    R[:, 2, 0] = 2 * (x * z - w * y)
    R[:, 2, 1] = 2 * (y * z + w * x)
    R[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def frame_indifference_defect(energy, ref: np.ndarray, rng: np.random.Generator,
                              n: int = 64, spread: float = 0.5) -> float:
    """Max relative change |W(R G + c 1) - W(G)| / (1 + |W(G)|) over random
    rotations, shifts, and perturbed configurations G near ref.  Relative,
    because steep laws reach huge energies at squashed samples where any
    absolute comparison only measures float noise."""
    ref = np.asarray(ref)
    G = ref + spread * rng.standard_normal((n,) + ref.shape)
    R = random_rotations(rng, n)
    c = rng.standard_normal((n, 3))
    moved = np.einsum("nab,nbc->nac", R, G) + c[:, :, None]
    base = energy(G)
    return float(np.max(np.abs(energy(moved) - base) / (1.0 + np.abs(base))))


def growth_constant(energy, rng: np.random.Generator, n: int = 10000) -> float:
    """Empirical inf of W(G) / dist^2(G, SO(3)Z) over random zero-column-sum
    perturbations of rotated reference cells, with dist <= 1."""
    from .lattice import dist2_SO3Z

    N = rng.standard_normal((n, 3, 8))
    N -= N.mean(axis=-1, keepdims=True)
    N /= np.linalg.norm(N, axis=(-2, -1), keepdims=True)
    t = rng.uniform(0.05, 1.0, size=n)
    R = random_rotations(rng, n)
    G = np.einsum("nab,bc->nac", R, Z) + t[:, None, None] * N
    d2 = dist2_SO3Z(G)
    keep = d2 > 1e-10
    return float(np.min(energy(G[keep]) / d2[keep]))


def antiplane_defect(law, rng: np.random.Generator, n: int = 64,
                     spread: float = 0.5) -> float:
    """Max relative defect of the reflection symmetry that swaps the two
    corner layers and flips the vertical component, for cell and surface
    energies (relative for the same reason as frame_indifference_defect)."""
    P = np.diag([1.0, 1.0, -1.0])
    G = Z + spread * rng.standard_normal((n, 3, 8))
    swapped = P @ np.concatenate([G[..., 4:], G[..., :4]], axis=-1)
    e_cell = law.cell_energy(G)
    d_cell = np.max(np.abs(law.cell_energy(swapped) - e_cell) / (1.0 + np.abs(e_cell)))
    G4 = Z1 + spread * rng.standard_normal((n, 3, 4))
    e_surf = law.surf_energy(G4)
    d_surf = np.max(np.abs(law.surf_energy(P @ G4) - e_surf) / (1.0 + np.abs(e_surf)))
    return float(max(d_cell, d_surf))
