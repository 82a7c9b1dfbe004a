"""Cubic film lattices and discrete difference operators.

The reference cell is the unit cube centered at the origin; its corners
z^1..z^8 are the columns of ``Z``.  Every 3x8 matrix in this package (deformed
corner stacks, discrete gradients, strain matrices) uses this fixed column
order.  A film is a commensurate rectangular box: n1 x n2 cells in-plane and
nu atom layers, so every lattice cell has all eight corners present.

Deformations are dense arrays of shape (n1+1, n2+1, nu, 3): entry [i, j, k]
is the image of the node (i*eps, j*eps, k*eps).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Z = 0.5 * np.array([
    [-1.0, 1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 1.0, 1.0],
    [-1.0, -1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 1.0],
])
Z1 = Z[:, :4].copy()   # bottom face corners
Z2 = Z[:, 4:].copy()   # top face corners
ZMINUS = np.hstack([-Z1, Z2])
M = 0.5 * np.outer([0.0, 0.0, 1.0], [1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0])
M1 = M[:, :4].copy()
E3 = np.array([0.0, 0.0, 1.0])

# Integer corner offsets a^i = z^i + (1/2, 1/2, 1/2), one row per corner.
CORNER_OFFSETS = np.rint(Z.T + 0.5).astype(int)

SQRT2 = float(np.sqrt(2.0))


def _distance_pairs(cols: np.ndarray, dist: float) -> tuple[tuple[int, int], ...]:
    n = cols.shape[1]
    out = []
    for i in range(n):
        for j in range(i + 1, n):
            if abs(float(np.linalg.norm(cols[:, i] - cols[:, j])) - dist) < 1e-12:
                out.append((i, j))
    return tuple(out)


# Unordered interaction pairs of the cell (cube edges / face diagonals) and of
# a single face in Z1 order.
PAIRS_NN = _distance_pairs(Z, 1.0)
PAIRS_DIAG = _distance_pairs(Z, SQRT2)
SURF_PAIRS_NN = _distance_pairs(Z1, 1.0)
SURF_PAIRS_DIAG = _distance_pairs(Z1, SQRT2)

assert len(PAIRS_NN) == 12 and len(PAIRS_DIAG) == 12
assert len(SURF_PAIRS_NN) == 4 and len(SURF_PAIRS_DIAG) == 2


@dataclass(frozen=True)
class FilmConfig:
    """Geometry of one film: spacing, layer count, and in-plane cell counts."""

    epsilon: float
    nu: int
    n1: int
    n2: int

    def __post_init__(self):
        if not self.epsilon > 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if int(self.nu) != self.nu or self.nu < 2:
            raise ValueError(f"nu must be an integer >= 2, got {self.nu}")
        if self.n1 < 1 or self.n2 < 1:
            raise ValueError(f"cell counts must be >= 1, got {self.n1} x {self.n2}")

    @property
    def h(self) -> float:
        return (self.nu - 1) * self.epsilon

    @property
    def lengths(self) -> tuple[float, float]:
        return (self.n1 * self.epsilon, self.n2 * self.epsilon)

    @property
    def n_nodes(self) -> int:
        return (self.n1 + 1) * (self.n2 + 1) * self.nu

    @property
    def n_cells(self) -> int:
        return self.n1 * self.n2 * (self.nu - 1)

    @property
    def node_shape(self) -> tuple[int, int, int]:
        return (self.n1 + 1, self.n2 + 1, self.nu)

    @property
    def cell_shape(self) -> tuple[int, int, int]:
        return (self.n1, self.n2, self.nu - 1)

    def node_positions(self) -> np.ndarray:
        """Reference node coordinates, also the identity deformation."""
        out = np.empty(self.node_shape + (3,))
        out[..., 0] = (self.epsilon * np.arange(self.n1 + 1))[:, None, None]
        out[..., 1] = (self.epsilon * np.arange(self.n2 + 1))[None, :, None]
        out[..., 2] = (self.epsilon * np.arange(self.nu))[None, None, :]
        return out

    def column_positions(self) -> np.ndarray:
        """In-plane coordinates (i*eps, j*eps) of the lateral node columns."""
        out = np.empty((self.n1 + 1, self.n2 + 1, 2))
        out[..., 0] = (self.epsilon * np.arange(self.n1 + 1))[:, None]
        out[..., 1] = (self.epsilon * np.arange(self.n2 + 1))[None, :]
        return out

    def cell_centers(self) -> np.ndarray:
        """Midpoints ((i+1/2)eps, (j+1/2)eps, (k+1/2)eps) of all cells."""
        out = np.empty(self.cell_shape + (3,))
        out[..., 0] = (self.epsilon * (np.arange(self.n1) + 0.5))[:, None, None]
        out[..., 1] = (self.epsilon * (np.arange(self.n2) + 0.5))[None, :, None]
        out[..., 2] = (self.epsilon * (np.arange(self.nu - 1) + 0.5))[None, None, :]
        return out


def build_lattice(cfg: FilmConfig) -> FilmConfig:
    """Validate and return the lattice description (construction is implicit
    in FilmConfig; this exists as the one entry point that rejects bad input)."""
    if not isinstance(cfg, FilmConfig):
        cfg = FilmConfig(*cfg)
    return cfg


def cell_corner_values(w: np.ndarray, k: int) -> np.ndarray:
    """Per-cell stacks of the 8 corner values for cell layer k.

    w : (n1+1, n2+1, nu, c) node array; returns (n1, n2, 8, c).
    """
    n1 = w.shape[0] - 1
    n2 = w.shape[1] - 1
    cols = [w[a1:n1 + a1, a2:n2 + a2, k + a3] for (a1, a2, a3) in CORNER_OFFSETS]
    return np.stack(cols, axis=-2)


def cell_matrix(corners: np.ndarray, epsilon: float) -> np.ndarray:
    """Corner stack (..., 8, 3) -> scaled 3x8 cell matrix (positions / eps),
    without mean subtraction."""
    return np.swapaxes(corners, -1, -2) / epsilon


def gradient_from_corners(corners: np.ndarray, epsilon: float) -> np.ndarray:
    """Corner stack (..., 8, 3) -> discrete gradient (..., 3, 8): corner
    values scaled by 1/eps with the 8-corner mean removed column-wise."""
    g = cell_matrix(corners, epsilon)
    return g - g.mean(axis=-1, keepdims=True)


def discrete_gradient(w: np.ndarray, cfg: FilmConfig, cell: tuple[int, int, int]) -> np.ndarray:
    """Discrete gradient of a deformation at one cell (i, j, k)."""
    i, j, k = cell
    if not (0 <= i < cfg.n1 and 0 <= j < cfg.n2 and 0 <= k < cfg.nu - 1):
        raise IndexError(f"cell {cell} outside {cfg.cell_shape}")
    corners = np.stack(
        [w[i + a1, j + a2, k + a3] for (a1, a2, a3) in CORNER_OFFSETS], axis=0
    )
    return gradient_from_corners(corners, cfg.epsilon)


def layer_gradients(w: np.ndarray, cfg: FilmConfig, k: int) -> np.ndarray:
    """Discrete gradients of all cells in cell layer k, shape (n1, n2, 3, 8)."""
    return gradient_from_corners(cell_corner_values(w, k), cfg.epsilon)


def rescaled_gradient(y: np.ndarray, cfg: FilmConfig, cell: tuple[int, int, int]) -> np.ndarray:
    """Discrete gradient of a deformation given on the rescaled lattice whose
    node (i, j, k) sits at (i*eps, j*eps, k/(nu-1)).

    Descaling stretches the vertical node spacing from 1/(nu-1) back to eps
    without touching node values, so the result coincides with the physical
    discrete gradient of the descaled deformation (exact round-trip).
    """
    return discrete_gradient(y, cfg, cell)


def affine_part(G: np.ndarray) -> np.ndarray:
    """Affine part of a cell matrix: G Z^T / 2 (inverts F |-> F Z)."""
    return G @ Z.T / 2.0


def _procrustes_correlation(G: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    F = G @ Z.T
    s = np.linalg.svd(F, compute_uv=False)
    corr = s[..., 0] + s[..., 1] + np.sign(np.linalg.det(F)) * s[..., 2]
    return F, corr


def dist2_SO3Z(G: np.ndarray) -> np.ndarray:
    """Squared Frobenius distance of (..., 3, 8) matrices to the orbit SO(3)Z."""
    _, corr = _procrustes_correlation(G)
    g2 = np.sum(G * G, axis=(-2, -1))
    return np.maximum(g2 + 6.0 - 2.0 * corr, 0.0)


def dist_SO3Z(G: np.ndarray) -> np.ndarray:
    return np.sqrt(dist2_SO3Z(G))


def nearest_rotation(G: np.ndarray) -> np.ndarray:
    """The rotation R minimizing |G - R Z|, via sign-corrected polar
    factorization of G Z^T.  At rank-deficient inputs any minimizer is
    returned (the distance is still unique)."""
    F = G @ Z.T
    U, _, Vt = np.linalg.svd(F)
    d = np.linalg.det(U @ Vt)
    corr = np.ones(U.shape[:-2] + (3,))
    corr[..., 2] = d
    return (U * corr[..., None, :]) @ Vt


def dist2_SO3(F: np.ndarray) -> np.ndarray:
    """Squared distance of (..., 3, 3) matrices to SO(3)."""
    s = np.linalg.svd(F, compute_uv=False)
    corr = s[..., 0] + s[..., 1] + np.sign(np.linalg.det(F)) * s[..., 2]
    f2 = np.sum(F * F, axis=(-2, -1))
    return np.maximum(f2 + 3.0 - 2.0 * corr, 0.0)
