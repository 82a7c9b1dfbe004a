"""Quadratic forms of cell energies at the reference configuration and the
relaxation of the cell form over vertical perturbations.

Matrices act on C-order vectorizations: a (3, n) argument A is flattened to
(3n,) row-major, so component (r, c) sits at index r*n + c.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import E3, Z, Z1

__all__ = [
    "QuadraticForm",
    "fd_hessian",
    "cell_hessian_of",
    "surf_hessian_of",
    "RelaxationSolver",
    "Forms",
    "assemble_forms",
    "embed3",
]


def vec(A: np.ndarray) -> np.ndarray:
    """C-order flattening of the trailing (3, n) block."""
    return np.reshape(A, A.shape[:-2] + (-1,))


def embed3(A2: np.ndarray) -> np.ndarray:
    """Embed (..., 2, 2) into (..., 3, 3) with a zero third row and column."""
    A2 = np.asarray(A2, dtype=float)
    out = np.zeros(A2.shape[:-2] + (3, 3))
    out[..., :2, :2] = A2
    return out


@dataclass(frozen=True)
class QuadraticForm:
    """Dense symmetric form q(A) = vec(A)^T H vec(A) on (3, n) arguments."""

    matrix: np.ndarray
    arg_shape: tuple[int, int]

    def __post_init__(self):
        H = np.asarray(self.matrix, dtype=float)
        d = self.arg_shape[0] * self.arg_shape[1]
        if H.shape != (d, d):
            raise ValueError(f"matrix shape {H.shape} does not fit arguments {self.arg_shape}")
        asym = float(np.max(np.abs(H - H.T)))
        if asym > 1e-9 * max(1.0, float(np.max(np.abs(H)))):
            raise ValueError(f"form matrix is not symmetric (defect {asym:.3e})")
        object.__setattr__(self, "matrix", 0.5 * (H + H.T))

    def __call__(self, A: np.ndarray) -> np.ndarray:
        v = vec(np.asarray(A, dtype=float))
        return np.einsum("...i,ij,...j->...", v, self.matrix, v)

    def pair(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        va = vec(np.asarray(A, dtype=float))
        vb = vec(np.asarray(B, dtype=float))
        return np.einsum("...i,ij,...j->...", va, self.matrix, vb)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))


def fd_hessian(energy, base: np.ndarray, step: float = 1e-5, richardson: bool = True) -> np.ndarray:
    """Finite-difference Hessian of a batched energy at a (3, n) base point:
    cross second differences, optional single Richardson pass, symmetrized."""
    base = np.asarray(base, dtype=float)
    d = base.size

    def at(s: float) -> np.ndarray:
        P = (np.eye(d) * s).reshape((d,) + base.shape)
        pp = energy(base + P[:, None] + P[None, :])
        pm = energy(base + P[:, None] - P[None, :])
        mp = energy(base - P[:, None] + P[None, :])
        mm = energy(base - P[:, None] - P[None, :])
        return (pp - pm - mp + mm) / (4.0 * s * s)

    H = (4.0 * at(step / 2.0) - at(step)) / 3.0 if richardson else at(step)
    return 0.5 * (H + H.T)


def cell_hessian_of(law, method: str = "auto", step: float = 1e-5) -> np.ndarray:
    """24x24 Hessian of a cell law at the reference cube: closed form when
    the law provides one, finite differences otherwise."""
    if method not in ("auto", "analytic", "fd"):
        raise ValueError(f"unknown method {method!r}")
    if method != "fd" and hasattr(law, "cell_hessian"):
        return law.cell_hessian()
    if method == "analytic":
        raise ValueError("law has no closed-form cell Hessian")
    return fd_hessian(law.cell_energy, Z, step=step)


def surf_hessian_of(law, method: str = "auto", step: float = 1e-5) -> np.ndarray:
    """12x12 Hessian of a surface law at the reference face."""
    if method not in ("auto", "analytic", "fd"):
        raise ValueError(f"unknown method {method!r}")
    if method != "fd" and hasattr(law, "surf_hessian"):
        return law.surf_hessian()
    if method == "analytic":
        raise ValueError("law has no closed-form surface Hessian")
    return fd_hessian(law.surf_energy, Z1, step=step)


def _vertical_basis(sym: bool) -> np.ndarray:
    """Rows i: vec(B_i Z) with B_i = e_i x e3 (or its symmetric part)."""
    rows = []
    for i in range(3):
        B = np.outer(np.eye(3)[i], E3)
        if sym:
            B = 0.5 * (B + B.T)
        rows.append(vec(B @ Z))
    return np.stack(rows)


class RelaxationSolver:
    """Minimization of a cell form over vertical-stretch corrections:
    b(A) = argmin_b q(A + (b x e3) Z), solved once as a 3x3 linear system and
    stored as a linear map in vec(A)."""

    def __init__(self, q_cell: QuadraticForm):
        if q_cell.arg_shape != (3, 8):
            raise ValueError("relaxation needs the 24-dimensional cell form")
        self.q_cell = q_cell
        H = q_cell.matrix
        self._B = _vertical_basis(sym=False)
        self._D = _vertical_basis(sym=True)
        self.K = self._B @ H @ self._B.T
        self.K_sym = self._D @ H @ self._D.T
        try:
            np.linalg.cholesky(self.K)
            np.linalg.cholesky(self.K_sym)
        except np.linalg.LinAlgError as exc:
            raise ValueError("vertical-stretch block of the form is singular") from exc
        self.bmap = -np.linalg.solve(self.K, self._B @ H)
        self.bmap_sym = -np.linalg.solve(self.K_sym, self._D @ H)
        T = np.eye(H.shape[0]) + self._B.T @ self.bmap
        R = T.T @ H @ T
        self.rel_matrix = 0.5 * (R + R.T)

    def b(self, A: np.ndarray) -> np.ndarray:
        """Minimizing vertical stretch, shape (..., 3)."""
        v = vec(np.asarray(A, dtype=float))
        return v @ self.bmap.T

    def b_sym(self, A: np.ndarray) -> np.ndarray:
        """Minimizer of the symmetrized variant q(A + sym(b x e3) Z)."""
        v = vec(np.asarray(A, dtype=float))
        return v @ self.bmap_sym.T

    def correction(self, b: np.ndarray) -> np.ndarray:
        """(b x e3) Z for batched b."""
        b = np.asarray(b, dtype=float)
        return np.einsum("...i,j,jc->...ic", b, E3, Z)

    def q_rel(self, A: np.ndarray) -> np.ndarray:
        v = vec(np.asarray(A, dtype=float))
        return np.einsum("...i,ij,...j->...", v, self.rel_matrix, v)


@dataclass(frozen=True)
class Forms:
    """Reference quadratic forms of one model, plus the derived relaxed and
    reduced in-plane forms."""

    q_cell: QuadraticForm
    q_surf: QuadraticForm
    solver: RelaxationSolver
    antiplane_defect: float

    @property
    def antiplane(self) -> bool:
        return self.antiplane_defect < 1e-9

    def q_rel(self, A: np.ndarray) -> np.ndarray:
        return self.solver.q_rel(A)

    def b(self, A: np.ndarray) -> np.ndarray:
        return self.solver.b(A)

    def q2(self, A2: np.ndarray) -> np.ndarray:
        """Relaxed form on in-plane strains: q_rel(embed(A2) Z)."""
        return self.solver.q_rel(embed3(A2) @ Z)

    def q2_surf(self, A2: np.ndarray) -> np.ndarray:
        """Surface form on in-plane strains: q_surf(embed(A2) Z1)."""
        return self.q_surf(embed3(A2) @ Z1)


def assemble_forms(bulk, surface=None, method: str = "auto", step: float = 1e-5,
                   rng: np.random.Generator | None = None) -> Forms:
    """Build all reference forms of a model.  The antiplane reflection
    symmetry of the laws is measured on random configurations at assembly
    time; consumers that require it check the stored defect."""
    from .potentials import antiplane_defect as _apd

    if surface is None:
        surface = bulk
    Hc = cell_hessian_of(bulk, method=method, step=step)
    Hs = surf_hessian_of(surface, method=method, step=step)
    q_cell = QuadraticForm(Hc, (3, 8))
    q_surf = QuadraticForm(Hs, (3, 4))
    solver = RelaxationSolver(q_cell)
    rng = rng if rng is not None else np.random.default_rng(0)

    class _Pair:
        cell_energy = staticmethod(bulk.cell_energy)
        surf_energy = staticmethod(surface.surf_energy)

    defect = _apd(_Pair, rng)
    return Forms(q_cell=q_cell, q_surf=q_surf, solver=solver, antiplane_defect=defect)
