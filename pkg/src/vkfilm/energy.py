"""Total atomistic energies on film lattices.

The raw lattice sums (cell, surface, body-force, short-range repulsion) are
assembled layer by layer; per-layer partial sums are combined with
``math.fsum`` in a fixed order so the result is independent of thread count.
The scaled total is (eps^3 / h) times the raw sum.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .lattice import (
    CORNER_OFFSETS,
    FilmConfig,
    cell_corner_values,
    cell_matrix,
    dist_SO3Z,
    gradient_from_corners,
)
from .potentials import NonPenParams, nonpen_deriv_of_distance, nonpen_of_distance

VARIANTS = ("plain", "with-nonpen", "restricted")


@dataclass(frozen=True)
class AtomisticModel:
    """Bulk cell law + surface face law, with optional repulsion parameters
    and admissibility radius for the restricted energy."""

    bulk: object
    surface: object
    nonpen: NonPenParams | None = None
    delta_adm: float | None = None

    def __post_init__(self):
        from .lattice import Z, Z1

        e0 = abs(float(self.bulk.cell_energy(Z)))
        s0 = abs(float(self.surface.surf_energy(Z1)))
        if e0 > 1e-12 or s0 > 1e-12:
            raise ValueError(
                f"laws must vanish at the reference cell (got {e0:.3e}, {s0:.3e})"
            )
        if self.delta_adm is not None and not self.delta_adm > 0.0:
            raise ValueError("delta_adm must be positive")


@dataclass(frozen=True)
class ForceField:
    """Per-column body force, replicated over layers.

    Admissible fields vanish on the lateral boundary ring and have zero mean
    and zero first in-plane moments over the columns.
    """

    cfg: FilmConfig
    columns: np.ndarray  # (n1+1, n2+1, 3)

    def __post_init__(self):
        f = np.asarray(self.columns, dtype=float)
        if f.shape != (self.cfg.n1 + 1, self.cfg.n2 + 1, 3):
            raise ValueError(f"force shape {f.shape} does not match lattice columns")
        if not np.all(np.isfinite(f)):
            raise ValueError("force has non-finite entries")
        object.__setattr__(self, "columns", f)
        defect = self.admissibility_defect()
        if defect > self._tolerance():
            raise ValueError(f"force is not admissible (defect {defect:.3e})")

    def _tolerance(self) -> float:
        scale = max(1.0, float(np.sum(np.abs(self.columns))))
        lmax = max(self.cfg.lengths)
        return 1e-9 * scale * max(1.0, lmax)

    def admissibility_defect(self) -> float:
        f = self.columns
        ring = max(
            float(np.max(np.abs(f[[0, -1], :, :]), initial=0.0)),
            float(np.max(np.abs(f[:, [0, -1], :]), initial=0.0)),
        )
        x = self.cfg.column_positions()
        mean = np.abs(f.sum(axis=(0, 1)))
        mom = np.abs(np.einsum("ijc,ijp->cp", f, x))
        return max(ring, float(mean.max()), float(mom.max()))


def make_admissible_force(raw: np.ndarray, cfg: FilmConfig) -> ForceField:
    """Project a per-column profile onto the admissible class.

    The boundary ring is zeroed; on the strictly interior columns the
    component-wise best approximation in span{1, x1, x2} (counting measure)
    is subtracted, which kills mean and first moments without touching the
    ring.  Lattices too small to carry three non-collinear interior columns
    are rejected.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.shape != (cfg.n1 + 1, cfg.n2 + 1, 3):
        raise ValueError(f"raw force shape {raw.shape} does not match lattice columns")
    if cfg.n1 < 3 or cfg.n2 < 3:
        raise ValueError("interior columns are collinear; cannot project force")
    x = cfg.column_positions()
    interior = np.zeros((cfg.n1 + 1, cfg.n2 + 1), dtype=bool)
    interior[1:-1, 1:-1] = True
    xi = x[interior]
    B = np.column_stack([np.ones(len(xi)), xi[:, 0], xi[:, 1]])
    if np.linalg.matrix_rank(B) < 3:
        raise ValueError("interior columns are collinear; cannot project force")
    F = raw[interior]
    coef, *_ = np.linalg.lstsq(B, F, rcond=None)
    cols = np.zeros_like(raw)
    cols[interior] = F - B @ coef
    return ForceField(cfg, cols)


def _layer_energy(w: np.ndarray, cfg: FilmConfig, model: AtomisticModel, k: int) -> float:
    G = cell_matrix(cell_corner_values(w, k), cfg.epsilon)
    e = float(np.sum(model.bulk.cell_energy(G)))
    if cfg.nu == 2:
        e += float(np.sum(model.surface.surf_energy(G[..., :4])))
        e += float(np.sum(model.surface.surf_energy(G[..., 4:])))
    elif k == 0:
        e += float(np.sum(model.surface.surf_energy(G[..., :4])))
    elif k == cfg.nu - 2:
        e += float(np.sum(model.surface.surf_energy(G[..., 4:])))
    return e


def _over_layers(fn, cfg: FilmConfig, threads: int) -> list:
    layers = range(cfg.nu - 1)
    if threads <= 1:
        return [fn(k) for k in layers]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, layers))


def e_atom(w: np.ndarray, cfg: FilmConfig, model: AtomisticModel, threads: int = 1) -> float:
    """Raw cell + surface sum over all lattice cells."""
    parts = _over_layers(lambda k: _layer_energy(w, cfg, model, k), cfg, threads)
    return math.fsum(parts)


def e_body(w: np.ndarray, force: ForceField) -> float:
    """Raw body-force pairing sum_x w(x) . f(x); rejects inadmissible forces."""
    defect = force.admissibility_defect()
    if defect > force._tolerance():
        raise ValueError(f"force is not admissible (defect {defect:.3e})")
    f = force.columns
    parts = [float(np.sum(w[:, :, k, :] * f)) for k in range(w.shape[2])]
    return math.fsum(parts)


def _nonpen_pairs(w: np.ndarray, cfg: FilmConfig, p: NonPenParams):
    """Sorted (i, j, value) contributions over distinct node pairs closer
    than the interaction cutoff, found through a spatial hash."""
    pos = w.reshape(-1, 3)
    cut = 2.0 * p.delta * cfg.epsilon
    bins: dict[tuple[int, int, int], list[int]] = {}
    keys = np.floor(pos / cut).astype(np.int64)
    for idx, key in enumerate(map(tuple, keys)):
        bins.setdefault(key, []).append(idx)
    out = []
    offsets = [(a, b, c) for a in (-1, 0, 1) for b in (-1, 0, 1) for c in (-1, 0, 1)]
    for idx in range(pos.shape[0]):
        kx, ky, kz = keys[idx]
        for (a, b, c) in offsets:
            cand = bins.get((kx + a, ky + b, kz + c))
            if cand is None:
                continue
            for j in cand:
                if j <= idx:
                    continue
                d = float(np.linalg.norm(pos[j] - pos[idx]))
                if d < cut:
                    val = float(nonpen_of_distance(d / cfg.epsilon, p))
                    out.append((idx, j, val, d))
    out.sort(key=lambda t: (t[0], t[1]))
    return out, pos


def e_nonpen(w: np.ndarray, cfg: FilmConfig, p: NonPenParams) -> float:
    """Raw repulsion energy: twice the sum of the ramp over distinct node
    pairs (the ordered double-sum convention)."""
    pairs, _ = _nonpen_pairs(w, cfg, p)
    return 2.0 * math.fsum(v for (_, _, v, _) in pairs)


def e_nonpen_naive(w: np.ndarray, cfg: FilmConfig, p: NonPenParams) -> float:
    """Quadratic-time reference evaluation of the repulsion energy."""
    pos = w.reshape(-1, 3)
    n = pos.shape[0]
    if n > 5000:
        raise ValueError("naive repulsion path is meant for small lattices")
    cut = 2.0 * p.delta * cfg.epsilon
    vals = []
    for i in range(n - 1):
        for j in range(i + 1, n):
            d = float(np.linalg.norm(pos[j] - pos[i]))
            if d < cut:
                vals.append(float(nonpen_of_distance(d / cfg.epsilon, p)))
    return 2.0 * math.fsum(vals)


def in_s_delta(w: np.ndarray, cfg: FilmConfig, delta: float, threads: int = 1):
    """(admissible?, max over cells of dist(discrete gradient, SO(3)Z))."""

    def layer_max(k: int) -> float:
        g = gradient_from_corners(cell_corner_values(w, k), cfg.epsilon)
        return float(np.max(dist_SO3Z(g)))

    m = max(_over_layers(layer_max, cfg, threads))
    return (m < delta), m


def e_total(
    w: np.ndarray,
    cfg: FilmConfig,
    model: AtomisticModel,
    force: ForceField | None = None,
    variant: str = "plain",
    threads: int = 1,
) -> float:
    """Scaled total energy (eps^3 / h) * (cell/surface sum + force pairing
    [+ repulsion]).  The restricted variant returns inf outside the set of
    deformations whose every cell gradient stays delta_adm-close to SO(3)Z.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    if variant == "restricted":
        if model.delta_adm is None:
            raise ValueError("restricted energy needs delta_adm on the model")
        ok, _ = in_s_delta(w, cfg, model.delta_adm, threads=threads)
        if not ok:
            return math.inf
    parts = [e_atom(w, cfg, model, threads=threads)]
    if force is not None:
        parts.append(e_body(w, force))
    if variant == "with-nonpen":
        if model.nonpen is None:
            raise ValueError("with-nonpen variant needs nonpen parameters on the model")
        parts.append(e_nonpen(w, cfg, model.nonpen))
    raw = math.fsum(parts)
    if not math.isfinite(raw):
        raise ArithmeticError(f"non-finite raw energy {raw}")
    return (cfg.epsilon ** 3 / cfg.h) * raw


def e_atom_gradient(w: np.ndarray, cfg: FilmConfig, model: AtomisticModel) -> np.ndarray:
    """Node-wise gradient of the raw cell + surface sum."""
    n1, n2 = cfg.n1, cfg.n2
    g = np.zeros_like(w)
    inv_eps = 1.0 / cfg.epsilon
    for k in range(cfg.nu - 1):
        G = cell_matrix(cell_corner_values(w, k), cfg.epsilon)
        dG = model.bulk.cell_gradient(G)
        if cfg.nu == 2:
            dG[..., :4] += model.surface.surf_gradient(G[..., :4])
            dG[..., 4:] += model.surface.surf_gradient(G[..., 4:])
        elif k == 0:
            dG[..., :4] += model.surface.surf_gradient(G[..., :4])
        elif k == cfg.nu - 2:
            dG[..., 4:] += model.surface.surf_gradient(G[..., 4:])
        for c, (a1, a2, a3) in enumerate(CORNER_OFFSETS):
            g[a1:n1 + a1, a2:n2 + a2, k + a3, :] += inv_eps * dG[..., :, c]
    return g


def e_nonpen_gradient(w: np.ndarray, cfg: FilmConfig, p: NonPenParams) -> np.ndarray:
    pairs, pos = _nonpen_pairs(w, cfg, p)
    g = np.zeros_like(pos)
    inv_eps = 1.0 / cfg.epsilon
    for (i, j, _, d) in pairs:
        if d == 0.0:
            continue
        slope = 2.0 * float(nonpen_deriv_of_distance(d * inv_eps, p)) * inv_eps
        u = (pos[i] - pos[j]) / d
        g[i] += slope * u
        g[j] -= slope * u
    return g.reshape(w.shape)


def e_total_gradient(
    w: np.ndarray,
    cfg: FilmConfig,
    model: AtomisticModel,
    force: ForceField | None = None,
    variant: str = "plain",
) -> np.ndarray:
    """Gradient of the scaled total energy (the finite branch, for the
    restricted variant)."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    g = e_atom_gradient(w, cfg, model)
    if force is not None:
        g = g + force.columns[:, :, None, :]
    if variant == "with-nonpen":
        if model.nonpen is None:
            raise ValueError("with-nonpen variant needs nonpen parameters on the model")
        g = g + e_nonpen_gradient(w, cfg, model.nonpen)
    return (cfg.epsilon ** 3 / cfg.h) * g
