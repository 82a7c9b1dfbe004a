"""Plate-limit functionals: membrane/bending energies of displacement fields
and their finite-layer refinements.

Displacement fields carry an in-plane part u : S -> R^2 and a deflection
v : S -> R; all evaluators are batched over arbitrary leading point axes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .lattice import M, M1, ZMINUS, Z, Z1
from .quadforms import Forms, embed3


def _eval_trig(terms, x1, x2, d1: int = 0, d2: int = 0):
    """Sum of amp * sin(kx x1 + px) * sin(ky x2 + py), differentiated d1
    times in x1 and d2 times in x2."""
    out = np.zeros(np.broadcast(x1, x2).shape)
    for (amp, kx, ky, px, py) in terms:
        f1 = np.sin(kx * x1 + px + d1 * np.pi / 2.0) * kx ** d1
        f2 = np.sin(ky * x2 + py + d2 * np.pi / 2.0) * ky ** d2
        out = out + amp * f1 * f2
    return out


def _scale_terms(terms, unit: float):
    return tuple(
        (float(a), float(kx) * unit, float(ky) * unit, float(px), float(py))
        for (a, kx, ky, px, py) in terms
    )


@dataclass(frozen=True)
class TrigDisplacement:
    """Displacement field with separable sine products per component.

    Each term is (amp, kx, ky, px, py) meaning
    amp * sin(kx*freq_unit*x1 + px) * sin(ky*freq_unit*x2 + py).
    """

    u1: tuple = ()
    u2: tuple = ()
    v: tuple = ()
    freq_unit: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "u1", _scale_terms(self.u1, self.freq_unit))
        object.__setattr__(self, "u2", _scale_terms(self.u2, self.freq_unit))
        object.__setattr__(self, "v", _scale_terms(self.v, self.freq_unit))

    def u_val(self, x):
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack([_eval_trig(self.u1, x1, x2), _eval_trig(self.u2, x1, x2)], axis=-1)

    def v_val(self, x):
        return _eval_trig(self.v, x[..., 0], x[..., 1])

    def grad_u(self, x):
        x1, x2 = x[..., 0], x[..., 1]
        rows = [
            [_eval_trig(t, x1, x2, 1, 0), _eval_trig(t, x1, x2, 0, 1)]
            for t in (self.u1, self.u2)
        ]
        return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)

    def grad_v(self, x):
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack(
            [_eval_trig(self.v, x1, x2, 1, 0), _eval_trig(self.v, x1, x2, 0, 1)], axis=-1
        )

    def hess_v(self, x):
        x1, x2 = x[..., 0], x[..., 1]
        h11 = _eval_trig(self.v, x1, x2, 2, 0)
        h12 = _eval_trig(self.v, x1, x2, 1, 1)
        h22 = _eval_trig(self.v, x1, x2, 0, 2)
        return np.stack(
            [np.stack([h11, h12], axis=-1), np.stack([h12, h22], axis=-1)], axis=-2
        )


def _eval_poly(terms, x1, x2, d1: int = 0, d2: int = 0):
    out = np.zeros(np.broadcast(x1, x2).shape)
    for (i, j, c) in terms:
        if i < d1 or j < d2:
            continue
        coef = c * math.perm(i, d1) * math.perm(j, d2)
        out = out + coef * x1 ** (i - d1) * x2 ** (j - d2)
    return out


@dataclass(frozen=True)
class PolyDisplacement:
    """Polynomial displacement field; terms are (i, j, coef) monomials
    coef * x1^i * x2^j per component."""

    u1: tuple = ()
    u2: tuple = ()
    v: tuple = ()

    def u_val(self, x):
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack([_eval_poly(self.u1, x1, x2), _eval_poly(self.u2, x1, x2)], axis=-1)

    def v_val(self, x):
        return _eval_poly(self.v, x[..., 0], x[..., 1])

    def grad_u(self, x):
        x1, x2 = x[..., 0], x[..., 1]
        rows = [
            [_eval_poly(t, x1, x2, 1, 0), _eval_poly(t, x1, x2, 0, 1)]
            for t in (self.u1, self.u2)
        ]
        return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)

    def grad_v(self, x):
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack(
            [_eval_poly(self.v, x1, x2, 1, 0), _eval_poly(self.v, x1, x2, 0, 1)], axis=-1
        )

    def hess_v(self, x):
        x1, x2 = x[..., 0], x[..., 1]
        h11 = _eval_poly(self.v, x1, x2, 2, 0)
        h12 = _eval_poly(self.v, x1, x2, 1, 1)
        h22 = _eval_poly(self.v, x1, x2, 0, 2)
        return np.stack(
            [np.stack([h11, h12], axis=-1), np.stack([h12, h22], axis=-1)], axis=-2
        )


def _reflect(t: np.ndarray, lo: float, hi: float) -> np.ndarray:
    span = hi - lo
    s = np.mod(np.asarray(t, dtype=float) - lo, 2.0 * span)
    return lo + np.where(s > span, 2.0 * span - s, s)


class _Bilinear:
    """Bilinear interpolation on a rectilinear grid with reflecting
    extension beyond the boundary."""

    def __init__(self, x1: np.ndarray, x2: np.ndarray, values: np.ndarray):
        self.x1 = np.asarray(x1, dtype=float)
        self.x2 = np.asarray(x2, dtype=float)
        self.values = np.asarray(values, dtype=float)

    def __call__(self, q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
        x1, x2, V = self.x1, self.x2, self.values
        q1 = _reflect(q1, float(x1[0]), float(x1[-1]))
        q2 = _reflect(q2, float(x2[0]), float(x2[-1]))
        i = np.clip(np.searchsorted(x1, q1) - 1, 0, len(x1) - 2)
        j = np.clip(np.searchsorted(x2, q2) - 1, 0, len(x2) - 2)
        t = (q1 - x1[i]) / (x1[i + 1] - x1[i])
        s = (q2 - x2[j]) / (x2[j + 1] - x2[j])
        return (
            (1 - t) * (1 - s) * V[i, j]
            + t * (1 - s) * V[i + 1, j]
            + (1 - t) * s * V[i, j + 1]
            + t * s * V[i + 1, j + 1]
        )


class SampledDisplacement:
    """Displacement field given by node samples on a rectilinear grid.

    Derivatives are taken on the grid (central differences inside, one-sided
    at the edges) and interpolated bilinearly; the two mixed second
    derivatives of v must agree on the grid up to a small defect and are
    averaged.
    """

    def __init__(self, x1, x2, u1, u2, v, mixed_tol: float = 1e-8):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        v = np.asarray(v, dtype=float)
        dv1, dv2 = np.gradient(v, x1, x2)
        h11 = np.gradient(dv1, x1, axis=0)
        h12a = np.gradient(dv1, x2, axis=1)
        h21a = np.gradient(dv2, x1, axis=0)
        h22 = np.gradient(dv2, x2, axis=1)
        scale = max(1.0, float(np.max(np.abs(h12a))), float(np.max(np.abs(h21a))))
        defect = float(np.max(np.abs(h12a - h21a)))
        if defect > mixed_tol * scale:
            raise ValueError(f"mixed second derivatives disagree (defect {defect:.3e})")
        h12 = 0.5 * (h12a + h21a)
        self._u = [_Bilinear(x1, x2, np.asarray(c, dtype=float)) for c in (u1, u2)]
        du = [np.gradient(np.asarray(c, dtype=float), x1, x2) for c in (u1, u2)]
        self._du = [[_Bilinear(x1, x2, g) for g in row] for row in du]
        self._v = _Bilinear(x1, x2, v)
        self._dv = [_Bilinear(x1, x2, dv1), _Bilinear(x1, x2, dv2)]
        self._hv = [[_Bilinear(x1, x2, h11), _Bilinear(x1, x2, h12)],
                    [_Bilinear(x1, x2, h12), _Bilinear(x1, x2, h22)]]

    def u_val(self, x):
        q1, q2 = x[..., 0], x[..., 1]
        return np.stack([f(q1, q2) for f in self._u], axis=-1)

    def v_val(self, x):
        return self._v(x[..., 0], x[..., 1])

    def grad_u(self, x):
        q1, q2 = x[..., 0], x[..., 1]
        return np.stack(
            [np.stack([f(q1, q2) for f in row], axis=-1) for row in self._du], axis=-2
        )

    def grad_v(self, x):
        q1, q2 = x[..., 0], x[..., 1]
        return np.stack([f(q1, q2) for f in self._dv], axis=-1)

    def hess_v(self, x):
        q1, q2 = x[..., 0], x[..., 1]
        return np.stack(
            [np.stack([f(q1, q2) for f in row], axis=-1) for row in self._hv], axis=-2
        )


@dataclass(frozen=True)
class TrigForce:
    """Continuum force density with sine-product components."""

    f1: tuple = ()
    f2: tuple = ()
    f3: tuple = ()
    freq_unit: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "f1", _scale_terms(self.f1, self.freq_unit))
        object.__setattr__(self, "f2", _scale_terms(self.f2, self.freq_unit))
        object.__setattr__(self, "f3", _scale_terms(self.f3, self.freq_unit))

    def __call__(self, x):
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack(
            [_eval_trig(t, x1, x2) for t in (self.f1, self.f2, self.f3)], axis=-1
        )


@dataclass(frozen=True)
class Strains:
    """Pointwise limit strains of a displacement field."""

    G1: np.ndarray       # sym grad u + 1/2 grad v x grad v, (..., 2, 2)
    G2: np.ndarray       # -hess v, (..., 2, 2)
    G3: np.ndarray       # embed(G2) Z_- + d12v M, (..., 3, 8)
    d12v: np.ndarray     # (...)
    grad_v: np.ndarray   # (..., 2)
    v: np.ndarray        # (...)
    u: np.ndarray        # (..., 2)


def strains_at(field, x: np.ndarray) -> Strains:
    x = np.asarray(x, dtype=float)
    gu = field.grad_u(x)
    gv = field.grad_v(x)
    hv = field.hess_v(x)
    G1 = 0.5 * (gu + np.swapaxes(gu, -1, -2)) + 0.5 * gv[..., :, None] * gv[..., None, :]
    G2 = -hv
    d12v = hv[..., 0, 1]
    G3 = embed3(G2) @ ZMINUS + d12v[..., None, None] * M
    return Strains(G1=G1, G2=G2, G3=G3, d12v=d12v, grad_v=gv,
                   v=field.v_val(x), u=field.u_val(x))


@dataclass(frozen=True)
class Quadrature:
    """Midpoint rule on an m x m grid over S = (0, l1) x (0, l2).

    Integration is area * mean, so constants integrate exactly to |S|.
    """

    m: int
    lengths: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("quadrature needs m >= 1")
        if min(self.lengths) <= 0.0:
            raise ValueError("domain lengths must be positive")

    def nodes(self) -> np.ndarray:
        l1, l2 = self.lengths
        x1 = (np.arange(self.m) + 0.5) * (l1 / self.m)
        x2 = (np.arange(self.m) + 0.5) * (l2 / self.m)
        out = np.empty((self.m, self.m, 2))
        out[..., 0] = x1[:, None]
        out[..., 1] = x2[None, :]
        return out

    @property
    def area(self) -> float:
        return self.lengths[0] * self.lengths[1]

    def integrate(self, values: np.ndarray):
        """area * mean over the node axes; trailing axes pass through."""
        values = np.asarray(values, dtype=float)
        if values.shape[:2] != (self.m, self.m):
            raise ValueError(f"values shape {values.shape} does not match the rule")
        out = self.area * np.mean(values, axis=(0, 1))
        return float(out) if out.ndim == 0 else out


def _force_density(strains: Strains, force, x, rstar) -> np.ndarray:
    f = force(x)
    r3 = np.asarray(rstar, dtype=float) @ np.array([0.0, 0.0, 1.0]) if rstar is not None \
        else np.array([0.0, 0.0, 1.0])
    return strains.v * np.einsum("...k,k->...", f, r3)


def e_vk(field, forms: Forms, quad: Quadrature, force=None, rstar=None) -> float:
    """Membrane + bending energy 1/2 Q2(G1) + 1/24 Q2(G2), plus the optional
    force pairing with the deflection."""
    x = quad.nodes()
    s = strains_at(field, x)
    dens = 0.5 * forms.q2(s.G1) + (1.0 / 24.0) * forms.q2(s.G2)
    if force is not None:
        dens = dens + _force_density(s, force, x, rstar)
    return quad.integrate(dens)


def e_vk_nu(field, nu: int, forms: Forms, quad: Quadrature, force=None, rstar=None) -> float:
    """Finite-layer plate energy for nu >= 2 atom layers."""
    if int(nu) != nu or nu < 2:
        raise ValueError(f"nu must be an integer >= 2, got {nu}")
    nu = int(nu)
    x = quad.nodes()
    s = strains_at(field, x)
    den = nu - 1.0
    arg1 = embed3(s.G1) @ Z + s.G3 / (2.0 * den)
    t1 = 0.5 * forms.q_rel(arg1)
    t2 = (nu * (nu - 2.0) / (24.0 * den ** 2)) * forms.q_rel(embed3(s.G2) @ Z)
    arg3 = embed3(s.G1) @ Z1 + (s.d12v / (4.0 * den))[..., None, None] * M1
    t3 = (1.0 / den) * forms.q_surf(arg3)
    t4 = (1.0 / (4.0 * den)) * forms.q_surf(embed3(s.G2) @ Z1)
    dens = t1 + t2 + t3 + t4
    if force is not None:
        dens = dens + (nu / den) * _force_density(s, force, x, rstar)
    return quad.integrate(dens)


def e_vk_nu_decoupled(field, nu: int, forms: Forms, quad: Quadrature) -> float:
    """Finite-layer energy split into the infinite-layer part plus explicit
    surface and frame corrections; valid when the cell laws have the
    layer-swap reflection symmetry measured at form assembly."""
    if not forms.antiplane:
        raise ValueError(
            f"decoupled form needs the reflection symmetry "
            f"(measured defect {forms.antiplane_defect:.3e})"
        )
    if int(nu) != nu or nu < 2:
        raise ValueError(f"nu must be an integer >= 2, got {nu}")
    nu = int(nu)
    x = quad.nodes()
    s = strains_at(field, x)
    den = nu - 1.0
    base = 0.5 * forms.q2(s.G1) + (1.0 / 24.0) * forms.q2(s.G2)
    surf = (1.0 / den) * (forms.q2_surf(s.G1) + 0.25 * forms.q2_surf(s.G2))
    frame = (1.0 / (8.0 * den ** 2)) * (forms.q_rel(s.G3) - (1.0 / 3.0) * forms.q2(s.G2))
    twist = (s.d12v ** 2 / (16.0 * den ** 3)) * forms.q_surf(M1)
    return quad.integrate(base + surf + frame + twist)


def force_limit(field, force, quad: Quadrature, rstar=None, nu: int | None = None) -> float:
    """Limiting force work; the finite-layer variant carries nu/(nu-1)."""
    x = quad.nodes()
    s = strains_at(field, x)
    dens = _force_density(s, force, x, rstar)
    fac = 1.0 if nu is None else nu / (nu - 1.0)
    return fac * quad.integrate(dens)


def coefficient_identities(nu_max: int = 50) -> dict:
    """Exact rational checks of the layer-sum identities entering the
    finite-layer coefficients, plus the frame normalization Z Z^T = 2 Id."""
    if nu_max < 2:
        raise ValueError("need nu_max >= 2")
    rows = []
    ok = True
    for nu in range(2, nu_max + 1):
        lhs = sum(
            Fraction(2 * k - nu, 1) ** 2 for k in range(1, nu)
        ) / Fraction(2 * nu - 2) ** 3
        rhs = Fraction(nu * (nu - 2), 24 * (nu - 1) ** 2)
        linear = sum(Fraction(2 * k - nu, 1) for k in range(1, nu))
        good = (lhs == rhs) and (linear == 0)
        ok = ok and good
        rows.append({
            "nu": nu,
            "layer_sum": str(lhs),
            "closed_form": str(rhs),
            "linear_sum": str(linear),
            "ok": good,
        })
    zq = [[Fraction(1, 2) * s for s in row] for row in [
        [-1, 1, 1, -1, -1, 1, 1, -1],
        [-1, -1, 1, 1, -1, -1, 1, 1],
        [-1, -1, -1, -1, 1, 1, 1, 1],
    ]]
    gram_ok = all(
        sum(zq[a][c] * zq[b][c] for c in range(8)) == (Fraction(2) if a == b else 0)
        for a in range(3) for b in range(3)
    )
    ok = ok and gram_ok
    return {"ok": ok, "gram_ok": gram_ok, "rows": rows}
