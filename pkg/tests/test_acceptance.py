"""Headline acceptance checks, one test per property.

Each test prints a single PASS/FAIL line with the measured quantities so a
full run reads as a checklist; thresholds marked "frozen" were fixed from
independent oracle runs before the implementation was finished.
"""
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from vkfilm.energy import e_total
from vkfilm.harness import minimize_atomistic
from vkfilm.lattice import FilmConfig, Z, Z1
from vkfilm.limits import (
    Quadrature, TrigDisplacement, TrigForce, coefficient_identities, e_vk,
    e_vk_nu, e_vk_nu_decoupled, force_limit,
)
from vkfilm.potentials import (
    MassSpring, PairLaw, PenaltyParams, PenalizedLaw, frame_indifference_defect,
    quadratic_well, quadratic_well_deriv, random_rotations,
)
from vkfilm.quadforms import cell_hessian_of, surf_hessian_of
from vkfilm.recovery import (
    energy_barrier_check, force_term_report, interpolate_and_rigidity,
    scaled_energy_gap, strain_moment_report,
)

SWEEP_CFGS = [FilmConfig(2.0**-m, 3, 2**m, 2**m) for m in range(3, 7)]


def report(capsys, num: int, name: str, ok: bool, detail: str):
    with capsys.disabled():
        print(f"[criterion {num:02d}] {name}: {'PASS' if ok else 'FAIL'} ({detail})")


@pytest.fixture(scope="module")
def sweep(canonical_field, model, forms, unit_quadrature):
    return scaled_energy_gap(canonical_field, SWEEP_CFGS, model, forms,
                             "ultrathin", unit_quadrature, diagnostics=True)


def test_criterion_01_frame_indifference(capsys):
    t0 = time.perf_counter()
    laws = {
        "mass_spring": MassSpring(1.0, 1.0),
        "lj_pair": PairLaw(alpha=1.0, beta=1.0),
        "quadratic_pair": PairLaw(v1=quadratic_well, v2=quadratic_well,
                                  dv1=quadratic_well_deriv, dv2=quadratic_well_deriv),
        "penalized": PenalizedLaw(MassSpring(1.0, 1.0),
                                  PenaltyParams(c=1.0, r0=0.0, r1=0.5)),
    }
    rng = np.random.default_rng(2024)
    worst_frame = max(
        max(frame_indifference_defect(law.cell_energy, Z, rng, n=100),
            frame_indifference_defect(law.surf_energy, Z1, rng, n=100))
        for law in laws.values()
    )
    worst_o3 = 0.0
    flip = np.diag([1.0, 1.0, -1.0])
    for name in ("mass_spring", "lj_pair", "quadratic_pair"):
        law = laws[name]
        G = Z + 0.4 * rng.standard_normal((100, 3, 8))
        Q = random_rotations(rng, 100)
        Q[50:] = Q[50:] @ flip  # improper half
        base = law.cell_energy(G)
        moved = law.cell_energy(np.einsum("nab,nbc->nac", Q, G))
        worst_o3 = max(worst_o3, float(np.max(np.abs(moved - base) / (1.0 + np.abs(base)))))
    dt = time.perf_counter() - t0
    ok = worst_frame <= 1e-10 and worst_o3 <= 1e-10 and dt < 1.0
    report(capsys, 1, "frame indifference / O(3) symmetry", ok,
           f"frame {worst_frame:.2e}, O(3) {worst_o3:.2e}, {dt:.2f} s")
    assert worst_frame <= 1e-10
    assert worst_o3 <= 1e-10
    assert dt < 1.0


def test_criterion_02_quadratic_null_space(capsys, forms, rng):
    skews = [np.array([[0.0, -1, 0], [1, 0, 0], [0, 0, 0]]),
             np.array([[0.0, 0, -1], [0, 0, 0], [1, 0, 0]]),
             np.array([[0.0, 0, 0], [0, 0, -1], [0, 1, 0]])]
    worst = 0.0
    ones = np.ones(8)
    for S in skews:
        for _ in range(20):
            c = rng.standard_normal(3)
            arg = S @ Z + np.outer(c, ones)
            worst = max(worst, abs(float(forms.q_cell(arg))))
    mix = sum(rng.standard_normal() * S for S in skews) @ Z \
        + np.outer(rng.standard_normal(3), ones)
    worst = max(worst, abs(float(forms.q_cell(mix))))
    tol = 1e-8 * forms.q_cell.norm
    ok = worst <= tol
    report(capsys, 2, "cell-form null space", ok, f"worst {worst:.2e} vs {tol:.2e}")
    assert worst <= tol


def test_criterion_03_relaxation(capsys, forms, rng):
    solver = forms.solver
    A = rng.standard_normal((30, 3, 8))
    B = rng.standard_normal((30, 3, 8))
    t = rng.standard_normal((30, 1))
    lin = np.max(np.abs(solver.b(A + t[..., None] * B)
                        - solver.b(A) - t * solver.b(B)))
    variants = np.max(np.abs(solver.b(A) - solver.b_sym(A)))
    worst_gap = -np.inf
    for a in A[:5]:
        best = float(solver.q_rel(a))
        comp = solver.b(a) + rng.standard_normal((1000, 3)) * rng.uniform(0.01, 10, (1000, 1))
        vals = solver.q_cell(a + solver.correction(comp))
        worst_gap = max(worst_gap, float(np.max(best - vals)))
    ok = lin <= 1e-9 and variants <= 1e-9 and worst_gap <= 1e-12
    report(capsys, 3, "vertical relaxation", ok,
           f"linearity {lin:.2e}, variants {variants:.2e}, minimality gap {worst_gap:.2e}")
    assert lin <= 1e-9
    assert variants <= 1e-9
    assert worst_gap <= 1e-12  # no competitor beats b(A)


def test_criterion_04_hessian_oracle(capsys):
    ms = MassSpring(1.3, 0.7)
    rel_cell = np.linalg.norm(cell_hessian_of(ms, "fd") - cell_hessian_of(ms, "analytic"), 2) \
        / np.linalg.norm(cell_hessian_of(ms, "analytic"), 2)
    rel_surf = np.linalg.norm(surf_hessian_of(ms, "fd") - surf_hessian_of(ms, "analytic"), 2) \
        / np.linalg.norm(surf_hessian_of(ms, "analytic"), 2)
    quad = PairLaw(v1=quadratic_well, v2=quadratic_well, dv1=quadratic_well_deriv,
                   dv2=quadratic_well_deriv, alpha=1.3, beta=0.7)
    rel_pair = np.linalg.norm(cell_hessian_of(quad, "fd") - cell_hessian_of(ms, "analytic"), 2) \
        / np.linalg.norm(cell_hessian_of(ms, "analytic"), 2)
    ok = rel_cell <= 1e-6 and rel_surf <= 1e-6 and rel_pair <= 1e-8
    report(capsys, 4, "Hessian assembly oracle", ok,
           f"fd-vs-analytic {max(rel_cell, rel_surf):.2e}, quadratic pair {rel_pair:.2e}")
    assert rel_cell <= 1e-6
    assert rel_surf <= 1e-6
    assert rel_pair <= 1e-8


def test_criterion_05_coefficient_identities(capsys):
    out = coefficient_identities(50)
    row3 = out["rows"][1]
    ok = out["ok"] and out["gram_ok"] and Fraction(row3["closed_form"]) == Fraction(1, 32)
    report(capsys, 5, "layer-sum identities nu=2..50", ok,
           f"all exact, nu=3 value {row3['closed_form']}")
    assert out["ok"]
    assert Fraction(row3["closed_form"]) == Fraction(1, 32)


def test_criterion_06_finite_nu_limsup(capsys, sweep):
    gaps = [r.gap_abs for r in sweep]
    hs = [r.h for r in sweep]
    slope = float(np.polyfit(np.log(hs[1:]), np.log(gaps[1:]), 1)[0])
    finest_wall = sweep[-1].wall_ms / 1e3
    ok = all(b < a for a, b in zip(gaps[1:], gaps[2:])) and slope >= 0.9 \
        and gaps[-1] <= 0.20 and finest_wall < 60.0
    report(capsys, 6, "fixed-layer energy convergence", ok,
           f"gaps {', '.join('%.3g' % g for g in gaps)}, slope {slope:.3f}, "
           f"finest level {finest_wall:.1f} s")
    assert all(b < a for a, b in zip(gaps[1:], gaps[2:]))  # monotone after level 1
    assert slope >= 0.9
    assert gaps[-1] <= 0.20  # frozen: oracle 0.131 * 1.5
    assert finest_wall < 60.0


def test_criterion_07_growing_nu_limsup(capsys, canonical_field, model, forms,
                                        unit_quadrature):
    cfgs = [FilmConfig(4.0**-m, 2**m, 4**m, 4**m) for m in range(2, 6)]
    rows = scaled_energy_gap(canonical_field, cfgs, model, forms, "thin",
                             unit_quadrature, threads=1)
    rels = [r.gap_rel for r in rows]
    ok = all(b < a for a, b in zip(rels, rels[1:])) and rels[-1] <= 0.112
    report(capsys, 7, "growing-layer energy convergence", ok,
           f"relative gaps {', '.join('%.4f' % g for g in rels)}")
    assert all(b < a for a, b in zip(rels, rels[1:]))
    assert rels[-1] <= 0.112  # frozen: extrapolated asymptote 0.0741 * 1.5


def test_criterion_08_force_factor(capsys, canonical_field, forms, unit_quadrature):
    profile = TrigForce(f3=((1.0, 1, 1, 0.0, 0.0), (-9.0, 3, 3, 0.0, 0.0)),
                        freq_unit=math.pi)
    ratios = {}
    discrete2 = None
    for nu in (2, 10):
        cfg = FilmConfig(1.0 / 64.0, nu, 64, 64)
        out = force_term_report(canonical_field, cfg, "ultrathin", forms,
                                profile, unit_quadrature)
        ratios[nu] = out["ratio"]
        if nu == 2:
            discrete2 = out["discrete"]
    base = force_limit(canonical_field, profile, unit_quadrature)
    double = discrete2 / (2.0 * base)
    ok = all(abs(r - 1.0) <= 0.02 for r in ratios.values()) and abs(double - 1.0) <= 0.02
    report(capsys, 8, "body-force layer factor", ok,
           f"nu=2 ratio {ratios[2]:.4f}, nu=10 ratio {ratios[10]:.4f}, "
           f"doubling {double:.4f}")
    for nu, r in ratios.items():
        assert abs(r - 1.0) <= 0.02
    assert abs(double - 1.0) <= 0.02


def test_criterion_09_strain_moments(capsys, canonical_field, forms, unit_quadrature):
    rows = strain_moment_report(canonical_field, SWEEP_CFGS, forms, "ultrathin",
                                unit_quadrature)
    gaps = [r["moment_gap"] for r in rows]
    hs = [r["h"] for r in rows]
    slope = float(np.polyfit(np.log(hs), np.log(gaps), 1)[0])
    ok = all(b < a for a, b in zip(gaps, gaps[1:])) and slope >= 0.9
    report(capsys, 9, "limit-strain moments", ok,
           f"gaps {', '.join('%.3g' % g for g in gaps)}, slope {slope:.3f}")
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert slope >= 0.9


def test_criterion_10_rigidity_diagnostics(capsys, sweep):
    i4 = [r.i_over_h4 for r in sweep]
    spread = max(i4) / min(i4)
    cfg = FilmConfig(0.125, 3, 8, 8)
    x = cfg.node_positions()
    pert = np.zeros_like(x)
    pert[..., 2] = np.sin(math.pi * x[..., 0]) * np.sin(math.pi * x[..., 1])
    pert[..., 0] = 0.3 * np.sin(math.pi * x[..., 1]) * x[..., 2]
    ts = (1e-1, 1e-2, 1e-3)
    ivals = [interpolate_and_rigidity(x + t * pert, cfg)["i_value"] for t in ts]
    expo = float(np.polyfit(np.log(ts), np.log(ivals), 1)[0])
    ok = spread <= 10.0 and 1.9 <= expo <= 2.1
    report(capsys, 10, "rigidity functional", ok,
           f"I/h^4 spread {spread:.3f}, small-defect exponent {expo:.4f}")
    assert spread <= 10.0
    assert 1.9 <= expo <= 2.1


def test_criterion_11_antiplane_decoupling(capsys, forms, unit_quadrature):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(10):
        def terms(n):
            return tuple(
                (rng.uniform(-0.5, 0.5), rng.integers(1, 4), rng.integers(1, 4),
                 rng.uniform(0, 2 * math.pi), rng.uniform(0, 2 * math.pi))
                for _ in range(n))
        field = TrigDisplacement(u1=terms(1), u2=terms(1), v=terms(2),
                                 freq_unit=math.pi)
        for nu in (2, 3, 5):
            a = e_vk_nu(field, nu, forms, unit_quadrature)
            b = e_vk_nu_decoupled(field, nu, forms, unit_quadrature)
            worst = max(worst, abs(a - b) / max(abs(a), 1e-12))
    ok = worst <= 1e-8
    report(capsys, 11, "antiplane decoupling", ok, f"worst relative gap {worst:.2e}")
    assert worst <= 1e-8


def test_criterion_12_energy_barrier(capsys, canonical_field, forms):
    out = energy_barrier_check(canonical_field, SWEEP_CFGS, 0.1, forms, "ultrathin")
    dists = [r["max_dist"] for r in out["rows"]]
    ok = out["slope"] >= 1.8 and out["first_inside_half"] is not None \
        and out["first_inside_half"] <= 2
    report(capsys, 12, "rigidity barrier decay", ok,
           f"max dist {', '.join('%.3g' % d for d in dists)}, "
           f"slope {out['slope']:.3f}, inside delta/2 at level {out['first_inside_half']}")
    assert out["slope"] >= 1.8
    assert out["first_inside_half"] is not None
    assert out["first_inside_half"] <= 2  # counted from zero


def test_criterion_13_minimizer_sanity(capsys, model):
    cfg = FilmConfig(0.125, 2, 8, 8)
    rng = np.random.default_rng(7)
    w0 = cfg.node_positions() + 0.01 * cfg.epsilon * rng.standard_normal(cfg.node_shape + (3,))
    e0 = e_total(w0, cfg, model)
    res = minimize_atomistic(w0, cfg, model, iterations=500, gtol=1e-14)
    energies = [t["energy"] for t in res.trace]
    monotone = all(b < a for a, b in zip(energies, energies[1:]))
    ratio = energies[-1] / e0
    ok = (not res.failed) and monotone and ratio <= 1e-8
    report(capsys, 13, "descent to the ground state", ok,
           f"E/E_0 {ratio:.2e} after {len(energies) - 1} iterations, monotone {monotone}")
    assert not res.failed
    assert monotone
    assert ratio <= 1e-8
