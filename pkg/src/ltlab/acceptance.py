"""The twelve acceptance criteria as plain functions.

Each ``criterion_k()`` returns a :class:`CriterionResult`; :func:`run_all`
runs them in order and prints one ``PASS``/``FAIL`` line each.  The same
functions back ``ltlab verify`` and ``tests/test_acceptance.py``.
"""

from __future__ import annotations

import math
import sys
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, TextIO

import numpy as np

from .birman_schwinger import (
    SpherePotentialSpec,
    count_mu_above,
    inversion_transform,
    mu_spectrum,
    sobolev_potential,
    sphere_potential,
)
from .functional import riesz_ratio
from .grid import Grid1D, PotentialField, RadialGrid
from .kdv import SolitonSpec, exact_spectrum, manifold_distance, normalize_to_manifold, soliton_profile
from .schrodinger import lowest_eigenpairs, negative_count
from .scf import ScfConfig, binding_correction, euler_lagrange_map, gap_check, normalize, run

__all__ = ["CriterionResult", "CRITERIA", "QUICK", "run_all", "run_criterion"]

THREE_SIXTEENTHS = 3.0 / 16.0


@dataclass
class CriterionResult:
    """Outcome of one acceptance criterion."""

    number: int
    title: str
    passed: bool
    detail: str
    metrics: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number:2d} ({self.title}): {self.detail} [{self.seconds:.1f} s]"

    def to_dict(self) -> dict:
        return {
            "number": self.number,
            "title": self.title,
            "passed": self.passed,
            "detail": self.detail,
            "metrics": self.metrics,
            "seconds": self.seconds,
        }


def _bump_sum(x: np.ndarray, rng: np.random.Generator, k: int, amp, centre, width, compact: bool) -> np.ndarray:
    v = np.zeros_like(x)
    for _ in range(k):
        a, c, w = rng.uniform(*amp), rng.uniform(*centre), rng.uniform(*width)
        if compact:
            v += a * np.clip(1.0 - ((x - c) / w) ** 2, 0.0, None) ** 3
        else:
            v += a * np.exp(-0.5 * ((x - c) / w) ** 2)
    return v


# -- criteria ----------------------------------------------------------------


def criterion_1() -> CriterionResult:
    """Eigenvalues of the 3-soliton beta = (0.9, 0.6, 0.3) and their convergence order."""
    spec = SolitonSpec((0.9, 0.6, 0.3))
    exact = exact_spectrum(spec)
    t0 = time.perf_counter()
    errors = {}
    hs = {}
    for n in (2047, 4095, 8191, 8192):
        g = Grid1D(-60.0, 60.0, n)
        lam = lowest_eigenpairs(soliton_profile(spec, g), 3).eigenvalues
        errors[n] = np.abs(lam - exact)
        hs[n] = g.h
    seconds = time.perf_counter() - t0
    main_err = float(errors[8192].max())
    orders = []
    seq = (2047, 4095, 8191)
    for a, b in zip(seq, seq[1:]):
        orders.append(np.log(errors[a] / errors[b]) / np.log(hs[a] / hs[b]))
    min_order = float(np.min(orders))
    passed = main_err <= 1e-4 and min_order >= 1.9 and seconds < 30.0
    return CriterionResult(
        1, "soliton spectrum oracle", passed,
        f"max |dlambda| = {main_err:.2e} (tol 1e-4), min observed order {min_order:.3f} (>= 1.9), "
        f"{seconds:.1f} s (< 30 s)",
        {"max_abs_error": main_err, "min_order": min_order, "solve_seconds": seconds},
    )


def criterion_2() -> CriterionResult:
    """The gamma = 3/2 quotient of random m-solitons, m = 1..4, is 3/16."""
    rng = np.random.default_rng(2024)
    g = Grid1D(-60.0, 60.0, 8192)
    worst = 0.0
    cases = 0
    for m in range(1, 5):
        for _ in range(3):
            while True:
                betas = np.sort(rng.uniform(0.2, 1.0, m))[::-1]
                if m == 1 or np.min(-np.diff(betas)) > 0.05:
                    break
            shifts = rng.uniform(-5.0, 5.0, m)
            V = soliton_profile(SolitonSpec(tuple(betas), tuple(shifts)), g)
            ratio = riesz_ratio(V, 1.5, m).ratio
            worst = max(worst, abs(ratio - THREE_SIXTEENTHS))
            cases += 1
    return CriterionResult(
        2, "gamma = 3/2 identity", worst <= 1e-4,
        f"{cases} solitons, max |ratio - 3/16| = {worst:.2e} (tol 1e-4)",
        {"max_deviation": worst, "cases": cases},
    )


def criterion_3() -> CriterionResult:
    """Random compact bumps stay strictly below 3/16 unless close to a soliton."""
    rng = np.random.default_rng(3)
    g = Grid1D(-40.0, 40.0, 4095)
    x = g.nodes
    thr = THREE_SIXTEENTHS - 1e-4
    max_ratio = 0.0
    violations = 0
    near = 0
    for _ in range(100):
        k = int(rng.integers(1, 3))
        V = PotentialField(g, _bump_sum(x, rng, k, (0.2, 2.0), (-3.0, 3.0), (1.0, 4.0), compact=True))
        n = max(1, negative_count(V))
        ratio = riesz_ratio(V, 1.5, n).ratio
        max_ratio = max(max_ratio, ratio)
        if ratio >= thr:
            near += 1
            if manifold_distance(normalize(V, 2.0), n).l2_distance > 1e-2:
                violations += 1
    return CriterionResult(
        3, "strict inequality off the manifold", violations == 0,
        f"100 bumps, max ratio {max_ratio:.6f}, {near} at or above 3/16 - 1e-4, {violations} of them "
        f"farther than 1e-2 from the manifold",
        {"max_ratio": max_ratio, "near": near, "violations": violations},
    )


def criterion_4() -> CriterionResult:
    """SCF from a Gaussian recovers the normalized 1-soliton."""
    res = run(ScfConfig(gamma=1.5, dim=1, n_states=1))
    fit = manifold_distance(res.V_star, 1)
    lam1 = float(res.spectrum.eigenvalues[0])
    predicted = 2.0 * math.sqrt(-lam1)
    decay_err = abs(res.decay_rate_fit - predicted) / predicted
    gap_ok = gap_check(res)
    passed = (
        res.converged and abs(res.L_estimate - THREE_SIXTEENTHS) <= 1e-4
        and fit.l2_distance <= 1e-3 and gap_ok and decay_err <= 0.1
    )
    return CriterionResult(
        4, "SCF recovers the 1-bubble", passed,
        f"L = {res.L_estimate:.8f}, distance to M^1 {fit.l2_distance:.1e}, gap ok {gap_ok}, "
        f"decay {res.decay_rate_fit:.4f} vs 2 sqrt|lambda_1| = {predicted:.4f} ({100 * decay_err:.2f}%)",
        {"L_estimate": res.L_estimate, "distance": fit.l2_distance, "decay_rel_error": decay_err,
         "iterations": res.iterations},
    )


def criterion_5() -> CriterionResult:
    """SCF with N = 2 from two bumps lands on the closure of the 2-soliton manifold."""
    res = run(ScfConfig(gamma=1.5, dim=1, n_states=2, init="bumps:2:6", tol_fixed_point=1e-5))
    fit = manifold_distance(res.V_star, 2)
    ratio = riesz_ratio(res.V_star, 1.5, 2, spectrum=res.spectrum).ratio
    passed = res.converged and fit.l2_distance <= 1e-2 and abs(ratio - THREE_SIXTEENTHS) <= 1e-3
    return CriterionResult(
        5, "SCF N=2 at gamma=3/2", passed,
        f"converged {res.converged} in {res.iterations} iterations, distance to M^<=2 {fit.l2_distance:.1e} "
        f"(order {fit.order}), ratio {ratio:.6f}",
        {"distance": fit.l2_distance, "ratio": ratio, "order": fit.order},
    )


def criterion_6() -> CriterionResult:
    """gamma = 2, d = 1: two levels bind, and the two-copy trial state shows it."""
    base = dict(gamma=2.0, dim=1, grid_n=8191, box=60.0)
    r1 = run(ScfConfig(n_states=1, tol_fixed_point=1e-10, **base))
    r2 = run(ScfConfig(n_states=2, init="bumps:2:6", **base))
    diff = r2.L_estimate - r1.L_estimate
    bc = binding_correction(r1.V_star, 2.0, 1, 15.0)
    passed = r1.converged and r2.converged and diff > 1e-4 and bc.A_R > 0 and bc.trial_ratio > r1.L_estimate
    return CriterionResult(
        6, "binding regime", passed,
        f"L(1) = {r1.L_estimate:.8f}, L(2) = {r2.L_estimate:.8f} (diff {diff:.2e}); R = {bc.R:g}: "
        f"A_R = {bc.A_R:.2e}, trial {bc.trial_ratio:.8f}",
        {"L1": r1.L_estimate, "L2": r2.L_estimate, "A_R": bc.A_R, "trial_ratio": bc.trial_ratio},
    )


def criterion_7() -> CriterionResult:
    """Normalized 1- and 2-solitons are fixed points of the Euler-Lagrange map."""
    g = Grid1D(-60.0, 60.0, 8192)
    specs = [
        normalize_to_manifold(SolitonSpec((1.0,))),
        normalize_to_manifold(SolitonSpec((0.8, 0.5), (-2.0, 3.0))),
    ]
    errs = []
    for spec in specs:
        V = soliton_profile(spec, g)
        image = euler_lagrange_map(V, 1.5, spec.order, THREE_SIXTEENTHS)
        diff = np.sqrt(np.dot(g.weights, (image.values - V.values) ** 2))
        errs.append(float(diff / np.sqrt(np.dot(g.weights, V.values ** 2))))
    worst = max(errs)
    return CriterionResult(
        7, "Euler-Lagrange fixed point", worst <= 1e-5,
        f"relative L2 error 1-soliton {errs[0]:.1e}, 2-soliton {errs[1]:.1e} (tol 1e-5)",
        {"errors": errs},
    )


def criterion_8() -> CriterionResult:
    """Sphere potentials in d = 3: mu = 1 with multiplicity 4 for V_1; mu = (1, 0.2) for Sobolev."""
    g = RadialGrid(200.0, 16384, 3)
    V1, _ = sphere_potential(SpherePotentialSpec(1, 3), g)
    r1 = mu_spectrum(V1, 6)
    mult = r1.level_multiplicity(1.0, tol=1e-3)
    has_l1 = any(c.l == 1 and abs(c.value - 1.0) <= 1e-3 for c in r1.channels)
    rs = mu_spectrum(sobolev_potential(g), 2)
    mu1, mu2 = float(rs.mus[0]), float(rs.mus[1])
    passed = has_l1 and mult == 4 and abs(mu1 - 1.0) <= 1e-3 and abs(mu2 - 0.2) <= 1e-3
    return CriterionResult(
        8, "CLR sphere potentials", passed,
        f"V_1: multiplicity of mu = 1 is {mult} (l = 1 level present: {has_l1}); "
        f"Sobolev: mu_1 = {mu1:.6f}, mu_2 = {mu2:.6f}",
        {"multiplicity": mult, "mu1_sobolev": mu1, "mu2_sobolev": mu2,
         "v1_mus": [float(m) for m in r1.mus]},
    )


def criterion_9() -> CriterionResult:
    """d = 7: N = 9 estimate from V_1 over the Sobolev N = 1 value is 5^3.5 / 9^2.5."""
    g = RadialGrid(200.0, 16384, 7)
    V1, _ = sphere_potential(SpherePotentialSpec(1, 7), g)
    est9 = mu_spectrum(V1, 9).ell_estimates[9]
    est1 = mu_spectrum(sobolev_potential(g), 1).ell_estimates[1]
    gain = est9 / est1
    target = 5.0 ** 3.5 / 9.0 ** 2.5
    rel = abs(gain - target) / target
    return CriterionResult(
        9, "d=7 strict gain", rel <= 0.01,
        f"gain {gain:.6f} vs {target:.6f} (rel. error {rel:.1e}, tol 1e-2)",
        {"gain": gain, "target": target},
    )


def criterion_10() -> CriterionResult:
    """Birman-Schwinger values are invariant under inversion; the Sobolev potential is fixed."""
    rng = np.random.default_rng(10)
    g = RadialGrid(50.0, 32767, 3)
    r = g.nodes
    V = PotentialField(g, _bump_sum(r, rng, 1, (2.0, 8.0), (0.8, 2.0), (0.3, 0.8), compact=False))
    W = inversion_transform(V).field
    a = mu_spectrum(V, 3).mus
    b = mu_spectrum(W, 3).mus
    mu_rel = float(np.max(np.abs(a - b) / a))
    gs = RadialGrid(200.0, 16384, 3)
    S = sobolev_potential(gs)
    inv = inversion_transform(S)
    fixed = float(np.max(np.abs(inv.field.values - S.values)[inv.valid]) / S.values.max())
    passed = mu_rel <= 1e-3 and fixed <= 1e-3
    return CriterionResult(
        10, "inversion invariance", passed,
        f"max rel. change of mu_1..3 {mu_rel:.1e} (tol 1e-3); Sobolev fixed point sup error "
        f"{fixed:.1e} of max V",
        {"mu_rel_change": mu_rel, "sobolev_fixed_error": fixed},
    )


def criterion_11() -> CriterionResult:
    """#{mu_j > 1 + 1e-6} equals the number of bound states for 20 radial bumps."""
    rng = np.random.default_rng(11)
    g = RadialGrid(30.0, 4000, 3)
    r = g.nodes
    mismatches = []
    counts = []
    for i in range(20):
        k = int(rng.integers(1, 3))
        V = PotentialField(g, _bump_sum(r, rng, k, (1.0, 8.0), (0.0, 4.0), (0.3, 1.5), compact=False))
        bs = count_mu_above(V, 1.0 + 1e-6)
        direct = negative_count(V)
        counts.append(direct)
        if bs != direct:
            mismatches.append((i, bs, direct))
    return CriterionResult(
        11, "Birman-Schwinger principle", not mismatches,
        f"20 bumps, bound-state counts {min(counts)}..{max(counts)}, mismatches: {mismatches or 'none'}",
        {"counts": counts, "mismatches": mismatches},
    )


def criterion_12() -> CriterionResult:
    """Two far copies of a bump have the doubled single-bump spectrum."""
    g = Grid1D(-80.0, 80.0, 7999)  # h = 0.02, so +-R/2 are grid nodes
    x = g.nodes

    def bump(c):
        return 3.0 * np.clip(1.0 - ((x - c) / 2.5) ** 2, 0.0, None) ** 2

    single = PotentialField(g, bump(0.0))
    N = negative_count(single)
    doubled = np.sort(np.repeat(lowest_eigenpairs(single, N).eigenvalues, 2))
    errs = {}
    for R in (30.0, 60.0):
        lam = lowest_eigenpairs(PotentialField(g, bump(-R / 2) + bump(R / 2)), 2 * N).eigenvalues
        errs[R] = float(np.max(np.abs(lam - doubled)))
    passed = N >= 1 and errs[60.0] <= 0.5 * errs[30.0]
    return CriterionResult(
        12, "dichotomy decoupling", passed,
        f"N = {N}, error at R=30: {errs[30.0]:.2e}, at R=60: {errs[60.0]:.2e} (must at least halve)",
        {"N": N, "errors": {str(k): v for k, v in errs.items()}},
    )


CRITERIA: dict[int, Callable[[], CriterionResult]] = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5, 6: criterion_6,
    7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10, 11: criterion_11, 12: criterion_12,
}

#: Criteria making up the sub-minute ``--quick`` subset.
QUICK = (1, 2, 3, 4, 7, 8, 9, 10, 12)


def run_criterion(number: int) -> CriterionResult:
    """Run one criterion, timing it and turning exceptions into failures."""
    t0 = time.perf_counter()
    try:
        res = CRITERIA[number]()
    except Exception as exc:  # a crash is a failed criterion, reported with its cause
        res = CriterionResult(number, CRITERIA[number].__doc__.strip().rstrip("."), False,
                              f"raised {type(exc).__name__}: {exc}")
    res.seconds = time.perf_counter() - t0
    return res


def run_all(quick: bool = False, stream: Optional[TextIO] = None) -> list[CriterionResult]:
    """Run all criteria (or the quick subset), printing one line per criterion."""
    stream = sys.stdout if stream is None else stream
    numbers = QUICK if quick else tuple(CRITERIA)
    results = []
    for k in numbers:
        res = run_criterion(k)
        print(res.line(), file=stream, flush=True)
        results.append(res)
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed", file=stream, flush=True)
    return results
