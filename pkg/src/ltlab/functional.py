"""The Lieb–Thirring quotient and its one-level reference value.

For a potential ``V >= 0`` the finite-rank quotient is

.. math::  \\frac{\\sum_{j \\le N} |\\lambda_j(-\\Delta - V)|^\\gamma}{\\int V^{\\gamma + d/2}},

whose supremum over ``V`` is the constant ``L^(N)_{gamma,d}``.  For ``N = 1``
duality with the Gagliardo–Nirenberg–Sobolev inequality gives a closed
expression in terms of the optimal GNS constant, computed here by a direct
maximization over radial profiles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np
from scipy.linalg import solveh_banded

from .errors import DegenerateInputError, InvalidInputError, NumericalFailureError
from .grid import Grid1D, PotentialField, lp_norm_power, sphere_area
from .schrodinger import SpectrumResult, lowest_eigenpairs

__all__ = [
    "RieszReport",
    "check_gamma",
    "riesz_ratio",
    "riesz_sum",
    "gns_exponent",
    "gns_reference_L1",
    "subadditivity_check",
]


def check_gamma(gamma: float, dim: int, allow_zero: bool = False) -> None:
    """Reject exponents outside the admissible range.

    Admissible means ``gamma > 1/2`` for ``d = 1``, ``gamma > 0`` for ``d = 2``
    and ``gamma >= 0`` for ``d >= 3``.  The value ``gamma = 0`` is only
    accepted with ``allow_zero=True`` (it belongs to the Birman–Schwinger
    solver).
    """
    if int(dim) != dim or dim < 1:
        raise InvalidInputError(f"dimension must be a positive integer, got {dim}")
    if not math.isfinite(gamma):
        raise InvalidInputError(f"gamma must be finite, got {gamma}")
    if dim == 1 and not gamma > 0.5:
        raise InvalidInputError(f"gamma must exceed 1/2 in dimension 1, got {gamma}")
    if dim == 2 and not gamma > 0:
        raise InvalidInputError(f"gamma must be positive in dimension 2, got {gamma}")
    if dim >= 3:
        if gamma < 0:
            raise InvalidInputError(f"gamma must be nonnegative, got {gamma}")
        if gamma == 0 and not allow_zero:
            raise InvalidInputError("gamma = 0 is the critical case; use the Birman-Schwinger solver")


@dataclass(frozen=True)
class RieszReport:
    """Riesz sum, norm power and their quotient for one potential."""

    gamma: float
    dim: int
    n_states: int
    riesz_sum: float
    norm_power: float
    ratio: float
    eigenvalues: tuple
    negative_count: int

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "dim": self.dim,
            "n_states": self.n_states,
            "riesz_sum": self.riesz_sum,
            "norm_power": self.norm_power,
            "ratio": self.ratio,
            "eigenvalues": list(self.eigenvalues),
            "negative_count": self.negative_count,
        }

    def ledger_row(self) -> dict:
        return {
            "gamma": self.gamma,
            "dim": self.dim,
            "N": self.n_states,
            "ratio": self.ratio,
            "norm_power": self.norm_power,
            "neg_count": self.negative_count,
        }


def riesz_sum(eigenvalues, gamma: float, n_states: int) -> float:
    """``sum_{j <= N} |lambda_j|^gamma`` over the negative entries of ``eigenvalues``."""
    lam = np.asarray(eigenvalues, dtype=float)[:n_states]
    lam = lam[lam < 0]
    return float(np.sum((-lam) ** gamma))


def riesz_ratio(
    V: PotentialField,
    gamma: float,
    n_states: int,
    spectrum: Optional[SpectrumResult] = None,
) -> RieszReport:
    """Evaluate the finite-rank Lieb–Thirring quotient of ``V``.

    Parameters
    ----------
    V : PotentialField
    gamma : float
        Riesz exponent; must be admissible for the grid dimension and ``> 0``.
    n_states : int
        Number ``N`` of levels in the sum (missing levels count as 0).
    spectrum : SpectrumResult, optional
        Precomputed levels of ``V`` with at least ``n_states`` entries.

    Returns
    -------
    RieszReport

    Raises
    ------
    DegenerateInputError
        If ``int V^{gamma+d/2} = 0``.
    """
    d = V.grid.dim
    check_gamma(gamma, d)
    if int(n_states) != n_states or n_states < 1:
        raise InvalidInputError(f"n_states must be a positive integer, got {n_states}")
    n_states = int(n_states)
    norm = lp_norm_power(V, gamma + d / 2.0)
    if norm == 0.0:
        raise DegenerateInputError("the quotient is undefined for the zero potential")
    if spectrum is None or spectrum.count < n_states:
        spectrum = lowest_eigenpairs(V, n_states)
    lam = spectrum.eigenvalues[:n_states]
    s = riesz_sum(lam, gamma, n_states)
    return RieszReport(
        gamma=float(gamma),
        dim=int(d),
        n_states=n_states,
        riesz_sum=s,
        norm_power=norm,
        ratio=s / norm,
        eigenvalues=tuple(float(v) for v in lam),
        negative_count=int(spectrum.negative_count),
    )


def gns_exponent(gamma: float, dim: int) -> float:
    """GNS exponent ``p = (2d + 4 gamma)/(d - 2 + 2 gamma)`` dual to ``(gamma, d)``."""
    return (2.0 * dim + 4.0 * gamma) / (dim - 2.0 + 2.0 * gamma)


def _gns_grid(gamma: float, dim: int):
    """Box radius and node count for the GNS ground state.

    The ground state decays like ``exp(-r)`` but has a core of width about
    ``2/(p - 2)``, which becomes narrow as ``p`` grows (``gamma -> 1/2`` in
    ``d = 1``, ``gamma -> 0`` in ``d = 2``).  The grid keeps at least ~80 cells
    across the core; coarser grids make the discrete quotient creep upwards
    and the ascent never meets its tolerance.
    """
    p = gns_exponent(gamma, dim)
    r_max = 30.0 if dim == 1 else 40.0
    n0 = 6000 if dim == 1 else 8000
    n = min(max(n0, int(math.ceil(40.0 * r_max * (p - 2.0)))), 400_000)
    return r_max, n


def gns_reference_L1(
    gamma: float,
    dim: int,
    r_max: float | None = None,
    n: int | None = None,
    tol: float = 1e-10,
    max_iter: int = 2000,
) -> float:
    """One-level constant ``L^(1)_{gamma,d}`` from the optimal GNS constant.

    With ``p = (2d + 4 gamma)/(d - 2 + 2 gamma)`` let

    .. math:: J(u) = \\frac{\\left(\\int |u|^p\\right)^{4/(d(p-2))}}
              {\\int |\\nabla u|^2 \\,\\left(\\int u^2\\right)^{(2d - (d-2)p)/(d(p-2))}},

    which is invariant under ``u -> a u(b x)``, and ``C = sup J``.  Then
    ``L1 = (2g/(2g+d))^{g+d/2} (d/(2g))^{d/2} C^{d/2}`` with ``g = gamma``.

    ``C = max J`` is computed over radial profiles on a cell-centred grid of
    ``[0, r_max]`` (Dirichlet at ``r_max``) by preconditioned projected
    gradient ascent on ``log J`` with Armijo backtracking.  The preconditioner
    is the discrete ``-Laplacian + mass`` operator, i.e. the gradient is taken
    in ``H^1``; this removes the grid-size stiffness of the plain gradient.

    Raises
    ------
    NumericalFailureError
        If the relative change of ``J`` (the change of ``log J``) does not fall below ``tol`` within
        ``max_iter`` steps.
    """
    check_gamma(gamma, dim)
    d = int(dim)
    p = gns_exponent(gamma, d)
    if d >= 3 and p >= 2.0 * d / (d - 2.0):
        raise InvalidInputError("the GNS problem is critical for this gamma")
    R0, n0 = _gns_grid(gamma, d)
    R = float(r_max or R0)
    n = int(n or n0)
    # exponents of the scale-invariant quotient J = P^e_p / (M^e_m * E)
    e_p = 4.0 / (d * (p - 2.0))
    e_m = ((2.0 - d) * p + 2.0 * d) / (d * (p - 2.0))

    h = R / n
    r = (np.arange(1, n + 1) - 0.5) * h
    S = sphere_area(d - 1) if d >= 2 else 2.0
    w = S * r ** (d - 1) * h
    faces = np.arange(1, n + 1) * h
    c = S * faces ** (d - 1) / h
    k_diag = c.copy()
    k_diag[1:] += c[:-1]
    k_off = -c[:-1]

    def K(u):
        out = k_diag * u
        out[:-1] += k_off * u[1:]
        out[1:] += k_off * u[:-1]
        return out

    def log_j(u):
        P = w @ u ** p
        M = w @ u ** 2
        E = u @ K(u)
        return e_p * math.log(P) - e_m * math.log(M) - math.log(E), P, M, E

    u = np.exp(-0.5 * r ** 2)
    u /= math.sqrt(w @ u ** 2)
    f, P, M, E = log_j(u)
    ab = np.zeros((2, n))
    ab[0, 1:] = k_off
    change = math.inf
    for it in range(max_iter):
        g = e_p * p * w * u ** (p - 1) / P - e_m * 2.0 * w * u / M - 2.0 * K(u) / E
        ab[1] = k_diag + (E / M) * w
        direction = solveh_banded(ab, g) * E
        slope = float(g @ direction)
        t = 1.0
        while True:
            un = np.maximum(u + t * direction, 0.0)
            un /= math.sqrt(w @ un ** 2)
            fn, Pn, Mn, En = log_j(un)
            if fn >= f + 1e-4 * t * slope or t < 1e-12:
                break
            t *= 0.5
        # the accepted step may overshoot a curved ridge; try the maximizer of
        # the parabola through f(0), f'(0) and f(t)
        gain = fn - f
        denom = 2.0 * (slope * t - gain)
        if denom > 0:
            tq = slope * t * t / denom
            if 1e-12 < tq < 4.0 * t and abs(tq - t) > 1e-3 * t:
                uq = np.maximum(u + tq * direction, 0.0)
                uq /= math.sqrt(w @ uq ** 2)
                fq, Pq, Mq, Eq = log_j(uq)
                if fq > fn:
                    un, fn, Pn, Mn, En = uq, fq, Pq, Mq, Eq
        change = abs(fn - f)  # change of log J = relative change of J
        u, f, P, M, E = un, fn, Pn, Mn, En
        if change <= tol and it >= 5:
            break
    else:
        raise NumericalFailureError("GNS maximization did not converge", change)
    C = math.exp(f)
    return float(
        (2.0 * gamma / (2.0 * gamma + d)) ** (gamma + d / 2.0) * (d / (2.0 * gamma)) ** (d / 2.0) * C ** (d / 2.0)
    )


_MODES = ("subadditive", "quotient_monotone", "monotone")


def subadditivity_check(
    table: Mapping[int, float], mode: str = "subadditive", tol: float = 1e-12
) -> list[tuple[int, int]]:
    """List violations of the structural inequalities between finite-rank constants.

    Parameters
    ----------
    table : mapping N -> c_N
        Positive constant estimates.
    mode : {"subadditive", "quotient_monotone", "monotone"}
        ``"subadditive"`` reports every ``(N, K)`` with
        ``N/c_N > K/c_K + (N-K)/c_{N-K}`` (all three keys present).
        ``"quotient_monotone"`` reports ``(N+1, N)`` when
        ``(N+1)/c_{N+1} < N/c_N``; lower bounds read off a single
        potential always satisfy this.  ``"monotone"`` reports ``(N+1, N)``
        when ``c_{N+1} < c_N``, the form used for ``L^(N)`` tables.
    tol : float
        Relative slack: an inequality ``a <= b`` counts as violated only if
        ``a > b + tol * max(|a|, |b|)``, so round-off in the table entries is
        never reported whatever their scale.

    Returns
    -------
    list of (int, int)
    """
    if not table:
        raise InvalidInputError("table must be nonempty")
    if mode not in _MODES:
        raise InvalidInputError(f"mode must be one of {_MODES}, got {mode!r}")
    c = {int(k): float(v) for k, v in table.items()}
    if any(not (v > 0 and math.isfinite(v)) for v in c.values()):
        raise InvalidInputError("table estimates must be positive and finite")
    keys = sorted(c)

    def exceeds(a: float, b: float) -> bool:
        return a > b + tol * max(abs(a), abs(b))

    out: list[tuple[int, int]] = []
    if mode == "subadditive":
        for N in keys:
            for K in range(1, N):
                if K in c and (N - K) in c and K <= N - K:
                    if exceeds(N / c[N], K / c[K] + (N - K) / c[N - K]):
                        out.append((N, K))
    else:
        for N in keys:
            if N + 1 not in c:
                continue
            if mode == "monotone":
                bad = exceeds(c[N], c[N + 1])
            else:
                bad = exceeds(N / c[N], (N + 1) / c[N + 1])
            if bad:
                out.append((N + 1, N))
    return out
