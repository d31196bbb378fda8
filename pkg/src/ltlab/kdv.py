"""Reflectionless KdV N-soliton potentials and the soliton-manifold fit.

An N-soliton is parametrized by decay rates ``beta_1 > ... > beta_N > 0`` and
positions ``X``.  With ``a_j(x) = sqrt(2 beta_j) exp(-beta_j (x - X_j))`` and

.. math::  A_{jk}(x) = \\delta_{jk} + \\frac{a_j(x)\\,a_k(x)}{\\beta_j + \\beta_k},

the well depth is :math:`V = 2\\,(\\log\\det A)''`; :math:`-\\partial_x^2 - V`
has exactly the eigenvalues :math:`-\\beta_j^2`.  The ``sqrt(2 beta_j)``
prefactor puts the one-soliton :math:`2\\beta^2\\operatorname{sech}^2(\\beta(x-X))`
exactly at ``X``; any other choice of prefactors only relabels the shifts.

Solitons with :math:`\\sum_j \\beta_j^3 = 3/16` have unit :math:`L^2` norm and
maximize the Riesz quotient at ``gamma = 3/2`` in one dimension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .errors import InvalidInputError
from .grid import Grid1D, PotentialField
from .schrodinger import lowest_eigenpairs

__all__ = [
    "MANIFOLD_CUBE_SUM",
    "SolitonSpec",
    "ManifoldFit",
    "soliton_profile",
    "soliton_values",
    "exact_spectrum",
    "normalize_to_manifold",
    "manifold_distance",
]

#: Value of sum(beta**3) on the unit-L^2 soliton manifold.
MANIFOLD_CUBE_SUM = 3.0 / 16.0

#: Levels above this threshold are ignored when reading decay rates off a spectrum.
LEVEL_CUTOFF = -1e-6


@dataclass(frozen=True)
class SolitonSpec:
    """Parameters ``(beta, X)`` of a KdV N-soliton.

    ``betas`` must be strictly decreasing and positive; ``shifts`` defaults to
    zeros and must have the same length.
    """

    betas: tuple
    shifts: tuple = field(default=None)

    def __post_init__(self):
        betas = tuple(float(b) for b in np.atleast_1d(self.betas))
        shifts = self.shifts
        shifts = tuple(0.0 for _ in betas) if shifts is None else tuple(float(s) for s in np.atleast_1d(shifts))
        if len(betas) == 0:
            raise InvalidInputError("a soliton needs at least one beta")
        if len(shifts) != len(betas):
            raise InvalidInputError(f"{len(betas)} betas but {len(shifts)} shifts")
        if not all(math.isfinite(b) and b > 0 for b in betas):
            raise InvalidInputError(f"betas must be positive and finite: {betas}")
        if not all(math.isfinite(s) for s in shifts):
            raise InvalidInputError("shifts must be finite")
        if any(b1 <= b2 for b1, b2 in zip(betas, betas[1:])):
            raise InvalidInputError(f"betas must be strictly decreasing: {betas}")
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "shifts", shifts)

    @property
    def order(self) -> int:
        return len(self.betas)

    def to_dict(self) -> dict:
        return {"betas": list(self.betas), "shifts": list(self.shifts)}


@dataclass(frozen=True)
class ManifoldFit:
    """Closest normalized soliton found by :func:`manifold_distance`.

    ``fitted_spec`` is ``None`` when ``V`` has no bound state (the fit is then
    the zero potential and ``order == 0``).
    """

    fitted_spec: Optional[SolitonSpec]
    l2_distance: float
    order: int

    def to_dict(self) -> dict:
        return {
            "fitted_spec": None if self.fitted_spec is None else self.fitted_spec.to_dict(),
            "l2_distance": self.l2_distance,
            "order": self.order,
        }


def soliton_values(betas, shifts, x) -> np.ndarray:
    """Evaluate :math:`2(\\log\\det A)''` at the points ``x`` (no validation).

    Each row ``j`` of ``A`` is scaled by ``s_j = max(a_j, 1)`` before solving,
    so no entry exceeds ``O(1)`` whatever the distance to the solitons.  With
    ``b = a/s`` and ``B = diag(1/s^2) + b b^T/(beta_j + beta_k)``, the second
    log-determinant derivative is ``2 (beta*b).z - (b.z)^2`` with
    ``z = B^{-1} b``, because ``A' = -a a^T`` is rank one and
    ``A''_{jk} = (beta_j + beta_k) a_j a_k``.
    """
    beta = np.asarray(betas, dtype=float)
    X = np.asarray(shifts, dtype=float)
    x = np.asarray(x, dtype=float)
    log_a = 0.5 * np.log(2.0 * beta)[None, :] - beta[None, :] * (x[:, None] - X[None, :])
    log_s = np.maximum(log_a, 0.0)
    b = np.exp(log_a - log_s)  # in (0, 1]
    inv_s2 = np.exp(-2.0 * log_s)
    cauchy = 1.0 / (beta[:, None] + beta[None, :])
    B = b[:, :, None] * b[:, None, :] * cauchy[None, :, :]
    idx = np.arange(beta.size)
    B[:, idx, idx] += inv_s2
    z = np.linalg.solve(B, b[:, :, None])[:, :, 0]
    t1 = np.einsum("ij,ij->i", b * beta[None, :], z)
    t2 = np.einsum("ij,ij->i", b, z)
    second = 2.0 * t1 - t2 ** 2
    return np.maximum(2.0 * second, 0.0)


def soliton_profile(spec: SolitonSpec, grid: Grid1D) -> PotentialField:
    """Sample the N-soliton well ``V = Q_{beta,X}`` on ``grid``.

    Examples
    --------
    >>> from ltlab.grid import Grid1D
    >>> V = soliton_profile(SolitonSpec((0.5,)), Grid1D(-1, 1, 3))
    >>> float(V.values[1])  # 2 beta^2 at the center
    0.5
    """
    if not isinstance(grid, Grid1D):
        raise InvalidInputError("solitons live on one-dimensional grids")
    return PotentialField(grid, soliton_values(spec.betas, spec.shifts, grid.nodes))


def exact_spectrum(spec: SolitonSpec) -> np.ndarray:
    """Eigenvalues ``-beta_j^2`` in ascending order (independent of the shifts)."""
    return -np.asarray(spec.betas, dtype=float) ** 2


def normalize_to_manifold(spec: SolitonSpec) -> SolitonSpec:
    """Dilate ``spec`` onto the unit-:math:`L^2` manifold :math:`\\sum\\beta^3 = 3/16`.

    The map is :math:`V \\mapsto c^2 V(c\\,\\cdot)`, i.e. ``beta -> c beta`` and
    ``X -> X / c`` with ``c = (3/16 / sum(beta^3))^{1/3}``.
    """
    b = np.asarray(spec.betas)
    c = (MANIFOLD_CUBE_SUM / float(np.sum(b ** 3))) ** (1.0 / 3.0)
    if c == 1.0:
        return spec
    return SolitonSpec(tuple(c * b), tuple(np.asarray(spec.shifts) / c))


def _project_betas(betas) -> np.ndarray:
    b = np.asarray(betas, dtype=float)
    return b * (MANIFOLD_CUBE_SUM / float(np.sum(b ** 3))) ** (1.0 / 3.0)


class _Fitter:
    """L^2 distance between a sampled field and normalized solitons of fixed order."""

    def __init__(self, V: PotentialField):
        self.x = V.grid.nodes
        self.h = V.grid.h
        self.v = np.asarray(V.values, dtype=float)
        self.lo, self.hi = V.grid.x_min, V.grid.x_max

    def dist2(self, betas, shifts) -> float:
        q = soliton_values(betas, shifts, self.x)
        return float(self.h * np.sum((self.v - q) ** 2))

    def centroid(self) -> float:
        w = self.v ** 2
        return float(np.sum(w * self.x) / np.sum(w))

    def fit_shifts(self, betas, shifts, passes: int = 3, n_scan: int = 81) -> np.ndarray:
        X = np.array(shifts, dtype=float)
        scan = np.linspace(self.lo, self.hi, n_scan)
        step = scan[1] - scan[0]
        for _ in range(passes):
            for j in range(X.size):
                def f(t, j=j):
                    Y = X.copy()
                    Y[j] = t
                    return self.dist2(betas, Y)
                vals = np.array([f(t) for t in scan])
                k = int(np.argmin(vals))
                if f(X[j]) < vals[k]:
                    centre = X[j]
                else:
                    centre = scan[k]
                res = minimize_scalar(
                    f, bounds=(centre - step, centre + step), method="bounded",
                    options={"xatol": 1e-10 * max(1.0, abs(centre))},
                )
                if res.fun <= f(X[j]):
                    X[j] = res.x
        return X

    def polish(self, betas, shifts):
        """Joint refinement of (beta on the manifold, X) from a good start."""
        m = len(betas)
        b0 = np.asarray(betas, dtype=float)

        def unpack(p):
            b = _project_betas(b0 * np.exp(p[:m]))
            X = p[m:]
            order = np.argsort(-b, kind="stable")
            return b[order], X[order]

        def obj(p):
            b, X = unpack(p)
            if np.any(np.diff(b) >= 0):
                return np.inf
            return self.dist2(b, X)

        p0 = np.concatenate([np.zeros(m), np.asarray(shifts, dtype=float)])
        f0 = obj(p0)
        best = (f0, p0)
        res = minimize(obj, p0, method="BFGS", options={"gtol": 1e-16, "maxiter": 200})
        if np.isfinite(res.fun) and res.fun < best[0]:
            best = (res.fun, res.x)
        res = minimize(
            obj, best[1], method="Nelder-Mead",
            options={"xatol": 1e-11, "fatol": 1e-18, "maxiter": 400 * (2 * m), "adaptive": True},
        )
        if np.isfinite(res.fun) and res.fun < best[0]:
            best = (res.fun, res.x)
        b, X = unpack(best[1])
        return b, X, best[0]


def manifold_distance(V: PotentialField, n_max: int, polish: bool = True) -> ManifoldFit:
    """Distance from ``V`` to normalized solitons of order ``m <= n_max``.

    Parameters
    ----------
    V : PotentialField
        Field on a :class:`~ltlab.grid.Grid1D`.
    n_max : int
        Largest soliton order considered.
    polish : bool, optional
        After the coordinate search over shifts, jointly refine ``beta`` (kept
        on the manifold) and ``X``.  Disable for a faster, coarser bound.

    Returns
    -------
    ManifoldFit
        The order with the smallest :math:`L^2` distance.

    Notes
    -----
    The starting decay rates are ``sqrt(|lambda_j|)`` of the levels of
    ``-d^2/dx^2 - V`` below ``-1e-6``, projected onto ``sum(beta^3) = 3/16``.
    Shifts are found by a coarse scan followed by golden-section refinement,
    one coordinate at a time, three passes.
    """
    if not isinstance(V.grid, Grid1D):
        raise InvalidInputError("manifold_distance needs a one-dimensional field")
    if int(n_max) != n_max or n_max < 1:
        raise InvalidInputError(f"n_max must be a positive integer, got {n_max}")
    spec = lowest_eigenpairs(V, int(n_max))
    lam = spec.eigenvalues[spec.eigenvalues < LEVEL_CUTOFF]
    if lam.size == 0:
        return ManifoldFit(None, float(math.sqrt(V.grid.h * np.sum(V.values ** 2))), 0)
    betas_all = np.sqrt(-lam)
    fitter = _Fitter(V)
    centre = fitter.centroid()
    best: Optional[ManifoldFit] = None
    for m in range(1, lam.size + 1):
        b = _project_betas(betas_all[:m])
        if np.any(np.diff(b) >= 0):
            continue
        X = fitter.fit_shifts(b, np.full(m, centre))
        d2 = fitter.dist2(b, X)
        if polish:
            b2, X2, d2p = fitter.polish(b, X)
            if d2p < d2:
                b, X, d2 = b2, X2, d2p
        fit = ManifoldFit(SolitonSpec(tuple(b), tuple(X)), float(math.sqrt(max(d2, 0.0))), m)
        if best is None or fit.l2_distance < best.l2_distance:
            best = fit
    if best is None:
        return ManifoldFit(None, float(math.sqrt(V.grid.h * np.sum(V.values ** 2))), 0)
    return best
