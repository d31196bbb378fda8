"""Bound states of the discretized Schrödinger operator :math:`-\\Delta - V`.

On a :class:`~ltlab.grid.Grid1D` the operator is the 3-point Laplacian with
Dirichlet ends minus ``diag(V)``.  On a :class:`~ltlab.grid.RadialGrid` in
dimension ``d`` the operator splits into angular-momentum channels; with
``u(r) = r^{(d-1)/2} f(r)`` channel ``l`` reads

.. math::  -u'' + \\frac{\\kappa_{l,d}}{r^2} u - V u,\\qquad
           \\kappa_{l,d} = l(l+d-2) + \\tfrac{(d-1)(d-3)}{4},

and each of its levels is repeated ``m_l(d)`` times (the number of
independent degree-``l`` spherical harmonics).  Every channel is a symmetric
tridiagonal matrix, handled by LAPACK bisection / inverse iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.linalg import eigh_tridiagonal, eigvalsh_tridiagonal
from scipy.special import betainc, comb

from .errors import ChannelExhaustionError, InvalidInputError
from .grid import Grid1D, PotentialField, RadialGrid, sphere_area

__all__ = [
    "L_MAX_CAP",
    "SpectrumRequest",
    "ChannelLevel",
    "SpectrumResult",
    "channel_multiplicity",
    "centrifugal_coefficient",
    "lowest_eigenpairs",
    "negative_count",
    "vanishing_bound_probe",
]

#: Hard cap on the number of angular-momentum channels explored automatically.
L_MAX_CAP = 64


@lru_cache(maxsize=None)
def channel_multiplicity(l: int, d: int) -> int:
    """Dimension of degree-``l`` spherical harmonics on :math:`S^{d-1}`.

    ``m_l(d) = (2l+d-2)/(l+d-2) * C(l+d-2, l)``; e.g. ``m_l(3) = 2l+1`` and
    ``m_l(2) = 2`` for ``l >= 1``.
    """
    if l < 0 or d < 2:
        raise InvalidInputError(f"need l >= 0 and d >= 2, got l={l}, d={d}")
    if l == 0:
        return 1
    num = (2 * l + d - 2) * comb(l + d - 2, l, exact=True)
    return num // (l + d - 2)


def centrifugal_coefficient(l: int, d: int) -> float:
    """:math:`\\kappa_{l,d} = l(l+d-2) + (d-1)(d-3)/4`."""
    return l * (l + d - 2) + (d - 1) * (d - 3) / 4.0


@dataclass(frozen=True)
class SpectrumRequest:
    """Parameters of a bound-state computation.

    Attributes
    ----------
    V : PotentialField
    count : int
        Number ``N`` of min-max levels wanted.
    l_max : int or None
        Highest angular momentum solved on radial grids; ``None`` lets the
        solver raise it until the lowest ``count`` levels are certified.
    tol : float
        Absolute eigenvalue tolerance passed to the bisection.
    """

    V: PotentialField
    count: int
    l_max: Optional[int] = None
    tol: float = 1e-12

    def __post_init__(self):
        if not isinstance(self.V, PotentialField):
            raise InvalidInputError("SpectrumRequest.V must be a PotentialField")
        if int(self.count) != self.count or self.count < 1:
            raise InvalidInputError(f"count must be a positive integer, got {self.count}")
        if self.count > self.V.grid.n:
            raise InvalidInputError(f"count {self.count} exceeds the {self.V.grid.n} grid nodes")
        if self.l_max is not None and (int(self.l_max) != self.l_max or self.l_max < 0):
            raise InvalidInputError(f"l_max must be a nonnegative integer, got {self.l_max}")
        if not (self.tol > 0):
            raise InvalidInputError(f"tol must be positive, got {self.tol}")


@dataclass(frozen=True)
class ChannelLevel:
    """One distinct level: channel ``l``, its degeneracy and its value."""

    l: int
    multiplicity: int
    value: float
    radial_index: int = 0

    def to_dict(self) -> dict:
        return {"l": self.l, "multiplicity": self.multiplicity, "value": self.value}


@dataclass(frozen=True)
class SpectrumResult:
    """Lowest min-max levels of :math:`-\\Delta - V`.

    Attributes
    ----------
    eigenvalues : ndarray, shape (count,)
        Ascending, ``<= 0``; degenerate radial levels are repeated
        ``multiplicity`` times and missing levels are padded with 0.
    eigenfunctions : ndarray, shape (n, k)
        One column per distinct negative level in ``levels`` (the reduced
        radial function ``u`` on radial grids), normalized so that
        ``h * sum(u**2) == 1``.
    levels : tuple of ChannelLevel
        Distinct negative levels appearing in ``eigenvalues``, ascending.
    state_index : ndarray of int, shape (count,)
        Column of ``eigenfunctions`` for each flat entry, ``-1`` for padding.
    negative_count : int
        Total number of negative eigenvalues with multiplicity.
    l_max : int
        Highest channel solved (0 on the line).
    """

    grid: object
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    levels: tuple
    state_index: np.ndarray
    negative_count: int
    l_max: int = 0

    @property
    def count(self) -> int:
        return int(self.eigenvalues.shape[0])

    @property
    def channels(self) -> list[ChannelLevel]:
        """Per-eigenvalue channel record (``None`` for padded zeros)."""
        return [self.levels[i] if i >= 0 else None for i in self.state_index]

    @property
    def n_bound(self) -> int:
        """Number of negative entries in ``eigenvalues``."""
        return int(np.count_nonzero(self.state_index >= 0))

    def density(self, column: int) -> np.ndarray:
        """Probability density of one state of level ``column`` on the nodes.

        On the line this is ``u**2``.  On radial grids it is the angular
        average ``u(r)**2 / (|S^{d-1}| r^{d-1})`` of a single state of the
        degenerate shell, so summing it over the shell and integrating with the
        grid weights gives the shell multiplicity.
        """
        u = self.eigenfunctions[:, column]
        if isinstance(self.grid, Grid1D):
            return u ** 2
        g = self.grid
        return u ** 2 / (sphere_area(g.dim - 1) * g.nodes ** (g.dim - 1))

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "channels": [lv.to_dict() for lv in self.levels],
            "negative_count": int(self.negative_count),
        }


def _channel_diagonals(V: PotentialField, l: int) -> tuple[np.ndarray, np.ndarray]:
    g = V.grid
    h = g.h
    diag = np.full(g.n, 2.0 / h ** 2) - V.values
    if isinstance(g, RadialGrid):
        kappa = centrifugal_coefficient(l, g.dim)
        if kappa != 0.0:
            diag = diag + kappa / g.nodes ** 2
    off = np.full(g.n - 1, -1.0 / h ** 2)
    return diag, off


def _lowest(diag, off, k, tol, vectors):
    k = min(k, diag.shape[0])
    if vectors:
        w, u = eigh_tridiagonal(diag, off, select="i", select_range=(0, k - 1), tol=tol)
        return w, u
    w = eigvalsh_tridiagonal(diag, off, select="i", select_range=(0, k - 1), tol=tol)
    return w, None


def _channel_negative_count(V: PotentialField, l: int) -> int:
    diag, off = _channel_diagonals(V, l)
    lo = float(np.min(diag) - 2.0 * np.max(np.abs(off)))
    if lo >= 0:
        return 0
    w = eigvalsh_tridiagonal(diag, off, select="v", select_range=(lo - 1.0, 0.0))
    return int(np.count_nonzero(w < 0))


def negative_count(V: PotentialField, l_cap: int = L_MAX_CAP) -> int:
    """Total number of negative eigenvalues (with multiplicity) of :math:`-\\Delta - V`.

    Raises
    ------
    ChannelExhaustionError
        On radial grids, if channel ``l_cap`` still has bound states.
    """
    if isinstance(V.grid, Grid1D):
        return _channel_negative_count(V, 0)
    d = V.grid.dim
    total = 0
    for l in range(l_cap + 1):
        c = _channel_negative_count(V, l)
        if c == 0:
            return total
        total += c * channel_multiplicity(l, d)
    raise ChannelExhaustionError(l_cap)


def lowest_eigenpairs(req: SpectrumRequest | PotentialField, count: int | None = None, **kwargs) -> SpectrumResult:
    """Lowest ``count`` min-max levels and eigenfunctions of :math:`-\\Delta - V`.

    Parameters
    ----------
    req : SpectrumRequest or PotentialField
        Either a full request, or a field (then ``count`` and keyword
        arguments of :class:`SpectrumRequest` are taken from the call).

    Returns
    -------
    SpectrumResult

    Raises
    ------
    ChannelExhaustionError
        If ``l_max`` was given and channel ``l_max`` still holds a level below
        the ``count``-th collected one, or if the automatic search hits
        :data:`L_MAX_CAP`.

    Examples
    --------
    >>> from ltlab.grid import Grid1D, PotentialField
    >>> g = Grid1D(-10, 10, 99)
    >>> lowest_eigenpairs(PotentialField(g, 0 * g.nodes), 2).eigenvalues
    array([0., 0.])
    """
    if not isinstance(req, SpectrumRequest):
        req = SpectrumRequest(req, count, **kwargs)
    V, N = req.V, req.count
    g = V.grid
    h = g.h
    sqrt_h = math.sqrt(h)

    if isinstance(g, Grid1D):
        diag, off = _channel_diagonals(V, 0)
        w, u = _lowest(diag, off, N, req.tol, True)
        neg = w < 0
        k = int(np.count_nonzero(neg))
        levels = tuple(ChannelLevel(0, 1, float(w[j]), j) for j in range(k))
        values = np.zeros(N)
        values[:k] = w[:k]
        index = np.full(N, -1, dtype=int)
        index[:k] = np.arange(k)
        return SpectrumResult(
            grid=g,
            eigenvalues=values,
            eigenfunctions=u[:, :k] / sqrt_h,
            levels=levels,
            state_index=index,
            negative_count=_channel_negative_count(V, 0),
            l_max=0,
        )

    d = g.dim
    found: list[tuple[float, int, int, np.ndarray]] = []  # (value, l, radial index, u)
    neg_total = 0
    l = 0
    l_limit = req.l_max if req.l_max is not None else L_MAX_CAP
    while True:
        diag, off = _channel_diagonals(V, l)
        m = channel_multiplicity(l, d)
        # a channel of multiplicity m contributes at most ceil(N/m) levels
        kk = min(-(-N // m), g.n)
        w, u = _lowest(diag, off, kk, req.tol, True)
        for j in range(w.shape[0]):
            if w[j] < 0:
                found.append((float(w[j]), l, j, u[:, j]))
        neg_total += m * _channel_negative_count(V, l) if w[0] < 0 else 0
        nth = _nth_level(found, N, d)
        lowest_here = float(w[0])
        certified = lowest_here >= 0.0 or lowest_here >= nth
        if certified:
            l_used = l
            break
        if l >= l_limit:
            raise ChannelExhaustionError(l)
        l += 1

    # channels beyond l_used carry no negative levels only if lowest_here >= 0;
    # otherwise count the remaining negative levels for negative_count.
    if lowest_here < 0:
        ll = l_used + 1
        while True:
            if ll > L_MAX_CAP:
                raise ChannelExhaustionError(L_MAX_CAP)
            c = _channel_negative_count(V, ll)
            if c == 0:
                break
            neg_total += c * channel_multiplicity(ll, d)
            ll += 1

    found.sort(key=lambda t: (t[0], t[1], t[2]))
    values = np.zeros(N)
    index = np.full(N, -1, dtype=int)
    levels = []
    cols = []
    pos = 0
    for value, ll, j, vec in found:
        if pos >= N:
            break
        m = channel_multiplicity(ll, d)
        levels.append(ChannelLevel(ll, m, value, j))
        cols.append(vec / sqrt_h)
        take = min(m, N - pos)
        values[pos:pos + take] = value
        index[pos:pos + take] = len(levels) - 1
        pos += take
    eigf = np.column_stack(cols) if cols else np.zeros((g.n, 0))
    return SpectrumResult(
        grid=g,
        eigenvalues=values,
        eigenfunctions=eigf,
        levels=tuple(levels),
        state_index=index,
        negative_count=int(neg_total),
        l_max=l_used,
    )


def _nth_level(found, N, d) -> float:
    """Value of the ``N``-th level (with multiplicity) among ``found``, 0 if fewer."""
    pos = 0
    for value, l, _, _ in sorted(found, key=lambda t: (t[0], t[1], t[2])):
        pos += channel_multiplicity(l, d)
        if pos >= N:
            return value
    return 0.0


def _cap_fraction(cos_t: np.ndarray, d: int) -> np.ndarray:
    """Fraction of :math:`S^{d-1}` within polar angle ``arccos(cos_t)`` of a pole."""
    cos_t = np.clip(cos_t, -1.0, 1.0)
    sin2 = 1.0 - cos_t ** 2
    half = 0.5 * betainc(0.5 * (d - 1), 0.5, sin2)
    return np.where(cos_t >= 0, half, 1.0 - half)


def vanishing_bound_probe(V: PotentialField, r: float, p: float | None = None) -> float:
    """Largest local mass :math:`\\sup_y \\int_{B_r(y)} V^p` over grid-centered balls.

    Parameters
    ----------
    V : PotentialField
    r : float
        Ball radius, ``r > 0``.
    p : float, optional
        Exponent; defaults to ``1 + d/2`` (the ``gamma = 1`` Lieb--Thirring
        exponent).  Diagnostic only.

    Notes
    -----
    On radial grids the ball centers range over the origin and the points at
    distance ``r_i`` from it; the part of a shell of radius ``rho`` inside
    a ball centered at distance ``s`` is a spherical cap whose area fraction is
    a regularized incomplete beta function.
    """
    if not (math.isfinite(r) and r > 0):
        raise InvalidInputError(f"radius must be positive, got {r}")
    g = V.grid
    if p is None:
        p = 1.0 + g.dim / 2.0
    if p < 1:
        raise InvalidInputError(f"exponent p must be >= 1, got {p}")
    mass = g.weights * V.values ** p
    x = g.nodes
    if not np.any(mass > 0):
        return 0.0
    if isinstance(g, Grid1D):
        cum = np.concatenate(([0.0], np.cumsum(mass)))
        lo = np.searchsorted(x, x - r, side="left")
        hi = np.searchsorted(x, x + r, side="right")
        return float(np.max(cum[hi] - cum[lo]))

    d = g.dim
    best = float(np.sum(mass[x <= r]))  # ball at the origin
    support = np.nonzero(mass > 0)[0]
    s_lo, s_hi = x[support[0]] - r, x[support[-1]] + r
    for s in x[(x >= s_lo) & (x <= s_hi)]:
        i0 = np.searchsorted(x, s - r, side="left")
        i1 = np.searchsorted(x, s + r, side="right")
        rho = x[i0:i1]
        cos_t = (rho ** 2 + s ** 2 - r ** 2) / (2.0 * rho * s)
        frac = _cap_fraction(cos_t, d)
        best = max(best, float(np.dot(mass[i0:i1], frac)))
    return best
