"""Critical case ``gamma = 0``: Birman–Schwinger eigenvalues in ``d >= 3``.

For ``V >= 0`` the compact operator :math:`K_V = \\sqrt{V}(-\\Delta)^{-1}\\sqrt{V}`
has eigenvalues :math:`\\mu_1(V) \\ge \\mu_2(V) \\ge \\dots > 0`; the number of
them above 1 is the number of bound states of :math:`-\\Delta - V`, and

.. math::  \\ell^{(N)}_{0,d} \\ge \\frac{N\\,\\mu_N(V)^{d/2}}{\\int V^{d/2}}

for every ``V``, with equality for optimizers.  The quotient is invariant
under dilations, translations and the inversion ``x -> x/|x|^2``.

On a radial grid each angular-momentum channel ``l`` gives a tridiagonal
kinetic matrix ``A_l`` (the same stencil as in :mod:`ltlab.schrodinger`,
without ``V``).  The channel values of ``mu`` are the largest eigenvalues of
``S A_l^{-1} S`` with ``S = diag(sqrt(V))``, obtained by Lanczos iteration
with banded Cholesky solves; equivalently ``1/mu`` are the smallest
eigenvalues of the pencil ``A_l u = nu diag(V) u`` on the support of ``V``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicSpline
from scipy.linalg import cho_solve_banded, cholesky_banded, eigh, eigvalsh_tridiagonal
from scipy.sparse.linalg import LinearOperator, eigsh, splu

from .errors import ChannelExhaustionError, ExtrapolationWarning, InvalidInputError
from .grid import PotentialField, RadialGrid, lp_norm_power, sphere_area
from .schrodinger import L_MAX_CAP, centrifugal_coefficient, channel_multiplicity

__all__ = [
    "BOUNDARIES",
    "BirmanSchwingerResult",
    "MuLevel",
    "SpherePotentialSpec",
    "mu_spectrum",
    "count_mu_above",
    "channel_inertia_count",
    "sphere_potential",
    "sobolev_potential",
    "inversion_transform",
    "InversionResult",
    "decay_tail_check",
    "axisymmetric_mu",
]

#: Outer boundary treatments of the radial kinetic operator.
BOUNDARIES = ("exterior", "dirichlet")

#: Relative floor below which V is treated as zero.
V_FLOOR = 1e-14

#: Channels with at most this many support nodes are solved densely.
_DENSE_LIMIT = 400


@dataclass(frozen=True)
class MuLevel:
    """A distinct Birman–Schwinger level of channel ``l``."""

    l: int
    multiplicity: int
    value: float

    def to_dict(self) -> dict:
        return {"l": self.l, "multiplicity": self.multiplicity, "value": self.value}


@dataclass(frozen=True)
class BirmanSchwingerResult:
    """Largest ``mu_j(V)`` with channel bookkeeping.

    Attributes
    ----------
    mus : ndarray
        Nonincreasing, each channel level repeated ``multiplicity`` times.
    channels : tuple of MuLevel
        Distinct levels contributing to ``mus``, in the same order.
    ell_estimates : dict
        ``N -> N mu_N^{d/2} / norm_power`` for ``N = 1..len(mus)``.
    norm_power : float
        ``int V^{d/2}`` by the grid quadrature.
    """

    mus: np.ndarray
    channels: tuple
    ell_estimates: dict
    norm_power: float
    dim: int
    l_max: int
    boundary: str

    def level_multiplicity(self, value: float, tol: float = 1e-3) -> int:
        """Total multiplicity of all channel levels within ``tol`` of ``value``."""
        return int(sum(c.multiplicity for c in self.channels if abs(c.value - value) <= tol))

    def to_dict(self) -> dict:
        return {
            "mus": [float(m) for m in self.mus],
            "channels": [c.to_dict() for c in self.channels],
            "ell_estimates": {str(k): float(v) for k, v in self.ell_estimates.items()},
            "norm_power": self.norm_power,
            "dim": self.dim,
            "l_max": self.l_max,
            "boundary": self.boundary,
        }


def _check_field(V: PotentialField) -> RadialGrid:
    g = V.grid
    if not isinstance(g, RadialGrid):
        raise InvalidInputError("the critical case needs a radial field")
    if g.dim < 3:
        raise InvalidInputError(f"the critical case requires d >= 3, got d = {g.dim}")
    return g


def _kinetic_banded(g: RadialGrid, l: int, boundary: str) -> np.ndarray:
    """Upper banded storage of the channel-``l`` kinetic matrix.

    With ``boundary="exterior"`` the last row includes the exact zero-energy
    exterior solution ``u ~ r^{-(l + (d-3)/2)}`` beyond ``r_max`` (a ghost node
    ``u_{n+1} = (r_n/(r_n + h))^a u_n``) instead of the Dirichlet value 0.  This
    removes the ``O(1/r_max)`` bias that a Dirichlet wall causes for
    potentials with ``|x|^{-4}`` tails.
    """
    h = g.h
    r = g.nodes
    d = g.dim
    diag = 2.0 / h ** 2 + centrifugal_coefficient(l, d) / r ** 2
    if boundary == "exterior":
        a = l + (d - 3) / 2.0
        diag[-1] -= (r[-1] / (r[-1] + h)) ** a / h ** 2
    ab = np.zeros((2, g.n))
    ab[0, 1:] = -1.0 / h ** 2
    ab[1] = diag
    return ab


def _channel_mus(v: np.ndarray, g: RadialGrid, l: int, k: int, boundary: str) -> np.ndarray:
    """Largest ``k`` eigenvalues of ``S A_l^{-1} S`` (descending)."""
    support = np.nonzero(v > 0)[0]
    ns = support.size
    k = min(k, ns)
    if k == 0:
        return np.zeros(0)
    chol = cholesky_banded(_kinetic_banded(g, l, boundary))
    s = np.sqrt(v)
    if ns <= _DENSE_LIMIT or k >= ns - 1:
        # dense reduction onto the support: columns A^{-1} e_i for i in support
        E = np.zeros((g.n, ns))
        E[support, np.arange(ns)] = 1.0
        G = cho_solve_banded((chol, False), E)[support]
        ss = s[support]
        Kmat = ss[:, None] * G * ss[None, :]
        Kmat = 0.5 * (Kmat + Kmat.T)
        w = eigh(Kmat, eigvals_only=True)
        return np.sort(w)[::-1][:k]

    def matvec(x):
        return s * cho_solve_banded((chol, False), s * np.ravel(x))

    op = LinearOperator((g.n, g.n), matvec=matvec, dtype=float)
    rng = np.random.default_rng(12345 + l)
    v0 = s * (1.0 + 0.1 * rng.standard_normal(g.n))
    w = eigsh(op, k=k, which="LA", v0=v0, tol=0, return_eigenvectors=False)
    return np.sort(w)[::-1]


def _floored(V: PotentialField) -> np.ndarray:
    v = np.asarray(V.values, dtype=float)
    vmax = float(v.max()) if v.size else 0.0
    if vmax <= 0.0:
        raise InvalidInputError("V vanishes on the whole grid")
    return np.where(v >= V_FLOOR * vmax, v, 0.0)


def mu_spectrum(
    V: PotentialField,
    count: int,
    l_max: Optional[int] = None,
    boundary: str = "exterior",
) -> BirmanSchwingerResult:
    """Largest ``count`` Birman–Schwinger eigenvalues of a radial ``V``.

    Parameters
    ----------
    V : PotentialField
        Radial field with ``dim >= 3``.
    count : int
        Number of values (with multiplicity) to return.
    l_max : int, optional
        Highest channel; by default channels are added until the next one
        cannot contribute (its top value is not above the ``count``-th one),
        up to :data:`~ltlab.schrodinger.L_MAX_CAP`.
    boundary : {"exterior", "dirichlet"}
        Treatment of the outer edge; see :func:`_kinetic_banded`.

    Raises
    ------
    InvalidInputError
        For ``d < 3`` or ``V == 0``.
    ChannelExhaustionError
        If channel ``l_max`` still has a value above the ``count``-th collected one.
    """
    g = _check_field(V)
    if int(count) != count or count < 1:
        raise InvalidInputError(f"count must be a positive integer, got {count}")
    if boundary not in BOUNDARIES:
        raise InvalidInputError(f"boundary must be one of {BOUNDARIES}")
    if l_max is not None and (int(l_max) != l_max or l_max < 0):
        raise InvalidInputError(f"l_max must be a nonnegative integer, got {l_max}")
    count = int(count)
    v = _floored(V)
    d = g.dim
    limit = L_MAX_CAP if l_max is None else int(l_max)
    found: list[tuple[float, int]] = []
    l = 0
    while True:
        m = channel_multiplicity(l, d)
        k = -(-count // m)
        w = _channel_mus(v, g, l, k, boundary)
        found.extend((float(x), l) for x in w)
        top = float(w[0]) if w.size else 0.0
        nth = _nth(found, count, d)
        if top <= nth:
            break
        if l >= limit:
            raise ChannelExhaustionError(l)
        l += 1
    found.sort(key=lambda t: (-t[0], t[1]))
    mus = []
    channels = []
    for value, ll in found:
        if len(mus) >= count:
            break
        m = channel_multiplicity(ll, d)
        channels.append(MuLevel(ll, m, value))
        mus.extend([value] * min(m, count - len(mus)))
    mus = np.array(mus)
    norm = lp_norm_power(V, d / 2.0)
    est = {N: N * mus[N - 1] ** (d / 2.0) / norm for N in range(1, mus.size + 1)}
    return BirmanSchwingerResult(
        mus=mus, channels=tuple(channels), ell_estimates=est, norm_power=norm,
        dim=d, l_max=l, boundary=boundary,
    )


def _nth(found, count, d) -> float:
    pos = 0
    for value, l in sorted(found, key=lambda t: (-t[0], t[1])):
        pos += channel_multiplicity(l, d)
        if pos >= count:
            return value
    return 0.0


def count_mu_above(V: PotentialField, threshold: float = 1.0, boundary: str = "dirichlet") -> int:
    """Number of ``mu_j(V) > threshold`` with multiplicity, read off :func:`mu_spectrum`.

    The requested count is doubled until the smallest returned value drops
    to ``threshold`` or below.
    """
    _check_field(V)
    count = 4
    while True:
        res = mu_spectrum(V, count, boundary=boundary)
        if res.mus[-1] <= threshold or res.mus.size < count:
            return int(np.count_nonzero(res.mus > threshold))
        count *= 2
        if count > 64 * V.grid.n:
            raise ChannelExhaustionError(L_MAX_CAP)


def channel_inertia_count(V: PotentialField, threshold: float = 1.0, boundary: str = "dirichlet") -> int:
    """Count ``mu_j > threshold`` by Sylvester inertia of ``A_l - V/threshold``.

    Independent of the Lanczos path: ``S A^{-1} S`` has as many eigenvalues
    above ``t`` as ``A - V/t`` has negative ones.
    """
    g = _check_field(V)
    v = _floored(V)
    total = 0
    for l in range(L_MAX_CAP + 1):
        ab = _kinetic_banded(g, l, boundary)
        diag = ab[1] - v / threshold
        off = ab[0, 1:]
        lo = float(np.min(diag) - 2.0 * np.max(np.abs(off)))
        if lo >= 0:
            return total
        c = int(np.count_nonzero(eigvalsh_tridiagonal(diag, off, select="v", select_range=(lo - 1.0, 0.0)) < 0))
        if c == 0:
            return total
        total += c * channel_multiplicity(l, g.dim)
    raise ChannelExhaustionError(L_MAX_CAP)


@dataclass(frozen=True)
class SpherePotentialSpec:
    """Potential ``V_L = (L + (d-2)/2)(L + d/2) 4/(1 + r^2)^2`` in dimension ``d``.

    ``L = 0`` is the Sobolev (Emden–Fowler) potential ``d(d-2)/(1+r^2)^2``;
    ``V_L`` is the pull-back of the constant ``(L + (d-2)/2)(L + d/2)`` on the
    sphere.  Its levels are ``mu_k = c_L / ((k + (d-2)/2)(k + d/2))`` with the
    multiplicity of degree-``k`` harmonics on ``S^d``, so ``mu = 1`` is reached
    at ``k = L`` (with multiplicity ``d + 1`` for ``L = 1``).
    """

    L: int
    dim: int

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 0:
            raise InvalidInputError(f"L must be a nonnegative integer, got {self.L}")
        if int(self.dim) != self.dim or self.dim < 3:
            raise InvalidInputError(f"sphere potentials need d >= 3, got {self.dim}")

    @property
    def amplitude(self) -> float:
        return (self.L + (self.dim - 2) / 2.0) * (self.L + self.dim / 2.0) * 4.0

    def closed_form_norm(self) -> float:
        """``int V_L^{d/2} = ((L+(d-2)/2)(L+d/2))^{d/2} |S^d|``."""
        d = self.dim
        return ((self.L + (d - 2) / 2.0) * (self.L + d / 2.0)) ** (d / 2.0) * sphere_area(d)


def sphere_potential(spec: SpherePotentialSpec, grid: RadialGrid) -> tuple[PotentialField, float]:
    """Sample ``V_L`` on ``grid``; also return the exact ``int V_L^{d/2}``."""
    if not isinstance(grid, RadialGrid) or grid.dim != spec.dim:
        raise InvalidInputError("grid must be radial with the potential's dimension")
    r = grid.nodes
    return PotentialField(grid, spec.amplitude / (1.0 + r * r) ** 2), spec.closed_form_norm()


def sobolev_potential(grid: RadialGrid) -> PotentialField:
    """``d(d-2)/(1+r^2)^2`` on ``grid``."""
    return sphere_potential(SpherePotentialSpec(0, grid.dim), grid)[0]


class InversionResult(NamedTuple):
    """Output of :func:`inversion_transform`."""

    field: PotentialField
    extrapolated: bool
    valid: np.ndarray  # nodes whose value did not need data outside the grid


def inversion_transform(V: PotentialField, warn: bool = True) -> InversionResult:
    """Return ``W(r) = r^{-4} V(1/r)`` resampled on the same grid.

    ``V(1/r)`` is evaluated with a cubic spline through the even extension of
    ``V`` (nodes ``-r_n .. -r_1, r_1 .. r_n`` and the value 0 at ``r_max``).
    Linear interpolation is not good enough here: ``1/r`` compresses the
    profile into a short interval near the origin and ``r^{-4}`` amplifies
    the interpolation error there.  Spline overshoot below zero (next to the
    edge of a compact support) is clipped.  Nodes with ``1/r > r_max`` would
    need ``V`` beyond the grid: they are set to 0, ``extrapolated`` is True and
    an :class:`~ltlab.errors.ExtrapolationWarning` is issued (unless ``V``
    already vanishes at the edge, in which case 0 is the correct value).
    """
    g = V.grid
    if not isinstance(g, RadialGrid):
        raise InvalidInputError("inversion needs a radial field")
    r = g.nodes
    xs = np.concatenate((-r[::-1], r, [g.r_max]))
    vs = np.concatenate((V.values[::-1], V.values, [0.0]))
    spline = CubicSpline(xs, vs, bc_type="natural", extrapolate=False)
    inv = 1.0 / r
    outside = inv > g.r_max
    vals = np.zeros_like(r)
    vals[~outside] = np.maximum(spline(inv[~outside]), 0.0) / r[~outside] ** 4
    extrapolated = bool(np.any(outside)) and bool(V.values[-1] > 0)
    if extrapolated and warn:
        warnings.warn(
            f"{int(outside.sum())} nodes need V beyond r_max={g.r_max}; zero-filled",
            ExtrapolationWarning,
            stacklevel=2,
        )
    return InversionResult(PotentialField(g, vals), extrapolated, ~outside)


def decay_tail_check(V: PotentialField) -> float:
    """Least-squares constant ``c`` fitting ``r^4 V(r)`` on the outer 20% of the grid."""
    g = V.grid
    if not isinstance(g, RadialGrid):
        raise InvalidInputError("decay_tail_check needs a radial field")
    r = g.nodes
    sel = r >= 0.8 * g.r_max
    return float(np.mean(r[sel] ** 4 * V.values[sel]))


# -- axisymmetric configurations ---------------------------------------------


def _stretched_axis(core: float, h: float, outer: float, growth: float) -> np.ndarray:
    """Cell faces: uniform spacing ``h`` on ``[0, core]``, then geometric growth to ``outer``."""
    faces = list(np.arange(0.0, core + 0.5 * h, h))
    step = h
    while faces[-1] < outer:
        step *= growth
        faces.append(faces[-1] + step)
    return np.array(faces)


def axisymmetric_mu(
    potential,
    count: int = 2,
    core_z: float = 15.0,
    core_rho: float = 5.0,
    h: float = 0.1,
    outer: float = 4000.0,
    growth: float = 1.06,
) -> np.ndarray:
    """Largest Birman–Schwinger values of an axisymmetric ``V(z, rho)`` in ``d = 3``.

    Finite volumes on a tensor grid in cylindrical coordinates (azimuthally
    invariant functions only): uniform cells of size ``h`` for ``|z| <= core_z``
    and ``rho <= core_rho``, geometrically growing cells beyond, Dirichlet
    at distance ``outer``.  Used to test two-bubble configurations, which are
    not radial.

    Parameters
    ----------
    potential : callable
        ``potential(z, rho)`` evaluated on broadcast cell-centre arrays.
    """
    zf_half = _stretched_axis(core_z, h, outer, growth)
    zf = np.concatenate((-zf_half[::-1], zf_half[1:]))
    rf = _stretched_axis(core_rho, h, outer, growth)
    zc = 0.5 * (zf[1:] + zf[:-1])
    rc = 0.5 * (rf[1:] + rf[:-1])
    dz = np.diff(zf)
    dr = np.diff(rf)
    nz, nr = zc.size, rc.size
    vol = 2.0 * np.pi * np.outer(dz, rc * dr)  # cell volumes
    Z, P = np.meshgrid(zc, rc, indexing="ij")
    v = np.asarray(potential(Z, P), dtype=float)
    idx = np.arange(nz * nr).reshape(nz, nr)
    rows, cols, vals = [], [], []
    diag = np.zeros((nz, nr))
    # z-faces between (i, j) and (i+1, j): area 2 pi rho dr, distance zc[i+1] - zc[i]
    tz = 2.0 * np.pi * (rc * dr)[None, :] / np.diff(zc)[:, None]
    a, b = idx[:-1, :].ravel(), idx[1:, :].ravel()
    rows += [a, b]
    cols += [b, a]
    vals += [-tz.ravel(), -tz.ravel()]
    diag[:-1, :] += tz
    diag[1:, :] += tz
    # Dirichlet at z = +-outer: half-cell distance
    tz_end0 = 2.0 * np.pi * rc * dr / (zc[0] - zf[0])
    tz_end1 = 2.0 * np.pi * rc * dr / (zf[-1] - zc[-1])
    diag[0, :] += tz_end0
    diag[-1, :] += tz_end1
    # rho-faces between (i, j) and (i, j+1): area 2 pi rf[j+1] dz
    tr = 2.0 * np.pi * dz[:, None] * rf[1:-1][None, :] / np.diff(rc)[None, :]
    a, b = idx[:, :-1].ravel(), idx[:, 1:].ravel()
    rows += [a, b]
    cols += [b, a]
    vals += [-tr.ravel(), -tr.ravel()]
    diag[:, :-1] += tr
    diag[:, 1:] += tr
    diag[:, -1] += 2.0 * np.pi * dz * rf[-1] / (rf[-1] - rc[-1])
    rows.append(idx.ravel())
    cols.append(idx.ravel())
    vals.append(diag.ravel())
    A = sp.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nz * nr, nz * nr)
    )
    lu = splu(A)
    s = np.sqrt(np.maximum(v, 0.0) * vol).ravel()

    def matvec(x):
        return s * lu.solve(s * np.ravel(x))

    op = LinearOperator(A.shape, matvec=matvec, dtype=float)
    rng = np.random.default_rng(7)
    v0 = s * (1.0 + 0.1 * rng.standard_normal(s.size))
    w = eigsh(op, k=count, which="LA", v0=v0, tol=1e-12, return_eigenvectors=False)
    return np.sort(w)[::-1]
