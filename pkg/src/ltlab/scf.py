"""Self-consistent iteration for finite-rank Lieb–Thirring optimizers.

A maximizer ``V`` of the quotient at fixed ``(gamma, d, N)``, normalized to
:math:`\\int V^{\\gamma+d/2} = 1`, satisfies

.. math::  V = \\Big(\\frac{2\\gamma}{(d+2\\gamma)L}\\sum_{j\\le N}
                |\\lambda_j|^{\\gamma-1}|u_j|^2\\Big)^{1/(\\gamma+d/2-1)},

where ``lambda_j, u_j`` are the levels and normalized eigenfunctions of
``-Delta - V`` and ``L`` is the optimal quotient.  :func:`run` looks for such
``V`` by damped fixed-point iteration of the right-hand side.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import BreakdownError, DegenerateInputError, InvalidInputError
from .functional import check_gamma, riesz_ratio
from .grid import Grid1D, PotentialField, RadialGrid, lp_norm_power
from .kdv import SolitonSpec, soliton_values
from .schrodinger import SpectrumResult, lowest_eigenpairs

__all__ = [
    "ScfConfig",
    "ScfResult",
    "BindingCorrection",
    "euler_lagrange_map",
    "normalize",
    "initial_potential",
    "run",
    "binding_correction",
    "gap_check",
    "decay_rate",
    "predicted_decay_rate",
    "fixed_point_residual",
]

log = logging.getLogger(__name__)

#: Smallest accepted value of gamma + d/2 - 1 (the map's exponent is its inverse).
MIN_EXPONENT_GAP = 1e-3


@dataclass(frozen=True)
class ScfConfig:
    """Parameters of one self-consistent run.

    Attributes
    ----------
    gamma, dim, n_states :
        Riesz exponent, space dimension and number ``N`` of levels.
    eta : float
        Initial mixing parameter, ``0 < eta <= 1``; halved whenever a step
        lowers the quotient by more than ``tol_objective``.
    max_iter : int
    tol_fixed_point : float
        Stop when the relative ``L^{gamma+d/2}`` distance between the iterate
        and its normalized image falls below this value.
    tol_objective : float
        Decrease of the quotient tolerated before the step is damped.
    degeneracy_tol : float
        Levels closer than this to the ``N``-th one share its occupation.
    box, grid_n :
        Half-width of the interval ``[-box, box]`` (``d = 1``) or radius of the
        ball (``d >= 2``, radial), and interior node count.
    init : str
        ``"gaussian"`` or ``"gaussian:<width>"``; ``"bumps:<k>:<separation>"``
        for ``k`` equal Gaussians in a row; ``"soliton:<b1,b2,..>@<X1,X2,..>"``;
        ``"file:<path>"`` for a CSV/JSON field; ``"random"`` for a seeded
        random sum of Gaussians.
    seed : int
        Seed for the ``"random"`` initialization.
    """

    gamma: float
    dim: int = 1
    n_states: int = 1
    eta: float = 0.5
    max_iter: int = 500
    tol_fixed_point: float = 1e-8
    tol_objective: float = 1e-6
    degeneracy_tol: float = 1e-9
    box: float = 60.0
    grid_n: int = 8192
    init: str = "gaussian"
    seed: int = 0

    def __post_init__(self):
        check_gamma(self.gamma, self.dim)
        if self.gamma + self.dim / 2.0 - 1.0 < MIN_EXPONENT_GAP:
            raise InvalidInputError("gamma + d/2 - 1 is too close to 0 for the fixed-point map")
        if int(self.n_states) != self.n_states or self.n_states < 1:
            raise InvalidInputError(f"n_states must be a positive integer, got {self.n_states}")
        if not (0 < self.eta <= 1):
            raise InvalidInputError(f"mixing eta must lie in (0, 1], got {self.eta}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise InvalidInputError(f"max_iter must be a positive integer, got {self.max_iter}")
        for name in ("tol_fixed_point", "tol_objective", "degeneracy_tol"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"{name} must be positive")
        if not (self.box > 0 and math.isfinite(self.box)):
            raise InvalidInputError(f"box must be positive, got {self.box}")
        if int(self.grid_n) != self.grid_n or self.grid_n < 3:
            raise InvalidInputError(f"grid_n must be an integer >= 3, got {self.grid_n}")

    @property
    def exponent(self) -> float:
        """``gamma + d/2``."""
        return self.gamma + self.dim / 2.0

    def make_grid(self):
        if self.dim == 1:
            return Grid1D(-self.box, self.box, self.grid_n)
        return RadialGrid(self.box, self.grid_n, self.dim)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ScfResult:
    """Outcome of :func:`run`.

    ``spectrum`` holds ``N + 1`` levels of ``V_star`` so that ``gap`` is
    ``lambda_{N+1} - lambda_N`` (a missing level counts as 0).
    """

    V_star: PotentialField
    spectrum: SpectrumResult
    L_estimate: float
    gap: float
    decay_rate_fit: float
    iterations: int
    converged: bool
    residual: float
    config: ScfConfig
    eta_final: float = float("nan")
    trace: tuple = ()

    @property
    def n_states(self) -> int:
        return self.config.n_states

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "L_estimate": self.L_estimate,
            "eigenvalues": [float(v) for v in self.spectrum.eigenvalues],
            "gap": self.gap,
            "decay_rate_fit": self.decay_rate_fit,
            "iterations": self.iterations,
            "converged": self.converged,
            "residual": self.residual,
        }


def normalize(V: PotentialField, p: float) -> PotentialField:
    """Scale ``V`` (not dilate) so that ``int V^p = 1``."""
    norm = lp_norm_power(V, p)
    if norm == 0.0:
        raise DegenerateInputError("cannot normalize the zero potential")
    return V.scaled(norm ** (-1.0 / p))


def _occupations(eigenvalues: np.ndarray, n_states: int, tol: float) -> np.ndarray:
    """Occupation weights for the flat level list.

    Levels strictly below the cluster containing the ``N``-th level get weight
    1; the cluster (levels within ``tol`` of the ``N``-th) shares the remaining
    states equally; everything else, and every nonnegative level, gets 0.
    """
    lam = np.asarray(eigenvalues)
    occ = np.zeros(lam.shape[0])
    neg = lam < 0
    M = int(np.count_nonzero(neg))
    if M == 0:
        return occ
    if M <= n_states:
        occ[:M] = 1.0
        return occ
    cut = lam[n_states - 1]
    cluster = neg & (np.abs(lam - cut) <= tol)
    below = neg & (lam < cut) & ~cluster
    occ[below] = 1.0
    occ[cluster] = (n_states - np.count_nonzero(below)) / np.count_nonzero(cluster)
    return occ


def _spectrum_with_shell(V: PotentialField, n_states: int, tol: float) -> SpectrumResult:
    """Levels of ``V`` extending past any degeneracy cluster at the ``N``-cut."""
    count = min(n_states + 1, V.grid.n)
    while True:
        spec = lowest_eigenpairs(V, count)
        lam = spec.eigenvalues
        if count >= V.grid.n or n_states >= count:
            return spec
        if not (lam[-1] < 0 and abs(lam[-1] - lam[n_states - 1]) <= tol):
            return spec
        count = min(2 * count, V.grid.n)


def _density(spec: SpectrumResult, gamma: float, n_states: int, tol: float) -> np.ndarray:
    lam = spec.eigenvalues
    occ = _occupations(lam, n_states, tol)
    rho = np.zeros(spec.grid.n)
    for j in np.nonzero(occ > 0)[0]:
        rho += occ[j] * (-lam[j]) ** (gamma - 1.0) * spec.density(spec.state_index[j])
    return rho


def euler_lagrange_map(
    V: PotentialField,
    gamma: float,
    n_states: int,
    L_current: float,
    spectrum: Optional[SpectrumResult] = None,
    degeneracy_tol: float = 1e-9,
) -> PotentialField:
    """Apply the Euler–Lagrange right-hand side once.

    Parameters
    ----------
    V : PotentialField
    gamma : float
    n_states : int
    L_current : float
        Value of the quotient used in the prefactor (positive).
    spectrum : SpectrumResult, optional
        Levels of ``V``; must extend past any degeneracy cluster at the cut.
    degeneracy_tol : float

    Returns
    -------
    PotentialField
        ``(2 gamma / ((d + 2 gamma) L) * sum_j w_j |lambda_j|^{gamma-1} |u_j|^2)^{1/(gamma+d/2-1)}``
        with occupation weights ``w_j`` (1 below the cut, fractional inside a
        degenerate shell at the cut).

    Raises
    ------
    BreakdownError
        If ``-Delta - V`` has no negative eigenvalue.
    """
    d = V.grid.dim
    check_gamma(gamma, d)
    q = gamma + d / 2.0 - 1.0
    if q < MIN_EXPONENT_GAP:
        raise InvalidInputError("gamma + d/2 - 1 is too close to 0 for the fixed-point map")
    if not (L_current > 0 and math.isfinite(L_current)):
        raise InvalidInputError(f"L_current must be positive, got {L_current}")
    if spectrum is None:
        spectrum = _spectrum_with_shell(V, n_states, degeneracy_tol)
    if spectrum.n_bound == 0:
        raise BreakdownError("no negative eigenvalue: the iteration cannot proceed")
    rho = _density(spectrum, gamma, n_states, degeneracy_tol)
    c = 2.0 * gamma / ((d + 2.0 * gamma) * L_current)
    return PotentialField(V.grid, (c * rho) ** (1.0 / q))


def _lp_dist(A: np.ndarray, B: np.ndarray, w: np.ndarray, p: float) -> float:
    return float(np.dot(w, np.abs(A - B) ** p)) ** (1.0 / p)


def fixed_point_residual(V: PotentialField, image: PotentialField, p: float) -> float:
    """``|| image/||image||_p - V ||_p / ||V||_p`` in ``L^p``, ``p = gamma + d/2``.

    Comparing with the normalized image removes the overall-scale mismatch
    ``EL(V) = (1 + O(h^2)) V`` that discretization leaves at the discrete fixed
    point, so that the residual can be driven to round-off.
    """
    w = V.grid.weights
    nv = lp_norm_power(V, p) ** (1.0 / p)
    ni = lp_norm_power(image, p) ** (1.0 / p)
    if ni == 0.0:
        return math.inf
    return _lp_dist(image.values / ni, V.values / nv, w, p)


# -- initial profiles --------------------------------------------------------


def initial_potential(config: ScfConfig, grid=None) -> PotentialField:
    """Build the starting field described by ``config.init`` (before normalization)."""
    grid = grid or config.make_grid()
    x = grid.nodes
    kind, _, arg = config.init.partition(":")
    kind = kind.strip().lower()
    if kind == "gaussian":
        width = float(arg) if arg else 1.0
        return PotentialField(grid, np.exp(-0.5 * (x / width) ** 2))
    if kind == "bumps":
        parts = arg.split(":") if arg else []
        k = int(parts[0]) if parts else max(config.n_states, 2)
        sep = float(parts[1]) if len(parts) > 1 else 6.0
        if grid.kind != "line":
            raise InvalidInputError("bump rows are only defined on the line")
        centers = (np.arange(k) - 0.5 * (k - 1)) * sep
        return PotentialField(grid, sum(np.exp(-0.5 * (x - c) ** 2) for c in centers))
    if kind == "soliton":
        if grid.kind != "line":
            raise InvalidInputError("soliton initialization needs d = 1")
        b_txt, _, x_txt = arg.partition("@")
        betas = [float(t) for t in b_txt.split(",") if t.strip()]
        shifts = [float(t) for t in x_txt.split(",") if t.strip()] if x_txt else None
        spec = SolitonSpec(tuple(betas), None if shifts is None else tuple(shifts))
        return PotentialField(grid, soliton_values(spec.betas, spec.shifts, x))
    if kind == "random":
        rng = np.random.default_rng(config.seed)
        k = int(arg) if arg else 3
        span = 0.25 * grid.extent
        vals = np.zeros_like(x)
        for _ in range(k):
            c = rng.uniform(-span, span) if grid.kind == "line" else rng.uniform(0, span)
            wd = rng.uniform(0.5, 2.0)
            vals += rng.uniform(0.5, 1.5) * np.exp(-0.5 * ((x - c) / wd) ** 2)
        return PotentialField(grid, vals)
    if kind == "file":
        from .io import load_field

        V = load_field(arg, dim=config.dim)
        return V
    raise InvalidInputError(f"unknown initialization {config.init!r}")


# -- decay diagnostic --------------------------------------------------------


def decay_rate(V: PotentialField, window=(0.75, 0.95)) -> float:
    """Exponential decay rate of ``V`` fitted in its outer region.

    Fits ``log V`` by least squares against the distance ``s`` from the
    ``V``-weighted centre (the origin on radial grids), over the nodes with
    ``s`` between ``window[0]`` and ``window[1]`` times the largest distance
    available inside the box.  The part next to the Dirichlet wall is left out
    because the wall bends the eigenfunctions (and hence ``V``) down there.
    Returns the negated slope, or ``nan`` if fewer than 3 usable samples.
    """
    g = V.grid
    x = g.nodes
    v = V.values
    if g.kind == "line":
        c = float(np.sum(v * x) / np.sum(v)) if np.sum(v) > 0 else 0.0
        s = np.abs(x - c)
        s_max = min(c - g.x_min, g.x_max - c)
    else:
        s = x
        s_max = g.r_max
    sel = (s >= window[0] * s_max) & (s <= window[1] * s_max) & (v > 0)
    tiny = np.finfo(float).tiny * 1e10
    sel &= v > tiny
    if np.count_nonzero(sel) < 3:
        return float("nan")
    slope = np.polyfit(s[sel], np.log(v[sel]), 1)[0]
    return float(-slope)


# -- driver ------------------------------------------------------------------


def run(
    config: ScfConfig,
    V0: Optional[PotentialField] = None,
    callback: Optional[Callable[[dict], None]] = None,
) -> ScfResult:
    """Damped fixed-point iteration ``V <- (1 - eta) V + eta EL(V)``.

    Every iterate is renormalized to ``int V^{gamma+d/2} = 1`` and the prefactor
    of the Euler–Lagrange map uses the running quotient.  A step that lowers
    the quotient by more than ``tol_objective`` is rejected and ``eta`` halved.

    Parameters
    ----------
    config : ScfConfig
    V0 : PotentialField, optional
        Starting field; defaults to :func:`initial_potential`.
    callback : callable, optional
        Receives one dict per iteration (``iteration``, ``ratio``,
        ``residual``, ``eta``, ``accepted``), e.g. to stream a JSON-lines trace.

    Returns
    -------
    ScfResult
        On non-convergence, the iterate with the smallest residual, flagged
        ``converged=False``.

    Raises
    ------
    BreakdownError
        If an iterate has no bound state.
    """
    p = config.exponent
    N = config.n_states
    tol_deg = config.degeneracy_tol
    V = V0 if V0 is not None else initial_potential(config)
    if V.grid.dim != config.dim:
        raise InvalidInputError(f"initial field has dim {V.grid.dim}, config says {config.dim}")
    V = normalize(V, p)

    def evaluate(W):
        spec = _spectrum_with_shell(W, N, tol_deg)
        if spec.n_bound == 0:
            raise BreakdownError("iterate has no bound state")
        rep = riesz_ratio(W, config.gamma, N, spectrum=spec)
        return spec, rep.ratio

    spec, ratio = evaluate(V)
    eta = config.eta
    best = None
    trace = []
    converged = False
    iterations = 0
    residual = math.inf
    for it in range(1, config.max_iter + 1):
        iterations = it
        image = euler_lagrange_map(V, config.gamma, N, ratio, spectrum=spec, degeneracy_tol=tol_deg)
        residual = fixed_point_residual(V, image, p)
        if best is None or residual < best[0]:
            best = (residual, V, spec, ratio, it)
        if residual <= config.tol_fixed_point:
            converged = True
            break
        while True:
            mixed = PotentialField(V.grid, (1.0 - eta) * V.values + eta * image.values)
            cand = normalize(mixed, p)
            cand_spec, cand_ratio = evaluate(cand)
            accepted = cand_ratio >= ratio - config.tol_objective or eta <= 1e-6
            if accepted:
                break
            eta *= 0.5
        if residual < 10 * config.tol_fixed_point and cand_ratio < ratio - 1e-8:
            log.warning("quotient decreased by %.3e near convergence (iteration %d)", ratio - cand_ratio, it)
        record = {"iteration": it, "ratio": ratio, "residual": residual, "eta": eta}
        trace.append(record)
        if callback is not None:
            callback(dict(record))
        V, spec, ratio = cand, cand_spec, cand_ratio

    if not converged:
        residual, V, spec, ratio, _ = best
        log.info("no convergence after %d iterations (best residual %.3e)", iterations, residual)

    final_spec = lowest_eigenpairs(V, N + 1)
    lam = final_spec.eigenvalues
    return ScfResult(
        V_star=V,
        spectrum=final_spec,
        L_estimate=riesz_ratio(V, config.gamma, N, spectrum=final_spec).ratio,
        gap=float(lam[N] - lam[N - 1]),
        decay_rate_fit=decay_rate(V),
        iterations=iterations,
        converged=converged,
        residual=float(residual),
        config=config,
        eta_final=eta,
        trace=tuple(trace),
    )


def predicted_decay_rate(result: ScfResult) -> float:
    """Envelope rate ``2 sqrt|lambda_N| / (gamma + d/2 - 1)`` implied by the last occupied level."""
    cfg = result.config
    lam = result.spectrum.eigenvalues
    occupied = lam[: cfg.n_states]
    occupied = occupied[occupied < 0]
    if occupied.size == 0:
        return float("nan")
    return 2.0 * math.sqrt(-occupied[-1]) / (cfg.gamma + cfg.dim / 2.0 - 1.0)


def gap_check(result: ScfResult, degeneracy_tol: Optional[float] = None) -> bool:
    """True iff ``lambda_N < lambda_{N+1} - degeneracy_tol`` (missing levels are 0)."""
    tol = result.config.degeneracy_tol if degeneracy_tol is None else degeneracy_tol
    lam = np.asarray(result.spectrum.eigenvalues)
    N = result.config.n_states
    nxt = float(lam[N]) if lam.shape[0] > N else 0.0
    return bool(lam[N - 1] < nxt - tol)


# -- binding -----------------------------------------------------------------


@dataclass(frozen=True)
class BindingCorrection:
    """Quantities of the two-copy trial state built from an optimizer.

    Attributes
    ----------
    A_R : float
        ``int (rho_- + rho_+)^p - rho_-^p - rho_+^p`` (with the ``beta``
        prefactor), the positive interaction term.
    e_R : float
        Largest overlap ``int |u_i(x - R/2)| |u_j(x + R/2)|``.
    B_R : float
        Largest cross term ``int |u_i^+| |u_j^+| (V_R - V^+)``.
    trial_ratio : float
        Quotient of the trial potential ``V_R`` with ``2N`` levels.
    single_ratio : float
        Quotient of ``V_opt`` with ``N`` levels.
    predicted_ratio : float
        Leading-order value ``L (1 + (d/2 + gamma - 1) A_R / 2)``.
    R : float
        Separation actually used (rounded to a whole number of grid steps).
    """

    A_R: float
    e_R: float
    B_R: float
    trial_ratio: float
    single_ratio: float
    predicted_ratio: float
    R: float

    def to_dict(self) -> dict:
        return asdict(self)


def _shift(values: np.ndarray, k: int) -> np.ndarray:
    """``out[i] = values[i + k]`` with zero fill, i.e. samples of ``f(x + k h)``."""
    out = np.zeros_like(values)
    n = values.shape[0]
    if k >= 0:
        out[: n - k] = values[k:]
    else:
        out[-k:] = values[: n + k]
    return out


def binding_correction(
    V_opt: PotentialField,
    gamma: float,
    n_states: int,
    R: float,
    dim: int = 1,
) -> BindingCorrection:
    """Evaluate the two-copy trial state at separation ``R``.

    With ``rho = sum_{j <= N} |lambda_j|^{gamma-1} u_j^2``,
    ``beta = 2 gamma / (L (d + 2 gamma))`` and ``p = (gamma + d/2)/(gamma + d/2 - 1)``,
    the trial potential is ``V_R = (beta rho(. - R/2) + beta rho(. + R/2))^{p-1}``.
    The translations are done by whole grid steps (``R/2`` is rounded to the
    nearest multiple of ``h``) so that each copy is an exact translate of the
    sampled optimizer and no interpolation error enters the comparison.

    Raises
    ------
    InvalidInputError
        If the field is not one-dimensional, ``dim != 1``, or ``R`` is not in
        ``(0, box length)``.
    """
    g = V_opt.grid
    if dim != 1 or not isinstance(g, Grid1D):
        raise InvalidInputError("binding_correction is implemented for one-dimensional fields only")
    if not (R > 0 and math.isfinite(R)):
        raise InvalidInputError(f"separation must be positive, got {R}")
    if R >= g.extent:
        raise InvalidInputError(f"separation {R} exceeds the box length {g.extent}")
    check_gamma(gamma, 1)
    d = 1
    spec = lowest_eigenpairs(V_opt, n_states)
    single = riesz_ratio(V_opt, gamma, n_states, spectrum=spec)
    L = single.ratio
    if L <= 0:
        raise BreakdownError("the optimizer has no bound state")
    q = gamma + d / 2.0 - 1.0
    p = (gamma + d / 2.0) / q
    beta = 2.0 * gamma / (L * (d + 2.0 * gamma))
    lam = spec.eigenvalues[:n_states]
    idx = [j for j in range(n_states) if lam[j] < 0]
    us = [spec.eigenfunctions[:, spec.state_index[j]] for j in idx]
    rho = sum((-lam[j]) ** (gamma - 1.0) * u ** 2 for j, u in zip(idx, us))

    k = int(round(0.5 * R / g.h))
    R_used = 2.0 * k * g.h
    rho_m = _shift(rho, -k)  # rho(x - R/2): copy centred at +R/2
    rho_p = _shift(rho, k)  # rho(x + R/2): copy centred at -R/2
    w = g.weights
    both = beta * (rho_m + rho_p)
    A_R = float(np.dot(w, both ** p - (beta * rho_m) ** p - (beta * rho_p) ** p))
    V_R = both ** (p - 1.0)
    V_plus = (beta * rho_p) ** (p - 1.0)
    u_m = [np.abs(_shift(u, -k)) for u in us]
    u_p = [np.abs(_shift(u, k)) for u in us]
    e_R = max((float(np.dot(w, a * b)) for a in u_m for b in u_p), default=0.0)
    B_R = max((float(np.dot(w, a * b * (V_R - V_plus))) for a in u_p for b in u_p), default=0.0)
    trial = riesz_ratio(PotentialField(g, V_R), gamma, 2 * n_states).ratio
    predicted = L * (1.0 + 0.5 * (d / 2.0 + gamma - 1.0) * A_R)
    return BindingCorrection(
        A_R=A_R, e_R=e_R, B_R=B_R, trial_ratio=trial, single_ratio=L,
        predicted_ratio=predicted, R=R_used,
    )
