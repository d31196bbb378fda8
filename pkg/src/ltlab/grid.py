"""Uniform grids, sampled potentials and quadrature.

Every solver in the package works on one of two discretizations:

* :class:`Grid1D` -- ``n`` interior nodes of the interval ``[x_min, x_max]``
  with homogeneous Dirichlet conditions at both ends;
* :class:`RadialGrid` -- ``n`` interior nodes ``r_i = i h`` of ``[0, r_max]``
  for radial functions on :math:`\\mathbb{R}^d`.

Integrals use the trapezoidal rule.  Because sampled fields vanish at the
(implicit) boundary nodes, the rule reduces to ``h * sum(f)`` on the line and
to ``|S^{d-1}| h * sum(r^{d-1} f)`` on radial grids; these node weights are
exposed as :attr:`Grid1D.weights` / :attr:`RadialGrid.weights`.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
from scipy.special import gammaln

from .errors import InvalidInputError

__all__ = [
    "Grid1D",
    "RadialGrid",
    "Grid",
    "PotentialField",
    "sphere_area",
    "lp_norm_power",
    "rescale",
    "mass_profile",
    "grid_from_dict",
]


def sphere_area(k: int) -> float:
    """Surface area of the unit sphere :math:`S^k \\subset \\mathbb{R}^{k+1}`."""
    if k < 0:
        raise InvalidInputError(f"sphere dimension must be >= 0, got {k}")
    return float(2.0 * math.exp(0.5 * (k + 1) * math.log(math.pi) - gammaln(0.5 * (k + 1))))


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid of ``n`` interior nodes on ``[x_min, x_max]``.

    Nodes are ``x_min + i h`` for ``i = 1..n`` with ``h = (x_max - x_min)/(n + 1)``;
    the two endpoints carry the Dirichlet condition and are not stored.
    """

    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        if not (math.isfinite(self.x_min) and math.isfinite(self.x_max)):
            raise InvalidInputError("grid bounds must be finite")
        if not self.x_min < self.x_max:
            raise InvalidInputError(f"need x_min < x_max, got [{self.x_min}, {self.x_max}]")
        if int(self.n) != self.n or self.n < 3:
            raise InvalidInputError(f"need an integer n >= 3 interior nodes, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "x_min", float(self.x_min))
        object.__setattr__(self, "x_max", float(self.x_max))

    kind = "line"
    dim = 1

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / (self.n + 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.x_min + self.h * np.arange(1, self.n + 1)

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.n, self.h)

    @property
    def extent(self) -> float:
        """Length of the interval."""
        return self.x_max - self.x_min

    def to_dict(self) -> dict:
        return {"kind": self.kind, "x_min": self.x_min, "x_max": self.x_max, "n": self.n}


@dataclass(frozen=True)
class RadialGrid:
    """Radial grid ``r_i = i h``, ``i = 1..n``, ``h = r_max/(n + 1)`` in dimension ``dim``."""

    r_max: float
    n: int
    dim: int

    def __post_init__(self):
        if not (math.isfinite(self.r_max) and self.r_max > 0):
            raise InvalidInputError(f"r_max must be positive and finite, got {self.r_max}")
        if int(self.n) != self.n or self.n < 3:
            raise InvalidInputError(f"need an integer n >= 3 interior nodes, got {self.n}")
        if int(self.dim) != self.dim or self.dim < 2:
            raise InvalidInputError(f"radial grids need dim >= 2, got {self.dim}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "r_max", float(self.r_max))

    kind = "radial"

    @property
    def h(self) -> float:
        return self.r_max / (self.n + 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.h * np.arange(1, self.n + 1)

    @property
    def weights(self) -> np.ndarray:
        r = self.nodes
        return sphere_area(self.dim - 1) * self.h * r ** (self.dim - 1)

    @property
    def extent(self) -> float:
        return self.r_max

    def to_dict(self) -> dict:
        return {"kind": self.kind, "r_max": self.r_max, "n": self.n, "dim": self.dim}


Grid = Union[Grid1D, RadialGrid]


def grid_from_dict(data: dict) -> Grid:
    """Inverse of ``grid.to_dict()``."""
    kind = data.get("kind")
    if kind == "line":
        return Grid1D(data["x_min"], data["x_max"], data["n"])
    if kind == "radial":
        return RadialGrid(data["r_max"], data["n"], data["dim"])
    raise InvalidInputError(f"unknown grid kind {kind!r}")


def same_grid(a: Grid, b: Grid) -> bool:
    """True when two grids describe the same nodes (up to rounding in the bounds)."""
    if type(a) is not type(b) or a.n != b.n:
        return False
    return bool(np.allclose(a.nodes, b.nodes, rtol=1e-12, atol=1e-12 * max(1.0, a.extent)))


class PotentialField:
    """Nonnegative potential sampled at the interior nodes of a grid.

    Instances are immutable: the value array is copied and marked read-only.

    Parameters
    ----------
    grid : Grid1D or RadialGrid
    values : array_like
        One finite, nonnegative sample per node.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values):
        arr = np.array(values, dtype=float, copy=True).reshape(-1)
        if arr.shape[0] != grid.n:
            raise InvalidInputError(f"expected {grid.n} values, got {arr.shape[0]}")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("potential values must be finite")
        if np.any(arr < 0):
            raise InvalidInputError(f"potential must be nonnegative (min {arr.min():.3e})")
        arr.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", arr)

    def __setattr__(self, name, value):
        raise AttributeError("PotentialField is immutable")

    def __repr__(self):
        return f"PotentialField(grid={self.grid!r}, max={self.values.max():.6g})"

    @property
    def dim(self) -> int:
        return self.grid.dim

    def scaled(self, factor: float) -> "PotentialField":
        """Return ``factor * V``."""
        return PotentialField(self.grid, factor * self.values)

    # -- serialization -----------------------------------------------------

    def to_json_dict(self) -> dict:
        return {"grid": self.grid.to_dict(), "values": [float(v) for v in self.values]}

    @classmethod
    def from_json_dict(cls, data: dict) -> "PotentialField":
        return cls(grid_from_dict(data["grid"]), np.asarray(data["values"], dtype=float))

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json(cls, text: str) -> "PotentialField":
        return cls.from_json_dict(json.loads(text))

    def to_csv(self, path=None) -> str:
        """Write ``x,value`` (or ``r,value``) rows at 17 significant digits.

        A leading ``#`` comment line records the grid so that reading the file
        back reproduces the grid parameters exactly.  Returns the CSV text and
        also writes it to ``path`` when given.
        """
        buf = io.StringIO()
        buf.write("# grid=" + json.dumps(self.grid.to_dict()) + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x" if self.grid.kind == "line" else "r", "value"])
        for x, v in zip(self.grid.nodes, self.values):
            writer.writerow([f"{x:.17g}", f"{v:.17g}"])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source, dim: int | None = None) -> "PotentialField":
        """Read a field written by :meth:`to_csv` (path or CSV text).

        Files without the grid comment are accepted; the grid is then inferred
        from the first and last nodes (radial files need ``dim``).
        """
        text = source
        if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
            text = Path(source).read_text()
        grid_spec = None
        rows = []
        header = None
        for line in text.splitlines():
            if not line.strip():
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("grid="):
                    grid_spec = json.loads(body[len("grid="):])
                continue
            if header is None:
                header = [c.strip() for c in line.split(",")]
                if header not in (["x", "value"], ["r", "value"]):
                    raise InvalidInputError(f"unexpected CSV header {line!r}")
                continue
            a, b = line.split(",")
            rows.append((float(a), float(b)))
        if header is None or len(rows) < 3:
            raise InvalidInputError("CSV holds fewer than 3 data rows")
        xs = np.array([r[0] for r in rows])
        vs = np.array([r[1] for r in rows])
        if grid_spec is not None:
            grid = grid_from_dict(grid_spec)
        else:
            n = len(xs)
            h = (xs[-1] - xs[0]) / (n - 1)
            if header[0] == "x":
                grid = Grid1D(xs[0] - h, xs[-1] + h, n)
            else:
                if dim is None:
                    raise InvalidInputError("radial CSV without grid comment needs dim")
                grid = RadialGrid(xs[-1] + h, n, dim)
        if grid.n != len(xs) or not np.allclose(grid.nodes, xs, rtol=1e-12, atol=1e-12):
            raise InvalidInputError("CSV nodes do not match the recorded grid")
        return cls(grid, vs)


def _check_field(V) -> None:
    if not isinstance(V, PotentialField):
        raise InvalidInputError(f"expected a PotentialField, got {type(V).__name__}")


def lp_norm_power(V: PotentialField, p: float) -> float:
    """Trapezoidal approximation of :math:`\\int V^p`.

    Parameters
    ----------
    V : PotentialField
    p : float
        Exponent, ``p >= 1``.

    Returns
    -------
    float
        ``sum_i w_i V_i^p`` with the grid's node weights (which include the
        surface measure ``|S^{d-1}| r^{d-1}`` on radial grids).
    """
    _check_field(V)
    if not (math.isfinite(p) and p >= 1):
        raise InvalidInputError(f"exponent p must be >= 1, got {p}")
    if not np.all(np.isfinite(V.values)):
        raise InvalidInputError("potential values must be finite")
    return float(np.dot(V.grid.weights, V.values ** p))


def origin_value(values: np.ndarray) -> float:
    """Even quadratic extrapolation of a radial profile to ``r = 0``, clipped at 0."""
    if values.size < 2:
        return float(values[0])
    return max(0.0, float(values[0] - (values[1] - values[0]) / 3.0))


def extended_samples(V: PotentialField) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and values including the boundary points, for interpolation.

    On the line both endpoints carry the Dirichlet value 0.  On radial grids
    the origin gets the even extrapolation of the profile and ``r_max`` gets 0.
    """
    g = V.grid
    if isinstance(g, Grid1D):
        xs = np.concatenate(([g.x_min], g.nodes, [g.x_max]))
        vs = np.concatenate(([0.0], V.values, [0.0]))
    else:
        xs = np.concatenate(([0.0], g.nodes, [g.r_max]))
        vs = np.concatenate(([origin_value(V.values)], V.values, [0.0]))
    return xs, vs


def rescale(V: PotentialField, t: float) -> PotentialField:
    """Return the field sampling :math:`t^2 V(t\\,\\cdot)` on the same grid.

    The dilation maps level ``lambda_j`` to ``t^2 lambda_j`` and multiplies
    :math:`\\int V^{\\gamma+d/2}` by :math:`t^{2\\gamma}`.  Values are obtained by
    linear interpolation; points falling outside the grid are set to 0.
    """
    _check_field(V)
    if not (math.isfinite(t) and t > 0):
        raise InvalidInputError(f"dilation factor must be positive, got {t}")
    if t == 1.0:
        return V
    xs, vs = extended_samples(V)
    new = t * t * np.interp(t * V.grid.nodes, xs, vs, left=0.0, right=0.0)
    return PotentialField(V.grid, new)


def mass_profile(V: PotentialField, p: float, radii, center: float = 0.0) -> np.ndarray:
    """Local masses :math:`\\int_{B_R(c)} V^p` for each radius ``R``.

    Parameters
    ----------
    V : PotentialField
    p : float
        Exponent (``>= 1``).
    radii : array_like
        Strictly increasing positive radii.
    center : float, optional
        Ball center on the line; radial grids only allow the origin.

    Returns
    -------
    numpy.ndarray
        Nondecreasing array of the same length as ``radii``.
    """
    _check_field(V)
    if not (math.isfinite(p) and p >= 1):
        raise InvalidInputError(f"exponent p must be >= 1, got {p}")
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    if radii.size == 0:
        return np.zeros(0)
    if np.any(~np.isfinite(radii)) or np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
        raise InvalidInputError("radii must be positive and strictly increasing")
    if isinstance(V.grid, RadialGrid) and center != 0.0:
        raise InvalidInputError("radial grids only support balls centered at the origin")
    dist = np.abs(V.grid.nodes - center)
    order = np.argsort(dist, kind="stable")
    cum = np.concatenate(([0.0], np.cumsum((V.grid.weights * V.values ** p)[order])))
    counts = np.searchsorted(dist[order], radii, side="right")
    return cum[counts]
