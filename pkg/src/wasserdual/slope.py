"""Local Lipschitz slopes of scalar fields on finite metric spaces.

On a finite space the shrinking-ball slope limit degenerates to 0, so the
working surrogate is the slope over the nearest-neighbor shell of each
point, and the duality harness uses the same scale on both sides of any
comparison. The slope at a fixed radius r is exact (a finite max), and the
global Lipschitz constant is the slope at the diameter.
"""

from dataclasses import dataclass

import numpy as np

from .metric import DiscretePath, FiniteMetricSpace


@dataclass(frozen=True)
class ScalarField:
    """Real values attached to the points of a space."""

    space: FiniteMetricSpace
    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=float))
        if v.ndim != 1 or v.size != self.space.size:
            raise ValueError("value vector length must match the point count")
        if not np.all(np.isfinite(v)):
            raise ValueError("field has non-finite values")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __add__(self, other):
        if isinstance(other, ScalarField):
            return ScalarField(self.space, self.values + other.values)
        return ScalarField(self.space, self.values + float(other))

    def __mul__(self, c: float):
        return ScalarField(self.space, self.values * float(c))

    __rmul__ = __mul__

    def sup_norm(self) -> float:
        return float(np.abs(self.values).max())

    def to_csv(self, path: str) -> None:
        from ._csvio import write_csv

        write_csv(path, ["index", "value"], list(enumerate(self.values)))


def field_from_csv(space: FiniteMetricSpace, path: str) -> ScalarField:
    from ._csvio import read_csv_rows

    _, rows = read_csv_rows(path)
    v = np.zeros(space.size)
    for idx, val in rows:
        v[int(idx)] = float(val)
    return ScalarField(space, v)


@dataclass(frozen=True)
class SlopeField:
    """Nonnegative slope values together with the radius they were taken at.

    ``scale`` is either a positive float (uniform radius) or the string
    "nearest" for the per-point nearest-neighbor shell.
    """

    space: FiniteMetricSpace
    values: np.ndarray
    scale: object

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=float))
        if np.any(v < 0):
            raise ValueError("slopes must be nonnegative")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def sup(self) -> float:
        return float(self.values.max()) if self.values.size else 0.0


def _quotients(f: ScalarField) -> np.ndarray:
    """|f(x)-f(y)| / d(x,y) with zeros on the diagonal and coincident pairs."""
    D = f.space.dist
    diff = np.abs(f.values[:, None] - f.values[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        Q = np.where(D > 0.0, diff / np.where(D > 0.0, D, 1.0), 0.0)
    return Q


def slope_at_scale(f: ScalarField, r: float) -> SlopeField:
    """Slope over the punctured ball of radius r: sup_{0 < d(x,y) <= r} |df|/d.

    Points whose punctured r-ball is empty get slope 0.
    """
    if r <= 0:
        raise ValueError(f"slope radius must be positive, got {r}")
    D = f.space.dist
    Q = _quotients(f)
    Q = np.where((D > 0.0) & (D <= r), Q, 0.0)
    return SlopeField(f.space, Q.max(axis=1), r)


def local_slope(f: ScalarField) -> SlopeField:
    """Nearest-neighbor-shell slope, the discrete stand-in for the local slope.

    At each point the radius is the distance to its nearest distinct point,
    so the sup runs exactly over the nearest shell.
    """
    D = f.space.dist
    radii = f.space.nearest_neighbor_radii()
    Q = _quotients(f)
    Q = np.where((D > 0.0) & (D <= radii[:, None]), Q, 0.0)
    return SlopeField(f.space, Q.max(axis=1), "nearest")


def lipschitz_constant(f: ScalarField) -> float:
    """Exact max over pairs of |f(x)-f(y)| / d(x,y) (0 on a singleton)."""
    if f.space.size < 2:
        return 0.0
    return float(_quotients(f).max())


def upper_gradient_check(f: ScalarField, g: SlopeField, path: DiscretePath) -> float:
    """Trapezoid-rule margin of the upper-gradient inequality along a path.

    Returns (integral of g along the path) - |f(end) - f(start)|. With
    g = slope_at_scale(f, r >= mesh) the margin is bounded below by
    -2 * Lip(f) * h, h the longest edge on the path.
    """
    verts = list(path.vertices)
    if len(verts) == 1:
        return 0.0
    gv = g.values[verts]
    lengths = np.diff(np.asarray(path.cumulative_length))
    integral = float(np.sum(0.5 * (gv[:-1] + gv[1:]) * lengths))
    jump = abs(float(f.values[verts[-1]] - f.values[verts[0]]))
    return integral - jump


def mcshane_extension(space: FiniteMetricSpace, anchors, values) -> ScalarField:
    """Largest 1-Lipschitz extension pattern: f(x) = min_a { v_a + d(a, x) }.

    ``values`` must be 1-Lipschitz on the anchor set; the input is rescaled
    by its own anchor-set Lipschitz constant if it is not.
    """
    anchors = np.asarray(list(anchors), dtype=int)
    vals = np.asarray(list(values), dtype=float)
    D = space.dist[np.ix_(anchors, anchors)]
    with np.errstate(divide="ignore", invalid="ignore"):
        Q = np.where(D > 0, np.abs(vals[:, None] - vals[None, :]) / np.where(D > 0, D, 1), 0.0)
    lip = Q.max() if Q.size else 0.0
    if lip > 1.0:
        vals = vals / lip
    ext = np.min(vals[:, None] + space.dist[anchors, :], axis=0)
    return ScalarField(space, ext)
