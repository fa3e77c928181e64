"""Compactly supported positive measures in the plane, as weighted atoms.

Every atom carries a panel scale: the size of the geometric piece of
the measure it stands for. Curve atoms represent an arc of length
``scale``; area atoms represent a cell whose equivalent-disc radius is
``scale``. The scale is what lets the log-singular self interaction be
averaged analytically in :mod:`bslab.bskernel`.

Measures built by the constructors below keep a JSON-style descriptor so
they can be refined and regenerated; hand-assembled ones cannot.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

# innermost radius reached by the graded radial grid
RADIAL_R_MIN = 1e-8


class MeasureError(ValueError):
    """Invalid measure construction."""


class GeometryError(MeasureError):
    """Degenerate geometry (zero-length segment, repeated vertex)."""


class PositivityError(MeasureError):
    """A density sample or atom weight is negative."""


class NotRefinableError(MeasureError):
    """The measure carries no generator descriptor."""


class PanelKind(str, enum.Enum):
    CURVE = "curve"
    AREA = "area"


@dataclass(frozen=True)
class Atom:
    position: tuple[float, float]
    weight: float
    scale: float
    panel_kind: PanelKind


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """Immutable list of atoms, stored column-wise.

    ``positions`` is (n, 2); ``weights`` and ``scales`` are (n,);
    ``is_area`` marks area panels (the rest are curve panels).
    """

    positions: np.ndarray
    weights: np.ndarray
    scales: np.ndarray
    is_area: np.ndarray
    label: str = ""
    descriptor: dict | None = field(default=None, repr=False)

    def __post_init__(self):
        pos = _readonly(self.positions).reshape(-1, 2)
        w = _readonly(self.weights).ravel()
        sc = np.asarray(self.scales, dtype=float).ravel()
        kind = np.array(self.is_area, dtype=bool).ravel()
        kind.setflags(write=False)
        n = pos.shape[0]
        if n == 0:
            raise MeasureError("a measure needs at least one atom")
        if w.shape != (n,) or sc.shape != (n,) or kind.shape != (n,):
            raise MeasureError("atom arrays have inconsistent lengths")
        if not np.all(np.isfinite(pos)):
            raise MeasureError("atom positions must be finite (compact support)")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise PositivityError("atom weights must be finite and nonnegative")
        if np.any(w == 0):
            raise PositivityError("zero-weight atoms are not allowed")
        # NaN scale marks a bare point atom: representable, not assemblable
        if np.any(sc[~np.isnan(sc)] <= 0):
            raise MeasureError("atom scales must be positive")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "scales", _readonly(sc))
        object.__setattr__(self, "is_area", kind)

    def __len__(self):
        return self.weights.shape[0]

    @property
    def n(self) -> int:
        return len(self)

    @cached_property
    def total_mass(self) -> float:
        """mu(R^2), by compensated summation of the weights."""
        return math.fsum(self.weights.tolist())

    @cached_property
    def distances(self) -> np.ndarray:
        """Pairwise atom distances (n, n), zero on the diagonal."""
        diff = self.positions[:, None, :] - self.positions[None, :, :]
        d = np.hypot(diff[..., 0], diff[..., 1])
        d.setflags(write=False)
        return d

    @property
    def diameter(self) -> float:
        """Diameter of the support (max pairwise atom distance)."""
        return float(self.distances.max()) if self.n > 1 else 0.0

    @property
    def radius(self) -> float:
        """Largest distance of an atom from the origin."""
        return float(np.hypot(*self.positions.T).max())

    @property
    def has_scales(self) -> bool:
        return not np.any(np.isnan(self.scales))

    @property
    def atoms(self) -> list[Atom]:
        return [
            Atom((float(x), float(y)), float(w), float(s),
                 PanelKind.AREA if a else PanelKind.CURVE)
            for (x, y), w, s, a in zip(self.positions, self.weights,
                                       self.scales, self.is_area)
        ]

    def __add__(self, other: "AtomicMeasure") -> "AtomicMeasure":
        return concat([self, other])


def from_atoms(atoms: Iterable[Atom], label: str = "") -> AtomicMeasure:
    """Hand-assemble a measure. The result is not refinable."""
    atoms = list(atoms)
    return AtomicMeasure(
        positions=[a.position for a in atoms],
        weights=[a.weight for a in atoms],
        scales=[a.scale for a in atoms],
        is_area=[PanelKind(a.panel_kind) is PanelKind.AREA for a in atoms],
        label=label,
    )


def point_atom(position=(0.0, 0.0), weight=1.0, scale=float("nan"),
               panel_kind=PanelKind.AREA) -> AtomicMeasure:
    """A single hand-made atom; ``scale=nan`` gives a bare point mass."""
    return from_atoms([Atom(tuple(position), weight, scale, panel_kind)],
                      label="point")


def concat(measures: Sequence[AtomicMeasure], label: str | None = None) -> AtomicMeasure:
    """Sum of measures (concatenation of their atom lists)."""
    measures = list(measures)
    descs = [m.descriptor for m in measures]
    desc = None
    if all(d is not None for d in descs):
        desc = {"type": "union", "parts": descs}
    return AtomicMeasure(
        positions=np.concatenate([m.positions for m in measures]),
        weights=np.concatenate([m.weights for m in measures]),
        scales=np.concatenate([m.scales for m in measures]),
        is_area=np.concatenate([m.is_area for m in measures]),
        label=label if label is not None else "+".join(m.label for m in measures),
        descriptor=desc,
    )


def circle(r: float, n: int) -> AtomicMeasure:
    """Arc-length measure on the circle |x| = r, n equal panels."""
    if not r > 0:
        raise MeasureError("circle radius must be positive")
    if int(n) != n or n < 3:
        raise MeasureError("circle needs n >= 3 atoms")
    n = int(n)
    theta = 2.0 * np.pi * np.arange(n) / n
    pos = r * np.column_stack([np.cos(theta), np.sin(theta)])
    # exact zeros at the quadrant points keep small circles symmetric
    pos[np.abs(pos) < 1e-15 * r] = 0.0
    h = 2.0 * np.pi * r / n
    return AtomicMeasure(pos, np.full(n, h), np.full(n, h), np.zeros(n, bool),
                         label=f"circle(r={r:g}, n={n})",
                         descriptor={"type": "circle", "r": float(r), "n": n})


def _segment_arrays(a, b, n):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    length = float(np.hypot(*(b - a)))
    if length == 0.0:
        raise GeometryError(f"degenerate segment {a.tolist()} -> {b.tolist()}")
    t = (np.arange(n) + 0.5) / n
    pos = a[None, :] + t[:, None] * (b - a)[None, :]
    h = length / n
    return pos, np.full(n, h)


def segment(a, b, n: int) -> AtomicMeasure:
    """Arc-length measure on the segment [a, b], n midpoint panels."""
    if int(n) != n or n < 1:
        raise MeasureError("segment needs n >= 1")
    n = int(n)
    pos, h = _segment_arrays(a, b, n)
    return AtomicMeasure(pos, h, h, np.zeros(n, bool),
                         label=f"segment(n={n})",
                         descriptor={"type": "segment", "a": [float(v) for v in a],
                                     "b": [float(v) for v in b], "n": n})


def polyline(vertices, n_per_unit: float) -> AtomicMeasure:
    """Arc-length measure on a polyline; edge e gets ceil(len_e * n_per_unit) atoms."""
    verts = np.asarray(vertices, dtype=float)
    if verts.ndim != 2 or verts.shape[0] < 2 or verts.shape[1] != 2:
        raise MeasureError("polyline needs at least two 2D vertices")
    if not n_per_unit > 0:
        raise MeasureError("n_per_unit must be positive")
    pos, wts = [], []
    for a, b in zip(verts[:-1], verts[1:]):
        length = float(np.hypot(*(b - a)))
        if length == 0.0:
            raise GeometryError(f"repeated consecutive vertex {a.tolist()}")
        p, h = _segment_arrays(a, b, max(1, math.ceil(length * n_per_unit)))
        pos.append(p)
        wts.append(h)
    pos = np.concatenate(pos)
    w = np.concatenate(wts)
    return AtomicMeasure(pos, w, w, np.zeros(len(w), bool),
                         label=f"polyline({len(verts)} vertices)",
                         descriptor={"type": "polyline",
                                     "vertices": verts.tolist(),
                                     "n_per_unit": float(n_per_unit)})


def radial_density(gamma: float, n_r: int, n_theta: int) -> AtomicMeasure:
    """Area measure V(r) dx with V = 1 / (r^2 |ln r|^gamma) on r <= 1/2.

    Radial cell edges are geometric, r_i = q^i / 2 down to ``RADIAL_R_MIN``.
    Rings are cut into ``n_theta`` sectors; the disc inside the last edge
    is a single atom at the origin (slicing it would put atoms closer than
    their own panel radius). Cell masses are integrated exactly (u = -ln r
    turns the radial integral into int u^-gamma du), so total_mass equals
    2 pi (ln 2)^(1-gamma)/(gamma-1).
    """
    if not gamma > 2:
        raise MeasureError("radial_density needs gamma > 2 (Kato class)")
    if n_r < 1 or n_theta < 1:
        raise MeasureError("n_r and n_theta must be positive")
    n_r, n_theta = int(n_r), int(n_theta)
    edges = 0.5 * (2.0 * RADIAL_R_MIN) ** (np.arange(n_r + 1) / n_r)
    u = -np.log(edges)
    # antiderivative of u^-gamma, zero at u = +inf (r = 0)
    prim = u ** (1.0 - gamma) / (1.0 - gamma)
    dtheta = 2.0 * np.pi / n_theta
    ring_mass = dtheta * (prim[1:] - prim[:-1])
    r_out, r_in = edges[:-2], edges[1:-1]
    r_mid = np.sqrt(r_out * r_in)
    cell_area = 0.5 * dtheta * (r_out ** 2 - r_in ** 2)
    theta = (np.arange(n_theta) + 0.5) * dtheta
    rr, tt = np.meshgrid(r_mid, theta, indexing="ij")
    pos = np.column_stack([(rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()])
    w = np.repeat(ring_mass[:-1], n_theta)
    sc = np.repeat(np.sqrt(cell_area / np.pi), n_theta)
    # central disc of radius edges[-2]
    pos = np.vstack([pos, [0.0, 0.0]])
    w = np.append(w, 2.0 * np.pi * (0.0 - prim[-2]))
    sc = np.append(sc, edges[-2])
    return AtomicMeasure(pos, w, sc, np.ones(len(w), bool),
                         label=f"radial_density(gamma={gamma:g})",
                         descriptor={"type": "radial_density", "gamma": float(gamma),
                                     "n_r": n_r, "n_theta": n_theta})


# Named densities usable from descriptors (CLI configs).
def _density_constant(value=1.0):
    return lambda x, y: np.full(np.broadcast(x, y).shape, float(value))


def _density_gaussian(amplitude=1.0, sigma=1.0):
    return lambda x, y: amplitude * np.exp(-(x * x + y * y) / (2.0 * sigma ** 2))


def _density_disc(radius=1.0, value=1.0):
    return lambda x, y: np.where(x * x + y * y <= radius ** 2, float(value), 0.0)


DENSITIES: dict[str, Callable[..., Callable]] = {
    "constant": _density_constant,
    "gaussian": _density_gaussian,
    "disc": _density_disc,
}


def grid_density(density, box, n_x: int, n_y: int, *, descriptor=None) -> AtomicMeasure:
    """Area measure density(x) dx sampled at the centres of an n_x by n_y grid.

    ``density`` is a vectorised callable f(x, y) or a descriptor dict
    ``{"name": ..., **params}`` naming an entry of :data:`DENSITIES`.
    ``box`` is (x0, x1, y0, y1). Zero-weight cells are dropped.
    """
    dens_desc = None
    if isinstance(density, dict):
        dens_desc = dict(density)
        params = {k: v for k, v in density.items() if k != "name"}
        try:
            density = DENSITIES[density["name"]](**params)
        except KeyError as exc:
            raise MeasureError(f"unknown density {density.get('name')!r}") from exc
    x0, x1, y0, y1 = map(float, box)
    if not (x1 > x0 and y1 > y0):
        raise GeometryError("grid_density box must have positive extent")
    if n_x < 1 or n_y < 1:
        raise MeasureError("n_x and n_y must be positive")
    n_x, n_y = int(n_x), int(n_y)
    dx, dy = (x1 - x0) / n_x, (y1 - y0) / n_y
    xc = x0 + (np.arange(n_x) + 0.5) * dx
    yc = y0 + (np.arange(n_y) + 0.5) * dy
    xx, yy = np.meshgrid(xc, yc, indexing="xy")
    vals = np.asarray(density(xx, yy), dtype=float).ravel()
    if np.any(vals < 0) or not np.all(np.isfinite(vals)):
        raise PositivityError("density must be finite and nonnegative on the box")
    keep = vals > 0
    if not keep.any():
        raise MeasureError("density vanishes on the whole box")
    area = dx * dy
    pos = np.column_stack([xx.ravel(), yy.ravel()])[keep]
    if descriptor is None:
        descriptor = {"type": "grid_density", "density": dens_desc if dens_desc else density,
                      "box": [x0, x1, y0, y1], "n_x": n_x, "n_y": n_y}
    return AtomicMeasure(pos, vals[keep] * area,
                         np.full(int(keep.sum()), math.sqrt(area / np.pi)),
                         np.ones(int(keep.sum()), bool),
                         label=f"grid_density({n_x}x{n_y})",
                         descriptor=descriptor)


def from_descriptor(desc: dict) -> AtomicMeasure:
    """Rebuild a measure from its descriptor."""
    kind = desc.get("type")
    p = {k: v for k, v in desc.items() if k != "type"}
    if kind == "circle":
        return circle(p["r"], p["n"])
    if kind == "segment":
        return segment(p["a"], p["b"], p["n"])
    if kind == "polyline":
        return polyline(p["vertices"], p["n_per_unit"])
    if kind == "radial_density":
        return radial_density(p["gamma"], p["n_r"], p["n_theta"])
    if kind == "grid_density":
        return grid_density(p["density"], p["box"], p["n_x"], p["n_y"])
    if kind == "union":
        return concat([from_descriptor(d) for d in p["parts"]])
    raise MeasureError(f"unknown measure type {kind!r}")


def _doubled(desc: dict) -> dict:
    kind = desc["type"]
    d = dict(desc)
    if kind in ("circle", "segment"):
        d["n"] = 2 * desc["n"]
    elif kind == "polyline":
        d["n_per_unit"] = 2.0 * desc["n_per_unit"]
    elif kind == "radial_density":
        d["n_r"] = 2 * desc["n_r"]
        d["n_theta"] = 2 * desc["n_theta"]
    elif kind == "grid_density":
        d["n_x"] = 2 * desc["n_x"]
        d["n_y"] = 2 * desc["n_y"]
    elif kind == "union":
        d["parts"] = [_doubled(p) for p in desc["parts"]]
    return d


def refine(m: AtomicMeasure) -> AtomicMeasure:
    """Same geometry with every resolution parameter doubled."""
    if m.descriptor is None:
        raise NotRefinableError(f"measure {m.label!r} has no generator descriptor")
    return from_descriptor(_doubled(m.descriptor))


def _abs_log_integral_line(a):
    # int_0^a |ln s| ds
    a = np.asarray(a, dtype=float)
    small = a * (1.0 - np.log(a))
    big = a * np.log(a) - a + 2.0
    return np.where(a <= 1.0, small, big)


def _abs_log_integral_disc(a):
    # int_0^a |ln r| r dr
    a = np.asarray(a, dtype=float)
    small = 0.25 * a * a - 0.5 * a * a * np.log(a)
    big = 0.5 * a * a * np.log(a) - 0.25 * a * a + 0.5
    return np.where(a <= 1.0, small, big)


def self_log_average(m: AtomicMeasure, eps) -> np.ndarray:
    """Per-atom w_j * (panel average of |ln|x_j - y|| over the part of the
    panel inside the eps-disc), times the panel fraction inside it.

    For eps at least the panel half-width this is w (1 - ln(h/2)) on curve
    panels and w (1/2 - ln s) on area panels (while those logs are negative).
    """
    w, sc = m.weights, m.scales
    out = np.empty_like(w)
    curve = ~m.is_area
    if curve.any():
        h = sc[curve]
        a = np.minimum(eps, 0.5 * h)
        out[curve] = w[curve] * 2.0 * _abs_log_integral_line(a) / h
    if m.is_area.any():
        s = sc[m.is_area]
        a = np.minimum(eps, s)
        out[m.is_area] = w[m.is_area] * 2.0 * _abs_log_integral_disc(a) / (s * s)
    return out


def kato_diagnostic(m: AtomicMeasure, eps_list) -> list[tuple[float, float]]:
    """Estimate sup_x int_{D_eps(x)} |ln|x - y|| dmu(y) for each eps.

    The sup runs over atom positions only. Neighbour atoms contribute
    w_j |ln|x - x_j||; the atom's own panel contributes its analytic
    average (see :func:`self_log_average`).
    """
    eps = [float(e) for e in eps_list]
    if any(e <= 0 for e in eps) or any(a <= b for a, b in zip(eps, eps[1:])):
        raise ValueError("eps_list must be positive and strictly decreasing")
    if not m.has_scales:
        raise MeasureError("kato_diagnostic needs atoms with panel scales")
    tree = cKDTree(m.positions)
    pairs = tree.sparse_distance_matrix(tree, eps[0], output_type="coo_matrix")
    keep = pairs.row != pairs.col
    rows, cols, dist = pairs.row[keep], pairs.col[keep], pairs.data[keep]
    # coincident distinct atoms count through their own panels only
    pos_d = dist > 0
    rows, cols, dist = rows[pos_d], cols[pos_d], dist[pos_d]
    contrib = m.weights[cols] * np.abs(np.log(dist))
    out = []
    for e in eps:
        inside = dist < e
        acc = np.bincount(rows[inside], weights=contrib[inside],
                          minlength=m.n).astype(float)
        acc += self_log_average(m, e)
        out.append((e, float(acc.max())))
    return out


def kato_flag(table, drop: float = 0.5) -> bool:
    """True when the diagnostic looks Kato-like: non-increasing in eps and
    the last estimate at most ``drop`` times the first."""
    vals = [v for _, v in table]
    mono = all(b <= a * (1 + 1e-12) for a, b in zip(vals, vals[1:]))
    return mono and vals[-1] <= drop * vals[0]
