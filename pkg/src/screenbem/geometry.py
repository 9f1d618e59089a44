"""
Screen geometry: prefractal families, dyadic grid approximations and meshing.

All screens live in the hyperplane ``x_n = 0``.  A region is stored by its
in-plane coordinates: intervals ``[a, b]`` on the x1-axis for n = 2, and
convex polygons in the (x1, x2)-plane for n = 3 (triangles or axis-aligned
rectangles, counter-clockwise).  Meshes carry full n-dimensional vertex
coordinates with a zero last component.

Conventions
-----------
* Cantor-type families: level ``j`` is the middle-lambda prefractal ``E_j``
  (``2**j`` intervals of length ``alpha**j``, ``alpha = (1 - lam)/2``).
* Sierpinski and Koch: unit side, lower-left vertex at the origin.
* Swiss cheese: dyadic-grid representation at level ``L = j + 4``.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy.spatial import cKDTree

SQRT3 = math.sqrt(3.0)
_REL_TOL = 1e-12

__all__ = [
    "ScreenRegion",
    "ScreenPanelMesh",
    "PrefractalFamily",
    "cantor_prefractal",
    "cantor_dust_prefractal",
    "sierpinski_prefractal",
    "koch_prefractal",
    "swiss_cheese_prefractal",
    "solid_minus_cantor",
    "solid_minus_swiss_cheese",
    "irregular_circles",
    "grid_outer_approx",
    "grid_inner_approx",
    "mesh",
    "subdivide_triangle",
]


# --------------------------------------------------------------------------- #
# Regions                                                                     #
# --------------------------------------------------------------------------- #
@dataclass(frozen=True)
class ScreenRegion:
    """A union of cells in the screen plane.

    Attributes
    ----------
    dimension : int
        Ambient dimension n (2 or 3).
    cells : tuple of ndarray
        n = 2: arrays ``[a, b]`` with ``a < b``.  n = 3: polygon vertex
        arrays of shape (m, 2), counter-clockwise, convex.
    kind : str
        ``"closed"`` or ``"open"``: which limiting-geometry convention the
        region stands for.  Bookkeeping only.
    """

    dimension: int
    cells: tuple
    kind: str = "closed"

    def __post_init__(self):
        if self.dimension not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {self.dimension}")
        if self.kind not in ("open", "closed"):
            raise ValueError(f"kind must be 'open' or 'closed', got {self.kind!r}")
        cells = tuple(np.asarray(c, dtype=float) for c in self.cells)
        for c in cells:
            if self.dimension == 2:
                if c.shape != (2,) or not c[1] > c[0]:
                    raise ValueError(f"bad interval cell {c}")
            else:
                if c.ndim != 2 or c.shape[1] != 2 or c.shape[0] < 3:
                    raise ValueError(f"bad polygon cell of shape {c.shape}")
                if _polygon_area(c) <= 0.0:
                    raise ValueError("polygon cells must be counter-clockwise with positive area")
        object.__setattr__(self, "cells", cells)

    def __len__(self):
        return len(self.cells)

    @property
    def is_empty(self) -> bool:
        return len(self.cells) == 0

    def cell_measures(self) -> np.ndarray:
        if self.dimension == 2:
            return np.array([c[1] - c[0] for c in self.cells])
        return np.array([_polygon_area(c) for c in self.cells])

    def measure(self) -> float:
        """Total length (n = 2) or area (n = 3)."""
        return float(np.sum(self.cell_measures())) if self.cells else 0.0

    def bounding_box(self) -> np.ndarray:
        """Array ``[[lo_1, ...], [hi_1, ...]]`` of in-plane bounds."""
        if self.is_empty:
            raise ValueError("empty region has no bounding box")
        if self.dimension == 2:
            lo = min(c[0] for c in self.cells)
            hi = max(c[1] for c in self.cells)
            return np.array([[lo], [hi]])
        pts = np.concatenate(self.cells)
        return np.array([pts.min(axis=0), pts.max(axis=0)])

    def diameter(self) -> float:
        bb = self.bounding_box()
        if self.dimension == 2:
            return float(bb[1, 0] - bb[0, 0])
        pts = np.unique(np.concatenate(self.cells), axis=0)
        if len(pts) > 2000:
            return float(np.linalg.norm(bb[1] - bb[0]))
        d = pts[:, None, :] - pts[None, :, :]
        return float(np.sqrt(np.max(np.sum(d * d, axis=-1))))

    def center(self) -> np.ndarray:
        """Bounding-box centre as a full n-vector (last coordinate zero)."""
        bb = self.bounding_box()
        c = 0.5 * (bb[0] + bb[1])
        return np.concatenate([c, [0.0]])

    def feature_size(self) -> float:
        """Largest cell diameter; used by mesh-size rules."""
        if self.dimension == 2:
            return float(np.max(self.cell_measures()))
        return max(_polygon_diameter(c) for c in self.cells)

    def to_shapely(self):
        """Union of the cells as a shapely geometry (n = 3 only)."""
        if self.dimension != 3:
            raise ValueError("shapely conversion is for n = 3 regions")
        import shapely
        from shapely.geometry import Polygon

        return shapely.union_all([Polygon(c) for c in self.cells])

    def covers(self, other: "ScreenRegion", tol: float = 1e-12) -> bool:
        """True if every cell of ``other`` lies in the union of our cells."""
        if other.dimension != self.dimension:
            raise ValueError("dimension mismatch")
        if other.is_empty:
            return True
        if self.dimension == 2:
            merged = _merge_intervals([tuple(c) for c in self.cells], tol)
            for a, b in (tuple(c) for c in other.cells):
                if not any(lo - tol <= a and b <= hi + tol for lo, hi in merged):
                    return False
            return True
        mine = self.to_shapely().buffer(tol)
        from shapely.geometry import Polygon

        return all(mine.covers(Polygon(c)) for c in other.cells)


def _polygon_area(p: np.ndarray) -> float:
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _polygon_diameter(p: np.ndarray) -> float:
    d = p[:, None, :] - p[None, :, :]
    return float(np.sqrt(np.max(np.sum(d * d, axis=-1))))


def _merge_intervals(iv, tol=0.0):
    out = []
    for a, b in sorted(iv):
        if out and a <= out[-1][1] + tol:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return out


def _rect(x0, y0, x1, y1) -> np.ndarray:
    return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float)


def _is_rect(c: np.ndarray) -> bool:
    if c.shape != (4, 2):
        return False
    return (
        c[0, 1] == c[1, 1] and c[2, 1] == c[3, 1] and c[0, 0] == c[3, 0] and c[1, 0] == c[2, 0]
    )


# --------------------------------------------------------------------------- #
# Prefractals                                                                 #
# --------------------------------------------------------------------------- #
def _check_lambda(lam):
    if not (0.0 < lam < 1.0):
        raise ValueError(f"middle fraction lambda must lie in (0, 1), got {lam!r}")


def _check_level(j, lowest=0):
    if int(j) != j or j < lowest:
        raise ValueError(f"level must be an integer >= {lowest}, got {j!r}")


def cantor_prefractal(lam: float, j: int) -> list[tuple[float, float]]:
    """Middle-lambda Cantor prefractal E_j in [0, 1].

    Parameters
    ----------
    lam : float
        Removed middle fraction, ``0 < lam < 1``.
    j : int
        Level, ``j >= 0``.

    Returns
    -------
    list of (float, float)
        ``2**j`` closed intervals of length ``alpha**j``, left to right.
    """
    _check_lambda(lam)
    _check_level(j)
    alpha = 0.5 * (1.0 - lam)
    ivs = [(0.0, 1.0)]
    for _ in range(int(j)):
        nxt = []
        for a, b in ivs:
            w = b - a
            nxt.append((a, a + alpha * w))
            nxt.append((b - alpha * w, b))
        ivs = nxt
    return ivs


def cantor_dust_prefractal(lam: float, j: int) -> list[np.ndarray]:
    """Cantor dust E_j x E_j as ``4**j`` closed squares (CCW vertex arrays)."""
    ivs = cantor_prefractal(lam, j)
    return [_rect(a, c, b, d) for (c, d) in ivs for (a, b) in ivs]


def sierpinski_prefractal(j: int) -> list[np.ndarray]:
    """Sierpinski prefractal: ``3**(j-1)`` equilateral triangles of side 2**(1-j)."""
    _check_level(j, 1)
    tris = [np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 0.5 * SQRT3]])]
    for _ in range(int(j) - 1):
        nxt = []
        for a, b, c in tris:
            ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
            nxt += [np.array([a, ab, ca]), np.array([ab, b, bc]), np.array([ca, bc, c])]
        tris = nxt
    return tris


def subdivide_triangle(tri: np.ndarray, m: int) -> np.ndarray:
    """Uniform subdivision of a triangle into ``m**2`` congruent triangles.

    For ``m = 2**r`` this is r steps of red (midpoint) refinement.  The
    orientation of the input is preserved.

    Returns
    -------
    ndarray, shape (m*m, 3, d)
    """
    tri = np.asarray(tri, dtype=float)
    p0, e1, e2 = tri[0], (tri[1] - tri[0]) / m, (tri[2] - tri[0]) / m

    def P(i, j):
        return p0 + i * e1 + j * e2

    out = []
    for j in range(m):
        for i in range(m - j):
            out.append([P(i, j), P(i + 1, j), P(i, j + 1)])
            if i + j <= m - 2:
                out.append([P(i + 1, j), P(i + 1, j + 1), P(i, j + 1)])
    return np.array(out)


def _koch_boundary(j: int) -> np.ndarray:
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 0.5 * SQRT3]])
    c, s = 0.5, -0.5 * SQRT3  # rotation by -60 degrees (outward for CCW)
    for _ in range(j - 1):
        nxt = []
        for p, q in zip(pts, np.roll(pts, -1, axis=0)):
            d = (q - p) / 3.0
            a, b = p + d, p + 2 * d
            apex = a + np.array([c * d[0] - s * d[1], s * d[0] + c * d[1]])
            nxt += [p, a, apex, b]
        pts = np.array(nxt)
    return pts


def koch_prefractal(j: int) -> ScreenRegion:
    """Interior of the j-th Koch snowflake prefractal (n = 3, open).

    The polygon has ``3 * 4**(j-1)`` edges.  It is returned as a union of
    lattice equilateral triangles of side ``3**-(j-1)``, so every uniform
    subdivision of the cells is a conforming mesh.
    """
    _check_level(j, 1)
    j = int(j)
    delta = 3.0 ** (-(j - 1))
    big = [np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 0.5 * SQRT3]])]
    pts = big[0]
    c, s = 0.5, -0.5 * SQRT3
    for _ in range(j - 1):
        nxt = []
        for p, q in zip(pts, np.roll(pts, -1, axis=0)):
            d = (q - p) / 3.0
            a, b = p + d, p + 2 * d
            apex = a + np.array([c * d[0] - s * d[1], s * d[0] + c * d[1]])
            nxt += [p, a, apex, b]
            big.append(np.array([a, apex, b]))
        pts = np.array(nxt)
    cells = []
    for t in big:
        side = float(np.linalg.norm(t[1] - t[0]))
        m = int(round(side / delta))
        cells.extend(subdivide_triangle(t, m))
    return ScreenRegion(3, tuple(cells), "open")


def koch_edge_count(j: int) -> int:
    """Number of boundary edges of the Koch prefractal polygon."""
    return len(_koch_boundary(int(j)))


def _dyadic_centers(dim: int) -> Iterator[np.ndarray]:
    """Dyadic rationals in the open unit cube, coarse levels first."""
    level = 1
    while True:
        den = 2**level
        rng = range(1, den)
        if dim == 1:
            for a in rng:
                if a % 2 == 1:
                    yield np.array([a / den])
        else:
            for a in rng:
                for b in rng:
                    if a % 2 == 1 or b % 2 == 1:
                        yield np.array([a / den, b / den])
        level += 1


def swiss_cheese_radius(m: int, eps: float, n: int) -> float:
    """Default radius rule r_m: 6 eps/(pi m)^2 (n = 3), 2 exp(-pi^2 m^2/(6 eps)) (n = 2)."""
    if n == 3:
        return 6.0 * eps / (math.pi * m) ** 2
    return 2.0 * math.exp(-(math.pi**2) * m * m / (6.0 * eps))


def swiss_cheese_balls(j: int, n: int = 3, eps: float = 0.1,
                       radius_rule: Callable[[int], float] | None = None,
                       center_rule: Callable[[int], Sequence[float]] | None = None):
    """Centres and radii of the first j removed balls."""
    if radius_rule is None:
        radius_rule = lambda m: swiss_cheese_radius(m, eps, n)  # noqa: E731
    gen = _dyadic_centers(n - 1)
    centers, radii = [], []
    for m in range(1, int(j) + 1):
        c = np.asarray(center_rule(m), dtype=float) if center_rule else next(gen)
        centers.append(c)
        radii.append(float(radius_rule(m)))
    return np.array(centers).reshape(len(centers), n - 1), np.array(radii)


def _grid_cells(level: int, dim: int, lo=None, hi=None):
    """Closed dyadic cells of side 2**-level covering the box [lo, hi]."""
    s = 2.0 ** (-level)
    lo = np.zeros(dim) if lo is None else np.asarray(lo, float)
    hi = np.ones(dim) if hi is None else np.asarray(hi, float)
    i0 = np.floor(lo / s).astype(int)
    i1 = np.ceil(hi / s).astype(int)
    if dim == 1:
        ii = np.arange(i0[0], i1[0])
        return s, np.stack([ii * s, (ii + 1) * s], axis=1)
    ii, jj = np.meshgrid(np.arange(i0[0], i1[0]), np.arange(i0[1], i1[1]), indexing="xy")
    ii, jj = ii.ravel(), jj.ravel()
    return s, np.stack([ii * s, jj * s, (ii + 1) * s, (jj + 1) * s], axis=1)


def _box_ball_distance(boxes, c):
    """Distance from each closed box (x0[,y0],x1[,y1]) to the point c."""
    d = len(c)
    lo, hi = boxes[:, :d], boxes[:, d:]
    q = np.clip(c, lo, hi)
    return np.sqrt(np.sum((q - c) ** 2, axis=1))


def swiss_cheese_prefractal(j: int, radius_rule=None, center_rule=None, *,
                            n: int = 3, eps: float = 0.1) -> ScreenRegion:
    """Swiss cheese F_j = closed unit cube minus the first j open balls.

    Represented as the union of dyadic cells of side ``2**-(j+4)`` that do
    not meet any removed ball.

    Raises
    ------
    ValueError
        If the resulting region is empty.
    """
    _check_level(j)
    centers, radii = swiss_cheese_balls(j, n, eps, radius_rule, center_rule)
    s, boxes = _grid_cells(int(j) + 4, n - 1)
    keep = np.ones(len(boxes), dtype=bool)
    for c, r in zip(centers, radii):
        keep &= _box_ball_distance(boxes, c) >= r
    if not keep.any():
        raise ValueError("swiss cheese radii remove every grid cell: empty region")
    return _boxes_to_region(boxes[keep], n, "closed")


def _boxes_to_region(boxes, n, kind) -> ScreenRegion:
    if n == 2:
        merged = _merge_intervals([(b[0], b[1]) for b in boxes])
        return ScreenRegion(2, tuple(np.array(iv) for iv in merged), kind)
    return ScreenRegion(3, tuple(_rect(*b) for b in boxes), kind)


def solid_minus_cantor(lam: float, j: int, n: int = 2) -> ScreenRegion:
    """Open screen Gamma_0 minus E_j (n = 2) or minus E_j x E_j (n = 3).

    For n = 3 the complement is tiled by the rectangles of the tensor grid
    spanned by the interval endpoints of E_j.
    """
    ivs = cantor_prefractal(lam, j)
    if j == 0:
        raise ValueError("level 0 removes the whole unit screen")
    gaps = [(ivs[i][1], ivs[i + 1][0]) for i in range(len(ivs) - 1)]
    if n == 2:
        return ScreenRegion(2, tuple(np.array(g) for g in gaps), "open")
    breaks = sorted({0.0, 1.0} | {a for a, _ in ivs} | {b for _, b in ivs})
    spans = list(zip(breaks[:-1], breaks[1:]))
    in_e = [any(a <= x0 and x1 <= b for a, b in ivs) for x0, x1 in spans]
    cells = []
    for iy, (y0, y1) in enumerate(spans):
        for ix, (x0, x1) in enumerate(spans):
            if not (in_e[ix] and in_e[iy]):
                cells.append(_rect(x0, y0, x1, y1))
    return ScreenRegion(3, tuple(cells), "open")


def _cells_inside_balls(level, n, centers, radii, lo=None, hi=None):
    s, boxes = _grid_cells(level, n - 1, lo, hi)
    d = n - 1
    inside = np.zeros(len(boxes), dtype=bool)
    for c, r in zip(centers, radii):
        far = np.maximum(np.abs(boxes[:, :d] - c), np.abs(boxes[:, d:] - c))
        inside |= np.sqrt(np.sum(far**2, axis=1)) < r
    return boxes[inside]


def solid_minus_swiss_cheese(j: int, *, n: int = 3, eps: float = 0.1,
                             radius_rule=None, center_rule=None) -> ScreenRegion:
    """Open screen Gamma_0 minus F_j, i.e. the union of the first j balls
    inside the unit cube, as a dyadic inner approximation at level j + 4."""
    _check_level(j, 1)
    centers, radii = swiss_cheese_balls(j, n, eps, radius_rule, center_rule)
    boxes = _cells_inside_balls(int(j) + 4, n, centers, radii)
    if len(boxes) == 0:
        raise ValueError("balls too small for the grid level: empty region")
    return _boxes_to_region(boxes, n, "open")


def irregular_circles(j: int, level: int | None = None) -> ScreenRegion:
    """Union of the first j tangent discs B_{r_m}((s_m, 0)), n = 3, open.

    s_m = (2m+1)/(2m(m+1)), r_m = 1/(2m(m+1)); dyadic inner approximation
    at level ``max(j + 4, 5)`` unless given.
    """
    _check_level(j, 1)
    m = np.arange(1, int(j) + 1, dtype=float)
    s = (2 * m + 1) / (2 * m * (m + 1))
    r = 1.0 / (2 * m * (m + 1))
    centers = np.stack([s, np.zeros_like(s)], axis=1)
    L = level if level is not None else max(int(j) + 4, 5)
    boxes = _cells_inside_balls(L, 3, centers, r, lo=[0.0, -0.5], hi=[1.0, 0.5])
    return _boxes_to_region(boxes, 3, "open")


# --------------------------------------------------------------------------- #
# Dyadic grid approximations                                                  #
# --------------------------------------------------------------------------- #
def _as_points(region):
    if isinstance(region, ScreenRegion):
        return None
    pts = np.atleast_2d(np.asarray(region, dtype=float))
    return pts


def grid_outer_approx(region, j: int, dimension: int | None = None) -> ScreenRegion:
    """Union of closed dyadic cells of side 2**-j meeting a compact set.

    Parameters
    ----------
    region : ScreenRegion or array_like of points
        The compact set.  A point array of shape (m, n-1) is accepted for
        sets of measure zero (``dimension`` is then required unless it can
        be inferred from the point shape).
    j : int
        Grid level.
    """
    _check_level(j)
    pts = _as_points(region)
    if pts is not None:
        n = dimension or pts.shape[1] + 1
        s = 2.0 ** (-j)
        keys = set()
        for p in pts:
            # closed cells containing each coordinate: one, or two on a grid line
            rngs = []
            for x in p:
                t = x / s
                i = math.floor(t)
                rngs.append([i - 1, i] if t == i else [i])
            if n == 2:
                keys |= {(i,) for i in rngs[0]}
            else:
                keys |= {(i, k) for i in rngs[0] for k in rngs[1]}
        boxes = np.array([[i * s for i in key] + [(i + 1) * s for i in key] for key in sorted(keys)])
        return _boxes_to_region(boxes, n, "closed")
    if region.is_empty:
        return ScreenRegion(region.dimension, (), "closed")
    bb = region.bounding_box()
    s, boxes = _grid_cells(int(j), region.dimension - 1, bb[0] - 2.0**-j, bb[1] + 2.0**-j)
    if region.dimension == 2:
        ivs = _merge_intervals([tuple(c) for c in region.cells])
        keep = np.zeros(len(boxes), dtype=bool)
        for a, b in ivs:
            keep |= (boxes[:, 0] <= b) & (boxes[:, 1] >= a)
        return _boxes_to_region(boxes[keep], 2, "closed")
    import shapely

    geom = region.to_shapely()
    polys = shapely.box(boxes[:, 0], boxes[:, 1], boxes[:, 2], boxes[:, 3])
    keep = shapely.intersects(polys, geom)
    return _boxes_to_region(boxes[keep], 3, "closed")


def grid_inner_approx(region: ScreenRegion, j: int) -> ScreenRegion:
    """Interior of the union of closed dyadic cells (side 2**-j) whose
    closure lies inside the open region (the interior of the cell union)."""
    _check_level(j)
    if region.is_empty:
        return ScreenRegion(region.dimension, (), "open")
    bb = region.bounding_box()
    s, boxes = _grid_cells(int(j), region.dimension - 1, bb[0], bb[1])
    if region.dimension == 2:
        ivs = _merge_intervals([tuple(c) for c in region.cells])
        keep = np.zeros(len(boxes), dtype=bool)
        for a, b in ivs:
            keep |= (boxes[:, 0] > a) & (boxes[:, 1] < b)
        return _boxes_to_region(boxes[keep], 2, "open")
    import shapely

    geom = region.to_shapely()
    polys = shapely.box(boxes[:, 0], boxes[:, 1], boxes[:, 2], boxes[:, 3])
    keep = shapely.contains_properly(geom, polys)
    return _boxes_to_region(boxes[keep], 3, "open")


# --------------------------------------------------------------------------- #
# Families                                                                    #
# --------------------------------------------------------------------------- #
FAMILIES = (
    "cantor", "cantor_dust", "sierpinski", "koch", "swiss_cheese",
    "solid_minus_cantor", "solid_minus_swiss_cheese", "irregular_circles",
    "grid_inner", "grid_outer",
)


@dataclass(frozen=True)
class PrefractalFamily:
    """A nested sequence of screens indexed by level j.

    Attributes
    ----------
    variant : str
        One of ``FAMILIES``.
    dimension : int
        Ambient dimension n.
    lam : float
        Middle fraction for Cantor-type variants.
    eps : float
        Swiss cheese radius parameter.
    base : ScreenRegion or None
        Base region for the grid variants.
    """

    variant: str
    dimension: int = 2
    lam: float = 1.0 / 3.0
    eps: float = 0.1
    base: ScreenRegion | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.variant not in FAMILIES:
            raise ValueError(f"unknown family {self.variant!r}; choose from {FAMILIES}")
        if self.dimension not in (2, 3):
            raise ValueError("dimension must be 2 or 3")
        if self.variant in ("sierpinski", "koch", "irregular_circles") and self.dimension != 3:
            raise ValueError(f"{self.variant} screens exist only for n = 3")
        if self.variant in ("cantor", "cantor_dust", "solid_minus_cantor"):
            _check_lambda(self.lam)
        if self.variant in ("grid_inner", "grid_outer") and self.base is None:
            raise ValueError("grid families need a base region")

    @property
    def kind(self) -> str:
        opens = ("koch", "solid_minus_cantor", "solid_minus_swiss_cheese",
                 "irregular_circles", "grid_inner")
        return "open" if self.variant in opens else "closed"

    @property
    def min_level(self) -> int:
        return 1 if self.variant in ("sierpinski", "koch", "solid_minus_cantor",
                                     "solid_minus_swiss_cheese", "irregular_circles") else 0

    def region(self, j: int) -> ScreenRegion:
        n, v = self.dimension, self.variant
        if v == "cantor":
            if n == 2:
                return ScreenRegion(2, tuple(np.array(iv) for iv in cantor_prefractal(self.lam, j)))
            return ScreenRegion(3, tuple(cantor_dust_prefractal(self.lam, j)))
        if v == "cantor_dust":
            if n == 2:
                raise ValueError("cantor_dust is the n = 3 Cantor family")
            return ScreenRegion(3, tuple(cantor_dust_prefractal(self.lam, j)))
        if v == "sierpinski":
            return ScreenRegion(3, tuple(sierpinski_prefractal(j)))
        if v == "koch":
            return koch_prefractal(j)
        if v == "swiss_cheese":
            return swiss_cheese_prefractal(j, n=n, eps=self.eps)
        if v == "solid_minus_cantor":
            return solid_minus_cantor(self.lam, j, n)
        if v == "solid_minus_swiss_cheese":
            return solid_minus_swiss_cheese(j, n=n, eps=self.eps)
        if v == "irregular_circles":
            return irregular_circles(j)
        if v == "grid_inner":
            return grid_inner_approx(self.base, j)
        return grid_outer_approx(self.base, j)


# --------------------------------------------------------------------------- #
# Meshes                                                                      #
# --------------------------------------------------------------------------- #
@dataclass(frozen=True, eq=False)
class ScreenPanelMesh:
    """Panels on the screen plane.

    Attributes
    ----------
    dimension : int
        Ambient dimension n.
    vertices : ndarray, shape (N, n)
        Vertex coordinates, last component zero.
    panels : ndarray of int, shape (P, n)
        Vertex indices per panel: segments (n = 2) or triangles (n = 3).
    boundary : ndarray of bool, shape (N,)
        True for vertices on the boundary of the mesh support.
    """

    dimension: int
    vertices: np.ndarray
    panels: np.ndarray
    boundary: np.ndarray

    def __post_init__(self):
        n = self.dimension
        if n not in (2, 3):
            raise ValueError("dimension must be 2 or 3")
        v = np.ascontiguousarray(self.vertices, dtype=float).reshape(-1, n)
        p = np.ascontiguousarray(self.panels, dtype=np.int64).reshape(-1, n)
        b = np.ascontiguousarray(self.boundary, dtype=bool).reshape(-1)
        if len(b) != len(v):
            raise ValueError("boundary flags must match the vertex count")
        if p.size and (p.min() < 0 or p.max() >= len(v)):
            raise ValueError("panel vertex index out of range")
        if np.any(v[:, -1] != 0.0):
            raise ValueError("mesh vertices must lie in the plane x_n = 0")
        for name, arr in (("vertices", v), ("panels", p), ("boundary", b)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_panels(self) -> int:
        return len(self.panels)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def panel_coords(self) -> np.ndarray:
        """Array (P, n, n): vertex coordinates of each panel."""
        return self.vertices[self.panels]

    def panel_measures(self) -> np.ndarray:
        c = self.panel_coords()
        if self.dimension == 2:
            return np.abs(c[:, 1, 0] - c[:, 0, 0])
        e1, e2 = c[:, 1, :2] - c[:, 0, :2], c[:, 2, :2] - c[:, 0, :2]
        return 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def panel_diameters(self) -> np.ndarray:
        c = self.panel_coords()
        if self.dimension == 2:
            return np.abs(c[:, 1, 0] - c[:, 0, 0])
        d = [np.linalg.norm(c[:, a] - c[:, b], axis=1) for a, b in ((0, 1), (1, 2), (2, 0))]
        return np.max(d, axis=0)

    def centroids(self) -> np.ndarray:
        return self.panel_coords().mean(axis=1)

    @property
    def h(self) -> float:
        """Mesh size: the largest panel diameter."""
        return float(self.panel_diameters().max()) if self.n_panels else 0.0

    def measure(self) -> float:
        return float(self.panel_measures().sum())

    def diameter(self) -> float:
        if self.n_vertices == 0:
            return 0.0
        v = self.vertices
        if len(v) > 3000:
            return float(np.linalg.norm(v.max(axis=0) - v.min(axis=0)))
        d = v[:, None, :] - v[None, :, :]
        return float(np.sqrt(np.max(np.sum(d * d, axis=-1))))

    def center(self) -> np.ndarray:
        return 0.5 * (self.vertices.min(axis=0) + self.vertices.max(axis=0))

    def interior_vertices(self) -> np.ndarray:
        """Indices of non-boundary vertices that belong to some panel."""
        used = np.zeros(self.n_vertices, dtype=bool)
        used[self.panels.ravel()] = True
        return np.flatnonzero(used & ~self.boundary)

    def hash(self) -> str:
        """SHA-256 of the dimension, vertex and panel arrays."""
        h = hashlib.sha256()
        h.update(np.int64(self.dimension).tobytes())
        h.update(np.ascontiguousarray(self.vertices, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.panels, dtype="<i8").tobytes())
        return h.hexdigest()

    def to_dict(self) -> dict:
        return {
            "dimension": int(self.dimension),
            "vertices": self.vertices.tolist(),
            "panels": self.panels.tolist(),
            "boundary_vertices": np.flatnonzero(self.boundary).tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScreenPanelMesh":
        n = int(d["dimension"])
        v = np.asarray(d["vertices"], dtype=float).reshape(-1, n)
        b = np.zeros(len(v), dtype=bool)
        b[np.asarray(d.get("boundary_vertices", []), dtype=int)] = True
        return cls(n, v, np.asarray(d["panels"], dtype=np.int64).reshape(-1, n), b)

    @classmethod
    def from_panels(cls, dimension: int, vertices, panels) -> "ScreenPanelMesh":
        """Build a mesh and derive the boundary flags from adjacency."""
        v = np.asarray(vertices, dtype=float)
        p = np.asarray(panels, dtype=np.int64)
        return cls(dimension, v, p, boundary_flags(dimension, len(v), p))


def boundary_flags(n: int, n_vertices: int, panels: np.ndarray) -> np.ndarray:
    """Boundary vertices from panel adjacency.

    n = 2: a vertex with exactly one incident segment.  n = 3: a vertex on
    an edge that belongs to exactly one triangle.
    """
    flags = np.zeros(n_vertices, dtype=bool)
    if len(panels) == 0:
        return flags
    if n == 2:
        cnt = np.bincount(panels.ravel(), minlength=n_vertices)
        flags[cnt == 1] = True
        return flags
    e = np.concatenate([panels[:, [0, 1]], panels[:, [1, 2]], panels[:, [2, 0]]])
    e = np.sort(e, axis=1)
    uniq, cnt = np.unique(e, axis=0, return_counts=True)
    flags[uniq[cnt == 1].ravel()] = True
    return flags


def _pow2_at_least(x: float) -> int:
    m = 1
    while m < x * (1.0 - _REL_TOL):
        m *= 2
    return m


def _dedupe(points: np.ndarray, scale: float):
    """Merge coincident points; returns (unique points, index map)."""
    tol = 1e-9 * max(scale, 1e-300)
    tree = cKDTree(points)
    pairs = tree.query_pairs(tol, output_type="ndarray")
    parent = np.arange(len(points))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(i) for i in range(len(points))])
    uniq, inv = np.unique(roots, return_inverse=True)
    return points[uniq], inv


def mesh(region: ScreenRegion, h: float, min_subdivisions: int = 1) -> ScreenPanelMesh:
    """Mesh a region with panels of diameter at most ``h``.

    n = 2: each interval is split uniformly into ``ceil(length/h)`` segments.
    n = 3: triangles are red-refined ``r`` times (``2**r`` pieces per edge);
    rectangles are cut into ``nx x ny`` sub-rectangles (powers of two),
    each split along its main diagonal.  Equal cell edges receive equal
    subdivision counts, so tensor-grid or lattice cell layouts give
    conforming meshes.  Every cell edge is cut into at least
    ``min_subdivisions`` pieces (rounded up to a power of two for n = 3).

    Raises
    ------
    ValueError
        If ``h <= 0`` or the region is empty.
    """
    if not (h > 0 and np.isfinite(h)):
        raise ValueError(f"mesh size h must be positive, got {h!r}")
    if region.is_empty:
        raise ValueError("cannot mesh an empty region")
    if int(min_subdivisions) != min_subdivisions or min_subdivisions < 1:
        raise ValueError("min_subdivisions must be a positive integer")
    msub = int(min_subdivisions)
    n = region.dimension
    if n == 2:
        pts, segs = [], []
        for a, b in region.cells:
            m = max(msub, int(math.ceil((b - a) / h * (1.0 - _REL_TOL))))
            x = np.linspace(a, b, m + 1)
            base = len(pts)
            pts.extend(x)
            segs.extend([base + i, base + i + 1] for i in range(m))
        p2 = np.stack([np.asarray(pts), np.zeros(len(pts))], axis=1)
        uniq, inv = _dedupe(p2, region.diameter())
        panels = inv[np.asarray(segs)]
        return ScreenPanelMesh.from_panels(2, uniq, panels)
    tris = []
    for c in region.cells:
        if _is_rect(c):
            x0, y0 = c[0]
            x1, y1 = c[2]
            nx = _pow2_at_least(max((x1 - x0) * math.sqrt(2.0) / h, msub))
            ny = _pow2_at_least(max((y1 - y0) * math.sqrt(2.0) / h, msub))
            xs, ys = np.linspace(x0, x1, nx + 1), np.linspace(y0, y1, ny + 1)
            for b in range(ny):
                for a in range(nx):
                    p00 = (xs[a], ys[b])
                    p11 = (xs[a + 1], ys[b + 1])
                    tris.append([p00, (xs[a + 1], ys[b]), p11])
                    tris.append([p00, p11, (xs[a], ys[b + 1])])
        elif c.shape[0] == 3:
            m = _pow2_at_least(max(_polygon_diameter(c) / h, msub))
            tris.extend(subdivide_triangle(c, m))
        else:
            raise ValueError("n = 3 cells must be triangles or axis-aligned rectangles")
    t = np.asarray(tris, dtype=float).reshape(-1, 2)
    uniq, inv = _dedupe(t, region.diameter())
    v3 = np.concatenate([uniq, np.zeros((len(uniq), 1))], axis=1)
    return ScreenPanelMesh.from_panels(3, v3, inv.reshape(-1, 3))
