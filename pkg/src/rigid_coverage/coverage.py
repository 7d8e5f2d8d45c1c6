"""Voronoi coverage: partitions, weighted centroids, locational cost.

Cells come from clipping the workspace polygon with perpendicular-bisector
half-planes, one pass per robot pair.  Weighted integrals over cells use a
fan triangulation and a symmetric triangle quadrature rule, refined by
uniform subdivision until two successive estimates agree.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateMassError,
    DegenerateSitesError,
    InvalidInputError,
    NumericalBreakdownError,
)
from .geometry import ConvexRegion, clip_polygon_halfplane, polygon_area, polygon_centroid

MIN_SITE_SEPARATION = 1e-7
AREA_TILE_RTOL = 1e-8
QUAD_REFINE_TOL = 1e-7
CONVERGENCE_TOL = 1e-6
MASS_TOL = 1e-12


class UniformDensity:
    """Constant importance density, value 1 everywhere."""

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.ones(len(pts))


@dataclass(frozen=True)
class GaussianComponent:
    mean: np.ndarray
    cov_diag: np.ndarray
    weight: float = 1.0


class GaussianMixtureDensity:
    """Positive mixture of axis-aligned Gaussian bumps."""

    def __init__(self, components):
        comps = []
        for c in components:
            mean = np.asarray(c.mean if isinstance(c, GaussianComponent) else c[0], dtype=float)
            cov = np.asarray(c.cov_diag if isinstance(c, GaussianComponent) else c[1], dtype=float)
            weight = float(c.weight if isinstance(c, GaussianComponent) else c[2])
            if mean.shape != (2,) or cov.shape != (2,):
                raise InvalidInputError("each component needs a 2-vector mean and diagonal covariance")
            if np.any(cov <= 0) or weight <= 0:
                raise InvalidInputError("component weights and variances must be positive")
            comps.append(GaussianComponent(mean, cov, weight))
        if not comps:
            raise InvalidInputError("mixture needs at least one component")
        self.components = tuple(comps)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        total = np.zeros(len(pts))
        for c in self.components:
            z = (pts - c.mean) ** 2 / c.cov_diag
            total += c.weight * np.exp(-0.5 * z.sum(axis=1))
        return total


class GridDensity:
    """Bilinear interpolation of positive samples on a regular grid."""

    def __init__(self, values: np.ndarray, lo, hi):
        vals = np.asarray(values, dtype=float)
        if vals.ndim != 2 or vals.shape[0] < 2 or vals.shape[1] < 2:
            raise InvalidInputError("grid values must be 2-D with at least 2 samples per axis")
        if np.any(vals <= 0):
            raise InvalidInputError("grid density values must be positive")
        self.values = vals
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        if np.any(self.hi <= self.lo):
            raise InvalidInputError("grid bounds must satisfy lo < hi")

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        ny, nx = self.values.shape
        span = self.hi - self.lo
        u = np.clip((pts[:, 0] - self.lo[0]) / span[0], 0.0, 1.0) * (nx - 1)
        v = np.clip((pts[:, 1] - self.lo[1]) / span[1], 0.0, 1.0) * (ny - 1)
        i0 = np.clip(u.astype(int), 0, nx - 2)
        j0 = np.clip(v.astype(int), 0, ny - 2)
        fu = u - i0
        fv = v - j0
        z = self.values
        return (
            z[j0, i0] * (1 - fu) * (1 - fv)
            + z[j0, i0 + 1] * fu * (1 - fv)
            + z[j0 + 1, i0] * (1 - fu) * fv
            + z[j0 + 1, i0 + 1] * fu * fv
        )


# Symmetric triangle rules in barycentric coordinates: (points, weights),
# weights summing to one.  Degree 5 is the 7-point rule.
def _triangle_rules():
    rules = {}
    rules[2] = (
        np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]]),
        np.array([1 / 3, 1 / 3, 1 / 3]),
    )
    s = np.sqrt(15.0)
    b1 = (6.0 + s) / 21.0
    a1 = 1.0 - 2.0 * b1
    b2 = (6.0 - s) / 21.0
    a2 = 1.0 - 2.0 * b2
    w1 = (155.0 + s) / 1200.0
    w2 = (155.0 - s) / 1200.0
    pts = [[1 / 3, 1 / 3, 1 / 3]]
    wts = [9.0 / 40.0]
    for (a, b, w) in ((a1, b1, w1), (a2, b2, w2)):
        pts += [[a, b, b], [b, a, b], [b, b, a]]
        wts += [w, w, w]
    rules[5] = (np.array(pts), np.array(wts))
    return rules


_TRI_RULES = _triangle_rules()


def _fan_triangles(vertices: np.ndarray) -> np.ndarray:
    """(t, 3, 2) triangle fan from vertex 0; valid for convex polygons."""
    v = np.asarray(vertices, dtype=float)
    t = len(v) - 2
    tris = np.empty((t, 3, 2))
    for k in range(t):
        tris[k] = (v[0], v[k + 1], v[k + 2])
    return tris


def _subdivide(tris: np.ndarray) -> np.ndarray:
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
    return np.concatenate(
        [
            np.stack([a, ab, ca], axis=1),
            np.stack([ab, b, bc], axis=1),
            np.stack([ca, bc, c], axis=1),
            np.stack([ab, bc, ca], axis=1),
        ]
    )


def _integrate_triangles(tris: np.ndarray, func, order: int) -> np.ndarray:
    if order not in _TRI_RULES:
        raise InvalidInputError(f"unsupported quadrature order {order}; choose from {sorted(_TRI_RULES)}")
    bary, wts = _TRI_RULES[order]
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    areas = 0.5 * np.abs(
        (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1])
    )
    total = None
    for lam, w in zip(bary, wts):
        pts = lam[0] * a + lam[1] * b + lam[2] * c
        vals = np.asarray(func(pts))
        if vals.ndim == 1:
            vals = vals[:, None]
        contrib = (w * areas)[:, None] * vals
        total = contrib if total is None else total + contrib
    return total.sum(axis=0)


def integrate_over_polygon(
    vertices: np.ndarray,
    func,
    order: int = 5,
    tol: float = QUAD_REFINE_TOL,
    max_levels: int = 6,
) -> np.ndarray:
    """Integrate a vector-valued function over a convex polygon.

    Subdivides the fan triangulation until two successive levels agree to
    tol in every component.
    """
    v = np.asarray(vertices, dtype=float)
    if len(v) < 3:
        return np.zeros_like(np.asarray(func(np.zeros((1, 2)))).reshape(-1))
    tris = _fan_triangles(v)
    est = _integrate_triangles(tris, func, order)
    for _ in range(max_levels):
        tris = _subdivide(tris)
        nxt = _integrate_triangles(tris, func, order)
        if np.max(np.abs(nxt - est)) < tol:
            return nxt
        est = nxt
    warnings.warn("polygon quadrature did not meet tolerance; returning finest estimate")
    return est


@dataclass(frozen=True)
class VoronoiPartition:
    cells: tuple[np.ndarray, ...]
    region: ConvexRegion
    sites: np.ndarray


def voronoi_partition(positions: np.ndarray, region: ConvexRegion) -> VoronoiPartition:
    """Voronoi cells of the sites, clipped to the region.

    Each site must be distinct (pairwise separation above 1e-7); sites
    outside the region are clamped to it with a warning.
    """
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    n = len(pos)
    if n == 0:
        raise InvalidInputError("need at least one site")
    sites = pos.copy()
    for idx in range(n):
        if not region.contains(sites[idx]):
            warnings.warn(f"site {idx} lies outside the region; clamping")
            sites[idx] = region.project_inside(sites[idx])
    for i in range(n):
        for j in range(i + 1, n):
            if np.linalg.norm(sites[i] - sites[j]) < MIN_SITE_SEPARATION:
                raise DegenerateSitesError(f"sites {i} and {j} closer than {MIN_SITE_SEPARATION}")
    cells = []
    for i in range(n):
        poly = region.vertices
        for j in range(n):
            if j == i:
                continue
            normal = sites[j] - sites[i]
            offset = float(normal @ (sites[i] + sites[j])) / 2.0
            poly = clip_polygon_halfplane(poly, normal, offset)
            if len(poly) < 3:
                break
        if len(poly) < 3:
            raise NumericalBreakdownError(f"cell of site {i} degenerated to zero area")
        cells.append(poly)
    total = sum(polygon_area(c) for c in cells)
    if abs(total - region.area) > AREA_TILE_RTOL * region.area:
        raise NumericalBreakdownError(
            f"cells tile {total:.12f} of region area {region.area:.12f}"
        )
    return VoronoiPartition(tuple(cells), region, sites)


def centroid(cell: np.ndarray, density, quad_order: int = 5) -> np.ndarray:
    """Density-weighted centroid of one cell.

    The uniform case is the exact polygon centroid; otherwise the mass and
    first moment are integrated numerically.
    """
    if isinstance(density, UniformDensity):
        return polygon_centroid(cell)

    def mass_and_moment(pts):
        phi = density(pts)
        return np.column_stack([phi, pts * phi[:, None]])

    mm = integrate_over_polygon(cell, mass_and_moment, order=quad_order)
    mass = mm[0]
    if mass < MASS_TOL:
        raise DegenerateMassError(f"cell mass {mass:.3e} below tolerance")
    return mm[1:] / mass


def coverage_cost(positions: np.ndarray, partition: VoronoiPartition, density, quad_order: int = 5) -> float:
    """Locational cost: sum over cells of the density-weighted squared
    distance to the assigned robot."""
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    if len(pos) != len(partition.cells):
        raise InvalidInputError("positions and partition size differ")
    total = 0.0
    for p, cell in zip(pos, partition.cells):
        def weighted_sq(pts, p=p):
            diff = pts - p
            return (diff[:, 0] ** 2 + diff[:, 1] ** 2) * density(pts)

        total += float(integrate_over_polygon(cell, weighted_sq, order=quad_order)[0])
    return total


def partition_update_due(
    positions: np.ndarray,
    references: np.ndarray,
    stored_errors: np.ndarray,
    convergence_tol: float = CONVERGENCE_TOL,
) -> bool:
    """Decide whether references should be recomputed.

    True when no robot has drifted farther from its reference than its
    stored error, and either some robot got strictly closer or every stored
    error is already below the convergence tolerance.
    """
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    ref = np.atleast_2d(np.asarray(references, dtype=float))
    err = np.asarray(stored_errors, dtype=float)
    if len(pos) != len(ref) or len(pos) != len(err):
        raise InvalidInputError("positions, references and errors must have equal length")
    current = np.linalg.norm(pos - ref, axis=1)
    if not np.all(current <= err):
        return False
    return bool(np.any(current < err) or np.all(err <= convergence_tol))
