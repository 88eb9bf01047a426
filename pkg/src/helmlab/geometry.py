"""Exterior-domain Cartesian grid: node classification, dyadic shell index,
sphere quadrature by trilinear interpolation, and the starshapedness check."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.ndimage import map_coordinates

__all__ = [
    "Grid",
    "SphereQuadrature",
    "Ball",
    "Ellipsoid",
    "parse_obstacle",
    "build_grid",
    "sphere_quadrature",
    "starshaped_check",
]

# node classes
INTERIOR = 0
OBSTACLE = 1
SPONGE = 2
OUTER = 3
CORE = 4  # the origin node: an unknown in solves, excluded from shell norms

SHELL_NONE = -(10**4)


@dataclass
class Ball:
    radius: float
    center: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def inside(self, pts):
        d = np.atleast_2d(pts) - self.center
        return np.einsum("pj,pj->p", d, d) <= self.radius**2

    def max_extent(self):
        return self.radius + float(np.max(np.abs(self.center)))

    def boundary(self, n_theta=48, n_phi=96):
        """Boundary samples with the exterior normal of the domain (pointing
        into the obstacle)."""
        theta = np.arccos(np.linspace(1 - 1e-9, -1 + 1e-9, n_theta))
        phi = np.linspace(0, 2 * math.pi, n_phi, endpoint=False)
        T, P = np.meshgrid(theta, phi, indexing="ij")
        nrm = np.stack(
            [np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], axis=-1
        ).reshape(-1, 3)
        pts = self.center + self.radius * nrm
        return pts, -nrm


@dataclass
class Ellipsoid:
    semi_axes: np.ndarray
    center: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def inside(self, pts):
        d = (np.atleast_2d(pts) - self.center) / self.semi_axes
        return np.einsum("pj,pj->p", d, d) <= 1.0

    def max_extent(self):
        return float(np.max(self.semi_axes)) + float(np.max(np.abs(self.center)))

    def boundary(self, n_theta=48, n_phi=96):
        theta = np.arccos(np.linspace(1 - 1e-9, -1 + 1e-9, n_theta))
        phi = np.linspace(0, 2 * math.pi, n_phi, endpoint=False)
        T, P = np.meshgrid(theta, phi, indexing="ij")
        u = np.stack(
            [np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], axis=-1
        ).reshape(-1, 3)
        pts = self.center + self.semi_axes * u
        # outward normal of the ellipsoid: gradient of sum((x-c)/A)^2
        nrm = u / self.semi_axes
        nrm /= np.linalg.norm(nrm, axis=1)[:, None]
        return pts, -nrm


def parse_obstacle(spec):
    """'none' | 'ball:r' | 'ellipsoid:a,b,c[@cx,cy,cz]'."""
    if spec is None:
        return None
    spec = spec.strip()
    if spec == "none":
        return None
    if "@" in spec:
        body, ctr = spec.split("@", 1)
        center = np.array([float(s) for s in ctr.split(",")])
    else:
        body, center = spec, np.zeros(3)
    kind, _, args = body.partition(":")
    vals = [float(s) for s in args.split(",")] if args else []
    if kind == "ball":
        if len(vals) != 1:
            raise ValueError(f"ball obstacle needs one radius, got {spec!r}")
        return Ball(vals[0], center)
    if kind == "ellipsoid":
        if len(vals) != 3:
            raise ValueError(f"ellipsoid obstacle needs three semi-axes, got {spec!r}")
        return Ellipsoid(np.array(vals), center)
    raise ValueError(f"unknown obstacle kind {kind!r}")


@dataclass
class Grid:
    h: float
    rmax: float
    obstacle: Optional[object]
    sponge_width: float
    axis: np.ndarray          # shared 1-D coordinate axis
    classes: np.ndarray       # (n, n, n) uint8 node classes
    shell: np.ndarray         # (n, n, n) int32 dyadic shell index
    radius: np.ndarray        # (n, n, n) |x|
    counts: dict

    @property
    def n(self):
        return len(self.axis)

    @property
    def shape(self):
        return (self.n, self.n, self.n)

    @property
    def r_presponge(self):
        """Radius of the largest ball free of sponge and outer boundary."""
        return self.rmax - self.sponge_width

    def coords(self):
        ax = self.axis
        return ax[:, None, None], ax[None, :, None], ax[None, None, :]

    def points(self, mask=None):
        X, Y, Z = np.meshgrid(self.axis, self.axis, self.axis, indexing="ij")
        pts = np.stack([X, Y, Z], axis=-1).reshape(-1, 3)
        if mask is not None:
            pts = pts[mask.ravel()]
        return pts

    def interior_points(self):
        return self.points(self.classes == INTERIOR)

    @property
    def unknown(self):
        """Nodes carrying degrees of freedom in the linear system."""
        return (self.classes == INTERIOR) | (self.classes == SPONGE) | (
            self.classes == CORE
        )

    @property
    def pinned(self):
        return ~self.unknown

    def norm_mask(self, rcap=None):
        """Nodes entering the continuum norms: interior, resolved shells."""
        jmin, jmax = self.resolved_shells()
        m = (self.classes == INTERIOR) & (self.shell >= jmin)
        if rcap is not None:
            m &= self.radius <= rcap
        return m

    def resolved_shells(self):
        """Shell range [jmin, jmax] resolved by the grid: sub-2h shells carry
        no information and are truncated; jmax is the outermost shell whose
        inner radius the cube reaches."""
        return _shell_range(self.h, self.rmax)

    def populated_shells(self):
        s = self.shell[self.shell != SHELL_NONE]
        return int(s.min()), int(s.max())

    def to_index_coords(self, pts):
        """Physical points -> fractional array indices for map_coordinates."""
        return (np.atleast_2d(pts).T + self.rmax) / self.h

    def interpolate(self, fld, pts):
        """Trilinear interpolation of a (possibly complex) node field."""
        idx = self.to_index_coords(pts)
        if np.iscomplexobj(fld):
            re = map_coordinates(fld.real, idx, order=1, mode="nearest")
            im = map_coordinates(fld.imag, idx, order=1, mode="nearest")
            return re + 1j * im
        return map_coordinates(fld, idx, order=1, mode="nearest")

    def node_volume_sum(self, values, mask=None):
        """Midpoint-rule volume integral over interior (or given) nodes."""
        if mask is None:
            mask = self.classes == INTERIOR
        return np.sum(values[mask]) * self.h**3


def _shell_range(h, rmax):
    jmin = math.ceil(math.log2(2 * h))
    jmax = math.floor(math.log2(rmax))
    return jmin, jmax


def build_grid(h, rmax, obstacle=None, sponge_width=None):
    if h <= 0:
        raise ValueError("grid spacing must be positive")
    jmin, jmax = _shell_range(h, rmax)
    if jmax - jmin + 1 < 3:
        raise ValueError(
            f"fewer than 3 dyadic shells representable (j in [{jmin}, {jmax}])"
        )
    if rmax < 8 * h:
        raise ValueError("extent must cover at least 8 grid spacings")
    if isinstance(obstacle, str):
        obstacle = parse_obstacle(obstacle)
    if sponge_width is None:
        sponge_width = 2.0
    m = round(rmax / h)
    if abs(m * h - rmax) > 1e-12 * max(1.0, rmax):
        raise ValueError("rmax must be an integer multiple of h")
    axis = (np.arange(-m, m + 1)) * h
    n = 2 * m + 1

    X, Y, Z = np.meshgrid(axis, axis, axis, indexing="ij")
    radius = np.sqrt(X**2 + Y**2 + Z**2)
    linf = np.maximum(np.abs(X), np.maximum(np.abs(Y), np.abs(Z)))

    classes = np.full((n, n, n), INTERIOR, dtype=np.uint8)
    classes[linf >= rmax - h / 2] = OUTER
    classes[(linf >= rmax - sponge_width) & (classes == INTERIOR)] = SPONGE

    if obstacle is not None:
        if obstacle.max_extent() >= rmax - sponge_width - 2 * h:
            raise ValueError("obstacle touches the sponge layer")
        pts = np.stack([X, Y, Z], axis=-1).reshape(-1, 3)
        inside = obstacle.inside(pts).reshape(n, n, n)
        if np.any(inside & (classes != INTERIOR)):
            raise ValueError("obstacle overlaps sponge or outer boundary")
        classes[inside] = OBSTACLE

    core = (radius == 0) & (classes == INTERIOR)
    classes[core] = CORE

    with np.errstate(divide="ignore"):
        shell = np.where(
            radius > 0, np.floor(np.log2(np.where(radius > 0, radius, 1.0))), SHELL_NONE
        ).astype(np.int32)
    shell[classes == CORE] = SHELL_NONE

    grid = Grid(
        h=h,
        rmax=rmax,
        obstacle=obstacle,
        sponge_width=sponge_width,
        axis=axis,
        classes=classes,
        shell=shell,
        radius=radius,
        counts={},
    )
    grid.counts = {
        "interior": int(np.sum(classes == INTERIOR)),
        "obstacle": int(np.sum(classes == OBSTACLE)),
        "sponge": int(np.sum(classes == SPONGE)),
        "outer": int(np.sum(classes == OUTER)),
        "core": int(np.sum(classes == CORE)),
    }
    return grid


@dataclass
class SphereQuadrature:
    R: float
    nodes: np.ndarray     # (m, 3)
    weights: np.ndarray   # (m,), sum = accessible area
    clipped: bool
    degree: int

    def integrate_values(self, vals):
        return np.sum(self.weights * vals)

    def integrate(self, grid, fld):
        return self.integrate_values(grid.interpolate(fld, self.nodes))


def _gauss_product_sphere(R, degree):
    """Gauss-Legendre x uniform-phi product rule, exact for spherical
    harmonics up to the given degree."""
    n_mu = max(2, degree + 1)
    n_phi = max(4, 2 * degree + 1)
    mu, wmu = np.polynomial.legendre.leggauss(n_mu)
    phi = np.linspace(0, 2 * math.pi, n_phi, endpoint=False)
    MU, PHI = np.meshgrid(mu, phi, indexing="ij")
    st = np.sqrt(1 - MU**2)
    nodes = R * np.stack(
        [st * np.cos(PHI), st * np.sin(PHI), MU], axis=-1
    ).reshape(-1, 3)
    W = np.repeat(wmu, n_phi) * (2 * math.pi / n_phi) * R**2
    return nodes, W


def sphere_quadrature(grid, R, degree=16):
    if not (grid.h < R < grid.rmax):
        raise ValueError(f"quadrature radius {R} outside the grid")
    nodes, weights = _gauss_product_sphere(R, degree)
    clipped = False
    if grid.obstacle is not None:
        inside = grid.obstacle.inside(nodes)
        if np.any(inside):
            clipped = True
            nodes, weights = nodes[~inside], weights[~inside]
    return SphereQuadrature(R=R, nodes=nodes, weights=weights, clipped=clipped,
                            degree=degree)


def starshaped_check(coeffs, grid_or_obstacle, tol=1e-10, n_theta=64, n_phi=128):
    """Evaluate a(x) x . nu over the obstacle boundary; starshaped (w.r.t. the
    metric) means the maximum is <= tol."""
    obstacle = getattr(grid_or_obstacle, "obstacle", grid_or_obstacle)
    if obstacle is None:
        return True, None, 0.0
    pts, nu = obstacle.boundary(n_theta, n_phi)
    ax = coeffs.metric.apply(pts, pts)  # a(x) x
    s = np.einsum("pj,pj->p", ax, nu)
    worst = int(np.argmax(s))
    return bool(s[worst] <= tol), pts[worst], float(s[worst])
