"""High-accuracy oracle for radially symmetric problems in dimension n >= 3:
spherical-harmonic reduction to uncoupled two-point boundary-value ODEs

    r^(1-n) (r^(n-1) alpha u')' - beta l(l+n-2) r^-2 u + (c + lam + i eps) u = f_l

on a geometrically graded mesh, discretized with local 7-point Fornberg
stencils (4th order and better), outgoing far-field closure
u' = (i k - (n-1)/(2 R)) u with k the sqrt branch of positive imaginary part.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import CubicSpline
from scipy.special import sph_harm_y

__all__ = ["RadialProblem", "RadialSolution", "reduce_and_solve", "fornberg_weights"]


def fornberg_weights(z, x, m):
    """Finite-difference weights for derivatives 0..m at point z on nodes x."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    C = np.zeros((n, m + 1))
    c1 = 1.0
    c4 = x[0] - z
    C[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    C[i, k] = c1 * (k * C[i - 1, k - 1] - c5 * C[i - 1, k]) / c2
                C[i, 0] = -c1 * c5 * C[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                C[j, k] = (c4 * C[j, k] - k * C[j, k - 1]) / c3
            C[j, 0] = c4 * C[j, 0] / c3
        c1 = c2
    return C


def _sqrt_upper(z):
    """sqrt branch with nonnegative imaginary part."""
    w = cmath.sqrt(z)
    return w if w.imag >= 0 else -w


@dataclass
class RadialProblem:
    n: int = 3
    alpha: Callable = lambda r: np.ones_like(r)
    alpha1: Callable = lambda r: np.zeros_like(r)
    beta: Callable = lambda r: np.ones_like(r)
    c: Callable = lambda r: np.zeros_like(r)
    lam: float = 1.0
    eps: float = 0.0
    r_obs: float = 0.0
    lmax: int = 0
    rfar: float = 32.0
    m_points: int = 1600
    r_min: float = 1e-3
    grading: str = "geometric"

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("radial reduction needs n >= 3")

    def mesh(self):
        r0 = self.r_obs if self.r_obs > 0 else self.r_min
        if self.grading == "geometric":
            return r0 * (self.rfar / r0) ** np.linspace(0, 1, self.m_points)
        if self.grading == "uniform":
            return np.linspace(r0, self.rfar, self.m_points)
        raise ValueError(f"unknown grading {self.grading!r}")

    @staticmethod
    def from_coefficients(coeffs, lam, eps, **kw):
        """Radial problem for a radial-form coefficient set (b must vanish)."""
        if not coeffs.magnetic.is_zero:
            raise ValueError("the radial oracle does not support magnetic terms")
        met = coeffs.metric
        return RadialProblem(
            n=coeffs.dim,
            alpha=lambda r: met.beta.f(r) + met.gamma.f(r),
            alpha1=lambda r: met.beta.f1(r) + met.gamma.f1(r),
            beta=lambda r: met.beta.f(r),
            c=coeffs.electric.value_r,
            lam=lam,
            eps=eps,
            **kw,
        )


@dataclass
class RadialSolution:
    problem: RadialProblem
    r: np.ndarray
    modes: dict
    flux: dict = field(default_factory=dict)
    tail_fraction: float = 0.0

    def _spline(self, key):
        u = self.modes[key]
        return (CubicSpline(self.r, u.real), CubicSpline(self.r, u.imag))

    def eval_radial(self, rq, key="radial"):
        sr, si = self._spline(key)
        rq = np.asarray(rq, dtype=float)
        return sr(rq) + 1j * si(rq)

    def eval_points(self, pts):
        pts = np.atleast_2d(pts)
        rq = np.sqrt(np.einsum("pj,pj->p", pts, pts))
        out = np.zeros(len(pts), dtype=complex)
        for key in self.modes:
            if key == "radial":
                out += self.eval_radial(rq, key)
                continue
            l, m = key
            theta = np.arccos(np.clip(pts[:, 2] / np.where(rq > 0, rq, 1.0), -1, 1))
            phi = np.arctan2(pts[:, 1], pts[:, 0])
            out += self.eval_radial(rq, key) * sph_harm_y(l, m, theta, phi)
        return out


def _solve_mode(p, rr, f_vals, l, width=7):
    """Solve one angular mode on the mesh rr with rhs samples f_vals."""
    m = len(rr)
    n = p.n
    k = _sqrt_upper(p.lam + 1j * p.eps)
    al = p.alpha(rr)
    al1 = p.alpha1(rr)
    be = p.beta(rr)
    cc = p.c(rr).astype(complex)
    coef2 = al.astype(complex)
    coef1 = ((n - 1) / rr) * al + al1 + 0j
    coef0 = -be * l * (l + n - 2) / rr**2 + cc + p.lam + 1j * p.eps

    rows, cols, vals = [], [], []
    half = width // 2

    def add_row(i, stencil_idx, w0, w1, w2):
        rows.extend([i] * len(stencil_idx))
        cols.extend(stencil_idx)
        vals.extend(coef2[i] * w2 + coef1[i] * w1 + coef0[i] * w0)

    rhs = np.array(f_vals, dtype=complex)

    for i in range(m):
        lo = min(max(0, i - half), m - width)
        idx = np.arange(lo, lo + width)
        if i == 0:
            C = fornberg_weights(rr[0], rr[idx], 1)
            if p.r_obs > 0:
                rows.append(0); cols.append(0); vals.append(1.0 + 0j)
            else:
                # regularity at the inner edge: r u' - l u = 0
                w1 = C[:, 1] * rr[0]
                w0 = np.zeros(width); w0[0] = -float(l)
                rows.extend([0] * width)
                cols.extend(idx)
                vals.extend((w1 + w0).astype(complex))
            rhs[0] = 0.0
        elif i == m - 1:
            C = fornberg_weights(rr[-1], rr[idx], 1)
            bc = C[:, 1].astype(complex)
            bc[-1] -= 1j * k - (n - 1) / (2 * rr[-1])
            rows.extend([m - 1] * width)
            cols.extend(idx)
            vals.extend(bc)
            rhs[-1] = 0.0
        else:
            C = fornberg_weights(rr[i], rr[idx], 2)
            add_row(i, idx, C[:, 0], C[:, 1], C[:, 2])

    A = sp.csc_matrix(
        (np.asarray(vals, dtype=complex), (rows, cols)), shape=(m, m)
    )
    u = spla.spsolve(A, rhs)

    # outgoing flux Im(conj(u) u') at the far edge
    tail = np.arange(m - width, m)
    C = fornberg_weights(rr[-1], rr[tail], 1)
    up = np.dot(C[:, 1], u[tail])
    flux = float(np.imag(np.conj(u[-1]) * up))
    return u, flux


def _project_field(field_grid, p, rr, quad_degree):
    """Expand a Cartesian field in spherical harmonics on the radial mesh."""
    from .geometry import _gauss_product_sphere

    fld, grid = field_grid
    nodes1, w1 = _gauss_product_sphere(1.0, quad_degree)
    theta = np.arccos(np.clip(nodes1[:, 2], -1, 1))
    phi = np.arctan2(nodes1[:, 1], nodes1[:, 0])
    keys = [(l, m) for l in range(p.lmax + 1) for m in range(-l, l + 1)]
    Y = {key: sph_harm_y(key[0], key[1], theta, phi) for key in keys}
    inside = rr <= grid.rmax - grid.sponge_width
    coefs = {key: np.zeros(len(rr), dtype=complex) for key in keys}
    total_energy = 0.0
    captured = 0.0
    for i, r in enumerate(rr):
        if not inside[i] or r <= grid.h:
            continue
        vals = grid.interpolate(fld, r * nodes1)
        total_energy += float(np.sum(w1 * np.abs(vals) ** 2))
        for key in keys:
            proj = np.sum(w1 * vals * np.conj(Y[key]))
            coefs[key][i] = proj
            captured += abs(proj) ** 2 / (4 * np.pi) * 4 * np.pi * 0 + abs(proj) ** 2
    tail = 1.0 - captured / total_energy if total_energy > 0 else 0.0
    return coefs, max(tail, 0.0)


def reduce_and_solve(p, f, quad_degree=None):
    """Solve the radial problem for rhs f.

    f may be a radial callable (solution is then itself radial), a dict
    {(l, m): radial callable} of harmonic components, or a (field, grid) pair
    to be expanded up to p.lmax (tail energy beyond lmax is reported and must
    stay below 1e-10 of the total)."""
    rr = p.mesh()
    sol = RadialSolution(problem=p, r=rr, modes={})
    if callable(f):
        u, flux = _solve_mode(p, rr, f(rr), 0)
        sol.modes["radial"] = u
        sol.flux["radial"] = flux
        return sol
    if isinstance(f, dict):
        for (l, m), g in f.items():
            u, flux = _solve_mode(p, rr, g(rr), l)
            sol.modes[(l, m)] = u
            sol.flux[(l, m)] = flux
        return sol
    if isinstance(f, tuple) and len(f) == 2:
        if quad_degree is None:
            quad_degree = max(16, 2 * p.lmax + 2)
        coefs, tail = _project_field(f, p, rr, quad_degree)
        if tail > 1e-10:
            raise ValueError(
                f"harmonic tail energy {tail:.3e} exceeds 1e-10 of the total; "
                f"raise lmax"
            )
        sol.tail_fraction = tail
        for (l, m), g in coefs.items():
            u, flux = _solve_mode(p, rr, g, l)
            sol.modes[(l, m)] = u
            sol.flux[(l, m)] = flux
        return sol
    raise TypeError("f must be a callable, a {(l,m): callable} dict, or (field, grid)")
