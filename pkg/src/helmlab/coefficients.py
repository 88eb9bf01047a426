"""Operator coefficients (a, b, c): closed-form library entries with analytic
derivatives, short/long-range splittings, and the scalar functionals that the
admissibility conditions are built from.

All evaluation routines are vectorized over an (m, 3) array of sample points.
Metric derivative tensors use the index convention

    d1[p, j, k, l]       = d_l a_jk   (x_p)
    d2[p, j, k, l, m]    = d_m d_l a_jk
    d3[p, j, k, l, m, q] = d_q d_m d_l a_jk

and the magnetic Jacobian jac[p, j, l] = d_j b_l (x_p).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "CoefficientSet",
    "AssumptionReport",
    "RadialMetric",
    "RadialElectric",
    "Magnetic",
    "make_coefficients",
    "parse_entry",
    "smoothstep_cutoff",
    "derived_metric_scalars",
    "radial_A_psi",
    "tangential_field",
    "assumption_report",
]

_EYE3 = np.eye(3)


# ---------------------------------------------------------------------------
# radial calculus helpers
# ---------------------------------------------------------------------------

def _radius(pts):
    return np.sqrt(np.einsum("pj,pj->p", pts, pts))


def rad_d1(s1, xhat):
    """Gradient of a radial scalar: d_l s = s'(r) xhat_l."""
    return s1[:, None] * xhat


def rad_d2(s1, s2, xhat, r):
    """Hessian of a radial scalar."""
    P = np.einsum("pl,pm->plm", xhat, xhat)
    return s2[:, None, None] * P + (s1 / r)[:, None, None] * (_EYE3 - P)


def rad_d3(s1, s2, s3, xhat, r):
    """Third derivative tensor of a radial scalar, d_q d_m d_l s."""
    P = np.einsum("pl,pm->plm", xhat, xhat)
    T = np.einsum("plm,pq->plmq", _EYE3 - P, xhat)
    sym = T + T.transpose(0, 1, 3, 2) + T.transpose(0, 3, 2, 1)
    PPP = np.einsum("pl,pm,pq->plmq", xhat, xhat, xhat)
    coef = (s2 / r - s1 / r**2)[:, None, None, None]
    return s3[:, None, None, None] * PPP + coef * sym


@dataclass
class RadialScalar:
    """A radial function with analytic derivatives up to third order."""

    f: Callable[[np.ndarray], np.ndarray]
    f1: Callable[[np.ndarray], np.ndarray]
    f2: Callable[[np.ndarray], np.ndarray]
    f3: Callable[[np.ndarray], np.ndarray]

    @staticmethod
    def zero():
        z = lambda r: np.zeros_like(r)
        return RadialScalar(z, z, z, z)

    @staticmethod
    def const(value):
        return RadialScalar(
            lambda r: np.full_like(r, value),
            lambda r: np.zeros_like(r),
            lambda r: np.zeros_like(r),
            lambda r: np.zeros_like(r),
        )


# ---------------------------------------------------------------------------
# metric
# ---------------------------------------------------------------------------

@dataclass
class RadialMetric:
    """Metric of the form a(x) = beta(r) I + gamma(r) xhat xhat^T.

    Internally works with g(r) = gamma(r)/r^2 so that the angular factor is
    the polynomial x_j x_k, whose derivatives terminate.
    """

    beta: RadialScalar
    gamma: RadialScalar
    name: str = "radial-metric"
    decay: float = 1.0  # |a - I| ~ r^(-decay) at infinity, for tail estimates

    @property
    def is_flat(self):
        return self.name == "flat"

    def _g(self, r):
        return self.gamma.f(r) / r**2

    def _g1(self, r):
        return self.gamma.f1(r) / r**2 - 2 * self.gamma.f(r) / r**3

    def _g2(self, r):
        return (
            self.gamma.f2(r) / r**2
            - 4 * self.gamma.f1(r) / r**3
            + 6 * self.gamma.f(r) / r**4
        )

    def _g3(self, r):
        return (
            self.gamma.f3(r) / r**2
            - 6 * self.gamma.f2(r) / r**3
            + 18 * self.gamma.f1(r) / r**4
            - 24 * self.gamma.f(r) / r**5
        )

    def value(self, pts):
        pts = np.atleast_2d(pts)
        r = _radius(pts)
        out = self.beta.f(r)[:, None, None] * _EYE3 + np.einsum(
            "p,pj,pk->pjk", self._g(r), pts, pts
        )
        return out

    def d1(self, pts):
        pts = np.atleast_2d(pts)
        r = _radius(pts)
        xh = pts / r[:, None]
        db = rad_d1(self.beta.f1(r), xh)
        dg = rad_d1(self._g1(r), xh)
        g = self._g(r)
        out = np.einsum("pl,jk->pjkl", db, _EYE3)
        out += np.einsum("pl,pj,pk->pjkl", dg, pts, pts)
        cross = np.einsum("jl,pk->pjkl", _EYE3, pts) + np.einsum(
            "kl,pj->pjkl", _EYE3, pts
        )
        out += g[:, None, None, None] * cross
        return out

    def d2(self, pts):
        pts = np.atleast_2d(pts)
        r = _radius(pts)
        xh = pts / r[:, None]
        bb = rad_d2(self.beta.f1(r), self.beta.f2(r), xh, r)
        gg = rad_d2(self._g1(r), self._g2(r), xh, r)
        dg = rad_d1(self._g1(r), xh)
        g = self._g(r)
        out = np.einsum("plm,jk->pjklm", bb, _EYE3)
        out += np.einsum("plm,pj,pk->pjklm", gg, pts, pts)
        xj_k = np.einsum("jl,pk->pjkl", _EYE3, pts) + np.einsum(
            "kl,pj->pjkl", _EYE3, pts
        )
        out += np.einsum("pm,pjkl->pjklm", dg, xj_k)
        out += np.einsum("pl,pjkm->pjklm", dg, xj_k)
        dd = np.einsum("jl,km->jklm", _EYE3, _EYE3) + np.einsum(
            "kl,jm->jklm", _EYE3, _EYE3
        )
        out += g[:, None, None, None, None] * dd[None]
        return out

    def d3(self, pts):
        pts = np.atleast_2d(pts)
        r = _radius(pts)
        xh = pts / r[:, None]
        b3 = rad_d3(self.beta.f1(r), self.beta.f2(r), self.beta.f3(r), xh, r)
        g3 = rad_d3(self._g1(r), self._g2(r), self._g3(r), xh, r)
        g2 = rad_d2(self._g1(r), self._g2(r), xh, r)
        g1 = rad_d1(self._g1(r), xh)
        out = np.einsum("plmq,jk->pjklmq", b3, _EYE3)
        out += np.einsum("plmq,pj,pk->pjklmq", g3, pts, pts)
        xj_k = np.einsum("jl,pk->pjkl", _EYE3, pts) + np.einsum(
            "kl,pj->pjkl", _EYE3, pts
        )
        out += np.einsum("pmq,pjkl->pjklmq", g2, xj_k)
        out += np.einsum("plq,pjkm->pjklmq", g2, xj_k)
        out += np.einsum("plm,pjkq->pjklmq", g2, xj_k)
        dd_lm = np.einsum("jl,km->jklm", _EYE3, _EYE3) + np.einsum(
            "kl,jm->jklm", _EYE3, _EYE3
        )
        out += np.einsum("pq,jklm->pjklmq", g1, dd_lm)
        out += np.einsum("pm,jklq->pjklmq", g1, dd_lm)
        out += np.einsum("pl,jkmq->pjklmq", g1, dd_lm)
        return out

    def diag_entry(self, pts, d):
        """a_dd(x) without building the full tensor (face-sampling fast path)."""
        pts = np.atleast_2d(pts)
        r2 = np.einsum("pj,pj->p", pts, pts)
        if self.is_flat:
            return np.ones(len(pts))
        return self.beta.f(np.sqrt(r2)) + self._g(np.sqrt(r2)) * pts[:, d] ** 2

    def apply(self, pts, w):
        """Matrix-vector product a(x) w for a stack of vectors w (m, 3)."""
        pts = np.atleast_2d(pts)
        if self.is_flat:
            return np.array(w, copy=True)
        r = _radius(pts)
        proj = np.einsum("pj,pj->p", pts, w) * self._g(r)
        return self.beta.f(r)[:, None] * w + proj[:, None] * pts


def flat_metric():
    return RadialMetric(RadialScalar.const(1.0), RadialScalar.zero(), name="flat",
                        decay=np.inf)


def metric_longrange(kappa, delta):
    """a = I + kappa (1+r)^(-delta) xhat xhat^T (long-range perturbation)."""
    g = RadialScalar(
        lambda r: kappa * (1 + r) ** (-delta),
        lambda r: -kappa * delta * (1 + r) ** (-delta - 1),
        lambda r: kappa * delta * (delta + 1) * (1 + r) ** (-delta - 2),
        lambda r: -kappa * delta * (delta + 1) * (delta + 2) * (1 + r) ** (-delta - 3),
    )
    return RadialMetric(RadialScalar.const(1.0), g,
                        name=f"metric_longrange({kappa},{delta})", decay=delta)


def metric_radial(alpha, beta):
    """a = I + rho(r) (alpha xhat xhat^T + beta (I - xhat xhat^T)), rho = 1/(1+r)."""
    rho = RadialScalar(
        lambda r: 1.0 / (1 + r),
        lambda r: -((1 + r) ** -2.0),
        lambda r: 2.0 * (1 + r) ** -3.0,
        lambda r: -6.0 * (1 + r) ** -4.0,
    )
    bfun = RadialScalar(
        lambda r: 1.0 + beta * rho.f(r),
        lambda r: beta * rho.f1(r),
        lambda r: beta * rho.f2(r),
        lambda r: beta * rho.f3(r),
    )
    gfun = RadialScalar(
        lambda r: (alpha - beta) * rho.f(r),
        lambda r: (alpha - beta) * rho.f1(r),
        lambda r: (alpha - beta) * rho.f2(r),
        lambda r: (alpha - beta) * rho.f3(r),
    )
    return RadialMetric(bfun, gfun, name=f"metric_radial({alpha},{beta})", decay=1.0)


# ---------------------------------------------------------------------------
# electric potentials
# ---------------------------------------------------------------------------

def smoothstep_cutoff(r):
    """Cubic smoothstep cutoff: 1 on r <= 1/2, 0 on r >= 1."""
    r = np.asarray(r, dtype=float)
    t = np.clip(2.0 * r - 1.0, 0.0, 1.0)
    return 1.0 - t * t * (3.0 - 2.0 * t)


def smoothstep_cutoff_d1(r):
    r = np.asarray(r, dtype=float)
    t = 2.0 * r - 1.0
    inside = (t > 0.0) & (t < 1.0)
    out = np.zeros_like(r)
    out[inside] = -2.0 * 6.0 * t[inside] * (1.0 - t[inside])
    return out


@dataclass
class RadialElectric:
    """Radial electric coefficient c(r) with analytic gradient and the fixed
    smooth short/long-range splitting c = chi c + (1-chi) c."""

    c: Callable[[np.ndarray], np.ndarray]
    c1: Callable[[np.ndarray], np.ndarray]  # dc/dr
    name: str = "none"
    decay: float = 1.0  # |c| ~ r^(-decay) at infinity
    singular_origin: bool = False

    @staticmethod
    def zero():
        z = lambda r: np.zeros_like(r)
        return RadialElectric(z, z, name="none", decay=np.inf)

    def value(self, pts):
        return self.c(_radius(np.atleast_2d(pts)))

    def grad(self, pts):
        pts = np.atleast_2d(pts)
        r = _radius(pts)
        return (self.c1(r) / r)[:, None] * pts

    def value_r(self, r):
        return self.c(np.asarray(r, dtype=float))

    def short(self, r):
        return smoothstep_cutoff(r) * self.c(r)

    def long(self, r):
        return (1.0 - smoothstep_cutoff(r)) * self.c(r)

    def short_d1(self, r):
        return smoothstep_cutoff(r) * self.c1(r) + smoothstep_cutoff_d1(r) * self.c(r)


def coulomb(C, alpha):
    if not 0 < alpha <= 2:
        raise ValueError("coulomb exponent must be in (0, 2]")
    return RadialElectric(
        lambda r: C * r ** (-alpha),
        lambda r: -alpha * C * r ** (-alpha - 1),
        name=f"coulomb({C},{alpha})",
        decay=alpha,
        singular_origin=True,
    )


def inverse_square(C):
    e = coulomb(C, 2.0)
    e.name = f"inverse_square({C})"
    return e


def gaussian_well(C, width):
    """Well in the spectral (Schroedinger) form: the probe operator is
    -nabla.(a nabla) - c, so a depth-C well there corresponds to c = -C exp."""
    w2 = width * width
    return RadialElectric(
        lambda r: -C * np.exp(-(r**2) / w2),
        lambda r: C * (2 * r / w2) * np.exp(-(r**2) / w2),
        name=f"gaussian_well({C},{width})",
        decay=np.inf,
    )


def lorentzian_well(C, width):
    w2 = width * width
    return RadialElectric(
        lambda r: C / (1 + r**2 / w2) ** 2,
        lambda r: -4 * C * (r / w2) / (1 + r**2 / w2) ** 3,
        name=f"lorentzian_well({C},{width})",
        decay=4.0,
    )


# ---------------------------------------------------------------------------
# magnetic potentials
# ---------------------------------------------------------------------------

@dataclass
class Magnetic:
    """Magnetic coefficient b with analytic Jacobian.  The library entries are
    all short range (b_L = 0); singular_axis marks the AB vortex line."""

    b: Callable[[np.ndarray], np.ndarray]
    jac: Callable[[np.ndarray], np.ndarray]  # jac[p, j, l] = d_j b_l
    name: str = "none"
    singular_axis: bool = False

    @staticmethod
    def zero():
        return Magnetic(
            lambda pts: np.zeros_like(np.atleast_2d(pts), dtype=float),
            lambda pts: np.zeros((len(np.atleast_2d(pts)), 3, 3)),
            name="none",
        )

    @property
    def is_zero(self):
        return self.name == "none"

    def value(self, pts):
        return self.b(np.atleast_2d(pts))

    def db(self, pts):
        """Field matrix db[p, j, l] = d_j b_l - d_l b_j."""
        J = self.jac(np.atleast_2d(pts))
        return J - J.transpose(0, 2, 1)

    def short_value(self, pts):
        return self.value(pts)

    def long_value(self, pts):
        return np.zeros_like(self.value(pts))


def aharonov_bohm(C):
    def b(pts):
        pts = np.atleast_2d(pts)
        rho2 = pts[:, 0] ** 2 + pts[:, 1] ** 2
        out = np.zeros_like(pts, dtype=float)
        out[:, 0] = -C * pts[:, 1] / rho2
        out[:, 1] = C * pts[:, 0] / rho2
        return out

    def jac(pts):
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0], pts[:, 1]
        rho2 = x**2 + y**2
        J = np.zeros((len(pts), 3, 3))
        J[:, 0, 0] = 2 * C * x * y / rho2**2
        J[:, 1, 0] = C * (y**2 - x**2) / rho2**2
        J[:, 0, 1] = C * (y**2 - x**2) / rho2**2
        J[:, 1, 1] = -2 * C * x * y / rho2**2
        return J

    return Magnetic(b, jac, name=f"aharonov_bohm({C})", singular_axis=True)


def ab_sphere(C):
    def b(pts):
        pts = np.atleast_2d(pts)
        r2 = np.einsum("pj,pj->p", pts, pts)
        out = np.zeros_like(pts, dtype=float)
        out[:, 0] = -C * pts[:, 1] / r2
        out[:, 1] = C * pts[:, 0] / r2
        return out

    def jac(pts):
        pts = np.atleast_2d(pts)
        x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
        r2 = x**2 + y**2 + z**2
        J = np.zeros((len(pts), 3, 3))
        # b1 = -C y / r^2
        J[:, 0, 0] = 2 * C * x * y / r2**2
        J[:, 1, 0] = -C / r2 + 2 * C * y * y / r2**2
        J[:, 2, 0] = 2 * C * y * z / r2**2
        # b2 = C x / r^2
        J[:, 0, 1] = C / r2 - 2 * C * x * x / r2**2
        J[:, 1, 1] = -2 * C * x * y / r2**2
        J[:, 2, 1] = -2 * C * x * z / r2**2
        return J

    return Magnetic(b, jac, name=f"ab_sphere({C})", singular_axis=True)


# ---------------------------------------------------------------------------
# coefficient set
# ---------------------------------------------------------------------------

@dataclass
class CoefficientSet:
    dim: int = 3
    metric: RadialMetric = field(default_factory=flat_metric)
    magnetic: Magnetic = field(default_factory=Magnetic.zero)
    electric: RadialElectric = field(default_factory=RadialElectric.zero)
    nu: float = 1.0
    N: float = 1.0
    delta: float = 0.5

    def __post_init__(self):
        if self.dim < 3:
            raise ValueError("dimension must be >= 3")

    @property
    def is_flat_metric(self):
        return self.metric.is_flat

    def clamped_points(self, pts, clamp_radius):
        """Pull points inside the singular tube out to its boundary.

        For origin-singular scalars the clamp is radial; for the AB axis it is
        cylindrical.  Returns (points, was_clamped mask)."""
        pts = np.array(np.atleast_2d(pts), dtype=float)
        clamped = np.zeros(len(pts), dtype=bool)
        r = _radius(pts)
        tiny = r < clamp_radius
        if np.any(tiny):
            safe = np.where(r[tiny] > 0, r[tiny], 1.0)
            dirs = np.where(
                (r[tiny] > 0)[:, None], pts[tiny] / safe[:, None], [[1.0, 0.0, 0.0]]
            )
            pts[tiny] = dirs * clamp_radius
            clamped |= tiny
        if self.magnetic.singular_axis:
            rho = np.hypot(pts[:, 0], pts[:, 1])
            near = rho < clamp_radius
            if np.any(near):
                safe = np.where(rho[near] > 0, rho[near], 1.0)
                scale = clamp_radius / safe
                fix = pts[near]
                fix[:, 0] = np.where(rho[near] > 0, fix[:, 0] * scale, clamp_radius)
                fix[:, 1] = np.where(rho[near] > 0, fix[:, 1] * scale, 0.0)
                pts[near] = fix
                clamped |= near
        return pts, clamped


def _atil_diag(d1):
    """a_{lm;l} as a (p, l, m) stack: entry [p, l, m] = d1[p, l, m, l]."""
    p, n = d1.shape[0], d1.shape[1]
    out = np.empty((p, n, n))
    for l in range(n):
        out[:, l, :] = d1[:, l, :, l]
    return out


def derived_metric_scalars(coeffs, x):
    """(ahat, abar, atil) at a single point: a xhat.xhat, tr a, a_{lm;l} xhat_m."""
    x = np.asarray(x, dtype=float).reshape(1, 3)
    ahat, abar, atil = metric_scalars_vec(coeffs, x)
    return float(ahat[0]), float(abar[0]), float(atil[0])


def metric_scalars_vec(coeffs, pts):
    """Vectorized (ahat, abar, atil) over (m,3) points."""
    pts = np.atleast_2d(pts)
    r = _radius(pts)
    if np.any(r == 0):
        raise ValueError("metric scalars are undefined at the origin")
    xh = pts / r[:, None]
    if coeffs.is_flat_metric:
        m = len(pts)
        return np.ones(m), np.full(m, 3.0), np.zeros(m)
    a = coeffs.metric.value(pts)
    d1 = coeffs.metric.d1(pts)
    ahat = np.einsum("pj,pjk,pk->p", xh, a, xh)
    abar = np.einsum("pjj->p", a)
    atil = np.einsum("plm,pm->p", _atil_diag(d1), xh)
    return ahat, abar, atil


def radial_A_psi(coeffs, x, psi1, psi2):
    """A psi = ahat psi'' + (abar-ahat) psi'/r + atil psi' at point x."""
    x = np.asarray(x, dtype=float).reshape(1, 3)
    r = float(_radius(x)[0])
    if r == 0:
        raise ValueError("radial A psi is undefined at the origin")
    ahat, abar, atil = derived_metric_scalars(coeffs, x[0])
    return ahat * psi2 + (abar - ahat) * psi1 / r + atil * psi1


def tangential_field(coeffs, x):
    """dbhat = db a xhat, the tangential part of the magnetic field."""
    x = np.asarray(x, dtype=float).reshape(1, 3)
    r = float(_radius(x)[0])
    if r == 0:
        raise ValueError("tangential magnetic field is undefined at the origin")
    xh = x / r
    db = coeffs.magnetic.db(x)[0]
    axh = coeffs.metric.apply(x, xh)[0]
    return db @ axh


def tangential_field_vec(coeffs, pts):
    pts = np.atleast_2d(pts)
    r = _radius(pts)
    xh = pts / r[:, None]
    db = coeffs.magnetic.db(pts)
    axh = coeffs.metric.apply(pts, xh)
    return np.einsum("pjl,pl->pj", db, axh)


# ---------------------------------------------------------------------------
# assumption functionals
# ---------------------------------------------------------------------------

def _matrix_opnorm(mats):
    """Spectral norm of a stack of symmetric 3x3 matrices."""
    w = np.linalg.eigvalsh(mats)
    return np.max(np.abs(w), axis=-1)


def _deriv_norms(coeffs, pts):
    """|a-I|, |a'|, |a''|, |a'''| at points (spectral norm per multi-index, summed)."""
    m = len(pts)
    if coeffs.is_flat_metric:
        z = np.zeros(m)
        return z, z, z, z
    a = coeffs.metric.value(pts)
    na = _matrix_opnorm(a - _EYE3)
    d1 = coeffs.metric.d1(pts)
    n1 = sum(_matrix_opnorm(d1[:, :, :, l]) for l in range(3))
    d2 = coeffs.metric.d2(pts)
    n2 = sum(
        _matrix_opnorm(d2[:, :, :, l, mm]) for l in range(3) for mm in range(l, 3)
    )
    d3 = coeffs.metric.d3(pts)
    n3 = sum(
        _matrix_opnorm(d3[:, :, :, l, mm, q])
        for l in range(3)
        for mm in range(l, 3)
        for q in range(mm, 3)
    )
    return na, n1, n2, n3


@dataclass
class AssumptionReport:
    kappa_metric: float
    kappa_dyadic: float
    kappa_b: float
    K_b: float
    kappa_c: float
    kappa_c_neg: float
    kappa_c_radial: float
    kappa_c_grad: float
    K_c: float
    Z: float
    gamma1: float
    gamma2: float
    gamma5: float
    Gamma3: float
    Gamma4: float
    beta1: float
    beta2: float
    beta3: float
    starshaped: bool
    worst_boundary_sample: Optional[np.ndarray]
    shell_range: tuple
    tail_estimate: float
    excluded_samples: int
    unbounded: list = field(default_factory=list)

    def entries(self):
        keys = [
            "kappa_metric", "kappa_dyadic", "kappa_b", "K_b", "kappa_c",
            "kappa_c_neg", "kappa_c_radial", "kappa_c_grad", "K_c", "Z",
            "gamma1", "gamma2", "gamma5", "Gamma3", "Gamma4",
            "beta1", "beta2", "beta3",
        ]
        return {k: getattr(self, k) for k in keys}

    @property
    def all_finite(self):
        return not self.unbounded


def _shell_of(r):
    return np.floor(np.log2(r)).astype(int)


def _shell_sup(values, shells, jmin, jmax):
    """Per-shell sup of values over samples, ordered j = jmin..jmax."""
    sups = np.zeros(jmax - jmin + 1)
    for i, j in enumerate(range(jmin, jmax + 1)):
        mask = shells == j
        if np.any(mask):
            sups[i] = np.max(values[mask])
    return sups


def _shell_bin_l1_sup(values, shells, r, h, jmin, jmax):
    """l1(shell) of L1(radial) of sup(angular): radial bins of width h."""
    total = 0.0
    bins = np.floor(r / h).astype(int)
    for j in range(jmin, jmax + 1):
        mask = shells == j
        if not np.any(mask):
            continue
        bsel = bins[mask]
        vsel = values[mask]
        s = 0.0
        for b in np.unique(bsel):
            s += np.max(vsel[bsel == b]) * h
        total += s
    return total


def _shell_bin_lp_sup(values, shells, r, h, jmin, jmax, q):
    """l1(shell) of Lq(radial) of sup(angular)."""
    total = 0.0
    bins = np.floor(r / h).astype(int)
    for j in range(jmin, jmax + 1):
        mask = shells == j
        if not np.any(mask):
            continue
        bsel = bins[mask]
        vsel = values[mask]
        acc = 0.0
        for b in np.unique(bsel):
            acc += np.max(vsel[bsel == b]) ** q * h
        total += acc ** (1.0 / q)
    return total


def assumption_report(coeffs, grid, delta=None, starshaped_result=None):
    """Evaluate the admissibility functionals on the grid sample set.

    Sups are taken per dyadic shell over interior nodes outside the singular
    tube; l1-type quantities are truncated to the shells the grid covers, with
    a geometric tail estimate from the entries' decay exponents."""
    if delta is None:
        delta = coeffs.delta
    pts = grid.interior_points()
    r = _radius(pts)
    keep = r >= grid.h / 2
    if coeffs.magnetic.singular_axis:
        keep &= np.hypot(pts[:, 0], pts[:, 1]) >= grid.h / 2
    excluded = int(np.sum(~keep))
    pts, r = pts[keep], r[keep]
    shells = _shell_of(r)
    jmin, jmax = grid.resolved_shells()
    h = grid.h

    unbounded = []

    def _finite(name, arr):
        if not np.all(np.isfinite(arr)):
            bad = int(np.argmax(~np.isfinite(arr)))
            unbounded.append((name, pts[bad]))
            arr = np.where(np.isfinite(arr), arr, 0.0)
        return arr

    na, n1, n2, n3 = (_finite("C_a", v) for v in _deriv_norms(coeffs, pts))
    Ca = na + r * n1 + r**2 * n2 + r**3 * n3
    kappa_metric = float(np.max(Ca)) if len(Ca) else 0.0
    shell_vals = _shell_sup(na + r * n1, shells, jmin, jmax)
    kappa_dyadic = float(np.sum(shell_vals))

    # tail estimate for the l1 sums from the slowest decay among the entries
    decay = min(coeffs.metric.decay, coeffs.electric.decay)
    if np.isfinite(decay) and decay > 0 and shell_vals[-1] > 0:
        tail = shell_vals[-1] * 2.0 ** (-decay) / (1 - 2.0 ** (-decay))
    else:
        tail = 0.0

    # magnetic functionals (library entries are short range: b_L = 0)
    if coeffs.magnetic.is_zero:
        kappa_b = 0.0
        K_b = 0.0
        beta1 = beta2 = beta3 = 0.0
    else:
        dbh = tangential_field_vec(coeffs, pts)
        ndbh = _finite("dbhat", np.linalg.norm(dbh, axis=1))
        kappa_b = float(np.max(r**2 * ndbh))
        K_b = 0.0
        beta1 = _shell_bin_lp_sup(r**1.5 * ndbh, shells, r, h, jmin, jmax, 2)
        beta2 = 0.0
        beta3 = 0.0

    # electric functionals on the fixed splitting c = chi c + (1 - chi) c
    cS = _finite("c_S", coeffs.electric.short(r))
    cL = _finite("c_L", coeffs.electric.long(r))
    cS1 = _finite("c_S'", coeffs.electric.short_d1(r))
    # d_r(r c_S) = c_S + r c_S'
    drc = cS + r * cS1
    kappa_c = float(np.max(r**2 * np.abs(cS))) if len(r) else 0.0
    kappa_c_neg = float(np.max(r**2 * np.maximum(-cS, 0.0))) if len(r) else 0.0
    kappa_c_radial = float(np.max(r**2 * np.maximum(drc, 0.0))) if len(r) else 0.0
    kappa_c_grad = float(np.max(r**3 * np.abs(cS1))) if len(r) else 0.0
    bracket = np.sqrt(1 + r**2) ** delta * np.abs(cL)
    K_c = float(np.max(bracket)) if len(r) else 0.0

    # long-range functionals of the large-frequency assumption; the library
    # maps its whole long-range electric part onto the c_IV slot
    Z = float(np.sum(_shell_sup(np.abs(cL) * r / np.sqrt(1 + r**2), shells, jmin, jmax)))

    # gamma / Gamma functionals (n = 3 forms), with c1 = c_S, c4 = c_L
    g1_density = r * (np.maximum(drc, 0.0) + np.maximum(-cS, 0.0)
                      + na * (r * np.abs(cS1) + np.abs(cS)))
    gamma1 = _shell_bin_l1_sup(g1_density, shells, r, h, jmin, jmax)
    gamma2 = 0.0
    gamma5 = 0.0
    Gamma3 = 0.0
    Gamma4 = float(np.sum(_shell_sup(np.maximum(-cL, 0.0), shells, jmin, jmax))
                   + np.sum(_shell_sup(np.abs(cL), shells, jmin, jmax)) ** 2)

    if starshaped_result is None:
        star, worst = True, None
    else:
        star, worst = starshaped_result

    return AssumptionReport(
        kappa_metric=kappa_metric,
        kappa_dyadic=kappa_dyadic,
        kappa_b=kappa_b,
        K_b=K_b,
        kappa_c=kappa_c,
        kappa_c_neg=kappa_c_neg,
        kappa_c_radial=kappa_c_radial,
        kappa_c_grad=kappa_c_grad,
        K_c=K_c,
        Z=Z,
        gamma1=gamma1,
        gamma2=gamma2,
        gamma5=gamma5,
        Gamma3=Gamma3,
        Gamma4=Gamma4,
        beta1=beta1,
        beta2=beta2,
        beta3=beta3,
        starshaped=star,
        worst_boundary_sample=worst,
        shell_range=(jmin, jmax),
        tail_estimate=float(tail),
        excluded_samples=excluded,
        unbounded=unbounded,
    )


# ---------------------------------------------------------------------------
# library front end
# ---------------------------------------------------------------------------

_METRICS = {
    "flat": (flat_metric, 0),
    "metric_longrange": (metric_longrange, 2),
    "metric_radial": (metric_radial, 2),
}
_ELECTRICS = {
    "none": (RadialElectric.zero, 0),
    "coulomb": (coulomb, 2),
    "inverse_square": (inverse_square, 1),
    "gaussian_well": (gaussian_well, 2),
    "lorentzian_well": (lorentzian_well, 2),
}
_MAGNETICS = {
    "none": (Magnetic.zero, 0),
    "aharonov_bohm": (aharonov_bohm, 1),
    "ab_sphere": (ab_sphere, 1),
}


def parse_entry(spec, kind):
    """Parse a library entry string like 'coulomb(1,1)' into an entry object."""
    table = {"metric": _METRICS, "electric": _ELECTRICS, "magnetic": _MAGNETICS}[kind]
    spec = spec.strip()
    if "(" in spec:
        name, rest = spec.split("(", 1)
        if not rest.endswith(")"):
            raise ValueError(f"malformed {kind} entry: {spec!r}")
        args = [float(s) for s in rest[:-1].split(",")] if rest[:-1].strip() else []
    else:
        name, args = spec, []
    name = name.strip()
    if name not in table:
        raise ValueError(f"unknown {kind} entry: {name!r}")
    factory, n_args = table[name]
    if len(args) != n_args:
        raise ValueError(f"{kind} entry {name!r} takes {n_args} parameters, got {len(args)}")
    return factory(*args)


def make_coefficients(metric="flat", magnetic="none", electric="none", delta=0.5, dim=3):
    """Build a CoefficientSet from library entry strings."""
    met = parse_entry(metric, "metric") if isinstance(metric, str) else metric
    mag = parse_entry(magnetic, "magnetic") if isinstance(magnetic, str) else magnetic
    ele = parse_entry(electric, "electric") if isinstance(electric, str) else electric
    # ellipticity bounds sampled on a coarse radial sweep
    rr = np.geomspace(1e-2, 1e3, 200)
    pts = np.zeros((200, 3))
    pts[:, 0] = rr / math.sqrt(3)
    pts[:, 1] = rr / math.sqrt(3)
    pts[:, 2] = rr / math.sqrt(3)
    if met.is_flat:
        nu, N = 1.0, 1.0
    else:
        w = np.linalg.eigvalsh(met.value(pts))
        nu, N = float(np.min(w)), float(np.max(w))
        if nu <= 0:
            raise ValueError(f"metric entry {met.name} is not uniformly elliptic")
    return CoefficientSet(dim=dim, metric=met, magnetic=mag, electric=ele,
                          nu=nu, N=N, delta=delta)
