"""Discrete operator for (L + lambda + i eps) with Dirichlet obstacle nodes
and an absorbing (sponge) or Dirichlet outer truncation.

The principal part is assembled as -G^H A_f G with G the forward-difference
magnetic gradient (node -> face, b sampled at face midpoints, the phase folded
in linearly as i b (v_+ + v_-)/2), so the matrix is exactly Hermitian for
eps = 0 with the sponge off.  Off-diagonal metric entries add a
node-centered cross-term form on the same footing (Hermitian by symmetry of
the metric); that path is only taken for non-flat metrics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import kernels
from .geometry import CORE, INTERIOR, SPONGE

__all__ = ["DiscreteOperator", "assemble", "sponge_profile"]


def sponge_profile(grid, lam, sigma_max=None):
    """Cubic absorber ramp W >= 0 on the sponge layer, 0 elsewhere.

    The default amplitude scales with sqrt(lambda); it enters the diagonal as
    i * sign(eps) * W so that the branch selected by eps is the one the layer
    absorbs (and branch symmetry eps -> -eps conjugates the operator)."""
    if sigma_max is None:
        sigma_max = 2.0 * np.sqrt(max(lam, 1.0))
    X, Y, Z = grid.coords()
    linf = np.maximum(np.abs(X), np.maximum(np.abs(Y), np.abs(Z)))
    depth = (linf - (grid.rmax - grid.sponge_width)) / grid.sponge_width
    W = sigma_max * np.clip(depth, 0.0, 1.0) ** 3
    W[grid.pinned] = 0.0
    return W


def _face_points(grid, d):
    """Midpoints of the faces along axis d, as an (m, 3) array."""
    ax = grid.axis
    mid = 0.5 * (ax[:-1] + ax[1:])
    coords = [ax, ax, ax]
    coords[d] = mid
    X, Y, Z = np.meshgrid(*coords, indexing="ij")
    return np.stack([X, Y, Z], axis=-1).reshape(-1, 3), X.shape


@dataclass
class DiscreteOperator:
    grid: object
    coeffs: object
    lam: float
    eps: float
    truncation: str
    branch: int
    diag: np.ndarray
    wx: np.ndarray
    wy: np.ndarray
    wz: np.ndarray
    W: np.ndarray
    c_nodes: np.ndarray
    clamped: np.ndarray
    cross: Optional[sp.spmatrix] = None
    _csr: Optional[sp.csr_matrix] = field(default=None, repr=False)

    @property
    def h(self):
        return self.grid.h

    @property
    def is_hermitian(self):
        return self.eps == 0.0 and self.truncation == "dirichlet"

    @property
    def shape(self):
        return self.grid.shape

    def apply(self, v, out=None):
        if v.shape != self.shape:
            raise ValueError("field shape does not match the grid")
        out = kernels.apply_stencil(self.diag, self.wx, self.wy, self.wz, v, out)
        if self.cross is not None:
            out += (self.cross @ v.ravel()).reshape(self.shape)
        return out

    def diag_shift(self):
        """The zero-order diagonal c + lambda + i eps + i sgn W (zero at
        pinned nodes), i.e. everything except the principal part."""
        out = np.zeros(self.shape, dtype=complex)
        u = self.grid.unknown
        out[u] = (
            self.c_nodes[u]
            + self.lam
            + 1j * self.eps
            + 1j * self.branch * self.W[u]
        )
        return out

    def gradient_energy(self, v):
        """The discrete magnetic Dirichlet form  sum a(grad_b v, grad_b v) h^3
        realized exactly by this operator's stencil."""
        Lv = self.apply(v)
        D = self.diag_shift()
        val = np.vdot(v, D * v - Lv)
        return float(val.real) * self.h**3

    def as_csr(self):
        """The operator over unknown-packed indices as a CSR matrix."""
        if self._csr is not None:
            return self._csr
        grid = self.grid
        n = grid.n
        unknown = grid.unknown
        idx = -np.ones(grid.shape, dtype=np.int64)
        idx[unknown] = np.arange(int(unknown.sum()))
        rows, cols, vals = [], [], []

        ii = idx[unknown]
        rows.append(ii)
        cols.append(ii)
        vals.append(self.diag[unknown])

        for d, w in ((0, self.wx), (1, self.wy), (2, self.wz)):
            sl_lo = [slice(None)] * 3
            sl_hi = [slice(None)] * 3
            sl_lo[d] = slice(0, n - 1)
            sl_hi[d] = slice(1, n)
            lo = idx[tuple(sl_lo)].ravel()
            hi = idx[tuple(sl_hi)].ravel()
            wf = w.ravel()
            live = (lo >= 0) & (hi >= 0)
            rows.append(lo[live])
            cols.append(hi[live])
            vals.append(wf[live])
            rows.append(hi[live])
            cols.append(lo[live])
            vals.append(np.conj(wf[live]))

        m = int(unknown.sum())
        A = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(m, m),
        ).tocsr()
        if self.cross is not None:
            full = self.cross.tocsr()
            flat_idx = np.flatnonzero(unknown.ravel())
            A = A + full[flat_idx][:, flat_idx]
        self._csr = A
        return A

    def pack(self, v):
        return v[self.grid.unknown]

    def unpack(self, u):
        out = np.zeros(self.shape, dtype=complex)
        out[self.grid.unknown] = u
        return out


def _cross_terms(coeffs, grid, clamp_radius):
    """Node-centered Hermitian form for off-diagonal metric entries."""
    n = grid.n
    h = grid.h
    pts = grid.points()
    cpts, _ = coeffs.clamped_points(pts, clamp_radius)
    a = coeffs.metric.value(cpts)
    unknown = grid.unknown.ravel()

    eye = sp.identity(n, format="csr")
    shift = sp.diags([np.ones(n - 1), -np.ones(n - 1)], [1, -1], format="csr") / (2 * h)
    ops = [
        sp.kron(sp.kron(shift, eye), eye),
        sp.kron(sp.kron(eye, shift), eye),
        sp.kron(sp.kron(eye, eye), shift),
    ]
    if not coeffs.magnetic.is_zero:
        b = coeffs.magnetic.value(cpts)
        ops = [ops[d] + sp.diags(1j * b[:, d]) for d in range(3)]
    mask = sp.diags(unknown.astype(float))
    ops = [(mask @ op @ mask).tocsr() for op in ops]

    total = None
    for d in range(3):
        for dd in range(3):
            if d == dd:
                continue
            term = ops[d].getH() @ sp.diags(a[:, d, dd]) @ ops[dd]
            total = term if total is None else total + term
    return (-total).tocsr()


def assemble(coeffs, grid, lam, eps, truncation="sponge", sponge_sigma=None,
             clamp_radius=None, branch=None):
    """Assemble the discrete (L + lambda + i eps) with the chosen truncation."""
    if not np.isfinite(lam) or not np.isfinite(eps):
        raise ValueError("lambda and eps must be finite")
    if truncation not in ("sponge", "dirichlet"):
        raise ValueError(f"unknown truncation {truncation!r}")
    if clamp_radius is None:
        clamp_radius = grid.h / 2
    if branch is None:
        branch = 1 if eps >= 0 else -1

    n = grid.n
    h = grid.h
    unknown = grid.unknown

    diag = np.zeros(grid.shape, dtype=complex)
    faces = []
    for d in range(3):
        fpts, fshape = _face_points(grid, d)
        cpts, _ = coeffs.clamped_points(fpts, clamp_radius)
        if coeffs.is_flat_metric:
            alpha = np.ones(len(fpts))
        else:
            alpha = coeffs.metric.diag_entry(cpts, d)
        if coeffs.magnetic.is_zero:
            g2 = (1.0 / h) ** 2 + 0j
            w = alpha.reshape(fshape) * g2
            qsum = alpha.reshape(fshape) / h**2
        else:
            beta = coeffs.magnetic.value(cpts)[:, d]
            gplus = 1.0 / h + 0.5j * beta
            w = (alpha * gplus**2).reshape(fshape)
            qsum = (alpha * (1.0 / h**2 + 0.25 * beta**2)).reshape(fshape)

        # zero couplings touching a pinned node; keep their diagonal energy
        # only when the face has at least one unknown end
        sl_lo = [slice(None)] * 3
        sl_hi = [slice(None)] * 3
        sl_lo[d] = slice(0, n - 1)
        sl_hi[d] = slice(1, n)
        lo_un = unknown[tuple(sl_lo)]
        hi_un = unknown[tuple(sl_hi)]
        w = np.where(lo_un & hi_un, w, 0.0)
        diag[tuple(sl_lo)] -= np.where(lo_un, qsum, 0.0)
        diag[tuple(sl_hi)] -= np.where(hi_un, qsum, 0.0)
        faces.append(np.ascontiguousarray(w))

    if np.any(~np.isfinite(diag)):
        raise FloatingPointError("non-finite entry during assembly")

    pts = grid.points()
    cpts, clamped = coeffs.clamped_points(pts, clamp_radius)
    c_nodes = coeffs.electric.value(cpts).reshape(grid.shape)
    clamped = clamped.reshape(grid.shape)

    if truncation == "sponge":
        W = sponge_profile(grid, lam, sponge_sigma)
    else:
        W = np.zeros(grid.shape)

    diag[unknown] += (
        c_nodes[unknown] + lam + 1j * eps + 1j * branch * W[unknown]
    )
    diag[~unknown] = 0.0

    cross = None
    if not coeffs.is_flat_metric:
        cross = _cross_terms(coeffs, grid, clamp_radius)

    if np.any(~np.isfinite(diag)):
        raise FloatingPointError("non-finite entry during assembly")

    return DiscreteOperator(
        grid=grid,
        coeffs=coeffs,
        lam=lam,
        eps=eps,
        truncation=truncation,
        branch=branch,
        diag=diag,
        wx=faces[0],
        wy=faces[1],
        wz=faces[2],
        W=W,
        c_nodes=c_nodes,
        clamped=clamped,
        cross=cross,
    )
