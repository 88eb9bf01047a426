"""Pure-numpy fallback for the 7-point complex stencil kernel.

The operator is stored as a diagonal field plus one complex coupling array
per axis; the coupling w sits on the face between node i and node i+1 along
that axis, with the reverse coupling being its conjugate (Hermitian stencil
structure, broken only by the diagonal).  Accumulation order matches the
compiled kernel: diagonal, then +x, -x, +y, -y, +z, -z neighbours.
"""

import numpy as np


def apply_stencil(diag, wx, wy, wz, v, out=None):
    if out is None:
        out = np.empty_like(v)
    np.multiply(diag, v, out=out)
    # x axis: face f couples nodes f and f+1
    out[:-1, :, :] += wx * v[1:, :, :]
    out[1:, :, :] += np.conj(wx) * v[:-1, :, :]
    out[:, :-1, :] += wy * v[:, 1:, :]
    out[:, 1:, :] += np.conj(wy) * v[:, :-1, :]
    out[:, :, :-1] += wz * v[:, :, 1:]
    out[:, :, 1:] += np.conj(wz) * v[:, :, :-1]
    return out
