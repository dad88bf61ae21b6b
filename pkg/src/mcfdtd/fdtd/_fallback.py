"""Pure numpy implementation of the stencil kernel.

Kept operation-for-operation identical to ``_kernels.pyx`` so both backends
produce bit-identical fields.
"""
import numpy as np

from ..multicomplex import sign_table


def apply_term(tgt, t0, src, s0, axis, sign, coef):
    """Accumulate ``sign * coef * (src[p + e_axis] - src[p])`` into ``tgt``.

    ``t0``/``s0`` are the 3-D origins of the update box in target and source
    index space; the box shape is ``coef.shape``.
    """
    ni, nj, nk = coef.shape
    nc = tgt.shape[3]
    tb = (slice(t0[0], t0[0] + ni), slice(t0[1], t0[1] + nj), slice(t0[2], t0[2] + nk))
    sm = [slice(s0[0], s0[0] + ni), slice(s0[1], s0[1] + nj), slice(s0[2], s0[2] + nk)]
    sp = list(sm)
    sp[axis] = slice(sm[axis].start + 1, sm[axis].stop + 1)
    d = src[tuple(sp)] - src[tuple(sm)]
    prod = coef.re[..., None] * d
    npert = coef.npert
    if npert:
        sgn = sign_table(nc)
        pval = coef.pval
        if coef.dense:
            dd = d.reshape(-1, nc)
            pp = prod.reshape(-1, nc)
        else:
            dd = d[coef.pidx]
            pp = prod[coef.pidx]
        for s in range(1, nc):
            cs = pval[:, s]
            for t in range(nc):
                pp[:, s ^ t] += (sgn[s, t] * cs) * dd[:, t]
        if not coef.dense:
            prod[coef.pidx] = pp
    tgt[tb] += sign * prod

