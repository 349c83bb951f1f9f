"""Pure numpy implementation of the allocation kernel.

Works for any :class:`~aoimech.aoi_cost.AoiCostModel`; the compiled module
only covers the power cost but must agree with this one to rounding.
"""
import numpy as np

M_TOL = 1e-12


def waterfill(phi, fmax, aoi, tol=M_TOL):
    """Optimal aggregate rate and cheapest-first split for each row of ``phi``.

    Parameters
    ----------
    phi : (n, I) array
        (Ironed) virtual costs of the reported profile, one row per profile.
    fmax : (I,) array
        Per-source rate caps; ``inf`` allowed.
    aoi : AoiCostModel

    Returns
    -------
    f : (n, I) array of per-source rates
    fagg : (n,) aggregate rate
    marginal : (n,) int array, index of the source whose segment holds an
        interior solution, or -1 when the solution sits on a breakpoint.
    """
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    fmax = np.asarray(fmax, dtype=float)
    n, I = phi.shape
    order = np.argsort(phi, axis=1, kind="stable")
    ps = np.take_along_axis(phi, order, axis=1)
    caps = fmax[order]
    B = np.concatenate([np.zeros((n, 1)), np.cumsum(caps, axis=1)], axis=1)

    F = np.zeros(n)
    marginal = np.full(n, -1, dtype=np.int64)
    done = np.zeros(n, dtype=bool)
    for k in range(I):
        hb = aoi.reduction_at_rate(B[:, k + 1])
        interior = ~done & (ps[:, k] > hb + tol)
        if interior.any():
            cand = aoi.rate_for_virtual_cost(ps[interior, k])
            F[interior] = np.clip(cand, B[interior, k], B[interior, k + 1])
            marginal[interior] = order[interior, k]
            done |= interior
        nxt = ps[:, k + 1] if k + 1 < I else np.full(n, np.inf)
        at_bp = ~done & (hb <= nxt + tol)
        F[at_bp] = B[at_bp, k + 1]
        done |= at_bp
    fs = np.clip(F[:, None] - B[:, :-1], 0.0, caps)
    f = np.empty_like(fs)
    np.put_along_axis(f, order, fs, axis=1)
    return f, F, marginal
