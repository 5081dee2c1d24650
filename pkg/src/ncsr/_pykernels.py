"""Pure numpy versions of the hot numeric kernels.

Piecewise polynomials are passed as ``breaks`` (length k, piece i covers
[breaks[i], breaks[i+1]) and the first/last pieces extend to -inf/+inf)
and ``coefs`` (k x (deg+1), ascending powers of the absolute variable).
"""
import numpy as np

N_BISECT = 96


def ppoly_eval(x, breaks, coefs):
    x = np.asarray(x, dtype=float)
    idx = np.searchsorted(breaks, x, side="right") - 1
    idx = np.clip(idx, 0, len(breaks) - 1)
    c = coefs[idx]
    out = np.zeros_like(x)
    for j in range(coefs.shape[1] - 1, -1, -1):
        out = out * x + c[..., j]
    return out


def omega(x, z0, breaks, coefs):
    """Left endpoint of the width-|x| level interval (reflected for x < 0)."""
    x = np.asarray(x, dtype=float)
    w = np.abs(x)
    lo = z0 - w
    hi = np.full_like(w, z0)
    for _ in range(N_BISECT):
        mid = 0.5 * (lo + hi)
        h = ppoly_eval(mid, breaks, coefs) - ppoly_eval(mid + w, breaks, coefs)
        pos = h > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    a = 0.5 * (lo + hi)
    a = np.where(w == 0, z0, a)
    # for negative x the relation tau(w)+tau(w+x)=0 gives w = a + |x|
    return np.where(x < 0, a + w, a)


def tauinv(v, z0, D, breaks, coefs):
    """Solve rho(x) = D + v^2 with x left of z0 for v > 0, right for v < 0."""
    v = np.asarray(v, dtype=float)
    y = D + v * v
    side = np.where(v > 0, -1.0, 1.0)
    step = np.ones_like(v)
    for _ in range(200):
        far = ppoly_eval(z0 + side * step, breaks, coefs)
        need = far < y
        if not need.any():
            break
        step = np.where(need, 2.0 * step, step)
    a = np.full_like(v, z0)
    b = z0 + side * step
    for _ in range(N_BISECT):
        mid = 0.5 * (a + b)
        below = ppoly_eval(mid, breaks, coefs) < y
        a = np.where(below, mid, a)
        b = np.where(below, b, mid)
    out = 0.5 * (a + b)
    return np.where(v == 0, z0, out)
