"""Pure numpy versions of the stepping kernels (reference and fallback)."""
import numpy as np

NAME = "numpy"


def leapfrog1d(u_prev, u, src, out, lam2, dt2):
    """Interior update out[1:-1] of the 1D leapfrog with a 3-point Laplacian."""
    out[1:-1] = (2.0 * u[1:-1] - u_prev[1:-1]
                 + lam2 * (u[2:] - 2.0 * u[1:-1] + u[:-2]) + dt2 * src[1:-1])
    return out


def leapfrog3d(u_prev, u, src, out, lam2, dt2, periodic):
    """7-point leapfrog; interior only unless ``periodic``."""
    if periodic:
        lap = -6.0 * u
        for ax in range(3):
            lap += np.roll(u, 1, axis=ax)
            lap += np.roll(u, -1, axis=ax)
        np.multiply(lap, lam2, out=lap)
        lap += 2.0 * u
        lap -= u_prev
        if src is not None:
            lap += dt2 * src
        out[...] = lap
        return out
    c = (slice(1, -1),) * 3
    uc = u[c]
    lap = (u[2:, 1:-1, 1:-1] + u[:-2, 1:-1, 1:-1]
           + u[1:-1, 2:, 1:-1] + u[1:-1, :-2, 1:-1]
           + u[1:-1, 1:-1, 2:] + u[1:-1, 1:-1, :-2] - 6.0 * uc)
    lap *= lam2
    lap += 2.0 * uc
    lap -= u_prev[c]
    if src is not None:
        lap += dt2 * src[c]
    out[c] = lap
    return out
