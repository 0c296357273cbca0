"""Vectorized adaptive Gauss-Kronrod (7/15) integration.

``scipy.integrate.quad`` evaluates its integrand one point at a time, which is
too slow for the nested integrals of the tail operator.  This routine evaluates
every node of every active interval in one array call.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
# Gauss nodes are the odd-indexed Kronrod nodes (1, 3, 5 and the centre).
GAUSS_WEIGHTS = np.zeros(15)
GAUSS_WEIGHTS[[1, 3, 5]] = _WG[:3]
GAUSS_WEIGHTS[[13, 11, 9]] = _WG[:3]
GAUSS_WEIGHTS[7] = _WG[3]


class QuadratureError(RuntimeError):
    pass


def integrate(
    func: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    rtol: float = 1e-11,
    atol: float = 0.0,
    points: Sequence[float] = (),
    max_rounds: int = 60,
    max_intervals: int = 20000,
) -> tuple[float, float]:
    """Integrate a vectorized ``func`` over ``[a, b]``; returns (value, error estimate).

    ``points`` are interior locations of kinks or jumps used as initial cuts.
    """
    if b <= a:
        return 0.0, 0.0
    cuts = sorted({a, b, *[float(p) for p in points if a < p < b]})
    lo = np.array(cuts[:-1])
    hi = np.array(cuts[1:])
    done_value = 0.0
    done_error = 0.0
    for _ in range(max_rounds):
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        x = mid[:, None] + half[:, None] * NODES[None, :]
        fx = np.asarray(func(x.ravel()), dtype=float).reshape(x.shape)
        if not np.all(np.isfinite(fx)):
            raise QuadratureError("integrand is not finite on the integration range")
        kron = half * (fx @ KRONROD_WEIGHTS)
        gauss = half * (fx @ GAUSS_WEIGHTS)
        err = np.abs(kron - gauss)
        total = done_value + kron.sum()
        budget = max(atol, rtol * abs(total))
        if done_error + err.sum() <= budget:
            return float(total), float(done_error + err.sum())
        # Intervals already below their share of the budget are frozen.
        share = budget * (hi - lo) / (b - a)
        keep = err > share
        done_value += kron[~keep].sum()
        done_error += err[~keep].sum()
        lo, hi, mid = lo[keep], hi[keep], mid[keep]
        if 2 * lo.size > max_intervals:
            break
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
    value = done_value + float(np.sum(kron[keep])) if lo.size else done_value
    raise QuadratureError(f"adaptive quadrature did not converge (value ~ {value:.6g})")


def integrate_many(
    func: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    rtol: float = 1e-11,
    atol: "float | np.ndarray" = 1e-300,
    max_rounds: int = 60,
    max_intervals: int = 20000,
) -> np.ndarray:
    """Integrate several functions on a shared adaptive mesh.

    ``func`` maps a 1-D array of nodes to an array of shape (nodes, m).  Each
    component must meet its own relative tolerance.
    """
    if b <= a:
        probe = np.asarray(func(np.array([a])), dtype=float)
        return np.zeros(probe.shape[1])
    lo, hi = np.array([a]), np.array([b])
    done = None
    for _ in range(max_rounds):
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        x = mid[:, None] + half[:, None] * NODES[None, :]
        fx = np.asarray(func(x.ravel()), dtype=float)
        fx = fx.reshape(x.shape + (fx.shape[-1],))
        if not np.all(np.isfinite(fx)):
            raise QuadratureError("integrand is not finite on the integration range")
        kron = half[:, None] * np.einsum("inm,n->im", fx, KRONROD_WEIGHTS)
        gauss = half[:, None] * np.einsum("inm,n->im", fx, GAUSS_WEIGHTS)
        err = np.abs(kron - gauss)
        if done is None:
            done = np.zeros(kron.shape[1])
            done_err = np.zeros(kron.shape[1])
        total = done + kron.sum(axis=0)
        budget = np.maximum(atol, rtol * np.abs(total))
        if np.all(done_err + err.sum(axis=0) <= budget):
            return total
        share = budget[None, :] * ((hi - lo) / (b - a))[:, None]
        keep = np.any(err > share, axis=1)
        done = done + kron[~keep].sum(axis=0)
        done_err = done_err + err[~keep].sum(axis=0)
        lo, hi, mid = lo[keep], hi[keep], mid[keep]
        if 2 * lo.size > max_intervals:
            break
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
    raise QuadratureError("adaptive quadrature did not converge")
