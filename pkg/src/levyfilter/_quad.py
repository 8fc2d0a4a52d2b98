"""Quadrature helpers shared by the measure, copula and symbol modules.

Integrands here typically have a power singularity at zero and an
exponential tail, so everything splits at 1 and leans on QUADPACK's
adaptive Gauss-Kronrod (scipy.integrate.quad) with tight tolerances.
Oscillatory Fourier-type integrals go through QUADPACK's QAWO weights.
"""

from __future__ import annotations

import warnings
import math
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import NumericalError

QUAD_TOL = 1e-10

# Fixed-order Gauss-Legendre rule used for per-cell table refinement.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def quad_split(
    f: Callable[[float], float],
    a: float,
    b: float,
    rtol: float = QUAD_TOL,
    atol: float = QUAD_TOL,
) -> float:
    """Adaptive quadrature of ``f`` over (a, b), splitting at 1.

    Suitable for integrands with an algebraic singularity at a small
    left endpoint and exponential decay at infinity.
    """
    pieces = []
    if a < 1.0 < b:
        pieces = [(a, 1.0), (1.0, b)]
    else:
        pieces = [(a, b)]
    total = 0.0
    for lo, hi in pieces:
        if np.isfinite(hi) and lo > 0 and hi / lo > 50.0:
            # power singularities at small lo: integrate in log space,
            # where z^p turns into a smooth exponential
            g = lambda y: f(math.exp(y)) * math.exp(y)
            lo_t, hi_t = math.log(lo), math.log(hi)
        else:
            g, lo_t, hi_t = f, lo, hi
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, err = integrate.quad(g, lo_t, hi_t, epsabs=atol, epsrel=rtol, limit=300)
        if not np.isfinite(val) or err > 1e-6 * max(abs(val), 1.0):
            raise NumericalError(
                f"quadrature did not converge on ({lo:.3g}, {hi:.3g}): "
                f"value {val:.6g}, error estimate {err:.2g}"
            )
        total += val
    return total


def gl_cells(f: Callable[[np.ndarray], np.ndarray], edges: np.ndarray) -> np.ndarray:
    """Per-cell Gauss-Legendre integrals of ``f`` between consecutive edges.

    ``edges`` has shape (m+1,); returns shape (m,). ``f`` must be
    vectorized.
    """
    lo = edges[:-1]
    hi = edges[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    # nodes: (m, 16)
    pts = mid[:, None] + half[:, None] * _GL_X[None, :]
    vals = f(pts.ravel()).reshape(pts.shape)
    return half * (vals @ _GL_W)


def gl_partial(
    f: Callable[[np.ndarray], np.ndarray], lo: np.ndarray, hi: np.ndarray
) -> np.ndarray:
    """Vectorized Gauss-Legendre integral of ``f`` over many (lo, hi) pairs."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    pts = mid[..., None] + half[..., None] * _GL_X
    vals = f(pts.ravel()).reshape(pts.shape)
    return half * (vals @ _GL_W)


def fourier_linear_interp(z: np.ndarray, s: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """int e^{i xi z} s(z) dz, exact for the piecewise-linear interpolant.

    Filon-type weights make the quadrature error pure interpolation error,
    uniform in xi.  ``z`` is an increasing grid, ``s`` real samples, ``xi``
    a 1-d frequency array; returns a complex array over xi.
    """
    z = np.asarray(z, dtype=float)
    s = np.asarray(s, dtype=float)
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    d = np.diff(z)
    sa = s[:-1]
    sb = s[1:]
    out = np.empty(len(xi), dtype=complex)
    chunk = 32
    for k0 in range(0, len(xi), chunk):
        w = 1j * xi[k0 : k0 + chunk, None] * d[None, :]
        small = np.abs(w) < 1e-4
        ws = np.where(small, 1.0, w)  # placeholder to avoid 0/0
        ew = np.exp(ws)
        a_w = np.where(small, 0.5 + w / 6.0 + w * w / 24.0, (ew - 1.0 - ws) / (ws * ws))
        b_w = np.where(
            small, 0.5 + w / 3.0 + w * w / 8.0, (ws * ew - ew + 1.0) / (ws * ws)
        )
        phase = np.exp(1j * xi[k0 : k0 + chunk, None] * z[None, :-1])
        cell = phase * d[None, :] * (sa[None, :] * a_w + sb[None, :] * b_w)
        out[k0 : k0 + chunk] = cell.sum(axis=1)
    return out


def fourier_cos(f: Callable[[float], float], a: float, b: float, xi: float) -> float:
    """Integral of f(z) * cos(xi * z) over (a, b) via QAWO."""
    if xi == 0.0:
        return quad_split(f, a, b)
    val, err = integrate.quad(
        f, a, b, weight="cos", wvar=xi, epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=400
    )
    return val


def fourier_sin(f: Callable[[float], float], a: float, b: float, xi: float) -> float:
    """Integral of f(z) * sin(xi * z) over (a, b) via QAWO."""
    if xi == 0.0:
        return 0.0
    val, err = integrate.quad(
        f, a, b, weight="sin", wvar=xi, epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=400
    )
    return val
