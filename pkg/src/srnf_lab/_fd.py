"""Finite-difference derivatives on uniform tensor grids.

Interior samples use centred stencils, boundary samples one-sided stencils
of the same formal order, periodic axes wrap around (the last sample is a
duplicate of the first).
"""
from functools import lru_cache
from math import factorial

import numpy as np

from .exceptions import InvalidParam


@lru_cache(maxsize=None)
def stencil(offsets, deriv):
    """Weights ``w`` with ``sum(w * f(x + k h)) ~ h**deriv * f^(deriv)(x)``."""
    offsets = np.asarray(offsets, dtype=float)
    n = len(offsets)
    vander = np.array([offsets**k / factorial(k) for k in range(n)])
    rhs = np.zeros(n)
    rhs[deriv] = 1.0
    return tuple(np.linalg.solve(vander, rhs))


def _central(order):
    half = order // 2
    return tuple(range(-half, half + 1))


def diff(values, axis, h, deriv=1, order=2, periodic=False):
    """Derivative of ``values`` along ``axis`` with grid spacing ``h``.

    Parameters
    ----------
    values : ndarray
        Sampled function; any trailing component axes are carried along.
    axis : int
        Axis to differentiate along.
    h : float
        Uniform spacing.
    deriv : {1, 2}
        Derivative order.
    order : {2, 4}
        Formal accuracy order.
    periodic : bool
        Treat the axis as periodic with a duplicated end sample.
    """
    if order not in (2, 4):
        raise InvalidParam("order must be 2 or 4")
    a = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    n = a.shape[0]
    out = np.empty_like(a)
    centre = _central(order)
    half = order // 2
    w_c = stencil(centre, deriv)
    if periodic:
        m = n - 1
        core = a[:m]
        acc = np.zeros_like(core)
        for k, w in zip(centre, w_c):
            acc += w * np.roll(core, -k, axis=0)
        out[:m] = acc
        out[m] = acc[0]
        return np.moveaxis(out / h**deriv, 0, axis)

    # one extra point at order 4 keeps the boundary error constant small
    width = order + deriv + (1 if order == 4 else 0)
    if n < width:
        raise InvalidParam(f"need at least {width} samples for order {order}")
    acc = np.zeros_like(a[half:n - half])
    for k, w in zip(centre, w_c):
        acc += w * a[half + k:n - half + k]
    out[half:n - half] = acc
    for i in range(half):
        offs = tuple(range(-i, -i + width))
        w_l = stencil(offs, deriv)
        out[i] = sum(w * a[i + k] for k, w in zip(offs, w_l))
        j = n - 1 - i
        offs_r = tuple(-k for k in offs)
        w_r = stencil(offs_r, deriv)
        out[j] = sum(w * a[j + k] for k, w in zip(offs_r, w_r))
    return np.moveaxis(out / h**deriv, 0, axis)
