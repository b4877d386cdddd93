"""Infinitely flat cutoff functions used by the generators and the tube flows."""
import numpy as np


def _psi(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def _dpsi(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    xp = x[pos]
    out[pos] = np.exp(-1.0 / xp) / xp**2
    return out


def _d2psi(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    xp = x[pos]
    out[pos] = np.exp(-1.0 / xp) * (1.0 - 2.0 * xp) / xp**4
    return out


def smoothstep(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1, all derivatives flat at both ends."""
    x = np.asarray(x, dtype=float)
    a, b = _psi(x), _psi(1.0 - x)
    return a / (a + b)


def smoothstep_deriv(x):
    x = np.asarray(x, dtype=float)
    a, b = _psi(x), _psi(1.0 - x)
    da, db = _dpsi(x), -_dpsi(1.0 - x)
    return (da * b - a * db) / (a + b) ** 2


def smoothstep_deriv2(x):
    x = np.asarray(x, dtype=float)
    a, b = _psi(x), _psi(1.0 - x)
    da, db = _dpsi(x), -_dpsi(1.0 - x)
    d2a, d2b = _d2psi(x), _d2psi(1.0 - x)
    s = a + b
    num = da * b - a * db
    return (d2a * b - a * d2b) / s**2 - 2 * num * (da + db) / s**3


def smoothstep_jet(x, order=2):
    """S, S' and (for order 2) S'' in one pass; only 0 < x < 1 is evaluated."""
    x = np.asarray(x, dtype=float)
    val = (x >= 1.0).astype(float)
    d1 = np.zeros_like(x)
    d2 = np.zeros_like(x) if order >= 2 else None
    mid = (x > 0.0) & (x < 1.0)
    if np.any(mid):
        t = x[mid]
        s_ = 1.0 - t
        a, b = np.exp(-1.0 / t), np.exp(-1.0 / s_)
        da, db = a / t**2, -b / s_**2
        tot = a + b
        num = da * b - a * db
        val[mid] = a / tot
        d1[mid] = num / tot**2
        if order >= 2:
            d2a, d2b = a * (1.0 - 2.0 * t) / t**4, b * (1.0 - 2.0 * s_) / s_**4
            d2[mid] = (d2a * b - a * d2b) / tot**2 - 2 * num * (da + db) / tot**3
    return val, d1, d2


def bump(s):
    """exp(-1/(1 - s^2)) inside |s| < 1, zero outside."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


def bump_profile(rho, radius, height):
    """Cap height c * exp(-1/(1 - (rho/R)^2)) for rho < R, flat zero beyond.

    ``height`` is the peak value at rho = 0, i.e. c / e.
    """
    return height * np.e * bump(np.asarray(rho, dtype=float) / radius)
