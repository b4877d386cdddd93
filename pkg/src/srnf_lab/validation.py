"""Input checks shared by the estimators and the command line."""
from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import GridMismatch, InvalidParam
from .geom_core import SurfaceImmersion


def check_surfaces(X, reference=None):
    """A list of immersions, optionally required to share ``reference``'s layout."""
    if isinstance(X, SurfaceImmersion):
        X = [X]
    X = list(X)
    if not X:
        raise InvalidParam("need at least one surface")
    for f in X:
        if not isinstance(f, SurfaceImmersion):
            raise InvalidParam(f"expected SurfaceImmersion, got {type(f).__name__}")
    ref = X[0] if reference is None else reference
    for f in X:
        if not ref.same_layout(f):
            raise GridMismatch("surfaces do not share a parameter grid and metric")
    return X


def check_points_2d(X):
    """Finite float array of planar points, shape (P, 2)."""
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] != 2:
        raise InvalidParam(f"expected points of shape (P, 2), got {X.shape}")
    return X


def check_translations(translations, n):
    """n planar translations as an (n, 2) float array (empty list means all zero)."""
    if translations is None or len(translations) == 0:
        return np.zeros((n, 2))
    t = np.asarray(translations, dtype=float)
    if t.shape != (n, 2):
        raise InvalidParam(f"need {n} translation 2-vectors, got shape {t.shape}")
    if not np.all(np.isfinite(t)):
        raise InvalidParam("translations must be finite")
    return t


def check_positive(name, value):
    value = float(value)
    if not value > 0 or not np.isfinite(value):
        raise InvalidParam(f"{name} must be a positive finite number, got {value}")
    return value
