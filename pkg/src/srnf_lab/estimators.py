"""scikit-learn style wrappers.

:class:`SRNFTransformer` embeds surfaces sharing one parameter grid as
vectors whose Euclidean distances are SRNF distances, so the usual
pairwise tools (``sklearn.metrics.pairwise_distances``, clustering,
MDS) apply directly.  :class:`FlatPlaceRearrangement` fits the
area-preserving rearrangement of a flat place and transforms planar
points by it.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .flat_place import FlatPlace
from .geom_core import DEFAULT_ORDER, srnf
from .moser import HoledDiscDomain, flat_place_diffeo
from .validation import check_points_2d, check_positive, check_surfaces, check_translations


class SRNFTransformer(TransformerMixin, BaseEstimator):
    """Square root normal fields as quadrature-weighted feature vectors.

    Parameters
    ----------
    fd_order : {2, 4}
        Finite-difference order used for the tangents.

    Attributes
    ----------
    reference_ : SurfaceImmersion
        First fitted surface; later inputs must share its layout.
    n_features_out_ : int
        Three entries per sample.
    """

    def __init__(self, fd_order=DEFAULT_ORDER):
        self.fd_order = fd_order

    def fit(self, X, y=None):
        X = check_surfaces(X)
        self.reference_ = X[0]
        self.n_features_out_ = 3 * X[0].n_samples
        return self

    def transform(self, X):
        check_is_fitted(self, "reference_")
        X = check_surfaces(X, self.reference_)
        scale = np.concatenate([np.sqrt(p.weights * p.density).ravel()
                                for p in self.reference_.patches])
        rows = [(srnf(f.with_order(self.fd_order)).flat() * scale[:, None]).ravel() for f in X]
        return np.vstack(rows)


class FlatPlaceRearrangement(TransformerMixin, BaseEstimator):
    """Area-preserving diffeomorphism of a flat place moving its inner discs.

    Parameters
    ----------
    translations : array_like, shape (n, 2)
        One translation per inner disc.
    mesh_h : float
        Target edge length of the triangulation.
    collar_width : float
        Width of the pinned collars.
    n_steps, tube_steps : int
        RK4 steps of the correcting flow and of each tube flow.
    waypoints : list, optional
        Per-disc intermediate centres overriding the automatic routing.

    Attributes
    ----------
    diffeo_ : PlanarMap
    certificate_ : MoserCertificate
    """

    def __init__(self, translations=None, mesh_h=0.04, collar_width=0.05, n_steps=64,
                 tube_steps=64, waypoints=None):
        self.translations = translations
        self.mesh_h = mesh_h
        self.collar_width = collar_width
        self.n_steps = n_steps
        self.tube_steps = tube_steps
        self.waypoints = waypoints

    def fit(self, X, y=None):
        """``X`` is the :class:`FlatPlace` (or its dict form)."""
        flat = X if isinstance(X, FlatPlace) else FlatPlace.from_dict(X)
        t = check_translations(self.translations, flat.n)
        domain = HoledDiscDomain(flat, h=check_positive("mesh_h", self.mesh_h),
                                 collar_width=check_positive("collar_width", self.collar_width))
        self.flat_ = flat
        self.diffeo_, self.certificate_ = flat_place_diffeo(
            domain, list(t), waypoints=self.waypoints, n_steps=self.n_steps,
            tube_steps=self.tube_steps)
        return self

    def transform(self, X):
        check_is_fitted(self, "diffeo_")
        return self.diffeo_(check_points_2d(X))
