"""scikit-learn style wrappers around the load, Gaussian-model and allocation functions.

Traffic matrices enter as arrays of shape ``(m, n, n)`` or flattened
``(m, n*n)``.
"""

from __future__ import annotations

from typing import Mapping

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .alloc import lagrangian_allocation, mu_k_sigma_allocation
from .bounds import capacity_for_guarantee, chebyshev_saturation_bound
from .exceptions import StructuralError
from .net import Network, Routing, edge_loads
from .stats import GaussianParams


def _matrices(X, n: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 3:
        X = X.reshape(len(X), -1)
    X = check_array(X)
    if X.shape[1] != n * n:
        raise StructuralError(f"expected {n * n} entries per matrix, got {X.shape[1]}")
    if np.any(X < 0):
        raise StructuralError("traffic matrices must be nonnegative")
    return X.reshape(len(X), n, n)


class EdgeLoadTransformer(TransformerMixin, BaseEstimator):
    """Map traffic matrices to per-edge congestion ``(m, |E|)``.

    Parameters
    ----------
    network : Network
    routing : Routing
    """

    def __init__(self, network: Network | None = None, routing: Routing | None = None):
        self.network = network
        self.routing = routing

    def fit(self, X=None, y=None):
        if self.network is None or self.routing is None:
            raise StructuralError("network and routing are required")
        self.edge_ids_ = np.array(self.network.edge_ids)
        self.n_features_in_ = self.network.n ** 2
        return self

    def transform(self, X):
        check_is_fitted(self, "edge_ids_")
        D = _matrices(X, self.network.n)
        return np.atleast_2d(edge_loads(self.network, self.routing, D))

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "edge_ids_")
        return self.edge_ids_.copy()


class LoadDistributionModel(BaseEstimator):
    """Per-edge Gaussian load model fitted from sampled loads.

    Parameters
    ----------
    guarantee : float
        Default certainty level for :meth:`capacity_for_guarantee`.

    Attributes
    ----------
    mean_, std_ : ndarray of shape (n_edges,)
    """

    def __init__(self, guarantee: float = 0.9):
        self.guarantee = guarantee

    def fit(self, loads, y=None):
        loads = check_array(loads, ensure_min_samples=2)
        self.mean_ = loads.mean(axis=0)
        self.std_ = loads.std(axis=0)
        self.n_features_in_ = loads.shape[1]
        return self

    def params(self) -> list[GaussianParams]:
        check_is_fitted(self, "mean_")
        return [GaussianParams(float(m), float(s), "empirical") for m, s in zip(self.mean_, self.std_)]

    def saturation_bound(self, capacities) -> np.ndarray:
        """Chebyshev upper bound on ``Pr{load >= c}`` per edge."""
        c = np.broadcast_to(np.asarray(capacities, dtype=float), self.mean_.shape)
        return np.array([chebyshev_saturation_bound(p, ci) for p, ci in zip(self.params(), c)])

    def capacity_for_guarantee(self, guarantee: float | None = None) -> np.ndarray:
        G = self.guarantee if guarantee is None else guarantee
        return np.array([capacity_for_guarantee(p, G) for p in self.params()])


class CapacityAllocator(BaseEstimator):
    """Split a capacity budget across edges from per-edge (mu, sigma).

    Parameters
    ----------
    budget : float
    method : {"mu-k-sigma", "lagrangian"}
    """

    def __init__(self, budget: float = 1.0, method: str = "mu-k-sigma"):
        self.budget = budget
        self.method = method

    def fit(self, params: Mapping[str, GaussianParams], y=None):
        if self.method == "mu-k-sigma":
            alloc = mu_k_sigma_allocation(params, self.budget)
        elif self.method == "lagrangian":
            alloc = lagrangian_allocation(params, self.budget)
        else:
            raise StructuralError(f"unknown allocation method {self.method!r}")
        self.allocation_ = alloc
        self.capacities_ = alloc.vector
        self.k_ = alloc.k
        return self

    def predict(self, params=None) -> np.ndarray:
        check_is_fitted(self, "capacities_")
        return self.capacities_.copy()
