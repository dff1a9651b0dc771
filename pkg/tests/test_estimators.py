import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from tplots import GaussianParams, StructuralError, TSetSpec, mu_k_sigma_allocation
from tplots.estimators import CapacityAllocator, EdgeLoadTransformer, LoadDistributionModel
from tplots.net import edge_loads
from tplots.tset import sample_stream


def test_transformer_matches_edge_loads(toy4, rng):
    net, f = toy4
    D = rng.random((6, 4, 4))
    t = EdgeLoadTransformer(net, f).fit()
    assert np.allclose(t.transform(D), edge_loads(net, f, D))
    assert np.allclose(t.transform(D.reshape(6, -1)), edge_loads(net, f, D))
    assert list(t.get_feature_names_out()) == list(net.edge_ids)


def test_transformer_validation(toy4):
    net, f = toy4
    with pytest.raises(NotFittedError):
        EdgeLoadTransformer(net, f).transform(np.zeros((1, 16)))
    with pytest.raises(StructuralError):
        EdgeLoadTransformer().fit()
    t = EdgeLoadTransformer(net, f).fit()
    with pytest.raises(StructuralError):
        t.transform(-np.ones((1, 16)))
    with pytest.raises(StructuralError):
        t.transform(np.ones((1, 9)))


def test_pipeline_and_model(toy4):
    net, f = toy4
    D = sample_stream(TSetSpec("A", 4), m=2000)
    pipe = make_pipeline(EdgeLoadTransformer(net, f), LoadDistributionModel(guarantee=0.9))
    pipe.fit(D)
    model = pipe[-1]
    loads = edge_loads(net, f, D)
    assert np.allclose(model.mean_, loads.mean(axis=0))
    caps = model.capacity_for_guarantee()
    assert np.allclose(model.saturation_bound(caps), 0.1)
    assert np.all(model.saturation_bound(0.0) == 1.0)
    cloned = clone(model)
    assert cloned.guarantee == 0.9 and not hasattr(cloned, "mean_")


def test_allocator():
    params = {"a": GaussianParams(1, 1, "x"), "b": GaussianParams(1, 3, "x")}
    alloc = CapacityAllocator(budget=6.0).fit(params)
    assert alloc.k_ == 1.0 and np.allclose(alloc.predict(), [2, 4])
    assert np.allclose(alloc.capacities_, mu_k_sigma_allocation(params, 6.0).vector)
    lag = CapacityAllocator(budget=6.0, method="lagrangian").fit(params)
    assert lag.k_ is None and abs(lag.predict().sum() - 6.0) <= 1e-9
    with pytest.raises(StructuralError):
        CapacityAllocator(method="nope").fit(params)
