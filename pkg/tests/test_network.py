import math

import numpy as np
import pytest

from oracles import naive_forward
from quakenet.network import (
    DENSE_LINEAR,
    DENSE_TANH,
    RADIAL_GAUSSIAN,
    DimensionMismatch,
    LayerSpec,
    Network,
    NetworkError,
    NetworkSpec,
    NonFiniteParameter,
    UnknownModel,
    build_network,
    final_network_spec,
    forward,
    load_network,
    preliminary_network_spec,
    save_network,
    stack_spec,
    width_params_from_widths,
)


def radial_net(centers, sigma, out_w=None):
    centers = np.asarray(centers, dtype=float)
    u, d = centers.shape
    spec = NetworkSpec(d, (LayerSpec(RADIAL_GAUSSIAN, u), LayerSpec(DENSE_LINEAR, 1)), 1)
    params = [
        {"centers": centers, "width_params": width_params_from_widths(np.full(u, sigma))},
        {"W": np.ones((u, 1)) if out_w is None else out_w, "b": np.zeros(1)},
    ]
    return Network(spec, params)


def test_final_spec_units_and_kinds():
    spec = final_network_spec(12, 3)
    assert spec.units == [100, 50, 100, 200, 400, 200, 100, 50, 3]
    assert spec.kinds == [RADIAL_GAUSSIAN] + [DENSE_TANH] * 7 + [DENSE_LINEAR]


def test_final_network_parameter_shapes():
    spec = final_network_spec(9, 3)
    net = build_network(spec, seed=0, center_init_data=np.random.default_rng(0).random((500, 9)))
    assert net.params[0]["centers"].shape == (100, 9)
    assert net.params[0]["width_params"].shape == (100,)
    chain = [100, 50, 100, 200, 400, 200, 100, 50, 3]
    for k, (a, b) in enumerate(zip(chain[:-1], chain[1:]), start=1):
        assert net.params[k]["W"].shape == (a, b)
        assert net.params[k]["b"].shape == (b,)


@pytest.mark.parametrize("model,kinds", [
    ("mlp", [DENSE_TANH] * 7),
    ("radial_general", [RADIAL_GAUSSIAN] + [DENSE_TANH] * 6),
    ("rbf_mlp", [RADIAL_GAUSSIAN] + [DENSE_TANH] * 7),
])
def test_preliminary_specs(model, kinds):
    spec = preliminary_network_spec(model, 9, 3)
    assert spec.kinds == kinds + [DENSE_LINEAR]
    hidden = spec.units[:-1]
    if model == "rbf_mlp":
        assert hidden == [20, 20, 60, 100, 150, 100, 60, 20]
    else:
        assert hidden == [20, 60, 100, 150, 100, 60, 20]
    assert spec.units[-1] == 3


def test_unknown_model():
    with pytest.raises(UnknownModel):
        preliminary_network_spec("recurrent_time_series", 3, 1)


def test_spec_invariants():
    with pytest.raises(NetworkError):
        NetworkSpec(2, (LayerSpec(DENSE_TANH, 3),), 3)  # last layer must be linear
    with pytest.raises(NetworkError):
        NetworkSpec(2, (LayerSpec(DENSE_TANH, 3), LayerSpec(RADIAL_GAUSSIAN, 3), LayerSpec(DENSE_LINEAR, 1)), 1)
    with pytest.raises(NetworkError):
        LayerSpec(DENSE_TANH, 0)


def test_build_deterministic():
    spec = stack_spec(4, 2, (5, 3), radial_units=6)
    data = np.random.default_rng(1).random((50, 4))
    a = build_network(spec, 11, data)
    b = build_network(spec, 11, data)
    assert all(np.array_equal(x, y) for (_, _, x), (_, _, y) in zip(a.arrays(), b.arrays()))
    c = build_network(spec, 12, data)
    assert not np.array_equal(a.get_flat(), c.get_flat())


def test_dense_init_bounds():
    spec = stack_spec(16, 2, (64,))
    net = build_network(spec, 0)
    assert np.max(np.abs(net.params[0]["W"])) <= 1 / 4
    assert np.max(np.abs(net.params[1]["W"])) <= 1 / 8


def test_centers_sampled_from_data():
    data = np.arange(40, dtype=float).reshape(20, 2)
    net = build_network(stack_spec(2, 1, (), radial_units=5), 0, data)
    rows = {tuple(r) for r in data}
    centers = [tuple(c) for c in net.params[0]["centers"]]
    assert all(c in rows for c in centers)
    assert len(set(centers)) == 5  # without replacement


def test_centers_with_replacement_when_data_small():
    data = np.array([[0.0, 0.0], [1.0, 1.0]])
    net = build_network(stack_spec(2, 1, (), radial_units=6), 0, data)
    assert net.params[0]["centers"].shape == (6, 2)


def test_width_floor_with_duplicate_centers():
    data = np.array([[0.3, 0.3]] * 4)
    net = build_network(stack_spec(2, 1, (), radial_units=4), 0, data)
    assert np.all(net.widths() >= 1e-6)


def test_width_is_mean_nearest_center_distance():
    data = np.array([[0.0, 0.0], [3.0, 4.0], [3.0, 0.0]])
    net = build_network(stack_spec(2, 1, (), radial_units=3), 0, data)
    # nearest distances: 3, 4, 3
    assert np.allclose(net.widths(), 10.0 / 3.0, rtol=1e-12)


def test_center_init_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        build_network(stack_spec(3, 1, (), radial_units=2), 0, np.zeros((5, 2)))


def test_radial_at_center_is_one():
    net = radial_net([[0.2, -0.7]], 0.8)
    _, trace = forward(net, np.array([0.2, -0.7]), trace=True)
    assert trace[0][0] == 1.0


def test_radial_known_value():
    net = radial_net([[0.0, 0.0]], 1.0)
    _, trace = forward(net, np.array([1.0, 0.0]), trace=True)
    assert trace[0][0] == pytest.approx(math.exp(-0.5), abs=1e-12)
    assert trace[0][0] == pytest.approx(0.6065306597, abs=1e-10)


def test_zero_tanh_layer_outputs_zero():
    spec = stack_spec(3, 2, (4,))
    net = build_network(spec, 0)
    net.params[0]["W"][:] = 0
    net.params[0]["b"][:] = 0
    _, trace = forward(net, np.array([0.5, -2.0, 9.0]), trace=True)
    assert np.all(trace[0] == 0.0)
    assert len(trace) == len(spec.layers)


def test_forward_matches_naive_loop(rng):
    spec = stack_spec(3, 2, (4, 5), radial_units=6)
    net = build_network(spec, 2, rng.random((30, 3)))
    X = rng.random((7, 3))
    Y = forward(net, X)
    for x, y in zip(X, Y):
        assert np.allclose(y, naive_forward(net, x), atol=1e-12)


def test_forward_errors():
    net = build_network(stack_spec(3, 1, (2,)), 0)
    with pytest.raises(DimensionMismatch):
        forward(net, np.zeros(4))
    net.params[0]["W"][0, 0] = np.nan
    with pytest.raises(NonFiniteParameter):
        forward(net, np.zeros(3))


def test_activation_ranges_sweep():
    rng = np.random.default_rng(99)
    spec = stack_spec(4, 2, (8, 8), radial_units=10)
    net = build_network(spec, 0, rng.random((40, 4)))
    for _, _, a in net.arrays():
        a[...] = rng.normal(0.0, 2.0, size=a.shape)
    # keep Gaussian responses clear of double-precision underflow
    net.params[0]["width_params"][:] = rng.uniform(0.0, 2.0, size=10)
    X = rng.normal(0.0, 3.0, size=(10_000, 4))
    _, trace = forward(net, X, trace=True)
    assert np.all(trace[0] > 0) and np.all(trace[0] <= 1)
    for layer in trace[1:3]:
        assert np.all(np.abs(layer) <= 1)


def test_permuting_radial_units_leaves_output_unchanged(rng):
    spec = stack_spec(3, 2, (5,), radial_units=7)
    net = build_network(spec, 4, rng.random((40, 3)))
    perm = rng.permutation(7)
    permuted = net.copy()
    permuted.params[0]["centers"] = net.params[0]["centers"][perm]
    permuted.params[0]["width_params"] = net.params[0]["width_params"][perm]
    permuted.params[1]["W"] = net.params[1]["W"][perm, :]
    X = rng.random((25, 3))
    assert np.max(np.abs(forward(net, X) - forward(permuted, X))) <= 1e-12


def test_save_load_bit_exact(tmp_path, rng):
    net = build_network(stack_spec(3, 2, (4,), radial_units=5), 1, rng.random((10, 3)))
    path = tmp_path / "net.npz"
    save_network(net, path)
    back = load_network(path)
    assert back.spec == net.spec
    assert np.array_equal(back.get_flat(), net.get_flat())
    assert back.get_flat().tobytes() == net.get_flat().tobytes()
