"""Layered feedforward networks with Gaussian radial and tanh/linear dense layers."""
import json
from dataclasses import dataclass

import numpy as np

DENSE_TANH = "dense_tanh"
DENSE_LINEAR = "dense_linear"
RADIAL_GAUSSIAN = "radial_gaussian"
LAYER_KINDS = (DENSE_TANH, DENSE_LINEAR, RADIAL_GAUSSIAN)

# units per hidden layer of the preliminary networks
PRELIMINARY_UNITS = (20, 60, 100, 150, 100, 60, 20)
# radial input layer, then tanh layers, of the final network
FINAL_RADIAL_UNITS = 100
FINAL_TANH_UNITS = (50, 100, 200, 400, 200, 100, 50)
PRELIMINARY_MODELS = ("mlp", "radial_general", "rbf_mlp")

WIDTH_FLOOR = 1e-6
FORMAT_VERSION = 1


class NetworkError(ValueError):
    pass


class DimensionMismatch(NetworkError):
    pass


class NonFiniteParameter(NetworkError):
    pass


class UnknownModel(NetworkError):
    pass


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    units: int

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise NetworkError(f"unknown layer kind {self.kind!r}")
        if int(self.units) != self.units or self.units < 1:
            raise NetworkError("units must be a positive integer")


@dataclass(frozen=True)
class NetworkSpec:
    input_width: int
    layers: tuple
    output_width: int

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.input_width < 1 or self.output_width < 1:
            raise NetworkError("input and output widths must be >= 1")
        if not self.layers:
            raise NetworkError("network needs at least one layer")
        last = self.layers[-1]
        if last.kind != DENSE_LINEAR or last.units != self.output_width:
            raise NetworkError("last layer must be dense_linear with output_width units")
        radial = [k for k, layer in enumerate(self.layers) if layer.kind == RADIAL_GAUSSIAN]
        if len(radial) > 1 or (radial and radial[0] != 0):
            raise NetworkError("at most one radial layer, and only in first position")

    @property
    def units(self):
        return [layer.units for layer in self.layers]

    @property
    def kinds(self):
        return [layer.kind for layer in self.layers]

    def to_dict(self):
        return {
            "input_width": self.input_width,
            "output_width": self.output_width,
            "layers": [[layer.kind, layer.units] for layer in self.layers],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["input_width"]), tuple(LayerSpec(k, int(u)) for k, u in d["layers"]), int(d["output_width"]))


def stack_spec(input_width, output_width, hidden, radial_units=None):
    """Optional radial input layer, tanh layers of ``hidden`` units, linear output."""
    layers = []
    if radial_units:
        layers.append(LayerSpec(RADIAL_GAUSSIAN, radial_units))
    layers.extend(LayerSpec(DENSE_TANH, u) for u in hidden)
    layers.append(LayerSpec(DENSE_LINEAR, output_width))
    return NetworkSpec(input_width, tuple(layers), output_width)


def final_network_spec(input_width, output_width):
    return stack_spec(input_width, output_width, FINAL_TANH_UNITS, radial_units=FINAL_RADIAL_UNITS)


def preliminary_network_spec(model, input_width, output_width):
    """Seven-hidden-layer preliminary topologies.

    ``mlp`` is all tanh; ``radial_general`` swaps the first hidden layer for a
    radial one; ``rbf_mlp`` prepends a 20-unit radial layer to the full tanh stack.
    """
    if model == "mlp":
        return stack_spec(input_width, output_width, PRELIMINARY_UNITS)
    if model == "radial_general":
        return stack_spec(input_width, output_width, PRELIMINARY_UNITS[1:], radial_units=PRELIMINARY_UNITS[0])
    if model == "rbf_mlp":
        return stack_spec(input_width, output_width, PRELIMINARY_UNITS, radial_units=PRELIMINARY_UNITS[0])
    raise UnknownModel(f"unknown model {model!r}; expected one of {PRELIMINARY_MODELS}")


def softplus(x):
    return np.logaddexp(0.0, x)


def softplus_inv(y):
    y = np.asarray(y, dtype=float)
    return y + np.log(-np.expm1(-y))


def widths_from_params(rho):
    return WIDTH_FLOOR + softplus(rho)


def width_params_from_widths(sigma):
    return softplus_inv(np.maximum(np.asarray(sigma, dtype=float) - WIDTH_FLOOR, WIDTH_FLOOR))


class Network:
    """Spec plus parameters.

    ``params[k]`` is ``{"W", "b"}`` for dense layers (``W`` is fan_in x units)
    and ``{"centers", "width_params"}`` for the radial layer, where the Gaussian
    width is ``WIDTH_FLOOR + softplus(width_params)``.
    """

    def __init__(self, spec, params):
        self.spec = spec
        self.params = params
        self._check_shapes()

    def _check_shapes(self):
        if len(self.params) != len(self.spec.layers):
            raise DimensionMismatch("one parameter block per layer expected")
        fan_in = self.spec.input_width
        for layer, p in zip(self.spec.layers, self.params):
            if layer.kind == RADIAL_GAUSSIAN:
                shapes = {"centers": (layer.units, fan_in), "width_params": (layer.units,)}
            else:
                shapes = {"W": (fan_in, layer.units), "b": (layer.units,)}
            if set(p) != set(shapes) or any(p[k].shape != s for k, s in shapes.items()):
                raise DimensionMismatch(f"bad parameter shapes for {layer}")
            fan_in = layer.units

    def copy(self):
        return Network(self.spec, [{k: v.copy() for k, v in p.items()} for p in self.params])

    def arrays(self):
        """(layer index, name, array) for every parameter array, in fixed order."""
        for k, p in enumerate(self.params):
            for name in sorted(p):
                yield k, name, p[name]

    @property
    def parameter_count(self):
        return sum(a.size for _, _, a in self.arrays())

    def get_flat(self):
        return np.concatenate([a.ravel() for _, _, a in self.arrays()])

    def set_flat(self, flat):
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (self.parameter_count,):
            raise DimensionMismatch("flat parameter vector has wrong length")
        pos = 0
        for _, _, a in self.arrays():
            a[...] = flat[pos:pos + a.size].reshape(a.shape)
            pos += a.size

    def widths(self, layer=0):
        return widths_from_params(self.params[layer]["width_params"])

    def is_finite(self):
        return all(np.all(np.isfinite(a)) for _, _, a in self.arrays())


def _init_centers(rng, units, input_width, data):
    if data is None:
        return rng.random((units, input_width))
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[1] != input_width:
        raise DimensionMismatch(f"center_init_data must have {input_width} columns")
    if len(data) == 0:
        raise DimensionMismatch("center_init_data is empty")
    replace = len(data) < units
    idx = rng.choice(len(data), size=units, replace=replace)
    return data[idx].copy()


def nearest_center_width(centers):
    """Mean distance from each center to its nearest other center (1.0 for a single center)."""
    if len(centers) < 2:
        return 1.0
    d2 = np.sum((centers[:, None, :] - centers[None, :, :]) ** 2, axis=-1)
    np.fill_diagonal(d2, np.inf)
    return max(float(np.mean(np.sqrt(d2.min(axis=1)))), WIDTH_FLOOR)


def build_network(spec, seed, center_init_data=None):
    rng = np.random.default_rng(seed)
    params = []
    fan_in = spec.input_width
    for layer in spec.layers:
        if layer.kind == RADIAL_GAUSSIAN:
            centers = _init_centers(rng, layer.units, fan_in, center_init_data)
            sigma = np.full(layer.units, nearest_center_width(centers))
            params.append({"centers": centers, "width_params": width_params_from_widths(sigma)})
        else:
            bound = 1.0 / np.sqrt(fan_in)
            params.append({
                "W": rng.uniform(-bound, bound, size=(fan_in, layer.units)),
                "b": rng.uniform(-bound, bound, size=layer.units),
            })
        fan_in = layer.units
    return Network(spec, params)


def radial_activation(X, centers, sigma):
    """Gaussian responses exp(-|x - c|^2 / (2 sigma^2)) and the squared distances."""
    diff = X[:, None, :] - centers[None, :, :]
    d2 = np.einsum("nud,nud->nu", diff, diff)
    return np.exp(-d2 / (2.0 * sigma ** 2)), d2


def forward_layers(network, X):
    """Batch forward pass returning every layer's activations and radial distances.

    ``acts[0]`` is the input batch, ``acts[k+1]`` the output of layer ``k``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != network.spec.input_width:
        raise DimensionMismatch(f"expected inputs of width {network.spec.input_width}, got shape {X.shape}")
    if not network.is_finite():
        raise NonFiniteParameter("network has non-finite parameters")
    acts = [X]
    d2 = None
    a = X
    for layer, p in zip(network.spec.layers, network.params):
        if layer.kind == RADIAL_GAUSSIAN:
            a, d2 = radial_activation(a, p["centers"], widths_from_params(p["width_params"]))
        elif layer.kind == DENSE_TANH:
            a = np.tanh(a @ p["W"] + p["b"])
        else:
            a = a @ p["W"] + p["b"]
        acts.append(a)
    return acts, d2


def forward(network, x, trace=False):
    """Evaluate the network on one input vector or a batch (rows).

    With ``trace=True`` also returns the list of per-layer activations.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    acts, _ = forward_layers(network, x[None, :] if single else x)
    out = acts[-1][0] if single else acts[-1]
    if not trace:
        return out
    layers = [a[0] for a in acts[1:]] if single else acts[1:]
    return out, layers


def save_network(network, path):
    arrays = {f"p{k}_{name}": a for k, name, a in network.arrays()}
    np.savez(
        path,
        format_version=np.array(FORMAT_VERSION),
        spec_json=np.array(json.dumps(network.spec.to_dict(), sort_keys=True)),
        **arrays,
    )


def load_network(path):
    with np.load(path, allow_pickle=False) as data:
        version = int(data["format_version"])
        if version != FORMAT_VERSION:
            raise NetworkError(f"unsupported network format version {version}")
        spec = NetworkSpec.from_dict(json.loads(str(data["spec_json"])))
        params = [{} for _ in spec.layers]
        for key in data.files:
            if key.startswith("p") and "_" in key:
                idx, name = key[1:].split("_", 1)
                params[int(idx)][name] = data[key].astype(float, copy=True)
    return Network(spec, params)
