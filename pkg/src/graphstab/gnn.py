"""Graph neural network: layered graph convolutions with pointwise
nonlinearities, a single-node linear readout, analytic gradients, ADAM, and
penalty-regularized training.

The training objective is

    sum_T smooth_l1(prediction, label) + mu * penalty

where the penalty sums, over every filter in every bank, the grid maximum of
|lambda h'(lambda)| on a fixed eigenvalue interval. Keeping that quantity
small keeps the filters integral Lipschitz, hence the trained network stable
to relative graph perturbations.
"""

import copy
import json
from dataclasses import dataclass, field

import numpy as np

from .filters import shift_stack
from .graphs import GSO
from .spectral import eigendecompose

_ACTIVATIONS = {
    "relu": (lambda z: np.maximum(z, 0.0), lambda z: (z > 0).astype(float)),
    "tanh": (np.tanh, lambda z: 1.0 - np.tanh(z) ** 2),
    "linear": (lambda z: z, lambda z: np.ones_like(z)),
}


@dataclass
class LayerSpec:
    """One GNN layer: an (F_in, F_out, K) filter bank and its nonlinearity."""

    taps: np.ndarray
    activation: str = "relu"

    def __post_init__(self):
        self.taps = np.asarray(self.taps, dtype=float)
        if self.taps.ndim != 3:
            raise ValueError("layer taps must have shape (F_in, F_out, K)")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass
class GNNModel:
    """Layered GNN with a linear readout at a single node of interest."""

    layers: list
    readout_weights: np.ndarray
    readout_bias: np.ndarray  # stored as a 1-element array so optimizers share it
    node: int

    def __post_init__(self):
        self.readout_weights = np.asarray(self.readout_weights, dtype=float)
        self.readout_bias = np.atleast_1d(np.asarray(self.readout_bias,
                                                     dtype=float))
        if self.readout_bias.shape != (1,):
            raise ValueError("readout bias must be a single scalar")
        f = self.layers[0].taps.shape[0]
        for i, layer in enumerate(self.layers):
            if layer.taps.shape[0] != f:
                raise ValueError(
                    f"layer {i} expects {layer.taps.shape[0]} input features, "
                    f"previous layer produces {f}"
                )
            f = layer.taps.shape[1]
        if self.readout_weights.shape != (f,):
            raise ValueError(
                f"readout expects {self.readout_weights.shape} weights for "
                f"{f} output features"
            )

    @property
    def input_features(self) -> int:
        return self.layers[0].taps.shape[0]


@dataclass
class TrainConfig:
    mu: float = 0.0
    lambda_interval: tuple | None = None  # default: eigenvalue range of S
    grid_size: int = 1001
    learning_rate: float = 0.005
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon_adam: float = 1e-8
    epochs: int = 40
    batch_size: int = 5
    rng_seed: int = 0

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")
        if self.learning_rate <= 0 or self.beta1 <= 0 or self.beta2 <= 0:
            raise ValueError("rates must be positive")
        if self.lambda_interval is not None:
            a, b = self.lambda_interval
            if not a < b:
                raise ValueError("lambda interval must satisfy a < b")


@dataclass
class ForwardCache:
    prediction: float
    layer_inputs: list = field(default_factory=list)      # x_{l-1} per layer
    layer_shifts: list = field(default_factory=list)      # (K, N, F_in)
    preactivations: list = field(default_factory=list)    # H_l(S) x_{l-1}
    features: np.ndarray | None = None                    # final (N, F_L)


def init_model(seed, layer_dims, taps_per_layer, activations, node) -> GNNModel:
    """Seeded initialization: taps uniform in +-1/sqrt(F_in * K) per layer,
    readout uniform in +-1/sqrt(F_L). No biases inside convolution layers."""
    rng = np.random.default_rng(seed)
    layers = []
    for (f_in, f_out), K, act in zip(
        zip(layer_dims[:-1], layer_dims[1:]), taps_per_layer, activations
    ):
        bound = 1.0 / np.sqrt(f_in * K)
        layers.append(LayerSpec(rng.uniform(-bound, bound, (f_in, f_out, K)), act))
    f_last = layer_dims[-1]
    bound = 1.0 / np.sqrt(f_last)
    return GNNModel(
        layers=layers,
        readout_weights=rng.uniform(-bound, bound, f_last),
        readout_bias=float(rng.uniform(-bound, bound)),
        node=node,
    )


def forward(model: GNNModel, S: GSO, x: np.ndarray,
            first_layer_shifts: np.ndarray | None = None) -> ForwardCache:
    """Run the network; caches per-layer shifts and pre-activations.

    first_layer_shifts, when given, is the precomputed (K, N, F_0) shift
    stack of x (shifts do not depend on the parameters, so training loops
    reuse them across epochs).
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape != (S.node_count, model.input_features):
        raise ValueError(
            f"input of shape {x.shape} does not match N = {S.node_count}, "
            f"F_0 = {model.input_features}"
        )
    cache = ForwardCache(prediction=0.0)
    feat = x
    for i, layer in enumerate(model.layers):
        K = layer.taps.shape[2]
        if i == 0 and first_layer_shifts is not None:
            shifts = first_layer_shifts
        else:
            shifts = shift_stack(S, feat, K)
        z = np.einsum("knf,fgk->ng", shifts, layer.taps)
        act = _ACTIVATIONS[layer.activation][0]
        cache.layer_inputs.append(feat)
        cache.layer_shifts.append(shifts)
        cache.preactivations.append(z)
        feat = act(z)
    cache.features = feat
    cache.prediction = float(
        feat[model.node] @ model.readout_weights + model.readout_bias[0]
    )
    return cache


def smooth_l1_loss(prediction: float, target: float, beta: float = 1.0) -> float:
    r = prediction - target
    if abs(r) < beta:
        return 0.5 * r * r / beta
    return abs(r) - 0.5 * beta


def smooth_l1_grad(prediction: float, target: float, beta: float = 1.0) -> float:
    r = prediction - target
    return float(np.clip(r / beta, -1.0, 1.0))


def penalty(model: GNNModel, config: TrainConfig):
    """Stability penalty: per-filter grid maxima of |lambda h'(lambda)|,
    summed over every filter of every bank.

    Returns (value, per-layer tap subgradients). The subgradient of each
    filter's max is taken at its (first) argmax grid point.
    """
    if config.lambda_interval is None:
        raise ValueError("penalty needs a configured lambda interval")
    a, b = config.lambda_interval
    if config.grid_size < 2:
        raise ValueError("penalty grid is empty")
    grid = np.linspace(a, b, config.grid_size)
    value = 0.0
    grads = []
    for layer in model.layers:
        taps = layer.taps
        K = taps.shape[2]
        ks = np.arange(K, dtype=float)
        powers = grid[:, None] ** np.arange(K)[None, :]  # (G, K)
        v = np.tensordot(powers, taps * ks, axes=([1], [2]))  # (G, F_in, F_out)
        idx = np.argmax(np.abs(v), axis=0)             # first argmax per filter
        f_idx, g_idx = np.meshgrid(
            np.arange(taps.shape[0]), np.arange(taps.shape[1]), indexing="ij"
        )
        v_star = v[idx, f_idx, g_idx]
        value += float(np.sum(np.abs(v_star)))
        lam_star = grid[idx]                           # (F_in, F_out)
        sign = np.sign(v_star)
        grads.append(sign[:, :, None] * ks[None, None, :]
                     * lam_star[:, :, None] ** ks[None, None, :])
    return value, grads


def sample_gradients(model: GNNModel, S: GSO, x, y: float,
                     cache: ForwardCache):
    """Analytic gradients of smooth_l1(forward(x), y) w.r.t. all parameters.

    Returns (tap_grads per layer, readout_weight_grad, bias_grad).
    """
    if cache.features is None:
        raise ValueError("forward cache is missing")
    dpred = smooth_l1_grad(cache.prediction, y)
    g_w = dpred * cache.features[model.node]
    g_b = dpred
    G = np.zeros_like(cache.features)
    G[model.node] = dpred * model.readout_weights
    tap_grads = [None] * len(model.layers)
    for i in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[i]
        dact = _ACTIVATIONS[layer.activation][1]
        Gp = G * dact(cache.preactivations[i])
        tap_grads[i] = np.einsum("knf,ng->fgk", cache.layer_shifts[i], Gp)
        if i > 0:
            K = layer.taps.shape[2]
            # S is symmetric, so the adjoint of shifting is shifting
            T = shift_stack(S, Gp, K)
            G = np.einsum("kng,fgk->nf", T, layer.taps)
    return tap_grads, g_w, g_b


def _parameters(model: GNNModel):
    return [layer.taps for layer in model.layers] + [
        model.readout_weights, model.readout_bias
    ]


def _zero_like(params):
    return [np.zeros_like(p) for p in params]


@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0


def adam_init(params) -> AdamState:
    return AdamState(m=_zero_like(params), v=_zero_like(params), step=0)


def adam_step(params, grads, state: AdamState, config: TrainConfig):
    """Standard ADAM update with bias correction, applied in place."""
    state.step += 1
    b1, b2 = config.beta1, config.beta2
    lr, eps = config.learning_rate, config.epsilon_adam
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        m_hat = m / (1 - b1 ** state.step)
        v_hat = v / (1 - b2 ** state.step)
        p -= lr * m_hat / (np.sqrt(v_hat) + eps)


def objective(model: GNNModel, S: GSO, samples, config: TrainConfig) -> float:
    """Total training objective: summed data loss plus mu * penalty."""
    total = sum(
        smooth_l1_loss(forward(model, S, x).prediction, y) for x, y in samples
    )
    if config.mu > 0:
        total += config.mu * penalty(model, config)[0]
    return float(total)


def objective_gradients(model: GNNModel, S: GSO, samples, config: TrainConfig):
    """Gradients of `objective` as a flat parameter-ordered list."""
    acc = _zero_like(_parameters(model))
    for x, y in samples:
        cache = forward(model, S, x)
        tap_grads, g_w, g_b = sample_gradients(model, S, x, y, cache)
        for slot, g in zip(acc, tap_grads + [g_w, np.atleast_1d(g_b)]):
            slot += g
    if config.mu > 0:
        _, pen_grads = penalty(model, config)
        for slot, g in zip(acc, pen_grads):
            slot += config.mu * g
    return acc


def resolve_lambda_interval(S: GSO, config: TrainConfig) -> tuple:
    """Default penalty interval: the eigenvalue range of the training GSO."""
    if config.lambda_interval is not None:
        return tuple(config.lambda_interval)
    lam = eigendecompose(S).eigenvalues
    a, b = float(lam[0]), float(lam[-1])
    if not a < b:
        b = a + 1e-6
    return (a, b)


def train(model: GNNModel, S: GSO, train_set, config: TrainConfig):
    """Mini-batch ADAM on the penalized objective.

    train_set is a list of (signal, label) pairs. Batches are drawn by a
    seeded shuffle each epoch; gradients are averaged over the batch before
    each ADAM step. Returns (trained model, per-epoch trace) where the trace
    rows are (epoch, mean data loss, penalty value).
    """
    if not train_set:
        raise ValueError("training set is empty")
    model = copy.deepcopy(model)
    config = copy.copy(config)
    config.lambda_interval = resolve_lambda_interval(S, config)
    params = _parameters(model)
    state = adam_init(params)
    rng = np.random.default_rng(config.rng_seed)
    n = len(train_set)
    K0 = model.layers[0].taps.shape[2]
    # Layer-1 shifts are parameter-free: compute them once for every sample.
    X0 = np.stack(
        [np.atleast_2d(np.asarray(x, dtype=float).T).T for x, _ in train_set]
    )  # (n, N, F_0)
    shifts_all = np.empty((K0,) + X0.shape)
    shifts_all[0] = X0
    for k in range(1, K0):
        shifts_all[k] = np.einsum("ij,sjf->sif", S.matrix, shifts_all[k - 1])
    trace = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start:start + config.batch_size]
            acc = _zero_like(params)
            for idx in batch:
                x, y = train_set[idx]
                cache = forward(model, S, x,
                                first_layer_shifts=shifts_all[:, idx])
                epoch_loss += smooth_l1_loss(cache.prediction, y)
                tap_grads, g_w, g_b = sample_gradients(model, S, x, cache=cache,
                                                       y=y)
                for slot, g in zip(acc, tap_grads + [g_w, np.atleast_1d(g_b)]):
                    slot += g
            for slot in acc:
                slot /= len(batch)
            if config.mu > 0:
                _, pen_grads = penalty(model, config)
                for slot, g in zip(acc, pen_grads):
                    slot += config.mu * g
            adam_step(params, acc, state, config)
        pen_value = penalty(model, config)[0]
        trace.append((epoch, epoch_loss / n, pen_value))
    return model, trace


def predict(model: GNNModel, S: GSO, x) -> float:
    return forward(model, S, x).prediction


# --- checkpoints and traces --------------------------------------------------

def model_to_dict(model: GNNModel) -> dict:
    return {
        "layers": [
            {"taps": layer.taps.tolist(), "activation": layer.activation}
            for layer in model.layers
        ],
        "readout_weights": model.readout_weights.tolist(),
        "readout_bias": float(model.readout_bias[0]),
        "node": model.node,
    }


def model_from_dict(d: dict) -> GNNModel:
    return GNNModel(
        layers=[LayerSpec(np.array(l["taps"]), l["activation"])
                for l in d["layers"]],
        readout_weights=np.array(d["readout_weights"]),
        readout_bias=float(d["readout_bias"]),
        node=int(d["node"]),
    )


def save_checkpoint(path, model: GNNModel, config: TrainConfig) -> None:
    payload = {
        "model": model_to_dict(model),
        "config": {
            "mu": config.mu,
            "lambda_interval": list(config.lambda_interval)
            if config.lambda_interval else None,
            "grid_size": config.grid_size,
            "learning_rate": config.learning_rate,
            "beta1": config.beta1,
            "beta2": config.beta2,
            "epsilon_adam": config.epsilon_adam,
            "epochs": config.epochs,
            "batch_size": config.batch_size,
            "rng_seed": config.rng_seed,
        },
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_checkpoint(path):
    with open(path) as fh:
        payload = json.load(fh)
    cfg = payload["config"]
    if cfg["lambda_interval"] is not None:
        cfg["lambda_interval"] = tuple(cfg["lambda_interval"])
    return model_from_dict(payload["model"]), TrainConfig(**cfg)


def save_trace_csv(trace, path) -> None:
    with open(path, "w") as fh:
        fh.write("epoch,loss,penalty\n")
        for epoch, loss, pen in trace:
            fh.write(f"{epoch},{float(loss)!r},{float(pen)!r}\n")
