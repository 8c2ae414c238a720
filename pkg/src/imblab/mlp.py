"""Multi-layer perceptron trained by minibatch SGD with classical momentum.

Supports one or two ReLU hidden layers, Glorot-uniform initialization
scaled by a configurable factor, and three batch-normalization placements:
none, a single site on the raw input, or one site after every hidden
linear transform (before its ReLU). The positive weight scalar enters
either through per-instance loss weights or through gamma-biased batch
resampling.
"""

from dataclasses import dataclass

import numpy as np

from imblab._numeric import sigmoid, softplus
from imblab.dataio import Dataset
from imblab.reweight import RESAMPLE, WEIGHTED_COST, PwsConfig, resample_probabilities

BN_NONE = "none"
BN_AFTER_INPUT = "after_input"
BN_EVERY_LAYER = "every_layer"
_BN_MODES = (BN_NONE, BN_AFTER_INPUT, BN_EVERY_LAYER)

_BN_EPS = 1e-5
_BN_MOMENTUM = 0.9


@dataclass(frozen=True)
class MlpConfig:
    hidden_size: int
    n_layers: int = 1
    init_scale: float = 1.0
    batchnorm: str = BN_NONE
    learning_rate: float = 0.01
    momentum: float = 0.0
    batch_size: int = 128
    epochs: int = 30
    seed: int = 0

    def __post_init__(self):
        if self.hidden_size < 1:
            raise ValueError("hidden_size must be positive")
        if self.n_layers not in (1, 2):
            raise ValueError("n_layers must be 1 or 2")
        if self.init_scale <= 0 or not np.isfinite(self.init_scale):
            raise ValueError("init_scale must be positive and finite")
        if self.batchnorm not in _BN_MODES:
            raise ValueError(f"batchnorm must be one of {_BN_MODES}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be positive")


class BatchNormState:
    """Scale/shift parameters plus running statistics for one site."""

    def __init__(self, dim):
        self.gamma = np.ones(dim)
        self.beta = np.zeros(dim)
        self.run_mean = np.zeros(dim)
        self.run_var = np.ones(dim)


class MlpModel:
    """Layer parameters, batch-norm sites, and a training/inference flag."""

    def __init__(self, config: MlpConfig, input_dim: int, weights, biases, bn_sites):
        self.config = config
        self.input_dim = input_dim
        self.weights = weights
        self.biases = biases
        self.bn_sites = bn_sites
        self.training = True

    def parameters(self):
        """(name, array) pairs in a fixed order; arrays are mutated in place."""
        out = []
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out.append((f"W{i}", w))
            out.append((f"b{i}", b))
        for i, bn in enumerate(self.bn_sites):
            out.append((f"bn{i}_gamma", bn.gamma))
            out.append((f"bn{i}_beta", bn.beta))
        return out


def init_mlp(input_dim: int, cfg: MlpConfig) -> MlpModel:
    """Glorot-uniform weights times init_scale, zero biases."""
    rng = np.random.default_rng(cfg.seed)
    dims = [input_dim] + [cfg.hidden_size] * cfg.n_layers + [1]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)) * cfg.init_scale)
        biases.append(np.zeros(fan_out))
    if cfg.batchnorm == BN_AFTER_INPUT:
        bn_sites = [BatchNormState(input_dim)]
    elif cfg.batchnorm == BN_EVERY_LAYER:
        bn_sites = [BatchNormState(cfg.hidden_size) for _ in range(cfg.n_layers)]
    else:
        bn_sites = []
    return MlpModel(cfg, input_dim, weights, biases, bn_sites)


def _bn_forward_train(bn: BatchNormState, x, update_running=True):
    if len(x) < 2:
        # variance of a single row is meaningless; the site passes through
        return x, None
    mu = x.mean(axis=0)
    var = x.var(axis=0)
    std = np.sqrt(var + _BN_EPS)
    xhat = (x - mu) / std
    if update_running:
        bn.run_mean = _BN_MOMENTUM * bn.run_mean + (1 - _BN_MOMENTUM) * mu
        bn.run_var = _BN_MOMENTUM * bn.run_var + (1 - _BN_MOMENTUM) * var
    return bn.gamma * xhat + bn.beta, (xhat, std)


def _bn_forward_infer(bn: BatchNormState, x):
    xhat = (x - bn.run_mean) / np.sqrt(bn.run_var + _BN_EPS)
    return bn.gamma * xhat + bn.beta


def _bn_backward(bn: BatchNormState, cache, dout):
    if cache is None:
        return dout, np.zeros_like(bn.gamma), np.zeros_like(bn.beta)
    xhat, std = cache
    dgamma = (dout * xhat).sum(axis=0)
    dbeta = dout.sum(axis=0)
    dxhat = dout * bn.gamma
    dx = (dxhat - dxhat.mean(axis=0) - xhat * (dxhat * xhat).mean(axis=0)) / std
    return dx, dgamma, dbeta


def loss_and_grads(model: MlpModel, X, y, sample_weights, update_running=False):
    """Training-mode weighted BCE loss and gradients for every parameter.

    Loss is sum_i w_i * bce_i / batch_size. Gradients come back as a dict
    keyed like model.parameters(). Exposed separately from fit_mlp so the
    backward pass can be checked against finite differences.
    """
    cfg = model.config
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(sample_weights, dtype=np.float64)
    batch = len(X)

    h = X
    bn_caches = []
    if cfg.batchnorm == BN_AFTER_INPUT:
        h, cache = _bn_forward_train(model.bn_sites[0], h, update_running)
        bn_caches.append(cache)
    layer_inputs = []
    relu_masks = []
    n_hidden = cfg.n_layers
    for layer in range(n_hidden):
        layer_inputs.append(h)
        z = h @ model.weights[layer] + model.biases[layer]
        if cfg.batchnorm == BN_EVERY_LAYER:
            z, cache = _bn_forward_train(model.bn_sites[layer], z, update_running)
            bn_caches.append(cache)
        mask = z > 0
        relu_masks.append(mask)
        h = z * mask
    layer_inputs.append(h)
    logits = (h @ model.weights[-1] + model.biases[-1])[:, 0]

    losses = softplus(logits) - y * logits
    loss = float(w @ losses) / batch

    grads = {}
    dlogits = (w * (sigmoid(logits) - y) / batch)[:, None]
    grads[f"W{n_hidden}"] = layer_inputs[-1].T @ dlogits
    grads[f"b{n_hidden}"] = dlogits.sum(axis=0)
    dh = dlogits @ model.weights[-1].T
    for layer in range(n_hidden - 1, -1, -1):
        dz = dh * relu_masks[layer]
        if cfg.batchnorm == BN_EVERY_LAYER:
            dz, dgamma, dbeta = _bn_backward(model.bn_sites[layer], bn_caches[layer], dz)
            grads[f"bn{layer}_gamma"] = dgamma
            grads[f"bn{layer}_beta"] = dbeta
        grads[f"W{layer}"] = layer_inputs[layer].T @ dz
        grads[f"b{layer}"] = dz.sum(axis=0)
        dh = dz @ model.weights[layer].T
    if cfg.batchnorm == BN_AFTER_INPUT:
        _, dgamma, dbeta = _bn_backward(model.bn_sites[0], bn_caches[0], dh)
        grads["bn0_gamma"] = dgamma
        grads["bn0_beta"] = dbeta
    return loss, grads


def fit_mlp(ds: Dataset, cfg: MlpConfig, pws: PwsConfig) -> MlpModel:
    """SGD with classical momentum; the PWS mode decides how batches see gamma.

    weighted_cost multiplies each positive instance's loss term by gamma;
    resample draws every batch i.i.d. from the gamma-weighted distribution.
    The returned model is in inference mode.
    """
    if ds.positive_count == 0 or ds.negative_count == 0:
        raise ValueError("training data must contain both classes")
    model = init_mlp(ds.d, cfg)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
    resample_rng = np.random.default_rng(np.random.SeedSequence([pws.seed, 2]))
    velocity = {name: np.zeros_like(arr) for name, arr in model.parameters()}
    n_batches = (ds.n + cfg.batch_size - 1) // cfg.batch_size
    if pws.mode == RESAMPLE:
        probs = resample_probabilities(ds, pws.gamma)
        probs = probs / probs.sum()

    for epoch in range(cfg.epochs):
        if pws.mode == WEIGHTED_COST:
            perm = shuffle_rng.permutation(ds.n)
        for b in range(n_batches):
            if pws.mode == WEIGHTED_COST:
                rows = perm[b * cfg.batch_size:(b + 1) * cfg.batch_size]
                bw = np.where(ds.labels[rows] == 1, pws.gamma, 1.0)
            else:
                rows = resample_rng.choice(ds.n, size=cfg.batch_size,
                                           replace=True, p=probs)
                bw = np.ones(len(rows))
            loss, grads = loss_and_grads(model, ds.features[rows], ds.labels[rows],
                                         bw, update_running=True)
            if not np.isfinite(loss):
                raise RuntimeError(
                    f"non-finite training loss at epoch {epoch}, batch {b}"
                )
            for name, arr in model.parameters():
                v = velocity[name]
                v *= cfg.momentum
                v -= cfg.learning_rate * grads[name]
                arr += v
    model.training = False
    return model


def forward_logits_infer(model: MlpModel, X) -> np.ndarray:
    cfg = model.config
    h = np.asarray(X, dtype=np.float64)
    if cfg.batchnorm == BN_AFTER_INPUT:
        h = _bn_forward_infer(model.bn_sites[0], h)
    for layer in range(cfg.n_layers):
        z = h @ model.weights[layer] + model.biases[layer]
        if cfg.batchnorm == BN_EVERY_LAYER:
            z = _bn_forward_infer(model.bn_sites[layer], z)
        h = np.maximum(z, 0.0)
    return (h @ model.weights[-1] + model.biases[-1])[:, 0]


def predict_mlp(model: MlpModel, ds: Dataset) -> np.ndarray:
    """Sigmoid scores using running batch-norm statistics."""
    if model.training:
        raise RuntimeError("model is in training mode; finish fitting first")
    if ds.d != model.input_dim:
        raise ValueError(f"dimension mismatch: model {model.input_dim}, data {ds.d}")
    return sigmoid(forward_logits_infer(model, ds.features))
