"""Context-reconstruction bottleneck network.

A frame's 420-dim feature vector is trained to reconstruct up to 5 randomly
chosen neighboring frames within +-w (offset 0 excluded, never across
sessions). After training, the activation of the narrow hidden layer is the
behavior embedding.
"""

import math
from dataclasses import dataclass

import numpy as np

BOTTLENECK_DIM = 64
DEFAULT_LAYERS = [420, 300, 200, 64, 200, 300, 420]
SMALL_LAYERS = [420, 200, 64, 200, 420]
DEFAULT_CONTEXT_W = 6
DEFAULT_N_CTX = 5


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch):
        super().__init__(f"training loss became non-finite at epoch {epoch}")
        self.epoch = epoch


@dataclass
class TrainingSample:
    input: np.ndarray                 # (d,)
    targets: list                     # 1..n_ctx arrays of shape (d,)
    session_id: str
    k: int
    offsets: tuple


@dataclass
class MlpModel:
    layer_sizes: list
    weights: list                     # weights[i]: (sizes[i], sizes[i+1])
    biases: list                      # biases[i]: (sizes[i+1],)
    bottleneck_index: int
    hidden_activation: str = "tanh"
    output_activation: str = "linear"

    def copy(self):
        return MlpModel(
            layer_sizes=list(self.layer_sizes),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            bottleneck_index=self.bottleneck_index,
            hidden_activation=self.hidden_activation,
            output_activation=self.output_activation,
        )


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 128
    epochs: int = 50
    seed: int = 0
    optimizer: str = "adam"           # "adam" or "sgd"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.learning_rate < 0 or self.batch_size < 1 or self.epochs < 1:
            raise ValueError("learning_rate must be >= 0, batch_size and epochs >= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


def build_dataset(windows_by_session, w=DEFAULT_CONTEXT_W, n_ctx=DEFAULT_N_CTX, seed=0):
    """Sample context-reconstruction pairs, seeded, once.

    windows_by_session: ordered mapping session_id -> (n_windows, d) array of
    standardized feature vectors. For each frame k the context offsets are
    drawn uniformly without replacement from {-w..w}\\{0} restricted to valid
    indices; sessions with a single window are skipped.
    """
    if w < 1 or n_ctx < 1:
        raise ValueError("w and n_ctx must be >= 1")
    rng = np.random.default_rng(seed)
    samples = []
    for session_id, mat in windows_by_session.items():
        mat = np.asarray(mat, dtype=np.float64)
        n = mat.shape[0]
        if n < 2:
            continue
        for k in range(n):
            candidates = [o for o in range(-w, w + 1)
                          if o != 0 and 0 <= k + o < n]
            take = min(n_ctx, len(candidates))
            chosen = rng.choice(len(candidates), size=take, replace=False)
            offsets = tuple(candidates[int(c)] for c in chosen)
            samples.append(TrainingSample(
                input=mat[k],
                targets=[mat[k + o] for o in offsets],
                session_id=session_id,
                k=k,
                offsets=offsets,
            ))
    return samples


def init_mlp(layer_sizes, seed=0, bottleneck_size=BOTTLENECK_DIM):
    """Glorot-uniform weights, zero biases; deterministic per seed."""
    layer_sizes = list(layer_sizes)
    if len(layer_sizes) < 3:
        raise ValueError("need at least one hidden layer")
    if layer_sizes[0] != layer_sizes[-1]:
        raise ValueError("input and output dimensions must match")
    hidden = layer_sizes[1:-1]
    if bottleneck_size not in hidden:
        raise ValueError(
            f"no {bottleneck_size}-unit bottleneck layer in {layer_sizes}")
    bottleneck_index = 1 + hidden.index(bottleneck_size)

    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(layer_sizes=layer_sizes, weights=weights, biases=biases,
                    bottleneck_index=bottleneck_index)


def forward(model, x):
    """Return (output, activations); activations[i] is the post-activation
    value of layer i (activations[0] = x, last entry = linear output).

    Accepts a single vector or a (batch, d) matrix.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.layer_sizes[0]:
        raise ValueError(
            f"input dim {x.shape[-1]} != model input {model.layer_sizes[0]}")
    n_layers = len(model.weights)
    activations = [x]
    a = x
    for i in range(n_layers):
        z = a @ model.weights[i] + model.biases[i]
        a = z if i == n_layers - 1 else np.tanh(z)
        activations.append(a)
    return a, activations


def embed(model, x):
    """Bottleneck-layer activation (post-tanh): the behavior representation."""
    _, activations = forward(model, x)
    return activations[model.bottleneck_index]


def _backprop(model, activations, delta_out):
    """Gradients for given output-layer error term dL/d(output)."""
    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.weights)
    delta = delta_out
    for i in reversed(range(len(model.weights))):
        a_prev = activations[i]
        if a_prev.ndim == 1:
            grads_w[i] = np.outer(a_prev, delta)
            grads_b[i] = delta.copy()
        else:
            grads_w[i] = a_prev.T @ delta
            grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * (1.0 - activations[i] ** 2)
    return grads_w, grads_b


def loss_and_grad(model, sample):
    """MSE averaged over targets and dimensions, with backprop gradients."""
    y, activations = forward(model, sample.input)
    d = y.shape[-1]
    n_t = len(sample.targets)
    loss = 0.0
    err = np.zeros_like(y)
    for t in sample.targets:
        diff = y - t
        loss += np.mean(diff ** 2)
        err += diff
    loss /= n_t
    delta_out = 2.0 * err / (d * n_t)
    grads_w, grads_b = _backprop(model, activations, delta_out)
    return loss, (grads_w, grads_b)


def _pack(dataset):
    """Precompute per-sample mean target and target-variance offset.

    MSE against each target averaged over targets equals MSE against the
    target mean plus a constant variance term, which lets training batch the
    forward/backward passes.
    """
    x = np.stack([s.input for s in dataset])
    t_mean = np.empty_like(x)
    var_term = np.empty(len(dataset))
    for i, s in enumerate(dataset):
        ts = np.stack(s.targets)
        m = ts.mean(axis=0)
        t_mean[i] = m
        var_term[i] = np.mean((ts - m) ** 2)
    return x, t_mean, var_term


def train(model, dataset, config):
    """Mini-batch training; returns (trained model copy, per-epoch mean loss)."""
    if not dataset:
        raise ValueError("empty dataset")
    model = model.copy()
    x_all, t_all, var_all = _pack(dataset)
    n = x_all.shape[0]
    rng = np.random.default_rng(config.seed)

    if config.optimizer == "adam":
        m_w = [np.zeros_like(w) for w in model.weights]
        v_w = [np.zeros_like(w) for w in model.weights]
        m_b = [np.zeros_like(b) for b in model.biases]
        v_b = [np.zeros_like(b) for b in model.biases]
        step = 0

    loss_history = []
    for epoch in range(config.epochs):
        perm = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = perm[start:start + config.batch_size]
            xb, tb = x_all[idx], t_all[idx]
            bsz = idx.size
            y, activations = forward(model, xb)
            diff = y - tb
            # divergence shows up as inf/nan here; don't warn on the way
            with np.errstate(over="ignore", invalid="ignore"):
                batch_loss = np.mean(diff ** 2) + np.mean(var_all[idx])
            if not np.isfinite(batch_loss):
                raise TrainingDiverged(epoch)
            epoch_loss += batch_loss * bsz
            d = y.shape[-1]
            delta_out = 2.0 * diff / (d * bsz)
            grads_w, grads_b = _backprop(model, activations, delta_out)

            if config.optimizer == "adam":
                step += 1
                b1, b2, eps = config.adam_beta1, config.adam_beta2, config.adam_eps
                corr1 = 1.0 - b1 ** step
                corr2 = 1.0 - b2 ** step
                for i in range(len(model.weights)):
                    for param, grad, m, v in (
                            (model.weights[i], grads_w[i], m_w[i], v_w[i]),
                            (model.biases[i], grads_b[i], m_b[i], v_b[i])):
                        m *= b1
                        m += (1.0 - b1) * grad
                        v *= b2
                        v += (1.0 - b2) * grad ** 2
                        param -= config.learning_rate * (m / corr1) / (
                            np.sqrt(v / corr2) + eps)
            else:
                for i in range(len(model.weights)):
                    model.weights[i] -= config.learning_rate * grads_w[i]
                    model.biases[i] -= config.learning_rate * grads_b[i]
        loss_history.append(epoch_loss / n)
    return model, loss_history


def gradient_check(layer_sizes, seed, bottleneck_size=None, n_coords=None,
                   fd_eps=1e-5):
    """Max relative error between analytic and central-difference gradients.

    Builds a random model and sample. Checks every parameter coordinate, or
    a seeded random subset of n_coords for large nets. Relative error uses a
    1e-4 denominator floor so near-zero gradients are compared absolutely.
    """
    if bottleneck_size is None:
        bottleneck_size = min(layer_sizes[1:-1])
    rng = np.random.default_rng(seed)
    model = init_mlp(layer_sizes, seed=seed, bottleneck_size=bottleneck_size)
    d = layer_sizes[0]
    sample = TrainingSample(
        input=rng.standard_normal(d),
        targets=[rng.standard_normal(d) for _ in range(int(rng.integers(1, 6)))],
        session_id="gradcheck", k=0, offsets=())
    _, (grads_w, grads_b) = loss_and_grad(model, sample)

    params = [(model.weights[i], grads_w[i]) for i in range(len(model.weights))]
    params += [(model.biases[i], grads_b[i]) for i in range(len(model.biases))]
    coords = []
    for pi, (arr, _) in enumerate(params):
        for flat in range(arr.size):
            coords.append((pi, flat))
    if n_coords is not None and n_coords < len(coords):
        pick = rng.choice(len(coords), size=n_coords, replace=False)
        coords = [coords[int(i)] for i in pick]

    def sample_loss():
        y, _ = forward(model, sample.input)
        return sum(np.mean((y - t) ** 2) for t in sample.targets) / len(sample.targets)

    max_err = 0.0
    for pi, flat in coords:
        arr, grad = params[pi]
        orig = arr.flat[flat]
        arr.flat[flat] = orig + fd_eps
        lo_plus = sample_loss()
        arr.flat[flat] = orig - fd_eps
        lo_minus = sample_loss()
        arr.flat[flat] = orig
        fd = (lo_plus - lo_minus) / (2.0 * fd_eps)
        g = grad.flat[flat]
        err = abs(g - fd) / max(abs(g), abs(fd), 1e-4)
        max_err = max(max_err, err)
    return max_err
