"""From-scratch feed-forward network: forward, backprop, dropout, Adam.

The network is small by design (one model per KPI series): the first hidden
layer fans out to four times the input width, the second tapers to twice the
input width, and a single ReLU output unit predicts the scaled hourly mean.
Inverted dropout sits between the two hidden layers, so inference needs no
rescaling.  Training minimizes the squared error of one example per step.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .preprocess import ScaleParams

MAGIC = b"KPIFMLP1"


class TrainingDivergedError(RuntimeError):
    """Raised when a loss or gradient stops being finite."""


@dataclass
class MlpModel:
    """Layer sizes plus per-layer weight matrices (out x in) and bias vectors."""

    dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    dropout_p: float = 0.1

    @property
    def input_dim(self) -> int:
        return self.dims[0]

    def parameter_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


@dataclass
class TrainConfig:
    epochs: int = 6
    lr: float = 1e-3
    dropout_p: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError(f"dropout_p must be in [0, 1), got {self.dropout_p}")


@dataclass
class AdamState:
    """Bias-corrected Adam with one moment pair per parameter array."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def init_mlp(input_dim: int, seed: int, dropout_p: float = 0.1) -> MlpModel:
    """Fresh network with dims [N, 4N, 2N, 1].

    Weights are uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], biases zero;
    the draw is deterministic for a given seed.
    """
    if input_dim < 1:
        raise ValueError(f"input_dim must be >= 1, got {input_dim}")
    dims = (input_dim, 4 * input_dim, 2 * input_dim, 1)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpModel(dims=dims, weights=weights, biases=biases, dropout_p=dropout_p)


def adam_init(model: MlpModel, lr: float = 1e-3) -> AdamState:
    state = AdamState(lr=lr)
    for w, b in zip(model.weights, model.biases):
        state.m.extend([np.zeros_like(w), np.zeros_like(b)])
        state.v.extend([np.zeros_like(w), np.zeros_like(b)])
    return state


def forward(
    model: MlpModel,
    x: np.ndarray,
    mode: str = "infer",
    rng: np.random.Generator | None = None,
) -> tuple[float, dict]:
    """One pass through the network; returns (output, cache for backprop).

    ReLU follows every affine layer, including the output.  In train mode an
    inverted-dropout multiplier (mask / (1 - p)) is drawn for the first hidden
    activations; in infer mode no unit is dropped.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (model.input_dim,):
        raise ValueError(f"expected input of shape ({model.input_dim},), got {x.shape}")
    if mode not in ("train", "infer"):
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")

    cache: dict = {"x": x, "z": [], "a": [], "dropmul": None}
    a = x
    for layer, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = w @ a + b
        a = np.maximum(z, 0.0)
        cache["z"].append(z)
        if layer == 0 and mode == "train" and model.dropout_p > 0.0:
            if rng is None:
                raise ValueError("train-mode forward with dropout needs an rng")
            keep = 1.0 - model.dropout_p
            dropmul = (rng.random(a.shape) < keep) / keep
            cache["dropmul"] = dropmul
            a = a * dropmul
        cache["a"].append(a)
    return float(a[0]), cache


def backward(model: MlpModel, cache: dict, y: float, target: float) -> list[np.ndarray]:
    """Gradients of (y - target)^2, ordered [W0, b0, W1, b1, ...]."""
    grads: list[np.ndarray] = [np.empty(0)] * (2 * len(model.weights))
    delta = np.array([2.0 * (y - target)])
    for layer in range(len(model.weights) - 1, -1, -1):
        dz = delta * (cache["z"][layer] > 0.0)
        below = cache["a"][layer - 1] if layer > 0 else cache["x"]
        grads[2 * layer] = np.outer(dz, below)
        grads[2 * layer + 1] = dz
        if layer > 0:
            delta = model.weights[layer].T @ dz
            if layer == 1 and cache["dropmul"] is not None:
                delta = delta * cache["dropmul"]
    return grads


def model_parameters(model: MlpModel) -> list[np.ndarray]:
    """Flat parameter list [W0, b0, W1, b1, ...] matching gradient order."""
    return [p for wb in zip(model.weights, model.biases) for p in wb]


def adam_step(state: AdamState, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
    """Standard bias-corrected Adam update, in place on ``params``."""
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    state.step += 1
    t = state.step
    for i, (p, g) in enumerate(zip(params, grads)):
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g
        m_hat = state.m[i] / (1.0 - state.beta1**t)
        v_hat = state.v[i] / (1.0 - state.beta2**t)
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


def train_step(
    model: MlpModel,
    adam: AdamState,
    x: np.ndarray,
    target: float,
    rng: np.random.Generator | None = None,
) -> float:
    """One forward/backward/update on a single example; returns its loss."""
    y, cache = forward(model, x, mode="train", rng=rng)
    loss = (y - target) ** 2
    grads = backward(model, cache, y, target)
    if not np.isfinite(loss) or any(not np.all(np.isfinite(g)) for g in grads):
        raise TrainingDivergedError(f"non-finite loss/gradient (loss={loss!r}, target={target!r})")
    adam_step(adam, model_parameters(model), grads)
    return loss


def train(
    model: MlpModel,
    adam: AdamState,
    dataset: list,
    cfg: TrainConfig,
) -> list[float]:
    """Run exactly ``cfg.epochs`` passes over the dataset, one Adam step per example.

    Examples are visited in a freshly shuffled order each epoch; the shuffle
    and the dropout masks both come from one seeded generator, so training is
    reproducible.  Returns the mean loss of each epoch.
    """
    if not dataset:
        raise ValueError("cannot train on an empty dataset")
    rng = np.random.default_rng(cfg.seed)
    inputs = [ex.x.to_array() for ex in dataset]
    targets = [ex.target for ex in dataset]
    epoch_losses: list[float] = []
    for _ in range(cfg.epochs):
        order = rng.permutation(len(dataset))
        total = 0.0
        for i in order:
            total += train_step(model, adam, inputs[i], targets[i], rng)
        epoch_losses.append(total / len(dataset))
    return epoch_losses


def predict(model: MlpModel, x: np.ndarray) -> float:
    """Deterministic inference-mode output (scaled space, >= 0)."""
    y, _ = forward(model, x, mode="infer")
    return y


# --- persistence ---------------------------------------------------------
# Flat self-describing file: magic tag, layer dims, dropout rate, the two
# scale-parameter quadruples, then row-major little-endian float64 arrays.


def save_model(path: str | Path, model: MlpModel, mean_scale: ScaleParams, last_scale: ScaleParams) -> None:
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(model.dims)))
        f.write(struct.pack(f"<{len(model.dims)}I", *model.dims))
        f.write(struct.pack("<d", model.dropout_p))
        for sp in (mean_scale, last_scale):
            f.write(struct.pack("<4d", sp.c, sp.d, sp.lo, sp.hi))
        for w, b in zip(model.weights, model.biases):
            f.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_model(path: str | Path) -> tuple[MlpModel, ScaleParams, ScaleParams]:
    with open(path, "rb") as f:
        magic = f.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"{path}: not a model file (bad tag {magic!r})")
        (n_dims,) = struct.unpack("<I", f.read(4))
        dims = struct.unpack(f"<{n_dims}I", f.read(4 * n_dims))
        (dropout_p,) = struct.unpack("<d", f.read(8))
        scales = []
        for _ in range(2):
            c, d, lo, hi = struct.unpack("<4d", f.read(32))
            scales.append(ScaleParams(c=c, d=d, lo=lo, hi=hi))
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            w = np.frombuffer(f.read(8 * fan_out * fan_in), dtype="<f8").reshape(fan_out, fan_in)
            b = np.frombuffer(f.read(8 * fan_out), dtype="<f8")
            weights.append(w.astype(float))
            biases.append(b.astype(float))
        trailing = f.read(1)
        if trailing:
            raise ValueError(f"{path}: trailing bytes after parameter arrays")
    model = MlpModel(dims=tuple(dims), weights=weights, biases=biases, dropout_p=dropout_p)
    return model, scales[0], scales[1]
