"""Forecasting models: a linear baseline, a single-hidden-layer network,
LSTM and GRU recurrent models, and the dilated-convolution network with
categorical embeddings.

All models share the same external surface: ``construct -> fit(train,
validation) -> predict(dataset)`` with ``get_params`` exposing the
configuration.  Neural models are built on the autodiff tensors and train
through :mod:`hybridcast.training`; the linear model fits in closed form.
Predictions are always returned on the raw target scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from . import autodiff as ad
from .checkpoint import load_params, save_params
from .datapipe import SupervisedDataset

__all__ = [
    "EmbeddingSpec",
    "DeepTCNConfig",
    "MLPConfig",
    "RnnConfig",
    "LinearConfig",
    "LinearForecaster",
    "BPNNForecaster",
    "LSTMForecaster",
    "GRUForecaster",
    "DeepTCNForecaster",
    "build_model",
    "MODEL_NAMES",
]

# Per-variable embedding widths, keyed like SupervisedDataset.categorical_names.
DEFAULT_EMBEDDING_SIZES = {"weather": 2, "month": 2, "day_of_week": 2, "hour": 4}


@dataclass(frozen=True)
class EmbeddingSpec:
    sizes: dict = field(default_factory=lambda: dict(DEFAULT_EMBEDDING_SIZES))

    def total(self, names) -> int:
        return sum(self.sizes[n] for n in names)


@dataclass(frozen=True)
class DeepTCNConfig:
    n_blocks: int = 4
    dilations: tuple = (1, 2, 4, 8)
    channels: tuple = (32, 32, 16, 16)
    kernel_size: int = 2
    embeddings: EmbeddingSpec = field(default_factory=EmbeddingSpec)

    def __post_init__(self):
        if not (len(self.dilations) == len(self.channels) == self.n_blocks):
            raise ValueError("dilations and channels must both have n_blocks entries")
        if self.kernel_size < 1 or min(self.dilations) < 1 or min(self.channels) < 1:
            raise ValueError("kernel size, dilations and channels must be positive")


@dataclass(frozen=True)
class MLPConfig:
    hidden: int = 32
    embeddings: EmbeddingSpec = field(default_factory=EmbeddingSpec)


@dataclass(frozen=True)
class RnnConfig:
    hidden: int = 64
    # Squash the head through a sigmoid, matching the classical gate-network
    # write-up literally; off by default because targets are unbounded.
    literal_output_sigmoid: bool = False
    embeddings: EmbeddingSpec = field(default_factory=EmbeddingSpec)


@dataclass(frozen=True)
class LinearConfig:
    ridge: float = 1e-8


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed))


class _EmbeddingFront:
    """Trainable per-variable lookup tables shared by the neural models.

    Vocabulary sizes come from the dataset; the weather table includes the
    reserved unknown slot, so held-out categories stay in range.
    """

    def __init__(self, rng, names, cardinalities, spec: EmbeddingSpec):
        self.names = list(names)
        self.tables = {}
        for name, card in zip(names, cardinalities):
            width = spec.sizes[name]
            self.tables[name] = ad.init_uniform(rng, (card, width), 0.05)
        self.width = spec.total(names)

    def parameters(self):
        return {f"embed.{name}": self.tables[name] for name in self.names}

    def forward(self, x_cat: np.ndarray) -> ad.Tensor:
        """Codes [B, T, K] -> dense features [B, T, sum(widths)]."""
        parts = [
            ad.embedding_lookup(self.tables[name], x_cat[:, :, k])
            for k, name in enumerate(self.names)
        ]
        return ad.concat(parts, axis=2)


class _NeuralForecaster:
    """Shared train/predict plumbing for the gradient-trained models."""

    def __init__(self):
        self.history_ = None
        self._train_stats = None  # (target_mean, target_std) captured at fit

    def parameters(self) -> dict:
        raise NotImplementedError

    def forward(self, x_num: np.ndarray, x_cat: np.ndarray) -> ad.Tensor:
        raise NotImplementedError

    def get_params(self) -> dict:
        return {"config": asdict(self.config), "seed": self.seed}

    def fit(self, train: SupervisedDataset, validation: SupervisedDataset | None = None,
            train_config=None):
        from .training import TrainConfig, train_model

        config = train_config or TrainConfig(seed=self.seed)
        self._train_stats = (train.target_mean, train.target_std)
        self.history_ = train_model(self, train, validation, config)
        return self

    def predict(self, dataset: SupervisedDataset, batch_size: int = 256) -> np.ndarray:
        """Raw-scale point forecasts."""
        if self._train_stats is None:
            self._train_stats = (dataset.target_mean, dataset.target_std)
        mean, std = self._train_stats
        out = np.empty(len(dataset))
        for start in range(0, len(dataset), batch_size):
            stop = min(start + batch_size, len(dataset))
            pred = self.forward(dataset.x_num[start:stop], dataset.x_cat[start:stop])
            out[start:stop] = pred.data * std + mean
        return out

    def save(self, path) -> None:
        save_params(path, {k: v.data for k, v in self.parameters().items()})

    def load(self, path) -> None:
        stored = load_params(path)
        params = self.parameters()
        if set(stored) != set(params):
            raise ValueError("checkpoint parameter names do not match the model")
        for name, tensor in params.items():
            if stored[name].shape != tensor.data.shape:
                raise ValueError(f"checkpoint shape mismatch for {name}")
            tensor.data = stored[name]


# ---------------------------------------------------------------------------
# linear baseline


class LinearForecaster:
    """Least squares on flattened windows with one-hot categoricals.

    The normal equations get a small ridge damping so collinear one-hot
    blocks cannot make them singular.
    """

    def __init__(self, dataset_spec: SupervisedDataset, config: LinearConfig = LinearConfig(),
                 seed: int = 0):
        self.config = config
        self.seed = seed
        self.cat_cardinalities = list(dataset_spec.cat_cardinalities)
        self.cat_names = list(dataset_spec.categorical_names)
        self.coef_ = None
        self.history_ = None

    def get_params(self) -> dict:
        return {"config": asdict(self.config), "seed": self.seed}

    def _design(self, dataset: SupervisedDataset) -> np.ndarray:
        n, t, _ = dataset.x_num.shape
        blocks = [np.ones((n, 1)), dataset.x_num.reshape(n, -1)]
        for k, (name, card) in enumerate(zip(self.cat_names, self.cat_cardinalities)):
            codes = dataset.x_cat[:, :, k]
            # The weather cardinality includes the reserved unknown slot,
            # which one-hot encodes to the all-zero row; calendar fields
            # have no unknown slot.
            width = card - 1 if name == "weather" else card
            onehot = np.zeros((n, t, width))
            rows, cols = np.nonzero(codes < width)
            onehot[rows, cols, codes[rows, cols]] = 1.0
            blocks.append(onehot.reshape(n, -1))
        return np.hstack(blocks)

    def fit(self, train: SupervisedDataset, validation=None, train_config=None):
        X = self._design(train)
        y = train.y
        gram = X.T @ X
        gram[np.diag_indices_from(gram)] += self.config.ridge
        self.coef_ = np.linalg.solve(gram, X.T @ y)
        return self

    def predict(self, dataset: SupervisedDataset) -> np.ndarray:
        if self.coef_ is None:
            raise RuntimeError("model is not fit")
        return self._design(dataset) @ self.coef_

    def save(self, path) -> None:
        save_params(path, {"coef": self.coef_})

    def load(self, path) -> None:
        self.coef_ = load_params(path)["coef"]


# ---------------------------------------------------------------------------
# single-hidden-layer network


class BPNNForecaster(_NeuralForecaster):
    """One sigmoid hidden layer over the flattened window, linear output."""

    def __init__(self, dataset_spec: SupervisedDataset, config: MLPConfig = MLPConfig(),
                 seed: int = 0):
        super().__init__()
        self.config = config
        self.seed = seed
        rng = _rng(seed)
        names = dataset_spec.categorical_names
        self.embeddings = _EmbeddingFront(rng, names, dataset_spec.cat_cardinalities,
                                          config.embeddings)
        t = dataset_spec.history
        c = dataset_spec.x_num.shape[2]
        fan_in = t * (c + self.embeddings.width)
        self.w_hidden = ad.init_uniform_fan_in(rng, (config.hidden, fan_in), fan_in)
        self.b_hidden = ad.init_uniform_fan_in(rng, (config.hidden,), fan_in)
        self.w_out = ad.init_uniform_fan_in(rng, (1, config.hidden), config.hidden)
        self.b_out = ad.init_uniform_fan_in(rng, (1,), config.hidden)

    def parameters(self) -> dict:
        params = dict(self.embeddings.parameters())
        params.update({
            "hidden.w": self.w_hidden, "hidden.b": self.b_hidden,
            "out.w": self.w_out, "out.b": self.b_out,
        })
        return params

    def forward(self, x_num: np.ndarray, x_cat: np.ndarray) -> ad.Tensor:
        b, t, _ = x_num.shape
        emb = self.embeddings.forward(x_cat)  # [B, T, E]
        features = ad.concat([ad.tensor(x_num), emb], axis=2)
        flat = ad.reshape(features, (b, t * features.shape[2]))
        hidden = ad.sigmoid(ad.affine(flat, self.w_hidden, self.b_hidden))
        out = ad.affine(hidden, self.w_out, self.b_out)
        return ad.reshape(out, (b,))


# ---------------------------------------------------------------------------
# recurrent models


class LSTMForecaster(_NeuralForecaster):
    """Gated recurrent model with forget/input/output gates and a cell
    state, unrolled over the window; dense head on the final hidden state."""

    def __init__(self, dataset_spec: SupervisedDataset, config: RnnConfig = RnnConfig(),
                 seed: int = 0):
        super().__init__()
        self.config = config
        self.seed = seed
        rng = _rng(seed)
        names = dataset_spec.categorical_names
        self.embeddings = _EmbeddingFront(rng, names, dataset_spec.cat_cardinalities,
                                          config.embeddings)
        c = dataset_spec.x_num.shape[2] + self.embeddings.width
        h = config.hidden
        fan_in = h + c
        self.gates = {}
        for gate in ("f", "i", "c", "o"):
            self.gates[gate] = (
                ad.init_uniform_fan_in(rng, (h, fan_in), fan_in),
                ad.init_uniform_fan_in(rng, (h,), fan_in),
            )
        self.w_head = ad.init_uniform_fan_in(rng, (1, h), h)
        self.b_head = ad.init_uniform_fan_in(rng, (1,), h)

    def parameters(self) -> dict:
        params = dict(self.embeddings.parameters())
        for gate, (w, bias) in self.gates.items():
            params[f"gate_{gate}.w"] = w
            params[f"gate_{gate}.b"] = bias
        params["head.w"] = self.w_head
        params["head.b"] = self.b_head
        return params

    def step(self, x_t: ad.Tensor, h_prev: ad.Tensor, c_prev: ad.Tensor):
        joint = ad.concat([h_prev, x_t], axis=1)
        f = ad.sigmoid(ad.affine(joint, *self.gates["f"]))
        i = ad.sigmoid(ad.affine(joint, *self.gates["i"]))
        c_hat = ad.tanh(ad.affine(joint, *self.gates["c"]))
        c_t = ad.add(ad.mul(c_prev, f), ad.mul(i, c_hat))
        o = ad.sigmoid(ad.affine(joint, *self.gates["o"]))
        h_t = ad.mul(o, ad.tanh(c_t))
        return h_t, c_t

    def forward(self, x_num: np.ndarray, x_cat: np.ndarray) -> ad.Tensor:
        b, t, _ = x_num.shape
        emb = self.embeddings.forward(x_cat)
        features = ad.concat([ad.tensor(x_num), emb], axis=2)  # [B, T, C]
        h = ad.tensor(np.zeros((b, self.config.hidden)))
        c = ad.tensor(np.zeros((b, self.config.hidden)))
        for ti in range(t):
            x_t = ad.select_index(features, ti, axis=1)
            h, c = self.step(x_t, h, c)
        out = ad.affine(h, self.w_head, self.b_head)
        if self.config.literal_output_sigmoid:
            out = ad.sigmoid(out)
        return ad.reshape(out, (b,))


class GRUForecaster(_NeuralForecaster):
    """Recurrent model with update and reset gates (no gate biases);
    the new state interpolates between the previous state and the
    candidate, weighted by the update gate."""

    def __init__(self, dataset_spec: SupervisedDataset, config: RnnConfig = RnnConfig(),
                 seed: int = 0):
        super().__init__()
        self.config = config
        self.seed = seed
        rng = _rng(seed)
        names = dataset_spec.categorical_names
        self.embeddings = _EmbeddingFront(rng, names, dataset_spec.cat_cardinalities,
                                          config.embeddings)
        c = dataset_spec.x_num.shape[2] + self.embeddings.width
        h = config.hidden
        fan_in = h + c
        self.w_reset = ad.init_uniform_fan_in(rng, (h, fan_in), fan_in)
        self.w_update = ad.init_uniform_fan_in(rng, (h, fan_in), fan_in)
        self.w_cand = ad.init_uniform_fan_in(rng, (h, fan_in), fan_in)
        self.w_head = ad.init_uniform_fan_in(rng, (1, h), h)
        self.b_head = ad.init_uniform_fan_in(rng, (1,), h)
        self._zero_gate_bias = ad.tensor(np.zeros(h))

    def parameters(self) -> dict:
        params = dict(self.embeddings.parameters())
        params.update({
            "reset.w": self.w_reset, "update.w": self.w_update, "cand.w": self.w_cand,
            "head.w": self.w_head, "head.b": self.b_head,
        })
        return params

    def step(self, x_t: ad.Tensor, h_prev: ad.Tensor) -> ad.Tensor:
        joint = ad.concat([h_prev, x_t], axis=1)
        zero = self._zero_gate_bias
        r = ad.sigmoid(ad.affine(joint, self.w_reset, zero))
        z = ad.sigmoid(ad.affine(joint, self.w_update, zero))
        gated = ad.concat([ad.mul(r, h_prev), x_t], axis=1)
        h_hat = ad.tanh(ad.affine(gated, self.w_cand, zero))
        keep = ad.shift(ad.neg(z), 1.0)  # 1 - z
        return ad.add(ad.mul(keep, h_prev), ad.mul(z, h_hat))

    def forward(self, x_num: np.ndarray, x_cat: np.ndarray) -> ad.Tensor:
        b, t, _ = x_num.shape
        emb = self.embeddings.forward(x_cat)
        features = ad.concat([ad.tensor(x_num), emb], axis=2)
        h = ad.tensor(np.zeros((b, self.config.hidden)))
        for ti in range(t):
            x_t = ad.select_index(features, ti, axis=1)
            h = self.step(x_t, h)
        out = ad.affine(h, self.w_head, self.b_head)
        if self.config.literal_output_sigmoid:
            out = ad.sigmoid(out)
        return ad.reshape(out, (b,))


# ---------------------------------------------------------------------------
# dilated convolution network


class _TcnBlock:
    """Two weight-normalized causal dilated convolutions with an inner
    ReLU, added to the (1x1-projected when channels differ) input, then a
    second ReLU."""

    def __init__(self, rng, c_in: int, c_out: int, kernel_size: int, dilation: int,
                 name: str):
        self.dilation = dilation
        self.name = name
        fan1 = c_in * kernel_size
        self.v1 = ad.init_uniform_fan_in(rng, (c_out, c_in, kernel_size), fan1)
        self.g1 = _init_gain(self.v1)
        fan2 = c_out * kernel_size
        self.v2 = ad.init_uniform_fan_in(rng, (c_out, c_out, kernel_size), fan2)
        self.g2 = _init_gain(self.v2)
        if c_in != c_out:
            self.proj = ad.init_uniform_fan_in(rng, (c_out, c_in, 1), c_in)
        else:
            self.proj = None

    def parameters(self) -> dict:
        params = {
            f"{self.name}.conv1.v": self.v1, f"{self.name}.conv1.g": self.g1,
            f"{self.name}.conv2.v": self.v2, f"{self.name}.conv2.g": self.g2,
        }
        if self.proj is not None:
            params[f"{self.name}.proj"] = self.proj
        return params

    def forward(self, x: ad.Tensor) -> ad.Tensor:
        k1 = ad.weight_norm_apply(self.v1, self.g1)
        inner = ad.relu(ad.conv1d_causal(x, k1, self.dilation))
        k2 = ad.weight_norm_apply(self.v2, self.g2)
        residual_path = ad.conv1d_causal(inner, k2, self.dilation)
        skip = x if self.proj is None else ad.conv1d_causal(x, self.proj, 1)
        return ad.relu(ad.add(skip, residual_path))


def _init_gain(v: ad.Tensor) -> ad.Tensor:
    # Start with the reparameterized weights equal to their raw values.
    flat = v.data.reshape(v.data.shape[0], -1)
    return ad.Tensor(np.sqrt((flat * flat).sum(axis=1)), requires_grad=True)


class DeepTCNForecaster(_NeuralForecaster):
    """Stacked causal dilated convolution blocks over embedded categorical
    plus numeric channels; a dense head reads the last timestep."""

    def __init__(self, dataset_spec: SupervisedDataset, config: DeepTCNConfig = DeepTCNConfig(),
                 seed: int = 0):
        super().__init__()
        self.config = config
        self.seed = seed
        rng = _rng(seed)
        names = dataset_spec.categorical_names
        self.embeddings = _EmbeddingFront(rng, names, dataset_spec.cat_cardinalities,
                                          config.embeddings)
        c_in = dataset_spec.x_num.shape[2] + self.embeddings.width
        self.blocks = []
        for b, (c_out, dilation) in enumerate(zip(config.channels, config.dilations), 1):
            self.blocks.append(
                _TcnBlock(rng, c_in, c_out, config.kernel_size, dilation, f"block{b}")
            )
            c_in = c_out
        self.w_head = ad.init_uniform_fan_in(rng, (1, c_in), c_in)
        self.b_head = ad.init_uniform_fan_in(rng, (1,), c_in)

    @property
    def receptive_field(self) -> int:
        k = self.config.kernel_size
        return 1 + 2 * (k - 1) * sum(self.config.dilations)

    def parameters(self) -> dict:
        params = dict(self.embeddings.parameters())
        for block in self.blocks:
            params.update(block.parameters())
        params["head.w"] = self.w_head
        params["head.b"] = self.b_head
        return params

    def forward(self, x_num: np.ndarray, x_cat: np.ndarray) -> ad.Tensor:
        b = x_num.shape[0]
        emb = self.embeddings.forward(x_cat)  # [B, T, E]
        features = ad.concat([ad.tensor(x_num), emb], axis=2)
        z = ad.transpose(features, (0, 2, 1))  # [B, C, T]
        for block in self.blocks:
            z = block.forward(z)
        last = ad.select_index(z, -1, axis=2)  # [B, C]
        out = ad.affine(last, self.w_head, self.b_head)
        return ad.reshape(out, (b,))


# ---------------------------------------------------------------------------
# registry

MODEL_NAMES = ("LR", "BPNN", "LSTM", "GRU", "DeepTCN")


def build_model(name: str, dataset_spec: SupervisedDataset, seed: int = 0, **config_kwargs):
    """Construct a model by registry name with its default configuration."""
    if name == "LR":
        return LinearForecaster(dataset_spec, LinearConfig(**config_kwargs), seed=seed)
    if name == "BPNN":
        return BPNNForecaster(dataset_spec, MLPConfig(**config_kwargs), seed=seed)
    if name == "LSTM":
        return LSTMForecaster(dataset_spec, RnnConfig(**config_kwargs), seed=seed)
    if name == "GRU":
        return GRUForecaster(dataset_spec, RnnConfig(**config_kwargs), seed=seed)
    if name == "DeepTCN":
        return DeepTCNForecaster(dataset_spec, DeepTCNConfig(**config_kwargs), seed=seed)
    raise ValueError(f"unknown model {name!r}")
