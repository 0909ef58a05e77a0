"""Representation learning: shallow MLP, KL triplet loss, analytic gradients.

The learnable map is a single-hidden-layer MLP with ReLU (optionally two
hidden layers for the depth ablation) plus a per-frame mixing vector
alpha stored in unconstrained form (``a_raw``, alpha = logistic(a_raw)).

Each training epoch recomputes the semantic distribution from the
*current* learned features, rebuilds the combined distribution, selects
the epoch's triplets from it (selection is detached from gradients), and
descends the hinge loss

    mean over triplets of max(0, KL(f(i)||f(i+)) - KL(f(i)||f(i-)))

one gradient step per pooled anchor batch, in the default "standard"
orientation; "literal" swaps the two KL terms. All gradients are
computed analytically here and are checked against central finite
differences in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data_io import FeatureMatrix, RunConfig
from .similarity import (
    AffinityMatrix,
    TemporalKernel,
    ZeroNormRowError,
    combined_rows,
    semantic_distribution,
    temporal_distribution,
)
from .triplet import Triplet, sample_triplets, stochastic_pool


class DivergenceError(ArithmeticError):
    """A loss or gradient stopped being finite."""


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class TsaModel:
    """MLP weights/biases plus the per-frame mixing parameters."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    a_raw: np.ndarray

    @property
    def W1(self) -> np.ndarray:
        return self.weights[0]

    @property
    def b1(self) -> np.ndarray:
        return self.biases[0]

    @property
    def W2(self) -> np.ndarray:
        return self.weights[1]

    @property
    def b2(self) -> np.ndarray:
        return self.biases[1]

    @property
    def alpha(self) -> np.ndarray:
        """Per-frame mixing weights in (0, 1)."""
        return _sigmoid(self.a_raw)

    @property
    def n_dims(self) -> int:
        return self.weights[0].shape[1]

    def param_items(self) -> list[tuple[str, np.ndarray]]:
        items = []
        for i, (w, b) in enumerate(zip(self.weights, self.biases), start=1):
            items.append((f"W{i}", w))
            items.append((f"b{i}", b))
        items.append(("a_raw", self.a_raw))
        return items

    def copy(self) -> "TsaModel":
        return TsaModel(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.a_raw.copy(),
        )

    def check_finite(self) -> None:
        for name, param in self.param_items():
            if not np.all(np.isfinite(param)):
                raise DivergenceError(f"non-finite values in parameter {name}")


def init_model(
    n_dims: int,
    n_frames: int,
    rng: np.random.Generator,
    hidden_layers: int = 1,
    hidden_width: int | None = None,
    scheme: str = "random",
    X: np.ndarray | None = None,
) -> TsaModel:
    """Build a fresh model; alpha starts at 0.5 (a_raw = 0) either way.

    ``scheme='random'``: uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights,
    zero biases. ``scheme='identity'``: tiled-identity weights with a bias
    shift that keeps every ReLU in its linear region on the given data, so
    the initial map is exactly z = x and training only moves frames the
    loss objects to. Identity needs ``X`` to size the shift.
    """
    width = n_dims if hidden_width is None else int(hidden_width)
    if width < 1:
        raise ValueError("hidden width must be positive")
    dims = [n_dims] + [width] * hidden_layers + [n_dims]
    if scheme == "random":
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            bound = 1.0 / math.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return TsaModel(weights, biases, np.zeros(n_frames))
    if scheme != "identity":
        raise ValueError(f"unknown init scheme {scheme!r}")
    if X is None:
        raise ValueError("identity init needs the feature matrix to size its bias shift")
    weights = [_tiled_identity(fan_out, fan_in) for fan_in, fan_out in zip(dims[:-1], dims[1:])]
    shift = 1.0 + max(0.0, -float(np.min(X @ weights[0].T)))
    biases = [np.full(dims[1], shift)]
    carry = biases[0]
    for w in weights[1:-1]:
        biases.append(np.zeros(w.shape[0]))
        carry = w @ carry
    biases.append(-(weights[-1] @ carry))
    return TsaModel(weights, biases, np.zeros(n_frames))


def _tiled_identity(fan_out: int, fan_in: int) -> np.ndarray:
    """Non-negative matrix composing to the identity across a layer pair.

    Wider layers tile each input coordinate; narrower layers average
    the tiles back (exact identity overall whenever widths >= n_dims).
    """
    w = np.zeros((fan_out, fan_in))
    if fan_out >= fan_in:
        for r in range(fan_out):
            w[r, r % fan_in] = 1.0
    else:
        counts = np.bincount(np.arange(fan_in) % fan_out, minlength=fan_out)
        for c in range(fan_in):
            w[c % fan_out, c] = 1.0 / counts[c % fan_out]
    return w


def forward(model: TsaModel, X: FeatureMatrix | np.ndarray) -> np.ndarray:
    """Map frame features through the MLP: z = W2 relu(W1 x + b1) + b2."""
    values = X.values if isinstance(X, FeatureMatrix) else np.asarray(X, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != model.n_dims:
        raise ValueError(
            f"feature width {values.shape[-1]} does not match model width {model.n_dims}"
        )
    h = values
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        h = h @ w.T + b
        if i < last:
            h = np.maximum(h, 0.0)
    return h


def kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """KL(p || q) = sum p ln(p/q) for strictly positive distributions."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {q.shape}")
    if p.min() <= 0 or q.min() <= 0:
        raise ValueError("KL divergence requires strictly positive entries")
    return float(np.sum(p * (np.log(p) - np.log(q))))


def triplet_loss(
    f_ts: AffinityMatrix | np.ndarray,
    triplets: list[Triplet],
    orientation: str = "standard",
) -> float:
    """Mean hinge of paired KL divergences over the triplet list."""
    if not triplets:
        raise ValueError("empty triplet list")
    rows = f_ts.rows if isinstance(f_ts, AffinityMatrix) else np.asarray(f_ts, dtype=np.float64)
    sign = _orientation_sign(orientation)
    total = 0.0
    for t in triplets:
        gap = kl_divergence(rows[t.anchor], rows[t.positive]) - kl_divergence(
            rows[t.anchor], rows[t.negative]
        )
        total += max(0.0, sign * gap)
    return total / len(triplets)


def _orientation_sign(orientation: str) -> float:
    if orientation == "standard":
        return 1.0
    if orientation == "literal":
        return -1.0
    raise ValueError(f"unknown loss orientation {orientation!r}")


# ---------------------------------------------------------------------------
# Differentiable chain: X -> Z -> cosine kernel -> row PDFs -> mix -> KL hinge
# ---------------------------------------------------------------------------


def _forward_chain(model: TsaModel, X: np.ndarray, ft_rows: np.ndarray, config: RunConfig) -> dict:
    """Run the full pipeline once, caching everything backward() needs."""
    cache: dict = {"X": X, "ft": ft_rows}
    h = X
    pre_acts = []
    layer_inputs = [X]
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        a = h @ w.T + b
        if i < last:
            pre_acts.append(a)
            h = np.maximum(a, 0.0)
            layer_inputs.append(h)
        else:
            h = a
    Z = h
    norms = np.linalg.norm(Z, axis=1)
    if np.any(norms == 0):
        i = int(np.argwhere(norms == 0)[0][0])
        raise ZeroNormRowError(f"learned row {i} collapsed to zero norm")
    U = Z / norms[:, None]
    S = U @ U.T
    K = np.exp((S - 1.0) / config.h)
    sk = K.sum(axis=1)
    FS = K / sk[:, None]
    alpha = _sigmoid(model.a_raw)
    if config.similarity_mode == "combined":
        mixed = alpha[:, None] * ft_rows + (1.0 - alpha[:, None]) * FS
    elif config.similarity_mode == "semantic_only":
        mixed = FS
    else:  # temporal_only
        mixed = ft_rows
    smoothed = mixed + config.kl_smoothing
    su = smoothed.sum(axis=1)
    F = smoothed / su[:, None]
    cache.update(
        pre_acts=pre_acts,
        layer_inputs=layer_inputs,
        Z=Z,
        norms=norms,
        U=U,
        S=S,
        K=K,
        sk=sk,
        FS=FS,
        alpha=alpha,
        su=su,
        F=F,
    )
    return cache


def _loss_and_gradients(
    model: TsaModel, cache: dict, triplets: list[Triplet], config: RunConfig
) -> tuple[float, dict[str, np.ndarray]]:
    """Hinge loss plus analytic gradients for every parameter block."""
    if not triplets:
        raise ValueError("empty triplet list")
    n_t = len(triplets)
    ai = np.array([t.anchor for t in triplets])
    pi = np.array([t.positive for t in triplets])
    ni = np.array([t.negative for t in triplets])
    sign = _orientation_sign(config.loss_orientation)
    F = cache["F"]
    S = cache["S"]

    if config.loss_features == "pdf":
        logF = np.log(F)
        kl_pos = np.einsum("tk,tk->t", F[ai], logF[ai] - logF[pi])
        kl_neg = np.einsum("tk,tk->t", F[ai], logF[ai] - logF[ni])
        gaps = sign * (kl_pos - kl_neg)
        active = gaps > 0
        loss = float(np.maximum(gaps, 0.0).mean())
        coeff = sign * active.astype(np.float64) / n_t
        dF = np.zeros_like(F)
        np.add.at(dF, ai, coeff[:, None] * (logF[ni] - logF[pi]))
        np.add.at(dF, pi, coeff[:, None] * (-F[ai] / F[pi]))
        np.add.at(dF, ni, coeff[:, None] * (F[ai] / F[ni]))
        dS, da_raw = _pdf_chain_to_similarity(model, cache, dF, config)
    else:  # raw cosine-distance triplet loss: no PDFs inside the loss
        gaps = sign * (S[ai, ni] - S[ai, pi])
        active = gaps > 0
        loss = float(np.maximum(gaps, 0.0).mean())
        coeff = sign * active.astype(np.float64) / n_t
        dS = np.zeros_like(S)
        np.add.at(dS, (ai, ni), coeff)
        np.add.at(dS, (ai, pi), -coeff)
        da_raw = np.zeros_like(model.a_raw)

    grads = _similarity_to_params(model, cache, dS)
    grads["a_raw"] = da_raw
    return loss, grads


def _pdf_chain_to_similarity(
    model: TsaModel, cache: dict, dF: np.ndarray, config: RunConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Backpropagate dL/dF through smoothing, mixing, and kernel rows.

    Returns (dL/dS, dL/da_raw).
    """
    F, FS, K, sk, su = cache["F"], cache["FS"], cache["K"], cache["sk"], cache["su"]
    alpha, ft = cache["alpha"], cache["ft"]
    # smoothing renormalization F = (mixed + eps) / su
    d_mixed = (dF - (dF * F).sum(axis=1, keepdims=True)) / su[:, None]
    if config.similarity_mode == "combined":
        d_alpha = ((ft - FS) * d_mixed).sum(axis=1)
        dFS = d_mixed * (1.0 - alpha)[:, None]
        da_raw = d_alpha * alpha * (1.0 - alpha)
    elif config.similarity_mode == "semantic_only":
        dFS = d_mixed
        da_raw = np.zeros_like(model.a_raw)
    else:  # temporal_only: mixed rows are constants
        return np.zeros_like(F), np.zeros_like(model.a_raw)
    # kernel row normalization FS = K / sk
    dK = (dFS - (dFS * FS).sum(axis=1, keepdims=True)) / sk[:, None]
    # K = exp((S - 1)/h)
    return dK * K / config.h, da_raw


def _similarity_to_params(model: TsaModel, cache: dict, dS: np.ndarray) -> dict[str, np.ndarray]:
    """Backpropagate dL/dS through cosine normalization and the MLP."""
    U, norms = cache["U"], cache["norms"]
    dU = (dS + dS.T) @ U
    dZ = (dU - (dU * U).sum(axis=1, keepdims=True) * U) / norms[:, None]
    grads: dict[str, np.ndarray] = {}
    d = dZ
    pre_acts, layer_inputs = cache["pre_acts"], cache["layer_inputs"]
    for layer in reversed(range(len(model.weights))):
        grads[f"W{layer + 1}"] = d.T @ layer_inputs[layer]
        grads[f"b{layer + 1}"] = d.sum(axis=0)
        if layer > 0:
            d = (d @ model.weights[layer]) * (pre_acts[layer - 1] > 0)
    return grads


def combined_distribution(
    model: TsaModel,
    X: FeatureMatrix | np.ndarray,
    config: RunConfig,
    positions: np.ndarray | None = None,
) -> AffinityMatrix:
    """The distribution the loss and triplet selection see at the current parameters.

    Built from the public operations (not the gradient engine), so it
    doubles as an independent reference path in tests.
    """
    values = X.values if isinstance(X, FeatureMatrix) else np.asarray(X, dtype=np.float64)
    n = values.shape[0]
    ft = temporal_distribution(n, TemporalKernel(config.L), positions)
    if config.similarity_mode == "temporal_only":
        rows = ft.rows
        smoothed = rows + config.kl_smoothing
        return AffinityMatrix(smoothed / smoothed.sum(axis=1, keepdims=True), kind="combined")
    fs = semantic_distribution(forward(model, values), config.h)
    if config.similarity_mode == "semantic_only":
        smoothed = fs.rows + config.kl_smoothing
        return AffinityMatrix(smoothed / smoothed.sum(axis=1, keepdims=True), kind="combined")
    rows = combined_rows(fs.rows, ft.rows, model.alpha, config.kl_smoothing)
    return AffinityMatrix(rows, kind="combined")


def training_loss(
    model: TsaModel,
    X: FeatureMatrix | np.ndarray,
    triplets: list[Triplet],
    config: RunConfig,
    positions: np.ndarray | None = None,
) -> float:
    """Loss at the current parameters for a fixed triplet list (public-op path)."""
    if config.loss_features == "pdf":
        f_ts = combined_distribution(model, X, config, positions)
        return triplet_loss(f_ts, triplets, config.loss_orientation)
    values = X.values if isinstance(X, FeatureMatrix) else np.asarray(X, dtype=np.float64)
    from .similarity import cosine_similarity_matrix

    sims = cosine_similarity_matrix(forward(model, values))
    sign = _orientation_sign(config.loss_orientation)
    total = 0.0
    for t in triplets:
        total += max(0.0, sign * (sims[t.anchor, t.negative] - sims[t.anchor, t.positive]))
    return total / len(triplets)


def backward(
    model: TsaModel,
    X: FeatureMatrix | np.ndarray,
    triplets: list[Triplet],
    config: RunConfig,
    positions: np.ndarray | None = None,
) -> dict[str, np.ndarray]:
    """Analytic gradients of the loss for a fixed triplet list.

    Raises DivergenceError if any component is non-finite.
    """
    values = X.values if isinstance(X, FeatureMatrix) else np.asarray(X, dtype=np.float64)
    n = values.shape[0]
    ft = temporal_distribution(n, TemporalKernel(config.L), positions)
    cache = _forward_chain(model, values, ft.rows, config)
    _, grads = _loss_and_gradients(model, cache, triplets, config)
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise DivergenceError(f"non-finite gradient for {name}")
    return grads


@dataclass
class TrainState:
    """Bookkeeping for one training run."""

    epoch: int = 0
    loss_history: list[float] = field(default_factory=list)
    lr: float = 0.0
    bad_steps: int = 0
    rng: np.random.Generator | None = None
    diverged: bool = False


def train(
    X: FeatureMatrix | np.ndarray,
    config: RunConfig,
    positions: np.ndarray | None = None,
    on_epoch=None,
    triplet_sink=None,
) -> tuple[TsaModel, FeatureMatrix, TrainState]:
    """Learn the representation of one video.

    Per epoch: rebuild the combined distribution from the current
    features, pool one anchor per batch-size window, sample that epoch's
    triplets, then take one descent step per anchor batch (the forward
    chain is recomputed before each step so gradients stay exact).
    Steps use an exponentially decayed learning rate, constant within an
    epoch, and decoupled L2 weight decay: every parameter block shrinks
    by 1 - lr*2*weight_decay per step. The recorded epoch loss is the
    mean of its batch losses. Training stops at max_epochs, or once at
    least min_epochs ran and the epoch loss moved by less than
    epsilon_stop for `patience` epochs in a row.

    A non-finite loss or gradient (or a learned row collapsing to zero
    norm, where cosine similarity is undefined) aborts the run and
    returns the last finite parameters with ``state.diverged`` set.

    ``positions`` carries original frame indices when X is a filtered
    subsequence, so temporal distances refer to the unfiltered video.
    ``triplet_sink(epoch, triplets)`` observes each epoch's selection.
    """
    values = X.values if isinstance(X, FeatureMatrix) else np.asarray(X, dtype=np.float64)
    n_frames, n_dims = values.shape
    if config.batch_size > n_frames:
        raise ValueError(
            f"batch_size {config.batch_size} exceeds the {n_frames} frames available"
        )
    master = np.random.default_rng(config.seed)
    model = init_model(
        n_dims,
        n_frames,
        master,
        config.hidden_layers,
        config.hidden_width,
        scheme=config.init_scheme,
        X=values,
    )
    ft = temporal_distribution(n_frames, TemporalKernel(config.L), positions)
    state = TrainState(rng=master, lr=config.learning_rate)
    snapshot = model.copy()
    for epoch in range(1, config.max_epochs + 1):
        lr = config.learning_rate * config.lr_decay ** (epoch - 1)
        shrink = 1.0 - lr * 2.0 * config.weight_decay
        try:
            cache = _forward_chain(model, values, ft.rows, config)
        except ZeroNormRowError:
            state.diverged = True
            break
        pool = stochastic_pool(cache["F"], config.batch_size, master, config.pool_mode)
        triplets = sample_triplets(
            cache["F"], pool, master, config.per_anchor, config.positive_fraction
        )
        if triplet_sink is not None:
            triplet_sink(epoch, triplets)
        snapshot = model.copy()
        batch_losses = []
        try:
            for start in range(0, len(triplets), config.per_anchor):
                batch = triplets[start : start + config.per_anchor]
                if start > 0:
                    cache = _forward_chain(model, values, ft.rows, config)
                loss, grads = _loss_and_gradients(model, cache, batch, config)
                if not math.isfinite(loss) or any(
                    not np.all(np.isfinite(g)) for g in grads.values()
                ):
                    raise DivergenceError("non-finite loss or gradient")
                for name, param in model.param_items():
                    param *= shrink
                    param -= lr * grads[name]
                batch_losses.append(loss)
        except (DivergenceError, ZeroNormRowError):
            state.diverged = True
            model = snapshot  # roll back to the epoch-start parameters
            break
        epoch_loss = float(np.mean(batch_losses))
        state.epoch = epoch
        state.loss_history.append(epoch_loss)
        state.lr = config.learning_rate * config.lr_decay**epoch
        if on_epoch is not None:
            on_epoch(epoch, epoch_loss, lr)
        if len(state.loss_history) >= 2 and (
            abs(state.loss_history[-1] - state.loss_history[-2]) < config.epsilon_stop
        ):
            state.bad_steps += 1
        else:
            state.bad_steps = 0
        if epoch >= config.min_epochs and state.bad_steps >= config.patience:
            break
    final = forward(model, values)
    return model, FeatureMatrix(final), state
