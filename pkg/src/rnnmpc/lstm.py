"""Stacked LSTM with a linear read-out for fixed-horizon output prediction.

The network consumes a window of `horizon` sequence slots. Every slot carries
the four channels [C_A, C_R, q, T] in normalized units; the measured output
appears only in the first slot (later slots carry zeros in the output
positions) and serves to initialize the otherwise zero hidden state. The
read-out maps the top layer's final hidden state to the two predicted
outputs. Training minimizes mean absolute error via backpropagation through
time with the ADAM update rule; everything runs on plain numpy arrays so
gradients can be checked against finite differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .sysid import Dataset, Normalization, RegressorWindow

N_OUTPUTS = 2
SLOT_CHANNELS = 4  # [C_A, C_R, q, T] per sequence slot

# The measured output can enter only the first sequence slot (later slots
# zero-padded) or be repeated in every slot; repeating gives each slot direct
# access to the anchoring measurement and fits this plant noticeably better.
LAYOUT_FIRST_SLOT = "output_in_first_slot"
LAYOUT_EVERY_SLOT = "output_in_every_slot"
DEFAULT_LAYOUT = LAYOUT_EVERY_SLOT

DEFAULT_META = {"input_layout": DEFAULT_LAYOUT, "channels": ["C_A", "C_R", "q", "T"]}


def sigmoid(x: np.ndarray) -> np.ndarray:
    # Clipping at +-60 keeps exp() finite; the result is exact to double
    # precision everywhere the gate is not fully saturated.
    return 1.0 / (1.0 + np.exp(-np.clip(x, -60.0, 60.0)))


@dataclass
class LstmLayerParams:
    """One LSTM layer: stacked gate weights acting on [h_prev, input].

    `weights` has shape (4 * hidden, hidden + input) with gate rows ordered
    (input, forget, output, candidate); `biases` has shape (4 * hidden,).
    """

    weights: np.ndarray
    biases: np.ndarray

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=float)
        self.biases = np.asarray(self.biases, dtype=float)
        if self.weights.ndim != 2 or self.weights.shape[0] % 4 != 0:
            raise ValueError(f"gate weights must be (4*hidden, hidden+input), got {self.weights.shape}")
        hidden = self.weights.shape[0] // 4
        if self.weights.shape[1] <= hidden:
            raise ValueError(
                f"weight matrix with {self.weights.shape[1]} columns leaves no input "
                f"columns for hidden size {hidden}"
            )
        if self.biases.shape != (4 * hidden,):
            raise ValueError(f"biases must have shape ({4 * hidden},), got {self.biases.shape}")

    @property
    def hidden_size(self) -> int:
        return self.weights.shape[0] // 4

    @property
    def input_size(self) -> int:
        return self.weights.shape[1] - self.hidden_size

    def _gate(self, idx: int) -> np.ndarray:
        h = self.hidden_size
        return self.weights[idx * h : (idx + 1) * h]

    def _bias(self, idx: int) -> np.ndarray:
        h = self.hidden_size
        return self.biases[idx * h : (idx + 1) * h]

    # Named views onto the stacked storage (shared memory, not copies).
    @property
    def w_i(self) -> np.ndarray:
        return self._gate(0)

    @property
    def w_f(self) -> np.ndarray:
        return self._gate(1)

    @property
    def w_o(self) -> np.ndarray:
        return self._gate(2)

    @property
    def w_c(self) -> np.ndarray:
        return self._gate(3)

    @property
    def b_i(self) -> np.ndarray:
        return self._bias(0)

    @property
    def b_f(self) -> np.ndarray:
        return self._bias(1)

    @property
    def b_o(self) -> np.ndarray:
        return self._bias(2)

    @property
    def b_c(self) -> np.ndarray:
        return self._bias(3)

    @classmethod
    def initialize(
        cls, rng: np.random.Generator, hidden_size: int, input_size: int, forget_bias: float = 1.0
    ) -> "LstmLayerParams":
        """Uniform +-1/sqrt(fan_in) weights, zero biases except the forget gate."""
        fan_in = hidden_size + input_size
        bound = 1.0 / np.sqrt(fan_in)
        weights = rng.uniform(-bound, bound, size=(4 * hidden_size, fan_in))
        biases = np.zeros(4 * hidden_size)
        biases[hidden_size : 2 * hidden_size] = forget_bias
        return cls(weights=weights, biases=biases)


@dataclass
class NetworkParameters:
    """Full model: stacked LSTM layers, affine read-out, and the trained horizon."""

    layers: list[LstmLayerParams]
    readout_weights: np.ndarray
    readout_bias: np.ndarray
    horizon: int
    normalization: Normalization | None = None
    meta: dict = field(default_factory=lambda: dict(DEFAULT_META))

    def __post_init__(self) -> None:
        self.readout_weights = np.asarray(self.readout_weights, dtype=float)
        self.readout_bias = np.asarray(self.readout_bias, dtype=float)
        if not self.layers:
            raise ValueError("network needs at least one LSTM layer")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        expected_in = SLOT_CHANNELS
        for idx, layer in enumerate(self.layers):
            if layer.input_size != expected_in:
                raise ValueError(
                    f"layer {idx} expects input size {layer.input_size}, "
                    f"but receives {expected_in}"
                )
            expected_in = layer.hidden_size
        top = self.layers[-1].hidden_size
        if self.readout_weights.shape != (N_OUTPUTS, top):
            raise ValueError(
                f"readout weights must have shape ({N_OUTPUTS}, {top}), "
                f"got {self.readout_weights.shape}"
            )
        if self.readout_bias.shape != (N_OUTPUTS,):
            raise ValueError(f"readout bias must have shape ({N_OUTPUTS},)")

    @property
    def layout(self) -> str:
        return self.meta.get("input_layout", DEFAULT_LAYOUT)

    def parameter_arrays(self) -> list[np.ndarray]:
        """Flat list of live parameter arrays (mutating them mutates the net)."""
        arrays: list[np.ndarray] = []
        for layer in self.layers:
            arrays.extend([layer.weights, layer.biases])
        arrays.extend([self.readout_weights, self.readout_bias])
        return arrays

    @property
    def hidden_sizes(self) -> tuple[int, ...]:
        return tuple(layer.hidden_size for layer in self.layers)


def initialize_network(
    seed: int,
    n_layers: int,
    hidden_size: int,
    horizon: int,
    forget_bias: float = 1.0,
    normalization: Normalization | None = None,
    layout: str = DEFAULT_LAYOUT,
) -> NetworkParameters:
    if n_layers < 1 or hidden_size < 1:
        raise ValueError("need at least one layer and one hidden node")
    if layout not in (LAYOUT_FIRST_SLOT, LAYOUT_EVERY_SLOT):
        raise ValueError(f"unknown input layout {layout!r}")
    rng = np.random.default_rng(seed)
    layers = []
    input_size = SLOT_CHANNELS
    for _ in range(n_layers):
        layers.append(LstmLayerParams.initialize(rng, hidden_size, input_size, forget_bias))
        input_size = hidden_size
    bound = 1.0 / np.sqrt(hidden_size)
    readout_w = rng.uniform(-bound, bound, size=(N_OUTPUTS, hidden_size))
    readout_b = np.zeros(N_OUTPUTS)
    meta = dict(DEFAULT_META)
    meta["input_layout"] = layout
    return NetworkParameters(
        layers=layers,
        readout_weights=readout_w,
        readout_bias=readout_b,
        horizon=horizon,
        normalization=normalization,
        meta=meta,
    )


def cell_step(params: LstmLayerParams, h_prev, c_prev, inputs) -> tuple[np.ndarray, np.ndarray]:
    """One LSTM cell update: gates from [h_prev, input], then state and output.

    Accepts single vectors or batches (leading dimension shared by all three
    arguments); returns (h, c) with matching shapes.
    """
    h_prev = np.asarray(h_prev, dtype=float)
    c_prev = np.asarray(c_prev, dtype=float)
    inputs = np.asarray(inputs, dtype=float)
    single = h_prev.ndim == 1
    h2 = np.atleast_2d(h_prev)
    c2 = np.atleast_2d(c_prev)
    x2 = np.atleast_2d(inputs)
    hid = params.hidden_size
    if h2.shape[1] != hid or x2.shape[1] != params.input_size:
        raise ValueError(
            f"cell_step shape mismatch: hidden {h2.shape[1]} vs {hid}, "
            f"input {x2.shape[1]} vs {params.input_size}"
        )
    z = np.concatenate([h2, x2], axis=1)
    act = z @ params.weights.T + params.biases
    gi = sigmoid(act[:, :hid])
    gf = sigmoid(act[:, hid : 2 * hid])
    go = sigmoid(act[:, 2 * hid : 3 * hid])
    cand = np.tanh(act[:, 3 * hid :])
    c = gf * c2 + gi * cand
    h = go * np.tanh(c)
    if single:
        return h[0], c[0]
    return h, c


def assemble_slots(y0: np.ndarray, u_seq: np.ndarray, layout: str = DEFAULT_LAYOUT) -> np.ndarray:
    """Build the (batch, horizon, 4) slot tensor from normalized window parts."""
    y0 = np.atleast_2d(np.asarray(y0, dtype=float))
    u_seq = np.asarray(u_seq, dtype=float)
    if u_seq.ndim == 2:
        u_seq = u_seq[np.newaxis]
    batch, horizon, _ = u_seq.shape
    slots = np.zeros((batch, horizon, SLOT_CHANNELS))
    if layout == LAYOUT_EVERY_SLOT:
        slots[:, :, :N_OUTPUTS] = y0[:, np.newaxis, :]
    elif layout == LAYOUT_FIRST_SLOT:
        slots[:, 0, :N_OUTPUTS] = y0
    else:
        raise ValueError(f"unknown input layout {layout!r}")
    slots[:, :, N_OUTPUTS:] = u_seq
    return slots


def _forward_slots(net: NetworkParameters, slots: np.ndarray, keep_cache: bool):
    """Run all layers over the slot tensor; optionally cache for backprop."""
    batch, horizon, _ = slots.shape
    x = slots
    cache = [] if keep_cache else None
    for layer in net.layers:
        hid = layer.hidden_size
        w_h = layer.weights[:, :hid]
        w_x = layer.weights[:, hid:]
        # Input contributions for every slot in one matmul; only the
        # hidden-state recurrence needs the sequential loop.
        act_in = x.reshape(batch * horizon, -1) @ w_x.T
        act_in = act_in.reshape(batch, horizon, 4 * hid) + layer.biases
        h = np.zeros((batch, hid))
        c = np.zeros((batch, hid))
        gates = np.empty((batch, horizon, 4 * hid)) if keep_cache else None
        c_seq = np.empty((batch, horizon, hid)) if keep_cache else None
        tanh_c_seq = np.empty((batch, horizon, hid)) if keep_cache else None
        h_seq = np.empty((batch, horizon, hid))
        for t in range(horizon):
            act = h @ w_h.T + act_in[:, t]
            gi = sigmoid(act[:, :hid])
            gf = sigmoid(act[:, hid : 2 * hid])
            go = sigmoid(act[:, 2 * hid : 3 * hid])
            cand = np.tanh(act[:, 3 * hid :])
            c = gf * c + gi * cand
            tanh_c = np.tanh(c)
            h = go * tanh_c
            h_seq[:, t] = h
            if keep_cache:
                gates[:, t, :hid] = gi
                gates[:, t, hid : 2 * hid] = gf
                gates[:, t, 2 * hid : 3 * hid] = go
                gates[:, t, 3 * hid :] = cand
                c_seq[:, t] = c
                tanh_c_seq[:, t] = tanh_c
        if keep_cache:
            cache.append({"x": x, "gates": gates, "c": c_seq, "tanh_c": tanh_c_seq, "h": h_seq})
        x = h_seq
    top_last = x[:, -1]
    pred = top_last @ net.readout_weights.T + net.readout_bias
    return pred, top_last, cache


def forward(net: NetworkParameters, y0, u_seq) -> np.ndarray:
    """Normalized-space prediction for one window or a batch of windows.

    y0: (2,) or (batch, 2); u_seq: (horizon, 2) or (batch, horizon, 2). The
    horizon must match the one the network was built for. Pure function of
    its inputs; repeated calls give bit-identical results.
    """
    u_arr = np.asarray(u_seq, dtype=float)
    single = u_arr.ndim == 2
    slots = assemble_slots(y0, u_arr, net.layout)
    if slots.shape[1] != net.horizon:
        raise ValueError(f"window horizon {slots.shape[1]} does not match network horizon {net.horizon}")
    pred, _, _ = _forward_slots(net, slots, keep_cache=False)
    return pred[0] if single else pred


def predict_window(net: NetworkParameters, norm: Normalization, window: RegressorWindow) -> np.ndarray:
    """Physical-units prediction for a physical-units regressor window."""
    pred = forward(net, norm.normalize_y(window.y0), norm.normalize_u(window.u_seq))
    return norm.denormalize_y(pred)


def loss_mae(predictions, targets) -> float:
    """Mean absolute error over all windows and output channels."""
    p = np.asarray(predictions, dtype=float)
    t = np.asarray(targets, dtype=float)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: predictions {p.shape} vs targets {t.shape}")
    if p.size == 0:
        raise ValueError("cannot evaluate the loss of an empty batch")
    return float(np.mean(np.abs(p - t)))


def backward(net: NetworkParameters, y0, u_seq, targets) -> tuple[float, list[np.ndarray]]:
    """MAE loss and its exact gradients for a batch of normalized windows.

    Returns (loss, grads) with grads ordered like net.parameter_arrays().
    The subgradient of |e| at e = 0 is taken as 0.
    """
    slots = assemble_slots(y0, u_seq, net.layout)
    if slots.shape[1] != net.horizon:
        raise ValueError(f"window horizon {slots.shape[1]} does not match network horizon {net.horizon}")
    t_arr = np.atleast_2d(np.asarray(targets, dtype=float))
    batch, horizon, _ = slots.shape
    pred, top_last, cache = _forward_slots(net, slots, keep_cache=True)
    loss = loss_mae(pred, t_arr)

    d_pred = np.sign(pred - t_arr) / (batch * N_OUTPUTS)
    d_readout_w = d_pred.T @ top_last
    d_readout_b = d_pred.sum(axis=0)

    # Seed the top layer's hidden-state gradient at the final slot only.
    d_h_seq = np.zeros((batch, horizon, net.layers[-1].hidden_size))
    d_h_seq[:, -1] = d_pred @ net.readout_weights

    layer_grads: list[tuple[np.ndarray, np.ndarray]] = []
    for layer, layer_cache in zip(reversed(net.layers), reversed(cache)):
        hid = layer.hidden_size
        w_h = layer.weights[:, :hid]
        w_x = layer.weights[:, hid:]
        gates = layer_cache["gates"]
        c_seq = layer_cache["c"]
        tanh_c = layer_cache["tanh_c"]
        h_seq = layer_cache["h"]
        x = layer_cache["x"]

        d_act = np.empty((batch, horizon, 4 * hid))
        dh_carry = np.zeros((batch, hid))
        dc_carry = np.zeros((batch, hid))
        for t in reversed(range(horizon)):
            gi = gates[:, t, :hid]
            gf = gates[:, t, hid : 2 * hid]
            go = gates[:, t, 2 * hid : 3 * hid]
            cand = gates[:, t, 3 * hid :]
            tc = tanh_c[:, t]
            c_prev = c_seq[:, t - 1] if t > 0 else np.zeros((batch, hid))
            dh = d_h_seq[:, t] + dh_carry
            dc = dc_carry + dh * go * (1.0 - tc * tc)
            da = d_act[:, t]
            da[:, :hid] = dc * cand * gi * (1.0 - gi)
            da[:, hid : 2 * hid] = dc * c_prev * gf * (1.0 - gf)
            da[:, 2 * hid : 3 * hid] = dh * tc * go * (1.0 - go)
            da[:, 3 * hid :] = dc * gi * (1.0 - cand * cand)
            dh_carry = da @ w_h
            dc_carry = dc * gf
        h_prev_seq = np.concatenate([np.zeros((batch, 1, hid)), h_seq[:, :-1]], axis=1)
        z_all = np.concatenate([h_prev_seq, x], axis=2).reshape(batch * horizon, -1)
        da_flat = d_act.reshape(batch * horizon, 4 * hid)
        d_weights = da_flat.T @ z_all
        d_biases = da_flat.sum(axis=0)
        layer_grads.append((d_weights, d_biases))
        # Gradient with respect to this layer's inputs feeds the layer below.
        d_h_seq = (da_flat @ w_x).reshape(batch, horizon, -1)

    grads: list[np.ndarray] = []
    for d_weights, d_biases in reversed(layer_grads):
        grads.extend([d_weights, d_biases])
    grads.extend([d_readout_w, d_readout_b])
    return loss, grads


@dataclass
class AdamState:
    """First/second-moment accumulators and hyperparameters for ADAM."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_parameters(
        cls,
        params: list[np.ndarray],
        learning_rate: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> "AdamState":
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            learning_rate=learning_rate,
            beta1=beta1,
            beta2=beta2,
            eps=eps,
        )


def adam_step(state: AdamState, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
    """Bias-corrected ADAM update applied in place to the parameter arrays."""
    if len(params) != len(state.m) or len(grads) != len(state.m):
        raise ValueError("parameter, gradient and state lists must align")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1**state.step
    correction2 = 1.0 - b2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        p -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)


def train(
    net: NetworkParameters,
    dataset: Dataset,
    epochs: int,
    batch_size: int = 64,
    seed: int = 0,
    learning_rate: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> list[float]:
    """Shuffled mini-batch training; returns the per-epoch mean training loss.

    The dataset must already be normalized. Deterministic under a fixed seed.
    Aborts with a diagnostic if the loss becomes non-finite.
    """
    if epochs < 1:
        raise ValueError(f"epochs must be >= 1, got {epochs}")
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    if dataset.normalization is None:
        raise ValueError("train expects a normalized dataset")
    if dataset.horizon != net.horizon:
        raise ValueError(
            f"dataset horizon {dataset.horizon} does not match network horizon {net.horizon}"
        )
    params = net.parameter_arrays()
    state = AdamState.for_parameters(
        params, learning_rate=learning_rate, beta1=beta1, beta2=beta2, eps=eps
    )
    rng = np.random.default_rng(seed)
    n = len(dataset)
    history: list[float] = []
    for epoch in range(epochs):
        order = rng.permutation(n)
        abs_err_total = 0.0
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            loss, grads = backward(net, dataset.y0[idx], dataset.u_seq[idx], dataset.target[idx])
            if not np.isfinite(loss):
                raise RuntimeError(
                    f"training diverged: non-finite loss at epoch {epoch}, "
                    f"batch starting at {start}"
                )
            adam_step(state, params, grads)
            abs_err_total += loss * len(idx) * N_OUTPUTS
        history.append(abs_err_total / (n * N_OUTPUTS))
    return history


def evaluate_rmse(net: NetworkParameters, dataset: Dataset, norm: Normalization | None = None) -> float:
    """Root-mean-square prediction error in physical units, averaged over channels.

    The dataset must be in physical units; the normalization used at training
    time (or the one stored on the network) maps inputs in and predictions out.
    """
    if dataset.normalization is not None:
        raise ValueError("evaluate_rmse expects a physical-units dataset")
    norm = norm if norm is not None else net.normalization
    if norm is None:
        raise ValueError("no normalization record available")
    pred_norm = forward(net, norm.normalize_y(dataset.y0), norm.normalize_u(dataset.u_seq))
    pred = norm.denormalize_y(pred_norm)
    err = pred - dataset.target
    per_channel = np.sqrt(np.mean(err**2, axis=0))
    return float(np.mean(per_channel))


def save_model(
    net: NetworkParameters,
    normalization: Normalization | None,
    path,
    config_digest: str | None = None,
) -> None:
    """Persist the network as JSON with full double precision."""
    norm = normalization if normalization is not None else net.normalization
    doc = {
        "format_version": 1,
        "p": net.horizon,
        "layers": [
            {
                "hidden": layer.hidden_size,
                "W_i": layer.w_i.tolist(),
                "W_f": layer.w_f.tolist(),
                "W_o": layer.w_o.tolist(),
                "W_C": layer.w_c.tolist(),
                "b_i": layer.b_i.tolist(),
                "b_f": layer.b_f.tolist(),
                "b_o": layer.b_o.tolist(),
                "b_c": layer.b_c.tolist(),
            }
            for layer in net.layers
        ],
        "readout": {"W": net.readout_weights.tolist(), "b": net.readout_bias.tolist()},
        "normalization": norm.to_dict() if norm is not None else None,
        "meta": net.meta,
    }
    if config_digest is not None:
        doc["config_digest"] = config_digest
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_model(path) -> NetworkParameters:
    """Load a saved model, validating every layer's shapes."""
    with open(path) as fh:
        doc = json.load(fh)
    layers = []
    expected_in = SLOT_CHANNELS
    for idx, layer_doc in enumerate(doc["layers"]):
        hidden = int(layer_doc["hidden"])
        blocks, biases = [], []
        for w_key, b_key in (("W_i", "b_i"), ("W_f", "b_f"), ("W_o", "b_o"), ("W_C", "b_c")):
            w = np.asarray(layer_doc[w_key], dtype=float)
            b = np.asarray(layer_doc[b_key], dtype=float)
            if w.shape != (hidden, hidden + expected_in):
                raise ValueError(
                    f"layer {idx}: {w_key} has shape {w.shape}, "
                    f"expected ({hidden}, {hidden + expected_in})"
                )
            if b.shape != (hidden,):
                raise ValueError(f"layer {idx}: {b_key} has shape {b.shape}, expected ({hidden},)")
            blocks.append(w)
            biases.append(b)
        layers.append(
            LstmLayerParams(weights=np.concatenate(blocks, axis=0), biases=np.concatenate(biases))
        )
        expected_in = hidden
    readout_w = np.asarray(doc["readout"]["W"], dtype=float)
    readout_b = np.asarray(doc["readout"]["b"], dtype=float)
    norm = Normalization.from_dict(doc["normalization"]) if doc.get("normalization") else None
    return NetworkParameters(
        layers=layers,
        readout_weights=readout_w,
        readout_bias=readout_b,
        horizon=int(doc["p"]),
        normalization=norm,
        meta=doc.get("meta", dict(DEFAULT_META)),
    )


def load_model_digest(path) -> str | None:
    """Configuration digest embedded in a saved model, if any."""
    with open(path) as fh:
        return json.load(fh).get("config_digest")
