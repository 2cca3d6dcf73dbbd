"""Long short-term memory network over fixed-length input windows.

Standard four-gate cell. Each window is processed from zero initial hidden
and cell state; a linear readout maps the final hidden state of the top
layer to the outputs. Backward is full backpropagation through time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError, UsageError
from .data import SequenceBatch
from .mlp import glorot_uniform

GATES = ("i", "f", "g", "o")


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


@dataclass
class LstmLayerParams:
    """Per-gate input-to-hidden (w_*), hidden-to-hidden (u_*) matrices and
    biases for one recurrent layer."""

    w_i: np.ndarray
    w_f: np.ndarray
    w_g: np.ndarray
    w_o: np.ndarray
    u_i: np.ndarray
    u_f: np.ndarray
    u_g: np.ndarray
    u_o: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_g: np.ndarray
    b_o: np.ndarray

    @property
    def features(self) -> int:
        return self.w_i.shape[0]

    @property
    def hidden(self) -> int:
        return self.w_i.shape[1]

    def validate(self):
        h, f = self.hidden, self.features
        for gate in GATES:
            if getattr(self, f"w_{gate}").shape != (f, h):
                raise ShapeError(f"w_{gate} shape mismatch")
            if getattr(self, f"u_{gate}").shape != (h, h):
                raise ShapeError(f"u_{gate} shape mismatch")
            if getattr(self, f"b_{gate}").shape != (h,):
                raise ShapeError(f"b_{gate} shape mismatch")

    def fused(self):
        w = np.hstack([getattr(self, f"w_{g}") for g in GATES])
        u = np.hstack([getattr(self, f"u_{g}") for g in GATES])
        b = np.concatenate([getattr(self, f"b_{g}") for g in GATES])
        return w, u, b


@dataclass
class LstmParams:
    """Recurrent layer stack plus the dense readout."""

    layers: list = field(default_factory=list)
    w_out: np.ndarray = None
    b_out: np.ndarray = None
    hidden_size: int = 10
    sequence_length: int = 10

    def __post_init__(self):
        for layer in self.layers:
            layer.validate()
        if self.layers and self.layers[-1].hidden != self.w_out.shape[0]:
            raise ShapeError("readout input dim does not match top hidden size")
        if self.layers and self.layers[-1].hidden != self.hidden_size:
            raise ShapeError("hidden_size field disagrees with gate shapes")

    def tree(self) -> dict:
        out = {}
        for li, layer in enumerate(self.layers):
            for kind in ("w", "u", "b"):
                for gate in GATES:
                    out[f"l{li}.{kind}_{gate}"] = getattr(layer, f"{kind}_{gate}")
        out["w_out"] = self.w_out
        out["b_out"] = self.b_out
        return out

    def with_tree(self, tree: dict) -> "LstmParams":
        layers = []
        for li in range(len(self.layers)):
            kwargs = {
                f"{kind}_{gate}": tree[f"l{li}.{kind}_{gate}"]
                for kind in ("w", "u", "b")
                for gate in GATES
            }
            layers.append(LstmLayerParams(**kwargs))
        return LstmParams(
            layers=layers,
            w_out=tree["w_out"],
            b_out=tree["b_out"],
            hidden_size=self.hidden_size,
            sequence_length=self.sequence_length,
        )


def init_lstm(
    features: int,
    hidden_size: int,
    out_dim: int,
    sequence_length: int,
    rng: np.random.Generator,
    n_layers: int = 1,
) -> LstmParams:
    layers = []
    fan_in = features
    for _ in range(n_layers):
        kwargs = {}
        for gate in GATES:
            kwargs[f"w_{gate}"] = glorot_uniform(rng, fan_in, hidden_size)
            kwargs[f"u_{gate}"] = glorot_uniform(rng, hidden_size, hidden_size)
            kwargs[f"b_{gate}"] = np.zeros(hidden_size)
        layers.append(LstmLayerParams(**kwargs))
        fan_in = hidden_size
    w_out = glorot_uniform(rng, hidden_size, out_dim)
    return LstmParams(
        layers=layers,
        w_out=w_out,
        b_out=np.zeros(out_dim),
        hidden_size=hidden_size,
        sequence_length=sequence_length,
    )


class Lstm:
    """Stateful wrapper caching per-step gate values for backward."""

    def __init__(self, params: LstmParams):
        self.params = params
        self._cache = None

    @property
    def out_dim(self) -> int:
        return self.params.w_out.shape[1]

    def forward(self, batch) -> np.ndarray:
        windows = batch.windows if isinstance(batch, SequenceBatch) else np.asarray(batch)
        if windows.ndim != 3:
            raise ShapeError(f"windows must be 3-D, got shape {windows.shape}")
        n_win, s, n_feat = windows.shape
        if s != self.params.sequence_length:
            raise ShapeError(
                f"window length {s} != configured sequence length "
                f"{self.params.sequence_length}"
            )
        if self.params.layers and n_feat != self.params.layers[0].features:
            raise ShapeError(
                f"{n_feat} features vs layer expecting {self.params.layers[0].features}"
            )
        x_seq = windows
        layer_caches = []
        for layer in self.params.layers:
            w, u, b = layer.fused()
            hid = layer.hidden
            h = np.zeros((n_win, hid))
            c = np.zeros((n_win, hid))
            steps = []
            h_seq = np.empty((n_win, s, hid))
            for t in range(s):
                x_t = x_seq[:, t, :]
                a = x_t @ w + h @ u + b
                ai, af, ag, ao = np.hsplit(a, 4)
                gi, gf, go = _sigmoid(ai), _sigmoid(af), _sigmoid(ao)
                gg = np.tanh(ag)
                c_new = gf * c + gi * gg
                tc = np.tanh(c_new)
                steps.append((x_t, h, c, gi, gf, gg, go, tc))
                h = go * tc
                c = c_new
                h_seq[:, t, :] = h
            layer_caches.append((w, u, steps))
            x_seq = h_seq
        out = x_seq[:, -1, :] @ self.params.w_out + self.params.b_out
        self._cache = (windows, layer_caches, x_seq)
        return out

    def backward(self, upstream: np.ndarray) -> dict:
        """Gradients of sum(outputs * upstream) w.r.t. every parameter."""
        if self._cache is None:
            raise UsageError("backward called before forward")
        windows, layer_caches, top_seq = self._cache
        g = np.asarray(upstream, dtype=float)
        n_win, s, _ = windows.shape
        if g.shape != (n_win, self.out_dim):
            raise ShapeError(f"upstream {g.shape} != outputs {(n_win, self.out_dim)}")
        grads = {
            "w_out": top_seq[:, -1, :].T @ g,
            "b_out": g.sum(axis=0),
        }
        # gradient flowing into each layer's hidden sequence, per step
        dh_seq = np.zeros_like(top_seq)
        dh_seq[:, -1, :] = g @ self.params.w_out.T
        for li in range(len(self.params.layers) - 1, -1, -1):
            w, u, steps = layer_caches[li]
            hid = self.params.layers[li].hidden
            dw = np.zeros_like(w)
            du = np.zeros_like(u)
            db = np.zeros(w.shape[1])
            dx_seq = np.zeros((n_win, s, w.shape[0]))
            dh = np.zeros((n_win, hid))
            dc = np.zeros((n_win, hid))
            for t in range(s - 1, -1, -1):
                x_t, h_prev, c_prev, gi, gf, gg, go, tc = steps[t]
                dh = dh + dh_seq[:, t, :]
                d_go = dh * tc * go * (1.0 - go)
                dc = dc + dh * go * (1.0 - tc * tc)
                d_gi = dc * gg * gi * (1.0 - gi)
                d_gf = dc * c_prev * gf * (1.0 - gf)
                d_gg = dc * gi * (1.0 - gg * gg)
                da = np.hstack([d_gi, d_gf, d_gg, d_go])
                dw += x_t.T @ da
                du += h_prev.T @ da
                db += da.sum(axis=0)
                dx_seq[:, t, :] = da @ w.T
                dh = da @ u.T
                dc = dc * gf
            for kind, tensor in (("w", dw), ("u", du)):
                for gate, block in zip(GATES, np.hsplit(tensor, 4)):
                    grads[f"l{li}.{kind}_{gate}"] = block
            for gate, block in zip(GATES, np.split(db, 4)):
                grads[f"l{li}.b_{gate}"] = block
            dh_seq = dx_seq
        return grads


def lstm_forward(params: LstmParams, batch) -> np.ndarray:
    """Pure forward pass over a window batch (no cache retained)."""
    return Lstm(params).forward(batch)
