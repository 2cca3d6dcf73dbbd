"""Small dense neural-network engine: MLP and LSTM forward passes,
reverse-mode parameter gradients, sequence windowing, and Adam."""

from .data import MinMaxScaler, SequenceBatch, make_sequences
from .lstm import Lstm, LstmLayerParams, LstmParams, init_lstm, lstm_forward
from .mlp import Mlp, MlpParams, init_mlp, mlp_forward
from .optim import AdamState, adam_step

__all__ = [
    "AdamState",
    "Lstm",
    "LstmLayerParams",
    "LstmParams",
    "MinMaxScaler",
    "Mlp",
    "MlpParams",
    "SequenceBatch",
    "adam_step",
    "init_lstm",
    "init_mlp",
    "lstm_forward",
    "make_sequences",
    "mlp_forward",
]
