"""Reverse-mode autodiff engine and the convolutional-recurrent classifier."""
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .model import CELLS, Model, ModelConfig, init_params, model_forward, parameter_count, parameter_shapes
from .ops import avg_pool1d, conv1d, dropout, linear, relu, softmax_cross_entropy
from .optim import SGD, Adam, AdamState, adam_step, make_optimizer
from .recurrent import lstm_forward, rnn_forward
from .tensor import Tensor, parameter
