"""Desk-scale Fusion-in-Decoder encoder-decoder in NumPy."""

from repoctx.fid.model import ModelConfig, forward, init_params, loss, loss_and_grad
from repoctx.fid.vocab import Vocab, build_vocab

__all__ = ["ModelConfig", "Vocab", "build_vocab", "forward", "init_params", "loss", "loss_and_grad"]
